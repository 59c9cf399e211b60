//! One document per line: `frames TAB tokens`. Field 1 holds M
//! space-separated frame labels with `-` for absent; field 2 holds 4M
//! space-separated slot tokens (verb subject object modifier per event)
//! with the literal token `None` for an empty slot.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::SLOTS_PER_EVENT;
use crate::error::{Error, Result};

/// A document of M events: per-event frame labels (absent = `None`) and the
/// flat stream of 4M slot tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDocument {
    frames: Vec<Option<String>>,
    tokens: Vec<String>,
}

impl EventDocument {
    /// Panics unless `tokens.len() == 4 * frames.len()`; that shape is the
    /// type's invariant.
    pub fn new(frames: Vec<Option<String>>, tokens: Vec<String>) -> Self {
        assert_eq!(
            tokens.len(),
            SLOTS_PER_EVENT * frames.len(),
            "document needs exactly 4 slot tokens per event"
        );
        assert!(!frames.is_empty(), "document needs at least one event");
        EventDocument { frames, tokens }
    }

    pub fn events(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Option<String>] {
        &self.frames
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The 4 slot tokens of event `m`.
    pub fn event_tokens(&self, m: usize) -> &[String] {
        &self.tokens[m * SLOTS_PER_EVENT..(m + 1) * SLOTS_PER_EVENT]
    }

    /// A copy truncated to the first `events` events.
    pub fn truncated(&self, events: usize) -> EventDocument {
        assert!(events >= 1 && events <= self.events());
        EventDocument {
            frames: self.frames[..events].to_vec(),
            tokens: self.tokens[..events * SLOTS_PER_EVENT].to_vec(),
        }
    }
}

/// Render one document as a corpus line (no trailing newline).
pub fn serialize_document(doc: &EventDocument) -> String {
    let frames: Vec<&str> = doc
        .frames
        .iter()
        .map(|f| f.as_deref().unwrap_or("-"))
        .collect();
    format!("{}\t{}", frames.join(" "), doc.tokens.join(" "))
}

/// Write a corpus, one line per document.
pub fn serialize_corpus(docs: &[EventDocument], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for doc in docs {
        writeln!(out, "{}", serialize_document(doc))?;
    }
    Ok(())
}

fn parse_line(line: &str) -> std::result::Result<EventDocument, String> {
    let mut fields = line.split('\t');
    let (Some(frame_field), Some(token_field), None) =
        (fields.next(), fields.next(), fields.next())
    else {
        return Err("expected exactly two TAB-separated fields".to_string());
    };
    let frames: Vec<&str> = frame_field.split(' ').collect();
    let tokens: Vec<&str> = token_field.split(' ').collect();
    if frames.iter().any(|f| f.is_empty()) || tokens.iter().any(|t| t.is_empty()) {
        return Err("empty field entry (check for doubled or trailing spaces)".to_string());
    }
    if tokens.len() % SLOTS_PER_EVENT != 0 {
        return Err(format!(
            "token count {} is not a multiple of {SLOTS_PER_EVENT}",
            tokens.len()
        ));
    }
    if frames.len() * SLOTS_PER_EVENT != tokens.len() {
        return Err(format!(
            "{} frame labels do not match {} events",
            frames.len(),
            tokens.len() / SLOTS_PER_EVENT
        ));
    }
    let frames = frames
        .into_iter()
        .map(|f| (f != "-").then(|| f.to_string()))
        .collect();
    let tokens = tokens.into_iter().map(str::to_string).collect();
    Ok(EventDocument::new(frames, tokens))
}

/// Parsed corpus plus per-line diagnostics for the lines that were skipped.
#[derive(Debug)]
pub struct CorpusRead {
    pub documents: Vec<EventDocument>,
    pub diagnostics: Vec<String>,
}

/// Read a corpus in file order. Malformed lines are skipped and reported
/// with their line numbers; more than 1% malformed lines aborts the read.
pub fn parse_corpus(path: &Path) -> Result<CorpusRead> {
    let file = File::open(path).map_err(|e| Error::CorpusFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut documents = Vec::new();
    let mut diagnostics = Vec::new();
    let mut total = 0usize;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::CorpusFile {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", idx + 1),
        })?;
        total += 1;
        match parse_line(&line) {
            Ok(doc) => documents.push(doc),
            Err(msg) => diagnostics.push(format!("line {}: {msg}", idx + 1)),
        }
    }
    if diagnostics.len() * 100 > total {
        return Err(Error::CorpusFile {
            path: path.to_path_buf(),
            message: format!(
                "{} of {} lines malformed (over 1%); first: {}",
                diagnostics.len(),
                total,
                diagnostics[0]
            ),
        });
    }
    Ok(CorpusRead {
        documents,
        diagnostics,
    })
}
