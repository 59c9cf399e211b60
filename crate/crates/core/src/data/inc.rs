//! Inverse-narrative-cloze sets: each sample shows 6 six-event options that
//! share the first event; exactly one continues the source document, the
//! other five splice in continuations from other documents.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use super::corpus::EventDocument;
use super::SLOTS_PER_EVENT;
use crate::error::{Error, Result};

pub const INC_OPTIONS: usize = 6;
pub const INC_EVENTS: usize = 6;
const OPTION_TOKENS: usize = INC_EVENTS * SLOTS_PER_EVENT;
const OPTION_SEPARATOR: &str = " ||| ";

/// One cloze sample: 6 options of 24 tokens each, one of them gold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncSample {
    pub gold: usize,
    pub options: Vec<Vec<String>>,
}

impl IncSample {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.gold >= INC_OPTIONS {
            return Err(format!("gold index {} out of range", self.gold));
        }
        if self.options.len() != INC_OPTIONS {
            return Err(format!("expected {INC_OPTIONS} options, got {}", self.options.len()));
        }
        for (i, o) in self.options.iter().enumerate() {
            if o.len() != OPTION_TOKENS {
                return Err(format!("option {i} has {} tokens, expected {OPTION_TOKENS}", o.len()));
            }
        }
        Ok(())
    }
}

/// Build `num_samples` cloze sets. The source of each sample is a random
/// document with at least 6 events; its distractors keep the source's first
/// event and continue with events 2-6 of other randomly chosen documents.
/// Options are forced pairwise distinct; the gold slot is drawn uniformly.
pub fn build_inc(
    docs: &[EventDocument],
    num_samples: usize,
    rng: &mut impl Rng,
) -> Result<Vec<IncSample>> {
    let eligible: Vec<usize> = (0..docs.len())
        .filter(|&i| docs[i].events() >= INC_EVENTS)
        .collect();
    if eligible.len() < INC_OPTIONS {
        return Err(Error::Corpus(format!(
            "cloze construction needs at least {INC_OPTIONS} documents with >= {INC_EVENTS} \
             events; corpus has {}",
            eligible.len()
        )));
    }
    let tokens_of = |i: usize| -> Vec<String> {
        docs[i].tokens()[..OPTION_TOKENS].to_vec()
    };
    let mut samples = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let source = eligible[rng.gen_range(0..eligible.len())];
        let gold_option = tokens_of(source);
        let first_event = &gold_option[..SLOTS_PER_EVENT];
        let mut distractors: Vec<Vec<String>> = Vec::with_capacity(INC_OPTIONS - 1);
        let mut attempts = 0;
        while distractors.len() < INC_OPTIONS - 1 {
            attempts += 1;
            if attempts > 200 * INC_OPTIONS {
                return Err(Error::Corpus(
                    "could not assemble pairwise-distinct cloze options; \
                     the corpus is too repetitive"
                        .to_string(),
                ));
            }
            let other = eligible[rng.gen_range(0..eligible.len())];
            if other == source {
                continue;
            }
            let mut candidate = first_event.to_vec();
            candidate.extend_from_slice(&tokens_of(other)[SLOTS_PER_EVENT..]);
            if candidate == gold_option || distractors.contains(&candidate) {
                continue;
            }
            distractors.push(candidate);
        }
        let gold = rng.gen_range(0..INC_OPTIONS);
        let mut options = distractors;
        options.insert(gold, gold_option);
        samples.push(IncSample { gold, options });
    }
    Ok(samples)
}

/// One sample per line: `gold_index TAB option1 ||| option2 ||| ...`.
pub fn serialize_inc(samples: &[IncSample], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for s in samples {
        let options: Vec<String> = s.options.iter().map(|o| o.join(" ")).collect();
        writeln!(out, "{}\t{}", s.gold, options.join(OPTION_SEPARATOR))?;
    }
    Ok(())
}

/// Parsed cloze file plus diagnostics for skipped lines.
#[derive(Debug)]
pub struct IncRead {
    pub samples: Vec<IncSample>,
    pub diagnostics: Vec<String>,
}

/// Read a cloze file; malformed samples are skipped with a diagnostic.
pub fn parse_inc(path: &Path) -> Result<IncRead> {
    let file = File::open(path).map_err(|e| Error::CorpusFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::CorpusFile {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", idx + 1),
        })?;
        match parse_inc_line(&line) {
            Ok(s) => samples.push(s),
            Err(msg) => diagnostics.push(format!("line {}: {msg}", idx + 1)),
        }
    }
    Ok(IncRead {
        samples,
        diagnostics,
    })
}

fn parse_inc_line(line: &str) -> std::result::Result<IncSample, String> {
    let mut fields = line.split('\t');
    let (Some(gold_field), Some(options_field), None) =
        (fields.next(), fields.next(), fields.next())
    else {
        return Err("expected exactly two TAB-separated fields".to_string());
    };
    let gold: usize = gold_field
        .parse()
        .map_err(|_| format!("bad gold index {gold_field:?}"))?;
    let options: Vec<Vec<String>> = options_field
        .split(OPTION_SEPARATOR)
        .map(|o| o.split(' ').map(str::to_string).collect())
        .collect();
    let sample = IncSample { gold, options };
    sample.validate()?;
    Ok(sample)
}
