use std::fmt;

use super::graph::{backward_gradients, Graph, NodeId};
use super::tensor::ParameterSet;
use crate::error::{Error, Result};

/// Maximum relative error per parameter from a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub step: f64,
    pub tolerance: f64,
    pub per_parameter: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

impl fmt::Display for FdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, err) in &self.per_parameter {
            writeln!(f, "{name}\t{err:.3e}")?;
        }
        write!(
            f,
            "max_relative_error\t{:.3e}\t{}",
            self.max_relative_error,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Compare analytic gradients of `loss_fn` against central finite
/// differences. Each parameter tensor is scored as
/// `‖analytic − central‖₂ / max(‖analytic‖₂, ‖central‖₂)`, which stays
/// robust to rounding noise on near-zero entries while still flagging any
/// structural mistake (a single wrong entry in an n-element tensor scores
/// around n^-1/2, far above practical tolerances). `loss_fn` must be
/// deterministic given the parameters (any noise frozen into the closure);
/// two identical calls that disagree are rejected before differencing.
/// Parameters with gradient recording disabled are not differenced (they
/// are deliberately untrained).
pub fn finite_difference_check<F>(
    loss_fn: F,
    params: &mut ParameterSet,
    step: f64,
    tolerance: f64,
) -> Result<FdReport>
where
    F: Fn(&mut Graph, &ParameterSet) -> NodeId,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let eval = |params: &ParameterSet| -> Result<f64> {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, params);
        g.scalar_value(loss)
    };

    let a = eval(params)?;
    let b = eval(params)?;
    if a.to_bits() != b.to_bits() {
        return Err(Error::StochasticLoss { a, b });
    }

    let analytic = {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, params);
        backward_gradients(&g, loss, params)?
    };

    let mut per_parameter = Vec::with_capacity(params.len());
    let mut overall: f64 = 0.0;
    for idx in 0..params.len() {
        let (name, tensor) = params.at(idx);
        let name = name.to_string();
        if !tensor.requires_grad() {
            continue;
        }
        let n = tensor.numel();
        let (mut diff_sq, mut an_sq, mut cd_sq) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            let orig = params.at(idx).1.data()[i];
            params.at_mut(idx).1.data_mut()[i] = orig + step;
            let plus = eval(params)?;
            params.at_mut(idx).1.data_mut()[i] = orig - step;
            let minus = eval(params)?;
            params.at_mut(idx).1.data_mut()[i] = orig;
            let cd = (plus - minus) / (2.0 * step);
            let an = analytic.buf(idx)[i];
            diff_sq += (an - cd) * (an - cd);
            an_sq += an * an;
            cd_sq += cd * cd;
        }
        let denom = an_sq.sqrt().max(cd_sq.sqrt());
        let rel = if denom == 0.0 {
            0.0
        } else {
            diff_sq.sqrt() / denom
        };
        overall = overall.max(rel);
        per_parameter.push((name, rel));
    }

    Ok(FdReport {
        step,
        tolerance,
        per_parameter,
        max_relative_error: overall,
    })
}
