use super::graph::{Graph, ParamStore, Var};
use crate::error::Result;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub checked: usize,
}

/// Floor on the denominator of [`relative_error`]. Central differences at
/// `eps = 1e-5` carry roughly 1e-10 of rounding noise, which would dominate
/// entries whose true gradient is that small.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares backprop gradients of `loss` against central differences for
/// every parameter entry. `loss` must build a deterministic scalar.
pub fn check_gradients<F>(params: &ParamStore, eps: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(params);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |p: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(p);
        let l = loss(&mut g)?;
        Ok(g.scalar(l))
    };
    let mut work = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_param: String::new(), checked: 0 };
    for id in 0..params.len() {
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig - eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(analytic.tensors[id].data()[k], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = format!("{}[{k}]", params.name(id));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
