use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

/// Compares analytic gradients against central differences for every entry of
/// every parameter in `params`.
///
/// The relative error for an entry is
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn finite_difference_check<F>(
    loss_builder: F,
    params: &ParamStore,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Graph) -> Result<NodeId>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::contract("epsilon must be positive"));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let loss = loss_builder(store, &mut g)?;
        Ok(g.scalar(loss))
    };

    let mut graph = Graph::new();
    let loss = loss_builder(params, &mut graph)?;
    let again = eval(params)?;
    if graph.scalar(loss).to_bits() != again.to_bits() {
        return Err(Error::contract(format!(
            "loss builder is not deterministic: {} vs {}",
            graph.scalar(loss),
            again
        )));
    }
    let analytic = graph.param_gradients(loss, params)?;

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    for id in params.ids() {
        let grad = analytic.dense(params, id);
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            work.get_mut(id).data_mut()[k] = orig + epsilon;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig - epsilon;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = grad.data()[k];
            let rel = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            report.entries_checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = Some((params.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}
