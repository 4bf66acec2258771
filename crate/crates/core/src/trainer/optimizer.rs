use crate::autodiff::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};

/// AdaDelta constants: decay `rho`, stabilizer `eps`, and a global scale `lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaDelta {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Default for AdaDelta {
    fn default() -> Self {
        AdaDelta {
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

impl AdaDelta {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!(
                "adadelta_rho {} outside [0, 1)",
                self.rho
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config("adadelta_eps must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Running averages of squared gradients and squared updates, one pair of
/// tensors per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdaDelta,
    pub sq_grad: Vec<Tensor>,
    pub sq_delta: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(store: &ParamStore, config: AdaDelta) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, _, t)| Tensor::zeros(t.shape()))
            .collect();
        OptimizerState {
            config,
            sq_grad: zeros.clone(),
            sq_delta: zeros,
        }
    }
}

/// One AdaDelta update of every parameter. Parameters without a gradient are
/// treated as having a zero gradient, so their accumulators still decay.
/// Nothing is modified when any gradient entry is non-finite.
pub fn adadelta_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<()> {
    if state.sq_grad.len() != store.len() {
        return Err(Error::shape(
            "adadelta_step",
            &[state.sq_grad.len()],
            &[store.len()],
        ));
    }
    for (id, g) in grads.iter() {
        if !g.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite gradient for {}",
                store.name(id)
            )));
        }
        if g.shape() != store.get(id).shape() {
            return Err(Error::shape(
                "adadelta_step",
                store.get(id).shape(),
                g.shape(),
            ));
        }
    }
    let AdaDelta { rho, eps, lr } = state.config;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let grad = grads.get(id).map(Tensor::data);
        let theta = store.get_mut(id).data_mut();
        let eg = state.sq_grad[id.0].data_mut();
        let ed = state.sq_delta[id.0].data_mut();
        for k in 0..theta.len() {
            let g = grad.map_or(0.0, |d| d[k]);
            eg[k] = rho * eg[k] + (1.0 - rho) * g * g;
            let delta = -((ed[k] + eps).sqrt() / (eg[k] + eps).sqrt()) * g;
            ed[k] = rho * ed[k] + (1.0 - rho) * delta * delta;
            theta[k] += lr * delta;
        }
    }
    Ok(())
}
