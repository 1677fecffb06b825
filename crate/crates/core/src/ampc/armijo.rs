//! Backtracking line search with the sufficient-decrease rule.

use serde::{Deserialize, Serialize};

/// Trial steps are `eta0 * shrink^m`; a step is accepted when
/// `loss(eta) <= loss(0) - c * eta * grad_norm_sq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub eta0: f64,
    pub shrink: f64,
    pub c: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams { eta0: 1.0, shrink: 0.5, c: 1e-4 }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.eta0 > 0.0) {
            return Err("eta0 must be positive".into());
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err("shrink must lie in (0, 1)".into());
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err("c must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// Largest step in `{eta0 * shrink^m}` satisfying the sufficient-decrease
/// inequality, or 0 after 50 shrinks. A zero gradient norm accepts `eta0`
/// immediately (nothing to decrease).
pub fn armijo_search<F>(loss: F, grad_norm_sq: f64, params: &ArmijoParams) -> f64
where
    F: Fn(f64) -> f64,
{
    if grad_norm_sq == 0.0 {
        return params.eta0;
    }
    let loss0 = loss(0.0);
    let mut eta = params.eta0;
    for _ in 0..=50 {
        if loss(eta) <= loss0 - params.c * eta * grad_norm_sq {
            return eta;
        }
        eta *= params.shrink;
    }
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_accepts_the_full_step() {
        // loss(eta) = 0.5 (w - 1)^2 after stepping w = 0 by eta along
        // gradient 1: loss(eta) = 0.5 (eta - 1)^2.
        let loss = |eta: f64| 0.5 * (eta - 1.0) * (eta - 1.0);
        let eta = armijo_search(loss, 1.0, &ArmijoParams::default());
        assert_eq!(eta, 1.0);
    }

    #[test]
    fn zero_gradient_returns_eta0() {
        let loss = |_eta: f64| 5.0;
        let eta = armijo_search(loss, 0.0, &ArmijoParams { eta0: 0.7, ..Default::default() });
        assert_eq!(eta, 0.7);
    }

    #[test]
    fn hopeless_direction_returns_zero() {
        // Loss grows steeply for any positive step.
        let loss = |eta: f64| if eta == 0.0 { 1.0 } else { 1.0 + 1e6 * eta.sqrt() + 1e3 };
        let eta = armijo_search(loss, 1.0, &ArmijoParams::default());
        assert_eq!(eta, 0.0);
    }

    #[test]
    fn accepted_step_satisfies_the_inequality() {
        let loss = |eta: f64| (1.0 - 0.9 * eta).powi(2);
        let params = ArmijoParams::default();
        let grad_norm_sq = 3.24; // |dloss/deta at 0| = 1.8, direction norm matching
        let eta = armijo_search(loss, grad_norm_sq, &params);
        assert!(eta > 0.0);
        assert!(loss(eta) <= loss(0.0) - params.c * eta * grad_norm_sq);
    }
}
