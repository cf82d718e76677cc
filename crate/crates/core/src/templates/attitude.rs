//! Graph-error attitude law and the clocked gain bound.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeParams {
    /// Reference decay rate of `ȧ = -k a`.
    pub k: f64,
    /// Gain on the graph error `ȧ + k a`.
    pub k_g: f64,
    pub omega_a: f64,
    pub eps_a: f64,
    pub delta_bar_max: f64,
}

impl Default for AttitudeParams {
    fn default() -> Self {
        let base = Self {
            k: 1.0,
            k_g: 200.0,
            omega_a: 10.0,
            eps_a: 0.05,
            delta_bar_max: 0.05,
        };
        base.with_gain_margin(1.5)
    }
}

impl AttitudeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("k", self.k),
            ("k_g", self.k_g),
            ("omega_a", self.omega_a),
            ("eps_a", self.eps_a),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("attitude: {name} must be positive")));
            }
        }
        if !(self.delta_bar_max >= 0.0 && self.delta_bar_max.is_finite()) {
            return Err(Error::InvalidArgument("attitude: delta_bar_max must be non-negative".into()));
        }
        Ok(())
    }

    /// `k` set to `factor` times the gain bound, with `k_g = 200 k`.
    pub fn with_gain_margin(self, factor: f64) -> Self {
        let k = factor * required_gain_bound(&self);
        Self { k, k_g: 200.0 * k, ..self }
    }

    /// Per-stride contraction `e^{-kπ/ω_a}(1 - kπ/ω_a)`.
    pub fn zeta(&self) -> f64 {
        let q = self.k * PI / self.omega_a;
        (-q).exp() * (1.0 - q)
    }
}

pub fn graph_error_accel(a: f64, adot: f64, p: &AttitudeParams) -> f64 {
    -p.k_g * (adot + p.k * a)
}

/// Smallest `k` for which a stance disturbance of `δ̄_max` keeps the error ball `ε_a` reachable.
pub fn required_gain_bound(p: &AttitudeParams) -> f64 {
    2.0 * p.omega_a / PI * (p.delta_bar_max / p.eps_a).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accel_examples() {
        let p = AttitudeParams { k: 2.0, k_g: 50.0, ..Default::default() };
        assert_eq!(graph_error_accel(0.0, 0.0, &p), 0.0);
        assert_eq!(graph_error_accel(0.1, -0.2, &p), 0.0);
        assert!((graph_error_accel(0.1, 0.0, &p) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn bound_examples() {
        let p = AttitudeParams { delta_bar_max: 0.0, ..Default::default() };
        assert_eq!(required_gain_bound(&p), 0.0);
        let p = AttitudeParams { omega_a: PI / 2.0, eps_a: 0.1, delta_bar_max: 0.1, ..Default::default() };
        assert!((required_gain_bound(&p) - 2f64.ln()).abs() < 1e-12);
        let q = AttitudeParams { omega_a: PI, ..p };
        assert!((required_gain_bound(&q) - 2.0 * required_gain_bound(&p)).abs() < 1e-12);
    }

    #[test]
    fn zeta_examples() {
        let p = AttitudeParams::default();
        assert!((required_gain_bound(&p) - 20.0 / PI * 2f64.ln()).abs() < 1e-12);
        assert!((p.k_g - 200.0 * p.k).abs() < 1e-9);
        let dead = AttitudeParams { k: p.omega_a / PI, ..p };
        assert!(dead.zeta().abs() < 1e-15);
        assert!((-0.14..-0.13).contains(&p.zeta()));
    }
}
