//! Fore-aft touchdown-velocity map with a Raibert stepping controller.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForeAftParams {
    /// Stance duration, taken constant.
    pub t_s: f64,
    pub rho_l: f64,
    pub k_p: f64,
    pub xdot_star: f64,
}

impl Default for ForeAftParams {
    fn default() -> Self {
        Self {
            t_s: 0.1,
            rho_l: 0.105,
            k_p: 0.05,
            xdot_star: 0.3,
        }
    }
}

impl ForeAftParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(format!("foreaft: {m}")));
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return fail("t_s must be positive");
        }
        if !(self.rho_l > 0.0 && self.rho_l.is_finite()) {
            return fail("rho_l must be positive");
        }
        if !(self.k_p >= 0.0 && self.k_p.is_finite()) {
            return fail("k_p must be non-negative");
        }
        if !self.xdot_star.is_finite() {
            return fail("xdot_star must be finite");
        }
        Ok(())
    }

    /// Touchdowns descending faster than `2ρ_l/T_s`.
    pub fn in_touchdown_domain(&self, v: [f64; 2]) -> bool {
        v[1] < -2.0 * self.rho_l / self.t_s
    }
}

pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Quarter-turn `[[0, -1], [1, 0]]`.
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

pub fn sweep_angle(v1: f64, p: &ForeAftParams) -> f64 {
    v1 * p.t_s / p.rho_l
}

pub fn neutral_angle(v1: f64, p: &ForeAftParams) -> f64 {
    0.5 * sweep_angle(v1, p)
}

pub fn raibert_touchdown_angle(xdot: f64, p: &ForeAftParams) -> f64 {
    neutral_angle(xdot, p) + p.k_p * (xdot - p.xdot_star)
}

/// `R(γ - β) diag(1, κ) R(-β) v` for explicit angles.
pub fn mbhop_map_with_angles(v: [f64; 2], kappa: f64, beta: f64, gamma: f64) -> [f64; 2] {
    let out = rotation(gamma - beta) * Matrix2::new(1.0, 0.0, 0.0, kappa) * rotation(-beta) * Vector2::new(v[0], v[1]);
    [out[0], out[1]]
}

/// One stride of the touchdown velocity under the stepping controller.
pub fn mbhop_return_map(v: [f64; 2], kappa: f64, p: &ForeAftParams) -> [f64; 2] {
    mbhop_map_with_angles(v, kappa, raibert_touchdown_angle(v[0], p), sweep_angle(v[0], p))
}

/// Closed-form Jacobian at a neutral-angle fixed point (`v₁ = ẋ*`, `κ = 1`).
pub fn mbhop_jacobian_analytic(v_star: [f64; 2], p: &ForeAftParams) -> Matrix2<f64> {
    Matrix2::new(1.0 + 2.0 * p.k_p * v_star[1], 0.0, -2.0 * p.k_p * v_star[0], 1.0)
}

/// Change in fore-aft speed over one stride at touchdown angle `beta`.
pub fn raibert_acceleration(v: [f64; 2], beta: f64, p: &ForeAftParams) -> f64 {
    mbhop_map_with_angles(v, 1.0, beta, sweep_angle(v[0], p))[0] - v[0]
}

/// Derivative of [`raibert_acceleration`] with respect to `beta`.
pub fn raibert_acceleration_slope(v: [f64; 2], beta: f64, p: &ForeAftParams) -> f64 {
    let th = sweep_angle(v[0], p) - 2.0 * beta;
    2.0 * (v[0] * th.sin() + v[1] * th.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sweep_examples() {
        let p = ForeAftParams::default();
        assert_eq!(sweep_angle(0.0, &p), 0.0);
        assert!((sweep_angle(0.5, &p) - 0.476_190_476).abs() < 1e-8);
        assert!((sweep_angle(1.0, &p) - 2.0 * sweep_angle(0.5, &p)).abs() < 1e-15);
    }

    #[test]
    fn raibert_examples() {
        let p = ForeAftParams { k_p: 0.05, xdot_star: 0.3, ..Default::default() };
        assert!((raibert_touchdown_angle(0.5, &p) - (0.238_095_238 + 0.01)).abs() < 1e-8);
        assert_eq!(raibert_touchdown_angle(0.3, &p), neutral_angle(0.3, &p));
        let q = ForeAftParams { k_p: 0.0, ..p };
        assert_eq!(raibert_touchdown_angle(1.7, &q), neutral_angle(1.7, &q));
    }

    #[test]
    fn mbhop_hand_example() {
        let out = mbhop_map_with_angles([1.0, -2.0], 0.9, 0.0, 0.2);
        assert!((out[0] - 1.3377).abs() < 1e-4 && (out[1] + 1.5655).abs() < 1e-4, "{out:?}");
    }

    #[test]
    fn neutral_angle_is_identity() {
        let g = 0.37;
        let out = mbhop_map_with_angles([0.8, -1.1], 1.0, g / 2.0, g);
        assert!((out[0] - 0.8).abs() < 1e-15 && (out[1] + 1.1).abs() < 1e-15);
    }

    #[test]
    fn jacobian_example() {
        let p = ForeAftParams { k_p: 0.05, ..Default::default() };
        let j = mbhop_jacobian_analytic([1.0, -2.0], &p);
        assert!((j - Matrix2::new(0.8, 0.0, -0.1, 1.0)).norm() < 1e-15);
        let q = ForeAftParams { k_p: 0.0, ..p };
        assert_eq!(mbhop_jacobian_analytic([1.0, -2.0], &q), Matrix2::identity());
    }

    proptest! {
        #[test]
        fn unit_gain_preserves_norm(v1 in -2.0..2.0f64, v2 in -3.0..-0.1f64, b in -1.0..1.0f64, g in -1.0..1.0f64) {
            let out = mbhop_map_with_angles([v1, v2], 1.0, b, g);
            prop_assert!((out[0].hypot(out[1]) - v1.hypot(v2)).abs() < 1e-12);
        }

        #[test]
        fn slope_matches_difference(v1 in 0.0..1.0f64, v2 in -3.0..-2.1f64, db in -0.2..0.2f64) {
            let p = ForeAftParams::default();
            let b = neutral_angle(v1, &p) + db;
            let h = 1e-6;
            let fd = (raibert_acceleration([v1, v2], b + h, &p) - raibert_acceleration([v1, v2], b - h, &p)) / (2.0 * h);
            prop_assert!((fd - raibert_acceleration_slope([v1, v2], b, &p)).abs() < 1e-6);
        }
    }
}
