//! Damped vertical spring energized by a phase-locked pump.
//!
//! State is `x = (χ, χ̇/ω)` where `χ` is the spring deflection.

use crate::analysis::bracketed_root;
use crate::error::{Error, Result};
use crate::hybrid::{integrate_mode, HybridSystem, IntegratorSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalParams {
    pub omega: f64,
    /// Written β̄ elsewhere; also called σ.
    pub damping_ratio: f64,
    pub k_t: f64,
    pub eps: f64,
}

impl Default for VerticalParams {
    fn default() -> Self {
        Self {
            omega: 10.0,
            damping_ratio: 0.1,
            k_t: 2.0,
            eps: 0.01,
        }
    }
}

impl VerticalParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(format!("vertical: {m}")));
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return fail("omega must be positive");
        }
        if !(self.damping_ratio >= 0.0 && self.damping_ratio.is_finite()) {
            return fail("damping_ratio must be non-negative");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail("eps must be positive");
        }
        if !(self.k_t >= 0.0 && self.k_t.is_finite()) {
            return fail("k_t must be non-negative");
        }
        Ok(())
    }

    /// Radius of the stance limit circle, `k_t / (2β̄ω²) - ε`, when it exists.
    pub fn limit_radius(&self) -> Option<f64> {
        if self.damping_ratio <= 0.0 {
            return None;
        }
        let r = self.k_t / (2.0 * self.damping_ratio * self.omega * self.omega) - self.eps;
        (r > 0.0).then_some(r)
    }

    /// Touchdown velocity on the limit circle.
    pub fn fixed_touchdown_velocity(&self) -> Option<f64> {
        self.limit_radius().map(|r| -self.omega * r)
    }
}

pub fn tail_pump_torque(x: [f64; 2], p: &VerticalParams) -> f64 {
    p.k_t * x[1] / (x[0].hypot(x[1]) + p.eps)
}

pub fn vertical_stance_field(x: [f64; 2], p: &VerticalParams) -> [f64; 2] {
    let w = p.omega;
    let gain = -2.0 * p.damping_ratio * w + p.k_t / (w * (x[0].hypot(x[1]) + p.eps));
    [w * x[1], -w * x[0] + gain * x[1]]
}

/// Single stance mode, entered at `χ = 0` compressing and left at `χ = 0` extending.
struct StanceOnly<'a>(&'a VerticalParams);

impl HybridSystem for StanceOnly<'_> {
    fn state_dim(&self) -> usize {
        2
    }
    fn mode_count(&self) -> usize {
        1
    }
    fn field(&self, _: usize, _: f64, x: &[f64], dx: &mut [f64]) {
        let d = vertical_stance_field([x[0], x[1]], self.0);
        dx.copy_from_slice(&d);
    }
    fn guard(&self, _: usize, x: &[f64]) -> f64 {
        -x[0]
    }
    fn reset(&self, _: usize, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

/// Liftoff velocity reached from touchdown velocity `chidot_td < 0`.
pub fn vertical_stance_map(chidot_td: f64, p: &VerticalParams, settings: &IntegratorSettings) -> Result<f64> {
    Ok(vertical_stance_orbit(chidot_td, p, settings)?.1)
}

/// Stance time and liftoff velocity from touchdown velocity `chidot_td < 0`.
pub fn vertical_stance_orbit(
    chidot_td: f64,
    p: &VerticalParams,
    settings: &IntegratorSettings,
) -> Result<(f64, f64)> {
    if !(chidot_td < 0.0) {
        return Err(Error::InvalidTouchdown {
            vx: 0.0,
            vz: chidot_td,
            reason: "stance starts compressing (negative velocity)".into(),
        });
    }
    let sys = StanceOnly(p);
    let seg = integrate_mode(&sys, 0, &[0.0, chidot_td / p.omega], 0.0, settings.max_segment_time, settings)?;
    let ev = seg.terminal_event.ok_or(Error::Degenerate {
        mode: 0,
        time: settings.max_segment_time,
        reason: "stance never ends".into(),
    })?;
    Ok((ev.time, p.omega * ev.state[1]))
}

const CHIDOT_FLOOR: f64 = 1e-12;

/// `κ = -F₁(χ̇)/χ̇`. Even in `χ̇`, evaluated on the compression branch.
pub fn velocity_gain(chidot: f64, p: &VerticalParams, settings: &IntegratorSettings) -> Result<f64> {
    if !(chidot.abs() > CHIDOT_FLOOR) {
        return Err(Error::InvalidArgument(format!(
            "velocity gain undefined at chidot = {chidot:e}"
        )));
    }
    let v = -chidot.abs();
    Ok(-vertical_stance_map(v, p, settings)? / v)
}

/// Touchdown velocity (negative) whose velocity gain is `kappa`.
pub fn velocity_gain_inverse(kappa: f64, p: &VerticalParams, settings: &IntegratorSettings) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InversionFailure(format!("kappa must be positive, got {kappa}")));
    }
    let center = p
        .fixed_touchdown_velocity()
        .map(f64::abs)
        .unwrap_or(1.0)
        .ln();
    let f = |s: f64| velocity_gain(-s.exp(), p, settings).map(|k| k - kappa);
    let f0 = f(center)?;
    if f0.abs() <= 1e-12 {
        return Ok(-center.exp());
    }
    // The gain decreases with speed; larger targets sit at smaller speeds.
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let mut prev = center;
    let mut width = 0.25;
    loop {
        width *= 2.0;
        if width > 16.0 {
            return Err(Error::InversionFailure(format!("velocity gain {kappa} not attained")));
        }
        let next = center + dir * width;
        if f(next)?.signum() != f0.signum() {
            let s = bracketed_root(f, prev.min(next), prev.max(next), 1e-10, 200)?;
            return Ok(-s.exp());
        }
        prev = next;
    }
}

/// `κ ↦ h_vg(κ · h_vg⁻¹(κ))`: one stride of the hopping height in gain coordinates.
pub fn vertical_return_map(kappa: f64, p: &VerticalParams, settings: &IntegratorSettings) -> Result<f64> {
    let chidot = velocity_gain_inverse(kappa, p, settings)?;
    velocity_gain(kappa * chidot, p, settings)
}

/// Stance and ballistic flight in `(χ, χ̇/ω)` coordinates, for whole executions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalHopper {
    pub params: VerticalParams,
    pub gravity: f64,
}

impl HybridSystem for VerticalHopper {
    fn state_dim(&self) -> usize {
        2
    }
    fn field(&self, mode: usize, _: f64, x: &[f64], dx: &mut [f64]) {
        if mode == 0 {
            dx.copy_from_slice(&vertical_stance_field([x[0], x[1]], &self.params));
        } else {
            dx[0] = self.params.omega * x[1];
            dx[1] = -self.gravity / self.params.omega;
        }
    }
    fn guard(&self, mode: usize, x: &[f64]) -> f64 {
        if mode == 0 {
            -x[0]
        } else {
            x[0]
        }
    }
    fn reset(&self, _: usize, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0, x[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings() -> IntegratorSettings {
        IntegratorSettings::default()
    }

    #[test]
    fn pump_examples() {
        let p = VerticalParams { k_t: 2.0, eps: 1e-12, ..Default::default() };
        assert!((tail_pump_torque([0.0, 1.0], &p) - 2.0).abs() < 1e-9);
        assert_eq!(tail_pump_torque([1.0, 0.0], &p), 0.0);
        let p = VerticalParams { k_t: 1.0, eps: 0.01, ..Default::default() };
        assert!((tail_pump_torque([0.03, 0.04], &p) - 0.04 / 0.06).abs() < 1e-12);
    }

    #[test]
    fn origin_is_equilibrium() {
        assert_eq!(vertical_stance_field([0.0, 0.0], &VerticalParams::default()), [0.0, 0.0]);
    }

    #[test]
    fn limit_radius_default() {
        assert!((VerticalParams::default().limit_radius().unwrap() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn conservative_stance_reverses() {
        let p = VerticalParams { k_t: 0.0, damping_ratio: 0.0, ..Default::default() };
        for v in [-0.1, -1.0, -3.0] {
            assert!((vertical_stance_map(v, &p, &settings()).unwrap() + v).abs() < 1e-8);
            assert!((velocity_gain(v, &p, &settings()).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn damping_loses_speed() {
        let p = VerticalParams { k_t: 0.0, damping_ratio: 0.1, ..Default::default() };
        let out = vertical_stance_map(-1.0, &p, &settings()).unwrap();
        assert!(out > 0.0 && out < 1.0);
        // Underdamped oscillator half-cycle: exp(-β̄π/√(1-β̄²)).
        let expected = (-0.1 * std::f64::consts::PI / (1.0f64 - 0.01).sqrt()).exp();
        assert!((out - expected).abs() < 1e-7, "{out} vs {expected}");
    }

    #[test]
    fn pump_gains_near_origin() {
        let p = VerticalParams::default();
        assert!(velocity_gain(-0.05, &p, &settings()).unwrap() > 1.0);
    }

    #[test]
    fn fixed_point_has_unit_gain() {
        let p = VerticalParams::default();
        let v = p.fixed_touchdown_velocity().unwrap();
        assert!((v + 0.9).abs() < 1e-15);
        assert!((vertical_stance_map(v, &p, &settings()).unwrap() + v).abs() < 1e-8);
    }

    #[test]
    fn inverse_round_trips() {
        let p = VerticalParams::default();
        for k in [0.8, 0.95, 1.0, 1.2, 3.0] {
            let v = velocity_gain_inverse(k, &p, &settings()).unwrap();
            assert!((velocity_gain(v, &p, &settings()).unwrap() - k).abs() < 1e-9, "kappa {k}");
        }
    }

    #[test]
    fn gain_fixed_point_is_one() {
        let p = VerticalParams::default();
        assert!((vertical_return_map(1.0, &p, &settings()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn conservative_inverse_fails_off_unity() {
        let p = VerticalParams { k_t: 0.0, damping_ratio: 0.0, ..Default::default() };
        let r = velocity_gain_inverse(1.2, &p, &settings());
        assert!(matches!(r, Err(Error::InversionFailure(_))), "{r:?}");
    }

    proptest! {
        #[test]
        fn field_is_odd(a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let p = VerticalParams::default();
            let f = vertical_stance_field([a, b], &p);
            let g = vertical_stance_field([-a, -b], &p);
            prop_assert!((f[0] + g[0]).abs() < 1e-12 && (f[1] + g[1]).abs() < 1e-12);
        }

        #[test]
        fn radial_trichotomy(r in 0.001..0.5f64, th in 0.0..std::f64::consts::TAU) {
            let p = VerticalParams::default();
            let x = [r * th.cos(), r * th.sin()];
            prop_assume!(x[1].abs() > 1e-6);
            let f = vertical_stance_field(x, &p);
            let radial = x[0] * f[0] + x[1] * f[1];
            let rs = p.limit_radius().unwrap();
            prop_assume!((r - rs).abs() > 1e-9);
            prop_assert_eq!(radial > 0.0, r < rs);
        }

        #[test]
        fn rotation_without_pump_or_damping(a in -1.0..1.0f64, b in -1.0..1.0f64) {
            let p = VerticalParams { k_t: 0.0, damping_ratio: 0.0, ..Default::default() };
            let f = vertical_stance_field([a, b], &p);
            prop_assert!((a * f[0] + b * f[1]).abs() < 1e-12);
        }

        #[test]
        fn limit_circle_is_tangent(th in 0.0..std::f64::consts::TAU) {
            let p = VerticalParams::default();
            let r = p.limit_radius().unwrap();
            let x = [r * th.cos(), r * th.sin()];
            let f = vertical_stance_field(x, &p);
            prop_assert!((x[0] * f[0] + x[1] * f[1]).abs() < 1e-12);
        }
    }
}
