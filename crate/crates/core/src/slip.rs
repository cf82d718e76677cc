//! Planar spring-loaded inverted pendulum with a unit point mass.
//!
//! State layout is `[θ1, θ2, x, z, θ̇1, θ̇2, ẋ, ż, toe_x]`. The leg angle `θ1`
//! is measured from vertical and `θ2` is the leg length. In stance the mass
//! position is slaved to the leg through the pinned toe at `(toe_x, 0)`; in
//! flight the leg coordinates are held at their liftoff values.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::analysis::{eigenvalues_2x2, find_fixed_point, jury_test_2x2, numeric_jacobian, JuryReport, JuryVerdict};
use crate::error::{Error, Result};
use crate::hybrid::{execute, HybridExecution, HybridSystem, IntegratorSettings, Method, Stop};
use crate::templates::foreaft::{j_matrix, mbhop_map_with_angles, raibert_touchdown_angle, rotation, sweep_angle, ForeAftParams};
use crate::templates::vertical::{tail_pump_torque, velocity_gain, vertical_stance_map, VerticalParams};

pub const TH1: usize = 0;
pub const TH2: usize = 1;
pub const X: usize = 2;
pub const Z: usize = 3;
pub const DTH1: usize = 4;
pub const DTH2: usize = 5;
pub const DX: usize = 6;
pub const DZ: usize = 7;
pub const TOE: usize = 8;
pub const DIM: usize = 9;

pub const STANCE: usize = 0;
pub const FLIGHT: usize = 1;

pub const COLUMNS: [&str; DIM] = ["theta1", "theta2", "x", "z", "dtheta1", "dtheta2", "dx", "dz", "toe_x"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipParams {
    /// Spring constant per unit mass.
    pub k_s: f64,
    pub rho_l: f64,
    pub g: f64,
    /// Radial pump; `omega` scales the radial rate and `damping_ratio` sets leg damping.
    pub vertical: VerticalParams,
    pub foreaft: ForeAftParams,
    /// Touch down at `z = ρ_l` and lift off at `z = ρ_l` instead of on the leg geometry.
    pub small_angle_guard: bool,
    pub stance_gravity: bool,
    /// Multiply the pump term by the leg length, as a hip-mounted tail delivers it.
    pub pump_length_scaled: bool,
}

impl Default for SlipParams {
    fn default() -> Self {
        let omega = 20.0;
        let rho_l = 1.0;
        Self {
            k_s: omega * omega,
            rho_l,
            g: 9.81,
            vertical: VerticalParams {
                omega,
                damping_ratio: 0.1,
                k_t: 8.8,
                eps: 0.01,
            },
            foreaft: ForeAftParams {
                t_s: std::f64::consts::PI / omega,
                rho_l,
                k_p: 0.02,
                xdot_star: 1.0,
            },
            small_angle_guard: false,
            stance_gravity: false,
            pump_length_scaled: false,
        }
    }
}

impl SlipParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(format!("slip: {m}")));
        if !(self.k_s > 0.0 && self.k_s.is_finite()) {
            return fail("k_s must be positive".into());
        }
        if !(self.rho_l > 0.0 && self.rho_l.is_finite()) {
            return fail("rho_l must be positive".into());
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return fail("g must be non-negative".into());
        }
        if self.foreaft.rho_l != self.rho_l {
            return fail(format!(
                "foreaft.rho_l ({}) must equal rho_l ({})",
                self.foreaft.rho_l, self.rho_l
            ));
        }
        self.vertical.validate()?;
        self.foreaft.validate()
    }

    pub fn beta(&self, xdot: f64) -> f64 {
        raibert_touchdown_angle(xdot, &self.foreaft)
    }

    /// `dβ/dẋ` of the stepping controller.
    pub fn beta_slope(&self) -> f64 {
        self.foreaft.t_s / (2.0 * self.foreaft.rho_l) + self.foreaft.k_p
    }

    pub fn touchdown_height(&self, xdot: f64) -> f64 {
        if self.small_angle_guard {
            self.rho_l
        } else {
            self.rho_l * self.beta(xdot).cos()
        }
    }
}

pub fn cart(th: [f64; 2]) -> [f64; 2] {
    let (s, c) = th[0].sin_cos();
    [-th[1] * s, th[1] * c]
}

pub fn d_cart(th: [f64; 2], dth: [f64; 2]) -> [f64; 2] {
    let (s, c) = th[0].sin_cos();
    [-dth[1] * s - th[1] * c * dth[0], dth[1] * c - th[1] * s * dth[0]]
}

pub fn pol(u: [f64; 2]) -> [f64; 2] {
    [(-u[0]).atan2(u[1]), u[0].hypot(u[1])]
}

pub fn d_pol(u: [f64; 2], du: [f64; 2]) -> [f64; 2] {
    let r2 = u[0] * u[0] + u[1] * u[1];
    let r = r2.sqrt();
    [(-u[1] * du[0] + u[0] * du[1]) / r2, (u[0] * du[0] + u[1] * du[1]) / r]
}

/// Mass position and velocity from the leg and the toe.
fn pin(x: &mut [f64]) {
    let th = [x[TH1], x[TH2]];
    let p = cart(th);
    let v = d_cart(th, [x[DTH1], x[DTH2]]);
    x[X] = x[TOE] + p[0];
    x[Z] = p[1];
    x[DX] = v[0];
    x[DZ] = v[1];
}

/// Stance dynamics with a hip torque `tau[0]` and a radial force `tau[1]`.
pub fn slip_stance_field(x: &[f64], tau: [f64; 2], p: &SlipParams) -> [f64; DIM] {
    let (th1, th2, w1, w2) = (x[TH1], x[TH2], x[DTH1], x[DTH2]);
    let (s, c) = th1.sin_cos();
    let mut a1 = -2.0 * w1 * w2 / th2 + tau[0] / (th2 * th2);
    let mut a2 = th2 * w1 * w1 + p.k_s * (p.rho_l - th2) + tau[1];
    if p.stance_gravity {
        a1 += p.g * s / th2;
        a2 -= p.g * c;
    }
    let v = d_cart([th1, th2], [w1, w2]);
    let acc = [
        -a2 * s - 2.0 * w2 * w1 * c - th2 * a1 * c + th2 * w1 * w1 * s,
        a2 * c - 2.0 * w2 * w1 * s - th2 * a1 * s - th2 * w1 * w1 * c,
    ];
    [w1, w2, v[0], v[1], a1, a2, acc[0], acc[1], 0.0]
}

pub fn slip_flight_field(x: &[f64], p: &SlipParams) -> [f64; DIM] {
    [0.0, 0.0, x[DX], x[DZ], 0.0, 0.0, 0.0, -p.g, 0.0]
}

/// Leg damping plus the phase-locked pump, as a radial force.
pub fn radial_pump_force(x: &[f64], p: &SlipParams) -> f64 {
    let v = &p.vertical;
    let chi = [x[TH2] - p.rho_l, x[DTH2] / v.omega];
    let scale = if p.pump_length_scaled { x[TH2] } else { 1.0 };
    -2.0 * v.damping_ratio * v.omega * x[DTH2] + scale * tail_pump_torque(chi, v)
}

/// Stance to flight: Cartesian coordinates follow the leg.
pub fn liftoff_reset(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    pin(&mut y);
    y
}

/// Flight to stance: places the toe at the controller's touchdown angle and
/// expresses the mass velocity in leg coordinates.
pub fn touchdown_reset(x: &[f64], p: &SlipParams) -> Result<Vec<f64>> {
    let (vx, vz) = (x[DX], x[DZ]);
    if !(vz < 0.0) {
        return Err(Error::InvalidTouchdown {
            vx,
            vz,
            reason: "mass is not descending".into(),
        });
    }
    if (1.0 + p.beta_slope() * vz).abs() < 1e-9 {
        return Err(Error::InvalidTouchdown {
            vx,
            vz,
            reason: "tangential/radial change of coordinates is singular".into(),
        });
    }
    let beta = p.beta(vx);
    let u = [-x[Z] * beta.tan(), x[Z]];
    let th = pol(u);
    let dth = d_pol(u, [vx, vz]);
    let mut y = x.to_vec();
    y[TOE] = x[X] - u[0];
    y[TH1] = th[0];
    y[TH2] = th[1];
    y[DTH1] = dth[0];
    y[DTH2] = dth[1];
    Ok(y)
}

/// Closed-loop SLIP: radial pump in stance, stepping controller at touchdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSystem {
    pub params: SlipParams,
}

impl SlipSystem {
    pub fn new(params: SlipParams) -> Self {
        Self { params }
    }

    pub fn flight_state(&self, x: f64, z: f64, dx: f64, dz: f64) -> Vec<f64> {
        let mut s = vec![0.0; DIM];
        s[TH2] = self.params.rho_l;
        s[X] = x;
        s[Z] = z;
        s[DX] = dx;
        s[DZ] = dz;
        s[TOE] = x;
        s
    }
}

impl HybridSystem for SlipSystem {
    fn state_dim(&self) -> usize {
        DIM
    }
    fn field(&self, mode: usize, _: f64, x: &[f64], dx: &mut [f64]) {
        let d = if mode == STANCE {
            slip_stance_field(x, [0.0, radial_pump_force(x, &self.params)], &self.params)
        } else {
            slip_flight_field(x, &self.params)
        };
        dx.copy_from_slice(&d);
    }
    fn guard(&self, mode: usize, x: &[f64]) -> f64 {
        let p = &self.params;
        if mode == STANCE {
            if p.small_angle_guard {
                p.rho_l - x[Z]
            } else {
                p.rho_l - x[TH2]
            }
        } else {
            let h = p.touchdown_height(x[DX]);
            if x[DZ] < 0.0 {
                x[Z] - h
            } else {
                (x[Z] - h).max(0.0) + x[DZ]
            }
        }
    }
    fn reset(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>> {
        if mode == STANCE {
            Ok(liftoff_reset(x))
        } else {
            touchdown_reset(x, &self.params)
        }
    }
    fn project(&self, mode: usize, x: &mut [f64]) {
        if mode == STANCE {
            pin(x);
        }
    }
}

/// `½(θ̇2² + θ2²θ̇1²) + ½k_s(ρ_l - θ2)²`, per unit mass.
pub fn stance_energy(x: &[f64], p: &SlipParams) -> f64 {
    let d = p.rho_l - x[TH2];
    0.5 * (x[DTH2] * x[DTH2] + x[TH2] * x[TH2] * x[DTH1] * x[DTH1]) + 0.5 * p.k_s * d * d
}

/// Angular momentum about the toe, per unit mass.
pub fn angular_momentum(x: &[f64]) -> f64 {
    x[TH2] * x[TH2] * x[DTH1]
}

/// Runs `n_strides` full flight/stance cycles from a flight state.
pub fn slip_full_execute(
    init: &[f64],
    p: &SlipParams,
    n_strides: usize,
    settings: &IntegratorSettings,
) -> Result<HybridExecution> {
    p.validate()?;
    execute(&SlipSystem::new(*p), FLIGHT, init, Stop::Transitions(2 * n_strides), settings)
}

/// Tangential/radial coordinates of a touchdown velocity, `R(-β(v₁)) v`.
pub fn h_w_map(v: [f64; 2], p: &SlipParams) -> [f64; 2] {
    let w = rotation(-p.beta(v[0])) * nalgebra::Vector2::new(v[0], v[1]);
    [w[0], w[1]]
}

/// `Dh_w` at `v`.
pub fn h_w_jacobian(v: [f64; 2], p: &SlipParams) -> Matrix2<f64> {
    let jv = j_matrix() * nalgebra::Vector2::new(v[0], v[1]);
    let e1 = nalgebra::RowVector2::new(1.0, 0.0);
    rotation(-p.beta(v[0])) * (Matrix2::identity() - p.beta_slope() * jv * e1)
}

/// Solves `v = R(β(v₁)) w` for `v` by Newton's method on `v₁`.
pub fn h_w_inverse(w: [f64; 2], p: &SlipParams) -> Result<[f64; 2]> {
    let b1 = p.beta_slope();
    let resid = |v1: f64| {
        let (s, c) = p.beta(v1).sin_cos();
        (v1 - (c * w[0] - s * w[1]), s * w[0] + c * w[1])
    };
    let mut v1 = w[0];
    for _ in 0..100 {
        let (r, v2) = resid(v1);
        if r.abs() <= 1e-15 * w[0].hypot(w[1]).max(1.0) {
            return Ok([v1, v2]);
        }
        let d = 1.0 + b1 * v2;
        if d.abs() < 1e-12 {
            break;
        }
        v1 -= r / d;
        if !v1.is_finite() {
            break;
        }
    }
    let (r, v2) = resid(v1);
    if r.abs() <= 1e-12 * w[0].hypot(w[1]).max(1.0) {
        return Ok([v1, v2]);
    }
    Err(Error::InversionFailure(format!("h_w inverse did not converge at w = {w:?}")))
}

/// `h_w ∘ F_r(·, κ) ∘ h_w⁻¹` for an externally supplied `κ`.
pub fn composed_map_with_gain(w: [f64; 2], kappa: f64, p: &SlipParams) -> Result<[f64; 2]> {
    let v = h_w_inverse(w, p)?;
    let fa = &p.foreaft;
    let u = mbhop_map_with_angles(v, kappa, p.beta(v[0]), sweep_angle(v[0], fa));
    Ok(h_w_map(u, p))
}

/// One stride in `w` coordinates with `κ` taken from the radial stance map at `w₂`.
pub fn composed_slip_return_map(w: [f64; 2], p: &SlipParams, settings: &IntegratorSettings) -> Result<[f64; 2]> {
    let kappa = velocity_gain(w[1], &p.vertical, settings)?;
    composed_map_with_gain(w, kappa, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlipCompositionReport {
    pub w_star: [f64; 2],
    pub v_star: [f64; 2],
    /// Finite-difference Jacobian of the composed map at `w*`.
    pub jacobian: Matrix2<f64>,
    pub eigenvalues: [Complex64; 2],
    pub det: f64,
    pub trace: f64,
    pub jury: JuryReport,
    /// Derivative of the radial stance map at `w₂*`.
    pub d_f1: f64,
    /// `1 - |DF₁|`.
    pub eps_r: f64,
    /// `2‖J w*‖ ‖Dh_w⁻¹‖₂`.
    pub xi_bound: f64,
    /// `2 k_p Ξ < ε_r`.
    pub coupling_ok: bool,
    /// Exact rank-one decomposition `diag(1, -DF₁) + p qᵀ`.
    pub analytic_jacobian: Matrix2<f64>,
    /// Determinant of the rank-one form via the determinant lemma.
    pub analytic_det: f64,
    /// Rank-one form with `p = -2k_p J w*`, `q = Dh_w⁻ᵀ e₁`, which drops the
    /// dependence of the next touchdown angle on the radial gain.
    pub approx_jacobian: Matrix2<f64>,
    pub pass: bool,
}

/// Integrator settings tight enough for finite differences of the stance map.
pub fn certificate_settings(base: &IntegratorSettings) -> IntegratorSettings {
    let mut s = *base;
    if let Method::DormandPrince { initial_step, max_step, .. } = s.method {
        s.method = Method::DormandPrince {
            rtol: 1e-12,
            atol: 1e-15,
            initial_step,
            max_step,
        };
    }
    s.event_tolerance = s.event_tolerance.min(1e-14);
    s
}

/// Relative step for differencing maps that contain a simulated stance.
pub const MAP_FD_STEP: f64 = 1e-4;

/// Fixed point of the composed map in `w` coordinates.
pub fn composed_fixed_point(p: &SlipParams, settings: &IntegratorSettings) -> Result<[f64; 2]> {
    let w2 = p.vertical.fixed_touchdown_velocity().unwrap_or(-1.0);
    let beta = p.beta(p.foreaft.xdot_star);
    let w1 = (p.foreaft.xdot_star + beta.sin() * w2) / beta.cos();
    let map = |w: &[f64]| composed_slip_return_map([w[0], w[1]], p, settings).map(|o| o.to_vec());
    let fp = find_fixed_point(map, &[w1, w2], 1e-11, 50).map_err(|e| Error::FixedPointNotFound(e.to_string()))?;
    Ok([fp.x_star[0], fp.x_star[1]])
}

/// Local stability of the composed radial/fore-aft stride map.
pub fn slip_composition_certificate(p: &SlipParams, settings: &IntegratorSettings) -> Result<SlipCompositionReport> {
    p.validate()?;
    let s = certificate_settings(settings);
    let w_star = composed_fixed_point(p, &s)?;
    let v_star = h_w_inverse(w_star, p)?;

    let map = |w: &[f64]| composed_slip_return_map([w[0], w[1]], p, &s).map(|o| o.to_vec());
    let jd = numeric_jacobian(map, &w_star, MAP_FD_STEP)?;
    let jacobian = Matrix2::new(jd[(0, 0)], jd[(0, 1)], jd[(1, 0)], jd[(1, 1)]);

    let f1 = |c: f64| vertical_stance_map(c, &p.vertical, &s);
    let h = MAP_FD_STEP * w_star[1].abs().max(1.0);
    let d_f1 = (f1(w_star[1] + h)? - f1(w_star[1] - h)?) / (2.0 * h);
    let eps_r = 1.0 - d_f1.abs();

    let dhw_inv = h_w_jacobian(v_star, p)
        .try_inverse()
        .ok_or_else(|| Error::InversionFailure("Dh_w singular at the fixed point".into()))?;
    let jw = j_matrix() * nalgebra::Vector2::new(w_star[0], w_star[1]);
    let xi_bound = 2.0 * jw.norm() * dhw_inv.singular_values().max();
    let coupling_ok = 2.0 * p.foreaft.k_p * xi_bound < eps_r;

    let d = Matrix2::new(1.0, 0.0, 0.0, -d_f1);
    let b1 = p.beta_slope();
    let g1 = p.foreaft.t_s / p.foreaft.rho_l;
    let e1r = nalgebra::RowVector2::new(1.0, 0.0) * rotation(p.beta(v_star[0]));
    let q = e1r * ((g1 - b1) * Matrix2::identity() - b1 * d);
    let analytic_jacobian = d + jw * q;
    let adj = Matrix2::new(d[(1, 1)], -d[(0, 1)], -d[(1, 0)], d[(0, 0)]);
    let analytic_det = d.determinant() + (q * adj * jw)[0];
    let q_approx = nalgebra::RowVector2::new(1.0, 0.0) * dhw_inv;
    let approx_jacobian = d + (-2.0 * p.foreaft.k_p * jw) * q_approx;

    let jury = jury_test_2x2(&jacobian);
    Ok(SlipCompositionReport {
        w_star,
        v_star,
        eigenvalues: eigenvalues_2x2(&jacobian),
        det: jury.det,
        trace: jury.trace,
        pass: jury.verdict == JuryVerdict::Stable,
        jury,
        jacobian,
        d_f1,
        eps_r,
        xi_bound,
        coupling_ok,
        analytic_jacobian,
        analytic_det,
        approx_jacobian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn passive() -> SlipParams {
        let mut p = SlipParams::default();
        p.vertical.k_t = 0.0;
        p.vertical.damping_ratio = 0.0;
        p
    }

    #[test]
    fn rest_length_is_equilibrium() {
        let p = passive();
        let mut x = [0.0; DIM];
        x[TH2] = p.rho_l;
        let f = slip_stance_field(&x, [0.0, 0.0], &p);
        assert_eq!(f[DTH1], 0.0);
        assert_eq!(f[DTH2], 0.0);
    }

    #[test]
    fn flight_is_ballistic() {
        let p = SlipParams::default();
        let f = slip_flight_field(&[0.1, 1.0, 0.0, 1.2, 0.0, 0.0, 0.7, 0.3, 0.0], &p);
        assert_eq!(f[DX], 0.0);
        assert_eq!(f[DZ], -p.g);
        assert_eq!(f[TH1], 0.0);
    }

    #[test]
    fn vertical_touchdown_is_radial() {
        let mut p = passive();
        p.foreaft.k_p = 0.0;
        let sys = SlipSystem::new(p);
        let x = sys.flight_state(0.0, p.rho_l, 0.0, -1.0);
        let y = touchdown_reset(&x, &p).unwrap();
        assert!(y[DTH1].abs() < 1e-15);
        assert!((y[DTH2] + 1.0).abs() < 1e-15);
        assert!((y[TH2] - p.rho_l).abs() < 1e-15);
    }

    #[test]
    fn radial_liftoff_is_vertical() {
        let mut x = [0.0; DIM];
        x[TH2] = 1.0;
        x[DTH2] = 0.8;
        let y = liftoff_reset(&x);
        assert_eq!(y[DX], 0.0);
        assert_eq!(y[DZ], 0.8);
    }

    #[test]
    fn rising_touchdown_rejected() {
        let p = SlipParams::default();
        let x = SlipSystem::new(p).flight_state(0.0, 1.0, 1.0, 0.5);
        assert!(matches!(touchdown_reset(&x, &p), Err(Error::InvalidTouchdown { .. })));
    }

    #[test]
    fn flight_time_from_apex() {
        let p = SlipParams::default();
        let sys = SlipSystem::new(p);
        let h = 0.3;
        let z0 = p.touchdown_height(1.0) + h;
        let x0 = sys.flight_state(0.0, z0, 1.0, 0.0);
        let seg = crate::hybrid::integrate_mode(&sys, FLIGHT, &x0, 0.0, 10.0, &IntegratorSettings::default()).unwrap();
        let t = seg.terminal_event.unwrap().time;
        assert!((t - (2.0 * h / p.g).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn conservative_stance_invariants() {
        let p = passive();
        let sys = SlipSystem::new(p);
        let x0 = sys.flight_state(0.0, p.touchdown_height(0.9), 0.9, -1.7);
        let y0 = touchdown_reset(&x0, &p).unwrap();
        let s = IntegratorSettings::default();
        let seg = crate::hybrid::integrate_mode(&sys, STANCE, &y0, 0.0, 5.0, &s).unwrap();
        let (e0, l0) = (stance_energy(&y0, &p), angular_momentum(&y0));
        for x in &seg.states {
            assert!((stance_energy(x, &p) - e0).abs() <= 1e-8 * e0);
            assert!((angular_momentum(x) - l0).abs() <= 1e-8 * l0.abs());
        }
    }

    #[test]
    fn unit_gain_restriction_matches_fore_aft_map() {
        let p = SlipParams::default();
        let v = [0.8, -2.3];
        let w = h_w_map(v, &p);
        let via = composed_map_with_gain(w, 1.0, &p).unwrap();
        let direct = h_w_map(crate::templates::foreaft::mbhop_return_map(v, 1.0, &p.foreaft), &p);
        assert!((via[0] - direct[0]).abs() < 1e-12 && (via[1] - direct[1]).abs() < 1e-12);
    }

    #[test]
    fn certificate_at_defaults() {
        let r = slip_composition_certificate(&SlipParams::default(), &IntegratorSettings::default()).unwrap();
        assert!(r.pass);
        assert!(r.coupling_ok);
        assert!((r.analytic_det - r.det).abs() < 1e-5);
        assert!((r.analytic_jacobian - r.jacobian).norm() < 1e-5);
    }

    #[test]
    fn conservative_no_feedback_is_marginal() {
        let mut p = passive();
        p.foreaft.k_p = 0.0;
        let r = slip_composition_certificate(&p, &IntegratorSettings::default()).unwrap();
        for z in r.eigenvalues {
            assert!((z - 1.0).norm() < 1e-6, "{z}");
        }
        assert!(!r.pass);
    }

    #[test]
    fn touchdowns_lie_on_section() {
        let p = SlipParams::default();
        let sys = SlipSystem::new(p);
        let ex = slip_full_execute(&sys.flight_state(0.0, 1.1, 1.0, 0.0), &p, 8, &IntegratorSettings::default()).unwrap();
        for tr in ex.entries_into(STANCE) {
            assert!((tr.pre[Z] - p.touchdown_height(tr.pre[DX])).abs() < 1e-9);
        }
    }

    #[test]
    fn unpumped_hops_decay() {
        let mut p = SlipParams::default();
        p.vertical.k_t = 0.0;
        let sys = SlipSystem::new(p);
        let ex = slip_full_execute(&sys.flight_state(0.0, 1.2, 1.0, 0.0), &p, 3, &IntegratorSettings::default()).unwrap();
        let td: Vec<f64> = ex.entries_into(STANCE).map(|t| t.pre[DZ]).collect();
        let lo: Vec<f64> = ex.entries_into(FLIGHT).map(|t| t.post[DZ]).collect();
        for (a, b) in td.iter().zip(&lo) {
            assert!(b.abs() < a.abs());
        }
    }

    proptest! {
        #[test]
        fn cart_pol_round_trip(t1 in -1.2..1.2f64, t2 in 0.2..2.0f64, d1 in -3.0..3.0f64, d2 in -3.0..3.0f64) {
            let u = cart([t1, t2]);
            let du = d_cart([t1, t2], [d1, d2]);
            let th = pol(u);
            let dth = d_pol(u, du);
            prop_assert!((th[0] - t1).abs() < 1e-12 && (th[1] - t2).abs() < 1e-12);
            prop_assert!((dth[0] - d1).abs() < 1e-12 && (dth[1] - d2).abs() < 1e-12);
        }

        #[test]
        fn h_w_is_a_rotation(v1 in -2.0..2.0f64, v2 in -4.0..-0.5f64) {
            let p = SlipParams::default();
            let w = h_w_map([v1, v2], &p);
            prop_assert!((w[0].hypot(w[1]) - v1.hypot(v2)).abs() < 1e-12);
            let back = h_w_inverse(w, &p).unwrap();
            prop_assert!((back[0] - v1).abs() < 1e-10 && (back[1] - v2).abs() < 1e-10);
        }

        #[test]
        fn h_w_jacobian_nonsingular(v1 in -2.0..2.0f64, v2 in -4.0..-0.5f64) {
            let p = SlipParams::default();
            let map = |v: &[f64]| Ok(h_w_map([v[0], v[1]], &p).to_vec());
            let fd = numeric_jacobian(map, &[v1, v2], crate::analysis::DEFAULT_FD_STEP).unwrap();
            let an = h_w_jacobian([v1, v2], &p);
            let det = fd[(0, 0)] * fd[(1, 1)] - fd[(0, 1)] * fd[(1, 0)];
            prop_assert!((det - an.determinant()).abs() < 1e-8);
            prop_assert!(det.abs() > 0.5);
        }

        #[test]
        fn equivariant_in_x(shift in -5.0..5.0f64) {
            let p = SlipParams::default();
            let sys = SlipSystem::new(p);
            let s = IntegratorSettings::rk4(1e-3);
            let a = slip_full_execute(&sys.flight_state(0.0, 1.1, 1.0, 0.0), &p, 2, &s).unwrap();
            let b = slip_full_execute(&sys.flight_state(shift, 1.1, 1.0, 0.0), &p, 2, &s).unwrap();
            for (ta, tb) in a.transitions.iter().zip(&b.transitions) {
                prop_assert!((tb.post[X] - ta.post[X] - shift).abs() < 1e-9);
                prop_assert!((tb.post[DX] - ta.post[DX]).abs() < 1e-9);
                prop_assert!((tb.post[Z] - ta.post[Z]).abs() < 1e-9);
            }
        }
    }
}
