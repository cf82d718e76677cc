//! Planar tailed monoped under the light-tail reduced equations.
//!
//! Integration happens in the split coordinates `y = (s, a)` where
//! `s = (θ1 + φ1, θ2, x, z)` are SLIP-like and `a = M₂ (φ1, φ2)` are
//! attitude momenta-like coordinates. The state layout is
//! `[s1, s2, x, z, a1, a2, ṡ1, ṡ2, ẋ, ż, ȧ1, ȧ2, toe_x]`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::hybrid::{execute, HybridExecution, HybridSystem, IntegratorSettings, Method, Stop};
use crate::slip::{self, cart, d_cart, d_pol, pol, SlipParams};
use crate::templates::attitude::AttitudeParams;
use crate::templates::foreaft::{raibert_touchdown_angle, ForeAftParams};
use crate::templates::vertical::{tail_pump_torque, VerticalParams};

pub const S1: usize = 0;
pub const S2: usize = 1;
pub const X: usize = 2;
pub const Z: usize = 3;
pub const A1: usize = 4;
pub const A2: usize = 5;
pub const DS1: usize = 6;
pub const DS2: usize = 7;
pub const DX: usize = 8;
pub const DZ: usize = 9;
pub const DA1: usize = 10;
pub const DA2: usize = 11;
pub const TOE: usize = 12;
pub const DIM: usize = 13;

pub const STANCE: usize = 0;
pub const FLIGHT: usize = 1;

pub const CSV_COLUMNS: [&str; 14] = [
    "theta1", "theta2", "x", "z", "phi1", "phi2", "dtheta1", "dtheta2", "dx", "dz", "dphi1", "dphi2", "tau_h",
    "tau_t",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyParams {
    pub m_b: f64,
    pub i_b: f64,
    pub m_t: f64,
    pub i_t: f64,
    pub rho_l: f64,
    pub rho_t: f64,
    pub k_s: f64,
    pub g: f64,
    pub vertical: VerticalParams,
    pub foreaft: ForeAftParams,
    pub attitude: AttitudeParams,
    /// Natural frequency of the critically damped flight hip servo (rad/s).
    pub servo_bandwidth: f64,
    pub small_angle_guard: bool,
}

impl Default for BodyParams {
    fn default() -> Self {
        let m_b = 2.419;
        let m_t = 0.150;
        let rho_l = 0.105;
        let rho_t = 0.3;
        let omega = 20.0;
        Self {
            m_b,
            // Uniform box, 0.21 m long and 0.1 m high.
            i_b: m_b * (0.21f64.powi(2) + 0.1f64.powi(2)) / 12.0,
            m_t,
            i_t: m_t * rho_t * rho_t,
            rho_l,
            rho_t,
            k_s: m_b * omega * omega,
            g: 9.81,
            vertical: VerticalParams {
                omega,
                damping_ratio: 0.1,
                k_t: 24.0,
                eps: 0.005,
            },
            foreaft: ForeAftParams {
                t_s: std::f64::consts::PI / omega,
                rho_l,
                k_p: 0.1,
                xdot_star: 0.2,
            },
            attitude: AttitudeParams::default(),
            servo_bandwidth: 400.0,
            small_angle_guard: false,
        }
    }
}

/// Where a parameter set sits relative to the light-tail, high-inertia idealization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub mass_ratio: f64,
    pub inertia_ratio: f64,
    pub reaction_fraction: f64,
    pub light_tail: bool,
    pub effective_tail: bool,
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m_b", self.m_b),
            ("i_b", self.i_b),
            ("m_t", self.m_t),
            ("i_t", self.i_t),
            ("rho_l", self.rho_l),
            ("rho_t", self.rho_t),
            ("k_s", self.k_s),
            ("servo_bandwidth", self.servo_bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("monoped: {name} must be positive")));
            }
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidArgument("monoped: g must be non-negative".into()));
        }
        if self.foreaft.rho_l != self.rho_l {
            return Err(Error::InvalidArgument(format!(
                "monoped: foreaft.rho_l ({}) must equal rho_l ({})",
                self.foreaft.rho_l, self.rho_l
            )));
        }
        self.vertical.validate()?;
        self.foreaft.validate()?;
        self.attitude.validate()?;
        self.m2_inverse().map(|_| ())
    }

    pub fn m2(&self) -> Matrix2<f64> {
        Matrix2::new(self.i_b + self.i_t, self.i_t, self.i_t, self.i_t)
    }

    pub fn m2_inverse(&self) -> Result<Matrix2<f64>> {
        let det = self.i_b * self.i_t;
        if !(det > 0.0 && det.is_finite()) {
            return Err(Error::SingularM2 {
                i_b: self.i_b,
                i_t: self.i_t,
            });
        }
        Ok(Matrix2::new(1.0 / self.i_b, -1.0 / self.i_b, -1.0 / self.i_b, 1.0 / self.i_b + 1.0 / self.i_t))
    }

    /// `m_t ρ_t² / i_t`: share of a hip torque that reaches the body as a
    /// force through the tail's center of mass. Equals one for a point-mass tail.
    pub fn tail_reaction_fraction(&self) -> f64 {
        self.m_t * self.rho_t * self.rho_t / self.i_t
    }

    pub fn regime(&self) -> Regime {
        let mass_ratio = self.m_t / self.m_b;
        let inertia_ratio = self.i_t / self.i_b;
        Regime {
            mass_ratio,
            inertia_ratio,
            reaction_fraction: self.tail_reaction_fraction(),
            light_tail: mass_ratio <= 0.1,
            effective_tail: inertia_ratio >= 1.0,
        }
    }

    /// Tail nearly massless and body and tail nearly rigid against rotation.
    pub fn invariance_limit(self) -> Self {
        let i_b = 1e6;
        Self {
            m_t: 1e-6 * self.m_b,
            i_b,
            i_t: 1e6 * i_b,
            ..self
        }
    }

    /// SLIP with the same per-unit-mass spring, guards and scaled pump.
    pub fn slip_counterpart(&self) -> SlipParams {
        let mut vertical = self.vertical;
        vertical.k_t *= self.tail_reaction_fraction();
        SlipParams {
            k_s: self.k_s / self.m_b,
            rho_l: self.rho_l,
            g: self.g,
            vertical,
            foreaft: self.foreaft,
            small_angle_guard: self.small_angle_guard,
            stance_gravity: false,
            pump_length_scaled: true,
        }
    }

    fn beta(&self, xdot: f64) -> f64 {
        raibert_touchdown_angle(xdot, &self.foreaft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub x: f64,
    pub z: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
    pub dx: f64,
    pub dz: f64,
    pub dphi1: f64,
    pub dphi2: f64,
}

/// `q ↦ ((θ1 + φ1, θ2, x, z), M₂ φ)`, applied to positions and rates alike.
pub fn coord_change(q: &BodyConfig, p: &BodyParams) -> Result<([f64; 8], [f64; 4])> {
    p.m2_inverse()?;
    let m2 = p.m2();
    let a = m2 * Vector2::new(q.phi1, q.phi2);
    let da = m2 * Vector2::new(q.dphi1, q.dphi2);
    Ok((
        [
            q.theta1 + q.phi1,
            q.theta2,
            q.x,
            q.z,
            q.dtheta1 + q.dphi1,
            q.dtheta2,
            q.dx,
            q.dz,
        ],
        [a[0], a[1], da[0], da[1]],
    ))
}

pub fn coord_change_inverse(s: &[f64; 8], a: &[f64; 4], p: &BodyParams) -> Result<BodyConfig> {
    let inv = p.m2_inverse()?;
    let phi = inv * Vector2::new(a[0], a[1]);
    let dphi = inv * Vector2::new(a[2], a[3]);
    Ok(BodyConfig {
        theta1: s[0] - phi[0],
        theta2: s[1],
        x: s[2],
        z: s[3],
        phi1: phi[0],
        phi2: phi[1],
        dtheta1: s[4] - dphi[0],
        dtheta2: s[5],
        dx: s[6],
        dz: s[7],
        dphi1: dphi[0],
        dphi2: dphi[1],
    })
}

/// Packs a configuration into the integration state, toe under the given `toe_x`.
pub fn state_from_body(q: &BodyConfig, toe_x: f64, p: &BodyParams) -> Result<Vec<f64>> {
    let (s, a) = coord_change(q, p)?;
    Ok(vec![
        s[0], s[1], s[2], s[3], a[0], a[1], s[4], s[5], s[6], s[7], a[2], a[3], toe_x,
    ])
}

pub fn body_from_state(y: &[f64], p: &BodyParams) -> Result<BodyConfig> {
    coord_change_inverse(
        &[y[S1], y[S2], y[X], y[Z], y[DS1], y[DS2], y[DX], y[DZ]],
        &[y[A1], y[A2], y[DA1], y[DA2]],
        p,
    )
}

/// `π_s`: the SLIP-layout state `[θ1, θ2, x, z, θ̇1, θ̇2, ẋ, ż, toe_x]`.
pub fn slip_projection(y: &[f64]) -> Vec<f64> {
    vec![y[S1], y[S2], y[X], y[Z], y[DS1], y[DS2], y[DX], y[DZ], y[TOE]]
}

fn attitude_angles(y: &[f64], p: &BodyParams) -> ([f64; 2], [f64; 2]) {
    let inv = p.m2_inverse().expect("validated inertias");
    let phi = inv * Vector2::new(y[A1], y[A2]);
    let dphi = inv * Vector2::new(y[DA1], y[DA2]);
    ([phi[0], phi[1]], [dphi[0], dphi[1]])
}

fn tail_force(tau_t: f64, p: &BodyParams) -> f64 {
    p.tail_reaction_fraction() * tau_t / (p.rho_t * p.m_b)
}

/// Stance derivative for hip torque `tau_h` and tail torque `tau_t`.
pub fn stance_dynamics(y: &[f64], tau_h: f64, tau_t: f64, p: &BodyParams) -> [f64; DIM] {
    let (phi, _) = attitude_angles(y, p);
    let (s1, s2, w1, w2) = (y[S1], y[S2], y[DS1], y[DS2]);
    let xi = s1 - phi[0] - phi[1];
    let c = tail_force(tau_t, p);
    let damping = 2.0 * p.vertical.damping_ratio * p.vertical.omega;
    let a1 = tau_h / (p.m_b * s2 * s2) - 2.0 * w2 * w1 / s2 + c * xi.sin() / s2;
    let a2 = p.k_s * (p.rho_l - s2) / p.m_b + s2 * w1 * w1 - damping * w2 - c * xi.cos();
    let (sn, cs) = s1.sin_cos();
    let v = d_cart([s1, s2], [w1, w2]);
    let acc = [
        -a2 * sn - 2.0 * w2 * w1 * cs - s2 * a1 * cs + s2 * w1 * w1 * sn,
        a2 * cs - 2.0 * w2 * w1 * sn - s2 * a1 * sn - s2 * w1 * w1 * cs,
    ];
    [w1, w2, v[0], v[1], y[DA1], y[DA2], a1, a2, acc[0], acc[1], -tau_h, tau_t, 0.0]
}

/// Flight derivative; `hip_accel` drives the massless leg angle directly.
pub fn flight_dynamics(y: &[f64], hip_accel: f64, tau_t: f64, p: &BodyParams) -> [f64; DIM] {
    let (phi, _) = attitude_angles(y, p);
    let c = tail_force(tau_t, p);
    let tail = phi[0] + phi[1];
    [
        y[DS1],
        0.0,
        y[DX],
        y[DZ],
        y[DA1],
        y[DA2],
        hip_accel,
        0.0,
        c * tail.sin(),
        -p.g - c * tail.cos(),
        0.0,
        tau_t,
        0.0,
    ]
}

/// The four decoupled laws mapped onto the two actuators.
///
/// In flight the first entry is the hip servo's angular acceleration command
/// rather than a torque, since the leg carries no inertia.
pub fn controller_playback(y: &[f64], mode: usize, p: &BodyParams) -> (f64, f64) {
    let at = &p.attitude;
    if mode == STANCE {
        let tau_h = at.k_g * (at.k * y[A1] + y[DA1]);
        let chi = [y[S2] - p.rho_l, y[DS2] / p.vertical.omega];
        let tau_t = -p.rho_t * y[S2] * p.m_b * tail_pump_torque(chi, &p.vertical);
        (tau_h, tau_t)
    } else {
        let wn = p.servo_bandwidth;
        let hip = wn * wn * (p.beta(y[DX]) - y[S1]) - 2.0 * wn * y[DS1];
        let tau_t = -at.k_g * (y[DA2] + at.k * y[A2]);
        (hip, tau_t)
    }
}

/// Leg spring plus mass-center kinetic energy in stance.
pub fn stance_energy(y: &[f64], p: &BodyParams) -> f64 {
    let d = p.rho_l - y[S2];
    0.5 * p.m_b * (y[DS2] * y[DS2] + y[S2] * y[S2] * y[DS1] * y[DS1]) + 0.5 * p.k_s * d * d
}

/// Power into [`stance_energy`] from the hip, the tail reaction and leg damping.
pub fn stance_power(y: &[f64], p: &BodyParams) -> f64 {
    let (tau_h, tau_t) = controller_playback(y, STANCE, p);
    let (phi, _) = attitude_angles(y, p);
    let xi = y[S1] - phi[0] - phi[1];
    let c = tail_force(tau_t, p);
    let damping = 2.0 * p.vertical.damping_ratio * p.vertical.omega;
    tau_h * y[DS1] + p.m_b * c * (y[S2] * y[DS1] * xi.sin() - y[DS2] * xi.cos())
        - p.m_b * damping * y[DS2] * y[DS2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonopedSystem {
    pub params: BodyParams,
}

fn pin(y: &mut [f64]) {
    let th = [y[S1], y[S2]];
    let pos = cart(th);
    let vel = d_cart(th, [y[DS1], y[DS2]]);
    y[X] = y[TOE] + pos[0];
    y[Z] = pos[1];
    y[DX] = vel[0];
    y[DZ] = vel[1];
}

impl HybridSystem for MonopedSystem {
    fn state_dim(&self) -> usize {
        DIM
    }
    fn field(&self, mode: usize, _: f64, y: &[f64], dy: &mut [f64]) {
        let (u_h, u_t) = controller_playback(y, mode, &self.params);
        let d = if mode == STANCE {
            stance_dynamics(y, u_h, u_t, &self.params)
        } else {
            flight_dynamics(y, u_h, u_t, &self.params)
        };
        dy.copy_from_slice(&d);
    }
    fn guard(&self, mode: usize, y: &[f64]) -> f64 {
        let p = &self.params;
        if mode == STANCE {
            if p.small_angle_guard {
                p.rho_l - y[Z]
            } else {
                p.rho_l - y[S2]
            }
        } else {
            let h = if p.small_angle_guard { p.rho_l } else { p.rho_l * y[S1].cos() };
            if y[DZ] < 0.0 {
                y[Z] - h
            } else {
                (y[Z] - h).max(0.0) + y[DZ]
            }
        }
    }
    fn reset(&self, mode: usize, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = y.to_vec();
        if mode == STANCE {
            pin(&mut out);
            return Ok(out);
        }
        if !(y[DZ] < 0.0) {
            return Err(Error::InvalidTouchdown {
                vx: y[DX],
                vz: y[DZ],
                reason: "body is not descending".into(),
            });
        }
        let u = [-y[Z] * y[S1].tan(), y[Z]];
        let th = pol(u);
        let dth = d_pol(u, [y[DX], y[DZ]]);
        out[TOE] = y[X] - u[0];
        out[S1] = th[0];
        out[S2] = th[1];
        out[DS1] = dth[0];
        out[DS2] = dth[1];
        Ok(out)
    }
    fn project(&self, mode: usize, y: &mut [f64]) {
        if mode == STANCE {
            pin(y);
        }
    }
}

/// Runs `n_strides` flight/stance cycles from a flight configuration.
pub fn monoped_execute(
    init: &BodyConfig,
    p: &BodyParams,
    n_strides: usize,
    settings: &IntegratorSettings,
) -> Result<HybridExecution> {
    p.validate()?;
    let y0 = state_from_body(init, init.x, p)?;
    execute(&MonopedSystem { params: *p }, FLIGHT, &y0, Stop::Transitions(2 * n_strides), settings)
}

/// CSV row for a sample: body configuration, rates, then the two actuator commands.
pub fn csv_row(mode: usize, y: &[f64], p: &BodyParams) -> Vec<f64> {
    let q = body_from_state(y, p).expect("validated inertias");
    let (u_h, u_t) = controller_playback(y, mode, p);
    vec![
        q.theta1, q.theta2, q.x, q.z, q.phi1, q.phi2, q.dtheta1, q.dtheta2, q.dx, q.dz, q.dphi1, q.dphi2, u_h, u_t,
    ]
}

/// A flight apex on the zero-attitude set with the leg already at its touchdown angle.
pub fn apex_on_invariant_set(height: f64, xdot: f64, p: &BodyParams) -> BodyConfig {
    BodyConfig {
        theta1: p.beta(xdot),
        theta2: p.rho_l,
        z: height,
        dx: xdot,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    /// Sup of `‖(φ1, φ2, φ̇1, φ̇2)‖∞` over every sample.
    pub max_attitude_deviation: f64,
    /// Sup-norm gap between the projected execution and the standalone SLIP.
    pub slip_projection_error: f64,
    pub strides: usize,
}

/// Runs the monoped from `init` next to a standalone SLIP started from its
/// projection and measures how far the attitude and the SLIP coordinates drift.
///
/// Samples are paired by index, so `settings` must use a fixed step. Mass
/// coordinates are compared in every mode; leg coordinates only in stance,
/// since the flight leg is servoed here and held in the SLIP.
pub fn invariance_check(
    init: &BodyConfig,
    p: &BodyParams,
    n_strides: usize,
    settings: &IntegratorSettings,
) -> Result<InvarianceReport> {
    if !matches!(settings.method, Method::Rk4 { .. }) {
        return Err(Error::InvalidArgument(
            "invariance check pairs samples by index and needs a fixed step".into(),
        ));
    }
    let tm = monoped_execute(init, p, n_strides, settings)?;
    let sp = p.slip_counterpart();
    let y0 = state_from_body(init, init.x, p)?;
    let sl = slip::slip_full_execute(&slip_projection(&y0), &sp, n_strides, settings)?;

    let mut max_att = 0.0f64;
    for seg in &tm.segments {
        for y in &seg.states {
            let (phi, dphi) = attitude_angles(y, p);
            for v in [phi[0], phi[1], dphi[0], dphi[1]] {
                max_att = max_att.max(v.abs());
            }
        }
    }

    let mut gap = 0.0f64;
    let compare = |a: &[f64], b: &[f64], mode: usize| {
        let mass = [(X, slip::X), (Z, slip::Z), (DX, slip::DX), (DZ, slip::DZ)];
        let leg = [(S1, slip::TH1), (S2, slip::TH2), (DS1, slip::DTH1), (DS2, slip::DTH2)];
        let mut g = mass.iter().map(|&(i, j)| (a[i] - b[j]).abs()).fold(0.0, f64::max);
        if mode == STANCE {
            g = leg.iter().map(|&(i, j)| (a[i] - b[j]).abs()).fold(g, f64::max);
        }
        g
    };
    if tm.segments.len() != sl.segments.len() {
        return Err(Error::Degenerate {
            mode: tm.final_mode,
            time: tm.final_time,
            reason: "monoped and SLIP executions have different mode sequences".into(),
        });
    }
    for (a, b) in tm.segments.iter().zip(&sl.segments) {
        let n = a.states.len().min(b.states.len());
        for k in 0..n.saturating_sub(1) {
            gap = gap.max(compare(&a.states[k], &b.states[k], a.mode));
        }
        gap = gap.max(compare(a.last_state(), b.last_state(), a.mode));
        gap = gap.max((a.times.last().unwrap() - b.times.last().unwrap()).abs());
    }
    Ok(InvarianceReport {
        max_attitude_deviation: max_att,
        slip_projection_error: gap,
        strides: n_strides,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flight_state(p: &BodyParams) -> Vec<f64> {
        state_from_body(&apex_on_invariant_set(0.2, 0.2, p), 0.0, p).unwrap()
    }

    #[test]
    fn coord_change_examples() {
        let p = BodyParams { i_b: 1.0, i_t: 2.0, ..Default::default() };
        let q = BodyConfig { theta1: 0.3, theta2: 0.1, x: 1.0, z: 2.0, ..Default::default() };
        let (s, a) = coord_change(&q, &p).unwrap();
        assert_eq!(&s[..4], &[0.3, 0.1, 1.0, 2.0]);
        assert_eq!(&a[..2], &[0.0, 0.0]);
        let q = BodyConfig { phi1: 0.7, ..Default::default() };
        assert_eq!(coord_change(&q, &p).unwrap().0[0], 0.7);
        let q = BodyConfig { phi1: 1.0, ..Default::default() };
        assert_eq!(&coord_change(&q, &p).unwrap().1[..2], &[3.0, 2.0]);
    }

    #[test]
    fn degenerate_inertia_rejected() {
        let p = BodyParams { i_t: 0.0, ..Default::default() };
        assert!(matches!(coord_change(&BodyConfig::default(), &p), Err(Error::SingularM2 { .. })));
    }

    #[test]
    fn stance_without_tail_torque_is_slip() {
        let p = BodyParams::default();
        let mut y = flight_state(&p);
        y[S1] = 0.1;
        y[S2] = 0.1;
        y[DS1] = -0.8;
        y[DS2] = -0.4;
        let mut sp = p.slip_counterpart();
        sp.vertical.k_t = 0.0;
        let sy = slip_projection(&y);
        let f = stance_dynamics(&y, 0.0, 0.0, &p);
        let g = slip::slip_stance_field(&sy, [0.0, slip::radial_pump_force(&sy, &sp)], &sp);
        assert!((f[DS1] - g[slip::DTH1]).abs() < 1e-12);
        assert!((f[DS2] - g[slip::DTH2]).abs() < 1e-12);
    }

    #[test]
    fn tail_force_examples() {
        let p = BodyParams::default();
        let mut y = flight_state(&p);
        y[S1] = 0.0;
        y[S2] = 0.1;
        let base = stance_dynamics(&y, 0.0, 0.0, &p);
        let f = stance_dynamics(&y, 0.0, 1.0, &p);
        assert!((f[DS1] - base[DS1]).abs() < 1e-15);
        assert!((f[DS2] - base[DS2] + 1.0 / (p.rho_t * p.m_b)).abs() < 1e-12);
        let f = stance_dynamics(&y, 1.0, 0.0, &p);
        assert_eq!((f[DA1], f[DA2]), (-1.0, 0.0));
    }

    #[test]
    fn flight_examples() {
        let p = BodyParams::default();
        let y = flight_state(&p);
        let f = flight_dynamics(&y, 0.0, 0.0, &p);
        assert_eq!((f[DX], f[DZ]), (0.0, -p.g));
        let f = flight_dynamics(&y, 0.0, 2.0, &p);
        assert_eq!(f[DA1], 0.0);
        assert!((f[DZ] + p.g + 2.0 / (p.rho_t * p.m_b)).abs() < 1e-12);
    }

    #[test]
    fn controller_examples() {
        let p = BodyParams::default();
        let mut y = flight_state(&p);
        y[S2] = p.rho_l;
        y[DS2] = -0.3;
        let (tau_h, tau_t) = controller_playback(&y, STANCE, &p);
        assert_eq!(tau_h, 0.0);
        let pump = tail_pump_torque([0.0, -0.3 / p.vertical.omega], &p.vertical);
        assert!((tau_t + 0.3 * 0.105 * 2.419 * pump).abs() < 1e-12);
        let (hip, _) = controller_playback(&y, FLIGHT, &p);
        assert_eq!(hip, 0.0);
    }

    /// Monoped with the stance work integral appended to its state.
    struct WithWork(MonopedSystem);

    impl HybridSystem for WithWork {
        fn state_dim(&self) -> usize {
            DIM + 1
        }
        fn field(&self, mode: usize, t: f64, y: &[f64], dy: &mut [f64]) {
            self.0.field(mode, t, &y[..DIM], &mut dy[..DIM]);
            dy[DIM] = if mode == STANCE { stance_power(&y[..DIM], &self.0.params) } else { 0.0 };
        }
        fn guard(&self, mode: usize, y: &[f64]) -> f64 {
            self.0.guard(mode, &y[..DIM])
        }
        fn reset(&self, mode: usize, y: &[f64]) -> Result<Vec<f64>> {
            let mut out = self.0.reset(mode, &y[..DIM])?;
            out.push(y[DIM]);
            Ok(out)
        }
        fn project(&self, mode: usize, y: &mut [f64]) {
            self.0.project(mode, &mut y[..DIM]);
        }
    }

    #[test]
    fn stance_energy_audit() {
        let p = BodyParams::default();
        let sys = WithWork(MonopedSystem { params: p });
        let mut y0 = flight_state(&p);
        y0.push(0.0);
        let ex = execute(&sys, FLIGHT, &y0, Stop::Transitions(4), &IntegratorSettings::default()).unwrap();
        for stance in ex.segments.iter().filter(|s| s.mode == STANCE) {
            let (a, b) = (stance.first_state(), stance.last_state());
            let de = stance_energy(&b[..DIM], &p) - stance_energy(&a[..DIM], &p);
            let work = b[DIM] - a[DIM];
            let scale = stance_energy(&a[..DIM], &p);
            assert!((de - work).abs() < 1e-8 * scale, "{de} vs {work}");
        }
    }

    #[test]
    fn hops_ten_strides() {
        let p = BodyParams::default();
        let ex = monoped_execute(&apex_on_invariant_set(0.13, 0.2, &p), &p, 10, &IntegratorSettings::default()).unwrap();
        assert_eq!(ex.transition_count, 20);
    }

    #[test]
    fn unpumped_hops_decay() {
        let mut p = BodyParams::default();
        p.vertical.k_t = 0.0;
        let ex = monoped_execute(&apex_on_invariant_set(0.2, 0.2, &p), &p, 3, &IntegratorSettings::default()).unwrap();
        let td: Vec<f64> = ex.entries_into(STANCE).map(|t| t.pre[DZ]).collect();
        assert!(td.windows(2).all(|w| w[1].abs() < w[0].abs()));
    }

    #[test]
    fn invariant_set_in_the_limit() {
        let p = BodyParams::default().invariance_limit();
        let r = invariance_check(&apex_on_invariant_set(0.2, 0.2, &p), &p, 5, &IntegratorSettings::rk4(1e-4)).unwrap();
        assert!(r.max_attitude_deviation <= 1e-6);
        assert!(r.slip_projection_error <= 1e-6);
    }

    #[test]
    fn moderate_inertia_deviates_more() {
        let lim = BodyParams::default().invariance_limit();
        let moderate = BodyParams { i_t: 10.0 * lim.i_b, i_b: lim.i_b, ..BodyParams::default() };
        let s = IntegratorSettings::rk4(1e-4);
        let a = invariance_check(&apex_on_invariant_set(0.2, 0.2, &lim), &lim, 3, &s).unwrap();
        let b = invariance_check(&apex_on_invariant_set(0.2, 0.2, &moderate), &moderate, 3, &s).unwrap();
        assert!(b.max_attitude_deviation > a.max_attitude_deviation);
    }

    proptest! {
        #[test]
        fn coord_change_round_trip(v in proptest::array::uniform12(-2.0..2.0f64)) {
            let p = BodyParams::default();
            let q = BodyConfig {
                theta1: v[0], theta2: v[1].abs() + 0.05, x: v[2], z: v[3], phi1: v[4], phi2: v[5],
                dtheta1: v[6], dtheta2: v[7], dx: v[8], dz: v[9], dphi1: v[10], dphi2: v[11],
            };
            let (s, a) = coord_change(&q, &p).unwrap();
            let back = coord_change_inverse(&s, &a, &p).unwrap();
            for (x, y) in [
                (q.theta1, back.theta1), (q.phi1, back.phi1), (q.phi2, back.phi2),
                (q.dtheta1, back.dtheta1), (q.dphi1, back.dphi1), (q.dphi2, back.dphi2),
            ] {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn flight_pitch_is_ballistic(tau in -50.0..50.0f64, a2 in -1.0..1.0f64) {
            let p = BodyParams::default();
            let mut y = flight_state(&p);
            y[A2] = a2;
            prop_assert_eq!(flight_dynamics(&y, 0.0, tau, &p)[DA1], 0.0);
        }
    }
}
