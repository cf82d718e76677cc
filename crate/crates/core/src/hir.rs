//! Clocked two-mode attitude model: pitch is driven in stance, shape in flight.
//!
//! State layout is `[a1, a2, ȧ1, ȧ2, ψ, n]` where `ψ` is the clock phase
//! within the current stride and `n` counts completed strides.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hybrid::{execute, HybridSystem, IntegratorSettings, Stop};
use crate::templates::attitude::{graph_error_accel, AttitudeParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HirState {
    pub a1: f64,
    pub a2: f64,
    pub da1: f64,
    pub da2: f64,
    pub psi_a: f64,
}

impl HirState {
    /// At rest on the reference graph `ȧ = -k a`, at the start of stance.
    pub fn on_graph(a: [f64; 2], p: &AttitudeParams) -> Self {
        Self {
            a1: a[0],
            a2: a[1],
            da1: -p.k * a[0],
            da2: -p.k * a[1],
            psi_a: 0.0,
        }
    }
}

/// Per-stance integrated disturbance `δ̄[n]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DisturbanceModel {
    #[default]
    Zero,
    Constant(f64),
    WorstCase,
    /// Applied stride by stride; zero after the sequence runs out.
    Sequence(Vec<f64>),
}

impl DisturbanceModel {
    pub fn delta_bar(&self, stride: usize, p: &AttitudeParams) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(v) => *v,
            Self::WorstCase => p.delta_bar_max,
            Self::Sequence(s) => s.get(stride).copied().unwrap_or(0.0),
        }
    }

    /// Checks every per-stance value against `δ̄_max`.
    pub fn validate(&self, p: &AttitudeParams) -> Result<()> {
        let bad = |v: f64| !(v.abs() <= p.delta_bar_max);
        let over = match self {
            Self::Zero | Self::WorstCase => false,
            Self::Constant(v) => bad(*v),
            Self::Sequence(s) => s.iter().any(|v| bad(*v)),
        };
        if over {
            return Err(Error::InvalidArgument(format!(
                "disturbance exceeds delta_bar_max = {}",
                p.delta_bar_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HirSystem {
    pub params: AttitudeParams,
    pub disturbance: DisturbanceModel,
}

impl HirSystem {
    pub fn new(params: AttitudeParams, disturbance: DisturbanceModel) -> Self {
        Self { params, disturbance }
    }

    pub fn initial_state(&self, s: &HirState) -> Vec<f64> {
        vec![s.a1, s.a2, s.da1, s.da2, s.psi_a, 0.0]
    }

    pub fn initial_mode(s: &HirState) -> usize {
        usize::from(s.psi_a.rem_euclid(2.0 * PI) >= PI)
    }
}

/// Derivative of `[a1, a2, ȧ1, ȧ2, ψ, n]`; stance while `ψ ∈ [0, π)`.
pub fn hir_field(x: &[f64], p: &AttitudeParams, d: &DisturbanceModel) -> [f64; 6] {
    let stance = x[4].rem_euclid(2.0 * PI) < PI;
    mode_field(if stance { 0 } else { 1 }, x, p, d)
}

fn mode_field(mode: usize, x: &[f64], p: &AttitudeParams, d: &DisturbanceModel) -> [f64; 6] {
    let (acc1, acc2) = if mode == 0 {
        let delta = d.delta_bar(x[5].round() as usize, p) * p.omega_a / PI;
        (graph_error_accel(x[0], x[2], p), delta)
    } else {
        (0.0, graph_error_accel(x[1], x[3], p))
    };
    [x[2], x[3], acc1, acc2, p.omega_a, 0.0]
}

impl HybridSystem for HirSystem {
    fn state_dim(&self) -> usize {
        6
    }
    fn field(&self, mode: usize, _: f64, x: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&mode_field(mode, x, &self.params, &self.disturbance));
    }
    fn guard(&self, mode: usize, x: &[f64]) -> f64 {
        if mode == 0 {
            PI - x[4]
        } else {
            2.0 * PI - x[4]
        }
    }
    fn reset(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        if mode == 0 {
            y[4] = PI;
        } else {
            y[4] = 0.0;
            y[5] += 1.0;
        }
        Ok(y)
    }
}

/// `a ↦ ζ (a + δ̄ e₂)`, the high-gain stride map.
pub fn hir_return_map(a: [f64; 2], delta_bar: f64, p: &AttitudeParams) -> [f64; 2] {
    let z = p.zeta();
    [z * a[0], z * (a[1] + delta_bar)]
}

/// `|ζ|ⁿ ‖a₀‖ + δ̄_max |ζ / (1 - ζ)|`.
pub fn triangle_bound(n: usize, a0_norm: f64, p: &AttitudeParams) -> f64 {
    let z = p.zeta();
    z.abs().powi(n as i32) * a0_norm + p.delta_bar_max * (z / (1.0 - z)).abs()
}

/// `(a1, a2)` at each stance entry, starting with the initial state.
pub fn hir_simulate(
    init: &HirState,
    p: &AttitudeParams,
    d: &DisturbanceModel,
    n_strides: usize,
    settings: &IntegratorSettings,
) -> Result<Vec<[f64; 2]>> {
    p.validate()?;
    let sys = HirSystem::new(*p, d.clone());
    let mode0 = HirSystem::initial_mode(init);
    let mut x0 = sys.initial_state(init);
    x0[4] = init.psi_a.rem_euclid(2.0 * PI);
    let mut out = Vec::with_capacity(n_strides + 1);
    if mode0 == 0 && x0[4] == 0.0 {
        out.push([init.a1, init.a2]);
    }
    let transitions = 2 * n_strides + mode0 + usize::from(out.is_empty() && mode0 == 0);
    let exec = execute(&sys, mode0, &x0, Stop::Transitions(transitions), settings)?;
    for tr in exec.entries_into(0) {
        out.push([tr.post[0], tr.post[1]]);
    }
    out.truncate(n_strides + 1);
    Ok(out)
}
