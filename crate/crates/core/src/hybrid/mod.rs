//! Hybrid dynamical systems: per-mode flows, guards and resets, chained
//! into executions and section-to-section return maps.
//!
//! A transition out of mode `i` fires when `guard(i, x)` changes sign from
//! positive to non-positive. The crossing is located by bisection on the
//! bracketing step until `-event_tolerance <= guard <= 0`, and the reset is
//! then applied to the located state as a discrete map.
//!
//! A state may start a mode exactly on its guard (within the event
//! tolerance) as long as the flow immediately moves it into the interior;
//! such segments are flagged. A start strictly outside the domain, a flow
//! leaving through the start point, or a tangential guard contact is
//! reported as [`Error::Degenerate`].

mod csv;
mod integrator;

pub use csv::write_csv;
pub use integrator::{IntegratorSettings, Method};

use crate::error::{Error, Result};
use integrator::{dopri_step, rk4_step};

/// The tuple of modes, vector fields, guards and resets.
///
/// Implementations must be pure: the same arguments always produce the same
/// outputs, and evaluation may happen from several threads at once.
pub trait HybridSystem: Sync {
    fn state_dim(&self) -> usize;

    fn mode_count(&self) -> usize {
        2
    }

    /// Writes `dx/dt` for `mode` into `dx`.
    fn field(&self, mode: usize, t: f64, x: &[f64], dx: &mut [f64]);

    /// Positive in the interior of the mode's domain.
    fn guard(&self, mode: usize, x: &[f64]) -> f64;

    /// Maps a state on the guard of `mode` into the domain of `next_mode(mode)`.
    fn reset(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>>;

    fn next_mode(&self, mode: usize) -> usize {
        (mode + 1) % self.mode_count()
    }

    /// Re-imposes holonomic constraints after a step. Coordinates that are
    /// kinematically slaved to others in a mode are rewritten here.
    fn project(&self, _mode: usize, _x: &mut [f64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub state: Vec<f64>,
    pub guard_residual: f64,
}

/// Samples of one mode's flow, from entry to the guard crossing (or horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub mode: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminal_event: Option<Event>,
    /// The segment started on its own guard with an inward-pointing field.
    pub flagged_start: bool,
}

impl TrajectorySegment {
    pub fn first_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("segment has at least one sample")
    }

    pub fn duration(&self) -> f64 {
        self.times.last().unwrap() - self.times[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub from_mode: usize,
    pub to_mode: usize,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridExecution {
    pub segments: Vec<TrajectorySegment>,
    pub transitions: Vec<Transition>,
    pub transition_count: usize,
    pub final_mode: usize,
    pub final_time: f64,
    pub final_state: Vec<f64>,
}

impl HybridExecution {
    /// Post-reset states at every entry into `mode`, in order.
    pub fn entries_into(&self, mode: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |tr| tr.to_mode == mode)
    }
}

/// When [`execute`] stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Transitions(usize),
    Time(f64),
}

fn check_state<S: HybridSystem + ?Sized>(sys: &S, x: &[f64]) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(Error::InvalidArgument(format!(
            "state has {} components, system expects {}",
            x.len(),
            sys.state_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("state has non-finite components".into()));
    }
    Ok(())
}

fn single_step<S: HybridSystem + ?Sized>(
    sys: &S,
    mode: usize,
    t: f64,
    x: &[f64],
    h: f64,
    settings: &IntegratorSettings,
) -> Vec<f64> {
    match settings.method {
        Method::Rk4 { .. } => rk4_step(sys, mode, t, x, h),
        Method::DormandPrince { rtol, atol, .. } => dopri_step(sys, mode, t, x, h, rtol, atol).0,
    }
}

/// Bisects the step `[0, h]` from `(t, x)` for the guard crossing. The
/// returned state always lies on the crossed side, `-tol <= guard <= 0`.
fn locate_event<S: HybridSystem + ?Sized>(
    sys: &S,
    mode: usize,
    t: f64,
    x: &[f64],
    h: f64,
    end: (&[f64], f64),
    settings: &IntegratorSettings,
) -> Result<Event> {
    let tol = settings.event_tolerance;
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = end.0.to_vec();
    let mut g_hi = end.1;
    for _ in 0..settings.max_step_halvings {
        if g_hi >= -tol {
            return Ok(Event {
                time: t + hi,
                state: y_hi,
                guard_residual: g_hi,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let y = single_step(sys, mode, t, x, mid, settings);
        let g = sys.guard(mode, &y);
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = y;
            g_hi = g;
        }
    }
    if g_hi >= -tol {
        return Ok(Event {
            time: t + hi,
            state: y_hi,
            guard_residual: g_hi,
        });
    }
    Err(Error::NonconvergentEvent {
        mode,
        time: t + hi,
        residual: g_hi.abs(),
    })
}

/// Rate of change of the guard along the flow at `x`.
fn guard_rate<S: HybridSystem + ?Sized>(sys: &S, mode: usize, t: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let mut f = vec![0.0; n];
    sys.field(mode, t, x, &mut f);
    let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if fnorm == 0.0 {
        return 0.0;
    }
    let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let d = 1e-7 * xnorm / fnorm;
    let fwd: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a + d * b).collect();
    let bwd: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a - d * b).collect();
    (sys.guard(mode, &fwd) - sys.guard(mode, &bwd)) / (2.0 * d)
}

/// Integrates one mode from `state0` at `t0` until its guard fires or `t_max`.
pub fn integrate_mode<S: HybridSystem + ?Sized>(
    sys: &S,
    mode: usize,
    state0: &[f64],
    t0: f64,
    t_max: f64,
    settings: &IntegratorSettings,
) -> Result<TrajectorySegment> {
    settings.validate().map_err(Error::InvalidArgument)?;
    check_state(sys, state0)?;
    if mode >= sys.mode_count() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range")));
    }
    if !(t_max > t0) {
        return Err(Error::InvalidArgument(format!(
            "t_max ({t_max}) must exceed t0 ({t0})"
        )));
    }
    let tol = settings.event_tolerance;
    let g0 = sys.guard(mode, state0);
    if !g0.is_finite() || g0 < -tol {
        return Err(Error::Degenerate {
            mode,
            time: t0,
            reason: format!("initial state lies outside the domain (guard = {g0:e})"),
        });
    }
    let flagged_start = g0 <= tol;

    let mut times = vec![t0];
    let mut states = vec![state0.to_vec()];
    let mut t = t0;
    let mut x = state0.to_vec();
    let mut g = g0;
    let mut first = true;

    let (mut h, h_max) = match settings.method {
        Method::Rk4 { step } => (step, step),
        Method::DormandPrince {
            initial_step,
            max_step,
            ..
        } => (initial_step.min(max_step), max_step),
    };

    while t < t_max {
        let remaining = t_max - t;
        let hit_end = h >= remaining;
        let mut h_try = if hit_end { remaining } else { h };
        let (y, h_used, h_next) = match settings.method {
            Method::Rk4 { .. } => (rk4_step(sys, mode, t, &x, h_try), h_try, h),
            Method::DormandPrince { rtol, atol, .. } => {
                let mut rejects = 0u32;
                loop {
                    let (y, err) = dopri_step(sys, mode, t, &x, h_try, rtol, atol);
                    if err <= 1.0 {
                        let grow = if err == 0.0 {
                            5.0
                        } else {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        let next = if hit_end && h_try == remaining {
                            h
                        } else {
                            (h_try * grow).min(h_max)
                        };
                        break (y, h_try, next);
                    }
                    rejects += 1;
                    let shrink = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
                    } else {
                        0.1
                    };
                    h_try *= shrink;
                    if rejects > settings.max_step_halvings
                        || h_try <= 4.0 * f64::EPSILON * t.abs().max(1.0)
                    {
                        return Err(Error::StepUnderflow {
                            time: t,
                            step: h_try,
                        });
                    }
                }
            }
        };
        let t_new = if hit_end && h_used == remaining {
            t_max
        } else {
            t + h_used
        };
        let g_new = sys.guard(mode, &y);

        if first && flagged_start {
            if !(g_new > g0) {
                return Err(Error::Degenerate {
                    mode,
                    time: t0,
                    reason: "flow leaves the domain at the start of the mode".into(),
                });
            }
        } else if g > 0.0 && g_new <= 0.0 {
            let event = locate_event(sys, mode, t, &x, h_used, (&y, g_new), settings)?;
            if guard_rate(sys, mode, event.time, &event.state) >= 0.0 {
                return Err(Error::Degenerate {
                    mode,
                    time: event.time,
                    reason: "grazing guard contact".into(),
                });
            }
            times.push(event.time);
            states.push(event.state.clone());
            return Ok(TrajectorySegment {
                mode,
                times,
                states,
                terminal_event: Some(event),
                flagged_start,
            });
        }
        first = false;
        t = t_new;
        x = y;
        g = g_new;
        h = h_next;
        times.push(t);
        states.push(x.clone());
    }

    Ok(TrajectorySegment {
        mode,
        times,
        states,
        terminal_event: None,
        flagged_start,
    })
}

/// Alternates flows and resets from `(mode0, state0)` at `t = 0`.
pub fn execute<S: HybridSystem + ?Sized>(
    sys: &S,
    mode0: usize,
    state0: &[f64],
    stop: Stop,
    settings: &IntegratorSettings,
) -> Result<HybridExecution> {
    let mut segments = Vec::new();
    let mut transitions = Vec::new();
    let mut mode = mode0;
    let mut t = 0.0;
    let mut x = state0.to_vec();

    loop {
        match stop {
            Stop::Transitions(n) if transitions.len() >= n => break,
            Stop::Time(tf) if t >= tf => break,
            _ => {}
        }
        let horizon = match stop {
            Stop::Transitions(_) => t + settings.max_segment_time,
            Stop::Time(tf) => tf,
        };
        let seg = integrate_mode(sys, mode, &x, t, horizon, settings)?;
        let Some(event) = seg.terminal_event.clone() else {
            if let Stop::Transitions(_) = stop {
                return Err(Error::Degenerate {
                    mode,
                    time: horizon,
                    reason: "no guard crossing within the segment horizon".into(),
                });
            }
            t = *seg.times.last().unwrap();
            x = seg.last_state().to_vec();
            segments.push(seg);
            break;
        };
        let post = sys.reset(mode, &event.state)?;
        check_state(sys, &post)?;
        let next = sys.next_mode(mode);
        let g_post = sys.guard(next, &post);
        if !(g_post >= -settings.event_tolerance) {
            return Err(Error::Degenerate {
                mode: next,
                time: event.time,
                reason: format!("reset lands outside the next domain (guard = {g_post:e})"),
            });
        }
        transitions.push(Transition {
            time: event.time,
            from_mode: mode,
            to_mode: next,
            pre: event.state.clone(),
            post: post.clone(),
        });
        segments.push(seg);
        mode = next;
        t = event.time;
        x = post;
    }

    Ok(HybridExecution {
        segments,
        transition_count: transitions.len(),
        transitions,
        final_mode: mode,
        final_time: t,
        final_state: x,
    })
}

/// One full cycle through every mode, from entry into `section_mode` to the next entry.
pub fn return_map_eval<S: HybridSystem + ?Sized>(
    sys: &S,
    section_mode: usize,
    state_on_section: &[f64],
    settings: &IntegratorSettings,
) -> Result<Vec<f64>> {
    let exec = execute(
        sys,
        section_mode,
        state_on_section,
        Stop::Transitions(sys.mode_count()),
        settings,
    )?;
    debug_assert_eq!(exec.final_mode, section_mode);
    Ok(exec.final_state)
}
