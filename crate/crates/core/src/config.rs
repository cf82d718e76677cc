//! Run configuration: flat `section.key = value` files.
//!
//! Lines starting with `#` and text after a `#` are ignored. Every key must be
//! known and may appear at most once. Omitted keys keep their defaults.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::hir::DisturbanceModel;
use crate::hybrid::{IntegratorSettings, Method};
use crate::monoped::BodyParams;
use crate::slip::SlipParams;
use crate::templates::{AttitudeParams, ForeAftParams, VerticalParams};
use crate::templates::attitude::required_gain_bound;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the error comes from a file.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line: None,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    Vertical,
    Slip,
    Hir,
    Monoped,
    Mbhop,
}

impl SystemKind {
    pub const ALL: [SystemKind; 5] = [Self::Vertical, Self::Slip, Self::Hir, Self::Monoped, Self::Mbhop];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vertical => "vertical",
            Self::Slip => "slip",
            Self::Hir => "hir",
            Self::Monoped => "monoped",
            Self::Mbhop => "mbhop",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .map_or_else(|| err(format!("unknown system '{s}' (expected vertical, slip, hir, monoped or mbhop)")), Ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalSection {
    pub params: VerticalParams,
    pub gravity: f64,
    /// Touchdown velocity of the first stance.
    pub init_chidot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbhopSection {
    pub params: ForeAftParams,
    pub kappa: f64,
    pub init_v: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlipSection {
    pub params: SlipParams,
    pub apex_height: f64,
    pub apex_xdot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HirSection {
    pub omega_a: f64,
    pub eps_a: f64,
    pub delta_bar_max: f64,
    /// `k` as a multiple of the gain bound; ignored when `k` is set.
    pub gain_margin: f64,
    pub k: Option<f64>,
    pub k_g_ratio: f64,
    pub disturbance: String,
    pub disturbance_value: f64,
    pub init_a: [f64; 2],
    /// Shortest stance or flight duration the coupled plant can guarantee.
    /// When set, the gain bound is also reported for `ω_a = π / transition_time`.
    pub transition_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonopedSection {
    pub params: BodyParams,
    pub apex_height: f64,
    pub apex_xdot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSection {
    pub mass_ratio: f64,
    pub body_inertia: f64,
    pub inertia_ratio: f64,
    pub step: f64,
    pub apex_height: f64,
    pub apex_xdot: f64,
    pub strides: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub fd_step: f64,
    pub map_fd_step: f64,
    pub fixpoint_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemKind,
    pub seed: u64,
    pub strides: usize,
    pub vertical: VerticalSection,
    pub mbhop: MbhopSection,
    pub slip: SlipSection,
    pub hir: HirSection,
    pub monoped: MonopedSection,
    pub invariance: InvarianceSection,
    pub integrator: IntegratorSettings,
    /// Fixed step used when `integrator.method = rk4`.
    pub rk4_step: f64,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    /// Relative perturbation of each sweep point's initial state.
    pub sweep_jitter: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let slip = SlipParams::default();
        let body = BodyParams::default();
        let att = AttitudeParams::default();
        Self {
            system: SystemKind::Vertical,
            seed: 0,
            strides: 20,
            vertical: VerticalSection {
                params: VerticalParams::default(),
                gravity: 9.81,
                init_chidot: -0.3,
            },
            mbhop: MbhopSection {
                params: ForeAftParams::default(),
                kappa: 1.0,
                init_v: [0.5, -1.0],
            },
            slip: SlipSection {
                params: slip,
                apex_height: 1.1,
                apex_xdot: 1.0,
            },
            hir: HirSection {
                omega_a: att.omega_a,
                eps_a: att.eps_a,
                delta_bar_max: att.delta_bar_max,
                gain_margin: 1.5,
                k: None,
                k_g_ratio: 200.0,
                disturbance: "worst".into(),
                disturbance_value: 0.0,
                init_a: [0.5, -0.4],
                transition_time: None,
            },
            monoped: MonopedSection {
                params: body,
                apex_height: 0.13,
                apex_xdot: 0.2,
            },
            invariance: InvarianceSection {
                mass_ratio: 1e-6,
                body_inertia: 1e6,
                inertia_ratio: 1e6,
                step: 1e-4,
                apex_height: 0.2,
                apex_xdot: 0.2,
                strides: 5,
                tolerance: 1e-6,
            },
            integrator: IntegratorSettings::default(),
            rk4_step: 1e-4,
            analysis: AnalysisSection {
                fd_step: crate::analysis::DEFAULT_FD_STEP,
                map_fd_step: crate::slip::MAP_FD_STEP,
                fixpoint_tol: 1e-10,
                max_iter: 100,
            },
            output: OutputSection {
                csv: PathBuf::from("trajectory.csv"),
                svg: None,
            },
            sweep_jitter: 0.0,
        }
    }
}

fn num(v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("expected a finite number, got '{v}'")),
    }
}

fn count(v: &str) -> Result<usize, ConfigError> {
    v.parse().map_or_else(|_| err(format!("expected a non-negative integer, got '{v}'")), Ok)
}

fn flag(v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => err(format!("expected true or false, got '{v}'")),
    }
}

fn opt_num(v: &str) -> Result<Option<f64>, ConfigError> {
    if v == "none" {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Defaults overridden by every assignment in `text`, then validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let at = |e: ConfigError| ConfigError {
                line: Some(i + 1),
                ..e
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(at(ConfigError {
                    line: None,
                    message: format!("expected 'section.key = value', got '{line}'"),
                }));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(ConfigError {
                    line: None,
                    message: format!("duplicate key '{key}'"),
                }));
            }
            cfg.set(key, value).map_err(at)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns one key. Does not validate the result.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let Some((section, name)) = key.split_once('.') else {
            return err(format!("key '{key}' has no section"));
        };
        let unknown = || err(format!("unknown key '{key}'"));
        match section {
            "run" => match name {
                "system" => self.system = value.parse()?,
                "seed" => self.seed = value.parse().map_or_else(|_| err(format!("bad seed '{value}'")), Ok)?,
                "strides" => self.strides = count(value)?,
                _ => return unknown(),
            },
            "vertical" => {
                let s = &mut self.vertical;
                match name {
                    "gravity" => s.gravity = num(value)?,
                    "init_chidot" => s.init_chidot = num(value)?,
                    _ => {
                        if !set_vertical(&mut s.params, name, value)? {
                            return unknown();
                        }
                    }
                }
            }
            "mbhop" => {
                let s = &mut self.mbhop;
                match name {
                    "kappa" => s.kappa = num(value)?,
                    "init_v1" => s.init_v[0] = num(value)?,
                    "init_v2" => s.init_v[1] = num(value)?,
                    "rho_l" => s.params.rho_l = num(value)?,
                    _ => {
                        if !set_foreaft(&mut s.params, name, value)? {
                            return unknown();
                        }
                    }
                }
            }
            "slip" => {
                let s = &mut self.slip;
                let p = &mut s.params;
                match name {
                    "k_s" => p.k_s = num(value)?,
                    "rho_l" => {
                        p.rho_l = num(value)?;
                        p.foreaft.rho_l = p.rho_l;
                    }
                    "g" => p.g = num(value)?,
                    "small_angle_guard" => p.small_angle_guard = flag(value)?,
                    "stance_gravity" => p.stance_gravity = flag(value)?,
                    "pump_length_scaled" => p.pump_length_scaled = flag(value)?,
                    "apex_height" => s.apex_height = num(value)?,
                    "apex_xdot" => s.apex_xdot = num(value)?,
                    _ => {
                        if !set_vertical(&mut p.vertical, name, value)? && !set_foreaft(&mut p.foreaft, name, value)? {
                            return unknown();
                        }
                    }
                }
            }
            "hir" => {
                let s = &mut self.hir;
                match name {
                    "omega_a" => s.omega_a = num(value)?,
                    "eps_a" => s.eps_a = num(value)?,
                    "delta_bar_max" => s.delta_bar_max = num(value)?,
                    "gain_margin" => s.gain_margin = num(value)?,
                    "k" => s.k = opt_num(value)?,
                    "k_g_ratio" => s.k_g_ratio = num(value)?,
                    "disturbance" => match value {
                        "zero" | "worst" | "constant" => s.disturbance = value.into(),
                        _ => return err(format!("unknown disturbance '{value}' (expected zero, worst or constant)")),
                    },
                    "disturbance_value" => s.disturbance_value = num(value)?,
                    "a1" => s.init_a[0] = num(value)?,
                    "a2" => s.init_a[1] = num(value)?,
                    "transition_time" => s.transition_time = opt_num(value)?,
                    _ => return unknown(),
                }
            }
            "monoped" => {
                let s = &mut self.monoped;
                let p = &mut s.params;
                match name {
                    "m_b" => p.m_b = num(value)?,
                    "i_b" => p.i_b = num(value)?,
                    "m_t" => p.m_t = num(value)?,
                    "i_t" => p.i_t = num(value)?,
                    "rho_l" => {
                        p.rho_l = num(value)?;
                        p.foreaft.rho_l = p.rho_l;
                    }
                    "rho_t" => p.rho_t = num(value)?,
                    "k_s" => p.k_s = num(value)?,
                    "g" => p.g = num(value)?,
                    "servo_bandwidth" => p.servo_bandwidth = num(value)?,
                    "small_angle_guard" => p.small_angle_guard = flag(value)?,
                    "apex_height" => s.apex_height = num(value)?,
                    "apex_xdot" => s.apex_xdot = num(value)?,
                    _ => {
                        if !set_vertical(&mut p.vertical, name, value)? && !set_foreaft(&mut p.foreaft, name, value)? {
                            return unknown();
                        }
                    }
                }
            }
            "invariance" => {
                let s = &mut self.invariance;
                match name {
                    "mass_ratio" => s.mass_ratio = num(value)?,
                    "body_inertia" => s.body_inertia = num(value)?,
                    "inertia_ratio" => s.inertia_ratio = num(value)?,
                    "step" => s.step = num(value)?,
                    "apex_height" => s.apex_height = num(value)?,
                    "apex_xdot" => s.apex_xdot = num(value)?,
                    "strides" => s.strides = count(value)?,
                    "tolerance" => s.tolerance = num(value)?,
                    _ => return unknown(),
                }
            }
            "integrator" => self.set_integrator(name, value).or_else(|e| {
                if e.message.is_empty() {
                    unknown()
                } else {
                    Err(e)
                }
            })?,
            "analysis" => {
                let s = &mut self.analysis;
                match name {
                    "fd_step" => s.fd_step = num(value)?,
                    "map_fd_step" => s.map_fd_step = num(value)?,
                    "fixpoint_tol" => s.fixpoint_tol = num(value)?,
                    "max_iter" => s.max_iter = count(value)?,
                    _ => return unknown(),
                }
            }
            "output" => match name {
                "csv" => self.output.csv = PathBuf::from(value),
                "svg" => self.output.svg = (!value.is_empty() && value != "none").then(|| PathBuf::from(value)),
                _ => return unknown(),
            },
            "sweep" => match name {
                "jitter" => self.sweep_jitter = num(value)?,
                _ => return unknown(),
            },
            _ => return err(format!("unknown section '{section}' in key '{key}'")),
        }
        Ok(())
    }

    fn set_integrator(&mut self, name: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.integrator;
        let mut dp = match s.method {
            Method::DormandPrince {
                rtol,
                atol,
                initial_step,
                max_step,
            } => (rtol, atol, initial_step, max_step),
            Method::Rk4 { .. } => {
                let Method::DormandPrince {
                    rtol,
                    atol,
                    initial_step,
                    max_step,
                } = IntegratorSettings::default().method
                else {
                    unreachable!()
                };
                (rtol, atol, initial_step, max_step)
            }
        };
        let mut rk4 = matches!(s.method, Method::Rk4 { .. });
        match name {
            "method" => match value {
                "dopri" => rk4 = false,
                "rk4" => rk4 = true,
                _ => return err(format!("unknown method '{value}' (expected dopri or rk4)")),
            },
            "rtol" => dp.0 = num(value)?,
            "atol" => dp.1 = num(value)?,
            "initial_step" => dp.2 = num(value)?,
            "max_step" => dp.3 = num(value)?,
            "step" => self.rk4_step = num(value)?,
            "event_tolerance" => s.event_tolerance = num(value)?,
            "max_step_halvings" => {
                s.max_step_halvings = value.parse().map_or_else(|_| err(format!("bad count '{value}'")), Ok)?
            }
            "max_segment_time" => s.max_segment_time = num(value)?,
            _ => return err(""),
        }
        s.method = if rk4 {
            Method::Rk4 { step: self.rk4_step }
        } else {
            Method::DormandPrince {
                rtol: dp.0,
                atol: dp.1,
                initial_step: dp.2,
                max_step: dp.3,
            }
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |r: crate::Result<()>| r.map_err(|e| ConfigError { line: None, message: e.to_string() });
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                err(format!("{name} must be positive, got {v}"))
            }
        };
        wrap(self.vertical.params.validate())?;
        positive("vertical.gravity", self.vertical.gravity)?;
        if !(self.vertical.init_chidot < 0.0) {
            return err("vertical.init_chidot must be negative (a touchdown velocity)");
        }
        wrap(self.mbhop.params.validate())?;
        positive("mbhop.kappa", self.mbhop.kappa)?;
        wrap(self.slip.params.validate())?;
        positive("slip.apex_height", self.slip.apex_height)?;
        positive("hir.gain_margin", self.hir.gain_margin)?;
        positive("hir.k_g_ratio", self.hir.k_g_ratio)?;
        if let Some(t) = self.hir.transition_time {
            positive("hir.transition_time", t)?;
        }
        let att = self.attitude_params();
        wrap(att.validate())?;
        wrap(self.disturbance().validate(&att))?;
        wrap(self.monoped.params.validate())?;
        positive("monoped.apex_height", self.monoped.apex_height)?;
        let inv = &self.invariance;
        for (n, v) in [
            ("invariance.mass_ratio", inv.mass_ratio),
            ("invariance.body_inertia", inv.body_inertia),
            ("invariance.inertia_ratio", inv.inertia_ratio),
            ("invariance.step", inv.step),
            ("invariance.apex_height", inv.apex_height),
            ("invariance.tolerance", inv.tolerance),
        ] {
            positive(n, v)?;
        }
        wrap(self.invariance_params().validate())?;
        self.integrator.validate().map_err(|m| ConfigError { line: None, message: format!("integrator: {m}") })?;
        let a = &self.analysis;
        positive("analysis.fd_step", a.fd_step)?;
        positive("analysis.map_fd_step", a.map_fd_step)?;
        positive("analysis.fixpoint_tol", a.fixpoint_tol)?;
        if a.max_iter == 0 {
            return err("analysis.max_iter must be at least 1");
        }
        if self.strides == 0 {
            return err("run.strides must be at least 1");
        }
        if !(self.sweep_jitter >= 0.0 && self.sweep_jitter.is_finite()) {
            return err("sweep.jitter must be non-negative");
        }
        Ok(())
    }

    /// Attitude gains, with `k` derived from the margin unless given.
    pub fn attitude_params(&self) -> AttitudeParams {
        let h = &self.hir;
        let base = AttitudeParams {
            k: 1.0,
            k_g: 1.0,
            omega_a: h.omega_a,
            eps_a: h.eps_a,
            delta_bar_max: h.delta_bar_max,
        };
        let k = h.k.unwrap_or_else(|| h.gain_margin * required_gain_bound(&base));
        AttitudeParams {
            k,
            k_g: h.k_g_ratio * k,
            ..base
        }
    }

    pub fn disturbance(&self) -> DisturbanceModel {
        match self.hir.disturbance.as_str() {
            "zero" => DisturbanceModel::Zero,
            "constant" => DisturbanceModel::Constant(self.hir.disturbance_value),
            _ => DisturbanceModel::WorstCase,
        }
    }

    /// Monoped parameters with the shared attitude block.
    pub fn body_params(&self) -> BodyParams {
        BodyParams {
            attitude: self.attitude_params(),
            ..self.monoped.params
        }
    }

    /// The monoped pushed toward a massless tail and rigid attitude.
    pub fn invariance_params(&self) -> BodyParams {
        let base = self.body_params();
        let inv = &self.invariance;
        BodyParams {
            m_t: inv.mass_ratio * base.m_b,
            i_b: inv.body_inertia,
            i_t: inv.inertia_ratio * inv.body_inertia,
            ..base
        }
    }

    /// Section for bare parameter names given to a sweep.
    pub fn primary_section(&self) -> &'static str {
        self.system.name()
    }
}

fn set_vertical(p: &mut VerticalParams, name: &str, value: &str) -> Result<bool, ConfigError> {
    match name {
        "omega" => p.omega = num(value)?,
        "damping_ratio" => p.damping_ratio = num(value)?,
        "k_t" => p.k_t = num(value)?,
        "eps" => p.eps = num(value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn set_foreaft(p: &mut ForeAftParams, name: &str, value: &str) -> Result<bool, ConfigError> {
    match name {
        "t_s" => p.t_s = num(value)?,
        "k_p" => p.k_p = num(value)?,
        "xdot_star" => p.xdot_star = num(value)?,
        _ => return Ok(false),
    }
    Ok(true)
}
