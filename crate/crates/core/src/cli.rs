//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or usage
//! error, 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{find_fixed_point, FixedPointResult};
use crate::config::{ConfigError, RunConfig, SystemKind};
use crate::error::{Error, Result};
use crate::hir::{hir_return_map, HirState, HirSystem};
use crate::hybrid::{execute, write_csv, HybridExecution, Stop};
use crate::monoped::{self, apex_on_invariant_set, csv_row, monoped_execute};
use crate::slip::{self, certificate_settings, composed_slip_return_map, slip_full_execute, SlipSystem};
use crate::svg::{phase_portrait, Curve};
use crate::sweep;
use crate::templates::foreaft::{mbhop_return_map, raibert_touchdown_angle, sweep_angle};
use crate::templates::vertical::vertical_return_map;
use crate::templates::VerticalHopper;
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tailhop", version, about = "Hybrid hopping templates and their return maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// vertical, slip, hir, monoped or mbhop.
    #[arg(long, value_name = "NAME")]
    system: Option<String>,
    #[arg(long, value_name = "N")]
    strides: Option<usize>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run an execution and write its trajectory CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write a phase portrait.
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
    },
    /// Locate a fixed point of the system's stride map.
    Fixpoint {
        #[command(flatten)]
        common: Common,
        /// Comma-separated initial guess.
        #[arg(long, value_name = "X1,X2", allow_hyphen_values = true)]
        guess: Option<String>,
    },
    /// Run the proposition checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// 1 to 7, or `all`.
        #[arg(long, value_name = "K")]
        prop: Option<String>,
        /// `all`, as an alternative to `--prop all`.
        which: Option<String>,
    },
    /// Evaluate metrics over a range of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "NAME")]
        param: String,
        #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
        range: String,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
    Verify,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Numeric(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn load(common: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &common.system {
        cfg.system = s.parse()?;
    }
    if let Some(n) = common.strides {
        cfg.strides = n;
    }
    if let Some(o) = &common.out {
        cfg.output.csv = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return if code == 0 { EXIT_OK } else { EXIT_CONFIG };
        }
    };
    let res = match &cli.cmd {
        Cmd::Simulate { common, svg } => cmd_simulate(common, svg.as_deref(), stdout),
        Cmd::Fixpoint { common, guess } => cmd_fixpoint(common, guess.as_deref(), stdout),
        Cmd::Verify { common, prop, which } => cmd_verify(common, prop.as_deref().or(which.as_deref()), stdout),
        Cmd::Sweep { common, param, range } => cmd_sweep(common, param, range, stdout),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(Failure::Verify) => EXIT_VERIFY,
        Err(Failure::Config(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Numeric(m)) => {
            let _ = writeln!(stderr, "numerical failure: {m}");
            EXIT_NUMERIC
        }
    }
}

/// Trajectory plus per-stride summary of a simulation.
pub struct Simulation {
    pub csv: Vec<u8>,
    pub strides: usize,
    /// Apex heights for hoppers, `‖a‖` per stride for the attitude model,
    /// `‖v‖` per stride for the fore-aft map.
    pub apex: Vec<f64>,
    pub apex_label: &'static str,
    pub final_state: Vec<f64>,
    pub final_label: &'static str,
    pub portrait: Vec<Curve>,
    pub axes: (&'static str, &'static str),
}

fn curves(exec: &HybridExecution, ix: usize, iy: usize) -> Vec<Curve> {
    exec.segments
        .iter()
        .map(|s| Curve {
            mode: s.mode,
            points: s.states.iter().map(|x| (x[ix], x[iy])).collect(),
        })
        .collect()
}

fn csv_bytes<F: Fn(usize, &[f64]) -> Vec<f64>>(exec: &HybridExecution, cols: &[&str], row: F) -> Vec<u8> {
    let cols: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, exec, &cols, row).expect("writing to memory");
    buf
}

fn ballistic_apex(z: f64, dz: f64, g: f64) -> f64 {
    if g > 0.0 && dz > 0.0 {
        z + dz * dz / (2.0 * g)
    } else {
        z
    }
}

/// Runs the configured system for `cfg.strides` strides.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let n = cfg.strides;
    let s = &cfg.integrator;
    match cfg.system {
        SystemKind::Vertical => {
            let v = &cfg.vertical;
            let sys = VerticalHopper {
                params: v.params,
                gravity: v.gravity,
            };
            let x0 = [0.0, v.init_chidot / v.params.omega];
            let ex = execute(&sys, 0, &x0, Stop::Transitions(2 * n), s)?;
            let w = v.params.omega;
            let apex = ex.entries_into(1).map(|t| (w * t.post[1]).powi(2) / (2.0 * v.gravity)).collect();
            let td = ex.entries_into(0).last().map_or(x0[1], |t| t.post[1]) * w;
            Ok(Simulation {
                csv: csv_bytes(&ex, &["chi", "chidot_over_omega"], |_, x| x.to_vec()),
                strides: ex.entries_into(1).count(),
                apex,
                apex_label: "apex",
                final_state: vec![td],
                final_label: "touchdown_chidot",
                portrait: curves(&ex, 0, 1),
                axes: ("chi", "chidot / omega"),
            })
        }
        SystemKind::Slip => {
            let p = &cfg.slip.params;
            let init = SlipSystem::new(*p).flight_state(0.0, cfg.slip.apex_height, cfg.slip.apex_xdot, 0.0);
            let ex = slip_full_execute(&init, p, n, s)?;
            let apex = ex
                .entries_into(slip::FLIGHT)
                .map(|t| ballistic_apex(t.post[slip::Z], t.post[slip::DZ], p.g))
                .collect();
            let td = ex.entries_into(slip::STANCE).last().map_or(init.clone(), |t| t.pre.clone());
            Ok(Simulation {
                csv: csv_bytes(&ex, &slip::COLUMNS, |_, x| x.to_vec()),
                strides: ex.entries_into(slip::FLIGHT).count(),
                apex,
                apex_label: "apex",
                final_state: vec![td[slip::DX], td[slip::DZ]],
                final_label: "touchdown_velocity",
                portrait: curves(&ex, slip::Z, slip::DZ),
                axes: ("z", "dz"),
            })
        }
        SystemKind::Monoped => {
            let p = cfg.body_params();
            let init = apex_on_invariant_set(cfg.monoped.apex_height, cfg.monoped.apex_xdot, &p);
            let ex = monoped_execute(&init, &p, n, s)?;
            let apex = ex
                .entries_into(monoped::FLIGHT)
                .map(|t| ballistic_apex(t.post[monoped::Z], t.post[monoped::DZ], p.g))
                .collect();
            let td = ex
                .entries_into(monoped::STANCE)
                .last()
                .map_or_else(|| ex.final_state.clone(), |t| t.pre.clone());
            Ok(Simulation {
                csv: csv_bytes(&ex, &monoped::CSV_COLUMNS, |m, y| csv_row(m, y, &p)),
                strides: ex.entries_into(monoped::FLIGHT).count(),
                apex,
                apex_label: "apex",
                final_state: vec![td[monoped::DX], td[monoped::DZ]],
                final_label: "touchdown_velocity",
                portrait: curves(&ex, monoped::Z, monoped::DZ),
                axes: ("z", "dz"),
            })
        }
        SystemKind::Hir => {
            let p = cfg.attitude_params();
            let sys = HirSystem::new(p, cfg.disturbance());
            let x0 = sys.initial_state(&HirState::on_graph(cfg.hir.init_a, &p));
            let ex = execute(&sys, 0, &x0, Stop::Transitions(2 * n), s)?;
            let norms = ex.entries_into(0).map(|t| t.post[0].hypot(t.post[1])).collect();
            Ok(Simulation {
                csv: csv_bytes(&ex, &["a1", "a2", "da1", "da2", "psi", "stride"], |_, x| x.to_vec()),
                strides: ex.entries_into(0).count(),
                apex: norms,
                apex_label: "attitude_norm",
                final_state: vec![ex.final_state[0], ex.final_state[1]],
                final_label: "attitude",
                portrait: curves(&ex, 0, 1),
                axes: ("a1", "a2"),
            })
        }
        SystemKind::Mbhop => {
            let p = &cfg.mbhop.params;
            let mut v = cfg.mbhop.init_v;
            let mut csv = b"stride,v1,v2,beta\n".to_vec();
            let mut pts = Vec::with_capacity(n + 1);
            let mut norms = Vec::with_capacity(n);
            for k in 0..=n {
                let beta = raibert_touchdown_angle(v[0], p);
                let _ = writeln!(csv, "{k},{:.12e},{:.12e},{beta:.12e}", v[0], v[1]);
                pts.push((v[0], v[1]));
                if k < n {
                    v = mbhop_return_map(v, cfg.mbhop.kappa, p);
                    norms.push(v[0].hypot(v[1]));
                }
            }
            Ok(Simulation {
                csv,
                strides: n,
                apex: norms,
                apex_label: "speed",
                final_state: v.to_vec(),
                final_label: "touchdown_velocity",
                portrait: vec![Curve { mode: 0, points: pts }],
                axes: ("v1", "v2"),
            })
        }
    }
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", items.join(","))
}

fn cmd_simulate(common: &Common, svg: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let sim = simulate(&cfg)?;
    let path = &cfg.output.csv;
    std::fs::write(path, &sim.csv).map_err(|e| io_failure(path, e))?;
    if let Some(p) = svg.map(Path::to_path_buf).or_else(|| cfg.output.svg.clone()) {
        let doc = phase_portrait(&sim.portrait, sim.axes.0, sim.axes.1);
        std::fs::write(&p, doc).map_err(|e| io_failure(&p, e))?;
    }
    let _ = writeln!(
        out,
        "system={} strides={} {}={} {}={} csv={}",
        cfg.system,
        sim.strides,
        sim.apex_label,
        list(&sim.apex),
        sim.final_label,
        list(&sim.final_state),
        path.display()
    );
    Ok(())
}

fn parse_guess(s: &str, dim: usize) -> Result<Vec<f64>, ConfigError> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(ConfigError {
            line: None,
            message: format!("--guess needs {dim} comma-separated numbers, got '{s}'"),
        }),
    }
}

/// Fixed point of the configured system's stride map from `guess`.
fn fixpoint(cfg: &RunConfig, guess: Option<&str>) -> Result<FixedPointResult, Failure> {
    let tol = cfg.analysis.fixpoint_tol;
    let iters = cfg.analysis.max_iter;
    let r = match cfg.system {
        SystemKind::Vertical => {
            let g = guess.map(|s| parse_guess(s, 1)).transpose()?.unwrap_or(vec![1.2]);
            let s = certificate_settings(&cfg.integrator);
            let p = cfg.vertical.params;
            find_fixed_point(|k: &[f64]| Ok(vec![vertical_return_map(k[0], &p, &s)?]), &g, tol, iters)
        }
        SystemKind::Mbhop => {
            let g = guess.map(|s| parse_guess(s, 2)).transpose()?.unwrap_or(cfg.mbhop.init_v.to_vec());
            let p = cfg.mbhop.params;
            let kappa = cfg.mbhop.kappa;
            let map = |v: &[f64]| -> Result<Vec<f64>> {
                if !(v[1] < 0.0) {
                    return Err(Error::InvalidTouchdown {
                        vx: v[0],
                        vz: v[1],
                        reason: "touchdown must descend".into(),
                    });
                }
                Ok(mbhop_return_map([v[0], v[1]], kappa, &p).to_vec())
            };
            find_fixed_point(map, &g, tol, iters)
        }
        SystemKind::Slip => {
            let p = cfg.slip.params;
            let g = match guess {
                Some(s) => parse_guess(s, 2)?,
                None => {
                    let w2 = p.vertical.fixed_touchdown_velocity().unwrap_or(-1.0);
                    let b = p.beta(p.foreaft.xdot_star);
                    vec![(p.foreaft.xdot_star + b.sin() * w2) / b.cos(), w2]
                }
            };
            let s = certificate_settings(&cfg.integrator);
            find_fixed_point(
                |w: &[f64]| composed_slip_return_map([w[0], w[1]], &p, &s).map(|o| o.to_vec()),
                &g,
                tol,
                iters,
            )
        }
        SystemKind::Hir => {
            let g = guess.map(|s| parse_guess(s, 2)).transpose()?.unwrap_or(cfg.hir.init_a.to_vec());
            let p = cfg.attitude_params();
            let d = cfg.disturbance().delta_bar(0, &p);
            find_fixed_point(|a: &[f64]| Ok(hir_return_map([a[0], a[1]], d, &p).to_vec()), &g, tol, iters)
        }
        SystemKind::Monoped => {
            return Err(Failure::Config(
                "fixpoint supports vertical, mbhop, slip and hir; use the SLIP counterpart for the monoped".into(),
            ))
        }
    };
    Ok(r?)
}

fn cmd_fixpoint(common: &Common, guess: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let r = fixpoint(&cfg, guess)?;
    let _ = writeln!(out, "system: {}", cfg.system);
    let _ = writeln!(out, "x*: {}", list(&r.x_star));
    let _ = writeln!(out, "residual: {:e}", r.residual);
    let _ = writeln!(out, "iterations: {}", r.iterations);
    let _ = writeln!(out, "converged: {}", r.converged);
    if cfg.system == SystemKind::Mbhop {
        let p = &cfg.mbhop.params;
        let _ = writeln!(
            out,
            "beta: {:.12} gamma/2: {:.12}",
            raibert_touchdown_angle(r.x_star[0], p),
            sweep_angle(r.x_star[0], p) / 2.0
        );
    }
    let xs: Vec<String> = r.x_star.iter().map(|x| format!("{x:.15e}")).collect();
    let _ = writeln!(
        out,
        "fixpoint system={} converged={} iterations={} residual={:e} x={}",
        cfg.system,
        r.converged,
        r.iterations,
        r.residual,
        xs.join(",")
    );
    if r.converged {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("fixed point not within tolerance (residual {:e})", r.residual)))
    }
}

fn cmd_verify(common: &Common, which: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let props: Vec<u8> = match which {
        None | Some("all") => verify::PROPS.to_vec(),
        Some(s) => match s.parse::<u8>() {
            Ok(k) if verify::PROPS.contains(&k) => vec![k],
            _ => return Err(Failure::Config(format!("--prop must be 1..7 or all, got '{s}'"))),
        },
    };
    let rows = verify::check_props(&props, &cfg);
    let table = verify::format_table(&rows);
    let _ = write!(out, "{table}");
    if let Some(p) = &common.out {
        std::fs::write(p, &table).map_err(|e| io_failure(p, e))?;
    }
    let ok = verify::all_passed(&rows);
    let _ = writeln!(out, "{}", if ok { "verify: all checks passed" } else { "verify: FAILED" });
    if ok {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn cmd_sweep(common: &Common, param: &str, range: &str, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load(common)?;
    if common.out.is_none() {
        cfg.output.csv = PathBuf::from("sweep.csv");
    }
    let range = sweep::Range::parse(range)?;
    let workers = sweep::workers_from_env()?;
    let points = sweep::build_points(&cfg, param, &range)?;
    let rows = sweep::run(&points, workers);
    let key = sweep::qualify(&cfg, param);
    let mut buf = Vec::new();
    sweep::write_csv(&mut buf, &key, cfg.system, &rows).expect("writing to memory");
    let path = &cfg.output.csv;
    std::fs::write(path, &buf).map_err(|e| io_failure(path, e))?;
    let failed: Vec<&sweep::SweepRow> = rows.iter().filter(|r| r.metrics.is_err()).collect();
    let _ = writeln!(
        out,
        "sweep system={} param={key} points={} failed={} csv={}",
        cfg.system,
        rows.len(),
        failed.len(),
        path.display()
    );
    match failed.first() {
        None => Ok(()),
        Some(r) => Err(Failure::Numeric(format!(
            "{} point(s) failed; first at {key} = {}: {}",
            failed.len(),
            r.value,
            r.metrics.as_ref().err().map_or("", |s| s)
        ))),
    }
}
