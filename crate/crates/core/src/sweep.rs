//! One-parameter sweeps over a run configuration.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{find_fixed_point, numeric_jacobian, spectral_radius};
use crate::config::{ConfigError, RunConfig, SystemKind};
use crate::error::Result;
use crate::hir::{hir_simulate, HirState};
use crate::monoped::{apex_on_invariant_set, body_from_state, monoped_execute};
use crate::slip::{slip_composition_certificate, slip_full_execute, SlipSystem};
use crate::templates::foreaft::mbhop_return_map;
use crate::templates::vertical::velocity_gain_inverse;
use crate::verify::vertical_touchdown_radii;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "TAILHOP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Range {
    /// Parses `a:b:n`.
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError {
            line: None,
            message: format!("range must be a:b:n with n >= 1, got '{s}'"),
        };
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(bad());
        };
        let start: f64 = a.trim().parse().map_err(|_| bad())?;
        let end: f64 = b.trim().parse().map_err(|_| bad())?;
        let count: usize = n.trim().parse().map_err(|_| bad())?;
        if count == 0 || !start.is_finite() || !end.is_finite() {
            return Err(bad());
        }
        Ok(Self { start, end, count })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// Metric columns written for each system.
pub fn metric_names(system: SystemKind) -> &'static [&'static str] {
    match system {
        SystemKind::Vertical => &["radius", "closed_form_radius", "simulated_radius"],
        SystemKind::Slip => &["spectral_radius", "det", "trace", "final_dx", "final_dz"],
        SystemKind::Mbhop => &["spectral_radius", "v1_star", "v2_star"],
        SystemKind::Hir => &["abs_zeta", "final_norm"],
        SystemKind::Monoped => &["final_dx", "final_dz", "max_abs_phi1"],
    }
}

/// Fully qualified config key for a sweep parameter.
pub fn qualify(cfg: &RunConfig, param: &str) -> String {
    if param.contains('.') {
        param.to_string()
    } else {
        format!("{}.{param}", cfg.primary_section())
    }
}

/// One configuration per value, each validated.
pub fn build_points(cfg: &RunConfig, param: &str, range: &Range) -> Result<Vec<(f64, RunConfig)>, ConfigError> {
    let key = qualify(cfg, param);
    range
        .values()
        .into_iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(&key, &format!("{v:?}"))?;
            c.validate().map_err(|e| ConfigError {
                message: format!("{key} = {v}: {}", e.message),
                ..e
            })?;
            Ok((v, c))
        })
        .collect()
}

fn jitter(cfg: &mut RunConfig, index: usize) {
    if cfg.sweep_jitter == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let j = cfg.sweep_jitter;
    let mut f = |x: &mut f64| *x *= 1.0 + j * rng.gen_range(-1.0..1.0);
    f(&mut cfg.vertical.init_chidot);
    f(&mut cfg.mbhop.init_v[0]);
    f(&mut cfg.mbhop.init_v[1]);
    f(&mut cfg.slip.apex_height);
    f(&mut cfg.slip.apex_xdot);
    f(&mut cfg.hir.init_a[0]);
    f(&mut cfg.hir.init_a[1]);
    f(&mut cfg.monoped.apex_height);
    f(&mut cfg.monoped.apex_xdot);
}

/// Metrics for one configuration, in the order of [`metric_names`].
pub fn evaluate(cfg: &RunConfig) -> Result<Vec<f64>> {
    let n = cfg.strides;
    match cfg.system {
        SystemKind::Vertical => {
            let p = &cfg.vertical.params;
            let radius = velocity_gain_inverse(1.0, p, &cfg.integrator)?.abs() / p.omega;
            let closed = p.limit_radius().unwrap_or(f64::NAN);
            let sim = *vertical_touchdown_radii(cfg, n)?.last().unwrap_or(&f64::NAN);
            Ok(vec![radius, closed, sim])
        }
        SystemKind::Slip => {
            let p = &cfg.slip.params;
            let r = slip_composition_certificate(p, &cfg.integrator)?;
            let jd = DMatrix::from_iterator(2, 2, r.jacobian.iter().copied());
            let sys = SlipSystem::new(*p);
            let init = sys.flight_state(0.0, cfg.slip.apex_height, cfg.slip.apex_xdot, 0.0);
            let ex = slip_full_execute(&init, p, n, &cfg.integrator)?;
            let last = ex.entries_into(crate::slip::STANCE).last().map(|t| t.pre.clone()).unwrap_or(init);
            Ok(vec![spectral_radius(&jd), r.det, r.trace, last[crate::slip::DX], last[crate::slip::DZ]])
        }
        SystemKind::Mbhop => {
            let p = &cfg.mbhop.params;
            let kappa = cfg.mbhop.kappa;
            let map = |v: &[f64]| -> Result<Vec<f64>> { Ok(mbhop_return_map([v[0], v[1]], kappa, p).to_vec()) };
            let fp = find_fixed_point(map, &cfg.mbhop.init_v, cfg.analysis.fixpoint_tol, cfg.analysis.max_iter)?;
            let j = numeric_jacobian(map, &fp.x_star, cfg.analysis.fd_step)?;
            Ok(vec![spectral_radius(&j), fp.x_star[0], fp.x_star[1]])
        }
        SystemKind::Hir => {
            let p = cfg.attitude_params();
            let init = HirState::on_graph(cfg.hir.init_a, &p);
            let traj = hir_simulate(&init, &p, &cfg.disturbance(), n, &cfg.integrator)?;
            let a = traj.last().copied().unwrap_or([f64::NAN; 2]);
            Ok(vec![p.zeta().abs(), a[0].hypot(a[1])])
        }
        SystemKind::Monoped => {
            let p = cfg.body_params();
            let init = apex_on_invariant_set(cfg.monoped.apex_height, cfg.monoped.apex_xdot, &p);
            let ex = monoped_execute(&init, &p, n, &cfg.integrator)?;
            let mut phi = 0.0f64;
            for seg in &ex.segments {
                for y in &seg.states {
                    phi = phi.max(body_from_state(y, &p)?.phi1.abs());
                }
            }
            let last = ex
                .entries_into(crate::monoped::STANCE)
                .last()
                .map(|t| t.pre.clone())
                .unwrap_or_else(|| ex.final_state.clone());
            Ok(vec![last[crate::monoped::DX], last[crate::monoped::DZ], phi])
        }
    }
}

/// Thread count from [`WORKERS_ENV`], or `None` for the rayon default.
pub fn workers_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ConfigError {
                line: None,
                message: format!("{WORKERS_ENV} must be a positive integer, got '{s}'"),
            }),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// `Err` holds the message of a numerical failure at this point.
    pub metrics: std::result::Result<Vec<f64>, String>,
}

/// Evaluates every point on `workers` threads. Rows follow the input order.
pub fn run(points: &[(f64, RunConfig)], workers: Option<usize>) -> Vec<SweepRow> {
    let work = || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, (v, c))| {
                let mut c = c.clone();
                jitter(&mut c, i);
                SweepRow {
                    value: *v,
                    metrics: evaluate(&c).map_err(|e| e.to_string()),
                }
            })
            .collect()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

pub fn write_csv<W: Write>(out: &mut W, param: &str, system: SystemKind, rows: &[SweepRow]) -> std::io::Result<()> {
    let names = metric_names(system);
    writeln!(out, "{param},{},ok", names.join(","))?;
    for r in rows {
        write!(out, "{:.12e}", r.value)?;
        match &r.metrics {
            Ok(m) => {
                for x in m {
                    write!(out, ",{x:.12e}")?;
                }
                writeln!(out, ",1")?;
            }
            Err(_) => {
                for _ in names {
                    write!(out, ",nan")?;
                }
                writeln!(out, ",0")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(Range::parse("0.5:4:8").unwrap().values().len(), 8);
        assert_eq!(Range::parse("2:9:1").unwrap().values(), vec![2.0]);
        let v = Range::parse("0:1:3").unwrap().values();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        for bad in ["1:2", "1:2:0", "a:2:3", "1:2:3:4", "1:inf:2"] {
            assert!(Range::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bare_names_use_the_system_section() {
        let mut c = RunConfig::default();
        assert_eq!(qualify(&c, "k_t"), "vertical.k_t");
        c.system = SystemKind::Slip;
        assert_eq!(qualify(&c, "k_p"), "slip.k_p");
        assert_eq!(qualify(&c, "hir.eps_a"), "hir.eps_a");
    }

    #[test]
    fn invalid_point_is_a_config_error() {
        let c = RunConfig::default();
        assert!(build_points(&c, "omega", &Range::parse("-1:1:3").unwrap()).is_err());
        assert!(build_points(&c, "nope", &Range::parse("0:1:2").unwrap()).is_err());
    }

    #[test]
    fn radius_grows_with_pump_gain() {
        let c = RunConfig::default();
        let pts = build_points(&c, "k_t", &Range::parse("0.5:4:6").unwrap()).unwrap();
        let rows = run(&pts, Some(2));
        let r: Vec<f64> = rows.iter().map(|r| r.metrics.as_ref().unwrap()[0]).collect();
        assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
        for (row, (_, cfg)) in rows.iter().zip(&pts) {
            let m = row.metrics.as_ref().unwrap();
            assert!((m[0] - cfg.vertical.params.limit_radius().unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let c = RunConfig {
            system: SystemKind::Mbhop,
            sweep_jitter: 0.1,
            ..RunConfig::default()
        };
        let pts = build_points(&c, "k_p", &Range::parse("0.01:0.2:7").unwrap()).unwrap();
        assert_eq!(run(&pts, Some(1)), run(&pts, Some(4)));
    }
}
