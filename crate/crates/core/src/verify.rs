//! Proposition checks run by `tailhop verify`.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};

use crate::analysis::{eigenvalues_2x2, find_fixed_point, jury_test_2x2, numeric_jacobian, JuryVerdict};
use crate::config::RunConfig;
use crate::error::Result;
use crate::hir::{hir_simulate, triangle_bound, HirState};
use crate::hybrid::{execute, IntegratorSettings, Stop};
use crate::monoped::{apex_on_invariant_set, invariance_check};
use crate::slip::{certificate_settings, composed_slip_return_map, slip_composition_certificate};
use crate::templates::attitude::required_gain_bound;
use crate::templates::foreaft::{
    mbhop_jacobian_analytic, mbhop_map_with_angles, mbhop_return_map, neutral_angle, raibert_acceleration,
    raibert_acceleration_slope, sweep_angle,
};
use crate::templates::vertical::{vertical_return_map, vertical_stance_map};
use crate::templates::VerticalHopper;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// The proposition's hypotheses do not hold for this configuration.
    Skip,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub prop: u8,
    pub check: String,
    pub measured: String,
    pub required: String,
    pub status: Status,
    pub seconds: f64,
}

fn row(prop: u8, check: &str, measured: String, required: String, ok: bool) -> Row {
    Row {
        prop,
        check: check.into(),
        measured,
        required,
        status: Status::from_bool(ok),
        seconds: 0.0,
    }
}

pub const PROPS: [u8; 7] = [1, 2, 3, 4, 5, 6, 7];

/// Runs the checks for `prop`. Numerical errors become a single failing row.
pub fn check_prop(prop: u8, cfg: &RunConfig) -> Vec<Row> {
    let start = Instant::now();
    let res = match prop {
        1 => prop1(cfg),
        2 => prop2(cfg),
        3 => prop3(cfg),
        4 => prop4(cfg),
        5 => prop5(cfg),
        6 | 7 => invariance_rows(cfg).map(|r| r.into_iter().filter(|x| x.prop == prop).collect()),
        _ => Ok(vec![row(prop, "unknown proposition", "-".into(), "1..7".into(), false)]),
    };
    let mut rows = res.unwrap_or_else(|e| vec![row(prop, "numerical failure", e.to_string(), "no error".into(), false)]);
    let dt = start.elapsed().as_secs_f64();
    if let Some(first) = rows.first_mut() {
        first.seconds = dt;
    }
    rows
}

/// Runs several propositions; 6 and 7 share one simulation when both are asked for.
pub fn check_props(props: &[u8], cfg: &RunConfig) -> Vec<Row> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < props.len() {
        if props[i] == 6 && props.get(i + 1) == Some(&7) {
            let start = Instant::now();
            let mut rows = invariance_rows(cfg)
                .unwrap_or_else(|e| vec![row(6, "numerical failure", e.to_string(), "no error".into(), false)]);
            rows[0].seconds = start.elapsed().as_secs_f64();
            out.extend(rows);
            i += 2;
        } else {
            out.extend(check_prop(props[i], cfg));
            i += 1;
        }
    }
    out
}

pub fn all_passed(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.status != Status::Fail)
}

pub fn format_table(rows: &[Row]) -> String {
    let w_check = rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
    let w_meas = rows.iter().map(|r| r.measured.len()).max().unwrap_or(8).max(8);
    let w_req = rows.iter().map(|r| r.required.len()).max().unwrap_or(8).max(8);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4}  {:<w_check$}  {:<w_meas$}  {:<w_req$}  {:<6}  {:>8}",
        "prop", "check", "measured", "required", "status", "time_s"
    );
    for r in rows {
        let t = if r.seconds > 0.0 { format!("{:.3}", r.seconds) } else { String::new() };
        let _ = writeln!(
            s,
            "{:<4}  {:<w_check$}  {:<w_meas$}  {:<w_req$}  {:<6}  {:>8}",
            r.prop,
            r.check,
            r.measured,
            r.required,
            r.status.label(),
            t
        );
    }
    s
}

/// `‖x‖` at each touchdown of the two-mode vertical hopper, starting with the first.
pub fn vertical_touchdown_radii(cfg: &RunConfig, cycles: usize) -> Result<Vec<f64>> {
    let v = &cfg.vertical;
    let sys = VerticalHopper {
        params: v.params,
        gravity: v.gravity,
    };
    let x0 = [0.0, v.init_chidot / v.params.omega];
    let ex = execute(&sys, 0, &x0, Stop::Transitions(2 * cycles), &cfg.integrator)?;
    let mut r = vec![x0[0].hypot(x0[1])];
    r.extend(ex.entries_into(0).map(|t| t.post[0].hypot(t.post[1])));
    Ok(r)
}

fn prop1(cfg: &RunConfig) -> Result<Vec<Row>> {
    let p = &cfg.vertical.params;
    let Some(target) = p.limit_radius() else {
        return Ok(vec![Row {
            status: Status::Skip,
            ..row(1, "limit-cycle radius", "-".into(), "damping > 0 and k_t > 2 beta omega^2 eps".into(), true)
        }]);
    };
    let cycles = 20;
    let radii = vertical_touchdown_radii(cfg, cycles)?;
    let tol = 1e-3;
    let settled = radii.iter().rposition(|r| (r - target).abs() > tol).map_or(0, |i| i + 1);
    let last = *radii.last().unwrap_or(&f64::NAN);
    Ok(vec![
        row(
            1,
            "touchdown |x| after 20 cycles",
            format!("{last:.9}"),
            format!("{target:.6} +/- {tol:e}"),
            (last - target).abs() <= tol,
        ),
        row(
            1,
            "cycles until within tolerance",
            settled.to_string(),
            format!("<= {cycles}"),
            settled <= cycles && radii.len() == cycles + 1,
        ),
    ])
}

fn prop2(cfg: &RunConfig) -> Result<Vec<Row>> {
    let p = &cfg.vertical.params;
    let s = certificate_settings(&cfg.integrator);
    let Some(chidot_star) = p.fixed_touchdown_velocity() else {
        return Ok(vec![Row {
            status: Status::Skip,
            ..row(2, "velocity-gain fixed point", "-".into(), "a stance limit cycle".into(), true)
        }]);
    };
    let mut rows = Vec::new();
    for k0 in [0.8, 1.2] {
        let mut k = k0;
        let mut iters = None;
        for n in 1..=50 {
            k = vertical_return_map(k, p, &s)?;
            if (k - 1.0).abs() <= 1e-6 {
                iters = Some(n);
                break;
            }
        }
        rows.push(row(
            2,
            &format!("kappa iterates from {k0}"),
            iters.map_or(format!("|kappa-1| = {:.2e} after 50", (k - 1.0).abs()), |n| format!("within 1e-6 at n = {n}")),
            "within 1e-6 in <= 50".into(),
            iters.is_some(),
        ));
    }
    let h = cfg.analysis.map_fd_step;
    let slope = (vertical_return_map(1.0 + h, p, &s)? - vertical_return_map(1.0 - h, p, &s)?) / (2.0 * h);
    let hc = h * chidot_star.abs().max(1.0);
    let df1 = (vertical_stance_map(chidot_star + hc, p, &s)? - vertical_stance_map(chidot_star - hc, p, &s)?) / (2.0 * hc);
    rows.push(row(
        2,
        "return-map slope at kappa = 1",
        format!("{slope:.8}"),
        format!("-DF1 = {:.8} +/- 1e-4", -df1),
        (slope + df1).abs() <= 1e-4,
    ));
    Ok(rows)
}

/// Angle between the left eigenvector of `j` for eigenvalue 1 and `v`.
fn unit_left_eigvec_angle(j: &Matrix2<f64>, v: [f64; 2]) -> f64 {
    let a = (j - Matrix2::identity()).transpose();
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let u = Vector2::new(vt[(imin, 0)], vt[(imin, 1)]);
    let w = Vector2::new(v[0], v[1]);
    let c = (u.dot(&w) / (u.norm() * w.norm())).abs().min(1.0);
    let s = (u.perp(&w) / (u.norm() * w.norm())).abs();
    s.atan2(c)
}

/// Sign conditions of the stepping controller on a grid of `(ẋ, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaibertGridReport {
    pub points: usize,
    pub valid_points: usize,
    pub max_neutral_residual: f64,
    pub decreasing_violations: usize,
    pub increasing_violations: usize,
}

impl RaibertGridReport {
    pub fn pass(&self) -> bool {
        self.max_neutral_residual < 1e-10 && self.decreasing_violations == 0 && self.increasing_violations == 0
    }
}

/// `n × n` grid: `ẋ` within half of `ẋ*` (or 0.5) of the fixed point and
/// `β` within 0.3 rad of each column's neutral angle. A point is valid when
/// the touchdown and the next touchdown both descend.
pub fn raibert_grid(cfg: &RunConfig, n: usize) -> RaibertGridReport {
    let p = &cfg.mbhop.params;
    let v2 = cfg.mbhop.init_v[1].min(-1e-3);
    let half = (0.5 * p.xdot_star.abs()).max(0.25);
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
    let mut rep = RaibertGridReport {
        points: n * n,
        valid_points: 0,
        max_neutral_residual: 0.0,
        decreasing_violations: 0,
        increasing_violations: 0,
    };
    let mut prev_neutral = f64::NEG_INFINITY;
    for i in 0..n {
        let xd = lin(p.xdot_star - half, p.xdot_star + half, i);
        let v = [xd, v2];
        let b_star = neutral_angle(xd, p);
        rep.max_neutral_residual = rep.max_neutral_residual.max(raibert_acceleration(v, b_star, p).abs());
        if !(b_star > prev_neutral) {
            rep.increasing_violations += 1;
        }
        prev_neutral = b_star;
        let mut prev: Option<f64> = None;
        for j in 0..n {
            let beta = lin(b_star - 0.3, b_star + 0.3, j);
            let next = mbhop_map_with_angles(v, 1.0, beta, sweep_angle(xd, p));
            if !(v[1] < 0.0 && next[1] < 0.0) {
                prev = None;
                continue;
            }
            rep.valid_points += 1;
            let acc = raibert_acceleration(v, beta, p);
            let falling = raibert_acceleration_slope(v, beta, p) < 0.0 && prev.is_none_or(|a| acc < a);
            if !falling {
                rep.decreasing_violations += 1;
            }
            prev = Some(acc);
        }
    }
    rep
}

fn prop3(cfg: &RunConfig) -> Result<Vec<Row>> {
    let p = &cfg.mbhop.params;
    let map = |v: &[f64]| -> Result<Vec<f64>> { Ok(mbhop_return_map([v[0], v[1]], 1.0, p).to_vec()) };
    let fp = find_fixed_point(map, &cfg.mbhop.init_v, 1e-13, cfg.analysis.max_iter)?;
    let v_star = [fp.x_star[0], fp.x_star[1]];
    let jd = numeric_jacobian(map, &fp.x_star, cfg.analysis.fd_step)?;
    let j = Matrix2::new(jd[(0, 0)], jd[(0, 1)], jd[(1, 0)], jd[(1, 1)]);
    let ja = mbhop_jacobian_analytic(v_star, p);
    let entry_err = (j - ja).abs().max();
    let mut ev = eigenvalues_2x2(&j);
    ev.sort_by(|a, b| a.re.total_cmp(&b.re));
    let expected = [1.0 + 2.0 * p.k_p * v_star[1], 1.0];
    let mut exp_sorted = expected;
    exp_sorted.sort_by(f64::total_cmp);
    let ev_err = ev
        .iter()
        .zip(exp_sorted)
        .map(|(z, e)| (z - e).norm())
        .fold(0.0, f64::max);
    let angle = unit_left_eigvec_angle(&j, v_star);
    let jury = jury_test_2x2(&ja);
    let beta_gap = (crate::templates::foreaft::raibert_touchdown_angle(v_star[0], p) - sweep_angle(v_star[0], p) / 2.0).abs();
    let grid = raibert_grid(cfg, 50);
    Ok(vec![
        row(
            3,
            "fixed point is neutral (beta = gamma/2)",
            format!("v* = ({:.6}, {:.6}), gap {beta_gap:.1e}", v_star[0], v_star[1]),
            "gap < 1e-9".into(),
            fp.converged && beta_gap < 1e-9,
        ),
        row(3, "numeric vs closed-form Jacobian", format!("{entry_err:.2e}"), "<= 1e-6 entrywise".into(), entry_err <= 1e-6),
        row(
            3,
            "eigenvalues {1, 1 + 2 k_p v2*}",
            format!("{:.8}, {:.8} (err {ev_err:.1e})", ev[0].re, ev[1].re),
            format!("{:.8}, {:.8}", exp_sorted[0], exp_sorted[1]),
            ev_err <= 1e-6,
        ),
        row(3, "unit left eigenvector vs v*", format!("{angle:.2e} rad"), "<= 1e-6 rad".into(), angle <= 1e-6),
        row(
            3,
            "Jury verdict (quotient stable)",
            format!("{:?}; second eigenvalue {:.6}", jury.verdict, expected[0]),
            "Marginal with |1 + 2 k_p v2*| < 1".into(),
            jury.verdict == JuryVerdict::Marginal && expected[0].abs() < 1.0,
        ),
        row(
            3,
            "Raibert sign conditions, 50x50 grid",
            format!(
                "{} valid; neutral {:.1e}; violations {}+{}",
                grid.valid_points, grid.max_neutral_residual, grid.decreasing_violations, grid.increasing_violations
            ),
            "|acc(beta*)| < 1e-10, 0 violations".into(),
            grid.pass() && grid.valid_points > 0,
        ),
    ])
}

/// Distance to `w*` after each composed stride, starting from `w0`.
pub fn composed_convergence(cfg: &RunConfig, w_star: [f64; 2], w0: [f64; 2], strides: usize) -> Result<Vec<f64>> {
    let s = certificate_settings(&cfg.integrator);
    let mut w = w0;
    let dist = |w: [f64; 2]| (w[0] - w_star[0]).hypot(w[1] - w_star[1]);
    let mut out = vec![dist(w)];
    for _ in 0..strides {
        w = composed_slip_return_map(w, &cfg.slip.params, &s)?;
        out.push(dist(w));
    }
    Ok(out)
}

fn prop4(cfg: &RunConfig) -> Result<Vec<Row>> {
    let p = &cfg.slip.params;
    let r = slip_composition_certificate(p, &cfg.integrator)?;
    let coupling = 2.0 * p.foreaft.k_p * r.xi_bound;
    let hypotheses = r.eps_r >= 0.2 && r.coupling_ok;
    let mut rows = vec![
        row(4, "vertical margin eps_r", format!("{:.6}", r.eps_r), ">= 0.2".into(), r.eps_r >= 0.2),
        row(
            4,
            "coupling 2 k_p Xi",
            format!("{coupling:.6}"),
            format!("< eps_r = {:.6}", r.eps_r),
            r.coupling_ok,
        ),
    ];
    if !hypotheses {
        for x in &mut rows {
            if x.status == Status::Fail {
                x.status = Status::Skip;
            }
        }
    }
    rows.push(row(
        4,
        "Jury test on composed Jacobian",
        format!("{:?}; det {:.6}, tr {:.6}", r.jury.verdict, r.det, r.trace),
        "Stable".into(),
        r.pass,
    ));
    rows.push(row(
        4,
        "rank-one determinant vs numeric",
        format!("{:.2e}", (r.analytic_det - r.det).abs()),
        "<= 1e-5".into(),
        (r.analytic_det - r.det).abs() <= 1e-5,
    ));
    let w0 = [1.05 * r.w_star[0], 1.05 * r.w_star[1]];
    let d = composed_convergence(cfg, r.w_star, w0, 30)?;
    let ratio = d[30] / d[0];
    rows.push(row(
        4,
        "5% perturbation after 30 strides",
        format!("ratio {ratio:.3e}"),
        "<= 0.1".into(),
        ratio <= 0.1,
    ));
    Ok(rows)
}

fn prop5(cfg: &RunConfig) -> Result<Vec<Row>> {
    let p = cfg.attitude_params();
    let bound = required_gain_bound(&p);
    let mut rows = Vec::new();
    if let Some(t) = cfg.hir.transition_time {
        let q = crate::templates::AttitudeParams {
            omega_a: std::f64::consts::PI / t,
            ..p
        };
        let b = required_gain_bound(&q);
        rows.push(Row {
            status: if p.k >= b { Status::Pass } else { Status::Skip },
            ..row(5, "bound at shortest transition time", format!("k = {:.4}", p.k), format!(">= {b:.4} (reported only)"), true)
        });
    }
    if p.k < bound {
        rows.push(Row {
            status: Status::Skip,
            ..row(
                5,
                "gain hypothesis not met",
                format!("k = {:.4}", p.k),
                format!(">= {bound:.4}"),
                true,
            )
        });
        return Ok(rows);
    }
    let z = p.zeta();
    let init = HirState::on_graph(cfg.hir.init_a, &p);
    let a0 = cfg.hir.init_a[0].hypot(cfg.hir.init_a[1]);
    let budget = if a0 <= p.eps_a {
        2
    } else {
        ((p.eps_a / a0).ln() / z.abs().ln()).ceil() as usize + 2
    };
    let horizon = budget + 10;
    let traj = hir_simulate(&init, &p, &cfg.disturbance(), horizon, &cfg.integrator)?;
    let norms: Vec<f64> = traj.iter().map(|a| a[0].hypot(a[1])).collect();
    let entered = norms.iter().rposition(|x| *x > p.eps_a).map_or(0, |i| i + 1);
    let violations = norms
        .iter()
        .enumerate()
        .filter(|(n, x)| **x > triangle_bound(*n, a0, &p))
        .count();
    rows.push(row(
        5,
        "gain k vs bound",
        format!("k = {:.4}, zeta = {z:.4}", p.k),
        format!(">= {bound:.4}"),
        true,
    ));
    rows.push(row(
        5,
        "strides to enter and stay in eps_a ball",
        format!("{entered} (final |a| = {:.2e})", norms.last().copied().unwrap_or(f64::NAN)),
        format!("<= {budget}"),
        entered <= budget && norms.len() == horizon + 1,
    ));
    rows.push(row(
        5,
        "triangle bound violations",
        format!("{violations} of {}", norms.len()),
        "0".into(),
        violations == 0,
    ));
    Ok(rows)
}

fn invariance_rows(cfg: &RunConfig) -> Result<Vec<Row>> {
    let inv = &cfg.invariance;
    let p = cfg.invariance_params();
    let init = apex_on_invariant_set(inv.apex_height, inv.apex_xdot, &p);
    let settings = IntegratorSettings {
        method: crate::hybrid::Method::Rk4 { step: inv.step },
        ..cfg.integrator
    };
    let r = invariance_check(&init, &p, inv.strides, &settings)?;
    let reg = p.regime();
    Ok(vec![
        row(
            6,
            "attitude stays on U",
            format!("{:.2e} (m_t/m_b {:.0e}, i_t/i_b {:.0e})", r.max_attitude_deviation, reg.mass_ratio, reg.inertia_ratio),
            format!("<= {:e}", inv.tolerance),
            r.max_attitude_deviation <= inv.tolerance,
        ),
        row(
            7,
            "SLIP projection vs standalone SLIP",
            format!("{:.2e} over {} strides", r.slip_projection_error, r.strides),
            format!("<= {:e}", inv.tolerance),
            r.slip_projection_error <= inv.tolerance,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_gain_is_skipped() {
        let mut cfg = RunConfig::default();
        cfg.hir.gain_margin = 0.5;
        let rows = check_prop(5, &cfg);
        assert!(rows.iter().any(|r| r.status == Status::Skip));
        assert!(all_passed(&rows));
    }

    #[test]
    fn unknown_prop_fails() {
        assert!(!all_passed(&check_prop(9, &RunConfig::default())));
    }

    #[test]
    fn table_has_a_line_per_row() {
        let rows = check_prop(3, &RunConfig::default());
        assert_eq!(format_table(&rows).lines().count(), rows.len() + 1);
    }

    #[test]
    fn left_eigvec_angle_examples() {
        let j = Matrix2::new(0.8, 0.0, -0.1, 1.0);
        assert!(unit_left_eigvec_angle(&j, [0.5, -1.0]) < 1e-12);
        assert!((unit_left_eigvec_angle(&j, [1.0, 0.0]) - (2.0f64).atan()).abs() < 1e-12);
    }
}
