//! Fixed points, finite-difference Jacobians, 2×2 spectra and the Jury test.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Cube root of machine epsilon, the usual central-difference step.
pub const DEFAULT_FD_STEP: f64 = 6.055_454_452_393_343e-6;

/// Tolerance on the Jury inequalities below which a case counts as marginal.
pub const MARGINAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub x_star: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Central-difference Jacobian. Coordinate `j` is perturbed by
/// `rel_step * max(|x_j|, 1)`.
pub fn numeric_jacobian<F>(map: F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut m = 0;
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = map(&xp)?;
        let fm = map(&xm)?;
        m = fp.len();
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    Ok(DMatrix::from_fn(m, n, |i, j| cols[j][i]))
}

/// Newton's method on `map(x) - x`.
///
/// The linear step is solved with a pseudo-inverse so that maps with a
/// one-parameter family of fixed points are handled. A step that fails to
/// reduce the residual is halved; when halving does not help, a damped
/// fixed-point update `x + (map(x) - x) / 2` is tried instead.
pub fn find_fixed_point<F>(map: F, guess: &[f64], tol: f64, max_iter: usize) -> Result<FixedPointResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let eval = |x: &[f64]| -> Option<(Vec<f64>, f64)> {
        let fx = map(x).ok()?;
        let r: Vec<f64> = fx.iter().zip(x).map(|(a, b)| a - b).collect();
        let n = inf_norm(&r);
        n.is_finite().then_some((r, n))
    };
    let mut x = guess.to_vec();
    let Some((mut r, mut res)) = eval(&x) else {
        return Err(Error::MaxIterations {
            iterations: 0,
            residual: f64::INFINITY,
        });
    };
    let n = x.len();
    for it in 0..max_iter {
        if res <= tol {
            return Ok(FixedPointResult {
                x_star: x,
                residual: res,
                iterations: it,
                converged: true,
            });
        }
        let jac = numeric_jacobian(&map, &x, DEFAULT_FD_STEP).ok();
        let mut accepted = None;
        if let Some(jac) = jac {
            let a = jac - DMatrix::<f64>::identity(n, n);
            let rhs = -DVector::from_column_slice(&r);
            let eps = 1e-12 * a.norm().max(1.0);
            if let Ok(step) = a.svd(true, true).solve(&rhs, eps) {
                let mut alpha = 1.0;
                for _ in 0..30 {
                    let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
                    if let Some((rt, nt)) = eval(&trial) {
                        if nt < res {
                            accepted = Some((trial, rt, nt));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
            }
        }
        if accepted.is_none() {
            let trial: Vec<f64> = x.iter().zip(&r).map(|(a, d)| a + 0.5 * d).collect();
            if let Some((rt, nt)) = eval(&trial) {
                if nt < res {
                    accepted = Some((trial, rt, nt));
                }
            }
        }
        let Some((xn, rn, nn)) = accepted else {
            return Err(Error::MaxIterations {
                iterations: it + 1,
                residual: res,
            });
        };
        x = xn;
        r = rn;
        res = nn;
    }
    if res <= tol {
        return Ok(FixedPointResult {
            x_star: x,
            residual: res,
            iterations: max_iter,
            converged: true,
        });
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual: res,
    })
}

/// Roots of `λ² - tr λ + det`.
pub fn eigenvalues_2x2(m: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = Complex64::new(tr * tr - 4.0 * det, 0.0).sqrt();
    let half = Complex64::new(0.5 * tr, 0.0);
    [half + 0.5 * disc, half - 0.5 * disc]
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 && m.ncols() == 2 {
        let m2 = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        return eigenvalues_2x2(&m2).iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JuryVerdict {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuryReport {
    pub verdict: JuryVerdict,
    pub det: f64,
    pub trace: f64,
    /// det < 1
    pub det_below_one: bool,
    /// det > tr - 1
    pub det_above_tr_minus_one: bool,
    /// det > -tr - 1
    pub det_above_neg_tr_minus_one: bool,
}

/// Schur–Cohn/Jury conditions for both eigenvalues of a 2×2 matrix inside the unit disk.
pub fn jury_test_2x2(m: &Matrix2<f64>) -> JuryReport {
    let det = m.determinant();
    let trace = m.trace();
    let margins = [1.0 - det, det - trace + 1.0, det + trace + 1.0];
    let verdict = if margins.iter().all(|&g| g > MARGINAL_TOL) {
        JuryVerdict::Stable
    } else if margins.iter().any(|&g| g < -MARGINAL_TOL) {
        JuryVerdict::Unstable
    } else {
        JuryVerdict::Marginal
    };
    JuryReport {
        verdict,
        det,
        trace,
        det_below_one: margins[0] > 0.0,
        det_above_tr_minus_one: margins[1] > 0.0,
        det_above_neg_tr_minus_one: margins[2] > 0.0,
    }
}

/// Illinois false position on a sign-changing bracket `[a, b]`.
/// Stops when the bracket or `|f|` falls below `tol`.
pub fn bracketed_root<F>(f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InversionFailure(format!(
            "no sign change on [{a}, {b}]"
        )));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c)?;
        if fc.abs() <= tol || (b - a).abs() <= tol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::InversionFailure(format!(
        "root not isolated after {max_iter} iterations"
    )))
}
