//! Single-step Runge-Kutta kernels used inside a hybrid mode.

use super::HybridSystem;

/// How a mode's flow is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with local extrapolation and a max-norm error test.
    DormandPrince {
        rtol: f64,
        atol: f64,
        initial_step: f64,
        max_step: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub method: Method,
    /// Bound on `|guard|` at a located event.
    pub event_tolerance: f64,
    /// Bisection iterations allowed when locating an event, and rejected
    /// steps allowed in a row before the adaptive controller gives up.
    pub max_step_halvings: u32,
    /// Longest time a single mode may run when an execution waits for a transition.
    pub max_segment_time: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince {
                rtol: 1e-9,
                atol: 1e-12,
                initial_step: 1e-4,
                max_step: 1e-2,
            },
            event_tolerance: 1e-10,
            max_step_halvings: 200,
            max_segment_time: 100.0,
        }
    }
}

impl IntegratorSettings {
    pub fn rk4(step: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            ..Self::default()
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        let mut s = Self::default();
        if let Method::DormandPrince { initial_step, max_step, .. } = s.method {
            s.method = Method::DormandPrince {
                rtol,
                atol,
                initial_step,
                max_step,
            };
        }
        s
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be a positive finite number, got {v}"))
            }
        };
        match self.method {
            Method::Rk4 { step } => positive("step", step)?,
            Method::DormandPrince {
                rtol,
                atol,
                initial_step,
                max_step,
            } => {
                positive("rtol", rtol)?;
                positive("atol", atol)?;
                positive("initial_step", initial_step)?;
                if !(max_step > 0.0) {
                    return Err(format!("max_step must be positive, got {max_step}"));
                }
            }
        }
        positive("event_tolerance", self.event_tolerance)?;
        positive("max_segment_time", self.max_segment_time)?;
        if self.max_step_halvings == 0 {
            return Err("max_step_halvings must be at least 1".into());
        }
        Ok(())
    }
}

fn axpy(out: &mut [f64], x: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..x.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = x[i] + h * acc;
    }
}

pub(crate) fn rk4_step<S: HybridSystem + ?Sized>(
    sys: &S,
    mode: usize,
    t: f64,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.field(mode, t, x, &mut k1);
    axpy(&mut tmp, x, 0.5 * h, &[(1.0, &k1)]);
    sys.field(mode, t + 0.5 * h, &tmp, &mut k2);
    axpy(&mut tmp, x, 0.5 * h, &[(1.0, &k2)]);
    sys.field(mode, t + 0.5 * h, &tmp, &mut k3);
    axpy(&mut tmp, x, h, &[(1.0, &k3)]);
    sys.field(mode, t + h, &tmp, &mut k4);
    let mut y = vec![0.0; n];
    axpy(
        &mut y,
        x,
        h / 6.0,
        &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
    );
    sys.project(mode, &mut y);
    y
}

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step. Returns the fifth-order solution and the
/// max-norm of the embedded error scaled by `atol + rtol * |y|`.
pub(crate) fn dopri_step<S: HybridSystem + ?Sized>(
    sys: &S,
    mode: usize,
    t: f64,
    x: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut k = [
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    let mut tmp = vec![0.0; n];
    sys.field(mode, t, x, &mut k[0]);
    axpy(&mut tmp, x, h, &[(A21, &k[0])]);
    sys.field(mode, t + C2 * h, &tmp, &mut k[1]);
    axpy(&mut tmp, x, h, &[(A31, &k[0]), (A32, &k[1])]);
    sys.field(mode, t + C3 * h, &tmp, &mut k[2]);
    axpy(&mut tmp, x, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
    sys.field(mode, t + C4 * h, &tmp, &mut k[3]);
    axpy(
        &mut tmp,
        x,
        h,
        &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])],
    );
    sys.field(mode, t + C5 * h, &tmp, &mut k[4]);
    axpy(
        &mut tmp,
        x,
        h,
        &[
            (A61, &k[0]),
            (A62, &k[1]),
            (A63, &k[2]),
            (A64, &k[3]),
            (A65, &k[4]),
        ],
    );
    sys.field(mode, t + h, &tmp, &mut k[5]);
    let mut y = vec![0.0; n];
    axpy(
        &mut y,
        x,
        h,
        &[(B1, &k[0]), (B3, &k[2]), (B4, &k[3]), (B5, &k[4]), (B6, &k[5])],
    );
    sys.field(mode, t + h, &y, &mut k[6]);

    let mut err = 0.0f64;
    for i in 0..n {
        let e = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i]);
        let scale = atol + rtol * x[i].abs().max(y[i].abs());
        let r = (e / scale).abs();
        err = if r.is_nan() || !y[i].is_finite() { f64::INFINITY } else { err.max(r) };
    }
    sys.project(mode, &mut y);
    (y, err)
}
