//! Dormand-Prince 5(4) stepping core, generic over the state dimension.
//!
//! One driver serves both the phase-space integrator (n = 3) and the
//! variational/monodromy integration (n = 13). Error control is the
//! classic PI controller; dense output is the standard quartic interpolant
//! of the pair.

use super::{IntegrateError, IntegratorConfig};

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Error coefficients: (5th order weights) - (embedded 4th order weights).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA_PI: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA_PI * 0.75;
const FAC_MIN: f64 = 0.2; // largest step shrink factor is 1/FAC_MIN... inverse below
const FAC_MAX: f64 = 10.0;

/// One accepted step handed to the caller.
pub(crate) struct AcceptedStep<'a, const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y1: &'a [f64; N],
    /// Dense coefficients; zeroed when dense output was not requested.
    pub cont: &'a [[f64; N]; 5],
}

pub(crate) enum StepFlow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DriveOutcome {
    Reached,
    Stopped,
    Diverged { t: f64 },
}

fn inf_norm<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Adaptive integration of the autonomous system `y' = f(y)` from t = 0 to
/// `t_end > 0`. Calls `on_accept` after every accepted step; the callback
/// may stop the run early. `divergence_norm`, when set, terminates the run
/// cleanly once the state's infinity norm exceeds it.
pub(crate) fn drive<const N: usize>(
    f: &mut dyn FnMut(&[f64; N]) -> [f64; N],
    y_init: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
    want_dense: bool,
    divergence_norm: Option<f64>,
    on_accept: &mut dyn FnMut(AcceptedStep<'_, N>) -> StepFlow,
) -> Result<DriveOutcome, IntegrateError> {
    cfg.validate()?;
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(IntegrateError::InvalidConfig("t_end must be positive and finite"));
    }
    if !y_init.iter().all(|v| v.is_finite()) {
        return Err(IntegrateError::NonFiniteState { t: 0.0 });
    }

    let initial_scale = inf_norm(&y_init).max(1.0);
    let mut t = 0.0f64;
    let mut y = y_init;
    let mut k1 = f(&y);
    let mut h = cfg.h_init.min(cfg.h_max).min(t_end);
    let mut facold = 1e-4f64;
    let mut rejected = false;
    let mut steps = 0usize;
    let mut k = [[0.0f64; N]; 7];
    let mut cont = [[0.0f64; N]; 5];

    loop {
        if steps >= cfg.max_steps {
            return Err(IntegrateError::StepBudgetExhausted { t });
        }
        steps += 1;

        if h <= 100.0 * f64::EPSILON * t.abs().max(1.0) {
            // step underflow: a blow-up signal when the state has already
            // grown, genuine stiffness otherwise
            if inf_norm(&y) > 100.0 * initial_scale {
                return Ok(DriveOutcome::Diverged { t });
            }
            return Err(IntegrateError::StepUnderflow { t });
        }

        let mut last = false;
        if t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }

        // stages 2..6
        k[0] = k1;
        for s in 1..6 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j] * h;
                for i in 0..N {
                    ys[i] += a * kj[i];
                }
            }
            k[s] = f(&ys);
        }
        // 5th order solution, then the FSAL stage at (t + h, y1)
        let mut y1 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[6][j] * h;
            for i in 0..N {
                y1[i] += a * kj[i];
            }
        }
        k[6] = f(&y1);

        // weighted RMS error norm
        let mut err_sq = 0.0f64;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let mut err = (err_sq / N as f64).sqrt();
        if !err.is_finite() || !y1.iter().all(|v| v.is_finite()) {
            err = 1e10;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            // accepted
            if want_dense {
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k[6][i] - bspl;
                    cont[4][i] = h
                        * (D[0] * k[0][i]
                            + D[2] * k[2][i]
                            + D[3] * k[3][i]
                            + D[4] * k[4][i]
                            + D[5] * k[5][i]
                            + D[6] * k[6][i]);
                }
            }
            let t1 = if last { t_end } else { t + h };
            let flow = on_accept(AcceptedStep { t0: t, t1, y1: &y1, cont: &cont });
            t = t1;
            y = y1;
            k1 = k[6];
            if matches!(flow, StepFlow::Stop) {
                return Ok(DriveOutcome::Stopped);
            }
            if let Some(bound) = divergence_norm {
                if inf_norm(&y) > bound {
                    return Ok(DriveOutcome::Diverged { t });
                }
            }
            if last {
                return Ok(DriveOutcome::Reached);
            }
            let mut fac = (fac11 / facold.powf(BETA_PI)) / SAFE;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            facold = err.max(1e-4);
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            rejected = false;
            h = h_new.min(cfg.h_max);
        } else {
            // rejected
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            rejected = true;
        }
    }
}
