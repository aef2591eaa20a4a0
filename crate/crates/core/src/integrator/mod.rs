//! Adaptive explicit Runge-Kutta integration with dense output, invariant
//! monitoring and hyperplane-crossing event detection.

mod dopri5;

pub(crate) use dopri5::{drive, AcceptedStep, DriveOutcome, StepFlow};

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{ScalarField, VectorFieldHandle};
use crate::linalg::Vec3;

/// States whose infinity norm exceeds this are treated as escaped to
/// infinity and the run is labeled diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("step budget exhausted at t = {t}")]
    StepBudgetExhausted { t: f64 },
    #[error("step size underflow at t = {t} (stiffness or unresolved blow-up)")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("no section crossing before t = {t_max} (stopped at t = {t_reached})")]
    NoCrossing { t_max: f64, t_reached: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Relative tolerance, at most 1e-3.
    pub rtol: f64,
    /// Absolute tolerance.
    pub atol: f64,
    /// Initial step size; also sets the event guard time `10 * h_init`.
    pub h_init: f64,
    /// Step size ceiling.
    pub h_max: f64,
    /// Trial-step budget per run.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.25,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegratorConfig { rtol, atol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if self.rtol.is_nan() || self.rtol <= 0.0 || self.rtol > 1e-3 {
            return Err(IntegrateError::InvalidConfig("rtol must lie in (0, 1e-3]"));
        }
        if !self.atol.is_finite() || self.atol <= 0.0 {
            return Err(IntegrateError::InvalidConfig("atol must be positive"));
        }
        if !self.h_init.is_finite() || self.h_init <= 0.0 {
            return Err(IntegrateError::InvalidConfig("h_init must be positive"));
        }
        if self.h_max.is_nan() || self.h_max < self.h_init {
            return Err(IntegrateError::InvalidConfig("h_max must be at least h_init"));
        }
        if self.max_steps == 0 {
            return Err(IntegrateError::InvalidConfig("max_steps must be positive"));
        }
        Ok(())
    }
}

/// One stored trajectory point with the monitored invariants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Vec3,
    pub energy: f64,
    pub casimir: f64,
}

/// Dense-output coefficients of one accepted step, valid on `[t0, t0 + dt]`.
#[derive(Clone, Copy, Debug)]
pub struct DenseSegment {
    pub t0: f64,
    pub dt: f64,
    cont: [Vec3; 5],
    y_end: Vec3,
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.dt
    }

    /// Interpolant at normalized position `theta` in [0, 1]; the endpoints
    /// reproduce the stored mesh states exactly.
    pub fn eval_theta(&self, theta: f64) -> Vec3 {
        if theta <= 0.0 {
            return self.cont[0];
        }
        if theta >= 1.0 {
            return self.y_end;
        }
        let th1 = 1.0 - theta;
        self.cont[0]
            + theta
                * (self.cont[1]
                    + th1 * (self.cont[2] + theta * (self.cont[3] + th1 * self.cont[4])))
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        self.eval_theta((t - self.t0) / self.dt)
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// The state escaped past [`DIVERGENCE_NORM`] (or blew up faster than
    /// the step size could resolve) at time `t`.
    Diverged { t: f64 },
}

/// An integration result: samples at accepted steps, dense output in
/// between, and how the run ended.
#[derive(Clone, Debug)]
pub struct Trajectory {
    samples: Vec<Sample>,
    segments: Vec<DenseSegment>,
    termination: Termination,
}

impl Trajectory {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn segments(&self) -> &[DenseSegment] {
        &self.segments
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn start_time(&self) -> f64 {
        self.first().t
    }

    pub fn end_time(&self) -> f64 {
        self.last().t
    }

    /// Dense-output state at time `t`, clamped to the covered span.
    /// At stored sample times this returns the stored state exactly.
    pub fn eval(&self, t: f64) -> Vec3 {
        if self.segments.is_empty() || t <= self.start_time() {
            return self.first().state;
        }
        if t >= self.end_time() {
            return self.last().state;
        }
        let idx = match self
            .segments
            .binary_search_by(|seg| seg.t0.partial_cmp(&t).expect("finite times"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.segments[idx].eval(t)
    }

    /// Trajectory CSV with header `t,x,y,z,H,C`, 17 significant digits.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y,z,H,C")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_g17(s.t),
                fmt_g17(s.state.x),
                fmt_g17(s.state.y),
                fmt_g17(s.state.z),
                fmt_g17(s.energy),
                fmt_g17(s.casimir)
            )?;
        }
        Ok(())
    }
}

/// Decimal scientific with 17 significant digits.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// A directed hyperplane crossing to watch for.
#[derive(Clone, Copy, Debug)]
pub struct EventSpec {
    pub anchor: Vec3,
    pub normal: Vec3,
    pub direction: CrossingDirection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingDirection {
    /// The section function crosses from negative to positive.
    Positive,
    Negative,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventCrossing {
    pub t: f64,
    pub state: Vec3,
}

fn sample_of(field: &VectorFieldHandle, t: f64, state: Vec3) -> Sample {
    let ctx = field.context();
    Sample {
        t,
        state,
        energy: ctx.hamiltonian(state),
        casimir: ctx.casimir(state),
    }
}

fn segment_of(step: &AcceptedStep<'_, 3>) -> DenseSegment {
    DenseSegment {
        t0: step.t0,
        dt: step.t1 - step.t0,
        cont: [
            Vec3::from_array(step.cont[0]),
            Vec3::from_array(step.cont[1]),
            Vec3::from_array(step.cont[2]),
            Vec3::from_array(step.cont[3]),
            Vec3::from_array(step.cont[4]),
        ],
        y_end: Vec3::from_array(*step.y1),
    }
}

/// Integrates `field` from `u0` over `[0, t_end]`, recording the state and
/// both monitored invariants at every accepted step.
///
/// A state escaping past [`DIVERGENCE_NORM`] ends the run cleanly with a
/// [`Termination::Diverged`] label; budget exhaustion, unresolvable step
/// sizes at moderate state norms, and non-finite states are errors.
pub fn integrate(
    field: &VectorFieldHandle,
    u0: Vec3,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate()?;
    if t_end.is_nan() || t_end < 0.0 {
        return Err(IntegrateError::InvalidConfig("t_end must be nonnegative"));
    }
    if !u0.is_finite() {
        return Err(IntegrateError::NonFiniteState { t: 0.0 });
    }
    let mut samples = vec![sample_of(field, 0.0, u0)];
    let mut segments = Vec::new();
    if t_end == 0.0 {
        return Ok(Trajectory { samples, segments, termination: Termination::Completed });
    }

    let mut f = |y: &[f64; 3]| field.eval(Vec3::new(y[0], y[1], y[2])).to_array();
    let outcome = drive(
        &mut f,
        u0.to_array(),
        t_end,
        cfg,
        true,
        Some(DIVERGENCE_NORM),
        &mut |step: AcceptedStep<'_, 3>| {
            samples.push(sample_of(field, step.t1, Vec3::from_array(*step.y1)));
            segments.push(segment_of(&step));
            StepFlow::Continue
        },
    )?;
    let termination = match outcome {
        DriveOutcome::Reached | DriveOutcome::Stopped => Termination::Completed,
        DriveOutcome::Diverged { t } => Termination::Diverged { t },
    };
    Ok(Trajectory { samples, segments, termination })
}

/// Integrates until the first directed crossing of the hyperplane
/// `<normal, u - anchor> = 0` after the guard time `10 * h_init`, localized
/// on the dense output to `|<normal, u - anchor>| <= 1e-12 * (1 + |u|)`.
///
/// Returns the trajectory up to the crossing (its last sample is the
/// crossing itself) together with the crossing record.
pub fn integrate_until_event(
    field: &VectorFieldHandle,
    u0: Vec3,
    event: &EventSpec,
    max_time: f64,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, EventCrossing), IntegrateError> {
    cfg.validate()?;
    if event.normal.norm() == 0.0 {
        return Err(IntegrateError::InvalidConfig("event normal must be nonzero"));
    }
    if !max_time.is_finite() || max_time <= 0.0 {
        return Err(IntegrateError::InvalidConfig("max_time must be positive"));
    }
    if !u0.is_finite() {
        return Err(IntegrateError::NonFiniteState { t: 0.0 });
    }

    let g = |u: Vec3| event.normal.dot(u - event.anchor);
    let t_min = 10.0 * cfg.h_init;
    let mut samples = vec![sample_of(field, 0.0, u0)];
    let mut segments = Vec::new();
    let mut crossing: Option<EventCrossing> = None;

    let mut f = |y: &[f64; 3]| field.eval(Vec3::new(y[0], y[1], y[2])).to_array();
    let outcome = drive(
        &mut f,
        u0.to_array(),
        max_time,
        cfg,
        true,
        Some(DIVERGENCE_NORM),
        &mut |step: AcceptedStep<'_, 3>| {
            let seg = segment_of(&step);
            // examine both half-steps so an in-and-out pair inside one step
            // is not missed
            let thetas = [0.0, 0.5, 1.0];
            let gs = thetas.map(|th| g(seg.eval_theta(th)));
            for w in 0..2 {
                let (ga, gb) = (gs[w], gs[w + 1]);
                let crossed = match event.direction {
                    CrossingDirection::Positive => ga < 0.0 && gb >= 0.0,
                    CrossingDirection::Negative => ga > 0.0 && gb <= 0.0,
                    CrossingDirection::Both => {
                        (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0)
                    }
                };
                if !crossed {
                    continue;
                }
                let (theta, state) = refine_crossing(&seg, &g, thetas[w], thetas[w + 1], ga);
                let t_cross = seg.t0 + theta * seg.dt;
                if t_cross <= t_min {
                    continue;
                }
                segments.push(seg);
                samples.push(sample_of(field, t_cross, state));
                crossing = Some(EventCrossing { t: t_cross, state });
                return StepFlow::Stop;
            }
            samples.push(sample_of(field, step.t1, Vec3::from_array(*step.y1)));
            segments.push(seg);
            StepFlow::Continue
        },
    )?;

    match crossing {
        Some(hit) => Ok((
            Trajectory { samples, segments, termination: Termination::Completed },
            hit,
        )),
        None => {
            let t_reached = match outcome {
                DriveOutcome::Diverged { t } => t,
                _ => samples.last().map(|s| s.t).unwrap_or(0.0),
            };
            Err(IntegrateError::NoCrossing { t_max: max_time, t_reached })
        }
    }
}

/// Bisection for the crossing on a dense segment; `ga` is the section value
/// at `theta_a`.
fn refine_crossing(
    seg: &DenseSegment,
    g: &dyn Fn(Vec3) -> f64,
    mut theta_a: f64,
    mut theta_b: f64,
    mut ga: f64,
) -> (f64, Vec3) {
    for _ in 0..90 {
        let mid = 0.5 * (theta_a + theta_b);
        let gm = g(seg.eval_theta(mid));
        if (gm > 0.0) == (ga > 0.0) && gm != 0.0 {
            theta_a = mid;
            ga = gm;
        } else {
            theta_b = mid;
        }
        if theta_b - theta_a <= f64::EPSILON {
            break;
        }
    }
    let theta = theta_b;
    (theta, seg.eval_theta(theta))
}

/// Evaluates each scalar handle on every stored sample.
pub fn monitor_scalars(traj: &Trajectory, fns: &[ScalarField]) -> Vec<(f64, Vec<f64>)> {
    traj.samples()
        .iter()
        .map(|s| (s.t, fns.iter().map(|f| f.eval(s.state)).collect()))
        .collect()
}
