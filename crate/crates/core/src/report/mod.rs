//! End-to-end stabilization and destabilization experiments with
//! quantitative verdicts: orbital-distance decay, squared level deviations,
//! invariant drift, and pointwise checks of the derived decay-rate
//! identities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{assemble_rhs, FieldContext, FieldError, Mode, PerturbationSpec};
use crate::integrator::{integrate, IntegrateError, IntegratorConfig, Termination, Trajectory};
use crate::linalg::Vec3;
use crate::orbit::Orbit;
use crate::rabinovich::{in_regular_set, make_context, SystemParams};

/// Distance below which a trajectory end state counts as having reached
/// the orbit.
pub const CONVERGENCE_DIST: f64 = 1e-4;

/// Final level deviation below which a leaf is considered reached.
pub const LEAF_CONVERGENCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("experiment start {at} lies on an equilibrium line")]
    StartNotRegular { at: Vec3 },
    #[error("reference orbit needs at least 3 samples")]
    OrbitTooSmall,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Outcome classification of one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Final distance under [`CONVERGENCE_DIST`] with a monotone trend over
    /// the last decade of time.
    ConvergedToOrbit,
    /// The targeted level deviation converged but the state did not close in
    /// on the orbit (the start was off the invariant leaf).
    LeafConvergedOnly,
    Diverged,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Verdict::ConvergedToOrbit => "CONVERGED_TO_ORBIT",
            Verdict::LeafConvergedOnly => "LEAF_CONVERGED_ONLY",
            Verdict::Diverged => "DIVERGED",
            Verdict::Indeterminate => "INDETERMINATE",
        };
        write!(f, "{name}")
    }
}

/// One experiment: perturbation, reference orbit, initial offset, horizon.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub params: SystemParams,
    pub perturbation: PerturbationSpec,
    pub orbit: Orbit,
    pub offset: Vec3,
    pub t_end: f64,
    pub cfg: IntegratorConfig,
}

/// Time series and summary quantities recorded by an experiment.
#[derive(Clone, Debug)]
pub struct DecayRecord {
    pub t: Vec<f64>,
    /// dist(u(t), orbit sample set), refined.
    pub dist: Vec<f64>,
    /// (H - h)^2 against the experiment's target level.
    pub energy_sq_dev: Vec<f64>,
    /// (C - c)^2 against the experiment's target level.
    pub casimir_sq_dev: Vec<f64>,
    /// Least-squares slope of ln (H - h)^2, when the mode targets H and the
    /// series supports a fit.
    pub fitted_energy_rate: Option<f64>,
    pub fitted_casimir_rate: Option<f64>,
    /// max |H(t) - H(0)| over the run.
    pub drift_h: f64,
    /// max |C(t) - C(0)| over the run.
    pub drift_c: f64,
    pub termination: Termination,
}

impl DecayRecord {
    pub fn final_dist(&self) -> f64 {
        *self.dist.last().expect("record has samples")
    }
}

/// Minimum Euclidean distance from `u` to the orbit's sample set, refined
/// by one local quadratic interpolation of the curve through the three
/// nearest samples. The refinement never exceeds the raw sample minimum.
pub fn dist_to_orbit(u: Vec3, orb: &Orbit) -> f64 {
    let n = orb.samples.len();
    assert!(n >= 3, "dist_to_orbit needs at least 3 samples");
    let mut k = 0;
    let mut d_raw_sq = f64::INFINITY;
    for (i, &s) in orb.samples.iter().enumerate() {
        let d = (u - s).norm_sq();
        if d < d_raw_sq {
            d_raw_sq = d;
            k = i;
        }
    }
    let prev = orb.samples[(k + n - 1) % n];
    let mid = orb.samples[k];
    let next = orb.samples[(k + 1) % n];

    // quadratic curve through the three nearest samples at tau = -1, 0, 1
    let w = u - mid;
    let b = (next - prev) * 0.5;
    let c2 = (next - 2.0 * mid + prev) * 0.5;

    // squared distance is a quartic in tau; coarse scan plus Newton polish
    let dist_sq = |tau: f64| (w - b * tau - c2 * (tau * tau)).norm_sq();
    let mut best_tau = 0.0;
    let mut best = d_raw_sq;
    for i in 0..=40 {
        let tau = -1.0 + i as f64 / 20.0;
        let d = dist_sq(tau);
        if d < best {
            best = d;
            best_tau = tau;
        }
    }
    let dphi = |tau: f64| {
        let r = w - b * tau - c2 * (tau * tau);
        -2.0 * r.dot(b + 2.0 * tau * c2)
    };
    let ddphi = |tau: f64| {
        let r = w - b * tau - c2 * (tau * tau);
        let dq = b + 2.0 * tau * c2;
        2.0 * (dq.norm_sq() - 2.0 * r.dot(c2))
    };
    let mut tau = best_tau;
    for _ in 0..6 {
        let d2 = ddphi(tau);
        if d2 <= 0.0 {
            break;
        }
        tau = (tau - dphi(tau) / d2).clamp(-1.0, 1.0);
    }
    best = best.min(dist_sq(tau));
    best.max(0.0).sqrt()
}

fn fit_log_slope(t: &[f64], w: &[f64]) -> Option<f64> {
    // fit only while the series is meaningfully above (or, for growth,
    // within reach of) its starting value, so the integration noise floor
    // after a long decay does not flatten the slope
    let w0 = w.iter().copied().find(|&v| v > 1e-300)?;
    let floor = (w0 * 1e-12).max(1e-300);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(w)
        .filter(|(_, &v)| v > floor)
        .map(|(&ti, &v)| (ti, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Monotone-trend gate over the last decade of time: window medians of the
/// distance series must not grow (25% slack per window), or the whole tail
/// must already sit at the noise floor.
fn monotone_trend(t: &[f64], dist: &[f64], t_end: f64) -> bool {
    let lo = t_end / 10.0;
    let tail: Vec<(f64, f64)> = t
        .iter()
        .zip(dist)
        .filter(|(&ti, _)| ti >= lo)
        .map(|(&ti, &d)| (ti, d))
        .collect();
    if tail.len() < 16 {
        return false;
    }
    let windows = 8;
    let per = tail.len() / windows;
    let mut medians = Vec::with_capacity(windows);
    for wdw in 0..windows {
        let start = wdw * per;
        let end = if wdw + 1 == windows { tail.len() } else { start + per };
        let mut vals: Vec<f64> = tail[start..end].iter().map(|p| p.1).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(vals[vals.len() / 2]);
    }
    if medians.iter().all(|&m| m < 1e-5) {
        return true;
    }
    medians.windows(2).all(|w| w[1] <= w[0] * 1.25 + 1e-7)
}

/// Runs one experiment: integrates from `orbit sample + offset`, records
/// the decay series and classifies the outcome.
pub fn run_experiment(ex: &ExperimentSpec) -> Result<(DecayRecord, Verdict), ReportError> {
    let (_, record, verdict) = run_experiment_with_trajectory(ex)?;
    Ok((record, verdict))
}

/// Like [`run_experiment`], also handing back the raw trajectory (for
/// export).
pub fn run_experiment_with_trajectory(
    ex: &ExperimentSpec,
) -> Result<(Trajectory, DecayRecord, Verdict), ReportError> {
    if ex.orbit.samples.len() < 3 {
        return Err(ReportError::OrbitTooSmall);
    }
    let ctx = make_context(ex.params);
    let field = assemble_rhs(&ex.perturbation, &ctx)?;
    let start = ex.orbit.samples[0] + ex.offset;
    if !in_regular_set(start, ex.params) {
        return Err(ReportError::StartNotRegular { at: start });
    }

    let h_target = ex.perturbation.h.unwrap_or(ex.orbit.level.h);
    let c_target = ex.perturbation.c.unwrap_or(ex.orbit.level.c);
    let traj = integrate(&field, start, ex.t_end, &ex.cfg)?;

    let samples = traj.samples();
    let h0 = samples[0].energy;
    let c0 = samples[0].casimir;
    let mut record = DecayRecord {
        t: Vec::with_capacity(samples.len()),
        dist: Vec::with_capacity(samples.len()),
        energy_sq_dev: Vec::with_capacity(samples.len()),
        casimir_sq_dev: Vec::with_capacity(samples.len()),
        fitted_energy_rate: None,
        fitted_casimir_rate: None,
        drift_h: 0.0,
        drift_c: 0.0,
        termination: traj.termination(),
    };
    for s in samples {
        record.t.push(s.t);
        record.dist.push(dist_to_orbit(s.state, &ex.orbit));
        let dh = s.energy - h_target;
        let dc = s.casimir - c_target;
        record.energy_sq_dev.push(dh * dh);
        record.casimir_sq_dev.push(dc * dc);
        record.drift_h = record.drift_h.max((s.energy - h0).abs());
        record.drift_c = record.drift_c.max((s.casimir - c0).abs());
    }
    if ex.perturbation.mode.needs_energy_level() {
        record.fitted_energy_rate = fit_log_slope(&record.t, &record.energy_sq_dev);
    }
    if ex.perturbation.mode.needs_casimir_level() {
        record.fitted_casimir_rate = fit_log_slope(&record.t, &record.casimir_sq_dev);
    }

    let verdict = classify(ex, &record);
    Ok((traj, record, verdict))
}

fn classify(ex: &ExperimentSpec, record: &DecayRecord) -> Verdict {
    if matches!(record.termination, Termination::Diverged { .. }) {
        return Verdict::Diverged;
    }
    let final_dist = record.final_dist();
    if final_dist < CONVERGENCE_DIST && monotone_trend(&record.t, &record.dist, ex.t_end) {
        return Verdict::ConvergedToOrbit;
    }
    let h_ok = record
        .energy_sq_dev
        .last()
        .map(|&v| v.sqrt() < LEAF_CONVERGENCE)
        .unwrap_or(false);
    let c_ok = record
        .casimir_sq_dev
        .last()
        .map(|&v| v.sqrt() < LEAF_CONVERGENCE)
        .unwrap_or(false);
    let leaf_converged = match ex.perturbation.mode {
        Mode::CasimirLeafStabilize => h_ok,
        Mode::EnergyLeafStabilize => c_ok,
        Mode::Full => h_ok && c_ok,
        _ => false,
    };
    if leaf_converged {
        Verdict::LeafConvergedOnly
    } else {
        Verdict::Indeterminate
    }
}

/// Per-series summary from [`lyapunov_rate_check`].
#[derive(Clone, Copy, Debug)]
pub struct RateSeries {
    pub n_checked: usize,
    pub median_rel_err: f64,
    pub max_rel_err: f64,
}

/// Rate-identity check for a trajectory of an assembled perturbed field.
#[derive(Clone, Copy, Debug, Default)]
pub struct RateCheckReport {
    pub energy: Option<RateSeries>,
    pub casimir: Option<RateSeries>,
}

const RATE_INTERVALS: usize = 4096;

/// Compares finite differences of the monitored invariants against the
/// analytic rates
///
/// ```text
/// dH/dt = s_a * a(u) (H - h) |grad H x grad C|^2
/// dC/dt = s_b * b(u) (C - c) |grad H x grad C|^2
/// ```
///
/// (`s = -1` for the stabilizing signs, `+1` for the destabilizing ones) at
/// the midpoints of a uniform resampling of the trajectory. Midpoints where
/// `|grad H x grad C|^2 <= 1e-6`, or where the analytic rate is negligible
/// against the run's largest rate, are skipped.
pub fn lyapunov_rate_check(
    traj: &Trajectory,
    ctx: &FieldContext,
    spec: &PerturbationSpec,
) -> Result<RateCheckReport, FieldError> {
    spec.validate()?;
    let mut report = RateCheckReport::default();

    let span = traj.end_time() - traj.start_time();
    if span <= 0.0 {
        return Ok(report);
    }
    let dt = span / RATE_INTERVALS as f64;
    let t0 = traj.start_time();

    let h_sign = match spec.mode {
        Mode::CasimirLeafStabilize | Mode::Full => Some(-1.0),
        Mode::CasimirLeafDestabilize => Some(1.0),
        _ => None,
    };
    let c_sign = match spec.mode {
        Mode::EnergyLeafStabilize | Mode::Full => Some(-1.0),
        Mode::EnergyLeafDestabilize => Some(1.0),
        _ => None,
    };

    if let Some(sign) = h_sign {
        let h = spec.energy_level()?;
        report.energy = Some(rate_series(traj, ctx, t0, dt, |u, cross_sq| {
            sign * spec.gain_a.eval(u) * (ctx.hamiltonian(u) - h) * cross_sq
        }, |u| ctx.hamiltonian(u)));
    }
    if let Some(sign) = c_sign {
        let c = spec.casimir_level()?;
        report.casimir = Some(rate_series(traj, ctx, t0, dt, |u, cross_sq| {
            sign * spec.gain_b.eval(u) * (ctx.casimir(u) - c) * cross_sq
        }, |u| ctx.casimir(u)));
    }
    Ok(report)
}

fn rate_series(
    traj: &Trajectory,
    ctx: &FieldContext,
    t0: f64,
    dt: f64,
    analytic: impl Fn(Vec3, f64) -> f64,
    monitored: impl Fn(Vec3) -> f64,
) -> RateSeries {
    struct Point {
        fd: f64,
        expected: f64,
    }
    let mut points = Vec::with_capacity(RATE_INTERVALS);
    let mut max_expected = 0.0f64;
    let mut w_prev = monitored(traj.eval(t0));
    for i in 0..RATE_INTERVALS {
        let t_next = t0 + (i + 1) as f64 * dt;
        let w_next = monitored(traj.eval(t_next));
        let u_mid = traj.eval(t0 + (i as f64 + 0.5) * dt);
        let gh = ctx.grad_hamiltonian(u_mid);
        let gc = ctx.grad_casimir(u_mid);
        let cross_sq = gh.cross(gc).norm_sq();
        if cross_sq > 1e-6 {
            let expected = analytic(u_mid, cross_sq);
            max_expected = max_expected.max(expected.abs());
            points.push(Point { fd: (w_next - w_prev) / dt, expected });
        }
        w_prev = w_next;
    }

    let floor = 1e-6 * max_expected;
    let mut rels: Vec<f64> = points
        .iter()
        .filter(|p| p.expected.abs() > floor && p.expected.abs() > 0.0)
        .map(|p| (p.fd - p.expected).abs() / p.expected.abs())
        .collect();
    rels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_checked = rels.len();
    let median = if n_checked == 0 { f64::NAN } else { rels[n_checked / 2] };
    let max = rels.last().copied().unwrap_or(f64::NAN);
    RateSeries { n_checked, median_rel_err: median, max_rel_err: max }
}

/// Serializable experiment summary (the report export schema).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: SpecRecord,
    pub verdict: Verdict,
    pub final_dist: f64,
    #[serde(rename = "drift_H")]
    pub drift_h: f64,
    #[serde(rename = "drift_C")]
    pub drift_c: f64,
    /// Floquet multipliers as (re, im) pairs, when they were computed.
    pub floquet: Option<Vec<[f64; 2]>>,
}

/// Serializable form of a perturbation request; gains are recorded when
/// they are constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecRecord {
    pub beta: f64,
    pub mode: Mode,
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub gain_a: Option<f64>,
    pub gain_b: Option<f64>,
}

impl SpecRecord {
    pub fn new(params: SystemParams, spec: &PerturbationSpec) -> Self {
        SpecRecord {
            beta: params.beta,
            mode: spec.mode,
            h: spec.h,
            c: spec.c,
            gain_a: spec.gain_a.constant_value(),
            gain_b: spec.gain_b.constant_value(),
        }
    }
}

impl ExperimentReport {
    pub fn new(
        params: SystemParams,
        spec: &PerturbationSpec,
        record: &DecayRecord,
        verdict: Verdict,
        floquet: Option<Vec<[f64; 2]>>,
    ) -> Self {
        ExperimentReport {
            spec: SpecRecord::new(params, spec),
            verdict,
            final_dist: record.final_dist(),
            drift_h: record.drift_h,
            drift_c: record.drift_c,
            floquet,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
