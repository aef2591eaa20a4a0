//! Periodic orbits as fibers of the energy-Casimir map: locating points on
//! a fiber, measuring periods through a Poincare return, mirror components,
//! and monodromy matrices with their Floquet multipliers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{assemble_rhs, FieldError, PerturbationSpec, VectorFieldHandle};
use crate::integrator::{
    drive, integrate, integrate_until_event, AcceptedStep, CrossingDirection, DriveOutcome,
    EventSpec, IntegrateError, IntegratorConfig, StepFlow,
};
use crate::linalg::{Matrix3, Vec3};
use crate::rabinovich::{
    casimir, hamiltonian, in_regular_set, make_context, LevelPair, SystemParams,
};

/// Convergence tolerance for fiber residuals out of the Newton solve.
pub const FIBER_TOL: f64 = 1e-10;

/// Orbits must close and stay on their fiber at this tolerance.
pub const ORBIT_TOL: f64 = 1e-7;

/// Number of equally spaced (in time) samples stored per orbit.
pub const ORBIT_SAMPLES: usize = 256;

/// Longest return time searched for before a fiber point is declared
/// not periodic at this scale.
pub const MAX_RETURN_TIME: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("Newton did not reach residual {FIBER_TOL:.0e} (best {residual:.3e})")]
    FiberNoConvergence { residual: f64 },
    #[error("level-map Jacobian has rank < 2 at {at}")]
    RankDeficient { at: Vec3 },
    #[error("converged point {at} lies outside the regular set")]
    NonRegularPoint { at: Vec3 },
    #[error("fiber point is an equilibrium: {at}")]
    AtEquilibrium { at: Vec3 },
    #[error("no same-direction return within t = {t_max} (NOT_PERIODIC_AT_SCALE)")]
    NotPeriodicAtScale { t_max: f64 },
    #[error("orbit fails to close: residual {residual:.3e} exceeds {ORBIT_TOL:.0e}")]
    ClosureTooLoose { residual: f64 },
    #[error("orbit sample leaves the fiber: residual {residual:.3e} exceeds {ORBIT_TOL:.0e}")]
    OffFiber { residual: f64 },
    #[error("period mismatch in monodromy: closure residual {residual:.3e}")]
    PeriodMismatch { residual: f64 },
    #[error("field vanishes on the orbit near {at}")]
    FieldVanishesOnOrbit { at: Vec3 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A state on (or numerically near) the fiber of a level pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberPoint {
    pub state: Vec3,
    pub level: LevelPair,
    pub residual_h: f64,
    pub residual_c: f64,
}

impl FiberPoint {
    /// Wraps a state as a point of its own fiber (residuals are zero by
    /// construction).
    pub fn from_state(state: Vec3, p: SystemParams) -> Self {
        FiberPoint {
            state,
            level: LevelPair::new(hamiltonian(state, p), casimir(state)),
            residual_h: 0.0,
            residual_c: 0.0,
        }
    }
}

/// Which connected component of a two-component fiber an orbit lies on,
/// under the symmetry (x, y, z) -> (-x, -y, z). Tagged by the sign of x at
/// the sample of largest |x|; single-component orbits get the tag of their
/// sampled representative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentId {
    Plus,
    Minus,
}

/// A sampled periodic orbit.
#[derive(Clone, Debug)]
pub struct Orbit {
    pub params: SystemParams,
    pub level: LevelPair,
    pub period: f64,
    /// `ORBIT_SAMPLES` states equally spaced in time, starting at the
    /// detection base point.
    pub samples: Vec<Vec3>,
    pub component: ComponentId,
}

impl Orbit {
    /// Largest level residual over the stored samples.
    pub fn max_fiber_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|&u| {
                (hamiltonian(u, self.params) - self.level.h)
                    .abs()
                    .max((casimir(u) - self.level.c).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Rough diameter of the sample set.
    pub fn diameter(&self) -> f64 {
        let first = self.samples[0];
        2.0 * self
            .samples
            .iter()
            .map(|&s| (s - first).norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    pub fn to_record(&self) -> OrbitRecord {
        OrbitRecord {
            beta: self.params.beta,
            h: self.level.h,
            c: self.level.c,
            period: self.period,
            samples: self.samples.iter().map(|s| s.to_array()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("orbit serializes")
    }

    pub fn from_json(text: &str) -> Result<Orbit, serde_json::Error> {
        let record: OrbitRecord = serde_json::from_str(text)?;
        Ok(record.into_orbit())
    }
}

/// On-disk form of an orbit: `{beta, h, c, period, samples: [[x,y,z], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitRecord {
    pub beta: f64,
    pub h: f64,
    pub c: f64,
    pub period: f64,
    pub samples: Vec<[f64; 3]>,
}

impl OrbitRecord {
    pub fn into_orbit(self) -> Orbit {
        let samples: Vec<Vec3> = self.samples.into_iter().map(Vec3::from_array).collect();
        let component = component_of(&samples);
        Orbit {
            params: SystemParams::new(self.beta),
            level: LevelPair::new(self.h, self.c),
            period: self.period,
            samples,
            component,
        }
    }
}

fn component_of(samples: &[Vec3]) -> ComponentId {
    let extreme = samples
        .iter()
        .fold(Vec3::ZERO, |m, &s| if s.x.abs() > m.x.abs() { s } else { m });
    if extreme.x >= 0.0 {
        ComponentId::Plus
    } else {
        ComponentId::Minus
    }
}

/// Newton iteration on the two-equation system `(H - h, C - c) = 0` in
/// three unknowns with least-norm (pseudo-inverse) updates.
///
/// A seed already on the fiber is returned unchanged. Converged points
/// outside the regular set are rejected.
pub fn solve_fiber_point(
    lp: LevelPair,
    p: SystemParams,
    seed: Vec3,
) -> Result<FiberPoint, OrbitError> {
    let mut u = seed;
    let mut best = f64::INFINITY;
    for _ in 0..=50 {
        if !u.is_finite() {
            return Err(OrbitError::FiberNoConvergence { residual: best });
        }
        let rh = hamiltonian(u, p) - lp.h;
        let rc = casimir(u) - lp.c;
        let residual = rh.abs().max(rc.abs());
        best = best.min(residual);
        if residual <= FIBER_TOL {
            if !in_regular_set(u, p) {
                return Err(OrbitError::NonRegularPoint { at: u });
            }
            return Ok(FiberPoint {
                state: u,
                level: lp,
                residual_h: rh.abs(),
                residual_c: rc.abs(),
            });
        }
        let gh = crate::rabinovich::grad_hamiltonian(u, p);
        let gc = crate::rabinovich::grad_casimir(u);
        let a = gh.norm_sq();
        let b = gh.dot(gc);
        let d = gc.norm_sq();
        let det = a * d - b * b;
        if det <= 1e-12 * a * d + 1e-300 {
            return Err(OrbitError::RankDeficient { at: u });
        }
        let w1 = (d * rh - b * rc) / det;
        let w2 = (-b * rh + a * rc) / det;
        u -= gh * w1 + gc * w2;
    }
    Err(OrbitError::FiberNoConvergence { residual: best })
}

/// The unperturbed field for the given parameters.
pub fn unperturbed_field(p: SystemParams) -> VectorFieldHandle {
    assemble_rhs(&PerturbationSpec::none(), &make_context(p)).expect("mode none always assembles")
}

/// Measures the period of the orbit through a fiber point and resamples it.
///
/// The Poincare section goes through the point with the field direction as
/// its normal; the period is the time of the first same-direction return
/// that closes back to the base point. Crossings that return elsewhere on
/// the section are skipped (up to a few), so mildly folded orbits are still
/// handled. The orbit is then re-integrated once over one period and
/// resampled at `ORBIT_SAMPLES` equally spaced times via dense output.
pub fn detect_period(
    fp: &FiberPoint,
    p: SystemParams,
    cfg: &IntegratorConfig,
) -> Result<Orbit, OrbitError> {
    let field = unperturbed_field(p);
    let u0 = fp.state;
    let f0 = field.eval(u0);
    let normal = f0.unit().ok_or(OrbitError::AtEquilibrium { at: u0 })?;
    let event = EventSpec { anchor: u0, normal, direction: CrossingDirection::Positive };

    // closure match threshold for picking the true return among crossings
    let match_tol = 1e-5 * (1.0 + u0.norm());
    let mut t_accumulated = 0.0;
    let mut start = u0;
    let mut period = None;
    let mut last_residual = f64::INFINITY;
    for _ in 0..8 {
        let remaining = MAX_RETURN_TIME - t_accumulated;
        if remaining <= 0.0 {
            break;
        }
        let (_, hit) = integrate_until_event(&field, start, &event, remaining, cfg)
            .map_err(|e| match e {
                IntegrateError::NoCrossing { .. } => {
                    OrbitError::NotPeriodicAtScale { t_max: MAX_RETURN_TIME }
                }
                other => OrbitError::Integrate(other),
            })?;
        t_accumulated += hit.t;
        last_residual = (hit.state - u0).norm();
        if last_residual <= match_tol {
            period = Some(t_accumulated);
            break;
        }
        start = hit.state;
    }
    let period = match period {
        Some(t) => t,
        None => return Err(OrbitError::ClosureTooLoose { residual: last_residual }),
    };

    // resample pass
    let traj = integrate(&field, u0, period, cfg)?;
    let closure = (traj.last().state - u0).norm();
    if closure > ORBIT_TOL {
        return Err(OrbitError::ClosureTooLoose { residual: closure });
    }
    let samples: Vec<Vec3> = (0..ORBIT_SAMPLES)
        .map(|k| traj.eval(period * k as f64 / ORBIT_SAMPLES as f64))
        .collect();
    let orbit = Orbit {
        params: p,
        level: fp.level,
        period,
        component: component_of(&samples),
        samples,
    };
    let worst = orbit.max_fiber_residual();
    if worst > ORBIT_TOL {
        return Err(OrbitError::OffFiber { residual: worst });
    }
    Ok(orbit)
}

/// The image of an orbit under (x, y, z) -> (-x, -y, z): a valid orbit on
/// the same fiber with the same period.
pub fn mirror_orbit(orb: &Orbit) -> Orbit {
    let samples: Vec<Vec3> = orb.samples.iter().map(|s| s.mirror()).collect();
    Orbit {
        params: orb.params,
        level: orb.level,
        period: orb.period,
        component: component_of(&samples),
        samples,
    }
}

/// Two-sided Hausdorff distance between the sample sets of two orbits.
pub fn sample_set_distance(a: &Orbit, b: &Orbit) -> f64 {
    let one_sided = |from: &Orbit, to: &Orbit| {
        from.samples
            .iter()
            .map(|&u| {
                to.samples
                    .iter()
                    .map(|&v| (u - v).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Whether the mirror image traces the same point set, i.e. the fiber has a
/// single connected component.
pub fn mirror_coincides(orb: &Orbit) -> bool {
    let spacing = orb
        .samples
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .fold(0.0, f64::max);
    sample_set_distance(orb, &mirror_orbit(orb)) <= 2.0 * spacing
}

/// Monodromy matrix of an orbit under a (possibly perturbed) field and its
/// Floquet multipliers.
#[derive(Clone, Debug)]
pub struct MonodromyResult {
    /// Flow-map Jacobian over one period.
    pub matrix: Matrix3,
    /// Eigenvalues of the matrix, sorted by descending magnitude.
    pub multipliers: [Complex64; 3],
    pub det: f64,
    /// Integral of the field divergence along the orbit; `exp` of it equals
    /// the determinant in exact arithmetic.
    pub div_integral: f64,
    /// How far the flow of the base point fails to return after one period.
    pub closure_residual: f64,
}

/// Field Jacobian by central finite differences, step `1e-6 * (1 + |u|)`.
pub fn fd_jacobian(field: &VectorFieldHandle, u: Vec3) -> Matrix3 {
    let step = 1e-6 * (1.0 + u.norm());
    let mut rows = [[0.0; 3]; 3];
    for (j, e) in [
        Vec3::new(step, 0.0, 0.0),
        Vec3::new(0.0, step, 0.0),
        Vec3::new(0.0, 0.0, step),
    ]
    .iter()
    .enumerate()
    {
        let d = (field.eval(u + *e) - field.eval(u - *e)) / (2.0 * step);
        rows[0][j] = d.x;
        rows[1][j] = d.y;
        rows[2][j] = d.z;
    }
    Matrix3::new(rows)
}

/// Integrates the variational system alongside the flow over one period.
///
/// The 13-dimensional augmented state carries the base trajectory, the
/// 3x3 fundamental solution (row-major) and the running divergence
/// integral. The field Jacobian comes from central finite differences, so
/// one code path serves every perturbation mode.
pub fn monodromy(
    orb: &Orbit,
    field: &VectorFieldHandle,
    cfg: &IntegratorConfig,
) -> Result<MonodromyResult, OrbitError> {
    for &s in &orb.samples {
        if field.eval(s).norm() < 1e-9 {
            return Err(OrbitError::FieldVanishesOnOrbit { at: s });
        }
    }
    let u0 = orb.samples[0];

    let mut f = |y: &[f64; 13]| -> [f64; 13] {
        let u = Vec3::new(y[0], y[1], y[2]);
        let du = field.eval(u);
        let jac = fd_jacobian(field, u);
        let mut out = [0.0; 13];
        out[0] = du.x;
        out[1] = du.y;
        out[2] = du.z;
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for (k, row) in jac.rows[i].iter().enumerate() {
                    acc += row * y[3 + 3 * k + j];
                }
                out[3 + 3 * i + j] = acc;
            }
        }
        out[12] = jac.trace();
        out
    };

    let mut y0 = [0.0f64; 13];
    y0[0] = u0.x;
    y0[1] = u0.y;
    y0[2] = u0.z;
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;

    let mut y_final = y0;
    let outcome = drive(
        &mut f,
        y0,
        orb.period,
        cfg,
        false,
        None,
        &mut |step: AcceptedStep<'_, 13>| {
            y_final = *step.y1;
            StepFlow::Continue
        },
    )?;
    if !matches!(outcome, DriveOutcome::Reached) {
        return Err(OrbitError::Integrate(IntegrateError::NonFiniteState { t: orb.period }));
    }

    let u_end = Vec3::new(y_final[0], y_final[1], y_final[2]);
    let closure_residual = (u_end - u0).norm();
    if closure_residual > 1e-5 * (1.0 + u0.norm()) {
        return Err(OrbitError::PeriodMismatch { residual: closure_residual });
    }

    let matrix = Matrix3::new([
        [y_final[3], y_final[4], y_final[5]],
        [y_final[6], y_final[7], y_final[8]],
        [y_final[9], y_final[10], y_final[11]],
    ]);
    Ok(MonodromyResult {
        matrix,
        multipliers: matrix.eigenvalues(),
        det: matrix.det(),
        div_integral: y_final[12],
        closure_residual,
    })
}

/// One small-amplitude probe of a periodic-orbit family attached to a
/// stable equilibrium, with the period the family approaches at the
/// equilibrium when that limit is defined.
#[derive(Clone, Copy, Debug)]
pub struct PeriodProbe {
    pub equilibrium: Vec3,
    pub offset_direction: Vec3,
    pub amplitude: f64,
    pub expected_period: Option<f64>,
}

impl PeriodProbe {
    /// Probe near the axis equilibrium `(0, 0, m)`; the family's periods
    /// tend to `2 pi / sqrt(m^2 - beta^2)` (requires `|m| > |beta|`).
    pub fn near_axis_equilibrium(m: f64, p: SystemParams, amplitude: f64) -> Self {
        let expected = if m * m > p.beta * p.beta {
            Some(2.0 * std::f64::consts::PI / (m * m - p.beta * p.beta).sqrt())
        } else {
            None
        };
        PeriodProbe {
            equilibrium: Vec3::new(0.0, 0.0, m),
            offset_direction: Vec3::new(1.0, 0.0, 0.0),
            amplitude,
            expected_period: expected,
        }
    }

    /// Probe near the equilibrium `(m, 0, beta)`; the family's periods tend
    /// to `2 pi / |m|` (requires `m != 0` and `m != +/- beta sqrt(2)`).
    pub fn near_plane_equilibrium(m: f64, p: SystemParams, amplitude: f64) -> Self {
        let degenerate = m == 0.0 || (m * m - 2.0 * p.beta * p.beta).abs() < 1e-12;
        PeriodProbe {
            equilibrium: Vec3::new(m, 0.0, p.beta),
            offset_direction: Vec3::new(0.0, 1.0, 0.0),
            amplitude,
            expected_period: if degenerate {
                None
            } else {
                Some(2.0 * std::f64::consts::PI / m.abs())
            },
        }
    }

    /// Seed state: equilibrium plus the scaled offset, taken on its own fiber.
    pub fn seed(&self, p: SystemParams) -> Result<FiberPoint, OrbitError> {
        let dir = self
            .offset_direction
            .unit()
            .ok_or(OrbitError::AtEquilibrium { at: self.equilibrium })?;
        assert!(self.amplitude > 0.0, "probe amplitude must be positive");
        Ok(FiberPoint::from_state(self.equilibrium + dir * self.amplitude, p))
    }
}

/// Runs a probe: seeds next to the equilibrium and measures the period of
/// the orbit through the seed.
pub fn probe_period(
    probe: &PeriodProbe,
    p: SystemParams,
    cfg: &IntegratorConfig,
) -> Result<Orbit, OrbitError> {
    let fp = probe.seed(p)?;
    detect_period(&fp, p, cfg)
}
