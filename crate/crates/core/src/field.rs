//! Hamilton-Poisson vector fields in three dimensions and their leaf
//! perturbations.
//!
//! The unperturbed field is `u' = nu(u) (grad H(u) x grad C(u))`. Two
//! families of corrections drive one conserved quantity toward a target
//! level while the other stays dynamically invariant:
//!
//! * the casimir-leaf term `-/+ a(u) (H(u) - h) [grad C x (grad H x grad C)]`
//!   keeps C invariant and pushes H toward (or away from) `h`;
//! * the energy-leaf term `+/- b(u) (C(u) - c) [grad H x (grad H x grad C)]`
//!   keeps H invariant and pushes C toward (or away from) `c`.
//!
//! With the stabilizing signs the construction satisfies, pointwise,
//!
//! ```text
//! dH/dt = -a(u) (H - h) |grad H x grad C|^2
//! dC/dt = -b(u) (C - c) |grad H x grad C|^2
//! ```
//!
//! which is the identity the unit tests and the rate checks pin the sign
//! conventions against.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vec3;

/// Errors from building or evaluating perturbed fields.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("gain must be strictly positive, got {value} at {at}")]
    NonPositiveGain { value: f64, at: Vec3 },
    #[error("mode {mode:?} requires a target {which} level")]
    MissingTargetLevel { mode: Mode, which: &'static str },
    #[error("explicit perturbed form is undefined for mode {mode:?}")]
    UnperturbedMode { mode: Mode },
    #[error("gradient of {which} deviates from finite differences by {rel_err:.3e} at {at}")]
    GradientMismatch { which: &'static str, rel_err: f64, at: Vec3 },
}

/// An evaluable scalar quantity on phase space.
///
/// Constant gains cover every experiment in this crate; the closure variant
/// keeps state-dependent gains available to library callers.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    StateDependent(Arc<dyn Fn(Vec3) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        ScalarField::Constant(v)
    }

    pub fn from_fn(f: impl Fn(Vec3) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::StateDependent(Arc::new(f))
    }

    pub fn eval(&self, u: Vec3) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::StateDependent(f) => f(u),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarField::Constant(_))
    }

    /// The constant value, when there is one.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(v) => Some(*v),
            ScalarField::StateDependent(_) => None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(v) => write!(f, "Constant({v})"),
            ScalarField::StateDependent(_) => write!(f, "StateDependent(..)"),
        }
    }
}

/// Energy, Casimir, their analytic gradients and the conformal factor nu
/// of one Hamilton-Poisson system.
#[derive(Clone)]
pub struct FieldContext {
    hamiltonian: ScalarField,
    casimir: ScalarField,
    grad_h: Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>,
    grad_c: Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>,
    nu: ScalarField,
}

impl FieldContext {
    pub fn new(
        hamiltonian: ScalarField,
        casimir: ScalarField,
        grad_h: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static,
        grad_c: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static,
        nu: ScalarField,
    ) -> Self {
        FieldContext {
            hamiltonian,
            casimir,
            grad_h: Arc::new(grad_h),
            grad_c: Arc::new(grad_c),
            nu,
        }
    }

    pub fn hamiltonian(&self, u: Vec3) -> f64 {
        self.hamiltonian.eval(u)
    }

    pub fn casimir(&self, u: Vec3) -> f64 {
        self.casimir.eval(u)
    }

    pub fn grad_hamiltonian(&self, u: Vec3) -> Vec3 {
        (self.grad_h)(u)
    }

    pub fn grad_casimir(&self, u: Vec3) -> Vec3 {
        (self.grad_c)(u)
    }

    pub fn nu(&self, u: Vec3) -> f64 {
        self.nu.eval(u)
    }

    pub fn hamiltonian_field(&self) -> &ScalarField {
        &self.hamiltonian
    }

    pub fn casimir_field(&self) -> &ScalarField {
        &self.casimir
    }

    /// Checks the analytic gradients against central finite differences
    /// (step `1e-5 * (1 + |u|)`) at the given states, relative error 1e-6.
    pub fn verify_gradients(&self, states: &[Vec3]) -> Result<(), FieldError> {
        for &u in states {
            let step = 1e-5 * (1.0 + u.norm());
            for (which, scalar, grad) in [
                ("H", &self.hamiltonian, self.grad_hamiltonian(u)),
                ("C", &self.casimir, self.grad_casimir(u)),
            ] {
                let fd = central_gradient(scalar, u, step);
                let denom = grad.norm().max(fd.norm()).max(1e-12);
                let rel_err = (grad - fd).norm() / denom;
                if rel_err > 1e-6 {
                    return Err(FieldError::GradientMismatch { which, rel_err, at: u });
                }
            }
        }
        Ok(())
    }
}

fn central_gradient(f: &ScalarField, u: Vec3, step: f64) -> Vec3 {
    let dx = Vec3::new(step, 0.0, 0.0);
    let dy = Vec3::new(0.0, step, 0.0);
    let dz = Vec3::new(0.0, 0.0, step);
    Vec3::new(
        (f.eval(u + dx) - f.eval(u - dx)) / (2.0 * step),
        (f.eval(u + dy) - f.eval(u - dy)) / (2.0 * step),
        (f.eval(u + dz) - f.eval(u - dz)) / (2.0 * step),
    )
}

/// Which perturbation is applied on top of the unperturbed field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    None,
    CasimirLeafStabilize,
    CasimirLeafDestabilize,
    EnergyLeafStabilize,
    EnergyLeafDestabilize,
    Full,
}

impl Mode {
    /// Modes whose correction carries the factor (H - h).
    pub fn needs_energy_level(self) -> bool {
        matches!(
            self,
            Mode::CasimirLeafStabilize | Mode::CasimirLeafDestabilize | Mode::Full
        )
    }

    /// Modes whose correction carries the factor (C - c).
    pub fn needs_casimir_level(self) -> bool {
        matches!(
            self,
            Mode::EnergyLeafStabilize | Mode::EnergyLeafDestabilize | Mode::Full
        )
    }
}

/// A perturbation request: mode, target levels and gains.
///
/// `gain_a` drives the casimir-leaf term (the one with the (H - h) factor),
/// `gain_b` the energy-leaf term (the one with the (C - c) factor), in every
/// mode that uses them.
#[derive(Clone, Debug)]
pub struct PerturbationSpec {
    pub mode: Mode,
    pub h: Option<f64>,
    pub c: Option<f64>,
    pub gain_a: ScalarField,
    pub gain_b: ScalarField,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        PerturbationSpec {
            mode: Mode::None,
            h: None,
            c: None,
            gain_a: ScalarField::constant(1.0),
            gain_b: ScalarField::constant(1.0),
        }
    }

    pub fn casimir_leaf_stabilize(h: f64, gain: ScalarField) -> Self {
        PerturbationSpec {
            mode: Mode::CasimirLeafStabilize,
            h: Some(h),
            c: None,
            gain_a: gain,
            gain_b: ScalarField::constant(1.0),
        }
    }

    pub fn casimir_leaf_destabilize(h: f64, gain: ScalarField) -> Self {
        PerturbationSpec {
            mode: Mode::CasimirLeafDestabilize,
            ..Self::casimir_leaf_stabilize(h, gain)
        }
    }

    pub fn energy_leaf_stabilize(c: f64, gain: ScalarField) -> Self {
        PerturbationSpec {
            mode: Mode::EnergyLeafStabilize,
            h: None,
            c: Some(c),
            gain_a: ScalarField::constant(1.0),
            gain_b: gain,
        }
    }

    pub fn energy_leaf_destabilize(c: f64, gain: ScalarField) -> Self {
        PerturbationSpec {
            mode: Mode::EnergyLeafDestabilize,
            ..Self::energy_leaf_stabilize(c, gain)
        }
    }

    pub fn full(h: f64, c: f64, gain_a: ScalarField, gain_b: ScalarField) -> Self {
        PerturbationSpec {
            mode: Mode::Full,
            h: Some(h),
            c: Some(c),
            gain_a,
            gain_b,
        }
    }

    /// Target energy level, erroring when the mode requires one and none is set.
    pub fn energy_level(&self) -> Result<f64, FieldError> {
        match (self.mode.needs_energy_level(), self.h) {
            (true, Some(h)) => Ok(h),
            (true, None) => Err(FieldError::MissingTargetLevel {
                mode: self.mode,
                which: "energy",
            }),
            (false, h) => Ok(h.unwrap_or(0.0)),
        }
    }

    /// Target Casimir level, erroring when the mode requires one and none is set.
    pub fn casimir_level(&self) -> Result<f64, FieldError> {
        match (self.mode.needs_casimir_level(), self.c) {
            (true, Some(c)) => Ok(c),
            (true, None) => Err(FieldError::MissingTargetLevel {
                mode: self.mode,
                which: "casimir",
            }),
            (false, c) => Ok(c.unwrap_or(0.0)),
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.mode.needs_energy_level() {
            self.energy_level()?;
        }
        if self.mode.needs_casimir_level() {
            self.casimir_level()?;
        }
        for gain in [&self.gain_a, &self.gain_b] {
            if let Some(v) = gain.constant_value() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(FieldError::NonPositiveGain { value: v, at: Vec3::ZERO });
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Vec3::cross`].
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    a.cross(b)
}

/// The unperturbed field `nu(u) (grad H x grad C)` at `u`.
pub fn unperturbed_rhs(u: Vec3, ctx: &FieldContext) -> Vec3 {
    ctx.grad_hamiltonian(u).cross(ctx.grad_casimir(u)) * ctx.nu(u)
}

fn casimir_leaf_term(u: Vec3, ctx: &FieldContext, h: f64, gain: f64, sign: f64) -> Vec3 {
    let gh = ctx.grad_hamiltonian(u);
    let gc = ctx.grad_casimir(u);
    gc.cross(gh.cross(gc)) * (sign * gain * (ctx.hamiltonian(u) - h))
}

fn energy_leaf_term(u: Vec3, ctx: &FieldContext, c: f64, gain: f64, sign: f64) -> Vec3 {
    let gh = ctx.grad_hamiltonian(u);
    let gc = ctx.grad_casimir(u);
    gh.cross(gh.cross(gc)) * (sign * gain * (ctx.casimir(u) - c))
}

/// The correction `-/+ gain(u) (H(u) - h) [grad C x (grad H x grad C)]`.
///
/// Orthogonal to `grad C`, so the Casimir stays dynamically invariant.
/// The stabilizing sign is minus; `destabilize` flips it.
pub fn casimir_leaf_perturbation(
    u: Vec3,
    ctx: &FieldContext,
    h: f64,
    gain: &ScalarField,
    destabilize: bool,
) -> Result<Vec3, FieldError> {
    let a = gain.eval(u);
    if !a.is_finite() || a <= 0.0 {
        return Err(FieldError::NonPositiveGain { value: a, at: u });
    }
    let sign = if destabilize { 1.0 } else { -1.0 };
    Ok(casimir_leaf_term(u, ctx, h, a, sign))
}

/// The correction `+/- gain(u) (C(u) - c) [grad H x (grad H x grad C)]`.
///
/// Orthogonal to `grad H`, so the energy stays dynamically invariant.
/// The stabilizing sign is plus; `destabilize` flips it.
pub fn energy_leaf_perturbation(
    u: Vec3,
    ctx: &FieldContext,
    c: f64,
    gain: &ScalarField,
    destabilize: bool,
) -> Result<Vec3, FieldError> {
    let b = gain.eval(u);
    if !b.is_finite() || b <= 0.0 {
        return Err(FieldError::NonPositiveGain { value: b, at: u });
    }
    let sign = if destabilize { -1.0 } else { 1.0 };
    Ok(energy_leaf_term(u, ctx, c, b, sign))
}

/// An evaluable vector field together with the context it was built from.
#[derive(Clone)]
pub struct VectorFieldHandle {
    rhs: Arc<dyn Fn(Vec3) -> Vec3 + Send + Sync>,
    ctx: FieldContext,
}

impl VectorFieldHandle {
    pub fn from_fn(ctx: FieldContext, rhs: impl Fn(Vec3) -> Vec3 + Send + Sync + 'static) -> Self {
        VectorFieldHandle { rhs: Arc::new(rhs), ctx }
    }

    pub fn eval(&self, u: Vec3) -> Vec3 {
        (self.rhs)(u)
    }

    pub fn context(&self) -> &FieldContext {
        &self.ctx
    }
}

impl fmt::Debug for VectorFieldHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFieldHandle(..)")
    }
}

/// Builds the full right-hand side for a perturbation request.
///
/// State-dependent gains are evaluated inside the returned closure and are
/// the caller's responsibility to keep strictly positive; constant gains
/// are checked here.
pub fn assemble_rhs(
    spec: &PerturbationSpec,
    ctx: &FieldContext,
) -> Result<VectorFieldHandle, FieldError> {
    spec.validate()?;
    let captured = ctx.clone();
    let mode = spec.mode;
    let h = spec.energy_level()?;
    let c = spec.casimir_level()?;
    let gain_a = spec.gain_a.clone();
    let gain_b = spec.gain_b.clone();

    let rhs = move |u: Vec3| -> Vec3 {
        let mut v = unperturbed_rhs(u, &captured);
        match mode {
            Mode::None => {}
            Mode::CasimirLeafStabilize => {
                v += casimir_leaf_term(u, &captured, h, gain_a.eval(u), -1.0);
            }
            Mode::CasimirLeafDestabilize => {
                v += casimir_leaf_term(u, &captured, h, gain_a.eval(u), 1.0);
            }
            Mode::EnergyLeafStabilize => {
                v += energy_leaf_term(u, &captured, c, gain_b.eval(u), 1.0);
            }
            Mode::EnergyLeafDestabilize => {
                v += energy_leaf_term(u, &captured, c, gain_b.eval(u), -1.0);
            }
            Mode::Full => {
                v += casimir_leaf_term(u, &captured, h, gain_a.eval(u), -1.0);
                v += energy_leaf_term(u, &captured, c, gain_b.eval(u), 1.0);
            }
        }
        v
    };

    Ok(VectorFieldHandle { rhs: Arc::new(rhs), ctx: ctx.clone() })
}
