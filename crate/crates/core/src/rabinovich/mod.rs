//! The Rabinovich system
//!
//! ```text
//! x' = yz + beta*y
//! y' = -xz + beta*x
//! z' = xy
//! ```
//!
//! realized as a Hamilton-Poisson field with energy
//! `H(x,y,z) = (x^2 + y^2)/4 - beta*z`, Casimir
//! `C(x,y,z) = (-x^2 + y^2)/2 + z^2` and conformal factor `nu = 1`,
//! so that `u' = grad H x grad C`. This module owns everything specific
//! to the system: analytic gradients, the Poisson tensor, the three
//! equilibrium families with their stability verdicts, the regular set V,
//! the atlas of energy-Casimir regions whose fibers are periodic orbits,
//! and an independently transcribed polynomial form of every perturbed
//! right-hand side (the oracle the assembled fields are checked against).

mod regions;

pub use regions::{classify_level_pair, matching_regions, RegionCase};

use serde::{Deserialize, Serialize};

use crate::field::{FieldContext, FieldError, Mode, PerturbationSpec, ScalarField};
use crate::linalg::{Matrix3, Vec3};

/// Membership tolerance for equilibrium lines; states come from exact
/// constructors or converged Newton solves.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// The system parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub beta: f64,
}

impl SystemParams {
    pub fn new(beta: f64) -> Self {
        assert!(beta.is_finite(), "beta must be finite");
        SystemParams { beta }
    }
}

/// A target pair of conserved-quantity levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub h: f64,
    pub c: f64,
}

impl LevelPair {
    pub fn new(h: f64, c: f64) -> Self {
        LevelPair { h, c }
    }
}

pub fn hamiltonian(u: Vec3, p: SystemParams) -> f64 {
    (u.x * u.x + u.y * u.y) / 4.0 - p.beta * u.z
}

pub fn casimir(u: Vec3) -> f64 {
    (-u.x * u.x + u.y * u.y) / 2.0 + u.z * u.z
}

pub fn grad_hamiltonian(u: Vec3, p: SystemParams) -> Vec3 {
    Vec3::new(u.x / 2.0, u.y / 2.0, -p.beta)
}

pub fn grad_casimir(u: Vec3) -> Vec3 {
    Vec3::new(-u.x, u.y, 2.0 * u.z)
}

/// The minus Lie-Poisson tensor, rows `[[0, 2z, -y], [-2z, 0, -x], [y, x, 0]]`.
pub fn poisson_matrix(u: Vec3) -> Matrix3 {
    Matrix3::new([
        [0.0, 2.0 * u.z, -u.y],
        [-2.0 * u.z, 0.0, -u.x],
        [u.y, u.x, 0.0],
    ])
}

/// The unperturbed right-hand side in direct polynomial form.
pub fn rhs(u: Vec3, p: SystemParams) -> Vec3 {
    Vec3::new(
        u.y * u.z + p.beta * u.y,
        -u.x * u.z + p.beta * u.x,
        u.x * u.y,
    )
}

/// Field context with the analytic gradients and `nu = 1`.
pub fn make_context(p: SystemParams) -> FieldContext {
    let beta = p.beta;
    FieldContext::new(
        ScalarField::from_fn(move |u| (u.x * u.x + u.y * u.y) / 4.0 - beta * u.z),
        ScalarField::from_fn(|u| (-u.x * u.x + u.y * u.y) / 2.0 + u.z * u.z),
        move |u| Vec3::new(u.x / 2.0, u.y / 2.0, -beta),
        |u| Vec3::new(-u.x, u.y, 2.0 * u.z),
        ScalarField::constant(1.0),
    )
}

/// The three equilibrium families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `(M, 0, beta)`
    E1,
    /// `(0, M, -beta)`
    E2,
    /// `(0, 0, M)`
    E3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stability {
    NonlinearlyStable,
    Unstable,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stability::NonlinearlyStable => write!(f, "NONLINEARLY_STABLE"),
            Stability::Unstable => write!(f, "UNSTABLE"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    pub family: Family,
    pub m: f64,
    pub stability: Stability,
}

/// The family member with parameter `m`.
pub fn equilibrium_point(family: Family, m: f64, p: SystemParams) -> Vec3 {
    match family {
        Family::E1 => Vec3::new(m, 0.0, p.beta),
        Family::E2 => Vec3::new(0.0, m, -p.beta),
        Family::E3 => Vec3::new(0.0, 0.0, m),
    }
}

/// Family membership and stability verdict, or `None` when `u` is not an
/// equilibrium (membership within absolute tolerance 1e-12).
///
/// Points on the z-axis are reported as E3. That covers the overlap points
/// `(0, 0, beta)` and `(0, 0, -beta)`, whose verdicts agree between the
/// families they belong to.
pub fn classify_equilibrium(u: Vec3, p: SystemParams) -> Option<EquilibriumVerdict> {
    let tol = EQUILIBRIUM_TOL;
    let beta = p.beta;
    if u.x.abs() <= tol && u.y.abs() <= tol {
        let m = u.z;
        let stability = if beta == 0.0 || m.abs() > beta.abs() {
            Stability::NonlinearlyStable
        } else {
            Stability::Unstable
        };
        return Some(EquilibriumVerdict { family: Family::E3, m, stability });
    }
    if u.y.abs() <= tol && (u.z - beta).abs() <= tol {
        let m = u.x;
        let stability = if beta != 0.0 && m.abs() <= tol {
            Stability::Unstable
        } else {
            Stability::NonlinearlyStable
        };
        return Some(EquilibriumVerdict { family: Family::E1, m, stability });
    }
    if u.x.abs() <= tol && (u.z + beta).abs() <= tol {
        let m = u.y;
        let stability = if beta != 0.0 {
            Stability::Unstable
        } else if m.abs() <= tol {
            Stability::NonlinearlyStable
        } else {
            Stability::Unstable
        };
        return Some(EquilibriumVerdict { family: Family::E2, m, stability });
    }
    None
}

/// True when `u` avoids all three equilibrium lines, i.e. lies in the open
/// set where `grad H` and `grad C` are linearly independent.
pub fn in_regular_set(u: Vec3, p: SystemParams) -> bool {
    classify_equilibrium(u, p).is_none()
}

/// A closed-form point on the fiber `H = h, C = c`, or `None` when the
/// fiber is empty.
///
/// On the slice of fixed z the two level equations give
/// `x^2 = z^2 + 2 beta z + 2h - c` and `y^2 = -z^2 + 2 beta z + 2h + c`;
/// any z where both right-hand sides are nonnegative yields a point. The
/// interior of the feasible z-interval is preferred so both x and y stay
/// away from zero.
pub fn fiber_seed(lp: LevelPair, p: SystemParams) -> Option<Vec3> {
    let beta = p.beta;
    let x_sq = |z: f64| z * z + 2.0 * beta * z + 2.0 * lp.h - lp.c;
    let y_sq = |z: f64| -z * z + 2.0 * beta * z + 2.0 * lp.h + lp.c;

    // y^2 >= 0 on [z1, z2]
    let disc_y = beta * beta + 2.0 * lp.h + lp.c;
    if disc_y < 0.0 {
        return None;
    }
    let (z1, z2) = (beta - disc_y.sqrt(), beta + disc_y.sqrt());

    // x^2 < 0 exactly on the open interval (z3, z4), when that is real
    let disc_x = beta * beta - 2.0 * lp.h + lp.c;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    if disc_x > 0.0 {
        let (z3, z4) = (-beta - disc_x.sqrt(), -beta + disc_x.sqrt());
        if z3 > z1 {
            intervals.push((z1, z3.min(z2)));
        }
        if z4 < z2 {
            intervals.push((z4.max(z1), z2));
        }
    } else {
        intervals.push((z1, z2));
    }

    intervals
        .iter()
        .filter(|(a, b)| b > a)
        .max_by(|a, b| (a.1 - a.0).partial_cmp(&(b.1 - b.0)).unwrap())
        .and_then(|&(a, b)| {
            let z = 0.5 * (a + b);
            let (xs, ys) = (x_sq(z), y_sq(z));
            if xs < 0.0 || ys < 0.0 {
                return None;
            }
            Some(Vec3::new(xs.sqrt(), ys.sqrt(), z))
        })
}

/// The perturbed right-hand sides in the expanded polynomial form,
/// transcribed term by term rather than derived from the cross-product
/// construction. Serves as an independent oracle for `assemble_rhs`.
pub fn explicit_perturbed_rhs(
    u: Vec3,
    p: SystemParams,
    spec: &PerturbationSpec,
) -> Result<Vec3, FieldError> {
    if spec.mode == Mode::None {
        return Err(FieldError::UnperturbedMode { mode: spec.mode });
    }
    spec.validate()?;
    let beta = p.beta;
    let (x, y, z) = (u.x, u.y, u.z);
    let base = rhs(u, p);

    // casimir-leaf direction: grad C x (grad H x grad C), expanded
    let p_vec = Vec3::new(
        x * y * y + 2.0 * x * z * z - 2.0 * beta * x * z,
        y * x * x + 2.0 * y * z * z + 2.0 * beta * y * z,
        -beta * x * x + z * x * x - beta * y * y - y * y * z,
    );
    // energy-leaf direction: grad H x (grad H x grad C), expanded
    let q_vec = Vec3::new(
        x * beta * beta - x * z * beta + x * y * y / 2.0,
        -y * z * beta - beta * beta * y - x * x * y / 2.0,
        (beta * x * x - z * x * x - beta * y * y - y * y * z) / 2.0,
    );

    let h_factor = |h: f64| (x * x + y * y) / 4.0 - beta * z - h;
    let c_factor = |c: f64| z * z + (y * y - x * x) / 2.0 - c;

    let v = match spec.mode {
        Mode::None => unreachable!(),
        Mode::CasimirLeafStabilize => {
            base - p_vec * (spec.gain_a.eval(u) * h_factor(spec.energy_level()?))
        }
        Mode::CasimirLeafDestabilize => {
            base + p_vec * (spec.gain_a.eval(u) * h_factor(spec.energy_level()?))
        }
        Mode::EnergyLeafStabilize => {
            base + q_vec * (spec.gain_b.eval(u) * c_factor(spec.casimir_level()?))
        }
        Mode::EnergyLeafDestabilize => {
            base - q_vec * (spec.gain_b.eval(u) * c_factor(spec.casimir_level()?))
        }
        Mode::Full => {
            base - p_vec * (spec.gain_a.eval(u) * h_factor(spec.energy_level()?))
                + q_vec * (spec.gain_b.eval(u) * c_factor(spec.casimir_level()?))
        }
    };
    Ok(v)
}
