//! Small fixed-size linear algebra for three-dimensional phase space.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point (or tangent vector) of phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Right-handed cross product.
    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn dist(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn unit(self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1e-300 {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// The involution (x, y, z) -> (-x, -y, z).
    pub fn mirror(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, self.z)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Vec3 {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// 3x3 real matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix3 {
    pub rows: [[f64; 3]; 3],
}

impl Matrix3 {
    pub fn new(rows: [[f64; 3]; 3]) -> Self {
        Matrix3 { rows }
    }

    pub fn zero() -> Self {
        Matrix3::new([[0.0; 3]; 3])
    }

    pub fn identity() -> Self {
        Matrix3::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Matrix3::new([
            [c0.x, c1.x, c2.x],
            [c0.y, c1.y, c2.y],
            [c0.z, c1.z, c2.z],
        ])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.rows[0][j], self.rows[1][j], self.rows[2][j])
    }

    pub fn transpose(&self) -> Matrix3 {
        let r = &self.rows;
        Matrix3::new([
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Matrix3) -> Matrix3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Matrix3::new(out)
    }

    pub fn trace(&self) -> f64 {
        self.rows[0][0] + self.rows[1][1] + self.rows[2][2]
    }

    pub fn det(&self) -> f64 {
        let r = &self.rows;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Sum of the three principal 2x2 minors (the second elementary
    /// symmetric function of the eigenvalues).
    pub fn principal_minor_sum(&self) -> f64 {
        let r = &self.rows;
        (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            + (r[0][0] * r[2][2] - r[0][2] * r[2][0])
            + (r[0][0] * r[1][1] - r[0][1] * r[1][0])
    }

    pub fn norm_inf(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    /// Eigenvalues sorted by descending magnitude.
    ///
    /// Roots of the characteristic cubic, computed in closed form and
    /// polished by complex Newton steps; a bisection-and-deflation fallback
    /// handles the rare case where the closed form loses accuracy.
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        // det(lambda I - M) = lambda^3 - tr lambda^2 + m2 lambda - det
        let mut roots = cubic_roots(-self.trace(), self.principal_minor_sum(), -self.det());
        roots.sort_by(|a, b| {
            b.norm()
                .partial_cmp(&a.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
        });
        roots
    }
}

fn eval_cubic(a2: f64, a1: f64, a0: f64, x: Complex64) -> Complex64 {
    ((x + a2) * x + a1) * x + a0
}

fn eval_cubic_deriv(a2: f64, a1: f64, x: Complex64) -> Complex64 {
    (3.0 * x + 2.0 * a2) * x + a1
}

fn polish_root(a2: f64, a1: f64, a0: f64, mut x: Complex64) -> Complex64 {
    for _ in 0..12 {
        let f = eval_cubic(a2, a1, a0, x);
        let df = eval_cubic_deriv(a2, a1, x);
        if df.norm() < 1e-300 {
            break;
        }
        let step = f / df;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// Magnitude of the largest term of the cubic at `x`; the natural scale to
/// judge a residual against.
fn cubic_term_scale(a2: f64, a1: f64, a0: f64, x: Complex64) -> f64 {
    let ax = x.norm();
    (ax * ax * ax)
        .max(a2.abs() * ax * ax)
        .max(a1.abs() * ax)
        .max(a0.abs())
        .max(1e-300)
}

/// Roots of the monic cubic `x^3 + a2 x^2 + a1 x + a0` over the complex numbers.
pub fn cubic_roots(a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    let roots = cubic_roots_closed_form(a2, a1, a0).map(|r| polish_root(a2, a1, a0, r));

    // residual gate, per root, at the magnitude of the largest term there
    let ok = roots.iter().all(|&r| {
        eval_cubic(a2, a1, a0, r).norm() <= 1e-8 * cubic_term_scale(a2, a1, a0, r)
    });
    if ok {
        return roots;
    }
    cubic_roots_deflated(a2, a1, a0).map(|r| polish_root(a2, a1, a0, r))
}

/// Trigonometric / Cardano solution of the depressed cubic.
fn cubic_roots_closed_form(a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    let shift = a2 / 3.0;
    // x = t - shift turns the cubic into t^3 + p t + q
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;

    let scale = p.abs().sqrt().max(q.abs().cbrt());
    if scale < 1e-300 {
        let r = Complex64::new(-shift, 0.0);
        return [r, r, r];
    }

    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc >= 0.0 {
        // three real roots
        let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = if m > 0.0 {
            (3.0 * q / (p * m)).clamp(-1.0, 1.0)
        } else {
            1.0
        };
        let phi = arg.acos() / 3.0;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let t = m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            *slot = Complex64::new(t - shift, 0.0);
        }
        out
    } else {
        // one real root plus a conjugate pair
        let half_q = q / 2.0;
        let rad = (half_q * half_q + p * p * p / 27.0).sqrt();
        // larger-magnitude branch avoids cancellation
        let u3 = if half_q >= 0.0 { -half_q - rad } else { -half_q + rad };
        let u = u3.cbrt();
        let v = if u.abs() > 1e-300 { -p / (3.0 * u) } else { 0.0 };
        let t_real = u + v;
        let re = -t_real / 2.0;
        let im = (u - v) * 3.0f64.sqrt() / 2.0;
        [
            Complex64::new(t_real - shift, 0.0),
            Complex64::new(re - shift, im),
            Complex64::new(re - shift, -im),
        ]
    }
}

/// Fallback: bracket the guaranteed real root by bisection, deflate by
/// synthetic division, solve the remaining quadratic.
fn cubic_roots_deflated(a2: f64, a1: f64, a0: f64) -> [Complex64; 3] {
    let bound = 1.0 + a2.abs().max(a1.abs()).max(a0.abs());
    let p = |x: f64| ((x + a2) * x + a1) * x + a0;
    // p(-bound) < 0 < p(bound) by the Cauchy bound
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    // remaining quadratic x^2 + b1 x + b0: the linear coefficient from
    // synthetic division, the constant from Vieta's product, which stays
    // accurate when r is far larger than the other roots
    let b1 = a2 + r;
    let b0 = if r.abs() > 1e-150 { -a0 / r } else { a1 + r * b1 };
    let disc = b1 * b1 - 4.0 * b0;
    let (x1, x2) = if disc >= 0.0 {
        let s = disc.sqrt();
        let q = -0.5 * (b1 + b1.signum() * s);
        if q.abs() > 1e-300 {
            (Complex64::new(q, 0.0), Complex64::new(b0 / q, 0.0))
        } else {
            (Complex64::new(-b1 / 2.0, 0.0), Complex64::new(-b1 / 2.0, 0.0))
        }
    } else {
        let s = (-disc).sqrt() / 2.0;
        (Complex64::new(-b1 / 2.0, s), Complex64::new(-b1 / 2.0, -s))
    };
    [Complex64::new(r, 0.0), x1, x2]
}
