//! The kicked Harper lifts `F = H_α ∘ V_β` and `G = V_β ∘ H_α` on the plane,
//! their shears, inverses and derivatives, the linear involutions that
//! generate the family's symmetries, and the local analysis of the four
//! canonical fixed points.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::scalar::{cos_turns, sin_turns, Real};

/// Kick strengths `(α, β)` selecting one member of the family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    /// Horizontal kick strength.
    pub alpha: T,
    /// Vertical kick strength.
    pub beta: T,
}

impl<T: Real> Params<T> {
    #[inline]
    pub fn new(alpha: T, beta: T) -> Self {
        Self { alpha, beta }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite()
    }

    pub fn on_diagonal(&self) -> bool {
        self.alpha == self.beta
    }

    /// `β < α`: below the diagonal of the parameter plane.
    pub fn below_diagonal(&self) -> bool {
        self.beta < self.alpha
    }

    /// Horizontal shear `H_α(x, y) = (x + α s(y), y)`.
    #[inline]
    pub fn shear_h(&self, z: Point<T>) -> Point<T> {
        Point::new(z.x + self.alpha * sin_turns(z.y), z.y)
    }

    /// Vertical shear `V_β(x, y) = (x, y + β s(x))`.
    #[inline]
    pub fn shear_v(&self, z: Point<T>) -> Point<T> {
        Point::new(z.x, z.y + self.beta * sin_turns(z.x))
    }

    /// The lift `F_{α,β} = H_α ∘ V_β`.
    #[inline]
    pub fn lift_f(&self, z: Point<T>) -> Point<T> {
        self.shear_h(self.shear_v(z))
    }

    /// The conjugate lift `G_{α,β} = V_β ∘ H_α`.
    #[inline]
    pub fn lift_g(&self, z: Point<T>) -> Point<T> {
        self.shear_v(self.shear_h(z))
    }

    /// Exact inverse `V_{-β} ∘ H_{-α}` of [`lift_f`](Self::lift_f).
    #[inline]
    pub fn lift_f_inv(&self, z: Point<T>) -> Point<T> {
        let x = z.x - self.alpha * sin_turns(z.y);
        Point::new(x, z.y - self.beta * sin_turns(x))
    }

    /// `F^n(z)`.
    pub fn iterate_f(&self, z: Point<T>, n: u64) -> Point<T> {
        let mut w = z;
        for _ in 0..n {
            w = self.lift_f(w);
        }
        w
    }

    /// `DF_{α,β}(z)`.
    pub fn jacobian(&self, z: Point<T>) -> Jacobian2<T> {
        let tau = T::TAU();
        let cx = cos_turns(z.x);
        let y1 = z.y + self.beta * sin_turns(z.x);
        let cy = cos_turns(y1);
        Jacobian2 {
            a11: T::one() + tau * tau * self.alpha * self.beta * cy * cx,
            a12: tau * self.alpha * cy,
            a21: tau * self.beta * cx,
            a22: T::one(),
        }
    }

    /// The parameters `(α, -β)`, `(-α, β)` etc. used by the symmetry relations.
    pub fn with(&self, alpha: T, beta: T) -> Self {
        Self::new(alpha, beta)
    }
}

/// A real 2×2 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Jacobian2<T> {
    pub fn identity() -> Self {
        Self { a11: T::one(), a12: T::zero(), a21: T::zero(), a22: T::one() }
    }

    #[inline]
    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    /// Matrix product `self · rhs`.
    #[inline]
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a11: self.a11 * rhs.a11 + self.a12 * rhs.a21,
            a12: self.a11 * rhs.a12 + self.a12 * rhs.a22,
            a21: self.a21 * rhs.a11 + self.a22 * rhs.a21,
            a22: self.a21 * rhs.a12 + self.a22 * rhs.a22,
        }
    }

    #[inline]
    pub fn apply(&self, v: Point<T>) -> Point<T> {
        Point::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_dist(&self, other: &Self) -> T {
        let d = [
            self.a11 - other.a11,
            self.a12 - other.a12,
            self.a21 - other.a21,
            self.a22 - other.a22,
        ];
        d.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a21 - other.a21).abs())
            .max((self.a22 - other.a22).abs())
    }

    /// Eigenvalues, smaller modulus first for a real pair, `re - i·im`
    /// first for a conjugate pair.
    pub fn eigenvalues(&self) -> [Complex<T>; 2] {
        let two = T::lit(2.0);
        let half_t = self.trace() / two;
        let det = self.det();
        let disc = half_t * half_t - det;
        if disc >= T::zero() {
            let root = disc.sqrt();
            // Avoid cancellation: form the larger root first.
            let big = if half_t >= T::zero() { half_t + root } else { half_t - root };
            let small = if big != T::zero() { det / big } else { half_t - root };
            [Complex::new(small, T::zero()), Complex::new(big, T::zero())]
        } else {
            let im = (-disc).sqrt();
            [Complex::new(half_t, -im), Complex::new(half_t, im)]
        }
    }

    /// Unit eigenvector for a real eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: T) -> Point<T> {
        let u = Point::new(self.a12, lambda - self.a11);
        let w = Point::new(lambda - self.a22, self.a21);
        let v = if u.norm() >= w.norm() { u } else { w };
        let n = v.norm();
        if n == T::zero() {
            // Scalar matrix: every vector is an eigenvector.
            return Point::new(T::one(), T::zero());
        }
        let v = v * (T::one() / n);
        if v.y < T::zero() || (v.y == T::zero() && v.x < T::zero()) {
            -v
        } else {
            v
        }
    }
}

/// The involutions and half-translations that generate the family's
/// symmetries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    /// `(x, y) ↦ (-x, y)`
    S1,
    /// `(x, y) ↦ (x, -y)`
    S2,
    /// `(x, y) ↦ (-x, -y)`
    S,
    /// `(x, y) ↦ (y, x)`
    D,
    /// Rotation by a quarter turn, `(x, y) ↦ (-y, x)`.
    R,
    /// `(x, y) ↦ (x + 1/2, y)`
    T1,
    /// `(x, y) ↦ (x, y + 1/2)`
    T2,
}

impl Symmetry {
    pub const ALL: [Symmetry; 7] = [
        Symmetry::S1,
        Symmetry::S2,
        Symmetry::S,
        Symmetry::D,
        Symmetry::R,
        Symmetry::T1,
        Symmetry::T2,
    ];

    #[inline]
    pub fn apply<T: Real>(self, z: Point<T>) -> Point<T> {
        match self {
            Symmetry::S1 => Point::new(-z.x, z.y),
            Symmetry::S2 => Point::new(z.x, -z.y),
            Symmetry::S => -z,
            Symmetry::D => Point::new(z.y, z.x),
            Symmetry::R => Point::new(-z.y, z.x),
            Symmetry::T1 => Point::new(z.x + T::half(), z.y),
            Symmetry::T2 => Point::new(z.x, z.y + T::half()),
        }
    }
}

/// Free-function form of [`Symmetry::apply`].
#[inline]
pub fn apply_symmetry<T: Real>(sym: Symmetry, z: Point<T>) -> Point<T> {
    sym.apply(z)
}

/// Local type of a fixed point, decided from the eigenvalues of `DF`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// Real eigenvalues off the unit circle.
    Hyperbolic,
    /// Conjugate pair on the unit circle.
    Elliptic,
    /// Double eigenvalue `-1`.
    Parabolic,
    /// `1` is an eigenvalue.
    NonElementary,
}

/// Band around the unit circle used to classify eigenvalues.
pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport<T> {
    pub location: Point<T>,
    pub jacobian: Jacobian2<T>,
    pub eigenvalues: [Complex<T>; 2],
    /// Unit eigenvectors, ordered like `eigenvalues`; empty for a complex pair.
    pub eigenvectors: Vec<Point<T>>,
    pub classification: FixedPointKind,
}

/// Classifies a fixed point from its Jacobian.
pub fn classify_fixed_point<T: Real>(jac: &Jacobian2<T>) -> (FixedPointKind, [Complex<T>; 2]) {
    let ev = jac.eigenvalues();
    let tol = T::lit(EIGEN_TOL);
    let one = Complex::new(T::one(), T::zero());
    let kind = if ev.iter().any(|l| (*l - one).norm() < tol) {
        FixedPointKind::NonElementary
    } else if ev[0].im != T::zero() {
        FixedPointKind::Elliptic
    } else if ev.iter().all(|l| (l.re.abs() - T::one()).abs() < tol) {
        FixedPointKind::Parabolic
    } else {
        FixedPointKind::Hyperbolic
    };
    (kind, ev)
}

/// Local analysis at the four fixed points `(0,0), (0,1/2), (1/2,0), (1/2,1/2)`.
///
/// Fails with [`Error::DegenerateParams`] when `αβ = 0`, where the fixed
/// set is a union of lines rather than four points.
pub fn fixed_points<T: Real>(p: &Params<T>) -> Result<Vec<FixedPointReport<T>>> {
    if p.alpha * p.beta == T::zero() {
        return Err(Error::DegenerateParams);
    }
    let h = T::half();
    let z = T::zero();
    let locations = [Point::new(z, z), Point::new(z, h), Point::new(h, z), Point::new(h, h)];
    Ok(locations
        .into_iter()
        .map(|location| {
            let jacobian = p.jacobian(location);
            let (classification, eigenvalues) = classify_fixed_point(&jacobian);
            let eigenvectors = if eigenvalues[0].im == T::zero() {
                eigenvalues.iter().map(|l| jacobian.eigenvector(l.re)).collect()
            } else {
                Vec::new()
            };
            FixedPointReport { location, jacobian, eigenvalues, eigenvectors, classification }
        })
        .collect())
}
