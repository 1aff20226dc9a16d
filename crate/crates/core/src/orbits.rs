//! Orbit iteration with displacement tracking, half-integer line crossings,
//! the Lebesgue mean rotation vector and the explicit periodic orbits.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::Params;
use crate::point::Point;
use crate::scalar::{sin_turns, Real};

/// Running displacement record of one orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitStats<T> {
    pub n_iters: u64,
    /// `max_k |x_k - x_0|`
    pub dx_max: T,
    /// `max_k |y_k - y_0|`
    pub dy_max: T,
    /// `(F^n(z) - z) / n`
    pub birkhoff: Point<T>,
    pub seed: Point<T>,
}

/// Iterates `F` `n` times from `seed`, tracking the largest displacement on
/// each axis.
pub fn iterate_stats<T: Real>(p: &Params<T>, seed: Point<T>, n: u64) -> OrbitStats<T> {
    iterate_until(p, seed, n, None)
}

/// Like [`iterate_stats`] but stops as soon as both `dx_max` and `dy_max`
/// reach `threshold`; `n_iters` is then the number of steps actually taken.
pub fn iterate_until<T: Real>(
    p: &Params<T>,
    seed: Point<T>,
    n: u64,
    threshold: Option<T>,
) -> OrbitStats<T> {
    let mut z = seed;
    let mut dx_max = T::zero();
    let mut dy_max = T::zero();
    let mut k = 0;
    while k < n {
        z = p.lift_f(z);
        k += 1;
        dx_max = dx_max.max((z.x - seed.x).abs());
        dy_max = dy_max.max((z.y - seed.y).abs());
        if let Some(th) = threshold {
            if dx_max >= th && dy_max >= th {
                break;
            }
        }
    }
    let scale = if k == 0 { T::zero() } else { T::one() / T::from_u64(k).expect("count fits") };
    OrbitStats { n_iters: k, dx_max, dy_max, birkhoff: (z - seed) * scale, seed }
}

/// A rotation vector `v / q` realized by an explicit periodic orbit:
/// `F^q(witness) = witness + v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalRotation {
    pub vector: [Rational64; 2],
    pub witness: Point<f64>,
    pub period: u64,
}

impl RationalRotation {
    fn new(v: (i64, i64), q: u64, witness: Point<f64>) -> Self {
        let qi = q as i64;
        Self { vector: [Rational64::new(v.0, qi), Rational64::new(v.1, qi)], witness, period: q }
    }

    pub fn as_point(&self) -> Point<f64> {
        let f = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
        Point::new(f(self.vector[0]), f(self.vector[1]))
    }

    /// `|F^q(witness) - witness - q·vector|_∞`.
    pub fn residual(&self, p: &Params<f64>) -> f64 {
        let w = p.iterate_f(self.witness, self.period);
        let q = self.period as f64;
        let target = self.witness + self.as_point() * q;
        w.dist_inf(target)
    }
}

/// Distance below which an iterate counts as lying on a half-integer line.
pub const CROSSING_TOL: f64 = 1e-9;
/// Tolerance for the doubled-orbit identity that confirms a crossing.
pub const CROSSING_VERIFY_TOL: f64 = 1e-6;

/// Which family of half-integer lines a crossing search targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingAxis {
    /// Seed on `y = 0`, crossing of a line `R × {k/2}`.
    Vertical,
    /// Seed on `x = 0`, crossing of a line `{k/2} × R`.
    Horizontal,
}

/// Looks for the first `n ≤ n_max` with `F^n(seed)` on a line `R × {k/2}`,
/// `k ≠ 0`. The seed must lie on `y = 0`. Such a hit forces
/// `F^{2n}(seed) = seed + (0, k)` and hence the rotation vector `(0, k/2n)`.
pub fn detect_half_line_crossing(
    p: &Params<f64>,
    seed_on_axis: Point<f64>,
    n_max: u64,
) -> Result<Option<RationalRotation>> {
    detect_crossing_with(p, seed_on_axis, n_max, CrossingAxis::Vertical, CROSSING_TOL)
}

/// Horizontal counterpart of [`detect_half_line_crossing`]: seed on `x = 0`,
/// target lines `{k/2} × R`, rotation `(k/2n, 0)`.
pub fn detect_half_line_crossing_horizontal(
    p: &Params<f64>,
    seed_on_axis: Point<f64>,
    n_max: u64,
) -> Result<Option<RationalRotation>> {
    detect_crossing_with(p, seed_on_axis, n_max, CrossingAxis::Horizontal, CROSSING_TOL)
}

pub fn detect_crossing_with(
    p: &Params<f64>,
    seed: Point<f64>,
    n_max: u64,
    axis: CrossingAxis,
    tol: f64,
) -> Result<Option<RationalRotation>> {
    let coord = |z: Point<f64>| match axis {
        CrossingAxis::Vertical => z.y,
        CrossingAxis::Horizontal => z.x,
    };
    let mut z = seed;
    for n in 1..=n_max {
        z = p.lift_f(z);
        let c = coord(z);
        let k = (2.0 * c).round();
        if k == 0.0 || (c - 0.5 * k).abs() >= tol {
            continue;
        }
        let k = k as i64;
        let (v, shift) = match axis {
            CrossingAxis::Vertical => ((0, k), Point::new(0.0, k as f64)),
            CrossingAxis::Horizontal => ((k, 0), Point::new(k as f64, 0.0)),
        };
        let back = p.iterate_f(z, n);
        let miss = back.dist_inf(seed + shift);
        if !(miss <= CROSSING_VERIFY_TOL) {
            return Err(Error::ToleranceAmbiguous { n, k, miss });
        }
        return Ok(Some(RationalRotation::new(v, 2 * n, seed)));
    }
    Ok(None)
}

/// Midpoint-rule integral of the one-step displacement over the unit square.
pub fn mean_rotation_vector<T: Real>(p: &Params<T>, grid: usize) -> Point<T> {
    let g = T::from_usize(grid).expect("grid fits");
    let mut acc = Point::origin();
    for i in 0..grid {
        let x = (T::from_usize(i).expect("index fits") + T::half()) / g;
        let sx = sin_turns(x);
        let mut row = Point::origin();
        for j in 0..grid {
            let y = (T::from_usize(j).expect("index fits") + T::half()) / g;
            row += Point::new(p.alpha * sin_turns(y + p.beta * sx), p.beta * sx);
        }
        acc += row;
    }
    acc * (T::one() / (g * g))
}

const PERIODIC_VERIFY_TOL: f64 = 1e-8;

/// Explicit periodic orbits available from the kick amplitudes alone.
///
/// With `|α|, |β| ≥ n` the points `(±x, ±y)`, `s(x) = n/β`, `s(y) = n/α`,
/// are translated by `(±n, ±n)` in one step. With `|α| ≥ 1/2` the point
/// `(0, y)`, `s(y) = 1/(2α)`, satisfies `F²(0, y) = (1, y)`; likewise
/// vertically when `|β| ≥ 1/2`. Every returned orbit has been checked by
/// direct iteration.
pub fn periodic_construction(p: &Params<f64>, n: u64) -> Vec<RationalRotation> {
    let mut out = Vec::new();
    let nf = n as f64;
    let (a, b) = (p.alpha, p.beta);
    let mut push_checked = |r: RationalRotation| {
        if r.residual(p) <= PERIODIC_VERIFY_TOL {
            out.push(r);
        }
    };
    if n >= 1 && a.abs() >= nf && b.abs() >= nf {
        let x = (nf / b).asin() / std::f64::consts::TAU;
        let y = (nf / a).asin() / std::f64::consts::TAU;
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            let w = Point::new(sx * x, sy * y);
            let d = p.lift_f(w) - w;
            let v = (d.x.round() as i64, d.y.round() as i64);
            push_checked(RationalRotation::new(v, 1, w));
        }
    }
    if a.abs() >= 0.5 {
        let y = (0.5 / a).asin() / std::f64::consts::TAU;
        for w in [Point::new(0.0, y), Point::new(0.0, -y)] {
            let d = p.iterate_f(w, 2) - w;
            push_checked(RationalRotation::new((d.x.round() as i64, 0), 2, w));
        }
    }
    if b.abs() >= 0.5 {
        let x = (0.5 / b).asin() / std::f64::consts::TAU;
        for w in [Point::new(x, 0.0), Point::new(-x, 0.0)] {
            let d = p.iterate_f(w, 2) - w;
            push_checked(RationalRotation::new((0, d.y.round() as i64), 2, w));
        }
    }
    out
}
