//! Convex polygons, Hausdorff distance, and inner approximations of the
//! rotation set from Birkhoff averages plus explicitly realized rotation
//! vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{Params, Symmetry};
use crate::orbits::{
    detect_crossing_with, iterate_stats, periodic_construction, CrossingAxis, RationalRotation,
    CROSSING_TOL,
};
use crate::point::Point;
use crate::seeds::{task_rng, R2Sequence};

type Z = Point<f64>;

/// Convex polygon with counterclockwise vertices. Degenerate polygons (a
/// point or a segment) have one or two vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ConvexPolygon {
    vertices: Vec<Z>,
}

impl From<Vec<[f64; 2]>> for ConvexPolygon {
    fn from(v: Vec<[f64; 2]>) -> Self {
        ConvexPolygon::hull(v.into_iter().map(Z::from_array))
    }
}

impl From<ConvexPolygon> for Vec<[f64; 2]> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices.into_iter().map(Z::to_array).collect()
    }
}

#[inline]
fn cross(o: Z, a: Z, b: Z) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn dist_to_segment(q: Z, a: Z, b: Z) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return q.dist(a);
    }
    let t = ((q - a).dot(ab) / len2).clamp(0.0, 1.0);
    q.dist(a + ab * t)
}

impl ConvexPolygon {
    /// Convex hull (monotone chain). Collinear and duplicate points are
    /// dropped.
    pub fn hull<I: IntoIterator<Item = Z>>(points: I) -> Self {
        let mut pts: Vec<Z> = points.into_iter().filter(|p| p.is_finite()).collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() <= 1 {
            return Self { vertices: pts };
        }
        let scale = pts.iter().fold(1.0_f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
        let eps = 1e-12 * scale * scale;
        let mut lower: Vec<Z> = Vec::with_capacity(pts.len());
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Z> = Vec::with_capacity(pts.len());
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() == 2 && lower[0].dist(lower[1]) <= eps.sqrt() {
            lower.truncate(1);
        }
        Self { vertices: lower }
    }

    /// Axis-aligned box `[x0,x1] × [y0,y1]`.
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self::hull([Z::new(x0, y0), Z::new(x1, y0), Z::new(x1, y1), Z::new(x0, y1)])
    }

    pub fn vertices(&self) -> &[Z] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Closes the polygon under `S1`, `S2` (and the quarter turn `R` when
    /// `with_rotation`), adding the origin.
    pub fn symmetrize(&self, with_rotation: bool) -> Self {
        Self::hull(symmetric_orbit(self.vertices.iter().copied(), with_rotation))
    }

    /// `max ⟨v, u⟩` over the polygon.
    pub fn support(&self, u: Z) -> f64 {
        self.vertices.iter().map(|v| v.dot(u)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean distance from `q` to the polygon (0 inside).
    pub fn dist_to_point(&self, q: Z) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => q.dist(self.vertices[0]),
            2 => dist_to_segment(q, self.vertices[0], self.vertices[1]),
            n => {
                let inside = (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], q) >= 0.0);
                if inside {
                    0.0
                } else {
                    (0..n)
                        .map(|i| dist_to_segment(q, self.vertices[i], self.vertices[(i + 1) % n]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    pub fn contains(&self, q: Z, tol: f64) -> bool {
        self.dist_to_point(q) <= tol
    }

    /// Bounding-box extents `(x_max - x_min, y_max - y_min)`.
    pub fn widths(&self) -> (f64, f64) {
        let ex = Z::new(1.0, 0.0);
        let ey = Z::new(0.0, 1.0);
        (self.support(ex) + self.support(-ex), self.support(ey) + self.support(-ey))
    }

    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d = 0.0_f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max(v[i].dist(v[j]));
            }
        }
        d
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("polygon serializes")
    }
}

fn symmetric_orbit<I: IntoIterator<Item = Z>>(points: I, with_rotation: bool) -> Vec<Z> {
    let mut out = vec![Z::origin()];
    for p in points {
        let images = [p, Symmetry::S1.apply(p), Symmetry::S2.apply(p), Symmetry::S.apply(p)];
        for q in images {
            out.push(q);
            if with_rotation {
                out.push(Symmetry::R.apply(q));
            }
        }
    }
    out
}

/// Number of support directions sampled by [`hausdorff`].
pub const HAUSDORFF_DIRECTIONS: usize = 720;

/// Hausdorff distance between two convex polygons.
///
/// For convex sets the distance from a point of `a` to `b` is maximized at a
/// vertex of `a`, so vertex-to-polygon distances give the exact value; the
/// support-function samples are a cross-check that can only raise it by
/// rounding.
pub fn hausdorff(a: &ConvexPolygon, b: &ConvexPolygon) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPolygon);
    }
    let vert = |p: &ConvexPolygon, q: &ConvexPolygon| {
        p.vertices.iter().map(|&v| q.dist_to_point(v)).fold(0.0_f64, f64::max)
    };
    let mut d = vert(a, b).max(vert(b, a));
    for k in 0..HAUSDORFF_DIRECTIONS {
        let t = std::f64::consts::TAU * k as f64 / HAUSDORFF_DIRECTIONS as f64;
        let u = Z::new(t.cos(), t.sin());
        d = d.max((a.support(u) - b.support(u)).abs());
    }
    Ok(d)
}

/// Coarse shape of a rotation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Origin,
    HorizontalSegment,
    VerticalSegment,
    FullDim,
}

pub fn shape_classify(poly: &ConvexPolygon, tol: f64) -> Shape {
    if poly.diameter() < tol {
        return Shape::Origin;
    }
    let (wx, wy) = poly.widths();
    match (wx < tol, wy < tol) {
        (true, false) => Shape::VerticalSegment,
        (false, true) => Shape::HorizontalSegment,
        _ => Shape::FullDim,
    }
}

/// Sampling budget for [`approx_rotation_set`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotsetBudget {
    pub n_orbits: usize,
    pub n_iters: u64,
    pub seed: u64,
    /// Largest iterate searched for half-integer line crossings.
    pub crossing_depth: u64,
    /// Grid points per unit length in the crossing search.
    pub crossing_grid: usize,
}

impl Default for RotsetBudget {
    fn default() -> Self {
        Self { n_orbits: 256, n_iters: 100_000, seed: 0, crossing_depth: 6, crossing_grid: 2048 }
    }
}

impl RotsetBudget {
    pub fn new(n_orbits: usize, n_iters: u64, seed: u64) -> Self {
        Self { n_orbits, n_iters, seed, ..Self::default() }
    }
}

/// Crossing-based rotation vectors: for each depth `n`, finds a seed on the
/// axis whose `n`-th iterate lies on the highest half-integer line reached
/// by the orbit family, and confirms it with the doubled-orbit identity.
pub fn crossing_rotations(p: &Params<f64>, depth: u64, grid: usize) -> Vec<RationalRotation> {
    let mut out = Vec::new();
    for axis in [CrossingAxis::Vertical, CrossingAxis::Horizontal] {
        let seed_at = |t: f64| match axis {
            CrossingAxis::Vertical => Z::new(t, 0.0),
            CrossingAxis::Horizontal => Z::new(0.0, t),
        };
        let coord = |z: Z| match axis {
            CrossingAxis::Vertical => z.y,
            CrossingAxis::Horizontal => z.x,
        };
        for n in 1..=depth {
            let eval = |t: f64| coord(p.iterate_f(seed_at(t), n));
            let ts: Vec<f64> = (0..=grid).map(|i| i as f64 / grid as f64).collect();
            let vals: Vec<f64> = ts.iter().map(|&t| eval(t)).collect();
            let (imax, &vmax) = vals
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty grid");
            let k = (2.0 * vmax).floor();
            if k < 1.0 {
                continue;
            }
            let level = 0.5 * k;
            // Nearest grid point below the level on either side of the
            // maximum; its neighbour towards the maximum is at or above it.
            let bracket = (0..imax)
                .rev()
                .find(|&i| vals[i] < level)
                .map(|i| (ts[i], ts[i + 1]))
                .or_else(|| (imax + 1..=grid).find(|&i| vals[i] < level).map(|i| (ts[i], ts[i - 1])));
            let Some((mut lo, mut hi)) = bracket else {
                continue;
            };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if eval(mid) < level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = if (eval(lo) - level).abs() <= (eval(hi) - level).abs() { lo } else { hi };
            if let Ok(Some(r)) = detect_crossing_with(p, seed_at(t), n, axis, CROSSING_TOL) {
                out.push(r);
            }
        }
    }
    out
}

/// All explicitly realized rotation vectors used to seed the hull.
pub fn exact_rotations(p: &Params<f64>, budget: &RotsetBudget) -> Vec<RationalRotation> {
    let amp = p.alpha.abs().min(p.beta.abs());
    let n_top = (amp.floor() as u64).clamp(1, 64);
    let mut out: Vec<RationalRotation> = (1..=n_top).flat_map(|n| periodic_construction(p, n)).collect();
    out.extend(crossing_rotations(p, budget.crossing_depth, budget.crossing_grid));
    out
}

/// Inner approximation of `ρ(F_{α,β})`.
pub fn approx_rotation_set(p: &Params<f64>, budget: &RotsetBudget) -> ConvexPolygon {
    let n = budget.n_iters.max(1);
    let seeds: Vec<Z> = R2Sequence::new(budget.seed).take(budget.n_orbits).collect();
    let mut pts: Vec<Z> = seeds.par_iter().map(|&z| iterate_stats(p, z, n).birkhoff).collect();
    pts.extend(exact_rotations(p, budget).iter().map(RationalRotation::as_point));
    ConvexPolygon::hull(symmetric_orbit(pts, p.on_diagonal()))
}

/// Where [`continuity_probe`] draws perturbed parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeRegion {
    /// Uniform in the disc of the given radius.
    Ball,
    /// Uniform in `[α, α + r/√2] × [β, β + r/√2]`.
    UpperQuadrant,
}

/// Largest Hausdorff distance between the approximation at `p` and at
/// `n_samples` perturbed parameters.
pub fn continuity_probe(
    p: &Params<f64>,
    radius: f64,
    n_samples: usize,
    budget: &RotsetBudget,
    region: ProbeRegion,
) -> f64 {
    use rand::Rng;
    let base = approx_rotation_set(p, budget);
    let mut rng = task_rng(budget.seed, 0x5052_4f42, 0);
    let params: Vec<Params<f64>> = (0..n_samples)
        .map(|_| match region {
            ProbeRegion::Ball => {
                let r = radius * rng.gen::<f64>().sqrt();
                let t = std::f64::consts::TAU * rng.gen::<f64>();
                Params::new(p.alpha + r * t.cos(), p.beta + r * t.sin())
            }
            ProbeRegion::UpperQuadrant => {
                let side = radius / std::f64::consts::SQRT_2;
                Params::new(p.alpha + side * rng.gen::<f64>(), p.beta + side * rng.gen::<f64>())
            }
        })
        .collect();
    params
        .iter()
        .map(|q| hausdorff(&base, &approx_rotation_set(q, budget)).expect("nonempty hulls"))
        .fold(0.0, f64::max)
}

/// One step of the diagonal nesting experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestingStep {
    pub alpha: f64,
    pub polygon: ConvexPolygon,
    /// Largest distance from a vertex of this hull to the next hull along
    /// the diagonal (0 when nested).
    pub excess_over_next: f64,
}

/// Approximates `ρ(F_{α,α})` along increasing `alphas` and reports how far
/// each hull sticks out of the next one.
pub fn diagonal_nesting(alphas: &[f64], budget: &RotsetBudget) -> Vec<NestingStep> {
    let polys: Vec<ConvexPolygon> =
        alphas.iter().map(|&a| approx_rotation_set(&Params::new(a, a), budget)).collect();
    (0..polys.len())
        .map(|i| {
            let excess = polys.get(i + 1).map_or(0.0, |next| {
                polys[i].vertices.iter().map(|&v| next.dist_to_point(v)).fold(0.0, f64::max)
            });
            NestingStep { alpha: alphas[i], polygon: polys[i].clone(), excess_over_next: excess }
        })
        .collect()
}
