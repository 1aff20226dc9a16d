//! Conservative numerical bounds: Jacobian Lipschitz constants, certified
//! maxima of line functionals, half-plane confinement of the rotation set,
//! the two mode-locking verifications, the minimal-variation functional and a
//! replay of the vertical drift construction for large horizontal kicks.
//!
//! Upper-bound arithmetic is padded by the factor `1 + 2⁻⁴⁰` instead of
//! directed rounding. These are careful floating point bounds, not
//! machine-checked proofs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::Params;
use crate::orbits::periodic_construction;
use crate::point::Point;
use crate::rotset::ConvexPolygon;
use crate::scalar::sin_turns;

type Z = Point<f64>;

/// Multiplicative guard applied to every upper bound.
pub const GUARD: f64 = 1.0 + 1.0 / (1u64 << 40) as f64;

/// Upper bound for the Lipschitz constant of `F^power`: `L^power` with `L`
/// the Frobenius norm of the entrywise worst case of `DF`.
pub fn lipschitz_bound(p: &Params<f64>, power: u32) -> f64 {
    let tau = std::f64::consts::TAU;
    let (a, b) = (p.alpha.abs(), p.beta.abs());
    let d = 1.0 + tau * tau * a * b;
    let l = (d * d + (tau * a).powi(2) + (tau * b).powi(2) + 1.0).sqrt() * GUARD;
    l.powi(power as i32) * GUARD
}

/// Certified upper bound of a scalar functional sampled on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertBound {
    pub grid_max: f64,
    #[serde(rename = "step")]
    pub grid_step: f64,
    pub lipschitz: f64,
    pub rigorous_bound: f64,
    pub target: f64,
    pub verdict: bool,
}

/// The line `⟨z, v⟩ = c` for an integer normal `v`, parameterized over one
/// period by `origin + t·direction`, `t ∈ [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub origin: Z,
    pub direction: Z,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Line {
    pub fn from_normal(v: [i64; 2], c: f64) -> Result<Self> {
        let g = gcd(v[0], v[1]);
        if g == 0 {
            return Err(Error::InvalidInput("normal vector must be nonzero".into()));
        }
        let vf = Z::new(v[0] as f64, v[1] as f64);
        let origin = vf * (c / vf.dot(vf));
        let direction = Z::new((v[1] / g) as f64, (-v[0] / g) as f64);
        Ok(Self { origin, direction })
    }

    #[inline]
    pub fn at(&self, t: f64) -> Z {
        self.origin + self.direction * t
    }
}

/// `⟨F^power(z) - z, v⟩`.
#[inline]
fn functional(p: &Params<f64>, power: u32, v: Z, z: Z) -> f64 {
    (p.iterate_f(z, power as u64) - z).dot(v)
}

/// Samples `⟨F^power(z) - z, v⟩` on `line` at spacing `step` in the line
/// parameter and bounds its maximum over the whole line by
/// `grid_max + lipschitz·step` (padded for rounding).
pub fn certified_line_max(
    p: &Params<f64>,
    power: u32,
    line: &Line,
    v: [i64; 2],
    step: f64,
    target: f64,
) -> Result<CertBound> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidInput(format!("step {step} outside (0, 1]")));
    }
    if power == 0 {
        return Err(Error::InvalidInput("power must be at least 1".into()));
    }
    let vf = Z::new(v[0] as f64, v[1] as f64);
    let n = (1.0 / step).ceil() as u64;
    const CHUNK: u64 = 1 << 14;
    let grid_max = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(n))
                .map(|k| functional(p, power, vf, line.at(k as f64 * step)))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let lipschitz = lipschitz_bound(p, power) * line.direction.norm() * vf.norm() * GUARD;
    // Rounding in evaluating F^power is amplified by at most its Lipschitz constant.
    let eval_slack = lipschitz * 16.0 * f64::EPSILON * (power as f64 + 1.0) * (1.0 + line.origin.norm());
    let raw = grid_max + lipschitz * step + eval_slack;
    let rigorous_bound = raw + raw.abs() * (GUARD - 1.0);
    Ok(CertBound { grid_max, grid_step: step, lipschitz, rigorous_bound, target, verdict: rigorous_bound < target })
}

/// Input of [`half_plane_confinement`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertRequest {
    /// Integer normal of the line and of the half-plane.
    pub v: [i64; 2],
    /// Integer translation claimed to push the half-plane into itself.
    pub u: [i64; 2],
    pub c: f64,
    pub power: u32,
    pub step: f64,
    /// Defaults to `⟨u, v⟩`; lowering it makes the claim stricter.
    pub target: Option<f64>,
}

impl CertRequest {
    pub fn uv(&self) -> f64 {
        (self.u[0] * self.v[0] + self.u[1] * self.v[1]) as f64
    }
}

/// A checked half-plane bound `max ⟨ρ(F), v⟩ ≤ ⟨u, v⟩ / power`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneCertificate {
    pub params: Params<f64>,
    pub v: [i64; 2],
    pub u: [i64; 2],
    pub c: f64,
    pub power: u32,
    #[serde(flatten)]
    pub bound: CertBound,
    /// Upper bound on `⟨w, v⟩` over the rotation set, meaningful when the
    /// verdict holds.
    pub implied_support: f64,
}

/// Runs the line computation for `req` and returns the certificate whether
/// or not it verifies.
pub fn half_plane_bound(p: &Params<f64>, req: &CertRequest) -> Result<HalfPlaneCertificate> {
    let line = Line::from_normal(req.v, req.c)?;
    let target = req.target.unwrap_or_else(|| req.uv());
    let bound = certified_line_max(p, req.power, &line, req.v, req.step, target)?;
    Ok(HalfPlaneCertificate {
        params: *p,
        v: req.v,
        u: req.u,
        c: req.c,
        power: req.power,
        bound,
        implied_support: req.uv() / req.power as f64,
    })
}

/// Like [`half_plane_bound`] but fails with [`Error::NotCertified`] when the
/// rigorous bound does not beat the target.
pub fn half_plane_confinement(p: &Params<f64>, req: &CertRequest) -> Result<HalfPlaneCertificate> {
    let cert = half_plane_bound(p, req)?;
    if !cert.bound.verdict {
        return Err(Error::NotCertified { rigorous_bound: cert.bound.rigorous_bound, target: cert.bound.target });
    }
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLock {
    /// `ρ(F_{1,1}) = [-1, 1]²`.
    Square11,
    /// `ρ(F_{1/2,1/2}) = {|x| + |y| ≤ 1/2}`.
    DiamondHalf,
}

impl ModeLock {
    pub fn params(self) -> Params<f64> {
        match self {
            ModeLock::Square11 => Params::new(1.0, 1.0),
            ModeLock::DiamondHalf => Params::new(0.5, 0.5),
        }
    }

    pub fn request(self, step: f64, target: Option<f64>) -> CertRequest {
        match self {
            ModeLock::Square11 => CertRequest { v: [0, 1], u: [0, 2], c: 0.125, power: 2, step, target },
            ModeLock::DiamondHalf => CertRequest { v: [1, 1], u: [2, 0], c: 0.0, power: 4, step, target },
        }
    }

    /// The rotation set the certificate pins down.
    pub fn claimed_set(self) -> ConvexPolygon {
        match self {
            ModeLock::Square11 => ConvexPolygon::rect(-1.0, 1.0, -1.0, 1.0),
            ModeLock::DiamondHalf => ConvexPolygon::hull([
                Z::new(0.5, 0.0),
                Z::new(0.0, 0.5),
                Z::new(-0.5, 0.0),
                Z::new(0.0, -0.5),
            ]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelockOptions {
    pub step: f64,
    pub target: Option<f64>,
    /// Offset of the perturbed parameter corners.
    pub corner_delta: f64,
}

impl Default for ModelockOptions {
    fn default() -> Self {
        Self { step: 1e-6, target: None, corner_delta: 1e-4 }
    }
}

/// Certificate results at one perturbed parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerCheck {
    pub params: Params<f64>,
    /// Upper bounds certified at these parameters.
    pub certified: bool,
    pub rigorous_bounds: Vec<f64>,
    /// Whether the explicit periodic orbits realize every vertex of the
    /// claimed set here.
    pub vertices_realized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelockReport {
    pub which: ModeLock,
    pub params: Params<f64>,
    pub certificate: HalfPlaneCertificate,
    /// Explicit periodic orbits realizing the vertices of `rotation_set`.
    pub exact_vertices: Vec<[f64; 2]>,
    pub rotation_set: ConvexPolygon,
    pub corners: Vec<CornerCheck>,
    pub verdict: bool,
}

fn realized_vertices(which: ModeLock, p: &Params<f64>) -> (Vec<[f64; 2]>, bool) {
    let claimed = which.claimed_set();
    let found: Vec<Z> = periodic_construction(p, 1).iter().map(|r| r.as_point()).collect();
    let hits: Vec<[f64; 2]> = claimed
        .vertices()
        .iter()
        .filter(|v| found.iter().any(|f| f.dist(**v) == 0.0))
        .map(|v| v.to_array())
        .collect();
    let all = hits.len() == claimed.vertices().len();
    (hits, all)
}

/// Certificates needed at `p` to bound the claimed set from outside. The
/// square needs the horizontal side too, obtained from the swapped
/// parameters via the diagonal and translation symmetries.
fn outer_certificates(which: ModeLock, p: &Params<f64>, req: &CertRequest) -> Result<Vec<HalfPlaneCertificate>> {
    let mut out = vec![half_plane_bound(p, req)?];
    if which == ModeLock::Square11 && !p.on_diagonal() {
        out.push(half_plane_bound(&Params::new(p.beta, p.alpha), req)?);
    }
    Ok(out)
}

/// Verifies one of the two mode-locking statements: an outer bound from a
/// half-plane certificate closed under the symmetries of the family, and the
/// matching inner bound from explicit periodic orbits. The certificate is
/// re-run at the four corners `(α ± d, β ± d)`.
pub fn modelock_verify(which: ModeLock, opts: &ModelockOptions) -> Result<ModelockReport> {
    let p = which.params();
    let req = which.request(opts.step, opts.target);
    let certificate = half_plane_confinement(&p, &req)?;
    let (exact_vertices, realized) = realized_vertices(which, &p);
    let d = opts.corner_delta;
    let corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(sa, sb)| {
            let q = Params::new(p.alpha + sa * d, p.beta + sb * d);
            let certs = outer_certificates(which, &q, &req)?;
            Ok(CornerCheck {
                params: q,
                certified: certs.iter().all(|c| c.bound.verdict),
                rigorous_bounds: certs.iter().map(|c| c.bound.rigorous_bound).collect(),
                vertices_realized: realized_vertices(which, &q).1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = realized && corners.iter().all(|c| c.certified);
    Ok(ModelockReport {
        which,
        params: p,
        certificate,
        exact_vertices,
        rotation_set: which.claimed_set(),
        corners,
        verdict,
    })
}

/// Range of `sin(2πx)` on `[t, t + delta]`, with exact interior extrema.
fn sin_window_range(t: f64, delta: f64) -> f64 {
    let (a, b) = (sin_turns(t), sin_turns(t + delta));
    let contains = |c: f64| (t + delta - c).floor() >= (t - c).ceil();
    let hi = if contains(0.25) { 1.0 } else { a.max(b) };
    let lo = if contains(0.75) { -1.0 } else { a.min(b) };
    hi - lo
}

/// `Var_{amplitude·s}(delta)`: the least oscillation of `amplitude·sin(2πx)`
/// over windows of length `delta`, minimized over `grid` window starts in one
/// period. Window extrema are exact, so the only error is the start grid.
pub fn var_min(amplitude: f64, delta: f64, grid: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} outside (0, 1)")));
    }
    if grid < 1000 {
        return Err(Error::InvalidInput(format!("grid = {grid} below 1000")));
    }
    let m = (0..grid)
        .map(|i| sin_window_range(i as f64 / grid as f64, delta))
        .fold(f64::INFINITY, f64::min);
    Ok(amplitude.abs() * m)
}

/// `(8/π)/√α`, the analytic ceiling for the diffusion threshold.
pub fn beta_plus_bound(alpha: f64) -> f64 {
    8.0 / std::f64::consts::PI / alpha.sqrt()
}

/// Outcome of [`drift_witness`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub params: Params<f64>,
    pub delta: f64,
    pub steps: usize,
    /// Lowest height of the tracked arc after the last step.
    pub final_min_y: f64,
    pub average: f64,
    /// `β - δ`, the drift rate the construction guarantees.
    pub guaranteed_rate: f64,
    pub max_points: usize,
    /// `average ≥ 0.9·(β - δ)`.
    pub verdict: bool,
}

/// Maps every point of a polyline and inserts pre-image midpoints until
/// consecutive images are at most `h` apart.
fn map_refined(arc: &[Z], f: impl Fn(Z) -> Z, h: f64, max_points: usize, step: usize) -> Result<Vec<Z>> {
    let mut out = Vec::with_capacity(arc.len() * 2);
    out.push(f(arc[0]));
    for w in arc.windows(2) {
        let mut stack = vec![(w[0], w[1], f(w[1]))];
        let mut prev_img = *out.last().expect("nonempty");
        let mut prev_pre = w[0];
        while let Some((a, b, fb)) = stack.pop() {
            debug_assert_eq!(a, prev_pre);
            if prev_img.dist(fb) <= h || a.dist(b) < 1e-13 {
                out.push(fb);
                prev_img = fb;
                prev_pre = b;
            } else {
                let m = (a + b) * 0.5;
                stack.push((m, b, fb));
                stack.push((a, m, f(m)));
            }
            if out.len() > max_points {
                return Err(Error::CurveLost { step, reason: "arc exceeded point budget" });
            }
        }
    }
    Ok(out)
}

/// Linear point on segment `a → b` where coordinate `k` equals `level`.
fn cut(a: Z, b: Z, k: usize, level: f64) -> Z {
    let (ca, cb) = if k == 0 { (a.x, b.x) } else { (a.y, b.y) };
    let t = if cb == ca { 0.0 } else { (level - ca) / (cb - ca) };
    a + (b - a) * t
}

/// First sub-arc lying in the slab `lo < coord < hi` that enters through
/// one side and leaves through the other (touching counts); its ends are
/// clipped to the slab.
fn crossing_subarc(arc: &[Z], k: usize, lo: f64, hi: f64) -> Option<Vec<Z>> {
    let c = |z: &Z| if k == 0 { z.x } else { z.y };
    let side = |z: &Z| {
        let v = c(z);
        if v <= lo {
            -1
        } else if v >= hi {
            1
        } else {
            0
        }
    };
    let mut i = 0;
    while i < arc.len() {
        if side(&arc[i]) != 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < arc.len() && side(&arc[i]) == 0 {
            i += 1;
        }
        let end = i; // exclusive
        if start == 0 || end == arc.len() {
            continue;
        }
        let (s0, s1) = (side(&arc[start - 1]), side(&arc[end]));
        if s0 != s1 {
            let lvl = |s: i32| if s < 0 { lo } else { hi };
            let mut sub = Vec::with_capacity(end - start + 2);
            sub.push(cut(arc[start - 1], arc[start], k, lvl(s0)));
            sub.extend_from_slice(&arc[start..end]);
            sub.push(cut(arc[end - 1], arc[end], k, lvl(s1)));
            return Some(sub);
        }
    }
    None
}

/// Shortest sub-arc whose horizontal extent is at least `width`.
fn shortest_span(arc: &[Z], width: f64) -> Option<Vec<Z>> {
    use std::collections::VecDeque;
    let mut best: Option<(usize, usize)> = None;
    let (mut qmax, mut qmin) = (VecDeque::new(), VecDeque::new());
    let mut i = 0;
    for j in 0..arc.len() {
        while qmax.back().is_some_and(|&b: &usize| arc[b].x <= arc[j].x) {
            qmax.pop_back();
        }
        qmax.push_back(j);
        while qmin.back().is_some_and(|&b: &usize| arc[b].x >= arc[j].x) {
            qmin.pop_back();
        }
        qmin.push_back(j);
        while arc[qmax[0]].x - arc[qmin[0]].x >= width {
            if best.map_or(true, |(a, b)| j - i < b - a) {
                best = Some((i, j));
            }
            i += 1;
            while qmax[0] < i {
                qmax.pop_front();
            }
            while qmin[0] < i {
                qmin.pop_front();
            }
        }
    }
    best.map(|(a, b)| arc[a..=b].to_vec())
}

/// Replays the inductive arc construction behind the vertical drift bound:
/// starting from the segment `[0,1] × {0}`, each step keeps a sub-arc of the
/// image that spans one unit horizontally and lies in the slab
/// `n(β-δ) ≤ y ≤ n(β-δ) + δ`. Requires `Var_{αs}(δ) ≥ 2` and `δ ≤ β/2`.
pub fn drift_witness(p: &Params<f64>, delta: f64, steps: usize, spacing: f64) -> Result<DriftReport> {
    let (a, b) = (p.alpha, p.beta);
    if !(b > 0.0 && delta > 0.0 && delta <= b / 2.0) {
        return Err(Error::InvalidInput(format!("need 0 < delta <= beta/2, got delta = {delta}, beta = {b}")));
    }
    if var_min(a, delta, 4096)? < 2.0 {
        return Err(Error::InvalidInput("horizontal kick too weak: Var < 2".into()));
    }
    const MAX_POINTS: usize = 2_000_000;
    let n0 = (1.0 / spacing).ceil() as usize;
    let mut arc: Vec<Z> = (0..=n0).map(|i| Z::new(i as f64 / n0 as f64, 0.0)).collect();
    let mut max_points = arc.len();
    let rate = b - delta;
    for n in 1..=steps {
        let level = n as f64 * rate;
        let lifted = map_refined(&arc, |z| p.shear_v(z), spacing, MAX_POINTS, n)?;
        let gamma = crossing_subarc(&lifted, 1, level, level + delta)
            .ok_or(Error::CurveLost { step: n, reason: "no sub-arc crosses the slab" })?;
        let sheared = map_refined(&gamma, |z| p.shear_h(z), spacing, MAX_POINTS, n)?;
        max_points = max_points.max(sheared.len());
        arc = shortest_span(&sheared, 1.0)
            .ok_or(Error::CurveLost { step: n, reason: "image does not span a unit width" })?;
    }
    let final_min_y = arc.iter().map(|z| z.y).fold(f64::INFINITY, f64::min);
    let average = final_min_y / steps as f64;
    Ok(DriftReport {
        params: *p,
        delta,
        steps,
        final_min_y,
        average,
        guaranteed_rate: rate,
        max_points,
        verdict: average >= 0.9 * rate,
    })
}
