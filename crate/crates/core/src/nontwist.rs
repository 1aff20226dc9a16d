//! The standard non-twist map `S_{a,b}(x, y) = V_b(x + a - κy², y)`,
//! `κ = 4π²`, the rescaling `Φ_α(x, y) = (x, √(κα)(y - 1/4))` of the
//! conjugate lift `G`, and the experiments comparing rescaled Harper maps
//! with the non-twist family.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{classify_pixel, pixel_seed, PixelBudget, PixelVerdict, Verdict, Witness};
use crate::error::{Error, Result};
use crate::map::{Jacobian2, Params};
use crate::point::Point;
use crate::scalar::{cos_turns, frac_centered, sin_turns, Real};
use crate::seeds::task_rng;

/// `κ = 4π² = |s''(1/4)|`.
pub fn kappa<T: Real>() -> T {
    T::TAU() * T::TAU()
}

/// Parameters `(a, b)` of `S_{a,b}`; `a` only matters mod 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NontwistParams<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> NontwistParams<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }
}

/// Lift of the standard non-twist map.
#[inline]
pub fn nontwist_lift<T: Real>(q: &NontwistParams<T>, z: Point<T>) -> Point<T> {
    let x = z.x + q.a - kappa::<T>() * z.y * z.y;
    Point::new(x, z.y + q.b * sin_turns(x))
}

pub fn nontwist_jacobian<T: Real>(q: &NontwistParams<T>, z: Point<T>) -> Jacobian2<T> {
    let x = z.x + q.a - kappa::<T>() * z.y * z.y;
    let dx_dy = -(T::one() + T::one()) * kappa::<T>() * z.y;
    let c = T::TAU() * q.b * cos_turns(x);
    Jacobian2 { a11: T::one(), a12: dx_dy, a21: c, a22: T::one() + c * dx_dy }
}

/// `Φ_α(x, y) = (x, √(κα)(y - 1/4))`.
pub fn phi<T: Real>(alpha: T, z: Point<T>) -> Point<T> {
    Point::new(z.x, (kappa::<T>() * alpha).sqrt() * (z.y - T::lit(0.25)))
}

pub fn phi_inv<T: Real>(alpha: T, z: Point<T>) -> Point<T> {
    Point::new(z.x, z.y / (kappa::<T>() * alpha).sqrt() + T::lit(0.25))
}

/// `G̃ = Φ_α ∘ G_{α,β} ∘ Φ_α⁻¹`.
pub fn rescaled_g<T: Real>(p: &Params<T>, z: Point<T>) -> Result<Point<T>> {
    if !(p.alpha > T::zero()) {
        return Err(Error::NonpositiveAlpha(p.alpha.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(phi(p.alpha, p.lift_g(phi_inv(p.alpha, z))))
}

/// `V_{√(κα)β} ∘ G̃_{α,0}`, the split form of [`rescaled_g`].
pub fn rescaled_g_split<T: Real>(p: &Params<T>, z: Point<T>) -> Result<Point<T>> {
    let w = rescaled_g(&Params::new(p.alpha, T::zero()), z)?;
    let b = (kappa::<T>() * p.alpha).sqrt() * p.beta;
    Ok(Point::new(w.x, w.y + b * sin_turns(w.x)))
}

/// The rescaled horizontal-shear map written in the coordinates where its
/// limit is `S_{α₀,0}`: the twist `-Y²/2` of `G̃_{α,0}` becomes `-κw²` under
/// `Y = √(2κ)·w`. At `α = 0` the map is the identity.
fn annulus_g(alpha: f64, z: Point<f64>) -> Point<f64> {
    if alpha == 0.0 {
        return z;
    }
    let c = (2.0 * kappa::<f64>()).sqrt();
    let w = rescaled_g(&Params::new(alpha, 0.0), Point::new(z.x, c * z.y)).expect("alpha > 0");
    Point::new(w.x, w.y / c)
}

/// Sup distance over a `grid × grid` sample of `A = T¹ × [0, 1]` between the
/// rescaled maps `Ĝ_{α₀+n,0}` and `S_{α₀,0}`, one value per `n`. The
/// horizontal lifts are compared after removing the integer shift `n`.
pub fn rescaling_convergence(alpha0: f64, n_list: &[u64], grid: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha0) {
        return Err(Error::InvalidInput(format!("alpha0 = {alpha0} outside [0, 1)")));
    }
    if grid < 2 {
        return Err(Error::InvalidInput("grid must be at least 2".into()));
    }
    let s = NontwistParams::new(alpha0, 0.0);
    Ok(n_list
        .iter()
        .map(|&n| {
            let alpha = alpha0 + n as f64;
            (0..grid * grid)
                .into_par_iter()
                .map(|k| {
                    let z = Point::new((k % grid) as f64 / grid as f64, (k / grid) as f64 / (grid - 1) as f64);
                    let g = annulus_g(alpha, z);
                    let t = nontwist_lift(&s, z);
                    Point::new(g.x - n as f64 - t.x, g.y - t.y).norm()
                })
                .reduce(|| 0.0, f64::max)
        })
        .collect())
}

/// Displacement test for `S_{a,b}`: seeds uniform in `[0,1) × [-1/2, 1/2]`,
/// `NDetected` once some orbit moves vertically by at least 1. Horizontal
/// positions are reduced mod 1 since only the annulus map matters.
pub fn classify_nontwist(q: &NontwistParams<f64>, n_seeds: u64, n_iters: u64, rng_seed: u64) -> PixelVerdict {
    let mut rng = task_rng(rng_seed, 1, 0);
    let seeds: Vec<Point<f64>> =
        (0..n_seeds).map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>() - 0.5)).collect();
    let mut dy_max = 0.0_f64;
    let mut witness_y = None;
    let mut iterations_used = 0;
    let mut seeds_used = 0;
    'seeds: for &seed in &seeds {
        seeds_used += 1;
        let mut z = seed;
        for k in 1..=n_iters {
            z = nontwist_lift(q, z);
            z.x = frac_centered(z.x);
            iterations_used += 1;
            let dy = (z.y - seed.y).abs();
            if dy > dy_max {
                dy_max = dy;
                if dy >= 1.0 {
                    witness_y = Some(Witness { seed, steps: k });
                    break 'seeds;
                }
            }
        }
    }
    PixelVerdict {
        params: Params::new(q.a, q.b),
        verdict: if witness_y.is_some() { Verdict::NDetected } else { Verdict::EPresumed },
        dx_max: 0.0,
        dy_max,
        iterations_used,
        seeds_used,
        witness_x: None,
        witness_y,
    }
}

/// One cell of a rescaled comparison grid, in `[0,1]²` coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub a: f64,
    pub b: f64,
    pub verdict: PixelVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjectureGrids {
    pub n: u64,
    pub nx: usize,
    pub ny: usize,
    pub budget: PixelBudget,
    pub master_seed: u64,
    /// Harper verdicts at `(n + a, b/√n)`, row-major from `b = 0`.
    pub harper: Vec<Cell>,
    /// Non-twist verdicts at `(a, b)`.
    pub nontwist: Vec<Cell>,
}

impl ConjectureGrids {
    /// Mask of the rescaled non-diffusive set `E`.
    pub fn harper_e_mask(&self) -> Vec<bool> {
        self.harper.iter().map(|c| c.verdict.verdict == Verdict::EPresumed).collect()
    }

    /// Mask of parameters where the non-twist map showed an unbounded orbit.
    pub fn nontwist_unbounded_mask(&self) -> Vec<bool> {
        self.nontwist.iter().map(|c| c.verdict.verdict == Verdict::NDetected).collect()
    }
}

/// Fraction of cells where two masks of equal length disagree.
pub fn symmetric_difference_fraction(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidInput("masks must be nonempty and of equal length".into()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64)
}

/// Scans `E ∩ [n, n+1] × [0, 1]` translated by `(-n, 0)` with `β` stretched
/// by `√n`, next to the unbounded-orbit set of `S_{a,b}` on the same grid.
pub fn conjecture_rescaled_set(
    n: u64,
    nx: usize,
    ny: usize,
    budget: &PixelBudget,
    master_seed: u64,
) -> Result<ConjectureGrids> {
    if n == 0 || nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("need n >= 1 and a nonempty grid".into()));
    }
    let center = |k: usize, m: usize| (k as f64 + 0.5) / m as f64;
    let root = (n as f64).sqrt();
    let cells = |harper: bool| -> Vec<Cell> {
        (0..nx * ny)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                let (a, b) = (center(i, nx), center(j, ny));
                let seed = pixel_seed(master_seed, i, j);
                let verdict = if harper {
                    classify_pixel(&Params::new(n as f64 + a, b / root), budget.n_seeds, budget.n_iters, seed)
                } else {
                    classify_nontwist(&NontwistParams::new(a, b), budget.n_seeds, budget.n_iters, seed)
                };
                Cell { a, b, verdict }
            })
            .collect()
    };
    Ok(ConjectureGrids {
        n,
        nx,
        ny,
        budget: *budget,
        master_seed,
        harper: cells(true),
        nontwist: cells(false),
    })
}

pub const CONJECTURE_CSV_HEADER: &str = "map,alpha,beta,verdict,dx_max,dy_max,iters,seeds";

/// Both grids as CSV rows tagged `harper` or `nontwist`; the Harper rows
/// carry the rescaled coordinates.
pub fn conjecture_csv(g: &ConjectureGrids) -> String {
    let mut s = String::new();
    s.push_str(CONJECTURE_CSV_HEADER);
    s.push('\n');
    for (tag, cells) in [("harper", &g.harper), ("nontwist", &g.nontwist)] {
        for c in cells {
            let v = &c.verdict;
            writeln!(
                s,
                "{tag},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{}",
                c.a,
                c.b,
                v.verdict.as_str(),
                v.dx_max,
                v.dy_max,
                v.iterations_used,
                v.seeds_used
            )
            .expect("writing to a String");
        }
    }
    s
}

/// Binary PGM of a mask (white = set), top row the largest `b`.
pub fn mask_pgm(mask: &[bool], nx: usize, ny: usize) -> Vec<u8> {
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    for row in mask.chunks(nx).rev() {
        out.extend(row.iter().map(|&m| if m { 255 } else { 0 }));
    }
    out
}
