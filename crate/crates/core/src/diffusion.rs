//! Displacement-threshold classification of parameters, parameter-plane
//! sweeps, threshold bisection and image/CSV rendering.
//!
//! An orbit whose horizontal (vertical) displacement reaches 1 proves that
//! the rotation set has a nonzero point off the vertical (horizontal) axis.
//! Both together prove nonempty interior, so `NDetected` is conclusive while
//! `EPresumed` only means the budget ran out.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::Params;
use crate::point::Point;
use crate::seeds::task_rng;

type Z = Point<f64>;

/// Displacement that must be reached on each axis.
pub const THRESHOLD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Displacement ≥ 1 seen on both axes: the parameter is diffusive.
    NDetected,
    /// Not detected within budget.
    EPresumed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NDetected => "NDetected",
            Verdict::EPresumed => "EPresumed",
        }
    }
}

/// Orbit segment reaching displacement ≥ 1 on one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: Z,
    pub steps: u64,
}

impl Witness {
    /// Re-runs the orbit and returns the displacement reached after `steps`.
    pub fn replay(&self, p: &Params<f64>) -> Z {
        p.iterate_f(self.seed, self.steps) - self.seed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelVerdict {
    pub params: Params<f64>,
    pub verdict: Verdict,
    pub dx_max: f64,
    pub dy_max: f64,
    pub iterations_used: u64,
    pub seeds_used: u64,
    pub witness_x: Option<Witness>,
    pub witness_y: Option<Witness>,
}

impl PixelVerdict {
    /// Deterministic replay of both witnesses.
    pub fn replays(&self) -> bool {
        match (self.witness_x, self.witness_y) {
            (Some(wx), Some(wy)) => {
                wx.replay(&self.params).x.abs() >= THRESHOLD && wy.replay(&self.params).y.abs() >= THRESHOLD
            }
            _ => false,
        }
    }
}

/// Per-pixel orbit budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBudget {
    pub n_seeds: u64,
    pub n_iters: u64,
}

impl Default for PixelBudget {
    fn default() -> Self {
        Self { n_seeds: 32, n_iters: 100_000 }
    }
}

/// Uniform seeds in `[0,1)²` drawn from `rng_seed`.
pub fn pixel_seeds(rng_seed: u64, n_seeds: u64) -> Vec<Z> {
    let mut rng = task_rng(rng_seed, 0, 0);
    (0..n_seeds).map(|_| Z::new(rng.gen(), rng.gen())).collect()
}

pub fn classify_pixel(p: &Params<f64>, n_seeds: u64, n_iters: u64, rng_seed: u64) -> PixelVerdict {
    classify_with_seeds(p, &pixel_seeds(rng_seed, n_seeds), n_iters)
}

/// Runs the seeds in order, each for up to `n_iters` steps, stopping as soon
/// as both axes have reached the threshold (possibly on different orbits).
pub fn classify_with_seeds(p: &Params<f64>, seeds: &[Z], n_iters: u64) -> PixelVerdict {
    let mut dx_max = 0.0_f64;
    let mut dy_max = 0.0_f64;
    let mut witness_x = None;
    let mut witness_y = None;
    let mut iterations_used = 0;
    let mut seeds_used = 0;
    'seeds: for &seed in seeds {
        seeds_used += 1;
        let mut z = seed;
        for k in 1..=n_iters {
            z = p.lift_f(z);
            iterations_used += 1;
            let dx = (z.x - seed.x).abs();
            let dy = (z.y - seed.y).abs();
            if dx > dx_max {
                dx_max = dx;
                if dx >= THRESHOLD && witness_x.is_none() {
                    witness_x = Some(Witness { seed, steps: k });
                }
            }
            if dy > dy_max {
                dy_max = dy;
                if dy >= THRESHOLD && witness_y.is_none() {
                    witness_y = Some(Witness { seed, steps: k });
                }
            }
            if witness_x.is_some() && witness_y.is_some() {
                break 'seeds;
            }
        }
    }
    let verdict = if witness_x.is_some() && witness_y.is_some() {
        Verdict::NDetected
    } else {
        Verdict::EPresumed
    };
    PixelVerdict {
        params: *p,
        verdict,
        dx_max,
        dy_max,
        iterations_used,
        seeds_used,
        witness_x,
        witness_y,
    }
}

/// Rectangle of the parameter plane sampled at cell centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !ok(self.alpha_range) || !ok(self.beta_range) {
            return Err(Error::InvalidInput("empty or non-finite parameter range".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidInput("resolution must be positive".into()));
        }
        Ok(())
    }

    /// Parameters at the center of cell `(i, j)`; `j = 0` is the lowest β row.
    pub fn params(&self, i: usize, j: usize) -> Params<f64> {
        let c = |r: [f64; 2], k: usize, n: usize| r[0] + (k as f64 + 0.5) * (r[1] - r[0]) / n as f64;
        Params::new(c(self.alpha_range, i, self.nx), c(self.beta_range, j, self.ny))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub spec: ScanSpec,
    pub budget: PixelBudget,
    pub master_seed: u64,
    /// Row-major, row `j` (β index) outer, `i` (α index) inner.
    pub verdicts: Vec<PixelVerdict>,
}

impl ScanGrid {
    pub fn at(&self, i: usize, j: usize) -> &PixelVerdict {
        &self.verdicts[j * self.spec.nx + i]
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.verdicts.iter().filter(|p| p.verdict == v).count()
    }
}

/// Seed of the pixel at `(i, j)`; independent of execution order.
pub fn pixel_seed(master: u64, i: usize, j: usize) -> u64 {
    crate::seeds::task_seed(master, i as u64, j as u64)
}

pub fn scan(spec: &ScanSpec, budget: &PixelBudget, master_seed: u64) -> Result<ScanGrid> {
    spec.validate()?;
    let verdicts = (0..spec.nx * spec.ny)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % spec.nx, idx / spec.nx);
            classify_pixel(&spec.params(i, j), budget.n_seeds, budget.n_iters, pixel_seed(master_seed, i, j))
        })
        .collect();
    Ok(ScanGrid { spec: *spec, budget: *budget, master_seed, verdicts })
}

/// Result of the bisection for the smallest detected diffusive `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaThresholds {
    pub alpha: f64,
    pub beta_minus_upper: f64,
    /// Orbit steps spent over all classifications.
    pub budget: u64,
    /// The `NDetected` verdict at `beta_minus_upper`.
    pub verdict: PixelVerdict,
}

/// Budget for [`estimate_beta_minus_upper`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdBudget {
    pub pixel: PixelBudget,
    /// Cap on orbit steps across all classifications.
    pub total: u64,
    pub seed: u64,
}

impl Default for ThresholdBudget {
    fn default() -> Self {
        Self { pixel: PixelBudget { n_seeds: 8, n_iters: 100_000 }, total: 10_000_000, seed: 0 }
    }
}

/// Bisects on `β ∈ [beta_lo, beta_hi]` at fixed `α ≥ 1/2` for the smallest
/// `β` with a detected diffusive orbit. `NDetected` moves the upper end,
/// anything else the lower end; the returned value is always verified.
pub fn estimate_beta_minus_upper(
    alpha: f64,
    beta_lo: f64,
    beta_hi: f64,
    bisection_steps: u32,
    budget: &ThresholdBudget,
) -> Result<BetaThresholds> {
    if !(alpha >= 0.5) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} < 1/2")));
    }
    if !(beta_lo >= 0.0 && beta_lo < beta_hi) {
        return Err(Error::InvalidInput(format!("bad beta bracket [{beta_lo}, {beta_hi}]")));
    }
    let mut spent = 0u64;
    let run = |beta: f64, spent: &mut u64| {
        let remaining = budget.total.saturating_sub(*spent);
        let n_iters = budget.pixel.n_iters.min(remaining / budget.pixel.n_seeds.max(1));
        let v = classify_pixel(&Params::new(alpha, beta), budget.pixel.n_seeds, n_iters, budget.seed);
        *spent += v.iterations_used;
        v
    };
    let top = run(beta_hi, &mut spent);
    if top.verdict != Verdict::NDetected {
        return Err(Error::UpperEndpointNotDiffusive { alpha, beta_hi });
    }
    let (mut lo, mut hi, mut best) = (beta_lo, beta_hi, top);
    for _ in 0..bisection_steps {
        if spent >= budget.total {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = run(mid, &mut spent);
        if v.verdict == Verdict::NDetected {
            hi = mid;
            best = v;
        } else {
            lo = mid;
        }
    }
    Ok(BetaThresholds { alpha, beta_minus_upper: hi, budget: spent, verdict: best })
}

/// Red intensity of a non-detected pixel: vertical displacement below the
/// diagonal, horizontal displacement on and above it.
pub fn red_level(v: &PixelVerdict) -> u8 {
    let d = if v.params.beta < v.params.alpha { v.dy_max } else { v.dx_max };
    (d.clamp(0.0, 1.0) * 255.0).floor() as u8
}

fn image_rows(grid: &ScanGrid) -> impl Iterator<Item = &[PixelVerdict]> {
    grid.verdicts.chunks(grid.spec.nx).rev()
}

/// Binary PPM: white for detected diffusion, red shaded by displacement
/// otherwise. The top image row is the largest β.
pub fn render_ppm(grid: &ScanGrid) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", grid.spec.nx, grid.spec.ny).into_bytes();
    for row in image_rows(grid) {
        for v in row {
            match v.verdict {
                Verdict::NDetected => out.extend_from_slice(&[255, 255, 255]),
                Verdict::EPresumed => out.extend_from_slice(&[red_level(v), 0, 0]),
            }
        }
    }
    out
}

/// Binary PGM of the red channel of [`render_ppm`].
pub fn render_pgm(grid: &ScanGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.spec.nx, grid.spec.ny).into_bytes();
    for row in image_rows(grid) {
        for v in row {
            out.push(match v.verdict {
                Verdict::NDetected => 255,
                Verdict::EPresumed => red_level(v),
            });
        }
    }
    out
}

pub const CSV_HEADER: &str = "alpha,beta,verdict,dx_max,dy_max,iters,seeds";

/// One row per pixel in storage order; floats carry 17 significant digits.
pub fn render_csv(grid: &ScanGrid) -> String {
    let mut s = String::with_capacity(64 * (grid.verdicts.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for v in &grid.verdicts {
        writeln!(
            s,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{},{}",
            v.params.alpha,
            v.params.beta,
            v.verdict.as_str(),
            v.dx_max,
            v.dy_max,
            v.iterations_used,
            v.seeds_used
        )
        .expect("writing to a String");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Symmetry;

    #[test]
    fn pixel_examples() {
        let v = classify_pixel(&Params::new(0.75, 0.75), 32, 100_000, 5);
        assert_eq!(v.verdict, Verdict::NDetected);
        assert!(v.replays());

        let v = classify_pixel(&Params::new(0.0, 0.0), 4, 1000, 5);
        assert_eq!(v.verdict, Verdict::EPresumed);
        assert_eq!((v.dx_max, v.dy_max), (0.0, 0.0));
        assert_eq!(v.iterations_used, 4000);
    }

    #[test]
    fn kam_circles_block_vertical_motion() {
        let v = classify_pixel(&Params::new(1.0, 0.01), 32, 1_000_000, 9);
        assert_eq!(v.verdict, Verdict::EPresumed);
        assert!(v.dy_max < 1.0);
    }

    #[test]
    fn budget_monotonicity() {
        let p = Params::new(0.6, 0.3);
        let small = classify_pixel(&p, 4, 20_000, 3);
        let large = classify_pixel(&p, 8, 40_000, 3);
        if small.verdict == Verdict::NDetected {
            assert_eq!(large.verdict, Verdict::NDetected);
        }
        assert!(large.dx_max >= small.dx_max && large.dy_max >= small.dy_max);
    }

    #[test]
    fn mirrored_seeds_give_mirrored_verdicts() {
        for (a, b) in [(0.7, 0.4), (0.55, 0.2), (0.3, 0.05)] {
            let seeds = pixel_seeds(17, 8);
            let mirrored: Vec<Z> = seeds.iter().map(|&z| Symmetry::T1.apply(z)).collect();
            let v = classify_with_seeds(&Params::new(a, b), &mirrored, 20_000);
            let w = classify_with_seeds(&Params::new(a, -b), &seeds, 20_000);
            // Rounding differs after the half shift, so chaotic orbits drift
            // apart; only the verdict is compared.
            assert_eq!(v.verdict, w.verdict);
        }
    }

    #[test]
    fn scan_is_row_major_from_low_beta() {
        let spec = ScanSpec { alpha_range: [0.0, 1.0], beta_range: [0.0, 2.0], nx: 4, ny: 2 };
        assert_eq!(spec.params(0, 0), Params::new(0.125, 0.5));
        assert_eq!(spec.params(3, 1), Params::new(0.875, 1.5));
        let g = scan(&spec, &PixelBudget { n_seeds: 1, n_iters: 10 }, 1).unwrap();
        assert_eq!(g.verdicts.len(), 8);
        assert_eq!(g.at(1, 1).params, spec.params(1, 1));
    }

    #[test]
    fn scan_rejects_empty_range() {
        let spec = ScanSpec { alpha_range: [1.0, 0.0], beta_range: [0.0, 1.0], nx: 2, ny: 2 };
        assert!(matches!(scan(&spec, &PixelBudget::default(), 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_pixel_at_unit_params() {
        let spec = ScanSpec { alpha_range: [1.0, 1.0], beta_range: [1.0, 1.0], nx: 1, ny: 1 };
        let g = scan(&spec, &PixelBudget::default(), 0).unwrap();
        assert_eq!(g.verdicts[0].params, Params::new(1.0, 1.0));
        assert_eq!(g.verdicts[0].verdict, Verdict::NDetected);
    }

    #[test]
    fn scan_is_deterministic() {
        let spec = ScanSpec { alpha_range: [0.2, 0.8], beta_range: [0.1, 0.5], nx: 3, ny: 3 };
        let b = PixelBudget { n_seeds: 2, n_iters: 2_000 };
        assert_eq!(scan(&spec, &b, 7).unwrap(), scan(&spec, &b, 7).unwrap());
    }

    fn fake(alpha: f64, beta: f64, verdict: Verdict, dx: f64, dy: f64) -> PixelVerdict {
        PixelVerdict {
            params: Params::new(alpha, beta),
            verdict,
            dx_max: dx,
            dy_max: dy,
            iterations_used: 0,
            seeds_used: 0,
            witness_x: None,
            witness_y: None,
        }
    }

    #[test]
    fn color_map() {
        assert_eq!(red_level(&fake(1.0, 0.5, Verdict::EPresumed, 3.0, 0.5)), 127);
        assert_eq!(red_level(&fake(0.5, 1.0, Verdict::EPresumed, 0.5, 3.0)), 127);
        assert_eq!(red_level(&fake(0.0, 0.0, Verdict::EPresumed, 0.0, 0.0)), 0);
        assert_eq!(red_level(&fake(1.0, 0.2, Verdict::EPresumed, 0.0, 7.0)), 255);
    }

    #[test]
    fn image_layout_and_headers() {
        let spec = ScanSpec { alpha_range: [0.0, 1.0], beta_range: [0.0, 1.0], nx: 2, ny: 2 };
        let grid = ScanGrid {
            spec,
            budget: PixelBudget::default(),
            master_seed: 0,
            verdicts: vec![
                fake(0.25, 0.25, Verdict::EPresumed, 0.0, 0.0),
                fake(0.75, 0.25, Verdict::EPresumed, 0.0, 0.5),
                fake(0.25, 0.75, Verdict::NDetected, 2.0, 2.0),
                fake(0.75, 0.75, Verdict::EPresumed, 0.2, 0.0),
            ],
        };
        let ppm = render_ppm(&grid);
        let head = b"P6\n2 2\n255\n";
        assert_eq!(&ppm[..head.len()], head);
        assert_eq!(&ppm[head.len()..], &[255, 255, 255, 51, 0, 0, 0, 0, 0, 127, 0, 0]);
        let pgm = render_pgm(&grid);
        assert_eq!(pgm, b"P5\n2 2\n255\n\xff\x33\x00\x7f".to_vec());
        let csv = render_csv(&grid);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.25);
        assert_eq!(first[2], "EPresumed");
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn bisection_at_unit_alpha() {
        let b = ThresholdBudget { pixel: PixelBudget { n_seeds: 8, n_iters: 50_000 }, total: 4_000_000, seed: 1 };
        let t = estimate_beta_minus_upper(1.0, 0.0, 0.5, 6, &b).unwrap();
        assert!(t.beta_minus_upper <= 0.5);
        assert_eq!(t.verdict.verdict, Verdict::NDetected);
        assert!(t.verdict.replays());
        assert!(t.budget <= b.total);
    }

    #[test]
    fn bisection_errors() {
        let b = ThresholdBudget { pixel: PixelBudget { n_seeds: 2, n_iters: 1000 }, total: 10_000, seed: 1 };
        assert!(matches!(
            estimate_beta_minus_upper(1.0, 0.0, 1e-6, 3, &b),
            Err(Error::UpperEndpointNotDiffusive { .. })
        ));
        assert!(matches!(estimate_beta_minus_upper(0.2, 0.0, 1.0, 3, &b), Err(Error::InvalidInput(_))));
    }
}
