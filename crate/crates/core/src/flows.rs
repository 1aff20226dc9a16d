//! The vector field `W^{λ,α}(x, y) = (s(y + αλ s(x)), λ s(x))`, whose Euler
//! step of size `α` is exactly `F_{α,λα}`, a fixed-step RK4 reference flow
//! with first variation, Euler convergence measurements, and the cusp
//! experiment along rays `β = λα`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{classify_pixel, PixelBudget, Verdict};
use crate::error::{Error, Result};
use crate::map::{Jacobian2, Params};
use crate::point::Point;
use crate::scalar::{cos_turns, sin_turns, Real};
use crate::seeds::{task_rng, R2Sequence};

type Z = Point<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec<T> {
    pub lambda: T,
    /// Field parameter and Euler step.
    pub alpha: T,
    /// `floor(1/α)`, zero when `α = 0`.
    pub n_alpha: u64,
}

impl<T: Real> FlowSpec<T> {
    pub fn new(lambda: T, alpha: T) -> Self {
        let n_alpha = if alpha > T::zero() { (T::one() / alpha).floor().to_u64().unwrap_or(u64::MAX) } else { 0 };
        Self { lambda, alpha, n_alpha }
    }

    /// The map `F_{α,λα}` produced by one Euler step.
    pub fn euler_map(&self) -> Params<T> {
        Params::new(self.alpha, self.lambda * self.alpha)
    }
}

#[inline]
pub fn field_w<T: Real>(spec: &FlowSpec<T>, z: Point<T>) -> Point<T> {
    let sx = sin_turns(z.x);
    Point::new(sin_turns(z.y + spec.alpha * spec.lambda * sx), spec.lambda * sx)
}

/// `DW^{λ,α}(z)`.
pub fn field_jacobian<T: Real>(spec: &FlowSpec<T>, z: Point<T>) -> Jacobian2<T> {
    let tau = T::TAU();
    let cx = cos_turns(z.x);
    let c1 = cos_turns(z.y + spec.alpha * spec.lambda * sin_turns(z.x));
    Jacobian2 {
        a11: tau * c1 * spec.alpha * spec.lambda * tau * cx,
        a12: tau * c1,
        a21: tau * spec.lambda * cx,
        a22: T::zero(),
    }
}

/// `|F_{α,λα}(z) - (z + α W^{λ,α}(z))|`.
pub fn euler_identity_check<T: Real>(spec: &FlowSpec<T>, z: Point<T>) -> T {
    let f = spec.euler_map().lift_f(z);
    let e = z + field_w(spec, z) * spec.alpha;
    (f - e).norm()
}

#[derive(Clone, Copy, Debug)]
struct State {
    z: Z,
    u: Jacobian2<f64>,
}

fn rhs(spec: &FlowSpec<f64>, s: &State, with_var: bool) -> State {
    let dz = field_w(spec, s.z);
    let du = if with_var { field_jacobian(spec, s.z).mul(&s.u) } else { s.u };
    State { z: dz, u: du }
}

fn axpy(s: &State, h: f64, d: &State) -> State {
    State {
        z: s.z + d.z * h,
        u: Jacobian2 {
            a11: s.u.a11 + h * d.u.a11,
            a12: s.u.a12 + h * d.u.a12,
            a21: s.u.a21 + h * d.u.a21,
            a22: s.u.a22 + h * d.u.a22,
        },
    }
}

fn rk4(spec: &FlowSpec<f64>, s0: State, t: f64, m: u64, with_var: bool) -> State {
    let h = t / m as f64;
    let mut s = s0;
    for _ in 0..m {
        let k1 = rhs(spec, &s, with_var);
        let k2 = rhs(spec, &axpy(&s, 0.5 * h, &k1), with_var);
        let k3 = rhs(spec, &axpy(&s, 0.5 * h, &k2), with_var);
        let k4 = rhs(spec, &axpy(&s, h, &k3), with_var);
        let z = s.z + (k1.z + k2.z * 2.0 + k3.z * 2.0 + k4.z) * (h / 6.0);
        let u = if with_var {
            let c = |f: fn(&Jacobian2<f64>) -> f64| {
                f(&s.u) + h / 6.0 * (f(&k1.u) + 2.0 * f(&k2.u) + 2.0 * f(&k3.u) + f(&k4.u))
            };
            Jacobian2 { a11: c(|m| m.a11), a12: c(|m| m.a12), a21: c(|m| m.a21), a22: c(|m| m.a22) }
        } else {
            s.u
        };
        s = State { z, u };
    }
    s
}

/// Largest number of RK4 steps tried before giving up on a tolerance.
pub const MAX_RK4_STEPS: u64 = 1 << 22;

fn reference(spec: &FlowSpec<f64>, t: f64, z: Z, tol: f64, with_var: bool) -> Result<State> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("t = {t} outside [0, 1]")));
    }
    if !(tol >= 1e-13) {
        return Err(Error::InvalidInput(format!("tol = {tol:e} below 1e-13")));
    }
    let s0 = State { z, u: Jacobian2::identity() };
    if t == 0.0 {
        return Ok(s0);
    }
    let mut m = 8;
    let mut coarse = rk4(spec, s0, t, m, with_var);
    loop {
        let fine = rk4(spec, s0, t, 2 * m, with_var);
        // Richardson: for a 4th-order method the error of the finer
        // solution is about |fine - coarse| / 15.
        let mut est = (fine.z - coarse.z).norm();
        if with_var {
            est = est.max(fine.u.frobenius_dist(&coarse.u));
        }
        if est / 15.0 <= tol {
            return Ok(fine);
        }
        m *= 2;
        if m > MAX_RK4_STEPS || t / m as f64 == 0.0 {
            return Err(Error::ToleranceUnreachable { tol });
        }
        coarse = fine;
    }
}

/// Time-`t` map of `W^{λ,α}` by RK4 with step halving until the Richardson
/// error estimate is below `tol`.
pub fn reference_flow(spec: &FlowSpec<f64>, t: f64, z: Z, tol: f64) -> Result<Z> {
    reference(spec, t, z, tol, false).map(|s| s.z)
}

/// Time-`t` map together with its derivative from the first variation
/// equation `U' = DW(z(t)) U`, `U(0) = I`.
pub fn reference_flow_with_variation(spec: &FlowSpec<f64>, t: f64, z: Z, tol: f64) -> Result<(Z, Jacobian2<f64>)> {
    reference(spec, t, z, tol, true).map(|s| (s.z, s.u))
}

/// `F^n(z)` together with the chained Jacobian of the steps.
pub fn euler_orbit_with_jacobian(spec: &FlowSpec<f64>, z: Z, n: u64) -> (Z, Jacobian2<f64>) {
    let p = spec.euler_map();
    let mut w = z;
    let mut j = Jacobian2::identity();
    for _ in 0..n {
        j = p.jacobian(w).mul(&j);
        w = p.lift_f(w);
    }
    (w, j)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambda: f64,
    pub deltas: Vec<f64>,
    pub sup_errors_c0: Vec<f64>,
    pub sup_errors_c1: Vec<f64>,
    /// Log-log slope of the C⁰ errors against the step.
    pub fitted_order: f64,
    pub fitted_order_c1: f64,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,c0_err,c1_err\n");
        for i in 0..self.deltas.len() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.deltas[i], self.sup_errors_c0[i], self.sup_errors_c1[i]
            ));
        }
        s
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Tolerance of the reference flow in [`euler_convergence`].
pub const REFERENCE_TOL: f64 = 1e-11;

/// Sup over `sample` quasi-random starts in `[0,1)²` of the distance between
/// `F^{n_α}_{α,λα}` and the time-`n_α·α` map of `W^{λ,α}`, in value (C⁰) and
/// in derivative (C¹, Frobenius norm), for each step `α`.
pub fn euler_convergence(lambda: f64, alphas: &[f64], sample: usize) -> Result<ConvergenceReport> {
    if alphas.len() < 3 {
        return Err(Error::InvalidInput("need at least three step sizes".into()));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidInput("step sizes must lie in (0, 1]".into()));
    }
    let starts: Vec<Z> = R2Sequence::unshifted().take(sample.max(1)).collect();
    let mut c0 = Vec::with_capacity(alphas.len());
    let mut c1 = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let spec = FlowSpec::new(lambda, alpha);
        let t = spec.n_alpha as f64 * alpha;
        let errs = starts
            .par_iter()
            .map(|&z| {
                let (e, je) = euler_orbit_with_jacobian(&spec, z, spec.n_alpha);
                let (r, jr) = reference_flow_with_variation(&spec, t, z, REFERENCE_TOL)?;
                Ok(((e - r).norm(), je.frobenius_dist(&jr)))
            })
            .collect::<Result<Vec<_>>>()?;
        c0.push(errs.iter().map(|e| e.0).fold(0.0, f64::max));
        c1.push(errs.iter().map(|e| e.1).fold(0.0, f64::max));
    }
    Ok(ConvergenceReport {
        lambda,
        deltas: alphas.to_vec(),
        fitted_order: loglog_slope(alphas, &c0),
        fitted_order_c1: loglog_slope(alphas, &c1),
        sup_errors_c0: c0,
        sup_errors_c1: c1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspRow {
    pub alpha: f64,
    pub beta: f64,
    pub verdict: Verdict,
    pub dx_max: f64,
    pub dy_max: f64,
    /// Largest vertical displacement of orbits started in `y ∈ [0.05, 0.2]`.
    pub annulus_dy_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspReport {
    pub lambda: f64,
    pub budget: PixelBudget,
    pub rows: Vec<CuspRow>,
    /// Smallest listed `α` with a detected diffusive verdict.
    pub first_detected: Option<f64>,
}

/// Classifies `(α, λα)` for each `α` and measures vertical motion of orbits
/// started in the horizontal annulus `0.05 ≤ y ≤ 0.2`.
pub fn cusp_experiment(lambda: f64, alpha_list: &[f64], budget: &PixelBudget, seed: u64) -> CuspReport {
    let rows: Vec<CuspRow> = alpha_list
        .par_iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let p = Params::new(alpha, lambda * alpha);
            let v = classify_pixel(&p, budget.n_seeds, budget.n_iters, crate::seeds::task_seed(seed, k as u64, 0));
            let mut rng = task_rng(seed, k as u64, 1);
            let mut annulus_dy_max = 0.0_f64;
            for _ in 0..budget.n_seeds {
                let z0 = Z::new(rng.gen(), rng.gen_range(0.05..=0.2));
                let mut z = z0;
                for _ in 0..budget.n_iters {
                    z = p.lift_f(z);
                    annulus_dy_max = annulus_dy_max.max((z.y - z0.y).abs());
                }
            }
            CuspRow { alpha, beta: p.beta, verdict: v.verdict, dx_max: v.dx_max, dy_max: v.dy_max, annulus_dy_max }
        })
        .collect();
    let first_detected = rows
        .iter()
        .filter(|r| r.verdict == Verdict::NDetected)
        .map(|r| r.alpha)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
    CuspReport { lambda, budget: *budget, rows, first_detected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_examples() {
        let w = field_w(&FlowSpec::new(1.0, 0.0), Z::new(0.25, 0.0));
        assert_eq!(w, Z::new(0.0, 1.0));
        let spec = FlowSpec::new(0.0, 0.3);
        let z = Z::new(0.17, 0.61);
        assert_eq!(field_w(&spec, z), Z::new(sin_turns(0.61), 0.0));
        assert_eq!(field_w(&FlowSpec::new(0.7, 0.2), Z::origin()), Z::origin());
    }

    #[test]
    fn n_alpha_brackets_one() {
        for a in [0.3, 0.02, 0.01, 0.0025, 0.7] {
            let s = FlowSpec::new(0.5, a);
            assert!(s.n_alpha as f64 * a <= 1.0 && (s.n_alpha + 1) as f64 * a > 1.0);
        }
        assert_eq!(FlowSpec::new(0.5, 0.0).n_alpha, 0);
    }

    #[test]
    fn euler_step_is_the_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = FlowSpec::new(0.5, 0.1);
        for _ in 0..100 {
            let z = Z::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            assert!(euler_identity_check(&spec, z) < 1e-12);
        }
        assert_eq!(euler_identity_check(&FlowSpec::new(0.5, 0.0), Z::new(0.3, 0.2)), 0.0);
        assert!(euler_identity_check(&FlowSpec::new(1.0, 0.25), Z::new(0.25, 0.25)) < 1e-12);
    }

    #[test]
    fn field_jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..200 {
            let spec = FlowSpec::new(rng.gen(), rng.gen());
            let z = Z::new(rng.gen(), rng.gen());
            let j = field_jacobian(&spec, z);
            let dx = (field_w(&spec, z + Z::new(h, 0.0)) - field_w(&spec, z - Z::new(h, 0.0))) * (0.5 / h);
            let dy = (field_w(&spec, z + Z::new(0.0, h)) - field_w(&spec, z - Z::new(0.0, h))) * (0.5 / h);
            let fd = Jacobian2 { a11: dx.x, a12: dy.x, a21: dx.y, a22: dy.y };
            assert!(j.max_abs_diff(&fd) < 1e-6);
        }
    }

    #[test]
    fn reference_flow_exact_cases() {
        let spec = FlowSpec::new(0.0, 0.0);
        let z = Z::new(0.3, 0.5);
        assert!(reference_flow(&spec, 1.0, z, 1e-12).unwrap().dist(z) < 1e-15);
        let z = Z::new(0.2, 0.13);
        assert_eq!(reference_flow(&FlowSpec::new(0.4, 0.1), 0.0, z, 1e-12).unwrap(), z);
        for t in [0.25, 0.5, 1.0] {
            let r = reference_flow(&spec, t, z, 1e-12).unwrap();
            let exact = Z::new(z.x + t * sin_turns(z.y), z.y);
            assert!(r.dist(exact) < 1e-12);
        }
        assert!(matches!(reference_flow(&spec, 2.0, z, 1e-12), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn singularities_stay_put() {
        let spec = FlowSpec::new(0.6, 0.0);
        for z in [Z::new(0.0, 0.0), Z::new(0.5, 0.5), Z::new(0.0, 0.5), Z::new(0.5, 0.0)] {
            assert!(reference_flow(&spec, 1.0, z, 1e-12).unwrap().dist(z) < 1e-12);
        }
    }

    #[test]
    fn conservative_field_preserves_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-5;
        for _ in 0..20 {
            let spec = FlowSpec::new(rng.gen(), 0.0);
            let z = Z::new(rng.gen(), rng.gen());
            let j = field_jacobian(&spec, z);
            assert!((j.a11 + j.a22).abs() < 1e-12);
            let (_, u) = reference_flow_with_variation(&spec, 1.0, z, 1e-12).unwrap();
            assert!((u.det() - 1.0).abs() < 1e-8);
            // Secondary cross-check of the variation against differences.
            let fx = (reference_flow(&spec, 1.0, z + Z::new(h, 0.0), 1e-12).unwrap()
                - reference_flow(&spec, 1.0, z - Z::new(h, 0.0), 1e-12).unwrap())
                * (0.5 / h);
            let fy = (reference_flow(&spec, 1.0, z + Z::new(0.0, h), 1e-12).unwrap()
                - reference_flow(&spec, 1.0, z - Z::new(0.0, h), 1e-12).unwrap())
                * (0.5 / h);
            let fd = Jacobian2 { a11: fx.x, a12: fy.x, a21: fx.y, a22: fy.y };
            assert!(u.max_abs_diff(&fd) < 1e-5 * (1.0 + u.frobenius_dist(&Jacobian2::identity())));
        }
    }

    #[test]
    fn euler_jacobian_chain_matches_differences() {
        let spec = FlowSpec::new(0.5, 0.05);
        let z = Z::new(0.31, 0.72);
        let h = 1e-6;
        let (_, j) = euler_orbit_with_jacobian(&spec, z, spec.n_alpha);
        let f = |w: Z| euler_orbit_with_jacobian(&spec, w, spec.n_alpha).0;
        let dx = (f(z + Z::new(h, 0.0)) - f(z - Z::new(h, 0.0))) * (0.5 / h);
        let dy = (f(z + Z::new(0.0, h)) - f(z - Z::new(0.0, h))) * (0.5 / h);
        let fd = Jacobian2 { a11: dx.x, a12: dy.x, a21: dx.y, a22: dy.y };
        assert!(j.max_abs_diff(&fd) < 1e-5 * (1.0 + j.frobenius_dist(&Jacobian2::identity())));
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let spec = FlowSpec::new(0.5, 0.5);
        assert!(matches!(reference_flow(&spec, 1.0, Z::new(0.1, 0.2), 1e-14), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn euler_error_against_exact_shear_flow() {
        // λ = 0: the field is (s(y), 0), the flow is exact and Euler is too.
        let spec = FlowSpec::new(0.0, 0.01);
        let z = Z::new(0.4, 0.3);
        let (e, _) = euler_orbit_with_jacobian(&spec, z, spec.n_alpha);
        let t = spec.n_alpha as f64 * 0.01;
        let exact = Z::new(z.x + t * sin_turns(z.y), z.y);
        assert!(e.dist(exact) < 1e-12);
    }

    #[test]
    fn convergence_is_first_order() {
        let r = euler_convergence(0.5, &[0.04, 0.02, 0.01], 8).unwrap();
        assert!(r.sup_errors_c0.windows(2).all(|w| w[1] < w[0]));
        assert!((0.8..=1.2).contains(&r.fitted_order), "{r:?}");
        assert!((0.7..=1.3).contains(&r.fitted_order_c1), "{r:?}");
        for w in r.sup_errors_c0.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio));
        }
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    #[test]
    fn loglog_slope_recovers_power() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cusp_without_vertical_kick() {
        let b = PixelBudget { n_seeds: 4, n_iters: 5_000 };
        let r = cusp_experiment(0.0, &[0.01, 0.02], &b, 1);
        assert!(r.rows.iter().all(|row| row.annulus_dy_max == 0.0 && row.dy_max == 0.0));
        assert_eq!(r.first_detected, None);
    }
}
