//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p harper-core --test acceptance`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use approx::relative_eq;
use harper_core::certify::{
    beta_plus_bound, certified_line_max, lipschitz_bound, modelock_verify, var_min, Line, ModeLock, ModelockOptions,
};
use harper_core::diffusion::{classify_pixel, estimate_beta_minus_upper, scan, PixelBudget, ScanSpec, ThresholdBudget, Verdict};
use harper_core::flows::{cusp_experiment, euler_convergence};
use harper_core::nontwist::{conjecture_rescaled_set, rescaling_convergence};
use harper_core::rotset::{approx_rotation_set, hausdorff, shape_classify, ConvexPolygon, RotsetBudget, Shape};
use harper_core::{fixed_points, Params64, Point64, Symmetry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn run(id: u32, name: &'static str, limit_s: u64, f: impl FnOnce() -> Check) -> Outcome {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let limit = Duration::from_secs(limit_s);
    let (mut passed, mut detail) = match r {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if elapsed > limit {
        passed = false;
        detail.push_str(&format!("; over time limit of {limit_s} s"));
    }
    let o = Outcome { id, name, passed, detail, elapsed, limit };
    println!(
        "{} {:>2} {:<28} {:>8.2}s / {:>4}s  {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.elapsed.as_secs_f64(),
        o.limit.as_secs(),
        o.detail
    );
    o
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rand_params(rng: &mut ChaCha8Rng, r: f64) -> Params64 {
    Params64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

fn rand_point(rng: &mut ChaCha8Rng) -> Point64 {
    Point64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

fn symmetry_suite() -> Check {
    use Symmetry::*;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    // (family, worst error)
    let mut worst = [0.0_f64; 8];
    for _ in 0..n {
        let p = rand_params(&mut rng, 2.0);
        let z = rand_point(&mut rng);
        let (a, b) = (p.alpha, p.beta);
        let f = |q: Params64, w: Point64| q.lift_f(w);
        let finv = |q: Params64, w: Point64| q.lift_f_inv(w);

        // Reversibility by the four shear-reflections.
        let gs: [Box<dyn Fn(Point64) -> Point64>; 4] = [
            Box::new(|w| p.shear_h(S1.apply(w))),
            Box::new(|w| p.shear_h(S2.apply(w))),
            Box::new(|w| S1.apply(p.shear_v(w))),
            Box::new(|w| S2.apply(p.shear_v(w))),
        ];
        for g in &gs {
            let e = f(p, g(z)).dist(g(finv(p, z))).max(g(g(z)).dist(z));
            worst[0] = worst[0].max(e);
        }
        // Reflections in the axes.
        let q = Params64::new(-a, -b);
        for s in [S1, S2] {
            worst[1] = worst[1].max(f(p, s.apply(z)).dist(s.apply(f(q, z))));
        }
        // Point reflection.
        worst[2] = worst[2].max(f(p, S.apply(z)).dist(S.apply(f(p, z))));
        // Diagonal.
        let e = f(p, D.apply(z)).dist(D.apply(finv(Params64::new(-b, -a), z)));
        let e2 = p.shear_h(D.apply(z)).dist(D.apply(Params64::new(0.0, a).shear_v(z)));
        worst[3] = worst[3].max(e.max(e2));
        // Rotation R = S1∘D.
        worst[4] = worst[4].max(f(p, R.apply(z)).dist(R.apply(finv(Params64::new(b, a), z))));
        // Half translations.
        worst[5] = worst[5].max(f(p, T1.apply(z)).dist(T1.apply(f(Params64::new(a, -b), z))));
        worst[6] = worst[6].max(f(p, T2.apply(z)).dist(T2.apply(f(Params64::new(-a, b), z))));
        // Conjugacy by the horizontal shear.
        let h = Params64::new(a, 0.0);
        worst[7] = worst[7].max(p.shear_h(f(q, z)).dist(finv(p, h.shear_h(z))));
    }
    let names = ["reversibility", "S1/S2", "S", "D", "R", "T1", "T2", "H-conjugacy"];
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let detail = format!("{n} samples, max error {max:.2e}");
    for (w, name) in worst.iter().zip(names) {
        ensure(*w < 1e-10, format!("{name}: error {w:.2e}"))?;
    }
    Ok(detail)
}

fn fixed_point_formulas() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = rand_params(&mut rng, 2.0);
        let ab = p.alpha * p.beta;
        let reports = fixed_points(&p).map_err(|e| e.to_string())?;
        ensure(reports.len() == 4, "expected four fixed points")?;
        for r in &reports {
            let loc = r.location;
            // Closed forms at the two points where ab enters with sign +1
            // and at the two where it enters with sign -1.
            let sab = if (loc.x - loc.y).abs() < 1e-12 { ab } else { -ab };
            let tr = 2.0 + 4.0 * PI * PI * sab;
            let disc = sab * (PI * PI * sab + 1.0);
            ensure(relative_eq!(r.jacobian.trace(), tr, max_relative = 1e-10, epsilon = 1e-12), "trace")?;
            let ev = r.eigenvalues;
            let (l1, l2) = if disc >= 0.0 {
                let root = 2.0 * PI * disc.sqrt();
                let big = 2.0 * PI * PI * sab + 1.0 + root.copysign(2.0 * PI * PI * sab + 1.0);
                (1.0 / big, big)
            } else {
                (f64::NAN, f64::NAN)
            };
            if disc >= 0.0 {
                // Literal closed forms, reordered by modulus.
                let lit1 = 2.0 * PI * PI * sab - 2.0 * PI * disc.sqrt() + 1.0;
                let lit2 = 2.0 * PI * PI * sab + 2.0 * PI * disc.sqrt() + 1.0;
                let mut lit = [lit1, lit2];
                lit.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap());
                for (got, want) in [(ev[0].re, l1), (ev[1].re, l2)] {
                    let rel = ((got - want) / want).abs();
                    worst = worst.max(rel);
                    ensure(rel < 1e-10, format!("eigenvalue {got} vs {want} at {loc:?}"))?;
                }
                // The literal form of the larger root agrees without
                // cancellation.
                ensure(((ev[1].re - lit[1]) / lit[1]).abs() < 1e-10, "literal large root")?;
            } else {
                // Complex pair on the unit circle with real part tr/2.
                for e in ev {
                    let rel = ((e.re - tr / 2.0) / (tr / 2.0)).abs();
                    worst = worst.max(rel.min((e.re - tr / 2.0).abs()));
                    ensure((e.re - tr / 2.0).abs() < 1e-10 * (1.0 + tr.abs()), "complex real part")?;
                    ensure((e.norm() - 1.0).abs() < 1e-10, "complex modulus")?;
                }
            }
        }
    }
    Ok(format!("100 parameter pairs, max relative error {worst:.2e}"))
}

fn prop_1_4_scan() -> Check {
    let spec = ScanSpec { alpha_range: [0.5, 1.0], beta_range: [0.5, 1.0], nx: 8, ny: 8 };
    let g = scan(&spec, &PixelBudget::default(), 42).map_err(|e| e.to_string())?;
    let n = g.count(Verdict::NDetected);
    ensure(n == 64, format!("{n}/64 NDetected"))?;
    Ok("64/64 NDetected".into())
}

fn square_rotation_set() -> Result<(String, ConvexPolygon), String> {
    let set = approx_rotation_set(&Params64::new(1.0, 1.0), &RotsetBudget::new(256, 100_000, 7));
    let h = hausdorff(&set, &ConvexPolygon::rect(-1.0, 1.0, -1.0, 1.0)).map_err(|e| e.to_string())?;
    ensure(h <= 0.05, format!("Hausdorff distance {h:.4}"))?;
    ensure(shape_classify(&set, 1e-9) == Shape::FullDim, "not full-dimensional")?;
    Ok((format!("Hausdorff distance {h:.2e}"), set))
}

fn modelock_square(inner: Option<&ConvexPolygon>) -> Check {
    let p = Params64::new(1.0, 1.0);
    let line = Line::from_normal([0, 1], 0.125).map_err(|e| e.to_string())?;
    let b = certified_line_max(&p, 2, &line, [0, 1], 1e-6, 2.0).map_err(|e| e.to_string())?;
    ensure(b.rigorous_bound < 2.0, format!("rigorous bound {}", b.rigorous_bound))?;
    let r = modelock_verify(ModeLock::Square11, &ModelockOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.certificate.implied_support <= 1.0, "implied support above 1")?;
    // Closing the half-plane y ≤ 1 under the symmetries gives the square.
    let outer = ConvexPolygon::rect(-1.0, 1.0, -1.0, 1.0);
    ensure(hausdorff(&outer, &r.rotation_set).map_err(|e| e.to_string())? == 0.0, "claimed set")?;
    ensure(r.exact_vertices.len() == 4, "vertices not realized by periodic orbits")?;
    let eq = match inner {
        Some(inner) => {
            ensure(inner.vertices().iter().all(|v| outer.contains(*v, 1e-9)), "inner set leaves the square")?;
            let h = hausdorff(inner, &outer).map_err(|e| e.to_string())?;
            ensure(h <= 0.05, format!("inner/outer gap {h}"))?;
            format!(", inner/outer gap {h:.2e}")
        }
        None => return Err("criterion 4 produced no rotation set".into()),
    };
    Ok(format!("grid max {:.6}, rigorous bound {:.6}{eq}", b.grid_max, b.rigorous_bound))
}

fn modelock_diamond() -> Check {
    let p = Params64::new(0.5, 0.5);
    let line = Line::from_normal([1, 1], 0.0).map_err(|e| e.to_string())?;
    let b = certified_line_max(&p, 4, &line, [1, 1], 1e-6, 2.0).map_err(|e| e.to_string())?;
    let lip = lipschitz_bound(&p, 4);
    ensure(b.grid_max < 1.95, format!("grid max {}", b.grid_max))?;
    ensure(b.rigorous_bound < 2.0, format!("rigorous bound {}", b.rigorous_bound))?;
    ensure(lip <= 20_000.0, format!("Lipschitz constant {lip}"))?;
    Ok(format!(
        "grid max {:.6}, rigorous bound {:.6}, Lipschitz {lip:.0} (along the line {:.0})",
        b.grid_max, b.rigorous_bound, b.lipschitz
    ))
}

fn scaling_upper_bound() -> Check {
    let mut out = Vec::new();
    for (k, alpha) in [4.0, 16.0, 64.0].into_iter().enumerate() {
        let bound = beta_plus_bound(alpha);
        let budget = ThresholdBudget { seed: 100 + k as u64, ..ThresholdBudget::default() };
        let r = estimate_beta_minus_upper(alpha, 0.0, bound, 12, &budget).map_err(|e| format!("α={alpha}: {e}"))?;
        ensure(r.verdict.verdict == Verdict::NDetected && r.verdict.replays(), format!("α={alpha}: not verified"))?;
        ensure(r.beta_minus_upper <= bound, format!("α={alpha}: {} above bound", r.beta_minus_upper))?;
        ensure(r.budget <= 10_000_000, format!("α={alpha}: spent {}", r.budget))?;
        out.push(format!("α={alpha}: β={:.4} ≤ {bound:.4}", r.beta_minus_upper));
    }
    Ok(out.join(", "))
}

fn euler_order() -> Check {
    let r = euler_convergence(0.5, &[0.02, 0.01, 0.005, 0.0025], 32).map_err(|e| e.to_string())?;
    ensure((0.8..=1.2).contains(&r.fitted_order), format!("C0 order {}", r.fitted_order))?;
    ensure((0.7..=1.3).contains(&r.fitted_order_c1), format!("C1 order {}", r.fitted_order_c1))?;
    Ok(format!("C0 order {:.3}, C1 order {:.3}", r.fitted_order, r.fitted_order_c1))
}

fn var_inequality() -> Check {
    let mut out = Vec::new();
    for d in [0.05, 0.1, 0.2, 0.4] {
        let v = var_min(1.0, d, 100_000).map_err(|e| e.to_string())?;
        ensure(v >= PI * d * d, format!("δ={d}: {v} < {}", PI * d * d))?;
        out.push(format!("{v:.4}≥{:.4}", PI * d * d));
    }
    Ok(out.join(", "))
}

fn threshold_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let budget = PixelBudget::default();
    let mut detected = 0;
    for k in 0..100 {
        let p = Params64::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let v = classify_pixel(&p, budget.n_seeds, budget.n_iters, 1000 + k);
        if v.verdict == Verdict::NDetected {
            detected += 1;
            ensure(v.replays(), format!("witness at {p:?} does not replay"))?;
            let again = classify_pixel(&p, budget.n_seeds, budget.n_iters, 1000 + k);
            ensure(again == v, format!("verdict at {p:?} not deterministic"))?;
        }
    }
    // Integrable members, where neither coordinate can drift, must never be
    // flagged.
    let mut false_pos = 0;
    for k in 0..100 {
        let a = rng.gen_range(0.0..2.0);
        let p = if k % 2 == 0 { Params64::new(a, 0.0) } else { Params64::new(0.0, a) };
        if classify_pixel(&p, 4, 10_000, k).verdict == Verdict::NDetected {
            false_pos += 1;
        }
    }
    ensure(false_pos == 0, format!("{false_pos} false positives"))?;
    Ok(format!("{detected}/100 detected, all replay; 0 false positives on 100 integrable pixels"))
}

fn cusp_check() -> Check {
    let budget = PixelBudget::default();
    let r = cusp_experiment(0.2, &[0.02, 0.04, 0.06, 0.08, 0.1], &budget, 11);
    let bad: Vec<f64> = r.rows.iter().filter(|x| x.verdict != Verdict::EPresumed).map(|x| x.alpha).collect();
    ensure(bad.is_empty(), format!("λ=0.2 detected at α={bad:?}"))?;
    let d = classify_pixel(&Params64::new(0.45, 0.45), budget.n_seeds, budget.n_iters, 12);
    ensure(d.verdict == Verdict::NDetected, "diagonal α=0.45 not detected")?;
    Ok(format!("λ=0.2: 5/5 EPresumed; diagonal 0.45 NDetected after {} steps", d.iterations_used))
}

fn declared_out_of_reach() -> Check {
    // Only checks that the data-emitting experiments run; they carry no
    // quantitative target.
    let errs = rescaling_convergence(0.1, &[1, 4, 16], 64).map_err(|e| e.to_string())?;
    ensure(errs.iter().all(|e| e.is_finite()), "rescaling errors not finite")?;
    let g = conjecture_rescaled_set(4, 3, 3, &PixelBudget { n_seeds: 2, n_iters: 2_000 }, 3)
        .map_err(|e| e.to_string())?;
    ensure(g.harper.len() == 9 && g.nontwist.len() == 9, "conjecture grids incomplete")?;
    Ok("full-resolution figure, exact thresholds and limits not desk-reproducible; experiments emit data".into())
}

fn main() {
    println!("acceptance criteria");
    let mut all = Vec::new();
    all.push(run(1, "symmetry suite", 10, symmetry_suite));
    all.push(run(2, "fixed-point formulas", 1, fixed_point_formulas));
    all.push(run(3, "8x8 scan of [0.5,1]^2", 60, prop_1_4_scan));
    let mut inner = None;
    all.push(run(4, "rotation set at (1,1)", 120, || {
        square_rotation_set().map(|(d, s)| {
            inner = Some(s);
            d
        })
    }));
    all.push(run(5, "certified mode-lock (1,1)", 60, || modelock_square(inner.as_ref())));
    all.push(run(6, "certified mode-lock (.5,.5)", 120, modelock_diamond));
    all.push(run(7, "scaling upper bound", 600, scaling_upper_bound));
    all.push(run(8, "Euler convergence", 120, euler_order));
    all.push(run(9, "Var inequality", 10, var_inequality));
    all.push(run(10, "threshold soundness", 60, threshold_soundness));
    all.push(run(11, "cusp qualitative check", 120, cusp_check));
    all.push(run(12, "declared not reproducible", 60, declared_out_of_reach));
    let failed = all.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", all.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
