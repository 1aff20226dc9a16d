use std::fmt::Write as _;

use anyhow::{anyhow, Context};
use harper_core::certify::{
    beta_plus_bound, half_plane_bound, modelock_verify, CertRequest, HalfPlaneCertificate, ModeLock, ModelockOptions,
};
use harper_core::diffusion::{
    estimate_beta_minus_upper, render_csv, render_pgm, render_ppm, scan, PixelBudget, ScanSpec, ThresholdBudget,
    Verdict,
};
use harper_core::flows::{cusp_experiment, euler_convergence};
use harper_core::nontwist::{conjecture_csv, conjecture_rescaled_set, mask_pgm, rescaling_convergence, symmetric_difference_fraction};
use harper_core::rotset::{approx_rotation_set, hausdorff, shape_classify, ConvexPolygon, RotsetBudget};
use harper_core::{fixed_points, Error, Params64};
use serde_json::{json, Value};

use crate::args::*;

/// Outcome of one command before it is written out.
pub struct Output {
    pub result: Value,
    /// `(suffix, bytes)`; the suffix is appended to the output prefix.
    pub files: Vec<(String, Vec<u8>)>,
    /// False for a scientific negative (exit code 1).
    pub ok: bool,
    /// One-line human summary for stderr.
    pub summary: String,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Negative(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::DegenerateParams | Error::NonpositiveAlpha(_) | Error::EmptyPolygon => {
                Failure::Usage(e.into())
            }
            _ => Failure::Negative(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

type Run = Result<Output, Failure>;

pub fn execute(cfg: &RunConfig) -> Run {
    let seed = cfg.seed;
    match &cfg.command {
        Command::Scan(a) => cmd_scan(a, seed),
        Command::Rotset(a) => cmd_rotset(a, seed),
        Command::Certify(a) => cmd_certify(a),
        Command::Betaplus(a) => cmd_betaplus(a, seed),
        Command::Euler(a) => cmd_euler(a),
        Command::Nontwist(a) => cmd_nontwist(a, seed),
        Command::Fixedpoints(a) => cmd_fixedpoints(a),
        Command::Cusp(a) => cmd_cusp(a, seed),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn cmd_scan(a: &ScanArgs, seed: u64) -> Run {
    let spec = ScanSpec { alpha_range: a.alpha, beta_range: a.beta, nx: a.res[0], ny: a.res[1] };
    let budget = PixelBudget { n_seeds: a.budget.seeds, n_iters: a.budget.iters };
    let grid = scan(&spec, &budget, seed)?;
    let n = grid.count(Verdict::NDetected);
    let e = grid.count(Verdict::EPresumed);
    Ok(Output {
        result: json!({ "n_detected": n, "e_presumed": e, "pixels": grid.verdicts.len() }),
        files: vec![
            ("csv".into(), render_csv(&grid).into_bytes()),
            ("ppm".into(), render_ppm(&grid)),
            ("pgm".into(), render_pgm(&grid)),
        ],
        ok: true,
        summary: format!("{n} NDetected, {e} EPresumed"),
    })
}

fn cmd_rotset(a: &RotsetArgs, seed: u64) -> Run {
    let p = Params64::new(a.alpha, a.beta);
    if !p.is_finite() {
        return Err(Failure::Usage(anyhow!("parameters must be finite")));
    }
    let set = approx_rotation_set(&p, &RotsetBudget::new(a.orbits, a.iters, seed));
    let shape = shape_classify(&set, 1e-9);
    // Per-step displacement is bounded by the kick amplitudes.
    let bx = ConvexPolygon::rect(-a.alpha.abs(), a.alpha.abs(), -a.beta.abs(), a.beta.abs());
    let h = hausdorff(&set, &bx)?;
    let (wx, wy) = set.widths();
    Ok(Output {
        result: json!({
            "params": p,
            "polygon": set,
            "shape": shape,
            "widths": [wx, wy],
            "hausdorff_to_amplitude_box": h,
        }),
        files: vec![],
        ok: true,
        summary: format!("{shape:?}, Hausdorff distance to the amplitude box {h:.3e}"),
    })
}

fn cmd_certify(a: &CertifyArgs) -> Run {
    if let Some(path) = &a.replay {
        return replay(path);
    }
    if let Some(which) = a.which {
        let w = match which {
            Which::Square => ModeLock::Square11,
            Which::Diamond => ModeLock::DiamondHalf,
        };
        let opts = ModelockOptions { step: a.step, target: a.target, ..ModelockOptions::default() };
        return match modelock_verify(w, &opts) {
            Ok(r) => Ok(Output {
                summary: format!(
                    "{:?}: rigorous bound {:.9} (grid max {:.9}), verdict {}",
                    w, r.certificate.bound.rigorous_bound, r.certificate.bound.grid_max, r.verdict
                ),
                ok: r.verdict,
                result: to_value(&r),
                files: vec![],
            }),
            Err(Error::NotCertified { .. }) => {
                // Report the failing certificate rather than only the error.
                let cert = half_plane_bound(&w.params(), &w.request(a.step, a.target))?;
                Ok(Output {
                    summary: format!(
                        "{w:?}: not certified, rigorous bound {:.9} vs target {}",
                        cert.bound.rigorous_bound, cert.bound.target
                    ),
                    ok: false,
                    result: json!({ "which": w, "certificate": cert, "verdict": false }),
                    files: vec![],
                })
            }
            Err(e) => Err(e.into()),
        };
    }
    let (Some(v), Some(u), Some(alpha), Some(beta)) = (a.v, a.u, a.alpha, a.beta) else {
        return Err(Failure::Usage(anyhow!("give --which, --replay, or --alpha --beta --v --u")));
    };
    let req = CertRequest { v, u, c: a.c, power: a.power, step: a.step, target: a.target };
    let cert = half_plane_bound(&Params64::new(alpha, beta), &req)?;
    Ok(Output {
        summary: format!(
            "rigorous bound {:.9} vs target {}, verdict {}",
            cert.bound.rigorous_bound, cert.bound.target, cert.bound.verdict
        ),
        ok: cert.bound.verdict,
        result: json!({ "certificate": cert }),
        files: vec![],
    })
}

/// Finds a certificate in a stored document: the document itself, its
/// `result`, or a `certificate` field of either.
fn find_certificate(doc: &Value) -> Option<HalfPlaneCertificate> {
    let candidates = [
        Some(doc),
        doc.get("certificate"),
        doc.get("result"),
        doc.get("result").and_then(|r| r.get("certificate")),
    ];
    candidates.into_iter().flatten().find_map(|v| serde_json::from_value(v.clone()).ok())
}

fn replay(path: &std::path::Path) -> Run {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let stored = find_certificate(&doc).ok_or_else(|| anyhow!("no certificate in {}", path.display()))?;
    let req = CertRequest {
        v: stored.v,
        u: stored.u,
        c: stored.c,
        power: stored.power,
        step: stored.bound.grid_step,
        target: Some(stored.bound.target),
    };
    let fresh = half_plane_bound(&stored.params, &req)?;
    let diff = (fresh.bound.grid_max - stored.bound.grid_max).abs();
    let identical = fresh.bound.grid_max.to_bits() == stored.bound.grid_max.to_bits();
    let ok = identical || diff <= 1e-12;
    Ok(Output {
        summary: format!(
            "replayed grid max {:.17e} vs stored {:.17e}: {}",
            fresh.bound.grid_max,
            stored.bound.grid_max,
            if identical { "bit-identical" } else if ok { "within 1e-12" } else { "MISMATCH" }
        ),
        ok,
        result: json!({
            "stored": stored,
            "recomputed": fresh,
            "grid_max_diff": diff,
            "bit_identical": identical,
            "match": ok,
        }),
        files: vec![],
    })
}

fn cmd_betaplus(a: &BetaplusArgs, seed: u64) -> Run {
    if !(a.ceiling > 0.0) {
        return Err(Failure::Usage(anyhow!("ceiling must be positive")));
    }
    let mut csv = String::from("alpha,beta_minus_upper,bound_8_over_pi\n");
    let mut rows = Vec::new();
    let mut ok = true;
    for (k, &alpha) in a.alpha.iter().enumerate() {
        let bound = beta_plus_bound(alpha);
        let budget = ThresholdBudget {
            pixel: PixelBudget { n_seeds: a.seeds, n_iters: a.iters },
            total: a.total,
            seed: harper_core::seeds::task_seed(seed, k as u64, 0),
        };
        match estimate_beta_minus_upper(alpha, 0.0, a.ceiling * bound, a.steps, &budget) {
            Ok(r) => {
                writeln!(csv, "{alpha:.16e},{:.16e},{bound:.16e}", r.beta_minus_upper).expect("string write");
                ok &= r.beta_minus_upper <= bound;
                rows.push(json!({ "alpha": alpha, "bound": bound, "estimate": r }));
            }
            Err(e @ Error::UpperEndpointNotDiffusive { .. }) => {
                ok = false;
                writeln!(csv, "{alpha:.16e},,{bound:.16e}").expect("string write");
                rows.push(json!({ "alpha": alpha, "bound": bound, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Output {
        summary: format!("{} values of α, all detected below (8/π)/√α: {ok}", a.alpha.len()),
        result: json!({ "rows": rows }),
        files: vec![("csv".into(), csv.into_bytes())],
        ok,
    })
}

fn cmd_euler(a: &EulerArgs) -> Run {
    let r = euler_convergence(a.lambda, &a.alphas, a.sample)?;
    Ok(Output {
        summary: format!("C0 order {:.4}, C1 order {:.4}", r.fitted_order, r.fitted_order_c1),
        files: vec![("csv".into(), r.to_csv().into_bytes())],
        result: to_value(&r),
        ok: true,
    })
}

fn cmd_nontwist(a: &NontwistArgs, seed: u64) -> Run {
    let errs = rescaling_convergence(a.alpha0, &a.n_list, a.grid)?;
    let budget = PixelBudget { n_seeds: a.seeds, n_iters: a.iters };
    let g = conjecture_rescaled_set(a.n, a.res[0], a.res[1], &budget, seed)?;
    let e_mask = g.harper_e_mask();
    let a_mask = g.nontwist_unbounded_mask();
    // The conjectured limit of the rescaled E is the complement of A.
    let not_a: Vec<bool> = a_mask.iter().map(|m| !m).collect();
    let sd = symmetric_difference_fraction(&e_mask, &not_a)?;
    Ok(Output {
        summary: format!("rescaling errors {errs:.3?}; E vs complement of A differ on {:.1}% of cells", 100.0 * sd),
        result: json!({
            "alpha0": a.alpha0,
            "n_list": a.n_list,
            "rescaling_errors": errs,
            "n": a.n,
            "e_cells": e_mask.iter().filter(|m| **m).count(),
            "a_cells": a_mask.iter().filter(|m| **m).count(),
            "symmetric_difference_fraction": sd,
        }),
        files: vec![
            ("csv".into(), conjecture_csv(&g).into_bytes()),
            ("harper.pgm".into(), mask_pgm(&e_mask, g.nx, g.ny)),
            ("nontwist.pgm".into(), mask_pgm(&a_mask, g.nx, g.ny)),
        ],
        ok: true,
    })
}

fn cmd_fixedpoints(a: &FixedpointsArgs) -> Run {
    let reports = fixed_points(&Params64::new(a.alpha, a.beta))?;
    let mut summary = String::new();
    for r in &reports {
        let ev = r.eigenvalues;
        write!(
            summary,
            "\n  ({}, {}): {:?}, eigenvalues {:.12}{:+.12}i, {:.12}{:+.12}i",
            r.location.x, r.location.y, r.classification, ev[0].re, ev[0].im, ev[1].re, ev[1].im
        )
        .expect("string write");
    }
    Ok(Output { summary: format!("four fixed points:{summary}"), result: to_value(&reports), files: vec![], ok: true })
}

fn cmd_cusp(a: &CuspArgs, seed: u64) -> Run {
    let budget = PixelBudget { n_seeds: a.budget.seeds, n_iters: a.budget.iters };
    let r = cusp_experiment(a.lambda, &a.alphas, &budget, seed);
    let mut csv = String::from("alpha,beta,verdict,dx_max,dy_max,annulus_dy_max\n");
    for row in &r.rows {
        writeln!(
            csv,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            row.alpha,
            row.beta,
            row.verdict.as_str(),
            row.dx_max,
            row.dy_max,
            row.annulus_dy_max
        )
        .expect("string write");
    }
    Ok(Output {
        summary: format!("λ = {}: first detected α = {:?}", a.lambda, r.first_detected),
        result: to_value(&r),
        files: vec![("csv".into(), csv.into_bytes())],
        ok: true,
    })
}
