use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "harper", version, about = "Experiments on the kicked Harper map F = H_α ∘ V_β")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Re-run the configuration stored in an output JSON and compare digests.
    #[arg(long, value_name = "FILE")]
    pub verify: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "HARPER_THREADS")]
    pub threads: Option<usize>,

    /// Output path prefix; files are `<prefix>.json`, `<prefix>.csv`, ...
    /// Without it the JSON document goes to stdout.
    #[arg(long, short, global = true, value_name = "PREFIX")]
    pub out: Option<PathBuf>,

    /// Master seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// Everything that determines the output of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Classify a rectangle of parameters as diffusive or not.
    Scan(ScanArgs),
    /// Approximate the rotation set at one parameter.
    Rotset(RotsetArgs),
    /// Rigorous half-plane bounds and the two mode-locking checks.
    Certify(CertifyArgs),
    /// Bisect for the smallest detected diffusive β at large α.
    Betaplus(BetaplusArgs),
    /// Convergence of the map iterates to the flow of the limiting field.
    Euler(EulerArgs),
    /// Non-twist rescaling convergence and the rescaled-set comparison.
    Nontwist(NontwistArgs),
    /// The four fixed points with eigenvalues and type.
    Fixedpoints(FixedpointsArgs),
    /// Classification along a ray β = λα near the origin.
    Cusp(CuspArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scan(_) => "scan",
            Command::Rotset(_) => "rotset",
            Command::Certify(_) => "certify",
            Command::Betaplus(_) => "betaplus",
            Command::Euler(_) => "euler",
            Command::Nontwist(_) => "nontwist",
            Command::Fixedpoints(_) => "fixedpoints",
            Command::Cusp(_) => "cusp",
        }
    }
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err("range ends must be finite".into());
    }
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok([lo, hi])
}

fn parse_res(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = a.parse().map_err(|e| format!("{a}: {e}"))?;
    let h: usize = b.parse().map_err(|e| format!("{b}: {e}"))?;
    if w == 0 || h == 0 {
        return Err("resolution must be positive".into());
    }
    Ok([w, h])
}

fn parse_pair(s: &str) -> Result<[i64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected I,J")?;
    Ok([a.trim().parse().map_err(|e| format!("{a}: {e}"))?, b.trim().parse().map_err(|e| format!("{b}: {e}"))?])
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Seeds per pixel.
    #[arg(long, default_value_t = 32)]
    pub seeds: u64,
    /// Iterations per seed.
    #[arg(long, default_value_t = 100_000)]
    pub iters: u64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_range, value_name = "LO:HI")]
    pub alpha: [f64; 2],
    #[arg(long, value_parser = parse_range, value_name = "LO:HI")]
    pub beta: [f64; 2],
    #[arg(long, value_parser = parse_res, value_name = "WxH", default_value = "64x64")]
    pub res: [usize; 2],
    #[command(flatten)]
    pub budget: Budget,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotsetArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 256)]
    pub orbits: usize,
    #[arg(long, default_value_t = 100_000)]
    pub iters: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// ρ(F_{1,1}) = [-1,1]².
    Square,
    /// ρ(F_{1/2,1/2}) = {|x| + |y| ≤ 1/2}.
    Diamond,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyArgs {
    /// One of the two mode-locking statements.
    #[arg(long, conflicts_with_all = ["replay", "v"])]
    pub which: Option<Which>,
    /// Recompute a stored certificate and compare its grid maximum.
    #[arg(long, value_name = "FILE")]
    pub replay: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, requires = "v")]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "v")]
    pub beta: Option<f64>,
    /// Integer normal of the line, `I,J`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, requires_all = ["u", "alpha", "beta"])]
    pub v: Option<[i64; 2]>,
    /// Integer translation, `I,J`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub u: Option<[i64; 2]>,
    /// Offset of the line `⟨z, v⟩ = c`.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1)]
    pub power: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Bound to beat instead of `⟨u, v⟩`.
    #[arg(long, allow_negative_numbers = true)]
    pub target: Option<f64>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaplusArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 12)]
    pub steps: u32,
    #[arg(long, default_value_t = 8)]
    pub seeds: u64,
    #[arg(long, default_value_t = 100_000)]
    pub iters: u64,
    /// Cap on orbit steps per α.
    #[arg(long, default_value_t = 10_000_000)]
    pub total: u64,
    /// Bisection ceiling as a multiple of (8/π)/√α.
    #[arg(long, default_value_t = 1.0)]
    pub ceiling: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.01,0.005,0.0025")]
    pub alphas: Vec<f64>,
    /// Number of quasi-random starting points.
    #[arg(long, default_value_t = 32)]
    pub sample: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontwistArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha0: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    pub n_list: Vec<u64>,
    /// Sample grid side for the rescaling comparison.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Integer shift of the rescaled Harper scan.
    #[arg(long, default_value_t = 4)]
    pub n: u64,
    #[arg(long, value_parser = parse_res, value_name = "WxH", default_value = "16x16")]
    pub res: [usize; 2],
    #[arg(long, default_value_t = 8)]
    pub seeds: u64,
    #[arg(long, default_value_t = 20_000)]
    pub iters: u64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedpointsArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.04,0.06,0.08,0.1")]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub budget: Budget,
}
