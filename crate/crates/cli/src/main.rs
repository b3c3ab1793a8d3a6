//! `pqnorm` command-line interface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pqnorm::io::{read_matrix, round12, sig12};
use pqnorm::krivine::{self, NormPair};
use pqnorm::relaxation::{CpOptions, ProblemInstance};
use pqnorm::rounding::{round_pipeline, RoundOptions};
use pqnorm::{factorization, Error};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "pqnorm", version, about = "Certified p→q operator norm approximation")]
struct Cli {
    /// Domain exponent p ∈ [2, ∞] ("inf" accepted)
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Range exponent q ∈ [1, 2]
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Truncation order K of the series
    #[arg(long, global = true, default_value_t = krivine::DEFAULT_ORDER)]
    order: usize,
    /// Grid resolution (points per axis, or points in a sweep)
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Sample count for Monte Carlo and rounding
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Input matrix (CSV or JSON)
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Certification tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximation ratios: a sweep over p with q = p*, a full (p, q) grid, or a single pair
    Bounds {
        #[arg(long, default_value_t = 2.0)]
        p_min: f64,
        #[arg(long, default_value_t = 100.0)]
        p_max: f64,
        /// Sweep a grid in (a, b) = (1/(p−1), q−1) instead of the q = p* slice
        #[arg(long)]
        full: bool,
    },
    /// Relax, transform and round a matrix
    Round,
    /// Solve the dual program and emit the factorization certificate
    Factorize,
    /// Run a verification suite, one JSON line per check
    Verify {
        #[arg(value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Check the coefficient conditions over an (a, b) grid
    CheckConditions {
        #[arg(long, default_value_t = 29)]
        k_max: usize,
    },
    /// Certify the defect bound for one pair or over an (a, b) grid
    CertifyDefect {
        #[arg(long, default_value_t = 31)]
        t: usize,
        /// Radius δ; defaults to asinh(0.974203)
        #[arg(long)]
        delta: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Conditions,
    Contours,
    Factorization,
    All,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Domain(_) | Error::Input(_) | Error::Io { .. }) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn pair(cli: &Cli) -> anyhow::Result<NormPair<f64>> {
    let (Some(p), Some(q)) = (cli.p, cli.q) else {
        return Err(Error::Input("--p and --q are required".into()).into());
    };
    Ok(NormPair::new(p, q)?)
}

fn instance(cli: &Cli) -> anyhow::Result<ProblemInstance> {
    let pair = pair(cli)?;
    let Some(path) = &cli.input else {
        return Err(Error::Input("--in is required".into()).into());
    };
    Ok(ProblemInstance::new(read_matrix(path)?, pair)?)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round12(x))) {
                *n = x;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    Ok(serde_json::to_string(&v)?)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let tol = cli.tol.unwrap_or(krivine::DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(Error::Input(format!("--tol must be positive, got {tol}")).into());
    }
    match &cli.command {
        Command::Bounds { p_min, p_max, full } => bounds(cli, *p_min, *p_max, *full, tol),
        Command::Round => {
            let inst = instance(cli)?;
            let opts = RoundOptions {
                order: cli.order,
                samples: cli.samples.unwrap_or(10_000),
                seed: cli.seed,
                tol,
                cp: CpOptions { seed: cli.seed, ..Default::default() },
            };
            let (report, _, rounded) = round_pipeline(&inst, &opts)?;
            let body = serde_json::json!({ "report": report, "y": rounded.y, "x": rounded.x });
            emit(cli.out.as_deref(), &(to_json(&body)? + "\n"))?;
            Ok(true)
        }
        Command::Factorize => {
            let inst = instance(cli)?;
            let dual = factorization::solve_dual(&inst, 20_000, cli.tol.unwrap_or(1e-10))?;
            let cert = factorization::build_certificate(&inst, &dual.s, &dual.t)?;
            let gap_flagged = dual.gap > 1e-4 * dual.dual_value;
            let ok = cert.reconstruction_error < 1e-8
                && cert.spectral_norm_b <= 1.0 + 1e-6
                && cert.norm_product <= cert.dual_value + 1e-6;
            let body = serde_json::json!({
                "certificate": cert,
                "primal_value": dual.primal_value,
                "gap": dual.gap,
                "gap_flagged": gap_flagged,
                "iterations": dual.iterations,
            });
            emit(cli.out.as_deref(), &(to_json(&body)? + "\n"))?;
            Ok(ok)
        }
        Command::Verify { suite } => {
            let lines = verify::run_suite(*suite, cli.seed, cli.samples, cli.grid)?;
            let passed = lines.iter().all(|l| l.passed());
            let mut text = String::new();
            for l in &lines {
                text += &to_json(&l.body)?;
                text.push('\n');
            }
            emit(cli.out.as_deref(), &text)?;
            Ok(passed)
        }
        Command::CheckConditions { k_max } => {
            let grid = krivine::ab_grid::<f64>(cli.grid.unwrap_or(101));
            let report = krivine::check_conditions(*k_max, &grid, cli.order)?;
            emit(cli.out.as_deref(), &(to_json(&report)? + "\n"))?;
            Ok(report.passed)
        }
        Command::CertifyDefect { t, delta } => certify(cli, *t, delta.unwrap_or(0.974203f64.asinh())),
    }
}

fn bounds(cli: &Cli, p_min: f64, p_max: f64, full: bool, tol: f64) -> anyhow::Result<bool> {
    let max_order = cli.order * 8;
    let report = |pair: &NormPair<f64>| krivine::approx_ratio_adaptive(pair, cli.order, tol, max_order);
    let mut out = String::new();
    if full {
        let n = cli.grid.unwrap_or(11);
        let pairs: Vec<NormPair<f64>> =
            krivine::ab_grid::<f64>(n).into_iter().map(|(a, b)| NormPair::from_ab(a, b)).collect::<Result<_, _>>()?;
        let rows: Vec<_> = pairs.par_iter().map(report).collect::<Result<_, _>>()?;
        out += "p,q,a,b,c_ab,ratio_ours,ratio_krivine,ratio_steinberg,K,tail_bound\n";
        for r in rows {
            let cells = [r.pair.p(), r.pair.q(), r.pair.a(), r.pair.b(), r.c_ab, r.ratio, r.krivine_ratio, r.steinberg_ratio];
            let mut line: Vec<String> = cells.iter().map(|&x| sig12(x)).collect();
            line.push(r.order.to_string());
            line.push(sig12(r.tail_bound));
            out += &(line.join(",") + "\n");
        }
    } else {
        let pairs: Vec<NormPair<f64>> = if let Some(p) = cli.p {
            let q = cli.q.unwrap_or(p / (p - 1.0));
            let q = if p.is_infinite() { cli.q.unwrap_or(1.0) } else { q };
            vec![NormPair::new(p, q)?]
        } else {
            if !(p_min >= 2.0 && p_max >= p_min && p_max.is_finite()) {
                bail!(Error::Input(format!("sweep range [{p_min}, {p_max}] must satisfy 2 <= p_min <= p_max < inf")));
            }
            let n = cli.grid.unwrap_or(99).max(1);
            (0..n)
                .map(|i| {
                    let p = if n == 1 { p_min } else { p_min + (p_max - p_min) * i as f64 / (n - 1) as f64 };
                    NormPair::new(p, p / (p - 1.0))
                })
                .collect::<Result<_, _>>()?
        };
        let rows: Vec<_> = pairs.par_iter().map(report).collect::<Result<_, _>>()?;
        out += "p,p_star,ratio_ours,ratio_krivine,ratio_steinberg,K\n";
        for r in rows {
            let cells = [r.pair.p(), r.pair.p_star(), r.ratio, r.krivine_ratio, r.steinberg_ratio];
            let mut line: Vec<String> = cells.iter().map(|&x| sig12(x)).collect();
            line.push(r.order.to_string());
            out += &(line.join(",") + "\n");
        }
    }
    emit(cli.out.as_deref(), &out)?;
    Ok(true)
}

fn certify(cli: &Cli, t: usize, delta: f64) -> anyhow::Result<bool> {
    if cli.p.is_some() || cli.q.is_some() {
        let cert = krivine::certify_defect(&pair(cli)?, t, delta, cli.order)?;
        emit(cli.out.as_deref(), &(to_json(&cert)? + "\n"))?;
        return Ok(true);
    }
    let grid = krivine::ab_grid::<f64>(cli.grid.unwrap_or(101));
    let certs: Vec<_> = grid
        .par_iter()
        .map(|&(a, b)| krivine::certify_defect(&NormPair::from_ab(a, b)?, t, delta, cli.order).map(|c| ((a, b), c)))
        .collect::<Result<_, _>>()?;
    let worst = certs
        .iter()
        .max_by(|x, y| x.1.h_err.total_cmp(&y.1.h_err))
        .expect("grid is nonempty");
    let rho = krivine::SINH_INV_ONE / (1.0 + krivine::EPS0);
    let (max_h, at) = krivine::max_h_on_grid(&grid, rho, cli.order)?;
    let passed = max_h <= 1.0 + 1e-9;
    let body = serde_json::json!({
        "points": grid.len(),
        "t_odd": t,
        "delta": delta,
        "max_h_err": worst.1.h_err,
        "max_h_err_at": worst.0,
        "min_rho_certified": certs.iter().map(|c| c.1.rho_certified).fold(f64::INFINITY, f64::min),
        "rho_eps0": rho,
        "max_h_at_rho_eps0": max_h,
        "max_h_at": at,
        "passed": passed,
    });
    emit(cli.out.as_deref(), &(to_json(&body)? + "\n"))?;
    Ok(passed)
}
