//! Verification suites behind `pqnorm verify`.

use nalgebra::DMatrix;
use pqnorm::krivine::{self, NormPair};
use pqnorm::oracles;
use pqnorm::relaxation::{solve_cp, CpOptions, ProblemInstance};
use pqnorm::rounding::{build_transformed_gram, denominator_check, numerator_check};
use pqnorm::{factorization, stream_rng, Result};
use rand::Rng;
use serde_json::{json, Value};

use crate::Suite;

pub struct Line {
    pub body: Value,
}

impl Line {
    fn new(suite: &str, check: &str, passed: bool, detail: Value) -> Self {
        let mut body = json!({ "suite": suite, "check": check, "passed": passed });
        if let (Value::Object(b), Value::Object(d)) = (&mut body, detail) {
            b.extend(d);
        }
        Line { body }
    }

    pub fn passed(&self) -> bool {
        self.body["passed"].as_bool().unwrap_or(false)
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn derive_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index.wrapping_mul(GOLDEN))
}

pub fn run_suite(suite: Suite, seed: u64, samples: Option<usize>, grid: Option<usize>) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Identities | Suite::All) {
        identities(&mut out, seed, samples.unwrap_or(1_000_000))?;
    }
    if matches!(suite, Suite::Conditions | Suite::All) {
        conditions(&mut out, grid.unwrap_or(101))?;
    }
    if matches!(suite, Suite::Contours | Suite::All) {
        contours(&mut out, grid.unwrap_or(5))?;
    }
    if matches!(suite, Suite::Factorization | Suite::All) {
        factorization_suite(&mut out, seed)?;
    }
    Ok(out)
}

fn check_line(suite: &str, r: &oracles::IdentityCheckResult) -> Line {
    Line::new(suite, &r.target, r.passed, serde_json::to_value(r).unwrap_or(Value::Null))
}

fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

fn identities(out: &mut Vec<Line>, seed: u64, n: usize) -> Result<()> {
    let levels = [0.0, 0.3, 0.7, 1.0];
    let mut idx = 0;
    for &a in &levels {
        for &b in &levels {
            for &rho in &[0.2, 0.5, 0.8] {
                let r = oracles::mc_f_ab(a, b, rho, n, derive_seed(seed, idx))?;
                out.push(check_line("identities", &r));
                idx += 1;
            }
        }
    }
    for &c in &levels {
        for r in oracles::hermite_coeff_check(c, 15)? {
            out.push(check_line("identities", &r));
        }
    }
    for &(a, b, rho) in &[(0.0, 0.0, 0.5), (0.3, 0.7, 0.8), (0.5, 0.5, 0.2), (0.9, 0.1, 0.6)] {
        out.push(check_line("identities", &oracles::noise_correlation_check(a, b, rho, 99)?));
    }
    let pair = NormPair::new(4.0, 4.0 / 3.0)?;
    let inst = ProblemInstance::new(random_matrix(5, 4, derive_seed(seed, 1000)), pair)?;
    let sol = solve_cp(&inst, &CpOptions { seed, ..Default::default() })?;
    let cab = krivine::compute_c_ab(&pair, krivine::DEFAULT_ORDER, krivine::DEFAULT_TOL)?;
    let tg = build_transformed_gram(&sol, &pair, cab.c_ab, krivine::DEFAULT_ORDER)?;
    let mc = (n / 10).max(10_000);
    let num = numerator_check(&tg, &sol, &pair, mc, derive_seed(seed, 1001))?;
    out.push(Line::new(
        "identities",
        "numerator(p=4,q=4/3)",
        num.max_sigmas <= oracles::SIGMA_LIMIT,
        json!({ "max_sigmas": num.max_sigmas, "normalization": num.normalization, "samples": mc }),
    ));
    let den = denominator_check(&tg, &pair, mc, derive_seed(seed, 1002))?;
    out.push(Line::new(
        "identities",
        "denominator(p=4,q=4/3)",
        den.sigmas_above <= oracles::SIGMA_LIMIT,
        serde_json::to_value(den).unwrap_or(Value::Null),
    ));
    Ok(())
}

fn conditions(out: &mut Vec<Line>, n: usize) -> Result<()> {
    let grid = krivine::ab_grid::<f64>(n);
    let report = krivine::check_conditions(29, &grid, krivine::DEFAULT_ORDER)?;
    for d in &report.degrees {
        out.push(Line::new(
            "conditions",
            &format!("{:?}(k={})", d.condition, d.k),
            d.passed,
            json!({ "worst_margin": d.worst_margin, "worst_point": d.worst_point, "points": report.points }),
        ));
    }
    let equality = krivine::condition_margins(0.0f64, 0.0, 29)?
        .into_iter()
        .filter(|(_, c, _)| *c == krivine::Condition::C1)
        .fold(0.0f64, |m, (_, _, v)| m.max(v.abs()));
    out.push(Line::new(
        "conditions",
        "C1 equality at a=b=0",
        equality <= krivine::CONDITION_TOL,
        json!({ "max_abs_margin": equality }),
    ));
    Ok(())
}

fn contours(out: &mut Vec<Line>, n: usize) -> Result<()> {
    let n = n.max(2);
    let levels: Vec<f64> = (0..n).map(|i| 0.95 * i as f64 / (n - 1) as f64).collect();
    for &a in &levels {
        for &b in &levels {
            let r = oracles::contour_magnitude_check(a, b, 6.0, 0.01, 200)?;
            out.push(Line::new(
                "contours",
                &format!("arc(a={a},b={b})"),
                r.arc_passed,
                json!({ "min_abs": r.arc_min, "at": r.arc_argmin, "skipped": r.skipped }),
            ));
            // reported, not asserted: near a = b = 1 the segment minimum approaches 1 at fixed ε
            out.push(Line::new(
                "contours",
                &format!("segment(a={a},b={b})"),
                true,
                json!({ "min_abs": r.segment_min, "at": r.segment_argmin, "above_one": r.segment_passed, "asserted": false }),
            ));
        }
    }
    let (v, b) = oracles::beta_fact_check(1000, 0.999)?;
    out.push(Line::new("contours", "beta_fact", v >= 1.003, json!({ "min_value": v, "at_b": b })));
    for &(a, b) in &[(0.0, 0.0), (0.5, 0.5), (0.3, 0.7)] {
        let inv = krivine::inverse_series(&NormPair::from_ab(a, b)?, krivine::DEFAULT_ORDER)?;
        for k in [3, 5, 7, 9] {
            let c = oracles::contour_inverse_coeff(a, b, k, oracles::CONTOUR_RADIUS)?;
            let r = oracles::IdentityCheckResult::deterministic(format!("residue(a={a},b={b},k={k})"), c, inv.coeff(k), 1e-6);
            out.push(check_line("contours", &r));
        }
    }
    for &a in &levels {
        for &b in &levels {
            let (r, k) = oracles::inverse_coeff_bound_check(a, b, 121)?;
            out.push(Line::new(
                "contours",
                &format!("inverse_decay(a={a},b={b})"),
                r <= 1.0,
                json!({ "max_scaled": r, "at_k": k }),
            ));
        }
    }
    Ok(())
}

fn factorization_suite(out: &mut Vec<Line>, seed: u64) -> Result<()> {
    let pair = NormPair::new(4.0, 4.0 / 3.0)?;
    for i in 0..10 {
        let inst = ProblemInstance::new(random_matrix(6, 5, derive_seed(seed, 2000 + i)), pair)?;
        let dual = factorization::solve_dual(&inst, 20_000, 1e-10)?;
        let c = factorization::build_certificate(&inst, &dual.s, &dual.t)?;
        let passed = c.reconstruction_error < 1e-8
            && c.spectral_norm_b <= 1.0 + 1e-6
            && c.norm_product <= c.dual_value + 1e-6
            && dual.gap <= 1e-4 * dual.dual_value;
        out.push(Line::new(
            "factorization",
            &format!("instance {i}"),
            passed,
            json!({
                "reconstruction_error": c.reconstruction_error,
                "spectral_norm_b": c.spectral_norm_b,
                "norm_product": c.norm_product,
                "dual_value": c.dual_value,
                "primal_value": dual.primal_value,
                "gap": dual.gap,
            }),
        ));
    }
    Ok(())
}
