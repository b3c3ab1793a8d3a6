//! Rounding of the relaxation: the transformed Gram matrix, its Gaussian projections and the
//! Hölder-dual rounding map.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::krivine::{self, NormPair};
use crate::norms::signed_pow;
use crate::relaxation::{row_norms, ProblemInstance, RelaxationSolution};
use crate::{specfun, stream_rng, Error, Result};

pub use crate::norms::holder_dual;

/// Largest negative eigenvalue that is clipped silently.
pub const MAX_REPAIR_SHIFT: f64 = 1e-6;
const SAMPLE_CHUNK: usize = 1024;

/// `base^{1/denominator}`, kept symbolic so that `(base^{1/b})^b = base` stays exact at `b = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowScale {
    pub base: f64,
    pub denominator: f64,
}

impl RowScale {
    /// `(base^{1/denominator})^k`.
    pub fn pow(&self, k: f64) -> f64 {
        if k == self.denominator {
            self.base
        } else {
            self.base.powf(k / self.denominator)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformedGram {
    /// Blocks `[[ĥ(cÛÛᵀ), f̄⁻¹(cÛV̂ᵀ)], [·ᵀ, ĥ(cV̂V̂ᵀ)]]`.
    pub m: DMatrix<f64>,
    /// `‖u^i‖^{1/b}` for the first `m` rows, `‖v^j‖^{1/a}` for the rest.
    pub row_scales: Vec<RowScale>,
    /// Magnitude of the most negative eigenvalue clipped during factorization.
    pub psd_repair_shift: f64,
    /// Minimum eigenvalue of `m` before repair.
    pub min_eigenvalue: f64,
    /// Rows are unit vectors whose Gram matrix is `m` after repair and renormalization.
    pub factor: DMatrix<f64>,
    pub rows_u: usize,
    pub c_ab: f64,
}

fn unit_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut r in out.row_iter_mut() {
        let n = r.norm();
        if n > 0.0 {
            r /= n;
        }
    }
    out
}

/// Builds the transformed Gram matrix for a relaxation solution and factors it.
pub fn build_transformed_gram(sol: &RelaxationSolution, pair: &NormPair<f64>, c_ab: f64, k: usize) -> Result<TransformedGram> {
    let inverse = krivine::inverse_series(pair, k)?;
    let h = inverse.abs_map();
    let (mu, nv) = (sol.u.nrows(), sol.v.nrows());
    let hat = {
        let mut stacked = DMatrix::zeros(mu + nv, sol.u.ncols());
        stacked.rows_mut(0, mu).copy_from(&unit_rows(&sol.u));
        stacked.rows_mut(mu, nv).copy_from(&unit_rows(&sol.v));
        stacked
    };
    let ip = &hat * hat.transpose();
    let dim = mu + nv;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        let x = (c_ab * ip[(i, j)]).clamp(-1.0, 1.0);
        if (i < mu) == (j < mu) {
            h.value(x)
        } else {
            inverse.value(x)
        }
    });
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let shift = (-min_eigenvalue).max(0.0);
    if shift > MAX_REPAIR_SHIFT {
        return Err(Error::Numerical(format!(
            "transformed Gram matrix has eigenvalue {min_eigenvalue:e}; increase the truncation order (K = {k})"
        )));
    }
    let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = unit_rows(&(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l)));
    let row_scales = row_norms(&sol.u)
        .into_iter()
        .map(|base| RowScale { base, denominator: pair.b() })
        .chain(row_norms(&sol.v).into_iter().map(|base| RowScale { base, denominator: pair.a() }))
        .collect();
    Ok(TransformedGram { m, row_scales, psd_repair_shift: shift, min_eigenvalue, factor, rows_u: mu, c_ab })
}

/// One Gaussian projection: `ζ = W_U g`, `ξ = W_V g` for the unit Gram factor rows.
struct Projection {
    zeta: Vec<f64>,
    xi: Vec<f64>,
}

fn project(tg: &TransformedGram, rng: &mut ChaCha8Rng) -> Projection {
    let g = DVector::from_fn(tg.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let z = &tg.factor * g;
    Projection { zeta: z.as_slice()[..tg.rows_u].to_vec(), xi: z.as_slice()[tg.rows_u..].to_vec() }
}

/// `ψ_q(φ(U)g)` and `‖φ(U)g‖_q^b` with the scale exponents folded.
fn dual_side(proj: &[f64], scales: &[RowScale], e: f64, r: f64, r_star: f64) -> (Vec<f64>, f64) {
    let psi: Vec<f64> = proj.iter().zip(scales).map(|(&z, s)| signed_pow(z, e) * s.pow(e)).collect();
    let norm = if r_star.is_infinite() {
        proj.iter().zip(scales).filter(|(z, _)| **z != 0.0).fold(0.0, |m: f64, (_, s)| m.max(s.base))
    } else {
        proj.iter()
            .zip(scales)
            .map(|(&z, s)| s.pow(r_star * e) * z.abs().powf(r))
            .sum::<f64>()
            .powf(r_star.recip())
    };
    (psi, norm)
}

struct Draw {
    y: Vec<f64>,
    x: Vec<f64>,
    n_u: f64,
    n_v: f64,
    psi_u: Vec<f64>,
    psi_v: Vec<f64>,
}

fn draw(tg: &TransformedGram, pair: &NormPair<f64>, rng: &mut ChaCha8Rng) -> Draw {
    let (us, vs) = tg.row_scales.split_at(tg.rows_u);
    loop {
        let pr = project(tg, rng);
        let (psi_u, n_u) = dual_side(&pr.zeta, us, pair.b(), pair.q(), pair.q_star());
        let (psi_v, n_v) = dual_side(&pr.xi, vs, pair.a(), pair.p_star(), pair.p());
        if n_u > 0.0 && n_v > 0.0 {
            let y = psi_u.iter().map(|v| v / n_u).collect();
            let x = psi_v.iter().map(|v| v / n_v).collect();
            return Draw { y, x, n_u, n_v, psi_u, psi_v };
        }
    }
}

fn bilinear(a: &DMatrix<f64>, y: &[f64], x: &[f64]) -> f64 {
    let ax = a * DVector::from_column_slice(x);
    ax.iter().zip(y).map(|(u, v)| u * v).sum()
}

/// Best and mean rounded values.
#[derive(Debug, Clone, Serialize)]
pub struct RoundedSolution {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub value: f64,
    pub sample_count: usize,
    pub empirical_mean_value: f64,
}

fn chunks(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(SAMPLE_CHUNK)).map(|c| (c as u64, SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK))).collect()
}

/// Draws `num_samples` Gaussian roundings and returns the best one with the empirical mean.
pub fn sample_round(
    inst: &ProblemInstance,
    tg: &TransformedGram,
    sol: &RelaxationSolution,
    num_samples: usize,
    seed: u64,
) -> Result<RoundedSolution> {
    if num_samples == 0 {
        return Err(Error::Input("at least one sample is required".into()));
    }
    if tg.rows_u != inst.m() || tg.factor.nrows() != inst.m() + inst.n() || sol.u.nrows() != inst.m() {
        return Err(Error::Input("transformed Gram matrix does not match the instance".into()));
    }
    let per_chunk: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = chunks(num_samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, c);
            let mut sum = 0.0;
            let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
            for _ in 0..len {
                let d = draw(tg, &inst.pair, &mut rng);
                let v = bilinear(&inst.a, &d.y, &d.x);
                sum += v;
                if v > best.0 {
                    best = (v, d.y, d.x);
                }
            }
            (sum, best.0, best.1, best.2)
        })
        .collect();
    let mut total = 0.0;
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for (s, v, y, x) in per_chunk {
        total += s;
        if v > best.0 {
            best = (v, y, x);
        }
    }
    Ok(RoundedSolution {
        y: best.1,
        x: best.2,
        value: best.0,
        sample_count: num_samples,
        empirical_mean_value: total / num_samples as f64,
    })
}

/// Monte Carlo comparison of `E[ψ_q(φ(U)g)ψ_{p*}(ψ(V)g)ᵀ]` with `K_ab·c_ab·UVᵀ`.
#[derive(Debug, Clone)]
pub struct NumeratorCheck {
    pub estimate: DMatrix<f64>,
    pub reference: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
    /// `γ_{p*}^{p*}·γ_q^q`, the normalization of `f̄`.
    pub normalization: f64,
    pub max_sigmas: f64,
}

pub fn numerator_check(tg: &TransformedGram, sol: &RelaxationSolution, pair: &NormPair<f64>, num_samples: usize, seed: u64) -> Result<NumeratorCheck> {
    let (m, n) = (sol.u.nrows(), sol.v.nrows());
    let parts: Vec<(DMatrix<f64>, DMatrix<f64>)> = chunks(num_samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, c);
            let mut s1 = DMatrix::zeros(m, n);
            let mut s2 = DMatrix::zeros(m, n);
            for _ in 0..len {
                let d = draw(tg, pair, &mut rng);
                let outer = DVector::from_vec(d.psi_u) * DVector::from_vec(d.psi_v).transpose();
                s2 += outer.component_mul(&outer);
                s1 += outer;
            }
            (s1, s2)
        })
        .collect();
    let (mut s1, mut s2) = (DMatrix::zeros(m, n), DMatrix::zeros(m, n));
    for (a, b) in parts {
        s1 += a;
        s2 += b;
    }
    let nf = num_samples as f64;
    let estimate = &s1 / nf;
    let var = (&s2 / nf - estimate.component_mul(&estimate)).map(|v| v.max(0.0));
    let std_error = var.map(|v| (v / (nf - 1.0).max(1.0)).sqrt());
    let normalization = specfun::gaussian_abs_moment(pair.p_star())? * specfun::gaussian_abs_moment(pair.q())?;
    let reference = (&sol.u * sol.v.transpose()) * (normalization * tg.c_ab);
    let mut max_sigmas: f64 = 0.0;
    for ((e, r), s) in estimate.iter().zip(reference.iter()).zip(std_error.iter()) {
        let dev = (e - r).abs();
        let sig = if *s > 0.0 { dev / s } else if dev < 1e-12 { 0.0 } else { f64::INFINITY };
        max_sigmas = max_sigmas.max(sig);
    }
    Ok(NumeratorCheck { estimate, reference, std_error, normalization, max_sigmas })
}

/// Monte Carlo estimate of `E[‖φ(U)g‖_q^b·‖ψ(V)g‖_{p*}^a]` against `γ_{p*}^a·γ_q^b`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DenominatorCheck {
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `(mean − bound)/std_error`; at most 4 when the bound holds.
    pub sigmas_above: f64,
}

pub fn denominator_check(tg: &TransformedGram, pair: &NormPair<f64>, num_samples: usize, seed: u64) -> Result<DenominatorCheck> {
    let parts: Vec<(f64, f64)> = chunks(num_samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream_rng(seed, c);
            (0..len).fold((0.0, 0.0), |(s, s2), _| {
                let d = draw(tg, pair, &mut rng);
                let v = d.n_u * d.n_v;
                (s + v, s2 + v * v)
            })
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = num_samples as f64;
    let mean = s / nf;
    let std_error = ((s2 / nf - mean * mean).max(0.0) / nf).sqrt();
    let bound = specfun::gaussian_moment(pair.p_star())?.powf(pair.a()) * specfun::gaussian_moment(pair.q())?.powf(pair.b());
    Ok(DenominatorCheck { mean, std_error, bound, sigmas_above: (mean - bound) / std_error.max(1e-300) })
}

/// Relax, transform and round in one call.
#[derive(Debug, Clone, Serialize)]
pub struct RoundReport {
    pub cp_value: f64,
    pub c_ab: f64,
    pub best_value: f64,
    pub empirical_mean: f64,
    pub samples: usize,
    pub seed: u64,
    /// `cp_value / best_value`; at most `ratio_bound` in expectation.
    pub empirical_ratio: f64,
    pub ratio_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RoundOptions {
    pub order: usize,
    pub samples: usize,
    pub seed: u64,
    /// Certification tolerance for `c_ab`.
    pub tol: f64,
    pub cp: crate::relaxation::CpOptions,
}

impl Default for RoundOptions {
    fn default() -> Self {
        RoundOptions { order: krivine::DEFAULT_ORDER, samples: 10_000, seed: 0, tol: krivine::DEFAULT_TOL, cp: Default::default() }
    }
}

pub fn round_pipeline(inst: &ProblemInstance, opts: &RoundOptions) -> Result<(RoundReport, RelaxationSolution, RoundedSolution)> {
    let sol = crate::relaxation::solve_cp(inst, &crate::relaxation::CpOptions { seed: opts.seed, ..opts.cp })?;
    let bound = krivine::approx_ratio_adaptive(&inst.pair, opts.order, opts.tol, opts.order * 8)?;
    let tg = build_transformed_gram(&sol, &inst.pair, bound.c_ab, bound.order)?;
    let rounded = sample_round(inst, &tg, &sol, opts.samples, opts.seed)?;
    let report = RoundReport {
        cp_value: sol.value,
        c_ab: bound.c_ab,
        best_value: rounded.value,
        empirical_mean: rounded.empirical_mean_value,
        samples: opts.samples,
        seed: opts.seed,
        empirical_ratio: sol.value / rounded.value,
        ratio_bound: bound.ratio,
    };
    Ok((report, sol, rounded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::lp_norm;
    use crate::relaxation::{solve_cp, CpOptions};

    fn feasibility(y: &[f64], x: &[f64], pair: &NormPair<f64>) -> (f64, f64) {
        (lp_norm(y, pair.q_star()), lp_norm(x, pair.p()))
    }

    fn random_instance(m: usize, n: usize, p: f64, q: f64, seed: u64) -> ProblemInstance {
        let mut rng = stream_rng(seed, 7);
        let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        ProblemInstance::new(a, NormPair::new(p, q).unwrap()).unwrap()
    }

    #[test]
    fn classical_krivine_blocks() {
        let inst = random_instance(3, 3, f64::INFINITY, 1.0, 1);
        let sol = solve_cp(&inst, &CpOptions::default()).unwrap();
        let c = krivine::SINH_INV_ONE;
        let tg = build_transformed_gram(&sol, &inst.pair, c, 60).unwrap();
        for i in 0..6 {
            assert!((tg.m[(i, i)] - 1.0).abs() < 1e-12);
        }
        let u = unit_rows(&sol.u);
        let v = unit_rows(&sol.v);
        let ip = &u * v.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((tg.m[(i, 3 + j)] - (c * ip[(i, j)]).sin()).abs() < 1e-12);
            }
        }
        let uu = &u * u.transpose();
        assert!((tg.m[(0, 1)] - (c * uu[(0, 1)]).sinh()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_blocks_vanish() {
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let v = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let sol = RelaxationSolution { u, v, value: 0.0, converged: true, iterations: 0, history: vec![] };
        let pair = NormPair::new(4.0, 1.5).unwrap();
        let tg = build_transformed_gram(&sol, &pair, 0.95, 60).unwrap();
        assert_eq!(tg.m[(0, 1)], 0.0);
    }

    #[test]
    fn transformed_gram_psd_before_repair() {
        let inst = random_instance(4, 3, 4.0, 4.0 / 3.0, 2);
        let sol = solve_cp(&inst, &CpOptions::default()).unwrap();
        let c = krivine::compute_c_ab(&inst.pair, 60, 1e-6).unwrap().c_ab;
        let tg = build_transformed_gram(&sol, &inst.pair, c, 60).unwrap();
        assert!(tg.min_eigenvalue > -1e-8, "{}", tg.min_eigenvalue);
    }

    #[test]
    fn samples_feasible_and_below_norm() {
        for (p, q) in [(f64::INFINITY, 1.0), (4.0, 4.0 / 3.0), (3.0, 1.5)] {
            let inst = random_instance(5, 4, p, q, 3);
            let sol = solve_cp(&inst, &CpOptions::default()).unwrap();
            let rep = krivine::approx_ratio(&inst.pair, 60).unwrap();
            let tg = build_transformed_gram(&sol, &inst.pair, rep.c_ab, 60).unwrap();
            let mut rng = stream_rng(5, 0);
            for _ in 0..200 {
                let d = draw(&tg, &inst.pair, &mut rng);
                let (ny, nx) = feasibility(&d.y, &d.x, &inst.pair);
                assert!((ny - 1.0).abs() < 1e-9 && (nx - 1.0).abs() < 1e-9, "p={p} q={q}: {ny} {nx}");
            }
            let r = sample_round(&inst, &tg, &sol, 2000, 9).unwrap();
            let bf = crate::relaxation::brute_force_norm(&inst, 64);
            assert!(r.value <= bf + 1e-9);
            assert!(r.value >= sol.value / rep.ratio * 0.95);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let inst = random_instance(4, 4, 4.0, 1.5, 4);
        let sol = solve_cp(&inst, &CpOptions::default()).unwrap();
        let tg = build_transformed_gram(&sol, &inst.pair, 0.93, 60).unwrap();
        let a = sample_round(&inst, &tg, &sol, 3000, 17).unwrap();
        let b = sample_round(&inst, &tg, &sol, 3000, 17).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.empirical_mean_value.to_bits(), b.empirical_mean_value.to_bits());
    }

    #[test]
    fn sign_rounding_at_grothendieck_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let inst = ProblemInstance::new(a, NormPair::new(f64::INFINITY, 1.0).unwrap()).unwrap();
        let (rep, _, r) = round_pipeline(&inst, &RoundOptions { samples: 500, ..Default::default() }).unwrap();
        assert!((rep.best_value - 2.0).abs() < 1e-12);
        assert!(r.y.iter().chain(&r.x).all(|v| v.abs() == 1.0));
    }

    #[test]
    fn identity_spectral_pipeline() {
        let inst = ProblemInstance::new(DMatrix::identity(3, 3), NormPair::new(2.0, 2.0).unwrap()).unwrap();
        let (rep, _, _) = round_pipeline(&inst, &RoundOptions { samples: 2000, ..Default::default() }).unwrap();
        assert!((rep.cp_value - 1.0).abs() < 1e-9);
        assert!(rep.best_value <= 1.0 + 1e-12 && rep.best_value > 0.99);
    }

    #[test]
    fn holder_dual_reexport() {
        assert_eq!(holder_dual(&[3.0, -4.0], 2.0).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn row_scale_folds_exponent() {
        let s = RowScale { base: 0.3, denominator: 0.0 };
        assert_eq!(s.pow(0.0), 0.3);
        let s = RowScale { base: 0.3, denominator: 0.5 };
        assert!((s.pow(1.0) - 0.09).abs() < 1e-15);
    }
}
