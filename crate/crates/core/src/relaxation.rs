//! The convex vector relaxation of `max yᵀAx` and a brute-force oracle for `‖A‖_{p→q}`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::krivine::NormPair;
use crate::norms::{dual_exponent, dual_unit_vector, lp_norm};
use crate::{stream_rng, Error, Result};

/// A matrix with the exponent pair it is measured in.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: DMatrix<f64>,
    pub pair: NormPair<f64>,
}

impl ProblemInstance {
    pub fn new(a: DMatrix<f64>, pair: NormPair<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Input("matrix must be at least 1x1".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        Ok(ProblemInstance { a, pair })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// Vectors `u^i` (rows of `u`) and `v^j` (rows of `v`) feasible for the relaxation.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxationSolution {
    #[serde(skip)]
    pub u: DMatrix<f64>,
    #[serde(skip)]
    pub v: DMatrix<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every half-step of the best restart.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl RelaxationSolution {
    /// `⟨A, UVᵀ⟩` recomputed from the vectors.
    pub fn objective(&self, a: &DMatrix<f64>) -> f64 {
        (&self.u * self.v.transpose()).component_mul(a).sum()
    }

    pub fn row_norms_u(&self) -> Vec<f64> {
        row_norms(&self.u)
    }

    pub fn row_norms_v(&self) -> Vec<f64> {
        row_norms(&self.v)
    }
}

pub(crate) fn row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm()).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct CpOptions {
    /// Vector dimension; 0 selects `m + n`.
    pub d: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop when the relative objective gain of a full sweep drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions { d: 0, restarts: 16, max_iters: 10_000, tol: 1e-10, seed: 0 }
    }
}

/// Replaces the rows of `w` by the maximizer of `Σ⟨x_i, w_i⟩` subject to `‖(‖x_i‖)‖_s ≤ 1`;
/// returns the attained value `‖(‖w_i‖)‖_{s*}`.
fn block_step(w: &DMatrix<f64>, s: f64) -> (DMatrix<f64>, f64) {
    let norms = row_norms(w);
    let weights = dual_unit_vector(&norms, s);
    let mut out = w.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        if norms[i] > 0.0 {
            row *= weights[i] / norms[i];
        } else {
            row.fill(0.0);
        }
    }
    let value = lp_norm(&norms, dual_exponent(s));
    (out, value)
}

fn single_run(inst: &ProblemInstance, d: usize, opts: &CpOptions, index: u64) -> Result<RelaxationSolution> {
    let (q_star, p) = (inst.pair.q_star(), inst.pair.p());
    let mut rng = stream_rng(opts.seed, index);
    let g = DMatrix::from_fn(inst.n(), d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut v, _) = block_step(&g, p);
    let mut u = DMatrix::zeros(inst.m(), d);
    let mut history = Vec::new();
    let mut value = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let (nu, _) = block_step(&(&inst.a * &v), q_star);
        u = nu;
        let (nv, val) = block_step(&(inst.a.transpose() * &u), p);
        v = nv;
        history.push(val);
        if !val.is_finite() {
            let head: Vec<f64> = v.iter().take(6).copied().collect();
            return Err(Error::Numerical(format!("relaxation iterate became non-finite at step {iterations}; V starts {head:?}")));
        }
        let gain = val - value;
        value = val;
        if gain.abs() <= opts.tol * value.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    let mut sol = RelaxationSolution { u, v, value, converged, iterations, history };
    sol.value = sol.objective(&inst.a);
    Ok(sol)
}

/// Maximizes `⟨A, UVᵀ⟩` subject to `Σ‖u^i‖^{q*} ≤ 1`, `Σ‖v^j‖^p ≤ 1` by alternating exact block
/// maximization from `restarts` random starts; returns the best run.
pub fn solve_cp(inst: &ProblemInstance, opts: &CpOptions) -> Result<RelaxationSolution> {
    let d = if opts.d == 0 { inst.m() + inst.n() } else { opts.d };
    let runs: Vec<RelaxationSolution> =
        (0..opts.restarts.max(1) as u64).into_par_iter().map(|i| single_run(inst, d, opts, i)).collect::<Result<_>>()?;
    let mut best: Option<RelaxationSolution> = None;
    for r in runs {
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

/// Evaluation strategy for [`brute_force_norm_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteForceMode {
    /// Exact where a finite search is exact, multistart otherwise.
    Auto,
    /// Random sampling of the ℓ_p sphere followed by local refinement (small n).
    Grid { samples: usize },
    /// Nonlinear power iteration from random starts.
    Multistart,
}

#[derive(Debug, Clone, Copy)]
pub struct BruteForceOptions {
    pub mode: BruteForceMode,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions { mode: BruteForceMode::Auto, restarts: 64, seed: 0 }
    }
}

const ENUMERATION_LIMIT: usize = 20;

fn ax_norm(a: &DMatrix<f64>, x: &[f64], q: f64) -> f64 {
    let y = a * nalgebra::DVector::from_column_slice(x);
    lp_norm(y.as_slice(), q)
}

// max over sign vectors of ‖M s‖_r (the first sign is fixed by symmetry)
fn enumerate_signs(m: &DMatrix<f64>, r: f64) -> f64 {
    let n = m.ncols();
    (0..1u64 << (n - 1))
        .into_par_iter()
        .map(|mask| {
            let s: Vec<f64> = (0..n).map(|j| if j > 0 && mask >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            ax_norm(m, &s, r)
        })
        .reduce(|| 0.0, f64::max)
}

fn power_iteration(a: &DMatrix<f64>, p: f64, q: f64, mut x: Vec<f64>, iters: usize) -> f64 {
    let q_star = dual_exponent(q);
    let nx = lp_norm(&x, p);
    if nx == 0.0 {
        return 0.0;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut best = ax_norm(a, &x, q);
    for _ in 0..iters {
        let y = a * nalgebra::DVector::from_column_slice(&x);
        let yd = dual_unit_vector(y.as_slice(), q_star);
        let z = a.transpose() * nalgebra::DVector::from_column_slice(&yd);
        let nx = dual_unit_vector(z.as_slice(), p);
        let val = ax_norm(a, &nx, q);
        if val <= best * (1.0 + 1e-15) {
            if val > best {
                best = val;
            }
            break;
        }
        best = val;
        x = nx;
    }
    best
}

fn multistart(inst: &ProblemInstance, restarts: usize, seed: u64) -> f64 {
    let (p, q) = (inst.pair.p(), inst.pair.q());
    let n = inst.n();
    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    starts.push(vec![1.0; n]);
    starts.extend((0..restarts as u64).map(|i| {
        let mut rng = stream_rng(seed, i);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }));
    starts.into_par_iter().map(|x| power_iteration(&inst.a, p, q, x, 5_000)).reduce(|| 0.0, f64::max)
}

fn sphere_samples(inst: &ProblemInstance, samples: usize, seed: u64) -> f64 {
    let (p, q) = (inst.pair.p(), inst.pair.q());
    let n = inst.n();
    let chunks = 64u64;
    let per = samples.div_ceil(chunks as usize);
    let mut tops: Vec<(f64, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed ^ 0x5eed, c);
            let mut best = (0.0, vec![0.0; n]);
            for _ in 0..per {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nx = lp_norm(&x, p);
                if nx == 0.0 {
                    continue;
                }
                let x: Vec<f64> = x.iter().map(|v| v / nx).collect();
                let val = ax_norm(&inst.a, &x, q);
                if val > best.0 {
                    best = (val, x);
                }
            }
            best
        })
        .collect();
    tops.sort_by(|a, b| b.0.total_cmp(&a.0));
    tops.into_iter()
        .take(16)
        .map(|(v, x)| v.max(power_iteration(&inst.a, p, q, x, 5_000)))
        .fold(0.0, f64::max)
}

/// Lower bound on `‖A‖_{p→q}`, exact for `p = q = 2` and for small enumerable cases.
pub fn brute_force_norm(inst: &ProblemInstance, restarts: usize) -> f64 {
    brute_force_norm_with(inst, &BruteForceOptions { restarts, ..Default::default() })
}

pub fn brute_force_norm_with(inst: &ProblemInstance, opts: &BruteForceOptions) -> f64 {
    let (p, q) = (inst.pair.p(), inst.pair.q());
    match opts.mode {
        BruteForceMode::Grid { samples } => sphere_samples(inst, samples, opts.seed),
        BruteForceMode::Multistart => multistart(inst, opts.restarts, opts.seed),
        BruteForceMode::Auto => {
            if p == 2.0 && q == 2.0 {
                inst.a.singular_values().max()
            } else if p.is_infinite() && inst.n() <= ENUMERATION_LIMIT {
                enumerate_signs(&inst.a, q)
            } else if q == 1.0 && inst.m() <= ENUMERATION_LIMIT {
                // ‖A‖_{p→1} = max over y ∈ {±1}^m of ‖Aᵀy‖_{p*}
                enumerate_signs(&inst.a.transpose(), dual_exponent(p))
            } else {
                multistart(inst, opts.restarts, opts.seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(a: DMatrix<f64>, p: f64, q: f64) -> ProblemInstance {
        ProblemInstance::new(a, NormPair::new(p, q).unwrap()).unwrap()
    }

    fn feasible(sol: &RelaxationSolution, pair: &NormPair<f64>) -> bool {
        let su = lp_norm(&sol.row_norms_u(), pair.q_star());
        let sv = lp_norm(&sol.row_norms_v(), pair.p());
        su <= 1.0 + 1e-9 && sv <= 1.0 + 1e-9
    }

    fn random_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 99);
        DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_spectral() {
        let i = inst(DMatrix::identity(2, 2), 2.0, 2.0);
        let sol = solve_cp(&i, &CpOptions::default()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert!(feasible(&sol, &i.pair));
    }

    #[test]
    fn spectral_case_matches_top_singular_value() {
        for seed in 0..5 {
            let a = random_matrix(6, 4, seed);
            let i = inst(a.clone(), 2.0, 2.0);
            let sol = solve_cp(&i, &CpOptions { seed, ..Default::default() }).unwrap();
            let s = a.singular_values().max();
            assert!((sol.value - s).abs() < 1e-8 * s, "{} vs {s}", sol.value);
        }
    }

    #[test]
    fn grothendieck_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let i = inst(a, f64::INFINITY, 1.0);
        assert!((brute_force_norm(&i, 8) - 2.0).abs() < 1e-12);
        let sol = solve_cp(&i, &CpOptions::default()).unwrap();
        // the vector relaxation of this instance is 2√2
        assert!(sol.value >= 2.0 - 1e-9);
        assert!((sol.value - 2.0 * 2f64.sqrt()).abs() < 1e-8);
        assert!(feasible(&sol, &i.pair));
    }

    #[test]
    fn monotone_history_and_value_reproducible() {
        let a = random_matrix(7, 5, 3);
        let i = inst(a.clone(), 4.0, 4.0 / 3.0);
        let sol = solve_cp(&i, &CpOptions::default()).unwrap();
        for w in sol.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs());
        }
        assert!((sol.objective(&a) - sol.value).abs() <= 1e-12 * sol.value);
        assert!(feasible(&sol, &i.pair));
    }

    #[test]
    fn identity_norm_closed_form() {
        for (p, q) in [(4.0, 1.5), (3.0, 1.0), (f64::INFINITY, 1.2)] {
            let n = 4;
            let i = inst(DMatrix::identity(n, n), p, q);
            let want = (n as f64).powf(1.0 / q - 1.0 / p);
            let got = brute_force_norm(&i, 32);
            assert!((got - want).abs() < 1e-9 * want, "p={p} q={q}: {got} vs {want}");
        }
    }

    #[test]
    fn rank_one_holder() {
        let u = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = nalgebra::DVector::from_vec(vec![0.3, 0.7, -1.1, 2.0]);
        let a = &u * v.transpose();
        for (p, q) in [(4.0, 4.0 / 3.0), (3.0, 1.5)] {
            let i = inst(a.clone(), p, q);
            let want = lp_norm(u.as_slice(), q) * lp_norm(v.as_slice(), dual_exponent(p));
            assert!((brute_force_norm(&i, 16) - want).abs() < 1e-9 * want);
            let sol = solve_cp(&i, &CpOptions::default()).unwrap();
            assert!((sol.value - want).abs() < 1e-7 * want);
        }
    }

    #[test]
    fn grid_mode_agrees_on_small_instance() {
        let a = random_matrix(3, 3, 11);
        let i = inst(a, 3.0, 1.5);
        let g = brute_force_norm_with(&i, &BruteForceOptions { mode: BruteForceMode::Grid { samples: 200_000 }, ..Default::default() });
        let m = brute_force_norm_with(&i, &BruteForceOptions { mode: BruteForceMode::Multistart, ..Default::default() });
        assert!((g - m).abs() < 1e-8 * m, "{g} vs {m}");
    }

    #[test]
    fn rejects_bad_instances() {
        let pair = NormPair::new(3.0, 1.5).unwrap();
        assert!(ProblemInstance::new(DMatrix::zeros(0, 3), pair).is_err());
        assert!(ProblemInstance::new(DMatrix::from_element(1, 1, f64::NAN), pair).is_err());
    }
}
