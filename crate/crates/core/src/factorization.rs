//! The dual of the vector relaxation and the factorization `A = D_s^{1/2} B D_t^{1/2}` it yields.
//!
//! The dual minimizes `(‖s‖_α + ‖t‖_β)/2` subject to `[[D_s, −A], [−Aᵀ, D_t]] ⪰ 0`, with
//! `α = (q*/2)*` and `β = (p/2)*`. On the support of `A` the constraint reads
//! `‖D_s^{−1/2} A D_t^{−1/2}‖₂ ≤ 1`, so the problem is equivalent to minimizing
//! `σ(s,t)·√(‖s‖_α‖t‖_β)` over positive weights, every point of which scales to a feasible one.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::norms::lp_norm;
use crate::relaxation::{solve_cp, CpOptions, ProblemInstance, RelaxationSolution};
use crate::{Error, Result};

/// PSD slack accepted by [`build_certificate`], relative to the largest entry.
pub const PSD_TOL: f64 = 1e-8;

/// Feasible dual weights.
#[derive(Debug, Clone, Serialize)]
pub struct DualSolution {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub dual_value: f64,
    /// Value of the relaxation the dual was started from.
    pub primal_value: f64,
    pub gap: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationCertificate {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    #[serde(serialize_with = "matrix_rows")]
    pub b: DMatrix<f64>,
    pub dual_value: f64,
    pub spectral_norm_b: f64,
    /// `‖D_t^{1/2}‖_{p→2}·‖D_s^{1/2}‖_{2→q}`.
    pub norm_product: f64,
    pub reconstruction_error: f64,
    pub min_eigenvalue: f64,
}

fn matrix_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

/// Exponents `(α, β)` of the dual norms on `s` and `t`.
pub fn dual_norm_exponents(inst: &ProblemInstance) -> (f64, f64) {
    let half_dual = |r: f64| {
        // (r/2)* for r ∈ [2, ∞]
        if r.is_infinite() {
            1.0
        } else if r == 2.0 {
            f64::INFINITY
        } else {
            r / (r - 2.0)
        }
    };
    (half_dual(inst.pair.q_star()), half_dual(inst.pair.p()))
}

/// `(‖s‖_α + ‖t‖_β)/2`.
pub fn dual_objective(inst: &ProblemInstance, s: &[f64], t: &[f64]) -> f64 {
    let (alpha, beta) = dual_norm_exponents(inst);
    0.5 * (lp_norm(s, alpha) + lp_norm(t, beta))
}

/// Smallest eigenvalue of `[[D_s, −A], [−Aᵀ, D_t]]`.
pub fn block_min_eigenvalue(a: &DMatrix<f64>, s: &[f64], t: &[f64]) -> f64 {
    let (m, n) = a.shape();
    let mut blk = DMatrix::zeros(m + n, m + n);
    for i in 0..m {
        blk[(i, i)] = s[i];
    }
    for j in 0..n {
        blk[(m + j, m + j)] = t[j];
    }
    for i in 0..m {
        for j in 0..n {
            blk[(i, m + j)] = -a[(i, j)];
            blk[(m + j, i)] = -a[(i, j)];
        }
    }
    SymmetricEigen::new(blk).eigenvalues.iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Top singular triple of `D_s^{−1/2} A D_t^{−1/2}` restricted to the support.
fn top_singular(a: &DMatrix<f64>, s: &[f64], t: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let scaled = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] / (s[i] * t[j]).sqrt());
    let svd = scaled.svd(true, true);
    let k = svd.singular_values.iter().enumerate().fold(0, |b, (i, &v)| if v > svd.singular_values[b] { i } else { b });
    let x = svd.u.as_ref().expect("left vectors requested").column(k).iter().copied().collect();
    let y = svd.v_t.as_ref().expect("right vectors requested").row(k).iter().copied().collect();
    (svd.singular_values[k], x, y)
}

/// Gradient of `log ‖w‖_r` with respect to `log w` (a subgradient when `r = ∞`).
fn log_norm_gradient(w: &[f64], r: f64) -> Vec<f64> {
    if r.is_infinite() {
        let mx = w.iter().fold(0.0, |m: f64, &v| m.max(v));
        let ties: Vec<bool> = w.iter().map(|&v| v >= mx * (1.0 - 1e-12)).collect();
        let cnt = ties.iter().filter(|&&b| b).count() as f64;
        return ties.iter().map(|&b| if b { 1.0 / cnt } else { 0.0 }).collect();
    }
    let mx = w.iter().fold(0.0, |m: f64, &v| m.max(v));
    let pw: Vec<f64> = w.iter().map(|&v| (v / mx).powf(r)).collect();
    let total: f64 = pw.iter().sum();
    pw.iter().map(|v| v / total).collect()
}

struct Support {
    rows: Vec<usize>,
    cols: Vec<usize>,
    a: DMatrix<f64>,
}

fn support(a: &DMatrix<f64>) -> Support {
    let rows: Vec<usize> = (0..a.nrows()).filter(|&i| a.row(i).iter().any(|&v| v != 0.0)).collect();
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| a.column(j).iter().any(|&v| v != 0.0)).collect();
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]);
    Support { rows, cols, a: sub }
}

/// Multipliers of the relaxation's norm constraints at `sol`: `s_i = ⟨(AV)_i, u_i⟩/‖u_i‖²`.
fn kkt_weights(a: &DMatrix<f64>, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Vec<f64> {
    let av = a * v;
    let raw: Vec<f64> = (0..u.nrows())
        .map(|i| {
            let nu = u.row(i).norm_squared();
            if nu > 0.0 {
                av.row(i).dot(&u.row(i)) / nu
            } else {
                0.0
            }
        })
        .collect();
    let pos: Vec<f64> = raw.iter().copied().filter(|&v| v > 0.0 && v.is_finite()).collect();
    let fill = if pos.is_empty() { 1.0 } else { pos.iter().sum::<f64>() / pos.len() as f64 };
    raw.iter().map(|&v| if v > 0.0 && v.is_finite() { v } else { fill }).collect()
}

/// Solves the dual starting from the relaxation's optimality multipliers.
pub fn solve_dual(inst: &ProblemInstance, max_iters: usize, tol: f64) -> Result<DualSolution> {
    let sol = solve_cp(inst, &CpOptions::default())?;
    solve_dual_from(inst, &sol, max_iters, tol)
}

pub fn solve_dual_from(inst: &ProblemInstance, sol: &RelaxationSolution, max_iters: usize, tol: f64) -> Result<DualSolution> {
    let (m, n) = (inst.m(), inst.n());
    if m > 200 || n > 200 {
        return Err(Error::Input(format!("dual solver handles at most 200x200, got {m}x{n}")));
    }
    let (alpha, beta) = dual_norm_exponents(inst);
    let sup = support(&inst.a);
    let mut s = vec![0.0; m];
    let mut t = vec![0.0; n];
    let mut iterations = 0;
    if !sup.rows.is_empty() {
        let u = DMatrix::from_fn(sup.rows.len(), sol.u.ncols(), |i, k| sol.u[(sup.rows[i], k)]);
        let v = DMatrix::from_fn(sup.cols.len(), sol.v.ncols(), |j, k| sol.v[(sup.cols[j], k)]);
        let mut ls: Vec<f64> = kkt_weights(&sup.a, &u, &v).iter().map(|v| v.ln()).collect();
        let mut lt: Vec<f64> = kkt_weights(&sup.a.transpose(), &v, &u).iter().map(|v| v.ln()).collect();
        let objective = |ls: &[f64], lt: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let se: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
            let te: Vec<f64> = lt.iter().map(|v| v.exp()).collect();
            let (sigma, x, y) = top_singular(&sup.a, &se, &te);
            let val = sigma.ln() + 0.5 * (lp_norm(&se, alpha).ln() + lp_norm(&te, beta).ln());
            let gs = log_norm_gradient(&se, alpha);
            let gt = log_norm_gradient(&te, beta);
            let grad_s = x.iter().zip(&gs).map(|(xi, g)| 0.5 * (g - xi * xi)).collect();
            let grad_t = y.iter().zip(&gt).map(|(yj, g)| 0.5 * (g - yj * yj)).collect();
            (val, grad_s, grad_t)
        };
        let (mut val, mut gs, mut gt) = objective(&ls, &lt);
        let mut step = 1.0;
        while iterations < max_iters && step > 1e-14 {
            iterations += 1;
            let gnorm = gs.iter().chain(&gt).fold(0.0, |m: f64, g: &f64| m.max(g.abs()));
            if gnorm < tol {
                break;
            }
            let ns: Vec<f64> = ls.iter().zip(&gs).map(|(l, g)| l - step * g).collect();
            let nt: Vec<f64> = lt.iter().zip(&gt).map(|(l, g)| l - step * g).collect();
            let (nv, ngs, ngt) = objective(&ns, &nt);
            if nv < val {
                let gain = val - nv;
                (ls, lt, val, gs, gt) = (ns, nt, nv, ngs, ngt);
                step *= 1.5;
                if gain < 1e-3 * tol {
                    break;
                }
            } else {
                step *= 0.5;
            }
        }
        let se: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
        let te: Vec<f64> = lt.iter().map(|v| v.exp()).collect();
        let (sigma, _, _) = top_singular(&sup.a, &se, &te);
        // exact feasibility, then equalize the two norms
        let lam = (lp_norm(&te, beta) / lp_norm(&se, alpha)).sqrt();
        let scale = sigma * (1.0 + 1e-12);
        for (k, &i) in sup.rows.iter().enumerate() {
            s[i] = se[k] * scale * lam;
        }
        for (k, &j) in sup.cols.iter().enumerate() {
            t[j] = te[k] * scale / lam;
        }
    }
    let dual_value = dual_objective(inst, &s, &t);
    let min_eigenvalue = block_min_eigenvalue(&inst.a, &s, &t);
    let scale = inst.a.amax().max(1.0);
    if min_eigenvalue < -PSD_TOL * scale {
        return Err(Error::Infeasible { reason: "dual weights violate the PSD constraint".into(), min_eigenvalue });
    }
    Ok(DualSolution { s, t, dual_value, primal_value: sol.value, gap: dual_value - sol.value, min_eigenvalue, iterations })
}

/// Builds `B = (D_s^{1/2})† A (D_t^{1/2})†` and certifies its norms.
pub fn build_certificate(inst: &ProblemInstance, s: &[f64], t: &[f64]) -> Result<FactorizationCertificate> {
    if s.len() != inst.m() || t.len() != inst.n() {
        return Err(Error::Input(format!("weights have lengths {}, {} for a {}x{} matrix", s.len(), t.len(), inst.m(), inst.n())));
    }
    if s.iter().chain(t).any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Input("dual weights must be finite and nonnegative".into()));
    }
    let min_eigenvalue = block_min_eigenvalue(&inst.a, s, t);
    if min_eigenvalue < -PSD_TOL * inst.a.amax().max(1.0) {
        return Err(Error::Infeasible { reason: "block matrix is not PSD".into(), min_eigenvalue });
    }
    let pinv_sqrt = |v: f64| if v > 0.0 { v.sqrt().recip() } else { 0.0 };
    let b = DMatrix::from_fn(inst.m(), inst.n(), |i, j| pinv_sqrt(s[i]) * inst.a[(i, j)] * pinv_sqrt(t[j]));
    let reconstruction_error = (0..inst.m())
        .flat_map(|i| (0..inst.n()).map(move |j| (i, j)))
        .map(|(i, j)| (s[i].sqrt() * b[(i, j)] * t[j].sqrt() - inst.a[(i, j)]).abs())
        .fold(0.0, f64::max);
    let spectral_norm_b = b.singular_values().iter().fold(0.0, |m: f64, &v| m.max(v));
    let (alpha, beta) = dual_norm_exponents(inst);
    let norm_product = (lp_norm(t, beta) * lp_norm(s, alpha)).sqrt();
    Ok(FactorizationCertificate {
        s: s.to_vec(),
        t: t.to_vec(),
        b,
        dual_value: dual_objective(inst, s, t),
        spectral_norm_b,
        norm_product,
        reconstruction_error,
        min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krivine::NormPair;
    use crate::relaxation::brute_force_norm;
    use rand::Rng;

    fn inst(a: DMatrix<f64>, p: f64, q: f64) -> ProblemInstance {
        ProblemInstance::new(a, NormPair::new(p, q).unwrap()).unwrap()
    }

    #[test]
    fn identity_spectral() {
        let pi = inst(DMatrix::identity(2, 2), 2.0, 2.0);
        let d = solve_dual(&pi, 500, 1e-10).unwrap();
        assert!((d.dual_value - 1.0).abs() < 1e-9, "{d:?}");
        let c = build_certificate(&pi, &d.s, &d.t).unwrap();
        assert!((c.norm_product - 1.0).abs() < 1e-9);
        assert!((&c.b - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
    }

    #[test]
    fn rank_one() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 1.0, -1.5, 2.0];
        let a = DMatrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let (p, q) = (3.0, 1.5);
        let pi = inst(a, p, q);
        let d = solve_dual(&pi, 2000, 1e-10).unwrap();
        let want = lp_norm(&u, q) * lp_norm(&v, p / (p - 1.0));
        assert!((d.dual_value - want).abs() < 1e-6 * want, "{} vs {want}", d.dual_value);
    }

    #[test]
    fn zero_row_gets_zero_weight() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, -1.0, 0.5]);
        let pi = inst(a, 4.0, 1.5);
        let d = solve_dual(&pi, 1000, 1e-10).unwrap();
        assert_eq!(d.s[1], 0.0);
        let c = build_certificate(&pi, &d.s, &d.t).unwrap();
        assert!(c.reconstruction_error < 1e-12);
        assert!(c.spectral_norm_b <= 1.0 + 1e-9);
    }

    #[test]
    fn diagonal_inf_to_one() {
        let d = [2.0, -0.5, 1.5];
        let pi = inst(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&d)), f64::INFINITY, 1.0);
        let sol = solve_dual(&pi, 2000, 1e-10).unwrap();
        let c = build_certificate(&pi, &sol.s, &sol.t).unwrap();
        assert!((c.norm_product - 4.0).abs() < 1e-6, "{c:?}");
        assert!((c.spectral_norm_b - 1.0).abs() < 1e-6);
        assert!((brute_force_norm(&pi, 8) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn random_sandwich() {
        let mut rng = crate::stream_rng(5, 0);
        let a = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let pi = inst(a, 4.0, 4.0 / 3.0);
        let d = solve_dual(&pi, 5000, 1e-10).unwrap();
        let c = build_certificate(&pi, &d.s, &d.t).unwrap();
        let exact = brute_force_norm(&pi, 64);
        assert!(exact <= c.norm_product + 1e-9);
        assert!(c.norm_product <= c.dual_value + 1e-9);
        assert!(d.gap <= 1e-4 * d.dual_value, "{d:?}");
        assert!(d.gap >= -1e-6);
    }

    #[test]
    fn rejects_infeasible_weights() {
        let pi = inst(DMatrix::identity(2, 2), 2.0, 2.0);
        let e = build_certificate(&pi, &[0.5, 0.5], &[0.5, 0.5]).unwrap_err();
        assert!(matches!(e, Error::Infeasible { min_eigenvalue, .. } if min_eigenvalue < -0.4));
        assert!(build_certificate(&pi, &[1.0], &[1.0, 1.0]).is_err());
    }
}
