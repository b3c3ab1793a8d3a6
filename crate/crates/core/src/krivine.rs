//! The bounds engine: `f̄_{a,b}`, its inverse, the constant `c_ab = ĥ⁻¹(1)`, approximation
//! ratios, the coefficient conditions and the defect certificate.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::series::TruncatedSeries;
use crate::specfun::{self, Hypergeometric};
use crate::{Error, Real, Result};

/// `sinh⁻¹(1) = ln(1 + √2)`.
pub const SINH_INV_ONE: f64 = 0.881_373_587_019_543_025_232_609_324_979_792_3;
/// Slack in the defect bound: `ĥ⁻¹(1) ≥ sinh⁻¹(1)/(1 + EPS0)`.
pub const EPS0: f64 = 0.00863;
/// Constant in the decay bound `|f⁻¹_k| ≤ 6.1831/(k(1+ε)^k)`.
pub const INVERSE_COEFF_CONST: f64 = 6.1831;
/// Truncation order used for bound certification.
pub const DEFAULT_ORDER: usize = 60;
/// Truncation order used for identity checks.
pub const IDENTITY_ORDER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Absolute slack allowed when testing conditions C1/C2.
pub const CONDITION_TOL: f64 = 1e-12;

/// The Krivine constant `π / (2 ln(1+√2))`.
pub fn krivine_ratio<T: Real>() -> T {
    T::FRAC_PI_2() / T::lit(SINH_INV_ONE)
}

/// Exponents `1 ≤ q ≤ 2 ≤ p ≤ ∞` with `a = p* − 1` and `b = q − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormPair<T> {
    p: T,
    q: T,
    a: T,
    b: T,
}

impl<T: Real> NormPair<T> {
    pub fn new(p: T, q: T) -> Result<Self> {
        let two = T::lit(2.0);
        if p.is_nan() || !(p >= two) {
            return Err(Error::domain(format!("p must lie in [2, ∞], got {p}")));
        }
        if !(q >= T::one() && q <= two) {
            return Err(Error::domain(format!("q must lie in [1, 2], got {q}")));
        }
        let a = if p.is_infinite() { T::zero() } else { (p - T::one()).recip() };
        Ok(NormPair { p, q, a, b: q - T::one() })
    }

    /// The pair with `p* = 1 + a`, `q = 1 + b`.
    pub fn from_ab(a: T, b: T) -> Result<Self> {
        if !(a >= T::zero() && a <= T::one()) || !(b >= T::zero() && b <= T::one()) {
            return Err(Error::domain(format!("a, b must lie in [0, 1], got ({a}, {b})")));
        }
        let p = if a == T::zero() { T::infinity() } else { T::one() + a.recip() };
        let mut pair = Self::new(p, T::one() + b)?;
        pair.a = a;
        Ok(pair)
    }

    pub fn p(&self) -> T {
        self.p
    }
    pub fn q(&self) -> T {
        self.q
    }
    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }

    /// `p* = p/(p−1)`, equal to 1 at `p = ∞`.
    pub fn p_star(&self) -> T {
        T::one() + self.a
    }

    /// `q* = q/(q−1)`, infinite at `q = 1`.
    pub fn q_star(&self) -> T {
        if self.b == T::zero() {
            T::infinity()
        } else {
            self.q / self.b
        }
    }

    fn is_linear(&self) -> bool {
        self.a == T::one() || self.b == T::one()
    }
}

/// Taylor series of `f̄_{a,b}(ρ) = ρ·₂F₁((1−a)/2, (1−b)/2; 3/2; ρ²)` to order `k`.
pub fn f_bar_series<T: Real>(pair: &NormPair<T>, k: usize) -> Result<TruncatedSeries<T>> {
    f_bar_series_ab(pair.a, pair.b, k)
}

pub(crate) fn f_bar_series_ab<T: Real>(a: T, b: T, k: usize) -> Result<TruncatedSeries<T>> {
    if k < 1 {
        return Err(Error::domain("f̄ series needs order >= 1"));
    }
    let two = T::lit(2.0);
    let h = specfun::hyp_coeffs(
        Hypergeometric::Gauss { w: (T::one() - a) / two, alpha: (T::one() - b) / two, beta: T::lit(1.5) },
        (k - 1) / 2,
    )?;
    let mut c = vec![T::zero(); k + 1];
    for (j, &v) in h.coeffs().iter().enumerate() {
        c[2 * j + 1] = v;
    }
    TruncatedSeries::new_odd(c)
}

/// Series of the inverse function `f̄⁻¹_{a,b}`.
pub fn inverse_series<T: Real>(pair: &NormPair<T>, k: usize) -> Result<TruncatedSeries<T>> {
    f_bar_series(pair, k)?.revert()
}

/// Value of `f̄_{a,b}(ρ)` for `ρ ∈ [−1, 1]`.
///
/// Uses the order-`k` series when its tail estimate is negligible, Gauss's summation at
/// `|ρ| = 1`, and the Euler integral otherwise.
pub fn f_bar_value<T: Real>(pair: &NormPair<T>, rho: T, k: usize) -> Result<T> {
    if !(rho.abs() <= T::one()) {
        return Err(Error::domain(format!("f̄ is evaluated on [-1, 1], got {rho}")));
    }
    if pair.is_linear() || rho == T::zero() {
        return Ok(rho);
    }
    let two = T::lit(2.0);
    let w = (T::one() - pair.a) / two;
    let al = (T::one() - pair.b) / two;
    if rho.abs() == T::one() {
        // ₂F₁(w, α; c; 1) = Γ(c)Γ(c−w−α)/(Γ(c−w)Γ(c−α))
        let c = T::lit(1.5);
        let v = (specfun::ln_gamma(c)? + specfun::ln_gamma(c - w - al)?
            - specfun::ln_gamma(c - w)?
            - specfun::ln_gamma(c - al)?)
        .exp();
        return Ok(rho * v);
    }
    let s = f_bar_series(pair, k)?;
    let e = s.eval(rho);
    let threshold = T::lit(1e-14).max(T::epsilon() * T::lit(4.0));
    if e.tail_estimate <= threshold * e.value.abs() {
        return Ok(e.value);
    }
    Ok(specfun::euler_continuation(Complex::new(rho, T::zero()), pair.a, pair.b)?.re)
}

/// `c_ab` together with the series it was computed from.
#[derive(Debug, Clone)]
pub struct CabSolution<T> {
    /// Certified value: `ĥ_K(c) + tail(c) ≤ 1`.
    pub c_ab: T,
    /// Root of the truncated `ĥ_K(c) = 1`; the exact constant lies in `[c_ab, c_upper]`.
    pub c_upper: T,
    /// `ĥ = |f̄⁻¹|` truncated at order `K`.
    pub h_series: TruncatedSeries<T>,
    pub inverse: TruncatedSeries<T>,
    pub tail_bound: T,
    pub order: usize,
}

fn bisect<T: Real, F: Fn(T) -> bool>(below: F) -> T {
    // largest c in [0, 1] with below(c), assuming monotonicity
    let (mut lo, mut hi) = (T::zero(), T::one());
    let width = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Solves `ĥ(c) = 1` for `ĥ = abs_map(revert(f̄_{a,b}))` by bisection.
///
/// The returned `c_ab` satisfies `ĥ_K(c) + tail(c) ≤ 1` and `ĥ_K(c) ≥ 1 − tol`; if the tail
/// estimate prevents the second, a certification error carries the uncertified value.
pub fn compute_c_ab<T: Real>(pair: &NormPair<T>, k: usize, tol: T) -> Result<CabSolution<T>> {
    if k < 30 {
        return Err(Error::domain(format!("c_ab needs truncation order >= 30, got {k}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let inverse = inverse_series(pair, k)?;
    let h_series = inverse.abs_map();
    if pair.is_linear() {
        return Ok(CabSolution {
            c_ab: T::one(),
            c_upper: T::one(),
            h_series,
            inverse,
            tail_bound: T::zero(),
            order: k,
        });
    }
    let one = T::one();
    let c_ab = bisect(|c| {
        let e = h_series.eval(c);
        e.value + e.tail_estimate <= one
    });
    let c_upper = bisect(|c| h_series.value(c) <= one);
    let e = h_series.eval(c_ab);
    if !e.tail_estimate.is_finite() {
        return Err(Error::Certification {
            reason: format!("tail of ĥ unbounded at order {k}"),
            value: c_upper.to_f64_lossy(),
        });
    }
    if e.value < one - tol {
        return Err(Error::Certification {
            reason: format!("tail estimate {:e} exceeds tolerance {tol:e} at order {k}", e.tail_estimate),
            value: c_ab.to_f64_lossy(),
        });
    }
    Ok(CabSolution { c_ab, c_upper, h_series, inverse, tail_bound: e.tail_estimate, order: k })
}

/// Result of [`certify_defect`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectCertificate<T> {
    pub t_odd: usize,
    pub delta: T,
    pub h_err: T,
    /// Certified lower bound on `ĥ⁻¹(1)`.
    pub rho_certified: T,
    /// `ĥ(ρ)` including the tail estimate; at most 1.
    pub h_at_rho: T,
}

/// The bound comparison for one exponent pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub pair: NormPair<T>,
    pub c_ab: T,
    pub ratio: T,
    pub krivine_ratio: T,
    pub steinberg_ratio: T,
    #[serde(rename = "K")]
    pub order: usize,
    pub tail_bound: T,
    pub defect_certificate: Option<DefectCertificate<T>>,
}

/// `min{γ_p/γ_q, γ_{q*}/γ_{p*}}`, each branch infinite when it needs an infinite exponent.
pub fn steinberg_ratio<T: Real>(pair: &NormPair<T>) -> Result<T> {
    let gq = specfun::gaussian_moment(pair.q)?;
    let gps = specfun::gaussian_moment(pair.p_star())?;
    let first = if pair.p.is_finite() { specfun::gaussian_moment(pair.p)? / gq } else { T::infinity() };
    let qs = pair.q_star();
    let second = if qs.is_finite() { specfun::gaussian_moment(qs)? / gps } else { T::infinity() };
    Ok(first.min(second))
}

/// `1/(γ_{p*}·γ_q·c_ab)` with the comparison constants.
pub fn approx_ratio<T: Real>(pair: &NormPair<T>, k: usize) -> Result<BoundReport<T>> {
    approx_ratio_with_tol(pair, k, T::lit(DEFAULT_TOL))
}

pub fn approx_ratio_with_tol<T: Real>(pair: &NormPair<T>, k: usize, tol: T) -> Result<BoundReport<T>> {
    let sol = compute_c_ab(pair, k, tol)?;
    report_from(pair, &sol)
}

/// As [`approx_ratio_with_tol`], doubling the order on certification failure up to `max_order`.
pub fn approx_ratio_adaptive<T: Real>(pair: &NormPair<T>, k: usize, tol: T, max_order: usize) -> Result<BoundReport<T>> {
    let mut order = k;
    loop {
        match approx_ratio_with_tol(pair, order, tol) {
            Err(Error::Certification { .. }) if order * 2 <= max_order => order *= 2,
            other => return other,
        }
    }
}

fn report_from<T: Real>(pair: &NormPair<T>, sol: &CabSolution<T>) -> Result<BoundReport<T>> {
    let g = specfun::gaussian_moment(pair.p_star())? * specfun::gaussian_moment(pair.q)?;
    Ok(BoundReport {
        pair: *pair,
        c_ab: sol.c_ab,
        ratio: (g * sol.c_ab).recip(),
        krivine_ratio: krivine_ratio(),
        steinberg_ratio: steinberg_ratio(pair)?,
        order: sol.order,
        tail_bound: sol.tail_bound,
        defect_certificate: None,
    })
}

/// Which coefficient condition applies at an odd degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `f⁻¹_k ≤ 1/k!` for `k ≡ 1 (mod 4)`
    C1,
    /// `f⁻¹_k ≤ 0` for `k ≡ 3 (mod 4)`
    C2,
}

impl Condition {
    pub fn for_degree(k: usize) -> Option<Self> {
        match k % 4 {
            1 => Some(Condition::C1),
            3 => Some(Condition::C2),
            _ => None,
        }
    }

    fn bound<T: Real>(self, k: usize) -> T {
        match self {
            Condition::C1 => (-specfun::ln_gamma(T::from_usize_lossy(k + 1)).unwrap()).exp(),
            Condition::C2 => T::zero(),
        }
    }
}

/// Signed margins `bound − f⁻¹_k` for odd `3 ≤ k ≤ k_max` at one `(a, b)`.
pub fn condition_margins<T: Real>(a: T, b: T, k_max: usize) -> Result<Vec<(usize, Condition, T)>> {
    let inv = f_bar_series_ab(a, b, k_max.max(1))?.revert()?;
    Ok((3..=k_max)
        .step_by(2)
        .map(|k| {
            let cond = Condition::for_degree(k).unwrap();
            (k, cond, cond.bound::<T>(k) - inv.coeff(k))
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeMargin<T> {
    pub k: usize,
    pub condition: Condition,
    /// Smallest `bound − f⁻¹_k` over the grid; negative means violated.
    pub worst_margin: T,
    pub worst_point: (T, T),
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport<T> {
    pub k_max: usize,
    pub points: usize,
    pub degrees: Vec<DegreeMargin<T>>,
    pub passed: bool,
}

/// Uniform `n × n` grid on `[0, 1]²`.
pub fn ab_grid<T: Real>(n: usize) -> Vec<(T, T)> {
    let step = |i: usize| if n <= 1 { T::zero() } else { T::from_usize_lossy(i) / T::from_usize_lossy(n - 1) };
    (0..n).flat_map(|i| (0..n).map(move |j| (step(i), step(j)))).collect()
}

/// Checks C1/C2 for every odd `k ≤ k_max` at every grid point.
pub fn check_conditions<T: Real>(k_max: usize, grid: &[(T, T)], k: usize) -> Result<ConditionReport<T>> {
    if k_max > k {
        return Err(Error::domain(format!("k_max = {k_max} exceeds the truncation order {k}")));
    }
    if grid.is_empty() {
        return Err(Error::domain("empty (a, b) grid"));
    }
    let margins: Vec<Vec<(usize, Condition, T)>> =
        grid.par_iter().map(|&(a, b)| condition_margins(a, b, k_max)).collect::<Result<_>>()?;
    let mut degrees: Vec<DegreeMargin<T>> = margins[0]
        .iter()
        .map(|&(k, condition, _)| DegreeMargin {
            k,
            condition,
            worst_margin: T::infinity(),
            worst_point: grid[0],
            passed: true,
        })
        .collect();
    for (point, row) in grid.iter().zip(&margins) {
        for (d, &(_, _, m)) in degrees.iter_mut().zip(row) {
            if m < d.worst_margin {
                d.worst_margin = m;
                d.worst_point = *point;
            }
        }
    }
    let tol = T::lit(CONDITION_TOL);
    for d in degrees.iter_mut() {
        d.passed = d.worst_margin >= -tol;
    }
    let passed = degrees.iter().all(|d| d.passed);
    Ok(ConditionReport { k_max, points: grid.len(), degrees, passed })
}

/// Certifies `ĥ⁻¹(1) ≥ ρ` from the tail mass `h_err(t, δ) = Σ_{k≥t}|f⁻¹_k|δ^k`.
///
/// Requires C1/C2 below `t_odd`; returns `ρ = min(sinh⁻¹(1 − 2h_err), δ)` after checking
/// `ĥ(ρ) ≤ 1` including the tail estimate.
pub fn certify_defect<T: Real>(pair: &NormPair<T>, t_odd: usize, delta: T, k: usize) -> Result<DefectCertificate<T>> {
    if t_odd.is_multiple_of(2) || t_odd < 3 || t_odd > k {
        return Err(Error::domain(format!("t must be odd with 3 <= t <= K, got t = {t_odd}, K = {k}")));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let inv = inverse_series(pair, k)?;
    let tol = T::lit(CONDITION_TOL);
    for kk in (3..t_odd).step_by(2) {
        let cond = Condition::for_degree(kk).unwrap();
        let margin = cond.bound::<T>(kk) - inv.coeff(kk);
        if margin < -tol {
            return Err(Error::Certification {
                reason: format!("condition {cond:?} fails at k = {kk}"),
                value: margin.to_f64_lossy(),
            });
        }
    }
    let h = inv.abs_map();
    let mut h_err = h.tail_estimate(delta);
    for kk in t_odd..=k {
        h_err = h_err + h.coeff(kk) * delta.powi(kk as i32);
    }
    let arg = T::one() - T::lit(2.0) * h_err;
    if !(arg > T::zero()) {
        return Err(Error::Certification {
            reason: format!("tail mass h_err = {h_err} too large"),
            value: h_err.to_f64_lossy(),
        });
    }
    let rho = arg.asinh().min(delta);
    let e = h.eval(rho);
    let h_at_rho = e.value + e.tail_estimate;
    if !(h_at_rho <= T::one()) {
        return Err(Error::Certification {
            reason: format!("ĥ(ρ) = {h_at_rho} exceeds 1"),
            value: rho.to_f64_lossy(),
        });
    }
    Ok(DefectCertificate { t_odd, delta, h_err, rho_certified: rho, h_at_rho })
}

/// Largest `ĥ(ρ) + tail` over a grid, with the point attaining it.
pub fn max_h_on_grid<T: Real>(grid: &[(T, T)], rho: T, k: usize) -> Result<(T, (T, T))> {
    let vals: Vec<T> = grid
        .par_iter()
        .map(|&(a, b)| {
            let h = f_bar_series_ab(a, b, k)?.revert()?.abs_map();
            let e = h.eval(rho);
            Ok(e.value + e.tail_estimate)
        })
        .collect::<Result<_>>()?;
    let mut best = (T::neg_infinity(), grid[0]);
    for (v, p) in vals.into_iter().zip(grid) {
        if v > best.0 {
            best = (v, *p);
        }
    }
    Ok(best)
}

/// The closed-form tail bound `(6.1831/t)·δ^t/(1−δ²)` implied by `|f⁻¹_k| ≤ 6.1831/k`.
pub fn coefficient_bound_tail<T: Real>(t: usize, delta: T) -> T {
    T::lit(INVERSE_COEFF_CONST) / T::from_usize_lossy(t) * delta.powi(t as i32) / (T::one() - delta * delta)
}

/// `C₂(ℓ_r) = max{2^{1/r − 1/2}, 1/γ_r}` for `1 ≤ r ≤ 2`.
pub fn cotype2_constant<T: Real>(r: T) -> Result<T> {
    if !(r >= T::one() && r <= T::lit(2.0)) {
        return Err(Error::domain(format!("cotype-2 constant only for exponents in [1, 2], got {r}")));
    }
    let first = T::lit(2.0).powf(r.recip() - T::lit(0.5));
    Ok(first.max(specfun::gaussian_moment(r)?.recip()))
}

/// Upper bounds on the Hilbert-space factorization constant of `ℓ_p → ℓ_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationBound<T> {
    /// `(1+ε₀)/(sinh⁻¹(1)·γ_{p*}·γ_q)`
    pub gaussian_form: T,
    /// `(1+ε₀)/sinh⁻¹(1)·C₂(ℓ_{p*})·C₂(ℓ_q)`
    pub cotype_form: T,
}

pub fn factorization_bound<T: Real>(pair: &NormPair<T>) -> Result<FactorizationBound<T>> {
    let lead = (T::one() + T::lit(EPS0)) / T::lit(SINH_INV_ONE);
    let g = specfun::gaussian_moment(pair.p_star())? * specfun::gaussian_moment(pair.q)?;
    Ok(FactorizationBound {
        gaussian_form: lead / g,
        cotype_form: lead * cotype2_constant(pair.p_star())? * cotype2_constant(pair.q)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(p: f64, q: f64) -> NormPair<f64> {
        NormPair::new(p, q).unwrap()
    }

    #[test]
    fn pair_derived_exponents() {
        let pr = pair(f64::INFINITY, 1.0);
        assert_eq!((pr.a(), pr.b(), pr.p_star()), (0.0, 0.0, 1.0));
        assert!(pr.q_star().is_infinite());
        let pr = pair(4.0, 4.0 / 3.0);
        assert_relative_eq!(pr.a(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(pr.q_star(), 4.0, max_relative = 1e-15);
        assert!(NormPair::new(1.5, 1.0).is_err());
        assert!(NormPair::new(3.0, 2.5).is_err());
        assert!(NormPair::new(f64::NAN, 1.0).is_err());
        let back = NormPair::from_ab(pr.a(), pr.b()).unwrap();
        assert_relative_eq!(back.p(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn f_bar_examples() {
        let s = f_bar_series(&pair(f64::INFINITY, 1.0), 9).unwrap();
        assert_eq!(s.coeff(1), 1.0);
        assert_relative_eq!(s.coeff(3), 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(s.coeff(5), 3.0 / 40.0, max_relative = 1e-15);
        let s = f_bar_series(&pair(2.0, 1.3), 15).unwrap();
        assert_eq!(s, TruncatedSeries::identity(15));
        let s = f_bar_series(&NormPair::from_ab(0.5, 0.5).unwrap(), 5).unwrap();
        assert_relative_eq!(s.coeff(3), 1.0 / 24.0, max_relative = 1e-15);
    }

    #[test]
    fn f_bar_value_anchor() {
        let pr = pair(f64::INFINITY, 1.0);
        for rho in [-0.99, -0.5, 0.3, 0.9, 0.99, 1.0] {
            let v = f_bar_value(&pr, rho, IDENTITY_ORDER).unwrap();
            assert!((v - f64::asin(rho)).abs() < 1e-12, "rho = {rho}");
        }
    }

    #[test]
    fn c_ab_examples() {
        let s = compute_c_ab(&pair(f64::INFINITY, 1.0), 60, 1e-10).unwrap();
        assert!((s.c_ab - SINH_INV_ONE).abs() < 1e-10);
        let s = compute_c_ab(&pair(2.0, 1.5), 60, 1e-10).unwrap();
        assert_eq!(s.c_ab, 1.0);
        // the (0.5, 0.5) inverse tail decays like 0.89^k, so 1e-9 is out of reach at K = 60
        assert!(compute_c_ab(&NormPair::from_ab(0.5, 0.5).unwrap(), 60, 1e-9).is_err());
        let s = compute_c_ab(&NormPair::from_ab(0.5, 0.5).unwrap(), 60, 1e-6).unwrap();
        assert!(s.c_ab > 0.8813 && s.c_ab < 1.0);
        assert!(s.c_ab <= s.c_upper);
        assert!(compute_c_ab(&pair(4.0, 1.5), 20, 1e-9).is_err());
    }

    #[test]
    fn c_ab_matches_high_precision_reference() {
        // 40-digit reversion of the series to order 181, then root of ĥ(c) = 1
        let reference = [
            (0.5, 0.5, 0.9538659612444375f64),
            (0.3, 0.7, 0.9592601944142378),
            (0.0, 0.5, 0.92462312027145),
            (0.1, 0.1, 0.89995735427602),
        ];
        for (a, b, want) in reference {
            let got = compute_c_ab(&NormPair::from_ab(a, b).unwrap(), 240, 1e-10).unwrap();
            assert!((got.c_ab - want).abs() < 2e-12, "({a},{b}): {} vs {want}", got.c_ab);
            assert!(got.c_upper >= want - 2e-12);
        }
    }

    #[test]
    fn c_ab_uncertified_near_one() {
        let r = compute_c_ab(&NormPair::from_ab(0.9, 0.9).unwrap(), 30, 1e-12);
        match r {
            Err(Error::Certification { value, .. }) => assert!(value > 0.99 && value < 1.0),
            other => panic!("expected certification error, got {other:?}"),
        }
    }

    #[test]
    fn ratios() {
        let r = approx_ratio(&pair(f64::INFINITY, 1.0), 60).unwrap();
        assert!((r.ratio - krivine_ratio::<f64>()).abs() < 1e-9);
        assert!((krivine_ratio::<f64>() - 1.782_213_7).abs() < 1e-6);
        assert!(r.steinberg_ratio.is_infinite());
        let r = approx_ratio(&pair(2.0, 2.0), 60).unwrap();
        assert_eq!(r.ratio, 1.0);
        let r = approx_ratio(&pair(4.0, 4.0 / 3.0), 60).unwrap();
        assert!(r.ratio < r.krivine_ratio && r.ratio >= 1.0);
    }

    #[test]
    fn linear_pair_ratio_exact() {
        let pr = pair(2.0, 1.2);
        let r = approx_ratio(&pr, 60).unwrap();
        let want = 1.0 / (specfun::gaussian_moment(2.0).unwrap() * specfun::gaussian_moment(1.2).unwrap());
        assert_eq!(r.ratio, want);
    }

    #[test]
    fn conditions_sin_case() {
        let m = condition_margins(0.0f64, 0.0, 29).unwrap();
        for (k, cond, margin) in m {
            match cond {
                Condition::C1 => assert!(margin.abs() < 1e-15, "k={k}"),
                Condition::C2 => assert!(margin >= 0.0, "k={k}"),
            }
        }
        let r = check_conditions(29, &ab_grid::<f64>(11), 29).unwrap();
        assert!(r.passed);
        assert_eq!(r.degrees.len(), 14);
        assert!(check_conditions(31, &ab_grid::<f64>(3), 29).is_err());
    }

    #[test]
    fn defect_bound_formula_reproduces_quoted_value() {
        let delta = SINH_INV_ONE / (1.0 + EPS0);
        let v = coefficient_bound_tail(31, delta);
        assert!((v - 0.012_899_1).abs() < 5e-6, "{v}");
        let v = coefficient_bound_tail(31, 0.974_203f64.asinh());
        assert!(v < 0.0129);
    }

    #[test]
    fn defect_certificate() {
        let delta = 0.974_203f64.asinh();
        let c = certify_defect(&pair(f64::INFINITY, 1.0), 31, delta, 60).unwrap();
        assert!(c.h_err <= 0.0129);
        assert_eq!(c.rho_certified, delta);
        assert!(c.h_at_rho <= 1.0);
        let target = SINH_INV_ONE / (1.0 + EPS0);
        for pr in [pair(f64::INFINITY, 1.0), pair(4.0, 4.0 / 3.0), pair(3.0, 1.1)] {
            let c = certify_defect(&pr, 31, target, 60).unwrap();
            assert_eq!(c.rho_certified, target);
        }
        let lin = certify_defect(&pair(2.0, 1.0), 31, 0.5, 60).unwrap();
        assert_eq!(lin.h_err, 0.0);
        assert_eq!(lin.rho_certified, 0.5);
        assert!(certify_defect(&pair(3.0, 1.5), 30, 0.5, 60).is_err());
    }

    #[test]
    fn cotype() {
        assert_relative_eq!(cotype2_constant(2.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(cotype2_constant(1.0).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
        assert!(cotype2_constant(2.5).is_err());
        let f = factorization_bound(&pair(f64::INFINITY, 1.0)).unwrap();
        assert_relative_eq!(f.cotype_form, (1.0 + EPS0) / SINH_INV_ONE * 2.0, max_relative = 1e-13);
        assert!(f.gaussian_form <= f.cotype_form);
    }

    #[test]
    fn generic_f32_pipeline() {
        let pr = NormPair::<f32>::new(f32::INFINITY, 1.0).unwrap();
        let s = compute_c_ab(&pr, 40, 1e-5).unwrap();
        assert!((s.c_ab - SINH_INV_ONE as f32).abs() < 1e-5);
    }
}
