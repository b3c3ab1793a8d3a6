//! Independent numeric checks of the identities behind the bounds: Monte Carlo for the Gaussian
//! correlation, quadrature for Hermite coefficients, and contour evaluations of the continuation.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::krivine::{self, NormPair, INVERSE_COEFF_CONST};
use crate::norms::signed_pow;
use crate::quadrature::gauss_laguerre;
use crate::specfun::{self, euler_continuation};
use crate::{stream_rng, Error, Result};

/// One verified identity. Monte Carlo checks carry a standard error and pass at 4σ; deterministic
/// checks carry an absolute tolerance instead.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckResult {
    pub target: String,
    pub estimate: f64,
    pub reference: f64,
    pub std_error: f64,
    pub sigmas: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

/// Pass threshold for Monte Carlo checks.
pub const SIGMA_LIMIT: f64 = 4.0;

impl IdentityCheckResult {
    pub fn monte_carlo(target: String, estimate: f64, reference: f64, std_error: f64) -> Self {
        let dev = (estimate - reference).abs();
        let sigmas = if std_error > 0.0 { dev / std_error } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        IdentityCheckResult {
            target,
            estimate,
            reference,
            std_error,
            sigmas: Some(sigmas),
            tolerance: None,
            passed: sigmas <= SIGMA_LIMIT,
        }
    }

    pub fn deterministic(target: String, estimate: f64, reference: f64, tolerance: f64) -> Self {
        IdentityCheckResult {
            target,
            estimate,
            reference,
            std_error: 0.0,
            sigmas: None,
            tolerance: Some(tolerance),
            passed: (estimate - reference).abs() <= tolerance,
        }
    }
}

/// `K_ab = γ_{a+1}^{a+1}·γ_{b+1}^{b+1}`, the normalization turning the Gaussian correlation
/// into `f̄_{a,b}`.
pub fn correlation_normalization(a: f64, b: f64) -> Result<f64> {
    Ok(specfun::gaussian_abs_moment(a + 1.0)? * specfun::gaussian_abs_moment(b + 1.0)?)
}

const MC_CHUNK: usize = 1 << 14;

/// Monte Carlo estimate of `E[sgn(g₁)|g₁|^b·sgn(g₂)|g₂|^a]` for `ρ`-correlated standard
/// Gaussians, against `K_ab·f̄_{a,b}(ρ)`.
pub fn mc_f_ab(a: f64, b: f64, rho: f64, n: usize, seed: u64) -> Result<IdentityCheckResult> {
    if n < 10_000 {
        return Err(Error::domain(format!("Monte Carlo check needs N >= 1e4, got {n}")));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    let pair = NormPair::from_ab(a, b)?;
    let reference = correlation_normalization(a, b)? * krivine::f_bar_value(&pair, rho, krivine::IDENTITY_ORDER)?;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let g2: f64 = rng.sample(StandardNormal);
                let g3: f64 = rng.sample(StandardNormal);
                let g1 = rho * g2 + s * g3;
                let v = signed_pow(g1, b) * signed_pow(g2, a);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = n as f64;
    let mean = s1 / nf;
    let se = ((s2 / nf - mean * mean).max(0.0) / (nf - 1.0)).sqrt();
    Ok(IdentityCheckResult::monte_carlo(format!("f_ab(a={a},b={b},rho={rho})"), mean, reference, se))
}

/// Orthonormal (probabilists') Hermite polynomials `H_0..=H_k` at `t`.
pub fn hermite_values(t: f64, k: usize) -> Vec<f64> {
    let mut h = vec![1.0; k + 1];
    if k >= 1 {
        h[1] = t;
    }
    for j in 1..k {
        h[j + 1] = (t * h[j] - (j as f64).sqrt() * h[j - 1]) / ((j + 1) as f64).sqrt();
    }
    h
}

/// Closed form of `⟨sgn(τ)|τ|^c, H_k⟩` under the Gaussian measure:
/// `γ_{c+1}^{c+1}·(−2)^j·((1−c)/2)_j/√((2j+1)!)` for `k = 2j+1`, zero for even `k`.
pub fn hermite_closed_form(c: f64, k: usize) -> Result<f64> {
    if k.is_multiple_of(2) {
        return Ok(0.0);
    }
    let j = (k - 1) / 2;
    let mut poch = 1.0;
    for i in 0..j {
        poch *= -2.0 * ((1.0 - c) / 2.0 + i as f64);
    }
    let lf = specfun::ln_gamma(k as f64 + 1.0)?;
    Ok(specfun::gaussian_abs_moment(c + 1.0)? * poch * (-0.5 * lf).exp())
}

/// Numeric `⟨sgn(τ)|τ|^c, H_k⟩`: each half line is mapped by `u = τ²/2` onto a generalized
/// Gauss–Laguerre rule that integrates the polynomial factor exactly.
pub fn hermite_coefficient(c: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::domain(format!("exponent c must lie in [0, 1], got {c}")));
    }
    let nodes = k / 4 + 12;
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    // τ^c H_k(±τ) φ(τ) dτ = u^{α} e^{-u} · g(u) du
    let (alpha, scale, divide_tau) = if k % 2 == 1 {
        (c / 2.0, 2f64.powf(c / 2.0) / norm, true)
    } else {
        ((c - 1.0) / 2.0, 2f64.powf(c / 2.0) / (2f64.sqrt() * norm), false)
    };
    let rule = gauss_laguerre(nodes, alpha);
    let half = |sign: f64| {
        rule.apply(|u| {
            let t = (2.0 * u).sqrt();
            let h = hermite_values(sign * t, k)[k];
            if divide_tau {
                scale * h / t
            } else {
                scale * h
            }
        })
    };
    // sgn(τ) flips the left half
    let right = half(1.0);
    let left = half(-1.0);
    Ok(right - left)
}

/// Numeric Hermite coefficients of `sgn(τ)|τ|^c` against the closed form for `k ≤ k_max`.
pub fn hermite_coeff_check(c: f64, k_max: usize) -> Result<Vec<IdentityCheckResult>> {
    if k_max > 101 {
        return Err(Error::domain(format!("k_max = {k_max} is beyond the verified quadrature range")));
    }
    (0..=k_max)
        .map(|k| {
            let est = hermite_coefficient(c, k)?;
            let reference = hermite_closed_form(c, k)?;
            let tol = if k % 2 == 0 { 1e-8 } else { 1e-6 };
            Ok(IdentityCheckResult::deterministic(format!("hermite(c={c},k={k})"), est, reference, tol))
        })
        .collect()
}

/// `Σ_j ĥf^{(a)}_{2j+1}·ĥf^{(b)}_{2j+1}·ρ^{2j+1}` from quadrature coefficients against `K_ab·f̄(ρ)`.
pub fn noise_correlation_check(a: f64, b: f64, rho: f64, k_max: usize) -> Result<IdentityCheckResult> {
    let pair = NormPair::from_ab(a, b)?;
    let reference = correlation_normalization(a, b)? * krivine::f_bar_value(&pair, rho, krivine::IDENTITY_ORDER)?;
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in (1..=k_max).step_by(2) {
        last = hermite_coefficient(a, k)? * hermite_coefficient(b, k)? * rho.powi(k as i32);
        sum += last;
    }
    // terms decrease, so the remainder is at most a geometric continuation of the last one
    let tail = last.abs() * rho * rho / (1.0 - rho * rho);
    Ok(IdentityCheckResult::deterministic(
        format!("noise_correlation(a={a},b={b},rho={rho})"),
        sum,
        reference,
        1e-5 + tail,
    ))
}

/// Minimum of `|F̃_{a,b}|` along the two outer pieces of the contour `P(α, ε)`.
#[derive(Debug, Clone, Serialize)]
pub struct ContourReport {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub eps: f64,
    /// Minimum over the arc `|z| = α` from `√(α²−ε) + i√ε` to `iα`.
    pub arc_min: f64,
    pub arc_argmin: (f64, f64),
    /// Minimum over the segment from `1−ε` to the arc start.
    pub segment_min: f64,
    pub segment_argmin: (f64, f64),
    pub skipped: usize,
    pub arc_passed: bool,
    pub segment_passed: bool,
}

pub fn contour_magnitude_check(a: f64, b: f64, alpha: f64, eps: f64, samples: usize) -> Result<ContourReport> {
    if alpha < 6.0 {
        return Err(Error::domain(format!("arc check needs alpha >= 6, got {alpha}")));
    }
    if !(eps > 0.0 && eps < 1.0) || samples < 2 {
        return Err(Error::domain("contour check needs 0 < eps < 1 and at least two samples"));
    }
    let start = Complex::new((alpha * alpha - eps).sqrt(), eps.sqrt());
    let theta0 = start.arg();
    let arc: Vec<Complex<f64>> = (0..samples)
        .map(|i| {
            let th = theta0 + (std::f64::consts::FRAC_PI_2 - theta0) * i as f64 / (samples - 1) as f64;
            Complex::from_polar(alpha, th)
        })
        .collect();
    let seg_start = Complex::new(1.0 - eps, 0.0);
    let seg: Vec<Complex<f64>> = (0..samples)
        .map(|i| seg_start + (start - seg_start) * (i as f64 / (samples - 1) as f64))
        .collect();
    let eval = |pts: &[Complex<f64>]| -> (f64, (f64, f64), usize) {
        let vals: Vec<Option<f64>> = pts.par_iter().map(|&z| euler_continuation(z, a, b).ok().map(|v| v.norm())).collect();
        let mut best = (f64::INFINITY, (0.0, 0.0), 0);
        for (z, v) in pts.iter().zip(vals) {
            match v {
                Some(v) if v < best.0 => best = (v, (z.re, z.im), best.2),
                Some(_) => {}
                None => best.2 += 1,
            }
        }
        best
    };
    let (arc_min, arc_argmin, s1) = eval(&arc);
    let (segment_min, segment_argmin, s2) = eval(&seg);
    Ok(ContourReport {
        a,
        b,
        alpha,
        eps,
        arc_min,
        arc_argmin,
        segment_min,
        segment_argmin,
        skipped: s1 + s2,
        arc_passed: arc_min > 1.0,
        segment_passed: segment_min > 1.0,
    })
}

/// `B((1−b)/2, 1+b/2)⁻¹·(ln(6/√2)/√2 + 6^b·√(1−1/36)/(1−b))`, the lower bound on `|F̃|` at `|z| = 6`.
pub fn beta_fact_value(b: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&b) {
        return Err(Error::domain(format!("b must lie in [0, 1), got {b}")));
    }
    let s2 = 2f64.sqrt();
    let lead = (6.0 / s2).ln() / s2 + 6f64.powf(b) * (1.0 - 1.0 / 36.0f64).sqrt() / (1.0 - b);
    Ok(lead / specfun::beta((1.0 - b) / 2.0, 1.0 + b / 2.0)?)
}

/// Smallest value of [`beta_fact_value`] over `n` points of `[0, b_max]` and where it occurs.
pub fn beta_fact_check(n: usize, b_max: f64) -> Result<(f64, f64)> {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let b = b_max * i as f64 / (n - 1).max(1) as f64;
        let v = beta_fact_value(b)?;
        if v < best.0 {
            best = (v, b);
        }
    }
    Ok(best)
}

/// Default radius for [`contour_inverse_coeff`].
pub const CONTOUR_RADIUS: f64 = 0.3;
/// Trapezoid nodes on the circle.
pub const CONTOUR_NODES: usize = 10_000;

/// `f⁻¹_k = (1/(2πk))·Im ∮_{|z|=δ} f̄(z)^{−k} dz`, evaluated with the periodic trapezoid rule,
/// which is spectrally accurate on the full circle.
pub fn contour_inverse_coeff(a: f64, b: f64, k: usize, delta: f64) -> Result<f64> {
    if k.is_multiple_of(2) {
        return Err(Error::domain(format!("inverse coefficients are taken at odd k, got {k}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("contour radius must lie in (0, 1), got {delta}")));
    }
    let pair = NormPair::from_ab(a, b)?;
    let series = krivine::f_bar_series(&pair, krivine::IDENTITY_ORDER)?;
    let coeffs = series.coeffs();
    let n = CONTOUR_NODES;
    let mut acc = Complex::new(0.0, 0.0);
    let mut peak: f64 = 0.0;
    for i in 0..n {
        let z = Complex::from_polar(delta, 2.0 * std::f64::consts::PI * i as f64 / n as f64);
        let f = coeffs.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c);
        let term = f.powi(-(k as i32)) * z;
        peak = peak.max(term.norm());
        acc += term;
    }
    let value = acc.re / (n as f64 * k as f64);
    let rounding = peak * f64::EPSILON * 8.0 / k as f64;
    if rounding > 1e-7 {
        return Err(Error::Accuracy {
            what: format!("contour integral for k = {k} at radius {delta}"),
            value,
            achieved: rounding,
        });
    }
    Ok(value)
}

/// Largest `k·|f⁻¹_k|/6.1831` over odd `k ≤ order`; at most 1 when the decay bound holds with ε → 0.
pub fn inverse_coeff_bound_check(a: f64, b: f64, order: usize) -> Result<(f64, usize)> {
    let inv = krivine::inverse_series(&NormPair::from_ab(a, b)?, order)?;
    let mut worst = (0.0, 1);
    for k in (1..=order).step_by(2) {
        let r = k as f64 * inv.coeff(k).abs() / INVERSE_COEFF_CONST;
        if r > worst.0 {
            worst = (r, k);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_real;

    #[test]
    fn mc_anchor_cases() {
        let r = mc_f_ab(0.0, 0.0, 0.5, 200_000, 1).unwrap();
        assert!((r.reference - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.passed, "{r:?}");
        let r = mc_f_ab(0.4, 0.6, 0.0, 100_000, 2).unwrap();
        assert_eq!(r.reference, 0.0);
        assert!(r.passed);
        assert!(mc_f_ab(0.0, 0.0, 0.5, 100, 1).is_err());
    }

    // E[sgn(g₁)|g₁|^b sgn(g₂)|g₂|^a] by nested adaptive quadrature over g₂ and g₁ | g₂
    fn correlation_by_quadrature(a: f64, b: f64, rho: f64) -> f64 {
        let s = (1.0 - rho * rho).sqrt();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let inner = |g2: f64| {
            let mu = rho * g2;
            let f = |x: f64| signed_pow(x, b) * phi((x - mu) / s) / s;
            let neg = integrate_real(f, (mu - 12.0 * s).min(0.0), 0.0, 1e-13, 1e-13, 400).0;
            let pos = integrate_real(f, 0.0, (mu + 12.0 * s).max(0.0), 1e-13, 1e-13, 400).0;
            neg + pos
        };
        let outer = |g2: f64| signed_pow(g2, a) * phi(g2) * inner(g2);
        integrate_real(outer, -12.0, 0.0, 1e-12, 1e-12, 400).0 + integrate_real(outer, 0.0, 12.0, 1e-12, 1e-12, 400).0
    }

    #[test]
    fn correlation_reference_matches_quadrature() {
        for &(a, b, rho) in &[(0.3, 0.7, 0.6), (0.0, 0.5, -0.4), (0.8, 0.2, 0.9)] {
            let pair = NormPair::from_ab(a, b).unwrap();
            let want = correlation_by_quadrature(a, b, rho);
            let got = correlation_normalization(a, b).unwrap() * krivine::f_bar_value(&pair, rho, 200).unwrap();
            assert!((got - want).abs() < 1e-8, "({a},{b},{rho}): {got} vs {want}");
        }
    }

    #[test]
    fn hermite_examples() {
        let r = hermite_coeff_check(1.0, 9).unwrap();
        assert!((r[1].estimate - 1.0).abs() < 1e-12);
        for c in &r[2..] {
            assert!(c.estimate.abs() < 1e-12, "{c:?}");
        }
        let v = hermite_coefficient(0.0, 1).unwrap();
        assert!((v - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-13);
        let v = hermite_coefficient(0.0, 3).unwrap();
        assert!((v + (2.0 / std::f64::consts::PI).sqrt() / 6f64.sqrt()).abs() < 1e-13);
        assert!(hermite_coeff_check(0.5, 15).unwrap().iter().all(|c| c.passed));
    }

    #[test]
    fn hermite_against_adaptive_quadrature() {
        // independent check of the Laguerre mapping: direct integral over the real line
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &(c, k) in &[(0.3, 5usize), (0.7, 8), (0.5, 11)] {
            let f = |t: f64| signed_pow(t, c) * hermite_values(t, k)[k] * phi(t);
            let want = integrate_real(f, -14.0, 0.0, 1e-14, 1e-14, 500).0 + integrate_real(f, 0.0, 14.0, 1e-14, 1e-14, 500).0;
            assert!((hermite_coefficient(c, k).unwrap() - want).abs() < 1e-10, "c={c} k={k}");
        }
    }

    #[test]
    fn noise_correlation_identity() {
        for &(a, b, rho) in &[(0.0, 0.0, 0.5), (0.3, 0.7, 0.8), (0.5, 0.5, 0.2)] {
            let r = noise_correlation_check(a, b, rho, 99).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn contour_arc() {
        let r = contour_magnitude_check(0.0, 0.0, 6.0, 0.01, 200).unwrap();
        assert!(r.arc_passed, "{r:?}");
        let v = euler_continuation(Complex::new(0.0f64, 2.0), 0.3, 0.6).unwrap();
        assert!(v.re.abs() < 1e-12);
        assert!(contour_magnitude_check(0.0, 0.0, 3.0, 0.01, 10).is_err());
    }

    #[test]
    fn beta_fact() {
        let (v, _) = beta_fact_check(200, 0.999).unwrap();
        assert!(v >= 1.003);
        assert!(beta_fact_value(1.0).is_err());
    }

    #[test]
    fn contour_coefficients() {
        assert!((contour_inverse_coeff(0.0, 0.0, 3, 0.3).unwrap() + 1.0 / 6.0).abs() < 1e-12);
        assert!(contour_inverse_coeff(1.0, 0.3, 3, 0.3).unwrap().abs() < 1e-14);
        let inv = krivine::inverse_series(&NormPair::from_ab(0.5, 0.5).unwrap(), 60).unwrap();
        for k in [3, 5, 7, 9] {
            let c = contour_inverse_coeff(0.5, 0.5, k, 0.3).unwrap();
            assert!((c - inv.coeff(k)).abs() < 1e-10, "k={k}");
        }
        assert!(contour_inverse_coeff(0.5, 0.5, 4, 0.3).is_err());
        assert!(matches!(contour_inverse_coeff(0.5, 0.5, 61, 0.3), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn inverse_coefficients_within_decay_bound() {
        for &(a, b) in &[(0.0, 0.0), (0.5, 0.5), (0.9, 0.2), (0.99, 0.99)] {
            let (r, _) = inverse_coeff_bound_check(a, b, 121).unwrap();
            assert!(r <= 1.0, "({a},{b}) -> {r}");
        }
    }
}
