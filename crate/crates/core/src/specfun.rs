//! Gamma and beta functions, Gaussian moment norms, hypergeometric coefficients and the
//! Euler-integral continuation of `ρ·₂F₁((1−a)/2, (1−b)/2; 3/2; ρ²)`.

use num_complex::Complex;
use serde::Serialize;

use crate::quadrature;
use crate::series::TruncatedSeries;
use crate::{Error, Real, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum<T: Real>(x: T) -> T {
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    acc
}

/// Γ(x) for x > 0.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain(format!("gamma requires a positive finite argument, got {x}")));
    }
    if x < T::lit(0.5) {
        // reflection keeps the Lanczos sum in its accurate range
        let pi = T::PI();
        return Ok(pi / ((pi * x).sin() * gamma(T::one() - x)?));
    }
    if x > T::lit(140.0) {
        return Ok(ln_gamma(x)?.exp());
    }
    let xm = x - T::one();
    let t = xm + T::lit(LANCZOS_G + 0.5);
    let sqrt_2pi = (T::lit(2.0) * T::PI()).sqrt();
    Ok(sqrt_2pi * t.powf(xm + T::lit(0.5)) * (-t).exp() * lanczos_sum(xm))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma requires a positive finite argument, got {x}")));
    }
    if x < T::lit(0.5) {
        let pi = T::PI();
        return Ok((pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x)?);
    }
    let xm = x - T::one();
    let t = xm + T::lit(LANCZOS_G + 0.5);
    let half_ln_2pi = T::lit(0.918_938_533_204_672_7);
    Ok(half_ln_2pi + (xm + T::lit(0.5)) * t.ln() - t + lanczos_sum(xm).ln())
}

/// Euler beta function B(x, y).
pub fn beta<T: Real>(x: T, y: T) -> Result<T> {
    Ok((ln_gamma(x)? + ln_gamma(y)? - ln_gamma(x + y)?).exp())
}

/// `E|g|^r = γ_r^r` for a standard Gaussian `g`.
pub fn gaussian_abs_moment<T: Real>(r: T) -> Result<T> {
    if !(r >= T::zero()) || !r.is_finite() {
        return Err(Error::domain(format!("Gaussian moment exponent must be finite and >= 0, got {r}")));
    }
    let two = T::lit(2.0);
    Ok(two.powf(r / two) * gamma((T::one() + r) / two)? / T::PI().sqrt())
}

/// The Gaussian norm `γ_r = (E|g|^r)^{1/r}`, with `γ_0 = 1`.
pub fn gaussian_moment<T: Real>(r: T) -> Result<T> {
    let m = gaussian_abs_moment(r)?;
    if r == T::zero() || r == T::lit(2.0) {
        return Ok(T::one());
    }
    if m.is_finite() {
        return Ok(m.powf(r.recip()));
    }
    let two = T::lit(2.0);
    let ln_m = r / two * two.ln() + ln_gamma((T::one() + r) / two)? - T::lit(0.5) * T::PI().ln();
    Ok((ln_m / r).exp())
}

/// A Gaussian norm together with its exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMoment<T> {
    pub r: T,
    pub value: T,
}

impl<T: Real> GaussianMoment<T> {
    pub fn new(r: T) -> Result<Self> {
        Ok(GaussianMoment { r, value: gaussian_moment(r)? })
    }
}

/// Hypergeometric series selector for [`hyp_coeffs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hypergeometric<T> {
    /// `₁F₁(α; β; x)`
    Confluent { alpha: T, beta: T },
    /// `₂F₁(w, α; β; x)`
    Gauss { w: T, alpha: T, beta: T },
}

fn nonpositive_integer<T: Real>(x: T) -> bool {
    x <= T::zero() && x == x.round()
}

/// Taylor coefficients `0..=k` of a hypergeometric series in its argument.
pub fn hyp_coeffs<T: Real>(kind: Hypergeometric<T>, k: usize) -> Result<TruncatedSeries<T>> {
    let (w, alpha, beta) = match kind {
        Hypergeometric::Confluent { alpha, beta } => (None, alpha, beta),
        Hypergeometric::Gauss { w, alpha, beta } => (Some(w), alpha, beta),
    };
    if nonpositive_integer(beta) {
        return Err(Error::domain(format!("denominator parameter {beta} is a nonpositive integer")));
    }
    let mut coeffs = Vec::with_capacity(k + 1);
    let mut c = T::one();
    coeffs.push(c);
    for j in 0..k {
        let jt = T::from_usize_lossy(j);
        let mut num = alpha + jt;
        if let Some(w) = w {
            num = num * (w + jt);
        }
        c = c * num / ((beta + jt) * (jt + T::one()));
        coeffs.push(c);
    }
    TruncatedSeries::new(coeffs)
}

fn on_excluded_ray<T: Real>(z: Complex<T>) -> bool {
    let eps = T::lit(1e-9);
    z.im.abs() <= eps * z.re.abs().max(T::one()) && z.re.abs() > T::one() - eps
}

/// Analytic continuation `F̃_{a,b}(z)` of `z·₂F₁((1−a)/2, (1−b)/2; 3/2; z²)` via its Euler
/// integral, valid off the real rays `|Re z| ≥ 1`.
///
/// The integral is split at `t = 1/2`; the left half uses `t = s^{2/(1−b)}`, which absorbs the
/// `t^{−(1+b)/2}` singularity, and the right half uses `u = (1−t)^{(b+2)/2}`.
pub fn euler_continuation<T: Real>(z: Complex<T>, a: T, b: T) -> Result<Complex<T>> {
    let one = T::one();
    let zero = T::zero();
    if !(a >= zero && a <= one) || !(b >= zero && b <= one) {
        return Err(Error::domain(format!("euler_continuation needs a, b in [0, 1], got ({a}, {b})")));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("euler_continuation argument is not finite"));
    }
    if on_excluded_ray(z) {
        return Err(Error::domain(format!("z = {z} lies on an excluded branch ray")));
    }
    if z == Complex::new(zero, zero) || a == one || b == one {
        return Ok(z);
    }
    // ₂F₁ is symmetric in its numerator parameters
    let (a, b) = if b > a { (b, a) } else { (a, b) };
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let z2 = z * z;
    let ea = -(one - a) / two;
    let kernel = move |t: T| (Complex::new(one, zero) - z2 * t).powf(ea);

    let s_end = half.powf((one - b) / two);
    let exp_s = two / (one - b);
    let left = move |s: T| {
        let t = s.powf(exp_s);
        kernel(t) * ((one - t).powf(b / two) * exp_s)
    };
    let u_end = half.powf((b + two) / two);
    let exp_u = two / (b + two);
    let right = move |u: T| {
        let t = one - u.powf(exp_u);
        kernel(t) * (t.powf(-(one + b) / two) * exp_u)
    };

    let eps = T::epsilon();
    let tol = (T::lit(1e-13)).max(eps * T::lit(64.0));
    let il = quadrature::integrate(left, zero, s_end, tol, tol, 4000);
    let ir = quadrature::integrate(right, zero, u_end, tol, tol, 4000);
    let norm = beta((one - b) / two, one + b / two)?;
    let value = z * (il.value + ir.value) / norm;
    let err = (il.error + ir.error) * z.norm() / norm;
    let accept = T::lit(1e-9).max(eps * T::lit(256.0)) * value.norm().max(T::lit(1e-3));
    if !(err <= accept) || !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::Accuracy {
            what: format!("Euler integral at z = {z}"),
            value: value.norm().to_f64_lossy(),
            achieved: err.to_f64_lossy(),
        });
    }
    Ok(value)
}
