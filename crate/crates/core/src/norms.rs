//! ℓ_r norms and the Hölder duality map on `f64` vectors.

use crate::{Error, Result};

/// `‖x‖_r` for `r ∈ [1, ∞]`.
pub fn lp_norm(x: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return x.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if r == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if r == 2.0 {
        return x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    // scale by the max entry to avoid overflow in |x|^r
    let m = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * x.iter().map(|v| (v.abs() / m).powf(r)).sum::<f64>().powf(r.recip())
}

/// `r* = r/(r−1)`, with `1* = ∞` and `∞* = 1`.
pub fn dual_exponent(r: f64) -> f64 {
    if r == 1.0 {
        f64::INFINITY
    } else if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sgn(x)|x|^e` with `|x|^0 = 1` for nonzero `x`.
#[inline]
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        sgn(x)
    } else {
        sgn(x) * x.abs().powf(e)
    }
}

/// The Hölder duality map `ψ_r(z) = sgn(z)∘|z|^{r−1}` for `1 ≤ r < ∞`.
///
/// `⟨ψ_r(z), z⟩ = ‖z‖_r^r` and `‖ψ_r(z)‖_{r*} = ‖z‖_r^{r−1}`; `ψ_1` is the sign map.
pub fn holder_dual(z: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r >= 1.0) || r.is_infinite() {
        return Err(Error::domain(format!("Hölder dual exponent must lie in [1, ∞), got {r}")));
    }
    Ok(z.iter().map(|&v| signed_pow(v, r - 1.0)).collect())
}

/// The unit-norm maximizer of `⟨·, z⟩` over the `ℓ_s` ball, `s ∈ [1, ∞]`.
///
/// For `s = 1` the mass goes to the largest entry (first on ties).
pub fn dual_unit_vector(z: &[f64], s: f64) -> Vec<f64> {
    let n = lp_norm(z, dual_exponent(s));
    if n == 0.0 {
        return vec![0.0; z.len()];
    }
    if s.is_infinite() {
        return z.iter().map(|&v| sgn(v)).collect();
    }
    if s == 1.0 {
        let (idx, _) = z.iter().enumerate().fold((0, -1.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        let mut out = vec![0.0; z.len()];
        out[idx] = sgn(z[idx]);
        return out;
    }
    let e = dual_exponent(s) - 1.0;
    let scaled: Vec<f64> = z.iter().map(|&v| signed_pow(v / n, e)).collect();
    scaled
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let x = [3.0, -4.0];
        assert_eq!(lp_norm(&x, 2.0), 5.0);
        assert_eq!(lp_norm(&x, 1.0), 7.0);
        assert_eq!(lp_norm(&x, f64::INFINITY), 4.0);
        assert!((lp_norm(&x, 3.0) - 91f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert_eq!(lp_norm(&[0.0, 0.0], 3.0), 0.0);
    }

    #[test]
    fn holder_examples() {
        assert_eq!(holder_dual(&[3.0, -4.0], 2.0).unwrap(), vec![3.0, -4.0]);
        assert_eq!(holder_dual(&[0.5, -2.0, 0.0], 1.0).unwrap(), vec![1.0, -1.0, 0.0]);
        let z = [1.0, -2.0];
        let d = holder_dual(&z, 3.0).unwrap();
        assert_eq!(d, vec![1.0, -4.0]);
        let lhs = lp_norm(&d, 1.5);
        assert!((lhs - 9f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!(holder_dual(&z, f64::INFINITY).is_err());
    }

    #[test]
    fn dual_unit_vector_attains_dual_norm() {
        let z = [0.3, -1.2, 2.0, 0.0];
        for s in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let x = dual_unit_vector(&z, s);
            assert!((lp_norm(&x, s) - 1.0).abs() < 1e-12, "s = {s}");
            let ip: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
            assert!((ip - lp_norm(&z, dual_exponent(s))).abs() < 1e-12, "s = {s}");
        }
    }
}
