//! Adaptive Gauss–Kronrod integration and Golub–Welsch Gaussian rules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<T> {
    pub value: Complex<T>,
    pub error: T,
    pub converged: bool,
    pub intervals: usize,
}

fn gk15<T: Real, F: Fn(T) -> Complex<T>>(f: &F, a: T, b: T) -> (Complex<T>, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s * T::lit(WG[j / 2]);
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).norm();
    (value, err)
}

/// Globally adaptive 7/15-point Gauss–Kronrod integration of a complex integrand on `[a, b]`.
///
/// Stops when the summed error estimate drops below `max(abs_tol, rel_tol·|I|)` or when
/// `max_intervals` panels are in use; `converged` records which.
pub fn integrate<T, F>(f: F, a: T, b: T, abs_tol: T, rel_tol: T, max_intervals: usize) -> Integral<T>
where
    T: Real,
    F: Fn(T) -> Complex<T>,
{
    let (v0, e0) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v0, e0)];
    loop {
        let total: Complex<T> = panels.iter().fold(Complex::new(T::zero(), T::zero()), |acc, p| acc + p.2);
        let err = panels.iter().fold(T::zero(), |acc, p| acc + p.3);
        let target = abs_tol.max(rel_tol * total.norm());
        if err <= target || panels.len() >= max_intervals {
            return Integral {
                value: total,
                error: err,
                converged: err <= target,
                intervals: panels.len(),
            };
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = (pa + pb) * T::lit(0.5);
        if !(mid > pa && mid < pb) {
            // panel cannot be split further in this precision
            return Integral {
                value: total,
                error: err,
                converged: false,
                intervals: panels.len() + 1,
            };
        }
        let (vl, el) = gk15(&f, pa, mid);
        let (vr, er) = gk15(&f, mid, pb);
        panels.push((pa, mid, vl, el));
        panels.push((mid, pb, vr, er));
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<T, F>(f: F, a: T, b: T, abs_tol: T, rel_tol: T, max_intervals: usize) -> (T, T, bool)
where
    T: Real,
    F: Fn(T) -> T,
{
    let r = integrate(|x| Complex::new(f(x), T::zero()), a, b, abs_tol, rel_tol, max_intervals);
    (r.value.re, r.error, r.converged)
}

/// Nodes and weights of an n-point Gaussian rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn golub_welsch(diag: Vec<f64>, off: Vec<f64>, mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Generalized Gauss–Laguerre rule for the weight `u^alpha e^{-u}` on `(0, ∞)`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> GaussRule {
    let diag = (0..n).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
    let off = (1..n).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
    let mu0 = crate::specfun::gamma(alpha + 1.0).expect("alpha > -1");
    golub_welsch(diag, off, mu0)
}

/// Gauss–Hermite rule for the standard normal density (probabilists' weight).
pub fn gauss_hermite_normal(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let off = (1..n).map(|i| (i as f64).sqrt()).collect();
    golub_welsch(diag, off, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomial_exact() {
        let (v, e, ok) = integrate_real(|x: f64| x.powi(20) - 3.0 * x.powi(7), -1.0, 2.0, 1e-13, 1e-13, 50);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert!(ok, "err {e}");
        assert!((v - exact).abs() < 1e-9 * exact.abs());
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let (v, _, ok) = integrate_real(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10, 500);
        assert!(ok);
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_complex() {
        let r = integrate(|x: f64| Complex::new(0.0, 10.0 * x).exp(), 0.0, std::f64::consts::PI, 1e-13, 1e-13, 200);
        // ∫ e^{10ix} = (e^{10iπ} - 1)/(10i) = 0
        assert!(r.converged);
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn laguerre_moments() {
        // ∫ u^k u^α e^{-u} = Γ(k+α+1)
        let alpha = 0.35;
        let rule = gauss_laguerre(30, alpha);
        for k in 0..20 {
            let got = rule.apply(|u| u.powi(k));
            let want = crate::specfun::gamma(k as f64 + alpha + 1.0).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "k={k}");
        }
    }

    #[test]
    fn hermite_normal_moments() {
        let rule = gauss_hermite_normal(20);
        assert!((rule.apply(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((rule.apply(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((rule.apply(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!(rule.apply(|x| x.powi(5)).abs() < 1e-11);
    }
}
