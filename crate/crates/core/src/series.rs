//! Truncated power series `Σ_{k≤K} c_k x^k`.

use serde::Serialize;

use crate::{Error, Real, Result};

/// Number of trailing nonzero coefficient pairs used to fit the geometric tail ratio.
pub const TAIL_PAIRS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedSeries<T> {
    coeffs: Vec<T>,
    odd: bool,
}

/// Value of a truncated series together with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    /// Upper bound on `|Σ_{k>K} c_k x^k|` under the fitted-ratio assumption; `+∞` when the
    /// fitted ratio gives no convergence at `|x|`.
    pub tail_estimate: T,
}

impl<T: Real> TruncatedSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("a series needs at least one coefficient"));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!("series coefficient {k} is not finite")));
        }
        Ok(TruncatedSeries { coeffs, odd: false })
    }

    /// Builds a series flagged odd; even-degree entries are zeroed.
    pub fn new_odd(mut coeffs: Vec<T>) -> Result<Self> {
        for c in coeffs.iter_mut().step_by(2) {
            *c = T::zero();
        }
        let mut s = Self::new(coeffs)?;
        s.odd = true;
        Ok(s)
    }

    pub fn zero(order: usize) -> Self {
        TruncatedSeries { coeffs: vec![T::zero(); order + 1], odd: false }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = T::one();
        s
    }

    /// The series `x`, flagged odd.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = T::one();
        }
        s.odd = true;
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the truncation order.
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = order.min(self.order()) + 1;
        TruncatedSeries { coeffs: self.coeffs[..n].to_vec(), odd: self.odd }
    }

    /// Cauchy product truncated at the smaller order.
    pub fn multiply(&self, other: &Self) -> Self {
        let k = self.order().min(other.order());
        let mut out = vec![T::zero(); k + 1];
        for (i, &x) in self.coeffs.iter().enumerate().take(k + 1) {
            if x == T::zero() {
                continue;
            }
            for (j, &y) in other.coeffs.iter().enumerate().take(k + 1 - i) {
                out[i + j] = out[i + j] + x * y;
            }
        }
        // odd·odd is even, so only the both-even case keeps the flag meaningful; drop it
        TruncatedSeries { coeffs: out, odd: false }
    }

    /// `self(inner(x))`; requires `inner` to have no constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if inner.coeff(0) != T::zero() {
            return Err(Error::domain("inner series of a composition must vanish at 0"));
        }
        let k = self.order().min(inner.order());
        let inner = inner.truncate(k);
        let mut acc = TruncatedSeries::zero(k);
        acc.coeffs[0] = self.coeff(k);
        for j in (0..k).rev() {
            acc = acc.multiply(&inner);
            acc.coeffs[0] = acc.coeffs[0] + self.coeff(j);
        }
        acc.odd = self.odd && inner.odd;
        if acc.odd {
            for c in acc.coeffs.iter_mut().step_by(2) {
                *c = T::zero();
            }
        }
        Ok(acc)
    }

    /// Compositional inverse: the series `g` with `self(g(x)) = x + O(x^{K+1})`.
    ///
    /// Solves for `g_n` degree by degree from `Σ_j f_j [x^n] g^j = 0`, keeping a table of the
    /// powers of the partial inverse. Coefficients smaller than the rounding error of their own
    /// cancelling sum are set to zero.
    pub fn revert(&self) -> Result<Self> {
        let k = self.order();
        if self.coeff(0) != T::zero() {
            return Err(Error::domain("reversion needs a zero constant term"));
        }
        let f1 = self.coeff(1);
        if k < 1 || f1 == T::zero() {
            return Err(Error::domain("reversion needs a nonzero linear coefficient"));
        }
        // pw[j][n] = [x^n] g(x)^j, j = 1..=k
        let mut pw = vec![vec![T::zero(); k + 1]; k + 1];
        let mut g = vec![T::zero(); k + 1];
        let floor = T::epsilon() * T::lit(8.0);
        g[1] = f1.recip();
        pw[1][1] = g[1];
        for n in 2..=k {
            for j in 2..=n {
                let mut s = T::zero();
                // g^j = g · g^{j-1}; [x^n] uses g_i with i ≤ n-(j-1)
                for i in 1..=(n + 1 - j) {
                    s = s + g[i] * pw[j - 1][n - i];
                }
                pw[j][n] = s;
            }
            if self.odd && n % 2 == 0 {
                continue;
            }
            let mut s = T::zero();
            let mut scale = T::zero();
            for j in 2..=n {
                let term = self.coeffs[j] * pw[j][n];
                s = s + term;
                scale = scale + term.abs();
            }
            g[n] = -s / f1;
            if g[n].abs() <= floor * scale / f1.abs() {
                // indistinguishable from cancellation noise
                g[n] = T::zero();
            }
            pw[1][n] = g[n];
        }
        let mut out = Self::new(g)?;
        out.odd = self.odd;
        Ok(out)
    }

    /// Coefficient-wise absolute value.
    pub fn abs_map(&self) -> Self {
        TruncatedSeries { coeffs: self.coeffs.iter().map(|c| c.abs()).collect(), odd: self.odd }
    }

    /// Largest per-degree ratio `|c_k'/c_k|^{1/(k'−k)}` over the last [`TAIL_PAIRS`] consecutive
    /// nonzero coefficients; zero when fewer than two coefficients are nonzero.
    pub fn tail_ratio(&self) -> T {
        let nz: Vec<(usize, T)> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != T::zero())
            .map(|(k, c)| (k, c.abs()))
            .collect();
        let start = nz.len().saturating_sub(TAIL_PAIRS + 1);
        nz[start..]
            .windows(2)
            .map(|w| (w[1].1 / w[0].1).powf(T::from_usize_lossy(w[1].0 - w[0].0).recip()))
            .fold(T::zero(), T::max)
    }

    /// Geometric tail bound at `x` from [`tail_ratio`](Self::tail_ratio).
    pub fn tail_estimate(&self, x: T) -> T {
        let Some(last) = self.coeffs.iter().rposition(|c| *c != T::zero()) else {
            return T::zero();
        };
        let ratio = self.tail_ratio();
        if ratio == T::zero() {
            return T::zero();
        }
        let ax = x.abs();
        let q = ratio * ax;
        if q >= T::one() {
            return T::infinity();
        }
        self.coeffs[last].abs() * ax.powi(last as i32) * q / (T::one() - q)
    }

    /// Horner value at `x`.
    pub fn value(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    pub fn eval(&self, x: T) -> Evaluation<T> {
        Evaluation { value: self.value(x), tail_estimate: self.tail_estimate(x) }
    }
}
