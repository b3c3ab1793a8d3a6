//! Certified approximation of p→q operator norms by a convex relaxation and Krivine-type rounding.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] gamma, Gaussian moments, hypergeometric coefficients and the Euler integral
//! * [`series`] truncated power series with reversion and tail estimates
//! * [`krivine`] the constant `c_ab`, approximation ratios and coefficient certificates
//! * [`relaxation`] the convex vector relaxation and a brute-force norm oracle
//! * [`rounding`] the transformed Gram matrix and Gaussian rounding
//! * [`oracles`] independent numeric checks of the identities the bounds rely on
//! * [`factorization`] dual weights and factorization through Hilbert space
//!
//! The scalar-level modules are generic over [`Real`] (`f32`, `f64`); matrix code is `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factorization;
pub mod io;
pub mod krivine;
pub mod norms;
pub mod oracles;
pub mod quadrature;
pub mod relaxation;
pub mod rounding;
pub mod series;
pub mod specfun;

mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Truncated series over `f64`.
pub type Series = series::TruncatedSeries<f64>;
/// Exponent pair over `f64`.
pub type Pair = krivine::NormPair<f64>;
/// Bound report over `f64`.
pub type Report = krivine::BoundReport<f64>;

pub use factorization::{build_certificate, solve_dual, DualSolution, FactorizationCertificate};
pub use krivine::{approx_ratio, compute_c_ab, BoundReport, NormPair};
pub use relaxation::{brute_force_norm, solve_cp, ProblemInstance, RelaxationSolution};
pub use rounding::{build_transformed_gram, sample_round, RoundedSolution, TransformedGram};
pub use series::TruncatedSeries;

/// Deterministic random stream `index` derived from a user seed.
pub fn stream_rng(seed: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
