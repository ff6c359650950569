//! Ruelle-Pollicott resonances of transfer operators for one-dimensional maps.
//!
//! The affine machinery is generic over [`Scalar`] so the same code runs in
//! floating point and in exact rational arithmetic; [`AffineMap`] and
//! [`ExactAffineMap`] are the two instantiations used in practice.

pub mod affine_resonances;
pub mod correlation;
pub mod error;
pub mod export;
pub mod linalg;
pub mod map_model;
pub mod monotone_mme;
pub mod quadrature;
pub mod scalar;
pub mod smooth_spectral;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

pub type AffineMap = map_model::MarkovAffineMap<f64>;
pub type ExactAffineMap = map_model::MarkovAffineMap<Rational>;
pub type Complex = num_complex::Complex64;

/// Caps rayon's global pool at `RESLAB_THREADS` when set; returns the value applied.
pub fn init_threads_from_env() -> Option<usize> {
    let n = std::env::var("RESLAB_THREADS").ok()?.parse::<usize>().ok()?;
    if n == 0 {
        return None;
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok()?;
    Some(n)
}
