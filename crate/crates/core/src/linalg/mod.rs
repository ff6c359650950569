//! Linear algebra: generic dense matrices, float spectra, Perron vectors.

mod matrix;
mod perron;
mod sparse;
mod spectrum;

pub use matrix::{jordan_sizes_from_nullities, poly_mul, Matrix};
pub use sparse::Csr;
pub use perron::{is_irreducible, perron_left, perron_right, PerronPair};
pub use spectrum::{
    eigen_decomposition, eigenvalues, order_key, sort_eigenvalues, spectrum_with_multiplicity, ComplexLu, EigenEntry,
    SpectrumOptions, SpectrumReport,
};
