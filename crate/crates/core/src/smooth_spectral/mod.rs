//! Smooth full-branch expanding maps: transfer operators on panel grids, the
//! spectral-gap parameters, the exclusion regions `A_0..A_4`, the function
//! `Ξ(z)`, finite-rank spectra, and an eigenvalue scan over an annulus.

mod discretize;
mod operators;
mod params;
mod regions;
mod scan;
mod xi;

pub use discretize::{discretize, discretize_spectrum, Basis, DiscreteSpectrum, DRIFT_TOL, MAX_BASIS};
pub use operators::{transfer_at, OperatorTag, SmoothOperators, CONSERVATION_TOL, GRID_ORDER};
pub use params::{alpha_diagnostic, gap_params, gap_params_with, GapParams};
pub use regions::{BoundaryPoint, Membership, RegionSet, MU2_MARGIN};
pub use scan::{
    min_expansion, remark5_scan, Candidate, Formulation, ScanGrid, ScanOperator, ScanPoint, ScanResult,
    DEFAULT_SCAN_TOL,
};
pub use xi::{XiFunction, XiValue, MAX_TERMS};

use crate::error::Result;
use crate::map_model::SmoothFullBranchMap;

/// Exclusion regions of a map satisfying the region hypotheses.
pub fn exclusion_regions(map: &SmoothFullBranchMap) -> Result<RegionSet> {
    RegionSet::new(gap_params(map)?)
}
