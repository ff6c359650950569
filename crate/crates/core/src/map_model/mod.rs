//! Interval-map definitions: parsing, validation, evaluation.

mod affine;
mod branch;
pub mod catalog;
mod expr;
mod smooth;
mod spec;
mod validation;

pub use affine::MarkovAffineMap;
pub use branch::BranchMap;
pub use expr::{BinOp, ExprNode, Func};
pub use smooth::{BranchExprs, ExprMap, MonotoneFullBranchMap, SmoothFullBranchMap};
pub use spec::{parse_affine_spec, parse_map_spec, MapSpec};
pub use validation::{Check, ValidationReport};

/// Validates any supported map.
pub fn validate_map(map: &MapSpec) -> ValidationReport {
    map.validate()
}

/// `g_j(y)` for any supported map.
pub fn branch_inverse(map: &dyn BranchMap, j: usize, y: f64) -> crate::Result<f64> {
    map.inverse(j, y)
}
