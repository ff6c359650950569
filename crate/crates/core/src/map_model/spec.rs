//! JSON map specifications.

use serde::Deserialize;
use serde_json::Value;

use super::{
    BranchMap, ExprNode, MarkovAffineMap, MonotoneFullBranchMap, SmoothFullBranchMap, ValidationReport,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(rename = "type")]
    kind: String,
    partition: Vec<Value>,
    branches: Vec<RawBranch>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    slope: Option<Value>,
    offset: Option<Value>,
    expr: Option<String>,
}

/// A parsed and validated map of one of the three supported classes.
#[derive(Clone, Debug)]
pub enum MapSpec {
    AffineMarkov(MarkovAffineMap<f64>),
    SmoothFullBranch(SmoothFullBranchMap),
    MonotoneFullBranch(MonotoneFullBranchMap),
}

impl MapSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MapSpec::AffineMarkov(_) => "affine_markov",
            MapSpec::SmoothFullBranch(_) => "smooth_full_branch",
            MapSpec::MonotoneFullBranch(_) => "monotone_full_branch",
        }
    }

    pub fn as_branch_map(&self) -> &dyn BranchMap {
        match self {
            MapSpec::AffineMarkov(m) => m,
            MapSpec::SmoothFullBranch(m) => m,
            MapSpec::MonotoneFullBranch(m) => m,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            MapSpec::AffineMarkov(m) => m.validate(),
            MapSpec::SmoothFullBranch(m) => m.validate(),
            MapSpec::MonotoneFullBranch(m) => m.validate(),
        }
    }
}

fn scalar_of<T: Scalar>(v: &Value, what: &str) -> Result<T> {
    let parsed = match v {
        Value::Number(n) => n.as_f64().and_then(|f| T::parse_literal(&format!("{f:?}"))),
        Value::String(s) => T::parse_literal(s),
        _ => None,
    };
    parsed.ok_or_else(|| Error::Spec(format!("{what}: expected a number or 'p/q' string, got {v}")))
}

fn raw(text: &str) -> Result<RawSpec> {
    serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
}

fn partition_of<T: Scalar>(raw: &RawSpec) -> Result<Vec<T>> {
    raw.partition.iter().map(|v| scalar_of(v, "partition")).collect()
}

/// Slope/offset pairs from `{slope, offset}` entries or affine expressions.
fn affine_branches<T: Scalar>(raw: &RawSpec) -> Result<(Vec<T>, Vec<T>)> {
    let mut slopes = Vec::new();
    let mut offsets = Vec::new();
    for (j, b) in raw.branches.iter().enumerate() {
        match (&b.slope, &b.offset, &b.expr) {
            (Some(s), Some(o), None) => {
                slopes.push(scalar_of(s, "slope")?);
                offsets.push(scalar_of(o, "offset")?);
            }
            (None, None, Some(e)) => {
                let e = ExprNode::parse(e)?;
                if e.differentiate().differentiate() != ExprNode::constant(0.0) {
                    return Err(Error::Spec(format!("branch {j}: expression is not affine")));
                }
                let zero = T::zero();
                let one = T::one();
                let (f0, f1) = match (e.eval_exact(&zero), e.eval_exact(&one)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::Spec(format!("branch {j}: expression is not affine"))),
                };
                slopes.push(f1 - f0.clone());
                offsets.push(f0);
            }
            _ => {
                return Err(Error::Spec(format!(
                    "branch {j}: give either slope and offset, or expr"
                )))
            }
        }
    }
    Ok((slopes, offsets))
}

fn expr_branches(raw: &RawSpec) -> Result<Vec<ExprNode>> {
    raw.branches
        .iter()
        .enumerate()
        .map(|(j, b)| match (&b.slope, &b.offset, &b.expr) {
            (None, None, Some(e)) => ExprNode::parse(e),
            (Some(s), Some(o), None) => {
                Ok(ExprNode::affine(scalar_of::<f64>(s, "slope")?, scalar_of::<f64>(o, "offset")?))
            }
            _ => Err(Error::Spec(format!("branch {j}: give either slope and offset, or expr"))),
        })
        .collect()
}

/// Parses and validates a JSON map definition.
pub fn parse_map_spec(text: &str) -> Result<MapSpec> {
    let raw = raw(text)?;
    match raw.kind.as_str() {
        "affine_markov" => Ok(MapSpec::AffineMarkov(build_affine(&raw)?)),
        "smooth_full_branch" => {
            let knots = partition_of::<f64>(&raw)?;
            Ok(MapSpec::SmoothFullBranch(SmoothFullBranchMap::new(knots, expr_branches(&raw)?)?))
        }
        "monotone_full_branch" => {
            let knots = partition_of::<f64>(&raw)?;
            Ok(MapSpec::MonotoneFullBranch(MonotoneFullBranchMap::new(knots, expr_branches(&raw)?)?))
        }
        other => Err(Error::Spec(format!(
            "unknown map type '{other}' (expected affine_markov, smooth_full_branch or monotone_full_branch)"
        ))),
    }
}

/// Parses an `affine_markov` spec over any scalar type, e.g. exact rationals.
pub fn parse_affine_spec<T: Scalar>(text: &str) -> Result<MarkovAffineMap<T>> {
    let raw = raw(text)?;
    if raw.kind != "affine_markov" {
        return Err(Error::Spec(format!("expected an affine_markov map, got '{}'", raw.kind)));
    }
    build_affine(&raw)
}

fn build_affine<T: Scalar>(raw: &RawSpec) -> Result<MarkovAffineMap<T>> {
    let partition = partition_of::<T>(raw)?;
    let (slopes, offsets) = affine_branches::<T>(raw)?;
    MarkovAffineMap::new(partition, slopes, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use crate::scalar::Rational;

    #[test]
    fn jordan_spec_matches_catalog() {
        let m = parse_affine_spec::<Rational>(catalog::json::JORDAN).unwrap();
        assert_eq!(m, catalog::jordan_map::<Rational>());
        assert!(matches!(parse_map_spec(catalog::json::JORDAN).unwrap(), MapSpec::AffineMarkov(_)));
    }

    #[test]
    fn quadratic_spec() {
        let m = parse_map_spec(catalog::json::QUADRATIC).unwrap();
        assert_eq!(m.kind(), "smooth_full_branch");
        assert_eq!(m.as_branch_map().n_branches(), 3);
    }

    #[test]
    fn branch_count_and_expansion_reported_together() {
        let text = r#"{"type":"affine_markov","partition":[0,0.5,1],"branches":[{"slope":0.5,"offset":0}]}"#;
        match parse_map_spec(text).unwrap_err() {
            Error::Validation(r) => {
                let failed: Vec<&str> = r.failures().map(|c| c.name.as_str()).collect();
                assert_eq!(failed, vec!["branch_count", "expansion"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn affine_expressions_normalised() {
        let text = r#"{"type":"affine_markov","partition":[0,"1/2",1],"branches":[{"expr":"2*x"},{"expr":"2*x - 1"}]}"#;
        let m = parse_affine_spec::<Rational>(text).unwrap();
        assert_eq!(m, catalog::doubling_map::<Rational>());
        let bad = r#"{"type":"affine_markov","partition":[0,1],"branches":[{"expr":"x^2"}]}"#;
        assert!(matches!(parse_map_spec(bad), Err(Error::Spec(_))));
    }

    #[test]
    fn input_errors() {
        assert!(matches!(parse_map_spec("{"), Err(Error::Spec(_))));
        let unknown = r#"{"type":"affine_markov","partition":[0,1],"branches":[{"slope":2,"offset":0}],"colour":1}"#;
        assert!(matches!(parse_map_spec(unknown), Err(Error::Spec(m)) if m.contains("unknown field")));
        let unsorted = r#"{"type":"affine_markov","partition":[0,0.75,0.5,1],"branches":[{"slope":2,"offset":0},{"slope":2,"offset":0},{"slope":2,"offset":0}]}"#;
        assert!(matches!(parse_map_spec(unsorted), Err(Error::Validation(r)) if !r.get("partition_sorted").unwrap().passed));
        let syntax = r#"{"type":"smooth_full_branch","partition":[0,1],"branches":[{"expr":"2*x +"}]}"#;
        assert!(matches!(parse_map_spec(syntax), Err(Error::Syntax { pos: 5, .. })));
    }
}
