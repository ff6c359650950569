use std::path::PathBuf;

use clap::{Args, ValueEnum};
use num_complex::Complex64 as C64;
use reslab::affine_resonances::{resonance_set, topological_entropy, WeightMode};
use reslab::correlation::{correlation_sequence, CorrelationOptions, PathChoice};
use reslab::export::{self, Provenance};
use reslab::map_model::{parse_map_spec, ExprNode, MapSpec, SmoothFullBranchMap};
use reslab::monotone_mme::{cylinder_bounds, mixing_rate_check, mme_iterate, MmeOperator};
use reslab::smooth_spectral::{
    discretize_spectrum, gap_params, remark5_scan, Basis, OperatorTag, RegionSet, ScanGrid, XiFunction,
    DEFAULT_SCAN_TOL,
};
use serde::Serialize;

use crate::io::{emit_json, emit_table, load_map, parse_range, read_map_text, CliError, Range, CliResult, EXIT_INPUT};

fn p(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn pf(k: &str, v: f64) -> (String, String) {
    (k.to_string(), format!("{v:?}"))
}

fn expr(s: &str) -> CliResult<ExprNode> {
    Ok(ExprNode::parse(s)?)
}

fn smooth(spec: &MapSpec) -> CliResult<&SmoothFullBranchMap> {
    match spec {
        MapSpec::SmoothFullBranch(m) => Ok(m),
        other => Err(CliError::input("Unsupported", format!("needs a smooth_full_branch map, got {}", other.kind()))),
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct ResonancesArgs {
    #[arg(long)]
    map: PathBuf,
    /// Weight convention: srb or mme.
    #[arg(long)]
    mode: WeightMode,
    /// Polynomial degree of the observables.
    #[arg(long)]
    r: usize,
    /// Operator index; defaults to 1 for srb and 0 for mme.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn resonances(a: ResonancesArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let MapSpec::AffineMarkov(map) = &m.spec else {
        return Err(CliError::input("Unsupported", format!("needs an affine_markov map, got {}", m.spec.kind())));
    };
    let k = a.k.unwrap_or(a.mode.natural_k());
    let rep = resonance_set(map, a.mode, k, a.r)?;
    let meta = Provenance::new(m.sha256, vec![p("mode", a.mode.as_str()), p("k", k), p("r", a.r)]);
    emit_json(&a.out, &meta, &rep)
}

#[derive(Args)]
pub struct RegionsArgs {
    #[arg(long)]
    map: PathBuf,
    /// Points per boundary curve.
    #[arg(long)]
    grid: usize,
    /// Half-width of the plotted square.
    #[arg(long, default_value_t = 1.1)]
    extent: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RegionsSummary {
    params: reslab::smooth_spectral::GapParams,
    a3_intercept: f64,
    a4_intercept: f64,
    polylines: Vec<reslab::smooth_spectral::BoundaryPoint>,
}

pub fn regions(a: RegionsArgs) -> CliResult {
    if a.grid < 2 {
        return Err(CliError::input("InvalidArgument", "--grid must be at least 2"));
    }
    let m = load_map(&a.map)?;
    let regions = RegionSet::new(gap_params(smooth(&m.spec)?)?)?;
    let lines = regions.boundary_polylines(a.grid, a.extent);
    let meta = Provenance::new(m.sha256, vec![p("grid", a.grid), pf("extent", a.extent)]);
    match a.format {
        Format::Csv => emit_table(&a.out, &export::regions_table(meta, &lines)),
        Format::Json => {
            let s = RegionsSummary {
                a3_intercept: regions.a3_intercept(),
                a4_intercept: regions.a4_intercept(),
                params: regions.params.clone(),
                polylines: lines,
            };
            emit_json(&a.out, &meta, &s)
        }
    }
}

#[derive(Args)]
pub struct XiScanArgs {
    #[arg(long)]
    map: PathBuf,
    /// Real parts, `a:b:n` or a single value.
    #[arg(long, value_parser = parse_range)]
    re: Range,
    /// Imaginary parts, `a:b:n` or a single value.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    im: Range,
    /// Bound on the truncated series tail.
    #[arg(long)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn xi_scan(a: XiScanArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let map = smooth(&m.spec)?;
    let ops = reslab::smooth_spectral::SmoothOperators::refined(map)?;
    let params = reslab::smooth_spectral::gap_params_with(map, &ops)?;
    let mut xi = XiFunction::new(ops, &params)?;
    let zs: Vec<C64> = a.re.0.iter().flat_map(|&x| a.im.0.iter().map(move |&y| C64::new(x, y))).collect();
    let values = xi.scan(&zs, a.tol)?;
    let meta = Provenance::new(
        m.sha256,
        vec![p("re", &a.re.1), p("im", &a.im.1), pf("tol", a.tol)],
    );
    emit_table(&a.out, &export::xi_table(meta, &values))
}

#[derive(Args)]
pub struct ScanArgs {
    #[arg(long)]
    map: PathBuf,
    /// Chebyshev order per branch.
    #[arg(long)]
    order: usize,
    #[arg(long)]
    n_r: usize,
    #[arg(long)]
    n_theta: usize,
    /// Inner radius; defaults to just above 1/λ.
    #[arg(long)]
    r_min: Option<f64>,
    /// Outer radius; defaults to just below 1.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SCAN_TOL)]
    tol: f64,
    /// Grid values as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Candidates and drift summary as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn scan(a: ScanArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let map = m.spec.as_branch_map();
    let mut grid = ScanGrid::annulus(reslab::smooth_spectral::min_expansion(map), a.n_r, a.n_theta);
    if let Some(r) = a.r_min {
        grid.r_min = r;
    }
    if let Some(r) = a.r_max {
        grid.r_max = r;
    }
    let res = remark5_scan(map, grid, a.order, a.tol)?;
    let meta = Provenance::new(
        m.sha256,
        vec![
            p("order", a.order),
            p("n_r", a.n_r),
            p("n_theta", a.n_theta),
            pf("r_min", grid.r_min),
            pf("r_max", grid.r_max),
            pf("tol", a.tol),
        ],
    );
    if a.summary.is_some() {
        let mut s = res.clone();
        s.points.clear();
        emit_json(&a.summary, &meta, &s)?;
    }
    emit_table(&a.out, &export::scan_table(meta, &res.points))
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PathArg {
    Auto,
    Exact,
    Quadrature,
}

#[derive(Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    phi: String,
    #[arg(long, allow_hyphen_values = true)]
    psi: String,
    /// srb or mme.
    #[arg(long)]
    measure: WeightMode,
    /// Largest n.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PathArg::Auto)]
    path: PathArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit and predicted resonance as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn correlate(a: CorrelateArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let opts = CorrelationOptions {
        n_max: a.n,
        path: match a.path {
            PathArg::Auto => PathChoice::Auto,
            PathArg::Exact => PathChoice::Exact,
            PathArg::Quadrature => PathChoice::Quadrature,
        },
        ..Default::default()
    };
    let trace = correlation_sequence(&m.spec, &expr(&a.phi)?, &expr(&a.psi)?, a.measure, &opts)?;
    let meta = Provenance::new(
        m.sha256,
        vec![p("phi", &a.phi), p("psi", &a.psi), p("measure", a.measure.as_str()), p("n", a.n)],
    );
    if a.summary.is_some() {
        emit_json(&a.summary, &meta, &trace)?;
    }
    emit_table(&a.out, &export::correlation_table(meta, &trace))
}

#[derive(Args)]
pub struct MmeArgs {
    #[arg(long)]
    map: PathBuf,
    /// Observable; repeat for several.
    #[arg(long, required = true, allow_hyphen_values = true)]
    phi: Vec<String>,
    /// Largest iteration count (at most 80).
    #[arg(long)]
    n_max: usize,
    /// Observable `h` of the mixing check.
    #[arg(long, requires = "mixing_phi", allow_hyphen_values = true)]
    mixing_h: Option<String>,
    /// Observable `φ` of the mixing check.
    #[arg(long, requires = "mixing_h", allow_hyphen_values = true)]
    mixing_phi: Option<String>,
    /// Cylinder length for the `μ(p) <= 3 N^{-n}` check.
    #[arg(long)]
    cylinders: Option<usize>,
    #[arg(long, default_value_t = 20)]
    cylinder_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// History as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence flags and checks as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct MmeSummary {
    n: usize,
    converged: bool,
    observables: Vec<String>,
    values: Vec<f64>,
    mixing: Option<reslab::monotone_mme::MixingCheck>,
    cylinders: Option<Vec<reslab::monotone_mme::CylinderSample>>,
}

pub fn mme(a: MmeArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let op = MmeOperator::new(m.spec.as_branch_map())?;
    let exprs = a.phi.iter().map(|s| expr(s)).collect::<CliResult<Vec<_>>>()?;
    let fns: Vec<Box<dyn Fn(f64) -> f64 + Sync>> =
        exprs.iter().map(|e| Box::new(move |x| e.eval(x)) as Box<dyn Fn(f64) -> f64 + Sync>).collect();
    let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = fns.iter().map(|f| f.as_ref()).collect();
    let approx = mme_iterate(&op, &refs, a.n_max)?;
    let mut params = vec![p("n_max", a.n_max)];
    params.extend(a.phi.iter().map(|s| p("phi", s)));
    let mixing = match (&a.mixing_h, &a.mixing_phi) {
        (Some(h), Some(f)) => {
            params.push(p("mixing_h", h));
            params.push(p("mixing_phi", f));
            let (h, f) = (expr(h)?, expr(f)?);
            Some(mixing_rate_check(&op, |x| h.eval(x), |x| f.eval(x), a.n_max)?)
        }
        _ => None,
    };
    let cylinders = match a.cylinders {
        Some(n) => {
            params.push(p("cylinders", n));
            params.push(p("cylinder_count", a.cylinder_count));
            params.push(p("seed", a.seed));
            Some(cylinder_bounds(&op, n, a.cylinder_count, a.seed)?)
        }
        None => None,
    };
    let meta = Provenance::new(m.sha256, params);
    if a.summary.is_some() {
        let s = MmeSummary {
            n: approx.n,
            converged: approx.converged,
            observables: a.phi.clone(),
            values: approx.values.clone(),
            mixing,
            cylinders,
        };
        emit_json(&a.summary, &meta, &s)?;
    }
    emit_table(&a.out, &export::mme_table(meta, &a.phi, &approx))
}

#[derive(Args)]
pub struct EntropyArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FullBranchEntropy {
    h_top: f64,
    branches: usize,
    method: &'static str,
}

pub fn entropy(a: EntropyArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let meta = Provenance::new(m.sha256, Vec::new());
    match &m.spec {
        MapSpec::AffineMarkov(map) => emit_json(&a.out, &meta, &topological_entropy(map)?),
        other => {
            let n = other.as_branch_map().n_branches();
            emit_json(&a.out, &meta, &FullBranchEntropy { h_top: (n as f64).ln(), branches: n, method: "full_branch_log_n" })
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BasisArg {
    Ulam,
    Chebyshev,
}

#[derive(Args)]
pub struct DiscretizeArgs {
    #[arg(long)]
    map: PathBuf,
    /// l0..l3, star, plus or compact.
    #[arg(long)]
    op: OperatorTag,
    #[arg(long, value_enum)]
    basis: BasisArg,
    /// Chebyshev order per panel.
    #[arg(long, required_if_eq("basis", "chebyshev"))]
    order: Option<usize>,
    /// Number of cells (Ulam) or approximate number of nodes (Chebyshev).
    #[arg(long)]
    size: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn discretize(a: DiscretizeArgs) -> CliResult {
    let m = load_map(&a.map)?;
    let basis = match a.basis {
        BasisArg::Ulam => Basis::Ulam,
        BasisArg::Chebyshev => Basis::Chebyshev { order: a.order.unwrap_or(0) },
    };
    let s = discretize_spectrum(m.spec.as_branch_map(), a.op, basis, a.size)?;
    let mut params = vec![p("op", a.op.as_string()), p("size", a.size)];
    match basis {
        Basis::Ulam => params.push(p("basis", "ulam")),
        Basis::Chebyshev { order } => {
            params.push(p("basis", "chebyshev"));
            params.push(p("order", order));
        }
    }
    emit_json(&a.out, &Provenance::new(m.sha256, params), &s)
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ValidationOutput {
    kind: Option<&'static str>,
    passed: bool,
    report: reslab::map_model::ValidationReport,
}

pub fn validate(a: ValidateArgs) -> CliResult {
    let (text, sha) = read_map_text(&a.map)?;
    let meta = Provenance::new(sha, Vec::new());
    match parse_map_spec(&text) {
        Ok(spec) => {
            let report = spec.validate();
            let passed = report.passed();
            emit_json(&a.out, &meta, &ValidationOutput { kind: Some(spec.kind()), passed, report })?;
            if passed {
                Ok(())
            } else {
                Err(CliError::input("Validation", "map validation failed"))
            }
        }
        Err(reslab::Error::Validation(report)) => {
            let summary = report.summary();
            emit_json(&a.out, &meta, &ValidationOutput { kind: None, passed: false, report: *report })?;
            Err(CliError { code: EXIT_INPUT, kind: "Validation".into(), message: format!("map validation failed: {summary}") })
        }
        Err(e) => Err(e.into()),
    }
}
