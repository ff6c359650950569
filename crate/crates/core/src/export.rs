//! CSV and JSON output files.
//!
//! Every CSV starts with one `#` line naming the tool version, the SHA-256 of
//! the map spec, and the run parameters; JSON files carry the same data under
//! `meta`, with the payload under `data`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationTrace;
use crate::error::{Error, Result};
use crate::monotone_mme::MmeApproximation;
use crate::smooth_spectral::{BoundaryPoint, ScanPoint, XiValue};

pub const TOOL: &str = "reslab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub map_sha256: String,
    /// In the order given on the command line.
    pub params: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(map_sha256: impl Into<String>, params: Vec<(String, String)>) -> Self {
        Self { tool: TOOL.into(), version: VERSION.into(), map_sha256: map_sha256.into(), params }
    }

    /// `# reslab <version> map=<sha256> key=value ...`
    pub fn comment_line(&self) -> String {
        let mut s = format!("# {} {} map={}", self.tool, self.version, self.map_sha256);
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={}", v.replace(char::is_whitespace, "")));
        }
        s
    }

    pub fn parse_comment(line: &str) -> Result<Self> {
        let mut it = line.strip_prefix("# ").ok_or_else(|| bad("header must start with '# '"))?.split(' ');
        let tool = it.next().ok_or_else(|| bad("missing tool"))?.to_string();
        let version = it.next().ok_or_else(|| bad("missing version"))?.to_string();
        let map_sha256 = it
            .next()
            .and_then(|s| s.strip_prefix("map="))
            .ok_or_else(|| bad("missing map hash"))?
            .to_string();
        let params = it
            .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| bad(kv)))
            .collect::<Result<_>>()?;
        Ok(Self { tool, version, map_sha256, params })
    }
}

fn bad(msg: &str) -> Error {
    Error::Spec(format!("malformed output header: {msg}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Spec(format!("csv: {e}"))
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    meta: Provenance,
    data: T,
}

pub fn write_json<T: Serialize>(out: &mut impl Write, meta: &Provenance, data: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &Envelope { meta: meta.clone(), data })
        .map_err(|e| Error::Spec(format!("json: {e}")))?;
    writeln!(out).map_err(io)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<(Provenance, T)> {
    let e: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Spec(format!("json: {e}")))?;
    Ok((e.meta, e.data))
}

fn io(e: std::io::Error) -> Error {
    Error::Spec(format!("write failed: {e}"))
}

/// A CSV table with its header comment.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub meta: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: Provenance, columns: &[&str]) -> Self {
        Self { meta, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{}", self.meta.comment_line()).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }

    pub fn read(text: &str) -> Result<Self> {
        let mut lines = text.as_bytes();
        let mut first = String::new();
        lines.read_line(&mut first).map_err(io)?;
        let meta = Provenance::parse_comment(first.trim_end())?;
        let mut r = csv::Reader::from_reader(lines);
        let columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(csv_err))
            .collect::<Result<Vec<Vec<String>>>>()?;
        if rows.is_empty() {
            return Err(Error::Spec("no data rows".into()));
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Spec(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| Error::Spec(format!("column '{name}': {e}"))))
            .collect()
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn regions_table(meta: Provenance, points: &[BoundaryPoint]) -> Table {
    let mut t = Table::new(meta, &["region", "a", "b"]);
    for p in points {
        t.push(vec![p.region.clone(), num(p.a), num(p.b)]);
    }
    t
}

pub fn xi_table(meta: Provenance, values: &[XiValue]) -> Table {
    let mut t = Table::new(meta, &["re", "im", "xi_re", "xi_im", "tail_bound"]);
    for v in values {
        t.push(vec![num(v.z.re), num(v.z.im), num(v.xi.re), num(v.xi.im), num(v.tail_bound)]);
    }
    t
}

pub fn scan_table(meta: Provenance, points: &[ScanPoint]) -> Table {
    let mut t = Table::new(meta, &["nu_re", "nu_im", "test_eig_distance", "drift"]);
    for p in points {
        t.push(vec![num(p.nu.re), num(p.nu.im), num(p.distance), num(p.drift)]);
    }
    t
}

/// `C` is the raw correlation, `abs` and `centered_*` refer to `C(n) - μ(φ)μ(ψ)`;
/// `predicted_bound` is empty without a predicted resonance.
pub fn correlation_table(meta: Provenance, trace: &CorrelationTrace) -> Table {
    let mut t = Table::new(meta, &["n", "C_re", "C_im", "abs", "predicted_bound", "centered_re", "centered_im"]);
    for (n, (c, d)) in trace.raw.iter().zip(&trace.centered).enumerate() {
        let bound = trace.predicted_bound(n).map(num).unwrap_or_default();
        t.push(vec![n.to_string(), num(c.re), num(c.im), num(d.norm()), bound, num(d.re), num(d.im)]);
    }
    t
}

/// One column per observable, headed by its expression.
pub fn mme_table(meta: Provenance, observables: &[String], approx: &MmeApproximation) -> Table {
    let mut cols = vec!["n"];
    cols.extend(observables.iter().map(String::as_str));
    let mut t = Table::new(meta, &cols);
    for (n, row) in approx.history.iter().enumerate() {
        let mut r = vec![n.to_string()];
        r.extend(row.iter().map(|v| num(*v)));
        t.push(r);
    }
    t
}
