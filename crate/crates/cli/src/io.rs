use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use reslab::export::{write_json, Provenance, Table};
use reslab::map_model::{parse_map_spec, MapSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, kind: kind.into(), message: message.into() }
    }

    pub fn from_core(e: &reslab::Error) -> Self {
        let kind = format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERIC };
        Self { code, kind, message: e.to_string() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.message, "kind": self.kind, "exit_code": self.code }).to_string()
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub struct LoadedMap {
    pub spec: MapSpec,
    pub sha256: String,
}

pub fn read_map_text(path: &Path) -> CliResult<(String, String)> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::input("NotFound", format!("map spec not found: {}", path.display())),
        _ => CliError::input("Io", format!("cannot read {}: {e}", path.display())),
    })?;
    let sha = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| CliError::input("Spec", "map spec is not UTF-8"))?;
    Ok((text, sha))
}

pub fn load_map(path: &Path) -> CliResult<LoadedMap> {
    let (text, sha256) = read_map_text(path)?;
    Ok(LoadedMap { spec: parse_map_spec(&text)?, sha256 })
}

fn sink(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    match out {
        Some(p) => {
            let f = fs::File::create(p)
                .map_err(|e| CliError::input("Io", format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(Stdout(std::io::stdout().lock()))),
    }
}

/// Stdout that treats a closed pipe (`reslab ... | head`) as a successful write.
struct Stdout(std::io::StdoutLock<'static>);

impl Write for Stdout {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self.0.write(buf) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(buf.len()),
            r => r,
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self.0.flush() {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r,
        }
    }
}

pub fn emit_json<T: Serialize>(out: &Option<PathBuf>, meta: &Provenance, data: &T) -> CliResult {
    let mut w = sink(out)?;
    write_json(&mut w, meta, data)?;
    w.flush().map_err(|e| CliError::input("Io", e.to_string()))
}

pub fn emit_table(out: &Option<PathBuf>, table: &Table) -> CliResult {
    let mut w = sink(out)?;
    table.write(&mut w)?;
    w.flush().map_err(|e| CliError::input("Io", e.to_string()))
}

#[derive(Clone, Debug)]
pub struct Range(pub Vec<f64>, pub String);

/// `a:b:n` (inclusive, `n` points) or a single number.
pub fn parse_range(s: &str) -> Result<Range, String> {
    points(s).map(|v| Range(v, s.trim().to_string()))
}

fn points(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let f = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    match parts.as_slice() {
        [v] => Ok(vec![f(v)?]),
        [a, b, n] => {
            let (a, b) = (f(a)?, f(b)?);
            let n: usize = n.trim().parse().map_err(|e| format!("'{n}': {e}"))?;
            match n {
                0 => Err("range needs at least one point".into()),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()),
            }
        }
        _ => Err(format!("expected 'a:b:n' or a number, got '{s}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0").unwrap().0, vec![0.0]);
        assert_eq!(parse_range("1:2:3").unwrap().0, vec![1.0, 1.5, 2.0]);
        assert!(parse_range("1:2").is_err());
        assert!(parse_range("1:2:0").is_err());
    }
}
