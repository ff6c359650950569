use serde::{Deserialize, Serialize};

/// One named check with its measured value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Location of the worst violation (or of the tightest margin).
    pub worst_point: Option<f64>,
    pub measured: f64,
    pub detail: String,
}

/// Outcome of every invariant check on a map; failures are data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn push(
        &mut self,
        name: &str,
        passed: bool,
        worst_point: Option<f64>,
        measured: f64,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check { name: name.to_string(), passed, worst_point, measured, detail: detail.into() });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .failures()
            .map(|c| match c.worst_point {
                Some(x) => format!("{} (measured {} at x={}): {}", c.name, c.measured, x, c.detail),
                None => format!("{} (measured {}): {}", c.name, c.measured, c.detail),
            })
            .collect();
        if failed.is_empty() {
            "all checks passed".to_string()
        } else {
            failed.join("; ")
        }
    }

    pub(crate) fn into_result<T>(self, value: impl FnOnce() -> T) -> crate::Result<T> {
        if self.passed() {
            Ok(value())
        } else {
            Err(crate::Error::Validation(Box::new(self)))
        }
    }
}

/// `n` cell midpoints of `[a, b]`.
pub(crate) fn sample_points(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * (i as f64 + 0.5) / n as f64)
}
