//! Machine-readable reports (`"schema": "qcurv-report/1"`).

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;

pub const SCHEMA: &str = "qcurv-report/1";

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// A closed form stated in the literature.
    ClosedForm,
    /// Holds by construction (homogeneity, inverse pairs, zero inputs).
    Identity,
    /// An independent computation of the same quantity.
    CrossCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Exact,
    Abs,
    Rel,
    /// `computed ≤ expected + tolerance`.
    UpperBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub inputs: Value,
    pub expected: Value,
    pub source: Source,
    pub computed: Value,
    pub tolerance: f64,
    pub tolerance_kind: Tolerance,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl Check {
    /// Exact equality of two printed values (rationals, polynomials, flags).
    pub fn exact(id: impl Into<String>, inputs: Value, expected: impl Into<Value>, computed: impl Into<Value>, source: Source) -> Self {
        let (expected, computed) = (expected.into(), computed.into());
        let pass = expected == computed;
        Check { id: id.into(), inputs, expected, source, computed, tolerance: 0.0, tolerance_kind: Tolerance::Exact, pass, wall_time_ms: None }
    }

    pub fn flag(id: impl Into<String>, inputs: Value, ok: bool, source: Source) -> Self {
        Self::exact(id, inputs, true, ok, source)
    }

    pub fn rel(id: impl Into<String>, inputs: Value, expected: f64, computed: f64, tol: f64, source: Source) -> Self {
        let err = if expected == 0.0 { computed.abs() } else { (computed / expected - 1.0).abs() };
        let pass = err <= tol;
        Check {
            id: id.into(),
            inputs,
            expected: num(expected),
            source,
            computed: num(computed),
            tolerance: tol,
            tolerance_kind: Tolerance::Rel,
            pass,
            wall_time_ms: None,
        }
    }

    pub fn abs(id: impl Into<String>, inputs: Value, expected: f64, computed: f64, tol: f64, source: Source) -> Self {
        let pass = (computed - expected).abs() <= tol;
        Check {
            id: id.into(),
            inputs,
            expected: num(expected),
            source,
            computed: num(computed),
            tolerance: tol,
            tolerance_kind: Tolerance::Abs,
            pass,
            wall_time_ms: None,
        }
    }

    pub fn upper(id: impl Into<String>, inputs: Value, bound: f64, computed: f64, tol: f64, source: Source) -> Self {
        let pass = computed <= bound + tol;
        Check {
            id: id.into(),
            inputs,
            expected: num(bound),
            source,
            computed: num(computed),
            tolerance: tol,
            tolerance_kind: Tolerance::UpperBound,
            pass,
            wall_time_ms: None,
        }
    }

    pub fn timed(mut self, ms: Option<f64>) -> Self {
        self.wall_time_ms = ms;
        self
    }
}

/// JSON number, or a string for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// A plain table, rendered as CSV or LaTeX on request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub data: Value,
    /// Rendered for `--format csv|latex`; the JSON form keeps rows in `data`.
    #[serde(skip)]
    pub table: Option<Table>,
    /// Only set on request, so default reports stay byte-stable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        Report { schema: SCHEMA, command: command.into(), config, pass: true, checks: Vec::new(), data: json!({}), table: None, wall_time_ms: None }
    }

    pub fn push(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        for c in cs {
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    fn table_or_checks(&self) -> Table {
        if let Some(t) = &self.table {
            return t.clone();
        }
        let cell = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        Table {
            columns: ["id", "expected", "computed", "tolerance", "kind", "pass"].map(String::from).to_vec(),
            rows: self
                .checks
                .iter()
                .map(|c| {
                    vec![
                        c.id.clone(),
                        cell(&c.expected),
                        cell(&c.computed),
                        format!("{:e}", c.tolerance),
                        cell(&serde_json::to_value(c.tolerance_kind).unwrap()),
                        c.pass.to_string(),
                    ]
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let t = self.table_or_checks();
        let quote = |s: &String| if s.contains([',', '"', '\n']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.clone() };
        let mut out = t.columns.iter().map(quote).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in &t.rows {
            out.push_str(&r.iter().map(quote).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_latex(&self) -> String {
        let t = self.table_or_checks();
        let esc = |s: &String| s.replace('_', "\\_").replace('%', "\\%").replace('&', "\\&").replace('#', "\\#");
        let mut out = format!("\\begin{{tabular}}{{{}}}\n\\hline\n", "l".repeat(t.columns.len()));
        out.push_str(&t.columns.iter().map(esc).collect::<Vec<_>>().join(" & "));
        out.push_str(" \\\\\n\\hline\n");
        for r in &t.rows {
            out.push_str(&r.iter().map(esc).collect::<Vec<_>>().join(" & "));
            out.push_str(" \\\\\n");
        }
        out.push_str("\\hline\n\\end{tabular}\n");
        out
    }
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_aggregates() {
        let mut r = Report::new("x", json!({}));
        r.push(Check::rel("a", json!({}), 1.0, 1.0 + 1e-12, 1e-10, Source::Identity));
        assert!(r.pass);
        r.push(Check::abs("b", json!({}), 0.0, 1e-3, 1e-6, Source::Identity));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        assert!(r.to_csv().lines().count() == 3);
        assert!(r.to_json().contains("qcurv-report/1"));
    }
}
