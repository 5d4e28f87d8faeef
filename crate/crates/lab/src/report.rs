//! Machine-readable experiment reports.
//!
//! Every experiment produces one [`ExperimentReport`]: the configuration it
//! ran with, the seed, and a list of [`Check`] rows, each carrying an
//! observed value, its acceptance band, and a pass flag. Serialization is
//! JSON with a versioned schema. Reports are deterministic given seed and
//! configuration; the wall-clock field and the worker count are excluded
//! from that contract and [`ExperimentReport::determinism_key`] strips both.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

/// One verified quantity inside a report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Short stable identifier, unique within the report.
    pub id: String,
    /// Acceptance criterion this row enforces, e.g. "AC6", or "aux" for
    /// supporting diagnostics.
    pub criterion: String,
    /// Human-readable statement of what is being checked.
    pub description: String,
    /// The measured value.
    pub observed: f64,
    /// Lower edge of the acceptance band, if bounded below.
    pub lo: Option<f64>,
    /// Upper edge of the acceptance band, if bounded above.
    pub hi: Option<f64>,
    /// Whether `observed` lies inside the band.
    pub pass: bool,
    /// Supporting numbers (targets, stderrs, sample sizes).
    pub detail: BTreeMap<String, f64>,
}

impl Check {
    /// Builds a row checking `observed` against a closed band.
    pub fn band(
        id: &str,
        criterion: &str,
        description: &str,
        observed: f64,
        lo: f64,
        hi: f64,
    ) -> Self {
        Check {
            id: id.to_owned(),
            criterion: criterion.to_owned(),
            description: description.to_owned(),
            observed,
            lo: Some(lo),
            hi: Some(hi),
            pass: observed.is_finite() && lo <= observed && observed <= hi,
            detail: BTreeMap::new(),
        }
    }

    /// Builds a row checking `observed >= lo` (typically a p-value floor).
    pub fn at_least(id: &str, criterion: &str, description: &str, observed: f64, lo: f64) -> Self {
        Check {
            id: id.to_owned(),
            criterion: criterion.to_owned(),
            description: description.to_owned(),
            observed,
            lo: Some(lo),
            hi: None,
            pass: observed.is_finite() && observed >= lo,
            detail: BTreeMap::new(),
        }
    }

    /// Builds a row checking `observed <= hi` (typically a residual cap).
    pub fn at_most(id: &str, criterion: &str, description: &str, observed: f64, hi: f64) -> Self {
        Check {
            id: id.to_owned(),
            criterion: criterion.to_owned(),
            description: description.to_owned(),
            observed,
            lo: None,
            hi: Some(hi),
            pass: observed.is_finite() && observed <= hi,
            detail: BTreeMap::new(),
        }
    }

    /// Builds a row from an externally evaluated condition.
    pub fn flag(id: &str, criterion: &str, description: &str, observed: f64, pass: bool) -> Self {
        Check {
            id: id.to_owned(),
            criterion: criterion.to_owned(),
            description: description.to_owned(),
            observed,
            lo: None,
            hi: None,
            pass,
            detail: BTreeMap::new(),
        }
    }

    /// Attaches a named supporting number and returns the row.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.detail.insert(key.to_owned(), value);
        self
    }
}

/// Full outcome of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    /// Report schema version.
    pub schema: u32,
    /// Experiment name, matching the CLI subcommand.
    pub name: String,
    /// Every configuration knob the run used, defaults included.
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// Master seed all replica streams derive from.
    pub master_seed: u64,
    /// Wall-clock duration of the run in milliseconds. Excluded from the
    /// determinism contract.
    pub wall_ms: u64,
    /// Individual check rows.
    pub checks: Vec<Check>,
    /// Conjunction of all check rows.
    pub pass: bool,
}

impl ExperimentReport {
    /// Starts an empty report for `name`.
    pub fn new(name: &str, master_seed: u64) -> Self {
        ExperimentReport {
            schema: 1,
            name: name.to_owned(),
            parameters: BTreeMap::new(),
            master_seed,
            wall_ms: 0,
            checks: Vec::new(),
            pass: true,
        }
    }

    /// Records a configuration value for provenance.
    pub fn param(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.parameters.insert(key.to_owned(), value.into());
    }

    /// Appends a check row and folds its flag into the report verdict.
    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Stamps the wall-clock duration measured from `start`.
    pub fn finish(&mut self, start: Instant) {
        self.wall_ms = start.elapsed().as_millis() as u64;
    }

    /// Pretty JSON rendering of the report.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serializable data")
    }

    /// JSON rendering with the execution-only fields masked (wall clock
    /// zeroed, worker count dropped), suitable for byte-comparing two runs
    /// of the same configuration regardless of parallelism.
    pub fn determinism_key(&self) -> String {
        let mut copy = self.clone();
        copy.wall_ms = 0;
        copy.parameters.remove("workers");
        copy.to_json()
    }

    /// One-line summary per check plus a verdict, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let band = match (c.lo, c.hi) {
                (Some(lo), Some(hi)) => format!("[{lo:.4e}, {hi:.4e}]"),
                (Some(lo), None) => format!(">= {lo:.4e}"),
                (None, Some(hi)) => format!("<= {hi:.4e}"),
                (None, None) => String::from("(condition)"),
            };
            out.push_str(&format!(
                "{} {:<28} {:>14.6e} in {} [{}]\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.id,
                c.observed,
                band,
                c.criterion
            ));
        }
        out.push_str(&format!(
            "{}: {}\n",
            self.name,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// A plot-ready CSV table with a mandatory header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    /// Comma-separated column names.
    pub header: String,
    /// Data rows, already formatted.
    pub rows: Vec<String>,
}

impl CsvTable {
    /// Builds a table from a header line.
    pub fn new(header: &str) -> Self {
        CsvTable {
            header: header.to_owned(),
            rows: Vec::new(),
        }
    }

    /// Renders the full file contents.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(16 * (self.rows.len() + 1));
        out.push_str(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_and_flags_set_pass() {
        assert!(Check::band("a", "aux", "", 0.5, 0.0, 1.0).pass);
        assert!(!Check::band("a", "aux", "", 1.5, 0.0, 1.0).pass);
        assert!(!Check::band("a", "aux", "", f64::NAN, 0.0, 1.0).pass);
        assert!(Check::at_least("p", "aux", "", 0.2, 1e-3).pass);
        assert!(!Check::at_least("p", "aux", "", 1e-4, 1e-3).pass);
        assert!(Check::at_most("r", "aux", "", 1e-12, 1e-10).pass);
    }

    #[test]
    fn report_verdict_is_conjunction() {
        let mut rep = ExperimentReport::new("demo", 42);
        rep.push(Check::band("ok", "aux", "", 0.5, 0.0, 1.0));
        assert!(rep.pass);
        rep.push(Check::band("bad", "aux", "", 2.0, 0.0, 1.0));
        assert!(!rep.pass);
        assert_eq!(rep.checks.len(), 2);
    }

    #[test]
    fn determinism_key_ignores_wall_clock() {
        let mut a = ExperimentReport::new("demo", 1);
        a.param("reps", 10u64);
        a.push(Check::band("x", "aux", "", 0.5, 0.0, 1.0));
        let mut b = a.clone();
        a.wall_ms = 123;
        b.wall_ms = 456;
        assert_eq!(a.determinism_key(), b.determinism_key());
        assert_ne!(a.to_json(), b.to_json());
    }

    #[test]
    fn json_has_schema_and_criterion_fields() {
        let mut rep = ExperimentReport::new("demo", 7);
        rep.push(Check::band("x", "AC6", "slope", 0.66, 0.567, 0.767));
        let json = rep.to_json();
        assert!(json.contains("\"schema\": 1"));
        assert!(json.contains("\"criterion\": \"AC6\""));
        assert!(json.contains("\"master_seed\": 7"));
    }

    #[test]
    fn csv_renders_header_first() {
        let mut t = CsvTable::new("N,var_logZ,stderr");
        t.rows.push(String::from("64,1.0,0.1"));
        assert_eq!(t.render(), "N,var_logZ,stderr\n64,1.0,0.1\n");
    }
}
