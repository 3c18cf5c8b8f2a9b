//! Structured verification records: one entry per check with computed and
//! reference values, a tolerance, and a derived verdict, plus optional
//! value ladders (tables over a radius or resolution parameter).
//! Aggregates serialize to versioned JSON and to flat CSV with a stable
//! field order, so identical runs produce identical bytes.

use serde::Serialize;

/// Embedded in every emitted artifact so downstream readers can detect
/// layout changes.
pub const SCHEMA_VERSION: &str = "1";

/// Outcome of a single check. `Pass` is only set when every reference value
/// has a computed counterpart within the declared tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

/// A named computed quantity.
#[derive(Debug, Clone, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

impl NamedValue {
    pub fn new(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
        }
    }
}

/// A named reference quantity together with a note on how it was obtained
/// (closed form, independent quadrature, exact construction, ...).
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceValue {
    pub name: String,
    pub value: f64,
    pub source: String,
}

impl ReferenceValue {
    pub fn new(name: &str, value: f64, source: &str) -> Self {
        Self {
            name: name.to_string(),
            value,
            source: source.to_string(),
        }
    }
}

/// A rectangular table of values over a ladder parameter (radius, mesh,
/// sequence index). Serialized to CSV with one row per ladder entry.
#[derive(Debug, Clone, Serialize)]
pub struct Ladder {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Ladder {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "ladder row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One verification record.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub id: String,
    /// Which published quantity or identity the check exercises.
    pub anchor: String,
    /// Digest of the inputs that produced this record.
    pub inputs_digest: String,
    pub computed: Vec<NamedValue>,
    pub reference: Vec<ReferenceValue>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Negative controls are first-class: a check that is supposed to fail
    /// is marked here and still counts as a failure for exit purposes.
    pub expected_fail: bool,
    pub runtime_ms: f64,
    pub note: Option<String>,
    pub ladder: Option<Ladder>,
}

impl CheckReport {
    /// Builds a record and derives the verdict: every reference value must
    /// have a computed counterpart of the same name within `tolerance`
    /// (absolute difference). A reference without a counterpart makes the
    /// verdict indeterminate.
    pub fn evaluate(
        id: &str,
        anchor: &str,
        inputs: &[String],
        computed: Vec<NamedValue>,
        reference: Vec<ReferenceValue>,
        tolerance: f64,
    ) -> Self {
        assert!(tolerance > 0.0, "tolerance must be positive");
        let mut verdict = Verdict::Pass;
        for r in &reference {
            match computed.iter().find(|c| c.name == r.name) {
                None => {
                    verdict = Verdict::Indeterminate;
                    break;
                }
                Some(c) => {
                    if !((c.value - r.value).abs() <= tolerance) {
                        verdict = Verdict::Fail;
                    }
                }
            }
        }
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            inputs_digest: digest_of(inputs),
            computed,
            reference,
            tolerance,
            verdict,
            expected_fail: false,
            runtime_ms: 0.0,
            note: None,
            ladder: None,
        }
    }

    /// Largest |computed − reference| over the matched value pairs.
    pub fn worst_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in &self.reference {
            if let Some(c) = self.computed.iter().find(|c| c.name == r.name) {
                worst = worst.max((c.value - r.value).abs());
            }
        }
        worst
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }

    pub fn with_ladder(mut self, ladder: Ladder) -> Self {
        self.ladder = Some(ladder);
        self
    }

    pub fn with_runtime_ms(mut self, ms: f64) -> Self {
        self.runtime_ms = ms;
        self
    }

    pub fn mark_expected_fail(mut self) -> Self {
        self.expected_fail = true;
        self
    }

    /// Overrides the derived verdict (used when a check's pass condition is
    /// structural rather than a value comparison).
    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }
}

/// The aggregate of one suite run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema_version: String,
    pub suite: String,
    pub seed: u64,
    pub config_digest: String,
    pub checks: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn new(suite: &str, seed: u64, config_inputs: &[String]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            suite: suite.to_string(),
            seed,
            config_digest: digest_of(config_inputs),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: CheckReport) {
        self.checks.push(check);
    }

    /// Number of failed checks (expected-fail controls included: a control
    /// that fires still yields a nonzero exit status).
    pub fn failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Flat CSV: one row per check, LF line endings, "." decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "schema_version,suite,check_id,anchor,verdict,tolerance,worst_deviation,expected_fail,runtime_ms,note\n",
        );
        for c in &self.checks {
            let verdict = match c.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Indeterminate => "indeterminate",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{:.3e},{:.6e},{},{:.1},{}\n",
                self.schema_version,
                self.suite,
                c.id,
                c.anchor,
                verdict,
                c.tolerance,
                c.worst_deviation(),
                c.expected_fail,
                c.runtime_ms,
                c.note.as_deref().unwrap_or(""),
            ));
        }
        out
    }
}

/// Deterministic 64-bit FNV-1a digest of the given input descriptions,
/// rendered as fixed-width hex. Used to tie a report to its inputs without
/// external dependencies.
pub fn digest_of(parts: &[String]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.as_bytes() {
            hash ^= u64::from(*b);
            hash = hash.wrapping_mul(0x1000_0000_01b3);
        }
        hash ^= 0x1e;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}
