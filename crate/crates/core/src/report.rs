//! Validation findings and display formatting shared by the report emitters.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    // schema
    ScaleLevelCount,
    ScaleLevelOrder,
    EmptyScaleLabel,
    DuplicateGroupId,
    GroupContiguity,
    EmptyGroup,
    DuplicateItemId,
    EmptyItemLabel,
    // dataset
    MissingRating,
    MissingProfile,
    OrphanProfile,
    ReceivedExceedsSent,
    MissingSentCount,
    SchemaVersionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub severity: Severity,
    /// Where the problem sits, e.g. `groups[2].items[1]` or `record E07`.
    pub location: String,
    pub message: String,
}

impl Finding {
    pub fn error(
        kind: FindingKind,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            severity: Severity::Error,
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn warning(
        kind: FindingKind,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            severity: Severity::Warning,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

/// Ordered list of findings. Findings are data; producing a report never fails.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn push(&mut self, finding: Finding) {
        self.findings.push(finding);
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    /// True when no finding has error severity.
    pub fn passes(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }

    pub fn to_text(&self) -> String {
        if self.findings.is_empty() {
            return "0 findings\n".to_string();
        }
        let mut out = format!("{} findings\n", self.findings.len());
        for f in &self.findings {
            out.push_str(&f.to_string());
            out.push('\n');
        }
        out
    }
}

/// Formats `value` with `places` decimals, rounding halves away from zero.
///
/// A relative nudge of 1e-9 absorbs binary representation error so that a
/// value such as 4.485 (stored as 4.48499999...) displays as 4.49.
pub fn fmt_half_up(value: f64, places: usize) -> String {
    let scale = 10f64.powi(places as i32);
    let scaled = value.abs() * scale;
    let rounded = (scaled + 0.5 + scaled.max(1.0) * 1e-9).floor() / scale;
    let signed = if value < 0.0 && rounded != 0.0 {
        -rounded
    } else {
        rounded
    };
    format!("{signed:.places$}")
}

/// Percentage `100 * num / den` as exact integer hundredths, truncated.
pub fn percent_hundredths(num: u64, den: u64) -> u64 {
    assert!(den > 0, "percentage with zero denominator");
    (num * 10_000) / den
}

/// Two-decimal percentage display computed from the exact ratio.
pub fn fmt_percent(num: u64, den: u64) -> String {
    let h = percent_hundredths(num, den);
    format!("{}.{:02}", h / 100, h % 100)
}
