use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::table::ColumnRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColumnDropReason {
    #[serde(rename = "missing>50%")]
    MissingOverHalf,
    #[serde(rename = "constant")]
    Constant,
    #[serde(rename = "unnamed")]
    Unnamed,
    /// Listed in the manifest's `drop_columns`.
    #[serde(rename = "manual")]
    Manual,
}

impl fmt::Display for ColumnDropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnDropReason::MissingOverHalf => "missing>50%",
            ColumnDropReason::Constant => "constant",
            ColumnDropReason::Unnamed => "unnamed",
            ColumnDropReason::Manual => "manual",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowDropReason {
    #[serde(rename = "duplicate")]
    Duplicate,
    #[serde(rename = "missing-target")]
    MissingTarget,
    #[serde(rename = "row-cap")]
    RowCap,
}

impl fmt::Display for RowDropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowDropReason::Duplicate => "duplicate",
            RowDropReason::MissingTarget => "missing-target",
            RowDropReason::RowCap => "row-cap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: ColumnDropReason,
}

/// What preprocessing removed and how surviving columns were typed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dataset: String,
    pub rows_in: usize,
    pub rows_out: usize,
    pub dropped_columns: Vec<DroppedColumn>,
    pub dropped_rows: BTreeMap<RowDropReason, usize>,
    pub role_assignments: BTreeMap<String, ColumnRole>,
}

impl PreprocessReport {
    pub fn new(dataset: impl Into<String>, rows_in: usize) -> Self {
        let dropped_rows = [RowDropReason::Duplicate, RowDropReason::MissingTarget, RowDropReason::RowCap]
            .into_iter()
            .map(|r| (r, 0))
            .collect();
        PreprocessReport {
            dataset: dataset.into(),
            rows_in,
            rows_out: rows_in,
            dropped_columns: Vec::new(),
            dropped_rows,
            role_assignments: BTreeMap::new(),
        }
    }

    pub fn role_count(&self, role: ColumnRole) -> usize {
        self.role_assignments.values().filter(|&&r| r == role).count()
    }

    pub fn dropped_reason(&self, column: &str) -> Option<ColumnDropReason> {
        self.dropped_columns.iter().find(|d| d.name == column).map(|d| d.reason)
    }

    /// Human-readable block; the layout is stable and covered by fixtures.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset: {}", self.dataset);
        let _ = writeln!(out, "rows: {} -> {}", self.rows_in, self.rows_out);
        out.push_str("dropped rows:\n");
        for (reason, n) in &self.dropped_rows {
            let _ = writeln!(out, "  {reason}: {n}");
        }
        out.push_str("dropped columns:\n");
        if self.dropped_columns.is_empty() {
            out.push_str("  (none)\n");
        }
        for d in &self.dropped_columns {
            let _ = writeln!(out, "  {}: {}", d.name, d.reason);
        }
        let _ = writeln!(
            out,
            "roles: # Cat {} / # Num {} / # Text {}",
            self.role_count(ColumnRole::Categorical),
            self.role_count(ColumnRole::Numerical),
            self.role_count(ColumnRole::Textual)
        );
        for (col, role) in &self.role_assignments {
            let _ = writeln!(out, "  {col}: {role}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}
