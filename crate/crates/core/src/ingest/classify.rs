//! Column-role heuristics and numeric coercion.
//!
//! A string column counts as numerical when at least 90% of its non-missing
//! cells parse as numbers, either directly (after dropping formatting
//! characters such as thousands separators, currency signs and `%`) or once
//! the column's most frequent short non-numeric affix is removed
//! (`"ABV 12%"` -> 12, `"15s"` -> 15).

use std::collections::HashMap;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::table::{Cell, Column, ColumnRole};

use super::IngestError;

/// Share of non-missing cells that must parse for a column to be numerical.
pub const NUMERIC_SHARE: f64 = 0.9;
/// Longest affix (in characters) stripped from numeric strings.
pub const MAX_AFFIX_LEN: usize = 5;
/// Share of cells allowed to fail coercion before it is treated as an error.
pub const MAX_COERCION_FAILURES: f64 = 0.1;

fn is_format_char(c: char) -> bool {
    matches!(c, ',' | '$' | '€' | '£' | '¥' | '₹' | '%') || c.is_whitespace()
}

/// Parses a number after removing formatting characters only.
pub fn parse_plain(s: &str) -> Option<f64> {
    let cleaned: String = s.chars().filter(|&c| !is_format_char(c)).collect();
    if !cleaned.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Splits `s` into its first numeric run and the remaining affix text.
///
/// Returns `None` when there is no number or when the affix itself
/// contains digits (a second number).
pub fn split_affix(s: &str) -> Option<(String, f64)> {
    let chars: Vec<char> = s.chars().collect();
    let is_digit = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_digit());
    let first = (0..chars.len()).find(|&i| is_digit(i))?;
    let mut start = first;
    if start > 0 && chars[start - 1] == '.' {
        start -= 1;
    }
    if start > 0 && matches!(chars[start - 1], '-' | '+') && (start == 1 || is_format_char(chars[start - 2])) {
        start -= 1;
    }
    let mut end = first;
    let mut seen_dot = chars[start..first].contains(&'.');
    while end < chars.len() {
        let c = chars[end];
        if c.is_ascii_digit() {
            end += 1;
        } else if c == ',' && is_digit(end + 1) {
            end += 1;
        } else if c == '.' && !seen_dot && is_digit(end + 1) {
            seen_dot = true;
            end += 1;
        } else {
            break;
        }
    }
    let number: String = chars[start..end].iter().filter(|&&c| c != ',').collect();
    let value = number.parse::<f64>().ok().filter(|v| v.is_finite())?;
    let affix: String = chars[..start]
        .iter()
        .chain(&chars[end..])
        .filter(|&&c| !is_format_char(c))
        .collect();
    if affix.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    Some((affix, value))
}

/// Parses ISO-like timestamps into UNIX seconds.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.len() < 8 || !s.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp() as f64);
    }
    const DATETIME: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for f in DATETIME {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, f) {
            return Some(dt.and_utc().timestamp() as f64);
        }
    }
    for f in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
        }
    }
    None
}

/// How a column's cells parse as numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericProfile {
    pub non_missing: usize,
    /// Cells that parse as numbers once `affix` (if any) is removed.
    pub numeric: usize,
    pub affix: Option<String>,
    pub timestamps: usize,
}

impl NumericProfile {
    pub fn of(col: &Column) -> Self {
        let mut non_missing = 0;
        let mut plain = 0;
        let mut timestamps = 0;
        let mut affixes: HashMap<String, usize> = HashMap::new();
        for cell in &col.values {
            match cell {
                Cell::Missing => {}
                Cell::Num(_) => {
                    non_missing += 1;
                    plain += 1;
                }
                Cell::Text(s) => {
                    non_missing += 1;
                    if parse_timestamp(s).is_some() {
                        timestamps += 1;
                    }
                    if parse_plain(s).is_some() {
                        plain += 1;
                    } else if let Some((affix, _)) = split_affix(s) {
                        if affix.chars().count() <= MAX_AFFIX_LEN {
                            *affixes.entry(affix).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        // Most frequent affix; ties go to the lexicographically smallest so
        // the choice does not depend on row order.
        let best = affixes
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        let (affix, affix_count) = match best {
            Some((a, c)) => (Some(a), c),
            None => (None, 0),
        };
        NumericProfile { non_missing, numeric: plain + affix_count, affix, timestamps }
    }

    pub fn is_timestamp(&self) -> bool {
        self.non_missing > 0 && self.timestamps as f64 >= NUMERIC_SHARE * self.non_missing as f64
    }

    pub fn is_numeric(&self) -> bool {
        self.non_missing > 0 && self.numeric as f64 >= NUMERIC_SHARE * self.non_missing as f64
    }

    fn parse(&self, s: &str) -> Option<f64> {
        parse_plain(s).or_else(|| match (&self.affix, split_affix(s)) {
            (Some(want), Some((got, v))) if *want == got => Some(v),
            _ => None,
        })
    }
}

/// Unique-value ceiling for a categorical column.
pub fn categorical_threshold(n_rows: usize) -> usize {
    if n_rows < 1000 {
        50usize.max((0.05 * n_rows as f64).ceil() as usize)
    } else {
        50
    }
}

/// Assigns a role from the cell contents alone.
pub fn classify_column(col: &Column, n_rows: usize) -> ColumnRole {
    let profile = NumericProfile::of(col);
    if profile.is_timestamp() || profile.is_numeric() {
        ColumnRole::Numerical
    } else if col.unique_non_missing() <= categorical_threshold(n_rows) {
        ColumnRole::Categorical
    } else {
        ColumnRole::Textual
    }
}

/// Converts every cell of a numerical column to a number or MISSING.
pub fn coerce_numeric_column(col: &Column) -> Result<Column, IngestError> {
    let profile = NumericProfile::of(col);
    let timestamp = profile.is_timestamp();
    let mut failed = 0;
    let values = col
        .values
        .iter()
        .map(|cell| match cell {
            Cell::Missing => Cell::Missing,
            Cell::Num(v) => Cell::Num(*v),
            Cell::Text(s) => {
                let parsed = if timestamp { parse_timestamp(s) } else { profile.parse(s) };
                parsed.map(Cell::Num).unwrap_or_else(|| {
                    failed += 1;
                    Cell::Missing
                })
            }
        })
        .collect();
    if failed as f64 > MAX_COERCION_FAILURES * profile.non_missing as f64 {
        return Err(IngestError::CoercionFailure {
            column: col.name.clone(),
            failed,
            total: profile.non_missing,
        });
    }
    Ok(Column { name: col.name.clone(), role: Some(ColumnRole::Numerical), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(name: &str, v: &[&str]) -> Column {
        Column::new(name, None, v.iter().map(|s| Cell::Text(s.to_string())).collect())
    }

    fn nums(col: &Column) -> Vec<Option<f64>> {
        col.values.iter().map(Cell::as_f64).collect()
    }

    #[test]
    fn abv_percent_is_numeric() {
        let col = strings("ABV", &["ABV 12%", "ABV 15%", "ABV 10%"]);
        assert_eq!(classify_column(&col, 3), ColumnRole::Numerical);
        let coerced = coerce_numeric_column(&col).unwrap();
        assert_eq!(nums(&coerced), vec![Some(12.0), Some(15.0), Some(10.0)]);
    }

    #[test]
    fn seconds_suffix_is_numeric() {
        let col = strings("t", &["15s", "20s", "30s"]);
        assert_eq!(classify_column(&col, 3), ColumnRole::Numerical);
        assert_eq!(nums(&coerce_numeric_column(&col).unwrap()), vec![Some(15.0), Some(20.0), Some(30.0)]);
    }

    #[test]
    fn thousands_separator_and_placeholder() {
        let mut cells: Vec<&str> = vec!["1,234"; 9];
        cells.push("no-data");
        let col = strings("n", &cells);
        assert_eq!(classify_column(&col, 10), ColumnRole::Numerical);
        let out = nums(&coerce_numeric_column(&col).unwrap());
        assert_eq!(out[0], Some(1234.0));
        assert_eq!(out[9], None);
    }

    #[test]
    fn too_many_failures_is_an_error() {
        let col = strings("n", &["1", "2", "x", "y"]);
        assert!(matches!(
            coerce_numeric_column(&col),
            Err(IngestError::CoercionFailure { failed: 2, total: 4, .. })
        ));
    }

    #[test]
    fn low_cardinality_strings_are_categorical() {
        let values: Vec<String> = (0..10_000).map(|i| format!("brand {}", ["a", "b", "c"][i % 3]).repeat(1 + i % 10)).collect();
        let col = Column::new("c", None, values.into_iter().map(Cell::Text).collect());
        assert_eq!(col.unique_non_missing(), 30);
        assert_eq!(classify_column(&col, 10_000), ColumnRole::Categorical);
    }

    #[test]
    fn diverse_strings_are_textual() {
        let values: Vec<Cell> = (0..200).map(|i| Cell::Text(format!("review number {} was fine", i * 7))).collect();
        let col = Column::new("r", None, values);
        // The embedded numbers carry a long affix, so this stays text.
        assert_eq!(classify_column(&col, 200), ColumnRole::Textual);
    }

    #[test]
    fn codes_with_varying_prefixes_are_not_numeric() {
        let values: Vec<Cell> = (0..100).map(|i| Cell::Text(format!("{}{}", ["A", "B", "C", "D"][i % 4], i))).collect();
        let col = Column::new("code", None, values);
        assert_ne!(classify_column(&col, 100), ColumnRole::Numerical);
    }

    #[test]
    fn timestamps_become_unix_seconds() {
        let col = strings("when", &["2020-01-01", "2020-01-02T00:00:00", "1970-01-01 00:01:00"]);
        assert_eq!(classify_column(&col, 3), ColumnRole::Numerical);
        let out = nums(&coerce_numeric_column(&col).unwrap());
        assert_eq!(out, vec![Some(1_577_836_800.0), Some(1_577_923_200.0), Some(60.0)]);
    }

    #[test]
    fn threshold_formula() {
        assert_eq!(categorical_threshold(100), 50);
        assert_eq!(categorical_threshold(999), 50);
        assert_eq!(categorical_threshold(100_000), 50);
    }

    #[test]
    fn split_affix_cases() {
        assert_eq!(split_affix("ABV 12%"), Some(("ABV".into(), 12.0)));
        assert_eq!(split_affix("1234XXX"), Some(("XXX".into(), 1234.0)));
        assert_eq!(split_affix("-3.5 kg"), Some(("kg".into(), -3.5)));
        assert_eq!(split_affix("3 or 4, not sure"), None);
        assert_eq!(split_affix("no-data"), None);
    }
}
