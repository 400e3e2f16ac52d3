use serde::Serialize;

use super::{FeatureMatchReport, VetError};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// `(a -> b, b -> a)`: similar pairs over similar plus the source side's
/// unmatched columns.
pub fn directional_coverage(report: &FeatureMatchReport) -> Result<(f64, f64), VetError> {
    let s = report.similar_pairs.len();
    let da = s + report.dissimilar_a.len();
    let db = s + report.dissimilar_b.len();
    if da == 0 || db == 0 {
        return Err(VetError::EmptySchema);
    }
    Ok((s as f64 / da as f64, s as f64 / db as f64))
}

/// Row = source dataset, column = target. `None` marks the diagonal and
/// pairs that were not compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageMatrix {
    pub names: Vec<String>,
    pub coverage: Vec<Vec<Option<f64>>>,
    pub binary: Vec<Vec<Option<bool>>>,
}

impl CoverageMatrix {
    pub fn new(names: Vec<String>) -> Self {
        let n = names.len();
        CoverageMatrix { names, coverage: vec![vec![None; n]; n], binary: vec![vec![None; n]; n] }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Records both directions of one comparison and re-binarizes.
    pub fn insert(&mut self, report: &FeatureMatchReport) -> Result<(), VetError> {
        let (ab, ba) = directional_coverage(report)?;
        let i = self.index(&report.dataset_a).ok_or_else(|| VetError::UnknownDataset(report.dataset_a.clone()))?;
        let j = self.index(&report.dataset_b).ok_or_else(|| VetError::UnknownDataset(report.dataset_b.clone()))?;
        if i != j {
            self.coverage[i][j] = Some(ab);
            self.coverage[j][i] = Some(ba);
        }
        *self = binarize(self, DEFAULT_THRESHOLD);
        Ok(())
    }

    pub fn from_reports(names: Vec<String>, reports: &[FeatureMatchReport]) -> Result<Self, VetError> {
        let mut m = CoverageMatrix::new(names);
        for r in reports {
            m.insert(r)?;
        }
        Ok(m)
    }

    fn render(&self, cell: impl Fn(usize, usize) -> String) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = std::iter::once("source".to_string()).chain(self.names.iter().cloned()).collect();
        w.write_record(&header).expect("in-memory write");
        for (i, name) in self.names.iter().enumerate() {
            let row: Vec<String> = std::iter::once(name.clone())
                .chain((0..self.names.len()).map(|j| if i == j { "-".to_string() } else { cell(i, j) }))
                .collect();
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Continuous scores to 3 decimals; blank where not compared.
    pub fn to_csv(&self) -> String {
        self.render(|i, j| self.coverage[i][j].map_or_else(String::new, |v| format!("{v:.3}")))
    }

    pub fn to_binary_csv(&self) -> String {
        self.render(|i, j| self.binary[i][j].map_or_else(String::new, |b| if b { "1" } else { "0" }.to_string()))
    }
}

/// `binary = coverage >= threshold`; the diagonal and missing cells stay `None`.
pub fn binarize(matrix: &CoverageMatrix, threshold: f64) -> CoverageMatrix {
    let mut out = matrix.clone();
    for (i, row) in matrix.coverage.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.binary[i][j] = if i == j { None } else { v.map(|v| v >= threshold) };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vetting::SimilarPair;

    fn report(a: &str, b: &str, similar: usize, da: usize, db: usize) -> FeatureMatchReport {
        FeatureMatchReport {
            dataset_a: a.into(),
            dataset_b: b.into(),
            similar_pairs: (0..similar)
                .map(|i| SimilarPair { col_a: format!("a{i}"), col_b: format!("b{i}"), reason: String::new() })
                .collect(),
            dissimilar_a: (0..da).map(|i| format!("xa{i}")).collect(),
            dissimilar_b: (0..db).map(|i| format!("xb{i}")).collect(),
        }
    }

    #[test]
    fn hand_values() {
        let (ab, ba) = directional_coverage(&report("bikedekho", "cars_24", 7, 2, 1)).unwrap();
        assert!((ab - 7.0 / 9.0).abs() < 1e-12 && (ba - 7.0 / 8.0).abs() < 1e-12);
        let (ab, _) = directional_coverage(&report("museums", "spotify", 1, 18, 16)).unwrap();
        assert!((ab - 1.0 / 19.0).abs() < 1e-12);
        assert_eq!(directional_coverage(&report("a", "b", 0, 3, 2)).unwrap(), (0.0, 0.0));
        assert!(matches!(directional_coverage(&report("a", "b", 0, 0, 2)), Err(VetError::EmptySchema)));
    }

    #[test]
    fn threshold_is_inclusive() {
        let mut m = CoverageMatrix::new(vec!["a".into(), "b".into()]);
        m.coverage[0][1] = Some(0.5);
        m.coverage[1][0] = Some(0.49);
        m.coverage[0][0] = Some(1.0);
        let b = binarize(&m, 0.5);
        assert_eq!(b.binary[0][1], Some(true));
        assert_eq!(b.binary[1][0], Some(false));
        assert_eq!(b.binary[0][0], None);
        assert_eq!(b.coverage, m.coverage);
    }

    #[test]
    fn csv_layout() {
        let m = CoverageMatrix::from_reports(vec!["a".into(), "b".into(), "c".into()], &[report("a", "b", 7, 2, 1)]).unwrap();
        assert_eq!(m.to_csv(), "source,a,b,c\na,-,0.778,\nb,0.875,-,\nc,,,-\n");
        assert_eq!(m.to_binary_csv(), "source,a,b,c\na,-,1,\nb,1,-,\nc,,,-\n");
    }
}
