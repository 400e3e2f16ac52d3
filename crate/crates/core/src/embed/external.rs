use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingBlock};
use crate::table::Table;

/// A precomputed embedding matrix aligned by row with a preprocessed table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalEmbeddings {
    pub path: PathBuf,
    pub matrix: Array2<f64>,
    /// Contents of the `<file>.checksum` sidecar.
    pub checksum: String,
}

impl ExternalEmbeddings {
    pub fn verify(&self, table: &Table) -> Result<(), EmbedError> {
        let actual = table_checksum(table)?;
        if actual != self.checksum {
            return Err(EmbedError::ChecksumMismatch { stored: self.checksum.clone(), actual });
        }
        Ok(())
    }

    /// Rows selected by the table's `row_ids`.
    pub fn block_for(&self, row_ids: &[usize], source_column: &str) -> Result<EmbeddingBlock, EmbedError> {
        let n = self.matrix.nrows();
        if let Some(&bad) = row_ids.iter().find(|&&r| r >= n) {
            return Err(EmbedError::RowCountMismatch { expected: bad + 1, found: n });
        }
        Ok(EmbeddingBlock::new(source_column, self.matrix.select(ndarray::Axis(0), row_ids)))
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".checksum");
    PathBuf::from(s)
}

/// sha256 over the row count and the target column, hex encoded.
pub fn table_checksum(table: &Table) -> Result<String, EmbedError> {
    let mut h = Sha256::new();
    h.update(format!("rows={}\n", table.n_rows).as_bytes());
    for label in table.target_labels()? {
        h.update(label.as_bytes());
        h.update(b"\n");
    }
    let mut out = String::with_capacity(64);
    for b in h.finalize().iter() {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    Ok(out)
}

/// Writes the sidecar checksum next to `embedding_file`.
pub fn write_checksum(embedding_file: &Path, table: &Table) -> Result<(), EmbedError> {
    let path = sidecar(embedding_file);
    fs::write(&path, table_checksum(table)? + "\n").map_err(|e| EmbedError::Io { path, source: e })
}

pub fn load_external_embeddings(embedding_file: &Path, expected_rows: usize) -> Result<ExternalEmbeddings, EmbedError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e| EmbedError::Io { path, source: e }
    };
    let text = fs::read_to_string(embedding_file).map_err(io(embedding_file))?;
    let side = sidecar(embedding_file);
    let checksum = fs::read_to_string(&side).map_err(io(&side))?.trim().to_string();

    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let bad = |message: String| EmbedError::MalformedEmbeddingFile { line: i + 1, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parsed: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("non-numeric entry".into()))?;
        match dim {
            None if parsed.is_empty() => return Err(bad("empty row".into())),
            None => dim = Some(parsed.len()),
            Some(d) if d != parsed.len() => return Err(bad(format!("expected {d} values, got {}", parsed.len()))),
            _ => {}
        }
        values.extend(parsed);
        rows += 1;
    }
    if rows != expected_rows {
        return Err(EmbedError::RowCountMismatch { expected: expected_rows, found: rows });
    }
    let matrix = Array2::from_shape_vec((rows, dim.unwrap_or(0)), values).expect("rows have equal width");
    Ok(ExternalEmbeddings { path: embedding_file.to_path_buf(), matrix, checksum })
}
