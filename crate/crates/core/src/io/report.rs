use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// One header row, then one record per serialisable row.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    for r in rows {
        w.serialize(r).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        n: usize,
        peak_bytes: u64,
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_csv(&path, &[Row { n: 8, peak_bytes: 100 }, Row { n: 16, peak_bytes: 400 }]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "n,peak_bytes\n8,100\n16,400\n");
        write_json(&dir.path().join("r.json"), &serde_json::json!({"a": 1})).unwrap();
    }
}
