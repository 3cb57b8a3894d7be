//! Matrix files in the plain-text triple format.

use std::fs;
use std::path::Path;

use srkrp_core::linalg::{format_triples, parse_triples, Matrix, SparseMatrix};

use crate::{Error, Result};

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_triples(&text).map_err(|e| match e {
        srkrp_core::Error::Parse(msg) => srkrp_core::Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    }.into())
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_triples(m)).map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, creating missing parent directories.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use srkrp_core::linalg::DenseMatrix;

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        let d = DenseMatrix::from_rows(&[&[1.0, 0.0, -3.25], &[0.0, 1e-7, 0.0]]).unwrap();
        write_matrix(&path, &Matrix::Dense(d.clone())).unwrap();
        assert_eq!(read_matrix(&path).unwrap().to_dense(), d);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_matrix("/nonexistent/x.mtx").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn parse_error_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mtx");
        std::fs::write(&path, "2 2 1\n0 0\n").unwrap();
        let msg = read_matrix(&path).unwrap_err().to_string();
        assert!(msg.contains("bad.mtx") && msg.contains("line 2"), "{msg}");
    }
}
