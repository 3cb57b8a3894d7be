//! Plain-text coordinate format: a `rows cols nnz` header line followed by
//! `nnz` lines of 0-indexed `row col value`.
//!
//! Blank lines and lines starting with `%` or `#` are ignored.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{Matrix, SparseMatrix};
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl core::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn field<T: core::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

pub fn parse_triples(text: &str) -> Result<SparseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%') && !l.starts_with('#'));

    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let mut toks = header.split_whitespace();
    let rows: usize = field(toks.next(), hl, "row count")?;
    let cols: usize = field(toks.next(), hl, "column count")?;
    let nnz: usize = field(toks.next(), hl, "nnz")?;
    if toks.next().is_some() {
        return Err(parse_err(hl, "header must be `rows cols nnz`"));
    }

    let mut triplets = Vec::with_capacity(nnz);
    for (ln, line) in lines {
        if triplets.len() == nnz {
            return Err(parse_err(ln, format!("more than {nnz} entries")));
        }
        let mut toks = line.split_whitespace();
        let i: usize = field(toks.next(), ln, "row index")?;
        let j: usize = field(toks.next(), ln, "column index")?;
        let v: f64 = field(toks.next(), ln, "value")?;
        if toks.next().is_some() {
            return Err(parse_err(ln, "expected `row col value`"));
        }
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "header declares {nnz} entries, found {}",
            triplets.len()
        )));
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

/// Writes every stored nonzero; values use round-trip formatting.
pub fn format_triples(m: &Matrix) -> String {
    let mut out = String::new();
    let mut body = String::new();
    let mut nnz = 0usize;
    let entries: Vec<(usize, usize, f64)> = match m {
        Matrix::Sparse(s) => s.entries().to_vec(),
        Matrix::Dense(d) => (0..d.rows())
            .flat_map(|i| (0..d.cols()).map(move |j| (i, j, d[(i, j)])))
            .filter(|&(_, _, v)| v != 0.0)
            .collect(),
    };
    for (i, j, v) in entries {
        let _ = writeln!(body, "{i} {j} {v:?}");
        nnz += 1;
    }
    let _ = writeln!(out, "{} {} {}", m.rows(), m.cols(), nnz);
    out.push_str(&body);
    out
}
