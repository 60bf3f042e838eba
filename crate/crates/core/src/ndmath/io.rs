//! Plain-text matrix format shared by datasets, checkpoints and exports.
//!
//! ```text
//! rows cols
//! v00 v01 ...
//! v10 v11 ...
//! ```
//!
//! Values are written with Rust's shortest round-trip `Display` form, so a
//! write followed by a read reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub fn matrix_to_text(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.len() * 20 + 16);
    writeln!(out, "{} {}", m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        let mut first = true;
        for v in m.row(i) {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses the text format. `origin` is only used in error messages.
pub fn matrix_from_text(text: &str, origin: &Path) -> Result<Matrix> {
    let mut lines = text.lines().enumerate();
    let (rows, cols) = loop {
        let Some((n, line)) = lines.next() else {
            return Err(Error::parse(origin, 1, "missing `rows cols` header"));
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let dims: Vec<&str> = line.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::parse(origin, n + 1, "header must be `rows cols`"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::parse(origin, n + 1, format!("bad dimension `{s}`: {e}")))
        };
        break (parse(dims[0])?, parse(dims[1])?);
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if seen_rows == rows {
            return Err(Error::parse(origin, n + 1, format!("more than {rows} rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| Error::parse(origin, n + 1, format!("bad number `{tok}`: {e}")))?;
            if !v.is_finite() {
                return Err(Error::parse(origin, n + 1, format!("non-finite value `{tok}`")));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::parse(
                origin,
                n + 1,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::parse(
            origin,
            text.lines().count(),
            format!("expected {rows} rows, found {seen_rows}"),
        ));
    }
    Matrix::new(rows, cols, data)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_text(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    matrix_from_text(&text, path)
}
