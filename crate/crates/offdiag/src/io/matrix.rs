//! Plain-text matrix files.
//!
//! Format: an optional run of `#` comment or blank lines, then a header line
//! `p n`, then p whitespace-separated rows of n decimal values (comments and
//! blank lines may appear between rows too). Values are written with 17
//! significant digits so reading a written file reproduces every bit.

use std::path::Path;

use crate::kernels::{DataMatrix, SymmetricMatrix};
use crate::{Error, Result};

use super::{table::fmt_f64, write_atomic};

/// Parsed payload: shape plus row-major values.
fn read_raw(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut header: Option<(usize, usize)> = None;
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        match header {
            None => {
                let mut parts = content.split_whitespace();
                let p = parse_dim(parts.next(), lineno, "p")?;
                let n = parse_dim(parts.next(), lineno, "n")?;
                if parts.next().is_some() {
                    return Err(Error::parse_at(
                        lineno,
                        "header must be exactly two integers `p n`".to_string(),
                    ));
                }
                header = Some((p, n));
                values.reserve(p.saturating_mul(n));
            }
            Some((p, n)) => {
                for tok in content.split_whitespace() {
                    if values.len() >= p * n {
                        return Err(Error::parse_at(
                            lineno,
                            format!("more than the declared p·n = {} values", p * n),
                        ));
                    }
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::parse_at(lineno, format!("invalid number {tok:?}"))
                    })?;
                    values.push(v);
                }
            }
        }
    }
    let (p, n) = header.ok_or_else(|| Error::parse("missing `p n` header line".to_string()))?;
    if values.len() != p * n {
        return Err(Error::parse(format!(
            "expected p·n = {} values, found {}",
            p * n,
            values.len()
        )));
    }
    Ok((p, n, values))
}

fn parse_dim(tok: Option<&str>, lineno: usize, name: &str) -> Result<usize> {
    let tok =
        tok.ok_or_else(|| Error::parse_at(lineno, format!("header missing dimension {name}")))?;
    let v: usize = tok
        .parse()
        .map_err(|_| Error::parse_at(lineno, format!("invalid dimension {name} = {tok:?}")))?;
    if v == 0 {
        return Err(Error::parse_at(lineno, format!("dimension {name} must be ≥ 1")));
    }
    Ok(v)
}

/// Read a p × n data matrix.
pub fn read_data_matrix(path: &Path) -> Result<DataMatrix> {
    let (p, n, values) = read_raw(path)?;
    DataMatrix::new(p, n, values)
}

/// Read a symmetric p × p matrix (the header must declare equal dimensions).
pub fn read_symmetric_matrix(path: &Path) -> Result<SymmetricMatrix> {
    let (p, n, values) = read_raw(path)?;
    if p != n {
        return Err(Error::parse(format!(
            "symmetric matrix needs a square header, got {p} {n}"
        )));
    }
    SymmetricMatrix::new(p, values)
}

fn render(p: usize, n: usize, rows: impl Iterator<Item = Vec<f64>>, comment: &str) -> String {
    let mut out = String::new();
    if !comment.is_empty() {
        for line in comment.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&format!("{p} {n}\n"));
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&fmt_f64(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Write a data matrix with an optional leading comment block.
pub fn write_data_matrix(path: &Path, x: &DataMatrix, comment: &str) -> Result<()> {
    let content = render(
        x.p(),
        x.n(),
        (0..x.p()).map(|i| x.row(i).to_vec()),
        comment,
    );
    write_atomic(path, &content)
}

/// Write a symmetric matrix with an optional leading comment block.
pub fn write_symmetric_matrix(path: &Path, m: &SymmetricMatrix, comment: &str) -> Result<()> {
    let content = render(
        m.p(),
        m.p(),
        (0..m.p()).map(|i| m.row(i).to_vec()),
        comment,
    );
    write_atomic(path, &content)
}
