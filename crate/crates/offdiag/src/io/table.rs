//! CSV tables with a header row.
//!
//! Fields are plain tokens (numbers, identifiers, window labels) that never
//! contain commas or quotes, so no quoting dialect is needed. Floats are
//! rendered with [`fmt_f64`] (17 significant digits, round-trip exact).

use std::path::Path;

use crate::{Error, Result};

use super::write_atomic;

/// Round-trip decimal rendering of a 64-bit float.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.16e}")
    }
}

/// Write a CSV file atomically. Every row must match the header width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::domain(format!(
                "CSV row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Read a CSV file: (header, rows). Rows are validated against the header
/// width.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header_line)) = lines.next() else {
        return Err(Error::parse("empty CSV file".to_string()));
    };
    let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::parse_at(
                idx + 1,
                format!("row has {} fields, header has {}", row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_the_formatter() {
        for v in [
            0.0,
            -0.0,
            1.0 / 3.0,
            -2.0 / 7.0,
            1e-300,
            f64::MIN_POSITIVE,
            6.02214076e23,
            -1.7976931348623157e308,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} via {s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            vec!["a".to_string(), fmt_f64(1.5)],
            vec!["b".to_string(), fmt_f64(-0.25)],
        ];
        write_csv(&path, &["name", "value"], &rows).unwrap();
        let (header, back) = read_csv(&path).unwrap();
        assert_eq!(header, vec!["name", "value"]);
        assert_eq!(back, rows);
    }

    #[test]
    fn width_mismatches_are_rejected_on_write_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let bad = vec![vec!["only-one".to_string()]];
        assert!(write_csv(&path, &["a", "b"], &bad).is_err());

        std::fs::write(&path, "a,b\n1,2,3\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
