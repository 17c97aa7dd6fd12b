//! Flat `key = value` configuration files.
//!
//! One binding per line; `#` starts a comment; keys may use dots for
//! grouping (e.g. `threshold.c`). Parsing is strict: duplicate keys are
//! errors, and after the consumer has read what it understands,
//! [`KeyValueFile::finish`] reports any key that was never consumed —
//! a typo in a config must fail loudly rather than silently fall back to a
//! default.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// A parsed config: ordered key → (value, line number), with consumption
/// tracking for unknown-key detection.
#[derive(Debug, Clone)]
pub struct KeyValueFile {
    entries: BTreeMap<String, (String, usize)>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl KeyValueFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
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
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::parse_at(
                    lineno,
                    format!("expected `key = value`, got {content:?}"),
                ));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse_at(lineno, "empty key".to_string()));
            }
            if let Some((_, first)) = entries.insert(key.clone(), (value, lineno)) {
                return Err(Error::parse_at(
                    lineno,
                    format!("duplicate key {key:?} (first bound on line {first})"),
                ));
            }
        }
        Ok(KeyValueFile {
            entries,
            consumed: std::cell::RefCell::new(Default::default()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn take(&self, key: &str) -> Option<&(String, usize)> {
        let found = self.entries.get(key);
        if found.is_some() {
            self.consumed.borrow_mut().insert(key.to_string());
        }
        found
    }

    /// Raw string value, if present.
    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.take(key).map(|(v, _)| v.as_str())
    }

    /// Required string value.
    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get_str(key)
            .ok_or_else(|| Error::parse(format!("missing required key {key:?}")))
    }

    fn parse_with<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, lineno)) => v.parse::<T>().map(Some).map_err(|_| {
                Error::parse_at(*lineno, format!("key {key:?}: invalid {kind} {v:?}"))
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, "integer")
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, "integer")
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, "number")
    }

    pub fn require_u64(&self, key: &str) -> Result<u64> {
        self.require_present(key)?;
        Ok(self.get_u64(key)?.expect("presence checked"))
    }

    pub fn require_usize(&self, key: &str) -> Result<usize> {
        self.require_present(key)?;
        Ok(self.get_usize(key)?.expect("presence checked"))
    }

    fn require_present(&self, key: &str) -> Result<()> {
        if self.entries.contains_key(key) {
            Ok(())
        } else {
            Err(Error::parse(format!("missing required key {key:?}")))
        }
    }

    /// Comma-separated list of numbers; `inf`/`-inf` accepted.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, lineno)) => {
                let mut out = Vec::new();
                for tok in v.split(',') {
                    let tok = tok.trim();
                    if tok.is_empty() {
                        continue;
                    }
                    out.push(parse_extended_f64(tok).ok_or_else(|| {
                        Error::parse_at(*lineno, format!("key {key:?}: invalid number {tok:?}"))
                    })?);
                }
                if out.is_empty() {
                    return Err(Error::parse_at(*lineno, format!("key {key:?}: empty list")));
                }
                Ok(Some(out))
            }
        }
    }

    /// Comma-separated list of `a..b` ranges; `b` may be `inf`.
    pub fn get_window_list(&self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, lineno)) => {
                let mut out = Vec::new();
                for tok in v.split(',') {
                    let tok = tok.trim();
                    if tok.is_empty() {
                        continue;
                    }
                    let Some((a, b)) = tok.split_once("..") else {
                        return Err(Error::parse_at(
                            *lineno,
                            format!("key {key:?}: window {tok:?} is not of the form a..b"),
                        ));
                    };
                    let lo = parse_extended_f64(a.trim()).ok_or_else(|| {
                        Error::parse_at(*lineno, format!("key {key:?}: invalid endpoint {a:?}"))
                    })?;
                    let hi = parse_extended_f64(b.trim()).ok_or_else(|| {
                        Error::parse_at(*lineno, format!("key {key:?}: invalid endpoint {b:?}"))
                    })?;
                    out.push((lo, hi));
                }
                if out.is_empty() {
                    return Err(Error::parse_at(*lineno, format!("key {key:?}: empty list")));
                }
                Ok(Some(out))
            }
        }
    }

    /// Error if any key was never consumed by a getter.
    pub fn finish(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        let unknown: Vec<&str> = self
            .entries
            .iter()
            .filter(|(k, _)| !consumed.contains(*k))
            .map(|(k, _)| k.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            let (_, line) = self.entries[unknown[0]];
            Err(Error::parse_at(
                line,
                format!("unknown key(s): {}", unknown.join(", ")),
            ))
        }
    }

    /// All bindings in key order (for config echoes in manifests).
    pub fn bindings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, (v, _))| (k.as_str(), v.as_str()))
    }
}

fn parse_extended_f64(tok: &str) -> Option<f64> {
    match tok {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_values_and_comments() {
        let kv = KeyValueFile::parse(
            "# experiment\nfunctional = pp_counts\np = 50   # coordinates\nthreshold.c = 2.5\n",
        )
        .unwrap();
        assert_eq!(kv.get_str("functional"), Some("pp_counts"));
        assert_eq!(kv.get_usize("p").unwrap(), Some(50));
        assert_eq!(kv.get_f64("threshold.c").unwrap(), Some(2.5));
        kv.finish().unwrap();
    }

    #[test]
    fn rejects_duplicates_and_malformed_lines() {
        assert!(KeyValueFile::parse("a = 1\na = 2\n").is_err());
        assert!(KeyValueFile::parse("just words\n").is_err());
        assert!(KeyValueFile::parse("= 3\n").is_err());
    }

    #[test]
    fn unconsumed_keys_fail_finish_with_their_names() {
        let kv = KeyValueFile::parse("p = 5\ntypo_key = 7\n").unwrap();
        assert_eq!(kv.get_usize("p").unwrap(), Some(5));
        let err = kv.finish().unwrap_err().to_string();
        assert!(err.contains("typo_key"), "{err}");
    }

    #[test]
    fn typed_getters_report_line_numbers() {
        let kv = KeyValueFile::parse("p = 5\nn = five\n").unwrap();
        let err = kv.get_usize("n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn missing_required_keys_are_parse_errors() {
        let kv = KeyValueFile::parse("p = 5\n").unwrap();
        assert!(matches!(kv.require_u64("seed"), Err(Error::Parse { .. })));
    }

    #[test]
    fn lists_and_windows_parse_with_infinities() {
        let kv = KeyValueFile::parse("y = 0, 0.5, 1\nw = 0..inf, -1..0, 1..2.5\n").unwrap();
        assert_eq!(kv.get_f64_list("y").unwrap().unwrap(), vec![0.0, 0.5, 1.0]);
        let w = kv.get_window_list("w").unwrap().unwrap();
        assert_eq!(w[0], (0.0, f64::INFINITY));
        assert_eq!(w[1], (-1.0, 0.0));
        assert_eq!(w[2], (1.0, 2.5));
    }

    #[test]
    fn bad_windows_are_rejected() {
        let kv = KeyValueFile::parse("w = 0:1\n").unwrap();
        assert!(kv.get_window_list("w").is_err());
        let kv2 = KeyValueFile::parse("w = a..b\n").unwrap();
        assert!(kv2.get_window_list("w").is_err());
    }
}
