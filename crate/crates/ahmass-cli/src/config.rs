//! Flat "key = value" configuration with bracketed sections.
//!
//! Grammar (diff-friendly by construction):
//!   file     := line*
//!   line     := blank | comment | section | entry
//!   comment  := '#' .*
//!   section  := '[' name ']'
//!   entry    := key '=' value        (value runs to end of line, trimmed)
//! Keys are consumed by typed accessors; unknown keys are a validation
//! error with their line number. Every resolved parameter, including
//! defaults, is recorded for the summary echo.

use std::collections::BTreeMap;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {}: {}", l, self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

#[derive(Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    consumed: std::cell::Cell<bool>,
}

#[derive(Debug)]
pub struct Config {
    sections: Vec<(String, Vec<Entry>)>,
    /// fully resolved parameters (defaults materialized), for the summary
    pub resolved: std::cell::RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut sections: Vec<(String, Vec<Entry>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError {
                    line: Some(line_no),
                    message: "section header missing closing bracket".into(),
                })?;
                sections.push((name.trim().to_string(), Vec::new()));
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError {
                line: Some(line_no),
                message: format!("expected 'key = value', got {line:?}"),
            })?;
            let section = sections.last_mut().ok_or(ConfigError {
                line: Some(line_no),
                message: "entry appears before any [section] header".into(),
            })?;
            section.1.push(Entry {
                key: key.trim().to_string(),
                value: value.trim().to_string(),
                line: line_no,
                consumed: std::cell::Cell::new(false),
            });
        }
        Ok(Config {
            sections,
            resolved: std::cell::RefCell::new(BTreeMap::new()),
        })
    }

    fn find(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections
            .iter()
            .filter(|(name, _)| name == section)
            .flat_map(|(_, entries)| entries.iter())
            .find(|e| e.key == key)
    }

    fn record(&self, section: &str, key: &str, value: &str, defaulted: bool) {
        let tag = if defaulted {
            format!("{value} (default)")
        } else {
            value.to_string()
        };
        self.resolved.borrow_mut().insert(format!("{section}.{key}"), tag);
    }

    pub fn get_str(&self, section: &str, key: &str, default: &str) -> String {
        match self.find(section, key) {
            Some(e) => {
                e.consumed.set(true);
                self.record(section, key, &e.value, false);
                e.value.clone()
            }
            None => {
                self.record(section, key, default, true);
                default.to_string()
            }
        }
    }

    pub fn require_str(&self, section: &str, key: &str) -> Result<String, ConfigError> {
        match self.find(section, key) {
            Some(e) => {
                e.consumed.set(true);
                self.record(section, key, &e.value, false);
                Ok(e.value.clone())
            }
            None => Err(ConfigError {
                line: None,
                message: format!("missing required key '{key}' in section [{section}]"),
            }),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.find(section, key) {
            Some(e) => {
                e.consumed.set(true);
                let v: f64 = e.value.parse().map_err(|_| ConfigError {
                    line: Some(e.line),
                    message: format!("'{}' is not a number for key '{key}'", e.value),
                })?;
                self.record(section, key, &e.value, false);
                Ok(v)
            }
            None => {
                self.record(section, key, &format!("{default}"), true);
                Ok(default)
            }
        }
    }

    pub fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.find(section, key) {
            Some(e) => {
                e.consumed.set(true);
                let v: usize = e.value.parse().map_err(|_| ConfigError {
                    line: Some(e.line),
                    message: format!("'{}' is not a nonnegative integer for key '{key}'", e.value),
                })?;
                self.record(section, key, &e.value, false);
                Ok(v)
            }
            None => {
                self.record(section, key, &format!("{default}"), true);
                Ok(default)
            }
        }
    }

    pub fn get_u32(&self, section: &str, key: &str, default: u32) -> Result<u32, ConfigError> {
        Ok(self.get_usize(section, key, default as usize)? as u32)
    }

    /// Comma-separated floats.
    pub fn get_f64_list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.find(section, key) {
            Some(e) => {
                e.consumed.set(true);
                let mut out = Vec::new();
                for part in e.value.split(',') {
                    let v: f64 = part.trim().parse().map_err(|_| ConfigError {
                        line: Some(e.line),
                        message: format!("'{}' is not a number in list '{key}'", part.trim()),
                    })?;
                    out.push(v);
                }
                self.record(section, key, &e.value, false);
                Ok(out)
            }
            None => {
                let rep = default
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                self.record(section, key, &rep, true);
                Ok(default.to_vec())
            }
        }
    }

    /// Fail if any entry was never consumed by an accessor.
    pub fn finish(&self) -> Result<(), ConfigError> {
        for (name, entries) in &self.sections {
            for e in entries {
                if !e.consumed.get() {
                    return Err(ConfigError {
                        line: Some(e.line),
                        message: format!("unknown key '{}' in section [{name}]", e.key),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_defaults() {
        let text = "# comment\n[experiment]\nkind = mass_table\nn = 3\n\n[metric]\nm = 0.1\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.require_str("experiment", "kind").unwrap(), "mass_table");
        assert_eq!(c.get_u32("experiment", "n", 3).unwrap(), 3);
        assert_eq!(c.get_f64("metric", "m", 0.0).unwrap(), 0.1);
        assert_eq!(c.get_f64("metric", "tau", 3.0).unwrap(), 3.0);
        c.finish().unwrap();
        let resolved = c.resolved.borrow();
        assert_eq!(resolved.get("metric.tau").unwrap(), "3 (default)");
    }

    #[test]
    fn reports_line_numbers() {
        let text = "[a]\nx 3\n";
        let err = Config::parse(text).unwrap_err();
        assert_eq!(err.line, Some(2));
        let text = "[a]\nx = 3\n";
        let c = Config::parse(text).unwrap();
        let err = c.finish().unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(format!("{err}").contains("unknown key"));
    }

    #[test]
    fn bad_number_cited() {
        let c = Config::parse("[a]\nx = banana\n").unwrap();
        let err = c.get_f64("a", "x", 0.0).unwrap_err();
        assert_eq!(err.line, Some(2));
    }
}
