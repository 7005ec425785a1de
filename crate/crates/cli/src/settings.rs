//! Layered `key = value` configuration: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use structdistill::Error;

type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone)]
pub struct Settings {
    command: &'static str,
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn new(command: &'static str, defaults: &[(&str, &str)]) -> Self {
        let values = defaults.iter().map(|&(k, v)| (k.to_string(), v.to_string())).collect();
        Settings { command, values }
    }

    /// Applies a config file. Every key must be known to the command.
    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        for (k, v) in parse_config(&text)? {
            self.set(&k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: String) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::invalid(format!("unknown key {key:?} for {}", self.command))),
        }
    }

    /// Command-line flags; `None` leaves the current value.
    pub fn apply_flags(&mut self, flags: &[(&str, Option<&str>)]) -> Result<()> {
        for &(k, v) in flags {
            if let Some(v) = v {
                self.set(k, v.to_string())?;
            }
        }
        Ok(())
    }

    /// Fills a key left empty with a value that depends on other settings.
    pub fn fill(&mut self, key: &str, value: impl ToString) {
        if let Some(slot) = self.values.get_mut(key) {
            if slot.is_empty() {
                *slot = value.to_string();
            }
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("{} has no key {key}", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key);
        raw.parse().map_err(|_| Error::invalid(format!("bad value {raw:?} for {key}")))
    }

    pub fn optional_path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.str(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.optional_path(key).ok_or_else(|| Error::invalid(format!("{} needs --{key}", self.command)))
    }

    /// Resolved settings in config-file syntax, keys sorted.
    pub fn echo(&self) -> String {
        let mut out = format!("# {}\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_unknown_keys() {
        let mut s = Settings::new("t", &[("a", "1"), ("b", "")]);
        s.set("a", "2".into()).unwrap();
        s.apply_flags(&[("a", Some("3")), ("b", None)]).unwrap();
        assert_eq!(s.get::<u32>("a").unwrap(), 3);
        assert!(s.set("c", "x".into()).is_err());
        s.fill("b", 7);
        assert_eq!(s.echo(), "# t\na = 3\nb = 7\n");
        assert!(parse_config("a 1").is_err());
    }
}
