//! INI-style `key = value` files with `[section]` headers.
//!
//! Keys before the first header are global. A section named after a
//! subcommand (`figure`, `mc`, ...) overrides the global keys for it.

use std::collections::HashMap;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    sections: HashMap<String, HashMap<String, String>>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| format!("line {}: unterminated section header", i + 1))?;
                section = normalize(name);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(format!("line {}: empty key", i + 1));
            }
            cfg.sections.entry(section.clone()).or_default().insert(key, v.trim().to_string());
        }
        Ok(cfg)
    }

    /// Value for `key` in `section`, falling back to the global keys.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        let key = normalize(key);
        self.sections
            .get(section)
            .and_then(|s| s.get(&key))
            .or_else(|| self.sections.get("").and_then(|s| s.get(&key)))
            .map(String::as_str)
    }
}
