//! Flat key=value config files and flag/config/default precedence.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use tldakit::{Error, Result};

#[derive(Debug, Default)]
pub struct Settings {
    map: HashMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::invalid(format!(
                        "config line {} is not key=value: '{line}'",
                        lineno + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Settings { map })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::invalid(format!("config key '{key}' has unparsable value '{raw}'"))
            }),
        }
    }
}

/// Precedence: command-line flag, then config file, then default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    settings: &Settings,
    key: &str,
    default: T,
) -> Result<T> {
    Ok(match flag {
        Some(v) => v,
        None => settings.get::<T>(key)?.unwrap_or(default),
    })
}

pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    settings: &Settings,
    key: &str,
) -> Result<Option<T>> {
    Ok(match flag {
        Some(v) => Some(v),
        None => settings.get::<T>(key)?,
    })
}
