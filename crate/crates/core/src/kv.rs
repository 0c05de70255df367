//! Flat `key = value` text used for run configs and checkpoint headers.
//! Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Result, TctnError};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            TctnError::config(format!(
                "line {}: expected key = value, got {raw:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(TctnError::config(format!("line {}: empty key", lineno + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn render(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// A set of pairs that must each be consumed exactly once.
#[derive(Debug, Default)]
pub struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k.clone(), v).is_some() {
                return Err(TctnError::config(format!("duplicate key {k:?}")));
            }
        }
        Ok(Entries { map })
    }

    pub fn take<V: FromStr>(&mut self, key: &str) -> Result<Option<V>>
    where
        V::Err: Display,
    {
        self.map
            .remove(key)
            .map(|raw| {
                raw.parse::<V>()
                    .map_err(|e| TctnError::config(format!("{key} = {raw:?}: {e}")))
            })
            .transpose()
    }

    pub fn take_into<V: FromStr>(&mut self, key: &str, slot: &mut V) -> Result<()>
    where
        V::Err: Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Fails if any key was left unconsumed.
    pub fn finish(self) -> Result<()> {
        if self.map.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.map.into_keys().collect();
            Err(TctnError::config(format!(
                "unknown keys: {}",
                keys.join(", ")
            )))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn into_pairs(self) -> Vec<(String, String)> {
        self.map.into_iter().collect()
    }
}
