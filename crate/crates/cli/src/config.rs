//! Flat `key=value` settings: defaults, then a config file, then `--set`
//! overrides in command-line order. The last assignment of a key wins.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(render).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Parses `raw` as the JSON type of `like`.
fn typed(key: &str, raw: &str, like: &Value) -> Result<Value, CliError> {
    let bad = |what: &str| CliError::new("E_CONFIG", format!("key `{key}`: `{raw}` is not {what}"));
    Ok(match like {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| bad("a boolean"))?),
        Value::Number(n) if n.is_u64() => Value::from(raw.parse::<u64>().map_err(|_| bad("a nonnegative integer"))?),
        Value::Number(_) => {
            let x: f64 = raw.parse().map_err(|_| bad("a number"))?;
            serde_json::Number::from_f64(x).map(Value::Number).ok_or_else(|| bad("finite"))?
        }
        _ => Value::String(raw.to_string()),
    })
}

impl Settings {
    /// Registers every field of `defaults` (a flat struct) under `prefix`.
    pub fn with_struct<T: Serialize>(mut self, prefix: &str, defaults: &T) -> Self {
        let Value::Object(map) = serde_json::to_value(defaults).expect("settings structs serialize") else {
            panic!("settings defaults must be a struct");
        };
        for (k, v) in map {
            if k == "seed" {
                continue;
            }
            self.values.insert(format!("{prefix}{k}"), render(&v));
        }
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    fn assign(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::new(
                "E_CONFIG",
                format!(
                    "{origin}: unknown key `{key}` (known: {})",
                    self.values.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            )),
        }
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{}:{}", path.display(), i + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::new("E_CONFIG", format!("{origin}: expected key=value")))?;
            self.assign(k.trim(), v.trim(), &origin)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::new("E_CONFIG", format!("--set `{assignment}`: expected key=value")))?;
        self.assign(k.trim(), v.trim(), "--set")
    }

    /// Config file first, then overrides.
    pub fn resolve(mut self, file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        if let Some(f) = file {
            self.load_file(f)?;
        }
        for o in overrides {
            self.apply(o)?;
        }
        Ok(self)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| CliError::new("E_CONFIG", format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|e| CliError::new("E_CONFIG", format!("key `{key}`: cannot parse `{raw}`: {e}")))
    }

    /// Rebuilds a flat struct from the keys registered by `with_struct`,
    /// typing each value after the default's JSON type.
    pub fn to_struct<T: Serialize + DeserializeOwned>(&self, prefix: &str, defaults: &T) -> Result<T, CliError> {
        let Value::Object(mut map) = serde_json::to_value(defaults).expect("settings structs serialize") else {
            panic!("settings defaults must be a struct");
        };
        for (k, slot) in map.iter_mut() {
            let key = format!("{prefix}{k}");
            let Some(raw) = self.values.get(&key) else {
                continue;
            };
            *slot = match &*slot {
                Value::Array(items) => {
                    let like = items.first().cloned().unwrap_or(Value::from(0.0));
                    let parsed = raw
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| typed(&key, s, &like))
                        .collect::<Result<Vec<_>, _>>()?;
                    Value::Array(parsed)
                }
                other => typed(&key, raw, other)?,
            };
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| CliError::new("E_CONFIG", e.to_string()))
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Demo {
        n: usize,
        x: f64,
        seed: u64,
    }

    #[test]
    fn file_then_overrides_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        fs::write(&p, "# comment\nn = 3\nx=0.5\n").unwrap();
        let s = Settings::default()
            .with_struct("", &Demo { n: 1, x: 0.0, seed: 9 })
            .resolve(Some(&p), &["n=4".into(), "n=5".into()])
            .unwrap();
        let d: Demo = s.to_struct("", &Demo { n: 1, x: 0.0, seed: 9 }).unwrap();
        assert_eq!(d, Demo { n: 5, x: 0.5, seed: 9 });
        assert!(!s.resolved().contains_key("seed"));
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let s = Settings::default().with("a", 1);
        assert_eq!(s.clone().resolve(None, &["b=2".into()]).unwrap_err().code, "E_CONFIG");
        assert_eq!(s.clone().resolve(None, &["a".into()]).unwrap_err().code, "E_CONFIG");
        let s = s.resolve(None, &["a=zz".into()]).unwrap();
        assert!(s.get::<usize>("a").is_err());
    }

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Lists {
        sizes: Vec<usize>,
        rates: Vec<f64>,
    }

    #[test]
    fn list_fields_round_trip() {
        let d = Lists {
            sizes: vec![1, 2],
            rates: vec![0.5],
        };
        let s = Settings::default()
            .with_struct("g.", &d)
            .resolve(None, &["g.sizes=32".into(), "g.rates=0.0, 0.25".into()])
            .unwrap();
        assert_eq!(s.resolved()["g.rates"], "0.0, 0.25");
        let back: Lists = s.to_struct("g.", &d).unwrap();
        assert_eq!(back, Lists { sizes: vec![32], rates: vec![0.0, 0.25] });
        assert!(s.clone().resolve(None, &["g.sizes=1,x".into()]).unwrap().to_struct("g.", &d).is_err());
    }
}
