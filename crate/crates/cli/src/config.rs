//! Flat `key = value` configuration with flag overrides.
//!
//! A run's parameters come from two layers: an optional config file
//! (`--config PATH`, one `key = value` per line, `#` comments) and
//! command-line flags (`--key value` or `--key=value`), with flags winning.
//! Each subcommand then pulls its parameters through the typed getters here;
//! every getter records the value it resolved (default or explicit) so the
//! run manifest can echo the complete effective configuration. After a
//! subcommand has read everything it knows, [`ConfigMap::finish`] rejects the
//! first entry nothing consumed — a misspelled key fails loudly instead of
//! silently running on defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::errors::CliError;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    /// 1-based config-file line, `None` for command-line flags.
    line: Option<usize>,
    used: bool,
}

#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, Entry>,
    /// Every parameter the subcommand resolved, explicit or default,
    /// in the order keys sort — echoed into the manifest.
    resolved: BTreeMap<String, serde_json::Value>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Layer in a config file's contents. Later layers override earlier ones,
    /// so call this before [`ConfigMap::apply_flags`].
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::TypeError {
                    key: content.to_string(),
                    line: Some(line),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::TypeError {
                    key: content.to_string(),
                    line: Some(line),
                    message: "expected `key = value`".into(),
                });
            }
            if value.is_empty() {
                return Err(CliError::MissingRequired {
                    key,
                    line: Some(line),
                });
            }
            self.entries.insert(
                key,
                Entry {
                    value,
                    line: Some(line),
                    used: false,
                },
            );
        }
        Ok(())
    }

    /// Layer in `--key value` / `--key=value` flags. Dashes in flag names map
    /// to underscores, so `--half-width 24` and `half_width = 24` name the
    /// same parameter.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(body) = arg.strip_prefix("--") else {
                return Err(CliError::Usage(format!(
                    "unexpected argument `{arg}` (parameters are passed as --key value)"
                )));
            };
            let (key, value) = match body.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let Some(value) = it.next() else {
                        return Err(CliError::MissingRequired {
                            key: body.replace('-', "_"),
                            line: None,
                        });
                    };
                    (body.to_string(), value.clone())
                }
            };
            let key = key.replace('-', "_");
            if key.is_empty() || value.is_empty() {
                return Err(CliError::MissingRequired { key, line: None });
            }
            self.entries.insert(
                key,
                Entry {
                    value,
                    line: None,
                    used: false,
                },
            );
        }
        Ok(())
    }

    fn take(&mut self, key: &str) -> Option<(String, Option<usize>)> {
        let entry = self.entries.get_mut(key)?;
        entry.used = true;
        Some((entry.value.clone(), entry.line))
    }

    fn record(&mut self, key: &str, value: serde_json::Value) {
        self.resolved.insert(key.to_string(), value);
    }

    /// The complete resolved parameter set, for the run manifest.
    pub fn resolved(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.resolved
    }

    /// Fail on the first key no getter consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        for (key, entry) in &self.entries {
            if !entry.used {
                return Err(CliError::UnknownKey {
                    key: key.clone(),
                    line: entry.line,
                });
            }
        }
        Ok(())
    }

    pub fn get_f64(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => raw.parse::<f64>().map_err(|_| CliError::TypeError {
                key: key.to_string(),
                line,
                message: format!("expected a number, got `{raw}`"),
            })?,
            None => default,
        };
        self.record(key, json_f64(v));
        Ok(v)
    }

    pub fn get_usize(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => raw.parse::<usize>().map_err(|_| CliError::TypeError {
                key: key.to_string(),
                line,
                message: format!("expected a non-negative integer, got `{raw}`"),
            })?,
            None => default,
        };
        self.record(key, serde_json::Value::from(v));
        Ok(v)
    }

    /// An axis point count: a positive integer that must be a power of two
    /// (the spectral propagator's transform requires it).
    pub fn get_pow2(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        let (v, line) = match self.take(key) {
            Some((raw, line)) => {
                let v = raw.parse::<usize>().map_err(|_| CliError::TypeError {
                    key: key.to_string(),
                    line,
                    message: format!("expected a non-negative integer, got `{raw}`"),
                })?;
                (v, line)
            }
            None => (default, None),
        };
        if v == 0 || !v.is_power_of_two() {
            return Err(CliError::TypeError {
                key: key.to_string(),
                line,
                message: format!("must be a power of two, got {v}"),
            });
        }
        self.record(key, serde_json::Value::from(v));
        Ok(v)
    }

    pub fn get_u64(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => raw.parse::<u64>().map_err(|_| CliError::TypeError {
                key: key.to_string(),
                line,
                message: format!("expected a non-negative integer, got `{raw}`"),
            })?,
            None => default,
        };
        self.record(key, serde_json::Value::from(v));
        Ok(v)
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => match raw.as_str() {
                "true" | "1" | "yes" | "on" => true,
                "false" | "0" | "no" | "off" => false,
                _ => {
                    return Err(CliError::TypeError {
                        key: key.to_string(),
                        line,
                        message: format!("expected true/false, got `{raw}`"),
                    })
                }
            },
            None => default,
        };
        self.record(key, serde_json::Value::from(v));
        Ok(v)
    }

    pub fn get_str(&mut self, key: &str, default: &str) -> Result<String, CliError> {
        let v = match self.take(key) {
            Some((raw, _)) => raw,
            None => default.to_string(),
        };
        self.record(key, serde_json::Value::from(v.as_str()));
        Ok(v)
    }

    /// An angle in radians. Accepts plain numbers and the π forms angles are
    /// naturally quoted in: `pi`, `2pi`, `pi/4`, `3pi/4`, `-pi/3`.
    pub fn get_angle(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => parse_angle(&raw).ok_or_else(|| CliError::TypeError {
                key: key.to_string(),
                line,
                message: format!("expected an angle (e.g. 0.7854, pi/4, 3pi/4), got `{raw}`"),
            })?,
            None => default,
        };
        self.record(key, json_f64(v));
        Ok(v)
    }

    /// A comma-separated list of numbers, e.g. `times = 0.5,1,2`.
    pub fn get_f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = match self.take(key) {
            Some((raw, line)) => {
                let mut out = Vec::new();
                for part in raw.split(',') {
                    let part = part.trim();
                    out.push(part.parse::<f64>().map_err(|_| CliError::TypeError {
                        key: key.to_string(),
                        line,
                        message: format!("expected comma-separated numbers, got `{part}`"),
                    })?);
                }
                out
            }
            None => default.to_vec(),
        };
        self.record(
            key,
            serde_json::Value::from(v.iter().map(|&x| json_f64(x)).collect::<Vec<_>>()),
        );
        Ok(v)
    }
}

fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

/// Parse `[-][N]pi[/D]` or a plain float.
fn parse_angle(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s),
    };
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (s, None),
    };
    let num = num.strip_suffix("pi")?;
    let mult = if num.is_empty() {
        1.0
    } else {
        num.parse::<f64>().ok()?
    };
    let div = match den {
        Some(d) => {
            let d = d.trim().parse::<f64>().ok()?;
            if d == 0.0 {
                return None;
            }
            d
        }
        None => 1.0,
    };
    let v = sign * mult * std::f64::consts::PI / div;
    v.is_finite().then_some(v)
}

/// Render the key tables in `--help`: `key = default  description` lines.
pub fn help_table(rows: &[(&str, &str, &str)]) -> String {
    let keyw = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let defw = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, default, desc) in rows {
        let _ = writeln!(out, "      {key:<keyw$}  {default:<defw$}  {desc}");
    }
    out
}
