//! Tokeniser for the `name:key=v1,v2;key2=v3` spec strings used by the CLI.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Spec {
    pub raw: String,
    pub name: String,
    params: BTreeMap<String, Vec<String>>,
}

impl Spec {
    pub fn parse(raw: &str) -> Result<Spec> {
        let raw = raw.trim();
        let (name, rest) = match raw.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (raw, ""),
        };
        if name.is_empty() {
            return Err(Error::MalformedSpec {
                spec: raw.into(),
                reason: "missing family name".into(),
            });
        }
        let mut params: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for tok in rest.split([';', ',']).map(str::trim).filter(|t| !t.is_empty()) {
            if let Some((k, v)) = tok.split_once('=') {
                let k = k.trim().to_ascii_lowercase();
                if params.contains_key(&k) {
                    return Err(Error::MalformedSpec {
                        spec: raw.into(),
                        reason: format!("duplicate key `{k}`"),
                    });
                }
                params.insert(k.clone(), vec![v.trim().to_string()]);
                current = Some(k);
            } else if let Some(k) = &current {
                params.get_mut(k).unwrap().push(tok.to_string());
            } else {
                return Err(Error::MalformedSpec {
                    spec: raw.into(),
                    reason: format!("value `{tok}` without a key"),
                });
            }
        }
        Ok(Spec {
            raw: raw.into(),
            name: name.to_ascii_lowercase(),
            params,
        })
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MalformedSpec {
            spec: self.raw.clone(),
            reason: reason.into(),
        }
    }

    pub fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.params.contains_key(key)
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let vals = self
            .params
            .get(key)
            .ok_or_else(|| self.err(format!("missing key `{key}`")))?;
        vals.iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| self.err(format!("`{key}`: cannot parse `{v}` as a number")))
            })
            .collect()
    }

    pub fn num(&self, key: &str) -> Result<f64> {
        let v = self.list(key)?;
        if v.len() != 1 {
            return Err(self.err(format!("`{key}` expects a single value")));
        }
        Ok(v[0])
    }

    pub fn num_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.has(key) {
            self.num(key)
        } else {
            Ok(default)
        }
    }

    pub fn text(&self, key: &str) -> Result<String> {
        let vals = self
            .params
            .get(key)
            .ok_or_else(|| self.err(format!("missing key `{key}`")))?;
        Ok(vals.join(","))
    }

    pub fn malformed(&self, reason: impl Into<String>) -> Error {
        self.err(reason)
    }
}

/// Reads a two-column `x,y` CSV with an optional header row.
pub(crate) fn read_xy_csv(path: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (a, b) = match (cols.next(), cols.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::MalformedSpec {
                    spec: path.into(),
                    reason: format!("line {} needs two columns", i + 1),
                })
            }
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if xs.is_empty() => continue, // header
            _ => {
                return Err(Error::MalformedSpec {
                    spec: path.into(),
                    reason: format!("line {}: non-numeric row", i + 1),
                })
            }
        }
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenises_lists_and_scalars() {
        let s = Spec::parse("hyperexp:w=0.5,0.5;r=0.5,2").unwrap();
        assert_eq!(s.name, "hyperexp");
        assert_eq!(s.list("w").unwrap(), vec![0.5, 0.5]);
        assert_eq!(s.list("r").unwrap(), vec![0.5, 2.0]);
        let s = Spec::parse("uniform:a=0,b=2").unwrap();
        assert_eq!(s.num("a").unwrap(), 0.0);
        assert_eq!(s.num("b").unwrap(), 2.0);
    }

    #[test]
    fn rejects_orphan_values_and_duplicates() {
        assert!(Spec::parse("exp:1").is_err());
        assert!(Spec::parse("exp:rate=1,rate=2").is_err());
        assert!(Spec::parse(":rate=1").is_err());
    }
}
