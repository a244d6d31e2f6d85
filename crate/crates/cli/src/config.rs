//! `--config` files and value lists.
//!
//! A config file holds `key = value` lines mirroring the long flags of a
//! subcommand (`#` starts a comment). Keys not given on the command line are
//! spliced in after the subcommand name, so explicit flags always win.

use std::fs;

/// Expands `--config PATH` (anywhere in `argv`) into flags.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config `{path}`: {e}"))?;
    let pairs = parse_config(&text)?;
    // position right after the subcommand (first non-flag after the binary)
    let at = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(rest.len());
    let present = |key: &str| {
        rest.iter()
            .any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")))
    };
    let mut extra = Vec::new();
    for (k, v) in pairs {
        if !present(&k) {
            extra.push(format!("--{k}={v}"));
        }
    }
    rest.splice(at..at, extra);
    Ok(rest)
}

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", no + 1))?;
        let k = k.trim().trim_start_matches("--").to_string();
        if k.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        if out.iter().any(|(x, _)| *x == k) {
            return Err(format!("config line {}: duplicate key `{k}`", no + 1));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// `a:step:b` (inclusive, tolerant to rounding) or a comma list.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if !(step > 0.0) || !(b >= a) {
                return Err(format!("range `{s}` needs step > 0 and end ≥ start"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| a + k as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("`{s}`: expected a:step:b or a comma list")),
    };
    if values.is_empty() {
        return Err("empty value list".into());
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format!("`{s}` contains a non-finite value"));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(format!("`{s}` must be strictly increasing"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_values("0:0.5:2").unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(parse_values("0:1:20").unwrap().len(), 21);
        assert_eq!(parse_values("1,2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert!(parse_values("2,1").is_err());
        assert!(parse_values("0:0:1").is_err());
        assert!(parse_values("x").is_err());
    }

    #[test]
    fn config_lines() {
        let p = parse_config("# comment\ndist = exp:rate=1\n\nh=0.02 # trailing\n").unwrap();
        assert_eq!(
            p,
            vec![("dist".into(), "exp:rate=1".into()), ("h".into(), "0.02".into())]
        );
        assert!(parse_config("nonsense").is_err());
        assert!(parse_config("h=1\nh=2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "h = 0.05\numax = 30\n").unwrap();
        let merged = merge_config(args(&[
            "fluidps",
            "renewal",
            "--config",
            path.to_str().unwrap(),
            "--h",
            "0.01",
        ]))
        .unwrap();
        assert_eq!(merged, args(&["fluidps", "renewal", "--umax=30", "--h", "0.01"]));
    }
}
