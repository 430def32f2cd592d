use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
pub fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(rest.into());
        }
    }
    None
}

/// Appends flags from a JSON object for every key not already on the command line.
///
/// Keys are flag names without dashes; `true` adds a bare switch, `false` and
/// `null` add nothing, arrays are joined with commas.
pub fn merge(argv: Vec<OsString>, config: &Path) -> Result<Vec<OsString>> {
    let text =
        fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let Value::Object(map) = value else {
        bail!("{} must hold a JSON object", config.display());
    };
    let given: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut out = argv;
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let present = given
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if present || key == "config" {
            continue;
        }
        match v {
            Value::Bool(true) => out.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Result<Vec<String>> = items.iter().map(scalar).collect();
                out.push(format!("{flag}={}", parts?.join(",")).into());
            }
            other => out.push(format!("{flag}={}", scalar(&other)?).into()),
        }
    }
    Ok(out)
}

fn scalar(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => bail!("config values must be scalars or arrays of scalars, got {v}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(|s| s.into()).collect()
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("exmp-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let file = dir.join("c.json");
        fs::write(
            &file,
            r#"{"seed": 3, "quick": true, "only": [1, 2], "n": 10}"#,
        )
        .unwrap();
        let argv = os(&["exmp", "verify-all", "--seed", "9"]);
        let merged = merge(argv, &file).unwrap();
        let merged: Vec<String> = merged
            .iter()
            .map(|a| a.to_string_lossy().into_owned())
            .collect();
        assert!(merged.contains(&"--quick".to_string()));
        assert!(merged.contains(&"--only=1,2".to_string()));
        assert!(merged.contains(&"--n=10".to_string()));
        assert!(!merged.iter().any(|a| a == "--seed=3"));
        assert_eq!(
            config_path(&os(&["x", "--config=a.json"])),
            Some("a.json".into())
        );
        fs::remove_dir_all(&dir).unwrap();
    }
}
