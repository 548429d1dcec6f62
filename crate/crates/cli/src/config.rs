//! Config files as extra command-line flags.
//!
//! Top-level keys become global flags, a table named after the subcommand
//! supplies that subcommand's flags. `snake_case` keys map to `--kebab-case`
//! flags. Config flags are placed ahead of the user's own so the user's win.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

const GLOBAL_WITH_VALUE: [&str; 3] = ["--seed", "--format", "--config"];

/// Index of the subcommand token in `args` (which includes the program name)
/// and the config path, if one was given before the subcommand or anywhere
/// after it.
fn locate(args: &[OsString]) -> (Option<usize>, Option<PathBuf>) {
    let mut sub = None;
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if a == "--config" {
            if let Some(p) = args.get(i + 1) {
                config = Some(PathBuf::from(p));
            }
            i += 1;
        } else if sub.is_none() && GLOBAL_WITH_VALUE.contains(&a.as_ref()) {
            i += 1;
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(i);
        }
        i += 1;
    }
    (sub, config)
}

fn flag_args(table: &toml::Table, out: &mut Vec<OsString>) -> Result<()> {
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Table(_) => continue,
            toml::Value::Boolean(true) => out.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(v)?.into());
            }
        }
    }
    Ok(())
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("unsupported config value `{other}`"),
    })
}

/// Returns `args` with the flags from the config file spliced in.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let (sub, path) = locate(&args);
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    let mut globals = Vec::new();
    flag_args(&table, &mut globals)?;
    let Some(sub) = sub else {
        let mut out = vec![args[0].clone()];
        out.extend(globals);
        out.extend(args[1..].iter().cloned());
        return Ok(out);
    };
    let name = args[sub].to_string_lossy().into_owned();
    let mut local = Vec::new();
    for (k, v) in &table {
        if let toml::Value::Table(t) = v {
            if k == &name || k.replace('_', "-") == name {
                flag_args(t, &mut local)?;
            }
        }
    }
    let mut out = vec![args[0].clone()];
    out.extend(globals);
    out.extend(args[1..sub].iter().cloned());
    out.push(args[sub].clone());
    out.extend(local);
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn locates_subcommand_past_global_values() {
        let (sub, cfg) = locate(&os(&["x", "--seed", "5", "--config", "c.toml", "plan", "--target", "0.9"]));
        assert_eq!(sub, Some(5));
        assert_eq!(cfg, Some(PathBuf::from("c.toml")));
        assert_eq!(locate(&os(&["x", "plan", "--config=a"])).1, Some(PathBuf::from("a")));
    }

    #[test]
    fn splices_config_before_user_flags() {
        let dir = std::env::temp_dir().join(format!("dragonlab-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "seed = 3\n[plan]\ntarget = 0.9\nsizes = [\"10\", \"20\"]\n[derive]\nevents = true\n")
            .unwrap();
        let p = path.to_string_lossy().into_owned();
        let out = expand(os(&["x", "--config", &p, "plan", "--target", "0.5"])).unwrap();
        let s: Vec<String> = out.iter().map(|o| o.to_string_lossy().into_owned()).collect();
        assert_eq!(
            s,
            ["x", "--seed", "3", "--config", &p, "plan", "--sizes", "10,20", "--target", "0.9", "--target", "0.5"]
        );
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
