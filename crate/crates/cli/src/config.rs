//! `--config FILE`: a TOML file whose top-level keys and `[subcommand]`
//! section become command-line flags unless the same flag was given
//! explicitly. Keys are flag names with `-` or `_`.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Command};
use sketchsem::seed::SEED_ENV;

/// Removes `--config FILE` from `args` and returns the file path, if any.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<OsString>> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                bail!("--config needs a file");
            }
            args.remove(i);
            return Ok(Some(args.remove(i)));
        }
        if let Some(v) = a.strip_prefix("--config=") {
            args.remove(i);
            return Ok(Some(v.into()));
        }
        i += 1;
    }
    Ok(None)
}

fn scalar_text(key: &str, v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(n) => n.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        _ => bail!("config key {key}: unsupported value {v}"),
    })
}

/// Returns `args` with the config file's settings appended as flags.
pub fn expand(mut args: Vec<OsString>, cli: &Command) -> Result<Vec<OsString>> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;

    let Some(sub_name) = args.iter().skip(1).map(|a| a.to_string_lossy()).find(|a| !a.starts_with('-')) else {
        return Ok(args);
    };
    let Some(sub) = cli.get_subcommands().find(|c| c.get_name() == sub_name) else {
        return Ok(args);
    };
    let explicit: Vec<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();

    // Section values override top-level ones; top-level keys that the
    // subcommand does not take are ignored, unknown section keys are errors.
    let mut settings: Vec<(String, toml::Value, bool)> = table
        .iter()
        .filter(|(_, v)| !v.is_table())
        .map(|(k, v)| (k.replace('_', "-"), v.clone(), false))
        .collect();
    if let Some(section) = table.get(sub.get_name()) {
        let section = section
            .as_table()
            .with_context(|| format!("config key {} must be a section", sub.get_name()))?;
        for (k, v) in section {
            let name = k.replace('_', "-");
            settings.retain(|(n, _, _)| *n != name);
            settings.push((name, v.clone(), true));
        }
    }

    for (name, value, strict) in settings {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(name.as_str())) else {
            if strict {
                bail!("config [{}]: unknown key {name}", sub.get_name());
            }
            continue;
        };
        if explicit.contains(&name) {
            continue;
        }
        // The environment seed outranks a configured one.
        if name == "seed" && std::env::var_os(SEED_ENV).is_some() {
            continue;
        }
        let values = match &value {
            toml::Value::Array(items) => items.clone(),
            v => vec![v.clone()],
        };
        for v in values {
            if matches!(arg.get_action(), ArgAction::SetTrue) {
                match v {
                    toml::Value::Boolean(true) => args.push(format!("--{name}").into()),
                    toml::Value::Boolean(false) => {}
                    other => bail!("config key {name}: expected true or false, got {other}"),
                }
            } else {
                args.push(format!("--{name}={}", scalar_text(&name, &v)?).into());
            }
        }
    }
    Ok(args)
}
