//! TOML config files. Values become argument defaults, so anything given on
//! the command line takes precedence.
//!
//! Top-level keys may be global options or options of the subcommand being
//! run; a `[subcommand]` table holds options for that subcommand only and
//! overrides top-level values.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use clap::{ArgMatches, Command};

use crate::UsageError;

fn is_internal(id: &str) -> bool {
    matches!(id, "help" | "version" | "config")
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

/// Long option name -> argument id, for arguments that accept config values.
/// With `own_only`, arguments propagated from the parent are skipped.
fn long_names(cmd: &Command, own_only: bool) -> BTreeMap<String, String> {
    cmd.get_arguments()
        .filter(|a| !is_internal(a.get_id().as_str()) && !(own_only && a.is_global_set()))
        .filter_map(|a| Some((a.get_long()?.to_owned(), a.get_id().to_string())))
        .collect()
}

fn suggest(key: &str, known: &BTreeSet<String>) -> String {
    known
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), k))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| format!(" (did you mean `{k}`?)"))
        .unwrap_or_default()
}

fn to_arg_value(key: &str, value: &toml::Value, is_flag: bool) -> Result<String, UsageError> {
    use toml::Value;
    let mismatch = |want: &str| UsageError(format!("config key `{key}`: expected {want}, found {}", value.type_str()));
    if is_flag {
        return match value {
            Value::Boolean(b) => Ok(b.to_string()),
            _ => Err(mismatch("a boolean")),
        };
    }
    let scalar = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        _ => Err(mismatch("a string or number")),
    };
    match value {
        Value::Array(items) => Ok(items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(",")),
        Value::Boolean(_) => Err(mismatch("a string or number")),
        v => scalar(v),
    }
}

fn takes_no_value(cmd: &Command, id: &str) -> bool {
    cmd.get_arguments()
        .find(|a| a.get_id() == id)
        .is_some_and(|a| !a.get_action().takes_values())
}

/// Reads `path` and installs its values as defaults on `cmd` for the
/// subcommand `active`.
pub fn apply(mut cmd: Command, path: &Path, active: &str) -> anyhow::Result<Command> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| anyhow!(UsageError(format!("config {}: {e}", path.display()))))?;

    // Introspect a built copy (global options propagated); defaults are
    // installed on the unbuilt original so they propagate when it is built.
    let mut built = cmd.clone();
    built.build();
    let global = long_names(&built, false);
    let subs: BTreeMap<String, BTreeMap<String, String>> = built
        .get_subcommands()
        .map(|s| (s.get_name().to_owned(), long_names(s, true)))
        .collect();
    let all_keys: BTreeSet<String> = global
        .keys()
        .chain(subs.values().flat_map(|m| m.keys()))
        .cloned()
        .collect();

    let mut global_defaults: Vec<(String, String)> = Vec::new();
    let mut top_sub: Vec<(String, String)> = Vec::new();
    let mut table_sub: Vec<(String, String)> = Vec::new();
    let active_args = &subs[active];
    let active_cmd = cmd.find_subcommand(active).expect("known subcommand").clone();

    for (raw_key, value) in &table {
        if let toml::Value::Table(inner) = value {
            let Some(sub_args) = subs.get(raw_key.as_str()) else {
                let names: BTreeSet<String> = subs.keys().cloned().collect();
                return Err(UsageError(format!(
                    "config {}: unknown section [{raw_key}]{}",
                    path.display(),
                    suggest(raw_key, &names)
                ))
                .into());
            };
            for (k, v) in inner {
                let key = normalize(k);
                let id = if let Some(id) = sub_args.get(&key) {
                    id
                } else if let Some(id) = global.get(&key) {
                    // Global options inside a section apply only when that
                    // subcommand runs.
                    if raw_key == active {
                        global_defaults.push((id.clone(), to_arg_value(k, v, takes_no_value(&cmd, id))?));
                    }
                    continue;
                } else {
                    let known: BTreeSet<String> = sub_args.keys().chain(global.keys()).cloned().collect();
                    return Err(UsageError(format!(
                        "config {}: unknown key `{k}` in [{raw_key}]{}",
                        path.display(),
                        suggest(&key, &known)
                    ))
                    .into());
                };
                if raw_key == active {
                    let sub = cmd.find_subcommand(active).expect("known subcommand");
                    table_sub.push((id.clone(), to_arg_value(k, v, takes_no_value(sub, id))?));
                }
            }
            continue;
        }
        let key = normalize(raw_key);
        if let Some(id) = global.get(&key) {
            global_defaults.push((id.clone(), to_arg_value(raw_key, value, takes_no_value(&cmd, id))?));
        } else if let Some(id) = active_args.get(&key) {
            top_sub.push((id.clone(), to_arg_value(raw_key, value, takes_no_value(&active_cmd, id))?));
        } else if !all_keys.contains(&key) {
            return Err(UsageError(format!(
                "config {}: unknown key `{raw_key}`{}",
                path.display(),
                suggest(&key, &all_keys)
            ))
            .into());
        }
        // Keys of other subcommands are ignored at top level.
    }

    for (id, v) in global_defaults {
        cmd = cmd.mut_arg(id, |a| a.default_value(v));
    }
    for (id, v) in top_sub.into_iter().chain(table_sub) {
        cmd = cmd.mut_subcommand(active, |s| s.mut_arg(id, |a| a.default_value(v)));
    }
    Ok(cmd)
}

/// Every option value in effect (command line, environment, config or
/// built-in default), keyed by long name.
pub fn effective(cmd: &Command, matches: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let (name, sub_matches) = matches.subcommand().expect("subcommand required");
    let sub_cmd = cmd.find_subcommand(name).expect("known subcommand");
    for a in sub_cmd.get_arguments() {
        let id = a.get_id().as_str();
        if matches!(id, "help" | "version") {
            continue;
        }
        let Some(long) = a.get_long() else { continue };
        if let Ok(Some(vals)) = sub_matches.try_get_raw(id) {
            let joined: Vec<String> = vals.map(|v| v.to_string_lossy().into_owned()).collect();
            out.insert(long.to_owned(), joined.join(","));
        }
    }
    out
}
