//! Plain-text `key=value` manifests. Every key is the long name of a CLI
//! flag; values given on the command line take precedence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::ArgAction;

use crate::error::{io_error, Error, Result};

/// One `key=value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
/// Underscores in keys are read as hyphens.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| Error::Config { path: path.to_path_buf(), line: n + 1, reason: reason.to_string() };
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value"))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(err("empty key"));
        }
        if out.iter().any(|e: &ConfigEntry| e.key == key) {
            return Err(err("duplicate key"));
        }
        out.push(ConfigEntry { key, value: v.trim().to_string(), line: n + 1 });
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<ConfigEntry>> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    parse_config(&text, path)
}

/// Value of `--config` in `argv`, if any.
pub fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn present(argv: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    argv.iter().map(|a| a.to_string_lossy()).any(|s| s == flag || s.starts_with(&prefix))
}

/// Appends config entries as flags to `argv` unless already given there.
/// Keys unknown to every subcommand are an error; keys that belong only to
/// other subcommands are skipped.
pub fn merge_config(mut argv: Vec<OsString>, entries: &[ConfigEntry], cmd: &clap::Command, path: &Path) -> Result<Vec<OsString>> {
    let sub = argv
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).cloned());
    let takes = |c: &clap::Command, key: &str| c.get_arguments().find(|a| a.get_long() == Some(key)).cloned();
    for ConfigEntry { key, value, line } in entries {
        let err = |reason: String| Error::Config { path: path.to_path_buf(), line: *line, reason };
        if key == "config" {
            return Err(err("config files cannot nest".into()));
        }
        let arg = takes(cmd, key).or_else(|| sub.as_ref().and_then(|s| takes(s, key)));
        let Some(arg) = arg else {
            let known_elsewhere = cmd.get_subcommands().any(|s| takes(s, key).is_some());
            if known_elsewhere {
                continue;
            }
            return Err(err(format!("unknown key {key:?}")));
        };
        if present(&argv, key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => argv.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(err(format!("{key} expects true or false"))),
            },
            _ => {
                argv.push(format!("--{key}").into());
                argv.push(value.into());
            }
        }
    }
    Ok(argv)
}

/// Reads `--config` from `argv`, if present, and merges it.
pub fn apply_config(argv: Vec<OsString>, cmd: &clap::Command) -> Result<Vec<OsString>> {
    match config_path(&argv) {
        Some(path) => {
            let entries = load_config(&path)?;
            merge_config(argv, &entries, cmd, &path)
        }
        None => Ok(argv),
    }
}
