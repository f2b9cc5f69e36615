use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use crate::args::Command;

const GLOBAL_VALUE_FLAGS: [&str; 3] = ["--seed", "--out", "--config"];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(v) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

fn subcommand_position(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let s = argv[i].to_string_lossy();
        if GLOBAL_VALUE_FLAGS.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if Command::NAMES.contains(&s.as_ref()) {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Parses a flat `key=value` file into flag tokens. `true` turns a key into
/// a bare switch and `false` drops it.
pub fn parse_config(text: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected key=value, got '{line}'", k + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key.starts_with('-') {
            return Err(format!("line {}: invalid key '{key}'", k + 1));
        }
        if key == "config" {
            return Err(format!(
                "line {}: config files cannot include other config files",
                k + 1
            ));
        }
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => tokens.push(format!("--{key}={value}")),
        }
    }
    Ok(tokens)
}

/// Splices config-file flags in front of the user's flags, right after the
/// subcommand, so that explicit flags take precedence.
pub fn expand_args(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let tokens = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Some(pos) = subcommand_position(&argv) else {
        return Ok(argv);
    };
    let mut out = argv[..=pos].to_vec();
    out.extend(tokens.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
