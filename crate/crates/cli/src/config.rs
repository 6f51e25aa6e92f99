//! `key=value` config files folded into the command line.
//!
//! Each entry becomes `--key=value` placed directly after the subcommand, so
//! flags given on the command line come later and win, and unknown keys are
//! rejected by the argument parser exactly like unknown flags.

use std::fs;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.starts_with('-') || key == "config" {
            bail!("config line {}: invalid key {key:?}", n + 1);
        }
        entries.push((key.to_string(), value.to_string()));
    }
    Ok(entries)
}

/// Rewrites `argv` with the contents of any `--config FILE` inserted as
/// ordinary flags after the subcommand.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config_path = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            let path = iter.next().context("--config needs a file path")?;
            config_path = Some(path);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config_path = Some(path.to_string());
        } else {
            out.push(arg);
        }
    }
    let Some(path) = config_path else {
        return Ok(out);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let injected = parse(&text)?.into_iter().map(|(k, v)| format!("--{k}={v}"));
    // argv[0], then the subcommand, then config entries, then the rest
    let split = out.len().min(2);
    let tail = out.split_off(split);
    out.extend(injected);
    out.extend(tail);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let e = parse("# comment\nqf = 15\n\nepochs=3\n").unwrap();
        assert_eq!(
            e,
            vec![("qf".into(), "15".into()), ("epochs".into(), "3".into())]
        );
        assert!(parse("qf 15").is_err());
        assert!(parse("--qf=15").is_err());
    }

    #[test]
    fn entries_go_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "qf=15\n").unwrap();
        let argv = [
            "signret",
            "train",
            "--config",
            path.to_str().unwrap(),
            "--qf",
            "90",
        ];
        let out = expand(argv.iter().map(|s| s.to_string()).collect()).unwrap();
        assert_eq!(out, ["signret", "train", "--qf=15", "--qf", "90"]);
    }
}
