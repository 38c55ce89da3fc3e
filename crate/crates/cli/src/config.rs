//! `key=value` config files. Each key names a long flag of the subcommand;
//! flags given on the command line take precedence.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{ArgAction, Command};

use crate::error::CliError;

/// Returns `argv` with the entries of the `--config` file spliced in after the
/// subcommand name, skipping keys the command line already sets.
pub fn expand(argv: Vec<OsString>, root: &Command) -> Result<Vec<OsString>, CliError> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(path) = config_path(&args) else {
        return Ok(argv);
    };
    let Some(sub) = args.get(1).and_then(|name| root.find_subcommand(name)) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(Path::new(&path), e))?;

    let mut injected = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| CliError::Input {
            path: path.clone().into(),
            line: n + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| bad("expected `key=value`".into()))?;
        if key == "config" {
            return Err(bad("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| bad(format!("unknown key `{key}` for `{}`", sub.get_name())))?;
        if given_on_command_line(&args[2..], key, arg.get_short()) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                _ => return Err(bad(format!("`{key}` takes true or false"))),
            },
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value.to_string());
            }
        }
    }

    let mut out: Vec<OsString> = argv[..2].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn given_on_command_line(args: &[String], long: &str, short: Option<char>) -> bool {
    let flag = format!("--{long}");
    let prefix = format!("--{long}=");
    args.iter().any(|a| {
        a == &flag
            || a.starts_with(&prefix)
            || short
                .is_some_and(|s| a.len() >= 2 && a.starts_with('-') && !a.starts_with("--") && a[1..].starts_with(s))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::Cli;
    use clap::CommandFactory;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn splices_values_and_respects_command_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# defaults\nlambda = 0.5\n\ncompare-closed=true\ntol=1e-6").unwrap();
        let p = f.path().to_str().unwrap();
        let out = expand(os(&["dsm", "mmf", "--config", p, "--tol", "1e-3"]), &Cli::command()).unwrap();
        let out: Vec<String> = out.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(
            out,
            vec![
                "dsm",
                "mmf",
                "--lambda",
                "0.5",
                "--compare-closed",
                "--config",
                p,
                "--tol",
                "1e-3"
            ]
        );
    }

    #[test]
    fn rejects_unknown_keys_with_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "lambda=0.5\nbogus=1").unwrap();
        let p = f.path().to_str().unwrap();
        match expand(os(&["dsm", "mmf", "--config", p]), &Cli::command()) {
            Err(CliError::Input { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
