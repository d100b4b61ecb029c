use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes `text` to `out`, or standard output when absent.
pub(crate) fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub(crate) fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    emit(out, &format!("{}\n", serde_json::to_string(value)?))
}

/// Row-major matrix given on the command line as `"1,0;0,1"`.
#[derive(Debug, Clone)]
pub(crate) struct Rows(pub Vec<Vec<f64>>);

pub(crate) fn parse_matrix(s: &str) -> Result<Rows, String> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
                .collect()
        })
        .collect::<Result<_, _>>()
        .map(Rows)
}
