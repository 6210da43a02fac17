use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything needed to re-run a command and reproduce its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Command line after the program name.
    pub args: Vec<String>,
    /// Fully resolved parameters, including the frame config.
    pub config_echo: Value,
    pub seed: u64,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], config_echo: Value, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            config_echo,
            seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArgs {
    /// Also write the table as CSV here, with PATH.manifest.json beside it.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// `csv` prints the table on stdout and the JSON report on stderr.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Comma-separated table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Formats with 9 significant digits in plain decimal notation, falling back
/// to exponent notation for very large or small magnitudes.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

pub fn int(x: impl ToString) -> String {
    x.to_string()
}

pub fn to_json_line(value: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Emits a tabular command's results following [`OutputArgs`].
pub fn emit(out: &OutputArgs, report: &Value, manifest: &RunManifest, table: &Table) -> Result<()> {
    if let Some(path) = &out.csv {
        fs::write(path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        let side = sidecar(path);
        fs::write(&side, to_json_line(&serde_json::to_value(manifest)?)?)
            .with_context(|| format!("writing {}", side.display()))?;
    }
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match out.format {
        Format::Json => stdout.write_all(to_json_line(report)?.as_bytes())?,
        Format::Csv => {
            stdout.write_all(table.to_csv().as_bytes())?;
            eprint!("{}", to_json_line(report)?);
        }
    }
    Ok(())
}

pub fn print_json(report: &Value) -> Result<()> {
    std::io::stdout().write_all(to_json_line(report)?.as_bytes())?;
    Ok(())
}
