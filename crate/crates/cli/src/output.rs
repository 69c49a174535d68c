//! CSV and JSON writers. Both embed the schema version and resolved config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use extremal::config::{RunConfig, SCHEMA_VERSION};

use crate::CliError;

pub fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Some(p) = &cfg.out_dir {
        return PathBuf::from(p);
    }
    std::env::var_os("EXTREMAL_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// A table with a header and pre-formatted cells.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
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

    fn csv(&self, command: &str, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# schema_version={SCHEMA_VERSION} command={command}");
        let _ = writeln!(
            s,
            "# config={}",
            serde_json::to_string(cfg).unwrap_or_default()
        );
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

/// Writes `<command>.csv` and `<command>.json` and echoes the table.
pub fn write<T: Serialize>(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    table: &Table,
    detail: &T,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let csv = table.csv(command, cfg);
    std::fs::write(dir.join(format!("{command}.csv")), &csv)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "columns": table.header,
        "rows": table.rows,
        "detail": detail,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::write(dir.join(format!("{command}.json")), text + "\n")?;
    print!(
        "{}",
        csv.lines()
            .skip(2)
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    Ok(())
}

pub fn f(x: f64) -> String {
    if x == 0.0 || (x.is_finite() && (1e-4..1e12).contains(&x.abs())) {
        format!("{x}")
    } else if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "NA".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), f)
}
