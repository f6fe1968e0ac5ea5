//! Output files: `report.json`, CSV tables with a `#` provenance block and
//! two-column timestamp text.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::detection::TimestampSeries;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const TOOL: &str = "sagnac";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a table or report came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub scenario_name: String,
    pub scenario_sha256: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn new(subcommand: &str, scenario: &Scenario, seeds: &[u64]) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            subcommand: subcommand.into(),
            scenario_name: scenario.name.clone(),
            scenario_sha256: scenario.hash(),
            seeds: seeds.to_vec(),
        }
    }

    fn comment_block(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# {} {}\n# subcommand: {}\n# scenario: {}\n# scenario_sha256: {}\n# seeds: {}\n",
            self.tool,
            self.version,
            self.subcommand,
            self.scenario_name,
            self.scenario_sha256,
            seeds.join(" ")
        )
    }
}

/// A flat table; cells are preformatted strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut s = provenance.comment_block();
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Formats a float for tables; the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub scenario: Scenario,
    pub results: serde_json::Value,
    /// Files written next to the report.
    pub files: Vec<String>,
}

/// Collects outputs and writes them into one directory.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn table(&mut self, table: &Table, provenance: &Provenance) -> Result<()> {
        self.write(&format!("{}.csv", table.name), &table.to_csv(provenance))
    }

    /// Both detectors of one acquisition, merged in time order.
    pub fn timestamps(&mut self, name: &str, d0: &TimestampSeries, d1: &TimestampSeries, provenance: &Provenance) -> Result<()> {
        self.write(name, &timestamp_text(d0, d1, provenance))
    }

    pub fn finish(mut self, provenance: Provenance, scenario: &Scenario, results: serde_json::Value) -> Result<Report> {
        self.files.sort();
        let report = Report {
            provenance,
            scenario: scenario.clone(),
            results,
            files: self.files.clone(),
        };
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        self.write("report.json", &(text + "\n"))?;
        Ok(report)
    }
}

/// Two-column text, `seconds detector`, merged over both detectors.
pub fn timestamp_text(d0: &TimestampSeries, d1: &TimestampSeries, provenance: &Provenance) -> String {
    let mut s = provenance.comment_block();
    s.push_str("# time_s detector\n");
    let (a, b) = (d0.times(), d1.times());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            let _ = writeln!(s, "{:e} {}", a[i], d0.detector);
            i += 1;
        } else {
            let _ = writeln!(s, "{:e} {}", b[j], d1.detector);
            j += 1;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{read_timestamps, DetectorId};
    use crate::scenario::parse_scenario;

    fn scenario() -> Scenario {
        parse_scenario(r#"{"schema_version": 1, "name": "t", "layout": {"segments": [{"length_km": 20}]}}"#).unwrap()
    }

    #[test]
    fn csv_has_provenance_then_header() {
        let prov = Provenance::new("simulate", &scenario(), &[3, 4]);
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![num(1.5), num(2.0)]);
        let csv = t.to_csv(&prov);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# sagnac"));
        assert!(lines.iter().any(|l| l.starts_with("# scenario_sha256: ") && l.len() == 19 + 64));
        assert!(lines.contains(&"# seeds: 3 4"));
        let body: Vec<&str> = lines.into_iter().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec!["a,b", "1.5,2"]);
    }

    #[test]
    fn merged_timestamps_read_back() {
        let d0 = TimestampSeries::new(vec![1e-6, 5e-6, 9e-6], DetectorId::D0, 1e-5, 0.0).unwrap();
        let d1 = TimestampSeries::new(vec![2e-6, 3e-6], DetectorId::D1, 1e-5, 0.0).unwrap();
        let prov = Provenance::new("simulate", &scenario(), &[1]);
        let text = timestamp_text(&d0, &d1, &prov);
        let [r0, r1] = read_timestamps(text.as_bytes(), 1e-5, 0.0).unwrap();
        assert_eq!(r0.times(), d0.times());
        assert_eq!(r1.times(), d1.times());
        let times: Vec<f64> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}
