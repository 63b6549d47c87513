//! Files written by `run` and read back by `compare`.
//!
//! A run directory holds `index.json`, `summary.json`, `report.json`,
//! `timeseries.csv` and `snapshots/s{i}_k{k:06}.csv`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use gradflow_core::diagnostics::{DiagnosticsReport, TimeSeries};
use gradflow_core::{Density, Grid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SNAPSHOT_DIR: &str = "snapshots";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn grid_header(g: &Grid) -> String {
    if g.dim() == 1 {
        format!("# grid: 1,{},{},{}", num(g.lower(0)), num(g.upper(0)), g.cells(0))
    } else {
        format!(
            "# grid: 2,{},{},{},{},{},{}",
            num(g.lower(0)),
            num(g.lower(1)),
            num(g.upper(0)),
            num(g.upper(1)),
            g.cells(0),
            g.cells(1)
        )
    }
}

fn parse_grid_header(line: &str) -> Result<Grid, String> {
    let body = line
        .trim()
        .strip_prefix("# grid:")
        .ok_or_else(|| "missing `# grid:` header".to_string())?;
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    let f = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
    let u = |s: &str| s.parse::<usize>().map_err(|e| format!("bad count `{s}`: {e}"));
    let g = match parts.as_slice() {
        ["1", lo, hi, n] => Grid::new_1d(f(lo)?, f(hi)?, u(n)?),
        ["2", lo0, lo1, hi0, hi1, n0, n1] => {
            Grid::new_2d([f(lo0)?, f(lo1)?], [f(hi0)?, f(hi1)?], [u(n0)?, u(n1)?])
        }
        _ => return Err(format!("malformed grid header `{line}`")),
    };
    g.map_err(|e| e.to_string())
}

pub fn write_snapshot(path: &Path, rho: &Density) -> CliResult<()> {
    let g = rho.grid();
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    writeln!(file, "{}", grid_header(g)).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if g.dim() == 1 {
        w.write_record(["index", "x", "value"])
            .map_err(|e| csv_err(path, e))?;
    } else {
        w.write_record(["index", "x", "y", "value"])
            .map_err(|e| csv_err(path, e))?;
    }
    for (k, &v) in rho.values().iter().enumerate() {
        let c = g.center(k);
        let mut row = vec![k.to_string(), num(c[0])];
        if g.dim() == 2 {
            row.push(num(c[1]));
        }
        row.push(num(v));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a snapshot; values are rescaled to unit mass.
pub fn read_snapshot(path: &Path) -> CliResult<Density> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let grid = parse_grid_header(&first).map_err(bad)?;
    let mut r = csv::Reader::from_reader(reader);
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let k: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad index in row {}", seen + 1)))?;
        let v: f64 = rec
            .get(rec.len().saturating_sub(1))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad value in row {}", seen + 1)))?;
        if k >= grid.len() || !values[k].is_nan() {
            return Err(bad(format!("index {k} out of range or repeated")));
        }
        values[k] = v;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(bad(format!("expected {} rows, found {seen}", grid.len())));
    }
    Density::new(grid, values).map_err(|e| bad(e.to_string()))
}

pub fn snapshot_name(species: usize, level: usize) -> String {
    format!("{SNAPSHOT_DIR}/s{species}_k{level:06}.csv")
}

/// Levels `0, N, 2N, …` and the last one: `⌈n/N⌉ + 1` in total.
pub fn recorded_levels(steps: usize, every: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=steps).step_by(every).collect();
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

pub fn write_timeseries(path: &Path, series: &TimeSeries) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["t".to_string()];
    for i in 0..series.species.len() {
        for col in ["mass", "M", "F", "V", "W2sq_increment", "residual", "action"] {
            header.push(format!("{col}_{i}"));
        }
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, &t) in series.t.iter().enumerate() {
        let mut row = vec![num(t)];
        for s in &series.species {
            for col in [
                &s.mass,
                &s.moment,
                &s.energy,
                &s.interaction,
                &s.w2_increment,
                &s.residual,
                &s.action,
            ] {
                row.push(num(col[k]));
            }
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `{check_name: {statistic, bound, pass}}`; non-finite numbers become `null`.
pub fn report_json(report: &DiagnosticsReport) -> Value {
    let map = report
        .checks
        .iter()
        .map(|(name, c)| {
            (
                name.clone(),
                serde_json::json!({ "statistic": c.statistic, "bound": c.bound, "pass": c.pass }),
            )
        })
        .collect::<serde_json::Map<_, _>>();
    Value::Object(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub level: usize,
    pub t: f64,
    /// One file per species, relative to the run directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub steps: usize,
    pub species: Vec<String>,
    pub snapshots: Vec<SnapshotEntry>,
    pub diagnostics: Vec<String>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Snapshots of a finished run, loaded level by level.
pub struct RunDir {
    pub root: PathBuf,
    pub index: Index,
    pub summary: Value,
}

impl RunDir {
    pub fn open(root: &Path) -> CliResult<Self> {
        Ok(Self {
            root: root.to_path_buf(),
            index: read_json(&root.join("index.json"))?,
            summary: read_json(&root.join("summary.json"))?,
        })
    }

    pub fn level(&self, entry: &SnapshotEntry) -> CliResult<Vec<Density>> {
        entry
            .files
            .iter()
            .map(|f| read_snapshot(&self.root.join(f)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for g in [
            Grid::new_1d(-1.0, 2.0, 7).unwrap(),
            Grid::new_2d([0.0, -1.0], [1.0, 1.0], [3, 4]).unwrap(),
        ] {
            let values: Vec<f64> = (0..g.len()).map(|k| 1.0 + (k as f64 * 0.7).sin() / 3.0).collect();
            let rho = Density::normalized(g, values).unwrap();
            let p = dir.path().join("a.csv");
            write_snapshot(&p, &rho).unwrap();
            let back = read_snapshot(&p).unwrap();
            assert_eq!(back.grid(), rho.grid());
            for (a, b) in back.values().iter().zip(rho.values()) {
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
            }
        }
    }

    #[test]
    fn snapshot_header_format() {
        let g = Grid::new_1d(-4.0, 4.0, 256).unwrap();
        assert_eq!(
            grid_header(&g),
            "# grid: 1,-4.0000000000000000e0,4.0000000000000000e0,256"
        );
        assert!(parse_grid_header("# grid: 3,1").is_err());
        assert_eq!(parse_grid_header(&grid_header(&g)).unwrap(), g);
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "# grid: 1,0,1,2\nindex,x,value\n0,0.25,1.0\n").unwrap();
        assert!(matches!(read_snapshot(&p), Err(CliError::Config(_))));
    }

    #[test]
    fn recorded_level_count() {
        for steps in 1..40 {
            for every in 1..12 {
                let v = recorded_levels(steps, every);
                assert_eq!(v.len(), steps.div_ceil(every) + 1);
                assert_eq!((v[0], *v.last().unwrap()), (0, steps));
            }
        }
    }
}
