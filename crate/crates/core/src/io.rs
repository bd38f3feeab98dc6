//! File formats: 17-significant-digit CSV tables and JSON run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ParamSet;
use crate::drivers::GridPath;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits (round-trip exact).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `t,x1,...,xdim`, one row per grid point.
pub fn grid_path_csv(path: &GridPath) -> String {
    let mut out = String::from("t");
    for c in 1..=path.dim() {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    for k in 0..=path.steps() {
        out.push_str(&fmt_f64(path.time(k)));
        for v in path.point(k) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses the format written by [`grid_path_csv`].
pub fn parse_grid_path_csv(text: &str) -> Result<GridPath> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidSpec("empty grid path CSV".into()))?;
    let dim = header.split(',').count() - 1;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::InvalidSpec(format!("row {rows} has {} fields", fields.len())));
        }
        for f in &fields[1..] {
            values.push(f.trim().parse::<f64>().map_err(|e| Error::InvalidSpec(format!("bad number {f}: {e}")))?);
        }
        rows += 1;
    }
    if rows < 2 || !(rows - 1).is_power_of_two() {
        return Err(Error::InvalidSpec(format!("{rows} rows is not a dyadic grid")));
    }
    GridPath::from_values(dim, (rows - 1).trailing_zeros(), values)
}

/// Row of the shared Monte Carlo log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McLogRow {
    pub experiment: String,
    pub eps: f64,
    pub level: u32,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seed: u64,
    pub elapsed_s: f64,
}

pub const MC_LOG_HEADER: &str = "experiment,eps,level,samples,mean,stderr,seed,elapsed_s";

pub fn mc_log_csv(rows: &[McLogRow]) -> String {
    let mut out = format!("{MC_LOG_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            fmt_f64(r.eps),
            r.level,
            r.samples,
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
            r.seed,
            fmt_f64(r.elapsed_s)
        ));
    }
    out
}

/// Spectrum CSV `index,eigenvalue`.
pub fn spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in eigenvalues.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt_f64(*v)));
    }
    out
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub params: ParamSet,
    pub command: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
    pub version: String,
    /// Subcommand-specific results.
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(params: ParamSet, command: impl Into<String>) -> Self {
        Self {
            params,
            command: command.into(),
            started: chrono::Utc::now().to_rfc3339(),
            finished: String::new(),
            outputs: Vec::new(),
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            results: serde_json::Value::Object(Default::default()),
        }
    }

    /// Stores a result value under `key`.
    pub fn record(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(map) = &mut self.results {
            map.insert(key.to_string(), v);
        }
        Ok(())
    }

    /// Writes `content` to `dir/name` and lists it as an output.
    pub fn write_output(&mut self, dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    /// Checks that every listed output exists and is non-empty, then writes
    /// `manifest.json`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        for name in &self.outputs {
            let meta = fs::metadata(dir.join(name))?;
            if meta.len() == 0 {
                return Err(Error::InvalidSpec(format!("output {name} is empty")));
            }
        }
        self.finished = chrono::Utc::now().to_rfc3339();
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn grid_csv_roundtrip() {
        let p = GridPath::from_fn(2, 3, |t, o| {
            o[0] = t.sin();
            o[1] = -t / 3.0;
        });
        let text = grid_path_csv(&p);
        assert!(text.starts_with("t,x1,x2\n"));
        assert_eq!(text.lines().count(), 10);
        assert_eq!(parse_grid_path_csv(&text).unwrap(), p);
        assert!(parse_grid_path_csv("t,x1\n0,0\n0.5,1\n1,2\n0,0\n").is_err());
    }

    #[test]
    fn manifest_rejects_empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let ps = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 4, 0).unwrap();
        let mut m = RunManifest::new(ps, "sample");
        m.write_output(dir.path(), "a.csv", "").unwrap();
        assert!(m.finish(dir.path()).is_err());
        let mut m = RunManifest::new(ps, "sample");
        m.write_output(dir.path(), "b.csv", "x\n").unwrap();
        m.record("value", 3.0).unwrap();
        let path = m.finish(dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.contains("\"p_prime\"") && text.contains("\"value\": 3.0"));
    }
}
