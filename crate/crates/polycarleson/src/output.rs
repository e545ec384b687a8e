//! CSV tables, JSON reports and the structured warning log.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use polycarleson_core::carleson::RatioPoint;
use polycarleson_core::contact::ContactSet;
use polycarleson_core::sublevel::SublevelPoint;
use serde::Serialize;

use crate::error::{AppError, AppResult};

#[derive(Serialize)]
struct SublevelRow {
    delta: f64,
    estimate: f64,
    stderr: f64,
    hits: u64,
    region_mass: f64,
    trusted: bool,
}

#[derive(Serialize)]
struct CarlesonRow {
    beta: f64,
    delta: f64,
    ratio: f64,
    stderr: f64,
    trusted: bool,
}

#[derive(Serialize)]
struct ContactRow {
    angles: String,
    residual: f64,
    kind: &'static str,
}

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> AppResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns `delta, estimate, stderr, hits, region_mass, trusted`.
pub fn sublevel_csv(points: &[SublevelPoint]) -> AppResult<String> {
    to_csv(points.iter().map(|p| SublevelRow {
        delta: p.delta,
        estimate: p.estimate.value,
        stderr: p.estimate.stderr,
        hits: p.estimate.hits,
        region_mass: p.estimate.region_mass,
        trusted: p.estimate.trusted,
    }))
}

/// Columns `beta, delta, ratio, stderr, trusted`.
pub fn carleson_csv<'a>(scans: impl IntoIterator<Item = (f64, &'a [RatioPoint])>) -> AppResult<String> {
    let rows: Vec<CarlesonRow> = scans
        .into_iter()
        .flat_map(|(beta, pts)| {
            pts.iter().map(move |p| CarlesonRow {
                beta,
                delta: p.delta,
                ratio: p.ratio,
                stderr: p.stderr,
                trusted: p.trusted,
            })
        })
        .collect();
    to_csv(rows)
}

/// Columns `angles, residual, kind`; angles are `;`-separated.
pub fn contact_csv(set: &ContactSet) -> AppResult<String> {
    let kind = set.kind.label();
    to_csv(set.kind.points().iter().map(|p| ContactRow {
        angles: p
            .point
            .angles()
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(";"),
        residual: p.residual,
        kind,
    }))
}

#[derive(Serialize)]
struct WarningLine<'a> {
    source: &'a str,
    message: &'a str,
}

/// Writes artifacts under one directory and keeps the warning log.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    warnings: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> AppResult<Self> {
        fs::create_dir_all(dir).map_err(|source| AppError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> AppResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| AppError::Write {
            path: path.clone(),
            source,
        })?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn warn(&mut self, source: &str, message: impl Into<String>) {
        self.warnings.push((source.to_string(), message.into()));
    }

    pub fn warn_all(&mut self, source: &str, messages: &[String]) {
        for m in messages {
            self.warn(source, m.clone());
        }
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn warnings(&self) -> &[(String, String)] {
        &self.warnings
    }

    /// Writes `warnings.jsonl`, one JSON object per line, even when empty.
    pub fn finish(mut self) -> AppResult<Vec<PathBuf>> {
        let path = self.dir.join("warnings.jsonl");
        let mut f = fs::File::create(&path).map_err(|source| AppError::Write {
            path: path.clone(),
            source,
        })?;
        for (source, message) in &self.warnings {
            let line = serde_json::to_string(&WarningLine { source, message })?;
            writeln!(f, "{line}").map_err(|source| AppError::Write {
                path: path.clone(),
                source,
            })?;
        }
        self.written.push(path);
        Ok(self.written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polycarleson_core::estimate::Estimate;

    fn est(value: f64) -> Estimate {
        Estimate {
            value,
            stderr: value / 100.0,
            hits: 42,
            samples: 1000,
            region_mass: 0.5,
            main: value,
            main_stderr: value / 100.0,
            leakage: 0.0,
            leakage_stderr: 0.0,
            leakage_hits: 0,
            audit_samples: 100,
            trusted: true,
            upper_bound: false,
        }
    }

    #[test]
    fn sublevel_columns() {
        let pts = vec![SublevelPoint {
            delta: 0.0625,
            estimate: est(0.25),
        }];
        let csv = sublevel_csv(&pts).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("delta,estimate,stderr,hits,region_mass,trusted"));
        assert_eq!(lines.next(), Some("0.0625,0.25,0.0025,42,0.5,true"));
    }

    #[test]
    fn warning_log_is_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new(dir.path()).unwrap();
        a.warn("exponent", "leak \"x\"");
        a.warn("contact", "close points");
        let files = a.finish().unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["message"], "leak \"x\"");
    }
}
