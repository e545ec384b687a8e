//! Experiment configuration: a JSON file, overridden key by key by flags.

use std::path::{Path, PathBuf};

use polycarleson_core::carleson::CarlesonOptions;
use polycarleson_core::contact::ContactOptions;
use polycarleson_core::criteria::CriteriaOptions;
use polycarleson_core::estimate::EstimatorConfig;
use polycarleson_core::sublevel::{SublevelOptions, DEFAULT_SAFETY};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::symbols::SymbolSpec;

pub const THREADS_ENV: &str = "POLYCARLESON_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Expected fitted slope, `slope ± tol`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeBand {
    pub slope: f64,
    pub tol: f64,
}

impl SlopeBand {
    pub fn contains(&self, s: f64) -> bool {
        (s - self.slope).abs() <= self.tol
    }
}

/// Numerical tolerances; every one has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub batch_size: u64,
    pub audit_fraction: f64,
    pub dilation: f64,
    pub leakage_tol: f64,
    pub safety: f64,
    pub rank_tol: f64,
    pub jc_tol: f64,
    pub entry_tol: f64,
    pub entry_floor: f64,
    pub contact: ContactOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        let e = EstimatorConfig::default();
        let c = CriteriaOptions::default();
        Self {
            batch_size: e.batch_size,
            audit_fraction: e.audit_fraction,
            dilation: e.dilation,
            leakage_tol: e.leakage_tol,
            safety: DEFAULT_SAFETY,
            rank_tol: c.rank_tol,
            jc_tol: c.jc_tol,
            entry_tol: c.entry_tol,
            entry_floor: c.entry_floor,
            contact: c.contact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub symbol: Option<SymbolSpec>,
    /// Component used by `exponent` when the symbol has several.
    pub component: usize,
    /// Level `η = e^{i eta_angle}` for `exponent`.
    pub eta_angle: f64,
    pub beta: f64,
    /// Extra weights scanned by `carleson`; empty means `[beta]`.
    pub betas: Vec<f64>,
    /// `δ` grid; `None` uses the subcommand default.
    pub deltas: Option<Vec<f64>>,
    /// Domain contact point `ζ` (angles) for `carleson`; defaults to `1⃗`.
    pub contact_point: Option<Vec<f64>>,
    /// Box center `ξ` (angles); defaults to the image of `ζ`.
    pub center: Option<Vec<f64>>,
    /// Shrinking components; defaults to those reaching the circle at `ζ`.
    pub shrink: Option<Vec<bool>>,
    /// 1-based component indices for `contact`; defaults to all.
    pub indices: Option<Vec<usize>>,
    /// Samples per estimate.
    pub budget: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub expect_slope: Option<SlopeBand>,
    /// `Bounded`, `Unbounded`, `SufficiencyHolds`, ...
    pub expect_verdict: Option<String>,
    /// Battery criteria to run; empty means all.
    pub only: Vec<u32>,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            symbol: None,
            component: 0,
            eta_angle: 0.0,
            beta: 0.0,
            betas: Vec::new(),
            deltas: None,
            contact_point: None,
            center: None,
            shrink: None,
            indices: None,
            budget: 1_000_000,
            seed: 0,
            threads: None,
            out_dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
            expect_slope: None,
            expect_verdict: None,
            only: Vec::new(),
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| AppError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Flag, then config file, then `POLYCARLESON_THREADS`, then the number
    /// of CPUs.
    pub fn resolve_threads(&self) -> AppResult<usize> {
        if let Some(t) = self.threads {
            return positive_threads(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let t = v
                    .trim()
                    .parse()
                    .map_err(|_| AppError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
                positive_threads(t)
            }
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    pub fn estimator(&self) -> EstimatorConfig {
        let t = &self.tolerances;
        EstimatorConfig {
            budget: self.budget,
            batch_size: t.batch_size,
            audit_fraction: t.audit_fraction,
            dilation: t.dilation,
            leakage_tol: t.leakage_tol,
            seed: self.seed,
        }
    }

    pub fn sublevel_options(&self) -> SublevelOptions {
        SublevelOptions {
            estimator: self.estimator(),
            safety: self.tolerances.safety,
            contact: self.tolerances.contact.clone(),
        }
    }

    pub fn carleson_options(&self) -> CarlesonOptions {
        CarlesonOptions {
            estimator: self.estimator(),
            safety: self.tolerances.safety,
            contact: self.tolerances.contact.clone(),
        }
    }

    pub fn criteria_options(&self) -> CriteriaOptions {
        let t = &self.tolerances;
        CriteriaOptions {
            contact: t.contact.clone(),
            rank_tol: t.rank_tol,
            jc_tol: t.jc_tol,
            entry_tol: t.entry_tol,
            entry_floor: t.entry_floor,
        }
    }
}

fn positive_threads(t: usize) -> AppResult<usize> {
    if t == 0 {
        Err(AppError::Config("thread count must be positive".into()))
    } else {
        Ok(t)
    }
}

/// Flags that override config keys when given.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file; flags take precedence over its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Samples per estimate.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output formats; repeat or separate with commas.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Vec<Format>,
    /// Named symbol or row literal `[[[re, im, α…], …], …]`.
    #[arg(long, global = true)]
    pub symbol: Option<String>,
    /// Comma-separated δ grid.
    #[arg(long, global = true, value_delimiter = ',')]
    pub deltas: Vec<f64>,
}

impl Overrides {
    pub fn resolve(&self) -> AppResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> AppResult<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(b) = self.budget {
            cfg.budget = b;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if !self.format.is_empty() {
            cfg.formats = self.format.clone();
        }
        if let Some(s) = &self.symbol {
            cfg.symbol = Some(SymbolSpec::parse(s)?);
        }
        if !self.deltas.is_empty() {
            cfg.deltas = Some(self.deltas.clone());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn full_config_round_trips() {
        let mut cfg = ExperimentConfig {
            symbol: Some(SymbolSpec::Literal(vec![vec![vec![0.5, 0.0, 1.0, 0.0], vec![0.5, 0.0, 0.0, 1.0]]])),
            beta: -0.5,
            betas: vec![-0.9, -0.1],
            deltas: Some(vec![0.1, 0.01 / 3.0]),
            center: Some(vec![0.1, std::f64::consts::PI]),
            shrink: Some(vec![true, false]),
            indices: Some(vec![1, 2]),
            budget: 12345,
            seed: u64::MAX,
            threads: Some(3),
            formats: vec![Format::Svg],
            expect_slope: Some(SlopeBand { slope: -1.0, tol: 0.2 }),
            expect_verdict: Some("Bounded".into()),
            only: vec![1, 8],
            ..Default::default()
        };
        cfg.tolerances.rank_tol = 1e-9;
        cfg.tolerances.contact.grid_res = Some(97);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults_and_rejects_unknown_keys() {
        let cfg = ExperimentConfig::from_json(r#"{"symbol": "swap", "tolerances": {"safety": 4}}"#).unwrap();
        assert_eq!(cfg.symbol, Some(SymbolSpec::Named("swap".into())));
        assert_eq!(cfg.tolerances.safety, 4.0);
        assert_eq!(cfg.tolerances.rank_tol, 1e-8);
        assert_eq!(cfg.budget, 1_000_000);
        assert!(ExperimentConfig::from_json(r#"{"budgte": 3}"#).is_err());
    }

    #[test]
    fn flags_override_file_keys() {
        let mut cfg = ExperimentConfig::from_json(r#"{"seed": 5, "budget": 10, "beta": 1}"#).unwrap();
        let o = Overrides {
            seed: Some(9),
            beta: Some(-0.5),
            format: vec![Format::Csv],
            ..Default::default()
        };
        o.apply(&mut cfg).unwrap();
        assert_eq!((cfg.seed, cfg.budget, cfg.beta), (9, 10, -0.5));
        assert_eq!(cfg.formats, vec![Format::Csv]);
    }

    #[test]
    fn explicit_threads_win() {
        let cfg = ExperimentConfig {
            threads: Some(2),
            ..Default::default()
        };
        assert_eq!(cfg.resolve_threads().unwrap(), 2);
        let zero = ExperimentConfig {
            threads: Some(0),
            ..Default::default()
        };
        assert!(zero.resolve_threads().is_err());
    }
}
