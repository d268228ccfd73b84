//! Experiment configuration: JSON schema, validation and the config hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuation::TraceOptions;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::Grid1D;
use crate::nonlinearity::{check_gamma, TermSpec};
use crate::operator::{OperatorKind, RestrictedScheme};
use crate::params::FracParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub ds: f64,
    pub max_steps: usize,
    pub box_radius: f64,
    pub amplitude0: f64,
    pub stop_at_fold: bool,
    /// Eigenvalue indices whose branches are traced.
    pub branches: Vec<usize>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let t = TraceOptions::default();
        Self {
            ds: t.ds,
            max_steps: t.max_steps,
            box_radius: t.box_radius,
            amplitude0: 1e-2,
            stop_at_fold: t.stop_at_fold,
            branches: vec![1],
        }
    }
}

impl ContinuationConfig {
    pub fn trace_options(&self) -> TraceOptions {
        TraceOptions { ds: self.ds, max_steps: self.max_steps, box_radius: self.box_radius, stop_at_fold: self.stop_at_fold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub rng_seed: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { rng_seed: 20240601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub picone_n: usize,
    /// Fractional orders at which the Picone property run is repeated.
    pub picone_s: Vec<f64>,
    pub picone_trials: usize,
    pub elementary_trials: usize,
    pub little_o_gammas: Vec<f64>,
    pub little_o_eps: Vec<f64>,
    /// Allowed relative deviation of the fitted little-o slope from `γ - 1`.
    pub slope_tol: f64,
    pub index_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            picone_n: 64,
            picone_s: vec![0.3, 0.4, 0.5],
            picone_trials: 10_000,
            elementary_trials: 1_000_000,
            little_o_gammas: vec![2.5, 3.0, 4.0],
            little_o_eps: vec![1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3],
            slope_tol: 0.1,
            index_samples: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Adds `φ_k` columns to `spectrum.csv`.
    pub eigenvectors: bool,
    /// Writes the stiffness matrix as `operator.csv` plus `operator.json`.
    pub dump_operator: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Dat],
            eigenvectors: false,
            dump_operator: false,
        }
    }
}

/// Replaces one stiffness coupling by a repulsive one; used to check that
/// `verify` detects a broken operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub i: usize,
    pub j: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub domain: Domain,
    pub n: usize,
    pub s: f64,
    pub operator: OperatorKind,
    pub scheme: RestrictedScheme,
    pub term: TermSpec,
    /// Number of eigenpairs computed.
    pub modes: usize,
    /// Scan interval for bifurcation detection; defaults to `(0, λ₅ + 0.1)`.
    pub lambda_range: Option<(f64, f64)>,
    pub scan_samples: usize,
    pub refinements: Vec<usize>,
    pub continuation: ContinuationConfig,
    pub seeds: Seeds,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
    pub execution: Execution,
    pub fault_injection: Option<FaultInjection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            domain: Domain { a: -1.0, b: 1.0 },
            n: 256,
            s: 0.4,
            operator: OperatorKind::Restricted,
            scheme: RestrictedScheme::BoundaryWeighted,
            term: TermSpec::OddPower { gamma: 3.0 },
            modes: 6,
            lambda_range: None,
            scan_samples: 200,
            refinements: vec![128, 256, 512],
            continuation: ContinuationConfig::default(),
            seeds: Seeds::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
            execution: Execution::Parallel,
            fault_injection: None,
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks every field against the preconditions of the operations it feeds.
    pub fn validate(&self) -> Result<()> {
        require(self.schema_version == SCHEMA_VERSION, || {
            format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)
        })?;
        let params = FracParams::new(self.s).map_err(|e| Error::Config(format!("s: {e}")))?;
        Grid1D::new(self.domain.a, self.domain.b, self.n).map_err(|e| Error::Config(format!("domain/n: {e}")))?;
        require(self.modes >= 2 && self.modes <= self.n, || {
            format!("modes must satisfy 2 <= modes <= n (got {} with n = {})", self.modes, self.n)
        })?;
        match &self.term {
            TermSpec::Zero => {}
            TermSpec::OddPower { gamma } | TermSpec::WeightedOddPower { gamma, .. } => {
                check_gamma(*gamma, &params).map_err(|e| Error::Config(format!("term: {e}")))?;
            }
        }
        if let TermSpec::WeightedOddPower { weight, .. } = &self.term {
            require(!weight.is_empty(), || "term: weight needs at least one coefficient".into())?;
        }
        if let Some((lo, hi)) = self.lambda_range {
            require(lo >= 0.0 && lo < hi && hi.is_finite(), || {
                format!("lambda_range must satisfy 0 <= lo < hi (got ({lo}, {hi}))")
            })?;
        }
        require(self.scan_samples >= 1, || "scan_samples must be positive".into())?;
        require(self.refinements.len() >= 2 && self.refinements.iter().all(|n| *n >= 2), || {
            "refinements needs at least two levels, each with N >= 2".into()
        })?;
        let c = &self.continuation;
        require(c.ds > 0.0 && c.ds.is_finite(), || format!("continuation.ds must be positive (got {})", c.ds))?;
        require(c.max_steps > 0, || "continuation.max_steps must be positive".into())?;
        require(c.box_radius > 0.0, || "continuation.box_radius must be positive".into())?;
        require(c.amplitude0 != 0.0 && c.amplitude0.is_finite(), || "continuation.amplitude0 must be nonzero".into())?;
        require(c.branches.iter().all(|k| *k >= 1 && *k <= self.modes), || {
            format!("continuation.branches must lie in 1..={}", self.modes)
        })?;
        let v = &self.verify;
        require(v.picone_n >= 2, || "verify.picone_n must be at least 2".into())?;
        for &s in &v.picone_s {
            FracParams::new(s).map_err(|e| Error::Config(format!("verify.picone_s: {e}")))?;
        }
        require(!v.picone_s.is_empty(), || "verify.picone_s needs at least one order".into())?;
        require(v.slope_tol > 0.0, || "verify.slope_tol must be positive".into())?;
        require(v.picone_trials > 0 && v.elementary_trials > 0, || "verify trial counts must be positive".into())?;
        require(v.little_o_eps.len() >= 2 && v.little_o_eps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), || {
            "verify.little_o_eps must be positive, strictly decreasing, with at least two entries".into()
        })?;
        require(v.index_samples > 0, || "verify.index_samples must be positive".into())?;
        if let Some(f) = self.fault_injection {
            require(f.i < v.picone_n && f.j < v.picone_n && f.i != f.j, || {
                format!("fault_injection indices must be distinct and below verify.picone_n = {}", v.picone_n)
            })?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<FracParams> {
        FracParams::new(self.s)
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.domain.a, self.domain.b, self.n)
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    /// SHA-256 of the canonical JSON form with the output directory cleared,
    /// so the same experiment written to different places hashes identically.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.directory = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
