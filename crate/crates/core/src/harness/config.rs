//! Run configuration: the JSON schema, defaults, validation and the seeded
//! parameter sweep.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densities::{make_density, DensityModel, FamilySpec, SupportKind};
use crate::error::{Error, Result};
use crate::stein::TestFunction;

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Checks in their fixed report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Characterization,
    Eq9,
    Fundeq,
    Corollary,
    Section5,
    Eq17Audit,
    Appendix,
    Pinsker,
    Eq25,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::Characterization,
        CheckKind::Eq9,
        CheckKind::Fundeq,
        CheckKind::Corollary,
        CheckKind::Section5,
        CheckKind::Eq17Audit,
        CheckKind::Appendix,
        CheckKind::Pinsker,
        CheckKind::Eq25,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CheckKind::Characterization => "characterization",
            CheckKind::Eq9 => "eq9",
            CheckKind::Fundeq => "fundeq",
            CheckKind::Corollary => "corollary",
            CheckKind::Section5 => "section5",
            CheckKind::Eq17Audit => "eq17_audit",
            CheckKind::Appendix => "appendix",
            CheckKind::Pinsker => "pinsker",
            CheckKind::Eq25 => "eq25",
        }
    }

    /// Checks whose records are residuals rather than bounds.
    pub fn is_residual(self) -> bool {
        matches!(self, CheckKind::Characterization | CheckKind::Eq9 | CheckKind::Fundeq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub target: FamilySpec,
    pub q: FamilySpec,
}

/// Residual thresholds for the identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    pub characterization: f64,
    pub eq9: f64,
    pub fundeq: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            characterization: 1e-7,
            eq9: 1e-6,
            fundeq: 1e-6,
        }
    }
}

impl CheckTolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            characterization: tol,
            eq9: tol,
            fundeq: tol,
        }
    }
}

/// Either a number of target quantiles (levels `k/(n+1)`) or explicit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZGrid {
    Quantiles(usize),
    Points(Vec<f64>),
}

impl Default for ZGrid {
    fn default() -> Self {
        ZGrid::Quantiles(21)
    }
}

impl ZGrid {
    pub fn points(&self, p: &DensityModel) -> Vec<f64> {
        match self {
            ZGrid::Quantiles(n) => p.quantile_grid(*n),
            ZGrid::Points(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            path: PathBuf::from("."),
            format: OutputFormat::Csv,
        }
    }
}

fn default_l_family() -> Vec<String> {
    ["x", "x2", "sin", "tanh", "sign", "indicator_le:0"].map(String::from).to_vec()
}

fn default_f_family() -> Vec<String> {
    ["one", "x", "sin", "tanh", "bump01"].map(String::from).to_vec()
}

fn default_h() -> String {
    "sign".into()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pairs: Vec<PairSpec>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub tolerances: CheckTolerances,
    #[serde(default)]
    pub z_grid: ZGrid,
    /// Right-hand sides `l` for the fundamental identity.
    #[serde(default = "default_l_family")]
    pub l_family: Vec<String>,
    /// Test functions `f` for the Stein identity.
    #[serde(default = "default_f_family")]
    pub f_family: Vec<String>,
    /// `h` for the RMS-constant audit; centered under the target before use.
    #[serde(default = "default_h")]
    pub h: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of random pairs appended to `pairs`.
    #[serde(default)]
    pub sweep: usize,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A validated pair with its densities built.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub id: String,
    pub target: DensityModel,
    pub q: DensityModel,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks sorted into report order, without duplicates.
    pub fn ordered_checks(&self) -> Vec<CheckKind> {
        let mut c = self.checks.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn l_functions(&self) -> Result<Vec<TestFunction>> {
        named_functions(&self.l_family, "l_family")
    }

    pub fn f_functions(&self) -> Result<Vec<TestFunction>> {
        named_functions(&self.f_family, "f_family")
    }

    pub fn h_function(&self) -> Result<TestFunction> {
        TestFunction::from_name(&self.h).map_err(|_| Error::Config(format!("h: unknown function {:?}", self.h)))
    }

    /// Validates the configuration and builds every pair, sweep included.
    pub fn prepare(&self) -> Result<Vec<PreparedPair>> {
        if self.pairs.is_empty() {
            return Err(Error::Config("pairs must not be empty".into()));
        }
        if self.checks.is_empty() {
            return Err(Error::Config("checks must not be empty".into()));
        }
        for (name, t) in [
            ("characterization", self.tolerances.characterization),
            ("eq9", self.tolerances.eq9),
            ("fundeq", self.tolerances.fundeq),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerances.{name} must be positive, got {t}")));
            }
        }
        if let ZGrid::Quantiles(0) = self.z_grid {
            return Err(Error::Config("z_grid must not be empty".into()));
        }
        if let ZGrid::Points(v) = &self.z_grid {
            if v.is_empty() || v.iter().any(|z| !z.is_finite()) {
                return Err(Error::Config("z_grid points must be finite and non-empty".into()));
            }
        }
        self.l_functions()?;
        self.f_functions()?;
        self.h_function()?;

        let mut out = Vec::with_capacity(self.pairs.len() + self.sweep);
        let mut seen = HashSet::new();
        let specs = self.pairs.iter().cloned().enumerate().map(|(i, p)| {
            let id = p.id.clone().unwrap_or_else(|| format!("pair-{:03}", i + 1));
            (id, p)
        });
        for (id, pair) in specs.chain(sweep_pairs(self.seed, self.sweep)) {
            if !seen.insert(id.clone()) {
                return Err(Error::Config(format!("duplicate pair id {id:?}")));
            }
            let build = |spec: &FamilySpec, role: &str| {
                make_density(spec).map_err(|e| Error::Config(format!("pair {id}: {role}: {e}")))
            };
            out.push(PreparedPair {
                target: build(&pair.target, "target")?,
                q: build(&pair.q, "q")?,
                id,
            });
        }
        Ok(out)
    }
}

fn named_functions(names: &[String], field: &str) -> Result<Vec<TestFunction>> {
    if names.is_empty() {
        return Err(Error::Config(format!("{field} must not be empty")));
    }
    names
        .iter()
        .map(|n| TestFunction::from_name(n).map_err(|_| Error::Config(format!("{field}: unknown function {n:?}"))))
        .collect()
}

/// Random pairs: a full-line power-exponential target with
/// `α ∈ {1, 1.5, 2, 3}` and `d ∈ [0.5, 2]` against `N(μ, σ²)` with
/// `μ ∈ [−3, 3]` and `σ² ∈ [0.25, 4]`.
pub fn sweep_pairs(seed: u64, count: usize) -> Vec<(String, PairSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let alpha = *[1.0, 1.5, 2.0, 3.0].choose(&mut rng).expect("non-empty");
            let d = rng.gen_range(0.5..=2.0);
            let mean = rng.gen_range(-3.0..=3.0);
            let variance = rng.gen_range(0.25..=4.0);
            let id = format!("sweep-{:03}", i + 1);
            (
                id.clone(),
                PairSpec {
                    id: Some(id),
                    target: FamilySpec::PowerExponential {
                        alpha,
                        d,
                        support: SupportKind::FullLine,
                        location: 0.0,
                    },
                    q: FamilySpec::Gaussian { mean, variance },
                },
            )
        })
        .collect()
}
