//! Experiment configuration: a flat TOML file with dotted keys
//! (`kernel.nu = 1.5`, `run.m = 2000`). One file describes one experiment.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use crate::design::{CandidateKind, DEFAULT_CANDIDATES, DEFAULT_QUADRATURE};
use crate::geometry::Domain;
use crate::kernel::{MaternKernel, DEFAULT_NUGGET};
use crate::rates::DEFAULT_MIN_N;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "KRIGSEARCH_OUTPUT_DIR";

/// Largest simulation grid accepted from a config.
pub const MAX_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ApproxRates,
    GreedyVsGrid,
    #[serde(rename = "prop3-check")]
    MseRouteCheck,
    SpectralCheck,
    AdaptivityCheck,
    OptimWiener,
    OptimMatern,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ApproxRates => "approx-rates",
            Self::GreedyVsGrid => "greedy-vs-grid",
            Self::MseRouteCheck => "prop3-check",
            Self::SpectralCheck => "spectral-check",
            Self::AdaptivityCheck => "adaptivity-check",
            Self::OptimWiener => "optim-wiener",
            Self::OptimMatern => "optim-matern",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Grid,
    Greedy,
    Random,
}

impl DesignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::Greedy => "greedy",
            Self::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupKind {
    Grid,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub family: String,
    pub nu: f64,
    pub rho: f64,
    pub variance: f64,
    pub dim: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            family: "matern".into(),
            nu: 0.5,
            rho: 1.0,
            variance: 1.0,
            dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSpec {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// First greedy point; defaults to the domain center.
    pub x1: Option<Vec<f64>>,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            kind: DesignKind::Grid,
            x1: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub n_list: Vec<usize>,
    pub m: usize,
    pub seed: u64,
    pub nugget: f64,
    /// Burn-in: sizes below this are reported but not fitted.
    pub min_n: u64,
    /// Supremum proxy for optimization gaps.
    pub sup: Option<SupKind>,
    /// Also run expected improvement in `optim-matern`.
    pub include_ei: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64, 128, 256],
            m: 1000,
            seed: 20_110_101,
            nugget: DEFAULT_NUGGET,
            min_n: DEFAULT_MIN_N,
            sup: None,
            include_ei: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionSpec {
    pub candidates: usize,
    pub candidate_kind: CandidateKindSpec,
    pub quadrature: usize,
    /// Points of the simulation grid (per axis for tensor lattices).
    pub grid: usize,
    /// Grid indices probed by the adaptivity identity check.
    pub probes: Option<Vec<usize>>,
}

impl Default for ResolutionSpec {
    fn default() -> Self {
        Self {
            candidates: DEFAULT_CANDIDATES,
            candidate_kind: CandidateKindSpec::LowDiscrepancy,
            quadrature: DEFAULT_QUADRATURE,
            grid: 257,
            probes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKindSpec {
    TensorGrid,
    LowDiscrepancy,
    UniformRandom,
}

impl CandidateKindSpec {
    pub fn kind(self) -> CandidateKind {
        match self {
            Self::TensorGrid => CandidateKind::TensorGrid,
            Self::LowDiscrepancy => CandidateKind::LowDiscrepancy,
            Self::UniformRandom => CandidateKind::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub resolution: ResolutionSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("krigsearch-out")
}

/// A config problem, naming the dotted key at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

/// A config that passed validation, with the derived numerical objects.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub config: ExperimentConfig,
    pub kernel: MaternKernel,
    pub domain: Domain,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // serde reports unknown or mistyped fields by name; keep the whole message
            err("config", msg)
        })
    }

    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let k = &self.kernel;
        if k.family != "matern" {
            return Err(err("kernel.family", format!("unsupported family `{}` (only `matern`)", k.family)));
        }
        if !(k.rho.is_finite() && k.rho > 0.0) {
            return Err(err("kernel.rho", format!("must be positive (got {})", k.rho)));
        }
        if !(k.variance.is_finite() && k.variance > 0.0) {
            return Err(err("kernel.variance", format!("must be positive (got {})", k.variance)));
        }
        if k.dim == 0 || k.dim > crate::sobol::MAX_DIM {
            return Err(err("kernel.dim", format!("must be in 1..={} (got {})", crate::sobol::MAX_DIM, k.dim)));
        }
        let kernel = MaternKernel::new(k.variance, k.rho, k.nu, k.dim)
            .map_err(|_| err("kernel.nu", format!("must be 0.5, 1.5 or 2.5 (got {})", k.nu)))?;

        let lower = self.domain.lower.clone().unwrap_or_else(|| vec![0.0; k.dim]);
        let upper = self.domain.upper.clone().unwrap_or_else(|| vec![1.0; k.dim]);
        if lower.len() != k.dim {
            return Err(err("domain.lower", format!("expected {} entries", k.dim)));
        }
        if upper.len() != k.dim {
            return Err(err("domain.upper", format!("expected {} entries", k.dim)));
        }
        let domain = Domain::new(lower, upper).map_err(|e| err("domain.upper", e.to_string()))?;

        if let Some(x1) = &self.design.x1 {
            if !domain.contains(x1) {
                return Err(err("design.x1", "must lie inside the domain"));
            }
        }

        let run = &self.run;
        if run.n_list.is_empty() {
            return Err(err("run.n_list", "must be nonempty"));
        }
        if run.n_list.windows(2).any(|w| w[0] >= w[1]) || run.n_list[0] == 0 {
            return Err(err("run.n_list", "must be positive and strictly increasing"));
        }
        if !(run.nugget.is_finite() && run.nugget >= 0.0) {
            return Err(err("run.nugget", format!("must be nonnegative (got {})", run.nugget)));
        }
        if run.m == 0 {
            return Err(err("run.m", "must be at least 1"));
        }

        let res = &self.resolution;
        if res.candidates == 0 {
            return Err(err("resolution.candidates", "must be at least 1"));
        }
        if res.quadrature == 0 {
            return Err(err("resolution.quadrature", "must be at least 1"));
        }
        if res.grid < 2 || res.grid > MAX_GRID {
            return Err(err("resolution.grid", format!("must be in 2..={MAX_GRID} (got {})", res.grid)));
        }

        self.validate_experiment(&kernel)?;
        // resolve defaults that depend on other keys so the manifest echoes them
        let mut config = self;
        if config.design.x1.is_none() {
            config.design.x1 = Some(domain.center());
        }
        if config.experiment == ExperimentKind::OptimWiener && config.run.sup.is_none() {
            config.run.sup = Some(SupKind::Continuous);
        }
        Ok(ValidatedConfig {
            config,
            kernel,
            domain,
        })
    }

    fn validate_experiment(&self, kernel: &MaternKernel) -> Result<(), ConfigError> {
        let run = &self.run;
        let n_max = *run.n_list.last().expect("nonempty");
        let d = kernel.dim();
        let grid_design = matches!(self.experiment, ExperimentKind::GreedyVsGrid | ExperimentKind::OptimMatern)
            || (self.experiment == ExperimentKind::ApproxRates && self.design.kind == DesignKind::Grid);
        if grid_design {
            for &n in &run.n_list {
                if per_axis_for(n, d).is_none() {
                    return Err(err("run.n_list", format!("{n} is not a perfect {d}-th power (tensor-grid design)")));
                }
            }
        }
        match self.experiment {
            ExperimentKind::AdaptivityCheck | ExperimentKind::OptimMatern | ExperimentKind::OptimWiener => {
                if d != 1 {
                    return Err(err("kernel.dim", "path simulations are one-dimensional"));
                }
                if n_max > self.resolution.grid {
                    return Err(err("run.n_list", "largest n exceeds the simulation grid"));
                }
                if self.experiment == ExperimentKind::AdaptivityCheck && run.m < 2 {
                    return Err(err("run.m", "need at least 2 paths for standard errors"));
                }
                if let Some(probes) = &self.resolution.probes {
                    if let Some(p) = probes.iter().find(|&&p| p >= self.resolution.grid) {
                        return Err(err("resolution.probes", format!("index {p} outside the grid")));
                    }
                }
                if self.run.sup == Some(SupKind::Continuous) && self.experiment != ExperimentKind::OptimWiener {
                    return Err(err("run.sup", "continuous supremum is only available for Wiener paths"));
                }
            }
            ExperimentKind::SpectralCheck | ExperimentKind::MseRouteCheck | ExperimentKind::ApproxRates | ExperimentKind::GreedyVsGrid => {}
        }
        Ok(())
    }

    /// The resolved config as flat dotted `key = value` lines (valid TOML).
    pub fn to_flat_toml(&self) -> String {
        let mut lines = Vec::new();
        let mut put = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        let list = |xs: &[f64]| format!("[{}]", xs.iter().map(|x| toml_f64(*x)).collect::<Vec<_>>().join(", "));
        let ilist = |xs: &[usize]| format!("[{}]", xs.iter().map(usize::to_string).collect::<Vec<_>>().join(", "));
        put("experiment", quote(self.experiment.as_str()));
        put("output_dir", quote(&self.output_dir.to_string_lossy()));
        put("kernel.family", quote(&self.kernel.family));
        put("kernel.nu", toml_f64(self.kernel.nu));
        put("kernel.rho", toml_f64(self.kernel.rho));
        put("kernel.variance", toml_f64(self.kernel.variance));
        put("kernel.dim", self.kernel.dim.to_string());
        let d = self.kernel.dim;
        put("domain.lower", list(self.domain.lower.as_deref().unwrap_or(&vec![0.0; d])));
        put("domain.upper", list(self.domain.upper.as_deref().unwrap_or(&vec![1.0; d])));
        put("design.kind", quote(self.design.kind.as_str()));
        if let Some(x1) = &self.design.x1 {
            put("design.x1", list(x1));
        }
        put("run.n_list", ilist(&self.run.n_list));
        put("run.m", self.run.m.to_string());
        put("run.seed", self.run.seed.to_string());
        put("run.nugget", toml_f64(self.run.nugget));
        put("run.min_n", self.run.min_n.to_string());
        if let Some(sup) = self.run.sup {
            put("run.sup", quote(match sup {
                SupKind::Grid => "grid",
                SupKind::Continuous => "continuous",
            }));
        }
        put("run.include_ei", self.run.include_ei.to_string());
        put("resolution.candidates", self.resolution.candidates.to_string());
        put("resolution.candidate_kind", quote(match self.resolution.candidate_kind {
            CandidateKindSpec::TensorGrid => "tensor-grid",
            CandidateKindSpec::LowDiscrepancy => "low-discrepancy",
            CandidateKindSpec::UniformRandom => "uniform-random",
        }));
        put("resolution.quadrature", self.resolution.quadrature.to_string());
        put("resolution.grid", self.resolution.grid.to_string());
        if let Some(p) = &self.resolution.probes {
            put("resolution.probes", ilist(p));
        }
        lines.join("\n") + "\n"
    }
}

/// `n^{1/d}` when `n` is a perfect `d`-th power.
pub fn per_axis_for(n: usize, d: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&p| p > 0 && p.checked_pow(d as u32) == Some(n))
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// TOML floats need a decimal point or exponent.
fn toml_f64(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
