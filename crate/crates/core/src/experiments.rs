//! Experiment runners behind the CLI. Each experiment returns typed results and
//! renders them to CSV / plot-data artifacts.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::{
    per_axis_for, ConfigError, DesignKind, ExperimentConfig, ExperimentKind, SupKind,
    ValidatedConfig, OUTPUT_DIR_ENV,
};
use crate::criteria::{criteria_table, imse, mmse, worst_case_linf_sq, CriterionValue};
use crate::design::{greedy_mmse, random_design, tensor_grid, CandidateKind, CandidateSet, Design};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::{spectral_density_quadrature_1d, MaternKernel, SandwichBounds};
use crate::kriging::KrigingModel;
use crate::output::{fmt_f64, write_atomic, CsvTable};
use crate::rates::{fit_exponent_from, theory_slope, Problem, RateReport};
use crate::simulate::{
    adaptivity_identity_check, opt_error, run_nonadaptive, sample_wiener_paths, EiRunner,
    GpSampler, IdentityCheck, MeanSe, SamplePath, Strategy, StrategyTrace, SupProxy,
};

/// Greedy MMSE may exceed the tensor-grid MMSE by at most this factor. This is
/// an engineering threshold; the rate-optimality constant is not constructive.
pub const GREEDY_GRID_FACTOR: f64 = 3.0;

/// One output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
}

impl ExperimentOutput {
    fn push_rate(&mut self, series: &str, report: &RateReport) {
        self.artifacts
            .push(Artifact::new(format!("rate_{series}.csv"), report.to_csv()));
        self.artifacts
            .push(Artifact::new(format!("rate_{series}.dat"), report.plot_data()));
        self.summary.push(format!(
            "{series}: fitted slope {:.4} ± {:.4} (theory {})",
            report.fitted_slope,
            report.slope_stderr,
            report
                .theory_slope
                .map_or_else(|| "n/a".to_string(), |t| format!("{t:.4}"))
        ));
    }
}

pub fn build_candidates(
    kind: CandidateKind,
    domain: &Domain,
    m: usize,
    seed: u64,
) -> Result<CandidateSet> {
    match kind {
        CandidateKind::LowDiscrepancy | CandidateKind::Explicit => {
            CandidateSet::low_discrepancy(domain, m)
        }
        CandidateKind::UniformRandom => CandidateSet::uniform_random(domain, m, seed),
        CandidateKind::TensorGrid => {
            let per_axis = ((m as f64).powf(1.0 / domain.dim() as f64).round() as usize).max(1);
            CandidateSet::tensor_grid(domain, per_axis)
        }
    }
}

fn grid_design(domain: &Domain, n: usize) -> Result<Design> {
    let per_axis = per_axis_for(n, domain.dim()).ok_or(Error::InvalidParameter {
        name: "n",
        reason: format!("{n} is not a perfect {}-th power", domain.dim()),
    })?;
    tensor_grid(domain, per_axis)
}

// ---------------------------------------------------------------- approx-rates

#[derive(Debug, Clone)]
pub struct ApproxRates {
    pub mmse: Vec<CriterionValue>,
    pub imse: Vec<CriterionValue>,
    pub mmse_rate: RateReport,
    pub imse_rate: RateReport,
}

/// MMSE and IMSE of a design family over `ns`, with fitted decay exponents.
#[allow(clippy::too_many_arguments)]
pub fn approx_rates(
    kernel: &MaternKernel,
    domain: &Domain,
    family: DesignKind,
    ns: &[usize],
    candidates: &CandidateSet,
    quadrature: &CandidateSet,
    x1: &[f64],
    nugget: f64,
    seed: u64,
    min_n: u64,
) -> Result<ApproxRates> {
    let designs = design_family(kernel, domain, family, ns, x1, candidates, nugget, seed)?;
    let mut mm = Vec::with_capacity(ns.len());
    let mut im = Vec::with_capacity(ns.len());
    for d in &designs {
        mm.push(mmse(kernel, d, candidates, nugget)?);
        im.push(imse(kernel, domain, d, quadrature, nugget)?);
    }
    let ns_u: Vec<u64> = ns.iter().map(|&n| n as u64).collect();
    let values = |v: &[CriterionValue]| v.iter().map(|c| c.value).collect::<Vec<_>>();
    let (nu, d) = (kernel.nu(), kernel.dim());
    let mmse_rate = fit_exponent_from(&ns_u, &values(&mm), false, min_n)?
        .with_theory(theory_slope(Problem::Mmse, nu, d));
    let imse_rate = fit_exponent_from(&ns_u, &values(&im), false, min_n)?
        .with_theory(theory_slope(Problem::Imse, nu, d));
    Ok(ApproxRates {
        mmse: mm,
        imse: im,
        mmse_rate,
        imse_rate,
    })
}

#[allow(clippy::too_many_arguments)]
fn design_family(
    kernel: &MaternKernel,
    domain: &Domain,
    family: DesignKind,
    ns: &[usize],
    x1: &[f64],
    candidates: &CandidateSet,
    nugget: f64,
    seed: u64,
) -> Result<Vec<Design>> {
    match family {
        DesignKind::Grid => ns.iter().map(|&n| grid_design(domain, n)).collect(),
        DesignKind::Random => ns
            .iter()
            .map(|&n| random_design(domain, n, seed.wrapping_add(n as u64)))
            .collect(),
        DesignKind::Greedy => {
            let n_max = *ns.last().expect("nonempty n list");
            let full = greedy_mmse(kernel, domain, n_max, x1, candidates, nugget)?;
            Ok(ns.iter().map(|&n| full.prefix(n)).collect())
        }
    }
}

impl ApproxRates {
    fn output(&self) -> ExperimentOutput {
        let mut out = ExperimentOutput::default();
        let all: Vec<CriterionValue> = self.mmse.iter().chain(&self.imse).cloned().collect();
        out.artifacts
            .push(Artifact::new("criteria.csv", criteria_table(&all).render()));
        out.push_rate("mmse", &self.mmse_rate);
        out.push_rate("imse", &self.imse_rate);
        out
    }
}

// -------------------------------------------------------------- greedy-vs-grid

#[derive(Debug, Clone)]
pub struct GreedyVsGrid {
    pub ns: Vec<usize>,
    pub grid_mmse: Vec<f64>,
    pub greedy_mmse: Vec<f64>,
    pub grid_rate: RateReport,
    pub greedy_rate: RateReport,
}

impl GreedyVsGrid {
    pub fn max_ratio(&self) -> f64 {
        self.greedy_mmse
            .iter()
            .zip(&self.grid_mmse)
            .map(|(g, t)| g / t)
            .fold(0.0, f64::max)
    }

    fn output(&self) -> ExperimentOutput {
        let mut out = ExperimentOutput::default();
        let mut t = CsvTable::new(["n", "grid_mmse", "greedy_mmse", "ratio"]);
        t.comment(format!(
            "engineering check: greedy_mmse <= {GREEDY_GRID_FACTOR} x grid_mmse at every n"
        ));
        for ((n, g), q) in self.ns.iter().zip(&self.grid_mmse).zip(&self.greedy_mmse) {
            t.row([n.to_string(), fmt_f64(*g), fmt_f64(*q), fmt_f64(q / g)]);
        }
        out.artifacts.push(Artifact::new("comparison.csv", t.render()));
        out.push_rate("mmse_grid", &self.grid_rate);
        out.push_rate("mmse_greedy", &self.greedy_rate);
        out.summary.push(format!(
            "max greedy/grid MMSE ratio {:.4} (engineering threshold {GREEDY_GRID_FACTOR})",
            self.max_ratio()
        ));
        out
    }
}

pub fn greedy_vs_grid(
    kernel: &MaternKernel,
    domain: &Domain,
    ns: &[usize],
    x1: &[f64],
    candidates: &CandidateSet,
    nugget: f64,
    min_n: u64,
) -> Result<GreedyVsGrid> {
    let n_max = *ns.last().expect("nonempty n list");
    let greedy = greedy_mmse(kernel, domain, n_max, x1, candidates, nugget)?;
    let mut grid_v = Vec::with_capacity(ns.len());
    let mut greedy_v = Vec::with_capacity(ns.len());
    for &n in ns {
        grid_v.push(mmse(kernel, &grid_design(domain, n)?, candidates, nugget)?.value);
        greedy_v.push(mmse(kernel, &greedy.prefix(n), candidates, nugget)?.value);
    }
    let ns_u: Vec<u64> = ns.iter().map(|&n| n as u64).collect();
    let theory = theory_slope(Problem::Mmse, kernel.nu(), kernel.dim());
    Ok(GreedyVsGrid {
        ns: ns.to_vec(),
        grid_rate: fit_exponent_from(&ns_u, &grid_v, false, min_n)?.with_theory(theory),
        greedy_rate: fit_exponent_from(&ns_u, &greedy_v, false, min_n)?.with_theory(theory),
        grid_mmse: grid_v,
        greedy_mmse: greedy_v,
    })
}

// ------------------------------------------------------------ mse-route check

#[derive(Debug, Clone, PartialEq)]
pub struct RouteRow {
    pub design_index: usize,
    pub n: usize,
    pub mmse: f64,
    pub worst_case: f64,
    pub rel_dev: f64,
    /// Largest pointwise relative deviation between the two MSE routes.
    pub pointwise_rel_dev: f64,
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_deviation(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares the kriging-variance and RKHS-norm routes on random designs.
pub fn mse_route_check(
    kernel: &MaternKernel,
    domain: &Domain,
    ns: &[usize],
    designs: usize,
    candidates: &CandidateSet,
    nugget: f64,
    seed: u64,
) -> Result<Vec<RouteRow>> {
    let floor = crate::kriging::MSE_ROUNDOFF * kernel.variance();
    let mut rows = Vec::with_capacity(designs);
    for i in 0..designs {
        let n = ns[i % ns.len()];
        let design = random_design(domain, n, seed.wrapping_add(i as u64))?;
        let m = mmse(kernel, &design, candidates, nugget)?.value;
        let w = worst_case_linf_sq(kernel, &design, candidates, nugget)?;
        let model = KrigingModel::fit(*kernel, design.points.clone(), None, nugget)?;
        let gram = kernel.gram(&design.points, nugget);
        let pointwise = candidates
            .points
            .iter()
            .map(|c| {
                relative_deviation(
                    model.predict_mse(c),
                    model.mse_via_rkhs_with_gram(c, &gram),
                    floor,
                )
            })
            .fold(0.0, f64::max);
        rows.push(RouteRow {
            design_index: i,
            n,
            mmse: m,
            worst_case: w,
            rel_dev: relative_deviation(m, w, floor),
            pointwise_rel_dev: pointwise,
        });
    }
    Ok(rows)
}

fn mse_route_output(rows: &[RouteRow]) -> ExperimentOutput {
    let mut t = CsvTable::new([
        "design_index",
        "n",
        "mmse",
        "worst_case_linf_sq",
        "rel_dev",
        "pointwise_rel_dev",
    ]);
    for r in rows {
        t.row([
            r.design_index.to_string(),
            r.n.to_string(),
            fmt_f64(r.mmse),
            fmt_f64(r.worst_case),
            fmt_f64(r.rel_dev),
            fmt_f64(r.pointwise_rel_dev),
        ]);
    }
    let worst = rows.iter().map(|r| r.rel_dev.max(r.pointwise_rel_dev)).fold(0.0, f64::max);
    ExperimentOutput {
        artifacts: vec![Artifact::new("mse_routes.csv", t.render())],
        summary: vec![format!("max relative deviation between MSE routes: {worst:e}")],
    }
}

// -------------------------------------------------------------- spectral-check

#[derive(Debug, Clone)]
pub struct SpectralCheck {
    pub radii: Vec<f64>,
    pub density: Vec<f64>,
    pub bounds: SandwichBounds,
    /// `(u, closed form, quadrature)` for one-dimensional kernels.
    pub quadrature: Vec<(f64, f64, f64)>,
}

/// Radii `0` and `10^{-3} .. 10^{3}` (ten per decade).
pub fn default_radii() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=60).map(|i| 10f64.powf(-3.0 + i as f64 / 10.0)))
        .collect()
}

pub const QUADRATURE_FREQUENCIES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];

pub fn spectral_check(kernel: &MaternKernel, radii: &[f64]) -> Result<SpectralCheck> {
    let bounds = kernel.spectral_sandwich_check(radii)?;
    let density = radii
        .iter()
        .map(|&r| kernel.spectral_density_radial(r))
        .collect();
    let quadrature = if kernel.dim() == 1 {
        QUADRATURE_FREQUENCIES
            .iter()
            .map(|&u| {
                (
                    u,
                    kernel.spectral_density_radial(u),
                    spectral_density_quadrature_1d(kernel, u),
                )
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SpectralCheck {
        radii: radii.to_vec(),
        density,
        bounds,
        quadrature,
    })
}

impl SpectralCheck {
    pub fn max_quadrature_rel_err(&self) -> f64 {
        self.quadrature
            .iter()
            .map(|(_, c, q)| ((c - q) / c).abs())
            .fold(0.0, f64::max)
    }

    fn output(&self) -> ExperimentOutput {
        let s = self.bounds.s;
        let mut t = CsvTable::new(["radius", "spectral_density", "g"]);
        t.comment(format!("s = {}", fmt_f64(s)));
        for (r, f) in self.radii.iter().zip(&self.density) {
            t.row([fmt_f64(*r), fmt_f64(*f), fmt_f64(f * (1.0 + r * r).powf(s))]);
        }
        let mut out = ExperimentOutput::default();
        out.artifacts.push(Artifact::new("spectral.csv", t.render()));
        let mut b = CsvTable::new(["c1_hat", "c2_hat", "ratio", "s"]);
        b.row([
            fmt_f64(self.bounds.c1_hat),
            fmt_f64(self.bounds.c2_hat),
            fmt_f64(self.bounds.ratio()),
            fmt_f64(s),
        ]);
        out.artifacts.push(Artifact::new("sandwich.csv", b.render()));
        if !self.quadrature.is_empty() {
            let mut q = CsvTable::new(["u", "closed_form", "quadrature", "rel_err"]);
            for (u, c, v) in &self.quadrature {
                q.row([fmt_f64(*u), fmt_f64(*c), fmt_f64(*v), fmt_f64(((c - v) / c).abs())]);
            }
            out.artifacts.push(Artifact::new("quadrature.csv", q.render()));
            out.summary.push(format!(
                "quadrature max relative error {:e}",
                self.max_quadrature_rel_err()
            ));
        }
        out.summary.push(format!(
            "c1_hat = {:.6e}, c2_hat = {:.6e}, ratio = {:.4}, s = {s}",
            self.bounds.c1_hat,
            self.bounds.c2_hat,
            self.bounds.ratio()
        ));
        out
    }
}

// ------------------------------------------------------------ adaptivity-check

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptivityRow {
    pub n: usize,
    /// Monte Carlo `vol · E mean_grid (ξ - ξ̂)²` for expected improvement.
    pub ei_imse: MeanSe,
    /// Same, through the realized-design kriging variance.
    pub ei_imse_via_mse: MeanSe,
    /// Deterministic IMSE of the greedy design on the same grid.
    pub greedy_imse: f64,
}

impl AdaptivityRow {
    /// `ei - greedy` in units of the Monte Carlo standard error.
    pub fn margin_in_se(&self) -> f64 {
        (self.ei_imse.mean - self.greedy_imse) / self.ei_imse.se
    }
}

#[derive(Debug, Clone)]
pub struct AdaptivityCheck {
    pub rows: Vec<AdaptivityRow>,
    pub identity: Vec<(usize, IdentityCheck)>,
    pub identity_n: usize,
}

/// Uniform lattice including the endpoints, used as the simulation grid.
pub fn simulation_grid(domain: &Domain, size: usize) -> Result<Arc<CandidateSet>> {
    Ok(Arc::new(CandidateSet::tensor_grid(domain, size)?))
}

fn default_probes(grid_len: usize) -> Vec<usize> {
    [0.2, 0.45, 0.8]
        .iter()
        .map(|f| ((grid_len - 1) as f64 * f).round() as usize)
        .collect()
}

/// Expected improvement vs the greedy design on GP paths, plus the
/// realized-design identity at probe points.
#[allow(clippy::too_many_arguments)]
pub fn adaptivity_check(
    kernel: &MaternKernel,
    domain: &Domain,
    ns: &[usize],
    grid_size: usize,
    m: usize,
    x1: &[f64],
    seed: u64,
    nugget: f64,
    probes: Option<&[usize]>,
) -> Result<AdaptivityCheck> {
    if m < 2 {
        return Err(Error::InsufficientSamples(m));
    }
    let grid = simulation_grid(domain, grid_size)?;
    let x1 = grid.nearest_index(x1);
    let n_max = *ns.last().expect("nonempty n list");

    let greedy = greedy_mmse(kernel, domain, n_max, grid.points.point(x1), &grid, nugget)?;
    let greedy_imse: Vec<f64> = ns
        .iter()
        .map(|&n| imse(kernel, domain, &greedy.prefix(n), &grid, nugget).map(|c| c.value))
        .collect::<Result<_>>()?;

    let sampler = GpSampler::new(*kernel, Arc::clone(&grid), nugget)?;
    let volume = domain.volume();
    let mut sq: Vec<Vec<f64>> = vec![Vec::with_capacity(m); ns.len()];
    let mut via: Vec<Vec<f64>> = vec![Vec::with_capacity(m); ns.len()];
    for i in 0..m {
        let path = sampler.sample(seed, i);
        let mut runner = EiRunner::new(kernel, &path, x1, nugget)?;
        for (k, &n) in ns.iter().enumerate() {
            while runner.trace().len() < n {
                runner.step()?;
            }
            let e = runner.grid_errors();
            sq[k].push(volume * e.squared_error);
            via[k].push(volume * e.mse);
        }
    }
    let rows = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| AdaptivityRow {
            n,
            ei_imse: MeanSe::of(sq[k].iter().copied()),
            ei_imse_via_mse: MeanSe::of(via[k].iter().copied()),
            greedy_imse: greedy_imse[k],
        })
        .collect();

    let probes = probes.map_or_else(|| default_probes(grid.len()), <[usize]>::to_vec);
    let identity_n = ns[0];
    let strategy = Strategy::ExpectedImprovement {
        n: identity_n,
        x1_index: x1,
    };
    let identity = probes
        .iter()
        .map(|&p| {
            adaptivity_identity_check(kernel, Arc::clone(&grid), &strategy, p, m, seed, nugget)
                .map(|c| (p, c))
        })
        .collect::<Result<_>>()?;
    Ok(AdaptivityCheck {
        rows,
        identity,
        identity_n,
    })
}

impl AdaptivityCheck {
    fn output(&self) -> ExperimentOutput {
        let mut t = CsvTable::new([
            "n",
            "ei_imse",
            "ei_imse_se",
            "ei_imse_via_mse",
            "ei_imse_via_mse_se",
            "greedy_imse",
        ]);
        for r in &self.rows {
            t.row([
                r.n.to_string(),
                fmt_f64(r.ei_imse.mean),
                fmt_f64(r.ei_imse.se),
                fmt_f64(r.ei_imse_via_mse.mean),
                fmt_f64(r.ei_imse_via_mse.se),
                fmt_f64(r.greedy_imse),
            ]);
        }
        let mut id = CsvTable::new(["probe_index", "n", "m", "lhs", "lhs_se", "rhs", "rhs_se", "z_score"]);
        for (p, c) in &self.identity {
            id.row([
                p.to_string(),
                self.identity_n.to_string(),
                c.m.to_string(),
                fmt_f64(c.lhs),
                fmt_f64(c.lhs_se),
                fmt_f64(c.rhs),
                fmt_f64(c.rhs_se),
                fmt_f64(c.z_score),
            ]);
        }
        let mut out = ExperimentOutput::default();
        out.artifacts.push(Artifact::new("adaptivity.csv", t.render()));
        out.artifacts.push(Artifact::new("identity.csv", id.render()));
        for r in &self.rows {
            out.summary.push(format!(
                "n = {}: EI IMSE {:.4e} ± {:.1e}, greedy IMSE {:.4e} ({:+.1} SE)",
                r.n,
                r.ei_imse.mean,
                r.ei_imse.se,
                r.greedy_imse,
                r.margin_in_se()
            ));
        }
        for (p, c) in &self.identity {
            out.summary.push(format!("identity at grid index {p}: z = {:.3}", c.z_score));
        }
        out
    }
}

// ------------------------------------------------------------------ optimization

#[derive(Debug, Clone)]
pub struct OptSeries {
    pub strategy: String,
    pub ns: Vec<usize>,
    pub mean_gap: Vec<MeanSe>,
    /// `gaps[k][i]` is the gap at `ns[k]` on path `i`.
    pub gaps: Vec<Vec<f64>>,
    pub rate: RateReport,
}

#[derive(Debug, Clone)]
pub struct OptExperiment {
    pub series: Vec<OptSeries>,
    pub path_seeds: Vec<u64>,
}

#[allow(clippy::too_many_arguments)]
fn series_from_traces(
    strategy: &str,
    ns: &[usize],
    traces: &[Vec<StrategyTrace>],
    paths: &[SamplePath],
    proxy: SupProxy,
    log_correction: bool,
    theory: f64,
    min_n: u64,
) -> Result<OptSeries> {
    let mut mean_gap = Vec::with_capacity(ns.len());
    let mut gaps = Vec::with_capacity(ns.len());
    for tr in traces {
        let summary = opt_error(tr, paths, proxy)?;
        gaps.push(summary.per_path.iter().map(|r| r.gap).collect());
        mean_gap.push(MeanSe {
            mean: summary.mean_gap,
            se: summary.std_err,
        });
    }
    let ns_u: Vec<u64> = ns.iter().map(|&n| n as u64).collect();
    let means: Vec<f64> = mean_gap.iter().map(|g| g.mean).collect();
    let rate = fit_exponent_from(&ns_u, &means, log_correction, min_n)?.with_theory(theory);
    Ok(OptSeries {
        strategy: strategy.to_string(),
        ns: ns.to_vec(),
        mean_gap,
        gaps,
        rate,
    })
}

/// Grid indices of `t_i = i/n`, `i = 1..=n`, on a grid `j / (G - 1)`.
pub fn uniform_indices(n: usize, grid_len: usize) -> Vec<usize> {
    (1..=n)
        .map(|i| ((i * (grid_len - 1)) as f64 / n as f64).round() as usize)
        .collect()
}

/// Average optimization gap of uniform designs on Brownian-motion paths.
pub fn optim_wiener(
    ns: &[usize],
    grid_size: usize,
    m: usize,
    seed: u64,
    proxy: SupProxy,
    min_n: u64,
) -> Result<OptExperiment> {
    let times: Vec<f64> = (0..grid_size)
        .map(|j| j as f64 / (grid_size - 1) as f64)
        .collect();
    let paths = sample_wiener_paths(&times, m, seed)?;
    let traces = ns
        .iter()
        .map(|&n| {
            let idx = uniform_indices(n, grid_size);
            paths.iter().map(|p| run_nonadaptive(&idx, p)).collect()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    let theory = theory_slope(Problem::OptWiener, 0.5, 1);
    let series = series_from_traces("uniform", ns, &traces, &paths, proxy, false, theory, min_n)?;
    Ok(OptExperiment {
        series: vec![series],
        path_seeds: paths.iter().map(|p| p.seed).collect(),
    })
}

/// Tensor-grid designs snapped to the nearest simulation-grid points.
pub fn snapped_grid_indices(domain: &Domain, grid: &CandidateSet, n: usize) -> Result<Vec<usize>> {
    let design = grid_design(domain, n)?;
    let idx: Vec<usize> = design.points.iter().map(|p| grid.nearest_index(p)).collect();
    let mut sorted = idx.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != idx.len() {
        return Err(Error::InvalidParameter {
            name: "resolution.grid",
            reason: format!("grid too coarse: design of {n} points collapses when snapped"),
        });
    }
    Ok(idx)
}

/// Average optimization gap of tensor-grid designs (and optionally expected
/// improvement) on Matérn GP paths.
#[allow(clippy::too_many_arguments)]
pub fn optim_matern(
    kernel: &MaternKernel,
    domain: &Domain,
    ns: &[usize],
    grid_size: usize,
    m: usize,
    seed: u64,
    nugget: f64,
    include_ei: Option<&[f64]>,
    min_n: u64,
) -> Result<OptExperiment> {
    let grid = simulation_grid(domain, grid_size)?;
    let sampler = GpSampler::new(*kernel, Arc::clone(&grid), nugget)?;
    let paths = sampler.sample_many(m, seed);
    let theory = theory_slope(Problem::OptMaternBound, kernel.nu(), kernel.dim());
    let traces = ns
        .iter()
        .map(|&n| {
            let idx = snapped_grid_indices(domain, &grid, n)?;
            paths.iter().map(|p| run_nonadaptive(&idx, p)).collect()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    let mut series = vec![series_from_traces(
        "grid",
        ns,
        &traces,
        &paths,
        SupProxy::GridMax,
        true,
        theory,
        min_n,
    )?];
    if let Some(x1) = include_ei {
        let x1 = grid.nearest_index(x1);
        let n_max = *ns.last().expect("nonempty n list");
        let full: Vec<StrategyTrace> = paths
            .iter()
            .map(|p| Strategy::ExpectedImprovement { n: n_max, x1_index: x1 }.run(kernel, p, nugget))
            .collect::<Result<_>>()?;
        let ei_traces: Vec<Vec<StrategyTrace>> = ns
            .iter()
            .map(|&n| full.iter().map(|t| t.prefix(n)).collect())
            .collect();
        // EI gaps can reach zero; only the mean series is fitted, zero means are rejected
        if let Ok(s) =
            series_from_traces("ei", ns, &ei_traces, &paths, SupProxy::GridMax, true, theory, min_n)
        {
            series.push(s);
        }
    }
    Ok(OptExperiment {
        series,
        path_seeds: paths.iter().map(|p| p.seed).collect(),
    })
}

impl OptExperiment {
    fn output(&self) -> ExperimentOutput {
        let mut per_path = CsvTable::new(["path_index", "seed", "n", "strategy", "gap"]);
        let mut summary = CsvTable::new(["n", "strategy", "mean_gap", "std_err"]);
        for s in &self.series {
            for (k, n) in s.ns.iter().enumerate() {
                for (i, g) in s.gaps[k].iter().enumerate() {
                    per_path.row([
                        i.to_string(),
                        self.path_seeds[i].to_string(),
                        n.to_string(),
                        s.strategy.clone(),
                        fmt_f64(*g),
                    ]);
                }
                summary.row([
                    n.to_string(),
                    s.strategy.clone(),
                    fmt_f64(s.mean_gap[k].mean),
                    fmt_f64(s.mean_gap[k].se),
                ]);
            }
        }
        let mut out = ExperimentOutput::default();
        out.artifacts.push(Artifact::new("gaps.csv", per_path.render()));
        out.artifacts.push(Artifact::new("gap_summary.csv", summary.render()));
        for s in &self.series {
            out.push_rate(&format!("gap_{}", s.strategy), &s.rate);
        }
        out
    }
}

// ----------------------------------------------------------------------- runner

/// Executes a validated configuration and returns the artifacts it produced.
pub fn execute(v: &ValidatedConfig) -> Result<ExperimentOutput> {
    let c = &v.config;
    let (kernel, domain) = (&v.kernel, &v.domain);
    let run = &c.run;
    let res = &c.resolution;
    let x1 = c.design.x1.clone().unwrap_or_else(|| domain.center());
    let candidates = || build_candidates(res.candidate_kind.kind(), domain, res.candidates, run.seed);
    match c.experiment {
        ExperimentKind::ApproxRates => {
            let quad = CandidateSet::low_discrepancy(domain, res.quadrature)?;
            approx_rates(
                kernel,
                domain,
                c.design.kind,
                &run.n_list,
                &candidates()?,
                &quad,
                &x1,
                run.nugget,
                run.seed,
                run.min_n,
            )
            .map(|r| r.output())
        }
        ExperimentKind::GreedyVsGrid => {
            greedy_vs_grid(kernel, domain, &run.n_list, &x1, &candidates()?, run.nugget, run.min_n)
                .map(|r| r.output())
        }
        ExperimentKind::MseRouteCheck => mse_route_check(
            kernel,
            domain,
            &run.n_list,
            run.m,
            &candidates()?,
            run.nugget,
            run.seed,
        )
        .map(|rows| mse_route_output(&rows)),
        ExperimentKind::SpectralCheck => spectral_check(kernel, &default_radii()).map(|r| r.output()),
        ExperimentKind::AdaptivityCheck => adaptivity_check(
            kernel,
            domain,
            &run.n_list,
            res.grid,
            run.m,
            &x1,
            run.seed,
            run.nugget,
            res.probes.as_deref(),
        )
        .map(|r| r.output()),
        ExperimentKind::OptimWiener => {
            let proxy = match run.sup.unwrap_or(SupKind::Continuous) {
                SupKind::Grid => SupProxy::GridMax,
                SupKind::Continuous => SupProxy::Continuous,
            };
            optim_wiener(&run.n_list, res.grid, run.m, run.seed, proxy, run.min_n).map(|r| r.output())
        }
        ExperimentKind::OptimMatern => optim_matern(
            kernel,
            domain,
            &run.n_list,
            res.grid,
            run.m,
            run.seed,
            run.nugget,
            run.include_ei.then_some(x1.as_slice()),
            run.min_n,
        )
        .map(|r| r.output()),
    }
}

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical {
        experiment: &'static str,
        source: Error,
    },
    Io(io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical { .. } => 3,
            Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "invalid config: {e}"),
            Self::Numerical { experiment, source } => {
                write!(f, "numerical failure in {experiment}: {source}")
            }
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    /// Classifies a library error raised while running `experiment`.
    pub fn from_error(e: Error, experiment: ExperimentKind) -> Self {
        if e.is_numerical() {
            Self::Numerical {
                experiment: experiment.as_str(),
                source: e,
            }
        } else {
            let key = match &e {
                Error::InvalidParameter { name, .. } => (*name).to_string(),
                Error::SizeOverflow { .. } => "resolution".to_string(),
                _ => "config".to_string(),
            };
            Self::Config(ConfigError {
                key,
                message: e.to_string(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Parses and validates a config; the output directory may be overridden.
pub fn load_config(text: &str, output_override: Option<&Path>) -> std::result::Result<ValidatedConfig, RunError> {
    let mut cfg = ExperimentConfig::parse(text).map_err(RunError::Config)?;
    if let Some(dir) = output_override {
        cfg.output_dir = dir.to_path_buf();
    } else if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    cfg.validate().map_err(RunError::Config)
}

/// Runs an experiment and writes the manifest and every artifact atomically
/// into the configured output directory.
pub fn run_config(v: &ValidatedConfig) -> std::result::Result<RunOutcome, RunError> {
    let output = execute(v).map_err(|e| RunError::from_error(e, v.config.experiment))?;
    let dir = v.config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(RunError::Io)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = format!(
        "# tool_version: krigsearch {}\n# generated_unix: {stamp}\n{}",
        crate::VERSION,
        v.config.to_flat_toml()
    );
    let mut files = Vec::new();
    let manifest_path = dir.join("manifest.toml");
    write_atomic(&manifest_path, &manifest).map_err(RunError::Io)?;
    files.push(manifest_path);
    for a in &output.artifacts {
        let path = dir.join(&a.name);
        write_atomic(&path, &a.contents).map_err(RunError::Io)?;
        files.push(path);
    }
    Ok(RunOutcome {
        output_dir: dir,
        files,
        summary: output.summary,
    })
}
