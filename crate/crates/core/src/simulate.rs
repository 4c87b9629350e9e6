//! Sample paths on a finite grid, search strategies run on them, and Monte
//! Carlo estimates of approximation and optimization errors.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{argmax, CandidateSet};
use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::kernel::MaternKernel;
use crate::kriging::{KrigingModel, PosteriorGrid};
use crate::linalg::LowerFactor;

/// Largest grid the Cholesky sampler accepts by default.
pub const DEFAULT_GRID_CAP: usize = 4096;

/// Below this posterior standard deviation, expected improvement is `max(μ - b, 0)`.
pub const EI_SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    GpCholesky,
    Wiener,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GpCholesky => "gp-cholesky",
            Self::Wiener => "wiener",
        })
    }
}

/// One realization of the process restricted to `grid`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: Arc<CandidateSet>,
    pub values: Vec<f64>,
    pub index: usize,
    pub seed: u64,
    pub generator: Generator,
    /// Exact supremum over the continuous interval, when the generator can draw it.
    pub continuous_sup: Option<f64>,
}

impl SamplePath {
    pub fn grid_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values).0
    }
}

/// Seed of path `index` under master seed `master` (SplitMix64 finalizer).
pub fn path_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Colors white noise with the Cholesky factor of the grid Gram matrix,
/// which is computed once and shared by every path.
#[derive(Debug, Clone)]
pub struct GpSampler {
    kernel: MaternKernel,
    grid: Arc<CandidateSet>,
    factor: LowerFactor,
    nugget: f64,
}

impl GpSampler {
    pub fn new(kernel: MaternKernel, grid: Arc<CandidateSet>, nugget: f64) -> Result<Self> {
        Self::with_cap(kernel, grid, nugget, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(
        kernel: MaternKernel,
        grid: Arc<CandidateSet>,
        nugget: f64,
        cap: usize,
    ) -> Result<Self> {
        if grid.len() > cap {
            return Err(Error::SizeOverflow {
                requested: grid.len() as u128,
                cap,
            });
        }
        // fit() validates dimensions, separation and the nugget
        let model = KrigingModel::fit(kernel, grid.points.clone(), None, nugget)?;
        Ok(Self {
            kernel,
            grid,
            factor: model.factor().clone(),
            nugget,
        })
    }

    pub fn kernel(&self) -> &MaternKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Arc<CandidateSet> {
        &self.grid
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn sample(&self, master_seed: u64, index: usize) -> SamplePath {
        let seed = path_seed(master_seed, index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..self.grid.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        SamplePath {
            grid: Arc::clone(&self.grid),
            values: self.factor.mul_vec(&z),
            index,
            seed,
            generator: Generator::GpCholesky,
            continuous_sup: None,
        }
    }

    pub fn sample_many(&self, m: usize, master_seed: u64) -> Vec<SamplePath> {
        (0..m).map(|i| self.sample(master_seed, i)).collect()
    }
}

/// `m` zero-mean paths with covariance `Gram + nugget`.
pub fn sample_gp_paths(
    kernel: &MaternKernel,
    grid: Arc<CandidateSet>,
    m: usize,
    seed: u64,
    nugget: f64,
) -> Result<Vec<SamplePath>> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "need at least one path".into(),
        });
    }
    Ok(GpSampler::new(*kernel, grid, nugget)?.sample_many(m, seed))
}

/// Checks that `times` is a valid Wiener grid: starts at 0, strictly increasing, inside [0, 1].
pub fn wiener_grid(times: &[f64]) -> Result<Arc<CandidateSet>> {
    match times.first() {
        None => return Err(Error::BadGrid("grid is empty".into())),
        Some(&t) if t != 0.0 => return Err(Error::BadGrid(format!("grid must start at 0, starts at {t}"))),
        _ => {}
    }
    // written to also catch NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::BadGrid(format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    if times.last().is_some_and(|&t| t > 1.0) {
        return Err(Error::BadGrid("grid exceeds 1".into()));
    }
    Ok(Arc::new(CandidateSet::from_points(PointSet::from_flat(
        1,
        times.to_vec(),
    )?)?))
}

/// Exact Brownian-motion paths on `times`, built from independent Gaussian
/// increments with variance equal to the spacing.
///
/// Each path also carries the exact supremum over `[0, t_last]`: the maximum of
/// the Brownian bridge between consecutive grid values is drawn from its
/// closed-form distribution.
pub fn sample_wiener_paths(times: &[f64], m: usize, seed: u64) -> Result<Vec<SamplePath>> {
    let grid = wiener_grid(times)?;
    Ok((0..m)
        .map(|i| wiener_path(Arc::clone(&grid), seed, i))
        .collect())
}

fn wiener_path(grid: Arc<CandidateSet>, master_seed: u64, index: usize) -> SamplePath {
    let seed = path_seed(master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = grid.points.coords();
    let mut values = Vec::with_capacity(t.len());
    values.push(0.0);
    for w in t.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        let last = *values.last().expect("nonempty");
        values.push(last + (w[1] - w[0]).sqrt() * z);
    }
    let mut sup = 0.0_f64;
    for (k, w) in t.windows(2).enumerate() {
        let (a, b) = (values[k], values[k + 1]);
        let u: f64 = 1.0 - rng.random::<f64>();
        let bridge_max = 0.5 * (a + b + ((b - a).powi(2) - 2.0 * (w[1] - w[0]) * u.ln()).sqrt());
        sup = sup.max(bridge_max);
    }
    SamplePath {
        grid,
        values,
        index,
        seed,
        generator: Generator::Wiener,
        continuous_sup: Some(sup),
    }
}

/// Grid indices a strategy evaluated, in order, with the values it saw.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTrace {
    pub indices: Vec<usize>,
    pub observations: Vec<f64>,
    pub adaptive: bool,
}

impl StrategyTrace {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn prefix(&self, n: usize) -> StrategyTrace {
        StrategyTrace {
            indices: self.indices[..n].to_vec(),
            observations: self.observations[..n].to_vec(),
            adaptive: self.adaptive,
        }
    }

    pub fn best(&self) -> f64 {
        self.observations
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_nonadaptive(indices: &[usize], path: &SamplePath) -> Result<StrategyTrace> {
    let len = path.values.len();
    let mut seen = vec![false; len];
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter {
                name: "design_indices",
                reason: format!("index {i} repeated"),
            });
        }
    }
    Ok(StrategyTrace {
        indices: indices.to_vec(),
        observations: indices.iter().map(|&i| path.values[i]).collect(),
        adaptive: false,
    })
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `E max(Y - best, 0)` for `Y ~ N(mean, sd²)`.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    if sd <= EI_SIGMA_FLOOR {
        return (mean - best).max(0.0);
    }
    let z = (mean - best) / sd;
    (sd * (normal_pdf(z) + z * normal_cdf(z))).max(0.0)
}

/// Expected-improvement search on one path; the posterior over the whole grid
/// is updated incrementally after each evaluation.
#[derive(Debug, Clone)]
pub struct EiRunner<'a> {
    path: &'a SamplePath,
    posterior: PosteriorGrid,
    visited: Vec<bool>,
    trace: StrategyTrace,
}

impl<'a> EiRunner<'a> {
    pub fn new(
        kernel: &MaternKernel,
        path: &'a SamplePath,
        x1_index: usize,
        nugget: f64,
    ) -> Result<Self> {
        let len = path.values.len();
        if x1_index >= len {
            return Err(Error::IndexOutOfRange { index: x1_index, len });
        }
        let grid = &path.grid.points;
        let first = grid.select(&[x1_index]);
        let z = path.values[x1_index];
        let model = KrigingModel::fit(*kernel, first, Some(vec![z]), nugget)?;
        let posterior = PosteriorGrid::new(model, grid.clone())?;
        let mut visited = vec![false; len];
        visited[x1_index] = true;
        Ok(Self {
            path,
            posterior,
            visited,
            trace: StrategyTrace {
                indices: vec![x1_index],
                observations: vec![z],
                adaptive: true,
            },
        })
    }

    /// Evaluates the unvisited grid point with the largest expected improvement.
    pub fn step(&mut self) -> Result<usize> {
        let best = self.trace.best();
        let mut choice: Option<(usize, f64)> = None;
        for i in 0..self.visited.len() {
            if self.visited[i] {
                continue;
            }
            let mean = self.posterior.mean(i).expect("runner model has observations");
            let ei = expected_improvement(mean, self.posterior.mse(i).sqrt(), best);
            if choice.is_none_or(|(_, b)| ei > b) {
                choice = Some((i, ei));
            }
        }
        let (next, _) = choice.ok_or(Error::InvalidParameter {
            name: "n",
            reason: "every grid point has been evaluated".into(),
        })?;
        let z = self.path.values[next];
        self.posterior
            .add_point(self.path.grid.points.point(next), Some(z))?;
        self.visited[next] = true;
        self.trace.indices.push(next);
        self.trace.observations.push(z);
        Ok(next)
    }

    pub fn trace(&self) -> &StrategyTrace {
        &self.trace
    }

    pub fn posterior(&self) -> &PosteriorGrid {
        &self.posterior
    }

    /// Grid averages of the squared prediction error on this path and of the kriging MSE.
    pub fn grid_errors(&self) -> GridErrors {
        let m = self.path.values.len();
        let mut sq = 0.0;
        let mut mse = 0.0;
        for i in 0..m {
            let e = self.path.values[i] - self.posterior.mean(i).expect("observed");
            sq += e * e;
            mse += self.posterior.mse(i);
        }
        GridErrors {
            squared_error: sq / m as f64,
            mse: mse / m as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridErrors {
    pub squared_error: f64,
    pub mse: f64,
}

pub fn run_expected_improvement(
    kernel: &MaternKernel,
    path: &SamplePath,
    n: usize,
    x1_index: usize,
    nugget: f64,
) -> Result<StrategyTrace> {
    if n == 0 || n > path.values.len() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("must be in 1..={} (got {n})", path.values.len()),
        });
    }
    let mut runner = EiRunner::new(kernel, path, x1_index, nugget)?;
    for _ in 1..n {
        runner.step()?;
    }
    Ok(runner.trace)
}

/// What stands in for `sup_x ξ(x)` when measuring the optimization gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupProxy {
    GridMax,
    /// Exact continuous supremum carried by the path (Wiener paths only).
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptResult {
    pub s_true: f64,
    pub s_hat: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptErrorSummary {
    pub mean_gap: f64,
    pub std_err: f64,
    pub per_path: Vec<OptResult>,
}

/// Monte Carlo estimate of `E(S(ξ) - Ŝ_n(ξ))`.
pub fn opt_error(
    traces: &[StrategyTrace],
    paths: &[SamplePath],
    proxy: SupProxy,
) -> Result<OptErrorSummary> {
    if traces.len() != paths.len() {
        return Err(Error::LengthMismatch {
            what: "traces vs paths",
            left: traces.len(),
            right: paths.len(),
        });
    }
    if traces.is_empty() {
        return Err(Error::InsufficientSamples(0));
    }
    let mut per_path = Vec::with_capacity(paths.len());
    for (trace, path) in traces.iter().zip(paths) {
        let s_true = match proxy {
            SupProxy::GridMax => path.grid_max(),
            SupProxy::Continuous => path.continuous_sup.ok_or(Error::InvalidParameter {
                name: "sup_proxy",
                reason: format!("{} paths carry no continuous supremum", path.generator),
            })?,
        };
        let s_hat = trace.best();
        per_path.push(OptResult {
            s_true,
            s_hat,
            gap: (s_true - s_hat).max(0.0),
        });
    }
    let stats = MeanSe::of(per_path.iter().map(|r| r.gap));
    Ok(OptErrorSummary {
        mean_gap: stats.mean,
        std_err: stats.se,
        per_path,
    })
}

/// Sample mean and its standard error (zero for a single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let se = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        };
        Self { mean, se }
    }
}

/// A strategy that can be replayed on any path of a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    NonAdaptive(Vec<usize>),
    ExpectedImprovement { n: usize, x1_index: usize },
}

impl Strategy {
    pub fn run(&self, kernel: &MaternKernel, path: &SamplePath, nugget: f64) -> Result<StrategyTrace> {
        match self {
            Self::NonAdaptive(indices) => run_nonadaptive(indices, path),
            Self::ExpectedImprovement { n, x1_index } => {
                run_expected_improvement(kernel, path, *n, *x1_index, nugget)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// Monte Carlo mean of `(ξ(x) - ξ̂_n(x))²`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Monte Carlo mean of `σ²(x; X_1(ξ), ..., X_n(ξ))`.
    pub rhs: f64,
    pub rhs_se: f64,
    pub z_score: f64,
    pub m: usize,
}

/// Compares both sides of `σ²_n(x) = E σ²(x; X_n(ξ))` at one grid point.
pub fn adaptivity_identity_check(
    kernel: &MaternKernel,
    grid: Arc<CandidateSet>,
    strategy: &Strategy,
    x_probe: usize,
    m: usize,
    seed: u64,
    nugget: f64,
) -> Result<IdentityCheck> {
    if m < 2 {
        return Err(Error::InsufficientSamples(m));
    }
    if x_probe >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: x_probe,
            len: grid.len(),
        });
    }
    let sampler = GpSampler::new(*kernel, grid, nugget)?;
    let probe = sampler.grid().points.point(x_probe).to_vec();
    // simulated values carry the nugget as independent white noise
    let white = nugget * kernel.variance();
    let mut sq = Vec::with_capacity(m);
    let mut mse = Vec::with_capacity(m);
    for i in 0..m {
        let path = sampler.sample(seed, i);
        let trace = strategy.run(kernel, &path, nugget)?;
        let model = KrigingModel::fit(
            *kernel,
            path.grid.points.select(&trace.indices),
            Some(trace.observations.clone()),
            nugget,
        )?;
        let e = path.values[x_probe] - model.predict_mean(&probe)?;
        sq.push(e * e);
        mse.push(model.predict_mse(&probe) + white);
    }
    let l = MeanSe::of(sq);
    let r = MeanSe::of(mse);
    let combined = (l.se * l.se + r.se * r.se).sqrt();
    Ok(IdentityCheck {
        lhs: l.mean,
        lhs_se: l.se,
        rhs: r.mean,
        rhs_se: r.se,
        z_score: (l.mean - r.mean).abs() / combined,
        m,
    })
}
