//! Non-adaptive designs: tensor grids, uniform random designs, and the greedy
//! maximum-variance sequence, plus fill-distance geometry.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Domain, PointSet};
use crate::kernel::MaternKernel;
use crate::kriging::{KrigingModel, PosteriorGrid, MIN_SEPARATION};
use crate::output::fmt_f64;
use crate::sobol::Sobol;

/// Largest number of points a tensor grid may have unless the caller raises the cap.
pub const DEFAULT_SIZE_CAP: usize = 1_000_000;

/// Default candidate-set size for the greedy argmax.
pub const DEFAULT_CANDIDATES: usize = 1 << 12;

/// Default quadrature-node count for integrated criteria.
pub const DEFAULT_QUADRATURE: usize = 1 << 13;

/// Ordered evaluation points; order matters because prefixes are themselves designs.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub points: PointSet,
    pub label: String,
    pub seed: Option<u64>,
}

impl Design {
    pub fn new(points: PointSet, label: impl Into<String>) -> Self {
        Self {
            points,
            label: label.into(),
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn prefix(&self, n: usize) -> Design {
        Design {
            points: self.points.prefix(n),
            label: self.label.clone(),
            seed: self.seed,
        }
    }

    /// CSV with `#` header comments for label and seed, then `x1..xd` columns.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# label: {}\n", self.label);
        match self.seed {
            Some(s) => out.push_str(&format!("# seed: {s}\n")),
            None => out.push_str("# seed: none\n"),
        }
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in self.points.iter() {
            let row: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "design csv",
            reason,
        };
        let mut label = String::new();
        let mut seed = None;
        let mut dim = None;
        let mut coords = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(l) = comment.strip_prefix("label:") {
                    label = l.trim().to_string();
                } else if let Some(s) = comment.strip_prefix("seed:") {
                    seed = s.trim().parse().ok();
                }
                continue;
            }
            match dim {
                None => dim = Some(line.split(',').count()),
                Some(d) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("{e} in row `{line}`")))?;
                    if row.len() != d {
                        return Err(bad(format!("row `{line}` has {} columns, expected {d}", row.len())));
                    }
                    coords.extend(row);
                }
            }
        }
        let dim = dim.ok_or_else(|| bad("missing header row".into()))?;
        Ok(Self {
            points: PointSet::from_flat(dim, coords)?,
            label,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateKind {
    TensorGrid,
    LowDiscrepancy,
    UniformRandom,
    /// Caller-supplied points (e.g. an irregular simulation grid).
    Explicit,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TensorGrid => "tensor-grid",
            Self::LowDiscrepancy => "low-discrepancy",
            Self::UniformRandom => "uniform-random",
            Self::Explicit => "explicit",
        })
    }
}

/// Finite stand-in for the domain when taking sups, argmaxes, and integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: PointSet,
    pub kind: CandidateKind,
    pub seed: Option<u64>,
}

impl CandidateSet {
    /// Lattice with `per_axis` points per axis including both endpoints
    /// (a single point per axis sits at the center).
    pub fn tensor_grid(domain: &Domain, per_axis: usize) -> Result<Self> {
        check_positive("per_axis", per_axis)?;
        let axis: Vec<f64> = if per_axis == 1 {
            vec![0.5]
        } else {
            (0..per_axis)
                .map(|i| i as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let axes = vec![axis; domain.dim()];
        let points = lattice(domain, &axes, DEFAULT_SIZE_CAP)?;
        Ok(Self {
            points,
            kind: CandidateKind::TensorGrid,
            seed: None,
        })
    }

    /// First `m` points of the Sobol' sequence mapped onto the box.
    pub fn low_discrepancy(domain: &Domain, m: usize) -> Result<Self> {
        check_positive("candidates", m)?;
        let mut gen = Sobol::new(domain.dim())?;
        let mut points = PointSet::with_capacity(domain.dim(), m);
        for _ in 0..m {
            points.try_push(&domain.from_unit(&gen.next_point()))?;
        }
        Ok(Self {
            points,
            kind: CandidateKind::LowDiscrepancy,
            seed: None,
        })
    }

    pub fn uniform_random(domain: &Domain, m: usize, seed: u64) -> Result<Self> {
        check_positive("candidates", m)?;
        Ok(Self {
            points: uniform_points(domain, m, seed),
            kind: CandidateKind::UniformRandom,
            seed: Some(seed),
        })
    }

    pub fn from_points(points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter {
                name: "candidates",
                reason: "candidate set must be nonempty".into(),
            });
        }
        Ok(Self {
            points,
            kind: CandidateKind::Explicit,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Index of the candidate nearest to `x`.
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        self.points.nearest(x).map(|(i, _)| i).unwrap_or(0)
    }

    pub fn describe(&self) -> String {
        match self.kind {
            CandidateKind::LowDiscrepancy => format!("sobol-joe-kuo:M={}", self.len()),
            CandidateKind::UniformRandom => {
                format!("uniform-random:M={}:seed={}", self.len(), self.seed.unwrap_or(0))
            }
            kind => format!("{kind}:M={}", self.len()),
        }
    }
}

fn check_positive(name: &'static str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter {
            name,
            reason: "must be at least 1".into(),
        })
    } else {
        Ok(())
    }
}

fn uniform_points(domain: &Domain, n: usize, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = PointSet::with_capacity(domain.dim(), n);
    let mut u = vec![0.0; domain.dim()];
    for _ in 0..n {
        for v in u.iter_mut() {
            *v = rng.random::<f64>();
        }
        points
            .try_push(&domain.from_unit(&u))
            .expect("dimension matches domain");
    }
    points
}

/// Cartesian product of per-axis unit coordinates, last axis varying fastest.
fn lattice(domain: &Domain, axes: &[Vec<f64>], cap: usize) -> Result<PointSet> {
    let total = axes
        .iter()
        .map(|a| a.len() as u128)
        .try_fold(1u128, |acc, n| acc.checked_mul(n))
        .unwrap_or(u128::MAX);
    if total > cap as u128 {
        return Err(Error::SizeOverflow {
            requested: total,
            cap,
        });
    }
    let dim = domain.dim();
    let mut points = PointSet::with_capacity(dim, total as usize);
    let mut idx = vec![0usize; dim];
    let mut u = vec![0.0; dim];
    for _ in 0..total {
        for j in 0..dim {
            u[j] = axes[j][idx[j]];
        }
        points.try_push(&domain.from_unit(&u))?;
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(points)
}

/// `per_axis^d` cell centers of a uniform partition of the box.
pub fn tensor_grid(domain: &Domain, per_axis: usize) -> Result<Design> {
    tensor_grid_capped(domain, per_axis, DEFAULT_SIZE_CAP)
}

pub fn tensor_grid_capped(domain: &Domain, per_axis: usize, cap: usize) -> Result<Design> {
    check_positive("per_axis", per_axis)?;
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| (i as f64 + 0.5) / per_axis as f64)
        .collect();
    let axes = vec![axis; domain.dim()];
    Ok(Design::new(
        lattice(domain, &axes, cap)?,
        format!("tensor-grid:per_axis={per_axis}"),
    ))
}

/// `n` i.i.d. uniform points on the box.
pub fn random_design(domain: &Domain, n: usize, seed: u64) -> Result<Design> {
    check_positive("n", n)?;
    Ok(Design {
        points: uniform_points(domain, n, seed),
        label: format!("uniform-random:n={n}"),
        seed: Some(seed),
    })
}

/// `max_c min_i |c - X_i|` over the candidate set.
pub fn fill_distance(design: &Design, candidates: &CandidateSet) -> f64 {
    assert!(!design.is_empty(), "fill distance of an empty design");
    candidates
        .points
        .iter()
        .map(|c| {
            design
                .points
                .iter()
                .map(|p| squared_distance(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// A greedy design together with `max_c σ²(c; x_1..x_i)` for `i = 1..=n`.
#[derive(Debug, Clone)]
pub struct GreedyRun {
    pub design: Design,
    pub max_mse: Vec<f64>,
}

/// `x_{i+1} = argmax_c σ²(c; x_1, ..., x_i)` over the candidates, lowest index on ties.
pub fn greedy_mmse(
    kernel: &MaternKernel,
    domain: &Domain,
    n: usize,
    x1: &[f64],
    candidates: &CandidateSet,
    nugget: f64,
) -> Result<Design> {
    greedy_mmse_run(kernel, domain, n, x1, candidates, nugget).map(|r| r.design)
}

pub fn greedy_mmse_run(
    kernel: &MaternKernel,
    domain: &Domain,
    n: usize,
    x1: &[f64],
    candidates: &CandidateSet,
    nugget: f64,
) -> Result<GreedyRun> {
    check_positive("n", n)?;
    if candidates.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            reason: "candidate set must be nonempty".into(),
        });
    }
    if candidates.dim() != kernel.dim() || domain.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: candidates.dim(),
        });
    }
    if !domain.contains(x1) {
        return Err(Error::InvalidParameter {
            name: "x1",
            reason: "first point must lie inside the domain".into(),
        });
    }
    let first = PointSet::from_flat(kernel.dim(), x1.to_vec())?;
    let model = KrigingModel::fit(*kernel, first, None, nugget)?;
    let mut posterior = PosteriorGrid::new(model, candidates.points.clone())?;
    let min_sq = (MIN_SEPARATION * kernel.lengthscale()).powi(2);
    let mut max_mse = Vec::with_capacity(n);
    loop {
        let (best, value) = argmax(&posterior.mses());
        max_mse.push(value);
        let selected = posterior.model().len();
        if selected == n {
            break;
        }
        let x = candidates.points.point(best);
        if posterior
            .model()
            .points()
            .iter()
            .any(|p| squared_distance(p, x) < min_sq)
        {
            return Err(Error::DegenerateCandidates { selected });
        }
        posterior.add_point(x, None)?;
    }
    let design = Design::new(
        posterior.model().points().clone(),
        format!("greedy-mmse:candidates={}", candidates.describe()),
    );
    Ok(GreedyRun { design, max_mse })
}

/// Position and value of the maximum; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}
