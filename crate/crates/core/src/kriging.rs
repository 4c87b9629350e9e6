//! Simple kriging (known zero mean) and its mean-square error.

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointSet};
use crate::kernel::MaternKernel;
use crate::linalg::{dot, dot_compensated, LowerFactor};

/// Minimum separation between design points, relative to the lengthscale.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Round-off allowance for negative MSE values, relative to σ0².
pub const MSE_ROUNDOFF: f64 = 1e-8;

/// Absolute accuracy of `σ0² - |L^{-1}k|²` in double precision, relative to σ0².
/// MSE values at design points equal the nugget only up to this floor.
pub const MSE_RESOLUTION: f64 = 1e-14;

/// Largest MSE allowed at a design point: `nugget·σ0²·(1 + 1e-6)` plus the
/// double-precision floor.
pub fn design_point_mse_bound(nugget: f64, variance: f64) -> f64 {
    nugget * variance * (1.0 + 1e-6) + MSE_RESOLUTION * variance
}

/// A fitted interpolant: design, Cholesky factor of `Gram + nugget·σ0²·I`,
/// and optionally the observations `Z_i = f(X_i)`.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    kernel: MaternKernel,
    points: PointSet,
    factor: LowerFactor,
    values: Option<Vec<f64>>,
    /// `L^{-1} z`, present iff `values` is.
    whitened: Option<Vec<f64>>,
    nugget: f64,
}

impl KrigingModel {
    pub fn fit(
        kernel: MaternKernel,
        points: PointSet,
        values: Option<Vec<f64>>,
        nugget: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: "need at least one design point".into(),
            });
        }
        if points.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: points.dim(),
            });
        }
        check_nugget(nugget)?;
        if let Some(v) = &values {
            if v.len() != points.len() {
                return Err(Error::LengthMismatch {
                    what: "values vs points",
                    left: v.len(),
                    right: points.len(),
                });
            }
        }
        let min_sq = (MIN_SEPARATION * kernel.lengthscale()).powi(2);
        for i in 1..points.len() {
            for j in 0..i {
                if squared_distance(points.point(i), points.point(j)) < min_sq {
                    return Err(Error::SingularGram { index: i, pivot: 0.0 });
                }
            }
        }
        let gram = kernel.gram(&points, nugget);
        let factor = LowerFactor::cholesky(&gram).map_err(|e| Error::SingularGram {
            index: e.index,
            pivot: e.pivot,
        })?;
        let whitened = values.as_ref().map(|z| factor.solve_lower(z));
        Ok(Self {
            kernel,
            points,
            factor,
            values,
            whitened,
            nugget,
        })
    }

    /// Model on `points ∪ {point}`, obtained by appending one row to the factor.
    pub fn extend(&self, point: &[f64], value: Option<f64>) -> Result<Self> {
        if point.len() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: point.len(),
            });
        }
        match (&self.values, value) {
            (Some(_), None) => return Err(Error::MissingValues),
            (None, Some(_)) => {
                return Err(Error::InvalidParameter {
                    name: "value",
                    reason: "model has no observations; extend without a value".into(),
                })
            }
            _ => {}
        }
        let n = self.len();
        let min_sq = (MIN_SEPARATION * self.kernel.lengthscale()).powi(2);
        if self
            .points
            .iter()
            .any(|p| squared_distance(p, point) < min_sq)
        {
            return Err(Error::SingularGram { index: n, pivot: 0.0 });
        }
        let k = self.kernel.cross(point, &self.points);
        let offdiag = self.factor.solve_lower(&k);
        let pivot = self.kernel.variance() * (1.0 + self.nugget) - dot(&offdiag, &offdiag);
        if !(pivot > 0.0 && pivot.is_finite()) {
            return Err(Error::SingularGram { index: n, pivot });
        }
        let diag = pivot.sqrt();

        let mut next = self.clone();
        next.points.try_push(point)?;
        if let (Some(vals), Some(w), Some(z)) = (&mut next.values, &mut next.whitened, value) {
            let wn = (z - dot(&offdiag, w)) / diag;
            vals.push(z);
            w.push(wn);
        }
        next.factor.push_row(&offdiag, diag);
        Ok(next)
    }

    pub fn kernel(&self) -> &MaternKernel {
        &self.kernel
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn factor(&self) -> &LowerFactor {
        &self.factor
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Kriging weights `λ(x)`, solving `(Gram + nugget) λ = k_n(x)`.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let k = self.kernel.cross(x, &self.points);
        self.factor.solve_upper(&self.factor.solve_lower(&k))
    }

    /// `ξ̂_n(x) = Σ λ^i(x) Z_i`.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        let w = self.whitened.as_ref().ok_or(Error::MissingValues)?;
        let v = self.factor.solve_lower(&self.kernel.cross(x, &self.points));
        Ok(dot(&v, w))
    }

    /// `σ²_n(x) = k(x,x) - k_n(x)^T (Gram + nugget)^{-1} k_n(x)`; never reads the observations.
    pub fn predict_mse(&self, x: &[f64]) -> f64 {
        let v = self.factor.solve_lower(&self.kernel.cross(x, &self.points));
        clamp_mse(self.kernel.variance() - dot(&v, &v), self.kernel.variance())
    }

    /// Squared RKHS norm `‖k(x,·) - Σ λ^i k(x_i,·)‖²`, expanded term by term
    /// against a freshly assembled Gram matrix.
    ///
    /// Evaluated as `k(x,x) - λᵀk + λᵀ(Gλ - k)` with compensated dot products;
    /// the naive expansion loses about `ε Σ|λ_i k_i|` to cancellation.
    pub fn mse_via_rkhs(&self, x: &[f64]) -> f64 {
        let gram = self.kernel.gram(&self.points, self.nugget);
        self.mse_via_rkhs_with_gram(x, &gram)
    }

    pub(crate) fn mse_via_rkhs_with_gram(&self, x: &[f64], gram: &crate::linalg::SymMatrix) -> f64 {
        let k = self.kernel.cross(x, &self.points);
        let lambda = self.factor.solve_upper(&self.factor.solve_lower(&k));
        let neg_lambda: Vec<f64> = lambda.iter().map(|l| -l).collect();
        let residual: Vec<f64> = (0..lambda.len())
            .map(|i| dot_compensated(-k[i], gram.row(i), &lambda))
            .collect();
        let head = dot_compensated(self.kernel.variance(), &neg_lambda, &k);
        let raw = head + dot_compensated(0.0, &lambda, &residual);
        clamp_mse(raw, self.kernel.variance())
    }
}

fn check_nugget(nugget: f64) -> Result<()> {
    if nugget.is_finite() && nugget >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "nugget",
            reason: format!("must be finite and nonnegative (got {nugget})"),
        })
    }
}

/// Clamps round-off negatives to zero.
///
/// # Panics
/// If `raw < -1e-8 σ0²`: the factorization is inconsistent with the kernel.
pub(crate) fn clamp_mse(raw: f64, variance: f64) -> f64 {
    assert!(
        raw >= -MSE_ROUNDOFF * variance,
        "internal consistency failure: MSE {raw:e} below round-off tolerance"
    );
    raw.max(0.0)
}

/// Kriging mean and MSE over a fixed set of query points, updated in O(nM)
/// per added design point.
///
/// Each query keeps `v(x) = L^{-1} k_n(x)`; adding a point appends one entry to
/// every `v(x)`.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    model: KrigingModel,
    queries: PointSet,
    whitened_cross: Vec<Vec<f64>>,
    raw_mse: Vec<f64>,
    means: Option<Vec<f64>>,
}

impl PosteriorGrid {
    pub fn new(model: KrigingModel, queries: PointSet) -> Result<Self> {
        if queries.dim() != model.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.kernel.dim(),
                got: queries.dim(),
            });
        }
        let variance = model.kernel.variance();
        let mut whitened_cross = Vec::with_capacity(queries.len());
        let mut raw_mse = Vec::with_capacity(queries.len());
        for q in queries.iter() {
            let v = model.factor.solve_lower(&model.kernel.cross(q, &model.points));
            raw_mse.push(variance - dot(&v, &v));
            whitened_cross.push(v);
        }
        let means = model
            .whitened
            .as_ref()
            .map(|w| whitened_cross.iter().map(|v| dot(v, w)).collect());
        Ok(Self {
            model,
            queries,
            whitened_cross,
            raw_mse,
            means,
        })
    }

    pub fn add_point(&mut self, point: &[f64], value: Option<f64>) -> Result<()> {
        let n = self.model.len();
        let next = self.model.extend(point, value)?;
        let row = next.factor.row(n);
        let (offdiag, diag) = (&row[..n], row[n]);
        let wn = next.whitened.as_ref().map(|w| w[n]);
        let kernel = next.kernel;
        for (i, (q, v)) in self
            .queries
            .iter()
            .zip(self.whitened_cross.iter_mut())
            .enumerate()
        {
            let vn = (kernel.eval(q, point) - dot(offdiag, v)) / diag;
            v.push(vn);
            self.raw_mse[i] -= vn * vn;
            if let (Some(means), Some(wn)) = (&mut self.means, wn) {
                means[i] += vn * wn;
            }
        }
        self.model = next;
        Ok(())
    }

    pub fn model(&self) -> &KrigingModel {
        &self.model
    }

    pub fn queries(&self) -> &PointSet {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn mse(&self, i: usize) -> f64 {
        clamp_mse(self.raw_mse[i], self.model.kernel.variance())
    }

    pub fn mses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mse(i)).collect()
    }

    pub fn mean(&self, i: usize) -> Option<f64> {
        self.means.as_ref().map(|m| m[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ou() -> MaternKernel {
        MaternKernel::new(1.0, 1.0, 0.5, 1).unwrap()
    }

    fn pts(xs: &[f64]) -> PointSet {
        PointSet::from_flat(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn single_point_factor() {
        let k = MaternKernel::new(2.0, 1.0, 1.5, 1).unwrap();
        let m = KrigingModel::fit(k, pts(&[0.3]), None, 0.25).unwrap();
        assert_relative_eq!(m.factor().diag(0), (2.0f64 * 1.25).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn duplicate_points_are_singular() {
        let err = KrigingModel::fit(ou(), pts(&[0.2, 0.2]), None, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularGram { .. }));
        let m = KrigingModel::fit(ou(), pts(&[0.2]), None, 0.0).unwrap();
        assert!(matches!(m.extend(&[0.2], None), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn one_point_closed_forms() {
        let m = KrigingModel::fit(ou(), pts(&[0.0]), Some(vec![2.0]), 0.0).unwrap();
        // λ = k(0.5, 0) / k(0, 0)
        assert_relative_eq!(m.predict_mean(&[0.5]).unwrap(), 2.0 * (-0.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(m.predict_mse(&[0.5]), 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(m.mse_via_rkhs(&[0.5]), 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn missing_values_are_reported() {
        let m = KrigingModel::fit(ou(), pts(&[0.0]), None, 0.0).unwrap();
        assert_eq!(m.predict_mean(&[0.1]), Err(Error::MissingValues));
        assert!(m.extend(&[0.5], Some(1.0)).is_err());
        let with = KrigingModel::fit(ou(), pts(&[0.0]), Some(vec![1.0]), 0.0).unwrap();
        assert_eq!(with.extend(&[0.5], None).unwrap_err(), Error::MissingValues);
    }

    #[test]
    fn interpolates_observations() {
        let m = KrigingModel::fit(ou(), pts(&[0.0, 0.4, 0.9]), Some(vec![1.0, -2.0, 0.5]), 0.0).unwrap();
        for (x, z) in [(0.0, 1.0), (0.4, -2.0), (0.9, 0.5)] {
            assert!((m.predict_mean(&[x]).unwrap() - z).abs() < 1e-8);
            assert!(m.predict_mse(&[x]) < 1e-8);
        }
        let zero = KrigingModel::fit(ou(), pts(&[0.0, 0.5]), Some(vec![0.0, 0.0]), 0.0).unwrap();
        assert_eq!(zero.predict_mean(&[0.77]).unwrap(), 0.0);
    }

    #[test]
    fn far_away_mse_tends_to_variance() {
        let m = KrigingModel::fit(ou(), pts(&[0.0, 0.5]), None, 0.0).unwrap();
        assert!((m.predict_mse(&[60.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extend_then_predict_at_new_point() {
        let nugget = 1e-10;
        let m = KrigingModel::fit(ou(), pts(&[0.0]), None, nugget).unwrap();
        let e = m.extend(&[0.7], None).unwrap();
        assert!(e.predict_mse(&[0.7]) <= design_point_mse_bound(nugget, 1.0));
    }

    #[test]
    fn posterior_grid_tracks_direct_predictions() {
        let k = MaternKernel::new(1.0, 0.3, 1.5, 1).unwrap();
        let queries = pts(&(0..41).map(|i| i as f64 / 40.0).collect::<Vec<_>>());
        let m = KrigingModel::fit(k, pts(&[0.5]), Some(vec![0.3]), 1e-10).unwrap();
        let mut grid = PosteriorGrid::new(m, queries.clone()).unwrap();
        for (x, z) in [(0.1, -1.0), (0.85, 2.0), (0.3, 0.0)] {
            grid.add_point(&[x], Some(z)).unwrap();
        }
        let model = grid.model();
        for (i, q) in queries.iter().enumerate() {
            assert!((grid.mse(i) - model.predict_mse(q)).abs() < 1e-12);
            assert!((grid.mean(i).unwrap() - model.predict_mean(q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "internal consistency failure")]
    fn strongly_negative_mse_panics() {
        clamp_mse(-1e-6, 1.0);
    }
}
