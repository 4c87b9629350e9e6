//! Maximum and integrated mean-square error of a fixed design, and the
//! worst-case RKHS route to the maximum.

use std::fmt;

use crate::design::{CandidateSet, Design};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernel::MaternKernel;
use crate::kriging::KrigingModel;
use crate::output::{fmt_f64, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Mmse,
    Imse,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mmse => "MMSE",
            Self::Imse => "IMSE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionValue {
    pub name: Criterion,
    pub value: f64,
    pub n: usize,
    pub resolution: usize,
    pub design_label: String,
}

impl CriterionValue {
    pub const CSV_HEADER: [&'static str; 5] = ["name", "n", "value", "resolution", "design_label"];

    pub fn csv_row(&self) -> [String; 5] {
        [
            self.name.to_string(),
            self.n.to_string(),
            fmt_f64(self.value),
            self.resolution.to_string(),
            self.design_label.clone(),
        ]
    }
}

pub fn criteria_table(values: &[CriterionValue]) -> CsvTable {
    let mut t = CsvTable::new(CriterionValue::CSV_HEADER);
    for v in values {
        t.row(v.csv_row());
    }
    t
}

fn fit_design(kernel: &MaternKernel, design: &Design, nugget: f64) -> Result<KrigingModel> {
    if design.is_empty() {
        return Err(Error::InvalidParameter {
            name: "design",
            reason: "design must be nonempty".into(),
        });
    }
    KrigingModel::fit(*kernel, design.points.clone(), None, nugget)
}

fn check_nodes(kernel: &MaternKernel, nodes: &CandidateSet) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidParameter {
            name: "candidates",
            reason: "node set must be nonempty".into(),
        });
    }
    if nodes.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: nodes.dim(),
        });
    }
    Ok(())
}

/// `max_c σ²_n(c)` over the candidates.
pub fn mmse(
    kernel: &MaternKernel,
    design: &Design,
    candidates: &CandidateSet,
    nugget: f64,
) -> Result<CriterionValue> {
    check_nodes(kernel, candidates)?;
    let model = fit_design(kernel, design, nugget)?;
    let value = candidates
        .points
        .iter()
        .map(|c| model.predict_mse(c))
        .fold(0.0, f64::max);
    Ok(CriterionValue {
        name: Criterion::Mmse,
        value,
        n: design.len(),
        resolution: candidates.len(),
        design_label: design.label.clone(),
    })
}

/// `vol(domain) · mean_c σ²_n(c)`: equal-weight quadrature of the MSE against
/// the uniform measure on the box.
pub fn imse(
    kernel: &MaternKernel,
    domain: &Domain,
    design: &Design,
    quadrature: &CandidateSet,
    nugget: f64,
) -> Result<CriterionValue> {
    check_nodes(kernel, quadrature)?;
    let model = fit_design(kernel, design, nugget)?;
    let sum: f64 = quadrature.points.iter().map(|c| model.predict_mse(c)).sum();
    Ok(CriterionValue {
        name: Criterion::Imse,
        value: domain.volume() * sum / quadrature.len() as f64,
        n: design.len(),
        resolution: quadrature.len(),
        design_label: design.label.clone(),
    })
}

/// `max_c ‖k(c,·) - Σ λ^i(c) k(x_i,·)‖²_H`, which for a fixed design equals the
/// squared worst-case sup-norm error over the unit ball of the RKHS.
pub fn worst_case_linf_sq(
    kernel: &MaternKernel,
    design: &Design,
    candidates: &CandidateSet,
    nugget: f64,
) -> Result<f64> {
    check_nodes(kernel, candidates)?;
    let model = fit_design(kernel, design, nugget)?;
    let gram = kernel.gram(&design.points, nugget);
    Ok(candidates
        .points
        .iter()
        .map(|c| model.mse_via_rkhs_with_gram(c, &gram))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use crate::kriging::design_point_mse_bound;
    use approx::assert_relative_eq;

    fn one_point() -> (MaternKernel, Design, CandidateSet) {
        let k = MaternKernel::new(1.0, 1.0, 0.5, 1).unwrap();
        let d = Design::new(PointSet::from_flat(1, vec![0.0]).unwrap(), "origin");
        let c = CandidateSet::tensor_grid(&Domain::unit(1), 2001).unwrap();
        (k, d, c)
    }

    #[test]
    fn one_point_mmse_at_far_endpoint() {
        let (k, d, c) = one_point();
        let v = mmse(&k, &d, &c, 0.0).unwrap();
        assert_relative_eq!(v.value, 1.0 - (-2.0f64).exp(), max_relative = 1e-14);
        assert_eq!((v.n, v.resolution), (1, 2001));
        let w = worst_case_linf_sq(&k, &d, &c, 0.0).unwrap();
        assert_relative_eq!(w, v.value, max_relative = 1e-12);
    }

    #[test]
    fn design_on_candidates_is_near_zero() {
        let k = MaternKernel::new(1.0, 0.5, 1.5, 1).unwrap();
        let c = CandidateSet::tensor_grid(&Domain::unit(1), 9).unwrap();
        let d = Design::new(c.points.clone(), "all");
        let nugget = 1e-10;
        let bound = design_point_mse_bound(nugget, 1.0);
        assert!(mmse(&k, &d, &c, nugget).unwrap().value <= bound);
        assert!(worst_case_linf_sq(&k, &d, &c, nugget).unwrap() <= bound);
        let q = imse(&k, &Domain::unit(1), &d, &c, nugget).unwrap();
        assert!(q.value <= bound);
    }

    #[test]
    fn csv_row_layout() {
        let (k, d, c) = one_point();
        let v = mmse(&k, &d, &c, 0.0).unwrap();
        let text = criteria_table(&[v]).render();
        assert!(text.starts_with("name,n,value,resolution,design_label\nMMSE,1,0.86466"));
    }

    #[test]
    fn empty_design_is_rejected() {
        let (k, _, c) = one_point();
        let empty = Design::new(PointSet::new(1), "none");
        assert!(mmse(&k, &empty, &c, 0.0).is_err());
    }
}
