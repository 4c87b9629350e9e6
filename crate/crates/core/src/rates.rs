//! Log-log least-squares decay exponents and the theoretical targets they are compared with.

use std::fmt;

use crate::error::{Error, Result};
use crate::output::{fmt_f64, CsvTable};

/// Default burn-in: sizes below this are kept in the report but left out of the fit.
pub const DEFAULT_MIN_N: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub ns: Vec<u64>,
    pub errors: Vec<f64>,
    pub fitted_slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub theory_slope: Option<f64>,
    /// Whether errors were divided by `(ln n)^{1/2}` before fitting.
    pub log_correction: bool,
    /// Smallest `n` included in the fit.
    pub min_n: u64,
}

/// OLS slope of `ln(error)` (optionally over `(ln n)^{1/2}`) against `ln n`, using every point.
pub fn fit_exponent(ns: &[u64], errors: &[f64], log_correction: bool) -> Result<RateReport> {
    fit_exponent_from(ns, errors, log_correction, 0)
}

/// Same as [`fit_exponent`] but only points with `n >= min_n` enter the regression.
pub fn fit_exponent_from(
    ns: &[u64],
    errors: &[f64],
    log_correction: bool,
    min_n: u64,
) -> Result<RateReport> {
    if ns.len() != errors.len() {
        return Err(Error::LengthMismatch {
            what: "ns vs errors",
            left: ns.len(),
            right: errors.len(),
        });
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "ns",
            reason: "must be strictly increasing".into(),
        });
    }
    for (&n, &e) in ns.iter().zip(errors) {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::NonPositiveError { n, value: e });
        }
        if n == 0 {
            return Err(Error::BadN(n));
        }
    }
    let used: Vec<(f64, f64)> = ns
        .iter()
        .zip(errors)
        .filter(|(&n, _)| n >= min_n)
        .map(|(&n, &e)| {
            let x = (n as f64).ln();
            let y = if log_correction { e.ln() - 0.5 * x.ln() } else { e.ln() };
            (x, y)
        })
        .collect();
    if used.len() < 3 {
        return Err(Error::TooFewPoints(used.len()));
    }
    if log_correction {
        if let Some(&n) = ns.iter().find(|&&n| n >= min_n && n < 2) {
            return Err(Error::BadN(n));
        }
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = used
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(RateReport {
        ns: ns.to_vec(),
        errors: errors.to_vec(),
        fitted_slope: slope,
        intercept,
        slope_stderr: stderr,
        theory_slope: None,
        log_correction,
        min_n,
    })
}

impl RateReport {
    pub fn with_theory(mut self, slope: f64) -> Self {
        self.theory_slope = Some(slope);
        self
    }

    /// `|fitted - theory| <= tol`; false when no theory slope is attached.
    pub fn matches_theory(&self, tol: f64) -> bool {
        self.theory_slope
            .is_some_and(|t| (self.fitted_slope - t).abs() <= tol)
    }

    /// One-sided check for upper bounds: `fitted <= theory + margin`.
    pub fn below_bound(&self, margin: f64) -> bool {
        self.theory_slope
            .is_some_and(|t| self.fitted_slope <= t + margin)
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(["n", "error", "fitted_slope", "stderr", "theory_slope"]);
        t.comment(format!("log_correction: {}", self.log_correction));
        t.comment(format!("burn_in_min_n: {}", self.min_n));
        let theory = self.theory_slope.map(fmt_f64).unwrap_or_default();
        for (n, e) in self.ns.iter().zip(&self.errors) {
            t.row([
                n.to_string(),
                fmt_f64(*e),
                fmt_f64(self.fitted_slope),
                fmt_f64(self.slope_stderr),
                theory.clone(),
            ]);
        }
        t.render()
    }

    /// Two whitespace-separated columns, `log10 n` and `log10 error`.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# log10_n log10_error\n");
        for (n, e) in self.ns.iter().zip(&self.errors) {
            out.push_str(&format!("{} {}\n", fmt_f64((*n as f64).log10()), fmt_f64(e.log10())));
        }
        out
    }
}

/// Which convergence statement a slope refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    Mmse,
    Imse,
    /// Upper bound `n^{-α/(2d)} (log n)^{1/2}` with Hölder exponent `α = 2ν`.
    OptMaternBound,
    OptWiener,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mmse => "MMSE",
            Self::Imse => "IMSE",
            Self::OptMaternBound => "OPT-matern-bound",
            Self::OptWiener => "OPT-wiener",
        })
    }
}

pub fn theory_slope(problem: Problem, nu: f64, d: usize) -> f64 {
    let d = d as f64;
    match problem {
        Problem::Mmse | Problem::Imse => -2.0 * nu / d,
        Problem::OptMaternBound => -(2.0 * nu) / (2.0 * d),
        Problem::OptWiener => -0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let r = fit_exponent(&[1, 2, 4], &[1.0, 0.25, 0.0625], false).unwrap();
        assert!((r.fitted_slope + 2.0).abs() < 1e-14);
        assert!(r.slope_stderr < 1e-12);
    }

    #[test]
    fn constant_errors_have_zero_slope() {
        let r = fit_exponent(&[3, 5, 9], &[1.0, 1.0, 1.0], false).unwrap();
        assert_eq!(r.fitted_slope, 0.0);
    }

    #[test]
    fn rejects_bad_series() {
        assert_eq!(fit_exponent(&[1, 2], &[1.0, 0.5], false), Err(Error::TooFewPoints(2)));
        assert!(matches!(
            fit_exponent(&[1, 2, 4], &[1.0, 0.0, 0.5], false),
            Err(Error::NonPositiveError { n: 2, .. })
        ));
        assert_eq!(fit_exponent(&[1, 2, 4], &[1.0, 0.5, 0.25], true), Err(Error::BadN(1)));
        assert!(fit_exponent(&[4, 2, 8], &[1.0, 0.5, 0.25], false).is_err());
    }

    #[test]
    fn burn_in_drops_small_sizes() {
        let ns = [2, 4, 8, 16, 32];
        let errs = [5.0, 5.0, 8f64.powi(-1), 16f64.powi(-1), 32f64.powi(-1)];
        let r = fit_exponent_from(&ns, &errs, false, 8).unwrap();
        assert!((r.fitted_slope + 1.0).abs() < 1e-12);
        assert_eq!(r.min_n, 8);
        assert_eq!(r.ns.len(), 5);
    }

    #[test]
    fn theory_targets() {
        assert_eq!(theory_slope(Problem::Mmse, 1.5, 1), -3.0);
        assert_eq!(theory_slope(Problem::Imse, 1.5, 2), -1.5);
        assert_eq!(theory_slope(Problem::OptMaternBound, 0.5, 2), -0.25);
        assert_eq!(theory_slope(Problem::OptWiener, 0.5, 1), -0.5);
    }

    #[test]
    fn csv_and_plot_layout() {
        let r = fit_exponent(&[1, 10, 100], &[1.0, 0.1, 0.01], false)
            .unwrap()
            .with_theory(-1.0);
        let csv = r.to_csv();
        assert!(csv.contains("n,error,fitted_slope,stderr,theory_slope\n"));
        assert!(csv.lines().last().unwrap().starts_with("100,0.01,"));
        assert!(r.plot_data().contains("\n2 -2\n"));
        assert!(r.matches_theory(1e-9));
    }
}
