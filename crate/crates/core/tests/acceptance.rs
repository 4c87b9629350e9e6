//! Acceptance suite: one PASS/FAIL line per criterion.
//! Run with `cargo test --release --test acceptance`. Failures are reported
//! but only turn the exit status nonzero when KRIGSEARCH_ACCEPTANCE_STRICT=1.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use krigsearch::config::{DesignKind, ExperimentConfig};
use krigsearch::design::greedy_mmse_run;
use krigsearch::experiments::{
    adaptivity_check, approx_rates, greedy_vs_grid, optim_matern, optim_wiener, mse_route_check,
    relative_deviation, run_config, spectral_check, default_radii, GREEDY_GRID_FACTOR,
};
use krigsearch::simulate::SupProxy;
use krigsearch::{CandidateSet, Domain, KrigingModel, MaternKernel, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TOL: f64 = 1e-8;
const NUGGET: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn time_limit(elapsed: Duration, limit_s: u64) -> (bool, String) {
    let ok = elapsed.as_secs_f64() <= limit_s as f64;
    (ok, format!("{:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet {
    let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    PointSet::from_flat(d, coords).unwrap()
}

fn random_kernel(rng: &mut ChaCha8Rng, d: usize) -> MaternKernel {
    let nu = [0.5, 1.5, 2.5][rng.random_range(0..3)];
    let rho = rng.random_range(0.1..0.5);
    let var = rng.random_range(0.5..2.0);
    MaternKernel::new(var, rho, nu, d).unwrap()
}

// 1
fn interpolation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_mean, mut worst_mse) = (0.0f64, 0.0f64);
    let mut fit_failures = 0;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=30);
        let k = random_kernel(&mut rng, d);
        let pts = random_points(&mut rng, n, d);
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let model = match KrigingModel::fit(k, pts.clone(), Some(z.clone()), 0.0) {
            Ok(m) => m,
            Err(_) => {
                fit_failures += 1;
                continue;
            }
        };
        for (i, x) in pts.iter().enumerate() {
            worst_mean = worst_mean.max((model.predict_mean(x).unwrap() - z[i]).abs());
            worst_mse = worst_mse.max(model.predict_mse(x) / k.variance());
        }
    }
    outcome(
        fit_failures == 0 && worst_mean <= TOL && worst_mse <= TOL,
        format!("max |mean - z| = {worst_mean:.2e}, max mse/σ0² = {worst_mse:.2e}, fit failures {fit_failures}"),
    )
}

// 2
fn mse_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
    let mut offenders = 0;
    let mut offending_models = Vec::new();
    for model_index in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=30);
        let k = random_kernel(&mut rng, d);
        let model = KrigingModel::fit(k, random_points(&mut rng, n, d), None, NUGGET).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let (a, b) = (model.predict_mse(&x), model.mse_via_rkhs(&x));
            let dev = relative_deviation(a, b, TOL * k.variance());
            if dev > TOL {
                offenders += 1;
                if offending_models.last() != Some(&model_index) {
                    offending_models.push(model_index);
                }
            }
            worst = worst.max(dev);
            worst_abs = worst_abs.max((a - b).abs() / k.variance());
        }
    }
    let k = MaternKernel::new(1.0, 0.3, 1.5, 2).unwrap();
    let dom = Domain::unit(2);
    let cands = CandidateSet::low_discrepancy(&dom, 1024).unwrap();
    let rows = mse_route_check(&k, &dom, &[8, 16, 32, 64], 20, &cands, NUGGET, 7).unwrap();
    let crit = rows.iter().map(|r| r.rel_dev).fold(0.0, f64::max);
    outcome(
        worst <= TOL && crit <= TOL && rows.len() == 20,
        format!(
            "1000 pairs: max rel dev {worst:.2e} ({offenders} pairs over, from models {offending_models:?}; \
             max abs dev {worst_abs:.1e} σ0²); 20 designs: max rel dev {crit:.2e}"
        ),
    )
}

// 3
fn extend_vs_refit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for trial in 0..6 {
        let d = 1 + trial % 3;
        let k = random_kernel(&mut rng, d);
        let pts = random_points(&mut rng, 33, d);
        let z: Vec<f64> = (0..33).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let queries = random_points(&mut rng, 50, d);
        let mut model =
            KrigingModel::fit(k, pts.prefix(1), Some(z[..1].to_vec()), NUGGET).unwrap();
        for i in 1..33 {
            model = model.extend(pts.point(i), Some(z[i])).unwrap();
            let refit = KrigingModel::fit(k, pts.prefix(i + 1), Some(z[..=i].to_vec()), NUGGET).unwrap();
            // factor entries are bounded by σ0
            let (fa, fb) = (model.factor(), refit.factor());
            for r in 0..=i {
                for c in 0..=r {
                    worst = worst.max((fa.get(r, c) - fb.get(r, c)).abs() / k.variance().sqrt());
                }
            }
            for q in queries.iter() {
                worst = worst.max(relative_deviation(
                    model.predict_mse(q),
                    refit.predict_mse(q),
                    TOL * k.variance(),
                ));
                let (ma, mb) = (model.predict_mean(q).unwrap(), refit.predict_mean(q).unwrap());
                worst = worst.max((ma - mb).abs() / ma.abs().max(mb.abs()).max(1.0));
            }
        }
    }
    outcome(worst <= TOL, format!("32 extensions x 6 models: max deviation {worst:.2e}"))
}

// 4
fn spectral() -> Outcome {
    let radii = default_radii();
    let exact = spectral_check(&MaternKernel::new(1.0, 1.0, 0.5, 1).unwrap(), &radii).unwrap();
    let flat = exact.bounds.ratio() - 1.0;
    let mut pass = flat <= 1e-6;
    let mut detail = format!("ν=1/2 ρ=1: c2/c1 - 1 = {flat:.1e}");
    let mut quad = exact.max_quadrature_rel_err();
    for (nu, rho) in [(1.5, 1.0), (2.5, 2.0)] {
        let r = spectral_check(&MaternKernel::new(1.0, rho, nu, 1).unwrap(), &radii).unwrap();
        pass &= r.bounds.ratio() <= 10.0;
        quad = quad.max(r.max_quadrature_rel_err());
        detail.push_str(&format!("; ν={nu} ρ={rho}: ratio {:.3}", r.bounds.ratio()));
    }
    let info = spectral_check(&MaternKernel::new(1.0, 1.0, 2.5, 1).unwrap(), &radii).unwrap();
    detail.push_str(&format!(
        "; quadrature rel err {quad:.1e}; (info: ν=5/2 ρ=1 ratio {:.1})",
        info.bounds.ratio()
    ));
    outcome(pass && quad <= 1e-6, detail)
}

// 5
fn greedy_prefix() -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    for (nu, d, rho) in [(0.5, 1, 1.0), (1.5, 1, 0.3), (2.5, 2, 0.5), (1.5, 3, 0.5)] {
        let k = MaternKernel::new(1.0, rho, nu, d).unwrap();
        let dom = Domain::unit(d);
        let cands = CandidateSet::low_discrepancy(&dom, 2048).unwrap();
        let full = greedy_mmse_run(&k, &dom, 64, &dom.center(), &cands, NUGGET).unwrap();
        pass &= full.max_mse.windows(2).all(|w| w[1] <= w[0]);
        for i in [1, 2, 3, 5, 8, 13, 21, 34, 55, 64] {
            let short = greedy_mmse_run(&k, &dom, i, &dom.center(), &cands, NUGGET).unwrap();
            pass &= short.design.points == full.design.prefix(i).points;
            pass &= short.max_mse[..] == full.max_mse[..i];
            checked += 1;
        }
    }
    outcome(pass, format!("{checked} prefixes compared exactly; MMSE trajectories nonincreasing"))
}

// 6
fn approximation_rates() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (nu, d, ns, tol_m, tol_i) in [
        (0.5, 1, vec![8, 16, 32, 64, 128, 256], 0.2, 0.5),
        (1.5, 1, vec![8, 16, 32, 64, 128, 256], 0.2, 0.5),
        (1.5, 2, vec![16, 64, 256, 1024], 0.3, 0.3),
    ] {
        let k = MaternKernel::new(1.0, 1.0, nu, d).unwrap();
        let dom = Domain::unit(d);
        let cands = CandidateSet::low_discrepancy(&dom, 4096).unwrap();
        let quad = CandidateSet::low_discrepancy(&dom, 8192).unwrap();
        let r = approx_rates(
            &k, &dom, DesignKind::Grid, &ns, &cands, &quad, &dom.center(), NUGGET, 0, 8,
        )
        .unwrap();
        pass &= r.mmse_rate.matches_theory(tol_m) && r.imse_rate.matches_theory(tol_i);
        detail.push(format!(
            "d={d} ν={nu}: MMSE {:.3} / IMSE {:.3} (target {})",
            r.mmse_rate.fitted_slope,
            r.imse_rate.fitted_slope,
            r.mmse_rate.theory_slope.unwrap()
        ));
    }
    let (ok, t) = time_limit(start.elapsed(), 300);
    outcome(pass && ok, format!("{}; {t}", detail.join("; ")))
}

// 7
fn greedy_rate() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for nu in [0.5, 1.5] {
        let k = MaternKernel::new(1.0, 1.0, nu, 1).unwrap();
        let dom = Domain::unit(1);
        let cands = CandidateSet::low_discrepancy(&dom, 4096).unwrap();
        let r = greedy_vs_grid(&k, &dom, &[8, 16, 32, 64, 128, 256], &dom.center(), &cands, NUGGET, 8)
            .unwrap();
        let diff = (r.greedy_rate.fitted_slope - r.grid_rate.fitted_slope).abs();
        let ratio = r.max_ratio();
        pass &= diff <= 0.3 && ratio <= GREEDY_GRID_FACTOR;
        detail.push(format!(
            "ν={nu}: greedy {:.3} vs grid {:.3} (|Δ| {diff:.3}), max MMSE ratio {ratio:.3}",
            r.greedy_rate.fitted_slope, r.grid_rate.fitted_slope
        ));
    }
    outcome(
        pass,
        format!("{}; factor {GREEDY_GRID_FACTOR} is an engineering threshold", detail.join("; ")),
    )
}

// 8, 9
fn adaptivity() -> (Outcome, Outcome) {
    let start = Instant::now();
    let k = MaternKernel::new(1.0, 0.2, 1.5, 1).unwrap();
    let dom = Domain::unit(1);
    let r = adaptivity_check(&k, &dom, &[8, 16, 32], 257, 2000, &dom.center(), 20110101, NUGGET, None)
        .unwrap();
    let elapsed = start.elapsed();
    let (ok, t) = time_limit(elapsed, 600);
    let pass8 = r
        .rows
        .iter()
        .all(|row| row.ei_imse.mean >= row.greedy_imse - 2.0 * row.ei_imse.se);
    let d8 = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "n={}: EI {:.3e}±{:.1e} vs greedy {:.3e}",
                row.n, row.ei_imse.mean, row.ei_imse.se, row.greedy_imse
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let pass9 = r.identity.len() == 3 && r.identity.iter().all(|(_, c)| c.z_score.abs() <= 4.0);
    let d9 = r
        .identity
        .iter()
        .map(|(p, c)| format!("probe {p}: z={:.2}", c.z_score))
        .collect::<Vec<_>>()
        .join("; ");
    (
        outcome(pass8 && ok, format!("{d8}; {t} (shared with 9)")),
        outcome(pass9 && ok, format!("{d9}; m=2000, n={}", r.identity_n)),
    )
}

// 10
fn wiener_rate() -> Outcome {
    let start = Instant::now();
    let ns = [4, 8, 16, 32, 64, 128, 256, 512];
    let r = optim_wiener(&ns, 1025, 1000, 20110101, SupProxy::Continuous, 8).unwrap();
    let grid = optim_wiener(&ns, 1025, 1000, 20110101, SupProxy::GridMax, 8).unwrap();
    let (ok, t) = time_limit(start.elapsed(), 300);
    let s = &r.series[0].rate;
    outcome(
        s.matches_theory(0.15) && ok,
        format!(
            "slope {:.3} ± {:.3} (target -0.5 ± 0.15, exact sup); info: grid-max proxy slope {:.3}; {t}",
            s.fitted_slope, s.slope_stderr, grid.series[0].rate.fitted_slope
        ),
    )
}

// 11
fn matern_bound() -> Outcome {
    let start = Instant::now();
    let k = MaternKernel::new(1.0, 1.0, 0.5, 1).unwrap();
    let dom = Domain::unit(1);
    let r = optim_matern(&k, &dom, &[8, 16, 32, 64, 128, 256], 1025, 1000, 20110101, NUGGET, None, 8)
        .unwrap();
    let (ok, t) = time_limit(start.elapsed(), 300);
    let s = &r.series[0].rate;
    outcome(
        s.below_bound(0.15) && ok,
        format!(
            "log-corrected slope {:.3} ± {:.3} (bound -0.5 + 0.15, one-sided); {t}",
            s.fitted_slope, s.slope_stderr
        ),
    )
}

// 12
const SMALL_CONFIGS: [&str; 7] = [
    "experiment = \"approx-rates\"\nrun.n_list = [8, 16, 32]\nresolution.candidates = 512\nresolution.quadrature = 512\n",
    "experiment = \"greedy-vs-grid\"\nkernel.nu = 1.5\nrun.n_list = [8, 16, 32]\nresolution.candidates = 512\n",
    "experiment = \"prop3-check\"\nkernel.dim = 2\nrun.n_list = [4, 9]\nrun.m = 5\nresolution.candidates = 256\n",
    "experiment = \"spectral-check\"\nkernel.nu = 2.5\n",
    "experiment = \"adaptivity-check\"\nkernel.nu = 1.5\nkernel.rho = 0.2\nrun.n_list = [4, 8]\nrun.m = 20\nresolution.grid = 65\n",
    "experiment = \"optim-wiener\"\nrun.n_list = [8, 16, 32]\nrun.m = 50\nresolution.grid = 257\n",
    "experiment = \"optim-matern\"\nrun.n_list = [8, 16, 32]\nrun.m = 50\nrun.include_ei = true\nresolution.grid = 257\n",
];

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn run_in(text: &str, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut cfg = ExperimentConfig::parse(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    run_config(&cfg.validate().unwrap()).unwrap();
    data_files(dir)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut compared = 0;
    for (i, text) in SMALL_CONFIGS.iter().enumerate() {
        let a = run_in(text, &tmp.path().join(format!("{i}a")));
        // rerun from the emitted manifest alone
        let manifest = fs::read_to_string(tmp.path().join(format!("{i}a/manifest.toml"))).unwrap();
        let b = run_in(&manifest, &tmp.path().join(format!("{i}b")));
        pass &= !a.is_empty() && a == b;
        compared += a.len();
    }
    outcome(pass, format!("7 experiments, {compared} data files byte-identical on rerun from manifest"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id, name, f: &dyn Fn() -> Outcome| {
        let o = f();
        println!("[{}] {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "interpolation", &interpolation);
    record(2, "mse-formula equivalence", &mse_equivalence);
    record(3, "extend vs refit", &extend_vs_refit);
    record(4, "spectral sandwich", &spectral);
    record(5, "greedy prefix and monotonicity", &greedy_prefix);
    record(6, "approximation rates", &approximation_rates);
    record(7, "greedy rate-optimality", &greedy_rate);
    let (a8, a9) = adaptivity();
    let cell = std::cell::RefCell::new(Some(a8));
    record(8, "adaptivity does not help", &|| cell.borrow_mut().take().unwrap());
    let cell = std::cell::RefCell::new(Some(a9));
    record(9, "realized-design identity", &|| cell.borrow_mut().take().unwrap());
    record(10, "wiener optimization rate", &wiener_rate);
    record(11, "matern optimization bound", &matern_bound);
    record(12, "determinism", &determinism);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (failed: {failed:?})")
        }
    );
    let strict = std::env::var("KRIGSEARCH_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed.is_empty() || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
