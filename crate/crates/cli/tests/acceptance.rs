//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use sbmlab::dimension::{
    box_dimension, cantor_points, riesz_energy, subordinator_replicate, uniform_energy, LevyTail, PointSet,
};
use sbmlab::grid::{GridFunction, UniformGrid};
use sbmlab::particles::{extinction_experiment, holder_scan, laplace_check, left_tail, run_replicates, DensityField, InitialMeasure, SimConfig};
use sbmlab::pde::{evolve, rate_experiment, scaling_check, v_infinity, PhysicalParams, ScalingCase};
use sbmlab::profile::{profile_identities, solve_profile_with, ProfileConfig, ProfileF};
use sbmlab::spectral::{eigensystem_on, richardson_eigenvalues, variational_bounds, PhiTag};
use sbmlab::stats::mean_and_se;
use sbmlab::tauberian::{log_grid, lower_coeff_d1, verify_on_family, LowerStatus, PowerLaw};
use sbmlab_cli::config::{Experiment, ExperimentConfig};
use sbmlab_cli::pipeline::run;

const L: f64 = 12.0;
const H: f64 = 1.0 / 400.0;

struct Suite {
    results: Vec<(usize, bool)>,
}

impl Suite {
    fn report(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        println!("{} criterion {id:>2}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((id, pass));
    }
}

fn lambda0(f: &ProfileF, l: f64, h: f64) -> f64 {
    eigensystem_on(|x| f.eval(x), PhiTag::FullF, l, h, 1).unwrap().eigenvalues[0]
}

fn hermite(s: &mut Suite) {
    let start = Instant::now();
    let coarse = richardson_eigenvalues(|_| 0.0, L, H, 10).unwrap();
    let wide = richardson_eigenvalues(|_| 0.0, L + 2.0, H, 10).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let err = |v: &[f64]| v.iter().enumerate().map(|(n, l)| (l - 0.5 * n as f64).abs()).fold(0.0, f64::max);
    let (e12, e14) = (err(&coarse), err(&wide));
    s.report(
        1,
        "Hermite spectrum n <= 10",
        e14 < 1e-6 && secs < 10.0,
        format!("max error {e14:.2e} (L=14), {e12:.2e} (L=12), runtime {secs:.2} s"),
    );
}

fn half_profile(s: &mut Suite, f: &ProfileF) {
    let sys = eigensystem_on(|x| 0.5 * f.eval(x), PhiTag::HalfF, L, H, 1).unwrap();
    // L^2(m) distance of psi_0 and e^{x^2/2} F becomes an L^2(dx) distance after the e^{-x^2/4} transform
    let tilt: Vec<f64> = sys.grid.points().map(|x| (0.25 * x * x).exp() * f.eval(x)).collect();
    let norm = (sys.grid_step * tilt.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let dist =
        (sys.grid_step * tilt.iter().zip(&sys.eigenfunctions_g[0]).map(|(a, b)| (a / norm - b).powi(2)).sum::<f64>()).sqrt();
    let l0 = sys.eigenvalues[0];
    s.report(
        2,
        "lambda0(F/2) and its ground state",
        (l0 - 0.5).abs() < 1e-4 && dist < 1e-3,
        format!("lambda0 {l0:.8}, L2(m) distance {dist:.2e}"),
    );
}

fn bracket(s: &mut Suite, f: &ProfileF) -> f64 {
    let sys = eigensystem_on(|x| f.eval(x), PhiTag::FullF, L, H, 1).unwrap();
    let l0 = sys.eigenvalues[0];
    let (lo, hi) = variational_bounds(f, &sys);
    let finer = lambda0(f, L, 0.5 * H);
    let wider = lambda0(f, L + 2.0, H);
    let shift = (finer - l0).abs().max((wider - l0).abs());
    s.report(
        3,
        "variational bracket and stability of lambda0(F)",
        0.5 < lo && lo < l0 && l0 < hi && hi < 1.0 && shift < 5e-6,
        format!("{lo:.6} < {l0:.8} < {hi:.6}; h/2 gives {finer:.8}, L+2 gives {wider:.8}"),
    );
    l0
}

fn identities(s: &mut Suite, f: &ProfileF) {
    let id = profile_identities(f);
    let mass = (id.int_f - id.int_f2).abs() / id.int_f;
    let v = v_infinity(1.0).unwrap();
    let sup = v
        .x_grid
        .points()
        .zip(&v.values)
        .filter(|(x, _)| x.abs() <= 4.0)
        .map(|(x, u)| (f.eval(x) - u).abs())
        .fold(0.0, f64::max);
    s.report(
        4,
        "profile identities",
        f.f0 > 1.0 && f.f0 < 2.0 && mass < 1e-4 && sup < 1e-3,
        format!("F(0) {:.10}, mass defect {mass:.2e}, sup |F_ode - F_pde| {sup:.2e}", f.f0),
    );
}

fn semigroup(s: &mut Suite) {
    let phi0 = GridFunction::from_fn(UniformGrid::symmetric_closed(4.0, 0.05), |_| 2.0);
    let sol = evolve(&phi0, 1.0, 1e-3).unwrap();
    let err = sol.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    s.report(5, "constant data r=2, s=1", err < 1e-6, format!("max |V - 1| {err:.2e}"));
}

fn scaling(s: &mut Suite) {
    let cases = [
        ScalingCase { r: 1.0, lambda: 2.0, s: 0.25 },
        ScalingCase { r: 2.0, lambda: 0.5, s: 1.0 },
        ScalingCase { r: 0.5, lambda: 1.5, s: 0.5 },
    ];
    let params = PhysicalParams { dx: 0.01, dt: 1e-3, half_width: Some(8.0) };
    let reports = scaling_check(&cases, 0.01, &params).unwrap();
    let worst = reports.iter().map(|r| r.violation / r.truncation).fold(0.0, f64::max);
    let detail: Vec<String> =
        reports.iter().map(|r| format!("{:.1e}/{:.1e}", r.violation, r.truncation)).collect();
    s.report(
        6,
        "scaling law against truncation",
        worst < 10.0,
        format!("violation/truncation {} (worst ratio {worst:.2})", detail.join(", ")),
    );
}

fn rate(s: &mut Suite, l0: f64) {
    let start = Instant::now();
    let ladder: Vec<f64> = (4..=10).map(|k| 2f64.powi(k)).collect();
    let r = rate_experiment(1.0, &ladder).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let target = -(2.0 * l0 - 1.0);
    s.report(
        7,
        "convergence rate in lambda",
        (r.fit.slope - target).abs() <= 0.02 && secs < 300.0,
        format!("slope {:.5}, predicted {target:.5}, runtime {secs:.1} s", r.fit.slope),
    );
}

fn extinction(s: &mut Suite) {
    let x0 = InitialMeasure::delta(0.0, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for &t in &[0.5, 1.0, 2.0] {
        let r = extinction_experiment(&x0, t, 2000, 10_000, 101).unwrap();
        let z = (r.fraction - r.limit) / r.standard_error;
        ok &= z.abs() < 3.0;
        parts.push(format!("t={t}: {:.4} vs {:.4} (z {z:+.2})", r.fraction, r.limit));
    }
    s.report(8, "extinction probability", ok, parts.join("; "));
}

fn laplace(s: &mut Suite) {
    let x0 = InitialMeasure::delta(0.0, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for &l in &[0.5, 1.0, 2.0] {
        let r = laplace_check(&x0, 1.0, l, 2000, 10_000, 11, None, &PhysicalParams::default()).unwrap();
        ok &= r.z_score.abs() < 3.0;
        parts.push(format!("lambda={l}: {:.4} vs {:.4} (z {:+.2})", r.mc_value, r.pde_value, r.z_score));
    }
    s.report(9, "Laplace duality", ok, parts.join("; "));
}

fn tail(s: &mut Suite, l0: f64) {
    let start = Instant::now();
    let ladder = [0.02, 0.04, 0.08, 0.16, 0.32];
    let r = left_tail(&InitialMeasure::delta(0.0, 1.0), 1.0, &ladder, 10_000, 100_000, 1, None, 200).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let target = 2.0 * l0 - 1.0;
    s.report(
        10,
        "left-tail exponent",
        (r.slope - target).abs() <= 0.15 && r.slope > 0.0 && r.slope < 1.0,
        format!(
            "slope {:.4} (95% CI {:.4}..{:.4}), predicted {target:.4}, runtime {secs:.1} s",
            r.slope, r.slope_ci.0, r.slope_ci.1
        ),
    );
}

fn bz_dimension(s: &mut Suite, l0: f64) {
    let cfg = ExperimentConfig::default();
    let out = run(&cfg, Experiment::Dimension).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(out.file("dim.json").unwrap()).unwrap();
    let slope = doc["slope"].as_f64().unwrap();
    let target = 2.0 - 2.0 * l0;
    let drift: Vec<String> = doc["n_doubling_drift"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| format!("N={} {:.4}", d["n"], d["slope"].as_f64().unwrap()))
        .collect();
    s.report(
        11,
        "zero-set boundary box dimension",
        slope > 0.0 && slope < 1.0 && (slope - target).abs() <= 0.2,
        format!("estimate {slope:.4}, predicted {target:.4}, N-doubling drift [{}]", drift.join(", ")),
    );
}

fn dimension_oracles(s: &mut Suite) {
    let cantor = box_dimension(&cantor_points(12), &(1..=10).map(|k| 3f64.powi(-k)).collect::<Vec<_>>()).unwrap();
    let cantor_err = (cantor.slope - 2f64.ln() / 3f64.ln()).abs();

    let n = 20_000;
    let grid = PointSet::new((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(), "grid").unwrap();
    let energy = riesz_energy(&grid, 0.5).unwrap();
    let energy_err = (energy / uniform_energy(0.5) - 1.0).abs();

    let (alpha, floor, reps) = (0.7, 0.01, 2000);
    let counts: Vec<f64> = (0..reps)
        .map(|id| subordinator_replicate(alpha, 1.0, floor, 9, id, LevyTail::LogCorrected).unwrap().jump_count as f64)
        .collect();
    let expected = LevyTail::LogCorrected.eval(alpha, floor);
    let (mean, se) = mean_and_se(&counts);
    let z = (mean - expected) / se;
    s.report(
        12,
        "dimension tool oracles",
        cantor_err < 0.03 && energy_err < 0.01 && z.abs() < 3.0,
        format!(
            "Cantor slope {:.4}, Riesz energy {energy:.5} vs {:.5}, jump count mean {mean:.3} vs {expected:.3} (z {z:+.2})",
            cantor.slope,
            8.0 / 3.0
        ),
    );
}

/// `d1` rebuilt from its definition with `powf` and `ln` of the full product, not the library's log-split form.
fn d1_reference(c1: f64, c2: f64, p: f64, ul: f64) -> f64 {
    let inner = (2.0 * p / std::f64::consts::E).powf(p) * 4.0 * std::f64::consts::E * c2 / c1;
    let m = (2.0 * inner.ln()).max(2.0 * p).max(ul);
    0.5 * c1 / m.powf(p)
}

fn tauberian(s: &mut Suite) {
    let lambdas = log_grid(1.0, 1e6, 61);
    let a_grid = log_grid(1e-6, 1.0, 49);
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [0.5, 1.0] {
        match verify_on_family(&PowerLaw { p }, p, &lambdas, &a_grid, 1.0) {
            Ok(r) => {
                let held = r.lower_status == LowerStatus::Holds
                    && r.rows.len() == a_grid.len()
                    && r.rows.iter().all(|row| row.lower.is_some_and(|l| l <= row.u) && row.u <= row.upper);
                ok &= held;
                parts.push(format!("p={p}: {} rows, C1 {:.4}, C2 {:.4}", r.rows.len(), r.c1.unwrap_or(f64::NAN), r.c2));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("p={p}: {e}"));
            }
        }
    }
    let mut worst = 0.0_f64;
    for &(c1, c2, p, ul) in &[(1.0, 1.0, 1.0, 0.0), (0.3, 2.0, 0.5, 0.0), (0.5, 0.9, 2.0, 1.0), (1.0, 50.0, 0.25, 30.0)] {
        let got = lower_coeff_d1(c1, c2, p, ul).unwrap().d1;
        let want = d1_reference(c1, c2, p, ul);
        worst = worst.max((got - want).abs() / want);
    }
    ok &= worst < 1e-12;
    parts.push(format!("d1 worst relative mismatch {worst:.1e}"));
    s.report(13, "Tauberian bounds on power families", ok, parts.join("; "));
}

fn holder(s: &mut Suite) {
    let x0 = InitialMeasure::delta(0.0, 1.0);
    let fields = run_replicates(&x0, 1.0, &SimConfig::new(10_000), 1, 40, |c| DensityField::from_cloud(&c, 0.01)).unwrap();
    let r = holder_scan(&fields, &[2, 4, 8, 16, 32], None).unwrap();
    s.report(
        14,
        "Hoelder contrast",
        r.near_zero_exponent > r.bulk_exponent && (0.4..=0.6).contains(&r.bulk_exponent),
        format!("bulk {:.4}, near zero {:.4}", r.bulk_exponent, r.near_zero_exponent),
    );
}

const SMALL_CONFIG: &str = r#"
seed = 7

[pde_rate]
lambdas = [16.0, 32.0, 64.0, 128.0]

[simulate]
n = 1000
reps = 300
holder_reps = 10

[tail]
n = 1000
reps = 4000
a_ladder = [0.1, 0.2, 0.4, 0.8]
bootstrap = 50

[dimension.bz]
n = 500
reps = 60
doublings = 1
"#;

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect()
}

fn reproducibility(s: &mut Suite) {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    std::fs::write(&config, SMALL_CONFIG).unwrap();
    let mut runs = Vec::new();
    for (name, threads) in [("a", None), ("b", Some("1"))] {
        let out = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sbmlab"));
        cmd.arg("--config").arg(&config).arg("--out").arg(&out);
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        let status = cmd.arg("full-pipeline").output().unwrap().status;
        assert!(status.success(), "full-pipeline exited with {status}");
        runs.push(read_dir(&out));
    }
    // manifest.json alone carries wall-clock timestamps; its per-file hashes must still agree
    let hashes = |files: &BTreeMap<String, Vec<u8>>| {
        let m: serde_json::Value = serde_json::from_slice(&files["manifest.json"]).unwrap();
        m["files"].clone()
    };
    let same_names = runs[0].keys().eq(runs[1].keys());
    let differing: Vec<&String> =
        runs[0].iter().filter(|(k, v)| *k != "manifest.json" && runs[1].get(*k) != Some(v)).map(|(k, _)| k).collect();
    let ok = same_names && differing.is_empty() && hashes(&runs[0]) == hashes(&runs[1]);
    s.report(
        15,
        "full-pipeline reproducibility",
        ok,
        format!(
            "{} files compared byte for byte across default and single-thread runs, manifest.json compared by file hashes only, differing {:?}",
            runs[0].len() - 1,
            differing
        ),
    );
}

fn main() {
    let mut s = Suite { results: Vec::new() };
    let f = solve_profile_with(&ProfileConfig::default()).unwrap();
    hermite(&mut s);
    half_profile(&mut s, &f);
    let l0 = bracket(&mut s, &f);
    identities(&mut s, &f);
    semigroup(&mut s);
    scaling(&mut s);
    rate(&mut s, l0);
    extinction(&mut s);
    laplace(&mut s);
    tail(&mut s, l0);
    bz_dimension(&mut s, l0);
    dimension_oracles(&mut s);
    tauberian(&mut s);
    holder(&mut s);
    reproducibility(&mut s);
    let failed: Vec<usize> = s.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", s.results.len() - failed.len(), s.results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
