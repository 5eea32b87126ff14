use sbmlab::dimension::{pooled_box_dimension, PointSet};
use sbmlab::particles::{default_bandwidth, extract_bz, simulate_replicate, DensityField, InitialMeasure, SimConfig};
use sbmlab::pde::{v_infinity, v_lambda};
use sbmlab::profile::{profile_identities, solve_profile_with, ProfileConfig};
use sbmlab::spectral::{eigensystem_on, variational_bounds, PhiTag};

#[test]
fn profile_is_decreasing_and_balances_mass() {
    let f = solve_profile_with(&ProfileConfig::default()).unwrap();
    assert!(f.f0 > 1.0 && f.f0 < 2.0);
    assert!(f.values.windows(2).all(|w| w[1] < w[0]));
    let id = profile_identities(&f);
    assert!((id.int_f - id.int_f2).abs() / id.int_f < 1e-4);
}

#[test]
fn ode_profile_matches_pde_limit() {
    let f = solve_profile_with(&ProfileConfig::default()).unwrap();
    let v = v_infinity(1.0).unwrap();
    let sup = v
        .x_grid
        .points()
        .zip(&v.values)
        .filter(|(x, _)| x.abs() <= 4.0)
        .map(|(x, u)| (f.eval(x) - u).abs())
        .fold(0.0, f64::max);
    assert!(sup < 1e-3, "{sup}");
}

#[test]
fn lead_eigenvalue_is_bracketed() {
    let f = solve_profile_with(&ProfileConfig::default()).unwrap();
    let sys = eigensystem_on(|x| f.eval(x), PhiTag::FullF, 12.0, 1.0 / 400.0, 2).unwrap();
    let l0 = sys.eigenvalues[0];
    let (lo, hi) = variational_bounds(&f, &sys);
    assert!(0.5 < lo && lo < l0 && l0 < hi && hi < 1.0, "{lo} {l0} {hi}");
    assert!(2.0 * l0 - 1.0 > 0.0 && 2.0 - 2.0 * l0 > 0.0);
    let half = eigensystem_on(|x| 0.5 * f.eval(x), PhiTag::HalfF, 12.0, 1.0 / 400.0, 1).unwrap();
    assert!((half.eigenvalues[0] - 0.5).abs() < 1e-4);
}

#[test]
fn v_lambda_increases_towards_the_limit() {
    let lambdas = [4.0, 16.0, 64.0];
    let at0: Vec<f64> = lambdas.iter().map(|&l| v_lambda(l, 1.0, None).unwrap().at(0.0)).collect();
    assert!(at0.windows(2).all(|w| w[0] < w[1]));
    let vinf = v_infinity(1.0).unwrap().at(0.0);
    assert!(at0[2] < vinf);
}

#[test]
fn bz_box_dimension_lies_in_unit_interval() {
    let x0: InitialMeasure = "lebesgue:[-10,10]:4".parse().unwrap();
    let n = 2000;
    let w = default_bandwidth(n, 1.0);
    let scales: Vec<f64> = (0..=5).map(|k| w * 2f64.powi(k)).collect();
    let sets: Vec<PointSet> = (0..100)
        .map(|rep| {
            let cloud = simulate_replicate(&x0, 1.0, &SimConfig::new(n), 4, rep).unwrap();
            PointSet::new(extract_bz(&DensityField::from_cloud(&cloud, w), None, None).points, "bz").unwrap()
        })
        .collect();
    let r = pooled_box_dimension(&sets, &scales).unwrap();
    assert!(r.used > 90);
    assert!(r.slope > 0.0 && r.slope < 1.0, "{}", r.slope);
}
