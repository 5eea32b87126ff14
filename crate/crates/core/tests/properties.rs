use proptest::prelude::*;

use sbmlab::dimension::{box_dimension, riesz_energy, PointSet};
use sbmlab::grid::{GridFunction, UniformGrid};
use sbmlab::particles::{simulate_full, simulate_replicate, DensityField, InitialMeasure, SimConfig};
use sbmlab::pde::evolve;
use sbmlab::profile::ode_residual;
use sbmlab::tauberian::{lower_coeff_d1, upper_bound_u};

fn distinct_points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..1_000_000, 2..60).prop_map(|s| s.into_iter().map(|k| k as f64 * 1e-6).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_ignores_order(mut pts in distinct_points(), beta in 0.05f64..0.95, seed in any::<u64>()) {
        let sorted = riesz_energy(&PointSet::new(pts.clone(), "a").unwrap(), beta).unwrap();
        let n = pts.len();
        pts.rotate_left((seed % n as u64) as usize);
        pts.reverse();
        let shuffled = riesz_energy(&PointSet::new(pts, "b").unwrap(), beta).unwrap();
        prop_assert_eq!(sorted, shuffled);
    }

    #[test]
    fn energy_translation_and_scaling(pts in distinct_points(), beta in 0.05f64..0.95, shift in -50.0f64..50.0, c in 0.01f64..100.0) {
        let e = riesz_energy(&PointSet::new(pts.clone(), "x").unwrap(), beta).unwrap();
        let moved = riesz_energy(&PointSet::new(pts.iter().map(|x| x + shift).collect(), "x").unwrap(), beta).unwrap();
        prop_assert!((moved / e - 1.0).abs() < 1e-6);
        let scaled = riesz_energy(&PointSet::new(pts.iter().map(|x| c * x).collect(), "x").unwrap(), beta).unwrap();
        prop_assert!((scaled / (c.powf(-beta) * e) - 1.0).abs() < 1e-10);
        prop_assert!(1.0 / e > 0.0);
    }

    #[test]
    fn box_counts_invariant_under_cell_translation(pts in prop::collection::vec(0u32..(1 << 20), 2..200), m in -8i32..8) {
        let x: Vec<f64> = pts.iter().map(|&k| k as f64 / (1u64 << 20) as f64).collect();
        prop_assume!(x.iter().any(|&v| v != x[0]));
        let scales: Vec<f64> = (2..=10).map(|k| 2f64.powi(-k)).collect();
        let a = box_dimension(&PointSet::new(x.clone(), "x").unwrap(), &scales).unwrap();
        let b = box_dimension(&PointSet::new(x.iter().map(|v| v + m as f64 * 0.25).collect(), "x").unwrap(), &scales).unwrap();
        prop_assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn tauberian_sandwich(c1 in 0.001f64..1.0, extra in 0.0f64..10.0, p in 0.1f64..3.0, ul in 0.0f64..10.0, a in 1e-6f64..=1.0) {
        let c2 = c1 + extra;
        let d = lower_coeff_d1(c1, c2, p, ul).unwrap();
        prop_assert!(d.d1 > 0.0);
        prop_assert!(d.d1 * a.powf(p) <= upper_bound_u(c2, p, a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comparison_principle(base in 0.0f64..2.0, bump in 0.0f64..5.0, extra in 0.0f64..3.0, centre in -2.0f64..2.0) {
        let grid = UniformGrid::covering(-6.0, 6.0, 0.05);
        let lo = GridFunction::from_fn(grid, |x| base + bump * (-(x - centre).powi(2)).exp());
        let hi = GridFunction::from_fn(grid, |x| lo.interpolate(x) + extra * (-(x * x) / 2.0).exp() + 0.1);
        let a = evolve(&lo, 0.5, 0.01).unwrap();
        let b = evolve(&hi, 0.5, 0.01).unwrap();
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!(*u <= *v + 1e-12);
        }
    }

    #[test]
    fn particle_runs_are_deterministic(n in 10usize..300, seed in any::<u64>(), rep in 0u64..1000, t in 0.05f64..2.0) {
        let x0 = InitialMeasure::lebesgue(-1.0, 1.0, 1.0);
        let cfg = SimConfig::new(n);
        let a = simulate_replicate(&x0, t, &cfg, seed, rep).unwrap();
        let b = simulate_replicate(&x0, t, &cfg, seed, rep).unwrap();
        prop_assert_eq!(&a.positions, &b.positions);
        let field = DensityField::from_cloud(&a, 0.05);
        let integral: f64 = field.densities().iter().sum::<f64>() * field.w;
        prop_assert!((integral - a.total_mass()).abs() <= 1e-12 * (1.0 + a.total_mass()));
    }
}

#[test]
fn equilibrium_has_zero_residual() {
    let f = vec![2.0; 200];
    let fp = vec![0.0; 200];
    assert!(ode_residual(&f, &fp, 0.01).iter().all(|r| *r == 0.0));
}

#[test]
fn branching_is_critical() {
    let x0 = InitialMeasure::delta(0.0, 1.0);
    let cfg = SimConfig::new(500);
    let (mut births, mut events) = (0u64, 0u64);
    for rep in 0..50 {
        let (_, s) = simulate_full(&x0, 1.0, &cfg, 21, rep).unwrap();
        births += s.births;
        events += s.births + s.deaths;
    }
    let p = births as f64 / events as f64;
    let se = (0.25 / events as f64).sqrt();
    assert!((2.0 * p - 1.0).abs() < 6.0 * se, "mean offspring {}", 2.0 * p);
}
