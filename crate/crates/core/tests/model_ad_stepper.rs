use amprb::model_ad::{measure_growth, AdParams, AdStepper, RadialGrid};
use amprb::specfun::ShellGeometry;
use amprb::stability::{find_roots_outside, RootOptions, StabilityParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stepper(delta: f64, beta: f64, i_bar: f64) -> AdStepper<f64> {
    let g = ShellGeometry::new(1.0, 2.0).unwrap();
    let grid = RadialGrid::new(g, 200).unwrap();
    let p = AdParams::from_dimensionless(&g, 0.05, delta, beta, i_bar, 1.0, 1.0).unwrap();
    AdStepper::new(p, grid).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dirichlet_values_hold_every_step(ld in -1.0f64..2.0, beta in 0.1f64..2.0, i_bar in 0.0f64..1.0, seed in 0u64..1000) {
        let st = stepper(10f64.powf(ld), beta, i_bar);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..st.grid().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut s = st.initial_state(w, 0.5, 0.0).unwrap();
        for _ in 0..20 {
            s = st.step(&s, 0.1).unwrap();
            prop_assert_eq!(s.w_hat[0], s.omega_b);
            prop_assert_eq!(*s.w_hat.last().unwrap(), 0.0);
        }
    }
}

#[test]
fn stable_point_stays_bounded() {
    let st = stepper(1.0, 1.0, 0.0);
    let g = measure_growth(&st, 1000, 100, 3).unwrap();
    assert!(g <= 1.0 + 1e-3, "growth {g}");
}

#[test]
fn unstable_growth_matches_largest_root() {
    for (delta, beta) in [(10.0, 0.1), (1.0, 0.05), (100.0, 0.2)] {
        let v = find_roots_outside(&StabilityParams::reference(delta, beta).unwrap(), &RootOptions::default()).unwrap();
        assert!(!v.is_stable());
        let g = measure_growth(&stepper(delta, beta, 0.0), 2000, 200, 11).unwrap();
        assert!((g - v.max_modulus).abs() <= 0.05 * v.max_modulus, "({delta}, {beta}): simulated {g}, roots {:?}", v.roots);
    }
}
