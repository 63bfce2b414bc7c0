use std::sync::Arc;

use amprb::model_am::{added_mass, AmProblem};
use amprb::specfun::ShellGeometry;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn amp_pressure_matches_exact(
        r1 in 0.1f64..2.0,
        ratio in 1.1f64..10.0,
        rho in 0.01f64..100.0,
        m_b in 0.0f64..50.0,
        t in 0.0f64..10.0,
    ) {
        let g = ShellGeometry::new(r1, r1 * ratio).unwrap();
        let prob = AmProblem::new(g, rho, m_b, 0.3, Arc::new(|t: f64| t.sin())).unwrap();
        let exact = prob.exact_state(t).unwrap();
        let amp = prob.solve_amp_pressure_bvp(t.sin()).unwrap();
        let scale = (0..20).map(|k| exact.p_hat(r1 + (g.r2 - r1) * k as f64 / 19.0).abs()).fold(0.0, f64::max);
        for k in 0..20 {
            let r = r1 + (g.r2 - r1) * k as f64 / 19.0;
            prop_assert!((amp.p_hat(r) - exact.p_hat(r)).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
        }
        prop_assert!((amp.a_w - exact.a_w).abs() <= 1e-10 * exact.a_w.abs().max(1e-300));
    }

    #[test]
    fn added_mass_exceeds_free_space(r1 in 0.1f64..3.0, ratio in 1.05f64..100.0, rho in 0.1f64..10.0) {
        let g = ShellGeometry::new(r1, r1 * ratio).unwrap();
        let free = 2.0 / 3.0 * std::f64::consts::PI * rho * r1.powi(3);
        prop_assert!(added_mass(&g, rho) > free);
    }
}

#[test]
fn added_mass_free_space_limit() {
    let g = ShellGeometry::new(1.0, 1e4).unwrap();
    let want = 2.0 / 3.0 * std::f64::consts::PI;
    assert!((added_mass(&g, 1.0) - want).abs() / want < 1e-6);
}
