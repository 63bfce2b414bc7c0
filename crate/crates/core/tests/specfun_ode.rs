use amprb::specfun::{msb_i1, msb_k1, phi_profile, ShellGeometry};
use amprb::Complex64 as C;
use proptest::prelude::*;

/// Relative residual of `z^2 f'' + 2 z f' - (z^2 + 2) f` with central
/// differences of step `h` along the real direction.
fn bessel_residual(f: &dyn Fn(C) -> C, z: C, h: f64) -> f64 {
    let (fm, f0, fp) = (f(z - h), f(z), f(z + h));
    let d1 = (fp - fm) / (2.0 * h);
    let d2 = (fp - 2.0 * f0 + fm) / (h * h);
    let res = z * z * d2 + 2.0 * z * d1 - (z * z + 2.0) * f0;
    res.norm() / ((z * z * d2).norm() + (2.0 * z * d1).norm() + ((z * z + 2.0) * f0).norm())
}

fn observed_order(f: &dyn Fn(C) -> C, z: C) -> f64 {
    let h = 2e-2;
    (bessel_residual(f, z, h) / bessel_residual(f, z, h / 2.0)).log2()
}

fn in_annulus() -> impl Strategy<Value = C> {
    (0.1f64..20.0, -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(r, a)| C::from_polar(r, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn i1_solves_bessel_ode(z in in_annulus()) {
        let o = observed_order(&|z| msb_i1(z), z);
        prop_assert!((o - 2.0).abs() < 0.2, "order {o} at {z}");
    }

    #[test]
    fn k1_solves_bessel_ode(z in in_annulus()) {
        let o = observed_order(&|z| msb_k1(z).unwrap(), z);
        prop_assert!((o - 2.0).abs() < 0.2, "order {o} at {z}");
    }

    #[test]
    fn i1_is_odd(z in in_annulus()) {
        let (a, b) = (msb_i1(z), msb_i1(-z));
        prop_assert!((a + b).norm() <= 1e-14 * a.norm());
    }

    #[test]
    fn phi_is_even_in_zeta(re in 0.05f64..30.0, im in -30.0f64..30.0, r in 1.0f64..2.0) {
        let g = ShellGeometry::new(1.0, 2.0).unwrap();
        let z = C::new(re, im);
        let (a, b) = (phi_profile(z, r, &g).unwrap(), phi_profile(-z, r, &g).unwrap());
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn phi_solves_radial_ode(re in 0.1f64..15.0, im in -15.0f64..15.0, r in 1.1f64..1.9) {
        // r^2 phi'' + 2 r phi' - (zeta^2 r^2 + 2) phi = 0
        let g = ShellGeometry::new(1.0, 2.0).unwrap();
        let z = C::new(re, im);
        let phi = |r: f64| phi_profile(z, r, &g).unwrap();
        let res = |h: f64| {
            let (fm, f0, fp) = (phi(r - h), phi(r), phi(r + h));
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            let a = r * r * d2;
            let b = 2.0 * r * d1;
            let c = (z * z * r * r + 2.0) * f0;
            (a + b - c).norm() / (a.norm() + b.norm() + c.norm())
        };
        let o = (res(2e-3) / res(1e-3)).log2();
        prop_assert!((o - 2.0).abs() < 0.25, "order {o}");
    }
}

#[test]
fn unit_argument_values() {
    let e = (-1.0f64).exp();
    assert!((msb_i1(C::new(1.0, 0.0)).re - e).abs() < 1e-14);
    assert!((msb_k1(C::new(1.0, 0.0)).unwrap().re - 2.0 * e).abs() < 1e-14);
}

#[test]
fn phi_boundary_values() {
    let g = ShellGeometry::new(1.0, 2.0).unwrap();
    for z in [C::new(0.5, 0.0), C::new(3.0, 4.0), C::new(200.0, -50.0)] {
        assert!((phi_profile(z, 1.0, &g).unwrap() - 1.0).norm() < 1e-12);
        assert!(phi_profile(z, 2.0, &g).unwrap().norm() < 1e-12);
    }
}
