use amprb::model_ad::{measure_growth, AdParams, AdStepper, RadialGrid};
use amprb::specfun::ShellGeometry;
use amprb::stability::{
    count_unstable_roots, find_roots_outside, locate_boundary, trace_boundary, NvEvaluator, RootOptions, StabilityParams,
    TraceOptions,
};
use amprb::Complex64 as C;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = StabilityParams<f64>> {
    (-1.3f64..1.7, 0.05f64..3.0, prop_oneof![Just(0.0), 0.0f64..2.0]).prop_map(|(ld, beta, ib)| {
        let base = StabilityParams::<f64>::reference(1.0, 1.0).unwrap();
        StabilityParams::new(base.geom, base.dr, 10f64.powf(ld), beta, ib).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn count_matches_root_list(p in point()) {
        let v = find_roots_outside(&p, &RootOptions::default()).unwrap();
        let listed = v.roots.len() + usize::from(v.root_at_infinity);
        prop_assert_eq!(v.unstable_root_count, listed);
        prop_assert_eq!(count_unstable_roots(&p, 1e-3).unwrap(), listed);
        // Conjugate closure.
        for r in &v.roots {
            let c = r.conj();
            prop_assert!(v.roots.iter().any(|s| (s - c).norm() <= 1e-8 * r.norm()), "{:?}", v.roots);
        }
        let ev = NvEvaluator::new(p).unwrap();
        for r in &v.roots {
            let (n, scale) = ev.eval_with_scale(*r).unwrap();
            prop_assert!(n.norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn nv_is_regular_outside_unit_disk(p in point(), rad in 1.001f64..10.0, th in 0.0f64..std::f64::consts::TAU) {
        let ev = NvEvaluator::new(p).unwrap();
        let n = ev.eval(C::from_polar(rad, th)).unwrap();
        prop_assert!(n.re.is_finite() && n.im.is_finite());
    }
}

#[test]
fn traced_boundary_restarts_on_itself() {
    let base = StabilityParams::<f64>::reference(1.0, 1.0).unwrap();
    let start = locate_boundary(&base, 10.0, 0.2, 1.0).unwrap();
    let opts = TraceOptions { max_points: 30, ..TraceOptions::default() };
    let curve = trace_boundary(&base, start, &opts).unwrap();
    assert!(curve.len() >= 10);
    let mid = curve[curve.len() / 2];
    let again = trace_boundary(&base, mid, &TraceOptions { max_points: 5, ..opts }).unwrap();
    // The restart lies on the original curve: interpolate beta in ln(delta).
    for q in &again[1..] {
        let seg = curve.windows(2).find(|w| {
            let (a, b) = (w[0].delta.ln(), w[1].delta.ln());
            let x = q.delta.ln();
            (a - x) * (b - x) <= 0.0
        });
        let w = seg.expect("restart stays within the traced delta range");
        let (a, b) = (w[0].delta.ln(), w[1].delta.ln());
        let s = if b == a { 0.0 } else { (q.delta.ln() - a) / (b - a) };
        let beta = w[0].beta_d + s * (w[1].beta_d - w[0].beta_d);
        assert!((beta - q.beta_d).abs() < 1e-4 + 1e-2 * (w[1].beta_d - w[0].beta_d).abs(), "{q:?} vs {beta}");
    }
}

/// Smallest `beta_d` giving bounded growth in simulation at fixed `delta`.
fn simulated_threshold(delta: f64) -> f64 {
    let g = ShellGeometry::new(1.0, 2.0).unwrap();
    let grid = RadialGrid::new(g, 200).unwrap();
    let stable = |beta: f64| {
        let p = AdParams::from_dimensionless(&g, 0.05, delta, beta, 0.0, 1.0, 1.0).unwrap();
        let st = AdStepper::new(p, grid.clone()).unwrap();
        measure_growth(&st, 2000, 200, 7).unwrap() <= 1.0 + 1e-3
    };
    let (mut lo, mut hi) = (0.05, 1.0);
    assert!(!stable(lo) && stable(hi));
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn boundary_agrees_with_simulation() {
    let base = StabilityParams::<f64>::reference(1.0, 1.0).unwrap();
    for delta in [1.0, 10.0] {
        let b = locate_boundary(&base, delta, 0.05, 1.0).unwrap();
        let s = simulated_threshold(delta);
        assert!((b.beta_d - s).abs() < 0.05, "delta {delta}: analysis {} simulation {s}", b.beta_d);
    }
}
