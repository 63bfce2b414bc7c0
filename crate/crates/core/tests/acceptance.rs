//! Acceptance checks, one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use amprb::collision::{simulate_mprf, CollisionCase, MprfSystem, RepulsionParams};
use amprb::damping_tensors::{assemble_tensors, delta_n, sphere_closed_form, SurfaceMesh};
use amprb::model_ad::{measure_growth, AdParams, AdStepper, RadialGrid};
use amprb::model_am::{added_mass, AmProblem};
use amprb::piston::{piston_convergence, PistonParams};
use amprb::quadrature::{annulus_errors, observed_orders};
use amprb::specfun::{msb_i1, msb_k1, phi_profile, ShellGeometry};
use amprb::stability::{count_unstable_roots, find_roots_outside, RootOptions, StabilityParams};
use amprb::Complex64 as C;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac1() -> Outcome {
    let g = ShellGeometry::new(1.0, 1e4).map_err(|e| e.to_string())?;
    let want = 2.0 / 3.0 * PI;
    let rel = (added_mass(&g, 1.0) - want).abs() / want;
    ensure(rel < 1e-6, format!("relative error {rel:.2e} (tol 1e-6)"))
}

fn ac2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r1 = rng.random_range(0.1..2.0);
        let g = ShellGeometry::new(r1, r1 * rng.random_range(1.1..10.0)).unwrap();
        let rho = rng.random_range(0.01..100.0);
        let m_b = rng.random_range(0.0..50.0);
        let t: f64 = rng.random_range(0.0..10.0);
        let prob = AmProblem::new(g, rho, m_b, 0.0, Arc::new(|t: f64| t.sin())).map_err(|e| e.to_string())?;
        let ex = prob.exact_state(t).map_err(|e| e.to_string())?;
        let amp = prob.solve_amp_pressure_bvp(t.sin()).map_err(|e| e.to_string())?;
        for k in 0..20 {
            let r = r1 + (g.r2 - r1) * k as f64 / 19.0;
            worst = worst.max((amp.p_hat(r) - ex.p_hat(r)).abs() / ex.p_hat(r).abs().max(1e-300));
        }
        worst = worst.max((amp.a_w - ex.a_w).abs() / ex.a_w.abs().max(1e-300));
    }
    ensure(worst < 1e-10, format!("100 draws, worst relative error {worst:.2e} (tol 1e-10)"))
}

fn ac3() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for delta in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let p = StabilityParams::reference(delta, 1.0).unwrap();
        let n = count_unstable_roots(&p, 1e-3).map_err(|e| e.to_string())?;
        if n != 0 {
            ok = false;
            let v = find_roots_outside(&p, &RootOptions::default()).map_err(|e| e.to_string())?;
            notes.push(format!("beta=1 delta={delta}: {n} unstable root(s), max|A|={:.4}", v.max_modulus));
        }
    }
    let grid: Vec<f64> = (0..=16).map(|k| 10f64.powf(-2.0 + 0.25 * k as f64)).collect();
    let mut hits = 0;
    for &delta in &grid {
        if count_unstable_roots(&StabilityParams::reference(delta, 0.0).unwrap(), 1e-3).map_err(|e| e.to_string())? >= 1 {
            hits += 1;
        }
    }
    ok &= hits >= 1;
    notes.push(format!("beta=0: {hits}/{} scan deltas unstable", grid.len()));
    ensure(ok, notes.join("; "))
}

fn ac4() -> Outcome {
    let g = ShellGeometry::new(1.0, 2.0).unwrap();
    let deltas: Vec<f64> = (0..10).map(|k| 10f64.powf(-1.0 + k as f64 / 3.0)).collect();
    let betas: Vec<f64> = (0..10).map(|k| 0.1 + k as f64 * (3.0 - 0.1) / 9.0).collect();
    let cells: Vec<(f64, f64)> = betas.iter().flat_map(|&b| deltas.iter().map(move |&d| (d, b))).collect();
    let results: Vec<Result<(bool, bool, f64, f64), String>> = cells
        .par_iter()
        .map(|&(delta, beta)| {
            let sp = StabilityParams::reference(delta, beta).map_err(|e| e.to_string())?;
            let v = find_roots_outside(&sp, &RootOptions::default()).map_err(|e| e.to_string())?;
            let grid = RadialGrid::new(g, 200).map_err(|e| e.to_string())?;
            let ap = AdParams::from_dimensionless(&g, 0.05, delta, beta, 0.0, 1.0, 1.0).map_err(|e| e.to_string())?;
            let st = AdStepper::new(ap, grid).map_err(|e| e.to_string())?;
            let growth = measure_growth(&st, 2000, 200, 17).map_err(|e| e.to_string())?;
            Ok((v.is_stable(), growth <= 1.0 + 1e-3, growth, v.max_modulus))
        })
        .collect();
    let mut agree = 0;
    let mut unstable = 0;
    let mut growth_ok = 0;
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for (res, &(d, b)) in results.iter().zip(&cells) {
        let (analysis, sim, growth, max_a) = res.clone()?;
        if analysis == sim {
            agree += 1;
        } else {
            misses.push(format!("({d:.3},{b:.3}) growth {growth:.6} max|A| {max_a:.6}"));
        }
        if !analysis {
            unstable += 1;
            let rel = (growth - max_a).abs() / max_a;
            worst = worst.max(rel);
            if rel <= 0.05 {
                growth_ok += 1;
            }
        }
    }
    let mut msg = format!(
        "{agree}/100 cells agree (need 95); growth within 5% of max|A| on {growth_ok}/{unstable} unstable cells (worst {:.2}%)",
        100.0 * worst
    );
    if !misses.is_empty() {
        msg.push_str(&format!("; disagreements: {}", misses.join(", ")));
    }
    ensure(agree >= 95 && growth_ok == unstable, msg)
}

#[allow(clippy::approx_constant)]
fn ac5() -> Outcome {
    let dn = 0.01_f64;
    let cf = sphere_closed_form::<f64>(0.5, 1.0, dn).map_err(|e| e.to_string())?;
    let (v, w) = (cf.dvv[(0, 0)] * dn, cf.dww[(0, 0)] * dn);
    let five = (v - 2.0944).abs() < 5e-5 && (w - 0.52360).abs() < 5e-6;
    // Discrete assembly with ds_n chosen so that delta_n matches the closed form.
    let (nu, dt, alpha) = (1.0_f64, 1e-3_f64, 0.5_f64);
    let ds = 0.05;
    let dn = delta_n(ds, nu, dt, alpha).map_err(|e| e.to_string())?;
    let mesh = SurfaceMesh::lat_long_sphere(0.5, Vector3::zeros(), 40, 80, ds).map_err(|e| e.to_string())?;
    let t = assemble_tensors::<f64>(&mesh, 1.0, nu, dt, alpha).map_err(|e| e.to_string())?;
    let exact = sphere_closed_form(0.5, 1.0, dn).map_err(|e| e.to_string())?;
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    let m = t.to_matrix();
    let e = exact.to_matrix();
    let scale = e.diagonal().max();
    for i in 0..6 {
        for j in 0..6 {
            if i == j {
                diag = diag.max((m[(i, j)] - e[(i, j)]).abs() / e[(i, j)]);
            } else {
                off = off.max(m[(i, j)].abs() / scale);
            }
        }
    }
    ensure(
        five && diag < 5e-3 && off < 1e-4,
        format!(
            "closed form {v:.5}, {w:.5} mu/dn; mesh diag error {:.3}% (tol 0.5%), off-diagonal {off:.1e} (tol 1e-4); Dvv_xx*dn = {:.4}",
            100.0 * diag,
            m[(0, 0)] * dn
        ),
    )
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = f64::INFINITY;
    let mut asym: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..200);
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        for _ in 0..n {
            pts.push(Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)));
            let v = loop {
                let v = Vector3::<f64>::from_fn(|_, _| rng.random_range(-1.0..1.0));
                if v.norm() > 0.1 {
                    break v.normalize();
                }
            };
            nrm.push(v);
        }
        let wts = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
        let ds = (0..n).map(|_| rng.random_range(1e-3..0.2)).collect();
        let xb = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
        let mesh = SurfaceMesh::new(pts, nrm, wts, ds, xb).map_err(|e| e.to_string())?;
        let t = assemble_tensors(&mesh, 1.0, 1.0, 1e-2, 0.5).map_err(|e| e.to_string())?;
        worst = worst.min(t.min_eigenvalue() / t.norm());
        asym = asym.max(t.asymmetry() / t.norm());
    }
    ensure(
        worst >= -1e-10 && asym == 0.0,
        format!("50 meshes: min eigenvalue / |D| = {worst:.2e} (tol -1e-10), asymmetry {asym:.1e}"),
    )
}

fn ac7() -> Outcome {
    let levels = [(20, 126), (40, 246), (80, 486)];
    let errs = levels
        .iter()
        .map(|&(nr, m)| annulus_errors(1.0, 2.0, nr, m, 3))
        .collect::<amprb::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let res = errs.iter().map(|e| e.residual).fold(0.0, f64::max);
    let area = observed_orders(&errs.iter().map(|e| e.area).collect::<Vec<_>>());
    let inner = observed_orders(&errs.iter().map(|e| e.inner).collect::<Vec<_>>());
    let outer = observed_orders(&errs.iter().map(|e| e.outer).collect::<Vec<_>>());
    let min = area.iter().chain(&inner).chain(&outer).cloned().fold(f64::INFINITY, f64::min);
    ensure(
        min >= 1.9 && res < 1e-10,
        format!("orders area {area:.2?} inner {inner:.2?} outer {outer:.2?} (min 1.9); max w^T A residual {res:.1e}"),
    )
}

fn ac8() -> Outcome {
    let sys = |eps: f64, b0: f64| MprfSystem::normalized(Arc::new(|_| -1.0), RepulsionParams::new(0.5, 0.1, eps, b0).unwrap(), 1.0, 0.0);
    let run = |eps, b0, t| simulate_mprf(&sys(eps, b0), 1e-4, t, 10).map_err(|e| e.to_string());
    let elastic = run(0.01, 0.0, 3.0)?;
    let drift = elastic.energy_drift();
    let mut monotone = true;
    for b0 in [10.0, 100.0, 1e4] {
        let tr = run(0.01, b0, 5.0)?;
        monotone &= tr.samples.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12);
    }
    let cases = [
        run(0.5, 0.0, 3.0)?.classify(),
        elastic.classify(),
        run(0.01, 100.0, 10.0)?.classify(),
        run(0.01, 1e4, 10.0)?.classify(),
    ];
    let want = [CollisionCase::Penetration, CollisionCase::Elastic, CollisionCase::UnderDamped, CollisionCase::OverDamped];
    let labels: Vec<&str> = cases.iter().map(|c| c.label()).collect();
    ensure(
        drift < 1e-6 && monotone && cases == want,
        format!("Case II drift {drift:.2e} (tol 1e-6); damped energy non-increasing: {monotone}; cases {labels:?}"),
    )
}

fn ac9() -> Outcome {
    let dts = [0.02, 0.01, 0.005, 0.0025];
    let mut notes = Vec::new();
    let mut ok = true;
    for rho_b in [1e-7, 1.0, 1e7] {
        let c = piston_convergence(PistonParams::default().with_density(rho_b), &dts, 0.8).map_err(|e| e.to_string())?;
        ok &= c.orders.iter().all(|o| (1.8..=2.2).contains(o));
        notes.push(format!("rho_b={rho_b:e} orders {:.2?}", c.orders));
    }
    let unit = piston_convergence(PistonParams::default(), &dts, 0.8).map_err(|e| e.to_string())?;
    let zero = piston_convergence(PistonParams::default().with_density(0.0), &dts, 0.8).map_err(|e| e.to_string())?;
    let ratio = zero.errors.iter().zip(&unit.errors).map(|(z, u)| z / u).fold(0.0, f64::max);
    ok &= ratio <= 2.0 && zero.errors.iter().all(|e| e.is_finite());
    notes.push(format!("rho_b=0 error ratio to rho_b=1 at most {ratio:.2}"));
    ensure(ok, notes.join("; "))
}

fn ac10() -> Outcome {
    let e = (-1.0f64).exp();
    let i1 = msb_i1(C::new(1.0, 0.0)).re;
    let k1 = msb_k1(C::new(1.0, 0.0)).map_err(|e| e.to_string())?.re;
    let values = (i1 - e).abs() < 1e-14 && (k1 - 2.0 * e).abs() < 1e-14;
    // ODE residual z^2 f'' + 2 z f' - (z^2 + 2) f at two FD steps.
    let order = |f: &dyn Fn(C) -> C, z: C| {
        let res = |h: f64| {
            let (fm, f0, fp) = (f(z - h), f(z), f(z + h));
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            (z * z * d2 + 2.0 * z * d1 - (z * z + 2.0) * f0).norm()
        };
        (res(2e-2) / res(1e-2)).log2()
    };
    let mut orders = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let z = C::from_polar(rng.random_range(0.1..20.0), rng.random_range(-PI..PI));
        orders.push(order(&|z| msb_i1(z), z));
        orders.push(order(&|z| msb_k1(z).unwrap(), z));
    }
    let g = ShellGeometry::new(1.0, 2.0).unwrap();
    let mut branch: f64 = 0.0;
    for _ in 0..20 {
        let zeta = C::new(rng.random_range(0.05..30.0), rng.random_range(-30.0..30.0));
        let r = 1.1 + 0.8 * rng.random::<f64>();
        let zr = |h: f64| {
            let phi = |r: f64| phi_profile(zeta, r, &g).unwrap();
            let (fm, f0, fp) = (phi(r - h), phi(r), phi(r + h));
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            (r * r * d2 + 2.0 * r * d1 - (zeta * zeta * r * r + 2.0) * f0).norm()
        };
        if zeta.norm() < 15.0 {
            orders.push((zr(2e-3) / zr(1e-3)).log2());
        }
        let (a, b) = (phi_profile(zeta, r, &g).unwrap(), phi_profile(-zeta, r, &g).unwrap());
        branch = branch.max((a - b).norm() / a.norm());
    }
    let worst = orders.iter().map(|o| (o - 2.0).abs()).fold(0.0, f64::max);
    ensure(
        values && worst < 0.25 && branch < 1e-12,
        format!(
            "i1(1)-1/e = {:.1e}, k1(1)-2/e = {:.1e}; ODE residual orders within {worst:.3} of 2 ({} checks); branch mismatch {branch:.1e}",
            i1 - e,
            k1 - 2.0 * e,
            orders.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 added-mass free-space limit", ac1),
        ("AC2 MP-AM semi-discrete exactness", ac2),
        ("AC3 stability band near beta_d = 1", ac3),
        ("AC4 analysis-simulation agreement", ac4),
        ("AC5 sphere added-damping tensors", ac5),
        ("AC6 Tensor6 symmetric PSD", ac6),
        ("AC7 null-vector quadrature", ac7),
        ("AC8 collision energy identity and cases", ac8),
        ("AC9 piston convergence and mass robustness", ac9),
        ("AC10 special functions", ac10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("[PASS] {name}: {msg} ({secs:.2}s)"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] {name}: {msg} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
