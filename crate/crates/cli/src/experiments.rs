//! One function per `group action`, each mapping resolved parameters to tables.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use amprb::collision::{damping_b, damping_b_theta, g_rf, g_rt, simulate_mprf, AngularParams, MprfSystem, RepulsionParams};
use amprb::damping_tensors::{assemble_tensors, delta_n, sphere_closed_form, SurfaceMesh, Tensor6, Tensor6Record};
use amprb::model_ad::{measure_growth, AdParams, AdStepper, RadialGrid};
use amprb::model_am::{AmProblem, Forcing};
use amprb::piston::{exact_state, piston_convergence, PistonParams, PistonStepper};
use amprb::quadrature::{
    annulus_errors, compatibility_residual, compute_weights, observed_orders, CompositeGrid, NullVectorOptions,
};
use amprb::specfun::{steady_profile, ShellGeometry};
use amprb::stability::{find_roots_outside, locate_boundary, scan_region, trace_boundary, RootOptions, StabilityParams, TraceOptions};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Resolver;
use crate::output::{row, Outcome, Table};
use crate::CliError;

type Run = Result<(serde_json::Value, Outcome), CliError>;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n).into_iter().map(|e| 10f64.powf(e)).collect()
}

fn need(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}

fn echo<P: Serialize>(p: &P) -> serde_json::Value {
    serde_json::to_value(p).expect("parameter structs serialize")
}

/// Dispatches on the experiment name.
pub fn run(r: &Resolver, seed: u64) -> Run {
    match (r.group, r.action) {
        ("mp-am", "exact") => mp_am(r, false),
        ("mp-am", "bvp") => mp_am(r, true),
        ("mp-ad", "simulate") => mp_ad_simulate(r, seed),
        ("mp-ad", "growth") => mp_ad_growth(r, seed),
        ("stability", "roots") => stability_roots(r),
        ("stability", "scan") => stability_scan(r),
        ("stability", "boundary") => stability_boundary(r),
        ("tensors", "sphere") => tensors_sphere(r),
        ("tensors", "mesh") => tensors_mesh(r),
        ("quadrature", "weights") => quadrature_weights(r, seed),
        ("quadrature", "converge") => quadrature_converge(r),
        ("collision", "simulate") => collision_simulate(r),
        ("collision", "profiles") => collision_profiles(r),
        ("piston", "exact") => piston_exact(r),
        ("piston", "simulate") => piston_simulate(r),
        ("piston", "converge") => piston_converge(r),
        (g, a) => Err(CliError::Config(format!("unknown experiment {g} {a}"))),
    }
}

// ---------------------------------------------------------------------------
// mp-am

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ForcingKind {
    Zero,
    Constant,
    Sine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MpAmParams {
    r1: f64,
    r2: f64,
    rho: f64,
    m_b: f64,
    w_b0: f64,
    forcing: ForcingKind,
    amplitude: f64,
    omega: f64,
    /// Single output time; overrides `t_end` and `n_times`.
    t: Option<f64>,
    t_end: f64,
    n_times: usize,
    n_r: usize,
}

impl Default for MpAmParams {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            rho: 1.0,
            m_b: 1.0,
            w_b0: 0.0,
            forcing: ForcingKind::Sine,
            amplitude: 1.0,
            omega: 2.0 * PI,
            t: None,
            t_end: 1.0,
            n_times: 11,
            n_r: 11,
        }
    }
}

fn forcing(kind: ForcingKind, amplitude: f64, omega: f64) -> Forcing<f64> {
    match kind {
        ForcingKind::Zero => Arc::new(|_| 0.0),
        ForcingKind::Constant => Arc::new(move |_| amplitude),
        ForcingKind::Sine => Arc::new(move |t: f64| amplitude * (omega * t).sin()),
    }
}

fn mp_am(r: &Resolver, bvp: bool) -> Run {
    let p: MpAmParams = r.resolve()?;
    need(p.n_r >= 2 && (p.t.is_some() || p.n_times >= 1), "need n_r >= 2 and n_times >= 1")?;
    let geom = ShellGeometry::new(p.r1, p.r2)?;
    let f_e = forcing(p.forcing, p.amplitude, p.omega);
    let prob = AmProblem::new(geom, p.rho, p.m_b, p.w_b0, f_e.clone())?;
    let times = match p.t {
        Some(t) => vec![t],
        None => linspace(0.0, p.t_end, p.n_times),
    };
    let radii = linspace(p.r1, p.r2, p.n_r);
    let mut out = Outcome::default();
    if bvp {
        let mut t = Table::new("bvp", &["t", "r", "p_hat", "p_hat_exact", "a_w", "a_w_exact"]);
        let mut worst: f64 = 0.0;
        for &time in &times {
            let ex = prob.exact_state(time)?;
            let amp = prob.solve_amp_pressure_bvp(f_e(time))?;
            let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
            worst = worst.max(rel(amp.a_w, ex.a_w));
            for &rad in &radii {
                worst = worst.max(rel(amp.p_hat(rad), ex.p_hat(rad)));
                t.push(row![time, rad, amp.p_hat(rad), ex.p_hat(rad), amp.a_w, ex.a_w]);
            }
        }
        out.tables.push(t);
        out.summary = json!({ "added_mass": prob.added_mass(), "max_relative_error": worst });
    } else {
        let mut t = Table::new("exact", &["t", "r", "w_b", "a_w", "p_hat", "u_hat", "v_hat"]);
        for &time in &times {
            let ex = prob.exact_state(time)?;
            for &rad in &radii {
                t.push(row![time, rad, ex.w_b, ex.a_w, ex.p_hat(rad), ex.u_hat(rad), ex.v_hat(rad)]);
            }
        }
        out.tables.push(t);
        out.summary = json!({ "added_mass": prob.added_mass() });
    }
    Ok((echo(&p), out))
}

// ---------------------------------------------------------------------------
// mp-ad

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum InitialData {
    Random,
    Steady,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MpAdParams {
    r1: f64,
    r2: f64,
    n_cells: usize,
    dr: f64,
    delta: f64,
    beta_d: f64,
    i_bar: f64,
    rho: f64,
    mu: f64,
    steps: usize,
    record_every: usize,
    initial: InitialData,
    omega_b0: f64,
    torque_amplitude: f64,
    torque_omega: f64,
}

impl Default for MpAdParams {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            n_cells: 200,
            dr: 0.05,
            delta: 1.0,
            beta_d: 1.0,
            i_bar: 0.0,
            rho: 1.0,
            mu: 1.0,
            steps: 200,
            record_every: 1,
            initial: InitialData::Random,
            omega_b0: 1.0,
            torque_amplitude: 0.0,
            torque_omega: 1.0,
        }
    }
}

fn ad_stepper(geom: ShellGeometry<f64>, n_cells: usize, dr: f64, delta: f64, beta_d: f64, i_bar: f64, rho: f64, mu: f64) -> Result<AdStepper<f64>, CliError> {
    let grid = RadialGrid::new(geom, n_cells)?;
    let params = AdParams::from_dimensionless(&geom, dr, delta, beta_d, i_bar, rho, mu)?;
    Ok(AdStepper::new(params, grid)?)
}

fn mp_ad_simulate(r: &Resolver, seed: u64) -> Run {
    let p: MpAdParams = r.resolve()?;
    need(p.record_every >= 1, "record_every must be at least 1")?;
    let geom = ShellGeometry::new(p.r1, p.r2)?;
    let st = ad_stepper(geom, p.n_cells, p.dr, p.delta, p.beta_d, p.i_bar, p.rho, p.mu)?;
    let n = st.grid().len();
    let w0: Vec<f64> = match p.initial {
        InitialData::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
        InitialData::Steady => {
            let h = (p.r2 - p.r1) / p.n_cells as f64;
            (0..n).map(|i| p.omega_b0 * steady_profile(p.r1 + h * i as f64, &geom)).collect()
        }
    };
    let torque = |t: f64| p.torque_amplitude * (p.torque_omega * t).sin();
    let dt = st.params().dt;
    let mut s = st.initial_state(w0, p.omega_b0, torque(0.0))?;
    let mut t = Table::new("trajectory", &["t", "omega_b", "b_omega", "w_inf"]);
    let w_inf = |w: &[f64]| w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    t.push(row![s.t, s.omega_b, s.b_omega, w_inf(&s.w_hat)]);
    for k in 1..=p.steps {
        s = st.step(&s, torque(k as f64 * dt))?;
        if !s.omega_b.is_finite() {
            return Err(CliError::Numerical(format!("body velocity not finite at step {k}")));
        }
        if k % p.record_every == 0 || k == p.steps {
            t.push(row![s.t, s.omega_b, s.b_omega, w_inf(&s.w_hat)]);
        }
    }
    let summary = json!({ "dt": dt, "delta": st.params().delta(), "added_damping": st.damping() });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GrowthParams {
    r1: f64,
    r2: f64,
    n_cells: usize,
    dr: f64,
    deltas: Vec<f64>,
    betas: Vec<f64>,
    i_bar: f64,
    rho: f64,
    mu: f64,
    steps: usize,
    transient: usize,
    threshold: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            n_cells: 200,
            dr: 0.05,
            deltas: vec![0.1, 1.0, 10.0, 100.0],
            betas: vec![0.1, 0.5, 1.0],
            i_bar: 0.0,
            rho: 1.0,
            mu: 1.0,
            steps: 2000,
            transient: 200,
            threshold: 1e-3,
        }
    }
}

fn mp_ad_growth(r: &Resolver, seed: u64) -> Run {
    let p: GrowthParams = r.resolve()?;
    need(!p.deltas.is_empty() && !p.betas.is_empty(), "deltas and betas must be non-empty")?;
    let geom = ShellGeometry::new(p.r1, p.r2)?;
    let cells: Vec<(f64, f64)> = p.betas.iter().flat_map(|&b| p.deltas.iter().map(move |&d| (d, b))).collect();
    let growth: Vec<Result<f64, CliError>> = cells
        .par_iter()
        .map(|&(d, b)| {
            let st = ad_stepper(geom, p.n_cells, p.dr, d, b, p.i_bar, p.rho, p.mu)?;
            Ok(measure_growth(&st, p.steps, p.transient, seed)?)
        })
        .collect();
    let mut t = Table::new("growth", &["delta", "beta_d", "growth", "stable"]);
    for ((d, b), g) in cells.iter().zip(growth) {
        let g = g?;
        t.push(row![*d, *b, g, g <= 1.0 + p.threshold]);
    }
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary: json!({ "cells": cells.len() }) }))
}

// ---------------------------------------------------------------------------
// stability

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RootParams {
    r1: f64,
    r2: f64,
    dr: f64,
    delta: f64,
    beta_d: f64,
    i_bar: f64,
    eps: f64,
    r_outer: f64,
}

impl Default for RootParams {
    fn default() -> Self {
        Self { r1: 1.0, r2: 2.0, dr: 0.05, delta: 1.0, beta_d: 1.0, i_bar: 0.0, eps: 1e-3, r_outer: 10.0 }
    }
}

fn root_options(eps: f64, r_outer: f64) -> RootOptions<f64> {
    RootOptions { eps, r_outer, ..RootOptions::default() }
}

fn stability_roots(r: &Resolver) -> Run {
    let p: RootParams = r.resolve()?;
    let sp = StabilityParams::new(ShellGeometry::new(p.r1, p.r2)?, p.dr, p.delta, p.beta_d, p.i_bar)?;
    let v = find_roots_outside(&sp, &root_options(p.eps, p.r_outer))?;
    let mut t = Table::new("roots", &["re", "im", "modulus"]);
    for z in &v.roots {
        t.push(row![z.re, z.im, z.norm()]);
    }
    let summary = json!({
        "unstable_root_count": v.unstable_root_count,
        "root_at_infinity": v.root_at_infinity,
        "max_modulus": v.max_modulus,
        "verdict": if v.is_stable() { "stable" } else { "unstable" },
    });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScanParams {
    r1: f64,
    r2: f64,
    dr: f64,
    i_bar: f64,
    delta_min: f64,
    delta_max: f64,
    n_delta: usize,
    beta_min: f64,
    beta_max: f64,
    n_beta: usize,
    eps: f64,
    r_outer: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            dr: 0.05,
            i_bar: 0.0,
            delta_min: 1e-2,
            delta_max: 1e2,
            n_delta: 17,
            beta_min: 0.0,
            beta_max: 2.0,
            n_beta: 21,
            eps: 1e-3,
            r_outer: 10.0,
        }
    }
}

fn stability_scan(r: &Resolver) -> Run {
    let p: ScanParams = r.resolve()?;
    need(p.delta_min > 0.0 && p.delta_max > p.delta_min, "need 0 < delta_min < delta_max")?;
    need(p.n_delta >= 2 && p.n_beta >= 2, "need n_delta, n_beta >= 2")?;
    let base = StabilityParams::new(ShellGeometry::new(p.r1, p.r2)?, p.dr, 1.0, 1.0, p.i_bar)?;
    let deltas = logspace(p.delta_min, p.delta_max, p.n_delta);
    let betas = linspace(p.beta_min, p.beta_max, p.n_beta);
    let map = scan_region(&deltas, &betas, p.i_bar, &base, &root_options(p.eps, p.r_outer))?;
    let mut t = Table::new("scan", &["delta", "beta_d", "verdict", "max_modulus", "unstable_roots"]);
    let (mut stable, mut failed) = (0, 0);
    for c in &map.cells {
        match &c.verdict {
            Ok(v) => {
                stable += usize::from(v.is_stable());
                let verdict = if v.is_stable() { "stable" } else { "unstable" };
                t.push(row![c.delta, c.beta_d, verdict, v.max_modulus, v.unstable_root_count]);
            }
            Err(_) => {
                failed += 1;
                t.push(row![c.delta, c.beta_d, "error", f64::NAN, 0usize]);
            }
        }
    }
    let errors: Vec<_> = map
        .cells
        .iter()
        .filter_map(|c| c.verdict.as_ref().err().map(|e| json!({ "delta": c.delta, "beta_d": c.beta_d, "error": e })))
        .collect();
    let summary = json!({ "cells": map.cells.len(), "stable": stable, "failed": failed, "errors": errors });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Direction {
    Both,
    Up,
    Down,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BoundaryParams {
    r1: f64,
    r2: f64,
    dr: f64,
    i_bar: f64,
    /// Starting `delta`, bracketed in `beta_d` by `[beta_a, beta_b]`.
    delta: f64,
    beta_a: f64,
    beta_b: f64,
    direction: Direction,
    step: f64,
    max_points: usize,
    delta_min: f64,
    delta_max: f64,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            dr: 0.05,
            i_bar: 0.0,
            delta: 10.0,
            beta_a: 0.05,
            beta_b: 1.0,
            direction: Direction::Both,
            step: 0.05,
            max_points: 400,
            delta_min: 1e-2,
            delta_max: 1e2,
        }
    }
}

fn stability_boundary(r: &Resolver) -> Run {
    let p: BoundaryParams = r.resolve()?;
    let base = StabilityParams::new(ShellGeometry::new(p.r1, p.r2)?, p.dr, p.delta, p.beta_a, p.i_bar)?;
    let start = locate_boundary(&base, p.delta, p.beta_a, p.beta_b)?;
    let opts = |dir: f64| TraceOptions {
        step: p.step,
        max_points: p.max_points,
        delta_min: p.delta_min,
        delta_max: p.delta_max,
        direction: dir,
        ..TraceOptions::default()
    };
    let mut curve = Vec::new();
    if p.direction != Direction::Up {
        let mut down = trace_boundary(&base, start, &opts(-1.0))?;
        down.reverse();
        curve.extend(down);
    }
    if p.direction != Direction::Down {
        let up = trace_boundary(&base, start, &opts(1.0))?;
        // Both branches start from the same corrected point.
        let skip = usize::from(!curve.is_empty());
        curve.extend(up.into_iter().skip(skip));
    }
    let mut t = Table::new("boundary", &["delta", "beta_d", "theta"]);
    for q in &curve {
        t.push(row![q.delta, q.beta_d, q.theta]);
    }
    let summary = json!({ "start": start, "points": curve.len() });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

// ---------------------------------------------------------------------------
// tensors

fn tensor_table(name: &'static str, t: &Tensor6<f64>) -> Table {
    let mut tab = Table::new(name, &["row", "c0", "c1", "c2", "c3", "c4", "c5"]);
    let m = t.to_matrix();
    for i in 0..6 {
        let mut r = row![i];
        r.extend((0..6).map(|j| m[(i, j)].into()));
        tab.push(r);
    }
    tab
}

fn tensor_doc(t: &Tensor6<f64>) -> serde_json::Value {
    serde_json::to_value(Tensor6Record::from(t)).expect("tensor records serialize")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SphereParams {
    radius: f64,
    mu: f64,
    nu: f64,
    dt: f64,
    alpha: f64,
    ds_n: f64,
    n_theta: usize,
    n_phi: usize,
}

impl Default for SphereParams {
    fn default() -> Self {
        Self { radius: 0.5, mu: 1.0, nu: 1.0, dt: 1e-3, alpha: 0.5, ds_n: 0.05, n_theta: 40, n_phi: 80 }
    }
}

fn tensors_sphere(r: &Resolver) -> Run {
    let p: SphereParams = r.resolve()?;
    let dn = delta_n(p.ds_n, p.nu, p.dt, p.alpha)?;
    let exact = sphere_closed_form(p.radius, p.mu, dn)?;
    let mesh = SurfaceMesh::lat_long_sphere(p.radius, Vector3::zeros(), p.n_theta, p.n_phi, p.ds_n)?;
    let disc = assemble_tensors(&mesh, p.mu, p.nu, p.dt, p.alpha)?;
    let (e, d) = (exact.to_matrix(), disc.to_matrix());
    let diag = (0..6).map(|i| (d[(i, i)] - e[(i, i)]).abs() / e[(i, i)]).fold(0.0, f64::max);
    let off = (0..36).filter(|k| k / 6 != k % 6).map(|k| d[(k / 6, k % 6)].abs()).fold(0.0, f64::max) / e.diagonal().max();
    let summary = json!({
        "delta_n": dn,
        "dvv_diag_times_delta_n": e[(0, 0)] * dn,
        "dww_diag_times_delta_n": e[(3, 3)] * dn,
        "max_relative_diagonal_error": diag,
        "max_relative_off_diagonal": off,
        "min_eigenvalue": disc.min_eigenvalue(),
    });
    let out = Outcome {
        tables: vec![tensor_table("tensor_closed_form", &exact), tensor_table("tensor_mesh", &disc)],
        documents: vec![("tensor6_closed_form", tensor_doc(&exact)), ("tensor6_mesh", tensor_doc(&disc))],
        summary,
    };
    Ok((echo(&p), out))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MeshParams {
    /// CSV with columns `x,y,z,nx,ny,nz,weight,ds_n`; empty for a sphere.
    mesh_file: String,
    radius: f64,
    center: [f64; 3],
    n_theta: usize,
    n_phi: usize,
    ds_n: f64,
    x_b: [f64; 3],
    mu: f64,
    nu: f64,
    dt: f64,
    alpha: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            mesh_file: String::new(),
            radius: 0.5,
            center: [0.0; 3],
            n_theta: 40,
            n_phi: 80,
            ds_n: 0.05,
            x_b: [0.0; 3],
            mu: 1.0,
            nu: 1.0,
            dt: 1e-3,
            alpha: 0.5,
        }
    }
}

#[derive(Deserialize)]
struct MeshRow {
    x: f64,
    y: f64,
    z: f64,
    nx: f64,
    ny: f64,
    nz: f64,
    weight: f64,
    ds_n: f64,
}

fn read_mesh(path: &PathBuf, x_b: Vector3<f64>) -> Result<SurfaceMesh<f64>, CliError> {
    let bad = |e: csv::Error| CliError::Config(format!("mesh file {}: {e}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(bad)?;
    let (mut pts, mut nrm, mut w, mut ds) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rd.deserialize::<MeshRow>() {
        let m = rec.map_err(bad)?;
        pts.push(Vector3::new(m.x, m.y, m.z));
        nrm.push(Vector3::new(m.nx, m.ny, m.nz));
        w.push(m.weight);
        ds.push(m.ds_n);
    }
    Ok(SurfaceMesh::new(pts, nrm, w, ds, x_b)?)
}

fn tensors_mesh(r: &Resolver) -> Run {
    let p: MeshParams = r.resolve()?;
    let mesh = if p.mesh_file.is_empty() {
        let mut m = SurfaceMesh::lat_long_sphere(p.radius, Vector3::from(p.center), p.n_theta, p.n_phi, p.ds_n)?;
        m.x_b = Vector3::from(p.x_b);
        m
    } else {
        read_mesh(&PathBuf::from(&p.mesh_file), Vector3::from(p.x_b))?
    };
    let t = assemble_tensors(&mesh, p.mu, p.nu, p.dt, p.alpha)?;
    let summary = json!({ "points": mesh.len(), "area": mesh.area(), "min_eigenvalue": t.min_eigenvalue(), "norm": t.norm() });
    Ok((echo(&p), Outcome { tables: vec![tensor_table("tensor", &t)], documents: vec![("tensor6", tensor_doc(&t))], summary }))
}

// ---------------------------------------------------------------------------
// quadrature

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GridKind {
    Segment,
    TwoSegments,
    Polar,
    TwoPatchAnnulus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WeightParams {
    grid: GridKind,
    /// Segment extent and cell count.
    a: f64,
    b: f64,
    n: usize,
    r1: f64,
    r2: f64,
    nr: usize,
    m: usize,
    overlap: usize,
    tol: f64,
    max_iter: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            grid: GridKind::TwoPatchAnnulus,
            a: 0.0,
            b: 1.0,
            n: 20,
            r1: 1.0,
            r2: 2.0,
            nr: 20,
            m: 126,
            overlap: 3,
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

fn quadrature_weights(r: &Resolver, seed: u64) -> Run {
    let p: WeightParams = r.resolve()?;
    let grid = match p.grid {
        GridKind::Segment => CompositeGrid::single_segment(p.a, p.b, p.n)?,
        GridKind::TwoSegments => CompositeGrid::two_segments(p.n)?,
        GridKind::Polar => CompositeGrid::polar_annulus(p.r1, p.r2, p.nr, p.m)?,
        GridKind::TwoPatchAnnulus => CompositeGrid::two_patch_annulus(p.r1, p.r2, p.nr, p.m, p.overlap)?,
    };
    let opts = NullVectorOptions { tol: p.tol, max_iter: p.max_iter, seed, ..NullVectorOptions::default() };
    let (op, wv) = compute_weights(&grid, &opts)?;
    let mut t = Table::new("weights", &["component", "index", "type", "weight"]);
    for k in 0..grid.len() {
        let (c, l) = grid.locate(k);
        t.push(row![c, l, wv.kinds[k].label(), wv.weights[k]]);
    }
    let summary = json!({
        "points": grid.len(),
        "volume": wv.volume_sum(),
        "surface": [wv.surface_sum(Some(0)), wv.surface_sum(Some(1))],
        "residual": compatibility_residual(&op, &wv),
        "negative_volume_weights": wv.negative_volume_weights().len(),
    });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvergeParams {
    r1: f64,
    r2: f64,
    nr: Vec<usize>,
    m: Vec<usize>,
    overlap: usize,
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self { r1: 1.0, r2: 2.0, nr: vec![20, 40, 80], m: vec![126, 246, 486], overlap: 3 }
    }
}

fn quadrature_converge(r: &Resolver) -> Run {
    let p: ConvergeParams = r.resolve()?;
    need(p.nr.len() == p.m.len() && p.nr.len() >= 2, "nr and m must be equal-length lists of at least two levels")?;
    let errs = p
        .nr
        .par_iter()
        .zip(&p.m)
        .map(|(&nr, &m)| annulus_errors(p.r1, p.r2, nr, m, p.overlap))
        .collect::<amprb::Result<Vec<_>>>()?;
    let mut t = Table::new("converge", &["nr", "m", "area_error", "inner_error", "outer_error", "residual", "negative_weights"]);
    for e in &errs {
        t.push(row![e.nr, e.m, e.area, e.inner, e.outer, e.residual, e.negative_weights]);
    }
    let pick = |f: fn(&amprb::quadrature::AnnulusErrors) -> f64| observed_orders(&errs.iter().map(f).collect::<Vec<_>>());
    let (area, inner, outer) = (pick(|e| e.area), pick(|e| e.inner), pick(|e| e.outer));
    let mut o = Table::new("orders", &["level", "area_order", "inner_order", "outer_order"]);
    for k in 0..area.len() {
        o.push(row![k + 1, area[k], inner[k], outer[k]]);
    }
    Ok((echo(&p), Outcome { tables: vec![t, o], documents: Vec::new(), summary: json!({ "levels": errs.len() }) }))
}

// ---------------------------------------------------------------------------
// collision

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CollisionParams {
    y0: f64,
    delta: f64,
    eps: f64,
    b0: f64,
    /// Constant normalized forcing.
    f: f64,
    y: f64,
    v: f64,
    dt: f64,
    t_end: f64,
    record_every: usize,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self { y0: 0.5, delta: 0.1, eps: 0.01, b0: 0.0, f: -1.0, y: 1.0, v: 0.0, dt: 1e-4, t_end: 10.0, record_every: 10 }
    }
}

fn collision_simulate(r: &Resolver) -> Run {
    let p: CollisionParams = r.resolve()?;
    need(p.record_every >= 1, "record_every must be at least 1")?;
    let params = RepulsionParams::new(p.y0, p.delta, p.eps, p.b0)?;
    let f = p.f;
    let sys = MprfSystem::normalized(Arc::new(move |_| f), params, p.y, p.v);
    let tr = simulate_mprf(&sys, p.dt, p.t_end, p.record_every)?;
    let mut t = Table::new("trajectory", &["t", "y", "v", "energy", "in_layer", "penetrated"]);
    for s in &tr.samples {
        t.push(row![s.t, s.y, s.v, s.energy, s.y <= p.y0 + p.delta, s.y < p.y0]);
    }
    let case = tr.classify();
    let summary = json!({
        "case": case.label(),
        "regime": case,
        "min_y": tr.min_y(),
        "energy_drift": tr.energy_drift(),
        "velocity_sign_changes": tr.velocity_sign_changes(),
    });
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProfileParams {
    y0: f64,
    delta: f64,
    eps: f64,
    b0: f64,
    y_min: f64,
    y_max: f64,
    n_y: usize,
    /// Angular limits in degrees; layer values follow the heart-valve set.
    theta_min_deg: f64,
    theta_max_deg: f64,
    n_theta: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            y0: 0.5,
            delta: 0.1,
            eps: 0.01,
            b0: 100.0,
            y_min: 0.45,
            y_max: 0.7,
            n_y: 251,
            theta_min_deg: 0.0,
            theta_max_deg: 75.0,
            n_theta: 301,
        }
    }
}

fn collision_profiles(r: &Resolver) -> Run {
    let p: ProfileParams = r.resolve()?;
    need(p.n_y >= 2 && p.n_theta >= 2, "need n_y, n_theta >= 2")?;
    let rp = RepulsionParams::new(p.y0, p.delta, p.eps, p.b0)?;
    let ap = AngularParams::heart_valve(p.theta_min_deg.to_radians(), p.theta_max_deg.to_radians())?;
    let mut lin = Table::new("repulsion", &["y", "g_rf", "b"]);
    for y in linspace(p.y_min, p.y_max, p.n_y) {
        lin.push(row![y, g_rf(y, &rp), damping_b(y, &rp)]);
    }
    let mut ang = Table::new("angular", &["theta", "g_rt", "b_theta"]);
    for th in linspace(ap.theta_min - 2.0 * ap.delta, ap.theta_max + 2.0 * ap.delta, p.n_theta) {
        ang.push(row![th, g_rt(th, &ap), damping_b_theta(th, &ap)]);
    }
    Ok((echo(&p), Outcome { tables: vec![lin, ang], documents: Vec::new(), summary: json!({ "angular_params": ap }) }))
}

// ---------------------------------------------------------------------------
// piston

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PistonRunParams {
    rho: f64,
    h: f64,
    w: f64,
    l: f64,
    l_b: f64,
    rho_b: f64,
    alpha_b: f64,
    dt: f64,
    t_end: f64,
    /// Output times for `piston exact`.
    n_times: usize,
}

impl Default for PistonRunParams {
    fn default() -> Self {
        let d = PistonParams::<f64>::default();
        Self { rho: d.rho, h: d.h, w: d.w, l: d.l, l_b: d.l_b, rho_b: d.rho_b, alpha_b: d.alpha_b, dt: 0.01, t_end: 0.8, n_times: 81 }
    }
}

impl PistonRunParams {
    fn physical(&self) -> Result<PistonParams<f64>, CliError> {
        let p = PistonParams { rho: self.rho, h: self.h, w: self.w, l: self.l, l_b: self.l_b, rho_b: self.rho_b, alpha_b: self.alpha_b };
        p.validate()?;
        Ok(p)
    }
}

const STATE_COLUMNS: [&str; 6] = ["t", "x_b", "v_b", "a_b", "p_l", "p_i"];

fn piston_exact(r: &Resolver) -> Run {
    let p: PistonRunParams = r.resolve()?;
    let pp = p.physical()?;
    let mut t = Table::new("exact", &STATE_COLUMNS);
    for time in linspace(0.0, p.t_end, p.n_times) {
        let s = exact_state(time, &pp);
        t.push(row![s.t, s.x_b, s.v_b, s.a_b, s.p_l, s.p_i]);
    }
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary: json!({ "body_mass": pp.body_mass() }) }))
}

fn piston_simulate(r: &Resolver) -> Run {
    let p: PistonRunParams = r.resolve()?;
    let pp = p.physical()?;
    need(p.dt > 0.0 && p.t_end > 0.0, "need dt > 0 and t_end > 0")?;
    let st = PistonStepper::exact(pp)?;
    let traj = st.run(st.exact_start(0.0, p.dt), p.dt, p.t_end)?;
    let mut t = Table::new("trajectory", &["t", "x_b", "v_b", "a_b", "err_x", "err_v", "err_a"]);
    let mut worst: f64 = 0.0;
    for s in &traj {
        let e = exact_state(s.t, &pp);
        let (ex, ev, ea) = (s.x_b - e.x_b, s.v_b - e.v_b, s.a_b - e.a_b);
        worst = worst.max(ex.abs()).max(ev.abs());
        t.push(row![s.t, s.x_b, s.v_b, s.a_b, ex, ev, ea]);
    }
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary: json!({ "max_error": worst, "steps": traj.len() - 1 }) }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PistonConvergeParams {
    densities: Vec<f64>,
    dts: Vec<f64>,
    t_end: f64,
}

impl Default for PistonConvergeParams {
    fn default() -> Self {
        Self { densities: vec![1e-7, 1.0, 1e7, 0.0], dts: vec![0.02, 0.01, 0.005, 0.0025], t_end: 0.8 }
    }
}

fn piston_converge(r: &Resolver) -> Run {
    let p: PistonConvergeParams = r.resolve()?;
    need(p.dts.len() >= 2 && !p.densities.is_empty(), "need at least two dts and one density")?;
    let runs = p
        .densities
        .par_iter()
        .map(|&rho_b| piston_convergence(PistonParams::default().with_density(rho_b), &p.dts, p.t_end))
        .collect::<amprb::Result<Vec<_>>>()?;
    let mut t = Table::new("converge", &["rho_b", "dt", "error", "order"]);
    for c in &runs {
        for (k, (&dt, &e)) in c.dts.iter().zip(&c.errors).enumerate() {
            let order = if k == 0 { f64::NAN } else { c.orders[k - 1] };
            t.push(row![c.rho_b, dt, e, order]);
        }
    }
    Ok((echo(&p), Outcome { tables: vec![t], documents: Vec::new(), summary: json!({ "densities": runs.len() }) }))
}
