//! Added-damping model problem: Stokes flow in a spherical shell driven by a
//! rotating sphere, and the AMP time stepper for it.
//!
//! The azimuthal velocity is `w = w_hat(r) sin(theta)`; `w_hat` lives on a
//! uniform radial grid with Dirichlet values `r1 omega_b` and `0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::specfun::ShellGeometry;

/// Uniform grid on `[r1, r2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    pub geom: ShellGeometry<T>,
    pub n_cells: usize,
    pub h: T,
    pub nodes: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn new(geom: ShellGeometry<T>, n_cells: usize) -> Result<Self> {
        if n_cells < 8 {
            return Err(invalid(format!("radial grid needs at least 8 cells, got {n_cells}")));
        }
        let h = geom.width() / T::of_usize(n_cells);
        let mut nodes: Vec<T> = (0..=n_cells).map(|j| geom.r1 + h * T::of_usize(j)).collect();
        nodes[n_cells] = geom.r2;
        Ok(Self { geom, n_cells, h, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells spanned by `dr`, which must be a whole multiple of `h`
    /// with `2 dr` inside the shell.
    pub fn stride(&self, dr: T) -> Result<usize> {
        let m = (dr / self.h).round();
        let tol = T::lit(1e-9);
        if !(m >= T::one()) || ((dr / self.h) - m).abs() > tol * m {
            return Err(invalid(format!("dr = {dr} is not a multiple of the grid spacing {}", self.h)));
        }
        let m = m.to_usize().unwrap_or(usize::MAX);
        if 2 * m > self.n_cells {
            return Err(invalid(format!("2 dr = {} exceeds the shell width", T::lit(2.0) * dr)));
        }
        Ok(m)
    }

    /// Interior stencil `(lower, diag, upper)` of the conservative operator at node `j`.
    fn stencil(&self, j: usize) -> (T, T, T) {
        let half = T::lit(0.5) * self.h;
        let r = self.nodes[j];
        let (rm, rp) = (r - half, r + half);
        let s = T::one() / (r * r * self.h * self.h);
        let lo = rm * rm * s;
        let up = rp * rp * s;
        (lo, -(lo + up) - T::lit(2.0) / (r * r), up)
    }

    fn check(&self, w: &[T]) -> Result<()> {
        if w.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: w.len() });
        }
        Ok(())
    }
}

/// Second-order conservative approximation of `(1/r^2)(r^2 w')' - 2 w / r^2`.
/// Boundary entries of the result are zero.
pub fn lop_apply<T: Real>(w: &[T], grid: &RadialGrid<T>) -> Result<Vec<T>> {
    grid.check(w)?;
    let n = grid.n_cells;
    let mut out = vec![T::zero(); n + 1];
    for j in 1..n {
        let (lo, di, up) = grid.stencil(j);
        out[j] = lo * w[j - 1] + di * w[j] + up * w[j + 1];
    }
    Ok(out)
}

/// One-sided second-order derivative `(-3 f0 + 4 f1 - f2) / (2 dr)`.
pub fn d_rh<T: Real>(f0: T, f1: T, f2: T, dr: T) -> T {
    (T::lit(-3.0) * f0 + T::lit(4.0) * f1 - f2) / (T::lit(2.0) * dr)
}

/// Factored Crank-Nicolson matrix `I - kappa L_h` on the interior nodes,
/// `kappa = nu dt / 2`.
#[derive(Debug, Clone)]
pub struct CnSolver<T> {
    grid: RadialGrid<T>,
    kappa: T,
    lo: Vec<T>,
    up: Vec<T>,
    di: Vec<T>,
    // Thomas elimination: modified super-diagonal and pivots.
    cp: Vec<T>,
    piv: Vec<T>,
}

impl<T: Real> CnSolver<T> {
    pub fn new(grid: &RadialGrid<T>, kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) {
            return Err(invalid("nu dt must be positive"));
        }
        let m = grid.n_cells - 1;
        let (mut lo, mut di, mut up) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
        for j in 1..grid.n_cells {
            let (l, d, u) = grid.stencil(j);
            lo.push(l);
            di.push(d);
            up.push(u);
        }
        let mut cp = vec![T::zero(); m];
        let mut piv = vec![T::zero(); m];
        for i in 0..m {
            let b = T::one() - kappa * di[i];
            let a = -kappa * lo[i];
            let p = if i == 0 { b } else { b - a * cp[i - 1] };
            if !(p.abs() >= T::lit(1e-14) * b.abs()) {
                return Err(Error::Singular(format!("Crank-Nicolson pivot {p} at row {i}")));
            }
            piv[i] = p;
            cp[i] = -kappa * up[i] / p;
        }
        Ok(Self { grid: grid.clone(), kappa, lo, up, di, cp, piv })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// Solves `(I - kappa L_h) w = (I + kappa L_h) w_n` with `w(r1) = bc_inner`, `w(r2) = 0`.
    pub fn solve(&self, w_n: &[T], bc_inner: T) -> Result<Vec<T>> {
        self.grid.check(w_n)?;
        let n = self.grid.n_cells;
        let k = self.kappa;
        let m = n - 1;
        let mut d = vec![T::zero(); m];
        for i in 0..m {
            let j = i + 1;
            d[i] = w_n[j] + k * (self.lo[i] * w_n[j - 1] + self.di[i] * w_n[j] + self.up[i] * w_n[j + 1]);
        }
        d[0] += k * self.lo[0] * bc_inner;
        d[0] /= self.piv[0];
        for i in 1..m {
            d[i] = (d[i] + k * self.lo[i] * d[i - 1]) / self.piv[i];
        }
        for i in (0..m - 1).rev() {
            let next = d[i + 1];
            d[i] -= self.cp[i] * next;
        }
        let mut w = Vec::with_capacity(n + 1);
        w.push(bc_inner);
        w.extend(d);
        w.push(T::zero());
        Ok(w)
    }

    /// Max-norm residual of the Crank-Nicolson identity at interior nodes.
    pub fn residual(&self, w: &[T], w_n: &[T]) -> Result<T> {
        let lw = lop_apply(w, &self.grid)?;
        let ln = lop_apply(w_n, &self.grid)?;
        let mut res = T::zero();
        for j in 1..self.grid.n_cells {
            let r = w[j] - self.kappa * lw[j] - (w_n[j] + self.kappa * ln[j]);
            res = res.max(r.abs());
        }
        Ok(res)
    }
}

/// One Crank-Nicolson step without caching the factorization.
pub fn cn_solve<T: Real>(w_n: &[T], bc_inner: T, params: &AdParams<T>, grid: &RadialGrid<T>) -> Result<Vec<T>> {
    CnSolver::new(grid, params.kappa())?.solve(w_n, bc_inner)
}

/// Physical parameters of the added-damping problem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdParams<T> {
    pub rho: T,
    pub mu: T,
    pub nu: T,
    pub i_b: T,
    pub beta_d: T,
    pub dt: T,
    pub v_b: T,
    /// Spacing of the one-sided derivative in the torque.
    pub dr: T,
}

impl<T: Real> AdParams<T> {
    pub fn new(geom: &ShellGeometry<T>, rho: T, mu: T, i_b: T, beta_d: T, dt: T, dr: T) -> Result<Self> {
        let pos = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos(rho, "rho")?;
        pos(mu, "mu")?;
        pos(dt, "dt")?;
        pos(dr, "dr")?;
        if !(i_b >= T::zero()) || !(beta_d >= T::zero()) {
            return Err(invalid("I_b and beta_d must be non-negative"));
        }
        let v_b = T::lit(4.0 / 3.0) * T::PI() * geom.r1.powi(3);
        Ok(Self { rho, mu, nu: mu / rho, i_b, beta_d, dt, v_b, dr })
    }

    /// Parameters reproducing the dimensionless pair `(delta, I_bar)` at spacing `dr`.
    pub fn from_dimensionless(geom: &ShellGeometry<T>, dr: T, delta: T, beta_d: T, i_bar: T, rho: T, mu: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(invalid("delta must be positive"));
        }
        let nu = mu / rho;
        let dt = T::lit(2.0) * (dr / delta).powi(2) / nu;
        let v_b = T::lit(4.0 / 3.0) * T::PI() * geom.r1.powi(3);
        let i_b = i_bar * rho * T::lit(2.0) * v_b * geom.r1 * dr / (delta * delta);
        Self::new(geom, rho, mu, i_b, beta_d, dt, dr)
    }

    pub fn kappa(&self) -> T {
        T::lit(0.5) * self.nu * self.dt
    }

    /// `dr / sqrt(nu dt / 2)`.
    pub fn delta(&self) -> T {
        self.dr / self.kappa().sqrt()
    }
}

/// Scalar added-damping coefficient of a rotating sphere.
pub fn added_damping_scalar<T: Real>(params: &AdParams<T>, r1: T) -> T {
    params.mu * T::lit(8.0 / 3.0) * T::PI() * r1.powi(4) * (T::one() - (-params.delta()).exp()) / params.dr
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdState<T> {
    pub t: T,
    pub w_hat: Vec<T>,
    pub omega_b: T,
    pub b_omega: T,
    pub prev_omega_b: T,
    pub prev_b_omega: T,
}

impl<T: Real> AdState<T> {
    /// `max(|w_hat|_inf, r1 |omega_b|)`.
    pub fn norm(&self, r1: T) -> T {
        self.w_hat.iter().fold(r1 * self.omega_b.abs(), |m, v| m.max(v.abs()))
    }

    fn scale(&mut self, s: T) {
        for v in &mut self.w_hat {
            *v *= s;
        }
        self.omega_b *= s;
        self.b_omega *= s;
        self.prev_omega_b *= s;
        self.prev_b_omega *= s;
    }
}

/// How the body responds to the fluid torque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BodyMode {
    #[default]
    Free,
    /// `omega_b = 0` for all time (infinite inertia).
    Pinned,
}

/// Predictor-corrector stepper with the added-damping term.
#[derive(Debug, Clone)]
pub struct AdStepper<T> {
    grid: RadialGrid<T>,
    params: AdParams<T>,
    cn: CnSolver<T>,
    stride: usize,
    damping: T,
    body_mass: T,
    /// Final fluid solve with the corrected body velocity.
    pub velocity_correction: bool,
    pub mode: BodyMode,
}

impl<T: Real> AdStepper<T> {
    pub fn new(params: AdParams<T>, grid: RadialGrid<T>) -> Result<Self> {
        let stride = grid.stride(params.dr)?;
        let cn = CnSolver::new(&grid, params.kappa())?;
        let damping = added_damping_scalar(&params, grid.geom.r1);
        let body_mass = params.i_b + params.beta_d * params.dt * damping;
        Ok(Self { grid, params, cn, stride, damping, body_mass, velocity_correction: true, mode: BodyMode::Free })
    }

    pub fn grid(&self) -> &RadialGrid<T> {
        &self.grid
    }

    pub fn params(&self) -> &AdParams<T> {
        &self.params
    }

    pub fn damping(&self) -> T {
        self.damping
    }

    /// Fluid torque `2 V_b mu [r D_rh(w/r)]` at `r1`.
    pub fn torque(&self, w: &[T]) -> T {
        let m = self.stride;
        let f = |j: usize| w[j] / self.grid.nodes[j];
        let r1 = self.grid.geom.r1;
        T::lit(2.0) * self.params.v_b * self.params.mu * r1 * d_rh(f(0), f(m), f(2 * m), self.params.dr)
    }

    fn body_solve(&self, w: &[T], b_prev: T, g_e: T) -> Result<T> {
        if self.mode == BodyMode::Pinned {
            return Ok(T::zero());
        }
        if self.body_mass == T::zero() {
            return Err(Error::Singular("I_b + beta_d dt D = 0 in the body equation".into()));
        }
        let bd = self.params.beta_d * self.params.dt * self.damping;
        Ok((self.torque(w) + bd * b_prev + g_e) / self.body_mass)
    }

    /// State with one-step history equal to the current values; the initial
    /// acceleration solves the body equation with zero extrapolated acceleration.
    pub fn initial_state(&self, mut w_hat: Vec<T>, omega_b: T, g_e: T) -> Result<AdState<T>> {
        self.grid.check(&w_hat)?;
        let omega_b = if self.mode == BodyMode::Pinned { T::zero() } else { omega_b };
        w_hat[0] = self.grid.geom.r1 * omega_b;
        let n = self.grid.n_cells;
        w_hat[n] = T::zero();
        let b = self.body_solve(&w_hat, T::zero(), g_e)?;
        Ok(AdState { t: T::zero(), w_hat, omega_b, b_omega: b, prev_omega_b: omega_b, prev_b_omega: b })
    }

    /// Advances one step; `g_e` is the external torque at the new time.
    pub fn step(&self, s: &AdState<T>, g_e: T) -> Result<AdState<T>> {
        self.grid.check(&s.w_hat)?;
        let dt = self.params.dt;
        let half = T::lit(0.5) * dt;
        let r1 = self.grid.geom.r1;
        let pinned = self.mode == BodyMode::Pinned;

        // 1. extrapolate
        let b_e = T::lit(2.0) * s.b_omega - s.prev_b_omega;
        let om_e = if pinned { T::zero() } else { s.prev_omega_b + T::lit(2.0) * dt * s.b_omega };
        // 2-4. predict
        let w_p = self.cn.solve(&s.w_hat, r1 * om_e)?;
        let b_p = self.body_solve(&w_p, b_e, g_e)?;
        let om_p = s.omega_b + half * (b_p + s.b_omega);
        // 5-7. correct
        let w_c = self.cn.solve(&s.w_hat, r1 * om_p)?;
        let b_n = self.body_solve(&w_c, b_p, g_e)?;
        let om_n = s.omega_b + half * (b_n + s.b_omega);
        // 8. fluid correction
        let w_n = if self.velocity_correction { self.cn.solve(&s.w_hat, r1 * om_n)? } else { w_c };

        Ok(AdState {
            t: s.t + dt,
            w_hat: w_n,
            omega_b: om_n,
            b_omega: b_n,
            prev_omega_b: s.omega_b,
            prev_b_omega: s.b_omega,
        })
    }
}

/// Renormalization bounds for [`measure_growth`].
const NORM_LO: f64 = 1e-200;
const NORM_HI: f64 = 1e200;

/// Geometric-mean growth factor per step of the homogeneous problem started
/// from seeded random data, averaged over the steps after `n_transient`.
pub fn measure_growth<T: Real>(stepper: &AdStepper<T>, n_steps: usize, n_transient: usize, seed: u64) -> Result<T> {
    if n_transient < 10 || n_steps <= n_transient {
        return Err(invalid("need n_steps > n_transient >= 10"));
    }
    let grid = stepper.grid();
    let r1 = grid.geom.r1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0: Vec<T> = (0..grid.len()).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
    let om0 = T::lit(rng.random_range(-1.0..1.0));
    let mut s = stepper.initial_state(w0, om0, T::zero())?;
    let mut norm = s.norm(r1);
    let mut log_sum = T::zero();
    for k in 0..n_steps {
        s = stepper.step(&s, T::zero())?;
        let next = s.norm(r1);
        if !next.is_finite() {
            return Err(Error::BlowUp(format!("state norm not finite at step {k}")));
        }
        if next == T::zero() {
            return Ok(T::zero());
        }
        if k >= n_transient {
            log_sum += (next / norm).ln();
        }
        norm = next;
        if norm < T::lit(NORM_LO) || norm > T::lit(NORM_HI) {
            s.scale(T::one() / norm);
            norm = T::one();
        }
    }
    Ok((log_sum / T::of_usize(n_steps - n_transient)).exp())
}
