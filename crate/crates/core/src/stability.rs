//! Amplification-factor analysis of the added-damping scheme.
//!
//! Normal modes `A^n` of the homogeneous stepper exist iff `N_v(A) = 0`,
//!
//! ```text
//! N_v(A) = gamma_v (A - 1)^3 + gamma_0 [I (A - 1) + C_2 (A + 1)] A^2
//! ```
//!
//! where `C_m` are one-sided Dirichlet-to-Neumann coefficients of the shell
//! profile at `zeta_1 = delta / dr` and `zeta_2 = zeta_1 sqrt((A-1)/(A+1))`.
//! `N_v` is analytic for `|A| > 1` and behaves like `(I + 2 beta D)^2 A^3` at
//! infinity, so the number of unstable roots (a root at infinity included)
//! is `3 - W`, with `W` the winding number of `N_v` around `|A| = 1 + eps`.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::specfun::{PhiProfile, ShellGeometry};
use crate::util::solve_dense;

type C<T> = Complex<T>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityParams<T> {
    pub geom: ShellGeometry<T>,
    pub dr: T,
    pub delta: T,
    pub beta_d: T,
    pub i_bar: T,
}

impl<T: Real> StabilityParams<T> {
    pub fn new(geom: ShellGeometry<T>, dr: T, delta: T, beta_d: T, i_bar: T) -> Result<Self> {
        if !(dr > T::zero()) || !(geom.r1 + T::lit(2.0) * dr < geom.r2) {
            return Err(invalid(format!("need 0 < dr and r1 + 2 dr < r2 (dr = {dr})")));
        }
        if !(delta > T::zero() && delta.is_finite()) {
            return Err(invalid(format!("delta must be positive, got {delta}")));
        }
        if !(beta_d >= T::zero()) || !(i_bar >= T::zero()) {
            return Err(invalid("beta_d and I_bar must be non-negative"));
        }
        Ok(Self { geom, dr, delta, beta_d, i_bar })
    }

    /// Default scan geometry `r1 = 1`, `r2 = 2`, `dr = 0.05`.
    pub fn reference(delta: T, beta_d: T) -> Result<Self> {
        Self::new(ShellGeometry::new(T::one(), T::lit(2.0))?, T::lit(0.05), delta, beta_d, T::zero())
    }

    pub fn with_point(&self, delta: T, beta_d: T) -> Result<Self> {
        Self::new(self.geom, self.dr, delta, beta_d, self.i_bar)
    }

    pub fn zeta1(&self) -> T {
        self.delta / self.dr
    }

    /// Dimensionless added-damping coefficient `1 - e^{-delta}`.
    pub fn d_bar(&self) -> T {
        T::one() - (-self.delta).exp()
    }

    /// True when the body equation has zero inertia (`I = beta_d = 0`).
    pub fn has_root_at_infinity(&self) -> bool {
        self.i_bar == T::zero() && self.beta_d == T::zero()
    }
}

/// `C = (r1/2) (3 phi(r1)/r1 - 4 phi(r1+dr)/(r1+dr) + phi(r1+2dr)/(r1+2dr))`.
pub fn transfer_coefficient<T: Real>(zeta: C<T>, p: &StabilityParams<T>) -> Result<C<T>> {
    let prof = PhiProfile::new(zeta, p.geom)?;
    let r1 = p.geom.r1;
    let (ra, rb) = (r1 + p.dr, r1 + T::lit(2.0) * p.dr);
    let s = prof.eval(r1)? * T::lit(3.0) / r1 - prof.eval(ra)? * T::lit(4.0) / ra + prof.eval(rb)? / rb;
    Ok(s * (T::lit(0.5) * r1))
}

/// `N_v` for one parameter point, with the `A`-independent pieces cached.
#[derive(Debug, Clone, Copy)]
pub struct NvEvaluator<T> {
    pub params: StabilityParams<T>,
    pub c1: T,
    pub gamma_v: T,
    pub gamma_0: T,
}

impl<T: Real> NvEvaluator<T> {
    pub fn new(params: StabilityParams<T>) -> Result<Self> {
        let c1 = transfer_coefficient(C::new(params.zeta1(), T::zero()), &params)?.re;
        let bd = params.beta_d * params.d_bar();
        let gamma_v = (T::lit(2.0) * bd - c1).powi(2);
        let gamma_0 = params.i_bar + T::lit(4.0) * bd - c1;
        Ok(Self { params, c1, gamma_v, gamma_0 })
    }

    pub fn zeta2(&self, a: C<T>) -> Result<C<T>> {
        let one = C::new(T::one(), T::zero());
        if (a + one).norm() == T::zero() {
            return Err(Error::Singular("zeta_2 is singular at A = -1".into()));
        }
        Ok(((a - one) / (a + one)).sqrt() * self.params.zeta1())
    }

    pub fn c2(&self, a: C<T>) -> Result<C<T>> {
        transfer_coefficient(self.zeta2(a)?, &self.params)
    }

    pub fn eval(&self, a: C<T>) -> Result<C<T>> {
        Ok(self.eval_with_scale(a)?.0)
    }

    /// `N_v(A)` together with the sum of the magnitudes of its terms, used as
    /// the reference scale for residual tests.
    pub fn eval_with_scale(&self, a: C<T>) -> Result<(C<T>, T)> {
        let one = C::new(T::one(), T::zero());
        let c2 = self.c2(a)?;
        let am1 = a - one;
        let t1 = am1 * am1 * am1 * self.gamma_v;
        let inner_a = am1 * self.params.i_bar;
        let inner_b = c2 * (a + one);
        let a2 = a * a;
        let t2 = (inner_a + inner_b) * a2 * self.gamma_0;
        let scale = t1.norm() + self.gamma_0.abs() * (inner_a.norm() + inner_b.norm()) * a2.norm();
        Ok((t1 + t2, scale))
    }

    /// Fourth-order central difference of `N_v` with step `1e-5 max(1, |A|)`.
    pub fn derivative(&self, a: C<T>) -> Result<C<T>> {
        let h = T::lit(1e-5) * a.norm().max(T::one());
        let hc = C::new(h, T::zero());
        let f = |k: T| self.eval(a + hc * k);
        let d = (f(T::lit(-2.0))? - f(T::lit(2.0))? + (f(T::one())? - f(-T::one())?) * T::lit(8.0)) / (hc * T::lit(12.0));
        Ok(d)
    }
}

// ---------------------------------------------------------------------------
// Contour tracing

/// Piece of a closed contour in the `A` plane.
#[derive(Debug, Clone, Copy)]
enum Piece<T> {
    Arc { radius: T, th0: T, th1: T },
    Line { a: C<T>, b: C<T> },
}

impl<T: Real> Piece<T> {
    fn at(&self, s: T) -> C<T> {
        match *self {
            Piece::Arc { radius, th0, th1 } => C::from_polar(radius, th0 + (th1 - th0) * s),
            Piece::Line { a, b } => a + (b - a) * s,
        }
    }
}

/// Samples of `N_v` along a closed contour, refined until consecutive values
/// differ in argument by at most `pi/4`.
#[derive(Debug, Clone)]
struct Trace<T> {
    points: Vec<C<T>>,
    values: Vec<C<T>>,
    /// Total change of `arg N_v` divided by `2 pi`.
    turns: T,
}

const MIN_SEGMENTS: usize = 48;
const MAX_DEPTH: usize = 40;

fn trace_contour<T: Real>(ev: &NvEvaluator<T>, pieces: &[Piece<T>]) -> Result<Trace<T>> {
    let limit = T::FRAC_PI_4();
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut total = T::zero();
    for piece in pieces {
        let n0 = MIN_SEGMENTS;
        let mut stack: Vec<(T, C<T>, usize)> = Vec::new();
        let s0 = T::zero();
        let z0 = piece.at(s0);
        let mut cur = (s0, z0, nonzero(ev, z0)?);
        points.push(cur.1);
        values.push(cur.2);
        for k in (1..=n0).rev() {
            let s = T::of_usize(k) / T::of_usize(n0);
            let z = piece.at(s);
            stack.push((s, z, 0));
        }
        // Each stack entry is the right end of a segment starting at `cur`.
        let mut cache: Vec<(T, C<T>, C<T>)> = Vec::new();
        while let Some((s1, z1, depth)) = stack.pop() {
            let f1 = match cache.iter().position(|c| c.0 == s1) {
                Some(i) => cache.swap_remove(i).2,
                None => nonzero(ev, z1)?,
            };
            let d = (f1 / cur.2).arg();
            if d.abs() > limit {
                if depth >= MAX_DEPTH {
                    return Err(Error::ContourThroughZero(format!("near A = {z1}")));
                }
                let sm = T::lit(0.5) * (cur.0 + s1);
                cache.push((s1, z1, f1));
                stack.push((s1, z1, depth + 1));
                stack.push((sm, piece.at(sm), depth + 1));
                continue;
            }
            total += d;
            cur = (s1, z1, f1);
            points.push(z1);
            values.push(f1);
        }
        // Drop the duplicated end point; the next piece starts there.
        points.pop();
        values.pop();
    }
    Ok(Trace { points, values, turns: total / T::TAU() })
}

fn nonzero<T: Real>(ev: &NvEvaluator<T>, z: C<T>) -> Result<C<T>> {
    let (v, scale) = ev.eval_with_scale(z)?;
    if !(v.norm() > T::lit(1e-14) * scale) || !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::ContourThroughZero(format!("N_v vanishes at A = {z}")));
    }
    Ok(v)
}

fn circle<T: Real>(radius: T) -> [Piece<T>; 1] {
    // Start off the real axis so no sample lands on a real root.
    let th0 = T::lit(0.0917);
    [Piece::Arc { radius, th0, th1: th0 + T::TAU() }]
}

fn round_turns<T: Real>(turns: T) -> i64 {
    turns.round().to_i64().unwrap_or(i64::MAX)
}

/// Winding number of `N_v` around the circle `|A| = radius`.
pub fn winding_number<T: Real>(ev: &NvEvaluator<T>, radius: T) -> Result<i64> {
    Ok(round_turns(trace_contour(ev, &circle(radius))?.turns))
}

/// Options for root counting and location.
#[derive(Debug, Clone, Copy)]
pub struct RootOptions<T> {
    /// Inner contour radius is `1 + eps`.
    pub eps: T,
    /// First outer radius tried when enclosing all finite roots.
    pub r_outer: T,
    /// Relative residual for Newton polishing.
    pub newton_tol: T,
    pub max_depth: usize,
}

impl<T: Real> Default for RootOptions<T> {
    fn default() -> Self {
        Self { eps: T::lit(1e-3), r_outer: T::lit(10.0), newton_tol: T::lit(1e-12), max_depth: 48 }
    }
}

const JITTERS: [f64; 6] = [1.0, 1.37, 0.71, 1.93, 0.53, 2.71];

fn inner_winding<T: Real>(ev: &NvEvaluator<T>, eps: T) -> Result<(i64, T)> {
    let mut last = None;
    for j in JITTERS {
        let r = T::one() + eps * T::lit(j);
        match winding_number(ev, r) {
            Ok(w) => return Ok((w, r)),
            Err(e @ Error::ContourThroughZero(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// Number of roots of `N_v` with `|A| > 1 + eps`, a root at infinity included.
pub fn count_unstable_roots<T: Real>(p: &StabilityParams<T>, eps: T) -> Result<usize> {
    let ev = NvEvaluator::new(*p)?;
    let (w, _) = inner_winding(&ev, eps)?;
    if !(0..=3).contains(&w) {
        return Err(Error::NoConvergence(format!("winding number {w} outside [0, 3]")));
    }
    Ok((3 - w) as usize)
}

/// Number of roots in the annulus `1 + eps < |A| < r_outer`.
pub fn count_in_annulus<T: Real>(p: &StabilityParams<T>, eps: T, r_outer: T) -> Result<usize> {
    let ev = NvEvaluator::new(*p)?;
    let (w_in, r_in) = inner_winding(&ev, eps)?;
    if !(r_outer > r_in) {
        return Err(invalid("outer radius must exceed 1 + eps"));
    }
    let w_out = winding_number(&ev, r_outer)?;
    usize::try_from(w_out - w_in).map_err(|_| Error::NoConvergence("negative annulus count".into()))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StabilityVerdict<T> {
    pub unstable_root_count: usize,
    /// Finite roots with `|A| > 1`.
    pub roots: Vec<C<T>>,
    /// Largest root modulus, `1` when stable and infinite with a root at infinity.
    pub max_modulus: T,
    pub root_at_infinity: bool,
}

impl<T: Real> StabilityVerdict<T> {
    pub fn is_stable(&self) -> bool {
        self.unstable_root_count == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell<T> {
    r0: T,
    r1: T,
    th0: T,
    th1: T,
}

impl<T: Real> Cell<T> {
    fn pieces(&self) -> [Piece<T>; 4] {
        let p = |r: T, th: T| C::from_polar(r, th);
        [
            Piece::Arc { radius: self.r1, th0: self.th0, th1: self.th1 },
            Piece::Line { a: p(self.r1, self.th1), b: p(self.r0, self.th1) },
            Piece::Arc { radius: self.r0, th0: self.th1, th1: self.th0 },
            Piece::Line { a: p(self.r0, self.th0), b: p(self.r1, self.th0) },
        ]
    }

    fn contains(&self, z: C<T>, slack: T) -> bool {
        let r = z.norm();
        let mut th = z.arg();
        while th < self.th0 {
            th += T::TAU();
        }
        while th >= self.th0 + T::TAU() {
            th -= T::TAU();
        }
        let dth = (self.th1 - self.th0) * slack;
        let dr = (self.r1 - self.r0) * slack;
        let radial = r >= self.r0 - dr && r <= self.r1 + dr;
        radial && (th <= self.th1 + dth || th >= self.th0 + T::TAU() - dth)
    }

    fn split(&self, frac: T) -> [Cell<T>; 2] {
        let arc = (self.th1 - self.th0) * T::lit(0.5) * (self.r0 + self.r1);
        if arc >= self.r1 - self.r0 {
            let th = self.th0 + (self.th1 - self.th0) * frac;
            [Cell { th1: th, ..*self }, Cell { th0: th, ..*self }]
        } else {
            let r = self.r0 * (self.r1 / self.r0).powf(frac);
            [Cell { r1: r, ..*self }, Cell { r0: r, ..*self }]
        }
    }

    fn describe(&self) -> String {
        format!("r in [{}, {}], theta in [{}, {}]", self.r0, self.r1, self.th0, self.th1)
    }
}

/// Mean of the roots enclosed by a traced contour, from
/// `(1/2 pi i) \oint A dlog N = W A_0 - (1/2 pi i) \oint log N dA`.
fn root_mean<T: Real>(trace: &Trace<T>, w: i64) -> C<T> {
    let n = trace.points.len();
    let two_pi_i = C::new(T::zero(), T::TAU());
    let mut log = C::new(trace.values[0].norm().ln(), trace.values[0].arg());
    let mut acc = C::new(T::zero(), T::zero());
    for k in 0..n {
        let j = (k + 1) % n;
        let ratio = trace.values[j] / trace.values[k];
        let next = log + C::new(ratio.norm().ln(), ratio.arg());
        acc += (log + next) * T::lit(0.5) * (trace.points[j] - trace.points[k]);
        log = next;
    }
    let wt = T::of_usize(w as usize);
    (trace.points[0] * wt - acc / two_pi_i) / wt
}

fn newton<T: Real>(ev: &NvEvaluator<T>, mut a: C<T>, tol: T) -> Result<C<T>> {
    for _ in 0..80 {
        let (v, scale) = ev.eval_with_scale(a)?;
        if v.norm() <= tol * scale {
            return Ok(a);
        }
        let d = ev.derivative(a)?;
        if d.norm() == T::zero() {
            break;
        }
        let step = v / d;
        a -= step;
        if step.norm() <= T::lit(4.0) * T::epsilon() * a.norm() {
            return Ok(a);
        }
    }
    Err(Error::NoConvergence(format!("Newton polish stalled near A = {a}")))
}

fn locate<T: Real>(ev: &NvEvaluator<T>, cell: Cell<T>, opts: &RootOptions<T>, depth: usize, out: &mut Vec<C<T>>) -> Result<()> {
    let trace = trace_contour(ev, &cell.pieces())?;
    let w = round_turns(trace.turns);
    if w == 0 {
        return Ok(());
    }
    if w < 0 {
        return Err(Error::NoConvergence(format!("negative winding in cell {}", cell.describe())));
    }
    let tiny = (cell.r1 - cell.r0) <= T::lit(1e-10) * cell.r1;
    if w == 1 || tiny {
        let guess = root_mean(&trace, w);
        let polished = newton(ev, guess, opts.newton_tol)
            .ok()
            .filter(|z| cell.contains(*z, T::lit(1e-6)));
        if let Some(z) = polished {
            for _ in 0..w {
                out.push(z);
            }
            return Ok(());
        }
        if tiny {
            return Err(Error::MaxDepthExceeded(cell.describe()));
        }
    }
    if depth >= opts.max_depth {
        return Err(Error::MaxDepthExceeded(cell.describe()));
    }
    let mut last = None;
    for j in JITTERS {
        let frac = T::lit(0.5 + 0.0371 * (j - 1.0));
        let [a, b] = cell.split(frac);
        let mut found = Vec::new();
        let res = locate(ev, a, opts, depth + 1, &mut found).and_then(|_| locate(ev, b, opts, depth + 1, &mut found));
        match res {
            Ok(()) => {
                out.extend(found);
                return Ok(());
            }
            Err(e @ Error::ContourThroughZero(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap())
}

/// Restores exact conjugate symmetry of a polished root list.
fn symmetrize<T: Real>(roots: &mut Vec<C<T>>) {
    for z in roots.iter_mut() {
        if z.im.abs() <= T::lit(1e-10) * z.norm() {
            z.im = T::zero();
        }
    }
    let mut upper: Vec<C<T>> = roots.iter().copied().filter(|z| z.im > T::zero()).collect();
    let real: Vec<C<T>> = roots.iter().copied().filter(|z| z.im == T::zero()).collect();
    let lower: Vec<C<T>> = roots.iter().copied().filter(|z| z.im < T::zero()).collect();
    // Average each upper root with the nearest conjugated lower root.
    let mut used = vec![false; lower.len()];
    for u in upper.iter_mut() {
        let best = lower
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|a, b| (a.1.conj() - *u).norm().partial_cmp(&(b.1.conj() - *u).norm()).unwrap());
        if let Some((i, l)) = best {
            used[i] = true;
            *u = (*u + l.conj()) * T::lit(0.5);
        }
    }
    let mut out = real;
    for u in upper {
        out.push(u);
        out.push(u.conj());
    }
    out.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
    *roots = out;
}

/// Locates every finite root with `|A| > 1 + eps` by recursive subdivision of
/// an annulus whose outer radius grows until all finite roots are enclosed.
pub fn find_roots_outside<T: Real>(p: &StabilityParams<T>, opts: &RootOptions<T>) -> Result<StabilityVerdict<T>> {
    let ev = NvEvaluator::new(*p)?;
    let (w_in, r_in) = inner_winding(&ev, opts.eps)?;
    let total = 3 - w_in;
    let at_inf = p.has_root_at_infinity();
    let finite_target = if at_inf { total - 1 } else { total };
    if finite_target < 0 {
        return Err(Error::NoConvergence(format!("winding number {w_in} inconsistent with the growth at infinity")));
    }
    let mut roots = Vec::new();
    if finite_target > 0 {
        let mut r_out = opts.r_outer.max(r_in * T::lit(2.0));
        loop {
            let w = winding_number(&ev, r_out)?;
            if w - w_in >= finite_target {
                break;
            }
            r_out *= T::lit(10.0);
            if r_out > T::lit(1e15) {
                return Err(Error::NoConvergence("outer contour radius exceeded 1e15".into()));
            }
        }
        let sectors = 8;
        let off = T::lit(0.0917);
        let width = T::TAU() / T::of_usize(sectors);
        for k in 0..sectors {
            let th0 = off + width * T::of_usize(k);
            let cell = Cell { r0: r_in, r1: r_out, th0, th1: th0 + width };
            locate(&ev, cell, opts, 0, &mut roots)?;
        }
        symmetrize(&mut roots);
    }
    let count = roots.len() + usize::from(at_inf);
    if count as i64 != total {
        return Err(Error::NoConvergence(format!("located {count} roots but the winding number predicts {total}")));
    }
    let max_modulus = if at_inf {
        T::infinity()
    } else {
        roots.iter().fold(T::one(), |m, z| m.max(z.norm()))
    };
    Ok(StabilityVerdict { unstable_root_count: count, roots, max_modulus, root_at_infinity: at_inf })
}

// ---------------------------------------------------------------------------
// Region scans

#[derive(Debug, Clone, serde::Serialize)]
pub struct MapCell<T> {
    pub delta: T,
    pub beta_d: T,
    pub verdict: std::result::Result<StabilityVerdict<T>, String>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityMap<T> {
    pub i_bar: T,
    pub deltas: Vec<T>,
    pub betas: Vec<T>,
    /// Row-major in `beta`, then `delta`.
    pub cells: Vec<MapCell<T>>,
}

impl<T: Real> StabilityMap<T> {
    pub fn cell(&self, i_delta: usize, i_beta: usize) -> &MapCell<T> {
        &self.cells[i_beta * self.deltas.len() + i_delta]
    }
}

fn strictly_increasing<T: Real>(v: &[T]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[1] > w[0])
}

/// Classifies every `(delta, beta_d)` pair; per-cell failures are recorded
/// and the scan continues. Cells run on the current rayon pool.
pub fn scan_region<T: Real>(deltas: &[T], betas: &[T], i_bar: T, base: &StabilityParams<T>, opts: &RootOptions<T>) -> Result<StabilityMap<T>> {
    if !strictly_increasing(deltas) || !strictly_increasing(betas) {
        return Err(invalid("scan grids must be non-empty and strictly increasing"));
    }
    let pairs: Vec<(T, T)> = betas.iter().flat_map(|&b| deltas.iter().map(move |&d| (d, b))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(delta, beta_d)| {
            let verdict = StabilityParams::new(base.geom, base.dr, delta, beta_d, i_bar)
                .and_then(|p| find_roots_outside(&p, opts))
                .map_err(|e| e.to_string());
            MapCell { delta, beta_d, verdict }
        })
        .collect();
    Ok(StabilityMap { i_bar, deltas: deltas.to_vec(), betas: betas.to_vec(), cells })
}

// ---------------------------------------------------------------------------
// Boundary continuation

/// Point on a stability boundary: `N_v(e^{i theta}) = 0` at `(delta, beta_d)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundaryPoint<T> {
    pub delta: T,
    pub beta_d: T,
    pub theta: T,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions<T> {
    pub step: T,
    pub min_step: T,
    pub max_step: T,
    pub max_points: usize,
    pub delta_min: T,
    pub delta_max: T,
    /// `+1` follows increasing `delta` initially, `-1` decreasing.
    pub direction: T,
    /// Relative residual `|N_v| / scale` accepted on the curve.
    pub tol: T,
}

impl<T: Real> Default for TraceOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(0.05),
            min_step: T::lit(1e-6),
            max_step: T::lit(0.25),
            max_points: 400,
            delta_min: T::lit(1e-2),
            delta_max: T::lit(1e2),
            direction: T::one(),
            tol: T::lit(1e-10),
        }
    }
}

struct Curve<T> {
    base: StabilityParams<T>,
}

impl<T: Real> Curve<T> {
    /// Residual at `u = (theta, ln delta, beta)`, scaled by the term magnitudes.
    fn eval(&self, u: [T; 3]) -> Result<([T; 2], T)> {
        let p = self.base.with_point(u[1].exp(), u[2])?;
        let ev = NvEvaluator::new(p)?;
        let (v, scale) = ev.eval_with_scale(C::from_polar(T::one(), u[0]))?;
        Ok(([v.re, v.im], scale))
    }

    fn jacobian(&self, u: [T; 3]) -> Result<[[T; 3]; 2]> {
        let mut j = [[T::zero(); 3]; 2];
        for k in 0..3 {
            let h = T::lit(1e-6) * u[k].abs().max(T::one());
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let (fp, _) = self.eval(up)?;
            let (fm, _) = self.eval(dn)?;
            for i in 0..2 {
                j[i][k] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Ok(j)
    }

    fn tangent(&self, u: [T; 3]) -> Result<[T; 3]> {
        let j = self.jacobian(u)?;
        let t = [
            j[0][1] * j[1][2] - j[0][2] * j[1][1],
            j[0][2] * j[1][0] - j[0][0] * j[1][2],
            j[0][0] * j[1][1] - j[0][1] * j[1][0],
        ];
        let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        if !(n > T::zero()) {
            return Err(Error::Continuation("degenerate tangent".into()));
        }
        Ok([t[0] / n, t[1] / n, t[2] / n])
    }

    /// Newton on `F(u) = 0`, `t . (u - u_pred) = 0`; returns the iteration count.
    fn correct(&self, mut u: [T; 3], t: [T; 3], tol: T) -> Result<([T; 3], usize)> {
        let pred = u;
        for it in 0..12 {
            let (f, scale) = self.eval(u)?;
            let arc = t[0] * (u[0] - pred[0]) + t[1] * (u[1] - pred[1]) + t[2] * (u[2] - pred[2]);
            if (f[0] * f[0] + f[1] * f[1]).sqrt() <= tol * scale && arc.abs() < T::lit(1e-12) {
                return Ok((u, it));
            }
            let j = self.jacobian(u)?;
            let m = [j[0], j[1], t];
            let d = solve_dense(m, [-f[0], -f[1], -arc], "continuation corrector")?;
            for k in 0..3 {
                u[k] += d[k];
            }
        }
        Err(Error::Continuation("corrector did not converge".into()))
    }
}

/// Locates a boundary point at fixed `delta` between a stable and an unstable
/// `beta_d` by bisection on the verdict, then refines `(theta, beta_d)` on
/// `N_v(e^{i theta}) = 0`.
pub fn locate_boundary<T: Real>(base: &StabilityParams<T>, delta: T, beta_a: T, beta_b: T) -> Result<BoundaryPoint<T>> {
    let eps = T::lit(1e-6);
    let stable = |b: T| -> Result<bool> { Ok(count_unstable_roots(&base.with_point(delta, b)?, eps)? == 0) };
    let (mut lo, mut hi) = (beta_a, beta_b);
    let s_lo = stable(lo)?;
    if s_lo == stable(hi)? {
        return Err(Error::Continuation(format!("no stability change between beta_d = {lo} and {hi}")));
    }
    for _ in 0..60 {
        let mid = T::lit(0.5) * (lo + hi);
        if stable(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < T::lit(1e-9) {
            break;
        }
    }
    let unstable_beta = if s_lo { hi } else { lo };
    let v = find_roots_outside(&base.with_point(delta, unstable_beta)?, &RootOptions { eps, ..RootOptions::default() })?;
    let crossing = v
        .roots
        .iter()
        .copied()
        .filter(|z| z.im >= T::zero())
        .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .ok_or_else(|| Error::Continuation("no finite root near the unit circle".into()))?;
    let curve = Curve { base: *base };
    let x = delta.ln();
    let mut th = crossing.arg();
    let mut beta = T::lit(0.5) * (lo + hi);
    for _ in 0..30 {
        let (f, scale) = curve.eval([th, x, beta])?;
        if (f[0] * f[0] + f[1] * f[1]).sqrt() <= T::lit(1e-12) * scale {
            return Ok(BoundaryPoint { delta, beta_d: beta, theta: th });
        }
        let j = curve.jacobian([th, x, beta])?;
        let d = solve_dense([[j[0][0], j[0][2]], [j[1][0], j[1][2]]], [-f[0], -f[1]], "boundary refinement")?;
        th += d[0];
        beta += d[1];
    }
    Err(Error::Continuation(format!("could not refine boundary point at delta = {delta}")))
}

/// Pseudo-arclength continuation of a boundary curve in `(theta, ln delta, beta_d)`.
pub fn trace_boundary<T: Real>(base: &StabilityParams<T>, start: BoundaryPoint<T>, opts: &TraceOptions<T>) -> Result<Vec<BoundaryPoint<T>>> {
    let curve = Curve { base: *base };
    let mut u = [start.theta, start.delta.ln(), start.beta_d];
    let (mut u0, _) = curve.correct(u, curve.tangent(u)?, opts.tol).unwrap_or((u, 0));
    u = u0;
    let mut t = curve.tangent(u)?;
    if t[1] * opts.direction < T::zero() {
        t = [-t[0], -t[1], -t[2]];
    }
    let to_point = |u: [T; 3]| BoundaryPoint { delta: u[1].exp(), beta_d: u[2], theta: u[0] };
    let mut out = vec![to_point(u)];
    let mut h = opts.step;
    let (lx, hx) = (opts.delta_min.ln(), opts.delta_max.ln());
    while out.len() < opts.max_points {
        let pred = [u[0] + h * t[0], u[1] + h * t[1], u[2] + h * t[2]];
        match curve.correct(pred, t, opts.tol) {
            Ok((next, iters)) => {
                if next[1] < lx || next[1] > hx || next[2] < T::zero() || next[0] <= T::zero() || next[0] >= T::PI() {
                    break;
                }
                let mut tn = curve.tangent(next)?;
                if tn[0] * t[0] + tn[1] * t[1] + tn[2] * t[2] < T::zero() {
                    tn = [-tn[0], -tn[1], -tn[2]];
                }
                u0 = u;
                u = next;
                t = tn;
                out.push(to_point(u));
                if iters <= 3 {
                    h = (h * T::lit(1.5)).min(opts.max_step);
                }
            }
            Err(_) => {
                h *= T::lit(0.5);
                if h < opts.min_step {
                    return Err(Error::Continuation(format!("step size underflow after {} points near {:?}", out.len(), to_point(u))));
                }
            }
        }
    }
    let _ = u0;
    Ok(out)
}
