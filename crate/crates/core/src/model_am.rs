//! Added-mass model problem: an inviscid spherical shell of fluid around a
//! translating rigid sphere.
//!
//! All fields are the radial profiles multiplying the angular factors
//! `cos(theta)` (pressure, radial velocity) and `sin(theta)` (polar velocity).

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::specfun::ShellGeometry;
use crate::util::solve_dense;

/// Added mass of a sphere of radius `r1` inside a rigid shell of radius `r2`.
pub fn added_mass<T: Real>(geom: &ShellGeometry<T>, rho: T) -> T {
    let x3 = (geom.r1 / geom.r2).powi(3);
    let two = T::lit(2.0);
    T::lit(4.0 / 3.0) * rho * T::PI() * geom.r1.powi(3) * (T::one() + two * x3) / (two - two * x3)
}

/// True iff the total inertia `m_b + M_a` reaches the threshold `k`.
pub fn is_wellposed<T: Real>(m_b: T, m_a: T, k: T) -> bool {
    m_b + m_a >= k
}

/// External force `f_e(t)`.
pub type Forcing<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Composite trapezoid with interval halving until two successive levels
/// agree to `tol` (relative to the integral magnitude, absolute near zero).
pub fn adaptive_trapezoid<T: Real>(f: &dyn Fn(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let half = T::lit(0.5);
    let mut n = 1usize;
    let mut h = b - a;
    let mut est = half * h * (f(a) + f(b));
    for _ in 0..24 {
        let mut mid = T::zero();
        for k in 0..n {
            mid += f(a + h * (T::of_usize(k) + half));
        }
        let next = half * est + half * h * mid;
        n *= 2;
        h *= half;
        if n >= 16 && (next - est).abs() <= tol * next.abs().max(T::one()) {
            return Ok(next);
        }
        est = next;
    }
    Err(Error::NoConvergence(format!("trapezoid did not reach tol {tol} with {n} panels")))
}

#[derive(Clone)]
pub struct AmProblem<T> {
    pub geom: ShellGeometry<T>,
    pub rho: T,
    pub m_b: T,
    pub w_b0: T,
    pub f_e: Forcing<T>,
    /// Well-posedness threshold on `m_b + M_a`.
    pub k: T,
    /// Tolerance for the time integral of `f_e`.
    pub quad_tol: T,
}

impl<T: Real> fmt::Debug for AmProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AmProblem")
            .field("geom", &self.geom)
            .field("rho", &self.rho)
            .field("m_b", &self.m_b)
            .field("w_b0", &self.w_b0)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl<T: Real> AmProblem<T> {
    /// `K` defaults to `1e-12 (m_b + M_a)`.
    pub fn new(geom: ShellGeometry<T>, rho: T, m_b: T, w_b0: T, f_e: Forcing<T>) -> Result<Self> {
        if !(rho > T::zero()) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        if !(m_b >= T::zero()) {
            return Err(invalid(format!("m_b must be non-negative, got {m_b}")));
        }
        let k = T::lit(1e-12) * (m_b + added_mass(&geom, rho));
        Ok(Self { geom, rho, m_b, w_b0, f_e, k, quad_tol: T::lit(1e-10) })
    }

    pub fn with_threshold(mut self, k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return Err(invalid("K must be positive"));
        }
        self.k = k;
        Ok(self)
    }

    pub fn added_mass(&self) -> T {
        added_mass(&self.geom, self.rho)
    }

    fn total_mass(&self) -> Result<T> {
        let total = self.m_b + self.added_mass();
        if !is_wellposed(self.m_b, self.added_mass(), self.k) {
            return Err(Error::IllPosed { total: total.to_f64_lossy(), threshold: self.k.to_f64_lossy() });
        }
        Ok(total)
    }

    pub fn exact_state(&self, t: T) -> Result<AmExactState<T>> {
        let total = self.total_mass()?;
        let f = self.f_e.clone();
        let impulse = adaptive_trapezoid(&|s| f(s), T::zero(), t, self.quad_tol)?;
        Ok(AmExactState {
            t,
            w_b: impulse / total + self.w_b0,
            a_w: (self.f_e)(t) / total,
            geom: self.geom,
            rho: self.rho,
        })
    }

    /// Pressure/acceleration solve of the AMP predictor for the force `f_e_np1`.
    pub fn solve_amp_pressure_bvp(&self, f_e_np1: T) -> Result<AmpPressure<T>> {
        self.total_mass()?;
        let (r1, r2) = (self.geom.r1, self.geom.r2);
        let two = T::lit(2.0);
        // Unknowns (c1, c2, a) for p = c1 r + c2 / r^2:
        //   p'(r1) + rho a = 0
        //   m_b a + (4 pi r1^2 / 3) p(r1) = f
        //   p'(r2) = 0
        let s = T::lit(4.0 / 3.0) * T::PI() * r1 * r1;
        let m = [
            [T::one(), -two / r1.powi(3), self.rho],
            [s * r1, s / (r1 * r1), self.m_b],
            [T::one(), -two / r2.powi(3), T::zero()],
        ];
        let x = solve_dense(m, [T::zero(), f_e_np1, T::zero()], "added-mass pressure system")?;
        Ok(AmpPressure { c1: x[0], c2: x[1], a_w: x[2] })
    }
}

/// Closed-form state at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct AmExactState<T> {
    pub t: T,
    pub w_b: T,
    pub a_w: T,
    geom: ShellGeometry<T>,
    rho: T,
}

impl<T: Real> AmExactState<T> {
    pub fn p_hat(&self, r: T) -> T {
        let (r1, r2) = (self.geom.r1, self.geom.r2);
        let denom = (r2 / r1).powi(2) - r1 / r2;
        self.rho * r1 * self.a_w / denom * (r / r2 + r2 * r2 / (T::lit(2.0) * r * r))
    }

    pub fn u_hat(&self, r: T) -> T {
        let (r1, r2) = (self.geom.r1, self.geom.r2);
        let r2_3 = r2.powi(3);
        (r2_3 - r.powi(3)) / (r2_3 - r1.powi(3)) * (r1 / r).powi(3) * self.w_b
    }

    pub fn v_hat(&self, r: T) -> T {
        let (r1, r2) = (self.geom.r1, self.geom.r2);
        let two = T::lit(2.0);
        (two * r.powi(3) + r2.powi(3)) / (two * r1.powi(3) - two * r2.powi(3)) * (r1 / r).powi(3) * self.w_b
    }
}

/// Pressure `c1 r + c2 / r^2` and body acceleration from the AMP solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpPressure<T> {
    pub c1: T,
    pub c2: T,
    pub a_w: T,
}

impl<T: Real> AmpPressure<T> {
    pub fn p_hat(&self, r: T) -> T {
        self.c1 * r + self.c2 / (r * r)
    }

    pub fn dp_dr(&self, r: T) -> T {
        self.c1 - T::lit(2.0) * self.c2 / r.powi(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn shell() -> ShellGeometry<f64> {
        ShellGeometry::new(1.0, 2.0).unwrap()
    }

    fn constant(v: f64) -> Forcing<f64> {
        Arc::new(move |_| v)
    }

    #[test]
    fn added_mass_values() {
        assert_relative_eq!(added_mass(&shell(), 1.0), 4.0 * PI / 3.0 * 5.0 / 7.0, max_relative = 1e-14);
        assert_eq!(added_mass(&shell(), 0.0), 0.0);
        let far = ShellGeometry::new(1.0, 1e4).unwrap();
        assert_relative_eq!(added_mass(&far, 1.0), 2.0 * PI / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn added_mass_decreases_with_outer_radius() {
        let mut last = f64::INFINITY;
        for &r2 in &[1.01, 1.1, 1.5, 2.0, 5.0, 50.0] {
            let m = added_mass(&ShellGeometry::new(1.0, r2).unwrap(), 1.0);
            assert!(m > 0.0 && m < last);
            last = m;
        }
        assert!(added_mass(&ShellGeometry::new(1.0, 1.0 + 1e-9).unwrap(), 1.0) > 1e8);
    }

    #[test]
    fn wellposed_predicate() {
        assert!(is_wellposed(0.0, 2.0944, 1e-6));
        assert!(!is_wellposed(0.0, 0.0, 1e-6));
        assert!(is_wellposed(1e-7, added_mass(&shell(), 1.0), 1.0));
    }

    #[test]
    fn unit_force_massless_body() {
        let p = AmProblem::new(shell(), 1.0, 0.0, 0.0, constant(1.0)).unwrap();
        let s = p.exact_state(1.0).unwrap();
        assert_relative_eq!(s.w_b, 1.0 / (4.0 * PI / 3.0 * 5.0 / 7.0), max_relative = 1e-10);
        assert_relative_eq!(s.w_b, 0.33423, max_relative = 1e-4);
        let bvp = p.solve_amp_pressure_bvp(1.0).unwrap();
        assert_relative_eq!(bvp.a_w, s.a_w, max_relative = 1e-12);
        assert_relative_eq!(bvp.p_hat(1.0), s.p_hat(1.0), max_relative = 1e-12);
        assert!(bvp.dp_dr(2.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_problem_is_zero() {
        let p = AmProblem::new(shell(), 1.0, 0.5, 0.0, constant(0.0)).unwrap();
        let s = p.exact_state(3.0).unwrap();
        for &r in &[1.0, 1.3, 2.0] {
            assert_eq!(s.p_hat(r), 0.0);
            assert_eq!(s.u_hat(r), 0.0);
            assert_eq!(s.v_hat(r), 0.0);
        }
        let b = p.solve_amp_pressure_bvp(0.0).unwrap();
        assert_eq!((b.c1, b.c2, b.a_w), (0.0, 0.0, 0.0));
    }

    #[test]
    fn velocity_boundary_values() {
        let p = AmProblem::new(shell(), 1.3, 0.2, 0.7, Arc::new(|t: f64| t.cos())).unwrap();
        let s = p.exact_state(0.4).unwrap();
        assert_relative_eq!(s.u_hat(1.0), s.w_b, max_relative = 1e-15);
        assert_eq!(s.u_hat(2.0), 0.0);
    }

    #[test]
    fn momentum_balance_polar() {
        // rho dv/dt + p / r = 0 with dv/dt = a_w dv/dw_b.
        let p = AmProblem::new(shell(), 1.7, 0.3, 0.0, Arc::new(|t: f64| t.sin())).unwrap();
        let s = p.exact_state(0.9).unwrap();
        let unit = AmExactState { w_b: 1.0, ..s };
        for &r in &[1.0, 1.25, 1.5, 2.0] {
            let res = p.rho * s.a_w * unit.v_hat(r) + s.p_hat(r) / r;
            assert!(res.abs() < 1e-13 * s.p_hat(r).abs().max(1.0), "r = {r}: {res}");
        }
    }

    #[test]
    fn continuity_second_order() {
        let p = AmProblem::new(shell(), 1.0, 0.0, 1.0, constant(0.0)).unwrap();
        let s = p.exact_state(0.0).unwrap();
        let r = 1.4;
        let res = |h: f64| {
            let flux = |x: f64| x * x * s.u_hat(x);
            (flux(r + h) - flux(r - h)) / (2.0 * h) / (r * r) - 2.0 * s.v_hat(r) / r
        };
        let (e1, e2) = (res(1e-2).abs(), res(5e-3).abs());
        assert!(e1 < 1e-3);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn ill_posed_detected() {
        let p = AmProblem::new(shell(), 1.0, 0.0, 0.0, constant(1.0)).unwrap().with_threshold(10.0).unwrap();
        assert!(matches!(p.exact_state(1.0), Err(Error::IllPosed { .. })));
        assert!(matches!(p.solve_amp_pressure_bvp(1.0), Err(Error::IllPosed { .. })));
        assert!(AmProblem::new(shell(), 0.0, 0.0, 0.0, constant(1.0)).is_err());
    }

    #[test]
    fn trapezoid_quadrature() {
        let v = adaptive_trapezoid(&|t: f64| t.sin(), 0.0, PI, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-10);
        assert_eq!(adaptive_trapezoid(&|t: f64| t, 1.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn fixed_trapezoid_converges_second_order() {
        let exact = 1.0 - 2f64.cos();
        let trap = |n: usize| {
            let h = 2.0 / n as f64;
            (0..=n).map(|k| if k == 0 || k == n { 0.5 } else { 1.0 } * (k as f64 * h).sin()).sum::<f64>() * h
        };
        let e: Vec<f64> = [20, 40, 80].iter().map(|&n| (trap(n) - exact).abs()).collect();
        assert!(((e[0] / e[1]).log2() - 2.0).abs() < 0.05);
        assert!(((e[1] / e[2]).log2() - 2.0).abs() < 0.05);
    }
}
