//! Rigid piston pushing a column of inviscid fluid along a channel.
//!
//! The fluid occupies `x_I(t) < x < L` in a channel of cross-section `H x W`
//! and moves with the body, so its whole effect is an added mass
//! `rho H W (L - x_I)`. The interface follows `x_I(t) = alpha sin(2 pi t)`
//! and the pressure `p_L(t)` at the channel end is the input that drives it.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::model_am::Forcing;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PistonParams<T> {
    pub rho: T,
    pub h: T,
    pub w: T,
    /// Channel end.
    pub l: T,
    /// Body length.
    pub l_b: T,
    pub rho_b: T,
    /// Amplitude of the interface motion.
    pub alpha_b: T,
}

impl<T: Real> Default for PistonParams<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            h: T::one(),
            w: T::one(),
            l: T::lit(1.5),
            l_b: T::one(),
            rho_b: T::one(),
            alpha_b: T::lit(0.25),
        }
    }
}

impl<T: Real> PistonParams<T> {
    pub fn with_density(self, rho_b: T) -> Self {
        Self { rho_b, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.rho, self.h, self.w, self.l_b];
        if pos.iter().any(|x| !(*x > T::zero())) || !(self.rho_b >= T::zero()) || !(self.alpha_b >= T::zero()) {
            return Err(invalid("piston needs rho, H, W, L_b > 0 and rho_b, alpha_b >= 0"));
        }
        if !(self.alpha_b < self.l) {
            return Err(invalid("fluid column must stay open: need alpha_b < L"));
        }
        Ok(())
    }

    pub fn area(&self) -> T {
        self.h * self.w
    }

    pub fn body_mass(&self) -> T {
        self.rho_b * self.l_b * self.area()
    }
}

/// Added mass `rho H W (L - x_I)` of the fluid column.
pub fn piston_added_mass<T: Real>(x_i: T, p: &PistonParams<T>) -> Result<T> {
    if !(x_i < p.l) {
        return Err(Error::Domain(format!("interface {x_i} at or beyond channel end {}", p.l)));
    }
    Ok(p.rho * p.area() * (p.l - x_i))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PistonState<T> {
    pub t: T,
    /// Body displacement, equal to the interface position `x_I`.
    pub x_b: T,
    pub v_b: T,
    pub a_b: T,
    /// Pressure at the channel end.
    pub p_l: T,
    /// Pressure on the body face.
    pub p_i: T,
}

impl<T: Real> PistonState<T> {
    /// Pressure at `x` in the column, linear from `p(x_I)` to `p_L`.
    pub fn pressure(&self, x: T, p: &PistonParams<T>) -> T {
        self.p_l + p.rho * self.a_b * (p.l - x)
    }
}

/// Prescribed motion and the end pressure that produces it.
pub fn exact_state<T: Real>(t: T, p: &PistonParams<T>) -> PistonState<T> {
    let om = T::lit(2.0) * T::PI();
    let (s, c) = (om * t).sin_cos();
    let x = p.alpha_b * s;
    let v = p.alpha_b * om * c;
    let a = -p.alpha_b * om * om * s;
    let m_a = p.rho * p.area() * (p.l - x);
    let m_b = p.body_mass();
    let p_l = -(m_b + m_a) * a / p.area();
    let p_i = p_l + p.rho * a * (p.l - x);
    PistonState { t, x_b: x, v_b: v, a_b: a, p_l, p_i }
}

/// End pressure of the exact solution.
pub fn exact_end_pressure<T: Real>(p: PistonParams<T>) -> Forcing<T> {
    Arc::new(move |t| exact_state(t, &p).p_l)
}

/// Body state plus the previous acceleration used for extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PistonHistory<T> {
    pub state: PistonState<T>,
    pub a_prev: T,
}

/// Predictor-corrector for the piston driven by a given end pressure.
///
/// Predictor: extrapolate the acceleration linearly to predict the new
/// position, solve `(m_b + M_a) a = -H W p_L` there, and update velocity and
/// position with the trapezoidal rule. Corrector: re-solve for `a` at the
/// predicted position and repeat the trapezoidal update.
#[derive(Clone)]
pub struct PistonStepper<T> {
    pub params: PistonParams<T>,
    pub p_l: Forcing<T>,
}

impl<T: Real> std::fmt::Debug for PistonStepper<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PistonStepper").field("params", &self.params).finish_non_exhaustive()
    }
}

impl<T: Real> PistonStepper<T> {
    pub fn new(params: PistonParams<T>, p_l: Forcing<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, p_l })
    }

    /// Stepper driven by the exact end pressure.
    pub fn exact(params: PistonParams<T>) -> Result<Self> {
        Self::new(params, exact_end_pressure(params))
    }

    /// Exact state at `t0` with the acceleration history at `t0 - dt`.
    pub fn exact_start(&self, t0: T, dt: T) -> PistonHistory<T> {
        PistonHistory { state: exact_state(t0, &self.params), a_prev: exact_state(t0 - dt, &self.params).a_b }
    }

    fn accel(&self, x: T, p_l: T) -> Result<T> {
        let total = self.params.body_mass() + piston_added_mass(x, &self.params)?;
        Ok(-self.params.area() * p_l / total)
    }

    pub fn step(&self, h: &PistonHistory<T>, dt: T) -> Result<PistonHistory<T>> {
        if !(dt > T::zero()) {
            return Err(invalid("dt must be positive"));
        }
        let s = h.state;
        let half = T::lit(0.5);
        let t1 = s.t + dt;
        let p_l = (self.p_l)(t1);
        let a_e = T::lit(2.0) * s.a_b - h.a_prev;
        let x_e = s.x_b + dt * s.v_b + dt * dt * (T::lit(2.0) * s.a_b + a_e) / T::lit(6.0);
        let a_p = self.accel(x_e, p_l)?;
        let v_p = s.v_b + half * dt * (s.a_b + a_p);
        let x_p = s.x_b + half * dt * (s.v_b + v_p);
        let a = self.accel(x_p, p_l)?;
        let v = s.v_b + half * dt * (s.a_b + a);
        let x = s.x_b + half * dt * (s.v_b + v);
        let m_a = piston_added_mass(x, &self.params)?;
        let p_i = p_l + m_a * a / self.params.area();
        Ok(PistonHistory { state: PistonState { t: t1, x_b: x, v_b: v, a_b: a, p_l, p_i }, a_prev: s.a_b })
    }

    /// Steps from `t0` to `t_end` (a whole number of steps), returning every
    /// state including the start.
    pub fn run(&self, start: PistonHistory<T>, dt: T, t_end: T) -> Result<Vec<PistonState<T>>> {
        let n = ((t_end - start.state.t) / dt).round().to_usize().ok_or_else(|| invalid("bad step count"))?;
        let mut h = start;
        let mut out = Vec::with_capacity(n + 1);
        out.push(h.state);
        for _ in 0..n {
            h = self.step(&h, dt)?;
            out.push(h.state);
        }
        Ok(out)
    }
}

/// Max-norm error of `(x_b, v_b)` at `t_end` for the exact-pressure run.
pub fn piston_error<T: Real>(params: PistonParams<T>, dt: T, t_end: T) -> Result<T> {
    let st = PistonStepper::exact(params)?;
    let traj = st.run(st.exact_start(T::zero(), dt), dt, t_end)?;
    let last = traj.last().expect("non-empty");
    let ex = exact_state(last.t, &params);
    Ok((last.x_b - ex.x_b).abs().max((last.v_b - ex.v_b).abs()))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PistonConvergence<T> {
    pub rho_b: T,
    pub dts: Vec<T>,
    pub errors: Vec<T>,
    pub orders: Vec<T>,
}

/// Errors at `t_end` for a sequence of time steps and the observed orders
/// between consecutive levels.
pub fn piston_convergence<T: Real>(params: PistonParams<T>, dts: &[T], t_end: T) -> Result<PistonConvergence<T>> {
    let errors = dts.iter().map(|&dt| piston_error(params, dt, t_end)).collect::<Result<Vec<_>>>()?;
    let orders = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    Ok(PistonConvergence { rho_b: params.rho_b, dts: dts.to_vec(), errors, orders })
}
