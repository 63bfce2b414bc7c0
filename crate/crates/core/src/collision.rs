//! Repulsive-force contact model: the particle-pair force, its one-dimensional
//! model problem with damping, and the angular variant that keeps a hinged
//! leaflet within its range of rotation.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::model_am::Forcing;
use crate::scalar::Real;

/// `((s - delta) / delta)^2` for an offset `s` into a layer of width `delta`.
#[inline]
fn ramp<T: Real>(s: T, delta: T) -> T {
    let x = (s - delta) / delta;
    x * x
}

/// Contact threshold `y0`, activation width `delta`, stiffness `eps` and
/// damping magnitude `b0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RepulsionParams<T> {
    pub y0: T,
    pub delta: T,
    pub eps: T,
    pub b0: T,
}

impl<T: Real> RepulsionParams<T> {
    pub fn new(y0: T, delta: T, eps: T, b0: T) -> Result<Self> {
        if !(delta > T::zero()) || !(eps > T::zero()) || !(b0 >= T::zero()) || !y0.is_finite() {
            return Err(invalid("repulsion needs delta > 0, eps > 0, B0 >= 0"));
        }
        Ok(Self { y0, delta, eps, b0 })
    }
}

/// Repulsive force: zero above `y0 + delta`, a quadratic ramp in the layer and
/// `1/eps` below `y0`.
pub fn g_rf<T: Real>(y: T, p: &RepulsionParams<T>) -> T {
    if y > p.y0 + p.delta {
        T::zero()
    } else if y >= p.y0 {
        ramp(y - p.y0, p.delta) / p.eps
    } else {
        p.eps.recip()
    }
}

/// Damping coefficient, shaped like [`g_rf`] with magnitude `b0`.
pub fn damping_b<T: Real>(y: T, p: &RepulsionParams<T>) -> T {
    if y > p.y0 + p.delta {
        T::zero()
    } else if y >= p.y0 {
        p.b0 * ramp(y - p.y0, p.delta)
    } else {
        p.b0
    }
}

/// Force on body 1 from body 2 for spheres (or disks) of radii `r1`, `r2`.
pub fn pairwise_repulsion<T: Real, const N: usize>(x1: [T; N], x2: [T; N], r1: T, r2: T, delta: T, eps: T) -> Result<[T; N]> {
    if !(delta > T::zero() && eps > T::zero()) {
        return Err(invalid("pairwise repulsion needs delta > 0 and eps > 0"));
    }
    let mut diff = [T::zero(); N];
    for k in 0..N {
        diff[k] = x1[k] - x2[k];
    }
    let d = diff.iter().map(|&x| x * x).sum::<T>().sqrt();
    if !(d > T::zero()) {
        return Err(Error::Domain("coincident centers".into()));
    }
    let contact = r1 + r2;
    if d > contact + delta {
        return Ok([T::zero(); N]);
    }
    let mag = ramp(d - contact, delta) / eps;
    Ok(diff.map(|x| mag * x / d))
}

/// Rotation range and contact parameters for a hinged leaflet.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AngularParams<T> {
    pub theta_min: T,
    pub theta_max: T,
    pub delta: T,
    /// Stiffness near `theta_min`.
    pub eps1: T,
    /// Stiffness near `theta_max`.
    pub eps2: T,
    pub b0: T,
}

impl<T: Real> AngularParams<T> {
    pub fn new(theta_min: T, theta_max: T, delta: T, eps1: T, eps2: T, b0: T) -> Result<Self> {
        if !(delta > T::zero() && eps1 > T::zero() && eps2 > T::zero() && b0 >= T::zero()) {
            return Err(invalid("angular contact needs delta, eps1, eps2 > 0 and B0 >= 0"));
        }
        if !(theta_min + delta < theta_max - delta) {
            return Err(invalid("angle range must exceed twice the activation width"));
        }
        Ok(Self { theta_min, theta_max, delta, eps1, eps2, b0 })
    }

    /// Heart-valve values: 3 degree layers, eps1 = 0.05, eps2 = 0.01, B0 = 20.
    pub fn heart_valve(theta_min: T, theta_max: T) -> Result<Self> {
        Self::new(theta_min, theta_max, T::lit(3.0).to_radians(), T::lit(0.05), T::lit(0.01), T::lit(20.0))
    }
}

/// Repulsive torque: positive near `theta_min`, negative near `theta_max`.
pub fn g_rt<T: Real>(theta: T, p: &AngularParams<T>) -> T {
    if theta <= p.theta_min {
        p.eps1.recip()
    } else if theta <= p.theta_min + p.delta {
        ramp(theta - p.theta_min, p.delta) / p.eps1
    } else if theta < p.theta_max - p.delta {
        T::zero()
    } else if theta <= p.theta_max {
        -ramp(p.theta_max - theta, p.delta) / p.eps2
    } else {
        -p.eps2.recip()
    }
}

/// Angular damping coefficient; the plateau `b0` applies outside the range.
pub fn damping_b_theta<T: Real>(theta: T, p: &AngularParams<T>) -> T {
    if theta < p.theta_min || theta > p.theta_max {
        p.b0
    } else if theta <= p.theta_min + p.delta {
        p.b0 * ramp(theta - p.theta_min, p.delta)
    } else if theta < p.theta_max - p.delta {
        T::zero()
    } else {
        p.b0 * ramp(p.theta_max - theta, p.delta)
    }
}

/// Total energy `v^2/2 - f y - (y - y0 - delta)^3 / (3 eps delta^2)`; the
/// last term is kept only inside the layer `[y0, y0 + delta]`. Conserved by
/// the undamped dynamics with constant forcing `f` while the body stays
/// above `y0`.
pub fn energy<T: Real>(y: T, v: T, f: T, p: &RepulsionParams<T>) -> T {
    let mut e = T::lit(0.5) * v * v - f * y;
    if y >= p.y0 && y <= p.y0 + p.delta {
        let s = y - p.y0 - p.delta;
        e -= s * s * s / (T::lit(3.0) * p.eps * p.delta * p.delta);
    }
    e
}

/// Normalized body equation `dv/dt = f(t) + g_rf(y) - B(y) v`, with `params`
/// holding the normalized stiffness and damping.
#[derive(Clone)]
pub struct MprfSystem<T> {
    pub m_b: T,
    pub m_a: T,
    pub f_tilde: Forcing<T>,
    pub params: RepulsionParams<T>,
    pub y: T,
    pub v: T,
}

impl<T: Real> fmt::Debug for MprfSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MprfSystem")
            .field("m_b", &self.m_b)
            .field("m_a", &self.m_a)
            .field("params", &self.params)
            .field("y", &self.y)
            .field("v", &self.v)
            .finish_non_exhaustive()
    }
}

impl<T: Real> MprfSystem<T> {
    /// Builds the normalized system from already normalized quantities
    /// (`m_b + M_a = 1`).
    pub fn normalized(f_tilde: Forcing<T>, params: RepulsionParams<T>, y: T, v: T) -> Self {
        Self { m_b: T::one(), m_a: T::zero(), f_tilde, params, y, v }
    }

    /// Body of mass `m_b` in a channel of width `l` and height `h` filled
    /// with fluid of density `rho`, driven by `p0(t) - pH(t)`.
    pub fn physical(m_b: T, rho: T, l: T, h: T, dp: Forcing<T>, physical: RepulsionParams<T>, y: T, v: T) -> Result<Self> {
        let m_a = rho * l * h;
        let total = m_b + m_a;
        if !(total > T::zero()) {
            return Err(invalid("m_b + M_a must be positive"));
        }
        let params = RepulsionParams::new(physical.y0, physical.delta, physical.eps * total, physical.b0 / total)?;
        let f_tilde: Forcing<T> = std::sync::Arc::new(move |t| l * dp(t) / total);
        Ok(Self { m_b, m_a, f_tilde, params, y, v })
    }

    fn rhs(&self, t: T, y: T, v: T) -> (T, T) {
        (v, (self.f_tilde)(t) + g_rf(y, &self.params) - damping_b(y, &self.params) * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MprfSample<T> {
    pub t: T,
    pub y: T,
    pub v: T,
    pub energy: T,
}

/// Qualitative outcome of a collision run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CollisionCase {
    /// Body crossed `y0`.
    Penetration,
    /// No damping; body rebounds above `y0`.
    Elastic,
    /// Damped with repeated rebounds.
    UnderDamped,
    /// Damped with no oscillation about the rest point.
    OverDamped,
    /// Never reached the layer.
    NoContact,
}

impl CollisionCase {
    pub fn label(self) -> &'static str {
        match self {
            CollisionCase::Penetration => "I",
            CollisionCase::Elastic => "II",
            CollisionCase::UnderDamped => "III",
            CollisionCase::OverDamped => "IV",
            CollisionCase::NoContact => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MprfTrajectory<T> {
    pub samples: Vec<MprfSample<T>>,
    pub params: RepulsionParams<T>,
}

impl<T: Real> MprfTrajectory<T> {
    pub fn min_y(&self) -> T {
        self.samples.iter().map(|s| s.y).fold(T::infinity(), T::min)
    }

    /// Index of the first sample inside or below the layer.
    pub fn layer_entry(&self) -> Option<usize> {
        self.samples.iter().position(|s| s.y <= self.params.y0 + self.params.delta)
    }

    /// Sign changes of the velocity after layer entry, ignoring values below
    /// `1e-10 max|v|`.
    pub fn velocity_sign_changes(&self) -> usize {
        let Some(start) = self.layer_entry() else { return 0 };
        let vmax = self.samples.iter().map(|s| s.v.abs()).fold(T::zero(), T::max);
        let floor = T::lit(1e-10) * vmax;
        let mut last = T::zero();
        let mut count = 0;
        for s in &self.samples[start..] {
            if s.v.abs() <= floor {
                continue;
            }
            if last != T::zero() && s.v.signum() != last {
                count += 1;
            }
            last = s.v.signum();
        }
        count
    }

    /// Relative energy drift `max |E(t) - E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> T {
        let e0 = self.samples[0].energy;
        let scale = if e0 == T::zero() { T::one() } else { e0.abs() };
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(T::zero(), T::max) / scale
    }

    /// Penetration if `min y < y0`; otherwise elastic without damping, and
    /// over-damped if the velocity changes sign at most once after entering
    /// the layer.
    pub fn classify(&self) -> CollisionCase {
        if self.min_y() < self.params.y0 {
            CollisionCase::Penetration
        } else if self.layer_entry().is_none() {
            CollisionCase::NoContact
        } else if self.params.b0 == T::zero() {
            CollisionCase::Elastic
        } else if self.velocity_sign_changes() >= 2 {
            CollisionCase::UnderDamped
        } else {
            CollisionCase::OverDamped
        }
    }
}

/// Blow-up threshold on `|y|` and `|v|`.
pub const BLOW_UP: f64 = 1e12;

/// Classical fourth-order Runge-Kutta integration to `t_end`, recording every
/// `record_every`-th step.
pub fn simulate_mprf<T: Real>(sys: &MprfSystem<T>, dt: T, t_end: T, record_every: usize) -> Result<MprfTrajectory<T>> {
    if !(dt > T::zero()) || !(t_end >= T::zero()) || record_every == 0 {
        return Err(invalid("simulation needs dt > 0, t_end >= 0 and record_every >= 1"));
    }
    let n = (t_end / dt).round().to_usize().ok_or_else(|| invalid("step count overflow"))?;
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let two = T::lit(2.0);
    let (mut y, mut v) = (sys.y, sys.v);
    let sample = |t: T, y: T, v: T| MprfSample { t, y, v, energy: energy(y, v, (sys.f_tilde)(t), &sys.params) };
    let mut samples = vec![sample(T::zero(), y, v)];
    for k in 0..n {
        let t = dt * T::of_usize(k);
        let (k1y, k1v) = sys.rhs(t, y, v);
        let (k2y, k2v) = sys.rhs(t + half * dt, y + half * dt * k1y, v + half * dt * k1v);
        let (k3y, k3v) = sys.rhs(t + half * dt, y + half * dt * k2y, v + half * dt * k2v);
        let (k4y, k4v) = sys.rhs(t + dt, y + dt * k3y, v + dt * k3v);
        y += dt * sixth * (k1y + two * k2y + two * k3y + k4y);
        v += dt * sixth * (k1v + two * k2v + two * k3v + k4v);
        let lim = T::lit(BLOW_UP);
        if !(y.abs() <= lim && v.abs() <= lim) {
            return Err(Error::BlowUp(format!("|y| or |v| above {BLOW_UP:e} at t = {}", t + dt)));
        }
        if (k + 1) % record_every == 0 || k + 1 == n {
            samples.push(sample(dt * T::of_usize(k + 1), y, v));
        }
    }
    Ok(MprfTrajectory { samples, params: sys.params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn scenario(eps: f64, b0: f64) -> MprfSystem<f64> {
        let p = RepulsionParams::new(0.5, 0.1, eps, b0).unwrap();
        MprfSystem::normalized(Arc::new(|_| -1.0), p, 1.0, 0.0)
    }

    #[test]
    fn force_profile() {
        let p = RepulsionParams::new(0.5_f64, 0.1, 0.01, 3.0).unwrap();
        assert_eq!(g_rf(0.5 + 0.2, &p), 0.0);
        assert!((g_rf(0.5, &p) - 100.0).abs() < 1e-12);
        assert!((g_rf(0.55, &p) - 25.0).abs() < 1e-9);
        assert_eq!(g_rf(0.1, &p), 100.0);
        assert!((damping_b(0.55, &p) - 0.75).abs() < 1e-12);
        assert_eq!(damping_b(0.4, &p), 3.0);
        // C1 at the outer edge.
        let e = 1e-8;
        assert!(((g_rf(0.6 - e, &p) - g_rf(0.6 - 2.0 * e, &p)) / e).abs() < 1e-3);
    }

    #[test]
    fn pairwise() {
        let f = pairwise_repulsion([0.0_f64, 0.0, 2.4], [0.0; 3], 1.0, 1.0, 0.2, 1e-4).unwrap();
        assert_eq!(f, [0.0; 3]);
        let f = pairwise_repulsion([2.0_f64, 0.0], [0.0, 0.0], 1.0, 1.0, 0.2, 1e-4).unwrap();
        assert!((f[0] - 1e4).abs() < 1e-8 && f[1] == 0.0);
        let a = pairwise_repulsion([0.3, 1.9], [0.1, 0.2], 1.0, 0.8, 0.2, 1e-2).unwrap();
        let b = pairwise_repulsion([0.1, 0.2], [0.3, 1.9], 0.8, 1.0, 0.2, 1e-2).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x + y == 0.0));
        assert!(matches!(pairwise_repulsion([1.0], [1.0], 1.0, 1.0, 0.1, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn angular_profiles() {
        let p = AngularParams::heart_valve(0.0_f64, 1.0).unwrap();
        let d = p.delta;
        assert_eq!(g_rt(0.5, &p), 0.0);
        assert_eq!(damping_b_theta(0.5, &p), 0.0);
        assert!((g_rt(0.0, &p) - 20.0).abs() < 1e-12);
        assert!((g_rt(1.0, &p) + 100.0).abs() < 1e-12);
        assert!((damping_b_theta(0.0, &p) - 20.0).abs() < 1e-12);
        assert_eq!(damping_b_theta(-1.0, &p), 20.0);
        assert_eq!(damping_b_theta(2.0, &p), 20.0);
        for x in [0.0, d, 1.0 - d, 1.0] {
            let (lo, hi) = (x.next_down(), x.next_up());
            assert!((g_rt(lo, &p) - g_rt(hi, &p)).abs() < 1e-14 * g_rt(x, &p).abs().max(1.0), "g_rt at {x}");
            assert!((damping_b_theta(lo, &p) - damping_b_theta(hi, &p)).abs() < 1e-14 * 20.0, "B at {x}");
        }
        assert!(AngularParams::new(0.0, 0.1, 0.05, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn energy_is_continuous_at_layer_edge() {
        let p = RepulsionParams::new(0.5_f64, 0.1, 0.01, 0.0).unwrap();
        let e = energy(0.6, 0.3, -1.0, &p);
        assert!((e - (0.045 + 0.6)).abs() < 1e-15);
        assert!((energy(0.6 - 1e-12, 0.3, -1.0, &p) - e).abs() < 1e-11);
    }

    #[test]
    fn four_cases() {
        let t = simulate_mprf(&scenario(0.5, 0.0), 1e-4, 3.0, 10).unwrap();
        assert_eq!(t.classify(), CollisionCase::Penetration);
        let t = simulate_mprf(&scenario(0.01, 0.0), 1e-4, 3.0, 10).unwrap();
        assert_eq!(t.classify(), CollisionCase::Elastic);
        assert!(t.energy_drift() < 1e-6, "{}", t.energy_drift());
        let t = simulate_mprf(&scenario(0.01, 100.0), 1e-4, 10.0, 10).unwrap();
        assert_eq!(t.classify(), CollisionCase::UnderDamped);
        let t = simulate_mprf(&scenario(0.01, 1e4), 1e-4, 10.0, 10).unwrap();
        assert_eq!(t.classify(), CollisionCase::OverDamped);
        let t = simulate_mprf(&scenario(0.01, 0.0), 1e-4, 0.5, 10).unwrap();
        assert_eq!(t.classify(), CollisionCase::NoContact);
    }

    #[test]
    fn damped_energy_decreases() {
        let t = simulate_mprf(&scenario(0.01, 100.0), 1e-4, 5.0, 1).unwrap();
        for w in t.samples.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-9);
        }
    }

    #[test]
    fn physical_normalization() {
        let p = RepulsionParams::new(0.5_f64, 0.1, 0.01, 4.0).unwrap();
        let s = MprfSystem::physical(1.0_f64, 1.0, 2.0, 1.5, Arc::new(|_| -2.0), p, 1.0, 0.0).unwrap();
        assert_eq!(s.m_a, 3.0);
        assert!((s.params.eps - 0.04).abs() < 1e-15);
        assert!((s.params.b0 - 1.0).abs() < 1e-15);
        assert!(((s.f_tilde)(0.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rest_state_stays_at_equilibrium() {
        // g_rf(y*) = 1 balances f = -1.
        let p = RepulsionParams::new(0.5_f64, 0.1, 0.01, 1.0).unwrap();
        let ystar = 0.6 - 0.1 * 0.1;
        let s = MprfSystem::normalized(Arc::new(|_| -1.0), p, ystar, 0.0);
        let t = simulate_mprf(&s, 1e-3, 1.0, 100).unwrap();
        assert!(t.samples.iter().all(|x| (x.y - ystar).abs() < 1e-12));
    }

    #[test]
    fn blow_up_guard() {
        let p = RepulsionParams::new(0.5, 0.1, 1e-30, 0.0).unwrap();
        let s = MprfSystem::normalized(Arc::new(|_| 0.0), p, 0.0, 0.0);
        assert!(matches!(simulate_mprf(&s, 1e-3, 1.0, 1), Err(Error::BlowUp(_))));
    }
}
