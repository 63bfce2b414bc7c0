//! Modified spherical Bessel functions of order one and the Dirichlet
//! boundary-value profile on a spherical shell.
//!
//! The profile `phi(r)` solves `phi'' + (2/r) phi' - 2 phi / r^2 = zeta^2 phi`
//! on `(r1, r2)` with `phi(r1) = 1`, `phi(r2) = 0`. It depends on `zeta` only
//! through `zeta^2`, so evaluation always moves to the half-plane
//! `Re(zeta) >= 0`.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Below this modulus `i1` switches to its power series.
pub const I1_SERIES_THRESHOLD: f64 = 1e-2;

/// Spherical shell `r1 < r < r2` surrounding a sphere of radius `r1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShellGeometry<T> {
    pub r1: T,
    pub r2: T,
}

impl<T: Real> ShellGeometry<T> {
    pub fn new(r1: T, r2: T) -> Result<Self> {
        if !(r1 > T::zero() && r2 > r1) || !r2.is_finite() {
            return Err(invalid(format!("shell radii must satisfy 0 < r1 < r2 (got r1={r1}, r2={r2})")));
        }
        Ok(Self { r1, r2 })
    }

    pub fn width(&self) -> T {
        self.r2 - self.r1
    }
}

#[inline]
fn c<T: Real>(x: f64) -> Complex<T> {
    Complex::new(T::lit(x), T::zero())
}

fn i1_series<T: Real>(z: Complex<T>) -> Complex<T> {
    // z/3 + z^3/30 + z^5/840
    let z2 = z * z;
    z * (c::<T>(1.0 / 3.0) + z2 * (c::<T>(1.0 / 30.0) + z2 * c::<T>(1.0 / 840.0)))
}

/// Modified spherical Bessel function of the first kind, order one:
/// `i1(z) = (z cosh z - sinh z) / z^2`.
pub fn msb_i1<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(I1_SERIES_THRESHOLD) {
        return i1_series(z);
    }
    (z * z.cosh() - z.sinh()) / (z * z)
}

/// Exponentially scaled `e^{-z} i1(z)`, finite for any `Re(z) >= 0`.
pub fn msb_i1_scaled<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(I1_SERIES_THRESHOLD) {
        return (-z).exp() * i1_series(z);
    }
    let one = Complex::new(T::one(), T::zero());
    let two = c::<T>(2.0);
    ((z - one) + (z + one) * (-two * z).exp()) / (two * z * z)
}

/// Modified spherical Bessel function of the second kind, order one:
/// `k1(z) = e^{-z} (z + 1) / z^2`.
pub fn msb_k1<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    Ok((-z).exp() * msb_k1_scaled(z)?)
}

/// Exponentially scaled `e^{z} k1(z) = (z + 1) / z^2`.
pub fn msb_k1_scaled<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if z.norm() == T::zero() {
        return Err(Error::Domain("k1 is singular at z = 0".into()));
    }
    Ok((z + Complex::new(T::one(), T::zero())) / (z * z))
}

/// Steady (`zeta = 0`) profile: `(r2^3/r^2 - r) r1^2 / (r2^3 - r1^3)`.
pub fn steady_profile<T: Real>(r: T, geom: &ShellGeometry<T>) -> T {
    let r1 = geom.r1;
    let r2_3 = geom.r2.powi(3);
    (r2_3 / (r * r) - r) * r1 * r1 / (r2_3 - r1.powi(3))
}

/// Thresholds for [`PhiProfile`].
#[derive(Debug, Clone, Copy)]
pub struct PhiConfig<T> {
    /// Relative size of the denominator below which the profile is declared resonant.
    pub resonance_tol: T,
    /// `|zeta| (r2 - r1)` below which the steady profile is used.
    pub steady_threshold: T,
    /// `Re(zeta) r2` above which the exponentially scaled form is used.
    pub overflow_re: T,
}

impl<T: Real> Default for PhiConfig<T> {
    fn default() -> Self {
        Self {
            resonance_tol: T::lit(1e-12),
            steady_threshold: T::lit(1e-6),
            overflow_re: T::lit(300.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Form<T> {
    Steady,
    Direct { k1_r2: Complex<T>, i1_r2: Complex<T> },
    Scaled { kt_r2: Complex<T>, it_r2: Complex<T> },
}

/// Boundary-value profile for one value of `zeta`, with the shared
/// denominator evaluated once.
#[derive(Debug, Clone, Copy)]
pub struct PhiProfile<T> {
    zeta: Complex<T>,
    geom: ShellGeometry<T>,
    form: Form<T>,
    denom: Complex<T>,
}

impl<T: Real> PhiProfile<T> {
    pub fn new(zeta: Complex<T>, geom: ShellGeometry<T>) -> Result<Self> {
        Self::with_config(zeta, geom, &PhiConfig::default())
    }

    pub fn with_config(zeta: Complex<T>, geom: ShellGeometry<T>, cfg: &PhiConfig<T>) -> Result<Self> {
        if !(zeta.re.is_finite() && zeta.im.is_finite()) {
            return Err(invalid(format!("non-finite zeta {zeta}")));
        }
        // phi depends on zeta^2 only.
        let zeta = if zeta.re < T::zero() || (zeta.re == T::zero() && zeta.im < T::zero()) {
            -zeta
        } else {
            zeta
        };
        let (r1, r2) = (geom.r1, geom.r2);
        if zeta.norm() * geom.width() < cfg.steady_threshold {
            return Ok(Self { zeta, geom, form: Form::Steady, denom: Complex::new(T::one(), T::zero()) });
        }
        let z1 = zeta * r1;
        let z2 = zeta * r2;
        let (form, t1, t2) = if zeta.re * r2 <= cfg.overflow_re {
            let i1_r2 = msb_i1(z2);
            let k1_r2 = msb_k1(z2)?;
            let t1 = msb_i1(z1) * k1_r2;
            let t2 = i1_r2 * msb_k1(z1)?;
            (Form::Direct { k1_r2, i1_r2 }, t1, t2)
        } else {
            // Numerator and denominator divided by e^{zeta (r2 - r1)}.
            let it_r2 = msb_i1_scaled(z2);
            let kt_r2 = msb_k1_scaled(z2)?;
            let decay = (-(zeta * (r2 - r1)) * T::lit(2.0)).exp();
            let t1 = decay * msb_i1_scaled(z1) * kt_r2;
            let t2 = it_r2 * msb_k1_scaled(z1)?;
            (Form::Scaled { kt_r2, it_r2 }, t1, t2)
        };
        let denom = t1 - t2;
        let scale = t1.norm() + t2.norm();
        if !(denom.norm() > cfg.resonance_tol * scale) {
            return Err(Error::Resonance { zeta: format!("{zeta}"), magnitude: denom.norm().to_f64_lossy() });
        }
        Ok(Self { zeta, geom, form, denom })
    }

    /// The branch of `zeta` actually used (`Re >= 0`).
    pub fn zeta(&self) -> Complex<T> {
        self.zeta
    }

    pub fn eval(&self, r: T) -> Result<Complex<T>> {
        let (r1, r2) = (self.geom.r1, self.geom.r2);
        if r == r1 {
            return Ok(Complex::new(T::one(), T::zero()));
        }
        if r == r2 {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let zr = self.zeta * r;
        let num = match self.form {
            Form::Steady => return Ok(Complex::new(steady_profile(r, &self.geom), T::zero())),
            Form::Direct { k1_r2, i1_r2 } => msb_i1(zr) * k1_r2 - i1_r2 * msb_k1(zr)?,
            Form::Scaled { kt_r2, it_r2 } => {
                let a = (self.zeta * (r + r1 - r2 - r2)).exp() * msb_i1_scaled(zr) * kt_r2;
                let b = (-(self.zeta * (r - r1))).exp() * it_r2 * msb_k1_scaled(zr)?;
                a - b
            }
        };
        Ok(num / self.denom)
    }
}

/// `phi(r)` for a single radius with default thresholds.
pub fn phi_profile<T: Real>(zeta: Complex<T>, r: T, geom: &ShellGeometry<T>) -> Result<Complex<T>> {
    PhiProfile::new(zeta, *geom)?.eval(r)
}
