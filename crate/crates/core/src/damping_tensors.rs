//! Added-damping tensors of a rigid body from surface quadrature.
//!
//! Each surface point contributes `(mu dS / dn) B B^T` with
//! `B = [P; [r - x_b]_x P]` and `P = I - n n^T`, so the assembled 6x6 tensor is
//! symmetric positive semidefinite by construction.

use nalgebra::{Matrix3, Matrix6, RealField, SymmetricEigen, Vector3};

use crate::error::{invalid, Error, Result};

/// Added-damping length scale `ds_n / (1 - e^{-delta})` with
/// `delta = ds_n / sqrt(alpha nu dt)`.
pub fn delta_n<T: RealField + Copy>(ds_n: T, nu: T, dt: T, alpha: T) -> Result<T> {
    let zero = T::zero();
    if !(ds_n > zero && nu > zero && dt > zero && alpha > zero) {
        return Err(invalid("delta_n inputs must be positive"));
    }
    let delta = ds_n / (alpha * nu * dt).sqrt();
    Ok(ds_n / -(-delta).exp_m1())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh<T: RealField> {
    pub points: Vec<Vector3<T>>,
    pub normals: Vec<Vector3<T>>,
    pub weights: Vec<T>,
    /// Normal mesh spacing at each point.
    pub ds_n: Vec<T>,
    pub x_b: Vector3<T>,
}

impl<T: RealField + Copy> SurfaceMesh<T> {
    pub fn new(points: Vec<Vector3<T>>, normals: Vec<Vector3<T>>, weights: Vec<T>, ds_n: Vec<T>, x_b: Vector3<T>) -> Result<Self> {
        let n = points.len();
        for len in [normals.len(), weights.len(), ds_n.len()] {
            if len != n {
                return Err(Error::ShapeMismatch { expected: n, found: len });
            }
        }
        let tol = T::from_f64(1e-12).unwrap();
        for (i, nv) in normals.iter().enumerate() {
            if (nv.norm() - T::one()).abs() > tol {
                return Err(Error::Domain(format!("normal {i} is not a unit vector")));
            }
        }
        if weights.iter().any(|w| !(*w > T::zero())) || ds_n.iter().any(|d| !(*d > T::zero())) {
            return Err(invalid("surface weights and normal spacings must be positive"));
        }
        Ok(Self { points, normals, weights, ds_n, x_b })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, w| a + *w)
    }

    /// Latitude-longitude sphere with `n_theta` bands and `n_phi` sectors.
    ///
    /// Each quadrature point sits at the area centroid height of its band and
    /// carries the exact band-sector area, so the two polar caps need no
    /// special treatment.
    pub fn lat_long_sphere(radius: T, center: Vector3<T>, n_theta: usize, n_phi: usize, ds_n: T) -> Result<Self> {
        if n_theta < 2 || n_phi < 3 || !(radius > T::zero()) {
            return Err(invalid("sphere mesh needs n_theta >= 2, n_phi >= 3, radius > 0"));
        }
        let pi = T::pi();
        let two_pi = T::two_pi();
        let nt = T::from_usize(n_theta).unwrap();
        let np = T::from_usize(n_phi).unwrap();
        let half = T::from_f64(0.5).unwrap();
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut normals = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let ta = pi * T::from_usize(i).unwrap() / nt;
            let tb = pi * T::from_usize(i + 1).unwrap() / nt;
            let (za, zb) = (ta.cos(), tb.cos());
            let z = half * (za + zb);
            let s = (T::one() - z * z).max(T::zero()).sqrt();
            let w = two_pi * radius * radius * (za - zb) / np;
            for j in 0..n_phi {
                let phi = two_pi * (T::from_usize(j).unwrap() + half) / np;
                let nv = Vector3::new(s * phi.cos(), s * phi.sin(), z);
                let nv = nv / nv.norm();
                points.push(center + nv * radius);
                normals.push(nv);
                weights.push(w);
            }
        }
        let n = points.len();
        Self::new(points, normals, weights, vec![ds_n; n], center)
    }
}

/// Composite 6x6 tensor split into its four 3x3 blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor6<T: RealField> {
    pub dvv: Matrix3<T>,
    pub dvw: Matrix3<T>,
    pub dwv: Matrix3<T>,
    pub dww: Matrix3<T>,
}

impl<T: RealField + Copy> Tensor6<T> {
    pub fn from_matrix(m: &Matrix6<T>) -> Self {
        Self {
            dvv: m.fixed_view::<3, 3>(0, 0).into_owned(),
            dvw: m.fixed_view::<3, 3>(0, 3).into_owned(),
            dwv: m.fixed_view::<3, 3>(3, 0).into_owned(),
            dww: m.fixed_view::<3, 3>(3, 3).into_owned(),
        }
    }

    pub fn to_matrix(&self) -> Matrix6<T> {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.dvv);
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.dvw);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&self.dwv);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.dww);
        m
    }

    /// Frobenius norm of the full tensor.
    pub fn norm(&self) -> T {
        self.to_matrix().norm()
    }

    pub fn min_eigenvalue(&self) -> T {
        let m = self.to_matrix();
        let sym = (m + m.transpose()) * T::from_f64(0.5).unwrap();
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    pub fn asymmetry(&self) -> T {
        let m = self.to_matrix();
        (m - m.transpose()).norm()
    }
}

fn cross_matrix<T: RealField + Copy>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

fn contribution<T: RealField + Copy>(mesh: &SurfaceMesh<T>, i: usize, mu: T, dn: T) -> Matrix6<T> {
    let n = mesh.normals[i];
    let p = Matrix3::identity() - n * n.transpose();
    let x = cross_matrix(&(mesh.points[i] - mesh.x_b));
    let mut b = nalgebra::Matrix6x3::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&p);
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&(x * p));
    b * b.transpose() * (mu * mesh.weights[i] / dn)
}

fn pairwise_sum<T: RealField + Copy>(terms: &[Matrix6<T>]) -> Matrix6<T> {
    match terms.len() {
        0 => Matrix6::zeros(),
        1 => terms[0],
        n if n <= 16 => terms.iter().fold(Matrix6::zeros(), |a, t| a + t),
        n => {
            let (l, r) = terms.split_at(n / 2);
            let (a, b) = rayon::join(|| pairwise_sum(l), || pairwise_sum(r));
            a + b
        }
    }
}

/// Surface-quadrature approximation of the four added-damping blocks.
pub fn assemble_tensors<T: RealField + Copy>(mesh: &SurfaceMesh<T>, mu: T, nu: T, dt: T, alpha: T) -> Result<Tensor6<T>> {
    let terms = (0..mesh.len())
        .map(|i| Ok(contribution(mesh, i, mu, delta_n(mesh.ds_n[i], nu, dt, alpha)?)))
        .collect::<Result<Vec<_>>>()?;
    let m = pairwise_sum(&terms);
    let mut t = Tensor6::from_matrix(&m);
    // Exact transpose pair by construction.
    t.dvw = t.dwv.transpose();
    Ok(t)
}

/// Closed-form tensors of a sphere of radius `r` with uniform `delta_n`.
pub fn sphere_closed_form<T: RealField + Copy>(r: T, mu: T, delta_n: T) -> Result<Tensor6<T>> {
    if !(r > T::zero() && delta_n > T::zero()) {
        return Err(invalid("sphere radius and delta_n must be positive"));
    }
    let c = mu / delta_n * T::from_f64(8.0 / 3.0).unwrap() * T::pi();
    let r2 = r * r;
    Ok(Tensor6 {
        dvv: Matrix3::identity() * (c * r2),
        dvw: Matrix3::zeros(),
        dwv: Matrix3::zeros(),
        dww: Matrix3::identity() * (c * r2 * r2),
    })
}

/// Conjugates every block by the rotation `rot`.
pub fn rotate_tensor<T: RealField + Copy>(d0: &Tensor6<T>, rot: &Matrix3<T>) -> Result<Tensor6<T>> {
    let tol = T::from_f64(1e-10).unwrap();
    let orth = (rot.transpose() * rot - Matrix3::identity()).norm();
    if orth > tol || (rot.determinant() - T::one()).abs() > tol {
        return Err(invalid("rotation must be orthogonal with determinant 1"));
    }
    let c = |m: &Matrix3<T>| rot * m * rot.transpose();
    Ok(Tensor6 { dvv: c(&d0.dvv), dvw: c(&d0.dvw), dwv: c(&d0.dwv), dww: c(&d0.dww) })
}

/// Row-major JSON layout of a [`Tensor6`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tensor6Record {
    pub dvv: [[f64; 3]; 3],
    pub dvw: [[f64; 3]; 3],
    pub dwv: [[f64; 3]; 3],
    pub dww: [[f64; 3]; 3],
}

impl From<&Tensor6<f64>> for Tensor6Record {
    fn from(t: &Tensor6<f64>) -> Self {
        let rows = |m: &Matrix3<f64>| [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]];
        Self { dvv: rows(&t.dvv), dvw: rows(&t.dvw), dwv: rows(&t.dwv), dww: rows(&t.dww) }
    }
}

impl From<&Tensor6Record> for Tensor6<f64> {
    fn from(r: &Tensor6Record) -> Self {
        let m = |a: &[[f64; 3]; 3]| Matrix3::from_fn(|i, j| a[i][j]);
        Self { dvv: m(&r.dvv), dvw: m(&r.dvw), dwv: m(&r.dwv), dww: m(&r.dww) }
    }
}
