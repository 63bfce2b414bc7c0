//! Volume and surface quadrature weights on composite (overlapping) grids,
//! read off the left null vector of a discrete Neumann operator.
//!
//! If `A phi = f` discretizes `Laplace(phi) = f` with `dphi/dn = g`, the
//! compatibility condition `w^T f = 0` is a discrete version of
//! `int f dV = int g dS`. After one scale factor is fixed in a region away
//! from any overlap, the interior entries of `w` are volume weights and the
//! negated boundary entries are surface weights.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Interior,
    Boundary,
    Interpolation,
    Unused,
}

impl PointKind {
    pub fn label(self) -> &'static str {
        match self {
            PointKind::Interior => "interior",
            PointKind::Boundary => "boundary",
            PointKind::Interpolation => "interpolation",
            PointKind::Unused => "unused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentShape {
    /// Uniform segment `x0 + i h`, `i = 0..=n`.
    Segment { x0: f64, h: f64, n: usize },
    /// Polar patch with radial nodes `r1 + j dr`, `j = 0..=nr`, and angular
    /// nodes `th0 + i dth`, `i = 0..=m` (or `0..m` when periodic).
    Polar { r1: f64, dr: f64, nr: usize, th0: f64, dth: f64, m: usize, periodic: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub shape: ComponentShape,
}

impl Component {
    fn n_points(&self) -> usize {
        match self.shape {
            ComponentShape::Segment { n, .. } => n + 1,
            ComponentShape::Polar { nr, m, periodic, .. } => (if periodic { m } else { m + 1 }) * (nr + 1),
        }
    }

    fn n_angles(&self) -> usize {
        match self.shape {
            ComponentShape::Polar { m, periodic, .. } => {
                if periodic {
                    m
                } else {
                    m + 1
                }
            }
            ComponentShape::Segment { .. } => 1,
        }
    }

    /// Local index of polar node `(i, j)`.
    fn polar_index(&self, i: usize, j: usize) -> usize {
        match self.shape {
            ComponentShape::Polar { nr, .. } => i * (nr + 1) + j,
            ComponentShape::Segment { .. } => unreachable!(),
        }
    }

    /// Logical coordinates of a local index: `(i, None)` on segments,
    /// `(i_theta, Some(j_r))` on polar patches.
    fn logical(&self, local: usize) -> (usize, Option<usize>) {
        match self.shape {
            ComponentShape::Segment { .. } => (local, None),
            ComponentShape::Polar { nr, .. } => (local / (nr + 1), Some(local % (nr + 1))),
        }
    }

    /// Volume of the cell owned by a node in the interior.
    fn cell_volume(&self, local: usize) -> f64 {
        match self.shape {
            ComponentShape::Segment { h, .. } => h,
            ComponentShape::Polar { r1, dr, dth, .. } => {
                let (_, j) = self.logical(local);
                (r1 + dr * j.unwrap() as f64) * dr * dth
            }
        }
    }

    fn position(&self, local: usize) -> [f64; 2] {
        match self.shape {
            ComponentShape::Segment { x0, h, .. } => [x0 + h * local as f64, 0.0],
            ComponentShape::Polar { r1, dr, th0, dth, .. } => {
                let (i, j) = self.logical(local);
                let r = r1 + dr * j.unwrap() as f64;
                let th = th0 + dth * i as f64;
                [r * th.cos(), r * th.sin()]
            }
        }
    }
}

/// Interpolation stencil `phi_i = sum c_k phi_{donor_k}` (global indices).
#[derive(Debug, Clone, PartialEq)]
pub struct InterpStencil {
    pub donors: Vec<usize>,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGrid {
    pub components: Vec<Component>,
    offsets: Vec<usize>,
    pub kinds: Vec<PointKind>,
    /// Boundary label of boundary points (e.g. inner/outer circle).
    pub boundary_id: Vec<Option<usize>>,
    pub stencils: Vec<Option<InterpStencil>>,
}

fn lagrange3(x: f64, nodes: [f64; 3]) -> [f64; 3] {
    let mut w = [1.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                w[a] *= (x - nodes[b]) / (nodes[a] - nodes[b]);
            }
        }
    }
    w
}

impl CompositeGrid {
    fn from_components(components: Vec<Component>) -> Self {
        let mut offsets = Vec::with_capacity(components.len() + 1);
        let mut total = 0;
        for c in &components {
            offsets.push(total);
            total += c.n_points();
        }
        offsets.push(total);
        let mut g = Self {
            components,
            offsets,
            kinds: vec![PointKind::Interior; total],
            boundary_id: vec![None; total],
            stencils: vec![None; total],
        };
        // Physical boundaries: segment ends, polar radial ends.
        for c in 0..g.components.len() {
            let comp = g.components[c].clone();
            match comp.shape {
                ComponentShape::Segment { n, .. } => {
                    g.mark_boundary(c, 0, 0);
                    g.mark_boundary(c, n, 1);
                }
                ComponentShape::Polar { nr, .. } => {
                    for i in 0..comp.n_angles() {
                        g.mark_boundary(c, comp.polar_index(i, 0), 0);
                        g.mark_boundary(c, comp.polar_index(i, nr), 1);
                    }
                }
            }
        }
        g
    }

    fn mark_boundary(&mut self, comp: usize, local: usize, id: usize) {
        let k = self.offsets[comp] + local;
        self.kinds[k] = PointKind::Boundary;
        self.boundary_id[k] = Some(id);
    }

    fn set_interp(&mut self, comp: usize, local: usize, st: InterpStencil) {
        let k = self.offsets[comp] + local;
        self.kinds[k] = PointKind::Interpolation;
        self.boundary_id[k] = None;
        self.stencils[k] = Some(st);
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// `(component, local index)` of a global index.
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let c = self.offsets.partition_point(|&o| o <= global) - 1;
        (c, global - self.offsets[c])
    }

    pub fn global(&self, comp: usize, local: usize) -> usize {
        self.offsets[comp] + local
    }

    pub fn position(&self, global: usize) -> [f64; 2] {
        let (c, l) = self.locate(global);
        self.components[c].position(l)
    }

    /// Uniform grid on `[a, b]` with `n` cells.
    pub fn single_segment(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 4 || !(b > a) {
            return Err(Error::InvalidGrid("segment needs b > a and at least 4 cells".into()));
        }
        Ok(Self::from_components(vec![Component { shape: ComponentShape::Segment { x0: a, h: (b - a) / n as f64, n } }]))
    }

    /// `[0, 1]` covered by `[0, 0.6]` (spacing `1/n`) and `[0.4, 1]` (spacing
    /// `0.8/n`), each interpolating its inner end from the other.
    pub fn two_segments(n: usize) -> Result<Self> {
        if n < 20 || !n.is_multiple_of(5) {
            return Err(Error::InvalidGrid("two-segment grid needs n >= 20, divisible by 5".into()));
        }
        let na = 3 * n / 5;
        let nb = 3 * n / 4;
        let ha = 0.6 / na as f64;
        let hb = 0.6 / nb as f64;
        let comps = vec![
            Component { shape: ComponentShape::Segment { x0: 0.0, h: ha, n: na } },
            Component { shape: ComponentShape::Segment { x0: 0.4, h: hb, n: nb } },
        ];
        let mut g = Self::from_components(comps);
        let seg = |x0: f64, h: f64, n: usize, x: f64| {
            let s = (x - x0) / h;
            let i0 = ((s.round() as i64) - 1).clamp(1, n as i64 - 3) as usize;
            (i0, lagrange3(s, [i0 as f64, i0 as f64 + 1.0, i0 as f64 + 2.0]))
        };
        // A's right end from B, B's left end from A.
        let (i0, w) = seg(0.4, hb, nb, 0.6);
        let donors = (0..3).map(|a| g.global(1, i0 + a)).collect();
        g.set_interp(0, na, InterpStencil { donors, coeffs: w.to_vec() });
        let (i0, w) = seg(0.0, ha, na, 0.4);
        let donors = (0..3).map(|a| g.global(0, i0 + a)).collect();
        g.set_interp(1, 0, InterpStencil { donors, coeffs: w.to_vec() });
        g.validate()?;
        Ok(g)
    }

    /// Periodic polar annulus with `nr` radial cells and `m` angles.
    pub fn polar_annulus(r1: f64, r2: f64, nr: usize, m: usize) -> Result<Self> {
        if nr < 4 || m < 8 || !(r2 > r1 && r1 > 0.0) {
            return Err(Error::InvalidGrid("annulus needs 0 < r1 < r2, nr >= 4, m >= 8".into()));
        }
        let shape = ComponentShape::Polar { r1, dr: (r2 - r1) / nr as f64, nr, th0: 0.0, dth: 2.0 * PI / m as f64, m, periodic: true };
        Ok(Self::from_components(vec![Component { shape }]))
    }

    /// Annulus covered by two half-annulus patches that overlap by
    /// `overlap_cells` angular cells at each end; the second patch is shifted
    /// by a fraction of a cell so no nodes coincide. Patch ends are
    /// interpolated (quadratic in angle) from the other patch.
    pub fn two_patch_annulus(r1: f64, r2: f64, nr: usize, m: usize, overlap_cells: usize) -> Result<Self> {
        if nr < 4 || !(r2 > r1 && r1 > 0.0) || overlap_cells < 2 || m < 2 * overlap_cells + 8 {
            return Err(Error::InvalidGrid("two-patch annulus needs nr >= 4, overlap >= 2 cells, m >= 2 overlap + 8".into()));
        }
        let dr = (r2 - r1) / nr as f64;
        let dth = PI / (m - 2 * overlap_cells) as f64;
        let ov = overlap_cells as f64 * dth;
        let starts = [-ov, PI - ov + 0.37 * dth];
        let comps = starts
            .iter()
            .map(|&th0| Component { shape: ComponentShape::Polar { r1, dr, nr, th0, dth, m, periodic: false } })
            .collect();
        let mut g = Self::from_components(comps);
        for p in 0..2 {
            let q = 1 - p;
            for i in [0, m] {
                let mut th = starts[p] + dth * i as f64;
                let end = starts[q] + dth * m as f64;
                while th < starts[q] {
                    th += 2.0 * PI;
                }
                while th > end {
                    th -= 2.0 * PI;
                }
                let s = (th - starts[q]) / dth;
                let i0 = ((s.round() as i64) - 1).clamp(1, m as i64 - 3) as usize;
                let w = lagrange3(s, [i0 as f64, i0 as f64 + 1.0, i0 as f64 + 2.0]);
                for j in 0..=nr {
                    let donors = (0..3).map(|a| g.global(q, g.components[q].polar_index(i0 + a, j))).collect();
                    let local = g.components[p].polar_index(i, j);
                    g.set_interp(p, local, InterpStencil { donors, coeffs: w.to_vec() });
                }
            }
        }
        g.validate()?;
        Ok(g)
    }

    /// Every interpolation point needs a complete stencil of discretization
    /// points on another component.
    pub fn validate(&self) -> Result<()> {
        for (k, kind) in self.kinds.iter().enumerate() {
            if *kind != PointKind::Interpolation {
                continue;
            }
            let st = self.stencils[k].as_ref().ok_or_else(|| Error::InvalidGrid(format!("point {k} has no interpolation stencil")))?;
            if st.donors.is_empty() || st.donors.len() != st.coeffs.len() {
                return Err(Error::InvalidGrid(format!("incomplete stencil at point {k}")));
            }
            let (ck, _) = self.locate(k);
            for &d in &st.donors {
                if d >= self.len() || self.locate(d).0 == ck {
                    return Err(Error::InvalidGrid(format!("stencil at point {k} does not use another component")));
                }
                if matches!(self.kinds[d], PointKind::Interpolation | PointKind::Unused) {
                    return Err(Error::InvalidGrid(format!("incomplete stencil at point {k}: donor {d} is not a discretization point")));
                }
            }
        }
        Ok(())
    }

    /// Points within the overlap: interpolation points and their donors.
    fn overlap_points(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for (k, st) in self.stencils.iter().enumerate() {
            if let Some(st) = st {
                v.push(k);
                v.extend(&st.donors);
            }
        }
        v.sort_unstable();
        v.dedup();
        v
    }
}

// ---------------------------------------------------------------------------
// Operator

/// Sparse square operator with one row per active (non-unused) point.
#[derive(Debug, Clone)]
pub struct NeumannOperator {
    /// Row entries `(column, value)`, columns in equation numbering.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_kind: Vec<PointKind>,
    /// Grid point of each equation.
    pub point_of_row: Vec<usize>,
    /// Equation of each grid point (`None` for unused points).
    pub row_of_point: Vec<Option<usize>>,
}

impl NeumannOperator {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `A x` with `x` indexed by grid point (unused entries ignored).
    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.row_of_point.len() {
            return Err(Error::ShapeMismatch { expected: self.row_of_point.len(), found: phi.len() });
        }
        Ok(self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * phi[self.point_of_row[c]]).sum()).collect())
    }

    /// `w^T A` in equation numbering.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                out[c] += w[i] * v;
            }
        }
        out
    }

    /// `A^T - shift I` in compressed-column form (duplicates summed).
    fn transpose_shifted(&self, shift: f64) -> Result<SparseColMat<usize, f64>> {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                *acc.entry((c, i)).or_insert(0.0) += v;
            }
        }
        for i in 0..self.dim() {
            *acc.entry((i, i)).or_insert(0.0) -= shift;
        }
        let trips: Vec<Triplet<usize, usize, f64>> = acc.into_iter().map(|((r, c), v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.dim(), self.dim(), &trips).map_err(|e| Error::Singular(format!("{e:?}")))
    }
}

/// Discrete Neumann problem: conservative second-order Laplacian at interior
/// points, one-sided second-order outward normal derivatives at boundary
/// points, and `phi_i - sum c_j phi_j` at interpolation points.
pub fn build_neumann_operator(grid: &CompositeGrid) -> Result<NeumannOperator> {
    grid.validate()?;
    let n = grid.len();
    let mut row_of_point = vec![None; n];
    let mut point_of_row = Vec::new();
    for k in 0..n {
        if grid.kinds[k] != PointKind::Unused {
            row_of_point[k] = Some(point_of_row.len());
            point_of_row.push(k);
        }
    }
    let col = |k: usize| row_of_point[k].ok_or_else(|| Error::InvalidGrid(format!("stencil references unused point {k}")));
    let mut rows = Vec::with_capacity(point_of_row.len());
    let mut row_kind = Vec::with_capacity(point_of_row.len());
    for &k in &point_of_row {
        let kind = grid.kinds[k];
        let (c, local) = grid.locate(k);
        let comp = &grid.components[c];
        let g = |l: usize| grid.global(c, l);
        let mut row: Vec<(usize, f64)> = Vec::new();
        match kind {
            PointKind::Interpolation => {
                let st = grid.stencils[k].as_ref().expect("validated");
                row.push((col(k)?, 1.0));
                for (&d, &w) in st.donors.iter().zip(&st.coeffs) {
                    row.push((col(d)?, -w));
                }
            }
            PointKind::Boundary | PointKind::Interior => match comp.shape {
                ComponentShape::Segment { h, n: nc, .. } => {
                    let i = local;
                    if kind == PointKind::Boundary {
                        // Outward derivative: -phi'(x0) at the left end, phi'(x_n) at the right.
                        // Left end: -(-3 f0 + 4 f1 - f2)/(2h); right end: (3 fn - 4 fn-1 + fn-2)/(2h).
                        let s = if i == 0 { [0, 1, 2] } else { [nc, nc - 1, nc - 2] };
                        for (&l, cv) in s.iter().zip([-3.0, 4.0, -1.0]) {
                            row.push((col(g(l))?, -cv / (2.0 * h)));
                        }
                    } else {
                        let ih2 = 1.0 / (h * h);
                        row.push((col(g(i - 1))?, ih2));
                        row.push((col(g(i))?, -2.0 * ih2));
                        row.push((col(g(i + 1))?, ih2));
                    }
                }
                ComponentShape::Polar { r1, dr, nr, dth, m, periodic, .. } => {
                    let (i, j) = comp.logical(local);
                    let j = j.unwrap();
                    if kind == PointKind::Boundary {
                        let cs = [-3.0, 4.0, -1.0];
                        for (a, &cv) in cs.iter().enumerate() {
                            let jj = if j == 0 { a } else { nr - a };
                            row.push((col(g(comp.polar_index(i, jj)))?, -cv / (2.0 * dr)));
                        }
                    } else {
                        let r = r1 + dr * j as f64;
                        let (rp, rm) = (r + 0.5 * dr, r - 0.5 * dr);
                        let ir = 1.0 / (r * dr * dr);
                        let ith = 1.0 / (r * r * dth * dth);
                        let na = comp.n_angles();
                        let (ip, im) = if periodic {
                            ((i + 1) % m, (i + m - 1) % m)
                        } else {
                            if i == 0 || i + 1 >= na {
                                return Err(Error::InvalidGrid(format!("interior point {k} on a patch edge")));
                            }
                            (i + 1, i - 1)
                        };
                        row.push((col(g(comp.polar_index(i, j + 1)))?, rp * ir));
                        row.push((col(g(comp.polar_index(i, j - 1)))?, rm * ir));
                        row.push((col(g(local))?, -(rp + rm) * ir - 2.0 * ith));
                        row.push((col(g(comp.polar_index(ip, j)))?, ith));
                        row.push((col(g(comp.polar_index(im, j)))?, ith));
                    }
                }
            },
            PointKind::Unused => unreachable!(),
        }
        rows.push(row);
        row_kind.push(kind);
    }
    Ok(NeumannOperator { rows, row_kind, point_of_row, row_of_point })
}

// ---------------------------------------------------------------------------
// Null vector

#[derive(Debug, Clone, Copy)]
pub struct NullVectorOptions {
    /// Exit when `|w^T A| / (|w| |A|) < tol`.
    pub tol: f64,
    /// Shift relative to `|A|`.
    pub shift: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NullVectorOptions {
    fn default() -> Self {
        Self { tol: 1e-12, shift: 1e-10, max_iter: 50, seed: 0x5eed }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Left null vector of `A` by shifted inverse iteration on `A^T`, in equation
/// numbering, unit norm, signed so most interior entries are positive.
pub fn left_null_vector(a: &NeumannOperator, opts: &NullVectorOptions) -> Result<Vec<f64>> {
    let n = a.dim();
    let anorm = a.norm_inf();
    let residual = |x: &[f64]| norm2(&a.apply_transpose(x)) / norm2(x);
    let lu = a
        .transpose_shifted(opts.shift * anorm)?
        .sp_lu()
        .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
    // Returns the last iterate and whether it met the tolerance.
    let iterate = |start: Vec<f64>| -> Result<(Vec<f64>, bool)> {
        let mut x = start;
        for _ in 0..opts.max_iter {
            let y = lu.solve(Mat::from_fn(n, 1, |i, _| x[i]));
            let nrm = (0..n).map(|i| y[(i, 0)] * y[(i, 0)]).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::Singular("inverse iteration produced a non-finite vector".into()));
            }
            x = (0..n).map(|i| y[(i, 0)] / nrm).collect();
            if residual(&x) < opts.tol * anorm {
                return Ok((x, true));
            }
        }
        Ok((x, false))
    };
    let (mut w, converged) = iterate(vec![1.0; n])?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (alt, _) = iterate((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let cos = w.iter().zip(&alt).map(|(x, y)| x * y).sum::<f64>().abs();
    if cos.min(1.0).acos() > 1e-3 {
        return Err(Error::MultipleNullVectors);
    }
    if !converged {
        // When w is orthogonal to the constants (total volume equal to total
        // boundary measure) the zero eigenvalue is defective and inverse
        // iteration only creeps in; solve the bordered system instead.
        w = bordered_null_vector(a)?;
        if !(residual(&w) < opts.tol * anorm) {
            return Err(Error::NoConvergence(format!(
                "left null vector residual {:e} above tol {} after {} iterations",
                residual(&w) / anorm,
                opts.tol,
                opts.max_iter
            )));
        }
    }
    let (pos, neg) = w
        .iter()
        .zip(&a.row_kind)
        .filter(|(_, k)| **k == PointKind::Interior)
        .fold((0usize, 0usize), |(p, q), (v, _)| if *v > 0.0 { (p + 1, q) } else { (p, q + 1) });
    if neg > pos {
        w.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(w)
}

/// Solves `[A^T 1; e^T 0] [w; s] = [0; 1]` with `e` the interior indicator.
/// Constants span the right null space, so `1` lies outside the range of
/// `A^T` and the system is regular whenever the left null space is simple.
fn bordered_null_vector(a: &NeumannOperator) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, r) in a.rows.iter().enumerate() {
        for &(c, v) in r {
            *acc.entry((c, i)).or_insert(0.0) += v;
        }
    }
    let scale = a.norm_inf();
    for i in 0..n {
        acc.insert((i, n), scale);
        if a.row_kind[i] == PointKind::Interior {
            acc.insert((n, i), scale);
        }
    }
    let trips: Vec<Triplet<usize, usize, f64>> = acc.into_iter().map(|((r, c), v)| Triplet::new(r, c, v)).collect();
    let m = SparseColMat::try_new_from_triplets(n + 1, n + 1, &trips).map_err(|e| Error::Singular(format!("{e:?}")))?;
    let lu = m.sp_lu().map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
    let y = lu.solve(Mat::from_fn(n + 1, 1, |i, _| if i == n { scale } else { 0.0 }));
    let w: Vec<f64> = (0..n).map(|i| y[(i, 0)]).collect();
    let nrm = norm2(&w);
    if !(nrm.is_finite() && nrm > 0.0) {
        return Err(Error::Singular("bordered null-vector system is singular".into()));
    }
    Ok(w.iter().map(|v| v / nrm).collect())
}

/// Scaled quadrature weights, one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    /// Volume weight at interior points, surface weight at boundary points,
    /// raw scaled entry at interpolation points, zero at unused points.
    pub weights: Vec<f64>,
    pub kinds: Vec<PointKind>,
    pub boundary_id: Vec<Option<usize>>,
    pub scale: f64,
    /// Grid point used to fix the scale.
    pub reference: usize,
}

impl WeightVector {
    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.weights.len() {
            return Err(Error::ShapeMismatch { expected: self.weights.len(), found: f.len() });
        }
        Ok(())
    }

    pub fn integrate_volume(&self, f: &[f64]) -> Result<f64> {
        self.check(f)?;
        Ok(self.weights.iter().zip(&self.kinds).zip(f).filter(|((_, k), _)| **k == PointKind::Interior).map(|((w, _), v)| w * v).sum())
    }

    /// Surface integral over one labelled boundary, or all of them.
    pub fn integrate_surface(&self, f: &[f64], boundary: Option<usize>) -> Result<f64> {
        self.check(f)?;
        Ok((0..f.len())
            .filter(|&k| self.kinds[k] == PointKind::Boundary && (boundary.is_none() || self.boundary_id[k] == boundary))
            .map(|k| self.weights[k] * f[k])
            .sum())
    }

    pub fn volume_sum(&self) -> f64 {
        self.integrate_volume(&vec![1.0; self.weights.len()]).unwrap()
    }

    pub fn surface_sum(&self, boundary: Option<usize>) -> f64 {
        self.integrate_surface(&vec![1.0; self.weights.len()], boundary).unwrap()
    }

    /// Interior points with negative weight.
    pub fn negative_volume_weights(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&k| self.kinds[k] == PointKind::Interior && self.weights[k] < 0.0).collect()
    }
}

/// Required index distance of the reference point from overlap and boundary.
const REFERENCE_CLEARANCE: usize = 3;

/// Scales the raw null vector at an interior point far from any overlap and
/// splits it by point kind.
pub fn extract_weights(w: &[f64], grid: &CompositeGrid, op: &NeumannOperator) -> Result<WeightVector> {
    if w.len() != op.dim() {
        return Err(Error::ShapeMismatch { expected: op.dim(), found: w.len() });
    }
    let overlap = grid.overlap_points();
    let mut best: Option<(usize, usize)> = None;
    for k in 0..grid.len() {
        if grid.kinds[k] != PointKind::Interior {
            continue;
        }
        let (c, l) = grid.locate(k);
        let comp = &grid.components[c];
        let (i, j) = comp.logical(l);
        let periodic = matches!(comp.shape, ComponentShape::Polar { periodic: true, .. });
        let mut clearance = usize::MAX;
        // Distance to the physical boundary.
        match (comp.shape.clone(), j) {
            (ComponentShape::Segment { n, .. }, _) => clearance = clearance.min(i).min(n - i),
            (ComponentShape::Polar { nr, .. }, Some(j)) => clearance = clearance.min(j).min(nr - j),
            _ => {}
        }
        if !periodic {
            if let ComponentShape::Polar { m, .. } = comp.shape {
                clearance = clearance.min(i).min(m - i);
            }
        }
        for &o in &overlap {
            let (co, lo) = grid.locate(o);
            if co != c {
                continue;
            }
            let (io, jo) = comp.logical(lo);
            let di = i.abs_diff(io);
            let dj = match (j, jo) {
                (Some(a), Some(b)) => a.abs_diff(b),
                _ => 0,
            };
            clearance = clearance.min(di.max(dj));
        }
        if best.is_none_or(|(_, b)| clearance > b) {
            best = Some((k, clearance));
        }
    }
    let (reference, clearance) = best.ok_or_else(|| Error::InvalidGrid("no interior points".into()))?;
    if clearance < REFERENCE_CLEARANCE {
        return Err(Error::InvalidGrid(format!("no interior point at least {REFERENCE_CLEARANCE} cells from overlap and boundary")));
    }
    let (c, l) = grid.locate(reference);
    let raw = w[op.row_of_point[reference].expect("interior point has a row")];
    if raw == 0.0 {
        return Err(Error::Singular("null vector vanishes at the reference point".into()));
    }
    let scale = grid.components[c].cell_volume(l) / raw;
    let weights = (0..grid.len())
        .map(|k| match (grid.kinds[k], op.row_of_point[k]) {
            (PointKind::Boundary, Some(r)) => -scale * w[r],
            (_, Some(r)) => scale * w[r],
            (_, None) => 0.0,
        })
        .collect();
    Ok(WeightVector { weights, kinds: grid.kinds.clone(), boundary_id: grid.boundary_id.clone(), scale, reference })
}

/// Builds the operator, extracts the null vector and scales it.
pub fn compute_weights(grid: &CompositeGrid, opts: &NullVectorOptions) -> Result<(NeumannOperator, WeightVector)> {
    let op = build_neumann_operator(grid)?;
    let w = left_null_vector(&op, opts)?;
    let wv = extract_weights(&w, grid, &op)?;
    Ok((op, wv))
}

/// `w^T A` scaled back to equation numbering, relative to `|A| |w|`.
pub fn compatibility_residual(op: &NeumannOperator, wv: &WeightVector) -> f64 {
    let w: Vec<f64> = op
        .point_of_row
        .iter()
        .map(|&k| if wv.kinds[k] == PointKind::Boundary { -wv.weights[k] } else { wv.weights[k] })
        .collect();
    norm2(&op.apply_transpose(&w)) / (op.norm_inf() * norm2(&w))
}

/// Errors of area and inner/outer perimeter on a two-patch annulus.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AnnulusErrors {
    pub nr: usize,
    pub m: usize,
    pub area: f64,
    pub inner: f64,
    pub outer: f64,
    pub residual: f64,
    pub negative_weights: usize,
}

pub fn annulus_errors(r1: f64, r2: f64, nr: usize, m: usize, overlap_cells: usize) -> Result<AnnulusErrors> {
    let grid = CompositeGrid::two_patch_annulus(r1, r2, nr, m, overlap_cells)?;
    let (op, wv) = compute_weights(&grid, &NullVectorOptions::default())?;
    Ok(AnnulusErrors {
        nr,
        m,
        area: (wv.volume_sum() - PI * (r2 * r2 - r1 * r1)).abs(),
        inner: (wv.surface_sum(Some(0)) - 2.0 * PI * r1).abs(),
        outer: (wv.surface_sum(Some(1)) - 2.0 * PI * r2).abs(),
        residual: compatibility_residual(&op, &wv),
        negative_weights: wv.negative_volume_weights().len(),
    })
}

/// Observed orders `log2(e_k / e_{k+1})` for successive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
