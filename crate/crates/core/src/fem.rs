//! Bilinear finite elements on the unit square with homogeneous Dirichlet
//! conditions, midpoint quadrature of the diffusion coefficient, and a
//! multigrid-preconditioned CG solver.
//!
//! Vectors handed to and returned from the public API hold the interior
//! dofs only, ordered lexicographically with the first coordinate fastest.
//! Internally everything lives on the padded node grid `0..=n` per side,
//! whose boundary entries stay zero.

use crate::error::{invalid, Error, Result};
use crate::grid::{DyadicGrid, GridField};

/// Default relative residual tolerance of [`solve`].
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;

/// Uniform mesh of level `ℓ`: `n = 2^{ℓ+1}` cells per side, `h = 1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeshLevel {
    pub level: u32,
}

impl MeshLevel {
    pub fn new(level: u32) -> Self {
        MeshLevel { level }
    }

    pub fn cells(&self) -> usize {
        1 << (self.level + 1)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    /// Interior nodes per side, `n - 1`.
    pub fn interior(&self) -> usize {
        self.cells() - 1
    }

    pub fn dofs(&self) -> usize {
        self.interior() * self.interior()
    }

    /// Resolution of the midpoint grid carrying the cell coefficients.
    pub fn midpoint_resolution(&self) -> u32 {
        self.level + 1
    }

    pub fn midpoint_grid(&self) -> DyadicGrid {
        DyadicGrid::midpoint(self.midpoint_resolution())
    }

    pub fn coarser(&self) -> Option<MeshLevel> {
        self.level.checked_sub(1).map(MeshLevel::new)
    }

    fn width(&self) -> usize {
        self.cells() + 1
    }
}

/// The half-interval blocks of the one-dimensional stiffness and mass
/// matrices: `S` has `1/h` on the diagonal and `-1/h` below it, `M` has
/// `h/3` and `h/6`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Banded1D {
    pub s_diag: f64,
    pub s_sub: f64,
    pub m_diag: f64,
    pub m_sub: f64,
}

impl Banded1D {
    pub fn new(mesh: &MeshLevel) -> Self {
        let h = mesh.h();
        Banded1D {
            s_diag: 1.0 / h,
            s_sub: -1.0 / h,
            m_diag: h / 3.0,
            m_sub: h / 6.0,
        }
    }

    /// One-cell stiffness and mass entries between local nodes `p, q ∈ {0, 1}`.
    fn cell(&self, p: usize, q: usize) -> (f64, f64) {
        if p == q {
            (self.s_diag, self.m_diag)
        } else {
            (self.s_sub, self.m_sub)
        }
    }

    /// Entry of the cell stiffness `S⊗M + M⊗S` between local corners `p`
    /// and `q` of one square cell.
    fn local(&self, p: (usize, usize), q: (usize, usize)) -> f64 {
        let (s1, m1) = self.cell(p.0, q.0);
        let (s2, m2) = self.cell(p.1, q.1);
        s1 * m2 + m1 * s2
    }
}

/// Symmetric 9-point operator on the interior nodes of one mesh. Only the
/// couplings to the east, north, north-east and north-west neighbours are
/// stored; the others follow by symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilMatrix {
    mesh: MeshLevel,
    cell_coefficients: Vec<f64>,
    center: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
    north_east: Vec<f64>,
    north_west: Vec<f64>,
}

/// Stiffness matrix for the cell coefficients on the midpoint grid of `mesh`.
pub fn assemble_stiffness(mesh: &MeshLevel, coefficient: &GridField) -> Result<StencilMatrix> {
    if coefficient.dim != 2 || coefficient.grid != mesh.midpoint_grid() {
        return Err(invalid(format!(
            "coefficient must live on the 2-D midpoint grid of resolution {}",
            mesh.midpoint_resolution()
        )));
    }
    if let Some(bad) = coefficient.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("diffusion coefficient value {bad} is not positive")));
    }
    Ok(StencilMatrix::from_cells(*mesh, coefficient.values.clone()))
}

impl StencilMatrix {
    /// Assembles from cell coefficients indexed `c1 + c2·n`.
    fn from_cells(mesh: MeshLevel, cells: Vec<f64>) -> Self {
        let n = mesh.cells();
        let w = mesh.width();
        let b = Banded1D::new(&mesh);
        let a = |c1: usize, c2: usize| cells[c1 + c2 * n];
        let size = w * w;
        let mut m = StencilMatrix {
            mesh,
            cell_coefficients: Vec::new(),
            center: vec![0.0; size],
            east: vec![0.0; size],
            north: vec![0.0; size],
            north_east: vec![0.0; size],
            north_west: vec![0.0; size],
        };
        for i2 in 1..n {
            for i1 in 1..n {
                let p = i1 + i2 * w;
                // cells around node (i1, i2) and the node's corner within each
                m.center[p] = a(i1 - 1, i2 - 1) * b.local((1, 1), (1, 1))
                    + a(i1, i2 - 1) * b.local((0, 1), (0, 1))
                    + a(i1 - 1, i2) * b.local((1, 0), (1, 0))
                    + a(i1, i2) * b.local((0, 0), (0, 0));
                if i1 + 1 < n {
                    m.east[p] = a(i1, i2 - 1) * b.local((0, 1), (1, 1))
                        + a(i1, i2) * b.local((0, 0), (1, 0));
                }
                if i2 + 1 < n {
                    m.north[p] = a(i1 - 1, i2) * b.local((1, 0), (1, 1))
                        + a(i1, i2) * b.local((0, 0), (0, 1));
                    if i1 + 1 < n {
                        m.north_east[p] = a(i1, i2) * b.local((0, 0), (1, 1));
                    }
                    if i1 > 1 {
                        m.north_west[p] = a(i1 - 1, i2) * b.local((1, 0), (0, 1));
                    }
                }
            }
        }
        m.cell_coefficients = cells;
        m
    }

    /// `S₂D`, the stiffness matrix of the unit coefficient.
    pub fn laplacian(mesh: &MeshLevel) -> Self {
        Self::from_cells(*mesh, vec![1.0; mesh.cells() * mesh.cells()])
    }

    pub fn mesh(&self) -> &MeshLevel {
        &self.mesh
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    /// Rediscretization on the next coarser mesh with each coarse cell
    /// carrying the mean of its four children.
    fn coarsened(&self) -> Option<StencilMatrix> {
        let coarse = self.mesh.coarser()?;
        let nc = coarse.cells();
        let nf = self.mesh.cells();
        let f = &self.cell_coefficients;
        let cells = (0..nc * nc)
            .map(|idx| {
                let (c1, c2) = (2 * (idx % nc), 2 * (idx / nc));
                0.25 * (f[c1 + c2 * nf] + f[c1 + 1 + c2 * nf] + f[c1 + (c2 + 1) * nf] + f[c1 + 1 + (c2 + 1) * nf])
            })
            .collect();
        Some(StencilMatrix::from_cells(coarse, cells))
    }

    /// `y = A x` on padded vectors.
    fn apply_padded(&self, x: &[f64], y: &mut [f64]) {
        let n = self.mesh.cells();
        let w = self.mesh.width();
        for i2 in 1..n {
            for i1 in 1..n {
                let p = i1 + i2 * w;
                y[p] = self.center[p] * x[p] + self.offdiag_sum(p, w, x);
            }
        }
    }

    #[inline]
    fn offdiag_sum(&self, p: usize, w: usize, x: &[f64]) -> f64 {
        self.east[p] * x[p + 1]
            + self.east[p - 1] * x[p - 1]
            + self.north[p] * x[p + w]
            + self.north[p - w] * x[p - w]
            + self.north_east[p] * x[p + w + 1]
            + self.north_east[p - w - 1] * x[p - w - 1]
            + self.north_west[p] * x[p + w - 1]
            + self.north_west[p - w + 1] * x[p - w + 1]
    }

    /// `A x` for an interior dof vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let xp = pad(&self.mesh, x);
        let mut yp = vec![0.0; xp.len()];
        self.apply_padded(&xp, &mut yp);
        unpad(&self.mesh, &yp)
    }

    /// `xᵀ A x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }

    /// Dense copy, for small meshes and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let dofs = self.dofs();
        (0..dofs)
            .map(|i| {
                let mut e = vec![0.0; dofs];
                e[i] = 1.0;
                self.apply(&e)
            })
            .collect()
    }

    fn gauss_seidel(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let n = self.mesh.cells();
        let w = self.mesh.width();
        let mut visit = |i1: usize, i2: usize| {
            let p = i1 + i2 * w;
            x[p] = (b[p] - self.offdiag_sum(p, w, x)) / self.center[p];
        };
        if forward {
            for i2 in 1..n {
                for i1 in 1..n {
                    visit(i1, i2);
                }
            }
        } else {
            for i2 in (1..n).rev() {
                for i1 in (1..n).rev() {
                    visit(i1, i2);
                }
            }
        }
    }
}

fn pad(mesh: &MeshLevel, x: &[f64]) -> Vec<f64> {
    let (n, w, m) = (mesh.cells(), mesh.width(), mesh.interior());
    let mut out = vec![0.0; w * w];
    for i2 in 1..n {
        out[1 + i2 * w..n + i2 * w].copy_from_slice(&x[(i2 - 1) * m..i2 * m]);
    }
    out
}

fn unpad(mesh: &MeshLevel, x: &[f64]) -> Vec<f64> {
    let (n, w) = (mesh.cells(), mesh.width());
    let mut out = Vec::with_capacity(mesh.dofs());
    for i2 in 1..n {
        out.extend_from_slice(&x[1 + i2 * w..n + i2 * w]);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Load vector of the constant source `f`: every entry `f h²`.
pub fn assemble_load(mesh: &MeshLevel, f: f64) -> Vec<f64> {
    vec![f * mesh.h() * mesh.h(); mesh.dofs()]
}

/// Bilinear interpolation from the padded coarse grid to the padded fine
/// grid (`fine` is overwritten on the interior).
fn prolong_padded(coarse: &MeshLevel, xc: &[f64], xf: &mut [f64]) {
    let nf = 2 * coarse.cells();
    let (wc, wf) = (coarse.width(), nf + 1);
    for i2 in 1..nf {
        for i1 in 1..nf {
            let (a1, b1) = (i1 / 2, i1.div_ceil(2));
            let (a2, b2) = (i2 / 2, i2.div_ceil(2));
            let v = xc[a1 + a2 * wc] + xc[b1 + a2 * wc] + xc[a1 + b2 * wc] + xc[b1 + b2 * wc];
            xf[i1 + i2 * wf] = 0.25 * v;
        }
    }
}

/// Transpose of [`prolong_padded`].
fn restrict_padded(coarse: &MeshLevel, rf: &[f64], rc: &mut [f64]) {
    let nc = coarse.cells();
    let (wc, wf) = (coarse.width(), 2 * nc + 1);
    for c2 in 1..nc {
        for c1 in 1..nc {
            let mut acc = 0.0;
            for (d2, w2) in [(-1i64, 0.5), (0, 1.0), (1, 0.5)] {
                for (d1, w1) in [(-1i64, 0.5), (0, 1.0), (1, 0.5)] {
                    let f1 = (2 * c1 as i64 + d1) as usize;
                    let f2 = (2 * c2 as i64 + d2) as usize;
                    acc += w1 * w2 * rf[f1 + f2 * wf];
                }
            }
            rc[c1 + c2 * wc] = acc;
        }
    }
}

/// Interpolates a dof vector of `coarse` onto the mesh `levels` finer.
pub fn prolongate(coarse: &MeshLevel, x: &[f64], levels: u32) -> Vec<f64> {
    let mut mesh = *coarse;
    let mut cur = pad(&mesh, x);
    for _ in 0..levels {
        let fine = MeshLevel::new(mesh.level + 1);
        let mut next = vec![0.0; fine.width() * fine.width()];
        prolong_padded(&mesh, &cur, &mut next);
        cur = next;
        mesh = fine;
    }
    unpad(&mesh, &cur)
}

/// Geometric multigrid hierarchy, finest operator last.
struct Multigrid {
    levels: Vec<StencilMatrix>,
}

impl Multigrid {
    fn new(a: &StencilMatrix) -> Self {
        let mut levels = vec![a.clone()];
        while let Some(c) = levels.last().and_then(StencilMatrix::coarsened) {
            levels.push(c);
        }
        levels.reverse();
        Multigrid { levels }
    }

    /// One symmetric V(1,1)-cycle with zero initial guess: `x ≈ A⁻¹ b`.
    fn vcycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let a = &self.levels[k];
        x.iter_mut().for_each(|v| *v = 0.0);
        if k == 0 {
            // level 0 has the single dof at the centre node
            let p = 1 + a.mesh.width();
            x[p] = b[p] / a.center[p];
            return;
        }
        a.gauss_seidel(b, x, true);
        let mut r = vec![0.0; x.len()];
        a.apply_padded(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let coarse = &self.levels[k - 1];
        let wc = coarse.mesh.width();
        let mut rc = vec![0.0; wc * wc];
        restrict_padded(&coarse.mesh, &r, &mut rc);
        let mut ec = vec![0.0; wc * wc];
        self.vcycle(k - 1, &rc, &mut ec);
        let mut ef = vec![0.0; x.len()];
        prolong_padded(&coarse.mesh, &ec, &mut ef);
        for (xi, ei) in x.iter_mut().zip(&ef) {
            *xi += ei;
        }
        a.gauss_seidel(b, x, false);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSolution {
    pub mesh: MeshLevel,
    pub u: Vec<f64>,
}

impl DiscreteSolution {
    /// Nodal values on the `2^{ℓ+1}` lattice grid, zero on the boundary.
    pub fn to_lattice_field(&self) -> GridField {
        let n = self.mesh.cells();
        let m = self.mesh.interior();
        let mut values = vec![0.0; n * n];
        for i2 in 1..n {
            for i1 in 1..n {
                values[i1 + i2 * n] = self.u[(i1 - 1) + (i2 - 1) * m];
            }
        }
        GridField::from_values(2, DyadicGrid::lattice(self.mesh.midpoint_resolution()), values)
            .expect("extent matches the mesh")
    }
}

/// Solves `A u = F` to relative residual `tol` by conjugate gradients
/// preconditioned with one multigrid V-cycle per iteration.
pub fn solve(a: &StencilMatrix, f: &[f64], tol: f64) -> Result<(DiscreteSolution, SolveStats)> {
    let mesh = a.mesh;
    if f.len() != mesh.dofs() {
        return Err(invalid(format!("load has {} entries, expected {}", f.len(), mesh.dofs())));
    }
    let b = pad(&mesh, f);
    let norm_b = dot(&b, &b).sqrt();
    let mut x = vec![0.0; b.len()];
    if norm_b == 0.0 {
        let sol = DiscreteSolution { mesh, u: unpad(&mesh, &x) };
        return Ok((sol, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mg = Multigrid::new(a);
    let top = mg.levels.len() - 1;
    let mut r = b.clone();
    let mut z = vec![0.0; b.len()];
    mg.vcycle(top, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; b.len()];
    let mut res = 1.0;
    for it in 1..=MAX_ITERATIONS {
        a.apply_padded(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = dot(&r, &r).sqrt() / norm_b;
        if res <= tol {
            // confirm against the true residual
            a.apply_padded(&x, &mut q);
            let true_res = b.iter().zip(&q).map(|(bi, qi)| (bi - qi).powi(2)).sum::<f64>().sqrt() / norm_b;
            if true_res <= tol {
                let sol = DiscreteSolution { mesh, u: unpad(&mesh, &x) };
                return Ok((sol, SolveStats { iterations: it, relative_residual: true_res }));
            }
            for i in 0..r.len() {
                r[i] = b[i] - q[i];
            }
        }
        mg.vcycle(top, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual: res,
    })
}

/// Assembles and solves the level-`ℓ` problem with source `f ≡ 1`.
pub fn solve_poisson(mesh: &MeshLevel, coefficient: &GridField) -> Result<DiscreteSolution> {
    let a = assemble_stiffness(mesh, coefficient)?;
    let f = assemble_load(mesh, 1.0);
    Ok(solve(&a, &f, DEFAULT_TOLERANCE)?.0)
}

/// `Ψ(u) = ‖∇u‖_{L²}`, integrated exactly as `sqrt(uᵀ S₂D u)`.
pub fn qoi_gradient_norm(u: &DiscreteSolution) -> f64 {
    StencilMatrix::laplacian(&u.mesh).energy(&u.u).max(0.0).sqrt()
}

/// `‖v‖_{L²}` of the bilinear function with nodal values `v`.
pub fn l2_norm(mesh: &MeshLevel, v: &[f64]) -> f64 {
    let h = mesh.h();
    let m = mesh.interior();
    let (d, o) = (2.0 * h / 3.0, h / 6.0);
    let mass_1d = |line: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let mut s = d * line[i];
                if i > 0 {
                    s += o * line[i - 1];
                }
                if i + 1 < m {
                    s += o * line[i + 1];
                }
                s
            })
            .collect()
    };
    // (M⊗M) v: apply M along the first coordinate, then along the second
    let mut tmp = Vec::with_capacity(v.len());
    for row in v.chunks(m) {
        tmp.extend(mass_1d(row));
    }
    let mut mv = vec![0.0; v.len()];
    let mut col = vec![0.0; m];
    for i1 in 0..m {
        for i2 in 0..m {
            col[i2] = tmp[i1 + i2 * m];
        }
        for (i2, val) in mass_1d(&col).into_iter().enumerate() {
            mv[i1 + i2 * m] = val;
        }
    }
    dot(v, &mv).max(0.0).sqrt()
}

/// `|v|_{H¹}` of the bilinear function with nodal values `v`.
pub fn h1_seminorm(mesh: &MeshLevel, v: &[f64]) -> f64 {
    StencilMatrix::laplacian(mesh).energy(v).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(mesh: &MeshLevel, mut f: impl FnMut(usize, usize) -> f64) -> GridField {
        let n = mesh.cells();
        let values = (0..n * n).map(|i| f(i % n, i / n)).collect();
        GridField::from_values(2, mesh.midpoint_grid(), values).unwrap()
    }

    fn random_field(mesh: &MeshLevel, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        field(mesh, |_, _| (rng.random::<f64>() * 4.0 - 2.0).exp())
    }

    /// Dense stiffness matrix by 3×3 Gauss quadrature of `a ∇φ_i·∇φ_j` over
    /// every cell, with the bilinear basis written out explicitly.
    fn brute_force_stiffness(mesh: &MeshLevel, a: &GridField) -> Vec<Vec<f64>> {
        let n = mesh.cells();
        let m = mesh.interior();
        let h = mesh.h();
        let gp = [
            (0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
            (0.5, 8.0 / 18.0),
            (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
        ];
        let mut dense = vec![vec![0.0; m * m]; m * m];
        for c2 in 0..n {
            for c1 in 0..n {
                let coef = a.values[c1 + c2 * n];
                let corners: Vec<(usize, usize)> = vec![(c1, c2), (c1 + 1, c2), (c1, c2 + 1), (c1 + 1, c2 + 1)];
                // gradient of the hat at corner (q1, q2) at local point (s, t)
                let grad = |q: (usize, usize), s: f64, t: f64| {
                    let (l1, dl1) = if q.0 == c1 { (1.0 - s, -1.0 / h) } else { (s, 1.0 / h) };
                    let (l2, dl2) = if q.1 == c2 { (1.0 - t, -1.0 / h) } else { (t, 1.0 / h) };
                    (dl1 * l2, l1 * dl2)
                };
                for &p in &corners {
                    for &q in &corners {
                        if p.0 == 0 || p.0 == n || p.1 == 0 || p.1 == n {
                            continue;
                        }
                        if q.0 == 0 || q.0 == n || q.1 == 0 || q.1 == n {
                            continue;
                        }
                        let mut v = 0.0;
                        for &(s, ws) in &gp {
                            for &(t, wt) in &gp {
                                let gpv = grad(p, s, t);
                                let gqv = grad(q, s, t);
                                v += ws * wt * (gpv.0 * gqv.0 + gpv.1 * gqv.1);
                            }
                        }
                        let i = (p.0 - 1) + (p.1 - 1) * m;
                        let j = (q.0 - 1) + (q.1 - 1) * m;
                        dense[i][j] += coef * v * h * h;
                    }
                }
            }
        }
        dense
    }

    fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    l[i][j] = (a[i][i] - s).sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
        }
        x
    }

    #[test]
    fn mesh_geometry() {
        let m = MeshLevel::new(3);
        assert_eq!(m.cells(), 16);
        assert_eq!(m.h() * m.cells() as f64, 1.0);
        assert_eq!(m.dofs(), 225);
        let b = Banded1D::new(&m);
        assert_eq!((b.s_diag, b.s_sub), (16.0, -16.0));
        assert_eq!((b.m_diag, b.m_sub), (1.0 / 48.0, 1.0 / 96.0));
    }

    #[test]
    fn unit_coefficient_stencil() {
        let mesh = MeshLevel::new(2);
        let a = StencilMatrix::laplacian(&mesh);
        let dense = a.to_dense();
        let m = mesh.interior();
        for i in 0..mesh.dofs() {
            assert!((dense[i][i] - 8.0 / 3.0).abs() < 1e-14);
        }
        // interior node (3,3): E, N, NE neighbours
        let i = 2 + 2 * m;
        assert!((dense[i][i + 1] + 1.0 / 3.0).abs() < 1e-14);
        assert!((dense[i][i + m] + 1.0 / 3.0).abs() < 1e-14);
        assert!((dense[i][i + m + 1] + 1.0 / 3.0).abs() < 1e-14);
        assert!((dense[i][i + m - 1] + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matches_brute_force_assembly() {
        let mesh = MeshLevel::new(2);
        let a = random_field(&mesh, 4);
        let fast = assemble_stiffness(&mesh, &a).unwrap().to_dense();
        let slow = brute_force_stiffness(&mesh, &a);
        for i in 0..mesh.dofs() {
            for j in 0..mesh.dofs() {
                assert!((fast[i][j] - slow[i][j]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        let mesh = MeshLevel::new(1);
        assert!(assemble_stiffness(&mesh, &field(&mesh, |i, _| if i == 0 { 0.0 } else { 1.0 })).is_err());
        let wrong = GridField::zeros(2, DyadicGrid::midpoint(3));
        assert!(assemble_stiffness(&mesh, &wrong).is_err());
    }

    #[test]
    fn load_vector() {
        let mesh = MeshLevel::new(2);
        assert!(assemble_load(&mesh, 1.0).iter().all(|&v| v == 1.0 / 64.0));
        assert!(assemble_load(&mesh, 0.0).iter().all(|&v| v == 0.0));
        assert!(assemble_load(&mesh, 3.0).iter().all(|&v| v == 3.0 / 64.0));
    }

    #[test]
    fn scalar_solves() {
        let mesh = MeshLevel::new(0);
        assert_eq!(mesh.dofs(), 1);
        let a = StencilMatrix::laplacian(&mesh);
        let (u, _) = solve(&a, &[1.0 / 16.0], 1e-12).unwrap();
        assert!((u.u[0] - 3.0 / 128.0).abs() < 1e-15);
        let u = solve_poisson(&mesh, &field(&mesh, |_, _| 1.0)).unwrap();
        assert!((u.u[0] - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = MeshLevel::new(3);
        let a = assemble_stiffness(&mesh, &random_field(&mesh, 1)).unwrap();
        let (u, stats) = solve(&a, &vec![0.0; mesh.dofs()], 1e-10).unwrap();
        assert!(u.u.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
        assert_eq!(qoi_gradient_norm(&u), 0.0);
    }

    #[test]
    fn agrees_with_dense_cholesky() {
        let mesh = MeshLevel::new(2);
        let coef = random_field(&mesh, 7);
        let a = assemble_stiffness(&mesh, &coef).unwrap();
        let f = assemble_load(&mesh, 1.0);
        let (u, stats) = solve(&a, &f, 1e-12).unwrap();
        let exact = cholesky_solve(&a.to_dense(), &f);
        for (x, y) in u.u.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-12 * exact.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn residual_contract_on_rough_coefficient() {
        let mesh = MeshLevel::new(6);
        let coef = random_field(&mesh, 3);
        let a = assemble_stiffness(&mesh, &coef).unwrap();
        let f = assemble_load(&mesh, 1.0);
        let (u, stats) = solve(&a, &f, 1e-10).unwrap();
        let au = a.apply(&u.u);
        let res = au.iter().zip(&f).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            / f.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(res <= 1e-10, "{res}");
        assert!(stats.iterations < 60, "{}", stats.iterations);
    }

    #[test]
    fn prolongation_reproduces_bilinear_functions() {
        // g(x, y) = x (1 - x) y (1 - y) is not bilinear, but its coarse
        // interpolant is, and must be reproduced exactly on the fine mesh.
        let coarse = MeshLevel::new(2);
        let m = coarse.interior();
        let h = coarse.h();
        let x: Vec<f64> = (0..coarse.dofs())
            .map(|i| {
                let (a, b) = (((i % m) + 1) as f64 * h, ((i / m) + 1) as f64 * h);
                a * (1.0 - a) * b * (1.0 - b)
            })
            .collect();
        let fine = prolongate(&coarse, &x, 1);
        assert!((h1_seminorm(&MeshLevel::new(3), &fine) - h1_seminorm(&coarse, &x)).abs() < 1e-13);
        assert!((l2_norm(&MeshLevel::new(3), &fine) - l2_norm(&coarse, &x)).abs() < 1e-13);
    }

    #[test]
    fn l2_norm_of_single_hat() {
        // ‖φ_i‖² = (2h/3)² for a tensor hat
        let mesh = MeshLevel::new(2);
        let mut v = vec![0.0; mesh.dofs()];
        v[10] = 1.0;
        let h = mesh.h();
        assert!((l2_norm(&mesh, &v) - 2.0 * h / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lattice_dump_has_zero_boundary() {
        let mesh = MeshLevel::new(2);
        let u = solve_poisson(&mesh, &field(&mesh, |_, _| 1.0)).unwrap();
        let g = u.to_lattice_field();
        assert_eq!(g.side(), 8);
        for i in 0..8 {
            assert_eq!(g.get(&[0, i]), 0.0);
            assert_eq!(g.get(&[i, 0]), 0.0);
        }
        assert!(g.get(&[4, 4]) > 0.0);
    }

    proptest! {
        #[test]
        fn symmetric_and_scaled(seed in any::<u64>(), c in 0.1f64..10.0) {
            let mesh = MeshLevel::new(2);
            let coef = random_field(&mesh, seed);
            let a = assemble_stiffness(&mesh, &coef).unwrap().to_dense();
            for i in 0..mesh.dofs() {
                prop_assert!(a[i][i] > 0.0);
                prop_assert!(a[i].iter().filter(|v| **v != 0.0).count() <= 9);
                for j in 0..mesh.dofs() {
                    prop_assert_eq!(a[i][j], a[j][i]);
                }
            }
            let scaled = assemble_stiffness(&mesh, &coef.map(|v| c * v)).unwrap().to_dense();
            let unit = StencilMatrix::laplacian(&mesh).to_dense();
            let const_c = assemble_stiffness(&mesh, &field(&mesh, |_, _| c)).unwrap().to_dense();
            for i in 0..mesh.dofs() {
                for j in 0..mesh.dofs() {
                    prop_assert!((scaled[i][j] - c * a[i][j]).abs() <= 1e-12 * c * a[i][j].abs().max(1.0));
                    prop_assert!((const_c[i][j] - c * unit[i][j]).abs() <= 1e-12 * c);
                }
            }
        }

        #[test]
        fn coercive(seed in any::<u64>()) {
            let mesh = MeshLevel::new(3);
            let a = assemble_stiffness(&mesh, &random_field(&mesh, seed)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let x: Vec<f64> = (0..mesh.dofs()).map(|_| rng.random::<f64>() - 0.5).collect();
            prop_assert!(a.energy(&x) > 0.0);
        }

        #[test]
        fn qoi_is_homogeneous(seed in any::<u64>(), c in -5.0f64..5.0) {
            let mesh = MeshLevel::new(3);
            let u = solve_poisson(&mesh, &random_field(&mesh, seed)).unwrap();
            let scaled = DiscreteSolution { mesh, u: u.u.iter().map(|v| c * v).collect() };
            let (a, b) = (qoi_gradient_norm(&scaled), c.abs() * qoi_gradient_norm(&u));
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }
}
