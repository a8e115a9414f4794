//! Derivatives and energies of the angle and curvature maps.
//!
//! The triangle Jacobian ∂θ/∂u is assembled analytically by the chain rule
//! (cosine law in the lengths, length formula in the factors, coordinate
//! change f(u)). The surface Jacobian Λ = ∂K/∂u is stored sparsely with the
//! vertex-adjacency pattern; the combinatorial Laplacian is Δ = -Λ and is
//! only ever applied, never stored.
//!
//! Energies are line integrals of the closed 1-forms Σθ̃ du and Σ(K̃ - K̄) du
//! along straight segments, evaluated by adaptive Simpson quadrature that
//! splits at degeneracy crossings.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{
    self, classify_opposite, df_du, euclidean_area, extended_angles, face_metrics,
    strict_angles, ConformalState, DegeneracyClass, EdgeMetric, Geometry,
};
use crate::quadrature;
use crate::surface::{FaceWeights, TriangulatedSurface, WeightConfig};

/// Absolute tolerance of every energy quadrature.
pub const ENERGY_TOL: f64 = 1e-10;

/// `0[a][b]` = ∂θ_a/∂u_b for the corners of one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleJacobian(pub [[f64; 3]; 3]);

impl TriangleJacobian {
    pub fn asymmetry(&self) -> f64 {
        let m = &self.0;
        (m[0][1] - m[1][0])
            .abs()
            .max((m[0][2] - m[2][0]).abs())
            .max((m[1][2] - m[2][1]).abs())
    }

    pub fn row_sums(&self) -> [f64; 3] {
        self.0.map(|r| r[0] + r[1] + r[2])
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let m = DMatrix::from_fn(3, 3, |i, j| 0.5 * (self.0[i][j] + self.0[j][i]));
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2]]
    }
}

/// ∂θ_a/∂L_e with `L` indexed by opposite corner.
fn angle_length_derivatives(geometry: Geometry, m: &[EdgeMetric; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    match geometry {
        Geometry::Euclidean => {
            let l = m.map(|e| e.l);
            let area = euclidean_area(l);
            for a in 0..3 {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                let (la2, lb2, lc2) = (l[a] * l[a], l[b] * l[b], l[c] * l[c]);
                d[a][a] = l[a] / (2.0 * area);
                d[a][b] = -(la2 + lb2 - lc2) / (4.0 * area * l[b]);
                d[a][c] = -(la2 + lc2 - lb2) / (4.0 * area * l[c]);
            }
        }
        Geometry::Hyperbolic => {
            let x = m.map(|e| e.x);
            let gram = 2.0 * (x[0] * x[1] + x[0] * x[2] + x[1] * x[2])
                - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
                + 2.0 * x[0] * x[1] * x[2];
            let root = gram.max(0.0).sqrt();
            for a in 0..3 {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                // ch_a ch_b - ch_c and ch_a ch_c - ch_b with ch = 1 + x.
                let ab = x[a] + x[b] - x[c] + x[a] * x[b];
                let ac = x[a] + x[c] - x[b] + x[a] * x[c];
                d[a][a] = m[a].sh / root;
                d[a][b] = -ab / (m[b].sh * root);
                d[a][c] = -ac / (m[c].sh * root);
            }
        }
    }
    d
}

/// ∂L_e/∂u_v for the edges of one face.
fn length_coordinate_derivatives(
    geometry: Geometry,
    fw: &FaceWeights,
    f: [f64; 3],
    m: &[EdgeMetric; 3],
) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    let scale = std::array::from_fn::<f64, 3, _>(|v| df_du(geometry, fw.epsilon[v], f[v]));
    for e in 0..3 {
        let (s, t) = ((e + 1) % 3, (e + 2) % 3);
        for (v, w) in [(s, t), (t, s)] {
            let dl = match geometry {
                Geometry::Euclidean => {
                    (fw.eps(v) * (2.0 * f[v]).exp() + fw.eta[e] * (f[v] + f[w]).exp()) / m[e].l
                }
                Geometry::Hyperbolic => {
                    let (sv, sw) = (f[v].exp(), f[w].exp());
                    let cv = (1.0 + fw.eps(v) * sv * sv).sqrt();
                    let cw = (1.0 + fw.eps(w) * sw * sw).sqrt();
                    (fw.eps(v) * sv * sv * cw / cv + fw.eta[e] * sv * sw) / m[e].sh
                }
            };
            d[e][v] = dl * scale[v];
        }
    }
    d
}

pub(crate) fn face_jacobian(
    geometry: Geometry,
    fw: &FaceWeights,
    f: [f64; 3],
    m: &[EdgeMetric; 3],
) -> [[f64; 3]; 3] {
    let da = angle_length_derivatives(geometry, m);
    let dl = length_coordinate_derivatives(geometry, fw, f, m);
    let mut j = [[0.0; 3]; 3];
    for a in 0..3 {
        for v in 0..3 {
            j[a][v] = (0..3).map(|e| da[a][e] * dl[e][v]).sum();
        }
    }
    j
}

fn corner_factors(geometry: Geometry, fw: &FaceWeights, u: [f64; 3]) -> Result<[f64; 3]> {
    let mut f = [0.0; 3];
    for a in 0..3 {
        f[a] = geometry::u_to_f(geometry, fw.epsilon[a], u[a])?;
    }
    Ok(f)
}

pub fn triangle_jacobian(
    geometry: Geometry,
    fw: &FaceWeights,
    u: [f64; 3],
) -> Result<TriangleJacobian> {
    let f = corner_factors(geometry, fw, u)?;
    let m = face_metrics(geometry, fw, f)?;
    if classify_opposite(m.map(|e| e.l)).is_degenerate() {
        return Err(Error::DegenerateTriangle);
    }
    Ok(TriangleJacobian(face_jacobian(geometry, fw, f, &m)))
}

/// Sparse symmetric Λ = ∂K/∂u in compressed-row form. Row `i` holds the
/// diagonal and the neighbours of vertex `i`, columns ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureJacobian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CurvatureJacobian {
    fn with_pattern(surface: &TriangulatedSurface) -> Self {
        let n = surface.vertex_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let mut row: Vec<usize> = surface.neighbors(i).to_vec();
            row.push(i);
            row.sort_unstable();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Λx.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    /// Δx = -Λx.
    pub fn apply_laplacian(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x).into_iter().map(|v| -v).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }

    /// All eigenvalues of the (symmetrized) matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.to_dense();
        let sym = (&d + d.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest eigenvalue on the subspace where the flow lives: the
    /// hyperplane orthogonal to the all-ones vector for Euclidean geometry,
    /// the whole space for hyperbolic geometry.
    pub fn min_restricted_eigenvalue(&self, geometry: Geometry) -> f64 {
        match geometry {
            Geometry::Hyperbolic => self.eigenvalues()[0],
            Geometry::Euclidean => {
                // Lift the kernel direction above the spectrum.
                let d = self.to_dense();
                let shift = 1.0 + d.diagonal().iter().map(|v| v.abs()).sum::<f64>();
                let n = self.n as f64;
                let lifted = (&d + d.transpose()) * 0.5
                    + DMatrix::from_element(self.n, self.n, shift / n);
                SymmetricEigen::new(lifted)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Dense Cholesky factorization, `None` if the matrix is not positive
    /// definite.
    pub fn cholesky(&self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.to_dense().cholesky()
    }
}

pub fn curvature_jacobian(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
) -> Result<CurvatureJacobian> {
    curvature_jacobian_with(Exec::default(), surface, weights, state)
}

pub fn curvature_jacobian_with(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
) -> Result<CurvatureJacobian> {
    assemble_jacobian(exec, surface, weights, state.geometry(), state.u())
}

pub(crate) fn assemble_jacobian(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    u: &[f64],
) -> Result<CurvatureJacobian> {
    let f = geometry::factors_from_u(geometry, weights.epsilon(), u)?;
    let edges = geometry::edge_metrics(exec, surface, weights, geometry, &f)?;
    let blocks = exec.try_map(surface.face_count(), |fi| {
        let m = surface.face_edges(fi).map(|e| edges[e]);
        if classify_opposite(m.map(|e| e.l)).is_degenerate() {
            return Err(Error::DegenerateFace { face: fi });
        }
        let vs = surface.faces()[fi];
        let fw = weights.face(surface, fi);
        Ok(face_jacobian(geometry, &fw, vs.map(|v| f[v]), &m))
    })?;
    let mut jac = CurvatureJacobian::with_pattern(surface);
    for (fi, block) in blocks.iter().enumerate() {
        let vs = surface.faces()[fi];
        for a in 0..3 {
            for b in 0..3 {
                let k = jac.slot(vs[a], vs[b]).expect("face vertices are adjacent");
                jac.vals[k] -= block[a][b];
            }
        }
    }
    Ok(jac)
}

/// Angles of one face at a point of a segment, as the energy integrand sees
/// them.
fn face_angles_at(
    geometry: Geometry,
    fw: &FaceWeights,
    u: [f64; 3],
    extended: bool,
) -> Result<(DegeneracyClass, [f64; 3])> {
    let f = corner_factors(geometry, fw, u)?;
    let m = face_metrics(geometry, fw, f)?;
    if extended {
        extended_angles(geometry, &m)
    } else {
        strict_angles(geometry, &m).map(|a| (DegeneracyClass::Nondegenerate, a))
    }
}

fn face_class_at(geometry: Geometry, fw: &FaceWeights, u: [f64; 3]) -> Result<DegeneracyClass> {
    let f = corner_factors(geometry, fw, u)?;
    let m = face_metrics(geometry, fw, f)?;
    Ok(classify_opposite(m.map(|e| e.l)))
}

const WALL_SAMPLES: usize = 64;

/// Parameters in (0, 1) where the face changes degeneracy class along
/// `base + s * dir`, located by sampling and bisection.
fn wall_crossings(
    geometry: Geometry,
    fw: &FaceWeights,
    base: [f64; 3],
    dir: [f64; 3],
) -> Result<Vec<f64>> {
    let at = |s: f64| std::array::from_fn::<f64, 3, _>(|a| base[a] + s * dir[a]);
    let mut out = Vec::new();
    let mut prev_s = 0.0;
    let mut prev = face_class_at(geometry, fw, at(0.0))?;
    for k in 1..=WALL_SAMPLES {
        let s = k as f64 / WALL_SAMPLES as f64;
        let cur = face_class_at(geometry, fw, at(s))?;
        if cur != prev {
            let (mut lo, mut hi) = (prev_s, s);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if face_class_at(geometry, fw, at(mid))? == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(hi);
        }
        prev = cur;
        prev_s = s;
    }
    Ok(out)
}

/// ∫ θ_i du_i + θ_j du_j + θ_k du_k along the segment from `base` to `u`.
///
/// Without `extended` the whole segment must stay nondegenerate.
pub fn triangle_energy(
    geometry: Geometry,
    fw: &FaceWeights,
    u: [f64; 3],
    base: [f64; 3],
    extended: bool,
) -> Result<f64> {
    triangle_energy_tol(geometry, fw, u, base, extended, ENERGY_TOL)
}

pub(crate) fn triangle_energy_tol(
    geometry: Geometry,
    fw: &FaceWeights,
    u: [f64; 3],
    base: [f64; 3],
    extended: bool,
    tol: f64,
) -> Result<f64> {
    let dir = std::array::from_fn::<f64, 3, _>(|a| u[a] - base[a]);
    if dir == [0.0; 3] {
        return Ok(0.0);
    }
    let walls = wall_crossings(geometry, fw, base, dir)?;
    if !extended && (!walls.is_empty() || face_class_at(geometry, fw, base)?.is_degenerate()) {
        return Err(Error::DegenerateTriangle);
    }
    let integrand = |s: f64| -> Result<f64> {
        let p = std::array::from_fn(|a| base[a] + s * dir[a]);
        let (_, th) = face_angles_at(geometry, fw, p, extended)?;
        Ok(th[0] * dir[0] + th[1] * dir[1] + th[2] * dir[2])
    };
    let mut knots = vec![0.0];
    knots.extend(walls);
    knots.push(1.0);
    let pieces = knots.len() - 1;
    let mut total = 0.0;
    for w in knots.windows(2) {
        total += quadrature::integrate(integrand, w[0], w[1], tol / pieces as f64, 4)?;
    }
    Ok(total)
}

/// Ricci energy E, potential H = E - ΣK̄_i(u_i - ū_i), and Calabi energy
/// C = ½Σ(K̄_i - K_i)², all at one state. With `extended` these are the
/// extended Ẽ, H̃ and the Calabi energy of K̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub ricci: f64,
    pub potential: f64,
    pub calabi: f64,
    pub extended: bool,
}

pub fn surface_energies(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
    target: &[f64],
    base: &ConformalState,
    extended: bool,
) -> Result<EnergyValue> {
    surface_energies_with(Exec::default(), surface, weights, state, target, base, extended)
}

pub fn surface_energies_with(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
    target: &[f64],
    base: &ConformalState,
    extended: bool,
) -> Result<EnergyValue> {
    let n = surface.vertex_count();
    for len in [state.u().len(), target.len(), base.u().len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let geometry = state.geometry();
    let (u, ub) = (state.u(), base.u());
    let report = geometry::evaluate(exec, surface, weights, geometry, u, extended)?;
    let per_face = exec.try_map(surface.face_count(), |fi| {
        let vs = surface.faces()[fi];
        let fw = weights.face(surface, fi);
        triangle_energy(geometry, &fw, vs.map(|v| u[v]), vs.map(|v| ub[v]), extended).map_err(
            |e| match e {
                Error::DegenerateTriangle => Error::DegenerateFace { face: fi },
                other => other,
            },
        )
    })?;
    let ricci = TAU * u.iter().sum::<f64>() - per_face.iter().sum::<f64>();
    let potential = ricci
        - target
            .iter()
            .zip(u.iter().zip(ub))
            .map(|(k, (a, b))| k * (a - b))
            .sum::<f64>();
    Ok(EnergyValue {
        ricci,
        potential,
        calabi: calabi_energy(&report.curvature, target),
        extended,
    })
}

/// ½Σ(K̄_i - K_i)².
pub fn calabi_energy(curvature: &[f64], target: &[f64]) -> f64 {
    0.5 * curvature
        .iter()
        .zip(target)
        .map(|(k, kb)| (kb - k) * (kb - k))
        .sum::<f64>()
}

/// H̃(to) - H̃(from), integrated along the chord. Because the 1-form
/// Σ(K̃_i - K̄_i) du_i is closed the chord gives the exact energy difference,
/// and for nearby states it is far more accurate than subtracting two
/// absolute energies.
pub fn potential_increment(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    target: &[f64],
    from: &[f64],
    to: &[f64],
) -> Result<f64> {
    potential_increment_with(Exec::default(), surface, weights, geometry, target, from, to)
}

pub fn potential_increment_with(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    target: &[f64],
    from: &[f64],
    to: &[f64],
) -> Result<f64> {
    let dir: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    let scale: f64 = dir.iter().map(|d| d.abs()).sum();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut point = vec![0.0; from.len()];
    let integrand = |s: f64| -> Result<f64> {
        for ((p, a), d) in point.iter_mut().zip(from).zip(&dir) {
            *p = a + s * d;
        }
        let r = geometry::evaluate(exec, surface, weights, geometry, &point, true)?;
        Ok(r
            .curvature
            .iter()
            .zip(target)
            .zip(&dir)
            .map(|((k, kb), d)| (k - kb) * d)
            .sum())
    };
    quadrature::integrate(integrand, 0.0, 1.0, 1e-13 * scale, 1)
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::BadHypothesis(format!("step must be positive, got {step}")));
    }
    let mut p = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + step;
        let hi = f(&p)?;
        p[i] = x[i] - step;
        let lo = f(&p)?;
        p[i] = x[i];
        g.push((hi - lo) / (2.0 * step));
    }
    Ok(g)
}

/// Central-difference Jacobian; entry (i, j) is ∂F_i/∂x_j.
pub fn fd_jacobian<F>(mut f: F, x: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::BadHypothesis(format!("step must be positive, got {step}")));
    }
    let mut p = x.to_vec();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        p[j] = x[j] + step;
        let hi = f(&p)?;
        p[j] = x[j] - step;
        let lo = f(&p)?;
        p[j] = x[j];
        cols.push(
            hi.iter()
                .zip(&lo)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect::<Vec<_>>(),
        );
    }
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}
