//! From conformal factors to metric data.
//!
//! Factors are carried in the flow coordinate `u`. In Euclidean geometry and
//! at hyperbolic vertices with ε = 0 the coordinate is the factor `f` itself;
//! at hyperbolic vertices with ε = 1 it is `u = -asinh(e^{-f}) < 0`, which is
//! the closed form of `½ log((C - 1)/(C + 1))` with `C = sqrt(1 + e^{2f})`.
//!
//! Edge lengths come from the weighted length formulas, angles from the
//! cosine laws. A face whose lengths violate the triangle inequality (with
//! equality counted as violation) is degenerate at the vertex opposite the
//! long edge; the extended angles assign π there and 0 at the other corners.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::surface::{FaceWeights, TriangulatedSurface, WeightConfig};

/// Largest |f| accepted before exponentiation.
pub const F_CAP: f64 = 700.0;

/// Excursion of a cosine past ±1 that is still treated as rounding.
pub const COS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Euclidean,
    Hyperbolic,
}

impl Geometry {
    /// The constant λ of the Gauss–Bonnet formula: 0 for Euclidean, -1 for
    /// hyperbolic background geometry.
    pub fn background_curvature(self) -> f64 {
        match self {
            Geometry::Euclidean => 0.0,
            Geometry::Hyperbolic => -1.0,
        }
    }

    fn uses_hyperbolic_coordinate(self, eps: u8) -> bool {
        self == Geometry::Hyperbolic && eps == 1
    }
}

fn check_cap(f: f64) -> Result<()> {
    if f.is_finite() && f.abs() <= F_CAP {
        Ok(())
    } else {
        Err(Error::Overflow(f))
    }
}

pub fn u_to_f(geometry: Geometry, eps: u8, u: f64) -> Result<f64> {
    if !geometry.uses_hyperbolic_coordinate(eps) {
        check_cap(u)?;
        return Ok(u);
    }
    if !(u < 0.0) {
        return Err(Error::Domain(format!(
            "hyperbolic vertex with eps = 1 needs u < 0, got {u}"
        )));
    }
    let f = -(-u).sinh().ln();
    check_cap(f)?;
    Ok(f)
}

pub fn f_to_u(geometry: Geometry, eps: u8, f: f64) -> Result<f64> {
    check_cap(f)?;
    if !geometry.uses_hyperbolic_coordinate(eps) {
        return Ok(f);
    }
    Ok(-(-f).exp().asinh())
}

/// ∂f/∂u: 1, or C = sqrt(1 + e^{2f}) at hyperbolic vertices with ε = 1.
pub fn df_du(geometry: Geometry, eps: u8, f: f64) -> f64 {
    if geometry.uses_hyperbolic_coordinate(eps) {
        (1.0 + (2.0 * f).exp()).sqrt()
    } else {
        1.0
    }
}

/// Per-vertex conformal factors in flow coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalState {
    geometry: Geometry,
    u: Vec<f64>,
}

impl ConformalState {
    pub fn new(geometry: Geometry, weights: &WeightConfig, u: Vec<f64>) -> Result<Self> {
        let eps = weights.epsilon();
        if u.len() != eps.len() {
            return Err(Error::DimensionMismatch {
                expected: eps.len(),
                got: u.len(),
            });
        }
        for (i, (&ui, &e)) in u.iter().zip(eps).enumerate() {
            if !ui.is_finite() {
                return Err(Error::Domain(format!("u[{i}] = {ui} is not finite")));
            }
            if geometry.uses_hyperbolic_coordinate(e) && ui >= 0.0 {
                return Err(Error::Domain(format!(
                    "hyperbolic vertex {i} with eps = 1 needs u < 0, got {ui}"
                )));
            }
        }
        Ok(Self { geometry, u })
    }

    pub fn from_f(geometry: Geometry, weights: &WeightConfig, f: &[f64]) -> Result<Self> {
        let eps = weights.epsilon();
        if f.len() != eps.len() {
            return Err(Error::DimensionMismatch {
                expected: eps.len(),
                got: f.len(),
            });
        }
        let u = f
            .iter()
            .zip(eps)
            .map(|(&fi, &e)| f_to_u(geometry, e, fi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(geometry, weights, u)
    }

    /// The state with f ≡ 0; this is the base point of every energy integral.
    pub fn base(geometry: Geometry, weights: &WeightConfig) -> Self {
        let u = weights
            .epsilon()
            .iter()
            .map(|&e| f_to_u(geometry, e, 0.0).expect("f = 0 is in range"))
            .collect();
        Self { geometry, u }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn into_u(self) -> Vec<f64> {
        self.u
    }

    pub fn f(&self, weights: &WeightConfig) -> Result<Vec<f64>> {
        factors_from_u(self.geometry, weights.epsilon(), &self.u)
    }
}

pub(crate) fn factors_from_u(geometry: Geometry, eps: &[u8], u: &[f64]) -> Result<Vec<f64>> {
    u.iter()
        .zip(eps)
        .map(|(&ui, &e)| u_to_f(geometry, e, ui))
        .collect()
}

/// Length data of one edge. For hyperbolic edges `x = cosh l - 1` and
/// `sh = sinh l` are kept alongside `l` so that the cosine law does not lose
/// precision on short edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EdgeMetric {
    pub l: f64,
    pub x: f64,
    pub sh: f64,
}

impl EdgeMetric {
    fn hyperbolic_from_length(l: f64) -> Self {
        let half = (0.5 * l).sinh();
        Self {
            l,
            x: 2.0 * half * half,
            sh: l.sinh(),
        }
    }
}

pub(crate) fn edge_metric(
    geometry: Geometry,
    eps_i: u8,
    eps_j: u8,
    eta: f64,
    f_i: f64,
    f_j: f64,
) -> Result<EdgeMetric> {
    check_cap(f_i)?;
    check_cap(f_j)?;
    let (ei, ej) = (f64::from(eps_i), f64::from(eps_j));
    match geometry {
        Geometry::Euclidean => {
            let r = ei * (2.0 * f_i).exp() + ej * (2.0 * f_j).exp() + 2.0 * eta * (f_i + f_j).exp();
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NumericalDomain(format!(
                    "squared edge length {r} is not positive"
                )));
            }
            Ok(EdgeMetric {
                l: r.sqrt(),
                x: 0.0,
                sh: 0.0,
            })
        }
        Geometry::Hyperbolic => {
            let (si, sj) = (f_i.exp(), f_j.exp());
            let (ci, cj) = ((ei * si * si + 1.0).sqrt(), (ej * sj * sj + 1.0).sqrt());
            // C - 1 computed without cancellation.
            let (ci1, cj1) = (ei * si * si / (ci + 1.0), ej * sj * sj / (cj + 1.0));
            let x = ci1 * cj1 + ci1 + cj1 + eta * si * sj;
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::NumericalDomain(format!(
                    "cosh of edge length is 1 + {x}, not above 1"
                )));
            }
            let sh = (x * (x + 2.0)).sqrt();
            Ok(EdgeMetric {
                l: (x + sh).ln_1p(),
                x,
                sh,
            })
        }
    }
}

pub fn edge_length(
    geometry: Geometry,
    eps_i: u8,
    eps_j: u8,
    eta: f64,
    f_i: f64,
    f_j: f64,
) -> Result<f64> {
    edge_metric(geometry, eps_i, eps_j, eta, f_i, f_j).map(|m| m.l)
}

/// Lengths of the edges of a face given its factors, entry `a` opposite
/// corner `a`.
pub fn face_lengths(geometry: Geometry, fw: &FaceWeights, f: [f64; 3]) -> Result<[f64; 3]> {
    let m = face_metrics(geometry, fw, f)?;
    Ok(m.map(|e| e.l))
}

pub(crate) fn face_metrics(
    geometry: Geometry,
    fw: &FaceWeights,
    f: [f64; 3],
) -> Result<[EdgeMetric; 3]> {
    let mut out = [EdgeMetric {
        l: 0.0,
        x: 0.0,
        sh: 0.0,
    }; 3];
    for (a, slot) in out.iter_mut().enumerate() {
        let (s, t) = ((a + 1) % 3, (a + 2) % 3);
        *slot = edge_metric(geometry, fw.epsilon[s], fw.epsilon[t], fw.eta[a], f[s], f[t])?;
    }
    Ok(out)
}

/// Degeneracy of one face. The corner index is local (0, 1, 2 in face order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DegeneracyClass {
    Nondegenerate,
    DegenerateAt(usize),
}

impl DegeneracyClass {
    pub fn is_degenerate(self) -> bool {
        matches!(self, DegeneracyClass::DegenerateAt(_))
    }
}

/// Classification from opposite-indexed lengths.
pub(crate) fn classify_opposite(l: [f64; 3]) -> DegeneracyClass {
    for q in 0..3 {
        if l[q] >= l[(q + 1) % 3] + l[(q + 2) % 3] {
            return DegeneracyClass::DegenerateAt(q);
        }
    }
    DegeneracyClass::Nondegenerate
}

/// Classifies triangle `ijk` from its lengths; corners are reported as
/// 0 = i, 1 = j, 2 = k. The predicate is the same in both geometries.
pub fn classify_triangle(l_ij: f64, l_ik: f64, l_jk: f64) -> DegeneracyClass {
    classify_opposite([l_jk, l_ik, l_ij])
}

fn clamped_acos(c: f64) -> Result<f64> {
    if c.is_nan() || c.abs() > 1.0 + COS_CLAMP {
        return Err(Error::NumericalDomain(format!(
            "cosine {c} outside [-1, 1]"
        )));
    }
    Ok(c.clamp(-1.0, 1.0).acos())
}

pub(crate) fn strict_angles(geometry: Geometry, m: &[EdgeMetric; 3]) -> Result<[f64; 3]> {
    if classify_opposite(m.map(|e| e.l)).is_degenerate() {
        return Err(Error::DegenerateTriangle);
    }
    let mut out = [0.0; 3];
    for (a, slot) in out.iter_mut().enumerate() {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let cos = match geometry {
            Geometry::Euclidean => {
                let (la, lb, lc) = (m[a].l, m[b].l, m[c].l);
                (lb * lb + lc * lc - la * la) / (2.0 * lb * lc)
            }
            Geometry::Hyperbolic => {
                // (ch_b ch_c - ch_a) / (sh_b sh_c) with ch = 1 + x.
                let num = m[b].x + m[c].x - m[a].x + m[b].x * m[c].x;
                num / (m[b].sh * m[c].sh)
            }
        };
        *slot = clamped_acos(cos)?;
    }
    Ok(out)
}

pub(crate) fn extended_angles(
    geometry: Geometry,
    m: &[EdgeMetric; 3],
) -> Result<(DegeneracyClass, [f64; 3])> {
    match classify_opposite(m.map(|e| e.l)) {
        DegeneracyClass::Nondegenerate => {
            Ok((DegeneracyClass::Nondegenerate, strict_angles(geometry, m)?))
        }
        DegeneracyClass::DegenerateAt(q) => {
            let mut out = [0.0; 3];
            out[q] = PI;
            Ok((DegeneracyClass::DegenerateAt(q), out))
        }
    }
}

fn metrics_from_lengths(geometry: Geometry, l: [f64; 3]) -> Result<[EdgeMetric; 3]> {
    if l.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NumericalDomain(format!("lengths {l:?} must be positive")));
    }
    Ok(match geometry {
        Geometry::Euclidean => l.map(|l| EdgeMetric { l, x: 0.0, sh: 0.0 }),
        Geometry::Hyperbolic => l.map(EdgeMetric::hyperbolic_from_length),
    })
}

/// Inner angles (θ_i, θ_j, θ_k) of a nondegenerate triangle.
pub fn triangle_angles(geometry: Geometry, l_ij: f64, l_ik: f64, l_jk: f64) -> Result<[f64; 3]> {
    let m = metrics_from_lengths(geometry, [l_jk, l_ik, l_ij])?;
    strict_angles(geometry, &m)
}

/// Inner angles continued by constants across degenerate configurations.
pub fn extended_triangle_angles(
    geometry: Geometry,
    l_ij: f64,
    l_ik: f64,
    l_jk: f64,
) -> Result<[f64; 3]> {
    let m = metrics_from_lengths(geometry, [l_jk, l_ik, l_ij])?;
    extended_angles(geometry, &m).map(|(_, a)| a)
}

/// Euclidean triangle area from opposite-indexed lengths (Kahan's form of
/// Heron's formula); zero for degenerate triangles.
pub(crate) fn euclidean_area(l: [f64; 3]) -> f64 {
    let mut s = l;
    s.sort_by(|a, b| b.total_cmp(a));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p > 0.0 {
        0.25 * p.sqrt()
    } else {
        0.0
    }
}

/// Lengths, angles, curvature and degeneracy data of a whole surface.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub geometry: Geometry,
    pub extended: bool,
    /// Per edge, canonical edge order.
    pub lengths: Vec<f64>,
    /// Per face, in the face's corner order.
    pub angles: Vec<[f64; 3]>,
    pub classes: Vec<DegeneracyClass>,
    /// Per vertex: 2π minus the angle sum at the vertex.
    pub curvature: Vec<f64>,
    /// Hyperbolic: π minus the angle sum; Euclidean: Heron area.
    pub face_areas: Vec<f64>,
    pub area: f64,
}

impl MetricReport {
    pub fn degenerate_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_degenerate())
            .map(|(f, _)| f)
    }

    /// Smallest relative triangle-inequality slack
    /// `(l_b + l_c - l_a) / (l_a + l_b + l_c)` over all corners of all faces.
    pub fn min_slack(&self, surface: &TriangulatedSurface) -> f64 {
        (0..surface.face_count())
            .map(|f| {
                let l = surface.face_edges(f).map(|e| self.lengths[e]);
                let p = l[0] + l[1] + l[2];
                (0..3)
                    .map(|a| (l[(a + 1) % 3] + l[(a + 2) % 3] - l[a]) / p)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn curvature(
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
    extended: bool,
) -> Result<MetricReport> {
    curvature_with(Exec::default(), surface, weights, state, extended)
}

pub fn curvature_with(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    state: &ConformalState,
    extended: bool,
) -> Result<MetricReport> {
    evaluate(exec, surface, weights, state.geometry(), state.u(), extended)
}

pub(crate) fn edge_metrics(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    f: &[f64],
) -> Result<Vec<EdgeMetric>> {
    let eps = weights.epsilon();
    let eta = weights.eta();
    let edges = surface.edges();
    exec.try_map(edges.len(), |e| {
        let [i, j] = edges[e];
        edge_metric(geometry, eps[i], eps[j], eta[e], f[i], f[j])
    })
}

pub(crate) fn evaluate(
    exec: Exec,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    u: &[f64],
    extended: bool,
) -> Result<MetricReport> {
    if u.len() != surface.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: surface.vertex_count(),
            got: u.len(),
        });
    }
    let f = factors_from_u(geometry, weights.epsilon(), u)?;
    let edges = edge_metrics(exec, surface, weights, geometry, &f)?;
    let per_face = exec.try_map(surface.face_count(), |fi| {
        let m = surface.face_edges(fi).map(|e| edges[e]);
        let (class, angles) = if extended {
            extended_angles(geometry, &m)?
        } else {
            match strict_angles(geometry, &m) {
                Ok(a) => (DegeneracyClass::Nondegenerate, a),
                Err(Error::DegenerateTriangle) => return Err(Error::DegenerateFace { face: fi }),
                Err(e) => return Err(e),
            }
        };
        let area = match geometry {
            Geometry::Euclidean => euclidean_area(m.map(|e| e.l)),
            Geometry::Hyperbolic => PI - angles[0] - angles[1] - angles[2],
        };
        Ok((class, angles, area))
    })?;

    // Fixed accumulation order: faces by index, corners in face order.
    let mut sums = vec![0.0; surface.vertex_count()];
    for (fi, (_, angles, _)) in per_face.iter().enumerate() {
        for (a, &v) in surface.faces()[fi].iter().enumerate() {
            sums[v] += angles[a];
        }
    }
    let curvature = sums.into_iter().map(|s| TAU - s).collect();
    let mut classes = Vec::with_capacity(per_face.len());
    let mut angles = Vec::with_capacity(per_face.len());
    let mut face_areas = Vec::with_capacity(per_face.len());
    for (c, a, ar) in per_face {
        classes.push(c);
        angles.push(a);
        face_areas.push(ar);
    }
    let area = face_areas.iter().sum();
    Ok(MetricReport {
        geometry,
        extended,
        lengths: edges.iter().map(|e| e.l).collect(),
        angles,
        classes,
        curvature,
        face_areas,
        area,
    })
}

/// ΣK - 2πχ + λ·Area; zero up to rounding for any complete report.
pub fn gauss_bonnet_residual(report: &MetricReport, euler_characteristic: i64) -> f64 {
    let total: f64 = report.curvature.iter().sum();
    total - TAU * euler_characteristic as f64
        + report.geometry.background_curvature() * report.area
}

/// Constants (λ, μ) with λ(C_iC_j + S_iS_j) ≤ cosh l_ij ≤ μ(C_iC_j + S_iS_j)
/// for an edge whose endpoint i has ε_i = 1.
pub fn coshl_bounds(eps_i: u8, eps_j: u8, eta: f64) -> Result<(f64, f64)> {
    if eps_i != 1 {
        return Err(Error::BadHypothesis(format!("needs eps_i = 1, got {eps_i}")));
    }
    if eps_j > 1 {
        return Err(Error::BadHypothesis(format!("eps_j = {eps_j} not in {{0, 1}}")));
    }
    if !(f64::from(eps_j) + eta > 0.0) {
        return Err(Error::BadHypothesis(format!(
            "structure condition fails: eps_i*eps_j + eta = {} <= 0",
            f64::from(eps_j) + eta
        )));
    }
    let mu = 1.0 + eta.abs();
    let lambda = if eta > 0.0 { eta.min(1.0) } else { 0.5 * (1.0 + eta) };
    Ok((lambda, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{generate, SurfaceKind};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, SQRT_2};

    const E: Geometry = Geometry::Euclidean;
    const H: Geometry = Geometry::Hyperbolic;

    #[test]
    fn coordinate_change_examples() {
        assert_eq!(u_to_f(E, 1, 0.7).unwrap(), 0.7);
        let u = f_to_u(H, 1, 0.0).unwrap();
        assert!((u - (SQRT_2 - 1.0).ln()).abs() < 1e-15);
        assert!((u + 0.881374).abs() < 1e-6);
        assert!(u_to_f(H, 1, -0.881374).unwrap().abs() < 1e-6);
        assert!(u_to_f(H, 1, u).unwrap().abs() < 1e-15);
        assert_eq!(u_to_f(H, 0, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn hyperbolic_coordinate_domain() {
        assert!(matches!(u_to_f(H, 1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(u_to_f(H, 1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(f_to_u(E, 0, 701.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn closed_form_matches_log_definition() {
        for &f in &[-3.0, -0.5, 0.0, 0.4, 2.0] {
            let c = (1.0 + (2.0 * f as f64).exp()).sqrt();
            let direct = 0.5 * ((c - 1.0) / (c + 1.0)).ln();
            assert!((f_to_u(H, 1, f).unwrap() - direct).abs() < 1e-13);
            // The inverse through C = (1 + e^{2u}) / (1 - e^{2u}).
            let w = (2.0 * direct).exp();
            let c_back = (1.0 + w) / (1.0 - w);
            assert!((0.5 * (c_back * c_back - 1.0).ln() - f).abs() < 1e-9);
        }
    }

    #[test]
    fn edge_length_examples() {
        assert!((edge_length(E, 1, 1, 1.0, 0.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((edge_length(E, 0, 0, 1.0, 0.0, 0.0).unwrap() - SQRT_2).abs() < 1e-15);
        let l = edge_length(H, 1, 1, 1.0, 0.0, 0.0).unwrap();
        assert!((l - 3f64.acosh()).abs() < 1e-14);
        assert!((l - 1.762747).abs() < 1e-6);
    }

    #[test]
    fn edge_length_rejects_bad_radicand() {
        assert!(matches!(
            edge_length(E, 0, 0, -0.5, 0.0, 0.0),
            Err(Error::NumericalDomain(_))
        ));
        assert!(matches!(
            edge_length(H, 0, 0, 0.0, 0.0, 0.0),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_triangle(1.0, 1.0, 1.0), DegeneracyClass::Nondegenerate);
        assert_eq!(
            classify_triangle(SQRT_2, SQRT_2, 3.0 * SQRT_2),
            DegeneracyClass::DegenerateAt(0)
        );
        assert_eq!(classify_triangle(1.0, 2.0, 3.0), DegeneracyClass::DegenerateAt(0));
        assert_eq!(classify_triangle(3.0, 1.0, 1.5), DegeneracyClass::DegenerateAt(2));
    }

    #[test]
    fn angle_examples() {
        let a = triangle_angles(E, 1.0, 1.0, 1.0).unwrap();
        assert!(a.iter().all(|&x| (x - FRAC_PI_3).abs() < 1e-15));
        let l = 3f64.acosh();
        let a = triangle_angles(H, l, l, l).unwrap();
        assert!(a.iter().all(|&x| (x - 0.75f64.acos()).abs() < 1e-13));
        assert!((a[0] - 0.722734).abs() < 1e-6);
        let a = triangle_angles(E, 3.0, 4.0, 5.0).unwrap();
        assert!((a[0] - FRAC_PI_2).abs() < 1e-15);
        assert!((a.iter().sum::<f64>() - PI).abs() < 1e-12);
    }

    #[test]
    fn degenerate_triangle_rejected_by_strict_angles() {
        assert_eq!(
            triangle_angles(E, 1.0, 2.0, 3.0).unwrap_err(),
            Error::DegenerateTriangle
        );
    }

    #[test]
    fn extended_angle_examples() {
        let a = extended_triangle_angles(E, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(a, triangle_angles(E, 1.0, 1.0, 1.0).unwrap());
        let a = extended_triangle_angles(E, SQRT_2, SQRT_2, 3.0 * SQRT_2).unwrap();
        assert_eq!(a, [PI, 0.0, 0.0]);
        let a = extended_triangle_angles(H, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(a, [PI, 0.0, 0.0]);
    }

    #[test]
    fn coshl_bounds_examples() {
        assert_eq!(coshl_bounds(1, 1, 1.0).unwrap(), (1.0, 2.0));
        assert_eq!(coshl_bounds(1, 1, -0.5).unwrap(), (0.25, 1.5));
        let (l, m) = coshl_bounds(1, 0, 0.3).unwrap();
        assert!((l - 0.3).abs() < 1e-15 && (m - 1.3).abs() < 1e-15);
        assert!(matches!(coshl_bounds(0, 1, 1.0), Err(Error::BadHypothesis(_))));
        assert!(matches!(coshl_bounds(1, 0, -0.1), Err(Error::BadHypothesis(_))));
        assert!(matches!(coshl_bounds(1, 1, -1.0), Err(Error::BadHypothesis(_))));
    }

    #[test]
    fn tetrahedron_uniform_curvature() {
        let s = generate(SurfaceKind::Tetrahedron).unwrap();
        let w = WeightConfig::uniform(&s, 1, 1.0).unwrap();
        let st = ConformalState::new(E, &w, vec![0.0; 4]).unwrap();
        let r = curvature(&s, &w, &st, false).unwrap();
        assert!(r.curvature.iter().all(|&k| (k - PI).abs() < 1e-12));
        assert!(gauss_bonnet_residual(&r, 2).abs() < 1e-12);
        assert!((r.curvature.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn flat_torus_has_zero_curvature() {
        let s = generate(SurfaceKind::TorusGrid { n: 3, m: 3 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let st = ConformalState::new(E, &w, vec![0.0; 9]).unwrap();
        let r = curvature(&s, &w, &st, false).unwrap();
        assert!(r.curvature.iter().all(|k| k.abs() < 1e-12));
    }

    #[test]
    fn forced_degenerate_face_contributes_pi() {
        let s = generate(SurfaceKind::Tetrahedron).unwrap();
        let mut w = WeightConfig::uniform(&s, 1, 1.0).unwrap();
        // Opposite vertex 0 in face {0,1,2}: l_12 = sqrt(2 + 2*9) > 4.
        w.set_eta(s.edge_index(1, 2).unwrap(), 9.0);
        let st = ConformalState::new(E, &w, vec![0.0; 4]).unwrap();
        assert!(matches!(
            curvature(&s, &w, &st, false),
            Err(Error::DegenerateFace { face: 0 })
        ));
        let r = curvature(&s, &w, &st, true).unwrap();
        assert_eq!(r.classes[0], DegeneracyClass::DegenerateAt(0));
        assert_eq!(r.angles[0], [PI, 0.0, 0.0]);
        // Face {1,2,3} degenerates at vertex 3.
        assert_eq!(r.classes[3], DegeneracyClass::DegenerateAt(2));
        // Independent evaluation of K̃_0 from the two remaining faces.
        let l01 = 2.0;
        let others = triangle_angles(E, l01, l01, l01).unwrap()[0];
        assert!((r.curvature[0] - (TAU - PI - 2.0 * others)).abs() < 1e-12);
        assert!(gauss_bonnet_residual(&r, 2).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_gauss_bonnet_on_equilateral_state() {
        let s = generate(SurfaceKind::Icosahedron).unwrap();
        let w = WeightConfig::uniform(&s, 1, 1.0).unwrap();
        let st = ConformalState::base(H, &w);
        let r = curvature(&s, &w, &st, false).unwrap();
        let theta = 0.75f64.acos();
        let area = 20.0 * (PI - 3.0 * theta);
        assert!((r.area - area).abs() < 1e-12);
        assert!(gauss_bonnet_residual(&r, 2).abs() < 1e-10);
    }

    #[test]
    fn sequential_and_parallel_are_bitwise_equal() {
        let s = generate(SurfaceKind::TorusGrid { n: 12, m: 10 }).unwrap();
        let w = WeightConfig::uniform(&s, 0, 1.0).unwrap();
        let u: Vec<f64> = (0..s.vertex_count()).map(|i| (i as f64 * 0.37).sin() * 0.4).collect();
        let st = ConformalState::new(E, &w, u).unwrap();
        let a = curvature_with(Exec::Sequential, &s, &w, &st, true).unwrap();
        let b = curvature_with(Exec::Parallel, &s, &w, &st, true).unwrap();
        assert_eq!(a, b);
    }
}
