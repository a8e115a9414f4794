//! Closed triangulated surfaces and the (ε, η) weights of a discrete
//! conformal structure on them.
//!
//! A [`TriangulatedSurface`] is purely combinatorial: faces are vertex
//! triples, edges are derived and stored as canonical `(min, max)` pairs in
//! lexicographic order. Every per-edge array in the crate is indexed by that
//! ordering.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurfaceError {
    #[error("surface has no faces")]
    Empty,
    #[error("face {face} is invalid: {reason}")]
    BadFace { face: usize, reason: String },
    #[error("edge {0}-{1} belongs to {2} faces, expected 2")]
    NotClosedSurface(usize, usize, usize),
    #[error("link of vertex {vertex} is not a single cycle")]
    NonManifoldVertex { vertex: usize },
    #[error("surface is not connected")]
    Disconnected,
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("epsilon at vertex {vertex} is {value}, expected 0 or 1")]
    BadEpsilon { vertex: usize, value: i64 },
    #[error("weight array length {got} does not match {what} count {expected}")]
    WeightLength {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Combinatorics of a connected closed triangulated surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangulatedSurface {
    vertex_count: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// `face_edges[f][a]` is the edge opposite corner `a` of face `f`.
    face_edges: Vec<[usize; 3]>,
    edge_faces: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
    neighbors: Vec<Vec<usize>>,
}

impl TriangulatedSurface {
    /// Builds a surface whose vertex count is one past the largest index used.
    pub fn from_faces(faces: &[[usize; 3]]) -> Result<Self, SurfaceError> {
        let n = faces
            .iter()
            .flat_map(|f| f.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        Self::new(n, faces)
    }

    pub fn new(vertex_count: usize, faces: &[[usize; 3]]) -> Result<Self, SurfaceError> {
        if faces.is_empty() {
            return Err(SurfaceError::Empty);
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&v) = f.iter().find(|&&v| v >= vertex_count) {
                return Err(SurfaceError::BadFace {
                    face: fi,
                    reason: format!("vertex {v} out of range 0..{vertex_count}"),
                });
            }
            if f[0] == f[1] || f[0] == f[2] || f[1] == f[2] {
                return Err(SurfaceError::BadFace {
                    face: fi,
                    reason: "repeated vertex".into(),
                });
            }
        }
        let mut seen: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            let mut key = *f;
            key.sort_unstable();
            if let Some(prev) = seen.insert(key, fi) {
                return Err(SurfaceError::BadFace {
                    face: fi,
                    reason: format!("duplicates face {prev}"),
                });
            }
        }

        // Edge enumeration in canonical lexicographic order.
        let mut incidence: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for a in 0..3 {
                incidence
                    .entry(canonical(f[(a + 1) % 3], f[(a + 2) % 3]))
                    .or_default()
                    .push(fi);
            }
        }
        let mut edges = Vec::with_capacity(incidence.len());
        let mut edge_faces = Vec::with_capacity(incidence.len());
        for (e, fs) in &incidence {
            if fs.len() != 2 {
                return Err(SurfaceError::NotClosedSurface(e[0], e[1], fs.len()));
            }
            edges.push(*e);
            edge_faces.push([fs[0], fs[1]]);
        }
        let face_edges = faces
            .iter()
            .map(|f| {
                let mut out = [0; 3];
                for (a, slot) in out.iter_mut().enumerate() {
                    let key = canonical(f[(a + 1) % 3], f[(a + 2) % 3]);
                    *slot = edges.binary_search(&key).expect("edge enumerated above");
                }
                out
            })
            .collect::<Vec<_>>();

        let mut vertex_faces = vec![Vec::new(); vertex_count];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }
        let mut neighbors = vec![Vec::new(); vertex_count];
        for e in &edges {
            neighbors[e[0]].push(e[1]);
            neighbors[e[1]].push(e[0]);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }

        let surface = Self {
            vertex_count,
            faces: faces.to_vec(),
            edges,
            face_edges,
            edge_faces,
            vertex_faces,
            neighbors,
        };
        for v in 0..vertex_count {
            if !surface.link_is_cycle(v) {
                return Err(SurfaceError::NonManifoldVertex { vertex: v });
            }
        }
        if !surface.is_connected() {
            return Err(SurfaceError::Disconnected);
        }
        Ok(surface)
    }

    /// The link of `v` is the set of edges opposite `v` in its faces. It is a
    /// single cycle iff walking face-to-face around `v` visits every face.
    fn link_is_cycle(&self, v: usize) -> bool {
        let star = &self.vertex_faces[v];
        if star.len() < 3 {
            return false;
        }
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &fi in star {
            let f = self.faces[fi];
            let others: Vec<usize> = f.iter().copied().filter(|&w| w != v).collect();
            adj.entry(others[0]).or_default().push(others[1]);
            adj.entry(others[1]).or_default().push(others[0]);
        }
        if adj.values().any(|n| n.len() != 2) {
            return false;
        }
        let start = *adj.keys().next().expect("non-empty star");
        let (mut prev, mut cur) = (start, adj[&start][0]);
        let mut steps = 1;
        while cur != start {
            let nb = &adj[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
            steps += 1;
            if steps > star.len() {
                return false;
            }
        }
        steps == star.len()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of face `f`, entry `a` opposite corner `a`.
    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    pub fn edge_faces(&self, e: usize) -> [usize; 2] {
        self.edge_faces[e]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Number of vertices adjacent to `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(i, j)).ok()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }
}

fn canonical(i: usize, j: usize) -> [usize; 2] {
    if i < j {
        [i, j]
    } else {
        [j, i]
    }
}

/// Vertex weights ε ∈ {0, 1} and edge weights η.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig {
    epsilon: Vec<u8>,
    eta: Vec<f64>,
}

/// Weights of a single face, ordered like the face's corners. `eta[a]` is the
/// weight of the edge opposite corner `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceWeights {
    pub epsilon: [u8; 3],
    pub eta: [f64; 3],
}

impl FaceWeights {
    pub fn eps(&self, a: usize) -> f64 {
        f64::from(self.epsilon[a])
    }

    /// A_q = η_st² − ε_s ε_t for every corner q. Corner q can only
    /// degenerate when A_q > 0.
    pub fn degeneracy_indicator(&self) -> [f64; 3] {
        std::array::from_fn(|q| {
            let (s, t) = ((q + 1) % 3, (q + 2) % 3);
            self.eta[q] * self.eta[q] - self.eps(s) * self.eps(t)
        })
    }
}

impl WeightConfig {
    pub fn new(
        surface: &TriangulatedSurface,
        epsilon: Vec<i64>,
        eta: Vec<f64>,
    ) -> Result<Self, SurfaceError> {
        if epsilon.len() != surface.vertex_count() {
            return Err(SurfaceError::WeightLength {
                what: "vertex",
                got: epsilon.len(),
                expected: surface.vertex_count(),
            });
        }
        if eta.len() != surface.edge_count() {
            return Err(SurfaceError::WeightLength {
                what: "edge",
                got: eta.len(),
                expected: surface.edge_count(),
            });
        }
        let epsilon = epsilon
            .into_iter()
            .enumerate()
            .map(|(vertex, value)| match value {
                0 | 1 => Ok(value as u8),
                _ => Err(SurfaceError::BadEpsilon { vertex, value }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { epsilon, eta })
    }

    pub fn uniform(surface: &TriangulatedSurface, epsilon: u8, eta: f64) -> Result<Self, SurfaceError> {
        Self::new(
            surface,
            vec![i64::from(epsilon); surface.vertex_count()],
            vec![eta; surface.edge_count()],
        )
    }

    pub fn epsilon(&self) -> &[u8] {
        &self.epsilon
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn set_eta(&mut self, edge: usize, value: f64) {
        self.eta[edge] = value;
    }

    /// (N1, N2): the number of vertices with ε = 0 and with ε = 1.
    pub fn counts(&self) -> (usize, usize) {
        let n2 = self.epsilon.iter().filter(|&&e| e == 1).count();
        (self.epsilon.len() - n2, n2)
    }

    pub fn face(&self, surface: &TriangulatedSurface, f: usize) -> FaceWeights {
        let vs = surface.faces()[f];
        let es = surface.face_edges(f);
        FaceWeights {
            epsilon: vs.map(|v| self.epsilon[v]),
            eta: es.map(|e| self.eta[e]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    /// ε_s ε_t + η_st ≤ 0.
    Edge { edge: usize, vertices: [usize; 2], value: f64 },
    /// ε_q η_st + η_qs η_qt < 0 at corner `vertex` of `face`.
    Face { face: usize, vertex: usize, value: f64 },
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Edge { vertices, value, .. } => write!(
                f,
                "edge {}-{}: eps_s*eps_t + eta = {value} <= 0",
                vertices[0], vertices[1]
            ),
            Self::Face { face, vertex, value } => write!(
                f,
                "face {face} at vertex {vertex}: eps_q*eta_st + eta_qs*eta_qt = {value} < 0"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightReport {
    pub violations: Vec<WeightViolation>,
}

impl WeightReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks both structure conditions on every edge and every face corner.
pub fn validate_weights(surface: &TriangulatedSurface, weights: &WeightConfig) -> WeightReport {
    let mut violations = Vec::new();
    for (e, &[s, t]) in surface.edges().iter().enumerate() {
        let value =
            f64::from(weights.epsilon[s]) * f64::from(weights.epsilon[t]) + weights.eta[e];
        if value <= 0.0 || value.is_nan() {
            violations.push(WeightViolation::Edge {
                edge: e,
                vertices: [s, t],
                value,
            });
        }
    }
    for (fi, vs) in surface.faces().iter().enumerate() {
        let fw = weights.face(surface, fi);
        for q in 0..3 {
            let (s, t) = ((q + 1) % 3, (q + 2) % 3);
            // eta[t] is the edge q-s, eta[s] the edge q-t.
            let value = fw.eps(q) * fw.eta[q] + fw.eta[t] * fw.eta[s];
            if value < 0.0 || value.is_nan() {
                violations.push(WeightViolation::Face {
                    face: fi,
                    vertex: vs[q],
                    value,
                });
            }
        }
    }
    WeightReport { violations }
}

/// Built-in test surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Tetrahedron,
    Octahedron,
    Icosahedron,
    TorusGrid { n: usize, m: usize },
    Genus2,
}

pub fn generate(kind: SurfaceKind) -> Result<TriangulatedSurface, SurfaceError> {
    match kind {
        SurfaceKind::Tetrahedron => {
            TriangulatedSurface::from_faces(&[[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]])
        }
        SurfaceKind::Octahedron => {
            // Poles 0 and 5 around the equator 1..=4.
            let mut faces = Vec::new();
            for a in 0..4 {
                let (p, q) = (1 + a, 1 + (a + 1) % 4);
                faces.push([0, p, q]);
                faces.push([5, q, p]);
            }
            TriangulatedSurface::from_faces(&faces)
        }
        SurfaceKind::Icosahedron => {
            // Apex 0, upper ring 1..=5, lower ring 6..=10, apex 11.
            let mut faces = Vec::new();
            for a in 0..5 {
                let (u0, u1) = (1 + a, 1 + (a + 1) % 5);
                let (l0, l1) = (6 + a, 6 + (a + 1) % 5);
                faces.push([0, u0, u1]);
                faces.push([u0, l0, u1]);
                faces.push([u1, l0, l1]);
                faces.push([11, l1, l0]);
            }
            TriangulatedSurface::from_faces(&faces)
        }
        SurfaceKind::TorusGrid { n, m } => {
            if n < 3 || m < 3 {
                return Err(SurfaceError::BadParameter(format!(
                    "torus grid needs n >= 3 and m >= 3, got {n}x{m}"
                )));
            }
            TriangulatedSurface::new(n * m, &torus_faces(n, m))
        }
        SurfaceKind::Genus2 => TriangulatedSurface::from_faces(&genus2_faces()),
    }
}

fn torus_faces(n: usize, m: usize) -> Vec<[usize; 3]> {
    let id = |a: usize, b: usize| (a % n) * m + (b % m);
    let mut faces = Vec::with_capacity(2 * n * m);
    for a in 0..n {
        for b in 0..m {
            let (v00, v10, v01, v11) = (id(a, b), id(a + 1, b), id(a, b + 1), id(a + 1, b + 1));
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    faces
}

/// Connected sum of two 3x3 torus grids: one face is removed from each copy
/// and the two boundary triangles are identified.
fn genus2_faces() -> Vec<[usize; 3]> {
    let first = torus_faces(3, 3);
    let removed = first[0];
    // Second copy: vertices of the removed face map onto the same labels,
    // the remaining six vertices get fresh labels 9..15.
    let mut relabel = [usize::MAX; 9];
    for (slot, &v) in removed.iter().enumerate() {
        relabel[v] = removed[slot];
    }
    let mut next = 9;
    for r in relabel.iter_mut() {
        if *r == usize::MAX {
            *r = next;
            next += 1;
        }
    }
    let mut faces: Vec<[usize; 3]> = first[1..].to_vec();
    faces.extend(first[1..].iter().map(|f| {
        // Reversed orientation in the second copy.
        [relabel[f[0]], relabel[f[2]], relabel[f[1]]]
    }));
    faces
}
