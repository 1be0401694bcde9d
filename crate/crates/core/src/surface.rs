//! Half-edge representation of closed, oriented, triangulated marked surfaces.
//!
//! Half-edges are stored in twin pairs: edge `e` owns half-edges `2e` and
//! `2e + 1`, so `twin(h) = h ^ 1` and edge identity survives flips. Vertex
//! pairs are never used as keys, which keeps loops and multi-edges
//! (non-simplicial triangulations) representable.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfEdgeId(pub usize);

impl HalfEdgeId {
    #[inline]
    pub fn twin(self) -> HalfEdgeId {
        HalfEdgeId(self.0 ^ 1)
    }

    #[inline]
    pub fn edge(self) -> EdgeId {
        EdgeId(self.0 / 2)
    }
}

impl EdgeId {
    /// The half-edge of this edge with even index.
    #[inline]
    pub fn half_edge(self) -> HalfEdgeId {
        HalfEdgeId(2 * self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("edge {{{0},{1}}} has {2} incident face sides, expected 2")]
    NonManifoldEdge(usize, usize, usize),
    #[error("edge {{{0},{1}}} is traversed twice in the same direction")]
    InconsistentOrientation(usize, usize),
    #[error("edge {0} is glued to itself within a single face")]
    SelfGluedEdge(EdgeId),
    #[error("vertex {0} is not used by any face")]
    IsolatedVertex(usize),
    #[error("face {0} repeats a vertex; use explicit edge gluing for non-simplicial input")]
    DegenerateFace(usize),
    #[error("invalid gluing: {0}")]
    InvalidGluing(String),
    #[error("empty face list")]
    Empty,
}

/// The two faces on either side of an interior edge.
///
/// The edge runs from `i` to `j` inside face `{i, j, k}`; its twin runs from
/// `j` to `i` inside face `{j, i, l}`. `boundary` lists the four surrounding
/// edges as `[jk, ki, il, lj]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hinge {
    pub edge: EdgeId,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub faces: (FaceId, FaceId),
    pub boundary: [EdgeId; 4],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangulation {
    num_vertices: usize,
    origin: Vec<usize>,
    next: Vec<usize>,
    face: Vec<usize>,
    face_half_edge: Vec<usize>,
}

impl Triangulation {
    /// Builds a triangulation from oriented vertex triples, gluing sides by
    /// their vertex pair. The input must be simplicial along edges: each
    /// unordered pair occurs in exactly two sides with opposite directions.
    pub fn build_from_faces(faces: &[[usize; 3]]) -> Result<Self, SurfaceError> {
        if faces.is_empty() {
            return Err(SurfaceError::Empty);
        }
        let mut sides: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        let mut order: Vec<(usize, usize)> = Vec::new();
        for (f, tri) in faces.iter().enumerate() {
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(SurfaceError::DegenerateFace(f));
            }
            for m in 0..3 {
                let (a, b) = (tri[m], tri[(m + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = sides.entry(key).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push((f, m));
            }
        }
        let mut face_edges = vec![[0usize; 3]; faces.len()];
        for (e, key) in order.iter().enumerate() {
            let list = &sides[key];
            if list.len() != 2 {
                return Err(SurfaceError::NonManifoldEdge(key.0, key.1, list.len()));
            }
            for &(f, m) in list {
                face_edges[f][m] = e;
            }
        }
        Self::build_from_glued_faces(faces, &face_edges)
    }

    /// Builds a triangulation from vertex triples plus an explicit edge id for
    /// every side (side `m` runs from corner `m` to corner `m + 1`). Each edge
    /// id must label exactly two sides. This form admits loops and multiple
    /// edges between the same pair of vertices.
    ///
    /// Edge ids are kept as given; the half-edge `2e` is the first side
    /// labelled `e` in face order.
    pub fn build_from_glued_faces(
        faces: &[[usize; 3]],
        face_edges: &[[usize; 3]],
    ) -> Result<Self, SurfaceError> {
        if faces.is_empty() {
            return Err(SurfaceError::Empty);
        }
        if faces.len() != face_edges.len() {
            return Err(SurfaceError::InvalidGluing(format!(
                "{} faces but {} edge triples",
                faces.len(),
                face_edges.len()
            )));
        }
        let num_edges = face_edges.iter().flatten().copied().max().unwrap() + 1;
        if 2 * num_edges != 3 * faces.len() {
            return Err(SurfaceError::InvalidGluing(format!(
                "{} edges cannot close {} faces",
                num_edges,
                faces.len()
            )));
        }
        let num_vertices = faces.iter().flatten().copied().max().unwrap() + 1;
        let mut slot: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_edges];
        for (f, sides) in face_edges.iter().enumerate() {
            for (m, &e) in sides.iter().enumerate() {
                slot[e].push((f, m));
            }
        }
        let mut origin = vec![usize::MAX; 2 * num_edges];
        let mut side_he = vec![[0usize; 3]; faces.len()];
        for (e, list) in slot.iter().enumerate() {
            if list.len() != 2 {
                let (a, b) = list
                    .first()
                    .map(|&(f, m)| (faces[f][m], faces[f][(m + 1) % 3]))
                    .unwrap_or((usize::MAX, usize::MAX));
                return Err(SurfaceError::NonManifoldEdge(a.min(b), a.max(b), list.len()));
            }
            let (f0, m0) = list[0];
            let (f1, m1) = list[1];
            let (a0, b0) = (faces[f0][m0], faces[f0][(m0 + 1) % 3]);
            let (a1, b1) = (faces[f1][m1], faces[f1][(m1 + 1) % 3]);
            if a0 != b1 || b0 != a1 {
                if (a0, b0) == (a1, b1) {
                    return Err(SurfaceError::InconsistentOrientation(a0.min(b0), a0.max(b0)));
                }
                return Err(SurfaceError::InvalidGluing(format!(
                    "edge {e} joins sides {a0}->{b0} and {a1}->{b1}"
                )));
            }
            side_he[f0][m0] = 2 * e;
            side_he[f1][m1] = 2 * e + 1;
            origin[2 * e] = a0;
            origin[2 * e + 1] = a1;
        }
        let mut next = vec![0usize; 2 * num_edges];
        let mut face = vec![0usize; 2 * num_edges];
        let mut face_half_edge = vec![0usize; faces.len()];
        for (f, hs) in side_he.iter().enumerate() {
            for m in 0..3 {
                next[hs[m]] = hs[(m + 1) % 3];
                face[hs[m]] = f;
            }
            face_half_edge[f] = hs[0];
        }
        let tri = Triangulation {
            num_vertices,
            origin,
            next,
            face,
            face_half_edge,
        };
        let mut used = vec![false; num_vertices];
        for &v in &tri.origin {
            used[v] = true;
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(SurfaceError::IsolatedVertex(v));
        }
        Ok(tri)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.origin.len() / 2
    }

    pub fn num_faces(&self) -> usize {
        self.face_half_edge.len()
    }

    pub fn num_half_edges(&self) -> usize {
        self.origin.len()
    }

    /// `N - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.num_edges()).map(EdgeId)
    }

    pub fn faces(&self) -> impl Iterator<Item = FaceId> {
        (0..self.num_faces()).map(FaceId)
    }

    #[inline]
    pub fn origin(&self, h: HalfEdgeId) -> usize {
        self.origin[h.0]
    }

    #[inline]
    pub fn target(&self, h: HalfEdgeId) -> usize {
        self.origin[h.0 ^ 1]
    }

    #[inline]
    pub fn next(&self, h: HalfEdgeId) -> HalfEdgeId {
        HalfEdgeId(self.next[h.0])
    }

    #[inline]
    pub fn face_of(&self, h: HalfEdgeId) -> FaceId {
        FaceId(self.face[h.0])
    }

    /// Endpoints of the edge, in the direction of its even half-edge.
    pub fn endpoints(&self, e: EdgeId) -> (usize, usize) {
        let h = e.half_edge();
        (self.origin(h), self.target(h))
    }

    /// The three half-edges of a face, starting at its stored half-edge.
    pub fn face_half_edges(&self, f: FaceId) -> [HalfEdgeId; 3] {
        let h0 = HalfEdgeId(self.face_half_edge[f.0]);
        let h1 = self.next(h0);
        let h2 = self.next(h1);
        [h0, h1, h2]
    }

    /// Corner vertices of a face; corner `m` is the origin of side `m`.
    pub fn face_vertices(&self, f: FaceId) -> [usize; 3] {
        self.face_half_edges(f).map(|h| self.origin(h))
    }

    /// Edge ids of the sides of a face; side `m` joins corners `m` and `m + 1`.
    pub fn face_edges(&self, f: FaceId) -> [EdgeId; 3] {
        self.face_half_edges(f).map(|h| h.edge())
    }

    pub fn face_list(&self) -> Vec<[usize; 3]> {
        self.faces().map(|f| self.face_vertices(f)).collect()
    }

    pub fn face_edge_list(&self) -> Vec<[usize; 3]> {
        self.faces()
            .map(|f| self.face_edges(f).map(|e| e.0))
            .collect()
    }

    /// Number of face corners at each vertex.
    pub fn vertex_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for &v in &self.origin {
            deg[v] += 1;
        }
        deg
    }

    /// True when no edge is a loop and no two edges share both endpoints.
    pub fn is_simplicial(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.edges().all(|e| {
            let (a, b) = self.endpoints(e);
            a != b && seen.insert((a.min(b), a.max(b)))
        })
    }

    pub fn hinge_of(&self, e: EdgeId) -> Result<Hinge, SurfaceError> {
        if e.0 >= self.num_edges() {
            return Err(SurfaceError::InvalidGluing(format!("no edge {}", e.0)));
        }
        let h = e.half_edge();
        let t = h.twin();
        let f1 = self.face_of(h);
        let f2 = self.face_of(t);
        if f1 == f2 {
            return Err(SurfaceError::SelfGluedEdge(e));
        }
        let a = self.next(h);
        let b = self.next(a);
        let c = self.next(t);
        let d = self.next(c);
        Ok(Hinge {
            edge: e,
            i: self.origin(h),
            j: self.origin(t),
            k: self.origin(b),
            l: self.origin(d),
            faces: (f1, f2),
            boundary: [a.edge(), b.edge(), c.edge(), d.edge()],
        })
    }

    /// Replaces faces `{i,j,k}` and `{j,i,l}` by `{k,i,l}` and `{l,j,k}`.
    /// The edge keeps its id and now joins `l` and `k`.
    pub fn flip(&mut self, e: EdgeId) -> Result<(), SurfaceError> {
        let hinge = self.hinge_of(e)?;
        let h = e.half_edge();
        let t = h.twin();
        let a = self.next(h).0;
        let b = self.next(HalfEdgeId(a)).0;
        let c = self.next(t).0;
        let d = self.next(HalfEdgeId(c)).0;
        let (f1, f2) = (hinge.faces.0 .0, hinge.faces.1 .0);

        self.origin[h.0] = hinge.l;
        self.origin[t.0] = hinge.k;

        self.next[h.0] = b;
        self.next[b] = c;
        self.next[c] = h.0;
        self.next[t.0] = d;
        self.next[d] = a;
        self.next[a] = t.0;

        self.face[h.0] = f1;
        self.face[b] = f1;
        self.face[c] = f1;
        self.face[t.0] = f2;
        self.face[d] = f2;
        self.face[a] = f2;
        self.face_half_edge[f1] = h.0;
        self.face_half_edge[f2] = t.0;
        Ok(())
    }

    /// Checks the half-edge algebra: twins pair up opposite directions,
    /// `next` cycles have length three, and faces agree with `next`.
    pub fn check_invariants(&self) -> Result<(), String> {
        for h in 0..self.num_half_edges() {
            let hh = HalfEdgeId(h);
            let n1 = self.next(hh);
            let n3 = self.next(self.next(n1));
            if n3 != hh {
                return Err(format!("next^3 != id at half-edge {h}"));
            }
            if self.target(hh) != self.origin(n1) {
                return Err(format!("half-edge {h} does not chain into its successor"));
            }
            if self.face_of(n1) != self.face_of(hh) {
                return Err(format!("face mismatch along next at half-edge {h}"));
            }
        }
        for f in self.faces() {
            if self.face_of(HalfEdgeId(self.face_half_edge[f.0])) != f {
                return Err(format!("face {} points at a foreign half-edge", f.0));
            }
        }
        if 2 * self.num_edges() != 3 * self.num_faces() {
            return Err("2E != 3F".into());
        }
        Ok(())
    }

    /// Faces as cyclically normalised vertex triples, sorted. Two simplicial
    /// triangulations on the same labelled vertex set are equal exactly when
    /// their canonical face lists are.
    pub fn canonical_faces(&self) -> Vec<[usize; 3]> {
        let mut out: Vec<[usize; 3]> = self
            .face_list()
            .into_iter()
            .map(|t| {
                let m = (0..3).min_by_key(|&m| (t[m], t[(m + 1) % 3])).unwrap();
                [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Standard combinatorial fixtures.
pub mod fixtures {
    /// Boundary of a tetrahedron (sphere, 4 vertices).
    pub fn tetrahedron() -> Vec<[usize; 3]> {
        vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]]
    }

    /// Hexagonal bipyramid (sphere, 8 vertices): equator 0..6, poles 6 and 7.
    pub fn bipyramid() -> Vec<[usize; 3]> {
        let mut faces = Vec::new();
        for i in 0..6 {
            let j = (i + 1) % 6;
            faces.push([6, i, j]);
            faces.push([7, j, i]);
        }
        faces
    }

    /// The 7-vertex torus: faces `{i, i+1, i+3}` and `{i, i+3, i+2}` mod 7.
    pub fn torus7() -> Vec<[usize; 3]> {
        let mut faces = Vec::new();
        for i in 0..7 {
            faces.push([i, (i + 1) % 7, (i + 3) % 7]);
            faces.push([i, (i + 3) % 7, (i + 2) % 7]);
        }
        faces
    }

    /// A 10-vertex, 24-face genus-2 triangulation.
    pub fn genus2() -> Vec<[usize; 3]> {
        vec![
            [1, 8, 3],
            [1, 3, 2],
            [8, 2, 4],
            [8, 4, 3],
            [2, 3, 5],
            [2, 5, 4],
            [3, 4, 0],
            [3, 0, 5],
            [4, 5, 1],
            [5, 0, 8],
            [5, 8, 1],
            [2, 6, 7],
            [2, 7, 1],
            [6, 8, 7],
            [1, 7, 9],
            [7, 8, 0],
            [7, 0, 9],
            [8, 9, 2],
            [0, 4, 6],
            [1, 6, 4],
            [9, 0, 2],
            [6, 2, 0],
            [1, 9, 6],
            [8, 6, 9],
        ]
    }

    /// One vertex, three edges, two faces: the minimal torus triangulation.
    /// Every edge is a loop; returned as `(faces, face_edges)`.
    pub fn one_vertex_torus() -> (Vec<[usize; 3]>, Vec<[usize; 3]>) {
        (vec![[0, 0, 0], [0, 0, 0]], vec![[0, 1, 2], [0, 2, 1]])
    }
}
