//! Cone angles, angle defects, the α-curvature, the Jacobian `L = ∂K/∂h`
//! and the potential `W_α`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::delaunay::{DelaunayError, SurgeryState, DEFAULT_TOLERANCE};
use crate::hypgeom::{angle_side_derivatives, triangle_angles};
use crate::metric::{check_factor, length_derivative, ConformalClass, MetricError};
use crate::surface::{EdgeId, FaceId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("face {face:?} with sides {sides:?} violates a triangle inequality")]
    DegenerateTriangle { face: FaceId, sides: [f64; 3] },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Geometry of one face at a given conformal factor. Slot `m` is corner
/// `m` of the face; `sides[m]` is the side opposite that corner.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceGeometry {
    pub verts: [usize; 3],
    pub edges: [EdgeId; 3],
    pub sides: [f64; 3],
    pub angles: [f64; 3],
}

pub(crate) fn face_geometry(
    class: &ConformalClass,
    h: &[f64],
    f: FaceId,
) -> Result<FaceGeometry, CurvatureError> {
    let tri = class.triangulation();
    let verts = tri.face_vertices(f);
    let around = tri.face_edges(f);
    // side joining corners m+1 and m+2
    let edges = [around[1], around[2], around[0]];
    let sides = edges.map(|e| class.edge_length(h, e));
    let angles = triangle_angles(sides)
        .map_err(|_| CurvatureError::DegenerateTriangle { face: f, sides })?;
    Ok(FaceGeometry {
        verts,
        edges,
        sides,
        angles,
    })
}

impl FaceGeometry {
    /// `d[m][p] = ∂θ_m / ∂h_{slot p}` with inversive distances fixed.
    pub fn angle_factor_derivatives(&self, class: &ConformalClass, h: &[f64]) -> [[f64; 3]; 3] {
        let ds = angle_side_derivatives(self.sides, self.angles);
        // ∂ sides[n] / ∂ h_slot
        let mut dl = [[0.0; 3]; 3];
        for n in 0..3 {
            let (p, q) = ((n + 1) % 3, (n + 2) % 3);
            let inv = class.inversive_of(self.edges[n]);
            let (hp, hq) = (h[self.verts[p]], h[self.verts[q]]);
            dl[n][p] = length_derivative(inv, hp, hq, self.sides[n]);
            dl[n][q] = length_derivative(inv, hq, hp, self.sides[n]);
        }
        let mut d = [[0.0; 3]; 3];
        for m in 0..3 {
            for p in 0..3 {
                d[m][p] = (0..3).map(|n| ds[m][n] * dl[n][p]).sum();
            }
        }
        d
    }

    pub fn area(&self) -> f64 {
        PI - self.angles.iter().sum::<f64>()
    }
}

fn all_faces(class: &ConformalClass, h: &[f64]) -> Result<Vec<FaceGeometry>, CurvatureError> {
    check_factor(h)?;
    class
        .triangulation()
        .faces()
        .map(|f| face_geometry(class, h, f))
        .collect()
}

/// Sum of incident interior angles at each vertex.
pub fn cone_angles(class: &ConformalClass, h: &[f64]) -> Result<Vec<f64>, CurvatureError> {
    let mut theta = vec![0.0; class.num_vertices()];
    for g in all_faces(class, h)? {
        for m in 0..3 {
            theta[g.verts[m]] += g.angles[m];
        }
    }
    Ok(theta)
}

/// `K_i = 2π - θ_i`.
pub fn angle_defect(class: &ConformalClass, h: &[f64]) -> Result<Vec<f64>, CurvatureError> {
    Ok(cone_angles(class, h)?
        .into_iter()
        .map(|t| 2.0 * PI - t)
        .collect())
}

pub fn total_area(class: &ConformalClass, h: &[f64]) -> Result<f64, CurvatureError> {
    Ok(all_faces(class, h)?.iter().map(FaceGeometry::area).sum())
}

/// `Σ K_i - Σ area - 2πχ`, which vanishes identically.
pub fn gauss_bonnet_residual(class: &ConformalClass, h: &[f64]) -> Result<f64, CurvatureError> {
    let k: f64 = angle_defect(class, h)?.iter().sum();
    let chi = class.triangulation().euler_characteristic() as f64;
    Ok(k - total_area(class, h)? - 2.0 * PI * chi)
}

/// `R_{α,i} = K_i e^{-α h_i}`.
pub fn alpha_curvature(k: &[f64], h: &[f64], alpha: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return k.to_vec();
    }
    k.iter()
        .zip(h)
        .map(|(&ki, &hi)| ki * (-alpha * hi).exp())
        .collect()
}

/// Analytic Jacobian `L_ij = ∂K_i / ∂h_j` on the current triangulation.
pub fn jacobian(class: &ConformalClass, h: &[f64]) -> Result<DMatrix<f64>, CurvatureError> {
    let n = class.num_vertices();
    let mut l = DMatrix::zeros(n, n);
    for g in all_faces(class, h)? {
        let d = g.angle_factor_derivatives(class, h);
        for m in 0..3 {
            for p in 0..3 {
                l[(g.verts[m], g.verts[p])] -= d[m][p];
            }
        }
    }
    Ok(l)
}

/// The splitting `L = L_A + L_B` of the Jacobian.
#[derive(Clone, Debug)]
pub struct JacobianSplit {
    /// Edge weights `w_ij = -(∂θ^i_{jk}/∂h_j + ∂θ^i_{jl}/∂h_j)`, by edge id.
    pub weights: Vec<f64>,
    /// Diagonal of `L_A`: `A_i = Σ_{j∼i} (-w_ij)(cosh l_ij - 1)`.
    pub diagonal: Vec<f64>,
    pub la: DMatrix<f64>,
    pub lb: DMatrix<f64>,
}

pub fn jacobian_split(class: &ConformalClass, h: &[f64]) -> Result<JacobianSplit, CurvatureError> {
    let tri = class.triangulation();
    let n = class.num_vertices();
    let mut weights = vec![0.0; tri.num_edges()];
    for g in all_faces(class, h)? {
        let d = g.angle_factor_derivatives(class, h);
        for side in 0..3 {
            let (p, q) = ((side + 1) % 3, (side + 2) % 3);
            weights[g.edges[side].0] -= 0.5 * (d[p][q] + d[q][p]);
        }
    }
    let mut diagonal = vec![0.0; n];
    let mut lb = DMatrix::zeros(n, n);
    for e in tri.edges() {
        let (a, b) = tri.endpoints(e);
        let w = weights[e.0];
        let c = class.edge_length(h, e).cosh() - 1.0;
        diagonal[a] -= w * c;
        diagonal[b] -= w * c;
        lb[(a, b)] += w;
        lb[(b, a)] += w;
        lb[(a, a)] -= w;
        lb[(b, b)] -= w;
    }
    let la = DMatrix::from_diagonal(&DVector::from_column_slice(&diagonal));
    Ok(JacobianSplit {
        weights,
        diagonal,
        la,
        lb,
    })
}

/// `(Δ_α f)_i = e^{-α h_i} (L f)_i`.
pub fn laplace_apply(l: &DMatrix<f64>, h: &[f64], alpha: f64, f: &[f64]) -> Vec<f64> {
    let lf = l * DVector::from_column_slice(f);
    lf.iter()
        .zip(h)
        .map(|(&v, &hi)| v * (-alpha * hi).exp())
        .collect()
}

/// The same operator written over edges:
/// `Σ_{j∼i} w_ij e^{-α h_i} (f_j - f_i) + A_i e^{-α h_i} f_i`.
pub fn laplace_hinge_form(
    split: &JacobianSplit,
    class: &ConformalClass,
    h: &[f64],
    alpha: f64,
    f: &[f64],
) -> Vec<f64> {
    let tri = class.triangulation();
    let mut out: Vec<f64> = split
        .diagonal
        .iter()
        .zip(f)
        .map(|(a, fi)| a * fi)
        .collect();
    for e in tri.edges() {
        let (a, b) = tri.endpoints(e);
        let w = split.weights[e.0];
        out[a] += w * (f[b] - f[a]);
        out[b] += w * (f[a] - f[b]);
    }
    for (o, &hi) in out.iter_mut().zip(h) {
        *o *= (-alpha * hi).exp();
    }
    out
}

/// `∇W_α = K - R̄ e^{α h}` on the current triangulation.
pub fn potential_grad(
    class: &ConformalClass,
    h: &[f64],
    alpha: f64,
    target: &[f64],
) -> Result<Vec<f64>, CurvatureError> {
    let k = angle_defect(class, h)?;
    Ok(gradient_from_defect(&k, h, alpha, target))
}

pub(crate) fn gradient_from_defect(k: &[f64], h: &[f64], alpha: f64, target: &[f64]) -> Vec<f64> {
    k.iter()
        .zip(h)
        .zip(target)
        .map(|((&ki, &hi), &ri)| ki - ri * (alpha * hi).exp())
        .collect()
}

/// `Hess W_α = L - α diag(R̄ e^{α h})`.
pub fn potential_hessian(
    class: &ConformalClass,
    h: &[f64],
    alpha: f64,
    target: &[f64],
) -> Result<DMatrix<f64>, CurvatureError> {
    let mut hess = jacobian(class, h)?;
    for i in 0..h.len() {
        hess[(i, i)] -= alpha * target[i] * (alpha * h[i]).exp();
    }
    Ok(hess)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("quadrature did not converge on [{0}, {1}] of the segment")]
    QuadratureNotConverged(f64, f64),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

/// Options for [`potential_diff`].
#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_depth: 30,
        }
    }
}

/// `W_α(h_b) - W_α(h_a)`, integrating the extended gradient along the
/// straight segment. The segment is cut at every weighted Delaunay wall;
/// each piece is integrated on its own triangulation with adaptive
/// 16-point Gauss–Legendre rules.
///
/// `class` must be weighted Delaunay at `h_a`.
pub fn potential_diff(
    class: &ConformalClass,
    h_a: &[f64],
    h_b: &[f64],
    alpha: f64,
    target: &[f64],
    quad: Quadrature,
) -> Result<f64, PotentialError> {
    if h_a == h_b {
        return Ok(0.0);
    }
    check_factor(h_a).map_err(CurvatureError::from)?;
    check_factor(h_b).map_err(CurvatureError::from)?;
    let mut state = SurgeryState::new(class.clone(), h_a.to_vec(), DEFAULT_TOLERANCE)?;
    let mut cells = Vec::new();
    state.advance_along(h_b, |s0, s1, cls| cells.push((s0, s1, cls.clone())))?;
    integrate_cells(&cells, h_a, h_b, alpha, target, quad)
}

/// `W_α(h_b) - W_α(h_a)` with the triangulation of `class` held fixed.
pub fn potential_diff_fixed(
    class: &ConformalClass,
    h_a: &[f64],
    h_b: &[f64],
    alpha: f64,
    target: &[f64],
    quad: Quadrature,
) -> Result<f64, PotentialError> {
    if h_a == h_b {
        return Ok(0.0);
    }
    integrate_cells(&[(0.0, 1.0, class.clone())], h_a, h_b, alpha, target, quad)
}

fn integrate_cells(
    cells: &[(f64, f64, ConformalClass)],
    h_a: &[f64],
    h_b: &[f64],
    alpha: f64,
    target: &[f64],
    quad: Quadrature,
) -> Result<f64, PotentialError> {
    let dir: Vec<f64> = h_b.iter().zip(h_a).map(|(b, a)| b - a).collect();
    let mut total = 0.0;
    for (s0, s1, cls) in cells {
        if s1 <= s0 {
            continue;
        }
        let f = |s: f64| -> Result<f64, CurvatureError> {
            let h: Vec<f64> = h_a.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            let g = potential_grad(cls, &h, alpha, target)?;
            Ok(g.iter().zip(&dir).map(|(gi, di)| gi * di).sum())
        };
        total += adaptive_gl(&f, *s0, *s1, gl16(&f, *s0, *s1)?, quad, 0)?;
    }
    Ok(total)
}

fn adaptive_gl<F>(f: &F, a: f64, b: f64, whole: f64, quad: Quadrature, depth: u32) -> Result<f64, PotentialError>
where
    F: Fn(f64) -> Result<f64, CurvatureError>,
{
    let m = 0.5 * (a + b);
    let left = gl16(f, a, m)?;
    let right = gl16(f, m, b)?;
    let refined = left + right;
    if (refined - whole).abs() <= quad.abs_tol.max(quad.rel_tol * refined.abs()) {
        return Ok(refined);
    }
    if depth >= quad.max_depth {
        return Err(PotentialError::QuadratureNotConverged(a, b));
    }
    let half = Quadrature {
        abs_tol: 0.5 * quad.abs_tol,
        ..quad
    };
    Ok(adaptive_gl(f, a, m, left, half, depth + 1)? + adaptive_gl(f, m, b, right, half, depth + 1)?)
}

fn gl16<F>(f: &F, a: f64, b: f64) -> Result<f64, CurvatureError>
where
    F: Fn(f64) -> Result<f64, CurvatureError>,
{
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    for &(x, w) in gauss_legendre_16() {
        sum += w * f(c + r * x)?;
    }
    Ok(r * sum)
}

/// Nodes and weights of the 16-point Gauss–Legendre rule on `[-1, 1]`,
/// computed once by Newton iteration on the Legendre polynomial.
fn gauss_legendre_16() -> &'static [(f64, f64); 16] {
    static RULE: OnceLock<[(f64, f64); 16]> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut rule = [(0.0, 0.0); N];
        for (k, slot) in rule.iter_mut().enumerate() {
            let mut x = (PI * (k as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for n in 2..=N {
                    let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{fixtures, Triangulation};
    use approx::assert_relative_eq;

    fn class_on(faces: &[[usize; 3]], seed: u64) -> ConformalClass {
        let tri = Triangulation::build_from_faces(faces).unwrap();
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        let inv = (0..tri.num_edges()).map(|_| 1.1 + next()).collect();
        let radii = (0..tri.num_vertices()).map(|_| 0.5 + next()).collect();
        ConformalClass::new(tri, inv, radii).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre_16();
        let w: f64 = rule.iter().map(|p| p.1).sum();
        assert_relative_eq!(w, 2.0, epsilon = 1e-14);
        // ∫ x^30 over [-1, 1] = 2/31
        let m: f64 = rule.iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert_relative_eq!(m, 2.0 / 31.0, epsilon = 1e-14);
    }

    #[test]
    fn regular_tetrahedron_has_equal_defects() {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        let class = ConformalClass::new(tri, vec![1.7; 6], vec![0.6; 4]).unwrap();
        let h = class.reference_factor();
        let k = angle_defect(&class, &h).unwrap();
        for ki in &k {
            assert_relative_eq!(*ki, k[0], epsilon = 1e-13);
        }
        assert!(gauss_bonnet_residual(&class, &h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_curvature_conventions() {
        let k = [PI, -0.3];
        let h = [1.0, 0.4];
        assert_eq!(alpha_curvature(&k, &h, 0.0), k.to_vec());
        let r = alpha_curvature(&k, &h, -2.0);
        assert_relative_eq!(r[0], PI * 1f64.exp().powi(2), epsilon = 1e-12);
        assert_relative_eq!(r[0], 23.213_404_357_363_384, epsilon = 1e-11);
        // e^{-2h} = tanh^2(r/2)
        let rad = crate::metric::r_from_h(0.4).unwrap();
        assert_relative_eq!(r[1], -0.3 / (0.5 * rad).tanh().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn jacobian_matches_differences_and_splits() {
        let class = class_on(&fixtures::torus7(), 3);
        let h = class.reference_factor();
        let l = jacobian(&class, &h).unwrap();
        let eps = 1e-6;
        for j in 0..h.len() {
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[j] += eps;
            hm[j] -= eps;
            let kp = angle_defect(&class, &hp).unwrap();
            let km = angle_defect(&class, &hm).unwrap();
            for i in 0..h.len() {
                let fd = (kp[i] - km[i]) / (2.0 * eps);
                assert!((fd - l[(i, j)]).abs() < 1e-6 * l[(i, j)].abs().max(1e-2));
            }
        }
        assert!((&l - l.transpose()).amax() < 1e-12);
        let split = jacobian_split(&class, &h).unwrap();
        assert!((&l - (&split.la + &split.lb)).amax() < 1e-12);
        for i in 0..h.len() {
            assert!(split.lb.row(i).sum().abs() < 1e-12);
        }
        let f: Vec<f64> = (0..h.len()).map(|i| (i as f64).sin()).collect();
        let a = laplace_apply(&l, &h, 1.3, &f);
        let b = laplace_hinge_form(&split, &class, &h, 1.3, &f);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn hessian_is_gradient_derivative() {
        let class = class_on(&fixtures::bipyramid(), 11);
        let h = class.reference_factor();
        let target = vec![0.4; h.len()];
        let hess = potential_hessian(&class, &h, 0.7, &target).unwrap();
        let eps = 1e-6;
        for j in 0..h.len() {
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[j] += eps;
            hm[j] -= eps;
            let gp = potential_grad(&class, &hp, 0.7, &target).unwrap();
            let gm = potential_grad(&class, &hm, 0.7, &target).unwrap();
            for i in 0..h.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                assert!((fd - hess[(i, j)]).abs() < 1e-5 * hess[(i, j)].abs().max(1e-2));
            }
        }
    }
}
