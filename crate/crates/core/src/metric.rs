//! Decorated piecewise hyperbolic metrics and their discrete conformal
//! factors.
//!
//! A [`ConformalClass`] stores the combinatorics, the inversive distance of
//! every edge and a reference decoration. Every metric in the class is a
//! function of the conformal factor `h_i = -ln tanh(r_i / 2)`, which gives
//! the identities `sinh r = 1 / sinh h` and `cosh r = coth h`. Edge lengths
//! are evaluated directly from `h` through
//!
//! ```text
//! cosh l_ij - 1 = (I_ij + cosh(h_i - h_j)) / (sinh h_i sinh h_j)
//! ```

use thiserror::Error;

use crate::hypgeom::{self, is_admissible};
use crate::surface::{EdgeId, FaceId, Triangulation};

/// Strict separation margin on inversive distances.
pub const SEPARATION_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("conformal factor h[{0}] = {1} is not positive")]
    NonPositiveFactor(usize, f64),
    #[error("radius r[{0}] = {1} is not positive")]
    NonPositiveRadius(usize, f64),
    #[error("edge {0} has inversive distance {1}, circles are not separated")]
    SeparationViolated(EdgeId, f64),
    #[error("expected {expected} values for {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

pub fn h_from_r(r: f64) -> f64 {
    -(0.5 * r).tanh().ln()
}

pub fn r_from_h(h: f64) -> Result<f64, MetricError> {
    if !(h > 0.0) {
        return Err(MetricError::NonPositiveFactor(0, h));
    }
    Ok(2.0 * (-h).exp().atanh())
}

/// The additive factor `u_i = ln(sinh r_i / sinh r0_i)`.
pub fn u_from_h(h: f64, r0: f64) -> Result<f64, MetricError> {
    if !(h > 0.0) {
        return Err(MetricError::NonPositiveFactor(0, h));
    }
    Ok(-h.sinh().ln() - r0.sinh().ln())
}

/// Rejects non-positive entries, naming the offending vertex.
pub fn check_factor(h: &[f64]) -> Result<(), MetricError> {
    match h.iter().position(|&x| !(x > 0.0)) {
        Some(i) => Err(MetricError::NonPositiveFactor(i, h[i])),
        None => Ok(()),
    }
}

/// Edge length from inversive distance and the two endpoint factors.
#[inline]
pub fn length_from_factors(inv: f64, hi: f64, hj: f64) -> f64 {
    let cm1 = (inv + (hi - hj).cosh()) / (hi.sinh() * hj.sinh());
    hypgeom::acosh_stable(1.0 + cm1)
}

/// `d l / d h_i` for the edge length above, with `h_j` fixed.
#[inline]
pub fn length_derivative(inv: f64, hi: f64, hj: f64, l: f64) -> f64 {
    let (si, sj) = (hi.sinh(), hj.sinh());
    -(inv * hi.cosh() + hj.cosh()) / (si * si * sj * l.sinh())
}

/// Inversive distance of an edge with length `l` between decorations with
/// factors `hi`, `hj`.
#[inline]
pub fn inversive_from_factors(l: f64, hi: f64, hj: f64) -> f64 {
    l.cosh() * hi.sinh() * hj.sinh() - hi.cosh() * hj.cosh()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoratedMetric {
    /// Indexed by edge id.
    pub lengths: Vec<f64>,
    /// Indexed by vertex.
    pub radii: Vec<f64>,
}

impl DecoratedMetric {
    pub fn length(&self, e: EdgeId) -> f64 {
        self.lengths[e.0]
    }

    pub fn face_sides(&self, tri: &Triangulation, f: FaceId) -> [f64; 3] {
        tri.face_edges(f).map(|e| self.lengths[e.0])
    }

    /// Inversive distance of every edge recomputed from lengths and radii.
    pub fn inversive_distances(&self, tri: &Triangulation) -> Vec<f64> {
        tri.edges()
            .map(|e| {
                let (a, b) = tri.endpoints(e);
                hypgeom::inversive_from_length(self.radii[a], self.radii[b], self.lengths[e.0])
            })
            .collect()
    }
}

/// A triangulated surface with fixed inversive distances and a reference
/// decoration.
///
/// The class also remembers an anchor: a conformal factor at which the
/// decorated surface is given by this triangulation. It starts at the
/// reference factor and moves with every flip, so other factors can be
/// reached by following a path from it.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalClass {
    tri: Triangulation,
    inversive: Vec<f64>,
    reference_radii: Vec<f64>,
    anchor: Vec<f64>,
}

impl ConformalClass {
    pub fn new(
        tri: Triangulation,
        inversive: Vec<f64>,
        reference_radii: Vec<f64>,
    ) -> Result<Self, MetricError> {
        if inversive.len() != tri.num_edges() {
            return Err(MetricError::LengthMismatch {
                what: "inversive distances",
                expected: tri.num_edges(),
                got: inversive.len(),
            });
        }
        if reference_radii.len() != tri.num_vertices() {
            return Err(MetricError::LengthMismatch {
                what: "radii",
                expected: tri.num_vertices(),
                got: reference_radii.len(),
            });
        }
        if let Some(i) = reference_radii.iter().position(|&r| !(r > 0.0)) {
            return Err(MetricError::NonPositiveRadius(i, reference_radii[i]));
        }
        if let Some(e) = inversive.iter().position(|&v| !(v > 1.0 + SEPARATION_MARGIN)) {
            return Err(MetricError::SeparationViolated(EdgeId(e), inversive[e]));
        }
        let anchor = reference_radii.iter().map(|&r| h_from_r(r)).collect();
        Ok(ConformalClass {
            tri,
            inversive,
            reference_radii,
            anchor,
        })
    }

    /// Builds the class of a decorated metric given by edge lengths and radii.
    pub fn from_lengths(
        tri: Triangulation,
        lengths: &[f64],
        radii: Vec<f64>,
    ) -> Result<Self, MetricError> {
        if lengths.len() != tri.num_edges() {
            return Err(MetricError::LengthMismatch {
                what: "lengths",
                expected: tri.num_edges(),
                got: lengths.len(),
            });
        }
        if let Some(i) = radii.iter().position(|&r| !(r > 0.0)) {
            return Err(MetricError::NonPositiveRadius(i, radii[i]));
        }
        let metric = DecoratedMetric {
            lengths: lengths.to_vec(),
            radii,
        };
        let inversive = metric.inversive_distances(&tri);
        Self::new(tri, inversive, metric.radii)
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn num_vertices(&self) -> usize {
        self.tri.num_vertices()
    }

    pub fn inversive(&self) -> &[f64] {
        &self.inversive
    }

    pub fn inversive_of(&self, e: EdgeId) -> f64 {
        self.inversive[e.0]
    }

    pub fn reference_radii(&self) -> &[f64] {
        &self.reference_radii
    }

    /// The conformal factor of the reference decoration.
    pub fn reference_factor(&self) -> Vec<f64> {
        self.reference_radii.iter().map(|&r| h_from_r(r)).collect()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub(crate) fn set_anchor(&mut self, h: &[f64]) {
        self.anchor.clear();
        self.anchor.extend_from_slice(h);
    }

    /// Edge lengths at `h`, indexed by edge id. Does not check `h`.
    pub fn lengths(&self, h: &[f64]) -> Vec<f64> {
        self.tri
            .edges()
            .map(|e| self.edge_length(h, e))
            .collect()
    }

    #[inline]
    pub fn edge_length(&self, h: &[f64], e: EdgeId) -> f64 {
        let (a, b) = self.tri.endpoints(e);
        length_from_factors(self.inversive[e.0], h[a], h[b])
    }

    /// Replaces the combinatorics after a flip of `e` whose new length at
    /// factor `h` is `new_length`.
    pub(crate) fn apply_flip(&mut self, e: EdgeId, h: &[f64], new_length: f64) {
        self.tri
            .flip(e)
            .expect("flip is only applied to hinges that were already resolved");
        let (a, b) = self.tri.endpoints(e);
        self.inversive[e.0] = inversive_from_factors(new_length, h[a], h[b]);
        self.set_anchor(h);
    }
}

/// The decorated metric of the class at conformal factor `h`.
pub fn realize(class: &ConformalClass, h: &[f64]) -> Result<DecoratedMetric, MetricError> {
    check_len(h, class.num_vertices())?;
    check_factor(h)?;
    let radii = h.iter().map(|&x| r_from_h(x)).collect::<Result<Vec<_>, _>>()?;
    Ok(DecoratedMetric {
        lengths: class.lengths(h),
        radii,
    })
}

/// The same metric computed through the multiplicative change of the
/// reference decoration: `sinh r~ = e^u sinh r` and
/// `cosh l~ = e^{u_i+u_j}(cosh l - cosh r_i cosh r_j)
///            + sqrt((1 + e^{2u_i} sinh^2 r_i)(1 + e^{2u_j} sinh^2 r_j))`.
pub fn realize_dce(class: &ConformalClass, h: &[f64]) -> Result<DecoratedMetric, MetricError> {
    check_len(h, class.num_vertices())?;
    check_factor(h)?;
    let r0 = class.reference_radii();
    let u = h
        .iter()
        .zip(r0)
        .map(|(&x, &r)| u_from_h(x, r))
        .collect::<Result<Vec<_>, _>>()?;
    let tri = class.triangulation();
    let lengths = tri
        .edges()
        .map(|e| {
            let (a, b) = tri.endpoints(e);
            let l0 = length_from_factors(class.inversive_of(e), h_from_r(r0[a]), h_from_r(r0[b]));
            let (sa, sb) = (r0[a].sinh(), r0[b].sinh());
            let (ea, eb) = (u[a].exp(), u[b].exp());
            let c = ea * eb * (l0.cosh() - r0[a].cosh() * r0[b].cosh())
                + ((1.0 + (ea * sa).powi(2)) * (1.0 + (eb * sb).powi(2))).sqrt();
            c.acosh()
        })
        .collect();
    let radii = u
        .iter()
        .zip(r0)
        .map(|(&ui, &r)| (ui.exp() * r.sinh()).asinh())
        .collect();
    Ok(DecoratedMetric { lengths, radii })
}

fn check_len(h: &[f64], n: usize) -> Result<(), MetricError> {
    if h.len() != n {
        return Err(MetricError::LengthMismatch {
            what: "conformal factor",
            expected: n,
            got: h.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub inadmissible_faces: Vec<FaceId>,
    pub overlapping_edges: Vec<(EdgeId, f64)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.inadmissible_faces.is_empty() && self.overlapping_edges.is_empty()
    }
}

/// Lists faces that break a triangle inequality and edges whose
/// vertex-circles are not separated.
pub fn validate(metric: &DecoratedMetric, tri: &Triangulation) -> ValidationReport {
    let inadmissible_faces = tri
        .faces()
        .filter(|&f| {
            let [a, b, c] = metric.face_sides(tri, f);
            !is_admissible(a, b, c)
        })
        .collect();
    let overlapping_edges = tri
        .edges()
        .zip(metric.inversive_distances(tri))
        .filter(|&(_, inv)| !(inv > 1.0 + SEPARATION_MARGIN))
        .collect();
    ValidationReport {
        inadmissible_faces,
        overlapping_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::fixtures;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tetra_class() -> ConformalClass {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        ConformalClass::new(tri, vec![1.5, 2.0, 1.2, 1.8, 1.3, 2.5], vec![0.5, 0.8, 1.1, 0.6]).unwrap()
    }

    #[test]
    fn factor_of_reference_radius() {
        // tanh(r / 2) = 1/e
        let r = 2.0 * (-1f64).exp().atanh();
        assert_relative_eq!(r, 0.771_936_832_905_304_7, epsilon = 1e-14);
        assert_relative_eq!(h_from_r(r), 1.0, epsilon = 1e-14);
        assert_relative_eq!(r_from_h(1.0).unwrap(), r, epsilon = 1e-14);
        assert!(r_from_h(0.0).is_err());
        assert!(h_from_r(20.0) < 1e-8);
        assert!(h_from_r(1e-8) > 15.0);
    }

    #[test]
    fn radius_derivative_bridge() {
        // dr/dh = -1/sinh h
        for &h in &[0.2, 0.9, 2.5] {
            let eps = 1e-6;
            let fd = (r_from_h(h + eps).unwrap() - r_from_h(h - eps).unwrap()) / (2.0 * eps);
            assert_relative_eq!(fd, -1.0 / f64::sinh(h), max_relative = 1e-8);
        }
    }

    #[test]
    fn u_vanishes_at_reference() {
        let r0 = 0.9;
        assert!(u_from_h(h_from_r(r0), r0).unwrap().abs() < 1e-14);
        assert!(u_from_h(1.1, r0).unwrap() < u_from_h(1.0, r0).unwrap());
    }

    #[test]
    fn realize_at_reference_reproduces_class() {
        let class = tetra_class();
        let m = realize(&class, &class.reference_factor()).unwrap();
        for (a, b) in m.radii.iter().zip(class.reference_radii()) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
        for (a, b) in m.inversive_distances(class.triangulation()).iter().zip(class.inversive()) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
        assert!(validate(&m, class.triangulation()).is_clean());
    }

    #[test]
    fn validate_flags_bad_face_and_overlap() {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        // edges of face 0 are e0 = {0,1}, e1 = {1,2}, e2 = {2,0}
        let mut m = DecoratedMetric {
            lengths: vec![1.0, 1.0, 3.0, 1.0, 1.0, 1.0],
            radii: vec![0.1; 4],
        };
        let report = validate(&m, &tri);
        assert!(report.inadmissible_faces.contains(&FaceId(0)));
        // two circles of radius 0.4 at distance 0.5 overlap
        m.radii = vec![0.4; 4];
        m.lengths = vec![1.0; 6];
        m.lengths[3] = 0.5;
        let report = validate(&m, &tri);
        assert_eq!(report.overlapping_edges.len(), 1);
        assert_eq!(report.overlapping_edges[0].0, EdgeId(3));
        assert!(report.overlapping_edges[0].1 < 1.0);
    }

    #[test]
    fn rejects_non_separated_class() {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        let err = ConformalClass::new(tri, vec![1.5, 0.5, 1.2, 1.8, 1.3, 2.5], vec![1.0; 4]);
        assert_eq!(err, Err(MetricError::SeparationViolated(EdgeId(1), 0.5)));
    }

    proptest! {
        #[test]
        fn factor_radius_round_trip(r in 0.01f64..6.0) {
            let h = h_from_r(r);
            prop_assert!(h > 0.0);
            prop_assert!((r_from_h(h).unwrap() - r).abs() < 1e-12 * r.max(1.0));
            // coth h = cosh r
            prop_assert!(((1.0 / h.tanh()) - r.cosh()).abs() < 1e-12 * r.cosh());
        }

        #[test]
        fn u_relation(h in 0.05f64..4.0, r0 in 0.1f64..3.0) {
            let u = u_from_h(h, r0).unwrap();
            let lhs = 1.0 / h.tanh();
            let rhs = (1.0 + (2.0 * u).exp() * r0.sinh().powi(2)).sqrt();
            prop_assert!((lhs - rhs).abs() < 1e-10 * lhs);
        }

        #[test]
        fn both_routes_agree_and_preserve_inversive(
            h in proptest::collection::vec(0.2f64..3.0, 4)
        ) {
            let class = tetra_class();
            let a = realize(&class, &h).unwrap();
            let b = realize_dce(&class, &h).unwrap();
            for (x, y) in a.lengths.iter().zip(&b.lengths) {
                prop_assert!((x - y).abs() < 1e-10 * x.max(1.0));
            }
            for (x, y) in a.radii.iter().zip(&b.radii) {
                prop_assert!((x - y).abs() < 1e-10 * x.max(1.0));
            }
            for (x, y) in a.inversive_distances(class.triangulation()).iter().zip(class.inversive()) {
                prop_assert!((x - y).abs() < 1e-10 * y);
            }
        }

        #[test]
        fn length_derivative_matches_difference(
            inv in 1.01f64..4.0, hi in 0.2f64..3.0, hj in 0.2f64..3.0
        ) {
            let l = length_from_factors(inv, hi, hj);
            let eps = 1e-6;
            let fd = (length_from_factors(inv, hi + eps, hj) - length_from_factors(inv, hi - eps, hj)) / (2.0 * eps);
            let an = length_derivative(inv, hi, hj, l);
            prop_assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0));
        }
    }
}
