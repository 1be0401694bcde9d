//! Hyperbolic plane geometry in the hyperboloid model.
//!
//! Points of H² are vectors `p` in R^{2,1} with `<p, p> = -1`, `p0 > 0`, where
//! `<a, b> = -a0 b0 + a1 b1 + a2 b2`.
//!
//! Generalized circles (circles, horocycles, hypercycles and geodesics) are
//! stored as a [`Circle`]: a Minkowski vector `n` together with an offset `o`
//! describing the open region `{x : <x, n> + o > 0}`. The pair is normalized
//! so that `<n, n> + o^2 = 1`; with this normalization the pairing
//! `-(<n1, n2> + o1 o2)` is the inversive distance of two circles, and it is
//! the cosine of the angle between the regions' normals when they meet. The
//! vertex-circle with center `p` and radius `r` is `(p / sinh r, coth r)`;
//! the geodesic through `p`, `q` is `(n, 0)` with `n` the unit normal.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Margin on triangle inequalities.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("vertex-circles overlap: inversive distance {0} < 1")]
    SeparationViolated(f64),
    #[error("triangle ({0}, {1}, {2}) violates a triangle inequality")]
    DegenerateTriangle(f64, f64, f64),
    #[error("orthocircle system is singular")]
    SingularSystem,
    #[error("non-positive radius {0}")]
    NonPositiveRadius(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct MinkowskiVector {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
}

impl MinkowskiVector {
    pub const fn new(x0: f64, x1: f64, x2: f64) -> Self {
        Self { x0, x1, x2 }
    }

    /// The base point `(1, 0, 0)` of the hyperboloid.
    pub const fn origin() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        -self.x0 * other.x0 + self.x1 * other.x1 + self.x2 * other.x2
    }

    /// Lorentzian cross product: orthogonal to both factors under `dot`.
    pub fn cross(&self, other: &Self) -> Self {
        let c0 = self.x1 * other.x2 - self.x2 * other.x1;
        let c1 = self.x2 * other.x0 - self.x0 * other.x2;
        let c2 = self.x0 * other.x1 - self.x1 * other.x0;
        Self::new(-c0, c1, c2)
    }

    /// Hyperbolic distance between two hyperboloid points.
    pub fn distance(&self, other: &Self) -> f64 {
        acosh_stable(-self.dot(other))
    }

    /// Point at distance `d` from the origin in direction `phi`.
    pub fn polar(d: f64, phi: f64) -> Self {
        let s = d.sinh();
        Self::new(d.cosh(), s * phi.cos(), s * phi.sin())
    }
}

impl Add for MinkowskiVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x0 + o.x0, self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for MinkowskiVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x0 - o.x0, self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Mul<f64> for MinkowskiVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x0 * s, self.x1 * s, self.x2 * s)
    }
}

impl Neg for MinkowskiVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x0, -self.x1, -self.x2)
    }
}

/// A generalized circle `{x : <x, normal> + offset > 0}` with
/// `<normal, normal> + offset^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub normal: MinkowskiVector,
    pub offset: f64,
}

impl Circle {
    pub fn vertex_circle(center: MinkowskiVector, radius: f64) -> Self {
        let s = radius.sinh();
        Circle {
            normal: center * (1.0 / s),
            offset: radius.cosh() / s,
        }
    }

    /// Geodesic through `p` and `q` with `toward` in its positive side.
    pub fn geodesic(p: &MinkowskiVector, q: &MinkowskiVector, toward: &MinkowskiVector) -> Self {
        let n = p.cross(q);
        let norm = n.dot(&n).sqrt();
        let mut n = n * (1.0 / norm);
        if toward.dot(&n) < 0.0 {
            n = -n;
        }
        Circle { normal: n, offset: 0.0 }
    }

    /// Lorentzian pairing of the lifted vectors in R^{3,1}.
    #[inline]
    pub fn pairing(&self, other: &Circle) -> f64 {
        self.normal.dot(&other.normal) + self.offset * other.offset
    }

    pub fn inversive_distance(&self, other: &Circle) -> f64 {
        -self.pairing(other)
    }

    /// Signed region function: positive inside.
    pub fn evaluate(&self, x: &MinkowskiVector) -> f64 {
        x.dot(&self.normal) + self.offset
    }
}

/// `acosh` written through `ln_1p` so arguments just above 1 keep their
/// relative accuracy.
#[inline]
pub fn acosh_stable(x: f64) -> f64 {
    let y = (x - 1.0).max(0.0);
    (y + (y * (2.0 + y)).sqrt()).ln_1p()
}

/// Edge length between vertex-circles of radii `ri`, `rj` at inversive
/// distance `inv`, from `cosh l = I sinh ri sinh rj + cosh ri cosh rj`.
/// Tangent circles (`I = 1`) are accepted; overlapping ones are not.
pub fn length_from_inversive(ri: f64, rj: f64, inv: f64) -> Result<f64, GeomError> {
    if ri <= 0.0 {
        return Err(GeomError::NonPositiveRadius(ri));
    }
    if rj <= 0.0 {
        return Err(GeomError::NonPositiveRadius(rj));
    }
    if inv < 1.0 {
        return Err(GeomError::SeparationViolated(inv));
    }
    // cosh l - 1 = I sinh ri sinh rj + (cosh ri cosh rj - 1)
    let cm1 = inv * ri.sinh() * rj.sinh() + (ri.cosh() * rj.cosh() - 1.0);
    Ok(acosh_stable(1.0 + cm1))
}

pub fn inversive_from_length(ri: f64, rj: f64, l: f64) -> f64 {
    (l.cosh() - ri.cosh() * rj.cosh()) / (ri.sinh() * rj.sinh())
}

/// Strict triangle inequalities with the admissibility margin.
pub fn is_admissible(a: f64, b: f64, c: f64) -> bool {
    a > 0.0
        && b > 0.0
        && c > 0.0
        && a + b > c + ADMISSIBILITY_MARGIN
        && b + c > a + ADMISSIBILITY_MARGIN
        && c + a > b + ADMISSIBILITY_MARGIN
}

/// Interior angle opposite side `c` of the hyperbolic triangle with sides
/// `a`, `b`, `c`, via the half-angle form of the law of cosines.
pub fn interior_angle(a: f64, b: f64, c: f64) -> Result<f64, GeomError> {
    if !is_admissible(a, b, c) {
        return Err(GeomError::DegenerateTriangle(a, b, c));
    }
    Ok(half_angle(a, b, c))
}

#[inline]
fn half_angle(a: f64, b: f64, c: f64) -> f64 {
    let s = 0.5 * (a + b + c);
    let num = (s - a).sinh() * (s - b).sinh();
    let den = s.sinh() * (s - c).sinh();
    2.0 * (num / den).sqrt().atan()
}

/// All three angles; `angles[m]` is opposite `sides[m]`.
pub fn triangle_angles(sides: [f64; 3]) -> Result<[f64; 3], GeomError> {
    let [a, b, c] = sides;
    if !is_admissible(a, b, c) {
        return Err(GeomError::DegenerateTriangle(a, b, c));
    }
    Ok([half_angle(b, c, a), half_angle(c, a, b), half_angle(a, b, c)])
}

/// Derivatives of the three angles with respect to the three sides:
/// `d[m][n] = d angle_m / d side_n` (angle `m` opposite side `m`).
pub fn angle_side_derivatives(sides: [f64; 3], angles: [f64; 3]) -> [[f64; 3]; 3] {
    let mut d = [[0.0; 3]; 3];
    for m in 0..3 {
        let p = (m + 1) % 3;
        let q = (m + 2) % 3;
        let own = sides[m].sinh() / (sides[p].sinh() * sides[q].sinh() * angles[m].sin());
        d[m][m] = own;
        d[m][p] = -own * angles[q].cos();
        d[m][q] = -own * angles[p].cos();
    }
    d
}

/// Hyperbolic area `pi - (sum of angles)`.
pub fn triangle_area(a: f64, b: f64, c: f64) -> Result<f64, GeomError> {
    let t = triangle_angles([a, b, c])?;
    Ok(PI - t[0] - t[1] - t[2])
}

/// Lengths of a hinge: the shared edge `ij`, the sides `ik`, `jk` of the
/// first triangle and `il`, `jl` of the second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HingeLengths {
    pub ij: f64,
    pub ik: f64,
    pub jk: f64,
    pub il: f64,
    pub jl: f64,
}

impl HingeLengths {
    /// The same hinge seen with `i` and `j` exchanged.
    pub fn swapped(&self) -> Self {
        HingeLengths {
            ij: self.ij,
            ik: self.jk,
            jk: self.ik,
            il: self.jl,
            jl: self.il,
        }
    }
}

/// Isometric embedding of a hinge: `p_i` at the origin, `p_j` on the positive
/// x1 axis, `p_k` with `x2 > 0` and `p_l` with `x2 < 0`.
pub fn embed_hinge(l: &HingeLengths) -> Result<[MinkowskiVector; 4], GeomError> {
    // angle at i in each triangle, opposite jk resp. jl
    let at_k = interior_angle(l.ij, l.ik, l.jk)?;
    let at_l = interior_angle(l.ij, l.il, l.jl)?;
    Ok([
        MinkowskiVector::origin(),
        MinkowskiVector::polar(l.ij, 0.0),
        MinkowskiVector::polar(l.ik, at_k),
        MinkowskiVector::polar(l.il, -at_l),
    ])
}

/// The circle orthogonal to the three vertex-circles of a decorated
/// triangle, oriented so that the triangle's vertices lie outside it.
pub fn orthocircle(
    p: [MinkowskiVector; 3],
    r: [f64; 3],
) -> Result<Circle, GeomError> {
    let rows: Vec<[f64; 4]> = (0..3)
        .map(|m| {
            let c = Circle::vertex_circle(p[m], r[m]);
            // covariant coefficients of the pairing
            [-c.normal.x0, c.normal.x1, c.normal.x2, c.offset]
        })
        .collect();
    let x = null_vector(&rows[0], &rows[1], &rows[2]);
    let (n, o) = (MinkowskiVector::new(x[0], x[1], x[2]), x[3]);
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let q = n.dot(&n) + o * o;
    if scale == 0.0 || !(q > 1e-24 * scale * scale) {
        return Err(GeomError::SingularSystem);
    }
    let inv = 1.0 / q.sqrt();
    let mut c = Circle {
        normal: n * inv,
        offset: o * inv,
    };
    if c.evaluate(&p[0]) > 0.0 {
        c = Circle {
            normal: -c.normal,
            offset: -c.offset,
        };
    }
    Ok(c)
}

/// A vector Euclidean-orthogonal to three rows in R^4 (generalized cross
/// product by cofactors).
fn null_vector(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> [f64; 4] {
    let det3 = |cols: [usize; 3]| -> f64 {
        let m = |r: &[f64; 4], k: usize| r[cols[k]];
        m(a, 0) * (m(b, 1) * m(c, 2) - m(b, 2) * m(c, 1))
            - m(a, 1) * (m(b, 0) * m(c, 2) - m(b, 2) * m(c, 0))
            + m(a, 2) * (m(b, 0) * m(c, 1) - m(b, 1) * m(c, 0))
    };
    [
        -det3([1, 2, 3]),
        det3([0, 2, 3]),
        -det3([0, 1, 3]),
        det3([0, 1, 2]),
    ]
}

/// Angle `alpha_ij^k` between a face circle and the edge through `p_i`,
/// `p_j`, measured on the side away from `p_k`: the corner angle of the
/// region inside the circle and across the edge from `k`.
///
/// The face circle and the edge geodesic both lie in the pencil orthogonal
/// to the two separated vertex-circles at `i` and `j`, a spacelike plane, so
/// the cosine below is always in `[-1, 1]`. When the circle misses the edge
/// inside H² the value is the angle at the pencil's common points outside the
/// model, i.e. the continuation of the intersection angle.
pub fn edge_circle_angle(
    circle: &Circle,
    p_i: &MinkowskiVector,
    p_j: &MinkowskiVector,
    p_k: &MinkowskiVector,
) -> f64 {
    edge_circle_cos(circle, p_i, p_j, p_k).acos()
}

pub(crate) fn edge_circle_cos(
    circle: &Circle,
    p_i: &MinkowskiVector,
    p_j: &MinkowskiVector,
    p_k: &MinkowskiVector,
) -> f64 {
    let g = Circle::geodesic(p_i, p_j, p_k);
    circle.pairing(&g).clamp(-1.0, 1.0)
}

/// Whether the quadrilateral `i k j l` is strictly convex at `i` and `j`,
/// so that the diagonal `kl` lies inside it.
pub fn is_convex(l: &HingeLengths) -> bool {
    let corner = |a: f64, b: f64, opposite: f64| interior_angle(a, b, opposite).unwrap_or(PI);
    let at_i = corner(l.ij, l.ik, l.jk) + corner(l.ij, l.il, l.jl);
    let at_j = corner(l.ij, l.jk, l.ik) + corner(l.ij, l.jl, l.il);
    at_i < PI && at_j < PI
}

/// Length of the other diagonal `kl` of a hinge.
pub fn flip_length(l: &HingeLengths) -> Result<f64, GeomError> {
    let [_, _, pk, pl] = embed_hinge(l)?;
    Ok(pk.distance(&pl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tangent_circles_have_length_sum() {
        assert_relative_eq!(length_from_inversive(1.0, 1.0, 1.0).unwrap(), 2.0, epsilon = 1e-14);
        assert!(matches!(
            length_from_inversive(1.0, 1.0, 0.5),
            Err(GeomError::SeparationViolated(_))
        ));
    }

    #[test]
    fn inversive_length_reference_value() {
        // cosh l = 2 sinh .5 sinh .7 + cosh .5 cosh .7, evaluated at 30 digits
        let l = length_from_inversive(0.5, 0.7, 2.0).unwrap();
        assert_relative_eq!(l, 1.428_448_113_794_704_3, epsilon = 1e-13);
        assert_relative_eq!(inversive_from_length(0.5, 0.7, l), 2.0, max_relative = 1e-12);
        assert_relative_eq!(inversive_from_length(1.0, 1.0, 2.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equilateral_angle_and_area() {
        // cos t = (cosh^2 1 - cosh 1) / sinh^2 1 = cosh 1 / (1 + cosh 1)
        let c1 = 1f64.cosh();
        let expected = (c1 / (1.0 + c1)).acos();
        let t = interior_angle(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(t, expected, epsilon = 1e-14);
        assert_relative_eq!(t, 0.918_797_872_178_027_4, epsilon = 1e-14);
        assert!(3.0 * t < PI);
        let area = triangle_area(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(area, 0.385_199_037_055_711_1, epsilon = 1e-13);
        assert_relative_eq!(area, PI - 3.0 * expected, epsilon = 1e-13);
    }

    #[test]
    fn thin_triangle_angle_vanishes() {
        let t = interior_angle(1.0, 1.0, 1e-6).unwrap();
        assert!(t < 1e-5);
        assert!(interior_angle(1.0, 1.0, 2.5).is_err());
        assert!(triangle_area(1e-4, 1e-4, 1e-4).unwrap() < 1e-8);
    }

    #[test]
    fn unit_symmetric_hinge_flip_length() {
        let one = HingeLengths {
            ij: 1.0,
            ik: 1.0,
            jk: 1.0,
            il: 1.0,
            jl: 1.0,
        };
        // two unit equilateral triangles; kl crosses ij at its midpoint m with
        // cosh(d(k, m)) = cosh 1 / cosh 1/2
        let half = (1f64.cosh() / 0.5f64.cosh()).acosh();
        let l = flip_length(&one).unwrap();
        assert_relative_eq!(l, 2.0 * half, epsilon = 1e-12);
        assert_relative_eq!(l, 1.668_050_457_962_661_3, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_normal_is_orthogonal_to_points() {
        let p = MinkowskiVector::polar(0.7, 0.3);
        let q = MinkowskiVector::polar(1.1, 2.0);
        let k = MinkowskiVector::polar(0.4, -1.0);
        let g = Circle::geodesic(&p, &q, &k);
        assert!(g.evaluate(&p).abs() < 1e-12);
        assert!(g.evaluate(&q).abs() < 1e-12);
        assert!(g.evaluate(&k) > 0.0);
        assert_relative_eq!(g.pairing(&g), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vertex_circles_pair_to_inversive_distance() {
        let p = MinkowskiVector::polar(0.0, 0.0);
        let q = MinkowskiVector::polar(2.3, 1.0);
        let (r, s) = (0.4, 0.9);
        let inv = inversive_from_length(r, s, 2.3);
        let a = Circle::vertex_circle(p, r);
        let b = Circle::vertex_circle(q, s);
        assert_relative_eq!(a.inversive_distance(&b), inv, epsilon = 1e-12);
        assert_relative_eq!(a.pairing(&a), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_triangle_edge_angle_tends_to_inscribed_angle() {
        // at small scale with tiny decorations the face circle is nearly the
        // Euclidean circumcircle, and the tangent-chord angle is the angle at k
        let s = 1e-3;
        let l = HingeLengths {
            ij: 1.0 * s,
            ik: 0.8 * s,
            jk: 0.6 * s,
            il: 0.7 * s,
            jl: 0.7 * s,
        };
        let [pi, pj, pk, _] = embed_hinge(&l).unwrap();
        let c = orthocircle([pi, pj, pk], [1e-7; 3]).unwrap();
        let alpha = edge_circle_angle(&c, &pi, &pj, &pk);
        // 0.6-0.8-1.0 is right-angled at k
        assert!((alpha - PI / 2.0).abs() < 1e-4, "alpha = {alpha}");
        let [_, _, at_k] = triangle_angles([l.jk, l.ik, l.ij]).unwrap();
        assert!((alpha - at_k).abs() < 1e-4);
    }

    #[test]
    fn equal_radii_equilateral_orthocircle_is_centered() {
        let l = HingeLengths {
            ij: 1.3,
            ik: 1.3,
            jk: 1.3,
            il: 1.3,
            jl: 1.3,
        };
        let [pi, pj, pk, _] = embed_hinge(&l).unwrap();
        let c = orthocircle([pi, pj, pk], [0.4; 3]).unwrap();
        // the center direction is equidistant: the region function takes the
        // same value at the three vertices
        let v = [c.evaluate(&pi), c.evaluate(&pj), c.evaluate(&pk)];
        assert_relative_eq!(v[0], v[1], epsilon = 1e-12);
        assert_relative_eq!(v[0], v[2], epsilon = 1e-12);
        assert!(v[0] < 0.0);
    }

    fn mirror(p: &MinkowskiVector) -> MinkowskiVector {
        MinkowskiVector::new(p.x0, p.x1, -p.x2)
    }

    /// Rotation by `theta` followed by a boost of rapidity `beta` along x1.
    fn isometry(p: &MinkowskiVector, beta: f64, theta: f64) -> MinkowskiVector {
        let (c, s) = (theta.cos(), theta.sin());
        let (x1, x2) = (c * p.x1 - s * p.x2, s * p.x1 + c * p.x2);
        MinkowskiVector::new(beta.cosh() * p.x0 + beta.sinh() * x1, beta.sinh() * p.x0 + beta.cosh() * x1, x2)
    }

    fn hinge_strategy() -> impl proptest::strategy::Strategy<Value = HingeLengths> {
        use proptest::prelude::*;
        (0.2f64..2.5, 0.2f64..2.5, 0.2f64..2.5, 0.2f64..2.5, 0.2f64..2.5)
            .prop_filter("both faces admissible", |&(ij, ik, jk, il, jl)| {
                let ok = |a: f64, b: f64, c: f64| a + b > c + 0.05 && b + c > a + 0.05 && c + a > b + 0.05;
                ok(ij, ik, jk) && ok(ij, il, jl)
            })
            .prop_map(|(ij, ik, jk, il, jl)| HingeLengths { ij, ik, jk, il, jl })
    }

    proptest::proptest! {
        #[test]
        fn embedding_reproduces_lengths(l in hinge_strategy()) {
            let [pi, pj, pk, pl] = embed_hinge(&l).unwrap();
            for (a, b, d) in [(pi, pj, l.ij), (pi, pk, l.ik), (pj, pk, l.jk), (pi, pl, l.il), (pj, pl, l.jl)] {
                proptest::prop_assert!((a.distance(&b) - d).abs() < 1e-10);
            }
            proptest::prop_assert!(pk.x2 > 0.0 && pl.x2 < 0.0);
        }

        #[test]
        fn flipping_twice_returns_the_diagonal(l in hinge_strategy()) {
            proptest::prop_assume!(is_convex(&l));
            let kl = flip_length(&l).unwrap();
            // the hinge of kl: i' = k, j' = l, with i and j as the opposite vertices
            let back = HingeLengths { ij: kl, ik: l.ik, jk: l.il, il: l.jk, jl: l.jl };
            if let Ok(ij) = flip_length(&back) {
                proptest::prop_assert!((ij - l.ij).abs() < 1e-10, "{} vs {}", ij, l.ij);
            }
        }

        #[test]
        fn length_inversive_round_trip(ri in 0.05f64..3.0, rj in 0.05f64..3.0, inv in 1.0f64..50.0) {
            let l = length_from_inversive(ri, rj, inv).unwrap();
            proptest::prop_assert!((inversive_from_length(ri, rj, l) - inv).abs() < 1e-9 * inv);
        }

        #[test]
        fn angle_gradient_matches_differences(a in 0.2f64..2.0, b in 0.2f64..2.0, c in 0.2f64..2.0) {
            let sides = [a, b, c];
            proptest::prop_assume!(is_admissible(a, b, c) && a + b > c + 0.1 && b + c > a + 0.1 && c + a > b + 0.1);
            let angles = triangle_angles(sides).unwrap();
            let d = angle_side_derivatives(sides, angles);
            let step = 1e-6;
            for n in 0..3 {
                let (mut up, mut down) = (sides, sides);
                up[n] += step;
                down[n] -= step;
                let (tu, td) = (triangle_angles(up).unwrap(), triangle_angles(down).unwrap());
                for m in 0..3 {
                    let fd = (tu[m] - td[m]) / (2.0 * step);
                    proptest::prop_assert!((fd - d[m][n]).abs() < 1e-6 * (1.0 + d[m][n].abs()));
                }
            }
        }

        #[test]
        fn orthocircle_is_orthogonal_and_equivariant(
            l in hinge_strategy(),
            r in proptest::array::uniform3(0.02f64..0.3),
            beta in -1.5f64..1.5,
            theta in -3.0f64..3.0,
        ) {
            let [pi, pj, pk, _] = embed_hinge(&l).unwrap();
            let p = [pi, pj, pk];
            let c = orthocircle(p, r).unwrap();
            for m in 0..3 {
                proptest::prop_assert!(c.pairing(&Circle::vertex_circle(p[m], r[m])).abs() < 1e-9);
            }
            let moved = p.map(|x| isometry(&x, beta, theta));
            let cm = orthocircle(moved, r).unwrap();
            let expected = isometry(&c.normal, beta, theta);
            let scale = 1.0 + c.normal.x0.abs().max(c.normal.x1.abs()).max(c.normal.x2.abs());
            proptest::prop_assert!((cm.offset - c.offset).abs() < 1e-9 * scale);
            for (u, v) in [(cm.normal.x0, expected.x0), (cm.normal.x1, expected.x1), (cm.normal.x2, expected.x2)] {
                proptest::prop_assert!((u - v).abs() < 1e-9 * scale * beta.cosh() * 2.0);
            }
            let (a0, a1) = (edge_circle_angle(&c, &pi, &pj, &pk), edge_circle_angle(&cm, &moved[0], &moved[1], &moved[2]));
            proptest::prop_assert!((a0 - a1).abs() < 1e-8);
        }
    }

    #[test]
    fn mirrored_hinges_embed_as_reflections() {
        for (ij, side, other) in [(1.0, 1.0, 1.0), (1.3, 0.9, 1.7), (0.6, 2.0, 1.6)] {
            let l = HingeLengths { ij, ik: side, jk: other, il: side, jl: other };
            let [_, _, pk, pl] = embed_hinge(&l).unwrap();
            let m = mirror(&pk);
            assert!((m.x0 - pl.x0).abs() < 1e-12 && (m.x1 - pl.x1).abs() < 1e-12 && (m.x2 - pl.x2).abs() < 1e-12);
        }
    }

    /// Euclidean center and radius in the Poincare disk of the hyperbolic
    /// circle of radius `r` about the hyperboloid point `p`.
    fn disk_circle(p: &MinkowskiVector, r: f64) -> ([f64; 2], f64) {
        let d = p.x0.acosh();
        let phi = p.x2.atan2(p.x1);
        let near = ((d - r) / 2.0).tanh();
        let far = ((d + r) / 2.0).tanh();
        let mid = 0.5 * (near + far);
        ([mid * phi.cos(), mid * phi.sin()], 0.5 * (far - near))
    }

    /// The Euclidean circle orthogonal to three circles (radical circle).
    fn radical_circle(c: [([f64; 2], f64); 3]) -> Option<([f64; 2], f64)> {
        let row = |m: usize| {
            let ([x0, y0], s0) = c[0];
            let ([x, y], s) = c[m];
            (
                2.0 * (x - x0),
                2.0 * (y - y0),
                (x * x + y * y - s * s) - (x0 * x0 + y0 * y0 - s0 * s0),
            )
        };
        let (a, b, e) = row(1);
        let (cc, d, f) = row(2);
        let det = a * d - b * cc;
        let center = [(e * d - b * f) / det, (a * f - e * cc) / det];
        let ([x0, y0], s0) = c[0];
        let power = (center[0] - x0).powi(2) + (center[1] - y0).powi(2) - s0 * s0;
        (power > 0.0).then(|| (center, power.sqrt()))
    }

    #[test]
    fn edge_angle_agrees_with_poincare_disk_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 50 {
            let l = HingeLengths {
                ij: rng.gen_range(0.4..1.6),
                ik: rng.gen_range(0.4..1.6),
                jk: rng.gen_range(0.4..1.6),
                il: 1.0,
                jl: 1.0,
            };
            let Ok([pi, pj, pk, _]) = embed_hinge(&l) else { continue };
            let r = [rng.gen_range(0.02..0.2), rng.gen_range(0.02..0.2), rng.gen_range(0.02..0.2)];
            let circles = [disk_circle(&pi, r[0]), disk_circle(&pj, r[1]), disk_circle(&pk, r[2])];
            let Some(([cx, cy], rho)) = radical_circle(circles) else { continue };
            // edge ij is the real axis; k is in the upper half plane
            let disc = rho * rho - cy * cy;
            if disc <= 0.0 {
                continue;
            }
            let x = cx - disc.sqrt();
            if x.abs() >= 1.0 {
                continue;
            }
            let chord = [(cx - x).signum(), 0.0];
            let mut tangent = [cy, x - cx];
            if tangent[1] > 0.0 {
                tangent = [-tangent[0], -tangent[1]];
            }
            let norm = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
            let oracle = ((chord[0] * tangent[0] + chord[1] * tangent[1]) / norm).acos();
            let c = orthocircle([pi, pj, pk], r).unwrap();
            let alpha = edge_circle_angle(&c, &pi, &pj, &pk);
            assert!((alpha - oracle).abs() < 1e-8, "{alpha} vs disk {oracle}");
            checked += 1;
        }
    }

    #[test]
    fn flip_length_is_continuous_as_k_nears_the_edge() {
        let mut prev: Option<f64> = None;
        for n in 0..200 {
            let jk = 0.6 + 0.3999 * n as f64 / 199.0;
            let l = HingeLengths { ij: 1.0, ik: 0.6, jk, il: 0.8, jl: 0.7 };
            let kl = flip_length(&l).unwrap();
            if let Some(p) = prev {
                assert!((kl - p).abs() < 0.02, "jump at jk = {jk}");
            }
            prev = Some(kl);
        }
    }
}
