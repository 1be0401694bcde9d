//! The weighted Delaunay condition, edge flips driven by it, and the
//! extended curvature which does not depend on the Delaunay triangulation
//! used to evaluate it.
//!
//! An edge `{ij}` with opposite vertices `k`, `l` is weighted Delaunay when
//! `α_ij^k + α_ij^l ≤ π`, where `α_ij^k` is the angle between the face
//! circle of `{ijk}` and the edge.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{angle_defect, CurvatureError};
use crate::hypgeom::{
    edge_circle_angle, embed_hinge, flip_length, is_admissible, is_convex, orthocircle, HingeLengths,
    MinkowskiVector,
};
use crate::metric::{r_from_h, ConformalClass};
use crate::surface::{EdgeId, Hinge, SurfaceError};

/// Absolute tolerance on the angle sum; ties within it are left alone.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Flip budget per edge for one Delaunay pass.
pub const FLIPS_PER_EDGE: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelaunayError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("hinge at edge {0} is degenerate")]
    DegenerateHinge(EdgeId),
    #[error("flip budget of {0} exceeded")]
    FlipBudgetExceeded(usize),
    #[error("path following stalled at segment parameter {0}")]
    Stalled(f64),
}

/// One flip performed to restore the weighted Delaunay condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub edge: usize,
    /// Endpoints before the flip.
    pub from: (usize, usize),
    /// Endpoints after the flip.
    pub to: (usize, usize),
    /// Angle sum of the hinge before the flip.
    pub angle_sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelaunayReport {
    /// `α_ij^k + α_ij^l` by edge id.
    pub angle_sums: Vec<f64>,
    pub violations: Vec<EdgeId>,
}

impl DelaunayReport {
    pub fn is_delaunay(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn hinge_lengths(class: &ConformalClass, h: &[f64], hinge: &Hinge) -> HingeLengths {
    let len = |e: EdgeId| class.edge_length(h, e);
    let [jk, ki, il, lj] = hinge.boundary;
    HingeLengths {
        ij: len(hinge.edge),
        ik: len(ki),
        jk: len(jk),
        il: len(il),
        jl: len(lj),
    }
}

/// The hinge of `e` embedded in the hyperboloid together with its radii,
/// ordered `[i, j, k, l]`.
pub fn embedded_hinge(
    class: &ConformalClass,
    h: &[f64],
    e: EdgeId,
) -> Result<([MinkowskiVector; 4], [f64; 4]), DelaunayError> {
    let hinge = class.triangulation().hinge_of(e)?;
    let points =
        embed_hinge(&hinge_lengths(class, h, &hinge)).map_err(|_| DelaunayError::DegenerateHinge(e))?;
    let radius = |v: usize| r_from_h(h[v]).map_err(CurvatureError::from);
    let radii = [
        radius(hinge.i)?,
        radius(hinge.j)?,
        radius(hinge.k)?,
        radius(hinge.l)?,
    ];
    Ok((points, radii))
}

/// `α_ij^k + α_ij^l` for the hinge of `e`.
pub fn edge_angle_sum(class: &ConformalClass, h: &[f64], e: EdgeId) -> Result<f64, DelaunayError> {
    let ([pi, pj, pk, pl], [ri, rj, rk, rl]) = embedded_hinge(class, h, e)?;
    let ck = orthocircle([pi, pj, pk], [ri, rj, rk]).map_err(|_| DelaunayError::DegenerateHinge(e))?;
    let cl = orthocircle([pi, pj, pl], [ri, rj, rl]).map_err(|_| DelaunayError::DegenerateHinge(e))?;
    Ok(edge_circle_angle(&ck, &pi, &pj, &pk) + edge_circle_angle(&cl, &pi, &pj, &pl))
}

pub fn is_weighted_delaunay(
    class: &ConformalClass,
    h: &[f64],
    tol: f64,
) -> Result<DelaunayReport, DelaunayError> {
    let angle_sums = class
        .triangulation()
        .edges()
        .map(|e| edge_angle_sum(class, h, e))
        .collect::<Result<Vec<_>, _>>()?;
    let violations = angle_sums
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > PI + tol)
        .map(|(e, _)| EdgeId(e))
        .collect();
    Ok(DelaunayReport {
        angle_sums,
        violations,
    })
}

/// Flips `e` at factor `h`, keeping the surface isometric: the new edge
/// gets the length of the other diagonal and the inversive distance this
/// length induces.
pub fn flip_edge(
    class: &mut ConformalClass,
    h: &[f64],
    e: EdgeId,
    angle_sum: f64,
) -> Result<FlipEvent, DelaunayError> {
    let hinge = class.triangulation().hinge_of(e)?;
    let lengths = hinge_lengths(class, h, &hinge);
    if !is_convex(&lengths) {
        return Err(DelaunayError::DegenerateHinge(e));
    }
    let kl = flip_length(&lengths).map_err(|_| DelaunayError::DegenerateHinge(e))?;
    if !is_admissible(kl, lengths.il, lengths.ik) || !is_admissible(kl, lengths.jk, lengths.jl) {
        return Err(DelaunayError::DegenerateHinge(e));
    }
    class.apply_flip(e, h, kl);
    Ok(FlipEvent {
        edge: e.0,
        from: (hinge.i, hinge.j),
        to: (hinge.l, hinge.k),
        angle_sum,
    })
}

/// Lawson-style flipping with a FIFO queue until no angle sum exceeds
/// `π + tol`. The default budget is 50 flips per edge.
pub fn make_weighted_delaunay(
    class: &mut ConformalClass,
    h: &[f64],
    tol: f64,
    budget: Option<usize>,
) -> Result<Vec<FlipEvent>, DelaunayError> {
    let ne = class.triangulation().num_edges();
    let budget = budget.unwrap_or(FLIPS_PER_EDGE * ne);
    let mut queue: VecDeque<EdgeId> = class.triangulation().edges().collect();
    let mut queued = vec![true; ne];
    let mut log = Vec::new();
    while let Some(e) = queue.pop_front() {
        queued[e.0] = false;
        let sum = edge_angle_sum(class, h, e)?;
        if sum <= PI + tol {
            continue;
        }
        if log.len() >= budget {
            return Err(DelaunayError::FlipBudgetExceeded(budget));
        }
        let boundary = class.triangulation().hinge_of(e)?.boundary;
        log.push(flip_edge(class, h, e, sum)?);
        for b in boundary {
            if !queued[b.0] {
                queued[b.0] = true;
                queue.push_back(b);
            }
        }
    }
    class.set_anchor(h);
    Ok(log)
}

/// Angle defects at `h` evaluated on a weighted Delaunay triangulation
/// reached from `hint` by following the path from its anchor. Returns the
/// triangulation used.
pub fn extended_curvature(
    hint: &ConformalClass,
    h: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, ConformalClass), DelaunayError> {
    let state = SurgeryState::new(hint.clone(), h.to_vec(), tol)?;
    let k = angle_defect(state.class(), h)?;
    Ok((k, state.into_class()))
}

/// A conformal factor together with a triangulation that is weighted
/// Delaunay there.
///
/// Moving the factor along a segment with [`SurgeryState::advance_to`]
/// flips each edge at the point where its hinge becomes flat, so the
/// inversive distances of the new edges describe the same decorated
/// surface as the old ones. Flipping after overshooting a wall would give a
/// different surface.
#[derive(Clone, Debug)]
pub struct SurgeryState {
    class: ConformalClass,
    h: Vec<f64>,
    tol: f64,
    samples: usize,
}

impl SurgeryState {
    /// Makes `class` weighted Delaunay at its anchor, then follows the
    /// segment from the anchor to `h`.
    pub fn new(mut class: ConformalClass, h: Vec<f64>, tol: f64) -> Result<Self, DelaunayError> {
        let anchor = class.anchor().to_vec();
        make_weighted_delaunay(&mut class, &anchor, tol, None)?;
        let mut state = SurgeryState {
            class,
            h: anchor,
            tol,
            samples: 8,
        };
        if state.h != h {
            state.advance_to(&h)?;
        }
        Ok(state)
    }

    /// Wraps a class already known to be weighted Delaunay at `h`.
    pub fn from_delaunay(mut class: ConformalClass, h: Vec<f64>, tol: f64) -> Self {
        class.set_anchor(&h);
        SurgeryState {
            class,
            h,
            tol,
            samples: 8,
        }
    }

    /// Number of equally spaced points probed on each remaining segment
    /// before bisecting; more samples catch walls that are crossed and
    /// re-crossed within one segment.
    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(1);
        self
    }

    pub fn class(&self) -> &ConformalClass {
        &self.class
    }

    pub fn into_class(self) -> ConformalClass {
        self.class
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn advance_to(&mut self, target: &[f64]) -> Result<Vec<FlipEvent>, DelaunayError> {
        self.advance_along(target, |_, _, _| {})
    }

    /// Moves to `target` along the straight segment, calling `on_cell` with
    /// each parameter interval `[s0, s1]` on which a single triangulation
    /// stays weighted Delaunay.
    pub fn advance_along<F>(&mut self, target: &[f64], mut on_cell: F) -> Result<Vec<FlipEvent>, DelaunayError>
    where
        F: FnMut(f64, f64, &ConformalClass),
    {
        let start = self.h.clone();
        let point = |s: f64| -> Vec<f64> {
            start.iter().zip(target).map(|(a, b)| a + s * (b - a)).collect()
        };
        let ne = self.class.triangulation().num_edges();
        let budget = FLIPS_PER_EDGE * ne;
        let mut events = Vec::new();
        let mut s = 0.0;
        loop {
            let mut lo = s;
            let mut bad = None;
            for k in 1..=self.samples {
                let t = s + (1.0 - s) * k as f64 / self.samples as f64;
                if self.holds_at(&point(t)) {
                    lo = t;
                } else {
                    bad = Some(t);
                    break;
                }
            }
            let Some(mut hi) = bad else {
                on_cell(s, 1.0, &self.class);
                break;
            };
            while hi - lo > 1e-15 * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.holds_at(&point(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            on_cell(s, lo, &self.class);
            let (h_lo, h_hi) = (point(lo), point(hi));
            let before = events.len();
            self.resolve_wall(&h_lo, &h_hi, &mut events)?;
            events.extend(make_weighted_delaunay(&mut self.class, &h_lo, self.tol, None)?);
            if events.len() == before && lo <= s {
                return Err(DelaunayError::Stalled(s));
            }
            if events.len() > budget {
                return Err(DelaunayError::FlipBudgetExceeded(budget));
            }
            s = lo;
        }
        self.h = target.to_vec();
        self.class.set_anchor(target);
        Ok(events)
    }

    fn holds_at(&self, h: &[f64]) -> bool {
        if h.iter().any(|&x| !(x > 0.0)) {
            return false;
        }
        let tri = self.class.triangulation();
        let admissible = tri.faces().all(|f| {
            let [a, b, c] = tri.face_edges(f).map(|e| self.class.edge_length(h, e));
            is_admissible(a, b, c)
        });
        admissible
            && tri
                .edges()
                .all(|e| matches!(edge_angle_sum(&self.class, h, e), Ok(s) if s <= PI + self.tol))
    }

    /// Flips, at `h_lo`, the edges that fail just past the wall at `h_hi`.
    fn resolve_wall(
        &mut self,
        h_lo: &[f64],
        h_hi: &[f64],
        events: &mut Vec<FlipEvent>,
    ) -> Result<(), DelaunayError> {
        let failing_past = |class: &ConformalClass, e: EdgeId| -> bool {
            !matches!(edge_angle_sum(class, h_hi, e), Ok(s) if s <= PI + self.tol)
        };
        let mut candidates: Vec<(EdgeId, f64)> = self
            .class
            .triangulation()
            .edges()
            .filter(|&e| failing_past(&self.class, e))
            .map(|e| Ok((e, edge_angle_sum(&self.class, h_lo, e)?)))
            .collect::<Result<_, DelaunayError>>()?;
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (e, _) in candidates {
            if !failing_past(&self.class, e) {
                continue;
            }
            let sum = edge_angle_sum(&self.class, h_lo, e)?;
            events.push(flip_edge(&mut self.class, h_lo, e, sum)?);
        }
        Ok(())
    }
}
