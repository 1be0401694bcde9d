#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod curvature;
pub mod delaunay;
pub mod fixture;
pub mod flows;
pub mod hypgeom;
pub mod meshfile;
pub mod metric;
pub mod surface;
pub mod solver;
