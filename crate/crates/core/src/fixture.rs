//! Seeded random decorated surfaces.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::delaunay::{make_weighted_delaunay, DelaunayError, DEFAULT_TOLERANCE};
use crate::metric::{realize, validate, ConformalClass};
use crate::surface::{fixtures, Triangulation};

pub const MAX_REJECTIONS: usize = 100_000;
pub const RADIUS_RANGE: (f64, f64) = (0.3, 1.5);
pub const INVERSIVE_RANGE: (f64, f64) = (1.05, 3.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    /// Octahedral bipyramid, 8 vertices.
    Sphere,
    /// Seven-vertex torus.
    Torus,
    /// Ten-vertex genus-2 surface.
    Genus2,
}

impl FixtureKind {
    pub fn faces(self) -> Vec<[usize; 3]> {
        match self {
            FixtureKind::Sphere => fixtures::bipyramid(),
            FixtureKind::Torus => fixtures::torus7(),
            FixtureKind::Genus2 => fixtures::genus2(),
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixtureKind::Sphere => "sphere",
            FixtureKind::Torus => "torus",
            FixtureKind::Genus2 => "genus2",
        })
    }
}

impl FromStr for FixtureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sphere" => Ok(FixtureKind::Sphere),
            "torus" => Ok(FixtureKind::Torus),
            "genus2" => Ok(FixtureKind::Genus2),
            other => Err(format!("unknown fixture kind {other:?} (sphere|torus|genus2)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixtureError {
    #[error("no admissible sample after {0} draws")]
    SamplingExhausted(usize),
    #[error(transparent)]
    Delaunay(#[from] DelaunayError),
}

/// Samples radii and inversive distances uniformly until the reference
/// metric is admissible, then makes it weighted Delaunay. The returned
/// class has the sampled radii as reference decoration.
pub fn generate(kind: FixtureKind, seed: u64) -> Result<ConformalClass, FixtureError> {
    let tri = Triangulation::build_from_faces(&kind.faces()).expect("built-in fixtures are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let radii: Vec<f64> = (0..tri.num_vertices())
            .map(|_| rng.gen_range(RADIUS_RANGE.0..RADIUS_RANGE.1))
            .collect();
        let inv: Vec<f64> = (0..tri.num_edges())
            .map(|_| rng.gen_range(INVERSIVE_RANGE.0..INVERSIVE_RANGE.1))
            .collect();
        let class = ConformalClass::new(tri.clone(), inv, radii).expect("sampled ranges are valid");
        let h = class.reference_factor();
        let metric = realize(&class, &h).expect("reference factor is positive");
        if validate(&metric, class.triangulation()).is_clean() {
            let mut class = class;
            make_weighted_delaunay(&mut class, &h, DEFAULT_TOLERANCE, None)?;
            return Ok(class);
        }
    }
    Err(FixtureError::SamplingExhausted(MAX_REJECTIONS))
}
