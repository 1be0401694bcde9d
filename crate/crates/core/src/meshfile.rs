//! JSON mesh files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "faces": [[0, 1, 2], ...],
//!   "radii": [0.5, ...],
//!   "lengths": {"0-1": 1.25, ...},
//!   "target": -1.0,
//!   "alpha": -2.0
//! }
//! ```
//!
//! Edge data is either `lengths` or `inversive`, keyed by `"i-j"` with
//! `i < j`. Non-simplicial meshes add `face_edges` (edge ids of the three
//! sides of every face, side `m` running from corner `m` to `m + 1`) and give
//! edge data as a list indexed by edge id. Floats are written in shortest
//! round-trip form, so reading a file back reproduces every value exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypgeom::length_from_inversive;
use crate::metric::{h_from_r, realize, validate, ConformalClass, DecoratedMetric, MetricError, ValidationReport};
use crate::surface::{SurfaceError, Triangulation};

pub const FORMAT_VERSION: u32 = 1;

const FIELD_ORDER: [&str; 8] = [
    "format_version",
    "faces",
    "face_edges",
    "radii",
    "lengths",
    "inversive",
    "target",
    "alpha",
];

#[derive(Debug, Error)]
pub enum MeshFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed mesh file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported format_version {0}")]
    Version(u32),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeValues {
    Keyed(BTreeMap<String, f64>),
    Ordered(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Uniform(f64),
    PerVertex(Vec<f64>),
}

impl Target {
    pub fn expand(&self, n: usize) -> Result<Vec<f64>, MeshFileError> {
        match self {
            Target::Uniform(v) => Ok(vec![*v; n]),
            Target::PerVertex(v) if v.len() == n => Ok(v.clone()),
            Target::PerVertex(v) => Err(MeshFileError::Schema(format!(
                "target has {} entries for {n} vertices",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub format_version: u32,
    pub faces: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_edges: Option<Vec<[usize; 3]>>,
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<EdgeValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversive: Option<EdgeValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// A loaded mesh: the conformal class with the file's decoration as
/// reference, and the corresponding conformal factor.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub class: ConformalClass,
    pub h: Vec<f64>,
    pub target: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    /// Edge values exactly as stored in the file, by edge id.
    pub edge_values: Vec<f64>,
}

fn edge_key(a: usize, b: usize) -> String {
    format!("{}-{}", a.min(b), a.max(b))
}

impl MeshFile {
    pub fn from_json(text: &str) -> Result<Self, MeshFileError> {
        let file: MeshFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(MeshFileError::Version(file.format_version));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, MeshFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeshFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// One top-level field per line; face lists and edge maps put one entry
    /// per line.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("mesh files always serialize");
        let map = value.as_object().expect("a mesh file is an object");
        let compact = |v: &serde_json::Value| serde_json::to_string(v).expect("values serialize");
        let mut fields = Vec::new();
        for key in FIELD_ORDER {
            let Some(v) = map.get(key) else { continue };
            let body = match v {
                serde_json::Value::Array(items) if items.iter().any(|x| x.is_array()) => {
                    let rows: Vec<String> = items.iter().map(|x| format!("    {}", compact(x))).collect();
                    format!("[\n{}\n  ]", rows.join(",\n"))
                }
                serde_json::Value::Object(entries) => {
                    let rows: Vec<String> = entries
                        .iter()
                        .map(|(k, x)| format!("    {}: {}", compact(&k.as_str().into()), compact(x)))
                        .collect();
                    format!("{{\n{}\n  }}", rows.join(",\n"))
                }
                other => compact(other),
            };
            fields.push(format!("  \"{key}\": {body}"));
        }
        format!("{{\n{}\n}}\n", fields.join(",\n"))
    }

    pub fn write(&self, path: &Path) -> Result<(), MeshFileError> {
        std::fs::write(path, self.to_json()).map_err(|source| MeshFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn triangulation(&self) -> Result<Triangulation, MeshFileError> {
        Ok(match &self.face_edges {
            Some(glue) => Triangulation::build_from_glued_faces(&self.faces, glue)?,
            None => Triangulation::build_from_faces(&self.faces)?,
        })
    }

    /// Triangulation, edge values by edge id, and whether those values are
    /// lengths (as opposed to inversive distances).
    fn parts(&self) -> Result<(Triangulation, Vec<f64>, bool), MeshFileError> {
        let tri = self.triangulation()?;
        if self.radii.len() != tri.num_vertices() {
            return Err(MeshFileError::Schema(format!(
                "{} radii for {} vertices",
                self.radii.len(),
                tri.num_vertices()
            )));
        }
        if let Some(i) = self.radii.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(MeshFileError::Metric(MetricError::NonPositiveRadius(i, self.radii[i])));
        }
        let (values, are_lengths) = match (&self.lengths, &self.inversive) {
            (Some(v), None) => (v, true),
            (None, Some(v)) => (v, false),
            _ => {
                return Err(MeshFileError::Schema(
                    "exactly one of \"lengths\" and \"inversive\" must be given".into(),
                ))
            }
        };
        let edge_values = self.resolve_edges(&tri, values)?;
        Ok((tri, edge_values, are_lengths))
    }

    pub fn load(&self) -> Result<LoadedMesh, MeshFileError> {
        let (tri, edge_values, are_lengths) = self.parts()?;
        let class = if are_lengths {
            ConformalClass::from_lengths(tri, &edge_values, self.radii.clone())?
        } else {
            ConformalClass::new(tri, edge_values.clone(), self.radii.clone())?
        };
        let n = class.num_vertices();
        let target = self.target.as_ref().map(|t| t.expand(n)).transpose()?;
        Ok(LoadedMesh {
            h: self.radii.iter().map(|&r| h_from_r(r)).collect(),
            class,
            target,
            alpha: self.alpha,
            edge_values,
        })
    }

    /// Validates the stored decorated metric without requiring it to be
    /// admissible. Edges given with `I ≤ 1` are reported as overlapping and
    /// their lengths are left undefined.
    pub fn validate(&self) -> Result<(Triangulation, ValidationReport), MeshFileError> {
        let (tri, edge_values, are_lengths) = self.parts()?;
        let lengths = if are_lengths {
            edge_values
        } else {
            tri.edges()
                .zip(&edge_values)
                .map(|(e, &inv)| {
                    let (a, b) = tri.endpoints(e);
                    length_from_inversive(self.radii[a], self.radii[b], inv).unwrap_or(f64::NAN)
                })
                .collect()
        };
        let metric = DecoratedMetric {
            lengths,
            radii: self.radii.clone(),
        };
        let report = validate(&metric, &tri);
        Ok((tri, report))
    }

    fn resolve_edges(&self, tri: &Triangulation, values: &EdgeValues) -> Result<Vec<f64>, MeshFileError> {
        match values {
            EdgeValues::Ordered(v) => {
                if v.len() != tri.num_edges() {
                    return Err(MeshFileError::Schema(format!(
                        "{} edge values for {} edges",
                        v.len(),
                        tri.num_edges()
                    )));
                }
                Ok(v.clone())
            }
            EdgeValues::Keyed(map) => {
                if !tri.is_simplicial() {
                    return Err(MeshFileError::Schema(
                        "non-simplicial meshes need edge values as a list indexed by edge id".into(),
                    ));
                }
                if map.len() != tri.num_edges() {
                    return Err(MeshFileError::Schema(format!(
                        "{} edge values for {} edges",
                        map.len(),
                        tri.num_edges()
                    )));
                }
                tri.edges()
                    .map(|e| {
                        let (a, b) = tri.endpoints(e);
                        let key = edge_key(a, b);
                        map.get(&key)
                            .copied()
                            .ok_or_else(|| MeshFileError::Schema(format!("missing edge \"{key}\"")))
                    })
                    .collect()
            }
        }
    }

    /// Writes the decorated metric of `class` at factor `h` as lengths.
    pub fn from_class(class: &ConformalClass, h: &[f64]) -> Result<Self, MeshFileError> {
        let metric = realize(class, h)?;
        let tri = class.triangulation();
        let (face_edges, lengths) = if tri.is_simplicial() {
            let map = tri
                .edges()
                .map(|e| {
                    let (a, b) = tri.endpoints(e);
                    (edge_key(a, b), metric.lengths[e.0])
                })
                .collect();
            (None, EdgeValues::Keyed(map))
        } else {
            (Some(tri.face_edge_list()), EdgeValues::Ordered(metric.lengths.clone()))
        };
        Ok(MeshFile {
            format_version: FORMAT_VERSION,
            faces: tri.face_list(),
            face_edges,
            radii: metric.radii,
            lengths: Some(lengths),
            inversive: None,
            target: None,
            alpha: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::fixtures;

    #[test]
    fn round_trip_is_exact() {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        let class = ConformalClass::new(tri, vec![1.5, 2.0, 1.2, 1.8, 1.3, 2.5], vec![0.5, 0.8, 1.1, 0.6]).unwrap();
        let h = vec![0.9, 1.3, 0.7, 1.1];
        let file = MeshFile::from_class(&class, &h).unwrap();
        let back = MeshFile::from_json(&file.to_json()).unwrap();
        assert_eq!(file, back);
        let loaded = back.load().unwrap();
        let m = realize(&class, &h).unwrap();
        assert_eq!(loaded.edge_values, m.lengths);
        assert_eq!(back.radii, m.radii);
    }

    #[test]
    fn non_simplicial_mesh_uses_edge_list() {
        let tri = Triangulation::build_from_faces(&fixtures::tetrahedron()).unwrap();
        let mut class = ConformalClass::new(tri, vec![2.0; 6], vec![0.5; 4]).unwrap();
        let h = class.reference_factor();
        let hinge = class.triangulation().hinge_of(crate::surface::EdgeId(0)).unwrap();
        let kl = crate::hypgeom::flip_length(&crate::delaunay::hinge_lengths(&class, &h, &hinge)).unwrap();
        class.apply_flip(crate::surface::EdgeId(0), &h, kl);
        assert!(!class.triangulation().is_simplicial());
        let file = MeshFile::from_class(&class, &h).unwrap();
        assert!(file.face_edges.is_some());
        let loaded = MeshFile::from_json(&file.to_json()).unwrap().load().unwrap();
        let (a, b) = (loaded.class.triangulation(), class.triangulation());
        assert_eq!(a.canonical_faces(), b.canonical_faces());
        assert_eq!(a.face_edge_list(), b.face_edge_list());
        for (x, y) in loaded.class.lengths(&loaded.h).iter().zip(class.lengths(&h)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_floats_round_trip(
            radii in proptest::collection::vec(1e-3f64..20.0, 7),
            inv in proptest::collection::vec(1.0f64..1e6, 21),
            alpha in -5.0f64..5.0,
        ) {
            let tri = Triangulation::build_from_faces(&fixtures::torus7()).unwrap();
            let map = tri
                .edges()
                .zip(&inv)
                .map(|(e, &v)| {
                    let (a, b) = tri.endpoints(e);
                    (edge_key(a, b), v)
                })
                .collect();
            let file = MeshFile {
                format_version: FORMAT_VERSION,
                faces: tri.face_list(),
                face_edges: None,
                radii,
                lengths: None,
                inversive: Some(EdgeValues::Keyed(map)),
                target: Some(Target::PerVertex(inv[..7].to_vec())),
                alpha: Some(alpha),
            };
            let text = file.to_json();
            let back = MeshFile::from_json(&text).unwrap();
            proptest::prop_assert_eq!(&back, &file);
            proptest::prop_assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn schema_errors() {
        let text = r#"{"format_version": 1, "faces": [[0,1,2],[0,2,1]], "radii": [1,1,1],
            "inversive": {"0-1": 2.0, "1-2": 2.0}}"#;
        let err = MeshFile::from_json(text).unwrap().load().unwrap_err();
        assert!(err.to_string().contains("edge values"), "{err}");
        let text = r#"{"format_version": 2, "faces": [], "radii": []}"#;
        assert!(matches!(MeshFile::from_json(text), Err(MeshFileError::Version(2))));
        assert!(matches!(MeshFile::from_json("{"), Err(MeshFileError::Parse(_))));
    }

    #[test]
    fn validate_reports_overlap_instead_of_failing() {
        let faces = fixtures::tetrahedron();
        let mut inv = BTreeMap::new();
        for [a, b, c] in &faces {
            for (x, y) in [(a, b), (b, c), (c, a)] {
                inv.insert(edge_key(*x, *y), 2.0);
            }
        }
        inv.insert("0-1".into(), 0.9);
        let file = MeshFile {
            format_version: FORMAT_VERSION,
            faces,
            face_edges: None,
            radii: vec![0.5; 4],
            lengths: None,
            inversive: Some(EdgeValues::Keyed(inv)),
            target: None,
            alpha: None,
        };
        assert!(matches!(file.load(), Err(MeshFileError::Metric(MetricError::SeparationViolated(..)))));
        let (tri, report) = file.validate().unwrap();
        assert_eq!(report.overlapping_edges.len(), 1);
        let (a, b) = tri.endpoints(report.overlapping_edges[0].0);
        assert_eq!((a.min(b), a.max(b)), (0, 1));
    }
}
