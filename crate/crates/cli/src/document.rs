//! JSON mesh documents.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use dcflow::geometry::{ConformalState, Geometry};
use dcflow::surface::{SurfaceError, TriangulatedSurface, WeightConfig};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryTag {
    Euclidean,
    Hyperbolic,
}

impl From<GeometryTag> for Geometry {
    fn from(t: GeometryTag) -> Self {
        match t {
            GeometryTag::Euclidean => Geometry::Euclidean,
            GeometryTag::Hyperbolic => Geometry::Hyperbolic,
        }
    }
}

impl From<Geometry> for GeometryTag {
    fn from(g: Geometry) -> Self {
        match g {
            Geometry::Euclidean => GeometryTag::Euclidean,
            Geometry::Hyperbolic => GeometryTag::Hyperbolic,
        }
    }
}

/// Edge weights keyed by `"i-j"` with `i < j`, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtaMap(pub Vec<(String, f64)>);

impl Serialize for EtaMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EtaMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = EtaMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from \"i-j\" to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<EtaMap, A::Error> {
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    if !seen.insert(k.clone()) {
                        return Err(serde::de::Error::custom(format!("duplicate eta key {k}")));
                    }
                    out.push((k, v));
                }
                Ok(EtaMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub geometry: GeometryTag,
    pub vertices: usize,
    pub faces: Vec<[usize; 3]>,
    pub epsilon: Vec<i64>,
    pub eta: EtaMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(rename = "Kbar", default, skip_serializing_if = "Option::is_none")]
    pub kbar: Option<Vec<f64>>,
}

/// A parsed document: combinatorics, weights and optional data.
pub struct Mesh {
    pub geometry: Geometry,
    pub surface: TriangulatedSurface,
    pub weights: WeightConfig,
    pub state: Option<ConformalState>,
    pub target: Option<Vec<f64>>,
}

fn surface_failure(e: SurfaceError) -> CliError {
    match e {
        SurfaceError::BadEpsilon { .. } | SurfaceError::WeightLength { .. } => {
            CliError::Config(e.to_string())
        }
        _ => CliError::Failed(format!("invalid surface: {e}")),
    }
}

impl MeshDocument {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("documents serialize");
        text.push('\n');
        std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn from_parts(
        geometry: Geometry,
        surface: &TriangulatedSurface,
        weights: &WeightConfig,
        u: Option<Vec<f64>>,
        kbar: Option<Vec<f64>>,
    ) -> Self {
        let eta = surface
            .edges()
            .iter()
            .zip(weights.eta())
            .map(|([i, j], &v)| (format!("{i}-{j}"), v))
            .collect();
        Self {
            geometry: geometry.into(),
            vertices: surface.vertex_count(),
            faces: surface.faces().to_vec(),
            epsilon: weights.epsilon().iter().map(|&e| i64::from(e)).collect(),
            eta: EtaMap(eta),
            u,
            f: None,
            kbar,
        }
    }

    /// Builds the surface and weights. Schema problems are configuration
    /// errors; a non-manifold or disconnected surface is a validation failure.
    pub fn into_mesh(self) -> Result<Mesh, CliError> {
        let geometry: Geometry = self.geometry.into();
        let surface = TriangulatedSurface::new(self.vertices, &self.faces).map_err(surface_failure)?;
        let mut eta = vec![None; surface.edge_count()];
        for (key, value) in &self.eta.0 {
            let parsed = key
                .split_once('-')
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)));
            let Some((i, j)) = parsed else {
                return Err(CliError::Config(format!("eta key `{key}` is not of the form i-j")));
            };
            if i >= j {
                return Err(CliError::Config(format!("eta key `{key}` must have i < j")));
            }
            let Some(e) = surface.edge_index(i, j) else {
                return Err(CliError::Config(format!("eta key `{key}` is not an edge")));
            };
            eta[e] = Some(*value);
        }
        let eta = eta
            .into_iter()
            .enumerate()
            .map(|(e, v)| {
                v.ok_or_else(|| {
                    let [i, j] = surface.edges()[e];
                    CliError::Config(format!("eta missing for edge {i}-{j}"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let weights = WeightConfig::new(&surface, self.epsilon, eta).map_err(surface_failure)?;
        let state = match (self.u, self.f) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give factors as either u or f, not both".into()))
            }
            (Some(u), None) => Some(ConformalState::new(geometry, &weights, u)),
            (None, Some(f)) => Some(ConformalState::from_f(geometry, &weights, &f)),
            (None, None) => None,
        }
        .transpose()
        .map_err(|e| CliError::Config(format!("invalid factors: {e}")))?;
        if let Some(k) = &self.kbar {
            if k.len() != surface.vertex_count() {
                return Err(CliError::Config(format!(
                    "Kbar has {} entries, expected {}",
                    k.len(),
                    surface.vertex_count()
                )));
            }
        }
        Ok(Mesh {
            geometry,
            surface,
            weights,
            state,
            target: self.kbar,
        })
    }
}
