//! JSON file formats for spaces, measures, maps, mechanism tables and cover hierarchies.
//!
//! Space documents are either explicit, `{"labels": [...], "dist": [[...]]}`, or
//! generated, `{"kind": "grid" | "discrete", "n": k}`. Wherever another document
//! embeds a space it may instead give a path string, resolved relative to the
//! embedding file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covering::{CoverHierarchy, CoverLevel};
use crate::error::Error;
use crate::measure::DiscreteMeasure;
use crate::mechanism::MechanismTable;
use crate::metric::{FiniteMetricSpace, LipschitzMap};

/// Failure to load a document: either it does not parse, or it parses into
/// something the domain types reject.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Domain {
        path: PathBuf,
        #[source]
        source: Error,
    },
}

impl LoadError {
    fn parse(path: &Path, message: impl Into<String>) -> Self {
        LoadError::Parse {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    fn domain(path: &Path, source: Error) -> Self {
        LoadError::Domain {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratedKind {
    Grid,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceDoc {
    Explicit {
        labels: Vec<String>,
        dist: Vec<Vec<f64>>,
    },
    Generated {
        kind: GeneratedKind,
        n: usize,
    },
}

impl SpaceDoc {
    pub fn from_space(space: &FiniteMetricSpace) -> Self {
        SpaceDoc::Explicit {
            labels: space.labels().to_vec(),
            dist: space.matrix().to_vec(),
        }
    }

    pub fn build(&self) -> Result<FiniteMetricSpace, Error> {
        match self {
            SpaceDoc::Explicit { labels, dist } => {
                FiniteMetricSpace::new(labels.clone(), dist.clone())
            }
            SpaceDoc::Generated {
                kind: GeneratedKind::Grid,
                n,
            } => FiniteMetricSpace::grid(*n),
            SpaceDoc::Generated {
                kind: GeneratedKind::Discrete,
                n,
            } => FiniteMetricSpace::discrete(*n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(PathBuf),
    Inline(SpaceDoc),
}

impl SpaceRef {
    fn resolve(&self, base: &Path) -> Result<FiniteMetricSpace, LoadError> {
        match self {
            SpaceRef::Inline(doc) => doc.build().map_err(|e| LoadError::domain(base, e)),
            SpaceRef::Path(p) => {
                let path = base.parent().unwrap_or(Path::new(".")).join(p);
                load_space(&path)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub space: SpaceRef,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl MeasureDoc {
    pub fn from_measure(mu: &DiscreteMeasure) -> Self {
        let space = mu.space();
        MeasureDoc {
            space: SpaceRef::Inline(SpaceDoc::from_space(space)),
            weights: space
                .labels()
                .iter()
                .cloned()
                .zip(mu.weights().iter().copied())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapTableDoc {
    /// The literal string `"identity"`.
    Named(String),
    Explicit(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDoc {
    pub domain: SpaceRef,
    /// Defaults to the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codomain: Option<SpaceRef>,
    pub table: MapTableDoc,
    /// Optional; checked against the computed constant when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismDoc {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl MechanismDoc {
    pub fn from_table(table: &MechanismTable) -> Self {
        MechanismDoc {
            inputs: table.input_space().labels().to_vec(),
            outputs: table.output_space().labels().to_vec(),
            rows: table
                .input_space()
                .labels()
                .iter()
                .cloned()
                .zip(table.rows().iter().cloned())
                .collect(),
        }
    }

    /// Attaches the given spaces; input/output label lists must match them exactly.
    pub fn into_table(
        self,
        input_space: Arc<FiniteMetricSpace>,
        output_space: Arc<FiniteMetricSpace>,
    ) -> Result<MechanismTable, Error> {
        if self.inputs != input_space.labels() {
            return Err(Error::SpaceMismatch(
                "table inputs differ from the input space labels".into(),
            ));
        }
        if self.outputs != output_space.labels() {
            return Err(Error::SpaceMismatch(
                "table outputs differ from the output space labels".into(),
            ));
        }
        let mut rows_by_label = self.rows;
        let rows = input_space
            .labels()
            .iter()
            .map(|x| {
                rows_by_label
                    .remove(x)
                    .ok_or_else(|| Error::InvalidTable(format!("missing row for `{x}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(extra) = rows_by_label.keys().next() {
            return Err(Error::UnknownLabel(extra.clone()));
        }
        MechanismTable::new(input_space, output_space, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyDoc {
    #[serde(rename = "L")]
    pub depth: usize,
    pub levels: Vec<CoverLevel>,
}

impl HierarchyDoc {
    pub fn from_hierarchy(hier: &CoverHierarchy) -> Self {
        HierarchyDoc {
            depth: hier.depth(),
            levels: hier.levels().to_vec(),
        }
    }

    pub fn into_hierarchy(self, space: Arc<FiniteMetricSpace>) -> Result<CoverHierarchy, Error> {
        if self.depth != self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "L = {} but {} levels given",
                self.depth,
                self.levels.len()
            )));
        }
        CoverHierarchy::from_levels(space, self.levels)
    }
}

/// Reads and deserializes a JSON document; syntax errors carry line and column.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(|e| LoadError::parse(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| LoadError::parse(path, e.to_string()))
}

pub fn load_space(path: &Path) -> Result<FiniteMetricSpace, LoadError> {
    let doc: SpaceDoc = read_json(path)?;
    doc.build().map_err(|e| LoadError::domain(path, e))
}

pub fn load_measure(path: &Path) -> Result<DiscreteMeasure, LoadError> {
    let doc: MeasureDoc = read_json(path)?;
    let space = Arc::new(doc.space.resolve(path)?);
    DiscreteMeasure::from_labels(space, doc.weights.iter().map(|(k, v)| (k.as_str(), *v)))
        .map_err(|e| LoadError::domain(path, e))
}

pub fn load_map(path: &Path) -> Result<LipschitzMap, LoadError> {
    let doc: MapDoc = read_json(path)?;
    let domain = Arc::new(doc.domain.resolve(path)?);
    let codomain = match &doc.codomain {
        Some(c) => Arc::new(c.resolve(path)?),
        None => domain.clone(),
    };
    let map = match &doc.table {
        MapTableDoc::Named(name) if name == "identity" => {
            if domain != codomain {
                return Err(LoadError::domain(
                    path,
                    Error::SpaceMismatch("identity map needs identical domain and codomain".into()),
                ));
            }
            LipschitzMap::identity(domain)
        }
        MapTableDoc::Named(other) => {
            return Err(LoadError::parse(
                path,
                format!("unknown named map `{other}`"),
            ));
        }
        MapTableDoc::Explicit(t) => LipschitzMap::from_labels(
            domain,
            codomain,
            t.iter().map(|(k, v)| (k.as_str(), v.as_str())),
        ),
    };
    let map = map.map_err(|e| LoadError::domain(path, e))?;
    match doc.lipschitz_c {
        Some(c) => map
            .with_declared_constant(c)
            .map_err(|e| LoadError::domain(path, e)),
        None => Ok(map),
    }
}

pub fn load_mechanism(
    path: &Path,
    input_space: Arc<FiniteMetricSpace>,
    output_space: Arc<FiniteMetricSpace>,
) -> Result<MechanismTable, LoadError> {
    let doc: MechanismDoc = read_json(path)?;
    doc.into_table(input_space, output_space)
        .map_err(|e| LoadError::domain(path, e))
}
