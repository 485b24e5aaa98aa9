//! Finite metric spaces, closed balls and Lipschitz maps between spaces.
//!
//! A [`FiniteMetricSpace`] stores an explicit pairwise distance matrix over a
//! list of labelled points. Every constructor checks the metric axioms, so a
//! value of this type is always a (pseudo)metric up to [`METRIC_TOL`].

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used for axiom checks, ball membership and Lipschitz checks.
pub const METRIC_TOL: f64 = 1e-12;

/// One broken axiom together with the indices that witness it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    Nonnegativity {
        i: usize,
        j: usize,
        value: f64,
    },
    ZeroDiagonal {
        i: usize,
        value: f64,
    },
    Symmetry {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    /// `dist[i][j] > dist[i][via] + dist[via][j]`
    Triangle {
        i: usize,
        j: usize,
        via: usize,
        direct: f64,
        detour: f64,
    },
}

impl Violation {
    /// Witness index tuple, in the order used by the report.
    pub fn witness(&self) -> Vec<usize> {
        match *self {
            Violation::Nonnegativity { i, j, .. } | Violation::Symmetry { i, j, .. } => vec![i, j],
            Violation::ZeroDiagonal { i, .. } => vec![i],
            Violation::Triangle { i, j, via, .. } => vec![i, j, via],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Nonnegativity { i, j, value } => {
                write!(f, "negative distance {value} at ({i},{j})")
            }
            Violation::ZeroDiagonal { i, value } => {
                write!(f, "nonzero self-distance {value} at ({i},{i})")
            }
            Violation::Symmetry {
                i,
                j,
                forward,
                backward,
            } => {
                write!(f, "asymmetry at ({i},{j}): {forward} vs {backward}")
            }
            Violation::Triangle {
                i,
                j,
                via,
                direct,
                detour,
            } => write!(
                f,
                "triangle inequality fails at ({i},{j},{via}): {direct} > {detour}"
            ),
        }
    }
}

/// Outcome of [`validate_metric`]: empty iff every axiom holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        write!(
            f,
            "{} violation(s); first: {}",
            self.violations.len(),
            self.violations[0]
        )
    }
}

/// Checks nonnegativity, zero diagonal, symmetry and the triangle inequality,
/// listing every violation found.
///
/// Distinct points at distance zero are accepted (pseudometrics pass).
/// Non-square or non-finite input is a structural error, not a violation.
pub fn validate_metric(dist: &[Vec<f64>]) -> Result<ValidationReport> {
    let n = dist.len();
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Structural(format!(
                "distance matrix is not square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|d| !d.is_finite()) {
            return Err(Error::Structural(format!(
                "non-finite distance at ({i},{j})"
            )));
        }
    }

    let mut violations = Vec::new();
    for i in 0..n {
        if dist[i][i].abs() > METRIC_TOL {
            violations.push(Violation::ZeroDiagonal {
                i,
                value: dist[i][i],
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[i][j] < 0.0 {
                violations.push(Violation::Nonnegativity {
                    i,
                    j,
                    value: dist[i][j],
                });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (dist[i][j] - dist[j][i]).abs() > METRIC_TOL {
                violations.push(Violation::Symmetry {
                    i,
                    j,
                    forward: dist[i][j],
                    backward: dist[j][i],
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for via in 0..n {
                if via == i || via == j {
                    continue;
                }
                let detour = dist[i][via] + dist[via][j];
                if dist[i][j] > detour + METRIC_TOL {
                    violations.push(Violation::Triangle {
                        i,
                        j,
                        via,
                        direct: dist[i][j],
                        detour,
                    });
                }
            }
        }
    }
    Ok(ValidationReport { violations })
}

/// Labelled points with a full pairwise distance matrix.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl PartialEq for FiniteMetricSpace {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.dist == other.dist
    }
}

impl FiniteMetricSpace {
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != dist.len() {
            return Err(Error::Structural(format!(
                "{} labels but distance matrix has {} rows",
                labels.len(),
                dist.len()
            )));
        }
        let report = validate_metric(&dist)?;
        if !report.is_ok() {
            return Err(Error::MetricViolation(report));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Structural(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self {
            labels,
            dist,
            index,
        })
    }

    /// Builds a space from labels and a distance function evaluated on index pairs.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = labels.len();
        let dist = (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
        Self::new(labels, dist)
    }

    /// `n` equally spaced points on `[0, 1]` under `|a - b|`, labelled by value.
    pub fn grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one point".into(),
            ));
        }
        let points: Vec<f64> = if n == 1 {
            vec![0.0]
        } else {
            (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
        };
        let labels = points.iter().map(|p| p.to_string()).collect();
        Self::from_fn(labels, |i, j| (points[i] - points[j]).abs())
    }

    /// `n` points with every off-diagonal distance equal to 1, labelled `0..n`.
    pub fn discrete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "discrete space needs at least one point".into(),
            ));
        }
        let labels = (0..n).map(|k| k.to_string()).collect();
        Self::from_fn(labels, |i, j| if i == j { 0.0 } else { 1.0 })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn dist_by_label(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.dist[self.index_of(a)?][self.index_of(b)?])
    }

    /// Indices of the closed ball `{ y : dist(center, y) <= r }` in label order.
    pub(crate) fn ball_indices(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&y| self.dist[center][y] <= r + METRIC_TOL)
            .collect()
    }

    /// Closed ball around `center`, returned in label order.
    pub fn ball(&self, center: &str, r: f64) -> Result<Vec<&str>> {
        check_radius(r)?;
        let c = self.index_of(center)?;
        Ok(self
            .ball_indices(c, r)
            .into_iter()
            .map(|y| self.labels[y].as_str())
            .collect())
    }

    pub fn diameter(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("diameter of an empty space".into()));
        }
        Ok(self
            .dist
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(0.0, f64::max))
    }

    /// Smallest nonzero pairwise distance, if any pair is separated.
    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist
            .iter()
            .flat_map(|row| row.iter().copied())
            .filter(|&d| d > 0.0)
            .reduce(f64::min)
    }

    /// Same points with every distance multiplied by `factor`.
    pub fn rescale(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rescale factor must be positive and finite, got {factor}"
            )));
        }
        let dist = self
            .dist
            .iter()
            .map(|row| row.iter().map(|d| d * factor).collect())
            .collect();
        Ok(Self {
            labels: self.labels.clone(),
            dist,
            index: self.index.clone(),
        })
    }
}

pub(crate) fn check_radius(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be >= 0, got {r}"
        )));
    }
    Ok(())
}

/// Smallest `C` with `sigma(f(x1), f(x2)) <= C * rho(x1, x2)` over all pairs.
///
/// `table[i]` is the codomain index of the image of domain point `i`.
/// Constant maps (and single-point domains) give 0.
pub fn lipschitz_constant(
    domain: &FiniteMetricSpace,
    codomain: &FiniteMetricSpace,
    table: &[usize],
) -> Result<f64> {
    check_table(domain, codomain, table)?;
    let mut c: f64 = 0.0;
    for a in 0..domain.len() {
        for b in (a + 1)..domain.len() {
            let sigma = codomain.dist(table[a], table[b]);
            let rho = domain.dist(a, b);
            if rho <= 0.0 {
                if sigma > 0.0 {
                    return Err(Error::NotLipschitz {
                        x1: domain.label(a).to_string(),
                        x2: domain.label(b).to_string(),
                    });
                }
                continue;
            }
            c = c.max(sigma / rho);
        }
    }
    Ok(c)
}

fn check_table(
    domain: &FiniteMetricSpace,
    codomain: &FiniteMetricSpace,
    table: &[usize],
) -> Result<()> {
    if table.len() != domain.len() {
        return Err(Error::Structural(format!(
            "map table has {} entries for a domain of {} points",
            table.len(),
            domain.len()
        )));
    }
    if let Some((x, &y)) = table.iter().enumerate().find(|(_, &y)| y >= codomain.len()) {
        return Err(Error::Structural(format!(
            "image index {y} of `{}` is outside the codomain",
            domain.label(x)
        )));
    }
    Ok(())
}

/// A total function between two finite spaces together with its Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzMap {
    domain: Arc<FiniteMetricSpace>,
    codomain: Arc<FiniteMetricSpace>,
    table: Vec<usize>,
    lipschitz_c: f64,
}

impl LipschitzMap {
    pub fn new(
        domain: Arc<FiniteMetricSpace>,
        codomain: Arc<FiniteMetricSpace>,
        table: Vec<usize>,
    ) -> Result<Self> {
        let lipschitz_c = lipschitz_constant(&domain, &codomain, &table)?;
        Ok(Self {
            domain,
            codomain,
            table,
            lipschitz_c,
        })
    }

    /// Builds a map from `(input label, output label)` pairs; every domain label must appear.
    pub fn from_labels<'a>(
        domain: Arc<FiniteMetricSpace>,
        codomain: Arc<FiniteMetricSpace>,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut table = vec![usize::MAX; domain.len()];
        for (x, y) in pairs {
            table[domain.index_of(x)?] = codomain.index_of(y)?;
        }
        if let Some(missing) = table.iter().position(|&y| y == usize::MAX) {
            return Err(Error::Structural(format!(
                "map is not total: no image for `{}`",
                domain.label(missing)
            )));
        }
        Self::new(domain, codomain, table)
    }

    pub fn identity(space: Arc<FiniteMetricSpace>) -> Result<Self> {
        let table = (0..space.len()).collect();
        Self::new(space.clone(), space, table)
    }

    /// Checks a constant supplied from outside against the computed one.
    pub fn with_declared_constant(self, declared: f64) -> Result<Self> {
        let tol = 1e-9 * self.lipschitz_c.abs().max(1.0);
        if !declared.is_finite() || (declared - self.lipschitz_c).abs() > tol {
            return Err(Error::LipschitzMismatch {
                declared,
                computed: self.lipschitz_c,
            });
        }
        Ok(self)
    }

    pub fn domain(&self) -> &Arc<FiniteMetricSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<FiniteMetricSpace> {
        &self.codomain
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn lipschitz_c(&self) -> f64 {
        self.lipschitz_c
    }

    #[inline]
    pub fn image(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn apply(&self, x: &str) -> Result<&str> {
        Ok(self.codomain.label(self.table[self.domain.index_of(x)?]))
    }

    /// Same table over a new domain (e.g. a rescaled copy with identical labels).
    pub fn with_domain(&self, domain: Arc<FiniteMetricSpace>) -> Result<Self> {
        if domain.labels() != self.domain.labels() {
            return Err(Error::SpaceMismatch(
                "replacement domain has different labels".into(),
            ));
        }
        Self::new(domain, self.codomain.clone(), self.table.clone())
    }
}
