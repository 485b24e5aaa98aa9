//! Greedy packings and nets, and the level-weighted covering measure.
//!
//! For each level `i = 1..=L` a greedy `2^-i`-net `C_i` is built; every net
//! point then receives weight `1 / (2^i * |C_i|)` from that level. The result
//! gives every ball of radius `r >= 2^-i` mass at least `1 / (2^i * |C_i|)`.

use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::metric::{FiniteMetricSpace, METRIC_TOL};

fn check_positive_radius(r: f64) -> Result<()> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be > 0, got {r}"
        )));
    }
    Ok(())
}

/// Greedy packing by index: scan in label order, keep a point iff its closed
/// `radius`-ball shares no point with the balls already kept.
fn greedy_packing(space: &FiniteMetricSpace, radius: f64) -> Vec<usize> {
    let mut blocked = vec![false; space.len()];
    let mut centers = Vec::new();
    for p in 0..space.len() {
        let ball = space.ball_indices(p, radius);
        if ball.iter().any(|&q| blocked[q]) {
            continue;
        }
        for q in ball {
            blocked[q] = true;
        }
        centers.push(p);
    }
    centers
}

fn net_indices(space: &FiniteMetricSpace, r: f64) -> Result<Vec<usize>> {
    let centers = greedy_packing(space, r / 2.0);
    for y in 0..space.len() {
        if !centers.iter().any(|&c| space.dist(c, y) <= r + METRIC_TOL) {
            return Err(Error::Internal(format!(
                "greedy net at radius {r} leaves `{}` uncovered",
                space.label(y)
            )));
        }
    }
    Ok(centers)
}

fn check_nonempty(space: &FiniteMetricSpace) -> Result<()> {
    if space.is_empty() {
        return Err(Error::InvalidArgument("empty space".into()));
    }
    Ok(())
}

/// Centers of a maximal greedy `(r/2)`-packing; their closed `r`-balls cover the space.
pub fn greedy_net(space: &FiniteMetricSpace, r: f64) -> Result<Vec<String>> {
    check_positive_radius(r)?;
    check_nonempty(space)?;
    Ok(to_labels(space, &net_indices(space, r)?))
}

/// Greedy maximal set of points whose closed `r`-balls are pairwise disjoint.
pub fn max_packing(space: &FiniteMetricSpace, r: f64) -> Result<Vec<String>> {
    check_positive_radius(r)?;
    check_nonempty(space)?;
    Ok(to_labels(space, &greedy_packing(space, r)))
}

fn to_labels(space: &FiniteMetricSpace, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| space.label(i).to_string()).collect()
}

/// One level of a [`CoverHierarchy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverLevel {
    pub radius: f64,
    pub centers: Vec<String>,
}

/// Per-level nets at radii `2^-1, ..., 2^-L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverHierarchy {
    space: Arc<FiniteMetricSpace>,
    levels: Vec<CoverLevel>,
}

impl CoverHierarchy {
    /// Rebuilds a hierarchy from stored levels, checking radii and the cover property.
    pub fn from_levels(space: Arc<FiniteMetricSpace>, levels: Vec<CoverLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument(
                "hierarchy needs at least one level".into(),
            ));
        }
        for (k, level) in levels.iter().enumerate() {
            let expected = level_radius(k + 1);
            if level.radius != expected {
                return Err(Error::InvalidArgument(format!(
                    "level {} has radius {}, expected {expected}",
                    k + 1,
                    level.radius
                )));
            }
            if level.centers.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "level {} has no centers",
                    k + 1
                )));
            }
            let idx = level
                .centers
                .iter()
                .map(|c| space.index_of(c))
                .collect::<Result<Vec<_>>>()?;
            for y in 0..space.len() {
                if !idx
                    .iter()
                    .any(|&c| space.dist(c, y) <= level.radius + METRIC_TOL)
                {
                    return Err(Error::InvalidArgument(format!(
                        "level {} does not cover `{}`",
                        k + 1,
                        space.label(y)
                    )));
                }
            }
        }
        Ok(Self { space, levels })
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    /// Truncation depth `L`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[CoverLevel] {
        &self.levels
    }

    /// `n_i` for 1-based level `i`.
    pub fn level_size(&self, i: usize) -> usize {
        self.levels[i - 1].centers.len()
    }
}

fn level_radius(i: usize) -> f64 {
    0.5f64.powi(i as i32)
}

/// Depth beyond which every level is the whole space:
/// `max(1, ceil(log2(1 / min positive distance)))`.
pub fn default_depth(space: &FiniteMetricSpace) -> usize {
    match space.min_positive_distance() {
        None => 1,
        Some(d) => smallest_level_within(d).max(1),
    }
}

/// Smallest `i >= 1` with `2^-i <= r`, i.e. `ceil(log2(1/r))` clamped below at 1.
/// Computed by halving so powers of two land exactly.
fn smallest_level_within(r: f64) -> usize {
    let mut i = 1;
    let mut radius = 0.5;
    while radius > r {
        i += 1;
        radius *= 0.5;
    }
    i
}

/// Covering measure truncated at depth `depth`, plus the nets it was built from.
///
/// Total mass is `1 - 2^-depth`; normalize the result for a probability measure.
pub fn build_upm(
    space: Arc<FiniteMetricSpace>,
    depth: usize,
) -> Result<(DiscreteMeasure, CoverHierarchy)> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth L must be at least 1".into()));
    }
    check_nonempty(&space)?;
    let diameter = space.diameter()?;
    if diameter > 1.0 {
        warn!("space diameter {diameter} exceeds 1; positivity certificate still holds per level");
    }

    let nets = (1..=depth)
        .into_par_iter()
        .map(|i| net_indices(&space, level_radius(i)))
        .collect::<Result<Vec<_>>>()?;

    let mut weights = vec![0.0; space.len()];
    for (k, centers) in nets.iter().enumerate() {
        let w = level_radius(k + 1) / centers.len() as f64;
        for &c in centers {
            weights[c] += w;
        }
    }
    let levels = nets
        .iter()
        .enumerate()
        .map(|(k, centers)| CoverLevel {
            radius: level_radius(k + 1),
            centers: to_labels(&space, centers),
        })
        .collect();
    let measure = DiscreteMeasure::new(space.clone(), weights)?;
    Ok((measure, CoverHierarchy { space, levels }))
}

/// Certified lower bound on the covering-measure mass of any radius-`r` ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityBound {
    /// Level `i = max(1, ceil(log2(1/r)))` the bound is read from.
    pub level: usize,
    pub bound: f64,
    /// `level > L`: the hierarchy is too shallow to certify anything at this radius.
    pub truncated: bool,
}

pub fn positivity_lower_bound(hier: &CoverHierarchy, r: f64) -> Result<PositivityBound> {
    check_positive_radius(r)?;
    let depth = hier.depth();
    let level = smallest_level_within(r);
    if level > depth {
        return Ok(PositivityBound {
            level,
            bound: 0.0,
            truncated: true,
        });
    }
    Ok(PositivityBound {
        level,
        bound: level_radius(level) / hier.level_size(level) as f64,
        truncated: false,
    })
}
