//! Scripted end-to-end run: covering measure → modulus → calibrated β →
//! audited privacy and utility on one space, plus the disjoint-ball lower
//! bound on discrete spaces of growing size.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audit::{
    audit_privacy, audit_utility, impossibility_lower_bound, propose_centers, ExtendedReal,
};
use crate::covering::{build_upm, default_depth};
use crate::error::Result;
use crate::io::{HierarchyDoc, SpaceDoc};
use crate::measure::DiscreteMeasure;
use crate::mechanism::{calibrate_beta, privacy_bound, tabulate, ExpMechParams};
use crate::metric::{FiniteMetricSpace, LipschitzMap};

/// Discrete-space sizes used for the lower-bound table.
pub const DISCRETE_FAMILY: [usize; 4] = [4, 8, 16, 32];
/// Ball radius for the lower-bound table; balls are singletons on discrete spaces.
pub const LOWER_BOUND_RADIUS: f64 = 0.5;
/// Utility failure probability used to pick β on the discrete family (mass 0.75 > 1/2).
pub const LOWER_BOUND_DELTA: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct DemoConfig {
    pub space: Arc<FiniteMetricSpace>,
    pub gamma: f64,
    pub delta: f64,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub n: usize,
    pub beta: f64,
    pub eps_lower: ExtendedReal,
    pub ln_n_over_2: f64,
    pub audited_epsilon: ExtendedReal,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub space: SpaceDoc,
    pub gamma: f64,
    pub delta: f64,
    pub hierarchy: HierarchyDoc,
    /// Normalized covering measure.
    pub weights: BTreeMap<String, f64>,
    pub modulus: f64,
    pub beta: f64,
    pub privacy_bound: f64,
    pub audited_epsilon: ExtendedReal,
    pub audited_utility: f64,
    pub privacy_holds: bool,
    pub utility_holds: bool,
    pub lower_bounds: Vec<LowerBoundRow>,
}

/// Default demo: 5-point grid, γ = 0.5, δ = 0.1.
pub fn default_config() -> Result<DemoConfig> {
    Ok(DemoConfig {
        space: Arc::new(FiniteMetricSpace::grid(5)?),
        gamma: 0.5,
        delta: 0.1,
        depth: None,
    })
}

/// Built-in spaces: grids of 3, 5 and 9 points, the discrete family, and a single point.
pub fn demo_spaces() -> Result<Vec<(String, Arc<FiniteMetricSpace>)>> {
    let mut out = Vec::new();
    for n in [3, 5, 9] {
        out.push((format!("grid-{n}"), Arc::new(FiniteMetricSpace::grid(n)?)));
    }
    for n in DISCRETE_FAMILY {
        out.push((
            format!("discrete-{n}"),
            Arc::new(FiniteMetricSpace::discrete(n)?),
        ));
    }
    out.push((
        "singleton".to_string(),
        Arc::new(FiniteMetricSpace::grid(1)?),
    ));
    Ok(out)
}

pub fn pipeline_demo(config: &DemoConfig) -> Result<DemoReport> {
    let space = config.space.clone();
    let depth = config.depth.unwrap_or_else(|| default_depth(&space));
    let (raw, hier) = build_upm(space.clone(), depth)?;
    let base = raw.normalize()?;
    let modulus = base.uniform_positivity_modulus(config.gamma / 2.0)?;
    let beta = calibrate_beta(config.gamma, config.delta, modulus)?;

    let map = LipschitzMap::identity(space.clone())?;
    let bound = privacy_bound(beta, map.lipschitz_c());
    let params = ExpMechParams::new(base.clone(), beta, map.clone())?;
    let table = tabulate(&params)?;
    let privacy = audit_privacy(&table, &space)?;
    let utility = audit_utility(&table, &map, config.gamma)?;

    let lower_bounds = DISCRETE_FAMILY
        .iter()
        .map(|&n| lower_bound_row(n))
        .collect::<Result<Vec<_>>>()?;

    Ok(DemoReport {
        space: SpaceDoc::from_space(&space),
        gamma: config.gamma,
        delta: config.delta,
        hierarchy: HierarchyDoc::from_hierarchy(&hier),
        weights: space
            .labels()
            .iter()
            .cloned()
            .zip(base.weights().iter().copied())
            .collect(),
        modulus,
        beta,
        privacy_bound: bound,
        audited_epsilon: privacy.epsilon_max,
        audited_utility: utility.min_mass,
        privacy_holds: privacy.epsilon_max.value() <= bound + 1e-9,
        utility_holds: utility.min_mass >= 1.0 - config.delta,
        lower_bounds,
    })
}

fn lower_bound_row(n: usize) -> Result<LowerBoundRow> {
    let space = Arc::new(FiniteMetricSpace::discrete(n)?);
    let base = DiscreteMeasure::uniform(space.clone())?;
    let m = base.uniform_positivity_modulus(LOWER_BOUND_RADIUS / 2.0)?;
    let beta = calibrate_beta(LOWER_BOUND_RADIUS, LOWER_BOUND_DELTA, m)?;
    let map = LipschitzMap::identity(space.clone())?;
    let table = tabulate(&ExpMechParams::new(base, beta, map.clone())?)?;
    let centers = propose_centers(&map, LOWER_BOUND_RADIUS)?;
    let refs: Vec<&str> = centers.iter().map(String::as_str).collect();
    let bound = impossibility_lower_bound(&table, &map, &refs, LOWER_BOUND_RADIUS)?;
    let audited = audit_privacy(&table, &space)?.epsilon_max;
    let ln_n_over_2 = (n as f64 / 2.0).ln();
    Ok(LowerBoundRow {
        n,
        beta,
        eps_lower: bound.eps_lower,
        ln_n_over_2,
        audited_epsilon: audited,
        holds: bound.eps_lower.value() >= ln_n_over_2 - 1e-9 && audited >= bound.eps_lower,
    })
}
