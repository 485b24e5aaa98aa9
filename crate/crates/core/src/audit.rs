//! Exact audits of finite mechanism tables.
//!
//! The privacy audit computes the smallest `eps` such that
//! `P_x(T) <= exp(eps * rho(x, z)) * P_z(T)` for every pair and every output
//! set `T`. For nonnegative vectors `sum_T a / sum_T b <= max_y a_y / b_y`, so
//! singleton sets attain the maximum; [`audit_privacy_subsets`] enumerates all
//! sets on small outputs to cross-check that reduction.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mechanism::{ExpMechParams, MechanismTable};
use crate::metric::{FiniteMetricSpace, LipschitzMap};

/// Probabilities at or below this are treated as exact zeros.
pub const ZERO_PROB: f64 = 1e-300;
/// Largest output space accepted by the subset-enumerating routines.
pub const SUBSET_LIMIT: usize = 20;
/// Slack for the intermediate exponential-mechanism inequalities.
pub const EM_INEQ_TOL: f64 = 1e-9;

/// A real that may be `+inf`; serialized as a JSON number or the string `"Infinity"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedReal(pub f64);

impl ExtendedReal {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("Infinity")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtendedReal(v)),
            Repr::Text(t) if t == "Infinity" => Ok(ExtendedReal(f64::INFINITY)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"Infinity\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Finite log-ratio at output `y`.
    Ratio,
    /// `P_x(y) > 0 = P_z(y)`.
    ZeroProbability,
    /// `rho(x, z) = 0` yet the rows differ.
    ZeroDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyWitness {
    pub x: String,
    pub z: String,
    /// Output label; `None` for zero-distance violations, which involve whole rows.
    pub y: Option<String>,
    pub kind: WitnessKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAuditReport {
    pub epsilon_max: ExtendedReal,
    /// First triple (in label order) attaining `epsilon_max`; `None` when there is no pair.
    pub witness: Option<PrivacyWitness>,
    /// `per_pair_max[x][z]`, the smallest eps for the ordered pair; diagonal is 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pair_max: Option<Vec<Vec<ExtendedReal>>>,
}

fn clean(p: f64) -> f64 {
    if p <= ZERO_PROB {
        0.0
    } else {
        p
    }
}

/// Worst (value, witness output, kind) for one ordered pair over singleton outputs.
/// Worst ratio for one ordered pair: value, output label index, and kind.
type PairMax = (f64, Option<usize>, WitnessKind);

fn pair_singletons(a: &[f64], b: &[f64], rho: f64) -> Option<PairMax> {
    if rho <= 0.0 {
        let differ = a
            .iter()
            .zip(b)
            .any(|(p, q)| (clean(*p) - clean(*q)).abs() > 1e-12);
        return differ.then_some((f64::INFINITY, None, WitnessKind::ZeroDistance));
    }
    let mut best: Option<(f64, Option<usize>, WitnessKind)> = None;
    for (y, (&p, &q)) in a.iter().zip(b).enumerate() {
        let (p, q) = (clean(p), clean(q));
        if p == 0.0 {
            continue;
        }
        let cand = if q == 0.0 {
            (f64::INFINITY, Some(y), WitnessKind::ZeroProbability)
        } else {
            ((p.ln() - q.ln()) / rho, Some(y), WitnessKind::Ratio)
        };
        if best.is_none_or(|b| cand.0 > b.0) {
            best = Some(cand);
        }
    }
    best
}

fn check_input_space(mech: &MechanismTable, input_space: &FiniteMetricSpace) -> Result<()> {
    if mech.input_space().as_ref() != input_space {
        return Err(Error::SpaceMismatch(
            "audit input space differs from the mechanism's input space".into(),
        ));
    }
    Ok(())
}

fn run_privacy_audit(
    mech: &MechanismTable,
    input_space: &FiniteMetricSpace,
    keep_pairs: bool,
) -> Result<PrivacyAuditReport> {
    check_input_space(mech, input_space)?;
    let n = input_space.len();
    let rows = mech.rows();
    // per_x[x][z] = Some(value, y, kind) for z != x
    let per_x: Vec<Vec<Option<PairMax>>> = (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .map(|z| {
                    if x == z {
                        None
                    } else {
                        pair_singletons(&rows[x], &rows[z], input_space.dist(x, z))
                    }
                })
                .collect()
        })
        .collect();

    let mut best: Option<(f64, usize, usize, Option<usize>, WitnessKind)> = None;
    for (x, row) in per_x.iter().enumerate() {
        for (z, entry) in row.iter().enumerate() {
            if let Some((v, y, kind)) = *entry {
                if best.is_none_or(|b| v > b.0) {
                    best = Some((v, x, z, y, kind));
                }
            }
        }
    }

    let out = mech.output_space();
    let (epsilon_max, witness) = match best {
        None => (0.0, None),
        Some((v, x, z, y, kind)) => (
            v.max(0.0),
            Some(PrivacyWitness {
                x: input_space.label(x).to_string(),
                z: input_space.label(z).to_string(),
                y: y.map(|y| out.label(y).to_string()),
                kind,
            }),
        ),
    };
    let per_pair_max = keep_pairs.then(|| {
        per_x
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| ExtendedReal(e.map_or(0.0, |(v, _, _)| v.max(0.0))))
                    .collect()
            })
            .collect()
    });
    Ok(PrivacyAuditReport {
        epsilon_max: ExtendedReal(epsilon_max),
        witness,
        per_pair_max,
    })
}

/// Exact privacy level of a finite table via the singleton reduction.
pub fn audit_privacy(
    mech: &MechanismTable,
    input_space: &FiniteMetricSpace,
) -> Result<PrivacyAuditReport> {
    run_privacy_audit(mech, input_space, false)
}

/// As [`audit_privacy`], also returning the per-pair matrix.
pub fn audit_privacy_with_pairs(
    mech: &MechanismTable,
    input_space: &FiniteMetricSpace,
) -> Result<PrivacyAuditReport> {
    run_privacy_audit(mech, input_space, true)
}

/// Subset sums of `p` over every bitmask of `p.len()` elements.
fn subset_sums(p: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << p.len()];
    for mask in 1usize..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + p[low];
    }
    sums
}

/// Privacy level obtained by enumerating every nonempty output set.
///
/// Gated to outputs of at most [`SUBSET_LIMIT`] points.
pub fn audit_privacy_subsets(
    mech: &MechanismTable,
    input_space: &FiniteMetricSpace,
) -> Result<f64> {
    check_input_space(mech, input_space)?;
    let size = mech.output_space().len();
    if size > SUBSET_LIMIT {
        return Err(Error::SubsetGate {
            size,
            limit: SUBSET_LIMIT,
        });
    }
    let sums: Vec<Vec<f64>> = mech
        .rows()
        .iter()
        .map(|row| subset_sums(&row.iter().map(|&p| clean(p)).collect::<Vec<_>>()))
        .collect();
    let n = input_space.len();
    let mut eps: f64 = 0.0;
    for x in 0..n {
        for z in 0..n {
            if x == z {
                continue;
            }
            let rho = input_space.dist(x, z);
            for mask in 1..sums[x].len() {
                let (a, b) = (sums[x][mask], sums[z][mask]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                if rho <= 0.0 {
                    if (a - b).abs() > 1e-12 {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
                if a == 0.0 {
                    continue;
                }
                if b == 0.0 {
                    return Ok(f64::INFINITY);
                }
                eps = eps.max((a.ln() - b.ln()) / rho);
            }
        }
    }
    Ok(eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityAuditReport {
    pub gamma: f64,
    pub min_mass: f64,
    pub worst_input: String,
    pub per_input_mass: Vec<f64>,
}

impl UtilityAuditReport {
    /// Largest `delta` for which the table achieves `(gamma, delta)`-utility.
    pub fn delta(&self) -> f64 {
        1.0 - self.min_mass
    }
}

fn check_map_matches(mech: &MechanismTable, map: &LipschitzMap) -> Result<()> {
    if map.domain().as_ref() != mech.input_space().as_ref() {
        return Err(Error::SpaceMismatch(
            "map domain differs from the mechanism's input space".into(),
        ));
    }
    if map.codomain().as_ref() != mech.output_space().as_ref() {
        return Err(Error::SpaceMismatch(
            "map codomain differs from the mechanism's output space".into(),
        ));
    }
    Ok(())
}

/// Mass each row puts on the closed `gamma`-ball around the true value `f(x)`.
pub fn audit_utility(
    mech: &MechanismTable,
    map: &LipschitzMap,
    gamma: f64,
) -> Result<UtilityAuditReport> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    check_map_matches(mech, map)?;
    let input = mech.input_space();
    if input.is_empty() {
        return Err(Error::InvalidArgument(
            "utility audit of an empty input space".into(),
        ));
    }
    let out = mech.output_space();
    let per_input_mass: Vec<f64> = mech
        .rows()
        .iter()
        .enumerate()
        .map(|(x, row)| {
            out.ball_indices(map.image(x), gamma)
                .into_iter()
                .map(|y| row[y])
                .sum()
        })
        .collect();
    let (worst, min_mass) =
        per_input_mass
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, m)| if m < acc.1 { (i, m) } else { acc },
            );
    Ok(UtilityAuditReport {
        gamma,
        min_mass,
        worst_input: input.label(worst).to_string(),
        per_input_mass,
    })
}

/// Lower bound on any privacy level the table can satisfy, extracted from disjoint balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityBound {
    pub eps_lower: ExtendedReal,
    /// Index into `centers` of the ball attaining the bound (never 0).
    pub witness_index: usize,
}

/// Threshold on per-center ball mass required by [`impossibility_lower_bound`].
pub const UTILITY_HYPOTHESIS: f64 = 0.5;

/// With `x1 = centers[0]` and `B_i = ball(f(centers[i]), r)`, returns
/// `max_{i >= 1} ln(P_{x_i}(B_i) / P_{x1}(B_i)) / rho(x_i, x1)`.
///
/// The balls must be pairwise disjoint and each `P_{x_i}(B_i)` must exceed 1/2.
/// Under those hypotheses the result is at least `ln(k - 1) / diameter >= ln(k/2) / diameter`.
pub fn impossibility_lower_bound(
    mech: &MechanismTable,
    map: &LipschitzMap,
    centers: &[&str],
    r: f64,
) -> Result<ImpossibilityBound> {
    impossibility_lower_bound_with_threshold(mech, map, centers, r, UTILITY_HYPOTHESIS)
}

/// [`impossibility_lower_bound`] with a caller-chosen utility threshold in place of 1/2.
pub fn impossibility_lower_bound_with_threshold(
    mech: &MechanismTable,
    map: &LipschitzMap,
    centers: &[&str],
    r: f64,
    threshold: f64,
) -> Result<ImpossibilityBound> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be >= 0, got {r}"
        )));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "utility threshold must lie in [0, 1), got {threshold}"
        )));
    }
    if centers.len() < 2 {
        return Err(Error::InvalidArgument("need at least two centers".into()));
    }
    check_map_matches(mech, map)?;
    let input = mech.input_space();
    let out = mech.output_space();
    let idx = centers
        .iter()
        .map(|c| input.index_of(c))
        .collect::<Result<Vec<_>>>()?;
    let balls: Vec<Vec<usize>> = idx
        .iter()
        .map(|&x| out.ball_indices(map.image(x), r))
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; out.len()];
    for (i, ball) in balls.iter().enumerate() {
        for &y in ball {
            if let Some(j) = owner[y] {
                return Err(Error::BallsOverlap {
                    first: centers[j].to_string(),
                    second: centers[i].to_string(),
                });
            }
            owner[y] = Some(i);
        }
    }

    let rows = mech.rows();
    let mass = |x: usize, ball: &[usize]| -> f64 { ball.iter().map(|&y| rows[x][y]).sum() };
    for (i, &x) in idx.iter().enumerate() {
        let m = mass(x, &balls[i]);
        if m <= threshold {
            return Err(Error::UtilityHypothesisViolated {
                center: centers[i].to_string(),
                mass: m,
                threshold,
            });
        }
    }

    let x1 = idx[0];
    let mut best = (f64::NEG_INFINITY, 1);
    for i in 1..idx.len() {
        let num = mass(idx[i], &balls[i]);
        let den = clean(mass(x1, &balls[i]));
        let value = if den == 0.0 {
            f64::INFINITY
        } else {
            (num.ln() - den.ln()) / input.dist(idx[i], x1)
        };
        if value > best.0 {
            best = (value, i);
        }
    }
    Ok(ImpossibilityBound {
        eps_lower: ExtendedReal(best.0),
        witness_index: best.1,
    })
}

/// Proposes centers for [`impossibility_lower_bound`]: a greedy packing of the
/// image at radius `r`, each packed output replaced by its first preimage.
/// The returned centers have pairwise disjoint closed `r`-balls around their images.
pub fn propose_centers(map: &LipschitzMap, r: f64) -> Result<Vec<String>> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be >= 0, got {r}"
        )));
    }
    let out = map.codomain();
    let domain = map.domain();
    let mut preimage = vec![None; out.len()];
    for x in (0..domain.len()).rev() {
        preimage[map.image(x)] = Some(x);
    }
    let mut blocked = vec![false; out.len()];
    let mut centers = Vec::new();
    for y in 0..out.len() {
        let Some(x) = preimage[y] else { continue };
        let ball = out.ball_indices(y, r);
        if ball.iter().any(|&q| blocked[q]) {
            continue;
        }
        for q in ball {
            blocked[q] = true;
        }
        centers.push(domain.label(x).to_string());
    }
    Ok(centers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmInequality {
    /// `sum_T w_x <= exp(beta C rho) sum_T w_z`
    SetMass,
    /// `Z(x) >= exp(-beta C rho) Z(z)`
    Normalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmViolation {
    pub inequality: EmInequality,
    pub subset: Vec<String>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmInequalityReport {
    pub subsets_checked: usize,
    pub passed: bool,
    pub first_violation: Option<EmViolation>,
}

/// Checks, for every nonempty output set `T`, the two bounds whose quotient
/// gives the `2 C beta` privacy level, with unnormalized weights
/// `w_x(y) = weight(y) exp(-beta sigma(f(x), y))`.
pub fn check_em_inequalities(
    params: &ExpMechParams,
    x: &str,
    z: &str,
) -> Result<EmInequalityReport> {
    let input = params.input_space();
    let out = params.output_space();
    if out.len() > SUBSET_LIMIT {
        return Err(Error::SubsetGate {
            size: out.len(),
            limit: SUBSET_LIMIT,
        });
    }
    let (xi, zi) = (input.index_of(x)?, input.index_of(z)?);
    let beta = params.beta();
    let spread = beta * params.map().lipschitz_c() * input.dist(xi, zi);
    let unnormalized = |i: usize| -> Vec<f64> {
        let fi = params.map().image(i);
        params
            .base()
            .weights()
            .iter()
            .enumerate()
            .map(|(y, w)| w * (-beta * out.dist(fi, y)).exp())
            .collect()
    };
    let (wx, wz) = (unnormalized(xi), unnormalized(zi));
    let zx: f64 = wx.iter().sum();
    let zz: f64 = wz.iter().sum();

    let subset_labels = |mask: usize| -> Vec<String> {
        (0..out.len())
            .filter(|y| mask >> y & 1 == 1)
            .map(|y| out.label(y).to_string())
            .collect()
    };

    let full = (1usize << out.len()) - 1;
    let rhs = (-spread).exp() * zz;
    if zx < rhs - EM_INEQ_TOL {
        return Ok(EmInequalityReport {
            subsets_checked: 0,
            passed: false,
            first_violation: Some(EmViolation {
                inequality: EmInequality::Normalizer,
                subset: subset_labels(full),
                lhs: zx,
                rhs,
            }),
        });
    }

    let (sx, sz) = (subset_sums(&wx), subset_sums(&wz));
    let factor = spread.exp();
    for mask in 1..=full {
        let rhs = factor * sz[mask];
        if sx[mask] > rhs + EM_INEQ_TOL {
            return Ok(EmInequalityReport {
                subsets_checked: mask,
                passed: false,
                first_violation: Some(EmViolation {
                    inequality: EmInequality::SetMass,
                    subset: subset_labels(mask),
                    lhs: sx[mask],
                    rhs,
                }),
            });
        }
    }
    Ok(EmInequalityReport {
        subsets_checked: full,
        passed: true,
        first_violation: None,
    })
}
