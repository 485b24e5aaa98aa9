//! The exponential mechanism whose score is the output metric itself:
//! `P_x(y) ∝ weight(y) * exp(-beta * sigma(f(x), y))`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::metric::{FiniteMetricSpace, LipschitzMap};

/// Row-sum tolerance for [`MechanismTable`].
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Base measure on the output space, inverse temperature and the map being released.
#[derive(Debug, Clone)]
pub struct ExpMechParams {
    base: DiscreteMeasure,
    beta: f64,
    map: LipschitzMap,
}

impl ExpMechParams {
    pub fn new(base: DiscreteMeasure, beta: f64, map: LipschitzMap) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if base.total_mass() <= 0.0 {
            return Err(Error::DegenerateMeasure(
                "base measure has total mass 0".into(),
            ));
        }
        if base.space().as_ref() != map.codomain().as_ref() {
            return Err(Error::SpaceMismatch(
                "base measure must live on the codomain of the map".into(),
            ));
        }
        Ok(Self { base, beta, map })
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn map(&self) -> &LipschitzMap {
        &self.map
    }

    pub fn input_space(&self) -> &Arc<FiniteMetricSpace> {
        self.map.domain()
    }

    pub fn output_space(&self) -> &Arc<FiniteMetricSpace> {
        self.map.codomain()
    }

    /// Output distribution for input index `x`, via a max-shifted exponent.
    pub(crate) fn distribution_at(&self, x: usize) -> Result<Vec<f64>> {
        let out = self.output_space();
        let fx = self.map.image(x);
        let exponents: Vec<f64> = (0..out.len())
            .map(|y| {
                let w = self.base.weights()[y];
                if w > 0.0 {
                    w.ln() - self.beta * out.dist(fx, y)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::DegenerateMeasure(format!(
                "normalizer vanishes for input `{}`",
                self.input_space().label(x)
            )));
        }
        let mut p: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
        let z: f64 = p.iter().sum();
        for v in &mut p {
            *v /= z;
        }
        Ok(p)
    }
}

/// Output distribution for input `x`, indexed like the output space labels.
pub fn exp_mech_distribution(params: &ExpMechParams, x: &str) -> Result<Vec<f64>> {
    let xi = params.input_space().index_of(x)?;
    params.distribution_at(xi)
}

/// One output distribution per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismTable {
    input_space: Arc<FiniteMetricSpace>,
    output_space: Arc<FiniteMetricSpace>,
    rows: Vec<Vec<f64>>,
}

impl MechanismTable {
    /// Checks that each row is a probability vector within [`ROW_SUM_TOL`].
    pub fn new(
        input_space: Arc<FiniteMetricSpace>,
        output_space: Arc<FiniteMetricSpace>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != input_space.len() {
            return Err(Error::InvalidTable(format!(
                "{} rows for {} inputs",
                rows.len(),
                input_space.len()
            )));
        }
        for (x, row) in rows.iter().enumerate() {
            let label = input_space.label(x);
            if row.len() != output_space.len() {
                return Err(Error::InvalidTable(format!(
                    "row `{label}` has {} entries for {} outputs",
                    row.len(),
                    output_space.len()
                )));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidTable(format!(
                    "row `{label}` has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidTable(format!("row `{label}` sums to {sum}")));
            }
        }
        Ok(Self {
            input_space,
            output_space,
            rows,
        })
    }

    pub fn input_space(&self) -> &Arc<FiniteMetricSpace> {
        &self.input_space
    }

    pub fn output_space(&self) -> &Arc<FiniteMetricSpace> {
        &self.output_space
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, x: &str) -> Result<&[f64]> {
        Ok(&self.rows[self.input_space.index_of(x)?])
    }
}

/// Materializes every row of the mechanism. Rows are computed in parallel and
/// assembled in input label order.
pub fn tabulate(params: &ExpMechParams) -> Result<MechanismTable> {
    let rows = (0..params.input_space().len())
        .into_par_iter()
        .map(|x| params.distribution_at(x))
        .collect::<Result<Vec<_>>>()?;
    MechanismTable::new(
        params.input_space().clone(),
        params.output_space().clone(),
        rows,
    )
}

/// Inverse-CDF lookup: first index whose cumulative mass exceeds `u`.
fn invert_cdf(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    last_positive
}

/// `count` independent draws from one seeded stream, returned as output labels.
pub fn sample_many(
    params: &ExpMechParams,
    x: &str,
    seed: u64,
    count: usize,
) -> Result<Vec<String>> {
    let p = exp_mech_distribution(params, x)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let out = params.output_space();
    Ok((0..count)
        .map(|_| out.label(invert_cdf(&p, rng.random::<f64>())).to_string())
        .collect())
}

/// One draw; the same `(params, x, seed)` always gives the same label.
pub fn sample(params: &ExpMechParams, x: &str, seed: u64) -> Result<String> {
    Ok(sample_many(params, x, seed, 1)?.remove(0))
}

/// `beta = max(0, (2/gamma) ln(1/(delta m)))`, the inverse temperature that
/// guarantees `(gamma, delta)`-utility for a base with modulus `m` at `gamma/2`.
pub fn calibrate_beta(gamma: f64, delta: f64, m: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if m.is_nan() || m <= 0.0 {
        return Err(Error::NotUniformlyPositive {
            radius: gamma / 2.0,
        });
    }
    Ok((2.0 / gamma * (1.0 / (delta * m)).ln()).max(0.0))
}

/// Privacy level `2 C beta` of the exponential mechanism for a `C`-Lipschitz map.
pub fn privacy_bound(beta: f64, lipschitz_c: f64) -> f64 {
    2.0 * lipschitz_c * beta
}

/// Constructive upper bound on the privacy cost of `(gamma, delta)`-utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub epsilon: f64,
    pub beta: f64,
    pub m: f64,
}

/// Bound achieved by the exponential mechanism on `base` for a 1-Lipschitz map.
pub fn tradeoff_upper_bound(base: &DiscreteMeasure, gamma: f64, delta: f64) -> Result<Tradeoff> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    let m = base.uniform_positivity_modulus(gamma / 2.0)?;
    let beta = calibrate_beta(gamma, delta, m)?;
    Ok(Tradeoff {
        epsilon: privacy_bound(beta, 1.0),
        beta,
        m,
    })
}

/// Smallest database size `N` at which sensitivity `1/N` reaches `eps_target`:
/// `ceil(eps_bound / eps_target)`, at least 1.
pub fn min_database_size(eps_target: f64, gamma: f64, delta: f64, m: f64) -> Result<u64> {
    if !(eps_target.is_finite() && eps_target > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target epsilon must be > 0, got {eps_target}"
        )));
    }
    let eps_bound = privacy_bound(calibrate_beta(gamma, delta, m)?, 1.0);
    Ok(((eps_bound / eps_target).ceil() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x3() -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::grid(3).unwrap())
    }

    fn identity_params(beta: f64) -> ExpMechParams {
        let x = x3();
        ExpMechParams::new(
            DiscreteMeasure::uniform(x.clone()).unwrap(),
            beta,
            LipschitzMap::identity(x).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn distribution_matches_direct_evaluation() {
        let p = exp_mech_distribution(&identity_params(1.0), "0").unwrap();
        let raw = [1.0, (-0.5f64).exp(), (-1.0f64).exp()];
        let z: f64 = raw.iter().sum();
        for (a, b) in p.iter().zip(raw) {
            assert_relative_eq!(*a, b / z, epsilon = 1e-15);
        }
        assert_relative_eq!(p[0], 0.5065, epsilon = 5e-5);
        assert_relative_eq!(p[1], 0.3072, epsilon = 5e-5);
        assert_relative_eq!(p[2], 0.1863, epsilon = 5e-5);
    }

    #[test]
    fn zero_beta_returns_normalized_base() {
        let x = x3();
        let base = DiscreteMeasure::new(x.clone(), vec![1.0, 1.0, 2.0]).unwrap();
        let params = ExpMechParams::new(base, 0.0, LipschitzMap::identity(x).unwrap()).unwrap();
        for label in ["0", "0.5", "1"] {
            assert_eq!(
                exp_mech_distribution(&params, label).unwrap(),
                vec![0.25, 0.25, 0.5]
            );
        }
    }

    #[test]
    fn point_mass_base_stays_put() {
        let x = x3();
        let base = DiscreteMeasure::new(x.clone(), vec![0.0, 3.0, 0.0]).unwrap();
        let params = ExpMechParams::new(base, 7.0, LipschitzMap::identity(x).unwrap()).unwrap();
        for label in ["0", "0.5", "1"] {
            assert_eq!(
                exp_mech_distribution(&params, label).unwrap(),
                vec![0.0, 1.0, 0.0]
            );
            for seed in 0..20 {
                assert_eq!(sample(&params, label, seed).unwrap(), "0.5");
            }
        }
    }

    #[test]
    fn zero_base_is_rejected() {
        let x = x3();
        let base = DiscreteMeasure::new(x.clone(), vec![0.0; 3]).unwrap();
        let r = ExpMechParams::new(base, 1.0, LipschitzMap::identity(x).unwrap());
        assert!(matches!(r, Err(Error::DegenerateMeasure(_))));
    }

    #[test]
    fn huge_beta_does_not_underflow() {
        let p = exp_mech_distribution(&identity_params(5000.0), "0").unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tabulate_rows() {
        let t = tabulate(&identity_params(1.0)).unwrap();
        assert_eq!(t.rows().len(), 3);
        assert_eq!(
            t.row("0").unwrap(),
            exp_mech_distribution(&identity_params(1.0), "0").unwrap()
        );
        let flat = tabulate(&identity_params(0.0)).unwrap();
        assert!(flat.rows().windows(2).all(|w| w[0] == w[1]));

        let single = Arc::new(FiniteMetricSpace::grid(1).unwrap());
        let params = ExpMechParams::new(
            DiscreteMeasure::uniform(single.clone()).unwrap(),
            2.0,
            LipschitzMap::identity(single).unwrap(),
        )
        .unwrap();
        assert_eq!(tabulate(&params).unwrap().rows(), &[vec![1.0]]);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let params = identity_params(1.0);
        let a = sample_many(&params, "0.5", 7, 50).unwrap();
        let b = sample_many(&params, "0.5", 7, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            sample(&params, "0", 99).unwrap(),
            sample(&params, "0", 99).unwrap()
        );
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let params = identity_params(0.0);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for seed in 0..draws {
            let y = sample(&params, "0", seed as u64).unwrap();
            counts[params.output_space().index_of(&y).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn inverse_cdf_edges() {
        assert_eq!(invert_cdf(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(invert_cdf(&[0.5, 0.5, 0.0], 0.999_999_999_999), 1);
        assert_eq!(invert_cdf(&[0.5, 0.5 - 1e-17, 0.0], 1.0 - 1e-18), 1);
    }

    #[test]
    fn calibration_examples() {
        assert_relative_eq!(
            calibrate_beta(1.0, 0.5, 1.0).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            calibrate_beta(0.5, 0.1, 1.0 / 3.0).unwrap(),
            4.0 * 30f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            calibrate_beta(0.5, 0.1, 1.0 / 3.0).unwrap(),
            13.6048,
            epsilon = 1e-4
        );
        assert_eq!(calibrate_beta(0.3, 0.5, 2.0).unwrap(), 0.0);
        assert_eq!(calibrate_beta(0.3, 0.5, 3.0).unwrap(), 0.0);
        assert!(matches!(
            calibrate_beta(1.0, 0.5, 0.0),
            Err(Error::NotUniformlyPositive { .. })
        ));
        assert!(calibrate_beta(0.0, 0.5, 1.0).is_err());
        assert!(calibrate_beta(1.0, 1.0, 1.0).is_err());
        assert!(calibrate_beta(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn privacy_bound_examples() {
        assert_eq!(privacy_bound(0.5, 1.0), 1.0);
        assert_eq!(privacy_bound(123.0, 0.0), 0.0);
        assert_relative_eq!(privacy_bound(2.0 * 2f64.ln(), 1.0), 2.7726, epsilon = 1e-4);
    }

    #[test]
    fn tradeoff_examples() {
        let base = DiscreteMeasure::uniform(x3()).unwrap();
        let t = tradeoff_upper_bound(&base, 0.5, 0.1).unwrap();
        assert_relative_eq!(t.m, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(t.beta, 4.0 * 30f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(t.epsilon, 8.0 * 30f64.ln(), epsilon = 1e-12);

        // gamma = 2 * diameter: every ball is the whole space
        let t = tradeoff_upper_bound(&base, 2.0, 0.1).unwrap();
        assert_relative_eq!(t.m, 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.beta, (2.0 / 2.0) * 10f64.ln(), epsilon = 1e-12);

        let heavy = DiscreteMeasure::new(x3(), vec![4.0, 4.0, 4.0]).unwrap();
        let t = tradeoff_upper_bound(&heavy, 0.5, 0.5).unwrap();
        assert_eq!((t.epsilon, t.beta), (0.0, 0.0));

        let holes = DiscreteMeasure::new(x3(), vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            tradeoff_upper_bound(&holes, 0.5, 0.1),
            Err(Error::NotUniformlyPositive { .. })
        ));
    }

    #[test]
    fn database_size_examples() {
        assert_eq!(min_database_size(0.1, 1.0, 0.5, 1.0).unwrap(), 28);
        assert_eq!(min_database_size(0.05, 1.0, 0.5, 1.0).unwrap(), 56);
        assert_eq!(min_database_size(10.0, 1.0, 0.5, 1.0).unwrap(), 1);
        assert!(min_database_size(0.0, 1.0, 0.5, 1.0).is_err());
    }
}
