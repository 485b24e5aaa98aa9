mod common;

use std::sync::Arc;

use metricdp::audit::{audit_privacy, audit_utility, impossibility_lower_bound};
use metricdp::covering::{
    build_upm, default_depth, greedy_net, max_packing, positivity_lower_bound,
};
use metricdp::mechanism::{privacy_bound, tabulate, ExpMechParams, MechanismTable};
use metricdp::metric::{lipschitz_constant, validate_metric};
use metricdp::{DiscreteMeasure, Error, FiniteMetricSpace, LipschitzMap};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn random_symmetric(n: usize, vals: Vec<f64>) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    let mut it = vals.into_iter();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = it.next().unwrap();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validate_agrees_with_triple_loop(n in 1usize..7, vals in prop::collection::vec(-0.2f64..2.0, 21)) {
        let d = random_symmetric(n, vals);
        let report = validate_metric(&d).unwrap();
        prop_assert_eq!(report.is_ok(), is_metric_oracle(&d));
    }

    #[test]
    fn ball_is_monotone_in_radius(seed in any::<u64>(), r1 in 0.0f64..1.5, r2 in 0.0f64..1.5) {
        let mut g = rng(seed);
        let x = random_space(&mut g, 7, "p");
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        for c in x.labels() {
            let small = x.ball(c, lo).unwrap();
            let big = x.ball(c, hi).unwrap();
            prop_assert!(small.iter().all(|y| big.contains(y)));
        }
        for c in 0..x.len() {
            let got: Vec<usize> = x.ball(x.label(c), hi).unwrap().iter().map(|l| x.index_of(l).unwrap()).collect();
            prop_assert_eq!(got, ball_oracle(&x, c, hi));
        }
    }

    #[test]
    fn lipschitz_scales_inversely_with_domain(seed in any::<u64>(), factor in 0.01f64..50.0) {
        let mut g = rng(seed);
        let x = Arc::new(random_space(&mut g, 6, "x"));
        let y = Arc::new(random_space(&mut g, 5, "y"));
        let f = random_map(&mut g, x.clone(), y.clone());
        let scaled = x.rescale(factor).unwrap();
        let c1 = lipschitz_constant(&scaled, &y, f.table()).unwrap();
        let c0 = f.lipschitz_c();
        prop_assert!((c1 - c0 / factor).abs() <= 1e-12 * (c0 / factor).max(1e-300));
    }

    #[test]
    fn lipschitz_bound_holds_pairwise(seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = Arc::new(random_space(&mut g, 8, "x"));
        let y = Arc::new(random_space(&mut g, 6, "y"));
        let f = random_map(&mut g, x.clone(), y.clone());
        for a in 0..x.len() {
            for b in 0..x.len() {
                let sigma = y.dist(f.image(a), f.image(b));
                prop_assert!(sigma <= f.lipschitz_c() * x.dist(a, b) + 1e-12);
            }
        }
    }

    #[test]
    fn modulus_monotone_and_scales_with_mass(seed in any::<u64>(), r1 in 0.0f64..1.5, r2 in 0.0f64..1.5) {
        let mut g = rng(seed);
        let y = Arc::new(random_space(&mut g, 7, "y"));
        let mu = random_base(&mut g, y);
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let m_lo = mu.uniform_positivity_modulus(lo).unwrap();
        prop_assert!(m_lo <= mu.uniform_positivity_modulus(hi).unwrap());
        prop_assert!(m_lo > 0.0);
        let normalized = mu.normalize().unwrap().uniform_positivity_modulus(lo).unwrap();
        prop_assert!((normalized - m_lo / mu.total_mass()).abs() <= 1e-12);
    }

    #[test]
    fn net_covers_and_matches_packing(seed in any::<u64>(), r in 0.01f64..1.5) {
        let mut g = rng(seed);
        let x = random_space(&mut g, 10, "p");
        let net = greedy_net(&x, r).unwrap();
        prop_assert_eq!(net.len(), max_packing(&x, r / 2.0).unwrap().len());
        for y in x.labels() {
            prop_assert!(net.iter().any(|c| x.dist_by_label(c, y).unwrap() <= r + 1e-12));
        }
    }

    #[test]
    fn covering_measure_certificate(seed in any::<u64>(), extra in 0usize..3) {
        let mut g = rng(seed);
        let x = Arc::new(random_space(&mut g, 9, "p"));
        let depth = default_depth(&x) + extra;
        let (mu, hier) = build_upm(x.clone(), depth).unwrap();
        prop_assert!((mu.total_mass() - (1.0 - 0.5f64.powi(depth as i32))).abs() <= 1e-12);
        for k in 0..40 {
            let r = 0.5f64.powi(depth as i32) + k as f64 * 0.04;
            let b = positivity_lower_bound(&hier, r).unwrap();
            prop_assert!(!b.truncated);
            prop_assert!(mu.uniform_positivity_modulus(r).unwrap() >= b.bound);
        }
    }

    #[test]
    fn rows_are_stochastic_and_match_direct_formula(seed in any::<u64>()) {
        let mut g = rng(seed);
        let params = random_instance(&mut g, 8, 8, 20.0);
        let t = tabulate(&params).unwrap();
        for (x, row) in t.rows().iter().enumerate() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|p| *p >= 0.0));
            for (a, b) in row.iter().zip(naive_distribution(&params, x)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ball_mass_increases_with_beta(seed in any::<u64>(), b1 in 0.0f64..15.0, b2 in 0.0f64..15.0, gamma in 0.0f64..1.2) {
        let mut g = rng(seed);
        let params = random_instance(&mut g, 6, 8, 1.0);
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let with = |beta: f64| {
            let p = ExpMechParams::new(params.base().clone(), beta, params.map().clone()).unwrap();
            audit_utility(&tabulate(&p).unwrap(), params.map(), gamma).unwrap().per_input_mass
        };
        for (a, b) in with(lo).iter().zip(with(hi)) {
            prop_assert!(*a <= b + 1e-12);
        }
    }

    #[test]
    fn privacy_audit_within_2c_beta(seed in any::<u64>()) {
        let mut g = rng(seed);
        let params = random_instance(&mut g, 7, 7, 20.0);
        let t = tabulate(&params).unwrap();
        let eps = audit_privacy(&t, params.input_space()).unwrap().epsilon_max.value();
        prop_assert!(eps <= privacy_bound(params.beta(), params.map().lipschitz_c()) + 1e-9);
    }

    #[test]
    fn privacy_audit_invariant_under_relabeling(seed in any::<u64>()) {
        let mut g = rng(seed);
        let params = random_instance(&mut g, 7, 6, 10.0);
        let t = tabulate(&params).unwrap();
        let x = params.input_space();
        let n = x.len();
        // reverse the order of inputs and rename them
        let perm: Vec<usize> = (0..n).rev().collect();
        let labels: Vec<String> = perm.iter().map(|&i| format!("r{}", x.label(i))).collect();
        let permuted = Arc::new(FiniteMetricSpace::from_fn(labels, |i, j| x.dist(perm[i], perm[j])).unwrap());
        let rows = perm.iter().map(|&i| t.rows()[i].clone()).collect();
        let t2 = MechanismTable::new(permuted.clone(), t.output_space().clone(), rows).unwrap();
        let a = audit_privacy(&t, x).unwrap().epsilon_max.value();
        let b = audit_privacy(&t2, &permuted).unwrap().epsilon_max.value();
        prop_assert_eq!(a, b);
    }
}

/// Hand-built tables on discrete spaces: every table meeting the utility hypothesis
/// has a disjoint-ball bound of at least ln(N/2).
#[test]
fn adversarial_tables_respect_ln_n_over_2() {
    let mut g = rng(17);
    for n in [4usize, 8, 16, 32] {
        let d = Arc::new(FiniteMetricSpace::discrete(n).unwrap());
        let id = LipschitzMap::identity(d.clone()).unwrap();
        let centers: Vec<String> = d.labels().to_vec();
        let refs: Vec<&str> = centers.iter().map(String::as_str).collect();
        let mut checked = 0;
        for trial in 0..200 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|x| {
                    // diagonal mass just above 1/2 for the hardest case, random spread elsewhere
                    let hit = if trial % 2 == 0 {
                        0.5 + 1e-6
                    } else {
                        g.random_range(0.5001..1.0)
                    };
                    let mut rest: Vec<f64> = (0..n).map(|_| g.random_range(0.0..1.0)).collect();
                    rest[x] = 0.0;
                    let s: f64 = rest.iter().sum();
                    rest.iter_mut().for_each(|v| *v *= (1.0 - hit) / s);
                    rest[x] = hit;
                    rest
                })
                .collect();
            let t = MechanismTable::new(d.clone(), d.clone(), rows).unwrap();
            match impossibility_lower_bound(&t, &id, &refs, 0.5) {
                Ok(b) => {
                    checked += 1;
                    assert!(b.eps_lower.value() >= ((n as f64) / 2.0).ln() - 1e-9);
                    assert!(audit_privacy(&t, &d).unwrap().epsilon_max >= b.eps_lower);
                }
                Err(Error::UtilityHypothesisViolated { .. }) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(checked > 100);
    }
}

#[test]
fn set_mass_and_normalizer_inequalities_hold() {
    let mut g = rng(5);
    for _ in 0..100 {
        let params = random_instance(&mut g, 5, 6, 20.0);
        let x = params.input_space();
        for a in x.labels() {
            for b in x.labels() {
                let r = metricdp::audit::check_em_inequalities(&params, a, b).unwrap();
                assert!(r.passed, "{r:?}");
            }
        }
    }
}

#[test]
fn point_mass_base_has_zero_modulus_at_small_radius() {
    let x = Arc::new(FiniteMetricSpace::grid(4).unwrap());
    let mu = DiscreteMeasure::new(x, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(mu.uniform_positivity_modulus(0.1).unwrap(), 0.0);
    assert!(matches!(
        metricdp::mechanism::tradeoff_upper_bound(&mu, 0.2, 0.1),
        Err(Error::NotUniformlyPositive { .. })
    ));
}
