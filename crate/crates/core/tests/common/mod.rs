//! Random instance generators and brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use metricdp::{DiscreteMeasure, ExpMechParams, FiniteMetricSpace, LipschitzMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn labels(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Points in the unit square under the Euclidean distance.
pub fn euclidean_space(rng: &mut impl Rng, n: usize, prefix: &str) -> FiniteMetricSpace {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    FiniteMetricSpace::from_fn(labels(n, prefix), |i, j| {
        let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
        (dx * dx + dy * dy).sqrt()
    })
    .unwrap()
}

/// Shortest-path closure of random edge weights in `[0.05, 1]`.
pub fn graph_space(rng: &mut impl Rng, n: usize, prefix: &str) -> FiniteMetricSpace {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.random_range(0.05..=1.0);
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    FiniteMetricSpace::new(labels(n, prefix), d).unwrap()
}

pub fn random_space(rng: &mut impl Rng, n: usize, prefix: &str) -> FiniteMetricSpace {
    if rng.random_bool(0.5) {
        euclidean_space(rng, n, prefix)
    } else {
        graph_space(rng, n, prefix)
    }
}

pub fn random_map(
    rng: &mut impl Rng,
    x: Arc<FiniteMetricSpace>,
    y: Arc<FiniteMetricSpace>,
) -> LipschitzMap {
    let table = (0..x.len()).map(|_| rng.random_range(0..y.len())).collect();
    LipschitzMap::new(x, y, table).unwrap()
}

pub fn random_base(rng: &mut impl Rng, y: Arc<FiniteMetricSpace>) -> DiscreteMeasure {
    let w = (0..y.len()).map(|_| rng.random_range(0.01..=1.0)).collect();
    DiscreteMeasure::new(y, w).unwrap()
}

/// Random exponential mechanism with `|X| <= max_in`, `|Y| <= max_out`, beta in `[0, max_beta]`.
pub fn random_instance(
    rng: &mut impl Rng,
    max_in: usize,
    max_out: usize,
    max_beta: f64,
) -> ExpMechParams {
    let nx = rng.random_range(1..=max_in);
    let ny = rng.random_range(1..=max_out);
    let x = Arc::new(random_space(rng, nx, "x"));
    let y = Arc::new(random_space(rng, ny, "y"));
    let map = random_map(rng, x, y.clone());
    let base = random_base(rng, y);
    let beta = rng.random_range(0.0..=max_beta);
    ExpMechParams::new(base, beta, map).unwrap()
}

/// Direct evaluation of `w(y) exp(-beta sigma(f(x), y))`, normalized; no max shift.
pub fn naive_distribution(params: &ExpMechParams, x: usize) -> Vec<f64> {
    let out = params.output_space();
    let fx = params.map().image(x);
    let raw: Vec<f64> = params
        .base()
        .weights()
        .iter()
        .enumerate()
        .map(|(y, w)| w * (-params.beta() * out.dist(fx, y)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

/// Triple-loop metric check with the library's tolerances.
pub fn is_metric_oracle(d: &[Vec<f64>]) -> bool {
    let n = d.len();
    let tol = 1e-12;
    for i in 0..n {
        if d[i][i].abs() > tol {
            return false;
        }
        for j in 0..n {
            if i != j && d[i][j] < 0.0 {
                return false;
            }
            if (d[i][j] - d[j][i]).abs() > tol {
                return false;
            }
            for k in 0..n {
                if k != i && k != j && i != j && d[i][j] > d[i][k] + d[k][j] + tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Closed ball by direct scan (same slack as the library).
pub fn ball_oracle(space: &FiniteMetricSpace, c: usize, r: f64) -> Vec<usize> {
    (0..space.len())
        .filter(|&y| space.dist(c, y) <= r + 1e-12)
        .collect()
}

/// Maximum over ordered pairs and all nonempty output sets of the log-ratio per unit distance.
pub fn subset_epsilon_oracle(rows: &[Vec<f64>], input: &FiniteMetricSpace) -> f64 {
    let ny = rows.first().map_or(0, Vec::len);
    let mut eps: f64 = 0.0;
    for x in 0..rows.len() {
        for z in 0..rows.len() {
            if x == z {
                continue;
            }
            for mask in 1u32..(1 << ny) {
                let a: f64 = (0..ny)
                    .filter(|y| mask >> y & 1 == 1)
                    .map(|y| rows[x][y])
                    .sum();
                let b: f64 = (0..ny)
                    .filter(|y| mask >> y & 1 == 1)
                    .map(|y| rows[z][y])
                    .sum();
                if a == 0.0 {
                    continue;
                }
                if b == 0.0 {
                    return f64::INFINITY;
                }
                eps = eps.max((a / b).ln() / input.dist(x, z));
            }
        }
    }
    eps
}
