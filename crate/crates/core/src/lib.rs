//! Exponential mechanisms over finite metric spaces.
//!
//! The crate builds the exponential mechanism whose score is the output
//! metric, calibrates its inverse temperature to a `(gamma, delta)` utility
//! target, constructs a covering measure that is uniformly positive on every
//! scale, and audits arbitrary finite mechanism tables exactly:
//!
//! - [`metric`]: finite metric spaces, closed balls, Lipschitz maps
//! - [`measure`]: nonnegative base measures and their positivity modulus
//! - [`covering`]: greedy nets/packings and the level-weighted covering measure
//! - [`mechanism`]: distributions, sampling, calibration and closed-form bounds
//! - [`audit`]: exact privacy/utility audits and the disjoint-ball lower bound
//! - [`io`], [`cli`], [`demo`]: JSON formats and the command-line front end
//!
//! ```
//! use std::sync::Arc;
//! use metricdp::{audit, covering, mechanism, metric::{FiniteMetricSpace, LipschitzMap}};
//!
//! let space = Arc::new(FiniteMetricSpace::grid(5).unwrap());
//! let (mu, _) = covering::build_upm(space.clone(), 2).unwrap();
//! let m = mu.uniform_positivity_modulus(0.25).unwrap();
//! let beta = mechanism::calibrate_beta(0.5, 0.1, m).unwrap();
//! let map = LipschitzMap::identity(space.clone()).unwrap();
//! let params = mechanism::ExpMechParams::new(mu, beta, map.clone()).unwrap();
//! let table = mechanism::tabulate(&params).unwrap();
//! let utility = audit::audit_utility(&table, &map, 0.5).unwrap();
//! assert!(utility.min_mass >= 0.9);
//! ```

pub mod audit;
pub mod cli;
pub mod covering;
pub mod demo;
pub mod error;
pub mod io;
pub mod measure;
pub mod mechanism;
pub mod metric;

pub use error::{Error, Result};
pub use measure::DiscreteMeasure;
pub use mechanism::{ExpMechParams, MechanismTable};
pub use metric::{FiniteMetricSpace, LipschitzMap};
