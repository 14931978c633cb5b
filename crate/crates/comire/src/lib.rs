//! Bayesian convex mixture regression for dose-response modeling.
//!
//! The conditional response density at dose x is a convex combination of
//! two extremal densities: a flexible Gaussian mixture at zero dose and a
//! single, more adverse Gaussian at arbitrarily high dose. A monotone
//! I-spline expansion carries all dose dependence through one nondecreasing
//! function beta(x) in [0, 1], which doubles as the standardized additional
//! risk. Posterior inference runs on a partially collapsed Gibbs sampler,
//! and risk outputs (additional-risk curves, benchmark doses, conservative
//! lower bounds) come with full posterior uncertainty.
//!
//! ```
//! use comire::basis::build_basis;
//! use comire::gibbs::{run_chain, ChainSettings};
//! use comire::model::ModelConfig;
//! use comire::risk::{posterior_risk_curve, RiskQuery};
//! use comire::samplers::RngStream;
//! use comire::simgen::gen_scenario1;
//!
//! let (data, _truth) = gen_scenario1(&mut RngStream::new(1, 0), 200).unwrap();
//! let basis = build_basis(7, data.dose_max().unwrap(), 3).unwrap();
//! let config = ModelConfig::with_defaults(basis.clone(), data.response_mean().unwrap());
//! let settings = ChainSettings { iterations: 200, burn_in: 100, thin: 5, chains: 1, seed: 1 };
//! let draws = run_chain(&config, &data, &settings).unwrap();
//! let query = RiskQuery::new(37.0, 0.1, vec![5.0, 20.0, 40.0]).unwrap();
//! let curve = posterior_risk_curve(&draws, &basis, &query).unwrap();
//! assert_eq!(curve.len(), 3);
//! ```

// Guards of the form `!(x > 0.0)` reject NaN as well as the out-of-range
// value; the spelled-out comparison would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Special-function coefficients keep their published digits.
#![allow(clippy::excessive_precision)]

pub mod basis;
pub mod checks;
pub mod cli;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod model;
pub mod risk;
pub mod samplers;
pub mod simgen;
mod util;

pub use error::{ComireError, Result};
