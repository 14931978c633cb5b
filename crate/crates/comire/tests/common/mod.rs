//! Helpers shared by the integration suites.

use comire::basis::BetaWeights;
use comire::model::{ExtremalHigh, ExtremalLow, ParamState};
use comire::samplers::{sample_dirichlet, RngStream};

/// Random parameter state satisfying all invariants, on a response scale
/// comparable to the synthetic scenarios.
pub fn random_valid_state(rng: &mut RngStream, h: usize, j: usize) -> ParamState {
    let nu0 = sample_dirichlet(rng, &vec![1.0; h]).unwrap();
    let mu0: Vec<f64> = (0..h).map(|_| 37.5 + 3.0 * rng.uniform_open()).collect();
    let tau0: Vec<f64> = (0..h).map(|_| 0.4 + 1.6 * rng.uniform_open()).collect();
    let mu_inf = 34.0 + 2.0 * rng.uniform_open();
    let tau_inf = 0.4 + 1.6 * rng.uniform_open();
    let w = sample_dirichlet(rng, &vec![0.7; j]).unwrap();
    ParamState::new(
        ExtremalLow::new(nu0, mu0, tau0).unwrap(),
        ExtremalHigh::new(mu_inf, tau_inf).unwrap(),
        BetaWeights::new(w).unwrap(),
    )
    .unwrap()
}
