//! Partially collapsed Gibbs sampler, chain management, and retained draws.
//!
//! One sweep updates, in order: basis labels b (extremal membership
//! marginalized out), basis weights w, membership indicators d, zero-dose
//! component labels c, mixture weights nu0, the zero-dose atoms, and the
//! high-dose atom. All steps are exact conditional draws.

use rayon::prelude::*;

use crate::basis::{BasisMatrix, BetaWeights};
use crate::error::{ComireError, Result};
use crate::model::{log_normal_pdf, Dataset, ExtremalHigh, ExtremalLow, ModelConfig, ParamState};
use crate::samplers::{
    sample_categorical, sample_dirichlet, sample_gamma, sample_truncated_normal, RngStream,
};
use crate::util::{quantile, variance};

/// Per-observation latent labels.
///
/// `b[i]` indexes the basis function, `c[i]` the zero-dose mixture component
/// (meaningful only where `d[i]` is false), and `d[i]` marks membership in
/// the high-dose component. Labels are zero-based indices into the weight
/// vectors.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub d: Vec<bool>,
}

impl AugmentedState {
    pub fn new(n: usize) -> Self {
        Self {
            b: vec![0; n],
            c: vec![0; n],
            d: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// MCMC run settings. `iterations` counts total sweeps including burn-in;
/// every `thin`-th post-burn-in state is retained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 2000,
            thin: 5,
            chains: 1,
            seed: 0,
        }
    }
}

impl ChainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(ComireError::Config(format!(
                "burn-in ({}) must be smaller than total iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(ComireError::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(ComireError::Config("at least one chain is required".into()));
        }
        Ok(())
    }

    /// Number of retained draws per chain.
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained state with its provenance.
#[derive(Debug, Clone)]
pub struct RetainedDraw {
    pub chain_id: usize,
    pub iteration: usize,
    pub state: ParamState,
}

/// Ordered collection of retained draws across chains.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    draws: Vec<RetainedDraw>,
    h: usize,
    j: usize,
    /// Every update in this sampler is an exact conditional draw; there is
    /// no accept/reject bookkeeping beyond this flag.
    pub exact_conditional_steps: bool,
}

impl PosteriorDraws {
    pub fn from_draws(draws: Vec<RetainedDraw>, h: usize, j: usize) -> Self {
        Self {
            draws,
            h,
            j,
            exact_conditional_steps: true,
        }
    }

    pub fn draws(&self) -> &[RetainedDraw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn states(&self) -> impl Iterator<Item = &ParamState> + '_ {
        self.draws.iter().map(|d| &d.state)
    }

    pub fn chain_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.draws.iter().map(|d| d.chain_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Names of the monitored scalar parameters, matching the draw-file
    /// column order after the iteration column.
    pub fn scalar_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.j + 3 * self.h + 2);
        names.extend((1..=self.j).map(|k| format!("w_{k}")));
        names.extend((1..=self.h).map(|k| format!("nu0_{k}")));
        names.extend((1..=self.h).map(|k| format!("mu0_{k}")));
        names.extend((1..=self.h).map(|k| format!("tau0_{k}")));
        names.push("mu_inf".into());
        names.push("tau_inf".into());
        names
    }

    /// Flatten one state into the scalar order of [`scalar_names`].
    pub fn scalar_row(state: &ParamState) -> Vec<f64> {
        let mut row = Vec::new();
        row.extend_from_slice(state.w.as_slice());
        row.extend_from_slice(state.low.nu0());
        row.extend_from_slice(state.low.mu0());
        row.extend_from_slice(state.low.tau0());
        row.push(state.high.mu_inf());
        row.push(state.high.tau_inf());
        row
    }

    /// Series of one monitored scalar along one chain, in iteration order.
    pub fn scalar_series(&self, chain_id: usize, scalar_idx: usize) -> Vec<f64> {
        self.draws
            .iter()
            .filter(|d| d.chain_id == chain_id)
            .map(|d| Self::scalar_row(&d.state)[scalar_idx])
            .collect()
    }
}

/// Step 1: redraw each basis label from its conditional with the extremal
/// membership indicator marginalized out,
/// pr(b_i = j) proportional to w_j [(1 - psi_j(x_i)) f0(y_i) + psi_j(x_i) f_inf(y_i)].
pub fn step_update_b(
    rng: &mut RngStream,
    state: &ParamState,
    psi: &BasisMatrix,
    data: &Dataset,
    aug: &mut AugmentedState,
) -> Result<()> {
    let j = psi.j();
    let w = state.w.as_slice();
    let mut probs = vec![0.0; j];
    for i in 0..data.len() {
        let y = data.y()[i];
        let lf0 = state.log_density_low(y);
        let lfi = state.log_density_high(y);
        let shift = lf0.max(lfi);
        let f0 = (lf0 - shift).exp();
        let fi = (lfi - shift).exp();
        let row = psi.row(i);
        for k in 0..j {
            probs[k] = w[k] * ((1.0 - row[k]) * f0 + row[k] * fi);
        }
        aug.b[i] = sample_categorical(rng, &probs).map_err(|e| {
            ComireError::Numerical(format!("basis label update failed at observation {i}: {e}"))
        })?;
    }
    Ok(())
}

/// Step 2: redraw the basis weights from Dir(eta + basis counts).
pub fn step_update_w(
    rng: &mut RngStream,
    config: &ModelConfig,
    aug: &AugmentedState,
) -> Result<BetaWeights> {
    let mut conc = config.eta.clone();
    for &bi in &aug.b {
        conc[bi] += 1.0;
    }
    let w = sample_dirichlet(rng, &conc)?;
    BetaWeights::new(w)
}

/// Step 3: redraw each membership indicator from
/// Bern[beta f_inf / ((1 - beta) f0 + beta f_inf)], with the basis label
/// marginalized out through beta(x_i).
pub fn step_update_d(
    rng: &mut RngStream,
    state: &ParamState,
    psi: &BasisMatrix,
    data: &Dataset,
    aug: &mut AugmentedState,
) -> Result<()> {
    for i in 0..data.len() {
        let beta = psi.beta(i, &state.w);
        let y = data.y()[i];
        let lf0 = state.log_density_low(y);
        let lfi = state.log_density_high(y);
        let shift = lf0.max(lfi);
        let f0 = (lf0 - shift).exp();
        let fi = (lfi - shift).exp();
        let denom = (1.0 - beta) * f0 + beta * fi;
        if !(denom > 0.0) {
            return Err(ComireError::Numerical(format!(
                "membership update has zero density at observation {i}"
            )));
        }
        let p = beta * fi / denom;
        aug.d[i] = rng.uniform_open() < p;
    }
    Ok(())
}

/// Step 4: for observations outside the high-dose component, redraw the
/// mixture label with pr(c_i = h) proportional to nu0_h phi(y_i; mu0_h, 1/tau0_h).
pub fn step_update_c(
    rng: &mut RngStream,
    state: &ParamState,
    data: &Dataset,
    aug: &mut AugmentedState,
) -> Result<()> {
    let h = state.low.h();
    let nu0 = state.low.nu0();
    let mu0 = state.low.mu0();
    let tau0 = state.low.tau0();
    let mut logp = vec![f64::NEG_INFINITY; h];
    let mut probs = vec![0.0; h];
    for i in 0..data.len() {
        if aug.d[i] {
            continue;
        }
        let y = data.y()[i];
        let mut shift = f64::NEG_INFINITY;
        for k in 0..h {
            logp[k] = if nu0[k] > 0.0 {
                nu0[k].ln() + log_normal_pdf(y, mu0[k], tau0[k])
            } else {
                f64::NEG_INFINITY
            };
            shift = shift.max(logp[k]);
        }
        if !shift.is_finite() {
            return Err(ComireError::Numerical(format!(
                "component label update has zero density at observation {i}"
            )));
        }
        for k in 0..h {
            probs[k] = (logp[k] - shift).exp();
        }
        aug.c[i] = sample_categorical(rng, &probs).map_err(|e| {
            ComireError::Numerical(format!(
                "component label update failed at observation {i}: {e}"
            ))
        })?;
    }
    Ok(())
}

/// Step 5: redraw the zero-dose mixture weights from Dir(alpha + counts),
/// counting labels only among observations with d_i = 0.
pub fn step_update_nu0(
    rng: &mut RngStream,
    config: &ModelConfig,
    aug: &AugmentedState,
) -> Result<Vec<f64>> {
    let mut conc = config.alpha.clone();
    for i in 0..aug.len() {
        if !aug.d[i] {
            conc[aug.c[i]] += 1.0;
        }
    }
    sample_dirichlet(rng, &conc)
}

/// Step 6: redraw every zero-dose atom (mu0_h, tau0_h) in index order.
///
/// Within a component the precision is redrawn first, given the current
/// location, then the location given the fresh precision; the location is
/// truncated below by the current high-dose mean.
pub fn step_update_theta0(
    rng: &mut RngStream,
    config: &ModelConfig,
    state: &ParamState,
    data: &Dataset,
    aug: &AugmentedState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = config.h;
    let mu_inf = state.high.mu_inf();
    let mut mu0 = state.low.mu0().to_vec();
    let mut tau0 = state.low.tau0().to_vec();

    for k in 0..h {
        let mut n_h = 0.0;
        let mut sum_y = 0.0;
        let mut ss = 0.0;
        for i in 0..data.len() {
            if !aug.d[i] && aug.c[i] == k {
                let y = data.y()[i];
                n_h += 1.0;
                sum_y += y;
                ss += (y - mu0[k]) * (y - mu0[k]);
            }
        }
        let a_hat = config.a_tau + 0.5 * n_h;
        let b_hat = config.b_tau + 0.5 * ss;
        tau0[k] = sample_gamma(rng, a_hat, b_hat)
            .map_err(|e| ComireError::Numerical(format!("precision update, component {k}: {e}")))?;

        let prec = 1.0 / config.kappa + n_h * tau0[k];
        let sigma2_hat = 1.0 / prec;
        let mu_hat = sigma2_hat * (config.prior_mean / config.kappa + tau0[k] * sum_y);
        mu0[k] = sample_truncated_normal(rng, mu_hat, sigma2_hat, mu_inf, f64::INFINITY)
            .map_err(|e| ComireError::Numerical(format!("location update, component {k}: {e}")))?;
    }
    Ok((mu0, tau0))
}

/// Step 7: redraw the high-dose atom (mu_inf, tau_inf), with the location
/// truncated above by the smallest zero-dose component mean.
pub fn step_update_theta_inf(
    rng: &mut RngStream,
    config: &ModelConfig,
    state: &ParamState,
    data: &Dataset,
    aug: &AugmentedState,
) -> Result<(f64, f64)> {
    let mu_inf = state.high.mu_inf();
    let mut n_inf = 0.0;
    let mut sum_y = 0.0;
    let mut ss = 0.0;
    for i in 0..data.len() {
        if aug.d[i] {
            let y = data.y()[i];
            n_inf += 1.0;
            sum_y += y;
            ss += (y - mu_inf) * (y - mu_inf);
        }
    }
    let a_hat = config.a_tau + 0.5 * n_inf;
    let b_hat = config.b_tau + 0.5 * ss;
    let tau_new = sample_gamma(rng, a_hat, b_hat)
        .map_err(|e| ComireError::Numerical(format!("high-dose precision update: {e}")))?;

    let prec = 1.0 / config.kappa + n_inf * tau_new;
    let sigma2_hat = 1.0 / prec;
    let mu_hat = sigma2_hat * (config.prior_mean / config.kappa + tau_new * sum_y);
    let upper = state.low.min_mu0();
    let mu_new = sample_truncated_normal(rng, mu_hat, sigma2_hat, f64::NEG_INFINITY, upper)
        .map_err(|e| ComireError::Numerical(format!("high-dose location update: {e}")))?;
    Ok((mu_new, tau_new))
}

/// Deterministic-plus-prior initial state.
///
/// Basis and mixture weights start at prior draws. Component locations
/// start at equally spaced upper-half response quantiles, the high-dose
/// location at the 5th percentile minus one standard deviation, and all
/// precisions at 1/var(y), so the ordering restriction holds from the start.
pub fn initial_state(
    rng: &mut RngStream,
    config: &ModelConfig,
    data: &Dataset,
) -> Result<(ParamState, AugmentedState)> {
    let w = BetaWeights::new(sample_dirichlet(rng, &config.eta)?)?;
    let nu0 = sample_dirichlet(rng, &config.alpha)?;

    let (mu0, mu_inf, tau) = if data.is_empty() {
        let mu0 = vec![config.prior_mean; config.h];
        (mu0, config.prior_mean - config.kappa.sqrt(), 1.0)
    } else {
        let y = data.y();
        let var = variance(y);
        let sd = var.sqrt();
        let mu0: Vec<f64> = (1..=config.h)
            .map(|k| quantile(y, 0.5 + 0.5 * k as f64 / (config.h + 1) as f64))
            .collect();
        let min_mu0 = mu0.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut mu_inf = quantile(y, 0.05) - sd;
        if !(mu_inf < min_mu0) {
            mu_inf = min_mu0 - if sd > 0.0 { sd } else { 1.0 };
        }
        let tau = if var > 0.0 { 1.0 / var } else { 1.0 };
        (mu0, mu_inf, tau)
    };

    let low = ExtremalLow::new(nu0, mu0, vec![tau; config.h])?;
    let high = ExtremalHigh::new(mu_inf, tau)?;
    let state = ParamState::new(low, high, w)?;
    let aug = AugmentedState::new(data.len());
    Ok((state, aug))
}

/// One full sweep over steps 1-7, in order.
pub fn sweep(
    rng: &mut RngStream,
    config: &ModelConfig,
    psi: &BasisMatrix,
    data: &Dataset,
    state: &mut ParamState,
    aug: &mut AugmentedState,
) -> Result<()> {
    step_update_b(rng, state, psi, data, aug)?;
    state.w = step_update_w(rng, config, aug)?;
    step_update_d(rng, state, psi, data, aug)?;
    step_update_c(rng, state, data, aug)?;
    let nu0 = step_update_nu0(rng, config, aug)?;
    let (mu0, tau0) = step_update_theta0(rng, config, state, data, aug)?;
    state.low = ExtremalLow::new(nu0, mu0, tau0)?;
    let (mu_inf, tau_inf) = step_update_theta_inf(rng, config, state, data, aug)?;
    state.high = ExtremalHigh::new(mu_inf, tau_inf)?;
    debug_assert!(state.high.mu_inf() < state.low.min_mu0());
    Ok(())
}

/// Run the sampler; chains execute in parallel on independent streams and
/// the merged draws are ordered by chain, then iteration.
pub fn run_chain(
    config: &ModelConfig,
    data: &Dataset,
    settings: &ChainSettings,
) -> Result<PosteriorDraws> {
    config.validate()?;
    settings.validate()?;

    let psi = BasisMatrix::evaluate(&config.basis, data.x())?;
    let run_one = |chain_id: usize| -> Result<Vec<RetainedDraw>> {
        let mut rng = RngStream::new(settings.seed, chain_id as u64);
        let (mut state, mut aug) = initial_state(&mut rng, config, data)?;
        let mut retained = Vec::with_capacity(settings.retained_per_chain());
        for iter in 1..=settings.iterations {
            sweep(&mut rng, config, &psi, data, &mut state, &mut aug).map_err(|e| {
                ComireError::Numerical(format!("chain {chain_id}, iteration {iter}: {e}"))
            })?;
            if iter > settings.burn_in && (iter - settings.burn_in).is_multiple_of(settings.thin) {
                retained.push(RetainedDraw {
                    chain_id,
                    iteration: iter,
                    state: state.clone(),
                });
            }
        }
        Ok(retained)
    };

    let per_chain: Vec<Vec<RetainedDraw>> = if settings.chains == 1 {
        vec![run_one(0)?]
    } else {
        (0..settings.chains)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()?
    };

    let draws: Vec<RetainedDraw> = per_chain.into_iter().flatten().collect();
    Ok(PosteriorDraws::from_draws(draws, config.h, config.basis.j()))
}
