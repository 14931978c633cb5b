//! Goodness-of-fit via posterior predictive replication and MCMC
//! convergence diagnostics.

use rayon::prelude::*;

use crate::basis::SplineBasis;
use crate::error::{ComireError, Result};
use crate::gibbs::PosteriorDraws;
use crate::model::{Dataset, ParamState};
use crate::samplers::{sample_categorical, RngStream};
use crate::util::{linspace, quantile, variance};

/// Posterior predictive check output.
///
/// Curves are smoothed estimates of pr(y <= a | x) on a shared dose grid;
/// `None` marks grid points with no effective kernel weight. `tail_flag` is
/// the fraction of comparable grid points where the observed curve falls
/// outside the pointwise replicate envelope.
#[derive(Debug, Clone)]
pub struct PpcResult {
    pub grid: Vec<f64>,
    pub observed: Vec<Option<f64>>,
    pub replicates: Vec<Vec<Option<f64>>>,
    pub tail_flag: f64,
    pub bandwidth: f64,
}

/// Simulate a synthetic dataset from one parameter draw at the given doses,
/// following the model hierarchy: membership, then component, then kernel.
pub fn simulate_predictive_dataset(
    rng: &mut RngStream,
    draw: &ParamState,
    basis: &SplineBasis,
    x_values: &[f64],
) -> Result<Dataset> {
    let mut y = Vec::with_capacity(x_values.len());
    for &x in x_values {
        let beta = basis.beta(&draw.w, x)?;
        let high = rng.uniform_open() < beta;
        let (mu, tau) = if high {
            (draw.high.mu_inf(), draw.high.tau_inf())
        } else {
            let h = sample_categorical(rng, draw.low.nu0())?;
            (draw.low.mu0()[h], draw.low.tau0()[h])
        };
        y.push(mu + rng.standard_normal() / tau.sqrt());
    }
    Dataset::new(x_values.to_vec(), y)
}

/// Gaussian-kernel bandwidth by Silverman's rule on the dose variable.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    let sd = variance(x).sqrt();
    let iqr = quantile(x, 0.75) - quantile(x, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

/// Kernel-weighted mean of the indicator 1(y <= a) over doses, evaluated on
/// the grid (Nadaraya-Watson with a Gaussian kernel).
pub fn smoothed_empirical_cdf(
    data: &Dataset,
    a: f64,
    dose_grid: &[f64],
    bandwidth: f64,
) -> Result<Vec<Option<f64>>> {
    if !(bandwidth > 0.0) {
        return Err(ComireError::Config(format!(
            "bandwidth must be positive (got {bandwidth})"
        )));
    }
    let mut out = Vec::with_capacity(dose_grid.len());
    for &g in dose_grid {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&x, &y) in data.x().iter().zip(data.y()) {
            let z = (x - g) / bandwidth;
            let k = (-0.5 * z * z).exp();
            den += k;
            if y <= a {
                num += k;
            }
        }
        out.push(if den > 0.0 { Some(num / den) } else { None });
    }
    Ok(out)
}

/// Run the posterior predictive check: simulate `n_replicates` datasets from
/// evenly spaced retained draws, smooth each the same way as the observed
/// data, and flag grid points where the observed curve leaves the envelope.
pub fn run_ppc(
    draws: &PosteriorDraws,
    basis: &SplineBasis,
    data: &Dataset,
    a: f64,
    n_replicates: usize,
    bandwidth: Option<f64>,
    seed: u64,
) -> Result<PpcResult> {
    if n_replicates == 0 {
        return Err(ComireError::Usage("at least one replicate is required".into()));
    }
    if n_replicates > draws.len() {
        return Err(ComireError::Usage(format!(
            "requested {n_replicates} replicates but only {} retained draws",
            draws.len()
        )));
    }
    if data.is_empty() {
        return Err(ComireError::Data("cannot run checks on an empty dataset".into()));
    }
    let bw = bandwidth.unwrap_or_else(|| silverman_bandwidth(data.x()));
    if !(bw > 0.0) {
        return Err(ComireError::Config(
            "default bandwidth degenerated to zero; pass one explicitly".into(),
        ));
    }

    let x_min = data.x().iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = data.x().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grid = if x_max > x_min {
        linspace(x_min, x_max, 100)
    } else {
        vec![x_min]
    };

    let observed = smoothed_empirical_cdf(data, a, &grid, bw)?;

    // Evenly spaced retained draws, deterministic selection.
    let step = draws.len() as f64 / n_replicates as f64;
    let indices: Vec<usize> = (0..n_replicates)
        .map(|k| ((k as f64 + 0.5) * step) as usize)
        .map(|i| i.min(draws.len() - 1))
        .collect();
    let states: Vec<&ParamState> = draws.states().collect();

    let replicates: Vec<Vec<Option<f64>>> = indices
        .par_iter()
        .enumerate()
        .map(|(k, &idx)| {
            let mut rng = RngStream::new(seed, 1000 + k as u64);
            let sim = simulate_predictive_dataset(&mut rng, states[idx], basis, data.x())?;
            smoothed_empirical_cdf(&sim, a, &grid, bw)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outside = 0usize;
    let mut comparable = 0usize;
    for (g, obs) in observed.iter().enumerate() {
        let Some(obs) = obs else { continue };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        for rep in &replicates {
            if let Some(v) = rep[g] {
                lo = lo.min(v);
                hi = hi.max(v);
                any = true;
            }
        }
        if any {
            comparable += 1;
            if *obs < lo || *obs > hi {
                outside += 1;
            }
        }
    }
    let tail_flag = if comparable > 0 {
        outside as f64 / comparable as f64
    } else {
        0.0
    };

    Ok(PpcResult {
        grid,
        observed,
        replicates,
        tail_flag,
        bandwidth: bw,
    })
}

/// Convergence z-score comparing the means of an early and a late chain
/// segment, with segment variances taken from a Bartlett-window spectral
/// estimate at frequency zero.
///
/// Returns `Ok(None)` for a constant chain, where the score is undefined.
pub fn geweke_z(chain: &[f64], first_frac: f64, last_frac: f64) -> Result<Option<f64>> {
    if chain.len() < 100 {
        return Err(ComireError::Domain(format!(
            "chain too short for the diagnostic ({} < 100)",
            chain.len()
        )));
    }
    if !(first_frac > 0.0 && last_frac > 0.0 && first_frac + last_frac <= 1.0) {
        return Err(ComireError::Domain(
            "segment fractions must be positive and sum to at most 1".into(),
        ));
    }
    let n = chain.len();
    let n1 = ((n as f64) * first_frac).floor().max(2.0) as usize;
    let n2 = ((n as f64) * last_frac).floor().max(2.0) as usize;
    let first = &chain[..n1];
    let last = &chain[n - n2..];

    let s1 = spectral_density_at_zero(first);
    let s2 = spectral_density_at_zero(last);
    let denom = s1 / n1 as f64 + s2 / n2 as f64;
    if !(denom > 0.0) {
        return Ok(None);
    }
    let m1: f64 = first.iter().sum::<f64>() / n1 as f64;
    let m2: f64 = last.iter().sum::<f64>() / n2 as f64;
    Ok(Some((m1 - m2) / denom.sqrt()))
}

/// Geweke windows used throughout: first 10% versus last 50%.
pub fn geweke_z_default(chain: &[f64]) -> Result<Option<f64>> {
    geweke_z(chain, 0.10, 0.50)
}

/// Lag-window (Bartlett) estimate of the spectral density at frequency zero,
/// using lags up to 4% of the segment length.
fn spectral_density_at_zero(segment: &[f64]) -> f64 {
    let n = segment.len();
    let mean = segment.iter().sum::<f64>() / n as f64;
    let max_lag = ((n as f64) * 0.04).floor().max(1.0) as usize;
    let gamma = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|t| (segment[t] - mean) * (segment[t + lag] - mean))
            .sum::<f64>()
            / n as f64
    };
    let mut s = gamma(0);
    for k in 1..=max_lag.min(n - 1) {
        let weight = 1.0 - k as f64 / (max_lag + 1) as f64;
        s += 2.0 * weight * gamma(k);
    }
    s.max(0.0)
}

/// Identified scalar chains monitored for convergence: the dose-response
/// function on a grid plus the extremal-density functionals.
///
/// Individual mixture components switch labels and individual spline
/// weights are nearly collinear, so raw per-component chains are reported
/// for completeness but convergence is judged on these functionals.
pub fn monitored_functionals(
    draws: &PosteriorDraws,
    basis: &SplineBasis,
    threshold: f64,
    grid_max: f64,
    chain_id: usize,
) -> Result<Vec<(String, Vec<f64>)>> {
    let states: Vec<&ParamState> = draws
        .draws()
        .iter()
        .filter(|d| d.chain_id == chain_id)
        .map(|d| &d.state)
        .collect();
    let mut out = Vec::new();
    for k in 1..=10 {
        let x = grid_max * k as f64 / 10.0;
        let series = states
            .iter()
            .map(|s| basis.beta(&s.w, x))
            .collect::<Result<Vec<f64>>>()?;
        out.push((format!("beta({x:.3})"), series));
    }
    out.push((
        "mu_at_zero".into(),
        states.iter().map(|s| s.low.mean()).collect(),
    ));
    out.push((
        "min_mu0".into(),
        states.iter().map(|s| s.low.min_mu0()).collect(),
    ));
    out.push((
        "mu_inf".into(),
        states.iter().map(|s| s.high.mu_inf()).collect(),
    ));
    out.push((
        "tau_inf".into(),
        states.iter().map(|s| s.high.tau_inf()).collect(),
    ));
    out.push((
        format!("F0({threshold})"),
        states.iter().map(|s| s.cdf_low(threshold)).collect(),
    ));
    out.push((
        format!("Finf({threshold})"),
        states.iter().map(|s| s.cdf_high(threshold)).collect(),
    ));
    Ok(out)
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
/// The sample must be sorted ascending.
pub fn ks_statistic_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let f = cdf(v);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic p-value for the one-sample KS statistic (Stephens correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_sf(lambda)
}

/// Two-sample KS test p-value using the asymptotic distribution with the
/// effective sample size.
pub fn two_sample_ks_p(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    assert!(n > 0 && m > 0);

    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let xv = xs[i];
        let yv = ys[j];
        if xv <= yv {
            i += 1;
        }
        if yv <= xv {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sn = ne.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_sf(lambda)
}

/// Kolmogorov distribution survival function Q(lambda).
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
