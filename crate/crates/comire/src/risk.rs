//! Quantitative risk functionals: additional risk, benchmark doses with
//! posterior uncertainty, and the total-variation path interpretation of
//! the dose-response function.

use crate::basis::SplineBasis;
use crate::error::{ComireError, Result};
use crate::gibbs::PosteriorDraws;
use crate::model::ParamState;
use crate::util::quantile_sorted;

/// Query settings for risk summaries.
#[derive(Debug, Clone)]
pub struct RiskQuery {
    /// Clinical response threshold a.
    pub threshold: f64,
    /// Benchmark risk level in (0, 1).
    pub q: f64,
    /// Strictly increasing nonnegative dose grid.
    pub dose_grid: Vec<f64>,
}

impl RiskQuery {
    pub fn new(threshold: f64, q: f64, dose_grid: Vec<f64>) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(ComireError::Usage(format!(
                "benchmark risk must lie in (0, 1) (got {q})"
            )));
        }
        if dose_grid.is_empty() {
            return Err(ComireError::Usage("dose grid is empty".into()));
        }
        if dose_grid[0] < 0.0 {
            return Err(ComireError::Usage("dose grid must be nonnegative".into()));
        }
        for pair in dose_grid.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(ComireError::Usage(
                    "dose grid must be strictly increasing".into(),
                ));
            }
        }
        if !threshold.is_finite() {
            return Err(ComireError::Usage("threshold must be finite".into()));
        }
        Ok(Self {
            threshold,
            q,
            dose_grid,
        })
    }
}

/// Additional risk R_A(x, a) = beta(x) {F_inf(a) - F_0(a)}.
pub fn additional_risk(state: &ParamState, basis: &SplineBasis, x: f64, a: f64) -> Result<f64> {
    let beta = basis.beta(&state.w, x)?;
    Ok(beta * (state.cdf_high(a) - state.cdf_low(a)))
}

/// Additional risk at arbitrarily high dose, F_inf(a) - F_0(a).
pub fn limit_additional_risk(state: &ParamState, a: f64) -> f64 {
    state.cdf_high(a) - state.cdf_low(a)
}

/// Benchmark dose: the smallest dose with beta(x) >= q / R_A(inf, a),
/// located by bisection to an absolute tolerance of 1e-6 dose units.
///
/// Returns `None` when the required level exceeds the dose-response
/// function over the search interval.
pub fn bmd(
    state: &ParamState,
    basis: &SplineBasis,
    q: f64,
    a: f64,
    search_interval: (f64, f64),
) -> Result<Option<f64>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ComireError::Usage(format!(
            "benchmark risk must lie in (0, 1) (got {q})"
        )));
    }
    let limit = limit_additional_risk(state, a);
    if !(limit > 0.0) {
        return Err(ComireError::Degenerate(format!(
            "limiting additional risk is nonpositive ({limit}) at threshold {a}"
        )));
    }
    let target = q / limit;
    let beta = |x: f64| basis.beta(&state.w, x);
    solve_monotone_crossing(beta, target, search_interval)
}

/// Smallest crossing of a nondecreasing function with `target` on the
/// interval, by bisection to 1e-6 absolute tolerance.
pub(crate) fn solve_monotone_crossing(
    f: impl Fn(f64) -> Result<f64>,
    target: f64,
    (lo0, hi0): (f64, f64),
) -> Result<Option<f64>> {
    if !(lo0 < hi0) || lo0 < 0.0 {
        return Err(ComireError::Usage(format!(
            "search interval must satisfy 0 <= lo < hi (got [{lo0}, {hi0}])"
        )));
    }
    if f(lo0)? >= target {
        return Ok(Some(lo0));
    }
    if f(hi0)? < target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo0, hi0);
    // Invariant: f(lo) < target <= f(hi).
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Pointwise posterior summary of the additional risk curve.
#[derive(Debug, Clone)]
pub struct RiskCurvePoint {
    pub x: f64,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
}

/// Posterior mean and central 95% band of R_A(x, a) on the query grid.
pub fn posterior_risk_curve(
    draws: &PosteriorDraws,
    basis: &SplineBasis,
    query: &RiskQuery,
) -> Result<Vec<RiskCurvePoint>> {
    if draws.is_empty() {
        return Err(ComireError::Usage("no posterior draws supplied".into()));
    }
    let mut out = Vec::with_capacity(query.dose_grid.len());
    let mut values = vec![0.0; draws.len()];
    for &x in &query.dose_grid {
        for (k, state) in draws.states().enumerate() {
            values[k] = additional_risk(state, basis, x, query.threshold)?;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(RiskCurvePoint {
            x,
            mean,
            lo95: quantile_sorted(&sorted, 0.025),
            hi95: quantile_sorted(&sorted, 0.975),
        });
    }
    Ok(out)
}

/// Posterior summary of the benchmark dose at one risk level.
#[derive(Debug, Clone)]
pub struct BmdSummary {
    pub q: f64,
    /// Benchmark doses from the draws that admit one, in draw order.
    pub samples: Vec<f64>,
    /// Draws whose dose-response never reaches the required level.
    pub unattained: usize,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// Conservative benchmark dose: the 5% posterior quantile.
    pub bmdl: f64,
}

/// Apply [`bmd`] to every retained draw and summarize the posterior.
pub fn posterior_bmd(
    draws: &PosteriorDraws,
    basis: &SplineBasis,
    q: f64,
    a: f64,
    search_interval: (f64, f64),
) -> Result<BmdSummary> {
    if draws.is_empty() {
        return Err(ComireError::Usage("no posterior draws supplied".into()));
    }
    let mut samples = Vec::with_capacity(draws.len());
    let mut unattained = 0usize;
    for state in draws.states() {
        match bmd(state, basis, q, a, search_interval)? {
            Some(d) => samples.push(d),
            None => unattained += 1,
        }
    }
    if samples.is_empty() {
        return Err(ComireError::Degenerate(format!(
            "no draw attains benchmark risk {q} on the search interval"
        )));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut sorted = samples.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(BmdSummary {
        q,
        mean,
        lo95: quantile_sorted(&sorted, 0.025),
        hi95: quantile_sorted(&sorted, 0.975),
        bmdl: quantile_sorted(&sorted, 0.05),
        unattained,
        samples,
    })
}

/// Adaptive-quadrature settings for the total-variation ratio.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    /// Absolute tolerance per integral.
    pub tol: f64,
    pub max_depth: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_depth: 40,
        }
    }
}

/// Fraction of the total-variation path from F_0 toward F_inf covered at
/// dose x: d_TV(F_x, F_0) / d_TV(F_inf, F_0), computed by adaptive Simpson
/// quadrature of the two density differences.
pub fn tv_ratio(
    state: &ParamState,
    basis: &SplineBasis,
    x: f64,
    quadrature: &QuadratureSettings,
) -> Result<f64> {
    let (lo, hi) = integration_support(state);
    let beta = basis.beta(&state.w, x)?;
    let numer = adaptive_simpson(
        &|y| {
            let fx = (1.0 - beta) * state.density_low(y) + beta * state.density_high(y);
            (fx - state.density_low(y)).abs()
        },
        lo,
        hi,
        quadrature,
    );
    let denom = adaptive_simpson(
        &|y| (state.density_high(y) - state.density_low(y)).abs(),
        lo,
        hi,
        quadrature,
    );
    if !(denom > 1e-12) {
        return Err(ComireError::Degenerate(
            "extremal densities coincide; the path ratio is undefined".into(),
        ));
    }
    Ok(numer / denom)
}

/// Integration support wide enough to capture all Gaussian mass:
/// [min mean - 10 max sd, max mean + 10 max sd].
fn integration_support(state: &ParamState) -> (f64, f64) {
    let mut mu_min = state.high.mu_inf();
    let mut mu_max = state.high.mu_inf();
    let mut sd_max = 1.0 / state.high.tau_inf().sqrt();
    for (&mu, &tau) in state.low.mu0().iter().zip(state.low.tau0()) {
        mu_min = mu_min.min(mu);
        mu_max = mu_max.max(mu);
        sd_max = sd_max.max(1.0 / tau.sqrt());
    }
    (mu_min - 10.0 * sd_max, mu_max + 10.0 * sd_max)
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    settings: &QuadratureSettings,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    simpson_recurse(
        f,
        lo,
        hi,
        flo,
        fmid,
        fhi,
        whole,
        settings.tol,
        settings.max_depth,
    )
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lmid = 0.5 * (lo + mid);
    let rmid = 0.5 * (mid + hi);
    let (fl, fr) = (f(lmid), f(rmid));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_recurse(f, lo, mid, flo, fl, fmid, left, 0.5 * tol, depth - 1)
        + simpson_recurse(f, mid, hi, fmid, fr, fhi, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BetaWeights};
    use crate::gibbs::{PosteriorDraws, RetainedDraw};
    use crate::model::{ExtremalHigh, ExtremalLow};
    use crate::samplers::{sample_dirichlet, std_normal_cdf, RngStream};
    use statrs::function::gamma::gamma_lr;

    fn scenario1_state(w: Vec<f64>) -> ParamState {
        let low = ExtremalLow::new(
            vec![0.05, 0.15, 0.80],
            vec![37.0, 39.0, 40.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let high = ExtremalHigh::new(36.0, 1.0).unwrap();
        ParamState::new(low, high, BetaWeights::new(w).unwrap()).unwrap()
    }

    fn random_state(rng: &mut RngStream, j: usize) -> ParamState {
        let h = 3;
        let nu0 = sample_dirichlet(rng, &vec![1.0; h]).unwrap();
        let mu0: Vec<f64> = (0..h).map(|_| 38.0 + 2.0 * rng.uniform_open()).collect();
        let tau0: Vec<f64> = (0..h).map(|_| 0.5 + rng.uniform_open()).collect();
        let mu_inf = 35.0 + rng.uniform_open();
        let tau_inf = 0.5 + rng.uniform_open();
        let w = sample_dirichlet(rng, &vec![0.7; j]).unwrap();
        ParamState::new(
            ExtremalLow::new(nu0, mu0, tau0).unwrap(),
            ExtremalHigh::new(mu_inf, tau_inf).unwrap(),
            BetaWeights::new(w).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn additional_risk_is_zero_at_dose_zero_and_linear_in_beta() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let j = basis.j();
        let mut rng = RngStream::new(1, 0);
        let state = random_state(&mut rng, j);
        assert_eq!(additional_risk(&state, &basis, 0.0, 37.0).unwrap(), 0.0);

        // Frozen from the mixture CDF oracle: F_inf(37) - F_0(37) for the
        // Scenario-1 parameters.
        let mut w = vec![0.0; j];
        w[0] = 1.0;
        let state = scenario1_state(w);
        let full = additional_risk(&state, &basis, 132.0, 37.0).unwrap();
        let oracle = std_normal_cdf(1.0)
            - (0.05 * std_normal_cdf(0.0)
                + 0.15 * std_normal_cdf(-2.0)
                + 0.80 * std_normal_cdf(-3.0));
        assert!((oracle - 0.8118523078510119).abs() < 1e-12);
        assert!((full - oracle).abs() < 1e-12);

        // Halving beta halves the risk: the ramp basis reaches 0.5 midway.
        let basis = build_basis(1, 1.0, 1).unwrap();
        let state = scenario1_state(vec![1.0, 0.0]);
        let half = additional_risk(&state, &basis, 0.25, 37.0).unwrap();
        let full = additional_risk(&state, &basis, 1.0, 37.0).unwrap();
        assert!((half - 0.5 * full).abs() < 1e-12);
    }

    #[test]
    fn risk_equals_cdf_difference_identity() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..50 {
            let state = random_state(&mut rng, basis.j());
            for &x in &[3.0, 21.0, 55.0, 110.0] {
                let a = 37.0;
                let direct = additional_risk(&state, &basis, x, a).unwrap();
                let via_cdf = state.conditional_cdf(&basis, x, a).unwrap()
                    - state.conditional_cdf(&basis, 0.0, a).unwrap();
                assert!((direct - via_cdf).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bmd_degenerate_levels() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let j = basis.j();
        let mut w = vec![0.0; j];
        w[0] = 1.0;
        let state = scenario1_state(w);

        // Vanishing benchmark risk pushes the dose to zero.
        let d = bmd(&state, &basis, 1e-12, 37.0, (0.0, 132.0)).unwrap().unwrap();
        assert!(d < 1e-3, "bmd = {d}");

        // Unattainable risk: q >= R_A(inf, a) with beta capped at 1.
        let q = limit_additional_risk(&state, 37.0) + 0.01;
        assert!(bmd(&state, &basis, q.min(0.99), 37.0, (0.0, 132.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn bmd_solver_matches_gamma_quantile_oracle() {
        // The Scenario-1 truth has beta equal to a gamma CDF (shape 6,
        // rate 0.1); the solver must recover its quantile at
        // q / R_A(inf, 37) = 0.1 / 0.8118523078510119.
        let target = 0.1 / 0.8118523078510119;
        let gamma_cdf = |x: f64| if x <= 0.0 { 0.0 } else { gamma_lr(6.0, 0.1 * x) };

        // Independent fine bisection as the oracle.
        let (mut lo, mut hi) = (0.0, 500.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_cdf(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);

        let solved = solve_monotone_crossing(|x| Ok(gamma_cdf(x)), target, (0.0, 500.0))
            .unwrap()
            .unwrap();
        assert!((solved - oracle).abs() < 1e-5, "{solved} vs {oracle}");
        // Frozen oracle value for reference elsewhere.
        assert!((oracle - 33.4968091).abs() < 1e-4);
    }

    #[test]
    fn bmd_monotone_in_q_and_round_trip() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..20 {
            let state = random_state(&mut rng, basis.j());
            let limit = limit_additional_risk(&state, 37.0);
            let mut prev = 0.0;
            for &q in &[0.01, 0.05, 0.10, 0.20] {
                if q / limit >= 1.0 {
                    continue;
                }
                if let Some(d) = bmd(&state, &basis, q, 37.0, (0.0, 132.0)).unwrap() {
                    assert!(d >= prev - 1e-9, "bmd not monotone in q");
                    prev = d;
                    let beta = basis.beta(&state.w, d).unwrap();
                    // The crossing is exact up to the dose tolerance when
                    // the target is attained in the interior.
                    if d > 1e-5 && d < 131.0 {
                        assert!(
                            (beta - q / limit).abs() < 1e-5,
                            "round trip: beta({d}) = {beta} vs {}",
                            q / limit
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn posterior_curve_and_bmd_summaries() {
        let basis = build_basis(1, 1.0, 1).unwrap();
        let s1 = scenario1_state(vec![1.0, 0.0]);
        let s2 = scenario1_state(vec![0.5, 0.5]);

        let single = PosteriorDraws::from_draws(
            vec![RetainedDraw {
                chain_id: 0,
                iteration: 1,
                state: s1.clone(),
            }],
            3,
            2,
        );
        let query = RiskQuery::new(37.0, 0.1, vec![0.1, 0.25, 0.5, 0.9]).unwrap();
        let curve = posterior_risk_curve(&single, &basis, &query).unwrap();
        for p in &curve {
            let v = additional_risk(&s1, &basis, p.x, 37.0).unwrap();
            assert_eq!(p.mean, v);
            assert_eq!(p.lo95, v);
            assert_eq!(p.hi95, v);
        }

        let two = PosteriorDraws::from_draws(
            vec![
                RetainedDraw {
                    chain_id: 0,
                    iteration: 1,
                    state: s1.clone(),
                },
                RetainedDraw {
                    chain_id: 0,
                    iteration: 2,
                    state: s2.clone(),
                },
            ],
            3,
            2,
        );
        let curve2 = posterior_risk_curve(&two, &basis, &query).unwrap();
        for p in &curve2 {
            let a = additional_risk(&s1, &basis, p.x, 37.0).unwrap();
            let b = additional_risk(&s2, &basis, p.x, 37.0).unwrap();
            assert!((p.mean - 0.5 * (a + b)).abs() < 1e-15);
        }

        // Identical draws collapse the interval onto the common value.
        let same = PosteriorDraws::from_draws(
            (0..10)
                .map(|k| RetainedDraw {
                    chain_id: 0,
                    iteration: k,
                    state: s1.clone(),
                })
                .collect(),
            3,
            2,
        );
        let summary = posterior_bmd(&same, &basis, 0.1, 37.0, (0.0, 1.0)).unwrap();
        assert!(summary.hi95 - summary.lo95 < 1e-9);
        assert!((summary.bmdl - summary.mean).abs() < 1e-9);
        assert_eq!(summary.unattained, 0);

        // A risk level beyond the attainable range fails for every draw.
        assert!(posterior_bmd(&same, &basis, 0.9, 37.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn bmdl_uses_interpolated_quantile() {
        // Synthetic benchmark doses 1..=100 give a 5% quantile of 5.95.
        let sorted: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!((quantile_sorted(&sorted, 0.05) - 5.95).abs() < 1e-12);
    }

    #[test]
    fn tv_ratio_recovers_beta() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let settings = QuadratureSettings::default();
        let mut rng = RngStream::new(4, 0);
        let state = random_state(&mut rng, basis.j());
        assert_eq!(tv_ratio(&state, &basis, 0.0, &settings).unwrap(), 0.0);
        for &x in &[10.0, 40.0, 90.0, 132.0] {
            let beta = basis.beta(&state.w, x).unwrap();
            let ratio = tv_ratio(&state, &basis, x, &settings).unwrap();
            assert!((ratio - beta).abs() < 1e-6, "x = {x}: {ratio} vs {beta}");
        }
    }

    #[test]
    fn tv_ratio_rejects_coincident_extremals() {
        let basis = build_basis(1, 1.0, 1).unwrap();
        // Nearly coincident: single component just above mu_inf with equal
        // precision; total variation distance collapses.
        let low = ExtremalLow::new(vec![1.0], vec![36.0 + 1e-9], vec![1.0]).unwrap();
        let high = ExtremalHigh::new(36.0, 1.0).unwrap();
        let state = ParamState::new(low, high, BetaWeights::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert!(tv_ratio(&state, &basis, 0.5, &QuadratureSettings::default()).is_err());
    }
}
