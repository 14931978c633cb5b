//! Monotone I-spline basis on the dose axis and the dose-response function
//! it spans.
//!
//! Each basis function is nondecreasing from 0 at dose zero to 1 at the
//! right end of the observed range, so any simplex-weighted combination is a
//! monotone dose-response curve starting at 0. The final basis member is an
//! explicit zero function on the observed range (jumping to 1 beyond it),
//! which lets the curve flatten out below 1 at high observed doses while
//! keeping the limit constraints intact.

use crate::error::{ComireError, Result};

/// Simplex weights over the spline basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaWeights(Vec<f64>);

const SIMPLEX_TOL: f64 = 1e-10;

impl BetaWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(ComireError::Invariant("weight vector is empty".into()));
        }
        if w.iter().any(|&v| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v)) {
            return Err(ComireError::Invariant(
                "weights must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(ComireError::Invariant(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Monotone I-spline basis of fixed degree on [0, dose_max].
///
/// With `m` inner knots and degree `d` the basis has `J = m + d` members:
/// `J - 1` integrated splines plus the trailing zero basis.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    degree: usize,
    inner_knots: Vec<f64>,
    dose_max: f64,
    /// Augmented knot vector with boundary multiplicity degree + 1.
    knots: Vec<f64>,
    j: usize,
}

/// Build the basis with equally spaced inner knots on (0, dose_max).
pub fn build_basis(inner_knot_count: usize, dose_max: f64, degree: usize) -> Result<SplineBasis> {
    if !(dose_max > 0.0) || !dose_max.is_finite() {
        return Err(ComireError::Config(format!(
            "dose range upper bound must be positive and finite (got {dose_max})"
        )));
    }
    if degree < 1 {
        return Err(ComireError::Config("spline degree must be at least 1".into()));
    }
    if inner_knot_count < 1 {
        return Err(ComireError::Config(
            "at least one inner knot is required".into(),
        ));
    }
    let m = inner_knot_count;
    let step = dose_max / (m + 1) as f64;
    let inner_knots: Vec<f64> = (1..=m).map(|i| step * i as f64).collect();
    SplineBasis::from_inner_knots(inner_knots, dose_max, degree)
}

impl SplineBasis {
    fn from_inner_knots(inner_knots: Vec<f64>, dose_max: f64, degree: usize) -> Result<Self> {
        for pair in inner_knots.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(ComireError::Config(
                    "inner knots must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (inner_knots.first(), inner_knots.last()) {
            if !(first > 0.0) || !(last < dose_max) {
                return Err(ComireError::Config(
                    "inner knots must lie strictly inside (0, dose_max)".into(),
                ));
            }
        }
        let mut knots = Vec::with_capacity(inner_knots.len() + 2 * (degree + 1));
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        knots.extend_from_slice(&inner_knots);
        knots.extend(std::iter::repeat_n(dose_max, degree + 1));
        let j = inner_knots.len() + degree;
        Ok(Self {
            degree,
            inner_knots,
            dose_max,
            knots,
            j,
        })
    }

    /// Number of basis functions, including the trailing zero basis.
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dose_max(&self) -> f64 {
        self.dose_max
    }

    pub fn inner_knots(&self) -> &[f64] {
        &self.inner_knots
    }

    /// Index of the zero basis (always the last position).
    pub fn zero_basis_index(&self) -> usize {
        self.j - 1
    }

    /// Evaluate all basis functions at dose `x`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.j];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a caller-provided buffer of length `j`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if !(x >= 0.0) {
            return Err(ComireError::Domain(format!(
                "dose must be nonnegative (got {x})"
            )));
        }
        assert_eq!(out.len(), self.j, "output buffer length mismatch");
        if x >= self.dose_max {
            // All integrated splines saturate at 1; the zero basis stays 0
            // through the observed range and is 1 strictly beyond it.
            for v in out[..self.j - 1].iter_mut() {
                *v = 1.0;
            }
            out[self.j - 1] = if x > self.dose_max { 1.0 } else { 0.0 };
            return Ok(());
        }

        let d = self.degree;
        let span = self.find_span(x);
        let local = self.bspline_nonzero(x, span);

        // Basis i is the suffix sum of B-splines with index > i; the only
        // nonzero B-splines at x have indices span - d ..= span.
        for (i, v) in out[..self.j - 1].iter_mut().enumerate() {
            *v = if i >= span {
                0.0
            } else if i < span - d {
                1.0
            } else {
                let start = i + 1 - (span - d);
                local[start..=d].iter().sum::<f64>().min(1.0)
            };
        }
        out[self.j - 1] = 0.0;
        Ok(())
    }

    /// Dose-response value beta(x) = w . psi(x).
    pub fn beta(&self, w: &BetaWeights, x: f64) -> Result<f64> {
        if w.len() != self.j {
            return Err(ComireError::Invariant(format!(
                "weight length {} does not match basis size {}",
                w.len(),
                self.j
            )));
        }
        let psi = self.eval(x)?;
        Ok(dot(w.as_slice(), &psi).clamp(0.0, 1.0))
    }

    /// Largest knot index `k` with t[k] <= x < t[k+1], for x in [0, dose_max).
    fn find_span(&self, x: f64) -> usize {
        let d = self.degree;
        let nb = self.inner_knots.len() + d + 1;
        let t = &self.knots;
        // Valid spans are d ..= nb - 1.
        let mut lo = d;
        let mut hi = nb - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if t[mid] <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Nonzero B-spline values at x: entry r holds B_{span-d+r}(x).
    fn bspline_nonzero(&self, x: f64, span: usize) -> Vec<f64> {
        let d = self.degree;
        let t = &self.knots;
        let mut n = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        n[0] = 1.0;
        for j in 1..=d {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        n
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Basis values precomputed at a fixed set of doses, row per observation.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    values: Vec<f64>,
    n: usize,
    j: usize,
}

impl BasisMatrix {
    /// Wrap raw row-major basis values; entries must lie in [0, 1].
    pub fn from_raw(n: usize, j: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * j || j == 0 {
            return Err(ComireError::Invariant(format!(
                "basis matrix shape mismatch: {} values for {n} x {j}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ComireError::Invariant(
                "basis values must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { values, n, j })
    }

    pub fn evaluate(basis: &SplineBasis, doses: &[f64]) -> Result<Self> {
        let j = basis.j();
        let mut values = vec![0.0; doses.len() * j];
        for (i, &x) in doses.iter().enumerate() {
            basis.eval_into(x, &mut values[i * j..(i + 1) * j])?;
        }
        Ok(Self {
            values,
            n: doses.len(),
            j,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.j..(i + 1) * self.j]
    }

    /// beta(x_i) for the given weights.
    pub fn beta(&self, i: usize, w: &BetaWeights) -> f64 {
        dot(self.row(i), w.as_slice()).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{sample_dirichlet, RngStream};

    /// Textbook recursive B-spline, used as an independent oracle.
    fn bspline_recursive(i: usize, p: usize, t: &[f64], x: f64) -> f64 {
        if p == 0 {
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + p] - t[i];
        if d1 > 0.0 {
            v += (x - t[i]) / d1 * bspline_recursive(i, p - 1, t, x);
        }
        let d2 = t[i + p + 1] - t[i + 1];
        if d2 > 0.0 {
            v += (t[i + p + 1] - x) / d2 * bspline_recursive(i + 1, p - 1, t, x);
        }
        v
    }

    fn suffix_sum_oracle(basis: &SplineBasis, i: usize, x: f64) -> f64 {
        let d = basis.degree();
        let nb = basis.inner_knots().len() + d + 1;
        (i + 1..nb)
            .map(|m| bspline_recursive(m, d, &basis.knots, x))
            .sum()
    }

    #[test]
    fn paper_configuration_has_ten_bases() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        assert_eq!(basis.j(), 10);
        assert_eq!(basis.inner_knots().len(), 7);
        assert!((basis.inner_knots()[0] - 16.5).abs() < 1e-12);
    }

    #[test]
    fn all_bases_vanish_at_zero_dose() {
        for degree in 1..=4 {
            let basis = build_basis(5, 20.0, degree).unwrap();
            for v in basis.eval(0.0).unwrap() {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn degree_one_matches_hand_integrated_m_spline() {
        // One inner knot at 0.5 on [0, 1]. The order-1 M-spline on [0, 0.5)
        // is the constant 2; its integral is the ramp min(2x, 1).
        let basis = build_basis(1, 1.0, 1).unwrap();
        assert_eq!(basis.j(), 2);
        let m_spline = |u: f64| if (0.0..0.5).contains(&u) { 2.0 } else { 0.0 };
        for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            // Trapezoid integration of the oracle density.
            let steps = 20_000;
            let h = x / steps as f64;
            let mut integral = 0.0;
            if x > 0.0 {
                for s in 0..steps {
                    let a = h * s as f64;
                    integral += 0.5 * h * (m_spline(a) + m_spline(a + h));
                }
            }
            let v = basis.eval(x).unwrap();
            assert!(
                (v[0] - integral).abs() < 1e-3,
                "x = {x}: {} vs oracle {integral}",
                v[0]
            );
            // Exact closed form of the same integral.
            assert!((v[0] - (2.0 * x).min(1.0)).abs() < 1e-12, "x = {x}");
            assert_eq!(v[1], 0.0);
        }
    }

    #[test]
    fn matches_recursive_suffix_sum_oracle() {
        for (m, degree) in [(1usize, 1usize), (1, 3), (3, 2), (7, 3)] {
            let dose_max = 10.0;
            let basis = build_basis(m, dose_max, degree).unwrap();
            for step in 0..40 {
                let x = dose_max * (step as f64 + 0.37) / 40.0;
                let v = basis.eval(x).unwrap();
                for (i, &val) in v.iter().enumerate().take(basis.j() - 1) {
                    let oracle = suffix_sum_oracle(&basis, i, x);
                    assert!(
                        (val - oracle).abs() < 1e-10,
                        "m={m} d={degree} i={i} x={x}: {val} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn midpoint_of_single_interior_knot_basis() {
        let basis = build_basis(1, 1.0, 3).unwrap();
        let x = 0.5; // the interior knot itself
        for x_probe in [x, 0.25] {
            let v = basis.eval(x_probe).unwrap();
            for (i, &val) in v.iter().enumerate().take(basis.j() - 1) {
                let oracle = suffix_sum_oracle(&basis, i, x_probe);
                assert!((val - oracle).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn componentwise_monotone_and_bounded() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let mut prev = basis.eval(0.0).unwrap();
        for step in 1..=1000 {
            let x = 140.0 * step as f64 / 1000.0;
            let cur = basis.eval(x).unwrap();
            let mut total = 0.0;
            for (j, (&p, &c)) in prev.iter().zip(&cur).enumerate() {
                assert!(c >= p - 1e-12, "basis {j} decreased at x = {x}");
                assert!((0.0..=1.0).contains(&c));
                total += c;
            }
            assert!(total <= basis.j() as f64);
            prev = cur;
        }
    }

    #[test]
    fn beta_monotone_for_random_simplex_draws() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let mut rng = RngStream::new(42, 0);
        let conc = vec![0.3; basis.j()];
        for _ in 0..100 {
            let w = BetaWeights::new(sample_dirichlet(&mut rng, &conc).unwrap()).unwrap();
            let mut prev = -1.0;
            for step in 0..=1000 {
                let x = 132.0 * step as f64 / 1000.0;
                let b = basis.beta(&w, x).unwrap();
                assert!(b >= prev - 1e-12);
                assert!((0.0..=1.0).contains(&b));
                prev = b;
            }
        }
    }

    #[test]
    fn beta_linear_in_weights() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let mut rng = RngStream::new(7, 1);
        let conc = vec![0.5; basis.j()];
        for _ in 0..20 {
            let wa = sample_dirichlet(&mut rng, &conc).unwrap();
            let wb = sample_dirichlet(&mut rng, &conc).unwrap();
            let lam = 0.3;
            let mix: Vec<f64> = wa
                .iter()
                .zip(&wb)
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            for &x in &[5.0, 33.0, 70.0, 131.0] {
                let ba = basis.beta(&BetaWeights::new(wa.clone()).unwrap(), x).unwrap();
                let bb = basis.beta(&BetaWeights::new(wb.clone()).unwrap(), x).unwrap();
                let bm = basis.beta(&BetaWeights::new(mix.clone()).unwrap(), x).unwrap();
                assert!((bm - (lam * ba + (1.0 - lam) * bb)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_mass_recovers_single_basis_and_uniform_averages() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let j = basis.j();
        let x = 0.5 * (16.5 + 33.0); // midpoint between the first two knots
        let psi = basis.eval(x).unwrap();
        for k in 0..j {
            let mut w = vec![0.0; j];
            w[k] = 1.0;
            let b = basis.beta(&BetaWeights::new(w).unwrap(), x).unwrap();
            assert!((b - psi[k]).abs() < 1e-14);
        }
        let uniform = BetaWeights::new(vec![1.0 / j as f64; j]).unwrap();
        let expect = psi.iter().sum::<f64>() / j as f64;
        assert!((basis.beta(&uniform, x).unwrap() - expect).abs() < 1e-14);

        // beta at zero dose is exactly zero for any weights.
        assert_eq!(basis.beta(&uniform, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_basis_caps_beta_below_one_on_range() {
        let basis = build_basis(7, 132.0, 3).unwrap();
        let j = basis.j();
        let mut w = vec![(1.0 - 0.3) / (j - 1) as f64; j];
        w[j - 1] = 0.3;
        let w = BetaWeights::new(w).unwrap();
        let at_max = basis.beta(&w, 132.0).unwrap();
        assert!((at_max - 0.7).abs() < 1e-12);
        // Beyond the observed range every basis saturates and beta reaches 1.
        assert!((basis.beta(&w, 200.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_construction_and_inputs() {
        assert!(build_basis(0, 10.0, 3).is_err());
        assert!(build_basis(7, 0.0, 3).is_err());
        assert!(build_basis(7, -5.0, 3).is_err());
        assert!(build_basis(7, 10.0, 0).is_err());

        let basis = build_basis(3, 10.0, 2).unwrap();
        assert!(basis.eval(-0.5).is_err());

        assert!(BetaWeights::new(vec![0.5, 0.6]).is_err());
        assert!(BetaWeights::new(vec![0.5, 0.5 + 5e-11]).is_ok());
        assert!(BetaWeights::new(vec![-0.1, 1.1]).is_err());
        let short = BetaWeights::new(vec![1.0]).unwrap();
        assert!(basis.beta(&short, 1.0).is_err());
    }

    #[test]
    fn basis_matrix_agrees_with_pointwise_eval() {
        let basis = build_basis(4, 50.0, 3).unwrap();
        let doses = [0.0, 3.5, 17.0, 49.9, 50.0, 60.0];
        let m = BasisMatrix::evaluate(&basis, &doses).unwrap();
        assert_eq!(m.n(), doses.len());
        for (i, &x) in doses.iter().enumerate() {
            assert_eq!(m.row(i), basis.eval(x).unwrap().as_slice());
        }
    }
}
