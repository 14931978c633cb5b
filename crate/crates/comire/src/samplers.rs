//! Random-variate primitives and Gaussian special functions used by the
//! Gibbs sampler and the risk functionals.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{ComireError, Result};

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// The same pair always reproduces the same variate sequence; distinct
/// stream ids give independent streams, so parallel chains never share
/// generator state.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 && u < 1.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Standard normal density at `z`.
pub fn std_normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function, Phi(z) = 0.5 erfc(-z / sqrt 2),
/// accurate to full double precision.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function by Cody's rational Chebyshev approximation.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        // Rational approximation scaled by exp(-y^2).
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        exp_scaled(y) * (num + C[7]) / (den + D[7])
    } else if y < 26.543 {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242,
            1.87295284992346047,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const INV_SQRT_PI: f64 = 5.641_895_835_477_563e-1;
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        exp_scaled(y) * (INV_SQRT_PI - r) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// erf on |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// exp(-y^2) split to avoid cancellation (Cody's trick).
fn exp_scaled(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Inverse of [`std_normal_cdf`] for p in (0, 1), by the rational
/// approximation of Wichura's algorithm AS 241 (double precision).
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_132e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Dirichlet draw via normalized gamma variates.
pub fn sample_dirichlet(rng: &mut RngStream, concentration: &[f64]) -> Result<Vec<f64>> {
    if concentration.is_empty() {
        return Err(ComireError::Domain(
            "dirichlet concentration vector is empty".into(),
        ));
    }
    if concentration.iter().any(|&a| !(a > 0.0)) {
        return Err(ComireError::Domain(
            "dirichlet concentration entries must be positive".into(),
        ));
    }
    if concentration.len() == 1 {
        return Ok(vec![1.0]);
    }
    // Shape < 1 draws can underflow to zero; retry the rare all-zero event.
    for _ in 0..100 {
        let draws: Vec<f64> = concentration
            .iter()
            .map(|&a| {
                let g = Gamma::new(a, 1.0).expect("validated shape");
                g.sample(&mut rng.rng)
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return Ok(draws.into_iter().map(|g| g / total).collect());
        }
    }
    Err(ComireError::Numerical(
        "dirichlet sampling underflowed for all components".into(),
    ))
}

/// Gamma draw parameterized by shape and rate.
pub fn sample_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(ComireError::Domain(format!(
            "gamma parameters must be positive (shape {shape}, rate {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| ComireError::Domain(format!("gamma parameters rejected: {e}")))?;
    Ok(g.sample(&mut rng.rng))
}

/// Index draw proportional to (unnormalized) nonnegative weights.
pub fn sample_categorical(rng: &mut RngStream, weights: &[f64]) -> Result<usize> {
    if weights.is_empty() {
        return Err(ComireError::Domain("categorical weights are empty".into()));
    }
    let mut total = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) {
            return Err(ComireError::Domain(format!(
                "categorical weight {k} is negative or NaN ({w})"
            )));
        }
        total += w;
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(ComireError::Domain(
            "categorical weights have no positive mass".into(),
        ));
    }
    let target = rng.uniform_open() * total;
    let mut cum = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        cum += w;
        if target <= cum {
            return Ok(k);
        }
    }
    // Floating-point slack at the right edge.
    Ok(weights.len() - 1)
}

/// Where the truncation region is considered a deep tail, in standard deviations.
const TAIL_THRESHOLD: f64 = 5.0;

/// Truncated Gaussian draw on the open interval (lower, upper).
///
/// Wide regions use inverse-CDF sampling; regions lying more than five
/// standard deviations into a tail use exponential tail rejection, which
/// stays exact where the CDF saturates in double precision.
pub fn sample_truncated_normal(
    rng: &mut RngStream,
    mean: f64,
    variance: f64,
    lower: f64,
    upper: f64,
) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(ComireError::Domain(format!(
            "truncated normal variance must be positive ({variance})"
        )));
    }
    if !(lower < upper) {
        return Err(ComireError::Domain(format!(
            "truncated normal bounds must satisfy lower < upper ({lower} >= {upper})"
        )));
    }
    let sd = variance.sqrt();
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;

    let z = if a >= TAIL_THRESHOLD {
        sample_tail(rng, a, b)?
    } else if b <= -TAIL_THRESHOLD {
        -sample_tail(rng, -b, -a)?
    } else {
        let pa = if a == f64::NEG_INFINITY {
            0.0
        } else {
            std_normal_cdf(a)
        };
        let pb = if b == f64::INFINITY {
            1.0
        } else {
            std_normal_cdf(b)
        };
        if pb - pa < 1e-300 {
            return Err(ComireError::Numerical(format!(
                "truncation region ({lower}, {upper}) has mass below 1e-300 \
                 for N({mean}, {variance})"
            )));
        }
        loop {
            let u = pa + (pb - pa) * rng.uniform_open();
            if u > 0.0 && u < 1.0 {
                let z = std_normal_quantile(u);
                if z > a && z < b {
                    break z;
                }
            }
        }
    };
    let x = mean + sd * z;
    // Rounding can land exactly on a bound; nudge strictly inside.
    if x <= lower {
        return Ok(f64::min(lower + (upper - lower) * 1e-12, upper));
    }
    if x >= upper {
        return Ok(f64::max(upper - (upper - lower) * 1e-12, lower));
    }
    Ok(x)
}

/// Exponential-proposal rejection for the standard normal restricted to
/// (a, b) with a >= TAIL_THRESHOLD (Robert's method).
fn sample_tail(rng: &mut RngStream, a: f64, b: f64) -> Result<f64> {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..100_000 {
        let z = a - (1.0 - rng.uniform_open()).ln() / lambda;
        if z >= b {
            continue;
        }
        let log_accept = -0.5 * (z - lambda) * (z - lambda);
        if rng.uniform_open().ln() <= log_accept {
            return Ok(z);
        }
    }
    Err(ComireError::Numerical(format!(
        "tail rejection failed to accept in ({a}, {b}); region too narrow"
    )))
}
