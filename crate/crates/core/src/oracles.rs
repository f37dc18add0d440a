//! Independent reference values: closed-form Gaussian risk measures and the
//! exact empirical AVaR of a finite sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
            return Err(Error::arg(format!(
                "gaussian needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn standard() -> Self {
        Self {
            mu: 0.0,
            sigma: 1.0,
        }
    }
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("risk level u={u} not in (0,1)")))
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Inverse of the standard normal CDF.
///
/// Wichura's algorithm AS 241 (PPND16): three rational approximations of
/// degree 7, accurate to about 1e-16 relative over `(0, 1)`.
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// `mu + sigma * phi(Phi^{-1}(u)) / (1 - u)`.
pub fn gaussian_avar(spec: GaussianSpec, u: f64) -> Result<f64> {
    check_level(u)?;
    let z = inverse_normal_cdf(u);
    Ok(spec.mu + spec.sigma * normal_pdf(z) / (1.0 - u))
}

/// `mu + sigma * Phi^{-1}(u)`.
pub fn gaussian_var(spec: GaussianSpec, u: f64) -> Result<f64> {
    check_level(u)?;
    Ok(spec.mu + spec.sigma * inverse_normal_cdf(u))
}

/// Exact minimum over `q` of `q + mean((x - q)^+) / (1 - u)`.
///
/// The objective is convex and piecewise linear with breakpoints at the
/// samples, so the minimum is attained at one of them; all are scanned with
/// suffix sums. `u = 0` is allowed and gives the sample mean.
pub fn empirical_avar(samples: &[f64], u: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::arg("empirical AVaR of an empty sample"));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::arg(format!("risk level u={u} not in [0,1)")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("samples must be finite"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let scale = 1.0 / ((1.0 - u) * n as f64);
    let mut best = f64::INFINITY;
    // above = sum of x[j+1..]
    let mut above = 0.0;
    for j in (0..n).rev() {
        let q = x[j];
        let excess = above - (n - 1 - j) as f64 * q;
        best = best.min(q + excess * scale);
        above += q;
    }
    Ok(best)
}

/// Reference value `1 + sqrt(-2 ln(2 (1 - u)))` for the entropic VaR of a
/// Gaussian with mean 1 and variance 2, as used to score EVaR runs.
///
/// Note that this is smaller than `gaussian_avar(N(1, 2), u)` for `u` near 1,
/// see [`gaussian_evar_entropic`] for the Kullback-Leibler form.
pub fn gaussian_evar_reference(u: f64) -> Result<f64> {
    let arg = (1.0 - u) * 2.0;
    if !(u < 1.0 && arg < 1.0) {
        return Err(Error::Domain(format!(
            "reference EVaR needs 1/2 < u < 1, got u={u}"
        )));
    }
    Ok(1.0 + (-2.0 * arg.ln()).sqrt())
}

/// `mu + sigma * sqrt(-2 ln(1 - u))`: the entropic VaR of a Gaussian under
/// a relative-entropy budget `ln(1/(1-u))`, the `q -> 1` limit of the
/// Renyi-constrained measure.
pub fn gaussian_evar_entropic(spec: GaussianSpec, u: f64) -> Result<f64> {
    check_level(u)?;
    Ok(spec.mu + spec.sigma * (-2.0 * (1.0 - u).ln()).sqrt())
}
