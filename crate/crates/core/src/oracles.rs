//! Closed forms for the simple random walk and left-continuous walks, plus
//! the Gaussian limit laws that the exact computations converge to.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{binom_half, erf, erfc};
use crate::steplaw::{Pmf, StepLaw};

/// P(S(n) = k) for the simple symmetric walk.
pub fn ssrw_pmf(n: u64, k: i64) -> f64 {
    if k.unsigned_abs() > n || (n as i64 + k) % 2 != 0 {
        return 0.0;
    }
    binom_half(n, ((n as i64 + k) / 2) as u64)
}

pub fn ssrw_pmf_exact(n: u64, k: i64) -> BigRational {
    if k.unsigned_abs() > n || (n as i64 + k) % 2 != 0 {
        return BigRational::zero();
    }
    let j = ((n as i64 + k) / 2) as u64;
    let mut c = BigInt::one();
    for i in 0..j {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::new(c, BigInt::one() << n)
}

/// Reflection: P(x + S(n) = y, tau_x > n) = P(S(n) = y - x) - P(S(n) = y + x).
pub fn simple_refl_pmf(x: i64, y: i64, n: u64) -> f64 {
    ssrw_pmf(n, y - x) - ssrw_pmf(n, y + x)
}

pub fn simple_refl_pmf_exact(x: i64, y: i64, n: u64) -> BigRational {
    ssrw_pmf_exact(n, y - x) - ssrw_pmf_exact(n, y + x)
}

/// P(x + S(n) >= y, tau_x > n) = P(S(n) in [y - x, y + x)).
pub fn simple_refl_tail(x: i64, y: i64, n: u64) -> f64 {
    let lo = (y - x).max(-(n as i64));
    let hi = (y + x).min(n as i64 + 1);
    (lo..hi).map(|k| ssrw_pmf(n, k)).sum()
}

/// P(tau_1 = 2k + 1) = C(2k, k) / (k + 1) * 2^{-2k-1}.
pub fn simple_tau1_pmf(k: u64) -> f64 {
    binom_half(2 * k, k) / (2.0 * (k + 1) as f64)
}

/// P(tau_0 > 2k) = P(tau_0 > 2k + 1) = C(2k, k) 2^{-2k-1}, and 1 at k = 0.
pub fn simple_tau0_survival(k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        0.5 * binom_half(2 * k, k)
    }
}

fn require_left_continuous(law: &StepLaw) -> Result<Vec<(i64, f64)>> {
    let atoms = law.int_atoms()?;
    if atoms[0].0 < -1 {
        return Err(Error::NotLeftContinuous(atoms[0].0));
    }
    Ok(atoms)
}

/// Hitting-time theorem: P(tau_x = n) = (x / n) P(S(n) = -x).
pub fn hitting_time_pmf(law: &StepLaw, x: i64, n: u64) -> Result<f64> {
    let atoms = require_left_continuous(law)?;
    if x < 1 || n < 1 {
        return Err(Error::InvalidArgument("need x, n >= 1".into()));
    }
    let mut p = Pmf::delta(0);
    for _ in 0..n {
        p = p.convolve_atoms(&atoms);
    }
    Ok(x as f64 / n as f64 * p.at(-x))
}

/// The same for n = 0..=n_max in one sweep (entry 0 is 0).
pub fn hitting_time_series(law: &StepLaw, x: i64, n_max: u64) -> Result<Vec<f64>> {
    let atoms = require_left_continuous(law)?;
    let mut out = vec![0.0];
    let mut p = Pmf::delta(0);
    for n in 1..=n_max {
        p = p.convolve_atoms(&atoms);
        out.push(x as f64 / n as f64 * p.at(-x));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    FixedXTail,
    ScaledXCrossing,
    Rayleigh,
    MeanderSquare,
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticPrediction {
    pub value: f64,
    pub regime: Regime,
}

/// P(tau_x > n) ~ (x / sigma) sqrt(2/pi) n^{-1/2}.
pub fn tail_predictor(x: f64, sigma: f64, n: u64) -> AsymptoticPrediction {
    AsymptoticPrediction { value: x / sigma * FRAC_2_PI.sqrt() / (n as f64).sqrt(), regime: Regime::FixedXTail }
}

/// sqrt(2/pi) * int_0^v exp(-u^2/2) du.
pub fn crossing_predictor(v: f64) -> AsymptoticPrediction {
    AsymptoticPrediction { value: erf(v / SQRT_2), regime: Regime::ScaledXCrossing }
}

/// Meander endpoint: P(V > v) = exp(-v^2/2).
pub fn rayleigh_tail(v: f64) -> AsymptoticPrediction {
    AsymptoticPrediction { value: (-0.5 * v.max(0.0).powi(2)).exp(), regime: Regime::Rayleigh }
}

pub fn rayleigh_cdf(v: f64) -> f64 {
    1.0 - rayleigh_tail(v).value
}

pub fn meander_square_density(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    FRAC_2_PI.sqrt() * u * u * (-0.5 * u * u).exp()
}

/// sqrt(2/pi) int_v^inf u^2 exp(-u^2/2) du = sqrt(2/pi) v e^{-v^2/2} + erfc(v/sqrt 2).
pub fn meander_square_tail(v: f64) -> AsymptoticPrediction {
    let v = v.max(0.0);
    let value = FRAC_2_PI.sqrt() * v * (-0.5 * v * v).exp() + erfc(v / SQRT_2);
    AsymptoticPrediction { value, regime: Regime::MeanderSquare }
}

pub fn meander_square_cdf(v: f64) -> f64 {
    1.0 - meander_square_tail(v).value
}

/// Unconditional local CLT density for the simple walk (period 2).
pub fn local_predictor(n: u64, z: f64) -> AsymptoticPrediction {
    let nf = n as f64;
    AsymptoticPrediction { value: 2.0 / (2.0 * PI * nf).sqrt() * (-z * z / (2.0 * nf)).exp(), regime: Regime::Local }
}

/// Simple walk conditioned to stay positive: (p_up, p_down) at x >= 1.
pub fn doob_kernel_simple(x: i64) -> Result<(f64, f64)> {
    if x < 1 {
        return Err(Error::InvalidArgument(format!("state {x} <= 0")));
    }
    let xf = x as f64;
    Ok(((xf + 1.0) / (2.0 * xf), (xf - 1.0) / (2.0 * xf)))
}
