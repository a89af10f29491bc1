//! Monte Carlo check of the photon-counting statistics.
//!
//! Shots draw `N0 ~ Poisson(n0)` and `N1 ~ Poisson(n1)` independently and
//! compare the empirical moments of `Δ = N0 − N1` with the exact Skellam
//! moments. Estimator batches pool `m` shots of the state
//! `r|g,0⟩ + (1−r)|g,±1⟩` (Poisson with mean `r·n0 + (1−r)·n1`) and measure
//! the spread of the spin-fraction estimate.
//!
//! Work is split into fixed chunks, each with its own generator seeded from a
//! SplitMix64 stream of the master seed, so the report does not depend on the
//! number of threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kinetics::{photon_counts, RateParams};
use crate::readout::{estimator_std_error, mle_estimate, snr};

pub const RNG_ALGORITHM: &str = "xoshiro256++/splitmix64-seeded";
pub const POISSON_ALGORITHM: &str = "inversion(lambda<30)/ptrs(lambda>=30)";

/// Mean below which Poisson variates are drawn by sequential inversion.
pub const INVERSION_LIMIT: f64 = 30.0;

const CHUNK_SHOTS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonMethod {
    Inversion,
    /// Hörmann's transformed rejection with squeeze.
    Ptrs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSampler {
    lambda: f64,
    method: PoissonMethod,
    exp_neg_lambda: f64,
    // PTRS constants
    loglam: f64,
    a: f64,
    b: f64,
    inv_alpha: f64,
    v_r: f64,
}

impl PoissonSampler {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::arg(
                "lambda",
                format!("Poisson mean must be finite and >= 0, got {lambda}"),
            ));
        }
        let method = if lambda < INVERSION_LIMIT {
            PoissonMethod::Inversion
        } else {
            PoissonMethod::Ptrs
        };
        let slam = lambda.sqrt();
        let b = 0.931 + 2.53 * slam;
        Ok(Self {
            lambda,
            method,
            exp_neg_lambda: (-lambda).exp(),
            loglam: lambda.ln(),
            a: -0.059 + 0.024_83 * b,
            b,
            inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
            v_r: 0.9277 - 3.6224 / (b - 2.0),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn method(&self) -> PoissonMethod {
        self.method
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        match self.method {
            PoissonMethod::Inversion => self.sample_inversion(rng),
            PoissonMethod::Ptrs => self.sample_ptrs(rng),
        }
    }

    fn sample_inversion<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = self.exp_neg_lambda;
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= self.lambda / k as f64;
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        k
    }

    fn sample_ptrs<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * self.a / us + self.b) * u + self.lambda + 0.43).floor();
            if us >= 0.07 && v <= self.v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + self.inv_alpha.ln() - (self.a / (us * us) + self.b).ln();
            let rhs = -self.lambda + k * self.loglam - ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    /// Shots used for the Skellam moment check.
    pub shots: u64,
    /// `m_s = 0` fraction of the state used for estimator batches.
    pub true_r: f64,
    pub params: RateParams<f64>,
    pub t_read: f64,
    /// Number of estimator batches; 0 skips the estimator check.
    pub batches: usize,
    /// Repetitions pooled per estimate (`m`).
    pub batch_shots: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: 0x0005_eed0_fa11_5eed,
            shots: 1_000_000,
            true_r: 0.5,
            params: RateParams::typical(),
            t_read: 1.0,
            batches: 100,
            batch_shots: 10_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::arg("shots", "need at least one shot"));
        }
        if !(0.0..=1.0).contains(&self.true_r) {
            return Err(Error::arg(
                "true_r",
                format!("must lie in [0, 1], got {}", self.true_r),
            ));
        }
        if self.batches > 0 && self.batch_shots == 0 {
            return Err(Error::arg(
                "batch_shots",
                "need at least one shot per batch",
            ));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rng_algorithm: String,
    pub poisson_algorithm: String,
    pub seed: u64,
    pub shots: u64,
    pub t_read: f64,
    pub n0: f64,
    pub n1: f64,
    pub delta_mean: f64,
    pub delta_var: f64,
    pub delta_mean_exact: f64,
    pub delta_var_exact: f64,
    pub z_delta_mean: f64,
    pub z_delta_var: f64,
    pub snr: f64,
    pub snr_exact: f64,
    pub z_snr: f64,
    pub true_r: f64,
    pub batches: usize,
    pub batch_shots: u64,
    pub r_hat_mean: Option<f64>,
    pub r_hat_std: Option<f64>,
    /// Closed-form standard error at `true_r`.
    pub r_std_error: Option<f64>,
    /// `r_hat_std / r_std_error`.
    pub r_std_ratio: Option<f64>,
    pub z_r_hat_mean: Option<f64>,
}

/// Streaming mean/variance (Welford), mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// Standard deviation of the plug-in SNR `mean/sd` of `shots` Skellam draws
/// (delta method with third cumulant `n0 − n1` and fourth cumulant `n0 + n1`).
pub fn empirical_snr_std(n0: f64, n1: f64, shots: u64) -> f64 {
    let mu = n0 - n1;
    let var = n0 + n1;
    let s = mu / var.sqrt();
    ((1.0 + s * s / 2.0 - 0.75 * mu * mu / (var * var)) / shots as f64).sqrt()
}

fn seed_stream(seed: u64, n: usize) -> Vec<u64> {
    let mut sm = SplitMix64::seed_from_u64(seed);
    (0..n).map(|_| sm.next_u64()).collect()
}

/// Runs the Monte Carlo check with `n0`, `n1` taken from the rate model.
pub fn run_mc(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let (n0, n1) = photon_counts(&cfg.params, cfg.t_read)?;
    run_mc_with_counts(cfg, n0, n1)
}

/// Runs the Monte Carlo check with explicit expected counts.
pub fn run_mc_with_counts(cfg: &McConfig, n0: f64, n1: f64) -> Result<McReport> {
    cfg.validate()?;
    if !(n0 >= 0.0 && n1 >= 0.0) {
        return Err(Error::arg(
            "counts",
            format!("expected counts must be >= 0, got ({n0}, {n1})"),
        ));
    }
    if n0 + n1 == 0.0 {
        return Err(Error::DegenerateStatistics(
            "n0 + n1 = 0: no photons expected".into(),
        ));
    }
    let chunks = cfg.shots.div_ceil(CHUNK_SHOTS) as usize;
    let seeds = seed_stream(cfg.seed, chunks + cfg.batches);
    let (shot_seeds, batch_seeds) = seeds.split_at(chunks);

    let bright = PoissonSampler::new(n0)?;
    let dark = PoissonSampler::new(n1)?;
    let delta = shot_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(s);
            let len = CHUNK_SHOTS.min(cfg.shots - i as u64 * CHUNK_SHOTS);
            let mut m = Moments::default();
            for _ in 0..len {
                let d = bright.sample(&mut rng) as f64 - dark.sample(&mut rng) as f64;
                m.push(d);
            }
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge);

    let mean_exact = n0 - n1;
    let var_exact = n0 + n1;
    let shots = cfg.shots as f64;
    let delta_var = delta.variance();
    let snr_emp = if delta_var > 0.0 {
        delta.mean / delta_var.sqrt()
    } else {
        0.0
    };
    let snr_exact = snr(n0, n1)?;

    let mut report = McReport {
        rng_algorithm: RNG_ALGORITHM.to_string(),
        poisson_algorithm: POISSON_ALGORITHM.to_string(),
        seed: cfg.seed,
        shots: cfg.shots,
        t_read: cfg.t_read,
        n0,
        n1,
        delta_mean: delta.mean,
        delta_var,
        delta_mean_exact: mean_exact,
        delta_var_exact: var_exact,
        z_delta_mean: (delta.mean - mean_exact) / (var_exact / shots).sqrt(),
        z_delta_var: (delta_var - var_exact)
            / ((var_exact + 2.0 * var_exact * var_exact) / shots).sqrt(),
        snr: snr_emp,
        snr_exact,
        z_snr: (snr_emp - snr_exact) / empirical_snr_std(n0, n1, cfg.shots),
        true_r: cfg.true_r,
        batches: cfg.batches,
        batch_shots: cfg.batch_shots,
        r_hat_mean: None,
        r_hat_std: None,
        r_std_error: None,
        r_std_ratio: None,
        z_r_hat_mean: None,
    };

    if cfg.batches == 0 || n0 == n1 {
        return Ok(report);
    }
    let mixed = PoissonSampler::new(cfg.true_r * n0 + (1.0 - cfg.true_r) * n1)?;
    let estimates = batch_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(s);
            let total: u64 = (0..cfg.batch_shots).map(|_| mixed.sample(&mut rng)).sum();
            mle_estimate(total, cfg.batch_shots, n0, n1).map(|e| e.r_hat)
        })
        .collect::<Result<Vec<f64>>>()?;
    let r = estimates.iter().fold(Moments::default(), |mut m, &x| {
        m.push(x);
        m
    });
    let se = estimator_std_error(cfg.true_r, cfg.batch_shots, n0, n1)?;
    let r_std = r.variance().sqrt();
    report.r_hat_mean = Some(r.mean);
    report.r_hat_std = Some(r_std);
    report.r_std_error = Some(se);
    report.r_std_ratio = Some(r_std / se);
    report.z_r_hat_mean = Some((r.mean - cfg.true_r) / (se / (cfg.batches as f64).sqrt()));
    Ok(report)
}
