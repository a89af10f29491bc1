//! Readout statistics built on the photon-count expectations.
//!
//! Each readout collects `N0 ~ Poisson(n0)` photons from `|g,0⟩` or
//! `N1 ~ Poisson(n1)` from `|g,±1⟩`. Their difference is Skellam distributed
//! with mean `n0 − n1` and variance `n0 + n1`, which gives the readout SNR
//! `(n0 − n1)/√(n0 + n1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{build_generator, photon_counts, propagate, RateParams, StateVector};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutResult<T> {
    /// Expected photons from `|g,0⟩`.
    pub n0: T,
    /// Expected photons from `|g,±1⟩`.
    pub n1: T,
    pub delta_mean: T,
    pub delta_var: T,
    pub snr: T,
    /// `(n0 − n1)/n0`, or 0 when no photons are expected.
    pub contrast: T,
}

impl<T: Real> ReadoutResult<T> {
    pub fn from_counts(n0: T, n1: T) -> Result<Self> {
        let snr = snr(n0, n1)?;
        let contrast = if n0 > T::zero() {
            (n0 - n1) / n0
        } else {
            T::zero()
        };
        Ok(Self {
            n0,
            n1,
            delta_mean: n0 - n1,
            delta_var: n0 + n1,
            snr,
            contrast,
        })
    }
}

/// Skellam SNR of two Poisson means. `snr(0, 0)` is 0.
pub fn snr<T: Real>(n0: T, n1: T) -> Result<T> {
    for (name, v) in [("n0", n0), ("n1", n1)] {
        if !v.is_finite() || v < T::zero() {
            return Err(Error::arg(
                name,
                format!("expected count must be >= 0, got {v}"),
            ));
        }
    }
    let var = n0 + n1;
    if var == T::zero() {
        return Ok(T::zero());
    }
    Ok((n0 - n1) / var.sqrt())
}

/// Readout statistics for a square pump pulse of length `t_read`.
pub fn readout_stats<T: Real>(params: &RateParams<T>, t_read: T) -> Result<ReadoutResult<T>> {
    let (n0, n1) = photon_counts(params, t_read)?;
    ReadoutResult::from_counts(n0, n1)
}

/// Maximum-likelihood estimate of the `m_s = 0` fraction `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinFractionEstimate<T> {
    pub r_hat: T,
    pub std_error: T,
    /// Number of readout repetitions pooled into the estimate.
    pub m: u64,
}

/// Standard error of the spin-fraction estimator at true fraction `r`:
/// `√((r·n0 + (1−r)·n1)/m) / |n0 − n1|`.
pub fn estimator_std_error<T: Real>(r: T, m: u64, n0: T, n1: T) -> Result<T> {
    if m == 0 {
        return Err(Error::arg("m", "at least one repetition is required"));
    }
    if n0 == n1 {
        return Err(Error::DegenerateEstimator);
    }
    let rate = (r * n0 + (T::one() - r) * n1).max(T::zero());
    Ok((rate / T::of(m as f64)).sqrt() / (n0 - n1).abs())
}

/// Estimates `r` from the photon total of `m` repetitions of a readout of the
/// state `r|g,0⟩ + (1−r)|g,±1⟩`.
///
/// Each repetition's count is Poisson with mean `r·n0 + (1−r)·n1`, so the
/// likelihood has a single stationary point at the linear inversion
/// `(total/m − n1)/(n0 − n1)`. The result is clamped to `[0, 1]`.
pub fn mle_estimate<T: Real>(
    total_counts: u64,
    m: u64,
    n0: T,
    n1: T,
) -> Result<SpinFractionEstimate<T>> {
    if m == 0 {
        return Err(Error::arg("m", "at least one repetition is required"));
    }
    if n0 == n1 {
        return Err(Error::DegenerateEstimator);
    }
    let mean = T::of(total_counts as f64) / T::of(m as f64);
    let r_hat = ((mean - n1) / (n0 - n1)).max(T::zero()).min(T::one());
    let std_error = estimator_std_error(r_hat, m, n0, n1)?;
    Ok(SpinFractionEstimate {
        r_hat,
        std_error,
        m,
    })
}

/// Optical pumping sequence used to initialize the spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitProtocol<T> {
    /// Laser-on time, SL.
    pub pump_duration: T,
    /// Dark time afterwards, SL; long enough for the singlet to drain.
    pub wait_duration: T,
}

impl<T: Real> Default for InitProtocol<T> {
    fn default() -> Self {
        Self {
            pump_duration: T::of(5.0),
            wait_duration: T::of(10.0),
        }
    }
}

/// Ground-state `m_s = 0` fraction `p_g0/(p_g0 + p_g1)` after pumping an
/// unpolarized ground state for `pump_duration` at `params.k_e`, then letting
/// it relax in the dark for `wait_duration`.
pub fn init_polarization<T: Real>(
    params: &RateParams<T>,
    pump_duration: T,
    wait_duration: T,
) -> Result<T> {
    let pumped = build_generator(params)?;
    let dark = build_generator(&params.with_k_e(T::zero()))?;
    let state = propagate(&pumped, &StateVector::mixed_ground(), pump_duration)?;
    let state = propagate(&dark, &state, wait_duration)?;
    let ground = state.p_g0 + state.p_g1;
    if ground <= T::zero() {
        return Err(Error::Numerical("ground state fully depleted".into()));
    }
    Ok(state.p_g0 / ground)
}
