//! Optical spin readout of NV centers in diamond under Purcell enhancement.
//!
//! The crate models the NV center as a five-level rate system pumped by a
//! square laser pulse, turns the expected photon counts of the two spin
//! projections into a Skellam readout SNR, and optimizes that SNR over the
//! pulse duration, the excitation rate, and the Purcell factor of a coupled
//! optical antenna. Two hypotheses for the spin-mixing channel are supported:
//! a constant non-radiative rate, and radiative mixing that scales with the
//! optical rates.
//!
//! All rates are in units of 1/SL and durations in SL, where SL is the
//! singlet lifetime (≈300 ns).
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the sweep and Monte Carlo layers use.
//!
//! ```
//! use nv_readout::{optimal_t, Params, DEFAULT_T_MAX};
//!
//! let best = optimal_t(&Params::typical(), DEFAULT_T_MAX, 1e-4).unwrap();
//! assert!((best.value - 1.2516).abs() < 1e-3);
//! ```

pub mod error;
pub mod kinetics;
pub mod linalg;
pub mod mc;
pub mod optimize;
pub mod readout;
pub mod real;
pub mod sweep;

pub use error::{Error, Result};
pub use kinetics::{
    build_generator, expected_photons, photon_counts, propagate, GeneratorMatrix, Level, Mixing,
    RateParams, Spin, StateVector, SINGLET_LIFETIME_NS,
};
pub use mc::{run_mc, run_mc_with_counts, McConfig, McReport, PoissonSampler};
pub use optimize::{
    maximize_scalar, optimal_pf_t, optimal_t, optimal_t_in, saturated_snr, LadderStep, Optimum,
    Tolerances, DEFAULT_T_MAX,
};
pub use readout::{
    estimator_std_error, init_polarization, mle_estimate, readout_stats, snr, InitProtocol,
    ReadoutResult, SpinFractionEstimate,
};
pub use real::Real;
pub use sweep::{
    reproduce_figure, run_sweep, Axis, Figure, Observable, Scale, SweepSpec, SweepTable, Variable,
};

pub type Params = RateParams<f64>;
pub type State = StateVector<f64>;
pub type Generator = GeneratorMatrix<f64>;
pub type Readout = ReadoutResult<f64>;
pub type Estimate = SpinFractionEstimate<f64>;
pub type OptimumF64 = Optimum<f64>;

pub type ParamsF32 = RateParams<f32>;
pub type StateF32 = StateVector<f32>;
