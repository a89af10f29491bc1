//! Five-level rate model of the NV center under optical pumping.
//!
//! Levels are ordered `|g,0⟩, |g,±1⟩, |e,0⟩, |e,±1⟩, |singlet⟩`. The `±1`
//! sublevels are lumped into one level each, so the spin-mixing channels
//! carry a 2:1 degeneracy weight (two ways to leave `m_s = 0`, one way back).
//!
//! All rates are in units of the inverse singlet lifetime (1/SL) and all
//! durations in SL, with SL ≈ 300 ns.
//!
//! Populations evolve as `dP/dt = A·P` with a constant generator `A`, so
//! propagation is a single matrix exponential. The photon count collected
//! over `[0, T]` is obtained from the same exponential by appending a sixth
//! row that accumulates the radiative emission rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// Singlet lifetime in nanoseconds; the time unit of the model.
pub const SINGLET_LIFETIME_NS: f64 = 300.0;
/// Unmodified radiative decay rate, 300/13 ≈ 23.077 per SL.
pub const TYPICAL_K_F0: f64 = 300.0 / 13.0;
/// Intersystem crossing `|e,±1⟩ → singlet`, 300/7.8 − 300/13 ≈ 15.385 per SL.
pub const TYPICAL_K_S: f64 = 300.0 / 7.8 - 300.0 / 13.0;
/// Singlet decay to `|g,0⟩`.
pub const TYPICAL_K_0: f64 = 1.0;
/// Non-radiative mixing rate as a fraction of `k_f0`.
pub const TYPICAL_K_M_FRACTION: f64 = 0.0404;
/// Mixing fraction of the radiative model (`k_me = α·k_e`, `k_mf = α·k_f`).
pub const TYPICAL_ALPHA: f64 = 0.02;

pub const LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    G0 = 0,
    G1 = 1,
    E0 = 2,
    E1 = 3,
    Singlet = 4,
}

impl Level {
    pub const ALL: [Level; LEVELS] = [Level::G0, Level::G1, Level::E0, Level::E1, Level::Singlet];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Ground-state spin projection a readout starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    /// `|g, m_s = 0⟩`
    Ms0,
    /// `|g, m_s = ±1⟩`
    Ms1,
}

impl Spin {
    pub fn ground_level(self) -> Level {
        match self {
            Spin::Ms0 => Level::G0,
            Spin::Ms1 => Level::G1,
        }
    }
}

/// Origin of the spin-mixing transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mixing", rename_all = "snake_case")]
pub enum Mixing<T> {
    /// Constant phonon-mediated mixing between the excited-state spin manifolds.
    NonRadiative { k_m: T },
    /// Optically activated mixing: spin-flipping excitation at `α·k_e` and
    /// spin-flipping radiative decay at `α·k_f`.
    Radiative {
        alpha: T,
        /// Whether spin-flipping decays add to the collected fluorescence.
        #[serde(default = "default_true")]
        count_cross_decay: bool,
    },
}

fn default_true() -> bool {
    true
}

impl<T: Real> Mixing<T> {
    pub fn typical_non_radiative() -> Self {
        Mixing::NonRadiative {
            k_m: T::of(TYPICAL_K_M_FRACTION * TYPICAL_K_F0),
        }
    }

    pub fn typical_radiative() -> Self {
        Mixing::Radiative {
            alpha: T::of(TYPICAL_ALPHA),
            count_cross_decay: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mixing::NonRadiative { .. } => "non_radiative",
            Mixing::Radiative { .. } => "radiative",
        }
    }
}

/// Transition rates of the model, in 1/SL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams<T> {
    /// Spin-preserving excitation rate.
    pub k_e: T,
    /// Unmodified radiative decay rate.
    pub k_f0: T,
    /// Purcell factor; the effective radiative rate is `pf·k_f0`.
    pub pf: T,
    /// Decay `|e,±1⟩ → singlet`.
    pub k_s: T,
    /// Decay `singlet → |g,0⟩`.
    pub k_0: T,
    #[serde(flatten)]
    pub mixing: Mixing<T>,
}

impl<T: Real> Default for RateParams<T> {
    fn default() -> Self {
        Self::typical()
    }
}

impl<T: Real> RateParams<T> {
    /// Typical room-temperature NV rates with non-radiative mixing and `k_e = k_f0`.
    pub fn typical() -> Self {
        Self {
            k_e: T::of(TYPICAL_K_F0),
            k_f0: T::of(TYPICAL_K_F0),
            pf: T::one(),
            k_s: T::of(TYPICAL_K_S),
            k_0: T::of(TYPICAL_K_0),
            mixing: Mixing::typical_non_radiative(),
        }
    }

    /// Typical rates with radiative mixing at `α = 0.02`.
    pub fn typical_radiative() -> Self {
        Self {
            mixing: Mixing::typical_radiative(),
            ..Self::typical()
        }
    }

    /// Effective radiative decay rate `pf·k_f0`.
    #[inline]
    pub fn k_f(&self) -> T {
        self.pf * self.k_f0
    }

    pub fn with_k_e(mut self, k_e: T) -> Self {
        self.k_e = k_e;
        self
    }

    pub fn with_pf(mut self, pf: T) -> Self {
        self.pf = pf;
        self
    }

    pub fn with_mixing(mut self, mixing: Mixing<T>) -> Self {
        self.mixing = mixing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |name: &'static str, v: T| {
            if !v.is_finite() || v < T::zero() {
                Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            } else {
                Ok(())
            }
        };
        rate("k_e", self.k_e)?;
        rate("k_f0", self.k_f0)?;
        rate("k_s", self.k_s)?;
        rate("k_0", self.k_0)?;
        if !self.pf.is_finite() || self.pf <= T::zero() {
            return Err(Error::param(
                "pf",
                format!("must be finite and > 0, got {}", self.pf),
            ));
        }
        match self.mixing {
            Mixing::NonRadiative { k_m } => rate("k_m", k_m),
            Mixing::Radiative { alpha, .. } => rate("alpha", alpha),
        }
    }
}

/// Constant rate generator `A` plus the per-level photon emission rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de> + Real"))]
pub struct GeneratorMatrix<T> {
    /// `rates[(to, from)]`: column `j` holds the flows out of level `j`.
    pub rates: Matrix<T, LEVELS>,
    /// Radiative emission rate from each level (photons per SL per unit population).
    pub emission: [T; LEVELS],
}

impl<T: Real> GeneratorMatrix<T> {
    /// `[[A, 0], [emission, 0]]`; its exponential carries the cumulative photon count
    /// in the last row.
    pub fn augmented(&self) -> Matrix<T, 6> {
        let mut b = Matrix::<T, 6>::zeros();
        for i in 0..LEVELS {
            for j in 0..LEVELS {
                b[(i, j)] = self.rates[(i, j)];
            }
            b[(LEVELS, i)] = self.emission[i];
        }
        b
    }

    /// Column sums with the off-diagonal entries summed first.
    pub fn column_sums(&self) -> [T; LEVELS] {
        let mut out = [T::zero(); LEVELS];
        for (j, o) in out.iter_mut().enumerate() {
            let off: T = (0..LEVELS)
                .filter(|&i| i != j)
                .map(|i| self.rates[(i, j)])
                .sum();
            *o = off + self.rates[(j, j)];
        }
        out
    }

    /// `e^{A t}`.
    pub fn transition(&self, t: T) -> Result<Matrix<T, LEVELS>> {
        check_duration("t", t)?;
        self.rates.scale(t).exp()
    }
}

/// Builds the generator for either mixing model.
pub fn build_generator<T: Real>(params: &RateParams<T>) -> Result<GeneratorMatrix<T>> {
    use Level::*;

    params.validate()?;
    let k_f = params.k_f();
    let two = T::of(2.0);

    // Off-diagonal flows first; diagonals are filled from column sums below.
    let mut rates = Matrix::<T, LEVELS>::zeros();
    let mut flow = |from: Level, to: Level, rate: T| {
        rates[(to.index(), from.index())] += rate;
    };
    flow(G0, E0, params.k_e);
    flow(G1, E1, params.k_e);
    flow(E0, G0, k_f);
    flow(E1, G1, k_f);
    flow(E1, Singlet, params.k_s);
    flow(Singlet, G0, params.k_0);

    let mut emission = [T::zero(); LEVELS];
    emission[E0.index()] = k_f;
    emission[E1.index()] = k_f;

    match params.mixing {
        Mixing::NonRadiative { k_m } => {
            flow(E0, E1, two * k_m);
            flow(E1, E0, k_m);
        }
        Mixing::Radiative {
            alpha,
            count_cross_decay,
        } => {
            let k_me = alpha * params.k_e;
            let k_mf = alpha * k_f;
            flow(G0, E1, two * k_me);
            flow(G1, E0, k_me);
            flow(E0, G1, two * k_mf);
            flow(E1, G0, k_mf);
            if count_cross_decay {
                emission[E0.index()] += two * k_mf;
                emission[E1.index()] += k_mf;
            }
        }
    }

    for j in 0..LEVELS {
        let out: T = (0..LEVELS).filter(|&i| i != j).map(|i| rates[(i, j)]).sum();
        rates[(j, j)] = -out;
    }

    Ok(GeneratorMatrix { rates, emission })
}

/// Occupation probabilities of the five levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub p_g0: T,
    pub p_g1: T,
    pub p_e0: T,
    pub p_e1: T,
    pub p_s: T,
}

impl<T: Real> StateVector<T> {
    /// Tolerance used when validating sum and bounds.
    pub const TOLERANCE: f64 = 1e-9;

    pub fn new(p_g0: T, p_g1: T, p_e0: T, p_e1: T, p_s: T) -> Result<Self> {
        let s = Self::from_array([p_g0, p_g1, p_e0, p_e1, p_s]);
        s.validate()?;
        Ok(s)
    }

    /// All population in one level.
    pub fn pure(level: Level) -> Self {
        let mut p = [T::zero(); LEVELS];
        p[level.index()] = T::one();
        Self::from_array(p)
    }

    pub fn ground(spin: Spin) -> Self {
        Self::pure(spin.ground_level())
    }

    /// Unpolarized ground state: weight 1/3 on `m_s = 0`, 2/3 on the lumped `±1`.
    pub fn mixed_ground() -> Self {
        let third = T::one() / T::of(3.0);
        Self::from_array([third, T::one() - third, T::zero(), T::zero(), T::zero()])
    }

    pub fn from_array(p: [T; LEVELS]) -> Self {
        Self {
            p_g0: p[0],
            p_g1: p[1],
            p_e0: p[2],
            p_e1: p[3],
            p_s: p[4],
        }
    }

    pub fn to_array(&self) -> [T; LEVELS] {
        [self.p_g0, self.p_g1, self.p_e0, self.p_e1, self.p_s]
    }

    pub fn get(&self, level: Level) -> T {
        self.to_array()[level.index()]
    }

    pub fn total(&self) -> T {
        self.to_array().into_iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::of(Self::TOLERANCE);
        for (level, p) in Level::ALL.iter().zip(self.to_array()) {
            if !p.is_finite() || p < -tol || p > T::one() + tol {
                return Err(Error::arg(
                    "state",
                    format!("population of {level:?} is {p}, outside [0, 1]"),
                ));
            }
        }
        let total = self.total();
        if (total - T::one()).abs() > tol {
            return Err(Error::arg(
                "state",
                format!("populations sum to {total}, not 1"),
            ));
        }
        Ok(())
    }
}

fn check_duration<T: Real>(name: &'static str, t: T) -> Result<()> {
    if !t.is_finite() || t < T::zero() {
        return Err(Error::arg(
            name,
            format!("duration must be finite and >= 0, got {t}"),
        ));
    }
    Ok(())
}

/// `e^{A t}·init`.
pub fn propagate<T: Real>(
    gen: &GeneratorMatrix<T>,
    init: &StateVector<T>,
    t: T,
) -> Result<StateVector<T>> {
    check_duration("t", t)?;
    if t == T::zero() {
        return Ok(*init);
    }
    let p = gen.transition(t)?.mul_vec(&init.to_array());
    Ok(StateVector::from_array(p))
}

/// Expected photon counts `(n0, n1)` collected over `[0, t_read]` starting from
/// `|g,0⟩` and `|g,±1⟩` respectively. One 6×6 exponential serves both.
pub fn photon_counts<T: Real>(params: &RateParams<T>, t_read: T) -> Result<(T, T)> {
    check_duration("t_read", t_read)?;
    let gen = build_generator(params)?;
    if t_read == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    let e = gen.augmented().scale(t_read).exp()?;
    Ok((
        e[(LEVELS, Level::G0.index())],
        e[(LEVELS, Level::G1.index())],
    ))
}

/// Expected photon count over `[0, t_read]` for a readout starting in `initial_spin`.
pub fn expected_photons<T: Real>(
    params: &RateParams<T>,
    initial_spin: Spin,
    t_read: T,
) -> Result<T> {
    let (n0, n1) = photon_counts(params, t_read)?;
    Ok(match initial_spin {
        Spin::Ms0 => n0,
        Spin::Ms1 => n1,
    })
}
