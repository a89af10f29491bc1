//! SNR maximization over pulse duration, Purcell factor, and excitation rate.
//!
//! Every one-dimensional search is a coarse grid scan followed by golden-section
//! refinement inside the cell pair around the best grid point. The grid guards
//! against a second lobe; golden section assumes unimodality inside the bracket.
//! Ties on the grid resolve to the smallest argument.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::RateParams;
use crate::readout::readout_stats;
use crate::real::Real;

/// Default upper end of the pulse-duration search, SL.
pub const DEFAULT_T_MAX: f64 = 10.0;
/// Coarse grid size for searches over T.
pub const T_GRID_POINTS: usize = 200;
/// Coarse grid size for searches over PF.
pub const PF_GRID_POINTS: usize = 60;
/// Largest exponent of the `K_e = 2^j·K_f` saturation ladder.
pub const MAX_LADDER_STEPS: u32 = 14;

const MAX_GOLDEN_ITER: usize = 300;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<T> {
    /// Pulse duration, SL.
    pub t: T,
    /// Purcell factor.
    pub pf: T,
    /// Relative change between successive saturation-ladder maxima.
    pub saturation: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            t: T::of(1e-4),
            pf: T::of(1e-3),
            saturation: T::of(1e-4),
        }
    }
}

/// One rung of the excitation-rate ladder used for saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderStep<T> {
    pub step: u32,
    pub k_e: T,
    pub snr: T,
    pub optimal_t: T,
}

impl<T: Real> LadderStep<T> {
    fn to_f64(self) -> LadderStep<f64> {
        LadderStep {
            step: self.step,
            k_e: self.k_e.as_f64(),
            snr: self.snr.as_f64(),
            optimal_t: self.optimal_t.as_f64(),
        }
    }
}

/// Result of an SNR maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum<T> {
    /// Argument values at the optimum, keyed `T`, `PF`, `K_e`.
    pub args: BTreeMap<String, T>,
    pub value: T,
    pub evaluations: usize,
    pub converged: bool,
    /// The objective was constant on the search grid.
    #[serde(default)]
    pub flat: bool,
    /// Achieved final bracket width per argument (relative change for saturation).
    pub tolerance: BTreeMap<String, T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<LadderStep<T>>,
}

impl<T: Real> Optimum<T> {
    pub fn arg(&self, name: &str) -> Option<T> {
        self.args.get(name).copied()
    }
}

/// Outcome of [`maximize_scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax<T> {
    pub x: T,
    pub value: T,
    pub evaluations: usize,
    pub converged: bool,
    pub flat: bool,
    pub bracket: T,
}

/// Maximizes `f` on `[lo, hi]`: scan `grid_points` equally spaced points, then
/// golden-section refine around the best one until the bracket is below `tol`.
pub fn maximize_scalar<T, F>(f: F, lo: T, hi: T, grid_points: usize, tol: T) -> Result<ScalarMax<T>>
where
    T: Real,
    F: Fn(T) -> Result<T> + Sync,
{
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::arg(
            "range",
            format!("need finite lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    if !(tol > T::zero()) {
        return Err(Error::arg("tol", format!("must be > 0, got {tol}")));
    }
    let eval = |x: T| -> Result<T> {
        let v = f(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("objective is {v} at {x}")))
        }
    };

    if lo == hi {
        return Ok(ScalarMax {
            x: lo,
            value: eval(lo)?,
            evaluations: 1,
            converged: true,
            flat: false,
            bracket: T::zero(),
        });
    }
    if grid_points < 2 {
        return Err(Error::arg("grid_points", "need at least 2"));
    }

    let step = (hi - lo) / T::of((grid_points - 1) as f64);
    let xs: Vec<T> = (0..grid_points)
        .map(|i| {
            if i + 1 == grid_points {
                hi
            } else {
                lo + step * T::of(i as f64)
            }
        })
        .collect();
    let values = xs
        .par_iter()
        .map(|&x| eval(x))
        .collect::<Result<Vec<T>>>()?;
    let mut evaluations = grid_points;

    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values[best];
    if max - min <= T::epsilon() * T::of(64.0) * (T::one() + max.abs()) {
        return Ok(ScalarMax {
            x: xs[best],
            value: max,
            evaluations,
            converged: false,
            flat: true,
            bracket: hi - lo,
        });
    }

    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(grid_points - 1)];
    let (mut best_x, mut best_v) = (xs[best], max);
    let g = T::of(INV_PHI);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    evaluations += 2;
    let mut iter = 0;
    while b - a > tol && iter < MAX_GOLDEN_ITER {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
        evaluations += 1;
        iter += 1;
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best_v {
            best_x = x;
            best_v = v;
        }
    }
    Ok(ScalarMax {
        x: best_x,
        value: best_v,
        evaluations,
        converged: b - a <= tol,
        flat: false,
        bracket: b - a,
    })
}

fn check_range<T: Real>(name: &'static str, (lo, hi): (T, T)) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() || lo > hi || lo < T::zero() {
        return Err(Error::arg(
            name,
            format!("need 0 <= lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    Ok(())
}

/// Maximizes SNR over the pulse duration on `[lo, hi]`.
pub fn optimal_t_in<T: Real>(
    params: &RateParams<T>,
    t_range: (T, T),
    tol: T,
) -> Result<Optimum<T>> {
    check_range("t_range", t_range)?;
    params.validate()?;
    let m = maximize_scalar(
        |t| readout_stats(params, t).map(|r| r.snr),
        t_range.0,
        t_range.1,
        T_GRID_POINTS,
        tol,
    )?;
    Ok(Optimum {
        args: BTreeMap::from([("T".to_string(), m.x)]),
        value: m.value,
        evaluations: m.evaluations,
        converged: m.converged,
        flat: m.flat,
        tolerance: BTreeMap::from([("T".to_string(), m.bracket)]),
        ladder: Vec::new(),
    })
}

/// Maximizes SNR over `T ∈ (0, t_max]`.
pub fn optimal_t<T: Real>(params: &RateParams<T>, t_max: T, tol: T) -> Result<Optimum<T>> {
    if !t_max.is_finite() || t_max <= T::zero() {
        return Err(Error::arg("t_max", format!("must be > 0, got {t_max}")));
    }
    let lo = t_max / T::of(T_GRID_POINTS as f64);
    optimal_t_in(params, (lo, t_max), tol)
}

/// Joint maximization over Purcell factor and pulse duration: golden section on
/// PF around the best point of a PF grid, each PF evaluated by [`optimal_t_in`].
pub fn optimal_pf_t<T: Real>(
    params: &RateParams<T>,
    pf_range: (T, T),
    t_range: (T, T),
    tol: &Tolerances<T>,
) -> Result<Optimum<T>> {
    check_range("pf_range", pf_range)?;
    check_range("t_range", t_range)?;
    if pf_range.0 <= T::zero() {
        return Err(Error::arg("pf_range", "Purcell factor must be > 0"));
    }
    let evaluations = AtomicUsize::new(0);
    let inner = |pf: T| -> Result<Optimum<T>> {
        let o = optimal_t_in(&params.with_pf(pf), t_range, tol.t)?;
        evaluations.fetch_add(o.evaluations, Ordering::Relaxed);
        Ok(o)
    };
    let outer = maximize_scalar(
        |pf| inner(pf).map(|o| o.value),
        pf_range.0,
        pf_range.1,
        PF_GRID_POINTS,
        tol.pf,
    )?;
    let at = inner(outer.x)?;
    let t_bracket = at.tolerance.get("T").copied().unwrap_or_else(T::zero);
    Ok(Optimum {
        args: BTreeMap::from([("PF".to_string(), outer.x), ("T".to_string(), at.args["T"])]),
        value: at.value,
        evaluations: evaluations.into_inner(),
        converged: outer.converged && at.converged,
        flat: outer.flat,
        tolerance: BTreeMap::from([
            ("PF".to_string(), outer.bracket),
            ("T".to_string(), t_bracket),
        ]),
        ladder: Vec::new(),
    })
}

/// Extrapolates a sequence sampled at `h, h/2, h/4` (oldest first) to `h → 0`,
/// assuming an error expansion in powers of `h`.
fn richardson<T: Real>(v: [T; 3]) -> T {
    (v[0] - T::of(6.0) * v[1] + T::of(8.0) * v[2]) / T::of(3.0)
}

/// Saturated SNR: the limit of `max_T SNR` as `K_e → ∞` at Purcell factor `pf`.
///
/// Walks `K_e = 2^j·K_f` for `j = 1..=14`, stopping once two successive maxima
/// agree to `tol.saturation` (relative), then Richardson-extrapolates the last
/// three rungs in `1/K_e`. The optimal T is extrapolated the same way.
pub fn saturated_snr<T: Real>(
    params: &RateParams<T>,
    pf: T,
    tol: &Tolerances<T>,
) -> Result<Optimum<T>> {
    if !(tol.saturation > T::zero()) {
        return Err(Error::arg("rel_tol", "must be > 0"));
    }
    let base = params.with_pf(pf);
    base.validate()?;
    let k_f = base.k_f();
    let mut ladder: Vec<LadderStep<T>> = Vec::new();
    let mut evaluations = 0;
    let mut rel_change = T::infinity();

    for step in 1..=MAX_LADDER_STEPS {
        let k_e = k_f * T::of(2f64.powi(step as i32));
        let o = optimal_t(&base.with_k_e(k_e), T::of(DEFAULT_T_MAX), tol.t)?;
        evaluations += o.evaluations;
        ladder.push(LadderStep {
            step,
            k_e,
            snr: o.value,
            optimal_t: o.args["T"],
        });
        if let [.., prev, last] = ladder.as_slice() {
            rel_change = ((last.snr - prev.snr) / last.snr).abs();
            if ladder.len() >= 3 && rel_change < tol.saturation {
                break;
            }
        }
    }
    if ladder.len() < 3 || rel_change >= tol.saturation {
        return Err(Error::NotConverged {
            ladder: ladder.into_iter().map(LadderStep::to_f64).collect(),
        });
    }

    let tail = &ladder[ladder.len() - 3..];
    let snr = richardson([tail[0].snr, tail[1].snr, tail[2].snr]);
    let t = richardson([tail[0].optimal_t, tail[1].optimal_t, tail[2].optimal_t]);
    Ok(Optimum {
        args: BTreeMap::from([("PF".to_string(), pf), ("T".to_string(), t)]),
        value: snr,
        evaluations,
        converged: true,
        flat: false,
        tolerance: BTreeMap::from([("K_e".to_string(), rel_change)]),
        ladder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances<f64> {
        Tolerances::default()
    }

    #[test]
    fn golden_section_on_parabola() {
        let m = maximize_scalar(
            |x: f64| Ok(-(x - 1.2345).powi(2) + 3.0),
            -5.0,
            5.0,
            50,
            1e-6,
        )
        .unwrap();
        assert!(m.converged);
        assert!((m.x - 1.2345).abs() < 1e-6);
        assert!((m.value - 3.0).abs() < 1e-12);
        assert!(m.bracket <= 1e-6);
    }

    #[test]
    fn golden_section_on_skewed_lognormal_shape() {
        // exp(-(ln x - mu)^2 / 2s^2) / x peaks at x = exp(mu - s^2)
        let (mu, s) = (0.7f64, 0.6f64);
        let f = |x: f64| Ok((-(x.ln() - mu).powi(2) / (2.0 * s * s)).exp() / x);
        let m = maximize_scalar(f, 0.01, 20.0, 200, 1e-7).unwrap();
        assert!((m.x - (mu - s * s).exp()).abs() < 1e-6, "x = {}", m.x);
    }

    #[test]
    fn maximum_at_the_range_end() {
        let m = maximize_scalar(|x: f64| Ok(x), 0.0, 2.0, 10, 1e-6).unwrap();
        assert!((m.x - 2.0).abs() < 1e-6);
    }

    #[test]
    fn grid_picks_the_taller_lobe() {
        // narrow tall peak at 8, wide short one at 2
        let f = |x: f64| Ok(0.5 * (-(x - 2.0).powi(2)).exp() + (-(x - 8.0).powi(2) * 4.0).exp());
        let m = maximize_scalar(f, 0.0, 10.0, 200, 1e-6).unwrap();
        assert!((m.x - 8.0).abs() < 1e-5);
    }

    #[test]
    fn flat_objective_is_flagged() {
        let m = maximize_scalar(|_x: f64| Ok(0.0), 0.0, 1.0, 20, 1e-6).unwrap();
        assert!(m.flat);
        assert!(!m.converged);
        assert_eq!(m.x, 0.0);
    }

    #[test]
    fn non_finite_objective_is_a_numerical_error() {
        let r = maximize_scalar(
            |x: f64| Ok(if x > 0.5 { f64::NAN } else { x }),
            0.0,
            1.0,
            20,
            1e-6,
        );
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn bad_ranges_are_rejected() {
        assert!(maximize_scalar(|x: f64| Ok(x), 1.0, 0.0, 10, 1e-3).is_err());
        assert!(maximize_scalar(|x: f64| Ok(x), 0.0, 1.0, 10, 0.0).is_err());
        assert!(optimal_t(&RateParams::<f64>::typical(), -1.0, 1e-4).is_err());
    }

    #[test]
    fn typical_optimal_pulse() {
        let o = optimal_t(&RateParams::<f64>::typical(), DEFAULT_T_MAX, 1e-4).unwrap();
        assert!(o.converged);
        assert!((o.args["T"] - 0.9911).abs() < 1e-3, "{o:?}");
        assert!((o.value - 1.2516).abs() < 1e-3, "{o:?}");
        assert!(o.tolerance["T"] <= 1e-4);
    }

    #[test]
    fn no_excitation_is_flat() {
        let o = optimal_t(
            &RateParams::<f64>::typical().with_k_e(0.0),
            DEFAULT_T_MAX,
            1e-4,
        )
        .unwrap();
        assert!(o.flat);
        assert!(!o.converged);
        assert_eq!(o.value, 0.0);
    }

    #[test]
    fn optimal_pulse_at_joint_purcell_optimum() {
        let o = optimal_t(
            &RateParams::<f64>::typical().with_pf(5.1903),
            DEFAULT_T_MAX,
            1e-4,
        )
        .unwrap();
        assert!((o.args["T"] - 1.703).abs() < 2e-2, "{o:?}");
    }

    #[test]
    fn collapsed_ranges_reproduce_readout_stats() {
        let p = RateParams::<f64>::typical();
        let o = optimal_pf_t(&p, (2.5, 2.5), (1.3, 1.3), &tol()).unwrap();
        let r = readout_stats(&p.with_pf(2.5), 1.3).unwrap();
        assert_eq!(o.value, r.snr);
        assert_eq!(o.args["PF"], 2.5);
        assert_eq!(o.args["T"], 1.3);
    }

    #[test]
    fn unit_pf_range_reduces_to_optimal_t() {
        let p = RateParams::<f64>::typical();
        let joint = optimal_pf_t(&p, (1.0, 1.0), (0.0, DEFAULT_T_MAX), &tol()).unwrap();
        let single = optimal_t_in(&p, (0.0, DEFAULT_T_MAX), 1e-4).unwrap();
        assert_eq!(joint.value, single.value);
        assert_eq!(joint.args["T"], single.args["T"]);
    }

    #[test]
    fn fixed_unit_time_purcell_optimum() {
        let o = optimal_pf_t(
            &RateParams::<f64>::typical(),
            (1.0, 20.0),
            (1.0, 1.0),
            &tol(),
        )
        .unwrap();
        assert!((o.args["PF"] - 3.0).abs() < 0.3, "{o:?}");
        assert!((o.value - 1.4867).abs() < 1e-2, "{o:?}");
    }

    #[test]
    fn richardson_is_exact_for_quadratics_in_h() {
        let f = |h: f64| 2.0 + 3.0 * h - 0.7 * h * h;
        assert!((richardson([f(0.4), f(0.2), f(0.1)]) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn saturation_ladder_is_monotone() {
        let o = saturated_snr(&RateParams::<f64>::typical(), 1.0, &tol()).unwrap();
        assert!(o.converged);
        assert!(o.ladder.len() >= 3);
        for w in o.ladder.windows(2) {
            assert!(w[1].snr >= w[0].snr, "{:?}", o.ladder);
        }
        assert!(o.value >= o.ladder.last().unwrap().snr);
    }

    #[test]
    fn exhausted_ladder_reports_partial_data() {
        let t = Tolerances {
            saturation: 1e-15,
            ..tol()
        };
        match saturated_snr(&RateParams::<f64>::typical(), 1.0, &t) {
            Err(Error::NotConverged { ladder }) => {
                assert_eq!(ladder.len(), MAX_LADDER_STEPS as usize)
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
