//! Declarative parameter sweeps and the canned figure datasets.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{Mixing, RateParams};
use crate::optimize::{optimal_t, saturated_snr, Tolerances, DEFAULT_T_MAX};
use crate::readout::{init_polarization, readout_stats, InitProtocol};

/// Fraction of failed cells above which a sweep is reported as failed.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variable {
    T,
    #[serde(rename = "K_e")]
    Ke,
    #[serde(rename = "PF")]
    Pf,
}

impl Variable {
    pub fn column(self) -> &'static str {
        match self {
            Variable::T => "T",
            Variable::Ke => "K_e",
            Variable::Pf => "PF",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(Variable::T),
            "k_e" | "ke" => Ok(Variable::Ke),
            "pf" => Ok(Variable::Pf),
            _ => Err(Error::arg(
                "variable",
                format!("unknown sweep variable `{s}` (T, K_e, PF)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Snr,
    N0,
    N1,
    Contrast,
    /// SNR-maximizing pulse duration at each point.
    #[serde(rename = "optimal_T")]
    OptimalT,
    SaturatedSnr,
    /// Optimal pulse duration in the `K_e → ∞` limit.
    #[serde(rename = "saturated_T")]
    SaturatedT,
    Polarization,
}

impl Observable {
    pub fn column(self) -> &'static str {
        match self {
            Observable::Snr => "snr",
            Observable::N0 => "n0",
            Observable::N1 => "n1",
            Observable::Contrast => "contrast",
            Observable::OptimalT => "optimal_T",
            Observable::SaturatedSnr => "saturated_snr",
            Observable::SaturatedT => "saturated_T",
            Observable::Polarization => "polarization",
        }
    }

    /// Variables this observable optimizes or integrates out itself.
    fn consumes(self) -> &'static [Variable] {
        match self {
            Observable::OptimalT | Observable::Polarization => &[Variable::T],
            Observable::SaturatedSnr | Observable::SaturatedT => &[Variable::T, Variable::Ke],
            _ => &[],
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "snr" => Observable::Snr,
            "n0" => Observable::N0,
            "n1" => Observable::N1,
            "contrast" => Observable::Contrast,
            "optimal_t" | "optimal-t" => Observable::OptimalT,
            "saturated_snr" | "saturated-snr" => Observable::SaturatedSnr,
            "saturated_t" | "saturated-t" => Observable::SaturatedT,
            "polarization" => Observable::Polarization,
            _ => {
                return Err(Error::arg(
                    "observable",
                    format!("unknown observable `{s}`"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub variable: Variable,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn linear(variable: Variable, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            variable,
            lo,
            hi,
            points,
            scale: Scale::Linear,
        }
    }

    pub fn log(variable: Variable, lo: f64, hi: f64, points: usize) -> Self {
        Self {
            scale: Scale::Log,
            ..Self::linear(variable, lo, hi, points)
        }
    }

    /// `lo == hi` is allowed and yields a constant axis.
    pub fn validate(&self) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::arg(
                "range",
                format!("need lo <= hi, got [{}, {}]", self.lo, self.hi),
            ));
        }
        if self.points < 2 {
            return Err(Error::arg(
                "points",
                format!("need at least 2, got {}", self.points),
            ));
        }
        if self.scale == Scale::Log && self.lo <= 0.0 {
            return Err(Error::arg("range", "log scale requires lo > 0"));
        }
        if self.variable == Variable::Pf && self.lo <= 0.0 {
            return Err(Error::arg("range", "Purcell factor must be > 0"));
        }
        if self.lo < 0.0 {
            return Err(Error::arg("range", "rates and durations must be >= 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.lo;
                }
                if i + 1 == n {
                    return self.hi;
                }
                match self.scale {
                    Scale::Linear => self.lo + (self.hi - self.lo) * frac(i),
                    Scale::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * frac(i)).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// One or two axes; the first is the outer loop.
    pub axes: Vec<Axis>,
    pub params: RateParams<f64>,
    /// Readout duration used when T is not an axis.
    pub t_read: f64,
    pub observable: Observable,
    pub t_max: f64,
    pub tol: Tolerances<f64>,
    pub init: InitProtocol<f64>,
}

impl SweepSpec {
    pub fn new(axes: Vec<Axis>, params: RateParams<f64>, observable: Observable) -> Self {
        Self {
            axes,
            params,
            t_read: 1.0,
            observable,
            t_max: DEFAULT_T_MAX,
            tol: Tolerances::default(),
            init: InitProtocol::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::arg(
                "axes",
                format!("need one or two axes, got {}", self.axes.len()),
            ));
        }
        if self.axes.len() == 2 && self.axes[0].variable == self.axes[1].variable {
            return Err(Error::arg(
                "axes",
                "the two axes must sweep different variables",
            ));
        }
        for axis in &self.axes {
            axis.validate()?;
            if self.observable.consumes().contains(&axis.variable) {
                return Err(Error::arg(
                    "observable",
                    format!(
                        "{} cannot be swept for observable {}",
                        axis.variable,
                        self.observable.column()
                    ),
                ));
            }
        }
        if !self.t_read.is_finite() || self.t_read < 0.0 {
            return Err(Error::arg("t_read", "must be >= 0"));
        }
        self.params.validate()
    }

    fn cell_params(&self, point: &[f64]) -> (RateParams<f64>, f64) {
        let mut p = self.params;
        let mut t = self.t_read;
        for (axis, &v) in self.axes.iter().zip(point) {
            match axis.variable {
                Variable::T => t = v,
                Variable::Ke => p.k_e = v,
                Variable::Pf => p.pf = v,
            }
        }
        (p, t)
    }

    fn evaluate(&self, point: &[f64]) -> Result<f64> {
        let (p, t) = self.cell_params(point);
        let v = match self.observable {
            Observable::Snr => readout_stats(&p, t)?.snr,
            Observable::N0 => readout_stats(&p, t)?.n0,
            Observable::N1 => readout_stats(&p, t)?.n1,
            Observable::Contrast => readout_stats(&p, t)?.contrast,
            Observable::OptimalT => optimal_t(&p, self.t_max, self.tol.t)?.args["T"],
            Observable::SaturatedSnr => saturated_snr(&p, p.pf, &self.tol)?.value,
            Observable::SaturatedT => saturated_snr(&p, p.pf, &self.tol)?.args["T"],
            Observable::Polarization => {
                init_polarization(&p, self.init.pump_duration, self.init.wait_duration)?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!(
                "non-finite {} at {point:?}",
                self.observable.column()
            )))
        }
    }

    fn provenance(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut out = vec![
            (
                "tool".to_string(),
                format!("nv-readout {}", env!("CARGO_PKG_VERSION")),
            ),
            (
                "observable".to_string(),
                self.observable.column().to_string(),
            ),
            ("mixing".to_string(), p.mixing.name().to_string()),
            ("k_e".to_string(), p.k_e.to_string()),
            ("k_f0".to_string(), p.k_f0.to_string()),
            ("pf".to_string(), p.pf.to_string()),
            ("k_s".to_string(), p.k_s.to_string()),
            ("k_0".to_string(), p.k_0.to_string()),
        ];
        match p.mixing {
            Mixing::NonRadiative { k_m } => out.push(("k_m".into(), k_m.to_string())),
            Mixing::Radiative {
                alpha,
                count_cross_decay,
            } => {
                out.push(("alpha".into(), alpha.to_string()));
                out.push(("count_cross_decay".into(), count_cross_decay.to_string()));
            }
        }
        out.push(("t_read".into(), self.t_read.to_string()));
        for axis in &self.axes {
            out.push((
                format!("axis.{}", axis.variable),
                format!(
                    "[{}, {}] x{} {:?}",
                    axis.lo, axis.hi, axis.points, axis.scale
                )
                .to_lowercase(),
            ));
        }
        out
    }
}

/// Rectangular result of a sweep: one row per grid point, axes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Vec<(String, String)>,
    /// Rows whose observable failed; their value holds the sentinel 0.
    #[serde(default)]
    pub failed_rows: Vec<usize>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Row with the largest value in column `y`, first one on ties.
    pub fn argmax(&self, y: &str) -> Option<usize> {
        let ys = self.column(y)?;
        let mut best = 0;
        for (i, &v) in ys.iter().enumerate() {
            if v > ys[best] {
                best = i;
            }
        }
        (!ys.is_empty()).then_some(best)
    }

    /// Peak of `y` against `x` refined by a parabola through the best row and
    /// its neighbours. Only meaningful for one-axis tables.
    pub fn interpolated_peak(&self, x: &str, y: &str) -> Option<(f64, f64)> {
        let xs = self.column(x)?;
        let ys = self.column(y)?;
        let i = self.argmax(y)?;
        if i == 0 || i + 1 >= xs.len() {
            return Some((xs[i], ys[i]));
        }
        let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
        let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
        let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
        let c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2)
            / denom;
        if a >= 0.0 {
            return Some((x1, y1));
        }
        let xv = -b / (2.0 * a);
        Some((xv, a * xv * xv + b * xv + c))
    }
}

/// Evaluates the observable on the full grid, first axis outermost.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let grids: Vec<Vec<f64>> = spec.axes.iter().map(Axis::values).collect();
    let points: Vec<Vec<f64>> = match grids.as_slice() {
        [a] => a.iter().map(|&x| vec![x]).collect(),
        [a, b] => a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| vec![x, y]))
            .collect(),
        _ => unreachable!("validated above"),
    };

    let results: Vec<Result<f64>> = points.par_iter().map(|pt| spec.evaluate(pt)).collect();

    let mut failed_rows = Vec::new();
    let rows = points
        .into_iter()
        .zip(results)
        .enumerate()
        .map(|(i, (mut pt, r))| {
            let v = r.unwrap_or_else(|_| {
                failed_rows.push(i);
                0.0
            });
            pt.push(v);
            pt
        })
        .collect::<Vec<_>>();

    let mut columns: Vec<String> = spec
        .axes
        .iter()
        .map(|a| a.variable.column().to_string())
        .collect();
    columns.push(spec.observable.column().to_string());
    let total = rows.len();
    let table = SweepTable {
        columns,
        rows,
        provenance: spec.provenance(),
        failed_rows,
    };
    let failed = table.failed_rows.len();
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(Error::SweepFailed {
            failed,
            total,
            table: Box::new(table),
        });
    }
    Ok(table)
}

/// Canned datasets matching the published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Figure {
    /// SNR vs T at typical rates.
    Fig2a,
    /// SNR vs K_e at T = 1.
    Fig2b,
    /// SNR vs PF at T = 1.
    Fig3a,
    /// SNR over (PF, T).
    Fig3b,
    /// Saturated optimal T vs PF, non-radiative mixing.
    Fig4a,
    /// Saturated SNR vs PF, non-radiative mixing.
    Fig4b,
    /// Saturated optimal T vs PF, radiative mixing.
    Fig5a,
    /// Saturated SNR vs PF, radiative mixing.
    Fig5b,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig4a,
        Figure::Fig4b,
        Figure::Fig5a,
        Figure::Fig5b,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::Fig2a => "2a",
            Figure::Fig2b => "2b",
            Figure::Fig3a => "3a",
            Figure::Fig3b => "3b",
            Figure::Fig4a => "4a",
            Figure::Fig4b => "4b",
            Figure::Fig5a => "5a",
            Figure::Fig5b => "5b",
        }
    }

    pub fn spec(self) -> SweepSpec {
        let typical = RateParams::<f64>::typical();
        let k_f0 = typical.k_f0;
        let pf_axis = Axis::linear(Variable::Pf, 1.0, 20.0, 96);
        match self {
            Figure::Fig2a => SweepSpec::new(
                vec![Axis::linear(Variable::T, 0.01, 5.0, 500)],
                typical,
                Observable::Snr,
            ),
            Figure::Fig2b => SweepSpec::new(
                vec![Axis::log(Variable::Ke, 0.1 * k_f0, 100.0 * k_f0, 200)],
                typical,
                Observable::Snr,
            ),
            Figure::Fig3a => SweepSpec::new(
                vec![Axis::linear(Variable::Pf, 1.0, 20.0, 191)],
                typical,
                Observable::Snr,
            ),
            Figure::Fig3b => SweepSpec::new(
                vec![
                    Axis::linear(Variable::Pf, 1.0, 10.0, 91),
                    Axis::linear(Variable::T, 0.05, 5.0, 100),
                ],
                typical,
                Observable::Snr,
            ),
            Figure::Fig4a => SweepSpec::new(vec![pf_axis], typical, Observable::SaturatedT),
            Figure::Fig4b => SweepSpec::new(vec![pf_axis], typical, Observable::SaturatedSnr),
            Figure::Fig5a => SweepSpec::new(
                vec![pf_axis],
                RateParams::typical_radiative(),
                Observable::SaturatedT,
            ),
            Figure::Fig5b => SweepSpec::new(
                vec![pf_axis],
                RateParams::typical_radiative(),
                Observable::SaturatedSnr,
            ),
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = s.trim().trim_start_matches("fig").to_ascii_lowercase();
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// Runs the canonical sweep for a figure id such as `"3a"`.
pub fn reproduce_figure(id: &str) -> Result<SweepTable> {
    let fig: Figure = id.parse()?;
    let mut table = run_sweep(&fig.spec())?;
    table
        .provenance
        .insert(1, ("figure".to_string(), fig.id().to_string()));
    Ok(table)
}
