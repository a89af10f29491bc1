use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nv_readout::kinetics::TYPICAL_ALPHA;
use nv_readout::{
    Axis, Figure, InitProtocol, McConfig, Mixing, Params, Scale, SweepSpec, Variable,
    DEFAULT_T_MAX, SINGLET_LIFETIME_NS,
};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "nv-readout",
    version,
    about = "NV-center optical spin readout under Purcell enhancement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

/// Flags accepted by every subcommand. Rates are 1/SL and durations SL
/// unless `--ns` is given.
#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Excitation rate
    #[arg(long = "ke", global = true)]
    pub k_e: Option<f64>,
    /// Unmodified radiative decay rate
    #[arg(long = "kf0", global = true)]
    pub k_f0: Option<f64>,
    /// Purcell factor
    #[arg(long, global = true)]
    pub pf: Option<f64>,
    /// Decay rate into the singlet
    #[arg(long = "ks", global = true)]
    pub k_s: Option<f64>,
    /// Singlet decay rate
    #[arg(long = "k0", global = true)]
    pub k_0: Option<f64>,
    /// Non-radiative spin-mixing rate
    #[arg(long = "km", global = true)]
    pub k_m: Option<f64>,
    /// Radiative spin-mixing fraction
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub model: Option<Model>,
    /// Output format; tables default to csv, single results to json
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Monte Carlo seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Take rates in 1/ns and durations in ns
    #[arg(long, global = true)]
    pub ns: bool,
    /// Also write a gnuplot script next to the CSV output
    #[arg(long, global = true)]
    pub gnuplot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    #[value(alias = "non-radiative")]
    Nonradiative,
    Radiative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Photon counts and SNR for one pulse duration
    Snr {
        /// Pulse duration [default: 1 SL]
        #[arg(long = "T")]
        t: Option<f64>,
    },
    /// Pulse duration maximizing the SNR
    OptimalT {
        /// Upper end of the search [default: 10 SL]
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        /// Bracket width at which the search stops [default: 1e-4 SL]
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Joint optimum over Purcell factor and pulse duration
    #[command(name = "optimize-2d")]
    Optimize2d {
        #[arg(long = "pf-min", default_value_t = 1.0)]
        pf_min: f64,
        #[arg(long = "pf-max", default_value_t = 20.0)]
        pf_max: f64,
        /// [default: 0.01 SL]
        #[arg(long = "t-min")]
        t_min: Option<f64>,
        /// [default: 10 SL]
        #[arg(long = "t-max")]
        t_max: Option<f64>,
    },
    /// SNR in the limit of unbounded excitation at the given --pf
    Saturated {
        /// Relative change between ladder steps that counts as converged
        #[arg(long = "rel-tol", default_value_t = 1e-4)]
        rel_tol: f64,
    },
    /// Evaluate an observable on a one- or two-axis grid
    Sweep {
        /// Outer axis as VAR:LO:HI:POINTS[:log], VAR one of T, K_e, PF [default: T:0.01:5:100 in SL]
        #[arg(long, value_name = "AXIS")]
        x: Option<String>,
        /// Optional inner axis, same syntax
        #[arg(long, value_name = "AXIS")]
        y: Option<String>,
        /// snr, n0, n1, contrast, optimal_T, saturated_snr, saturated_T or polarization
        #[arg(long, default_value = "snr")]
        observable: String,
        /// Pulse duration when T is not swept [default: 1 SL]
        #[arg(long = "T")]
        t: Option<f64>,
        /// Pumping time for the polarization observable [default: 5 SL]
        #[arg(long)]
        pump: Option<f64>,
        /// Dark time for the polarization observable [default: 10 SL]
        #[arg(long)]
        wait: Option<f64>,
    },
    /// Regenerate the data behind a published figure (2a 2b 3a 3b 4a 4b 5a 5b)
    Figure { id: String },
    /// Monte Carlo check of the photon statistics and the estimator
    Mc {
        /// Pulse duration [default: 1 SL]
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        #[arg(long = "true-r", default_value_t = 0.5)]
        true_r: f64,
        /// Estimator batches; 0 skips the estimator check
        #[arg(long, default_value_t = 100)]
        batches: usize,
        #[arg(long = "batch-shots", default_value_t = 10_000)]
        batch_shots: u64,
    },
    /// Spin polarization left by an optical pumping sequence
    InitPol {
        /// Laser-on time [default: 5 SL]
        #[arg(long)]
        pump: Option<f64>,
        /// Dark time [default: 10 SL]
        #[arg(long)]
        wait: Option<f64>,
    },
}

/// A subcommand with every duration resolved to SL.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Snr { t: f64 },
    OptimalT { t_max: f64, tol: f64 },
    Optimize2d { pf: (f64, f64), t: (f64, f64) },
    Saturated { rel_tol: f64 },
    Sweep(Box<SweepSpec>),
    Figure(String),
    Mc(McConfig),
    InitPol(InitProtocol<f64>),
}

/// Unit handling for `--ns`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub ns: bool,
}

impl Units {
    pub fn rate(self, x: f64) -> f64 {
        if self.ns {
            x * SINGLET_LIFETIME_NS
        } else {
            x
        }
    }

    pub fn time(self, x: f64) -> f64 {
        if self.ns {
            x / SINGLET_LIFETIME_NS
        } else {
            x
        }
    }

    pub fn label(self) -> &'static str {
        if self.ns {
            "SL (inputs given in ns, 1 SL = 300 ns)"
        } else {
            "SL"
        }
    }
}

/// Fully resolved invocation: subcommand arguments converted to SL units and
/// rate overrides applied on top of the typical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub params: Params,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub verbosity: u8,
    pub units: Units,
    pub gnuplot: bool,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let g = cli.global;
        let units = Units { ns: g.ns };
        let params = resolve_params(&g, units)?;
        if g.gnuplot && g.output.is_none() {
            return Err(CliError::Usage(
                "--gnuplot needs --output so the script can reference the data file".into(),
            ));
        }
        let time = |x: Option<f64>, default: f64| x.map_or(default, |x| units.time(x));
        let seed = g.seed.unwrap_or(McConfig::default().seed);
        let task = match cli.command {
            Command::Snr { t } => Task::Snr { t: time(t, 1.0) },
            Command::OptimalT { t_max, tol } => Task::OptimalT {
                t_max: time(t_max, DEFAULT_T_MAX),
                tol: time(tol, 1e-4),
            },
            Command::Optimize2d {
                pf_min,
                pf_max,
                t_min,
                t_max,
            } => Task::Optimize2d {
                pf: (pf_min, pf_max),
                t: (time(t_min, 0.01), time(t_max, DEFAULT_T_MAX)),
            },
            Command::Saturated { rel_tol } => Task::Saturated { rel_tol },
            Command::Sweep {
                x,
                y,
                observable,
                t,
                pump,
                wait,
            } => {
                let mut axes = vec![match x {
                    Some(x) => parse_axis(&x, units)?,
                    None => Axis::linear(Variable::T, 0.01, 5.0, 100),
                }];
                if let Some(y) = y {
                    axes.push(parse_axis(&y, units)?);
                }
                let mut spec = SweepSpec::new(axes, params, observable.parse()?);
                spec.t_read = time(t, 1.0);
                spec.init = InitProtocol {
                    pump_duration: time(pump, 5.0),
                    wait_duration: time(wait, 10.0),
                };
                spec.validate()?;
                Task::Sweep(Box::new(spec))
            }
            Command::Figure { id } => {
                let fig: Figure = id.parse()?;
                Task::Figure(fig.id().to_string())
            }
            Command::Mc {
                t,
                shots,
                true_r,
                batches,
                batch_shots,
            } => {
                let cfg = McConfig {
                    seed,
                    shots,
                    true_r,
                    params,
                    t_read: time(t, 1.0),
                    batches,
                    batch_shots,
                };
                cfg.validate()?;
                Task::Mc(cfg)
            }
            Command::InitPol { pump, wait } => Task::InitPol(InitProtocol {
                pump_duration: time(pump, 5.0),
                wait_duration: time(wait, 10.0),
            }),
        };
        Ok(RunConfig {
            task,
            params,
            format: g.format,
            output: g.output,
            seed,
            verbosity: g.verbose,
            units,
            gnuplot: g.gnuplot,
        })
    }
}

fn resolve_params(g: &GlobalArgs, units: Units) -> Result<Params, CliError> {
    let model = match (g.model, g.k_m, g.alpha) {
        (Some(m), _, _) => m,
        (None, _, Some(_)) => Model::Radiative,
        (None, _, None) => Model::Nonradiative,
    };
    let mixing = match model {
        Model::Nonradiative => {
            if g.alpha.is_some() {
                return Err(CliError::Usage(
                    "--alpha applies to the radiative model only".into(),
                ));
            }
            match g.k_m {
                Some(k_m) => Mixing::NonRadiative {
                    k_m: units.rate(k_m),
                },
                None => Mixing::typical_non_radiative(),
            }
        }
        Model::Radiative => {
            if g.k_m.is_some() {
                return Err(CliError::Usage(
                    "--km applies to the non-radiative model only".into(),
                ));
            }
            Mixing::Radiative {
                alpha: g.alpha.unwrap_or(TYPICAL_ALPHA),
                count_cross_decay: true,
            }
        }
    };
    let mut p = Params::typical().with_mixing(mixing);
    if let Some(x) = g.k_e {
        p.k_e = units.rate(x);
    }
    if let Some(x) = g.k_f0 {
        p.k_f0 = units.rate(x);
    }
    if let Some(x) = g.pf {
        p.pf = x;
    }
    if let Some(x) = g.k_s {
        p.k_s = units.rate(x);
    }
    if let Some(x) = g.k_0 {
        p.k_0 = units.rate(x);
    }
    p.validate()?;
    Ok(p)
}

/// Parses `VAR:LO:HI:POINTS[:log|:linear]`.
pub fn parse_axis(s: &str, units: Units) -> Result<Axis, CliError> {
    let bad = || CliError::Usage(format!("bad axis `{s}`, expected VAR:LO:HI:POINTS[:log]"));
    let parts: Vec<&str> = s.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(bad());
    }
    let variable: Variable = parts[0].parse()?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let (mut lo, mut hi) = (num(parts[1])?, num(parts[2])?);
    let points: usize = parts[3].trim().parse().map_err(|_| bad())?;
    let scale = match parts.get(4).map(|x| x.trim().to_ascii_lowercase()) {
        None => Scale::Linear,
        Some(x) if x == "linear" || x == "lin" => Scale::Linear,
        Some(x) if x == "log" => Scale::Log,
        Some(_) => return Err(bad()),
    };
    match variable {
        Variable::T => (lo, hi) = (units.time(lo), units.time(hi)),
        Variable::Ke => (lo, hi) = (units.rate(lo), units.rate(hi)),
        Variable::Pf => {}
    }
    Ok(Axis {
        variable,
        lo,
        hi,
        points,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn config(args: &[&str]) -> Result<RunConfig, CliError> {
        RunConfig::from_cli(
            Cli::try_parse_from(std::iter::once("nv-readout").chain(args.iter().copied())).unwrap(),
        )
    }

    #[test]
    fn axis_syntax() {
        let sl = Units { ns: false };
        let a = parse_axis("K_e:1:100:20:log", sl).unwrap();
        assert_eq!(
            (a.variable, a.lo, a.hi, a.points, a.scale),
            (Variable::Ke, 1.0, 100.0, 20, Scale::Log)
        );
        assert_eq!(parse_axis("pf:1:2:3", sl).unwrap().scale, Scale::Linear);
        for bad in [
            "T:1:2",
            "T:a:2:3",
            "X:1:2:3",
            "T:1:2:3:cubic",
            "T:1:2:3:log:9",
        ] {
            assert!(parse_axis(bad, sl).is_err(), "{bad}");
        }
        let ns = parse_axis("T:300:600:2", Units { ns: true }).unwrap();
        assert_eq!((ns.lo, ns.hi), (1.0, 2.0));
    }

    #[test]
    fn overrides_apply_on_typical_rates() {
        let c = config(&["snr", "--pf", "3", "--ks", "10"]).unwrap();
        assert_eq!(
            c.params,
            Params {
                k_s: 10.0,
                ..Params::typical().with_pf(3.0)
            }
        );
        assert_eq!(c.task, Task::Snr { t: 1.0 });
    }

    #[test]
    fn alpha_implies_radiative_model() {
        let c = config(&["snr", "--alpha", "0.05"]).unwrap();
        assert_eq!(
            c.params.mixing,
            Mixing::Radiative {
                alpha: 0.05,
                count_cross_decay: true
            }
        );
        assert!(config(&["snr", "--model", "radiative", "--km", "1"]).is_err());
    }

    #[test]
    fn ns_converts_rates_and_times() {
        let c = config(&["mc", "--ns", "--T", "600", "--k0", "0.01"]).unwrap();
        let Task::Mc(mc) = c.task else { panic!() };
        assert_eq!(mc.t_read, 2.0);
        assert_eq!(c.params.k_0, 3.0);
    }
}
