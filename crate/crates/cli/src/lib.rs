//! Command-line front end for `nv-readout`.
//!
//! [`main_with`] parses arguments, runs one subcommand and writes the result
//! as JSON or CSV. Exit codes: 0 success, 1 usage error, 2 numerical or
//! convergence failure.

pub mod args;
pub mod output;

use std::ffi::OsString;
use std::path::Path;
use std::time::Instant;
use std::{env, fs, io};

use clap::{CommandFactory, Parser};
use nv_readout::{
    init_polarization, optimal_pf_t, optimal_t, readout_stats, reproduce_figure, run_mc, run_sweep,
    saturated_snr, Error, Figure, Optimum, SweepTable, Tolerances,
};
use serde::Serialize;

pub use args::{Cli, Format, RunConfig, Task, Units};
use output::{Envelope, InitPolBody, OptimumBody, SnrBody};

pub const THREADS_ENV: &str = "NV_READOUT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("cannot serialize output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if !e.is_usage() => 2,
            CliError::Json(_) => 2,
            _ => 1,
        }
    }
}

/// Rendered result plus whether the run should still be reported as failed
/// (unconverged optimum, failed sweep cells).
pub struct Rendered {
    pub text: String,
    pub table: Option<SweepTable>,
    pub failure: Option<String>,
}

pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            eprintln!("\n{}", Cli::command().render_help());
            return 1;
        }
    };
    match configure_threads()
        .and_then(|()| RunConfig::from_cli(cli))
        .and_then(|cfg| execute(&cfg))
    {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 1 {
                eprintln!("\n{}", Cli::command().render_help());
            }
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if n > 0 {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Runs the configured task and writes its output; returns the exit code.
pub fn execute(cfg: &RunConfig) -> Result<i32, CliError> {
    let start = Instant::now();
    let rendered = render(cfg)?;
    if cfg.verbosity > 0 {
        eprintln!(
            "{:?} finished in {:.3} s on {} threads",
            cfg.task,
            start.elapsed().as_secs_f64(),
            rayon::current_num_threads()
        );
    }
    match &cfg.output {
        Some(path) => {
            fs::write(path, &rendered.text)?;
            if cfg.gnuplot {
                write_gnuplot(path, rendered.table.as_ref())?;
            }
        }
        None => print!("{}", rendered.text),
    }
    match rendered.failure {
        Some(msg) => {
            eprintln!("error: {msg}");
            Ok(2)
        }
        None => Ok(0),
    }
}

fn write_gnuplot(data: &Path, table: Option<&SweepTable>) -> Result<(), CliError> {
    let table = table.ok_or_else(|| {
        CliError::Usage("--gnuplot is only available for sweep and figure".into())
    })?;
    let name = data
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage("output path has no usable file name".into()))?;
    fs::write(
        data.with_extension("gp"),
        output::gnuplot_script(table, name),
    )?;
    Ok(())
}

/// Computes the result for `cfg` and renders it in the requested format.
pub fn render(cfg: &RunConfig) -> Result<Rendered, CliError> {
    let p = cfg.params;
    let units = cfg.units.label();
    let record = |command: &str, body: &dyn ErasedBody| -> Result<Rendered, CliError> {
        let text = match cfg.format.unwrap_or(Format::Json) {
            Format::Json => body.json(command, units, p)?,
            Format::Csv => body.csv(command, units, p)?,
        };
        Ok(Rendered {
            text,
            table: None,
            failure: None,
        })
    };
    match &cfg.task {
        Task::Snr { t } => {
            let readout = readout_stats(&p, *t)?;
            record("snr", &SnrBody { t: *t, readout })
        }
        Task::OptimalT { t_max, tol } => {
            let o = optimal_t(&p, *t_max, *tol)?;
            optimum(record("optimal-t", &body(&o))?, &o)
        }
        Task::Optimize2d { pf, t } => {
            let o = optimal_pf_t(&p, *pf, *t, &Tolerances::default())?;
            optimum(record("optimize-2d", &body(&o))?, &o)
        }
        Task::Saturated { rel_tol } => {
            let tol = Tolerances {
                saturation: *rel_tol,
                ..Tolerances::default()
            };
            let o = saturated_snr(&p, p.pf, &tol)?;
            optimum(record("saturated", &body(&o))?, &o)
        }
        Task::Sweep(spec) => match run_sweep(spec) {
            Ok(t) => table(cfg, "sweep", spec.params, t, None),
            Err(Error::SweepFailed {
                failed,
                total,
                table: t,
            }) => table(
                cfg,
                "sweep",
                spec.params,
                *t,
                Some(format!("{failed} of {total} sweep cells failed")),
            ),
            Err(e) => Err(e.into()),
        },
        Task::Figure(id) => {
            let fig: Figure = id.parse()?;
            table(
                cfg,
                &format!("figure {id}"),
                fig.spec().params,
                reproduce_figure(id)?,
                None,
            )
        }
        Task::Mc(mc) => record("mc", &run_mc(mc)?),
        Task::InitPol(proto) => {
            let polarization = init_polarization(&p, proto.pump_duration, proto.wait_duration)?;
            record(
                "init-pol",
                &InitPolBody {
                    pump_duration: proto.pump_duration,
                    wait_duration: proto.wait_duration,
                    polarization,
                },
            )
        }
    }
}

fn body(o: &Optimum<f64>) -> OptimumBody {
    OptimumBody {
        pf: o.arg("PF"),
        t: o.arg("T").unwrap_or(f64::NAN),
        snr: o.value,
        evaluations: o.evaluations,
        converged: o.converged,
        flat: o.flat,
        ladder: o.ladder.clone(),
    }
}

fn optimum(mut r: Rendered, o: &Optimum<f64>) -> Result<Rendered, CliError> {
    if !o.converged {
        r.failure = Some(if o.flat {
            "objective is flat over the search range; no optimum".into()
        } else {
            "optimizer did not reach the requested tolerance".into()
        });
    }
    Ok(r)
}

fn table(
    cfg: &RunConfig,
    command: &str,
    params: nv_readout::Params,
    t: SweepTable,
    failure: Option<String>,
) -> Result<Rendered, CliError> {
    let env = Envelope::new(command, cfg.units.label(), params, t);
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => output::table_csv(&env),
        Format::Json => output::json(&env)?,
    };
    Ok(Rendered {
        text,
        table: Some(env.body),
        failure,
    })
}

/// Lets `render` treat the differently typed record bodies uniformly.
trait ErasedBody {
    fn json(
        &self,
        command: &str,
        units: &str,
        params: nv_readout::Params,
    ) -> Result<String, CliError>;
    fn csv(
        &self,
        command: &str,
        units: &str,
        params: nv_readout::Params,
    ) -> Result<String, CliError>;
}

impl<B: Serialize + Clone> ErasedBody for B {
    fn json(
        &self,
        command: &str,
        units: &str,
        params: nv_readout::Params,
    ) -> Result<String, CliError> {
        Ok(output::json(&Envelope::new(
            command,
            units,
            params,
            self.clone(),
        ))?)
    }

    fn csv(
        &self,
        command: &str,
        units: &str,
        params: nv_readout::Params,
    ) -> Result<String, CliError> {
        Ok(output::record_csv(&Envelope::new(
            command,
            units,
            params,
            self.clone(),
        ))?)
    }
}
