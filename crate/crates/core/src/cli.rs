//! Command-line front end: `simulate`, `mc`, `emit-spice`, `analytic`.
//!
//! Exit codes: 0 success, 1 bad input (arguments, circuit file), 2 runtime
//! failure (integration, emission, output).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::master::{
    linspace, solve_dc, solve_transient, ProbabilityVector, TransientOptions, DEFAULT_SAMPLES, DEFAULT_TOL,
};
use crate::mcsim::{mc_ensemble, EnsembleOptions, Sampler};
use crate::netdsl::{parse_circuit, CircuitSpec, Waveform};
use crate::observables::{closed_form_chain_length, switching_time_stages, ObservableSeries};
use crate::spicegen::{emit_ltspice, TranSettings};
use crate::statespace::{enumerate_states, lump_states, StateSpace};

#[derive(Debug, Parser)]
#[command(name = "memnet", version, about = "Probabilistic memristor network simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the master equation and write probabilities and observables as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo ensemble of switching histories.
    Mc(McArgs),
    /// Write an LTspice netlist implementing the master equation.
    EmitSpice(SpiceArgs),
    /// Closed-form mean switching time of identical binary devices in series.
    Analytic(AnalyticArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Circuit description (.mn)
    pub circuit: PathBuf,
    /// Output file (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the sine source frequency, Hz
    #[arg(long)]
    pub freq: Option<f64>,
    /// Keep every configuration instead of merging interchangeable devices
    #[arg(long)]
    pub full_space: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulated time, seconds
    #[arg(long)]
    pub tstop: f64,
    /// Local error tolerance of the time-varying solver
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Output rows, both ends included
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulated time, seconds
    #[arg(long)]
    pub tstop: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed time step for time-varying drive (default: tstop / 10^5)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Report rows, both ends included
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SpiceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Transient length (default: 20 periods for sine drive, 1 ms for dc)
    #[arg(long)]
    pub tstop: Option<f64>,
    /// Start of recorded output (default: half of tstop for sine, 0 for dc)
    #[arg(long)]
    pub tstart: Option<f64>,
    /// Maximum transient step (default: tstop / 10^5)
    #[arg(long)]
    pub max_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    /// Circuit description (.mn)
    pub circuit: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
        Command::EmitSpice(a) => cmd_emit_spice(a),
        Command::Analytic(a) => cmd_analytic(a),
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn load(common: &Common) -> Result<CircuitSpec> {
    let text = std::fs::read_to_string(&common.circuit)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", common.circuit.display())))?;
    let mut spec = parse_circuit(&text)?;
    if let Some(f) = common.freq {
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Input(format!("--freq must be positive, got {f}")));
        }
        if spec.source.is_dc() {
            return Err(Error::Input("--freq needs a sine source".into()));
        }
        spec.source = spec.source.with_frequency(f);
    }
    Ok(spec)
}

fn space_for(spec: &CircuitSpec, full_space: bool) -> Result<StateSpace> {
    let full = enumerate_states(spec)?;
    Ok(if full_space { full } else { lump_states(&full, spec) })
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be positive, got {x}")))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Output(format!("{}: {e}", p.display()))),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            // reader went away (e.g. `| head`): nothing left to deliver
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(|e| Error::Output(e.to_string())),
        },
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    positive("--tstop", a.tstop)?;
    positive("--tol", a.tol)?;
    if a.samples < 2 {
        return Err(Error::Input("--samples must be at least 2".into()));
    }
    let spec = load(&a.common)?;
    let space = space_for(&spec, a.common.full_space)?;
    let p0 = ProbabilityVector::initial(&space, &spec);
    let traj = match spec.source {
        Waveform::Dc { amplitude } => solve_dc(&space, amplitude, &p0, &linspace(a.tstop, a.samples))?,
        wave => solve_transient(
            &space,
            &wave,
            &p0,
            a.tstop,
            &TransientOptions { tol: a.tol, samples: a.samples, ..Default::default() },
        )?,
    };
    let obs = ObservableSeries::from_trajectory(&traj, &space);
    let mut csv = String::new();
    let _ = writeln!(csv, "t,{},V_source,I_mean,T_accum", space.labels().join(","));
    for k in 0..traj.len() {
        let mut row = vec![format_number(traj.times[k])];
        row.extend(traj.probabilities[k].0.iter().map(|p| format_number(*p)));
        row.push(format_number(obs.source_voltage[k]));
        row.push(format_number(obs.mean_current[k]));
        row.push(format_number(obs.switch_time_accumulator[k]));
        let _ = writeln!(csv, "{}", row.join(","));
    }
    emit(a.common.out.as_deref(), &csv)
}

fn cmd_mc(a: &McArgs) -> Result<()> {
    positive("--tstop", a.tstop)?;
    if a.trials == 0 {
        return Err(Error::Input("--trials must be at least 1".into()));
    }
    if a.samples < 2 {
        return Err(Error::Input("--samples must be at least 2".into()));
    }
    let spec = load(&a.common)?;
    let sampler = match (spec.source, a.dt) {
        (Waveform::Dc { .. }, None) => Sampler::Gillespie,
        (_, dt) => {
            let dt = dt.unwrap_or(a.tstop / 1e5);
            positive("--dt", dt)?;
            Sampler::FixedStep { dt }
        }
    };
    let opts = EnsembleOptions {
        trials: a.trials,
        seed: a.seed,
        report_times: linspace(a.tstop, a.samples),
        sampler,
        full_space: a.common.full_space,
    };
    let stats = mc_ensemble(&spec, &spec.source, &opts)?;
    let mut csv = String::new();
    let _ = writeln!(csv, "t,{},I_mean,I_stderr", stats.labels.join(","));
    for k in 0..stats.report_times.len() {
        let mut row = vec![format_number(stats.report_times[k])];
        row.extend(stats.empirical_p[k].iter().map(|p| format_number(*p)));
        row.push(format_number(stats.mean_current[k]));
        row.push(format_number(stats.current_stderr[k]));
        let _ = writeln!(csv, "{}", row.join(","));
    }
    emit(a.common.out.as_deref(), &csv)?;
    if spec.source.is_dc() {
        let (mean, se, n) = stats.switching_time_summary();
        eprintln!(
            "switching time: mean {} s, stderr {} s ({n} of {} trials reached all-on)",
            format_number(mean),
            format_number(se),
            stats.trials
        );
    }
    Ok(())
}

fn cmd_emit_spice(a: &SpiceArgs) -> Result<()> {
    let spec = load(&a.common)?;
    let (t_stop, t_start) = match spec.source {
        Waveform::Sine { frequency, .. } => {
            let t_stop = a.tstop.unwrap_or(20.0 / frequency);
            (t_stop, a.tstart.unwrap_or(t_stop / 2.0))
        }
        Waveform::Dc { .. } => (a.tstop.unwrap_or(1e-3), a.tstart.unwrap_or(0.0)),
    };
    positive("--tstop", t_stop)?;
    let max_step = a.max_step.unwrap_or(t_stop / 1e5);
    positive("--max-step", max_step)?;
    if !(t_start >= 0.0 && t_start < t_stop) {
        return Err(Error::Input(format!("--tstart must lie in [0, tstop), got {t_start}")));
    }
    let space = space_for(&spec, a.common.full_space)?;
    let title = a.common.circuit.file_name().map(|n| n.to_string_lossy().into_owned());
    let doc = emit_ltspice(&space, &spec, &spec.source, &TranSettings { t_stop, t_start, max_step }, title.as_deref())?;
    emit(a.common.out.as_deref(), &doc.text())
}

fn cmd_analytic(a: &AnalyticArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.circuit)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", a.circuit.display())))?;
    let spec = parse_circuit(&text)?;
    let Waveform::Dc { amplitude } = spec.source else {
        return Err(Error::Unsupported("closed form needs a dc source".into()));
    };
    let n = closed_form_chain_length(&spec)?;
    let stages = switching_time_stages(n, spec.instance_model(0), amplitude)?;
    let total: f64 = stages.iter().sum();
    let mut report = String::new();
    let _ = writeln!(report, "N = {n}, V = {} V", format_number(amplitude));
    for (j, s) in stages.iter().enumerate() {
        let _ = writeln!(report, "stage {j}: {} s", format_number(*s));
    }
    if total.is_finite() {
        let _ = writeln!(report, "mean switching time: {} s", format_number(total));
    } else {
        let _ = writeln!(report, "mean switching time: inf (no finite switching: zero rates)");
    }
    emit(a.out.as_deref(), &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1e-4), "0.0001");
        assert_eq!(format_number(1.255884164659193e-4), "0.0001255884164659193");
        assert_eq!(format_number(1e-6), "1e-6");
        assert_eq!(format_number(-2.5e-9), "-2.5e-9");
        assert_eq!(format_number(3e20), "3e20");
        for x in [1.0 / 3.0, 6.183460867315673e-4, 1e-300, 7.5e-4] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn argument_errors_exit_one() {
        assert_eq!(run(["memnet"]), 1);
        assert_eq!(run(["memnet", "simulate", "x.mn"]), 1);
        assert_eq!(run(["memnet", "frobnicate"]), 1);
        assert_eq!(run(["memnet", "--help"]), 0);
        assert_eq!(run(["memnet", "simulate", "/nonexistent.mn", "--tstop", "1"]), 1);
    }
}
