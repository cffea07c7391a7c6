//! Command-line front end: configuration merging, experiment dispatch, and
//! CSV/JSON emission.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{bloch_trajectory, solid_angle, Subsystem};
use crate::cphase::{build_cphase_timeline, gate_report, GateParams};
use crate::experiments::{
    geometry_baseline, run_constrained_scenario, run_geometry_perturbation, run_noise_sweep,
    run_rise_decay_sweep, simulate_gate, write_geometry_csv, write_noise_csv, write_rise_csv,
    ExperimentConfig, ExperimentReport,
};
use crate::model::DeviceModel;
use crate::propagate::{propagate_exact_segments, propagate_timeline, project_qubit_subspace};
use crate::schedule::{Channel, ControlTimeline, Pulse};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "dotphase",
    version,
    about = "Simulator for a three-dot charge-qubit architecture and its four-step controlled-phase gate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integrator step (dimensionless time units)
    #[arg(long)]
    dt: Option<f64>,
    /// Master seed for all derived per-trial seeds
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep point
    #[arg(long)]
    trials: Option<usize>,
    /// Pulse rise/decay time
    #[arg(long = "tau-s")]
    tau_s: Option<f64>,
    /// Rise-time grid for sweep-rise (comma separated)
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Noise magnitudes (comma separated)
    #[arg(long, value_delimiter = ',')]
    eta0: Option<Vec<f64>>,
    /// Noise corner frequencies (comma separated)
    #[arg(long, value_delimiter = ',')]
    omega0: Option<Vec<f64>>,
    /// Minimum realizable pulse duration, in ps
    #[arg(long = "tau-min-ps")]
    tau_min_ps: Option<f64>,
    /// Maximum realizable tunnelling rate, in rad/s
    #[arg(long = "mu-max-radps")]
    mu_max_radps: Option<f64>,
    /// Effective auxiliary-pair coupling, in meV
    #[arg(long = "gamma-eff-mev")]
    gamma_eff_mev: Option<f64>,
    /// Geometry half-distance a (nm)
    #[arg(long)]
    a: Option<f64>,
    /// Geometry half-distance b (nm)
    #[arg(long)]
    b: Option<f64>,
    /// Geometry half-distance c (nm)
    #[arg(long)]
    c: Option<f64>,
    /// Output file (CSV for sweeps, JSON otherwise); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Phase index n of the step-2 schedule
    #[arg(long, default_value_t = 1)]
    n: u64,
    /// Phase index k of the step-2 schedule
    #[arg(long, default_value_t = 1)]
    k: u64,
    /// Use the rise/decay-corrected schedule
    #[arg(long)]
    corrected: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the ideal square-pulse gate and print its fidelity
    Ideal(CommonOpts),
    /// Sweep the pulse rise/decay time (uncorrected vs corrected errors)
    SweepRise(CommonOpts),
    /// Solve and simulate the gate under duration/rate constraints
    Constrained(CommonOpts),
    /// Sweep 1/f control noise magnitudes and corner frequencies
    Noise(CommonOpts),
    /// Monte Carlo over lattice-site dot position disorder
    Geometry(CommonOpts),
    /// Export the step-2 Bloch trajectories and their solid angles
    Bloch(CommonOpts),
    /// Export the sampled control timeline of one gate
    Timeline(CommonOpts),
}

impl CommonOpts {
    /// Config-file values first, then explicit flags on top.
    fn build_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.tau_s {
            cfg.tau_s = v;
        }
        if let Some(v) = &self.taus {
            cfg.tau_s_grid = v.clone();
        }
        if let Some(v) = &self.eta0 {
            cfg.eta0_grid = v.clone();
        }
        if let Some(v) = &self.omega0 {
            cfg.omega0_grid = v.clone();
        }
        if self.tau_min_ps.is_some() {
            cfg.tau_min_ps = self.tau_min_ps;
        }
        if self.mu_max_radps.is_some() {
            cfg.mu_max_radps = self.mu_max_radps;
        }
        if let Some(v) = self.gamma_eff_mev {
            cfg.gamma_eff_mev = v;
        }
        if let Some(v) = self.a {
            cfg.a_nm = v;
        }
        if let Some(v) = self.b {
            cfg.b_nm = v;
        }
        if let Some(v) = self.c {
            cfg.c_nm = v;
        }
        Ok(cfg)
    }

    fn gate(&self, cfg: &ExperimentConfig) -> Result<GateParams> {
        GateParams::new(self.n, self.k)?.with_smoothing(cfg.tau_s, self.corrected)
    }

    fn write_output(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, bytes)?,
            None => std::io::stdout().write_all(bytes)?,
        }
        Ok(())
    }
}

fn report_summary(report: &ExperimentReport) -> String {
    let mut s = format!("{}: {} records", report.kind, report.records.len());
    if let Some(f) = &report.fidelity_stats {
        s += &format!(
            ", F mean {:.6} min {:.6} max {:.6}",
            f.mean, f.min, f.max
        );
    }
    if let Some(e) = &report.error_stats {
        s += &format!(", E mean {:.3e} max {:.3e}", e.mean, e.max);
    }
    if report.resampled_trials > 0 {
        s += &format!(", {} resampled draws", report.resampled_trials);
    }
    s
}

fn run_ideal(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let p = GateParams::new(opts.n, opts.k)?;
    let tl = build_cphase_timeline(&p)?;
    let dev = DeviceModel::ideal();
    let u = propagate_exact_segments(&tl, &dev)?;
    let projected = project_qubit_subspace(&u);
    let fid = simulate_gate(&p, &dev, cfg.dt, None)?;

    let mut out = format!("F = {:.6}\n", fid.fidelity);
    out += &format!("leakage = {:.3e}\n", fid.leakage);
    for (i, label) in ["11", "12", "21", "22"].iter().enumerate() {
        out += &format!(
            "phase(|{label}>) = {:+.6} rad\n",
            projected[(i, i)].arg()
        );
    }
    let report = serde_json::json!({
        "fidelity": fid,
        "gate": gate_report(&p, 1.0)?,
        "phases": (0..4).map(|i| projected[(i, i)].arg()).collect::<Vec<_>>(),
    });
    opts.write_output(format!("{:#}\n", report).as_bytes())?;
    Ok(out)
}

fn run_sweep_rise(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let report = run_rise_decay_sweep(&cfg)?;
    let mut csv = Vec::new();
    write_rise_csv(&report, &mut csv)?;
    opts.write_output(&csv)?;
    Ok(report_summary(&report))
}

fn run_constrained(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let scenario = run_constrained_scenario(&cfg)?;
    opts.write_output(format!("{}\n", serde_json::to_string_pretty(&scenario)?).as_bytes())?;
    Ok(format!(
        "n = {}, k = {}, total {:.2} ps, simulated F = {:.6}",
        scenario.gate.n, scenario.gate.k, scenario.nominal_total_ps, scenario.simulated_fidelity
    ))
}

fn run_noise(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let report = run_noise_sweep(&cfg)?;
    let mut csv = Vec::new();
    write_noise_csv(&report, &mut csv)?;
    opts.write_output(&csv)?;
    Ok(report_summary(&report))
}

fn run_geometry(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let baseline = geometry_baseline(&cfg)?;
    let report = run_geometry_perturbation(&cfg)?;
    let mut csv = Vec::new();
    write_geometry_csv(&report, &mut csv)?;
    opts.write_output(&csv)?;
    Ok(format!(
        "baseline F = {:.6}; {}",
        baseline.fidelity,
        report_summary(&report)
    ))
}

fn run_bloch(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let p = GateParams::new(opts.n, opts.k)?;
    let pulses = vec![
        Pulse::new(Channel::energy(1, 2), 0.0, p.tau2, 0.5, 0.0)?,
        Pulse::new(Channel::tunnel(1, 2, 3), 0.0, p.tau2, p.mu23_1, 0.0)?,
    ];
    let tl = ControlTimeline::new(pulses, p.tau2)?;
    let result = propagate_timeline(
        &tl,
        &DeviceModel::ideal(),
        cfg.dt,
        &[Subsystem::S1.initial_state(), Subsystem::S2.initial_state()],
    )?;

    let mut csv = String::from("t,s_x,s_y,s_z,norm,subsystem\n");
    let mut summary = String::new();
    for subsystem in [Subsystem::S1, Subsystem::S2] {
        let traj = bloch_trajectory(&result, subsystem)?;
        let omega = solid_angle(&traj)?;
        summary += &format!("{}: solid angle {:.4} sr\n", subsystem.label(), omega);
        for s in &traj.samples {
            csv += &format!(
                "{:.6},{:.12},{:.12},{:.12},{:.12},{}\n",
                s.t,
                s.s[0],
                s.s[1],
                s.s[2],
                s.norm,
                subsystem.label()
            );
        }
    }
    opts.write_output(csv.as_bytes())?;
    Ok(summary.trim_end().to_string())
}

fn run_timeline(opts: &CommonOpts) -> Result<String> {
    let cfg = opts.build_config()?;
    let p = opts.gate(&cfg)?;
    let tl = build_cphase_timeline(&p)?;
    let mut csv = Vec::new();
    tl.export_csv(&mut csv, cfg.dt)?;
    opts.write_output(&csv)?;
    Ok(format!(
        "{} pulses over {:.4} time units on {} channels",
        tl.pulses().len(),
        tl.total_duration(),
        tl.channels().len()
    ))
}

/// Parses `argv` (including the program name), runs the chosen subcommand,
/// prints a summary to stdout, and returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders both --help output and usage errors
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Ideal(o) => run_ideal(o),
        Command::SweepRise(o) => run_sweep_rise(o),
        Command::Constrained(o) => run_constrained(o),
        Command::Noise(o) => run_noise(o),
        Command::Geometry(o) => run_geometry(o),
        Command::Bloch(o) => run_bloch(o),
        Command::Timeline(o) => run_timeline(o),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
