//! Seeded, reproducible experiment drivers: rise/decay error sweep,
//! constrained-scheduling scenarios, control-noise robustness, and the
//! geometry-perturbation Monte Carlo.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{average_gate_fidelity, FidelityReport};
use crate::cphase::{
    build_cphase_timeline, gate_report, select_gate_params, target_unitary, GateParams,
    GateParamsReport,
};
use crate::model::{dot_positions, DeviceModel, Geometry3D, HBAR_MEV_PS};
use crate::propagate::{propagate_exact_segments, propagate_timeline};
use crate::schedule::derive_seed;
use crate::{Error, Result};

/// Everything needed to rerun an experiment: numerical settings, the master
/// seed, trial counts, sweep grids, and the device geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dt: f64,
    pub seed: u64,
    pub trials: usize,
    /// Rise/decay time of the corrected reference gate used by the noise and
    /// geometry studies.
    pub tau_s: f64,
    pub tau_s_grid: Vec<f64>,
    pub eta0_grid: Vec<f64>,
    pub omega0_grid: Vec<f64>,
    pub tau_min_ps: Option<f64>,
    pub mu_max_radps: Option<f64>,
    pub gamma_eff_mev: f64,
    pub a_nm: f64,
    pub b_nm: f64,
    pub c_nm: f64,
    pub eps_r: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            seed: 20240,
            trials: 10,
            tau_s: 1.0,
            tau_s_grid: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            eta0_grid: vec![0.1],
            omega0_grid: vec![50.0],
            tau_min_ps: None,
            mu_max_radps: None,
            gamma_eff_mev: 0.718,
            a_nm: 20.0,
            b_nm: 90.0,
            c_nm: 10.0,
            eps_r: 11.8,
        }
    }
}

impl ExperimentConfig {
    fn validate_common(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive: {}", self.dt)));
        }
        if self.trials == 0 {
            return Err(Error::config("trial count must be at least 1"));
        }
        Ok(())
    }
}

/// The n = k = 1 gate used throughout the sweep studies, with unhurried
/// local steps (`mu23_2 = 1/4` and `tau4 = 2 pi`, matching the `tau2 = 2 pi`
/// core step) so that rise/decay times up to 1.5 still leave each pulse a
/// plateau and the step-2 distortion dominates the uncorrected error.
pub fn reference_gate(tau_s: f64, corrected: bool) -> Result<GateParams> {
    GateParams::new(1, 1)?
        .with_swap_rate(0.25)?
        .with_tau4(2.0 * PI)?
        .with_smoothing(tau_s, corrected)
}

/// The plain n = k = 1 gate (default step durations) used by the noise and
/// geometry studies, where a short total duration limits the exposure to
/// Hamiltonian perturbations just as the original schedule intends.
pub fn study_gate(tau_s: f64, corrected: bool) -> Result<GateParams> {
    GateParams::new(1, 1)?.with_smoothing(tau_s, corrected)
}

/// Builds, optionally perturbs with noise, and propagates one gate,
/// returning its fidelity report. Ideal square schedules without noise are
/// propagated exactly; smoothed or noisy ones use the fixed-step integrator.
pub fn simulate_gate(
    p: &GateParams,
    dev: &DeviceModel,
    dt: f64,
    noise: Option<(f64, f64, u64)>,
) -> Result<FidelityReport> {
    let mut tl = build_cphase_timeline(p)?;
    let has_noise = match noise {
        Some((eta0, omega0, seed)) if eta0 > 0.0 => {
            tl.apply_noise(eta0, omega0, seed, dt)?;
            true
        }
        _ => false,
    };
    let u = if p.tau_s == 0.0 && !has_noise {
        propagate_exact_segments(&tl, dev)?
    } else {
        propagate_timeline(&tl, dev, dt, &[])?.unitary
    };
    Ok(average_gate_fidelity(&u, &target_unitary()))
}

/// One simulated gate within an experiment. Failed rows (for example an
/// infeasible rise time) keep their parameters and carry a note instead of
/// results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub fidelity: Option<f64>,
    pub error: Option<f64>,
    pub leakage: Option<f64>,
    pub wall_time_s: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
}

/// Sample statistics (stddev with the n-1 denominator, 0 for single values).
pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(Aggregate {
        count: values.len(),
        mean,
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        stddev: var.sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub fidelity_stats: Option<Aggregate>,
    pub error_stats: Option<Aggregate>,
    /// Number of geometry draws rejected and redrawn for dot overlap.
    pub resampled_trials: u64,
}

impl ExperimentReport {
    fn assemble(
        kind: &str,
        config: ExperimentConfig,
        mut records: Vec<TrialRecord>,
        resampled_trials: u64,
    ) -> Self {
        records.sort_by_key(|r| r.trial);
        let fs: Vec<f64> = records.iter().filter_map(|r| r.fidelity).collect();
        let es: Vec<f64> = records.iter().filter_map(|r| r.error).collect();
        Self {
            kind: kind.to_string(),
            config,
            records,
            fidelity_stats: aggregate(&fs),
            error_stats: aggregate(&es),
            resampled_trials,
        }
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }
}

fn record(
    trial: u64,
    seed: u64,
    params: BTreeMap<String, f64>,
    outcome: Result<FidelityReport>,
    started: Instant,
) -> TrialRecord {
    let wall_time_s = started.elapsed().as_secs_f64();
    match outcome {
        Ok(r) => TrialRecord {
            trial,
            seed,
            params,
            fidelity: Some(r.fidelity),
            error: Some(r.error),
            leakage: Some(r.leakage),
            wall_time_s,
            note: None,
        },
        Err(e) => TrialRecord {
            trial,
            seed,
            params,
            fidelity: None,
            error: None,
            leakage: None,
            wall_time_s,
            note: Some(e.to_string()),
        },
    }
}

/// Uncorrected and corrected gate errors across the rise/decay grid. Each
/// grid point yields two records distinguished by the `corrected` parameter.
pub fn run_rise_decay_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate_common()?;
    if cfg.tau_s_grid.is_empty() {
        return Err(Error::config("rise/decay sweep needs a non-empty tau_s grid"));
    }
    let dev = DeviceModel::ideal();
    let tasks: Vec<(usize, f64, bool)> = cfg
        .tau_s_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &tau_s)| [(2 * i, tau_s, false), (2 * i + 1, tau_s, true)])
        .collect();
    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(idx, tau_s, corrected)| {
            let started = Instant::now();
            let params = BTreeMap::from([
                ("tau_s".to_string(), tau_s),
                ("corrected".to_string(), corrected as u8 as f64),
            ]);
            let outcome = reference_gate(tau_s, corrected)
                .and_then(|p| simulate_gate(&p, &dev, cfg.dt, None));
            record(idx as u64, cfg.seed, params, outcome, started)
        })
        .collect();
    Ok(ExperimentReport::assemble("rise_decay_sweep", cfg.clone(), records, 0))
}

/// `(tau_s, E_u, E_c)` rows for the rise/decay sweep; failed rows are blank.
pub fn write_rise_csv<W: Write>(report: &ExperimentReport, mut writer: W) -> Result<()> {
    if report.kind != "rise_decay_sweep" {
        return Err(Error::config(format!(
            "expected a rise_decay_sweep report, got {}",
            report.kind
        )));
    }
    writeln!(
        writer,
        "# config seed={} dt={} grid={:?}",
        report.config.seed, report.config.dt, report.config.tau_s_grid
    )?;
    writeln!(writer, "tau_s,E_u,E_c")?;
    for pair in report.records.chunks(2) {
        let tau_s = pair[0].params["tau_s"];
        let fmt = |r: &TrialRecord| r.error.map(|e| e.to_string()).unwrap_or_default();
        writeln!(writer, "{tau_s},{},{}", fmt(&pair[0]), fmt(&pair[1]))?;
    }
    Ok(())
}

/// One constrained-scheduling scenario under the rounded 1 ps time-unit
/// convention (constraints in ps and rad/s map one-to-one onto
/// dimensionless units).
#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedScenario {
    pub tau_min_ps: Option<f64>,
    pub mu_max_radps: Option<f64>,
    pub gamma_eff_mev: f64,
    /// Conversion used for the reported figures (rounded convention).
    pub time_unit_ps: f64,
    /// hbar / gamma_eff, for reference.
    pub exact_time_unit_ps: f64,
    pub nominal_total_time_units: f64,
    pub nominal_total_ps: f64,
    /// Total with arbitrarily fast local steps, when unconstrained.
    pub fast_local_total_ps: Option<f64>,
    pub simulated_fidelity: f64,
    pub simulated_leakage: f64,
    pub gate: GateParamsReport,
}

pub fn run_constrained_scenario(cfg: &ExperimentConfig) -> Result<ConstrainedScenario> {
    cfg.validate_common()?;
    if !(cfg.gamma_eff_mev > 0.0) {
        return Err(Error::config(format!(
            "gamma_eff must be positive: {}",
            cfg.gamma_eff_mev
        )));
    }
    let time_unit_ps = 1.0;
    let tau_min = cfg.tau_min_ps.map(|t| t / time_unit_ps);
    let mu_max = cfg.mu_max_radps.map(|m| m * time_unit_ps * 1e-12);
    let mut p = select_gate_params(tau_min, mu_max)?;
    let nominal_total: f64 = p.step_durations().iter().sum();

    // Correct for rise/decay when the configured tau_s fits the schedule.
    let min_step = p.step_durations().iter().cloned().fold(f64::INFINITY, f64::min);
    if cfg.tau_s > 0.0 && cfg.tau_s < min_step / 2.0 {
        p = p.with_smoothing(cfg.tau_s, true)?;
    }
    let fid = simulate_gate(&p, &DeviceModel::ideal(), cfg.dt, None)?;

    let fast_local_total_ps = if tau_min.is_none() {
        // steps 1, 3 and 4 shortened to pi/16 each
        Some((p.tau2 + 3.0 * PI / 16.0) * time_unit_ps)
    } else {
        None
    };

    Ok(ConstrainedScenario {
        tau_min_ps: cfg.tau_min_ps,
        mu_max_radps: cfg.mu_max_radps,
        gamma_eff_mev: cfg.gamma_eff_mev,
        time_unit_ps,
        exact_time_unit_ps: HBAR_MEV_PS / cfg.gamma_eff_mev,
        nominal_total_time_units: nominal_total,
        nominal_total_ps: nominal_total * time_unit_ps,
        fast_local_total_ps,
        simulated_fidelity: fid.fidelity,
        simulated_leakage: fid.leakage,
        gate: gate_report(&p, time_unit_ps)?,
    })
}

/// Noise robustness of the corrected plain gate over the `eta0 x omega0`
/// grid, with `cfg.trials` independently seeded traces per point.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate_common()?;
    if cfg.eta0_grid.is_empty() || cfg.omega0_grid.is_empty() {
        return Err(Error::config("noise sweep needs non-empty eta0 and omega0 grids"));
    }
    let dev = DeviceModel::ideal();
    let gate = study_gate(cfg.tau_s, true)?;
    let mut tasks = Vec::new();
    let mut global = 0u64;
    for &eta0 in &cfg.eta0_grid {
        for &omega0 in &cfg.omega0_grid {
            for trial in 0..cfg.trials {
                tasks.push((global, eta0, omega0, trial as u64));
                global += 1;
            }
        }
    }
    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(idx, eta0, omega0, trial)| {
            let started = Instant::now();
            let seed = derive_seed(cfg.seed, idx);
            let params = BTreeMap::from([
                ("eta0".to_string(), eta0),
                ("omega0".to_string(), omega0),
                ("trial".to_string(), trial as f64),
            ]);
            let outcome = simulate_gate(&gate, &dev, cfg.dt, Some((eta0, omega0, seed)));
            record(idx, seed, params, outcome, started)
        })
        .collect();
    Ok(ExperimentReport::assemble("noise_sweep", cfg.clone(), records, 0))
}

/// `(eta0, omega0, trial, seed, E)` rows.
pub fn write_noise_csv<W: Write>(report: &ExperimentReport, mut writer: W) -> Result<()> {
    if report.kind != "noise_sweep" {
        return Err(Error::config(format!(
            "expected a noise_sweep report, got {}",
            report.kind
        )));
    }
    writeln!(
        writer,
        "# config seed={} dt={} tau_s={} trials={}",
        report.config.seed, report.config.dt, report.config.tau_s, report.config.trials
    )?;
    writeln!(writer, "eta0,omega0,trial,seed,E")?;
    for r in &report.records {
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.params["eta0"],
            r.params["omega0"],
            r.params["trial"],
            r.seed,
            r.error.map(|e| e.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

const LATTICE_NM: f64 = 0.3;
const MIN_SEPARATION_NM: f64 = 0.3;
const MAX_RESAMPLES: u64 = 1000;

/// Displaces every dot by up to four lattice sites in-plane and one
/// monolayer vertically; draws with any two dots closer than `min_sep` are
/// rejected and redrawn.
pub(crate) fn perturb_positions(
    rng: &mut ChaCha8Rng,
    base: &[[f64; 3]; 6],
    min_sep: f64,
) -> Result<([[f64; 3]; 6], u64)> {
    let mut rejections = 0;
    loop {
        let mut positions = *base;
        for p in positions.iter_mut() {
            p[0] += rng.gen_range(-4i32..=4) as f64 * LATTICE_NM;
            p[1] += rng.gen_range(-4i32..=4) as f64 * LATTICE_NM;
            p[2] += rng.gen_range(-1i32..=1) as f64 * LATTICE_NM;
        }
        let mut ok = true;
        'pairs: for i in 0..6 {
            for j in (i + 1)..6 {
                let d2: f64 = (0..3)
                    .map(|m| (positions[i][m] - positions[j][m]).powi(2))
                    .sum();
                if d2 < min_sep * min_sep {
                    ok = false;
                    break 'pairs;
                }
            }
        }
        if ok {
            return Ok((positions, rejections));
        }
        rejections += 1;
        if rejections >= MAX_RESAMPLES {
            return Err(Error::domain(format!(
                "geometry perturbation rejected {MAX_RESAMPLES} times in a row"
            )));
        }
    }
}

/// Fidelity of the corrected plain gate on the unperturbed 3D device.
pub fn geometry_baseline(cfg: &ExperimentConfig) -> Result<FidelityReport> {
    let target = Geometry3D::new(cfg.a_nm, cfg.b_nm, cfg.c_nm)?;
    let dev = DeviceModel::ideal_3d(&target, cfg.eps_r)?;
    let gate = study_gate(cfg.tau_s, true)?;
    simulate_gate(&gate, &dev, cfg.dt, None)
}

/// Monte Carlo over lattice-site position disorder: every trial rebuilds the
/// device from perturbed dot positions (keeping the ideal bias offsets) and
/// simulates the corrected plain gate.
pub fn run_geometry_perturbation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate_common()?;
    let target = Geometry3D::new(cfg.a_nm, cfg.b_nm, cfg.c_nm)?;
    let base = dot_positions(&target);
    let gate = study_gate(cfg.tau_s, true)?;

    let results: Vec<(TrialRecord, u64)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let started = Instant::now();
            let seed = derive_seed(cfg.seed, trial);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = BTreeMap::from([
                ("a".to_string(), cfg.a_nm),
                ("b".to_string(), cfg.b_nm),
                ("c".to_string(), cfg.c_nm),
                ("trial".to_string(), trial as f64),
            ]);
            let drawn = perturb_positions(&mut rng, &base, MIN_SEPARATION_NM);
            match drawn {
                Ok((positions, rejections)) => {
                    let outcome = DeviceModel::from_positions(&target, cfg.eps_r, positions)
                        .and_then(|dev| simulate_gate(&gate, &dev, cfg.dt, None));
                    (record(trial, seed, params, outcome, started), rejections)
                }
                Err(e) => (record(trial, seed, params, Err(e), started), MAX_RESAMPLES),
            }
        })
        .collect();

    let resampled = results.iter().map(|(_, r)| r).sum();
    let records = results.into_iter().map(|(r, _)| r).collect();
    Ok(ExperimentReport::assemble(
        "geometry_perturbation",
        cfg.clone(),
        records,
        resampled,
    ))
}

/// `(a, b, c, trial, seed, F, leakage)` rows.
pub fn write_geometry_csv<W: Write>(report: &ExperimentReport, mut writer: W) -> Result<()> {
    if report.kind != "geometry_perturbation" {
        return Err(Error::config(format!(
            "expected a geometry_perturbation report, got {}",
            report.kind
        )));
    }
    writeln!(
        writer,
        "# config seed={} dt={} tau_s={} trials={} eps_r={}",
        report.config.seed,
        report.config.dt,
        report.config.tau_s,
        report.config.trials,
        report.config.eps_r
    )?;
    writeln!(writer, "a,b,c,trial,seed,F,leakage")?;
    for r in &report.records {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            r.params["a"],
            r.params["b"],
            r.params["c"],
            r.params["trial"],
            r.seed,
            r.fidelity.map(|f| f.to_string()).unwrap_or_default(),
            r.leakage.map(|l| l.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
