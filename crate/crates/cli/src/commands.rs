//! Subcommand implementations and the file formats they write: trajectory
//! CSV, snapshot JSON, summary JSON and the diagnostic reports.

use crate::config::{read_points, resolve, RunConfig};
use crate::error::CliError;
use rieszflow::diagnostics::{
    cut_profile, distribution_report, epsilon_from_energy, epsilon_from_flat, equalize_cuts,
    weak_cut, DistributionReport,
};
use rieszflow::dynamics::{integrate, FlowOutcome, FlowState, Observer, StopReason};
use rieszflow::oracle::{minimize_energy_direct, MAX_MINIMIZE};
use rieszflow::riesz::{energy, zeta, Configuration};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

/// Streams accepted steps to the trajectory file, snapshots at the configured
/// cadence, and records when the energy first reaches the target level.
/// Observer callbacks cannot fail, so the first file error is parked and
/// re-raised after the run.
struct SimObserver {
    sample_every: u64,
    snapshot_every: u64,
    positions: bool,
    writer: Option<BufWriter<File>>,
    dir: PathBuf,
    threshold: f64,
    time_to_threshold: Option<f64>,
    last_written: Option<u64>,
    io_error: Option<CliError>,
}

impl SimObserver {
    fn new(cfg: &RunConfig, dir: &Path, threshold: f64) -> Result<SimObserver, CliError> {
        let writer = if cfg.output.trajectory {
            let path = dir.join("trajectory.csv");
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            let mut w = BufWriter::new(file);
            let mut header = String::from("step,t,dt,E,dissipation,delta,rho_M");
            if cfg.output.trajectory_positions {
                for i in 0..cfg.params.n {
                    header.push_str(&format!(",z{i}"));
                }
            }
            header.push('\n');
            w.write_all(header.as_bytes())
                .map_err(|e| CliError::io(&path, e))?;
            Some(w)
        } else {
            None
        };
        Ok(SimObserver {
            sample_every: cfg.diagnostics.sample_every,
            snapshot_every: cfg.output.snapshot_every,
            positions: cfg.output.trajectory_positions,
            writer,
            dir: dir.to_path_buf(),
            threshold,
            time_to_threshold: None,
            last_written: None,
            io_error: None,
        })
    }

    fn row(&mut self, state: &FlowState) {
        let Some(w) = self.writer.as_mut() else { return };
        let (delta, _) = state.config.min_gap();
        let rho_m = 1.0 / (state.config.len() as f64 * delta);
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            state.accepted, state.t, state.dt, state.energy, state.dissipation, delta, rho_m
        );
        if self.positions {
            for z in state.config.positions() {
                line.push(',');
                line.push_str(&format!("{z}"));
            }
        }
        line.push('\n');
        if let Err(e) = w.write_all(line.as_bytes()) {
            self.io_error = Some(CliError::io(&self.dir.join("trajectory.csv"), e));
        }
        self.last_written = Some(state.accepted);
    }

    fn snapshot(&mut self, state: &FlowState, name: &str) {
        let path = self.dir.join(name);
        if let Err(e) = write_file(&path, json_pretty(state).as_bytes()) {
            self.io_error = Some(e);
        }
    }

    /// Final trajectory row (when the cadence missed it), final snapshot,
    /// flush, and any parked error.
    fn finish(&mut self, state: &FlowState) -> Result<(), CliError> {
        if self.last_written != Some(state.accepted) {
            self.row(state);
        }
        self.snapshot(state, "snapshot_final.json");
        if let Some(w) = self.writer.as_mut() {
            if let Err(e) = w.flush() {
                self.io_error = Some(CliError::io(&self.dir.join("trajectory.csv"), e));
            }
        }
        match self.io_error.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl Observer for SimObserver {
    fn on_step(&mut self, state: &FlowState, _velocity: &[f64]) {
        if self.io_error.is_some() {
            return;
        }
        if self.time_to_threshold.is_none() && state.energy <= self.threshold {
            self.time_to_threshold = Some(state.t);
        }
        if state.accepted % self.sample_every == 0 {
            self.row(state);
        }
        if self.snapshot_every > 0
            && state.accepted > 0
            && state.accepted % self.snapshot_every == 0
        {
            let name = format!("snapshot_step_{:08}.json", state.accepted);
            self.snapshot(state, &name);
        }
    }
}

#[derive(Serialize)]
struct Meta {
    created_unix: u64,
}

/// Everything that determines the run; the output section is left out so the
/// summary bytes do not depend on where they were written.
#[derive(Serialize)]
struct ConfigEcho<'a> {
    curve: &'a crate::config::CurveSection,
    params: &'a crate::config::ParamsSection,
    init: &'a crate::config::InitSection,
    integrator: &'a crate::config::IntegratorSection,
    diagnostics: &'a crate::config::DiagnosticsSection,
}

#[derive(Serialize)]
struct RunResult {
    stop_reason: StopReason,
    t_final: f64,
    accepted: u64,
    rejected: u64,
    dt_final: f64,
    energy: f64,
    flat_energy: f64,
    dissipation: f64,
    zeta_tilde: f64,
    zeta_truncated: f64,
    energy_over_zeta_tilde: f64,
    epsilon_config: f64,
    /// First model time with E at or below zeta_tilde * (1 + epsilon_config).
    time_to_threshold: Option<f64>,
    epsilon_from_energy: f64,
    epsilon_from_flat: f64,
}

#[derive(Serialize)]
struct BoundLine {
    name: &'static str,
    value: f64,
    reference: f64,
    relation: &'static str,
    holds: bool,
}

impl BoundLine {
    fn at_most(name: &'static str, value: f64, reference: f64) -> BoundLine {
        BoundLine { name, value, reference, relation: "<=", holds: value <= reference }
    }

    fn at_least(name: &'static str, value: f64, reference: f64) -> BoundLine {
        BoundLine { name, value, reference, relation: ">=", holds: value >= reference }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    meta: Meta,
    config: ConfigEcho<'a>,
    result: RunResult,
    bounds: Vec<BoundLine>,
    report: DistributionReport,
}

pub fn cmd_simulate(cfg: &RunConfig, base: &Path, repeat: u64) -> Result<(), CliError> {
    if repeat == 0 {
        return Err(CliError::Config("--repeat must be at least 1".into()));
    }
    for k in 0..repeat {
        let mut run = cfg.clone();
        let dir = if repeat == 1 {
            cfg.output.directory.clone()
        } else {
            cfg.output.directory.join(format!("run_{k:03}"))
        };
        if k > 0 {
            match run.init.seed {
                Some(seed) => run.init.seed = Some(seed + k),
                None => {
                    return Err(CliError::Config(
                        "--repeat needs a seeded init (uniform and file starts repeat identically)"
                            .into(),
                    ))
                }
            }
        }
        simulate_one(&run, base, &dir, k)?;
    }
    Ok(())
}

fn simulate_one(cfg: &RunConfig, base: &Path, dir: &Path, k: u64) -> Result<(), CliError> {
    let s = cfg.params.s;
    let curve = cfg.curve.build(base)?;
    let start = cfg.init.build(cfg.params.n, base)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let zeta_tilde = zeta(s)? / s;
    let threshold = zeta_tilde * (1.0 + cfg.diagnostics.epsilon);
    let mut obs = SimObserver::new(cfg, dir, threshold)?;
    let outcome = integrate(
        s,
        &curve,
        &start,
        &cfg.integrator.to_core(),
        cfg.integrator.t_end,
        &mut obs,
    )?;
    obs.finish(&outcome.state)?;

    let summary = build_summary(cfg, &curve, &outcome, zeta_tilde, obs.time_to_threshold)?;
    write_file(&dir.join("summary.json"), json_pretty(&summary).as_bytes())?;
    println!(
        "run {k}: E = {}, E/continuum = {}, stop = {:?}, t = {}, steps = {}",
        outcome.state.energy,
        summary.result.energy_over_zeta_tilde,
        outcome.reason,
        outcome.state.t,
        outcome.state.accepted
    );
    Ok(())
}

fn build_summary<'a>(
    cfg: &'a RunConfig,
    curve: &rieszflow::curve::Curve,
    outcome: &FlowOutcome,
    zeta_tilde: f64,
    time_to_threshold: Option<f64>,
) -> Result<Summary<'a>, CliError> {
    let s = cfg.params.s;
    let state = &outcome.state;
    let breakdown = energy(s, curve, &state.config)?;
    let e = state.energy;
    let flat = breakdown.flat_energy;
    let zeta_n = breakdown.zeta_truncated;
    let eps_cfg = cfg.diagnostics.epsilon;

    let bounds = vec![
        BoundLine::at_most("energy_below_continuum_target", e, zeta_tilde * (1.0 + eps_cfg)),
        BoundLine::at_least("chord_energy_above_flat", e, flat),
        BoundLine::at_least("flat_energy_above_truncated_floor", flat, zeta_n / s),
        BoundLine::at_least(
            "flat_energy_above_offset_floor",
            flat,
            breakdown.flat_by_offset[0] + (zeta_n - 1.0) / s,
        ),
    ];

    // Bound flags in the report are evaluated at the configured target
    // excess; the measured excesses sit next to them in `result`.
    let report = distribution_report(curve, s, &state.config, eps_cfg, &cfg.windows())?;

    Ok(Summary {
        meta: Meta {
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
        config: ConfigEcho {
            curve: &cfg.curve,
            params: &cfg.params,
            init: &cfg.init,
            integrator: &cfg.integrator,
            diagnostics: &cfg.diagnostics,
        },
        result: RunResult {
            stop_reason: outcome.reason,
            t_final: state.t,
            accepted: state.accepted,
            rejected: state.rejected,
            dt_final: state.dt,
            energy: e,
            flat_energy: flat,
            dissipation: state.dissipation,
            zeta_tilde,
            zeta_truncated: zeta_n,
            energy_over_zeta_tilde: e / zeta_tilde,
            epsilon_config: eps_cfg,
            time_to_threshold,
            epsilon_from_energy: epsilon_from_energy(e, s)?,
            epsilon_from_flat: epsilon_from_flat(flat, s, state.config.len())?,
        },
        bounds,
        report,
    })
}

pub fn cmd_diagnose(cfg: &RunConfig, base: &Path, snapshot: &Path) -> Result<(), CliError> {
    let snapshot = resolve(base, snapshot);
    let text = fs::read_to_string(&snapshot).map_err(|e| CliError::io(&snapshot, e))?;
    let state: FlowState = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", snapshot.display())))?;
    let s = cfg.params.s;
    if state.config.len() != cfg.params.n {
        eprintln!(
            "note: snapshot holds {} particles, config says {}",
            state.config.len(),
            cfg.params.n
        );
    }
    let curve = cfg.curve.build(base)?;

    // The report is evaluated at the excess the snapshot actually has, read
    // off the flat energy against its finite-N floor.
    let flat = rieszflow::riesz::flat_energy(s, &state.config)?;
    let eps = epsilon_from_flat(flat, s, state.config.len())?;
    let report = distribution_report(&curve, s, &state.config, eps, &cfg.windows())?;

    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("report.json"), json_pretty(&report).as_bytes())?;

    let z = state.config.positions();
    let mut unrolled: Vec<f64> = z.to_vec();
    unrolled.push(z[0] + 1.0);
    let profile = cut_profile(&unrolled, s)?;
    let mut csv = String::from("cut,left,right,P\n");
    for (kcut, &p) in profile.p.iter().enumerate() {
        csv.push_str(&format!("{kcut},{},{},{p}\n", unrolled[kcut], unrolled[kcut + 1]));
    }
    write_file(&dir.join("cut_profile.csv"), csv.as_bytes())?;
    println!(
        "diagnosed {} particles at t = {}: mad = {}, delta = {}, epsilon = {}",
        state.config.len(),
        state.t,
        report.mad,
        report.delta,
        eps
    );
    Ok(())
}

pub fn cmd_cut(
    points_path: &Path,
    s: f64,
    epsilon: f64,
    equalize: Option<(usize, usize)>,
) -> Result<(), CliError> {
    let points = read_points(points_path)?;
    let found = weak_cut(&points, s, epsilon)?;
    let n = points.len() - 1;
    println!("n = {n}");
    match found.index {
        Some(i) => println!("i_S = {i}"),
        None => println!("i_S = none"),
    }
    println!("P = {}", found.repulsion);
    println!("ratio = {}", found.ratio);
    println!("threshold = {}", found.threshold);
    println!("epsilon1 = {}", found.epsilon1);
    println!("bound_held = {}", found.bound_held);
    if found.epsilon_warning {
        eprintln!("note: epsilon {epsilon} sits outside the guaranteed regime (> 0.01)");
    }
    let profile = cut_profile(&points, s)?;
    println!("cut,left,right,P");
    for (k, &p) in profile.p.iter().enumerate() {
        println!("{k},{},{},{p}", points[k], points[k + 1]);
    }
    if let Some((i_l, i_r)) = equalize {
        let balanced = equalize_cuts(&points, i_l, i_r, s, 1e-9)?;
        println!(
            "equalized cuts {i_l}..{i_r}: spread = {} after {} iterations",
            balanced.spread, balanced.iterations
        );
        println!("index,position");
        for (i, x) in balanced.points.iter().enumerate() {
            println!("{i},{x}");
        }
    }
    Ok(())
}

pub fn cmd_oracle(cfg: &RunConfig, base: &Path, tol: f64) -> Result<(), CliError> {
    if cfg.params.n > MAX_MINIMIZE {
        return Err(CliError::Config(format!(
            "direct minimization is limited to {MAX_MINIMIZE} particles, got {}",
            cfg.params.n
        )));
    }
    let curve = cfg.curve.build(base)?;
    let start = cfg.init.build(cfg.params.n, base)?;
    let result = minimize_energy_direct(cfg.params.s, &curve, &start, tol)?;
    print!("{}", json_pretty(&result));
    Ok(())
}

pub fn cmd_print_default_config() -> Result<(), CliError> {
    let text = toml::to_string(&RunConfig::default())
        .map_err(|e| CliError::Config(format!("serializing defaults: {e}")))?;
    print!("{text}");
    Ok(())
}
