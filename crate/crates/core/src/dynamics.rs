//! Time integration of the particle gradient flow.
//!
//! The flow moves particle parameters by minus the number of particles times
//! the energy gradient, so the energy decreases at the rate
//! (1/N) * sum of squared velocities. Integrators never hand an invalid
//! state to the caller: every proposed step must keep the ordering, move no
//! particle further than a fraction of its adjacent gaps, and not raise the
//! energy beyond rounding slack. Violations reject the step and shrink it;
//! if the step size would fall below the configured floor the flow is
//! reported as too stiff instead of silently degrading.

use crate::curve::Curve;
use crate::numeric::pairwise_sum;
use crate::riesz::{check_s, energy_gradient, energy_value, Configuration, RieszError};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explicit Euler with the protective guards; mostly for comparisons.
    Euler,
    /// Classic fourth-order Runge-Kutta at a fixed step.
    RungeKutta4,
    /// Embedded 3(2) pair with step-size control.
    Adaptive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// First step to attempt; fixed-step methods return to it after any
    /// temporary shrinking.
    pub dt_init: f64,
    /// Rejections below this step size abort with a stiffness report.
    pub dt_min: f64,
    pub dt_max: f64,
    /// Local error tolerance of the adaptive method (absolute, per particle).
    pub tol: f64,
    /// Largest allowed displacement per step, as a fraction of the particle's
    /// adjacent gaps. Below 1/2 this alone rules out crossings.
    pub gap_fraction: f64,
    /// Accepted steps may raise the energy by at most this relative slack.
    pub energy_slack: f64,
    /// Stop when the energy drop over this many accepted steps falls below
    /// `plateau_tol` relative to the current energy.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Adaptive,
            dt_init: 1e-6,
            // A near-contact pair in the initial data can legitimately push
            // the first guarded steps toward 1e-16 * gap^(s+2) scales, so the
            // stall floor sits far below anything a healthy flow visits.
            dt_min: 1e-30,
            dt_max: 1.0,
            tol: 1e-7,
            gap_fraction: 0.2,
            energy_slack: 1e-9,
            plateau_window: 100,
            plateau_tol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::BadSettings(msg));
        if !(self.dt_min.is_finite() && self.dt_min > 0.0) {
            return bad(format!("dt_min must be positive, got {}", self.dt_min));
        }
        if !(self.dt_max.is_finite() && self.dt_max >= self.dt_min) {
            return bad(format!(
                "dt_max must be finite and at least dt_min, got {}",
                self.dt_max
            ));
        }
        if !(self.dt_init.is_finite() && self.dt_init >= self.dt_min && self.dt_init <= self.dt_max)
        {
            return bad(format!(
                "dt_init must lie in [dt_min, dt_max], got {}",
                self.dt_init
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.gap_fraction > 0.0 && self.gap_fraction < 0.5) {
            return bad(format!(
                "gap_fraction must lie in (0, 1/2), got {}",
                self.gap_fraction
            ));
        }
        if !(self.energy_slack.is_finite() && self.energy_slack >= 0.0) {
            return bad(format!(
                "energy_slack must be non-negative, got {}",
                self.energy_slack
            ));
        }
        if self.plateau_window == 0 {
            return bad("plateau_window must be positive".into());
        }
        if !(self.plateau_tol.is_finite() && self.plateau_tol >= 0.0) {
            return bad(format!(
                "plateau_tol must be non-negative, got {}",
                self.plateau_tol
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Interaction(#[from] RieszError),
    #[error("invalid integrator settings: {0}")]
    BadSettings(String),
    #[error(
        "step size underflow at t = {t}: a step of {dt} was still rejected; \
         tightest gap is at index {gap_index}"
    )]
    Stiffness { t: f64, dt: f64, gap_index: usize },
}

/// Snapshot of the flow after an accepted step (or the initial state).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    /// Size of the last accepted step; zero at the initial state.
    pub dt: f64,
    pub config: Configuration,
    pub energy: f64,
    /// Energy decay rate (1/N) * sum of squared velocities at this state.
    pub dissipation: f64,
    pub accepted: u64,
    pub rejected: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeReached,
    Plateau,
    MaxSteps,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub state: FlowState,
    pub reason: StopReason,
}

/// Receives every accepted state, starting with the initial one. `velocity`
/// is the flow velocity at that state.
pub trait Observer {
    fn on_step(&mut self, state: &FlowState, velocity: &[f64]);
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn on_step(&mut self, _: &FlowState, _: &[f64]) {}
}

/// Velocity of the gradient flow: minus N times the energy gradient.
pub fn flow_velocity(s: f64, curve: &Curve, cfg: &Configuration) -> Result<Vec<f64>, RieszError> {
    let mut g = energy_gradient(s, curve, cfg)?;
    let n = cfg.len() as f64;
    for v in &mut g {
        *v *= -n;
    }
    Ok(g)
}

/// Instantaneous energy decay rate: (1/N) * sum of squared velocities.
pub fn dissipation(velocity: &[f64]) -> f64 {
    let sq: Vec<f64> = velocity.iter().map(|v| v * v).collect();
    pairwise_sum(&sq) / velocity.len() as f64
}

struct Rhs<'a> {
    s: f64,
    curve: &'a Curve,
}

impl Rhs<'_> {
    /// Velocity at raw positions; `None` when the positions are not a valid
    /// configuration or the forces overflow.
    fn eval(&self, z: &[f64]) -> Option<Vec<f64>> {
        let cfg = Configuration::new(z.to_vec()).ok()?;
        let v = flow_velocity(self.s, self.curve, &cfg).ok()?;
        v.iter().all(|x| x.is_finite()).then_some(v)
    }
}

fn axpy(z: &[f64], dt: f64, v: &[f64]) -> Vec<f64> {
    z.iter().zip(v).map(|(a, b)| a + dt * b).collect()
}

enum Verdict {
    Accept {
        z: Vec<f64>,
        cfg: Configuration,
        velocity: Vec<f64>,
        energy: f64,
        /// Local error estimate; zero for the fixed-step methods.
        err: f64,
    },
    /// `err` carries the too-large error estimate when the rejection came
    /// from the embedded pair; guard rejections carry `None` and halve.
    Reject { err: Option<f64> },
}

struct Integrator<'a> {
    rhs: Rhs<'a>,
    icfg: &'a IntegratorConfig,
    energy: f64,
    gaps: Vec<f64>,
}

impl Integrator<'_> {
    fn attempt(&self, z: &[f64], vel: &[f64], dt: f64) -> Verdict {
        let reject = Verdict::Reject { err: None };
        let n = z.len();
        let (znew, velocity, err) = match self.icfg.method {
            Method::Euler => {
                let znew = axpy(z, dt, vel);
                let Some(v) = self.rhs.eval(&znew) else { return reject };
                (znew, v, 0.0)
            }
            Method::RungeKutta4 => {
                let Some(k2) = self.rhs.eval(&axpy(z, 0.5 * dt, vel)) else { return reject };
                let Some(k3) = self.rhs.eval(&axpy(z, 0.5 * dt, &k2)) else { return reject };
                let Some(k4) = self.rhs.eval(&axpy(z, dt, &k3)) else { return reject };
                let znew: Vec<f64> = (0..n)
                    .map(|i| z[i] + dt / 6.0 * (vel[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect();
                let Some(v) = self.rhs.eval(&znew) else { return reject };
                (znew, v, 0.0)
            }
            Method::Adaptive => {
                let Some(k2) = self.rhs.eval(&axpy(z, 0.5 * dt, vel)) else { return reject };
                let Some(k3) = self.rhs.eval(&axpy(z, 0.75 * dt, &k2)) else { return reject };
                let znew: Vec<f64> = (0..n)
                    .map(|i| z[i] + dt * (2.0 / 9.0 * vel[i] + k2[i] / 3.0 + 4.0 / 9.0 * k3[i]))
                    .collect();
                // The velocity at the proposed state doubles as the last
                // stage of the embedded second-order solution.
                let Some(k4) = self.rhs.eval(&znew) else { return reject };
                let mut err: f64 = 0.0;
                for i in 0..n {
                    let e = dt
                        * (-5.0 / 72.0 * vel[i] + k2[i] / 12.0 + k3[i] / 9.0 - k4[i] / 8.0);
                    err = err.max(e.abs());
                }
                if !err.is_finite() {
                    return reject;
                }
                if err > self.icfg.tol {
                    return Verdict::Reject { err: Some(err) };
                }
                (znew, k4, err)
            }
        };
        let Ok(cfg) = Configuration::new(znew.clone()) else { return reject };
        for i in 0..n {
            let behind = self.gaps[(i + n - 1) % n];
            let ahead = self.gaps[i];
            if (znew[i] - z[i]).abs() > self.icfg.gap_fraction * behind.min(ahead) {
                return reject;
            }
        }
        let Ok(energy) = energy_value(self.rhs.s, self.rhs.curve, &cfg) else { return reject };
        if !energy.is_finite() || energy > self.energy + self.icfg.energy_slack * self.energy.abs()
        {
            return reject;
        }
        Verdict::Accept { z: znew, cfg, velocity, energy, err }
    }
}

/// Runs the flow from `start` until `t_end`, an energy plateau, or the step
/// budget, whichever comes first.
pub fn integrate(
    s: f64,
    curve: &Curve,
    start: &Configuration,
    icfg: &IntegratorConfig,
    t_end: f64,
    observer: &mut dyn Observer,
) -> Result<FlowOutcome, DynamicsError> {
    check_s(s)?;
    icfg.validate()?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(DynamicsError::BadSettings(format!(
            "t_end must be finite and non-negative, got {t_end}"
        )));
    }
    let rhs = Rhs { s, curve };
    let n = start.len();
    let mut z = start.positions().to_vec();
    let mut vel = rhs.eval(&z).ok_or_else(|| {
        DynamicsError::BadSettings("initial configuration yields non-finite forces".into())
    })?;
    let mut state = FlowState {
        t: 0.0,
        dt: 0.0,
        config: start.clone(),
        energy: energy_value(s, curve, start)?,
        dissipation: dissipation(&vel),
        accepted: 0,
        rejected: 0,
    };
    observer.on_step(&state, &vel);

    let adaptive = icfg.method == Method::Adaptive;
    let mut dt_next = icfg.dt_init;
    let mut history: VecDeque<f64> = VecDeque::with_capacity(icfg.plateau_window + 1);
    history.push_back(state.energy);

    while state.t < t_end {
        if state.accepted >= icfg.max_steps {
            return Ok(FlowOutcome { state, reason: StopReason::MaxSteps });
        }
        let remaining = t_end - state.t;
        let mut dt = dt_next.min(remaining);
        let accepted = loop {
            let gaps: Vec<f64> = (0..n).map(|i| state.config.gap(i)).collect();
            let step = Integrator { rhs: Rhs { s, curve }, icfg, energy: state.energy, gaps };
            match step.attempt(&z, &vel, dt) {
                Verdict::Accept { z: znew, cfg, velocity, energy, err } => {
                    break (znew, cfg, velocity, energy, err, dt);
                }
                Verdict::Reject { err } => {
                    state.rejected += 1;
                    let shrink = match err {
                        Some(e) => (0.9 * (icfg.tol / e).powf(1.0 / 3.0)).clamp(0.25, 0.9),
                        None => 0.5,
                    };
                    let smaller = dt * shrink;
                    if smaller < icfg.dt_min {
                        let gap_index = state.config.min_gap().1;
                        return Err(DynamicsError::Stiffness { t: state.t, dt, gap_index });
                    }
                    dt = smaller;
                }
            }
        };
        let (znew, cfg, velocity, energy, err, dt_used) = accepted;
        z = znew;
        vel = velocity;
        state.t += dt_used;
        state.dt = dt_used;
        state.config = cfg;
        state.energy = energy;
        state.dissipation = dissipation(&vel);
        state.accepted += 1;
        observer.on_step(&state, &vel);

        history.push_back(energy);
        if history.len() > icfg.plateau_window {
            let then = history.pop_front().unwrap();
            if then - energy <= icfg.plateau_tol * energy.abs() {
                return Ok(FlowOutcome { state, reason: StopReason::Plateau });
            }
        }

        dt_next = if adaptive {
            let grow = if err == 0.0 {
                2.0
            } else {
                (0.9 * (icfg.tol / err).powf(1.0 / 3.0)).clamp(0.25, 2.0)
            };
            (dt_used * grow).clamp(icfg.dt_min, icfg.dt_max)
        } else {
            icfg.dt_init
        };
        // Quietly absorb a sub-rounding remainder instead of stepping on it.
        if t_end - state.t <= 4.0 * f64::EPSILON * t_end {
            state.t = t_end;
        }
    }
    Ok(FlowOutcome { state, reason: StopReason::TimeReached })
}
