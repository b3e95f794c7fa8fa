//! Run configuration: a single TOML file with sections mirroring the library
//! types, so a run is fully described by one diffable document. Every field
//! has a default and `print-default-config` emits the complete file.

use crate::error::CliError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rieszflow::curve::{Curve, CurveSpec};
use rieszflow::dynamics::{IntegratorConfig, Method};
use rieszflow::riesz::Configuration;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub curve: CurveSection,
    pub params: ParamsSection,
    pub init: InitSection,
    pub integrator: IntegratorSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

/// Geometry selector. Every field is present with its default so the printed
/// config shows the full vocabulary; only the fields of the chosen `kind`
/// are read.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    /// circle | ellipse | knot | pinched | table
    pub kind: String,
    pub radius: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    pub p: u32,
    pub q: u32,
    pub major_radius: f64,
    pub minor_radius: f64,
    pub amplitude: f64,
    /// CSV of uniform parameter samples for kind = "table": u, x1, ..., xd
    /// per row. Relative paths resolve against the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Arc-length table resolution.
    pub grid: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            kind: "circle".into(),
            radius: 1.0,
            semi_axis_a: 2.0,
            semi_axis_b: 1.0,
            p: 2,
            q: 3,
            major_radius: 1.0,
            minor_radius: 0.3,
            amplitude: 0.9,
            path: None,
            grid: 1024,
        }
    }
}

impl CurveSection {
    fn spec(&self, base: &Path) -> Result<CurveSpec, CliError> {
        match self.kind.as_str() {
            "circle" => Ok(CurveSpec::Circle { radius: self.radius }),
            "ellipse" => Ok(CurveSpec::Ellipse {
                semi_axis_a: self.semi_axis_a,
                semi_axis_b: self.semi_axis_b,
            }),
            "knot" => Ok(CurveSpec::Knot {
                p: self.p,
                q: self.q,
                major_radius: self.major_radius,
                minor_radius: self.minor_radius,
            }),
            "pinched" => Ok(CurveSpec::Pinched { amplitude: self.amplitude }),
            "table" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    CliError::Config("curve kind \"table\" needs a path".into())
                })?;
                let rows = read_table(&resolve(base, path))?;
                Ok(CurveSpec::Table { rows })
            }
            other => Err(CliError::Config(format!(
                "unknown curve kind {other:?}; expected circle, ellipse, knot, pinched or table"
            ))),
        }
    }

    pub fn build(&self, base: &Path) -> Result<Curve, CliError> {
        Ok(Curve::build(&self.spec(base)?, self.grid)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    /// Repulsion exponent; must exceed 1.
    pub s: f64,
    /// Particle count.
    pub n: usize,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection { s: 2.0, n: 128 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    /// uniform | random | jitter | file
    pub kind: String,
    /// Required for random and jitter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Jitter size in gap widths, below 1/2.
    pub amplitude: f64,
    /// Rotation of the uniform start.
    pub offset: f64,
    /// Point file for kind = "file": one position per line, sorted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            kind: "random".into(),
            seed: Some(1),
            amplitude: 0.25,
            offset: 0.0,
            path: None,
        }
    }
}

impl InitSection {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::Config(format!("init kind {:?} needs a seed", self.kind))
        })
    }

    pub fn build(&self, n: usize, base: &Path) -> Result<Configuration, CliError> {
        match self.kind.as_str() {
            "uniform" => Ok(Configuration::equally_spaced(n, self.offset)?),
            "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed()?);
                Ok(Configuration::random(n, &mut rng)?)
            }
            "jitter" => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed()?);
                Ok(Configuration::jittered(n, self.amplitude, &mut rng)?)
            }
            "file" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    CliError::Config("init kind \"file\" needs a path".into())
                })?;
                let points = read_points(&resolve(base, path))?;
                if points.len() != n {
                    return Err(CliError::Config(format!(
                        "init file holds {} points but params.n = {n}",
                        points.len()
                    )));
                }
                Ok(Configuration::new(points)?)
            }
            other => Err(CliError::Config(format!(
                "unknown init kind {other:?}; expected uniform, random, jitter or file"
            ))),
        }
    }
}

/// Integrator settings plus the time horizon, one field per library knob.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    /// euler | runge_kutta4 | adaptive
    pub method: Method,
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub tol: f64,
    pub gap_fraction: f64,
    pub energy_slack: f64,
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub max_steps: u64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let core = IntegratorConfig::default();
        IntegratorSection {
            method: core.method,
            t_end: 100.0,
            dt_init: core.dt_init,
            dt_min: core.dt_min,
            dt_max: core.dt_max,
            tol: core.tol,
            gap_fraction: core.gap_fraction,
            energy_slack: core.energy_slack,
            plateau_window: core.plateau_window,
            plateau_tol: core.plateau_tol,
            max_steps: core.max_steps,
        }
    }
}

impl IntegratorSection {
    pub fn to_core(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            tol: self.tol,
            gap_fraction: self.gap_fraction,
            energy_slack: self.energy_slack,
            plateau_window: self.plateau_window,
            plateau_tol: self.plateau_tol,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    /// Energy-excess target: the summary reports when E first reaches
    /// (continuum constant) * (1 + epsilon).
    pub epsilon: f64,
    /// Discrepancy windows as [start, length] pairs.
    pub windows: Vec<[f64; 2]>,
    /// Trajectory and snapshot cadence in accepted steps.
    pub sample_every: u64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            epsilon: 0.01,
            windows: vec![[0.0, 0.1], [0.0, 0.25], [0.0, 0.5]],
            sample_every: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write trajectory.csv (step, t, dt, E, dissipation, delta, rho_M).
    pub trajectory: bool,
    /// Append the full position vector to every trajectory row (N columns).
    pub trajectory_positions: bool,
    /// Extra snapshots every so many accepted steps; 0 writes only the
    /// final snapshot.
    pub snapshot_every: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            trajectory: true,
            trajectory_positions: false,
            snapshot_every: 0,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file. Relative paths referenced by the
    /// config resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<(RunConfig, PathBuf), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.validate(&base)?;
        Ok((cfg, base))
    }

    pub fn validate(&self, base: &Path) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.params.s.is_finite() && self.params.s > 1.0) {
            return bad(format!("params.s must exceed 1, got {}", self.params.s));
        }
        if self.params.n < 2 {
            return bad(format!("params.n must be at least 2, got {}", self.params.n));
        }
        match self.init.kind.as_str() {
            "uniform" => {}
            "random" | "jitter" => {
                self.init.seed()?;
            }
            "file" => match &self.init.path {
                None => return bad("init kind \"file\" needs a path".into()),
                Some(p) => {
                    let full = resolve(base, p);
                    if !full.is_file() {
                        return bad(format!("init file {} does not exist", full.display()));
                    }
                }
            },
            other => {
                return bad(format!(
                    "unknown init kind {other:?}; expected uniform, random, jitter or file"
                ))
            }
        }
        if self.curve.kind == "table" {
            match &self.curve.path {
                None => return bad("curve kind \"table\" needs a path".into()),
                Some(p) => {
                    let full = resolve(base, p);
                    if !full.is_file() {
                        return bad(format!("curve table {} does not exist", full.display()));
                    }
                }
            }
        } else {
            // Catches typos eagerly even though only "table" reads files.
            self.curve.spec(base)?;
        }
        if !(self.integrator.t_end.is_finite() && self.integrator.t_end >= 0.0) {
            return bad(format!(
                "integrator.t_end must be finite and non-negative, got {}",
                self.integrator.t_end
            ));
        }
        self.integrator.to_core().validate()?;
        if !(self.diagnostics.epsilon.is_finite() && self.diagnostics.epsilon >= 0.0) {
            return bad(format!(
                "diagnostics.epsilon must be non-negative, got {}",
                self.diagnostics.epsilon
            ));
        }
        for &[a, length] in &self.diagnostics.windows {
            if !(a.is_finite() && length.is_finite() && length > 0.0 && length < 1.0) {
                return bad(format!(
                    "diagnostics window [{a}, {length}] needs a finite start and a length in (0, 1)"
                ));
            }
        }
        if self.diagnostics.sample_every == 0 {
            return bad("diagnostics.sample_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn windows(&self) -> Vec<(f64, f64)> {
        self.diagnostics.windows.iter().map(|&[a, l]| (a, l)).collect()
    }
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Point file: one position per line; blank lines and `#` comments skipped.
pub fn read_points(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| {
            CliError::Config(format!(
                "{} line {}: expected a number, got {trimmed:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        points.push(value);
    }
    if points.is_empty() {
        return Err(CliError::Config(format!("{}: no points found", path.display())));
    }
    Ok(points)
}

/// Curve sample file: comma-separated rows u, x1, ..., xd.
fn read_table(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            CliError::Config(format!(
                "{} line {}: expected comma-separated numbers, got {trimmed:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        rows.push(row);
    }
    Ok(rows)
}
