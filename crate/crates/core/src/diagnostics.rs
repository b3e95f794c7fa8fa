//! Distribution and repulsion diagnostics.
//!
//! Two families of quantities live here. Interval diagnostics work on a
//! plain sorted point set x_0 < ... < x_N: the cut repulsion P_k sums
//! (x_j - x_i)^(-s-1) over all pairs straddling the gap between x_k and
//! x_{k+1}, a weak cut is an admissible cut whose repulsion does not exceed
//! the equidistribution level zeta(s) N^(s+1) by more than a prescribed
//! fraction, and cut equalization solves for the unique interior
//! configuration with all P_k equal (simultaneously the max-min point of
//! the smallest cut repulsion and the minimizer of the convex pair energy).
//! Periodic diagnostics work on a Configuration: closest pair, gap mean
//! absolute deviation, window discrepancy, and the bounds they are expected
//! to satisfy at a given energy excess epsilon.

use crate::curve::Curve;
use crate::dynamics::{FlowState, Observer};
use crate::numeric::{pairwise_sum, solve_spd};
use crate::riesz::{check_s, energy_value, zeta, zeta_truncated, Configuration, RieszError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Interaction(#[from] RieszError),
    #[error("invalid point set: {0}")]
    BadPoints(String),
    #[error("invalid window: a = {a}, length = {length}")]
    InvalidWindow { a: f64, length: f64 },
    #[error("cut equalization did not converge: spread {spread} after {iterations} iterations")]
    NonConvergence { iterations: usize, spread: f64 },
}

pub(crate) fn check_points(points: &[f64]) -> Result<(), DiagnosticsError> {
    if points.len() < 2 {
        return Err(DiagnosticsError::BadPoints(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(DiagnosticsError::BadPoints("points must be finite".into()));
    }
    for w in points.windows(2) {
        if w[1] <= w[0] {
            return Err(DiagnosticsError::BadPoints(format!(
                "points must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Cut repulsions of a sorted point set x_0 < ... < x_N: for each of the N
/// cuts, the sum of (x_j - x_i)^(-s-1) over pairs with i on the left and j
/// on the right of the cut.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutProfile {
    pub points: Vec<f64>,
    /// P_k for the cut between points k and k+1, k = 0..N-1.
    pub p: Vec<f64>,
    pub argmin: usize,
    pub argmax: usize,
}

/// O(N^2) profile computation: the first cut is summed directly and each
/// subsequent cut is updated by the pairs gained and lost when the cut
/// moves one point to the right. The update cancellation is held to a few
/// ulps by compensated accumulation.
pub fn cut_profile(points: &[f64], s: f64) -> Result<CutProfile, DiagnosticsError> {
    check_s(s)?;
    check_points(points)?;
    let n = points.len() - 1;
    let mut p = vec![0.0; n];
    let mut acc = crate::numeric::CompenSum::default();
    for j in 1..=n {
        acc.add((points[j] - points[0]).powf(-s - 1.0));
    }
    p[0] = acc.value();
    for k in 1..n {
        for j in k + 1..=n {
            acc.add((points[j] - points[k]).powf(-s - 1.0));
        }
        for i in 0..k {
            acc.add(-(points[k] - points[i]).powf(-s - 1.0));
        }
        p[k] = acc.value();
    }
    let mut argmin = 0;
    let mut argmax = 0;
    for (k, &v) in p.iter().enumerate() {
        if v < p[argmin] {
            argmin = k;
        }
        if v > p[argmax] {
            argmax = k;
        }
    }
    Ok(CutProfile { points: points.to_vec(), p, argmin, argmax })
}

/// Result of the weak-cut search on a point set spanning [0, 1].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakCut {
    pub epsilon: f64,
    /// Half-width parameter of the admissibility window (epsilon1, 1 - epsilon1).
    pub epsilon1: f64,
    /// Minimizing admissible cut, if any cut interval meets the window.
    pub index: Option<usize>,
    /// Repulsion at that cut (NaN when no cut is admissible).
    pub repulsion: f64,
    /// (1 + epsilon) * zeta(s) * N^(s+1).
    pub threshold: f64,
    /// repulsion / (zeta(s) * N^(s+1)).
    pub ratio: f64,
    pub bound_held: bool,
    /// Set when epsilon exceeds 0.01, outside the guaranteed regime.
    pub epsilon_warning: bool,
}

/// Searches the admissible cuts (those whose interval meets
/// (epsilon1, 1 - epsilon1) with epsilon1 = epsilon / (3(1+s))) for the one
/// with the smallest repulsion and compares it against the
/// equidistribution threshold.
pub fn weak_cut(points: &[f64], s: f64, epsilon: f64) -> Result<WeakCut, DiagnosticsError> {
    check_s(s)?;
    check_points(points)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(DiagnosticsError::BadPoints(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = points.len() - 1;
    if points[0].abs() > 1e-12 || (points[n] - 1.0).abs() > 1e-12 {
        return Err(DiagnosticsError::BadPoints(format!(
            "weak-cut points must span [0, 1], got [{}, {}]",
            points[0], points[n]
        )));
    }
    let profile = cut_profile(points, s)?;
    let epsilon1 = epsilon / (3.0 * (1.0 + s));
    let mut index = None;
    let mut best = f64::INFINITY;
    for k in 0..n {
        let admissible = points[k + 1] > epsilon1 && points[k] < 1.0 - epsilon1;
        if admissible && profile.p[k] < best {
            best = profile.p[k];
            index = Some(k);
        }
    }
    let level = zeta(s)? * (n as f64).powf(s + 1.0);
    let threshold = (1.0 + epsilon) * level;
    let (repulsion, ratio, bound_held) = match index {
        Some(_) => (best, best / level, best <= threshold),
        None => (f64::NAN, f64::NAN, false),
    };
    Ok(WeakCut {
        epsilon,
        epsilon1,
        index,
        repulsion,
        threshold,
        ratio,
        bound_held,
        epsilon_warning: epsilon > 0.01,
    })
}

/// Equalization result: the full point set with the interior of the segment
/// replaced by the balanced configuration.
#[derive(Clone, Debug)]
pub struct Equalized {
    pub points: Vec<f64>,
    /// Final max_k |P_k - mean| / mean over the segment cuts.
    pub spread: f64,
    pub iterations: usize,
}

/// Pair energy sum over all pairs of the point set (the quantity the
/// equalized interior minimizes).
fn pair_energy(points: &[f64], s: f64) -> f64 {
    let n = points.len();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in i + 1..n {
            acc += (points[j] - points[i]).powf(-s);
        }
        rows.push(acc);
    }
    pairwise_sum(&rows)
}

fn segment_spread(profile: &[f64], i_l: usize, i_r: usize) -> f64 {
    let seg = &profile[i_l..i_r];
    let mean = pairwise_sum(seg) / seg.len() as f64;
    seg.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max) / mean
}

/// Moves the interior points x_{i_l+1} .. x_{i_r-1} (everything else fixed)
/// to the unique configuration with equal cut repulsions across the segment,
/// by damped Newton descent on the convex pair energy. Stops when the
/// relative spread of the segment's P_k drops below `tol`.
pub fn equalize_cuts(
    points: &[f64],
    i_l: usize,
    i_r: usize,
    s: f64,
    tol: f64,
) -> Result<Equalized, DiagnosticsError> {
    check_s(s)?;
    check_points(points)?;
    let n = points.len() - 1;
    if i_l >= i_r || i_r > n {
        return Err(DiagnosticsError::BadPoints(format!(
            "segment indices must satisfy i_l < i_r <= {n}, got {i_l}, {i_r}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DiagnosticsError::BadPoints(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut x = points.to_vec();
    let m = i_r - i_l - 1;
    if m == 0 {
        return Ok(Equalized { points: x, spread: 0.0, iterations: 0 });
    }
    let max_iters = 100;
    for iter in 0..max_iters {
        let profile = cut_profile(&x, s)?;
        let spread = segment_spread(&profile.p, i_l, i_r);
        if spread < tol {
            return Ok(Equalized { points: x, spread, iterations: iter });
        }
        // Gradient and Hessian of the pair energy in the free coordinates.
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        for t in 0..m {
            let k = i_l + 1 + t;
            let mut ahead = 0.0;
            let mut behind = 0.0;
            let mut diag = 0.0;
            for i in 0..=n {
                if i == k {
                    continue;
                }
                let d = (x[k] - x[i]).abs();
                if i > k {
                    ahead += d.powf(-s - 1.0);
                } else {
                    behind += d.powf(-s - 1.0);
                }
                let curv = s * (s + 1.0) * d.powf(-s - 2.0);
                diag += curv;
                if i > i_l && i < i_r {
                    let u = i - i_l - 1;
                    hess[t * m + u] = -curv;
                }
            }
            grad[t] = s * (ahead - behind);
            hess[t * m + t] = diag;
        }
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        if !solve_spd(&mut hess, &mut dir, m) {
            return Err(DiagnosticsError::NonConvergence { iterations: iter, spread });
        }
        // Clip the step to 90% of the distance to the ordering boundary.
        let mut alpha: f64 = 1.0;
        for q in i_l..i_r {
            let dq = if q > i_l && q < i_r { dir[q - i_l - 1] } else { 0.0 };
            let dq1 = if q + 1 > i_l && q + 1 < i_r { dir[q - i_l] } else { 0.0 };
            let rate = dq1 - dq;
            if rate < 0.0 {
                alpha = alpha.min(0.9 * (x[q + 1] - x[q]) / (-rate));
            }
        }
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let base = pair_energy(&x, s);
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = x.clone();
            for t in 0..m {
                trial[i_l + 1 + t] += alpha * dir[t];
            }
            if trial.windows(2).all(|w| w[1] > w[0])
                && pair_energy(&trial, s) <= base + 1e-4 * alpha * slope
            {
                x = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            let profile = cut_profile(&x, s)?;
            let spread = segment_spread(&profile.p, i_l, i_r);
            if spread < tol {
                return Ok(Equalized { points: x, spread, iterations: iter + 1 });
            }
            return Err(DiagnosticsError::NonConvergence { iterations: iter + 1, spread });
        }
    }
    let profile = cut_profile(&x, s)?;
    let spread = segment_spread(&profile.p, i_l, i_r);
    if spread < tol {
        return Ok(Equalized { points: x, spread, iterations: max_iters });
    }
    Err(DiagnosticsError::NonConvergence { iterations: max_iters, spread })
}

/// Closest pair of a periodic configuration: the smallest gap `delta`, the
/// density peak rho_m = 1/(N delta), and the 1-based index of the particle
/// opening the gap. Ties, including gaps equal up to a few ulps (as produced
/// by nominally uniform spacing), break to the smallest index.
pub fn closest_pair(cfg: &Configuration) -> (f64, f64, usize) {
    let (delta, _) = cfg.min_gap();
    let snap = delta * (1.0 + 8.0 * f64::EPSILON);
    let idx = (0..cfg.len()).find(|&i| cfg.gap(i) <= snap).unwrap();
    let rho_m = 1.0 / (cfg.len() as f64 * delta);
    (delta, rho_m, idx + 1)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowReport {
    pub a: f64,
    pub length: f64,
    /// Fraction of gaps contained in the window, minus the window length.
    pub discrepancy: f64,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionReport {
    pub n: usize,
    pub s: f64,
    /// Energy-excess parameter the bounds are evaluated at.
    pub epsilon: f64,
    pub energy: f64,
    /// Smallest gap.
    pub delta: f64,
    /// 1/(N delta).
    pub rho_m: f64,
    /// 1-based index of the smallest gap.
    pub i_m: usize,
    /// Mean absolute deviation of the gaps from 1/N.
    pub mad: f64,
    pub mad_bound: f64,
    pub mad_within_bound: bool,
    pub windows: Vec<WindowReport>,
    /// E + rho_m^s.
    pub lyapunov: f64,
    /// Regime constant: 1 for s > 2, log N at s = 2, N^(2-s) below.
    pub n_star: f64,
}

/// Regime constant of the closest-pair decay estimate.
pub fn n_star(s: f64, n: usize) -> f64 {
    if (s - 2.0).abs() <= 1e-12 {
        (n as f64).ln()
    } else if s > 2.0 {
        1.0
    } else {
        (n as f64).powf(2.0 - s)
    }
}

/// Energy excess measured against the continuum constant: E / (zeta(s)/s) - 1,
/// clamped at zero.
pub fn epsilon_from_energy(energy: f64, s: f64) -> Result<f64, RieszError> {
    let tilde = zeta(s)? / s;
    Ok((energy / tilde - 1.0).max(0.0))
}

/// Energy excess measured from the flat energy against its finite-N floor
/// zeta_truncated(s, N)/s; unlike the continuum version this comparison is
/// valid at every N.
pub fn epsilon_from_flat(flat: f64, s: f64, n: usize) -> Result<f64, DiagnosticsError> {
    check_s(s)?;
    let floor = zeta_truncated(s, n);
    if floor <= 0.0 {
        return Err(DiagnosticsError::BadPoints(format!(
            "need at least 3 particles for the offset sum, got {n}"
        )));
    }
    Ok((s * flat / floor - 1.0).max(0.0))
}

/// Full distribution report: closest pair, gap deviation and discrepancy
/// with their epsilon-bounds, and the Lyapunov value E + rho_m^s.
pub fn distribution_report(
    curve: &Curve,
    s: f64,
    cfg: &Configuration,
    epsilon: f64,
    windows: &[(f64, f64)],
) -> Result<DistributionReport, DiagnosticsError> {
    check_s(s)?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(DiagnosticsError::BadPoints(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    for &(a, length) in windows {
        if !(a.is_finite() && length.is_finite() && length > 0.0 && length < 1.0) {
            return Err(DiagnosticsError::InvalidWindow { a, length });
        }
    }
    let n = cfg.len();
    let nf = n as f64;
    let (delta, rho_m, i_m) = closest_pair(cfg);
    let energy = energy_value(s, curve, cfg)?;
    let tilde = zeta(s)? / s;

    let gaps: Vec<f64> = (0..n).map(|i| cfg.gap(i)).collect();
    let dev: Vec<f64> = gaps.iter().map(|d| (d - 1.0 / nf).abs()).collect();
    let mad = pairwise_sum(&dev) / nf;
    let mad_bound = 2.0 * (2.0 * tilde / (s + 1.0)).sqrt() * epsilon.sqrt() / nf;

    let z = cfg.positions();
    let windows = windows
        .iter()
        .map(|&(a, length)| {
            let mut count = 0usize;
            for i in 0..n {
                let start = (z[i] - a).rem_euclid(1.0);
                if start + gaps[i] <= length {
                    count += 1;
                }
            }
            let discrepancy = count as f64 / nf - length;
            let bound = (length * (1.0 - length) * tilde).sqrt() * (2.0 * epsilon).sqrt();
            WindowReport {
                a,
                length,
                discrepancy,
                bound,
                within_bound: discrepancy.abs() <= bound,
            }
        })
        .collect();

    Ok(DistributionReport {
        n,
        s,
        epsilon,
        energy,
        delta,
        rho_m,
        i_m,
        mad,
        mad_bound,
        mad_within_bound: mad <= mad_bound,
        windows,
        lyapunov: energy + rho_m.powf(s),
        n_star: n_star(s, n),
    })
}

/// Flow observer tracking E + rho_m^s between accepted steps. The value is
/// expected to be non-increasing along well-resolved flows away from
/// degenerate clustering; violations are counted, not asserted.
pub struct LyapunovMonitor {
    s: f64,
    pub samples: Vec<(f64, f64)>,
    pub violations: usize,
}

impl LyapunovMonitor {
    pub fn new(s: f64) -> Self {
        LyapunovMonitor { s, samples: Vec::new(), violations: 0 }
    }
}

impl Observer for LyapunovMonitor {
    fn on_step(&mut self, state: &FlowState, _velocity: &[f64]) {
        let (_, rho_m, _) = closest_pair(&state.config);
        let f = state.energy + rho_m.powf(self.s);
        if let Some(&(_, last)) = self.samples.last() {
            if f > last + 1e-12 * last.abs() {
                self.violations += 1;
            }
        }
        self.samples.push((state.t, f));
    }
}

/// Flow observer tracking the smallest gap delta between accepted steps.
///
/// Intervals where delta shrinks are rated against the decay scale
/// N^(-s) * N_* * delta^(2-s); the largest ratio observed is reported as a
/// per-run roughness constant. The constant is informational: no universal
/// one-sided bound on the shrink rate holds without extra hypotheses, so
/// callers log it rather than assert on it.
pub struct DeltaMonitor {
    s: f64,
    n: usize,
    /// (t, delta) at every accepted step, initial state included.
    pub samples: Vec<(f64, f64)>,
    /// Largest observed growth rate of delta between samples (zero when
    /// delta never grew).
    pub max_growth_rate: f64,
}

impl DeltaMonitor {
    pub fn new(s: f64) -> Self {
        DeltaMonitor { s, n: 0, samples: Vec::new(), max_growth_rate: 0.0 }
    }

    /// Largest |d delta / dt| / (N^(-s) N_* delta^(2-s)) over sampled
    /// intervals where delta decreased, with delta taken at the interval
    /// start. `None` when delta never decreased.
    pub fn roughness_constant(&self) -> Option<f64> {
        if self.n == 0 {
            return None;
        }
        let nf = self.n as f64;
        let scale = nf.powf(-self.s) * n_star(self.s, self.n);
        self.samples
            .windows(2)
            .filter_map(|w| {
                let (t0, d0) = w[0];
                let (t1, d1) = w[1];
                (d1 < d0 && t1 > t0)
                    .then(|| ((d0 - d1) / (t1 - t0)) / (scale * d0.powf(2.0 - self.s)))
            })
            .fold(None, |acc, k| Some(acc.map_or(k, |a: f64| a.max(k))))
    }
}

impl Observer for DeltaMonitor {
    fn on_step(&mut self, state: &FlowState, _velocity: &[f64]) {
        self.n = state.config.len();
        let (delta, _) = state.config.min_gap();
        if let Some(&(t0, d0)) = self.samples.last() {
            if state.t > t0 {
                let rate = (delta - d0) / (state.t - t0);
                self.max_growth_rate = self.max_growth_rate.max(rate);
            }
        }
        self.samples.push((state.t, delta));
    }
}
