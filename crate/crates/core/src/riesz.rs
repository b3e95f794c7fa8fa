//! Inverse-power pair interaction on a closed curve: the potential, the
//! continuum constants, particle configurations, energies with per-offset
//! breakdowns, and analytic energy gradients.
//!
//! Positions are arc-length parameters z_1 < ... < z_N < z_1 + 1 on the
//! unit-length curve, extended periodically by z_{i+N} = z_i + 1. The
//! configuration energy is
//!
//! ```text
//! E = N^(-s-1) * sum_{i<j} W(|x(z_i) - x(z_j)|),     W(r) = r^(-s) / s,
//! ```
//!
//! and the flat variant replaces the chord by the parameter distance along
//! the curve. Offset k collects the pairs (i, i+k); summing offsets up to
//! N/2 (the antipodal offset counts half, as it enumerates every antipodal
//! pair from both sides) recovers the total energy exactly.

use crate::curve::Curve;
use crate::numeric::pairwise_sum;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row-parallel kernels switch to the thread pool at this problem size.
pub(crate) const PARALLEL_THRESHOLD: usize = 256;

#[derive(Debug, Error)]
pub enum RieszError {
    #[error("interaction exponent must be finite and exceed 1, got {s}")]
    BadExponent { s: f64 },
    #[error("invalid configuration: {0}")]
    BadConfiguration(String),
    #[error("series for the continuum constant cannot reach target accuracy at s = {s}")]
    SeriesAccuracy { s: f64 },
}

pub(crate) fn check_s(s: f64) -> Result<(), RieszError> {
    if s.is_finite() && s > 1.0 {
        Ok(())
    } else {
        Err(RieszError::BadExponent { s })
    }
}

/// Pair potential W(r) = r^(-s) / s.
pub fn potential(s: f64, r: f64) -> f64 {
    r.powf(-s) / s
}

/// W'(r) = -r^(-s-1).
pub fn potential_derivative(s: f64, r: f64) -> f64 {
    -r.powf(-s - 1.0)
}

/// Sum over k >= 1 of k^(-s), computed with a certified midpoint tail: the
/// partial sum is extended until the tail correction's own error bound drops
/// below 1e-16 of the result.
pub fn zeta(s: f64) -> Result<f64, RieszError> {
    check_s(s)?;
    let mut m: usize = 64;
    let mut partial = 0.0;
    let mut next_k: usize = 1;
    loop {
        let block: Vec<f64> = (next_k..=m).map(|k| (k as f64).powf(-s)).collect();
        partial += pairwise_sum(&block);
        next_k = m + 1;
        let tail_err = s / 12.0 * (m as f64).powf(-s - 1.0);
        if tail_err <= 1e-16 * partial {
            let tail = (m as f64 + 0.5).powf(1.0 - s) / (s - 1.0);
            return Ok(partial + tail);
        }
        if m >= 200_000_000 {
            return Err(RieszError::SeriesAccuracy { s });
        }
        m *= 2;
    }
}

/// Sum of k^(-s) over 1 <= k <= floor((n-1)/2): the offsets genuinely present
/// among n particles, each counted once.
pub fn zeta_truncated(s: f64, n: usize) -> f64 {
    let kmax = n.saturating_sub(1) / 2;
    let terms: Vec<f64> = (1..=kmax).map(|k| (k as f64).powf(-s)).collect();
    pairwise_sum(&terms)
}

/// Ordered particle positions z_1 < ... < z_N < z_1 + 1 in arc-length
/// parameter. The ordering and the sub-unit span are invariants enforced on
/// every construction path, including deserialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration {
    z: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = RieszError;
    fn try_from(z: Vec<f64>) -> Result<Self, RieszError> {
        Configuration::new(z)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Vec<f64> {
        c.z
    }
}

impl Configuration {
    pub fn new(z: Vec<f64>) -> Result<Self, RieszError> {
        if z.len() < 2 {
            return Err(RieszError::BadConfiguration(format!(
                "need at least 2 particles, got {}",
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(RieszError::BadConfiguration("positions must be finite".into()));
        }
        for w in z.windows(2) {
            if w[1] <= w[0] {
                return Err(RieszError::BadConfiguration(format!(
                    "positions must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let span = z[z.len() - 1] - z[0];
        if span >= 1.0 {
            return Err(RieszError::BadConfiguration(format!(
                "positions must span less than one period, got span {span}"
            )));
        }
        Ok(Configuration { z })
    }

    /// n equally spaced particles starting at `offset`.
    pub fn equally_spaced(n: usize, offset: f64) -> Result<Self, RieszError> {
        if n < 2 {
            return Err(RieszError::BadConfiguration(format!(
                "need at least 2 particles, got {n}"
            )));
        }
        Configuration::new((0..n).map(|i| offset + i as f64 / n as f64).collect())
    }

    /// n particles drawn uniformly on [0, 1) and sorted.
    pub fn random(n: usize, rng: &mut impl Rng) -> Result<Self, RieszError> {
        if n < 2 {
            return Err(RieszError::BadConfiguration(format!(
                "need at least 2 particles, got {n}"
            )));
        }
        loop {
            let mut z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            z.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if z.windows(2).all(|w| w[1] > w[0]) {
                return Configuration::new(z);
            }
        }
    }

    /// Equal spacing with each particle moved by a uniform perturbation of at
    /// most `amplitude` gap widths; amplitude below 1/2 keeps the ordering.
    pub fn jittered(n: usize, amplitude: f64, rng: &mut impl Rng) -> Result<Self, RieszError> {
        if !(0.0..0.5).contains(&amplitude) {
            return Err(RieszError::BadConfiguration(format!(
                "jitter amplitude must lie in [0, 1/2), got {amplitude}"
            )));
        }
        if n < 2 {
            return Err(RieszError::BadConfiguration(format!(
                "need at least 2 particles, got {n}"
            )));
        }
        let z = (0..n)
            .map(|i| {
                let u = 2.0 * rng.gen::<f64>() - 1.0;
                (i as f64 + amplitude * u) / n as f64
            })
            .collect();
        Configuration::new(z)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.z
    }

    /// Gap in front of particle i (cyclic: the last gap wraps to z_1 + 1).
    pub fn gap(&self, i: usize) -> f64 {
        let n = self.z.len();
        if i + 1 < n {
            self.z[i + 1] - self.z[i]
        } else {
            self.z[0] + 1.0 - self.z[n - 1]
        }
    }

    /// Smallest gap and its index.
    pub fn min_gap(&self) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for i in 0..self.z.len() {
            let g = self.gap(i);
            if g < best {
                best = g;
                arg = i;
            }
        }
        (best, arg)
    }

    /// Largest gap and its index.
    pub fn max_gap(&self) -> (f64, usize) {
        let mut best: f64 = -1.0;
        let mut arg = 0;
        for i in 0..self.z.len() {
            let g = self.gap(i);
            if g > best {
                best = g;
                arg = i;
            }
        }
        (best, arg)
    }
}

/// Configuration energy split by particle-index offset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Total energy with chord distances.
    #[serde(rename = "E")]
    pub energy: f64,
    /// Energy of offset k at index k-1, offsets 1..=N/2.
    #[serde(rename = "E_k")]
    pub by_offset: Vec<f64>,
    /// Total energy with parameter (arc) distances in place of chords.
    #[serde(rename = "E_flat")]
    pub flat_energy: f64,
    /// Flat energy of offset k at index k-1.
    #[serde(rename = "E_flat_k")]
    pub flat_by_offset: Vec<f64>,
    /// Truncated offset sum of k^(-s) matching the offsets actually present.
    #[serde(rename = "zeta_sN")]
    pub zeta_truncated: f64,
}

#[inline]
fn inv_rpow(r2: f64, p: f64) -> f64 {
    // r^(-p) from the squared distance; exact fast paths cover the common
    // exponent s = 2 for both the potential (p = s) and the force (p = s+2).
    if p == 2.0 {
        1.0 / r2
    } else if p == 4.0 {
        1.0 / (r2 * r2)
    } else {
        r2.powf(-0.5 * p)
    }
}

struct Geometry {
    pts: Vec<f64>,
    dim: usize,
}

fn geometry(curve: &Curve, cfg: &Configuration) -> Geometry {
    let dim = curve.dim();
    let n = cfg.len();
    let mut pts = vec![0.0; n * dim];
    for (i, &z) in cfg.positions().iter().enumerate() {
        curve.point_into(z, &mut pts[i * dim..(i + 1) * dim]);
    }
    Geometry { pts, dim }
}

#[inline]
fn dist2(g: &Geometry, i: usize, j: usize) -> f64 {
    let a = &g.pts[i * g.dim..(i + 1) * g.dim];
    let b = &g.pts[j * g.dim..(j + 1) * g.dim];
    let mut acc = 0.0;
    for m in 0..g.dim {
        let d = a[m] - b[m];
        acc += d * d;
    }
    acc
}

/// Flat pair distance for indices i < j: the parameter distance measured
/// through the offset min(j-i, n-(j-i)); at the antipodal offset both sides
/// are averaged in potential value, matching the per-offset decomposition.
#[inline]
fn flat_pair_pot(s: f64, z: &[f64], i: usize, j: usize) -> f64 {
    let n = z.len();
    let k = j - i;
    let d = z[j] - z[i];
    if 2 * k < n {
        inv_rpow(d * d, s)
    } else if 2 * k > n {
        let d = 1.0 - d;
        inv_rpow(d * d, s)
    } else {
        let e = 1.0 - d;
        0.5 * (inv_rpow(d * d, s) + inv_rpow(e * e, s))
    }
}

fn map_rows<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    if n >= PARALLEL_THRESHOLD {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Total energy only; bitwise identical to the `energy` field of
/// [`energy`]'s breakdown (they share the row computation).
pub fn energy_value(s: f64, curve: &Curve, cfg: &Configuration) -> Result<f64, RieszError> {
    check_s(s)?;
    let g = geometry(curve, cfg);
    Ok(chord_total(s, &g, cfg.len()))
}

fn chord_total(s: f64, g: &Geometry, n: usize) -> f64 {
    let rows = map_rows(n, |i| {
        let mut acc = 0.0;
        for j in i + 1..n {
            acc += inv_rpow(dist2(g, i, j), s);
        }
        acc
    });
    (n as f64).powf(-s - 1.0) / s * pairwise_sum(&rows)
}

/// Total flat energy: parameter distances in place of chords. Needs no curve.
pub fn flat_energy(s: f64, cfg: &Configuration) -> Result<f64, RieszError> {
    check_s(s)?;
    let z = cfg.positions();
    let n = z.len();
    let rows = map_rows(n, |i| {
        let mut acc = 0.0;
        for j in i + 1..n {
            acc += flat_pair_pot(s, z, i, j);
        }
        acc
    });
    Ok((n as f64).powf(-s - 1.0) / s * pairwise_sum(&rows))
}

/// Full energy breakdown: totals and per-offset contributions for both the
/// chord and the flat distance.
pub fn energy(s: f64, curve: &Curve, cfg: &Configuration) -> Result<EnergyBreakdown, RieszError> {
    check_s(s)?;
    let g = geometry(curve, cfg);
    let z = cfg.positions();
    let n = cfg.len();
    let scale = (n as f64).powf(-s - 1.0) / s;

    let energy = chord_total(s, &g, n);
    let flat = flat_energy(s, cfg)?;

    let kmax = n / 2;
    let by_offset = map_rows(kmax, |k0| {
        let k = k0 + 1;
        let terms: Vec<f64> = (0..n)
            .map(|i| inv_rpow(dist2(&g, i, (i + k) % n), s))
            .collect();
        scale * pairwise_sum(&terms)
    });
    let flat_by_offset = map_rows(kmax, |k0| {
        let k = k0 + 1;
        let terms: Vec<f64> = (0..n)
            .map(|i| {
                let d = if i + k < n {
                    z[i + k] - z[i]
                } else {
                    z[i + k - n] + 1.0 - z[i]
                };
                inv_rpow(d * d, s)
            })
            .collect();
        scale * pairwise_sum(&terms)
    });

    Ok(EnergyBreakdown {
        energy,
        by_offset,
        flat_energy: flat,
        flat_by_offset,
        zeta_truncated: zeta_truncated(s, n),
    })
}

/// Analytic gradient of the energy in the particle parameters:
/// dE/dz_i = -N^(-s-1) * sum_{j != i} r_ij^(-s-2) (x_i - x_j) . x'(z_i).
pub fn energy_gradient(s: f64, curve: &Curve, cfg: &Configuration) -> Result<Vec<f64>, RieszError> {
    check_s(s)?;
    let dim = curve.dim();
    let n = cfg.len();
    let mut pts = vec![0.0; n * dim];
    let mut tans = vec![0.0; n * dim];
    for (i, &zi) in cfg.positions().iter().enumerate() {
        let (p, t) = (&mut pts[i * dim..(i + 1) * dim], &mut tans[i * dim..(i + 1) * dim]);
        curve.point_and_tangent_into(zi, p, t);
    }
    let scale = -(n as f64).powf(-s - 1.0);
    let grad = map_rows(n, |i| {
        let xi = &pts[i * dim..(i + 1) * dim];
        let ti = &tans[i * dim..(i + 1) * dim];
        let mut acc = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = &pts[j * dim..(j + 1) * dim];
            let mut r2 = 0.0;
            let mut dot = 0.0;
            for m in 0..dim {
                let d = xi[m] - xj[m];
                r2 += d * d;
                dot += d * ti[m];
            }
            acc += inv_rpow(r2, s + 2.0) * dot;
        }
        scale * acc
    });
    Ok(grad)
}
