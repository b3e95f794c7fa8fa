//! Closed curves rescaled to unit length and parametrized by arc length.
//!
//! A `Curve` is built from a `CurveSpec`, rescaled so its total length is 1,
//! and evaluated through the arc-length parameter z (periodic with period 1).
//! Tangents come out with unit norm by construction; higher derivatives are
//! produced from the raw parametrization by the chain rule, so the usual
//! identities (x'.x' = 1, x''.x' = 0, x'''.x' + |x''|^2 = 0) hold to rounding.

mod avoid;
mod raw;

use crate::numeric::{gl5, UniformCubic};
use raw::{PeriodicSpline, TrigCurve};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest ambient dimension accepted for tabulated curves.
pub const MAX_DIM: usize = 16;

/// Default separation threshold used when caching the self-avoidance radius.
pub const DEFAULT_R1: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("invalid curve specification: {0}")]
    BadSpec(String),
    #[error("interpolation grid too small: {got}, need at least {min}")]
    GridTooSmall { got: usize, min: usize },
    #[error("curve data is not periodic: endpoint mismatch {gap:.3e}")]
    NonPeriodic { gap: f64 },
    #[error("parametrization speed vanishes near u = {u:.6}")]
    ZeroSpeed { u: f64 },
    #[error("curve self-intersects or nearly does: minimal chord {min_chord:.3e}")]
    SelfIntersection { min_chord: f64 },
    #[error("separation threshold must lie in (0, 1/2), got {r1}")]
    BadSeparation { r1: f64 },
    #[error("arc-length tables failed to converge: residual {err:.3e}")]
    Accuracy { err: f64 },
}

/// Declarative description of a closed curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    Circle {
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Ellipse {
        semi_axis_a: f64,
        semi_axis_b: f64,
    },
    Knot {
        p: u32,
        q: u32,
        major_radius: f64,
        minor_radius: f64,
    },
    /// Planar peanut-shaped curve r(theta) = 1 + amplitude*cos(2 theta) whose
    /// opposite lobes approach each other; useful for stressing the
    /// self-avoidance search.
    Pinched {
        #[serde(default = "default_pinch")]
        amplitude: f64,
    },
    /// Uniformly spaced samples, one row per parameter value: [u, x1, ..., xd].
    Table { rows: Vec<Vec<f64>> },
}

fn default_radius() -> f64 {
    1.0
}

fn default_pinch() -> f64 {
    0.9
}

enum RawCurve {
    Trig(TrigCurve),
    Spline(PeriodicSpline),
}

impl RawCurve {
    fn dim(&self) -> usize {
        match self {
            RawCurve::Trig(c) => c.dim,
            RawCurve::Spline(c) => c.dim,
        }
    }

    fn eval_into(&self, u: f64, order: u32, out: &mut [f64]) {
        let u = u - u.floor();
        match self {
            RawCurve::Trig(c) => c.eval_into(u, order, out),
            RawCurve::Spline(c) => c.eval_into(u, order, out),
        }
    }
}

/// Distance between two parameters on the unit-period circle:
/// min over integers k of |y - z + k|. Always in [0, 1/2].
pub fn torus_distance(y: f64, z: f64) -> f64 {
    let r = (y - z).rem_euclid(1.0);
    r.min(1.0 - r)
}

/// A closed curve of unit length addressed by arc length.
pub struct Curve {
    raw: RawCurve,
    dim: usize,
    raw_length: f64,
    /// Inverse parametrization: arc-length fraction -> raw parameter.
    inv: UniformCubic,
    r0: f64,
    r1_default: f64,
}

impl Curve {
    /// Builds the arc-length tables for `spec`. `grid_size` controls the
    /// initial quadrature grid (at least 256); it is refined automatically
    /// until the inverse parametrization passes a consistency probe.
    pub fn build(spec: &CurveSpec, grid_size: usize) -> Result<Curve, CurveError> {
        if grid_size < 256 {
            return Err(CurveError::GridTooSmall { got: grid_size, min: 256 });
        }
        let mut raw = raw_from_spec(spec)?;
        let dim = raw.dim();

        let mut grid = grid_size;
        let mut last_err = f64::INFINITY;
        for _ in 0..6 {
            let (raw_length, inv) = build_tables(&raw, dim, grid)?;
            let mut curve = Curve {
                raw,
                dim,
                raw_length,
                inv,
                r0: f64::NAN,
                r1_default: DEFAULT_R1,
            };
            last_err = curve.probe_badness();
            if last_err < 1.0 {
                let (min_chord, _, _) = avoid::min_chord_separated(&curve, curve.r1_default);
                if min_chord < 1e-6 {
                    return Err(CurveError::SelfIntersection { min_chord });
                }
                curve.r0 = 0.9 * min_chord;
                return Ok(curve);
            }
            raw = curve.raw;
            grid *= 2;
        }
        Err(CurveError::Accuracy { err: last_err })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the curve before rescaling to unit length.
    pub fn raw_length(&self) -> f64 {
        self.raw_length
    }

    /// Cached self-avoidance radius computed at the default separation
    /// threshold during construction.
    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Separation threshold the cached radius was computed at.
    pub fn r1_default(&self) -> f64 {
        self.r1_default
    }

    /// Raw parameter corresponding to arc-length position z (z wraps mod 1).
    pub fn param(&self, z: f64) -> f64 {
        let zw = z - z.floor();
        self.inv.eval(zw).clamp(0.0, 1.0)
    }

    /// Position on the unit-length curve.
    pub fn point(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.point_into(z, &mut out);
        out
    }

    pub fn point_into(&self, z: f64, out: &mut [f64]) {
        let u = self.param(z);
        self.raw.eval_into(u, 0, out);
        let inv_l = 1.0 / self.raw_length;
        for v in &mut out[..self.dim] {
            *v *= inv_l;
        }
    }

    /// Position and unit tangent with a single parameter lookup.
    pub fn point_and_tangent_into(&self, z: f64, x: &mut [f64], t: &mut [f64]) {
        let u = self.param(z);
        self.raw.eval_into(u, 0, x);
        self.raw.eval_into(u, 1, t);
        let inv_l = 1.0 / self.raw_length;
        let mut v2 = 0.0;
        for &c in &t[..self.dim] {
            v2 += c * c;
        }
        let inv_v = 1.0 / v2.sqrt();
        for m in 0..self.dim {
            x[m] *= inv_l;
            t[m] *= inv_v;
        }
    }

    /// Derivative of the arc-length parametrization; orders 1..=3.
    pub fn derivative(&self, z: f64, order: u32) -> Vec<f64> {
        assert!((1..=3).contains(&order), "derivative order must be 1..=3");
        let u = self.param(z);
        let d = self.dim;
        let l = self.raw_length;
        let mut y1 = vec![0.0; d];
        self.raw.eval_into(u, 1, &mut y1);
        let v2: f64 = y1.iter().map(|c| c * c).sum();
        let v = v2.sqrt();
        if order == 1 {
            return y1.iter().map(|c| c / v).collect();
        }
        let mut y2 = vec![0.0; d];
        self.raw.eval_into(u, 2, &mut y2);
        let vp = y1.iter().zip(&y2).map(|(a, b)| a * b).sum::<f64>() / v;
        // T' = y''/v - y' v'/v^2
        let tp: Vec<f64> = (0..d).map(|m| y2[m] / v - y1[m] * vp / v2).collect();
        if order == 2 {
            return tp.iter().map(|c| c * l / v).collect();
        }
        let mut y3 = vec![0.0; d];
        self.raw.eval_into(u, 3, &mut y3);
        let y2n2: f64 = y2.iter().map(|c| c * c).sum();
        let y1y3: f64 = y1.iter().zip(&y3).map(|(a, b)| a * b).sum();
        let vpp = (y2n2 + y1y3 - vp * vp) / v;
        // T'' = y'''/v - 2 y'' v'/v^2 + y' (2 v'^2/v^3 - v''/v^2)
        let tpp: Vec<f64> = (0..d)
            .map(|m| {
                y3[m] / v - 2.0 * y2[m] * vp / v2 + y1[m] * (2.0 * vp * vp / (v2 * v) - vpp / v2)
            })
            .collect();
        (0..d)
            .map(|m| l * l * (tpp[m] / v2 - tp[m] * vp / (v2 * v)))
            .collect()
    }

    /// Euclidean distance between the curve points at parameters y and z.
    pub fn chord(&self, y: f64, z: f64) -> f64 {
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        self.point_into(y, &mut a[..self.dim]);
        self.point_into(z, &mut b[..self.dim]);
        let mut acc = 0.0;
        for m in 0..self.dim {
            let diff = a[m] - b[m];
            acc += diff * diff;
        }
        acc.sqrt()
    }

    /// Curvature correction coefficient ((s-2)/24)|x''(z)|^2 entering the
    /// short-distance expansion of the interaction along the curve.
    pub fn kappa(&self, s: f64, z: f64) -> f64 {
        let x2 = self.derivative(z, 2);
        let n2: f64 = x2.iter().map(|c| c * c).sum();
        (s - 2.0) / 24.0 * n2
    }

    /// Recomputes the self-avoidance radius at a caller-provided separation
    /// threshold: 0.9 times the minimal chord over parameter pairs at
    /// circle-distance at least `r1`.
    pub fn compute_r0(&self, r1: f64) -> Result<f64, CurveError> {
        if !(r1 > 0.0 && r1 < 0.5) {
            return Err(CurveError::BadSeparation { r1 });
        }
        let (min_chord, _, _) = avoid::min_chord_separated(self, r1);
        if min_chord < 1e-6 {
            return Err(CurveError::SelfIntersection { min_chord });
        }
        Ok(0.9 * min_chord)
    }

    /// Lower bound on the chord between y and z: min(d(y,z)/2, r0) with the
    /// cached self-avoidance radius.
    pub fn lower_chord_bound(&self, y: f64, z: f64) -> f64 {
        (0.5 * torus_distance(y, z)).min(self.r0)
    }

    /// Normalized badness of the arc-length tables; values below 1 pass.
    /// Unit speed is measured by a central difference of positions. The
    /// chord between z-h and z+h falls short of the arc 2h by the factor
    /// 1 - h^2 |x''|^2 / 6 + ..., so curves with sharp bends get an allowance
    /// matching that truncation on top of the 1e-6 tolerance for table error.
    fn probe_badness(&self) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut a = [0.0; MAX_DIM];
        let mut b = [0.0; MAX_DIM];
        for i in 0..64 {
            let z = (i as f64 + 0.5) / 64.0;
            self.point_into(z - h, &mut a[..self.dim]);
            self.point_into(z + h, &mut b[..self.dim]);
            let mut acc = 0.0;
            for m in 0..self.dim {
                let diff = b[m] - a[m];
                acc += diff * diff;
            }
            let dev = (acc.sqrt() / (2.0 * h) - 1.0).abs();
            let k2: f64 = self.derivative(z, 2).iter().map(|c| c * c).sum();
            let allow = 1e-6 + 0.25 * h * h * k2;
            worst = worst.max(dev / allow);
        }
        worst
    }
}

fn raw_from_spec(spec: &CurveSpec) -> Result<RawCurve, CurveError> {
    match spec {
        CurveSpec::Circle { radius } => {
            if !(*radius > 0.0) {
                return Err(CurveError::BadSpec(format!("circle radius must be positive, got {radius}")));
            }
            Ok(RawCurve::Trig(TrigCurve::circle(*radius)))
        }
        CurveSpec::Ellipse { semi_axis_a, semi_axis_b } => {
            if !(*semi_axis_a > 0.0 && *semi_axis_b > 0.0) {
                return Err(CurveError::BadSpec("ellipse semi-axes must be positive".into()));
            }
            Ok(RawCurve::Trig(TrigCurve::ellipse(*semi_axis_a, *semi_axis_b)))
        }
        CurveSpec::Knot { p, q, major_radius, minor_radius } => {
            if *p == 0 || *q == 0 {
                return Err(CurveError::BadSpec("knot winding numbers must be positive".into()));
            }
            if gcd(*p, *q) != 1 {
                return Err(CurveError::BadSpec(format!(
                    "knot winding numbers must be coprime, got ({p}, {q})"
                )));
            }
            if !(*minor_radius > 0.0 && *minor_radius < *major_radius) {
                return Err(CurveError::BadSpec(
                    "knot needs 0 < minor_radius < major_radius".into(),
                ));
            }
            Ok(RawCurve::Trig(TrigCurve::torus_knot(*p, *q, *major_radius, *minor_radius)))
        }
        CurveSpec::Pinched { amplitude } => {
            if !(*amplitude >= 0.0 && *amplitude < 1.0) {
                return Err(CurveError::BadSpec(format!(
                    "pinch amplitude must lie in [0, 1), got {amplitude}"
                )));
            }
            Ok(RawCurve::Trig(TrigCurve::pinched(*amplitude)))
        }
        CurveSpec::Table { rows } => table_from_rows(rows),
    }
}

fn table_from_rows(rows: &[Vec<f64>]) -> Result<RawCurve, CurveError> {
    let mut rows: Vec<&Vec<f64>> = rows.iter().collect();
    if rows.len() < 8 {
        return Err(CurveError::BadSpec(format!(
            "table needs at least 8 rows, got {}",
            rows.len()
        )));
    }
    let width = rows[0].len();
    if width < 3 {
        return Err(CurveError::BadSpec("table rows need a parameter and at least 2 coordinates".into()));
    }
    if width - 1 > MAX_DIM {
        return Err(CurveError::BadSpec(format!(
            "table dimension {} exceeds the supported maximum {}",
            width - 1,
            MAX_DIM
        )));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(CurveError::BadSpec("table rows have inconsistent lengths".into()));
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(CurveError::BadSpec("table contains non-finite values".into()));
    }
    for w in rows.windows(2) {
        if w[1][0] <= w[0][0] {
            return Err(CurveError::BadSpec("table parameter column must be strictly increasing".into()));
        }
    }
    // A closing row at u0 + 1 may duplicate the first row; it must match.
    let first = rows[0];
    let last = rows[rows.len() - 1];
    if (last[0] - first[0] - 1.0).abs() < 1e-9 {
        let scale = first[1..]
            .iter()
            .chain(&last[1..])
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let gap = first[1..]
            .iter()
            .zip(&last[1..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if gap > 1e-9 * scale {
            return Err(CurveError::NonPeriodic { gap });
        }
        rows.pop();
    }
    let n = rows.len();
    let u0 = rows[0][0];
    let dim = width - 1;
    for (j, r) in rows.iter().enumerate() {
        let expect = u0 + j as f64 / n as f64;
        if (r[0] - expect).abs() > 1e-7 {
            return Err(CurveError::BadSpec(format!(
                "table parameter must be uniformly spaced with step 1/{n}; row {j} has u = {}",
                r[0]
            )));
        }
    }
    let mut samples = vec![0.0; n * dim];
    for (j, r) in rows.iter().enumerate() {
        samples[j * dim..(j + 1) * dim].copy_from_slice(&r[1..]);
    }
    Ok(RawCurve::Spline(PeriodicSpline::from_samples(&samples, n, dim)))
}

/// Builds the cumulative-length table on `grid` intervals and from it the
/// inverse map from arc-length fraction to raw parameter: node values found
/// by bracketed Newton iterations, joined by a monotone cubic with
/// slope-limited exact derivatives.
fn build_tables(raw: &RawCurve, dim: usize, grid: usize) -> Result<(f64, UniformCubic), CurveError> {
    let n = grid;
    let mut buf = vec![0.0; dim];
    let mut speed = |u: f64| -> f64 {
        raw.eval_into(u, 1, &mut buf);
        buf.iter().map(|c| c * c).sum::<f64>().sqrt()
    };

    let mut v_nodes = vec![0.0; n + 1];
    let mut v_mid = vec![0.0; n];
    let mut vmin = f64::INFINITY;
    let mut vmax: f64 = 0.0;
    let mut u_min = 0.0;
    for i in 0..=n {
        let v = speed(i as f64 / n as f64);
        v_nodes[i] = v;
        if v < vmin {
            vmin = v;
            u_min = i as f64 / n as f64;
        }
        vmax = vmax.max(v);
    }
    for i in 0..n {
        let v = speed((i as f64 + 0.5) / n as f64);
        v_mid[i] = v;
        if v < vmin {
            vmin = v;
            u_min = (i as f64 + 0.5) / n as f64;
        }
        vmax = vmax.max(v);
    }
    if !(vmin > 1e-6 * vmax) {
        return Err(CurveError::ZeroSpeed { u: u_min });
    }

    // Cumulative length per interval. A Simpson pass over the stored node and
    // midpoint speeds gives the coarse picture cheaply, but its error
    // oscillates at the grid wavelength, and differencing positions three
    // times amplifies that wiggle by the cube of the inverse step. The nodes
    // are therefore accumulated with the Gauss-Legendre panel, whose error on
    // these speeds sits at machine precision.
    let h = 1.0 / n as f64;
    let mut cum = vec![0.0; n + 1];
    for i in 0..n {
        let a = i as f64 * h;
        cum[i + 1] = cum[i] + gl5(a, a + h, &mut speed);
    }
    let total = cum[n];

    // Arc length from the nearest node, refined with Gauss-Legendre.
    let arclen = |u: f64, speed: &mut dyn FnMut(f64) -> f64| -> f64 {
        let i = ((u * n as f64).floor() as usize).min(n - 1);
        let ui = i as f64 * h;
        cum[i] + gl5(ui, u, &mut *speed)
    };

    // Invert at m+1 uniform arc-length fractions. The table is kept dense so
    // that interpolation noise in positions stays near machine precision;
    // finite differences of positions divide that noise by powers of the step.
    let m = 131_072.max(2 * n);
    let mut y: Vec<f64> = vec![0.0; m + 1];
    let mut d: Vec<f64> = vec![0.0; m + 1];
    y[m] = 1.0;
    d[0] = total / v_nodes[0];
    d[m] = total / v_nodes[n];
    for j in 1..m {
        let target = j as f64 / m as f64 * total;
        // Bracket from the cumulative table.
        let mut lo = match cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        lo = lo.min(n - 1);
        let (mut a, mut b) = (lo as f64 * h, (lo + 1) as f64 * h);
        let mut u = y[j - 1].max(a).min(b);
        if u <= a || u >= b {
            u = 0.5 * (a + b);
        }
        for _ in 0..60 {
            let f = arclen(u, &mut speed) - target;
            if f > 0.0 {
                b = u;
            } else {
                a = u;
            }
            if f.abs() <= 1e-15 * total {
                break;
            }
            let v = speed(u);
            let mut next = u - f / v;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - u).abs() < 1e-17 {
                break;
            }
            u = next;
        }
        y[j] = u;
        d[j] = total / speed(u);
    }
    // Limit slopes so the cubic stays monotone even on rough data.
    for j in 0..=m {
        let sec_lo = if j > 0 { (y[j] - y[j - 1]) * m as f64 } else { f64::INFINITY };
        let sec_hi = if j < m { (y[j + 1] - y[j]) * m as f64 } else { f64::INFINITY };
        let cap = 3.0 * sec_lo.min(sec_hi);
        if d[j] > cap {
            d[j] = cap;
        }
        if d[j] < 0.0 {
            d[j] = 0.0;
        }
    }
    Ok((total, UniformCubic::new(y, d)))
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle() -> Curve {
        Curve::build(&CurveSpec::Circle { radius: 1.0 }, 1024).unwrap()
    }

    fn ellipse() -> Curve {
        Curve::build(&CurveSpec::Ellipse { semi_axis_a: 2.0, semi_axis_b: 1.0 }, 1024).unwrap()
    }

    fn knot() -> Curve {
        Curve::build(
            &CurveSpec::Knot { p: 2, q: 3, major_radius: 1.0, minor_radius: 0.3 },
            1024,
        )
        .unwrap()
    }

    #[test]
    fn circle_geometry_closed_forms() {
        let c = circle();
        assert_relative_eq!(c.raw_length(), 2.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(c.chord(0.0, 0.5), 1.0 / PI, max_relative = 1e-10);
        assert_relative_eq!(c.chord(0.0, 0.25), 2.0_f64.sqrt() / (2.0 * PI), max_relative = 1e-10);
        assert_relative_eq!(c.chord(0.1, 0.35), (0.25 * PI).sin() / PI, max_relative = 1e-10);
        let p = c.point(0.0);
        assert_relative_eq!(p[0], 1.0 / (2.0 * PI), max_relative = 1e-12);
        assert!(p[1].abs() < 1e-12);
        for i in 0..37 {
            let z = i as f64 / 37.0;
            let p = c.point(z);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert_relative_eq!(r, 1.0 / (2.0 * PI), max_relative = 1e-9);
        }
    }

    #[test]
    fn tangent_is_unit_and_frenet_identities_hold() {
        for c in [circle(), ellipse(), knot()] {
            for i in 0..41 {
                let z = i as f64 / 41.0;
                let x1 = c.derivative(z, 1);
                let x2 = c.derivative(z, 2);
                let x3 = c.derivative(z, 3);
                let n1: f64 = x1.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n1 - 1.0).abs() < 1e-14, "tangent norm {n1} at z={z}");
                let d12: f64 = x1.iter().zip(&x2).map(|(a, b)| a * b).sum();
                let n2sq: f64 = x2.iter().map(|v| v * v).sum();
                let d13: f64 = x1.iter().zip(&x3).map(|(a, b)| a * b).sum();
                assert!(d12.abs() < 1e-8 * n2sq.max(1.0), "x''.x' = {d12} at z={z}");
                assert!(
                    (d13 + n2sq).abs() < 1e-6 * n2sq.max(1.0),
                    "x'''.x' + |x''|^2 = {} at z={z}",
                    d13 + n2sq
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Fourth-order central stencils at step 1e-4 against the analytic
        // derivatives. Differencing positions amplifies their roundoff by
        // h^-order, so each order carries an absolute floor next to the 1e-5
        // relative tolerance; the relative branch is the binding one wherever
        // the derivative magnitude is above the stencil's resolution.
        let h = 1e-4;
        for c in [circle(), ellipse(), knot()] {
            let d = c.dim();
            for i in 0..23 {
                let z = (i as f64 + 0.41) / 23.0;
                let p: Vec<Vec<f64>> =
                    (-3..=3).map(|k| c.point(z + k as f64 * h)).collect();
                let xmax = p[3].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for order in 1..=3u32 {
                    let exact = c.derivative(z, order);
                    let fd: Vec<f64> = (0..d)
                        .map(|m| match order {
                            1 => {
                                (-p[5][m] + 8.0 * p[4][m] - 8.0 * p[2][m] + p[1][m])
                                    / (12.0 * h)
                            }
                            2 => {
                                (-p[5][m] + 16.0 * p[4][m] - 30.0 * p[3][m] + 16.0 * p[2][m]
                                    - p[1][m])
                                    / (12.0 * h * h)
                            }
                            _ => {
                                (p[0][m] / 8.0 - p[1][m] + 13.0 * p[2][m] / 8.0
                                    - 13.0 * p[4][m] / 8.0
                                    + p[5][m]
                                    - p[6][m] / 8.0)
                                    / (h * h * h)
                            }
                        })
                        .collect();
                    let num: f64 = exact
                        .iter()
                        .zip(&fd)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let den: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let floor = 80.0 * f64::EPSILON * xmax / h.powi(order as i32);
                    assert!(
                        num < (1e-5 * den).max(floor),
                        "order {order} mismatch {:.3e} at z={z}",
                        num / den
                    );
                }
            }
        }
    }

    #[test]
    fn wrap_is_bitwise_periodic_at_dyadic_parameters() {
        let c = ellipse();
        for z in [0.0, 0.25, 0.375, 0.5, 0.8125] {
            assert_eq!(c.point(z), c.point(z + 1.0));
            assert_eq!(c.point(z), c.point(z - 1.0));
            assert_eq!(c.derivative(z, 2), c.derivative(z + 2.0, 2));
        }
    }

    #[test]
    fn curvature_coefficient_closed_forms() {
        let c = circle();
        assert_relative_eq!(c.kappa(3.0, 0.3), PI * PI / 6.0, max_relative = 1e-9);
        assert!(c.kappa(2.0, 0.3).abs() < 1e-12);
        assert!(c.kappa(1.5, 0.3) < 0.0);
        let e = ellipse();
        assert!(e.kappa(3.0, 0.0) > 0.0);
    }

    #[test]
    fn avoidance_radius_circle_closed_forms() {
        let c = circle();
        assert_relative_eq!(c.r0(), 0.9 * (0.05 * PI).sin() / PI, max_relative = 1e-6);
        assert_relative_eq!(
            c.compute_r0(0.1).unwrap(),
            0.9 * (0.1 * PI).sin() / PI,
            max_relative = 1e-6
        );
        assert_relative_eq!(c.compute_r0(0.5 - 1e-12).unwrap(), 0.9 / PI, max_relative = 1e-4);
        assert!(matches!(c.compute_r0(0.6), Err(CurveError::BadSeparation { .. })));
        assert!(matches!(c.compute_r0(0.0), Err(CurveError::BadSeparation { .. })));
    }

    #[test]
    fn avoidance_radius_frozen_nontrivial_cases() {
        let e = ellipse();
        assert_relative_eq!(e.compute_r0(0.15).unwrap(), 0.1089228870810463, max_relative = 1e-5);
        let p = Curve::build(&CurveSpec::Pinched { amplitude: 0.9 }, 1024).unwrap();
        assert_relative_eq!(p.compute_r0(0.2).unwrap(), 0.017527337070072053, max_relative = 1e-5);
        // The pinch dominates: the cached radius at the default threshold is
        // the same neck distance, far below the threshold itself.
        assert_relative_eq!(p.r0(), 0.017527337070072053, max_relative = 1e-5);
        assert!(p.r0() < 0.45 * p.r1_default());
        assert_relative_eq!(p.lower_chord_bound(0.0, 0.5), p.r0(), max_relative = 1e-15);
        let k = knot();
        assert_relative_eq!(k.compute_r0(0.05).unwrap(), 0.03905820273100529, max_relative = 1e-4);
    }

    #[test]
    fn lower_chord_bound_holds_on_benign_curves() {
        for c in [circle(), ellipse(), knot()] {
            for i in 0..60 {
                for j in 0..60 {
                    let (y, z) = (i as f64 / 60.0, (j as f64 + 0.5) / 60.0);
                    if torus_distance(y, z) < 1e-3 {
                        continue;
                    }
                    assert!(c.chord(y, z) >= c.lower_chord_bound(y, z) * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn raw_lengths_match_reference_quadrature() {
        assert_relative_eq!(ellipse().raw_length(), 9.688448220547675, max_relative = 1e-9);
        assert_relative_eq!(knot().raw_length(), 13.825520946752423, max_relative = 1e-7);
        let p = Curve::build(&CurveSpec::Pinched { amplitude: 0.9 }, 1024).unwrap();
        assert_relative_eq!(p.raw_length(), 10.269671843496592, max_relative = 1e-7);
    }

    #[test]
    fn table_curve_reproduces_analytic_circle() {
        let n = 256;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let u = j as f64 / n as f64;
                vec![u, (2.0 * PI * u).cos(), (2.0 * PI * u).sin()]
            })
            .collect();
        let t = Curve::build(&CurveSpec::Table { rows }, 1024).unwrap();
        let c = circle();
        assert_relative_eq!(t.raw_length(), 2.0 * PI, max_relative = 1e-9);
        for i in 0..97 {
            let z = i as f64 / 97.0;
            let pt = t.point(z);
            let pc = c.point(z);
            for m in 0..2 {
                assert!((pt[m] - pc[m]).abs() < 1e-8, "point mismatch at z={z}");
            }
            let dt = t.derivative(z, 1);
            let dc = c.derivative(z, 1);
            for m in 0..2 {
                assert!((dt[m] - dc[m]).abs() < 1e-6, "tangent mismatch at z={z}");
            }
        }
    }

    #[test]
    fn table_curve_accepts_matching_closing_row() {
        let n = 64;
        let mut rows: Vec<Vec<f64>> = (0..=n)
            .map(|j| {
                let u = j as f64 / n as f64;
                vec![u, (2.0 * PI * u).cos(), (2.0 * PI * u).sin()]
            })
            .collect();
        assert!(Curve::build(&CurveSpec::Table { rows: rows.clone() }, 1024).is_ok());
        rows[n][1] += 1e-3;
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows }, 1024),
            Err(CurveError::NonPeriodic { .. })
        ));
    }

    #[test]
    fn table_validation_rejects_bad_input() {
        let good: Vec<Vec<f64>> = (0..16)
            .map(|j| {
                let u = j as f64 / 16.0;
                vec![u, (2.0 * PI * u).cos(), (2.0 * PI * u).sin()]
            })
            .collect();
        let mut short = good.clone();
        short.truncate(5);
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows: short }, 1024),
            Err(CurveError::BadSpec(_))
        ));
        let mut ragged = good.clone();
        ragged[3] = vec![ragged[3][0], 1.0];
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows: ragged }, 1024),
            Err(CurveError::BadSpec(_))
        ));
        let mut uneven = good.clone();
        uneven[5][0] += 0.01;
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows: uneven }, 1024),
            Err(CurveError::BadSpec(_))
        ));
    }

    #[test]
    fn table_curve_detects_self_intersection() {
        // Gerono lemniscate: passes through the origin twice.
        let n = 256;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let u = 2.0 * PI * j as f64 / n as f64;
                vec![j as f64 / n as f64, u.cos(), u.sin() * u.cos()]
            })
            .collect();
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows }, 1024),
            Err(CurveError::SelfIntersection { .. })
        ));
    }

    #[test]
    fn table_curve_detects_vanishing_speed() {
        // Circle traversed with a parametrization whose speed vanishes at u=0.
        let n = 256;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let u = j as f64 / n as f64;
                let g = u - (2.0 * PI * u).sin() / (2.0 * PI);
                vec![u, (2.0 * PI * g).cos(), (2.0 * PI * g).sin()]
            })
            .collect();
        assert!(matches!(
            Curve::build(&CurveSpec::Table { rows }, 1024),
            Err(CurveError::ZeroSpeed { .. })
        ));
    }

    #[test]
    fn spec_validation_rejects_bad_parameters() {
        assert!(matches!(
            Curve::build(&CurveSpec::Circle { radius: -1.0 }, 1024),
            Err(CurveError::BadSpec(_))
        ));
        assert!(matches!(
            Curve::build(&CurveSpec::Ellipse { semi_axis_a: 0.0, semi_axis_b: 1.0 }, 1024),
            Err(CurveError::BadSpec(_))
        ));
        assert!(matches!(
            Curve::build(
                &CurveSpec::Knot { p: 2, q: 4, major_radius: 1.0, minor_radius: 0.3 },
                1024
            ),
            Err(CurveError::BadSpec(_))
        ));
        assert!(matches!(
            Curve::build(
                &CurveSpec::Knot { p: 2, q: 3, major_radius: 0.3, minor_radius: 1.0 },
                1024
            ),
            Err(CurveError::BadSpec(_))
        ));
        assert!(matches!(
            Curve::build(&CurveSpec::Pinched { amplitude: 1.0 }, 1024),
            Err(CurveError::BadSpec(_))
        ));
        assert!(matches!(
            Curve::build(&CurveSpec::Circle { radius: 1.0 }, 100),
            Err(CurveError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn torus_distance_cases() {
        assert_relative_eq!(torus_distance(0.1, 0.25), 0.15, max_relative = 1e-15);
        assert_relative_eq!(torus_distance(0.9, 0.1), 0.2, max_relative = 1e-12);
        assert_eq!(torus_distance(0.3, 0.3), 0.0);
        assert_relative_eq!(torus_distance(0.0, 0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(torus_distance(-0.2, 0.3), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn param_is_monotone_and_consistent_with_arc_length() {
        let e = ellipse();
        let mut prev = e.param(0.0);
        for i in 1..=2000 {
            let z = i as f64 / 2000.0 * (1.0 - 1e-12);
            let u = e.param(z);
            assert!(u >= prev, "param not monotone at z={z}");
            prev = u;
        }
        let h = 1e-6;
        for i in 0..50 {
            let z = i as f64 / 50.0;
            let step = e.chord(z, z + h);
            assert_relative_eq!(step, h, max_relative = 1e-4);
        }
    }

    #[test]
    fn spec_serde_round_trip() {
        let spec = CurveSpec::Knot { p: 2, q: 3, major_radius: 1.0, minor_radius: 0.25 };
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"knot\""));
        assert!(text.contains("\"major_radius\""));
        let back: CurveSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let defaulted: CurveSpec = serde_json::from_str("{\"kind\":\"circle\"}").unwrap();
        assert_eq!(defaulted, CurveSpec::Circle { radius: 1.0 });
    }
}
