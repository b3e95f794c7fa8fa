//! Raw periodic curves in their native parametrization: closed-form
//! trigonometric curves for the built-in shapes and a periodic quintic
//! B-spline for tabulated data. Both expose derivatives up to order four.

use std::f64::consts::PI;

/// One cosine term a * cos(2*pi*k*u + phase) of a coordinate function.
#[derive(Clone, Debug)]
pub struct Harmonic {
    pub amp: f64,
    pub freq: f64,
    pub phase: f64,
}

impl Harmonic {
    fn cos(amp: f64, k: f64) -> Self {
        Harmonic { amp, freq: 2.0 * PI * k, phase: 0.0 }
    }
    fn sin(amp: f64, k: f64) -> Self {
        Harmonic { amp, freq: 2.0 * PI * k, phase: -0.5 * PI }
    }
}

/// A curve whose coordinates are finite sums of harmonics. Derivatives of any
/// order are exact: the r-th derivative of a*cos(w u + p) is
/// a*w^r*cos(w u + p + r*pi/2).
#[derive(Clone, Debug)]
pub struct TrigCurve {
    pub dim: usize,
    terms: Vec<Vec<Harmonic>>,
}

impl TrigCurve {
    pub fn circle(radius: f64) -> Self {
        TrigCurve {
            dim: 2,
            terms: vec![
                vec![Harmonic::cos(radius, 1.0)],
                vec![Harmonic::sin(radius, 1.0)],
            ],
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        TrigCurve {
            dim: 2,
            terms: vec![vec![Harmonic::cos(a, 1.0)], vec![Harmonic::sin(b, 1.0)]],
        }
    }

    /// (p, q) torus knot on the torus with the given major/minor radii,
    /// written out in pure harmonics via product-to-sum identities.
    pub fn torus_knot(p: u32, q: u32, major: f64, minor: f64) -> Self {
        let (p, q) = (p as f64, q as f64);
        let h = 0.5 * minor;
        TrigCurve {
            dim: 3,
            terms: vec![
                vec![
                    Harmonic::cos(major, p),
                    Harmonic::cos(h, p + q),
                    Harmonic::cos(h, p - q),
                ],
                vec![
                    Harmonic::sin(major, p),
                    Harmonic::sin(h, p + q),
                    Harmonic::sin(h, p - q),
                ],
                vec![Harmonic::sin(minor, q)],
            ],
        }
    }

    /// Planar polar curve r(theta) = 1 + amplitude*cos(2*theta): a peanut
    /// shape whose opposite sides nearly touch as amplitude approaches 1.
    pub fn pinched(amplitude: f64) -> Self {
        let b = amplitude;
        TrigCurve {
            dim: 2,
            terms: vec![
                vec![Harmonic::cos(1.0 + 0.5 * b, 1.0), Harmonic::cos(0.5 * b, 3.0)],
                vec![Harmonic::sin(1.0 - 0.5 * b, 1.0), Harmonic::sin(0.5 * b, 3.0)],
            ],
        }
    }

    pub fn eval_into(&self, u: f64, order: u32, out: &mut [f64]) {
        let shift = 0.5 * PI * order as f64;
        for (m, coord) in self.terms.iter().enumerate() {
            let mut acc = 0.0;
            for h in coord {
                let scale = h.amp * h.freq.powi(order as i32);
                acc += scale * (h.freq * u + h.phase + shift).cos();
            }
            out[m] = acc;
        }
    }
}

/// Centered uniform B-spline basis of degree k, evaluated by the standard
/// recursion. Support is (-(k+1)/2, (k+1)/2).
fn bspl(k: u32, t: f64) -> f64 {
    if k == 0 {
        return if (-0.5..0.5).contains(&t) { 1.0 } else { 0.0 };
    }
    let half = 0.5 * (k as f64 + 1.0);
    if t <= -half || t >= half {
        return 0.0;
    }
    ((t + half) * bspl(k - 1, t + 0.5) + (half - t) * bspl(k - 1, t - 0.5)) / k as f64
}

/// r-th derivative of the centered degree-k basis.
fn bspl_deriv(k: u32, r: u32, t: f64) -> f64 {
    if r == 0 {
        bspl(k, t)
    } else {
        bspl_deriv(k - 1, r - 1, t + 0.5) - bspl_deriv(k - 1, r - 1, t - 0.5)
    }
}

/// Periodic quintic B-spline through n uniformly spaced samples per
/// coordinate. Four continuous derivatives; evaluation touches six
/// coefficients per coordinate.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    pub dim: usize,
    n: usize,
    /// Coefficients, sample-major: coef[j * dim + m].
    coef: Vec<f64>,
}

impl PeriodicSpline {
    /// `samples` is sample-major flat data of length n*dim; sample j holds the
    /// curve value at u = j/n.
    pub fn from_samples(samples: &[f64], n: usize, dim: usize) -> Self {
        assert_eq!(samples.len(), n * dim);
        assert!(n >= 6);
        let mut coef = samples.to_vec();
        let mut column = vec![0.0; n];
        for m in 0..dim {
            for j in 0..n {
                column[j] = coef[j * dim + m];
            }
            prefilter_periodic(&mut column);
            for j in 0..n {
                coef[j * dim + m] = column[j];
            }
        }
        PeriodicSpline { dim, n, coef }
    }

    pub fn eval_into(&self, u: f64, order: u32, out: &mut [f64]) {
        out[..self.dim].fill(0.0);
        let n = self.n as f64;
        let t = u * n;
        let base = t.floor() as i64;
        let chain = n.powi(order as i32);
        for j in base - 2..=base + 3 {
            let w = bspl_deriv(5, order, t - j as f64);
            if w == 0.0 {
                continue;
            }
            let idx = (j.rem_euclid(self.n as i64)) as usize;
            for m in 0..self.dim {
                out[m] += chain * w * self.coef[idx * self.dim + m];
            }
        }
    }
}

/// Converts samples to quintic interpolation coefficients: inverts the cyclic
/// convolution with the basis values (1, 26, 66, 26, 1)/120 by factoring it
/// into two symmetric first-order recursive filters.
fn prefilter_periodic(data: &mut [f64]) {
    let n = data.len();
    // Poles: lambda + 1/lambda = w for w the roots of w^2 + 26 w + 64 = 0.
    let poles = {
        let disc = (26.0f64 * 26.0 - 4.0 * 64.0).sqrt();
        let w1 = 0.5 * (-26.0 + disc);
        let w2 = 0.5 * (-26.0 - disc);
        let lam = |w: f64| 0.5 * (w + (w * w - 4.0).sqrt());
        [lam(w1), lam(w2)]
    };
    let gain = 120.0 * poles[0] * poles[1];
    for x in data.iter_mut() {
        *x *= gain;
    }
    for &lam in &poles {
        // Causal pass with periodic start: c[0] = sum_m lam^m x[-m] / (1 - lam^n).
        let mut init = 0.0;
        let mut p = 1.0;
        for m in 0..n {
            init += p * data[(n - m) % n];
            p *= lam;
            if p.abs() < 1e-18 {
                p = 0.0;
                break;
            }
        }
        let denom = 1.0 - if p == 0.0 { 0.0 } else { p };
        data[0] = init / denom;
        for i in 1..n {
            data[i] += lam * data[i - 1];
        }
        // Anticausal pass with periodic start.
        let mut init = 0.0;
        let mut p = 1.0;
        for m in 0..n {
            init += p * data[(n - 1 + m) % n];
            p *= lam;
            if p.abs() < 1e-18 {
                p = 0.0;
                break;
            }
        }
        let denom = 1.0 - if p == 0.0 { 0.0 } else { p };
        let last = init / denom;
        data[n - 1] = last;
        for i in (0..n - 1).rev() {
            data[i] += lam * data[i + 1];
        }
    }
}
