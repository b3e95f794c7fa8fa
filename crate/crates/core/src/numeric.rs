//! Small numeric kernels shared across the crate: pairwise summation,
//! cubic Hermite interpolation and a dense symmetric positive definite solve.

/// Sums a slice by recursive halving. The reduction tree depends only on the
/// slice length, so results are reproducible, and the rounding error grows
/// like log(n) instead of n.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// 5-point Gauss-Legendre rule on [-1, 1].
pub const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Integrates `f` over [a, b] with the 5-point Gauss-Legendre rule.
pub fn gl5<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..5 {
        acc += GL5_WEIGHTS[i] * f(c + h * GL5_NODES[i]);
    }
    acc * h
}

/// Cubic Hermite interpolant on the uniform grid j/(n-1) for j = 0..n-1, so
/// interval search is an index computation. Callers supply slopes; limiting
/// them against the secants keeps the interpolant monotone.
#[derive(Clone, Debug)]
pub struct UniformCubic {
    y: Vec<f64>,
    d: Vec<f64>,
}

impl UniformCubic {
    /// Builds from values and slopes sampled on the uniform grid j/(n-1),
    /// with slopes given per unit t (not per interval).
    pub fn new(y: Vec<f64>, d: Vec<f64>) -> Self {
        assert!(y.len() == d.len() && y.len() >= 2);
        UniformCubic { y, d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.y.len();
        let h = 1.0 / (n - 1) as f64;
        let mut i = (t * (n - 1) as f64).floor() as isize;
        i = i.clamp(0, n as isize - 2);
        let i = i as usize;
        let u = (t - i as f64 * h) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (d0, d1) = (self.d[i], self.d[i + 1]);
        // Increment form of the cubic Hermite: every term after y0 is small
        // on a fine grid, which keeps evaluation roundoff at a minimum.
        y0 + (y1 - y0) * u * u * (3.0 - 2.0 * u)
            + h * u * (1.0 - u) * (d0 * (1.0 - u) - d1 * u)
    }
}

/// Compensated running sum (Neumaier variant): absorbs the rounding error
/// of every addition into a correction term, which keeps long sequences of
/// cancelling updates accurate to a few ulps of the running total of |x|.
#[derive(Clone, Copy, Default)]
pub struct CompenSum {
    sum: f64,
    comp: f64,
}

impl CompenSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another compensated sum in without first rounding it to a
    /// single f64, so no precision is lost at the hand-off.
    pub fn absorb(&mut self, other: &CompenSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Solves A x = b in place for a dense symmetric positive definite matrix
/// (row-major, n x n). Returns false if the factorization breaks down.
pub fn solve_spd(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    // Cholesky A = L L^T, stored in the lower triangle.
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5]), 3.5);
    }

    #[test]
    fn gl5_integrates_polynomials_exactly() {
        // Degree 9 is the highest degree the 5-point rule handles exactly.
        let val = gl5(0.0, 1.0, |x| x.powi(9));
        assert_relative_eq!(val, 0.1, max_relative = 1e-13);
        let val = gl5(-2.0, 3.0, |x| 1.0 + x + x * x);
        assert_relative_eq!(val, 5.0 + 2.5 + 35.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn uniform_cubic_reproduces_cubics_and_stays_monotone() {
        // With exact endpoint values and slopes the Hermite form is exact on
        // polynomials up to degree 3.
        let n = 20;
        let grid = |i: usize| i as f64 / (n - 1) as f64;
        let f = |v: f64| v * v * v + 0.2 * v;
        let y: Vec<f64> = (0..n).map(|i| f(grid(i))).collect();
        let d: Vec<f64> = (0..n).map(|i| 3.0 * grid(i) * grid(i) + 0.2).collect();
        let interp = UniformCubic::new(y, d);
        let mut prev = interp.eval(0.0);
        for i in 0..=500 {
            let t = i as f64 / 500.0;
            let v = interp.eval(t);
            assert_relative_eq!(v, f(t), epsilon = 1e-14);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn spd_solver_recovers_solution() {
        // A = M^T M + I is SPD.
        let n = 5;
        let m: Vec<f64> = (0..n * n).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    v += m[k * n + i] * m[k * n + j];
                }
                a[i * n + j] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                b[i] += a[i * n + j] * x_true[j];
            }
        }
        assert!(solve_spd(&mut a, &mut b, n));
        for i in 0..n {
            assert_relative_eq!(b[i], x_true[i], epsilon = 1e-10);
        }
    }
}
