//! Randomized structural properties of the library, checked with proptest.
//!
//! Every test here pits a library result against either a closed-form bound
//! or an independent recomputation written out longhand in this file, so a
//! regression in the fast paths cannot hide behind its own arithmetic.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rieszflow::curve::{torus_distance, Curve, CurveSpec};
use rieszflow::diagnostics::{cut_profile, distribution_report, epsilon_from_flat};
use rieszflow::dynamics::{flow_velocity, integrate, FlowState, IntegratorConfig, Observer};
use rieszflow::oracle::{exhaustive_cut_check, finite_diff_gradient};
use rieszflow::riesz::{energy, energy_value, flat_energy, zeta, Configuration};
use std::sync::OnceLock;

fn circle() -> &'static Curve {
    static C: OnceLock<Curve> = OnceLock::new();
    C.get_or_init(|| Curve::build(&CurveSpec::Circle { radius: 1.0 }, 1024).unwrap())
}

fn ellipse() -> &'static Curve {
    static C: OnceLock<Curve> = OnceLock::new();
    C.get_or_init(|| {
        Curve::build(&CurveSpec::Ellipse { semi_axis_a: 2.0, semi_axis_b: 1.0 }, 1024).unwrap()
    })
}

fn knot() -> &'static Curve {
    static C: OnceLock<Curve> = OnceLock::new();
    C.get_or_init(|| {
        Curve::build(
            &CurveSpec::Knot { p: 2, q: 3, major_radius: 1.0, minor_radius: 0.3 },
            1024,
        )
        .unwrap()
    })
}

fn curves() -> [&'static Curve; 3] {
    [circle(), ellipse(), knot()]
}

fn random_config(n: usize, seed: u64) -> Configuration {
    Configuration::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn jittered_config(n: usize, amplitude: f64, seed: u64) -> Configuration {
    Configuration::jittered(n, amplitude, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Unnormalized potential terms of one index offset, in particle order.
fn offset_terms(curve: &Curve, cfg: &Configuration, k: usize, s: f64) -> Vec<f64> {
    let z = cfg.positions();
    let n = z.len();
    (0..n)
        .map(|i| curve.chord(z[i], z[(i + k) % n]).powf(-s))
        .collect()
}

/// Total from per-offset values: the antipodal offset of an even count holds
/// every pair twice, so it enters with weight one half.
fn recombined(by_offset: &[f64], n: usize) -> f64 {
    by_offset
        .iter()
        .enumerate()
        .map(|(k0, &v)| if n % 2 == 0 && 2 * (k0 + 1) == n { 0.5 * v } else { v })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    /// Offsets k and N-k enumerate the same chords: term i of offset k is
    /// bit-identical to term (i+k) mod N of offset N-k, so the sums taken in
    /// the matching order are bit-identical as well.
    #[test]
    fn offset_energies_mirror_exactly(
        n in 3usize..20,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = random_config(n, seed);
        for k in 1..n {
            let a = offset_terms(ellipse(), &cfg, k, s);
            let b = offset_terms(ellipse(), &cfg, n - k, s);
            for i in 0..n {
                prop_assert_eq!(a[i].to_bits(), b[(i + k) % n].to_bits());
            }
            let sum_a: f64 = a.iter().sum();
            let sum_b: f64 = (0..n).map(|i| b[(i + k) % n]).sum();
            prop_assert_eq!(sum_a.to_bits(), sum_b.to_bits());
        }
    }

    /// The per-offset breakdown recombines to the totals, for both the chord
    /// and the flat distance.
    #[test]
    fn energy_recombines_from_offset_terms(
        n in 3usize..40,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = random_config(n, seed);
        let b = energy(s, knot(), &cfg).unwrap();
        let chord_total = recombined(&b.by_offset, n);
        let flat_total = recombined(&b.flat_by_offset, n);
        prop_assert!((chord_total - b.energy).abs() <= 1e-12 * b.energy.abs());
        prop_assert!((flat_total - b.flat_energy).abs() <= 1e-12 * b.flat_energy.abs());
    }

    /// Convexity of r^(-s) pins each flat offset mean between the equal-gap
    /// value and a multiple of the nearest-neighbor term:
    /// k^(-s)/s <= offset-k flat energy <= k^(-s) * offset-1 flat energy.
    #[test]
    fn flat_offset_energies_obey_convexity_bounds(
        n in 3usize..48,
        amp in 0.0f64..0.45,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = jittered_config(n, amp, seed);
        let b = energy(s, circle(), &cfg).unwrap();
        let first = b.flat_by_offset[0];
        for (k0, &ek) in b.flat_by_offset.iter().enumerate() {
            let kf = (k0 + 1) as f64;
            let lower = kf.powf(-s) / s;
            let upper = kf.powf(-s) * first;
            prop_assert!(
                ek >= lower * (1.0 - 1e-12),
                "offset {} below equal-gap floor: {} < {}", k0 + 1, ek, lower
            );
            prop_assert!(
                ek <= upper * (1.0 + 1e-12),
                "offset {} above neighbor multiple: {} > {}", k0 + 1, ek, upper
            );
        }
    }

    /// Summing the per-offset floors: the flat energy is at least the
    /// nearest-neighbor part plus the truncated zeta tail, which in turn is
    /// at least the full truncated-zeta floor.
    #[test]
    fn flat_energy_dominates_truncated_zeta_floor(
        n in 3usize..64,
        amp in 0.0f64..0.45,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = jittered_config(n, amp, seed);
        let b = energy(s, circle(), &cfg).unwrap();
        let tail = b.flat_by_offset[0] + (b.zeta_truncated - 1.0) / s;
        let floor = b.zeta_truncated / s;
        prop_assert!(b.flat_energy >= tail * (1.0 - 1e-12), "{} < {}", b.flat_energy, tail);
        prop_assert!(tail >= floor * (1.0 - 1e-12), "{} < {}", tail, floor);
    }

    /// Rotating every particle by the same shift leaves the circle energy
    /// unchanged. Gaps are kept away from zero: a near-contact pair loses
    /// more than 1e-12 of its chord to cancellation no matter how the points
    /// are evaluated, which would swamp what this test is about.
    #[test]
    fn circle_energy_is_rotation_invariant(
        n in 3usize..32,
        amp in 0.0f64..0.45,
        seed in any::<u64>(),
        shift in 0.0f64..1.0,
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = jittered_config(n, amp, seed);
        let mut w: Vec<f64> = cfg
            .positions()
            .iter()
            .map(|&z| {
                let v = z + shift;
                if v >= 1.0 { v - 1.0 } else { v }
            })
            .collect();
        w.sort_by(f64::total_cmp);
        let rotated = Configuration::new(w);
        prop_assume!(rotated.is_ok());
        let e0 = energy_value(s, circle(), &cfg).unwrap();
        let e1 = energy_value(s, circle(), &rotated.unwrap()).unwrap();
        prop_assert!(
            (e1 - e0).abs() <= 1e-12 * e0.abs(),
            "energy moved under rotation: {} vs {}", e0, e1
        );
    }

    /// Straightening chords into arc distances only increases pair
    /// distances, so the chord energy dominates the flat energy.
    #[test]
    fn chord_energy_dominates_flat_energy(
        n in 3usize..40,
        which in 0usize..3,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = random_config(n, seed);
        let curve = curves()[which];
        let e = energy_value(s, curve, &cfg).unwrap();
        let flat = flat_energy(s, &cfg).unwrap();
        prop_assert!(e >= flat * (1.0 - 1e-12), "chord energy {} below flat {}", e, flat);
    }

    /// Chords are short of the arc distance from above and held away from
    /// zero from below by the self-avoidance radius.
    #[test]
    fn chords_bounded_by_arc_distance_above_and_below(
        which in 0usize..3,
        y in 0.0f64..1.0,
        z in 0.0f64..1.0,
    ) {
        let curve = curves()[which];
        let d = torus_distance(y, z);
        let chord = curve.chord(y, z);
        prop_assert!(chord <= d + 1e-12, "chord {} exceeds arc distance {}", chord, d);
        let floor = (0.5 * d).min(curve.r0());
        prop_assert!(
            chord >= floor - 1e-12,
            "chord {} below floor {} (r0 = {})", chord, floor, curve.r0()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    /// Analytic energy gradient against the central-difference route.
    #[test]
    fn analytic_gradient_matches_finite_differences(
        n in 4usize..14,
        which in 0usize..3,
        amp in 0.0f64..0.4,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = jittered_config(n, amp, seed);
        let curve = curves()[which];
        let g = rieszflow::riesz::energy_gradient(s, curve, &cfg).unwrap();
        let fd = finite_diff_gradient(s, curve, &cfg, 1e-6).unwrap();
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in g.iter().zip(&fd.gradient) {
            prop_assert!(
                (a - b).abs() <= 1e-5 * scale,
                "gradient mismatch: {} vs {} at scale {}", a, b, scale
            );
        }
    }

    /// The integrator's velocity against the force sum written straight from
    /// the model: v_i = N^(-s) * sum_j (x_i - x_j) . T_i / |x_i - x_j|^(s+2).
    #[test]
    fn flow_velocity_matches_direct_force_sum(
        n in 3usize..14,
        which in 0usize..3,
        seed in any::<u64>(),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = random_config(n, seed);
        let curve = curves()[which];
        let v = flow_velocity(s, curve, &cfg).unwrap();
        let z = cfg.positions();
        let pts: Vec<Vec<f64>> = z.iter().map(|&zi| curve.point(zi)).collect();
        let tans: Vec<Vec<f64>> = z.iter().map(|&zi| curve.derivative(zi, 1)).collect();
        let nf = n as f64;
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let mut r2 = 0.0;
                let mut rt = 0.0;
                for (m, t) in tans[i].iter().enumerate() {
                    let d = pts[i][m] - pts[j][m];
                    r2 += d * d;
                    rt += d * t;
                }
                acc += rt * r2.powf(-0.5 * (s + 2.0));
            }
            let direct = nf.powf(-s) * acc;
            prop_assert!(
                (v[i] - direct).abs() <= 1e-12 * scale,
                "velocity mismatch at {}: {} vs {}", i, v[i], direct
            );
        }
    }

    /// The incremental cut profile against the oracle's exhaustive rescan.
    #[test]
    fn cut_scan_routes_agree_on_random_points(
        cells in prop::collection::vec(0.0f64..1.0, 2..48),
        s10 in 12u32..36,
    ) {
        let s = f64::from(s10) / 10.0;
        // Positive gap floor keeps every cut value finite and well scaled.
        let gaps: Vec<f64> = cells.iter().map(|u| 0.02 + u).collect();
        let total: f64 = gaps.iter().sum();
        let mut points = vec![0.0];
        let mut acc = 0.0;
        for g in &gaps {
            acc += g;
            points.push(acc / total);
        }
        let fast = cut_profile(&points, s).unwrap();
        let slow = exhaustive_cut_check(&points, s).unwrap();
        prop_assert_eq!(fast.p.len(), slow.p.len());
        for (a, b) in fast.p.iter().zip(&slow.p) {
            prop_assert!(
                (a - b).abs() <= 1e-10 * b.abs(),
                "cut value mismatch: {} vs {}", a, b
            );
        }
        let fmin = fast.p[fast.argmin];
        let smin = slow.p[slow.argmin];
        prop_assert!((fmin - smin).abs() <= 1e-10 * smin.abs());
    }

    /// Gap statistics against the distribution bounds evaluated at the
    /// energy excess the configuration actually has: the mean absolute gap
    /// deviation and every window discrepancy must sit inside their bounds.
    #[test]
    fn gap_statistics_obey_energy_excess_bounds(
        sk in 0usize..3,
        amp in 0.0f64..0.45,
        seed in any::<u64>(),
        a1 in 0.0f64..1.0,
        a2 in 0.0f64..1.0,
        a3 in 0.0f64..1.0,
    ) {
        let s = [1.5, 2.0, 3.0][sk];
        let n = 512;
        let cfg = jittered_config(n, amp, seed);
        let flat = flat_energy(s, &cfg).unwrap();
        let eps = epsilon_from_flat(flat, s, n).unwrap();
        let windows = [(a1, 0.1), (a2, 0.25), (a3, 0.5)];
        let report = distribution_report(circle(), s, &cfg, eps, &windows).unwrap();
        prop_assert!(
            report.mad_within_bound,
            "MAD {} above bound {} at eps {}", report.mad, report.mad_bound, eps
        );
        for w in &report.windows {
            prop_assert!(
                w.within_bound,
                "window ({}, {}) discrepancy {} above bound {}",
                w.a, w.length, w.discrepancy, w.bound
            );
        }
    }
}

struct GuardObserver {
    slack: f64,
    prev: Option<(f64, f64)>,
    steps: usize,
    failure: Option<String>,
}

impl GuardObserver {
    fn new(slack: f64) -> Self {
        GuardObserver { slack, prev: None, steps: 0, failure: None }
    }

    fn fail(&mut self, msg: String) {
        if self.failure.is_none() {
            self.failure = Some(msg);
        }
    }
}

impl Observer for GuardObserver {
    fn on_step(&mut self, state: &FlowState, _velocity: &[f64]) {
        self.steps += 1;
        let z = state.config.positions();
        let (delta, _) = state.config.min_gap();
        if !(delta > 0.0) {
            self.fail(format!("non-positive smallest gap {delta} at t = {}", state.t));
        }
        if z[z.len() - 1] - z[0] >= 1.0 {
            self.fail(format!("span reached one turn at t = {}", state.t));
        }
        if let Some((t0, e0)) = self.prev {
            if state.t < t0 {
                self.fail(format!("time went backwards: {t0} -> {}", state.t));
            }
            if state.energy > e0 + self.slack * e0.abs() {
                self.fail(format!("energy rose: {e0} -> {} at t = {}", state.energy, state.t));
            }
        }
        self.prev = Some((state.t, state.energy));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    /// Every accepted step keeps the ordering and never raises the energy
    /// beyond the rounding slack.
    #[test]
    fn accepted_steps_keep_order_and_lower_energy(
        n in 4usize..10,
        which in 0usize..3,
        amp in 0.0f64..0.35,
        seed in any::<u64>(),
        s10 in 12u32..31,
    ) {
        let s = f64::from(s10) / 10.0;
        let cfg = jittered_config(n, amp, seed);
        let curve = curves()[which];
        let icfg = IntegratorConfig::default();
        let mut guard = GuardObserver::new(icfg.energy_slack);
        let out = integrate(s, curve, &cfg, &icfg, 0.02, &mut guard);
        prop_assert!(out.is_ok(), "flow failed: {:?}", out.err());
        prop_assert!(guard.steps >= 2, "no steps were observed");
        prop_assert!(guard.failure.is_none(), "{}", guard.failure.unwrap());
    }
}

/// At five hundred twelve particles the chord energy of uniformly random
/// positions stays above the continuum level less five percent.
#[test]
fn random_circle_energy_stays_above_continuum_floor() {
    for &s in &[1.5, 2.0, 3.0] {
        let floor = 0.95 * zeta(s).unwrap() / s;
        for seed in 1..=3u64 {
            let cfg = random_config(512, seed);
            let e = energy_value(s, circle(), &cfg).unwrap();
            assert!(
                e >= floor,
                "s = {s}, seed {seed}: energy {e} under floor {floor}"
            );
        }
    }
}
