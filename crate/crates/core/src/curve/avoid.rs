//! Search for the minimal chord between curve points whose parameters are
//! separated on the circle.

use super::{torus_distance, Curve};

/// Minimal chord |x(y) - x(z)| over pairs with torus_distance(y, z) >= r1,
/// found by a coarse pair scan and a few levels of local grid refinement.
/// Returns (min_chord, y, z).
pub(crate) fn min_chord_separated(curve: &Curve, r1: f64) -> (f64, f64, f64) {
    const P: usize = 2000;
    let d = curve.dim();
    let mut pts = vec![0.0; P * d];
    for i in 0..P {
        curve.point_into(i as f64 / P as f64, &mut pts[i * d..(i + 1) * d]);
    }
    // Tiny slack so pairs sitting exactly on the separation boundary survive
    // floating-point rounding of the candidate parameters.
    let guard = r1 - 1e-12;
    let mut best2 = f64::INFINITY;
    let (mut by, mut bz) = (0.0, 0.5);
    for i in 0..P {
        let pi = &pts[i * d..(i + 1) * d];
        for j in i + 1..P {
            let k = j - i;
            if (k.min(P - k) as f64) < guard * P as f64 {
                continue;
            }
            let pj = &pts[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for m in 0..d {
                let diff = pi[m] - pj[m];
                acc += diff * diff;
            }
            if acc < best2 {
                best2 = acc;
                by = i as f64 / P as f64;
                bz = j as f64 / P as f64;
            }
        }
    }
    let mut best = best2.sqrt();
    let mut h = 1.0 / P as f64;
    for _ in 0..4 {
        let (cy, cz) = (by, bz);
        for a in -8..=8i32 {
            for b in -8..=8i32 {
                let y = cy + a as f64 * h / 8.0;
                let z = cz + b as f64 * h / 8.0;
                if torus_distance(y, z) < guard {
                    continue;
                }
                let c = curve.chord(y, z);
                if c < best {
                    best = c;
                    by = y;
                    bz = z;
                }
            }
        }
        h /= 8.0;
    }
    (best, by, bz)
}
