//! Real roots of monic cubics `z³ + b₁z² + b₂z + b₃`.

use std::f64::consts::PI;

/// `z³ + c₁z² + c₂z + c₃` at `z` (Horner).
#[inline]
pub fn cubic(c: [f64; 3], z: f64) -> f64 {
    ((z + c[0]) * z + c[1]) * z + c[2]
}

#[inline]
pub fn cubic_prime(c: [f64; 3], z: f64) -> f64 {
    (3.0 * z + 2.0 * c[0]) * z + c[1]
}

/// All real roots (with multiplicity collapsed), ascending.
///
/// Depressed form `t³ + pt + q` with `z = t - c₁/3`; trigonometric solution
/// when three roots are real, otherwise the cancellation-free Cardano branch.
/// Each root gets one Newton polish step on the original cubic.
pub fn real_roots_monic_cubic(c: [f64; 3]) -> Vec<f64> {
    let [b1, b2, b3] = c;
    let shift = b1 / 3.0;
    let p = b2 - b1 * shift;
    let q = 2.0 * shift * shift * shift - shift * b2 + b3;

    let mut roots = if p == 0.0 && q == 0.0 {
        vec![0.0]
    } else {
        let half_q = 0.5 * q;
        let third_p = p / 3.0;
        let disc = half_q * half_q + third_p * third_p * third_p;
        if disc > 0.0 {
            let u = (-half_q - half_q.signum() * disc.sqrt()).cbrt();
            let t = if u != 0.0 { u - third_p / u } else { 0.0 };
            vec![t]
        } else {
            // three real roots (p < 0)
            let r = (-third_p).sqrt();
            let arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            (0..3)
                .map(|j| 2.0 * r * (phi - 2.0 * PI * j as f64 / 3.0).cos())
                .collect()
        }
    };

    for t in roots.iter_mut() {
        let mut z = *t - shift;
        let d = cubic_prime(c, z);
        if d != 0.0 {
            let step = cubic(c, z) / d;
            if step.is_finite() {
                z -= step;
            }
        }
        *t = z;
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    roots
}
