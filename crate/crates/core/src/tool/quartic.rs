//! Closed-form polynomial roots (Ferrari / Cardano) in complex arithmetic.
//!
//! Roots are returned as complex numbers so callers can apply their own
//! "nearly real" policy; a tangent line produces a double root whose
//! imaginary part is only approximately zero.

use nalgebra::Complex;

type C64 = Complex<f64>;

/// Real roots of `x^3 + b x^2 + c x + d`, polished by Newton steps.
pub fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = q * q / 4.0 + p * p * p / 27.0;

    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        roots.push(u + v - shift);
    } else if p.abs() < 1e-300 {
        roots.push(-shift);
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            let angle = theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            roots.push(m * angle.cos() - shift);
        }
    }

    for x in roots.iter_mut() {
        for _ in 0..2 {
            let f = ((*x + b) * *x + c) * *x + d;
            let df = (3.0 * *x + 2.0 * b) * *x + c;
            if df.abs() > 1e-300 {
                let step = f / df;
                if step.is_finite() {
                    *x -= step;
                }
            }
        }
    }
    roots
}

/// All four roots of `c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0` (Ferrari).
///
/// Returns fewer roots when the leading coefficient vanishes.
pub fn quartic_roots(c4: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<C64> {
    if c4.abs() < 1e-300 {
        return cubic_roots_complex(c3, c2, c1, c0);
    }
    let a = c3 / c4;
    let b = c2 / c4;
    let c = c1 / c4;
    let d = c0 / c4;

    // depressed: y^4 + p y^2 + q y + s, x = y - a/4
    let a2 = a * a;
    let p = b - 3.0 * a2 / 8.0;
    let q = c - a * b / 2.0 + a2 * a / 8.0;
    let s = d - a * c / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;
    let shift = C64::new(-a / 4.0, 0.0);

    let scale = 1.0 + p.abs() + q.abs().sqrt() + s.abs().sqrt();
    let mut out = Vec::with_capacity(4);

    if q.abs() <= 1e-14 * scale * scale * scale {
        // biquadratic
        let disc = C64::new(p * p - 4.0 * s, 0.0).sqrt();
        for z in [(-p + disc) / 2.0, (-p - disc) / 2.0] {
            let y = z.sqrt();
            out.push(y + shift);
            out.push(-y + shift);
        }
        return out;
    }

    // resolvent 8m^3 + 8p m^2 + (2p^2 - 8s) m - q^2 = 0; take the largest real root (> 0)
    let m = cubic_real_roots(p, (p * p - 4.0 * s) / 4.0, -q * q / 8.0)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let m = if m > 0.0 { m } else { f64::EPSILON * scale };

    let r2m = (2.0 * m).sqrt();
    let term = 2.0 * q / r2m;
    let d_plus = C64::new(-2.0 * m - 2.0 * p - term, 0.0).sqrt();
    let d_minus = C64::new(-2.0 * m - 2.0 * p + term, 0.0).sqrt();

    out.push((C64::new(r2m, 0.0) + d_plus) / 2.0 + shift);
    out.push((C64::new(r2m, 0.0) - d_plus) / 2.0 + shift);
    out.push((C64::new(-r2m, 0.0) + d_minus) / 2.0 + shift);
    out.push((C64::new(-r2m, 0.0) - d_minus) / 2.0 + shift);
    out
}

fn cubic_roots_complex(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<C64> {
    if c3.abs() < 1e-300 {
        if c2.abs() < 1e-300 {
            if c1.abs() < 1e-300 {
                return Vec::new();
            }
            return vec![C64::new(-c0 / c1, 0.0)];
        }
        let disc = C64::new(c1 * c1 - 4.0 * c2 * c0, 0.0).sqrt();
        return vec![(-c1 + disc) / (2.0 * c2), (-c1 - disc) / (2.0 * c2)];
    }
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;
    let real = cubic_real_roots(b, c, d);
    if real.len() == 3 {
        return real.into_iter().map(|x| C64::new(x, 0.0)).collect();
    }
    // deflate the real root, solve the remaining quadratic
    let x0 = real[0];
    let qb = b + x0;
    let qc = c + x0 * qb;
    let disc = C64::new(qb * qb - 4.0 * qc, 0.0).sqrt();
    vec![
        C64::new(x0, 0.0),
        (C64::new(-qb, 0.0) + disc) / 2.0,
        (C64::new(-qb, 0.0) - disc) / 2.0,
    ]
}

/// Evaluate a quartic and its derivative at `x`.
pub fn eval_quartic(coeffs: [f64; 5], x: f64) -> (f64, f64) {
    let [c4, c3, c2, c1, c0] = coeffs;
    let f = (((c4 * x + c3) * x + c2) * x + c1) * x + c0;
    let df = ((4.0 * c4 * x + 3.0 * c3) * x + 2.0 * c2) * x + c1;
    (f, df)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    fn companion_roots(c: [f64; 5]) -> Vec<C64> {
        let [c4, c3, c2, c1, c0] = c;
        let m = Matrix4::new(
            -c3 / c4,
            -c2 / c4,
            -c1 / c4,
            -c0 / c4,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        );
        m.complex_eigenvalues().iter().cloned().collect()
    }

    fn matched(a: &[C64], b: &[C64], tol: f64) -> bool {
        let mut used = vec![false; b.len()];
        a.iter().all(|x| {
            let best = b
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|(_, u), (_, v)| (*u - x).norm().partial_cmp(&(*v - x).norm()).unwrap());
            match best {
                Some((i, y)) if (y - x).norm() < tol => {
                    used[i] = true;
                    true
                }
                _ => false,
            }
        })
    }

    #[test]
    fn known_real_roots() {
        // (x-1)(x-2)(x-3)(x-4)
        let r = quartic_roots(1.0, -10.0, 35.0, -50.0, 24.0);
        let expect: Vec<C64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        assert!(matched(&r, &expect, 1e-9), "{r:?}");
    }

    #[test]
    fn biquadratic_branch() {
        // (x^2-1)(x^2-4)
        let r = quartic_roots(1.0, 0.0, -5.0, 0.0, 4.0);
        let expect: Vec<C64> = [1.0, -1.0, 2.0, -2.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        assert!(matched(&r, &expect, 1e-12));
    }

    #[test]
    fn complex_pair_and_double_root() {
        // (x^2+1)(x-2)^2
        let r = quartic_roots(1.0, -4.0, 5.0, -4.0, 4.0);
        let expect = vec![
            C64::new(0.0, 1.0),
            C64::new(0.0, -1.0),
            C64::new(2.0, 0.0),
            C64::new(2.0, 0.0),
        ];
        assert!(matched(&r, &expect, 1e-6), "{r:?}");
    }

    #[test]
    fn agrees_with_companion_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let c = [
                rng.gen_range(0.5..2.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let ferrari = quartic_roots(c[0], c[1], c[2], c[3], c[4]);
            let comp = companion_roots(c);
            assert!(matched(&ferrari, &comp, 1e-6), "{c:?}: {ferrari:?} vs {comp:?}");
        }
    }

    #[test]
    fn cubic_three_roots() {
        // (x+1)(x-1)(x-3) = x^3 - 3x^2 - x + 3
        let mut r = cubic_real_roots(-3.0, -1.0, 3.0);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, e) in r.iter().zip([-1.0, 1.0, 3.0]) {
            assert!((x - e).abs() < 1e-12);
        }
    }
}
