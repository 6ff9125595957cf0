//! Local argmin refinement inside a grid-cell neighborhood: golden-section
//! search in one dimension, clamped Nelder–Mead otherwise. Both are
//! deterministic functions of their inputs.

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` within `[lo, hi]`, starting from `center` with scale
/// `steps`. Returns the best point seen and its value.
pub fn minimize_in_box(
    f: &mut dyn FnMut(&[f64]) -> f64,
    center: &[f64],
    steps: &[f64],
    lo: &[f64],
    hi: &[f64],
    iters: usize,
) -> (Vec<f64>, f64) {
    if center.len() == 1 {
        let (x, v) = golden_section(&mut |t| f(&[t]), lo[0], hi[0], iters);
        (vec![x], v)
    } else {
        nelder_mead(f, center, steps, lo, hi, iters)
    }
}

fn golden_section(
    f: &mut dyn FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let (mut best_x, mut best_f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
        if f1 < best_f {
            best_x = x1;
            best_f = f1;
        }
        if f2 < best_f {
            best_x = x2;
            best_f = f2;
        }
    }
    (best_x, best_f)
}

fn clamp_into(point: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, &l), &h) in point.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(l, h);
    }
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) with candidate points clamped into the box.
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    center: &[f64],
    steps: &[f64],
    lo: &[f64],
    hi: &[f64],
    iters: usize,
) -> (Vec<f64>, f64) {
    let dim = center.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    {
        let mut v0 = center.to_vec();
        clamp_into(&mut v0, lo, hi);
        let fv0 = f(&v0);
        simplex.push((v0, fv0));
    }
    for a in 0..dim {
        let mut v = center.to_vec();
        // Offset toward whichever side has room.
        let off = 0.5 * steps[a];
        v[a] = if v[a] + off <= hi[a] { v[a] + off } else { v[a] - off };
        clamp_into(&mut v, lo, hi);
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let worst = simplex.len() - 1;
        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0f64; dim];
        for (v, _) in &simplex[..worst] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= worst as f64;
        }

        let blend = |t: f64, towards: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(towards)
                .map(|(&c, &w)| c + t * (c - w))
                .collect();
            clamp_into(&mut p, lo, hi);
            p
        };

        let reflected = blend(1.0, &simplex[worst].0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(2.0, &simplex[worst].0);
            let fe = f(&expanded);
            simplex[worst] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[worst - 1].1 {
            simplex[worst] = (reflected, fr);
        } else {
            let contracted = blend(-0.5, &simplex[worst].0);
            let fc = f(&contracted);
            if fc < simplex[worst].1 {
                simplex[worst] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (x, &b) in entry.0.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_a_v_minimum() {
        let mut f = |t: f64| (t - 2.3).abs();
        let (x, v) = golden_section(&mut f, 0.0, 5.0, 40);
        assert!((x - 2.3).abs() < 1e-6, "x = {x}");
        assert!(v < 1e-6);
    }

    #[test]
    fn nelder_mead_finds_a_quadratic_minimum() {
        let mut f = |p: &[f64]| (p[0] - 1.0).powi(2) + 2.0 * (p[1] + 0.5).powi(2);
        let (x, v) = nelder_mead(
            &mut f,
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[-3.0, -3.0],
            &[3.0, 3.0],
            120,
        );
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 0.5).abs() < 1e-4, "{x:?}");
        assert!(v < 1e-7);
    }

    #[test]
    fn nelder_mead_respects_the_box() {
        // Unconstrained minimum at (4, 4); box caps it at (1, 1).
        let mut f = |p: &[f64]| (p[0] - 4.0).powi(2) + (p[1] - 4.0).powi(2);
        let (x, _) = nelder_mead(&mut f, &[0.0, 0.0], &[0.5, 0.5], &[-1.0, -1.0], &[1.0, 1.0], 120);
        assert!(x[0] <= 1.0 && x[1] <= 1.0);
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3, "{x:?}");
    }
}
