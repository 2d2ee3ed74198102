//! Shared numerical utilities: deterministic parallel reductions, adaptive
//! Gauss–Kronrod quadrature, golden-section search, Fornberg finite-difference
//! weights and smooth clamps.

use rayon::prelude::*;

/// Chunk length for deterministic parallel reductions. Fixed (never derived
/// from the thread count) so that results are bit-identical across runs and
/// across `RAYON_NUM_THREADS` settings.
const DET_CHUNK: usize = 8192;

/// Deterministic parallel sum with Neumaier compensation inside each chunk
/// and across chunk partials. Bit-reproducible for a fixed input slice.
pub fn det_sum(data: &[f64]) -> f64 {
    let partials: Vec<f64> = data
        .par_chunks(DET_CHUNK)
        .map(compensated_sum)
        .collect();
    compensated_sum(&partials)
}

/// Deterministic parallel dot product (same chunking contract as `det_sum`).
pub fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot product length mismatch");
    let partials: Vec<f64> = a
        .par_chunks(DET_CHUNK)
        .zip(b.par_chunks(DET_CHUNK))
        .map(|(ca, cb)| {
            let mut sum = 0.0;
            let mut comp = 0.0;
            for (x, y) in ca.iter().zip(cb) {
                let term = x * y;
                let t = sum + term;
                comp += if sum.abs() >= term.abs() {
                    (sum - t) + term
                } else {
                    (term - t) + sum
                };
                sum = t;
            }
            sum + comp
        })
        .collect();
    compensated_sum(&partials)
}

/// Neumaier (improved Kahan) sequential compensated sum.
pub fn compensated_sum(data: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in data {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}

// ─── Adaptive Gauss–Kronrod quadrature ──────────────────────────────────────

/// 15-point Kronrod abscissae on [0, 1] side (symmetric), paired with weights;
/// the embedded 7-point Gauss rule uses every second node.
const KRONROD_X: [f64; 8] = [
    0.000000000000000,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const KRONROD_W: [f64; 8] = [
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const GAUSS_W: [f64; 4] = [
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let f0 = f(c);
    let mut kronrod = KRONROD_W[0] * f0;
    let mut gauss = GAUSS_W[0] * f0;
    for i in 1..8 {
        let dx = h * KRONROD_X[i];
        let fs = f(c - dx) + f(c + dx);
        kronrod += KRONROD_W[i] * fs;
        if i % 2 == 0 {
            gauss += GAUSS_W[i / 2] * fs;
        }
    }
    kronrod *= h;
    gauss *= h;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over [a, b].
///
/// Splits the worst interval until the summed error estimate drops below
/// `tol_abs + tol_rel * |integral|` or the interval budget is exhausted.
/// Returns (value, error_estimate).
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol_abs: f64,
    tol_rel: f64,
    max_intervals: usize,
) -> (f64, f64) {
    #[derive(Debug)]
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    loop {
        let total: f64 = segs.iter().map(|s| s.val).sum();
        let err_total: f64 = segs.iter().map(|s| s.err).sum();
        if err_total <= tol_abs + tol_rel * total.abs() || segs.len() >= max_intervals {
            return (total, err_total);
        }
        // Split the segment with the largest error estimate.
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .expect("non-empty segment list");
        let Seg { a, b, .. } = segs.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        segs.push(Seg { a, b: m, val: v1, err: e1 });
        segs.push(Seg { a: m, b, val: v2, err: e2 });
    }
}

// ─── Golden-section search ──────────────────────────────────────────────────

/// Golden-section maximization of a unimodal function on [a, b].
///
/// Runs exactly `iters` shrink steps and returns (argmax, max).
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    assert!(b > a, "golden_max needs a non-empty interval");
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

// ─── Fornberg finite-difference weights ─────────────────────────────────────

/// Finite-difference weights on arbitrary nodes (Fornberg's algorithm).
///
/// Returns `w[m][j]` such that `d^m f / dx^m (x0) ≈ Σ_j w[m][j] f(x[j])` for
/// every derivative order `m = 0..=max_order`.
pub fn fornberg_weights(x0: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    assert!(n > max_order, "need more nodes than derivative order");
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

// ─── Smooth clamps ──────────────────────────────────────────────────────────

/// C² monotone clamp: 0 for t ≤ 0, 1 for t ≥ 1, quintic smoothstep between.
pub fn smoothstep_c2(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Derivative of [`smoothstep_c2`]: 30 t² (1 - t)² inside (0, 1), 0 outside.
pub fn smoothstep_c2_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let omt = 1.0 - t;
        30.0 * t * t * omt * omt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_sum_matches_sequential_and_is_reproducible() {
        let data: Vec<f64> = (0..100_000)
            .map(|i| ((i as f64) * 0.37).sin() * 1e3)
            .collect();
        let a = det_sum(&data);
        let b = det_sum(&data);
        assert_eq!(a.to_bits(), b.to_bits(), "det_sum must be bit-stable");
        let seq = compensated_sum(&data);
        assert!(
            (a - seq).abs() <= 1e-9 * seq.abs().max(1.0),
            "det_sum {a} vs sequential {seq}"
        );
    }

    #[test]
    fn adaptive_gk_integrates_smooth_and_singular_integrands() {
        // ∫_0^π sin = 2.
        let (v, e) = adaptive_gk(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 1e-12, 100);
        assert!((v - 2.0).abs() < 1e-12, "∫ sin = {v}, err est {e}");
        // ∫_0^1 x^{-1/2} = 2 (integrable endpoint singularity).
        let (v, _) = adaptive_gk(&|x: f64| x.sqrt().recip(), 1e-300, 1.0, 1e-10, 1e-10, 4000);
        assert!((v - 2.0).abs() < 1e-6, "∫ x^-1/2 = {v}");
    }

    #[test]
    fn smoothstep_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.93] {
            let fd = (smoothstep_c2(t + h) - smoothstep_c2(t - h)) / (2.0 * h);
            let an = smoothstep_c2_deriv(t);
            assert!((fd - an).abs() < 1e-8, "t={t}: fd {fd} vs analytic {an}");
        }
        assert_eq!(smoothstep_c2_deriv(0.0), 0.0);
        assert_eq!(smoothstep_c2_deriv(1.0), 0.0);
        assert_eq!(smoothstep_c2_deriv(-0.5), 0.0);
    }

    #[test]
    fn golden_max_finds_quadratic_peak() {
        let (x, fx) = golden_max(&|t: f64| 3.0 - (t - 1.7) * (t - 1.7), 0.0, 10.0, 200);
        // Near a quadratic peak, f is flat to rounding within √ε of the
        // argmax, so no comparison-based search can localize it better.
        assert!((x - 1.7).abs() < 1e-6, "argmax = {x}");
        assert!((fx - 3.0).abs() < 1e-13, "max = {fx}");
    }

    #[test]
    fn fornberg_weights_reproduce_uniform_stencils() {
        // Second derivative on three uniform nodes: [1, -2, 1] / h².
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        let expect = [1.0, -2.0, 1.0];
        for (j, e) in expect.iter().enumerate() {
            assert!(
                (w[2][j] - e).abs() < 1e-13,
                "2nd-derivative weight {j}: {} vs {e}",
                w[2][j]
            );
        }
        // First derivative, five uniform nodes: [1, -8, 0, 8, -1] / 12h.
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &nodes, 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (j, e) in expect.iter().enumerate() {
            assert!(
                (w[1][j] - e).abs() < 1e-13,
                "1st-derivative weight {j}: {} vs {e}",
                w[1][j]
            );
        }
    }

    #[test]
    fn fornberg_weights_are_exact_on_nonuniform_cubics() {
        // Derivative of x³ + 2x² at x0 = 0.3 from scattered nodes.
        let nodes = [0.05, 0.21, 0.33, 0.52, 0.8];
        let w = fornberg_weights(0.3, &nodes, 2);
        let f = |x: f64| x.powi(3) + 2.0 * x * x;
        let d1: f64 = nodes.iter().zip(&w[1]).map(|(x, c)| c * f(*x)).sum();
        let d2: f64 = nodes.iter().zip(&w[2]).map(|(x, c)| c * f(*x)).sum();
        let want_d1 = 3.0 * 0.09 + 4.0 * 0.3;
        let want_d2 = 6.0 * 0.3 + 4.0;
        assert!((d1 - want_d1).abs() < 1e-10, "f'(0.3) = {d1} vs {want_d1}");
        assert!((d2 - want_d2).abs() < 1e-9, "f''(0.3) = {d2} vs {want_d2}");
    }

    #[test]
    fn smoothstep_is_monotone_c2_clamp() {
        assert_eq!(smoothstep_c2(-1.0), 0.0);
        assert_eq!(smoothstep_c2(2.0), 1.0);
        assert!((smoothstep_c2(0.5) - 0.5).abs() < 1e-15, "midpoint symmetry");
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = smoothstep_c2(i as f64 / 1000.0);
            assert!(v >= prev - 1e-15, "monotone at i = {i}");
            prev = v;
        }
        // Endpoint derivatives vanish (C¹ at the clamp, actually C²).
        let eps = 1e-6;
        assert!(smoothstep_c2(eps) < 1e-14, "flat start");
        assert!(1.0 - smoothstep_c2(1.0 - eps) < 1e-14, "flat end");
    }
}
