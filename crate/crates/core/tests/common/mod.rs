//! Test-only oracles shared by the integration tests.
#![allow(dead_code)]

use flowseq_core::eigenspace::AppearanceVector;
use rand::Rng;

/// Columns with a random per-axis scale so the spectrum is well spread.
pub fn random_dataset(rng: &mut impl Rng, d: usize, n: usize) -> Vec<AppearanceVector> {
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..5.0)).collect();
    (0..n)
        .map(|_| AppearanceVector(scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect()))
        .collect()
}

/// Dense `1/N` covariance, computed directly from the definition.
pub fn covariance(data: &[AppearanceVector]) -> Vec<Vec<f64>> {
    let n = data.len() as f64;
    let d = data[0].len();
    let mean: Vec<f64> = (0..d).map(|r| data.iter().map(|v| v.0[r]).sum::<f64>() / n).collect();
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| {
                    data.iter()
                        .map(|v| (v.0[r] - mean[r]) * (v.0[c] - mean[c]))
                        .sum::<f64>()
                        / n
                })
                .collect()
        })
        .collect()
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn jacobi_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (head, tail) = a.split_at_mut(q);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (apk, aqk) = (*x, *y);
                    *x = c * apk - s * aqk;
                    *y = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    vals.sort_by(|x, y| y.total_cmp(x));
    vals
}

/// Trapezoid rule on `[a, b]` with `steps` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}
