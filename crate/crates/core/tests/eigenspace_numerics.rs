mod common;

use common::{covariance, jacobi_eigenvalues, random_dataset};
use flowseq_core::eigenspace::{fit, AppearanceVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn residual(cov: &[Vec<f64>], e: &[f64], lambda: f64) -> f64 {
    cov.iter()
        .zip(e)
        .map(|(row, &ei)| {
            let ue: f64 = row.iter().zip(e).map(|(a, b)| a * b).sum();
            (ue - lambda * ei).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn random_datasets_satisfy_eigen_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..120 {
        let d = rng.random_range(2..=50);
        let n = rng.random_range(3..=40);
        let k = rng.random_range(1..=4usize).min(d).min(n - 1);
        let data = random_dataset(&mut rng, d, n);
        let model = fit(&data, k).unwrap();
        let cov = covariance(&data);
        let l1 = model.eigenvalues()[0];
        for (e, &l) in model.basis().iter().zip(model.eigenvalues()) {
            assert!(residual(&cov, e, l) <= 1e-8 * l1.max(1.0), "case {case}");
        }
        for (a, ea) in model.basis().iter().enumerate() {
            for (b, eb) in model.basis().iter().enumerate() {
                let dot: f64 = ea.iter().zip(eb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-8, "case {case}: <e{a}, e{b}> = {dot}");
            }
        }
        let mut centroid = vec![0.0; k];
        for v in &data {
            for (c, f) in centroid.iter_mut().zip(model.project(v).unwrap().0) {
                *c += f / n as f64;
            }
        }
        assert!(centroid.iter().all(|c| c.abs() <= 1e-10), "case {case}: {centroid:?}");
        // top eigenvalues agree with an independent Jacobi decomposition
        let oracle = jacobi_eigenvalues(&cov);
        for (a, b) in model.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * l1.max(1.0), "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn full_rank_spectrum_sums_to_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..30 {
        let d = rng.random_range(2..=8);
        let n = rng.random_range(d + 2..=30);
        let data = random_dataset(&mut rng, d, n);
        let model = fit(&data, d).unwrap();
        let cov = covariance(&data);
        let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
        let sum: f64 = model.eigenvalues().iter().sum();
        assert!(
            (sum - trace).abs() <= 1e-8 * trace.max(1.0),
            "case {case}: {sum} vs {trace}"
        );
    }
}

#[test]
fn first_axis_maximizes_projected_variance_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let a: f64 = rng.random_range(0.5..3.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let data: Vec<AppearanceVector> = (0..25)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let y: f64 = rng.random_range(-1.0..1.0);
                AppearanceVector(vec![a * x + b * y, 0.4 * y])
            })
            .collect();
        let model = fit(&data, 1).unwrap();
        let mean = model.mean().to_vec();
        let variance = |dir: [f64; 2]| {
            data.iter()
                .map(|v| ((v.0[0] - mean[0]) * dir[0] + (v.0[1] - mean[1]) * dir[1]).powi(2))
                .sum::<f64>()
                / data.len() as f64
        };
        // dense search over unit directions on the half circle
        let best = (0..20_000)
            .map(|s| {
                let t = std::f64::consts::PI * s as f64 / 20_000.0;
                variance([t.cos(), t.sin()])
            })
            .fold(f64::MIN, f64::max);
        let e = &model.basis()[0];
        let found = variance([e[0], e[1]]);
        assert!(found >= best - 1e-9, "{found} < {best}");
        assert!((found - model.eigenvalues()[0]).abs() < 1e-10);
    }
}
