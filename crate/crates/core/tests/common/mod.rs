#![allow(dead_code)]

use driftlab_core::neural::{objective_gradients, Centroids, Dense, MlpParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Largest relative gap between analytic and central-difference gradients.
pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
}

const STEP: f64 = 1e-6;
/// Denominator floor so that vanishing gradients are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

fn total_loss(p: &MlpParams, c: Option<&Centroids>, x: &Array2<f64>, y: &[usize]) -> f64 {
    let g = objective_gradients(p, c, x.view(), y).unwrap();
    g.loss_c + g.loss_ce
}

fn layer_mut(p: &mut MlpParams, l: usize) -> &mut Dense {
    if l < p.encoder.len() {
        &mut p.encoder[l]
    } else {
        &mut p.classifier
    }
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Checks every parameter of a small random network; odd seeds omit centroids.
pub fn gradient_check(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = rng.gen_range(2..6);
    let k = rng.gen_range(2..5);
    let batch = rng.gen_range(4..9);
    let hidden = [rng.gen_range(3..8), rng.gen_range(3..6)];
    let mut params = MlpParams::init(q, k, &hidden, &mut rng);
    // Zero biases put dead-input units exactly on the ReLU kink.
    for l in 0..=params.encoder.len() {
        layer_mut(&mut params, l).bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
    }
    let x = Array2::from_shape_simple_fn((batch, q), || rng.sample::<f64, _>(StandardNormal));
    let y: Vec<usize> = (0..batch).map(|i| (i + rng.gen_range(0..k)) % k).collect();
    let centroids = seed.is_multiple_of(2)
        .then(|| Centroids(Array2::from_shape_simple_fn((k, 3), || rng.sample::<f64, _>(StandardNormal))));
    let grad = objective_gradients(&params, centroids.as_ref(), x.view(), &y).unwrap();

    let loss = |p: &MlpParams| total_loss(p, centroids.as_ref(), &x, &y);
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    for l in 0..grad.layers.len() {
        let (rows, cols) = grad.layers[l].weights.dim();
        for i in 0..=rows {
            for j in 0..cols {
                // Row `rows` stands for the bias.
                let nudge = |p: &mut MlpParams, h: f64| {
                    let d = layer_mut(p, l);
                    if i == rows {
                        d.bias[j] += h;
                    } else {
                        d.weights[[i, j]] += h;
                    }
                };
                let mut plus = params.clone();
                let mut minus = params.clone();
                nudge(&mut plus, STEP);
                nudge(&mut minus, -STEP);
                let num = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
                let g = &grad.layers[l];
                let analytic = if i == rows { g.bias[j] } else { g.weights[[i, j]] };
                max_rel = max_rel.max(rel(analytic, num));
                checked += 1;
            }
        }
    }
    if let (Some(c), Some(gc)) = (&centroids, &grad.centroids) {
        for i in 0..k {
            for j in 0..3 {
                let mut plus = c.clone();
                let mut minus = c.clone();
                plus.0[[i, j]] += STEP;
                minus.0[[i, j]] -= STEP;
                let num = (total_loss(&params, Some(&plus), &x, &y) - total_loss(&params, Some(&minus), &x, &y))
                    / (2.0 * STEP);
                max_rel = max_rel.max(rel(gc[[i, j]], num));
                checked += 1;
            }
        }
    }
    GradCheck { max_rel, checked }
}

/// Two-sample KS statistic by direct counting at every pooled value.
pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let mut best = 0u64;
    for &t in a.iter().chain(b) {
        let ca = a.iter().filter(|&&v| v <= t).count() as u64;
        let cb = b.iter().filter(|&&v| v <= t).count() as u64;
        best = best.max((ca * nb).abs_diff(cb * na));
    }
    best as f64 / (na * nb) as f64
}

/// Mean and population variance by two passes.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (mean, values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

/// Windowed decision by recounting the last `w` flags.
pub fn window_brute(flags: &[bool], w: usize, r: f64) -> bool {
    let start = flags.len().saturating_sub(w);
    let count = flags[start..].iter().filter(|&&f| f).count();
    count as f64 / w as f64 > r
}

/// Streams random data through the incremental structures and compares each
/// step against the brute-force versions above. Returns the first mismatch.
pub fn oracle_equivalence(seed: u64) -> Result<(), String> {
    use driftlab_core::detectors::{ks_statistic, Detector, Iks, WindowedDecision};
    use driftlab_core::embedding_stats::ReferenceStatistics;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Coarse grid so that ties are common.
    let mut row = |d: usize| -> Vec<f64> { (0..d).map(|_| (rng.gen::<f64>() * 12.0).round() / 3.0).collect() };

    let dim = 3;
    let window = 20;
    let reference: Vec<Vec<f64>> = (0..30).map(|_| row(dim)).collect();
    let mut iks = Iks::new(reference.iter().map(Vec::as_slice), dim, window, 0.01).map_err(|e| e.to_string())?;
    for step in 0..1000 {
        let x = row(dim);
        iks.step(&x).map_err(|e| e.to_string())?;
        let (r, t) = iks.windows();
        let stats = iks.statistics();
        for (j, &got) in stats.iter().enumerate() {
            let mut a: Vec<f64> = r.iter().map(|v| v[j]).collect();
            let mut b: Vec<f64> = t.iter().map(|v| v[j]).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let want = ks_brute(&a, &b);
            if got != want || ks_statistic(&a, &b) != want {
                return Err(format!("KS mismatch at step {step}, feature {j}: {got} vs {want}"));
            }
        }
    }

    let cap = 25;
    let mut stats = ReferenceStatistics::new(2, cap).map_err(|e| e.to_string())?;
    let mut history: Vec<Vec<f64>> = Vec::new();
    for step in 0..300 {
        let x: Vec<f64> = row(2).iter().map(|v| v * 1e3 + 5e4).collect();
        stats.push(&x).map_err(|e| e.to_string())?;
        history.push(x);
        let live = &history[history.len().saturating_sub(cap)..];
        let (mean, var) = (stats.mean(), stats.variance());
        for j in 0..2 {
            let col: Vec<f64> = live.iter().map(|v| v[j]).collect();
            let (m, v) = two_pass(&col);
            let tol = 1e-9 * m.abs().max(v).max(1.0);
            if (mean[j] - m).abs() > tol || (var[j] - v).abs() > tol {
                return Err(format!(
                    "moments mismatch at step {step}: ({}, {}) vs ({m}, {v})",
                    mean[j], var[j]
                ));
            }
        }
    }

    for &(w, r) in &[(1usize, 0.0f64), (5, 0.2), (50, 0.25), (7, 0.5)] {
        let mut dec = WindowedDecision::new(w, r);
        let mut flags = Vec::new();
        for step in 0..400 {
            let f = rng.gen_bool(0.3);
            flags.push(f);
            if dec.push(f) != window_brute(&flags, w, r) {
                return Err(format!("window decision mismatch at step {step} (w={w}, r={r})"));
            }
        }
    }
    Ok(())
}

