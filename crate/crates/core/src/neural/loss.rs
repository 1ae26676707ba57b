//! Classification and constrained-embedding objectives with their gradients.

use ndarray::{Array2, ArrayView2};

use crate::error::{DriftlabError, Result};

/// Lower bound on the true-class probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Distances below this are treated as zero when differentiating `‖·‖`.
const NORM_EPS: f64 = 1e-12;

/// Learnable class anchors in embedding space, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids(pub Array2<f64>);

impl Centroids {
    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    /// Smallest distance between two distinct centroids (infinite for k < 2).
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.k() {
            for b in a + 1..self.k() {
                best = best.min(euclidean(self.0.row(a).to_slice().unwrap(), self.0.row(b).to_slice().unwrap()));
            }
        }
        best
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn check_batch(rows: usize, labels: &[usize], k: usize) -> Result<()> {
    if rows == 0 {
        return Err(DriftlabError::InvalidArgument("empty batch".into()));
    }
    if labels.len() != rows {
        return Err(DriftlabError::DimensionMismatch {
            expected: rows,
            found: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(DriftlabError::InvalidArgument(format!(
            "label {y} out of range for {k} classes"
        )));
    }
    Ok(())
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn classification_loss(probs: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    check_batch(probs.nrows(), labels, probs.ncols())?;
    let b = probs.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = probs.to_owned();
    for (i, &y) in labels.iter().enumerate() {
        let p = probs[[i, y]];
        if p < PROB_FLOOR {
            // Clamped region: the loss is flat in the logits.
            loss -= PROB_FLOOR.ln();
            grad.row_mut(i).fill(0.0);
        } else {
            loss -= p.ln();
            grad[[i, y]] -= 1.0;
        }
    }
    grad /= b;
    Ok((loss / b, grad))
}

/// Gradients of the constrained-embedding loss.
pub struct ConstrainedGrad {
    pub loss: f64,
    pub d_embeddings: Array2<f64>,
    pub d_centroids: Array2<f64>,
}

/// Pulls each embedding toward its class centroid, pushes it away from the
/// others (log-sum-exp of negative distances) and keeps the centroids apart
/// through `-Σ_l min_{j≠l} log‖C_l − C_j‖`. The separation term is zero for a
/// single class.
pub fn constrained_loss(
    embeddings: ArrayView2<f64>,
    labels: &[usize],
    centroids: &Centroids,
) -> Result<ConstrainedGrad> {
    let k = centroids.k();
    check_batch(embeddings.nrows(), labels, k)?;
    if embeddings.ncols() != centroids.dim() {
        return Err(DriftlabError::DimensionMismatch {
            expected: centroids.dim(),
            found: embeddings.ncols(),
        });
    }
    let c = &centroids.0;
    let dim = c.ncols();
    let b = embeddings.nrows() as f64;
    let mut loss = 0.0;
    let mut d_emb = Array2::zeros(embeddings.raw_dim());
    let mut d_c = Array2::zeros(c.raw_dim());
    let mut dist = vec![0.0; k];
    let mut weight = vec![0.0; k];

    for (i, &y) in labels.iter().enumerate() {
        let e = embeddings.row(i);
        for j in 0..k {
            dist[j] = (0..dim).map(|d| (e[d] - c[[j, d]]).powi(2)).sum::<f64>().sqrt();
        }

        // Intra-class: ‖e − C_y‖².
        loss += dist[y] * dist[y];
        for d in 0..dim {
            let g = 2.0 * (e[d] - c[[y, d]]) / b;
            d_emb[[i, d]] += g;
            d_c[[y, d]] -= g;
        }

        // Inter-class: log Σ_j exp(−d_j), shifted by the smallest distance.
        let shift = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for j in 0..k {
            weight[j] = (shift - dist[j]).exp();
            total += weight[j];
        }
        loss += total.ln() - shift;
        for j in 0..k {
            if dist[j] < NORM_EPS {
                continue;
            }
            let s = weight[j] / total;
            for d in 0..dim {
                let g = -s * (e[d] - c[[j, d]]) / dist[j] / b;
                d_emb[[i, d]] += g;
                d_c[[j, d]] -= g;
            }
        }
    }
    loss /= b;

    // Centroid separation.
    if k > 1 {
        for l in 0..k {
            let (nearest, gap) = (0..k)
                .filter(|&j| j != l)
                .map(|j| {
                    let g = (0..dim).map(|d| (c[[l, d]] - c[[j, d]]).powi(2)).sum::<f64>().sqrt();
                    (j, g)
                })
                .fold((l, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best });
            loss -= gap.ln();
            if gap >= NORM_EPS {
                let gap2 = gap * gap;
                for d in 0..dim {
                    let g = (c[[l, d]] - c[[nearest, d]]) / gap2;
                    d_c[[l, d]] -= g;
                    d_c[[nearest, d]] += g;
                }
            }
        }
    }

    Ok(ConstrainedGrad {
        loss,
        d_embeddings: d_emb,
        d_centroids: d_c,
    })
}

/// `(L_c, L_ce)` for a batch. `L_ce` is 0 when no centroids are supplied.
pub fn compute_losses(
    embeddings: ArrayView2<f64>,
    probs: ArrayView2<f64>,
    labels: &[usize],
    centroids: Option<&Centroids>,
) -> Result<(f64, f64)> {
    let (lc, _) = classification_loss(probs, labels)?;
    let lce = match centroids {
        Some(c) => constrained_loss(embeddings, labels, c)?.loss,
        None => 0.0,
    };
    Ok((lc, lce))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    use super::*;

    #[test]
    fn uniform_probs_give_log_k() {
        let probs = Array2::from_elem((5, 4), 0.25);
        let (lc, _) = classification_loss(probs.view(), &[0, 1, 2, 3, 0]).unwrap();
        assert_abs_diff_eq!(lc, 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn embedding_on_its_only_centroid_costs_nothing() {
        let c = Centroids(array![[0.5, -1.0, 2.0]]);
        let e = array![[0.5, -1.0, 2.0]];
        let g = constrained_loss(e.view(), &[0], &c).unwrap();
        assert_abs_diff_eq!(g.loss, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_true_class_probability_is_clamped() {
        let probs = array![[1.0, 0.0]];
        let (lc, grad) = classification_loss(probs.view(), &[1]).unwrap();
        assert_abs_diff_eq!(lc, -PROB_FLOOR.ln(), epsilon = 1e-12);
        assert!(lc.is_finite());
        assert!(grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separation_term_matches_formula() {
        // Centroids on a line at 0, 1, 3: nearest gaps are 1, 1, 2.
        let c = Centroids(array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let e = array![[0.0, 0.0, 0.0]];
        let full = constrained_loss(e.view(), &[0], &c).unwrap().loss;
        let data_part = 0.0 + (1.0 + (-1f64).exp() + (-3f64).exp()).ln();
        assert_abs_diff_eq!(full, data_part - 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn bad_labels_rejected() {
        let probs = Array2::from_elem((1, 2), 0.5);
        assert!(classification_loss(probs.view(), &[2]).is_err());
        assert!(classification_loss(Array2::<f64>::zeros((0, 2)).view(), &[]).is_err());
    }
}
