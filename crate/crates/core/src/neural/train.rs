use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::loss::{classification_loss, constrained_loss, Centroids};
use super::mlp::{Dense, MlpParams, Mode, DEFAULT_HIDDEN, EMBEDDING_DIM};
use crate::data::{DataSplits, Dataset};
use crate::error::{DriftlabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Encoder widths ahead of the 3-unit embedding.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            dropout_rate: 0.25,
            weight_decay: 0.001,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate > 0.0 && unit(self.learning_rate)) {
            return Err(DriftlabError::InvalidConfig(
                "learning_rate must be in (0, 1)".into(),
            ));
        }
        if !unit(self.momentum) || !unit(self.dropout_rate) || !unit(self.weight_decay) {
            return Err(DriftlabError::InvalidConfig(
                "momentum, dropout_rate and weight_decay must be in [0, 1)".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(DriftlabError::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(DriftlabError::InvalidConfig("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch training curves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss_c: Vec<f64>,
    /// Zero for unconstrained training.
    pub loss_ce: Vec<f64>,
    /// Running accuracy over the epoch's mini-batches (dropout active).
    pub train_accuracy: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: MlpParams,
    /// Learned jointly when training was constrained.
    pub centroids: Option<Centroids>,
    pub history: TrainHistory,
}

/// Gradients of `L_c + L_ce` with respect to every parameter.
#[derive(Debug, Clone)]
pub struct ObjectiveGrad {
    pub loss_c: f64,
    pub loss_ce: f64,
    /// Encoder layers then the classifier.
    pub layers: Vec<Dense>,
    pub centroids: Option<Array2<f64>>,
}

fn objective<R: Rng + ?Sized>(
    params: &MlpParams,
    centroids: Option<&Centroids>,
    x: ArrayView2<f64>,
    labels: &[usize],
    mode: Mode<'_, R>,
) -> Result<(ObjectiveGrad, Array2<f64>)> {
    let cache = params.forward_batch(x, mode)?;
    let (loss_c, d_logits) = classification_loss(cache.probs.view(), labels)?;
    let (loss_ce, d_emb, d_c) = match centroids {
        Some(c) => {
            let g = constrained_loss(cache.embeddings.view(), labels, c)?;
            (g.loss, Some(g.d_embeddings), Some(g.d_centroids))
        }
        None => (0.0, None, None),
    };
    let layers = params.backward(&cache, &d_logits, d_emb.as_ref());
    Ok((
        ObjectiveGrad {
            loss_c,
            loss_ce,
            layers,
            centroids: d_c,
        },
        cache.probs,
    ))
}

/// Eval-mode objective and analytic gradients on one batch.
pub fn objective_gradients(
    params: &MlpParams,
    centroids: Option<&Centroids>,
    x: ArrayView2<f64>,
    labels: &[usize],
) -> Result<ObjectiveGrad> {
    Ok(objective::<ChaCha8Rng>(params, centroids, x, labels, Mode::Eval)?.0)
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    // First maximum wins ties.
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of rows whose arg-max class matches the label (ties go to the lowest index).
pub fn evaluate_accuracy(params: &MlpParams, ds: &Dataset) -> Result<f64> {
    if ds.n() == 0 {
        return Err(DriftlabError::EmptyDataset);
    }
    let (_, probs) = params.predict(ds.features.view())?;
    Ok(accuracy_from_probs(probs.view(), &ds.labels))
}

pub(crate) fn accuracy_from_probs(probs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let correct = probs
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(*row) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Class means of eval-mode embeddings.
pub fn compute_centroids_posthoc(params: &MlpParams, ds: &Dataset) -> Result<Centroids> {
    let (emb, _) = params.predict(ds.features.view())?;
    let mut sums = Array2::<f64>::zeros((ds.k, EMBEDDING_DIM));
    let mut counts = vec![0usize; ds.k];
    for (row, &y) in emb.rows().into_iter().zip(&ds.labels) {
        let mut acc = sums.row_mut(y);
        acc += &row;
        counts[y] += 1;
    }
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(DriftlabError::EmptyClass(class));
        }
        sums.row_mut(class).mapv_inplace(|v| v / count as f64);
    }
    Ok(Centroids(sums))
}

struct Velocity {
    layers: Vec<Dense>,
    centroids: Option<Array2<f64>>,
}

/// Mini-batch SGD with momentum on `L_c` (+ `L_ce` when `constrained`).
///
/// The last 20% of the training split is held out for validation. L2 decay
/// applies to layer weights only; centroids start from a standard normal.
pub fn train(
    ds: &Dataset,
    splits: &DataSplits,
    cfg: &TrainConfig,
    constrained: bool,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let fit = ds.slice(splits.fit());
    let valid = ds.slice(splits.validation());
    if fit.n() == 0 {
        return Err(DriftlabError::EmptyDataset);
    }
    if !fit.categorical.is_empty() {
        return Err(DriftlabError::InvalidArgument(
            "encode categorical columns before training".into(),
        ));
    }
    if let Some(missing) = fit.class_counts().iter().position(|&c| c == 0) {
        return Err(DriftlabError::EmptyClass(missing));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MlpParams::init(ds.q(), ds.k, &cfg.hidden, &mut rng);
    let mut centroids = constrained.then(|| {
        Centroids(Array2::from_shape_simple_fn((ds.k, EMBEDDING_DIM), || {
            rng.sample(StandardNormal)
        }))
    });
    let mut velocity = Velocity {
        layers: params
            .layers()
            .map(|l| Dense::zeros(l.inputs(), l.outputs()))
            .collect(),
        centroids: centroids.as_ref().map(|c| Array2::zeros(c.0.raw_dim())),
    };

    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..fit.n()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum_c, mut sum_ce, mut correct, mut batches) = (0.0, 0.0, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let x = fit.features.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| fit.labels[i]).collect();
            let (grad, probs) = objective(
                &params,
                centroids.as_ref(),
                x.view(),
                &labels,
                Mode::Train {
                    dropout: cfg.dropout_rate,
                    rng: &mut rng,
                },
            )?;
            if !(grad.loss_c.is_finite() && grad.loss_ce.is_finite()) {
                return Err(DriftlabError::Diverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            sum_c += grad.loss_c;
            sum_ce += grad.loss_ce;
            batches += 1;
            correct += (accuracy_from_probs(probs.view(), &labels) * labels.len() as f64).round()
                as usize;
            apply_update(&mut params, centroids.as_mut(), &mut velocity, grad, cfg);
        }
        if !params.is_finite() {
            return Err(DriftlabError::Diverged(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        history.loss_c.push(sum_c / batches as f64);
        history.loss_ce.push(sum_ce / batches as f64);
        history.train_accuracy.push(correct as f64 / fit.n() as f64);
        let val_acc = if valid.n() > 0 {
            evaluate_accuracy(&params, &valid)?
        } else {
            f64::NAN
        };
        history.validation_accuracy.push(val_acc);
    }

    Ok(TrainOutput {
        params,
        centroids,
        history,
    })
}

fn apply_update(
    params: &mut MlpParams,
    centroids: Option<&mut Centroids>,
    velocity: &mut Velocity,
    grad: ObjectiveGrad,
    cfg: &TrainConfig,
) {
    let (lr, mu, wd) = (cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    for ((layer, vel), g) in params
        .layers_mut()
        .zip(velocity.layers.iter_mut())
        .zip(grad.layers)
    {
        let mut gw = g.weights;
        gw.scaled_add(wd, &layer.weights);
        vel.weights *= mu;
        vel.weights += &gw;
        layer.weights.scaled_add(-lr, &vel.weights);

        vel.bias *= mu;
        vel.bias += &g.bias;
        layer.bias.scaled_add(-lr, &vel.bias);
    }
    if let (Some(c), Some(vel), Some(g)) = (centroids, velocity.centroids.as_mut(), grad.centroids) {
        *vel *= mu;
        *vel += &g;
        c.0.scaled_add(-lr, vel);
    }
}
