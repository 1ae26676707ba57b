use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{DriftlabError, Result};

/// Width of the embedding layer.
pub const EMBEDDING_DIM: usize = 3;

/// Default hidden widths of the encoder ahead of the embedding layer.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 64];

/// A fully connected layer, `y = x · W + b` with `W` shaped `[inputs, outputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weights: Array2::from_shape_simple_fn((inputs, outputs), || {
                rng.gen_range(-limit..=limit)
            }),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights);
        z += &self.bias;
        z
    }
}

/// Encoder (ReLU hidden layers, linear embedding) followed by a linear
/// classifier whose logits go through softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub encoder: Vec<Dense>,
    pub classifier: Dense,
}

/// How [`MlpParams::forward_batch`] treats dropout.
pub enum Mode<'a, R: Rng + ?Sized> {
    Eval,
    /// Inverted dropout on the hidden (non-embedding) encoder layers.
    Train { dropout: f64, rng: &'a mut R },
}

/// Intermediate values kept for backpropagation.
pub struct ForwardCache {
    /// Input of each encoder layer, then the embedding (input of the classifier).
    pub(crate) inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pub(crate) pre: Vec<Array2<f64>>,
    /// Dropout scale factors (0 or 1/(1-rate)) per hidden layer, if training.
    pub(crate) masks: Vec<Option<Array2<f64>>>,
    pub embeddings: Array2<f64>,
    pub probs: Array2<f64>,
}

pub(crate) fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl MlpParams {
    /// Glorot-initialised network: `q -> hidden... -> 3 -> k`.
    pub fn init<R: Rng + ?Sized>(q: usize, k: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut widths = vec![q];
        widths.extend_from_slice(hidden);
        widths.push(EMBEDDING_DIM);
        let encoder = widths
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        MlpParams {
            encoder,
            classifier: Dense::glorot(EMBEDDING_DIM, k, rng),
        }
    }

    pub fn zeros(q: usize, k: usize, hidden: &[usize]) -> Self {
        let mut widths = vec![q];
        widths.extend_from_slice(hidden);
        widths.push(EMBEDDING_DIM);
        MlpParams {
            encoder: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            classifier: Dense::zeros(EMBEDDING_DIM, k),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn classes(&self) -> usize {
        self.classifier.outputs()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    pub(crate) fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(std::iter::once(&self.classifier))
    }

    pub(crate) fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder
            .iter_mut()
            .chain(std::iter::once(&mut self.classifier))
    }

    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<f64>,
        mode: Mode<'_, R>,
    ) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let (dropout, mut rng) = match mode {
            Mode::Eval => (0.0, None),
            Mode::Train { dropout, rng } => (dropout, Some(rng)),
        };
        let hidden = self.encoder.len() - 1;
        let mut inputs = Vec::with_capacity(self.encoder.len() + 1);
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut act = x.to_owned();
        for layer in &self.encoder[..hidden] {
            let z = layer.apply(act.view());
            let mut h = z.mapv(|v| v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(r) if dropout > 0.0 => {
                    let keep = 1.0 / (1.0 - dropout);
                    let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                        if r.gen::<f64>() < dropout {
                            0.0
                        } else {
                            keep
                        }
                    });
                    h *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(std::mem::replace(&mut act, h));
            pre.push(z);
            masks.push(mask);
        }
        let embeddings = self.encoder[hidden].apply(act.view());
        inputs.push(act);
        let mut probs = self.classifier.apply(embeddings.view());
        softmax_rows(&mut probs);
        inputs.push(embeddings.clone());
        Ok(ForwardCache {
            inputs,
            pre,
            masks,
            embeddings,
            probs,
        })
    }

    /// Eval-mode forward pass of one sample: `(embedding, class probabilities)`.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let batch = x.insert_axis(Axis(0));
        let cache = self.forward_batch::<rand::rngs::ThreadRng>(batch, Mode::Eval)?;
        Ok((
            cache.embeddings.row(0).to_owned(),
            cache.probs.row(0).to_owned(),
        ))
    }

    /// Eval-mode embeddings and probabilities for every row, in chunks.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        const CHUNK: usize = 1024;
        let n = x.nrows();
        let mut emb = Array2::zeros((n, EMBEDDING_DIM));
        let mut probs = Array2::zeros((n, self.classes()));
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let cache = self.forward_batch::<rand::rngs::ThreadRng>(
                x.slice(ndarray::s![start..end, ..]),
                Mode::Eval,
            )?;
            emb.slice_mut(ndarray::s![start..end, ..]).assign(&cache.embeddings);
            probs.slice_mut(ndarray::s![start..end, ..]).assign(&cache.probs);
            start = end;
        }
        Ok((emb, probs))
    }

    /// Backpropagates upstream gradients on the logits and on the embeddings.
    pub(crate) fn backward(
        &self,
        cache: &ForwardCache,
        d_logits: &Array2<f64>,
        d_embedding_extra: Option<&Array2<f64>>,
    ) -> Vec<Dense> {
        let n_enc = self.encoder.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n_enc + 1);

        let emb_in = &cache.inputs[n_enc];
        let classifier_grad = Dense {
            weights: emb_in.t().dot(d_logits),
            bias: d_logits.sum_axis(Axis(0)),
        };
        let mut delta = d_logits.dot(&self.classifier.weights.t());
        if let Some(extra) = d_embedding_extra {
            delta += extra;
        }

        for idx in (0..n_enc).rev() {
            let layer = &self.encoder[idx];
            let input = &cache.inputs[idx];
            grads.push(Dense {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if idx == 0 {
                break;
            }
            let mut d_act = delta.dot(&layer.weights.t());
            let hidden = idx - 1;
            if let Some(mask) = &cache.masks[hidden] {
                d_act *= mask;
            }
            Zip::from(&mut d_act)
                .and(&cache.pre[hidden])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = d_act;
        }
        grads.reverse();
        grads.push(classifier_grad);
        grads
    }
}
