//! Single-hidden-layer feedforward network for ER regression.
//!
//! Inputs and the response are min-max scaled to [0, 1]; the hidden layer
//! is logistic and the output linear. Training is full-batch gradient
//! descent with momentum on the half mean squared error, halving the step
//! after any step that would raise the loss.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Covariates, EncodedRecord};
use crate::error::{Error, Result};
use crate::evalcv::{derive_seed, mse, random_split};
use crate::linmod::Term;

/// Min-max scaling of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: f64,
    pub max: f64,
}

impl Scaling {
    pub fn fit(values: &[f64], name: &str) -> Result<Scaling> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::ConstantColumn(name.to_string()));
        }
        Ok(Scaling { min, max })
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, s: f64) -> f64 {
        self.min + s * (self.max - self.min)
    }
}

#[inline]
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Flat parameter layout:
/// `[input weights (hidden x inputs, row-major), hidden biases, output weights, output bias]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub inputs: usize,
    pub hidden: usize,
}

impl Shape {
    pub fn param_count(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    fn b1(&self) -> usize {
        self.hidden * self.inputs
    }

    fn v(&self) -> usize {
        self.b1() + self.hidden
    }

    fn b2(&self) -> usize {
        self.v() + self.hidden
    }

    /// Network output for one scaled input row.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> f64 {
        let mut out = params[self.b2()];
        for k in 0..self.hidden {
            let w = &params[k * self.inputs..(k + 1) * self.inputs];
            let z = params[self.b1() + k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            out += params[self.v() + k] * logistic(z);
        }
        out
    }

    /// Half mean squared error plus `decay / 2` times the squared weights
    /// (biases excluded), with its gradient.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        x: &[Vec<f64>],
        y: &[f64],
        decay: f64,
    ) -> (f64, Vec<f64>) {
        let n = y.len() as f64;
        let mut grad = vec![0.0; self.param_count()];
        let mut hidden = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for (row, &target) in x.iter().zip(y) {
            let mut out = params[self.b2()];
            for (k, hk) in hidden.iter_mut().enumerate() {
                let w = &params[k * self.inputs..(k + 1) * self.inputs];
                let z = params[self.b1() + k] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                *hk = logistic(z);
                out += params[self.v() + k] * *hk;
            }
            let e = out - target;
            loss += e * e;
            grad[self.b2()] += e;
            for (k, &hk) in hidden.iter().enumerate() {
                grad[self.v() + k] += e * hk;
                let dz = e * params[self.v() + k] * hk * (1.0 - hk);
                grad[self.b1() + k] += dz;
                for (j, xj) in row.iter().enumerate() {
                    grad[k * self.inputs + j] += dz * xj;
                }
            }
        }
        loss /= 2.0 * n;
        grad.iter_mut().for_each(|g| *g /= n);
        if decay > 0.0 {
            let weights = (0..self.b1()).chain(self.v()..self.b2());
            for idx in weights {
                loss += 0.5 * decay * params[idx] * params[idx];
                grad[idx] += decay * params[idx];
            }
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_iterations: usize,
    /// Relative loss change below which training stops.
    pub tolerance: f64,
    /// Initial weights are uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    pub hidden_size: usize,
    /// Permits `hidden_size > 2 * inputs + 1`.
    pub allow_oversize: bool,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            max_iterations: 2000,
            tolerance: 1e-8,
            init_range: 0.5,
            hidden_size: 1,
            allow_oversize: false,
            learning_rate: 0.5,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

/// Upper bound on hidden units for `inputs` input variables.
pub fn max_hidden_size(inputs: usize) -> usize {
    2 * inputs + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    /// Loss after every accepted step, starting with the initial loss.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub inputs: Vec<Term>,
    pub hidden_size: usize,
    /// Row-major, `hidden_size x inputs`.
    pub input_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub input_scaling: Vec<Scaling>,
    pub response_scaling: Scaling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnPrediction {
    pub value: f64,
    /// Some input lies outside the training range.
    pub extrapolated: bool,
}

impl AnnModel {
    pub fn shape(&self) -> Shape {
        Shape {
            inputs: self.inputs.len(),
            hidden: self.hidden_size,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.input_weights.clone();
        p.extend(&self.hidden_bias);
        p.extend(&self.output_weights);
        p.push(self.output_bias);
        p
    }

    fn from_params(
        inputs: Vec<Term>,
        shape: Shape,
        params: &[f64],
        input_scaling: Vec<Scaling>,
        response_scaling: Scaling,
    ) -> Self {
        AnnModel {
            inputs,
            hidden_size: shape.hidden,
            input_weights: params[..shape.b1()].to_vec(),
            hidden_bias: params[shape.b1()..shape.v()].to_vec(),
            output_weights: params[shape.v()..shape.b2()].to_vec(),
            output_bias: params[shape.b2()],
            input_scaling,
            response_scaling,
        }
    }

    pub fn scaled_inputs(&self, x: &Covariates) -> Vec<f64> {
        self.inputs
            .iter()
            .zip(&self.input_scaling)
            .map(|(t, s)| s.scale(t.eval(x)))
            .collect()
    }

    /// Output on the scaled response axis.
    pub fn scaled_output(&self, scaled: &[f64]) -> f64 {
        self.shape().forward(&self.params(), scaled)
    }

    /// Reorders hidden units; predictions are unchanged.
    pub fn permute_hidden(&self, perm: &[usize]) -> AnnModel {
        let i = self.inputs.len();
        let mut m = self.clone();
        for (dst, &src) in perm.iter().enumerate() {
            m.input_weights[dst * i..(dst + 1) * i]
                .copy_from_slice(&self.input_weights[src * i..(src + 1) * i]);
            m.hidden_bias[dst] = self.hidden_bias[src];
            m.output_weights[dst] = self.output_weights[src];
        }
        m
    }
}

pub fn predict_ann(model: &AnnModel, x: &Covariates) -> AnnPrediction {
    let scaled = model.scaled_inputs(x);
    let extrapolated = scaled.iter().any(|s| !(-1e-12..=1.0 + 1e-12).contains(s));
    AnnPrediction {
        value: model.response_scaling.unscale(model.scaled_output(&scaled)),
        extrapolated,
    }
}

/// Trains on already scaled inputs and response; returns the parameters.
pub fn train_scaled(
    shape: Shape,
    x: &[Vec<f64>],
    y: &[f64],
    config: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let r = config.init_range;
    let mut params: Vec<f64> = (0..shape.param_count())
        .map(|_| rng.random_range(-r..=r))
        .collect();
    let (mut loss, mut grad) = shape.loss_and_grad(&params, x, y, config.weight_decay);
    if !loss.is_finite() {
        return Err(Error::Divergence(0));
    }
    let mut velocity = vec![0.0; params.len()];
    let mut lr = config.learning_rate;
    let mut trace = vec![loss];
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let step: Vec<f64> = velocity
            .iter()
            .zip(&grad)
            .map(|(v, g)| config.momentum * v - lr * g)
            .collect();
        let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
        let (trial_loss, trial_grad) = shape.loss_and_grad(&trial, x, y, config.weight_decay);
        if trial_loss.is_nan() {
            return Err(Error::Divergence(iterations));
        }
        if trial_loss <= loss {
            let rel = (loss - trial_loss) / loss.max(f64::MIN_POSITIVE);
            params = trial;
            velocity = step;
            grad = trial_grad;
            loss = trial_loss;
            trace.push(loss);
            lr *= 1.05;
            if rel < config.tolerance {
                break;
            }
        } else {
            lr *= 0.5;
            velocity.iter_mut().for_each(|v| *v = 0.0);
            if lr < 1e-12 {
                break;
            }
        }
    }
    Ok((
        params,
        TrainReport {
            iterations,
            loss_trace: trace,
        },
    ))
}

pub fn train_ann(
    data: &[EncodedRecord],
    inputs: &[Term],
    config: &TrainConfig,
) -> Result<AnnModel> {
    train_ann_report(data, inputs, config).map(|(m, _)| m)
}

pub fn train_ann_report(
    data: &[EncodedRecord],
    inputs: &[Term],
    config: &TrainConfig,
) -> Result<(AnnModel, TrainReport)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("network training data"));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidSpec(
            "network needs at least one input".into(),
        ));
    }
    if config.hidden_size == 0 {
        return Err(Error::InvalidSpec("hidden_size must be at least 1".into()));
    }
    let cap = max_hidden_size(inputs.len());
    if config.hidden_size > cap && !config.allow_oversize {
        return Err(Error::InvalidSpec(format!(
            "hidden_size {} exceeds 2i+1 = {cap}",
            config.hidden_size
        )));
    }
    let input_scaling = inputs
        .iter()
        .map(|t| {
            let col: Vec<f64> = data.iter().map(|r| t.eval(&r.x)).collect();
            Scaling::fit(&col, &t.name())
        })
        .collect::<Result<Vec<_>>>()?;
    let ers: Vec<f64> = data.iter().map(|r| r.er).collect();
    let response_scaling = Scaling::fit(&ers, "ER")?;

    let x: Vec<Vec<f64>> = data
        .iter()
        .map(|r| {
            inputs
                .iter()
                .zip(&input_scaling)
                .map(|(t, s)| s.scale(t.eval(&r.x)))
                .collect()
        })
        .collect();
    let y: Vec<f64> = ers.iter().map(|v| response_scaling.scale(*v)).collect();
    let shape = Shape {
        inputs: inputs.len(),
        hidden: config.hidden_size,
    };
    let (params, report) = train_scaled(shape, &x, &y, config)?;
    let model = AnnModel::from_params(
        inputs.to_vec(),
        shape,
        &params,
        input_scaling,
        response_scaling,
    );
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSelection {
    pub hidden_size: usize,
    /// Trained on all of `data` with the selected size.
    pub model: AnnModel,
    /// Validation MSE per candidate size; `None` where training failed.
    pub validation_mse: Vec<(usize, Option<f64>)>,
    /// Seed that produced the best validation score for the chosen size.
    pub seed: u64,
}

/// Tries hidden sizes `1..=cap` (cap = `2i + 1` unless `max_hidden` is given)
/// on a seeded split. `seeds[0]` draws the split; every seed provides one
/// initialization per size, and the best validation MSE counts.
pub fn select_architecture(
    data: &[EncodedRecord],
    inputs: &[Term],
    seeds: &[u64],
    validation_fraction: f64,
    base: &TrainConfig,
    max_hidden: Option<usize>,
) -> Result<ArchitectureSelection> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "validation fraction {validation_fraction} not in (0, 1)"
        )));
    }
    let Some(&split_seed) = seeds.first() else {
        return Err(Error::EmptyInput("architecture search seeds"));
    };
    let split = random_split(data.len(), 1.0 - validation_fraction, split_seed)?;
    let train: Vec<EncodedRecord> = split.train.iter().map(|&i| data[i]).collect();
    let valid: Vec<EncodedRecord> = split.validation.iter().map(|&i| data[i]).collect();
    let actual: Vec<f64> = valid.iter().map(|r| r.er).collect();
    let cap = max_hidden.unwrap_or_else(|| max_hidden_size(inputs.len()));

    let results: Vec<(usize, Option<(f64, u64)>)> = (1..=cap)
        .into_par_iter()
        .map(|h| {
            let mut best: Option<(f64, u64)> = None;
            for &s in seeds {
                let cfg = TrainConfig {
                    seed: derive_seed(s, h as u64),
                    hidden_size: h,
                    allow_oversize: base.allow_oversize || max_hidden.is_some(),
                    ..base.clone()
                };
                let score = train_ann(&train, inputs, &cfg).and_then(|m| {
                    let pred: Vec<f64> =
                        valid.iter().map(|r| predict_ann(&m, &r.x).value).collect();
                    mse(&pred, &actual)
                });
                match score {
                    Ok(v) if best.is_none_or(|(b, _)| v < b) => best = Some((v, cfg.seed)),
                    Ok(_) => {}
                    Err(e) => warn!("hidden size {h}, seed {s}: {e}"),
                }
            }
            (h, best)
        })
        .collect();

    let (hidden_size, (_, seed)) = results
        .iter()
        .filter_map(|(h, r)| r.map(|r| (*h, r)))
        .fold(None, |acc: Option<(usize, (f64, u64))>, cur| match acc {
            Some(a) if a.1 .0 <= cur.1 .0 => Some(a),
            _ => Some(cur),
        })
        .ok_or(Error::SelectionFailed)?;

    let cfg = TrainConfig {
        seed,
        hidden_size,
        allow_oversize: base.allow_oversize || max_hidden.is_some(),
        ..base.clone()
    };
    let model = train_ann(data, inputs, &cfg)?;
    Ok(ArchitectureSelection {
        hidden_size,
        model,
        validation_mse: results.iter().map(|(h, r)| (*h, r.map(|v| v.0))).collect(),
        seed,
    })
}
