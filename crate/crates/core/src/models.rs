//! Differentiable model families and their per-sample losses.
//!
//! Every family is a stack of affine layers. Linear and logistic models are
//! the zero-hidden-layer case; an MLP adds hidden layers with a nonlinearity
//! and a logistic output head. Parameters are stored flat, layer by layer,
//! each layer as its row-major weight matrix followed by its bias vector.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss_core::{tilt_weights, tilted_value, LossProfile, TiltParam};

/// Predicted probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-12;

pub const DEFAULT_HIDDEN_WIDTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LinearSquared,
    LogisticCrossEntropy,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub input_dim: usize,
    #[serde(default)]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Bias on the output layer of linear/logistic models. MLP layers always
    /// carry biases.
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

struct Layer {
    inputs: usize,
    outputs: usize,
    bias: bool,
    offset: usize,
}

impl Layer {
    fn size(&self) -> usize {
        self.inputs * self.outputs + if self.bias { self.outputs } else { 0 }
    }
}

impl ModelSpec {
    pub fn linear(input_dim: usize) -> Self {
        Self {
            family: Family::LinearSquared,
            input_dim,
            hidden_layers: Vec::new(),
            activation: Activation::Relu,
            intercept: true,
        }
    }

    pub fn logistic(input_dim: usize) -> Self {
        Self {
            family: Family::LogisticCrossEntropy,
            ..Self::linear(input_dim)
        }
    }

    pub fn mlp(input_dim: usize, hidden_layers: Vec<usize>, activation: Activation) -> Self {
        Self {
            family: Family::Mlp,
            input_dim,
            hidden_layers,
            activation,
            intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    /// Parses a model name: `linear`, `logistic`, or `mlp<depth>` with
    /// `depth` hidden layers of width `hidden_width`.
    pub fn from_name(
        name: &str,
        input_dim: usize,
        hidden_width: usize,
        activation: Activation,
    ) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        match name.as_str() {
            "linear" => Ok(Self::linear(input_dim)),
            "logistic" => Ok(Self::logistic(input_dim)),
            _ => {
                let depth = name
                    .strip_prefix("mlp")
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| Error::Config(format!("unknown model `{name}`")))?;
                if hidden_width == 0 {
                    return Err(Error::Config("hidden width must be positive".into()));
                }
                Ok(Self::mlp(input_dim, vec![hidden_width; depth], activation))
            }
        }
    }

    /// Short identifier used to tag frontier output.
    pub fn model_id(&self) -> String {
        match self.family {
            Family::LinearSquared => "linear".into(),
            Family::LogisticCrossEntropy => "logistic".into(),
            Family::Mlp => format!("mlp{}", self.hidden_layers.len()),
        }
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self.family, Family::LinearSquared)
    }

    /// Whether the per-sample loss is convex in the parameters.
    pub fn is_convex(&self) -> bool {
        !matches!(self.family, Family::Mlp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter(
                "input dimension must be positive".into(),
            ));
        }
        match self.family {
            Family::Mlp => {
                if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
                    return Err(Error::InvalidParameter(
                        "an mlp needs at least one hidden layer of positive width".into(),
                    ));
                }
            }
            _ => {
                if !self.hidden_layers.is_empty() {
                    return Err(Error::InvalidParameter(
                        "linear and logistic models take no hidden layers".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn layers(&self) -> Vec<Layer> {
        let mut layers = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut inputs = self.input_dim;
        let mut offset = 0;
        let is_mlp = matches!(self.family, Family::Mlp);
        for &width in self.hidden_layers.iter().chain(std::iter::once(&1)) {
            let layer = Layer {
                inputs,
                outputs: width,
                bias: is_mlp || self.intercept,
                offset,
            };
            offset += layer.size();
            inputs = width;
            layers.push(layer);
        }
        layers
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Layer::size).sum()
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for every weight and bias.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for _ in 0..layer.size() {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        ParamVector(values)
    }

    pub fn zero_params(&self) -> ParamVector {
        ParamVector(vec![0.0; self.param_count()])
    }

    fn check(&self, theta: &[f64], x: &[f64], y: f64) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: theta.len(),
            });
        }
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        self.check_target(y)
    }

    pub fn check_target(&self, y: f64) -> Result<()> {
        if self.is_classifier() {
            if y != 0.0 && y != 1.0 {
                return Err(Error::InvalidTarget(format!(
                    "classification targets must be 0 or 1, got {y}"
                )));
            }
        } else if !y.is_finite() {
            return Err(Error::InvalidTarget(format!("target is not finite ({y})")));
        }
        Ok(())
    }

    /// Forward pass; returns the activations of every layer (input first)
    /// plus the pre-activations of the hidden layers.
    fn forward(
        &self,
        layers: &[Layer],
        theta: &[f64],
        x: &[f64],
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(layers.len());
        for (k, layer) in layers.iter().enumerate() {
            let input = &activations[k];
            let w = &theta[layer.offset..layer.offset + layer.inputs * layer.outputs];
            let b = layer.bias.then(|| {
                &theta[layer.offset + layer.inputs * layer.outputs..layer.offset + layer.size()]
            });
            let z: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                    let dot: f64 = row.iter().zip(input).map(|(a, b)| a * b).sum();
                    dot + b.map_or(0.0, |b| b[o])
                })
                .collect();
            let is_output = k + 1 == layers.len();
            if is_output {
                activations.push(z);
            } else {
                activations.push(z.iter().map(|&v| self.activation.apply(v)).collect());
                pre.push(z);
            }
        }
        (activations, pre)
    }

    /// Loss and its derivative with respect to the network output.
    fn head(&self, output: f64, y: f64) -> (f64, f64) {
        match self.family {
            Family::LinearSquared => {
                let r = output - y;
                (r * r, 2.0 * r)
            }
            Family::LogisticCrossEntropy | Family::Mlp => {
                let raw = sigmoid(output);
                let p = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
                let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
                // zero slope where the clamp is active
                let d = if raw == p { p - y } else { 0.0 };
                (loss.max(0.0), d)
            }
        }
    }

    /// Network output (prediction for regression, logit for classifiers).
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: theta.len(),
            });
        }
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let layers = self.layers();
        let (activations, _) = self.forward(&layers, theta, x);
        Ok(activations.last().expect("output layer")[0])
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

pub fn per_sample_loss(spec: &ModelSpec, theta: &[f64], x: &[f64], y: f64) -> Result<f64> {
    spec.check(theta, x, y)?;
    let layers = spec.layers();
    let (activations, _) = spec.forward(&layers, theta, x);
    Ok(spec.head(activations.last().expect("output layer")[0], y).0)
}

pub fn per_sample_grad(
    spec: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    y: f64,
) -> Result<SampleLossGrad> {
    spec.check(theta, x, y)?;
    Ok(backprop(spec, &spec.layers(), theta, x, y))
}

fn backprop(
    spec: &ModelSpec,
    layers: &[Layer],
    theta: &[f64],
    x: &[f64],
    y: f64,
) -> SampleLossGrad {
    let (activations, pre) = spec.forward(layers, theta, x);
    let (loss, d_out) = spec.head(activations.last().expect("output layer")[0], y);

    let mut grad = vec![0.0; theta.len()];
    // gradient of the loss with respect to the current layer's pre-activation
    let mut delta = vec![d_out];
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        let input = &activations[k];
        let w_len = layer.inputs * layer.outputs;
        for o in 0..layer.outputs {
            let row =
                &mut grad[layer.offset + o * layer.inputs..layer.offset + (o + 1) * layer.inputs];
            for (g, &a) in row.iter_mut().zip(input) {
                *g = delta[o] * a;
            }
            if layer.bias {
                grad[layer.offset + w_len + o] = delta[o];
            }
        }
        if k == 0 {
            break;
        }
        let w = &theta[layer.offset..layer.offset + w_len];
        let below = &pre[k - 1];
        let below_act = &activations[k];
        delta = (0..layer.inputs)
            .map(|i| {
                let back: f64 = (0..layer.outputs)
                    .map(|o| w[o * layer.inputs + i] * delta[o])
                    .sum();
                back * spec.activation.derivative(below[i], below_act[i])
            })
            .collect();
    }
    SampleLossGrad { loss, grad }
}

fn check_dataset(spec: &ModelSpec, theta: &[f64], dataset: &Dataset) -> Result<()> {
    if dataset.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    if dataset.p() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            found: dataset.p(),
        });
    }
    if theta.len() != spec.param_count() {
        return Err(Error::DimensionMismatch {
            expected: spec.param_count(),
            found: theta.len(),
        });
    }
    Ok(())
}

/// Per-observation losses at `theta`.
pub fn loss_profile(spec: &ModelSpec, theta: &[f64], dataset: &Dataset) -> Result<LossProfile> {
    check_dataset(spec, theta, dataset)?;
    let losses = (0..dataset.n())
        .map(|i| per_sample_loss(spec, theta, dataset.row(i), dataset.targets()[i]))
        .collect::<Result<Vec<_>>>()?;
    LossProfile::new(losses)
}

fn samples(spec: &ModelSpec, theta: &[f64], dataset: &Dataset) -> Result<Vec<SampleLossGrad>> {
    check_dataset(spec, theta, dataset)?;
    let layers = spec.layers();
    (0..dataset.n())
        .map(|i| {
            let y = dataset.targets()[i];
            spec.check_target(y)?;
            Ok(backprop(spec, &layers, theta, dataset.row(i), y))
        })
        .collect()
}

/// Compensated, sample-ordered sum of `weights[i] * samples[i].grad`,
/// accumulated coordinate-wise in one pass over the samples.
fn weighted_grad(samples: &[SampleLossGrad], weights: &[f64], d: usize) -> Vec<f64> {
    let mut sum = vec![0.0; d];
    let mut comp = vec![0.0; d];
    for (sample, &w) in samples.iter().zip(weights) {
        for ((s, c), &g) in sum.iter_mut().zip(comp.iter_mut()).zip(&sample.grad) {
            let v = w * g;
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }
    sum.iter().zip(&comp).map(|(s, c)| s + c).collect()
}

/// Tilted objective at `theta` and its gradient, the tilt-weighted average
/// of the per-sample gradients.
pub fn tilted_objective_and_grad(
    spec: &ModelSpec,
    theta: &[f64],
    dataset: &Dataset,
    tilt: TiltParam,
) -> Result<(f64, Vec<f64>)> {
    let samples = samples(spec, theta, dataset)?;
    let profile = LossProfile::new(samples.iter().map(|s| s.loss).collect())?;
    let weights = tilt_weights(&profile, tilt);
    Ok((
        tilted_value(&profile, tilt),
        weighted_grad(&samples, &weights, theta.len()),
    ))
}

/// Mean loss at `theta` and its gradient.
pub fn mean_objective_and_grad(
    spec: &ModelSpec,
    theta: &[f64],
    dataset: &Dataset,
) -> Result<(f64, Vec<f64>)> {
    let samples = samples(spec, theta, dataset)?;
    let profile = LossProfile::new(samples.iter().map(|s| s.loss).collect())?;
    let weights = vec![1.0 / samples.len() as f64; samples.len()];
    Ok((
        profile.mean(),
        weighted_grad(&samples, &weights, theta.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn central_difference<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64], h: f64) -> Vec<f64> {
        (0..theta.len())
            .map(|j| {
                let mut plus = theta.to_vec();
                let mut minus = theta.to_vec();
                plus[j] += h;
                minus[j] -= h;
                (f(&plus) - f(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / scale.max(1e-8)
    }

    #[test]
    fn param_counts() {
        assert_eq!(ModelSpec::linear(3).param_count(), 4);
        assert_eq!(ModelSpec::linear(3).without_intercept().param_count(), 3);
        assert_eq!(ModelSpec::logistic(5).param_count(), 6);
        // 4*8+8 + 8*8+8 + 8+1
        assert_eq!(
            ModelSpec::mlp(4, vec![8, 8], Activation::Relu).param_count(),
            121
        );
    }

    #[test]
    fn logistic_at_zero_is_ln2() {
        let spec = ModelSpec::logistic(3);
        let theta = spec.zero_params();
        for y in [0.0, 1.0] {
            let l = per_sample_loss(&spec, theta.as_slice(), &[0.3, -2.0, 5.0], y).unwrap();
            assert!((l - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        let spec = ModelSpec::linear(2);
        let l = per_sample_loss(&spec, &[1.0, 2.0, 0.5], &[3.0, -1.0], 1.5).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn zero_mlp_gives_zero_logit() {
        let spec = ModelSpec::mlp(3, vec![4], Activation::Relu);
        let theta = spec.zero_params();
        let l = per_sample_loss(&spec, theta.as_slice(), &[1.0, 2.0, 3.0], 1.0).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hand_derived_gradients() {
        let spec = ModelSpec::linear(1).without_intercept();
        let s = per_sample_grad(&spec, &[1.0], &[2.0], 1.0).unwrap();
        assert_eq!(s.loss, 1.0);
        assert_eq!(s.grad, vec![4.0]);

        let spec = ModelSpec::logistic(1);
        let s = per_sample_grad(&spec, &[0.0, 0.0], &[1.0], 1.0).unwrap();
        assert_eq!(s.grad, vec![-0.5, -0.5]);
    }

    #[test]
    fn probability_clamp_bounds_the_loss() {
        let spec = ModelSpec::logistic(1);
        let s = per_sample_grad(&spec, &[100.0, 0.0], &[1.0], 0.0).unwrap();
        assert!((s.loss - (-(PROB_EPS.ln()))).abs() < 1e-3);
        assert!(s.loss.is_finite());
        assert_eq!(s.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_and_target_errors() {
        let spec = ModelSpec::logistic(2);
        assert!(matches!(
            per_sample_loss(&spec, &[0.0; 2], &[1.0, 2.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            per_sample_loss(&spec, &[0.0; 3], &[1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            per_sample_loss(&spec, &[0.0; 3], &[1.0, 2.0], 0.5),
            Err(Error::InvalidTarget(_))
        ));
        assert!(matches!(
            per_sample_loss(&ModelSpec::linear(1), &[0.0; 2], &[1.0], f64::NAN),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn model_names() {
        let spec = ModelSpec::from_name("mlp3", 4, 16, Activation::Tanh).unwrap();
        assert_eq!(spec.hidden_layers, vec![16, 16, 16]);
        assert_eq!(spec.model_id(), "mlp3");
        assert_eq!(
            ModelSpec::from_name("Logistic", 4, 16, Activation::Relu)
                .unwrap()
                .model_id(),
            "logistic"
        );
        assert!(ModelSpec::from_name("mlp0", 4, 16, Activation::Relu).is_err());
        assert!(ModelSpec::from_name("forest", 4, 16, Activation::Relu).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible_and_bounded() {
        let spec = ModelSpec::mlp(9, vec![4], Activation::Relu);
        let a = spec.init_params(7);
        assert_eq!(a, spec.init_params(7));
        assert_ne!(a, spec.init_params(8));
        assert!(a.as_slice()[..36].iter().all(|v| v.abs() <= 1.0 / 3.0));
    }

    #[test]
    fn per_sample_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let specs = [
            ModelSpec::linear(3),
            ModelSpec::logistic(3),
            ModelSpec::mlp(3, vec![5], Activation::Relu),
            ModelSpec::mlp(3, vec![4, 3], Activation::Tanh),
        ];
        for spec in &specs {
            for _ in 0..25 {
                let theta: Vec<f64> = (0..spec.param_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = if spec.is_classifier() {
                    f64::from(rng.random_bool(0.5))
                } else {
                    rng.random_range(-1.0..1.0)
                };
                let analytic = per_sample_grad(spec, &theta, &x, y).unwrap().grad;
                let numeric =
                    central_difference(|t| per_sample_loss(spec, t, &x, y).unwrap(), &theta, 1e-5);
                let err = relative_error(&analytic, &numeric);
                assert!(err < 1e-5, "{:?}: rel err {err}", spec.family);
            }
        }
    }

    fn toy_dataset(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Dataset {
        Dataset::from_rows(rows, targets, None).unwrap()
    }

    #[test]
    fn single_sample_objective_equals_sample_gradient() {
        let spec = ModelSpec::logistic(2);
        let data = toy_dataset(vec![vec![0.4, -1.0]], vec![1.0]);
        let theta = [0.3, -0.2, 0.1];
        let (v, g) =
            tilted_objective_and_grad(&spec, &theta, &data, TiltParam::new(3.0).unwrap()).unwrap();
        let s = per_sample_grad(&spec, &theta, &[0.4, -1.0], 1.0).unwrap();
        assert_eq!(v, s.loss);
        assert_eq!(g, s.grad);
    }

    #[test]
    fn identical_samples_give_that_sample_gradient() {
        let spec = ModelSpec::linear(1);
        let data = toy_dataset(vec![vec![2.0]; 4], vec![1.0; 4]);
        let theta = [0.5, 0.25];
        let (_, g) =
            tilted_objective_and_grad(&spec, &theta, &data, TiltParam::new(7.0).unwrap()).unwrap();
        let s = per_sample_grad(&spec, &theta, &[2.0], 1.0).unwrap();
        for (a, b) in g.iter().zip(&s.grad) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn tilted_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..20).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let data = toy_dataset(rows, targets);
        let spec = ModelSpec::logistic(2);
        let tilt = TiltParam::new(2.0).unwrap();
        let theta = [0.7, -0.4, 0.2];
        let (_, g) = tilted_objective_and_grad(&spec, &theta, &data, tilt).unwrap();
        let numeric = central_difference(
            |t| tilted_objective_and_grad(&spec, t, &data, tilt).unwrap().0,
            &theta,
            1e-5,
        );
        assert!(relative_error(&g, &numeric) < 1e-5);
    }

    #[test]
    fn tilted_objective_is_midpoint_convex_for_convex_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let cls: Vec<f64> = (0..15).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let reg: Vec<f64> = (0..15).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cases = [
            (ModelSpec::logistic(2), toy_dataset(rows.clone(), cls)),
            (ModelSpec::linear(2), toy_dataset(rows, reg)),
        ];
        let tilt = TiltParam::new(1.5).unwrap();
        for (spec, data) in &cases {
            for _ in 0..200 {
                let a: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let b: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let f = |t: &[f64]| tilted_objective_and_grad(spec, t, data, tilt).unwrap().0;
                assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-10);
            }
        }
    }

    #[test]
    fn mean_objective_is_average_loss() {
        let spec = ModelSpec::linear(1).without_intercept();
        let data = toy_dataset(vec![vec![1.0], vec![2.0]], vec![0.0, 10.0]);
        let (v, g) = mean_objective_and_grad(&spec, &[4.0], &data).unwrap();
        assert_eq!(v, (16.0 + 4.0) / 2.0);
        // d/dθ: (2·4·1 + 2·(8-10)·2)/2 = 0 at the least-squares solution
        assert!(g[0].abs() < 1e-14);
    }
}
