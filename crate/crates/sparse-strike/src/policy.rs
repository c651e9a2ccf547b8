//! Black-box policy oracle: loads a serialized feed-forward network and
//! answers state -> action-distribution queries.
//!
//! Weight-file contract (all numbers are 64-bit floats):
//! - pixel integers are scaled to `[0, 1]` by division by 255 before the
//!   first layer
//! - frame stacking is newest-last; input channel `i` of the network is
//!   channel `i` of the frame stack
//! - dense weights are row-major `[out][in]`; conv weights are
//!   `[out_channel][in_channel][kernel_row][kernel_col]`
//! - conv is valid-padding cross-correlation (no kernel flipping)
//! - activations are laid out channel-major `[c][h][w]`; flattening (explicit
//!   or implicit before a dense layer) follows that order
//! - the final vector always passes through a max-subtracted softmax,
//!   whether the head produces Q-values or probability logits

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{FrameState, StateShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    QValues,
    Probabilities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    },
    Dense {
        out_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    },
    Flatten,
}

fn default_temperature() -> f64 {
    1.0
}

/// A validated feed-forward policy. Immutable after load; `query` is
/// reentrant and safe for concurrent callers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySpec {
    #[serde(with = "shape_as_array")]
    pub input_shape: StateShape,
    pub action_count: usize,
    pub head: Head,
    /// Softmax temperature applied to the final logits (Q-values included).
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub layers: Vec<LayerSpec>,
}

mod shape_as_array {
    use super::StateShape;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S>(s: &StateShape, ser: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
    {
        [s.height, s.width, s.channels].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<StateShape, D::Error> {
        let [h, w, c] = <[usize; 3]>::deserialize(de)?;
        StateShape::new(h, w, c).map_err(serde::de::Error::custom)
    }
}

/// Intermediate activation shape while validating the layer chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActShape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl ActShape {
    fn len(&self) -> usize {
        match *self {
            ActShape::Spatial { c, h, w } => c * h * w,
            ActShape::Flat(n) => n,
        }
    }
}

impl PolicySpec {
    /// Validates shape chaining and weight/bias lengths.
    pub fn validate(&self) -> Result<()> {
        if self.action_count < 2 {
            return Err(Error::Validation(format!(
                "action_count must be >= 2, got {}",
                self.action_count
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Validation(format!(
                "temperature must be finite and positive, got {}",
                self.temperature
            )));
        }
        let mut shape = ActShape::Spatial {
            c: self.input_shape.channels,
            h: self.input_shape.height,
            w: self.input_shape.width,
        };
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel: [kh, kw],
                    stride,
                    weights,
                    bias,
                    ..
                } => {
                    let ActShape::Spatial { c, h, w } = shape else {
                        return Err(Error::Validation(format!(
                            "layer {i}: conv requires a spatial input"
                        )));
                    };
                    if *stride == 0 {
                        return Err(Error::Validation(format!("layer {i}: stride must be >= 1")));
                    }
                    if *kh == 0 || *kw == 0 || *kh > h || *kw > w {
                        return Err(Error::Validation(format!(
                            "layer {i}: kernel {kh}x{kw} does not fit input {h}x{w}"
                        )));
                    }
                    if *out_channels == 0 {
                        return Err(Error::Validation(format!(
                            "layer {i}: out_channels must be >= 1"
                        )));
                    }
                    let expect_w = out_channels * c * kh * kw;
                    if weights.len() != expect_w {
                        return Err(Error::Validation(format!(
                            "layer {i}: expected {expect_w} conv weights, got {}",
                            weights.len()
                        )));
                    }
                    if bias.len() != *out_channels {
                        return Err(Error::Validation(format!(
                            "layer {i}: expected {out_channels} conv biases, got {}",
                            bias.len()
                        )));
                    }
                    ActShape::Spatial {
                        c: *out_channels,
                        h: (h - kh) / stride + 1,
                        w: (w - kw) / stride + 1,
                    }
                }
                LayerSpec::Dense {
                    out_features,
                    weights,
                    bias,
                    ..
                } => {
                    // a dense layer flattens a spatial input implicitly
                    let in_features = shape.len();
                    if *out_features == 0 {
                        return Err(Error::Validation(format!(
                            "layer {i}: out_features must be >= 1"
                        )));
                    }
                    if weights.len() != out_features * in_features {
                        return Err(Error::Validation(format!(
                            "layer {i}: expected {} dense weights, got {}",
                            out_features * in_features,
                            weights.len()
                        )));
                    }
                    if bias.len() != *out_features {
                        return Err(Error::Validation(format!(
                            "layer {i}: expected {out_features} dense biases, got {}",
                            bias.len()
                        )));
                    }
                    ActShape::Flat(*out_features)
                }
                LayerSpec::Flatten => ActShape::Flat(shape.len()),
            };
        }
        if shape.len() != self.action_count {
            return Err(Error::Validation(format!(
                "network output has {} values but action_count is {}",
                shape.len(),
                self.action_count
            )));
        }
        Ok(())
    }

    /// Deterministic forward pass; the result satisfies the distribution
    /// invariants (entries in `[0,1]`, summing to 1).
    pub fn query(&self, state: &FrameState) -> Result<ActionDistribution> {
        if state.shape() != self.input_shape {
            return Err(Error::Shape(format!(
                "state is {}x{}x{} but policy expects {}x{}x{}",
                state.shape().height,
                state.shape().width,
                state.shape().channels,
                self.input_shape.height,
                self.input_shape.width,
                self.input_shape.channels,
            )));
        }
        let sh = self.input_shape;
        // channel-major [c][h][w], scaled to [0, 1]
        let mut act = Vec::with_capacity(sh.pixel_count());
        for c in 0..sh.channels {
            for x in 0..sh.height {
                for y in 0..sh.width {
                    act.push(state.pixel_unchecked(x, y, c) as f64 / 255.0);
                }
            }
        }
        let mut dims = ActShape::Spatial {
            c: sh.channels,
            h: sh.height,
            w: sh.width,
        };
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel: [kh, kw],
                    stride,
                    weights,
                    bias,
                    activation,
                } => {
                    let ActShape::Spatial { c, h, w } = dims else {
                        unreachable!("validated at load");
                    };
                    let oh = (h - kh) / stride + 1;
                    let ow = (w - kw) / stride + 1;
                    let mut out = Vec::with_capacity(out_channels * oh * ow);
                    for o in 0..*out_channels {
                        for r in 0..oh {
                            for s in 0..ow {
                                let mut acc = bias[o];
                                for ic in 0..c {
                                    for i in 0..*kh {
                                        for j in 0..*kw {
                                            let wv = weights
                                                [((o * c + ic) * kh + i) * kw + j];
                                            let av = act
                                                [(ic * h + r * stride + i) * w
                                                    + s * stride
                                                    + j];
                                            acc += wv * av;
                                        }
                                    }
                                }
                                out.push(apply_activation(acc, *activation));
                            }
                        }
                    }
                    act = out;
                    dims = ActShape::Spatial {
                        c: *out_channels,
                        h: oh,
                        w: ow,
                    };
                }
                LayerSpec::Dense {
                    out_features,
                    weights,
                    bias,
                    activation,
                } => {
                    let n = act.len();
                    let mut out = Vec::with_capacity(*out_features);
                    for o in 0..*out_features {
                        let mut acc = bias[o];
                        let row = &weights[o * n..(o + 1) * n];
                        for (wv, av) in row.iter().zip(&act) {
                            acc += wv * av;
                        }
                        out.push(apply_activation(acc, *activation));
                    }
                    act = out;
                    dims = ActShape::Flat(*out_features);
                }
                LayerSpec::Flatten => {
                    dims = ActShape::Flat(act.len());
                }
            }
        }
        let _ = dims;
        let probs = softmax(&act, self.temperature);
        ActionDistribution::new(probs)
    }
}

fn apply_activation(v: f64, a: Activation) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Linear => v,
    }
}

/// Max-subtracted softmax; invariant under adding a constant to all logits.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|&z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Probability vector over the policy's m actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Validation(format!(
                "distribution needs at least 2 actions, got {}",
                probs.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "invalid probability vector (sum {sum})"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Smallest index attaining the maximum probability.
///
/// The low-index tie rule keeps argmax deterministic and makes the
/// discrepancy soundness property exact.
pub fn greedy_action(dist: &ActionDistribution) -> usize {
    let mut best = 0;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > dist.probs[best] {
            best = i;
        }
    }
    best
}

/// Parses and validates a policy file.
pub fn load_policy(bytes: &[u8]) -> Result<PolicySpec> {
    let spec: PolicySpec =
        serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Query session: an immutable policy plus an atomic query counter, the
/// unit of attack-budget accounting.
#[derive(Debug)]
pub struct PolicySession<'a> {
    policy: &'a PolicySpec,
    queries: AtomicU64,
}

impl<'a> PolicySession<'a> {
    pub fn new(policy: &'a PolicySpec) -> Self {
        Self {
            policy,
            queries: AtomicU64::new(0),
        }
    }

    pub fn policy(&self) -> &PolicySpec {
        self.policy
    }

    pub fn query(&self, state: &FrameState) -> Result<ActionDistribution> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.policy.query(state)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::FrameState;

    fn dense_policy(h: usize, w: usize, c: usize, m: usize, weights: Vec<f64>, bias: Vec<f64>) -> PolicySpec {
        PolicySpec {
            input_shape: StateShape::new(h, w, c).unwrap(),
            action_count: m,
            head: Head::Probabilities,
            temperature: 1.0,
            layers: vec![LayerSpec::Dense {
                out_features: m,
                weights,
                bias,
                activation: Activation::Linear,
            }],
        }
    }

    #[test]
    fn zero_weights_give_uniform() {
        let p = dense_policy(4, 4, 1, 2, vec![0.0; 32], vec![0.0; 2]);
        p.validate().unwrap();
        let d = p.query(&FrameState::zeros(p.input_shape)).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn golden_softmax_bias() {
        // softmax([1,0,0,0]), pinned by the straight-line oracle script
        let p = dense_policy(4, 4, 1, 4, vec![0.0; 64], vec![1.0, 0.0, 0.0, 0.0]);
        let d = p.query(&FrameState::zeros(p.input_shape)).unwrap();
        let golden = [
            0.4753668864186717,
            0.17487770452710943,
            0.17487770452710943,
            0.17487770452710943,
        ];
        for (a, b) in d.probs().iter().zip(golden) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn bias_length_mismatch_rejected() {
        let p = dense_policy(4, 4, 1, 4, vec![0.0; 64], vec![0.0; 3]);
        assert!(matches!(p.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn one_action_policy_rejected() {
        let p = dense_policy(4, 4, 1, 1, vec![0.0; 16], vec![0.0]);
        assert!(matches!(p.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn q_values_head_roundtrips() {
        let json = r#"{
            "input_shape": [2, 2, 1],
            "action_count": 2,
            "head": "q_values",
            "layers": [{"kind": "dense", "out_features": 2,
                        "weights": [0,0,0,0,0,0,0,0], "bias": [0.0, 0.0],
                        "activation": "linear"}]
        }"#;
        let p = load_policy(json.as_bytes()).unwrap();
        assert_eq!(p.head, Head::QValues);
        assert_eq!(p.temperature, 1.0);
        assert_eq!(p.layers.len(), 1);
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(
            load_policy(b"{not json"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn greedy_picks_max_and_breaks_ties_low() {
        let d = ActionDistribution::new(vec![0.1, 0.7, 0.2]).unwrap();
        assert_eq!(greedy_action(&d), 1);
        let d = ActionDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(greedy_action(&d), 0);
        let d = ActionDistribution::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert_eq!(greedy_action(&d), 0);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax(&[0.3, -1.2, 2.5], 1.0);
        let b = softmax(&[100.3, 98.8, 102.5], 1.0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn query_counter_counts_and_resets() {
        let p = dense_policy(2, 2, 1, 2, vec![0.0; 8], vec![0.0; 2]);
        let session = PolicySession::new(&p);
        assert_eq!(session.query_count(), 0);
        let s = FrameState::zeros(p.input_shape);
        for _ in 0..3 {
            session.query(&s).unwrap();
        }
        assert_eq!(session.query_count(), 3);
        session.reset_count();
        assert_eq!(session.query_count(), 0);
    }

    #[test]
    fn query_is_deterministic() {
        let p = dense_policy(3, 3, 2, 3, vec![0.01; 54], vec![0.1, 0.2, 0.3]);
        let mut s = FrameState::zeros(p.input_shape);
        s.set_pixel_unchecked(1, 2, 1, 137);
        let a = p.query(&s).unwrap();
        let b = p.query(&s).unwrap();
        assert_eq!(a.probs(), b.probs());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = dense_policy(4, 4, 1, 2, vec![0.0; 32], vec![0.0; 2]);
        let s = FrameState::zeros(StateShape::new(4, 4, 2).unwrap());
        assert!(matches!(p.query(&s), Err(Error::Shape(_))));
    }
}
