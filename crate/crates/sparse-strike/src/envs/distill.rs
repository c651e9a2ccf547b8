//! Direct weight construction of linear expert policies for the toy
//! environments, replacing trained Atari policies at desk scale.
//!
//! mini_pong: logits encode the signed ball-to-paddle column offset, so
//! the greedy action tracks the ball. grid_chase: a 1x1 conv separates
//! the target (255) and agent (128) gray levels, and the dense head
//! encodes signed row/column offsets toward the target.
//!
//! Both constructions read only the newest stacked channel, matching the
//! default perturbation target.

use crate::policy::{Activation, Head, LayerSpec, PolicySpec};
use crate::state::StateShape;

/// Logit gain per column of ball/paddle offset in mini_pong. Calibrated
/// once so chasing frames are confident (low uncertainty, hence gated)
/// while exactly-aligned frames stay above the trajectory-mean threshold.
pub const MINI_PONG_GAIN: f64 = 4.0;
/// NOOP bias: holds the paddle when the ball is aligned.
pub const MINI_PONG_NOOP_BIAS: f64 = 1.5;
/// Logit gain per cell of target/agent offset in grid_chase.
pub const GRID_CHASE_GAIN: f64 = 2.0;

const PADDLE_CELLS: f64 = 3.0;
const PADDLE_LEVEL: f64 = 128.0 / 255.0;

/// Actions [NOOP, LEFT, RIGHT]. One dense layer; softmax head.
pub fn mini_pong_expert_policy(shape: StateShape, gain: f64, noop_bias: f64) -> PolicySpec {
    let (h, w, ch) = (shape.height, shape.width, shape.channels);
    let center = (w as f64 - 1.0) / 2.0;
    let n = h * w * ch;
    let mut weights = vec![0.0; 3 * n];
    let newest = ch - 1; // flattened input is channel-major [c][h][w]
    for r in 0..h {
        for c in 0..w {
            let idx = newest * h * w + r * w + c;
            let offset = c as f64 - center;
            // +gain per column toward RIGHT from the ball (value 255 -> 1.0),
            // and the matching correction for the 3-cell 128-level paddle
            let toward_right = if r == h - 1 {
                -gain * offset / (PADDLE_LEVEL * PADDLE_CELLS)
            } else {
                gain * offset
            };
            weights[2 * n + idx] = toward_right;
            weights[n + idx] = -toward_right;
        }
    }
    PolicySpec {
        input_shape: shape,
        action_count: 3,
        head: Head::Probabilities,
        temperature: 1.0,
        layers: vec![LayerSpec::Dense {
            out_features: 3,
            weights,
            bias: vec![noop_bias, 0.0, 0.0],
            activation: Activation::Linear,
        }],
    }
}

/// Actions [UP, DOWN, LEFT, RIGHT]. 1x1 conv (2 channels, relu) feeding a
/// dense head; softmax head.
pub fn grid_chase_expert_policy(shape: StateShape, gain: f64) -> PolicySpec {
    let (h, w, ch) = (shape.height, shape.width, shape.channels);
    // ch0 = relu(v - 0.6): nonzero only for the target level (1.0 -> 0.4)
    // ch1 = relu(v) = v:   target 1.0, agent 128/255
    let mut conv_weights = vec![0.0; 2 * ch];
    conv_weights[ch - 1] = 1.0; // out 0, newest input channel
    conv_weights[2 * ch - 1] = 1.0; // out 1, newest input channel
    let conv = LayerSpec::Conv {
        out_channels: 2,
        kernel: [1, 1],
        stride: 1,
        weights: conv_weights,
        bias: vec![-0.6, 0.0],
        activation: Activation::Relu,
    };

    let va = PADDLE_LEVEL;
    let target_coeff = 2.5 + 2.5 / va; // on ch0: isolates k * target coordinate
    let plane = h * w;
    let n = 2 * plane;
    let mut weights = vec![0.0; 4 * n];
    let center_r = (h as f64 - 1.0) / 2.0;
    let center_c = (w as f64 - 1.0) / 2.0;
    for r in 0..h {
        for c in 0..w {
            let i0 = r * w + c; // ch0 plane
            let i1 = plane + i0; // ch1 plane
            let row_off = r as f64 - center_r;
            let col_off = c as f64 - center_c;
            // DOWN: +gain * (target_row - agent_row)
            weights[n + i0] = gain * row_off * target_coeff;
            weights[n + i1] = -gain * row_off / va;
            // UP = -DOWN
            weights[i0] = -weights[n + i0];
            weights[i1] = -weights[n + i1];
            // RIGHT: +gain * (target_col - agent_col)
            weights[3 * n + i0] = gain * col_off * target_coeff;
            weights[3 * n + i1] = -gain * col_off / va;
            // LEFT = -RIGHT
            weights[2 * n + i0] = -weights[3 * n + i0];
            weights[2 * n + i1] = -weights[3 * n + i1];
        }
    }
    PolicySpec {
        input_shape: shape,
        action_count: 4,
        head: Head::Probabilities,
        temperature: 1.0,
        layers: vec![
            conv,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                out_features: 4,
                weights,
                bias: vec![0.0; 4],
                activation: Activation::Linear,
            },
        ],
    }
}
