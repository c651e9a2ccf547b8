//! Deterministic, seeded pixel environments standing in for Atari at desk
//! scale. Identical (seed, action sequence) yields bit-identical frames,
//! rewards, and termination.
//!
//! Renderers use three gray levels: background 0, ball/target 255,
//! paddle/agent 128.

mod grid_chase;
mod mini_pong;
pub mod distill;
pub mod trajectory;

pub use grid_chase::GridChase;
pub use mini_pong::MiniPong;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{Frame2d, StateShape};

pub const BALL_VALUE: u8 = 255;
pub const PADDLE_VALUE: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    MiniPong,
    GridChase,
}

impl std::str::FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mini_pong" => Ok(EnvName::MiniPong),
            "grid_chase" => Ok(EnvName::GridChase),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

impl std::fmt::Display for EnvName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvName::MiniPong => write!(f, "mini_pong"),
            EnvName::GridChase => write!(f, "grid_chase"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvName,
    /// Frame height/width plus the stack depth campaigns build on top.
    pub shape: StateShape,
    pub max_steps: usize,
    /// mini_pong only; ignored by grid_chase.
    pub lives: usize,
    pub seed: u64,
}

impl EnvSpec {
    pub fn defaults(name: EnvName, seed: u64) -> Self {
        match name {
            EnvName::MiniPong => Self {
                name,
                shape: StateShape::new(32, 32, 4).expect("static shape"),
                max_steps: 200,
                lives: 5,
                seed,
            },
            EnvName::GridChase => Self {
                name,
                shape: StateShape::new(16, 16, 4).expect("static shape"),
                max_steps: 200,
                lives: 1,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Frame2d,
    pub reward: f64,
    pub done: bool,
    pub t: usize,
}

/// A single-caller stepping environment. Multiple instances run
/// concurrently in campaign sweeps.
pub trait Environment {
    fn action_count(&self) -> usize;
    fn frame_height(&self) -> usize;
    fn frame_width(&self) -> usize;
    /// Deterministic initial configuration from the configured seed.
    fn reset(&mut self) -> Frame2d;
    fn step(&mut self, action: usize) -> Result<StepResult>;
    fn done(&self) -> bool;
    /// Scripted expert controller used for recording and distillation.
    fn expert_action(&self) -> usize;
}

pub fn make_env(spec: &EnvSpec) -> Result<Box<dyn Environment>> {
    match spec.name {
        EnvName::MiniPong => Ok(Box::new(MiniPong::new(spec)?)),
        EnvName::GridChase => Ok(Box::new(GridChase::new(spec)?)),
    }
}
