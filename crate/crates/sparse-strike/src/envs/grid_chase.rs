//! Grid pursuit: the agent chases a target cell for reward +1; the target
//! respawns deterministically from the seeded stream on every capture.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::Frame2d;

use super::{EnvSpec, Environment, StepResult, BALL_VALUE, PADDLE_VALUE};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

pub struct GridChase {
    height: i32,
    width: i32,
    max_steps: usize,
    rng: ChaCha8Rng,
    agent: (i32, i32),
    target: (i32, i32),
    t: usize,
    done: bool,
    seed: u64,
}

impl GridChase {
    pub fn new(spec: &EnvSpec) -> Result<Self> {
        let (h, w) = (spec.shape.height, spec.shape.width);
        if h < 3 || w < 3 {
            return Err(Error::Config(format!(
                "grid_chase needs at least a 3x3 grid, got {h}x{w}"
            )));
        }
        let mut env = Self {
            height: h as i32,
            width: w as i32,
            max_steps: spec.max_steps,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            agent: (0, 0),
            target: (0, 0),
            t: 0,
            done: false,
            seed: spec.seed,
        };
        env.reset_internal();
        Ok(env)
    }

    fn reset_internal(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.t = 0;
        self.done = false;
        self.agent = (
            self.rng.gen_range(0..self.height),
            self.rng.gen_range(0..self.width),
        );
        self.respawn_target();
    }

    fn respawn_target(&mut self) {
        loop {
            let cell = (
                self.rng.gen_range(0..self.height),
                self.rng.gen_range(0..self.width),
            );
            if cell != self.agent {
                self.target = cell;
                return;
            }
        }
    }

    fn render(&self) -> Frame2d {
        let mut f = Frame2d::zeros(self.height as usize, self.width as usize);
        f.set(self.agent.0 as usize, self.agent.1 as usize, PADDLE_VALUE);
        f.set(self.target.0 as usize, self.target.1 as usize, BALL_VALUE);
        f
    }
}

impl Environment for GridChase {
    fn action_count(&self) -> usize {
        4
    }

    fn frame_height(&self) -> usize {
        self.height as usize
    }

    fn frame_width(&self) -> usize {
        self.width as usize
    }

    fn reset(&mut self) -> Frame2d {
        self.reset_internal();
        self.render()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(Error::Lifecycle("step after episode end".into()));
        }
        let (mut r, mut c) = self.agent;
        match action {
            UP => r -= 1,
            DOWN => r += 1,
            LEFT => c -= 1,
            RIGHT => c += 1,
            _ => {
                return Err(Error::Bounds {
                    axis: "action",
                    index: action,
                    size: self.action_count(),
                })
            }
        }
        self.agent = (r.clamp(0, self.height - 1), c.clamp(0, self.width - 1));

        let mut reward = 0.0;
        if self.agent == self.target {
            reward = 1.0;
            self.respawn_target();
        }
        self.t += 1;
        if self.t >= self.max_steps {
            self.done = true;
        }
        Ok(StepResult {
            observation: self.render(),
            reward,
            done: self.done,
            t: self.t,
        })
    }

    fn done(&self) -> bool {
        self.done
    }

    /// Step along the axis with the larger distance; rows win ties,
    /// matching the distilled policy's low-index argmax.
    fn expert_action(&self) -> usize {
        let dr = self.target.0 - self.agent.0;
        let dc = self.target.1 - self.agent.1;
        if dr != 0 && dr.abs() >= dc.abs() {
            if dr > 0 {
                DOWN
            } else {
                UP
            }
        } else if dc > 0 {
            RIGHT
        } else {
            LEFT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvName;

    fn spec(seed: u64) -> EnvSpec {
        EnvSpec::defaults(EnvName::GridChase, seed)
    }

    #[test]
    fn reset_shape_and_determinism() {
        let mut env = GridChase::new(&spec(11)).unwrap();
        let f = env.reset();
        assert_eq!((f.height, f.width), (16, 16));
        let f2 = env.reset();
        assert_eq!(f, f2);
    }

    #[test]
    fn adjacent_step_scores() {
        let mut env = GridChase::new(&spec(0)).unwrap();
        env.reset();
        // walk the expert until one step away, then step onto the target
        let mut total = 0.0;
        for _ in 0..40 {
            let s = env.step(env.expert_action()).unwrap();
            total += s.reward;
            if total > 0.0 {
                break;
            }
        }
        assert!(total >= 1.0, "expert never reached the target");
    }

    #[test]
    fn episode_ends_at_max_steps() {
        let mut env = GridChase::new(&spec(2)).unwrap();
        env.reset();
        let mut last = 0;
        while !env.done() {
            last = env.step(UP).unwrap().t;
        }
        assert_eq!(last, 200);
        assert!(env.step(UP).is_err());
    }
}
