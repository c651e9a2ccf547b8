//! Minimal Pong-like paddle game.
//!
//! Actions {NOOP, LEFT, RIGHT}. The ball moves one cell per step with
//! elastic wall bounces; a paddle hit scores +1 and reflects the ball,
//! a miss costs one life (reward 0 for the volley) and respawns the
//! ball. The episode ends at zero lives or `max_steps`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::Frame2d;

use super::{EnvSpec, Environment, StepResult, BALL_VALUE, PADDLE_VALUE};

pub const NOOP: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;

const PADDLE_HALF: i32 = 1; // 3-cell paddle

pub struct MiniPong {
    height: i32,
    width: i32,
    max_steps: usize,
    rng: ChaCha8Rng,
    ball: (i32, i32),
    vel: (i32, i32),
    paddle: i32, // center column
    lives: usize,
    t: usize,
    done: bool,
    started: bool,
    seed: u64,
    start_lives: usize,
}

impl MiniPong {
    pub fn new(spec: &EnvSpec) -> Result<Self> {
        let (h, w) = (spec.shape.height, spec.shape.width);
        if h < 6 || w < 6 {
            return Err(Error::Config(format!(
                "mini_pong needs at least a 6x6 board, got {h}x{w}"
            )));
        }
        if spec.lives == 0 {
            return Err(Error::Config("mini_pong needs at least one life".into()));
        }
        let mut env = Self {
            height: h as i32,
            width: w as i32,
            max_steps: spec.max_steps,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            ball: (0, 0),
            vel: (1, 1),
            paddle: 0,
            lives: spec.lives,
            t: 0,
            done: false,
            started: false,
            seed: spec.seed,
            start_lives: spec.lives,
        };
        env.reset_internal();
        Ok(env)
    }

    fn reset_internal(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.lives = self.start_lives;
        self.t = 0;
        self.done = false;
        self.started = true;
        self.paddle = self.width / 2;
        self.spawn_ball();
    }

    fn spawn_ball(&mut self) {
        let col = self.rng.gen_range(1..self.width - 1);
        let dc = if self.rng.gen_bool(0.5) { 1 } else { -1 };
        self.ball = (1, col);
        self.vel = (1, dc);
    }

    fn render(&self) -> Frame2d {
        let mut f = Frame2d::zeros(self.height as usize, self.width as usize);
        for dc in -PADDLE_HALF..=PADDLE_HALF {
            let c = (self.paddle + dc).clamp(0, self.width - 1);
            f.set((self.height - 1) as usize, c as usize, PADDLE_VALUE);
        }
        f.set(self.ball.0 as usize, self.ball.1 as usize, BALL_VALUE);
        f
    }

    pub fn ball_column(&self) -> i32 {
        self.ball.1
    }

    pub fn paddle_center(&self) -> i32 {
        self.paddle
    }
}

impl Environment for MiniPong {
    fn action_count(&self) -> usize {
        3
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
        if action >= self.action_count() {
            return Err(Error::Bounds {
                axis: "action",
                index: action,
                size: self.action_count(),
            });
        }
        match action {
            LEFT => self.paddle = (self.paddle - 1).max(PADDLE_HALF),
            RIGHT => self.paddle = (self.paddle + 1).min(self.width - 1 - PADDLE_HALF),
            _ => {}
        }

        let mut reward = 0.0;
        let (mut r, mut c) = self.ball;
        let (mut dr, mut dc) = self.vel;
        // elastic side/top bounces
        if c + dc < 0 || c + dc > self.width - 1 {
            dc = -dc;
        }
        c += dc;
        if r + dr < 0 {
            dr = -dr;
        }
        r += dr;
        if r >= self.height - 1 {
            // paddle row
            if (c - self.paddle).abs() <= PADDLE_HALF {
                reward = 1.0;
                dr = -1;
                r = self.height - 2;
                self.ball = (r, c);
                self.vel = (dr, dc);
            } else {
                self.lives -= 1;
                if self.lives == 0 {
                    self.done = true;
                    self.ball = (r.min(self.height - 2), c);
                    self.vel = (dr, dc);
                } else {
                    self.spawn_ball();
                }
            }
        } else {
            self.ball = (r, c);
            self.vel = (dr, dc);
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

    /// Track the ball column with the paddle center.
    fn expert_action(&self) -> usize {
        match self.ball.1.cmp(&self.paddle) {
            std::cmp::Ordering::Less => LEFT,
            std::cmp::Ordering::Greater => RIGHT,
            std::cmp::Ordering::Equal => NOOP,
        }
    }
}
