//! Length-prefixed binary trajectory recording.
//!
//! Layout (little-endian):
//!   header, 16 bytes: magic `SSTJ`, version u32, height u32, width u32
//!   records until EOF, each: payload_len u32, then
//!     t u32, action u32, reward f64, done u8, frame bytes (h*w)
//!
//! Each record holds the observation the agent saw at step `t` (before
//! acting), the action taken, and the reward received.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::state::Frame2d;

const MAGIC: &[u8; 4] = b"SSTJ";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: u32,
    pub frame: Frame2d,
    pub action: u32,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub height: usize,
    pub width: usize,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

pub fn write_trajectory<W: Write>(w: &mut W, traj: &Trajectory) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(traj.height as u32).to_le_bytes())?;
    w.write_all(&(traj.width as u32).to_le_bytes())?;
    for step in &traj.steps {
        let frame = step.frame.bytes();
        let payload_len = 4 + 4 + 8 + 1 + frame.len();
        w.write_all(&(payload_len as u32).to_le_bytes())?;
        w.write_all(&step.t.to_le_bytes())?;
        w.write_all(&step.action.to_le_bytes())?;
        w.write_all(&step.reward.to_le_bytes())?;
        w.write_all(&[step.done as u8])?;
        w.write_all(frame)?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(r: &mut R) -> Result<Trajectory> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::Trajectory("truncated header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Trajectory("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Trajectory(format!("unsupported version {version}")));
    }
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if height == 0 || width == 0 {
        return Err(Error::Trajectory("zero frame dimension".into()));
    }

    let mut steps = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let payload_len = u32::from_le_bytes(len_buf) as usize;
        let expected = 4 + 4 + 8 + 1 + height * width;
        if payload_len != expected {
            return Err(Error::Trajectory(format!(
                "record length {payload_len}, expected {expected}"
            )));
        }
        let mut payload = vec![0u8; payload_len];
        r.read_exact(&mut payload)
            .map_err(|_| Error::Trajectory("truncated record".into()))?;
        let t = u32::from_le_bytes(payload[0..4].try_into().unwrap());
        let action = u32::from_le_bytes(payload[4..8].try_into().unwrap());
        let reward = f64::from_le_bytes(payload[8..16].try_into().unwrap());
        let done = payload[16] != 0;
        let frame = Frame2d::from_bytes(height, width, payload[17..].to_vec())?;
        steps.push(TrajectoryStep {
            t,
            frame,
            action,
            reward,
            done,
        });
    }
    Ok(Trajectory {
        height,
        width,
        steps,
    })
}

/// Rolls out an environment under its scripted expert, recording
/// pre-action observations.
pub fn record_scripted(env: &mut dyn super::Environment, max_steps: usize) -> Result<Trajectory> {
    let mut obs = env.reset();
    let mut steps = Vec::new();
    let mut t = 0u32;
    while !env.done() && (t as usize) < max_steps {
        let action = env.expert_action();
        let result = env.step(action)?;
        steps.push(TrajectoryStep {
            t,
            frame: obs,
            action: action as u32,
            reward: result.reward,
            done: result.done,
        });
        obs = result.observation;
        t += 1;
    }
    Ok(Trajectory {
        height: env.frame_height(),
        width: env.frame_width(),
        steps,
    })
}
