//! Campaign orchestration: episodes under attack with per-frame gating,
//! GA invocation, warm-start chaining, and the sweep protocols
//! (FSA size, TCA threshold, initialization comparison).
//!
//! Seed scheme: episode seeds are `base_seed + run_index`; each frame's
//! GA run draws its own derived seed, so episodes are independent and a
//! sweep may run them concurrently without changing any output byte.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::trajectory::Trajectory;
use crate::envs::{make_env, EnvSpec};
use crate::error::{Error, Result};
use crate::ga::{self, GaConfig, InitMode};
use crate::perturb::{AdversaryGenome, FsaConfig};
use crate::policy::{greedy_action, ActionDistribution, PolicySession, PolicySpec};
use crate::seeding::derive_seed;
use crate::state::FrameState;
use crate::tca::{self, TcaConfig};

/// How the TCA threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcaMode {
    /// Fixed zeta* in [0, 1].
    Fixed(f64),
    /// Mean attack uncertainty of one unattacked rollout per
    /// (policy, env, seed), frozen before the attacked episode runs.
    MeanOfTrajectory,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub policy: PolicySpec,
    pub env: EnvSpec,
    pub fsa: FsaConfig,
    pub ga: GaConfig,
    pub tca: TcaMode,
    pub runs: usize,
    pub base_seed: u64,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        self.ga.validate()?;
        if let TcaMode::Fixed(t) = self.tca {
            TcaConfig::new(t)?;
        }
        if self.policy.input_shape.height != self.env.shape.height
            || self.policy.input_shape.width != self.env.shape.width
        {
            return Err(Error::Shape(format!(
                "policy expects {}x{} frames but env renders {}x{}",
                self.policy.input_shape.height,
                self.policy.input_shape.width,
                self.env.shape.height,
                self.env.shape.width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub t: usize,
    pub zeta: f64,
    pub attacked: bool,
    pub evaluations_used: usize,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genome: Option<AdversaryGenome>,
    pub original_action: usize,
    pub perturbed_action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub accumulated_reward: f64,
    pub total_frames: usize,
    pub attacked_frames: usize,
    pub total_oracle_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_seed: u64,
    pub zeta_star: f64,
    pub frames: Vec<FrameEntry>,
    pub totals: Totals,
}

/// One unattacked greedy rollout: the per-frame action distributions plus
/// the baseline episode totals.
pub struct Rollout {
    pub distributions: Vec<ActionDistribution>,
    pub accumulated_reward: f64,
    pub total_frames: usize,
}

pub fn unattacked_rollout(policy: &PolicySpec, env_spec: &EnvSpec) -> Result<Rollout> {
    let mut env = make_env(env_spec)?;
    let mut state = FrameState::zeros(policy.input_shape);
    state = state.push_frame(&env.reset())?;
    let mut distributions = Vec::new();
    let mut accumulated_reward = 0.0;
    while !env.done() {
        let dist = policy.query(&state)?;
        let action = greedy_action(&dist);
        distributions.push(dist);
        let step = env.step(action)?;
        accumulated_reward += step.reward;
        state = state.push_frame(&step.observation)?;
    }
    Ok(Rollout {
        total_frames: distributions.len(),
        distributions,
        accumulated_reward,
    })
}

fn resolve_threshold(config: &CampaignConfig, env_spec: &EnvSpec) -> Result<f64> {
    match config.tca {
        TcaMode::Fixed(t) => Ok(t),
        TcaMode::MeanOfTrajectory => {
            let rollout = unattacked_rollout(&config.policy, env_spec)?;
            tca::mean_uncertainty_threshold(&rollout.distributions)
        }
    }
}

/// Runs one attacked episode. Deterministic in (config, episode_seed).
pub fn run_episode(config: &CampaignConfig, episode_seed: u64) -> Result<EpisodeRecord> {
    config.validate()?;
    let env_spec = EnvSpec {
        seed: episode_seed,
        ..config.env
    };
    let zeta_star = resolve_threshold(config, &env_spec)?;
    let gate = TcaConfig::new(zeta_star)?;

    let session = PolicySession::new(&config.policy);
    let mut env = make_env(&env_spec)?;
    let mut state = FrameState::zeros(config.policy.input_shape);
    state = state.push_frame(&env.reset())?;

    let mut frames = Vec::new();
    let mut accumulated_reward = 0.0;
    let mut attacked_frames = 0;
    let mut evals_total = 0u64;
    // within-episode warm-start chain: last successful genome
    let mut last_success: Option<AdversaryGenome> = None;
    let mut t = 0usize;

    while !env.done() {
        let dist = session.query(&state)?;
        let original_action = greedy_action(&dist);
        let zeta = tca::attack_uncertainty(&dist)?;
        let attacked = tca::should_attack(zeta, &gate);

        let mut entry = FrameEntry {
            t,
            zeta,
            attacked,
            evaluations_used: 0,
            success: false,
            genome: None,
            original_action,
            perturbed_action: original_action,
            reward: 0.0,
        };

        let mut action = original_action;
        if attacked {
            attacked_frames += 1;
            let ga_seed = derive_seed(episode_seed, t as u64);
            let warm = match config.ga.init_mode {
                InitMode::WarmStart => last_success.as_ref(),
                InitMode::RandomInit => None,
            };
            let result = ga::optimize(
                &session,
                &state,
                original_action,
                &config.fsa,
                &config.ga,
                warm,
                ga_seed,
            )?;
            evals_total += result.evaluations_used as u64;
            entry.evaluations_used = result.evaluations_used;
            entry.success = result.best_outcome.success;
            entry.genome = Some(result.best_genome.clone());
            if result.best_outcome.success {
                // the executed action is the greedy action of the
                // perturbed distribution; an unsuccessful best genome
                // provably leaves the action unchanged, so it is not applied
                action = result.best_outcome.perturbed_action;
                entry.perturbed_action = action;
                last_success = Some(result.best_genome);
            }
        }

        let step = env.step(action)?;
        entry.reward = step.reward;
        accumulated_reward += step.reward;
        frames.push(entry);
        state = state.push_frame(&step.observation)?;
        t += 1;
    }

    let totals = Totals {
        accumulated_reward,
        total_frames: frames.len(),
        attacked_frames,
        total_oracle_queries: session.query_count(),
    };
    // budget accounting: one gating query per frame plus GA evaluations
    debug_assert_eq!(
        totals.total_oracle_queries,
        totals.total_frames as u64 + evals_total
    );
    Ok(EpisodeRecord {
        episode_seed,
        zeta_star,
        frames,
        totals,
    })
}

/// Runs `config.runs` episodes with seeds base_seed..base_seed+runs-1,
/// concurrently; output order and content are seed-determined.
pub fn run_campaign(config: &CampaignConfig) -> Result<Vec<EpisodeRecord>> {
    config.validate()?;
    (0..config.runs)
        .into_par_iter()
        .map(|i| run_episode(config, config.base_seed + i as u64))
        .collect()
}

/// Mean and sample standard deviation of episode totals across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_param: String,
    pub value: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_attacked_frames: f64,
    pub std_attacked_frames: f64,
    pub mean_total_frames: f64,
    pub std_total_frames: f64,
    pub runs: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // single record: std reported as 0, flagged by runs = 1 in the row
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(sweep_param: &str, value: f64, records: &[EpisodeRecord]) -> Result<SummaryRow> {
    if records.is_empty() {
        return Err(Error::Input("cannot summarize zero episodes".into()));
    }
    let rewards: Vec<f64> = records.iter().map(|r| r.totals.accumulated_reward).collect();
    let attacked: Vec<f64> = records
        .iter()
        .map(|r| r.totals.attacked_frames as f64)
        .collect();
    let total: Vec<f64> = records
        .iter()
        .map(|r| r.totals.total_frames as f64)
        .collect();
    let (mean_reward, std_reward) = mean_std(&rewards);
    let (mean_attacked_frames, std_attacked_frames) = mean_std(&attacked);
    let (mean_total_frames, std_total_frames) = mean_std(&total);
    Ok(SummaryRow {
        sweep_param: sweep_param.to_string(),
        value,
        mean_reward,
        std_reward,
        mean_attacked_frames,
        std_attacked_frames,
        mean_total_frames,
        std_total_frames,
        runs: records.len(),
    })
}

/// A sweep over one campaign parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    FsaSizes(Vec<usize>),
    TcaThresholds(Vec<f64>),
    InitModes(Vec<InitMode>),
}

pub struct SweepResult {
    pub rows: Vec<SummaryRow>,
    /// Episode records per sweep point, in sweep order.
    pub episodes: Vec<Vec<EpisodeRecord>>,
}

pub fn run_sweep(config: &CampaignConfig, sweep: &Sweep) -> Result<SweepResult> {
    let points: Vec<(String, f64, CampaignConfig)> = match sweep {
        Sweep::FsaSizes(sizes) => {
            if sizes.is_empty() {
                return Err(Error::Config("empty FSA-size sweep".into()));
            }
            sizes
                .iter()
                .map(|&n| {
                    let mut c = config.clone();
                    c.fsa.n = n;
                    ("fsa_size".to_string(), n as f64, c)
                })
                .collect()
        }
        Sweep::TcaThresholds(thresholds) => {
            if thresholds.is_empty() {
                return Err(Error::Config("empty TCA-threshold sweep".into()));
            }
            thresholds
                .iter()
                .map(|&z| {
                    let mut c = config.clone();
                    c.tca = TcaMode::Fixed(z);
                    ("tca_threshold".to_string(), z, c)
                })
                .collect()
        }
        Sweep::InitModes(modes) => {
            if modes.is_empty() {
                return Err(Error::Config("empty init-mode sweep".into()));
            }
            modes
                .iter()
                .map(|&m| {
                    let mut c = config.clone();
                    c.ga.init_mode = m;
                    let v = match m {
                        InitMode::RandomInit => 0.0,
                        InitMode::WarmStart => 1.0,
                    };
                    ("init_mode".to_string(), v, c)
                })
                .collect()
        }
    };

    let mut rows = Vec::with_capacity(points.len());
    let mut episodes = Vec::with_capacity(points.len());
    for (param, value, point_config) in points {
        let records = run_campaign(&point_config)?;
        rows.push(summarize(&param, value, &records)?);
        episodes.push(records);
    }
    Ok(SweepResult { rows, episodes })
}

/// One GA trial in the initialization comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub frame: usize,
    pub mode: InitMode,
    pub trial: usize,
    pub evaluations: usize,
    pub best_objective: f64,
}

/// Replays a recorded trajectory and, on every gated frame, runs the GA
/// `trials` times under random and warm-start initialization. Warm starts
/// are seeded with the previous gated frame's best genome; the first
/// frame has no predecessor and degrades to random initialization.
pub fn compare_init(
    policy: &PolicySpec,
    trajectory: &Trajectory,
    fsa: &FsaConfig,
    ga_config: &GaConfig,
    gate: &TcaConfig,
    trials: usize,
    base_seed: u64,
) -> Result<Vec<CompareRow>> {
    if trajectory.steps.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let session = PolicySession::new(policy);
    let mut state = FrameState::zeros(policy.input_shape);
    let mut rows = Vec::new();
    let mut prev_best: Option<AdversaryGenome> = None;

    for (frame_idx, step) in trajectory.steps.iter().enumerate() {
        state = state.push_frame(&step.frame)?;
        let dist = session.query(&state)?;
        let o = greedy_action(&dist);
        let zeta = tca::attack_uncertainty(&dist)?;
        if !tca::should_attack(zeta, gate) {
            continue;
        }

        for trial in 0..trials {
            let seed = derive_seed(base_seed, (frame_idx as u64) << 16 | trial as u64);
            let ri = ga::optimize(
                &session,
                &state,
                o,
                fsa,
                &GaConfig {
                    init_mode: InitMode::RandomInit,
                    ..*ga_config
                },
                None,
                seed,
            )?;
            rows.push(CompareRow {
                frame: frame_idx,
                mode: InitMode::RandomInit,
                trial,
                evaluations: ri.evaluations_used,
                best_objective: ri.best_outcome.discrepancy,
            });
        }

        let mut frame_best: Option<(f64, AdversaryGenome)> = None;
        for trial in 0..trials {
            let seed = derive_seed(base_seed, (frame_idx as u64) << 16 | (trials + trial) as u64);
            let wsi = ga::optimize(
                &session,
                &state,
                o,
                fsa,
                &GaConfig {
                    init_mode: InitMode::WarmStart,
                    ..*ga_config
                },
                prev_best.as_ref(),
                seed,
            )?;
            let better = frame_best
                .as_ref()
                .map(|(d, _)| wsi.best_outcome.discrepancy > *d)
                .unwrap_or(true);
            if better {
                frame_best = Some((wsi.best_outcome.discrepancy, wsi.best_genome.clone()));
            }
            rows.push(CompareRow {
                frame: frame_idx,
                mode: InitMode::WarmStart,
                trial,
                evaluations: wsi.evaluations_used,
                best_objective: wsi.best_outcome.discrepancy,
            });
        }
        if let Some((_, genome)) = frame_best {
            prev_best = Some(genome);
        }
    }
    Ok(rows)
}
