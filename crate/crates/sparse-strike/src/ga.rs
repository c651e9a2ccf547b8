//! Elitist genetic algorithm over pixel-triple genomes.
//!
//! Maximizes the discrepancy objective with early termination as soon as
//! a positive value is found. Elites carry their scores forward; only
//! offspring consume oracle budget. Mutation noise is scaled by each
//! component's domain width before rounding, otherwise unit Gaussian
//! noise would almost never move an integer gene on a 0-255 range.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{self, AttackOutcome};
use crate::perturb::{random_genome, AdversaryGenome, FsaConfig, Gene};
use crate::policy::PolicySession;
use crate::state::{FrameState, StateShape, PIXEL_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    RandomInit,
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub selection_rate: f64,
    pub mutation_rate: f64,
    pub max_evaluations: usize,
    pub init_mode: InitMode,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            selection_rate: 0.2,
            mutation_rate: 0.1,
            max_evaluations: 400,
            init_mode: InitMode::RandomInit,
        }
    }
}

impl GaConfig {
    /// Number of elites kept each generation: ceil(lambda * beta).
    pub fn elite_count(&self) -> usize {
        (self.population_size as f64 * self.selection_rate).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::Config("evaluation budget must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.selection_rate) || self.selection_rate <= 0.0 {
            return Err(Error::Config(format!(
                "selection rate must be in (0, 1), got {}",
                self.selection_rate
            )));
        }
        if self.mutation_rate <= 0.0 {
            return Err(Error::Config(format!(
                "mutation rate must be > 0, got {}",
                self.mutation_rate
            )));
        }
        let elites = self.elite_count();
        if elites < 1 || elites >= self.population_size {
            return Err(Error::Config(format!(
                "elite count {elites} infeasible for population {}",
                self.population_size
            )));
        }
        if !(self.population_size - elites).is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population {} minus {elites} elites must be even (offspring come in pairs)",
                self.population_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_genome: AdversaryGenome,
    pub best_outcome: AttackOutcome,
    pub evaluations_used: usize,
    pub generations: usize,
    pub terminated_early: bool,
}

/// One-point crossover over the flattened integer sequence
/// `[x1,y1,p1,...,xn,yn,pn]`; cut uniform in `[1, 3n-1]`, child takes
/// `parent_a`'s prefix and `parent_b`'s suffix.
pub fn crossover<R: Rng>(
    parent_a: &AdversaryGenome,
    parent_b: &AdversaryGenome,
    rng: &mut R,
) -> Result<AdversaryGenome> {
    if parent_a.n() != parent_b.n() {
        return Err(Error::Config(format!(
            "crossover requires equal n, got {} and {}",
            parent_a.n(),
            parent_b.n()
        )));
    }
    let a = parent_a.flatten();
    let b = parent_b.flatten();
    let cut = rng.gen_range(1..a.len());
    let mut child = a[..cut].to_vec();
    child.extend_from_slice(&b[cut..]);
    AdversaryGenome::from_flat(&child)
}

/// Deterministic mutation core: component i receives
/// `round(gamma * range_i * eps_i)` and is clamped into its box.
fn mutate_with_noise(
    genome: &AdversaryGenome,
    gamma: f64,
    shape: StateShape,
    noise: &[f64],
) -> AdversaryGenome {
    let max_p = PIXEL_MAX as i32;
    let ranges = [
        shape.height as f64,
        shape.width as f64,
        (2 * max_p + 1) as f64,
    ];
    let genes = genome
        .genes
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let d = |k: usize| (gamma * ranges[k] * noise[i * 3 + k]).round() as i32;
            Gene {
                x: (g.x + d(0)).clamp(0, shape.height as i32 - 1),
                y: (g.y + d(1)).clamp(0, shape.width as i32 - 1),
                p: (g.p + d(2)).clamp(-max_p, max_p),
            }
        })
        .collect();
    AdversaryGenome { genes }
}

/// Additive Gaussian mutation with domain-width scaling.
pub fn mutate<R: Rng>(
    genome: &AdversaryGenome,
    gamma: f64,
    shape: StateShape,
    rng: &mut R,
) -> AdversaryGenome {
    let noise: Vec<f64> = (0..genome.n() * 3)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    mutate_with_noise(genome, gamma, shape, &noise)
}

struct Individual {
    genome: AdversaryGenome,
    key: Vec<i32>,
    outcome: Option<AttackOutcome>,
}

impl Individual {
    fn new(genome: AdversaryGenome) -> Self {
        let key = genome.flatten();
        Self {
            genome,
            key,
            outcome: None,
        }
    }
}

/// Runs the GA on one frame. Deterministic given (policy, state, configs,
/// seed); total oracle queries never exceed `max_evaluations`.
pub fn optimize(
    session: &PolicySession<'_>,
    state: &FrameState,
    original_action: usize,
    fsa: &FsaConfig,
    ga: &GaConfig,
    warm_seed: Option<&AdversaryGenome>,
    seed: u64,
) -> Result<GaResult> {
    ga.validate()?;
    let shape = state.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut population: Vec<Individual> = (0..ga.population_size)
        .map(|_| Individual::new(random_genome(shape, fsa, &mut rng)))
        .collect();
    if ga.init_mode == InitMode::WarmStart {
        if let Some(seed_genome) = warm_seed {
            if seed_genome.n() != fsa.n {
                return Err(Error::Config(format!(
                    "warm-start genome has n={}, expected n={}",
                    seed_genome.n(),
                    fsa.n
                )));
            }
            population[0] = Individual::new(seed_genome.clone());
        }
        // no previous adversary: degrade to random initialization
    }

    let mut evaluations = 0usize;
    let mut generations = 0usize;
    let mut best: Option<(AdversaryGenome, AttackOutcome)> = None;

    // Scores unscored individuals in order; returns true on early stop
    // (positive discrepancy) or budget exhaustion.
    let score = |population: &mut [Individual],
                     evaluations: &mut usize,
                     best: &mut Option<(AdversaryGenome, AttackOutcome)>|
     -> Result<(bool, bool)> {
        for ind in population.iter_mut().filter(|i| i.outcome.is_none()) {
            if *evaluations >= ga.max_evaluations {
                return Ok((false, true));
            }
            let outcome =
                objective::evaluate(session, state, &ind.genome, original_action, fsa)?;
            *evaluations += 1;
            let better = match best {
                None => true,
                Some((bg, bo)) => {
                    outcome.discrepancy > bo.discrepancy
                        || (outcome.discrepancy == bo.discrepancy
                            && ind.key < bg.flatten())
                }
            };
            if better {
                *best = Some((ind.genome.clone(), outcome));
            }
            ind.outcome = Some(outcome);
            if outcome.success {
                return Ok((true, false));
            }
        }
        Ok((false, *evaluations >= ga.max_evaluations))
    };

    let (mut success, mut exhausted) = score(&mut population, &mut evaluations, &mut best)?;

    while !success && !exhausted {
        // elitism: top-ceil(lambda*beta) by discrepancy, ties broken by
        // lower genome serialization order so runs are reproducible
        population.sort_by(|a, b| {
            let da = a.outcome.map(|o| o.discrepancy).unwrap_or(f64::NEG_INFINITY);
            let db = b.outcome.map(|o| o.discrepancy).unwrap_or(f64::NEG_INFINITY);
            db.partial_cmp(&da)
                .expect("discrepancy is finite")
                .then_with(|| a.key.cmp(&b.key))
        });
        let elite_count = ga.elite_count();
        population.truncate(elite_count);

        let pairs = (ga.population_size - elite_count) / 2;
        let mut offspring = Vec::with_capacity(pairs * 2);
        for _ in 0..pairs {
            let i = rng.gen_range(0..elite_count);
            let j = if elite_count >= 2 {
                // without replacement within a pair
                let j = rng.gen_range(0..elite_count - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            } else {
                i
            };
            let a = &population[i].genome;
            let b = &population[j].genome;
            let c1 = crossover(a, b, &mut rng)?;
            let c2 = crossover(b, a, &mut rng)?;
            offspring.push(Individual::new(mutate(&c1, ga.mutation_rate, shape, &mut rng)));
            offspring.push(Individual::new(mutate(&c2, ga.mutation_rate, shape, &mut rng)));
        }
        population.extend(offspring);
        generations += 1;

        let prev_best = best.as_ref().map(|(_, o)| o.discrepancy);
        (success, exhausted) = score(&mut population, &mut evaluations, &mut best)?;
        if let (Some(p), Some((_, b))) = (prev_best, best.as_ref()) {
            debug_assert!(b.discrepancy >= p, "elitism must be monotone");
        }
    }

    let (best_genome, best_outcome) =
        best.expect("budget >= 1 guarantees at least one evaluation");
    debug_assert!(evaluations <= ga.max_evaluations);
    Ok(GaResult {
        best_genome,
        best_outcome,
        evaluations_used: evaluations,
        generations,
        terminated_early: success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::TargetChannels;
    use crate::policy::{greedy_action, Activation, Head, LayerSpec, PolicySpec};

    fn fsa(n: usize) -> FsaConfig {
        FsaConfig::new(n, TargetChannels::NewestOnly).unwrap()
    }

    #[test]
    fn default_config_splits_into_elites_and_pairs() {
        let ga = GaConfig::default();
        ga.validate().unwrap();
        assert_eq!(ga.elite_count(), 2);
        assert_eq!((ga.population_size - ga.elite_count()) / 2, 4);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let ga = GaConfig {
            max_evaluations: 0,
            ..GaConfig::default()
        };
        assert!(ga.validate().is_err());

        let ga = GaConfig {
            population_size: 9, // 9 - 2 elites = 7, odd
            ..GaConfig::default()
        };
        assert!(ga.validate().is_err());
    }

    #[test]
    fn crossover_splice_semantics() {
        let a = AdversaryGenome::from_flat(&[5, 6, 7]).unwrap();
        let b = AdversaryGenome::from_flat(&[8, 9, 10]).unwrap();
        // scan seeds until cut == 1 is drawn; the child is then (5, 9, 10)
        let mut found = false;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let child = crossover(&a, &b, &mut rng).unwrap();
            if child.flatten() == vec![5, 9, 10] {
                found = true;
                break;
            }
        }
        assert!(found, "cut point 1 never drawn in 20 seeds");

        // identical parents: child equals parents for any cut
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let same = crossover(&a, &a, &mut rng).unwrap();
        assert_eq!(same, a);

        // n=2, verify a cut at a triple boundary splices whole genes
        let a2 = AdversaryGenome::from_flat(&[1, 2, 3, 4, 5, 6]).unwrap();
        let b2 = AdversaryGenome::from_flat(&[7, 8, 9, 10, 11, 12]).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let child = crossover(&a2, &b2, &mut rng).unwrap();
            if child.flatten() == vec![1, 2, 3, 10, 11, 12] {
                return;
            }
        }
        panic!("cut point 3 never drawn in 50 seeds");
    }

    #[test]
    fn crossover_mismatched_n() {
        let a = AdversaryGenome::from_flat(&[1, 2, 3]).unwrap();
        let b = AdversaryGenome::from_flat(&[1, 2, 3, 4, 5, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(crossover(&a, &b, &mut rng).is_err());
    }

    #[test]
    fn zero_noise_leaves_genome_unchanged() {
        let shape = StateShape::new(84, 84, 4).unwrap();
        let g = AdversaryGenome::from_flat(&[10, 20, -30]).unwrap();
        let out = mutate_with_noise(&g, 0.1, shape, &[0.0, 0.0, 0.0]);
        assert_eq!(out, g);
    }

    #[test]
    fn mutation_clamps_to_box() {
        let shape = StateShape::new(84, 84, 4).unwrap();
        let g = AdversaryGenome::from_flat(&[83, 0, 250]).unwrap();
        let out = mutate_with_noise(&g, 0.1, shape, &[50.0, -50.0, 50.0]);
        assert_eq!(out.genes[0].x, 83);
        assert_eq!(out.genes[0].y, 0);
        assert_eq!(out.genes[0].p, 255);
    }

    #[test]
    fn mutation_deterministic_under_seed() {
        let shape = StateShape::new(32, 32, 2).unwrap();
        let g = AdversaryGenome::from_flat(&[5, 5, 100]).unwrap();
        let a = mutate(&g, 0.1, shape, &mut ChaCha8Rng::seed_from_u64(9));
        let b = mutate(&g, 0.1, shape, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    fn uniform_policy() -> PolicySpec {
        PolicySpec {
            input_shape: StateShape::new(4, 4, 1).unwrap(),
            action_count: 3,
            head: Head::Probabilities,
            temperature: 1.0,
            layers: vec![LayerSpec::Dense {
                out_features: 3,
                weights: vec![0.0; 48],
                bias: vec![0.0; 3],
                activation: Activation::Linear,
            }],
        }
    }

    /// Only pixel (0,0) can flip the greedy action: its +10 weight toward
    /// action 1 beats the bias, while every other pixel contributes a small
    /// positive slope (never enough to flip) that gives the search a
    /// usable gradient in the perturbation value.
    fn vulnerable_policy() -> PolicySpec {
        let mut weights = vec![0.0; 2 * 16];
        for w in weights[16..32].iter_mut() {
            *w = 0.5;
        }
        weights[16] = 10.0;
        PolicySpec {
            input_shape: StateShape::new(4, 4, 1).unwrap(),
            action_count: 2,
            head: Head::Probabilities,
            temperature: 1.0,
            layers: vec![LayerSpec::Dense {
                out_features: 2,
                weights,
                bias: vec![1.0, 0.0],
                activation: Activation::Linear,
            }],
        }
    }

    #[test]
    fn uniform_policy_exhausts_exact_budget() {
        let policy = uniform_policy();
        let session = PolicySession::new(&policy);
        let state = FrameState::zeros(policy.input_shape);
        let result = optimize(
            &session,
            &state,
            0,
            &fsa(1),
            &GaConfig::default(),
            None,
            7,
        )
        .unwrap();
        assert!(!result.terminated_early);
        assert_eq!(result.evaluations_used, 400);
        assert_eq!(session.query_count(), 400);
        assert!(!result.best_outcome.success);
    }

    #[test]
    fn optimize_is_deterministic() {
        let policy = vulnerable_policy();
        let state = FrameState::zeros(policy.input_shape);
        let run = || {
            let session = PolicySession::new(&policy);
            optimize(&session, &state, 0, &fsa(1), &GaConfig::default(), None, 123).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn success_terminates_early_and_is_sound() {
        let policy = vulnerable_policy();
        let session = PolicySession::new(&policy);
        let state = FrameState::zeros(policy.input_shape);
        let mut wins = 0;
        for seed in 0..10 {
            session.reset_count();
            let r = optimize(&session, &state, 0, &fsa(1), &GaConfig::default(), None, seed)
                .unwrap();
            assert!(session.query_count() as usize <= 400);
            if r.terminated_early {
                wins += 1;
                assert!(r.best_outcome.success);
                // Theorem-1 chain: applying the genome changes the action
                let perturbed =
                    crate::perturb::apply(&state, &r.best_genome, &fsa(1)).unwrap();
                let d = policy.query(&perturbed).unwrap();
                assert_ne!(greedy_action(&d), 0);
            }
        }
        assert!(wins >= 8, "only {wins}/10 trials succeeded");
    }

    #[test]
    fn warm_start_with_winning_seed_stops_in_initial_scoring() {
        let policy = vulnerable_policy();
        let session = PolicySession::new(&policy);
        let state = FrameState::zeros(policy.input_shape);
        let winning = AdversaryGenome::from_flat(&[0, 0, 255]).unwrap();
        let ga = GaConfig {
            init_mode: InitMode::WarmStart,
            ..GaConfig::default()
        };
        let r = optimize(&session, &state, 0, &fsa(1), &ga, Some(&winning), 5).unwrap();
        assert!(r.terminated_early);
        assert_eq!(r.evaluations_used, 1);
        assert_eq!(r.generations, 0);
        assert_eq!(r.best_genome, winning);
    }
}
