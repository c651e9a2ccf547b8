//! Fractional-state adversary: n pixel triples (x, y, p) applied to a
//! frame stack with clamping into the pixel domain.
//!
//! `p` is an additive signed delta, clamped at application time rather
//! than rejected, so the search space stays box-shaped for the GA.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{FrameState, StateShape, PIXEL_MAX};

/// One perturbed pixel: coordinates plus additive perturbation value.
/// Serializes as an `[x, y, p]` integer triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 3]", into = "[i32; 3]")]
pub struct Gene {
    pub x: i32,
    pub y: i32,
    pub p: i32,
}

impl From<[i32; 3]> for Gene {
    fn from([x, y, p]: [i32; 3]) -> Self {
        Self { x, y, p }
    }
}

impl From<Gene> for [i32; 3] {
    fn from(g: Gene) -> Self {
        [g.x, g.y, g.p]
    }
}

/// GA individual: `n` genes. Duplicate coordinates are permitted with
/// last-write-wins at application.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdversaryGenome {
    pub genes: Vec<Gene>,
}

impl AdversaryGenome {
    pub fn n(&self) -> usize {
        self.genes.len()
    }

    /// Flattened integer sequence [x1, y1, p1, ..., xn, yn, pn]; the
    /// representation crossover and deterministic tie-breaking operate on.
    pub fn flatten(&self) -> Vec<i32> {
        self.genes
            .iter()
            .flat_map(|g| [g.x, g.y, g.p])
            .collect()
    }

    pub fn from_flat(flat: &[i32]) -> Result<Self> {
        if flat.is_empty() || !flat.len().is_multiple_of(3) {
            return Err(Error::Config(format!(
                "genome sequence length must be a positive multiple of 3, got {}",
                flat.len()
            )));
        }
        Ok(Self {
            genes: flat
                .chunks(3)
                .map(|c| Gene {
                    x: c[0],
                    y: c[1],
                    p: c[2],
                })
                .collect(),
        })
    }
}

/// Which channels of the stack a gene writes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChannels {
    /// Corrupt only the most recent observation (default).
    NewestOnly,
    /// Ablation: write every channel of the stack.
    AllChannels,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsaConfig {
    /// FSA size: number of attacked pixels per frame.
    pub n: usize,
    pub target_channels: TargetChannels,
}

impl FsaConfig {
    pub fn new(n: usize, target_channels: TargetChannels) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("FSA size n must be >= 1".into()));
        }
        Ok(Self {
            n,
            target_channels,
        })
    }
}

/// Uniform random genome: coordinates over the frame, p over
/// [-255, 255] (application clamps).
pub fn random_genome<R: Rng>(shape: StateShape, config: &FsaConfig, rng: &mut R) -> AdversaryGenome {
    let genes = (0..config.n)
        .map(|_| Gene {
            x: rng.gen_range(0..shape.height as i32),
            y: rng.gen_range(0..shape.width as i32),
            p: rng.gen_range(-(PIXEL_MAX as i32)..=PIXEL_MAX as i32),
        })
        .collect();
    AdversaryGenome { genes }
}

/// Applies a genome to a state: each targeted pixel takes
/// `clamp(u + p, 0, 255)`. Pure; the input state is untouched.
pub fn apply(
    state: &FrameState,
    genome: &AdversaryGenome,
    config: &FsaConfig,
) -> Result<FrameState> {
    let shape = state.shape();
    let mut out = state.clone();
    for gene in &genome.genes {
        if gene.x < 0 || gene.x as usize >= shape.height {
            return Err(Error::Bounds {
                axis: "height",
                index: gene.x.max(0) as usize,
                size: shape.height,
            });
        }
        if gene.y < 0 || gene.y as usize >= shape.width {
            return Err(Error::Bounds {
                axis: "width",
                index: gene.y.max(0) as usize,
                size: shape.width,
            });
        }
        let (x, y) = (gene.x as usize, gene.y as usize);
        let channels: Vec<usize> = match config.target_channels {
            TargetChannels::NewestOnly => vec![shape.channels - 1],
            TargetChannels::AllChannels => (0..shape.channels).collect(),
        };
        for c in channels {
            // deltas are relative to the input state, so duplicated
            // coordinates overwrite (last write wins) rather than stack
            let u = state.pixel_unchecked(x, y, c) as i32;
            let v = (u + gene.p).clamp(0, PIXEL_MAX as i32);
            out.set_pixel_unchecked(x, y, c, v as u8);
        }
    }
    Ok(out)
}

/// Fraction of a frame's pixels the adversary may touch: n / (h * w).
pub fn perturbed_fraction(shape: StateShape, config: &FsaConfig) -> f64 {
    config.n as f64 / (shape.height * shape.width) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(h: usize, w: usize, c: usize) -> StateShape {
        StateShape::new(h, w, c).unwrap()
    }

    fn cfg(n: usize) -> FsaConfig {
        FsaConfig::new(n, TargetChannels::NewestOnly).unwrap()
    }

    #[test]
    fn random_genome_in_range_and_deterministic() {
        let sh = shape(84, 84, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = random_genome(sh, &cfg(1), &mut rng);
        assert_eq!(g.n(), 1);
        assert!((0..84).contains(&g.genes[0].x));
        assert!((0..84).contains(&g.genes[0].y));

        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let g2 = random_genome(sh, &cfg(1), &mut rng2);
        assert_eq!(g, g2);

        let g4 = random_genome(sh, &cfg(4), &mut rng);
        assert_eq!(g4.n(), 4);
    }

    #[test]
    fn clamp_upper_and_lower() {
        let sh = shape(8, 8, 1);
        let mut s = FrameState::zeros(sh);
        s.set_pixel_unchecked(3, 3, 0, 250);
        s.set_pixel_unchecked(0, 0, 0, 10);
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 3, y: 3, p: 20 }, Gene { x: 0, y: 0, p: -40 }],
        };
        let out = apply(&s, &genome, &cfg(2)).unwrap();
        assert_eq!(out.get_pixel(3, 3, 0).unwrap(), 255);
        assert_eq!(out.get_pixel(0, 0, 0).unwrap(), 0);
        // input untouched
        assert_eq!(s.get_pixel(3, 3, 0).unwrap(), 250);
    }

    #[test]
    fn duplicate_coordinates_last_write_wins() {
        let sh = shape(4, 4, 1);
        let mut s = FrameState::zeros(sh);
        s.set_pixel_unchecked(2, 2, 0, 100);
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 2, y: 2, p: 5 }, Gene { x: 2, y: 2, p: -5 }],
        };
        let out = apply(&s, &genome, &cfg(2)).unwrap();
        assert_eq!(out.get_pixel(2, 2, 0).unwrap(), 95);
    }

    #[test]
    fn newest_only_touches_last_channel() {
        let sh = shape(4, 4, 3);
        let s = FrameState::zeros(sh);
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 1, y: 1, p: 200 }],
        };
        let out = apply(&s, &genome, &cfg(1)).unwrap();
        assert_eq!(out.get_pixel(1, 1, 2).unwrap(), 200);
        assert_eq!(out.get_pixel(1, 1, 0).unwrap(), 0);
        assert_eq!(out.get_pixel(1, 1, 1).unwrap(), 0);

        let all = FsaConfig::new(1, TargetChannels::AllChannels).unwrap();
        let out = apply(&s, &genome, &all).unwrap();
        for c in 0..3 {
            assert_eq!(out.get_pixel(1, 1, c).unwrap(), 200);
        }
    }

    #[test]
    fn out_of_bounds_gene_rejected() {
        let sh = shape(4, 4, 1);
        let s = FrameState::zeros(sh);
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 4, y: 0, p: 1 }],
        };
        assert!(matches!(
            apply(&s, &genome, &cfg(1)),
            Err(Error::Bounds { axis: "height", .. })
        ));
    }

    #[test]
    fn paper_fraction_values() {
        assert!((perturbed_fraction(shape(84, 84, 4), &cfg(1)) - 1.0 / 7056.0).abs() < 1e-15);
        assert!((perturbed_fraction(shape(84, 84, 4), &cfg(4)) - 4.0 / 7056.0).abs() < 1e-15);
        assert!((perturbed_fraction(shape(8, 8, 1), &cfg(1)) - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn zero_delta_is_identity() {
        let sh = shape(6, 6, 2);
        let mut s = FrameState::zeros(sh);
        s.set_pixel_unchecked(5, 5, 1, 77);
        let genome = AdversaryGenome {
            genes: vec![Gene { x: 5, y: 5, p: 0 }, Gene { x: 0, y: 3, p: 0 }],
        };
        let out = apply(&s, &genome, &cfg(2)).unwrap();
        assert_eq!(out, s);
    }
}
