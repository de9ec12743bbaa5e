//! Seeded synthetic binary datasets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, LabeledDataset, LabeledExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Two-dimensional scenario in which the hinge-optimal separator has
    /// poor precision at high recall: a compact positive cluster with a
    /// small tail off to one side, and a negative cloud with a decoy cluster
    /// between the two positive groups.
    TwoGaussiansFig1,
    /// Classes split by a random hyperplane with a unit gap on each side.
    Separable,
    /// Uniform features independent of the label.
    UniformNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub n_pos: usize,
    pub n_neg: usize,
    pub dimension: usize,
    /// Multiplies every cluster spread; 1.0 is the reference geometry.
    pub overlap: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            generator: Generator::TwoGaussiansFig1,
            n_pos: 600,
            n_neg: 1400,
            dimension: 2,
            overlap: 1.0,
            seed: 0,
        }
    }
}

/// Fraction of positives in the off-axis tail, and of negatives in the decoy.
const MINOR_FRACTION: f64 = 0.15;
const POS_MAIN: [f64; 2] = [3.0, 0.0];
const POS_TAIL: [f64; 2] = [0.0, 3.0];
const NEG_MAIN: [f64; 2] = [0.0, 0.0];
const NEG_DECOY: [f64; 2] = [2.0, 2.0];
const CLUSTER_SPREAD: f64 = 0.5;
const NEG_MAIN_SPREAD: f64 = 0.7;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::InvalidArgument(format!(
                "class counts must be >= 1 (got {} positive, {} negative)",
                self.n_pos, self.n_neg
            )));
        }
        if !(self.overlap >= 0.0 && self.overlap.is_finite()) {
            return Err(Error::InvalidArgument(format!("overlap {} must be finite and >= 0", self.overlap)));
        }
        let min_dim = match self.generator {
            Generator::TwoGaussiansFig1 => 2,
            _ => 1,
        };
        if self.dimension < min_dim {
            return Err(Error::InvalidArgument(format!(
                "{:?} needs dimension >= {min_dim}",
                self.generator
            )));
        }
        Ok(())
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = match spec.generator {
        Generator::TwoGaussiansFig1 => tail_and_decoy(spec, &mut rng),
        Generator::Separable => separable(spec, &mut rng),
        Generator::UniformNoise => uniform(spec, &mut rng),
    };
    examples.shuffle(&mut rng);
    LabeledDataset::new(examples)
}

fn cluster<R: Rng>(rng: &mut R, center: [f64; 2], spread: f64, dim: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    x[0] = center[0] + spread * x[0];
    x[1] = center[1] + spread * x[1];
    x
}

fn tail_and_decoy<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Vec<LabeledExample> {
    let s = spec.overlap;
    let d = spec.dimension;
    let pos_tail = (spec.n_pos as f64 * MINOR_FRACTION) as usize;
    let neg_decoy = (spec.n_neg as f64 * MINOR_FRACTION) as usize;
    let mut out = Vec::with_capacity(spec.n_pos + spec.n_neg);
    for i in 0..spec.n_neg {
        let x = if i < neg_decoy {
            cluster(rng, NEG_DECOY, s * CLUSTER_SPREAD, d)
        } else {
            cluster(rng, NEG_MAIN, s * NEG_MAIN_SPREAD, d)
        };
        out.push(LabeledExample::new(x, Label::Negative));
    }
    for i in 0..spec.n_pos {
        let center = if i < pos_tail { POS_TAIL } else { POS_MAIN };
        out.push(LabeledExample::new(cluster(rng, center, s * CLUSTER_SPREAD, d), Label::Positive));
    }
    out
}

fn separable<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Vec<LabeledExample> {
    let d = spec.dimension;
    let mut dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        dir.iter_mut().for_each(|v| *v /= norm);
    } else {
        dir[0] = 1.0;
    }
    let mut point = |label: Label| {
        let mut x: Vec<f64> = (0..d)
            .map(|_| spec.overlap * rng.sample::<f64, _>(StandardNormal))
            .collect();
        // replace the component along `dir` by a signed offset beyond the gap
        let along: f64 = x.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let offset = label.sign() * (1.0 + rng.sample::<f64, _>(StandardNormal).abs());
        x.iter_mut().zip(&dir).for_each(|(v, u)| *v += (offset - along) * u);
        LabeledExample::new(x, label)
    };
    let mut out: Vec<LabeledExample> = (0..spec.n_pos).map(|_| point(Label::Positive)).collect();
    out.extend((0..spec.n_neg).map(|_| point(Label::Negative)));
    out
}

fn uniform<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Vec<LabeledExample> {
    let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut row = |label| LabeledExample::new((0..spec.dimension).map(|_| dist.sample(rng)).collect(), label);
    let mut out: Vec<LabeledExample> = (0..spec.n_pos).map(|_| row(Label::Positive)).collect();
    out.extend((0..spec.n_neg).map(|_| row(Label::Negative)));
    out
}

/// Two isotropic Gaussian classes at `+shift` and `-shift` along every axis.
pub fn gaussian_pair(n_pos: usize, n_neg: usize, dim: usize, shift: f64, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for (count, label) in [(n_pos, Label::Positive), (n_neg, Label::Negative)] {
        for _ in 0..count {
            let x = (0..dim).map(|_| label.sign() * shift + noise.sample(&mut rng)).collect();
            out.push(LabeledExample::new(x, label));
        }
    }
    LabeledDataset::new(out)
}
