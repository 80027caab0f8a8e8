//! Seeded sampling of the fixed-energy manifold.
//!
//! The chain walks the free coordinates (amplitudes or probabilities,
//! depending on the measure), where the target density is uniform on the
//! feasible region. Each step picks a random direction, bounds the chord
//! through the current point with the region's axis caps, and draws the new
//! point uniformly on the feasible part of that chord by shrinkage: sample
//! on the bounding interval, and on an infeasible draw shrink the interval
//! edge to the draw and try again. Shrinkage toward the current point keeps
//! the uniform law exactly stationary, including over non-convex regions,
//! and moves on every step.
//!
//! Plain axis-aligned random-walk proposals were tried first and mix far
//! too slowly here: for ladder spectra the feasible set is a thin wedge
//! between two nearly parallel half-spaces, and axis steps scaled to the
//! local slice width crawl along it. Direction sampling crosses the wedge
//! directly.
//!
//! Chains are reproducible: chain `c` draws from a ChaCha stream derived
//! from `(seed, c)`, so identical settings give bit-identical output, and
//! chains can run in parallel without sharing state.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::canonical::solve_beta;
use crate::error::{EnsembleError, Result};
use crate::spectrum::OccupationVector;

use super::{AverageMethod, EnsembleAverage, EnsembleSpec, Measure, Parameterization};

/// Batches per chain for the batch-means standard error estimate.
const BATCHES_PER_CHAIN: usize = 20;

/// Across-chain disagreement threshold, in pooled standard errors.
const CHAIN_SPREAD_FACTOR: f64 = 5.0;

/// Bail-out for the shrinkage loop; reaching it leaves the chain in place.
const MAX_SHRINK_STEPS: usize = 200;

fn to_prob(measure: Measure, coord: f64) -> f64 {
    match measure {
        Measure::AmplitudeUniform => coord * coord,
        Measure::ProbabilityUniform => coord,
    }
}

fn from_prob(measure: Measure, prob: f64) -> f64 {
    match measure {
        Measure::AmplitudeUniform => prob.sqrt(),
        Measure::ProbabilityUniform => prob,
    }
}

struct HitAndRunChain {
    param: Parameterization,
    measure: Measure,
    rng: ChaCha8Rng,
    coords: Vec<f64>,
    /// Per-axis coordinate upper bounds (axis caps in chain coordinates).
    box_hi: Vec<f64>,
    thinning: usize,
    direction: Vec<f64>,
}

impl HitAndRunChain {
    fn init(spec: &EnsembleSpec, chain_index: u64) -> Result<Self> {
        let param = Parameterization::new(spec.spectrum(), spec.energy()).ok_or({
            EnsembleError::DegeneratePivot {
                value: spec.spectrum().min_level(),
            }
        })?;
        let measure = spec.measure();

        // The canonical distribution at the same energy is strictly interior
        // to the feasible region, which makes it a reliable starting point.
        let canonical = solve_beta(spec.spectrum(), spec.energy())?;
        let free_probs = initial_free_probs(&param, canonical.probs.probs())?;
        let coords: Vec<f64> = free_probs.iter().map(|&p| from_prob(measure, p)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(spec.sampler().seed);
        rng.set_stream(chain_index);

        let box_hi = (0..param.free_count())
            .map(|axis| from_prob(measure, param.axis_cap(axis)))
            .collect();

        let mut chain = Self {
            param,
            measure,
            rng,
            coords,
            box_hi,
            thinning: spec.sampler().thinning,
            direction: vec![0.0; spec.spectrum().len() - 2],
        };
        for _ in 0..spec.sampler().burn_in {
            chain.step();
        }
        Ok(chain)
    }

    fn standard_normal(&mut self) -> f64 {
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn draw_direction(&mut self) {
        loop {
            let mut norm_sq = 0.0;
            for i in 0..self.direction.len() {
                let z = self.standard_normal();
                self.direction[i] = z;
                norm_sq += z * z;
            }
            if norm_sq > 1e-24 {
                let inv = norm_sq.sqrt().recip();
                self.direction.iter_mut().for_each(|d| *d *= inv);
                return;
            }
        }
    }

    fn feasible_at(&self, t: f64) -> bool {
        let probs: Vec<f64> = self
            .coords
            .iter()
            .zip(&self.direction)
            .map(|(&c, &d)| to_prob(self.measure, c + t * d))
            .collect();
        self.coords
            .iter()
            .zip(&self.direction)
            .all(|(&c, &d)| c + t * d >= 0.0)
            && self.param.is_feasible(&probs)
    }

    fn step(&mut self) {
        self.draw_direction();
        // Chord of the bounding box [0, box_hi] along the direction; it
        // contains the entire feasible chord because the caps bound the
        // region. The current point sits inside, so lo <= 0 <= hi.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for ((&c, &d), &ub) in self.coords.iter().zip(&self.direction).zip(&self.box_hi) {
            if d > 0.0 {
                lo = lo.max(-c / d);
                hi = hi.min((ub - c) / d);
            } else if d < 0.0 {
                lo = lo.max((ub - c) / d);
                hi = hi.min(-c / d);
            }
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= 0.0 && hi >= 0.0) {
            return;
        }
        for _ in 0..MAX_SHRINK_STEPS {
            let t = lo + (hi - lo) * self.rng.gen::<f64>();
            if self.feasible_at(t) {
                for (c, &d) in self.coords.iter_mut().zip(&self.direction) {
                    *c = (*c + t * d).max(0.0);
                }
                return;
            }
            if t > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
        }
    }

    fn next_sample(&mut self) -> Vec<f64> {
        for _ in 0..self.thinning {
            self.step();
        }
        let probs: Vec<f64> = self
            .coords
            .iter()
            .map(|&c| to_prob(self.measure, c))
            .collect();
        self.param
            .complete(&probs)
            .expect("chain state is always feasible")
    }
}

/// Free probabilities for the starting point, repaired if the canonical
/// solver's energy residual pushed a pivot fractionally negative.
fn initial_free_probs(param: &Parameterization, canonical: &[f64]) -> Result<Vec<f64>> {
    let free: Vec<f64> = param.free_indices().iter().map(|&i| canonical[i]).collect();
    for gamma in [
        1.0,
        1.0 - 1e-9,
        1.0 + 1e-9,
        1.0 - 1e-6,
        1.0 + 1e-6,
        1.0 - 1e-3,
        0.99,
        0.9,
        0.5,
        0.1,
        0.0,
    ] {
        let scaled: Vec<f64> = free.iter().map(|&p| p * gamma).collect();
        if param.is_feasible(&scaled) {
            return Ok(scaled);
        }
    }
    Err(EnsembleError::InvalidParameter {
        name: "initial point",
        value: f64::NAN,
        reason: "no feasible starting point near the canonical distribution",
    })
}

/// Direct sampler for the fully degenerate case: every level shares one
/// energy, the constraint set is the whole probability simplex, and draws
/// are independent (burn-in and thinning are irrelevant and skipped).
struct SimplexChain {
    rng: ChaCha8Rng,
    n: usize,
    measure: Measure,
}

impl SimplexChain {
    fn init(spec: &EnsembleSpec, chain_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.sampler().seed);
        rng.set_stream(chain_index);
        Self {
            rng,
            n: spec.spectrum().len(),
            measure: spec.measure(),
        }
    }

    fn standard_normal(&mut self) -> f64 {
        // Box-Muller; u1 in (0, 1] avoids log(0).
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn next_sample(&mut self) -> Vec<f64> {
        let weights: Vec<f64> = match self.measure {
            // Uniform on the amplitude sphere octant pushes forward to
            // squared normals, normalized.
            Measure::AmplitudeUniform => (0..self.n)
                .map(|_| {
                    let z = self.standard_normal();
                    z * z
                })
                .collect(),
            // Uniform on the simplex: normalized exponentials.
            Measure::ProbabilityUniform => (0..self.n)
                .map(|_| -(1.0 - self.rng.gen::<f64>()).ln())
                .collect(),
        };
        let sum: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / sum).collect()
    }
}

enum ChainDriver {
    HitAndRun(Box<HitAndRunChain>),
    Simplex(Box<SimplexChain>),
}

impl ChainDriver {
    fn init(spec: &EnsembleSpec, chain_index: u64) -> Result<Self> {
        if spec.spectrum().is_fully_degenerate() {
            Ok(ChainDriver::Simplex(Box::new(SimplexChain::init(
                spec,
                chain_index,
            ))))
        } else {
            Ok(ChainDriver::HitAndRun(Box::new(HitAndRunChain::init(
                spec,
                chain_index,
            )?)))
        }
    }

    fn next_sample(&mut self) -> Vec<f64> {
        match self {
            ChainDriver::HitAndRun(c) => c.next_sample(),
            ChainDriver::Simplex(c) => c.next_sample(),
        }
    }
}

/// A seeded, reproducible stream of occupation vectors from the ensemble.
///
/// Yields `chains × samples` vectors, interleaving the chains round-robin.
/// Every emitted vector satisfies normalization and the energy constraint
/// to [`super::SAMPLE_CONSTRAINT_TOLERANCE`].
pub struct ManifoldSamples {
    chains: Vec<ChainDriver>,
    emitted: usize,
    total: usize,
}

impl Iterator for ManifoldSamples {
    type Item = OccupationVector;

    fn next(&mut self) -> Option<Self::Item> {
        if self.emitted >= self.total {
            return None;
        }
        let chain = self.emitted % self.chains.len();
        self.emitted += 1;
        Some(OccupationVector::new_unchecked(
            self.chains[chain].next_sample(),
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total - self.emitted;
        (left, Some(left))
    }
}

impl ExactSizeIterator for ManifoldSamples {}

/// Open a sample stream over the ensemble. Needs N ≥ 3: with two levels the
/// constraints pin a unique point and there is nothing to sample.
pub fn sample_manifold(spec: &EnsembleSpec) -> Result<ManifoldSamples> {
    if spec.spectrum().len() < 3 {
        return Err(EnsembleError::UnsupportedSize {
            n: spec.spectrum().len(),
            context: "sampling needs at least three levels",
        });
    }
    let settings = spec.sampler();
    let chains = (0..settings.chains as u64)
        .map(|c| ChainDriver::init(spec, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(ManifoldSamples {
        chains,
        emitted: 0,
        total: settings.chains * settings.samples,
    })
}

struct ChainStats {
    mean: Vec<f64>,
    /// `batches[k][m]`: mean of component m over batch k.
    batches: Vec<Vec<f64>>,
}

fn run_chain(spec: &EnsembleSpec, chain_index: u64) -> Result<ChainStats> {
    let mut driver = ChainDriver::init(spec, chain_index)?;
    let n = spec.spectrum().len();
    let samples = spec.sampler().samples;
    let batch_count = BATCHES_PER_CHAIN.min(samples);
    let batch_size = samples / batch_count;

    let mut totals = vec![0.0; n];
    let mut batches = Vec::with_capacity(batch_count);
    let mut batch_sum = vec![0.0; n];
    let mut in_batch = 0usize;
    for _ in 0..samples {
        let v = driver.next_sample();
        for (t, &p) in totals.iter_mut().zip(&v) {
            *t += p;
        }
        if batches.len() < batch_count {
            for (b, &p) in batch_sum.iter_mut().zip(&v) {
                *b += p;
            }
            in_batch += 1;
            if in_batch == batch_size {
                batches.push(batch_sum.iter().map(|b| b / batch_size as f64).collect());
                batch_sum.iter_mut().for_each(|b| *b = 0.0);
                in_batch = 0;
            }
        }
    }
    Ok(ChainStats {
        mean: totals.into_iter().map(|t| t / samples as f64).collect(),
        batches,
    })
}

fn sample_sd(values: &[f64], center: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - center).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn combine(spec: &EnsembleSpec, stats: Vec<ChainStats>) -> Result<EnsembleAverage> {
    let n = spec.spectrum().len();
    let chains = stats.len();

    let mut mean = vec![0.0; n];
    for s in &stats {
        for (m, &c) in mean.iter_mut().zip(&s.mean) {
            *m += c / chains as f64;
        }
    }

    let mut stderr = vec![0.0; n];
    let mut disagreement = false;
    for m in 0..n {
        let batch_means: Vec<f64> = stats
            .iter()
            .flat_map(|s| s.batches.iter().map(move |b| b[m]))
            .collect();
        let center = batch_means.iter().sum::<f64>() / batch_means.len().max(1) as f64;
        let sd = sample_sd(&batch_means, center);
        stderr[m] = sd / (batch_means.len() as f64).sqrt();

        if chains >= 2 && stderr[m] > 0.0 {
            let chain_means: Vec<f64> = stats.iter().map(|s| s.mean[m]).collect();
            let spread = sample_sd(&chain_means, mean[m]);
            if spread > CHAIN_SPREAD_FACTOR * stderr[m] {
                disagreement = true;
            }
        }
    }

    Ok(EnsembleAverage {
        mean_probs: OccupationVector::normalized(mean)?,
        stderr,
        method: AverageMethod::Mcmc,
        chain_disagreement: disagreement,
    })
}

/// Monte Carlo estimate of the ensemble average, chains run in parallel.
///
/// Forces the sampled route regardless of what [`super::microcanonical_average`]
/// would dispatch to, which is how the closed form gets cross-checked. Fully
/// degenerate spectra use the direct simplex sampler; everything else needs
/// N ≥ 3.
pub fn mcmc_average(spec: &EnsembleSpec) -> Result<EnsembleAverage> {
    if !spec.spectrum().is_fully_degenerate() && spec.spectrum().len() < 3 {
        return Err(EnsembleError::UnsupportedSize {
            n: spec.spectrum().len(),
            context: "sampling needs at least three levels",
        });
    }
    let stats = (0..spec.sampler().chains as u64)
        .into_par_iter()
        .map(|c| run_chain(spec, c))
        .collect::<Result<Vec<_>>>()?;
    combine(spec, stats)
}
