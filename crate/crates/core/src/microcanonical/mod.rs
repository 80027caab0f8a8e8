//! The microcanonical side: the set of all occupation vectors sharing one
//! total energy, and its average under a chosen measure.
//!
//! Three routes produce the average:
//!
//! - a closed form for three distinct levels ([`analytic_average_3`]),
//! - a deterministic quadrature oracle for N ∈ {3, 4} ([`grid_average_oracle`]),
//! - seeded Metropolis sampling for general N ([`sample_manifold`],
//!   [`microcanonical_average`]).
//!
//! The closed form and the quadrature are independent routes over the same
//! measure, so they cross-check each other and the sampler.

mod oracle;
mod parameterization;
mod sampler;

pub use oracle::grid_average_oracle;
pub use sampler::{mcmc_average, sample_manifold, ManifoldSamples};

pub(crate) use parameterization::Parameterization;

use serde::{Deserialize, Serialize};

use crate::error::{EnsembleError, Result};
use crate::spectrum::{OccupationVector, Spectrum};

/// Constraint tolerance for emitted samples (normalization and energy).
pub const SAMPLE_CONSTRAINT_TOLERANCE: f64 = 1e-10;

/// Measure over the fixed-energy manifold.
///
/// `AmplitudeUniform` is uniform in the free real amplitudes `x_m = √p_m`
/// (the default, matching the three-level closed form); `ProbabilityUniform`
/// is uniform in the free probabilities themselves and is provided for
/// comparison. Neither is invariant under relabeling levels: the free
/// coordinates are pinned to the lowest levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    AmplitudeUniform,
    ProbabilityUniform,
}

/// Settings for the Metropolis sampler.
///
/// `samples` counts retained draws per chain; each retained draw is
/// `thinning` raw steps apart, after `burn_in` discarded steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub seed: u64,
    pub chains: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub thinning: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            seed: 42,
            chains: 4,
            burn_in: 10_000,
            samples: 100_000,
            thinning: 10,
        }
    }
}

/// One microcanonical ensemble: a spectrum, a total energy, a measure, and
/// sampler settings. Construction validates feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleSpecRaw")]
pub struct EnsembleSpec {
    spectrum: Spectrum,
    energy: f64,
    measure: Measure,
    sampler: SamplerSettings,
}

#[derive(Deserialize)]
struct EnsembleSpecRaw {
    spectrum: Spectrum,
    energy: f64,
    #[serde(default)]
    measure: Measure,
    #[serde(default)]
    sampler: SamplerSettings,
}

impl TryFrom<EnsembleSpecRaw> for EnsembleSpec {
    type Error = EnsembleError;

    fn try_from(raw: EnsembleSpecRaw) -> Result<Self> {
        EnsembleSpec::new(raw.spectrum, raw.energy, raw.measure, raw.sampler)
    }
}

impl EnsembleSpec {
    /// Validate and build an ensemble specification.
    ///
    /// The energy must lie strictly inside the spectrum's range. A fully
    /// degenerate spectrum is the one exception: there the ensemble exists
    /// only when the energy equals the common level, and is then the whole
    /// probability simplex.
    pub fn new(
        spectrum: Spectrum,
        energy: f64,
        measure: Measure,
        sampler: SamplerSettings,
    ) -> Result<Self> {
        if !energy.is_finite() {
            return Err(EnsembleError::InvalidParameter {
                name: "energy",
                value: energy,
                reason: "must be finite",
            });
        }
        if sampler.chains == 0 {
            return Err(EnsembleError::InvalidParameter {
                name: "chains",
                value: 0.0,
                reason: "at least one chain is required",
            });
        }
        if sampler.samples == 0 {
            return Err(EnsembleError::InvalidParameter {
                name: "samples",
                value: 0.0,
                reason: "at least one sample is required",
            });
        }
        if sampler.thinning == 0 {
            return Err(EnsembleError::InvalidParameter {
                name: "thinning",
                value: 0.0,
                reason: "stride must be at least 1",
            });
        }
        let (lo, hi) = (spectrum.min_level(), spectrum.max_level());
        if spectrum.is_fully_degenerate() {
            let tol = 1e-12 * lo.abs().max(1.0);
            if (energy - lo).abs() > tol {
                return Err(EnsembleError::InfeasibleEnergy {
                    energy,
                    lo,
                    hi,
                    bound: if energy < lo { "lower" } else { "upper" },
                    value: lo,
                });
            }
        } else {
            if energy <= lo {
                return Err(EnsembleError::InfeasibleEnergy {
                    energy,
                    lo,
                    hi,
                    bound: "lower",
                    value: lo,
                });
            }
            if energy >= hi {
                return Err(EnsembleError::InfeasibleEnergy {
                    energy,
                    lo,
                    hi,
                    bound: "upper",
                    value: hi,
                });
            }
        }
        Ok(Self {
            spectrum,
            energy,
            measure,
            sampler,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn sampler(&self) -> &SamplerSettings {
        &self.sampler
    }
}

/// Bounds on the ground-level probability `p_1` in the three-level case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FeasibleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, p1: f64) -> bool {
        p1 >= self.lo && p1 <= self.hi
    }
}

/// Which route produced an [`EnsembleAverage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMethod {
    Analytic3,
    Grid,
    Mcmc,
}

/// A microcanonical ensemble average with per-component standard errors.
#[derive(Debug, Clone)]
pub struct EnsembleAverage {
    /// Componentwise mean occupations, sorted-level order.
    pub mean_probs: OccupationVector,
    /// Per-component standard error; all zeros for deterministic routes.
    pub stderr: Vec<f64>,
    pub method: AverageMethod,
    /// Set when independent chains disagree beyond five pooled standard
    /// errors on some component. A mixing warning, not a failure.
    pub chain_disagreement: bool,
}

impl EnsembleAverage {
    pub(crate) fn exact(mean_probs: OccupationVector, method: AverageMethod) -> Self {
        let stderr = vec![0.0; mean_probs.len()];
        Self {
            mean_probs,
            stderr,
            method,
            chain_disagreement: false,
        }
    }

    /// Largest per-component standard error.
    pub fn stderr_max(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

fn three_distinct_levels(spec: &EnsembleSpec) -> Result<[f64; 3]> {
    let s = spec.spectrum();
    if s.len() != 3 {
        return Err(EnsembleError::UnsupportedSize {
            n: s.len(),
            context: "the closed-form route needs exactly three levels",
        });
    }
    let l = s.levels();
    if l[0] == l[1] || l[1] == l[2] {
        let value = if l[0] == l[1] { l[0] } else { l[1] };
        return Err(EnsembleError::DegeneratePivot { value });
    }
    Ok([l[0], l[1], l[2]])
}

/// Feasible interval for `p_1` with three distinct levels.
///
/// Intersects the simultaneous conditions that `p_2` and `p_3`, eliminated
/// through normalization and the energy constraint, stay inside (0, 1):
///
/// ```text
/// (E3-E)/(E3-E1) > p1 > (E2-E)/(E3-E1)
/// (E2-E)/(E2-E1) < p1 < (E3-E)/(E2-E1)
/// 0 < p1 < 1
/// ```
pub fn feasible_interval_3(spec: &EnsembleSpec) -> Result<FeasibleInterval> {
    let [e1, e2, e3] = three_distinct_levels(spec)?;
    let energy = spec.energy();
    let lo = ((e2 - energy) / (e3 - e1))
        .max((e2 - energy) / (e2 - e1))
        .max(0.0);
    let hi = ((e3 - energy) / (e3 - e1))
        .min((e3 - energy) / (e2 - e1))
        .min(1.0);
    debug_assert!(lo < hi, "spec validation guarantees a nonempty interval");
    Ok(FeasibleInterval { lo, hi })
}

/// Complete a three-level state from its ground-level probability:
/// `p_2` and `p_3` follow from normalization and the energy constraint.
///
/// Interval endpoints are allowed; there exactly one of `p_2`, `p_3`
/// vanishes. Roundoff-scale negatives (within -1e-12) are clamped to zero.
pub fn complete_state_3(p1: f64, spec: &EnsembleSpec) -> Result<OccupationVector> {
    let [e1, e2, e3] = three_distinct_levels(spec)?;
    let interval = feasible_interval_3(spec)?;
    const EDGE: f64 = 1e-12;
    if !(p1 >= interval.lo - EDGE && p1 <= interval.hi + EDGE) {
        return Err(EnsembleError::OutsideInterval {
            p1,
            lo: interval.lo,
            hi: interval.hi,
        });
    }
    let energy = spec.energy();
    let p2 = (energy - e3) / (e2 - e3) + p1 * (e3 - e1) / (e2 - e3);
    let p3 = 1.0 - p1 - p2;
    let clamp = |v: f64| if (-EDGE..0.0).contains(&v) { 0.0 } else { v };
    OccupationVector::new(vec![clamp(p1), clamp(p2), clamp(p3)])
}

/// Closed-form ensemble average for three distinct levels.
///
/// Under the amplitude-uniform measure the mean ground-level probability is
/// the mean of `x²` with `x` uniform on `(√b, √a)`:
///
/// ```text
/// (1/(√a-√b)) ∫ x² dx  =  (a + b + √(ab)) / 3
/// ```
///
/// with `(b, a)` the feasible interval. The probability-uniform mean is the
/// interval midpoint. The remaining components follow by completing the mean
/// `p_1`, which is valid because the elimination is affine in `p_1`.
pub fn analytic_average_3(spec: &EnsembleSpec) -> Result<EnsembleAverage> {
    let interval = feasible_interval_3(spec)?;
    let (b, a) = (interval.lo, interval.hi);
    let mean_p1 = match spec.measure() {
        Measure::AmplitudeUniform => (a + b + (a * b).sqrt()) / 3.0,
        Measure::ProbabilityUniform => 0.5 * (a + b),
    };
    let mean = complete_state_3(mean_p1, spec)?;
    Ok(EnsembleAverage::exact(mean, AverageMethod::Analytic3))
}

/// Average the ensemble, dispatching on spectrum size:
/// the unique point for N = 2, the closed form for three distinct levels,
/// and Metropolis sampling otherwise.
pub fn microcanonical_average(spec: &EnsembleSpec) -> Result<EnsembleAverage> {
    let s = spec.spectrum();
    if s.is_fully_degenerate() {
        return sampler::mcmc_average(spec);
    }
    if s.len() == 2 {
        let (e1, e2) = (s.levels()[0], s.levels()[1]);
        let p1 = (e2 - spec.energy()) / (e2 - e1);
        let p2 = (spec.energy() - e1) / (e2 - e1);
        let point = OccupationVector::new(vec![p1, p2])?;
        return Ok(EnsembleAverage::exact(point, AverageMethod::Analytic3));
    }
    if s.len() == 3 && s.distinct_count() == 3 {
        return analytic_average_3(spec);
    }
    mcmc_average(spec)
}
