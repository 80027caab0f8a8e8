//! Core domain types: discrete energy spectra, pure states, occupation
//! vectors, and the operations connecting them.
//!
//! All vectors handed to or returned by this crate are aligned with
//! [`Spectrum::levels`], i.e. with the levels sorted ascending. A spectrum
//! remembers the permutation back to the order it was constructed with, so
//! front ends can report results in the caller's original ordering via
//! [`Spectrum::to_user_order`].

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{EnsembleError, Result};

/// Tolerance on the normalization constraint for states and occupation vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Reduced Planck constant in the natural units used throughout (ħ = 1).
pub const DEFAULT_HBAR: f64 = 1.0;

/// An ordered list of real energy levels.
///
/// Stored sorted ascending; duplicates are allowed. Construction requires at
/// least two finite levels.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "Vec<f64>")]
pub struct Spectrum {
    levels: Vec<f64>,
    /// `user_index[i]` is the input position of sorted level `i`.
    user_index: Vec<usize>,
}

impl Spectrum {
    /// Build a spectrum from levels in any order.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(EnsembleError::TooFewLevels {
                min: 2,
                actual: levels.len(),
            });
        }
        if let Some(index) = levels.iter().position(|e| !e.is_finite()) {
            return Err(EnsembleError::NonFiniteLevel { index });
        }
        let mut order: Vec<usize> = (0..levels.len()).collect();
        // Stable sort by value keeps tied levels in input order.
        order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        let sorted = order.iter().map(|&i| levels[i]).collect();
        Ok(Self {
            levels: sorted,
            user_index: order,
        })
    }

    /// Number of levels.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    /// True only for the (rejected) empty case; spectra always have N ≥ 2.
    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Levels sorted ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    pub fn max_level(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Number of distinct energy values.
    pub fn distinct_count(&self) -> usize {
        1 + self.levels.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// True when every level has the same energy.
    pub fn is_fully_degenerate(&self) -> bool {
        self.distinct_count() == 1
    }

    /// Levels in the order the caller supplied them.
    pub fn user_levels(&self) -> Vec<f64> {
        self.to_user_order(&self.levels)
    }

    /// Map a sorted-order vector back to the caller's input order.
    ///
    /// Panics if `values` does not match the spectrum length.
    pub fn to_user_order(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.levels.len(), "length mismatch");
        let mut out = vec![0.0; values.len()];
        for (sorted_pos, &user_pos) in self.user_index.iter().enumerate() {
            out[user_pos] = values[sorted_pos];
        }
        out
    }

    /// Input position of the level at `sorted_index`.
    pub fn user_position(&self, sorted_index: usize) -> usize {
        self.user_index[sorted_index]
    }

    pub(crate) fn check_len(&self, actual: usize) -> Result<()> {
        if actual != self.levels.len() {
            return Err(EnsembleError::DimensionMismatch {
                expected: self.levels.len(),
                actual,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = EnsembleError;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Spectrum::new(levels)
    }
}

impl Serialize for Spectrum {
    /// Serializes as a plain JSON array in the caller's original order.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let user = self.user_levels();
        let mut seq = serializer.serialize_seq(Some(user.len()))?;
        for level in &user {
            seq.serialize_element(level)?;
        }
        seq.end()
    }
}

/// A normalized pure state: complex amplitudes over a spectrum's levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Build a state, rejecting amplitudes whose squared moduli do not sum
    /// to 1 within [`NORMALIZATION_TOLERANCE`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let sum: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EnsembleError::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Build a state, explicitly renormalizing the amplitudes first.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let sum: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(EnsembleError::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        let scale = sum.sqrt().recip();
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a * scale).collect(),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

impl TryFrom<Vec<[f64; 2]>> for PureState {
    type Error = EnsembleError;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        PureState::new(
            pairs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        )
    }
}

impl From<PureState> for Vec<[f64; 2]> {
    fn from(state: PureState) -> Self {
        state.amplitudes.iter().map(|a| [a.re, a.im]).collect()
    }
}

/// A vector of occupation probabilities: nonnegative, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OccupationVector {
    probs: Vec<f64>,
}

impl OccupationVector {
    /// Build an occupation vector, rejecting negative components or a sum
    /// away from 1 beyond [`NORMALIZATION_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &p)| p < 0.0) {
            return Err(EnsembleError::NegativeProbability { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EnsembleError::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(Self { probs })
    }

    /// Build an occupation vector, explicitly renormalizing first.
    pub fn normalized(probs: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &p)| p < 0.0) {
            return Err(EnsembleError::NegativeProbability { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(EnsembleError::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / sum).collect(),
        })
    }

    /// Constructor for values that satisfy the invariants by construction.
    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|&p| p >= 0.0));
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl TryFrom<Vec<f64>> for OccupationVector {
    type Error = EnsembleError;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        OccupationVector::new(probs)
    }
}

impl From<OccupationVector> for Vec<f64> {
    fn from(v: OccupationVector) -> Self {
        v.probs
    }
}

/// Total energy `Σ p_m E_m` of an occupation vector over a spectrum.
pub fn total_energy(p: &OccupationVector, spectrum: &Spectrum) -> Result<f64> {
    spectrum.check_len(p.len())?;
    Ok(p.probs()
        .iter()
        .zip(spectrum.levels())
        .map(|(p, e)| p * e)
        .sum())
}

/// Occupation probabilities `p_m = |a_m|²` of a pure state.
///
/// Phases never contribute, so the result only depends on the moduli.
pub fn occupations(state: &PureState) -> OccupationVector {
    OccupationVector::new_unchecked(state.amplitudes().iter().map(|a| a.norm_sqr()).collect())
}

/// Phase evolution for time `t`: each amplitude picks up `exp(-i E_m t / ħ)`.
///
/// Populations `|a_m|²` are invariant under this map up to roundoff.
pub fn evolve(state: &PureState, spectrum: &Spectrum, t: f64, hbar: f64) -> Result<PureState> {
    spectrum.check_len(state.len())?;
    if !t.is_finite() {
        return Err(EnsembleError::InvalidParameter {
            name: "t",
            value: t,
            reason: "time must be finite",
        });
    }
    if hbar <= 0.0 || !hbar.is_finite() {
        return Err(EnsembleError::InvalidParameter {
            name: "hbar",
            value: hbar,
            reason: "must be positive and finite",
        });
    }
    let amplitudes = state
        .amplitudes()
        .iter()
        .zip(spectrum.levels())
        .map(|(a, &e)| a * Complex64::from_polar(1.0, -e * t / hbar))
        .collect();
    // Moduli are preserved exactly enough that the constructor never trips.
    PureState::new(amplitudes)
}
