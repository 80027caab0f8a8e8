//! Deterministic quadrature oracle for small spectra.
//!
//! Midpoint-rule sums over the free coordinates on a uniform grid, keeping
//! feasible points only. Independent of the sampler: no randomness, no
//! step-size tuning, just a grid. Supports N ∈ {3, 4} where one- and
//! two-dimensional grids stay cheap.

use crate::error::{EnsembleError, Result};
use crate::spectrum::OccupationVector;

use super::{AverageMethod, EnsembleAverage, EnsembleSpec, Measure, Parameterization};

/// Fewest feasible grid points accepted before the grid is refined.
const MIN_FEASIBLE_POINTS: usize = 10;

/// Resolution doublings attempted when the interval is too tight to hit.
const MAX_REFINEMENTS: u32 = 14;

/// Cap on total grid points per attempt (keeps 2-D refinement bounded).
const MAX_TOTAL_POINTS: u64 = 500_000_000;

struct Accumulator {
    sums: Vec<f64>,
    count: u64,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sums: vec![0.0; n],
            count: 0,
        }
    }

    fn add(&mut self, probs: &[f64]) {
        for (s, p) in self.sums.iter_mut().zip(probs) {
            *s += p;
        }
        self.count += 1;
    }
}

/// Convert a grid coordinate to a free probability under the measure.
fn to_prob(measure: Measure, coord: f64) -> f64 {
    match measure {
        Measure::AmplitudeUniform => coord * coord,
        Measure::ProbabilityUniform => coord,
    }
}

/// Per-axis grid domain: `[0, cap]` in the measure's own coordinate.
fn axis_domain(measure: Measure, param: &Parameterization, axis: usize) -> f64 {
    let cap = param.axis_cap(axis);
    match measure {
        Measure::AmplitudeUniform => cap.sqrt(),
        Measure::ProbabilityUniform => cap,
    }
}

fn run_grid(spec: &EnsembleSpec, param: &Parameterization, resolution: u64) -> Accumulator {
    let n = spec.spectrum().len();
    let measure = spec.measure();
    let mut acc = Accumulator::new(n);
    match param.free_count() {
        1 => {
            let ub = axis_domain(measure, param, 0);
            for i in 0..resolution {
                let coord = (i as f64 + 0.5) / resolution as f64 * ub;
                if let Some(full) = param.complete(&[to_prob(measure, coord)]) {
                    acc.add(&full);
                }
            }
        }
        2 => {
            let ub0 = axis_domain(measure, param, 0);
            let ub1 = axis_domain(measure, param, 1);
            for i in 0..resolution {
                let p0 = to_prob(measure, (i as f64 + 0.5) / resolution as f64 * ub0);
                for j in 0..resolution {
                    let p1 = to_prob(measure, (j as f64 + 0.5) / resolution as f64 * ub1);
                    if let Some(full) = param.complete(&[p0, p1]) {
                        acc.add(&full);
                    }
                }
            }
        }
        _ => unreachable!("grid oracle is gated to N `in` {{3, 4}}"),
    }
    acc
}

/// Average the ensemble by brute-force quadrature over the free coordinates.
///
/// `resolution` is the number of grid points per axis (at least 100). When
/// the feasible region is so tight that fewer than a handful of points land
/// inside, the resolution is doubled deterministically until enough do.
pub fn grid_average_oracle(spec: &EnsembleSpec, resolution: usize) -> Result<EnsembleAverage> {
    let n = spec.spectrum().len();
    if !(n == 3 || n == 4) {
        return Err(EnsembleError::UnsupportedSize {
            n,
            context: "grid oracle supports N in {3, 4}",
        });
    }
    if resolution < 100 {
        return Err(EnsembleError::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "at least 100 grid points per axis are required",
        });
    }
    let param = Parameterization::new(spec.spectrum(), spec.energy()).ok_or({
        EnsembleError::DegeneratePivot {
            value: spec.spectrum().min_level(),
        }
    })?;

    let axes = param.free_count() as u32;
    let mut resolution = resolution as u64;
    for _ in 0..=MAX_REFINEMENTS {
        if resolution.pow(axes) > MAX_TOTAL_POINTS {
            break;
        }
        let acc = run_grid(spec, &param, resolution);
        if (acc.count as usize) >= MIN_FEASIBLE_POINTS {
            let mean: Vec<f64> = acc.sums.iter().map(|s| s / acc.count as f64).collect();
            return Ok(EnsembleAverage::exact(
                OccupationVector::normalized(mean)?,
                AverageMethod::Grid,
            ));
        }
        resolution *= 2;
    }
    Err(EnsembleError::InvalidParameter {
        name: "resolution",
        value: resolution as f64,
        reason: "no feasible grid points found even after refinement",
    })
}
