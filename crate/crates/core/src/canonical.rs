//! The canonical (Gibbs) side: Boltzmann weights, partition function,
//! mean energy, inverse-temperature root solving, and free energy.
//!
//! All exponentials are evaluated shift-stably: the smallest `β E_m` is
//! subtracted before exponentiating, so no spectrum spread or β magnitude
//! can overflow the weights.

use serde::Serialize;

use crate::error::{EnsembleError, Result};
use crate::spectrum::{OccupationVector, Spectrum};

/// Energy residual at which [`solve_beta`] declares convergence.
pub const BETA_ENERGY_TOLERANCE: f64 = 1e-10;

/// A solved canonical distribution at fixed inverse temperature.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSolution {
    /// Inverse temperature β (Boltzmann constant absorbed).
    pub beta: f64,
    /// Partition function `Z = Σ exp(-β E_m)`.
    pub z: f64,
    /// Occupation probabilities `exp(-β E_m) / Z`, sorted-level order.
    pub probs: OccupationVector,
    /// Free energy `A = -ln(Z)/β`; undefined (None) exactly at β = 0.
    pub free_energy: Option<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() {
        return Err(EnsembleError::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must be finite",
        });
    }
    Ok(())
}

/// Shifted Boltzmann weights `exp(-(β E_m - min_n β E_n))` and their sum.
fn shifted_weights(spectrum: &Spectrum, beta: f64) -> (Vec<f64>, f64, f64) {
    let shift = spectrum
        .levels()
        .iter()
        .map(|&e| beta * e)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = spectrum
        .levels()
        .iter()
        .map(|&e| (-(beta * e - shift)).exp())
        .collect();
    let sum = weights.iter().sum();
    (weights, shift, sum)
}

/// `ln Z(β)` evaluated shift-stably.
fn ln_partition(spectrum: &Spectrum, beta: f64) -> f64 {
    let (_, shift, sum) = shifted_weights(spectrum, beta);
    sum.ln() - shift
}

/// Gibbs occupation probabilities `p_m ∝ exp(-β E_m)`.
pub fn canonical_probs(spectrum: &Spectrum, beta: f64) -> Result<OccupationVector> {
    check_beta(beta)?;
    let (weights, _, sum) = shifted_weights(spectrum, beta);
    Ok(OccupationVector::new_unchecked(
        weights.into_iter().map(|w| w / sum).collect(),
    ))
}

/// Canonical mean energy `Σ E_m exp(-β E_m) / Z`, strictly decreasing in β
/// for non-degenerate spectra.
pub fn mean_energy(spectrum: &Spectrum, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let (weights, _, sum) = shifted_weights(spectrum, beta);
    Ok(weights
        .iter()
        .zip(spectrum.levels())
        .map(|(w, &e)| w * e)
        .sum::<f64>()
        / sum)
}

/// Free energy `A = -β⁻¹ ln Σ exp(-β E_m)`.
///
/// β = 0 is a singular point (A is undefined there) and is rejected.
pub fn free_energy(spectrum: &Spectrum, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Err(EnsembleError::SingularParameter {
            name: "beta",
            value: beta,
        });
    }
    Ok(-ln_partition(spectrum, beta) / beta)
}

/// Find the inverse temperature whose canonical mean energy equals `energy`.
///
/// The map β ↦ mean energy is strictly decreasing, so an expanding bracket
/// plus bisection always converges. Convergence is declared on the energy
/// residual (≤ [`BETA_ENERGY_TOLERANCE`]), not on β itself. Negative β is
/// produced whenever `energy` exceeds the β = 0 (uniform) mean.
pub fn solve_beta(spectrum: &Spectrum, energy: f64) -> Result<CanonicalSolution> {
    if !energy.is_finite() {
        return Err(EnsembleError::InvalidParameter {
            name: "energy",
            value: energy,
            reason: "must be finite",
        });
    }
    let (lo, hi) = (spectrum.min_level(), spectrum.max_level());
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

    let residual = |beta: f64| mean_energy(spectrum, beta).expect("finite beta") - energy;

    // Initial bracket scaled to the spectrum spread; f is decreasing with
    // f(-inf) = E_max - energy > 0 and f(+inf) = E_min - energy < 0.
    let scale = 1.0 / (hi - lo);
    let mut beta_lo = -scale;
    let mut beta_hi = scale;
    // A zero residual counts as bracketed on either side; treating it as
    // "keep expanding" would run the bracket away whenever the target
    // energy is hit exactly at a probe point.
    for _ in 0..600 {
        if residual(beta_lo) >= 0.0 {
            break;
        }
        beta_hi = beta_lo;
        beta_lo *= 2.0;
    }
    for _ in 0..600 {
        if residual(beta_hi) <= 0.0 {
            break;
        }
        beta_lo = beta_hi;
        beta_hi *= 2.0;
    }

    // The symmetric start makes the first midpoint exactly 0, so an energy
    // equal to the uniform mean solves to β = 0 exactly.
    let mut mid = 0.5 * (beta_lo + beta_hi);
    for _ in 0..200 {
        let r = residual(mid);
        if r.abs() <= BETA_ENERGY_TOLERANCE {
            break;
        }
        if r > 0.0 {
            beta_lo = mid;
        } else {
            beta_hi = mid;
        }
        let next = 0.5 * (beta_lo + beta_hi);
        if next == mid {
            break;
        }
        mid = next;
    }

    let beta = mid;
    let ln_z = ln_partition(spectrum, beta);
    Ok(CanonicalSolution {
        beta,
        z: ln_z.exp(),
        probs: canonical_probs(spectrum, beta)?,
        free_energy: (beta != 0.0).then(|| -ln_z / beta),
    })
}

/// Residual of the identity d(βA)/dβ = ⟨E⟩, checked with a centered finite
/// difference of step `h`. Second-order accurate: O(h²) small when the
/// identity holds.
pub fn thermo_identity_residual(spectrum: &Spectrum, beta: f64, h: f64) -> Result<f64> {
    check_beta(beta)?;
    if h <= 0.0 || !h.is_finite() {
        return Err(EnsembleError::InvalidParameter {
            name: "h",
            value: h,
            reason: "step must be positive and finite",
        });
    }
    let g = |b: f64| -> Result<f64> { Ok(b * free_energy(spectrum, b)?) };
    let derivative = (g(beta + h)? - g(beta - h)?) / (2.0 * h);
    Ok((derivative - mean_energy(spectrum, beta)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spectrum_058() -> Spectrum {
        Spectrum::new(vec![0.0, 5.0, 8.0]).unwrap()
    }

    #[test]
    fn probs_match_worked_values_at_published_beta() {
        let s = spectrum_058();
        let p = canonical_probs(&s, 0.223).unwrap();
        let expected = [0.669, 0.2192, 0.1122];
        for (got, want) in p.probs().iter().zip(expected) {
            assert!((got - want).abs() < 0.003, "got {got}, want {want}");
        }

        let p = canonical_probs(&s, 0.1199).unwrap();
        let expected = [0.5175, 0.2842, 0.1983];
        for (got, want) in p.probs().iter().zip(expected) {
            assert!((got - want).abs() < 0.003, "got {got}, want {want}");
        }
    }

    #[test]
    fn zero_beta_gives_uniform_probs() {
        let s = spectrum_058();
        let p = canonical_probs(&s, 0.0).unwrap();
        for &v in p.probs() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_energy_limits() {
        let s = spectrum_058();
        // β = 0: arithmetic mean of levels.
        assert!((mean_energy(&s, 0.0).unwrap() - 13.0 / 3.0).abs() < 1e-12);
        // Large β: ground state.
        assert!((mean_energy(&s, 1e3).unwrap() - 0.0).abs() < 1e-6);
        // Published value: mean energy at β = 0.223 is ≈ 2.
        assert!((mean_energy(&s, 0.223).unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn solve_beta_reproduces_worked_cases() {
        let s = spectrum_058();

        let sol = solve_beta(&s, 2.0).unwrap();
        // High-precision root is 0.222349…; published rounding is 0.223.
        assert!((sol.beta - 0.223).abs() < 0.002, "beta = {}", sol.beta);
        assert!((sol.beta - 0.222349387903).abs() < 1e-9);
        assert!((mean_energy(&s, sol.beta).unwrap() - 2.0).abs() <= 1e-10);

        let sol = solve_beta(&s, 3.0).unwrap();
        assert!((sol.beta - 0.1199).abs() < 0.002, "beta = {}", sol.beta);
        assert!((sol.beta - 0.12058225264).abs() < 1e-9);
        assert!((mean_energy(&s, sol.beta).unwrap() - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn solve_beta_at_uniform_mean_is_zero() {
        let s = spectrum_058();
        let sol = solve_beta(&s, 13.0 / 3.0).unwrap();
        assert!(sol.beta.abs() < 1e-8, "beta = {}", sol.beta);
        // Energies above the uniform mean need negative β.
        let sol = solve_beta(&s, 6.0).unwrap();
        assert!(sol.beta < 0.0);
        assert!((mean_energy(&s, sol.beta).unwrap() - 6.0).abs() <= 1e-10);
    }

    #[test]
    fn solve_beta_handles_exact_probe_hits() {
        // Bracket-expansion probes land on -2^k / spread; an energy that
        // matches one of them exactly must still converge.
        let s = spectrum_058();
        for beta in [-1.0, -0.5, -0.25, -0.125, 0.125, 0.25, 1.0] {
            let e = mean_energy(&s, beta).unwrap();
            let sol = solve_beta(&s, e).unwrap();
            assert!(
                (sol.beta - beta).abs() < 1e-8,
                "beta {beta}: solved {}",
                sol.beta
            );
        }
    }

    #[test]
    fn solve_beta_rejects_out_of_range_energy() {
        let s = spectrum_058();
        for (energy, bound) in [
            (-1.0, "lower"),
            (0.0, "lower"),
            (8.0, "upper"),
            (9.0, "upper"),
        ] {
            match solve_beta(&s, energy) {
                Err(EnsembleError::InfeasibleEnergy { bound: b, .. }) => assert_eq!(b, bound),
                other => panic!("expected infeasibility for E = {energy}, got {other:?}"),
            }
        }
    }

    #[test]
    fn free_energy_consistent_with_partition_function() {
        let s = spectrum_058();
        let beta = 0.223;
        // Z from its definition, summed directly for this moderate case.
        let z: f64 = s.levels().iter().map(|&e| (-beta * e).exp()).sum();
        let a = free_energy(&s, beta).unwrap();
        assert!((a - (-z.ln() / beta)).abs() < 1e-12);
        // Published probabilities imply Z ≈ 1/0.669 ≈ 1.497.
        assert!((z - 1.497).abs() < 0.002, "Z = {z}");
        assert!((a - (-1.809)).abs() < 0.005, "A = {a}");
    }

    #[test]
    fn free_energy_rejects_zero_beta_and_handles_degenerate_pair() {
        let s = spectrum_058();
        assert!(matches!(
            free_energy(&s, 0.0),
            Err(EnsembleError::SingularParameter { .. })
        ));
        let pair = Spectrum::new(vec![0.0, 0.0]).unwrap();
        for beta in [0.5, -0.5, 3.0] {
            let a = free_energy(&pair, beta).unwrap();
            assert!((a - (-(2.0f64).ln() / beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn thermo_identity_holds_at_published_betas() {
        let s = spectrum_058();
        for beta in [0.223, 0.1199] {
            let r = thermo_identity_residual(&s, beta, 1e-5).unwrap();
            assert!(r < 1e-8, "residual {r} at beta {beta}");
        }
    }

    #[test]
    fn thermo_identity_residual_is_second_order_in_h() {
        let s = spectrum_058();
        let r1 = thermo_identity_residual(&s, 0.223, 1e-3).unwrap();
        let r2 = thermo_identity_residual(&s, 0.223, 5e-4).unwrap();
        let ratio = r1 / r2;
        assert!(
            (2.5..6.0).contains(&ratio),
            "ratio {ratio} (r1={r1}, r2={r2})"
        );
    }

    #[test]
    fn thermo_identity_rejects_nonpositive_step() {
        let s = spectrum_058();
        assert!(thermo_identity_residual(&s, 0.2, 0.0).is_err());
        assert!(thermo_identity_residual(&s, 0.2, -1e-5).is_err());
    }

    #[test]
    fn probs_sum_to_one_for_extreme_betas_and_wide_spectra() {
        let wide = Spectrum::new(vec![0.0, 500.0, 1000.0]).unwrap();
        for beta in [-50.0, -1.0, 0.0, 1.0, 50.0] {
            let p = canonical_probs(&wide, beta).unwrap();
            let sum: f64 = p.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "beta {beta}: sum {sum}");
            assert!(p.probs().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn mean_energy_strictly_decreasing_in_beta() {
        let s = spectrum_058();
        let betas: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        for w in betas.windows(2) {
            let a = mean_energy(&s, w[0]).unwrap();
            let b = mean_energy(&s, w[1]).unwrap();
            assert!(b < a, "not decreasing between {} and {}", w[0], w[1]);
        }
    }

    proptest! {
        /// solve_beta inverts mean_energy on β ∈ [-1, 1].
        #[test]
        fn beta_round_trip(beta in -1.0f64..1.0) {
            let s = spectrum_058();
            let e = mean_energy(&s, beta).unwrap();
            let sol = solve_beta(&s, e).unwrap();
            prop_assert!((sol.beta - beta).abs() < 1e-8, "{} vs {}", sol.beta, beta);
        }

        /// Shifting all levels by a constant leaves the probabilities fixed
        /// and shifts A by exactly that constant.
        #[test]
        fn shift_stability(c in -100.0f64..100.0, beta in 0.05f64..2.0) {
            let s = spectrum_058();
            let shifted =
                Spectrum::new(s.levels().iter().map(|e| e + c).collect()).unwrap();
            let p0 = canonical_probs(&s, beta).unwrap();
            let p1 = canonical_probs(&shifted, beta).unwrap();
            for (a, b) in p0.probs().iter().zip(p1.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let a0 = free_energy(&s, beta).unwrap();
            let a1 = free_energy(&shifted, beta).unwrap();
            prop_assert!((a1 - (a0 + c)).abs() < 1e-9 * (1.0 + a0.abs() + c.abs()));
        }
    }
}
