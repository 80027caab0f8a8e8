//! Pivot parameterization of the fixed-energy manifold.
//!
//! Normalization and the energy constraint fix two occupation probabilities
//! once the remaining N-2 ("free") ones are chosen. The pivots are the two
//! highest-index levels with distinct energies; the free coordinates are
//! everything else, lowest levels first. At N = 3 this reduces to the
//! closed-form three-level elimination used elsewhere in this crate.

use crate::spectrum::Spectrum;

#[derive(Debug, Clone)]
pub(crate) struct Parameterization {
    levels: Vec<f64>,
    energy: f64,
    /// Sorted-order indices of the free coordinates, ascending.
    free: Vec<usize>,
    pivot_lo: usize,
    pivot_hi: usize,
}

impl Parameterization {
    /// Returns None only for fully degenerate spectra (no distinct pivot pair).
    pub(crate) fn new(spectrum: &Spectrum, energy: f64) -> Option<Self> {
        let levels = spectrum.levels().to_vec();
        let n = levels.len();
        let pivot_hi = n - 1;
        let pivot_lo = (0..pivot_hi)
            .rev()
            .find(|&i| levels[i] < levels[pivot_hi])?;
        let free = (0..n).filter(|&i| i != pivot_lo && i != pivot_hi).collect();
        Some(Self {
            levels,
            energy,
            free,
            pivot_lo,
            pivot_hi,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.levels.len()
    }

    pub(crate) fn free_count(&self) -> usize {
        self.free.len()
    }

    #[cfg(test)]
    pub(crate) fn free_energies(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.levels[i]).collect()
    }

    /// Sorted-order indices of the free coordinates.
    pub(crate) fn free_indices(&self) -> &[usize] {
        &self.free
    }

    /// Pivot probabilities solved from the two constraints; negative values
    /// mean the free probabilities are infeasible.
    pub(crate) fn pivots(&self, free_probs: &[f64]) -> (f64, f64) {
        debug_assert_eq!(free_probs.len(), self.free.len());
        let mut budget = 1.0;
        let mut energy_budget = self.energy;
        for (&p, &i) in free_probs.iter().zip(&self.free) {
            budget -= p;
            energy_budget -= p * self.levels[i];
        }
        let e_lo = self.levels[self.pivot_lo];
        let e_hi = self.levels[self.pivot_hi];
        let denom = e_hi - e_lo;
        let q_lo = (e_hi * budget - energy_budget) / denom;
        let q_hi = (energy_budget - e_lo * budget) / denom;
        (q_lo, q_hi)
    }

    pub(crate) fn is_feasible(&self, free_probs: &[f64]) -> bool {
        if free_probs.iter().any(|&p| p < 0.0) {
            return false;
        }
        let (q_lo, q_hi) = self.pivots(free_probs);
        q_lo >= 0.0 && q_hi >= 0.0
    }

    /// Assemble the full occupation vector, or None if infeasible.
    pub(crate) fn complete(&self, free_probs: &[f64]) -> Option<Vec<f64>> {
        if free_probs.iter().any(|&p| p < 0.0) {
            return None;
        }
        let (q_lo, q_hi) = self.pivots(free_probs);
        if q_lo < 0.0 || q_hi < 0.0 {
            return None;
        }
        let mut full = vec![0.0; self.n()];
        for (&p, &i) in free_probs.iter().zip(&self.free) {
            full[i] = p;
        }
        full[self.pivot_lo] = q_lo;
        full[self.pivot_hi] = q_hi;
        Some(full)
    }

    /// Upper bound on a single free probability over the whole feasible
    /// region (an axis-aligned bounding-box cap). Derived from the upper
    /// pivot staying nonnegative; always ≤ 1.
    pub(crate) fn axis_cap(&self, axis: usize) -> f64 {
        let e_hi = self.levels[self.pivot_hi];
        let e_axis = self.levels[self.free[axis]];
        if e_hi > e_axis {
            ((e_hi - self.energy) / (e_hi - e_axis)).min(1.0)
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_level_pivots_match_closed_form() {
        let s = Spectrum::new(vec![0.0, 5.0, 8.0]).unwrap();
        let p = Parameterization::new(&s, 2.0).unwrap();
        assert_eq!(p.free_count(), 1);
        // p2 = (E-E3)/(E2-E3) + p1 (E3-E1)/(E2-E3), p3 = 1 - p1 - p2.
        let p1 = 0.7;
        let (q2, q3) = p.pivots(&[p1]);
        let expected_p2 = (2.0 - 8.0) / (5.0 - 8.0) + p1 * (8.0 - 0.0) / (5.0 - 8.0);
        assert!((q2 - expected_p2).abs() < 1e-14);
        assert!((q3 - (1.0 - p1 - expected_p2)).abs() < 1e-14);
    }

    #[test]
    fn tied_top_levels_walk_down_to_a_distinct_pivot() {
        let s = Spectrum::new(vec![0.0, 5.0, 8.0, 8.0]).unwrap();
        let p = Parameterization::new(&s, 4.0).unwrap();
        // Pivots are the level at 5 and one level at 8; free = {0, 8}.
        assert_eq!(p.free_energies(), vec![0.0, 8.0]);
        let full = p.complete(&[0.3, 0.1]).unwrap();
        let sum: f64 = full.iter().sum();
        let energy: f64 = full.iter().zip(s.levels()).map(|(p, e)| p * e).sum();
        assert!((sum - 1.0).abs() < 1e-14);
        assert!((energy - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fully_degenerate_has_no_pivots() {
        let s = Spectrum::new(vec![2.0, 2.0, 2.0]).unwrap();
        assert!(Parameterization::new(&s, 2.0).is_none());
    }

    #[test]
    fn infeasible_points_are_rejected() {
        let s = Spectrum::new(vec![0.0, 5.0, 8.0]).unwrap();
        let p = Parameterization::new(&s, 2.0).unwrap();
        // Feasible interval for p1 at E = 2 is (0.6, 0.75).
        assert!(p.is_feasible(&[0.7]));
        assert!(!p.is_feasible(&[0.5]));
        assert!(!p.is_feasible(&[0.8]));
        assert!(!p.is_feasible(&[-0.1]));
        assert!(p.complete(&[0.5]).is_none());
    }

    #[test]
    fn axis_cap_bounds_the_region() {
        let s = Spectrum::new(vec![0.0, 5.0, 8.0]).unwrap();
        let p = Parameterization::new(&s, 2.0).unwrap();
        // (E3 - E)/(E3 - E1) = 6/8.
        assert!((p.axis_cap(0) - 0.75).abs() < 1e-15);
        assert!(!p.is_feasible(&[0.75 + 1e-9]));
    }
}
