//! Shared fixtures for the criterion benches.

use paraosc_core::{preset, HamiltonianSchedule, PresetParams, ReferenceFrequencies, TimeGrid};

/// A preset with default parameters on `[0, t1]`, its reference frequencies
/// and a grid with step `dt`.
pub fn fixture(name: &str, t1: f64, dt: f64) -> (HamiltonianSchedule, ReferenceFrequencies, TimeGrid) {
    let h = preset(name, &PresetParams::new(), 0.0, t1).expect("known preset");
    let w = ReferenceFrequencies::new(h.default_omegas().expect("preset omegas")).expect("positive omegas");
    let grid = TimeGrid::new(0.0, t1, dt).expect("valid grid");
    (h, w, grid)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_builds() {
        let (h, w, g) = super::fixture("coupled_qp", 1.0, 1e-2);
        assert_eq!(h.n_modes(), 2);
        assert_eq!(w.len(), 2);
        assert_eq!(g.steps(), 100);
    }
}
