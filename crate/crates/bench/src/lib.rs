//! Shared fixtures for the criterion benches.

use hopkey::{AdversaryRule, Geometry, Metric, ScenarioConfig, SweepSpec};

/// A small collinear grid around the default operating point.
pub fn small_sweep(trials: u64) -> SweepSpec {
    SweepSpec {
        ks: vec![64],
        ns: vec![200, 400],
        d_bes: vec![2.0, 20.0],
        sigmas: vec![8.0],
        trials,
        base_seed: 1,
        rule: AdversaryRule::MlPairwise,
        metric: Metric::PerBitSecret,
        geometry: Geometry::Collinear,
        base: ScenarioConfig::default(),
        budget: u64::MAX,
    }
}
