//! Goodness of fit of sampled bundles against their exact distribution.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use modsum_core::attacks::{run_attack, AttackKind, AttackMode, AttackParams, AttackSpec};
use modsum_core::field::Field;
use modsum_core::mzsr::{ideal_mzsr, quantum_mzsr};
use modsum_core::quantum::NoiseModel;
use modsum_core::tape::seeded_rng;
use modsum_core::ZeroSumBundle;

const SAMPLES: usize = 100_000;
const SIGNIFICANCE: f64 = 1e-3;

/// p-value of Pearson's test against the uniform law on `cells` outcomes.
fn uniform_p_value(counts: &HashMap<Vec<Vec<u32>>, usize>, cells: usize) -> f64 {
    let expected = SAMPLES as f64 / cells as f64;
    let observed: f64 = counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let missing = (cells - counts.len()) as f64 * expected;
    let chi2 = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - chi2.cdf(observed + missing)
}

fn tally(mut draw: impl FnMut() -> ZeroSumBundle) -> HashMap<Vec<Vec<u32>>, usize> {
    let mut counts = HashMap::new();
    for _ in 0..SAMPLES {
        let b = draw();
        assert!(b.is_zero_sum());
        *counts.entry(b.shares().iter().map(|s| s.values().to_vec()).collect()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn noiseless_quantum_bundles_are_uniform_on_the_zero_sum_set() {
    let f = Field::prime(3).unwrap();
    let mut rng = seeded_rng(17, 0);
    let counts = tally(|| quantum_mzsr(3, &f, 1, &NoiseModel::None, &mut rng).unwrap());
    assert_eq!(counts.len(), 9);
    let p = uniform_p_value(&counts, 9);
    assert!(p > SIGNIFICANCE, "p = {p}");
}

#[test]
fn seeded_ideal_bundles_are_uniform() {
    let f = Field::of_order(4).unwrap();
    let mut rng = seeded_rng(18, 0);
    let counts = tally(|| ideal_mzsr(3, &f, 1, &mut rng).unwrap());
    let p = uniform_p_value(&counts, 16);
    assert!(p > SIGNIFICANCE, "p = {p}");
}

#[test]
fn wilson_intervals_cover_the_exact_value() {
    let spec = AttackSpec::new(AttackKind::HonestSharing, AttackParams::default()).unwrap();
    let exact = run_attack(&spec, AttackMode::Exact).unwrap().exact.unwrap().value;
    let covered = (0..100u64)
        .filter(|&seed| {
            let r = run_attack(&spec, AttackMode::MonteCarlo { trials: 1000, seed }).unwrap();
            r.ci95.0 <= exact && exact <= r.ci95.1
        })
        .count();
    assert!(covered >= 95, "covered {covered}/100");
}
