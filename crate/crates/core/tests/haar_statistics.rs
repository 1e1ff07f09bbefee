mod common;

use common::ks_distance;
use qkext::analysis::{expressibility_from_fidelities, haar_fidelity_samples};
use qkext::pqc::{haar_fidelity_cdf, haar_unitary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn zero_zero_fidelities(width: usize, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|_| haar_unitary(width, &mut rng).unwrap()[(0, 0)].norm_sqr())
        .collect()
}

#[test]
fn single_qubit_mean_fidelity_is_one_half() {
    let f = zero_zero_fidelities(1, 100_000, 11);
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
}

#[test]
fn two_qubit_fidelity_cdf_matches_analytic_law() {
    let mut f = zero_zero_fidelities(2, 100_000, 12);
    let d = ks_distance(&mut f, |x| haar_fidelity_cdf(2, x).unwrap());
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn mean_fidelity_within_three_standard_errors() {
    for w in 1..=2 {
        let f = zero_zero_fidelities(w, 10_000, 13 + w as u64);
        let n = f.len() as f64;
        let mean = f.iter().sum::<f64>() / n;
        let var = f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let expected = 0.5f64.powi(w as i32);
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "w={w} mean {mean} expected {expected} se {se}"
        );
    }
}

#[test]
fn haar_expressibility_self_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = haar_fidelity_samples(2, 10_000, &mut rng).unwrap();
    let report = expressibility_from_fidelities(&f, 75, 2).unwrap();
    assert!(report.kl < 0.01, "kl {}", report.kl);
}
