use nalgebra::DMatrix;
use qkext::kernel::{apply_shot_noise, KernelMatrix, KernelMeta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact(values: DMatrix<f64>) -> KernelMatrix {
    let meta = KernelMeta {
        circuit_id: "test".into(),
        width: 1,
        layers: 1,
        shots: 0,
        seed: None,
    };
    KernelMatrix::new(values, meta).unwrap()
}

#[test]
fn estimator_moments_match_binomial() {
    let k = exact(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| apply_shot_noise(&k, 256, &mut rng).unwrap().values()[(1, 0)])
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    let expected = 0.25 / 256.0;
    // sample variance of 1e4 draws has relative sd about sqrt(2/1e4)
    assert!(
        (var / expected - 1.0).abs() < 0.06,
        "var {var} expected {expected}"
    );
}

#[test]
fn many_shots_stay_close_to_exact() {
    let n = 50;
    let values = DMatrix::from_fn(n, n, |l, m| if l == m { 1.0 } else { 0.5 });
    let k = exact(values);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let noisy = apply_shot_noise(&k, 1 << 20, &mut rng).unwrap();
    let dev = (noisy.values() - k.values()).abs().max();
    assert!(dev < 0.005, "max deviation {dev}");
}
