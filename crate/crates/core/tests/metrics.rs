mod common;

use common::direct_ssim;
use hpnet::metrics::{decode_accuracy, frame_mse, ssim, EvalReport};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..1.0)).collect()
}

#[test]
fn ssim_matches_direct_window_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (h, w) in [(11, 11), (16, 16), (13, 20), (32, 32)] {
        let x = random_frame(&mut rng, h * w);
        let noisy: Vec<f64> = x
            .iter()
            .map(|v| (v + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0))
            .collect();
        let other = random_frame(&mut rng, h * w);
        for y in [&noisy, &other] {
            let got = ssim(&x, y, h, w).unwrap();
            let want = direct_ssim(&x, y, h, w);
            assert!((got - want).abs() < 1e-9, "{h}x{w}: {got} vs {want}");
        }
    }
}

#[test]
fn mse_matches_loop_on_the_255_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = random_frame(&mut rng, 100);
    let b = random_frame(&mut rng, 100);
    let mut sum = 0.0;
    for i in 0..100 {
        sum += (a[i] * 255.0 - b[i] * 255.0).powi(2);
    }
    assert!((frame_mse(&a, &b).unwrap() - sum / 100.0).abs() < 1e-9);
}

#[test]
fn constant_frames_have_unit_ssim_only_when_equal() {
    let flat = vec![0.5; 16 * 16];
    assert!((ssim(&flat, &flat, 16, 16).unwrap() - 1.0).abs() < 1e-12);
    let darker = vec![0.25; 16 * 16];
    assert!(ssim(&flat, &darker, 16, 16).unwrap() < 1.0);
}

#[test]
fn report_averages_frame_by_frame() {
    let seeds = vec![vec![0.0; 121]];
    let target = vec![vec![0.5; 121], vec![1.0; 121]];
    let a = EvalReport::new(&target, &target, &seeds, 11, 11).unwrap();
    let b = EvalReport::new(&[seeds[0].clone(), seeds[0].clone()], &target, &seeds, 11, 11).unwrap();
    let avg = EvalReport::average(&[a.clone(), b.clone()]).unwrap();
    for i in 0..2 {
        assert_eq!(avg.mse[i], (a.mse[i] + b.mse[i]) / 2.0);
    }
    assert_eq!(a.baseline_mse, b.baseline_mse);
    assert!(a.mean_ssim() > a.baseline_mean_ssim());
}

#[test]
fn decoding_is_chance_free_on_separable_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for class in 0..6 {
        for _ in 0..10 {
            features.push(vec![
                class as f64 * 10.0 + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(class);
        }
    }
    assert_eq!(decode_accuracy(&features, &labels, 1).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ssim_axioms(seed in any::<u64>(), h in 11usize..20, w in 11usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_frame(&mut rng, h * w);
        let y = random_frame(&mut rng, h * w);
        prop_assert!((ssim(&x, &x, h, w).unwrap() - 1.0).abs() < 1e-9);
        let (xy, yx) = (ssim(&x, &y, h, w).unwrap(), ssim(&y, &x, h, w).unwrap());
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&xy));
    }

    #[test]
    fn mse_is_symmetric_and_zero_on_identity(seed in any::<u64>(), n in 1usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_frame(&mut rng, n);
        let y = random_frame(&mut rng, n);
        prop_assert_eq!(frame_mse(&x, &x).unwrap(), 0.0);
        prop_assert_eq!(frame_mse(&x, &y).unwrap(), frame_mse(&y, &x).unwrap());
    }
}
