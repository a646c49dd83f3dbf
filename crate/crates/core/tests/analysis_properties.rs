use modecoupler::analysis::{classify_regime, extract_features, find_bic, fw_residual, DEFAULT_PROMINENCE};
use modecoupler::model::{eigenvalues, linspace, s21_spectrum};
use modecoupler::sweep::{GapCalibration, SweepSpec};
use modecoupler::{CouplingModel, ModeParams, SpectrumGrid};
use num_complex::Complex64;
use proptest::prelude::*;

fn two(w1: f64, b1: f64, a1: f64, w2: f64, b2: f64, a2: f64, delta: f64) -> CouplingModel {
    CouplingModel::two_mode(
        ModeParams::new(w1, b1).with_alpha(a1),
        ModeParams::new(w2, b2).with_alpha(a2),
        Complex64::new(delta, 0.0),
    )
    .unwrap()
}

/// Detuning w1 - w2 that zeroes the Friedrich-Wintgen residual.
fn fw_detuning(b1: f64, b2: f64, delta: f64) -> f64 {
    delta * (b1 - b2) / (b1 * b2).sqrt()
}

fn min_abs_im(model: &CouplingModel) -> f64 {
    eigenvalues(model)
        .unwrap()
        .iter()
        .map(|l| l.im.abs())
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fw_condition_traps_one_branch(
        b1 in 0.01..0.2f64,
        b2 in 0.01..0.2f64,
        delta in -0.2..0.2f64,
        w2 in 5.0..8.0f64,
    ) {
        let w1 = w2 + fw_detuning(b1, b2, delta);
        let model = two(w1, b1, 0.0, w2, b2, 0.0, delta);
        prop_assert!(fw_residual(&model).unwrap().abs() < 1e-12);
        let ev = eigenvalues(&model).unwrap();
        let (trapped, other) = if ev[0].im.abs() < ev[1].im.abs() { (ev[0], ev[1]) } else { (ev[1], ev[0]) };
        prop_assert!(trapped.im.abs() < 1e-10, "{trapped:?}");
        prop_assert!((other.im + b1 + b2).abs() < 1e-10, "{other:?}");

        // Detuning moves the trapped branch along the real axis to first
        // order; the leak into the channel appears at second order,
        // delta^2 b1 b2 / ((b1 + b2) |lambda_+ - lambda_-|^2).
        let shift = 1e-3;
        let split = (other.re - trapped.re).powi(2) + (other.im - trapped.im).powi(2);
        let predicted = shift * shift * b1 * b2 / ((b1 + b2) * split);
        let leak = min_abs_im(&two(w1 + shift, b1, 0.0, w2, b2, 0.0, delta));
        prop_assert!(leak > 0.5 * predicted && leak < 2.0 * predicted, "{leak} vs {predicted}");
    }

    #[test]
    fn linewidth_sum_is_constant_along_detuning(
        b1 in 0.0..0.2f64, b2 in 0.0..0.2f64,
        a1 in 0.0..0.05f64, a2 in 0.0..0.05f64,
        delta in -0.2..0.2f64,
        w1 in 5.0..8.0f64, w2 in 5.0..8.0f64,
    ) {
        let ev = eigenvalues(&two(w1, b1, a1, w2, b2, a2, delta)).unwrap();
        let sum = ev[0].im + ev[1].im;
        prop_assert!((sum + b1 + b2 + a1 + a2).abs() < 1e-12);
    }

    #[test]
    fn regime_label_ignores_mode_order(
        b1 in 0.0..0.2f64, b2 in 0.0..0.2f64,
        a1 in 0.0..0.05f64, a2 in 0.0..0.05f64,
        delta in -0.2..0.2f64, w in 5.0..8.0f64,
    ) {
        let forward = classify_regime(&two(w, b1, a1, w, b2, a2, delta)).unwrap();
        let swapped = classify_regime(&two(w, b2, a2, w, b1, a1, delta)).unwrap();
        prop_assert_eq!(forward.label, swapped.label);
        prop_assert!((forward.gap_re - swapped.gap_re).abs() < 1e-12);
        prop_assert!((forward.gap_im - swapped.gap_im).abs() < 1e-12);
    }

    #[test]
    fn bic_location_survives_finer_sampling(
        b1 in 0.01..0.1f64, b2 in 0.01..0.1f64,
        delta in -0.15..0.15f64, samples in 5usize..40,
    ) {
        let w2 = 6.65;
        let target = w2 + fw_detuning(b1, b2, delta);
        prop_assume!((5.6..7.6).contains(&target));
        let base = two(5.5, b1, 0.0, w2, b2, 0.0, delta);
        let calibration = GapCalibration::new(0.0, 2.0, 5.5, 7.7).unwrap();
        let spec = |n: usize| SweepSpec {
            base_model: base.clone(),
            varying_mode_index: 0,
            calibration,
            gap_samples: linspace(0.0, 2.0, n),
            freq_grid: vec![6.0],
            preset: None,
        };
        let tol = 1e-12;
        let coarse = find_bic(&spec(samples), tol).unwrap();
        let fine = find_bic(&spec(2 * samples - 1), tol).unwrap();
        prop_assert_eq!(coarse.len(), 1);
        prop_assert_eq!(fine.len(), 1);
        // |residual| <= tol pins the varying frequency to tol / sqrt(b1 b2).
        let slope = (b1 * b2).sqrt();
        let gap_tol = tol / slope / 1.1 + 1e-12;
        let expected_gap = calibration.gap_of_omega(target).unwrap();
        prop_assert!((coarse[0].sweep_value - expected_gap).abs() <= gap_tol);
        prop_assert!((fine[0].sweep_value - expected_gap).abs() <= gap_tol);
        prop_assert!((coarse[0].omega_bic - fine[0].omega_bic).abs() <= 1e-9);
    }
}

#[test]
fn fixed_detuning_leak_can_stay_below_a_micro_ghz() {
    // Case-2 dampings and coupling: a 1 MHz detuning from the trapping
    // condition leaves the trapped branch narrower than 1e-6 GHz.
    let (b1, b2, delta) = (0.0227, 0.0057, 0.12);
    let w2 = 6.65;
    let w1 = w2 + fw_detuning(b1, b2, delta) + 1e-3;
    let leak = min_abs_im(&two(w1, b1, 0.0, w2, b2, 0.0, delta));
    assert!(leak > 0.0 && leak < 1e-6, "{leak}");
}

proptest! {
    #[test]
    fn features_mirror_with_the_spectrum(
        w1 in 6.0..7.0f64, w2 in 6.0..7.0f64,
        b1 in 0.005..0.05f64, b2 in 0.005..0.05f64,
        delta in -0.1..0.1f64,
    ) {
        let model = two(w1, b1, 0.01, w2, b2, 0.005, delta);
        let (lo, hi) = (5.5, 7.5);
        let grid = s21_spectrum(&model, &linspace(lo, hi, 801)).unwrap();
        // f -> lo + hi - f, keeping the frequency axis increasing.
        let freqs: Vec<f64> = grid.freqs().iter().rev().map(|f| lo + hi - f).collect();
        let values: Vec<Complex64> = grid.s21().iter().rev().copied().collect();
        let mirrored = SpectrumGrid::new(freqs, values).unwrap();

        let a = extract_features(&grid, DEFAULT_PROMINENCE);
        let mut b = extract_features(&mirrored, DEFAULT_PROMINENCE);
        b.reverse();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.kind, y.kind);
            prop_assert!((x.freq - (lo + hi - y.freq)).abs() < 1e-9, "{x:?} vs {y:?}");
            prop_assert!((x.magnitude - y.magnitude).abs() < 1e-12);
            prop_assert!((x.prominence - y.prominence).abs() < 1e-12);
            match (x.fwhm, y.fwhm) {
                (Some(p), Some(q)) => prop_assert!((p - q).abs() < 1e-9),
                (None, None) => {}
                other => prop_assert!(false, "fwhm mismatch {other:?}"),
            }
        }
    }
}
