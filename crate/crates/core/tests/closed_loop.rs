//! Forward model → fit → inversion round trips across module boundaries.

use qsi_core::angle::wrap_phase;
use qsi_core::bench::{compare, Method, ShotBudget};
use qsi_core::fit::{fit_interferogram, index};
use qsi_core::optics::{fringe_observables, synthesize, FringeSource, InterferometerConfig};
use qsi_core::pipeline::{ideal_calibration, measure, measure_qudit};
use qsi_core::quantum::{pure_fidelity, QubitState, QuditPureState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

#[test]
fn seeded_measurement_within_three_sigma() {
    let cfg = InterferometerConfig {
        rng_seed: 42,
        ..Default::default()
    };
    let state = QubitState::new(FRAC_PI_2, 1.2, 0.9).unwrap();
    let truth = fringe_observables(&state);
    let e = measure(&FringeSource::Qubit(state), &cfg, &ideal_calibration(&cfg)).unwrap().estimate;
    assert!(wrap_phase(e.phase_shift - truth.phase_shift).abs() <= 3.0 * e.phase_std, "{e:?}");
    assert!((e.visibility - truth.visibility).abs() <= 3.0 * e.visibility_std, "{e:?}");
    assert!((e.avg_intensity - truth.avg_intensity).abs() <= 3.0 * e.avg_intensity_std, "{e:?}");
}

#[test]
fn noiseless_synthesis_fits_exactly() {
    let cfg = InterferometerConfig::default().noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let state = QubitState::new(rng.random_range(0.2..PI - 0.2), rng.random_range(-PI..PI), rng.random_range(0.1..1.0)).unwrap();
        let o = fringe_observables(&state);
        let expected = [
            cfg.background,
            cfg.peak_counts * o.avg_intensity / 0.5,
            0.5 / (cfg.envelope_sigma * cfg.envelope_sigma),
            cfg.envelope_center,
            o.visibility,
            cfg.fringe_wavenumber,
            wrap_phase(o.phase_shift + cfg.phase_offset),
        ];
        let img = synthesize(&FringeSource::Qubit(state), &cfg, 0).unwrap();
        let outcome = fit_interferogram(&img);
        let fit = outcome[0].as_ref().unwrap();
        let p = fit.params.to_array();
        for i in 0..7 {
            let err = if i == index::PHASE { wrap_phase(p[i] - expected[i]) } else { p[i] - expected[i] };
            assert!(err.abs() <= 1e-6 * expected[i].abs().max(1.0), "parameter {i}: {} vs {}", p[i], expected[i]);
        }
    }
}

#[test]
fn fidelity_improves_with_shots() {
    let states = [
        QubitState::new(FRAC_PI_2, 0.3, 1.0).unwrap(),
        QubitState::new(1.0, -1.0, 0.7).unwrap(),
    ];
    let cfg = InterferometerConfig::default();
    let mean = |shots: u64, method: Method| {
        let cmp = compare(&states, &ShotBudget::qst(shots).unwrap(), &cfg, 20, 17).unwrap();
        let rows: Vec<f64> = cmp.rows.iter().filter(|r| r.method == method).map(|r| r.fidelity_mean).collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    for method in [Method::Qsi, Method::Qst] {
        let f: Vec<f64> = [1_000, 10_000, 100_000].iter().map(|&n| mean(n, method)).collect();
        assert!(f[0] < f[1] && f[1] < f[2], "{method:?}: {f:?}");
        assert!(f[2] > 0.99, "{method:?}: {f:?}");
    }
}

#[test]
fn noisy_qutrit_pipeline() {
    let cfg = InterferometerConfig {
        rng_seed: 21,
        ..Default::default()
    };
    let calibration = ideal_calibration(&cfg);
    let state = QuditPureState::new(vec![1.2, 2.0], vec![0.4, -1.1]).unwrap();
    let (ests, result) = measure_qudit(&state, &cfg, &calibration).unwrap();
    assert_eq!(ests.len(), 2);
    let f = pure_fidelity(&result.qudit().unwrap().amplitudes(), &state.amplitudes()).unwrap();
    assert!(f > 0.99, "{f}");
}
