use sps_core::lindblad::{rabi_map, truncation_check, ExcitationModel, RabiCurve};
use sps_core::Execution;

#[test]
fn map_is_independent_of_scheduling() {
    let model = ExcitationModel::reference();
    let detunings = [20.0, 32.0, 44.0];
    let amplitudes = [0.0, 800.0, 1600.0, 2400.0];
    let seq = rabi_map(&model, &detunings, &amplitudes, Execution::Sequential).unwrap();
    for exec in [Execution::Parallel { workers: 4 }, Execution::Auto] {
        let par = rabi_map(&model, &detunings, &amplitudes, exec).unwrap();
        assert_eq!(seq.probability, par.probability);
    }
    assert!(seq.failures.is_empty());
}

#[test]
fn phonon_damping_lowers_successive_maxima() {
    let amplitudes: Vec<f64> = (1..=120).map(|k| k as f64 * 60.0).collect();
    let model = ExcitationModel::reference();
    let curve = RabiCurve::compute(&model, 32.0, &amplitudes, Execution::Auto).unwrap();
    let maxima = curve.maxima();
    assert!(maxima.len() >= 2, "{maxima:?}");
    for w in maxima.windows(2) {
        assert!(w[1].1 <= w[0].1, "{maxima:?}");
    }

    // Without phonons the second maximum recovers to well above the damped one.
    let undamped = ExcitationModel { phonon_fs_per_k: 0.0, ..model };
    let free = RabiCurve::compute(&undamped, 32.0, &amplitudes, Execution::Auto).unwrap();
    assert!(free.maxima()[1].1 > maxima[1].1 + 0.05);
}

#[test]
fn two_photon_cutoff_is_converged_at_the_operating_point() {
    let check = truncation_check(&ExcitationModel::reference(), 44.0, 2480.0).unwrap();
    assert!(check.difference() < 1e-3);
    assert_eq!(check.cutoff, 2);
}
