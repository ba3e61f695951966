use cavfb::qubit::{min_fidelity, numeric_two_mode_check, optimal_n, QubitSpec};
use cavfb::FockDim;

#[test]
fn worst_input_is_equal_weight() {
    let d = FockDim::new(14).unwrap();
    for (n, m, eta, gt) in [(0, 1, 0.3, 0.2), (1, 2, 0.75, 0.05), (2, 5, 0.9, 0.4), (3, 4, 1.0, 1.0)] {
        let spec = QubitSpec::new(n, m).unwrap();
        let (f, a2) = numeric_two_mode_check(spec, eta, gt, d).unwrap();
        assert!((a2 - 0.5).abs() < 1e-12, "({n},{m}): |alpha|^2 = {a2}");
        assert!((f - min_fidelity(spec, eta, gt).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn fidelities_are_probabilities() {
    for n in 0..6 {
        for m in (n + 1)..8 {
            let spec = QubitSpec::new(n, m).unwrap();
            for eta in [0.0, 0.4, 0.9, 1.0] {
                for gt in [0.0, 0.1, 1.0, 10.0] {
                    let f = min_fidelity(spec, eta, gt).unwrap();
                    assert!((0.0..=1.0).contains(&f));
                }
            }
        }
    }
}

#[test]
fn optimal_n_jumps_at_threshold() {
    let star = 2.0 * (2f64.sqrt() - 1.0);
    assert_eq!(optimal_n(star - 1e-10).unwrap(), 0);
    assert_eq!(optimal_n(star + 1e-10).unwrap(), 1);
}
