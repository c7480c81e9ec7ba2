use nvscc_core::linalg::{eigh, hermiticity_defect};
use nvscc_core::spin_hamiltonian::{
    build_ground_hamiltonian, build_ground_hamiltonian_cartesian, infer_field, odmr_transitions,
    FieldInferenceOptions, FieldVector, GroundSpinParams,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GroundSpinParams> {
    (
        2.5e9..3.2e9f64,
        20e6..35e6f64,
        -6e6..6e6f64,
        -3e6..3e6f64,
        -3e6..3e6f64,
    )
        .prop_map(|(d, g, q, ap, aq)| GroundSpinParams {
            d_hz: d,
            gamma_e_hz_per_mt: g,
            q_hz: q,
            a_par_hz: ap,
            a_perp_hz: aq,
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hamiltonian_hermitian_with_fixed_trace(p in params(), b in 0.0..20.0f64, theta in 0.0..180.0f64) {
        let h = build_ground_hamiltonian(&p, &FieldVector::new(b, theta).unwrap());
        prop_assert!(hermiticity_defect(&h) < 1e-6);
        // Sz² and Iz² each have trace 2 per 3-dimensional partner block
        let tr: f64 = (0..9).map(|k| h[(k, k)].re).sum();
        prop_assert!((tr - 6.0 * (p.d_hz + p.q_hz)).abs() < 1e-6 * p.d_hz);
    }

    #[test]
    fn spectrum_independent_of_azimuth(p in params(), b in 0.0..10.0f64, theta in 0.0..180.0f64, phi in 0.0..360.0f64) {
        let (t, f) = (theta.to_radians(), phi.to_radians());
        let a = eigh(&build_ground_hamiltonian_cartesian(&p, [b * t.sin(), 0.0, b * t.cos()]));
        let c = eigh(&build_ground_hamiltonian_cartesian(&p, [b * t.sin() * f.cos(), b * t.sin() * f.sin(), b * t.cos()]));
        for (x, y) in a.values.iter().zip(&c.values) {
            prop_assert!((x - y).abs() < 1e-3, "{x} vs {y}");
        }
    }

    #[test]
    fn line_weights_in_range(b in 0.0..6.0f64, theta in 0.0..90.0f64) {
        let lines = odmr_transitions(&GroundSpinParams::default(), &FieldVector::new(b, theta).unwrap());
        prop_assert!(lines.len() >= 2);
        for l in lines.lines() {
            prop_assert!(l.weight >= 0.05 && l.weight <= 1.0 + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn inference_recovers_generating_field(b in 0.2..5.5f64, theta in 5.0..85.0f64) {
        let p = GroundSpinParams::default();
        let est = infer_field(&odmr_transitions(&p, &FieldVector::new(b, theta).unwrap()), &p, &FieldInferenceOptions::default()).unwrap();
        prop_assert!((est.field.b_mt - b).abs() < 0.01 * b, "B {} vs {b}", est.field.b_mt);
        prop_assert!((est.field.theta_deg - theta).abs() < 0.01 * theta, "theta {} vs {theta}", est.field.theta_deg);
        prop_assert!(est.rms_residual_hz < 1e3);
    }
}
