use std::sync::Arc;

use cphase_core::channel::{
    apply_channel, cascade_channel, optimize_cascade, primitive_channel, scaling_generalized, state_fidelity, u_phase,
    StateVector, TwoQubitDensity,
};
use cphase_core::metrics::{compute_overlap_a, detuning_points};
use cphase_core::pmpdev::{load_efficiency, CavityLoader};
use cphase_core::scattering::single_photon_phase;
use cphase_core::spectral::{build_kgrid, invert_pulse, make_exponential_mode, GateParams, GridSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn state(parts: &[(f64, f64)]) -> StateVector {
    let v = StateVector::from_iterator(parts.iter().map(|&(re, im)| Complex64::new(re, im)));
    v / Complex64::new(v.norm(), 0.0)
}

fn amplitudes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4).prop_filter("nonzero", |v| v.iter().any(|c| c.0.abs() + c.1.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_photon_phase_is_unimodular(k in -50.0..50.0f64, omega in -10.0..10.0f64, gamma in 0.01..10.0f64) {
        prop_assert!((single_photon_phase(k, omega, gamma).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_lies_in_the_unit_disk(gamma in 0.05..5.0f64, delta in -20.0..20.0f64) {
        let a = compute_overlap_a(&GateParams::ratios(gamma, delta).unwrap(), GridSpec::default()).unwrap();
        prop_assert!(a.norm() <= 1.0 + 1e-9, "{}", a);
    }

    #[test]
    fn mirrored_detuning_conjugates_the_overlap(gamma in 0.05..5.0f64, delta in 0.1..20.0f64) {
        let plus = compute_overlap_a(&GateParams::ratios(gamma, delta).unwrap(), GridSpec::default()).unwrap();
        let minus = compute_overlap_a(&GateParams::ratios(gamma, -delta).unwrap(), GridSpec::default()).unwrap();
        prop_assert!((plus - minus.conj()).norm() < 1e-9);
    }

    #[test]
    fn overlap_depends_only_on_ratios(gamma in 0.1..3.0f64, delta in -10.0..10.0f64, scale in 0.2..5.0f64, carrier in -5.0..5.0f64) {
        let base = compute_overlap_a(&GateParams::ratios(gamma, delta).unwrap(), GridSpec::default()).unwrap();
        let scaled = GateParams::new(carrier, gamma * scale, carrier - delta * scale, scale, scale).unwrap();
        let a = compute_overlap_a(&scaled, GridSpec::default()).unwrap();
        prop_assert!((a - base).norm() < 1e-8, "{} vs {}", a, base);
    }

    #[test]
    fn exponential_mode_is_normalized_on_its_grid(gamma in 0.02..5.0f64, delta in -20.0..20.0f64) {
        let p = GateParams::ratios(gamma, delta).unwrap();
        let g = Arc::new(build_kgrid(&p, 256, 40.0).unwrap());
        let psi = make_exponential_mode(p.k0, p.gamma).unwrap().sample(&g).unwrap();
        prop_assert!((psi.norm_sq() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detuning_points_are_ordered(lo in -50.0..0.0f64, width in 0.1..50.0f64, n in 2usize..200) {
        let pts = detuning_points(lo, lo + width, n).unwrap();
        prop_assert_eq!(pts.len(), n);
        prop_assert_eq!(pts[0], lo);
        prop_assert_eq!(pts[n - 1], lo + width);
        prop_assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn primitive_channel_fidelity_is_bounded(eps_sq in 0.0..1.0f64, phi in -3.2..3.2f64, amps in amplitudes()) {
        let ch = primitive_channel(eps_sq, phi).unwrap();
        let psi = state(&amps);
        let f = state_fidelity(&ch, &u_phase(phi), &psi);
        prop_assert!(f >= 1.0 - eps_sq - 1e-12 && f <= 1.0 + 1e-12);
        let out = apply_channel(&ch, &TwoQubitDensity::pure(&psi).unwrap()).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-12);
        prop_assert!((out.expectation(&(u_phase(phi) * psi)) - f).abs() < 1e-12);
    }

    #[test]
    fn cascade_fidelity_decreases_with_depth(eps_sq in 1e-6..0.5f64, n in 1u64..10_000) {
        let a = cascade_channel(eps_sq, 0.1, n).unwrap();
        let b = cascade_channel(eps_sq, 0.1, n + 1).unwrap();
        // deep cascades underflow to zero
        prop_assert!(a <= 1.0 && b >= 0.0 && (b < a || a == 0.0));
    }

    #[test]
    fn optimum_infidelity_scales_as_inverse_cube_root(log_n in 1.0..9.0f64) {
        let n = 10f64.powf(log_n);
        let o = optimize_cascade(n).unwrap();
        prop_assert!((o.infidelity * n.cbrt() - o.c).abs() < 1e-9 * o.c);
        prop_assert!(o.fidelity_exact > 0.0 && o.fidelity_exact < 1.0);
    }

    #[test]
    fn generalized_exponent(m in 0.5..6.0f64, k in 0.5..6.0f64, depth in 1.0..1e6f64) {
        let (e, value) = scaling_generalized(m, k, depth).unwrap();
        prop_assert!((e - (1.0 - k / m)).abs() < 1e-15);
        prop_assert!((value.ln() - e * depth.ln()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn loading_matches_lorentzian_overlap(gamma_cav in 0.5..2.0f64, omega in -2.0..2.0f64) {
        let drive = invert_pulse(&make_exponential_mode(0.0, 1.0).unwrap(), 0.0).unwrap();
        let loader = CavityLoader::new(omega, gamma_cav).unwrap().with_window(30.0 / gamma_cav.min(1.0)).unwrap();
        let eta = load_efficiency(&drive, &loader).unwrap();
        let analytic = gamma_cav / ((0.5 * (1.0 + gamma_cav)).powi(2) + omega * omega);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&eta));
        prop_assert!((eta - analytic).abs() < 1e-3);
    }
}
