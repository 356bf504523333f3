//! Scattering of one and two photons off the V-system, the linear-evolution
//! removal map, and a real-space oracle for the two-photon propagator.

mod time_domain;
mod two_photon;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rational::FactoredRational;
use crate::spectral::{build_kgrid, invert_pulse, GateParams, SpectralAmplitude, I};

pub(crate) use two_photon::{source_grid_for, source_residue};
pub(crate) use time_domain::transform as filon_transform;
pub use time_domain::{scatter_two_photon_timedomain, TimeDomainOptions};
pub use two_photon::{
    apply_gate, apply_linear_removal_pair, coincidence_suppression, nonlinear_source,
    scatter_two_photon, scatter_two_photon_with, ScatterMethod, ScatterOptions, SourceTerm,
    TwoPhotonAmplitude,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// One-photon phase factor `(k − Ω − iΓ/2)/(k − Ω + iΓ/2)`.
pub fn single_photon_phase(k: f64, omega: f64, gamma: f64) -> Complex64 {
    let z = Complex64::new(k - omega, 0.5 * gamma);
    let num = z.conj() * z.conj();
    num / z.norm_sqr()
}

/// The propagator data for one set of gate parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorKernel {
    params: GateParams,
}

impl PropagatorKernel {
    pub fn new(params: GateParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &GateParams {
        &self.params
    }

    pub fn coupling(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::H => self.params.gamma_h,
            Polarization::V => self.params.gamma_v,
        }
    }

    /// `δ̃_k = k − Ω1 + iΓ/2`.
    pub fn denominator(&self, k: f64, pol: Polarization) -> Complex64 {
        Complex64::new(k - self.params.omega1, 0.5 * self.coupling(pol))
    }

    pub fn phase(&self, k: f64, pol: Polarization) -> Complex64 {
        single_photon_phase(k, self.params.omega1, self.coupling(pol))
    }

    /// Pole of `1/δ̃_k`.
    pub(crate) fn pole(&self, pol: Polarization) -> Complex64 {
        Complex64::new(self.params.omega1, -0.5 * self.coupling(pol))
    }

    pub(crate) fn phase_factor(&self, pol: Polarization) -> FactoredRational {
        let p = self.pole(pol);
        FactoredRational::constant(Complex64::new(1.0, 0.0))
            .with_factor(p.conj(), 1)
            .with_factor(p, -1)
    }

    pub(crate) fn inverse_denominator(&self, pol: Polarization) -> FactoredRational {
        FactoredRational::simple_pole(Complex64::new(1.0, 0.0), self.pole(pol))
    }

    /// `iΓ_HΓ_V`, the prefactor of the nonlinear term.
    pub(crate) fn nonlinear_strength(&self) -> Complex64 {
        I * (self.params.gamma_h * self.params.gamma_v)
    }
}

/// Scatters one photon: multiplies every spectral component by the phase factor.
pub fn apply_single_scattering(
    psi: &SpectralAmplitude,
    kernel: &PropagatorKernel,
    pol: Polarization,
) -> Result<SpectralAmplitude> {
    psi.multiplied(&kernel.phase_factor(pol))
}

/// Undoes linear scattering on one photon: multiplies by the conjugate phase factor.
pub fn apply_linear_removal(
    psi: &SpectralAmplitude,
    kernel: &PropagatorKernel,
    pol: Polarization,
) -> Result<SpectralAmplitude> {
    psi.multiplied(&kernel.phase_factor(pol).conj_on_real_line())
}

/// Largest pointwise gap between pulse inversion conjugating scattering off
/// the mirrored resonance Ω2 = 2k0 − Ω1 and the direct removal map at Ω1,
/// over both polarizations.
pub fn verify_time_reversal(psi: &SpectralAmplitude, params: &GateParams) -> Result<f64> {
    let k0 = params.k0;
    let mirrored = PropagatorKernel::new(GateParams { omega1: params.omega2(), ..*params })?;
    let direct = PropagatorKernel::new(*params)?;
    let probe: Vec<f64> = match psi.grid() {
        Some(g) => g.nodes().to_vec(),
        None => build_kgrid(params, 128, 40.0)?.nodes().to_vec(),
    };
    let mut worst: f64 = 0.0;
    for pol in [Polarization::H, Polarization::V] {
        let lhs = invert_pulse(
            &apply_single_scattering(&invert_pulse(psi, k0)?, &mirrored, pol)?,
            k0,
        )?;
        let rhs = apply_linear_removal(psi, &direct, pol)?;
        let err = match (lhs.values(), rhs.values()) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max),
            _ => probe.iter().map(|&k| (lhs.eval(k) - rhs.eval(k)).norm()).fold(0.0, f64::max),
        };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `⟨ψ|S_L ψ⟩` for one polarization.
pub fn linear_overlap(
    psi: &SpectralAmplitude,
    kernel: &PropagatorKernel,
    pol: Polarization,
) -> Result<Complex64> {
    crate::spectral::inner_product(psi, &apply_single_scattering(psi, kernel, pol)?)
}

pub(crate) fn require_normalized(norm_sq: f64, tol: f64, what: &str) -> Result<()> {
    if (norm_sq - 1.0).abs() > tol {
        return Err(invalid(format!("{what} is not normalized (norm² = {norm_sq})")));
    }
    Ok(())
}

pub(crate) fn shared_grid(a: &Arc<crate::spectral::KGrid>, b: &Arc<crate::spectral::KGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.same_as(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{inner_product, make_exponential_mode, KGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kernel(gamma: f64, delta: f64, coupling: f64) -> PropagatorKernel {
        PropagatorKernel::new(GateParams::symmetric(gamma, delta, coupling).unwrap()).unwrap()
    }

    fn grid_for(p: &GateParams) -> Arc<KGrid> {
        Arc::new(build_kgrid(p, 256, 40.0).unwrap())
    }

    #[test]
    fn phase_on_resonance_and_half_width() {
        assert_eq!(single_photon_phase(0.7, 0.7, 1.3), c(-1.0, 0.0));
        let v = single_photon_phase(0.5, 0.0, 1.0);
        assert!((v - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn phase_has_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let k: f64 = rng.gen_range(-1e3..1e3);
            let g: f64 = rng.gen_range(1e-3..10.0);
            let v = single_photon_phase(k, 0.3, g);
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
        assert!((single_photon_phase(1e9, 0.0, 1.0) - c(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn decoupled_atom_leaves_mode_unchanged() {
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let k = kernel(1.0, 0.0, 1e-9);
        let out = apply_single_scattering(&psi, &k, Polarization::H).unwrap();
        // ‖(S−1)ψ‖² = 4Γ/(γ+Γ)
        let d = 2.0 - 2.0 * inner_product(&psi, &out).unwrap().re;
        assert!((d - 4e-9 / (1.0 + 1e-9)).abs() < 1e-15, "{d}");
    }

    #[test]
    fn far_detuned_mode_barely_scatters() {
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let k = kernel(1.0, 50.0, 1.0);
        let ov = linear_overlap(&psi, &k, Polarization::H).unwrap();
        let g = grid_for(k.params());
        let s = psi.sample(&g).unwrap();
        let q: Complex64 = g.integrate(|kk| s.eval(kk).conj() * k.phase(kk, Polarization::H) * s.eval(kk));
        assert!((ov - q).norm() < 1e-6);
        assert!(ov.norm_sqr() > 0.999);
    }

    #[test]
    fn narrowband_resonant_mode_flips_sign() {
        let psi = make_exponential_mode(0.0, 0.01).unwrap();
        let k = kernel(0.01, 0.0, 1.0);
        let ov = linear_overlap(&psi, &k, Polarization::V).unwrap();
        // exact: (Γ − γ)/(Γ + γ) with a sign flip
        assert!((ov - c(-0.99 / 1.01, 0.0)).norm() < 1e-12, "{ov}");
    }

    #[test]
    fn removal_inverts_scattering() {
        let p = GateParams::symmetric(1.0, 2.5, 1.0).unwrap();
        let k = PropagatorKernel::new(p).unwrap();
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let back = apply_linear_removal(&apply_single_scattering(&psi, &k, Polarization::H).unwrap(), &k, Polarization::H).unwrap();
        assert_eq!(back.closed_form().unwrap().factors.len(), 1);
        for kk in [-10.0, -1.0, 0.0, 2.5, 40.0] {
            assert!((back.eval(kk) - psi.eval(kk)).norm() < 1e-15);
        }
        let g = grid_for(&p);
        let s = psi.sample(&g).unwrap();
        let back = apply_linear_removal(&apply_single_scattering(&s, &k, Polarization::V).unwrap(), &k, Polarization::V).unwrap();
        let d: f64 = back.values().unwrap().iter().zip(s.values().unwrap()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-14);
        assert!((back.norm_sq() - s.norm_sq()).abs() < 1e-14);
    }

    #[test]
    fn time_reversal_identity_closed_forms() {
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let e = verify_time_reversal(&psi, &GateParams::symmetric(1.0, 5.0, 1.0).unwrap()).unwrap();
        assert!(e < 1e-9, "{e}");
        let e0 = verify_time_reversal(&psi, &GateParams::symmetric(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(e0 < 1e-12, "{e0}");
    }

    #[test]
    fn time_reversal_identity_random_grid_function() {
        let p = GateParams::new(0.3, 1.0, -2.0, 1.0, 0.4).unwrap();
        let g = grid_for(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<Complex64> = (0..g.len()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi = SpectralAmplitude::on_grid(g, v).unwrap();
        let e = verify_time_reversal(&psi, &p).unwrap();
        assert!(e < 1e-9, "{e}");
    }
}
