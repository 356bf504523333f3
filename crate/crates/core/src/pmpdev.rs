//! Principal-mode projector hardware: a single-mode cavity behind an iris
//! that absorbs the time-reversed principal mode and later re-emits the
//! principal mode.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::FactoredRational;
use crate::scattering::{filon_transform, TwoPhotonAmplitude};
use crate::spectral::{Feature, GridSpec, KGrid, SpectralAmplitude, I};

/// Cavity with an ideal iris: coupled until `t_close`, sealed until `t_open`,
/// coupled again afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityLoader {
    pub omega_cav: f64,
    pub gamma_cav: f64,
    pub t_close: f64,
    pub t_open: f64,
    /// Integration window before `t_close` (and after `t_open` for emission).
    pub window: f64,
    /// Largest RK4 step, also capped at `0.01/rate` for the drive's fastest rate.
    pub max_step: f64,
}

impl CavityLoader {
    /// Iris closing at `t = 0` and reopening immediately; a window of 30 cavity lifetimes.
    pub fn new(omega_cav: f64, gamma_cav: f64) -> Result<Self> {
        let l = Self {
            omega_cav,
            gamma_cav,
            t_close: 0.0,
            t_open: 0.0,
            window: 30.0 / gamma_cav,
            max_step: 0.01 / gamma_cav,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn with_schedule(self, t_close: f64, t_open: f64) -> Result<Self> {
        let l = Self { t_close, t_open, ..self };
        l.validate()?;
        Ok(l)
    }

    pub fn with_window(self, window: f64) -> Result<Self> {
        let l = Self { window, ..self };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_cav > 0.0 && self.gamma_cav.is_finite()) {
            return Err(invalid(format!("cavity decay rate must be positive, got {}", self.gamma_cav)));
        }
        if !self.omega_cav.is_finite() {
            return Err(invalid("cavity resonance must be finite"));
        }
        if !(self.t_close <= self.t_open) {
            return Err(invalid("iris must close before it reopens"));
        }
        if !(self.window > 0.0 && self.max_step > 0.0 && self.max_step < self.window) {
            return Err(invalid("window and step must be positive with step < window"));
        }
        Ok(())
    }
}

/// Real-space representation `ψ(z) = ∫ dk/2π ψ̃(k) e^{ikz}` of a closed form
/// with simple poles: `(coefficient, pole)` pairs for `z < 0` and `z > 0`.
struct RealSpace {
    left: Vec<(Complex64, Complex64)>,
    right: Vec<(Complex64, Complex64)>,
    fastest: f64,
}

impl RealSpace {
    fn new(f: &FactoredRational) -> Result<Self> {
        if f.degree() > -1 {
            return Err(invalid("drive must decay at large wavenumber"));
        }
        let mut rs = Self { left: Vec::new(), right: Vec::new(), fastest: 0.0 };
        for (r, order, res) in f.poles_with_residues() {
            if order != 1 || r.im == 0.0 {
                return Err(invalid("drive must have simple poles off the real axis"));
            }
            rs.fastest = rs.fastest.max(2.0 * r.im.abs());
            // close below for z < 0, above for z > 0
            if r.im < 0.0 {
                rs.left.push((-I * res, r));
            } else {
                rs.right.push((I * res, r));
            }
        }
        Ok(rs)
    }

    /// `ψ(z)` continued from the half-line `side`, so round-off near `z = 0`
    /// cannot switch branches.
    fn eval(&self, z: f64, side: f64) -> Complex64 {
        let terms = if side < 0.0 { &self.left } else { &self.right };
        terms.iter().map(|(c, r)| c * (I * r * z).exp()).sum()
    }
}

/// One RK4 step of `y' = −a y + s(t)` with `s` supplied at `t, t + h/2, t + h`.
fn rk4(y: Complex64, a: f64, h: f64, s: [Complex64; 3]) -> Complex64 {
    let f = |y: Complex64, s: Complex64| -a * y + s;
    let k1 = f(y, s[0]);
    let k2 = f(y + k1 * (0.5 * h), s[1]);
    let k3 = f(y + k2 * (0.5 * h), s[1]);
    let k4 = f(y + k3 * h, s[2]);
    y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0)
}

/// Cavity amplitude at `t_close` in the frame rotating at `Ω_cav`, with
/// pieces split at the drive's discontinuity `t = 0`.
fn load_amplitude(drive: &RealSpace, loader: &CavityLoader, h_max: f64) -> Complex64 {
    let (g, w) = (loader.gamma_cav, loader.omega_cav);
    let start = loader.t_close - loader.window;
    let mut cuts = vec![start];
    if start < 0.0 && 0.0 < loader.t_close {
        cuts.push(0.0);
    }
    cuts.push(loader.t_close);
    let mut c = Complex64::new(0.0, 0.0);
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let steps = ((b - a) / h_max).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        // the drive arriving at time t is ψ(−t); rotate out the cavity carrier
        let side = if 0.5 * (a + b) < 0.0 { 1.0 } else { -1.0 };
        let src = |t: f64| g.sqrt() * drive.eval(-t, side) * (I * (w * t)).exp();
        for j in 0..steps {
            let t = a + h * j as f64;
            c = rk4(c, 0.5 * g, h, [src(t), src(t + 0.5 * h), src(t + h)]);
        }
    }
    c
}

/// Drive mass inside the loading window, by composite Simpson on the drive intensity.
fn window_mass(drive: &RealSpace, loader: &CavityLoader, h_max: f64) -> f64 {
    let start = loader.t_close - loader.window;
    let mut cuts = vec![start];
    if start < 0.0 && 0.0 < loader.t_close {
        cuts.push(0.0);
    }
    cuts.push(loader.t_close);
    let mut total = 0.0;
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let n = 2 * ((b - a) / h_max).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let side = if 0.5 * (a + b) < 0.0 { 1.0 } else { -1.0 };
        let f = |t: f64| drive.eval(-t, side).norm_sqr();
        let mut s = f(a) + f(b);
        for j in 1..n {
            s += f(a + h * j as f64) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        total += s * h / 3.0;
    }
    total
}

/// Probability that the cavity holds the photon when the iris closes, for a
/// normalized closed-form drive incident on it.
pub fn load_efficiency(drive: &SpectralAmplitude, loader: &CavityLoader) -> Result<f64> {
    loader.validate()?;
    let f = drive
        .closed_form()
        .ok_or_else(|| invalid("loading dynamics need a closed-form drive"))?;
    let rs = RealSpace::new(f)?;
    let norm = drive.norm_sq();
    let h = loader.max_step.min(0.01 / rs.fastest.max(loader.gamma_cav));
    let missing = norm - window_mass(&rs, loader, h);
    if missing > 1e-4 * norm {
        return Err(Error::ResolutionInsufficient { what: "drive mass outside the loading window".into(), value: missing / norm, limit: 1e-4 });
    }
    let coarse = load_amplitude(&rs, loader, h).norm_sqr();
    let fine = load_amplitude(&rs, loader, 0.5 * h).norm_sqr();
    if (coarse - fine).abs() > 1e-6 {
        return Err(Error::ResolutionInsufficient { what: "loading efficiency under step halving".into(), value: (coarse - fine).abs(), limit: 1e-6 });
    }
    Ok(fine / norm)
}

/// Wavepacket released when the iris reopens on a fully charged cavity,
/// from the free-decay solution sampled in time and transformed onto a
/// wavenumber grid centred on the cavity resonance.
pub fn emit_mode(loader: &CavityLoader) -> Result<SpectralAmplitude> {
    emit_mode_on(loader, GridSpec::default())
}

pub fn emit_mode_on(loader: &CavityLoader, spec: GridSpec) -> Result<SpectralAmplitude> {
    loader.validate()?;
    let g = loader.gamma_cav;
    // the transform is second order in the sample spacing; a quarter step keeps it below 1e-6
    let steps = (4.0 * loader.window / loader.max_step).ceil() as usize;
    let h = loader.window / steps as f64;
    // rotating-frame amplitude after the iris opens; output field √γ c
    let mut c = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(c * g.sqrt());
    for _ in 0..steps {
        c = rk4(c, 0.5 * g, h, [zero; 3]);
        out.push(c * g.sqrt());
    }
    // emitted at delay τ, the field sits at z = −τ; ascending z reverses the samples
    out.reverse();
    let features = [Feature { offset: 0.0, width: g }];
    let grid = Arc::new(KGrid::from_features(loader.omega_cav, spec.cutoff * g, &features, spec.resolution, spec.order, spec.subdivide)?);
    let values = filon_transform(&grid, loader.omega_cav, &out, -loader.window, h);
    SpectralAmplitude::on_grid(grid, values)
}

/// `|⟨ψ ⊗ ψ|Φ⟩|²`: the probability that projecting onto the principal
/// product mode succeeds.
pub fn pmp_success_probability(phi: &TwoPhotonAmplitude, principal: &SpectralAmplitude) -> Result<f64> {
    let n_phi = phi.norm_sq();
    let n_psi = principal.norm_sq();
    if (n_phi - 1.0).abs() > 1e-3 || (n_psi - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState(format!("inputs must be normalized (‖Φ‖² = {n_phi}, ‖ψ‖² = {n_psi})")));
    }
    Ok(phi.project_product(principal, principal)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_kgrid, inner_product, invert_pulse, make_exponential_mode, GateParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inverted(k0: f64, gamma: f64) -> SpectralAmplitude {
        invert_pulse(&make_exponential_mode(k0, gamma).unwrap(), k0).unwrap()
    }

    /// `|⟨χ_cav|v⟩|²` for an exponential drive `(k0, γ)` and cavity `(Ω, γ_c)`.
    fn lorentzian_overlap(gamma: f64, delta: f64, gamma_c: f64) -> f64 {
        gamma * gamma_c / ((0.5 * (gamma + gamma_c)).powi(2) + delta * delta)
    }

    #[test]
    fn matched_drive_is_fully_absorbed() {
        let eta = load_efficiency(&inverted(0.3, 1.0), &CavityLoader::new(0.3, 1.0).unwrap()).unwrap();
        assert!((eta - 1.0).abs() < 1e-3, "{eta}");
    }

    #[test]
    fn bandwidth_mismatch() {
        let eta = load_efficiency(&inverted(0.0, 1.0), &CavityLoader::new(0.0, 2.0).unwrap().with_window(30.0).unwrap()).unwrap();
        assert!((eta - 8.0 / 9.0).abs() < 0.01);
        assert!((eta - lorentzian_overlap(1.0, 0.0, 2.0)).abs() < 1e-3);
    }

    #[test]
    fn detuned_carrier() {
        let eta = load_efficiency(&inverted(0.0, 1.5), &CavityLoader::new(1.5, 1.5).unwrap()).unwrap();
        assert!((eta - 0.5).abs() < 1e-3, "{eta}");
    }

    #[test]
    fn unmatched_drive_shape_is_partly_absorbed() {
        // the forward (non-inverted) mode arrives with its sharp edge first
        let eta = load_efficiency(&make_exponential_mode(0.0, 1.0).unwrap(), &CavityLoader::new(0.0, 1.0).unwrap().with_schedule(30.0, 30.0).unwrap()).unwrap();
        assert!(eta < 0.5, "{eta}");
        assert!(eta > 0.0);
    }

    #[test]
    fn short_window_is_rejected() {
        let l = CavityLoader::new(0.0, 1.0).unwrap().with_window(3.0).unwrap();
        let r = load_efficiency(&inverted(0.0, 1.0), &l);
        assert!(matches!(r, Err(Error::ResolutionInsufficient { .. })), "{r:?}");
        assert!(CavityLoader::new(0.0, -1.0).is_err());
        assert!(CavityLoader::new(0.0, 1.0).unwrap().with_schedule(1.0, 0.0).is_err());
    }

    #[test]
    fn emitted_mode_is_the_exponential_mode() {
        let l = CavityLoader::new(0.4, 1.3).unwrap();
        let e = emit_mode(&l).unwrap();
        assert!((e.norm_sq() - 1.0).abs() < 1e-6, "{}", e.norm_sq());
        let ov = inner_product(&make_exponential_mode(0.4, 1.3).unwrap(), &e).unwrap();
        assert!(ov.norm_sqr() > 0.999);
        assert!((ov - 1.0).norm() < 1e-4, "{ov}");
    }

    #[test]
    fn emitted_modes_of_different_bandwidth() {
        let (g1, g2) = (1.0, 2.5);
        let a = emit_mode(&CavityLoader::new(0.0, g1).unwrap()).unwrap();
        let b = make_exponential_mode(0.0, g2).unwrap();
        let ov = inner_product(&b, &a).unwrap().norm_sqr();
        assert!((ov - 4.0 * g1 * g2 / (g1 + g2).powi(2)).abs() < 1e-4);
    }

    #[test]
    fn reciprocity_and_analytic_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gamma = 1.0;
        let drive = inverted(0.0, gamma);
        let forward = make_exponential_mode(0.0, gamma).unwrap();
        for _ in 0..6 {
            let gc = rng.gen_range(0.5..2.0);
            let w = rng.gen_range(-2.0..2.0);
            let l = CavityLoader::new(w, gc).unwrap().with_window(30.0 / gc.min(gamma)).unwrap();
            let eta = load_efficiency(&drive, &l).unwrap();
            let emitted = emit_mode(&l).unwrap();
            let recip = inner_product(&forward, &emitted).unwrap().norm_sqr();
            assert!((eta - recip).abs() < 1e-3, "{eta} vs {recip}");
            assert!((eta - lorentzian_overlap(gamma, w, gc)).abs() < 1e-3);
            assert!(eta <= 1.0 && eta >= 0.0);
        }
    }

    #[test]
    fn projection_success_probability() {
        let p = GateParams::ratios(1.0, 5.0).unwrap();
        let g = Arc::new(build_kgrid(&p, 256, 40.0).unwrap());
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let phi = TwoPhotonAmplitude::product_state(&psi, &psi, &g, &g).unwrap();
        assert!((pmp_success_probability(&phi, &psi).unwrap() - 1.0).abs() < 1e-9);

        let s = psi.sample(&g).unwrap();
        let other = make_exponential_mode(0.0, 3.0).unwrap().sample(&g).unwrap();
        let c = inner_product(&s, &other).unwrap();
        let perp = SpectralAmplitude::on_grid(
            g.clone(),
            other.values().unwrap().iter().zip(s.values().unwrap()).map(|(o, a)| o - c * a).collect(),
        )
        .unwrap()
        .normalized()
        .unwrap();
        let orth = TwoPhotonAmplitude::product_state(&psi, &perp, &g, &g).unwrap();
        assert!(pmp_success_probability(&orth, &psi).unwrap() < 1e-20);

        let kernel = crate::scattering::PropagatorKernel::new(p).unwrap();
        let out = crate::scattering::apply_gate(&phi, &kernel, &Default::default()).unwrap();
        let m = crate::metrics::gate_metrics(&p).unwrap();
        let prob = pmp_success_probability(&out, &psi).unwrap();
        assert!((prob - (1.0 - m.err_sq)).abs() < 1e-6, "{prob} vs {}", 1.0 - m.err_sq);
    }
}
