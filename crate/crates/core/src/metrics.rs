//! Gate observables: the |HV⟩ overlap after linear-evolution removal, the
//! nonlinear phase and error probability derived from it, the linear phase
//! shifts, the output purity, and the weak-excitation and far-detuned
//! closed forms.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scattering::{
    apply_gate, linear_overlap, scatter_two_photon_with, source_grid_for, source_residue, Polarization,
    PropagatorKernel, ScatterMethod, ScatterOptions, TwoPhotonAmplitude,
};
use crate::spectral::{build_kgrid_with, make_exponential_mode, GateParams, GridSpec};

/// How the overlap `A` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OverlapRoute {
    /// `A = 1 + ∫ dK/2π D(K) B(K)` with `B` and `D` from residues.
    #[default]
    Residue,
    /// Build the gate output on the two-photon grid (source by quadrature)
    /// and project it onto the input product.
    Grid,
}

/// Which two-photon state the purity is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PurityStage {
    /// After linear-evolution removal (the full gate).
    #[default]
    PostRemoval,
    /// Directly after scattering.
    PreRemoval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    pub grid: GridSpec,
    pub route: OverlapRoute,
    /// Require `A` to agree with a doubled-resolution grid.
    pub check_convergence: bool,
    pub tolerance: f64,
    pub purity_stage: PurityStage,
    /// Grid for the purity; the two-photon matrix is dense, so this is coarser.
    pub purity_grid: GridSpec,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            route: OverlapRoute::Residue,
            check_convergence: true,
            tolerance: 1e-6,
            purity_stage: PurityStage::PostRemoval,
            purity_grid: GridSpec::with_resolution(128),
        }
    }
}

/// Headline observables of one gate application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    /// `⟨HV|S_L† S_NL|HV⟩`.
    pub a: Complex64,
    /// `ζ = −i(A − 1)`.
    pub zeta: Complex64,
    /// `arg A`.
    pub phi_nl: f64,
    /// `1 − |A|²`.
    pub err_sq: f64,
    pub fidelity: f64,
    /// `Re ζ`, the lowest-order estimate of the phase.
    pub phi_nl_small: f64,
    /// `2 Im ζ`, the lowest-order estimate of the error.
    pub err_sq_small: f64,
    pub phi_h: f64,
    pub phi_v: f64,
    pub err_h: f64,
    pub err_v: f64,
    pub purity: f64,
}

impl GateMetrics {
    fn from_overlap(a: Complex64, linear: [Complex64; 2], purity: f64) -> Self {
        let z = a - 1.0;
        // 1 − |1 + z|² without cancellation
        let err_sq = -(2.0 * z.re + z.norm_sqr());
        let zeta = Complex64::new(z.im, -z.re);
        Self {
            a,
            zeta,
            phi_nl: a.arg(),
            err_sq,
            fidelity: 1.0 - err_sq,
            phi_nl_small: zeta.re,
            err_sq_small: 2.0 * zeta.im,
            phi_h: linear[0].arg(),
            phi_v: linear[1].arg(),
            err_h: 1.0 - linear[0].norm_sqr(),
            err_v: 1.0 - linear[1].norm_sqr(),
            purity,
        }
    }
}

/// One row of a detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub phi_nl: f64,
    pub err_sq: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub phi_h: f64,
    pub err_h: f64,
}

impl From<(f64, &GateMetrics)> for SweepRow {
    fn from((delta, m): (f64, &GateMetrics)) -> Self {
        Self {
            delta,
            phi_nl: m.phi_nl,
            err_sq: m.err_sq,
            fidelity: m.fidelity,
            purity: m.purity,
            phi_h: m.phi_h,
            err_h: m.err_h,
        }
    }
}

fn principal(params: &GateParams) -> Result<crate::spectral::SpectralAmplitude> {
    make_exponential_mode(params.k0, params.gamma)
}

/// `D(K) = iΓ_HΓ_V ∫ dk/2π ψ*(k) ψ*(K−k) / (δ̃^{H*}_k δ̃^{V*}_{K−k})`.
fn overlap_kernel(psi: &crate::rational::FactoredRational, kernel: &PropagatorKernel, k_total: f64) -> Result<Complex64> {
    let conj = psi.conj_on_real_line();
    let h = conj.mul(&kernel.inverse_denominator(Polarization::H).conj_on_real_line());
    let v = conj.mul(&kernel.inverse_denominator(Polarization::V).conj_on_real_line());
    let d = h.mul(&v.reflected(0.5 * k_total)).integrate_real_line()?;
    Ok(kernel.nonlinear_strength() * d)
}

fn overlap_residue(params: &GateParams, spec: GridSpec) -> Result<Complex64> {
    let kernel = PropagatorKernel::new(*params)?;
    let psi = principal(params)?;
    let f = psi.closed_form().unwrap();
    let grid = build_kgrid_with(params, spec)?;
    let kgrid = source_grid_for(&grid, &grid, &kernel, &ScatterOptions::default())?;
    let terms: Vec<Complex64> = kgrid
        .nodes()
        .par_iter()
        .map(|&k| Ok(source_residue(f, f, &kernel, k)? * overlap_kernel(f, &kernel, k)?))
        .collect::<Result<_>>()?;
    let integral: Complex64 = terms.iter().zip(kgrid.weights()).map(|(t, &w)| t * w).sum();
    Ok(1.0 + integral / (2.0 * std::f64::consts::PI))
}

fn gate_output(params: &GateParams, spec: GridSpec, method: ScatterMethod, stage: PurityStage) -> Result<TwoPhotonAmplitude> {
    let kernel = PropagatorKernel::new(*params)?;
    let psi = principal(params)?;
    let grid = Arc::new(build_kgrid_with(params, spec)?);
    let phi = TwoPhotonAmplitude::product_state(&psi, &psi, &grid, &grid)?;
    let opts = ScatterOptions { method, ..ScatterOptions::default() };
    match stage {
        PurityStage::PostRemoval => apply_gate(&phi, &kernel, &opts),
        PurityStage::PreRemoval => scatter_two_photon_with(&phi, &kernel, &opts),
    }
}

fn overlap_grid(params: &GateParams, spec: GridSpec) -> Result<Complex64> {
    let out = gate_output(params, spec, ScatterMethod::Quadrature, PurityStage::PostRemoval)?;
    let psi = principal(params)?;
    out.project_product(&psi, &psi)
}

fn overlap_once(params: &GateParams, spec: GridSpec, route: OverlapRoute) -> Result<Complex64> {
    match route {
        OverlapRoute::Residue => overlap_residue(params, spec),
        OverlapRoute::Grid => overlap_grid(params, spec),
    }
}

/// `A = ⟨HV|S_L† S_NL|HV⟩` for the exponential principal mode, checked
/// against a doubled grid.
pub fn compute_overlap_a(params: &GateParams, grid: GridSpec) -> Result<Complex64> {
    overlap_a_with(params, &MetricsOptions { grid, ..MetricsOptions::default() })
}

pub fn overlap_a_with(params: &GateParams, opts: &MetricsOptions) -> Result<Complex64> {
    let a = overlap_once(params, opts.grid, opts.route)?;
    if opts.check_convergence {
        let fine = overlap_once(params, opts.grid.doubled(), opts.route)?;
        let gap = (fine - a).norm();
        if gap > opts.tolerance {
            return Err(Error::ResolutionInsufficient { what: "overlap A under grid doubling".into(), value: gap, limit: opts.tolerance });
        }
        return Ok(fine);
    }
    Ok(a)
}

/// Purity `tr ρ_H²` of the normalized two-photon output.
pub fn purity(params: &GateParams) -> Result<f64> {
    let opts = MetricsOptions::default();
    purity_with(params, opts.purity_grid, opts.purity_stage)
}

/// Purity from the Schmidt spectrum of the gate output on `spec`, refined by
/// up to two grid doublings until the output norm is within 1e−4 of one.
pub fn purity_with(params: &GateParams, spec: GridSpec, stage: PurityStage) -> Result<f64> {
    let mut spec = spec;
    let mut gap = f64::INFINITY;
    for _ in 0..3 {
        let out = gate_output(params, spec, ScatterMethod::Auto, stage)?;
        gap = (out.norm_sq() - 1.0).abs();
        if gap <= 1e-4 {
            return Ok(out.purity());
        }
        spec = spec.doubled();
    }
    Err(Error::ResolutionInsufficient { what: "two-photon norm for the Schmidt spectrum".into(), value: gap, limit: 1e-4 })
}

pub fn gate_metrics(params: &GateParams) -> Result<GateMetrics> {
    gate_metrics_with(params, &MetricsOptions::default())
}

pub fn gate_metrics_with(params: &GateParams, opts: &MetricsOptions) -> Result<GateMetrics> {
    let kernel = PropagatorKernel::new(*params)?;
    let a = overlap_a_with(params, opts)?;
    let psi = principal(params)?;
    let linear = [
        linear_overlap(&psi, &kernel, Polarization::H)?,
        linear_overlap(&psi, &kernel, Polarization::V)?,
    ];
    let p = purity_with(params, opts.purity_grid, opts.purity_stage)?;
    Ok(GateMetrics::from_overlap(a, linear, p))
}

fn require_symmetric(params: &GateParams) -> Result<()> {
    params.validate()?;
    if !params.symmetric_coupling() {
        return Err(invalid("closed forms need Γ_H = Γ_V"));
    }
    Ok(())
}

/// Weak-excitation closed forms `φ = γΓ²δ/[δ² + Γ²/4]²`, `|ε|² = (Γ/δ)φ`.
/// At `δ = 0` the error is the limit `16γ/Γ`.
pub fn closed_form_weak(params: &GateParams) -> Result<(f64, f64)> {
    require_symmetric(params)?;
    let (g, c, d) = (params.gamma, params.gamma_h, params.delta());
    let den = (d * d + 0.25 * c * c).powi(2);
    let phi = g * c * c * d / den;
    let err = g * c * c * c / den;
    Ok((phi, err))
}

/// Far-detuned closed forms with `r = γ/Γ`:
/// `φ = (γΓ²/δ³)(1 + 5r)/(1 + r)`, `|ε|² = (Γ/δ)(1 + 10r + r²)/(1 + 5r) φ`.
pub fn closed_form_far_detuned(params: &GateParams) -> Result<(f64, f64)> {
    require_symmetric(params)?;
    let (g, c, d) = (params.gamma, params.gamma_h, params.delta());
    if d == 0.0 {
        return Err(invalid("far-detuned forms need δ ≠ 0"));
    }
    let r = params.bandwidth_ratio();
    let phi = g * c * c / d.powi(3) * (1.0 + 5.0 * r) / (1.0 + r);
    let err = (c / d) * (1.0 + 10.0 * r + r * r) / (1.0 + 5.0 * r) * phi;
    Ok((phi, err))
}

/// Evenly spaced detunings `δ_min..=δ_max`.
pub fn detuning_points(delta_min: f64, delta_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(invalid(format!("a sweep needs at least 2 points, got {points}")));
    }
    if !(delta_min.is_finite() && delta_max.is_finite() && delta_min < delta_max) {
        return Err(invalid("sweep range must satisfy δ_min < δ_max"));
    }
    let step = (delta_max - delta_min) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { delta_max } else { delta_min + step * i as f64 })
        .collect())
}

/// Gate metrics at each detuning, in input order.
pub fn sweep_detuning(
    template: &GateParams,
    delta_min: f64,
    delta_max: f64,
    points: usize,
    opts: &MetricsOptions,
) -> Result<Vec<SweepRow>> {
    let deltas = detuning_points(delta_min, delta_max, points)?;
    deltas
        .par_iter()
        .map(|&d| {
            let m = gate_metrics_with(&template.with_delta(d), opts)?;
            Ok(SweepRow::from((d, &m)))
        })
        .collect()
}
