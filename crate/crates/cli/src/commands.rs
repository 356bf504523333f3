use std::sync::Arc;

use cphase_core::channel::{
    cascade_field, min_gate_fidelity, optimize_cascade, primitive_channel, u_phase, CascadeOptions, CascadeTrace, Pmp,
    SearchBudget,
};
use cphase_core::metrics::{
    closed_form_far_detuned, closed_form_weak, compute_overlap_a, gate_metrics_with, purity_with, sweep_detuning,
    MetricsOptions, PurityStage,
};
use cphase_core::pmpdev::{emit_mode, load_efficiency, pmp_success_probability, CavityLoader};
use cphase_core::scattering::{
    apply_gate, scatter_two_photon, scatter_two_photon_timedomain, verify_time_reversal, PropagatorKernel,
    TimeDomainOptions, TwoPhotonAmplitude,
};
use cphase_core::spectral::{build_kgrid, inner_product, invert_pulse, make_exponential_mode, GateParams};
use cphase_core::{Error, Result};
use serde::Serialize;

use crate::args::{Common, PmpChoice, Stage};

#[derive(Debug, Serialize)]
pub struct MetricsRow {
    pub delta: f64,
    pub a_re: f64,
    pub a_im: f64,
    pub phi_nl: f64,
    pub err_sq: f64,
    pub fidelity: f64,
    pub phi_nl_small: f64,
    pub err_sq_small: f64,
    pub phi_h: f64,
    pub phi_v: f64,
    pub err_h: f64,
    pub err_v: f64,
    pub purity: f64,
}

#[derive(Debug, Serialize)]
pub struct PurityRow {
    pub delta: f64,
    pub stage: Stage,
    pub purity: f64,
}

#[derive(Debug, Serialize)]
pub struct CascadeRow {
    pub pmp: String,
    pub n: usize,
    pub fidelity: f64,
    pub infidelity: f64,
    pub success_prob: f64,
    pub norm_sq: f64,
    /// Growth exponent of `1 − F_n` fitted over the whole trace.
    pub fit_exponent: f64,
    pub fit_prefactor: f64,
    pub fit_rms_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct OptimizeRow {
    pub n: f64,
    pub r_opt: f64,
    pub delta_opt: f64,
    pub c: f64,
    pub infidelity: f64,
    pub fidelity_exact: f64,
}

#[derive(Debug, Serialize)]
pub struct LoadRow {
    pub gamma_cav_ratio: f64,
    pub cavity_detuning: f64,
    pub efficiency: f64,
    pub analytic: f64,
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

fn metrics_options(common: &Common) -> Result<MetricsOptions> {
    if !(common.tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", common.tolerance)));
    }
    Ok(MetricsOptions { grid: common.grid()?, tolerance: common.tolerance, ..MetricsOptions::default() })
}

pub fn sweep(common: &Common, delta_min: f64, delta_max: f64, points: usize) -> Result<Vec<cphase_core::metrics::SweepRow>> {
    let template = common.params(0.0)?;
    sweep_detuning(&template, delta_min * common.coupling, delta_max * common.coupling, points, &metrics_options(common)?)
        .map(|rows| {
            rows.into_iter()
                .map(|mut r| {
                    r.delta /= common.coupling;
                    r
                })
                .collect()
        })
}

pub fn metrics(common: &Common, delta: f64) -> Result<Vec<MetricsRow>> {
    let m = gate_metrics_with(&common.params(delta)?, &metrics_options(common)?)?;
    Ok(vec![MetricsRow {
        delta,
        a_re: m.a.re,
        a_im: m.a.im,
        phi_nl: m.phi_nl,
        err_sq: m.err_sq,
        fidelity: m.fidelity,
        phi_nl_small: m.phi_nl_small,
        err_sq_small: m.err_sq_small,
        phi_h: m.phi_h,
        phi_v: m.phi_v,
        err_h: m.err_h,
        err_v: m.err_v,
        purity: m.purity,
    }])
}

pub fn purity(common: &Common, delta: f64, stage: Stage) -> Result<Vec<PurityRow>> {
    let s = match stage {
        Stage::Post => PurityStage::PostRemoval,
        Stage::Pre => PurityStage::PreRemoval,
    };
    let value = purity_with(&common.params(delta)?, MetricsOptions::default().purity_grid, s)?;
    Ok(vec![PurityRow { delta, stage, purity: value }])
}

pub fn cascade(common: &Common, delta: f64, steps: usize, pmp: PmpChoice) -> Result<(Vec<CascadeRow>, Vec<CascadeTrace>)> {
    if steps < 2 {
        return Err(Error::InvalidParameter("a cascade fit needs at least 2 steps".into()));
    }
    let modes: &[Pmp] = match pmp {
        PmpChoice::On => &[Pmp::On],
        PmpChoice::Off => &[Pmp::Off],
        PmpChoice::Both => &[Pmp::On, Pmp::Off],
    };
    let params = common.params(delta)?;
    let opts = CascadeOptions { grid: common.grid()?, ..CascadeOptions::default() };
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &mode in modes {
        let trace = cascade_field(&params, steps, mode, &opts)?;
        let fit = trace.infidelity_fit(1, steps)?;
        rows.extend(trace.steps.iter().map(|s| CascadeRow {
            pmp: mode.to_string(),
            n: s.n,
            fidelity: s.fidelity,
            infidelity: 1.0 - s.fidelity,
            success_prob: s.success_prob,
            norm_sq: s.norm_sq,
            fit_exponent: fit.exponent,
            fit_prefactor: fit.prefactor,
            fit_rms_residual: fit.rms_residual,
        }));
        traces.push(trace);
    }
    Ok((rows, traces))
}

pub fn optimize(ns: &[f64]) -> Result<Vec<OptimizeRow>> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("at least one cascade depth is required".into()));
    }
    ns.iter()
        .map(|&n| {
            let o = optimize_cascade(n)?;
            Ok(OptimizeRow {
                n,
                r_opt: o.r_opt,
                delta_opt: o.delta_opt,
                c: o.c,
                infidelity: o.infidelity,
                fidelity_exact: o.fidelity_exact,
            })
        })
        .collect()
}

pub fn pmp_load(common: &Common, ratio_min: f64, ratio_max: f64, points: usize, detuning: f64) -> Result<Vec<LoadRow>> {
    if points < 2 || !(ratio_min > 0.0 && ratio_min < ratio_max && ratio_max.is_finite()) || !detuning.is_finite() {
        return Err(Error::InvalidParameter("need 0 < ratio-min < ratio-max, finite detuning and at least 2 points".into()));
    }
    let gamma = common.gamma * common.coupling;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse bandwidth must be positive, got {gamma}")));
    }
    let drive = invert_pulse(&make_exponential_mode(0.0, gamma)?, 0.0)?;
    let step = (ratio_max / ratio_min).ln() / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let ratio = if i + 1 == points { ratio_max } else { ratio_min * (step * i as f64).exp() };
            let gc = ratio * gamma;
            let w = detuning * gamma;
            let loader = CavityLoader::new(w, gc)?.with_window(30.0 / gc.min(gamma))?;
            Ok(LoadRow {
                gamma_cav_ratio: ratio,
                cavity_detuning: detuning,
                efficiency: load_efficiency(&drive, &loader)?,
                analytic: gamma * gc / ((0.5 * (gamma + gc)).powi(2) + w * w),
            })
        })
        .collect()
}

fn check(name: &'static str, value: Result<f64>, limit: f64) -> CheckRow {
    let value = value.unwrap_or(f64::INFINITY);
    CheckRow { check: name, value, limit, passed: value <= limit }
}

fn relative(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn ratios(gamma: f64, delta: f64) -> Result<GateParams> {
    GateParams::ratios(gamma, delta)
}

/// The invariant suite behind `verify`. Values are deviations; a check
/// passes when its value does not exceed its limit.
pub fn verify(seed: u64) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    rows.push(check(
        "resonant overlap equals 1/4",
        ratios(1.0, 0.0).and_then(|p| compute_overlap_a(&p, Default::default())).map(|a| (a - 0.25).norm()),
        1e-6,
    ));
    rows.push(check(
        "nonlinear phase odd in detuning",
        (|| {
            let plus = compute_overlap_a(&ratios(1.0, 2.0)?, Default::default())?;
            let minus = compute_overlap_a(&ratios(1.0, -2.0)?, Default::default())?;
            Ok((plus - minus.conj()).norm())
        })(),
        1e-9,
    ));
    rows.push(check(
        "weak-excitation phase at γ/Γ = 0.001, δ/Γ = 5",
        (|| {
            let p = ratios(1e-3, 5.0)?;
            let a = compute_overlap_a(&p, Default::default())?;
            Ok(relative(a.arg(), closed_form_weak(&p)?.0))
        })(),
        0.02,
    ));
    rows.push(check(
        "far-detuned phase at γ = Γ, δ/Γ = 30",
        (|| {
            let p = ratios(1.0, 30.0)?;
            let a = compute_overlap_a(&p, Default::default())?;
            Ok(relative(a.arg(), closed_form_far_detuned(&p)?.0))
        })(),
        0.05,
    ));
    rows.push(check(
        "time-reversal identity",
        ratios(1.0, 2.0).and_then(|p| verify_time_reversal(&make_exponential_mode(0.0, 1.0)?, &p)),
        1e-9,
    ));
    rows.push(check(
        "time-domain oracle at δ/Γ = 1",
        (|| {
            let p = ratios(1.0, 1.0)?;
            let g = Arc::new(build_kgrid(&p, 128, 40.0)?);
            let psi = make_exponential_mode(0.0, 1.0)?;
            let td = scatter_two_photon_timedomain(&psi, &psi, &p, &g, &g, &TimeDomainOptions::default())?;
            let phi = TwoPhotonAmplitude::product_state(&psi, &psi, &g, &g)?;
            td.distance(&scatter_two_photon(&phi, &PropagatorKernel::new(p)?)?)
        })(),
        1e-3,
    ));
    rows.push(check(
        "purity unchanged by linear removal",
        (|| {
            let p = ratios(1.0, 2.0)?;
            let spec = MetricsOptions::default().purity_grid;
            Ok((purity_with(&p, spec, PurityStage::PostRemoval)? - purity_with(&p, spec, PurityStage::PreRemoval)?).abs())
        })(),
        1e-8,
    ));
    rows.push(check(
        "primitive channel worst-case fidelity",
        (|| {
            let ch = primitive_channel(0.01, 0.3)?;
            let budget = SearchBudget { seed, ..SearchBudget::default() };
            Ok((min_gate_fidelity(&ch, &u_phase(0.3), &budget)?.fidelity - 0.99).abs())
        })(),
        1e-6,
    ));
    rows.push(check("cascade optimum constant", optimize_cascade(1e5).map(|o| (o.c - 4.82).abs()), 0.05));
    rows.push(check(
        "matched cavity loading",
        (|| {
            let drive = invert_pulse(&make_exponential_mode(0.0, 1.0)?, 0.0)?;
            Ok((load_efficiency(&drive, &CavityLoader::new(0.0, 1.0)?)? - 1.0).abs())
        })(),
        1e-3,
    ));
    rows.push(check(
        "mismatched cavity loading",
        (|| {
            let drive = invert_pulse(&make_exponential_mode(0.0, 1.0)?, 0.0)?;
            let loader = CavityLoader::new(0.0, 2.0)?.with_window(30.0)?;
            Ok((load_efficiency(&drive, &loader)? - 8.0 / 9.0).abs())
        })(),
        1e-3,
    ));
    rows.push(check(
        "emitted mode is the principal mode",
        (|| {
            let e = emit_mode(&CavityLoader::new(0.0, 1.0)?)?;
            Ok((1.0 - inner_product(&make_exponential_mode(0.0, 1.0)?, &e)?.norm_sqr()).abs())
        })(),
        1e-3,
    ));
    rows.push(check(
        "projection success equals gate fidelity",
        (|| {
            let p = ratios(1.0, 5.0)?;
            let g = Arc::new(build_kgrid(&p, 256, 40.0)?);
            let psi = make_exponential_mode(0.0, 1.0)?;
            let phi = TwoPhotonAmplitude::product_state(&psi, &psi, &g, &g)?;
            let out = apply_gate(&phi, &PropagatorKernel::new(p)?, &Default::default())?;
            let a = compute_overlap_a(&p, Default::default())?;
            Ok((pmp_success_probability(&out, &psi)? - a.norm_sqr()).abs())
        })(),
        1e-6,
    ));
    rows
}
