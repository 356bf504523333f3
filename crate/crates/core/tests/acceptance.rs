//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails only when a criterion outside `KNOWN_RED` fails, or a
//! known-red criterion unexpectedly passes (so the list stays accurate).

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cphase_core::channel::{
    apply_channel, basis_vector, cascade_field, min_gate_fidelity, optimize_cascade, primitive_channel, u_phase,
    CascadeOptions, Pmp, SearchBudget, StateVector, TwoQubitDensity,
};
use cphase_core::metrics::{
    closed_form_far_detuned, closed_form_weak, overlap_a_with, purity, sweep_detuning, MetricsOptions, SweepRow,
};
use cphase_core::pmpdev::{load_efficiency, CavityLoader};
use cphase_core::scattering::{
    scatter_two_photon, scatter_two_photon_timedomain, verify_time_reversal, PropagatorKernel, TimeDomainOptions,
    TwoPhotonAmplitude,
};
use cphase_core::spectral::{build_kgrid, invert_pulse, make_exponential_mode, GateParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose targets the model does not reach; see the project notes.
const KNOWN_RED: &[usize] = &[1, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn p(gamma: f64, delta: f64) -> GateParams {
    GateParams::ratios(gamma, delta).unwrap()
}

/// `(φ_NL, |ε|², runtime)` from the converged quadrature overlap.
fn exact(params: &GateParams) -> (f64, f64, Duration) {
    let t = Instant::now();
    let a = overlap_a_with(params, &MetricsOptions::default()).unwrap();
    (a.arg(), 1.0 - a.norm_sqr(), t.elapsed())
}

fn weak_excitation() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for delta in [2.0, 5.0, 10.0] {
        let params = p(0.01, delta);
        let (phi, err, dt) = exact(&params);
        let (phi_w, err_w) = closed_form_weak(&params).unwrap();
        let (dp, de) = (rel(phi, phi_w), rel(err, err_w));
        pass &= dp <= 0.02 && de <= 0.02 && dt < Duration::from_secs(30);
        parts.push(format!("δ={delta}: φ {dp:.2e}, |ε|² {de:.2e}, {:.2}s", dt.as_secs_f64()));
    }
    outcome(pass, format!("relative gaps to the weak forms (limit 2e-2): {}", parts.join("; ")))
}

fn far_detuned() -> Outcome {
    let mut gaps = Vec::new();
    for delta in [20.0, 30.0, 50.0] {
        let params = p(1.0, delta);
        let (phi, err, _) = exact(&params);
        let (phi_f, err_f) = closed_form_far_detuned(&params).unwrap();
        gaps.push((delta, rel(phi, phi_f), rel(err, err_f)));
    }
    let within = gaps.iter().all(|g| g.1 <= 0.05 && g.2 <= 0.05);
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1 && w[1].2 < w[0].2);
    let parts: Vec<String> = gaps.iter().map(|g| format!("δ={}: φ {:.2e}, |ε|² {:.2e}", g.0, g.1, g.2)).collect();
    outcome(within && decreasing, format!("{} (limit 5e-2, decreasing: {decreasing})", parts.join("; ")))
}

/// Index of the largest value.
fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Non-decreasing up to `peak` and non-increasing after it.
fn unimodal(v: &[f64], peak: usize) -> bool {
    v[..=peak].windows(2).all(|w| w[1] >= w[0]) && v[peak..].windows(2).all(|w| w[1] <= w[0])
}

fn figure_shapes() -> Outcome {
    let rows: Vec<SweepRow> = sweep_detuning(&p(1.0, 0.0), -6.0, 6.0, 49, &MetricsOptions::default()).unwrap();
    let n = rows.len();
    let delta: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let phi: Vec<f64> = rows.iter().map(|r| r.phi_nl).collect();
    let infid: Vec<f64> = rows.iter().map(|r| 1.0 - r.fidelity).collect();
    let pur: Vec<f64> = rows.iter().map(|r| r.purity).collect();

    let parity = (0..n)
        .map(|i| {
            let j = n - 1 - i;
            (phi[i] + phi[j]).abs().max((infid[i] - infid[j]).abs()).max((pur[i] - pur[j]).abs())
        })
        .fold(0.0, f64::max);
    let mid = n / 2;
    let signs = (0..n).all(|i| i == mid || phi[i].signum() == delta[i].signum()) && phi[mid].abs() < 1e-6;
    let half = &phi[mid..];
    let phi_peak = argmax(half);
    let dispersion = signs && phi_peak > 0 && phi_peak + 1 < half.len() && unimodal(half, phi_peak);

    let peak = argmax(&infid);
    let infid_ok = delta[peak].abs() < 0.5 && unimodal(&infid, peak);

    let neg: Vec<f64> = pur.iter().map(|x| -x).collect();
    let dip = argmax(&neg);
    let far: Vec<f64> = [8.0, 16.0, 32.0].iter().map(|&d| 1.0 - purity(&p(1.0, d)).unwrap()).collect();
    let purity_ok = delta[dip].abs() < 0.5
        && pur[dip] < 1.0
        && unimodal(&neg, dip)
        && far.windows(2).all(|w| w[1] < w[0])
        && 1.0 - pur[n - 1] > far[0]
        && far[2] < 1e-5;

    outcome(
        parity <= 1e-6 && dispersion && infid_ok && purity_ok,
        format!(
            "parity gap {parity:.1e}; φ_NL peak at δ={}; 1−F peak at δ={}; purity dip {:.4} at δ={}, 1−P at δ=8,16,32: {:.1e}, {:.1e}, {:.1e}",
            delta[mid + phi_peak], delta[peak], pur[dip], delta[dip], far[0], far[1], far[2]
        ),
    )
}

fn scaling_law() -> Outcome {
    let t = Instant::now();
    let ns = [1e3, 1e5, 1e7];
    let opts: Vec<_> = ns.iter().map(|&n| optimize_cascade(n).unwrap()).collect();
    let c_ok = opts.iter().all(|o| (o.c - 4.82).abs() <= 0.05);
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = opts.iter().map(|o| o.infidelity.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    // smallest N with F > 0.95; at the optimum F rises with N
    let (mut lo, mut hi) = (1e3f64.ln(), 1e9f64.ln());
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if optimize_cascade(m.exp()).unwrap().fidelity_exact > 0.95 {
            hi = m;
        } else {
            lo = m;
        }
    }
    let n95 = hi.exp();
    let n_ok = n95 >= 1e6 / 1.5 && n95 <= 1.5e6;
    let dt = t.elapsed();
    outcome(
        c_ok && (slope + 1.0 / 3.0).abs() <= 0.01 && n_ok && dt < Duration::from_secs(1),
        format!(
            "C = {:.4}, {:.4}, {:.4}; exponent {slope:.5}; N(F=0.95) = {n95:.3e}; {:.3}s",
            opts[0].c, opts[1].c, opts[2].c, dt.as_secs_f64()
        ),
    )
}

fn cascade_exponent(delta: f64, pmp: Pmp) -> (f64, f64) {
    let trace = cascade_field(&p(1.0, delta), 20, pmp, &CascadeOptions::default()).unwrap();
    let fit = trace.infidelity_fit(1, 20).unwrap();
    (fit.exponent, 1.0 - trace.steps.last().unwrap().fidelity)
}

fn zeno() -> Outcome {
    let t = Instant::now();
    let (on, on_last) = cascade_exponent(5.0, Pmp::On);
    let (off, off_last) = cascade_exponent(5.0, Pmp::Off);
    let dt = t.elapsed();
    let pass = (on - 1.0).abs() <= 0.15 && (1.5..=2.3).contains(&off) && dt < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "exponent with projection {on:.4} (1−F₂₀ {on_last:.3}), without {off:.4} (1−F₂₀ {off_last:.3}); {:.0}s",
            dt.as_secs_f64()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst_l2: f64 = 0.0;
    let mut worst_tr: f64 = 0.0;
    for delta in [0.0, 1.0, 5.0] {
        let params = p(1.0, delta);
        let g = Arc::new(build_kgrid(&params, 128, 40.0).unwrap());
        let psi = make_exponential_mode(0.0, 1.0).unwrap();
        let td = scatter_two_photon_timedomain(&psi, &psi, &params, &g, &g, &TimeDomainOptions::default()).unwrap();
        let phi = TwoPhotonAmplitude::product_state(&psi, &psi, &g, &g).unwrap();
        let fs = scatter_two_photon(&phi, &PropagatorKernel::new(params).unwrap()).unwrap();
        worst_l2 = worst_l2.max(td.distance(&fs).unwrap());
        worst_tr = worst_tr
            .max(verify_time_reversal(&psi, &params).unwrap())
            .max(verify_time_reversal(&psi.sample(&g).unwrap(), &params).unwrap());
    }
    outcome(
        worst_l2 <= 1e-3 && worst_tr <= 1e-9,
        format!("largest L² gap {worst_l2:.2e} (limit 1e-3); time-reversal gap {worst_tr:.1e} (limit 1e-9)"),
    )
}

/// Lattice `Σ nᵢ = level` over the population simplex, with seeded random phases.
fn lattice_states(level: usize, rng: &mut ChaCha8Rng) -> Vec<StateVector> {
    let mut out = Vec::new();
    for a in 0..=level {
        for b in 0..=level - a {
            for c in 0..=level - a - b {
                let d = level - a - b - c;
                let v = StateVector::from_iterator([a, b, c, d].iter().map(|&k| {
                    Complex64::from_polar((k as f64 / level as f64).sqrt(), rng.gen_range(0.0..2.0 * PI))
                }));
                out.push(v);
            }
        }
    }
    out
}

/// Brute-force worst-case fidelity through explicit density matrices.
fn brute_force_min(eps_sq: f64, phi: f64, states: &[StateVector]) -> (f64, StateVector) {
    let ch = primitive_channel(eps_sq, phi).unwrap();
    let u = u_phase(phi);
    let mut best = (f64::INFINITY, states[0]);
    for s in states {
        let out = apply_channel(&ch, &TwoQubitDensity::pure(s).unwrap()).unwrap();
        let f = out.expectation(&(u * s));
        if f < best.0 {
            best = (f, *s);
        }
    }
    best
}

fn channel_layer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let states = lattice_states(83, &mut rng);
    let target_11 = basis_vector(3);
    let mut pass = states.len() >= 100_000;
    let mut parts = Vec::new();
    for eps_sq in [0.0, 0.01, 0.3] {
        let ch = primitive_channel(eps_sq, PI).unwrap();
        let found = min_gate_fidelity(&ch, &u_phase(PI), &SearchBudget::default()).unwrap();
        let (oracle, oracle_state) = brute_force_min(eps_sq, PI, &states);
        let weight_11 = found.minimizer.dotc(&target_11).norm_sqr();
        let oracle_11 = oracle_state.dotc(&target_11).norm_sqr();
        let formula = (found.fidelity - (1.0 - eps_sq)).abs();
        let vs_oracle = (found.fidelity - oracle).abs();
        // any state is a minimizer of the identity channel
        let minimizer_ok = eps_sq == 0.0 || (weight_11 > 1.0 - 1e-3 && oracle_11 > 1.0 - 1e-3);
        pass &= formula <= 1e-3 && vs_oracle <= 1e-3 && minimizer_ok;
        parts.push(format!(
            "ε²={eps_sq}: F_min {:.6}, oracle {oracle:.6}, |⟨11|ψ⟩|² {weight_11:.4}",
            found.fidelity
        ));
    }
    outcome(pass, format!("{} brute-force states; {}", states.len(), parts.join("; ")))
}

fn pmp_device() -> Outcome {
    let drive = invert_pulse(&make_exponential_mode(0.0, 1.0).unwrap(), 0.0).unwrap();
    let matched = load_efficiency(&drive, &CavityLoader::new(0.0, 1.0).unwrap()).unwrap();
    let wide = CavityLoader::new(0.0, 2.0).unwrap().with_window(30.0).unwrap();
    let mismatched = load_efficiency(&drive, &wide).unwrap();
    // |⟨χ_cav|drive⟩|² for exponential modes of rates γ and γ_cav
    let analytic = 4.0 * 1.0 * 2.0 / (1.0f64 + 2.0).powi(2);
    let pass = (matched - 1.0).abs() <= 1e-3 && (mismatched - 8.0 / 9.0).abs() <= 0.01 && (mismatched - analytic).abs() <= 1e-3;
    outcome(pass, format!("matched {matched:.8}; γ_cav = 2γ: {mismatched:.8} vs analytic {analytic:.8}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("weak-excitation asymptotics", weak_excitation),
        ("far-detuned asymptotics", far_detuned),
        ("detuning sweep shapes", figure_shapes),
        ("cascade scaling law", scaling_law),
        ("projection arrests error growth", zeno),
        ("oracle equivalence", oracle_equivalence),
        ("channel worst-case fidelity", channel_layer),
        ("projector cavity loading", pmp_device),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        let o = f();
        println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    let (ex, _) = cascade_exponent(20.0, Pmp::Off);
    println!("info: without projection at δ/Γ = 20 the infidelity exponent is {ex:.4}");
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
