//! Two-qubit logical layer: Kraus channels for the primitive and cascadable
//! gates, worst-case gate fidelity, cascades at the channel and field level,
//! and the cascade-depth optimization built on the far-detuned closed forms.

use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scattering::{apply_gate, PropagatorKernel, ScatterOptions, TwoPhotonAmplitude};
use crate::spectral::{build_kgrid_with, make_exponential_mode, GateParams, GridSpec};

pub type Operator = Matrix4<Complex64>;
pub type StateVector = Vector4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Logical basis index of `|11⟩ ↔ |HV⟩`.
pub const BOTH: usize = 3;

/// A two-qubit density matrix in the basis `|00⟩, |01⟩, |10⟩, |11⟩`
/// (vacuum, H, V, HV). Trace below one carries a failure probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity(Operator);

impl TwoQubitDensity {
    pub fn new(m: Operator) -> Result<Self> {
        let herm = (m - m.adjoint()).camax();
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("density matrix is not Hermitian ({herm:.2e})")));
        }
        let min_eig = m.symmetric_eigenvalues().min();
        if min_eig < -1e-10 {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min_eig:.3e}")));
        }
        let tr = m.trace().re;
        if tr > 1.0 + 1e-12 {
            return Err(Error::InvalidState(format!("density matrix trace {tr} exceeds one")));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &StateVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(invalid("state vector must be nonzero"));
        }
        let v = psi / Complex64::new(n, 0.0);
        Ok(Self(v * v.adjoint()))
    }

    pub fn basis(index: usize) -> Result<Self> {
        if index > 3 {
            return Err(invalid(format!("basis index {index} out of range")));
        }
        let mut m = Operator::zeros();
        m[(index, index)] = ONE;
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        (psi.adjoint() * self.0 * psi)[(0, 0)].re
    }
}

/// A channel in operator-sum form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<Operator>,
    trace_preserving: bool,
}

impl QuantumChannel {
    /// Checks `Σ K†K = I` (trace preserving) or `Σ K†K ≼ I` (otherwise).
    pub fn new(kraus: Vec<Operator>, trace_preserving: bool) -> Result<Self> {
        if kraus.is_empty() {
            return Err(invalid("a channel needs at least one Kraus operator"));
        }
        let sum: Operator = kraus.iter().map(|k| k.adjoint() * k).sum();
        let defect = Operator::identity() - sum;
        if trace_preserving {
            let gap = defect.camax();
            if gap > 1e-12 {
                return Err(Error::InvalidState(format!("Kraus operators are not complete ({gap:.2e})")));
            }
        } else {
            let min_eig = defect.symmetric_eigenvalues().min();
            if min_eig < -1e-12 {
                return Err(Error::InvalidState(format!("Kraus operators exceed completeness ({min_eig:.2e})")));
            }
        }
        Ok(Self { kraus, trace_preserving })
    }

    pub fn identity() -> Self {
        Self { kraus: vec![Operator::identity()], trace_preserving: true }
    }

    pub fn unitary(u: Operator) -> Result<Self> {
        Self::new(vec![u], true)
    }

    pub fn kraus(&self) -> &[Operator] {
        &self.kraus
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Self) -> Self {
        let kraus = next
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        Self { kraus, trace_preserving: self.trace_preserving && next.trace_preserving }
    }

    /// `n` repetitions of `self`.
    pub fn repeated(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("repetition count must be at least 1"));
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.then(self);
        }
        Ok(out)
    }
}

/// `diag(1, 1, 1, e^{iφ})`.
pub fn u_phase(phi: f64) -> Operator {
    let mut u = Operator::identity();
    u[(BOTH, BOTH)] = Complex64::from_polar(1.0, phi);
    u
}

fn check_probability(eps_sq: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps_sq) {
        return Err(invalid(format!("error probability must lie in [0, 1], got {eps_sq}")));
    }
    Ok(())
}

/// `E1 = diag(1, 1, 1, (1 − |ε|²)^{1/2})`.
fn damping(eps_sq: f64) -> Operator {
    let mut e1 = Operator::identity();
    e1[(BOTH, BOTH)] = Complex64::new((1.0 - eps_sq).sqrt(), 0.0);
    e1
}

/// Amplitude damping of `|11⟩` into `|00⟩` followed by the phase gate.
pub fn primitive_channel(eps_sq: f64, phi: f64) -> Result<QuantumChannel> {
    check_probability(eps_sq)?;
    let u = u_phase(phi);
    let mut e2 = Operator::zeros();
    e2[(0, BOTH)] = Complex64::new(eps_sq.sqrt(), 0.0);
    QuantumChannel::new(vec![u * damping(eps_sq), u * e2], true)
}

/// The gate followed by a successful principal-mode projection: a single
/// Kraus operator whose output trace is the success probability.
pub fn cascadable_channel(eps_sq: f64, phi: f64) -> Result<QuantumChannel> {
    check_probability(eps_sq)?;
    QuantumChannel::new(vec![u_phase(phi) * damping(eps_sq)], false)
}

pub fn apply_channel(ch: &QuantumChannel, rho: &TwoQubitDensity) -> Result<TwoQubitDensity> {
    let out: Operator = ch.kraus.iter().map(|k| k * rho.0 * k.adjoint()).sum();
    // symmetrize away rounding before the invariant check
    TwoQubitDensity::new((out + out.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Settings of the multi-start search in [`min_gate_fidelity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub starts: usize,
    pub max_iter: usize,
    /// Stop when the Riemannian gradient norm drops below this.
    pub gradient_tol: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { starts: 24, max_iter: 5000, gradient_tol: 1e-10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinFidelity {
    pub fidelity: f64,
    pub minimizer: StateVector,
    /// Whether the best start met the gradient tolerance.
    pub converged: bool,
}

/// `⟨ψ|U† E(|ψ⟩⟨ψ|) U|ψ⟩ = Σ_K |⟨ψ|U†K|ψ⟩|²` and its Euclidean gradient.
fn fidelity_and_gradient(ms: &[Operator], psi: &StateVector) -> (f64, StateVector) {
    let mut f = 0.0;
    let mut g = StateVector::zeros();
    for m in ms {
        let mp = m * psi;
        let a = psi.dotc(&mp);
        f += a.norm_sqr();
        g += mp * (a.conj() * 2.0) + m.adjoint() * psi * (a * 2.0);
    }
    (f, g)
}

fn random_state(rng: &mut ChaCha8Rng) -> StateVector {
    let v = StateVector::from_fn(|_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    v / Complex64::new(v.norm(), 0.0)
}

/// Gradient descent on the unit sphere with Armijo backtracking.
fn descend(ms: &[Operator], mut psi: StateVector, budget: &SearchBudget) -> (f64, StateVector, bool) {
    let (mut f, mut g) = fidelity_and_gradient(ms, &psi);
    for _ in 0..budget.max_iter {
        let radial = psi.dotc(&g).re;
        let t_grad = g - psi * Complex64::new(radial, 0.0);
        let gn = t_grad.norm();
        if gn < budget.gradient_tol {
            return (f, psi, true);
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-16 {
            let trial = psi - t_grad * Complex64::new(step, 0.0);
            let trial = trial / Complex64::new(trial.norm(), 0.0);
            let (ft, gt) = fidelity_and_gradient(ms, &trial);
            if ft <= f - 1e-4 * step * gn * gn {
                psi = trial;
                f = ft;
                g = gt;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            // no descent possible at machine precision
            return (f, psi, gn < budget.gradient_tol.sqrt());
        }
    }
    (f, psi, false)
}

/// Worst-case fidelity of `ch` against the unitary `target` over pure inputs.
pub fn min_gate_fidelity(ch: &QuantumChannel, target: &Operator, budget: &SearchBudget) -> Result<MinFidelity> {
    if budget.starts == 0 {
        return Err(invalid("search needs at least one start"));
    }
    let ms: Vec<Operator> = ch.kraus.iter().map(|k| target.adjoint() * k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut best: Option<(f64, StateVector, bool)> = None;
    for _ in 0..budget.starts {
        let run = descend(&ms, random_state(&mut rng), budget);
        if best.as_ref().map_or(true, |b| run.0 < b.0) {
            best = Some(run);
        }
    }
    let (fidelity, minimizer, converged) = best.unwrap();
    Ok(MinFidelity { fidelity, minimizer, converged })
}

/// Fidelity of a pure input state under `ch` against `target`.
pub fn state_fidelity(ch: &QuantumChannel, target: &Operator, psi: &StateVector) -> f64 {
    let ms: Vec<Operator> = ch.kraus.iter().map(|k| target.adjoint() * k).collect();
    let v = psi / Complex64::new(psi.norm(), 0.0);
    fidelity_and_gradient(&ms, &v).0
}

/// Fidelity `(1 − |ε|²)^N` of `N` cascadable gates without post-selection.
pub fn cascade_channel(eps_sq: f64, _phi_nl: f64, n: u64) -> Result<f64> {
    check_probability(eps_sq)?;
    if n == 0 {
        return Err(invalid("cascade length must be at least 1"));
    }
    Ok(((n as f64) * (-eps_sq).ln_1p()).exp())
}

/// Whether a principal-mode projection follows each gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pmp {
    On,
    Off,
}

impl std::fmt::Display for Pmp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pmp::On => "on",
            Pmp::Off => "off",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    pub grid: GridSpec,
    /// Largest tolerated drift of the state norm.
    pub norm_tolerance: f64,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        Self { grid: GridSpec::default(), norm_tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    pub n: usize,
    pub fidelity: f64,
    /// Cumulative projection success probability (one when no projection is made).
    pub success_prob: f64,
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTrace {
    pub pmp: Pmp,
    pub steps: Vec<CascadeStep>,
}

/// Least-squares fit of `y = prefactor · n^exponent` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of `ln y`.
    pub rms_residual: f64,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("power-law fit needs at least two positive points"));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("power-law fit needs distinct abscissae"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let rss: f64 = logs.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum();
    Ok(PowerFit { exponent, prefactor: intercept.exp(), rms_residual: (rss / n).sqrt() })
}

impl CascadeTrace {
    /// Power-law fit of the infidelity `1 − F_n` over `lo ≤ n ≤ hi`.
    pub fn infidelity_fit(&self, lo: usize, hi: usize) -> Result<PowerFit> {
        let pts: Vec<(f64, f64)> = self
            .steps
            .iter()
            .filter(|s| s.n >= lo && s.n <= hi)
            .map(|s| (s.n as f64, 1.0 - s.fidelity))
            .collect();
        fit_power_law(&pts)
    }
}

/// Repeated gate applications on the two-photon field state.
///
/// With the projection on, each step's output is projected onto `ψ ⊗ ψ`; the
/// success probability multiplies into the fidelity and the state restarts
/// as the principal product. With it off, the full output is carried to the
/// next step and `F_n = |⟨ψ ⊗ ψ|Φ_n⟩|²`.
pub fn cascade_field(params: &GateParams, steps: usize, pmp: Pmp, opts: &CascadeOptions) -> Result<CascadeTrace> {
    if steps == 0 {
        return Err(invalid("cascade length must be at least 1"));
    }
    let kernel = PropagatorKernel::new(*params)?;
    let psi = make_exponential_mode(params.k0, params.gamma)?;
    let grid = Arc::new(build_kgrid_with(params, opts.grid)?);
    let principal = TwoPhotonAmplitude::product_state(&psi, &psi, &grid, &grid)?;
    let scatter = ScatterOptions::default();
    let mut state = principal.clone();
    let mut success = 1.0;
    let mut out = Vec::with_capacity(steps);
    for n in 1..=steps {
        let next = apply_gate(&state, &kernel, &scatter)?;
        let norm_sq = next.norm_sq();
        let drift = (norm_sq - 1.0).abs();
        if drift > opts.norm_tolerance {
            return Err(Error::ResolutionInsufficient { what: format!("state norm after step {n}"), value: drift, limit: opts.norm_tolerance });
        }
        let c = next.project_product(&psi, &psi)?;
        let fidelity = match pmp {
            Pmp::On => {
                success *= c.norm_sqr();
                state = principal.clone();
                success
            }
            Pmp::Off => {
                state = next;
                c.norm_sqr()
            }
        };
        out.push(CascadeStep { n, fidelity, success_prob: success, norm_sq });
    }
    Ok(CascadeTrace { pmp, steps: out })
}

/// `f(r) = (1 + 5r)/(1 + r)` of the far-detuned phase.
fn phase_shape(r: f64) -> f64 {
    (1.0 + 5.0 * r) / (1.0 + r)
}

/// `g(r) = (1 + 10r + r²)/(1 + 5r)` of the far-detuned error ratio.
fn error_shape(r: f64) -> f64 {
    (1.0 + 10.0 * r + r * r) / (1.0 + 5.0 * r)
}

/// `π^{4/3} g(r)/(r f(r))^{1/3}`: the first-order infidelity of a depth-N
/// cascade with `Nφ = π`, times `N^{1/3}`.
pub fn cascade_cost(r: f64) -> f64 {
    std::f64::consts::PI.powf(4.0 / 3.0) * error_shape(r) / (r * phase_shape(r)).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptimum {
    pub n: f64,
    pub r_opt: f64,
    /// Detuning δ/Γ that makes `N φ = π` at `r_opt`.
    pub delta_opt: f64,
    /// First-order infidelity `C N^{-1/3}`.
    pub infidelity: f64,
    pub c: f64,
    /// `(1 − |ε|²)^N` with the far-detuned forms at the optimum.
    pub fidelity_exact: f64,
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bandwidth ratio search bracket.
pub const R_RANGE: (f64, f64) = (0.1, 50.0);

/// Optimal `γ/Γ` for a depth-`N` cascade of π total phase.
pub fn optimize_cascade(n: f64) -> Result<CascadeOptimum> {
    if !(n.is_finite() && n >= 10.0) {
        return Err(invalid(format!("cascade depth must be at least 10, got {n}")));
    }
    let r = golden_section(cascade_cost, R_RANGE.0, R_RANGE.1, 1e-12);
    let c = cascade_cost(r);
    let pi = std::f64::consts::PI;
    // N r f(r)/δ³ = π in units of Γ
    let delta = (n * r * phase_shape(r) / pi).cbrt();
    let phi = pi / n;
    let eps_sq = error_shape(r) * phi / delta;
    Ok(CascadeOptimum {
        n,
        r_opt: r,
        delta_opt: delta,
        infidelity: c * n.powf(-1.0 / 3.0),
        c,
        fidelity_exact: (n * (-eps_sq).ln_1p()).exp(),
    })
}

/// `F ∼ 1 − N^{1 − n/m}` for a phase `∝ δ^{−m}` and per-gate error `∝ δ^{−n}`:
/// returns the exponent `1 − n/m` and `N^{1 − n/m}`.
pub fn scaling_generalized(m: f64, n: f64, depth: f64) -> Result<(f64, f64)> {
    if !(m > 0.0 && n > 0.0 && depth > 0.0) {
        return Err(invalid("scaling exponents and depth must be positive"));
    }
    let e = 1.0 - n / m;
    Ok((e, depth.powf(e)))
}

pub fn basis_vector(i: usize) -> StateVector {
    let mut v = StateVector::from_element(ZERO);
    v[i] = ONE;
    v
}
