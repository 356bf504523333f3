//! Real-space evaluation of the two-photon propagator for product inputs.
//!
//! Works in the envelope frame `ψ(x) = e^{ik0 x} u(x)`. With
//! `J(x) = ∫_x^0 e^{−a(y−x)} u(y) dy` and `a = Γ/2 − iδ`, the scattered
//! single-photon envelope is `χ = u − Γ J`, and the two-photon output is
//! `χ_H(x_H) χ_V(x_V) − Γ_HΓ_V e^{a_H(x_H−m)} e^{a_V(x_V−m)} J_H(m) J_V(m)`
//! with `m = max(x_H, x_V)`: the second term removes histories in which both
//! photons were absorbed before either was re-emitted.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TwoPhotonAmplitude;
use crate::error::{invalid, Error, Result};
use crate::spectral::{GateParams, KGrid, SpectralAmplitude, I};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomainOptions {
    /// Samples of the coarse z grid used for the two-dimensional term.
    pub points: usize,
    /// Refinement factor of the z grid used for one-dimensional transforms.
    pub refine: usize,
    /// Window length in units of the slowest amplitude decay length.
    pub window: f64,
    /// Include the two-absorption subtraction term.
    pub include_interaction: bool,
}

impl Default for TimeDomainOptions {
    fn default() -> Self {
        Self { points: 4096, refine: 16, window: 24.0, include_interaction: true }
    }
}

/// Envelope samples `u(x)` of a closed-form mode whose poles all lie in the
/// lower half plane (support on `x ≤ 0`).
fn envelope(psi: &SpectralAmplitude, k0: f64) -> Result<(Vec<(Complex64, Complex64)>, f64)> {
    let f = psi
        .closed_form()
        .ok_or_else(|| invalid("time-domain scattering needs closed-form input modes"))?;
    if f.degree() > -1 {
        return Err(invalid("input mode must decay at large wavenumber"));
    }
    let poles = f.poles_with_residues();
    let mut terms = Vec::with_capacity(poles.len());
    let mut slowest = f64::INFINITY;
    for (r, order, res) in poles {
        if order != 1 || r.im >= 0.0 {
            return Err(invalid("input mode must have simple poles in the lower half plane"));
        }
        slowest = slowest.min(-2.0 * r.im);
        // u(x) = −i Σ res e^{i(r − k0)x}
        terms.push((-I * res, I * (r - k0)));
    }
    Ok((terms, slowest))
}

fn eval_envelope(terms: &[(Complex64, Complex64)], x: f64) -> Complex64 {
    terms.iter().map(|(c, e)| c * (e * x).exp()).sum()
}

/// `J(x_j) = ∫_{x_j}^0 e^{−a(y − x_j)} u(y) dy` for the piecewise-linear `u`.
fn accumulate(u: &[Complex64], a: Complex64, h: f64) -> Vec<Complex64> {
    let ah = a * h;
    let e = (-ah).exp();
    let (i0, i1) = if ah.norm() < 1e-4 {
        (
            h * (1.0 - ah / 2.0 + ah * ah / 6.0),
            h * h * (0.5 - ah / 3.0 + ah * ah / 8.0),
        )
    } else {
        ((1.0 - e) / a, (1.0 - e - ah * e) / (a * a))
    };
    let n = u.len();
    let mut j = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n - 1).rev() {
        j[k] = e * j[k + 1] + u[k] * (i0 - i1 / h) + u[k + 1] * (i1 / h);
    }
    j
}

/// Exact Fourier-transform weights `∫ hat_j(x) e^{−iqx} dx` of the hat
/// functions on the uniform grid `x_j = x0 + j h`.
fn filon_weights(q: f64, x0: f64, h: f64, n: usize) -> Vec<Complex64> {
    let th = q * h;
    let interior = if th.abs() < 1e-4 {
        h * (1.0 - th * th / 12.0)
    } else {
        let s = (0.5 * th).sin() / (0.5 * th);
        h * s * s
    };
    let (left, right) = if th.abs() < 1e-3 {
        let l = Complex64::new(0.5 - th * th / 24.0, -th / 6.0 + th * th * th / 120.0);
        (h * l, h * l.conj())
    } else {
        let t2 = th * th;
        let l = (Complex64::new(1.0, -th) - (-I * th).exp()) / t2;
        let r = (Complex64::new(1.0, th) - (I * th).exp()) / t2;
        (h * l, h * r)
    };
    let step = (-I * th).exp();
    let mut phase = (-I * (q * x0)).exp();
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        let c = if j == 0 {
            left
        } else if j == n - 1 {
            right
        } else {
            Complex64::new(interior, 0.0)
        };
        w.push(c * phase);
        phase *= step;
        if j % 256 == 255 {
            phase = (-I * (q * (x0 + (j + 1) as f64 * h))).exp();
        }
    }
    w
}

pub(crate) fn transform(grid: &KGrid, k0: f64, f: &[Complex64], x0: f64, h: f64) -> Vec<Complex64> {
    grid.nodes()
        .par_iter()
        .map(|&k| {
            let w = filon_weights(k - k0, x0, h, f.len());
            w.iter().zip(f).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Evaluates the two-photon output for the product input `ψ_H ⊗ ψ_V` in
/// real space and transforms it onto `grid_h × grid_v`.
pub fn scatter_two_photon_timedomain(
    psi_h: &SpectralAmplitude,
    psi_v: &SpectralAmplitude,
    params: &GateParams,
    grid_h: &Arc<KGrid>,
    grid_v: &Arc<KGrid>,
    opts: &TimeDomainOptions,
) -> Result<TwoPhotonAmplitude> {
    params.validate()?;
    if opts.points < 16 || opts.refine == 0 || !(opts.window > 0.0) {
        return Err(invalid("time-domain grid needs at least 16 points and a positive window"));
    }
    let k0 = params.k0;
    let (th, rh) = envelope(psi_h, k0)?;
    let (tv, rv) = envelope(psi_v, k0)?;
    let slowest = rh.min(rv).min(params.gamma_h).min(params.gamma_v);
    let z = 2.0 * opts.window / slowest;
    let tail = eval_envelope(&th, -z).norm_sqr() / rh + eval_envelope(&tv, -z).norm_sqr() / rv;
    if tail > 1e-4 {
        return Err(Error::ResolutionInsufficient { what: "z-window tail mass".into(), value: tail, limit: 1e-4 });
    }
    let n = opts.points;
    let n_fine = (n - 1) * opts.refine + 1;
    let h_fine = z / (n_fine - 1) as f64;
    let h = z / (n - 1) as f64;
    let fastest = rh.max(rv).max(params.gamma_h).max(params.gamma_v).max(params.delta().abs());
    if h * fastest > 0.5 {
        return Err(Error::ResolutionInsufficient { what: "z-grid step".into(), value: h * fastest, limit: 0.5 });
    }
    let x0 = -z;
    let xs: Vec<f64> = (0..n_fine).map(|j| x0 + j as f64 * h_fine).collect();
    let u_h: Vec<Complex64> = xs.iter().map(|&x| eval_envelope(&th, x)).collect();
    let u_v: Vec<Complex64> = xs.iter().map(|&x| eval_envelope(&tv, x)).collect();
    let a_h = Complex64::new(0.5 * params.gamma_h, -params.delta());
    let a_v = Complex64::new(0.5 * params.gamma_v, -params.delta());
    let j_h = accumulate(&u_h, a_h, h_fine);
    let j_v = accumulate(&u_v, a_v, h_fine);
    let chi_h: Vec<Complex64> = u_h.iter().zip(&j_h).map(|(u, j)| u - params.gamma_h * j).collect();
    let chi_v: Vec<Complex64> = u_v.iter().zip(&j_v).map(|(u, j)| u - params.gamma_v * j).collect();
    let f_h = transform(grid_h, k0, &chi_h, x0, h_fine);
    let f_v = transform(grid_v, k0, &chi_v, x0, h_fine);
    let mut values = DMatrix::from_fn(f_h.len(), f_v.len(), |i, j| f_h[i] * f_v[j]);
    if opts.include_interaction {
        let jj: Vec<Complex64> = (0..n).map(|i| j_h[i * opts.refine] * j_v[i * opts.refine]).collect();
        let theta = interaction_transform(&jj, params, grid_h, grid_v, k0, x0, h);
        values += theta;
    }
    TwoPhotonAmplitude::from_values(grid_h.clone(), grid_v.clone(), values)
}

/// Transform of `T_ij = −Γ_HΓ_V e^{a_H(x_i−m)} e^{a_V(x_j−m)} J_H(m) J_V(m)`
/// with the tensor-product hat basis. The inner sums over `j` are evaluated
/// by first-order recursions in `i`, which is exact for the geometric factors.
fn interaction_transform(
    jj: &[Complex64],
    params: &GateParams,
    grid_h: &KGrid,
    grid_v: &KGrid,
    k0: f64,
    x0: f64,
    h: f64,
) -> DMatrix<Complex64> {
    let n = jj.len();
    let e_h = (-Complex64::new(0.5 * params.gamma_h, -params.delta()) * h).exp();
    let e_v = (-Complex64::new(0.5 * params.gamma_v, -params.delta()) * h).exp();
    let g = -params.gamma_h * params.gamma_v;
    // cols[b][i] = Σ_j T_ij W^V_b(j)
    let cols: Vec<Vec<Complex64>> = grid_v
        .nodes()
        .par_iter()
        .map(|&k| {
            let w = filon_weights(k - k0, x0, h, n);
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            let mut r = Complex64::new(0.0, 0.0);
            for i in (0..n).rev() {
                r = jj[i] * w[i] + e_h * r;
                out[i] = r;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n {
                if i > 0 {
                    s = e_v * (s + w[i - 1]);
                }
                out[i] = g * (out[i] + jj[i] * s);
            }
            out
        })
        .collect();
    let rows: Vec<Vec<Complex64>> = grid_h
        .nodes()
        .par_iter()
        .map(|&k| {
            let w = filon_weights(k - k0, x0, h, n);
            cols.iter().map(|c| w.iter().zip(c).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    DMatrix::from_fn(grid_h.len(), grid_v.len(), |a, b| rows[a][b])
}
