use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_normalized, shared_grid, Polarization, PropagatorKernel};
use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rational::FactoredRational;
use crate::spectral::{Feature, KGrid, PanelMap, SpectralAmplitude, I};

/// Joint spectral amplitude `Φ(k_H, k_V)` sampled on the product of two grids.
///
/// Rows index `k_H`, columns index `k_V`. If the state is known to be an exact
/// product of closed-form modes, the factors are kept alongside the samples.
#[derive(Debug, Clone)]
pub struct TwoPhotonAmplitude {
    grid_h: Arc<KGrid>,
    grid_v: Arc<KGrid>,
    values: DMatrix<Complex64>,
    product: Option<(FactoredRational, FactoredRational)>,
}

impl TwoPhotonAmplitude {
    /// `ψ_H(k_H) ψ_V(k_V)` sampled on the given grids.
    pub fn product_state(
        psi_h: &SpectralAmplitude,
        psi_v: &SpectralAmplitude,
        grid_h: &Arc<KGrid>,
        grid_v: &Arc<KGrid>,
    ) -> Result<Self> {
        let a = psi_h.sample(grid_h)?;
        let b = psi_v.sample(grid_v)?;
        let (a, b) = (a.values().unwrap(), b.values().unwrap());
        let values = DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j]);
        let product = match (psi_h.closed_form(), psi_v.closed_form()) {
            (Some(f), Some(g)) => Some((f.clone(), g.clone())),
            _ => None,
        };
        Ok(Self { grid_h: grid_h.clone(), grid_v: grid_v.clone(), values, product })
    }

    pub fn from_values(grid_h: Arc<KGrid>, grid_v: Arc<KGrid>, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != grid_h.len() || values.ncols() != grid_v.len() {
            return Err(Error::GridMismatch(format!(
                "{}x{} values for a {}x{} grid",
                values.nrows(),
                values.ncols(),
                grid_h.len(),
                grid_v.len()
            )));
        }
        Ok(Self { grid_h, grid_v, values, product: None })
    }

    pub fn grid_h(&self) -> &Arc<KGrid> {
        &self.grid_h
    }

    pub fn grid_v(&self) -> &Arc<KGrid> {
        &self.grid_v
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    /// Closed-form factors, if the state is an exact product of closed forms.
    pub fn closed_product(&self) -> Option<(&FactoredRational, &FactoredRational)> {
        self.product.as_ref().map(|(a, b)| (a, b))
    }

    /// `∬ dk_H dk_V/(2π)² |Φ|²`.
    pub fn norm_sq(&self) -> f64 {
        let wh = self.grid_h.weights();
        let wv = self.grid_v.weights();
        let mut acc = 0.0;
        for j in 0..self.values.ncols() {
            let col = self.values.column(j);
            let s: f64 = col.iter().zip(wh).map(|(v, w)| v.norm_sqr() * w).sum();
            acc += s * wv[j];
        }
        acc / (4.0 * PI * PI)
    }

    fn check_same_grids(&self, other: &Self) -> Result<()> {
        if shared_grid(&self.grid_h, &other.grid_h) && shared_grid(&self.grid_v, &other.grid_v) {
            Ok(())
        } else {
            Err(Error::GridMismatch("two-photon amplitudes on different grids".into()))
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grids(other)?;
        let wh = self.grid_h.weights();
        let wv = self.grid_v.weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.values.ncols() {
            let s: Complex64 = self
                .values
                .column(j)
                .iter()
                .zip(other.values.column(j).iter())
                .zip(wh)
                .map(|((a, b), w)| a.conj() * b * w)
                .sum();
            acc += s * wv[j];
        }
        Ok(acc / (4.0 * PI * PI))
    }

    /// `⟨ψ_H ⊗ ψ_V|Φ⟩`.
    pub fn project_product(&self, psi_h: &SpectralAmplitude, psi_v: &SpectralAmplitude) -> Result<Complex64> {
        let a = psi_h.sample(&self.grid_h)?;
        let b = psi_v.sample(&self.grid_v)?;
        let (a, b) = (a.values().unwrap(), b.values().unwrap());
        let wh = self.grid_h.weights();
        let wv = self.grid_v.weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.values.ncols() {
            let s: Complex64 = self
                .values
                .column(j)
                .iter()
                .zip(a)
                .zip(wh)
                .map(|((v, x), w)| x.conj() * v * w)
                .sum();
            acc += s * b[j].conj() * wv[j];
        }
        Ok(acc / (4.0 * PI * PI))
    }

    /// L² distance `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grids(other)?;
        let diff = Self {
            grid_h: self.grid_h.clone(),
            grid_v: self.grid_v.clone(),
            values: &self.values - &other.values,
            product: None,
        };
        Ok(diff.norm_sq().sqrt())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            grid_h: self.grid_h.clone(),
            grid_v: self.grid_v.clone(),
            values: self.values.map(|v| v * s),
            product: self.product.as_ref().map(|(a, b)| (a.clone().scaled(s), b.clone())),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sq();
        if n <= 0.0 {
            return Err(Error::InvalidState("cannot normalize a zero amplitude".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// `Φ(k_V, k_H)`; requires identical H and V grids.
    pub fn exchanged(&self) -> Result<Self> {
        if !shared_grid(&self.grid_h, &self.grid_v) {
            return Err(Error::GridMismatch("exchange needs identical H and V grids".into()));
        }
        Ok(Self {
            grid_h: self.grid_h.clone(),
            grid_v: self.grid_v.clone(),
            values: self.values.transpose(),
            product: self.product.as_ref().map(|(a, b)| (b.clone(), a.clone())),
        })
    }

    /// `Φ_ij √(w_i w_j)/2π`: the amplitude as a matrix in an orthonormal-weighted basis.
    pub fn weighted_matrix(&self) -> DMatrix<Complex64> {
        let sh: Vec<f64> = self.grid_h.weights().iter().map(|w| (w / (2.0 * PI)).sqrt()).collect();
        let sv: Vec<f64> = self.grid_v.weights().iter().map(|w| (w / (2.0 * PI)).sqrt()).collect();
        DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |i, j| {
            self.values[(i, j)] * (sh[i] * sv[j])
        })
    }

    /// Schmidt coefficients (singular values of the weighted matrix), descending.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.weighted_matrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Purity `tr ρ_H²` of the reduced H-photon state.
    pub fn purity(&self) -> f64 {
        let s = self.schmidt_coefficients();
        let p2: f64 = s.iter().map(|v| v * v).sum();
        let p4: f64 = s.iter().map(|v| v.powi(4)).sum();
        p4 / (p2 * p2)
    }

    /// Purity from `‖M M†‖_F² / ‖M‖_F⁴`, without a decomposition.
    pub fn purity_frobenius(&self) -> f64 {
        let m = self.weighted_matrix();
        let rho = &m * m.adjoint();
        let n2 = m.norm_squared();
        rho.norm_squared() / (n2 * n2)
    }

    fn with_diagonal_factors(&self, fh: &[Complex64], fv: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.values.nrows(), self.values.ncols(), |i, j| {
            self.values[(i, j)] * fh[i] * fv[j]
        })
    }
}

/// How the nonlinear source `B(K)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScatterMethod {
    /// Residues when the input is a closed-form product, quadrature otherwise.
    #[default]
    Auto,
    /// Exact residue evaluation per K; needs a closed-form product input.
    Residue,
    /// Quadrature over the H grid with panel interpolation in k_V.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScatterOptions {
    pub method: ScatterMethod,
    /// Node budget of the K grid; defaults to the H grid size.
    pub k_resolution: Option<usize>,
}

/// The nonlinear source
/// `B(K) = ∫ dq/2π (1/δ̃^H_q + 1/δ̃^V_{K−q}) Φ(q, K−q)` sampled on a K grid.
#[derive(Debug, Clone)]
pub struct SourceTerm {
    pub grid: Arc<KGrid>,
    pub values: Vec<Complex64>,
}

impl SourceTerm {
    pub fn eval(&self, k_total: f64) -> Complex64 {
        self.grid.interpolate(&self.values, k_total)
    }
}

fn source_grid(phi: &TwoPhotonAmplitude, kernel: &PropagatorKernel, opts: &ScatterOptions) -> Result<Arc<KGrid>> {
    source_grid_for(&phi.grid_h, &phi.grid_v, kernel, opts)
}

/// Grid in the total wavenumber `K = k_H + k_V` matching a pair of photon grids.
pub(crate) fn source_grid_for(
    grid_h: &KGrid,
    grid_v: &KGrid,
    kernel: &PropagatorKernel,
    opts: &ScatterOptions,
) -> Result<Arc<KGrid>> {
    let p = kernel.params();
    let (ch, cv) = (grid_h.center(), grid_v.center());
    let center = ch + cv;
    let window = grid_h.half_window() + grid_v.half_window();
    let g_lo = p.gamma_h.min(p.gamma_v);
    let features = [
        Feature { offset: 0.0, width: p.gamma },
        Feature { offset: p.omega1 - ch, width: g_lo },
        Feature { offset: p.omega1 - cv, width: g_lo },
        Feature { offset: 2.0 * p.omega1 - center, width: g_lo },
    ];
    let order = grid_h.panels()[0].order;
    let resolution = opts.k_resolution.unwrap_or(grid_h.len()).max(64);
    Ok(Arc::new(KGrid::from_features(center, window, &features, resolution, order, 1)?))
}

/// `B(K)` for a closed-form product `f_H(q) f_V(K − q)`, by residues.
pub(crate) fn source_residue(
    f_h: &FactoredRational,
    f_v: &FactoredRational,
    kernel: &PropagatorKernel,
    k_total: f64,
) -> Result<Complex64> {
    let inv_h = kernel.inverse_denominator(Polarization::H);
    let inv_v = kernel.inverse_denominator(Polarization::V);
    let c = 0.5 * k_total;
    let a = inv_h.mul(f_h).mul(&f_v.reflected(c)).integrate_real_line()?;
    let b = f_h.mul(&inv_v.mul(f_v).reflected(c)).integrate_real_line()?;
    Ok(a + b)
}

/// Computes the nonlinear source on a dedicated K grid.
pub fn nonlinear_source(
    phi: &TwoPhotonAmplitude,
    kernel: &PropagatorKernel,
    opts: &ScatterOptions,
) -> Result<SourceTerm> {
    let grid = source_grid(phi, kernel, opts)?;
    let use_residue = match opts.method {
        ScatterMethod::Auto => phi.product.is_some(),
        ScatterMethod::Residue => {
            if phi.product.is_none() {
                return Err(invalid("residue evaluation needs a closed-form product input"));
            }
            true
        }
        ScatterMethod::Quadrature => false,
    };
    let values: Vec<Complex64> = if use_residue {
        let (fh, fv) = phi.product.as_ref().unwrap();
        grid.nodes()
            .par_iter()
            .map(|&k| source_residue(fh, fv, kernel, k))
            .collect::<Result<_>>()?
    } else {
        let order = phi.grid_h.panels()[0].order;
        let gl = GaussLegendre::new(order);
        let eh = phi.grid_h.edges();
        let ev = phi.grid_v.edges();
        let scale = phi.grid_h.half_window().max(phi.grid_v.half_window());
        grid.nodes()
            .par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(ch, cv), &k| line_integral(phi, kernel, &gl, &eh, &ev, scale, k, ch, cv),
            )
            .collect()
    };
    Ok(SourceTerm { grid, values })
}

/// `∫ dq/2π (1/δ̃^H_q + 1/δ̃^V_{K−q}) Φ(q, K−q)` along the line `k_H + k_V = K`.
///
/// The line is cut at every H panel edge and every mirrored V panel edge, so
/// that on each piece both coordinates stay inside one panel and the 2-D
/// panel interpolant is smooth.
#[allow(clippy::too_many_arguments)]
fn line_integral(
    phi: &TwoPhotonAmplitude,
    kernel: &PropagatorKernel,
    gl: &GaussLegendre,
    eh: &[f64],
    ev: &[f64],
    scale: f64,
    k: f64,
    ch: &mut Vec<f64>,
    cv: &mut Vec<f64>,
) -> Complex64 {
    let mut cuts: Vec<f64> = eh.iter().copied().chain(ev.iter().map(|b| k - b)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let nrows = phi.values.nrows();
    let data = phi.values.as_slice();
    let mut f = |q: f64| -> Complex64 {
        let kv = k - q;
        let sh = phi.grid_h.interp_coeffs(q, ch);
        let sv = phi.grid_v.interp_coeffs(kv, cv);
        let mut v = Complex64::new(0.0, 0.0);
        for (b, &cb) in cv.iter().enumerate() {
            let col = &data[(sv + b) * nrows + sh..(sv + b) * nrows + sh + ch.len()];
            let s: Complex64 = col.iter().zip(ch.iter()).map(|(x, &ca)| x * ca).sum();
            v += s * cb;
        }
        v * (1.0 / kernel.denominator(q, Polarization::H) + 1.0 / kernel.denominator(kv, Polarization::V))
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        acc += gl.integrate(w[0], w[1], &mut f);
    }
    let (lo, hi) = (cuts[0], cuts[cuts.len() - 1]);
    for (t0, t1) in [(0.0, 0.5), (0.5, 1.0)] {
        acc += gl.integrate(t0, t1, |t: f64| {
            let jac = scale / (t * t);
            let d = scale * (1.0 - t) / t;
            (f(lo - d) + f(hi + d)) * jac
        });
    }
    acc / (2.0 * PI)
}

/// Two-photon scattering with default options.
pub fn scatter_two_photon(phi: &TwoPhotonAmplitude, kernel: &PropagatorKernel) -> Result<TwoPhotonAmplitude> {
    scatter_two_photon_with(phi, kernel, &ScatterOptions::default())
}

/// `Φ'(k_H,k_V) = p_H p_V Φ + iΓ_HΓ_V/(δ̃^H_{k_H} δ̃^V_{k_V}) · B(k_H + k_V)`.
pub fn scatter_two_photon_with(
    phi: &TwoPhotonAmplitude,
    kernel: &PropagatorKernel,
    opts: &ScatterOptions,
) -> Result<TwoPhotonAmplitude> {
    require_normalized(phi.norm_sq(), 1e-3, "two-photon input")?;
    let src = nonlinear_source(phi, kernel, opts)?;
    let kh = phi.grid_h.nodes();
    let kv = phi.grid_v.nodes();
    let ph: Vec<Complex64> = kh.iter().map(|&k| kernel.phase(k, Polarization::H)).collect();
    let pv: Vec<Complex64> = kv.iter().map(|&k| kernel.phase(k, Polarization::V)).collect();
    let s = kernel.nonlinear_strength();
    let dh: Vec<Complex64> = kh.iter().map(|&k| s / kernel.denominator(k, Polarization::H)).collect();
    let dv: Vec<Complex64> = kv.iter().map(|&k| 1.0 / kernel.denominator(k, Polarization::V)).collect();
    let cols: Vec<Vec<Complex64>> = (0..kv.len())
        .into_par_iter()
        .map(|j| {
            (0..kh.len())
                .map(|i| ph[i] * pv[j] * phi.values[(i, j)] + dh[i] * dv[j] * src.eval(kh[i] + kv[j]))
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(kh.len(), kv.len(), |i, j| cols[j][i]);
    Ok(TwoPhotonAmplitude { grid_h: phi.grid_h.clone(), grid_v: phi.grid_v.clone(), values, product: None })
}

/// Linear-evolution removal on both photons.
pub fn apply_linear_removal_pair(phi: &TwoPhotonAmplitude, kernel: &PropagatorKernel) -> Result<TwoPhotonAmplitude> {
    let fh: Vec<Complex64> = phi.grid_h.nodes().iter().map(|&k| kernel.phase(k, Polarization::H).conj()).collect();
    let fv: Vec<Complex64> = phi.grid_v.nodes().iter().map(|&k| kernel.phase(k, Polarization::V).conj()).collect();
    let product = match &phi.product {
        Some((a, b)) => Some((
            a.mul(&kernel.phase_factor(Polarization::H).conj_on_real_line()).simplified(),
            b.mul(&kernel.phase_factor(Polarization::V).conj_on_real_line()).simplified(),
        )),
        None => None,
    };
    Ok(TwoPhotonAmplitude {
        grid_h: phi.grid_h.clone(),
        grid_v: phi.grid_v.clone(),
        values: phi.with_diagonal_factors(&fh, &fv),
        product,
    })
}

/// One full gate step: scattering followed by linear-evolution removal.
pub fn apply_gate(phi: &TwoPhotonAmplitude, kernel: &PropagatorKernel, opts: &ScatterOptions) -> Result<TwoPhotonAmplitude> {
    apply_linear_removal_pair(&scatter_two_photon_with(phi, kernel, opts)?, kernel)
}

/// Antibunching diagnostic for the scattered product state `ψ_H ⊗ ψ_V`.
///
/// The doubly scattered part of the output, `(p_H − 1)(p_V − 1) ψ_H ψ_V +
/// M B`, must vanish at coincident positions `x_H = x_V = x`. Its value there
/// separates into `r_H(x) r_V(x)` with `r = F⁻¹[(p − 1)ψ]`, and
/// `Γ_HΓ_V ∫ dK/2π B(K) e^{iKx} / (K − 2Ω1 + i(Γ_H + Γ_V)/2)`, the relative
/// integral over `k_H` at fixed `K` done by residues. Returns
/// `max_x |sum| / max_x |r_H r_V|`.
pub fn coincidence_suppression(
    psi_h: &SpectralAmplitude,
    psi_v: &SpectralAmplitude,
    grid_h: &Arc<KGrid>,
    grid_v: &Arc<KGrid>,
    kernel: &PropagatorKernel,
    opts: &ScatterOptions,
    xs: &[f64],
) -> Result<f64> {
    let phi = TwoPhotonAmplitude::product_state(psi_h, psi_v, grid_h, grid_v)?;
    let src = nonlinear_source(&phi, kernel, opts)?;
    let p = kernel.params();
    let pair = Complex64::new(-2.0 * p.omega1, 0.5 * (p.gamma_h + p.gamma_v));
    let strength = p.gamma_h * p.gamma_v;
    // r(x) has 1/k² tails; integrate it over a much wider window.
    let wide = crate::spectral::build_kgrid(p, 256, 100.0 * grid_h.half_window().max(grid_v.half_window()))?;
    let gl = GaussLegendre::new(wide.panels()[0].order);
    let scattered = |psi: &SpectralAmplitude, pol: Polarization, x: f64| -> Complex64 {
        oscillatory_transform(&wide, &gl, x, |k| psi.eval(k) * (kernel.phase(k, pol) - 1.0))
    };
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for &x in xs {
        let r = scattered(psi_h, Polarization::H, x) * scattered(psi_v, Polarization::V, x);
        let theta = oscillatory_transform(&src.grid, &gl, x, |k| src.eval(k) / (k + pair)) * strength;
        num = num.max((r + theta).norm());
        den = den.max(r.norm());
    }
    if den == 0.0 {
        return Err(Error::InvalidState("no scattered amplitude at the probe positions".into()));
    }
    Ok(num / den)
}

/// `∫ dk/2π f(k) e^{ikx}` on `grid`, with finite panels split so each piece
/// holds a few oscillations of the exponential.
fn oscillatory_transform<F: Fn(f64) -> Complex64>(grid: &KGrid, gl: &GaussLegendre, x: f64, f: F) -> Complex64 {
    let cycles_per_piece = 0.125 * gl.nodes.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for panel in grid.panels() {
        match panel.map {
            PanelMap::Affine { a, b } => {
                let m = ((b - a) * x.abs() / (2.0 * PI * cycles_per_piece)).ceil().max(1.0) as usize;
                let h = (b - a) / m as f64;
                for j in 0..m {
                    let lo = a + h * j as f64;
                    acc += gl.integrate(lo, lo + h, |k| f(k) * (I * k * x).exp());
                }
            }
            PanelMap::Tail { .. } => {
                for i in panel.range() {
                    let k = grid.nodes()[i];
                    acc += f(k) * (I * k * x).exp() * grid.weights()[i];
                }
            }
        }
    }
    acc / (2.0 * PI)
}
