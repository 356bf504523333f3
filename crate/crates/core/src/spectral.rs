//! Mode functions, wavenumber grids, inner products and pulse inversion.
//!
//! Fourier convention: `ψ̃(k) = ∫ dz ψ(z) e^{−ikz}`, inner products are
//! `⟨a|b⟩ = ∫ dk/2π a*(k) b(k)`. Rates and wavenumbers share one unit; the
//! usual choice is Γ = 1.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{barycentric, GaussLegendre};
use crate::rational::FactoredRational;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Physical parameters of the gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Carrier wavenumber of both principal modes.
    pub k0: f64,
    /// Pulse bandwidth γ.
    pub gamma: f64,
    /// Atomic resonance Ω1.
    pub omega1: f64,
    /// Atom–field coupling Γ_H.
    pub gamma_h: f64,
    /// Atom–field coupling Γ_V.
    pub gamma_v: f64,
}

impl GateParams {
    pub fn new(k0: f64, gamma: f64, omega1: f64, gamma_h: f64, gamma_v: f64) -> Result<Self> {
        let p = Self { k0, gamma, omega1, gamma_h, gamma_v };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric couplings Γ_H = Γ_V = `coupling`, carrier at zero.
    pub fn symmetric(gamma: f64, delta: f64, coupling: f64) -> Result<Self> {
        Self::new(0.0, gamma, -delta, coupling, coupling)
    }

    /// Dimensionless parameters in units of Γ = 1.
    pub fn ratios(gamma_over_coupling: f64, delta_over_coupling: f64) -> Result<Self> {
        Self::symmetric(gamma_over_coupling, delta_over_coupling, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k0, self.gamma, self.omega1, self.gamma_h, self.gamma_v]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("gate parameters must be finite"));
        }
        if self.gamma <= 0.0 {
            return Err(invalid(format!("pulse bandwidth must be positive, got {}", self.gamma)));
        }
        if self.gamma_h <= 0.0 || self.gamma_v <= 0.0 {
            return Err(invalid("atom-field couplings must be positive"));
        }
        Ok(())
    }

    /// Detuning δ = k0 − Ω1.
    pub fn delta(&self) -> f64 {
        self.k0 - self.omega1
    }

    /// Resonance of the mirrored linear cavity, Ω2 = 2k0 − Ω1.
    pub fn omega2(&self) -> f64 {
        2.0 * self.k0 - self.omega1
    }

    pub fn symmetric_coupling(&self) -> bool {
        self.gamma_h == self.gamma_v
    }

    /// γ/Γ for symmetric couplings.
    pub fn bandwidth_ratio(&self) -> f64 {
        self.gamma / self.gamma_h
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { omega1: self.k0 - delta, ..*self }
    }

    pub fn with_couplings(&self, gamma_h: f64, gamma_v: f64) -> Self {
        Self { gamma_h, gamma_v, ..*self }
    }
}

/// How the nodes of one panel map onto its reference interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelMap {
    /// `k ∈ [a, b]`.
    Affine { a: f64, b: f64 },
    /// `k = edge + dir·scale·(1 − t)/t` for `t ∈ [t_lo, t_hi]`, covering the
    /// half-line beyond `edge` in direction `dir` (±1).
    Tail { edge: f64, scale: f64, dir: f64, t_lo: f64, t_hi: f64 },
}

impl PanelMap {
    /// Reference coordinate in `[-1, 1]` of wavenumber `k`.
    fn local(&self, k: f64) -> f64 {
        match *self {
            PanelMap::Affine { a, b } => (2.0 * k - a - b) / (b - a),
            PanelMap::Tail { edge, scale, dir, t_lo, t_hi } => {
                let t = scale / (dir * (k - edge) + scale);
                (2.0 * t - t_lo - t_hi) / (t_hi - t_lo)
            }
        }
    }

    fn contains(&self, k: f64) -> bool {
        match *self {
            PanelMap::Affine { a, b } => k >= a && k <= b,
            PanelMap::Tail { edge, scale, dir, t_lo, t_hi } => {
                let s = dir * (k - edge);
                if s < 0.0 {
                    return false;
                }
                let t = scale / (s + scale);
                t >= t_lo && t <= t_hi
            }
        }
    }
}

/// One composite-rule panel.
#[derive(Debug, Clone)]
pub struct Panel {
    pub map: PanelMap,
    /// Index of the first node of the panel in the grid.
    pub start: usize,
    pub order: usize,
    /// Reference coordinates of this panel's nodes, aligned with grid order.
    local_nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Panel {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.order
    }
}

/// A wavenumber quadrature grid: ascending nodes, positive weights for `dk`.
#[derive(Debug, Clone)]
pub struct KGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<Panel>,
    center: f64,
    /// Half-width of the finite window around `center`.
    window: f64,
}

/// Grid-construction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Minimum node count.
    pub resolution: usize,
    /// Window multiplier c_w.
    pub cutoff: f64,
    /// Gauss-Legendre points per panel.
    pub order: usize,
    /// Minimum number of pieces each finite panel is split into.
    pub subdivide: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { resolution: 256, cutoff: 40.0, order: 24, subdivide: 1 }
    }
}

impl GridSpec {
    pub fn with_resolution(resolution: usize) -> Self {
        Self { resolution, ..Self::default() }
    }

    /// At least twice the nodes of `self` on the same panel layout.
    pub fn doubled(&self) -> Self {
        Self { resolution: 2 * self.resolution, subdivide: 2 * self.subdivide.max(1), ..*self }
    }
}

/// A feature the grid must resolve: a pole at `offset − i·width/2` (or its mirror).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Feature {
    pub offset: f64,
    pub width: f64,
}

impl KGrid {
    /// Builds a grid symmetric about `center` from feature offsets (relative
    /// to `center`). Panels refine geometrically (ratio 4) around every
    /// feature and its mirror image, the finite window is `center ± window`,
    /// and each half-line beyond it is covered by two mapped tail panels.
    pub(crate) fn from_features(
        center: f64,
        window: f64,
        features: &[Feature],
        resolution: usize,
        order: usize,
        subdivide: usize,
    ) -> Result<Self> {
        if !(window.is_finite() && window > 0.0) {
            return Err(invalid("grid window must be positive and finite"));
        }
        if order < 2 {
            return Err(invalid("panel order must be at least 2"));
        }
        let min_width = features.iter().map(|f| f.width).fold(f64::INFINITY, f64::min);
        let mut bps: Vec<f64> = vec![0.0, window];
        for f in features {
            let c = f.offset.abs();
            let mut step = 0.25 * f.width;
            while step < 2.0 * window {
                for b in [c - step, c + step] {
                    if b.abs() < window {
                        bps.push(b.abs());
                    }
                }
                step *= 4.0;
            }
            if c < window {
                bps.push(c);
            }
        }
        bps.sort_by(f64::total_cmp);
        // Rings of neighbouring features overlap; keep a breakpoint only if it
        // is at least half its distance-to-feature away from the previous one.
        let dist = |b: f64| {
            features.iter().map(|f| (b - f.offset.abs()).abs()).fold(f64::INFINITY, f64::min)
        };
        let floor = 0.125 * min_width.min(window);
        let mut right: Vec<f64> = Vec::with_capacity(bps.len());
        for b in bps {
            match right.last() {
                Some(&last) if b - last < floor.max(0.5 * dist(b).min(dist(last))) => {}
                _ => right.push(b),
            }
        }
        if *right.last().unwrap() < window {
            right.push(window);
        } else {
            *right.last_mut().unwrap() = window;
        }
        // Symmetric breakpoint offsets: −right (reversed) ∪ right.
        let mut offsets: Vec<f64> = right.iter().rev().map(|b| -b).collect();
        offsets.extend(right.iter().skip(usize::from(right[0] == 0.0)).copied());

        let finite_panels = offsets.len() - 1;
        let tail_panels = 4;
        let base = (finite_panels + tail_panels) * order;
        let split = resolution.div_ceil(base).max(subdivide).max(1);

        let gl = GaussLegendre::new(order);
        let mut maps = Vec::new();
        // lower tail: t from 0 (k → −∞) to 1 (k = −window)
        let tail_cuts = tail_cuts(split);
        for w in tail_cuts.windows(2) {
            maps.push(PanelMap::Tail {
                edge: -window,
                scale: window,
                dir: -1.0,
                t_lo: w[0],
                t_hi: w[1],
            });
        }
        for w in offsets.windows(2) {
            let (a, b) = (w[0], w[1]);
            for s in 0..split {
                let lo = a + (b - a) * s as f64 / split as f64;
                let hi = if s + 1 == split { b } else { a + (b - a) * (s + 1) as f64 / split as f64 };
                maps.push(PanelMap::Affine { a: lo, b: hi });
            }
        }
        for w in tail_cuts.windows(2).rev() {
            maps.push(PanelMap::Tail {
                edge: window,
                scale: window,
                dir: 1.0,
                t_lo: w[0],
                t_hi: w[1],
            });
        }

        let mut nodes = Vec::with_capacity(maps.len() * order);
        let mut weights = Vec::with_capacity(maps.len() * order);
        let mut panels = Vec::with_capacity(maps.len());
        for map in maps {
            let mut pts: Vec<(f64, f64, f64, f64)> = gl
                .nodes
                .iter()
                .zip(&gl.weights)
                .zip(&gl.bary)
                .map(|((&x, &w), &v)| {
                    let (k, dk) = match map {
                        PanelMap::Affine { a, b } => {
                            let h = 0.5 * (b - a);
                            (0.5 * (a + b) + h * x, h * w)
                        }
                        PanelMap::Tail { edge, scale, dir, t_lo, t_hi } => {
                            let h = 0.5 * (t_hi - t_lo);
                            let t = 0.5 * (t_lo + t_hi) + h * x;
                            (edge + dir * scale * (1.0 - t) / t, scale / (t * t) * h * w)
                        }
                    };
                    (k, dk, x, v)
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let start = nodes.len();
            let mut local_nodes = Vec::with_capacity(order);
            let mut bary = Vec::with_capacity(order);
            for (k, dk, x, v) in pts {
                nodes.push(center + k);
                weights.push(dk);
                local_nodes.push(x);
                bary.push(v);
            }
            let map = shift_map(map, center);
            panels.push(Panel { map, start, order, local_nodes, bary });
        }
        Ok(Self { nodes, weights, panels, center, window })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Center of reflection symmetry.
    pub fn center(&self) -> f64 {
        self.center
    }

    /// Finite window `[center − w, center + w]`.
    pub fn window(&self) -> (f64, f64) {
        (self.center - self.window, self.center + self.window)
    }

    /// `∫ dk/2π f(k)` by the composite rule.
    pub fn integrate<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| f(k) * w)
            .sum::<Complex64>()
            / (2.0 * PI)
    }

    /// Index of the panel containing `k` (every real `k` is covered).
    pub fn panel_of(&self, k: f64) -> usize {
        // Panels are contiguous and ordered; search on the last node of each.
        let idx = self
            .panels
            .partition_point(|p| !p.map.contains(k) && self.nodes[p.start + p.order - 1] < k);
        idx.min(self.panels.len() - 1)
    }

    /// Interpolates grid samples `values` at `k` using the panel's
    /// Gauss-Legendre interpolant.
    pub fn interpolate(&self, values: &[Complex64], k: f64) -> Complex64 {
        let p = &self.panels[self.panel_of(k)];
        let x = p.map.local(k);
        barycentric(&p.local_nodes, &p.bary, &values[p.range()], x)
    }

    /// Real interpolation coefficients at `k`: the interpolant equals
    /// `Σ_j coeffs[j] · values[start + j]`. Returns `start`.
    pub fn interp_coeffs(&self, k: f64, coeffs: &mut Vec<f64>) -> usize {
        let p = &self.panels[self.panel_of(k)];
        let x = p.map.local(k);
        coeffs.clear();
        if let Some(hit) = p.local_nodes.iter().position(|&xj| xj == x) {
            coeffs.resize(p.order, 0.0);
            coeffs[hit] = 1.0;
            return p.start;
        }
        let mut den = 0.0;
        for (&xj, &wj) in p.local_nodes.iter().zip(&p.bary) {
            let c = wj / (x - xj);
            coeffs.push(c);
            den += c;
        }
        coeffs.iter_mut().for_each(|c| *c /= den);
        p.start
    }

    /// Finite panel boundaries, ascending.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = Vec::with_capacity(self.panels.len() + 1);
        for p in &self.panels {
            match p.map {
                PanelMap::Affine { a, b } => e.extend([a, b]),
                PanelMap::Tail { edge, scale, dir, t_lo, t_hi } => {
                    for t in [t_lo, t_hi] {
                        if t > 0.0 {
                            e.push(edge + dir * scale * (1.0 - t) / t);
                        }
                    }
                }
            }
        }
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        e
    }

    /// Half-width of the finite window.
    pub fn half_window(&self) -> f64 {
        self.window
    }

    /// True if the nodes and weights are mirror images about the center.
    pub fn is_symmetric_about(&self, c: f64) -> bool {
        let n = self.len();
        let scale = self.window.max(1.0);
        (0..n).all(|i| {
            let j = n - 1 - i;
            ((self.nodes[i] - c) + (self.nodes[j] - c)).abs() <= 1e-12 * scale * (1.0 + (self.nodes[i] - c).abs())
                && (self.weights[i] - self.weights[j]).abs() <= 1e-12 * self.weights[i].abs().max(1e-300)
        })
    }

    pub fn same_as(&self, other: &KGrid) -> bool {
        std::ptr::eq(self, other) || (self.nodes == other.nodes && self.weights == other.weights)
    }
}

fn tail_cuts(split: usize) -> Vec<f64> {
    let n = 2 * split;
    (0..=n).map(|j| j as f64 / n as f64).collect()
}

fn shift_map(map: PanelMap, center: f64) -> PanelMap {
    match map {
        PanelMap::Affine { a, b } => PanelMap::Affine { a: a + center, b: b + center },
        PanelMap::Tail { edge, scale, dir, t_lo, t_hi } => {
            PanelMap::Tail { edge: edge + center, scale, dir, t_lo, t_hi }
        }
    }
}

/// Builds the single-photon wavenumber grid for `params`: symmetric about k0,
/// refined around k0 (width γ), Ω1 and its mirror Ω2 (width Γ).
pub fn build_kgrid(params: &GateParams, resolution: usize, cutoff: f64) -> Result<KGrid> {
    build_kgrid_with(params, GridSpec { resolution, cutoff, ..GridSpec::default() })
}

pub fn build_kgrid_with(params: &GateParams, spec: GridSpec) -> Result<KGrid> {
    params.validate()?;
    if spec.resolution < 64 {
        return Err(invalid(format!("resolution must be at least 64, got {}", spec.resolution)));
    }
    if !(spec.cutoff.is_finite() && spec.cutoff >= 1.0) {
        return Err(invalid(format!("cutoff multiplier must be >= 1, got {}", spec.cutoff)));
    }
    let d = params.delta();
    let g_lo = params.gamma_h.min(params.gamma_v);
    let g_hi = params.gamma_h.max(params.gamma_v);
    let window = (spec.cutoff * params.gamma).max(2.0 * d.abs() + spec.cutoff * g_hi);
    let features = [
        Feature { offset: 0.0, width: params.gamma },
        Feature { offset: d, width: g_lo },
    ];
    let grid = KGrid::from_features(params.k0, window, &features, spec.resolution, spec.order, spec.subdivide)?;
    let (lo, hi) = grid.window();
    let need = [
        params.k0 - spec.cutoff * params.gamma,
        params.k0 + spec.cutoff * params.gamma,
        params.omega1 - spec.cutoff * g_hi,
        params.omega1 + spec.cutoff * g_hi,
    ];
    if need.iter().any(|&k| k < lo - 1e-9 * window || k > hi + 1e-9 * window) {
        return Err(invalid("grid window does not contain both spectral features"));
    }
    Ok(grid)
}

#[derive(Debug, Clone)]
enum Repr {
    Closed(FactoredRational),
    Grid { grid: Arc<KGrid>, values: Vec<Complex64> },
}

/// A single-photon spectral amplitude ψ̃(k): either a closed-form rational
/// function of k or samples on a [`KGrid`].
#[derive(Debug, Clone)]
pub struct SpectralAmplitude {
    repr: Repr,
    norm_sq: f64,
}

/// Closed-form exponential principal mode
/// `ψ̃(k) = i γ^{1/2} / (k − k0 + iγ/2)`.
pub fn make_exponential_mode(k0: f64, gamma: f64) -> Result<SpectralAmplitude> {
    if !(gamma > 0.0 && gamma.is_finite() && k0.is_finite()) {
        return Err(invalid(format!("mode bandwidth must be positive, got {gamma}")));
    }
    let f = FactoredRational::simple_pole(I * gamma.sqrt(), Complex64::new(k0, -0.5 * gamma));
    SpectralAmplitude::closed(f)
}

impl SpectralAmplitude {
    pub fn closed(f: FactoredRational) -> Result<Self> {
        let norm_sq = f.conj_on_real_line().mul(&f).integrate_real_line()?.re;
        Ok(Self { repr: Repr::Closed(f), norm_sq })
    }

    /// Grid samples; the squared norm is taken with the grid weights.
    pub fn on_grid(grid: Arc<KGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        let norm_sq = discrete_norm_sq(&grid, &values);
        Ok(Self { repr: Repr::Grid { grid, values }, norm_sq })
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Repr::Closed(_))
    }

    pub fn closed_form(&self) -> Option<&FactoredRational> {
        match &self.repr {
            Repr::Closed(f) => Some(f),
            Repr::Grid { .. } => None,
        }
    }

    pub fn grid(&self) -> Option<&Arc<KGrid>> {
        match &self.repr {
            Repr::Grid { grid, .. } => Some(grid),
            Repr::Closed(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Grid { values, .. } => Some(values),
            Repr::Closed(_) => None,
        }
    }

    /// `∫ dk/2π |ψ̃|²`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Evaluates ψ̃(k); grid amplitudes are interpolated panel-wise.
    pub fn eval(&self, k: f64) -> Complex64 {
        match &self.repr {
            Repr::Closed(f) => f.eval(k),
            Repr::Grid { grid, values } => grid.interpolate(values, k),
        }
    }

    /// Samples onto `grid`, keeping the sampled values as they are.
    pub fn sample(&self, grid: &Arc<KGrid>) -> Result<Self> {
        match &self.repr {
            Repr::Grid { grid: g, values } if g.same_as(grid) => {
                Self::on_grid(grid.clone(), values.clone())
            }
            Repr::Grid { .. } => Err(Error::GridMismatch("resampling between grids".into())),
            Repr::Closed(f) => {
                Self::on_grid(grid.clone(), grid.nodes().iter().map(|&k| f.eval(k)).collect())
            }
        }
    }

    /// Samples onto `grid` and rescales to unit discrete norm.
    pub fn sample_normalized(&self, grid: &Arc<KGrid>) -> Result<Self> {
        self.sample(grid)?.normalized()
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.norm_sq <= 0.0 {
            return Err(Error::InvalidState("cannot normalize a zero amplitude".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / self.norm_sq.sqrt(), 0.0)))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let repr = match &self.repr {
            Repr::Closed(f) => Repr::Closed(f.clone().scaled(s)),
            Repr::Grid { grid, values } => Repr::Grid {
                grid: grid.clone(),
                values: values.iter().map(|v| v * s).collect(),
            },
        };
        Self { repr, norm_sq: self.norm_sq * s.norm_sqr() }
    }

    /// Multiplies by a closed-form factor.
    pub(crate) fn multiplied(&self, factor: &FactoredRational) -> Result<Self> {
        match &self.repr {
            Repr::Closed(f) => Self::closed(f.mul(factor).simplified()),
            Repr::Grid { grid, values } => {
                let v = grid.nodes().iter().zip(values).map(|(&k, &x)| x * factor.eval(k)).collect();
                Self::on_grid(grid.clone(), v)
            }
        }
    }

    /// Pointwise map of grid samples (closed forms are sampled first).
    pub fn map_on_grid<F: Fn(f64, Complex64) -> Complex64>(&self, grid: &Arc<KGrid>, f: F) -> Result<Self> {
        let s = self.sample(grid)?;
        let v = grid.nodes().iter().zip(s.values().unwrap()).map(|(&k, &x)| f(k, x)).collect();
        Self::on_grid(grid.clone(), v)
    }
}

pub(crate) fn discrete_norm_sq(grid: &KGrid, values: &[Complex64]) -> f64 {
    values.iter().zip(grid.weights()).map(|(v, w)| v.norm_sqr() * w).sum::<f64>() / (2.0 * PI)
}

/// `⟨a|b⟩ = ∫ dk/2π a*(k) b(k)`.
///
/// Two closed forms are integrated by residues; a closed form paired with a
/// grid amplitude is sampled on that grid; two grid amplitudes must share a grid.
pub fn inner_product(a: &SpectralAmplitude, b: &SpectralAmplitude) -> Result<Complex64> {
    match (&a.repr, &b.repr) {
        (Repr::Closed(fa), Repr::Closed(fb)) => fa.conj_on_real_line().mul(fb).integrate_real_line(),
        (Repr::Grid { grid, values }, Repr::Closed(fb)) => {
            Ok(grid_sum(grid, values, |k| fb.eval(k), true))
        }
        (Repr::Closed(fa), Repr::Grid { grid, values }) => {
            Ok(grid_sum(grid, values, |k| fa.eval(k), false))
        }
        (Repr::Grid { grid: ga, values: va }, Repr::Grid { grid: gb, values: vb }) => {
            if !ga.same_as(gb) {
                return Err(Error::GridMismatch("inner product of amplitudes on different grids".into()));
            }
            Ok(va
                .iter()
                .zip(vb)
                .zip(ga.weights())
                .map(|((x, y), w)| x.conj() * y * w)
                .sum::<Complex64>()
                / (2.0 * PI))
        }
    }
}

/// `Σ w conj(g) f` (grid on the left) or `Σ w conj(f) g` (grid on the right).
fn grid_sum<F: Fn(f64) -> Complex64>(
    grid: &KGrid,
    values: &[Complex64],
    other: F,
    grid_is_bra: bool,
) -> Complex64 {
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .zip(values)
        .map(|((&k, &w), &v)| {
            let o = other(k);
            if grid_is_bra {
                v.conj() * o * w
            } else {
                o.conj() * v * w
            }
        })
        .sum::<Complex64>()
        / (2.0 * PI)
}

/// Inversion about the center wavenumber: `ψ̃'(k) = ψ̃(2k0 − k)`.
///
/// Grid amplitudes are reflected node-for-node, so the grid must be symmetric
/// about `k0`; closed forms are transformed analytically.
pub fn invert_pulse(psi: &SpectralAmplitude, k0: f64) -> Result<SpectralAmplitude> {
    match &psi.repr {
        Repr::Closed(f) => SpectralAmplitude::closed(f.reflected(k0)),
        Repr::Grid { grid, values } => {
            if !grid.is_symmetric_about(k0) {
                return Err(Error::GridMismatch(format!(
                    "grid is not symmetric about k0 = {k0}"
                )));
            }
            let v: Vec<Complex64> = values.iter().rev().copied().collect();
            Ok(SpectralAmplitude { repr: Repr::Grid { grid: grid.clone(), values: v }, norm_sq: psi.norm_sq })
        }
    }
}
