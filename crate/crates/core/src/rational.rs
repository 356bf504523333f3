//! Rational functions stored as products of linear factors, integrated over
//! the real line by residues.
//!
//! Every closed-form amplitude in this crate (exponential modes, their
//! scattered and inverted images, the two-photon overlap kernels) is a product
//! of factors `(k - r)^e`, so `∫ dk/2π f(k)` reduces to a finite residue sum.

use num_complex::Complex64;

use crate::error::{invalid, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `scale · Π (k − root)^power`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredRational {
    pub scale: Complex64,
    pub factors: Vec<(Complex64, i32)>,
}

impl FactoredRational {
    pub fn constant(scale: Complex64) -> Self {
        Self { scale, factors: Vec::new() }
    }

    /// `scale / (k − pole)`.
    pub fn simple_pole(scale: Complex64, pole: Complex64) -> Self {
        Self { scale, factors: vec![(pole, -1)] }
    }

    pub fn with_factor(mut self, root: Complex64, power: i32) -> Self {
        self.factors.push((root, power));
        self
    }

    pub fn scaled(mut self, s: Complex64) -> Self {
        self.scale *= s;
        self
    }

    pub fn degree(&self) -> i32 {
        self.factors.iter().map(|f| f.1).sum()
    }

    pub fn eval(&self, k: f64) -> Complex64 {
        let kc = Complex64::new(k, 0.0);
        self.factors
            .iter()
            .fold(self.scale, |acc, &(r, p)| acc * (kc - r).powi(p))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        Self { scale: self.scale * other.scale, factors }
    }

    /// The function `k ↦ conj(f(k))` for real `k`.
    pub fn conj_on_real_line(&self) -> Self {
        Self {
            scale: self.scale.conj(),
            factors: self.factors.iter().map(|&(r, p)| (r.conj(), p)).collect(),
        }
    }

    /// The function `k ↦ f(2c − k)`.
    pub fn reflected(&self, center: f64) -> Self {
        let sign = if self.degree().rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Self {
            scale: self.scale * sign,
            factors: self
                .factors
                .iter()
                .map(|&(r, p)| (Complex64::new(2.0 * center, 0.0) - r, p))
                .collect(),
        }
    }

    /// Merges coincident roots and cancels zeros against poles.
    pub fn simplified(&self) -> Self {
        let mut out: Vec<(Complex64, i32)> = Vec::new();
        for &(r, p) in &self.factors {
            let tol = 1e-12 * (1.0 + r.norm());
            match out.iter_mut().find(|(q, _)| (q - r).norm() <= tol) {
                Some(slot) => slot.1 += p,
                None => out.push((r, p)),
            }
        }
        out.retain(|&(_, p)| p != 0);
        Self { scale: self.scale, factors: out }
    }

    /// `∫ dk/2π f(k)` over the real line.
    pub fn integrate_real_line(&self) -> Result<Complex64> {
        let f = self.simplified();
        if f.scale == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if f.degree() > -2 {
            return Err(invalid(format!(
                "integrand decays too slowly (degree {})",
                f.degree()
            )));
        }
        let poles: Vec<(Complex64, i32)> = f.factors.iter().copied().filter(|&(_, p)| p < 0).collect();
        if poles.iter().any(|(r, _)| r.im == 0.0) {
            return Err(invalid("pole on the real axis"));
        }
        let upper: Vec<_> = poles.iter().filter(|(r, _)| r.im > 0.0).collect();
        let lower: Vec<_> = poles.iter().filter(|(r, _)| r.im < 0.0).collect();
        // ∫dk/2π f = i Σ_UHP Res = −i Σ_LHP Res; use the smaller set.
        let (set, sign) = if upper.len() <= lower.len() { (upper, I) } else { (lower, -I) };
        let total: Complex64 = set.iter().map(|&&(p, m)| residue(&f, p, (-m) as usize)).sum();
        Ok(sign * total)
    }
}

impl FactoredRational {
    /// Poles with their residues, after merging coincident roots.
    pub fn poles_with_residues(&self) -> Vec<(Complex64, usize, Complex64)> {
        let f = self.simplified();
        f.factors
            .iter()
            .filter(|&&(_, p)| p < 0)
            .map(|&(r, p)| (r, (-p) as usize, residue(&f, r, (-p) as usize)))
            .collect()
    }
}

/// Residue of `f` at a pole `p` of order `m`: the `(m−1)`-th Taylor coefficient of
/// `g(k) = (k − p)^m f(k)`, obtained from the log-derivative of `g`.
fn residue(f: &FactoredRational, p: Complex64, m: usize) -> Complex64 {
    let others: Vec<(Complex64, i32)> = f.factors.iter().copied().filter(|&(r, _)| r != p).collect();
    let g0 = others.iter().fold(f.scale, |acc, &(r, e)| acc * (p - r).powi(e));
    if m == 1 {
        return g0;
    }
    // h^(j) for j = 1..m-1 where h = ln g:  h^(j) = Σ e (−1)^(j−1) (j−1)! / (p − r)^j
    let n = m - 1;
    let mut h = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut fact = 1.0;
    for (j, hj) in h.iter_mut().enumerate().skip(1) {
        if j > 1 {
            fact *= (j - 1) as f64;
        }
        let sgn = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
        *hj = others
            .iter()
            .map(|&(r, e)| (p - r).powi(-(j as i32)) * (e as f64 * sgn * fact))
            .sum();
    }
    // g^(k+1) = Σ_{i=0}^{k} C(k,i) g^(i) h^(k−i+1)
    let mut g = vec![Complex64::new(0.0, 0.0); n + 1];
    g[0] = g0;
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for i in 0..=k {
            acc += g[i] * h[k - i + 1] * binom;
            binom = binom * (k - i) as f64 / (i + 1) as f64;
        }
        g[k + 1] = acc;
    }
    let nfact: f64 = (1..=n).map(|v| v as f64).product();
    g[n] / nfact
}

/// Sum of factored terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RationalSum(pub Vec<FactoredRational>);

impl RationalSum {
    pub fn eval(&self, k: f64) -> Complex64 {
        self.0.iter().map(|t| t.eval(k)).sum()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() * other.0.len());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a.mul(b));
            }
        }
        Self(out)
    }

    pub fn integrate_real_line(&self) -> Result<Complex64> {
        self.0.iter().map(|t| t.integrate_real_line()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lorentzian_integrates_to_one() {
        // γ / ((k−k0)² + γ²/4) over dk/2π
        let g = 0.7;
        let f = FactoredRational::constant(c(g, 0.0))
            .with_factor(c(1.3, g / 2.0), -1)
            .with_factor(c(1.3, -g / 2.0), -1);
        let v = f.integrate_real_line().unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn double_pole_matches_direct_formula() {
        // ∫ dk/2π 1/(k² + a²)² = 1/(4 a³)
        let a = 1.7;
        let f = FactoredRational::constant(c(1.0, 0.0))
            .with_factor(c(0.0, a), -2)
            .with_factor(c(0.0, -a), -2);
        let v = f.integrate_real_line().unwrap();
        assert!((v.re - 1.0 / (4.0 * a * a * a)).abs() < 1e-14);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn third_order_pole_with_numerator() {
        // ∫ dk/2π k² / (k² + 1)³ = (1/2π)(π/8) = 1/16
        let f = FactoredRational::constant(c(1.0, 0.0))
            .with_factor(c(0.0, 0.0), 2)
            .with_factor(c(0.0, 1.0), -3)
            .with_factor(c(0.0, -1.0), -3);
        let v = f.integrate_real_line().unwrap();
        assert!((v - c(1.0 / 16.0, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn residue_sum_agrees_with_brute_force_quadrature() {
        let f = FactoredRational::constant(c(0.3, -1.1))
            .with_factor(c(0.4, 2.0), 1)
            .with_factor(c(-1.0, 0.5), -1)
            .with_factor(c(2.0, -0.3), -1)
            .with_factor(c(0.1, 0.9), -2);
        let exact = f.integrate_real_line().unwrap();
        // tangent-mapped trapezoid on a wide window
        let n = 400_000;
        let mut acc = c(0.0, 0.0);
        for j in 0..n {
            let t = -0.5 * PI + PI * (j as f64 + 0.5) / n as f64;
            let k = t.tan();
            acc += f.eval(k) * (PI / n as f64) / (t.cos() * t.cos());
        }
        acc /= 2.0 * PI;
        assert!((acc - exact).norm() < 1e-8, "{acc} vs {exact}");
    }

    #[test]
    fn slow_decay_is_rejected() {
        let f = FactoredRational::simple_pole(c(1.0, 0.0), c(0.0, 1.0));
        assert!(f.integrate_real_line().is_err());
    }

    #[test]
    fn reflection_is_an_involution() {
        let f = FactoredRational::constant(c(0.0, 1.0))
            .with_factor(c(0.5, -0.5), -1)
            .with_factor(c(1.0, 0.2), 1)
            .with_factor(c(-2.0, -1.0), -1);
        let g = f.reflected(0.75);
        for k in [-3.0, 0.1, 0.75, 4.2] {
            assert!((g.eval(k) - f.eval(1.5 - k)).norm() < 1e-14);
            assert!((g.reflected(0.75).eval(k) - f.eval(k)).norm() < 1e-14);
        }
    }
}
