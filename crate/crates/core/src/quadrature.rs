//! Gauss rules and phase-space quadrature for Hermite–Fourier fields.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hermite_fourier::{hermite_scaled_values, HermiteFourierField};
use crate::model::PeriodicPotential;

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i+1`); implicit QL.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Vec<f64> {
    let n = d.len();
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

/// Gauss rule for the standard normal measure `e^{-x²/2}/√(2π) dx`.
///
/// Weights are kept as logarithms so rules with thousands of nodes do not
/// underflow; [`GaussHermite::weights`] drops nodes whose weight is below
/// the smallest normal double.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        if n == 1 {
            return Self {
                nodes: vec![0.0],
                log_weights: vec![0.0],
            };
        }
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        let mut nodes = tridiagonal_eigenvalues(vec![0.0; n], off);
        let mut h = vec![0.0; n + 1];
        // Newton polish on H_n with H_n' = √n H_{n-1}; the Gaussian scale cancels.
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                hermite_scaled_values(*x, &mut h);
                let step = h[n] / ((n as f64).sqrt() * h[n - 1]);
                if !step.is_finite() {
                    break;
                }
                *x -= step;
            }
        }
        // symmetrise
        for i in 0..n / 2 {
            let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -a;
            nodes[n - 1 - i] = a;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let log_weights = nodes
            .iter()
            .map(|&x| {
                hermite_scaled_values(x, &mut h[..n]);
                let s: f64 = h[..n].iter().map(|v| v * v).sum();
                -0.5 * x * x - s.ln()
            })
            .collect();
        Self { nodes, log_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `(node, weight)` pairs with representable weights.
    pub fn weights(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.log_weights)
            .filter(|(_, &lw)| lw > -700.0)
            .map(|(&x, &lw)| (x, lw.exp()))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// How the `q` direction is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionWeight {
    /// Plain `dq` over one period.
    Lebesgue,
    /// `e^{-βV(q)} dq / Z_q`, normalised to one.
    Gibbs,
}

/// Tensor rule: Gauss–Hermite in `p` against `ρ̂(p) ∝ e^{-βp²/2}` times the
/// uniform trapezoid in `q`.
#[derive(Debug, Clone)]
pub struct PhaseSpaceQuadrature {
    beta: f64,
    period: f64,
    n_q: usize,
    n_p: usize,
    /// Scaled Hermite abscissae `x = p√β` and weights (sum to 1).
    p_nodes: Vec<f64>,
    p_weights: Vec<f64>,
    q_weights: Vec<f64>,
    /// `cos, sin` of `2π i j / n_q`, row `i`, column `j ≤ m_table`.
    trig: Vec<(f64, f64)>,
    m_table: usize,
}

impl PhaseSpaceQuadrature {
    pub fn new(
        potential: &PeriodicPotential,
        beta: f64,
        n_p: usize,
        n_q: usize,
        weight: PositionWeight,
    ) -> Self {
        let gh = GaussHermite::new(n_p);
        let (p_nodes, p_weights): (Vec<f64>, Vec<f64>) = gh.weights().unzip();
        let period = potential.period();
        let q_weights = match weight {
            PositionWeight::Lebesgue => vec![period / n_q as f64; n_q],
            PositionWeight::Gibbs => {
                let v: Vec<f64> = (0..n_q)
                    .map(|i| potential.evaluate(i as f64 * period / n_q as f64))
                    .collect();
                let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let raw: Vec<f64> = v.iter().map(|x| (-beta * (x - vmin)).exp()).collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / z).collect()
            }
        };
        Self {
            beta,
            period,
            n_q,
            n_p,
            p_nodes,
            p_weights,
            q_weights,
            trig: Vec::new(),
            m_table: 0,
        }
    }

    /// Default rule for fields with `N` Hermite levels and `M` harmonics:
    /// `2N+8` Gauss–Hermite nodes and `max(64, 8M)` trapezoid nodes.
    pub fn for_size(
        potential: &PeriodicPotential,
        beta: f64,
        n_hermite: usize,
        n_fourier: usize,
        weight: PositionWeight,
    ) -> Self {
        Self::new(
            potential,
            beta,
            2 * n_hermite + 8,
            (8 * n_fourier).max(64),
            weight,
        )
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn q_weights(&self) -> &[f64] {
        &self.q_weights
    }

    pub fn p_weights(&self) -> &[f64] {
        &self.p_weights
    }

    /// Rejects fields that the rule would alias.
    pub fn check(&self, field: &HermiteFourierField) -> Result<()> {
        let need_p = 2 * field.n_hermite() + 2;
        if self.n_p < need_p {
            return Err(Error::QuadratureTooCoarse {
                axis: "p",
                needed: need_p,
                got: self.n_p,
            });
        }
        let need_q = 4 * field.n_fourier();
        if self.n_q < need_q {
            return Err(Error::QuadratureTooCoarse {
                axis: "q",
                needed: need_q,
                got: self.n_q,
            });
        }
        Ok(())
    }

    fn ensure_trig(&mut self, m: usize) {
        if self.m_table >= m && !self.trig.is_empty() {
            return;
        }
        let n = self.n_q;
        self.trig = (0..n)
            .flat_map(|i| {
                (0..=m).map(move |j| {
                    let phase = 2.0 * PI * ((i * j) % n) as f64 / n as f64;
                    let (s, c) = phase.sin_cos();
                    (c, s)
                })
            })
            .collect();
        self.m_table = m;
    }

    /// Field values on the grid, indexed `i_q * n_nodes + i_p`.
    pub fn values(&mut self, field: &HermiteFourierField) -> Result<Vec<f64>> {
        self.check(field)?;
        let m = field.n_fourier();
        self.ensure_trig(m);
        let (nq, levels) = (self.n_q, field.n_levels());
        let stride = self.m_table + 1;
        // g_n(q_i), row n
        let mut gq = vec![0.0; levels * nq];
        for n in 0..levels {
            let c = field.level(n);
            for i in 0..nq {
                let row = &self.trig[i * stride..];
                let mut acc = c[0];
                for j in 1..=m {
                    let (cs, sn) = row[j];
                    acc += 2.0 * (c[j] * cs - c[m + j] * sn);
                }
                gq[n * nq + i] = acc;
            }
        }
        let np = self.p_nodes.len();
        let mut out = vec![0.0; nq * np];
        let mut h = vec![0.0; levels];
        for (k, &x) in self.p_nodes.iter().enumerate() {
            hermite_scaled_values(x, &mut h);
            let unscale = (0.25 * x * x).exp();
            for i in 0..nq {
                let mut acc = 0.0;
                for (n, hn) in h.iter().enumerate() {
                    acc += gq[n * nq + i] * hn;
                }
                out[i * np + k] = acc * unscale;
            }
        }
        Ok(out)
    }

    /// Per momentum node, `Σ_n a_n |H_n(p_k)|` with `a_n` the absolute sum of the
    /// Fourier coefficients of level `n`: the magnitude the series reaches
    /// before cancellation, so `ε` times it bounds the rounding error of
    /// [`values`](Self::values) at that node.
    pub fn series_magnitude(&self, field: &HermiteFourierField) -> Vec<f64> {
        let m = field.n_fourier();
        let a: Vec<f64> = (0..field.n_levels())
            .map(|n| {
                let c = field.level(n);
                c[0].abs() + 2.0 * c[1..=2 * m].iter().map(|x| x.abs()).sum::<f64>()
            })
            .collect();
        let mut h = vec![0.0; a.len()];
        self.p_nodes
            .iter()
            .map(|&x| {
                hermite_scaled_values(x, &mut h);
                let unscale = (0.25 * x * x).exp();
                a.iter().zip(&h).map(|(an, hn)| an * hn.abs()).sum::<f64>() * unscale
            })
            .collect()
    }

    /// Density mass of the `p`-marginal at each momentum node.
    pub fn momentum_marginal(&self, density: &[f64]) -> Vec<f64> {
        let np = self.p_nodes.len();
        (0..np)
            .map(|k| {
                self.p_weights[k]
                    * self
                        .q_weights
                        .iter()
                        .enumerate()
                        .map(|(i, wq)| wq * density[i * np + k].abs())
                        .sum::<f64>()
            })
            .collect()
    }

    /// Weighted sum of the pointwise product of the given grid values.
    pub fn integrate_product(&self, factors: &[&[f64]]) -> f64 {
        let np = self.p_nodes.len();
        let mut total = 0.0;
        for (i, wq) in self.q_weights.iter().enumerate() {
            let mut row = 0.0;
            for (k, wp) in self.p_weights.iter().enumerate() {
                let idx = i * np + k;
                row += wp * factors.iter().map(|f| f[idx]).product::<f64>();
            }
            total += wq * row;
        }
        total
    }

    /// [`integrate_product`](Self::integrate_product) over the momentum nodes selected by `mask`.
    pub fn integrate_product_masked(&self, factors: &[&[f64]], mask: &[bool]) -> f64 {
        let np = self.p_nodes.len();
        let mut total = 0.0;
        for (i, wq) in self.q_weights.iter().enumerate() {
            let mut row = 0.0;
            for (k, wp) in self.p_weights.iter().enumerate() {
                if !mask[k] {
                    continue;
                }
                let idx = i * np + k;
                row += wp * factors.iter().map(|f| f[idx]).product::<f64>();
            }
            total += wq * row;
        }
        total
    }

    pub fn inner(&mut self, g: &HermiteFourierField, h: &HermiteFourierField) -> Result<f64> {
        let gv = self.values(g)?;
        let hv = self.values(h)?;
        Ok(self.integrate_product(&[&gv, &hv]))
    }

    pub fn triple(
        &mut self,
        a: &HermiteFourierField,
        b: &HermiteFourierField,
        c: &HermiteFourierField,
    ) -> Result<f64> {
        let av = self.values(a)?;
        let bv = self.values(b)?;
        let cv = self.values(c)?;
        Ok(self.integrate_product(&[&av, &bv, &cv]))
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// `⟨g, h⟩_β = ∫∫ g h ρ̄ dp dq` with `ρ̄ ∝ e^{-β(p²/2 + V(q))}` using
/// `n_p` Gauss–Hermite nodes and `n_q` trapezoid nodes.
pub fn weighted_inner_product(
    g: &HermiteFourierField,
    h: &HermiteFourierField,
    potential: &PeriodicPotential,
    n_p: usize,
    n_q: usize,
) -> Result<f64> {
    let mut quad = PhaseSpaceQuadrature::new(potential, g.beta(), n_p, n_q, PositionWeight::Gibbs);
    quad.inner(g, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_hermite_moments() {
        let gh = GaussHermite::new(12);
        let m = |k: i32| gh.weights().map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(22) - 13749310575.0).abs() / 13749310575.0 < 1e-10); // 21!!
    }

    #[test]
    fn large_rule_is_normalised() {
        let gh = GaussHermite::new(600);
        let total: f64 = gh.weights().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let second: f64 = gh.weights().map(|(x, w)| w * x * x).sum();
        assert!((second - 1.0).abs() < 1e-11);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(7);
        let s: f64 = rule.0.iter().zip(&rule.1).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let i = integrate_composite(|x| x.exp(), 0.0, 1.0, 4, &rule);
        assert!((i - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
