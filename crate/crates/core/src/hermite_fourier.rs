//! Fields expanded in rescaled Hermite polynomials in `p` and Fourier modes in `q`.
//!
//! A real periodic function `g(q) = Σ_{|j|≤M} G^j e^{iω_j q}` is stored in the
//! packed layout `(ξ⁰, ξ¹..ξᴹ, η¹..ηᴹ)` with `G^j = ξʲ + iηʲ`, so that
//! `g(q) = ξ⁰ + 2 Σ_j (ξʲ cos ω_j q − ηʲ sin ω_j q)`.
//!
//! A [`HermiteFourierField`] stacks such vectors, one per Hermite level:
//! `g(q, p) = Σ_n g_n(q) H_n(p)` with `H_n(p) = He_n(p√β)/√(n!)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::dense::Matrix;
use crate::error::{Error, Result};
use crate::model::PeriodicPotential;

/// Closure of the Hermite hierarchy at the top level: `Φ_{N+1} = S_N Φ_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// `S_N = 0`
    #[default]
    Dirichlet,
    /// `S_N = I`
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    /// Highest Hermite level `N`; levels `0..=N` are kept.
    pub n_hermite: usize,
    /// Highest Fourier harmonic `M`.
    pub n_fourier: usize,
    pub closure: Closure,
    /// `p₀` in the basis `H_n(p − p₀)` used by the transport solver. Centring
    /// near the drift keeps the coefficients of a running state small.
    pub momentum_centre: f64,
}

impl TruncationSpec {
    pub fn new(n_hermite: usize, n_fourier: usize, closure: Closure) -> Result<Self> {
        if n_hermite < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 Hermite levels beyond 0, got {n_hermite}"
            )));
        }
        if n_fourier < 1 {
            return Err(Error::InvalidParameter(
                "need at least one Fourier harmonic".into(),
            ));
        }
        Ok(Self {
            n_hermite,
            n_fourier,
            closure,
            momentum_centre: 0.0,
        })
    }

    pub fn dirichlet(n_hermite: usize, n_fourier: usize) -> Result<Self> {
        Self::new(n_hermite, n_fourier, Closure::Dirichlet)
    }

    pub fn with_closure(self, closure: Closure) -> Self {
        Self { closure, ..self }
    }

    pub fn with_hermite(self, n_hermite: usize) -> Self {
        Self { n_hermite, ..self }
    }

    pub fn with_momentum_centre(self, momentum_centre: f64) -> Self {
        Self {
            momentum_centre,
            ..self
        }
    }

    /// Length `2M+1` of one packed Fourier vector.
    pub fn block_size(&self) -> usize {
        2 * self.n_fourier + 1
    }

    pub fn n_levels(&self) -> usize {
        self.n_hermite + 1
    }

    pub fn check_potential(&self, potential: &PeriodicPotential) -> Result<()> {
        if potential.harmonics() > self.n_fourier {
            return Err(Error::HarmonicsExceedTruncation {
                harmonics: potential.harmonics(),
                n_fourier: self.n_fourier,
            });
        }
        Ok(())
    }
}

#[inline]
fn omega(j: usize, period: f64) -> f64 {
    2.0 * PI * j as f64 / period
}

/// Real periodic function in packed `(ξ, η)` form.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVector {
    period: f64,
    coeffs: Vec<f64>,
}

impl FourierVector {
    pub fn zeros(n_fourier: usize, period: f64) -> Self {
        Self {
            period,
            coeffs: vec![0.0; 2 * n_fourier + 1],
        }
    }

    pub fn constant(value: f64, n_fourier: usize, period: f64) -> Self {
        let mut v = Self::zeros(n_fourier, period);
        v.coeffs[0] = value;
        v
    }

    pub fn from_packed(period: f64, coeffs: Vec<f64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "packed length must be odd");
        Self { period, coeffs }
    }

    /// `amp_cos cos(k ω₁ q) + amp_sin sin(k ω₁ q)`
    pub fn harmonic(k: usize, amp_cos: f64, amp_sin: f64, n_fourier: usize, period: f64) -> Self {
        assert!(k >= 1 && k <= n_fourier);
        let mut v = Self::zeros(n_fourier, period);
        v.coeffs[k] = 0.5 * amp_cos;
        v.coeffs[n_fourier + k] = -0.5 * amp_sin;
        v
    }

    pub fn from_potential(potential: &PeriodicPotential, n_fourier: usize) -> Result<Self> {
        if potential.harmonics() > n_fourier {
            return Err(Error::HarmonicsExceedTruncation {
                harmonics: potential.harmonics(),
                n_fourier,
            });
        }
        let mut v = Self::constant(potential.offset(), n_fourier, potential.period());
        for (i, (c, s)) in potential
            .cos_coeffs()
            .iter()
            .zip(potential.sin_coeffs())
            .enumerate()
        {
            v.coeffs[i + 1] = 0.5 * c;
            v.coeffs[n_fourier + i + 1] = -0.5 * s;
        }
        Ok(v)
    }

    pub fn n_fourier(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn evaluate(&self, q: f64) -> f64 {
        evaluate_packed(&self.coeffs, self.period, q)
    }

    /// Multiplication by `iω_j` in complex form.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.n_fourier(), self.period);
        derivative_packed(&self.coeffs, &mut out.coeffs, self.period);
        out
    }

    /// Product with another real trigonometric polynomial, truncated to `M` of `self`.
    pub fn multiply(&self, w: &FourierVector) -> Self {
        let mut out = Self::zeros(self.n_fourier(), self.period);
        multiply_packed(w.coeffs(), &self.coeffs, &mut out.coeffs);
        out
    }

    /// `∫₀ᴸ self·other dq`
    pub fn integral_product(&self, other: &FourierVector) -> f64 {
        self.period * packed_inner(&self.coeffs, &other.coeffs)
    }
}

/// `2 aᵀb − a₀b₀`: the real Fourier inner product divided by `L`.
pub fn packed_inner(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    2.0 * s - a[0] * b[0]
}

pub fn evaluate_packed(coeffs: &[f64], period: f64, q: f64) -> f64 {
    let m = coeffs.len() / 2;
    let w1 = 2.0 * PI / period;
    let (s1, c1) = (w1 * q).sin_cos();
    // cos/sin of jω₁q by rotation; drift is negligible at the sizes used here.
    let (mut c, mut s) = (1.0, 0.0);
    let mut acc = coeffs[0];
    for j in 1..=m {
        let (cn, sn) = (c * c1 - s * s1, s * c1 + c * s1);
        c = cn;
        s = sn;
        acc += 2.0 * (coeffs[j] * c - coeffs[m + j] * s);
    }
    acc
}

/// Values of a packed vector on the uniform grid `q_i = i L / n`.
pub fn evaluate_packed_on_grid(coeffs: &[f64], n: usize, out: &mut [f64]) {
    let m = coeffs.len() / 2;
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let mut acc = coeffs[0];
        for j in 1..=m {
            // exact phase reduction keeps this independent of the period
            let phase = 2.0 * PI * ((i * j) % n) as f64 / n as f64;
            let (s, c) = phase.sin_cos();
            acc += 2.0 * (coeffs[j] * c - coeffs[m + j] * s);
        }
        *o = acc;
    }
}

pub fn derivative_packed(src: &[f64], dst: &mut [f64], period: f64) {
    let m = src.len() / 2;
    dst[0] = 0.0;
    for j in 1..=m {
        let w = omega(j, period);
        let (xi, eta) = (src[j], src[m + j]);
        dst[j] = -w * eta;
        dst[m + j] = w * xi;
    }
}

/// `dst = w · g` truncated to the length of `g`; `w` may have any number of harmonics.
pub fn multiply_packed(w: &[f64], g: &[f64], dst: &mut [f64]) {
    let m = g.len() / 2;
    let kw = w.len() / 2;
    let wc = |k: isize| -> (f64, f64) {
        let ka = k.unsigned_abs();
        if ka > kw {
            return (0.0, 0.0);
        }
        let (re, im) = (w[ka], if ka == 0 { 0.0 } else { w[kw + ka] });
        if k >= 0 {
            (re, im)
        } else {
            (re, -im)
        }
    };
    let gc = |j: isize| -> (f64, f64) {
        let ja = j.unsigned_abs();
        if ja > m {
            return (0.0, 0.0);
        }
        let (re, im) = (g[ja], if ja == 0 { 0.0 } else { g[m + ja] });
        if j >= 0 {
            (re, im)
        } else {
            (re, -im)
        }
    };
    let kw_i = kw as isize;
    for j in 0..=m as isize {
        let (mut re, mut im) = (0.0, 0.0);
        for k in -kw_i..=kw_i {
            let (a, b) = wc(k);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let (c, d) = gc(j - k);
            re += a * c - b * d;
            im += a * d + b * c;
        }
        let ju = j as usize;
        dst[ju] = re;
        if ju > 0 {
            dst[m + ju] = im;
        }
    }
}

/// Matrix of `∂_q` on packed vectors with `M` harmonics.
pub fn derivative_matrix(n_fourier: usize, period: f64) -> Matrix {
    let m = n_fourier;
    let mut d = Matrix::zeros(2 * m + 1, 2 * m + 1);
    for j in 1..=m {
        let w = omega(j, period);
        d[(j, m + j)] = -w;
        d[(m + j, j)] = w;
    }
    d
}

/// Matrix of multiplication by `w` (Galerkin-truncated) on packed vectors with `M` harmonics.
pub fn multiplication_matrix(w: &FourierVector, n_fourier: usize) -> Matrix {
    let n = 2 * n_fourier + 1;
    let mut out = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[c] = 1.0;
        multiply_packed(w.coeffs(), &e, &mut col);
        for (r, v) in col.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    out
}

/// Rescaled Hermite polynomial `H_n(p) = He_n(p√β)/√(n!)`.
pub fn hermite_eval(n: usize, p: f64, beta: f64) -> f64 {
    let x = p * beta.sqrt();
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = H_n(x)·e^{-x²/4}` for `n < out.len()` where `x = p√β`.
///
/// The Gaussian factor keeps the recurrence in range for large `x`.
pub fn hermite_scaled_values(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for k in 1..out.len() - 1 {
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// Coefficient array `g_n(q)` for `n = 0..=N` on a common Fourier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteFourierField {
    beta: f64,
    period: f64,
    n_fourier: usize,
    n_levels: usize,
    data: Vec<f64>,
}

impl HermiteFourierField {
    pub fn zeros(n_hermite: usize, n_fourier: usize, period: f64, beta: f64) -> Self {
        let n_levels = n_hermite + 1;
        Self {
            beta,
            period,
            n_fourier,
            n_levels,
            data: vec![0.0; n_levels * (2 * n_fourier + 1)],
        }
    }

    pub fn for_truncation(trunc: &TruncationSpec, period: f64, beta: f64) -> Self {
        Self::zeros(trunc.n_hermite, trunc.n_fourier, period, beta)
    }

    pub fn constant(value: f64, n_hermite: usize, n_fourier: usize, period: f64, beta: f64) -> Self {
        let mut f = Self::zeros(n_hermite, n_fourier, period, beta);
        f.data[0] = value;
        f
    }

    /// The momentum `p = β^{-1/2} H₁`.
    pub fn momentum_field(n_hermite: usize, n_fourier: usize, period: f64, beta: f64) -> Self {
        let mut f = Self::zeros(n_hermite, n_fourier, period, beta);
        f.level_mut(1)[0] = 1.0 / beta.sqrt();
        f
    }

    pub fn from_levels(levels: &[FourierVector], beta: f64) -> Self {
        assert!(!levels.is_empty());
        let n_fourier = levels[0].n_fourier();
        let period = levels[0].period();
        let mut f = Self::zeros(levels.len() - 1, n_fourier, period, beta);
        for (n, lv) in levels.iter().enumerate() {
            assert_eq!(lv.n_fourier(), n_fourier, "levels must share M");
            f.level_mut(n).copy_from_slice(lv.coeffs());
        }
        f
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_fourier(&self) -> usize {
        self.n_fourier
    }

    pub fn n_hermite(&self) -> usize {
        self.n_levels - 1
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn block_size(&self) -> usize {
        2 * self.n_fourier + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let b = self.block_size();
        &self.data[n * b..(n + 1) * b]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let b = self.block_size();
        &mut self.data[n * b..(n + 1) * b]
    }

    pub fn level_vector(&self, n: usize) -> FourierVector {
        FourierVector::from_packed(self.period, self.level(n).to_vec())
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n_fourier == other.n_fourier && self.n_levels == other.n_levels
    }

    /// Copy with `n_hermite` levels, zero-padding or dropping the top.
    pub fn with_levels(&self, n_hermite: usize) -> Self {
        let mut out = Self::zeros(n_hermite, self.n_fourier, self.period, self.beta);
        let keep = self.n_levels.min(n_hermite + 1) * self.block_size();
        out.data[..keep].copy_from_slice(&self.data[..keep]);
        out
    }

    pub fn evaluate(&self, q: f64, p: f64) -> f64 {
        let x = p * self.beta.sqrt();
        let (mut prev, mut cur) = (0.0, 1.0);
        let mut acc = 0.0;
        for n in 0..self.n_levels {
            acc += evaluate_packed(self.level(n), self.period, q) * cur;
            let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
            prev = cur;
            cur = next;
        }
        acc
    }

    /// `a⁺ = −∂_p + βp`: level `n+1` receives `√(β(n+1))` times level `n`;
    /// the overflow past the top level is dropped.
    pub fn raise(&self) -> Self {
        let mut out = Self::zeros(self.n_hermite(), self.n_fourier, self.period, self.beta);
        for n in 0..self.n_levels - 1 {
            let c = (self.beta * (n + 1) as f64).sqrt();
            let (src, dst) = (self.level(n), out.level_mut(n + 1));
            dst.iter_mut().zip(src).for_each(|(d, s)| *d = c * s);
        }
        out
    }

    /// `a⁻ = ∂_p`: level `n−1` receives `√(βn)` times level `n`.
    pub fn lower(&self) -> Self {
        let mut out = Self::zeros(self.n_hermite(), self.n_fourier, self.period, self.beta);
        for n in 1..self.n_levels {
            let c = (self.beta * n as f64).sqrt();
            let (src, dst) = (self.level(n), out.level_mut(n - 1));
            dst.iter_mut().zip(src).for_each(|(d, s)| *d = c * s);
        }
        out
    }

    /// Multiplication by `p`, dropping the overflow past the top level.
    pub fn momentum(&self) -> Self {
        let mut out = Self::zeros(self.n_hermite(), self.n_fourier, self.period, self.beta);
        let s = 1.0 / self.beta.sqrt();
        for n in 0..self.n_levels {
            if n + 1 < self.n_levels {
                let c = s * ((n + 1) as f64).sqrt();
                let src = self.level(n).to_vec();
                out.level_mut(n + 1)
                    .iter_mut()
                    .zip(&src)
                    .for_each(|(d, v)| *d += c * v);
            }
            if n > 0 {
                let c = s * (n as f64).sqrt();
                let src = self.level(n).to_vec();
                out.level_mut(n - 1)
                    .iter_mut()
                    .zip(&src)
                    .for_each(|(d, v)| *d += c * v);
            }
        }
        out
    }

    pub fn q_derivative(&self) -> Self {
        let mut out = Self::zeros(self.n_hermite(), self.n_fourier, self.period, self.beta);
        for n in 0..self.n_levels {
            let src = self.level(n).to_vec();
            derivative_packed(&src, out.level_mut(n), self.period);
        }
        out
    }

    /// Pointwise product with a function of `q` only.
    pub fn multiply_q(&self, w: &FourierVector) -> Self {
        let mut out = Self::zeros(self.n_hermite(), self.n_fourier, self.period, self.beta);
        for n in 0..self.n_levels {
            let src = self.level(n).to_vec();
            multiply_packed(w.coeffs(), &src, out.level_mut(n));
        }
        out
    }

    /// `self += factor · other`
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        assert!(self.same_shape(other), "field shapes differ");
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += factor * b);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= factor);
        out
    }

    /// Adds a constant function.
    pub fn add_constant(&mut self, c: f64) {
        self.data[0] += c;
    }

    /// Coefficient 2-norm weighted like the `L²(dq)` inner product.
    pub fn level_norm(&self, n: usize) -> f64 {
        packed_inner(self.level(n), self.level(n)).max(0.0).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (0..self.n_levels)
            .map(|n| packed_inner(self.level(n), self.level(n)))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `‖top level‖ / ‖field‖`, the truncation diagnostic.
    pub fn top_level_ratio(&self) -> f64 {
        let total = self.norm();
        if total == 0.0 {
            0.0
        } else {
            self.level_norm(self.n_hermite()) / total
        }
    }

    /// Image under `(q, p) → (−q, −p)`.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        let m = self.n_fourier;
        for n in 0..self.n_levels {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let lv = out.level_mut(n);
            lv[..=m].iter_mut().for_each(|x| *x *= sign);
            lv[m + 1..].iter_mut().for_each(|x| *x *= -sign);
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Largest deviation from reflection parity `+1` (even) or `−1` (odd),
    /// relative to the field's largest coefficient.
    pub fn parity_defect(&self, parity: f64) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let r = self.reflected();
        r.data
            .iter()
            .zip(&self.data)
            .fold(0.0, |a, (x, y)| a.max((x - parity * y).abs()))
            / scale
    }
}
