//! Large-friction limit: `dq = (F − V'(q))ds + √(2β⁻¹) dW_s` in the rescaled
//! time `s = t/γ`, so that `U ≈ U_O/γ` and `D ≈ D_O/γ`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{norm, Lu, Matrix};
use crate::error::{Error, Result};
use crate::hermite_fourier::{
    derivative_matrix, derivative_packed, evaluate_packed_on_grid, multiplication_matrix,
    packed_inner, FourierVector, TruncationSpec,
};
use crate::model::{ModelParams, PeriodicPotential};
use crate::quadrature::gauss_legendre;
use crate::transport::solve_transport;

/// Overdamped transport coefficients in units with `γ` scaled out.
#[derive(Debug, Clone, PartialEq)]
pub struct OverdampedResult {
    pub drift: f64,
    /// `β⁻¹∫(1 + φ_O')² ρ_O dq`
    pub diffusion: f64,
    /// `β⁻¹∫(1 + φ_O') ρ_O dq`; equal to `diffusion` only at `F = 0`.
    pub diffusion_linear_form: f64,
    /// Packed Fourier coefficients of `ρ_O`.
    pub density: Vec<f64>,
    /// Packed Fourier coefficients of `φ_O`, mean zero.
    pub phi: Vec<f64>,
    pub density_residual: f64,
    pub cell_residual: f64,
    pub solvability_residual: f64,
}

fn grid_size(n_fourier: usize) -> usize {
    (8 * n_fourier).max(512)
}

/// Fourier–Galerkin solve of `𝓛_O*ρ_O = 0` and `−𝓛_Oφ_O = F − V' − U_O`
/// with `𝓛_O = (F − V')∂_q + β⁻¹∂_q²`.
pub fn solve_overdamped(
    potential: &PeriodicPotential,
    beta: f64,
    force: f64,
    n_fourier: usize,
) -> Result<OverdampedResult> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    if !force.is_finite() {
        return Err(Error::InvalidParameter("force must be finite".into()));
    }
    let l = potential.period();
    let n = 2 * n_fourier + 1;
    let mut b = FourierVector::from_potential(potential, n_fourier)?.derivative();
    b.coeffs_mut().iter_mut().for_each(|c| *c = -*c);
    b.coeffs_mut()[0] += force;
    let drift_op = multiplication_matrix(&b, n_fourier);
    let d = derivative_matrix(n_fourier, l);
    let mut d2 = d.matmul(&d);
    d2.scale(1.0 / beta);

    // 𝓛_O* = −∂_q(b ·) + β⁻¹∂_q²; its constant row vanishes and carries ∫ρ = 1 instead
    let mut fp = d.matmul(&drift_op);
    fp.scale(-1.0);
    fp.add_scaled(&d2, 1.0);
    let mut sys = fp.clone();
    sys.row_mut(0).iter_mut().for_each(|x| *x = 0.0);
    sys[(0, 0)] = l;
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let rho = Lu::factor(&sys)
        .map_err(|_| Error::SingularMatrix)?
        .solve(&rhs);
    let mut r = fp.matvec(&rho);
    r[0] = 0.0;
    let density_residual = norm(&r) / fp.max_abs().max(1.0) / norm(&rho);
    let drift = l * packed_inner(b.coeffs(), &rho);

    // −𝓛_O, bordered by ρ (its left null vector) and the mean-zero row
    let mut gen = drift_op.matmul(&d);
    gen.add_scaled(&d2, 1.0);
    gen.scale(-1.0);
    let mut bordered = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        bordered.row_mut(i)[..n].copy_from_slice(gen.row(i));
        bordered[(i, n)] = if i == 0 { rho[0] } else { 2.0 * rho[i] };
    }
    bordered[(n, 0)] = 1.0;
    let mut cell_rhs = b.coeffs().to_vec();
    cell_rhs[0] -= drift;
    let mut ext = cell_rhs.clone();
    ext.push(0.0);
    let mut phi = Lu::factor(&bordered)
        .map_err(|_| Error::SingularMatrix)?
        .solve(&ext);
    let multiplier = phi.pop().unwrap_or(0.0);
    let solvability_residual = multiplier.abs() * norm(&rho) / norm(&cell_rhs).max(f64::MIN_POSITIVE);
    let mut res = gen.matvec(&phi);
    res.iter_mut().zip(&cell_rhs).for_each(|(a, c)| *a -= c);
    let cell_residual = norm(&res) / norm(&cell_rhs).max(f64::MIN_POSITIVE);

    let m = grid_size(n_fourier);
    let (mut rv, mut gv) = (vec![0.0; m], vec![0.0; m]);
    let mut dphi = vec![0.0; n];
    derivative_packed(&phi, &mut dphi, l);
    evaluate_packed_on_grid(&rho, m, &mut rv);
    evaluate_packed_on_grid(&dphi, m, &mut gv);
    let h = l / m as f64;
    let (mut sq, mut lin) = (0.0, 0.0);
    for (r, g) in rv.iter().zip(&gv) {
        sq += (1.0 + g) * (1.0 + g) * r;
        lin += (1.0 + g) * r;
    }
    Ok(OverdampedResult {
        drift,
        diffusion: sq * h / beta,
        diffusion_linear_form: lin * h / beta,
        density: rho,
        phi,
        density_residual,
        cell_residual,
        solvability_residual,
    })
}

/// `ln|1 − e^{−x}|`, stable for both signs of `x`.
fn ln_abs_one_minus_exp_neg(x: f64) -> f64 {
    if x > 0.0 {
        (-(-x).exp_m1()).ln()
    } else {
        -x + (-x.exp_m1()).ln()
    }
}

/// Closed-form overdamped drift
/// `U_O = β⁻¹L(1 − e^{−βLF}) / ∫₀ᴸ∫₀ᴸ e^{β[Ṽ(q) − Ṽ(q−y)]} dy dq`, `Ṽ = V − Fq`,
/// with the inner integral by composite Gauss–Legendre and exponents shifted
/// by their maximum.
pub fn stratonovich_drift(potential: &PeriodicPotential, beta: f64, force: f64) -> f64 {
    if force == 0.0 {
        return 0.0;
    }
    let l = potential.period();
    let n_q = 512;
    let panels = 64;
    let (x, w) = gauss_legendre(16);
    let hy = l / panels as f64;
    let mut ys = Vec::with_capacity(panels * x.len());
    let mut wy = Vec::with_capacity(panels * x.len());
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * hy;
        for (xi, wi) in x.iter().zip(&w) {
            ys.push(mid + 0.5 * hy * xi);
            wy.push(0.5 * hy * wi);
        }
    }
    let mut exps = vec![0.0; ys.len()];
    let mut logs = Vec::with_capacity(n_q);
    for i in 0..n_q {
        let q = i as f64 * l / n_q as f64;
        let vq = potential.evaluate(q);
        for (e, y) in exps.iter_mut().zip(&ys) {
            *e = beta * (vq - potential.evaluate(q - y) - force * y);
        }
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = exps.iter().zip(&wy).map(|(e, w)| w * (e - top).exp()).sum();
        logs.push(top + s.ln());
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let outer: f64 = logs.iter().map(|v| (v - top).exp()).sum::<f64>() * l / n_q as f64;
    let ln_den = top + outer.ln();
    let ln_num = (l / beta).ln() + ln_abs_one_minus_exp_neg(beta * l * force);
    force.signum() * (ln_num - ln_den).exp()
}

/// `γU`, `γD` against their overdamped limits at one friction.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticPoint {
    pub gamma: f64,
    pub scaled_drift: f64,
    pub scaled_diffusion: f64,
    pub drift_error: f64,
    pub diffusion_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub limit: OverdampedResult,
    pub points: Vec<AsymptoticPoint>,
}

impl AsymptoticReport {
    /// `e(γ_{i+1})/e(γ_i)` for drift and diffusion, in input order.
    pub fn ratios(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .map(|w| {
                (
                    w[1].drift_error / w[0].drift_error,
                    w[1].diffusion_error / w[0].diffusion_error,
                )
            })
            .collect()
    }
}

/// Spectral `γU(γ)`, `γD(γ)` for each parameter set against `U_O`, `D_O`.
/// All sets must share potential, `β` and `F`.
pub fn check_overdamped_asymptotics(
    params: &[ModelParams],
    trunc: &TruncationSpec,
) -> Result<AsymptoticReport> {
    let first = params
        .first()
        .ok_or_else(|| Error::InvalidParameter("no friction values given".into()))?;
    if params
        .iter()
        .any(|p| p.beta != first.beta || p.force != first.force || p.potential != first.potential)
    {
        return Err(Error::InvalidParameter(
            "parameter sets differ in more than the friction".into(),
        ));
    }
    let limit = solve_overdamped(&first.potential, first.beta, first.force, trunc.n_fourier)?;
    let points = params
        .iter()
        .map(|p| {
            let r = solve_transport(p, trunc)?.result;
            let (u, d) = (p.gamma * r.drift, p.gamma * r.d_primary);
            Ok(AsymptoticPoint {
                gamma: p.gamma,
                scaled_drift: u,
                scaled_diffusion: d,
                drift_error: (u - limit.drift).abs(),
                diffusion_error: (d - limit.diffusion).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticReport { limit, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn lifson_jackson(potential: &PeriodicPotential, beta: f64) -> f64 {
        let n = 4096;
        let l = potential.period();
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..n {
            let v = potential.evaluate(i as f64 * l / n as f64);
            a += (beta * v).exp();
            b += (-beta * v).exp();
        }
        let h = l / n as f64;
        l * l / (beta * a * h * b * h)
    }

    #[test]
    fn flat_potential() {
        let flat = PeriodicPotential::flat(1.0).unwrap();
        let r = solve_overdamped(&flat, 2.0, 3.0, 4).unwrap();
        assert!((r.drift - 3.0).abs() < 1e-13);
        assert!((r.diffusion - 0.5).abs() < 1e-13);
        assert!((stratonovich_drift(&flat, 2.0, 3.0) - 3.0).abs() < 1e-12);
        assert!((stratonovich_drift(&flat, 2.0, -0.4) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_tilt() {
        let v = PeriodicPotential::cosine(1.0, 2.0 * PI).unwrap();
        let r = solve_overdamped(&v, 1.0, 0.0, 32).unwrap();
        assert!(r.drift.abs() < 1e-12);
        // β⁻¹/I₀(β)² at β = 1
        assert!((r.diffusion - 0.623_860_6).abs() < 1e-6);
        assert!((r.diffusion - lifson_jackson(&v, 1.0)).abs() < 1e-8 * r.diffusion);
        assert!((r.diffusion_linear_form - r.diffusion).abs() < 1e-10);
        assert_eq!(stratonovich_drift(&v, 1.0, 0.0), 0.0);
    }

    #[test]
    fn galerkin_matches_stratonovich() {
        for v0 in [0.5, 1.0] {
            for beta in [1.0, 5.0] {
                let v = PeriodicPotential::cosine(v0, 1.0).unwrap();
                for force in [0.5, 1.0, 2.0, 4.0, -1.0] {
                    let r = solve_overdamped(&v, beta, force, 48).unwrap();
                    let s = stratonovich_drift(&v, beta, force);
                    assert!((r.drift - s).abs() < 1e-6 * s.abs(), "{v0} {beta} {force}");
                    assert!(r.drift * force > 0.0 && r.diffusion > 0.0);
                    assert!(r.cell_residual < 1e-10 && r.solvability_residual < 1e-10);
                }
            }
        }
    }

    #[test]
    fn stratonovich_handles_large_exponents() {
        let v = PeriodicPotential::cosine(1.0, 1.0).unwrap();
        // nearly deterministic: L / ∫dq/(F − V') = √(F² − (2π)²)
        let u = stratonovich_drift(&v, 200.0, 10.0);
        let det = (100.0 - 4.0 * PI * PI).sqrt();
        assert!((u - det).abs() < 1e-2 * det, "{u}");
        assert!(stratonovich_drift(&v, 200.0, -10.0) < 0.0);
    }
}
