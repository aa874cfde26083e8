//! Drift and diffusion from the stationary density and the cell problem,
//! both solved by the Hermite–Fourier block recursion.

mod blocks;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub use blocks::{build_blocks, downward_recursion, BlockSet, Operator, Recursion};

use crate::dense::{dot, norm, Lu, Matrix};
use crate::error::{Error, Result};
use crate::hermite_fourier::{packed_inner, Closure, HermiteFourierField, TruncationSpec};
use crate::model::ModelParams;
use crate::quadrature::{PhaseSpaceQuadrature, PositionWeight};

/// Largest admissible component of the cell-problem right-hand side along
/// the left null vector, relative to its norm.
pub const SOLVABILITY_TOL: f64 = 1e-6;

/// Momentum nodes whose density marginal falls below this share of the peak
/// are left out of the integration-by-parts form.
pub const DENSITY_SUPPORT_REL: f64 = 1e-17;

const NOISE_TO_SIGNAL: f64 = 100.0;


/// `ρ_β(q, p) = ρ̂(p − p₀) Σ_n R_n(q) H_n(p − p₀)` together with the drift it implies.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    pub r: HermiteFourierField,
    pub drift: f64,
    /// `p₀`, the centre of the momentum basis.
    pub momentum_centre: f64,
    /// `|L·R₀⁰ − 1|`
    pub normalization_residual: f64,
}

impl StationaryDensity {
    /// `∫∫ g ρ_β dp dq` for a field `g` on the same basis.
    pub fn expectation(&self, g: &HermiteFourierField) -> f64 {
        let l = self.r.period();
        (0..=g.n_hermite().min(self.r.n_hermite()))
            .map(|n| packed_inner(self.r.level(n), g.level(n)))
            .sum::<f64>()
            * l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub drift: f64,
    /// Packed-coefficient form `∫(p − U)φρ_β`.
    pub d_primary: f64,
    /// Integration-by-parts form `γβ⁻¹∫(∂_pφ)²ρ_β`.
    pub d_ibp: f64,
    /// `‖Φ_N‖/‖Φ‖`
    pub phi_top_ratio: f64,
    /// `‖R_N‖/‖R‖`
    pub density_top_ratio: f64,
    /// Share of the highest Fourier harmonic in `Φ` and `R`, whichever is larger.
    pub fourier_tail: f64,
    /// Rounding-noise estimate of `d_ibp`: far out in `p` the truncated
    /// series cannot be evaluated accurately in double precision.
    pub d_ibp_noise: f64,
    pub solvability_residual: f64,
    pub n_hermite: usize,
    pub n_fourier: usize,
    pub closure: Closure,
}

impl TransportResult {
    /// Largest Hermite truncation diagnostic.
    pub fn top_ratio(&self) -> f64 {
        self.phi_top_ratio.max(self.density_top_ratio)
    }
}

/// Coefficient growth `max_n ‖R_n‖ / ‖R_0‖` up to which a basis centred on
/// one of the two states is kept. Beyond it rounding has eaten more than
/// about ten digits and the midpoint between the states is tried as well.
pub const CENTRE_GROWTH_LIMIT: f64 = 1e6;

/// `max_n ‖R_n‖ / ‖R_0‖`. About a centre at distance `Δp` from a peak the
/// coefficients grow like `exp(β Δp² / 2)`.
pub fn coefficient_growth(r: &HermiteFourierField) -> f64 {
    let g = (0..=r.n_hermite()).map(|n| r.level_norm(n)).fold(0.0, f64::max) / r.level_norm(0);
    if g.is_finite() {
        g
    } else {
        f64::INFINITY
    }
}

/// Stationary density in the basis centred at `0` (locked state) or `F/γ`
/// (running state), whichever has the smaller [`coefficient_growth`]. When
/// both exceed [`CENTRE_GROWTH_LIMIT`], as in the bistable range, the midpoint
/// `F/2γ` is used if it does better.
pub fn centred_density(params: &ModelParams, trunc: &TruncationSpec) -> Result<StationaryDensity> {
    let run = params.force / params.gamma;
    let solve = |p0: f64| solve_stationary_fp(params, &trunc.with_momentum_centre(p0));
    if run == 0.0 {
        return solve(0.0);
    }
    let better = |a: Result<StationaryDensity>, b: Result<StationaryDensity>| match (a, b) {
        (Ok(x), Ok(y)) => Ok(if coefficient_growth(&y.r) < coefficient_growth(&x.r) { y } else { x }),
        (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
        (Err(e), Err(_)) => Err(e),
    };
    let best = better(solve(0.0), solve(run));
    match &best {
        Ok(d) if coefficient_growth(&d.r) <= CENTRE_GROWTH_LIMIT => best,
        _ => better(best, solve(0.5 * run)),
    }
}

/// Centre chosen by [`centred_density`] at `trunc`.
pub fn choose_momentum_centre(params: &ModelParams, trunc: &TruncationSpec) -> Result<f64> {
    Ok(centred_density(params, trunc)?.momentum_centre)
}

/// Stationary density of the tilted dynamics, normalised to `∫ρ_β = 1`.
pub fn solve_stationary_fp(params: &ModelParams, trunc: &TruncationSpec) -> Result<StationaryDensity> {
    trunc.check_potential(&params.potential)?;
    let p0 = trunc.momentum_centre;
    let blocks = BlockSet::centred(params, trunc.n_fourier, Operator::FokkerPlanck, p0)?;
    let rec = Recursion::new(&blocks, trunc, false)?;
    stationary_from_recursion(params, &blocks, &rec, p0)
}

fn stationary_from_recursion(
    params: &ModelParams,
    blocks: &BlockSet,
    rec: &Recursion,
    p0: f64,
) -> Result<StationaryDensity> {
    let l = params.period();
    let b = blocks.block_size();
    let mut a0 = rec.level0_matrix(blocks);
    // The ξ⁰ row of −D S₀ vanishes identically; normalisation takes its place.
    let row = a0.row_mut(0);
    row.iter_mut().for_each(|x| *x = 0.0);
    row[0] = 1.0;
    let mut rhs = vec![0.0; b];
    rhs[0] = 1.0 / l;
    let lu = Lu::factor(&a0).map_err(|_| Error::NullSpace("stationary density"))?;
    let r0 = lu.solve(&rhs);
    let zeros = vec![vec![0.0; b]; rec.n_hermite()];
    let r = rec.expand(&r0, &zeros, l, params.beta);
    let drift = p0 + l * r.level(1)[0] / params.beta.sqrt();
    Ok(StationaryDensity {
        normalization_residual: (l * r.level(0)[0] - 1.0).abs(),
        r,
        drift,
        momentum_centre: p0,
    })
}

/// Unit left null vector of a matrix with a one-dimensional kernel.
pub(crate) fn left_null_vector(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut shifted = a.clone();
    shifted.add_diagonal(1e-10 * scale);
    let lu = Lu::factor(&shifted).map_err(|_| Error::NullSpace("left null vector"))?;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..4 {
        let w = lu.solve_transpose(&v);
        let nw = norm(&w);
        if !(nw.is_finite() && nw > 0.0) {
            return Err(Error::NullSpace("left null vector"));
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    let mut atv = vec![0.0; a.cols()];
    a.matvec_transpose_add(&v, &mut atv);
    if norm(&atv) > 1e-8 * scale {
        return Err(Error::NullSpace("no left null vector"));
    }
    Ok(v)
}

/// Solves `A x = b` for a matrix with the constants `e₀` as kernel,
/// through `[[A, l], [e₀ᵀ, 0]]` with `l` the left null vector.
/// Returns `x` with `x₀ = 0` and the solvability defect `|lᵀb|`.
pub(crate) fn bordered_level0_solve(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.rows();
    let l = left_null_vector(a)?;
    let mut m = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        m.row_mut(i)[..n].copy_from_slice(a.row(i));
        m[(i, n)] = l[i];
    }
    m[(n, 0)] = 1.0;
    let lu = Lu::factor(&m).map_err(|_| Error::NullSpace("kernel is not one-dimensional"))?;
    let mut rhs = b.to_vec();
    rhs.push(0.0);
    let mut x = lu.solve(&rhs);
    x.truncate(n);
    Ok((x, dot(&l, b).abs()))
}

/// Solution `Φ` of `−𝓛φ = p − U`, centred so that `∫φρ_β = 0`, and the
/// solvability residual of the level-0 system.
pub fn solve_cell_problem(
    params: &ModelParams,
    trunc: &TruncationSpec,
    density: &StationaryDensity,
) -> Result<(HermiteFourierField, f64)> {
    let blocks = build_blocks(params, trunc)?;
    let rec = downward_recursion(&blocks, trunc)?;
    cell_from_recursion(params, trunc, &blocks, &rec, density)
}

fn cell_from_recursion(
    params: &ModelParams,
    trunc: &TruncationSpec,
    blocks: &BlockSet,
    rec: &Recursion,
    density: &StationaryDensity,
) -> Result<(HermiteFourierField, f64)> {
    assert_eq!(density.r.n_hermite(), trunc.n_hermite, "density truncation differs");
    assert_eq!(density.momentum_centre, trunc.momentum_centre, "density basis differs");
    let l = params.period();
    let beta = params.beta;
    let shifted_drift = density.drift - trunc.momentum_centre;
    let mut rhs = HermiteFourierField::for_truncation(trunc, l, beta);
    rhs.level_mut(0)[0] = beta.sqrt() * shifted_drift;
    rhs.level_mut(1)[0] = -1.0;
    let (offsets, b0) = rec.reduce(blocks, &rhs)?;
    let a0 = rec.level0_matrix(blocks);
    let (x0, defect) = bordered_level0_solve(&a0, &b0)?;
    // b₀ is the difference of these two terms, which cancel when U is exact
    let scale = beta.sqrt() * shifted_drift.abs() + norm(&b0.iter().zip(rhs.level(0)).map(|(x, y)| x - y).collect::<Vec<_>>());
    let residual = if scale > 0.0 { defect / scale } else { defect };
    if residual > SOLVABILITY_TOL {
        return Err(Error::Solvability {
            residual,
            tolerance: SOLVABILITY_TOL,
        });
    }
    let mut phi = rec.expand(&x0, &offsets, l, beta);
    let centre = density.expectation(&phi);
    phi.level_mut(0)[0] -= centre;
    Ok((phi, residual))
}

fn fourier_tail(field: &HermiteFourierField) -> f64 {
    let m = field.n_fourier();
    let total = field.norm();
    if total == 0.0 {
        return 0.0;
    }
    let top: f64 = (0..field.n_levels())
        .map(|n| {
            let lv = field.level(n);
            2.0 * (lv[m] * lv[m] + lv[2 * m] * lv[2 * m])
        })
        .sum();
    top.sqrt() / total
}

/// Momentum nodes used by the integration-by-parts form, and an estimate of
/// the rounding noise in the result.
///
/// Far out in `p` a truncated Hermite series is a sum of huge terms that
/// cancel, so its value there is rounding noise. Nodes without density mass
/// are skipped, as are nodes whose estimated noise exceeds `NOISE_TO_SIGNAL`
/// times their own contribution. The returned estimate sums the noise of the
/// kept nodes.
fn ibp_nodes(
    quad: &PhaseSpaceQuadrature,
    rv: &[f64],
    dv: &[f64],
    dphi: &HermiteFourierField,
    r: &HermiteFourierField,
) -> (Vec<bool>, f64) {
    let marginal = quad.momentum_marginal(rv);
    let peak = marginal
        .iter()
        .cloned()
        .filter(|m| m.is_finite())
        .fold(0.0, f64::max);
    let (md, mr) = (quad.series_magnitude(dphi), quad.series_magnitude(r));
    let np = marginal.len();
    let wq = quad.q_weights();
    let wp = quad.p_weights();
    let mut noise = 0.0;
    let mask = (0..np)
        .map(|k| {
            let m = marginal[k];
            if !(m.is_finite() && m >= DENSITY_SUPPORT_REL * peak) {
                return false;
            }
            let (dd, dr) = (f64::EPSILON * md[k], f64::EPSILON * mr[k]);
            let (mut signal, mut err) = (0.0, 0.0);
            for (i, w) in wq.iter().enumerate() {
                let (a, b) = (dv[i * np + k].abs(), rv[i * np + k].abs());
                signal += w * a * a * b;
                err += w * ((2.0 * a + dd) * dd * b + a * a * dr);
            }
            let keep = err.is_finite() && signal.is_finite() && err <= NOISE_TO_SIGNAL * signal;
            if keep {
                noise += wp[k] * err;
            }
            keep
        })
        .collect();
    (mask, noise)
}

/// Both diffusion formulas from a density and a cell-problem solution on the same basis.
pub fn compute_diffusion(
    density: &StationaryDensity,
    phi: &HermiteFourierField,
    params: &ModelParams,
) -> Result<TransportResult> {
    let r = &density.r;
    let n_top = r.n_hermite();
    let l = params.period();
    let beta = params.beta;
    let mut flux = 0.0;
    for n in 0..n_top {
        let c = ((n + 1) as f64 / beta).sqrt();
        flux += c * (packed_inner(r.level(n + 1), phi.level(n)) + packed_inner(r.level(n), phi.level(n + 1)));
    }
    let d_primary = l * flux - (density.drift - density.momentum_centre) * density.expectation(phi);

    let dphi = phi.lower();
    let mut quad = PhaseSpaceQuadrature::for_size(
        &params.potential,
        beta,
        n_top,
        phi.n_fourier(),
        PositionWeight::Lebesgue,
    );
    let rv = quad.values(r)?;
    let dv = quad.values(&dphi)?;
    let (mask, noise) = ibp_nodes(&quad, &rv, &dv, &dphi, r);
    let d_ibp = params.gamma / beta * quad.integrate_product_masked(&[&dv, &dv, &rv], &mask);
    let d_ibp_noise = params.gamma / beta * noise;

    Ok(TransportResult {
        drift: density.drift,
        d_primary,
        d_ibp,
        phi_top_ratio: phi.top_level_ratio(),
        density_top_ratio: r.top_level_ratio(),
        fourier_tail: fourier_tail(phi).max(fourier_tail(r)),
        d_ibp_noise,
        solvability_residual: 0.0,
        n_hermite: n_top,
        n_fourier: phi.n_fourier(),
        closure: Closure::Dirichlet,
    })
}

/// Everything a single transport solve produces.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub density: StationaryDensity,
    pub phi: HermiteFourierField,
    pub result: TransportResult,
}

/// Stationary density, cell problem and diffusion at one truncation.
pub fn solve_transport(params: &ModelParams, trunc: &TruncationSpec) -> Result<TransportSolution> {
    let density = solve_stationary_fp(params, trunc)?;
    transport_from_density(params, trunc, density)
}

fn transport_from_density(
    params: &ModelParams,
    trunc: &TruncationSpec,
    density: StationaryDensity,
) -> Result<TransportSolution> {
    let (phi, residual) = solve_cell_problem(params, trunc, &density)?;
    let mut result = compute_diffusion(&density, &phi, params)?;
    result.solvability_residual = residual;
    result.closure = trunc.closure;
    Ok(TransportSolution {
        density,
        phi,
        result,
    })
}

/// As [`solve_transport_adaptive`], choosing the momentum centre afresh at
/// every `N` (see [`centred_density`]); `trunc.momentum_centre` is ignored.
/// A failed solvability check at a truncation below `max_hermite` is taken
/// as a truncation effect and `N` is doubled.
pub fn solve_transport_auto(
    params: &ModelParams,
    trunc: &TruncationSpec,
    tol: f64,
    max_hermite: usize,
) -> Result<TransportSolution> {
    let mut t = *trunc;
    loop {
        let last = t.n_hermite >= max_hermite;
        let density = centred_density(params, &t)?;
        let centred = t.with_momentum_centre(density.momentum_centre);
        match transport_from_density(params, &centred, density) {
            Ok(sol) => {
                let ratio = sol.result.top_ratio();
                if ratio <= tol {
                    return Ok(sol);
                }
                if last {
                    return Err(Error::Unconverged {
                        n_hermite: t.n_hermite,
                        ratio,
                    });
                }
            }
            Err(e @ Error::Solvability { .. }) if last => return Err(e),
            Err(Error::Solvability { .. }) => {}
            Err(e) => return Err(e),
        }
        t = t.with_hermite((2 * t.n_hermite).min(max_hermite));
    }
}

/// Doubles `N` from `trunc.n_hermite` until the top-level ratio of both
/// `Φ` and `R` is at most `tol`, giving up beyond `max_hermite`.
pub fn solve_transport_adaptive(
    params: &ModelParams,
    trunc: &TruncationSpec,
    tol: f64,
    max_hermite: usize,
) -> Result<TransportSolution> {
    let mut t = *trunc;
    loop {
        let sol = solve_transport(params, &t)?;
        let ratio = sol.result.top_ratio();
        if ratio <= tol {
            return Ok(sol);
        }
        if t.n_hermite >= max_hermite {
            return Err(Error::Unconverged {
                n_hermite: t.n_hermite,
                ratio,
            });
        }
        t = t.with_hermite((2 * t.n_hermite).min(max_hermite));
    }
}

/// Doubles `N` until `U`, `D_primary` and `D_ibp` each move by at most
/// `rel_tol` (relative to `max(|value|, reference)`) between successive
/// truncations and the top-level ratio is at most `top_tol`.
/// The reference scales are `U_L` for the drift and `D_L` for diffusion.
pub fn solve_transport_converged(
    params: &ModelParams,
    trunc: &TruncationSpec,
    rel_tol: f64,
    top_tol: f64,
    max_hermite: usize,
) -> Result<TransportSolution> {
    let scales = params.reference_scales();
    let u_ref = scales.free_drift.abs().max(scales.free_diffusion * params.beta);
    let d_ref = scales.free_diffusion;
    let close = |a: f64, b: f64, r: f64| (a - b).abs() <= rel_tol * a.abs().max(r);
    let mut t = *trunc;
    let mut prev: Option<TransportResult> = None;
    loop {
        let sol = solve_transport(params, &t)?;
        let r = &sol.result;
        if let Some(p) = &prev {
            if r.top_ratio() <= top_tol
                && close(r.drift, p.drift, u_ref)
                && close(r.d_primary, p.d_primary, d_ref)
                && close(r.d_ibp, p.d_ibp, d_ref)
            {
                return Ok(sol);
            }
        }
        if t.n_hermite >= max_hermite {
            return Err(Error::Unconverged {
                n_hermite: t.n_hermite,
                ratio: r.top_ratio(),
            });
        }
        prev = Some(sol.result);
        t = t.with_hermite((2 * t.n_hermite).min(max_hermite));
    }
}

/// Truncated operator residual `‖√β 𝓛Φ − √β(U − p)‖` relative to `‖Φ‖`.
pub fn cell_residual(params: &ModelParams, trunc: &TruncationSpec, phi: &HermiteFourierField, drift: f64) -> Result<f64> {
    let blocks = build_blocks(params, trunc)?;
    let mut out = blocks.apply(phi, trunc.closure);
    out.level_mut(0)[0] -= params.beta.sqrt() * (drift - trunc.momentum_centre);
    out.level_mut(1)[0] += 1.0;
    Ok(out.norm() / phi.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicPotential;
    use core::f64::consts::PI;

    fn free(gamma: f64, beta: f64, force: f64) -> ModelParams {
        ModelParams::new(gamma, beta, force, PeriodicPotential::flat(2.0 * PI).unwrap()).unwrap()
    }

    fn washboard(force: f64) -> ModelParams {
        ModelParams::new(1.0, 5.0, force, PeriodicPotential::cosine(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn free_particle_density_is_shifted_gaussian() {
        let p = free(1.0, 1.0, 1.0);
        let t = TruncationSpec::dirichlet(30, 2).unwrap();
        let rho = solve_stationary_fp(&p, &t).unwrap();
        let mut fact = 1.0;
        for n in 0..=12 {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = 1.0 / (2.0 * PI) / fact.sqrt();
            assert!((rho.r.level(n)[0] - expect).abs() < 1e-12, "level {n}");
        }
        assert!((rho.drift - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_particle_transport() {
        for &(g, b, f) in &[(1.0, 1.0, 1.0), (2.0, 5.0, 0.3), (0.1, 1.0, 0.05), (10.0, 1.0, 2.0)] {
            let t = TruncationSpec::dirichlet(40, 2).unwrap();
            let sol = solve_transport(&free(g, b, f), &t).unwrap();
            let r = sol.result;
            assert!((r.drift - f / g).abs() < 1e-10, "{r:?}");
            assert!((r.d_primary - 1.0 / (b * g)).abs() < 1e-10, "{r:?}");
            assert!((r.d_ibp - 1.0 / (b * g)).abs() < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn free_particle_cell_solution() {
        let p = free(1.0, 1.0, 1.0);
        let t = TruncationSpec::dirichlet(20, 2).unwrap();
        let sol = solve_transport(&p, &t).unwrap();
        // φ = (p − U)/γ, centred
        assert!((sol.phi.level(1)[0] - 1.0).abs() < 1e-12);
        assert!((sol.phi.level(0)[0] + 1.0).abs() < 1e-12);
        assert!(sol.phi.level(2).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn equilibrium_density_is_gibbs() {
        let p = washboard(0.0);
        let t = TruncationSpec::dirichlet(40, 24).unwrap();
        let rho = solve_stationary_fp(&p, &t).unwrap();
        assert!(rho.drift.abs() < 1e-10);
        let r0 = rho.r.level_vector(0);
        let z = r0.evaluate(0.0) * (5.0f64).exp();
        for &q in &[0.1, 0.3, 0.5, 0.77] {
            let gibbs = (-5.0 * (2.0 * PI * q).cos()).exp();
            assert!((r0.evaluate(q) - z * gibbs).abs() < 1e-9 * z * 150.0, "q = {q}");
        }
        let r0n = rho.r.level_norm(0);
        for n in 1..=rho.r.n_hermite() {
            assert!(rho.r.level_norm(n) <= 1e-8 * r0n);
        }
    }

    #[test]
    fn washboard_formulas_agree() {
        let p = washboard(2.0);
        let t = TruncationSpec::dirichlet(40, 32).unwrap();
        let sol = solve_transport_converged(&p, &t, 1e-9, 1e-8, 1280).unwrap();
        let r = &sol.result;
        assert!((r.d_primary - r.d_ibp).abs() <= 1e-6 * 0.2, "{r:?}");
        let t = TruncationSpec::dirichlet(r.n_hermite, 32).unwrap();
        let res = cell_residual(&p, &t, &sol.phi, r.drift).unwrap();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn closures_agree() {
        let p = washboard(1.0);
        let t = TruncationSpec::dirichlet(320, 32).unwrap();
        let a = solve_transport(&p, &t).unwrap().result;
        let b = solve_transport(&p, &t.with_closure(Closure::Neumann)).unwrap().result;
        assert!((a.drift - b.drift).abs() < 1e-8 * a.drift.abs().max(1.0));
        assert!((a.d_primary - b.d_primary).abs() < 1e-8 * a.d_primary);
    }

    #[test]
    fn reflection_symmetry() {
        let t = TruncationSpec::dirichlet(200, 32).unwrap();
        let a = solve_transport(&washboard(1.3), &t).unwrap().result;
        let b = solve_transport(&washboard(-1.3), &t).unwrap().result;
        assert!((a.drift + b.drift).abs() < 1e-9);
        assert!((a.d_primary - b.d_primary).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_cell_parity() {
        let t = TruncationSpec::dirichlet(40, 24).unwrap();
        let sol = solve_transport(&washboard(0.0), &t).unwrap();
        // φ is odd under (q, p) → (−q, −p)
        assert!(sol.phi.parity_defect(-1.0) < 1e-10);
    }

    #[test]
    fn blocks_scale_with_level() {
        let p = washboard(0.5);
        let t = TruncationSpec::dirichlet(10, 3).unwrap();
        let b = build_blocks(&p, &t).unwrap();
        assert_eq!(b.q(0).max_abs(), 0.0);
        let q2 = b.q_minus(2).scaled(1.0 / 3f64.sqrt());
        let q5 = b.q_minus(5).scaled(1.0 / 6f64.sqrt());
        assert!(q2.as_slice().iter().zip(q5.as_slice()).all(|(x, y)| (x - y).abs() < 1e-13));
        let pf = ModelParams::new(1.0, 1.0, 0.0, PeriodicPotential::flat(1.0).unwrap()).unwrap();
        let t1 = TruncationSpec::dirichlet(4, 1).unwrap();
        let bf = build_blocks(&pf, &t1).unwrap();
        let q2 = bf.q(2);
        assert_eq!(q2, Matrix::scaled_identity(3, -2.0));
    }

    #[test]
    fn recursion_converges_in_n() {
        let p = ModelParams::new(1.0, 5.0, 0.5, PeriodicPotential::cosine(1.0, 1.0).unwrap()).unwrap();
        let t = TruncationSpec::dirichlet(200, 24).unwrap();
        let blocks = build_blocks(&p, &t).unwrap();
        let a = downward_recursion(&blocks, &t).unwrap();
        let b = downward_recursion(&blocks, &t.with_hermite(220)).unwrap();
        let mut diff = a.s(0).clone();
        diff.add_scaled(b.s(0), -1.0);
        assert!(diff.frobenius_norm() < 1e-10);
    }

    #[test]
    fn centred_free_particle_is_flat() {
        let p = free(0.5, 2.0, 1.5);
        let t = TruncationSpec::dirichlet(20, 2).unwrap().with_momentum_centre(3.0);
        let sol = solve_transport(&p, &t).unwrap();
        let rho = &sol.density.r;
        assert!((rho.level(0)[0] - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!((1..=20).all(|n| rho.level_norm(n) < 1e-14));
        assert!((sol.result.drift - 3.0).abs() < 1e-13);
        assert!((sol.result.d_primary - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centre_does_not_change_transport() {
        let p = washboard(1.2);
        let t = TruncationSpec::dirichlet(240, 32).unwrap();
        let a = solve_transport(&p, &t).unwrap().result;
        for p0 in [-0.4, 0.6, 1.2] {
            let b = solve_transport(&p, &t.with_momentum_centre(p0)).unwrap().result;
            assert!((a.drift - b.drift).abs() < 1e-9 * a.drift, "{p0}");
            assert!((a.d_primary - b.d_primary).abs() < 1e-9 * a.d_primary, "{p0}");
            if p0 > 0.0 {
                assert!((b.d_ibp - b.d_primary).abs() < 1e-9 * a.d_primary, "{p0}");
            }
        }
    }

    #[test]
    fn centre_choice() {
        let t = TruncationSpec::dirichlet(80, 24).unwrap();
        assert_eq!(choose_momentum_centre(&washboard(0.0), &t).unwrap(), 0.0);
        assert_eq!(choose_momentum_centre(&washboard(0.2), &t).unwrap(), 0.0);
        assert_eq!(choose_momentum_centre(&washboard(4.0), &t).unwrap(), 4.0);
    }

    #[test]
    fn equilibrium_blocks_stay_uncentred() {
        assert!(BlockSet::centred(&washboard(0.0), 4, Operator::Equilibrium, 1.0).is_err());
    }
}
