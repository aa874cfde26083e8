//! Power series of the drift and diffusion in the tilt `F`, with every
//! coefficient obtained from Poisson equations of the untilted dynamics.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{dot, Lu, Matrix};
use crate::error::{Error, Result};
use crate::hermite_fourier::{HermiteFourierField, TruncationSpec};
use crate::model::{ModelParams, PeriodicPotential};
use crate::transport::{BlockSet, Operator, Recursion};

/// Default highest order of the expansion.
pub const DEFAULT_ORDER: usize = 9;

/// Mean of a Poisson right-hand side allowed before it is rejected, relative to its norm.
pub const MEAN_ZERO_TOL: f64 = 1e-9;

/// Allowed gap between `⟨a⁻φ_{j−1}, 1⟩_β` and `V_j`, relative to `max(1, |V_j|)`.
pub const CHAIN_SOLVABILITY_TOL: f64 = 1e-7;

/// Allowed relative gap between the two forms of `V_ℓ`.
pub const VELOCITY_FORMS_TOL: f64 = 1e-6;

/// The Gibbs measure `ρ̄ ∝ e^{−β(p²/2 + V(q))}` acting on packed coefficients.
///
/// Hermite levels are orthonormal under `ρ̂(p)`, so
/// `⟨g, h⟩_β = Σ_n g_nᵀ W h_n` with `W` the Gram matrix of the Fourier basis
/// under `e^{−βV}/Z_q`, computed once by the trapezoid rule.
#[derive(Debug, Clone)]
pub struct GibbsMeasure {
    gram: Matrix,
    mean: Vec<f64>,
}

impl GibbsMeasure {
    /// Uses `max(512, 8M)` nodes, ample for the Gram entries to converge spectrally.
    pub fn new(potential: &PeriodicPotential, beta: f64, n_fourier: usize) -> Self {
        let n_q = (8 * n_fourier).max(512);
        let b = 2 * n_fourier + 1;
        let period = potential.period();
        let v: Vec<f64> = (0..n_q)
            .map(|i| potential.evaluate(i as f64 * period / n_q as f64))
            .collect();
        let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = v.iter().map(|x| (-beta * (x - vmin)).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut basis = vec![0.0; b];
        let mut gram = Matrix::zeros(b, b);
        let mut mean = vec![0.0; b];
        for (i, wi) in w.iter().enumerate() {
            let wi = wi / z;
            basis[0] = 1.0;
            for j in 1..=n_fourier {
                let phase = 2.0 * PI * ((i * j) % n_q) as f64 / n_q as f64;
                let (s, c) = phase.sin_cos();
                basis[j] = 2.0 * c;
                basis[n_fourier + j] = -2.0 * s;
            }
            for r in 0..b {
                mean[r] += wi * basis[r];
                let row = gram.row_mut(r);
                let f = wi * basis[r];
                row.iter_mut().zip(&basis).for_each(|(g, x)| *g += f * x);
            }
        }
        Self { gram, mean }
    }

    /// `c` with `cᵀx = ∫ x(q) e^{−βV}/Z_q dq` for a packed vector `x`.
    pub fn mean_functional(&self) -> &[f64] {
        &self.mean
    }

    /// `⟨g, h⟩_β`
    pub fn inner(&self, g: &HermiteFourierField, h: &HermiteFourierField) -> f64 {
        let levels = g.n_levels().min(h.n_levels());
        let mut tmp = vec![0.0; self.mean.len()];
        (0..levels)
            .map(|lv| {
                self.gram.matvec_into(h.level(lv), &mut tmp);
                dot(g.level(lv), &tmp)
            })
            .sum()
    }

    /// `⟨g, 1⟩_β`
    pub fn mean(&self, g: &HermiteFourierField) -> f64 {
        dot(&self.mean, g.level(0))
    }
}

#[derive(Debug, Clone)]
struct PoissonOperator {
    blocks: BlockSet,
    recursion: Recursion,
    bordered: Lu,
    left_null: Vec<f64>,
}

impl PoissonOperator {
    fn new(params: &ModelParams, trunc: &TruncationSpec, op: Operator, mean: &[f64]) -> Result<Self> {
        let blocks = BlockSet::new(params, trunc.n_fourier, op)?;
        let recursion = Recursion::new(&blocks, trunc, true)?;
        let a0 = recursion.level0_matrix(&blocks);
        let left_null = crate::transport::left_null_vector(&a0)?;
        let n = a0.rows();
        let mut m = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            m.row_mut(i)[..n].copy_from_slice(a0.row(i));
            m[(i, n)] = left_null[i];
        }
        m.row_mut(n)[..n].copy_from_slice(mean);
        let bordered = Lu::factor(&m).map_err(|_| Error::NullSpace("equilibrium operator"))?;
        Ok(Self {
            blocks,
            recursion,
            bordered,
            left_null,
        })
    }
}

/// Factorised `−𝓛₀` and `−𝓛̂₀` on one truncation, solving for the unique
/// solution with `⟨ψ, 1⟩_β = 0`.
#[derive(Debug, Clone)]
pub struct EquilibriumSolver {
    params: ModelParams,
    trunc: TruncationSpec,
    gibbs: GibbsMeasure,
    forward: PoissonOperator,
    adjoint: PoissonOperator,
}

impl EquilibriumSolver {
    /// The tilt in `params` is ignored.
    pub fn new(params: &ModelParams, trunc: &TruncationSpec) -> Result<Self> {
        trunc.check_potential(&params.potential)?;
        let params = params.with_force(0.0);
        let gibbs = GibbsMeasure::new(&params.potential, params.beta, trunc.n_fourier);
        let mean = gibbs.mean_functional().to_vec();
        let forward = PoissonOperator::new(&params, trunc, Operator::Equilibrium, &mean)?;
        let adjoint = PoissonOperator::new(&params, trunc, Operator::EquilibriumAdjoint, &mean)?;
        Ok(Self {
            params,
            trunc: *trunc,
            gibbs,
            forward,
            adjoint,
        })
    }

    pub fn gibbs(&self) -> &GibbsMeasure {
        &self.gibbs
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn zeros(&self) -> HermiteFourierField {
        HermiteFourierField::for_truncation(&self.trunc, self.params.period(), self.params.beta)
    }

    fn operator(&self, adjoint: bool) -> &PoissonOperator {
        if adjoint {
            &self.adjoint
        } else {
            &self.forward
        }
    }

    /// Mean-zero `ψ` with `−𝓛₀ψ = rhs`, or `−𝓛̂₀ψ = rhs` when `adjoint`.
    pub fn solve(&self, rhs: &HermiteFourierField, adjoint: bool) -> Result<HermiteFourierField> {
        let mean = self.gibbs.mean(rhs);
        let scale = self.gibbs.inner(rhs, rhs).sqrt();
        if mean.abs() > MEAN_ZERO_TOL * scale {
            return Err(Error::NotMeanZero { mean });
        }
        let op = self.operator(adjoint);
        // the blocks discretise √β 𝓛
        let scaled = rhs.scaled(-self.params.beta.sqrt());
        let (offsets, b0) = op.recursion.reduce(&op.blocks, &scaled)?;
        let mut b = b0;
        b.push(0.0);
        let mut x = op.bordered.solve(&b);
        x.truncate(x.len() - 1);
        Ok(op
            .recursion
            .expand(&x, &offsets, self.params.period(), self.params.beta))
    }

    /// `‖𝓛ψ + rhs‖ / max(‖rhs‖, ‖ψ‖)` in coefficient norm, with the truncated operator.
    pub fn residual(&self, psi: &HermiteFourierField, rhs: &HermiteFourierField, adjoint: bool) -> f64 {
        let op = self.operator(adjoint);
        let mut out = op.blocks.apply(psi, self.trunc.closure);
        out.axpy(self.params.beta.sqrt(), rhs);
        out.norm() / (self.params.beta.sqrt() * rhs.norm()).max(psi.norm()).max(f64::MIN_POSITIVE)
    }

    /// Left null vector of the reduced level-0 operator; exposed for diagnostics.
    pub fn left_null_vector(&self, adjoint: bool) -> &[f64] {
        &self.operator(adjoint).left_null
    }
}

/// One-shot form of [`EquilibriumSolver::solve`].
pub fn solve_equilibrium_poisson(
    rhs: &HermiteFourierField,
    adjoint: bool,
    params: &ModelParams,
    trunc: &TruncationSpec,
) -> Result<HermiteFourierField> {
    EquilibriumSolver::new(params, trunc)?.solve(rhs, adjoint)
}

/// `f_0..f_K` and `φ_0..φ_{K−1}` with the drift coefficients found on the way.
#[derive(Debug, Clone)]
pub struct EquilibriumChain {
    pub beta: f64,
    pub f: Vec<HermiteFourierField>,
    pub phi: Vec<HermiteFourierField>,
    /// `V_ℓ` from `∫ f_ℓ p ρ̄`, index `ℓ − 1`.
    pub velocity: Vec<f64>,
    /// `V_ℓ` from `β ∫ φ_{ℓ−1} p ρ̄`, index `ℓ − 1`.
    pub velocity_phi: Vec<f64>,
    /// `|⟨a⁻φ_{j−1}, 1⟩_β − V_j|`, index `j − 1`.
    pub solvability: Vec<f64>,
    /// Largest relative residual over all Poisson solves.
    pub max_residual: f64,
    gibbs: GibbsMeasure,
}

impl EquilibriumChain {
    pub fn order(&self) -> usize {
        self.f.len() - 1
    }

    pub fn gibbs(&self) -> &GibbsMeasure {
        &self.gibbs
    }

    /// `⟨g, h⟩_β`
    pub fn inner(&self, g: &HermiteFourierField, h: &HermiteFourierField) -> f64 {
        self.gibbs.inner(g, h)
    }
}

/// Solves the chain up to order `k`.
pub fn build_chain(params: &ModelParams, trunc: &TruncationSpec, k: usize) -> Result<EquilibriumChain> {
    if k == 0 {
        return Err(Error::InvalidParameter("expansion order must be at least 1".into()));
    }
    let solver = EquilibriumSolver::new(params, trunc)?;
    build_chain_with(&solver, k)
}

/// [`build_chain`] reusing factorised operators.
pub fn build_chain_with(solver: &EquilibriumSolver, k: usize) -> Result<EquilibriumChain> {
    let beta = solver.params().beta;
    let gibbs = solver.gibbs().clone();
    let one = {
        let mut z = solver.zeros();
        z.add_constant(1.0);
        z
    };
    let p = one.momentum();
    let mut max_residual: f64 = 0.0;

    let mut f = vec![one];
    for _ in 1..=k {
        let rhs = f.last().unwrap().raise();
        let fj = solver.solve(&rhs, true)?;
        max_residual = max_residual.max(solver.residual(&fj, &rhs, true));
        f.push(fj);
    }
    let velocity: Vec<f64> = (1..=k).map(|l| gibbs.inner(&f[l], &p)).collect();

    let mut phi: Vec<HermiteFourierField> = Vec::with_capacity(k);
    let mut solvability = Vec::with_capacity(k);
    let mut velocity_phi = Vec::with_capacity(k);
    for j in 0..k {
        let rhs = if j == 0 {
            p.clone()
        } else {
            let mut r = phi[j - 1].lower();
            let mean = gibbs.mean(&r);
            let vj = velocity[j - 1];
            let defect = (mean - vj).abs();
            solvability.push(defect);
            if defect > CHAIN_SOLVABILITY_TOL * vj.abs().max(1.0) {
                return Err(Error::ChainSolvability {
                    order: j,
                    residual: defect,
                });
            }
            // project out the constant exactly; the two agree to the check above
            r.add_constant(-mean);
            r
        };
        let mut pj = solver.solve(&rhs, false)?;
        max_residual = max_residual.max(solver.residual(&pj, &rhs, false));
        let target: f64 = -(1..=j).map(|r| gibbs.inner(&f[r], &phi[j - r])).sum::<f64>();
        pj.add_constant(target);
        velocity_phi.push(beta * gibbs.inner(&pj, &p));
        phi.push(pj);
    }
    solvability.push((gibbs.mean(&phi[k - 1].lower()) - velocity[k - 1]).abs());

    Ok(EquilibriumChain {
        beta,
        f,
        phi,
        velocity,
        velocity_phi,
        solvability,
        max_residual,
        gibbs,
    })
}

/// `V_j` in its `f` form, after checking it against the `φ` form.
pub fn velocity_coefficient(chain: &EquilibriumChain, j: usize) -> Result<f64> {
    if j == 0 || j > chain.order() {
        return Err(Error::OrderTooHigh {
            requested: j,
            available: chain.order(),
        });
    }
    let (a, b) = (chain.velocity[j - 1], chain.velocity_phi[j - 1]);
    // orders that vanish by symmetry are compared against the leading coefficient
    let scale = a.abs().max(b.abs()).max(1e-6 * chain.velocity[0].abs());
    if (a - b).abs() > VELOCITY_FORMS_TOL * scale {
        return Err(Error::VelocityFormsDisagree {
            order: j,
            f_form: a,
            phi_form: b,
        });
    }
    Ok(a)
}

/// Expansion coefficients up to order `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTable {
    pub beta: f64,
    /// `V_1..V_K`, index `ℓ − 1`.
    pub velocity: Vec<f64>,
    /// `Σ_{nℓ}` at `sigma[ℓ][n]` for `1 ≤ n ≤ ℓ ≤ K − 1`; other entries are zero.
    pub sigma: Vec<Vec<f64>>,
    /// `Ξ_{nℓ}`, laid out like `sigma`.
    pub xi: Vec<Vec<f64>>,
}

/// How the diffusion series is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// `D_ℓ = β⁻¹V_{ℓ+1} + Σ_n Σ_{nℓ}`
    Full,
    /// `D_ℓ = β⁻¹(ℓ+1)V_{ℓ+1}`, i.e. `D = β⁻¹ dU/dF` term by term.
    NaiveEinstein,
}

impl ExpansionTable {
    pub fn order(&self) -> usize {
        self.velocity.len()
    }

    pub fn sum_sigma(&self, l: usize) -> f64 {
        self.sigma[l].iter().sum()
    }

    pub fn sum_xi(&self, l: usize) -> f64 {
        self.xi[l].iter().sum()
    }

    /// Coefficient of `F^ℓ` in the diffusion series, `ℓ ≤ K − 1`.
    pub fn diffusion(&self, l: usize, mode: SeriesMode) -> f64 {
        let v = self.velocity[l] / self.beta;
        match mode {
            SeriesMode::Full => v + self.sum_sigma(l),
            SeriesMode::NaiveEinstein => (l + 1) as f64 * v,
        }
    }

    /// `β⁻¹(ℓ+1)V_{ℓ+1} + ΣΞ_{nℓ} − β⁻¹V_{ℓ+1} − ΣΣ_{nℓ}`, zero in exact arithmetic.
    pub fn identity_defect(&self, l: usize) -> f64 {
        let v = self.velocity[l] / self.beta;
        (l + 1) as f64 * v + self.sum_xi(l) - v - self.sum_sigma(l)
    }

    /// Largest `F` for which every computed term `|F^ℓ V_ℓ|` of the drift
    /// series is smaller than the previous non-negligible one.
    pub fn ratio_test_radius(&self) -> Option<f64> {
        ratio_radius(&self.velocity, 1)
    }

    /// As [`ratio_test_radius`](Self::ratio_test_radius) for the full diffusion series.
    pub fn diffusion_ratio_radius(&self) -> Option<f64> {
        let d: Vec<f64> = (0..self.order()).map(|l| self.diffusion(l, SeriesMode::Full)).collect();
        ratio_radius(&d, 0)
    }
}

fn ratio_radius(coeffs: &[f64], first_power: usize) -> Option<f64> {
    let peak = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let nz: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > 1e-8 * peak)
        .map(|(i, c)| (i + first_power, c.abs()))
        .collect();
    nz.windows(2)
        .map(|w| (w[0].1 / w[1].1).powf(1.0 / (w[1].0 - w[0].0) as f64))
        .reduce(f64::min)
}

/// `V_ℓ`, `Σ_{nℓ}` and `Ξ_{nℓ}` from a chain.
pub fn diffusion_coefficients(chain: &EquilibriumChain) -> Result<ExpansionTable> {
    let k = chain.order();
    let velocity = (1..=k)
        .map(|j| velocity_coefficient(chain, j))
        .collect::<Result<Vec<_>>>()?;
    let beta = chain.beta;
    let mut sigma = vec![vec![0.0; k]; k];
    let mut xi = vec![vec![0.0; k]; k];
    let pphi: Vec<HermiteFourierField> = chain.phi.iter().map(|p| p.momentum()).collect();
    let dfs: Vec<HermiteFourierField> = chain.f.iter().map(|f| f.lower()).collect();
    for l in 1..k {
        for n in 1..=l {
            sigma[l][n] = chain.inner(&pphi[l - n], &chain.f[n]);
            xi[l][n] = chain.inner(&chain.phi[l - n], &dfs[n]) / beta;
        }
    }
    Ok(ExpansionTable {
        beta,
        velocity,
        sigma,
        xi,
    })
}

/// `Σ_{ℓ=1}^{order} F^ℓ V_ℓ`
pub fn partial_sum_u(table: &ExpansionTable, force: f64, order: usize) -> Result<f64> {
    if order > table.order() {
        return Err(Error::OrderTooHigh {
            requested: order,
            available: table.order(),
        });
    }
    Ok(table.velocity[..order]
        .iter()
        .enumerate()
        .map(|(i, v)| force.powi(i as i32 + 1) * v)
        .sum())
}

/// `Σ_{ℓ=0}^{order} F^ℓ D_ℓ` in the chosen mode.
pub fn partial_sum_d(table: &ExpansionTable, force: f64, order: usize, mode: SeriesMode) -> Result<f64> {
    if order + 1 > table.order() {
        return Err(Error::OrderTooHigh {
            requested: order,
            available: table.order().saturating_sub(1),
        });
    }
    Ok((0..=order)
        .map(|l| force.powi(l as i32) * table.diffusion(l, mode))
        .sum())
}

/// `⟨a⁻φ_m, f_{k−m}⟩_β` for `0 ≤ m ≤ k ≤ k_max`, row `k`, column `m`.
/// Every row is constant in exact arithmetic.
pub fn shift_identity_table(chain: &EquilibriumChain, k_max: usize) -> Vec<Vec<f64>> {
    let dphi: Vec<HermiteFourierField> = chain.phi.iter().map(|p| p.lower()).collect();
    (0..=k_max)
        .map(|k| {
            (0..=k)
                .filter(|&m| m < dphi.len() && k - m < chain.f.len())
                .map(|m| chain.inner(&dphi[m], &chain.f[k - m]))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{PhaseSpaceQuadrature, PositionWeight};
    use crate::transport::solve_transport;

    fn free(gamma: f64, beta: f64) -> ModelParams {
        ModelParams::new(gamma, beta, 0.0, PeriodicPotential::flat(1.0).unwrap()).unwrap()
    }

    fn washboard(gamma: f64) -> ModelParams {
        ModelParams::new(gamma, 5.0, 0.0, PeriodicPotential::cosine(1.0, 1.0).unwrap()).unwrap()
    }

    fn trunc() -> TruncationSpec {
        TruncationSpec::dirichlet(160, 32).unwrap()
    }

    #[test]
    fn free_particle_poisson() {
        let p = free(1.0, 2.0);
        let t = TruncationSpec::dirichlet(12, 2).unwrap();
        let rhs = HermiteFourierField::momentum_field(12, 2, 1.0, 2.0);
        let psi = solve_equilibrium_poisson(&rhs, false, &p, &t).unwrap();
        let mut diff = psi.clone();
        diff.axpy(-1.0, &rhs);
        assert!(diff.max_abs() < 1e-13);

        let zero = solve_equilibrium_poisson(&rhs.scaled(0.0), false, &p, &t).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let one = HermiteFourierField::constant(1.0, 12, 2, 1.0, 2.0);
        assert!(matches!(
            solve_equilibrium_poisson(&one, true, &p, &t),
            Err(Error::NotMeanZero { .. })
        ));
    }

    fn momentum_flip(f: &HermiteFourierField) -> HermiteFourierField {
        let mut out = f.clone();
        for n in (1..f.n_levels()).step_by(2) {
            out.level_mut(n).iter_mut().for_each(|x| *x = -*x);
        }
        out
    }

    #[test]
    fn adjoint_is_momentum_reversed_forward() {
        let p = washboard(1.0);
        let t = TruncationSpec::dirichlet(80, 32).unwrap();
        let solver = EquilibriumSolver::new(&p, &t).unwrap();
        let mut rhs = solver.zeros();
        rhs.level_mut(1)[1] = 0.3;
        rhs.level_mut(2)[33] = -0.2;
        rhs.level_mut(1)[0] = 0.1;
        let mean = solver.gibbs().mean(&rhs);
        rhs.add_constant(-mean);
        let a = solver.solve(&rhs, true).unwrap();
        let b = momentum_flip(&solver.solve(&momentum_flip(&rhs), false).unwrap());
        let mut d = a.clone();
        d.axpy(-1.0, &b);
        assert!(d.max_abs() < 1e-10 * a.max_abs());
    }

    #[test]
    fn free_particle_chain() {
        let (gamma, beta) = (2.0, 1.0);
        let t = TruncationSpec::dirichlet(16, 2).unwrap();
        let chain = build_chain(&free(gamma, beta), &t, 4).unwrap();
        let mut f1 = HermiteFourierField::momentum_field(16, 2, 1.0, beta).scaled(beta / gamma);
        f1.axpy(-1.0, &chain.f[1]);
        assert!(f1.max_abs() < 1e-13);
        assert!((velocity_coefficient(&chain, 1).unwrap() - 0.5).abs() < 1e-13);
        let table = diffusion_coefficients(&chain).unwrap();
        assert!(table.velocity[1..].iter().all(|v| v.abs() < 1e-13));
        assert!(table.sigma[1][1].abs() < 1e-13);
        let force = 0.7;
        assert!((partial_sum_u(&table, force, 1).unwrap() - force / gamma).abs() < 1e-14);
        assert_eq!(partial_sum_u(&table, 0.0, 4).unwrap(), 0.0);
        let d0 = 1.0 / (beta * gamma);
        for mode in [SeriesMode::Full, SeriesMode::NaiveEinstein] {
            assert!((partial_sum_d(&table, force, 3, mode).unwrap() - d0).abs() < 1e-13);
        }
        assert!(matches!(
            partial_sum_u(&table, force, 5),
            Err(Error::OrderTooHigh { .. })
        ));
        assert!(matches!(
            partial_sum_d(&table, force, 4, SeriesMode::Full),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn first_order_chain_is_centred() {
        let chain = build_chain(&washboard(1.0), &trunc(), 1).unwrap();
        assert_eq!(chain.phi.len(), 1);
        assert!(chain.gibbs().mean(&chain.phi[0]).abs() < 1e-14);
        assert!((chain.gibbs().mean(&chain.f[0]) - 1.0).abs() < 1e-14);
        assert!(chain.gibbs().mean(&chain.f[1]).abs() < 1e-14);
    }

    #[test]
    fn gibbs_inner_matches_gauss_hermite() {
        let p = washboard(1.0);
        let t = TruncationSpec::dirichlet(20, 32).unwrap();
        let chain = build_chain(&p, &t, 3).unwrap();
        let mut quad = PhaseSpaceQuadrature::new(&p.potential, 5.0, 64, 256, PositionWeight::Gibbs);
        for (a, b) in [(1, 0), (2, 1), (3, 2)] {
            let spectral = chain.inner(&chain.f[a], &chain.phi[b]);
            let gh = quad.inner(&chain.f[a], &chain.phi[b]).unwrap();
            assert!((spectral - gh).abs() < 1e-10 * spectral.abs(), "{a} {b}");
        }
    }

    #[test]
    fn chain_invariants() {
        let chain = build_chain(&washboard(1.0), &trunc(), DEFAULT_ORDER).unwrap();
        let g = chain.gibbs();
        assert!(chain.max_residual < 1e-8);
        for j in 1..=chain.order() {
            assert!(g.mean(&chain.f[j]).abs() < 1e-12);
            let parity = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!(chain.f[j].parity_defect(parity) < 1e-8, "f_{j}");
        }
        for j in 0..chain.order() {
            let side: f64 = -(1..=j).map(|r| chain.inner(&chain.f[r], &chain.phi[j - r])).sum::<f64>();
            assert!((g.mean(&chain.phi[j]) - side).abs() < 1e-14);
            let parity = if j % 2 == 0 { -1.0 } else { 1.0 };
            assert!(chain.phi[j].parity_defect(parity) < 1e-8, "phi_{j}");
        }
        assert!(chain.solvability.iter().all(|s| *s < 1e-7));
    }

    #[test]
    fn washboard_table() {
        let chain = build_chain(&washboard(1.0), &trunc(), DEFAULT_ORDER).unwrap();
        let table = diffusion_coefficients(&chain).unwrap();
        let v1 = table.velocity[0];
        for l in [2, 4, 6, 8] {
            assert!(table.velocity[l - 1].abs() <= 1e-8 * v1);
        }
        for l in 1..table.order() {
            let scale = table.diffusion(l, SeriesMode::Full).abs().max(table.diffusion(0, SeriesMode::Full));
            assert!(table.identity_defect(l).abs() <= 1e-6 * scale, "identity {l}");
            if l % 2 == 1 {
                assert!(table.sum_sigma(l).abs() <= 1e-8 * scale);
                assert!(table.sum_xi(l).abs() <= 1e-8 * scale);
            }
        }
        let force = 0.5;
        let gap = partial_sum_d(&table, force, 8, SeriesMode::Full).unwrap()
            - partial_sum_d(&table, force, 8, SeriesMode::NaiveEinstein).unwrap();
        let corr: f64 = (1..=8).map(|l| force.powi(l as i32) * (table.sum_sigma(l) - l as f64 * table.velocity[l] / table.beta)).sum();
        assert!((gap - corr).abs() < 1e-12 * gap.abs());
        assert!(gap.abs() > 1e-3 * table.diffusion(0, SeriesMode::Full));
    }

    #[test]
    fn second_order_diffusion_by_quadrature() {
        let p = washboard(1.0);
        let t = TruncationSpec::dirichlet(60, 32).unwrap();
        let chain = build_chain(&p, &t, 3).unwrap();
        let table = diffusion_coefficients(&chain).unwrap();
        let mut quad = PhaseSpaceQuadrature::new(&p.potential, 5.0, 160, 256, PositionWeight::Gibbs);
        let pf = HermiteFourierField::momentum_field(60, 32, 1.0, 5.0);
        let d2 = table.velocity[2] / 5.0
            + quad.triple(&pf, &chain.phi[1], &chain.f[1]).unwrap()
            + quad.triple(&pf, &chain.phi[0], &chain.f[2]).unwrap();
        let spectral = table.diffusion(2, SeriesMode::Full);
        assert!((d2 - spectral).abs() < 1e-8 * spectral.abs(), "{d2} {spectral}");
    }

    #[test]
    fn shift_identity() {
        let chain = build_chain(&washboard(1.0), &trunc(), 5).unwrap();
        let rows = shift_identity_table(&chain, 4);
        let scale = rows.iter().fold(0.0f64, |m, r| m.max(r[0].abs()));
        for row in rows {
            for v in &row {
                assert!((v - row[0]).abs() < 1e-7 * scale, "{row:?}");
            }
        }
    }

    #[test]
    fn einstein_relation() {
        for gamma in [1.0, 50.0] {
            let p = washboard(gamma);
            let chain = build_chain(&p, &trunc(), 1).unwrap();
            let d = solve_transport(&p, &trunc()).unwrap().result.d_primary;
            let v1 = velocity_coefficient(&chain, 1).unwrap();
            assert!((v1 / 5.0 - d).abs() < 1e-6 * d, "gamma {gamma}");
        }
    }

    #[test]
    fn ratio_radius_is_conservative() {
        let r = ratio_radius(&[1.0, 0.0, 0.25, 0.0, 0.5], 1).unwrap();
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(ratio_radius(&[1.0], 1), None);
    }
}
