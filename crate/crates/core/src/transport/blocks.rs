use alloc::vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dense::{Lu, Matrix};
use crate::error::Result;
use crate::hermite_fourier::{
    derivative_matrix, multiplication_matrix, Closure, FourierVector, HermiteFourierField,
    TruncationSpec,
};
use crate::model::{ModelParams, PeriodicPotential};

/// Block-tridiagonal Hermite hierarchy in packed Fourier form.
///
/// Row `n` reads
/// `Q_n⁺ x_{n−1} + Q_n x_n + Q_n⁻ x_{n+1}` with
/// `Q_n = −γ√β n I + C`, `Q_n⁺ = √n · lower`, `Q_n⁻ = √(n+1) · upper`.
/// Every operator in this crate (generator, Fokker–Planck, their equilibrium
/// counterparts) multiplied by `√β` has this shape. `C = ±√β p₀ ∂_q` appears
/// only when the Hermite basis is centred at `p₀ ≠ 0`.
#[derive(Debug, Clone)]
pub struct BlockSet {
    n_fourier: usize,
    friction: f64,
    lower: Matrix,
    upper: Matrix,
    centre: Option<Matrix>,
}

/// Which operator a [`BlockSet`] discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// `√β 𝓛` acting on observables (cell problem).
    Generator,
    /// `√β 𝓛̃` with `ρ = ρ̂(p) r(q, p)`: `L*(ρ̂ r) = ρ̂ 𝓛̃ r`.
    FokkerPlanck,
    /// `√β 𝓛₀` at zero tilt.
    Equilibrium,
    /// `√β 𝓛̂₀ = √β(−𝒜 + γ𝒮)` at zero tilt.
    EquilibriumAdjoint,
}

fn force_field(potential: &PeriodicPotential, force: f64, n_fourier: usize) -> Result<Matrix> {
    // F − V'(q) as a multiplication operator
    let mut w = FourierVector::from_potential(potential, n_fourier)?.derivative();
    w.coeffs_mut().iter_mut().for_each(|c| *c = -*c);
    w.coeffs_mut()[0] += force;
    Ok(multiplication_matrix(&w, n_fourier))
}

impl BlockSet {
    pub fn new(params: &ModelParams, n_fourier: usize, op: Operator) -> Result<Self> {
        Self::centred(params, n_fourier, op, 0.0)
    }

    /// Blocks in the basis `H_n(p − p₀)`. Writing `p = u + p₀` adds `p₀∂_q`
    /// to the generator and shifts the force by `−γp₀`.
    pub fn centred(params: &ModelParams, n_fourier: usize, op: Operator, p0: f64) -> Result<Self> {
        let l = params.period();
        let beta = params.beta;
        let d = derivative_matrix(n_fourier, l);
        let force = match op {
            Operator::Generator | Operator::FokkerPlanck => params.force - params.gamma * p0,
            Operator::Equilibrium | Operator::EquilibriumAdjoint => {
                if p0 != 0.0 {
                    return Err(crate::Error::InvalidParameter(
                        "equilibrium operators use the uncentred basis".into(),
                    ));
                }
                0.0
            }
        };
        let centre = (p0 != 0.0).then(|| {
            let sign = if op == Operator::FokkerPlanck { -1.0 } else { 1.0 };
            d.scaled(sign * beta.sqrt() * p0)
        });
        let mut drive = force_field(&params.potential, force, n_fourier)?;
        drive.scale(beta);
        let (lower, upper) = match op {
            Operator::Generator | Operator::Equilibrium => {
                let mut up = d.clone();
                up.add_scaled(&drive, 1.0);
                (d, up)
            }
            Operator::EquilibriumAdjoint => {
                let mut up = d.scaled(-1.0);
                up.add_scaled(&drive, -1.0);
                (d.scaled(-1.0), up)
            }
            Operator::FokkerPlanck => {
                let mut lo = d.scaled(-1.0);
                lo.add_scaled(&drive, 1.0);
                (lo, d.scaled(-1.0))
            }
        };
        Ok(Self {
            n_fourier,
            friction: params.gamma * beta.sqrt(),
            lower,
            upper,
            centre,
        })
    }

    pub fn n_fourier(&self) -> usize {
        self.n_fourier
    }

    pub fn block_size(&self) -> usize {
        2 * self.n_fourier + 1
    }

    /// Scalar `−γ√β n` of the diagonal block.
    pub fn diagonal(&self, n: usize) -> f64 {
        -self.friction * n as f64
    }

    /// The level-independent part `C` of the diagonal block, if any.
    pub fn centre_term(&self) -> Option<&Matrix> {
        self.centre.as_ref()
    }

    pub fn q(&self, n: usize) -> Matrix {
        let mut q = Matrix::scaled_identity(self.block_size(), self.diagonal(n));
        if let Some(c) = &self.centre {
            q.add_scaled(c, 1.0);
        }
        q
    }

    /// Sub-diagonal block `Q_n⁺` (couples level `n` to `n−1`).
    pub fn q_plus(&self, n: usize) -> Matrix {
        self.lower.scaled((n as f64).sqrt())
    }

    /// Super-diagonal block `Q_n⁻` (couples level `n` to `n+1`).
    pub fn q_minus(&self, n: usize) -> Matrix {
        self.upper.scaled(((n + 1) as f64).sqrt())
    }

    pub fn lower_base(&self) -> &Matrix {
        &self.lower
    }

    pub fn upper_base(&self) -> &Matrix {
        &self.upper
    }

    /// Applies the truncated hierarchy, with `x_{N+1} = S_N x_N` from `closure`.
    pub fn apply(&self, x: &HermiteFourierField, closure: Closure) -> HermiteFourierField {
        let top = x.n_hermite();
        let b = self.block_size();
        let mut out = x.scaled(0.0);
        let mut tmp = vec![0.0; b];
        for n in 0..=top {
            let row = out.level_mut(n);
            let d = self.diagonal(n);
            row.iter_mut().zip(x.level(n)).for_each(|(r, v)| *r = d * v);
            if let Some(c) = &self.centre {
                c.matvec_into(x.level(n), &mut tmp);
                row.iter_mut().zip(&tmp).for_each(|(r, v)| *r += v);
            }
            if n > 0 {
                self.lower.matvec_into(x.level(n - 1), &mut tmp);
                let c = (n as f64).sqrt();
                row.iter_mut().zip(&tmp).for_each(|(r, v)| *r += c * v);
            }
            let next = if n < top {
                Some(x.level(n + 1))
            } else if closure == Closure::Neumann {
                Some(x.level(top))
            } else {
                None
            };
            if let Some(next) = next {
                self.upper.matvec_into(next, &mut tmp);
                let c = ((n + 1) as f64).sqrt();
                row.iter_mut().zip(&tmp).for_each(|(r, v)| *r += c * v);
            }
        }
        out
    }
}

/// Blocks of the cell problem `√β 𝓛φ = √β(U − p)`.
pub fn build_blocks(params: &ModelParams, trunc: &TruncationSpec) -> Result<BlockSet> {
    trunc.check_potential(&params.potential)?;
    BlockSet::centred(params, trunc.n_fourier, Operator::Generator, trunc.momentum_centre)
}

/// `Φ_{n+1} = S_n Φ_n` maps from the downward recursion, plus the factors
/// needed to push a right-hand side through it.
#[derive(Debug, Clone)]
pub struct Recursion {
    closure: Closure,
    s: alloc::vec::Vec<Matrix>,
    /// `LU(T_{n+1})` at index `n`, where `T_n = Q_n + Q_n⁻ S_n`.
    factors: alloc::vec::Vec<Option<Lu>>,
}

impl Recursion {
    /// Runs `S_n = −(Q_{n+1} + Q_{n+1}⁻ S_{n+1})⁻¹ Q_{n+1}⁺` from `n = N−1` down to 0.
    /// With `keep_factors` every `T_n` factorisation is retained so that
    /// right-hand sides on any level can be solved; otherwise only `T_1`.
    pub fn new(blocks: &BlockSet, trunc: &TruncationSpec, keep_factors: bool) -> Result<Self> {
        let n_top = trunc.n_hermite;
        let b = blocks.block_size();
        let mut s: alloc::vec::Vec<Matrix> = alloc::vec::Vec::with_capacity(n_top);
        let mut factors = alloc::vec::Vec::with_capacity(n_top);
        let mut s_next = match trunc.closure {
            Closure::Dirichlet => None,
            Closure::Neumann => Some(Matrix::identity(b)),
        };
        for n in (0..n_top).rev() {
            let level = n + 1;
            let mut t = match &s_next {
                Some(sn) => {
                    let mut t = blocks.upper.matmul(sn);
                    t.scale(((level + 1) as f64).sqrt());
                    t
                }
                None => Matrix::zeros(b, b),
            };
            t.add_diagonal(blocks.diagonal(level));
            if let Some(c) = &blocks.centre {
                t.add_scaled(c, 1.0);
            }
            let lu = Lu::factor(&t).map_err(|_| crate::Error::SingularBlock { level })?;
            let mut sn = lu.solve_matrix(&blocks.lower);
            sn.scale(-(level as f64).sqrt());
            factors.push(if keep_factors || level == 1 {
                Some(lu)
            } else {
                None
            });
            s.push(sn.clone());
            s_next = Some(sn);
        }
        s.reverse();
        factors.reverse();
        Ok(Self {
            closure: trunc.closure,
            s,
            factors,
        })
    }

    pub fn n_hermite(&self) -> usize {
        self.s.len()
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    /// `S_n` for `n = 0..N−1`.
    pub fn s(&self, n: usize) -> &Matrix {
        &self.s[n]
    }

    pub fn s_matrices(&self) -> &[Matrix] {
        &self.s
    }

    /// `Q_0 + Q_0⁻ S_0`, the closed operator on level 0.
    pub fn level0_matrix(&self, blocks: &BlockSet) -> Matrix {
        let mut a = blocks.upper.matmul(&self.s[0]);
        if let Some(c) = &blocks.centre {
            a.add_scaled(c, 1.0);
        }
        a
    }

    /// Downward pass for a right-hand side: returns the offsets `y_n`
    /// (`x_n = S_{n−1} x_{n−1} + y_n`, index `n−1`) and the reduced level-0
    /// right-hand side `rhs_0 − Q_0⁻ y_1`.
    pub fn reduce(
        &self,
        blocks: &BlockSet,
        rhs: &HermiteFourierField,
    ) -> Result<(alloc::vec::Vec<alloc::vec::Vec<f64>>, alloc::vec::Vec<f64>)> {
        let n_top = self.n_hermite();
        let b = blocks.block_size();
        assert_eq!(rhs.n_hermite(), n_top, "rhs truncation differs from recursion");
        let mut y = vec![vec![0.0; b]; n_top];
        let mut carry = vec![0.0; b];
        let mut tmp = vec![0.0; b];
        for level in (1..=n_top).rev() {
            // g = rhs_level − √(level+1) upper · y_{level+1}
            let mut g: alloc::vec::Vec<f64> = rhs.level(level).to_vec();
            if level < n_top {
                blocks.upper.matvec_into(&y[level], &mut tmp);
                let c = ((level + 1) as f64).sqrt();
                g.iter_mut().zip(&tmp).for_each(|(gi, t)| *gi -= c * t);
            }
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let lu = self.factors[level - 1]
                .as_ref()
                .ok_or_else(|| crate::Error::InvalidParameter(
                    "right-hand side above level 1 needs a recursion built with factors".into(),
                ))?;
            y[level - 1] = lu.solve(&g);
        }
        carry.copy_from_slice(rhs.level(0));
        if n_top > 0 {
            blocks.upper.matvec_into(&y[0], &mut tmp);
            carry.iter_mut().zip(&tmp).for_each(|(c, t)| *c -= t);
        }
        Ok((y, carry))
    }

    /// Upward pass `x_{n+1} = S_n x_n + y_{n+1}` from a level-0 vector.
    pub fn expand(
        &self,
        x0: &[f64],
        offsets: &[alloc::vec::Vec<f64>],
        period: f64,
        beta: f64,
    ) -> HermiteFourierField {
        let n_top = self.n_hermite();
        let b = x0.len();
        let mut x = HermiteFourierField::zeros(n_top, (b - 1) / 2, period, beta);
        x.level_mut(0).copy_from_slice(x0);
        let mut tmp = vec![0.0; b];
        for n in 0..n_top {
            let prev = x.level(n).to_vec();
            self.s[n].matvec_into(&prev, &mut tmp);
            let dst = x.level_mut(n + 1);
            dst.iter_mut()
                .zip(&tmp)
                .zip(&offsets[n])
                .for_each(|((d, t), o)| *d = t + o);
        }
        x
    }
}

/// Downward recursion for the cell-problem blocks.
pub fn downward_recursion(blocks: &BlockSet, trunc: &TruncationSpec) -> Result<Recursion> {
    Recursion::new(blocks, trunc, false)
}
