//! Euler–Maruyama ensembles of
//! `dq = p dt`, `dp = (F − V'(q) − γp) dt + √(2γβ⁻¹) dW`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub params: ModelParams,
    pub dt: f64,
    pub n_steps: u64,
    pub n_burnin: u64,
    pub n_traj: usize,
    pub seed: u64,
}

impl McConfig {
    /// Burn-in defaults to 2% of the steps.
    pub fn new(params: ModelParams, dt: f64, n_steps: u64, n_traj: usize, seed: u64) -> Result<Self> {
        let c = Self {
            params,
            dt,
            n_steps,
            n_burnin: n_steps / 50,
            n_traj,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_burnin(mut self, n_burnin: u64) -> Result<Self> {
        self.n_burnin = n_burnin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("time step must be positive".into()));
        }
        if self.dt * self.params.gamma >= 0.5 {
            return Err(Error::InvalidParameter("dt·γ must stay below 0.5".into()));
        }
        if self.n_steps <= self.n_burnin {
            return Err(Error::InvalidParameter("burn-in must be shorter than the run".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        Ok(())
    }

    /// Length of the recorded window `T − T₀`.
    pub fn window(&self) -> f64 {
        (self.n_steps - self.n_burnin) as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub drift: f64,
    pub diffusion: f64,
    pub stderr_drift: f64,
    pub stderr_diffusion: f64,
    pub n_traj: usize,
}

impl McEstimate {
    /// Estimators from displacements `X_k` over a window of length `window`,
    /// summed in index order.
    pub fn from_displacements(x: &[f64], window: f64) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let (mut m2, mut m4) = (0.0, 0.0);
        for v in x {
            let d = (v - mean) * (v - mean);
            m2 += d;
            m4 += d * d;
        }
        let var = if x.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
        let central4 = m4 / n;
        let biased = m2 / n;
        let var_of_var = ((central4 - biased * biased) / n).max(0.0);
        Self {
            drift: mean / window,
            diffusion: var / (2.0 * window),
            stderr_drift: (var / n).sqrt() / window,
            stderr_diffusion: var_of_var.sqrt() / (2.0 * window),
            n_traj: x.len(),
        }
    }

    /// `|U_hat − u| / stderr_U`
    pub fn drift_z(&self, u: f64) -> f64 {
        (self.drift - u).abs() / self.stderr_drift
    }

    /// `|D_hat − d| / stderr_D`
    pub fn diffusion_z(&self, d: f64) -> f64 {
        (self.diffusion - d).abs() / self.stderr_diffusion
    }
}

/// Stream `k` of the generator keyed by `seed`; independent of scheduling.
pub fn trajectory_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// `q(T) − q(T₀)` for trajectory `k`, started from `q ~ U[0, L)`, `p ~ N(0, β⁻¹)`.
pub fn simulate_trajectory(config: &McConfig, k: usize) -> Result<f64> {
    let p = &config.params;
    let mut rng = trajectory_rng(config.seed, k as u64);
    let dt = config.dt;
    let noise = (2.0 * p.gamma * dt / p.beta).sqrt();
    let mut q = rng.random::<f64>() * p.period();
    let mut v = rng.sample::<f64, _>(StandardNormal) / p.beta.sqrt();
    let mut start = q;
    for step in 0..config.n_steps {
        if step == config.n_burnin {
            start = q;
        }
        let xi: f64 = rng.sample(StandardNormal);
        // position first, then the force at the new position
        q += v * dt;
        v += (p.force - p.potential.derivative(q) - p.gamma * v) * dt + noise * xi;
    }
    if !(q.is_finite() && v.is_finite()) {
        return Err(Error::NonFiniteTrajectory { trajectory: k as u64 });
    }
    Ok(q - start)
}

/// Sequential ensemble; the std crate runs the same trajectories in parallel.
pub fn simulate(config: &McConfig) -> Result<McEstimate> {
    config.validate()?;
    let x = (0..config.n_traj)
        .map(|k| simulate_trajectory(config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_displacements(&x, config.window()))
}

/// Result of [`estimate_with_error_target`].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetedEstimate {
    pub estimate: McEstimate,
    /// `false` when the trajectory cap stopped the doubling first.
    pub target_met: bool,
}

/// Doubles the ensemble, starting from `config.n_traj`, until
/// `stderr_U/|U_hat| ≤ target` or `max_traj` is reached. Trajectories already
/// run are reused.
pub fn estimate_with_error_target(
    config: &McConfig,
    target: f64,
    max_traj: usize,
) -> Result<TargetedEstimate> {
    run_until(config, max_traj, |e| {
        e.stderr_drift <= target * e.drift.abs()
    }, target)
}

/// As [`estimate_with_error_target`] for the diffusion estimate.
pub fn estimate_diffusion_with_error_target(
    config: &McConfig,
    target: f64,
    max_traj: usize,
) -> Result<TargetedEstimate> {
    run_until(config, max_traj, |e| {
        e.stderr_diffusion <= target * e.diffusion.abs()
    }, target)
}

fn run_until(
    config: &McConfig,
    max_traj: usize,
    done: impl Fn(&McEstimate) -> bool,
    target: f64,
) -> Result<TargetedEstimate> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter("target must lie in (0, 1)".into()));
    }
    config.validate()?;
    let mut x: Vec<f64> = Vec::new();
    let mut want = config.n_traj.max(2).min(max_traj.max(2));
    loop {
        for k in x.len()..want {
            x.push(simulate_trajectory(config, k)?);
        }
        let estimate = McEstimate::from_displacements(&x, config.window());
        if done(&estimate) {
            return Ok(TargetedEstimate {
                estimate,
                target_met: true,
            });
        }
        if want >= max_traj {
            return Ok(TargetedEstimate {
                estimate,
                target_met: false,
            });
        }
        want = (2 * want).min(max_traj);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeriodicPotential;

    fn free(force: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, force, PeriodicPotential::flat(1.0).unwrap()).unwrap()
    }

    #[test]
    fn config_guards() {
        let p = free(1.0);
        assert!(McConfig::new(p.clone(), 0.6, 10, 1, 0).is_err());
        assert!(McConfig::new(p.clone(), 0.01, 10, 0, 0).is_err());
        assert!(McConfig::new(p.clone(), 0.01, 10, 1, 0).unwrap().with_burnin(10).is_err());
        assert_eq!(McConfig::new(p, 0.01, 1000, 1, 0).unwrap().n_burnin, 20);
    }

    #[test]
    fn deterministic() {
        let c = McConfig::new(free(2.0), 0.01, 2000, 8, 42).unwrap();
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        let other = McConfig { seed: 43, ..c.clone() };
        assert_ne!(simulate(&c).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn free_particle_statistics() {
        let c = McConfig::new(free(2.0), 1e-3, 30_000, 400, 7)
            .unwrap()
            .with_burnin(10_000)
            .unwrap();
        let e = simulate(&c).unwrap();
        assert!(e.drift_z(2.0) < 4.0, "{e:?}");
        assert!(e.diffusion_z(1.0) < 4.0, "{e:?}");
        assert!(e.stderr_drift > 0.0 && e.stderr_diffusion > 0.0);
    }

    #[test]
    fn estimator_moments() {
        let e = McEstimate::from_displacements(&[1.0, 3.0], 2.0);
        assert_eq!(e.drift, 1.0);
        assert_eq!(e.diffusion, 0.5);
        assert_eq!(e.stderr_drift, 0.5);
    }

    #[test]
    fn error_target() {
        let c = McConfig::new(free(2.0), 1e-2, 2_000, 4, 3).unwrap();
        let r = estimate_with_error_target(&c, 0.05, 1024).unwrap();
        assert!(r.target_met);
        assert!(r.estimate.stderr_drift <= 0.05 * r.estimate.drift.abs());
        let capped = estimate_with_error_target(&c, 1e-4, 16).unwrap();
        assert!(!capped.target_met);
        assert_eq!(capped.estimate.n_traj, 16);
        assert!(estimate_with_error_target(&c, 1.5, 16).is_err());
    }
}
