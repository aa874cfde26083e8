//! TOML sweep configuration.
//!
//! ```toml
//! mode = "transport"
//!
//! [params]
//! gamma = 1.0
//! beta = 5.0
//! potential = { kind = "cosine", v0 = 1.0, period = 1.0 }
//!
//! [sweep]
//! variable = "force"
//! start = 0.0
//! stop = 2.0
//! count = 21
//! series = [1.0, 50.0]   # values of gamma, one block of rows each
//!
//! [output]
//! scale = false
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use washboard_core::hermite_fourier::{Closure, TruncationSpec};
use washboard_core::model::{ModelParams, PeriodicPotential};
use washboard_core::montecarlo::McConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Transport,
    Expand,
    Overdamped,
    Mc,
    EinsteinCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Force,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `V₀ cos(2πq/L)`
    Cosine { v0: f64, period: f64 },
    /// `Σ_k cos[k−1] cos(kωq) + sin[k−1] sin(kωq)`
    Fourier {
        period: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PeriodicPotential> {
        Ok(match self {
            PotentialConfig::Cosine { v0, period } => PeriodicPotential::cosine(*v0, *period)?,
            PotentialConfig::Fourier { period, cos, sin } => {
                PeriodicPotential::new(*period, cos.clone(), sin.clone())?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub beta: f64,
    #[serde(default)]
    pub force: f64,
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    /// Force values are multiples of `F_c = 3.36 γ √V₀`.
    #[serde(default)]
    pub critical_units: bool,
    /// Values of the other variable. Empty means the value from `[params]`.
    #[serde(default)]
    pub series: Vec<f64>,
}

impl SweepSpec {
    /// `count` evenly spaced values from `start` to `stop`.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureConfig {
    #[default]
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncConfig {
    pub n_hermite: usize,
    pub n_fourier: usize,
    pub closure: ClosureConfig,
    /// Double `n_hermite` until the top-level ratio is at most `top_tol`.
    pub adaptive: bool,
    pub top_tol: f64,
    pub max_hermite: usize,
    /// Centre of the momentum basis; chosen per point when absent.
    pub momentum_centre: Option<f64>,
}

impl Default for TruncConfig {
    fn default() -> Self {
        Self {
            n_hermite: 80,
            n_fourier: 32,
            closure: ClosureConfig::Dirichlet,
            adaptive: true,
            top_tol: 5e-7,
            max_hermite: 2560,
            momentum_centre: None,
        }
    }
}

impl TruncConfig {
    pub fn spec(&self) -> washboard_core::Result<TruncationSpec> {
        let closure = match self.closure {
            ClosureConfig::Dirichlet => Closure::Dirichlet,
            ClosureConfig::Neumann => Closure::Neumann,
        };
        TruncationSpec::new(self.n_hermite, self.n_fourier, closure)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Number of drift coefficients `K`.
    pub order: usize,
    /// Orders of the partial sums written next to the spectral values.
    pub orders: Vec<usize>,
    /// Hermite levels for the equilibrium chain; `[truncation]` when absent.
    pub n_hermite: Option<usize>,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            order: 9,
            orders: vec![1, 5, 9],
            n_hermite: Some(160),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub dt: f64,
    pub n_steps: u64,
    /// Defaults to 2% of `n_steps`.
    pub n_burnin: Option<u64>,
    pub n_traj: usize,
    pub seed: u64,
    /// Also solve the spectral problem and report z-scores.
    pub compare_spectral: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            dt: 0.01,
            n_steps: 100_000,
            n_burnin: None,
            n_traj: 500,
            seed: 1,
            compare_spectral: true,
        }
    }
}

impl McSettings {
    pub fn config(&self, params: ModelParams) -> washboard_core::Result<McConfig> {
        let c = McConfig::new(params, self.dt, self.n_steps, self.n_traj, self.seed)?;
        match self.n_burnin {
            Some(b) => c.with_burnin(b),
            None => Ok(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// Add `F/F_c`, `U/U_L` and `D/D_L` columns.
    pub scale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub mode: Mode,
    pub params: ParamsConfig,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub truncation: TruncConfig,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One sweep point: the parameters and the position in the output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub series: usize,
    pub params: ModelParams,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Toml(t) => Error::Config(format!("{}: {t}", path.display())),
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Solver-side parameter errors are reported as configuration errors here.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Numerical(n) => Error::Config(n.to_string()),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        let s = &self.sweep;
        if !(s.start.is_finite() && s.stop.is_finite()) {
            return bad("sweep range must be finite");
        }
        if s.count == 0 {
            return bad("sweep count must be at least 1");
        }
        if s.series.iter().any(|v| !v.is_finite()) {
            return bad("series values must be finite");
        }
        let cosine = self.potential()?.cosine_amplitude().is_some();
        if (self.output.scale || s.critical_units) && !cosine {
            return bad("scaling by F_c needs a single-cosine potential");
        }
        if s.critical_units && s.variable != SweepVariable::Force {
            return bad("critical units apply to a force sweep");
        }
        if self.mode == Mode::EinsteinCheck && s.variable != SweepVariable::Force {
            return bad("einstein_check differentiates in the force and needs a force sweep");
        }
        if self.mode == Mode::EinsteinCheck && (s.count < 2 || s.start == s.stop) {
            return bad("einstein_check needs a force range of positive length");
        }
        if self.mode == Mode::Expand {
            if self.expansion.order == 0 {
                return bad("expansion order must be at least 1");
            }
            if let Some(k) = self.expansion.orders.iter().find(|&&k| k > self.expansion.order) {
                return bad(&format!("partial-sum order {k} exceeds the expansion order {}", self.expansion.order));
            }
        }
        let t = &self.truncation;
        if !(t.top_tol > 0.0) || t.max_hermite < t.n_hermite {
            return bad("truncation needs top_tol > 0 and max_hermite >= n_hermite");
        }
        t.spec()?;
        for p in self.points()? {
            if self.mode == Mode::Mc {
                self.mc.config(p.params)?;
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PeriodicPotential> {
        self.params.potential.build()
    }

    fn base_params(&self) -> Result<ModelParams> {
        let p = &self.params;
        Ok(ModelParams::new(p.gamma, p.beta, p.force, self.potential()?)?)
    }

    /// Series values, or the single `[params]` value of the other variable.
    pub fn series_values(&self) -> Vec<f64> {
        if !self.sweep.series.is_empty() {
            return self.sweep.series.clone();
        }
        vec![match self.sweep.variable {
            SweepVariable::Force => self.params.gamma,
            SweepVariable::Gamma => self.params.force,
        }]
    }

    /// Parameters of every point, series-major.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = self.base_params()?;
        let xs = self.sweep.values();
        let mut out = Vec::new();
        for (si, &other) in self.series_values().iter().enumerate() {
            for &x in &xs {
                let (gamma, force) = match self.sweep.variable {
                    SweepVariable::Force => (other, x),
                    SweepVariable::Gamma => (x, other),
                };
                let mut params = ModelParams::new(gamma, base.beta, 0.0, base.potential.clone())?;
                let force = if self.sweep.critical_units {
                    x * params.reference_scales().critical_force()?
                } else {
                    force
                };
                params = params.with_force(force);
                out.push(SweepPoint {
                    index: out.len(),
                    series: si,
                    params,
                });
            }
        }
        Ok(out)
    }

    /// Raw force range of series `series`, used for the finite-difference step.
    pub fn force_range(&self, series: usize) -> Result<(f64, f64)> {
        let s = &self.sweep;
        let scale = if s.critical_units {
            let gamma = self.series_values()[series];
            self.base_params()?.with_gamma(gamma).reference_scales().critical_force()?
        } else {
            1.0
        };
        Ok((s.start.min(s.stop) * scale, s.start.max(s.stop) * scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
mode = "transport"
[params]
gamma = 1.0
beta = 5.0
potential = { kind = "cosine", v0 = 1.0, period = 1.0 }
[sweep]
variable = "force"
start = 0.0
stop = 1.0
count = 3
"#;

    #[test]
    fn parse_defaults() {
        let c = SweepConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.truncation, TruncConfig::default());
        assert_eq!(c.sweep.values(), vec![0.0, 0.5, 1.0]);
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].params.force, 1.0);
        assert_eq!(pts[2].params.gamma, 1.0);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = SweepConfig::from_toml(BASIC).unwrap();
        c.sweep.series = vec![1.0, 50.0];
        c.truncation.momentum_centre = Some(0.5);
        let back = SweepConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn critical_units() {
        let text = BASIC.replace("count = 3", "count = 2\ncritical_units = true\nseries = [0.5, 2.0]");
        let c = SweepConfig::from_toml(&text).unwrap();
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3].series, 1);
        assert!((pts[3].params.force - 3.36 * 2.0).abs() < 1e-12);
        assert!((c.force_range(0).unwrap().1 - 3.36 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects() {
        let cases = [
            BASIC.replace("count = 3", "count = 0"),
            BASIC.replace("stop = 1.0", "stop = inf"),
            BASIC.replace("kind = \"cosine\", v0 = 1.0", "kind = \"fourier\", cos = [1.0, 0.5]")
                + "[output]\nscale = true\n",
            BASIC.replace("mode = \"transport\"", "mode = \"warp\""),
            BASIC.replace("variable = \"force\"", "variable = \"gamma\"\ncritical_units = true"),
            BASIC.replace("gamma = 1.0", "gamma = -1.0"),
            BASIC.replace("mode = \"transport\"", "mode = \"expand\"") + "[expansion]\norder = 4\norders = [5]\n",
            BASIC.replace("mode = \"transport\"", "mode = \"mc\"") + "[mc]\ndt = 0.9\n",
            format!("{BASIC}bogus = 1\n"),
        ];
        for text in &cases {
            let e = SweepConfig::from_toml(text).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}\n{e}");
        }
    }
}
