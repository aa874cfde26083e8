//! Sweeps behind the seven standard figures.
//!
//! | fig | mode           | sweep                           | series            |
//! |-----|----------------|---------------------------------|-------------------|
//! | 1   | transport      | F/F_c in [0, 3], scaled         | γ = 0.01, 0.1, 1  |
//! | 2   | transport      | same as 1 (D/D_L column)        | γ = 0.01, 0.1, 1  |
//! | 3   | transport      | F in [0, 4]                     | γ = 0.5, 5, 10    |
//! | 4   | expand         | F in [0, 2], U partial sums     | γ = 1, 50         |
//! | 5   | expand         | F in [0, 2], D partial sums     | γ = 1, 50         |
//! | 6   | einstein_check | F in [0, 2]                     | γ = 1, 50         |
//! | 7   | overdamped     | γ in [1, 40]                    | F = 0.5, 1        |
//!
//! Figures 1 and 2 use `V₀ = π²/16`, `β = 1.2/V₀`, `L = 2π`; the others use
//! `V₀ = 1`, `β = 5`, `L = 1`.

use std::f64::consts::PI;

use crate::config::*;
use crate::error::{Error, Result};

pub const FIGURES: std::ops::RangeInclusive<u8> = 1..=7;

fn unit_cell(mode: Mode, variable: SweepVariable, range: (f64, f64, usize), series: Vec<f64>) -> SweepConfig {
    SweepConfig {
        mode,
        params: ParamsConfig {
            gamma: 1.0,
            beta: 5.0,
            force: 0.0,
            potential: PotentialConfig::Cosine { v0: 1.0, period: 1.0 },
        },
        sweep: SweepSpec {
            variable,
            start: range.0,
            stop: range.1,
            count: range.2,
            critical_units: false,
            series,
        },
        truncation: TruncConfig::default(),
        expansion: ExpansionConfig::default(),
        mc: McSettings::default(),
        output: OutputConfig::default(),
    }
}

pub fn figure(n: u8) -> Result<SweepConfig> {
    let c = match n {
        1 | 2 => {
            let v0 = PI * PI / 16.0;
            let mut c = unit_cell(Mode::Transport, SweepVariable::Force, (0.0, 3.0, 13), vec![0.01, 0.1, 1.0]);
            c.params.beta = 1.2 / v0;
            c.params.potential = PotentialConfig::Cosine { v0, period: 2.0 * PI };
            c.sweep.critical_units = true;
            c.output.scale = true;
            c
        }
        3 => unit_cell(Mode::Transport, SweepVariable::Force, (0.0, 4.0, 41), vec![0.5, 5.0, 10.0]),
        4 => {
            let mut c = unit_cell(Mode::Expand, SweepVariable::Force, (0.0, 2.0, 41), vec![1.0, 50.0]);
            c.expansion.orders = vec![1, 3, 5, 9];
            c
        }
        5 => {
            let mut c = unit_cell(Mode::Expand, SweepVariable::Force, (0.0, 2.0, 41), vec![1.0, 50.0]);
            c.expansion.orders = vec![0, 2, 4, 6, 8];
            c
        }
        6 => unit_cell(Mode::EinsteinCheck, SweepVariable::Force, (0.0, 2.0, 41), vec![1.0, 50.0]),
        7 => unit_cell(Mode::Overdamped, SweepVariable::Gamma, (1.0, 40.0, 40), vec![0.5, 1.0]),
        _ => return Err(Error::Config(format!("no preset for figure {n}; choose 1 to 7"))),
    };
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for n in FIGURES {
            let c = figure(n).unwrap();
            assert_eq!(SweepConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
        assert!(figure(0).is_err());
        assert!(figure(8).is_err());
    }

    #[test]
    fn first_two_share_the_sweep() {
        assert_eq!(figure(1).unwrap(), figure(2).unwrap());
        let c = figure(1).unwrap();
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 39);
        let last = &pts[38].params;
        assert_eq!(last.gamma, 1.0);
        assert!((last.force - 3.0 * 3.36 * (PI * PI / 16.0).sqrt()).abs() < 1e-12);
    }
}
