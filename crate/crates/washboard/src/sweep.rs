//! Parallel sweeps. Points run concurrently and rows come back in index
//! order, so the output does not depend on scheduling.

use rayon::prelude::*;
use washboard_core::expansion::{
    build_chain, diffusion_coefficients, partial_sum_d, partial_sum_u, ExpansionTable, SeriesMode,
};
use washboard_core::model::ModelParams;
use washboard_core::montecarlo::{simulate_trajectory, McConfig, McEstimate};
use washboard_core::overdamped::{solve_overdamped, stratonovich_drift};
use washboard_core::transport::{
    choose_momentum_centre, solve_transport, solve_transport_adaptive, solve_transport_auto,
    TransportSolution,
};

use crate::config::{Mode, SweepConfig, SweepPoint, SweepVariable, TruncConfig};
use crate::error::Result;
use crate::table::{Table, Value};

type CoreResult<T> = washboard_core::Result<T>;

/// Result of [`run_sweep`].
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub table: Table,
    /// Expansion coefficients per series, `expand` mode only.
    pub coefficients: Option<Table>,
    /// Rows whose `error` cell is set.
    pub failures: usize,
}

/// Spectral solve with the configured truncation policy. Unless fixed in the
/// config, the momentum centre is chosen per point.
pub fn solve_point(params: &ModelParams, trunc: &TruncConfig) -> CoreResult<TransportSolution> {
    let base = trunc.spec()?;
    match (trunc.momentum_centre, trunc.adaptive) {
        (None, true) => solve_transport_auto(params, &base, trunc.top_tol, trunc.max_hermite),
        (None, false) => solve_transport(params, &base.with_momentum_centre(choose_momentum_centre(params, &base)?)),
        (Some(c), true) => solve_transport_adaptive(params, &base.with_momentum_centre(c), trunc.top_tol, trunc.max_hermite),
        (Some(c), false) => solve_transport(params, &base.with_momentum_centre(c)),
    }
}

/// Ensemble estimate with trajectories spread over the thread pool. Identical
/// to the sequential `montecarlo::simulate` for the same config.
pub fn simulate_parallel(config: &McConfig) -> CoreResult<McEstimate> {
    config.validate()?;
    let x = (0..config.n_traj)
        .into_par_iter()
        .map(|k| simulate_trajectory(config, k))
        .collect::<CoreResult<Vec<_>>>()?;
    Ok(McEstimate::from_displacements(&x, config.window()))
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    CriticalForce,
    FreeDrift,
    FreeDiffusion,
}

impl Scale {
    fn suffix(self) -> &'static str {
        match self {
            Scale::CriticalForce => "over_Fc",
            Scale::FreeDrift => "over_UL",
            Scale::FreeDiffusion => "over_DL",
        }
    }

    fn value(self, p: &ModelParams) -> f64 {
        let s = p.reference_scales();
        match self {
            Scale::CriticalForce => s.critical_force.unwrap_or(f64::NAN),
            Scale::FreeDrift => s.free_drift,
            Scale::FreeDiffusion => s.free_diffusion,
        }
    }
}

struct Layout {
    columns: Vec<String>,
    scaled: Vec<(usize, Scale)>,
}

impl Layout {
    /// `gamma, force, <body…>, <scaled…>, error`
    fn new(body: Vec<String>, scaled: &[(&str, Scale)], scale: bool) -> Self {
        let mut columns = vec!["gamma".to_owned(), "force".to_owned()];
        columns.extend(body);
        let mut idx = Vec::new();
        if scale {
            for &(raw, s) in scaled {
                let i = columns.iter().position(|c| c == raw).expect("scaled column exists");
                idx.push((i, s));
            }
            for &(raw, s) in scaled {
                columns.push(format!("{raw}_{}", s.suffix()));
            }
        }
        columns.push("error".to_owned());
        Self { columns, scaled: idx }
    }

    fn body_width(&self) -> usize {
        self.columns.len() - 3 - self.scaled.len()
    }

    fn row(&self, p: &ModelParams, body: CoreResult<Vec<Value>>) -> Vec<Value> {
        let mut row = vec![Value::Float(p.gamma), Value::Float(p.force)];
        let error = match body {
            Ok(b) => {
                debug_assert_eq!(b.len(), self.body_width());
                row.extend(b);
                Value::Missing
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Value::Missing, self.body_width()));
                Value::Text(e.to_string())
            }
        };
        for &(i, s) in &self.scaled {
            row.push(match row[i].as_f64() {
                Some(x) => Value::Float(x / s.value(p)),
                None => Value::Missing,
            });
        }
        row.push(error);
        row
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| (*s).to_owned()).collect()
}

const DIAGNOSTICS: [&str; 7] = [
    "n_hermite",
    "n_fourier",
    "momentum_centre",
    "top_ratio",
    "fourier_tail",
    "solvability_residual",
    "d_ibp_noise",
];

const BASIC_SCALES: [(&str, Scale); 3] = [
    ("force", Scale::CriticalForce),
    ("U", Scale::FreeDrift),
    ("D_primary", Scale::FreeDiffusion),
];

fn transport_body(sol: &TransportSolution) -> Vec<Value> {
    let r = &sol.result;
    vec![
        r.drift.into(),
        r.d_primary.into(),
        r.d_ibp.into(),
        r.n_hermite.into(),
        r.n_fourier.into(),
        sol.density.momentum_centre.into(),
        r.top_ratio().into(),
        r.fourier_tail.into(),
        r.solvability_residual.into(),
        r.d_ibp_noise.into(),
    ]
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    config.validate()?;
    let points = config.points()?;
    let scale = config.output.scale;
    let (layout, rows, coefficients) = match config.mode {
        Mode::Transport => {
            let mut body = names(&["U", "D_primary", "D_ibp"]);
            body.extend(names(&DIAGNOSTICS));
            let layout = Layout::new(body, &BASIC_SCALES, scale);
            let rows = map_points(&points, |p| solve_point(&p.params, &config.truncation).map(|s| transport_body(&s)));
            (layout, rows, None)
        }
        Mode::Overdamped => overdamped(config, &points, scale),
        Mode::Mc => mc(config, &points, scale),
        Mode::EinsteinCheck => einstein(config, &points, scale)?,
        Mode::Expand => expand(config, &points, scale)?,
    };
    let mut table = Table::new(layout.columns.clone());
    for (p, body) in points.iter().zip(rows) {
        table.push(layout.row(&p.params, body));
    }
    let err = table.columns.len() - 1;
    let failures = table.rows.iter().filter(|r| r[err] != Value::Missing).count();
    Ok(SweepOutput {
        table,
        coefficients,
        failures,
    })
}

type Rows = Vec<CoreResult<Vec<Value>>>;

fn map_points<F>(points: &[SweepPoint], f: F) -> Rows
where
    F: Fn(&SweepPoint) -> CoreResult<Vec<Value>> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

fn overdamped(config: &SweepConfig, points: &[SweepPoint], scale: bool) -> (Layout, Rows, Option<Table>) {
    let body = names(&[
        "U",
        "D_primary",
        "U_O_over_gamma",
        "D_O_over_gamma",
        "U_O",
        "D_O",
        "U_O_stratonovich",
        "drift_error",
        "diffusion_error",
    ]);
    let layout = Layout::new(body, &BASIC_SCALES, scale);
    let rows = map_points(points, |p| {
        let params = &p.params;
        let sol = solve_point(params, &config.truncation)?;
        let od = solve_overdamped(&params.potential, params.beta, params.force, config.truncation.n_fourier)?;
        let strat = stratonovich_drift(&params.potential, params.beta, params.force);
        let g = params.gamma;
        let (u, d) = (sol.result.drift, sol.result.d_primary);
        Ok(vec![
            u.into(),
            d.into(),
            (od.drift / g).into(),
            (od.diffusion / g).into(),
            od.drift.into(),
            od.diffusion.into(),
            strat.into(),
            (g * u - od.drift).abs().into(),
            (g * d - od.diffusion).abs().into(),
        ])
    });
    (layout, rows, None)
}

fn mc(config: &SweepConfig, points: &[SweepPoint], scale: bool) -> (Layout, Rows, Option<Table>) {
    let body = names(&[
        "U_mc", "D_mc", "stderr_U", "stderr_D", "n_traj", "U", "D_primary", "z_U", "z_D",
    ]);
    let scales = [
        ("force", Scale::CriticalForce),
        ("U_mc", Scale::FreeDrift),
        ("D_mc", Scale::FreeDiffusion),
        ("U", Scale::FreeDrift),
        ("D_primary", Scale::FreeDiffusion),
    ];
    let layout = Layout::new(body, &scales, scale);
    let rows = map_points(points, |p| {
        let cfg = config.mc.config(p.params.clone())?;
        let e = simulate_parallel(&cfg)?;
        let (u, d, zu, zd) = if config.mc.compare_spectral {
            let r = solve_point(&p.params, &config.truncation)?.result;
            (Some(r.drift), Some(r.d_primary), Some(e.drift_z(r.drift)), Some(e.diffusion_z(r.d_primary)))
        } else {
            (None, None, None, None)
        };
        Ok(vec![
            e.drift.into(),
            e.diffusion.into(),
            e.stderr_drift.into(),
            e.stderr_diffusion.into(),
            e.n_traj.into(),
            u.into(),
            d.into(),
            zu.into(),
            zd.into(),
        ])
    });
    (layout, rows, None)
}

/// Finite-difference step for series `series`: a two-hundredth of the force range.
pub fn einstein_step(config: &SweepConfig, series: usize) -> Result<f64> {
    let (lo, hi) = config.force_range(series)?;
    Ok((hi - lo) / 200.0)
}

fn einstein(config: &SweepConfig, points: &[SweepPoint], scale: bool) -> Result<(Layout, Rows, Option<Table>)> {
    let body = names(&["U", "D_primary", "dU_dF", "D_einstein", "gap"]);
    let scales = [
        ("force", Scale::CriticalForce),
        ("U", Scale::FreeDrift),
        ("D_primary", Scale::FreeDiffusion),
        ("D_einstein", Scale::FreeDiffusion),
    ];
    let layout = Layout::new(body, &scales, scale);
    let steps = (0..config.series_values().len())
        .map(|s| einstein_step(config, s))
        .collect::<Result<Vec<_>>>()?;
    let rows = map_points(points, |p| {
        let h = steps[p.series];
        let params = &p.params;
        let centre = solve_point(params, &config.truncation)?.result;
        let up = solve_point(&params.with_force(params.force + h), &config.truncation)?.result;
        let down = solve_point(&params.with_force(params.force - h), &config.truncation)?.result;
        let du = (up.drift - down.drift) / (2.0 * h);
        let d_einstein = du / params.beta;
        Ok(vec![
            centre.drift.into(),
            centre.d_primary.into(),
            du.into(),
            d_einstein.into(),
            (centre.d_primary - d_einstein).into(),
        ])
    });
    Ok((layout, rows, None))
}

fn expand(config: &SweepConfig, points: &[SweepPoint], scale: bool) -> Result<(Layout, Rows, Option<Table>)> {
    let k = config.expansion.order;
    let orders = &config.expansion.orders;
    let d_orders: Vec<usize> = orders.iter().copied().filter(|&o| o < k).collect();
    let mut body = names(&["U", "D_primary"]);
    body.extend(orders.iter().map(|o| format!("U_series_{o}")));
    body.extend(d_orders.iter().map(|o| format!("D_naive_{o}")));
    body.extend(d_orders.iter().map(|o| format!("D_full_{o}")));
    body.push("ratio_radius".to_owned());
    let layout = Layout::new(body, &BASIC_SCALES, scale);

    let mut trunc = config.truncation.spec()?;
    if let Some(n) = config.expansion.n_hermite {
        trunc = trunc.with_hermite(n);
    }
    let by_force = config.sweep.variable == SweepVariable::Force;
    // One chain per friction value: per series in a force sweep, per point otherwise.
    let chain_table = |p: &SweepPoint| -> CoreResult<ExpansionTable> {
        diffusion_coefficients(&build_chain(&p.params.with_force(0.0), &trunc, k)?)
    };
    let tables: Vec<CoreResult<ExpansionTable>> = if by_force {
        (0..config.series_values().len())
            .into_par_iter()
            .map(|s| chain_table(points.iter().find(|p| p.series == s).expect("series has points")))
            .collect()
    } else {
        Vec::new()
    };

    let rows = map_points(points, |p| {
        let owned;
        let table = match config.sweep.variable {
            SweepVariable::Force => match &tables[p.series] {
                Ok(t) => t,
                Err(e) => return Err(e.clone()),
            },
            SweepVariable::Gamma => {
                owned = chain_table(p)?;
                &owned
            }
        };
        let f = p.params.force;
        let sol = solve_point(&p.params, &config.truncation)?.result;
        let mut row = vec![sol.drift.into(), sol.d_primary.into()];
        for &o in orders {
            row.push(partial_sum_u(table, f, o)?.into());
        }
        for &o in &d_orders {
            row.push(partial_sum_d(table, f, o, SeriesMode::NaiveEinstein)?.into());
        }
        for &o in &d_orders {
            row.push(partial_sum_d(table, f, o, SeriesMode::Full)?.into());
        }
        row.push(table.ratio_test_radius().into());
        Ok(row)
    });

    let mut coeffs = Table::new(names(&[
        "gamma",
        "ell",
        "V_ell",
        "D_ell_full",
        "D_ell_naive",
        "sum_Sigma",
        "sum_Xi",
        "identity_defect",
        "error",
    ]));
    if by_force {
        for (s, gamma) in config.series_values().iter().enumerate() {
            match &tables[s] {
                Ok(t) => coefficient_rows(&mut coeffs, *gamma, t),
                Err(e) => {
                    let mut row = vec![Value::Float(*gamma)];
                    row.extend(std::iter::repeat_n(Value::Missing, 6));
                    row.push(Value::Text(e.to_string()));
                    coeffs.push(row);
                }
            }
        }
    }
    Ok((layout, rows, Some(coeffs)))
}

/// Rows `ℓ = 0..=K` with `V_ℓ` for `ℓ ≥ 1` and the `D_ℓ` data for `ℓ < K`.
fn coefficient_rows(out: &mut Table, gamma: f64, t: &ExpansionTable) {
    let k = t.order();
    for l in 0..=k {
        let v = if l >= 1 { Some(t.velocity[l - 1]) } else { None };
        let d = |f: &dyn Fn(usize) -> f64| if l < k { Some(f(l)) } else { None };
        out.push(vec![
            Value::Float(gamma),
            l.into(),
            v.into(),
            d(&|l| t.diffusion(l, SeriesMode::Full)).into(),
            d(&|l| t.diffusion(l, SeriesMode::NaiveEinstein)).into(),
            d(&|l| t.sum_sigma(l)).into(),
            d(&|l| t.sum_xi(l)).into(),
            d(&|l| t.identity_defect(l)).into(),
            Value::Missing,
        ]);
    }
}
