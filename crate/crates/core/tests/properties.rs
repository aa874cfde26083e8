use approx::assert_relative_eq;
use proptest::prelude::*;
use std::f64::consts::PI;

use washboard_core::hermite_fourier::{HermiteFourierField, TruncationSpec};
use washboard_core::model::{ModelParams, PeriodicPotential};
use washboard_core::montecarlo::{simulate, simulate_trajectory, McConfig};
use washboard_core::overdamped::{solve_overdamped, stratonovich_drift};
use washboard_core::quadrature::weighted_inner_product;
use washboard_core::transport::{solve_transport, solve_transport_auto};

fn potential() -> impl Strategy<Value = PeriodicPotential> {
    (
        0.5..7.0f64,
        prop::collection::vec(-1.5..1.5f64, 1..4),
        prop::collection::vec(-1.5..1.5f64, 0..3),
    )
        .prop_map(|(l, c, s)| PeriodicPotential::new(l, c, s).unwrap())
}

/// Random field on `n_hermite` levels whose top two levels are zero.
fn field_with_headroom(n_hermite: usize, n_fourier: usize, beta: f64) -> impl Strategy<Value = HermiteFourierField> {
    let b = 2 * n_fourier + 1;
    prop::collection::vec(-1.0..1.0f64, (n_hermite - 1) * b).prop_map(move |v| {
        let mut f = HermiteFourierField::zeros(n_hermite, n_fourier, 1.0, beta);
        f.as_mut_slice()[..v.len()].copy_from_slice(&v);
        f
    })
}

fn inner(g: &HermiteFourierField, h: &HermiteFourierField, v: &PeriodicPotential) -> f64 {
    let n_p = 2 * g.n_hermite() + 8;
    let n_q = 64.max(8 * g.n_fourier());
    weighted_inner_product(g, h, v, n_p, n_q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_derivative_and_period(v in potential()) {
        let l = v.period();
        let w = 2.0 * PI / l;
        // third derivative bound for the O(h²) central difference error
        let cube = |c: &[f64]| -> f64 {
            c.iter().enumerate().map(|(i, c)| c.abs() * ((i + 1) as f64 * w).powi(3)).sum()
        };
        let c3 = cube(v.cos_coeffs()) + cube(v.sin_coeffs());
        for i in 0..64 {
            let q = i as f64 * l / 64.0;
            for h in [1e-3, 1e-4] {
                let fd = (v.evaluate(q + h) - v.evaluate(q - h)) / (2.0 * h);
                let tol = c3 * h * h / 6.0 + 1e-9 * (1.0 + v.amplitude_bound() * w);
                prop_assert!((v.derivative(q) - fd).abs() <= tol);
            }
            let scale = 1.0 + v.amplitude_bound();
            prop_assert!((v.evaluate(q + l) - v.evaluate(q)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn ladder_operators_are_adjoint(
        beta in 0.3..5.0f64,
        g in field_with_headroom(6, 2, 1.0),
        h in field_with_headroom(6, 2, 1.0),
    ) {
        let v = PeriodicPotential::cosine(0.7, 1.0).unwrap();
        let rescale = |f: &HermiteFourierField| {
            let mut out = HermiteFourierField::zeros(f.n_hermite(), f.n_fourier(), 1.0, beta);
            out.as_mut_slice().copy_from_slice(f.as_slice());
            out
        };
        let (g, h) = (rescale(&g), rescale(&h));
        let lhs = inner(&g.raise(), &h, &v);
        let rhs = inner(&g, &h.lower(), &v);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));

        // a⁻a⁺ − a⁺a⁻ = β
        let mut c = g.raise().lower();
        c.axpy(-1.0, &g.lower().raise());
        c.axpy(-beta, &g);
        prop_assert!(c.max_abs() <= 1e-12 * beta * (1.0 + g.max_abs()) * 8.0);
    }

    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        g in field_with_headroom(5, 2, 2.0),
        h in field_with_headroom(5, 2, 2.0),
        k in field_with_headroom(5, 2, 2.0),
        a in -3.0..3.0f64,
    ) {
        let v = PeriodicPotential::new(1.0, vec![0.4, 0.1], vec![0.2]).unwrap();
        let gh = inner(&g, &h, &v);
        prop_assert!((gh - inner(&h, &g, &v)).abs() <= 1e-13 * (1.0 + gh.abs()));
        let mut combo = g.scaled(a);
        combo.axpy(1.0, &k);
        let lin = inner(&combo, &h, &v);
        let parts = a * gh + inner(&k, &h, &v);
        prop_assert!((lin - parts).abs() <= 1e-12 * (1.0 + lin.abs() + parts.abs()));
    }

    #[test]
    fn overdamped_oracles(v0 in 0.5..1.0f64, beta in 1.0..5.0f64, force in 0.0..4.0f64) {
        let v = PeriodicPotential::cosine(v0, 1.0).unwrap();
        let r = solve_overdamped(&v, beta, force, 48).unwrap();
        let s = stratonovich_drift(&v, beta, force);
        prop_assert!((r.drift - s).abs() <= 1e-6 * s.abs().max(1e-300));
        prop_assert!(r.diffusion > 0.0);
        prop_assert!(r.drift * force >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn free_particle_is_exact(gamma in 0.1..10.0f64, beta in 0.2..5.0f64, force in -3.0..3.0f64) {
        let p = ModelParams::new(gamma, beta, force, PeriodicPotential::flat(1.0).unwrap()).unwrap();
        let t = TruncationSpec::dirichlet(40, 2).unwrap();
        let r = solve_transport_auto(&p, &t, 1e-8, 640).unwrap().result;
        assert_relative_eq!(r.drift, force / gamma, epsilon = 1e-12, max_relative = 1e-10);
        assert_relative_eq!(r.d_primary, 1.0 / (beta * gamma), max_relative = 1e-10);
        prop_assert!(r.d_ibp >= 0.0);
    }

    #[test]
    fn reflection_symmetry(gamma in 1.0..5.0f64, force in 0.0..2.0f64) {
        let v = PeriodicPotential::cosine(1.0, 1.0).unwrap();
        let p = ModelParams::new(gamma, 5.0, force, v).unwrap();
        let t = TruncationSpec::dirichlet(160, 32).unwrap();
        let a = solve_transport(&p, &t).unwrap().result;
        let b = solve_transport(&p.reflected(), &t).unwrap().result;
        prop_assert!((a.drift + b.drift).abs() <= 1e-9);
        prop_assert!((a.d_primary - b.d_primary).abs() <= 1e-9);
        prop_assert!(a.d_ibp >= 0.0 && b.d_ibp >= 0.0);
    }

    #[test]
    fn monte_carlo_is_deterministic(seed in any::<u64>(), force in -2.0..2.0f64) {
        let v = PeriodicPotential::cosine(1.0, 1.0).unwrap();
        let p = ModelParams::new(1.0, 5.0, force, v).unwrap();
        let c = McConfig::new(p, 0.01, 400, 6, seed).unwrap();
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        prop_assert_eq!(a.drift.to_bits(), b.drift.to_bits());
        prop_assert_eq!(a.diffusion.to_bits(), b.diffusion.to_bits());
        prop_assert!(a.drift.is_finite() && a.diffusion.is_finite());
        prop_assert!(a.stderr_drift > 0.0 && a.stderr_diffusion > 0.0);
        // one stream per trajectory, whatever order they are run in
        let last = simulate_trajectory(&c, 5).unwrap();
        let first = simulate_trajectory(&c, 0).unwrap();
        prop_assert_eq!(last.to_bits(), simulate_trajectory(&c, 5).unwrap().to_bits());
        prop_assert!(first != last);
    }
}

#[test]
fn gaussian_second_moment() {
    let v = PeriodicPotential::cosine(1.0, 1.0).unwrap();
    for beta in [0.5, 1.0, 5.0] {
        let one = HermiteFourierField::constant(1.0, 4, 2, 1.0, beta);
        let p2 = one.momentum().momentum();
        assert_relative_eq!(inner(&one, &p2, &v), 1.0 / beta, max_relative = 1e-12);
    }
}
