//! Cross-module property tests: derivative/evaluation consistency against
//! finite differences, operator identities on random data, and transport
//! invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dbar_core::battery::{closed_form_battery, random_poly};
use dbar_core::cauchy::{self, CauchyEvaluator};
use dbar_core::domains::DiscDomain;
use dbar_core::expr::{CExpr, DKind, Point, Var};
use dbar_core::form::CoordBlock;
use dbar_core::poly::exprs_equal;
use dbar_core::transport::pullback_to_bidisc;
use dbar_core::{normalize, parse};

fn random_interior(rng: &mut ChaCha8Rng, rho: f64) -> Complex64 {
    let r: f64 = rng.gen_range(0.0..rho * rho).sqrt();
    let t: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    Complex64::from_polar(r, t)
}

#[test]
fn symbolic_derivatives_match_central_differences() {
    // 100 random polynomials, both Wirtinger directions, |z| <= 0.9
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let h = 1e-5;
    for _ in 0..100 {
        let p = random_poly(&mut rng, &[Var::Z1, Var::Z2], 3, 4);
        let z1 = random_interior(&mut rng, 0.9);
        let z2 = random_interior(&mut rng, 0.9);
        let at = |a: Complex64| {
            p.eval(&Point::new().with(Var::Z1, a).with(Var::Z2, z2))
                .unwrap()
        };
        // ∂ = (∂x - i∂y)/2, ∂̄ = (∂x + i∂y)/2
        let dx = (at(z1 + h) - at(z1 - h)) / (2.0 * h);
        let dy = (at(z1 + Complex64::new(0.0, h)) - at(z1 - Complex64::new(0.0, h))) / (2.0 * h);
        let i = Complex64::new(0.0, 1.0);
        let fd_holo = (dx - i * dy) / 2.0;
        let fd_anti = (dx + i * dy) / 2.0;
        let point = Point::new().with(Var::Z1, z1).with(Var::Z2, z2);
        let sym_holo = p.wirt_d(Var::Z1, DKind::Holo).eval(&point).unwrap();
        let sym_anti = p.wirt_d(Var::Z1, DKind::Anti).eval(&point).unwrap();
        let scale = 1.0 + sym_holo.norm() + sym_anti.norm();
        assert!((fd_holo - sym_holo).norm() / scale < 1e-6);
        assert!((fd_anti - sym_anti).norm() / scale < 1e-6);
    }
}

#[test]
fn dbar_of_solid_transform_recovers_fifty_random_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for _ in 0..50 {
        let h = random_poly(&mut rng, &[Var::Zeta], 4, 5);
        let t = cauchy::symbolic_solid(&h, Var::Zeta, &DiscDomain::unit()).unwrap();
        let back = t.wirt_d(Var::Zeta, DKind::Anti);
        assert!(back.sub(&h).max_coeff_norm() < 1e-10);
    }
}

#[test]
fn numeric_solid_transform_is_a_dbar_inverse() {
    // non-polynomial data forces the quadrature path; a centered finite
    // difference of z -> T h(z) must reproduce h to 1e-4 on |z| <= 0.8
    let ev = CauchyEvaluator::unit(64, 256);
    let h = parse("pow(zeta-3, 0.7, 0, 2*pi)").unwrap();
    let step = 1e-5;
    let t = |z: Complex64| {
        cauchy::solid_numeric_fn(
            |zeta| h.eval(&Point::new().with(Var::Zeta, zeta)),
            &ev.disc,
            z,
            ev.grid.n_r,
            ev.grid.n_theta,
        )
        .unwrap()
    };
    for z in [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, -0.3),
        Complex64::new(-0.7, 0.35),
        Complex64::new(0.1, 0.78),
    ] {
        let i = Complex64::new(0.0, 1.0);
        let dx = (t(z + step) - t(z - step)) / (2.0 * step);
        let dy = (t(z + i * step) - t(z - i * step)) / (2.0 * step);
        let fd_dbar = (dx + i * dy) / 2.0;
        let expected = h.eval(&Point::new().with(Var::Zeta, z)).unwrap();
        assert!(
            (fd_dbar - expected).norm() < 1e-4,
            "z={z}: {}",
            (fd_dbar - expected).norm()
        );
    }
}

#[test]
fn pullback_preserves_closedness_on_random_forms() {
    for (i, f) in closed_form_battery(CoordBlock::Z, 2, 1, 10, 606)
        .iter()
        .enumerate()
    {
        let pulled = pullback_to_bidisc(f).unwrap();
        let report = pulled.dbar_closed_check(&[], 1e-10).unwrap();
        assert!(report.exact, "member {i} lost closedness");
    }
}

#[test]
fn pushforward_then_pullback_is_identity_on_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let u = random_poly(&mut rng, &[Var::W1, Var::W2], 3, 4).to_expr();
        let through = dbar_core::transport::compose_with_psi(
            &dbar_core::transport::pushforward_to_hartogs(&u),
        );
        assert!(exprs_equal(&u, &through, 1e-12).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Mixed Wirtinger derivatives commute on polynomial expressions.
    #[test]
    fn mixed_derivatives_commute(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(&mut rng, &[Var::Z1, Var::Z2], 3, 4);
        let dirs = [
            (Var::Z1, DKind::Holo),
            (Var::Z1, DKind::Anti),
            (Var::Z2, DKind::Holo),
            (Var::Z2, DKind::Anti),
        ];
        let a = dirs[(seed % 4) as usize];
        let b = dirs[((seed / 4) % 4) as usize];
        let ab = p.wirt_d(a.0, a.1).wirt_d(b.0, b.1);
        let ba = p.wirt_d(b.0, b.1).wirt_d(a.0, a.1);
        prop_assert!(ab.sub(&ba).max_coeff_norm() < 1e-12);
    }

    /// The holomorphic derivative kills expressions that only mention the
    /// conjugate variable, and symmetrically.
    #[test]
    fn derivative_of_missing_variable_vanishes(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_poly(&mut rng, &[Var::Z2], 3, 4);
        let conj_only = CExpr::mul(
            CExpr::conj(CExpr::var(Var::Z1)),
            base.to_expr(),
        );
        let d = normalize(&conj_only.wirt_d(Var::Z1, DKind::Holo)).unwrap();
        prop_assert!(d.is_zero());
        let d = normalize(&CExpr::var(Var::Z1).wirt_d(Var::Z1, DKind::Anti)).unwrap();
        prop_assert!(d.is_zero());
    }

    /// print -> parse is the identity up to normalization, including branch
    /// powers.
    #[test]
    fn print_parse_round_trip(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = random_poly(&mut rng, &[Var::Z1, Var::W2], 3, 4).to_expr();
        if seed % 3 == 0 {
            e = CExpr::mul(
                e,
                parse("pow(z2-1, 0.5, pi/2, 3*pi/2)").unwrap(),
            );
        }
        if seed % 5 == 0 {
            e = CExpr::add(e, CExpr::abs_pow(CExpr::var(Var::W2), 2.5));
        }
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert!(exprs_equal(&e, &back, 1e-12).unwrap(), "{text}");
    }

    /// Cauchy-Green: h = S h + T(∂̄ h) for random polynomial data.
    #[test]
    fn cauchy_green_decomposition(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_poly(&mut rng, &[Var::Zeta], 3, 4);
        let s = cauchy::symbolic_boundary(&h, Var::Zeta, &DiscDomain::unit()).unwrap();
        let t = cauchy::symbolic_solid(
            &h.wirt_d(Var::Zeta, DKind::Anti),
            Var::Zeta,
            &DiscDomain::unit(),
        )
        .unwrap();
        prop_assert!(s.add(&t).sub(&h).max_coeff_norm() < 1e-10);
    }
}
