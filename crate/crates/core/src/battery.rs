//! Seeded, reproducible generators for the test batteries: random
//! polynomials, ∂̄-closed forms produced as ∂̄ of random potentials, and the
//! vanishing-Taylor-part polynomials that the Hardy inequality requires.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{CExpr, DKind, Var};
use crate::form::{increasing_indices, CoordBlock, Form};
use crate::poly::{Mono, Poly};

fn unit_disc_coeff(rng: &mut ChaCha8Rng) -> Complex64 {
    let r: f64 = rng.gen_range(0.0f64..1.0).sqrt();
    let theta: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    Complex64::from_polar(r, theta)
}

/// Random polynomial over the listed variables and their conjugates:
/// `n_terms` monomials with per-variable exponents up to `max_deg` and
/// coefficients uniform in the unit disc.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[Var], max_deg: i32, n_terms: usize) -> Poly {
    let mut out = Poly::zero();
    for _ in 0..n_terms {
        let mut m = Mono::unit();
        for &v in vars {
            m.exps[crate::poly::slot(v, DKind::Holo)] = rng.gen_range(0..=max_deg) as i16;
            m.exps[crate::poly::slot(v, DKind::Anti)] = rng.gen_range(0..=max_deg) as i16;
        }
        out = out.add(&Poly::from_term(m, unit_disc_coeff(rng)));
    }
    out
}

/// Random interior point of the unit polydisc assigned to the block's
/// first `n` variables (modulus capped at `rho`).
pub fn random_point(rng: &mut ChaCha8Rng, block: CoordBlock, n: usize, rho: f64) -> crate::expr::Point {
    let mut point = crate::expr::Point::new();
    for axis in 1..=n {
        let r: f64 = rng.gen_range(0.0f64..rho * rho).sqrt();
        let theta: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        point.set(block.var(axis), Complex64::from_polar(r, theta));
    }
    point
}

/// A ∂̄-closed (0,q) polynomial form on the n-fold product, built as ∂̄ of a
/// random (0,q-1) potential (always closed; top-degree forms are random
/// directly since every (0,n) form is closed).
pub fn random_closed_form(
    rng: &mut ChaCha8Rng,
    block: CoordBlock,
    n: usize,
    q: usize,
    max_deg: i32,
    n_terms: usize,
) -> Form {
    let vars: Vec<Var> = (1..=n).map(|a| block.var(a)).collect();
    if q == n {
        // top degree: any coefficient works
        let idx: Vec<usize> = (1..=n).collect();
        let g = random_poly(rng, &vars, max_deg, n_terms);
        return Form::new(block, n, q)
            .unwrap()
            .with_component(&idx, g.to_expr())
            .unwrap();
    }
    if q == 1 {
        let g = random_poly(rng, &vars, max_deg, n_terms);
        let mut f = Form::new(block, n, 1).unwrap();
        for axis in 1..=n {
            let d = g.wirt_d(block.var(axis), DKind::Anti);
            f = f.with_component(&[axis], d.to_expr()).unwrap();
        }
        return f;
    }
    // q = 2, n = 3: differentiate a random (0,1) potential
    let mut potential = Form::new(block, n, 1).unwrap();
    for idx in increasing_indices(n, 1) {
        let g = random_poly(rng, &vars, max_deg, n_terms);
        potential = potential.with_component(&idx, g.to_expr()).unwrap();
    }
    potential.dbar_form().unwrap()
}

/// The fixed closed-form battery used by the acceptance checks: `count`
/// members at the given (n, q), from one seed.
pub fn closed_form_battery(
    block: CoordBlock,
    n: usize,
    q: usize,
    count: usize,
    seed: u64,
) -> Vec<Form> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_closed_form(&mut rng, block, n, q, 2, 4))
        .collect()
}

/// Random polynomial in one variable whose monomials w^a w̄^b all have
/// a+b in [k, k+4]; the Taylor part of order k-1 vanishes identically.
pub fn vanishing_taylor_poly(rng: &mut ChaCha8Rng, var: Var, k: usize, n_terms: usize) -> Poly {
    let mut out = Poly::zero();
    for _ in 0..n_terms {
        let total = rng.gen_range(k..=k + 4) as i32;
        let a = rng.gen_range(0..=total);
        let b = total - a;
        let mut m = Mono::unit();
        m.exps[crate::poly::slot(var, DKind::Holo)] = a as i16;
        m.exps[crate::poly::slot(var, DKind::Anti)] = b as i16;
        out = out.add(&Poly::from_term(m, unit_disc_coeff(rng)));
    }
    out
}

/// Random polynomial scalars for the operator-norm batteries.
pub fn random_scalar_battery(var: Var, count: usize, max_deg: i32, seed: u64) -> Vec<CExpr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_poly(&mut rng, &[var], max_deg, 4).to_expr())
        .collect()
}
