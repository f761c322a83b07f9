//! Numerical verification of the weighted Hardy-type inequality and the
//! truncated Cauchy identities for functions with vanishing Taylor part.
//!
//! Everything here lives on one disc in one complex variable. The
//! hypotheses (p > 4, vanishing Taylor polynomial of order k-1) are exact
//! and are checked symbolically, never numerically.

use num_complex::Complex64;
use serde::Serialize;

use crate::cauchy::symbolic_solid;
use crate::domains::{boundary_nodes, build_polar_grid, contour_integral, DiscDomain};
use crate::error::{Error, Result};
use crate::expr::{complex_powi, CExpr, DKind, Point, Var};
use crate::poly::{modulus_poly, normalize, slot, Mono, Poly};
use crate::weights::{derivative_multidegrees, disc_g_integral, mixed_partial, GridSpec};

/// Checks 𝒫_k h = 0 symbolically: no monomials of total degree < k.
fn require_vanishing_taylor(h: &Poly, var: Var, k: usize) -> Result<()> {
    let slots = [slot(var, DKind::Holo), slot(var, DKind::Anti)];
    let low = h.low_degree_part(&slots, k as i32 - 1).map_err(|_| {
        Error::Hypothesis(
            "the vanishing-Taylor hypothesis is checked symbolically and needs polynomial data"
                .into(),
        )
    })?;
    if !low.is_zero() {
        return Err(Error::Hypothesis(format!(
            "Taylor polynomial of order {} must vanish at 0; found {} low-order monomial(s) \
             (without it the weighted Hardy inequality fails, e.g. for constants)",
            k - 1,
            low.terms.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyRatio {
    /// ∫ |∇^j h|^p |w|^{2-(k-j)p} dV.
    pub lhs: f64,
    /// ∫ |∇^k h|^p |w|^2 dV.
    pub rhs: f64,
    pub ratio: f64,
    pub j: usize,
    pub k: usize,
    pub p: f64,
}

/// Both sides of the Hardy-type inequality
///   ∫ |∇^j h|^p |w|^{2-(k-j)p} ≲ ∫ |∇^k h|^p |w|^2
/// for h with vanishing Taylor part of order k-1. Requires p > 4 (the
/// boundary flux at the origin only dies for p > 4); exploratory runs at
/// lower p must opt in explicitly.
pub fn hardy_ratio(
    h: &CExpr,
    var: Var,
    k: usize,
    p: f64,
    j: usize,
    disc: DiscDomain,
    grid: &GridSpec,
    allow_low_p: bool,
) -> Result<HardyRatio> {
    if k == 0 {
        return Err(Error::Hypothesis("the inequality needs k >= 1".into()));
    }
    if j > k {
        return Err(Error::Hypothesis(format!("j must satisfy 0 <= j <= k, got {j}")));
    }
    if !(p > 4.0) && !allow_low_p {
        return Err(Error::Hypothesis(format!(
            "the weighted Hardy inequality requires p > 4 (got p = {p}); \
             pass the explicit low-exponent flag for an exploratory run"
        )));
    }
    let hp = normalize(h)?;
    require_vanishing_taylor(&hp, var, k)?;
    let g = build_polar_grid(disc, grid.n_r, grid.n_theta)?;
    let dirs = [(var, DKind::Holo), (var, DKind::Anti)];
    let side = |order: usize, weight_exp: f64| -> Result<f64> {
        let mut words = Vec::new();
        for (degs, mult) in derivative_multidegrees(2, order) {
            words.push((mixed_partial(&hp, &dirs, &degs), mult));
        }
        let weight = modulus_poly(Poly::var(var), weight_exp)?;
        disc_g_integral(&g, var, &words, p / 2.0, &weight)
    };
    let lhs = side(j, 2.0 - (k - j) as f64 * p)?;
    let rhs = side(k, 2.0)?;
    Ok(HardyRatio {
        lhs,
        rhs,
        ratio: lhs / rhs,
        j,
        k,
        p,
    })
}

/// The boundary-flux quantity ε^{3-kp} ∮_{|w|=ε} |h|^p dσ whose vanishing
/// as ε → 0 drives the inequality.
pub fn boundary_flux(h: &CExpr, var: Var, k: usize, p: f64, eps: f64, n_theta: usize) -> Result<f64> {
    let mut total = 0.0;
    let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
    for j in 0..n_theta {
        let theta = dtheta * j as f64;
        let w = Complex64::from_polar(eps, theta);
        let v = h.eval(&Point::new().with(var, w))?;
        total += v.norm().powf(p) * eps * dtheta;
    }
    Ok(eps.powf(3.0 - (k as f64) * p) * total)
}

/// Pointwise truncated Cauchy representation: for h with vanishing Taylor
/// part of order k-1,
///   2πi w^{-k} h(w) = ∮ h(ζ) ζ^{-k}(ζ-w)^{-1} dζ - ∫ ∂̄h(ζ) ζ^{-k}(ζ-w)^{-1} dζ̄∧dζ.
/// Returns |LHS - RHS| with the boundary integral by the trapezoid contour
/// rule and the interior integral through the solid transform of the
/// Laurent datum ζ^{-k}∂̄h (exact for polynomial h).
pub fn truncated_cauchy_pointwise(
    h: &CExpr,
    var: Var,
    k: usize,
    z: Complex64,
    grid: &GridSpec,
) -> Result<f64> {
    if z == Complex64::ZERO || z.norm() > 0.8 {
        return Err(Error::Domain(format!(
            "the check point must satisfy 0 < |z| <= 0.8, got {z}"
        )));
    }
    let hp = normalize(h)?;
    require_vanishing_taylor(&hp, var, k)?;
    let disc = DiscDomain::unit();
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let point = Point::new().with(var, z);
    let lhs = two_pi_i * complex_powi(z, -(k as i32)) * hp.eval(&point)?;

    let nodes = boundary_nodes(disc, grid.n_theta)?;
    let boundary = contour_integral(&nodes, |zeta| {
        let p = Point::new().with(var, zeta);
        Ok(hp.eval(&p)? * complex_powi(zeta, -(k as i32)) / (zeta - z))
    })?;

    // ∫ g/(ζ-w) dζ̄∧dζ = -2πi·T(g); here g = ζ^{-k} ∂̄h is an integrable
    // Laurent polynomial (the data vanishes to order k-1)
    let dbar = hp.wirt_d(var, DKind::Anti);
    let mut laurent = Mono::unit();
    laurent.exps[slot(var, DKind::Holo)] = -(k as i16);
    let shifted = dbar.mul_term(&laurent, Complex64::ONE);
    let transform = symbolic_solid(&shifted, var, &disc)?;
    let interior = -two_pi_i * transform.eval(&point)?;

    let rhs = boundary - interior;
    Ok((lhs - rhs).norm())
}

/// Operator form of the truncated representation:
///   T h - (holomorphic Taylor jet of T h of order k-1) = w^k · T(w^{-k} h).
/// Symbolic for polynomial h: returns the max coefficient residual of the
/// difference; for non-normalizable data, the max modulus over a 5×5
/// interior sample.
pub fn truncated_cauchy_operator(h: &CExpr, var: Var, k: usize) -> Result<f64> {
    let disc = DiscDomain::unit();
    match normalize(h) {
        Ok(hp) => {
            require_vanishing_taylor(&hp, var, k)?;
            let th = symbolic_solid(&hp, var, &disc)?;
            let jet = holo_taylor_1var(&th, var, k);
            let lhs = th.sub(&jet);
            let mut laurent = Mono::unit();
            laurent.exps[slot(var, DKind::Holo)] = -(k as i16);
            let shifted = hp.mul_term(&laurent, Complex64::ONE);
            let transform = symbolic_solid(&shifted, var, &disc)?;
            let mut monomial = Mono::unit();
            monomial.exps[slot(var, DKind::Holo)] = k as i16;
            let rhs = transform.mul_term(&monomial, Complex64::ONE);
            Ok(lhs.sub(&rhs).max_coeff_norm())
        }
        Err(_) => Err(Error::Unsupported(
            "the operator identity check needs normalizable data".into(),
        )),
    }
}

/// Holomorphic Taylor jet at 0 in one variable: the pure-holomorphic
/// monomials of degree <= k-1.
fn holo_taylor_1var(p: &Poly, var: Var, k: usize) -> Poly {
    let hs = slot(var, DKind::Holo);
    let as_ = slot(var, DKind::Anti);
    let mut out = Poly::zero();
    for (m, c) in &p.terms {
        if m.exps[as_] == 0 && (m.exps[hs] as i32) <= k as i32 - 1 {
            out = out.add(&Poly::from_term(m.clone(), *c));
        }
    }
    out
}

/// Verifies the contour-derivative identity S(∂h) = ∂(Sh) + S(w̄²∂̄h) from
/// the boundary side; re-exported here so the three identity checks share a
/// home. See [`crate::cauchy::boundary_derivative_identity`].
pub fn boundary_derivative_identity(
    h: &CExpr,
    var: Var,
    z: Complex64,
    grid: &GridSpec,
) -> Result<f64> {
    let ev = crate::cauchy::CauchyEvaluator::new(DiscDomain::unit(), grid.n_r, grid.n_theta)?;
    crate::cauchy::boundary_derivative_identity(h, &ev, var, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::vanishing_taylor_poly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn monomial(var: Var, a: i32, b: i32) -> CExpr {
        let e = CExpr::int_pow(CExpr::var(var), a);
        CExpr::mul(e, CExpr::int_pow(CExpr::conj(CExpr::var(var)), b))
    }

    #[test]
    fn hardy_ratio_closed_form_for_pure_powers() {
        // h = w^k, j = 0: lhs = ∫|w|² = π/2, rhs = (k!)^p π/2
        let grid = GridSpec::default();
        for k in 1..=3usize {
            let h = CExpr::int_pow(CExpr::var(Var::W1), k as i32);
            let r = hardy_ratio(&h, Var::W1, k, 5.0, 0, DiscDomain::unit(), &grid, false).unwrap();
            let kfact: f64 = (1..=k as u64).map(|x| x as f64).product();
            assert!((r.lhs - PI / 2.0).abs() < 1e-10, "k={k} lhs={}", r.lhs);
            assert!(
                (r.ratio - kfact.powf(-5.0)).abs() / kfact.powf(-5.0) < 1e-6,
                "k={k} ratio {}",
                r.ratio
            );
            let top = hardy_ratio(&h, Var::W1, k, 5.0, k, DiscDomain::unit(), &grid, false).unwrap();
            assert!((top.ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hardy_rejects_nonvanishing_taylor_part() {
        let grid = GridSpec::default();
        let err = hardy_ratio(
            &CExpr::one(),
            Var::W1,
            1,
            5.0,
            0,
            DiscDomain::unit(),
            &grid,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
        let err = hardy_ratio(
            &CExpr::var(Var::W1),
            Var::W1,
            1,
            4.0,
            0,
            DiscDomain::unit(),
            &grid,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }

    #[test]
    fn hardy_ratio_decreases_with_vanishing_order() {
        let grid = GridSpec::new(48, 96);
        let k = 2usize;
        let mut previous = f64::INFINITY;
        for m in k..=k + 3 {
            let h = CExpr::int_pow(CExpr::var(Var::W1), m as i32);
            let r = hardy_ratio(&h, Var::W1, k, 5.0, 0, DiscDomain::unit(), &grid, false).unwrap();
            assert!(r.ratio < previous, "m={m}: {} !< {previous}", r.ratio);
            previous = r.ratio;
        }
    }

    #[test]
    fn hardy_battery_is_finite_at_several_exponents() {
        let grid = GridSpec::new(32, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for p in [4.5, 5.0, 8.0] {
            for k in 1..=3usize {
                for _ in 0..10 {
                    let h = vanishing_taylor_poly(&mut rng, Var::W1, k, 5).to_expr();
                    for j in 0..=k {
                        let r =
                            hardy_ratio(&h, Var::W1, k, p, j, DiscDomain::unit(), &grid, false)
                                .unwrap();
                        assert!(r.ratio.is_finite() && r.ratio >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_flux_decays_two_orders_per_decade() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for k in 1..=2usize {
            let h = vanishing_taylor_poly(&mut rng, Var::W1, k, 5).to_expr();
            let q1 = boundary_flux(&h, Var::W1, k, 5.0, 1e-2, 128).unwrap();
            let q2 = boundary_flux(&h, Var::W1, k, 5.0, 1e-3, 128).unwrap();
            assert!(q2 * 2.0 <= q1, "k={k}: {q2} vs {q1}");
        }
    }

    #[test]
    fn pointwise_identity_for_holomorphic_powers() {
        // h = w^k: the interior term vanishes and the identity reduces to
        // the Cauchy formula
        let grid = GridSpec::default();
        for k in 1..=3usize {
            let h = CExpr::int_pow(CExpr::var(Var::W1), k as i32);
            let r = truncated_cauchy_pointwise(&h, Var::W1, k, Complex64::new(0.3, 0.0), &grid)
                .unwrap();
            assert!(r < 1e-8, "k={k}: {r}");
        }
    }

    #[test]
    fn pointwise_identity_for_antiholomorphic_and_mixed_data() {
        let grid = GridSpec::default();
        let z = Complex64::new(0.3, 0.2);
        for k in 1..=3usize {
            let h = CExpr::int_pow(CExpr::conj(CExpr::var(Var::W1)), k as i32);
            let r = truncated_cauchy_pointwise(&h, Var::W1, k, z, &grid).unwrap();
            assert!(r < 1e-6, "conj^k k={k}: {r}");
            let h = monomial(Var::W1, k as i32, 1);
            let r = truncated_cauchy_pointwise(&h, Var::W1, k, z, &grid).unwrap();
            assert!(r < 1e-6, "w^k w̄ k={k}: {r}");
        }
    }

    #[test]
    fn operator_identity_is_symbolic_for_polynomials() {
        // h = w^k and h = w̄^k (k=1): exact operator identity
        for k in 1..=3usize {
            let h = CExpr::int_pow(CExpr::var(Var::W1), k as i32);
            let r = truncated_cauchy_operator(&h, Var::W1, k).unwrap();
            assert!(r < 1e-12, "w^k k={k}: {r}");
        }
        let h = CExpr::conj(CExpr::var(Var::W1));
        let r = truncated_cauchy_operator(&h, Var::W1, 1).unwrap();
        assert!(r < 1e-12, "{r}");
        let r = truncated_cauchy_operator(&CExpr::zero(), Var::W1, 2).unwrap();
        assert!(r == 0.0);
    }

    #[test]
    fn operator_identity_on_a_seeded_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for k in 1..=3usize {
            for _ in 0..5 {
                let h = vanishing_taylor_poly(&mut rng, Var::W1, k, 4).to_expr();
                let r = truncated_cauchy_operator(&h, Var::W1, k).unwrap();
                assert!(r < 1e-10, "k={k}: {r}");
            }
        }
    }
}
