//! Transport of data between the Hartogs triangle and the (punctured)
//! bidisc, and the Taylor truncation operators that make the optimal
//! solution pipeline work.
//!
//! Coordinates: z = (z1, z2) on the triangle, w = (w1, w2) on the bidisc.
//! The biholomorphism is (w1, w2) ↦ (w1·w2, w2) with inverse
//! (z1, z2) ↦ (z1/z2, z2).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{CExpr, DKind, Var};
use crate::form::{CoordBlock, Form};
use crate::poly::{normalize, slot, Poly};

/// f ∘ ψ for a scalar: substitute z1 = w1·w2, z2 = w2.
pub fn compose_with_psi(h: &CExpr) -> CExpr {
    let w1w2 = CExpr::mul(CExpr::var(Var::W1), CExpr::var(Var::W2));
    h.subst_var(Var::Z1, &w1w2)
        .subst_var(Var::Z2, &CExpr::var(Var::W2))
}

/// u ∘ φ for a scalar: substitute w1 = z1/z2, w2 = z2. Exact; rational in z2
/// where u was polynomial. Evaluation at z2 = 0 is a singular-evaluation
/// error at eval time, not here.
pub fn pushforward_to_hartogs(u: &CExpr) -> CExpr {
    let z1_over_z2 = CExpr::div(CExpr::var(Var::Z1), CExpr::var(Var::Z2));
    u.subst_var(Var::W1, &z1_over_z2)
        .subst_var(Var::W2, &CExpr::var(Var::Z2))
}

/// Pullback of a (0,1) form on the triangle to the bidisc:
/// since dz̄1 = w̄2 dw̄1 + w̄1 dw̄2 and dz̄2 = dw̄2,
///   ψ*(f1 dz̄1 + f2 dz̄2) = w̄2 (f1∘ψ) dw̄1 + (w̄1 (f1∘ψ) + f2∘ψ) dw̄2.
pub fn pullback_to_bidisc(f: &Form) -> Result<Form> {
    if f.block != CoordBlock::Z || f.n != 2 || f.degree != 1 {
        return Err(Error::Config(
            "pullback expects a (0,1) form in the z coordinates".into(),
        ));
    }
    let f1 = compose_with_psi(&f.component(&[1]));
    let f2 = compose_with_psi(&f.component(&[2]));
    let w1bar = CExpr::conj(CExpr::var(Var::W1));
    let w2bar = CExpr::conj(CExpr::var(Var::W2));
    let g1 = CExpr::mul(w2bar, f1.clone());
    let g2 = CExpr::add(CExpr::mul(w1bar, f1), f2);
    Ok(Form::form01(CoordBlock::W, g1, g2))
}

/// Coefficient table of a Taylor polynomial at the origin: multidegree
/// (l1, l2, s1, s2) over (v1, v̄1, v2, v̄2) with l1+l2+s1+s2 <= order-1.
#[derive(Debug, Clone)]
pub struct TaylorPolynomial {
    pub order: usize,
    pub block: CoordBlock,
    pub coeffs: BTreeMap<(u16, u16, u16, u16), Complex64>,
}

impl TaylorPolynomial {
    pub fn to_poly(&self) -> Poly {
        let (v1, v2) = block_vars(self.block);
        let mut out = Poly::zero();
        for (&(l1, l2, s1, s2), &c) in &self.coeffs {
            let mut m = crate::poly::Mono::unit();
            m.exps[slot(v1, DKind::Holo)] = l1 as i16;
            m.exps[slot(v1, DKind::Anti)] = l2 as i16;
            m.exps[slot(v2, DKind::Holo)] = s1 as i16;
            m.exps[slot(v2, DKind::Anti)] = s2 as i16;
            out = out.add(&Poly::from_term(m, c));
        }
        out
    }

    pub fn to_expr(&self) -> CExpr {
        self.to_poly().to_expr()
    }
}

fn block_vars(block: CoordBlock) -> (Var, Var) {
    match block {
        CoordBlock::Z => (Var::Z1, Var::Z2),
        CoordBlock::W => (Var::W1, Var::W2),
    }
}

fn block_slots(block: CoordBlock) -> [usize; 4] {
    let (v1, v2) = block_vars(block);
    [
        slot(v1, DKind::Holo),
        slot(v1, DKind::Anti),
        slot(v2, DKind::Holo),
        slot(v2, DKind::Anti),
    ]
}

fn factorial(n: u16) -> f64 {
    (1..=n as u64).map(|k| k as f64).product::<f64>().max(1.0)
}

/// The Taylor polynomial of order `k`-1 at the origin of the block's two
/// variables. Polynomial input keeps its low-degree part exactly; data with
/// branch-power factors go through symbolic derivatives evaluated at 0,
/// failing with the offending derivative word when singular there.
pub fn taylor_truncation(h: &CExpr, k: usize, block: CoordBlock) -> Result<TaylorPolynomial> {
    if k == 0 {
        return Ok(TaylorPolynomial {
            order: 0,
            block,
            coeffs: BTreeMap::new(),
        });
    }
    let max_total = (k - 1) as i32;
    let p = normalize(h).map_err(|e| {
        Error::Unsupported(format!(
            "Taylor truncation needs a normalizable expression: {e}"
        ))
    })?;
    let slots = block_slots(block);
    if let Ok(low) = p.low_degree_part(&slots, max_total) {
        let mut coeffs = BTreeMap::new();
        for (m, c) in &low.terms {
            coeffs.insert(
                (
                    m.exps[slots[0]] as u16,
                    m.exps[slots[1]] as u16,
                    m.exps[slots[2]] as u16,
                    m.exps[slots[3]] as u16,
                ),
                *c,
            );
        }
        return Ok(TaylorPolynomial {
            order: k,
            block,
            coeffs,
        });
    }
    // derivative route for branch-power data
    let (v1, v2) = block_vars(block);
    let mut coeffs = BTreeMap::new();
    let kk = (k - 1) as u16;
    for l1 in 0..=kk {
        for l2 in 0..=kk - l1 {
            for s1 in 0..=kk - l1 - l2 {
                for s2 in 0..=kk - l1 - l2 - s1 {
                    let mut d = p.clone();
                    for _ in 0..l1 {
                        d = d.wirt_d(v1, DKind::Holo);
                    }
                    for _ in 0..l2 {
                        d = d.wirt_d(v1, DKind::Anti);
                    }
                    for _ in 0..s1 {
                        d = d.wirt_d(v2, DKind::Holo);
                    }
                    for _ in 0..s2 {
                        d = d.wirt_d(v2, DKind::Anti);
                    }
                    let at_origin = d
                        .partial_eval(v1, Complex64::ZERO)
                        .and_then(|q| q.partial_eval(v2, Complex64::ZERO))
                        .map_err(|e| {
                            Error::SingularEval(format!(
                                "derivative word ({l1},{l2},{s1},{s2}) singular at the origin: {e}"
                            ))
                        })?;
                    let value = at_origin.as_constant().ok_or_else(|| {
                        Error::SingularEval(format!(
                            "derivative word ({l1},{l2},{s1},{s2}) did not reduce to a constant at 0"
                        ))
                    })?;
                    let c =
                        value / (factorial(l1) * factorial(l2) * factorial(s1) * factorial(s2));
                    if c.norm() > 0.0 {
                        coeffs.insert((l1, l2, s1, s2), c);
                    }
                }
            }
        }
    }
    Ok(TaylorPolynomial {
        order: k,
        block,
        coeffs,
    })
}

/// Componentwise Taylor truncation of a form; returns the truncated form
/// (every component replaced by its Taylor polynomial).
pub fn taylor_truncation_form(f: &Form, k: usize) -> Result<Form> {
    let mut out = f.clone();
    for (idx, coeff) in &f.components {
        let t = taylor_truncation(coeff, k, f.block)?;
        out.components.insert(idx.clone(), t.to_expr());
    }
    Ok(out)
}

/// The Taylor polynomial of order `k`-1 in the second block variable only
/// (coefficients remain functions of the first):
/// Σ_{l+m<=k-1} ∂^l_{v2} ∂̄^m_{v2} h(v1, 0) / (l! m!) · v2^l v̄2^m.
pub fn taylor_w2(h: &CExpr, k: usize, block: CoordBlock) -> Result<Poly> {
    let p = normalize(h)?;
    taylor_w2_poly(&p, k, block)
}

pub fn taylor_w2_poly(p: &Poly, k: usize, block: CoordBlock) -> Result<Poly> {
    if k == 0 {
        return Ok(Poly::zero());
    }
    let (_, v2) = block_vars(block);
    let s_h = slot(v2, DKind::Holo);
    let s_a = slot(v2, DKind::Anti);
    if let Ok(low) = p.low_degree_part(&[s_h, s_a], (k - 1) as i32) {
        return Ok(low);
    }
    let kk = (k - 1) as u16;
    let mut out = Poly::zero();
    for l in 0..=kk {
        for m in 0..=kk - l {
            let mut d = p.clone();
            for _ in 0..l {
                d = d.wirt_d(v2, DKind::Holo);
            }
            for _ in 0..m {
                d = d.wirt_d(v2, DKind::Anti);
            }
            let coeff_fn = d.partial_eval(v2, Complex64::ZERO).map_err(|e| {
                Error::SingularEval(format!(
                    "w2-derivative word ({l},{m}) singular on the axis: {e}"
                ))
            })?;
            let mut mono = crate::poly::Mono::unit();
            mono.exps[s_h] = l as i16;
            mono.exps[s_a] = m as i16;
            let scale = 1.0 / (factorial(l) * factorial(m));
            out = out.add(&coeff_fn.mul_term(&mono, Complex64::new(scale, 0.0)));
        }
    }
    Ok(out)
}

/// The holomorphic Taylor polynomial of order `k`-1 in the second block
/// variable: Σ_{l<=k-1} v2^l ∂^l_{v2} h(v1, 0) / l!.
pub fn holo_taylor_w2_poly(p: &Poly, k: usize, block: CoordBlock) -> Result<Poly> {
    if k == 0 {
        return Ok(Poly::zero());
    }
    let (_, v2) = block_vars(block);
    let s_h = slot(v2, DKind::Holo);
    let s_a = slot(v2, DKind::Anti);
    // fast path: plain monomials keep terms with v̄2-power 0, v2-power <= k-1
    let plain = p.terms.keys().all(|m| {
        m.exps[s_h] >= 0 && m.exps[s_a] >= 0 && !m.atoms.iter().any(|a| a.def.base.mentions(v2))
    });
    if plain {
        let mut out = Poly::zero();
        for (m, c) in &p.terms {
            if m.exps[s_a] == 0 && (m.exps[s_h] as i32) <= (k - 1) as i32 {
                out = out.add(&Poly::from_term(m.clone(), *c));
            }
        }
        return Ok(out);
    }
    let mut out = Poly::zero();
    for l in 0..=(k - 1) as u16 {
        let mut d = p.clone();
        for _ in 0..l {
            d = d.wirt_d(v2, DKind::Holo);
        }
        let coeff_fn = d.partial_eval(v2, Complex64::ZERO).map_err(|e| {
            Error::SingularEval(format!(
                "holomorphic w2-derivative of order {l} singular on the axis: {e}"
            ))
        })?;
        let mut mono = crate::poly::Mono::unit();
        mono.exps[s_h] = l as i16;
        out = out.add(&coeff_fn.mul_term(&mono, Complex64::new(1.0 / factorial(l), 0.0)));
    }
    Ok(out)
}

pub fn holo_taylor_w2(h: &CExpr, k: usize, block: CoordBlock) -> Result<CExpr> {
    let p = normalize(h)?;
    Ok(holo_taylor_w2_poly(&p, k, block)?.to_expr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::poly::exprs_equal;

    fn zbar(i: usize) -> CExpr {
        CExpr::conj(CExpr::var(CoordBlock::Z.var(i)))
    }

    #[test]
    fn pullback_of_dz2bar_is_dw2bar() {
        let f = Form::form01(CoordBlock::Z, CExpr::zero(), CExpr::one());
        let g = pullback_to_bidisc(&f).unwrap();
        assert!(normalize(&g.component(&[1])).unwrap().is_zero());
        let p2 = normalize(&g.component(&[2])).unwrap();
        assert!(p2.sub(&Poly::one()).is_zero());
    }

    #[test]
    fn pullback_of_dz1bar_splits() {
        let f = Form::form01(CoordBlock::Z, CExpr::one(), CExpr::zero());
        let g = pullback_to_bidisc(&f).unwrap();
        assert!(exprs_equal(&g.component(&[1]), &parse("conj(w2)").unwrap(), 0.0).unwrap());
        assert!(exprs_equal(&g.component(&[2]), &parse("conj(w1)").unwrap(), 0.0).unwrap());
    }

    #[test]
    fn pullback_of_symmetric_closed_form() {
        // z̄2 dz̄1 + z̄1 dz̄2 pulls back to w̄2² dw̄1 + 2 w̄1 w̄2 dw̄2
        let f = Form::form01(CoordBlock::Z, zbar(2), zbar(1));
        let g = pullback_to_bidisc(&f).unwrap();
        assert!(exprs_equal(&g.component(&[1]), &parse("conj(w2)^2").unwrap(), 0.0).unwrap());
        assert!(
            exprs_equal(&g.component(&[2]), &parse("2*conj(w1)*conj(w2)").unwrap(), 0.0).unwrap()
        );
    }

    #[test]
    fn pushforward_inverts_pullback_substitution() {
        for text in ["conj(w2)", "conj(w1)*conj(w2)", "conj(w1)*conj(w2)^2"] {
            let u = parse(text).unwrap();
            let pushed = pushforward_to_hartogs(&u);
            let back = compose_with_psi(&pushed);
            assert!(exprs_equal(&u, &back, 0.0).unwrap(), "{text}");
        }
        // the three spec cases in z-coordinates
        assert!(exprs_equal(
            &pushforward_to_hartogs(&parse("conj(w2)").unwrap()),
            &parse("conj(z2)").unwrap(),
            0.0
        )
        .unwrap());
        assert!(exprs_equal(
            &pushforward_to_hartogs(&parse("conj(w1)*conj(w2)").unwrap()),
            &parse("conj(z1)").unwrap(),
            0.0
        )
        .unwrap());
        assert!(exprs_equal(
            &pushforward_to_hartogs(&parse("conj(w1)*conj(w2)^2").unwrap()),
            &parse("conj(z1)*conj(z2)").unwrap(),
            0.0
        )
        .unwrap());
    }

    #[test]
    fn taylor_truncation_order_bookkeeping() {
        // total degree <= k-1 is kept: both degree-2 monomials are killed at
        // k=2 and kept at k=3
        let h = parse("z1*z2 + z1^2").unwrap();
        let p2 = taylor_truncation(&h, 2, CoordBlock::Z).unwrap();
        assert!(p2.to_poly().is_zero());
        let p3 = taylor_truncation(&h, 3, CoordBlock::Z).unwrap();
        let expected = normalize(&h).unwrap();
        assert!(p3.to_poly().sub(&expected).is_zero());
    }

    #[test]
    fn taylor_truncation_of_forms() {
        // P_1 of z̄2 dz̄1 + z̄1 dz̄2 vanishes, P_1 of dz̄2 is dz̄2
        let f = Form::form01(CoordBlock::Z, zbar(2), zbar(1));
        let t = taylor_truncation_form(&f, 1).unwrap();
        assert!(normalize(&t.component(&[1])).unwrap().is_zero());
        assert!(normalize(&t.component(&[2])).unwrap().is_zero());
        let g = Form::form01(CoordBlock::Z, CExpr::zero(), CExpr::one());
        let t = taylor_truncation_form(&g, 1).unwrap();
        assert!(normalize(&t.component(&[2]))
            .unwrap()
            .sub(&Poly::one())
            .is_zero());
    }

    #[test]
    fn taylor_truncation_of_branch_power_data() {
        // (z2-1)^{0.6}: value at 0 is (-1)^{0.6} with arg π in the window
        let h = parse("pow(z2-1, 0.6, pi/2, 3*pi/2)").unwrap();
        let t = taylor_truncation(&h, 1, CoordBlock::Z).unwrap();
        let c = *t.coeffs.get(&(0, 0, 0, 0)).unwrap();
        let expected = Complex64::from_polar(1.0, 0.6 * std::f64::consts::PI);
        assert!((c - expected).norm() < 1e-14);
    }

    #[test]
    fn taylor_w2_examples() {
        // P_{2,1}(w̄2²) = 0; P_{2,2}(w̄1 w̄2) = w̄1 w̄2
        let a = parse("conj(w2)^2").unwrap();
        assert!(taylor_w2(&a, 1, CoordBlock::W).unwrap().is_zero());
        let b = parse("conj(w1)*conj(w2)").unwrap();
        let t = taylor_w2(&b, 2, CoordBlock::W).unwrap();
        assert!(t.sub(&normalize(&b).unwrap()).is_zero());
    }

    #[test]
    fn truncated_pullback_annihilated_by_taylor_w2() {
        // P_{2,k}(ψ*(h - P_k h)) = 0 for h = z1 z̄2 + z2², k = 2
        let h = parse("z1*conj(z2) + z2^2").unwrap();
        let k = 2;
        let trunc = taylor_truncation(&h, k, CoordBlock::Z).unwrap();
        let reduced = CExpr::sub(h, trunc.to_expr());
        let pulled = compose_with_psi(&reduced);
        let t = taylor_w2(&pulled, k, CoordBlock::W).unwrap();
        assert!(t.is_zero(), "{t:?}");
    }

    #[test]
    fn holo_taylor_selects_holomorphic_jet() {
        // u = w2·g(w1) + w̄2², k=2: only the w2-linear holomorphic term survives
        let u = parse("w2*(w1^2+conj(w1)) + conj(w2)^2").unwrap();
        let t = holo_taylor_w2(&u, 2, CoordBlock::W).unwrap();
        assert!(exprs_equal(&t, &parse("w2*(w1^2+conj(w1))").unwrap(), 0.0).unwrap());
        // u = w̄1 w̄2², k=1: value at w2=0 is 0
        let u = parse("conj(w1)*conj(w2)^2").unwrap();
        let t = holo_taylor_w2(&u, 1, CoordBlock::W).unwrap();
        assert!(normalize(&t).unwrap().is_zero());
    }

    #[test]
    fn taylor_idempotence_and_annihilation() {
        let h = parse("z1^2*conj(z2) + 3*z2^3 + z1 - 2").unwrap();
        for k in 1..4 {
            let t1 = taylor_truncation(&h, k, CoordBlock::Z).unwrap().to_poly();
            let t2 = taylor_truncation(&t1.to_expr(), k, CoordBlock::Z)
                .unwrap()
                .to_poly();
            assert!(t1.sub(&t2).is_zero(), "idempotence k={k}");
            let reduced = CExpr::sub(h.clone(), t1.to_expr());
            let t3 = taylor_truncation(&reduced, k, CoordBlock::Z)
                .unwrap()
                .to_poly();
            assert!(t3.is_zero(), "annihilation k={k}");
        }
    }

    #[test]
    fn chain_rule_bookkeeping_through_pushforward() {
        // ∂_{z1}(u∘φ) = (1/z2)·(∂_{w1}u)∘φ and
        // ∂_{z2}(u∘φ) = (-z1/z2²)·(∂_{w1}u)∘φ + (∂_{w2}u)∘φ
        for text in ["w1^2*w2", "conj(w1)*w2^3", "w1*conj(w2) + w2^2"] {
            let u = parse(text).unwrap();
            let pushed = pushforward_to_hartogs(&u);

            let lhs1 = pushed.wirt_d(Var::Z1, DKind::Holo);
            let rhs1 = CExpr::div(
                pushforward_to_hartogs(&u.wirt_d(Var::W1, DKind::Holo)),
                CExpr::var(Var::Z2),
            );
            assert!(exprs_equal(&lhs1, &rhs1, 1e-12).unwrap(), "{text} (z1)");

            let lhs2 = pushed.wirt_d(Var::Z2, DKind::Holo);
            let du_w1 = pushforward_to_hartogs(&u.wirt_d(Var::W1, DKind::Holo));
            let du_w2 = pushforward_to_hartogs(&u.wirt_d(Var::W2, DKind::Holo));
            let rhs2 = CExpr::add(
                CExpr::mul(
                    CExpr::neg(CExpr::div(
                        CExpr::var(Var::Z1),
                        CExpr::int_pow(CExpr::var(Var::Z2), 2),
                    )),
                    du_w1,
                ),
                du_w2,
            );
            assert!(exprs_equal(&lhs2, &rhs2, 1e-12).unwrap(), "{text} (z2)");
        }
    }
}
