//! Expression trees over complex variables and their conjugates, closed under
//! exact Wirtinger differentiation.
//!
//! A [`CExpr`] is built from complex constants, the variables z1..z3, w1..w3,
//! zeta, conjugation, absolute value, sums, products, integer powers, and
//! branch powers `pow(base, a, argMin, argMax)` with an explicit argument
//! window. Branch powers never default to a principal branch: the placement
//! of the cut is part of the value.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// The named complex variables an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Z1,
    Z2,
    Z3,
    W1,
    W2,
    W3,
    Zeta,
}

pub const ALL_VARS: [Var; 7] = [
    Var::Z1,
    Var::Z2,
    Var::Z3,
    Var::W1,
    Var::W2,
    Var::W3,
    Var::Zeta,
];

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Z1 => "z1",
            Var::Z2 => "z2",
            Var::Z3 => "z3",
            Var::W1 => "w1",
            Var::W2 => "w2",
            Var::W3 => "w3",
            Var::Zeta => "zeta",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "z1" => Some(Var::Z1),
            "z2" => Some(Var::Z2),
            "z3" => Some(Var::Z3),
            "w1" => Some(Var::W1),
            "w2" => Some(Var::W2),
            "w3" => Some(Var::W3),
            "zeta" => Some(Var::Zeta),
            _ => None,
        }
    }

    /// Index into assignment arrays.
    pub fn index(self) -> usize {
        match self {
            Var::Z1 => 0,
            Var::Z2 => 1,
            Var::Z3 => 2,
            Var::W1 => 3,
            Var::W2 => 4,
            Var::W3 => 5,
            Var::Zeta => 6,
        }
    }
}

/// Holomorphic (∂) or anti-holomorphic (∂̄) direction of a Wirtinger derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DKind {
    Holo,
    Anti,
}

impl DKind {
    pub fn flipped(self) -> DKind {
        match self {
            DKind::Holo => DKind::Anti,
            DKind::Anti => DKind::Holo,
        }
    }
}

/// Expression tree node. Immutable; subtrees are shared.
#[derive(Debug, Clone)]
pub enum CExpr {
    Const(Complex64),
    Var(Var),
    Conj(Arc<CExpr>),
    Abs(Arc<CExpr>),
    Sum(Vec<CExpr>),
    Prod(Vec<CExpr>),
    IntPow(Arc<CExpr>, i32),
    /// `base^exponent` with the argument of `base` normalized into
    /// [arg_lo, arg_lo + 2π); the cut lies along arg ≡ arg_lo.
    BranchPow {
        base: Arc<CExpr>,
        exponent: f64,
        arg_lo: f64,
        arg_hi: f64,
    },
}

/// Variable assignment for evaluation. Unassigned slots are an error when read.
#[derive(Debug, Clone, Copy, Default)]
pub struct Point {
    vals: [Option<Complex64>; 7],
}

impl Point {
    pub fn new() -> Point {
        Point::default()
    }

    pub fn with(mut self, var: Var, value: Complex64) -> Point {
        self.vals[var.index()] = Some(value);
        self
    }

    pub fn set(&mut self, var: Var, value: Complex64) {
        self.vals[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<Complex64> {
        self.vals[var.index()]
    }
}

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cre(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl CExpr {
    pub fn constant(c: Complex64) -> CExpr {
        CExpr::Const(c)
    }

    pub fn real(x: f64) -> CExpr {
        CExpr::Const(cre(x))
    }

    pub fn zero() -> CExpr {
        CExpr::Const(Complex64::ZERO)
    }

    pub fn one() -> CExpr {
        CExpr::Const(Complex64::ONE)
    }

    pub fn var(v: Var) -> CExpr {
        CExpr::Var(v)
    }

    pub fn conj(e: CExpr) -> CExpr {
        match e {
            CExpr::Const(c) => CExpr::Const(c.conj()),
            CExpr::Conj(inner) => (*inner).clone(),
            other => CExpr::Conj(Arc::new(other)),
        }
    }

    pub fn abs(e: CExpr) -> CExpr {
        match e {
            CExpr::Const(c) => CExpr::Const(cre(c.norm())),
            other => CExpr::Abs(Arc::new(other)),
        }
    }

    /// n-ary sum with inline collapse of zeros and constants.
    pub fn sum(terms: Vec<CExpr>) -> CExpr {
        let mut flat = Vec::new();
        let mut konst = Complex64::ZERO;
        for t in terms {
            match t {
                CExpr::Const(c) => konst += c,
                CExpr::Sum(inner) => {
                    for s in inner {
                        match s {
                            CExpr::Const(c) => konst += c,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if konst != Complex64::ZERO || flat.is_empty() {
            flat.push(CExpr::Const(konst));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            CExpr::Sum(flat)
        }
    }

    pub fn add(a: CExpr, b: CExpr) -> CExpr {
        CExpr::sum(vec![a, b])
    }

    pub fn sub(a: CExpr, b: CExpr) -> CExpr {
        CExpr::add(a, CExpr::neg(b))
    }

    pub fn neg(e: CExpr) -> CExpr {
        CExpr::mul(CExpr::real(-1.0), e)
    }

    /// n-ary product with inline collapse of ones, zeros and constants.
    pub fn prod(factors: Vec<CExpr>) -> CExpr {
        let mut flat = Vec::new();
        let mut konst = Complex64::ONE;
        for f in factors {
            match f {
                CExpr::Const(c) => konst *= c,
                CExpr::Prod(inner) => {
                    for g in inner {
                        match g {
                            CExpr::Const(c) => konst *= c,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if konst == Complex64::ZERO {
            return CExpr::zero();
        }
        if konst != Complex64::ONE || flat.is_empty() {
            flat.insert(0, CExpr::Const(konst));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            CExpr::Prod(flat)
        }
    }

    pub fn mul(a: CExpr, b: CExpr) -> CExpr {
        CExpr::prod(vec![a, b])
    }

    pub fn div(a: CExpr, b: CExpr) -> CExpr {
        CExpr::mul(a, CExpr::int_pow(b, -1))
    }

    pub fn int_pow(base: CExpr, n: i32) -> CExpr {
        match n {
            0 => CExpr::one(),
            1 => base,
            _ => match base {
                CExpr::Const(c) => CExpr::Const(complex_powi(c, n)),
                CExpr::IntPow(inner, m) => CExpr::IntPow(inner, m.saturating_mul(n)),
                other => CExpr::IntPow(Arc::new(other), n),
            },
        }
    }

    /// Branch power with an explicit argument window. The window width must
    /// be in (0, 2π]; internally the window is [arg_lo, arg_lo + 2π), so
    /// narrower declared ranges fix only the cut position.
    pub fn branch_pow(base: CExpr, exponent: f64, arg_lo: f64, arg_hi: f64) -> Result<CExpr> {
        let width = arg_hi - arg_lo;
        if !(width > 0.0 && width <= 2.0 * PI + 1e-9) {
            return Err(Error::Config(format!(
                "branch power argument window must have width in (0, 2*pi], got [{arg_lo}, {arg_hi}]"
            )));
        }
        Ok(CExpr::BranchPow {
            base: Arc::new(base),
            exponent,
            arg_lo,
            arg_hi,
        })
    }

    /// |base|^exponent: a power of abs(base). Real and nonnegative, so the
    /// declared window is never attained and the cut is immaterial.
    pub fn abs_pow(base: CExpr, exponent: f64) -> CExpr {
        CExpr::BranchPow {
            base: Arc::new(CExpr::abs(base)),
            exponent,
            arg_lo: -PI,
            arg_hi: PI,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        matches!(self, CExpr::Const(c) if *c == Complex64::ZERO)
    }

    /// Free variables of the expression.
    pub fn vars(&self) -> Vec<Var> {
        let mut seen = [false; 7];
        self.collect_vars(&mut seen);
        ALL_VARS
            .iter()
            .copied()
            .filter(|v| seen[v.index()])
            .collect()
    }

    fn collect_vars(&self, seen: &mut [bool; 7]) {
        match self {
            CExpr::Const(_) => {}
            CExpr::Var(v) => seen[v.index()] = true,
            CExpr::Conj(e) | CExpr::Abs(e) => e.collect_vars(seen),
            CExpr::Sum(es) | CExpr::Prod(es) => {
                for e in es {
                    e.collect_vars(seen);
                }
            }
            CExpr::IntPow(e, _) => e.collect_vars(seen),
            CExpr::BranchPow { base, .. } => base.collect_vars(seen),
        }
    }

    pub fn mentions(&self, var: Var) -> bool {
        let mut seen = [false; 7];
        self.collect_vars(&mut seen);
        seen[var.index()]
    }

    /// Structural substitution `var := replacement` (exact; branch-power
    /// bases are substituted in place, the window is unchanged).
    pub fn subst_var(&self, var: Var, replacement: &CExpr) -> CExpr {
        match self {
            CExpr::Const(c) => CExpr::Const(*c),
            CExpr::Var(v) => {
                if *v == var {
                    replacement.clone()
                } else {
                    CExpr::Var(*v)
                }
            }
            CExpr::Conj(e) => CExpr::conj(e.subst_var(var, replacement)),
            CExpr::Abs(e) => CExpr::abs(e.subst_var(var, replacement)),
            CExpr::Sum(es) => {
                CExpr::sum(es.iter().map(|e| e.subst_var(var, replacement)).collect())
            }
            CExpr::Prod(es) => {
                CExpr::prod(es.iter().map(|e| e.subst_var(var, replacement)).collect())
            }
            CExpr::IntPow(e, n) => CExpr::int_pow(e.subst_var(var, replacement), *n),
            CExpr::BranchPow {
                base,
                exponent,
                arg_lo,
                arg_hi,
            } => CExpr::BranchPow {
                base: Arc::new(base.subst_var(var, replacement)),
                exponent: *exponent,
                arg_lo: *arg_lo,
                arg_hi: *arg_hi,
            },
        }
    }

    /// Evaluate at a point. Fails on unassigned variables, poles, and branch
    /// cuts; the error message names the offending value.
    pub fn eval(&self, point: &Point) -> Result<Complex64> {
        match self {
            CExpr::Const(c) => Ok(*c),
            CExpr::Var(v) => point.get(*v).ok_or_else(|| {
                Error::SingularEval(format!("variable {} is not assigned", v.name()))
            }),
            CExpr::Conj(e) => Ok(e.eval(point)?.conj()),
            CExpr::Abs(e) => Ok(cre(e.eval(point)?.norm())),
            CExpr::Sum(es) => {
                let mut acc = Complex64::ZERO;
                for e in es {
                    acc += e.eval(point)?;
                }
                Ok(acc)
            }
            CExpr::Prod(es) => {
                let mut acc = Complex64::ONE;
                for e in es {
                    acc *= e.eval(point)?;
                }
                Ok(acc)
            }
            CExpr::IntPow(e, n) => {
                let v = e.eval(point)?;
                if v == Complex64::ZERO && *n < 0 {
                    return Err(Error::SingularEval(format!(
                        "zero base raised to negative power {n}"
                    )));
                }
                Ok(complex_powi(v, *n))
            }
            CExpr::BranchPow {
                base,
                exponent,
                arg_lo,
                ..
            } => {
                let v = base.eval(point)?;
                branch_pow_value(v, *exponent, *arg_lo)
            }
        }
    }

    /// Exact symbolic Wirtinger derivative in the given variable/direction.
    pub fn wirt_d(&self, var: Var, kind: DKind) -> CExpr {
        match self {
            CExpr::Const(_) => CExpr::zero(),
            CExpr::Var(v) => {
                if *v == var && kind == DKind::Holo {
                    CExpr::one()
                } else {
                    CExpr::zero()
                }
            }
            CExpr::Conj(e) => CExpr::conj(e.wirt_d(var, kind.flipped())),
            // from |g| = (g·conj(g))^{1/2}:
            // d|g| = (1/2)|g|^{-1}·(dg·ḡ + g·conj(d'g)), d' the flipped kind
            CExpr::Abs(e) => {
                let g = (**e).clone();
                let dg = g.wirt_d(var, kind);
                let dg_op = g.wirt_d(var, kind.flipped());
                if dg.is_zero_const() && dg_op.is_zero_const() {
                    return CExpr::zero();
                }
                let bracket = CExpr::add(
                    CExpr::mul(dg, CExpr::conj(g.clone())),
                    CExpr::mul(g.clone(), CExpr::conj(dg_op)),
                );
                CExpr::prod(vec![
                    CExpr::real(0.5),
                    CExpr::abs_pow(g, -1.0),
                    bracket,
                ])
            }
            CExpr::Sum(es) => CExpr::sum(es.iter().map(|e| e.wirt_d(var, kind)).collect()),
            CExpr::Prod(es) => {
                let mut terms = Vec::new();
                for (i, e) in es.iter().enumerate() {
                    let de = e.wirt_d(var, kind);
                    if de.is_zero_const() {
                        continue;
                    }
                    let mut factors = vec![de];
                    for (j, f) in es.iter().enumerate() {
                        if j != i {
                            factors.push(f.clone());
                        }
                    }
                    terms.push(CExpr::prod(factors));
                }
                CExpr::sum(terms)
            }
            CExpr::IntPow(e, n) => {
                let de = e.wirt_d(var, kind);
                if de.is_zero_const() {
                    return CExpr::zero();
                }
                CExpr::prod(vec![
                    CExpr::real(*n as f64),
                    CExpr::int_pow((**e).clone(), n - 1),
                    de,
                ])
            }
            CExpr::BranchPow {
                base,
                exponent,
                arg_lo,
                arg_hi,
            } => {
                let db = base.wirt_d(var, kind);
                if db.is_zero_const() {
                    return CExpr::zero();
                }
                // Same branch: the power is holomorphic in its base off the cut.
                let lower = CExpr::BranchPow {
                    base: base.clone(),
                    exponent: exponent - 1.0,
                    arg_lo: *arg_lo,
                    arg_hi: *arg_hi,
                };
                CExpr::prod(vec![CExpr::real(*exponent), lower, db])
            }
        }
    }
}

/// base^exponent with arg(base) normalized into [arg_lo, arg_lo + 2π).
pub fn branch_pow_value(v: Complex64, exponent: f64, arg_lo: f64) -> Result<Complex64> {
    if v == Complex64::ZERO {
        if exponent > 0.0 {
            return Ok(Complex64::ZERO);
        }
        if exponent == 0.0 {
            return Ok(Complex64::ONE);
        }
        return Err(Error::SingularEval(
            "zero base raised to negative branch power".into(),
        ));
    }
    let theta = v.arg();
    let two_pi = 2.0 * PI;
    let k = ((arg_lo - theta) / two_pi).ceil();
    let mut normalized = theta + two_pi * k;
    // Guard against rounding placing us just below the window.
    if normalized < arg_lo {
        normalized += two_pi;
    }
    if normalized >= arg_lo + two_pi {
        normalized -= two_pi;
    }
    if (normalized - arg_lo).abs() < 1e-12 || (normalized - arg_lo - two_pi).abs() < 1e-12 {
        return Err(Error::SingularEval(format!(
            "evaluation on the branch cut: arg(base) = {normalized:.15} coincides with the cut at {arg_lo:.15}"
        )));
    }
    let modulus = v.norm();
    let magnitude = modulus.powf(exponent);
    Ok(Complex64::from_polar(magnitude, exponent * normalized))
}

/// Integer power by squaring; negative exponents invert first.
pub fn complex_powi(v: Complex64, n: i32) -> Complex64 {
    if n == 0 {
        return Complex64::ONE;
    }
    let (mut base, mut e) = if n < 0 {
        (Complex64::ONE / v, n.unsigned_abs())
    } else {
        (v, n as u32)
    };
    let mut acc = Complex64::ONE;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn fmt_f64(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x == x.trunc() && x.abs() < 1e15 {
        write!(f, "{}", x as i64)
    } else {
        write!(f, "{x}")
    }
}

fn fmt_const(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        if c.re < 0.0 {
            write!(f, "(0-")?;
            fmt_f64(-c.re, f)?;
            return write!(f, ")");
        }
        return fmt_f64(c.re, f);
    }
    if c.re == 0.0 {
        if c.im == 1.0 {
            return write!(f, "i");
        }
        if c.im < 0.0 {
            write!(f, "(0-")?;
            fmt_f64(-c.im, f)?;
            return write!(f, "*i)");
        }
        write!(f, "(")?;
        fmt_f64(c.im, f)?;
        return write!(f, "*i)");
    }
    write!(f, "(")?;
    fmt_f64(c.re, f)?;
    if c.im >= 0.0 {
        write!(f, "+")?;
        fmt_f64(c.im, f)?;
    } else {
        write!(f, "-")?;
        fmt_f64(-c.im, f)?;
    }
    write!(f, "*i)")
}

impl fmt::Display for CExpr {
    /// Prints in the expression grammar; print→parse is identity up to
    /// normalization.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExpr::Const(c) => fmt_const(*c, f),
            CExpr::Var(v) => write!(f, "{}", v.name()),
            CExpr::Conj(e) => write!(f, "conj({e})"),
            CExpr::Abs(e) => write!(f, "abs({e})"),
            CExpr::Sum(es) => {
                write!(f, "(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            CExpr::Prod(es) => {
                write!(f, "(")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            CExpr::IntPow(e, n) => write!(f, "{e}^{n}"),
            CExpr::BranchPow {
                base,
                exponent,
                arg_lo,
                arg_hi,
            } => {
                write!(f, "pow({base},")?;
                fmt_f64(*exponent, f)?;
                write!(f, ",")?;
                fmt_f64(*arg_lo, f)?;
                write!(f, ",")?;
                fmt_f64(*arg_hi, f)?;
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eval_product_of_vars() {
        // z1*z2 at z1=2, z2=3i
        let e = CExpr::mul(CExpr::var(Var::Z1), CExpr::var(Var::Z2));
        let p = Point::new()
            .with(Var::Z1, cre(2.0))
            .with(Var::Z2, c64(0.0, 3.0));
        let v = e.eval(&p).unwrap();
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 6.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_conj_square() {
        // conj(w2)^2 at w2 = 1+i is (1-i)^2 = -2i
        let e = CExpr::int_pow(CExpr::conj(CExpr::var(Var::W2)), 2);
        let p = Point::new().with(Var::W2, c64(1.0, 1.0));
        let v = e.eval(&p).unwrap();
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn eval_branch_pow_inverse() {
        // pow(z2-1, -1, pi/2, 3pi/2) at z2=0 is (-1)^{-1} = -1
        let base = CExpr::sub(CExpr::var(Var::Z2), CExpr::one());
        let e = CExpr::branch_pow(base, -1.0, PI / 2.0, 3.0 * PI / 2.0).unwrap();
        let p = Point::new().with(Var::Z2, Complex64::ZERO);
        let v = e.eval(&p).unwrap();
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn branch_cut_evaluation_errors() {
        // cut at arg = 0: positive real base values sit on the cut
        let e = CExpr::branch_pow(CExpr::var(Var::Z1), 0.5, 0.0, 2.0 * PI).unwrap();
        let p = Point::new().with(Var::Z1, cre(2.0));
        assert!(matches!(e.eval(&p), Err(Error::SingularEval(_))));
    }

    #[test]
    fn wirt_d_basics() {
        // d/dz̄1 conj(z1) = 1
        let e = CExpr::conj(CExpr::var(Var::Z1));
        let d = e.wirt_d(Var::Z1, DKind::Anti);
        assert!(matches!(d, CExpr::Const(c) if c == Complex64::ONE));
        // d/dz1 z1^2 = 2 z1
        let e = CExpr::int_pow(CExpr::var(Var::Z1), 2);
        let d = e.wirt_d(Var::Z1, DKind::Holo);
        let p = Point::new().with(Var::Z1, cre(5.0));
        assert_abs_diff_eq!(d.eval(&p).unwrap().re, 10.0, epsilon = 1e-15);
    }

    #[test]
    fn wirt_d_of_abs_matches_finite_difference() {
        // d|z1|/dz1 = conj(z1)/(2|z1|)
        let e = CExpr::abs(CExpr::var(Var::Z1));
        let d = e.wirt_d(Var::Z1, DKind::Holo);
        let z = c64(0.4, 0.3);
        let p = Point::new().with(Var::Z1, z);
        let expected = z.conj() / (2.0 * z.norm());
        let got = d.eval(&p).unwrap();
        assert_abs_diff_eq!(got.re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, expected.im, epsilon = 1e-12);
    }
}
