//! Canonical normal form for expressions: an expanded sum of Laurent
//! monomials over the variables and their conjugates, optionally carrying
//! branch-power factors ("atoms") such as `(z2-1)^0.6` whose bases are
//! themselves atom-free polynomials.
//!
//! Two polynomial expressions that are equal as functions normalize to the
//! same [`Poly`]; symbolic equality assertions throughout the crate reduce to
//! `(/a/ - /b/).max_coeff_norm() <= tol`. Negative exponents are allowed so
//! that quotients by monomials (the coordinate change w1 = z1/z2 in
//! particular) stay exact.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{branch_pow_value, complex_powi, CExpr, DKind, Point, Var, ALL_VARS};

/// Two slots per variable: holomorphic exponent, then conjugate exponent.
pub const SLOTS: usize = 14;

pub fn slot(var: Var, kind: DKind) -> usize {
    var.index() * 2
        + match kind {
            DKind::Holo => 0,
            DKind::Anti => 1,
        }
}

fn slot_var(s: usize) -> (Var, DKind) {
    let kind = if s % 2 == 0 { DKind::Holo } else { DKind::Anti };
    (ALL_VARS[s / 2], kind)
}

/// Fixed-point scale for real exponents and cut angles carried in keys.
const QSCALE: f64 = (1u64 << 40) as f64;

fn quantize(x: f64) -> i64 {
    (x * QSCALE).round() as i64
}

fn canon_bits(x: f64) -> u64 {
    // -0.0 and 0.0 must compare equal in keys
    if x == 0.0 {
        0u64
    } else {
        x.to_bits()
    }
}

/// How an atom turns its base value into a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AtomKind {
    /// base^(·) with the cut along arg ≡ arg_lo; arg normalized into
    /// [arg_lo, arg_lo + 2π).
    Branch { arg_lo: f64, arg_hi: f64 },
    /// |base|^(·): real, nonnegative, no cut. Kept factored so that values
    /// near the zero set of `base` do not suffer expansion cancellation.
    Modulus,
}

/// A power of an atom-free polynomial base, shared by the monomials that
/// mention it. The exponent lives on the monomial factor.
#[derive(Debug)]
pub struct AtomDef {
    pub base: Poly,
    pub kind: AtomKind,
    key: AtomKey,
}

type AtomKey = (Vec<([i16; SLOTS], u64, u64)>, i64);

impl AtomDef {
    fn new(base: Poly, kind: AtomKind) -> Result<AtomDef> {
        if base.has_atoms() {
            return Err(Error::Unsupported(
                "nested branch powers are outside the normal form".into(),
            ));
        }
        let mut key_terms = Vec::with_capacity(base.terms.len());
        for (m, c) in &base.terms {
            key_terms.push((m.exps, canon_bits(c.re), canon_bits(c.im)));
        }
        let kind_key = match kind {
            AtomKind::Branch { arg_lo, .. } => quantize(arg_lo),
            AtomKind::Modulus => i64::MIN,
        };
        let key = (key_terms, kind_key);
        Ok(AtomDef { base, kind, key })
    }

    fn conj(&self) -> Result<AtomDef> {
        match self.kind {
            // conj(base^a) = conj(base)^a with the window [-lo-2π, -lo)
            AtomKind::Branch { arg_lo, .. } => {
                let two_pi = 2.0 * std::f64::consts::PI;
                AtomDef::new(
                    self.base.conj(),
                    AtomKind::Branch {
                        arg_lo: -arg_lo - two_pi,
                        arg_hi: -arg_lo,
                    },
                )
            }
            // |base|^a is real: conjugation is the identity
            AtomKind::Modulus => AtomDef::new(self.base.clone(), AtomKind::Modulus),
        }
    }

    fn value(&self, base_val: Complex64, exponent: f64) -> Result<Complex64> {
        match self.kind {
            AtomKind::Branch { arg_lo, .. } => branch_pow_value(base_val, exponent, arg_lo),
            AtomKind::Modulus => {
                let m = base_val.norm();
                if m == 0.0 {
                    if exponent > 0.0 {
                        return Ok(Complex64::ZERO);
                    }
                    if exponent == 0.0 {
                        return Ok(Complex64::ONE);
                    }
                    return Err(Error::SingularEval(
                        "zero modulus raised to a negative power".into(),
                    ));
                }
                Ok(Complex64::new(m.powf(exponent), 0.0))
            }
        }
    }
}

impl PartialEq for AtomDef {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for AtomDef {}
impl PartialOrd for AtomDef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for AtomDef {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

#[derive(Debug, Clone)]
pub struct AtomFactor {
    pub def: Arc<AtomDef>,
    /// Quantized real exponent (multiples of 2^-40), the identity key.
    pub exp_q: i64,
    /// Exact exponent used for evaluation and differentiation.
    pub exp: f64,
}

impl AtomFactor {
    pub fn exponent(&self) -> f64 {
        self.exp
    }
}

impl PartialEq for AtomFactor {
    fn eq(&self, other: &Self) -> bool {
        self.exp_q == other.exp_q && self.def == other.def
    }
}
impl Eq for AtomFactor {}
impl PartialOrd for AtomFactor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for AtomFactor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.def
            .cmp(&other.def)
            .then_with(|| self.exp_q.cmp(&other.exp_q))
    }
}

/// A Laurent monomial with optional atom factors, e.g. `z1^2 z̄2^-1 (z2-1)^0.6`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mono {
    pub exps: [i16; SLOTS],
    pub atoms: Vec<AtomFactor>,
}

impl Mono {
    pub fn unit() -> Mono {
        Mono {
            exps: [0; SLOTS],
            atoms: Vec::new(),
        }
    }

    pub fn var(v: Var, kind: DKind, e: i16) -> Mono {
        let mut m = Mono::unit();
        m.exps[slot(v, kind)] = e;
        m
    }

    pub fn is_unit(&self) -> bool {
        self.exps.iter().all(|&e| e == 0) && self.atoms.is_empty()
    }

    fn conj(&self) -> Result<Mono> {
        let mut exps = [0i16; SLOTS];
        for i in 0..SLOTS / 2 {
            exps[2 * i] = self.exps[2 * i + 1];
            exps[2 * i + 1] = self.exps[2 * i];
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            atoms.push(AtomFactor {
                def: Arc::new(a.def.conj()?),
                exp_q: a.exp_q,
                exp: a.exp,
            });
        }
        atoms.sort();
        Ok(Mono { exps, atoms })
    }

    /// Total degree over the given slots (only meaningful when nonnegative).
    pub fn degree_over(&self, slots: &[usize]) -> i32 {
        slots.iter().map(|&s| self.exps[s] as i32).sum()
    }

    pub fn mentions(&self, var: Var) -> bool {
        let h = slot(var, DKind::Holo);
        if self.exps[h] != 0 || self.exps[h + 1] != 0 {
            return true;
        }
        self.atoms.iter().any(|a| a.def.base.mentions(var))
    }

    pub fn eval(&self, point: &Point) -> Result<Complex64> {
        let mut acc = Complex64::ONE;
        for s in 0..SLOTS {
            let e = self.exps[s];
            if e == 0 {
                continue;
            }
            let (var, kind) = slot_var(s);
            let v = point.get(var).ok_or_else(|| {
                Error::SingularEval(format!("variable {} is not assigned", var.name()))
            })?;
            let v = match kind {
                DKind::Holo => v,
                DKind::Anti => v.conj(),
            };
            if v == Complex64::ZERO {
                if e < 0 {
                    return Err(Error::SingularEval(format!(
                        "pole: {}^{} at zero",
                        var.name(),
                        e
                    )));
                }
                return Ok(Complex64::ZERO);
            }
            acc *= complex_powi(v, e as i32);
        }
        for a in &self.atoms {
            let b = a.def.base.eval(point)?;
            acc *= a.def.value(b, a.exponent())?;
        }
        Ok(acc)
    }
}

/// Canonical expanded form: monomial → coefficient.
#[derive(Debug, Clone, Default)]
pub struct Poly {
    pub terms: BTreeMap<Mono, Complex64>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Complex64) -> Poly {
        let mut p = Poly::zero();
        if c != Complex64::ZERO {
            p.terms.insert(Mono::unit(), c);
        }
        p
    }

    pub fn one() -> Poly {
        Poly::constant(Complex64::ONE)
    }

    pub fn var(v: Var) -> Poly {
        let mut p = Poly::zero();
        p.terms.insert(Mono::var(v, DKind::Holo, 1), Complex64::ONE);
        p
    }

    pub fn conj_var(v: Var) -> Poly {
        let mut p = Poly::zero();
        p.terms.insert(Mono::var(v, DKind::Anti, 1), Complex64::ONE);
        p
    }

    pub fn from_term(m: Mono, c: Complex64) -> Poly {
        let mut p = Poly::zero();
        if c != Complex64::ZERO {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_atoms(&self) -> bool {
        self.terms.keys().any(|m| !m.atoms.is_empty())
    }

    pub fn mentions(&self, var: Var) -> bool {
        self.terms.keys().any(|m| m.mentions(var))
    }

    /// Largest coefficient modulus; 0 for the zero polynomial.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops terms with |coefficient| <= eps (used after floating-point
    /// cancellations; arithmetic itself only drops exact zeros).
    pub fn pruned(mut self, eps: f64) -> Poly {
        self.terms.retain(|_, c| c.norm() > eps);
        self
    }

    fn insert(&mut self, m: Mono, c: Complex64) {
        if c == Complex64::ZERO {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == Complex64::ZERO {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        self.scale(-Complex64::ONE)
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        if c == Complex64::ZERO {
            return Poly::zero();
        }
        let mut out = Poly::zero();
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                mono_mul_into(&mut out, ma, mb, ca * cb);
            }
        }
        out
    }

    pub fn mul_term(&self, m: &Mono, c: Complex64) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            mono_mul_into(&mut out, ma, m, ca * c);
        }
        out
    }

    pub fn pow_i(&self, n: i32) -> Result<Poly> {
        if n == 0 {
            return Ok(Poly::one());
        }
        if n < 0 {
            let inv = self.invert_monomial()?;
            return inv.pow_i(-n);
        }
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Inverse of a single-monomial polynomial.
    fn invert_monomial(&self) -> Result<Poly> {
        if self.terms.len() != 1 {
            return Err(Error::Unsupported(
                "division is only supported by a single monomial".into(),
            ));
        }
        let (m, c) = self.terms.iter().next().unwrap();
        let mut exps = [0i16; SLOTS];
        for s in 0..SLOTS {
            exps[s] = -m.exps[s];
        }
        let atoms = m
            .atoms
            .iter()
            .map(|a| AtomFactor {
                def: a.def.clone(),
                exp_q: -a.exp_q,
                exp: -a.exp,
            })
            .collect();
        Ok(Poly::from_term(Mono { exps, atoms }, Complex64::ONE / c))
    }

    pub fn conj(&self) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            // conj of an atom-free mono cannot fail; atom conj only builds
            // a mirrored window, which is always valid.
            let cm = m.conj().expect("conjugation is total on normal forms");
            out.insert(cm, c.conj());
        }
        out
    }

    /// Exact Wirtinger derivative of the normal form.
    pub fn wirt_d(&self, var: Var, kind: DKind) -> Poly {
        let s = slot(var, kind);
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            // power rule on the variable slot
            let e = m.exps[s];
            if e != 0 {
                let mut lowered = m.clone();
                lowered.exps[s] = e - 1;
                out.insert(lowered, c * (e as f64));
            }
            // chain rule through each atom factor
            for (i, a) in m.atoms.iter().enumerate() {
                match a.def.kind {
                    AtomKind::Branch { .. } => {
                        // d(g^a) = a·g^{a-1}·dg, same branch
                        let dbase = a.def.base.wirt_d(var, kind);
                        if dbase.is_zero() {
                            continue;
                        }
                        let mut rest = m.clone();
                        let new_q = a.exp_q - quantize(1.0);
                        if new_q == 0 {
                            rest.atoms.remove(i);
                        } else {
                            rest.atoms[i].exp_q = new_q;
                            rest.atoms[i].exp = a.exp - 1.0;
                        }
                        let factor = dbase.mul_term(&rest, c * a.exponent());
                        for (fm, fc) in factor.terms {
                            out.insert(fm, fc);
                        }
                    }
                    AtomKind::Modulus => {
                        // d(|g|^a) = (a/2)·|g|^{a-2}·(dg·ḡ + g·conj(d'g)),
                        // d' the opposite Wirtinger direction
                        let dg = a.def.base.wirt_d(var, kind);
                        let dg_op = a.def.base.wirt_d(var, kind.flipped());
                        let bracket = dg
                            .mul(&a.def.base.conj())
                            .add(&a.def.base.mul(&dg_op.conj()));
                        if bracket.is_zero() {
                            continue;
                        }
                        let mut rest = m.clone();
                        let new_q = a.exp_q - 2 * quantize(1.0);
                        if new_q == 0 {
                            rest.atoms.remove(i);
                        } else {
                            rest.atoms[i].exp_q = new_q;
                            rest.atoms[i].exp = a.exp - 2.0;
                        }
                        let factor = bracket.mul_term(&rest, c * (a.exponent() / 2.0));
                        for (fm, fc) in factor.terms {
                            out.insert(fm, fc);
                        }
                    }
                }
            }
        }
        out
    }

    /// Substitute `var := replacement` where the replacement is a single
    /// monomial (conjugate slots get the conjugate monomial). Exact.
    pub fn subst_monomial(&self, var: Var, replacement: &Poly) -> Result<Poly> {
        if replacement.terms.len() != 1 {
            return Err(Error::Unsupported(
                "substitution target must be a single monomial".into(),
            ));
        }
        let conj_replacement = replacement.conj();
        let hslot = slot(var, DKind::Holo);
        let aslot = slot(var, DKind::Anti);
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let eh = m.exps[hslot] as i32;
            let ea = m.exps[aslot] as i32;
            let mut stripped = m.clone();
            stripped.exps[hslot] = 0;
            stripped.exps[aslot] = 0;
            // substitute inside atom bases
            let mut atoms = Vec::with_capacity(stripped.atoms.len());
            for a in &stripped.atoms {
                if a.def.base.mentions(var) {
                    let new_base = a.def.base.subst_monomial(var, replacement)?;
                    atoms.push(AtomFactor {
                        def: Arc::new(AtomDef::new(new_base, a.def.kind)?),
                        exp_q: a.exp_q,
                        exp: a.exp,
                    });
                } else {
                    atoms.push(a.clone());
                }
            }
            atoms.sort();
            stripped.atoms = atoms;
            let mut piece = Poly::from_term(stripped, *c);
            if eh != 0 {
                piece = piece.mul(&replacement.pow_i(eh)?);
            }
            if ea != 0 {
                piece = piece.mul(&conj_replacement.pow_i(ea)?);
            }
            for (pm, pc) in piece.terms {
                out.insert(pm, pc);
            }
        }
        Ok(out)
    }

    /// Substitute a complex constant for `var`. Atom bases that collapse to
    /// constants are folded into the coefficient (erroring on the cut).
    pub fn partial_eval(&self, var: Var, value: Complex64) -> Result<Poly> {
        let hslot = slot(var, DKind::Holo);
        let aslot = slot(var, DKind::Anti);
        let cval = value.conj();
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let eh = m.exps[hslot] as i32;
            let ea = m.exps[aslot] as i32;
            let mut coeff = *c;
            if value == Complex64::ZERO && (eh != 0 || ea != 0) {
                // |value|^{eh+ea} decides: positive net order vanishes,
                // the rest is a pole or a direction-dependent phase.
                if eh + ea > 0 {
                    continue;
                }
                return Err(Error::SingularEval(format!(
                    "monomial {}^{}*conj({})^{} is singular at zero",
                    var.name(),
                    eh,
                    var.name(),
                    ea
                )));
            }
            if eh != 0 {
                coeff *= complex_powi(value, eh);
            }
            if ea != 0 {
                coeff *= complex_powi(cval, ea);
            }
            let mut stripped = m.clone();
            stripped.exps[hslot] = 0;
            stripped.exps[aslot] = 0;
            let mut atoms = Vec::new();
            for a in &stripped.atoms {
                if a.def.base.mentions(var) {
                    let new_base = a.def.base.partial_eval(var, value)?;
                    if let Some(k) = new_base.as_constant() {
                        coeff *= a.def.value(k, a.exponent())?;
                    } else {
                        atoms.push(AtomFactor {
                            def: Arc::new(AtomDef::new(new_base, a.def.kind)?),
                            exp_q: a.exp_q,
                            exp: a.exp,
                        });
                    }
                } else {
                    atoms.push(a.clone());
                }
            }
            atoms.sort();
            stripped.atoms = atoms;
            out.insert(stripped, coeff);
        }
        Ok(out)
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        if self.terms.is_empty() {
            return Some(Complex64::ZERO);
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_unit() {
                return Some(*c);
            }
        }
        None
    }

    pub fn eval(&self, point: &Point) -> Result<Complex64> {
        let mut acc = Complex64::ZERO;
        for (m, c) in &self.terms {
            acc += c * m.eval(point)?;
        }
        Ok(acc)
    }

    /// Monomials whose total degree over `slots` is <= max_total. Errors if a
    /// term carries a negative exponent or an atom involving those slots'
    /// variables (callers fall back to the derivative-based Taylor route).
    pub fn low_degree_part(&self, slots: &[usize], max_total: i32) -> Result<Poly> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for &s in slots {
                if m.exps[s] < 0 {
                    return Err(Error::Unsupported(
                        "low-degree truncation needs nonnegative exponents".into(),
                    ));
                }
                let (var, _) = slot_var(s);
                if m.atoms.iter().any(|a| a.def.base.mentions(var)) {
                    return Err(Error::Unsupported(
                        "low-degree truncation does not apply to branch-power factors".into(),
                    ));
                }
            }
            if m.degree_over(slots) <= max_total {
                out.insert(m.clone(), *c);
            }
        }
        Ok(out)
    }

    /// The variables this polynomial mentions.
    pub fn vars(&self) -> Vec<Var> {
        ALL_VARS
            .iter()
            .copied()
            .filter(|v| self.mentions(*v))
            .collect()
    }

    /// Rebuilds a [`CExpr`] in the grammar that normalizes back to `self`.
    pub fn to_expr(&self) -> CExpr {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut factors = vec![CExpr::constant(*c)];
            for s in 0..SLOTS {
                let e = m.exps[s];
                if e == 0 {
                    continue;
                }
                let (var, kind) = slot_var(s);
                let base = match kind {
                    DKind::Holo => CExpr::var(var),
                    DKind::Anti => CExpr::conj(CExpr::var(var)),
                };
                factors.push(CExpr::int_pow(base, e as i32));
            }
            for a in &m.atoms {
                match a.def.kind {
                    AtomKind::Branch { arg_lo, arg_hi } => factors.push(CExpr::BranchPow {
                        base: Arc::new(a.def.base.to_expr()),
                        exponent: a.exponent(),
                        arg_lo,
                        arg_hi,
                    }),
                    AtomKind::Modulus => factors.push(CExpr::BranchPow {
                        base: Arc::new(CExpr::abs(a.def.base.to_expr())),
                        exponent: a.exponent(),
                        arg_lo: -std::f64::consts::PI,
                        arg_hi: std::f64::consts::PI,
                    }),
                }
            }
            terms.push(CExpr::prod(factors));
        }
        CExpr::sum(terms)
    }
}

/// Multiply two monomials into an accumulating polynomial, collapsing any
/// atom whose merged exponent lands on an integer back into plain powers of
/// its base.
fn mono_mul_into(out: &mut Poly, a: &Mono, b: &Mono, coeff: Complex64) {
    if coeff == Complex64::ZERO {
        return;
    }
    let mut exps = [0i16; SLOTS];
    for s in 0..SLOTS {
        exps[s] = a.exps[s] + b.exps[s];
    }
    let mut atoms: Vec<AtomFactor> = Vec::with_capacity(a.atoms.len() + b.atoms.len());
    let mut collapsed: Vec<(Arc<AtomDef>, i32)> = Vec::new();
    let mut merged: Vec<AtomFactor> = a.atoms.clone();
    for bf in &b.atoms {
        if let Some(existing) = merged.iter_mut().find(|af| af.def == bf.def) {
            existing.exp_q += bf.exp_q;
            existing.exp += bf.exp;
        } else {
            merged.push(bf.clone());
        }
    }
    for f in merged {
        if f.exp_q == 0 {
            continue;
        }
        if f.exp_q % (1i64 << 40) == 0 {
            let n = (f.exp_q >> 40) as i32;
            // negative powers only expand when the base is invertible;
            // modulus atoms expand only at even powers of single-monomial
            // bases (multi-term expansion would reintroduce cancellation
            // near the base's zero set)
            let expandable = match f.def.kind {
                AtomKind::Branch { .. } => n >= 0 || f.def.base.terms.len() == 1,
                AtomKind::Modulus => n % 2 == 0 && f.def.base.terms.len() == 1,
            };
            if n.unsigned_abs() <= 64 && expandable {
                collapsed.push((f.def, n));
                continue;
            }
        }
        atoms.push(f);
    }
    atoms.sort();
    let mono = Mono { exps, atoms };
    if collapsed.is_empty() {
        out.insert(mono, coeff);
        return;
    }
    let mut piece = Poly::from_term(mono, coeff);
    for (def, n) in collapsed {
        let base_pow = match def.kind {
            // integer branch powers equal plain powers off the cut
            AtomKind::Branch { .. } => def
                .base
                .pow_i(n)
                .expect("atom bases are single-mono-invertible or n >= 0"),
            // |g|^n = (g·ḡ)^{n/2}; only even n are marked expandable
            AtomKind::Modulus => def
                .base
                .mul(&def.base.conj())
                .pow_i(n / 2)
                .expect("single-monomial bases are invertible"),
        };
        piece = piece.mul(&base_pow);
    }
    for (m, c) in piece.terms {
        out.insert(m, c);
    }
}

/// Normalize an expression tree to its canonical polynomial form.
///
/// Fails with [`Error::Unsupported`] on genuinely non-polynomial content:
/// division by a non-monomial, branch powers of non-polynomial bases, or
/// nesting of branch powers.
pub fn normalize(e: &CExpr) -> Result<Poly> {
    match e {
        CExpr::Const(c) => Ok(Poly::constant(*c)),
        CExpr::Var(v) => Ok(Poly::var(*v)),
        CExpr::Conj(inner) => Ok(normalize(inner)?.conj()),
        CExpr::Abs(inner) => {
            let g = normalize(inner)?;
            modulus_poly(g, 1.0)
        }
        CExpr::Sum(es) => {
            let mut acc = Poly::zero();
            for t in es {
                acc = acc.add(&normalize(t)?);
            }
            Ok(acc)
        }
        CExpr::Prod(es) => {
            let mut acc = Poly::one();
            for f in es {
                acc = acc.mul(&normalize(f)?);
            }
            Ok(acc)
        }
        CExpr::IntPow(inner, n) => normalize(inner)?.pow_i(*n),
        CExpr::BranchPow {
            base,
            exponent,
            arg_lo,
            arg_hi,
        } => {
            let b = normalize(base)?;
            // pow(|g|^β, a) folds to |g|^{aβ}: real nonnegative base, the
            // window is irrelevant
            if b.terms.len() == 1 {
                let (m, c) = b.terms.iter().next().unwrap();
                if m.atoms.len() == 1
                    && m.exps.iter().all(|&e| e == 0)
                    && m.atoms[0].def.kind == AtomKind::Modulus
                    && (c - Complex64::ONE).norm() == 0.0
                {
                    let inner = m.atoms[0].def.base.clone();
                    let beta = m.atoms[0].exp;
                    return modulus_poly(inner, exponent * beta);
                }
            }
            atom_poly(b, *exponent, *arg_lo, *arg_hi)
        }
    }
}

fn atom_poly(base: Poly, exponent: f64, arg_lo: f64, arg_hi: f64) -> Result<Poly> {
    let q = quantize(exponent);
    if q == 0 {
        return Ok(Poly::one());
    }
    // Integer exponents are plain powers regardless of the window.
    if q % (1i64 << 40) == 0 {
        let n = (q >> 40) as i32;
        if n.unsigned_abs() <= 64 && (n >= 0 || base.terms.len() == 1) {
            return base.pow_i(n);
        }
    }
    if let Some(c) = base.as_constant() {
        return Ok(Poly::constant(branch_pow_value(c, exponent, arg_lo)?));
    }
    let def = Arc::new(AtomDef::new(base, AtomKind::Branch { arg_lo, arg_hi })?);
    Ok(Poly::from_term(
        Mono {
            exps: [0; SLOTS],
            atoms: vec![AtomFactor {
                def,
                exp_q: q,
                exp: exponent,
            }],
        },
        Complex64::ONE,
    ))
}

/// |base|^exponent as a modulus atom (or collapsed when trivial).
pub fn modulus_poly(base: Poly, exponent: f64) -> Result<Poly> {
    let q = quantize(exponent);
    if q == 0 {
        return Ok(Poly::one());
    }
    if let Some(c) = base.as_constant() {
        let m = c.norm();
        if m == 0.0 && exponent < 0.0 {
            return Err(Error::SingularEval(
                "zero modulus raised to a negative power".into(),
            ));
        }
        return Ok(Poly::constant(Complex64::new(m.powf(exponent), 0.0)));
    }
    // |g|^{2m} of a single monomial collapses to (g·ḡ)^m
    if q % (2 * (1i64 << 40)) == 0 && base.terms.len() == 1 {
        let n = (q >> 40) as i32;
        return base.mul(&base.conj()).pow_i(n / 2);
    }
    let def = Arc::new(AtomDef::new(base, AtomKind::Modulus)?);
    Ok(Poly::from_term(
        Mono {
            exps: [0; SLOTS],
            atoms: vec![AtomFactor {
                def,
                exp_q: q,
                exp: exponent,
            }],
        },
        Complex64::ONE,
    ))
}

/// Symbolic equality up to floating-point residue in the coefficients.
pub fn exprs_equal(a: &CExpr, b: &CExpr, tol: f64) -> Result<bool> {
    let pa = normalize(a)?;
    let pb = normalize(b)?;
    Ok(pa.sub(&pb).max_coeff_norm() <= tol)
}
