//! The solid Cauchy transform T and the boundary Cauchy integral S on discs,
//! their slice versions on product domains, and the exact monomial rules
//! behind the symbolic fast path.
//!
//! Sign conventions (centered disc of radius R, target variable v):
//!   T h(z) = -1/(2πi) ∫_D h(ζ)/(ζ-z) dζ̄∧dζ,   ∂̄(T h) = h,
//!   S h(z) =  1/(2πi) ∮_{bD} h(ζ)/(ζ-z) dζ,    S reproduces holomorphics.
//!
//! Exact rules used by the symbolic path (b ≥ 0, any integer a ≥ -b-1):
//!   T(v^a v̄^b) = ( v^a v̄^{b+1} - [a>b]·R^{2b+2}·v^{a-b-1} ) / (b+1)
//!   S(v^a v̄^b) = R^{2b}·v^{a-b} when a ≥ b, else 0.
//! Both are verified against the ∂̄-residual and quadrature in tests rather
//! than trusted as a table.

use num_complex::Complex64;

use crate::domains::{boundary_nodes, build_polar_grid, gauss_legendre, DiscDomain, PolarGrid};
use crate::error::{Error, Result};
use crate::expr::{CExpr, DKind, Point, Var};
use crate::poly::{normalize, slot, Mono, Poly};

/// Fraction of the radius beyond which the trapezoid boundary rule loses
/// accuracy; boundary evaluations past it carry a warning.
pub const S_RADIUS_RATIO: f64 = 0.95;

/// Grid + boundary rule bundle for one disc.
#[derive(Debug, Clone)]
pub struct CauchyEvaluator {
    pub disc: DiscDomain,
    pub grid: PolarGrid,
    pub boundary: Vec<(Complex64, Complex64)>,
}

impl CauchyEvaluator {
    pub fn new(disc: DiscDomain, n_r: usize, n_theta: usize) -> Result<CauchyEvaluator> {
        Ok(CauchyEvaluator {
            disc,
            grid: build_polar_grid(disc, n_r, n_theta)?,
            boundary: boundary_nodes(disc, n_theta)?,
        })
    }

    pub fn unit(n_r: usize, n_theta: usize) -> CauchyEvaluator {
        CauchyEvaluator::new(DiscDomain::unit(), n_r, n_theta).unwrap()
    }
}

/// Value of S together with the near-boundary accuracy flag.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryValue {
    pub value: Complex64,
    pub near_boundary: bool,
}

// ---------------------------------------------------------------------------
// exact monomial rules
// ---------------------------------------------------------------------------

fn var_pow(var: Var, kind: DKind, e: i32) -> Mono {
    Mono::var(var, kind, e as i16)
}

/// T(v^a v̄^b) on the centered disc of radius `radius`.
pub fn solid_monomial_rule(a: i32, b: i32, radius: f64, var: Var) -> Result<Poly> {
    if b < 0 {
        return Err(Error::Unsupported(
            "solid transform rule requires a nonnegative conjugate exponent".into(),
        ));
    }
    if a + b < -1 {
        return Err(Error::Unsupported(format!(
            "monomial v^{a} v̄^{b} is not integrable on the disc"
        )));
    }
    let inv = 1.0 / (b as f64 + 1.0);
    let mut main = var_pow(var, DKind::Holo, a);
    main.exps[slot(var, DKind::Anti)] = (b + 1) as i16;
    let mut out = Poly::from_term(main, Complex64::new(inv, 0.0));
    if a > b {
        let holo = var_pow(var, DKind::Holo, a - b - 1);
        let coeff = -inv * radius.powi(2 * b + 2);
        out = out.add(&Poly::from_term(holo, Complex64::new(coeff, 0.0)));
    }
    Ok(out)
}

/// S(v^a v̄^b) on the centered circle of radius `radius`.
pub fn boundary_monomial_rule(a: i32, b: i32, radius: f64, var: Var) -> Poly {
    if a < b {
        return Poly::zero();
    }
    Poly::from_term(
        var_pow(var, DKind::Holo, a - b),
        Complex64::new(radius.powi(2 * b), 0.0),
    )
}

fn require_centered(disc: &DiscDomain) -> Result<()> {
    if disc.center.norm() > 1e-14 {
        return Err(Error::Unsupported(
            "the symbolic transform path requires a disc centered at 0".into(),
        ));
    }
    Ok(())
}

/// Splits a monomial into (a, b, rest) relative to `var`, failing when a
/// branch-power factor involves the integration variable.
fn split_slice(m: &Mono, var: Var) -> Result<(i32, i32, Mono)> {
    if m.atoms.iter().any(|f| f.def.base.mentions(var)) {
        return Err(Error::Unsupported(format!(
            "branch power involves the integration variable {}",
            var.name()
        )));
    }
    let hs = slot(var, DKind::Holo);
    let as_ = slot(var, DKind::Anti);
    let a = m.exps[hs] as i32;
    let b = m.exps[as_] as i32;
    let mut rest = m.clone();
    rest.exps[hs] = 0;
    rest.exps[as_] = 0;
    Ok((a, b, rest))
}

/// Exact T in the variable `var` (other variables ride along as
/// coefficients). Centered disc only.
pub fn symbolic_solid(h: &Poly, var: Var, disc: &DiscDomain) -> Result<Poly> {
    require_centered(disc)?;
    let mut out = Poly::zero();
    for (m, c) in &h.terms {
        let (a, b, rest) = split_slice(m, var)?;
        let transformed = solid_monomial_rule(a, b, disc.radius, var)?;
        out = out.add(&transformed.mul_term(&rest, *c));
    }
    Ok(out)
}

/// Exact S in the variable `var`. Centered disc only.
pub fn symbolic_boundary(h: &Poly, var: Var, disc: &DiscDomain) -> Result<Poly> {
    require_centered(disc)?;
    let mut out = Poly::zero();
    for (m, c) in &h.terms {
        let (a, b, rest) = split_slice(m, var)?;
        let transformed = boundary_monomial_rule(a, b, disc.radius, var);
        out = out.add(&transformed.mul_term(&rest, *c));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// numeric paths
// ---------------------------------------------------------------------------

/// Numeric T for re-samplable data, by quadrature in polar coordinates
/// centered at the target: the polar Jacobian cancels the 1/(ζ-z) pole
/// exactly, leaving a smooth integrand (no singular quadrature).
pub fn solid_numeric_fn<F>(
    h: F,
    disc: &DiscDomain,
    z: Complex64,
    n_rho: usize,
    n_phi: usize,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !disc.contains(z) {
        return Err(Error::Domain(format!(
            "target {z} is not interior to the disc"
        )));
    }
    let d = z - disc.center;
    let (xs, ws) = gauss_legendre(n_rho);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut vals = Vec::with_capacity(n_phi);
    for j in 0..n_phi {
        let phi = dphi * j as f64;
        let dir = Complex64::from_polar(1.0, phi);
        let beta = (d.conj() * dir).re;
        let rmax = -beta + (beta * beta + disc.radius * disc.radius - d.norm_sqr()).sqrt();
        let half = rmax / 2.0;
        let mut acc = Complex64::ZERO;
        for (&x, &w) in xs.iter().zip(&ws) {
            let rho = half * (x + 1.0);
            let value = h(z + rho * dir)?;
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(Error::non_finite(z + rho * dir, "solid transform data"));
            }
            acc += value * (half * w);
        }
        vals.push(acc * dir.conj() * dphi);
    }
    Ok(crate::domains::pairwise_sum(&vals) * Complex64::new(-1.0 / std::f64::consts::PI, 0.0))
}

/// Numeric T for data known only at the grid nodes: singularity subtraction
/// T h(z) = T(h - h(z))(z) + h(z)(z̄ - c̄), with the value h(z) supplied by
/// the caller. Coarser than [`solid_numeric_fn`] (the subtracted integrand
/// keeps a derivative kink across the target radius).
pub fn solid_numeric_sampled(
    samples: &[Complex64],
    grid: &PolarGrid,
    hz: Complex64,
    z: Complex64,
) -> Result<Complex64> {
    if samples.len() != grid.nodes.len() {
        return Err(Error::Config(
            "sample vector does not match the grid".into(),
        ));
    }
    if !grid.disc.contains(z) {
        return Err(Error::Domain(format!(
            "target {z} is not interior to the disc"
        )));
    }
    let mut vals = Vec::with_capacity(samples.len());
    for (&(p, w), &hval) in grid.nodes.iter().zip(samples) {
        let denom = p - z;
        if denom.norm() < 1e-13 {
            // bounded limit; omitting one node costs O(weight)
            continue;
        }
        vals.push((hval - hz) / denom * w);
    }
    let integral = crate::domains::pairwise_sum(&vals);
    // dζ̄∧dζ = 2i dV, so -1/(2πi)·∫ = -1/π·∫ dV
    Ok(integral * Complex64::new(-1.0 / std::f64::consts::PI, 0.0)
        + hz * (z.conj() - grid.disc.center.conj()))
}

/// Numeric S: trapezoid contour sum, with the documented near-boundary flag.
pub fn boundary_numeric_fn<F>(
    h: F,
    disc: &DiscDomain,
    boundary: &[(Complex64, Complex64)],
    z: Complex64,
) -> Result<BoundaryValue>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let ratio = (z - disc.center).norm() / disc.radius;
    if ratio >= 1.0 {
        return Err(Error::Domain(format!(
            "target {z} is not interior to the disc"
        )));
    }
    let mut vals = Vec::with_capacity(boundary.len());
    for &(p, w) in boundary {
        let value = h(p)?;
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::non_finite(p, "boundary data"));
        }
        vals.push(value / (p - z) * w);
    }
    let sum = crate::domains::pairwise_sum(&vals);
    Ok(BoundaryValue {
        value: sum / Complex64::new(0.0, 2.0 * std::f64::consts::PI),
        near_boundary: ratio > S_RADIUS_RATIO,
    })
}

/// ∂_z of the boundary integral, via the kernel derivative
/// 1/(2πi) ∮ h(ζ)/(ζ-z)^2 dζ.
pub fn boundary_numeric_dz<F>(
    h: F,
    boundary: &[(Complex64, Complex64)],
    z: Complex64,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut vals = Vec::with_capacity(boundary.len());
    for &(p, w) in boundary {
        let denom = p - z;
        vals.push(h(p)? / (denom * denom) * w);
    }
    Ok(crate::domains::pairwise_sum(&vals) / Complex64::new(0.0, 2.0 * std::f64::consts::PI))
}

// ---------------------------------------------------------------------------
// dispatching operations (symbolic fast path, numeric fallback)
// ---------------------------------------------------------------------------

fn one_var_point(var: Var, z: Complex64) -> Point {
    Point::new().with(var, z)
}

/// T h(z) for a one-variable expression h in `var` (default: zeta).
/// Polynomial data (with branch powers not involving `var`) take the exact
/// monomial rules; other data fall back to target-centered quadrature.
pub fn solid(h: &CExpr, ev: &CauchyEvaluator, var: Var, z: Complex64) -> Result<Complex64> {
    if !ev.disc.contains(z) {
        return Err(Error::Domain(format!(
            "target {z} is not interior to the disc"
        )));
    }
    if let Ok(p) = normalize(h) {
        if let Ok(transformed) = symbolic_solid(&p, var, &ev.disc) {
            return transformed.eval(&one_var_point(var, z));
        }
    }
    solid_numeric_fn(
        |zeta| h.eval(&one_var_point(var, zeta)),
        &ev.disc,
        z,
        ev.grid.n_r,
        ev.grid.n_theta,
    )
}

/// S h(z) for a one-variable expression h in `var`.
pub fn boundary(h: &CExpr, ev: &CauchyEvaluator, var: Var, z: Complex64) -> Result<BoundaryValue> {
    let ratio = (z - ev.disc.center).norm() / ev.disc.radius;
    if ratio >= 1.0 {
        return Err(Error::Domain(format!(
            "target {z} is not interior to the disc"
        )));
    }
    if let Ok(p) = normalize(h) {
        if let Ok(transformed) = symbolic_boundary(&p, var, &ev.disc) {
            return Ok(BoundaryValue {
                value: transformed.eval(&one_var_point(var, z))?,
                near_boundary: false,
            });
        }
    }
    boundary_numeric_fn(
        |zeta| h.eval(&one_var_point(var, zeta)),
        &ev.disc,
        &ev.boundary,
        z,
    )
}

/// T along the `axis`-th slice of a product domain: the other coordinates of
/// `w` are frozen, and the transform acts in the slice variable.
pub fn slice_solid(
    axis: usize,
    h: &CExpr,
    product: &crate::domains::ProductDomain,
    block: crate::form::CoordBlock,
    w: &[Complex64],
    n_r: usize,
    n_theta: usize,
) -> Result<Complex64> {
    if !product.contains(w) {
        return Err(Error::Domain(format!(
            "point {w:?} is not interior to the product domain"
        )));
    }
    let var = block.var(axis);
    let disc = product.factors[axis - 1];
    if let Ok(p) = normalize(h) {
        if let Ok(transformed) = symbolic_solid(&p, var, &disc) {
            let mut point = Point::new();
            for (i, &zi) in w.iter().enumerate() {
                point.set(block.var(i + 1), zi);
            }
            return transformed.eval(&point);
        }
    }
    let mut frozen = Point::new();
    for (i, &zi) in w.iter().enumerate() {
        if i + 1 != axis {
            frozen.set(block.var(i + 1), zi);
        }
    }
    solid_numeric_fn(
        |zeta| {
            let mut point = frozen;
            point.set(var, zeta);
            h.eval(&point)
        },
        &disc,
        w[axis - 1],
        n_r,
        n_theta,
    )
}

/// S along the `axis`-th slice of a product domain.
pub fn slice_boundary(
    axis: usize,
    h: &CExpr,
    product: &crate::domains::ProductDomain,
    block: crate::form::CoordBlock,
    w: &[Complex64],
    n_theta: usize,
) -> Result<BoundaryValue> {
    if !product.contains(w) {
        return Err(Error::Domain(format!(
            "point {w:?} is not interior to the product domain"
        )));
    }
    let var = block.var(axis);
    let disc = product.factors[axis - 1];
    if let Ok(p) = normalize(h) {
        if let Ok(transformed) = symbolic_boundary(&p, var, &disc) {
            let mut point = Point::new();
            for (i, &zi) in w.iter().enumerate() {
                point.set(block.var(i + 1), zi);
            }
            return Ok(BoundaryValue {
                value: transformed.eval(&point)?,
                near_boundary: false,
            });
        }
    }
    let mut frozen = Point::new();
    for (i, &zi) in w.iter().enumerate() {
        if i + 1 != axis {
            frozen.set(block.var(i + 1), zi);
        }
    }
    let nodes = boundary_nodes(disc, n_theta)?;
    boundary_numeric_fn(
        |zeta| {
            let mut point = frozen;
            point.set(var, zeta);
            h.eval(&point)
        },
        &disc,
        &nodes,
        w[axis - 1],
    )
}

/// Symbolic T for a polynomial one-variable expression, returned as an
/// expression in the same variable. ∂̄(result) = h exactly.
pub fn symbolic_solid_expr(h: &CExpr, var: Var, disc: &DiscDomain) -> Result<CExpr> {
    let p = normalize(h)
        .map_err(|_| Error::Unsupported("symbolic transform needs polynomial data".into()))?;
    Ok(symbolic_solid(&p, var, disc)?.to_expr())
}

/// Residual |S(∂h) - ∂(Sh) - S(v̄² ∂̄h)| at z: an exact identity for the
/// boundary integral on the unit circle, used as a cross-check of the
/// contour machinery. Symbolic when h is polynomial, contour-numeric
/// otherwise (∂(Sh) then uses the kernel-derivative form).
pub fn boundary_derivative_identity(
    h: &CExpr,
    ev: &CauchyEvaluator,
    var: Var,
    z: Complex64,
) -> Result<f64> {
    let dh = h.wirt_d(var, DKind::Holo);
    let dbar_h = h.wirt_d(var, DKind::Anti);
    let vbar2 = CExpr::int_pow(CExpr::conj(CExpr::var(var)), 2);
    let weighted = CExpr::mul(vbar2, dbar_h);
    if let (Ok(ph), Ok(pd), Ok(pw)) = (normalize(h), normalize(&dh), normalize(&weighted)) {
        let lhs = symbolic_boundary(&pd, var, &ev.disc);
        let sh = symbolic_boundary(&ph, var, &ev.disc);
        let rhs2 = symbolic_boundary(&pw, var, &ev.disc);
        if let (Ok(lhs), Ok(sh), Ok(rhs2)) = (lhs, sh, rhs2) {
            let rhs = sh.wirt_d(var, DKind::Holo).add(&rhs2);
            let diff = lhs.sub(&rhs);
            return diff.eval(&one_var_point(var, z)).map(|v| v.norm());
        }
    }
    let lhs = boundary_numeric_fn(
        |zeta| dh.eval(&one_var_point(var, zeta)),
        &ev.disc,
        &ev.boundary,
        z,
    )?
    .value;
    let dsh = boundary_numeric_dz(
        |zeta| h.eval(&one_var_point(var, zeta)),
        &ev.boundary,
        z,
    )?;
    let s_weighted = boundary_numeric_fn(
        |zeta| weighted.eval(&one_var_point(var, zeta)),
        &ev.disc,
        &ev.boundary,
        z,
    )?
    .value;
    Ok((lhs - dsh - s_weighted).norm())
}
