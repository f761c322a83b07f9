//! The solution operator for ∂̄ on products of discs:
//!   u = T₁π₁f + T₂S₁π₂f + ... + T_n S₁...S_{n-1} π_n f,
//! with an exact symbolic route for polynomial data (branch powers allowed
//! as long as they avoid the transformed slice) and a nested-quadrature
//! numeric route otherwise. Includes the operator-norm ratio study, the
//! slice-transform optimality witness, and the weighted no-gain example.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::battery::random_point;
use crate::cauchy::{
    boundary_numeric_fn, slice_solid, solid_numeric_fn, symbolic_boundary, symbolic_solid,
};
use crate::domains::{
    annulus_arcs_about_one, boundary_nodes, build_polar_grid, graded_annulus_rule, ProductDomain,
};
use crate::error::{Error, Result};
use crate::expr::{CExpr, DKind, Point, Var};
use crate::fit::{last_relative_change, linear_fit, LineFit};
use crate::form::{CoordBlock, Form, MultiIndex};
use crate::poly::{modulus_poly, normalize, Poly};
use crate::weights::{
    ap_star_lower_bound, default_disc_family, derivative_multidegrees, mixed_partial,
    sobolev_norm_form, tensor_g_integral_nodes, ApConfig, GridSpec, NormDomain, WeightSpec,
};

/// One term T_j S_1 ... S_{j-1} applied to a component of π_j f.
#[derive(Debug, Clone)]
pub enum SolutionTerm {
    Symbolic(Poly),
    /// Data that escaped the symbolic route; evaluated by nested quadrature.
    Numeric {
        t_axis: usize,
        s_axes: Vec<usize>,
        data: CExpr,
    },
}

#[derive(Debug, Clone, Default)]
pub struct SolutionComponent {
    pub terms: Vec<SolutionTerm>,
}

impl SolutionComponent {
    pub fn symbolic_poly(&self) -> Option<Poly> {
        let mut acc = Poly::zero();
        for t in &self.terms {
            match t {
                SolutionTerm::Symbolic(p) => acc = acc.add(p),
                SolutionTerm::Numeric { .. } => return None,
            }
        }
        Some(acc)
    }
}

/// Value of a solution evaluation together with the accuracy flag raised
/// when a boundary integral was taken too near its circle.
#[derive(Debug, Clone, Copy)]
pub struct EvalOutcome {
    pub value: Complex64,
    pub near_boundary: bool,
}

/// Solution of ∂̄u = f on a product domain: a (0, q-1) form (a function for
/// q = 1) whose components carry their term list.
#[derive(Debug, Clone)]
pub struct ProductSolution {
    pub product: ProductDomain,
    pub block: CoordBlock,
    pub degree_out: usize,
    pub components: BTreeMap<MultiIndex, SolutionComponent>,
}

impl ProductSolution {
    pub fn is_symbolic(&self) -> bool {
        self.components
            .values()
            .all(|c| c.symbolic_poly().is_some())
    }

    /// The solution as an expression (degree q = 1 input) when the whole
    /// pipeline stayed symbolic. An absent component is the zero solution.
    pub fn as_expr(&self) -> Option<CExpr> {
        if self.degree_out != 0 {
            return None;
        }
        match self.components.get(&Vec::new()) {
            None => Some(CExpr::zero()),
            Some(c) => c.symbolic_poly().map(|p| p.to_expr()),
        }
    }

    /// The solution as a (0, q-1) form when symbolic and q >= 2.
    pub fn as_form(&self) -> Option<Form> {
        if self.degree_out == 0 {
            return None;
        }
        let mut form = Form::new(self.block, self.product.n(), self.degree_out).ok()?;
        for (idx, comp) in &self.components {
            let p = comp.symbolic_poly()?;
            form = form.with_component(idx, p.to_expr()).ok()?;
        }
        Some(form)
    }

    /// Evaluate one component at an interior point.
    pub fn eval(&self, index: &[usize], w: &[Complex64], grid: &GridSpec) -> Result<EvalOutcome> {
        if !self.product.contains(w) {
            return Err(Error::Domain(format!(
                "point {w:?} is not interior to the product domain"
            )));
        }
        let comp = match self.components.get(index) {
            Some(c) => c,
            None => {
                return Ok(EvalOutcome {
                    value: Complex64::ZERO,
                    near_boundary: false,
                })
            }
        };
        let mut acc = Complex64::ZERO;
        let mut near = false;
        for term in &comp.terms {
            match term {
                SolutionTerm::Symbolic(p) => {
                    let mut point = Point::new();
                    for (i, &zi) in w.iter().enumerate() {
                        point.set(self.block.var(i + 1), zi);
                    }
                    acc += p.eval(&point)?;
                }
                SolutionTerm::Numeric {
                    t_axis,
                    s_axes,
                    data,
                } => {
                    let outcome = self.eval_numeric_term(*t_axis, s_axes, data, w, grid)?;
                    acc += outcome.value;
                    near |= outcome.near_boundary;
                }
            }
        }
        Ok(EvalOutcome {
            value: acc,
            near_boundary: near,
        })
    }

    fn eval_numeric_term(
        &self,
        t_axis: usize,
        s_axes: &[usize],
        data: &CExpr,
        w: &[Complex64],
        grid: &GridSpec,
    ) -> Result<EvalOutcome> {
        // T_{t_axis}( S_{s1}( S_{s2}( ... data ) ) ) evaluated at w
        let near = std::cell::Cell::new(false);
        let value = self.chain_value(&near, t_axis, s_axes, data, w, grid)?;
        Ok(EvalOutcome {
            value,
            near_boundary: near.get(),
        })
    }

    fn chain_value(
        &self,
        near: &std::cell::Cell<bool>,
        t_axis: usize,
        s_axes: &[usize],
        data: &CExpr,
        w: &[Complex64],
        grid: &GridSpec,
    ) -> Result<Complex64> {
        let disc = self.product.factors[t_axis - 1];
        let inner = |zeta: Complex64| -> Result<Complex64> {
            let mut point = w.to_vec();
            point[t_axis - 1] = zeta;
            self.s_chain_value(near, s_axes, data, &point, grid)
        };
        solid_numeric_fn(inner, &disc, w[t_axis - 1], grid.n_r, grid.n_theta)
    }

    fn s_chain_value(
        &self,
        near: &std::cell::Cell<bool>,
        s_axes: &[usize],
        data: &CExpr,
        w: &[Complex64],
        grid: &GridSpec,
    ) -> Result<Complex64> {
        match s_axes.split_first() {
            None => {
                let mut point = Point::new();
                for (i, &zi) in w.iter().enumerate() {
                    point.set(self.block.var(i + 1), zi);
                }
                data.eval(&point)
            }
            Some((&axis, rest)) => {
                let disc = self.product.factors[axis - 1];
                let nodes = boundary_nodes(disc, grid.n_theta)?;
                let value = boundary_numeric_fn(
                    |zeta| {
                        let mut point = w.to_vec();
                        point[axis - 1] = zeta;
                        self.s_chain_value(near, rest, data, &point, grid)
                    },
                    &disc,
                    &nodes,
                    w[axis - 1],
                )?;
                if value.near_boundary {
                    near.set(true);
                }
                Ok(value.value)
            }
        }
    }
}

/// Solve ∂̄u = f on the product domain. The input must pass the closedness
/// check (symbolically, or within `tol` on seeded interior samples).
pub fn solve_product(f: &Form, product: &ProductDomain, tol: f64, seed: u64) -> Result<ProductSolution> {
    let n = product.n();
    if f.n != n {
        return Err(Error::Config(format!(
            "form lives on n={} but the product has {} factors",
            f.n, n
        )));
    }
    let q = f.degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Point> = (0..40)
        .map(|_| random_point(&mut rng, f.block, n, 0.85))
        .collect();
    let report = f.dbar_closed_check(&samples, tol)?;
    if !report.closed {
        return Err(Error::Hypothesis(format!(
            "form is not dbar-closed: max residual {:.3e} at sampled interior points",
            report.max_residual
        )));
    }

    let mut components: BTreeMap<MultiIndex, SolutionComponent> = BTreeMap::new();
    for j in 1..=n {
        let projected = f.project_axis(j);
        if projected.components.is_empty() {
            continue;
        }
        let s_axes: Vec<usize> = (1..j).collect();
        for (idx, coeff) in &projected.components {
            if coeff.is_zero_const() {
                continue;
            }
            let term = build_term(coeff, j, &s_axes, product, f.block)?;
            components.entry(idx.clone()).or_default().terms.push(term);
        }
    }
    Ok(ProductSolution {
        product: product.clone(),
        block: f.block,
        degree_out: q - 1,
        components,
    })
}

/// Try the exact route T_j S_1 ... S_{j-1} g; fall back to a numeric term.
fn build_term(
    g: &CExpr,
    t_axis: usize,
    s_axes: &[usize],
    product: &ProductDomain,
    block: CoordBlock,
) -> Result<SolutionTerm> {
    let symbolic = (|| -> Result<Poly> {
        let mut p = normalize(g)?;
        // innermost boundary integral first
        for &axis in s_axes.iter().rev() {
            p = symbolic_boundary(&p, block.var(axis), &product.factors[axis - 1])?;
        }
        symbolic_solid(&p, block.var(t_axis), &product.factors[t_axis - 1])
    })();
    match symbolic {
        Ok(p) => Ok(SolutionTerm::Symbolic(p)),
        Err(_) => Ok(SolutionTerm::Numeric {
            t_axis,
            s_axes: s_axes.to_vec(),
            data: g.clone(),
        }),
    }
}

/// Symbolic residual ∂̄u - f; zero (to coefficient tolerance) certifies the
/// solution exactly.
pub fn solution_residual(solution: &ProductSolution, f: &Form) -> Result<f64> {
    let n = solution.product.n();
    let q = f.degree;
    let mut worst = 0.0f64;
    if solution.degree_out == 0 {
        let u = solution
            .components
            .get(&Vec::new())
            .and_then(|c| c.symbolic_poly())
            .ok_or_else(|| Error::Unsupported("residual check needs a symbolic solution".into()))?;
        for axis in 1..=n {
            let d = u.wirt_d(f.block.var(axis), DKind::Anti);
            let expected = normalize(&f.component(&[axis]))?;
            worst = worst.max(d.sub(&expected).max_coeff_norm());
        }
        return Ok(worst);
    }
    // degree_out >= 1: ∂̄ of the solution form must reproduce f
    let uform = solution
        .as_form()
        .ok_or_else(|| Error::Unsupported("residual check needs a symbolic solution".into()))?;
    let dbar = uform.dbar_form()?;
    for idx in crate::form::increasing_indices(n, q) {
        let got = normalize(&dbar.component(&idx))?;
        let expected = normalize(&f.component(&idx))?;
        worst = worst.max(got.sub(&expected).max_coeff_norm());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// operator-norm ratio study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub label: String,
    pub solution_norm: f64,
    pub data_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioStudy {
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
    pub k: usize,
    pub p: f64,
    pub weight: String,
}

/// ‖u‖_{W^{k,p}(Ω,μ)} / ‖f‖_{W^{k+n-2,p}(Ω,μ)} for each closed form of a
/// family on the bidisc (n = 2). The weight must pass the slice-uniform
/// Muckenhoupt check.
pub fn norm_ratio_study(
    family: &[Form],
    k: usize,
    p: f64,
    weight: &WeightSpec,
    grid: &GridSpec,
    seed: u64,
) -> Result<RatioStudy> {
    let product = ProductDomain::bidisc();
    let block = family
        .first()
        .map(|f| f.block)
        .ok_or_else(|| Error::Config("empty family".into()))?;
    let ap_family = default_disc_family(&weight.singular_points, 8, seed);
    let ap = ap_star_lower_bound(weight, block, p, 6, &ap_family, seed, &ApConfig::default())?;
    if ap.divergent {
        return Err(Error::Hypothesis(format!(
            "weight {} fails the slice-uniform Muckenhoupt check at p = {p} \
             (sampled constant {:.3e} still growing under refinement)",
            weight.label, ap.value
        )));
    }
    let domain = NormDomain::unit_bidisc(block);
    let rows: Vec<Result<RatioRow>> = family
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let solution = solve_product(f, &product, 1e-9, seed)?;
            let sol_norm = match solution.degree_out {
                0 => {
                    let u = solution.as_expr().ok_or_else(|| {
                        Error::Unsupported("ratio study needs symbolic solutions".into())
                    })?;
                    crate::weights::sobolev_norm(&u, &domain, k, p, weight, grid)?
                }
                _ => {
                    let uform = solution.as_form().ok_or_else(|| {
                        Error::Unsupported("ratio study needs symbolic solutions".into())
                    })?;
                    sobolev_norm_form(&uform, &domain, k, p, weight, grid)?
                }
            };
            let data_norm = sobolev_norm_form(f, &domain, k, p, weight, grid)?;
            Ok(RatioRow {
                label: format!("member_{i}"),
                solution_norm: sol_norm.total,
                data_norm: data_norm.total,
                ratio: sol_norm.total / data_norm.total,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(RatioStudy {
        rows,
        max_ratio,
        k,
        p,
        weight: weight.label.clone(),
    })
}

// ---------------------------------------------------------------------------
// optimality witness for the slice transform
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityWitness {
    pub symbolic_identity: bool,
    /// (δ, ∫|∇^k T₁h|^p over the δ-annulus product).
    pub energies: Vec<(f64, f64)>,
    pub fit_vs_log: LineFit,
    /// Energies for the halved exponent, which must converge.
    pub half_exponent_energies: Vec<(f64, f64)>,
    pub half_exponent_change: f64,
}

/// h = |w2|^{k-2/p} on the bidisc: the slice transform gives exactly
/// w̄1·|w2|^{k-2/p}, whose k-th derivative energy diverges logarithmically
/// as the annulus reaches the singular axis, while the half-exponent energy
/// converges. The divergence witnesses that no index improvement is
/// possible.
pub fn t1_optimality_witness(
    k: usize,
    p: f64,
    deltas: &[f64],
    grid: &GridSpec,
) -> Result<OptimalityWitness> {
    if !(p > 2.0) {
        return Err(Error::Hypothesis(format!(
            "the witness needs p > 2 (so the data exponent k - 2/p exceeds k - 1), got {p}"
        )));
    }
    let exponent = k as f64 - 2.0 / p;
    let h = CExpr::abs_pow(CExpr::var(Var::W2), exponent);
    let product = ProductDomain::bidisc();
    let w = [Complex64::new(0.3, 0.1), Complex64::new(0.2, -0.4)];
    // symbolic: T₁h = w̄1 · h
    let hp = normalize(&h)?;
    let transformed = symbolic_solid(&hp, Var::W1, &product.factors[0])?;
    let expected = normalize(&CExpr::mul(CExpr::conj(CExpr::var(Var::W1)), h.clone()))?;
    let symbolic_identity = transformed.sub(&expected).max_coeff_norm() < 1e-12;
    // cross-check one numeric slice evaluation
    let numeric = slice_solid(1, &h, &product, CoordBlock::W, &w, grid.n_r, grid.n_theta)?;
    let mut point = Point::new();
    point.set(Var::W1, w[0]);
    point.set(Var::W2, w[1]);
    let sym_val = transformed.eval(&point)?;
    if (numeric - sym_val).norm() > 1e-8 {
        return Err(Error::Unsupported(format!(
            "slice transform disagreement: {numeric} vs {sym_val}"
        )));
    }

    // |∇^k (w̄1 |w2|^s)|^p over △ × (annulus δ < |w2| < 1); the integrand
    // is low-degree in w1 and radial in w2, so modest factor rules suffice
    let dirs = crate::weights::block_dirs(CoordBlock::W);
    let mut words = Vec::new();
    for (degs, mult) in derivative_multidegrees(4, k) {
        words.push((mixed_partial(&transformed, &dirs, &degs), mult));
    }
    let g1 = build_polar_grid(product.factors[0], 16, 32)?;
    let energy = |delta: f64, exponent_p: f64| -> Result<f64> {
        let annulus = graded_annulus_rule(Complex64::ZERO, delta, 1.0, 6, 12, 32);
        tensor_g_integral_nodes(
            &g1.nodes,
            &annulus,
            Var::W1,
            Var::W2,
            &words,
            exponent_p / 2.0,
            &Poly::one(),
        )
    };
    let mut energies = Vec::new();
    for &d in deltas {
        energies.push((d, energy(d, p)?));
    }
    let xs: Vec<f64> = energies.iter().map(|(d, _)| (1.0 / d).ln()).collect();
    let ys: Vec<f64> = energies.iter().map(|(_, e)| *e).collect();
    let fit_vs_log = linear_fit(&xs, &ys);
    let mut half = Vec::new();
    for &d in deltas {
        half.push((d, energy(d, p / 2.0)?));
    }
    let half_vals: Vec<f64> = half.iter().map(|(_, e)| *e).collect();
    let half_exponent_change = last_relative_change(&half_vals);
    Ok(OptimalityWitness {
        symbolic_identity,
        energies,
        fit_vs_log,
        half_exponent_energies: half,
        half_exponent_change,
    })
}

// ---------------------------------------------------------------------------
// circle averages and the weighted no-gain example
// ---------------------------------------------------------------------------

/// ∮_{|v1|=r} u dv1 as a list of (power of r, coefficient polynomial in the
/// remaining variables): for a monomial v1^a v̄1^b g, the contour integral
/// is 2πi r^{2a+2} g when b = a+1 and 0 otherwise.
pub fn circle_average(u: &Poly, v1: Var) -> Result<Vec<(i32, Poly)>> {
    let mut by_power: BTreeMap<i32, Poly> = BTreeMap::new();
    let hs = crate::poly::slot(v1, DKind::Holo);
    let as_ = crate::poly::slot(v1, DKind::Anti);
    for (m, c) in &u.terms {
        if m.atoms.iter().any(|a| a.def.base.mentions(v1)) {
            return Err(Error::Unsupported(
                "circle average needs polynomial dependence on the contour variable".into(),
            ));
        }
        let a = m.exps[hs] as i32;
        let b = m.exps[as_] as i32;
        if b != a + 1 {
            continue;
        }
        let mut rest = m.clone();
        rest.exps[hs] = 0;
        rest.exps[as_] = 0;
        let coeff = c * Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let entry = by_power.entry(2 * a + 2).or_insert_with(Poly::zero);
        *entry = entry.add(&Poly::from_term(rest, coeff));
    }
    Ok(by_power.into_iter().collect())
}

pub fn eval_circle_average(
    avg: &[(i32, Poly)],
    r: f64,
    point: &Point,
) -> Result<Complex64> {
    let mut acc = Complex64::ZERO;
    for (pow, coeff) in avg {
        acc += coeff.eval(point)? * r.powi(*pow);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedExampleReport {
    /// max |contour v-derivative - closed form| over the sample points.
    pub formula_residual: f64,
    /// (δ, weighted energy of ∂^k v at exponent p+ε).
    pub energies: Vec<(f64, f64)>,
    /// log-log fit of the raw energies (biased low by the convergent bulk).
    pub loglog_fit: LineFit,
    /// log-log fit of the shell increments E(δ_{i+1}) - E(δ_i), which carry
    /// the pure power law; its slope estimates the divergence exponent.
    pub increment_fit: LineFit,
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
}

/// The no-gain example on the bidisc: data (z2-1)^{k-s} dz̄1 with weight
/// |z2-1|^{s(p-1)}. The circle average v of the produced solution has
/// ∂^k_{z2} v = 2(k-s)···(1-s)·π r² i (z2-1)^{-s}, and its weighted
/// L^{p+ε} energy outside a δ-ball at z2=1 scales like δ^{2-s(1+ε)}.
pub fn weighted_no_gain_example(
    k: usize,
    p: f64,
    eps: f64,
    s: f64,
    deltas: &[f64],
    grid: &GridSpec,
    seed: u64,
) -> Result<WeightedExampleReport> {
    if !(s > 2.0 / (1.0 + eps) && s < 2.0 && (s - 1.0).abs() > 1e-9) {
        return Err(Error::Hypothesis(format!(
            "the example needs s in (2/(1+ε), 2) minus {{1}}, got s = {s}"
        )));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let datum = CExpr::branch_pow(
        CExpr::sub(CExpr::var(Var::Z2), CExpr::one()),
        k as f64 - s,
        half_pi,
        3.0 * half_pi,
    )?;
    let f = Form::form01(CoordBlock::Z, datum, CExpr::zero());
    let product = ProductDomain::bidisc();
    let solution = solve_product(&f, &product, 1e-9, seed)?;
    let u = solution
        .components
        .get(&Vec::new())
        .and_then(|c| c.symbolic_poly())
        .ok_or_else(|| Error::Unsupported("expected a symbolic solution".into()))?;

    // ∂^k_{z2} u, then its circle average over |z1| = r
    let mut du = u.clone();
    for _ in 0..k {
        du = du.wirt_d(Var::Z2, DKind::Holo);
    }
    let avg = circle_average(&du, Var::Z1)?;

    // closed form: 2(k-s)···(1-s) π r² i (z2-1)^{-s}
    let mut falling = 1.0;
    for j in 1..=k {
        falling *= j as f64 - s;
    }
    let closed = |r: f64, z2: Complex64| -> Result<Complex64> {
        let base = CExpr::branch_pow(
            CExpr::sub(CExpr::var(Var::Z2), CExpr::one()),
            -s,
            half_pi,
            3.0 * half_pi,
        )?;
        let v = base.eval(&Point::new().with(Var::Z2, z2))?;
        Ok(Complex64::new(0.0, 2.0 * falling * std::f64::consts::PI * r * r) * v)
    };

    // formula check, both from the symbolic average and from raw contour
    // quadrature of ∂^k_{z2} u
    let mut formula_residual = 0.0f64;
    let samples = [
        (0.3, Complex64::new(0.2, 0.4)),
        (0.5, Complex64::new(-0.3, 0.1)),
        (0.7, Complex64::new(0.1, -0.6)),
    ];
    for &(r, z2) in &samples {
        let point = Point::new().with(Var::Z2, z2);
        let via_avg = eval_circle_average(&avg, r, &point)?;
        let nodes = boundary_nodes(
            crate::domains::DiscDomain {
                center: Complex64::ZERO,
                radius: r,
            },
            grid.n_theta,
        )?;
        let via_contour = crate::domains::contour_integral(&nodes, |z1| {
            du.eval(&Point::new().with(Var::Z1, z1).with(Var::Z2, z2))
        })?;
        let reference = closed(r, z2)?;
        formula_residual = formula_residual
            .max((via_avg - reference).norm())
            .max((via_contour - reference).norm());
    }

    // E(δ) = ∫_0^1 ∫_{△ \ B(1,δ)} |∂^k v|^{p+ε} μ dV dr with μ = |z2-1|^{s(p-1)}
    let pe = p + eps;
    let mu = modulus_poly(
        normalize(&CExpr::sub(CExpr::var(Var::Z2), CExpr::one()))?,
        s * (p - 1.0),
    )?;
    let (r_nodes, r_weights) = crate::domains::gauss_legendre(24);
    let energies: Vec<Result<(f64, f64)>> = deltas
        .par_iter()
        .map(|&delta| {
            let rule = annulus_arcs_about_one(delta, 2.0, 0.0, 1.0, 8, 12, 24);
            let mut total = 0.0f64;
            for (&x, &wr) in r_nodes.iter().zip(&r_weights) {
                let r = (x + 1.0) / 2.0;
                let wr = wr / 2.0;
                let mut vals = Vec::with_capacity(rule.len());
                for &(z2, wz) in &rule {
                    let point = Point::new().with(Var::Z2, z2);
                    let v = eval_circle_average(&avg, r, &point)?;
                    let weight = mu.eval(&point)?.re.max(0.0);
                    vals.push(v.norm().powf(pe) * weight * wz * wr);
                }
                total += crate::domains::pairwise_sum_f64(&vals);
            }
            Ok((delta, total))
        })
        .collect();
    let energies = energies.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = energies.iter().map(|(d, _)| d.ln()).collect();
    let ys: Vec<f64> = energies.iter().map(|(_, e)| e.ln()).collect();
    let loglog_fit = linear_fit(&xs, &ys);
    // E(δ) = A + C δ^γ: the additive bulk A cancels in the increments,
    // E(δ_{i+1}) - E(δ_i) = C δ_{i+1}^γ (1 - (δ_i/δ_{i+1})^γ), an exact
    // power law when the schedule has a fixed decade step
    let mut inc_x = Vec::new();
    let mut inc_y = Vec::new();
    for w in energies.windows(2) {
        let de = w[1].1 - w[0].1;
        if de > 0.0 {
            inc_x.push(w[1].0.ln());
            inc_y.push(de.ln());
        }
    }
    if inc_x.len() < 2 {
        return Err(Error::Config(
            "the δ schedule is too coarse for an increment fit".into(),
        ));
    }
    let increment_fit = linear_fit(&inc_x, &inc_y);
    Ok(WeightedExampleReport {
        formula_residual,
        energies,
        loglog_fit,
        fitted_exponent: increment_fit.slope,
        increment_fit,
        expected_exponent: 2.0 - s * (1.0 + eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::closed_form_battery;
    use crate::parse::parse;

    fn wbar(i: usize) -> CExpr {
        CExpr::conj(CExpr::var(CoordBlock::W.var(i)))
    }

    #[test]
    fn constant_data_solves_to_conjugate() {
        // f = dw̄1 -> u = w̄1
        let f = Form::form01(CoordBlock::W, CExpr::one(), CExpr::zero());
        let sol = solve_product(&f, &ProductDomain::bidisc(), 1e-9, 1).unwrap();
        let u = sol.as_expr().unwrap();
        assert!(crate::poly::exprs_equal(&u, &wbar(1), 1e-13).unwrap());
    }

    #[test]
    fn symmetric_data_solves_to_product() {
        // f = w̄2 dw̄1 + w̄1 dw̄2 -> u = w̄1 w̄2 (the S-term dies)
        let f = Form::form01(CoordBlock::W, wbar(2), wbar(1));
        let sol = solve_product(&f, &ProductDomain::bidisc(), 1e-9, 1).unwrap();
        let u = sol.as_expr().unwrap();
        let expected = CExpr::mul(wbar(1), wbar(2));
        assert!(crate::poly::exprs_equal(&u, &expected, 1e-13).unwrap());
    }

    #[test]
    fn top_degree_solves_componentwise() {
        // f = dw̄1∧dw̄2 -> u = w̄1 dw̄2
        let f = Form::new(CoordBlock::W, 2, 2)
            .unwrap()
            .with_component(&[1, 2], CExpr::one())
            .unwrap();
        let sol = solve_product(&f, &ProductDomain::bidisc(), 1e-9, 1).unwrap();
        let uform = sol.as_form().unwrap();
        assert!(crate::poly::exprs_equal(&uform.component(&[2]), &wbar(1), 1e-13).unwrap());
        assert!(normalize(&uform.component(&[1])).unwrap().is_zero());
        assert!(solution_residual(&sol, &f).unwrap() < 1e-13);
    }

    #[test]
    fn non_closed_data_is_rejected_with_residual() {
        let f = Form::form01(CoordBlock::W, wbar(2), CExpr::zero());
        let err = solve_product(&f, &ProductDomain::bidisc(), 1e-9, 1).unwrap_err();
        match err {
            Error::Hypothesis(msg) => assert!(msg.contains("dbar-closed"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn battery_solutions_are_exact() {
        for (n, q, count) in [(2usize, 1usize, 10usize), (2, 2, 3), (3, 1, 3), (3, 2, 3)] {
            let product = if n == 2 {
                ProductDomain::bidisc()
            } else {
                ProductDomain::tridisc()
            };
            for (i, f) in closed_form_battery(CoordBlock::W, n, q, count, 2026)
                .iter()
                .enumerate()
            {
                let sol = solve_product(f, &product, 1e-9, 7).unwrap();
                let residual = solution_residual(&sol, f).unwrap();
                assert!(residual < 1e-10, "n={n} q={q} member {i}: {residual}");
            }
        }
    }

    #[test]
    fn numeric_route_matches_finite_differences() {
        // data with a branch power in w2 (smooth on the closed bidisc):
        // f = ∂̄(w̄2 (w2-3)^0.7) = (w2-3)^0.7 dw̄2, not symbolic along slice 2
        let pow = parse("pow(w2-3, 0.7, 0, 2*pi)").unwrap();
        let f = Form::form01(CoordBlock::W, CExpr::zero(), pow);
        let product = ProductDomain::bidisc();
        let sol = solve_product(&f, &product, 1e-9, 3).unwrap();
        assert!(!sol.is_symbolic());
        let grid = GridSpec::new(48, 96);
        let h = 1e-5;
        let w = [Complex64::new(0.25, 0.15), Complex64::new(-0.3, 0.2)];
        let eval_at = |w2: Complex64| {
            sol.eval(&[], &[w[0], w2], &grid).unwrap().value
        };
        let fd = ((eval_at(w[1] + h) - eval_at(w[1] - h))
            + Complex64::new(0.0, 1.0)
                * (eval_at(w[1] + Complex64::new(0.0, h)) - eval_at(w[1] - Complex64::new(0.0, h))))
            / (4.0 * h);
        let point = Point::new().with(Var::W1, w[0]).with(Var::W2, w[1]);
        let expected = f.component(&[2]).eval(&point).unwrap();
        assert!(
            (fd - expected).norm() < 1e-4,
            "fd residual {}",
            (fd - expected).norm()
        );
    }

    #[test]
    fn ratio_study_is_scale_invariant_and_finite() {
        let family: Vec<Form> = [1.0, 2.5, -4.0]
            .iter()
            .map(|&c| Form::form01(CoordBlock::W, CExpr::real(c), CExpr::zero()))
            .collect();
        let study = norm_ratio_study(
            &family,
            1,
            5.0,
            &WeightSpec::unit(),
            &GridSpec::new(12, 24),
            5,
        )
        .unwrap();
        let r0 = study.rows[0].ratio;
        for row in &study.rows {
            assert!((row.ratio - r0).abs() < 1e-10, "{} vs {r0}", row.ratio);
            assert!(row.ratio.is_finite());
        }
    }

    #[test]
    fn weighted_study_rejects_divergent_weight() {
        let family = vec![Form::form01(CoordBlock::W, CExpr::one(), CExpr::zero())];
        let mu = WeightSpec::new(parse("abs(w2)^2").unwrap(), "|w2|^2")
            .with_singular_points(vec![Complex64::ZERO]);
        // p = 2 is exactly where the slice weight fails the check
        let err = norm_ratio_study(&family, 1, 2.0, &mu, &GridSpec::new(8, 16), 5).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)));
    }
}
