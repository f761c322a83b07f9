//! (0,q) differential forms with expression coefficients, indexed by strictly
//! increasing multi-indices over a fixed coordinate block (z1..zn or w1..wn).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{CExpr, DKind, Point, Var};
use crate::poly::{normalize, Poly};

/// Which coordinate block a form lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordBlock {
    Z,
    W,
}

impl CoordBlock {
    pub fn var(self, axis: usize) -> Var {
        match (self, axis) {
            (CoordBlock::Z, 1) => Var::Z1,
            (CoordBlock::Z, 2) => Var::Z2,
            (CoordBlock::Z, 3) => Var::Z3,
            (CoordBlock::W, 1) => Var::W1,
            (CoordBlock::W, 2) => Var::W2,
            (CoordBlock::W, 3) => Var::W3,
            _ => panic!("axis out of range: {axis}"),
        }
    }
}

/// Strictly increasing multi-index, e.g. (1), (2), (1,2), (1,3).
pub type MultiIndex = Vec<usize>;

/// A (0,q) form Σ f_J dz̄_{j1} ∧ ... ∧ dz̄_{jq} with CExpr coefficients.
#[derive(Debug, Clone)]
pub struct Form {
    pub block: CoordBlock,
    /// Number of coordinates (2 or 3).
    pub n: usize,
    pub degree: usize,
    pub components: BTreeMap<MultiIndex, CExpr>,
}

impl Form {
    pub fn new(block: CoordBlock, n: usize, degree: usize) -> Result<Form> {
        if !(2..=3).contains(&n) {
            return Err(Error::Config(format!("forms support n in {{2,3}}, got {n}")));
        }
        if degree == 0 || degree > n {
            return Err(Error::Config(format!(
                "form degree must be in 1..={n}, got {degree}"
            )));
        }
        Ok(Form {
            block,
            n,
            degree,
            components: BTreeMap::new(),
        })
    }

    /// Sets the coefficient of dz̄_J, validating the multi-index.
    pub fn with_component(mut self, index: &[usize], coeff: CExpr) -> Result<Form> {
        if index.len() != self.degree {
            return Err(Error::Config(format!(
                "multi-index {:?} does not match degree {}",
                index, self.degree
            )));
        }
        if index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "multi-index {index:?} must be strictly increasing"
            )));
        }
        if index.iter().any(|&j| j == 0 || j > self.n) {
            return Err(Error::Config(format!(
                "multi-index {:?} out of range 1..={}",
                index, self.n
            )));
        }
        self.components.insert(index.to_vec(), coeff);
        Ok(self)
    }

    /// Convenience for (0,1) forms on n=2: f1 dz̄1 + f2 dz̄2.
    pub fn form01(block: CoordBlock, f1: CExpr, f2: CExpr) -> Form {
        Form::new(block, 2, 1)
            .unwrap()
            .with_component(&[1], f1)
            .unwrap()
            .with_component(&[2], f2)
            .unwrap()
    }

    pub fn component(&self, index: &[usize]) -> CExpr {
        self.components
            .get(index)
            .cloned()
            .unwrap_or_else(CExpr::zero)
    }

    pub fn component_poly(&self, index: &[usize]) -> Result<Poly> {
        normalize(&self.component(index))
    }

    /// Keeps the components whose first index is `axis`, dropping that index;
    /// the projection sending Σ f_{k,J'} dz̄_k∧dz̄_{J'} to Σ f_{k,J'} dz̄_{J'}.
    pub fn project_axis(&self, axis: usize) -> ProjectedForm {
        let mut components = BTreeMap::new();
        for (idx, coeff) in &self.components {
            if idx[0] == axis {
                components.insert(idx[1..].to_vec(), coeff.clone());
            }
        }
        ProjectedForm {
            block: self.block,
            n: self.n,
            degree: self.degree - 1,
            components,
        }
    }

    /// All residual coefficients of ∂̄f, one per strictly increasing
    /// (q+1)-multi-index: Σ_m (-1)^{pos} ∂̄_{j_m} f_{J∖j_m}.
    pub fn dbar_residuals(&self) -> Vec<(MultiIndex, CExpr)> {
        if self.degree >= self.n {
            return Vec::new();
        }
        let indices = increasing_indices(self.n, self.degree + 1);
        let mut out = Vec::new();
        for idx in indices {
            let mut terms = Vec::new();
            for (pos, &j) in idx.iter().enumerate() {
                let mut rest = idx.clone();
                rest.remove(pos);
                let coeff = self.component(&rest);
                if coeff.is_zero_const() {
                    continue;
                }
                let d = coeff.wirt_d(self.block.var(j), DKind::Anti);
                let signed = if pos % 2 == 0 { d } else { CExpr::neg(d) };
                terms.push(signed);
            }
            out.push((idx, CExpr::sum(terms)));
        }
        out
    }

    /// The (0,q+1) form ∂̄f.
    pub fn dbar_form(&self) -> Result<Form> {
        let mut out = Form::new(self.block, self.n, self.degree + 1)?;
        for (idx, coeff) in self.dbar_residuals() {
            out = out.with_component(&idx, coeff)?;
        }
        Ok(out)
    }

    /// Closedness check: symbolic fast path (each residual normalizes to 0),
    /// otherwise the max residual modulus over the sample points.
    pub fn dbar_closed_check(&self, samples: &[Point], tol: f64) -> Result<ClosednessReport> {
        let residuals = self.dbar_residuals();
        let mut symbolic_ok = true;
        for (_, r) in &residuals {
            match normalize(r) {
                Ok(p) if p.max_coeff_norm() <= 1e-12 => {}
                _ => {
                    symbolic_ok = false;
                    break;
                }
            }
        }
        if symbolic_ok {
            return Ok(ClosednessReport {
                exact: true,
                max_residual: 0.0,
                worst_point: None,
                closed: true,
            });
        }
        let mut max_residual = 0.0f64;
        let mut worst_point = None;
        for point in samples {
            for (_, r) in &residuals {
                let v = r.eval(point)?.norm();
                if v > max_residual {
                    max_residual = v;
                    worst_point = Some(*point);
                }
            }
        }
        Ok(ClosednessReport {
            exact: false,
            max_residual,
            worst_point,
            closed: max_residual <= tol,
        })
    }

    /// Componentwise map.
    pub fn map<F: Fn(&CExpr) -> CExpr>(&self, f: F) -> Form {
        let mut out = self.clone();
        for coeff in out.components.values_mut() {
            *coeff = f(coeff);
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        let mut out = self.clone();
        for (idx, coeff) in &other.components {
            let cur = out.component(idx);
            out.components
                .insert(idx.clone(), CExpr::sub(cur, coeff.clone()));
        }
        out
    }

    pub fn eval_component(&self, index: &[usize], point: &Point) -> Result<Complex64> {
        self.component(index).eval(point)
    }
}

/// Result of projecting a (0,q) form along one axis: a (0,q-1) object whose
/// components keep the original block and size. Degree 0 means a function.
#[derive(Debug, Clone)]
pub struct ProjectedForm {
    pub block: CoordBlock,
    pub n: usize,
    pub degree: usize,
    pub components: BTreeMap<MultiIndex, CExpr>,
}

impl ProjectedForm {
    /// The unique coefficient of a degree-0 projection.
    pub fn scalar(&self) -> CExpr {
        assert_eq!(self.degree, 0);
        self.components
            .get(&Vec::new())
            .cloned()
            .unwrap_or_else(CExpr::zero)
    }

    pub fn component(&self, index: &[usize]) -> CExpr {
        self.components
            .get(index)
            .cloned()
            .unwrap_or_else(CExpr::zero)
    }
}

#[derive(Debug, Clone)]
pub struct ClosednessReport {
    /// True when every residual normalized to zero symbolically.
    pub exact: bool,
    pub max_residual: f64,
    pub worst_point: Option<Point>,
    pub closed: bool,
}

/// All strictly increasing multi-indices of length q over 1..=n.
pub fn increasing_indices(n: usize, q: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, q: usize, current: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if current.len() == q {
            out.push(current.clone());
            return;
        }
        for j in start..=n {
            current.push(j);
            rec(j + 1, n, q, current, out);
            current.pop();
        }
    }
    rec(1, n, q, &mut current, &mut out);
    out
}
