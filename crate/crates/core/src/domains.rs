//! Geometric domains (discs, products of discs, the Hartogs triangle) and
//! the quadrature rules used everywhere else: Gauss–Legendre × trapezoid
//! polar grids on discs, spectrally accurate boundary (contour) rules, and
//! graded radial rules for integrands with a power singularity.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// An open disc { |z - center| < radius }.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscDomain {
    pub center: Complex64,
    pub radius: f64,
}

impl DiscDomain {
    pub fn new(center: Complex64, radius: f64) -> Result<DiscDomain> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(DiscDomain { center, radius })
    }

    pub fn unit() -> DiscDomain {
        DiscDomain {
            center: Complex64::ZERO,
            radius: 1.0,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// A product of 2 or 3 planar discs.
#[derive(Debug, Clone)]
pub struct ProductDomain {
    pub factors: Vec<DiscDomain>,
}

impl ProductDomain {
    pub fn new(factors: Vec<DiscDomain>) -> Result<ProductDomain> {
        if !(2..=3).contains(&factors.len()) {
            return Err(Error::Config(format!(
                "product domain supports 2 or 3 factors, got {}",
                factors.len()
            )));
        }
        Ok(ProductDomain { factors })
    }

    pub fn bidisc() -> ProductDomain {
        ProductDomain {
            factors: vec![DiscDomain::unit(), DiscDomain::unit()],
        }
    }

    pub fn tridisc() -> ProductDomain {
        ProductDomain {
            factors: vec![DiscDomain::unit(); 3],
        }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    pub fn contains(&self, point: &[Complex64]) -> bool {
        point.len() == self.n() && self.factors.iter().zip(point).all(|(d, &z)| d.contains(z))
    }
}

/// The Hartogs triangle { |z1| < |z2| < 1 } (strict inequalities).
#[derive(Debug, Clone, Copy, Default)]
pub struct HartogsDomain;

impl HartogsDomain {
    pub fn contains(&self, z1: Complex64, z2: Complex64) -> bool {
        z1.norm() < z2.norm() && z2.norm() < 1.0
    }
}

/// Gauss–Legendre nodes and weights on (-1, 1), by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_pair(n, x);
                x -= p2 / d2;
                dp = legendre_pair(n, x).1;
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor quadrature grid on a disc: Gauss–Legendre in radius × uniform
/// angles. All nodes are strictly interior; the weights sum to the area.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub disc: DiscDomain,
    pub n_r: usize,
    pub n_theta: usize,
    /// (node, weight); weight of node (r, θ) is r · (mapped GL weight) · Δθ.
    pub nodes: Vec<(Complex64, f64)>,
    /// Radial nodes and mapped GL weights on (0, radius).
    pub radial: Vec<(f64, f64)>,
    /// Angular nodes θ_j = 2πj/n_theta.
    pub angular: Vec<f64>,
}

pub fn build_polar_grid(disc: DiscDomain, n_r: usize, n_theta: usize) -> Result<PolarGrid> {
    if n_r < 4 {
        return Err(Error::Config(format!("n_r must be >= 4, got {n_r}")));
    }
    if n_theta < 8 {
        return Err(Error::Config(format!("n_theta must be >= 8, got {n_theta}")));
    }
    if n_theta % 2 != 0 {
        return Err(Error::Config(format!("n_theta must be even, got {n_theta}")));
    }
    let (xs, ws) = gauss_legendre(n_r);
    let half_r = disc.radius / 2.0;
    let radial: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ws)
        .map(|(&x, &w)| (half_r * (x + 1.0), half_r * w))
        .collect();
    let dtheta = 2.0 * PI / n_theta as f64;
    let angular: Vec<f64> = (0..n_theta).map(|j| dtheta * j as f64).collect();
    let mut nodes = Vec::with_capacity(n_r * n_theta);
    for &(r, wr) in &radial {
        for &theta in &angular {
            let point = disc.center + Complex64::from_polar(r, theta);
            nodes.push((point, r * wr * dtheta));
        }
    }
    Ok(PolarGrid {
        disc,
        n_r,
        n_theta,
        nodes,
        radial,
        angular,
    })
}

/// Pairwise (cascade) summation: deterministic for a fixed slice regardless
/// of chunking at call sites, and accurate to O(log n) rounding.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::ZERO,
        1..=32 => {
            let mut acc = Complex64::ZERO;
            for v in values {
                acc += v;
            }
            acc
        }
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn pairwise_sum_f64(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=32 => values.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum_f64(&values[..mid]) + pairwise_sum_f64(&values[mid..])
        }
    }
}

/// Weighted node sum of `f` over the grid. Deterministic (pairwise reduction
/// in node order); a non-finite value reports the offending node.
pub fn integrate<F>(grid: &PolarGrid, f: F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut vals = Vec::with_capacity(grid.nodes.len());
    for &(p, w) in &grid.nodes {
        let v = f(p);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::non_finite(p, "integrand"));
        }
        vals.push(v * w);
    }
    Ok(pairwise_sum(&vals))
}

/// Fallible-integrand variant: evaluation errors abort the sum.
pub fn integrate_fallible<F>(grid: &PolarGrid, f: F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut vals = Vec::with_capacity(grid.nodes.len());
    for &(p, w) in &grid.nodes {
        let v = f(p)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::non_finite(p, "integrand"));
        }
        vals.push(v * w);
    }
    Ok(pairwise_sum(&vals))
}

/// Uniform boundary nodes with tangential dζ-weights i·(ζ−c)·Δθ; the
/// trapezoid rule on the circle, spectrally accurate for periodic data.
pub fn boundary_nodes(disc: DiscDomain, n_theta: usize) -> Result<Vec<(Complex64, Complex64)>> {
    if n_theta < 8 {
        return Err(Error::Config(format!("n_theta must be >= 8, got {n_theta}")));
    }
    let dtheta = 2.0 * PI / n_theta as f64;
    Ok((0..n_theta)
        .map(|j| {
            let theta = dtheta * j as f64;
            let offset = Complex64::from_polar(disc.radius, theta);
            let point = disc.center + offset;
            let weight = Complex64::new(0.0, 1.0) * offset * dtheta;
            (point, weight)
        })
        .collect())
}

/// ∮ f(ζ) dζ over precomputed boundary nodes.
pub fn contour_integral<F>(nodes: &[(Complex64, Complex64)], f: F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut vals = Vec::with_capacity(nodes.len());
    for &(p, w) in nodes {
        let v = f(p)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::non_finite(p, "contour integrand"));
        }
        vals.push(v * w);
    }
    Ok(pairwise_sum(&vals))
}

/// Polar rule on a disc with dyadically graded radial panels, resolving
/// integrable power singularities at the center down to radius·2^-depth.
/// The innermost stub [0, radius·2^-depth) is dropped, which makes every
/// divergent estimate a lower bound that grows with depth.
#[derive(Debug, Clone)]
pub struct GradedDiscRule {
    pub center: Complex64,
    pub nodes: Vec<(Complex64, f64)>,
}

pub fn graded_disc_rule(
    disc: DiscDomain,
    depth: usize,
    gl_per_panel: usize,
    n_theta: usize,
) -> GradedDiscRule {
    let (xs, ws) = gauss_legendre(gl_per_panel);
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut nodes = Vec::new();
    let mut outer = disc.radius;
    for _ in 0..depth {
        let inner = outer / 2.0;
        let half = (outer - inner) / 2.0;
        let mid = (outer + inner) / 2.0;
        for (&x, &w) in xs.iter().zip(&ws) {
            let r = mid + half * x;
            let wr = half * w;
            for j in 0..n_theta {
                let theta = dtheta * j as f64;
                nodes.push((
                    disc.center + Complex64::from_polar(r, theta),
                    r * wr * dtheta,
                ));
            }
        }
        outer = inner;
    }
    GradedDiscRule {
        center: disc.center,
        nodes,
    }
}

/// Radial panels between r_in and r_out, log-graded with `panels_per_decade`
/// panels per factor of 10, times a uniform angular rule. Used for annulus
/// energies whose integrand concentrates at an excluded center.
pub fn graded_annulus_rule(
    center: Complex64,
    r_in: f64,
    r_out: f64,
    panels_per_decade: usize,
    gl_per_panel: usize,
    n_theta: usize,
) -> Vec<(Complex64, f64)> {
    assert!(r_in > 0.0 && r_out > r_in);
    let decades = (r_out / r_in).log10();
    let n_panels = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let ratio = (r_out / r_in).powf(1.0 / n_panels as f64);
    let (xs, ws) = gauss_legendre(gl_per_panel);
    let dtheta = 2.0 * PI / n_theta as f64;
    let mut nodes = Vec::new();
    let mut lo = r_in;
    for _ in 0..n_panels {
        let hi = (lo * ratio).min(r_out);
        let half = (hi - lo) / 2.0;
        let mid = (hi + lo) / 2.0;
        for (&x, &w) in xs.iter().zip(&ws) {
            let r = mid + half * x;
            let wr = half * w;
            for j in 0..n_theta {
                let theta = dtheta * j as f64;
                nodes.push((center + Complex64::from_polar(r, theta), r * wr * dtheta));
            }
        }
        lo = hi;
    }
    nodes
}

/// Quadrature for {m_lo < |z| < m_hi} ∩ {δ < |z - 1| < ρ_max} in polar
/// coordinates about 1: log-graded radial panels, and per-radius exact
/// Gauss–Legendre arcs for the admissible angles (no indicator chatter, so
/// δ ↦ ∫ stays smooth for the divergence fits). The modulus constraints cut
/// cos φ between (m²-1-ρ²)/(2ρ) bounds, symmetric across the real axis.
pub fn annulus_arcs_about_one(
    delta: f64,
    rho_max: f64,
    m_lo: f64,
    m_hi: f64,
    panels_per_decade: usize,
    gl_radial: usize,
    gl_angular: usize,
) -> Vec<(Complex64, f64)> {
    assert!(delta > 0.0 && rho_max > delta);
    // log-graded edges, refined dyadically around the radii where an arc
    // bound saturates (the arc length has a square-root kink there)
    let decades = (rho_max / delta).log10();
    let n_panels = ((decades * panels_per_decade as f64).ceil() as usize).max(1);
    let ratio = (rho_max / delta).powf(1.0 / n_panels as f64);
    let mut edges: Vec<f64> = Vec::with_capacity(n_panels + 1);
    let mut e = delta;
    for _ in 0..n_panels {
        edges.push(e);
        e *= ratio;
    }
    edges.push(rho_max);
    for critical in [
        (m_lo - 1.0).abs(),
        m_lo + 1.0,
        (m_hi - 1.0).abs(),
        m_hi + 1.0,
    ] {
        if critical < delta || critical > rho_max {
            continue;
        }
        let scale = critical.max(delta) / 4.0;
        if critical > delta && critical < rho_max {
            edges.push(critical);
        }
        for j in 0..14 {
            let offset = scale * 0.5f64.powi(j);
            for side in [critical - offset, critical + offset] {
                if side > delta && side < rho_max {
                    edges.push(side);
                }
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let (xr, wr) = gauss_legendre(gl_radial);
    let (xa, wa) = gauss_legendre(gl_angular);
    let mut nodes = Vec::new();
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let half = (hi - lo) / 2.0;
        let mid = (hi + lo) / 2.0;
        for (&x, &w) in xr.iter().zip(&wr) {
            let rho = mid + half * x;
            let wrho = half * w;
            let cos_hi = (m_hi * m_hi - 1.0 - rho * rho) / (2.0 * rho);
            let cos_lo = (m_lo * m_lo - 1.0 - rho * rho) / (2.0 * rho);
            // admissible: cos_lo < cos φ < cos_hi on the upper half circle
            let phi_a = cos_hi.clamp(-1.0, 1.0).acos();
            let phi_b = cos_lo.clamp(-1.0, 1.0).acos();
            if phi_b <= phi_a {
                continue;
            }
            let ahalf = (phi_b - phi_a) / 2.0;
            let amid = (phi_b + phi_a) / 2.0;
            for (&y, &v) in xa.iter().zip(&wa) {
                let phi = amid + ahalf * y;
                let wphi = ahalf * v;
                for sign in [1.0, -1.0] {
                    let z = Complex64::ONE + Complex64::from_polar(rho, sign * phi);
                    nodes.push((z, rho * wrho * wphi));
                }
            }
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_weights_sum_to_area() {
        let grid = build_polar_grid(DiscDomain::unit(), 64, 256).unwrap();
        let total: f64 = grid.nodes.iter().map(|(_, w)| w).sum();
        assert!((total - PI).abs() / PI < 1e-12);
        // all nodes strictly interior
        assert!(grid.nodes.iter().all(|(p, _)| p.norm() < 1.0));
        assert!(grid.nodes.iter().all(|(p, _)| p.norm() > 0.0));
    }

    #[test]
    fn grid_counts_below_minimum_are_rejected() {
        assert!(build_polar_grid(DiscDomain::unit(), 3, 256).is_err());
        assert!(build_polar_grid(DiscDomain::unit(), 64, 6).is_err());
        assert!(build_polar_grid(DiscDomain::unit(), 64, 255).is_err());
    }

    #[test]
    fn integrate_constant_gives_area() {
        let grid = build_polar_grid(DiscDomain::unit(), 64, 256).unwrap();
        let v = integrate(&grid, |_| Complex64::ONE).unwrap();
        assert!((v.re - PI).abs() / PI < 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn integrate_radial_powers() {
        let grid = build_polar_grid(DiscDomain::unit(), 64, 256).unwrap();
        // |w|^2 -> 2π ∫ r^3 dr = π/2
        let v = integrate(&grid, |w| Complex64::new(w.norm_sqr(), 0.0)).unwrap();
        assert!((v.re - PI / 2.0).abs() < 1e-12);
        // |w|^5 -> 2π ∫ r^6 dr = 2π/7
        let v = integrate(&grid, |w| Complex64::new(w.norm().powi(5), 0.0)).unwrap();
        assert!((v.re - 2.0 * PI / 7.0).abs() < 1e-11);
        // w -> 0 by angular symmetry
        let v = integrate(&grid, |w| w).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn integrate_is_linear() {
        let grid = build_polar_grid(DiscDomain::unit(), 32, 64).unwrap();
        let f = |w: Complex64| w * w.conj() + w;
        let g = |w: Complex64| Complex64::new(w.re.cos(), w.im);
        let a = Complex64::new(2.5, -1.0);
        let b = Complex64::new(-0.5, 3.0);
        let combined = integrate(&grid, |w| a * f(w) + b * g(w)).unwrap();
        let separate = a * integrate(&grid, f).unwrap() + b * integrate(&grid, g).unwrap();
        // ‖f‖∞, ‖g‖∞ ≈ 2 on the disc
        let bound = 1e-13 * (a.norm() * 2.0 + b.norm() * 2.0) * PI;
        assert!((combined - separate).norm() <= bound);
    }

    #[test]
    fn integrate_inverse_modulus_integrable_singularity() {
        let grid = build_polar_grid(DiscDomain::unit(), 64, 256).unwrap();
        // |w|^-1 -> 2π ∫ dr = 2π; the area element cancels the singularity
        let v = integrate(&grid, |w| Complex64::new(1.0 / w.norm(), 0.0)).unwrap();
        assert!((v.re - 2.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn non_finite_integrand_names_the_node() {
        let grid = build_polar_grid(DiscDomain::unit(), 8, 8).unwrap();
        let bad = grid.nodes[5].0;
        let err = integrate(&grid, |w| {
            if (w - bad).norm() < 1e-15 {
                Complex64::new(f64::NAN, 0.0)
            } else {
                Complex64::ONE
            }
        })
        .unwrap_err();
        match err {
            Error::NonFinite { re, im, .. } => {
                assert!((Complex64::new(re, im) - bad).norm() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn boundary_residue_and_holomorphic_moments() {
        let nodes = boundary_nodes(DiscDomain::unit(), 256).unwrap();
        // ∮ dζ/ζ = 2πi
        let v = contour_integral(&nodes, |z| Ok(1.0 / z)).unwrap();
        assert!((v - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-13);
        // ∮ ζ^m dζ = 0 for holomorphic powers up to n_theta/4
        for m in 0..=64 {
            let v = contour_integral(&nodes, |z| Ok(crate::expr::complex_powi(z, m))).unwrap();
            assert!(v.norm() < 1e-12, "m={m}: {v}");
        }
        // ∮ conj(ζ) dζ = 2πi (area factor of the unit disc)
        let v = contour_integral(&nodes, |z| Ok(z.conj())).unwrap();
        assert!((v - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-13);
    }

    #[test]
    fn boundary_reproduces_cauchy_formula() {
        let nodes = boundary_nodes(DiscDomain::unit(), 256).unwrap();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        for m in [0usize, 1, 5, 32, 64] {
            for z in [
                Complex64::new(0.5, 0.2),
                Complex64::new(-0.9, 0.0),
                Complex64::new(0.3, -0.8),
            ] {
                let v = contour_integral(&nodes, |zeta| {
                    Ok(crate::expr::complex_powi(zeta, m as i32) / (zeta - z))
                })
                .unwrap()
                    / two_pi_i;
                let expected = crate::expr::complex_powi(z, m as i32);
                assert!((v - expected).norm() < 1e-10, "m={m} z={z}");
            }
        }
    }

    #[test]
    fn refinement_differences_shrink_for_smooth_integrand() {
        // non-polynomial but analytic, with a pole near the boundary so the
        // geometric convergence stays above machine noise across 3 doublings
        let f = |w: Complex64| 1.0 / (w - Complex64::new(1.3, 0.1));
        let mut values = Vec::new();
        for k in 0..4 {
            let grid = build_polar_grid(DiscDomain::unit(), 4 << k, 8 << k).unwrap();
            values.push(integrate(&grid, f).unwrap());
        }
        let diffs: Vec<f64> = values.windows(2).map(|p| (p[1] - p[0]).norm()).collect();
        for i in 1..diffs.len() {
            assert!(diffs[i] < diffs[i - 1], "diffs not monotone: {:?}", diffs);
        }
    }

    #[test]
    fn graded_disc_rule_resolves_log_divergence() {
        // ∫_disc |w|^-2 dV grows like 2π·depth·ln2
        let rule = graded_disc_rule(DiscDomain::unit(), 40, 16, 32);
        let total: f64 = rule
            .nodes
            .iter()
            .map(|(p, w)| w / p.norm_sqr())
            .sum();
        let expected = 2.0 * PI * 40.0 * std::f64::consts::LN_2;
        assert!((total - expected).abs() / expected < 1e-10, "{total} vs {expected}");
    }

    #[test]
    fn arc_rule_measures_regions_exactly() {
        // area of {1/2 < |z| < 1} minus the δ-ball at 1, computed with the
        // arc rule against the closed form area(annulus) - area(lens)
        let delta = 1e-3;
        let rule = annulus_arcs_about_one(delta, 2.0, 0.5, 1.0, 8, 12, 24);
        let area: f64 = rule.iter().map(|(_, w)| w).sum();
        // lens area of B(1,δ) ∩ unit disc ≈ half the δ-ball for small δ
        let expected = PI * (1.0 - 0.25) - PI * delta * delta / 2.0;
        assert!(
            (area - expected).abs() < 1e-6,
            "{area} vs {expected}"
        );
        // the same with the full disc as the outer constraint
        let rule = annulus_arcs_about_one(delta, 2.0, 0.0, 1.0, 8, 12, 24);
        let area: f64 = rule.iter().map(|(_, w)| w).sum();
        let expected = PI - PI * delta * delta / 2.0;
        assert!((area - expected).abs() < 1e-6, "{area} vs {expected}");
    }

    #[test]
    fn hartogs_membership_is_strict() {
        let h = HartogsDomain;
        assert!(h.contains(Complex64::new(0.1, 0.0), Complex64::new(0.5, 0.0)));
        assert!(!h.contains(Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)));
        assert!(!h.contains(Complex64::new(0.1, 0.0), Complex64::new(1.0, 0.0)));
        assert!(!h.contains(Complex64::ZERO, Complex64::ZERO));
    }
}
