//! Empirical boundedness checks: operator-norm ratios measured on seeded
//! batteries must be finite and stable under one grid doubling. No constant
//! is certified — stability of the measured ratio is the assertion.

use rayon::prelude::*;

use dbar_core::battery::{closed_form_battery, random_scalar_battery};
use dbar_core::cauchy;
use dbar_core::domains::DiscDomain;
use dbar_core::expr::{CExpr, Var};
use dbar_core::form::CoordBlock;
use dbar_core::hartogs::{refined_mixed_integral, refined_solution_integral, solve_optimal};
use dbar_core::normalize;
use dbar_core::parse;
use dbar_core::transport::{pullback_to_bidisc, taylor_truncation_form};
use dbar_core::weights::{sobolev_norm, GridSpec, NormDomain, WeightSpec};

/// ‖T h‖_{W^{k+1,p}(△,μ)} / ‖h‖_{W^{k,p}(△,μ)} over a battery, at one grid.
fn transform_ratios(
    battery: &[CExpr],
    k: usize,
    p: f64,
    weight: &WeightSpec,
    grid: &GridSpec,
) -> Vec<f64> {
    let domain = NormDomain::unit_disc(Var::Zeta);
    battery
        .par_iter()
        .map(|h| {
            let hp = normalize(h).unwrap();
            let th = cauchy::symbolic_solid(&hp, Var::Zeta, &DiscDomain::unit()).unwrap();
            let num = sobolev_norm(&th.to_expr(), &domain, k + 1, p, weight, grid)
                .unwrap()
                .total;
            let den = sobolev_norm(h, &domain, k, p, weight, grid).unwrap().total;
            num / den
        })
        .collect()
}

#[test]
fn solid_transform_ratio_is_finite_and_grid_stable() {
    // fixed battery of 20 expressions; μ ∈ {1, |w|²}; k ∈ {0,1,2}; p = 5
    let battery = random_scalar_battery(Var::Zeta, 20, 3, 2112);
    let base = GridSpec::new(32, 128);
    let doubled = base.doubled();
    let weights = [
        WeightSpec::unit(),
        WeightSpec::new(parse("abs(zeta)^2").unwrap(), "|w|^2"),
    ];
    for weight in &weights {
        for k in 0..=2usize {
            let r1 = transform_ratios(&battery, k, 5.0, weight, &base);
            let r2 = transform_ratios(&battery, k, 5.0, weight, &doubled);
            let max1 = r1.iter().copied().fold(0.0f64, f64::max);
            let max2 = r2.iter().copied().fold(0.0f64, f64::max);
            assert!(max1.is_finite() && max1 > 0.0);
            assert!(
                (max2 - max1).abs() / max1 < 0.10,
                "k={k} μ={}: max ratio drifted {} -> {}",
                weight.label,
                max1,
                max2
            );
        }
    }
}

#[test]
fn truncated_data_satisfies_the_refined_weighted_estimates() {
    // Prop-style check: for pipeline data f̃ = pullback(f - taylor(f)),
    // the |w2|^{2+(s-k)p}-weighted p-integrals of the mixed derivative
    // blocks ∇^t_{w1}∇^s_{w2} f̃ are finite and grid-stable for t+s <= k.
    let p = 5.0;
    let base = GridSpec::new(16, 32);
    let doubled = base.doubled();
    for k in 1..=2usize {
        for (i, f) in closed_form_battery(CoordBlock::Z, 2, 1, 4, 515)
            .iter()
            .enumerate()
        {
            let taylor = taylor_truncation_form(f, k).unwrap();
            let reduced = f.sub(&taylor);
            let f_tilde = pullback_to_bidisc(&reduced).unwrap();
            let comps: Vec<_> = f_tilde
                .components
                .values()
                .map(|c| normalize(c).unwrap())
                .collect();
            for t in 0..=k {
                for s in 0..=k - t {
                    let v1 = refined_mixed_integral(&comps, t, s, k, p, &base).unwrap();
                    let v2 = refined_mixed_integral(&comps, t, s, k, p, &doubled).unwrap();
                    assert!(v1.is_finite(), "k={k} member {i} (t,s)=({t},{s})");
                    if v1 > 1e-12 {
                        assert!(
                            (v2 - v1).abs() / v1 < 0.10,
                            "k={k} member {i} (t,s)=({t},{s}): {v1} -> {v2}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn corrected_solution_satisfies_the_refined_weighted_estimates() {
    // same weighted integrals for the holomorphic derivative words of the
    // jet-corrected bidisc solution
    let p = 5.0;
    let base = GridSpec::new(16, 32);
    let doubled = base.doubled();
    for k in 1..=2usize {
        for (i, f) in closed_form_battery(CoordBlock::Z, 2, 1, 3, 616)
            .iter()
            .enumerate()
        {
            let sol = solve_optimal(f, k, p, 9).unwrap();
            let u_tilde = normalize(sol.provenance.u_tilde.as_ref().unwrap()).unwrap();
            for t in 0..=k {
                for s in 0..=k - t {
                    let v1 = refined_solution_integral(&u_tilde, t, s, k, p, &base).unwrap();
                    let v2 = refined_solution_integral(&u_tilde, t, s, k, p, &doubled).unwrap();
                    assert!(v1.is_finite(), "k={k} member {i} (t,s)=({t},{s})");
                    if v1 > 1e-12 {
                        assert!(
                            (v2 - v1).abs() / v1 < 0.10,
                            "k={k} member {i} (t,s)=({t},{s}): {v1} -> {v2}"
                        );
                    }
                }
            }
        }
    }
}
