//! Hölder seminorms, the limit eigenvalue Λ₁,∞ and the nonlocal ∞-operators.
//!
//! Functions vanish outside Ω. Exterior points enter every scan through two
//! candidates per node: the nearest boundary point (quotient `w_i / d_i^t`)
//! and the far field (quotient `0`, reached only as `|y| → ∞`).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::GridFunction;
use crate::error::{Error, Result};
use crate::geometry::{distance, GridDomain};

/// `[w]_{t,∞} = max |w(x) − w(y)| / |x − y|^t` over node pairs and nearest
/// exterior points.
pub fn holder_seminorm(w: &GridFunction, t: f64) -> Result<f64> {
    check_order(t)?;
    let d = w.domain();
    let nodes = d.nodes();
    let dist = d.boundary_distance();
    let vals = w.values();
    let m = (0..w.len())
        .into_par_iter()
        .map(|i| {
            let mut m = 0.0f64;
            if vals[i] != 0.0 {
                m = m.max(vals[i].abs() / dist[i].powf(t));
            }
            for j in 0..i {
                let q = (vals[i] - vals[j]).abs() / distance(&nodes[i], &nodes[j]).powf(t);
                m = m.max(q);
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    if !m.is_finite() {
        return Err(Error::NonFinite("holder seminorm"));
    }
    Ok(m)
}

fn check_order(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t = {t} must lie in (0,1)")))
    }
}

/// `(1/R)^{(1−Γ)s + Γr}`.
pub fn lambda_infinity_geometric(domain: &GridDomain, gamma: f64, r: f64, s: f64) -> f64 {
    domain.inradius().powf(-((1.0 - gamma) * s + gamma * r))
}

/// `max(‖u^Γ v^{1−Γ}‖_∞)` over nodes.
pub fn sup_geometric_mean(u: &GridFunction, v: &GridFunction, gamma: f64) -> Result<f64> {
    u.check_same_domain(v)?;
    Ok(u.values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a.abs().powf(gamma) * b.abs().powf(1.0 - gamma))
        .fold(0.0, f64::max))
}

/// `max([u]_{r,∞}, [v]_{s,∞}) / ‖u^Γ v^{1−Γ}‖_∞`.
pub fn lambda_infinity_variational(u: &GridFunction, v: &GridFunction, gamma: f64, r: f64, s: f64) -> Result<f64> {
    let den = sup_geometric_mean(u, v, gamma)?;
    if !(den > 0.0) {
        return Err(Error::Inadmissible);
    }
    let (hu, hv) = rayon::join(|| holder_seminorm(u, r), || holder_seminorm(v, s));
    Ok(hu?.max(hv?) / den)
}

/// Truncated cones at the incentre node with `‖u₀^Γ v₀^{1−Γ}‖_∞ = 1`:
/// `u₀ = R^{(r−s)(1−Γ)} (1 − |x−x₀|/R)₊^r`, `v₀ = R^{−(r−s)Γ} (1 − |x−x₀|/R)₊^s`.
pub fn cone_pair(domain: &Arc<GridDomain>, gamma: f64, r: f64, s: f64) -> (GridFunction, GridFunction) {
    let (rr, x0) = domain.inradius_and_argmax();
    let center = domain.nodes()[x0];
    let profile = |x: &[f64; 2]| (1.0 - distance(x, &center) / rr).max(0.0);
    let cu = rr.powf((r - s) * (1.0 - gamma));
    let cv = rr.powf(-(r - s) * gamma);
    // the profile is bounded, so construction cannot fail
    let u = GridFunction::from_fn(domain.clone(), |x| cu * profile(x).powf(r)).expect("finite cone");
    let v = GridFunction::from_fn(domain.clone(), |x| cv * profile(x).powf(s)).expect("finite cone");
    (u, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityOps {
    pub plus: f64,
    pub minus: f64,
    /// `plus + minus`.
    pub total: f64,
}

/// `L^±_{t,∞} w(x_i)`: extreme values of `(w_i − w(y)) / |x_i − y|^t` over
/// the other nodes, the nearest exterior point and the far field.
pub fn viscosity_ops(w: &GridFunction, t: f64, i: usize) -> Result<ViscosityOps> {
    check_order(t)?;
    let d = w.domain();
    if i >= d.len() || !d.is_interior(i) {
        return Err(Error::Precondition(format!("node {i} is not an interior node")));
    }
    let nodes = d.nodes();
    let vals = w.values();
    let wi = vals[i];
    // far field
    let (mut plus, mut minus) = (0.0f64, 0.0f64);
    let edge = wi / d.boundary_distance()[i].powf(t);
    plus = plus.max(edge);
    minus = minus.min(edge);
    for (j, y) in nodes.iter().enumerate() {
        if j == i {
            continue;
        }
        let q = (wi - vals[j]) / distance(&nodes[i], y).powf(t);
        plus = plus.max(q);
        minus = minus.min(q);
    }
    Ok(ViscosityOps {
        plus,
        minus,
        total: plus + minus,
    })
}

/// Residual of both limit equations at node `i`:
/// `min(L_{r,∞}u, L⁺_{r,∞}u − Λ u^Γ v^{1−Γ})` and the same with `(s, v)`.
pub fn limit_residual_at(
    u: &GridFunction,
    v: &GridFunction,
    gamma: f64,
    r: f64,
    s: f64,
    lambda: f64,
    i: usize,
) -> Result<(f64, f64)> {
    u.check_same_domain(v)?;
    let lu = viscosity_ops(u, r, i)?;
    let lv = viscosity_ops(v, s, i)?;
    let rhs = lambda * u.values()[i].powf(gamma) * v.values()[i].powf(1.0 - gamma);
    Ok((lu.total.min(lu.plus - rhs), lv.total.min(lv.plus - rhs)))
}

/// Largest absolute residual of both limit equations over interior nodes.
pub fn limit_residual(u: &GridFunction, v: &GridFunction, gamma: f64, r: f64, s: f64, lambda: f64) -> Result<(f64, f64)> {
    u.check_same_domain(v)?;
    if u.values().iter().chain(v.values()).any(|&x| x < 0.0) {
        return Err(Error::Precondition("limit residual needs u, v ≥ 0".into()));
    }
    let d = u.domain();
    let per_node: Vec<(f64, f64)> = (0..d.len())
        .into_par_iter()
        .filter(|&i| d.is_interior(i))
        .map(|i| limit_residual_at(u, v, gamma, r, s, lambda, i))
        .collect::<Result<_>>()?;
    Ok(per_node
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(x.abs()), b.max(y.abs()))))
}

#[derive(Debug, Clone)]
pub struct InfinityResult {
    pub lambda_inf_geometric: f64,
    pub lambda_inf_variational: f64,
    pub gamma: f64,
    pub r: f64,
    pub s: f64,
    pub inradius: f64,
    pub argmax: usize,
    pub u0: GridFunction,
    pub v0: GridFunction,
}

/// Geometric value of Λ₁,∞ and the variational value of the cone pair.
pub fn extremal(domain: &Arc<GridDomain>, gamma: f64, r: f64, s: f64) -> Result<InfinityResult> {
    check_order(r)?;
    check_order(s)?;
    check_order(gamma)?;
    let (inradius, argmax) = domain.inradius_and_argmax();
    let (u0, v0) = cone_pair(domain, gamma, r, s);
    Ok(InfinityResult {
        lambda_inf_geometric: lambda_infinity_geometric(domain, gamma, r, s),
        lambda_inf_variational: lambda_infinity_variational(&u0, &v0, gamma, r, s)?,
        gamma,
        r,
        s,
        inradius,
        argmax,
        u0,
        v0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_interval(n: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::build_interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn zero_function() {
        let w = GridFunction::zeros(unit_interval(11));
        assert_eq!(holder_seminorm(&w, 0.5).unwrap(), 0.0);
        let ops = viscosity_ops(&w, 0.5, 5).unwrap();
        assert_eq!((ops.plus, ops.minus, ops.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cone_seminorm_is_inverse_power_of_radius() {
        let d = unit_interval(161);
        let w = GridFunction::from_fn(d.clone(), |x| (1.0 - (x[0] - 0.5).abs() / 0.5).max(0.0).sqrt()).unwrap();
        assert_relative_eq!(holder_seminorm(&w, 0.5).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(
            holder_seminorm(&w.scaled(3.0), 0.5).unwrap(),
            3.0 * 2f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn geometric_values() {
        let d = unit_interval(161);
        assert_relative_eq!(lambda_infinity_geometric(&d, 0.5, 0.3, 0.6), 1.366040, epsilon = 5e-7);
        assert_relative_eq!(lambda_infinity_geometric(&d, 0.2, 0.5, 0.5), 1.414214, epsilon = 5e-7);
        let disk = GridDomain::build_disk([0.0, 0.0], 1.0, 0.1, 2.0).unwrap();
        assert_relative_eq!(lambda_infinity_geometric(&disk, 0.4, 0.3, 0.8), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cone_pair_is_extremal() {
        let d = unit_interval(161);
        for (g, r, s) in [(0.5, 0.3, 0.6), (0.5, 0.5, 0.5), (0.25, 0.7, 0.4)] {
            let res = extremal(&d, g, r, s).unwrap();
            let (u0, v0) = (&res.u0, &res.v0);
            assert_relative_eq!(holder_seminorm(u0, r).unwrap(), res.lambda_inf_geometric, epsilon = 1e-9);
            assert_relative_eq!(holder_seminorm(v0, s).unwrap(), res.lambda_inf_geometric, epsilon = 1e-9);
            assert_relative_eq!(sup_geometric_mean(u0, v0, g).unwrap(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(res.lambda_inf_variational, res.lambda_inf_geometric, epsilon = 1e-9);
        }
    }

    #[test]
    fn apex_operators_and_residual() {
        let d = unit_interval(161);
        let apex = d.argmax_node();
        let w = GridFunction::from_fn(d.clone(), |x| (1.0 - (x[0] - 0.5).abs() / 0.5).max(0.0).powf(0.4)).unwrap();
        let ops = viscosity_ops(&w, 0.4, apex).unwrap();
        assert_relative_eq!(ops.plus, 0.5f64.powf(-0.4), max_relative = 1e-12);
        assert_eq!(ops.minus, 0.0);
        assert_eq!(ops.total, ops.plus + ops.minus);

        let (g, r, s) = (0.5, 0.3, 0.6);
        let lam = lambda_infinity_geometric(&d, g, r, s);
        let (u0, v0) = cone_pair(&d, g, r, s);
        let (ru, rv) = limit_residual_at(&u0, &v0, g, r, s, lam, apex).unwrap();
        assert!(ru.abs() <= 1e-9 && rv.abs() <= 1e-9, "{ru} {rv}");
    }

    #[test]
    fn boundary_node_is_rejected() {
        let d = Arc::new(GridDomain::from_nodes_1d(0.0, 1.0, &[0.0, 0.5, 1.0], 0.5).unwrap());
        let w = GridFunction::zeros(d);
        assert!(viscosity_ops(&w, 0.5, 0).is_err());
        assert!(viscosity_ops(&w, 0.5, 1).is_ok());
    }

    #[test]
    fn negative_values_rejected_by_residual() {
        let d = unit_interval(5);
        let u = GridFunction::new(d.clone(), vec![0.1, -0.2, 0.3, 0.1, 0.1]).unwrap();
        assert!(limit_residual(&u, &u.abs(), 0.5, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn zero_denominator_is_inadmissible() {
        let d = unit_interval(5);
        let u = GridFunction::new(d.clone(), vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let v = GridFunction::new(d, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(lambda_infinity_variational(&u, &v, 0.5, 0.5, 0.5), Err(Error::Inadmissible));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn variational_bounds_geometric_from_above(
            a in proptest::collection::vec(0.0f64..1.0, 21),
            b in proptest::collection::vec(0.01f64..1.0, 21),
            g in 0.05f64..0.95,
            r in 0.05f64..0.95,
            s in 0.05f64..0.95,
            c in 0.1f64..10.0,
        ) {
            let d = unit_interval(21);
            let u = GridFunction::new(d.clone(), a).unwrap();
            let v = GridFunction::new(d.clone(), b).unwrap();
            prop_assume!(sup_geometric_mean(&u, &v, g).unwrap() > 0.0);
            let val = lambda_infinity_variational(&u, &v, g, r, s).unwrap();
            prop_assert!(val >= lambda_infinity_geometric(&d, g, r, s) - 1e-9);
            let scaled = lambda_infinity_variational(&u.scaled(c), &v.scaled(c), g, r, s).unwrap();
            prop_assert!((scaled - val).abs() <= 1e-12 * val);
        }

        #[test]
        fn holder_triangle_inequality(
            a in proptest::collection::vec(-1.0f64..1.0, 15),
            b in proptest::collection::vec(-1.0f64..1.0, 15),
            t in 0.05f64..0.95,
        ) {
            let d = unit_interval(15);
            let u = GridFunction::new(d.clone(), a.clone()).unwrap();
            let w = GridFunction::new(d.clone(), b.clone()).unwrap();
            let sum = GridFunction::new(d, a.iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
            let lhs = holder_seminorm(&sum, t).unwrap();
            let rhs = holder_seminorm(&u, t).unwrap() + holder_seminorm(&w, t).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn operator_composition_and_max_node(
            a in proptest::collection::vec(0.0f64..1.0, 13),
            t in 0.05f64..0.95,
        ) {
            let d = unit_interval(13);
            let w = GridFunction::new(d, a.clone()).unwrap();
            let top = (0..a.len()).max_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap();
            for i in 0..a.len() {
                let ops = viscosity_ops(&w, t, i).unwrap();
                prop_assert_eq!(ops.total, ops.plus + ops.minus);
                prop_assert!(ops.plus >= 0.0 && ops.minus <= 0.0);
            }
            let ops = viscosity_ops(&w, t, top).unwrap();
            prop_assert_eq!(ops.minus, 0.0);
        }
    }
}
