//! Property suites behind `fracsys selftest`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{embedding_check, frac_p_laplacian_apply, picone_values, poincare_check, seminorm_p, GridFunction};
use crate::error::Result;
use crate::geometry::GridDomain;
use crate::infinity::{extremal, holder_seminorm, limit_residual_at, sup_geometric_mean};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Suite = fn(u64) -> Result<SuiteReport>;

const SUITES: [(&str, Suite); 5] = [
    ("picone", picone_suite),
    ("poincare", poincare_suite),
    ("gradient", gradient_suite),
    ("embedding", embedding_suite),
    ("cone", cone_suite),
];

/// Runs every suite in parallel; reports come back in a fixed order.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    SUITES
        .par_iter()
        .map(|&(name, suite)| {
            suite(seed).unwrap_or_else(|e| SuiteReport {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

fn interval(n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::build_interval(0.0, 1.0, n).expect("valid interval"))
}

fn picone_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for p in [2.0, 2.5, 4.0] {
        for _ in 0..10_000 {
            let phi = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            let psi = [rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)];
            let l = picone_values(&phi, &psi, p, &[(0, 1)])?;
            worst = worst.min(l[0]);
            count += 1;
        }
    }
    Ok(SuiteReport {
        name: "picone",
        passed: worst >= -1e-10,
        detail: format!("{count} pairs, min L = {worst:.3e}"),
    })
}

fn poincare_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let d = interval(41);
    let mut failures = 0;
    let mut margin = f64::INFINITY;
    for (t, p) in [(0.5, 2.0), (0.3, 3.0), (0.7, 4.0)] {
        for _ in 0..100 {
            let w = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
            let c = poincare_check(&w, t, p)?;
            if !c.holds {
                failures += 1;
            }
            margin = margin.min(c.lhs / c.rhs);
        }
    }
    Ok(SuiteReport {
        name: "poincare",
        passed: failures == 0,
        detail: format!("300 functions, {failures} failures, min lhs/rhs = {margin:.3e}"),
    })
}

fn gradient_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let d = interval(11);
    let t = 0.5;
    let mut worst = 0.0f64;
    for p in [2.0, 3.0] {
        for _ in 0..20 {
            let w = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
            let g = frac_p_laplacian_apply(&w, t, p)?;
            let fd = central_differences(&w, t, p)?;
            let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let err = g.values().iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err / scale);
        }
    }
    Ok(SuiteReport {
        name: "gradient",
        passed: worst <= 1e-5,
        detail: format!("40 functions, max rel err = {worst:.3e}"),
    })
}

/// `∂[w]^p/∂w_i / (p h^N)` by central differences of the energy.
pub fn central_differences(w: &GridFunction, t: f64, p: f64) -> Result<Vec<f64>> {
    let hn = w.domain().cell_volume();
    (0..w.len())
        .map(|i| {
            let step = 1e-6 * w.values()[i].abs().max(1e-2);
            let mut plus = w.values().to_vec();
            let mut minus = w.values().to_vec();
            plus[i] += step;
            minus[i] -= step;
            let ep = seminorm_p(&w.with_values(plus)?, t, p, true)?;
            let em = seminorm_p(&w.with_values(minus)?, t, p, true)?;
            Ok((ep - em) / (2.0 * step) / (p * hn))
        })
        .collect()
}

fn embedding_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let d = interval(41);
    let mut failures = 0;
    for (s, p, q) in [(0.9, 40.0, 20.0), (0.6, 12.0, 4.0), (0.5, 8.0, 3.0)] {
        for _ in 0..50 {
            let w = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
            if !embedding_check(&w, s, p, q)? {
                failures += 1;
            }
        }
    }
    Ok(SuiteReport {
        name: "embedding",
        passed: failures == 0,
        detail: format!("150 functions, {failures} failures"),
    })
}

fn cone_suite(_seed: u64) -> Result<SuiteReport> {
    let d = interval(161);
    let mut worst = 0.0f64;
    for (g, r, s) in [(0.5, 0.3, 0.6), (0.5, 0.5, 0.5), (0.3, 0.8, 0.2)] {
        let res = extremal(&d, g, r, s)?;
        let lam = res.lambda_inf_geometric;
        let (ru, rv) = limit_residual_at(&res.u0, &res.v0, g, r, s, lam, res.argmax)?;
        let errs = [
            holder_seminorm(&res.u0, r)? - lam,
            holder_seminorm(&res.v0, s)? - lam,
            sup_geometric_mean(&res.u0, &res.v0, g)? - 1.0,
            res.lambda_inf_variational - lam,
            ru,
            rv,
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(e.abs()));
    }
    Ok(SuiteReport {
        name: "cone",
        passed: worst <= 1e-9,
        detail: format!("3 parameter sets, max deviation = {worst:.3e}"),
    })
}
