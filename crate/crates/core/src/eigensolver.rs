//! First eigenpair by projected gradient descent on the log Rayleigh quotient.
//!
//! The objective is `Φ(u,v) = ln([u]_r^p + [v]_s^p) − ln |(u,v)|_{α,β}^p` on
//! the stacked vector `z = (u, v)`. Every accepted iterate is projected back
//! onto `{z ≥ 0, coupling = 1}` by taking absolute values and rescaling, which
//! never increases Φ. Steps start from the Barzilai–Borwein length and are cut
//! back until the Armijo condition holds on the projected point.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{ln_coupling_raw, FracParams, GridFunction, SystemEnergy};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::infinity::cone_pair;
use crate::reduce::log_add_exp;

const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e12;
/// Coupling values below this are treated as a collapse of the constraint.
const MIN_COUPLING: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Bound on `|Δ ln λ|` between accepted iterates.
    pub quotient_tolerance: f64,
    /// Bound on the relative KKT residual, see [`EigenPair::kkt_relative`].
    pub kkt_tolerance: f64,
    /// First trial step, in units of `1/‖∇Φ‖_∞`.
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50_000,
            quotient_tolerance: 1e-10,
            kkt_tolerance: 1e-4,
            initial_step: 0.1,
            backtrack: 0.5,
            armijo: 1e-4,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let tol_ok = |x: f64| x > 0.0 && x.is_finite();
        if !tol_ok(self.quotient_tolerance) || !tol_ok(self.kkt_tolerance) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if !tol_ok(self.initial_step) {
            return Err(Error::InvalidParameter("initial_step must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "backtrack = {} must lie in (0,1)",
                self.backtrack
            )));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::InvalidParameter(format!("armijo = {} must lie in (0,1)", self.armijo)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub u: GridFunction,
    pub v: GridFunction,
    pub params: FracParams,
    pub lambda: f64,
    pub ln_lambda: f64,
    /// Sup-norm strong-form residuals of the two equations.
    pub kkt_u: f64,
    pub kkt_v: f64,
    /// Residuals divided by the size of the right-hand side,
    /// `max_i λ (α/p) |u_i|^{α−1}|v_i|^β` (resp. β). This is the quantity
    /// compared against `kkt_tolerance`; it does not grow like λ with p.
    pub kkt_relative: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Quotient after every accepted iterate, starting with the projected init.
    pub history: Vec<f64>,
}

impl EigenPair {
    /// `λ^{1/p}`, computed from `ln λ` so it stays finite for large p.
    pub fn lambda_root(&self) -> f64 {
        (self.ln_lambda / self.params.p).exp()
    }
}

/// Objective value and gradient at a normalized point.
struct Eval {
    ln_lambda: f64,
    grad: Vec<f64>,
    kkt_relative: f64,
}

struct Problem<'a> {
    sys: &'a SystemEnergy,
    mask: &'a [bool],
    hn: f64,
    n: usize,
}

impl Problem<'_> {
    /// Absolute values, rescaled to unit coupling.
    fn project(&self, z: &mut [f64]) -> Result<()> {
        z.iter_mut().for_each(|x| *x = x.abs());
        let lc = ln_coupling_raw(&z[..self.n], &z[self.n..], &self.sys.params, self.hn);
        if !(lc >= MIN_COUPLING.ln()) {
            return Err(Error::Inadmissible);
        }
        let c = (-lc / self.sys.params.p).exp();
        z.iter_mut().for_each(|x| *x *= c);
        Ok(())
    }

    fn eval(&self, z: &[f64]) -> Result<Eval> {
        let n = self.n;
        let (u, v) = z.split_at(n);
        let params = &self.sys.params;
        let (a, b) = (params.alpha(), params.beta());
        let lc = ln_coupling_raw(u, v, params, self.hn);
        if !(lc >= MIN_COUPLING.ln()) {
            return Err(Error::Inadmissible);
        }
        let (first, second) = rayon::join(
            || self.sys.first.ln_value_and_scaled_grad(u),
            || self.sys.second.ln_value_and_scaled_grad(v),
        );
        let ((leu, gu), (lev, gv)) = (first?, second?);
        let le = log_add_exp(leu, lev);
        let (wu, wv) = ((leu - le).exp(), (lev - le).exp());
        let ln_h = self.hn.ln();

        let mut grad = vec![0.0; 2 * n];
        let (mut res_u, mut rhs_u, mut res_v, mut rhs_v) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            if !self.mask[i] {
                continue;
            }
            // ∂ ln C/∂u_i = α |u_i|^{α−2} u_i |v_i|^β h^N / C
            let (lu, lv) = (u[i].abs().ln(), v[i].abs().ln());
            let cu = if u[i] == 0.0 {
                0.0
            } else {
                a * ((a - 1.0) * lu + b * lv + ln_h - lc).exp() * u[i].signum()
            };
            let cv = if v[i] == 0.0 {
                0.0
            } else {
                b * (a * lu + (b - 1.0) * lv + ln_h - lc).exp() * v[i].signum()
            };
            grad[i] = wu * gu[i] - cu;
            grad[n + i] = wv * gv[i] - cv;
            res_u = res_u.max(grad[i].abs());
            res_v = res_v.max(grad[n + i].abs());
            rhs_u = rhs_u.max(cu.abs());
            rhs_v = rhs_v.max(cv.abs());
        }
        let ln_lambda = le - lc;
        if !ln_lambda.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("rayleigh gradient"));
        }
        let kkt_relative = (res_u / rhs_u).max(res_v / rhs_v);
        Ok(Eval {
            ln_lambda,
            grad,
            kkt_relative: if kkt_relative.is_finite() { kkt_relative } else { f64::INFINITY },
        })
    }
}

fn stacked(u: &GridFunction, v: &GridFunction) -> Vec<f64> {
    u.values().iter().chain(v.values()).copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn tail(history: &[f64]) -> Vec<f64> {
    history[history.len().saturating_sub(20)..].to_vec()
}

/// Minimizes the Rayleigh quotient starting from `init`.
///
/// Returns `Ok` with `converged = false` when the iteration budget runs out
/// or the line search stalls before the KKT tolerance is met.
pub fn minimize_rayleigh(
    domain: &Arc<GridDomain>,
    params: &FracParams,
    init: (&GridFunction, &GridFunction),
    opts: &SolverOptions,
) -> Result<EigenPair> {
    opts.validate()?;
    let sys = SystemEnergy::new(domain.clone(), *params)?;
    minimize_with(&sys, init, opts)
}

/// Same as [`minimize_rayleigh`] with prebuilt kernel weights.
pub fn minimize_with(
    sys: &SystemEnergy,
    init: (&GridFunction, &GridFunction),
    opts: &SolverOptions,
) -> Result<EigenPair> {
    opts.validate()?;
    let domain = sys.domain().clone();
    let (u0, v0) = init;
    u0.check_same_domain(v0)?;
    if !(domain.same_grid(u0.domain())) {
        return Err(Error::DomainMismatch);
    }
    let prob = Problem {
        sys,
        mask: domain.interior_mask(),
        hn: domain.cell_volume(),
        n: domain.len(),
    };
    let mut z = stacked(u0, v0);
    for (i, &inside) in prob.mask.iter().enumerate() {
        if !inside && (z[i] != 0.0 || z[prob.n + i] != 0.0) {
            return Err(Error::Precondition(format!("init is nonzero at boundary node {i}")));
        }
    }
    prob.project(&mut z)?;
    let mut cur = prob.eval(&z).map_err(|e| match e {
        Error::NonFinite(what) => Error::Diverged {
            iteration: 0,
            reason: format!("non-finite {what} at the initial point"),
            trace: Vec::new(),
        },
        other => other,
    })?;
    let mut history = vec![cur.ln_lambda.exp()];
    let mut step = opts.initial_step / sup(&cur.grad).max(f64::MIN_POSITIVE);
    let mut decrease = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        // at the first iterate only the KKT test is available
        if cur.kkt_relative <= opts.kkt_tolerance && (iterations == 0 || decrease <= opts.quotient_tolerance) {
            converged = true;
            break;
        }
        let g2 = dot(&cur.grad, &cur.grad);
        let mut tau = step.clamp(MIN_STEP, MAX_STEP);
        let accepted = loop {
            if tau < MIN_STEP {
                break None;
            }
            let mut trial: Vec<f64> = z.iter().zip(&cur.grad).map(|(x, g)| x - tau * g).collect();
            let next = prob.project(&mut trial).and_then(|_| prob.eval(&trial));
            match next {
                Ok(e) if e.ln_lambda <= cur.ln_lambda - opts.armijo * tau * g2 => break Some((trial, e)),
                Ok(_) | Err(Error::Inadmissible) | Err(Error::NonFinite(_)) => tau *= opts.backtrack,
                Err(other) => return Err(other),
            }
        };
        let Some((trial, next)) = accepted else {
            // no descent left at machine precision
            log::debug!("line search stalled at iteration {iterations}");
            converged = cur.kkt_relative <= opts.kkt_tolerance;
            break;
        };
        iterations += 1;
        let s: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { MAX_STEP };
        decrease = cur.ln_lambda - next.ln_lambda;
        assert!(decrease >= 0.0, "quotient increased at iteration {iterations}");
        z = trial;
        cur = next;
        let lambda = cur.ln_lambda.exp();
        if !lambda.is_finite() {
            return Err(Error::Diverged {
                iteration: iterations,
                reason: "quotient overflowed".into(),
                trace: tail(&history),
            });
        }
        history.push(lambda);
        if iterations % 2000 == 0 {
            log::debug!(
                "p = {} it {iterations}: lambda^(1/p) = {:.12}, kkt_rel = {:.3e}",
                sys.params.p,
                (cur.ln_lambda / sys.params.p).exp(),
                cur.kkt_relative
            );
        }
    }
    if iterations == opts.max_iterations && !converged {
        converged = cur.kkt_relative <= opts.kkt_tolerance && decrease <= opts.quotient_tolerance;
    }

    let n = prob.n;
    let u = GridFunction::new(domain.clone(), z[..n].to_vec())?;
    let v = GridFunction::new(domain.clone(), z[n..].to_vec())?;
    let lambda = cur.ln_lambda.exp();
    let (kkt_u, kkt_v) = residuals(sys, &u, &v, lambda)?;
    Ok(EigenPair {
        u,
        v,
        params: sys.params,
        lambda,
        ln_lambda: cur.ln_lambda,
        kkt_u,
        kkt_v,
        kkt_relative: cur.kkt_relative,
        iterations,
        converged,
        history,
    })
}

fn residuals(sys: &SystemEnergy, u: &GridFunction, v: &GridFunction, lambda: f64) -> Result<(f64, f64)> {
    let (a, b, p) = (sys.params.alpha(), sys.params.beta(), sys.params.p);
    let (lu, lv) = rayon::join(|| sys.first.apply(u), || sys.second.apply(v));
    let (lu, lv) = (lu?, lv?);
    let mask = u.domain().interior_mask();
    let (mut ru, mut rv) = (0.0f64, 0.0f64);
    for i in 0..u.len() {
        if !mask[i] {
            continue;
        }
        let (x, y) = (u.values()[i], v.values()[i]);
        let fu = lambda * (a / p) * signed_pow_or_zero(x, a - 1.0) * y.abs().powf(b);
        let fv = lambda * (b / p) * x.abs().powf(a) * signed_pow_or_zero(y, b - 1.0);
        ru = ru.max((lu.values()[i] - fu).abs());
        rv = rv.max((lv.values()[i] - fv).abs());
    }
    Ok((ru, rv))
}

/// `|x|^{q} sign(x)`, zero at zero even for `q < 0`.
fn signed_pow_or_zero(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        crate::energy::signed_pow(x, q)
    }
}

/// Strong-form residuals `(res_u, res_v)` of both equations at the pair's λ.
pub fn kkt_residual(pair: &EigenPair, params: &FracParams) -> Result<(f64, f64)> {
    let sys = SystemEnergy::new(pair.u.domain().clone(), *params)?;
    residuals(&sys, &pair.u, &pair.v, pair.lambda)
}

/// Residuals of an arbitrary pair at a given λ, without normalizing it.
pub fn kkt_residual_at(u: &GridFunction, v: &GridFunction, params: &FracParams, lambda: f64) -> Result<(f64, f64)> {
    u.check_same_domain(v)?;
    let sys = SystemEnergy::new(u.domain().clone(), *params)?;
    residuals(&sys, u, v, lambda)
}

/// The extremal cone pair of the limit problem, see [`cone_pair`], with `Γ = gamma`.
pub fn init_cone(domain: &Arc<GridDomain>, params: &FracParams) -> (GridFunction, GridFunction) {
    cone_pair(domain, params.gamma, params.r, params.s)
}

/// Uniform positive values in `[0.05, 1)` on interior nodes.
pub fn init_random(domain: &Arc<GridDomain>, seed: u64) -> (GridFunction, GridFunction) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = GridFunction::random(domain.clone(), &mut rng, 0.05, 1.0);
    let v = GridFunction::random(domain.clone(), &mut rng, 0.05, 1.0);
    (u, v)
}

/// Solves from random positive starts with the given seeds and returns the
/// largest sup-distance between any two normalized results.
pub fn simplicity_probe_seeds(
    domain: &Arc<GridDomain>,
    params: &FracParams,
    opts: &SolverOptions,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.len() < 2 {
        return Err(Error::Precondition("simplicity probe needs at least two trials".into()));
    }
    let sys = SystemEnergy::new(domain.clone(), *params)?;
    let pairs: Vec<EigenPair> = seeds
        .par_iter()
        .map(|&seed| {
            let (u, v) = init_random(domain, seed);
            let pair = minimize_with(&sys, (&u, &v), opts)?;
            if !pair.converged {
                return Err(Error::NotConverged(format!(
                    "simplicity trial with seed {seed} stopped after {} iterations (kkt_rel {:.3e})",
                    pair.iterations, pair.kkt_relative
                )));
            }
            Ok(pair)
        })
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let du = pairs[i].u.abs().sup_distance(&pairs[j].u.abs())?;
            let dv = pairs[i].v.abs().sup_distance(&pairs[j].v.abs())?;
            worst = worst.max(du).max(dv);
        }
    }
    Ok(worst)
}

/// [`simplicity_probe_seeds`] with seeds `opts.seed, opts.seed + 1, …`.
pub fn simplicity_probe(
    domain: &Arc<GridDomain>,
    params: &FracParams,
    opts: &SolverOptions,
    trials: usize,
) -> Result<f64> {
    let seeds: Vec<u64> = (0..trials as u64).map(|k| opts.seed.wrapping_add(k)).collect();
    simplicity_probe_seeds(domain, params, opts, &seeds)
}

/// Checks that `f(x) = a x^p − (a+b) x^α + b` vanishes at 1 and is positive
/// and decreasing on a uniform sample of (0,1).
pub fn scaling_polynomial_check(a: f64, b: f64, p: f64, alpha: f64) -> Result<bool> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Precondition(format!("a = {a}, b = {b} must be positive")));
    }
    if !(alpha > 0.0 && alpha < p) {
        return Err(Error::Precondition(format!("need 0 < alpha < p, got alpha = {alpha}, p = {p}")));
    }
    if (a / (a + b) - alpha / p).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "a/(a+b) = {} differs from alpha/p = {}",
            a / (a + b),
            alpha / p
        )));
    }
    let f = |x: f64| a * x.powf(p) - (a + b) * x.powf(alpha) + b;
    let df = |x: f64| a * p * x.powf(p - 1.0) - (a + b) * alpha * x.powf(alpha - 1.0);
    let at_one = f(1.0).abs() <= 1e-12 * (a + b);
    const SAMPLES: usize = 2000;
    let inside = (1..SAMPLES).all(|k| {
        let x = k as f64 / SAMPLES as f64;
        f(x) > 0.0 && df(x) < 0.0
    });
    Ok(at_one && inside)
}
