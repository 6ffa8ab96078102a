//! Discrete Gagliardo energies of zero-extended grid functions.
//!
//! For a node set `x_i` with cell volume `h^N`, the full-space seminorm of a
//! function extended by zero is
//!
//! ```text
//! [w]^p = Σ_{i≠j} |w_i − w_j|^p |x_i − x_j|^{−(N+tp)} h^{2N}
//!       + 2 Σ_i |w_i|^p T_i h^N,
//! ```
//!
//! where `T_i` is the exterior kernel mass from
//! [`GridDomain::exterior_tail`]. Dropping the second sum gives the Ω×Ω
//! seminorm `|w|_{t,p}^p`. Diagonal pairs carry a zero numerator and are
//! skipped.
//!
//! For `p > 32` every term is accumulated as a logarithm and reduced with a
//! shifted sum, so the energy of a normalized function stays representable
//! up to p = 128 and beyond.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, sphere_measure, GridDomain, Point};
use crate::reduce::{combine_log_sums, log_add_exp, pairwise_sum, LogSum};

/// Above this exponent the energies are accumulated in log form.
pub const LOG_DOMAIN_THRESHOLD: f64 = 32.0;

/// Node values of a function on a domain; zero everywhere outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != domain.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a domain of {} nodes",
                values.len(),
                domain.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values"));
        }
        Ok(GridFunction { domain, values })
    }

    pub fn zeros(domain: Arc<GridDomain>) -> GridFunction {
        let values = vec![0.0; domain.len()];
        GridFunction { domain, values }
    }

    /// Samples `f` at the nodes; boundary nodes are forced to zero.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn(&Point) -> f64) -> Result<GridFunction> {
        let values = domain
            .nodes()
            .iter()
            .zip(domain.interior_mask())
            .map(|(x, &inside)| if inside { f(x) } else { 0.0 })
            .collect();
        GridFunction::new(domain, values)
    }

    /// Uniform random values in `[lo, hi)` at interior nodes.
    pub fn random(domain: Arc<GridDomain>, rng: &mut impl Rng, lo: f64, hi: f64) -> GridFunction {
        let values = domain
            .interior_mask()
            .iter()
            .map(|&inside| if inside { rng.gen_range(lo..hi) } else { 0.0 })
            .collect();
        GridFunction { domain, values }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(self.domain.clone(), values)
    }

    pub fn abs(&self) -> GridFunction {
        GridFunction {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        GridFunction {
            domain: self.domain.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_same_domain(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain.same_grid(&other.domain) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_domain(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// `Σ |w_i|^p h^N`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let terms: Vec<f64> = self.values.iter().map(|v| v.abs().powf(p)).collect();
        pairwise_sum(&terms) * self.domain.cell_volume()
    }

    /// `ln Σ |w_i|^p h^N`, safe for large `p`.
    pub fn ln_lp_norm_pow(&self, p: f64) -> f64 {
        let logs: Vec<f64> = self.values.iter().map(|v| p * v.abs().ln()).collect();
        crate::reduce::log_sum_exp(&logs).ln() + self.domain.cell_volume().ln()
    }
}

/// Exponents of the system. `alpha = gamma·p`, `beta = p − alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub r: f64,
    pub s: f64,
    pub p: f64,
    pub gamma: f64,
}

impl FracParams {
    /// Checks `r, s, gamma ∈ (0,1)` and `p > 1`.
    pub fn new(r: f64, s: f64, p: f64, gamma: f64) -> Result<FracParams> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(r) || !open_unit(s) {
            return Err(Error::InvalidParameter(format!(
                "fractional orders must lie in (0,1): r = {r}, s = {s}"
            )));
        }
        if !open_unit(gamma) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (0,1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        Ok(FracParams { r, s, p, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.gamma * self.p
    }
    pub fn beta(&self) -> f64 {
        self.p - self.alpha()
    }

    pub fn with_p(&self, p: f64) -> Result<FracParams> {
        FracParams::new(self.r, self.s, p, self.gamma)
    }

    /// `min(alpha, beta) ≥ 1`.
    pub fn check_exponents(&self) -> Result<()> {
        if self.alpha().min(self.beta()) < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "min(alpha, beta) = {} < 1 at p = {}",
                self.alpha().min(self.beta()),
                self.p
            )));
        }
        Ok(())
    }

    /// `p·min(r, s) ≥ N`, required for the p → ∞ experiments.
    pub fn check_limit_regime(&self, dim: usize) -> Result<()> {
        if self.p * self.r.min(self.s) < dim as f64 {
            return Err(Error::InvalidParameter(format!(
                "p·min(r,s) = {} < N = {dim}",
                self.p * self.r.min(self.s)
            )));
        }
        Ok(())
    }
}

/// Kernel weights of `[·]_{t,p}` on one domain, ready for repeated use.
#[derive(Debug, Clone)]
pub struct Seminorm {
    domain: Arc<GridDomain>,
    t: f64,
    p: f64,
    /// `ln(|x_i − x_j|^{−(N+tp)} h^{2N})`, row-major, `-inf` on the diagonal.
    pair_log: Vec<f64>,
    /// Same weights in linear form; only used when `p ≤ LOG_DOMAIN_THRESHOLD`.
    pair: Vec<f64>,
    /// `ln(2 T_i h^N)`.
    tail_log: Vec<f64>,
}

enum Rows {
    Linear(Vec<f64>),
    Log(Vec<LogSum>),
}

impl Seminorm {
    pub fn new(domain: Arc<GridDomain>, t: f64, p: f64) -> Result<Seminorm> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("t = {t} must lie in (0,1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
        }
        let n = domain.len();
        let dim = domain.dim() as f64;
        let exponent = dim + t * p;
        let ln_h2n = 2.0 * domain.cell_volume().ln();
        let nodes = domain.nodes();
        let pair_log: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    f64::NEG_INFINITY
                } else {
                    -exponent * distance(&nodes[i], &nodes[j]).ln() + ln_h2n
                }
            })
            .collect();
        let pair = if p <= LOG_DOMAIN_THRESHOLD {
            pair_log.iter().map(|z| z.exp()).collect()
        } else {
            Vec::new()
        };
        let ln_2hn = (2.0 * domain.cell_volume()).ln();
        let tail_log = domain
            .exterior_tail(t, p)?
            .into_iter()
            .map(|w| w.value.ln() + ln_2hn)
            .collect();
        Ok(Seminorm {
            domain,
            t,
            p,
            pair_log,
            pair,
            tail_log,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn log_domain(&self) -> bool {
        self.p > LOG_DOMAIN_THRESHOLD
    }

    fn check(&self, w: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.domain, w.domain()) || self.domain.same_grid(w.domain()) {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Exterior terms `ln(2|w_i|^p T_i h^N)`; a nonzero value on a boundary
    /// node has infinite energy.
    fn exterior_logs(&self, w: &[f64]) -> Result<Vec<f64>> {
        w.iter()
            .zip(&self.tail_log)
            .map(|(&v, &lt)| {
                if v == 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else if lt.is_infinite() {
                    Err(Error::NonFinite("nonzero value on a boundary node"))
                } else {
                    Ok(self.p * v.abs().ln() + lt)
                }
            })
            .collect()
    }

    /// Upper-triangle row sums, doubled later.
    fn half_rows(&self, w: &[f64], log_form: bool) -> Rows {
        let n = w.len();
        let p = self.p;
        if log_form {
            Rows::Log(
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let row = &self.pair_log[i * n..(i + 1) * n];
                        let logs: Vec<f64> = (i + 1..n)
                            .map(|j| p * (w[i] - w[j]).abs().ln() + row[j])
                            .collect();
                        crate::reduce::log_sum_exp(&logs)
                    })
                    .collect(),
            )
        } else {
            Rows::Linear(
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let row = &self.pair[i * n..(i + 1) * n];
                        let mut acc = 0.0;
                        for j in i + 1..n {
                            acc += (w[i] - w[j]).abs().powf(p) * row[j];
                        }
                        acc
                    })
                    .collect(),
            )
        }
    }

    /// Natural log of the energy; `-inf` for the zero function.
    pub fn ln_value(&self, w: &GridFunction, include_exterior: bool) -> Result<f64> {
        self.check(w)?;
        self.ln_value_raw(w.values(), include_exterior)
    }

    pub(crate) fn ln_value_raw(&self, w: &[f64], include_exterior: bool) -> Result<f64> {
        let ext = if include_exterior {
            self.exterior_logs(w)?
        } else {
            Vec::new()
        };
        let ln_pairs = match self.half_rows(w, self.log_domain()) {
            Rows::Linear(rows) => (2.0 * pairwise_sum(&rows)).ln(),
            Rows::Log(rows) => combine_log_sums(&rows).ln() + std::f64::consts::LN_2,
        };
        let ln_ext = crate::reduce::log_sum_exp(&ext).ln();
        let v = log_add_exp(ln_pairs, ln_ext);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite("seminorm"));
        }
        Ok(v)
    }

    /// The energy itself. Fails when it overflows f64.
    pub fn value(&self, w: &GridFunction, include_exterior: bool) -> Result<f64> {
        let v = self.ln_value(w, include_exterior)?.exp();
        if !v.is_finite() {
            return Err(Error::NonFinite("seminorm (overflow)"));
        }
        Ok(v)
    }

    /// Discrete fractional p-Laplacian
    /// `g_i = 2 Σ_{j≠i} |w_i−w_j|^{p−2}(w_i−w_j) K_ij h^N + 2|w_i|^{p−2}w_i T_i`,
    /// i.e. `∂[w]^p/∂w_i / (p h^N)`.
    pub fn apply(&self, w: &GridFunction) -> Result<GridFunction> {
        self.check(w)?;
        let n = w.len();
        let vals = w.values();
        let p = self.p;
        let ln_hn = self.domain.cell_volume().ln();
        let ext = self.exterior_logs(vals)?;
        let ln2 = std::f64::consts::LN_2;
        let out: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.pair_log[i * n..(i + 1) * n];
                // (ln magnitude, sign) of each contribution
                let mut terms: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
                for j in 0..n {
                    let d = vals[i] - vals[j];
                    if j == i || d == 0.0 {
                        continue;
                    }
                    terms.push((ln2 + (p - 1.0) * d.abs().ln() + row[j] - ln_hn, d.signum()));
                }
                if vals[i] != 0.0 {
                    // ext[i] = ln(2 T_i h^N |w_i|^p)
                    terms.push((ext[i] - ln_hn - vals[i].abs().ln(), vals[i].signum()));
                }
                signed_exp_sum(&terms)
            })
            .collect();
        if out.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("fractional p-Laplacian"));
        }
        w.with_values(out)
    }

    /// `(ln E, ∇E / E)` where `E = [w]^p` with exterior terms.
    ///
    /// Both outputs stay finite for any p because every term is divided by
    /// `E` before it is exponentiated.
    pub fn ln_value_and_scaled_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = w.len();
        let p = self.p;
        let ext = self.exterior_logs(w)?;
        // Per row: energy partial as LogSum, gradient partial as (shift, signed scaled sum).
        let rows: Vec<(LogSum, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.pair_log[i * n..(i + 1) * n];
                let mut z = Vec::with_capacity(n);
                let mut shift = f64::NEG_INFINITY;
                for j in 0..n {
                    let d = w[i] - w[j];
                    let zij = if j == i || d == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        p * d.abs().ln() + row[j]
                    };
                    shift = shift.max(zij);
                    z.push(zij);
                }
                if shift == f64::NEG_INFINITY {
                    return (LogSum::ZERO, 0.0);
                }
                let mut e = Vec::with_capacity(n);
                let mut g = Vec::with_capacity(n);
                for j in 0..n {
                    if z[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    let d = w[i] - w[j];
                    let x = (z[j] - shift).exp();
                    e.push(x);
                    g.push(x / d);
                }
                (
                    LogSum {
                        shift,
                        scaled: pairwise_sum(&e),
                    },
                    pairwise_sum(&g),
                )
            })
            .collect();
        let row_sums: Vec<LogSum> = rows.iter().map(|r| r.0).collect();
        let ln_pairs = combine_log_sums(&row_sums).ln();
        let ln_ext = crate::reduce::log_sum_exp(&ext).ln();
        let ln_e = log_add_exp(ln_pairs, ln_ext);
        if !ln_e.is_finite() {
            return Err(Error::NonFinite("seminorm gradient"));
        }
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                let (ls, gs) = rows[i];
                let pair = if ls.is_zero() {
                    0.0
                } else {
                    2.0 * p * gs * (ls.shift - ln_e).exp()
                };
                let outer = if w[i] == 0.0 {
                    0.0
                } else {
                    p * (ext[i] - ln_e).exp() / w[i]
                };
                pair + outer
            })
            .collect();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("seminorm gradient"));
        }
        Ok((ln_e, grad))
    }
}

/// `Σ sign_k exp(l_k)` with a common shift.
fn signed_exp_sum(terms: &[(f64, f64)]) -> f64 {
    let shift = terms
        .iter()
        .map(|t| t.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return 0.0;
    }
    let scaled: Vec<f64> = terms.iter().map(|&(l, s)| s * (l - shift).exp()).collect();
    pairwise_sum(&scaled) * shift.exp()
}

/// `[w]_{t,p}^p` (or the Ω×Ω part only when `include_exterior` is false).
pub fn seminorm_p(w: &GridFunction, t: f64, p: f64, include_exterior: bool) -> Result<f64> {
    Seminorm::new(w.domain().clone(), t, p)?.value(w, include_exterior)
}

/// `ln Σ |u_i|^α |v_i|^β h^N`.
pub fn ln_coupling(u: &GridFunction, v: &GridFunction, params: &FracParams) -> Result<f64> {
    u.check_same_domain(v)?;
    Ok(ln_coupling_raw(u.values(), v.values(), params, u.domain().cell_volume()))
}

pub(crate) fn ln_coupling_raw(u: &[f64], v: &[f64], params: &FracParams, hn: f64) -> f64 {
    let (a, b) = (params.alpha(), params.beta());
    let logs: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(x, y)| a * x.abs().ln() + b * y.abs().ln())
        .collect();
    crate::reduce::log_sum_exp(&logs).ln() + hn.ln()
}

/// `|(u,v)|_{α,β}^p = Σ |u_i|^α |v_i|^β h^N`.
pub fn coupling(u: &GridFunction, v: &GridFunction, params: &FracParams) -> Result<f64> {
    Ok(ln_coupling(u, v, params)?.exp())
}

/// Both energies of the system at one `p`.
#[derive(Debug, Clone)]
pub struct SystemEnergy {
    pub params: FracParams,
    pub first: Seminorm,
    pub second: Seminorm,
}

impl SystemEnergy {
    pub fn new(domain: Arc<GridDomain>, params: FracParams) -> Result<SystemEnergy> {
        Ok(SystemEnergy {
            first: Seminorm::new(domain.clone(), params.r, params.p)?,
            second: Seminorm::new(domain, params.s, params.p)?,
            params,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.first.domain()
    }

    /// `ln λ(u,v) = ln([u]_r^p + [v]_s^p) − ln |(u,v)|^p`.
    pub fn ln_rayleigh(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        u.check_same_domain(v)?;
        self.first.check(u)?;
        self.ln_rayleigh_raw(u.values(), v.values())
    }

    pub(crate) fn ln_rayleigh_raw(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let lc = ln_coupling_raw(u, v, &self.params, self.domain().cell_volume());
        if lc == f64::NEG_INFINITY || lc < (1e-300f64).ln() {
            return Err(Error::Inadmissible);
        }
        let a = self.first.ln_value_raw(u, true)?;
        let b = self.second.ln_value_raw(v, true)?;
        Ok(log_add_exp(a, b) - lc)
    }

    pub fn rayleigh(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let v = self.ln_rayleigh(u, v)?.exp();
        if !v.is_finite() {
            return Err(Error::NonFinite("rayleigh quotient"));
        }
        Ok(v)
    }
}

/// `([u]_{r,p}^p + [v]_{s,p}^p) / |(u,v)|_{α,β}^p` with exterior terms.
pub fn rayleigh(u: &GridFunction, v: &GridFunction, params: &FracParams) -> Result<f64> {
    SystemEnergy::new(u.domain().clone(), *params)?.rayleigh(u, v)
}

pub fn frac_p_laplacian_apply(w: &GridFunction, t: f64, p: f64) -> Result<GridFunction> {
    Seminorm::new(w.domain().clone(), t, p)?.apply(w)
}

/// `|a|^q sign(a)`.
pub fn signed_pow(a: f64, q: f64) -> f64 {
    a.abs().powf(q) * a.signum()
}

/// Picone functional on node pairs:
/// `|φ(x)−φ(y)|^p − sgnpow(ψ(x)−ψ(y), p−1)·(φ(x)^p/ψ(x)^{p−1} − φ(y)^p/ψ(y)^{p−1})`.
pub fn picone_values(phi: &[f64], psi: &[f64], p: f64, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    if phi.len() != psi.len() {
        return Err(Error::DomainMismatch);
    }
    pairs
        .iter()
        .map(|&(x, y)| {
            for k in [x, y] {
                if k >= phi.len() {
                    return Err(Error::Precondition(format!("node {k} out of range")));
                }
                if !(psi[k] > 0.0) {
                    return Err(Error::Precondition(format!("psi must be positive at node {k}")));
                }
                if phi[k] < 0.0 {
                    return Err(Error::Precondition(format!("phi must be nonnegative at node {k}")));
                }
            }
            let ratio = |k: usize| phi[k].powf(p) / psi[k].powf(p - 1.0);
            Ok((phi[x] - phi[y]).abs().powf(p)
                - signed_pow(psi[x] - psi[y], p - 1.0) * (ratio(x) - ratio(y)))
        })
        .collect()
}

pub fn picone(phi: &GridFunction, psi: &GridFunction, p: f64, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    phi.check_same_domain(psi)?;
    picone_values(phi.values(), psi.values(), p, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `σ_N/(tp) · (diam Ω + 1)^{−tp}`.
pub fn poincare_constant(domain: &GridDomain, t: f64, p: f64) -> f64 {
    let tp = t * p;
    sphere_measure(domain.dim()) / tp * (domain.diameter() + 1.0).powf(-tp)
}

/// `[w]_{t,p}^p ≥ σ_N/(tp)·(diam Ω + 1)^{−tp}·‖w‖_p^p`.
pub fn poincare_check(w: &GridFunction, t: f64, p: f64) -> Result<PoincareCheck> {
    if w.sup_norm() == 0.0 {
        return Err(Error::Precondition("w must not vanish identically".into()));
    }
    let sn = Seminorm::new(w.domain().clone(), t, p)?;
    let ln_lhs = sn.ln_value(w, true)?;
    let ln_rhs = poincare_constant(w.domain(), t, p).ln() + w.ln_lp_norm_pow(p);
    Ok(PoincareCheck {
        lhs: ln_lhs.exp(),
        rhs: ln_rhs.exp(),
        holds: ln_lhs >= ln_rhs,
    })
}

/// Both inequalities of the embedding lemma with `t = s − N/q`, evaluated
/// with interior-only seminorms and the discrete measure of Ω:
///
/// * `‖w‖_q ≤ |Ω|^{1/q−1/p} ‖w‖_p`
/// * `|w|_{t,q} ≤ diam(Ω)^{N/p} |Ω|^{2/q−2/p} |w|_{s,p}`
pub fn embedding_check(w: &GridFunction, s: f64, p: f64, q: f64) -> Result<bool> {
    let dom = w.domain();
    let dim = dom.dim() as f64;
    if !(s > 0.0 && s < 1.0) || !(q > dim / s && q < p) {
        return Err(Error::Precondition(format!(
            "need N/s < q < p, got N = {dim}, s = {s}, q = {q}, p = {p}"
        )));
    }
    let t = s - dim / q;
    // Relative slack for rounding in the equality cases.
    let slack = 1e-12;
    let ln_measure = dom.measure().ln();
    let ln_lq = w.ln_lp_norm_pow(q) / q;
    let ln_lp = w.ln_lp_norm_pow(p) / p;
    let first = ln_lq == f64::NEG_INFINITY || ln_lq <= (1.0 / q - 1.0 / p) * ln_measure + ln_lp + slack;

    let ln_tq = Seminorm::new(dom.clone(), t, q)?.ln_value(w, false)? / q;
    let ln_sp = Seminorm::new(dom.clone(), s, p)?.ln_value(w, false)? / p;
    let second = ln_tq == f64::NEG_INFINITY
        || ln_tq
            <= dim / p * dom.diameter().ln() + (2.0 / q - 2.0 / p) * ln_measure + ln_sp + slack;
    Ok(first && second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_node() -> Arc<GridDomain> {
        Arc::new(GridDomain::from_nodes_1d(0.0, 1.0, &[1.0 / 3.0, 2.0 / 3.0], 1.0 / 3.0).unwrap())
    }

    fn interval(n: usize) -> Arc<GridDomain> {
        Arc::new(GridDomain::build_interval(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn seminorm_of_zero_is_zero() {
        let w = GridFunction::zeros(interval(9));
        assert_eq!(seminorm_p(&w, 0.5, 2.0, true).unwrap(), 0.0);
        assert_eq!(seminorm_p(&w, 0.5, 40.0, true).unwrap(), 0.0);
    }

    #[test]
    fn two_node_hand_values() {
        let w = GridFunction::new(two_node(), vec![1.0, 0.0]).unwrap();
        assert_relative_eq!(seminorm_p(&w, 0.5, 2.0, true).unwrap(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(seminorm_p(&w, 0.5, 2.0, false).unwrap(), 2.0, epsilon = 1e-12);
        let params = FracParams::new(0.5, 0.5, 2.0, 0.5).unwrap();
        assert_relative_eq!(rayleigh(&w, &w, &params).unwrap(), 30.0, epsilon = 1e-11);
    }

    #[test]
    fn coupling_examples() {
        let d = interval(7);
        let one = GridFunction::from_fn(d.clone(), |_| 1.0).unwrap();
        let params = FracParams::new(0.5, 0.5, 3.0, 0.4).unwrap();
        assert_relative_eq!(coupling(&one, &one, &params).unwrap(), 1.0, epsilon = 1e-14);

        let d = interval(3);
        let u = GridFunction::new(d.clone(), vec![1.0, 0.0, 1.0]).unwrap();
        let v = GridFunction::new(d.clone(), vec![1.0, 1.0, 0.0]).unwrap();
        let params = FracParams::new(0.5, 0.5, 2.0, 0.5).unwrap();
        assert_relative_eq!(coupling(&u, &v, &params).unwrap(), 1.0 / 3.0, epsilon = 1e-14);

        let c = 1.7;
        let base = coupling(&one, &one, &params).unwrap();
        let scaled = coupling(&one.scaled(c), &one, &params).unwrap();
        assert_relative_eq!(scaled, base * c.powf(params.alpha()), max_relative = 1e-13);
    }

    #[test]
    fn zero_coupling_is_inadmissible() {
        let d = interval(3);
        let u = GridFunction::new(d.clone(), vec![1.0, 0.0, 0.0]).unwrap();
        let v = GridFunction::new(d, vec![0.0, 1.0, 0.0]).unwrap();
        let params = FracParams::new(0.5, 0.5, 2.0, 0.5).unwrap();
        assert_eq!(rayleigh(&u, &v, &params), Err(Error::Inadmissible));
    }

    #[test]
    fn domain_mismatch_is_reported() {
        let u = GridFunction::zeros(interval(5));
        let v = GridFunction::zeros(interval(7));
        let params = FracParams::new(0.5, 0.5, 2.0, 0.5).unwrap();
        assert_eq!(coupling(&u, &v, &params), Err(Error::DomainMismatch));
        let sn = Seminorm::new(interval(9), 0.5, 2.0).unwrap();
        assert_eq!(sn.value(&u, true), Err(Error::DomainMismatch));
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(0.0, 0.5, 2.0, 0.5).is_err());
        assert!(FracParams::new(0.5, 1.0, 2.0, 0.5).is_err());
        assert!(FracParams::new(0.5, 0.5, 1.0, 0.5).is_err());
        assert!(FracParams::new(0.5, 0.5, 2.0, 1.0).is_err());
        let p = FracParams::new(0.3, 0.6, 3.0, 0.25).unwrap();
        assert_eq!(p.alpha() + p.beta(), p.p);
        assert!(p.check_exponents().is_err());
        assert!(p.with_p(4.0).unwrap().check_exponents().is_ok());
        assert!(p.check_limit_regime(1).is_err());
        assert!(p.with_p(4.0).unwrap().check_limit_regime(1).is_ok());
    }

    #[test]
    fn apply_zero_and_linearity_at_p2() {
        let d = interval(11);
        let sn = Seminorm::new(d.clone(), 0.4, 2.0).unwrap();
        let z = sn.apply(&GridFunction::zeros(d.clone())).unwrap();
        assert!(z.values().iter().all(|&g| g == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
        let b = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
        let combo: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let ga = sn.apply(&a).unwrap();
        let gb = sn.apply(&b).unwrap();
        let gc = sn.apply(&a.with_values(combo).unwrap()).unwrap();
        for i in 0..d.len() {
            let expect = 2.0 * ga.values()[i] - 0.5 * gb.values()[i];
            assert_relative_eq!(gc.values()[i], expect, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    /// Central differences of the energy itself, independent of `apply`.
    fn fd_gradient(w: &GridFunction, t: f64, p: f64) -> Vec<f64> {
        let hn = w.domain().cell_volume();
        (0..w.len())
            .map(|i| {
                let step = 1e-6 * w.values()[i].abs().max(1e-2);
                let mut plus = w.values().to_vec();
                let mut minus = w.values().to_vec();
                plus[i] += step;
                minus[i] -= step;
                let ep = seminorm_p(&w.with_values(plus).unwrap(), t, p, true).unwrap();
                let em = seminorm_p(&w.with_values(minus).unwrap(), t, p, true).unwrap();
                (ep - em) / (2.0 * step) / (p * hn)
            })
            .collect()
    }

    #[test]
    fn apply_matches_finite_differences_at_p3() {
        let d = interval(9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = GridFunction::random(d, &mut rng, -1.0, 1.0);
        let g = frac_p_laplacian_apply(&w, 0.5, 3.0).unwrap();
        let fd = fd_gradient(&w, 0.5, 3.0);
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in g.values().iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn scaled_gradient_agrees_with_apply() {
        let d = interval(13);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = GridFunction::random(d.clone(), &mut rng, 0.1, 1.0);
        for p in [2.0, 3.5, 20.0] {
            let sn = Seminorm::new(d.clone(), 0.6, p).unwrap();
            let e = sn.value(&w, true).unwrap();
            let g = sn.apply(&w).unwrap();
            let (ln_e, sg) = sn.ln_value_and_scaled_grad(w.values()).unwrap();
            // two accumulation routes for the same energy
            assert_relative_eq!(ln_e, e.ln(), max_relative = 1e-12);
            for i in 0..d.len() {
                let expect = g.values()[i] * p * d.cell_volume() / e;
                assert_relative_eq!(sg[i], expect, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn log_domain_energy_is_finite_at_large_p() {
        let d = interval(41);
        let w = GridFunction::from_fn(d.clone(), |x| 3.0 * (1.0 - (2.0 * x[0] - 1.0).abs())).unwrap();
        let sn = Seminorm::new(d, 0.5, 128.0).unwrap();
        let ln_e = sn.ln_value(&w, true).unwrap();
        assert!(ln_e.is_finite() && ln_e > 0.0);
        let (ln_e2, g) = sn.ln_value_and_scaled_grad(w.values()).unwrap();
        assert_relative_eq!(ln_e, ln_e2, max_relative = 1e-12);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn overflow_is_reported_not_saturated() {
        let d = interval(41);
        let w = GridFunction::from_fn(d, |_| 1e6).unwrap();
        let e = frac_p_laplacian_apply(&w, 0.9, 120.0);
        assert_eq!(e, Err(Error::NonFinite("fractional p-Laplacian")));
    }

    #[test]
    fn picone_examples() {
        let psi = [0.7, 1.3, 2.0];
        let l = picone_values(&psi, &psi, 2.5, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(l.iter().all(|x| x.abs() < 1e-14));
        let l = picone_values(&[2.0, 1.0], &[1.0, 1.0], 2.0, &[(0, 1)]).unwrap();
        assert_relative_eq!(l[0], 1.0, epsilon = 1e-15);
        let l = picone_values(&[1.0, 2.0], &[2.0, 1.0], 2.0, &[(0, 1)]).unwrap();
        assert_relative_eq!(l[0], 4.5, epsilon = 1e-15);
        assert!(picone_values(&[1.0, 2.0], &[0.0, 1.0], 2.0, &[(0, 1)]).is_err());
        assert!(picone_values(&[-1.0, 2.0], &[1.0, 1.0], 2.0, &[(0, 1)]).is_err());
    }

    #[test]
    fn poincare_constant_on_unit_interval() {
        let d = interval(5);
        assert_relative_eq!(poincare_constant(&d, 0.5, 2.0), 1.0, epsilon = 1e-15);
        let mut v = vec![0.0; 5];
        v[2] = 1.0;
        let w = GridFunction::new(d.clone(), v).unwrap();
        assert!(poincare_check(&w, 0.5, 2.0).unwrap().holds);
        assert!(poincare_check(&GridFunction::zeros(d), 0.5, 2.0).is_err());
    }

    #[test]
    fn embedding_examples() {
        let d = interval(21);
        let c = GridFunction::from_fn(d.clone(), |_| 0.8).unwrap();
        assert!(embedding_check(&c, 0.9, 40.0, 20.0).unwrap());
        // first inequality is an equality for constants when |Ω| = 1
        assert_relative_eq!(c.lp_norm_pow(20.0).powf(1.0 / 20.0), c.lp_norm_pow(40.0).powf(1.0 / 40.0), max_relative = 1e-13);
        assert!(embedding_check(&GridFunction::zeros(d.clone()), 0.9, 40.0, 20.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = GridFunction::random(d.clone(), &mut rng, -1.0, 1.0);
        assert!(embedding_check(&w, 0.9, 40.0, 20.0).unwrap());
        assert!(embedding_check(&w, 0.9, 40.0, 1.0).is_err());
        assert!(embedding_check(&w, 0.9, 10.0, 20.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn absolute_value_does_not_increase_energy(
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            p in 1.5f64..6.0,
            t in 0.1f64..0.9,
        ) {
            let d = interval(9);
            let w = GridFunction::new(d, vals).unwrap();
            let e = seminorm_p(&w, t, p, true).unwrap();
            let ea = seminorm_p(&w.abs(), t, p, true).unwrap();
            prop_assert!(ea <= e * (1.0 + 1e-12));
        }

        #[test]
        fn rayleigh_is_scale_invariant(
            vals in proptest::collection::vec(0.05f64..2.0, 7),
            c in 1e-3f64..1e3,
            p in 2.0f64..48.0,
        ) {
            let d = interval(7);
            let u = GridFunction::new(d.clone(), vals.clone()).unwrap();
            let v = GridFunction::new(d.clone(), vals.iter().rev().copied().collect()).unwrap();
            let sys = SystemEnergy::new(d, FracParams::new(0.4, 0.7, p, 0.3).unwrap()).unwrap();
            let a = sys.ln_rayleigh(&u, &v).unwrap();
            let b = sys.ln_rayleigh(&u.scaled(c), &v.scaled(c)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn picone_is_nonnegative(
            phi in proptest::collection::vec(0.0f64..3.0, 2),
            psi in proptest::collection::vec(1e-3f64..3.0, 2),
            p in 1.1f64..5.0,
        ) {
            let l = picone_values(&phi, &psi, p, &[(0, 1), (1, 0)]).unwrap();
            let scale = phi.iter().fold(1.0f64, |m, x| m.max(x.powf(p)));
            prop_assert!(l.iter().all(|&x| x >= -1e-10 * scale));
        }
    }
}
