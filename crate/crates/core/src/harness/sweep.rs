//! The p-sweep: warm-started solves for increasing p and the limit diagnostics.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Format};
use crate::eigensolver::{init_cone, minimize_with, EigenPair};
use crate::energy::{GridFunction, SystemEnergy};
use crate::error::{Error, Result};
use crate::geometry::GridDomain;
use crate::infinity::{lambda_infinity_geometric, lambda_infinity_variational, limit_residual, sup_geometric_mean};

/// One row of `sweep.csv`; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub lambda_root: f64,
    pub lambda_inf: f64,
    pub abs_err: f64,
    pub iterations: usize,
    pub kkt_u: f64,
    pub kkt_v: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Contents of `limit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub lambda_inf_geometric: f64,
    pub lambda_inf_variational: f64,
    pub inradius: f64,
    pub gamma: f64,
    pub r: f64,
    pub s: f64,
    pub residual_u: f64,
    pub residual_v: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub pairs: Vec<EigenPair>,
    /// Sup distances between consecutive pairs, each scaled to `‖u^Γ v^{1−Γ}‖_∞ = 1`.
    pub successive_distances: Vec<f64>,
    /// Limit quantities of the last pair of the sweep.
    pub limit: LimitSummary,
}

/// Scales `(u, v)` jointly so that `max u^Γ v^{1−Γ} = 1`.
pub fn limit_normalized(u: &GridFunction, v: &GridFunction, gamma: f64) -> Result<(GridFunction, GridFunction)> {
    let m = sup_geometric_mean(u, v, gamma)?;
    if !(m > 0.0) {
        return Err(Error::Inadmissible);
    }
    Ok((u.abs().scaled(1.0 / m), v.abs().scaled(1.0 / m)))
}

/// Limit residual and variational value of a pair, after limit normalization.
pub fn limit_summary(domain: &Arc<GridDomain>, u: &GridFunction, v: &GridFunction, gamma: f64, r: f64, s: f64) -> Result<LimitSummary> {
    let lam = lambda_infinity_geometric(domain, gamma, r, s);
    let (nu, nv) = limit_normalized(u, v, gamma)?;
    let (residual_u, residual_v) = limit_residual(&nu, &nv, gamma, r, s, lam)?;
    Ok(LimitSummary {
        lambda_inf_geometric: lam,
        lambda_inf_variational: lambda_infinity_variational(&nu, &nv, gamma, r, s)?,
        inradius: domain.inradius(),
        gamma,
        r,
        s,
        residual_u,
        residual_v,
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let domain = config.build_domain()?;
    let f = config.fractional;
    let lambda_inf = lambda_infinity_geometric(&domain, f.gamma, f.r, f.s);
    let mut records = Vec::with_capacity(config.sweep.len());
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(config.sweep.len());

    for &p in &config.sweep {
        let params = config.params(p)?;
        let start = Instant::now();
        let sys = SystemEnergy::new(domain.clone(), params)?;
        let pair = match pairs.last() {
            Some(prev) => minimize_with(&sys, (&prev.u, &prev.v), &config.solver)?,
            None => {
                let (u0, v0) = init_cone(&domain, &params);
                minimize_with(&sys, (&u0, &v0), &config.solver)?
            }
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        if !pair.converged {
            log::warn!(
                "p = {p}: not converged after {} iterations (kkt_rel {:.3e})",
                pair.iterations,
                pair.kkt_relative
            );
        }
        let lambda_root = pair.lambda_root();
        log::info!(
            "p = {p}: lambda^(1/p) = {lambda_root:.9}, {} iterations, {wall_time_s:.2} s",
            pair.iterations
        );
        records.push(SweepRecord {
            p,
            alpha: params.alpha(),
            beta: params.beta(),
            lambda: pair.lambda,
            lambda_root,
            lambda_inf,
            abs_err: (lambda_root - lambda_inf).abs(),
            iterations: pair.iterations,
            kkt_u: pair.kkt_u,
            kkt_v: pair.kkt_v,
            converged: pair.converged,
            wall_time_s,
        });
        pairs.push(pair);
    }

    let normalized: Vec<(GridFunction, GridFunction)> = pairs
        .iter()
        .map(|pr| limit_normalized(&pr.u, &pr.v, f.gamma))
        .collect::<Result<_>>()?;
    let successive_distances = normalized
        .windows(2)
        .map(|w| Ok(w[0].0.sup_distance(&w[1].0)?.max(w[0].1.sup_distance(&w[1].1)?)))
        .collect::<Result<Vec<f64>>>()?;
    let last = pairs.last().expect("sweep is non-empty");
    let limit = limit_summary(&domain, &last.u, &last.v, f.gamma, f.r, f.s)?;
    Ok(SweepOutcome {
        records,
        pairs,
        successive_distances,
        limit,
    })
}

/// `{p}` without a trailing `.0` for integral values.
fn p_label(p: f64) -> String {
    format!("{p}")
}

pub fn write_field(path: &Path, w: &GridFunction) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for (i, x) in w.values().iter().enumerate() {
        writeln!(out, "{i} {x:.17e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pair_fields(dir: &Path, pair: &EigenPair) -> Result<()> {
    let label = p_label(pair.params.p);
    write_field(&dir.join(format!("eigen_p{label}_u.txt")), &pair.u)?;
    write_field(&dir.join(format!("eigen_p{label}_v.txt")), &pair.v)
}

pub fn write_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_outputs(dir: &Path, formats: &[Format], outcome: &SweepOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    if formats.contains(&Format::Csv) {
        write_csv(&dir.join("sweep.csv"), &outcome.records)?;
    }
    if formats.contains(&Format::Fields) {
        for pair in &outcome.pairs {
            write_pair_fields(dir, pair)?;
        }
    }
    if formats.contains(&Format::Json) {
        let text = serde_json::to_string_pretty(&outcome.limit).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(dir.join("limit.json"), text + "\n")?;
    }
    Ok(())
}
