//! The four batch commands: verify, solve, solve-sde, convergence.
//!
//! Exit-code contract: 0 success, 1 numerical or check failure,
//! 2 configuration error. All artifacts land in the output directory;
//! CSV bytes depend only on (config, seed).

use crate::config::RunConfig;
use crate::output::{write_json, CsvWriter};
use paraman::fields::{
    check_geometry_compat, check_growth, check_parabolicity, CoefficientModel,
};
use paraman::galerkin::AssemblyWorkspace;
use paraman::integrate::{solve, Scheme, SolverConfig};
use paraman::spectral::{sobolev_norm, synthesize_values, SpectralVector};
use paraman::stochastic::{holder_half_check, run_ensemble, EnsembleConfig};
use paraman::verify::{basis_checks, grid_checks, identity_suite, CheckItem};
use serde_json::json;
use std::path::Path;
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// A required structural check failed (exit 1).
    Check(String),
    /// The computation itself failed (exit 1).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Check(_) | CliError::Numerical(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Check(m) | CliError::Numerical(m) => m,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("creating {}: {e}", dir.display())))
}

fn check_json(item: &CheckItem, required: bool) -> serde_json::Value {
    json!({
        "name": item.name,
        "value": item.value,
        "threshold": item.threshold,
        "pass": item.pass,
        "required": required,
    })
}

fn basis_metadata(basis: &paraman::geometry::EigenBasis) -> serde_json::Value {
    json!({
        "n": basis.n(),
        "mu": basis.mu,
        "lambda": basis.lambda,
        "labels": basis.labels,
    })
}

fn versions() -> serde_json::Value {
    json!({ "paraman": env!("CARGO_PKG_VERSION") })
}

/// Structural model checks shared by the commands; returns (json items,
/// list of failed required names).
fn model_check_reports(
    config: &RunConfig,
    model: &CoefficientModel,
    grid: &paraman::geometry::QuadratureGrid,
    require_growth: bool,
    require_compat: bool,
) -> (Vec<serde_json::Value>, Vec<String>) {
    let lambda_samples = config.lambda_samples(model);
    let mut items = Vec::new();
    let mut failed = Vec::new();

    let parab = check_parabolicity(model, grid, &lambda_samples);
    items.push(json!({
        "name": "parabolicity",
        "min_eigenvalue": parab.min_eigenvalue,
        "declared_c": parab.declared_c,
        "strict": parab.strict,
        "pass": parab.pass,
        "required": true,
    }));
    if !parab.pass {
        failed.push("parabolicity".into());
    }

    let growth = check_growth(model, grid, &lambda_samples);
    items.push(json!({
        "name": "growth_bound",
        "empirical_c": growth.empirical_c,
        "declared_c": growth.declared_c,
        "pass": growth.pass,
        "required": require_growth,
    }));
    if require_growth && !growth.pass {
        failed.push("growth_bound".into());
    }

    let compat = check_geometry_compat(model, grid, &lambda_samples);
    items.push(json!({
        "name": "geometry_compatibility",
        "max_residual": compat.max_residual,
        "pass": compat.pass,
        "required": require_compat,
    }));
    if require_compat && !compat.pass {
        failed.push("geometry_compatibility".into());
    }

    (items, failed)
}

/// `verify`: the full identity suite plus structural checks; exit 0 iff all
/// required checks pass.
pub fn cmd_verify(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let (grid, basis) = config
        .build_geometry()
        .map_err(CliError::Config)?;
    let model = config.build_model().map_err(CliError::Config)?;

    let mut items = Vec::new();
    let mut failed: Vec<String> = Vec::new();
    for item in grid_checks(&grid).iter().chain(basis_checks(&grid, &basis).iter()) {
        if !item.pass {
            failed.push(item.name.clone());
        }
        items.push(check_json(item, true));
    }
    for item in identity_suite(&grid, &basis, config.verify.seed, config.verify.triples) {
        if !item.pass {
            failed.push(item.name.clone());
        }
        items.push(check_json(&item, true));
    }
    let (model_items, model_failed) = model_check_reports(
        config,
        &model,
        &grid,
        config.verify.require_growth,
        config.verify.require_compat,
    );
    items.extend(model_items);
    failed.extend(model_failed);

    let report = json!({
        "command": "verify",
        "config": config,
        "basis": basis_metadata(&basis),
        "checks": items,
        "failed_required": failed,
        "status": if failed.is_empty() { "ok" } else { "check_failure" },
        "versions": versions(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_json(&out_dir.join("verify.json"), &report).map_err(CliError::Config)?;

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "required checks failed: {}",
            failed.join(", ")
        )))
    }
}

fn solver_preconditions(
    config: &RunConfig,
    model: &CoefficientModel,
    grid: &paraman::geometry::QuadratureGrid,
) -> Result<Vec<serde_json::Value>, CliError> {
    let lambda_samples = config.lambda_samples(model);
    let parab = check_parabolicity(model, grid, &lambda_samples);
    let semidefinite_ok = config.solver.epsilon > 0.0 && parab.min_eigenvalue >= -1e-12;
    if !parab.pass && !semidefinite_ok {
        return Err(CliError::Check(format!(
            "model is not strictly parabolic (min eigenvalue {:.3e}) and ε = {} does not regularize it",
            parab.min_eigenvalue, config.solver.epsilon
        )));
    }
    let (items, _) = model_check_reports(config, model, grid, false, false);
    Ok(items)
}

/// `solve`: deterministic run with monitors and snapshots on disk.
pub fn cmd_solve(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let (grid, basis) = config.build_geometry().map_err(CliError::Config)?;
    let model = config.build_model().map_err(CliError::Config)?;
    let u0 = config.build_initial(&basis).map_err(CliError::Config)?;
    let check_items = solver_preconditions(config, &model, &grid)?;

    let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, config.solver.epsilon);
    if config.scheme() == Scheme::Imex && !model.is_linear_diffusion() {
        return Err(CliError::Config(
            "scheme \"imex\" requires a diffusion linear in λ; use \"rk4\"".into(),
        ));
    }
    let solver_config = SolverConfig {
        dt: config.solver.dt,
        t_end: config.solver.t_end,
        scheme: config.scheme(),
        output_stride: config.solver.output_stride,
    };

    let run = match solve(&ws, &u0, &solver_config) {
        Ok(run) => run,
        Err(err) => {
            let report = json!({
                "command": "solve",
                "config": config,
                "basis": basis_metadata(&basis),
                "checks": check_items,
                "status": "error",
                "error": err.to_string(),
                "versions": versions(),
                "wall_time_s": started.elapsed().as_secs_f64(),
            });
            write_json(&out_dir.join("run.json"), &report).map_err(CliError::Config)?;
            return Err(CliError::Numerical(err.to_string()));
        }
    };

    // monitors.csv: t, L2, H1, Hm1_dt, energy_residual, min_u, max_u.
    let mut monitors = CsvWriter::new("t,L2,H1,Hm1_dt,energy_residual,min_u,max_u");
    for (m, entry) in run.ledger.entries.iter().enumerate() {
        monitors.row(&[
            entry.t,
            run.states[m].norm(),
            sobolev_norm(&basis, &run.states[m], 1.0),
            entry.dt_hminus1,
            run.ledger.identity_residual(m),
            entry.min_u,
            entry.max_u,
        ]);
    }
    monitors
        .write_to(&out_dir.join("monitors.csv"))
        .map_err(CliError::Config)?;

    // snapshots.csv: t, node coordinates, u.
    let mut snapshots = CsvWriter::new("t,x1,x2,u");
    for (m, state) in run.states.iter().enumerate() {
        let values = synthesize_values(&basis, state);
        for (i, v) in values.iter().enumerate() {
            snapshots.row(&[run.times[m], grid.nodes[i][0], grid.nodes[i][1], *v]);
        }
    }
    snapshots
        .write_to(&out_dir.join("snapshots.csv"))
        .map_err(CliError::Config)?;

    let report = json!({
        "command": "solve",
        "config": config,
        "basis": basis_metadata(&basis),
        "checks": check_items,
        "status": "ok",
        "final_time": run.times.last(),
        "final_l2": run.final_state().norm(),
        "max_energy_residual": run.ledger.max_identity_residual(),
        "dt_hminus1_sq_integral": run.ledger.dt_hminus1_sq_integral(),
        "dual_bound_integral": run.ledger.dual_bound_integral(),
        "min_u": run.ledger.min_u(),
        "max_u": run.ledger.max_u(),
        "versions": versions(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_json(&out_dir.join("run.json"), &report).map_err(CliError::Config)
}

/// `solve-sde`: Monte Carlo ensemble of Euler–Maruyama paths.
pub fn cmd_solve_sde(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let started = Instant::now();
    if !config.stochastic.enabled {
        return Err(CliError::Config(
            "solve-sde needs stochastic.enabled = true".into(),
        ));
    }
    if config.solver.epsilon != 0.0 {
        return Err(CliError::Config(
            "the stochastic system carries no εΔ term; set solver.epsilon = 0".into(),
        ));
    }
    let (grid, basis) = config.build_geometry().map_err(CliError::Config)?;
    let model = config.build_model().map_err(CliError::Config)?;
    if !model.is_linear_diffusion() {
        return Err(CliError::Config(
            "the stochastic scheme requires a diffusion linear in λ".into(),
        ));
    }
    let noise = config.build_noise().map_err(CliError::Config)?;
    let u0 = config.build_initial(&basis).map_err(CliError::Config)?;
    let check_items = solver_preconditions(config, &model, &grid)?;

    let ws = AssemblyWorkspace::new(&grid, &basis, &model, noise.as_ref(), 0.0);
    let n_steps = (config.solver.t_end / config.solver.dt).round() as u64;
    let lags: Vec<u64> = config
        .stochastic
        .holder_lags
        .iter()
        .copied()
        .filter(|&l| l > 0 && l < n_steps)
        .collect();
    let ensemble_config = EnsembleConfig {
        samples: config.stochastic.samples,
        t_end: config.solver.t_end,
        dt: config.solver.dt,
        seed: config.stochastic.seed,
        output_stride: config.solver.output_stride,
        holder_lags: lags,
    };
    let stats = match run_ensemble(&ws, &u0, &ensemble_config) {
        Ok(stats) => stats,
        Err(err) => {
            let report = json!({
                "command": "solve-sde",
                "config": config,
                "basis": basis_metadata(&basis),
                "checks": check_items,
                "status": "error",
                "error": err.to_string(),
                "versions": versions(),
                "wall_time_s": started.elapsed().as_secs_f64(),
            });
            write_json(&out_dir.join("run.json"), &report).map_err(CliError::Config)?;
            return Err(CliError::Numerical(err.to_string()));
        }
    };

    // ensemble.csv: mean norms, second moments, standard errors.
    let mut ensemble =
        CsvWriter::new("t,mean_L2,E_L2_sq,stderr_L2_sq,E_H1_sq,stderr_H1_sq,mean_field_L2");
    for (m, &t) in stats.times.iter().enumerate() {
        let mean_field_l2 = stats.mean_field[m]
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt();
        ensemble.row(&[
            t,
            stats.l2[m].mean,
            stats.l2_sq[m].mean,
            stats.l2_sq[m].stderr(),
            stats.h1_sq[m].mean,
            stats.h1_sq[m].stderr(),
            mean_field_l2,
        ]);
    }
    ensemble
        .write_to(&out_dir.join("ensemble.csv"))
        .map_err(CliError::Config)?;

    // holder.csv: lag, quotient, stderr.
    let holder = holder_half_check(&stats, config.solver.dt, 2.0);
    let mut holder_csv = CsvWriter::new("lag,quotient,stderr");
    for (lag, quotient, stderr) in &holder.quotients {
        holder_csv.row(&[*lag, *quotient, *stderr]);
    }
    holder_csv
        .write_to(&out_dir.join("holder.csv"))
        .map_err(CliError::Config)?;

    let report = json!({
        "command": "solve-sde",
        "config": config,
        "basis": basis_metadata(&basis),
        "checks": check_items,
        "status": "ok",
        "samples": stats.count,
        "E_grad_sq_time_integral": stats.grad_sq_time_integral.mean,
        "stderr_grad_sq_time_integral": stats.grad_sq_time_integral.stderr(),
        "E_h2_sq_time_integral": stats.h2_sq_time_integral.mean,
        "stderr_h2_sq_time_integral": stats.h2_sq_time_integral.stderr(),
        "ito_energy_term_mean": stats.ito_energy_term.mean,
        "ito_energy_term_stderr": stats.ito_energy_term.stderr(),
        "holder_spread": holder.spread,
        "final_coeff_sq_mean": stats.final_coeff_sq.iter().map(|w| w.mean).collect::<Vec<_>>(),
        "final_coeff_sq_stderr": stats.final_coeff_sq.iter().map(|w| w.stderr()).collect::<Vec<_>>(),
        "versions": versions(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_json(&out_dir.join("run.json"), &report).map_err(CliError::Config)
}

/// Final-state coefficients of a single run; helper for the sweeps.
fn run_final(
    config: &RunConfig,
    n: usize,
    dt: f64,
) -> Result<(SpectralVector, paraman::geometry::EigenBasis), CliError> {
    let (grid, basis) = config.build_geometry_with_n(n).map_err(CliError::Config)?;
    let model = config.build_model().map_err(CliError::Config)?;
    let u0 = config.build_initial(&basis).map_err(CliError::Config)?;
    let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, config.solver.epsilon);
    let scheme = if config.scheme() == Scheme::Imex && model.is_linear_diffusion() {
        Scheme::Imex
    } else {
        Scheme::Rk4
    };
    // Keep the energy monitor resolved (~100 ledger points) regardless of
    // how coarse the requested output stride is.
    let steps = (config.solver.t_end / dt).round() as usize;
    let stride = (steps / 100).max(1);
    let run = solve(
        &ws,
        &u0,
        &SolverConfig {
            dt,
            t_end: config.solver.t_end,
            scheme,
            output_stride: stride,
        },
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok((run.final_state().clone(), basis))
}

/// Errors of a run against a reference on a (possibly larger) basis.
fn errors_against(
    alpha: &SpectralVector,
    reference: &SpectralVector,
    ref_basis: &paraman::geometry::EigenBasis,
) -> (f64, f64) {
    let n_ref = reference.len();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for k in 0..n_ref {
        let a = if k < alpha.len() { alpha.coeffs[k] } else { 0.0 };
        let d = a - reference.coeffs[k];
        l2 += d * d;
        h1 += ref_basis.lambda[k] * ref_basis.lambda[k] * d * d;
    }
    (l2.sqrt(), h1.sqrt())
}

/// Analytic final state for the heat model: diagonal decay of every mode.
fn analytic_heat_final(
    config: &RunConfig,
    basis: &paraman::geometry::EigenBasis,
) -> Option<SpectralVector> {
    if config.model.name != "heat" || config.model.truncated {
        return None;
    }
    let u0 = config.build_initial(basis).ok()?;
    let rate = config.model.parameters.nu + config.solver.epsilon;
    let coeffs = u0
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a * (-rate * basis.mu[k] * config.solver.t_end).exp())
        .collect();
    Some(SpectralVector::from_coeffs(coeffs))
}

/// `convergence`: error table over basis sizes and step sizes.
pub fn cmd_convergence(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let started = Instant::now();
    let conv = &config.convergence;
    if conv.n_list.is_empty() && conv.dt_list.is_empty() {
        return Err(CliError::Config(
            "convergence needs a nonempty n_list or dt_list".into(),
        ));
    }

    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new(); // (n, dt, L2, H1)

    if !conv.n_list.is_empty() {
        // Reference: analytic for heat, else the largest-n run.
        let ref_n = conv
            .reference_n
            .unwrap_or_else(|| conv.n_list.iter().copied().max().unwrap_or(1) * 4);
        let ref_dt = conv.reference_dt.unwrap_or(config.solver.dt);
        let (_, probe_basis) = config
            .build_geometry_with_n(ref_n)
            .map_err(CliError::Config)?;
        let (reference, ref_basis) = match analytic_heat_final(config, &probe_basis) {
            Some(alpha) => (alpha, probe_basis),
            None => {
                let (alpha, basis) = run_final(config, ref_n, ref_dt)?;
                (alpha, basis)
            }
        };
        use rayon::prelude::*;
        let finals: Result<Vec<_>, CliError> = conv
            .n_list
            .par_iter()
            .map(|&n| run_final(config, n, config.solver.dt).map(|(a, b)| (n, a, b)))
            .collect();
        for (n, alpha, basis) in finals? {
            // The bases are nested: the shared prefix must agree.
            for k in 0..n.min(ref_basis.n()) {
                assert_eq!(basis.labels[k], ref_basis.labels[k], "bases are not nested");
            }
            let (l2, h1) = errors_against(&alpha, &reference, &ref_basis);
            rows.push((n, config.solver.dt, l2, h1));
        }
    }

    if !conv.dt_list.is_empty() {
        let n = config.solver.n;
        let (_, basis) = config.build_geometry_with_n(n).map_err(CliError::Config)?;
        let (reference, ref_basis) = match analytic_heat_final(config, &basis) {
            Some(alpha) => (alpha, basis),
            None => {
                let ref_dt = conv.reference_dt.ok_or_else(|| {
                    CliError::Config(
                        "dt sweep without an analytic solution needs convergence.reference_dt"
                            .into(),
                    )
                })?;
                run_final(config, n, ref_dt)?
            }
        };
        use rayon::prelude::*;
        let finals: Result<Vec<_>, CliError> = conv
            .dt_list
            .par_iter()
            .map(|&dt| run_final(config, n, dt).map(|(a, _)| (dt, a)))
            .collect();
        for (dt, alpha) in finals? {
            let (l2, h1) = errors_against(&alpha, &reference, &ref_basis);
            rows.push((n, dt, l2, h1));
        }
    }

    // errors.csv with the observed rate between consecutive rows of the
    // same sweep: ln(e_prev/e_cur)/ln(n_cur/n_prev) for the n sweep,
    // ln(e_prev/e_cur)/ln(dt_prev/dt_cur) for the dt sweep.
    let mut csv = CsvWriter::new("n,dt,L2_err,H1_err,observed_rate");
    let n_sweep_len = conv.n_list.len();
    for (i, &(n, dt, l2, h1)) in rows.iter().enumerate() {
        let rate = if i == 0 || i == n_sweep_len {
            f64::NAN
        } else {
            let (pn, pdt, pl2, _) = rows[i - 1];
            if i < n_sweep_len {
                (pl2 / l2).ln() / (n as f64 / pn as f64).ln()
            } else {
                (pl2 / l2).ln() / (pdt / dt).ln()
            }
        };
        csv.row_with_int(n as u64, &[dt, l2, h1, rate]);
    }
    csv.write_to(&out_dir.join("errors.csv"))
        .map_err(CliError::Config)?;

    let report = json!({
        "command": "convergence",
        "config": config,
        "status": "ok",
        "rows": rows.iter().map(|(n, dt, l2, h1)| json!({
            "n": n, "dt": dt, "L2_err": l2, "H1_err": h1
        })).collect::<Vec<_>>(),
        "versions": versions(),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_json(&out_dir.join("run.json"), &report).map_err(CliError::Config)
}
