//! Subcommand implementations.

use crate::config::RunConfig;
use crate::manifest::{grid_fingerprint, GridPoint, PointStatus, RunManifest};
use crate::output;
use crate::{Overrides, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_PARTIAL};
use anyhow::Context;
use asbm::analysis::{
    build_phase_map, fit_displacement, fit_entropy_cft, locate_transition, ClassifyTolerances,
    PhaseRow, TransitionEstimator,
};
use asbm::bath::{discretize_bath, DiscretizedBath};
use asbm::derive_seed;
use asbm::solver::{solve_traced, GroundStateRecord, SolverError};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

fn config_error(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_CONFIG)
}

/// Output directory: --out, else $ASBM_OUTPUT_ROOT/<command>-<fingerprint>.
fn output_dir(overrides: &Overrides, command: &str, fingerprint: &str) -> PathBuf {
    if let Some(out) = &overrides.out {
        return out.clone();
    }
    let root = std::env::var_os("ASBM_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{command}-{}", &fingerprint[..fingerprint.len().min(16)]))
}

fn alpha_grid(alpha_min: f64, alpha_max: f64, points: usize, log_spacing: bool) -> Vec<f64> {
    if points == 1 {
        return vec![alpha_min];
    }
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            if log_spacing {
                (alpha_min.ln() + t * (alpha_max.ln() - alpha_min.ln())).exp()
            } else {
                alpha_min + t * (alpha_max - alpha_min)
            }
        })
        .collect()
}

pub fn cmd_solve(overrides: &Overrides, emit_bath: bool, verbose: bool) -> anyhow::Result<ExitCode> {
    let run = match overrides.resolve() {
        Ok(run) => run,
        Err(e) => return Ok(config_error(e)),
    };
    run.install_threads();
    let dir = output_dir(overrides, "solve", &run.fingerprint());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let bath = discretize_bath(&run.spec)?;

    if emit_bath {
        output::write_text(&dir.join("bath.csv"), &bath.to_csv())?;
    }

    let (result, traces) = solve_traced(&run.spec, &bath, &run.solver, &[], verbose);
    if verbose {
        output::write_text(&dir.join("restart_traces.csv"), &output::traces_csv(&traces))?;
    }
    let record = match result {
        Ok(record) => record,
        Err(SolverError::NonConvergence { best_energy }) => {
            eprintln!(
                "non-convergence: no trajectory met the tolerance (best energy {best_energy})"
            );
            return Ok(ExitCode::from(EXIT_NONCONVERGENCE));
        }
        Err(SolverError::InvalidConfig(msg)) => return Ok(config_error(msg)),
        Err(e) => return Err(e.into()),
    };

    output::write_record_json(&dir.join("record.json"), &record)?;
    output::write_text(&dir.join("qf_curve.csv"), &output::qf_curve_csv(&record, &bath))?;
    output::write_text(
        &dir.join("displacements.csv"),
        &output::displacement_csv(&record, &bath),
    )?;
    println!(
        "E = {:.12}  varE = {:.3e}  converged {}/{} restarts  -> {}",
        record.energy,
        record.energy_variance,
        record.converged_restarts,
        record.solver.restarts,
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Run one grid of (delta, alpha) points with manifest bookkeeping; shared
/// by sweep and phase.
#[allow(clippy::too_many_arguments)]
fn run_grid(
    run: &RunConfig,
    dir: &Path,
    command: &str,
    grid: &[(f64, f64)],
    resume: bool,
) -> anyhow::Result<(RunManifest, bool)> {
    std::fs::create_dir_all(dir.join("records"))?;
    let config_text = run.render();
    let fingerprint = grid_fingerprint(&config_text, grid);

    let mut manifest = if resume {
        let loaded = RunManifest::load(dir)
            .with_context(|| format!("loading manifest from {}", dir.display()))?;
        anyhow::ensure!(
            loaded.fingerprint == fingerprint,
            "resume fingerprint mismatch: manifest {} vs current {}",
            loaded.fingerprint,
            fingerprint
        );
        loaded
    } else {
        let points = grid
            .iter()
            .enumerate()
            .map(|(index, &(delta, alpha))| GridPoint {
                delta,
                alpha,
                seed: derive_seed(run.solver.seed, index as u64),
                status: PointStatus::Pending,
                record: format!("records/point_{index:04}.json"),
            })
            .collect();
        RunManifest {
            schema_version: 1,
            run_id: format!("{command}-{}", &fingerprint[..16.min(fingerprint.len())]),
            command: command.to_string(),
            fingerprint,
            config_text,
            points,
        }
    };
    manifest.save(dir)?;

    let jobs: Vec<usize> = manifest
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.status != PointStatus::Done)
        .map(|(i, _)| i)
        .collect();

    let results: Vec<(usize, Option<GroundStateRecord>)> = jobs
        .par_iter()
        .map(|&index| {
            let point = &manifest.points[index];
            let mut spec = run.spec.clone();
            spec.delta = point.delta;
            spec.alpha = point.alpha;
            let mut solver = run.solver.clone();
            solver.seed = point.seed;
            let record = discretize_bath(&spec).ok().and_then(|bath| {
                asbm::solver::solve(&spec, &bath, &solver).ok()
            });
            (index, record)
        })
        .collect();

    for (index, record) in results {
        let point = &mut manifest.points[index];
        match record {
            Some(record) => {
                output::write_record_json(&dir.join(&point.record), &record)?;
                point.status = PointStatus::Done;
            }
            None => point.status = PointStatus::Failed,
        }
        manifest.save(dir)?;
    }
    let ok = !manifest.any_failed();
    Ok((manifest, ok))
}

/// Summary CSV over the manifest points, in grid order.
fn write_summary(
    dir: &Path,
    manifest: &RunManifest,
    bath_of: impl Fn(f64) -> anyhow::Result<DiscretizedBath>,
    with_delta_column: bool,
) -> anyhow::Result<Vec<Option<GroundStateRecord>>> {
    let mut rows = String::new();
    rows.push_str(if with_delta_column {
        "delta,"
    } else {
        ""
    });
    rows.push_str(output::SUMMARY_HEADER);
    let mut records = Vec::new();
    for point in &manifest.points {
        let record = if point.status == PointStatus::Done {
            Some(output::read_record_json(&dir.join(&point.record))?)
        } else {
            None
        };
        let bath = bath_of(point.delta)?;
        let tolerances = ClassifyTolerances::for_bath(&bath);
        let row = output::summary_row(point.alpha, record.as_ref(), &tolerances);
        if with_delta_column {
            rows.push_str(&format!("{},{row}", output::fmt_f64(point.delta)));
        } else {
            rows.push_str(&row);
        }
        records.push(record);
    }
    output::write_text(&dir.join("summary.csv"), &rows)?;
    Ok(records)
}

pub fn cmd_sweep(
    overrides: &Overrides,
    alpha_min: f64,
    alpha_max: f64,
    points: usize,
    log_spacing: bool,
    resume: bool,
) -> anyhow::Result<ExitCode> {
    if points == 0 || alpha_max < alpha_min {
        return Ok(config_error("sweep needs points >= 1 and alpha_max >= alpha_min"));
    }
    let run = match overrides.resolve() {
        Ok(run) => run,
        Err(e) => return Ok(config_error(e)),
    };
    run.install_threads();
    let alphas = alpha_grid(alpha_min, alpha_max, points, log_spacing);
    let grid: Vec<(f64, f64)> = alphas.iter().map(|&a| (run.spec.delta, a)).collect();
    let dir = output_dir(overrides, "sweep", &grid_fingerprint(&run.render(), &grid));

    let (manifest, ok) = run_grid(&run, &dir, "sweep", &grid, resume)?;
    let spec = run.spec.clone();
    write_summary(&dir, &manifest, move |delta| {
        let mut s = spec.clone();
        s.delta = delta;
        Ok(discretize_bath(&s)?)
    }, false)?;
    println!(
        "sweep: {}/{} points done -> {}",
        manifest.points.iter().filter(|p| p.status == PointStatus::Done).count(),
        manifest.points.len(),
        dir.display()
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_PARTIAL) })
}

pub fn cmd_phase(
    overrides: &Overrides,
    delta_list: &[f64],
    alpha_min: f64,
    alpha_max: f64,
    points: usize,
    log_spacing: bool,
    resume: bool,
) -> anyhow::Result<ExitCode> {
    if delta_list.is_empty() || points == 0 {
        return Ok(config_error("phase needs a non-empty delta list and points >= 1"));
    }
    let run = match overrides.resolve() {
        Ok(run) => run,
        Err(e) => return Ok(config_error(e)),
    };
    run.install_threads();
    let alphas = alpha_grid(alpha_min, alpha_max, points, log_spacing);
    let mut grid = Vec::new();
    for &delta in delta_list {
        for &alpha in &alphas {
            grid.push((delta, alpha));
        }
    }
    let dir = output_dir(overrides, "phase", &grid_fingerprint(&run.render(), &grid));
    let (manifest, ok) = run_grid(&run, &dir, "phase", &grid, resume)?;

    let spec = run.spec.clone();
    let records = write_summary(&dir, &manifest, {
        let spec = spec.clone();
        move |delta| {
            let mut s = spec.clone();
            s.delta = delta;
            Ok(discretize_bath(&s)?)
        }
    }, true)?;

    // Assemble the phase map from the rows.
    let mut rows: Vec<PhaseRow> = Vec::new();
    for (d_idx, &delta) in delta_list.iter().enumerate() {
        let mut row_points = Vec::new();
        for (a_idx, &alpha) in alphas.iter().enumerate() {
            let record = records[d_idx * alphas.len() + a_idx].clone();
            row_points.push((alpha, record));
        }
        rows.push(PhaseRow { delta, points: row_points });
    }
    let mut spec_for_tol = run.spec.clone();
    spec_for_tol.delta = delta_list[0];
    let tolerances = ClassifyTolerances::for_bath(&discretize_bath(&spec_for_tol)?);
    let map = build_phase_map(&rows, &tolerances);
    output::write_text(&dir.join("phase_map.json"), &serde_json::to_string_pretty(&map)?)?;
    output::write_text(&dir.join("fig9_phase_map.csv"), &output::phase_map_csv(&map))?;
    output::write_text(&dir.join("boundaries.csv"), &output::boundaries_csv(&map))?;
    if let Some((delta_star, unc)) = map.delta_star {
        println!("delta* = {delta_star:.4} +- {unc:.4}");
    }
    println!("phase map -> {}", dir.display());
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_PARTIAL) })
}

pub fn cmd_bench(
    overrides: &Overrides,
    m_list: &[usize],
    n_list: &[usize],
) -> anyhow::Result<ExitCode> {
    if m_list.is_empty() && n_list.is_empty() {
        return Ok(config_error("bench needs --m-list and/or --n-list"));
    }
    let run = match overrides.resolve() {
        Ok(run) => run,
        Err(e) => return Ok(config_error(e)),
    };
    run.install_threads();
    let dir = output_dir(overrides, "bench", &run.fingerprint());
    std::fs::create_dir_all(&dir)?;

    let table = asbm::solver::benchmark_convergence(&run.spec, &run.solver, m_list, n_list)?;

    if !table.energy_vs_modes.is_empty() {
        let m_max = table.energy_vs_modes.iter().map(|&(m, _)| m).max().unwrap();
        let e_ref = table.energy_vs_modes.iter().find(|&&(m, _)| m == m_max).unwrap().1;
        let mut csv = String::from("M,E_g,shift_from_largest\n");
        for &(m, e) in &table.energy_vs_modes {
            csv.push_str(&format!(
                "{},{},{}\n",
                m,
                output::fmt_f64(e),
                output::fmt_f64(e - e_ref)
            ));
        }
        output::write_text(&dir.join("m_convergence.csv"), &csv)?;
        match (table.decay_rate, table.decay_r2) {
            (Some(rate), Some(r2)) => {
                println!("energy shift decays as exp(-{rate:.4} M), R^2 = {r2:.4}")
            }
            _ => println!("too few usable points for an exponential fit of E(M)"),
        }
    }

    if !table.energy_vs_multiplicity.is_empty() {
        // Observable convergence at each multiplicity.
        let bath = discretize_bath(&run.spec)?;
        let mut csv = String::from("N,E_g,sigma_x,sigma_z_abs,S_vN,QF_max,varE\n");
        for &(n, e) in &table.energy_vs_multiplicity {
            let mut solver = run.solver.clone();
            solver.multiplicity = n;
            let record = asbm::solver::solve(&run.spec, &bath, &solver)?;
            let o = &record.observables;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                n,
                output::fmt_f64(e),
                output::fmt_f64(o.sigma_x),
                output::fmt_f64(o.sigma_z.abs()),
                output::fmt_f64(o.entropy),
                output::fmt_f64(o.qf_max),
                output::fmt_f64(record.energy_variance),
            ));
        }
        output::write_text(&dir.join("n_convergence.csv"), &csv)?;
    }

    output::write_text(&dir.join("bench.json"), &serde_json::to_string_pretty(&table)?)?;
    println!("bench -> {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_analyze(
    records_dir: &Path,
    estimator: &str,
    alpha_c_override: Option<f64>,
    out: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let mut records: Vec<GroundStateRecord> = Vec::new();
    let records_path = if records_dir.join("records").is_dir() {
        records_dir.join("records")
    } else {
        records_dir.to_path_buf()
    };
    for entry in std::fs::read_dir(&records_path)
        .with_context(|| format!("reading {}", records_path.display()))?
    {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json")
            && path.file_name().is_some_and(|n| n.to_string_lossy().starts_with("point_"))
        {
            records.push(output::read_record_json(&path)?);
        }
    }
    if records.len() < 2 {
        return Ok(config_error(format!(
            "need at least two records under {}, found {}",
            records_path.display(),
            records.len()
        )));
    }
    records.sort_by(|a, b| a.spec.alpha.partial_cmp(&b.spec.alpha).unwrap());
    let refs: Vec<&GroundStateRecord> = records.iter().collect();
    let dir = out.unwrap_or_else(|| records_dir.join("analysis"));
    std::fs::create_dir_all(&dir)?;

    let estimators: Vec<TransitionEstimator> = match estimator {
        "all" => vec![
            TransitionEstimator::ParityJump,
            TransitionEstimator::PowerlawFit,
            TransitionEstimator::EntropyCusp,
            TransitionEstimator::QfmaxPeak,
            TransitionEstimator::VariancePeak,
        ],
        "parity-jump" => vec![TransitionEstimator::ParityJump],
        "powerlaw-fit" => vec![TransitionEstimator::PowerlawFit],
        "entropy-cusp" => vec![TransitionEstimator::EntropyCusp],
        "qfmax-peak" => vec![TransitionEstimator::QfmaxPeak],
        "variance-peak" => vec![TransitionEstimator::VariancePeak],
        other => return Ok(config_error(format!("unknown estimator '{other}'"))),
    };

    let mut report = serde_json::Map::new();
    let mut located = Vec::new();
    for est in &estimators {
        match locate_transition(&refs, *est) {
            Ok(fit) => {
                println!(
                    "{}: alpha_c = {:.6} +- {:.6}",
                    est.as_str(),
                    fit.alpha_c,
                    fit.uncertainty
                );
                located.push(fit.clone());
                report.insert(est.as_str().to_string(), serde_json::to_value(&fit)?);
            }
            Err(e) => {
                println!("{}: {}", est.as_str(), e);
                report.insert(est.as_str().to_string(), serde_json::Value::String(e.to_string()));
            }
        }
    }

    let alpha_c = alpha_c_override.or_else(|| located.first().map(|f| f.alpha_c));
    if let Some(alpha_c) = alpha_c {
        match fit_entropy_cft(&refs, alpha_c) {
            Ok(fit) => {
                println!(
                    "entropy fit: slope coefficient {:.4}, central charge {:.3}",
                    fit.slope_coeff, fit.central_charge
                );
                report.insert("entropy_cft".into(), serde_json::to_value(&fit)?);
            }
            Err(e) => {
                report.insert("entropy_cft".into(), serde_json::Value::String(e.to_string()));
            }
        }
    }

    // Displacement-profile fit on the last (deepest) record with structure.
    if let Some(last) = records.last() {
        let bath = discretize_bath(&last.spec)?;
        match fit_displacement(&last.observables.f_bar, &bath) {
            Ok(fit) => {
                println!(
                    "displacement fit at alpha = {}: chi = {:.3e} (sign {:+})",
                    last.spec.alpha, fit.chi, fit.sign
                );
                report.insert("displacement".into(), serde_json::to_value(&fit)?);
            }
            Err(e) => {
                report.insert("displacement".into(), serde_json::Value::String(e.to_string()));
            }
        }
    }

    // Figure-oriented CSVs.
    let mut fig1 = String::from("alpha,sigma_z_abs,parity,n_ex\n");
    let mut fig2 = String::from("alpha,S_vN,QF_max,varE\n");
    for r in &records {
        fig1.push_str(&format!(
            "{},{},{},{}\n",
            output::fmt_f64(r.spec.alpha),
            output::fmt_f64(r.observables.sigma_z.abs()),
            output::fmt_f64(r.observables.parity),
            output::fmt_f64(r.observables.n_ex)
        ));
        fig2.push_str(&format!(
            "{},{},{},{}\n",
            output::fmt_f64(r.spec.alpha),
            output::fmt_f64(r.observables.entropy),
            output::fmt_f64(r.observables.qf_max),
            output::fmt_f64(r.energy_variance)
        ));
    }
    output::write_text(&dir.join("fig1_sigma_z.csv"), &fig1)?;
    output::write_text(&dir.join("fig2_entropy_qf.csv"), &fig2)?;
    output::write_text(
        &dir.join("analysis.json"),
        &(serde_json::to_string_pretty(&serde_json::Value::Object(report))? + "\n"),
    )?;
    println!("analysis -> {}", dir.display());
    Ok(ExitCode::SUCCESS)
}
