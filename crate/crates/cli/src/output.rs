//! File emission: record JSON, plot-ready CSV curves, and summaries with a
//! fixed column order so resumed runs reproduce byte-identical files.

use asbm::analysis::{classify_phase, ClassifyTolerances, PhaseLabel, PhaseMap};
use asbm::bath::DiscretizedBath;
use asbm::solver::{GroundStateRecord, RestartTrace};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

pub fn fmt_f64(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else if value.is_nan() {
        "nan".to_string()
    } else {
        format!("{value:.12e}")
    }
}

pub fn write_record_json(path: &Path, record: &GroundStateRecord) -> anyhow::Result<()> {
    let file = fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_record_json(path: &Path) -> anyhow::Result<GroundStateRecord> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Quantum-fluctuation curve: one row per mode.
pub fn qf_curve_csv(record: &GroundStateRecord, bath: &DiscretizedBath) -> String {
    let mut out = String::from("k,omega_k,qf\n");
    for (k, qf) in record.observables.qf.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", k, fmt_f64(bath.omega[k]), fmt_f64(*qf));
    }
    out
}

/// Averaged displacement profiles, plus quadrature means for both branches.
pub fn displacement_csv(record: &GroundStateRecord, bath: &DiscretizedBath) -> String {
    let mut out = String::from("k,omega_k,f_bar,g_bar,x_mean,p_mean\n");
    let obs = &record.observables;
    for k in 0..bath.num_modes() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            k,
            fmt_f64(bath.omega[k]),
            fmt_f64(obs.f_bar[k]),
            fmt_f64(obs.g_bar[k]),
            fmt_f64(obs.x_mean[k]),
            fmt_f64(obs.p_mean[k]),
        );
    }
    out
}

pub const SUMMARY_HEADER: &str =
    "alpha,E_g,varE,sigma_x,sigma_y_abs,sigma_z_abs,S_vN,QF_max,parity,N_ex,A_bar,B_bar,phase\n";

pub fn summary_row(
    alpha: f64,
    record: Option<&GroundStateRecord>,
    tolerances: &ClassifyTolerances,
) -> String {
    match record {
        Some(r) => {
            let o = &r.observables;
            let phase = classify_phase(r, tolerances);
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(alpha),
                fmt_f64(r.energy),
                fmt_f64(r.energy_variance),
                fmt_f64(o.sigma_x),
                fmt_f64(o.sigma_y.abs()),
                fmt_f64(o.sigma_z.abs()),
                fmt_f64(o.entropy),
                fmt_f64(o.qf_max),
                fmt_f64(o.parity),
                fmt_f64(o.n_ex),
                fmt_f64(o.a_bar),
                fmt_f64(o.b_bar),
                phase.as_str(),
            )
        }
        None => format!(
            "{},nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,nan,{}\n",
            fmt_f64(alpha),
            PhaseLabel::Unclassified.as_str()
        ),
    }
}

/// Per-restart convergence log (emitted when verbose).
pub fn traces_csv(traces: &[RestartTrace]) -> String {
    let mut out = String::from("restart,sweep,energy,stage,spread,drift\n");
    for trace in traces {
        for p in &trace.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                trace.restart,
                p.sweep,
                fmt_f64(p.energy),
                p.stage,
                fmt_f64(p.spread),
                fmt_f64(p.drift)
            );
        }
    }
    out
}

/// Phase-map grid in plot-ready form.
pub fn phase_map_csv(map: &PhaseMap) -> String {
    let mut out = String::from("delta,alpha,phase\n");
    for p in &map.points {
        let _ = writeln!(out, "{},{},{}", fmt_f64(p.delta), fmt_f64(p.alpha), p.label.as_str());
    }
    for (delta, alpha) in &map.holes {
        let _ = writeln!(out, "{},{},hole", fmt_f64(*delta), fmt_f64(*alpha));
    }
    out
}

pub fn boundaries_csv(map: &PhaseMap) -> String {
    let mut out = String::from("delta,alpha_c,uncertainty,from,to\n");
    for b in &map.boundaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(b.delta),
            fmt_f64(b.alpha_c),
            fmt_f64(b.uncertainty),
            b.from.as_str(),
            b.to.as_str()
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text)?;
    Ok(())
}
