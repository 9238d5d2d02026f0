//! CSV and JSON writers for run outputs.

use std::path::Path;

use dqw_core::observables::FrequencySweep;
use dqw_core::search::{ClassicalSeries, PassiveOscillation, ScalingStudy};
use dqw_core::{EigenSystem, GaussianTrajectory, SearchResult};
use serde::Serialize;

use crate::error::{AppError, AppResult};

fn writer(path: &Path) -> AppResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| AppError::io(path.display(), e))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> AppResult<()> {
    w.flush().map_err(|e| AppError::io(path.display(), e))
}

fn row<I, S>(w: &mut csv::Writer<std::fs::File>, path: &Path, fields: I) -> AppResult<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| AppError::io(path.display(), e))
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> AppResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| AppError::io(path.display(), e))?;
    std::fs::write(path, text + "\n").map_err(|e| AppError::io(path.display(), e))
}

/// Long format: one row per (time, mode, basis). The eigenbasis rows are
/// written only when `eig` is given.
pub fn write_trajectory_csv(path: &Path, traj: &GaussianTrajectory, eig: Option<&EigenSystem>) -> AppResult<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["time", "mode_index", "basis", "mean_re", "mean_im", "photon_number"])?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut emit = |basis: &str, st: &dqw_core::GaussianState| -> AppResult<()> {
            let occ = st.occupations();
            for (j, n) in occ.iter().enumerate() {
                let m = st.mean[j];
                row(
                    &mut w,
                    path,
                    [fmt_f64(*t), j.to_string(), basis.to_string(), fmt_f64(m.re), fmt_f64(m.im), fmt_f64(*n)],
                )?;
            }
            Ok(())
        };
        emit("physical", s)?;
        if let Some(e) = eig {
            emit("eigen", &s.to_eigenbasis(e)?)?;
        }
    }
    finish(w, path)
}

pub fn write_spectrum_csv(path: &Path, eig: &EigenSystem) -> AppResult<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["index", "frequency"])?;
    for (k, f) in eig.frequencies().iter().enumerate() {
        row(&mut w, path, [k.to_string(), fmt_f64(*f)])?;
    }
    finish(w, path)
}

/// One row per pump frequency: `omega_p, mode_0, ..., participation_ratio`.
pub fn write_sweep_csv(path: &Path, sweep: &FrequencySweep) -> AppResult<()> {
    let mut w = writer(path)?;
    let n = sweep.rows.first().map_or(0, Vec::len);
    let mut header = vec!["omega_p".to_string()];
    header.extend((0..n).map(|j| format!("mode_{j}")));
    header.push("participation_ratio".into());
    row(&mut w, path, &header)?;
    for ((omega, r), pr) in sweep.omegas.iter().zip(&sweep.rows).zip(sweep.participation_ratios()) {
        let mut rec = vec![fmt_f64(*omega)];
        rec.extend(r.iter().map(|x| fmt_f64(*x)));
        rec.push(fmt_f64(pr));
        row(&mut w, path, &rec)?;
    }
    finish(w, path)
}

/// Named columns of equal length.
pub fn write_columns_csv(path: &Path, columns: &[(&str, &[f64])]) -> AppResult<()> {
    let len = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != len) {
        return Err(AppError::config("columns of unequal length"));
    }
    let mut w = writer(path)?;
    row(&mut w, path, columns.iter().map(|c| c.0))?;
    for i in 0..len {
        row(&mut w, path, columns.iter().map(|c| fmt_f64(c.1[i])))?;
    }
    finish(w, path)
}

pub fn write_scaling_csv(path: &Path, study: &ScalingStudy) -> AppResult<()> {
    let mut w = writer(path)?;
    row(&mut w, path, ["depth", "n_modes", "frequency", "weight", "exit_weight", "inverse_square"])?;
    for p in &study.points {
        row(
            &mut w,
            path,
            [
                p.depth.to_string(),
                p.n_modes.to_string(),
                fmt_f64(p.frequency),
                fmt_f64(p.entrance_weight),
                fmt_f64(p.exit_weight),
                fmt_f64(p.inverse_square),
            ],
        )?;
    }
    finish(w, path)
}

pub fn write_search_csv(path: &Path, r: &SearchResult) -> AppResult<()> {
    let mut w = writer(path)?;
    row(
        &mut w,
        path,
        ["time", "entrance", "exit", "max_other", "target_population", "max_other_eigen", "exit_rank"],
    )?;
    for i in 0..r.times.len() {
        row(
            &mut w,
            path,
            [
                fmt_f64(r.times[i]),
                fmt_f64(r.entrance[i]),
                fmt_f64(r.exit[i]),
                fmt_f64(r.max_other[i]),
                fmt_f64(r.target_population[i]),
                fmt_f64(r.max_other_eigen[i]),
                r.exit_rank[i].to_string(),
            ],
        )?;
    }
    finish(w, path)
}

pub fn write_passive_csv(path: &Path, p: &PassiveOscillation) -> AppResult<()> {
    write_columns_csv(
        path,
        &[("time", &p.times), ("entrance", &p.entrance), ("exit", &p.exit), ("total", &p.total)],
    )
}

pub fn write_classical_csv(path: &Path, c: &ClassicalSeries) -> AppResult<()> {
    write_columns_csv(
        path,
        &[("time", &c.times), ("exit", &c.exit), ("total", &c.total), ("min_probability", &c.min_probability)],
    )
}
