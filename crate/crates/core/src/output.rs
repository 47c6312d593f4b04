//! CSV and JSON artifacts.
//!
//! Floats are written in `{:.16e}` form (17 significant digits), which
//! round-trips every `f64` exactly. Missing values are empty cells.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::SystemState;
use crate::functionals::DiagnosticsRecord;
use crate::scenario::{ScenarioError, ScenarioRun};

/// Version of the diagnostics column layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn write_diagnostics<W: Write>(out: &mut W, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", DiagnosticsRecord::COLUMNS.join(","))?;
    for rec in records {
        let row: Vec<String> = rec.columns().iter().map(|c| format_cell(*c)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Cell centers and every field of the state, one row per cell.
pub fn write_profiles<W: Write>(out: &mut W, state: &SystemState) -> std::io::Result<()> {
    let (names, fields) = match state {
        SystemState::Original(s) => (["r", "u", "v1", "v2"], [&s.u, &s.v1, &s.v2]),
        SystemState::Transformed(s) => (["r", "w", "z", "v"], [&s.w, &s.z, &s.v]),
    };
    writeln!(out, "{}", names.join(","))?;
    let centers = state.grid().centers();
    for (j, r) in centers.iter().enumerate() {
        let mut row = vec![format_float(*r)];
        row.extend(fields.iter().map(|f| format_float(f.values()[j])));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a table given as a header and rows of preformatted cells.
pub fn write_table<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn create_file(path: &Path) -> Result<BufWriter<File>, ScenarioError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ScenarioError::io(path, e))
}

pub fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), ScenarioError> {
    let mut file = create_file(path)?;
    body(&mut file)
        .and_then(|_| file.flush())
        .map_err(|e| ScenarioError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    write_with(path, |f| {
        serde_json::to_writer_pretty(&mut *f, value).map_err(std::io::Error::other)?;
        writeln!(f)
    })
}

pub fn create_dir(path: &Path) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(path).map_err(|e| ScenarioError::io(path, e))
}

/// Paths of the files written for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunArtifacts {
    pub diagnostics: PathBuf,
    pub summary: PathBuf,
    pub profiles: Option<PathBuf>,
}

/// Writes diagnostics, summary and (if configured) final profiles into `dir`.
pub fn write_run(dir: &Path, run: &ScenarioRun) -> Result<RunArtifacts, ScenarioError> {
    create_dir(dir)?;
    let output = &run.summary.config.output;
    let diagnostics = dir.join(&output.diagnostics);
    write_with(&diagnostics, |f| write_diagnostics(f, &run.outcome.trajectory))?;
    let summary = dir.join(&output.summary);
    write_json(&summary, &run.summary)?;
    let profiles = if output.profiles.is_empty() {
        None
    } else {
        let path = dir.join(&output.profiles);
        write_with(&path, |f| write_profiles(f, &run.outcome.final_state))?;
        Some(path)
    };
    Ok(RunArtifacts {
        diagnostics,
        summary,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::Lemma31;

    fn record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            mass_w: 1.0 / 3.0,
            supnorm_w: 2.0,
            energy: Some(-0.1),
            dissipation: None,
            source: None,
            residual: None,
            young_slack: None,
            z_l1: 0.0,
            grad_z_lp: 0.0,
            decay_envelope: 0.0,
            v_l2: 0.0,
            lemma31: Some(Lemma31 {
                lhs: 1.0,
                q1: 2.0,
                q2: 3.0,
            }),
            lemma31_ratio: Some(0.5),
        }
    }

    #[test]
    fn floats_round_trip_exactly() {
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn diagnostics_have_fixed_header_and_empty_missing_cells() {
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, &[record(0.0), record(0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "t,mass_w,supnorm_w,F,D,source,residual,young_slack,z_l1,grad_z_lp,decay_envelope,v_l2,lemma31_lhs,lemma31_q1,lemma31_q2,lemma31_ratio"
        );
        let cells: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cells.len(), 16);
        assert_eq!(cells[0], "5.0000000000000000e-1");
        assert_eq!(cells[1].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(cells[4], "");
        assert_eq!(cells[14], "3.0000000000000000e0");
    }
}
