//! Running a configured experiment and writing plot-ready files.
//!
//! Data files are comma-separated with a header row naming each column and
//! its unit; numbers are written in scientific notation with 12 significant
//! digits. Every run also writes `manifest.txt` holding the resolved
//! configuration and the code version; its `generated_unix` line is the only
//! content that changes between identical runs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::model::{GroundState, ModelError, Polarisation};
use crate::observables::emission_probability;
use crate::scan::{
    find_equal_efficiency_detunings, scan_cavity_detuning, scan_pump_detuning, simulate, PulseOutcome, RunResult,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Manifest line that differs between otherwise identical runs.
pub const TIMESTAMP_KEY: &str = "generated_unix";

/// Minimum height for a local maximum to be listed in `peaks.csv`.
pub const PEAK_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    ScanCavity,
    ScanPump,
    Crossings,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::ScanCavity => "scan-cavity",
            Command::ScanPump => "scan-pump",
            Command::Crossings => "crossings",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: Command,
    pub files: Vec<PathBuf>,
    /// One entry per failed grid point.
    pub failures: Vec<String>,
    /// Human-readable headline numbers.
    pub summary: Vec<String>,
}

/// Scientific notation, 12 significant digits; `nan` for missing values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.11e}")
    }
}

/// CSV-safe column fragment from a level label, e.g. `F'=1,m=-1` → `Fp1_m-1`.
pub fn column_name(label: &str) -> String {
    label.replace('\'', "p").replace('=', "").replace(',', "_")
}

struct Table {
    text: String,
}

impl Table {
    fn new(columns: &[String]) -> Self {
        Self { text: columns.join(",") + "\n" }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn nums(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_num(*v)).collect();
        self.row(&cells);
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.files.push(path);
        Ok(())
    }
}

fn outcome_cells(run: &RunResult) -> [f64; 4] {
    match run {
        Ok(o) => [o.p_plus, o.p_minus, o.final_inversion, o.loss_total()],
        Err(_) => [f64::NAN; 4],
    }
}

fn status(runs: &[&RunResult]) -> String {
    if runs.iter().all(|r| r.is_ok()) {
        "ok".into()
    } else {
        "failed".into()
    }
}

/// Runs `command` and writes its files into `out_dir` (created if needed).
pub fn run_command(config: &ExperimentConfig, command: Command, out_dir: &Path) -> Result<RunReport, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut w = Writer { dir: out_dir.to_path_buf(), files: Vec::new() };
    let model = config.model();
    let settings = config.settings();
    let mut failures = Vec::new();
    let mut summary = Vec::new();

    match command {
        Command::Evolve => {
            let sim = simulate(&model, &settings)?;
            let (traj, rec) = (&sim.trajectory, &sim.record);
            let mut header = cols(&["time_us", "envelope"]);
            header.extend(traj.level_labels.iter().map(|l| format!("pop_{}", column_name(l))));
            header.extend(cols(&[
                "n_sigma_plus",
                "n_sigma_minus",
                "trace",
                "density_sigma_plus_per_us",
                "density_sigma_minus_per_us",
                "density_total_per_us",
                "inversion",
            ]));
            let mut t = Table::new(&header);
            let total = rec.density_total();
            for k in (0..traj.len()).filter(|k| k % config.trajectory_every == 0 || *k == traj.len() - 1) {
                let mut row = vec![traj.times[k], traj.envelope[k]];
                row.extend(traj.populations.iter().map(|p| p[k]));
                row.extend([
                    traj.photons_plus[k],
                    traj.photons_minus[k],
                    traj.trace[k],
                    rec.density_sigma_plus[k],
                    rec.density_sigma_minus[k],
                    total[k],
                    rec.inversion[k],
                ]);
                t.nums(&row);
            }
            w.write("trajectory.csv", &t.text)?;

            let (p_plus, p_minus) = emission_probability(rec);
            let b = rec.budget;
            let mut s = Table::new(&cols(&["quantity", "value"]));
            for (k, v) in [
                ("delta_ca_mhz", model.delta_ca()),
                ("delta_p_mhz", model.delta_p()),
                ("delta_cp_mhz", model.delta_cp()),
                ("p_sigma_plus", p_plus),
                ("p_sigma_minus", p_minus),
                ("final_inversion", rec.final_inversion()),
                ("sink_trace_deficit", b.sink_trace_deficit),
                ("residual_initial", b.residual_initial),
                ("target_population", b.target),
                ("modeled_other_levels", b.modeled_other_levels),
                ("loss_total", rec.loss_total),
                ("tail_density_per_us", rec.tail_density),
            ] {
                s.row(&[k.to_string(), fmt_num(v)]);
            }
            w.write("summary.csv", &s.text)?;
            summary.push(format!(
                "P(σ+) = {p_plus:.4}, P(σ−) = {p_minus:.4}, final inversion = {:.4}, losses = {:.4}",
                rec.final_inversion(),
                rec.loss_total
            ));
        }
        Command::ScanCavity => {
            let scan = scan_cavity_detuning(&model, &settings, &config.cavity_grid.points())?;
            let mut t = Table::new(&cols(&[
                "delta_ca_mhz",
                "p_sigma_plus_lambda",
                "p_sigma_minus_lambda",
                "p_wrong_initial_sigma_plus_pump",
                "p_wrong_initial_sigma_minus_pump",
                "loss_sigma_plus",
                "loss_sigma_minus",
                "p_sigma_minus_under_sigma_plus_pump",
                "p_sigma_plus_under_sigma_minus_pump",
                "inversion_sigma_plus",
                "inversion_sigma_minus",
                "status",
            ]));
            for p in &scan.points {
                let lp = outcome_cells(&p.lambda_plus);
                let lm = outcome_cells(&p.lambda_minus);
                let mut cells: Vec<String> = [
                    p.delta_ca,
                    p.efficiency_plus(),
                    p.efficiency_minus(),
                    p.wrong_efficiency_plus(),
                    p.wrong_efficiency_minus(),
                    p.loss_plus(),
                    p.loss_minus(),
                    lp[1],
                    lm[0],
                    lp[2],
                    lm[2],
                ]
                .iter()
                .map(|v| fmt_num(*v))
                .collect();
                cells.push(status(&[&p.lambda_plus, &p.lambda_minus, &p.wrong_plus, &p.wrong_minus]));
                t.row(&cells);
            }
            w.write("scan_cavity.csv", &t.text)?;
            for (d, errs) in scan.failed_points() {
                failures.extend(errs.into_iter().map(|e| format!("Δ_ca = {d} MHz: {e}")));
            }
            summary.push(format!("{} grid points, {} failed", scan.points.len(), scan.failed_points().len()));
        }
        Command::ScanPump => {
            let delta_ca = config.pump_scan_delta_ca();
            let scan = scan_pump_detuning(&model, &settings, delta_ca, &config.pump_grid.points())?;
            let mut t = Table::new(&cols(&[
                "delta_cp_mhz",
                "from_plus_p_sigma_plus",
                "from_plus_p_sigma_minus",
                "from_minus_p_sigma_plus",
                "from_minus_p_sigma_minus",
                "from_plus_loss",
                "from_minus_loss",
                "status",
            ]));
            for p in &scan.points {
                let a = outcome_cells(&p.from_plus);
                let b = outcome_cells(&p.from_minus);
                let mut cells: Vec<String> =
                    [p.delta_cp, a[0], a[1], b[0], b[1], a[3], b[3]].iter().map(|v| fmt_num(*v)).collect();
                cells.push(status(&[&p.from_plus, &p.from_minus]));
                t.row(&cells);
                failures.extend(p.failures().into_iter().map(|e| format!("Δ_cp = {} MHz: {e}", p.delta_cp)));
            }
            w.write("scan_pump.csv", &t.text)?;

            let mut peaks = Table::new(&cols(&["initial_state", "polarisation", "position_mhz", "height", "fwhm_mhz"]));
            for start in [GroundState::Plus, GroundState::Minus] {
                for pol in [Polarisation::SigmaPlus, Polarisation::SigmaMinus] {
                    for pk in scan.peaks(start, pol, PEAK_THRESHOLD) {
                        peaks.row(&[
                            start.name().into(),
                            pol.name().into(),
                            fmt_num(pk.position),
                            fmt_num(pk.height),
                            fmt_num(pk.fwhm.unwrap_or(f64::NAN)),
                        ]);
                        summary.push(format!(
                            "from {} {}: peak {:.3} at Δ_cp = {:.2} MHz",
                            start.name(),
                            pol.name(),
                            pk.height,
                            pk.position
                        ));
                    }
                }
            }
            w.write("peaks.csv", &peaks.text)?;
        }
        Command::Crossings => {
            let found = find_equal_efficiency_detunings(&model, &settings, &config.cavity_grid.points())?;
            let mut t = Table::new(&cols(&[
                "delta_ca_mhz",
                "bracket_mhz",
                "p_sigma_plus",
                "p_sigma_minus",
                "p_wrong_initial_sigma_plus_pump",
                "p_wrong_initial_sigma_minus_pump",
                "loss_sigma_plus",
                "loss_sigma_minus",
            ]));
            for c in &found {
                t.nums(&[c.delta_ca, c.bracket, c.p_plus, c.p_minus, c.wrong_plus, c.wrong_minus, c.loss_plus, c.loss_minus]);
                summary.push(format!(
                    "crossing at Δ_ca = {:.2} MHz: P = {:.4}, wrong-initial ≤ {:.4}, losses ≤ {:.4}",
                    c.delta_ca,
                    c.efficiency(),
                    c.max_wrong(),
                    c.max_loss()
                ));
            }
            if found.is_empty() {
                summary.push("no crossings found".into());
            }
            w.write("crossings.csv", &t.text)?;
        }
    }

    let mut manifest = String::new();
    writeln!(manifest, "# run manifest").unwrap();
    writeln!(manifest, "command = {}", command.name()).unwrap();
    writeln!(manifest, "version = {VERSION}").unwrap();
    writeln!(manifest, "seedless = true").unwrap();
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(manifest, "{TIMESTAMP_KEY} = {secs}").unwrap();
    let names: Vec<String> = w.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    writeln!(manifest, "files = {}", names.join(", ")).unwrap();
    writeln!(manifest, "failed_points = {}", failures.len()).unwrap();
    writeln!(manifest, "\n# resolved configuration").unwrap();
    manifest.push_str(&config.to_text());
    w.write("manifest.txt", &manifest)?;

    Ok(RunReport { command, files: w.files, failures, summary })
}

/// Manifest text without the timestamp line.
pub fn manifest_without_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_KEY))
        .collect::<Vec<_>>()
        .join("\n")
}

#[doc(hidden)]
pub fn outcome_summary(o: &PulseOutcome) -> String {
    format!("P+ {:.4} P- {:.4} loss {:.4}", o.p_plus, o.p_minus, o.loss_total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_twelve_digits() {
        assert_eq!(fmt_num(0.78), "7.80000000000e-1");
        assert_eq!(fmt_num(-1234.5), "-1.23450000000e3");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn level_labels_become_column_names() {
        assert_eq!(column_name("F'=1,m=-1"), "Fp1_m-1");
        assert_eq!(column_name("plus"), "plus");
    }

    #[test]
    fn timestamp_is_stripped() {
        let m = "a = 1\ngenerated_unix = 5\nb = 2";
        assert_eq!(manifest_without_timestamp(m), "a = 1\nb = 2");
    }
}
