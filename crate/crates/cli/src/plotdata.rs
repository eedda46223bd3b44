//! Columnar plot data derived from the files a manifest lists.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::feasibility::SWEEP_FILE;
use crate::manifest::{Manifest, ManifestKind, StageStatus, MANIFEST_NAME};
use crate::pipeline::{FRINGE_FILE, INLOOP_FILE, PROBE_FILE, RINGUP_FILE};
use crate::scenario::hex;

pub const PLOT_DIR: &str = "plotdata";

struct Figure {
    tag: &'static str,
    stage: &'static str,
    source: &'static str,
    description: &'static str,
    /// Replacement column header, when the source header is renamed.
    header: Option<&'static str>,
    columns: &'static [&'static str],
}

const FIGURES: &[Figure] = &[
    Figure {
        tag: "fig2",
        stage: "calibration",
        source: FRINGE_FILE,
        description: "open-loop fringes against the phase-locked readout",
        header: None,
        columns: &[
            "t_s: time [s]",
            "z_m: imposed displacement [m]",
            "unlocked_error: open-loop normalized detector difference",
            "locked_error: locked normalized detector difference",
            "locked_estimate_m: locked displacement estimate [m]",
        ],
    },
    Figure {
        tag: "fig3",
        stage: "calibration",
        source: PROBE_FILE,
        description: "probe-tone response against coil current",
        header: None,
        columns: &[
            "trap_frequency_Hz: axial frequency during the series [Hz]",
            "current_A: probe coil current amplitude [A]",
            "tone_rms_m: RMS tone in the residual lock signal [m]",
            "predicted_rms_m: modelled RMS particle motion [m]",
        ],
    },
    Figure {
        tag: "fig4a",
        stage: "interferometric",
        source: INLOOP_FILE,
        description: "in-loop displacement spectrum for one feedback gain",
        header: Some("f_Hz,asd"),
        columns: &["f_Hz: frequency [Hz]", "asd: one-sided amplitude spectral density [m/sqrt(Hz)]"],
    },
    Figure {
        tag: "fig4b",
        stage: "ringup",
        source: RINGUP_FILE,
        description: "mean phonon number during free evolution",
        header: None,
        columns: &[
            "t_s: time since feedback was switched off [s]",
            "mean_phonons: ensemble-mean occupation",
            "sem_phonons: standard error of the mean",
        ],
    },
    Figure {
        tag: "fig5",
        stage: "feasibility",
        source: SWEEP_FILE,
        description: "optimally cooled occupation against cavity input flux",
        header: None,
        columns: &[
            "n_in: input photon flux [1/s]",
            "phonons: cooled occupation",
            "finesse: cavity finesse",
        ],
    },
];

pub fn available() -> String {
    FIGURES.iter().map(|f| f.tag).collect::<Vec<_>>().join(", ")
}

/// Runs whose outputs feed the figure: the manifest itself, or every run of
/// a sweep.
fn sources(manifest: &Manifest, dir: &Path) -> Result<Vec<(String, Manifest, PathBuf)>, CliError> {
    if manifest.kind != ManifestKind::Sweep {
        return Ok(vec![(String::new(), manifest.clone(), dir.to_path_buf())]);
    }
    manifest
        .runs
        .iter()
        .map(|r| {
            let sub = dir.join(&r.directory);
            let m = Manifest::load(&sub.join(MANIFEST_NAME))?;
            Ok((format!("_{}", r.directory), m, sub))
        })
        .collect()
}

fn read_verified(m: &Manifest, dir: &Path, name: &str) -> Result<String, CliError> {
    let path = dir.join(name);
    let entry = m.file(name).ok_or_else(|| CliError::Manifest {
        path: dir.join(MANIFEST_NAME),
        message: format!("'{name}' is not in the file inventory"),
    })?;
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    if hex(&Sha256::digest(&bytes)) != entry.sha256 {
        return Err(CliError::Manifest {
            path: dir.join(MANIFEST_NAME),
            message: format!("checksum of '{name}' does not match"),
        });
    }
    String::from_utf8(bytes).map_err(|_| CliError::Manifest {
        path: path.clone(),
        message: "not UTF-8".into(),
    })
}

fn has_analysis(m: &Manifest, fig: &Figure) -> bool {
    let produced = if fig.stage == "feasibility" {
        m.kind == ManifestKind::Feasibility
    } else {
        m.kind == ManifestKind::Run
            && m.stage(fig.stage).map(|s| s.status == StageStatus::Ok).unwrap_or(false)
    };
    produced && m.file(fig.source).is_some()
}

/// Write the data for figure `tag` under `<manifest dir>/plotdata/`.
pub fn emit_plotdata(manifest_path: &Path, tag: &str) -> Result<Vec<PathBuf>, CliError> {
    let fig = FIGURES.iter().find(|f| f.tag == tag).ok_or_else(|| CliError::UnknownFigure {
        tag: tag.to_string(),
        available: available(),
    })?;
    let manifest = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let runs = sources(&manifest, &dir)?;
    if runs.is_empty() || runs.iter().any(|(_, m, _)| !has_analysis(m, fig)) {
        return Err(CliError::MissingAnalysis {
            tag: tag.to_string(),
            stage: fig.stage.to_string(),
        });
    }
    let out_dir = dir.join(PLOT_DIR);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let mut written = Vec::new();
    for (suffix, m, run_dir) in &runs {
        let text = read_verified(m, run_dir, fig.source)?;
        let mut out = String::new();
        let _ = writeln!(out, "# {}: {}", fig.tag, fig.description);
        let _ = writeln!(out, "# source: {}{}", suffix.trim_start_matches('_'), fig.source);
        let _ = writeln!(out, "# scenario_sha256 = {}", m.scenario_sha256);
        let _ = writeln!(out, "# seed = {}", m.seed);
        if let Some(g) = m.stage("interferometric").and_then(|s| s.details.get("gamma_fb_rad_per_s")) {
            if fig.tag == "fig4a" {
                let _ = writeln!(out, "# gamma_fb_rad_per_s = {g}");
            }
        }
        for c in fig.columns {
            let _ = writeln!(out, "# column {c}");
        }
        let mut header_done = false;
        for line in text.lines() {
            if let Some(comment) = line.strip_prefix('#') {
                let _ = writeln!(out, "#{comment}");
            } else if !header_done {
                header_done = true;
                let _ = writeln!(out, "{}", fig.header.unwrap_or(line));
            } else {
                let _ = writeln!(out, "{line}");
            }
        }
        let path = out_dir.join(format!("{}{}.csv", fig.tag, suffix));
        fs::write(&path, out).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
