//! Run directories, CSV/JSON writers and trajectory round trips.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use landau_core::inequalities::{summary_table, InequalityVerdict};
use landau_core::io::{load_snapshot, save_snapshot, sha256_hex};
use landau_core::solver::{StepDiagnostics, Trajectory};
use landau_core::{CollisionOperator, LabError, VelocityGrid};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Version string recorded in every run directory.
pub fn version_string() -> String {
    format!(
        "landau-lab {} ({})",
        env!("CARGO_PKG_VERSION"),
        env!("LANDAU_LAB_GIT_DESCRIBE")
    )
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Create the directory and record the resolved configuration and version.
    pub fn create(config: &RunConfig) -> anyhow::Result<Self> {
        let root = config.out.clone();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        let dir = Self { root };
        dir.write_json("config.json", config)?;
        dir.write_text("VERSION", &format!("{}\n", version_string()))?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
        let path = self.path(name);
        let mut writer = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// `verdicts.jsonl` plus `summary.txt`, which ends with a digest of the verdicts.
    pub fn write_verdicts(&self, verdicts: &[InequalityVerdict]) -> anyhow::Result<String> {
        let mut lines = String::new();
        for v in verdicts {
            lines.push_str(&v.to_json_line());
            lines.push('\n');
        }
        let digest = sha256_hex(lines.as_bytes());
        self.write_text("verdicts.jsonl", &lines)?;
        let summary = format!("{}verdicts digest {digest}\n", summary_table(verdicts));
        self.write_text("summary.txt", &summary)?;
        Ok(summary)
    }
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub time: f64,
    pub mass: f64,
    pub momx: f64,
    pub momy: f64,
    pub momz: f64,
    pub energy: f64,
    #[serde(rename = "H")]
    pub entropy: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "relH")]
    pub relative_entropy: f64,
    #[serde(rename = "M5")]
    pub m5: f64,
    #[serde(rename = "Ml")]
    pub ml: f64,
    pub drift_max: f64,
    pub dt: f64,
    pub step_drift: f64,
    pub entropy_budget: f64,
}

impl From<&StepDiagnostics> for DiagnosticsRow {
    fn from(d: &StepDiagnostics) -> Self {
        Self {
            time: d.time,
            mass: d.mass,
            momx: d.momentum[0],
            momy: d.momentum[1],
            momz: d.momentum[2],
            energy: d.energy,
            entropy: d.entropy,
            dissipation: d.dissipation,
            relative_entropy: d.relative_entropy,
            m5: d.m5,
            ml: d.ml,
            drift_max: d.drift_max,
            dt: d.dt,
            step_drift: d.step_drift,
            entropy_budget: d.entropy_budget,
        }
    }
}

impl From<DiagnosticsRow> for StepDiagnostics {
    fn from(r: DiagnosticsRow) -> Self {
        Self {
            time: r.time,
            dt: r.dt,
            mass: r.mass,
            momentum: [r.momx, r.momy, r.momz],
            energy: r.energy,
            entropy: r.entropy,
            dissipation: r.dissipation,
            relative_entropy: r.relative_entropy,
            m5: r.m5,
            ml: r.ml,
            drift_max: r.drift_max,
            step_drift: r.step_drift,
            entropy_budget: r.entropy_budget,
        }
    }
}

const SNAPSHOT_DIR: &str = "snapshots";

/// Write `diagnostics.csv` and one snapshot file per stored state.
pub fn write_trajectory(dir: &RunDir, trajectory: &Trajectory) -> anyhow::Result<()> {
    dir.write_csv(
        "diagnostics.csv",
        trajectory.diagnostics.iter().map(DiagnosticsRow::from),
    )?;
    let snapshots = dir.path(SNAPSHOT_DIR);
    fs::create_dir_all(&snapshots).with_context(|| format!("creating {}", snapshots.display()))?;
    for (i, (t, f)) in trajectory.snapshots.iter().enumerate() {
        let path = snapshots.join(format!("snapshot_{i:05}.lgrid"));
        save_snapshot(&path, f, trajectory.gamma, *t).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Read a trajectory directory written by [`write_trajectory`].
pub fn read_trajectory(root: &Path, moment_order: f64) -> anyhow::Result<Trajectory> {
    let csv_path = root.join("diagnostics.csv");
    let mut reader = csv::Reader::from_path(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let diagnostics = reader
        .deserialize::<DiagnosticsRow>()
        .map(|r| r.map(StepDiagnostics::from))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("parsing {}", csv_path.display()))?;

    let snap_dir = root.join(SNAPSHOT_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .with_context(|| format!("listing {}", snap_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "lgrid"));
    paths.sort();
    let mut gamma = None;
    let mut grid: Option<Arc<VelocityGrid>> = None;
    let mut snapshots = Vec::with_capacity(paths.len());
    for path in &paths {
        let mut snap = load_snapshot(path).with_context(|| format!("reading {}", path.display()))?;
        match &grid {
            Some(g)
                if g.points_per_axis() == snap.grid.points_per_axis() && g.half_extent() == snap.grid.half_extent() =>
            {
                snap.grid = g.clone();
            }
            Some(_) => {
                return Err(LabError::Format(format!("{} lives on a different grid", path.display())).into());
            }
            None => grid = Some(snap.grid.clone()),
        }
        gamma = Some(snap.gamma);
        let time = snap.time;
        snapshots.push((time, snap.into_distribution()?));
    }
    let gamma = gamma.ok_or_else(|| LabError::InsufficientData(format!("no snapshots in {}", snap_dir.display())))?;
    if diagnostics.is_empty() {
        let op = CollisionOperator::new(grid.expect("grid of first snapshot"), gamma)?;
        return Ok(Trajectory::from_snapshots(&op, moment_order, snapshots)?);
    }
    Ok(Trajectory {
        gamma,
        moment_order,
        snapshots,
        diagnostics,
    })
}
