//! Batch runs from JSON job files or built-in presets.
//!
//! Runs execute concurrently on the current thread pool; each writes its own
//! files, and `manifest.json` is assembled in run order once all are done.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rscp_core::density::{self, StateInfo};
use rscp_core::verify;
use rscp_core::{BoundState, GridSpec, PotentialParams, StateLabels};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{emit, isosurface_mesh, report_json, state_json, verify_report};
use crate::format::{num, round_sig};
use crate::writers::{self, state_meta, Meta};
use crate::{CliError, GridArgs, Preset, SweepCmd, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Grid,
    Isosurface,
    Slice,
    Verify,
    Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    #[serde(rename = "N", default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub extent: Option<f64>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
}

fn default_points() -> usize {
    density::DEFAULT_POINTS
}

fn default_coverage() -> f64 {
    density::DEFAULT_COVERAGE
}

fn default_z() -> f64 {
    1.0
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            n_points: default_points(),
            extent: None,
            coverage: default_coverage(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub n: u32,
    pub l: u32,
    pub m: i32,
    #[serde(rename = "Z", default = "default_z")]
    pub z: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub outputs: Vec<Output>,
    /// Isosurface levels and pole-concentration levels.
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Contour levels for `slice`; 10, 20, …, 100 when empty.
    #[serde(default)]
    pub slice_levels: Vec<f64>,
    #[serde(default)]
    pub cutaway: bool,
    /// Subdirectory of the job output directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub runs: Vec<RunSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub kind: &'static str,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub name: String,
    pub status: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Value>,
    pub artifacts: Vec<Artifact>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Value>,
}

const TABLE1_STATES: [(u32, u32, i32); 22] = [
    (2, 1, 0),
    (3, 1, 0),
    (3, 2, 1),
    (4, 1, 0),
    (4, 2, 1),
    (4, 3, 0),
    (4, 3, 2),
    (5, 1, 0),
    (5, 2, 1),
    (5, 3, 0),
    (5, 3, 2),
    (5, 4, 1),
    (5, 4, 3),
    (6, 1, 0),
    (6, 2, 1),
    (6, 3, 0),
    (6, 3, 2),
    (6, 4, 1),
    (6, 4, 3),
    (6, 5, 0),
    (6, 5, 2),
    (6, 5, 4),
];

/// The 22 states of the isosurface table.
pub fn table1_states() -> Vec<StateLabels> {
    TABLE1_STATES
        .iter()
        .map(|&(n, l, m)| StateLabels::new(n, l, m))
        .collect()
}

fn run_spec(
    labels: StateLabels,
    b: f64,
    c: f64,
    outputs: &[Output],
    levels: &[f64],
    cutaway: bool,
) -> RunSpec {
    RunSpec {
        name: None,
        n: labels.n,
        l: labels.l,
        m: labels.m,
        z: 1.0,
        b,
        c,
        grid: GridSettings::default(),
        outputs: outputs.to_vec(),
        levels: levels.to_vec(),
        slice_levels: Vec::new(),
        cutaway,
        output_dir: None,
    }
}

/// Built-in parameter matrices `table1` to `table5`.
pub fn preset(p: Preset) -> JobSpec {
    use Output::*;
    let mut runs = Vec::new();
    match p {
        Preset::Table1 => {
            for c in [0.0, 0.5, 5.0] {
                for s in table1_states() {
                    runs.push(run_spec(s, 0.5, c, &[Isosurface, Stats], &[50.0], true));
                }
            }
        }
        Preset::Table2 => {
            for c in [0.0, 0.5, 5.0] {
                for s in table1_states() {
                    runs.push(run_spec(s, 0.5, c, &[Slice], &[], false));
                }
            }
        }
        Preset::Table3 => {
            let levels = [10.0, 30.0, 50.0, 70.0, 90.0, 99.0];
            for c in [0.5, 10.0] {
                runs.push(run_spec(
                    StateLabels::new(6, 5, 0),
                    0.5,
                    c,
                    &[Isosurface, Stats],
                    &levels,
                    true,
                ));
            }
        }
        Preset::Table4 => {
            let s = StateLabels::new(5, 1, 0);
            for b in [0.0, 5.0, 10.0, 25.0, 40.0, 80.0] {
                runs.push(run_spec(s, b, 0.5, &[Isosurface, Stats], &[50.0], true));
            }
            for c in [0.5, 5.0, 10.0, 25.0, 40.0, 80.0] {
                runs.push(run_spec(s, 0.5, c, &[Isosurface, Stats], &[50.0], true));
            }
        }
        Preset::Table5 => {
            for b in [-0.5, 0.0, 0.5] {
                runs.push(run_spec(
                    StateLabels::new(4, 1, 0),
                    b,
                    0.5,
                    &[Isosurface, Stats],
                    &[50.0],
                    true,
                ));
            }
        }
    }
    JobSpec {
        output_dir: None,
        runs,
    }
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Table1 => "table1",
        Preset::Table2 => "table2",
        Preset::Table3 => "table3",
        Preset::Table4 => "table4",
        Preset::Table5 => "table5",
    }
}

pub fn default_run_name(r: &RunSpec) -> String {
    format!(
        "n{}_l{}_m{}_Z{}_b{}_c{}",
        r.n,
        r.l,
        r.m,
        num(r.z),
        num(r.b),
        num(r.c)
    )
}

struct RunFailure {
    code: i32,
    reason: String,
}

impl From<CliError> for RunFailure {
    fn from(e: CliError) -> Self {
        Self {
            code: e.exit_code(),
            reason: e.to_string(),
        }
    }
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn execute_run(
    spec: &RunSpec,
    name: &str,
    root: &Path,
    artifacts: &mut Vec<Artifact>,
    stats: &mut Option<Value>,
) -> Result<(), RunFailure> {
    let labels = StateLabels::new(spec.n, spec.l, spec.m);
    let params = PotentialParams::new(spec.z, spec.b, spec.c).map_err(CliError::from)?;
    let state = BoundState::new(labels, params).map_err(CliError::from)?;
    let info = StateInfo::of(&state);
    let dir = match &spec.output_dir {
        Some(d) => root.join(d),
        None => root.to_path_buf(),
    };
    let has = |o: Output| spec.outputs.contains(&o);
    let iso_levels = if spec.levels.is_empty() {
        vec![50.0]
    } else {
        spec.levels.clone()
    };

    let needs_grid = has(Output::Grid)
        || has(Output::Isosurface)
        || has(Output::Slice)
        || (has(Output::Stats) && !spec.levels.is_empty());
    let grid = if needs_grid {
        let g = &spec.grid;
        let h = match g.extent {
            Some(h) => h,
            None => density::auto_extent(&state, g.coverage).map_err(CliError::from)?,
        };
        let spec = GridSpec::new(g.n_points, h).map_err(CliError::from)?;
        Some(density::build_grid(&state, spec))
    } else {
        None
    };
    let rel = match &grid {
        Some(g) => Some(density::normalize_relative(g).map_err(CliError::from)?),
        None => None,
    };
    let mut meta: Meta = state_meta(&info);
    if let Some(g) = &grid {
        meta.extend(crate::commands::grid_meta(g));
    }

    if let (true, Some(g)) = (has(Output::Grid), &grid) {
        let path = dir.join(format!("{name}.vtk"));
        let mut m = meta.clone();
        m.push(("scale".into(), "absolute".into()));
        emit(Some(&path), |w| writers::write_vtk(w, g, &m))?;
        artifacts.push(Artifact {
            kind: "grid",
            path: relative(root, &path),
            level: None,
        });
    }
    if let (true, Some(rel)) = (has(Output::Isosurface), &rel) {
        for &level in &iso_levels {
            let mesh = isosurface_mesh(rel, level, spec.cutaway)?;
            let path = dir.join(format!("{name}_P{}.obj", num(level)));
            let mut m = meta.clone();
            m.push(("level".into(), num(level)));
            m.push(("cutaway".into(), spec.cutaway.to_string()));
            emit(Some(&path), |w| writers::write_obj(w, &mesh, &m))?;
            artifacts.push(Artifact {
                kind: "isosurface",
                path: relative(root, &path),
                level: Some(level),
            });
        }
    }
    if let (true, Some(rel)) = (has(Output::Slice), &rel) {
        let levels = if spec.slice_levels.is_empty() {
            rscp_core::surface::default_contour_levels()
        } else {
            spec.slice_levels.clone()
        };
        let sets = rscp_core::surface::slice_contour(rel, &levels).map_err(CliError::from)?;
        let path = dir.join(format!("{name}_slice.csv"));
        let mut m = meta.clone();
        m.push(("plane".into(), "x=0,y>=0,z>=0".into()));
        emit(Some(&path), |w| writers::write_contours_csv(w, &sets, &m))?;
        artifacts.push(Artifact {
            kind: "slice",
            path: relative(root, &path),
            level: None,
        });
    }
    if has(Output::Stats) {
        let mean_r = verify::mean_radius(&state).map_err(CliError::from)?;
        let mean_cos = verify::mean_abs_cos(&state).map_err(CliError::from)?;
        let mut pole = Vec::new();
        if let Some(rel) = &rel {
            for &level in &spec.levels {
                let v =
                    rscp_core::surface::pole_concentration(rel, level).map_err(CliError::from)?;
                pole.push(json!({ "level": round_sig(level, 12), "value": round_sig(v, 12) }));
            }
        }
        *stats = Some(json!({
            "mean_radius": round_sig(mean_r, 12),
            "mean_abs_cos": round_sig(mean_cos, 12),
            "pole_concentration": pole,
        }));
    }
    if has(Output::Verify) {
        let g = GridArgs {
            n_points: spec.grid.n_points,
            extent: spec.grid.extent,
            coverage: spec.grid.coverage,
        };
        let report = verify_report(&state, Some(&g), 100, verify::DEFAULT_SEED)?;
        let path = dir.join(format!("{name}_verify.json"));
        emit(Some(&path), |w| {
            writers::write_json(w, &report_json(&report))
        })?;
        artifacts.push(Artifact {
            kind: "verify",
            path: relative(root, &path),
            level: None,
        });
        if !report.pass {
            return Err(CliError::Verification(format!("{name} failed verification")).into());
        }
    }
    Ok(())
}

/// Executes every run and writes `manifest.json` into `root`.
/// Returns the per-run records in input order.
pub fn run_job(job: &JobSpec, source: &str, root: &Path) -> Result<Vec<RunRecord>, CliError> {
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root.display().to_string(), e))?;
    let records: Vec<RunRecord> = job
        .runs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let name = spec.name.clone().unwrap_or_else(|| default_run_name(spec));
            let mut artifacts = Vec::new();
            let mut stats = None;
            let outcome = execute_run(spec, &name, root, &mut artifacts, &mut stats);
            let state = PotentialParams::new(spec.z, spec.b, spec.c)
                .ok()
                .and_then(|p| {
                    rscp_core::states::map_quantum_numbers(
                        StateLabels::new(spec.n, spec.l, spec.m),
                        p,
                    )
                    .ok()
                    .map(|q| StateInfo {
                        labels: StateLabels::new(spec.n, spec.l, spec.m),
                        params: p,
                        quasi: q,
                    })
                })
                .map(|info| state_json(&info));
            let (status, exit_code, reason) = match outcome {
                Ok(()) => ("ok", EXIT_OK, None),
                Err(f) if f.code == crate::EXIT_VALIDATION => ("skipped", f.code, Some(f.reason)),
                Err(f) => ("failed", f.code, Some(f.reason)),
            };
            RunRecord {
                index,
                name,
                status,
                exit_code,
                reason,
                state,
                artifacts,
                stats,
            }
        })
        .collect();

    let manifest = json!({
        "tool": "rscp",
        "version": env!("CARGO_PKG_VERSION"),
        "source": source,
        "runs": records,
    });
    let path = root.join("manifest.json");
    emit(Some(&path), |w| writers::write_json(w, &manifest))?;
    Ok(records)
}

pub fn run(a: &SweepCmd) -> Result<(), CliError> {
    let (mut job, source) = match (&a.job, a.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(path.display().to_string(), e))?;
            let job: JobSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("job file {}: {e}", path.display())))?;
            let source = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            (job, source)
        }
        (None, Some(p)) => (preset(p), preset_name(p).to_string()),
        (None, None) => return Err(CliError::Validation("sweep needs --job or --preset".into())),
    };
    if let Some(n) = a.n_points {
        for r in &mut job.runs {
            r.grid.n_points = n;
        }
    }
    let root = a
        .output
        .clone()
        .or_else(|| job.output_dir.clone())
        .ok_or_else(|| {
            CliError::Validation("sweep needs --output or output_dir in the job".into())
        })?;
    let records = run_job(&job, &source, &root)?;
    let worst = records.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK);
    if worst == EXIT_OK {
        return Ok(());
    }
    let bad: Vec<String> = records
        .iter()
        .filter(|r| r.exit_code != EXIT_OK)
        .map(|r| format!("{} ({})", r.name, r.status))
        .collect();
    let message = format!(
        "{} of {} runs did not complete: {}",
        bad.len(),
        records.len(),
        bad.join(", ")
    );
    Err(match worst {
        crate::EXIT_IO => CliError::io(message, std::io::Error::other("run output")),
        crate::EXIT_VERIFICATION => CliError::Verification(message),
        _ => CliError::Validation(message),
    })
}
