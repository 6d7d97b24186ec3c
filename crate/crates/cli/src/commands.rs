//! Single-state subcommands.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rscp_core::density::{self, StateInfo};
use rscp_core::states::potential_v;
use rscp_core::surface;
use rscp_core::verify::{self, VerifyOptions};
use rscp_core::{BoundState, DensityGrid, GridSpec, PotentialParams, StateError, StateLabels};
use serde_json::json;

use crate::format::{num, parse_levels, parse_range, round_sig};
use crate::writers::{self, state_meta, Meta};
use crate::{
    CliError, GridArgs, GridCmd, GridScale, IsosurfaceCmd, PotentialArgs, SliceCmd, SliceFormat,
    StateArgs, VerifyCmd,
};

pub fn labels_params(a: &StateArgs) -> Result<(StateLabels, PotentialParams), CliError> {
    Ok((
        StateLabels::new(a.n, a.l, a.m),
        PotentialParams::new(a.z, a.b, a.c)?,
    ))
}

pub fn bound_state(a: &StateArgs) -> Result<BoundState, CliError> {
    let (labels, params) = labels_params(a)?;
    Ok(BoundState::new(labels, params)?)
}

/// Absolute-density grid with an explicit or automatic extent.
pub fn density_grid(state: &BoundState, g: &GridArgs) -> Result<DensityGrid, CliError> {
    let h = match g.extent {
        Some(h) => h,
        None => density::auto_extent(state, g.coverage)?,
    };
    Ok(density::build_grid(state, GridSpec::new(g.n_points, h)?))
}

pub fn grid_meta(grid: &DensityGrid) -> Meta {
    let spec = grid.spec();
    vec![
        ("N".into(), spec.n_points.to_string()),
        ("extent".into(), num(spec.half_extent)),
    ]
}

/// Writes through `f` to `path`, or to standard output.
pub fn emit<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::io(dir.display().to_string(), e))?;
            }
            let file = File::create(p).map_err(|e| CliError::io(p.display().to_string(), e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(p.display().to_string(), e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io("standard output", e))
        }
    }
}

pub fn state_json(info: &StateInfo) -> serde_json::Value {
    let q = &info.quasi;
    let r = |x: f64| round_sig(x, 12);
    json!({
        "n": info.labels.n,
        "l": info.labels.l,
        "m": info.labels.m,
        "Z": r(info.params.z),
        "b": r(info.params.b),
        "c": r(info.params.c),
        "m_prime": r(q.m_prime),
        "gamma1": r(q.gamma1),
        "k": q.k,
        "l_prime": r(q.l_prime),
        "n_r": q.n_r,
        "n_prime": r(q.n_prime),
        "lambda": r(q.lambda),
        "E": r(q.energy),
    })
}

pub fn state(a: &StateArgs) -> Result<(), CliError> {
    let (labels, params) = labels_params(a)?;
    let quasi = rscp_core::states::map_quantum_numbers(labels, params)?;
    let info = StateInfo {
        labels,
        params,
        quasi,
    };
    emit(None, |w| writers::write_json(w, &state_json(&info)))
}

pub fn potential(a: &PotentialArgs) -> Result<(), CliError> {
    let params = PotentialParams::new(a.z, a.b, a.c)?;
    let rs = parse_range(&a.r)?;
    let thetas = parse_range(&a.theta)?;
    let to_rad = |t: f64| if a.degrees { t * PI / 180.0 } else { t };
    let (coord, rows): (&str, Vec<(f64, f64, f64)>) = match (rs.len(), thetas.len()) {
        (1, _) => (
            "theta",
            thetas.iter().map(|&t| (t, rs[0], to_rad(t))).collect(),
        ),
        (_, 1) => ("r", rs.iter().map(|&r| (r, r, to_rad(thetas[0]))).collect()),
        _ => {
            return Err(CliError::Validation(
                "only one of --r and --theta may be a range".into(),
            ))
        }
    };
    let mut values = Vec::with_capacity(rows.len());
    for &(x, r, theta) in &rows {
        let v = match potential_v(&params, r, theta) {
            Ok(v) => Some(v),
            Err(StateError::Pole { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        values.push((x, v));
    }
    let fixed = if coord == "theta" {
        ("r".to_string(), num(rs[0]))
    } else {
        ("theta".to_string(), num(thetas[0]))
    };
    let meta: Meta = vec![
        ("Z".into(), num(params.z)),
        ("b".into(), num(params.b)),
        ("c".into(), num(params.c)),
        fixed,
        (
            "angle_unit".into(),
            if a.degrees { "deg" } else { "rad" }.into(),
        ),
    ];
    emit(a.out.output.as_deref(), |w| {
        for (k, v) in &meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "{coord},V")?;
        for (x, v) in &values {
            match v {
                Some(v) => writeln!(w, "{},{}", num(*x), num(*v))?,
                None => writeln!(w, "{},", num(*x))?,
            }
        }
        Ok(())
    })
}

pub fn grid(a: &GridCmd) -> Result<(), CliError> {
    let state = bound_state(&a.state)?;
    let mut grid = density_grid(&state, &a.grid)?;
    if a.scale == GridScale::Relative {
        grid = density::normalize_relative(&grid)?;
    }
    let mut meta = state_meta(&StateInfo::of(&state));
    meta.extend(grid_meta(&grid));
    meta.push((
        "scale".into(),
        match a.scale {
            GridScale::Absolute => "absolute",
            GridScale::Relative => "relative",
        }
        .into(),
    ));
    emit(a.out.output.as_deref(), |w| {
        writers::write_vtk(w, &grid, &meta)
    })
}

/// Mesh at `level` on the relative grid, optionally cut away.
pub fn isosurface_mesh(
    rel: &DensityGrid,
    level: f64,
    cutaway: bool,
) -> Result<rscp_core::TriangleMesh, CliError> {
    let mesh = surface::marching_cubes(rel, level)?;
    Ok(if cutaway {
        surface::apply_cutaway(&mesh, rel, level)?
    } else {
        mesh
    })
}

pub fn isosurface(a: &IsosurfaceCmd) -> Result<(), CliError> {
    let state = bound_state(&a.state)?;
    let rel = density::normalize_relative(&density_grid(&state, &a.grid)?)?;
    let mesh = isosurface_mesh(&rel, a.level, a.cutaway)?;
    let mut meta = state_meta(&StateInfo::of(&state));
    meta.extend(grid_meta(&rel));
    meta.push(("level".into(), num(a.level)));
    meta.push(("cutaway".into(), a.cutaway.to_string()));
    emit(a.out.output.as_deref(), |w| {
        writers::write_obj(w, &mesh, &meta)
    })
}

pub fn slice(a: &SliceCmd) -> Result<(), CliError> {
    let levels = parse_levels(&a.levels)?;
    let state = bound_state(&a.state)?;
    let rel = density::normalize_relative(&density_grid(&state, &a.grid)?)?;
    let sets = surface::slice_contour(&rel, &levels)?;
    let mut meta = state_meta(&StateInfo::of(&state));
    meta.extend(grid_meta(&rel));
    meta.push(("plane".into(), "x=0,y>=0,z>=0".into()));
    emit(a.out.output.as_deref(), |w| match a.format {
        SliceFormat::Csv => writers::write_contours_csv(w, &sets, &meta),
        SliceFormat::Json => writers::write_json(w, &writers::contours_json(&sets, &meta)),
    })
}

pub fn verify_report(
    state: &BoundState,
    grid: Option<&GridArgs>,
    samples: usize,
    seed: u64,
) -> Result<rscp_core::VerificationReport, CliError> {
    let options = VerifyOptions {
        samples,
        seed,
        grid_points: grid.map(|g| g.n_points),
        coverage: grid.map_or(density::DEFAULT_COVERAGE, |g| g.coverage),
    };
    Ok(verify::verify_state(state, &options)?)
}

pub fn report_json(report: &rscp_core::VerificationReport) -> serde_json::Value {
    let value = serde_json::to_value(report).unwrap_or(serde_json::Value::Null);
    writers::round_json(value, 12)
}

pub fn verify(a: &VerifyCmd) -> Result<(), CliError> {
    let state = bound_state(&a.state)?;
    let grid = (!a.no_grid).then_some(&a.grid);
    let report = verify_report(&state, grid, a.samples, a.seed)?;
    emit(a.out.output.as_deref(), |w| {
        writers::write_json(w, &report_json(&report))
    })?;
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}
