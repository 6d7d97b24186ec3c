//! File formats: legacy VTK, OBJ, CSV and JSON.
//!
//! Every writer takes a metadata list that ends up in comments (OBJ, CSV),
//! the title line (VTK) or a `metadata` object (JSON).

use std::io::{self, Write};

use rscp_core::density::StateInfo;
use rscp_core::surface::ContourSet;
use rscp_core::{DensityGrid, TriangleMesh};
use serde_json::{json, Map, Value};

use crate::format::{num, round_sig};

pub type Meta = Vec<(String, String)>;

/// Labels, parameters and quasi numbers as key/value pairs.
pub fn state_meta(info: &StateInfo) -> Meta {
    let q = &info.quasi;
    vec![
        ("n".into(), info.labels.n.to_string()),
        ("l".into(), info.labels.l.to_string()),
        ("m".into(), info.labels.m.to_string()),
        ("Z".into(), num(info.params.z)),
        ("b".into(), num(info.params.b)),
        ("c".into(), num(info.params.c)),
        ("m_prime".into(), num(q.m_prime)),
        ("gamma1".into(), num(q.gamma1)),
        ("k".into(), q.k.to_string()),
        ("l_prime".into(), num(q.l_prime)),
        ("n_r".into(), q.n_r.to_string()),
        ("n_prime".into(), num(q.n_prime)),
        ("lambda".into(), num(q.lambda)),
        ("E".into(), num(q.energy)),
    ]
}

fn comment_lines(out: &mut (impl Write + ?Sized), meta: &Meta) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Metadata as a JSON object (values that parse as numbers stay numbers).
pub fn meta_json(meta: &Meta) -> Value {
    let mut map = Map::new();
    for (k, v) in meta {
        let value = match v.parse::<f64>() {
            Ok(x) if x.is_finite() => json!(x),
            _ => Value::String(v.clone()),
        };
        map.insert(k.clone(), value);
    }
    Value::Object(map)
}

pub fn write_vtk(
    out: &mut (impl Write + ?Sized),
    grid: &DensityGrid,
    meta: &Meta,
) -> io::Result<()> {
    let spec = grid.spec();
    let n = spec.n_points;
    let title: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "rscp density {}", title.join(" "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {n} {n} {n}")?;
    let h = num(-spec.half_extent);
    writeln!(out, "ORIGIN {h} {h} {h}")?;
    let d = num(spec.spacing());
    writeln!(out, "SPACING {d} {d} {d}")?;
    writeln!(out, "POINT_DATA {}", spec.len())?;
    writeln!(out, "SCALARS density float 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for row in grid.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_obj(
    out: &mut (impl Write + ?Sized),
    mesh: &TriangleMesh,
    meta: &Meta,
) -> io::Result<()> {
    comment_lines(out, meta)?;
    writeln!(out, "# vertices={}", mesh.vertices.len())?;
    writeln!(out, "# triangles={}", mesh.triangles.len())?;
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", num(v[0]), num(v[1]), num(v[2]))?;
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

pub fn write_contours_csv(
    out: &mut (impl Write + ?Sized),
    sets: &[ContourSet],
    meta: &Meta,
) -> io::Result<()> {
    comment_lines(out, meta)?;
    writeln!(out, "level,polyline,closed,index,y,z")?;
    for set in sets {
        for (pi, line) in set.polylines.iter().enumerate() {
            for (i, p) in line.points.iter().enumerate() {
                writeln!(
                    out,
                    "{},{pi},{},{i},{},{}",
                    num(set.level),
                    line.closed,
                    num(p[0]),
                    num(p[1])
                )?;
            }
        }
    }
    Ok(())
}

pub fn contours_json(sets: &[ContourSet], meta: &Meta) -> Value {
    let sets: Vec<Value> = sets
        .iter()
        .map(|s| {
            json!({
                "level": round_sig(s.level, 9),
                "polylines": s.polylines.iter().map(|p| json!({
                    "closed": p.closed,
                    "points": p.points.iter().map(|q| [round_sig(q[0], 9), round_sig(q[1], 9)]).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "metadata": meta_json(meta), "contours": sets })
}

/// Recursively rounds every float in a JSON value.
pub fn round_json(value: Value, digits: usize) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => json!(round_sig(n.as_f64().unwrap_or(0.0), digits)),
        Value::Array(a) => Value::Array(a.into_iter().map(|v| round_json(v, digits)).collect()),
        Value::Object(o) => Value::Object(
            o.into_iter()
                .map(|(k, v)| (k, round_json(v, digits)))
                .collect(),
        ),
        other => other,
    }
}

pub fn write_json(out: &mut (impl Write + ?Sized), value: &Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}
