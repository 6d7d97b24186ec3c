//! Isosurfaces, the octant cutaway, yoz-plane contours and the pole
//! concentration statistic, all on relative (peak = 100) grids.
//!
//! A lattice point is "inside" a level set when its value is strictly
//! greater than the level. Crossings sit on lattice edges at the linearly
//! interpolated position; a crossing that lands exactly on a lattice point
//! is keyed to that point so coincident vertices are welded.
//!
//! The 256-case marching-cubes table is generated once from a per-face rule:
//! on every cube face each run of inside corners is cut off by its own
//! segment, so two diagonal inside corners on a face are always separated.
//! Since the rule only looks at the four corners of the face, the two cubes
//! sharing a face always agree on its segments, and closed level sets come
//! out watertight.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityGrid, GridSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("iso level {0} outside the open interval (0, 100)")]
    LevelOutOfRange(f64),
    #[error("contour level {0} outside (0, 100]")]
    ContourLevelOutOfRange(f64),
    #[error("no voxel reaches level {0}")]
    EmptySupraLevelSet(f64),
}

/// Triangle mesh with a scalar per vertex.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub vertex_scalar: Vec<f64>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_area(&self, t: &[u32; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        let u = sub(b, a);
        let v = sub(c, a);
        0.5 * norm(cross(u, v))
    }

    pub fn centroid(&self, t: &[u32; 3]) -> [f64; 3] {
        let [a, b, c] = t.map(|i| self.vertices[i as usize]);
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ]
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive when normals point outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// How many triangles use each undirected edge.
    pub fn edge_incidence(&self) -> HashMap<(u32, u32), usize> {
        let mut counts = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_incidence().values().all(|&c| c == 2)
    }

    /// Triangles grouped into edge-connected components, each listed by
    /// triangle index in ascending order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.triangles {
            let a = find(&mut parent, t[0] as usize);
            for &v in &t[1..] {
                let b = find(&mut parent, v as usize);
                if a != b {
                    let (lo, hi) = (a.min(b), a.max(b));
                    parent[hi] = lo;
                }
            }
            // re-find so the root stays the minimum
            let _ = find(&mut parent, t[0] as usize);
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            let root = find(&mut parent, t[0] as usize);
            let g = *slot.entry(root).or_insert_with(|| {
                groups.push((root, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(ti);
        }
        groups.into_iter().map(|(_, v)| v).collect()
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }

    /// Checks index bounds and buffer lengths.
    pub fn is_consistent(&self) -> bool {
        let n = self.vertices.len() as u32;
        self.vertex_scalar.len() == self.vertices.len()
            && self.triangles.iter().all(|t| t.iter().all(|&i| i < n))
    }
}

/// One polyline of a contour, in (y, z) coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

/// All contour polylines at one relative level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

/// Levels 10, 20, …, 100.
pub fn default_contour_levels() -> Vec<f64> {
    (1..=10).map(|i| 10.0 * f64::from(i)).collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Triangles with area at or below this are not emitted.
pub const DEGENERATE_AREA: f64 = 1e-12;

// ---------------------------------------------------------------------------
// case table

/// Cube corner c sits at offset (c & 1, c >> 1 & 1, c >> 2 & 1).
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (lower corner, axis).
fn cube_edges() -> [(usize, usize); 12] {
    let mut edges = [(0, 0); 12];
    let mut n = 0;
    for axis in 0..3 {
        for c in 0..8 {
            if c & (1 << axis) == 0 {
                edges[n] = (c, axis);
                n += 1;
            }
        }
    }
    edges
}

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    cube_edges()
        .iter()
        .position(|&(c, ax)| c == lo && ax == axis)
        .expect("corners share an edge")
}

/// Corners of the six faces, counter-clockwise seen from outside.
fn cube_faces() -> [[usize; 4]; 6] {
    let mut faces = [[0; 4]; 6];
    for axis in 0..3 {
        let u = (axis + 1) % 3;
        let v = (axis + 2) % 3;
        for side in 0..2 {
            let order: [(usize, usize); 4] = if side == 1 {
                [(0, 0), (1, 0), (1, 1), (0, 1)]
            } else {
                [(0, 0), (0, 1), (1, 1), (1, 0)]
            };
            let mut face = [0; 4];
            for (slot, (pu, pv)) in order.iter().enumerate() {
                face[slot] = (side << axis) | (pu << u) | (pv << v);
            }
            faces[axis * 2 + side] = face;
        }
    }
    faces
}

type CaseTable = Vec<Vec<[u8; 3]>>;

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

fn build_case_table() -> CaseTable {
    let faces = cube_faces();
    (0..256usize)
        .map(|case| {
            let inside = |c: usize| case & (1 << c) != 0;
            // next[e]: the crossing that follows e along its polygon
            let mut next = [usize::MAX; 12];
            for face in &faces {
                for i in 0..4 {
                    let here = face[i];
                    let ahead = face[(i + 1) % 4];
                    if !(inside(here) && !inside(ahead)) {
                        continue;
                    }
                    // walk back to the first corner of this inside run
                    let mut start = i;
                    for _ in 0..3 {
                        let prev = (start + 3) % 4;
                        if inside(face[prev]) {
                            start = prev;
                        } else {
                            break;
                        }
                    }
                    let before = face[(start + 3) % 4];
                    let exit = edge_between(here, ahead);
                    let entry = edge_between(before, face[start]);
                    next[exit] = entry;
                }
            }
            let mut seen = [false; 12];
            let mut tris = Vec::new();
            for e0 in 0..12 {
                if next[e0] == usize::MAX || seen[e0] {
                    continue;
                }
                let mut ring = Vec::new();
                let mut e = e0;
                while !seen[e] {
                    seen[e] = true;
                    ring.push(e as u8);
                    e = next[e];
                }
                for w in 1..ring.len() - 1 {
                    // reversed fan so normals point from high to low values
                    tris.push([ring[0], ring[w + 1], ring[w]]);
                }
            }
            tris
        })
        .collect()
}

// ---------------------------------------------------------------------------
// lattice crossings

/// Vertex identity on the lattice: a crossing on an edge or a lattice point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Site {
    Edge { point: usize, axis: u8 },
    Point(usize),
}

struct Lattice<'a> {
    grid: &'a DensityGrid,
    spec: GridSpec,
    level: f64,
}

impl<'a> Lattice<'a> {
    fn new(grid: &'a DensityGrid, level: f64) -> Self {
        Self {
            grid,
            spec: *grid.spec(),
            level,
        }
    }

    fn flat(&self, p: [usize; 3]) -> usize {
        self.spec.index(p[0], p[1], p[2])
    }

    fn unflat(&self, idx: usize) -> [usize; 3] {
        let n = self.spec.n_points;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    fn val(&self, p: [usize; 3]) -> f64 {
        self.grid.values()[self.flat(p)]
    }

    fn position(&self, p: [usize; 3]) -> [f64; 3] {
        p.map(|i| self.spec.coord(i))
    }

    /// Site of the crossing on the edge from `p` along `axis`.
    fn site(&self, p: [usize; 3], axis: usize) -> Site {
        let mut q = p;
        q[axis] += 1;
        if self.val(p) == self.level {
            Site::Point(self.flat(p))
        } else if self.val(q) == self.level {
            Site::Point(self.flat(q))
        } else {
            Site::Edge {
                point: self.flat(p),
                axis: axis as u8,
            }
        }
    }

    fn realize(&self, site: Site) -> ([f64; 3], f64) {
        match site {
            Site::Point(idx) => {
                let p = self.unflat(idx);
                (self.position(p), self.val(p))
            }
            Site::Edge { point, axis } => {
                let axis = axis as usize;
                let p = self.unflat(point);
                let mut q = p;
                q[axis] += 1;
                let (va, vb) = (self.val(p), self.val(q));
                let t = (self.level - va) / (vb - va);
                let mut pos = self.position(p);
                let (ca, cb) = (self.spec.coord(p[axis]), self.spec.coord(q[axis]));
                pos[axis] = ca + t * (cb - ca);
                (pos, va + t * (vb - va))
            }
        }
    }
}

/// Collects triangles keyed by lattice sites and assigns vertex indices in
/// first-seen order, which keeps output deterministic.
struct MeshBuilder<'a> {
    lattice: &'a Lattice<'a>,
    index: HashMap<Site, u32>,
    mesh: TriangleMesh,
}

impl<'a> MeshBuilder<'a> {
    fn new(lattice: &'a Lattice<'a>) -> Self {
        Self {
            lattice,
            index: HashMap::new(),
            mesh: TriangleMesh::default(),
        }
    }

    fn vertex(&mut self, site: Site) -> u32 {
        if let Some(&i) = self.index.get(&site) {
            return i;
        }
        let (pos, scalar) = self.lattice.realize(site);
        let i = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(pos);
        self.mesh.vertex_scalar.push(scalar);
        self.index.insert(site, i);
        i
    }

    fn push(&mut self, tri: [Site; 3]) {
        let idx = tri.map(|s| self.vertex(s));
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            return;
        }
        if self.mesh.triangle_area(&idx) <= DEGENERATE_AREA {
            return;
        }
        self.mesh.triangles.push(idx);
    }
}

fn check_iso_level(level: f64) -> Result<(), SurfaceError> {
    if level > 0.0 && level < 100.0 {
        Ok(())
    } else {
        Err(SurfaceError::LevelOutOfRange(level))
    }
}

/// Isosurface of a relative grid at `level` ∈ (0, 100).
///
/// Cells are processed in parallel per z-slab, then merged in cell order.
pub fn marching_cubes(grid: &DensityGrid, level: f64) -> Result<TriangleMesh, SurfaceError> {
    check_iso_level(level)?;
    let lattice = Lattice::new(grid, level);
    let n = lattice.spec.n_points;
    let table = case_table();
    let edges = cube_edges();

    let slabs: Vec<Vec<[Site; 3]>> = (0..n - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    let base = [i, j, k];
                    let mut case = 0usize;
                    for c in 0..8 {
                        let o = corner_offset(c);
                        let p = [i + o[0], j + o[1], k + o[2]];
                        if lattice.val(p) > level {
                            case |= 1 << c;
                        }
                    }
                    for tri in &table[case] {
                        out.push(tri.map(|e| {
                            let (corner, axis) = edges[e as usize];
                            let o = corner_offset(corner);
                            lattice.site([base[0] + o[0], base[1] + o[1], base[2] + o[2]], axis)
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let mut builder = MeshBuilder::new(&lattice);
    for tri in slabs.into_iter().flatten() {
        builder.push(tri);
    }
    Ok(builder.mesh)
}

// ---------------------------------------------------------------------------
// cutaway

/// Whether a point lies strictly inside the removed octant x<0, y<0, z>0.
pub fn in_removed_octant(p: [f64; 3]) -> bool {
    p[0] < 0.0 && p[1] < 0.0 && p[2] > 0.0
}

#[derive(Clone, Copy)]
struct ClipVertex {
    pos: [f64; 3],
    scalar: f64,
}

/// Splits a convex polygon by the plane `sign·p[axis] = 0` into the parts
/// with `sign·p[axis] ≥ 0` and `≤ 0`. Polygons entirely on one side are
/// passed through untouched.
fn split(
    poly: Vec<ClipVertex>,
    axis: usize,
    sign: f64,
) -> (Option<Vec<ClipVertex>>, Option<Vec<ClipVertex>>) {
    let d = |v: &ClipVertex| sign * v.pos[axis];
    if poly.iter().all(|v| d(v) >= 0.0) {
        return (Some(poly), None);
    }
    if poly.iter().all(|v| d(v) <= 0.0) {
        return (None, Some(poly));
    }
    let mut pos_side = Vec::new();
    let mut neg_side = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (d(&a), d(&b));
        if da >= 0.0 {
            pos_side.push(a);
        }
        if da <= 0.0 {
            neg_side.push(a);
        }
        if (da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0) {
            // evaluate from a canonical endpoint so shared edges weld
            let (p, q) = if a.pos < b.pos { (a, b) } else { (b, a) };
            let t = p.pos[axis] / (p.pos[axis] - q.pos[axis]);
            let mut pos = [0.0; 3];
            for (k, out) in pos.iter_mut().enumerate() {
                *out = p.pos[k] + t * (q.pos[k] - p.pos[k]);
            }
            pos[axis] = 0.0;
            let x = ClipVertex {
                pos,
                scalar: p.scalar + t * (q.scalar - p.scalar),
            };
            pos_side.push(x);
            neg_side.push(x);
        }
    }
    (
        (pos_side.len() >= 3).then_some(pos_side),
        (neg_side.len() >= 3).then_some(neg_side),
    )
}

/// The part of a triangle outside the removed octant, as convex polygons.
fn clip_to_kept(tri: Vec<ClipVertex>) -> Vec<Vec<ClipVertex>> {
    let mut kept = Vec::new();
    let (keep, rest) = split(tri, 0, 1.0);
    kept.extend(keep);
    let Some(rest) = rest else { return kept };
    let (keep, rest) = split(rest, 1, 1.0);
    kept.extend(keep);
    let Some(rest) = rest else { return kept };
    let (keep, _removed) = split(rest, 2, -1.0);
    kept.extend(keep);
    kept
}

/// Which of the three exposed faces a point set lies on, if any. Face a is
/// the plane `p[a] = 0` bounded by the other two octant conditions.
fn on_cut_face(points: &[[f64; 3]]) -> Option<usize> {
    let quadrant = |p: &[f64; 3], axis: usize| match axis {
        0 => p[1] <= 0.0 && p[2] >= 0.0,
        1 => p[0] <= 0.0 && p[2] >= 0.0,
        _ => p[0] <= 0.0 && p[1] <= 0.0,
    };
    (0..3).find(|&axis| points.iter().all(|p| p[axis] == 0.0 && quadrant(p, axis)))
}

struct WeldedMesh {
    index: HashMap<[u64; 3], u32>,
    mesh: TriangleMesh,
}

impl WeldedMesh {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            mesh: TriangleMesh::default(),
        }
    }

    fn vertex(&mut self, pos: [f64; 3], scalar: f64) -> u32 {
        // +0.0 and −0.0 are the same point
        let key = pos.map(|c| if c == 0.0 { 0u64 } else { c.to_bits() });
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.mesh.vertices.len() as u32;
        self.mesh
            .vertices
            .push(pos.map(|c| if c == 0.0 { 0.0 } else { c }));
        self.mesh.vertex_scalar.push(scalar);
        self.index.insert(key, i);
        i
    }

    fn polygon(&mut self, poly: &[ClipVertex]) {
        let idx: Vec<u32> = poly.iter().map(|v| self.vertex(v.pos, v.scalar)).collect();
        for w in 1..idx.len() - 1 {
            let t = [idx[0], idx[w], idx[w + 1]];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            if self.mesh.triangle_area(&t) <= DEGENERATE_AREA {
                continue;
            }
            self.mesh.triangles.push(t);
        }
    }
}

/// Removes the octant x<0, y<0, z>0 from a mesh extracted from `grid` at
/// `level`, and caps the three exposed quarter-planes where the field
/// exceeds the level. Cap triangles face into the removed octant.
///
/// Triangles already lying on an exposed face (caps from an earlier pass)
/// are discarded before new caps are built, so the operation is idempotent.
pub fn apply_cutaway(
    mesh: &TriangleMesh,
    grid: &DensityGrid,
    level: f64,
) -> Result<TriangleMesh, SurfaceError> {
    check_iso_level(level)?;
    let mut out = WeldedMesh::new();
    for t in &mesh.triangles {
        let pts = t.map(|i| mesh.vertices[i as usize]);
        if on_cut_face(&pts).is_some() {
            continue;
        }
        let poly: Vec<ClipVertex> = t
            .iter()
            .map(|&i| ClipVertex {
                pos: mesh.vertices[i as usize],
                scalar: mesh.vertex_scalar[i as usize],
            })
            .collect();
        for piece in clip_to_kept(poly) {
            out.polygon(&piece);
        }
    }
    let lattice = Lattice::new(grid, level);
    for face_axis in 0..3 {
        add_cap(&mut out, &lattice, face_axis);
    }
    Ok(out.mesh)
}

/// Fills the exposed quarter-plane `p[face_axis] = 0` with the region above
/// the level, cell by cell (filled marching squares, midpoint decider).
fn add_cap(out: &mut WeldedMesh, lattice: &Lattice<'_>, face_axis: usize) {
    let spec = lattice.spec;
    let c = spec.center();
    let n = spec.n_points;
    // in-plane axes and the index ranges of the exposed quadrant
    let (u, v) = match face_axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let range = |axis: usize| -> (usize, usize) {
        match (face_axis, axis) {
            (2, _) => (0, c),
            (_, 2) => (c, n - 1),
            _ => (0, c),
        }
    };
    let (u0, u1) = range(u);
    let (v0, v1) = range(v);
    let mut normal = [0.0; 3];
    normal[face_axis] = if face_axis == 2 { 1.0 } else { -1.0 };

    for b in v0..v1 {
        for a in u0..u1 {
            let mut corners = [[0usize; 3]; 4];
            for (slot, (da, db)) in [(0, 0), (1, 0), (1, 1), (0, 1)].iter().enumerate() {
                let mut p = [0usize; 3];
                p[face_axis] = c;
                p[u] = a + da;
                p[v] = b + db;
                corners[slot] = p;
            }
            for poly in cell_polygons(lattice, &corners) {
                let verts: Vec<ClipVertex> = poly
                    .into_iter()
                    .map(|(pos, scalar)| ClipVertex { pos, scalar })
                    .collect();
                let mut verts = verts;
                if verts.len() >= 3 {
                    let nrm = cross(
                        sub(verts[1].pos, verts[0].pos),
                        sub(verts[2].pos, verts[0].pos),
                    );
                    if dot(nrm, normal) < 0.0 {
                        verts.reverse();
                    }
                }
                out.polygon(&verts);
            }
        }
    }
}

/// Polygons of the supra-level region within one square cell whose corners
/// are given in cyclic order.
fn cell_polygons(lattice: &Lattice<'_>, corners: &[[usize; 3]; 4]) -> Vec<Vec<([f64; 3], f64)>> {
    let level = lattice.level;
    let vals = corners.map(|p| lattice.val(p));
    let inside = vals.map(|v| v > level);
    let count = inside.iter().filter(|&&b| b).count();
    if count == 0 {
        return Vec::new();
    }
    let crossing = |i: usize| -> ([f64; 3], f64) {
        let (p, q) = (corners[i], corners[(i + 1) % 4]);
        let (lo, hi) = if lattice.flat(p) < lattice.flat(q) {
            (p, q)
        } else {
            (q, p)
        };
        let axis = (0..3)
            .find(|&ax| lo[ax] != hi[ax])
            .expect("adjacent corners");
        lattice.realize(lattice.site(lo, axis))
    };
    let corner_pt = |i: usize| (lattice.position(corners[i]), vals[i]);

    let saddle = count == 2 && inside[0] == inside[2];
    if saddle {
        let mid = 0.25 * vals.iter().sum::<f64>();
        if !(mid > level) {
            // two separate corner triangles
            return (0..4)
                .filter(|&i| inside[i])
                .map(|i| vec![crossing((i + 3) % 4), corner_pt(i), crossing(i)])
                .collect();
        }
    }
    let mut poly = Vec::new();
    for i in 0..4 {
        if inside[i] {
            poly.push(corner_pt(i));
        }
        if inside[i] != inside[(i + 1) % 4] {
            poly.push(crossing(i));
        }
    }
    vec![poly]
}

// ---------------------------------------------------------------------------
// contours

/// Contours of the x = 0 plane restricted to y ≥ 0, z ≥ 0, one set per level.
///
/// Levels must lie in (0, 100]; since "inside" is strict, the level-100 set
/// is empty.
pub fn slice_contour(grid: &DensityGrid, levels: &[f64]) -> Result<Vec<ContourSet>, SurfaceError> {
    for &level in levels {
        if !(level > 0.0 && level <= 100.0) {
            return Err(SurfaceError::ContourLevelOutOfRange(level));
        }
    }
    Ok(levels
        .par_iter()
        .map(|&level| ContourSet {
            level,
            polylines: contour_level(grid, level),
        })
        .collect())
}

fn contour_level(grid: &DensityGrid, level: f64) -> Vec<Polyline> {
    let lattice = Lattice::new(grid, level);
    let spec = lattice.spec;
    let c = spec.center();
    let n = spec.n_points;
    let mut segments: Vec<[Site; 2]> = Vec::new();

    for k in c..n - 1 {
        for j in c..n - 1 {
            // cyclic corner order in the (y, z) plane
            let corners = [[c, j, k], [c, j + 1, k], [c, j + 1, k + 1], [c, j, k + 1]];
            let vals = corners.map(|p| lattice.val(p));
            let inside = vals.map(|v| v > level);
            let edge_site = |i: usize| -> Site {
                let (p, q) = (corners[i], corners[(i + 1) % 4]);
                let lo = if lattice.flat(p) < lattice.flat(q) {
                    p
                } else {
                    q
                };
                let axis = if p[1] != q[1] { 1 } else { 2 };
                lattice.site(lo, axis)
            };
            let crossings: Vec<usize> = (0..4)
                .filter(|&i| inside[i] != inside[(i + 1) % 4])
                .collect();
            match crossings.len() {
                2 => segments.push([edge_site(crossings[0]), edge_site(crossings[1])]),
                4 => {
                    let mid = 0.25 * vals.iter().sum::<f64>();
                    // pair each crossing with its neighbour so that the
                    // centre ends up on the side the midpoint value says
                    let centre_inside = mid > level;
                    let first_inside = if inside[0] { 0 } else { 1 };
                    let pairs = if centre_inside {
                        // outside corners are cut off
                        let o = (first_inside + 1) % 4;
                        [((o + 3) % 4, o), ((o + 1) % 4, (o + 2) % 4)]
                    } else {
                        let i0 = first_inside;
                        [((i0 + 3) % 4, i0), ((i0 + 1) % 4, (i0 + 2) % 4)]
                    };
                    for (a, b) in pairs {
                        segments.push([edge_site(a), edge_site(b)]);
                    }
                }
                _ => {}
            }
        }
    }
    chain_segments(&lattice, segments)
}

fn chain_segments(lattice: &Lattice<'_>, segments: Vec<[Site; 2]>) -> Vec<Polyline> {
    // drop segments collapsed onto a single lattice point
    let segments: Vec<[Site; 2]> = segments.into_iter().filter(|s| s[0] != s[1]).collect();
    let mut incident: HashMap<Site, Vec<usize>> = HashMap::new();
    for (si, s) in segments.iter().enumerate() {
        for site in s {
            incident.entry(*site).or_default().push(si);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    let walk = |start_seg: usize, start_site: Site, used: &mut Vec<bool>| -> (Vec<Site>, bool) {
        let mut sites = vec![start_site];
        let mut seg = start_seg;
        let mut at = start_site;
        loop {
            used[seg] = true;
            let s = segments[seg];
            let other = if s[0] == at { s[1] } else { s[0] };
            sites.push(other);
            at = other;
            if other == start_site {
                return (sites, true);
            }
            match incident[&at].iter().find(|&&t| !used[t]) {
                Some(&t) => seg = t,
                None => return (sites, false),
            }
        }
    };

    // open polylines start at sites with a single incident segment
    for si in 0..segments.len() {
        if used[si] {
            continue;
        }
        for end in segments[si] {
            if !used[si] && incident[&end].len() == 1 {
                let (sites, closed) = walk(si, end, &mut used);
                polylines.push((sites, closed));
            }
        }
    }
    for si in 0..segments.len() {
        if !used[si] {
            let (sites, closed) = walk(si, segments[si][0], &mut used);
            polylines.push((sites, closed));
        }
    }

    polylines
        .into_iter()
        .map(|(sites, closed)| {
            let mut points: Vec<[f64; 2]> = sites
                .iter()
                .map(|&s| {
                    let (p, _) = lattice.realize(s);
                    [p[1], p[2]]
                })
                .collect();
            if closed {
                points.pop();
            }
            Polyline { points, closed }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// statistics

/// Mean of |z|/r over voxels with value ≥ `level`, skipping the origin.
pub fn pole_concentration(grid: &DensityGrid, level: f64) -> Result<f64, SurfaceError> {
    let spec = grid.spec();
    let n = spec.n_points;
    let (sum, count) = grid
        .values()
        .par_chunks(n * n)
        .enumerate()
        .map(|(k, slab)| {
            let z = spec.coord(k);
            let mut sum = 0.0;
            let mut count = 0usize;
            for j in 0..n {
                let y = spec.coord(j);
                for i in 0..n {
                    if slab[i + n * j] >= level {
                        let x = spec.coord(i);
                        let r = (x * x + y * y + z * z).sqrt();
                        if r > 0.0 {
                            sum += z.abs() / r;
                            count += 1;
                        }
                    }
                }
            }
            (sum, count)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0usize), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    if count == 0 {
        return Err(SurfaceError::EmptySupraLevelSet(level));
    }
    Ok(sum / count as f64)
}

/// Number of voxels with value ≥ `level`.
pub fn supra_level_count(grid: &DensityGrid, level: f64) -> usize {
    grid.values().par_iter().filter(|&&v| v >= level).count()
}
