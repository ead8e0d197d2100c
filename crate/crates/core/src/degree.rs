//! Boundary degree, Sperner validity and completely labeled cells.
//!
//! Planar fixtures are triangulated polygons whose vertices carry integer
//! labels naming the vertices `a_1..a_n` of a target polygon. The degree of
//! the boundary labeling counts how often the induced boundary cycle winds
//! around the target.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cell;
use crate::labeling::{GridLabeling, VertexLabel};

pub type Point2 = [f64; 2];

/// A triangulated polygon with one integer label per vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledTriangulation {
    /// Number of target vertices; labels live in `1..=n`.
    pub n: u32,
    pub polygon: Vec<Point2>,
    pub corner_labels: Vec<u32>,
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub labels: Vec<u32>,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn signed_area(poly: &[Point2]) -> f64 {
    let m = poly.len();
    (0..m)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Where a point sits on the polygon boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
enum BoundarySpot {
    Corner(usize),
    /// On edge `k` (from corner `k` to `k + 1`) at parameter `t` in (0, 1).
    Edge(usize, f64),
}

impl LabeledTriangulation {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("triangulation serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid("n", "target needs at least 3 vertices"));
        }
        if self.polygon.len() < 3 {
            return Err(Error::invalid("polygon", "needs at least 3 corners"));
        }
        if self.corner_labels.len() != self.polygon.len() {
            return Err(Error::invalid("corner_labels", "one label per polygon corner"));
        }
        if self.labels.len() != self.vertices.len() {
            return Err(Error::invalid("labels", "one label per vertex"));
        }
        let pts = self.polygon.iter().chain(&self.vertices);
        if pts.flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("vertices", "coordinates must be finite"));
        }
        if signed_area(&self.polygon).abs() <= 1e-12 * self.scale() * self.scale() {
            return Err(Error::invalid("polygon", "degenerate polygon"));
        }
        for (field, labels) in [("corner_labels", &self.corner_labels), ("labels", &self.labels)] {
            if let Some(l) = labels.iter().find(|&&l| l == 0 || l > self.n) {
                return Err(Error::invalid(field, format!("label {l} outside 1..={}", self.n)));
            }
        }
        for tri in &self.triangles {
            if tri.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::invalid("triangles", format!("{tri:?} indexes a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::invalid("triangles", format!("{tri:?} repeats a vertex")));
            }
        }
        for (k, &c) in self.polygon.iter().enumerate() {
            let hits: Vec<usize> = (0..self.vertices.len())
                .filter(|&i| self.spot(self.vertices[i]) == Some(BoundarySpot::Corner(k)))
                .collect();
            if hits.is_empty() {
                return Err(Error::invalid("vertices", format!("no vertex at corner {c:?}")));
            }
            if hits.iter().any(|&i| self.labels[i] != self.corner_labels[k]) {
                return Err(Error::invalid(
                    "labels",
                    format!("vertex at corner {c:?} must carry the corner label"),
                ));
            }
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.polygon {
            for j in 0..2 {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(f64::MIN_POSITIVE)
    }

    fn spot(&self, p: Point2) -> Option<BoundarySpot> {
        let tol = 1e-9 * self.scale();
        let m = self.polygon.len();
        for (k, c) in self.polygon.iter().enumerate() {
            if (p[0] - c[0]).hypot(p[1] - c[1]) <= tol {
                return Some(BoundarySpot::Corner(k));
            }
        }
        for k in 0..m {
            let (a, b) = (self.polygon[k], self.polygon[(k + 1) % m]);
            let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
            let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
            if t > 0.0 && t < 1.0 && cross(a, b, p).abs() / len2.sqrt() <= tol {
                return Some(BoundarySpot::Edge(k, t));
            }
        }
        None
    }

    /// Polygon corner indices whose face carries `p`: one corner, the two
    /// ends of an edge, or empty for interior points.
    pub fn carrier_corners(&self, p: Point2) -> Vec<usize> {
        match self.spot(p) {
            Some(BoundarySpot::Corner(k)) => vec![k],
            Some(BoundarySpot::Edge(k, _)) => vec![k, (k + 1) % self.polygon.len()],
            None => vec![],
        }
    }

    /// Labels read counterclockwise around the boundary, starting at the
    /// first polygon corner.
    pub fn boundary_cycle(&self) -> Result<BoundaryLabelCycle> {
        let m = self.polygon.len();
        let mut per_edge: Vec<Vec<(f64, usize)>> = vec![Vec::new(); m];
        for (i, &p) in self.vertices.iter().enumerate() {
            match self.spot(p) {
                Some(BoundarySpot::Corner(k)) => per_edge[k].push((0.0, i)),
                Some(BoundarySpot::Edge(k, t)) => per_edge[k].push((t, i)),
                None => {}
            }
        }
        let mut labels = Vec::new();
        for edge in &mut per_edge {
            edge.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            edge.dedup_by(|a, b| a.0 == b.0);
            labels.extend(edge.iter().map(|&(_, i)| self.labels[i]));
        }
        if signed_area(&self.polygon) < 0.0 {
            // Clockwise input: walk it backwards, keeping corner 0 first.
            labels[1..].reverse();
        }
        BoundaryLabelCycle::new(labels)
    }

    /// Rebuilds every label from `f(point, carrier_corners)`, then validates.
    pub fn relabel(mut self, mut f: impl FnMut(Point2, &[usize]) -> u32) -> Result<Self> {
        for i in 0..self.vertices.len() {
            let p = self.vertices[i];
            let carrier = self.carrier_corners(p);
            self.labels[i] = f(p, &carrier);
        }
        self.validate()?;
        Ok(self)
    }

    /// Regular subdivision of the triangle (0,0), (1,0), (0,1) into
    /// `res^2` triangles, corners labeled 1, 2, 3 and every other vertex
    /// given the label of the lowest corner of its carrier (interior: 1).
    pub fn triangle_grid(res: usize) -> Result<Self> {
        let polygon = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        Self::meshed(polygon, vec![1, 2, 3], 3, res, false)
    }

    /// Fan subdivision of a convex polygon: each sector between the
    /// centroid and an edge is cut into `res^2` triangles.
    pub fn polygon_fan(polygon: Vec<Point2>, corner_labels: Vec<u32>, n: u32, res: usize) -> Result<Self> {
        Self::meshed(polygon, corner_labels, n, res, true)
    }

    fn meshed(polygon: Vec<Point2>, corner_labels: Vec<u32>, n: u32, res: usize, fan: bool) -> Result<Self> {
        if res == 0 {
            return Err(Error::invalid("resolution", "must be at least 1"));
        }
        let mut mesh = Mesh::default();
        if fan {
            let m = polygon.len() as f64;
            let c = [
                polygon.iter().map(|p| p[0]).sum::<f64>() / m,
                polygon.iter().map(|p| p[1]).sum::<f64>() / m,
            ];
            let ccw = signed_area(&polygon) > 0.0;
            for k in 0..polygon.len() {
                let (a, b) = (polygon[k], polygon[(k + 1) % polygon.len()]);
                if ccw {
                    mesh.sector(c, a, b, res);
                } else {
                    mesh.sector(c, b, a, res);
                }
            }
        } else {
            mesh.sector(polygon[0], polygon[1], polygon[2], res);
        }
        let t = Self {
            n,
            labels: vec![1; mesh.vertices.len()],
            polygon,
            corner_labels,
            vertices: mesh.vertices,
            triangles: mesh.triangles,
        };
        let corner_labels = t.corner_labels.clone();
        if corner_labels.len() != t.polygon.len() {
            return Err(Error::invalid("corner_labels", "one label per polygon corner"));
        }
        t.relabel(|_, carrier| carrier.iter().map(|&k| corner_labels[k]).min().unwrap_or(1))
    }
}

#[derive(Default)]
struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    index: HashMap<(i64, i64), usize>,
}

impl Mesh {
    fn vertex(&mut self, p: Point2) -> usize {
        let key = ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let next = self.vertices.len();
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            next
        })
    }

    /// Subdivides triangle (a, b, c) into `res^2` triangles with the
    /// orientation of (a, b, c).
    fn sector(&mut self, a: Point2, b: Point2, c: Point2, res: usize) {
        let r = res as f64;
        let mut id = vec![vec![0usize; res + 1]; res + 1];
        for (i, row) in id.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().take(res + 1 - i).enumerate() {
                let (s, t) = (i as f64 / r, j as f64 / r);
                let p = [
                    a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                    a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
                ];
                *slot = self.vertex(p);
            }
        }
        for i in 0..res {
            for j in 0..res - i {
                self.triangles.push([id[i][j], id[i + 1][j], id[i][j + 1]]);
                if i + j + 2 <= res {
                    self.triangles.push([id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]]);
                }
            }
        }
    }
}

/// Cyclic sequence of target labels read along a boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLabelCycle(Vec<u32>);

impl BoundaryLabelCycle {
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("cycle", "must be nonempty"));
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn rotated(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        let len = v.len();
        v.rotate_left(k % len);
        Self(v)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub degree: i64,
    /// Some step jumped between diametrically opposite targets and was
    /// counted as a positive half turn.
    pub orientation_ambiguous: bool,
}

/// Winding number of the label cycle around a target `n`-gon.
///
/// Each step moves along the shorter arc between consecutive targets, so
/// the total signed number of arc steps is a multiple of `n`; dividing
/// gives the signed number of crossings of any fixed point on an arc.
pub fn boundary_degree_2d(cycle: &BoundaryLabelCycle, n: u32) -> Result<DegreeResult> {
    if n < 3 {
        return Err(Error::invalid("n", "target needs at least 3 vertices"));
    }
    if let Some(l) = cycle.0.iter().find(|&&l| l == 0 || l > n) {
        return Err(Error::invalid("cycle", format!("label {l} outside 1..={n}")));
    }
    let n = i64::from(n);
    let mut total = 0i64;
    let mut ambiguous = false;
    let len = cycle.0.len();
    for k in 0..len {
        let (a, b) = (i64::from(cycle.0[k]), i64::from(cycle.0[(k + 1) % len]));
        let mut step = (b - a).rem_euclid(n);
        if 2 * step == n {
            ambiguous = true;
        } else if 2 * step > n {
            step -= n;
        }
        total += step;
    }
    debug_assert_eq!(total % n, 0);
    Ok(DegreeResult {
        degree: total / n,
        orientation_ambiguous: ambiguous,
    })
}

/// Corner labels for the triangle: distinct and exactly {1, 2, 3}.
fn check_sperner_frame(t: &LabeledTriangulation) -> Result<()> {
    let corners: BTreeSet<u32> = t.corner_labels.iter().copied().collect();
    if t.polygon.len() != 3 || corners != BTreeSet::from([1, 2, 3]) {
        return Err(Error::invalid(
            "polygon",
            "Sperner check needs a triangle with corner labels 1, 2, 3",
        ));
    }
    Ok(())
}

/// Every boundary vertex carries a label of a corner of its carrier.
pub fn sperner_valid(t: &LabeledTriangulation) -> Result<bool> {
    t.validate()?;
    check_sperner_frame(t)?;
    Ok(t.vertices.iter().zip(&t.labels).all(|(&p, &l)| {
        let carrier = t.carrier_corners(p);
        carrier.is_empty() || carrier.iter().any(|&k| t.corner_labels[k] == l)
    }))
}

/// No boundary edge of the polygon sees all `n` labels among its vertices.
pub fn nondegenerate_valid(t: &LabeledTriangulation) -> Result<bool> {
    t.validate()?;
    let m = t.polygon.len();
    let mut seen: Vec<BTreeSet<u32>> = (0..m)
        .map(|k| BTreeSet::from([t.corner_labels[k], t.corner_labels[(k + 1) % m]]))
        .collect();
    for (&p, &l) in t.vertices.iter().zip(&t.labels) {
        if let Some(BoundarySpot::Edge(k, _)) = t.spot(p) {
            seen[k].insert(l);
        }
    }
    Ok(seen.iter().all(|s| s.len() < t.n as usize))
}

/// Triangles whose labels are exactly `{1, ..., n}`; always empty for
/// `n > 3`.
pub fn completely_labeled_triangles(t: &LabeledTriangulation) -> Vec<usize> {
    let full: BTreeSet<u32> = (1..=t.n).collect();
    t.triangles
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.iter().map(|&i| t.labels[i]).collect::<BTreeSet<_>>() == full)
        .map(|(k, _)| k)
        .collect()
}

/// Completely labeled triangles counted with sign: geometric orientation
/// times the parity of the label order. Equals the boundary degree for
/// `n = 3`.
pub fn signed_complete_count(t: &LabeledTriangulation) -> i64 {
    completely_labeled_triangles(t)
        .into_iter()
        .map(|k| {
            let [i, j, l] = t.triangles[k];
            let geo = cross(t.vertices[i], t.vertices[j], t.vertices[l]).signum() as i64;
            let cyclic = matches!(
                [t.labels[i], t.labels[j], t.labels[l]],
                [1, 2, 3] | [2, 3, 1] | [3, 1, 2]
            );
            if cyclic {
                geo
            } else {
                -geo
            }
        })
        .sum()
}

/// Cells whose `2^d` vertices carry all `2^d` orthant labels. Cells with a
/// fixed-point vertex are left out; those are reported as fixed hits.
pub fn completely_labeled_cells(gl: &GridLabeling) -> Result<Vec<Cell>> {
    if !gl.is_total() {
        return Err(Error::invalid("labeling", "needs a total labeling"));
    }
    let grid = gl.grid();
    let need = 1usize << grid.dim();
    let mut out = Vec::new();
    for cell in grid.cells() {
        let mut seen = vec![false; need];
        let mut count = 0;
        let mut has_fixed = false;
        for idx in grid.cell_vertex_indices(&cell)? {
            match gl.label(idx).and_then(VertexLabel::label) {
                Some(l) => {
                    let b = l.bits() as usize;
                    if !seen[b] {
                        seen[b] = true;
                        count += 1;
                    }
                }
                None => has_fixed = true,
            }
        }
        if !has_fixed && count == need {
            out.push(cell);
        }
    }
    Ok(out)
}

/// Degree of the boundary map induced by labeling each domain corner with
/// the orthant pointing into the box.
///
/// That map sends the corner `c + s` (signs `s`) to the orthant `-s`, so on
/// the boundary sphere it is the antipodal map, whose degree is `(-1)^d`.
pub fn inward_corner_degree(d: usize) -> i64 {
    if d.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Counterclockwise target position of a 2D orthant label: the quadrants
/// (+,+), (-,+), (-,-), (+,-) become targets 1, 2, 3, 4.
fn quadrant_target(signs: &[i8]) -> u32 {
    match (signs[0], signs[1]) {
        (1, 1) => 1,
        (-1, 1) => 2,
        (-1, -1) => 3,
        _ => 4,
    }
}

/// Labels of the boundary vertices of a 2D grid labeling, walked
/// counterclockwise from the lower-left corner and mapped to quadrant
/// targets. Fixed-point vertices are skipped.
pub fn grid_boundary_cycle(gl: &GridLabeling) -> Result<BoundaryLabelCycle> {
    let grid = gl.grid();
    if grid.dim() != 2 || !gl.is_total() {
        return Err(Error::invalid("labeling", "needs a total 2D labeling"));
    }
    let n = grid.resolution;
    let mut walk: Vec<[usize; 2]> = Vec::with_capacity(4 * n);
    walk.extend((0..n).map(|k| [k, 0]));
    walk.extend((0..n).map(|k| [n, k]));
    walk.extend((0..n).map(|k| [n - k, n]));
    walk.extend((0..n).map(|k| [0, n - k]));
    let labels: Vec<u32> = walk
        .iter()
        .filter_map(|m| gl.get(m).and_then(VertexLabel::label))
        .map(|l| quadrant_target(&l.signs()))
        .collect();
    BoundaryLabelCycle::new(labels)
}
