//! Boxes, uniform cubical grids, cells, faces and orthant labels.
//!
//! Grid vertices are always generated from integer multi-indices, so two
//! cells sharing a face produce bit-identical coordinates for the shared
//! vertices. Vertex multi-indices are flattened with axis 0 varying fastest;
//! the same convention orders the `2^d` vertices of a cell (bit `j` of the
//! local index selects the upper end of axis `j`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type Point = Vec<f64>;

/// Largest ambient dimension supported by the label encoding.
pub const MAX_DIM: usize = 16;

/// Default sign tolerance, relative to an edge length of 2.
pub const DEFAULT_TAU_SIGN: f64 = 1e-9;

/// Sign of `x` with a dead zone: 0 iff `|x| <= tau`.
pub fn sign_of(x: f64, tau: f64) -> i8 {
    if x.abs() <= tau {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// A hyperoctant of R^d, identified by a sign vector in {-1,+1}^d.
///
/// Stored as a bit mask: bit `d-1-i` is set iff coordinate `i` is negative,
/// so coordinate 1 is the most significant bit and `(+,...,+)` has index 1.
/// The derived ordering is lexicographic with `+1 < -1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrthantLabel {
    dim: u8,
    bits: u32,
}

impl OrthantLabel {
    pub fn new(signs: &[i8]) -> Result<Self> {
        let d = signs.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(
                "label",
                format!("dimension {d} not in 1..={MAX_DIM}"),
            ));
        }
        let mut bits = 0u32;
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits |= 1 << (d - 1 - i),
                _ => {
                    return Err(Error::invalid(
                        "label",
                        format!("sign {s} at coordinate {} is not +1 or -1", i + 1),
                    ))
                }
            }
        }
        Ok(Self { dim: d as u8, bits })
    }

    /// Label from its 1-based index in `1..=2^d`.
    pub fn from_index(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(
                "dimension",
                format!("{dim} not in 1..={MAX_DIM}"),
            ));
        }
        if index == 0 || index > (1usize << dim) {
            return Err(Error::invalid(
                "label index",
                format!("{index} not in 1..={}", 1usize << dim),
            ));
        }
        Ok(Self {
            dim: dim as u8,
            bits: (index - 1) as u32,
        })
    }

    pub(crate) fn from_bits(dim: usize, bits: u32) -> Self {
        debug_assert!(dim <= MAX_DIM && (bits as u64) < (1u64 << dim));
        Self {
            dim: dim as u8,
            bits,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn index(&self) -> usize {
        self.bits as usize + 1
    }

    pub(crate) fn bits(&self) -> u32 {
        self.bits
    }

    /// Sign of coordinate `i` (0-based).
    pub fn sign(&self, i: usize) -> i8 {
        if self.bits & (1 << (self.dim() - 1 - i)) != 0 {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.dim()).map(|i| self.sign(i)).collect()
    }

    /// Closed-orthant membership: `x_i * l_i >= 0` for every coordinate.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &xi)| xi * f64::from(self.sign(i)) >= 0.0)
    }

    pub fn all(dim: usize) -> impl Iterator<Item = OrthantLabel> {
        (0..1u32 << dim).map(move |bits| OrthantLabel::from_bits(dim, bits))
    }
}

impl fmt::Display for OrthantLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            f.write_str(if self.sign(i) > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for OrthantLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::invalid(
                    "label",
                    format!("unexpected character {other:?} in {s:?}"),
                )),
            })
            .collect::<Result<Vec<i8>>>()?;
        OrthantLabel::new(&signs)
    }
}

impl Serialize for OrthantLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrthantLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned closed region with `lo <= hi`; degenerate extents are
/// allowed, so it also describes faces and points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Point,
    pub hi: Point,
}

impl Region {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite()) || a > b {
                return Err(Error::invalid(
                    "box",
                    format!("axis {}: need finite lo <= hi, got [{a}, {b}]", i + 1),
                ));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn point(p: &[f64]) -> Self {
        Self {
            lo: p.to_vec(),
            hi: p.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Point {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *x >= a - tol && *x <= b + tol)
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    /// Closed intersection test (touching counts).
    pub fn intersects(&self, other: &Region) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.hi[i] && other.lo[i] <= self.hi[i])
    }

    pub fn union(&self, other: &Region) -> Region {
        Region {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Distinct corners, in the cell-vertex order; degenerate axes collapse.
    pub fn corners(&self) -> Vec<Point> {
        let d = self.dim();
        let free: Vec<usize> = (0..d).filter(|&i| self.lo[i] < self.hi[i]).collect();
        (0..1usize << free.len())
            .map(|k| {
                let mut p = self.lo.clone();
                for (j, &axis) in free.iter().enumerate() {
                    if k & (1 << j) != 0 {
                        p[axis] = self.hi[axis];
                    }
                }
                p
            })
            .collect()
    }
}

/// The search domain: a full-dimensional axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        let domain = Self { lo, hi };
        domain.validate("domain")?;
        Ok(domain)
    }

    /// `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub(crate) fn validate(&self, field: &str) -> Result<()> {
        let d = self.lo.len();
        if self.hi.len() != d {
            return Err(Error::invalid(
                format!("{field}.hi"),
                format!("has {} entries, {field}.lo has {d}", self.hi.len()),
            ));
        }
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(
                format!("{field}.lo"),
                format!("dimension {d} not in 1..={MAX_DIM}"),
            ));
        }
        for i in 0..d {
            let (a, b) = (self.lo[i], self.hi[i]);
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(
                    field,
                    format!("axis {}: need finite lo < hi, got [{a}, {b}]", i + 1),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Point {
        self.region().center()
    }

    pub fn region(&self) -> Region {
        Region {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim() && self.region().contains(z, tol)
    }

    /// Corner `k`: bit `j` of `k` selects `hi` on axis `j`.
    pub fn corner(&self, k: usize) -> Point {
        (0..self.dim())
            .map(|j| if k & (1 << j) != 0 { self.hi[j] } else { self.lo[j] })
            .collect()
    }

    pub fn corners(&self) -> Vec<Point> {
        (0..1usize << self.dim()).map(|k| self.corner(k)).collect()
    }

    pub fn clip(&self, z: &[f64]) -> Point {
        z.iter()
            .enumerate()
            .map(|(i, x)| x.clamp(self.lo[i], self.hi[i]))
            .collect()
    }

    /// Clips a region to the domain; `None` if they do not meet.
    pub fn clip_region(&self, r: &Region) -> Option<BoxDomain> {
        let lo: Point = (0..self.dim()).map(|i| r.lo[i].max(self.lo[i])).collect();
        let hi: Point = (0..self.dim()).map(|i| r.hi[i].min(self.hi[i])).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(BoxDomain { lo, hi })
        } else {
            None
        }
    }
}

/// Carrier of `z`: entry `i` is `+1` on the upper wall of axis `i`, `-1` on
/// the lower wall, 0 otherwise. An interior point has the all-zero carrier.
pub fn carrier(z: &[f64], dom: &BoxDomain, tau: f64) -> Result<Vec<i8>> {
    check_dim(dom.dim(), z.len())?;
    if !dom.contains(z, tau) {
        return Err(Error::OutsideDomain { point: z.to_vec() });
    }
    Ok(z.iter()
        .enumerate()
        .map(|(i, &x)| {
            if x >= dom.hi[i] - tau {
                1
            } else if x <= dom.lo[i] + tau {
                -1
            } else {
                0
            }
        })
        .collect())
}

/// Inward label of a domain corner: `l_i = -sign(v_i - center_i)`.
///
/// Seen as a boundary map, corner `v` goes to the opposite corner, an
/// antipodal map of degree `(-1)^d`; see [`crate::degree::inward_corner_degree`].
pub fn corner_label(v: &[f64], dom: &BoxDomain, tau: f64) -> Result<OrthantLabel> {
    let car = carrier(v, dom, tau)?;
    if car.contains(&0) {
        return Err(Error::invalid(
            "corner",
            format!("{v:?} is not a corner of the domain"),
        ));
    }
    let signs: Vec<i8> = car.iter().map(|s| -s).collect();
    OrthantLabel::new(&signs)
}

/// One subcube of a grid, identified by its lower multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub base: Vec<usize>,
}

/// A facet of a cell: the side `-1` (lower) or `+1` (upper) on `axis`
/// (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub cell: Cell,
    pub axis: usize,
    pub side: i8,
}

/// Uniform subdivision of a box into `resolution^d` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: BoxDomain,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(domain: BoxDomain, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        let d = domain.dim();
        let vertices = (resolution as f64 + 1.0).powi(d as i32);
        if vertices > 1e9 {
            return Err(Error::invalid(
                "resolution",
                format!("{resolution}^{d} grid is too large"),
            ));
        }
        Ok(Self { domain, resolution })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Longest cell edge, `max_i (hi_i - lo_i) / N`.
    pub fn cell_diameter(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.cell_width(i))
            .fold(0.0, f64::max)
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.domain.hi[axis] - self.domain.lo[axis]) / self.resolution as f64
    }

    /// Lattice coordinate `k` on `axis`; `k == N` returns `hi` exactly.
    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi) = (self.domain.lo[axis], self.domain.hi[axis]);
        if k == self.resolution {
            hi
        } else {
            lo + (hi - lo) * (k as f64) / (self.resolution as f64)
        }
    }

    pub fn num_vertices(&self) -> usize {
        (self.resolution + 1).pow(self.dim() as u32)
    }

    pub fn num_cells(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn vertex_index(&self, multi: &[usize]) -> usize {
        let stride = self.resolution + 1;
        multi.iter().rev().fold(0, |acc, &m| acc * stride + m)
    }

    pub fn vertex_multi(&self, mut index: usize) -> Vec<usize> {
        let stride = self.resolution + 1;
        (0..self.dim())
            .map(|_| {
                let m = index % stride;
                index /= stride;
                m
            })
            .collect()
    }

    pub fn vertex_point(&self, multi: &[usize]) -> Point {
        multi
            .iter()
            .enumerate()
            .map(|(axis, &k)| self.coordinate(axis, k))
            .collect()
    }

    pub fn cell(&self, base: Vec<usize>) -> Result<Cell> {
        self.check_cell_base(&base)?;
        Ok(Cell { base })
    }

    fn check_cell_base(&self, base: &[usize]) -> Result<()> {
        check_dim(self.dim(), base.len())?;
        if let Some(k) = base.iter().find(|&&k| k >= self.resolution) {
            return Err(Error::invalid(
                "cell",
                format!("index {k} out of range 0..{}", self.resolution),
            ));
        }
        Ok(())
    }

    /// All cells, axis 0 fastest.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let n = self.resolution;
        let d = self.dim();
        (0..self.num_cells()).map(move |mut idx| {
            let base = (0..d)
                .map(|_| {
                    let m = idx % n;
                    idx /= n;
                    m
                })
                .collect();
            Cell { base }
        })
    }

    /// Flat vertex indices of a cell, local bit `j` selecting the upper end
    /// of axis `j`.
    pub fn cell_vertex_indices(&self, cell: &Cell) -> Result<Vec<usize>> {
        self.check_cell_base(&cell.base)?;
        let d = self.dim();
        Ok((0..1usize << d)
            .map(|k| {
                let multi: Vec<usize> = (0..d).map(|j| cell.base[j] + ((k >> j) & 1)).collect();
                self.vertex_index(&multi)
            })
            .collect())
    }

    pub fn cell_vertices(&self, cell: &Cell) -> Result<Vec<Point>> {
        Ok(self
            .cell_vertex_indices(cell)?
            .into_iter()
            .map(|i| self.vertex_point(&self.vertex_multi(i)))
            .collect())
    }

    pub fn cell_region(&self, cell: &Cell) -> Result<Region> {
        self.check_cell_base(&cell.base)?;
        Ok(Region {
            lo: (0..self.dim()).map(|i| self.coordinate(i, cell.base[i])).collect(),
            hi: (0..self.dim())
                .map(|i| self.coordinate(i, cell.base[i] + 1))
                .collect(),
        })
    }

    /// Flat vertex indices of a face, in the same local order as
    /// [`GridSpec::cell_vertex_indices`] restricted to the face.
    pub fn face_vertex_indices(&self, face: &Face) -> Result<Vec<usize>> {
        let all = self.cell_vertex_indices(&face.cell)?;
        if face.axis >= self.dim() || !(face.side == 1 || face.side == -1) {
            return Err(Error::invalid(
                "face",
                format!("axis {} side {} is not a face", face.axis, face.side),
            ));
        }
        let want = usize::from(face.side == 1);
        Ok(all
            .into_iter()
            .enumerate()
            .filter(|(k, _)| (k >> face.axis) & 1 == want)
            .map(|(_, v)| v)
            .collect())
    }

    pub fn face_vertices(&self, face: &Face) -> Result<Vec<Point>> {
        Ok(self
            .face_vertex_indices(face)?
            .into_iter()
            .map(|i| self.vertex_point(&self.vertex_multi(i)))
            .collect())
    }

    pub fn face_region(&self, face: &Face) -> Result<Region> {
        let mut r = self.cell_region(&face.cell)?;
        if face.side == 1 {
            r.lo[face.axis] = r.hi[face.axis];
        } else {
            r.hi[face.axis] = r.lo[face.axis];
        }
        Ok(r)
    }

    /// Every face of the grid exactly once: the lower face of each cell on
    /// every axis, plus the upper face where the cell touches the top wall.
    pub fn faces(&self) -> impl Iterator<Item = Face> + '_ {
        let n = self.resolution;
        self.cells().flat_map(move |cell| {
            let d = cell.base.len();
            let mut out = Vec::with_capacity(2 * d);
            for axis in 0..d {
                out.push(Face {
                    cell: cell.clone(),
                    axis,
                    side: -1,
                });
                if cell.base[axis] + 1 == n {
                    out.push(Face {
                        cell: cell.clone(),
                        axis,
                        side: 1,
                    });
                }
            }
            out
        })
    }
}

/// The `2d` faces of a cell: axis 1 lower/upper, axis 2 lower/upper, ...
pub fn cell_faces(cell: &Cell) -> Vec<Face> {
    (0..cell.base.len())
        .flat_map(|axis| {
            [-1i8, 1].into_iter().map(move |side| Face {
                cell: cell.clone(),
                axis,
                side,
            })
        })
        .collect()
}
