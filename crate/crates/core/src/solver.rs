//! Grid search for fixed points of multivalued maps.
//!
//! Each round labels one or more grids, scans them for candidates
//! (completely labeled cells, problematic faces, vertices that are already
//! fixed), scores every candidate by the residual at its center and then
//! re-grids small boxes around the most promising ones. The answer is the
//! lowest-residual point seen in any round.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{residual, Correspondence, MapSpec, RepresentativePolicy};
use crate::dcn::{face_safe, FaceMode, LabelSet};
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Cell, Face, GridSpec, OrthantLabel, Point, Region, DEFAULT_TAU_SIGN};
use crate::hull::{separating_hyperplane, SeparationCertificate};
use crate::labeling::{label_grid, GridLabeling, LabelConfig, VertexLabel};

/// Whether candidates are screened with separation certificates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filter {
    #[default]
    Off,
    /// Drop candidates whose box is separated from a bound on its image.
    /// Only maps with a known image hull over boxes are affected.
    PiecewiseExact,
}

impl FromStr for Filter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "piecewise-exact" => Ok(Self::PiecewiseExact),
            other => Err(Error::invalid(
                "filter",
                format!("{other:?}; expected off or piecewise-exact"),
            )),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::PiecewiseExact => "piecewise-exact",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub initial_resolution: usize,
    /// Refinement rounds after the initial labeling.
    pub max_depth: usize,
    pub refinement_factor: usize,
    /// Residual at or below which a point counts as fixed.
    pub tolerance: f64,
    pub tau_sign: f64,
    pub face_mode: FaceMode,
    pub filter: Filter,
    /// Half-width of a refinement box, in cells of the grid it came from.
    pub adaptive_radius: usize,
    pub policy: RepresentativePolicy,
    /// Echoed in reports; the search itself draws no random numbers.
    pub seed: u64,
    /// Also relabel the whole domain each round at
    /// `initial_resolution * refinement_factor^depth`.
    pub global_pass: bool,
    /// Live candidates refined per round, lowest residual first.
    pub max_refine_candidates: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            initial_resolution: 8,
            max_depth: 8,
            refinement_factor: 2,
            tolerance: 1e-7,
            tau_sign: DEFAULT_TAU_SIGN,
            face_mode: FaceMode::Equality,
            filter: Filter::Off,
            adaptive_radius: 2,
            policy: RepresentativePolicy::Centroid,
            seed: 0,
            global_pass: false,
            max_refine_candidates: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_resolution < 2 {
            return Err(Error::invalid("initial_resolution", "must be at least 2"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth", "must be at least 1"));
        }
        if self.refinement_factor < 2 {
            return Err(Error::invalid("refinement_factor", "must be at least 2"));
        }
        for (field, v) in [("tolerance", self.tolerance), ("tau_sign", self.tau_sign)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be positive and finite"));
            }
        }
        if self.adaptive_radius < 1 {
            return Err(Error::invalid("adaptive_radius", "must be at least 1"));
        }
        if self.max_refine_candidates < 1 {
            return Err(Error::invalid("max_refine_candidates", "must be at least 1"));
        }
        Ok(())
    }

    fn label_config(&self) -> LabelConfig {
        LabelConfig {
            tau_sign: self.tau_sign,
            eps_fix: self.tolerance,
            policy: self.policy,
            early_exit: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    CompleteCell,
    ProblematicFace,
    FixedVertex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    /// Cell box, face rectangle or single point.
    pub location: Region,
    /// Center of `location`.
    pub witness: Point,
    pub residual: f64,
    pub depth: usize,
    /// Resolution of the grid the candidate was found on.
    pub resolution: usize,
    /// Cell widths of that grid.
    pub cell_width: Vec<f64>,
    /// Set when the location provably holds no fixed point.
    pub spurious: Option<SeparationCertificate>,
}

impl Candidate {
    pub fn is_live(&self) -> bool {
        self.spurious.is_none()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Lower residual first, then the lexicographically smaller point.
fn better(r: f64, p: &[f64], than: &(f64, Point)) -> bool {
    match r.total_cmp(&than.0) {
        Ordering::Less => true,
        Ordering::Equal => lex_cmp(p, &than.1).is_lt(),
        Ordering::Greater => false,
    }
}

/// Distinct labels among a few vertices: a bitmask over label bits when
/// `2^d <= 64`, a full set otherwise.
enum Seen {
    Small(u64),
    Large(LabelSet),
}

impl Seen {
    fn gather(d: usize, bits: &[Option<u32>], mut idx: impl Iterator<Item = usize>) -> Option<Seen> {
        if d <= 6 {
            idx.try_fold(0u64, |m, i| bits[i].map(|b| m | 1 << b)).map(Seen::Small)
        } else {
            let mut s = LabelSet::empty(d);
            for i in idx {
                s.insert(OrthantLabel::from_bits(d, bits[i]?));
            }
            Some(Seen::Large(s))
        }
    }

    fn count(&self) -> usize {
        match self {
            Seen::Small(m) => m.count_ones() as usize,
            Seen::Large(s) => s.len(),
        }
    }

    fn into_set(self, d: usize) -> LabelSet {
        match self {
            Seen::Small(m) => {
                let mut s = LabelSet::empty(d);
                for b in (0..64).filter(|b| m >> b & 1 == 1) {
                    s.insert(OrthantLabel::from_bits(d, b));
                }
                s
            }
            Seen::Large(s) => s,
        }
    }
}

/// Collects every candidate of a total labeling: fixed vertices, completely
/// labeled cells and faces whose label set is not safe under
/// `cfg.face_mode`. Cells and faces touching a fixed vertex are left to the
/// vertex. Output order: fixed vertices, cells, then faces, each in grid
/// order.
pub fn scan(gl: &GridLabeling, f: &Correspondence, cfg: &SolverConfig) -> Result<Vec<Candidate>> {
    if !gl.is_total() {
        return Err(Error::invalid("labeling", "scan needs a total labeling"));
    }
    let grid = gl.grid();
    let d = grid.dim();
    let n = grid.resolution;
    let widths: Vec<f64> = (0..d).map(|j| grid.cell_width(j)).collect();
    let make = |kind, location: Region| -> Result<Candidate> {
        let witness = location.center();
        let img = f.evaluate(&witness)?;
        Ok(Candidate {
            kind,
            residual: residual(&witness, &img),
            witness,
            location,
            depth: 0,
            resolution: n,
            cell_width: widths.clone(),
            spurious: None,
        })
    };

    let mut out: Vec<Candidate> = gl
        .fixed_hits()
        .filter_map(|(_, v)| match v {
            VertexLabel::FixedHit { point, residual } => Some(Candidate {
                kind: CandidateKind::FixedVertex,
                location: Region::point(point),
                witness: point.clone(),
                residual: *residual,
                depth: 0,
                resolution: n,
                cell_width: widths.clone(),
                spurious: None,
            }),
            VertexLabel::Label(_) => None,
        })
        .collect();

    let bits: Vec<Option<u32>> = gl.labels().iter().map(|v| v.label().map(|l| l.bits())).collect();
    let stride: Vec<usize> = (0..d).map(|j| (n + 1).pow(j as u32)).collect();
    let corners = 1usize << d;
    let offset: Vec<usize> = (0..corners)
        .map(|k| (0..d).filter(|j| k >> j & 1 == 1).map(|j| stride[j]).sum())
        .collect();

    let per_cell: Vec<(Option<Candidate>, Vec<Candidate>)> = (0..grid.num_cells())
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut base = Vec::with_capacity(d);
            for _ in 0..d {
                base.push(rest % n);
                rest /= n;
            }
            let origin: usize = base.iter().zip(&stride).map(|(b, s)| b * s).sum();
            let cell = Cell { base };

            let mut complete = None;
            if let Some(seen) = Seen::gather(d, &bits, offset.iter().map(|o| origin + o)) {
                if seen.count() == corners {
                    complete = Some(make(CandidateKind::CompleteCell, grid.cell_region(&cell)?)?);
                }
            }

            let mut faces = Vec::new();
            for axis in 0..d {
                let sides: &[i8] = if cell.base[axis] + 1 == n { &[-1, 1] } else { &[-1] };
                for &side in sides {
                    let want = usize::from(side == 1);
                    let idx = (0..corners)
                        .filter(|k| k >> axis & 1 == want)
                        .map(|k| origin + offset[k]);
                    let Some(seen) = Seen::gather(d, &bits, idx) else {
                        continue;
                    };
                    if seen.count() > 1 && !face_safe(&seen.into_set(d), cfg.face_mode) {
                        let face = Face {
                            cell: cell.clone(),
                            axis,
                            side,
                        };
                        faces.push(make(CandidateKind::ProblematicFace, grid.face_region(&face)?)?);
                    }
                }
            }
            Ok((complete, faces))
        })
        .collect::<Result<_>>()?;

    let mut faces = Vec::new();
    for (cell, f) in per_cell {
        out.extend(cell);
        faces.extend(f);
    }
    out.extend(faces);
    Ok(out)
}

/// Marks candidates whose box is strictly separated from a bound on the
/// map's image over that box. Fixed vertices are never marked; maps without
/// an image bound leave everything live.
pub fn filter_spurious(cands: &mut [Candidate], f: &Correspondence) {
    for c in cands.iter_mut() {
        if c.kind == CandidateKind::FixedVertex {
            continue;
        }
        let Some(hull) = f.image_hull_over_box(&c.location) else {
            continue;
        };
        let corners = c.location.corners();
        if let Ok(Some(cert)) = separating_hyperplane(&corners, hull.vertices()) {
            if cert.verify(&corners, hull.vertices()) {
                c.spurious = Some(cert);
            }
        }
    }
}

/// Re-gridding plan around the best live candidates: each location grows
/// by `adaptive_radius` cells per side, is clipped to `domain`, and
/// touching boxes are merged. Every box is gridded at the finest source
/// resolution times the refinement factor.
pub fn refine(cands: &[Candidate], domain: &BoxDomain, cfg: &SolverConfig) -> Result<Vec<GridSpec>> {
    let mut live: Vec<&Candidate> = cands.iter().filter(|c| c.is_live()).collect();
    live.sort_by(|a, b| {
        a.residual
            .total_cmp(&b.residual)
            .then_with(|| lex_cmp(&a.witness, &b.witness))
            .then_with(|| a.kind.cmp(&b.kind))
    });
    live.truncate(cfg.max_refine_candidates);

    let r = cfg.adaptive_radius as f64;
    let mut boxes: Vec<(Region, usize)> = Vec::new();
    for c in live {
        let lo: Point = c.location.lo.iter().zip(&c.cell_width).map(|(x, h)| x - r * h).collect();
        let hi: Point = c.location.hi.iter().zip(&c.cell_width).map(|(x, h)| x + r * h).collect();
        let Some(clipped) = domain.clip_region(&Region::new(lo, hi)?) else {
            continue;
        };
        boxes.push((clipped.region(), c.resolution));
    }

    // Merge until no two boxes touch.
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].0.intersects(&boxes[j].0) {
                    let (b, n) = boxes.swap_remove(j);
                    boxes[i].0 = boxes[i].0.union(&b);
                    boxes[i].1 = boxes[i].1.max(n);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    boxes.sort_by(|a, b| lex_cmp(&a.0.lo, &b.0.lo).then_with(|| lex_cmp(&a.0.hi, &b.0.hi)));
    boxes
        .into_iter()
        .map(|(region, n)| {
            GridSpec::new(
                BoxDomain::new(region.lo, region.hi)?,
                n.saturating_mul(cfg.refinement_factor),
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    FixedPointFound,
    BestCandidateReturned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTrace {
    pub depth: usize,
    /// Finest resolution labeled in this round.
    pub resolution: usize,
    /// Smallest cell diameter labeled in this round.
    pub cell_diameter: f64,
    pub complete_cells: usize,
    pub problematic_faces: usize,
    pub fixed_vertices: usize,
    /// Running best residual after this round.
    pub best_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub point: Point,
    pub residual: f64,
    pub face_mode: FaceMode,
    pub depth_trace: Vec<DepthTrace>,
    pub config: SolverConfig,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds the map from `spec` and runs [`solve_map`].
pub fn solve(spec: &MapSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let f = Correspondence::from_spec(spec)?.with_tolerance(cfg.tau_sign);
    solve_map(&f, cfg)
}

/// Runs up to `1 + max_depth` labeling rounds and returns the lowest
/// residual point seen, preferring the lexicographically smallest on ties.
pub fn solve_map(f: &Correspondence, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let domain = f.domain().clone();
    let lcfg = cfg.label_config();
    let mut grids = vec![GridSpec::new(domain.clone(), cfg.initial_resolution)?];
    let mut best: Option<(f64, Point)> = None;
    let mut trace = Vec::new();

    for depth in 0..=cfg.max_depth {
        if cfg.global_pass && depth > 0 {
            let n = cfg.initial_resolution * cfg.refinement_factor.pow(depth as u32);
            grids.push(GridSpec::new(domain.clone(), n)?);
        }
        let mut round: Vec<Candidate> = Vec::new();
        for grid in &grids {
            let gl = label_grid(grid, f, &lcfg)?;
            for (i, &r) in gl.residuals().iter().enumerate() {
                let p = grid.vertex_point(&grid.vertex_multi(i));
                if best.as_ref().is_none_or(|b| better(r, &p, b)) {
                    best = Some((r, p));
                }
            }
            let mut cands = scan(&gl, f, cfg)?;
            if cfg.filter == Filter::PiecewiseExact {
                filter_spurious(&mut cands, f);
            }
            round.extend(cands);
        }
        for c in &mut round {
            c.depth = depth;
            if best.as_ref().is_none_or(|b| better(c.residual, &c.witness, b)) {
                best = Some((c.residual, c.witness.clone()));
            }
        }
        if depth == 0 && round.is_empty() {
            return Err(Error::NoCandidates);
        }
        let count = |k| round.iter().filter(|c| c.kind == k).count();
        let (best_r, _) = best.as_ref().expect("a grid has vertices");
        trace.push(DepthTrace {
            depth,
            resolution: grids.iter().map(|g| g.resolution).max().unwrap_or(0),
            cell_diameter: grids.iter().map(GridSpec::cell_diameter).fold(f64::INFINITY, f64::min),
            complete_cells: count(CandidateKind::CompleteCell),
            problematic_faces: count(CandidateKind::ProblematicFace),
            fixed_vertices: count(CandidateKind::FixedVertex),
            best_residual: *best_r,
        });
        if *best_r <= cfg.tolerance || depth == cfg.max_depth {
            break;
        }
        grids = refine(&round, &domain, cfg)?;
        if grids.is_empty() {
            break;
        }
    }

    let (residual, point) = best.expect("a grid has vertices");
    Ok(SolveReport {
        status: if residual <= cfg.tolerance {
            SolveStatus::FixedPointFound
        } else {
            SolveStatus::BestCandidateReturned
        },
        point,
        residual,
        face_mode: cfg.face_mode,
        depth_trace: trace,
        config: cfg.clone(),
    })
}
