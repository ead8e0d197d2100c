//! Orthant labeling of grid vertices.
//!
//! A vertex `z` gets the orthant of its displacement `r - z`, where `r` is
//! the representative of `f(z)`. Coordinates where the displacement is
//! within `tau_sign` of zero are free; walls of the domain carrier force the
//! inward sign; remaining freedom is resolved towards `+1`. Vertices whose
//! displacement or residual is below `eps_fix` are reported as fixed hits
//! instead of being labeled.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{
    representative, residual, ConvexImage, Correspondence, RepresentativePolicy, DEFAULT_EPS_FIX,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{carrier, sign_of, BoxDomain, GridSpec, OrthantLabel, Point, DEFAULT_TAU_SIGN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub tau_sign: f64,
    pub eps_fix: f64,
    pub policy: RepresentativePolicy,
    /// Stop at the first fixed hit (in vertex order) instead of labeling
    /// the whole grid.
    pub early_exit: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            tau_sign: DEFAULT_TAU_SIGN,
            eps_fix: DEFAULT_EPS_FIX,
            policy: RepresentativePolicy::Centroid,
            early_exit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VertexLabel {
    Label(OrthantLabel),
    FixedHit { point: Point, residual: f64 },
}

impl VertexLabel {
    pub fn label(&self) -> Option<OrthantLabel> {
        match self {
            VertexLabel::Label(l) => Some(*l),
            VertexLabel::FixedHit { .. } => None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, VertexLabel::FixedHit { .. })
    }
}

/// All labels compatible with the nonzero signs of `dz`, in label order.
pub fn admissible_labels(dz: &[f64], tau_sign: f64) -> Vec<OrthantLabel> {
    let d = dz.len();
    let signs: Vec<i8> = dz.iter().map(|&x| sign_of(x, tau_sign)).collect();
    OrthantLabel::all(d)
        .filter(|l| (0..d).all(|i| signs[i] * l.sign(i) >= 0))
        .collect()
}

/// Label plus residual, the pair recorded for every grid vertex.
fn label_vertex(
    z: &[f64],
    img: &ConvexImage,
    carrier_domain: &BoxDomain,
    cfg: &LabelConfig,
) -> Result<(VertexLabel, f64)> {
    check_dim(z.len(), img.dim())?;
    let res = residual(z, img);
    let rep = representative(img, cfg.policy);
    let dz: Point = rep.iter().zip(z).map(|(a, b)| a - b).collect();
    let dz_inf = dz.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if dz_inf <= cfg.eps_fix || res <= cfg.eps_fix {
        return Ok((
            VertexLabel::FixedHit {
                point: z.to_vec(),
                residual: res,
            },
            res,
        ));
    }
    let walls = carrier(z, carrier_domain, cfg.tau_sign)?;
    let mut signs = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let s = sign_of(dz[i], cfg.tau_sign);
        let forced = -walls[i];
        let chosen = match (s, forced) {
            (0, 0) => 1,
            (0, f) => f,
            (s, 0) => s,
            (s, f) if s == f => s,
            _ => {
                return Err(Error::OutwardDisplacement {
                    point: z.to_vec(),
                    displacement: dz,
                })
            }
        };
        signs.push(chosen);
    }
    Ok((VertexLabel::Label(OrthantLabel::new(&signs)?), res))
}

/// Labels one point. `carrier_domain` supplies the walls whose inward sign
/// is forced; for sub-box grids pass the map's domain so that only walls
/// shared with it are constrained.
pub fn choose_label(
    z: &[f64],
    img: &ConvexImage,
    carrier_domain: &BoxDomain,
    cfg: &LabelConfig,
) -> Result<VertexLabel> {
    label_vertex(z, img, carrier_domain, cfg).map(|(l, _)| l)
}

/// Labels of a grid, indexed by flat vertex index (axis 0 fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridLabeling {
    grid: GridSpec,
    labels: Vec<VertexLabel>,
    residuals: Vec<f64>,
}

impl GridLabeling {
    /// Builds a labeling from precomputed entries; mostly for tests and
    /// offline analysis.
    pub fn from_parts(grid: GridSpec, labels: Vec<VertexLabel>, residuals: Vec<f64>) -> Result<Self> {
        if labels.len() > grid.num_vertices() || residuals.len() != labels.len() {
            return Err(Error::invalid(
                "labels",
                format!(
                    "{} labels and {} residuals for {} vertices",
                    labels.len(),
                    residuals.len(),
                    grid.num_vertices()
                ),
            ));
        }
        Ok(Self {
            grid,
            labels,
            residuals,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// False when labeling stopped early at a fixed hit.
    pub fn is_total(&self) -> bool {
        self.labels.len() == self.grid.num_vertices()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> Option<&VertexLabel> {
        self.labels.get(index)
    }

    pub fn residual(&self, index: usize) -> Option<f64> {
        self.residuals.get(index).copied()
    }

    pub fn get(&self, multi: &[usize]) -> Option<&VertexLabel> {
        self.labels.get(self.grid.vertex_index(multi))
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn fixed_hits(&self) -> impl Iterator<Item = (usize, &VertexLabel)> {
        self.labels.iter().enumerate().filter(|(_, l)| l.is_fixed())
    }

    /// Writes `i1..id,x1..xd,s1..sd,is_fixed,residual`, one row per vertex,
    /// after a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.grid.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = Vec::with_capacity(3 * d + 2);
        header.extend((1..=d).map(|j| format!("i{j}")));
        header.extend((1..=d).map(|j| format!("x{j}")));
        header.extend((1..=d).map(|j| format!("s{j}")));
        header.push("is_fixed".into());
        header.push("residual".into());
        w.write_record(&header)?;
        for (idx, (label, res)) in self.labels.iter().zip(&self.residuals).enumerate() {
            let multi = self.grid.vertex_multi(idx);
            let point = self.grid.vertex_point(&multi);
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            row.extend(multi.iter().map(|m| m.to_string()));
            row.extend(point.iter().map(|x| x.to_string()));
            match label {
                VertexLabel::Label(l) => {
                    row.extend(l.signs().iter().map(|s| s.to_string()));
                    row.push("0".into());
                }
                VertexLabel::FixedHit { .. } => {
                    row.extend((0..d).map(|_| String::new()));
                    row.push("1".into());
                }
            }
            row.push(res.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

const CHUNK: usize = 4096;

/// Labels every vertex of `grid`. The grid must lie inside the map's domain;
/// carrier forcing uses the map's domain walls. Parallel over vertices with
/// results identical to a sequential pass.
pub fn label_grid(grid: &GridSpec, f: &Correspondence, cfg: &LabelConfig) -> Result<GridLabeling> {
    check_dim(f.dim(), grid.dim())?;
    let dom = f.domain();
    let sub = grid.domain.region();
    if !dom.region().contains_region(&sub) {
        return Err(Error::invalid("grid", "grid box must lie inside the map's domain"));
    }
    let n = grid.num_vertices();
    let mut labels = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = if cfg.early_exit { (start + CHUNK).min(n) } else { n };
        let chunk: Vec<(VertexLabel, f64)> = (start..end)
            .into_par_iter()
            .map(|idx| {
                let z = grid.vertex_point(&grid.vertex_multi(idx));
                let img = f.evaluate(&z)?;
                label_vertex(&z, &img, dom, cfg)
            })
            .collect::<Result<_>>()?;
        for (label, res) in chunk {
            let hit = label.is_fixed();
            labels.push(label);
            residuals.push(res);
            if hit && cfg.early_exit {
                return GridLabeling::from_parts(grid.clone(), labels, residuals);
            }
        }
        start = end;
    }
    GridLabeling::from_parts(grid.clone(), labels, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::MapSpec;
    use proptest::prelude::*;

    fn lbl(s: &str) -> OrthantLabel {
        s.parse().unwrap()
    }

    fn catalog(name: &str) -> Correspondence {
        Correspondence::from_spec(&MapSpec::catalog(name).unwrap()).unwrap()
    }

    #[test]
    fn admissible_examples() {
        assert_eq!(admissible_labels(&[0.3, -0.2], 1e-9), vec![lbl("+-")]);
        assert_eq!(admissible_labels(&[0.0, 0.5], 1e-9), vec![lbl("++"), lbl("-+")]);
        assert_eq!(admissible_labels(&[0.0, 0.0], 1e-9).len(), 4);
    }

    #[test]
    fn choose_label_examples() {
        let dom = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let cfg = LabelConfig::default();
        let z = [0.1, 0.1];
        let img = ConvexImage::point(vec![0.4, -0.1]);
        assert_eq!(choose_label(&z, &img, &dom, &cfg).unwrap(), VertexLabel::Label(lbl("+-")));

        let z = [1.0, 0.0];
        let img = ConvexImage::point(vec![1.0, 0.4]);
        assert_eq!(choose_label(&z, &img, &dom, &cfg).unwrap(), VertexLabel::Label(lbl("-+")));

        let z = [1.0, 1.0];
        let img = ConvexImage::point(vec![0.99, 0.98]);
        assert_eq!(choose_label(&z, &img, &dom, &cfg).unwrap(), VertexLabel::Label(lbl("--")));

        let z = [0.3, 0.3];
        let img = ConvexImage::point(vec![0.3, 0.3 + 1e-8]);
        assert!(choose_label(&z, &img, &dom, &cfg).unwrap().is_fixed());
    }

    #[test]
    fn outward_displacement_on_a_wall_is_an_error() {
        let dom = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let img = ConvexImage::point(vec![-0.5, 0.0]);
        let e = choose_label(&[-1.0, 0.5], &img, &dom, &LabelConfig::default());
        assert!(e.is_ok());
        // The image leaves the box; evaluate would reject it, but the
        // labeler alone must still refuse an outward wall displacement.
        let out = ConvexImage::point(vec![-1.5, 0.5]);
        assert!(matches!(
            choose_label(&[-1.0, 0.5], &out, &dom, &LabelConfig::default()),
            Err(Error::OutwardDisplacement { .. })
        ));
    }

    #[test]
    fn identity_is_all_fixed_hits() {
        let g = GridSpec::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), 4).unwrap();
        let gl = label_grid(&g, &catalog("identity"), &LabelConfig::default()).unwrap();
        assert!(gl.labels().iter().all(|l| l.is_fixed()));
        assert!(gl.residuals().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn constant_map_labels() {
        let g = GridSpec::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), 2).unwrap();
        let gl = label_grid(&g, &catalog("constant"), &LabelConfig::default()).unwrap();
        assert_eq!(gl.get(&[2, 2]).unwrap().label(), Some(lbl("--")));
        assert_eq!(gl.get(&[0, 0]).unwrap().label(), Some(lbl("++")));
        assert!(gl.get(&[1, 1]).unwrap().is_fixed());
        assert_eq!(gl.get(&[0, 2]).unwrap().label(), Some(lbl("+-")));
    }

    #[test]
    fn step_usc_labels() {
        let g = GridSpec::new(BoxDomain::cube(1, 0.0, 1.0).unwrap(), 10).unwrap();
        let gl = label_grid(&g, &catalog("step-usc"), &LabelConfig::default()).unwrap();
        for k in 0..=10 {
            let l = gl.get(&[k]).unwrap();
            match k {
                0..=4 => assert_eq!(l.label(), Some(lbl("+"))),
                5 => assert!(l.is_fixed()),
                _ => assert_eq!(l.label(), Some(lbl("-"))),
            }
        }
    }

    #[test]
    fn early_exit_stops_at_first_hit() {
        let g = GridSpec::new(BoxDomain::cube(1, 0.0, 1.0).unwrap(), 10).unwrap();
        let cfg = LabelConfig {
            early_exit: true,
            ..LabelConfig::default()
        };
        let gl = label_grid(&g, &catalog("step-usc"), &cfg).unwrap();
        assert!(!gl.is_total());
        assert_eq!(gl.len(), 6);
        assert!(gl.label(5).unwrap().is_fixed());
    }

    #[test]
    fn sub_box_walls_are_not_forced() {
        // On the sub-box [0, 0.3] the upper wall is interior to the map's
        // domain, so a rightward displacement there keeps its sign.
        let f = catalog("step-usc");
        let g = GridSpec::new(BoxDomain::cube(1, 0.0, 0.3).unwrap(), 3).unwrap();
        let gl = label_grid(&g, &f, &LabelConfig::default()).unwrap();
        assert_eq!(gl.get(&[3]).unwrap().label(), Some(lbl("+")));
        let outside = GridSpec::new(BoxDomain::cube(1, 0.5, 1.5).unwrap(), 3).unwrap();
        assert!(label_grid(&outside, &f, &LabelConfig::default()).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let g = GridSpec::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), 2).unwrap();
        let gl = label_grid(&g, &catalog("constant"), &LabelConfig::default()).unwrap();
        let mut buf = Vec::new();
        gl.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i1,i2,x1,x2,s1,s2,is_fixed,residual");
        assert_eq!(lines.len(), 1 + 9);
        assert_eq!(lines[1], "0,0,-1,-1,1,1,0,1.4142135623730951");
        assert_eq!(lines[5], "1,1,0,0,,,1,0");
    }

    #[test]
    fn labeling_is_deterministic() {
        let g = GridSpec::new(BoxDomain::cube(2, 0.0, 1.0).unwrap(), 17).unwrap();
        let f = Correspondence::from_spec(&MapSpec::matching_pennies()).unwrap();
        let a = label_grid(&g, &f, &LabelConfig::default()).unwrap();
        let b = label_grid(&g, &f, &LabelConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn admissible_size_matches_zero_count(dz in prop::collection::vec(
            prop_oneof![Just(0.0), -1.0f64..1.0], 1..5)) {
            let zeros = dz.iter().filter(|x| x.abs() <= 1e-9).count();
            prop_assert_eq!(admissible_labels(&dz, 1e-9).len(), 1 << zeros);
        }

        #[test]
        fn chosen_label_is_admissible(
            z in prop::collection::vec(-1.0f64..=1.0, 2),
            r in prop::collection::vec(-1.0f64..=1.0, 2),
            snap in prop::collection::vec(0usize..4, 2),
        ) {
            // Snap some coordinates onto walls and some displacements to zero.
            let mut z = z;
            let mut r = r;
            for i in 0..2 {
                match snap[i] { 0 => z[i] = -1.0, 1 => z[i] = 1.0, 2 => r[i] = z[i], _ => {} }
            }
            let dom = BoxDomain::cube(2, -1.0, 1.0).unwrap();
            let img = ConvexImage::point(r.clone());
            let dz: Vec<f64> = r.iter().zip(&z).map(|(a, b)| a - b).collect();
            match choose_label(&z, &img, &dom, &LabelConfig::default()).unwrap() {
                VertexLabel::Label(l) => {
                    prop_assert!(admissible_labels(&dz, 1e-9).contains(&l));
                    let car = carrier(&z, &dom, 1e-9).unwrap();
                    for (i, &c) in car.iter().enumerate() {
                        if c != 0 { prop_assert_eq!(l.sign(i), -c); }
                    }
                }
                VertexLabel::FixedHit { .. } => {}
            }
        }

        #[test]
        fn label_is_stable_under_small_perturbation(
            dz in prop::collection::vec(prop_oneof![0.001f64..1.0, -1.0f64..-0.001], 3),
            eps in prop::collection::vec(-0.99e-9f64..0.99e-9, 3),
        ) {
            let dom = BoxDomain::cube(3, -10.0, 10.0).unwrap();
            let z = [0.0, 0.0, 0.0];
            let cfg = LabelConfig::default();
            let a = choose_label(&z, &ConvexImage::point(dz.clone()), &dom, &cfg).unwrap();
            let moved: Vec<f64> = dz.iter().zip(&eps).map(|(a, b)| a + b).collect();
            let b = choose_label(&z, &ConvexImage::point(moved), &dom, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
