//! Multivalued maps on boxes.
//!
//! Images are stored by their vertices (V-representation). A convex-valued
//! map represents `conv(vertices)`; a map flagged non-convex represents the
//! listed point cloud itself, and its residual switches to an upper-bound
//! criterion (distance to the points and to the segments joining consecutive
//! points).

mod spec;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::hull::{separating_hyperplane, SeparationCertificate};
pub use spec::{BimatrixSpec, BuiltinSpec, MapSpec, PiecewiseSpec, RegionSpec, SpecKind, CATALOG};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{sign_of, BoxDomain, Point, Region, DEFAULT_TAU_SIGN};
use crate::hull::{dot, hull_distance, polyline_distance};
use spec::{builtin_definition, parse_matrix, Builtin};

/// Default snap tolerance for declaring a point fixed.
pub const DEFAULT_EPS_FIX: f64 = 1e-7;

/// One value `f(z)` of a correspondence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexImage {
    vertices: Vec<Point>,
    convex: bool,
}

impl ConvexImage {
    pub fn new(vertices: Vec<Point>, convex: bool) -> Result<Self> {
        let Some(first) = vertices.first() else {
            return Err(Error::invalid("image", "must be nonempty"));
        };
        let d = first.len();
        for v in &vertices {
            check_dim(d, v.len())?;
        }
        Ok(Self { vertices, convex })
    }

    pub fn point(p: Point) -> Self {
        Self {
            vertices: vec![p],
            convex: true,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }
}

/// How one point is picked from an image to form a displacement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentativePolicy {
    /// Vertex average; lies in the hull and ignores vertex order.
    #[default]
    Centroid,
    First,
}

impl FromStr for RepresentativePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centroid" => Ok(Self::Centroid),
            "first" => Ok(Self::First),
            other => Err(Error::invalid(
                "policy",
                format!("{other:?}; expected centroid or first"),
            )),
        }
    }
}

impl fmt::Display for RepresentativePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Centroid => "centroid",
            Self::First => "first",
        })
    }
}

pub fn representative(img: &ConvexImage, policy: RepresentativePolicy) -> Point {
    match policy {
        RepresentativePolicy::First => img.vertices[0].clone(),
        RepresentativePolicy::Centroid => {
            let n = img.vertices.len() as f64;
            let mut c = vec![0.0; img.dim()];
            for v in &img.vertices {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci += vi;
                }
            }
            c.iter_mut().for_each(|x| *x /= n);
            c
        }
    }
}

/// `dist(z, f(z))`; zero exactly when `z` is in the (convex) image.
pub fn residual(z: &[f64], img: &ConvexImage) -> f64 {
    if img.convex {
        hull_distance(z, &img.vertices)
    } else {
        polyline_distance(z, &img.vertices)
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> Vec<Point> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Builtin(Builtin),
    BestResponse { a: [[f64; 2]; 2], b: [[f64; 2]; 2] },
    Custom(Evaluator),
}

/// An evaluable multivalued map on a box. Evaluation is pure.
#[derive(Clone)]
pub struct Correspondence {
    domain: BoxDomain,
    convex_valued: bool,
    tau: f64,
    kind: Kind,
}

impl fmt::Debug for Correspondence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Builtin(b) => format!("{b:?}"),
            Kind::BestResponse { a, b } => format!("BestResponse {{ a: {a:?}, b: {b:?} }}"),
            Kind::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("Correspondence")
            .field("domain", &self.domain)
            .field("convex_valued", &self.convex_valued)
            .field("kind", &kind)
            .finish()
    }
}

impl Correspondence {
    pub fn from_spec(spec: &MapSpec) -> Result<Self> {
        spec.validate()?;
        let (kind, convex_valued) = match spec.kind {
            SpecKind::Builtin => {
                let b = builtin_definition(spec.builtin.as_ref().unwrap(), &spec.domain)?;
                (Kind::Builtin(b), true)
            }
            SpecKind::Piecewise => {
                let pw = spec.piecewise.clone().unwrap();
                let convex = pw.convex_valued;
                (Kind::Builtin(Builtin::Piecewise(pw)), convex)
            }
            SpecKind::Bimatrix => {
                let bm = spec.bimatrix.as_ref().unwrap();
                (
                    Kind::BestResponse {
                        a: parse_matrix(&bm.a, "bimatrix.A")?,
                        b: parse_matrix(&bm.b, "bimatrix.B")?,
                    },
                    true,
                )
            }
        };
        Ok(Self {
            domain: spec.domain.clone(),
            convex_valued,
            tau: DEFAULT_TAU_SIGN,
            kind,
        })
    }

    /// Wraps an arbitrary evaluator. The caller vouches for upper
    /// semicontinuity; nothing here can check it.
    pub fn custom<F>(domain: BoxDomain, convex_valued: bool, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Point> + Send + Sync + 'static,
    {
        Self {
            domain,
            convex_valued,
            tau: DEFAULT_TAU_SIGN,
            kind: Kind::Custom(Arc::new(f)),
        }
    }

    /// Sets the tolerance used for domain containment and for payoff ties.
    pub fn with_tolerance(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn convex_valued(&self) -> bool {
        self.convex_valued
    }

    pub fn tolerance(&self) -> f64 {
        self.tau
    }

    fn raw(&self, z: &[f64]) -> Vec<Point> {
        match &self.kind {
            Kind::Builtin(Builtin::Constant(p)) => vec![p.clone()],
            Kind::Builtin(Builtin::Identity) => vec![z.to_vec()],
            Kind::Builtin(Builtin::Affine { factor, offset }) => {
                vec![z.iter().zip(offset).map(|(x, c)| factor * x + c).collect()]
            }
            Kind::Builtin(Builtin::Piecewise(pw)) => pw
                .regions
                .iter()
                .find(|r| r.region.contains(z, 0.0))
                .map_or_else(|| pw.default_image.clone(), |r| r.image.clone()),
            Kind::BestResponse { a, b } => best_response_image(a, b, z[0], z[1], self.tau),
            Kind::Custom(f) => f(z),
        }
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<ConvexImage> {
        check_dim(self.dim(), z.len())?;
        if !self.domain.contains(z, self.tau) {
            return Err(Error::OutsideDomain { point: z.to_vec() });
        }
        let vertices = self.raw(z);
        if vertices.is_empty() {
            return Err(Error::BadImage {
                point: z.to_vec(),
                reason: "empty image".into(),
            });
        }
        for v in &vertices {
            if v.len() != self.dim() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::BadImage {
                    point: z.to_vec(),
                    reason: format!("vertex {v:?} is not a finite point of dimension {}", self.dim()),
                });
            }
            if !self.domain.contains(v, self.tau) {
                return Err(Error::BadImage {
                    point: z.to_vec(),
                    reason: format!("vertex {v:?} lies outside the domain"),
                });
            }
        }
        Ok(ConvexImage {
            vertices,
            convex: self.convex_valued,
        })
    }

    /// A set whose hull contains `f(x)` for every `x` in `region`, when one
    /// can be computed from the map's definition. `None` for best-response
    /// and custom maps.
    pub fn image_hull_over_box(&self, region: &Region) -> Option<ConvexImage> {
        let mut pts: Vec<Point> = match &self.kind {
            Kind::Builtin(Builtin::Constant(p)) => vec![p.clone()],
            Kind::Builtin(Builtin::Identity) => region.corners(),
            Kind::Builtin(Builtin::Affine { factor, offset }) => region
                .corners()
                .iter()
                .map(|c| c.iter().zip(offset).map(|(x, o)| factor * x + o).collect())
                .collect(),
            Kind::Builtin(Builtin::Piecewise(pw)) => {
                let mut pts = Vec::new();
                let mut covered = false;
                for r in &pw.regions {
                    if r.region.intersects(region) {
                        pts.extend(r.image.iter().cloned());
                        if r.region.contains_region(region) {
                            covered = true;
                            break;
                        }
                    }
                }
                if !covered {
                    pts.extend(pw.default_image.iter().cloned());
                }
                pts
            }
            Kind::BestResponse { .. } | Kind::Custom(_) => return None,
        };
        dedup_points(&mut pts);
        Some(ConvexImage {
            vertices: pts,
            convex: true,
        })
    }
}

fn dedup_points(pts: &mut Vec<Point>) {
    let mut out: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    *pts = out;
}

/// Hull over a region of a map given by its spec; see
/// [`Correspondence::image_hull_over_box`].
pub fn image_hull_over_box(spec: &MapSpec, region: &Region) -> Result<Option<ConvexImage>> {
    Ok(Correspondence::from_spec(spec)?.image_hull_over_box(region))
}

/// Best-response factor: `{1}`, `{0}` or `[0,1]` by the sign of the payoff
/// advantage of the first strategy.
fn best_reply(advantage: f64, tau: f64) -> &'static [f64] {
    match sign_of(advantage, tau) {
        1 => &[1.0],
        -1 => &[0.0],
        _ => &[0.0, 1.0],
    }
}

fn best_response_image(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2], p: f64, q: f64, tau: f64) -> Vec<Point> {
    // p, q: probabilities of the first row / first column.
    let row = (a[0][0] * q + a[0][1] * (1.0 - q)) - (a[1][0] * q + a[1][1] * (1.0 - q));
    let col = (b[0][0] * p + b[1][0] * (1.0 - p)) - (b[0][1] * p + b[1][1] * (1.0 - p));
    let br1 = best_reply(row, tau);
    let br2 = best_reply(col, tau);
    br2.iter()
        .flat_map(|&y| br1.iter().map(move |&x| vec![x, y]))
        .collect()
}

/// Best-response correspondence of a 2x2 bimatrix game on `[0,1]^2`, in
/// coordinates `(p, q)` = probabilities of each player's first strategy.
/// Payoff ties within `tau` count as indifference.
pub fn best_response_correspondence(
    a: [[f64; 2]; 2],
    b: [[f64; 2]; 2],
    tau: f64,
) -> Result<Correspondence> {
    let spec = MapSpec::bimatrix(a, b)?;
    Ok(Correspondence::from_spec(&spec)?.with_tolerance(tau))
}

/// Outcome of a sampled local-gross-direction-preservation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LgdpReport {
    pub point: Point,
    pub delta: f64,
    pub samples: usize,
    /// Smallest `(r(y)-y).(r(z)-z)` over all sampled pairs.
    pub min_inner_product: f64,
    /// Pairwise non-negative inner products of sampled displacements.
    pub inner_product_pass: bool,
    /// Separation of the sampled neighbourhood from its sampled images.
    pub separation: Option<SeparationCertificate>,
}

impl LgdpReport {
    pub fn pass(&self) -> bool {
        self.inner_product_pass && self.separation.is_some()
    }
}

/// Samples `N_delta(x) ∩ domain` and checks both forms of the LGDP
/// condition: non-negative inner products of displacements, and a
/// hyperplane separating the sampled points from their images. Passing is
/// evidence, not proof.
pub fn lgdp_sample_check(
    f: &Correspondence,
    x: &[f64],
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<LgdpReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "must be positive"));
    }
    let img = f.evaluate(x)?;
    if residual(x, &img) <= DEFAULT_EPS_FIX {
        return Err(Error::invalid("point", format!("{x:?} is a fixed point")));
    }
    let d = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples + 1);
    points.push(x.to_vec());
    while points.len() <= samples {
        let u: Point = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if dot(&u, &u) > 1.0 {
            continue;
        }
        // Clipping to a convex set containing x never moves a point away
        // from x, so the sample stays in the neighbourhood.
        let y: Point = x.iter().zip(&u).map(|(xi, ui)| xi + delta * ui).collect();
        points.push(f.domain().clip(&y));
    }
    let mut images = Vec::new();
    let mut displacements = Vec::with_capacity(points.len());
    for y in &points {
        let img = f.evaluate(y)?;
        let r = representative(&img, RepresentativePolicy::Centroid);
        displacements.push(r.iter().zip(y).map(|(a, b)| a - b).collect::<Point>());
        images.extend(img.vertices);
    }
    let mut min_ip = f64::INFINITY;
    for i in 0..displacements.len() {
        for j in i..displacements.len() {
            min_ip = min_ip.min(dot(&displacements[i], &displacements[j]));
        }
    }
    dedup_points(&mut images);
    let separation = separating_hyperplane(&points, &images)?;
    Ok(LgdpReport {
        point: x.to_vec(),
        delta,
        samples,
        min_inner_product: min_ip,
        inner_product_pass: min_ip >= 0.0,
        separation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use serde_json::json;

    fn step_usc() -> Correspondence {
        Correspondence::from_spec(&MapSpec::catalog("step-usc").unwrap()).unwrap()
    }

    #[test]
    fn evaluate_catalog_examples() {
        let c = Correspondence::from_spec(&MapSpec::catalog("constant").unwrap()).unwrap();
        assert_eq!(c.evaluate(&[0.4, -0.9]).unwrap().vertices(), &[vec![0.0, 0.0]]);

        let s = step_usc();
        assert_eq!(s.evaluate(&[0.5]).unwrap().vertices(), &[vec![0.25], vec![0.75]]);
        assert_eq!(s.evaluate(&[0.2]).unwrap().vertices(), &[vec![0.75]]);
        assert_eq!(s.evaluate(&[0.7]).unwrap().vertices(), &[vec![0.25]]);

        let l = Correspondence::from_spec(&MapSpec::catalog("step-lgdp").unwrap()).unwrap();
        assert_eq!(l.evaluate(&[0.4]).unwrap().vertices(), &[vec![0.8]]);
        assert_eq!(l.evaluate(&[0.41]).unwrap().vertices(), &[vec![0.9]]);
    }

    #[test]
    fn step_usc_is_upper_semicontinuous_at_the_jump() {
        // Every nearby image lies inside f(1/2) = [1/4, 3/4].
        let s = step_usc();
        let centre = s.evaluate(&[0.5]).unwrap();
        for k in 1..50 {
            for x in [0.5 - k as f64 * 1e-3, 0.5 + k as f64 * 1e-3] {
                for v in s.evaluate(&[x]).unwrap().vertices() {
                    assert!(residual(v, &centre) == 0.0);
                }
            }
        }
    }

    #[test]
    fn evaluate_rejects_bad_inputs() {
        let s = step_usc();
        assert!(matches!(s.evaluate(&[1.5]), Err(Error::OutsideDomain { .. })));
        assert!(s.evaluate(&[0.5, 0.5]).is_err());
        let empty = Correspondence::custom(BoxDomain::cube(1, 0.0, 1.0).unwrap(), true, |_| vec![]);
        let e = empty.evaluate(&[0.3]).unwrap_err();
        assert!(e.to_string().contains("0.3"), "{e}");
        let escapes =
            Correspondence::custom(BoxDomain::cube(1, 0.0, 1.0).unwrap(), true, |_| vec![vec![2.0]]);
        assert!(matches!(escapes.evaluate(&[0.3]), Err(Error::BadImage { .. })));
    }

    #[test]
    fn best_response_examples() {
        let pennies = Correspondence::from_spec(&MapSpec::matching_pennies()).unwrap();
        assert_eq!(pennies.evaluate(&[0.9, 0.9]).unwrap().vertices(), &[vec![1.0, 0.0]]);
        let mid = pennies.evaluate(&[0.5, 0.5]).unwrap();
        assert_eq!(mid.vertices().len(), 4);
        assert_eq!(residual(&[0.5, 0.5], &mid), 0.0);

        let coord = Correspondence::from_spec(&MapSpec::coordination()).unwrap();
        assert_eq!(coord.evaluate(&[1.0, 1.0]).unwrap().vertices(), &[vec![1.0, 1.0]]);

        let bad = best_response_correspondence([[f64::NAN, 0.0], [0.0, 1.0]], [[0.0; 2]; 2], 1e-9);
        assert!(bad.is_err());
    }

    #[test]
    fn representative_policies() {
        let seg = ConvexImage::new(vec![vec![0.25], vec![0.75]], true).unwrap();
        assert_eq!(representative(&seg, RepresentativePolicy::Centroid), vec![0.5]);
        assert_eq!(representative(&seg, RepresentativePolicy::First), vec![0.25]);
        let single = ConvexImage::point(vec![0.1, 0.2]);
        assert_eq!(representative(&single, RepresentativePolicy::Centroid), vec![0.1, 0.2]);
        let sq = ConvexImage::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            true,
        )
        .unwrap();
        assert_eq!(representative(&sq, RepresentativePolicy::Centroid), vec![0.5, 0.5]);
        assert!("median".parse::<RepresentativePolicy>().is_err());
    }

    #[test]
    fn residual_examples() {
        let img = ConvexImage::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], true).unwrap();
        // Oracle: minimise |(t, 1-t)| over a fine grid of t in [0,1].
        let oracle = (0..=100_000)
            .map(|k| {
                let t = k as f64 / 100_000.0;
                (t * t + (1.0 - t) * (1.0 - t)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(residual(&[0.0, 0.0], &img), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(oracle, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-9);

        let seg = ConvexImage::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], true).unwrap();
        assert_abs_diff_eq!(residual(&[2.0, 0.0], &seg), 1.0, epsilon = 1e-12);
        assert_eq!(residual(&[0.5, 0.0], &seg), 0.0);
    }

    #[test]
    fn non_convex_residual_uses_cloud() {
        let cloud = ConvexImage::new(vec![vec![0.0], vec![1.0]], false).unwrap();
        // The polyline through the two points covers the midpoint.
        assert_eq!(residual(&[0.5], &cloud), 0.0);
        let tri = ConvexImage::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], false).unwrap();
        assert_abs_diff_eq!(residual(&[0.1, 0.1], &tri), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn hull_over_box_examples() {
        let s = step_usc();
        let h = s.image_hull_over_box(&Region::new(vec![0.1], vec![0.3]).unwrap()).unwrap();
        assert_eq!(h.vertices(), &[vec![0.75]]);
        let mut h = s
            .image_hull_over_box(&Region::new(vec![0.4], vec![0.6]).unwrap())
            .unwrap()
            .vertices()
            .to_vec();
        h.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(h, vec![vec![0.25], vec![0.75]]);
        let pennies = MapSpec::matching_pennies();
        let r = Region::new(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap();
        assert!(image_hull_over_box(&pennies, &r).unwrap().is_none());
    }

    #[test]
    fn lgdp_examples() {
        let contraction = Correspondence::from_spec(&MapSpec::catalog("contraction").unwrap()).unwrap();
        let rep = lgdp_sample_check(&contraction, &[-0.8, -0.7], 0.05, 200, 7).unwrap();
        assert!(rep.pass(), "{rep:?}");

        let step = Correspondence::from_spec(&MapSpec::catalog("step-lgdp").unwrap()).unwrap();
        let rep = lgdp_sample_check(&step, &[0.4], 0.05, 200, 1).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(rep.min_inner_product > 0.0);

        let flip = Correspondence::custom(BoxDomain::cube(1, 0.0, 1.0).unwrap(), true, |z| {
            vec![vec![1.0 - z[0]]]
        });
        assert!(lgdp_sample_check(&flip, &[0.8], 0.05, 200, 3).unwrap().pass());
        // Straddling the fixed point 1/2 breaks direction preservation.
        assert!(!lgdp_sample_check(&flip, &[0.51], 0.05, 200, 3).unwrap().pass());

        assert!(lgdp_sample_check(&flip, &[0.5], 0.05, 10, 0).is_err());
        assert!(lgdp_sample_check(&flip, &[0.8], 0.0, 10, 0).is_err());
    }

    #[test]
    fn lgdp_is_reproducible() {
        let step = Correspondence::from_spec(&MapSpec::catalog("step-lgdp").unwrap()).unwrap();
        let a = lgdp_sample_check(&step, &[0.3], 0.05, 50, 11).unwrap();
        let b = lgdp_sample_check(&step, &[0.3], 0.05, 50, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn builtin_params_are_read() {
        let spec = MapSpec::builtin(
            "step-usc",
            BoxDomain::cube(1, 0.0, 2.0).unwrap(),
            json!({"threshold": 1.0, "left": 1.5, "right": 0.5}),
        )
        .unwrap();
        let f = Correspondence::from_spec(&spec).unwrap();
        assert_eq!(f.evaluate(&[1.0]).unwrap().vertices(), &[vec![0.5], vec![1.5]]);
        assert_eq!(f.evaluate(&[0.2]).unwrap().vertices(), &[vec![1.5]]);
    }

    /// Brute-force oracle: minimise `|z - sum l_i v_i|` over a grid of
    /// barycentric weights with `steps` subdivisions.
    fn brute_hull_distance(z: &[f64], verts: &[Point], steps: usize) -> f64 {
        fn rec(
            z: &[f64],
            verts: &[Point],
            k: usize,
            left: usize,
            steps: usize,
            acc: &mut Point,
            best: &mut f64,
        ) {
            if k + 1 == verts.len() {
                let w = left as f64 / steps as f64;
                let p: Point = acc.iter().zip(&verts[k]).map(|(a, v)| a + w * v).collect();
                let d = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                *best = best.min(d);
                return;
            }
            for take in 0..=left {
                let w = take as f64 / steps as f64;
                let mut next: Point = acc.iter().zip(&verts[k]).map(|(a, v)| a + w * v).collect();
                rec(z, verts, k + 1, left - take, steps, &mut next, best);
            }
        }
        let mut best = f64::INFINITY;
        let mut acc = vec![0.0; z.len()];
        rec(z, verts, 0, steps, steps, &mut acc, &mut best);
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residual_matches_weight_grid_oracle(
            d in 1usize..=3,
            n in 1usize..=5,
            raw in prop::collection::vec(-1.0f64..1.0, 18),
            zraw in prop::collection::vec(-1.5f64..1.5, 3),
        ) {
            let verts: Vec<Point> = (0..n).map(|i| raw[i * 3..i * 3 + d].to_vec()).collect();
            let z = &zraw[..d];
            let img = ConvexImage::new(verts.clone(), true).unwrap();
            let fast = residual(z, &img);
            let steps = if n <= 3 { 120 } else { 30 };
            let slow = brute_hull_distance(z, &verts, steps);
            // The oracle only visits grid weights, so it can overshoot by
            // at most diam(hull) / steps.
            prop_assert!(fast <= slow + 1e-9);
            let diam = verts.iter().flat_map(|a| verts.iter().map(move |b| {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })).fold(0.0, f64::max);
            prop_assert!(slow - fast <= diam * d as f64 / steps as f64 + 1e-9,
                "fast {} slow {}", fast, slow);
            // Points of the hull have residual zero.
            let inside = representative(&img, RepresentativePolicy::Centroid);
            prop_assert!(residual(&inside, &img) <= 1e-9);
        }

        #[test]
        fn certificates_always_verify(
            a in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..5),
            b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 1..5),
            shift in -3.0f64..3.0,
        ) {
            let b: Vec<Point> = b.into_iter().map(|p| vec![p[0] + shift, p[1]]).collect();
            if let Some(c) = separating_hyperplane(&a, &b).unwrap() {
                prop_assert!(c.verify(&a, &b));
            }
        }

        #[test]
        fn hull_over_box_contains_samples(lo in 0.0f64..0.9, w in 0.01f64..0.5, seed in any::<u64>()) {
            let hi = (lo + w).min(1.0);
            let region = Region::new(vec![lo], vec![hi]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for name in ["step-usc", "step-lgdp"] {
                let f = Correspondence::from_spec(&MapSpec::catalog(name).unwrap()).unwrap();
                let hull = f.image_hull_over_box(&region).unwrap();
                for _ in 0..200 {
                    let x = rng.gen_range(lo..=hi);
                    for v in f.evaluate(&[x]).unwrap().vertices() {
                        prop_assert!(residual(v, &hull) <= 1e-12);
                    }
                }
            }
        }
    }

    /// Dual-route check of separation: for small planar sets, disjoint hulls
    /// always admit a separating line normal to an edge of one hull or
    /// through two points across the sets. Enumerating those supports must
    /// agree with the min-norm route.
    #[test]
    fn separation_agrees_with_support_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..400 {
            let na = rng.gen_range(1..=4);
            let nb = rng.gen_range(1..=4);
            let shift = rng.gen_range(-1.5..1.5);
            let a: Vec<Point> = (0..na).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let b: Vec<Point> = (0..nb)
                .map(|_| vec![rng.gen_range(0.0..1.0) + shift, rng.gen_range(0.0..1.0)])
                .collect();
            let all: Vec<&Point> = a.iter().chain(&b).collect();
            let mut found = false;
            for p in &all {
                for q in &all {
                    let e = [q[0] - p[0], q[1] - p[1]];
                    for n in [[e[0], e[1]], [-e[1], e[0]]] {
                        if n == [0.0, 0.0] {
                            continue;
                        }
                        for sgn in [1.0, -1.0] {
                            let w = [sgn * n[0], sgn * n[1]];
                            let max_a = a.iter().map(|x| w[0] * x[0] + w[1] * x[1]).fold(f64::NEG_INFINITY, f64::max);
                            let min_b = b.iter().map(|x| w[0] * x[0] + w[1] * x[1]).fold(f64::INFINITY, f64::min);
                            if min_b - max_a > 1e-9 {
                                found = true;
                            }
                        }
                    }
                }
            }
            let cert = separating_hyperplane(&a, &b).unwrap();
            if found {
                assert!(cert.is_some(), "{a:?} {b:?}");
            }
            if let Some(c) = cert {
                if c.margin > 1e-6 {
                    assert!(found, "{a:?} {b:?}");
                }
            }
        }
    }
}
