//! Nearest points of convex hulls of finite point sets.
//!
//! Everything here reduces to one primitive: the minimum-norm point of
//! `conv(P)`, found with Wolfe's active-set algorithm. It terminates after
//! finitely many affine solves and returns the exact minimizer up to rounding,
//! which is what residuals and separation certificates need.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Point;

const WEIGHT_EPS: f64 = 1e-12;
const GAP_EPS: f64 = 1e-14;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn combine(points: &[Point], corral: &[usize], weights: &[f64]) -> Point {
    let d = points[corral[0]].len();
    let mut x = vec![0.0; d];
    for (&i, &w) in corral.iter().zip(weights) {
        for (xk, pk) in x.iter_mut().zip(&points[i]) {
            *xk += w * pk;
        }
    }
    x
}

/// Minimizer of `|sum a_i p_i|` subject to `sum a_i = 1` over the corral.
fn affine_minimizer(points: &[Point], corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate() {
            m[(r, c)] = dot(&points[i], &points[j]);
        }
        m[(r, k)] = 1.0;
        m[(k, r)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(k).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

/// Minimum-norm point of `conv(points)`.
pub fn min_norm_point(points: &[Point]) -> Point {
    assert!(!points.is_empty(), "min_norm_point of an empty set");
    match points.len() {
        1 => return points[0].clone(),
        2 => return nearest_on_segment(&vec![0.0; points[0].len()], &points[0], &points[1]),
        _ => {}
    }
    let scale = points.iter().map(|p| norm(p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .unwrap();
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..(50 + 10 * points.len()) {
        let xx = dot(&x, &x);
        let (j, xp) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xp <= GAP_EPS * xx.sqrt() * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(0.0);
        let mut stalled = false;
        for _ in 0..=corral.len() + 1 {
            let Some(alpha) = affine_minimizer(points, &corral) else {
                // Affinely dependent corral: numerically at the optimum.
                stalled = true;
                break;
            };
            if alpha.iter().all(|&a| a > WEIGHT_EPS) {
                lambda = alpha;
                x = combine(points, &corral, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= WEIGHT_EPS && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            let mut next_corral = Vec::with_capacity(corral.len());
            let mut next_lambda = Vec::with_capacity(corral.len());
            for ((&i, &l), &a) in corral.iter().zip(&lambda).zip(&alpha) {
                let w = (1.0 - theta) * l + theta * a;
                if w > WEIGHT_EPS {
                    next_corral.push(i);
                    next_lambda.push(w);
                }
            }
            if next_corral.is_empty() || next_corral == corral[..corral.len() - 1] && theta == 0.0 {
                stalled = true;
                break;
            }
            let total: f64 = next_lambda.iter().sum();
            next_lambda.iter_mut().for_each(|w| *w /= total);
            corral = next_corral;
            lambda = next_lambda;
            x = combine(points, &corral, &lambda);
        }
        if stalled {
            break;
        }
    }
    x
}

fn nearest_on_segment(z: &[f64], a: &[f64], b: &[f64]) -> Point {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return a.to_vec();
    }
    let t = (dot(&sub(z, a), &ab) / len2).clamp(0.0, 1.0);
    a.iter().zip(&ab).map(|(ai, d)| ai + t * d).collect()
}

/// Nearest point of `conv(vertices)` to `z`.
pub fn project_onto_hull(z: &[f64], vertices: &[Point]) -> Point {
    let shifted: Vec<Point> = vertices.iter().map(|v| sub(v, z)).collect();
    let m = min_norm_point(&shifted);
    m.iter().zip(z).map(|(a, b)| a + b).collect()
}

/// Euclidean distance from `z` to `conv(vertices)`.
pub fn hull_distance(z: &[f64], vertices: &[Point]) -> f64 {
    match vertices.len() {
        1 => norm(&sub(z, &vertices[0])),
        _ => {
            let shifted: Vec<Point> = vertices.iter().map(|v| sub(v, z)).collect();
            norm(&min_norm_point(&shifted))
        }
    }
}

/// Distance from `z` to the listed points and to the segments joining
/// consecutive points.
pub fn polyline_distance(z: &[f64], vertices: &[Point]) -> f64 {
    let mut best = vertices
        .iter()
        .map(|v| norm(&sub(z, v)))
        .fold(f64::INFINITY, f64::min);
    for w in vertices.windows(2) {
        best = best.min(norm(&sub(z, &nearest_on_segment(z, &w[0], &w[1]))));
    }
    best
}

/// A hyperplane `w.x = offset` with `w.a <= offset - margin` on one set and
/// `w.b >= offset + margin` on the other. `normal` has unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub normal: Point,
    pub offset: f64,
    pub margin: f64,
}

impl SeparationCertificate {
    /// Checks both inequality families at every listed point.
    pub fn verify(&self, a: &[Point], b: &[Point]) -> bool {
        self.margin > 0.0
            && a.iter()
                .all(|p| dot(&self.normal, p) <= self.offset - self.margin)
            && b.iter()
                .all(|p| dot(&self.normal, p) >= self.offset + self.margin)
    }
}

/// Strict separation of `conv(a)` from `conv(b)` with the maximum margin,
/// or `None` if the hulls meet (or are closer than rounding can resolve).
pub fn separating_hyperplane(a: &[Point], b: &[Point]) -> Result<Option<SeparationCertificate>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("point set", "must be nonempty"));
    }
    let d = a[0].len();
    for p in a.iter().chain(b) {
        check_dim(d, p.len())?;
    }
    let diffs: Vec<Point> = b
        .iter()
        .flat_map(|q| a.iter().map(move |p| sub(q, p)))
        .collect();
    let v = min_norm_point(&diffs);
    let len = norm(&v);
    let scale = a.iter().chain(b).map(|p| norm(p)).fold(1.0, f64::max);
    if len <= 1e-12 * scale {
        return Ok(None);
    }
    let normal: Point = v.iter().map(|x| x / len).collect();
    let max_a = a.iter().map(|p| dot(&normal, p)).fold(f64::NEG_INFINITY, f64::max);
    let min_b = b.iter().map(|p| dot(&normal, p)).fold(f64::INFINITY, f64::min);
    let gap = min_b - max_a;
    if gap <= 1e-12 * scale {
        return Ok(None);
    }
    let offset = 0.5 * (max_a + min_b);
    // Shrink slightly so the rounded offset +/- margin still brackets.
    let margin = 0.5 * gap * (1.0 - 1e-9);
    let cert = SeparationCertificate {
        normal,
        offset,
        margin,
    };
    Ok(cert.verify(a, b).then_some(cert))
}
