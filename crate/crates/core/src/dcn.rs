//! Central-hyperplane families of orthant labels.
//!
//! A hyperplane through the origin with normal `w` leaves whole orthants on
//! either closed side and cuts the rest. An orthant `l` lies in `{w.x >= 0}`
//! iff `w_i l_i >= 0` for every `i`, i.e. iff `l` agrees with `sign(w)` on
//! the support of `w`. So the labels strictly on one side form the subcube
//! of the label hypercube fixed by a partial sign vector `sigma`, and adding
//! the cut orthants gives the complement of the opposite subcube. A label set
//! is a *dC_N set* iff it is such a subcube or the complement of one.
//!
//! Only sign patterns matter here, so no floating point is involved;
//! [`brute_force_is_dcn`] re-derives the same family from integer normals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{OrthantLabel, Point, MAX_DIM};
use crate::hull::separating_hyperplane;

/// Sign pattern of a hyperplane normal: entries in {-1, 0, +1}, not all 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartialSign(Vec<i8>);

impl PartialSign {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.len() > MAX_DIM {
            return Err(Error::invalid("sigma", "dimension out of range"));
        }
        if signs.iter().any(|s| !(-1..=1).contains(s)) {
            return Err(Error::invalid("sigma", "entries must be -1, 0 or +1"));
        }
        if signs.iter().all(|&s| s == 0) {
            return Err(Error::invalid("sigma", "support must be nonempty"));
        }
        Ok(Self(signs))
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn support(&self) -> usize {
        self.0.iter().filter(|&&s| s != 0).count()
    }

    /// Bits of the label coordinates in the support, and the bit pattern
    /// a label must have there.
    fn masks(&self) -> (u32, u32) {
        let d = self.dim();
        let mut care = 0u32;
        let mut want = 0u32;
        for (i, &s) in self.0.iter().enumerate() {
            let bit = 1 << (d - 1 - i);
            if s != 0 {
                care |= bit;
                if s < 0 {
                    want |= bit;
                }
            }
        }
        (care, want)
    }

    /// Every partial sign vector of dimension `d`, by support size, then in
    /// a fixed order within each size.
    pub fn all(d: usize) -> Vec<PartialSign> {
        let mut out = Vec::new();
        for code in 1..3usize.pow(d as u32) {
            let mut c = code;
            let signs: Vec<i8> = (0..d)
                .map(|_| {
                    let s = [0, 1, -1][c % 3];
                    c /= 3;
                    s
                })
                .collect();
            out.push(PartialSign(signs));
        }
        out.sort_by_key(|s| s.support());
        out
    }
}

impl fmt::Display for PartialSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(match s {
                1 => "+",
                -1 => "-",
                _ => "0",
            })?;
        }
        f.write_str(")")
    }
}

/// A set of orthant labels of one dimension, as a bitset over label indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelSet {
    dim: usize,
    words: Vec<u64>,
}

impl LabelSet {
    pub fn empty(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "label dimension out of range");
        Self {
            dim,
            words: vec![0; (1usize << dim).div_ceil(64)],
        }
    }

    pub fn full(dim: usize) -> Self {
        let mut s = Self::empty(dim);
        for l in OrthantLabel::all(dim) {
            s.insert(l);
        }
        s
    }

    pub fn from_labels<I: IntoIterator<Item = OrthantLabel>>(dim: usize, labels: I) -> Result<Self> {
        let mut s = Self::empty(dim);
        for l in labels {
            check_dim(dim, l.dim())?;
            s.insert(l);
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, l: OrthantLabel) {
        debug_assert_eq!(l.dim(), self.dim);
        let b = l.bits() as usize;
        self.words[b / 64] |= 1 << (b % 64);
    }

    pub fn contains(&self, l: OrthantLabel) -> bool {
        let b = l.bits() as usize;
        l.dim() == self.dim && self.words[b / 64] & (1 << (b % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == 1 << self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = OrthantLabel> + '_ {
        OrthantLabel::all(self.dim).filter(move |&l| self.contains(l))
    }

    pub fn complement(&self) -> Self {
        let mut s = Self::empty(self.dim);
        for l in OrthantLabel::all(self.dim) {
            if !self.contains(l) {
                s.insert(l);
            }
        }
        s
    }

    pub fn union(&self, other: &LabelSet) -> Self {
        Self {
            dim: self.dim,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &LabelSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    /// Coordinates on which every member agrees, as a partial sign vector
    /// (`None` when the set is empty or no coordinate is shared).
    fn agreement(&self) -> Option<PartialSign> {
        let mut it = self.iter();
        let first = it.next()?;
        let mut signs = first.signs();
        for l in it {
            for (i, s) in signs.iter_mut().enumerate() {
                if *s != l.sign(i) {
                    *s = 0;
                }
            }
        }
        PartialSign::new(signs).ok()
    }

    /// Parses `+++,++-,-+-`; every label must have dimension `dim`.
    pub fn parse(dim: usize, text: &str) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid("d", format!("{dim} not in 1..={MAX_DIM}")));
        }
        let mut s = Self::empty(dim);
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let l: OrthantLabel = part.parse()?;
            if l.dim() != dim {
                return Err(Error::invalid(
                    "set",
                    format!("label {part:?} has dimension {}, expected {dim}", l.dim()),
                ));
            }
            s.insert(l);
        }
        Ok(s)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Labels on the closed positive side of a normal with sign pattern `sigma`.
pub fn subcube(sigma: &PartialSign) -> LabelSet {
    let d = sigma.dim();
    let (care, want) = sigma.masks();
    let mut s = LabelSet::empty(d);
    for l in OrthantLabel::all(d) {
        if l.bits() & care == want {
            s.insert(l);
        }
    }
    s
}

/// Which of the two collective choices for cut orthants produced the set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcnSide {
    /// Cut orthants excluded: the set is `subcube(sigma)`.
    Subcube,
    /// Cut orthants included: the set is the complement of `subcube(sigma)`.
    Complement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcnWitness {
    pub sigma: PartialSign,
    pub side: DcnSide,
}

/// Decides membership in the dC_N family and returns a witness.
///
/// A nonempty set is contained in `subcube(sigma)` iff `sigma` only fixes
/// coordinates all members agree on, so the smallest candidate is the
/// agreement pattern itself and a size comparison decides equality. The
/// complement case is the same test on the complement.
pub fn is_dcn(s: &LabelSet) -> Option<DcnWitness> {
    let d = s.dim();
    if let Some(sigma) = s.agreement() {
        if s.len() == 1 << (d - sigma.support()) {
            return Some(DcnWitness {
                sigma,
                side: DcnSide::Subcube,
            });
        }
    }
    let c = s.complement();
    if let Some(sigma) = c.agreement() {
        if c.len() == 1 << (d - sigma.support()) {
            return Some(DcnWitness {
                sigma,
                side: DcnSide::Complement,
            });
        }
    }
    None
}

/// When a face label set counts as safe (not problematic).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceMode {
    /// Safe iff the set is a dC_N set.
    #[default]
    Equality,
    /// Safe iff all labels share a sign on some coordinate.
    Subcube,
}

impl FromStr for FaceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equality" => Ok(Self::Equality),
            "subcube" => Ok(Self::Subcube),
            other => Err(Error::invalid(
                "face-mode",
                format!("{other:?}; expected equality or subcube"),
            )),
        }
    }
}

impl fmt::Display for FaceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Equality => "equality",
            Self::Subcube => "subcube",
        })
    }
}

pub fn face_safe(s: &LabelSet, mode: FaceMode) -> bool {
    match mode {
        FaceMode::Equality => is_dcn(s).is_some(),
        FaceMode::Subcube => s.agreement().is_some(),
    }
}

/// Smallest set of labels whose addition turns `s` into a dC_N set; empty
/// when `s` already is one, `None` when `s` is the full set.
///
/// Candidates are the subcubes containing `s` (the smallest is fixed by the
/// agreement pattern) and complements of subcubes disjoint from `s` (the
/// smallest is the complement of the largest such subcube, i.e. the one
/// with the fewest fixed coordinates).
pub fn dcn_extension(s: &LabelSet) -> Option<LabelSet> {
    if s.is_full() {
        return None;
    }
    if is_dcn(s).is_some() {
        return Some(LabelSet::empty(s.dim()));
    }
    if s.is_empty() {
        let mut one = LabelSet::empty(s.dim());
        one.insert(OrthantLabel::all(s.dim()).next().expect("dimension is positive"));
        return Some(one);
    }
    let mut best: Option<LabelSet> = None;
    let mut consider = |target: LabelSet| {
        if best.as_ref().is_none_or(|b| target.len() < b.len()) {
            best = Some(target);
        }
    };
    if let Some(sigma) = s.agreement() {
        consider(subcube(&sigma));
    }
    if let Some(sigma) = PartialSign::all(s.dim())
        .into_iter()
        .find(|sigma| subcube(sigma).is_disjoint(s))
    {
        consider(subcube(&sigma).complement());
    }
    let target = best.expect("a proper subset always has a disjoint singleton subcube");
    let mut addition = LabelSet::empty(s.dim());
    for l in target.iter().filter(|&l| !s.contains(l)) {
        addition.insert(l);
    }
    Some(addition)
}

/// Independent check of [`is_dcn`]: enumerates integer normals
/// `w in {-k..k}^d \ {0}`, classifies each closed orthant by testing its
/// generating rays `l_i e_i` against the hyperplane, and compares `s` with
/// the four side/cut-choice sets of every normal.
pub fn brute_force_is_dcn(s: &LabelSet, k: i32) -> bool {
    let d = s.dim();
    let width = (2 * k + 1) as usize;
    let total = width.pow(d as u32);
    let labels: Vec<OrthantLabel> = OrthantLabel::all(d).collect();
    for code in 0..total {
        let mut c = code;
        let w: Vec<f64> = (0..d)
            .map(|_| {
                let v = (c % width) as i32 - k;
                c /= width;
                f64::from(v)
            })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            continue;
        }
        let mut pos = LabelSet::empty(d);
        let mut neg = LabelSet::empty(d);
        for &l in &labels {
            let rays: Vec<Point> = (0..d)
                .map(|i| {
                    let mut r = vec![0.0; d];
                    r[i] = f64::from(l.sign(i));
                    r
                })
                .collect();
            let side = |sgn: f64| {
                rays.iter()
                    .all(|r| sgn * r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
            };
            if side(1.0) {
                pos.insert(l);
            } else if side(-1.0) {
                neg.insert(l);
            }
        }
        let candidates = [
            pos.clone(),
            neg.complement(),
            neg.clone(),
            pos.complement(),
        ];
        if candidates.iter().any(|c| c == s) {
            return true;
        }
    }
    false
}

/// Whether vertex subset `v` of a polytope can be strictly cut off from the
/// remaining vertices `w` by an affine hyperplane, i.e. whether their hulls
/// are disjoint. Limited to `d <= 3`.
pub fn is_affinely_separable(v: &[Point], w: &[Point]) -> Result<bool> {
    let d = v.first().or(w.first()).map_or(0, |p| p.len());
    if d == 0 || d > 3 {
        return Err(Error::invalid("vertices", "dimension must be 1, 2 or 3"));
    }
    if v.is_empty() || w.is_empty() {
        // One side empty: any far-away hyperplane cuts nothing off.
        return Ok(true);
    }
    Ok(separating_hyperplane(v, w)?.is_some())
}
