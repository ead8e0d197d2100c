//! Serializable map descriptions and the built-in catalog.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Point, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Builtin,
    Piecewise,
    Bimatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinSpec {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(rename = "box")]
    pub region: Region,
    pub image: Vec<Point>,
}

/// Regions are matched in order; the first closed box containing the point
/// wins, otherwise `default_image` applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    pub regions: Vec<RegionSpec>,
    pub default_image: Vec<Point>,
    #[serde(default = "yes")]
    pub convex_valued: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BimatrixSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub dimension: usize,
    pub domain: BoxDomain,
    pub kind: SpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub piecewise: Option<PiecewiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bimatrix: Option<BimatrixSpec>,
}

pub const CATALOG: [&str; 5] = ["constant", "contraction", "identity", "step-usc", "step-lgdp"];

impl MapSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MapSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn builtin(name: &str, domain: BoxDomain, params: Value) -> Result<Self> {
        let params = match params {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            _ => return Err(Error::invalid("builtin.params", "must be an object")),
        };
        let spec = MapSpec {
            dimension: domain.dim(),
            domain,
            kind: SpecKind::Builtin,
            builtin: Some(BuiltinSpec {
                name: name.to_string(),
                params,
            }),
            piecewise: None,
            bimatrix: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn piecewise(domain: BoxDomain, pw: PiecewiseSpec) -> Result<Self> {
        let spec = MapSpec {
            dimension: domain.dim(),
            domain,
            kind: SpecKind::Piecewise,
            builtin: None,
            piecewise: Some(pw),
            bimatrix: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A 2x2 bimatrix game on `[0,1]^2`; `a` and `b` are row-major payoffs
    /// of the row and column player.
    pub fn bimatrix(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> Result<Self> {
        let spec = MapSpec {
            dimension: 2,
            domain: BoxDomain::cube(2, 0.0, 1.0)?,
            kind: SpecKind::Bimatrix,
            builtin: None,
            piecewise: None,
            bimatrix: Some(BimatrixSpec {
                a: a.iter().map(|r| r.to_vec()).collect(),
                b: b.iter().map(|r| r.to_vec()).collect(),
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matching_pennies() -> Self {
        Self::bimatrix([[1.0, -1.0], [-1.0, 1.0]], [[-1.0, 1.0], [1.0, -1.0]])
            .expect("valid fixture")
    }

    pub fn coordination() -> Self {
        Self::bimatrix([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]).expect("valid fixture")
    }

    /// A catalog map on its reference domain: the contraction is
    /// `z/2 + (0.3, 0.1)` and the constant map is `{0}`, both on `[-1,1]^2`;
    /// identity lives on `[-1,1]^2`; the step maps on `[0,1]`.
    pub fn catalog(name: &str) -> Result<Self> {
        match name {
            "constant" | "identity" => {
                Self::builtin(name, BoxDomain::cube(2, -1.0, 1.0)?, Value::Null)
            }
            "contraction" => Self::builtin(
                name,
                BoxDomain::cube(2, -1.0, 1.0)?,
                serde_json::json!({"factor": 0.5, "offset": [0.3, 0.1]}),
            ),
            "step-usc" | "step-lgdp" => {
                Self::builtin(name, BoxDomain::cube(1, 0.0, 1.0)?, Value::Null)
            }
            other => Err(Error::invalid(
                "builtin.name",
                format!("unknown map {other:?}; expected one of {CATALOG:?}"),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate("domain")?;
        if self.domain.dim() != self.dimension {
            return Err(Error::invalid(
                "dimension",
                format!(
                    "is {} but domain has dimension {}",
                    self.dimension,
                    self.domain.dim()
                ),
            ));
        }
        match self.kind {
            SpecKind::Builtin => {
                let b = self
                    .builtin
                    .as_ref()
                    .ok_or_else(|| Error::invalid("builtin", "missing for kind \"builtin\""))?;
                builtin_definition(b, &self.domain).map(|_| ())
            }
            SpecKind::Piecewise => {
                let pw = self
                    .piecewise
                    .as_ref()
                    .ok_or_else(|| Error::invalid("piecewise", "missing for kind \"piecewise\""))?;
                validate_piecewise(pw, self.dimension)
            }
            SpecKind::Bimatrix => {
                let bm = self
                    .bimatrix
                    .as_ref()
                    .ok_or_else(|| Error::invalid("bimatrix", "missing for kind \"bimatrix\""))?;
                if self.dimension != 2 {
                    return Err(Error::invalid("dimension", "bimatrix games need dimension 2"));
                }
                parse_matrix(&bm.a, "bimatrix.A")?;
                parse_matrix(&bm.b, "bimatrix.B")?;
                Ok(())
            }
        }
    }
}

pub(crate) fn parse_matrix(m: &[Vec<f64>], field: &str) -> Result<[[f64; 2]; 2]> {
    if m.len() != 2 || m.iter().any(|r| r.len() != 2) {
        return Err(Error::invalid(field, "only 2x2 games are supported"));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid(field, "entries must be finite"));
    }
    Ok([[m[0][0], m[0][1]], [m[1][0], m[1][1]]])
}

fn validate_image(img: &[Point], dim: usize, field: &str) -> Result<()> {
    if img.is_empty() {
        return Err(Error::invalid(field, "image must be nonempty"));
    }
    for (k, p) in img.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::invalid(
                format!("{field}[{k}]"),
                format!("has {} coordinates, expected {dim}", p.len()),
            ));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("{field}[{k}]"), "must be finite"));
        }
    }
    Ok(())
}

fn validate_piecewise(pw: &PiecewiseSpec, dim: usize) -> Result<()> {
    for (k, r) in pw.regions.iter().enumerate() {
        let field = format!("piecewise.regions[{k}]");
        Region::new(r.region.lo.clone(), r.region.hi.clone())
            .map_err(|e| Error::invalid(format!("{field}.box"), e.to_string()))?;
        if r.region.dim() != dim {
            return Err(Error::invalid(
                format!("{field}.box"),
                format!("has dimension {}, expected {dim}", r.region.dim()),
            ));
        }
        validate_image(&r.image, dim, &format!("{field}.image"))?;
    }
    validate_image(&pw.default_image, dim, "piecewise.default_image")
}

/// Resolved form of a builtin entry.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Builtin {
    Constant(Point),
    Affine { factor: f64, offset: Point },
    Identity,
    Piecewise(PiecewiseSpec),
}

fn param_f64(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::invalid(format!("builtin.params.{key}"), "must be a finite number")),
    }
}

fn param_point(params: &Map<String, Value>, key: &str, default: Point) -> Result<Point> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            let p: Point = serde_json::from_value(v.clone()).map_err(|_| {
                Error::invalid(format!("builtin.params.{key}"), "must be an array of numbers")
            })?;
            if p.len() != default.len() {
                return Err(Error::invalid(
                    format!("builtin.params.{key}"),
                    format!("has {} entries, expected {}", p.len(), default.len()),
                ));
            }
            Ok(p)
        }
    }
}

fn step_1d(domain: &BoxDomain, threshold: f64, left: f64, right: f64, usc: bool) -> PiecewiseSpec {
    let lo = domain.lo[0];
    let at = |x: f64| Region {
        lo: vec![x],
        hi: vec![x],
    };
    let left_side = RegionSpec {
        region: Region {
            lo: vec![lo.min(threshold)],
            hi: vec![threshold],
        },
        image: vec![vec![left]],
    };
    let regions = if usc {
        // The jump point takes the whole segment between the two values.
        vec![
            RegionSpec {
                region: at(threshold),
                image: vec![vec![right], vec![left]],
            },
            left_side,
        ]
    } else {
        vec![left_side]
    };
    PiecewiseSpec {
        regions,
        default_image: vec![vec![right]],
        convex_valued: true,
    }
}

pub(crate) fn builtin_definition(b: &BuiltinSpec, domain: &BoxDomain) -> Result<Builtin> {
    let d = domain.dim();
    let p = &b.params;
    let allowed: &[&str] = match b.name.as_str() {
        "constant" => &["point"],
        "contraction" => &["factor", "offset"],
        "identity" => &[],
        "step-usc" | "step-lgdp" => &["threshold", "left", "right"],
        other => {
            return Err(Error::invalid(
                "builtin.name",
                format!("unknown map {other:?}; expected one of {CATALOG:?}"),
            ))
        }
    };
    if let Some(k) = p.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::invalid(
            format!("builtin.params.{k}"),
            format!("not a parameter of {:?}", b.name),
        ));
    }
    let def = match b.name.as_str() {
        "constant" => Builtin::Constant(param_point(p, "point", domain.center())?),
        "contraction" => Builtin::Affine {
            factor: param_f64(p, "factor", 0.5)?,
            offset: param_point(p, "offset", vec![0.0; d])?,
        },
        "identity" => Builtin::Identity,
        name => {
            if d != 1 {
                return Err(Error::invalid("dimension", format!("{name:?} is one-dimensional")));
            }
            let usc = name == "step-usc";
            let (t, l, r) = if usc { (0.5, 0.75, 0.25) } else { (0.4, 0.8, 0.9) };
            Builtin::Piecewise(step_1d(
                domain,
                param_f64(p, "threshold", t)?,
                param_f64(p, "left", l)?,
                param_f64(p, "right", r)?,
                usc,
            ))
        }
    };
    Ok(def)
}
