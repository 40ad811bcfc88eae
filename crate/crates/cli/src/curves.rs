//! Curve files: named closed polylines in Cartesian, Poincaré-ball or
//! hyperboloid coordinates.

use std::collections::HashSet;

use anyhow::{bail, Context, Result};
use hypergreen::fields_linking::ParamLoop;
use hypergreen::spaceform::{ModelSpace, Point};
use nalgebra::{DVector, Vector3};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Cartesian,
    Ball,
    Hyperboloid,
}

impl Model {
    pub fn coordinate_count(self) -> usize {
        match self {
            Model::Hyperboloid => 4,
            _ => 3,
        }
    }

    pub fn coordinate_names(self) -> Vec<String> {
        match self {
            Model::Hyperboloid => (0..4).map(|i| format!("x{i}")).collect(),
            _ => ["x", "y", "z"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveEntry {
    name: String,
    #[serde(default = "plus_one")]
    orientation: i32,
    points: Vec<Vec<f64>>,
}

fn plus_one() -> i32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    space: String,
    model: Model,
    curves: Vec<CurveEntry>,
}

pub struct NamedCurve {
    pub name: String,
    pub curve: ParamLoop,
}

pub struct CurveFile {
    pub space: ModelSpace,
    pub model: Model,
    pub curves: Vec<NamedCurve>,
}

impl CurveFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawFile = serde_json::from_str(text).context("malformed curve file")?;
        let space = match raw.space.as_str() {
            "euclidean3" | "h3" => ModelSpace::from_tag(&raw.space)?,
            other => bail!("unsupported space '{other}' (expected euclidean3 or h3)"),
        };
        match (space.is_hyperbolic(), raw.model) {
            (false, Model::Cartesian) | (true, Model::Ball) | (true, Model::Hyperboloid) => {}
            (h, m) => bail!("model {m:?} does not fit space {}", if h { "h3" } else { "euclidean3" }),
        }
        let mut names = HashSet::new();
        let mut curves = Vec::with_capacity(raw.curves.len());
        for entry in raw.curves {
            if !names.insert(entry.name.clone()) {
                bail!("duplicate curve name '{}'", entry.name);
            }
            if entry.points.len() < 3 {
                bail!("curve '{}' needs at least three points", entry.name);
            }
            let points = entry
                .points
                .iter()
                .map(|p| to_point(&space, raw.model, p))
                .collect::<Result<Vec<_>>>()
                .with_context(|| format!("curve '{}'", entry.name))?;
            let curve = ParamLoop::polyline(&space, points).with_context(|| format!("curve '{}'", entry.name))?;
            let curve = match entry.orientation {
                1 => curve,
                -1 => curve.reversed(),
                o => bail!("curve '{}': orientation must be +1 or -1, got {o}", entry.name),
            };
            curves.push(NamedCurve { name: entry.name, curve });
        }
        Ok(Self { space, model: raw.model, curves })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The named curve, or the only one when `name` is absent.
    pub fn pick(&self, name: Option<&str>) -> Result<&ParamLoop> {
        match name {
            Some(n) => self.curves.iter().find(|c| c.name == n).map(|c| &c.curve).with_context(|| format!("no curve named '{n}'")),
            None if self.curves.len() == 1 => Ok(&self.curves[0].curve),
            None => bail!("the file holds {} curves; choose one with --curve", self.curves.len()),
        }
    }
}

pub fn to_point(space: &ModelSpace, model: Model, coords: &[f64]) -> Result<Point> {
    if coords.len() != model.coordinate_count() {
        bail!("expected {} coordinates, got {}", model.coordinate_count(), coords.len());
    }
    if coords.iter().any(|c| !c.is_finite()) {
        bail!("non-finite coordinate");
    }
    Ok(match model {
        Model::Hyperboloid | Model::Cartesian => space.point_from_slice(coords)?,
        Model::Ball => space.from_ball(&DVector::from_column_slice(coords))?,
    })
}

pub fn from_point(space: &ModelSpace, model: Model, p: &Point) -> Vec<f64> {
    match model {
        Model::Hyperboloid | Model::Cartesian => p.coords().as_slice().to_vec(),
        Model::Ball => space.to_ball(p).as_slice().to_vec(),
    }
}

/// Components of a tangent vector at `p` in the coordinates of `model`.
pub fn vector_components(space: &ModelSpace, model: Model, p: &Point, v: &DVector<f64>) -> Vec<f64> {
    match model {
        Model::Hyperboloid | Model::Cartesian => v.as_slice().to_vec(),
        Model::Ball => space.vec_to_ball(p, v).as_slice().to_vec(),
    }
}

pub fn parse_direction(text: &str) -> Result<Vector3<f64>> {
    let parts = text.split(',').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>()?;
    if parts.len() != 3 {
        bail!("direction needs three comma-separated components");
    }
    let v = Vector3::new(parts[0], parts[1], parts[2]);
    if !(v.norm() > 0.0) {
        bail!("direction must be non-zero");
    }
    Ok(v.normalize())
}
