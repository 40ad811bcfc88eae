//! Sampled radial profiles with Hermite interpolation, near-zero series,
//! far-field tails and JSON serialization.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frobenius::FrobeniusSeries;
use super::system::{assemble_matrix_system, assemble_system, block_layout, Block, Layout, RadialSystem};
use crate::error::{Error, Result};
use crate::spaceform::{unit_sphere_volume, ModelSpace, SpaceKind};

/// Diagnostics recorded while solving for a profile.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveDiagnostics {
    /// Number of decaying modes of the frozen system at `t_far`.
    pub decaying_modes: usize,
    /// Coefficients of the regular series added to the singular branch.
    pub regular_coeffs: Vec<f64>,
    /// Matching radius.
    pub t_match: f64,
    /// Condition number of the matching system.
    pub match_condition: f64,
    /// Relative mismatch of the two sides after matching.
    pub match_residual: f64,
}

/// Value and first derivative of a profile at one radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSample {
    pub value: DVector<f64>,
    pub deriv: DVector<f64>,
}

#[derive(Clone, Debug)]
enum Tail {
    /// `A_i(t) = A_i(t_max) e^{−κ_i (t − t_max)}`.
    Exponential(Vec<f64>),
    /// `A_i(t) = A_i(t_max) (t/t_max)^{−p_i}`.
    Power(Vec<f64>),
}

/// The radial function `A(t)` sampled on a grid.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    system: RadialSystem,
    grid: Vec<f64>,
    values: Vec<DVector<f64>>,
    derivs: Vec<DVector<f64>>,
    seconds: Vec<DVector<f64>>,
    series: Vec<FrobeniusSeries>,
    leading_coeff: f64,
    tail: Tail,
    pub diagnostics: SolveDiagnostics,
}

impl RadialProfile {
    /// Builds a profile from node data; second derivatives are taken from the ODE.
    pub fn new(
        system: RadialSystem,
        grid: Vec<f64>,
        values: Vec<DVector<f64>>,
        derivs: Vec<DVector<f64>>,
        series: Vec<FrobeniusSeries>,
        leading_coeff: f64,
    ) -> Result<Self> {
        let d = system.dim();
        if grid.len() < 2 || grid.len() != values.len() || grid.len() != derivs.len() {
            return Err(Error::MalformedProfile("grid and sample lengths differ or are too short".into()));
        }
        if !(grid[0] > 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedProfile("grid must be positive and strictly increasing".into()));
        }
        if values.iter().chain(&derivs).any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::MalformedProfile("samples have wrong size or non-finite entries".into()));
        }
        if series.iter().any(|s| s.coeffs.is_empty() || s.coeffs.iter().any(|c| c.len() != d)) {
            return Err(Error::MalformedProfile("series coefficients have wrong size".into()));
        }
        let seconds = grid
            .iter()
            .zip(values.iter().zip(&derivs))
            .map(|(&t, (a, da))| system.coefficient_matrix(t) * a - da * system.mean_curvature(t))
            .collect();
        let last = grid.len() - 1;
        let t_max = grid[last];
        let rates = (0..d)
            .map(|i| {
                let (a, da) = (values[last][i], derivs[last][i]);
                let r = if a != 0.0 { -da / a } else { 0.0 };
                match system.space().kind() {
                    SpaceKind::RealHyperbolic => r.max(0.0),
                    SpaceKind::Euclidean => (r * t_max).max(0.0),
                }
            })
            .collect();
        let tail = match system.space().kind() {
            SpaceKind::RealHyperbolic => Tail::Exponential(rates),
            SpaceKind::Euclidean => Tail::Power(rates),
        };
        Ok(Self { system, grid, values, derivs, seconds, series, leading_coeff, tail, diagnostics: SolveDiagnostics::default() })
    }

    pub fn system(&self) -> &RadialSystem {
        &self.system
    }

    pub fn space(&self) -> &ModelSpace {
        self.system.space()
    }

    pub fn degree(&self) -> usize {
        self.system.degree()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn derivs(&self) -> &[DVector<f64>] {
        &self.derivs
    }

    pub fn series(&self) -> &[FrobeniusSeries] {
        &self.series
    }

    pub fn leading_coeff(&self) -> f64 {
        self.leading_coeff
    }

    pub fn t_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn t_max(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Index of component `block`, if present.
    pub fn block_index(&self, block: Block) -> Option<usize> {
        self.system.blocks().iter().position(|&b| b == block)
    }

    /// Samples of one block component as a column.
    pub fn block_column(&self, block: Block) -> Option<(Vec<f64>, Vec<f64>)> {
        let i = self.block_index(block)?;
        Some((self.values.iter().map(|v| v[i]).collect(), self.derivs.iter().map(|v| v[i]).collect()))
    }

    fn locate(&self, t: f64) -> usize {
        let j = self.grid.partition_point(|&g| g <= t);
        j.clamp(1, self.grid.len() - 1) - 1
    }

    /// `A(t)` and `A'(t)` for any `t > 0`.
    pub fn eval(&self, t: f64) -> ProfileSample {
        if t < self.grid[0] {
            return self.eval_series(t);
        }
        if t > self.t_max() {
            return self.eval_tail(t);
        }
        let j = self.locate(t);
        let [v, dv, _] = self.quintic(j, t);
        ProfileSample { value: v, deriv: dv }
    }

    /// `A''(t)` on the grid range, from the interpolant.
    pub fn second_interp(&self, t: f64) -> DVector<f64> {
        let [_, _, dd] = self.quintic(self.locate(t), t);
        dd
    }

    // quintic Hermite interpolant of (A, A', A'') on [t_j, t_{j+1}]
    fn quintic(&self, j: usize, t: f64) -> [DVector<f64>; 3] {
        let (t0, t1) = (self.grid[j], self.grid[j + 1]);
        let h = t1 - t0;
        let w = quintic_weights((t - t0) / h);
        let data = [
            (&self.values[j], 1.0),
            (&self.derivs[j], h),
            (&self.seconds[j], h * h),
            (&self.seconds[j + 1], h * h),
            (&self.derivs[j + 1], h),
            (&self.values[j + 1], 1.0),
        ];
        let mut out = [DVector::zeros(self.values[j].len()), DVector::zeros(0), DVector::zeros(0)];
        out[1] = out[0].clone();
        out[2] = out[0].clone();
        for (k, o) in out.iter_mut().enumerate() {
            let scale = h.powi(-(k as i32));
            for (b, (y, f)) in data.iter().enumerate() {
                o.axpy(w[k][b] * f * scale, y, 1.0);
            }
        }
        out
    }

    fn eval_series(&self, t: f64) -> ProfileSample {
        let d = self.system.dim();
        if self.series.is_empty() {
            let n = self.space().n() as f64;
            let id = self.system.identity();
            return ProfileSample {
                value: &id * (self.leading_coeff * t.powf(1.0 - n)),
                deriv: &id * (self.leading_coeff * (1.0 - n) * t.powf(-n)),
            };
        }
        let mut value = DVector::zeros(d);
        let mut deriv = DVector::zeros(d);
        for s in &self.series {
            value += s.value(t);
            deriv += s.deriv(t);
        }
        ProfileSample { value, deriv }
    }

    fn eval_tail(&self, t: f64) -> ProfileSample {
        let last = self.grid.len() - 1;
        let t_max = self.t_max();
        let a = &self.values[last];
        let (value, deriv): (Vec<f64>, Vec<f64>) = match &self.tail {
            Tail::Exponential(k) => (0..a.len())
                .map(|i| {
                    let v = a[i] * (-k[i] * (t - t_max)).exp();
                    (v, -k[i] * v)
                })
                .unzip(),
            Tail::Power(p) => (0..a.len())
                .map(|i| {
                    let v = a[i] * (t / t_max).powf(-p[i]);
                    (v, -p[i] * v / t)
                })
                .unzip(),
        };
        ProfileSample { value: DVector::from_vec(value), deriv: DVector::from_vec(deriv) }
    }

    /// Relative residual of the radial equation at an interior radius.
    pub fn residual_at(&self, t: f64) -> f64 {
        let s = self.eval(t);
        self.system.residual(t, &s.value, &s.deriv, &self.second_interp(t))
    }

    /// Largest residual over `count` pseudo-random off-grid radii.
    pub fn probe_residual(&self, count: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.t_min().ln(), self.t_max().ln());
        (0..count)
            .map(|_| {
                let t = rng.gen_range(lo..hi).exp();
                self.residual_at(t)
            })
            .fold(0.0, f64::max)
    }

    /// `t^{n−1}(n−1) vol(S^n) A_i(t)` for each component.
    pub fn asymptotic_ratio(&self, t: f64) -> Vec<f64> {
        let n = self.space().n();
        let scale = t.powi(n as i32 - 1) * (n as f64 - 1.0) * unit_sphere_volume(n);
        self.eval(t).value.iter().map(|v| v * scale).collect()
    }

    /// Least-squares decay rate of `log‖A‖` over the last third of the grid:
    /// an exponential rate for hyperbolic spaces, a power for Euclidean ones.
    pub fn tail_decay_rate(&self) -> f64 {
        let start = self.grid.len() * 2 / 3;
        let euclid = self.space().kind() == SpaceKind::Euclidean;
        let pts: Vec<(f64, f64)> = (start..self.grid.len())
            .filter_map(|j| {
                let norm = self.values[j].amax();
                (norm > 0.0).then(|| (if euclid { self.grid[j].ln() } else { self.grid[j] }, norm.ln()))
            })
            .collect();
        let k = pts.len() as f64;
        if k < 2.0 {
            return 0.0;
        }
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / k, sy / k);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
        -num / den
    }

    /// The profile of degree `m − l` obtained by exchanging `α` and `β`.
    pub fn hodge_swap(&self) -> Result<Self> {
        let blocks = self.system.blocks().to_vec();
        if blocks.is_empty() {
            return Err(Error::Unsupported("Hodge swap needs the block layout".into()));
        }
        let m = self.space().dim();
        let target_degree = m - self.degree();
        let target = assemble_system(self.space(), target_degree)?;
        let swapped = |b: Block| match b {
            Block::Alpha => Block::Beta,
            Block::Beta => Block::Alpha,
        };
        let perm: Vec<usize> = target
            .blocks()
            .iter()
            .map(|&b| blocks.iter().position(|&o| o == swapped(b)).expect("complementary block"))
            .collect();
        let permute = |v: &DVector<f64>| DVector::from_iterator(perm.len(), perm.iter().map(|&i| v[i]));
        let series = self
            .series
            .iter()
            .map(|s| FrobeniusSeries { exponent: s.exponent, coeffs: s.coeffs.iter().map(permute).collect() })
            .collect();
        let mut out = Self::new(
            target,
            self.grid.clone(),
            self.values.iter().map(permute).collect(),
            self.derivs.iter().map(permute).collect(),
            series,
            self.leading_coeff,
        )?;
        out.diagnostics = self.diagnostics.clone();
        Ok(out)
    }

    pub fn to_document(&self) -> ProfileDocument {
        let col = |src: &[DVector<f64>], block: Block| -> Vec<f64> {
            self.block_index(block).map(|i| src.iter().map(|v| v[i]).collect()).unwrap_or_default()
        };
        let matrix = matches!(self.system.layout(), Layout::Matrix { .. });
        ProfileDocument {
            space: self.space().tag(),
            degree: self.degree(),
            grid: self.grid.clone(),
            alpha: col(&self.values, Block::Alpha),
            beta: col(&self.values, Block::Beta),
            alpha_prime: col(&self.derivs, Block::Alpha),
            beta_prime: col(&self.derivs, Block::Beta),
            leading_coeff: self.leading_coeff,
            t_min: self.t_min(),
            t_max: self.t_max(),
            matrix_size: match self.system.layout() {
                Layout::Matrix { size } => Some(*size),
                Layout::Block(_) => None,
            },
            values: if matrix { self.values.iter().map(|v| v.as_slice().to_vec()).collect() } else { Vec::new() },
            derivs: if matrix { self.derivs.iter().map(|v| v.as_slice().to_vec()).collect() } else { Vec::new() },
            series: self
                .series
                .iter()
                .map(|s| SeriesDocument {
                    exponent: s.exponent,
                    coeffs: s.coeffs.iter().map(|c| c.as_slice().to_vec()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ProfileDocument) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedProfile(msg.to_string());
        let space = ModelSpace::from_tag(&doc.space).map_err(|e| bad(&e.to_string()))?;
        if doc.degree > space.dim() {
            return Err(bad("degree exceeds dimension"));
        }
        let len = doc.grid.len();
        let (system, values, derivs) = match doc.matrix_size {
            Some(size) => {
                let system = assemble_matrix_system(&space, doc.degree)?;
                if system.dim() != size * size {
                    return Err(bad("matrix size does not match degree"));
                }
                if doc.values.len() != len || doc.derivs.len() != len {
                    return Err(bad("matrix samples do not match grid"));
                }
                let conv = |rows: &[Vec<f64>]| rows.iter().map(|r| DVector::from_column_slice(r)).collect::<Vec<_>>();
                (system, conv(&doc.values), conv(&doc.derivs))
            }
            None => {
                let system = assemble_system(&space, doc.degree)?;
                let blocks = block_layout(space.dim(), doc.degree);
                let pick = |b: Block, a: &[f64], bb: &[f64]| match b {
                    Block::Alpha => a.to_vec(),
                    Block::Beta => bb.to_vec(),
                };
                let vcols: Vec<Vec<f64>> = blocks.iter().map(|&b| pick(b, &doc.alpha, &doc.beta)).collect();
                let dcols: Vec<Vec<f64>> = blocks.iter().map(|&b| pick(b, &doc.alpha_prime, &doc.beta_prime)).collect();
                if vcols.iter().chain(&dcols).any(|c| c.len() != len) {
                    return Err(bad("component columns do not match grid length"));
                }
                let has_alpha = blocks.contains(&Block::Alpha);
                let has_beta = blocks.contains(&Block::Beta);
                if (!has_alpha && !(doc.alpha.is_empty() && doc.alpha_prime.is_empty()))
                    || (!has_beta && !(doc.beta.is_empty() && doc.beta_prime.is_empty()))
                {
                    return Err(bad("component present that the degree does not have"));
                }
                let rows = |cols: &[Vec<f64>]| {
                    (0..len).map(|j| DVector::from_iterator(cols.len(), cols.iter().map(|c| c[j]))).collect::<Vec<_>>()
                };
                (system, rows(&vcols), rows(&dcols))
            }
        };
        if len == 0 || doc.t_min != doc.grid[0] || doc.t_max != doc.grid[len - 1] {
            return Err(bad("t_min/t_max disagree with the grid"));
        }
        if !(doc.leading_coeff.is_finite() && doc.leading_coeff > 0.0) {
            return Err(bad("leading coefficient must be positive"));
        }
        let series = doc
            .series
            .iter()
            .map(|s| FrobeniusSeries {
                exponent: s.exponent,
                coeffs: s.coeffs.iter().map(|c| DVector::from_column_slice(c)).collect(),
            })
            .collect();
        Self::new(system, doc.grid.clone(), values, derivs, series, doc.leading_coeff)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("profile serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDocument = serde_json::from_str(text).map_err(|e| Error::MalformedProfile(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Cubic Hermite interpolant on `[t0, t1]`: value and derivative at `t`.
// Values, first and second derivatives (in s) of the quintic Hermite basis,
// ordered y0, y0', y0'', y1'', y1', y1.
fn quintic_weights(s: f64) -> [[f64; 6]; 3] {
    const P: [[f64; 6]; 6] = [
        [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
        [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
        [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
        [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
        [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
        [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    ];
    let mut out = [[0.0; 6]; 3];
    for (b, c) in P.iter().enumerate() {
        for k in 0..3 {
            let mut acc = 0.0;
            for p in (k..6).rev() {
                let falling: f64 = (0..k).map(|i| (p - i) as f64).product();
                acc = acc * s + c[p] * falling;
            }
            out[k][b] = acc;
        }
    }
    out
}

/// Serialized form of a Frobenius series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDocument {
    pub exponent: f64,
    pub coeffs: Vec<Vec<f64>>,
}

/// JSON document of a profile. Block profiles fill `alpha`/`beta` (a
/// component absent in the degree is an empty array); matrix profiles set
/// `matrix_size` and fill `values`/`derivs` with row-major entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub space: String,
    pub degree: usize,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub alpha_prime: Vec<f64>,
    #[serde(default)]
    pub beta_prime: Vec<f64>,
    pub leading_coeff: f64,
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derivs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesDocument>,
}
