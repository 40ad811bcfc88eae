//! The radial equation `A'' + h A' = L(t) A` for `A ∈ Hom(Λ^l, Λ^l)`.
//!
//! `L(t) A = 𝓡 A − Σ_i (λ_i²/sinh²(λ_i t)) (ad_i² A − 2 cosh(λ_i t) ad_i A ad_i + cosh²(λ_i t) A ad_i²)`.
//!
//! Two layouts are supported. The block layout stores the scalars `α` (on
//! monomials containing `T`) and `β` (on the others) of a space form; the
//! matrix layout stores all `N²` entries of `A` row-major and is driven
//! directly by the ad matrices.

use nalgebra::{DMatrix, DVector};

use super::series::AxisSeries;
use crate::error::{Error, Result};
use crate::spaceform::exterior::{binomial, ExteriorBasis};
use crate::spaceform::ModelSpace;

/// Scalar blocks of a block-layout profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    /// Coefficient on `T ∧ Λ^{l-1}𝔪_0`.
    Alpha,
    /// Coefficient on `Λ^l 𝔪_0`.
    Beta,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    Block(Vec<Block>),
    Matrix { size: usize },
}

#[derive(Clone, Debug)]
pub struct RadialSystem {
    space: ModelSpace,
    degree: usize,
    layout: Layout,
    curvature: f64,
    ad: Vec<DMatrix<f64>>,
    // row-major operators (ad_i² ·, ad_i · ad_i, · ad_i²) for the matrix layout
    matrix_ops: Vec<[DMatrix<f64>; 3]>,
}

/// Blocks present in degree `l` of an `m`-dimensional space.
pub fn block_layout(m: usize, l: usize) -> Vec<Block> {
    match l {
        0 => vec![Block::Beta],
        _ if l == m => vec![Block::Alpha],
        _ => vec![Block::Alpha, Block::Beta],
    }
}

/// Block-layout system of a space form.
pub fn assemble_system(space: &ModelSpace, l: usize) -> Result<RadialSystem> {
    check_degree(space, l)?;
    if !space.is_space_form() {
        return Err(Error::Unsupported("block layout needs equal Jacobi eigenvalues".into()));
    }
    Ok(RadialSystem {
        space: space.clone(),
        degree: l,
        layout: Layout::Block(block_layout(space.dim(), l)),
        curvature: space.curvature_operator(l)?,
        ad: ad_list(space, l)?,
        matrix_ops: Vec::new(),
    })
}

/// Matrix-layout system on `Hom(Λ^l, Λ^l)`.
pub fn assemble_matrix_system(space: &ModelSpace, l: usize) -> Result<RadialSystem> {
    check_degree(space, l)?;
    let ad = ad_list(space, l)?;
    let size = binomial(space.dim(), l);
    let id = DMatrix::<f64>::identity(size, size);
    let matrix_ops = ad
        .iter()
        .map(|a| {
            let a2 = a * a;
            [a2.kronecker(&id), a.kronecker(&a.transpose()), id.kronecker(&a2.transpose())]
        })
        .collect();
    Ok(RadialSystem {
        space: space.clone(),
        degree: l,
        layout: Layout::Matrix { size },
        curvature: space.curvature_operator(l)?,
        ad,
        matrix_ops,
    })
}

fn check_degree(space: &ModelSpace, l: usize) -> Result<()> {
    if l > space.dim() {
        return Err(Error::InvalidArgument(format!("degree {l} exceeds dimension {}", space.dim())));
    }
    Ok(())
}

fn ad_list(space: &ModelSpace, l: usize) -> Result<Vec<DMatrix<f64>>> {
    (1..=space.n()).map(|i| space.ad_action(i, l)).collect()
}

/// Per-axis factors `(λ²/sinh², λ² cosh/sinh², λ² cosh²/sinh²)` at `t`.
fn axis_factors(lambda: f64, t: f64) -> (f64, f64, f64) {
    if lambda == 0.0 {
        let f = 1.0 / (t * t);
        (f, f, f)
    } else {
        let x = lambda * t;
        let q = lambda / x.sinh();
        let f = q * q;
        let e = lambda / x.tanh();
        (f, f * x.cosh(), e * e)
    }
}

impl RadialSystem {
    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// `k = m − l`.
    pub fn codegree(&self) -> usize {
        self.space.dim() - self.degree
    }

    /// Number of scalar unknowns.
    pub fn dim(&self) -> usize {
        match &self.layout {
            Layout::Block(blocks) => blocks.len(),
            Layout::Matrix { size } => size * size,
        }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn ad_matrices(&self) -> &[DMatrix<f64>] {
        &self.ad
    }

    pub fn is_block(&self) -> bool {
        matches!(self.layout, Layout::Block(_))
    }

    pub fn blocks(&self) -> &[Block] {
        match &self.layout {
            Layout::Block(b) => b,
            Layout::Matrix { .. } => &[],
        }
    }

    /// The identity of `Hom(Λ^l, Λ^l)` in this layout.
    pub fn identity(&self) -> DVector<f64> {
        match &self.layout {
            Layout::Block(b) => DVector::from_element(b.len(), 1.0),
            Layout::Matrix { size } => DVector::from_fn(size * size, |r, _| if r / size == r % size { 1.0 } else { 0.0 }),
        }
    }

    /// Embeds a block-layout vector as a full `N × N` matrix (row-major).
    pub fn block_to_matrix(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let basis = ExteriorBasis::new(self.space.dim(), self.degree);
        let blocks = block_layout(self.space.dim(), self.degree);
        DMatrix::from_fn(basis.len(), basis.len(), |r, c| {
            if r != c {
                return 0.0;
            }
            let want = if basis.contains_radial(r) { Block::Alpha } else { Block::Beta };
            blocks.iter().position(|&b| b == want).map(|i| v[i]).unwrap_or(0.0)
        })
    }

    pub fn mean_curvature(&self, t: f64) -> f64 {
        self.space.mean_curvature(t).expect("positive radius")
    }

    /// `L(t)` such that `A'' + h(t) A' = L(t) A`.
    pub fn coefficient_matrix(&self, t: f64) -> DMatrix<f64> {
        match &self.layout {
            Layout::Block(blocks) => {
                let (f, g, e) = axis_factors(self.space.lambda(), t);
                self.block_matrix(blocks, self.curvature, f + e, g)
            }
            Layout::Matrix { size } => {
                let d = size * size;
                let mut out = DMatrix::identity(d, d) * self.curvature;
                for (ops, &lambda) in self.matrix_ops.iter().zip(self.space.jacobi_eigenvalues()) {
                    let (f, g, e) = axis_factors(lambda, t);
                    out -= &ops[0] * f - &ops[1] * (2.0 * g) + &ops[2] * e;
                }
                out
            }
        }
    }

    // rows: α'' + hα' = (c + k(f+e))α − 2kg β,  β'' + hβ' = (c + l(f+e))β − 2lg α
    fn block_matrix(&self, blocks: &[Block], c: f64, fe: f64, g: f64) -> DMatrix<f64> {
        let k = self.codegree() as f64;
        let l = self.degree as f64;
        let mut out = DMatrix::zeros(blocks.len(), blocks.len());
        for (i, bi) in blocks.iter().enumerate() {
            for (j, bj) in blocks.iter().enumerate() {
                out[(i, j)] = match (bi, bj) {
                    (Block::Alpha, Block::Alpha) => c + k * fe,
                    (Block::Beta, Block::Beta) => c + l * fe,
                    (Block::Alpha, Block::Beta) => -2.0 * k * g,
                    (Block::Beta, Block::Alpha) => -2.0 * l * g,
                };
            }
        }
        out
    }

    /// Expansion coefficients at `t = 0`: `t h(t) = Σ_j h_j t^{2j}` and
    /// `t² L(t) = Σ_j L_j t^{2j}`, for `j < len`.
    pub fn expansion(&self, len: usize) -> (Vec<f64>, Vec<DMatrix<f64>>) {
        let axis = AxisSeries::new(len);
        let lambdas = self.space.jacobi_eigenvalues();
        let pow = |lambda: f64, j: usize| if j == 0 { 1.0 } else { (lambda * lambda).powi(j as i32) };
        let h: Vec<f64> = (0..len)
            .map(|j| lambdas.iter().map(|&lm| axis.x_coth.coeff(j) * pow(lm, j)).sum())
            .collect();
        let curv = |j: usize| if j == 1 { self.curvature } else { 0.0 };
        let mats = (0..len)
            .map(|j| match &self.layout {
                Layout::Block(blocks) => {
                    let p = pow(self.space.lambda(), j);
                    let fe = (axis.inv_sinh2.coeff(j) + axis.cosh2_inv_sinh2.coeff(j)) * p;
                    self.block_matrix(blocks, curv(j), fe, axis.cosh_inv_sinh2.coeff(j) * p)
                }
                Layout::Matrix { size } => {
                    let d = size * size;
                    let mut out = DMatrix::identity(d, d) * curv(j);
                    for (ops, &lambda) in self.matrix_ops.iter().zip(lambdas) {
                        let p = pow(lambda, j);
                        out -= (&ops[0] * axis.inv_sinh2.coeff(j) - &ops[1] * (2.0 * axis.cosh_inv_sinh2.coeff(j))
                            + &ops[2] * axis.cosh2_inv_sinh2.coeff(j))
                            * p;
                    }
                    out
                }
            })
            .collect();
        (h, mats)
    }

    /// Right-hand side of the first-order form `y = (A, A')`.
    pub fn rhs(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let a = y.rows(0, d);
        let da = y.rows(d, d);
        let dda = self.coefficient_matrix(t) * a - da * self.mean_curvature(t);
        let mut out = DVector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(&da);
        out.rows_mut(d, d).copy_from(&dda);
        out
    }

    /// First-order system matrix `[[0, I], [L(t), −h(t) I]]`.
    pub fn first_order_matrix(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, d), (d, d)).fill_with_identity();
        m.view_mut((d, 0), (d, d)).copy_from(&self.coefficient_matrix(t));
        let h = self.mean_curvature(t);
        for i in 0..d {
            m[(d + i, d + i)] = -h;
        }
        m
    }

    /// Relative residual of `A'' + hA' − L A` at `t`.
    pub fn residual(&self, t: f64, a: &DVector<f64>, da: &DVector<f64>, dda: &DVector<f64>) -> f64 {
        let l = self.coefficient_matrix(t);
        let h = self.mean_curvature(t);
        let la = &l * a;
        let r = dda + da * h - &la;
        let scale: f64 = (0..a.len())
            .map(|i| dda[i].abs() + (h * da[i]).abs() + (0..a.len()).map(|j| (l[(i, j)] * a[j]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            r.amax()
        } else {
            r.amax() / scale
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn h3_oneform_coefficients() {
        let sys = assemble_system(&ModelSpace::hyperbolic(3).unwrap(), 1).unwrap();
        let t = 0.7f64;
        let (s, c) = (t.sinh(), t.cosh());
        let l = sys.coefficient_matrix(t);
        assert_relative_eq!(l[(0, 0)], -2.0 + 2.0 * (1.0 + c * c) / (s * s), max_relative = 1e-14);
        assert_relative_eq!(l[(0, 1)], -4.0 * c / (s * s), max_relative = 1e-14);
        assert_relative_eq!(l[(1, 1)], -2.0 + (1.0 + c * c) / (s * s), max_relative = 1e-14);
        assert_relative_eq!(l[(1, 0)], -2.0 * c / (s * s), max_relative = 1e-14);
    }

    #[test]
    fn euclidean_coefficients() {
        let sys = assemble_system(&ModelSpace::euclidean(4).unwrap(), 1).unwrap();
        let t = 1.3;
        let l = sys.coefficient_matrix(t);
        let (k, ll) = (3.0, 1.0);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 * k, -2.0 * k, -2.0 * ll, 2.0 * ll]) / (t * t);
        assert!((l - expected).amax() < 1e-14);
    }

    #[test]
    fn scalar_degrees_have_no_potential() {
        let h3 = ModelSpace::hyperbolic(3).unwrap();
        for l in [0, 3] {
            let sys = assemble_system(&h3, l).unwrap();
            assert_eq!(sys.dim(), 1);
            assert_eq!(sys.coefficient_matrix(0.4).amax(), 0.0);
        }
        assert_eq!(assemble_system(&h3, 0).unwrap().blocks(), &[Block::Beta]);
        assert_eq!(assemble_system(&h3, 3).unwrap().blocks(), &[Block::Alpha]);
        assert!(assemble_system(&h3, 4).is_err());
    }

    #[test]
    fn matrix_layout_agrees_with_blocks_on_diagonal_embedding() {
        for space in [
            ModelSpace::hyperbolic(3).unwrap(),
            ModelSpace::hyperbolic(4).unwrap(),
            ModelSpace::euclidean(4).unwrap(),
            ModelSpace::hyperbolic(5).unwrap(),
        ] {
            for l in 0..=space.dim() {
                let block = assemble_system(&space, l).unwrap();
                let full = assemble_matrix_system(&space, l).unwrap();
                let v = DVector::from_fn(block.dim(), |i, _| 0.3 + 1.7 * i as f64);
                let embedded = block.block_to_matrix(&v);
                let size = embedded.nrows();
                let vec_full = DVector::from_fn(size * size, |r, _| embedded[(r / size, r % size)]);
                for t in [0.2, 1.0, 3.0] {
                    let lb = block.block_to_matrix(&(block.coefficient_matrix(t) * &v));
                    let lf = full.coefficient_matrix(t) * &vec_full;
                    let lf = DMatrix::from_fn(size, size, |r, c| lf[r * size + c]);
                    assert!((lb - lf).amax() < 1e-12, "{} l={l} t={t}", space.tag());
                }
            }
        }
    }

    #[test]
    fn expansion_matches_coefficients() {
        for (space, l) in [
            (ModelSpace::hyperbolic(3).unwrap(), 1),
            (ModelSpace::hyperbolic(5).unwrap(), 2),
        ] {
            for sys in [assemble_system(&space, l).unwrap(), assemble_matrix_system(&space, l).unwrap()] {
                let (h, mats) = sys.expansion(10);
                let t = 0.05f64;
                let th: f64 = h.iter().enumerate().map(|(j, c)| c * t.powi(2 * j as i32)).sum();
                assert_relative_eq!(th, t * sys.mean_curvature(t), max_relative = 1e-14);
                let mut t2l = DMatrix::zeros(sys.dim(), sys.dim());
                for (j, m) in mats.iter().enumerate() {
                    t2l += m * t.powi(2 * j as i32);
                }
                assert!((t2l - sys.coefficient_matrix(t) * (t * t)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_symmetry_of_blocks() {
        let h5 = ModelSpace::hyperbolic(5).unwrap();
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        for l in 1..5 {
            let a = assemble_system(&h5, l).unwrap().coefficient_matrix(0.9);
            let b = assemble_system(&h5, 5 - l).unwrap().coefficient_matrix(0.9);
            assert!((&p * a * &p - b).amax() < 1e-14);
        }
    }
}
