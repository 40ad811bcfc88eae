//! Wedge-monomial bases of exterior powers and the operators acting on them.
//!
//! Frame indices run over `0..dim`, with index 0 standing for the radial
//! direction `T` and `1..dim` for `m_1, …, m_n`. A basis of `Λ^l` is the list
//! of strictly increasing index tuples of length `l` in lexicographic order.
//! Every matrix in this crate is written in this basis, columns indexing the
//! input monomial and rows the output monomial.

use nalgebra::DMatrix;

/// Lexicographically ordered wedge monomials of a fixed degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExteriorBasis {
    dim: usize,
    degree: usize,
    monomials: Vec<Vec<usize>>,
}

impl ExteriorBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut monomials = Vec::new();
        if degree <= dim {
            let mut current = Vec::with_capacity(degree);
            push_combinations(0, dim, degree, &mut current, &mut monomials);
        }
        Self { dim, degree, monomials }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<usize>] {
        &self.monomials
    }

    pub fn index_of(&self, monomial: &[usize]) -> Option<usize> {
        self.monomials.binary_search_by(|m| m.as_slice().cmp(monomial)).ok()
    }

    /// True when the monomial contains the radial direction `T`.
    pub fn contains_radial(&self, idx: usize) -> bool {
        self.monomials[idx].first() == Some(&0)
    }
}

fn push_combinations(
    start: usize,
    dim: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for i in start..=dim - remaining {
        current.push(i);
        push_combinations(i + 1, dim, remaining - 1, current, out);
        current.pop();
    }
}

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Sorts an index list, returning the permutation sign, or `None` on a repeat.
pub fn sort_with_sign(indices: &[usize]) -> Option<(f64, Vec<usize>)> {
    let mut v = indices.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((sign, v))
    }
}

/// Matrix of `e_a ∧ ·` from `Λ^degree` to `Λ^{degree+1}`.
pub fn wedge_matrix(dim: usize, degree: usize, a: usize) -> DMatrix<f64> {
    let src = ExteriorBasis::new(dim, degree);
    let dst = ExteriorBasis::new(dim, degree + 1);
    let mut out = DMatrix::zeros(dst.len(), src.len());
    for (col, mono) in src.monomials().iter().enumerate() {
        if mono.contains(&a) {
            continue;
        }
        let mut idx = Vec::with_capacity(mono.len() + 1);
        idx.push(a);
        idx.extend_from_slice(mono);
        if let Some((sign, sorted)) = sort_with_sign(&idx) {
            let row = dst.index_of(&sorted).expect("monomial in basis");
            out[(row, col)] = sign;
        }
    }
    out
}

/// Matrix of the contraction `e_a ⌐ ·` from `Λ^degree` to `Λ^{degree-1}`.
///
/// For an orthonormal frame this is the transpose of [`wedge_matrix`].
pub fn contraction_matrix(dim: usize, degree: usize, a: usize) -> DMatrix<f64> {
    assert!(degree >= 1, "contraction needs positive degree");
    wedge_matrix(dim, degree - 1, a).transpose()
}

/// Extends a linear map of `Λ^1` (given by `g`, columns = images) to `Λ^degree`
/// as a derivation.
pub fn derivation_matrix(g: &DMatrix<f64>, degree: usize) -> DMatrix<f64> {
    let dim = g.nrows();
    let basis = ExteriorBasis::new(dim, degree);
    let mut out = DMatrix::zeros(basis.len(), basis.len());
    for (col, mono) in basis.monomials().iter().enumerate() {
        for p in 0..mono.len() {
            for r in 0..dim {
                let coeff = g[(r, mono[p])];
                if coeff == 0.0 {
                    continue;
                }
                let mut idx = mono.clone();
                idx[p] = r;
                if let Some((sign, sorted)) = sort_with_sign(&idx) {
                    let row = basis.index_of(&sorted).expect("monomial in basis");
                    out[(row, col)] += sign * coeff;
                }
            }
        }
    }
    out
}

/// Matrix of `ad_{k_i}` on `Λ^degree`: `T ↦ m_i`, `m_i ↦ −T`, `m_j ↦ 0`
/// for `j ≠ i`, extended as a derivation. Axis `i` runs over `1..dim`.
pub fn ad_matrix(dim: usize, degree: usize, i: usize) -> DMatrix<f64> {
    assert!(i >= 1 && i < dim, "axis index out of range");
    let mut g = DMatrix::zeros(dim, dim);
    g[(i, 0)] = 1.0;
    g[(0, i)] = -1.0;
    derivation_matrix(&g, degree)
}

/// Induced action `Λ^degree R` of a linear map `R` of `Λ^1` (matrix of minors).
pub fn induced_matrix(r: &DMatrix<f64>, degree: usize) -> DMatrix<f64> {
    let dim = r.nrows();
    let basis = ExteriorBasis::new(dim, degree);
    let n = basis.len();
    let mut out = DMatrix::zeros(n, n);
    if degree == 0 {
        out[(0, 0)] = 1.0;
        return out;
    }
    for (row, ri) in basis.monomials().iter().enumerate() {
        for (col, cj) in basis.monomials().iter().enumerate() {
            let sub = DMatrix::from_fn(degree, degree, |a, b| r[(ri[a], cj[b])]);
            out[(row, col)] = sub.determinant();
        }
    }
    out
}

/// Coefficient of `e_0 ∧ … ∧ e_{dim-1}` in `a ∧ b`, with `a ∈ Λ^{deg_a}` and
/// `b ∈ Λ^{dim - deg_a}` given in monomial coordinates.
pub fn top_pairing(dim: usize, deg_a: usize, a: &[f64], b: &[f64]) -> f64 {
    let ba = ExteriorBasis::new(dim, deg_a);
    let bb = ExteriorBasis::new(dim, dim - deg_a);
    let mut total = 0.0;
    for (i, mi) in ba.monomials().iter().enumerate() {
        if a[i] == 0.0 {
            continue;
        }
        for (j, mj) in bb.monomials().iter().enumerate() {
            let mut idx = mi.clone();
            idx.extend_from_slice(mj);
            if let Some((sign, _)) = sort_with_sign(&idx) {
                total += sign * a[i] * b[j];
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(basis: &ExteriorBasis, m: &[usize]) -> usize {
        basis.index_of(m).unwrap()
    }

    #[test]
    fn basis_is_lexicographic() {
        let b = ExteriorBasis::new(4, 2);
        assert_eq!(
            b.monomials(),
            &[
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(ExteriorBasis::new(3, 0).len(), 1);
        assert_eq!(ExteriorBasis::new(3, 3).len(), 1);
        assert_eq!(binomial(5, 2), 10);
    }

    #[test]
    fn ad_on_vectors() {
        let ad = ad_matrix(3, 1, 1);
        // columns are images of T, m1, m2
        assert_eq!(ad.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(ad.column(1).as_slice(), &[-1.0, 0.0, 0.0]);
        assert_eq!(ad.column(2).as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn ad_on_two_vectors() {
        let b = ExteriorBasis::new(3, 2);
        let ad = ad_matrix(3, 2, 1);
        let t_m1 = mono(&b, &[0, 1]);
        let t_m2 = mono(&b, &[0, 2]);
        let m1_m2 = mono(&b, &[1, 2]);
        assert_eq!(ad[(m1_m2, t_m2)], 1.0);
        assert_eq!(ad[(t_m2, m1_m2)], -1.0);
        assert_eq!(ad.column(t_m1).iter().map(|v| v.abs()).sum::<f64>(), 0.0);
    }

    #[test]
    fn ad_is_antisymmetric_and_preserves_degree() {
        for dim in 2..=5 {
            for degree in 0..=dim {
                for i in 1..dim {
                    let ad = ad_matrix(dim, degree, i);
                    let n = binomial(dim, degree);
                    assert_eq!(ad.shape(), (n, n));
                    assert!((&ad + ad.transpose()).amax() == 0.0);
                }
            }
        }
    }

    #[test]
    fn contraction_is_wedge_adjoint_and_nilpotent() {
        for dim in 2..=4 {
            for degree in 0..dim {
                for a in 0..dim {
                    let w = wedge_matrix(dim, degree, a);
                    if degree + 2 <= dim {
                        let ww = wedge_matrix(dim, degree + 1, a) * &w;
                        assert_eq!(ww.amax(), 0.0);
                    }
                    let c = contraction_matrix(dim, degree + 1, a);
                    assert_eq!(c, w.transpose());
                }
            }
        }
    }

    #[test]
    fn induced_matrix_of_rotation_is_orthogonal() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        for degree in 0..=3 {
            let lr = induced_matrix(&r, degree);
            let id = &lr * lr.transpose();
            let n = id.nrows();
            assert!((id - DMatrix::identity(n, n)).amax() < 1e-15);
        }
        assert!((induced_matrix(&r, 3)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn top_pairing_signs() {
        // e1 ∧ (e0 ∧ e2) = −e0 ∧ e1 ∧ e2
        let b2 = ExteriorBasis::new(3, 2);
        let mut two = vec![0.0; 3];
        two[mono(&b2, &[0, 2])] = 1.0;
        assert_eq!(top_pairing(3, 1, &[0.0, 1.0, 0.0], &two), -1.0);
        assert_eq!(top_pairing(3, 1, &[0.0, 0.0, 1.0], &two), 0.0);
    }
}
