//! Complex linear-algebra kernel.
//!
//! Every routine here uses column-major, first-index-fastest element order:
//! `vec(A)` stacks columns, a Kronecker product `A ⊗ B` has the `B` index
//! varying fastest in both compound indices, and the mode-3 unfolding of a
//! third-order tensor puts frame `l` in row `l` with the first mode fastest.
//! With these conventions `vec(H W Gᵀ) = (G ⊗ H) vec(W)`, which is the
//! identity the measurement model relies on.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, column-major.
pub type CMatrix = Mat<Complex64>;

/// Singular values below `ZERO_SV_RTOL * s_max` are treated as zero.
pub const ZERO_SV_RTOL: f64 = 1e-12;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense third-order complex tensor with dims `(d1, d2, d3)`, first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl CTensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: [d1, d2, d3],
            data: vec![ZERO; d1 * d2 * d3],
        }
    }

    pub fn from_fn(
        d1: usize,
        d2: usize,
        d3: usize,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for k in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: [d1, d2, d3],
            data,
        }
    }

    /// Rebuilds a tensor from its mode-3 unfolding (inverse of [`mode3_unfold`]).
    pub fn fold_mode3(unfolded: &CMatrix, d1: usize, d2: usize) -> Result<Self> {
        if unfolded.ncols() != d1 * d2 {
            return Err(Error::invalid(format!(
                "mode-3 fold: {} columns cannot be split as {d1}x{d2}",
                unfolded.ncols()
            )));
        }
        let d3 = unfolded.nrows();
        Ok(Self::from_fn(d1, d2, d3, |i, j, k| unfolded[(k, i + j * d1)]))
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: Complex64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    /// Entries in storage order (first index fastest).
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Frontal slice `t(:, :, k)` as a `d1 × d2` matrix.
    pub fn slice3(&self, k: usize) -> CMatrix {
        CMatrix::from_fn(self.dims[0], self.dims[1], |i, j| self.get(i, j, k))
    }

    pub fn set_slice3(&mut self, k: usize, slice: &CMatrix) {
        assert_eq!((slice.nrows(), slice.ncols()), (self.dims[0], self.dims[1]));
        for j in 0..self.dims[1] {
            for i in 0..self.dims[0] {
                self.set(i, j, k, slice[(i, j)]);
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (br, bc) = (b.nrows(), b.ncols());
    CMatrix::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Block Kronecker product: splits the columns of `a` and `b` into `groups`
/// consecutive blocks and concatenates `[a_1 ⊗ b_1, …, a_q ⊗ b_q]`.
pub fn block_kron(a: &CMatrix, b: &CMatrix, groups: usize) -> Result<CMatrix> {
    if groups == 0 || !a.ncols().is_multiple_of(groups) || !b.ncols().is_multiple_of(groups) {
        return Err(Error::invalid(format!(
            "block_kron: column counts {} and {} not divisible by {groups}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (wa, wb) = (a.ncols() / groups, b.ncols() / groups);
    let br = b.nrows();
    let block_cols = wa * wb;
    Ok(CMatrix::from_fn(a.nrows() * br, groups * block_cols, |i, j| {
        let (q, jj) = (j / block_cols, j % block_cols);
        a[(i / br, q * wa + jj / wb)] * b[(i % br, q * wb + jj % wb)]
    }))
}

/// Columnwise Khatri-Rao product: column `k` is `a(:,k) ⊗ b(:,k)`.
pub fn khatri_rao_cols(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "khatri_rao_cols: column counts differ ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    let br = b.nrows();
    Ok(CMatrix::from_fn(a.nrows() * br, a.ncols(), |i, k| {
        a[(i / br, k)] * b[(i % br, k)]
    }))
}

/// Mode-3 unfolding: a `d3 × (d1·d2)` matrix whose row `l` is the slice
/// `t(:,:,l)` vectorized with column index `i1 + i2·d1`.
pub fn mode3_unfold(t: &CTensor3) -> CMatrix {
    let (d1, d2, d3) = t.dims();
    let plane = d1 * d2;
    CMatrix::from_fn(d3, plane, |l, j| t.data[j + l * plane])
}

/// Column-major vectorization as an `(r·c) × 1` matrix.
pub fn vec(m: &CMatrix) -> CMatrix {
    let r = m.nrows();
    CMatrix::from_fn(r * m.ncols(), 1, |i, _| m[(i % r, i / r)])
}

/// Inverse of [`vec`] for a column vector of length `rows·cols`.
pub fn unvec(v: &[Complex64], rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| v[i + j * rows])
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        acc += m.col_as_slice(j).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    acc
}

pub fn is_finite(m: &CMatrix) -> bool {
    (0..m.ncols()).all(|j| {
        m.col_as_slice(j)
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    })
}

/// Selects columns `idx` of `m`, in the given order.
pub fn select_cols(m: &CMatrix, idx: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), idx.len());
    for (c, &j) in idx.iter().enumerate() {
        out.col_as_slice_mut(c).copy_from_slice(m.col_as_slice(j));
    }
    out
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    CMatrix::from_fn(entries.len(), entries.len(), |i, j| {
        if i == j {
            entries[i]
        } else {
            ZERO
        }
    })
}

/// Hermitian inner product `xᴴ y`.
#[inline]
pub fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sq(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Singular value decomposition `m = U diag(s) Vᴴ`, `s` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    /// Number of singular values above `ZERO_SV_RTOL · s_max`.
    pub fn rank(&self) -> usize {
        let cutoff = self.s.first().copied().unwrap_or(0.0) * ZERO_SV_RTOL;
        self.s.iter().filter(|&&x| x > cutoff && x > 0.0).count()
    }
}

fn wrap_svd(m: &CMatrix, s: faer::linalg::solvers::Svd<Complex64>) -> Result<Svd> {
    let s_vals: Vec<f64> = s.S().column_vector().iter().map(|z| z.re).collect();
    let out = Svd {
        u: s.U().to_owned(),
        s: s_vals,
        v: s.V().to_owned(),
    };
    if !is_finite(&out.u) || !is_finite(&out.v) || out.s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "svd of {}x{} produced non-finite factors",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(out)
}

/// Thin SVD: `U` is `r × min(r,c)`, `V` is `c × min(r,c)`.
pub fn svd(m: &CMatrix) -> Result<Svd> {
    if !is_finite(m) {
        return Err(Error::NumericFailure("svd input has non-finite entries".into()));
    }
    let s = m
        .thin_svd()
        .map_err(|e| Error::NumericFailure(format!("svd did not converge: {e:?}")))?;
    wrap_svd(m, s)
}

/// Full SVD: `U` is `r × r` and `V` is `c × c`.
pub fn svd_full(m: &CMatrix) -> Result<Svd> {
    if !is_finite(m) {
        return Err(Error::NumericFailure("svd input has non-finite entries".into()));
    }
    let s = m
        .svd()
        .map_err(|e| Error::NumericFailure(format!("svd did not converge: {e:?}")))?;
    wrap_svd(m, s)
}

/// Minimum-norm least-squares solution of `a x = b` via the pseudoinverse.
pub fn ls_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "ls_solve: row counts differ ({} vs {})",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    let dec = svd(a)?;
    let r = dec.rank();
    let mut x = CMatrix::zeros(a.ncols(), b.ncols());
    if r == 0 {
        return Ok(x);
    }
    // x = V_r diag(1/s_r) U_rᴴ b
    let mut ub = dec.u.as_ref().subcols(0, r).adjoint() * b;
    for i in 0..r {
        let inv = 1.0 / dec.s[i];
        for j in 0..ub.ncols() {
            ub[(i, j)] *= inv;
        }
    }
    x.copy_from(dec.v.as_ref().subcols(0, r) * &ub);
    Ok(x)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
        let d = a - b;
        (frobenius_sq(&d) / frobenius_sq(b).max(f64::MIN_POSITIVE)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_identity_and_scalar() {
        let i2 = CMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4, 4));

        let mut r = rng(1);
        let b = random_matrix(&mut r, 3, 2);
        let two = CMatrix::from_fn(1, 1, |_, _| c(2.0, 0.0));
        let got = kron(&two, &b);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(got[(i, j)], b[(i, j)] * 2.0);
            }
        }
    }

    #[test]
    fn kron_matches_index_formula() {
        let mut r = rng(2);
        let a = random_matrix(&mut r, 2, 3);
        let b = random_matrix(&mut r, 3, 2);
        let k = kron(&a, &b);
        assert_eq!((k.nrows(), k.ncols()), (6, 6));
        for ia in 0..2 {
            for ja in 0..3 {
                for ib in 0..3 {
                    for jb in 0..2 {
                        assert_eq!(k[(ia * 3 + ib, ja * 2 + jb)], a[(ia, ja)] * b[(ib, jb)]);
                    }
                }
            }
        }
    }

    #[test]
    fn block_kron_degenerate_groupings() {
        let mut r = rng(3);
        let a = random_matrix(&mut r, 2, 4);
        let b = random_matrix(&mut r, 3, 4);
        assert_eq!(block_kron(&a, &b, 1).unwrap(), kron(&a, &b));
        assert_eq!(block_kron(&a, &b, 4).unwrap(), khatri_rao_cols(&a, &b).unwrap());
    }

    #[test]
    fn block_kron_matches_block_loop() {
        let mut r = rng(4);
        let a = random_matrix(&mut r, 2, 4);
        let b = random_matrix(&mut r, 3, 4);
        let got = block_kron(&a, &b, 2).unwrap();
        // Oracle: slice blocks explicitly and concatenate.
        let mut blocks = Vec::new();
        for q in 0..2 {
            let aq = a.as_ref().subcols(2 * q, 2).to_owned();
            let bq = b.as_ref().subcols(2 * q, 2).to_owned();
            blocks.push(kron(&aq, &bq));
        }
        assert_eq!((got.nrows(), got.ncols()), (6, 8));
        for (q, blk) in blocks.iter().enumerate() {
            for i in 0..6 {
                for j in 0..4 {
                    assert_eq!(got[(i, q * 4 + j)], blk[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn block_kron_rejects_indivisible() {
        let a = CMatrix::zeros(2, 3);
        let b = CMatrix::zeros(2, 4);
        assert!(matches!(block_kron(&a, &b, 2), Err(Error::InvalidArgument(_))));
        assert!(block_kron(&a, &b, 0).is_err());
    }

    #[test]
    fn khatri_rao_basics() {
        let mut r = rng(5);
        let a = random_matrix(&mut r, 3, 1);
        let b = random_matrix(&mut r, 2, 1);
        assert_eq!(khatri_rao_cols(&a, &b).unwrap(), kron(&a, &b));

        let i2 = CMatrix::identity(2, 2);
        let kr = khatri_rao_cols(&i2, &i2).unwrap();
        let expected = CMatrix::from_fn(4, 2, |i, j| if i == 3 * j { ONE } else { ZERO });
        assert_eq!(kr, expected);

        let a = random_matrix(&mut r, 3, 4);
        let b = random_matrix(&mut r, 3, 4);
        assert_eq!(khatri_rao_cols(&a, &b).unwrap(), block_kron(&a, &b, 4).unwrap());
        assert!(khatri_rao_cols(&a, &random_matrix(&mut r, 3, 3)).is_err());
    }

    #[test]
    fn mode3_unfold_cases() {
        let t = CTensor3::from_fn(1, 1, 3, |_, _, k| c(k as f64, 1.0));
        let u = mode3_unfold(&t);
        assert_eq!((u.nrows(), u.ncols()), (3, 1));
        for k in 0..3 {
            assert_eq!(u[(k, 0)], c(k as f64, 1.0));
        }

        let (d1, d2, d3) = (2, 3, 4);
        let mut t = CTensor3::zeros(d1, d2, d3);
        t.set(0, 1, 2, ONE);
        let u = mode3_unfold(&t);
        for l in 0..d3 {
            for j in 0..d1 * d2 {
                let want = if (l, j) == (2, d1) { ONE } else { ZERO };
                assert_eq!(u[(l, j)], want);
            }
        }

        let mut r = rng(6);
        let t = CTensor3::from_fn(d1, d2, d3, |_, _, _| {
            c(r.random::<f64>(), r.random::<f64>())
        });
        let u = mode3_unfold(&t);
        for i1 in 0..d1 {
            for i2 in 0..d2 {
                for i3 in 0..d3 {
                    assert_eq!(u[(i3, i1 + i2 * d1)], t.get(i1, i2, i3));
                }
            }
        }
        assert_eq!(CTensor3::fold_mode3(&u, d1, d2).unwrap(), t);
        assert!(CTensor3::fold_mode3(&u, 5, 1).is_err());
    }

    #[test]
    fn vec_identity_pins_unfolding_convention() {
        // Slice l = H W_l Gᵀ, so row l of the unfolding must equal ((G ⊗ H) vec(W_l))ᵀ.
        let mut r = rng(7);
        let (a, b, ka, kb, frames) = (3, 4, 2, 5, 6);
        let h = random_matrix(&mut r, a, ka);
        let g = random_matrix(&mut r, b, kb);
        let ws: Vec<CMatrix> = (0..frames).map(|_| random_matrix(&mut r, ka, kb)).collect();
        let mut t = CTensor3::zeros(a, b, frames);
        for (l, w) in ws.iter().enumerate() {
            t.set_slice3(l, &(&h * w * g.transpose()));
        }
        let u = mode3_unfold(&t);
        let gh = kron(&g, &h);
        for (l, w) in ws.iter().enumerate() {
            let row = &gh * vec(w);
            let got = u.as_ref().subrows(l, 1).transpose().to_owned();
            assert!(rel_err(&got, &row) < 1e-12);
        }
    }

    #[test]
    fn svd_examples() {
        let dec = svd(&CMatrix::identity(3, 3)).unwrap();
        assert!(dec.s.iter().all(|&s| (s - 1.0).abs() < 1e-14));

        let mut r = rng(8);
        let a = random_matrix(&mut r, 4, 1);
        let b = random_matrix(&mut r, 3, 1);
        let m = &a * b.transpose();
        let dec = svd(&m).unwrap();
        let want = (frobenius_sq(&a) * frobenius_sq(&b)).sqrt();
        assert!((dec.s[0] - want).abs() < 1e-12 * want);
        assert!(dec.s[1..].iter().all(|&s| s < 1e-12 * want));
        assert_eq!(dec.rank(), 1);
    }

    fn check_svd(m: &CMatrix, dec: &Svd) {
        let s = diag(&dec.s.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
        let rec = &dec.u * s * dec.v.adjoint();
        assert!(rel_err(&rec, m) < 1e-10);
        let k = dec.s.len();
        let iu = dec.u.adjoint() * &dec.u;
        let iv = dec.v.adjoint() * &dec.v;
        assert!(rel_err(&iu, &CMatrix::identity(dec.u.ncols(), dec.u.ncols())) < 1e-10);
        assert!(rel_err(&iv, &CMatrix::identity(dec.v.ncols(), dec.v.ncols())) < 1e-10);
        assert!(dec.s.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(k, m.nrows().min(m.ncols()));
    }

    #[test]
    fn svd_reconstruction_and_orthonormality() {
        let mut r = rng(9);
        for &(rows, cols) in &[(4, 3), (3, 4), (6, 6), (1, 5)] {
            let m = random_matrix(&mut r, rows, cols);
            check_svd(&m, &svd(&m).unwrap());
            let full = svd_full(&m).unwrap();
            assert_eq!((full.u.ncols(), full.v.ncols()), (rows, cols));
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(svd(&m), Err(Error::NumericFailure(_))));
    }

    #[test]
    fn ls_solve_examples() {
        let mut r = rng(10);
        let b = random_matrix(&mut r, 4, 2);
        let x = ls_solve(&CMatrix::identity(4, 4), &b).unwrap();
        assert!(rel_err(&x, &b) < 1e-14);

        let a = random_matrix(&mut r, 8, 3);
        let x0 = random_matrix(&mut r, 3, 2);
        let x = ls_solve(&a, &(&a * &x0)).unwrap();
        assert!(rel_err(&x, &x0) < 1e-10);

        let x = ls_solve(&CMatrix::zeros(4, 3), &b).unwrap();
        assert_eq!(x, CMatrix::zeros(3, 2));

        assert!(ls_solve(&a, &b).is_err());
    }

    #[test]
    fn ls_solve_minimum_norm_on_rank_deficient() {
        // Two identical columns: the minimum-norm solution splits the weight evenly.
        let mut r = rng(11);
        let col = random_matrix(&mut r, 5, 1);
        let a = CMatrix::from_fn(5, 2, |i, _| col[(i, 0)]);
        let b = &col * CMatrix::from_fn(1, 1, |_, _| c(2.0, 0.0));
        let x = ls_solve(&a, &b).unwrap();
        assert!((x[(0, 0)] - c(1.0, 0.0)).norm() < 1e-10);
        assert!((x[(1, 0)] - c(1.0, 0.0)).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mixed_product_property(seed in any::<u64>(), sa in 2usize..4, sb in 2usize..4) {
            let mut r = rng(seed);
            let a = random_matrix(&mut r, sa, sa);
            let b = random_matrix(&mut r, sb, sb);
            let c_ = random_matrix(&mut r, sa, sa);
            let d = random_matrix(&mut r, sb, sb);
            let lhs = kron(&a, &b) * kron(&c_, &d);
            let rhs = kron(&(&a * &c_), &(&b * &d));
            prop_assert!(rel_err(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn fold_unfold_round_trip(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, d3 in 1usize..4) {
            let mut r = rng(seed);
            let t = CTensor3::from_fn(d1, d2, d3, |_, _, _| c(r.random(), r.random()));
            prop_assert_eq!(CTensor3::fold_mode3(&mode3_unfold(&t), d1, d2).unwrap(), t);
        }
    }
}
