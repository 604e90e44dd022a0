//! Dense symmetric and orthogonal kernels: covariance matrices, frames on the
//! Stiefel manifold, eigendecomposition, polar projection and Haar sampling.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Real;

/// Relative asymmetry above which a candidate covariance is rejected.
pub const SYMMETRY_REJECT_TOL: f64 = 1e-6;
/// Negative eigenvalues down to `-PSD_TOL * trace` are treated as zero.
pub const PSD_TOL: f64 = 1e-10;
/// Frame invariant: `‖VᵀV − I‖_F` must not exceed this.
pub const FRAME_TOL: f64 = 1e-8;

/// Symmetric positive semidefinite `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Validates and symmetrizes `m`.
    ///
    /// Fails when `m` is not square, has non-finite entries, is asymmetric
    /// beyond `1e-6` relative, or has an eigenvalue below `-1e-10 · trace`.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        let sym = symmetrize_checked(m)?;
        let spectrum = sym_eigen_matrix(&sym)?;
        let scale = sym.trace().abs().max(sym.norm());
        let floor = -T::cast(PSD_TOL) * scale;
        let min = spectrum.eigenvalues[spectrum.eigenvalues.len() - 1];
        if min < floor {
            return Err(Error::InvalidInput(format!(
                "matrix is not positive semidefinite (smallest eigenvalue {min})"
            )));
        }
        Ok(Self { entries: sym })
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: DMatrix::identity(p, p),
        }
    }

    /// `XᵀX / n` for an `n × p` data matrix.
    pub fn from_data(x: &DMatrix<T>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("data matrix has no rows".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data matrix has non-finite entries".into()));
        }
        let gram = x.tr_mul(x) / T::cast(n as f64);
        Ok(Self {
            entries: symmetrize(gram),
        })
    }

    /// Wraps a matrix that is PSD by construction (sums, scalings and
    /// congruences of covariance matrices).
    pub(crate) fn from_psd_unchecked(m: DMatrix<T>) -> Self {
        Self {
            entries: symmetrize(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.entries
    }

    pub fn trace(&self) -> T {
        self.entries.trace()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::from_psd_unchecked(&self.entries * c)
    }

    /// `Σ / Tr(Σ)`.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= T::zero() {
            return Err(Error::ZeroTrace(tr.as_f64()));
        }
        Ok(self.scaled(T::one() / tr))
    }

    /// `VᵀΣV` for a `p × m` basis, as an `m × m` covariance.
    pub fn compress(&self, basis: &DMatrix<T>) -> Self {
        Self::from_psd_unchecked(basis.tr_mul(&(&self.entries * basis)))
    }

    /// Symmetric square root with eigenvalues below numerical rank clipped to zero.
    pub fn sqrt(&self) -> Result<DMatrix<T>> {
        let s = sym_eigen(self)?;
        let lmax = s.eigenvalues[0].max(T::zero());
        let cutoff = T::default_epsilon() * T::cast(self.dim() as f64) * lmax;
        let roots = s
            .eigenvalues
            .map(|l| if l > cutoff { l.sqrt() } else { T::zero() });
        let q = &s.eigenvectors;
        Ok(q * DMatrix::from_diagonal(&roots) * q.transpose())
    }
}

/// `p × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> Frame<T> {
    /// Checks `‖VᵀV − I‖_F ≤ 1e-8`.
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        if m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::InvalidInput(format!(
                "frame shape {}x{} needs 1 <= k <= p",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("frame has non-finite entries".into()));
        }
        let defect = orthonormality_defect(&m);
        if defect > T::cast(FRAME_TOL) {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal (‖VᵀV − I‖ = {defect})"
            )));
        }
        Ok(Self { entries: m })
    }

    pub(crate) fn from_orthonormal_unchecked(m: DMatrix<T>) -> Self {
        debug_assert!(orthonormality_defect(&m) <= T::cast(1e-6));
        Self { entries: m }
    }

    /// Unit vector as a `p × 1` frame (normalizes its argument).
    pub fn from_direction(v: &[T]) -> Result<Self> {
        let v = DVector::from_column_slice(v);
        let norm = v.norm();
        if !(norm > T::zero()) {
            return Err(Error::InvalidInput("zero direction".into()));
        }
        Ok(Self {
            entries: DMatrix::from_column_slice(v.len(), 1, (v / norm).as_slice()),
        })
    }

    /// First `k` columns of `I_p`.
    pub fn identity_block(p: usize, k: usize) -> Result<Self> {
        check_rank(k, p)?;
        Ok(Self {
            entries: DMatrix::identity(p, k),
        })
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.entries
    }

    pub fn column(&self, j: usize) -> DVector<T> {
        self.entries.column(j).into_owned()
    }

    /// Frame made of the first `j` columns.
    pub fn prefix(&self, j: usize) -> Result<Self> {
        check_rank(j, self.k())?;
        Ok(Self {
            entries: self.entries.columns(0, j).into_owned(),
        })
    }

    /// `VVᵀ`.
    pub fn projector(&self) -> DMatrix<T> {
        &self.entries * self.entries.transpose()
    }

    /// `Tr(VᵀΣV)`.
    pub fn explained(&self, sigma: &CovarianceMatrix<T>) -> T {
        quad_trace(sigma.matrix(), &self.entries)
    }

    pub fn orthonormality_defect(&self) -> T {
        orthonormality_defect(&self.entries)
    }
}

/// Eigenvalues in nonincreasing order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: DVector<T>,
    pub eigenvectors: DMatrix<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn top_sum(&self, k: usize) -> T {
        self.eigenvalues.rows(0, k.min(self.eigenvalues.len())).sum()
    }
}

pub(crate) fn check_rank(k: usize, p: usize) -> Result<()> {
    if k == 0 || k > p {
        Err(Error::InvalidRank { k, p })
    } else {
        Ok(())
    }
}

/// `Tr(VᵀAV)` without forming `VᵀAV`.
pub(crate) fn quad_trace<T: Real>(a: &DMatrix<T>, v: &DMatrix<T>) -> T {
    (a * v).component_mul(v).sum()
}

pub(crate) fn orthonormality_defect<T: Real>(m: &DMatrix<T>) -> T {
    let k = m.ncols();
    (m.tr_mul(m) - DMatrix::<T>::identity(k, k)).norm()
}

fn symmetrize<T: Real>(m: DMatrix<T>) -> DMatrix<T> {
    let t = m.transpose();
    (m + t) * T::cast(0.5)
}

fn symmetrize_checked<T: Real>(m: DMatrix<T>) -> Result<DMatrix<T>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "covariance must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let asym = (&m - m.transpose()).norm();
    let scale = m.norm();
    if asym > T::cast(SYMMETRY_REJECT_TOL) * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (‖A − Aᵀ‖ = {asym})"
        )));
    }
    Ok(symmetrize(m))
}

/// Eigendecomposition of a covariance, eigenvalues sorted descending.
pub fn sym_eigen<T: Real>(sigma: &CovarianceMatrix<T>) -> Result<Spectrum<T>> {
    sym_eigen_matrix(sigma.matrix())
}

/// Eigendecomposition of an arbitrary symmetric matrix (only the lower
/// triangle is read). Ties keep the solver's order, which is deterministic.
pub fn sym_eigen_matrix<T: Real>(m: &DMatrix<T>) -> Result<Spectrum<T>> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput("eigendecomposition needs a square matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    // Stable sort: equal eigenvalues keep their relative order.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvectors of the `k` largest eigenvalues (rank-`k` PCA).
pub fn top_k_frame<T: Real>(sigma: &CovarianceMatrix<T>, k: usize) -> Result<Frame<T>> {
    check_rank(k, sigma.dim())?;
    let s = sym_eigen(sigma)?;
    Ok(Frame::from_orthonormal_unchecked(
        s.eigenvectors.columns(0, k).into_owned(),
    ))
}

/// Nearest point on the Stiefel manifold: the polar factor `UWᵀ` of the thin
/// SVD `m = U S Wᵀ`.
pub fn stiefel_project<T: Real>(m: &DMatrix<T>) -> Result<Frame<T>> {
    polar(m).map(|(frame, _)| frame)
}

/// Polar decomposition `m = Q H` with `Q` orthonormal and `H = W S Wᵀ`
/// symmetric positive definite.
pub(crate) fn polar<T: Real>(m: &DMatrix<T>) -> Result<(Frame<T>, DMatrix<T>)> {
    let (p, k) = m.shape();
    if k == 0 || k > p {
        return Err(Error::InvalidInput(format!("cannot project a {p}x{k} matrix")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite entries before projection".into()));
    }
    let svd = m.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let cutoff = T::default_epsilon() * T::cast(p as f64) * smax;
    if !(smax > T::zero()) || smin <= cutoff {
        return Err(Error::RankDeficient(format!(
            "singular values range over [{smin}, {smax}]"
        )));
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let q = u * v_t;
    let h = v_t.transpose() * DMatrix::from_diagonal(s) * v_t;
    Ok((Frame::from_orthonormal_unchecked(q), h))
}

/// `‖V₁V₁ᵀ − V₂V₂ᵀ‖_F`.
pub fn projection_distance<T: Real>(v: &Frame<T>, w: &Frame<T>) -> Result<T> {
    if v.p() != w.p() || v.k() != w.k() {
        return Err(Error::InvalidInput(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            v.p(),
            v.k(),
            w.p(),
            w.k()
        )));
    }
    // ‖P − Q‖² = 2k − 2‖VᵀW‖², but the direct form stays accurate near zero.
    Ok((v.projector() - w.projector()).norm())
}

pub(crate) fn gaussian_matrix<T: Real>(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<T> {
    // Column-major fill, so a p×k draw equals the first k columns of a p×p draw.
    let data: Vec<T> = (0..rows * cols)
        .map(|_| T::cast(StandardNormal.sample(rng)))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Householder QR with `R`'s diagonal made nonnegative. Returns `(Q, min |R_ii|)`.
fn sign_normalized_qr<T: Real>(m: DMatrix<T>) -> (DMatrix<T>, T) {
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    let mut min_diag = T::max_value().unwrap_or_else(T::one);
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        min_diag = min_diag.min(d.abs());
        if d < T::zero() {
            q.column_mut(j).neg_mut();
        }
    }
    (q, min_diag)
}

/// Haar-distributed `p × k` frame: first `k` columns of the sign-normalized
/// `Q` factor of a `p × p` standard Gaussian matrix.
pub fn haar_frame<T: Real>(p: usize, k: usize, rng: &mut Rng) -> Result<Frame<T>> {
    check_rank(k, p)?;
    // The first k columns of Q depend only on the first k columns of G.
    let g = gaussian_matrix::<T>(p, k, rng);
    let (q, _) = sign_normalized_qr(g);
    Ok(Frame::from_orthonormal_unchecked(q))
}

const ORTHOCOMPLEMENT_RETRIES: usize = 5;

/// Random `p × k2` frame orthogonal to `span(v)`: QR of `(I − VVᵀ) G` for a
/// Gaussian `G`.
pub fn orthocomplement_frame<T: Real>(v: &Frame<T>, k2: usize, rng: &mut Rng) -> Result<Frame<T>> {
    let p = v.p();
    if k2 == 0 || v.k() + k2 > p {
        return Err(Error::InvalidRank { k: v.k() + k2, p });
    }
    let vm = v.matrix();
    let project = |m: DMatrix<T>| {
        let coef = vm.tr_mul(&m);
        m - vm * coef
    };
    for _ in 0..=ORTHOCOMPLEMENT_RETRIES {
        let g = project(gaussian_matrix::<T>(p, k2, rng));
        let scale = g.norm();
        let (q, min_diag) = sign_normalized_qr(g);
        if !(min_diag > T::cast(1e-10) * scale) {
            continue;
        }
        // A second projection pass removes the O(eps) leakage into span(v).
        let (q, _) = sign_normalized_qr(project(q));
        return Ok(Frame::from_orthonormal_unchecked(q));
    }
    Err(Error::RankDeficient(
        "projected Gaussian matrix stayed rank deficient after retries".into(),
    ))
}

/// Deterministic orthonormal basis of the complement of `span(v)` in `R^p`.
pub(crate) fn complement_basis<T: Real>(v: &DMatrix<T>) -> Result<DMatrix<T>> {
    let p = v.nrows();
    let k = v.ncols();
    let residual = DMatrix::<T>::identity(p, p) - v * v.transpose();
    let s = sym_eigen_matrix(&residual)?;
    Ok(s.eigenvectors.columns(0, p - k).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn diag(d: &[f64]) -> CovarianceMatrix<f64> {
        CovarianceMatrix::from_diagonal(d).unwrap()
    }

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian_matrix::<f64>(n, n, &mut Seed(seed).rng());
        &g + g.transpose()
    }

    #[test]
    fn eigen_of_diagonal() {
        let s = sym_eigen(&diag(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);
        for j in 0..3 {
            assert_abs_diff_eq!(s.eigenvectors[(j, j)].abs(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigen_of_identity() {
        let s = sym_eigen(&CovarianceMatrix::<f64>::identity(4)).unwrap();
        for l in s.eigenvalues.iter() {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let a = random_symmetric(5, 11);
        let s = sym_eigen_matrix(&a).unwrap();
        let q = &s.eigenvectors;
        let rebuilt = q * DMatrix::from_diagonal(&s.eigenvalues) * q.transpose();
        assert!((rebuilt - &a).norm() <= 1e-8 * (1.0 + a.norm()));
        for w in s.eigenvalues.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(sym_eigen_matrix(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn covariance_validation() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(CovarianceMatrix::new(asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CovarianceMatrix::new(indefinite).is_err());
        // Tiny asymmetry is symmetrized away.
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-9, 1.0]);
        let c = CovarianceMatrix::new(nearly).unwrap();
        assert_eq!(c.matrix()[(0, 1)], c.matrix()[(1, 0)]);
        // Noise-level negative eigenvalue is accepted.
        let noisy = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-13]));
        assert!(CovarianceMatrix::new(noisy).is_ok());
    }

    #[test]
    fn top_k_frames_of_example_covariances() {
        let v = top_k_frame(&diag(&[0.9, 0.1, 0.0]), 1).unwrap();
        let e1 = Frame::from_direction(&[1.0, 0.0, 0.0]).unwrap();
        assert!(projection_distance(&v, &e1).unwrap() < 1e-12);

        let v = top_k_frame(&diag(&[0.0, 0.4, 0.6]), 1).unwrap();
        let e3 = Frame::from_direction(&[0.0, 0.0, 1.0]).unwrap();
        assert!(projection_distance(&v, &e3).unwrap() < 1e-12);

        let id = CovarianceMatrix::<f64>::identity(3);
        let v = top_k_frame(&id, 2).unwrap();
        assert_abs_diff_eq!(v.explained(&id), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn top_k_rank_errors() {
        let id = CovarianceMatrix::<f64>::identity(3);
        assert!(matches!(top_k_frame(&id, 0), Err(Error::InvalidRank { .. })));
        assert!(matches!(top_k_frame(&id, 4), Err(Error::InvalidRank { .. })));
    }

    #[test]
    fn stiefel_project_cases() {
        let v = haar_frame::<f64>(5, 2, &mut Seed(3).rng()).unwrap();
        let w = stiefel_project(v.matrix()).unwrap();
        assert!((w.matrix() - v.matrix()).norm() < 1e-10);

        let scaled = DMatrix::<f64>::identity(3, 2) * 2.0;
        let w = stiefel_project(&scaled).unwrap();
        assert!((w.matrix() - DMatrix::<f64>::identity(3, 2)).norm() < 1e-12);

        let m = gaussian_matrix::<f64>(5, 2, &mut Seed(4).rng());
        let w = stiefel_project(&m).unwrap();
        assert!(w.orthonormality_defect() < 1e-10);
        // Oracle: explicit SVD polar factor.
        let svd = m.clone().svd(true, true);
        let direct = svd.u.unwrap() * svd.v_t.unwrap();
        assert!((w.matrix() - direct).norm() < 1e-10);
    }

    #[test]
    fn stiefel_project_rejects_rank_deficient() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(stiefel_project(&m), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn projection_distance_cases() {
        let e1 = Frame::from_direction(&[1.0, 0.0, 0.0]).unwrap();
        let e2 = Frame::from_direction(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(projection_distance(&e1, &e1).unwrap(), 0.0);
        assert_abs_diff_eq!(projection_distance(&e1, &e2).unwrap(), 2f64.sqrt(), epsilon = 1e-15);

        let mut rng = Seed(5).rng();
        let v = haar_frame::<f64>(6, 3, &mut rng).unwrap();
        let q = haar_frame::<f64>(3, 3, &mut rng).unwrap();
        let vq = Frame::new(v.matrix() * q.matrix()).unwrap();
        assert!(projection_distance(&v, &vq).unwrap() < 1e-12);

        let w = haar_frame::<f64>(6, 2, &mut rng).unwrap();
        assert!(projection_distance(&v, &w).is_err());
    }

    #[test]
    fn haar_small_cases() {
        let v = haar_frame::<f64>(1, 1, &mut Seed(0).rng()).unwrap();
        assert_abs_diff_eq!(v.matrix()[(0, 0)].abs(), 1.0, epsilon = 1e-15);
        let v = haar_frame::<f64>(7, 3, &mut Seed(1).rng()).unwrap();
        assert!(v.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn haar_matches_full_square_draw() {
        let p = 5;
        let full = gaussian_matrix::<f64>(p, p, &mut Seed(9).rng());
        let (q_full, _) = sign_normalized_qr(full);
        let v = haar_frame::<f64>(p, 2, &mut Seed(9).rng()).unwrap();
        assert!((v.matrix() - q_full.columns(0, 2)).norm() < 1e-12);
    }

    #[test]
    fn haar_second_moment() {
        // E[VVᵀ] = (k/p) I for Haar frames.
        let (p, k, draws) = (4, 2, 10_000);
        let mut rng = Seed(2024).rng();
        let mut acc = DMatrix::<f64>::zeros(p, p);
        for _ in 0..draws {
            acc += haar_frame::<f64>(p, k, &mut rng).unwrap().projector();
        }
        acc /= draws as f64;
        let target = DMatrix::<f64>::identity(p, p) * (k as f64 / p as f64);
        assert!((acc - target).amax() < 0.05);
    }

    #[test]
    fn orthocomplement_cases() {
        let e1 = Frame::<f64>::from_direction(&[1.0, 0.0, 0.0]).unwrap();
        let u = orthocomplement_frame(&e1, 1, &mut Seed(6).rng()).unwrap();
        assert!(u.matrix()[(0, 0)].abs() < 1e-12);
        assert_abs_diff_eq!(u.matrix().norm(), 1.0, epsilon = 1e-12);

        let v = haar_frame::<f64>(8, 3, &mut Seed(7).rng()).unwrap();
        let w = orthocomplement_frame(&v, 4, &mut Seed(8).rng()).unwrap();
        assert!(v.matrix().tr_mul(w.matrix()).norm() <= 1e-10);
        assert!(w.orthonormality_defect() < 1e-12);

        assert!(orthocomplement_frame(&v, 6, &mut Seed(8).rng()).is_err());
    }

    #[test]
    fn orthocomplement_of_hyperplane_is_null_space() {
        let p = 6;
        let v = haar_frame::<f64>(p, p - 1, &mut Seed(10).rng()).unwrap();
        let u = orthocomplement_frame(&v, 1, &mut Seed(12).rng()).unwrap();
        // Oracle: left singular vector of Vᵀ's null space via full SVD of VVᵀ.
        let svd = v.projector().svd(true, false);
        let s = &svd.singular_values;
        let idx = (0..p).min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
        let null = svd.u.unwrap().column(idx).into_owned();
        assert_abs_diff_eq!(null.dot(&u.column(0)).abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn complement_basis_is_orthogonal() {
        let v = haar_frame::<f64>(5, 2, &mut Seed(13).rng()).unwrap();
        let b = complement_basis(v.matrix()).unwrap();
        assert_eq!(b.shape(), (5, 3));
        assert!(v.matrix().tr_mul(&b).norm() < 1e-12);
        assert!(orthonormality_defect(&b) < 1e-12);
    }

    #[test]
    fn polar_factor_reconstructs() {
        let m = gaussian_matrix::<f64>(6, 3, &mut Seed(14).rng());
        let (q, h) = polar(&m).unwrap();
        assert!((q.matrix() * &h - &m).norm() < 1e-12);
        assert!((&h - h.transpose()).norm() < 1e-12);
    }

    #[test]
    fn single_precision_instantiation() {
        let s = CovarianceMatrix::<f32>::from_diagonal(&[2.0, 1.0]).unwrap();
        let v = top_k_frame(&s, 1).unwrap();
        assert!((v.explained(&s) - 2.0f32).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(seed in any::<u64>(), p in 2usize..8, k in 1usize..4) {
            prop_assume!(k <= p);
            let m = gaussian_matrix::<f64>(p, k, &mut Seed(seed).rng());
            let once = stiefel_project(&m).unwrap();
            let twice = stiefel_project(once.matrix()).unwrap();
            prop_assert!((once.matrix() - twice.matrix()).norm() <= 1e-10);
            prop_assert!(once.orthonormality_defect() <= FRAME_TOL);
        }

        #[test]
        fn distance_triangle_inequality(seed in any::<u64>(), p in 2usize..8, k in 1usize..4) {
            prop_assume!(k <= p);
            let mut rng = Seed(seed).rng();
            let a = haar_frame::<f64>(p, k, &mut rng).unwrap();
            let b = haar_frame::<f64>(p, k, &mut rng).unwrap();
            let c = haar_frame::<f64>(p, k, &mut rng).unwrap();
            let ab = projection_distance(&a, &b).unwrap();
            let bc = projection_distance(&b, &c).unwrap();
            let ac = projection_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert!((ab - projection_distance(&b, &a).unwrap()).abs() <= 1e-15);
        }

        #[test]
        fn eigenvalues_sum_to_trace(seed in any::<u64>(), n in 1usize..9) {
            let g = gaussian_matrix::<f64>(n + 2, n, &mut Seed(seed).rng());
            let sigma = CovarianceMatrix::from_data(&g).unwrap();
            let s = sym_eigen(&sigma).unwrap();
            let tr = sigma.trace();
            prop_assert!((s.eigenvalues.sum() - tr).abs() <= 1e-10 * tr.abs().max(1.0));
        }
    }
}
