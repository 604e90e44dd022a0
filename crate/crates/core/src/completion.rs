//! Pooled and worst-case matrix completion with a shared right factor,
//! inductive least-squares reconstruction of new rows, and incoherence.
//!
//! Masks use `true` for an observed entry. Unobserved entries of a data
//! matrix are never read, so they may hold any value including NaN.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, stiefel_project, CovarianceMatrix, Frame, FRAME_TOL};
use crate::optim::{adam_minimize, AdamOptions};
use crate::rng::Seed;
use crate::scalar::Real;
use crate::solvers::{tangent, SolverConfig};

pub type Mask = DMatrix<bool>;

/// Relative singular-value cutoff for least-squares solves.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MaskedDomain<T: Real> {
    pub id: String,
    pub data: DMatrix<T>,
    pub mask: Mask,
}

/// Per-domain data with observation masks over a shared set of columns.
#[derive(Debug, Clone)]
pub struct MaskedDataset<T: Real> {
    domains: Vec<MaskedDomain<T>>,
    p: usize,
}

impl<T: Real> MaskedDataset<T> {
    pub fn new(domains: Vec<MaskedDomain<T>>) -> Result<Self> {
        let p = domains
            .first()
            .ok_or_else(|| Error::InvalidInput("masked dataset has no domains".into()))?
            .data
            .ncols();
        for d in &domains {
            if d.data.ncols() != p || d.data.shape() != d.mask.shape() {
                return Err(Error::InvalidInput(format!(
                    "domain '{}': data {:?} and mask {:?} must both have {p} columns",
                    d.id,
                    d.data.shape(),
                    d.mask.shape()
                )));
            }
            if d.data.nrows() == 0 {
                return Err(Error::InvalidInput(format!("domain '{}' has no rows", d.id)));
            }
            for i in 0..d.data.nrows() {
                if !d.mask.row(i).iter().any(|b| *b) {
                    return Err(Error::NoObservations { row: i });
                }
                for j in 0..p {
                    if d.mask[(i, j)] && !d.data[(i, j)].is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "domain '{}': observed entry ({i}, {j}) is not finite",
                            d.id
                        )));
                    }
                }
            }
        }
        Ok(Self { domains, p })
    }

    /// Every entry observed; ids `domain1`, `domain2`, ….
    pub fn fully_observed(data: Vec<DMatrix<T>>) -> Result<Self> {
        Self::new(
            data.into_iter()
                .enumerate()
                .map(|(e, x)| MaskedDomain {
                    id: format!("domain{}", e + 1),
                    mask: DMatrix::from_element(x.nrows(), x.ncols(), true),
                    data: x,
                })
                .collect(),
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> &[MaskedDomain<T>] {
        &self.domains
    }

    pub fn total_rows(&self) -> usize {
        self.domains.iter().map(|d| d.data.nrows()).sum()
    }

    /// Columns with no observed entry in any domain.
    pub fn unobserved_columns(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| self.domains.iter().all(|d| !d.mask.column(j).iter().any(|b| *b)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum McMethod {
    Pool,
    Max,
}

impl McMethod {
    pub fn name(self) -> &'static str {
        match self {
            McMethod::Pool => "pool",
            McMethod::Max => "max",
        }
    }
}

impl std::str::FromStr for McMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pool" => Ok(McMethod::Pool),
            "max" => Ok(McMethod::Max),
            _ => Err(Error::InvalidConfig(format!("unknown completion method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub max_rounds: usize,
    /// Stop when the relative objective improvement of a round falls below this.
    pub tol: f64,
    /// Adam iterations per worst-case right-factor update.
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub inner_step: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            tol: 1e-4,
            inner_iters: 2000,
            inner_tol: 1e-8,
            inner_step: 1e-2,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 || self.inner_iters == 0 {
            return Err(Error::InvalidConfig("round and iteration budgets must be positive".into()));
        }
        if !(self.tol >= 0.0) || !(self.inner_tol >= 0.0) || !(self.inner_step > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be nonnegative and the step positive".into()));
        }
        Ok(())
    }

    fn inner_options(&self) -> AdamOptions {
        AdamOptions {
            max_iters: self.inner_iters,
            lr: self.inner_step,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            tol: self.inner_tol,
            window: 50,
            max_decays: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompletionModel<T: Real> {
    pub method: McMethod,
    pub right_factor: Frame<T>,
    pub left_factors: Vec<DMatrix<T>>,
    /// Objective after initialization, then after every round.
    pub objective_trace: Vec<T>,
    /// `(1/n_e) ‖P_Ω(X_e − L_e Rᵀ)‖²` at the returned factors.
    pub domain_errors: Vec<T>,
    /// Columns never observed; their rows of `R` carry no information.
    pub unidentified_columns: Vec<usize>,
}

impl<T: Real> CompletionModel<T> {
    pub fn objective(&self) -> T {
        *self.objective_trace.last().expect("trace has the initial value")
    }

    pub fn rounds(&self) -> usize {
        self.objective_trace.len() - 1
    }
}

/// Minimum-norm least squares `argmin_b ‖a b − y‖` with the relative cutoff.
fn lstsq<T: Real>(a: &DMatrix<T>, y: &DVector<T>) -> Result<DVector<T>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == T::zero() {
        return Ok(DVector::zeros(a.ncols()));
    }
    let cutoff = T::cast(PINV_RTOL) * smax;
    // nalgebra zeroes singular values at or below the threshold.
    svd.solve(y, cutoff)
        .map_err(|e| Error::NumericalFailure(format!("least-squares solve failed: {e}")))
}

fn observed_indices(omega: impl IntoIterator<Item = bool>) -> Vec<usize> {
    omega
        .into_iter()
        .enumerate()
        .filter(|(_, b)| *b)
        .map(|(j, _)| j)
        .collect()
}

/// Normal equations are used when `AᵀA` has condition number below this.
const NORMAL_EQ_MAX_COND: f64 = 1e8;

fn ols_on<T: Real>(x: &[T], obs: &[usize], r: &DMatrix<T>) -> Result<DVector<T>> {
    let a = r.select_rows(obs);
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|&j| x[j]));
    if obs.len() >= a.ncols() {
        let gram = a.tr_mul(&a);
        let eig = gram.clone().symmetric_eigen();
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((T::max_value().expect("bounded"), T::zero()), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if hi > T::zero() && lo * T::cast(NORMAL_EQ_MAX_COND) >= hi {
            if let Some(chol) = gram.cholesky() {
                return Ok(chol.solve(&a.tr_mul(&y)));
            }
        }
    }
    lstsq(&a, &y)
}

/// Least-squares coefficients of `x` on the rows of `r` selected by `omega`,
/// and the reconstruction `ℓ Rᵀ` over all coordinates.
///
/// The standalone call reports a fully masked input as row 0; batch callers
/// report the actual row.
pub fn inductive_ols<T: Real>(x: &[T], omega: &[bool], r: &Frame<T>) -> Result<(DVector<T>, DVector<T>)> {
    if x.len() != r.p() || omega.len() != r.p() {
        return Err(Error::InvalidInput(format!(
            "row of length {} and mask of length {} for a frame with {} rows",
            x.len(),
            omega.len(),
            r.p()
        )));
    }
    let obs = observed_indices(omega.iter().copied());
    if obs.is_empty() {
        return Err(Error::NoObservations { row: 0 });
    }
    let coef = ols_on(x, &obs, r.matrix())?;
    let recon = r.matrix() * &coef;
    Ok((coef, recon))
}

fn row_vec<T: Real>(m: &DMatrix<T>, i: usize) -> Vec<T> {
    m.row(i).iter().copied().collect()
}

/// Per-row least squares on observed entries. `r` must have orthonormal
/// columns, which lets fully observed rows use `Rᵀx` directly.
fn left_factor<T: Real>(x: &DMatrix<T>, mask: &Mask, r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let k = r.ncols();
    let mut l = DMatrix::<T>::zeros(x.nrows(), k);
    for i in 0..x.nrows() {
        let obs = observed_indices(mask.row(i).iter().copied());
        if obs.is_empty() {
            return Err(Error::NoObservations { row: i });
        }
        if obs.len() == x.ncols() {
            let coef = x.row(i) * r;
            l.row_mut(i).copy_from(&coef);
            continue;
        }
        let coef = ols_on(&row_vec(x, i), &obs, r)?;
        l.row_mut(i).copy_from(&coef.transpose());
    }
    Ok(l)
}

/// Reconstruct every row of `x` from its observed entries.
pub fn reconstruct_rows<T: Real>(x: &DMatrix<T>, mask: &Mask, r: &Frame<T>) -> Result<DMatrix<T>> {
    if x.shape() != mask.shape() || x.ncols() != r.p() {
        return Err(Error::InvalidInput("data, mask and frame shapes disagree".into()));
    }
    Ok(left_factor(x, mask, r.matrix())? * r.matrix().transpose())
}

/// `‖P_Ω(X − L Rᵀ)‖²`.
fn masked_sse<T: Real>(x: &DMatrix<T>, mask: &Mask, l: &DMatrix<T>, r: &DMatrix<T>) -> T {
    let fit = l * r.transpose();
    let mut sse = T::zero();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if mask[(i, j)] {
                let d = x[(i, j)] - fit[(i, j)];
                sse += d * d;
            }
        }
    }
    sse
}

fn domain_errors<T: Real>(data: &MaskedDataset<T>, ls: &[DMatrix<T>], r: &DMatrix<T>) -> Vec<T> {
    data.domains
        .iter()
        .zip(ls)
        .map(|(d, l)| masked_sse(&d.data, &d.mask, l, r) / T::cast(d.data.nrows() as f64))
        .collect()
}

fn aggregate<T: Real>(method: McMethod, data: &MaskedDataset<T>, errors: &[T]) -> T {
    match method {
        McMethod::Max => errors.iter().copied().fold(T::zero(), |a, b| a.max(b)),
        McMethod::Pool => {
            let total: T = data
                .domains
                .iter()
                .zip(errors)
                .fold(T::zero(), |acc, (d, e)| acc + *e * T::cast(d.data.nrows() as f64));
            total / T::cast(data.total_rows() as f64)
        }
    }
}

fn zero_filled<T: Real>(x: &DMatrix<T>, mask: &Mask) -> DMatrix<T> {
    x.zip_map(mask, |v, b| if b { v } else { T::zero() })
}

/// Rank-`k` SVD of the stacked zero-filled observations: `L = U S`, `R = W`.
fn svd_init<T: Real>(data: &MaskedDataset<T>, k: usize) -> Result<(Vec<DMatrix<T>>, DMatrix<T>)> {
    let n = data.total_rows();
    let mut stacked = DMatrix::<T>::zeros(n, data.p);
    let mut offset = 0;
    for d in &data.domains {
        let rows = d.data.nrows();
        stacked
            .rows_mut(offset, rows)
            .copy_from(&zero_filled(&d.data, &d.mask));
        offset += rows;
    }
    let svd = stacked.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| {
        svd.singular_values[*b]
            .partial_cmp(&svd.singular_values[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut r = DMatrix::<T>::zeros(data.p, k);
    let mut l_all = DMatrix::<T>::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        r.set_column(c, &v_t.row(idx).transpose());
        l_all.set_column(c, &(u.column(idx) * svd.singular_values[idx]));
    }
    if order.len() < k {
        return Err(Error::InvalidRank { k, p: order.len() });
    }
    let r = orthonormal_or_fail(r)?;
    let mut ls = Vec::with_capacity(data.len());
    let mut offset = 0;
    for d in &data.domains {
        let rows = d.data.nrows();
        ls.push(l_all.rows(offset, rows).into_owned());
        offset += rows;
    }
    Ok((ls, r))
}

fn orthonormal_or_fail<T: Real>(r: DMatrix<T>) -> Result<DMatrix<T>> {
    if orthonormality_defect(&r) > T::cast(FRAME_TOL) {
        return Err(Error::NumericalFailure("right factor lost orthonormality".into()));
    }
    Ok(r)
}

/// `R = Q H` with `Q` orthonormal, valid also when `R` is rank deficient.
/// Returns `(Q, H)` so that `L Rᵀ = (L H) Qᵀ`.
fn polar_factor<T: Real>(r: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let svd = r.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let q = orthonormal_or_fail(u * v_t)?;
    let h = v_t.transpose() * DMatrix::from_diagonal(&svd.singular_values) * v_t;
    Ok((q, h))
}

/// Per-column least squares for `R` over all domains' observed entries.
fn pooled_right_step<T: Real>(data: &MaskedDataset<T>, ls: &[DMatrix<T>], r: &DMatrix<T>) -> Result<DMatrix<T>> {
    let k = r.ncols();
    let mut next = r.clone();
    for j in 0..data.p {
        let mut rows: Vec<DVector<T>> = Vec::new();
        let mut ys: Vec<T> = Vec::new();
        for (d, l) in data.domains.iter().zip(ls) {
            for i in 0..d.data.nrows() {
                if d.mask[(i, j)] {
                    rows.push(l.row(i).transpose());
                    ys.push(d.data[(i, j)]);
                }
            }
        }
        if rows.is_empty() {
            continue;
        }
        let a = DMatrix::from_columns(&rows).transpose();
        let coef = lstsq(&a, &DVector::from_vec(ys))?;
        debug_assert_eq!(coef.len(), k);
        next.row_mut(j).copy_from(&coef.transpose());
    }
    Ok(next)
}

/// Adam on the Stiefel manifold for `max_e (1/n_e) min_{L_e} ‖P_Ω(X_e − L_e Rᵀ)‖²`,
/// re-solving every `L_e` at each iterate. Starts at the current `R`, so the
/// result is never worse.
fn worst_case_right_step<T: Real>(data: &MaskedDataset<T>, r: &DMatrix<T>, cfg: &McConfig) -> Result<DMatrix<T>> {
    let two = T::cast(2.0);
    let out = adam_minimize(
        r.clone(),
        &cfg.inner_options(),
        |r| {
            let mut worst: Option<(T, DMatrix<T>)> = None;
            for d in &data.domains {
                let l = left_factor(&d.data, &d.mask, r)?;
                let n = T::cast(d.data.nrows() as f64);
                let resid = (&d.data - &l * r.transpose()).zip_map(&d.mask, |v, b| if b { v } else { T::zero() });
                let err = resid.norm_squared() / n;
                if worst.as_ref().is_none_or(|(w, _)| err > *w) {
                    worst = Some((err, resid.transpose() * l * (-two / n)));
                }
            }
            let (err, grad) = worst.expect("nonempty dataset");
            Ok((err, tangent(r, grad)))
        },
        |m| stiefel_project(&m).map(Frame::into_matrix),
    )?;
    Ok(out.x)
}

fn fit<T: Real>(method: McMethod, data: &MaskedDataset<T>, k: usize, cfg: &McConfig) -> Result<CompletionModel<T>> {
    cfg.validate()?;
    if k == 0 || k > data.p {
        return Err(Error::InvalidRank { k, p: data.p });
    }
    let unidentified = data.unobserved_columns();
    let (mut ls, mut r) = svd_init(data, k)?;
    let mut errors = domain_errors(data, &ls, &r);
    let mut trace = vec![aggregate(method, data, &errors)];

    for _ in 0..cfg.max_rounds {
        let raw = match method {
            McMethod::Pool => pooled_right_step(data, &ls, &r)?,
            McMethod::Max => worst_case_right_step(data, &r, cfg)?,
        };
        let (q, h) = polar_factor(&raw)?;
        r = q;
        for l in ls.iter_mut() {
            *l = &*l * &h;
        }
        ls = data
            .domains
            .iter()
            .map(|d| left_factor(&d.data, &d.mask, &r))
            .collect::<Result<Vec<_>>>()?;
        errors = domain_errors(data, &ls, &r);
        let value = aggregate(method, data, &errors);
        if !value.is_finite() {
            return Err(Error::NumericalFailure("completion objective is not finite".into()));
        }
        let previous = *trace.last().expect("nonempty");
        trace.push(value);
        let scale = previous.abs().max(T::cast(f64::MIN_POSITIVE));
        if (previous - value) / scale < T::cast(cfg.tol) {
            break;
        }
    }
    Ok(CompletionModel {
        method,
        right_factor: Frame::from_orthonormal_unchecked(r),
        left_factors: ls,
        objective_trace: trace,
        domain_errors: errors,
        unidentified_columns: unidentified,
    })
}

/// Minimize the pooled squared error over all observed entries (divided by
/// the total row count) by alternating least squares.
pub fn fit_pool_mc<T: Real>(data: &MaskedDataset<T>, k: usize, cfg: &McConfig) -> Result<CompletionModel<T>> {
    fit(McMethod::Pool, data, k, cfg)
}

/// Minimize the largest per-domain mean squared error on observed entries.
pub fn fit_max_mc<T: Real>(data: &MaskedDataset<T>, k: usize, cfg: &McConfig) -> Result<CompletionModel<T>> {
    fit(McMethod::Max, data, k, cfg)
}

pub fn fit_mc<T: Real>(method: McMethod, data: &MaskedDataset<T>, k: usize, cfg: &McConfig) -> Result<CompletionModel<T>> {
    fit(method, data, k, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    /// `max_i ‖R^{(i)}‖ · √(p/k)`.
    pub mu: f64,
    pub max_row_norm: f64,
    pub p: usize,
    pub k: usize,
}

impl IncoherenceReport {
    /// Largest number of missing entries allowed for accuracy `eps`.
    pub fn budget(&self, eps: f64) -> Result<usize> {
        missingness_budget(self.p, self.k, eps, self.mu)
    }
}

pub fn incoherence<T: Real>(r: &Frame<T>) -> IncoherenceReport {
    let m = r.matrix();
    let max_row_norm = (0..m.nrows())
        .map(|i| m.row(i).norm().as_f64())
        .fold(0.0, f64::max);
    let (p, k) = (r.p(), r.k());
    IncoherenceReport {
        mu: max_row_norm * (p as f64 / k as f64).sqrt(),
        max_row_norm,
        p,
        k,
    }
}

/// `floor(p ε / (k μ² (2ε + 1)))`.
pub fn missingness_budget(p: usize, k: usize, eps: f64, mu: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    // Row norms can only reach μ = 1 up to rounding.
    if !(mu >= 1.0 - 1e-12) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu must be at least 1, got {mu}")));
    }
    if k == 0 {
        return Err(Error::InvalidRank { k, p });
    }
    let raw = p as f64 * eps / (k as f64 * mu * mu * (2.0 * eps + 1.0));
    // Absorb rounding in quotients that are integers in exact arithmetic.
    Ok((raw + 1e-9).floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCheck {
    /// `‖x − ℓ₋ₛ Rᵀ‖² / ‖x − x R Rᵀ‖²`.
    pub ratio: f64,
    pub bound_ok: bool,
}

/// Compare the full-data projection residual with the residual of the
/// least-squares fit that ignores the coordinates in `removal`.
pub fn ols_subset_stability_check<T: Real>(x: &[T], r: &Frame<T>, removal: &[usize], eps: f64) -> Result<StabilityCheck> {
    let p = r.p();
    if x.len() != p {
        return Err(Error::InvalidInput(format!("row has length {}, expected {p}", x.len())));
    }
    if removal.iter().any(|&j| j >= p) {
        return Err(Error::InvalidInput("removal index out of range".into()));
    }
    let budget = incoherence(r).budget(eps)?;
    let mut omega = vec![true; p];
    for &j in removal {
        omega[j] = false;
    }
    let removed = omega.iter().filter(|b| !**b).count();
    if removed > budget {
        return Err(Error::InvalidInput(format!(
            "removing {removed} coordinates exceeds the budget of {budget}"
        )));
    }
    let xv = DVector::from_column_slice(x);
    let rm = r.matrix();
    let full = &xv - rm * (rm.transpose() * &xv);
    let (_, partial) = inductive_ols(x, &omega, r)?;
    let num = (&xv - partial).norm_squared().as_f64();
    let den = full.norm_squared().as_f64();
    let ratio = if num <= 1e-14 && den <= 1e-14 {
        1.0
    } else if den <= 1e-14 {
        f64::INFINITY
    } else {
        num / den
    };
    Ok(StabilityCheck {
        ratio,
        bound_ok: ratio <= 1.0 + eps,
    })
}

/// Expected inductive reconstruction error `E‖x − x̂‖²` of a frame for
/// zero-mean `x` with covariance `Σ`, averaged over a fixed list of masks.
///
/// For a mask with observed set `O`, `A = R_O`, `G = (AᵀA)⁻¹`, `B = Σ_{:,O}`
/// and `C = Σ_{O,O}`, the error is `Tr Σ − 2 Tr(Rᵀ B A G) + Tr(G AᵀCA G)`.
#[derive(Debug, Clone)]
pub struct InductiveLoss<T: Real> {
    masks: Vec<Vec<usize>>,
    p: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real> InductiveLoss<T> {
    pub fn new(p: usize, masks: &[Vec<bool>]) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidInput("at least one mask is required".into()));
        }
        let mut obs = Vec::with_capacity(masks.len());
        for (i, m) in masks.iter().enumerate() {
            if m.len() != p {
                return Err(Error::InvalidInput(format!("mask of length {}, expected {p}", m.len())));
            }
            let o = observed_indices(m.iter().copied());
            if o.is_empty() {
                return Err(Error::NoObservations { row: i });
            }
            obs.push(o);
        }
        Ok(Self {
            masks: obs,
            p,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    pub fn value(&self, r: &Frame<T>, sigma: &CovarianceMatrix<T>) -> Result<T> {
        Ok(self.value_and_gradient(r.matrix(), sigma.matrix(), false)?.0)
    }

    /// Value and Euclidean gradient in `R` of the formula above, which agrees
    /// with the expected error whenever `RᵀR = I`.
    pub(crate) fn value_and_gradient(&self, r: &DMatrix<T>, sigma: &DMatrix<T>, with_grad: bool) -> Result<(T, DMatrix<T>)> {
        if r.nrows() != self.p || sigma.nrows() != self.p {
            return Err(Error::InvalidInput("frame or covariance has the wrong dimension".into()));
        }
        let k = r.ncols();
        let two = T::cast(2.0);
        let mut total = T::zero();
        let mut grad = DMatrix::<T>::zeros(self.p, k);
        for obs in &self.masks {
            let a = r.select_rows(obs);
            let g = (a.transpose() * &a)
                .try_inverse()
                .filter(|g| g.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::RankDeficient("observed rows of the frame are rank deficient".into()))?;
            let b = sigma.select_columns(obs);
            let c = b.select_rows(obs);
            let ag = &a * &g;
            let bag = &b * &ag;
            let ca = &c * &a;
            let h = a.transpose() * &ca;
            let t1 = (r.transpose() * &bag).trace();
            let t3 = (&g * &h * &g).trace();
            total += sigma.trace() - two * t1 + t3;
            if with_grad {
                let rtb = r.transpose() * &b;
                let n1 = &g * (&rtb * &a) * &g;
                let n2 = &g * (&g * &h + &h * &g) * &g;
                let inner = (&a * (&n1 + n1.transpose()) - rtb.transpose() * &g) * two
                    + (&ca * &g * &g) * two
                    - &a * (&n2 + n2.transpose());
                grad -= bag * two;
                for (row, &j) in obs.iter().enumerate() {
                    let mut gj = grad.row_mut(j);
                    gj += inner.row(row);
                }
            }
        }
        let m = T::cast(self.masks.len() as f64);
        Ok((total / m, grad / m))
    }
}

/// Frame minimizing the largest expected inductive error over the given
/// covariances, by projected Adam from `restarts` Haar starts plus `warm`.
pub fn direct_inductive_fit<T: Real>(
    loss: &InductiveLoss<T>,
    sources: &[CovarianceMatrix<T>],
    k: usize,
    warm: Option<&Frame<T>>,
    cfg: &SolverConfig,
) -> Result<(Frame<T>, T)> {
    use crate::linalg::{haar_frame, stiefel_project};
    use crate::solvers::adam_options;
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidInput("no source covariances".into()));
    }
    let mut starts: Vec<DMatrix<T>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.matrix().clone());
    }
    for i in 0..cfg.restarts {
        starts.push(haar_frame::<T>(loss.p, k, &mut cfg.seed.derive(i as u64).rng())?.into_matrix());
    }
    let mut best: Option<(DMatrix<T>, T)> = None;
    for start in starts {
        let out = adam_minimize(
            start,
            &adam_options(cfg),
            |r| {
                let mut worst = (T::zero(), 0usize);
                for (e, s) in sources.iter().enumerate() {
                    let v = loss.value_and_gradient(r, s.matrix(), false)?.0;
                    if e == 0 || v > worst.0 {
                        worst = (v, e);
                    }
                }
                let (_, g) = loss.value_and_gradient(r, sources[worst.1].matrix(), true)?;
                Ok((worst.0, tangent(r, g)))
            },
            |m| stiefel_project(&m).map(Frame::into_matrix),
        )?;
        if best.as_ref().is_none_or(|(_, b)| out.value < *b) {
            best = Some((out.x, out.value));
        }
    }
    let (x, v) = best.expect("at least one start");
    Ok((Frame::from_orthonormal_unchecked(x), v))
}

/// Seeded list of observation masks with exactly `missing` hidden entries.
pub fn random_masks(p: usize, missing: usize, count: usize, seed: Seed) -> Result<Vec<Vec<bool>>> {
    if missing >= p {
        return Err(Error::InvalidInput(format!("cannot hide {missing} of {p} entries")));
    }
    let mut rng = seed.rng();
    Ok((0..count)
        .map(|_| {
            let mut m = vec![true; p];
            for j in rand::seq::index::sample(&mut rng, p, missing) {
                m[j] = false;
            }
            m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_gaussian_rows, sample_masks, sample_source_covariances, GenConfig};
    use crate::linalg::{haar_frame, projection_distance, sym_eigen_matrix};
    use crate::losses::{DomainCollection, LossKind};
    use crate::solvers::solve_wcpca;
    use approx::assert_abs_diff_eq;

    fn frame(rows: usize, cols: usize, data: &[f64]) -> Frame<f64> {
        Frame::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    fn low_rank_data(n: usize, p: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Seed(seed).rng();
        let l = crate::linalg::gaussian_matrix::<f64>(n, k, &mut rng);
        let r = crate::linalg::gaussian_matrix::<f64>(p, k, &mut rng);
        l * r.transpose()
    }

    fn noisy_data(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Seed(seed).rng();
        let scales = DMatrix::from_fn(1, p, |_, j| 1.0 / (1.0 + j as f64));
        let g = crate::linalg::gaussian_matrix::<f64>(n, p, &mut rng);
        DMatrix::from_fn(n, p, |i, j| g[(i, j)] * scales[(0, j)] * 3.0)
    }

    #[test]
    fn ols_reproduces_rows_in_the_span() {
        let r = haar_frame::<f64>(5, 2, &mut Seed(1).rng()).unwrap();
        let x = r.matrix() * DVector::from_column_slice(&[1.5, -0.7]);
        let (coef, recon) = inductive_ols(x.as_slice(), &[true; 5], &r).unwrap();
        assert!((recon - &x).norm() <= 1e-10);
        assert!((coef - r.matrix().transpose() * &x).norm() <= 1e-12);
    }

    #[test]
    fn ols_hand_example() {
        let s = 0.5f64.sqrt();
        let r = frame(3, 1, &[s, s, 0.0]);
        let (coef, recon) = inductive_ols(&[2.0, 0.0, 5.0], &[true, true, false], &r).unwrap();
        assert_abs_diff_eq!(coef[0], 2f64.sqrt(), epsilon = 1e-12);
        assert!((recon - DVector::from_column_slice(&[1.0, 1.0, 0.0])).norm() <= 1e-12);
    }

    #[test]
    fn ols_errors_and_rank_deficiency() {
        let r = frame(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            inductive_ols(&[1.0, 2.0, 3.0], &[false; 3], &r),
            Err(Error::NoObservations { .. })
        ));
        // Only the coordinate outside span(R) is observed: minimum-norm answer is zero.
        let (coef, _) = inductive_ols(&[1.0, 2.0, 3.0], &[false, false, true], &r).unwrap();
        assert_eq!(coef, DVector::zeros(2));
        // One observed coordinate for two coefficients.
        let (coef, recon) = inductive_ols(&[4.0, 2.0, 3.0], &[true, false, false], &r).unwrap();
        assert!((coef - DVector::from_column_slice(&[4.0, 0.0])).norm() <= 1e-12);
        assert_abs_diff_eq!(recon[0], 4.0, epsilon = 1e-12);
        assert!(inductive_ols(&[1.0, 2.0], &[true, true], &r).is_err());
    }

    #[test]
    fn ols_beats_perturbed_coefficients() {
        let r = haar_frame::<f64>(8, 3, &mut Seed(2).rng()).unwrap();
        let mut rng = Seed(3).rng();
        let x: Vec<f64> = crate::linalg::gaussian_matrix::<f64>(8, 1, &mut rng).iter().copied().collect();
        let omega = [true, false, true, true, false, true, true, true];
        let (coef, _) = inductive_ols(&x, &omega, &r).unwrap();
        let obs = observed_indices(omega.iter().copied());
        let resid = |c: &DVector<f64>| {
            let fit = r.matrix() * c;
            obs.iter().map(|&j| (x[j] - fit[j]).powi(2)).sum::<f64>()
        };
        let best = resid(&coef);
        for _ in 0..100 {
            let d = crate::linalg::gaussian_matrix::<f64>(3, 1, &mut rng).column(0).into_owned() * 0.1;
            assert!(resid(&(&coef + d)) >= best - 1e-12);
        }
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::<f64>::zeros(2, 3);
        let mut mask = DMatrix::from_element(2, 3, true);
        mask.row_mut(1).fill(false);
        let bad = MaskedDataset::new(vec![MaskedDomain {
            id: "a".into(),
            data: x.clone(),
            mask,
        }]);
        assert!(matches!(bad, Err(Error::NoObservations { row: 1 })));
        let shape = MaskedDataset::new(vec![MaskedDomain {
            id: "a".into(),
            data: x.clone(),
            mask: DMatrix::from_element(3, 3, true),
        }]);
        assert!(shape.is_err());
        assert!(MaskedDataset::<f64>::new(vec![]).is_err());

        let mut data = x;
        data[(0, 0)] = f64::NAN;
        let mut mask = DMatrix::from_element(2, 3, true);
        mask[(0, 0)] = false;
        assert!(MaskedDataset::new(vec![MaskedDomain {
            id: "a".into(),
            data: data.clone(),
            mask: mask.clone(),
        }])
        .is_ok());
        mask[(0, 0)] = true;
        assert!(MaskedDataset::new(vec![MaskedDomain { id: "a".into(), data, mask }]).is_err());
    }

    #[test]
    fn pooled_fit_on_full_data_attains_truncation_error() {
        let x = noisy_data(30, 6, 4);
        let data = MaskedDataset::fully_observed(vec![x.clone()]).unwrap();
        let model = fit_pool_mc(&data, 2, &McConfig::default()).unwrap();
        let s = x.clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = s.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let truncation: f64 = sv.iter().skip(2).map(|v| v * v).sum::<f64>() / 30.0;
        assert!((model.objective() - truncation).abs() <= 1e-6 * truncation);
        assert!(model.right_factor.orthonormality_defect() <= 1e-8);
    }

    #[test]
    fn duplicated_domain_matches_single_domain() {
        let x = noisy_data(20, 5, 5);
        let one = fit_pool_mc(&MaskedDataset::fully_observed(vec![x.clone()]).unwrap(), 2, &McConfig::default()).unwrap();
        let two = fit_pool_mc(
            &MaskedDataset::fully_observed(vec![x.clone(), x.clone()]).unwrap(),
            2,
            &McConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(one.objective(), two.objective(), epsilon = 1e-10);
        let d = projection_distance(&one.right_factor, &two.right_factor).unwrap();
        assert!(d < 1e-8);
    }

    /// Straight-line rank-one alternating least squares.
    fn rank_one_oracle(x: &DMatrix<f64>, mask: &Mask, l0: Vec<f64>, r0: Vec<f64>, rounds: usize) -> f64 {
        let (n, p) = x.shape();
        let (mut l, mut r) = (l0, r0);
        for _ in 0..rounds {
            for j in 0..p {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    if mask[(i, j)] {
                        num += l[i] * x[(i, j)];
                        den += l[i] * l[i];
                    }
                }
                if den > 0.0 {
                    r[j] = num / den;
                }
            }
            let c = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter_mut().for_each(|v| *v /= c);
            for i in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..p {
                    if mask[(i, j)] {
                        num += r[j] * x[(i, j)];
                        den += r[j] * r[j];
                    }
                }
                l[i] = num / den;
            }
        }
        let mut sse = 0.0;
        for i in 0..n {
            for j in 0..p {
                if mask[(i, j)] {
                    sse += (x[(i, j)] - l[i] * r[j]).powi(2);
                }
            }
        }
        sse / n as f64
    }

    #[test]
    fn tiny_instance_matches_straight_line_oracle() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, 2.1, 3.9, 1.2, -1.0, -2.2, -0.4, 0.3, 0.4, 0.9]);
        let mut mask = DMatrix::from_element(4, 3, true);
        mask[(0, 2)] = false;
        mask[(3, 1)] = false;
        let data = MaskedDataset::new(vec![MaskedDomain {
            id: "d".into(),
            data: x.clone(),
            mask: mask.clone(),
        }])
        .unwrap();
        let (ls, r) = svd_init(&data, 1).unwrap();
        let cfg = McConfig {
            max_rounds: 5000,
            tol: 0.0,
            ..McConfig::default()
        };
        let model = fit_pool_mc(&data, 1, &cfg).unwrap();
        let oracle = rank_one_oracle(&x, &mask, ls[0].column(0).iter().copied().collect(), r.column(0).iter().copied().collect(), 5000);
        assert_abs_diff_eq!(model.objective(), oracle, epsilon = 1e-10);
    }

    fn masked_domains(seed: u64, e: usize, n: usize, p: usize, frac: f64) -> MaskedDataset<f64> {
        let domains = (0..e)
            .map(|i| {
                let x = low_rank_data(n, p, 2, seed + i as u64) + noisy_data(n, p, seed + 50 + i as u64) * 0.05 * (1.0 + i as f64);
                MaskedDomain {
                    id: format!("d{i}"),
                    mask: sample_masks(n, p, frac, Seed(seed + 100 + i as u64)).unwrap(),
                    data: x,
                }
            })
            .collect();
        MaskedDataset::new(domains).unwrap()
    }

    #[test]
    fn objectives_are_monotone() {
        let data = masked_domains(7, 3, 25, 8, 0.3);
        let pool = fit_pool_mc(&data, 2, &McConfig::default()).unwrap();
        for w in pool.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let max = fit_max_mc(&data, 2, &McConfig::default()).unwrap();
        for w in max.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-4);
        }
        let worst_pool = pool.domain_errors.iter().copied().fold(0.0, f64::max);
        assert!(max.objective() <= worst_pool + 1e-6);
        assert_abs_diff_eq!(max.objective(), max.domain_errors.iter().copied().fold(0.0, f64::max), epsilon = 1e-12);
    }

    #[test]
    fn max_on_one_domain_matches_pool() {
        let data = masked_domains(11, 1, 30, 7, 0.2);
        let pool = fit_pool_mc(&data, 2, &McConfig::default()).unwrap();
        let max = fit_max_mc(&data, 2, &McConfig::default()).unwrap();
        assert!((pool.objective() - max.objective()).abs() <= 1e-4);
    }

    #[test]
    fn max_on_identical_domains_matches_pool() {
        let one = masked_domains(13, 1, 30, 7, 0.2);
        let d = &one.domains()[0];
        let twice = MaskedDataset::new(vec![d.clone(), MaskedDomain { id: "copy".into(), ..d.clone() }]).unwrap();
        let pool = fit_pool_mc(&twice, 2, &McConfig::default()).unwrap();
        let max = fit_max_mc(&twice, 2, &McConfig::default()).unwrap();
        assert!((pool.objective() - max.objective()).abs() <= 1e-3);
    }

    #[test]
    fn max_on_full_data_matches_worst_case_rcs() {
        let cfg = GenConfig {
            p: 10,
            domains: 3,
            shared_rank: 2,
            specific_rank: 3,
            seed: Seed(21),
            ..GenConfig::default()
        };
        let sources = sample_source_covariances::<f64>(&cfg).unwrap();
        let xs: Vec<DMatrix<f64>> = sources
            .covariances()
            .enumerate()
            .map(|(e, c)| sample_gaussian_rows(c, 400, Seed(300 + e as u64)).unwrap())
            .collect();
        let empirical = DomainCollection::from_covariances(
            xs.iter().map(|x| CovarianceMatrix::from_data(x).unwrap()).collect(),
        )
        .unwrap();
        let rcs = solve_wcpca(LossKind::Rcs, &empirical, 2, &SolverConfig::default()).unwrap();
        let model = fit_max_mc(&MaskedDataset::fully_observed(xs).unwrap(), 2, &McConfig::default()).unwrap();
        let d = projection_distance(&model.right_factor, &rcs.frame).unwrap();
        assert!(d < 0.05, "distance {d}, objectives {} vs {}", model.objective(), rcs.objective);
        assert!((model.objective() - rcs.objective).abs() < 1e-3 * rcs.objective.max(1.0));
    }

    #[test]
    fn unobserved_columns_are_reported() {
        let x = noisy_data(10, 4, 1);
        let mut mask = DMatrix::from_element(10, 4, true);
        mask.column_mut(2).fill(false);
        let data = MaskedDataset::new(vec![MaskedDomain { id: "a".into(), data: x, mask }]).unwrap();
        let model = fit_pool_mc(&data, 1, &McConfig::default()).unwrap();
        assert_eq!(model.unidentified_columns, vec![2]);
        let max = fit_max_mc(&data, 1, &McConfig::default()).unwrap();
        assert_eq!(max.unidentified_columns, vec![2]);
    }

    #[test]
    fn rank_and_config_errors() {
        let data = masked_domains(1, 1, 5, 4, 0.0);
        assert!(matches!(fit_pool_mc(&data, 0, &McConfig::default()), Err(Error::InvalidRank { .. })));
        assert!(matches!(fit_pool_mc(&data, 5, &McConfig::default()), Err(Error::InvalidRank { .. })));
        let bad = McConfig { max_rounds: 0, ..McConfig::default() };
        assert!(matches!(fit_max_mc(&data, 1, &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn incoherence_cases() {
        let spiked = Frame::<f64>::identity_block(8, 2).unwrap();
        assert_abs_diff_eq!(incoherence(&spiked).mu, 2.0, epsilon = 1e-12);
        let flat = frame(4, 1, &[0.5, -0.5, 0.5, 0.5]);
        assert_abs_diff_eq!(incoherence(&flat).mu, 1.0, epsilon = 1e-12);
        let h = haar_frame::<f64>(100, 2, &mut Seed(5).rng()).unwrap();
        let rep = incoherence(&h);
        let direct = (0..100).map(|i| h.matrix().row(i).norm()).fold(0.0, f64::max);
        assert_abs_diff_eq!(rep.max_row_norm, direct, epsilon = 1e-15);
        assert!(rep.mu > 1.0 && rep.mu < 50f64.sqrt());
    }

    #[test]
    fn budget_values() {
        assert_eq!(missingness_budget(500, 2, 0.1, 1.0).unwrap(), 20);
        assert_eq!(missingness_budget(24, 2, 0.1, 1.0).unwrap(), 1);
        assert_eq!(missingness_budget(500, 2, 0.1, 100.0).unwrap(), 0);
        assert!(missingness_budget(500, 2, 0.0, 1.0).is_err());
        assert!(missingness_budget(500, 2, 1.0, 1.0).is_err());
        assert!(missingness_budget(500, 2, 0.1, 0.5).is_err());
    }

    #[test]
    fn stability_trivial_cases() {
        let r = haar_frame::<f64>(50, 2, &mut Seed(8).rng()).unwrap();
        let mut rng = Seed(9).rng();
        let x: Vec<f64> = crate::linalg::gaussian_matrix::<f64>(50, 1, &mut rng).iter().copied().collect();
        let c = ols_subset_stability_check(&x, &r, &[], 0.1).unwrap();
        assert_abs_diff_eq!(c.ratio, 1.0, epsilon = 1e-12);
        assert!(c.bound_ok);

        let inside = r.matrix() * DVector::from_column_slice(&[2.0, -1.0]);
        let budget = incoherence(&r).budget(0.1).unwrap();
        let removal: Vec<usize> = (0..budget).collect();
        let c = ols_subset_stability_check(inside.as_slice(), &r, &removal, 0.1).unwrap();
        assert_eq!(c.ratio, 1.0);
        let too_many: Vec<usize> = (0..=budget).collect();
        assert!(ols_subset_stability_check(&x, &r, &too_many, 0.1).is_err());
    }

    #[test]
    fn stability_holds_on_random_instances() {
        for inst in 0..20u64 {
            let r = haar_frame::<f64>(200, 2, &mut Seed(1000 + inst).rng()).unwrap();
            let budget = incoherence(&r).budget(0.1).unwrap();
            let mut rng = Seed(2000 + inst).rng();
            let x: Vec<f64> = crate::linalg::gaussian_matrix::<f64>(200, 1, &mut rng).iter().copied().collect();
            for size in 0..=budget {
                for _ in 0..20 {
                    let removal = rand::seq::index::sample(&mut rng, 200, size).into_vec();
                    let c = ols_subset_stability_check(&x, &r, &removal, 0.1).unwrap();
                    assert!(c.bound_ok, "ratio {}", c.ratio);
                }
            }
        }
    }

    fn explicit_inductive(r: &Frame<f64>, sigma: &DMatrix<f64>, masks: &[Vec<bool>]) -> f64 {
        let p = r.p();
        let mut total = 0.0;
        for m in masks {
            // x̂ = M x with M the map from a full row to its reconstruction.
            let mut mmap = DMatrix::<f64>::zeros(p, p);
            for j in 0..p {
                let mut e = vec![0.0; p];
                e[j] = 1.0;
                let (_, recon) = inductive_ols(&e, m, r).unwrap();
                mmap.set_column(j, &recon);
            }
            let resid = DMatrix::<f64>::identity(p, p) - mmap;
            total += (&resid * sigma * resid.transpose()).trace();
        }
        total / masks.len() as f64
    }

    #[test]
    fn inductive_loss_matches_explicit_formula() {
        let p = 7;
        let sigma = {
            let g = crate::linalg::gaussian_matrix::<f64>(p, p, &mut Seed(4).rng());
            CovarianceMatrix::new(&g * g.transpose()).unwrap()
        };
        let r = haar_frame::<f64>(p, 2, &mut Seed(6).rng()).unwrap();
        let masks = random_masks(p, 2, 5, Seed(7)).unwrap();
        let loss = InductiveLoss::new(p, &masks).unwrap();
        let v = loss.value(&r, &sigma).unwrap();
        assert_abs_diff_eq!(v, explicit_inductive(&r, sigma.matrix(), &masks), epsilon = 1e-10);

        // Full masks give the projection residual.
        let full = InductiveLoss::new(p, &[vec![true; p]]).unwrap();
        let rcs = sigma.trace() - r.explained(&sigma);
        assert_abs_diff_eq!(full.value(&r, &sigma).unwrap(), rcs, epsilon = 1e-10);
    }

    #[test]
    fn inductive_gradient_matches_finite_differences() {
        let p = 6;
        let g = crate::linalg::gaussian_matrix::<f64>(p, p, &mut Seed(14).rng());
        let sigma = &g * g.transpose();
        let r = crate::linalg::gaussian_matrix::<f64>(p, 2, &mut Seed(15).rng());
        let masks = random_masks(p, 2, 3, Seed(16)).unwrap();
        let loss = InductiveLoss::<f64>::new(p, &masks).unwrap();
        let (_, grad) = loss.value_and_gradient(&r, &sigma, true).unwrap();
        let h = 1e-6;
        for i in 0..p {
            for j in 0..2 {
                let mut up = r.clone();
                up[(i, j)] += h;
                let mut dn = r.clone();
                dn[(i, j)] -= h;
                let fd = (loss.value_and_gradient(&up, &sigma, false).unwrap().0
                    - loss.value_and_gradient(&dn, &sigma, false).unwrap().0)
                    / (2.0 * h);
                assert!((fd - grad[(i, j)]).abs() <= 1e-5 * (1.0 + fd.abs()), "({i},{j}) fd {fd} vs {}", grad[(i, j)]);
            }
        }
    }

    #[test]
    fn direct_fit_with_full_masks_solves_worst_case_rcs() {
        let cfg = GenConfig {
            p: 8,
            domains: 3,
            shared_rank: 2,
            specific_rank: 2,
            seed: Seed(31),
            ..GenConfig::default()
        };
        let sources = sample_source_covariances::<f64>(&cfg).unwrap();
        let covs: Vec<_> = sources.covariances().cloned().collect();
        let loss = InductiveLoss::new(8, &[vec![true; 8]]).unwrap();
        let (_, value) = direct_inductive_fit(&loss, &covs, 2, None, &SolverConfig::default()).unwrap();
        let rcs = solve_wcpca(LossKind::Rcs, &sources, 2, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(value, rcs.objective, epsilon = 1e-4);
        let _ = sym_eigen_matrix(&covs[0].matrix().clone()).unwrap();
    }
}
