//! Penalized least squares with a random subset of kernel basis functions.
//!
//! With basis points `z_1, ..., z_q` drawn from the sample, the estimate is
//! `η(x) = Σ d_ν φ_ν(x) + Σ c_j R(z_j, x)` and `(d, c)` minimize
//!
//! ```text
//! ‖y − T d − K c‖² + nλ cᵀ Q c
//! ```
//!
//! where `K` holds `R(x_i, z_j)` and `Q` holds `R(z_j, z_k)`. The solver
//! profiles out `d` by projecting onto the orthogonal complement of `span(T)`
//! and reparameterizes `c = V Λ^{-1/2} u` from the eigendecomposition of `Q`.
//! What remains is a ridge problem whose singular value decomposition gives
//! the fitted values, `tr A` and the residual sum of squares for every `nλ`
//! in `O(q)` each, after one `O(n q²)` setup per θ.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{
    factor_kernel, null_basis_unchecked, term_kernel_unchecked, ModelSpec, SubspaceLabel,
};

/// Relative size of the ridge added to `Q` before factorization.
pub const RIDGE_FACTOR: f64 = 1e-10;

/// Row indices of the observations whose kernel sections form the basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSelection {
    indices: Vec<usize>,
    seed: u64,
}

impl BasisSelection {
    /// Every observation is a basis point.
    pub fn full(n: usize) -> Self {
        BasisSelection {
            indices: (0..n).collect(),
            seed: 0,
        }
    }

    pub fn from_indices(mut indices: Vec<usize>, seed: u64) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("basis indices must be distinct"));
        }
        Ok(BasisSelection { indices, seed })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws `q` distinct row indices uniformly from `0..n`.
///
/// `null_dim` is the null-space dimension `M` of the model the basis will be
/// used with; the selection must satisfy `M < q ≤ n`.
pub fn select_basis(n: usize, q: usize, null_dim: usize, seed: u64) -> Result<BasisSelection> {
    if q <= null_dim || q > n {
        return Err(Error::invalid(format!(
            "basis size {q} must satisfy {null_dim} < q <= {n}"
        )));
    }
    if q == n {
        return Ok(BasisSelection {
            indices: (0..n).collect(),
            seed,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = rand::seq::index::sample(&mut rng, n, q).into_vec();
    indices.sort_unstable();
    Ok(BasisSelection { indices, seed })
}

/// `round(coef · n^exponent)` clamped to `[null_dim + 1, n]`.
pub fn basis_count(n: usize, coef: f64, exponent: f64, null_dim: usize) -> usize {
    let raw = (coef * (n as f64).powf(exponent)).round() as usize;
    raw.clamp(null_dim + 1, n.max(null_dim + 1))
}

/// Smoothing parameters on the log10 scale: `nλ` and one θ per penalized term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub log10_n_lambda: f64,
    pub log10_theta: Vec<f64>,
}

impl SmoothingParams {
    pub fn new(log10_n_lambda: f64, log10_theta: Vec<f64>) -> Result<Self> {
        if !log10_n_lambda.is_finite() || log10_theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("smoothing parameters must be finite"));
        }
        Ok(SmoothingParams {
            log10_n_lambda,
            log10_theta,
        })
    }

    pub fn n_lambda(&self) -> f64 {
        10f64.powf(self.log10_n_lambda)
    }

    /// `λ` for a sample of size `n`.
    pub fn lambda(&self, n: usize) -> f64 {
        self.n_lambda() / n as f64
    }

    pub fn theta(&self) -> Vec<f64> {
        self.log10_theta.iter().map(|t| 10f64.powf(*t)).collect()
    }
}

/// Design matrices for one dataset, model and basis, kept per penalized term
/// so that θ can change without re-evaluating kernels.
#[derive(Debug, Clone)]
pub struct Design {
    t: DMatrix<f64>,
    k_parts: Vec<DMatrix<f64>>,
    q_parts: Vec<DMatrix<f64>>,
    kernel_traces: Vec<f64>,
    basis: BasisSelection,
}

impl Design {
    pub fn new(dataset: &Dataset, spec: &ModelSpec, basis: &BasisSelection) -> Result<Self> {
        if dataset.domains() != spec.domains() {
            return Err(Error::invalid("dataset domains do not match the model"));
        }
        let n = dataset.len();
        let m = spec.null_dim();
        let q = basis.len();
        if basis.indices().last().is_some_and(|&i| i >= n) {
            return Err(Error::invalid("basis index out of range for the dataset"));
        }
        if q <= m || n <= m {
            return Err(Error::invalid(format!(
                "need more than {m} observations and basis points, got n = {n}, q = {q}"
            )));
        }
        if spec.n_penalized() == 0 {
            return Err(Error::invalid("model has no penalized terms"));
        }

        let mut t = DMatrix::zeros(n, m);
        for i in 0..n {
            for (nu, v) in null_basis_unchecked(spec, dataset.row(i)).into_iter().enumerate() {
                t[(i, nu)] = v;
            }
        }

        // one n×q matrix per (predictor, label) pair, shared across terms
        let domains = spec.domains();
        let mut factors: HashMap<(usize, SubspaceLabel), DMatrix<f64>> = HashMap::new();
        for term in spec.penalized_terms() {
            for (&j, &label) in term.predictors().iter().zip(term.labels()) {
                factors.entry((j, label)).or_insert_with(|| {
                    DMatrix::from_fn(n, q, |i, col| {
                        let z = basis.indices()[col];
                        factor_kernel(&domains[j], label, dataset.row(i)[j], dataset.row(z)[j])
                    })
                });
            }
        }

        let mut k_parts = Vec::with_capacity(spec.n_penalized());
        let mut q_parts = Vec::with_capacity(spec.n_penalized());
        let mut kernel_traces = Vec::with_capacity(spec.n_penalized());
        for term in spec.penalized_terms() {
            let mut kd = DMatrix::from_element(n, q, 1.0);
            for (&j, &label) in term.predictors().iter().zip(term.labels()) {
                kd.component_mul_assign(&factors[&(j, label)]);
            }
            let qd = kd.select_rows(basis.indices());
            q_parts.push((&qd + qd.transpose()) * 0.5);
            k_parts.push(kd);
            kernel_traces.push(
                (0..n)
                    .map(|i| term_kernel_unchecked(domains, term, dataset.row(i), dataset.row(i)))
                    .sum(),
            );
        }

        Ok(Design {
            t,
            k_parts,
            q_parts,
            kernel_traces,
            basis: basis.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn null_dim(&self) -> usize {
        self.t.ncols()
    }

    pub fn n_penalized(&self) -> usize {
        self.k_parts.len()
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn k_parts(&self) -> &[DMatrix<f64>] {
        &self.k_parts
    }

    pub fn q_parts(&self) -> &[DMatrix<f64>] {
        &self.q_parts
    }

    /// `tr(R_δ)` over the sample points, one per penalized term.
    pub fn kernel_traces(&self) -> &[f64] {
        &self.kernel_traces
    }

    pub fn basis(&self) -> &BasisSelection {
        &self.basis
    }

    /// `K = Σ θ_δ K_δ` and `Q = Σ θ_δ Q_δ`.
    pub fn combine(&self, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if theta.len() != self.k_parts.len() {
            return Err(Error::invalid(format!(
                "{} θ values for {} penalized terms",
                theta.len(),
                self.k_parts.len()
            )));
        }
        if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("θ values must be positive and finite"));
        }
        let mut k = DMatrix::zeros(self.n(), self.basis.len());
        let mut q = DMatrix::zeros(self.basis.len(), self.basis.len());
        for ((kd, qd), &th) in self.k_parts.iter().zip(&self.q_parts).zip(theta) {
            k.zip_apply(kd, |a, b| *a += th * b);
            q.zip_apply(qd, |a, b| *a += th * b);
        }
        Ok((k, q))
    }

    pub fn system(&self, theta: &[f64]) -> Result<PenalizedSystem> {
        let (k, q) = self.combine(theta)?;
        PenalizedSystem::new(self.t.clone(), k, &q)
    }
}

/// `(T, K, Q)` for a dataset, model, basis and θ.
pub fn assemble(
    dataset: &Dataset,
    spec: &ModelSpec,
    basis: &BasisSelection,
    theta: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let design = Design::new(dataset, spec, basis)?;
    let (k, q) = design.combine(theta)?;
    Ok((design.t, k, q))
}

/// Factorized penalized least-squares problem for fixed `(T, K, Q)`.
///
/// Every quantity that depends on `nλ` is evaluated from the stored singular
/// values, so a search over `nλ` costs `O(q)` per point.
#[derive(Debug, Clone)]
pub struct PenalizedSystem {
    t: DMatrix<f64>,
    k: DMatrix<f64>,
    /// Orthonormal basis of `span(T)` and the triangular factor, `T = Q_T R_T`.
    t_basis: DMatrix<f64>,
    t_tri: DMatrix<f64>,
    /// `V Λ^{-1/2}` from `Q + ridge·I = V Λ Vᵀ`.
    coef_map: DMatrix<f64>,
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
}

/// Projections of one response vector onto the factorized system.
#[derive(Debug, Clone)]
pub struct Projection {
    y: DVector<f64>,
    /// `Uᵀ (I − P_T) y`.
    z: DVector<f64>,
    /// Squared norm of the part of `(I − P_T) y` outside `span(U)`.
    outside: f64,
}

impl Projection {
    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }
}

impl PenalizedSystem {
    pub fn new(t: DMatrix<f64>, k: DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let n = t.nrows();
        let m = t.ncols();
        let nq = k.ncols();
        if k.nrows() != n || q.nrows() != nq || q.ncols() != nq {
            return Err(Error::invalid(format!(
                "dimension mismatch: T {}×{}, K {}×{}, Q {}×{}",
                n,
                m,
                k.nrows(),
                k.ncols(),
                q.nrows(),
                q.ncols()
            )));
        }
        if m == 0 || m >= n {
            return Err(Error::invalid(format!("need 0 < M < n, got M = {m}, n = {n}")));
        }

        let qr = t.clone().qr();
        let t_tri = qr.r();
        let scale = t_tri.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rank = t_tri
            .diagonal()
            .iter()
            .filter(|v| v.abs() > 1e-8 * scale)
            .count();
        if rank < m {
            return Err(Error::RankDeficient { rank, expected: m });
        }
        let t_basis = qr.q();

        let q_sym = (q + q.transpose()) * 0.5;
        let trace = q_sym.trace();
        if !(trace.is_finite() && trace > 0.0) {
            return Err(Error::numerical("kernel Gram matrix at the basis points is zero"));
        }
        let ridge = RIDGE_FACTOR * trace / nq as f64;
        let eig = SymmetricEigen::new(q_sym);
        let mut coef_map = eig.eigenvectors;
        for (j, &ev) in eig.eigenvalues.iter().enumerate() {
            let scale = (ev + ridge).max(ridge).sqrt().recip();
            coef_map.column_mut(j).scale_mut(scale);
        }

        let f = &k * &coef_map;
        let g = &f - &t_basis * (t_basis.transpose() * &f);
        let svd = SVD::new(g, true, true);
        let u = svd
            .u
            .ok_or_else(|| Error::numerical("singular value decomposition failed"))?;
        let v = svd
            .v_t
            .ok_or_else(|| Error::numerical("singular value decomposition failed"))?
            .transpose();
        if svd.singular_values.iter().any(|s| !s.is_finite()) {
            return Err(Error::numerical("non-finite singular values"));
        }

        Ok(PenalizedSystem {
            t,
            k,
            t_basis,
            t_tri,
            coef_map,
            u,
            sigma: svd.singular_values,
            v,
        })
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn null_dim(&self) -> usize {
        self.t.ncols()
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Singular values of the projected, reparameterized kernel design.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn project(&self, y: &[f64]) -> Result<Projection> {
        if y.len() != self.n() {
            return Err(Error::invalid(format!(
                "response has {} values, system has {} rows",
                y.len(),
                self.n()
            )));
        }
        let y = DVector::from_column_slice(y);
        let r0 = &y - &self.t_basis * (self.t_basis.transpose() * &y);
        let z = self.u.transpose() * &r0;
        let outside = (&r0 - &self.u * &z).norm_squared();
        Ok(Projection { y, z, outside })
    }

    fn shrink(&self, n_lambda: f64) -> impl Iterator<Item = f64> + '_ {
        self.sigma.iter().map(move |s| {
            let s2 = s * s;
            if s2 + n_lambda > 0.0 {
                s2 / (s2 + n_lambda)
            } else {
                0.0
            }
        })
    }

    /// `tr A(nλ)`, the effective degrees of freedom.
    pub fn trace(&self, n_lambda: f64) -> f64 {
        self.null_dim() as f64 + self.shrink(n_lambda).sum::<f64>()
    }

    /// `‖(I − A) y‖²`.
    pub fn rss(&self, proj: &Projection, n_lambda: f64) -> f64 {
        proj.outside
            + self
                .shrink(n_lambda)
                .zip(proj.z.iter())
                .map(|(w, z)| ((1.0 - w) * z).powi(2))
                .sum::<f64>()
    }

    /// GCV score; `+∞` when `tr A ≥ n`.
    pub fn gcv(&self, proj: &Projection, n_lambda: f64) -> f64 {
        let n = self.n() as f64;
        let denom = (n - self.trace(n_lambda)) / n;
        if denom <= 1e-10 {
            return f64::INFINITY;
        }
        (self.rss(proj, n_lambda) / n) / (denom * denom)
    }

    /// Coefficients `(d, c)` at `nλ`.
    pub fn coefficients(&self, proj: &Projection, n_lambda: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        if !(n_lambda.is_finite() && n_lambda > 0.0) {
            return Err(Error::invalid(format!("nλ must be positive, got {n_lambda}")));
        }
        let scaled = DVector::from_iterator(
            self.sigma.len(),
            self.sigma
                .iter()
                .zip(proj.z.iter())
                .map(|(s, z)| s * z / (s * s + n_lambda)),
        );
        let c = &self.coef_map * (&self.v * scaled);
        let resid = &proj.y - &self.k * &c;
        let rhs = self.t_basis.transpose() * resid;
        let d = self
            .t_tri
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::numerical("null-space triangular solve failed"))?;
        if d.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite coefficients"));
        }
        Ok((d, c))
    }

    /// `T d + K c`.
    pub fn fitted(&self, d: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        &self.t * d + &self.k * c
    }

    /// `A(nλ) y` without forming coefficients.
    pub fn apply(&self, y: &[f64], n_lambda: f64) -> Result<DVector<f64>> {
        let proj = self.project(y)?;
        let w = DVector::from_iterator(
            self.sigma.len(),
            self.shrink(n_lambda).zip(proj.z.iter()).map(|(w, z)| w * z),
        );
        Ok(&self.t_basis * (self.t_basis.transpose() * &proj.y) + &self.u * w)
    }

    /// `‖(I − A) h‖²` and `tr(A²)` for a fixed vector `h`, used by the risk oracle.
    pub fn risk_terms(&self, proj: &Projection, n_lambda: f64) -> (f64, f64) {
        let bias = self.rss(proj, n_lambda);
        let tr_a2 = self.null_dim() as f64 + self.shrink(n_lambda).map(|w| w * w).sum::<f64>();
        (bias, tr_a2)
    }
}

/// Minimizer `(d, c)` of `‖y − Td − Kc‖² + nλ cᵀQc`.
pub fn solve_penalized(
    t: &DMatrix<f64>,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    y: &[f64],
    n_lambda: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let sys = PenalizedSystem::new(t.clone(), k.clone(), q)?;
    let proj = sys.project(y)?;
    sys.coefficients(&proj, n_lambda)
}

/// The smoothing map `y ↦ A(nλ) y` for a fixed system.
#[derive(Debug, Clone)]
pub struct HatMap {
    system: PenalizedSystem,
    n_lambda: f64,
}

impl HatMap {
    pub fn apply(&self, y: &[f64]) -> Result<DVector<f64>> {
        self.system.apply(y, self.n_lambda)
    }

    pub fn trace(&self) -> f64 {
        self.system.trace(self.n_lambda)
    }
}

/// `tr A(nλ)` together with the map itself.
pub fn hat_trace(
    t: &DMatrix<f64>,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    n_lambda: f64,
) -> Result<(f64, HatMap)> {
    if !(n_lambda.is_finite() && n_lambda > 0.0) {
        return Err(Error::invalid(format!("nλ must be positive, got {n_lambda}")));
    }
    let system = PenalizedSystem::new(t.clone(), k.clone(), q)?;
    let tr = system.trace(n_lambda);
    Ok((tr, HatMap { system, n_lambda }))
}

/// Simultaneous diagonalization of a full-basis problem:
/// `I − A = nλ Z (D + nλ I)^{-1} Zᵀ`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub z: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl EigenSystem {
    /// `nλ Z (D + nλ I)^{-1} Zᵀ`.
    pub fn identity_minus_hat(&self, n_lambda: f64) -> DMatrix<f64> {
        let mut scaled = self.z.clone();
        for (j, &zeta) in self.d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(n_lambda / (zeta + n_lambda));
        }
        scaled * self.z.transpose()
    }

    /// `‖(I − A) h‖²` and `tr(A²)` at `nλ`, in `O(b)` given `Zᵀh`.
    pub fn risk_terms(&self, zt_h: &DVector<f64>, null_dim: usize, n_lambda: f64) -> (f64, f64) {
        let mut bias = 0.0;
        let mut tr_a2 = null_dim as f64;
        for (&zeta, &h) in self.d.iter().zip(zt_h.iter()) {
            let shrink = n_lambda / (zeta + n_lambda);
            bias += (shrink * h).powi(2);
            tr_a2 += (1.0 - shrink).powi(2);
        }
        (bias, tr_a2)
    }
}

/// Largest sample size accepted by [`demmler_reinsch`].
pub const DEMMLER_REINSCH_MAX: usize = 2000;

pub fn demmler_reinsch(t: &DMatrix<f64>, k_full: &DMatrix<f64>) -> Result<EigenSystem> {
    let b = t.nrows();
    let m = t.ncols();
    if k_full.nrows() != b || k_full.ncols() != b {
        return Err(Error::invalid("kernel matrix must be square with one row per observation"));
    }
    if b > DEMMLER_REINSCH_MAX {
        return Err(Error::invalid(format!(
            "eigendecomposition limited to {DEMMLER_REINSCH_MAX} observations, got {b}"
        )));
    }
    if m == 0 || m >= b {
        return Err(Error::invalid("need 0 < M < b"));
    }
    let qr = t.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rank = r.diagonal().iter().filter(|v| v.abs() > 1e-8 * scale).count();
    if rank < m {
        return Err(Error::RankDeficient { rank, expected: m });
    }
    let mut q_full_t = DMatrix::identity(b, b);
    qr.q_tr_mul(&mut q_full_t);
    let complement = q_full_t.rows(m, b - m).transpose();

    let projected = complement.transpose() * k_full * &complement;
    let sym = (&projected + projected.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..b - m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let w = DMatrix::from_fn(b - m, b - m, |i, j| eig.eigenvectors[(i, order[j])]);
    let d = DVector::from_iterator(b - m, order.iter().map(|&i| eig.eigenvalues[i]));
    Ok(EigenSystem {
        z: complement * w,
        d,
    })
}

/// A fitted model: coefficients, fitted values and the parameters used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub d: Vec<f64>,
    pub c: Vec<f64>,
    pub fitted: Vec<f64>,
    pub trace_a: f64,
    pub gcv: f64,
    pub params: SmoothingParams,
    pub basis: BasisSelection,
    /// Scaled predictor rows of the basis points.
    pub basis_rows: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }
}

/// Fits the model at fixed smoothing parameters.
pub fn fit_at(design: &Design, dataset: &Dataset, params: &SmoothingParams) -> Result<FitResult> {
    let sys = design.system(&params.theta())?;
    fit_system(&sys, design, dataset, params)
}

pub(crate) fn fit_system(
    sys: &PenalizedSystem,
    design: &Design,
    dataset: &Dataset,
    params: &SmoothingParams,
) -> Result<FitResult> {
    let proj = sys.project(dataset.response())?;
    let n_lambda = params.n_lambda();
    let (d, c) = sys.coefficients(&proj, n_lambda)?;
    let fitted = sys.fitted(&d, &c);
    Ok(FitResult {
        d: d.as_slice().to_vec(),
        c: c.as_slice().to_vec(),
        fitted: fitted.as_slice().to_vec(),
        trace_a: sys.trace(n_lambda),
        gcv: sys.gcv(&proj, n_lambda),
        params: params.clone(),
        basis: design.basis().clone(),
        basis_rows: design
            .basis()
            .indices()
            .iter()
            .map(|&i| dataset.row(i).to_vec())
            .collect(),
    })
}

/// Predictions at new raw-scale rows, with a flag for rows where any
/// continuous value had to be clamped into the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    pub clamped: Vec<bool>,
}

/// Evaluates `null_basis(x)ᵀ d + Σ_j c_j Σ_δ θ_δ R_δ(z_j, x)`.
pub fn predict(fit: &FitResult, spec: &ModelSpec, new_rows: &[Vec<f64>]) -> Result<Prediction> {
    if fit.d.len() != spec.null_dim() || fit.params.log10_theta.len() != spec.n_penalized() {
        return Err(Error::invalid("fit does not match the model specification"));
    }
    if fit.c.len() != fit.basis_rows.len() {
        return Err(Error::invalid("fit has inconsistent basis coefficients"));
    }
    let theta = fit.params.theta();
    let domains = spec.domains();
    let mut values = Vec::with_capacity(new_rows.len());
    let mut clamped = Vec::with_capacity(new_rows.len());
    for (i, raw) in new_rows.iter().enumerate() {
        if raw.len() != domains.len() {
            return Err(Error::invalid(format!(
                "row {} has {} values, model expects {}",
                i + 1,
                raw.len(),
                domains.len()
            )));
        }
        let mut flagged = false;
        let mut row = Vec::with_capacity(raw.len());
        for (&v, dom) in raw.iter().zip(domains) {
            let (s, c) = dom.scale(v)?;
            flagged |= c;
            row.push(s);
        }
        if flagged {
            log::warn!("row {}: predictor outside the training range was clamped", i + 1);
        }
        let phi = null_basis_unchecked(spec, &row);
        let mut eta: f64 = phi.iter().zip(&fit.d).map(|(a, b)| a * b).sum();
        for (z, cj) in fit.basis_rows.iter().zip(&fit.c) {
            let r: f64 = spec
                .penalized_terms()
                .iter()
                .zip(&theta)
                .map(|(term, th)| th * term_kernel_unchecked(domains, term, z, &row))
                .sum();
            eta += cj * r;
        }
        values.push(eta);
        clamped.push(flagged);
    }
    Ok(Prediction { values, clamped })
}
