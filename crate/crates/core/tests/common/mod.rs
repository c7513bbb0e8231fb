//! Dense reference computations used as independent oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssanova::solver::{select_basis, Design, RIDGE_FACTOR};
use ssanova::{Dataset, ModelSpec, PredictorDomain};

pub fn ridged(q: &DMatrix<f64>) -> DMatrix<f64> {
    let ridge = RIDGE_FACTOR * q.trace() / q.nrows() as f64;
    q + DMatrix::identity(q.nrows(), q.nrows()) * ridge
}

/// Bordered normal-equation matrix of `‖y − Td − Kc‖² + ρ cᵀQc`.
pub fn kkt_matrix(t: &DMatrix<f64>, k: &DMatrix<f64>, q: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let m = t.ncols();
    let nq = k.ncols();
    let mut a = DMatrix::zeros(m + nq, m + nq);
    a.view_mut((0, 0), (m, m)).copy_from(&(t.transpose() * t));
    a.view_mut((0, m), (m, nq)).copy_from(&(t.transpose() * k));
    a.view_mut((m, 0), (nq, m)).copy_from(&(k.transpose() * t));
    a.view_mut((m, m), (nq, nq))
        .copy_from(&(k.transpose() * k + ridged(q) * rho));
    a
}

/// Dense solve of the bordered normal equations.
pub fn kkt_solve(
    t: &DMatrix<f64>,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    y: &DVector<f64>,
    rho: f64,
) -> (DVector<f64>, DVector<f64>) {
    let m = t.ncols();
    let a = kkt_matrix(t, k, q, rho);
    let mut rhs = DVector::zeros(a.nrows());
    rhs.rows_mut(0, m).copy_from(&(t.transpose() * y));
    rhs.rows_mut(m, k.ncols()).copy_from(&(k.transpose() * y));
    let sol = a.full_piv_lu().solve(&rhs).expect("KKT system is singular");
    (sol.rows(0, m).into_owned(), sol.rows(m, k.ncols()).into_owned())
}

/// Explicit smoothing matrix `[T K] (bordered)⁻¹ [T K]ᵀ`.
pub fn dense_hat(t: &DMatrix<f64>, k: &DMatrix<f64>, q: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let a = kkt_matrix(t, k, q, rho);
    let mut x = DMatrix::zeros(t.nrows(), t.ncols() + k.ncols());
    x.view_mut((0, 0), (t.nrows(), t.ncols())).copy_from(t);
    x.view_mut((0, t.ncols()), (t.nrows(), k.ncols())).copy_from(k);
    let inner = a.full_piv_lu().solve(&x.transpose()).expect("KKT system is singular");
    &x * inner
}

pub fn objective(
    t: &DMatrix<f64>,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    y: &DVector<f64>,
    rho: f64,
    d: &DVector<f64>,
    c: &DVector<f64>,
) -> f64 {
    let r = y - t * d - k * c;
    r.norm_squared() + rho * c.dot(&(ridged(q) * c))
}

pub fn dense_gcv(a: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let resid = y - a * y;
    let denom = (n - a.trace()) / n;
    (resid.norm_squared() / n) / (denom * denom)
}

/// Random continuous dataset on `[0,1]^d` with a smooth signal plus noise.
pub fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let y = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().enumerate().map(|(j, x)| ((j + 1) as f64 * 3.0 * x).sin()).sum();
            s + 0.3 * (rng.random::<f64>() - 0.5)
        })
        .collect();
    Dataset::new(rows, y, vec![PredictorDomain::unit(); d]).unwrap()
}

pub fn spec_for(d: usize) -> ModelSpec {
    if d == 1 {
        ModelSpec::additive(vec![PredictorDomain::unit()]).unwrap()
    } else {
        ModelSpec::two_way(vec![PredictorDomain::unit(); d]).unwrap()
    }
}

pub fn design(ds: &Dataset, spec: &ModelSpec, q: usize, seed: u64) -> Design {
    let basis = select_basis(ds.len(), q, spec.null_dim(), seed).unwrap();
    Design::new(ds, spec, &basis).unwrap()
}
