mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssanova::solver::{
    assemble, basis_count, demmler_reinsch, fit_at, hat_trace, predict, select_basis,
    solve_penalized, BasisSelection, Design, PenalizedSystem, SmoothingParams,
};
use ssanova::{Dataset, Error, ModelSpec, PredictorDomain};

#[test]
fn full_basis_q_equals_square_kernel() {
    let ds = random_dataset(25, 2, 1);
    let spec = spec_for(2);
    let theta = [1.0, 0.5, 2.0, 0.1, 3.0];
    let (_, k, q) = assemble(&ds, &spec, &BasisSelection::full(25), &theta).unwrap();
    assert_eq!(k, q);
}

#[test]
fn null_design_column_is_k1() {
    let ds = Dataset::new(
        vec![vec![0.0], vec![0.5], vec![1.0]],
        vec![0.0, 1.0, 0.0],
        vec![PredictorDomain::unit()],
    )
    .unwrap();
    let spec = spec_for(1);
    let (t, _, _) = assemble(&ds, &spec, &BasisSelection::full(3), &[1.0]).unwrap();
    assert_eq!(t.column(1).as_slice(), &[-0.5, 0.0, 0.5]);
}

#[test]
fn kernel_matrices_are_linear_in_theta() {
    let ds = random_dataset(40, 2, 2);
    let spec = spec_for(2);
    let basis = select_basis(40, 20, spec.null_dim(), 3).unwrap();
    let theta = [0.3, 1.0, 2.5, 0.7, 1.1];
    let doubled: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
    let (_, k1, q1) = assemble(&ds, &spec, &basis, &theta).unwrap();
    let (_, k2, q2) = assemble(&ds, &spec, &basis, &doubled).unwrap();
    assert_eq!(k1 * 2.0, k2);
    assert_eq!(q1 * 2.0, q2);
}

#[test]
fn constant_predictor_is_rank_deficient() {
    let rows = (0..10).map(|i| vec![i as f64 / 9.0, 0.4]).collect();
    let ds = Dataset::new(rows, (0..10).map(|i| i as f64).collect(), vec![PredictorDomain::unit(); 2]).unwrap();
    let spec = ModelSpec::additive(vec![PredictorDomain::unit(); 2]).unwrap();
    let design = Design::new(&ds, &spec, &BasisSelection::full(10)).unwrap();
    assert!(matches!(design.system(&[1.0, 1.0]), Err(Error::RankDeficient { rank: 2, expected: 3 })));
}

#[test]
fn basis_selection_rules() {
    assert_eq!(select_basis(100, 100, 2, 9).unwrap().indices(), (0..100).collect::<Vec<_>>().as_slice());
    let q = basis_count(1_000_000, 10.0, 2.0 / 9.0, 2);
    assert_eq!(q, 215);
    let big = select_basis(1_000_000, q, 2, 5).unwrap();
    assert_eq!(big.len(), 215);
    assert!(big.indices().windows(2).all(|w| w[0] < w[1]));
    assert_eq!(big, select_basis(1_000_000, q, 2, 5).unwrap());
    assert_ne!(big, select_basis(1_000_000, q, 2, 6).unwrap());
    assert!(select_basis(10, 11, 2, 0).is_err());
    assert!(select_basis(10, 2, 2, 0).is_err());
}

#[test]
fn parametric_response_is_reproduced_exactly() {
    let ds = random_dataset(30, 2, 4);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 15, 1);
    let (k, q) = design.combine(&[1.0; 5]).unwrap();
    let d0 = DVector::from_vec(vec![1.5, -2.0, 0.5, 3.0]);
    let y = design.t() * &d0;
    for rho in [1e-6, 1e-2, 10.0] {
        let (d, c) = solve_penalized(design.t(), &k, &q, y.as_slice(), rho).unwrap();
        assert!((d - &d0).amax() < 1e-9);
        assert!(c.amax() < 1e-9);
    }
}

#[test]
fn heavy_penalty_tends_to_least_squares_on_t() {
    let ds = random_dataset(50, 2, 5);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 20, 2);
    let (k, q) = design.combine(&[1.0; 5]).unwrap();
    let y = DVector::from_column_slice(ds.response());
    let (d, c) = solve_penalized(design.t(), &k, &q, y.as_slice(), 1e12).unwrap();
    let t = design.t();
    let ls = (t.transpose() * t).cholesky().unwrap().solve(&(t.transpose() * &y));
    assert!((d - ls).amax() < 1e-4);
    assert!(c.amax() < 1e-4);
}

#[test]
fn objective_matches_dense_kkt() {
    for seed in 0..5u64 {
        let d = 1 + (seed as usize % 2);
        let ds = random_dataset(30, d, 100 + seed);
        let spec = spec_for(d);
        let design = Design::new(&ds, &spec, &BasisSelection::full(30)).unwrap();
        let theta: Vec<f64> = (0..spec.n_penalized()).map(|i| 1.0 + i as f64).collect();
        let (k, q) = design.combine(&theta).unwrap();
        let y = DVector::from_column_slice(ds.response());
        let rho = 1e-3;
        let (dd, cc) = solve_penalized(design.t(), &k, &q, y.as_slice(), rho).unwrap();
        let (d0, c0) = kkt_solve(design.t(), &k, &q, &y, rho);
        let ours = objective(design.t(), &k, &q, &y, rho, &dd, &cc);
        let brute = objective(design.t(), &k, &q, &y, rho, &d0, &c0);
        assert!((ours - brute).abs() <= 1e-8 * brute, "{ours} vs {brute}");
    }
}

#[test]
fn objective_is_not_beaten_by_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ds = random_dataset(40, 2, 6);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 18, 3);
    let (k, q) = design.combine(&[1.0, 0.2, 0.3, 0.4, 2.0]).unwrap();
    let y = DVector::from_column_slice(ds.response());
    let rho = 1e-2;
    let (d, c) = solve_penalized(design.t(), &k, &q, y.as_slice(), rho).unwrap();
    let best = objective(design.t(), &k, &q, &y, rho, &d, &c);
    for _ in 0..100 {
        let scale = 10f64.powf(rng.random_range(-6.0..-1.0));
        let dp = d.map(|v| v + scale * (rng.random::<f64>() - 0.5));
        let cp = c.map(|v| v + scale * (rng.random::<f64>() - 0.5));
        assert!(best <= objective(design.t(), &k, &q, &y, rho, &dp, &cp) + 1e-8);
    }
}

#[test]
fn heavy_penalty_trace_tends_to_null_dim() {
    let ds = random_dataset(60, 2, 7);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 25, 4);
    let (k, q) = design.combine(&[1.0; 5]).unwrap();
    let (tr, _) = hat_trace(design.t(), &k, &q, 1e12).unwrap();
    assert!((tr - 4.0).abs() < 1e-3, "trace {tr}");
}

#[test]
fn trace_matches_dense_hat_and_decreases() {
    let ds = random_dataset(40, 1, 8);
    let spec = spec_for(1);
    let design = Design::new(&ds, &spec, &BasisSelection::full(40)).unwrap();
    let (k, q) = design.combine(&[1.0]).unwrap();
    let mut last = f64::INFINITY;
    for i in 0..10 {
        let rho = 10f64.powf(-7.0 + 0.6 * i as f64);
        let (tr, map) = hat_trace(design.t(), &k, &q, rho).unwrap();
        assert!(tr < last);
        last = tr;
        // the bordered normal equations square the condition number of K, so
        // the dense oracle is only trusted away from interpolation
        if rho < 1e-5 {
            continue;
        }
        let dense = dense_hat(design.t(), &k, &q, rho);
        assert!((tr - dense.trace()).abs() <= 1e-8 * tr, "ρ = {rho}: {tr} vs {}", dense.trace());
        let y = DVector::from_column_slice(ds.response());
        assert!((map.apply(y.as_slice()).unwrap() - &dense * &y).amax() < 1e-8);
    }
}

#[test]
fn hat_map_is_linear() {
    let ds = random_dataset(35, 2, 9);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 20, 5);
    let (k, q) = design.combine(&[1.0; 5]).unwrap();
    let (_, map) = hat_trace(design.t(), &k, &q, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y1: Vec<f64> = (0..35).map(|_| rng.random()).collect();
    let y2: Vec<f64> = (0..35).map(|_| rng.random()).collect();
    let alpha = -2.7;
    let combo: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| alpha * a + b).collect();
    let lhs = map.apply(&combo).unwrap();
    let rhs = map.apply(&y1).unwrap() * alpha + map.apply(&y2).unwrap();
    assert!((lhs - rhs).amax() < 1e-10);
}

#[test]
fn full_basis_matches_square_system() {
    // with q = n the reduced problem is the square representer system
    let ds = random_dataset(45, 2, 10);
    let spec = spec_for(2);
    let design = Design::new(&ds, &spec, &BasisSelection::full(45)).unwrap();
    let (k, _) = design.combine(&[1.0; 5]).unwrap();
    let y = DVector::from_column_slice(ds.response());
    let rho = 1e-3;
    let fitted = PenalizedSystem::new(design.t().clone(), k.clone(), &k).unwrap().apply(y.as_slice(), rho).unwrap();
    // square system: (K + ρI)c + Td = y, Tᵀc = 0
    let n = 45;
    let m = 4;
    let mut a = DMatrix::zeros(n + m, n + m);
    a.view_mut((0, 0), (n, n)).copy_from(&(&k + DMatrix::identity(n, n) * rho));
    a.view_mut((0, n), (n, m)).copy_from(design.t());
    a.view_mut((n, 0), (m, n)).copy_from(&design.t().transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&y);
    let sol = a.full_piv_lu().solve(&rhs).unwrap();
    let c = sol.rows(0, n).into_owned();
    let d = sol.rows(n, m).into_owned();
    let square = design.t() * d + &k * c;
    assert!((fitted - square).amax() < 1e-8);
}

#[test]
fn demmler_reinsch_reproduces_hat_matrix() {
    let ds = random_dataset(50, 1, 11);
    let spec = spec_for(1);
    let design = Design::new(&ds, &spec, &BasisSelection::full(50)).unwrap();
    let (k, q) = design.combine(&[1.0]).unwrap();
    let eig = demmler_reinsch(design.t(), &k).unwrap();
    let ztz = eig.z.transpose() * &eig.z;
    assert!((ztz - DMatrix::identity(48, 48)).amax() < 1e-10);
    assert!((eig.z.transpose() * design.t()).amax() < 1e-10);
    let top = eig.d.max();
    assert!(eig.d.iter().all(|&z| z >= -1e-8 * top));
    let n = 50;
    for lambda in [1e-6, 1e-3, 1e-1] {
        let rho = n as f64 * lambda;
        let (_, map) = hat_trace(design.t(), &k, &q, rho).unwrap();
        let mut imh = DMatrix::identity(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = map.apply(&e).unwrap();
            for i in 0..n {
                imh[(i, j)] -= col[i];
            }
        }
        let diff = (imh - eig.identity_minus_hat(rho)).amax();
        let (tr, _) = hat_trace(design.t(), &k, &q, rho).unwrap();
        let dr_trace = n as f64 - eig.identity_minus_hat(rho).trace();
        assert!((tr - dr_trace).abs() <= 1e-6 * tr, "λ = {lambda}: {tr} vs {dr_trace}");
        assert!(diff <= 1e-6, "λ = {lambda}: {diff}");
    }
}

#[test]
fn demmler_reinsch_rejects_rank_deficient_t() {
    let t = DMatrix::from_fn(10, 2, |_, _| 1.0);
    let k = DMatrix::identity(10, 10);
    assert!(matches!(demmler_reinsch(&t, &k), Err(Error::RankDeficient { .. })));
}

#[test]
fn prediction_reproduces_fitted_values() {
    let ds = random_dataset(80, 2, 12);
    let spec = spec_for(2);
    let design = design(&ds, &spec, 30, 6);
    let params = SmoothingParams::new(-3.0, vec![0.0, -0.5, -1.0, -0.2, 0.3]).unwrap();
    let fit = fit_at(&design, &ds, &params).unwrap();
    let rows: Vec<Vec<f64>> = (0..80).map(|i| ds.row(i).to_vec()).collect();
    let pred = predict(&fit, &spec, &rows).unwrap();
    for (p, f) in pred.values.iter().zip(&fit.fitted) {
        assert!((p - f).abs() < 1e-10);
    }
    assert!(pred.clamped.iter().all(|c| !c));

    let mut parametric = fit.clone();
    parametric.c.iter_mut().for_each(|c| *c = 0.0);
    let p = predict(&parametric, &spec, &rows[..3]).unwrap();
    for (i, v) in p.values.iter().enumerate() {
        let t: f64 = design.t().row(i).iter().zip(&fit.d).map(|(a, b)| a * b).sum();
        assert!((v - t).abs() < 1e-12);
    }

    let out = predict(&fit, &spec, &[vec![1.3, 0.5], vec![0.2, -0.1]]).unwrap();
    assert_eq!(out.clamped, vec![true, true]);
    let edge = predict(&fit, &spec, &[vec![1.0, 0.5]]).unwrap();
    assert!((out.values[0] - edge.values[0]).abs() < 1e-14);
}

#[test]
fn fits_are_reproducible() {
    let ds = random_dataset(60, 2, 13);
    let spec = spec_for(2);
    let params = SmoothingParams::new(-2.0, vec![0.0; 5]).unwrap();
    let a = fit_at(&design(&ds, &spec, 20, 99), &ds, &params).unwrap();
    let b = fit_at(&design(&ds, &spec, 20, 99), &ds, &params).unwrap();
    assert_eq!(a, b);
}
