//! Reproducing kernels for tensor-product cubic smoothing splines.
//!
//! Each predictor contributes one factor to every ANOVA term. Continuous
//! predictors live on `[0, 1]` and split into a constant part (`00`), a linear
//! part spanned by `k1` (`01`) and a smooth part with kernel
//! `k2(x)k2(y) - k4(|x - y|)` (`1`). Discrete predictors on `{1, ..., K}` split
//! into a constant part (`0`) and a contrast part with kernel
//! `I(x = y) - 1/K` (`1`).
//!
//! A term whose factors are all constant or linear is unpenalized and becomes
//! a column of the null-space design matrix; every other term owns one
//! smoothing parameter θ.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scaled Bernoulli polynomial of order one.
#[inline]
pub fn k1(t: f64) -> f64 {
    t - 0.5
}

/// Scaled Bernoulli polynomial of order two.
#[inline]
pub fn k2(t: f64) -> f64 {
    let a = k1(t);
    (a * a - 1.0 / 12.0) / 2.0
}

/// Scaled Bernoulli polynomial of order four.
#[inline]
pub fn k4(t: f64) -> f64 {
    let a = k1(t);
    let a2 = a * a;
    (a2 * a2 - a2 / 2.0 + 7.0 / 240.0) / 24.0
}

fn check_unit(t: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} = {t} lies outside [0, 1]; continuous inputs must be rescaled first"
        )))
    }
}

/// Evaluates `k_order(t)` for `order` in `{1, 2, 4}`.
pub fn eval_bernoulli(order: u32, t: f64) -> Result<f64> {
    check_unit(t, "t")?;
    match order {
        1 => Ok(k1(t)),
        2 => Ok(k2(t)),
        4 => Ok(k4(t)),
        _ => Err(Error::invalid(format!(
            "scaled Bernoulli order must be 1, 2 or 4, got {order}"
        ))),
    }
}

/// Which piece of a predictor's one-dimensional decomposition a term uses.
///
/// `Constant` is `00` for continuous predictors and `0` for discrete ones;
/// `Linear` (`01`) only exists for continuous predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubspaceLabel {
    Constant,
    Linear,
    Smooth,
}

impl SubspaceLabel {
    pub fn code(self, domain: &PredictorDomain) -> &'static str {
        match (self, domain.is_discrete()) {
            (SubspaceLabel::Constant, false) => "00",
            (SubspaceLabel::Linear, _) => "01",
            (SubspaceLabel::Smooth, _) => "1",
            (SubspaceLabel::Constant, true) => "0",
        }
    }
}

/// Domain of a single predictor.
///
/// Continuous domains remember the raw-scale range used to map observations
/// onto `[0, 1]`; discrete domains hold the number of levels, coded `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorDomain {
    Continuous { min: f64, max: f64 },
    Discrete { levels: usize },
}

impl PredictorDomain {
    pub fn continuous(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::invalid(format!(
                "continuous domain needs finite min < max, got [{min}, {max}]"
            )));
        }
        Ok(PredictorDomain::Continuous { min, max })
    }

    pub fn discrete(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid(format!(
                "discrete domain needs at least 2 levels, got {levels}"
            )));
        }
        Ok(PredictorDomain::Discrete { levels })
    }

    /// The unit interval, for data already on the kernel scale.
    pub fn unit() -> Self {
        PredictorDomain::Continuous { min: 0.0, max: 1.0 }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, PredictorDomain::Discrete { .. })
    }

    /// Labels a term may assign to this predictor when it is involved.
    pub fn term_labels(&self) -> &'static [SubspaceLabel] {
        match self {
            PredictorDomain::Continuous { .. } => &[SubspaceLabel::Linear, SubspaceLabel::Smooth],
            PredictorDomain::Discrete { .. } => &[SubspaceLabel::Smooth],
        }
    }

    /// Maps a raw value to the kernel scale. Continuous values outside the
    /// stored range are clamped and reported through the flag.
    pub fn scale(&self, raw: f64) -> Result<(f64, bool)> {
        if !raw.is_finite() {
            return Err(Error::Domain(format!("non-finite predictor value {raw}")));
        }
        match *self {
            PredictorDomain::Continuous { min, max } => {
                let t = (raw - min) / (max - min);
                if t < 0.0 {
                    Ok((0.0, true))
                } else if t > 1.0 {
                    Ok((1.0, true))
                } else {
                    Ok((t, false))
                }
            }
            PredictorDomain::Discrete { levels } => {
                check_level(raw, levels)?;
                Ok((raw, false))
            }
        }
    }

    /// Checks that an already-scaled value conforms to the domain.
    pub fn check_scaled(&self, value: f64) -> Result<()> {
        match *self {
            PredictorDomain::Continuous { .. } => check_unit(value, "predictor value"),
            PredictorDomain::Discrete { levels } => check_level(value, levels).map(|_| ()),
        }
    }
}

fn check_level(value: f64, levels: usize) -> Result<usize> {
    if value.fract() == 0.0 && value >= 1.0 && value <= levels as f64 {
        Ok(value as usize)
    } else {
        Err(Error::Domain(format!(
            "level {value} is not an integer in 1..={levels}"
        )))
    }
}

/// Kernel of the linear (`01`) or smooth (`1`) part of a cubic spline on `[0, 1]`.
pub fn cubic_kernel_part(label: SubspaceLabel, x: f64, x2: f64) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(x2, "x2")?;
    match label {
        SubspaceLabel::Linear | SubspaceLabel::Smooth => Ok(cubic_factor(label, x, x2)),
        SubspaceLabel::Constant => Err(Error::invalid(
            "cubic kernel parts are defined for labels 01 and 1",
        )),
    }
}

/// Kernel of the constant (`0`) or contrast (`1`) part on `{1, ..., K}`.
pub fn discrete_kernel_part(label: SubspaceLabel, levels: usize, x: usize, x2: usize) -> Result<f64> {
    if levels < 2 {
        return Err(Error::invalid(format!("K must be at least 2, got {levels}")));
    }
    for v in [x, x2] {
        if v < 1 || v > levels {
            return Err(Error::Domain(format!("level {v} outside 1..={levels}")));
        }
    }
    match label {
        SubspaceLabel::Constant => Ok(1.0 / levels as f64),
        SubspaceLabel::Smooth => Ok(discrete_factor(levels, x as f64, x2 as f64)),
        SubspaceLabel::Linear => Err(Error::invalid(
            "discrete kernel parts are defined for labels 0 and 1",
        )),
    }
}

#[inline]
pub(crate) fn cubic_factor(label: SubspaceLabel, x: f64, x2: f64) -> f64 {
    match label {
        SubspaceLabel::Constant => 1.0,
        SubspaceLabel::Linear => k1(x) * k1(x2),
        SubspaceLabel::Smooth => k2(x) * k2(x2) - k4((x - x2).abs()),
    }
}

#[inline]
pub(crate) fn discrete_factor(levels: usize, x: f64, x2: f64) -> f64 {
    let same = if x == x2 { 1.0 } else { 0.0 };
    same - 1.0 / levels as f64
}

/// Factor kernel of one predictor inside a penalized term.
#[inline]
pub(crate) fn factor_kernel(domain: &PredictorDomain, label: SubspaceLabel, x: f64, x2: f64) -> f64 {
    match *domain {
        PredictorDomain::Continuous { .. } => cubic_factor(label, x, x2),
        PredictorDomain::Discrete { levels } => match label {
            SubspaceLabel::Constant => 1.0 / levels as f64,
            _ => discrete_factor(levels, x, x2),
        },
    }
}

/// One tensor-product ANOVA term: a set of predictors and a subspace label for each.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnovaTerm {
    predictors: Vec<usize>,
    labels: Vec<SubspaceLabel>,
}

impl AnovaTerm {
    pub fn new(predictors: Vec<usize>, labels: Vec<SubspaceLabel>) -> Result<Self> {
        if predictors.is_empty() || predictors.len() != labels.len() {
            return Err(Error::invalid(
                "a term needs one label per involved predictor and at least one predictor",
            ));
        }
        if predictors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("term predictor indices must be strictly increasing"));
        }
        Ok(AnovaTerm { predictors, labels })
    }

    pub fn predictors(&self) -> &[usize] {
        &self.predictors
    }

    pub fn labels(&self) -> &[SubspaceLabel] {
        &self.labels
    }

    pub fn is_penalized(&self) -> bool {
        self.labels.contains(&SubspaceLabel::Smooth)
    }

    pub fn describe(&self, domains: &[PredictorDomain]) -> String {
        self.predictors
            .iter()
            .zip(&self.labels)
            .map(|(&j, l)| format!("{}<{}>", l.code(&domains[j]), j + 1))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A main effect or interaction: the sorted set of predictors it involves.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Effect(Vec<usize>);

impl Effect {
    pub fn new(mut predictors: Vec<usize>) -> Result<Self> {
        if predictors.is_empty() {
            return Err(Error::invalid("an effect must involve at least one predictor"));
        }
        predictors.sort_unstable();
        if predictors.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "predictor repeated within effect {predictors:?}"
            )));
        }
        Ok(Effect(predictors))
    }

    pub fn predictors(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| (j + 1).to_string()).collect();
        f.write_str(&parts.join(":"))
    }
}

/// An expanded SS-ANOVA model: null-space functions and penalized terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    domains: Vec<PredictorDomain>,
    effects: Vec<Effect>,
    /// Non-constant null-space functions; the constant is implicit and always first.
    null_terms: Vec<AnovaTerm>,
    penalized: Vec<AnovaTerm>,
}

impl ModelSpec {
    pub fn domains(&self) -> &[PredictorDomain] {
        &self.domains
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    /// Dimension of the null space, including the constant.
    pub fn null_dim(&self) -> usize {
        1 + self.null_terms.len()
    }

    /// Number of penalized terms, each with its own θ.
    pub fn n_penalized(&self) -> usize {
        self.penalized.len()
    }

    pub fn null_terms(&self) -> &[AnovaTerm] {
        &self.null_terms
    }

    pub fn penalized_terms(&self) -> &[AnovaTerm] {
        &self.penalized
    }

    pub fn n_predictors(&self) -> usize {
        self.domains.len()
    }

    pub fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.domains.len() {
            return Err(Error::invalid(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.domains.len()
            )));
        }
        for (v, dom) in row.iter().zip(&self.domains) {
            dom.check_scaled(*v)?;
        }
        Ok(())
    }

    /// Full two-way model over all predictors: every main effect and every pair.
    pub fn two_way(domains: Vec<PredictorDomain>) -> Result<Self> {
        let d = domains.len();
        let mut effects = Vec::new();
        for j in 0..d {
            effects.push(vec![j]);
        }
        for j in 0..d {
            for k in j + 1..d {
                effects.push(vec![j, k]);
            }
        }
        enumerate_terms(&effects, domains)
    }

    /// Additive model: one main effect per predictor.
    pub fn additive(domains: Vec<PredictorDomain>) -> Result<Self> {
        let effects: Vec<Vec<usize>> = (0..domains.len()).map(|j| vec![j]).collect();
        enumerate_terms(&effects, domains)
    }
}

/// Expands requested effects into null-space functions and penalized terms.
///
/// Each effect contributes every combination of its predictors' labels. A
/// combination without a smooth factor goes to the null space; the rest are
/// penalized. Both lists are sorted by involved predictors, then labels.
pub fn enumerate_terms(effects: &[Vec<usize>], domains: Vec<PredictorDomain>) -> Result<ModelSpec> {
    if domains.is_empty() {
        return Err(Error::invalid("model needs at least one predictor"));
    }
    let mut seen = BTreeSet::new();
    let mut parsed = Vec::with_capacity(effects.len());
    for e in effects {
        let effect = Effect::new(e.clone())?;
        if let Some(&bad) = effect.predictors().iter().find(|&&j| j >= domains.len()) {
            return Err(Error::invalid(format!(
                "effect {effect} references predictor {} but there are {}",
                bad + 1,
                domains.len()
            )));
        }
        if !seen.insert(effect.clone()) {
            return Err(Error::invalid(format!("effect {effect} listed more than once")));
        }
        parsed.push(effect);
    }
    if parsed.is_empty() {
        return Err(Error::invalid("model needs at least one effect"));
    }

    let mut null_terms = Vec::new();
    let mut penalized = Vec::new();
    for effect in &parsed {
        let preds = effect.predictors();
        let options: Vec<&[SubspaceLabel]> = preds.iter().map(|&j| domains[j].term_labels()).collect();
        let combos: usize = options.iter().map(|o| o.len()).product();
        for mut code in 0..combos {
            let mut labels = vec![SubspaceLabel::Constant; preds.len()];
            for (slot, opts) in labels.iter_mut().zip(&options).rev() {
                *slot = opts[code % opts.len()];
                code /= opts.len();
            }
            let term = AnovaTerm::new(preds.to_vec(), labels)?;
            if term.is_penalized() {
                penalized.push(term);
            } else {
                null_terms.push(term);
            }
        }
    }
    // null functions by interaction order, so mains precede their products
    null_terms.sort_by(|a, b| {
        (a.predictors.len(), a).cmp(&(b.predictors.len(), b))
    });
    penalized.sort();
    parsed.sort();
    Ok(ModelSpec {
        domains,
        effects: parsed,
        null_terms,
        penalized,
    })
}

/// Kernel of one penalized term between two scaled rows.
pub fn term_kernel(spec: &ModelSpec, term: &AnovaTerm, row: &[f64], row2: &[f64]) -> Result<f64> {
    if !term.is_penalized() {
        return Err(Error::invalid(
            "term has no smooth factor; evaluate it through null_basis",
        ));
    }
    spec.check_row(row)?;
    spec.check_row(row2)?;
    Ok(term_kernel_unchecked(spec.domains(), term, row, row2))
}

#[inline]
pub(crate) fn term_kernel_unchecked(
    domains: &[PredictorDomain],
    term: &AnovaTerm,
    row: &[f64],
    row2: &[f64],
) -> f64 {
    term.predictors
        .iter()
        .zip(&term.labels)
        .map(|(&j, &l)| factor_kernel(&domains[j], l, row[j], row2[j]))
        .product()
}

/// Null-space function of a non-penalized term: a product of `k1` factors.
#[inline]
pub(crate) fn null_function(term: &AnovaTerm, row: &[f64]) -> f64 {
    term.predictors.iter().map(|&j| k1(row[j])).product()
}

/// Evaluates all null-space basis functions at a row; the constant comes first.
pub fn null_basis(spec: &ModelSpec, row: &[f64]) -> Result<Vec<f64>> {
    spec.check_row(row)?;
    Ok(null_basis_unchecked(spec, row))
}

pub(crate) fn null_basis_unchecked(spec: &ModelSpec, row: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.null_dim());
    out.push(1.0);
    out.extend(spec.null_terms.iter().map(|t| null_function(t, row)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use SubspaceLabel::*;

    fn unit(d: usize) -> Vec<PredictorDomain> {
        vec![PredictorDomain::unit(); d]
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(eval_bernoulli(1, 0.5).unwrap(), 0.0);
        assert_relative_eq!(eval_bernoulli(2, 0.0).unwrap(), 1.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(eval_bernoulli(4, 0.0).unwrap(), -1.0 / 720.0, epsilon = 1e-15);
        assert!(eval_bernoulli(3, 0.2).is_err());
        assert!(matches!(eval_bernoulli(2, 1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn cubic_parts() {
        assert_relative_eq!(cubic_kernel_part(Linear, 0.0, 1.0).unwrap(), -0.25);
        assert_relative_eq!(cubic_kernel_part(Smooth, 0.0, 0.0).unwrap(), 1.0 / 120.0, epsilon = 1e-15);
        for x2 in [0.0, 0.3, 1.0] {
            assert_eq!(cubic_kernel_part(Linear, 0.5, x2).unwrap(), 0.0);
        }
        assert!(cubic_kernel_part(Smooth, -0.1, 0.2).is_err());
        assert!(cubic_kernel_part(Constant, 0.1, 0.2).is_err());
    }

    #[test]
    fn discrete_parts() {
        assert_eq!(discrete_kernel_part(Smooth, 2, 1, 1).unwrap(), 0.5);
        assert_eq!(discrete_kernel_part(Smooth, 2, 1, 2).unwrap(), -0.5);
        assert_eq!(discrete_kernel_part(Constant, 4, 3, 1).unwrap(), 0.25);
        assert!(discrete_kernel_part(Smooth, 3, 4, 1).is_err());
        assert!(discrete_kernel_part(Smooth, 3, 0, 1).is_err());
    }

    #[test]
    fn term_kernel_examples() {
        let spec = ModelSpec::two_way(unit(2)).unwrap();
        let term = AnovaTerm::new(vec![0, 1], vec![Smooth, Linear]).unwrap();
        let v = term_kernel(&spec, &term, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(v, (1.0 / 120.0) * -0.25, epsilon = 1e-15);

        let main = AnovaTerm::new(vec![0], vec![Smooth]).unwrap();
        let diag = term_kernel(&spec, &main, &[0.3, 0.9], &[0.3, 0.1]).unwrap();
        assert_relative_eq!(diag, k2(0.3).powi(2) - k4(0.0), epsilon = 1e-15);
        assert!(diag > 0.0);

        let zeroed = term_kernel(&spec, &term, &[0.2, 0.5], &[0.7, 0.9]).unwrap();
        assert_eq!(zeroed, 0.0);

        let null = AnovaTerm::new(vec![0], vec![Linear]).unwrap();
        assert!(term_kernel(&spec, &null, &[0.1, 0.1], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn null_basis_examples() {
        let spec = ModelSpec::two_way(unit(2)).unwrap();
        assert_eq!(null_basis(&spec, &[0.5, 0.5]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(null_basis(&spec, &[0.0, 1.0]).unwrap(), vec![1.0, -0.5, 0.5, -0.25]);
        let one = ModelSpec::additive(unit(1)).unwrap();
        assert_eq!(null_basis(&one, &[0.77]).unwrap().len(), 2);
        assert!(null_basis(&spec, &[0.5]).is_err());
    }

    #[test]
    fn term_counts() {
        let two = ModelSpec::two_way(unit(2)).unwrap();
        assert_eq!((two.null_dim(), two.n_penalized()), (4, 5));
        let add = ModelSpec::additive(unit(3)).unwrap();
        assert_eq!((add.null_dim(), add.n_penalized()), (4, 3));
        for d in 2..=4 {
            let s = ModelSpec::two_way(unit(d)).unwrap().n_penalized();
            assert_eq!(s, d + 3 * d * (d - 1) / 2);
        }
    }

    #[test]
    fn term_ordering_is_lexicographic() {
        let spec = ModelSpec::two_way(unit(2)).unwrap();
        let described: Vec<String> = spec
            .penalized_terms()
            .iter()
            .map(|t| t.describe(spec.domains()))
            .collect();
        assert_eq!(described, ["1<1>", "01<1>,1<2>", "1<1>,01<2>", "1<1>,1<2>", "1<2>"]);
        let again = ModelSpec::two_way(unit(2)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn discrete_predictor_terms() {
        let doms = vec![PredictorDomain::discrete(3).unwrap(), PredictorDomain::unit()];
        let spec = enumerate_terms(&[vec![0], vec![1], vec![0, 1]], doms).unwrap();
        // constant + k1(x2); the discrete factor is entirely penalized
        assert_eq!(spec.null_dim(), 2);
        // 1<1>, 1<2>, {1<1>,01<2>}, {1<1>,1<2>}
        assert_eq!(spec.n_penalized(), 4);
    }

    #[test]
    fn effect_validation() {
        assert!(enumerate_terms(&[vec![0], vec![0]], unit(2)).is_err());
        assert!(enumerate_terms(&[vec![2]], unit(2)).is_err());
        assert!(enumerate_terms(&[vec![1, 1]], unit(2)).is_err());
        assert!(enumerate_terms(&[vec![1, 0], vec![0, 1]], unit(2)).is_err());
        assert!(enumerate_terms(&[], unit(2)).is_err());
    }

    #[test]
    fn zero_mean_side_conditions() {
        let g = 20_000;
        let grid: Vec<f64> = (0..g).map(|i| (i as f64 + 0.5) / g as f64).collect();
        let mean = |f: &dyn Fn(f64) -> f64| grid.iter().map(|&t| f(t)).sum::<f64>() / g as f64;
        assert!(mean(&k1).abs() < 1e-3);
        assert!(mean(&k2).abs() < 1e-3);
        for x2 in [0.0, 0.13, 0.5, 0.92, 1.0] {
            let m = mean(&|t| cubic_factor(Smooth, t, x2));
            assert!(m.abs() < 1e-3, "x2 = {x2}: mean {m}");
        }
    }

    fn min_max_eig(m: DMatrix<f64>) -> (f64, f64) {
        let e = SymmetricEigen::new(m).eigenvalues;
        (e.min(), e.max())
    }

    #[test]
    fn gram_matrices_are_psd_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let doms = vec![PredictorDomain::unit(), PredictorDomain::unit(), PredictorDomain::discrete(4).unwrap()];
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.random(), rng.random(), rng.random_range(1..=4) as f64])
            .collect();
        let spec = enumerate_terms(&[vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![0, 1, 2]], doms).unwrap();
        let mut grams: Vec<DMatrix<f64>> = Vec::new();
        for label in [Linear, Smooth] {
            grams.push(DMatrix::from_fn(50, 50, |i, j| cubic_factor(label, pts[i][0], pts[j][0])));
        }
        grams.push(DMatrix::from_fn(50, 50, |i, j| discrete_factor(4, pts[i][2], pts[j][2])));
        for term in spec.penalized_terms() {
            grams.push(DMatrix::from_fn(50, 50, |i, j| {
                term_kernel(&spec, term, &pts[i], &pts[j]).unwrap()
            }));
        }
        for g in grams {
            assert_eq!(g, g.transpose());
            let (lo, hi) = min_max_eig(g);
            assert!(lo >= -1e-8 * hi, "min eigenvalue {lo} vs max {hi}");
        }
    }

    #[test]
    fn discrete_gram_rows_sum_to_zero() {
        for k in [2usize, 3, 5, 8] {
            let g = DMatrix::from_fn(k, k, |i, j| {
                discrete_kernel_part(Smooth, k, i + 1, j + 1).unwrap()
            });
            for i in 0..k {
                let s: f64 = g.row(i).iter().sum();
                assert!(s.abs() < 1e-15, "K = {k}, row {i} sums to {s}");
            }
            assert_eq!(g.rank(1e-10), k - 1);
        }
    }

    #[test]
    fn scaling_clamps_out_of_range() {
        let dom = PredictorDomain::continuous(0.0, 10.0).unwrap();
        assert_eq!(dom.scale(5.0).unwrap(), (0.5, false));
        assert_eq!(dom.scale(12.0).unwrap(), (1.0, true));
        assert_eq!(dom.scale(-1.0).unwrap(), (0.0, true));
        let disc = PredictorDomain::discrete(3).unwrap();
        assert!(disc.scale(4.0).is_err());
        assert!(PredictorDomain::continuous(1.0, 1.0).is_err());
        assert!(PredictorDomain::discrete(1).is_err());
    }
}
