//! Classical stochastic-matrix machinery: stochasticity and divisibility
//! checks, intermediate transition matrices, L1-contraction testing, and the
//! divisible-but-non-Markovian three-time counterexample as a fixture.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Default tolerance for stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("matrix must be square, got {0}x{1}")]
    NonSquare(usize, usize),
    #[error("matrix is not column stochastic (worst defect {0:.3e})")]
    NotStochastic(f64),
    #[error("transition matrix is singular (det = {0:.3e})")]
    Singular(f64),
    #[error("time grid must be ascending with matching matrix count")]
    BadGrid,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Column-stochastic matrix: `T(x₂|x₁) ≥ 0`, columns summing to one.
#[derive(Debug, Clone)]
pub struct StochasticMatrix<F: Real> {
    pub size: usize,
    pub matrix: DMatrix<F>,
}

impl<F: Real> StochasticMatrix<F> {
    pub fn new(matrix: DMatrix<F>) -> Result<Self, ClassicalError> {
        Self::with_tol(matrix, F::of(STOCHASTIC_TOL))
    }

    pub fn with_tol(matrix: DMatrix<F>, tol: F) -> Result<Self, ClassicalError> {
        if !matrix.is_square() {
            return Err(ClassicalError::NonSquare(matrix.nrows(), matrix.ncols()));
        }
        let defect = stochastic_defect(&matrix);
        if defect > tol {
            return Err(ClassicalError::NotStochastic(defect.to_f64()));
        }
        Ok(Self { size: matrix.nrows(), matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { size: n, matrix: DMatrix::identity(n, n) }
    }
}

/// Worst violation of entry positivity / unit column sums.
pub fn stochastic_defect<F: Real>(t: &DMatrix<F>) -> F {
    let mut worst = F::zero();
    for j in 0..t.ncols() {
        let mut sum = F::zero();
        for i in 0..t.nrows() {
            worst = worst.max(-t[(i, j)]);
            sum += t[(i, j)];
        }
        worst = worst.max((sum - F::one()).abs());
    }
    worst
}

pub fn is_stochastic<F: Real>(t: &DMatrix<F>, tol: F) -> bool {
    t.is_square() && stochastic_defect(t) <= tol
}

/// Grid of times with transition matrices `T(t_k, t₀)`.
#[derive(Debug, Clone)]
pub struct TransitionFamily<F: Real> {
    pub times: Vec<F>,
    pub matrices: Vec<DMatrix<F>>,
}

impl<F: Real> TransitionFamily<F> {
    pub fn new(times: Vec<F>, matrices: Vec<DMatrix<F>>) -> Result<Self, ClassicalError> {
        if times.is_empty() || times.len() != matrices.len() {
            return Err(ClassicalError::BadGrid);
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ClassicalError::BadGrid);
        }
        let n = matrices[0].nrows();
        for m in &matrices {
            if m.nrows() != n || m.ncols() != n {
                return Err(ClassicalError::DimensionMismatch(m.nrows(), n));
            }
            let defect = stochastic_defect(m);
            if defect > F::of(STOCHASTIC_TOL) {
                return Err(ClassicalError::NotStochastic(defect.to_f64()));
            }
        }
        Ok(Self { times, matrices })
    }

    /// Markov-chain family `T(t_k, t₀) = Tᵏ` on an integer grid.
    pub fn from_chain(step: &StochasticMatrix<F>, n_steps: usize) -> Self {
        let n = step.size;
        let mut matrices = vec![DMatrix::identity(n, n)];
        let mut times = vec![F::zero()];
        for k in 1..=n_steps {
            matrices.push(&step.matrix * matrices.last().expect("non-empty"));
            times.push(F::of(k as f64));
        }
        Self { times, matrices }
    }
}

/// Backward composition `T(t₂, t₁) = T₂₀ · T₁₀⁻¹`.
pub fn classical_intermediate<F: Real>(
    t20: &DMatrix<F>,
    t10: &DMatrix<F>,
) -> Result<DMatrix<F>, ClassicalError> {
    if t20.nrows() != t10.nrows() || !t20.is_square() || !t10.is_square() {
        return Err(ClassicalError::DimensionMismatch(t20.nrows(), t10.nrows()));
    }
    let det = t10.determinant();
    if det.abs() < F::of(1e-12) {
        return Err(ClassicalError::Singular(det.to_f64()));
    }
    let inv = t10.clone().try_inverse().ok_or(ClassicalError::Singular(det.to_f64()))?;
    Ok(t20 * inv)
}

/// Divisibility report for a transition family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivisibilityReport {
    pub divisible: bool,
    /// `(t₁, t₂, min entry)` for every consecutive pair whose intermediate
    /// matrix has an entry below −tol.
    pub violations: Vec<(f64, f64, f64)>,
}

/// Checks positivity of every consecutive intermediate matrix on the grid.
pub fn is_divisible<F: Real>(
    fam: &TransitionFamily<F>,
    tol: F,
) -> Result<DivisibilityReport, ClassicalError> {
    let mut violations = Vec::new();
    for k in 1..fam.times.len() {
        let inter = match classical_intermediate(&fam.matrices[k], &fam.matrices[k - 1]) {
            Ok(m) => m,
            Err(ClassicalError::Singular(det)) => {
                // T(t_{k-1}, t₀) is singular; a consistent intermediate can
                // still exist on its range (the all-1/2 fixture is the model
                // case). Take the least-squares candidate and keep it only if
                // it reproduces the forward composition.
                let pinv = fam.matrices[k - 1]
                    .clone()
                    .svd(true, true)
                    .pseudo_inverse(F::of(1e-12))
                    .map_err(|_| ClassicalError::Singular(det))?;
                let candidate = &fam.matrices[k] * pinv;
                let residual = (&candidate * &fam.matrices[k - 1] - &fam.matrices[k]).norm();
                if residual > F::of(1e-9) {
                    return Err(ClassicalError::Singular(det));
                }
                candidate
            }
            Err(e) => return Err(e),
        };
        let min_entry = inter.iter().fold(F::inf(), |a, &x| a.min(x));
        if min_entry < -tol {
            violations.push((
                fam.times[k - 1].to_f64(),
                fam.times[k].to_f64(),
                min_entry.to_f64(),
            ));
        }
    }
    Ok(DivisibilityReport { divisible: violations.is_empty(), violations })
}

/// Outcome of sampling-based L1-contraction testing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub trials: usize,
    pub contraction_holds: bool,
    /// A probability vector whose image has larger L1 norm, when one exists.
    pub violating_vector: Option<Vec<f64>>,
}

fn l1_norm<F: Real>(v: &DVector<F>) -> F {
    v.iter().fold(F::zero(), |a, &x| a + x.abs())
}

/// Samples random real vectors and checks `‖Tv‖₁ ≤ ‖v‖₁`. For matrices with
/// unit column sums but negative entries the basis vectors are probed as
/// well, which is where a violation must show up.
pub fn l1_contraction_check<F: Real>(
    t: &DMatrix<F>,
    trials: usize,
    rng: &mut impl Rng,
) -> ContractionReport {
    let n = t.nrows();
    let mut violating_vector = None;
    let mut check = |v: &DVector<F>| -> bool {
        let grew = l1_norm(&(t * v)) > l1_norm(v) + F::of(1e-12);
        if grew && violating_vector.is_none() {
            violating_vector = Some(v.iter().map(|x| x.to_f64()).collect());
        }
        grew
    };
    let mut any = false;
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = F::one();
        any |= check(&e);
    }
    for _ in 0..trials {
        let v = DVector::from_fn(n, |_, _| F::of(rng.random::<f64>() * 2.0 - 1.0));
        any |= check(&v);
    }
    ContractionReport { trials, contraction_holds: !any, violating_vector }
}

/// The three-time counterexample: a divisible transition family whose
/// multi-time conditionals are maximally non-Markovian.
#[derive(Debug, Clone)]
pub struct Counterexample<F: Real> {
    /// `joint[(x3, x2, x1)]` over binary outcomes.
    pub joint: [[[F; 2]; 2]; 2],
    pub family: TransitionFamily<F>,
    /// `P(1, t₃ | 0, t₂; 0, t₁)`.
    pub conditional_given_00: F,
    /// `P(1, t₃ | 0, t₂; 1, t₁)`.
    pub conditional_given_01: F,
}

/// Deterministic flips conditioned on the first outcome: only the four
/// configurations (x₃, x₂, x₁) with x₃ = ¬(x₁ ⊕ x₂) carry weight 1/4; every
/// one- and two-time marginal looks like a fair coin.
pub fn counterexample_fixture<F: Real>() -> Counterexample<F> {
    let q = F::of(0.25);
    let mut joint = [[[F::zero(); 2]; 2]; 2];
    for x1 in 0..2usize {
        for x2 in 0..2usize {
            let x3 = 1 ^ x1 ^ x2;
            joint[x3][x2][x1] = q;
        }
    }
    let half = DMatrix::from_element(2, 2, F::of(0.5));
    let family = TransitionFamily::new(
        vec![F::zero(), F::one(), F::of(2.0)],
        vec![DMatrix::identity(2, 2), half.clone(), half],
    )
    .expect("fixture family is valid");
    Counterexample {
        joint,
        family,
        conditional_given_00: F::one(),
        conditional_given_01: F::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn is_stochastic_examples() {
        assert!(is_stochastic(&DMatrix::<f64>::identity(3, 3), 1e-10));
        assert!(is_stochastic(&DMatrix::from_element(2, 2, 0.5), 1e-10));
        assert!(!is_stochastic(&dmatrix![1.2, 0.0; -0.2, 1.0], 1e-10));
        assert!(StochasticMatrix::new(dmatrix![1.2, 0.0; -0.2, 1.0]).is_err());
    }

    #[test]
    fn classical_intermediate_examples() {
        let t = dmatrix![0.9, 0.3; 0.1, 0.7];
        let inter = classical_intermediate(&t, &t).unwrap();
        assert_relative_eq!((inter - DMatrix::<f64>::identity(2, 2)).norm(), 0.0, epsilon = 1e-12);

        let t2 = &t * &t;
        let inter = classical_intermediate(&t2, &t).unwrap();
        assert_relative_eq!((inter - &t).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn intermediate_columns_stay_normalized() {
        let mut r = rng(41);
        for _ in 0..10 {
            let t10 = random_stochastic(3, &mut r);
            let t21 = random_stochastic(3, &mut r);
            let t20 = &t21 * &t10;
            let inter = classical_intermediate(&t20, &t10).unwrap();
            for j in 0..3 {
                assert_relative_eq!(inter.column(j).sum(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn crafted_non_divisible_family() {
        // strong mixing up to t₁, then a sharpening step that cannot be a
        // stochastic matrix on its own
        let t10 = dmatrix![0.5, 0.5; 0.5, 0.5] * 0.9 + DMatrix::<f64>::identity(2, 2) * 0.1;
        let t20 = dmatrix![0.8, 0.2; 0.2, 0.8];
        let inter = classical_intermediate(&t20, &t10).unwrap();
        let min_entry = inter.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_entry < 0.0, "expected a negative entry, got min {min_entry}");

        let fam = TransitionFamily::new(
            vec![0.0, 1.0, 2.0],
            vec![DMatrix::identity(2, 2), t10, t20],
        )
        .unwrap();
        let report = is_divisible(&fam, 1e-10).unwrap();
        assert!(!report.divisible);
        assert_eq!(report.violations.len(), 1);
        assert_relative_eq!(report.violations[0].0, 1.0);
        assert_relative_eq!(report.violations[0].1, 2.0);
        assert!(report.violations[0].2 < 0.0);
    }

    #[test]
    fn markov_chain_family_is_divisible() {
        let step = StochasticMatrix::new(dmatrix![0.7, 0.4; 0.3, 0.6]).unwrap();
        let fam = TransitionFamily::from_chain(&step, 6);
        let report = is_divisible(&fam, 1e-10).unwrap();
        assert!(report.divisible);
    }

    fn random_stochastic(n: usize, r: &mut impl rand::Rng) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(n, n, |_, _| r.random::<f64>());
        for j in 0..n {
            let s: f64 = m.column(j).sum();
            for i in 0..n {
                m[(i, j)] /= s;
            }
        }
        m
    }

    #[test]
    fn stochastic_matrices_contract_l1() {
        let mut r = rng(42);
        for _ in 0..10 {
            let t = random_stochastic(4, &mut r);
            let report = l1_contraction_check(&t, 1000, &mut r);
            assert!(report.contraction_holds);
            assert!(report.violating_vector.is_none());
        }
        let report = l1_contraction_check(&DMatrix::<f64>::identity(3, 3), 100, &mut r);
        assert!(report.contraction_holds);
    }

    #[test]
    fn negative_entry_with_unit_columns_violates_contraction() {
        let mut r = rng(43);
        let t = dmatrix![1.3, 0.1; -0.3, 0.9];
        let report = l1_contraction_check(&t, 100, &mut r);
        assert!(!report.contraction_holds);
        let v = report.violating_vector.unwrap();
        let v = DVector::from_vec(v);
        assert!(l1_norm(&(&t * &v)) > l1_norm(&v));
    }

    #[test]
    fn counterexample_marginals_and_conditionals() {
        let fix = counterexample_fixture::<f64>();
        // four configurations of weight 1/4, the rest zero
        let mut total = 0.0;
        let mut nonzero = 0;
        for x3 in 0..2 {
            for x2 in 0..2 {
                for x1 in 0..2 {
                    let p = fix.joint[x3][x2][x1];
                    total += p;
                    if p > 0.0 {
                        nonzero += 1;
                        assert_relative_eq!(p, 0.25);
                    }
                }
            }
        }
        assert_relative_eq!(total, 1.0);
        assert_eq!(nonzero, 4);

        // two-time marginals P(x₂, x₁) are all 1/4 → transition entries 1/2
        for x2 in 0..2 {
            for x1 in 0..2 {
                let p: f64 = (0..2).map(|x3| fix.joint[x3][x2][x1]).sum();
                assert_relative_eq!(p, 0.25);
            }
        }
        let report = is_divisible(&fix.family, 1e-10).unwrap();
        assert!(report.divisible);

        // yet the three-time conditionals remember t₁
        assert_relative_eq!(fix.conditional_given_00, 1.0);
        assert_relative_eq!(fix.conditional_given_01, 0.0);
        // consistency with the joint: P(1,t₃|0,t₂;0,t₁) = P(1,0,0)/P(0,0)
        let p100 = fix.joint[1][0][0];
        let p00: f64 = (0..2).map(|x3| fix.joint[x3][0][0]).sum();
        assert_relative_eq!(p100 / p00, fix.conditional_given_00);
        let p101 = fix.joint[1][0][1];
        let p01: f64 = (0..2).map(|x3| fix.joint[x3][0][1]).sum();
        assert_relative_eq!(p101 / p01, fix.conditional_given_01);
    }
}
