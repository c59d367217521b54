use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::num::{re, Complex, Real};

use super::{check_parties, kron, DenseOperator};

/// One term `coeff · O_1 ⊗ O_2 ⊗ … ⊗ O_n` with Hermitian single-qubit factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm<T: Real> {
    pub coeff: T,
    pub factors: Vec<Matrix2<Complex<T>>>,
}

/// An operator written as a real combination of tensor products of Hermitian
/// single-qubit factors. Expectations on product states factorise term by
/// term, which is what the see-saw and the noise curves exploit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSum<T: Real> {
    n_parties: usize,
    terms: Vec<ProductTerm<T>>,
}

impl<T: Real> ProductSum<T> {
    pub fn new(n_parties: usize, terms: Vec<ProductTerm<T>>) -> Result<Self> {
        check_parties(n_parties)?;
        if terms.is_empty() {
            return Err(Error::usage("product sum needs at least one term"));
        }
        for (t, term) in terms.iter().enumerate() {
            if term.factors.len() != n_parties {
                return Err(Error::validation(format!(
                    "term {t} has {} factors, expected {n_parties}",
                    term.factors.len()
                )));
            }
            for f in &term.factors {
                if (f - f.adjoint()).norm() > T::tol(super::HERMITIAN_TOL) {
                    return Err(Error::validation(format!(
                        "term {t} has a non-Hermitian factor"
                    )));
                }
            }
        }
        Ok(Self { n_parties, terms })
    }

    /// `coeff · factor^{⊗ n}`.
    pub fn uniform_term(n_parties: usize, coeff: T, factor: Matrix2<Complex<T>>) -> ProductTerm<T> {
        ProductTerm {
            coeff,
            factors: vec![factor; n_parties],
        }
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn terms(&self) -> &[ProductTerm<T>] {
        &self.terms
    }

    pub fn to_dense(&self) -> Result<DenseOperator<T>> {
        let mut total: Option<DenseOperator<T>> = None;
        for term in &self.terms {
            let factors: Vec<DenseOperator<T>> = term
                .factors
                .iter()
                .map(|f| DenseOperator::qubit(*f))
                .collect();
            let op = kron(&factors)?.scaled(term.coeff);
            total = Some(match total {
                None => op,
                Some(acc) => acc.plus(&op)?,
            });
        }
        Ok(total.expect("at least one term"))
    }

    /// `⊗_{p ∈ slots} O_{t,p}` for term `t`, in the order the slots are given.
    pub fn group_factor(&self, term: usize, slots: &[usize]) -> DMatrix<Complex<T>> {
        let factors = &self.terms[term].factors;
        slots
            .iter()
            .fold(DMatrix::from_element(1, 1, re(T::one())), |acc, &p| {
                let f = &factors[p];
                acc.kronecker(&DMatrix::from_fn(2, 2, |i, j| f[(i, j)]))
            })
    }

    /// All term factors restricted to each group: `out[g][t]`.
    pub fn group_factors(&self, groups: &[Vec<usize>]) -> Vec<Vec<DMatrix<Complex<T>>>> {
        groups
            .iter()
            .map(|g| {
                (0..self.terms.len())
                    .map(|t| self.group_factor(t, g))
                    .collect()
            })
            .collect()
    }

    /// `Σ_t c_t ∏_g eval(g, O_{t,g})` where `eval` returns the expectation of a
    /// group factor in that group's state.
    pub fn expectation_with<F>(&self, groups: &[Vec<usize>], mut eval: F) -> T
    where
        F: FnMut(usize, &DMatrix<Complex<T>>) -> T,
    {
        self.terms
            .iter()
            .enumerate()
            .map(|(t, term)| {
                groups
                    .iter()
                    .enumerate()
                    .fold(term.coeff, |acc, (g, slots)| {
                        acc * eval(g, &self.group_factor(t, slots))
                    })
            })
            .fold(T::zero(), |a, b| a + b)
    }

    /// Expectation on `⊗_g |ψ_g⟩` where `states[g]` lives on `groups[g]`
    /// (slot order within the group as listed).
    pub fn expectation_on_pure_product(
        &self,
        groups: &[Vec<usize>],
        states: &[DVector<Complex<T>>],
    ) -> T {
        self.expectation_with(groups, |g, m| pure_expectation(m, &states[g]))
    }
}

/// `⟨ψ|M|ψ⟩` real part.
pub(crate) fn pure_expectation<T: Real>(m: &DMatrix<Complex<T>>, psi: &DVector<Complex<T>>) -> T {
    psi.dotc(&(m * psi)).re
}

/// `Tr(ρ M)` real part.
pub(crate) fn mixed_expectation<T: Real>(
    rho: &DMatrix<Complex<T>>,
    m: &DMatrix<Complex<T>>,
) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += rho[(i, j)] * m[(j, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::QubitObservable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factorised_expectation_matches_dense() {
        let n = 3;
        let z = DenseOperator::<f64>::proj0();
        let x = QubitObservable::<f64>::x().matrix();
        let p0 = Matrix2::from_fn(|i, j| z.entry(i, j));
        let sum = ProductSum::new(
            n,
            vec![
                ProductSum::uniform_term(n, 1.5, p0),
                ProductSum::uniform_term(n, -0.5, x),
            ],
        )
        .unwrap();
        let dense = sum.to_dense().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let groups = vec![vec![2], vec![0, 1]];
        let states: Vec<DVector<Complex<f64>>> = groups
            .iter()
            .map(|g| {
                let v = DVector::from_fn(1 << g.len(), |_, _| {
                    Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                });
                &v / re(v.norm())
            })
            .collect();
        // Full state with slot order 0,1,2: group 1 holds slots 0,1 and group 0 slot 2.
        let full = states[1].kronecker(&states[0]);
        let want = pure_expectation(dense.matrix(), &full);
        let got = sum.expectation_on_pure_product(&groups, &states);
        assert!((want - got).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_factor_count() {
        let x = QubitObservable::<f64>::x().matrix();
        let bad = ProductTerm {
            coeff: 1.0,
            factors: vec![x; 2],
        };
        assert!(ProductSum::new(3, vec![bad]).is_err());
    }
}
