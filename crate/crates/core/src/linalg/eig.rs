use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Result;
use crate::num::{Complex, Real};

use super::DenseOperator;

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
///
/// Only the lower triangle is trusted. Among degenerate maxima the returned
/// vector is whichever the decomposition yields first.
pub fn top_eigenpair<T: Real>(matrix: &DMatrix<Complex<T>>) -> (T, DVector<Complex<T>>) {
    if matrix.nrows() == 2 {
        return top_eigenpair_2x2(matrix);
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let (best, value) = eig.eigenvalues.iter().copied().enumerate().fold(
        (0, T::min_value().unwrap()),
        |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
    );
    let mut vector = eig.eigenvectors.column(best).into_owned();
    let norm = vector.norm();
    vector /= Complex::new(norm, T::zero());
    (value, vector)
}

// Closed form for the 2×2 case, which dominates single-qubit see-saw updates.
fn top_eigenpair_2x2<T: Real>(m: &DMatrix<Complex<T>>) -> (T, DVector<Complex<T>>) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(1, 0)].conj();
    let half = T::lit(0.5);
    let mean = (a + d) * half;
    let gap = (a - d) * half;
    let radius = (gap * gap + b.norm_sqr()).sqrt();
    let value = mean + radius;
    let zero = Complex::new(T::zero(), T::zero());
    let vector = if b.norm_sqr().sqrt() <= T::default_epsilon() * (T::one() + radius) {
        if a >= d {
            DVector::from_vec(vec![Complex::new(T::one(), T::zero()), zero])
        } else {
            DVector::from_vec(vec![zero, Complex::new(T::one(), T::zero())])
        }
    } else {
        // (b, λ − a) solves the first row of (M − λ)v = 0.
        let v = DVector::from_vec(vec![b, Complex::new(value - a, T::zero())]);
        let norm = v.norm();
        v / Complex::new(norm, T::zero())
    };
    (value, vector)
}

/// `(λ_max, v)` for a Hermitian operator; `op·v = λ_max·v`, `‖v‖ = 1`.
pub fn hermitian_eig_max<T: Real>(op: &DenseOperator<T>) -> Result<(T, DVector<Complex<T>>)> {
    op.require_hermitian()?;
    Ok(top_eigenpair(op.matrix()))
}

/// All eigenvalues in ascending order.
pub fn hermitian_eigenvalues<T: Real>(op: &DenseOperator<T>) -> Result<Vec<T>> {
    op.require_hermitian()?;
    let mut values: Vec<T> = SymmetricEigen::new(op.matrix().clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(values)
}
