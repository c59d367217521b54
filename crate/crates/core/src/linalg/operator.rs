use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::num::{re, Complex, Real};

/// Hermiticity tolerance applied when an operator is constructed.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Looser tolerance for checks on operators that went through arithmetic.
pub const DOWNSTREAM_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_PARTIES: usize = 12;

static MAX_PARTIES: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_PARTIES);

/// Largest register size any dense constructor accepts.
pub fn max_parties() -> usize {
    MAX_PARTIES.load(Ordering::Relaxed)
}

/// Changes the register cap. Intended to be called once at startup.
pub fn set_max_parties(cap: usize) {
    MAX_PARTIES.store(cap.max(1), Ordering::Relaxed);
}

pub(crate) fn check_parties(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::usage("register must contain at least one party"));
    }
    let cap = max_parties();
    if n > cap {
        return Err(Error::usage(format!(
            "{n} parties exceeds the dense-storage cap of {cap}"
        )));
    }
    Ok(())
}

/// Value (0 or 1) of tensor slot `slot` in basis index `index` of an
/// `n`-qubit register.
#[inline]
pub(crate) fn bit_of(index: usize, slot: usize, n: usize) -> usize {
    (index >> (n - 1 - slot)) & 1
}

/// Operator on `n_parties` qubits stored as a dense `2^n × 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T: Real> {
    n_parties: usize,
    matrix: DMatrix<Complex<T>>,
    hermitian: bool,
}

impl<T: Real> DenseOperator<T> {
    /// Wraps a matrix, flagging it Hermitian when it is so to within
    /// [`HERMITIAN_TOL`].
    pub fn from_matrix(n_parties: usize, matrix: DMatrix<Complex<T>>) -> Result<Self> {
        check_parties(n_parties)?;
        let dim = 1usize << n_parties;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::validation(format!(
                "matrix is {}x{}, expected {dim}x{dim} for {n_parties} parties",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let hermitian = hermiticity_defect(&matrix) <= T::tol(HERMITIAN_TOL);
        Ok(Self {
            n_parties,
            matrix,
            hermitian,
        })
    }

    /// Like [`from_matrix`](Self::from_matrix) but rejects non-Hermitian input.
    pub fn hermitian(n_parties: usize, matrix: DMatrix<Complex<T>>) -> Result<Self> {
        let op = Self::from_matrix(n_parties, matrix)?;
        if !op.hermitian {
            return Err(Error::validation(format!(
                "operator is not Hermitian (defect {:e})",
                op.hermiticity_defect().to_f64_lossy()
            )));
        }
        Ok(op)
    }

    /// Builds a single-qubit operator from a 2×2 matrix.
    pub fn qubit(m: Matrix2<Complex<T>>) -> Self {
        let matrix = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        Self::from_matrix(1, matrix).expect("2x2 matrix is a valid qubit operator")
    }

    pub(crate) fn from_parts_unchecked(
        n_parties: usize,
        matrix: DMatrix<Complex<T>>,
        hermitian: bool,
    ) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << n_parties);
        Self {
            n_parties,
            matrix,
            hermitian,
        }
    }

    pub fn identity(n_parties: usize) -> Result<Self> {
        check_parties(n_parties)?;
        let dim = 1usize << n_parties;
        Ok(Self::from_parts_unchecked(
            n_parties,
            DMatrix::identity(dim, dim),
            true,
        ))
    }

    pub fn pauli_x() -> Self {
        let (o, l) = (re(T::zero()), re(T::one()));
        Self::qubit(Matrix2::new(o, l, l, o))
    }

    pub fn pauli_y() -> Self {
        let o = re(T::zero());
        let i = Complex::new(T::zero(), T::one());
        Self::qubit(Matrix2::new(o, -i, i, o))
    }

    pub fn pauli_z() -> Self {
        let (o, l) = (re(T::zero()), re(T::one()));
        Self::qubit(Matrix2::new(l, o, o, -l))
    }

    /// |0⟩⟨0|
    pub fn proj0() -> Self {
        let (o, l) = (re(T::zero()), re(T::one()));
        Self::qubit(Matrix2::new(l, o, o, o))
    }

    /// |1⟩⟨1|
    pub fn proj1() -> Self {
        let (o, l) = (re(T::zero()), re(T::one()));
        Self::qubit(Matrix2::new(o, o, o, l))
    }

    /// `op^{⊗ n}`.
    pub fn tensor_power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::usage("tensor power needs at least one factor"));
        }
        kron(&vec![self.clone(); n])
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex<T>> {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.matrix[(row, col)]
    }

    /// Hermitian flag recorded at construction (or propagated through
    /// Hermiticity-preserving arithmetic).
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `max |a_ij − conj(a_ji)|`.
    pub fn hermiticity_defect(&self) -> T {
        hermiticity_defect(&self.matrix)
    }

    /// Errors unless the operator is Hermitian to within [`DOWNSTREAM_TOL`].
    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let defect = self.hermiticity_defect();
        if defect <= T::tol(DOWNSTREAM_TOL) {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "operator is not Hermitian (defect {:e})",
                defect.to_f64_lossy()
            )))
        }
    }

    pub fn trace(&self) -> Complex<T> {
        self.matrix.trace()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::from_parts_unchecked(
            self.n_parties,
            self.matrix.map(|z| z * factor),
            self.hermitian,
        )
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.same_shape(other)?;
        let matrix = self.matrix.map(|z| z * a) + other.matrix.map(|z| z * b);
        Ok(Self::from_parts_unchecked(
            self.n_parties,
            matrix,
            self.hermitian && other.hermitian,
        ))
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.combine(T::one(), other, T::one())
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.combine(T::one(), other, -T::one())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Self::from_matrix(self.n_parties, &self.matrix * &other.matrix)
    }

    /// Reorders tensor slots: slot `i` of the result carries what slot
    /// `order[i]` carried in `self`. Conjugation by the party permutation.
    pub fn permute_parties(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_parties;
        check_permutation(order, n)?;
        let dim = self.dim();
        let source: Vec<usize> = (0..dim)
            .map(|j| {
                (0..n).fold(0usize, |acc, i| {
                    acc | (bit_of(j, i, n) << (n - 1 - order[i]))
                })
            })
            .collect();
        let matrix = DMatrix::from_fn(dim, dim, |r, c| self.matrix[(source[r], source[c])]);
        Ok(Self::from_parts_unchecked(n, matrix, self.hermitian))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_parties != other.n_parties {
            return Err(Error::validation(format!(
                "operator sizes differ: {} vs {} parties",
                self.n_parties, other.n_parties
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::validation(format!(
            "permutation has {} entries, expected {n}",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in order {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::validation(format!(
                "{order:?} is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

fn hermiticity_defect<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Kronecker product `f_0 ⊗ f_1 ⊗ …`; parties add up.
pub fn kron<T: Real>(factors: &[DenseOperator<T>]) -> Result<DenseOperator<T>> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::usage("kron needs at least one factor"))?;
    let n_parties: usize = factors.iter().map(|f| f.n_parties).sum();
    check_parties(n_parties)?;
    let mut matrix = first.matrix.clone();
    let mut hermitian = first.hermitian;
    for f in rest {
        matrix = matrix.kronecker(&f.matrix);
        hermitian &= f.hermitian;
    }
    Ok(DenseOperator::from_parts_unchecked(
        n_parties, matrix, hermitian,
    ))
}
