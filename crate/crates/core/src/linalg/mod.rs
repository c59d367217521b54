//! Dense complex linear algebra for small qubit registers.
//!
//! Tensor-slot convention used throughout the crate: slot 0 is the leftmost
//! Kronecker factor, i.e. the most significant bit of a basis index.

mod eig;
mod observable;
mod operator;
mod product;

pub use eig::{hermitian_eig_max, hermitian_eigenvalues, top_eigenpair};
pub use observable::{pauli_xy_observable, QubitObservable};
pub use operator::{
    kron, max_parties, set_max_parties, DenseOperator, DEFAULT_MAX_PARTIES, DOWNSTREAM_TOL,
    HERMITIAN_TOL,
};
pub use product::{ProductSum, ProductTerm};

pub(crate) use operator::{bit_of, check_parties};
pub(crate) use product::{mixed_expectation, pure_expectation};
