use nalgebra::{DVector, Matrix2};

use crate::error::{Error, Result};
use crate::num::{c, re, Complex, Real};

use super::DenseOperator;

/// Dichotomic qubit observable `b·σ` with a unit Bloch vector `b`, hence
/// eigenvalues ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitObservable<T: Real> {
    bloch: [T; 3],
    label: String,
}

impl<T: Real> QubitObservable<T> {
    pub fn new(bloch: [T; 3], label: impl Into<String>) -> Result<Self> {
        let norm = (bloch[0] * bloch[0] + bloch[1] * bloch[1] + bloch[2] * bloch[2]).sqrt();
        if (norm - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::validation(format!(
                "Bloch vector norm {} is not 1",
                norm.to_f64_lossy()
            )));
        }
        Ok(Self {
            bloch,
            label: label.into(),
        })
    }

    pub fn z() -> Self {
        Self::new([T::zero(), T::zero(), T::one()], "Z").expect("unit vector")
    }

    pub fn x() -> Self {
        Self::new([T::one(), T::zero(), T::zero()], "X").expect("unit vector")
    }

    pub fn bloch(&self) -> [T; 3] {
        self.bloch
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn matrix(&self) -> Matrix2<Complex<T>> {
        let [x, y, z] = self.bloch;
        Matrix2::new(re(z), c(x, -y), c(x, y), re(-z))
    }

    pub fn operator(&self) -> DenseOperator<T> {
        DenseOperator::qubit(self.matrix())
    }

    /// Eigenvectors for outcome +1 and −1, in that order.
    pub fn eigenbasis(&self) -> [DVector<Complex<T>>; 2] {
        let [x, y, z] = self.bloch;
        let half = T::lit(0.5);
        let polar = z.max(-T::one()).min(T::one()).acos();
        let azimuth = if x.abs() + y.abs() > T::zero() {
            y.atan2(x)
        } else {
            T::zero()
        };
        let (cos_h, sin_h) = ((polar * half).cos(), (polar * half).sin());
        let phase = Complex::new(azimuth.cos(), azimuth.sin());
        let plus = DVector::from_vec(vec![re(cos_h), phase * sin_h]);
        let minus = DVector::from_vec(vec![re(sin_h), -phase * cos_h]);
        [plus, minus]
    }
}

/// `cos θ σ_x + sin θ σ_y`.
pub fn pauli_xy_observable<T: Real>(theta: T) -> QubitObservable<T> {
    QubitObservable {
        bloch: [theta.cos(), theta.sin(), T::zero()],
        label: format!("xy({})", theta.to_f64_lossy()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Op = DenseOperator<f64>;

    #[test]
    fn theta_zero_is_sigma_x() {
        assert_eq!(pauli_xy_observable(0.0).operator(), Op::pauli_x());
    }

    #[test]
    fn theta_half_pi_is_sigma_y() {
        let op = pauli_xy_observable(std::f64::consts::FRAC_PI_2).operator();
        let diff = op.minus(&Op::pauli_y()).unwrap();
        assert!(diff.matrix().norm() < 1e-15);
    }

    #[test]
    fn experimental_a_plus_has_unit_spectrum() {
        let obs = pauli_xy_observable(27.0f64 / 80.0);
        let values = crate::linalg::hermitian_eigenvalues(&obs.operator()).unwrap();
        assert!((values[0] + 1.0).abs() < 1e-14 && (values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_unit_bloch() {
        assert!(QubitObservable::new([1.0, 0.1, 0.0], "bad").is_err());
    }

    proptest! {
        #[test]
        fn squares_to_identity(polar in 0.0..std::f64::consts::PI, azimuth in -4.0..4.0f64) {
            let b = [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()];
            let m = QubitObservable::new(b, "b").unwrap().matrix();
            let sq = m * m;
            prop_assert!((sq - Matrix2::identity()).norm() < 1e-10);
        }

        #[test]
        fn eigenbasis_has_plus_minus_one(polar in 0.0..std::f64::consts::PI, azimuth in -4.0..4.0f64) {
            let b = [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()];
            let obs = QubitObservable::new(b, "b").unwrap();
            let m = obs.matrix();
            let [plus, minus] = obs.eigenbasis();
            let m = nalgebra::DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
            prop_assert!((&m * &plus - &plus).norm() < 1e-12);
            prop_assert!((&m * &minus + &minus).norm() < 1e-12);
            prop_assert!((plus.dotc(&minus)).norm() < 1e-12);
        }
    }
}
