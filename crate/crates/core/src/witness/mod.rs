//! The two witness families, their analytic bounds, and the classification of
//! measured expectation values into intactness and depth conclusions.

mod classify;
mod kprod;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli_xy_observable, DenseOperator, ProductSum};
use crate::num::{pow2, re, Complex, Real};

pub use classify::{
    default_gamma_grid, depth_lower_bound, depth_scan, intactness_scan, intactness_upper_bound,
    DepthCheck, DepthScan, Estimate, ExpectationPair, IntactnessCheck, IntactnessScan,
    DEFAULT_CONFIDENCE_SIGMAS, VIOLATION_EPS,
};
pub use kprod::{
    di_bound, kprod_bound, BoundSource, KprodBound, KPROD_GAMMAS, KPROD_PARTIES, TABULATED,
};

/// Angle of the `𝒜₊` observable in the x-y plane.
pub const DEFAULT_THETA_PLUS: f64 = 27.0 / 80.0;
/// Angle of the `𝒜₋` observable in the x-y plane.
pub const DEFAULT_THETA_MINUS: f64 = -21.0 / 80.0;

/// Which of `α·M_Z ± M_X` is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value<T: Real>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }

    pub fn both() -> [Sign; 2] {
        [Sign::Plus, Sign::Minus]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Separability,
    Depth,
}

/// Parameters of one witness operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WitnessSpec<T> {
    /// `α·M_Z + sign·M_X`.
    Separability { n: usize, alpha: T, sign: Sign },
    /// `γκⁿ·𝒜 − 𝒜′` built from `𝒜± = cos θ± σₓ + sin θ± σ_y`.
    Depth {
        n: usize,
        gamma: T,
        theta_plus: T,
        theta_minus: T,
    },
}

fn check_parameter<T: Real>(name: &str, value: T) -> Result<()> {
    if !(value > T::zero() && value <= T::lit(2.0)) {
        return Err(Error::usage(format!(
            "{name} = {} outside (0, 2]",
            value.to_f64_lossy()
        )));
    }
    Ok(())
}

impl<T: Real> WitnessSpec<T> {
    pub fn separability(n: usize, alpha: T, sign: Sign) -> Result<Self> {
        let spec = Self::Separability { n, alpha, sign };
        spec.validate()?;
        Ok(spec)
    }

    /// Depth witness with the default measurement angles.
    pub fn depth(n: usize, gamma: T) -> Result<Self> {
        Self::depth_with_angles(
            n,
            gamma,
            T::lit(DEFAULT_THETA_PLUS),
            T::lit(DEFAULT_THETA_MINUS),
        )
    }

    pub fn depth_with_angles(n: usize, gamma: T, theta_plus: T, theta_minus: T) -> Result<Self> {
        let spec = Self::Depth {
            n,
            gamma,
            theta_plus,
            theta_minus,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Separability { n, alpha, .. } => {
                if n < 2 {
                    return Err(Error::usage("separability witness needs n ≥ 2"));
                }
                check_parameter("alpha", alpha)
            }
            Self::Depth {
                n,
                gamma,
                theta_plus,
                theta_minus,
            } => {
                if n < 1 {
                    return Err(Error::usage("depth witness needs n ≥ 1"));
                }
                check_parameter("gamma", gamma)?;
                if theta_plus == theta_minus {
                    return Err(Error::usage("depth witness needs distinct angles"));
                }
                if kappa(theta_plus, theta_minus).abs() <= T::tol(1e-12) {
                    return Err(Error::usage("kappa vanishes for these angles"));
                }
                Ok(())
            }
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::Separability { n, .. } | Self::Depth { n, .. } => n,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Separability { .. } => Family::Separability,
            Self::Depth { .. } => Family::Depth,
        }
    }

    /// `α` or `γ`.
    pub fn parameter(&self) -> T {
        match *self {
            Self::Separability { alpha, .. } => alpha,
            Self::Depth { gamma, .. } => gamma,
        }
    }

    /// `cos((θ₊−θ₋)/2)` for the depth family.
    pub fn kappa(&self) -> Option<T> {
        match *self {
            Self::Depth {
                theta_plus,
                theta_minus,
                ..
            } => Some(kappa(theta_plus, theta_minus)),
            Self::Separability { .. } => None,
        }
    }

    /// Coefficients `(c₁, c₂)` such that `⟨W⟩ = c₁·⟨first⟩ + c₂·⟨second⟩`,
    /// where the pair is `(M_Z, M_X)` or `(𝒜, 𝒜′)`.
    pub fn linear_coefficients(&self) -> (T, T) {
        match *self {
            Self::Separability { alpha, sign, .. } => (alpha, sign.value()),
            Self::Depth { n, gamma, .. } => {
                let k = self.kappa().expect("depth family");
                (gamma * k.powi(n as i32), -T::one())
            }
        }
    }

    pub fn value_from(&self, first: T, second: T) -> T {
        let (a, b) = self.linear_coefficients();
        a * first + b * second
    }

    pub fn product_sum(&self) -> Result<ProductSum<T>> {
        self.validate()?;
        let n = self.n();
        let terms = match *self {
            Self::Separability { alpha, sign, .. } => {
                let p0 = Matrix2::new(re(T::one()), re(T::zero()), re(T::zero()), re(T::zero()));
                let p1 = Matrix2::new(re(T::zero()), re(T::zero()), re(T::zero()), re(T::one()));
                vec![
                    ProductSum::uniform_term(n, alpha, p0),
                    ProductSum::uniform_term(n, alpha, p1),
                    ProductSum::uniform_term(n, sign.value(), sigma_x()),
                ]
            }
            Self::Depth { .. } => {
                let (a, b) = self.linear_coefficients();
                let (mix, plus) = self.depth_factors();
                vec![
                    ProductSum::uniform_term(n, a, mix),
                    ProductSum::uniform_term(n, b, plus),
                ]
            }
        };
        ProductSum::new(n, terms)
    }

    /// `(𝒜₋+𝒜₊)/(2κ)` and `𝒜₊`, both ±1-valued.
    fn depth_factors(&self) -> (Matrix2<Complex<T>>, Matrix2<Complex<T>>) {
        match *self {
            Self::Depth {
                theta_plus,
                theta_minus,
                ..
            } => {
                let two = T::lit(2.0);
                let a_plus = pauli_xy_observable(theta_plus).matrix();
                let a_minus = pauli_xy_observable(theta_minus).matrix();
                let k = kappa(theta_plus, theta_minus);
                ((a_minus + a_plus).map(|z| z / (two * k)), a_plus)
            }
            Self::Separability { .. } => unreachable!("separability has no depth factors"),
        }
    }

    pub fn operator(&self) -> Result<DenseOperator<T>> {
        match *self {
            Self::Separability { n, alpha, sign } => build_separability_witness(n, alpha, sign),
            Self::Depth { .. } => build_depth_witness(self).map(|(op, _, _)| op),
        }
    }
}

pub(crate) fn sigma_x<T: Real>() -> Matrix2<Complex<T>> {
    Matrix2::new(re(T::zero()), re(T::one()), re(T::one()), re(T::zero()))
}

pub fn kappa<T: Real>(theta_plus: T, theta_minus: T) -> T {
    ((theta_plus - theta_minus) / T::lit(2.0)).cos()
}

/// `M_Z = |0⟩⟨0|^{⊗n} + |1⟩⟨1|^{⊗n}`.
pub fn m_z<T: Real>(n: usize) -> Result<DenseOperator<T>> {
    DenseOperator::proj0()
        .tensor_power(n)?
        .plus(&DenseOperator::proj1().tensor_power(n)?)
}

/// `M_X = σₓ^{⊗n}`.
pub fn m_x<T: Real>(n: usize) -> Result<DenseOperator<T>> {
    DenseOperator::pauli_x().tensor_power(n)
}

pub fn build_separability_witness<T: Real>(
    n: usize,
    alpha: T,
    sign: Sign,
) -> Result<DenseOperator<T>> {
    WitnessSpec::separability(n, alpha, sign)?;
    m_z(n)?.combine(alpha, &m_x(n)?, sign.value())
}

/// Returns `(W, 𝒜, 𝒜′)` with `W = γκⁿ𝒜 − 𝒜′`,
/// `𝒜 = ((𝒜₋+𝒜₊)/(2κ))^{⊗n}` and `𝒜′ = 𝒜₊^{⊗n}`.
pub fn build_depth_witness<T: Real>(
    spec: &WitnessSpec<T>,
) -> Result<(DenseOperator<T>, DenseOperator<T>, DenseOperator<T>)> {
    if spec.family() != Family::Depth {
        return Err(Error::usage(
            "build_depth_witness needs a depth witness spec",
        ));
    }
    spec.validate()?;
    let n = spec.n();
    let (mix, plus) = spec.depth_factors();
    let a_op = DenseOperator::qubit(mix).tensor_power(n)?;
    let aprime_op = DenseOperator::qubit(plus).tensor_power(n)?;
    let (a, b) = spec.linear_coefficients();
    let op = a_op.combine(a, &aprime_op, b)?;
    Ok((op, a_op, aprime_op))
}

/// `max{α, α/2^{m−1} + 1}`: the largest value of `⟨α·M_Z ± M_X⟩` over
/// `m`-separable states. Exact in rational arithmetic.
pub fn msep_bound<T>(alpha: T, m: usize) -> T
where
    T: num_traits::Num + PartialOrd + Copy,
{
    debug_assert!(m >= 1);
    let tail = alpha / pow2::<T>(m as u32 - 1) + T::one();
    if alpha > tail {
        alpha
    } else {
        tail
    }
}

/// `2^{m−1}/(2^{m−1}−1)`, where both branches of [`msep_bound`] meet.
pub fn optimal_alpha<T: num_traits::Num + Copy>(m: usize) -> T {
    assert!(m >= 2, "optimal alpha needs m ≥ 2");
    let p = pow2::<T>(m as u32 - 1);
    p / (p - T::one())
}
