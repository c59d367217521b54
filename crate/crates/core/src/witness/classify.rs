use serde::{Deserialize, Serialize};

use super::{kprod_bound, msep_bound, optimal_alpha, BoundSource, Sign, WitnessSpec};
use crate::error::{Error, Result};

/// Default number of standard errors a witness must clear.
pub const DEFAULT_CONFIDENCE_SIGMAS: f64 = 1.0;

/// Absorbs rounding when a value sits exactly on a bound.
pub const VIOLATION_EPS: f64 = 1e-12;

/// A measured value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Result<Self> {
        if !value.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::validation(format!(
                "invalid estimate {value} ± {sigma}"
            )));
        }
        Ok(Self { value, sigma })
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// `(⟨M_Z⟩, ⟨M_X⟩)` or `(⟨𝒜⟩, ⟨𝒜′⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationPair {
    pub first: Estimate,
    pub second: Estimate,
}

impl ExpectationPair {
    /// Each value must lie in [−1, 1] up to three standard errors.
    pub fn new(first: Estimate, second: Estimate) -> Result<Self> {
        for e in [first, second] {
            Estimate::new(e.value, e.sigma)?;
            if e.value.abs() > 1.0 + 3.0 * e.sigma + VIOLATION_EPS {
                return Err(Error::validation(format!(
                    "expectation {} ± {} outside [-1, 1]",
                    e.value, e.sigma
                )));
            }
        }
        Ok(Self { first, second })
    }

    /// Point values without uncertainty.
    pub fn exact(first: f64, second: f64) -> Result<Self> {
        Self::new(Estimate::exact(first), Estimate::exact(second))
    }

    /// `c₁·first + c₂·second` with the standard error propagated in quadrature.
    pub fn combine(&self, c1: f64, c2: f64) -> Estimate {
        Estimate {
            value: c1 * self.first.value + c2 * self.second.value,
            sigma: ((c1 * self.first.sigma).powi(2) + (c2 * self.second.sigma).powi(2)).sqrt(),
        }
    }
}

fn exceeds(value: Estimate, bound: f64, sigmas: f64) -> bool {
    value.value - bound > sigmas * value.sigma + VIOLATION_EPS
}

/// One `m` of the separability scan; the sign giving the larger value is kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntactnessCheck {
    pub m: usize,
    pub alpha: f64,
    pub sign: Sign,
    pub value: f64,
    pub sigma: f64,
    pub bound: f64,
    pub violated: bool,
}

impl IntactnessCheck {
    pub fn margin(&self) -> f64 {
        self.value - self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntactnessScan {
    pub checks: Vec<IntactnessCheck>,
    /// `(smallest violated m) − 1`.
    pub upper: Option<usize>,
}

impl IntactnessScan {
    pub fn deciding_check(&self) -> Option<&IntactnessCheck> {
        self.checks.iter().find(|c| c.violated)
    }
}

/// Evaluates `α·⟨M_Z⟩ ± ⟨M_X⟩` at `α = optimal_alpha(m)` for `m = m_start..=n`.
pub fn intactness_scan(
    pair: &ExpectationPair,
    n: usize,
    confidence_sigmas: f64,
    m_start: usize,
) -> Result<IntactnessScan> {
    if n < 2 {
        return Err(Error::usage("intactness scan needs n ≥ 2"));
    }
    if confidence_sigmas.is_nan() || confidence_sigmas < 0.0 {
        return Err(Error::usage("confidence must be non-negative"));
    }
    let checks: Vec<IntactnessCheck> = (m_start.max(2)..=n)
        .map(|m| {
            let alpha = optimal_alpha::<f64>(m);
            let bound = msep_bound(alpha, m);
            let (sign, est) = Sign::both()
                .into_iter()
                .map(|s| (s, pair.combine(alpha, s.value())))
                .fold(None::<(Sign, Estimate)>, |best, cur| match best {
                    Some(b) if b.1.value >= cur.1.value => Some(b),
                    _ => Some(cur),
                })
                .expect("two signs");
            IntactnessCheck {
                m,
                alpha,
                sign,
                value: est.value,
                sigma: est.sigma,
                bound,
                violated: exceeds(est, bound, confidence_sigmas),
            }
        })
        .collect();
    let upper = checks.iter().find(|c| c.violated).map(|c| c.m - 1);
    Ok(IntactnessScan { checks, upper })
}

/// Upper bound on the number of entangled blocks, or `None` if no
/// separability witness is violated.
pub fn intactness_upper_bound(
    pair: &ExpectationPair,
    n: usize,
    confidence_sigmas: f64,
) -> Option<usize> {
    intactness_scan(pair, n, confidence_sigmas, 2).ok()?.upper
}

/// `{0.1, 0.2, …, 2.0}`, which includes 1.6 and 2.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 10.0).collect()
}

/// One γ of the depth scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCheck {
    pub gamma: f64,
    pub value: f64,
    pub sigma: f64,
    /// Largest `k` whose k-producible bound is exceeded.
    pub k_exceeded: Option<usize>,
    /// Bound at `k_exceeded`, or at `k = 1` when nothing is exceeded.
    pub bound: f64,
    pub source: BoundSource,
}

impl DepthCheck {
    pub fn depth(&self) -> Option<usize> {
        self.k_exceeded.map(|k| k + 1)
    }

    pub fn margin(&self) -> f64 {
        self.value - self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub checks: Vec<DepthCheck>,
    pub lower: Option<usize>,
}

impl DepthScan {
    /// The γ giving the deepest conclusion (largest margin among ties).
    pub fn deciding_check(&self) -> Option<&DepthCheck> {
        self.checks.iter().filter(|c| c.k_exceeded.is_some()).fold(
            None::<&DepthCheck>,
            |best, c| match best {
                Some(b) if (b.k_exceeded, b.margin()) >= (c.k_exceeded, c.margin()) => Some(b),
                _ => Some(c),
            },
        )
    }
}

/// Evaluates `γκⁿ⟨𝒜⟩ − ⟨𝒜′⟩` over the γ grid against the k-producible bounds.
pub fn depth_scan(
    pair: &ExpectationPair,
    n: usize,
    gamma_grid: &[f64],
    confidence_sigmas: f64,
) -> Result<DepthScan> {
    if confidence_sigmas.is_nan() || confidence_sigmas < 0.0 {
        return Err(Error::usage("confidence must be non-negative"));
    }
    let mut checks = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        let spec = WitnessSpec::<f64>::depth(n, gamma)?;
        let (c1, c2) = spec.linear_coefficients();
        let est = pair.combine(c1, c2);
        let mut check = DepthCheck {
            gamma,
            value: est.value,
            sigma: est.sigma,
            k_exceeded: None,
            bound: 0.0,
            source: BoundSource::Computed,
        };
        for k in 1..n {
            let b = kprod_bound(n, k, gamma)?;
            if k == 1 || exceeds(est, b.value, confidence_sigmas) {
                check.bound = b.value;
                check.source = b.source;
            }
            if exceeds(est, b.value, confidence_sigmas) {
                check.k_exceeded = Some(k);
            } else {
                break;
            }
        }
        checks.push(check);
    }
    let lower = checks.iter().filter_map(DepthCheck::depth).max();
    Ok(DepthScan { checks, lower })
}

/// Lower bound on the size of the largest entangled block for an 8-party
/// register, or `None` if not even the fully separable bound is exceeded.
pub fn depth_lower_bound(
    pair: &ExpectationPair,
    gamma_grid: &[f64],
    confidence_sigmas: f64,
) -> Option<usize> {
    depth_scan(pair, super::KPROD_PARTIES, gamma_grid, confidence_sigmas)
        .ok()?
        .lower
}
