//! White-noise robustness thresholds, noise-parameter estimation and
//! visibility-margin curves.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mixed_expectation;
use crate::num::{pow2, Real};
use crate::states::{ghz_standard, visibility_weight, Partition, StateDensity};
use crate::witness::{kprod_bound, msep_bound, optimal_alpha, WitnessSpec};

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha <= T::lit(2.0)) {
        return Err(Error::usage(format!(
            "alpha = {} outside (0, 2]",
            alpha.to_f64_lossy()
        )));
    }
    Ok(())
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m < 2 || m > n {
        return Err(Error::usage(format!("m = {m} outside 2..={n}")));
    }
    Ok(())
}

/// Largest white-noise fraction for which `α·M_Z + M_X` still certifies
/// GME of `GHZₙ`: `α/(2 + (2 − 2^{2−n})α)`.
pub fn gme_noise_threshold<T: Real>(n: usize, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    let two = T::lit(2.0);
    let tail = two / pow2::<T>(n as u32 - 1);
    Ok(alpha / (two + (two - tail) * alpha))
}

/// Largest white-noise fraction for which the witness at `optimal_alpha(m)`
/// still certifies intactness `≤ m−1`: `(2^m−2)/(2(2^m − 2^{m−n} − 1))`.
pub fn intactness_noise_threshold<T: Real>(n: usize, m: usize) -> Result<T> {
    check_m(n, m)?;
    let pm = pow2::<T>(m as u32);
    let two = T::lit(2.0);
    let shrink = pm / pow2::<T>(n as u32);
    Ok((pm - two) / (two * (pm - shrink - T::one())))
}

/// Noise fraction below which `α·M_Z + M_X` exceeds the `m`-separable bound
/// on `GHZₙ`, for any `α`; zero when even the pure state does not violate.
pub fn white_noise_threshold<T: Real>(n: usize, alpha: T, m: usize) -> Result<T> {
    check_alpha(alpha)?;
    check_m(n, m)?;
    let gap = alpha + T::one() - msep_bound(alpha, m);
    let slope = alpha + T::one() - alpha / pow2::<T>(n as u32 - 1);
    Ok((gap / slope).max(T::zero()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "m")]
pub enum Target {
    Gme,
    Intactness(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaChoice {
    Optimal,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    StandardGhz,
    /// `cos θ|0…0⟩ + e^{iφ} sin θ|1…1⟩`. With `phase_fix`, the relative phase
    /// at φ = π/2, 3π/2 is assumed undone by a local unitary first.
    GeneralizedGhz {
        theta: f64,
        phi: f64,
        phase_fix: bool,
    },
}

/// One row of the threshold tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseThresholdQuery {
    pub n: usize,
    pub target: Target,
    pub alpha: AlphaChoice,
    pub state_family: StateFamily,
}

impl NoiseThresholdQuery {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::usage("thresholds need n ≥ 2"));
        }
        if let Target::Intactness(m) = self.target {
            check_m(self.n, m)?;
        }
        if let AlphaChoice::Value(a) = self.alpha {
            check_alpha(a)?;
        }
        if let StateFamily::GeneralizedGhz { theta, phi, .. } = self.state_family {
            check_angles(theta, phi)?;
            if self.alpha != AlphaChoice::Optimal {
                return Err(Error::usage(
                    "generalized GHZ thresholds use the optimal alpha",
                ));
            }
        }
        Ok(())
    }

    fn m(&self) -> usize {
        match self.target {
            Target::Gme => 2,
            Target::Intactness(m) => m,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self.alpha {
            AlphaChoice::Optimal => optimal_alpha(self.m()),
            AlphaChoice::Value(a) => a,
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        self.validate()?;
        let n = self.n;
        match (self.state_family, self.target, self.alpha) {
            (StateFamily::StandardGhz, Target::Gme, _) => gme_noise_threshold(n, self.alpha()),
            (StateFamily::StandardGhz, Target::Intactness(m), AlphaChoice::Optimal) => {
                intactness_noise_threshold(n, m)
            }
            (StateFamily::StandardGhz, Target::Intactness(m), AlphaChoice::Value(a)) => {
                white_noise_threshold(n, a, m)
            }
            (
                StateFamily::GeneralizedGhz {
                    theta,
                    phi,
                    phase_fix,
                },
                target,
                _,
            ) => {
                let m = match target {
                    Target::Gme => None,
                    Target::Intactness(m) => Some(m),
                };
                generalized_ghz_threshold(n, m, theta, phi, phase_fix)
            }
        }
    }
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-15) {
        return Err(Error::usage(format!("theta = {theta} outside (0, π/4]")));
    }
    if !(phi > 0.0 && phi <= std::f64::consts::TAU + 1e-15) {
        return Err(Error::usage(format!("phi = {phi} outside (0, 2π]")));
    }
    Ok(())
}

/// Effective coherence `sin 2θ |cos φ|`; `sin 2θ` at φ = π/2, 3π/2 when the
/// phase is corrected locally.
pub fn ghz_coherence(theta: f64, phi: f64, phase_fix: bool) -> f64 {
    let quarter = [
        std::f64::consts::FRAC_PI_2,
        3.0 * std::f64::consts::FRAC_PI_2,
    ];
    if phase_fix && quarter.iter().any(|q| (phi - q).abs() < 1e-12) {
        (2.0 * theta).sin()
    } else {
        (2.0 * theta).sin() * phi.cos().abs()
    }
}

/// Noise thresholds of the generalized GHZ state: GME when `m` is `None`,
/// otherwise intactness `≤ m−1`.
pub fn generalized_ghz_threshold(
    n: usize,
    m: Option<usize>,
    theta: f64,
    phi: f64,
    phase_fix: bool,
) -> Result<f64> {
    check_angles(theta, phi)?;
    let c = ghz_coherence(theta, phi, phase_fix);
    match m {
        None => Ok(c / (2.0 + c - 4.0 / pow2::<f64>(n as u32))),
        Some(m) => {
            check_m(n, m)?;
            let (pn, pm) = (pow2::<f64>(n as u32), pow2::<f64>(m as u32));
            let num = pn * (pm - 2.0) * c;
            Ok(num / (num + pm * (pn - 2.0)))
        }
    }
}

/// Noise weights recovered from `⟨M_Z⟩` and `⟨M_X⟩` under the dephasing +
/// white-noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate<T> {
    pub gamma_w: T,
    pub gamma_d: T,
    /// False when a weight falls outside [0, 1] or they sum past 1.
    pub valid: bool,
}

pub fn estimate_gammas<T: Real>(exp_z: T, exp_x: T, n: usize) -> Result<GammaEstimate<T>> {
    if n < 2 {
        return Err(Error::usage("noise estimation needs n ≥ 2"));
    }
    let half = pow2::<T>(n as u32 - 1);
    let gamma_w = (T::one() - exp_z) * half / (half - T::one());
    let gamma_d = T::one() - exp_x - gamma_w;
    let unit = |g: T| g >= T::zero() && g <= T::one();
    let valid = unit(gamma_w) && unit(gamma_d) && gamma_w + gamma_d <= T::one();
    Ok(GammaEstimate {
        gamma_w,
        gamma_d,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub v1: f64,
    pub v2: f64,
    pub margin: f64,
}

/// `points` evenly spaced values on [0, 1].
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Default curve resolution per axis.
pub const DEFAULT_CURVE_POINTS: usize = 101;

/// Bound a witness is compared against in margin curves: the biseparable
/// bound for the separability family, the `(n−1)`-producible bound for the
/// depth family. Both certify a single entangled block.
pub fn gme_bound(witness: &WitnessSpec<f64>) -> Result<f64> {
    match *witness {
        WitnessSpec::Separability { alpha, .. } => Ok(msep_bound(alpha, 2)),
        WitnessSpec::Depth { n, gamma, .. } => Ok(kprod_bound(n, n - 1, gamma)?.value),
    }
}

/// Witness value minus `bound` on the product of per-group visibility
/// states, over `v1s × v2s` (row-major in `v1`).
///
/// The state is affine in each group's GHZ weight, so every witness term is
/// evaluated once on the ideal and once on the mixed group state.
pub fn visibility_margin_curve(
    structure: &Partition,
    witness: &WitnessSpec<f64>,
    bound: f64,
    v1s: &[f64],
    v2s: &[f64],
) -> Result<Vec<MarginPoint>> {
    if structure.n() != witness.n() {
        return Err(Error::validation("structure and witness sizes differ"));
    }
    if let Some(g) = structure.groups().iter().find(|g| g.len() % 2 != 0) {
        return Err(Error::usage(format!(
            "visibility model needs even groups, found one of size {}",
            g.len()
        )));
    }
    for &v in v1s.iter().chain(v2s) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::usage("visibilities must lie in [0, 1]"));
        }
    }
    let sum = witness.product_sum()?;
    let groups = structure.slots();
    let factors = sum.group_factors(&groups);
    let coeffs: Vec<f64> = sum.terms().iter().map(|t| t.coeff).collect();
    let mut ideal = Vec::with_capacity(groups.len());
    let mut mixed = Vec::with_capacity(groups.len());
    for (g, fs) in groups.iter().zip(&factors) {
        let ghz = ghz_standard::<f64>(g.len())?;
        let flat = StateDensity::<f64>::maximally_mixed(g.len())?;
        ideal.push(
            fs.iter()
                .map(|m| mixed_expectation(ghz.matrix(), m).re)
                .collect::<Vec<_>>(),
        );
        mixed.push(
            fs.iter()
                .map(|m| mixed_expectation(flat.matrix(), m).re)
                .collect::<Vec<_>>(),
        );
    }
    let sizes = structure.sizes();
    v1s.par_iter()
        .map(|&v1| {
            v2s.iter()
                .map(|&v2| {
                    let weights = sizes
                        .iter()
                        .map(|&s| visibility_weight(s, v1, v2))
                        .collect::<Result<Vec<f64>>>()?;
                    let value: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(t, &c)| {
                            weights.iter().enumerate().fold(c, |acc, (g, &w)| {
                                acc * (w * ideal[g][t] + (1.0 - w) * mixed[g][t])
                            })
                        })
                        .sum();
                    Ok(MarginPoint {
                        v1,
                        v2,
                        margin: value - bound,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<Vec<_>>>>()
        .map(|rows| rows.concat())
}

/// Writes `v1,v2,margin` rows.
pub fn write_margin_csv<W: Write>(points: &[MarginPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<output>".into(),
        source: e,
    })
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    let source = if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            _ => unreachable!("checked by is_io_error"),
        }
    } else {
        std::io::Error::other(e.to_string())
    };
    Error::Io {
        path: "<csv>".into(),
        source,
    }
}
