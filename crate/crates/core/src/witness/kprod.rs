use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Register size the k-producible bounds are known for.
pub const KPROD_PARTIES: usize = 8;

/// Reference bounds `(k, γ, β)`; these are returned verbatim.
pub const TABULATED: [(usize, f64, f64); 9] = [
    (1, 2.0, 0.8365),
    (2, 2.0, 1.0450),
    (2, 1.6, 0.7904),
    (3, 2.0, 1.1699),
    (3, 1.6, 0.9137),
    (4, 2.0, 1.3856),
    (5, 2.0, 1.6357),
    (6, 2.0, 1.8858),
    (7, 2.0, 2.0578),
];

/// γ nodes of the computed curve (γ = 0.05, 0.10, …, 2.00).
pub const KPROD_GAMMAS: [f64; 40] = {
    let mut g = [0.0; 40];
    let mut i = 0;
    while i < 40 {
        g[i] = (i + 1) as f64 / 20.0;
        i += 1;
    }
    g
};

/// See-saw maxima per `(k−1, γ node)`, regenerated with
/// `cargo run --release -p entstruct --example kprod_table`.
const CURVE: [[f64; 40]; 7] = include!("kprod_curve.in");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSource {
    /// Reference value.
    Tabulated,
    /// Linear interpolation of the computed see-saw curve. The curve is convex
    /// in γ, so the chord never undercuts it.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KprodBound {
    pub value: f64,
    pub source: BoundSource,
}

/// Largest `⟨W_de(γ)⟩` over k-producible states of [`KPROD_PARTIES`] qubits
/// with the default angles.
pub fn kprod_bound(n: usize, k: usize, gamma: f64) -> Result<KprodBound> {
    if n != KPROD_PARTIES {
        return Err(Error::usage(format!(
            "k-producible bounds are available for n = {KPROD_PARTIES} only, got {n}"
        )));
    }
    if !(1..n).contains(&k) {
        return Err(Error::usage(format!("k = {k} outside 1..={}", n - 1)));
    }
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::usage(format!("gamma = {gamma} outside (0, 2]")));
    }
    if let Some(&(_, _, beta)) = TABULATED
        .iter()
        .find(|&&(tk, tg, _)| tk == k && (tg - gamma).abs() <= 1e-12)
    {
        return Ok(KprodBound {
            value: beta,
            source: BoundSource::Tabulated,
        });
    }
    Ok(KprodBound {
        value: interpolate(k, gamma),
        source: BoundSource::Computed,
    })
}

fn interpolate(k: usize, gamma: f64) -> f64 {
    let row = &CURVE[k - 1];
    // At γ = 0 the witness is −𝒜₊^{⊗n}, whose product-state maximum is 1.
    let (mut g0, mut b0) = (0.0, 1.0);
    for (&g1, &b1) in KPROD_GAMMAS.iter().zip(row) {
        if gamma <= g1 {
            let t = (gamma - g0) / (g1 - g0);
            return b0 + t * (b1 - b0);
        }
        (g0, b0) = (g1, b1);
    }
    b0
}

/// Device-independent depth bounds `S_k` at γ = 2, for reference.
pub fn di_bound(k: usize, gamma: f64) -> Result<f64> {
    if (gamma - 2.0).abs() > 1e-12 {
        return Err(Error::usage(
            "device-independent bounds are defined at gamma = 2 only",
        ));
    }
    match k {
        1 => Ok(1.0),
        2 => Ok(std::f64::consts::SQRT_2),
        3 => Ok(5.0 / 3.0),
        4 => Ok(1.8428),
        _ => Err(Error::usage(format!(
            "no device-independent bound for k = {k}"
        ))),
    }
}
