//! Numerical bound machinery: the closed-form `M_b` spectrum, see-saw
//! maximisation over product states, brute-force oracles and the SOS check.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pure_expectation, top_eigenpair, DenseOperator, ProductSum};
use crate::num::{pow2, re, Complex, Real};
use crate::states::Partition;
use crate::witness::{Sign, WitnessSpec};

/// `λ₊ = α(x+y)/2 + √(z² + α²(x−y)²/4)`, the largest eigenvalue of
/// `αx|0…0⟩⟨0…0| + αy|1…1⟩⟨1…1| + z σₓ^{⊗n}`.
pub fn mb_lambda_max<T: Real>(x: T, y: T, z: T, alpha: T) -> T {
    let two = T::lit(2.0);
    alpha * (x + y) / two + (z * z + alpha * alpha * (x - y) * (x - y) / (two * two)).sqrt()
}

/// `⌊n/k⌋` groups of `k` consecutive parties plus a remainder group.
pub fn canonical_partition(n: usize, k: usize) -> Result<Partition> {
    if k == 0 || k > n {
        return Err(Error::usage(format!("group size {k} outside 1..={n}")));
    }
    let mut sizes = vec![k; n / k];
    if !n.is_multiple_of(k) {
        sizes.push(n % k);
    }
    Partition::from_sizes(&sizes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            restarts: 200,
            max_iters: 500,
            tol: 1e-10,
            seed: 0xB0B,
        }
    }
}

impl SeesawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::usage("restarts must be at least 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::usage("tol must be positive"));
        }
        Ok(())
    }

    /// Independent generator for one restart.
    pub fn restart_rng(&self, restart: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(restart as u64);
        rng
    }
}

/// Best product state found by an optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult<T: Real> {
    pub value: T,
    pub partition_used: Partition,
    /// One pure state per group, slots in the group's listed order.
    pub optimizer_states: Vec<DVector<Complex<T>>>,
    pub converged: bool,
    /// Sweeps performed by the winning restart.
    pub iterations: usize,
    /// Objective after each sweep of the winning restart (first entry is the
    /// random start).
    pub history: Vec<T>,
    pub restart: usize,
}

/// Haar-random single-qubit pure state.
fn random_qubit<T: Real, R: Rng>(rng: &mut R) -> DVector<Complex<T>> {
    let mut draw = || T::lit(rng.sample::<f64, _>(StandardNormal));
    let v = DVector::from_vec(vec![
        Complex::new(draw(), draw()),
        Complex::new(draw(), draw()),
    ]);
    let norm = v.norm();
    v.map(|z| z / norm)
}

fn random_group_state<T: Real, R: Rng>(size: usize, rng: &mut R) -> DVector<Complex<T>> {
    (0..size).fold(DVector::from_element(1, re(T::one())), |acc, _| {
        acc.kronecker(&random_qubit(rng))
    })
}

/// Amplitudes of `⊗_g |ψ_g⟩` with group `g` occupying `groups[g]` (0-based
/// slots), on the full `n`-qubit register.
pub fn product_state_vector<T: Real>(
    n: usize,
    groups: &[Vec<usize>],
    states: &[DVector<Complex<T>>],
) -> DVector<Complex<T>> {
    DVector::from_fn(1 << n, |index, _| {
        groups
            .iter()
            .zip(states)
            .fold(re(T::one()), |acc, (g, psi)| {
                let sub = g
                    .iter()
                    .fold(0, |s, &slot| (s << 1) | linalg::bit_of(index, slot, n));
                acc * psi[sub]
            })
    })
}

struct Restart<T: Real> {
    value: T,
    states: Vec<DVector<Complex<T>>>,
    converged: bool,
    iterations: usize,
    history: Vec<T>,
}

fn objective<T: Real>(coeffs: &[T], exps: &[Vec<T>]) -> T {
    coeffs
        .iter()
        .enumerate()
        .map(|(t, &c)| exps.iter().fold(c, |acc, e| acc * e[t]))
        .fold(T::zero(), |a, b| a + b)
}

fn run_restart<T: Real>(
    coeffs: &[T],
    factors: &[Vec<DMatrix<Complex<T>>>],
    sizes: &[usize],
    cfg: &SeesawConfig,
    restart: usize,
) -> Restart<T> {
    let mut rng = cfg.restart_rng(restart);
    let mut states: Vec<DVector<Complex<T>>> = sizes
        .iter()
        .map(|&s| random_group_state(s, &mut rng))
        .collect();
    let mut exps: Vec<Vec<T>> = factors
        .iter()
        .zip(&states)
        .map(|(fs, psi)| fs.iter().map(|m| pure_expectation(m, psi)).collect())
        .collect();
    let mut current = objective(coeffs, &exps);
    let mut history = vec![current];
    let tol = T::lit(cfg.tol);
    // Tiny slack for eigen-solver rounding when the state is already optimal.
    let slack = T::tol(1e-12) * (T::one() + current.abs());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let start = current;
        for g in 0..factors.len() {
            let dim = factors[g][0].nrows();
            let mut effective = DMatrix::from_element(dim, dim, re(T::zero()));
            for (t, &c) in coeffs.iter().enumerate() {
                let w = exps
                    .iter()
                    .enumerate()
                    .filter(|&(h, _)| h != g)
                    .fold(c, |acc, (_, e)| acc * e[t]);
                if w != T::zero() {
                    effective += &factors[g][t] * re(w);
                }
            }
            let (value, vector) = top_eigenpair(&effective);
            if value + slack < current {
                continue;
            }
            exps[g] = factors[g]
                .iter()
                .map(|m| pure_expectation(m, &vector))
                .collect();
            states[g] = vector;
            current = objective(coeffs, &exps);
        }
        history.push(current);
        if current - start < tol {
            converged = true;
            break;
        }
    }
    Restart {
        value: current,
        states,
        converged,
        iterations,
        history,
    }
}

/// Maximises `⟨W⟩` over product states across the partition's groups by
/// alternating exact group updates, keeping the best of `cfg.restarts` random
/// starts. Deterministic for a given `cfg` regardless of thread count.
pub fn seesaw_max<T: Real>(
    witness: &ProductSum<T>,
    partition: &Partition,
    cfg: &SeesawConfig,
) -> Result<BoundResult<T>> {
    cfg.validate()?;
    if partition.n() != witness.n_parties() {
        return Err(Error::validation(format!(
            "partition covers {} parties, witness acts on {}",
            partition.n(),
            witness.n_parties()
        )));
    }
    let groups = partition.slots();
    let factors = witness.group_factors(&groups);
    let coeffs: Vec<T> = witness.terms().iter().map(|t| t.coeff).collect();
    let sizes = partition.sizes();
    let runs: Vec<Restart<T>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&coeffs, &factors, &sizes, cfg, r))
        .collect();
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| if b.1.value > a.1.value { b } else { a })
        .expect("at least one restart");
    if !best.value.is_finite() {
        return Err(Error::numeric("see-saw produced a non-finite value"));
    }
    Ok(BoundResult {
        value: best.value,
        partition_used: partition.clone(),
        optimizer_states: best.states,
        converged: best.converged,
        iterations: best.iterations,
        history: best.history,
        restart,
    })
}

/// Points per qubit in grid mode: θ has `density` values on [0, π/2] and φ has
/// `2(density−1)` values on [0, 2π).
fn qubit_grid<T: Real>(density: usize) -> Vec<DVector<Complex<T>>> {
    let d = density.max(2);
    let n_phi = 2 * (d - 1);
    let mut out = Vec::with_capacity(d * n_phi);
    for i in 0..d {
        let theta = T::frac_pi_2() * T::from_usize(i).unwrap() / T::from_usize(d - 1).unwrap();
        for j in 0..n_phi {
            let phi = T::two_pi() * T::from_usize(j).unwrap() / T::from_usize(n_phi).unwrap();
            out.push(DVector::from_vec(vec![
                re(theta.cos()),
                Complex::new(phi.cos(), phi.sin()) * theta.sin(),
            ]));
        }
    }
    out
}

/// Largest number of grid product states evaluated before switching to
/// random sampling.
const GRID_BUDGET: usize = 4_000_000;

/// Direct search for the product-state maximum of a dense witness.
///
/// A single group gives `λ_max`. All-singleton partitions of at most six
/// qubits are searched on a full (θ, φ) grid when that fits in the budget.
/// Otherwise `1000·grid_density` Haar-random product states are tried.
/// Always a lower bound on the true maximum.
pub fn brute_oracle_max<T: Real>(
    witness: &DenseOperator<T>,
    partition: &Partition,
    grid_density: usize,
    seed: u64,
) -> Result<T> {
    witness.require_hermitian()?;
    let n = witness.n_parties();
    if partition.n() != n {
        return Err(Error::validation("partition and witness sizes differ"));
    }
    if partition.m() == 1 {
        return Ok(linalg::hermitian_eig_max(witness)?.0);
    }
    let groups = partition.slots();
    let matrix = witness.matrix();
    let eval = |states: &[DVector<Complex<T>>]| {
        pure_expectation(matrix, &product_state_vector(n, &groups, states))
    };
    let grid = qubit_grid::<T>(grid_density);
    let grid_total = grid.len().checked_pow(n as u32);
    let singletons = partition.k() == 1;
    if singletons && n <= 6 && grid_total.is_some_and(|t| t <= GRID_BUDGET) {
        let total = grid_total.unwrap();
        let best = (0..total)
            .into_par_iter()
            .map(|mut code| {
                let states: Vec<DVector<Complex<T>>> = (0..n)
                    .map(|_| {
                        let s = grid[code % grid.len()].clone();
                        code /= grid.len();
                        s
                    })
                    .collect();
                eval(&states)
            })
            .reduce(|| T::min_value().unwrap(), |a, b| if b > a { b } else { a });
        return Ok(best);
    }
    let samples = 1000 * grid_density.max(1);
    let sizes = partition.sizes();
    let best = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let states: Vec<DVector<Complex<T>>> = sizes
                .iter()
                .map(|&s| random_group_state(s, &mut rng))
                .collect();
            eval(&states)
        })
        .reduce(|| T::min_value().unwrap(), |a, b| if b > a { b } else { a });
    Ok(best)
}

/// `½(α(x+y) + √(α²(x−y)² + 4z²))` with `x = ∏cos²θᵢ`, `y = ∏sin²θᵢ`,
/// `z = ∏sin 2θᵢ`.
fn f_single<T: Real>(alpha: T, thetas: &[T]) -> T {
    let (mut x, mut y, mut z) = (T::one(), T::one(), T::one());
    for &t in thetas {
        let (s, c) = t.sin_cos();
        x *= c * c;
        y *= s * s;
        z *= (t + t).sin();
    }
    let two = T::lit(2.0);
    (alpha * (x + y) + (alpha * alpha * (x - y) * (x - y) + two * two * z * z).sqrt()) / two
}

fn golden_max<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    // Endpoints are where the separable optimum often sits.
    let mut best = (fc, c);
    for x in [a, b, T::zero(), T::frac_pi_2()] {
        let fx = f(x);
        if fx > best.0 {
            best = (fx, x);
        }
    }
    (best.1, best.0)
}

/// Numerical maximum of `⟨α·M_Z + M_X⟩` over products of `m` single-qubit
/// groups, via multi-start coordinate ascent on the angles (phases set to 0).
pub fn msep_bound_numeric<T: Real>(n: usize, m: usize, alpha: T, cfg: &SeesawConfig) -> Result<T> {
    cfg.validate()?;
    if m < 2 || m > n {
        return Err(Error::usage(format!("m = {m} outside 2..={n}")));
    }
    WitnessSpec::separability(n, alpha, Sign::Plus)?;
    let dims = m - 1;
    let tol = T::tol(1e-12);
    let half_pi = T::frac_pi_2();
    let mut starts: Vec<Vec<T>> = vec![vec![T::zero(); dims], vec![T::frac_pi_4(); dims]];
    for r in 0..cfg.restarts {
        let mut rng = cfg.restart_rng(r);
        starts.push(
            (0..dims)
                .map(|_| T::lit(rng.random::<f64>()) * half_pi)
                .collect(),
        );
    }
    let best = starts
        .into_par_iter()
        .map(|mut thetas| {
            let mut value = f_single(alpha, &thetas);
            for _ in 0..cfg.max_iters {
                let before = value;
                for i in 0..dims {
                    let (arg, v) = golden_max(
                        |t| {
                            let mut trial = thetas.clone();
                            trial[i] = t;
                            f_single(alpha, &trial)
                        },
                        T::zero(),
                        half_pi,
                        tol,
                    );
                    if v >= value {
                        thetas[i] = arg;
                        value = v;
                    }
                }
                if value - before < T::lit(cfg.tol) {
                    break;
                }
            }
            value
        })
        .reduce(|| T::min_value().unwrap(), |a, b| if b > a { b } else { a });
    Ok(best)
}

/// `P·(P − ∏xᵢ − ∏yᵢ) − 2^{m−1}(2^{m−1}−2)·∏xᵢyᵢ` with `yᵢ = 1 − xᵢ` and
/// `P = ∏(xᵢ+yᵢ)`; non-negative on `[0,1]^{m−1}`. Exact in rational
/// arithmetic.
pub fn sos_gap<T>(m: usize, xs: &[T]) -> Result<T>
where
    T: num_traits::Num + Copy,
{
    if m < 2 || xs.len() != m - 1 {
        return Err(Error::usage(format!(
            "sos_gap(m = {m}) needs m − 1 values, got {}",
            xs.len()
        )));
    }
    let one = T::one();
    let (mut p, mut px, mut py, mut pxy) = (one, one, one, one);
    for &x in xs {
        let y = one - x;
        p = p * (x + y);
        px = px * x;
        py = py * y;
        pxy = pxy * x * y;
    }
    let h = pow2::<T>(m as u32 - 1);
    Ok(p * (p - px - py) - h * (h - one - one) * pxy)
}

/// Computed k-producible bounds of the depth witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KprodCurve {
    pub n: usize,
    pub gammas: Vec<f64>,
    pub ks: Vec<usize>,
    /// `values[i][j]` for `ks[i]`, `gammas[j]`.
    pub values: Vec<Vec<f64>>,
    pub converged: bool,
}

/// See-saw maxima of `W_de(γ)` on the canonical k-partition for each
/// `(k, γ)`. Because a k-producible state is also (k+1)-producible, each
/// value is raised to the maximum over smaller `k` in `ks` when the
/// optimiser falls short.
pub fn kprod_curve(
    n: usize,
    gammas: &[f64],
    ks: &[usize],
    cfg: &SeesawConfig,
) -> Result<KprodCurve> {
    let mut values = Vec::with_capacity(ks.len());
    let mut converged = true;
    let mut sorted_ks = ks.to_vec();
    sorted_ks.sort_unstable();
    sorted_ks.dedup();
    for &k in &sorted_ks {
        let partition = canonical_partition(n, k)?;
        let mut row = Vec::with_capacity(gammas.len());
        for &gamma in gammas {
            let spec = WitnessSpec::<f64>::depth(n, gamma)?;
            let result = seesaw_max(&spec.product_sum()?, &partition, cfg)?;
            converged &= result.converged;
            row.push(result.value);
        }
        if let Some(prev) = values.last() {
            let prev: &Vec<f64> = prev;
            for (v, p) in row.iter_mut().zip(prev) {
                *v = v.max(*p);
            }
        }
        values.push(row);
    }
    Ok(KprodCurve {
        n,
        gammas: gammas.to_vec(),
        ks: sorted_ks,
        values,
        converged,
    })
}
