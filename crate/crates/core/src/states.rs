//! Density matrices, party partitions and the GHZ-family state constructors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, mixed_expectation, DenseOperator, DOWNSTREAM_TOL};
use crate::num::{re, Complex, Real};

/// Positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDensity<T: Real> {
    op: DenseOperator<T>,
}

impl<T: Real> StateDensity<T> {
    /// Validates Hermiticity, unit trace (±1e-10) and positivity (λ_min ≥ −1e-10).
    pub fn from_operator(op: DenseOperator<T>) -> Result<Self> {
        op.require_hermitian()?;
        let tol = T::tol(DOWNSTREAM_TOL);
        let trace = op.trace();
        if (trace.re - T::one()).abs() > tol || trace.im.abs() > tol {
            return Err(Error::validation(format!(
                "trace is {}, expected 1",
                trace.re.to_f64_lossy()
            )));
        }
        let min = linalg::hermitian_eigenvalues(&op)?[0];
        if min < -tol {
            return Err(Error::validation(format!(
                "operator has negative eigenvalue {:e}",
                min.to_f64_lossy()
            )));
        }
        Ok(Self { op })
    }

    /// Callers guarantee the invariants (convex combinations and tensor
    /// products of valid states).
    pub(crate) fn trusted(op: DenseOperator<T>) -> Self {
        debug_assert!(op.is_hermitian() || op.hermiticity_defect() <= T::tol(DOWNSTREAM_TOL));
        debug_assert!((op.trace().re - T::one()).abs() <= T::tol(1e-8));
        Self { op }
    }

    /// `|ψ⟩⟨ψ|` for a unit vector `ψ` on `n_parties` qubits.
    pub fn pure(n_parties: usize, psi: &DVector<Complex<T>>) -> Result<Self> {
        linalg::check_parties(n_parties)?;
        if psi.len() != 1 << n_parties {
            return Err(Error::validation(format!(
                "state vector has length {}, expected {}",
                psi.len(),
                1usize << n_parties
            )));
        }
        if (psi.norm() - T::one()).abs() > T::tol(DOWNSTREAM_TOL) {
            return Err(Error::validation("state vector is not normalised"));
        }
        let matrix = psi * psi.adjoint();
        Ok(Self::trusted(DenseOperator::from_parts_unchecked(
            n_parties, matrix, true,
        )))
    }

    /// `𝕀/2ⁿ`.
    pub fn maximally_mixed(n_parties: usize) -> Result<Self> {
        let id = DenseOperator::identity(n_parties)?;
        let dim = T::from_usize(id.dim()).expect("dimension fits");
        Ok(Self::trusted(id.scaled(T::one() / dim)))
    }

    pub fn n_parties(&self) -> usize {
        self.op.n_parties()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &DenseOperator<T> {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        self.op.matrix()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> T {
        mixed_expectation(self.matrix(), self.matrix()).re
    }

    /// `w·self + (1−w)·other`.
    pub fn mix(&self, weight: T, other: &Self) -> Result<Self> {
        if weight < T::zero() || weight > T::one() {
            return Err(Error::usage("mixing weight must lie in [0, 1]"));
        }
        Ok(Self::trusted(self.op.combine(
            weight,
            &other.op,
            T::one() - weight,
        )?))
    }

    /// Tensor product of states in the given order.
    pub fn kron(states: &[Self]) -> Result<Self> {
        let ops: Vec<DenseOperator<T>> = states.iter().map(|s| s.op.clone()).collect();
        Ok(Self::trusted(linalg::kron(&ops)?))
    }

    pub fn permute_parties(&self, order: &[usize]) -> Result<Self> {
        Ok(Self::trusted(self.op.permute_parties(order)?))
    }

    /// Diagonal of the density matrix in the computational basis.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.matrix()[(i, i)].re).collect()
    }
}

/// `Tr(ρ·op)`; the imaginary residue must stay below 1e-10.
pub fn expectation<T: Real>(state: &StateDensity<T>, op: &DenseOperator<T>) -> Result<T> {
    if state.n_parties() != op.n_parties() {
        return Err(Error::validation(format!(
            "state has {} parties but operator has {}",
            state.n_parties(),
            op.n_parties()
        )));
    }
    op.require_hermitian()?;
    let value = mixed_expectation(state.matrix(), op.matrix());
    if value.im.abs() >= T::tol(DOWNSTREAM_TOL) {
        return Err(Error::numeric(format!(
            "expectation has imaginary residue {:e}",
            value.im.to_f64_lossy()
        )));
    }
    Ok(value.re)
}

/// Disjoint, exhaustive grouping of parties `1..=n` (1-based).
///
/// Group order and the order of parties inside a group are preserved; they
/// fix how per-group states are laid onto the register in
/// [`product_structure`]. Use [`Partition::canonical`] to compare structures.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    n: usize,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = groups.iter().map(Vec::len).sum();
        if n == 0 {
            return Err(Error::validation(
                "partition must contain at least one party",
            ));
        }
        let mut seen = BTreeSet::new();
        for g in &groups {
            if g.is_empty() {
                return Err(Error::validation("partition groups must be non-empty"));
            }
            for &p in g {
                if p == 0 || p > n {
                    return Err(Error::validation(format!("party {p} outside 1..={n}")));
                }
                if !seen.insert(p) {
                    return Err(Error::validation(format!(
                        "party {p} appears in two groups"
                    )));
                }
            }
        }
        Ok(Self { groups, n })
    }

    /// Contiguous groups of the given sizes: `[2, 1]` → `{1,2}{3}`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut next = 1;
        let groups = sizes
            .iter()
            .map(|&s| {
                let g: Vec<usize> = (next..next + s).collect();
                next += s;
                g
            })
            .collect();
        Self::new(groups)
    }

    pub fn single_block(n: usize) -> Result<Self> {
        Self::from_sizes(&[n])
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::from_sizes(&vec![1; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Number of groups.
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    /// Largest group size.
    pub fn k(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Group sizes sorted descending; the structure's type.
    pub fn size_multiset(&self) -> Vec<usize> {
        let mut s = self.sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Groups as 0-based tensor slots.
    pub fn slots(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|p| p - 1).collect())
            .collect()
    }

    /// Each group sorted, groups ordered by their smallest party.
    pub fn canonical(&self) -> Self {
        let mut groups: Vec<Vec<usize>> = self
            .groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.sort_unstable();
                g
            })
            .collect();
        groups.sort();
        Self { groups, n: self.n }
    }

    /// Same grouping regardless of order.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }

    /// Renders groups with custom party labels, e.g. `{1,2'}{3',4}`.
    pub fn display_with(&self, labels: &[&str]) -> String {
        self.groups
            .iter()
            .map(|g| {
                let inner: Vec<String> = g
                    .iter()
                    .map(|&p| {
                        labels
                            .get(p - 1)
                            .map_or_else(|| p.to_string(), |l| l.to_string())
                    })
                    .collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(groups: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(groups)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.groups
    }
}

/// Accepts `"4+2+2"` (contiguous sizes) or `"1,2|3,4"` (explicit groups).
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |what: &str| Error::usage(format!("cannot parse structure \"{s}\": {what}"));
        if s.contains('|') || s.contains(',') {
            let groups = s
                .split('|')
                .map(|g| {
                    g.split(',')
                        .map(|p| {
                            p.trim()
                                .parse::<usize>()
                                .map_err(|_| bad("party is not an integer"))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Self::new(groups)
        } else {
            let sizes = s
                .split('+')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| bad("size is not an integer"))
                })
                .collect::<Result<Vec<_>>>()?;
            if sizes.contains(&0) {
                return Err(bad("sizes must be positive"));
            }
            Self::from_sizes(&sizes)
        }
    }
}

/// `cos θ|0…0⟩ + e^{iφ} sin θ|1…1⟩`.
pub fn ghz<T: Real>(n: usize, theta: T, phi: T) -> Result<StateDensity<T>> {
    linalg::check_parties(n)?;
    let dim = 1usize << n;
    let mut psi = DVector::from_element(dim, re(T::zero()));
    psi[0] = re(theta.cos());
    psi[dim - 1] = Complex::new(phi.cos(), phi.sin()) * theta.sin();
    StateDensity::pure(n, &psi)
}

/// Standard `(|0…0⟩ + |1…1⟩)/√2`; for `n = 1` this is `|+⟩`.
pub fn ghz_standard<T: Real>(n: usize) -> Result<StateDensity<T>> {
    ghz(n, T::frac_pi_4(), T::zero())
}

/// Lays group states onto the register so that party `p` sits in slot `p`.
/// `group_states[i]` must span `|groups[i]|` qubits, in the group's listed order.
pub fn product_structure<T: Real>(
    partition: &Partition,
    group_states: &[StateDensity<T>],
) -> Result<StateDensity<T>> {
    if group_states.len() != partition.m() {
        return Err(Error::validation(format!(
            "{} group states for {} groups",
            group_states.len(),
            partition.m()
        )));
    }
    for (i, (g, s)) in partition.groups().iter().zip(group_states).enumerate() {
        if s.n_parties() != g.len() {
            return Err(Error::validation(format!(
                "group {i} has {} parties but its state has {}",
                g.len(),
                s.n_parties()
            )));
        }
    }
    linalg::check_parties(partition.n())?;
    let joint = StateDensity::kron(group_states)?;
    let concatenated: Vec<usize> = partition.slots().concat();
    let mut order = vec![0; partition.n()];
    for (position, &party) in concatenated.iter().enumerate() {
        order[party] = position;
    }
    joint.permute_parties(&order)
}

/// Product of standard GHZ states over the partition's groups.
pub fn ghz_product<T: Real>(partition: &Partition) -> Result<StateDensity<T>> {
    let states = partition
        .groups()
        .iter()
        .map(|g| ghz_standard(g.len()))
        .collect::<Result<Vec<_>>>()?;
    product_structure(partition, &states)
}

/// `(1−p)·ρ + p·𝕀/2ⁿ`.
pub fn white_noise_mix<T: Real>(state: &StateDensity<T>, p: T) -> Result<StateDensity<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::usage(format!(
            "noise probability {} outside [0, 1]",
            p.to_f64_lossy()
        )));
    }
    let mixed = StateDensity::maximally_mixed(state.n_parties())?;
    state.mix(T::one() - p, &mixed)
}

/// GHZ with dephasing weight `γ_d` (split over the two all-equal product
/// states) and white-noise weight `γ_w`.
pub fn ghz_noise_model<T: Real>(n: usize, gamma_d: T, gamma_w: T) -> Result<StateDensity<T>> {
    if gamma_d < T::zero() || gamma_w < T::zero() {
        return Err(Error::usage("noise weights must be non-negative"));
    }
    if gamma_d + gamma_w > T::one() + T::tol(1e-15) {
        return Err(Error::usage("noise weights sum to more than 1"));
    }
    let ghz = ghz_standard::<T>(n)?;
    let dim = 1usize << n;
    let half = T::lit(0.5);
    let mut matrix = ghz.matrix().map(|z| z * (T::one() - gamma_d - gamma_w));
    let white = gamma_w / T::from_usize(dim).expect("dimension fits");
    for i in 0..dim {
        matrix[(i, i)] += re(white);
    }
    matrix[(0, 0)] += re(gamma_d * half);
    matrix[(dim - 1, dim - 1)] += re(gamma_d * half);
    Ok(StateDensity::trusted(DenseOperator::from_parts_unchecked(
        n, matrix, true,
    )))
}

/// Weight on the GHZ component in the interference-visibility model:
/// `((1+v₂)/2)^{n/2−1} · ((1+v₁)/2)^{n/2}`.
pub fn visibility_weight<T: Real>(n: usize, v1: T, v2: T) -> Result<T> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::usage(format!(
            "visibility model needs an even number of parties, got {n}"
        )));
    }
    for v in [v1, v2] {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::usage("visibilities must lie in [0, 1]"));
        }
    }
    let half = T::lit(0.5);
    let pairs = (n / 2) as i32;
    Ok(((T::one() + v2) * half).powi(pairs - 1) * ((T::one() + v1) * half).powi(pairs))
}

/// GHZ_n mixed with white noise at the visibility-model weight.
pub fn visibility_state<T: Real>(n: usize, v1: T, v2: T) -> Result<StateDensity<T>> {
    let w = visibility_weight(n, v1, v2)?;
    white_noise_mix(&ghz_standard(n)?, T::one() - w)
}

/// Path-mode labels of the eight-photon interferometer, in slot order.
pub const PATH_LABELS: [&str; 8] = ["1", "2'", "3'", "4", "5", "6'", "7'", "8"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pbs {
    Up,
    Down,
}

/// Setting of the three beam splitters, PBS₁ first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub pbs1: Pbs,
    pub pbs2: Pbs,
    pub pbs3: Pbs,
}

impl Geometry {
    pub fn new(pbs1: Pbs, pbs2: Pbs, pbs3: Pbs) -> Self {
        Self { pbs1, pbs2, pbs3 }
    }

    /// All eight settings in `UUU, UUD, …, DDD` order.
    pub fn all() -> Vec<Self> {
        let bit = |b: usize| if b == 0 { Pbs::Up } else { Pbs::Down };
        (0..8)
            .map(|i| Self::new(bit((i >> 2) & 1), bit((i >> 1) & 1), bit(i & 1)))
            .collect()
    }

    pub fn structure(&self) -> Partition {
        geometry_to_structure(self.pbs1, self.pbs2, self.pbs3)
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in [self.pbs1, self.pbs2, self.pbs3] {
            f.write_str(if p == Pbs::Up { "U" } else { "D" })?;
        }
        Ok(())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<Pbs> = s
            .trim()
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'U' => Ok(Pbs::Up),
                'D' => Ok(Pbs::Down),
                _ => Err(Error::usage(format!(
                    "geometry \"{s}\": expected U or D, got '{ch}'"
                ))),
            })
            .collect::<Result<_>>()?;
        match bits[..] {
            [a, b, c] => Ok(Self::new(a, b, c)),
            _ => Err(Error::usage(format!(
                "geometry \"{s}\" must have exactly three letters"
            ))),
        }
    }
}

/// Entanglement structure produced by a beam-splitter setting.
///
/// Photon pairs {1,2'}, {3',4}, {5,6'}, {7',8} (slots 1 to 8) start separate.
/// PBS₂ fuses the first two pairs, PBS₃ the last two, and PBS₁ fuses the
/// block holding 2' with the block holding 7'.
pub fn geometry_to_structure(pbs1: Pbs, pbs2: Pbs, pbs3: Pbs) -> Partition {
    let mut blocks: Vec<Vec<usize>> = vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]];
    let mut fuse = |a: usize, b: usize| {
        let ia = blocks
            .iter()
            .position(|g| g.contains(&a))
            .expect("party present");
        let ib = blocks
            .iter()
            .position(|g| g.contains(&b))
            .expect("party present");
        if ia != ib {
            let moved = blocks.remove(ib.max(ia));
            blocks[ia.min(ib)].extend(moved);
        }
    };
    if pbs2 == Pbs::Up {
        fuse(2, 3);
    }
    if pbs3 == Pbs::Up {
        fuse(6, 7);
    }
    if pbs1 == Pbs::Up {
        fuse(2, 7);
    }
    Partition::new(blocks)
        .expect("blocks are a partition of 1..=8")
        .canonical()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    type Op = DenseOperator<f64>;

    fn dim_of<T: Real>(n: usize) -> T {
        crate::num::pow2(n as u32)
    }

    fn mz(n: usize) -> Op {
        Op::proj0()
            .tensor_power(n)
            .unwrap()
            .plus(&Op::proj1().tensor_power(n).unwrap())
            .unwrap()
    }

    fn mx(n: usize) -> Op {
        Op::pauli_x().tensor_power(n).unwrap()
    }

    #[test]
    fn bell_state_parity() {
        let s = ghz(2, FRAC_PI_4, 0.0).unwrap();
        assert!((expectation(&s, &mx(2)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ghz8_saturates_both_observables() {
        let s = ghz_standard::<f64>(8).unwrap();
        assert!((expectation(&s, &mz(8)).unwrap() - 1.0).abs() < 1e-12);
        assert!((expectation(&s, &mx(8)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generalized_ghz_coherence_is_sin2theta_cosphi() {
        let s = ghz(3, FRAC_PI_6, FRAC_PI_2).unwrap();
        assert!(expectation(&s, &mx(3)).unwrap().abs() < 1e-14);
        for (theta, phi) in [(0.3, 0.0), (0.5, 1.0), (FRAC_PI_4, 2.5)] {
            let s = ghz(4, theta, phi).unwrap();
            let want = (2.0 * theta).sin() * phi.cos();
            assert!((expectation(&s, &mx(4)).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_expectation_is_one_and_mixed_z_is_zero() {
        let s = ghz(3, 0.4, 0.7).unwrap();
        assert!((expectation(&s, &Op::identity(3).unwrap()).unwrap() - 1.0).abs() < 1e-14);
        let mixed = StateDensity::<f64>::maximally_mixed(1).unwrap();
        assert!(expectation(&mixed, &Op::pauli_z()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let s = ghz_standard::<f64>(2).unwrap();
        assert!(matches!(
            expectation(&s, &Op::pauli_z()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn contiguous_bell_pairs_have_unit_parity() {
        let p = Partition::from_sizes(&[2, 2]).unwrap();
        let bell = ghz_standard::<f64>(2).unwrap();
        let s = product_structure(&p, &[bell.clone(), bell]).unwrap();
        assert!((expectation(&s, &mx(4)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interleaved_bell_pairs_projector_oracle() {
        // Brute force: |Φ⁺⟩_{14} ⊗ |Φ⁺⟩_{23} written out in the 16-dim basis.
        let mut psi = DVector::from_element(16, re(0.0));
        for a in 0..2 {
            for b in 0..2 {
                // bits: slot0 = a, slot1 = b, slot2 = b, slot3 = a
                let idx = (a << 3) | (b << 2) | (b << 1) | a;
                psi[idx] = re(0.5);
            }
        }
        let brute = StateDensity::pure(4, &psi).unwrap();
        let p = Partition::new(vec![vec![1, 4], vec![2, 3]]).unwrap();
        let bell = ghz_standard::<f64>(2).unwrap();
        let built = product_structure(&p, &[bell.clone(), bell]).unwrap();
        assert!((built.matrix() - brute.matrix()).norm() < 1e-14);
        let p0 = Op::proj0().tensor_power(4).unwrap();
        assert!((expectation(&built, &p0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn g62_has_half_mz() {
        let p = Partition::from_sizes(&[6, 2]).unwrap();
        let s = ghz_product::<f64>(&p).unwrap();
        assert!((expectation(&s, &mz(8)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_structure_rejects_mismatched_state() {
        let p = Partition::from_sizes(&[2, 2]).unwrap();
        let s2 = ghz_standard::<f64>(2).unwrap();
        let s3 = ghz_standard::<f64>(3).unwrap();
        assert!(product_structure(&p, &[s2, s3]).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![1, 2], vec![2, 3]]).is_err());
        assert!(Partition::new(vec![vec![1, 4]]).is_err());
        assert!(Partition::new(vec![vec![1], vec![]]).is_err());
        let p: Partition = "4+2+2".parse().unwrap();
        assert_eq!(p.sizes(), vec![4, 2, 2]);
        let q: Partition = "5,6,7,8|1,2|3,4".parse().unwrap();
        assert_eq!(q.k(), 4);
        assert_eq!(q.m(), 3);
        assert!(!p.same_structure(&q));
    }

    #[test]
    fn white_noise_endpoints() {
        let g = ghz_standard::<f64>(3).unwrap();
        assert_eq!(white_noise_mix(&g, 0.0).unwrap().matrix(), g.matrix());
        let full = white_noise_mix(&g, 1.0).unwrap();
        assert!(expectation(&full, &mx(3)).unwrap().abs() < 1e-15);
        assert!(white_noise_mix(&g, 1.5).is_err());
    }

    #[test]
    fn noisy_ghz8_witness_value() {
        // 2⟨M_Z⟩ + ⟨M_X⟩ = 3(0.8) + 2(0.2)/2⁷
        let s = white_noise_mix(&ghz_standard::<f64>(8).unwrap(), 0.2).unwrap();
        let w = 2.0 * expectation(&s, &mz(8)).unwrap() + expectation(&s, &mx(8)).unwrap();
        assert!((w - 2.403125).abs() < 1e-12);
    }

    #[test]
    fn white_noise_expectations_over_grid() {
        for n in 2..=8 {
            let g = ghz_standard::<f64>(n).unwrap();
            let (z, x) = (mz(n), mx(n));
            for i in 0..=10 {
                let p = i as f64 / 10.0;
                let s = white_noise_mix(&g, p).unwrap();
                let want_z = (1.0 - p) + p / dim_of::<f64>(n - 1);
                assert!((expectation(&s, &x).unwrap() - (1.0 - p)).abs() < 1e-10);
                assert!((expectation(&s, &z).unwrap() - want_z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn noise_model_expectations() {
        let n = 6;
        let (gd, gw) = (0.13, 0.21);
        let s = ghz_noise_model(n, gd, gw).unwrap();
        let half = dim_of::<f64>(n - 1);
        let want_z = 1.0 - gw * (half - 1.0) / half;
        assert!((expectation(&s, &mz(n)).unwrap() - want_z).abs() < 1e-12);
        assert!((expectation(&s, &mx(n)).unwrap() - (1.0 - gw - gd)).abs() < 1e-12);
        assert_eq!(
            ghz_noise_model(n, 0.0, 0.0).unwrap(),
            ghz_standard(n).unwrap()
        );
        assert!(ghz_noise_model(n, 0.6, 0.6).is_err());
        assert!(ghz_noise_model(n, -0.1, 0.0).is_err());
    }

    #[test]
    fn visibility_weights() {
        assert!((visibility_weight(2, 0.5f64, 0.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((visibility_weight(4, 0.5f64, 0.5).unwrap() - 27.0 / 64.0).abs() < 1e-15);
        assert!(visibility_weight(3, 1.0, 1.0).is_err());
        let s = visibility_state(4, 0.5, 0.5).unwrap();
        // Weight read back from the ⟨M_X⟩ coherence.
        assert!((expectation(&s, &mx(4)).unwrap() - 27.0 / 64.0).abs() < 1e-14);
        assert!((s.operator().trace().re - 1.0).abs() < 1e-14);
        assert_eq!(
            visibility_state(4, 1.0, 1.0).unwrap(),
            ghz_standard(4).unwrap()
        );
    }

    #[test]
    fn geometry_examples() {
        use Pbs::*;
        assert_eq!(geometry_to_structure(Up, Up, Up).sizes(), vec![8]);
        let g62 = geometry_to_structure(Up, Up, Down);
        assert_eq!(
            g62,
            Partition::new(vec![vec![1, 2, 3, 4, 7, 8], vec![5, 6]]).unwrap()
        );
        let g2222 = geometry_to_structure(Down, Down, Down);
        assert_eq!(g2222, "1,2|3,4|5,6|7,8".parse::<Partition>().unwrap());
        assert_eq!(g62.display_with(&PATH_LABELS), "{1,2',3',4,7',8}{5,6'}");
    }

    #[test]
    fn geometries_give_five_structure_types() {
        let mut kinds = BTreeSet::new();
        for g in Geometry::all() {
            let p = g.structure();
            assert_eq!(p.n(), 8);
            assert!(p.sizes().iter().all(|s| [2, 4, 6, 8].contains(s)));
            kinds.insert(p.size_multiset());
        }
        let want: BTreeSet<Vec<usize>> = [
            vec![8],
            vec![6, 2],
            vec![4, 4],
            vec![4, 2, 2],
            vec![2, 2, 2, 2],
        ]
        .into_iter()
        .collect();
        assert_eq!(kinds, want);
        assert_eq!("uud".parse::<Geometry>().unwrap().to_string(), "UUD");
    }

    #[test]
    fn from_operator_validates() {
        let bad = Op::pauli_z();
        assert!(StateDensity::from_operator(bad).is_err());
        let neg = Op::identity(1)
            .unwrap()
            .scaled(0.5)
            .combine(1.0, &Op::pauli_x(), 0.8)
            .unwrap();
        assert!(StateDensity::from_operator(neg).is_err());
        let ok = kron(&[Op::proj0(), Op::proj1()]).unwrap();
        assert!(StateDensity::from_operator(ok).is_ok());
    }
}
