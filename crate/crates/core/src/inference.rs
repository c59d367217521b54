//! Three-step deduction of a minimal entanglement structure from measured
//! expectation values: GME test, intactness/depth scans, then a greedy
//! subset-witness scan.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::linalg;
use crate::states::Partition;
use crate::tomo::{estimate_mz, estimate_product_expectation, Label, MeasurementRecord};
use crate::witness::{
    default_gamma_grid, depth_scan, intactness_scan, msep_bound, DepthCheck, Estimate,
    ExpectationPair, IntactnessCheck, Sign, DEFAULT_CONFIDENCE_SIGMAS, KPROD_PARTIES,
    VIOLATION_EPS,
};

pub const SCHEMA: &str = "entstruct/1";

/// Emitted verbatim in every report.
pub const ASSUMPTIONS: &str = "\
The proposed partition is the least entangled structure compatible with the \
observed witness violations, not a unique reconstruction. It assumes the state \
is a product of genuinely entangled groups and not a convex mixture of \
different entanglement structures. A group is accepted only when its subset \
witness is violated; parties without such evidence are reported as \
separate. Bounds on intactness and depth hold at the stated confidence level \
for the measured data alone.";

/// Estimated expectation values on subsets of parties (1-based, sorted).
pub trait ExpectationSource {
    fn n(&self) -> usize;

    /// `⟨|0…0⟩⟨0…0| + |1…1⟩⟨1…1|⟩` on the subset.
    fn mz(&self, parties: &[usize]) -> Option<Estimate>;

    /// `⟨O^{⊗S}⟩` for the single-qubit observable `label`.
    fn parity(&self, label: Label, parties: &[usize]) -> Option<Estimate>;
}

fn record_for<'a>(
    records: &'a [MeasurementRecord],
    label: Label,
    parties: &[usize],
) -> Option<&'a MeasurementRecord> {
    records
        .iter()
        .find(|r| r.setting.uniform_label() == Some(label))
        .or_else(|| records.iter().find(|r| r.setting.measures(parties, label)))
        .filter(|r| r.setting.measures(parties, label) && r.total() > 0)
}

impl ExpectationSource for [MeasurementRecord] {
    fn n(&self) -> usize {
        self.first().map_or(0, MeasurementRecord::n)
    }

    fn mz(&self, parties: &[usize]) -> Option<Estimate> {
        estimate_mz(record_for(self, Label::Z, parties)?, parties).ok()
    }

    fn parity(&self, label: Label, parties: &[usize]) -> Option<Estimate> {
        estimate_product_expectation(record_for(self, label, parties)?, parties).ok()
    }
}

impl ExpectationSource for Vec<MeasurementRecord> {
    fn n(&self) -> usize {
        self.as_slice().n()
    }

    fn mz(&self, parties: &[usize]) -> Option<Estimate> {
        self.as_slice().mz(parties)
    }

    fn parity(&self, label: Label, parties: &[usize]) -> Option<Estimate> {
        self.as_slice().parity(label, parties)
    }
}

/// Observable named in an expectation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TableObservable {
    #[serde(rename = "MZ")]
    Mz,
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "X")]
    X,
    #[serde(rename = "APLUS")]
    APlus,
    #[serde(rename = "AMIX")]
    AMix,
}

impl TableObservable {
    fn of_label(label: Label) -> Self {
        match label {
            Label::Z => Self::Z,
            Label::X => Self::X,
            Label::APlus => Self::APlus,
            Label::AMix => Self::AMix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub subset: Vec<usize>,
    pub observable: TableObservable,
    pub value: f64,
    #[serde(default)]
    pub sigma: f64,
}

/// Expectation values supplied directly instead of counts. Subsets that are
/// not listed are treated as unmeasured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableFile", into = "TableFile")]
pub struct ExpectationTable {
    n: usize,
    entries: BTreeMap<(TableObservable, Vec<usize>), Estimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    n: usize,
    entries: Vec<TableEntry>,
}

impl TryFrom<TableFile> for ExpectationTable {
    type Error = Error;

    fn try_from(file: TableFile) -> Result<Self> {
        let mut table = Self::new(file.n)?;
        for e in file.entries {
            table.insert(e.observable, &e.subset, Estimate::new(e.value, e.sigma)?)?;
        }
        Ok(table)
    }
}

impl From<ExpectationTable> for TableFile {
    fn from(t: ExpectationTable) -> Self {
        TableFile {
            n: t.n,
            entries: t
                .entries
                .into_iter()
                .map(|((observable, subset), e)| TableEntry {
                    subset,
                    observable,
                    value: e.value,
                    sigma: e.sigma,
                })
                .collect(),
        }
    }
}

impl ExpectationTable {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > linalg::max_parties() {
            return Err(Error::usage(format!(
                "n = {n} outside 1..={}",
                linalg::max_parties()
            )));
        }
        Ok(Self {
            n,
            entries: BTreeMap::new(),
        })
    }

    /// Adds or replaces an entry; the subset may be given in any order.
    pub fn insert(
        &mut self,
        observable: TableObservable,
        subset: &[usize],
        estimate: Estimate,
    ) -> Result<()> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        key.dedup();
        if key.len() != subset.len() || key.is_empty() || key.iter().any(|&p| p == 0 || p > self.n)
        {
            return Err(Error::validation(format!(
                "invalid subset {subset:?} for n = {}",
                self.n
            )));
        }
        self.entries.insert((observable, key), estimate);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, observable: TableObservable, parties: &[usize]) -> Option<Estimate> {
        let mut key = parties.to_vec();
        key.sort_unstable();
        self.entries.get(&(observable, key)).copied()
    }
}

impl ExpectationSource for ExpectationTable {
    fn n(&self) -> usize {
        self.n
    }

    fn mz(&self, parties: &[usize]) -> Option<Estimate> {
        self.get(TableObservable::Mz, parties)
    }

    fn parity(&self, label: Label, parties: &[usize]) -> Option<Estimate> {
        self.get(TableObservable::of_label(label), parties)
    }
}

pub fn parse_table(text: &str) -> Result<ExpectationTable> {
    serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let message = full
            .rsplit_once(" at line ")
            .map_or(full.clone(), |(m, _)| m.to_string());
        ParseError::Malformed {
            line: e.line(),
            column: e.column(),
            message,
        }
        .into()
    })
}

pub fn load_table(path: &Path) -> Result<ExpectationTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_table(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Standard errors required by the intactness and depth scans.
    pub confidence_sigmas: f64,
    /// Standard errors required by the GME test and the subset scan.
    pub scan_sigmas: f64,
    pub gamma_grid: Vec<f64>,
    /// `α` of the subset witnesses.
    pub subset_alpha: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            confidence_sigmas: DEFAULT_CONFIDENCE_SIGMAS,
            scan_sigmas: 3.0,
            gamma_grid: default_gamma_grid(),
            subset_alpha: 2.0,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_sigmas >= 0.0 && self.scan_sigmas >= 0.0) {
            return Err(Error::usage("confidence levels must be non-negative"));
        }
        if !(self.subset_alpha > 0.0 && self.subset_alpha <= 2.0) {
            return Err(Error::usage("subset alpha must lie in (0, 2]"));
        }
        if self.gamma_grid.iter().any(|&g| !(g > 0.0 && g <= 2.0)) {
            return Err(Error::usage("gamma grid values must lie in (0, 2]"));
        }
        Ok(())
    }
}

/// Witness value on one subset, `α·⟨M_Z^S⟩ ± ⟨σₓ^{⊗S}⟩` with the better sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetWitness {
    pub subset: Vec<usize>,
    pub value: f64,
    pub sigma: f64,
    pub bound: f64,
    pub sign: Sign,
    pub violated: bool,
}

impl SubsetWitness {
    pub fn margin(&self) -> f64 {
        self.value - self.bound
    }
}

/// Lexicographic `s`-combinations of `items`.
fn combinations(items: &[usize], s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if s == 0 || s > items.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(i) = (0..s).rev().find(|&i| idx[i] != i + items.len() - s) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn subset_witness<S: ExpectationSource + ?Sized>(
    source: &S,
    subset: Vec<usize>,
    alpha: f64,
    sigmas: f64,
) -> Option<SubsetWitness> {
    let pair = ExpectationPair {
        first: source.mz(&subset)?,
        second: source.parity(Label::X, &subset)?,
    };
    let bound = msep_bound(alpha, 2);
    let (sign, est) = Sign::both()
        .into_iter()
        .map(|s| (s, pair.combine(alpha, s.value())))
        .max_by(|a, b| {
            a.1.value
                .total_cmp(&b.1.value)
                .then(std::cmp::Ordering::Greater)
        })
        .expect("two signs");
    let violated = est.value - bound > sigmas * est.sigma + VIOLATION_EPS;
    Some(SubsetWitness {
        subset,
        value: est.value,
        sigma: est.sigma,
        bound,
        sign,
        violated,
    })
}

fn scan_among<S: ExpectationSource + Sync + ?Sized>(
    source: &S,
    parties: &[usize],
    s: usize,
    alpha: f64,
    sigmas: f64,
) -> Vec<SubsetWitness> {
    combinations(parties, s)
        .into_par_iter()
        .filter_map(|subset| subset_witness(source, subset, alpha, sigmas))
        .collect()
}

/// GME witness `α·M_Z ± M_X` evaluated on every `s`-subset, in lexicographic
/// order; subsets without data are skipped.
pub fn subset_witness_scan<S: ExpectationSource + Sync + ?Sized>(
    source: &S,
    s: usize,
    alpha: f64,
    confidence_sigmas: f64,
) -> Result<Vec<SubsetWitness>> {
    let n = source.n();
    if s < 2 || s > n {
        return Err(Error::usage(format!("subset size {s} outside 2..={n}")));
    }
    let all: Vec<usize> = (1..=n).collect();
    Ok(scan_among(source, &all, s, alpha, confidence_sigmas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violated,
    NotViolated,
}

impl Verdict {
    fn of(violated: bool) -> Self {
        if violated {
            Self::Violated
        } else {
            Self::NotViolated
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub step: u8,
    pub subset: Vec<usize>,
    /// e.g. `se(alpha=2,+)` or `de(gamma=1.6)`.
    pub witness: String,
    pub value: f64,
    pub sigma: f64,
    pub bound: f64,
    pub verdict: Verdict,
    /// True when this entry justified a group of the proposed partition.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmeTest {
    pub detected: bool,
    pub value: f64,
    pub sigma: f64,
    pub bound: f64,
    pub margin: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    OverlappingGroups,
    MissingParties,
    DepthExceedsLargestGroup,
    TooManyGroups,
    UnsupportedGroup,
    GmeIntactnessMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub schema: String,
    pub n: usize,
    pub config: InferenceConfig,
    pub gme: GmeTest,
    pub intactness_upper: Option<usize>,
    pub intactness_check: Option<IntactnessCheck>,
    pub depth_lower: Option<usize>,
    pub depth_check: Option<DepthCheck>,
    /// Groups as lists of parties; not validated so that broken reports can
    /// still be represented and checked.
    pub proposed_partition: Option<Vec<Vec<usize>>>,
    pub evidence: Vec<Evidence>,
    pub findings: Vec<Finding>,
    pub assumptions: String,
}

fn se_label(alpha: f64, sign: Sign) -> String {
    format!(
        "se(alpha={alpha},{})",
        if sign == Sign::Plus { "+" } else { "-" }
    )
}

/// Runs the three-step procedure. Needs full-register `M_Z` and `X` data;
/// `AMIX` and `APLUS` data enable the depth scan (eight parties only).
pub fn infer_structure<S: ExpectationSource + Sync + ?Sized>(
    source: &S,
    config: &InferenceConfig,
) -> Result<StructureReport> {
    config.validate()?;
    let n = source.n();
    if n < 2 || n > linalg::max_parties() {
        return Err(Error::usage(format!(
            "n = {n} outside 2..={}",
            linalg::max_parties()
        )));
    }
    let all: Vec<usize> = (1..=n).collect();
    let (Some(mz), Some(mx)) = (source.mz(&all), source.parity(Label::X, &all)) else {
        return Err(Error::validation(
            "missing required records: full-register Z and X data are needed",
        ));
    };
    let pair = ExpectationPair::new(mz, mx)?;
    let mut evidence = Vec::new();

    // Step 1: GME.
    let gme_witness =
        subset_witness(source, all.clone(), 2.0, config.scan_sigmas).expect("data present");
    let gme = GmeTest {
        detected: gme_witness.violated,
        value: gme_witness.value,
        sigma: gme_witness.sigma,
        bound: gme_witness.bound,
        margin: gme_witness.margin(),
        sign: gme_witness.sign,
    };
    evidence.push(Evidence {
        step: 1,
        subset: all.clone(),
        witness: se_label(2.0, gme.sign),
        value: gme.value,
        sigma: gme.sigma,
        bound: gme.bound,
        verdict: Verdict::of(gme.detected),
        accepted: gme.detected,
    });
    let mut report = StructureReport {
        schema: SCHEMA.to_string(),
        n,
        config: config.clone(),
        gme: gme.clone(),
        intactness_upper: None,
        intactness_check: None,
        depth_lower: None,
        depth_check: None,
        proposed_partition: None,
        evidence,
        findings: Vec::new(),
        assumptions: ASSUMPTIONS.to_string(),
    };
    if gme.detected {
        report.intactness_upper = Some(1);
        report.depth_lower = Some(n);
        report.proposed_partition = Some(vec![all]);
        report.findings = consistency_check(&report);
        return Ok(report);
    }

    // Step 2: intactness and depth from the same full-register data. m = 2 is
    // the GME test above, already decided at the stricter level.
    let scan = intactness_scan(&pair, n, config.confidence_sigmas, 3)?;
    report.intactness_upper = scan.upper;
    report.intactness_check = scan.deciding_check().copied();
    if let Some(c) = report.intactness_check {
        report.evidence.push(Evidence {
            step: 2,
            subset: (1..=n).collect(),
            witness: se_label(c.alpha, c.sign),
            value: c.value,
            sigma: c.sigma,
            bound: c.bound,
            verdict: Verdict::Violated,
            accepted: false,
        });
    }
    let full: Vec<usize> = (1..=n).collect();
    if n == KPROD_PARTIES {
        if let (Some(a), Some(ap)) = (
            source.parity(Label::AMix, &full),
            source.parity(Label::APlus, &full),
        ) {
            let depth = depth_scan(
                &ExpectationPair::new(a, ap)?,
                n,
                &config.gamma_grid,
                config.confidence_sigmas,
            )?;
            report.depth_lower = depth.lower;
            report.depth_check = depth.deciding_check().copied();
            if let Some(c) = report.depth_check {
                report.evidence.push(Evidence {
                    step: 2,
                    subset: full.clone(),
                    witness: format!("de(gamma={})", c.gamma),
                    value: c.value,
                    sigma: c.sigma,
                    bound: c.bound,
                    verdict: Verdict::Violated,
                    accepted: false,
                });
            }
        }
    }

    // Step 3: largest groups first, among parties not yet assigned.
    let mut free: Vec<usize> = full;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in (2..n).rev() {
        if free.len() < s {
            continue;
        }
        let mut scanned = scan_among(source, &free, s, config.subset_alpha, config.scan_sigmas);
        scanned.sort_by(|a, b| {
            b.violated
                .cmp(&a.violated)
                .then(b.margin().total_cmp(&a.margin()))
                .then(a.subset.cmp(&b.subset))
        });
        let mut accepted_here = Vec::new();
        for w in &scanned {
            let take = w.violated
                && w.subset.iter().all(|p| free.contains(p))
                && !accepted_here
                    .iter()
                    .any(|g: &Vec<usize>| g.iter().any(|p| w.subset.contains(p)));
            if take {
                accepted_here.push(w.subset.clone());
            }
            report.evidence.push(Evidence {
                step: 3,
                subset: w.subset.clone(),
                witness: se_label(config.subset_alpha, w.sign),
                value: w.value,
                sigma: w.sigma,
                bound: w.bound,
                verdict: Verdict::of(w.violated),
                accepted: take,
            });
        }
        for g in accepted_here {
            free.retain(|p| !g.contains(p));
            groups.push(g);
        }
    }
    groups.extend(free.into_iter().map(|p| vec![p]));
    groups.sort();
    report.proposed_partition = Some(groups);
    report.findings = consistency_check(&report);
    Ok(report)
}

/// Cross-checks a report's conclusions against each other and its evidence.
pub fn consistency_check(report: &StructureReport) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |kind, message: String| out.push(Finding { kind, message });
    if report.gme.detected && report.intactness_upper != Some(1) {
        push(
            FindingKind::GmeIntactnessMismatch,
            "GME detected but the intactness bound is not 1".into(),
        );
    }
    let Some(groups) = &report.proposed_partition else {
        return out;
    };
    let mut seen = BTreeMap::new();
    for (g, group) in groups.iter().enumerate() {
        for &p in group {
            if let Some(prev) = seen.insert(p, g) {
                push(
                    FindingKind::OverlappingGroups,
                    format!("party {p} appears in groups {prev} and {g}"),
                );
            }
        }
    }
    let missing: Vec<usize> = (1..=report.n).filter(|p| !seen.contains_key(p)).collect();
    if !missing.is_empty() || seen.keys().any(|&p| p == 0 || p > report.n) {
        push(
            FindingKind::MissingParties,
            format!(
                "partition does not cover exactly parties 1..={} (missing {missing:?})",
                report.n
            ),
        );
    }
    let largest = groups.iter().map(Vec::len).max().unwrap_or(0);
    if let Some(d) = report.depth_lower {
        if d > largest {
            push(
                FindingKind::DepthExceedsLargestGroup,
                format!("depth ≥ {d} but the largest group has {largest} parties"),
            );
        }
    }
    if let Some(u) = report.intactness_upper {
        if groups.len() > u {
            push(
                FindingKind::TooManyGroups,
                format!("{} groups exceed the intactness bound {u}", groups.len()),
            );
        }
    }
    for group in groups.iter().filter(|g| g.len() > 1) {
        let mut sorted = group.clone();
        sorted.sort_unstable();
        let supported = report.evidence.iter().any(|e| {
            e.verdict == Verdict::Violated && {
                let mut s = e.subset.clone();
                s.sort_unstable();
                s == sorted
            }
        });
        if !supported {
            push(
                FindingKind::UnsupportedGroup,
                format!("group {group:?} has no violated subset witness"),
            );
        }
    }
    out
}

impl StructureReport {
    pub fn partition(&self) -> Option<Partition> {
        Partition::new(self.proposed_partition.clone()?).ok()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::numeric(e.to_string()))
    }

    /// Human-readable summary; `labels` renames parties when given.
    pub fn summary(&self, labels: &[&str]) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "GME test: {:.4} ± {:.4} vs bound {} -> {}",
            self.gme.value,
            self.gme.sigma,
            self.gme.bound,
            if self.gme.detected {
                "violated"
            } else {
                "not violated"
            }
        );
        let show =
            |v: Option<usize>, pre: &str| v.map_or("none".to_string(), |k| format!("{pre}{k}"));
        let _ = writeln!(s, "intactness: {}", show(self.intactness_upper, "≤ "));
        let _ = writeln!(s, "depth: {}", show(self.depth_lower, "≥ "));
        match self.partition() {
            Some(p) => {
                let _ = writeln!(s, "structure: {}", p.display_with(labels));
            }
            None => {
                let _ = writeln!(s, "structure: none");
            }
        }
        for f in &self.findings {
            let _ = writeln!(s, "finding: {}", f.message);
        }
        s
    }
}

/// Writes the evidence table (`step,subset,witness,value,sigma,bound,verdict,accepted`).
pub fn write_evidence_csv<W: Write>(evidence: &[Evidence], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        step: u8,
        subset: String,
        witness: &'a str,
        value: f64,
        sigma: f64,
        bound: f64,
        verdict: Verdict,
        accepted: bool,
    }
    let mut w = csv::Writer::from_writer(out);
    for e in evidence {
        w.serialize(Row {
            step: e.step,
            subset: e
                .subset
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            witness: &e.witness,
            value: e.value,
            sigma: e.sigma,
            bound: e.bound,
            verdict: e.verdict,
            accepted: e.accepted,
        })
        .map_err(crate::noise::csv_error)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}
