//! Measurement settings and counts: Born-rule sampling, expectation
//! estimators with standard errors, subset marginals and the counts file.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, ParseError, Result};
use crate::linalg::{self, pauli_xy_observable, QubitObservable};
use crate::num::Complex;
use crate::states::StateDensity;
use crate::witness::{Estimate, DEFAULT_THETA_MINUS, DEFAULT_THETA_PLUS};

/// Single-qubit observable measured on one party. All are ±1-valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "X")]
    X,
    /// `𝒜₊`.
    #[serde(rename = "APLUS")]
    APlus,
    /// `(𝒜₋+𝒜₊)/(2κ)`.
    #[serde(rename = "AMIX")]
    AMix,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Z, Label::X, Label::APlus, Label::AMix];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Z => "Z",
            Label::X => "X",
            Label::APlus => "APLUS",
            Label::AMix => "AMIX",
        }
    }

    pub fn observable(self) -> QubitObservable<f64> {
        match self {
            Label::Z => QubitObservable::z(),
            Label::X => QubitObservable::x(),
            Label::APlus => pauli_xy_observable(DEFAULT_THETA_PLUS).with_label("APLUS"),
            Label::AMix => pauli_xy_observable((DEFAULT_THETA_PLUS + DEFAULT_THETA_MINUS) / 2.0)
                .with_label("AMIX"),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::usage(format!("unknown observable label \"{s}\"")))
    }
}

/// One label per party, in party order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementSetting {
    pub per_party: Vec<Label>,
}

impl MeasurementSetting {
    pub fn new(per_party: Vec<Label>) -> Result<Self> {
        if per_party.is_empty() {
            return Err(Error::validation("setting must cover at least one party"));
        }
        Ok(Self { per_party })
    }

    pub fn uniform(n: usize, label: Label) -> Self {
        Self {
            per_party: vec![label; n],
        }
    }

    pub fn n(&self) -> usize {
        self.per_party.len()
    }

    /// The common label when every party measures the same observable.
    pub fn uniform_label(&self) -> Option<Label> {
        let first = *self.per_party.first()?;
        self.per_party.iter().all(|&l| l == first).then_some(first)
    }

    /// True when every listed party (1-based) measures `label`.
    pub fn measures(&self, parties: &[usize], label: Label) -> bool {
        parties
            .iter()
            .all(|&p| p >= 1 && p <= self.n() && self.per_party[p - 1] == label)
    }
}

/// Outcome counts for one setting. Outcome strings have one character per
/// party in party order; `'0'` is the +1 eigenvalue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRecord {
    pub setting: MeasurementSetting,
    #[serde(deserialize_with = "unique_counts")]
    pub counts: BTreeMap<String, u64>,
}

impl MeasurementRecord {
    pub fn new(setting: MeasurementSetting, counts: BTreeMap<String, u64>) -> Result<Self> {
        let record = Self { setting, counts };
        record.validate()?;
        Ok(record)
    }

    pub fn n(&self) -> usize {
        self.setting.n()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for key in self.counts.keys() {
            if key.len() != n || !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(Error::validation(format!(
                    "outcome \"{key}\" is not a {n}-bit string"
                )));
            }
        }
        Ok(())
    }

    fn require_total(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::validation("record has no counts")),
            t => Ok(t as f64),
        }
    }

    /// Record of the listed parties only (1-based, in the given order), with
    /// counts summed over the rest.
    pub fn marginalize(&self, parties: &[usize]) -> Result<Self> {
        check_subset(parties, self.n())?;
        let setting = MeasurementSetting {
            per_party: parties
                .iter()
                .map(|&p| self.setting.per_party[p - 1])
                .collect(),
        };
        let mut counts = BTreeMap::new();
        for (key, &c) in &self.counts {
            let bytes = key.as_bytes();
            let sub: String = parties.iter().map(|&p| bytes[p - 1] as char).collect();
            *counts.entry(sub).or_insert(0) += c;
        }
        Ok(Self { setting, counts })
    }
}

fn check_subset(parties: &[usize], n: usize) -> Result<()> {
    if parties.is_empty() {
        return Err(Error::usage("subset must not be empty"));
    }
    let mut seen = vec![false; n + 1];
    for &p in parties {
        if p == 0 || p > n {
            return Err(Error::usage(format!("party {p} outside 1..={n}")));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::usage(format!("party {p} listed twice")));
        }
    }
    Ok(())
}

/// `⟨∏_{i∈S} O_i⟩` from the parity of the subset bits, with standard error
/// `√((1−v²)/N)`.
pub fn estimate_product_expectation(
    record: &MeasurementRecord,
    parties: &[usize],
) -> Result<Estimate> {
    check_subset(parties, record.n())?;
    let total = record.require_total()?;
    let mut signed = 0i128;
    for (key, &c) in &record.counts {
        let bytes = key.as_bytes();
        let ones = parties.iter().filter(|&&p| bytes[p - 1] == b'1').count();
        signed += if ones % 2 == 0 {
            c as i128
        } else {
            -(c as i128)
        };
    }
    let value = signed as f64 / total;
    Ok(Estimate {
        value,
        sigma: ((1.0 - value * value).max(0.0) / total).sqrt(),
    })
}

/// `⟨|0…0⟩⟨0…0| + |1…1⟩⟨1…1|⟩` on the subset, with binomial standard error.
pub fn estimate_mz(record: &MeasurementRecord, parties: &[usize]) -> Result<Estimate> {
    check_subset(parties, record.n())?;
    if !record.setting.measures(parties, Label::Z) {
        return Err(Error::validation(
            "M_Z needs a Z measurement on every subset party",
        ));
    }
    let total = record.require_total()?;
    let hits: u64 = record
        .counts
        .iter()
        .filter(|(key, _)| {
            let bytes = key.as_bytes();
            let first = bytes[parties[0] - 1];
            parties.iter().all(|&p| bytes[p - 1] == first)
        })
        .map(|(_, &c)| c)
        .sum();
    let value = hits as f64 / total;
    Ok(Estimate {
        value,
        sigma: (value * (1.0 - value) / total).sqrt(),
    })
}

/// Outcome probabilities of `setting` on `state`, indexed like the
/// computational basis (party 1 is the most significant bit).
pub fn outcome_probabilities(
    state: &StateDensity<f64>,
    setting: &MeasurementSetting,
) -> Result<Vec<f64>> {
    let n = state.n_parties();
    if setting.n() != n {
        return Err(Error::validation(format!(
            "setting has {} labels for a {n}-party state",
            setting.n()
        )));
    }
    let dim = 1usize << n;
    if setting.per_party.iter().all(|&l| l == Label::Z) {
        return Ok(clean(state.diagonal()));
    }
    // Row b of each factor is ⟨e_b|, so U ρ U† carries the outcome
    // probabilities on its diagonal.
    let mut u = DMatrix::from_element(1, 1, Complex::new(1.0, 0.0));
    for label in &setting.per_party {
        let basis = label.observable().eigenbasis();
        let f = DMatrix::from_fn(2, 2, |b, j| basis[b][j].conj());
        u = u.kronecker(&f);
    }
    let rotated = &u * state.matrix() * u.adjoint();
    Ok(clean((0..dim).map(|i| rotated[(i, i)].re).collect()))
}

fn clean(mut probs: Vec<f64>) -> Vec<f64> {
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Multinomial draw of `shots` outcomes.
pub fn sample_counts_with<R: Rng>(
    state: &StateDensity<f64>,
    setting: &MeasurementSetting,
    shots: u64,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::usage("shots must be at least 1"));
    }
    let probs = outcome_probabilities(state, setting)?;
    let n = setting.n();
    let mut counts = BTreeMap::new();
    let (mut remaining, mut mass) = (shots, 1.0f64);
    for (index, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let draw = if index + 1 == probs.len() || p >= mass {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, (p / mass).min(1.0))
                .map_err(|e| Error::numeric(e.to_string()))?
                .sample(rng)
        };
        if draw > 0 {
            counts.insert(format!("{index:0n$b}"), draw);
        }
        remaining -= draw;
        mass -= p;
    }
    Ok(MeasurementRecord {
        setting: setting.clone(),
        counts,
    })
}

/// [`sample_counts_with`] seeded from `seed`.
pub fn sample_counts(
    state: &StateDensity<f64>,
    setting: &MeasurementSetting,
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    sample_counts_with(state, setting, shots, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Order in which simulated files list their settings.
pub const CANONICAL_LABELS: [Label; 4] = [Label::Z, Label::X, Label::AMix, Label::APlus];

/// Samples `shots` outcomes for each uniform setting in
/// [`CANONICAL_LABELS`]. Setting `i` draws from stream `i` of one seed.
pub fn simulate_counts(state: &StateDensity<f64>, shots: u64, seed: u64) -> Result<CountsFile> {
    let n = state.n_parties();
    let records = CANONICAL_LABELS
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_counts_with(
                state,
                &MeasurementSetting::uniform(n, label),
                shots,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    CountsFile::new(n, records)
}

/// Contents of a counts file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub n: usize,
    pub records: Vec<MeasurementRecord>,
}

impl CountsFile {
    pub fn new(n: usize, records: Vec<MeasurementRecord>) -> Result<Self> {
        for r in &records {
            if r.n() != n {
                return Err(Error::validation(format!(
                    "record with {} labels in an {n}-party file",
                    r.n()
                )));
            }
            r.validate()?;
        }
        Ok(Self { n, records })
    }
}

const DUPLICATE_TAG: &str = "duplicate outcome ";

fn unique_counts<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<BTreeMap<String, u64>, D::Error> {
    struct Unique;

    impl<'de> Visitor<'de> for Unique {
        type Value = BTreeMap<String, u64>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from outcome strings to counts")
        }

        fn visit_map<A: MapAccess<'de>>(
            self,
            mut map: A,
        ) -> std::result::Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((key, count)) = map.next_entry::<String, u64>()? {
                if out.contains_key(&key) {
                    return Err(de::Error::custom(format!("{DUPLICATE_TAG}{key}")));
                }
                out.insert(key, count);
            }
            Ok(out)
        }
    }

    d.deserialize_map(Unique)
}

/// 1-based line of byte offset `pos`.
fn line_at(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Byte offset of record `index`'s opening, found via its `"setting"` key.
fn record_offset(text: &str, index: usize) -> usize {
    text.match_indices("\"setting\"")
        .nth(index)
        .map_or(0, |(pos, _)| pos)
}

fn key_line(text: &str, record: usize, key: &str) -> usize {
    let start = record_offset(text, record);
    let needle = format!("\"{key}\"");
    let pos = text[start..].find(&needle).map_or(start, |p| start + p);
    line_at(text, pos)
}

/// Parses counts-file text.
pub fn parse_counts(text: &str) -> Result<CountsFile> {
    let file: CountsFile = serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        let full = e.to_string();
        let message = full
            .rsplit_once(" at line ")
            .map_or(full.clone(), |(m, _)| m.to_string());
        match message.strip_prefix(DUPLICATE_TAG) {
            Some(outcome) => ParseError::DuplicateOutcome {
                line,
                outcome: outcome.to_string(),
            },
            None => ParseError::Malformed {
                line,
                column,
                message,
            },
        }
    })?;
    let n = file.n;
    if n == 0 || n > linalg::max_parties() {
        return Err(ParseError::Invalid {
            line: line_at(text, text.find("\"n\"").unwrap_or(0)),
            message: format!("n = {n} outside 1..={}", linalg::max_parties()),
        }
        .into());
    }
    for (i, record) in file.records.iter().enumerate() {
        if record.n() != n {
            return Err(ParseError::SettingLength {
                line: line_at(text, record_offset(text, i)),
                found: record.n(),
                expected: n,
            }
            .into());
        }
        for key in record.counts.keys() {
            if key.chars().count() != n {
                return Err(ParseError::BitLength {
                    line: key_line(text, i, key),
                    outcome: key.clone(),
                    found: key.chars().count(),
                    expected: n,
                }
                .into());
            }
            if !key.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(ParseError::Invalid {
                    line: key_line(text, i, key),
                    message: format!("outcome \"{key}\" contains characters other than 0 and 1"),
                }
                .into());
            }
        }
    }
    Ok(file)
}

pub fn load_counts(path: &Path) -> Result<CountsFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_counts(&text)
}

pub fn counts_to_string(file: &CountsFile) -> Result<String> {
    serde_json::to_string_pretty(file).map_err(|e| Error::numeric(e.to_string()))
}

pub fn save_counts(file: &CountsFile, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = counts_to_string(file)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io)
}

/// One row of the estimates CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    /// Parties separated by spaces, e.g. `"1 2 5"`.
    pub subset: String,
    pub observable: String,
    pub value: f64,
    pub sigma: f64,
}

impl EstimateRow {
    pub fn new(parties: &[usize], observable: impl Into<String>, estimate: Estimate) -> Self {
        Self {
            subset: parties
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            observable: observable.into(),
            value: estimate.value,
            sigma: estimate.sigma,
        }
    }
}

/// Writes `subset,observable,value,sigma` rows.
pub fn write_estimates_csv<W: Write>(rows: &[EstimateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(crate::noise::csv_error)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

/// Full-register estimates for every uniform setting present: `MZ` and the
/// parity of each label.
pub fn full_register_estimates(records: &[MeasurementRecord]) -> Result<Vec<EstimateRow>> {
    let mut rows = Vec::new();
    for r in records {
        let all: Vec<usize> = (1..=r.n()).collect();
        if let Some(label) = r.setting.uniform_label() {
            if label == Label::Z {
                rows.push(EstimateRow::new(&all, "MZ", estimate_mz(r, &all)?));
            }
            rows.push(EstimateRow::new(
                &all,
                label.as_str(),
                estimate_product_expectation(r, &all)?,
            ));
        }
    }
    Ok(rows)
}
