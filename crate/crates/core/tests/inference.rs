use std::collections::BTreeSet;

use entstruct::inference::{FindingKind, TableObservable};
use entstruct::linalg::{kron, DenseOperator};
use entstruct::states::{ghz_product, white_noise_mix, Geometry, Partition};
use entstruct::tomo::simulate_counts;
use entstruct::{
    consistency_check, expectation, infer_structure, subset_witness_scan, Density, Error, Estimate,
    ExpectationTable, InferenceConfig, StructureReport,
};

fn on_subset(n: usize, subset: &[usize], factor: &DenseOperator<f64>) -> DenseOperator<f64> {
    let id = DenseOperator::identity(1).unwrap();
    let factors: Vec<_> = (1..=n)
        .map(|p| {
            if subset.contains(&p) {
                factor.clone()
            } else {
                id.clone()
            }
        })
        .collect();
    kron(&factors).unwrap()
}

fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == s)
        .map(|m| (1..=n).filter(|p| m & (1 << (p - 1)) != 0).collect())
        .collect()
}

/// Exact subset `M_Z` and `X` values of `state` for sizes 2..n, with a
/// nominal standard error.
fn dense_table(state: &Density, sigma: f64) -> ExpectationTable {
    let n = state.n_parties();
    let mut t = ExpectationTable::new(n).unwrap();
    for s in 2..=n {
        for sub in subsets(n, s) {
            let mz = on_subset(n, &sub, &DenseOperator::proj0())
                .plus(&on_subset(n, &sub, &DenseOperator::proj1()))
                .unwrap();
            let x = on_subset(n, &sub, &DenseOperator::pauli_x());
            let v = |op| Estimate::new(expectation(state, op).unwrap(), sigma).unwrap();
            t.insert(TableObservable::Mz, &sub, v(&mz)).unwrap();
            t.insert(TableObservable::X, &sub, v(&x)).unwrap();
        }
    }
    t
}

fn full(t: &mut ExpectationTable, mz: (f64, f64), x: (f64, f64), a: (f64, f64), ap: (f64, f64)) {
    let all: Vec<usize> = (1..=8).collect();
    for (obs, (v, s)) in [
        (TableObservable::Mz, mz),
        (TableObservable::X, x),
        (TableObservable::AMix, a),
        (TableObservable::APlus, ap),
    ] {
        t.insert(obs, &all, Estimate::new(v, s).unwrap()).unwrap();
    }
}

fn groups(spec: &str) -> Vec<Vec<usize>> {
    spec.parse::<Partition>()
        .unwrap()
        .canonical()
        .groups()
        .to_vec()
}

fn point_config() -> InferenceConfig {
    InferenceConfig {
        confidence_sigmas: 0.0,
        gamma_grid: vec![1.6, 2.0],
        ..InferenceConfig::default()
    }
}

fn canonical(report: &StructureReport) -> Vec<Vec<usize>> {
    report.partition().unwrap().canonical().groups().to_vec()
}

#[test]
fn rho8_row_fires_step_one() {
    let mut t = ExpectationTable::new(8).unwrap();
    full(
        &mut t,
        (0.80, 0.02),
        (0.63, 0.04),
        (0.54, 0.09),
        (-0.57, 0.09),
    );
    // 2.23 against 2 with σ ≈ 0.057: about four standard errors.
    let r = infer_structure(&t, &point_config()).unwrap();
    assert!(r.gme.detected);
    assert_eq!(r.intactness_upper, Some(1));
    assert_eq!(r.depth_lower, Some(8));
    assert_eq!(r.proposed_partition, Some(vec![(1..=8).collect()]));
    assert!(r.findings.is_empty(), "{:?}", r.findings);
}

#[test]
fn rho422_deduction() {
    let ideal = ghz_product::<f64>(&"1,2|3,4|5,6,7,8".parse().unwrap()).unwrap();
    let mut t = dense_table(&white_noise_mix(&ideal, 0.1).unwrap(), 0.03);
    full(
        &mut t,
        (0.27, 0.03),
        (0.86, 0.03),
        (0.84, 0.03),
        (-0.02, 0.06),
    );
    let r = infer_structure(&t, &point_config()).unwrap();
    assert!(!r.gme.detected);
    assert_eq!(r.intactness_upper, Some(3));
    assert_eq!(r.depth_lower, Some(4));
    assert_eq!(canonical(&r), groups("5,6,7,8|1,2|3,4"));
    assert!(r.findings.is_empty(), "{:?}", r.findings);
    assert_eq!(
        r.partition().unwrap().display_with(&entstruct::PATH_LABELS),
        "{1,2'}{3',4}{5,6',7',8}"
    );
}

#[test]
fn rho2222_deduction() {
    let ideal = ghz_product::<f64>(&Geometry::all()[7].structure()).unwrap();
    let mut t = dense_table(&white_noise_mix(&ideal, 0.1).unwrap(), 0.02);
    full(
        &mut t,
        (0.18, 0.02),
        (0.91, 0.02),
        (0.83, 0.03),
        (0.19, 0.05),
    );
    let r = infer_structure(&t, &point_config()).unwrap();
    assert_eq!(r.intactness_upper, Some(4));
    assert_eq!(r.depth_lower, Some(2));
    assert_eq!(canonical(&r), groups("1,2|3,4|5,6|7,8"));
    assert!(r.findings.is_empty(), "{:?}", r.findings);
}

#[test]
fn subset_scan_examples() {
    let ideal = ghz_product::<f64>(&"1,2|3,4|5,6,7,8".parse().unwrap()).unwrap();
    let t = dense_table(&ideal, 0.0);
    let four = subset_witness_scan(&t, 4, 2.0, 3.0).unwrap();
    assert_eq!(four.len(), 70);
    let hits: Vec<_> = four.iter().filter(|w| w.violated).collect();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].subset, vec![5, 6, 7, 8]);
    assert!((hits[0].value - 3.0).abs() < 1e-12);
    assert!(four.windows(2).all(|w| w[0].subset < w[1].subset));
    assert!(subset_witness_scan(&t, 3, 2.0, 3.0)
        .unwrap()
        .iter()
        .all(|w| !w.violated));

    let flat = dense_table(&Density::maximally_mixed(6).unwrap(), 0.0);
    for s in 2..=6 {
        assert!(subset_witness_scan(&flat, s, 2.0, 0.0)
            .unwrap()
            .iter()
            .all(|w| !w.violated));
    }
    assert!(subset_witness_scan(&flat, 7, 2.0, 0.0).is_err());
    assert!(subset_witness_scan(&flat, 1, 2.0, 0.0).is_err());
}

#[test]
fn consistency_findings() {
    let ideal = ghz_product::<f64>(&"1,2|3,4|5,6,7,8".parse().unwrap()).unwrap();
    let mut t = dense_table(&white_noise_mix(&ideal, 0.1).unwrap(), 0.03);
    full(
        &mut t,
        (0.27, 0.03),
        (0.86, 0.03),
        (0.84, 0.03),
        (-0.02, 0.06),
    );
    let good = infer_structure(&t, &point_config()).unwrap();
    assert!(consistency_check(&good).is_empty());

    let kinds = |r: &StructureReport| {
        consistency_check(r)
            .iter()
            .map(|f| f.kind)
            .collect::<Vec<_>>()
    };

    let mut deep = good.clone();
    deep.proposed_partition = Some(groups("1,2|3,4|5,6|7,8"));
    assert!(kinds(&deep).contains(&FindingKind::DepthExceedsLargestGroup));

    let mut overlap = good.clone();
    overlap.proposed_partition = Some(vec![vec![1, 2, 3], vec![3, 4, 5, 6, 7, 8]]);
    assert!(kinds(&overlap).contains(&FindingKind::OverlappingGroups));

    let mut short = good.clone();
    short.proposed_partition = Some(vec![vec![1, 2], vec![3, 4], vec![5, 6, 7]]);
    assert!(kinds(&short).contains(&FindingKind::MissingParties));

    let mut many = good.clone();
    many.proposed_partition = Some(groups("5,6,7,8|1,2|3|4"));
    assert!(kinds(&many).contains(&FindingKind::TooManyGroups));

    let mut unsupported = good.clone();
    unsupported.proposed_partition = Some(groups("1,3|2,4|5,6,7,8"));
    assert!(kinds(&unsupported).contains(&FindingKind::UnsupportedGroup));

    let mut gme = good;
    gme.gme.detected = true;
    assert!(kinds(&gme).contains(&FindingKind::GmeIntactnessMismatch));
}

#[test]
fn missing_full_register_data_is_rejected() {
    let mut t = ExpectationTable::new(4).unwrap();
    t.insert(TableObservable::Mz, &[1, 2, 3, 4], Estimate::exact(1.0))
        .unwrap();
    assert!(matches!(
        infer_structure(&t, &InferenceConfig::default()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let state = ghz_product::<f64>(&Geometry::all()[3].structure()).unwrap();
    let noisy = white_noise_mix(&state, 0.15).unwrap();
    let records = simulate_counts(&noisy, 20_000, 11).unwrap().records;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| infer_structure(records.as_slice(), &InferenceConfig::default()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.to_json().unwrap(), run(3).to_json().unwrap());
}

fn violated_subsets(records: &[entstruct::MeasurementRecord]) -> BTreeSet<Vec<usize>> {
    (2..8)
        .flat_map(|s| subset_witness_scan(records, s, 2.0, 3.0).unwrap())
        .filter(|w| w.violated)
        .map(|w| w.subset)
        .collect()
}

/// White noise only removes evidence: violated subsets under noise are a
/// subset of those of the clean run, and every inferred group sits inside
/// one clean group.
#[test]
fn white_noise_only_removes_evidence() {
    let config = InferenceConfig::default();
    for g in [Geometry::all()[1], Geometry::all()[4], Geometry::all()[7]] {
        let state = ghz_product::<f64>(&g.structure()).unwrap();
        let clean = simulate_counts(&state, 100_000, 5).unwrap().records;
        let clean_groups = infer_structure(clean.as_slice(), &config)
            .unwrap()
            .partition()
            .unwrap();
        let clean_hits = violated_subsets(&clean);
        for (i, p) in [0.05, 0.2, 0.5, 0.9].into_iter().enumerate() {
            let noisy = white_noise_mix(&state, p).unwrap();
            let records = simulate_counts(&noisy, 100_000, 100 + i as u64)
                .unwrap()
                .records;
            let hits = violated_subsets(&records);
            assert!(hits.is_subset(&clean_hits), "{g} p={p}: {hits:?}");
            let r = infer_structure(records.as_slice(), &config).unwrap();
            for group in r.partition().unwrap().groups() {
                assert!(
                    clean_groups
                        .groups()
                        .iter()
                        .any(|c| group.iter().all(|q| c.contains(q))),
                    "{g} p={p}: group {group:?} not inside {clean_groups}"
                );
            }
        }
    }
}

#[test]
fn counts_and_table_sources_agree() {
    let state = ghz_product::<f64>(&"1,2,3|4,5".parse().unwrap()).unwrap();
    let records = simulate_counts(&state, 50_000, 3).unwrap().records;
    let r = infer_structure(records.as_slice(), &InferenceConfig::default()).unwrap();
    assert_eq!(canonical(&r), groups("1,2,3|4,5"));
    assert_eq!(r.schema, "entstruct/1");
    assert!(r.assumptions.contains("convex mixture"));
    let summary = r.summary(&[]);
    assert!(summary.contains("structure: {1,2,3}{4,5}"), "{summary}");
    let mut csv = Vec::new();
    entstruct::inference::write_evidence_csv(&r.evidence, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,subset,witness,value,sigma,bound,verdict,accepted\n"));
    assert_eq!(text.lines().count(), r.evidence.len() + 1);
}
