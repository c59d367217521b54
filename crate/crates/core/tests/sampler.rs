use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use entstruct::linalg::{kron, DenseOperator};
use entstruct::num::Complex;
use entstruct::states::{ghz_noise_model, StateDensity};
use entstruct::tomo::{load_counts, sample_counts, save_counts, simulate_counts, CountsFile};
use entstruct::{
    estimate_mz, estimate_product_expectation, expectation, Density, Error, Label,
    MeasurementRecord, MeasurementSetting, ParseError,
};

fn random_product_state(n: usize, rng: &mut ChaCha8Rng) -> Density {
    let parts: Vec<Density> = (0..n)
        .map(|_| {
            let (t, p) = (
                rng.random::<f64>() * std::f64::consts::PI,
                rng.random::<f64>() * std::f64::consts::TAU,
            );
            let v = DVector::from_vec(vec![
                Complex::new((t / 2.0).cos(), 0.0),
                Complex::from_polar((t / 2.0).sin(), p),
            ]);
            StateDensity::pure(1, &v).unwrap()
        })
        .collect();
    StateDensity::kron(&parts).unwrap()
}

#[test]
fn subset_parities_match_dense_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 5;
    let mut misses = 0;
    for trial in 0..20 {
        let state = random_product_state(n, &mut rng);
        let record = sample_counts(
            &state,
            &MeasurementSetting::uniform(n, Label::X),
            100_000,
            trial,
        )
        .unwrap();
        for subset in [vec![1, 2], vec![2, 4, 5], vec![1, 3, 4, 5]] {
            let factors: Vec<_> = (1..=n)
                .map(|p| {
                    if subset.contains(&p) {
                        DenseOperator::pauli_x()
                    } else {
                        DenseOperator::identity(1).unwrap()
                    }
                })
                .collect();
            let exact = expectation(&state, &kron(&factors).unwrap()).unwrap();
            let est = estimate_product_expectation(&record, &subset).unwrap();
            misses += usize::from((est.value - exact).abs() >= 5.0 * est.sigma.max(1e-9));
        }
    }
    assert!(misses <= 1, "{misses} of 60 estimates outside 5 sigma");
}

#[test]
fn sigma_shrinks_as_inverse_root_shots() {
    let state = ghz_noise_model::<f64>(6, 0.1, 0.2).unwrap();
    let setting = MeasurementSetting::uniform(6, Label::X);
    let all: Vec<usize> = (1..=6).collect();
    let small =
        estimate_product_expectation(&sample_counts(&state, &setting, 1_000, 1).unwrap(), &all)
            .unwrap();
    let large =
        estimate_product_expectation(&sample_counts(&state, &setting, 100_000, 1).unwrap(), &all)
            .unwrap();
    let ratio = small.sigma / large.sigma;
    assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn reference_error_magnitude() {
    // 0.80 at 658 events: binomial error close to 0.02.
    let n = 8;
    let mut counts = BTreeMap::new();
    counts.insert("0".repeat(n), 263);
    counts.insert("1".repeat(n), 263);
    counts.insert("01".repeat(n / 2), 132);
    let record = MeasurementRecord::new(MeasurementSetting::uniform(n, Label::Z), counts).unwrap();
    let e = estimate_mz(&record, &(1..=n).collect::<Vec<_>>()).unwrap();
    assert!((e.value - 526.0 / 658.0).abs() < 1e-12);
    assert!((e.sigma - 0.0156).abs() < 1e-3, "{}", e.sigma);
}

#[test]
fn counts_file_io_and_error_locations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.json");
    let state = ghz_noise_model::<f64>(3, 0.0, 0.1).unwrap();
    let file = simulate_counts(&state, 500, 9).unwrap();
    save_counts(&file, &path).unwrap();
    assert_eq!(load_counts(&path).unwrap(), file);
    assert!(matches!(
        load_counts(&dir.path().join("absent.json")),
        Err(Error::Io { .. })
    ));

    let bad = "{\n  \"n\": 2,\n  \"records\": [\n    {\"setting\": [\"Z\", \"Z\"], \"counts\": {\"00\": 1, \"00\": 2}}\n  ]\n}";
    std::fs::write(&path, bad).unwrap();
    match load_counts(&path) {
        Err(Error::Parse(ParseError::DuplicateOutcome { line, outcome })) => {
            assert_eq!((line, outcome.as_str()), (4, "00"));
        }
        other => panic!("{other:?}"),
    }
    let short =
        "{\"n\": 2, \"records\": [\n{\"setting\": [\"Z\", \"Z\"], \"counts\": {\"000\": 1}}]}";
    assert!(matches!(
        entstruct::tomo::parse_counts(short),
        Err(Error::Parse(ParseError::BitLength {
            line: 2,
            found: 3,
            expected: 2,
            ..
        }))
    ));
    let unknown = "{\"n\": 1, \"records\": [], \"extra\": 0}";
    assert!(matches!(
        entstruct::tomo::parse_counts(unknown),
        Err(Error::Parse(ParseError::Malformed { .. }))
    ));
}

#[test]
fn sampling_depends_only_on_seed() {
    let state = ghz_noise_model::<f64>(4, 0.2, 0.1).unwrap();
    let a = simulate_counts(&state, 10_000, 77).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| simulate_counts(&state, 10_000, 77).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, simulate_counts(&state, 10_000, 78).unwrap());
    let labels: Vec<_> = a
        .records
        .iter()
        .map(|r| r.setting.uniform_label().unwrap())
        .collect();
    assert_eq!(labels, [Label::Z, Label::X, Label::AMix, Label::APlus]);
    assert!(CountsFile::new(5, a.records).is_err());
}

#[test]
fn single_precision_states_agree() {
    let s32 = entstruct::ghz::<f32>(4, std::f32::consts::FRAC_PI_4, 0.0).unwrap();
    let mx = entstruct::witness::m_x::<f32>(4).unwrap();
    assert!((expectation(&s32, &mx).unwrap() - 1.0).abs() < 1e-5);
}
