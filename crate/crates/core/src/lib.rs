//! Certification of multipartite entanglement structure from two-setting
//! GHZ-type witnesses.
//!
//! Numerical modules are generic over the real scalar (`f32`, `f64`); the
//! aliases below fix `f64`, which is what the data-facing modules use.

pub mod bounds;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod noise;
pub mod num;
pub mod states;
pub mod tomo;
pub mod witness;

pub use bounds::{
    brute_oracle_max, canonical_partition, kprod_curve, mb_lambda_max, msep_bound_numeric,
    seesaw_max, sos_gap, BoundResult, KprodCurve, SeesawConfig,
};
pub use error::{Error, ParseError, Result};
pub use inference::{
    consistency_check, infer_structure, subset_witness_scan, ExpectationSource, ExpectationTable,
    InferenceConfig, StructureReport,
};
pub use noise::{
    estimate_gammas, generalized_ghz_threshold, gme_noise_threshold, intactness_noise_threshold,
    visibility_margin_curve, GammaEstimate, MarginPoint, NoiseThresholdQuery,
};
pub use num::{Complex, Real};
pub use states::{
    expectation, geometry_to_structure, ghz, ghz_noise_model, ghz_product, ghz_standard,
    product_structure, visibility_state, visibility_weight, white_noise_mix, Geometry, Partition,
    Pbs, StateDensity, PATH_LABELS,
};

pub use tomo::{
    estimate_mz, estimate_product_expectation, load_counts, sample_counts, save_counts,
    simulate_counts, CountsFile, Label, MeasurementRecord, MeasurementSetting,
};
pub use witness::{
    build_depth_witness, build_separability_witness, depth_lower_bound, di_bound,
    intactness_upper_bound, kprod_bound, msep_bound, optimal_alpha, Estimate, ExpectationPair,
    Sign, WitnessSpec,
};

pub type Operator = linalg::DenseOperator<f64>;
pub type Density = StateDensity<f64>;
pub type Witness = WitnessSpec<f64>;
