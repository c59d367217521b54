use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entstruct::inference::{load_table, write_evidence_csv, SCHEMA};
use entstruct::noise::{
    gme_bound, unit_grid, write_margin_csv, AlphaChoice, StateFamily, Target, DEFAULT_CURVE_POINTS,
};
use entstruct::tomo::full_register_estimates;
use entstruct::witness::{default_gamma_grid, BoundSource, KPROD_PARTIES, TABULATED};
use entstruct::{
    ghz_noise_model, infer_structure, intactness_upper_bound, kprod_bound, kprod_curve,
    load_counts, msep_bound, optimal_alpha, product_structure, save_counts, simulate_counts,
    visibility_margin_curve, visibility_state, white_noise_mix, Density, Error, Estimate,
    ExpectationPair, ExpectationSource, Geometry, InferenceConfig, Label, NoiseThresholdQuery,
    Partition, SeesawConfig, Sign, Witness, PATH_LABELS,
};

#[derive(Parser)]
#[command(
    name = "entstruct",
    version,
    about = "Entanglement-structure certification from GHZ-type witnesses"
)]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "ENTSTRUCT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a counts file for the Z, X, AMIX and APLUS settings.
    Simulate(SimulateArgs),
    /// Table of k-producible bounds of the depth witness.
    Bounds(BoundsArgs),
    /// Expectation values and witness values from a counts file.
    Eval(EvalArgs),
    /// Deduce a minimal entanglement structure.
    Infer(InferArgs),
    /// White-noise thresholds of the separability witness.
    Thresholds(ThresholdsArgs),
    /// Witness margin over the two visibilities.
    Visibility(VisibilityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Group sizes ("4+2+2") or explicit groups ("1,2|3,4").
    #[arg(
        long,
        conflicts_with = "geometry",
        required_unless_present = "geometry"
    )]
    structure: Option<Partition>,
    /// PBS states for the eight-photon interferometer, e.g. "UUD".
    #[arg(long)]
    geometry: Option<Geometry>,
    /// White-noise weight within each group.
    #[arg(long, default_value_t = 0.0)]
    gamma_w: f64,
    /// Dephasing weight within each group.
    #[arg(long, default_value_t = 0.0)]
    gamma_d: f64,
    /// Visibility of the pair sources (per-group visibility model).
    #[arg(long, conflicts_with_all = ["gamma_w", "gamma_d"])]
    v1: Option<f64>,
    /// Visibility of interference at a PBS.
    #[arg(long, conflicts_with_all = ["gamma_w", "gamma_d"])]
    v2: Option<f64>,
    /// Global white-noise fraction applied last.
    #[arg(long, default_value_t = 0.0)]
    white: f64,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Producibility levels, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 6, 7])]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0f64, 1.6])]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = SeesawConfig::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = SeesawConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = SeesawConfig::default().seed)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Separability parameters; defaults to the optimal α for m = 2..=n.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Depth parameters; used when APLUS and AMIX records are present.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0f64, 1.6])]
    gamma: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SignArg::Best)]
    sign: SignArg,
    #[arg(long, default_value_t = entstruct::witness::DEFAULT_CONFIDENCE_SIGMAS)]
    confidence_sigmas: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
    Best,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    counts: Option<PathBuf>,
    /// Expectation-table JSON instead of counts.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = InferenceConfig::default().confidence_sigmas)]
    confidence_sigmas: f64,
    #[arg(long, default_value_t = InferenceConfig::default().scan_sigmas)]
    scan_sigmas: f64,
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Vec<f64>,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evidence table as CSV.
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Name parties 1, 2', 3', ... in the summary (eight parties only).
    #[arg(long)]
    path_labels: bool,
}

#[derive(Args)]
struct ThresholdsArgs {
    #[arg(long, default_value_t = 3)]
    n_min: usize,
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    /// Witness parameter; the optimal α for each m when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    /// Generalized GHZ angles; standard GHZ when omitted.
    #[arg(long, requires = "phi")]
    theta: Option<f64>,
    #[arg(long, requires = "theta")]
    phi: Option<f64>,
    /// Undo the relative phase by a local unitary first.
    #[arg(long)]
    phase_fix: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VisibilityArgs {
    #[arg(long)]
    structure: Partition,
    /// Depth witness at this γ; separability witness otherwise.
    #[arg(long, conflicts_with = "alpha")]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = PlusMinus::Plus)]
    sign: PlusMinus,
    #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlusMinus {
    Plus,
    Minus,
}

impl From<PlusMinus> for Sign {
    fn from(s: PlusMinus) -> Self {
        match s {
            PlusMinus::Plus => Sign::Plus,
            PlusMinus::Minus => Sign::Minus,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Validation(_) | Error::Parse(_) => 2,
        Error::Numeric(_) => 3,
        Error::Io { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("entstruct: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> entstruct::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bounds(a) => bounds(a),
        Command::Eval(a) => eval(a),
        Command::Infer(a) => infer(a),
        Command::Thresholds(a) => thresholds(a),
        Command::Visibility(a) => visibility(a),
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> entstruct::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_error(path))
}

/// Runs `write` against the file at `out`, or stdout.
fn emit(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> entstruct::Result<()>,
) -> entstruct::Result<()> {
    match out {
        Some(path) => {
            let mut f = create(path)?;
            write(&mut f)?;
            f.flush().map_err(io_error(path))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(io_error(Path::new("<stdout>")))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> entstruct::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
    emit(out, |w| {
        writeln!(w, "{text}").map_err(io_error(Path::new("<output>")))
    })
}

fn simulate(a: SimulateArgs) -> entstruct::Result<()> {
    let structure = match (&a.structure, a.geometry) {
        (Some(p), _) => p.clone(),
        (None, Some(g)) => g.structure(),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let groups = structure
        .groups()
        .iter()
        .map(|g| match (a.v1, a.v2) {
            (None, None) => ghz_noise_model::<f64>(g.len(), a.gamma_d, a.gamma_w),
            (v1, v2) => visibility_state::<f64>(g.len(), v1.unwrap_or(1.0), v2.unwrap_or(1.0)),
        })
        .collect::<entstruct::Result<Vec<Density>>>()?;
    let state = white_noise_mix(&product_structure(&structure, &groups)?, a.white)?;
    let seed = a.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    });
    let file = simulate_counts(&state, a.shots, seed)?;
    match &a.out {
        Some(path) => save_counts(&file, path),
        None => emit_json(None, &file),
    }
}

fn bounds(a: BoundsArgs) -> entstruct::Result<()> {
    let cfg = SeesawConfig {
        restarts: a.restarts,
        max_iters: a.max_iters,
        seed: a.seed,
        ..SeesawConfig::default()
    };
    cfg.validate()?;
    for &k in &a.k {
        if !(1..KPROD_PARTIES).contains(&k) {
            return Err(Error::Usage(format!(
                "k = {k} outside 1..={}",
                KPROD_PARTIES - 1
            )));
        }
    }
    for &g in &a.gamma {
        kprod_bound(KPROD_PARTIES, 1, g)?;
    }
    let curve = kprod_curve(KPROD_PARTIES, &a.gamma, &a.k, &cfg)?;
    if !curve.converged {
        eprintln!("warning: some see-saw runs hit the iteration limit");
    }
    #[derive(Serialize)]
    struct Row {
        n: usize,
        k: usize,
        gamma: f64,
        computed: f64,
        tabulated: Option<f64>,
        value: f64,
        source: BoundSource,
    }
    let mut rows = Vec::new();
    for (i, &k) in curve.ks.iter().enumerate() {
        for (j, &gamma) in curve.gammas.iter().enumerate() {
            let computed = curve.values[i][j];
            let tabulated = TABULATED
                .iter()
                .find(|&&(tk, tg, _)| tk == k && (tg - gamma).abs() <= 1e-12)
                .map(|t| t.2);
            rows.push(Row {
                n: KPROD_PARTIES,
                k,
                gamma,
                computed,
                tabulated,
                value: tabulated.unwrap_or(computed),
                source: if tabulated.is_some() {
                    BoundSource::Tabulated
                } else {
                    BoundSource::Computed
                },
            });
        }
    }
    write_csv(a.out.as_deref(), &rows)
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> entstruct::Result<()> {
    emit(out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in rows {
            csv.serialize(r).map_err(|e| {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    match e.into_kind() {
                        csv::ErrorKind::Io(source) => io_error(Path::new("<output>"))(source),
                        _ => unreachable!(),
                    }
                } else {
                    Error::Numeric(e.to_string())
                }
            })?;
        }
        csv.flush().map_err(io_error(Path::new("<output>")))
    })
}

#[derive(Serialize)]
struct SeparabilityBound {
    m: usize,
    bound: f64,
    violated: bool,
}

#[derive(Serialize)]
struct ProducibilityBound {
    k: usize,
    bound: f64,
    source: BoundSource,
    violated: bool,
}

#[derive(Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum WitnessValue {
    Separability {
        alpha: f64,
        sign: Sign,
        value: f64,
        sigma: f64,
        bounds: Vec<SeparabilityBound>,
    },
    Depth {
        gamma: f64,
        value: f64,
        sigma: f64,
        bounds: Vec<ProducibilityBound>,
    },
}

#[derive(Serialize)]
struct EvalReport {
    schema: &'static str,
    n: usize,
    confidence_sigmas: f64,
    expectations: Vec<entstruct::tomo::EstimateRow>,
    witnesses: Vec<WitnessValue>,
    intactness_upper: Option<usize>,
}

fn violated(e: &Estimate, bound: f64, sigmas: f64) -> bool {
    e.value - bound > sigmas * e.sigma + entstruct::witness::VIOLATION_EPS
}

fn eval(a: EvalArgs) -> entstruct::Result<()> {
    let file = load_counts(&a.counts)?;
    let n = file.n;
    if n < 2 {
        return Err(Error::Usage("eval needs at least two parties".into()));
    }
    let records = file.records;
    let all: Vec<usize> = (1..=n).collect();
    let (Some(mz), Some(mx)) = (records.mz(&all), records.parity(Label::X, &all)) else {
        return Err(Error::Validation(
            "counts file lacks full-register Z or X records".into(),
        ));
    };
    let pair = ExpectationPair::new(mz, mx)?;
    let alphas = if a.alpha.is_empty() {
        (2..=n).map(optimal_alpha::<f64>).collect()
    } else {
        a.alpha.clone()
    };
    let mut witnesses = Vec::new();
    for alpha in alphas {
        let signs = match a.sign {
            SignArg::Plus => vec![Sign::Plus],
            SignArg::Minus => vec![Sign::Minus],
            SignArg::Best => Sign::both().to_vec(),
        };
        let mut best: Option<(Sign, Estimate)> = None;
        for s in signs {
            let spec = Witness::separability(n, alpha, s)?;
            let (c1, c2) = spec.linear_coefficients();
            let e = pair.combine(c1, c2);
            if best.as_ref().is_none_or(|(_, b)| e.value > b.value) {
                best = Some((s, e));
            }
        }
        let (sign, e) = best.expect("at least one sign");
        let bounds = (2..=n)
            .map(|m| {
                let bound = msep_bound(alpha, m);
                SeparabilityBound {
                    m,
                    bound,
                    violated: violated(&e, bound, a.confidence_sigmas),
                }
            })
            .collect();
        witnesses.push(WitnessValue::Separability {
            alpha,
            sign,
            value: e.value,
            sigma: e.sigma,
            bounds,
        });
    }
    if let (Some(amix), Some(aplus)) = (
        records.parity(Label::AMix, &all),
        records.parity(Label::APlus, &all),
    ) {
        let depth_pair = ExpectationPair::new(amix, aplus)?;
        for &gamma in &a.gamma {
            let spec = Witness::depth(n, gamma)?;
            let (c1, c2) = spec.linear_coefficients();
            let e = depth_pair.combine(c1, c2);
            let bounds = if n == KPROD_PARTIES {
                (1..n)
                    .map(|k| {
                        kprod_bound(n, k, gamma).map(|b| ProducibilityBound {
                            k,
                            bound: b.value,
                            source: b.source,
                            violated: violated(&e, b.value, a.confidence_sigmas),
                        })
                    })
                    .collect::<entstruct::Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            witnesses.push(WitnessValue::Depth {
                gamma,
                value: e.value,
                sigma: e.sigma,
                bounds,
            });
        }
    }
    let report = EvalReport {
        schema: SCHEMA,
        n,
        confidence_sigmas: a.confidence_sigmas,
        expectations: full_register_estimates(&records)?,
        witnesses,
        intactness_upper: intactness_upper_bound(&pair, n, a.confidence_sigmas),
    };
    emit_json(a.out.as_deref(), &report)
}

fn infer(a: InferArgs) -> entstruct::Result<()> {
    let config = InferenceConfig {
        confidence_sigmas: a.confidence_sigmas,
        scan_sigmas: a.scan_sigmas,
        gamma_grid: if a.gamma_grid.is_empty() {
            default_gamma_grid()
        } else {
            a.gamma_grid.clone()
        },
        ..InferenceConfig::default()
    };
    let report = match (&a.counts, &a.table) {
        (Some(path), _) => infer_structure(load_counts(path)?.records.as_slice(), &config)?,
        (None, Some(path)) => infer_structure(&load_table(path)?, &config)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(path) = &a.out {
        emit_json(Some(path), &report)?;
    }
    if let Some(path) = &a.evidence {
        let f = create(path)?;
        write_evidence_csv(&report.evidence, f)?;
    }
    if a.json {
        emit_json(None, &report)
    } else {
        let labels: &[&str] = if a.path_labels && report.n == PATH_LABELS.len() {
            &PATH_LABELS
        } else {
            &[]
        };
        print!("{}", report.summary(labels));
        Ok(())
    }
}

fn thresholds(a: ThresholdsArgs) -> entstruct::Result<()> {
    if a.n_min < 2 || a.n_min > a.n_max {
        return Err(Error::Usage(format!(
            "invalid party range {}..={}",
            a.n_min, a.n_max
        )));
    }
    let family = match (a.theta, a.phi) {
        (Some(theta), Some(phi)) => StateFamily::GeneralizedGhz {
            theta,
            phi,
            phase_fix: a.phase_fix,
        },
        _ => StateFamily::StandardGhz,
    };
    let alpha = a.alpha.map_or(AlphaChoice::Optimal, AlphaChoice::Value);
    #[derive(Serialize)]
    struct Row {
        n: usize,
        target: &'static str,
        m: usize,
        alpha: f64,
        threshold: f64,
    }
    let mut rows = Vec::new();
    for n in a.n_min..=a.n_max {
        let targets = std::iter::once(Target::Gme).chain((3..=n).map(Target::Intactness));
        for target in targets {
            let query = NoiseThresholdQuery {
                n,
                target,
                alpha,
                state_family: family,
            };
            let (name, m) = match target {
                Target::Gme => ("gme", 2),
                Target::Intactness(m) => ("intactness", m),
            };
            rows.push(Row {
                n,
                target: name,
                m,
                alpha: query.alpha(),
                threshold: query.threshold()?,
            });
        }
    }
    write_csv(a.out.as_deref(), &rows)
}

fn visibility(a: VisibilityArgs) -> entstruct::Result<()> {
    let n = a.structure.n();
    let witness = match a.gamma {
        Some(g) => Witness::depth(n, g)?,
        None => Witness::separability(n, a.alpha, a.sign.into())?,
    };
    if a.points < 2 {
        return Err(Error::Usage("need at least two grid points".into()));
    }
    let bound = gme_bound(&witness)?;
    let grid = unit_grid(a.points);
    let points = visibility_margin_curve(&a.structure, &witness, bound, &grid, &grid)?;
    emit(a.out.as_deref(), |w| write_margin_csv(&points, w))
}
