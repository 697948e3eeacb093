mod config;

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bppd_core::bench::{
    self, errors_csv, histograms_csv, reports_csv, reports_json, thresholds_csv, DecoderKind,
    Experiment, ExperimentConfig, MetricsReport, Pipeline, ThresholdOptions, DEFAULT_BOOTSTRAP,
    DEFAULT_WINDOW,
};
use bppd_core::bp::BpState;
use bppd_core::dem::DetectorErrorModel;
use bppd_core::frame::{read_shots, shots_for, write_shots, Shot};
use bppd_core::graph::decompose_to_graph;
use bppd_core::mwpm::{BeliefMatchingDecoder, MatchingDecoder, MatchingScratch};
use bppd_core::partial::{TwoStageDecoder, Workspace};
use bppd_core::{Bits, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use config::Spec;

const THREADS_ENV: &str = "BPPD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "bppd", version, about = "Partial BP decoding with matching for surface-code memories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads; overridden by BPPD_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the circuit-level detector error model of a memory experiment.
    BuildDem(CodeArgs),
    /// Sample shots from the noisy circuit into a binary shot dump.
    Sample {
        #[command(flatten)]
        code: CodeArgs,
        /// Shots to draw; default min(10^6, ceil(1/p^2)).
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Decode a shot dump and write per-shot predictions.
    Decode(DecodeArgs),
    /// Run experiments and append metric rows to the results file.
    Bench(BenchArgs),
    /// Cross product of distances, error rates and decoders, with a
    /// threshold fit per decoder.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct CodeArgs {
    #[arg(long)]
    distance: usize,
    /// Syndrome extraction rounds; defaults to the distance.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    p: f64,
}

impl CodeArgs {
    fn rounds(&self) -> usize {
        self.rounds.unwrap_or(self.distance)
    }
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Binary shot dump.
    shots: PathBuf,
    /// Model file; otherwise built from --distance, --rounds and --p.
    #[arg(long, conflicts_with_all = ["distance", "rounds", "p"])]
    dem: Option<PathBuf>,
    #[arg(long)]
    distance: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value = "bp+mwpm")]
    decoder: DecoderKind,
    #[arg(long, default_value_t = 30)]
    m_iter: usize,
    #[arg(long, default_value_t = 0.9)]
    t_bp: f64,
    /// Exit with status 3 when more shots than this fail to decode.
    #[arg(long)]
    max_failures: Option<u64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Experiment file of key = value sections.
    #[arg(long, conflicts_with_all = ["distance", "rounds", "p", "decoder", "m_iter", "t_bp", "shots", "timing_batch"])]
    config: Option<PathBuf>,
    #[arg(long)]
    distance: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    decoder: Option<DecoderKind>,
    #[arg(long)]
    m_iter: Option<usize>,
    #[arg(long)]
    t_bp: Option<f64>,
    #[arg(long)]
    shots: Option<u64>,
    /// Syndromes in the second-stage timing batch; 0 disables timing.
    #[arg(long)]
    timing_batch: Option<usize>,
    /// Decode this shot dump instead of sampling.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Exit with status 3 when more shots than this fail to decode.
    #[arg(long)]
    max_failures: Option<u64>,
    /// Also write syndrome weight histograms to this CSV file.
    #[arg(long)]
    histograms: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    distances: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    ps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values = ["mwpm", "bp+mwpm", "belief-matching"])]
    decoders: Vec<DecoderKind>,
    /// Upper limit on shots per point.
    #[arg(long)]
    shot_cap: Option<u64>,
    #[arg(long, default_value_t = 30)]
    m_iter: usize,
    #[arg(long, default_value_t = 0.9)]
    t_bp: f64,
    #[arg(long, default_value_t = 0)]
    timing_batch: usize,
    /// Fit window half-width, relative to the crossing estimate.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: f64,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
}

/// A failure and the exit status it maps to.
#[derive(Debug)]
enum Failure {
    /// Bad arguments or parameters: status 2.
    Usage(String),
    /// Failure budget exceeded or threshold estimation failed: status 3.
    Budget(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Budget(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Budget(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(m) => Failure::Usage(m),
            Error::Estimation(_) => Failure::Budget(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = f.message().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::BuildDem(code) => build_dem(&cli, code),
        Command::Sample { code, shots } => sample(&cli, code, *shots),
        Command::Decode(args) => decode(&cli, args),
        Command::Bench(args) => bench_cmd(&cli, args),
        Command::Sweep(args) => sweep(&cli, args),
    }
}

fn configure_threads(flag: Option<usize>) -> Outcome<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Failure::Usage(format!("{THREADS_ENV} must be a thread count, got {v:?}")))?,
        ),
        Err(_) => flag,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    Ok(())
}

/// Writes `text` to `--out`, or to standard output.
fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn build_dem(cli: &Cli, code: &CodeArgs) -> Outcome<()> {
    let pipeline = Pipeline::build(code.distance, code.rounds(), code.p)?;
    let dem = pipeline.dem();
    emit(cli.out.as_deref(), &dem.to_text())?;
    eprintln!(
        "detectors={} observables={} mechanisms={} hyperedges={}",
        dem.n_detectors(),
        dem.n_observables(),
        dem.n_mechanisms(),
        dem.hyperedge_count()
    );
    Ok(())
}

fn sample(cli: &Cli, code: &CodeArgs, shots: Option<u64>) -> Outcome<()> {
    let out = cli
        .out
        .as_deref()
        .ok_or(Failure::Usage("sample needs --out for the binary shot dump".into()))?;
    let n = match shots {
        Some(0) => return Err(Failure::Usage("shots must be at least 1".into())),
        Some(n) => n,
        None => shots_for(code.p)?,
    };
    let pipeline = Pipeline::build(code.distance, code.rounds(), code.p)?;
    let sampler = pipeline.sampler();
    let shots = sampler.sample_range(cli.seed, 0, n);
    let mut w = BufWriter::new(File::create(out)?);
    write_shots(&mut w, sampler.n_detectors(), sampler.n_observables(), &shots)?;
    w.flush()?;
    eprintln!(
        "shots={} detectors={} observables={}",
        n,
        sampler.n_detectors(),
        sampler.n_observables()
    );
    Ok(())
}

enum Engine {
    Mwpm(MatchingDecoder),
    BpMwpm(TwoStageDecoder),
    Belief(BeliefMatchingDecoder),
}

enum Scratch {
    Matching(MatchingScratch),
    TwoStage(Box<Workspace>),
    Bp(BpState),
}

impl Engine {
    fn scratch(&self) -> Scratch {
        match self {
            Engine::Mwpm(_) => Scratch::Matching(MatchingScratch::default()),
            Engine::BpMwpm(t) => Scratch::TwoStage(Box::new(t.workspace())),
            Engine::Belief(b) => Scratch::Bp(b.new_state()),
        }
    }

    fn decode(&self, shot: &Shot, scratch: &mut Scratch) -> bppd_core::Result<Bits> {
        let s = &shot.syndrome;
        match (self, scratch) {
            (Engine::Mwpm(m), Scratch::Matching(ws)) => m.decode_with(s, ws).map(|c| c.lambda_c),
            (Engine::BpMwpm(t), Scratch::TwoStage(ws)) => t.decode_with(s, ws).map(|r| r.homology),
            (Engine::Belief(b), Scratch::Bp(ws)) => {
                b.decode_with(s, ws).map(|r| r.correction.lambda_c)
            }
            _ => unreachable!("scratch is built by the same engine"),
        }
    }
}

fn bit_string(b: &Bits) -> String {
    (0..b.len()).map(|i| if b.get(i) { '1' } else { '0' }).collect()
}

fn load_shots(path: &Path) -> Outcome<(usize, usize, Vec<Shot>)> {
    let file = File::open(path)
        .map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_shots(BufReader::new(file))?)
}

fn decode(cli: &Cli, args: &DecodeArgs) -> Outcome<()> {
    let dem = match &args.dem {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            DetectorErrorModel::parse(&text)?
        }
        None => {
            let (Some(d), Some(p)) = (args.distance, args.p) else {
                return Err(Failure::Usage(
                    "decode needs --dem or both --distance and --p".into(),
                ));
            };
            Pipeline::build(d, args.rounds.unwrap_or(d), p)?.dem().clone()
        }
    };
    let (n_det, n_obs, shots) = load_shots(&args.shots)?;
    if n_det != dem.n_detectors() || n_obs != dem.n_observables() {
        return Err(Failure::Usage(format!(
            "shot dump has {n_det} detectors and {n_obs} observables, model has {} and {}",
            dem.n_detectors(),
            dem.n_observables()
        )));
    }
    let graph = decompose_to_graph(&dem)?;
    let engine = match args.decoder {
        DecoderKind::Mwpm => Engine::Mwpm(MatchingDecoder::new(&graph)),
        DecoderKind::BpMwpm => {
            Engine::BpMwpm(TwoStageDecoder::new(&dem, &graph, args.m_iter, args.t_bp)?)
        }
        DecoderKind::BeliefMatching => {
            Engine::Belief(BeliefMatchingDecoder::new(&dem, &graph, args.m_iter)?)
        }
    };
    let predictions: Vec<Option<Bits>> = shots
        .par_iter()
        .map_init(|| engine.scratch(), |ws, shot| engine.decode(shot, ws).ok())
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut failures = 0u64;
    let mut errors = 0u64;
    w.write_record(["shot", "predicted", "observed", "logical_error"])
        .map_err(csv_failure)?;
    for (i, (shot, pred)) in shots.iter().zip(&predictions).enumerate() {
        let observed = bit_string(&shot.true_homology);
        let (predicted, wrong) = match pred {
            Some(h) => (bit_string(h), (*h != shot.true_homology) as u8),
            None => {
                failures += 1;
                ("error".to_string(), 0)
            }
        };
        errors += wrong as u64;
        w.write_record([i.to_string(), predicted, observed, wrong.to_string()])
            .map_err(csv_failure)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Other(e.to_string()))?;
    emit(cli.out.as_deref(), &String::from_utf8_lossy(&bytes))?;
    eprintln!(
        "shots={} logical_errors={} decode_failures={}",
        shots.len(),
        errors,
        failures
    );
    check_failures(failures, args.max_failures)
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Other(e.to_string())
}

fn check_failures(failures: u64, budget: Option<u64>) -> Outcome<()> {
    match budget {
        Some(b) if failures > b => Err(Failure::Budget(format!(
            "{failures} decode failures exceed the budget of {b}"
        ))),
        _ => Ok(()),
    }
}

fn bench_specs(cli: &Cli, args: &BenchArgs) -> Outcome<Vec<Spec>> {
    let seed = Spec {
        seed: Some(cli.seed),
        ..Spec::default()
    };
    match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let specs = config::parse(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(specs.into_iter().map(|s| s.or(&seed)).collect())
        }
        None => Ok(vec![Spec {
            name: String::new(),
            distance: args.distance,
            rounds: args.rounds,
            p: args.p,
            decoder: args.decoder,
            m_iter: args.m_iter,
            t_bp: args.t_bp,
            shots: args.shots,
            seed: Some(cli.seed),
            timing_batch: args.timing_batch,
        }]),
    }
}

/// Runs `configs` grouped by shot stream; one result per config, in order.
fn run_grouped(
    configs: &[ExperimentConfig],
    replay: Option<&[Shot]>,
) -> Vec<Result<MetricsReport, String>> {
    let key = |c: &ExperimentConfig| (c.distance, c.rounds, c.p_phys.to_bits(), c.shots, c.seed);
    let mut out: Vec<Option<Result<MetricsReport, String>>> = vec![None; configs.len()];
    for i in 0..configs.len() {
        if out[i].is_some() {
            continue;
        }
        let group: Vec<usize> = (i..configs.len())
            .filter(|&j| out[j].is_none() && key(&configs[j]) == key(&configs[i]))
            .collect();
        let cfgs: Vec<ExperimentConfig> = group.iter().map(|&j| configs[j].clone()).collect();
        let c = &cfgs[0];
        eprintln!(
            "running d={} rounds={} p={} shots={} ({} decoder configurations)",
            c.distance,
            c.rounds,
            c.p_phys,
            c.shots,
            cfgs.len()
        );
        let result = Pipeline::for_config(c).and_then(|pipeline| {
            let experiment = Experiment::new(&pipeline, &cfgs)?;
            match replay {
                Some(shots) => experiment.replay(shots),
                None => experiment.run(),
            }
        });
        match result {
            Ok(reports) => {
                for (j, r) in group.into_iter().zip(reports) {
                    out[j] = Some(Ok(r));
                }
            }
            Err(e) => {
                for j in group {
                    out[j] = Some(Err(e.to_string()));
                }
            }
        }
    }
    out.into_iter().map(|r| r.expect("every config is run")).collect()
}

fn bench_cmd(cli: &Cli, args: &BenchArgs) -> Outcome<()> {
    let mut configs = Vec::new();
    for spec in bench_specs(cli, args)? {
        configs.extend(spec.expand().map_err(Failure::Usage)?);
    }
    let replay = match &args.replay {
        Some(path) => {
            let (_, _, shots) = load_shots(path)?;
            if shots.is_empty() {
                return Err(Failure::Usage("shot dump is empty".into()));
            }
            for c in &mut configs {
                c.shots = shots.len() as u64;
            }
            Some(shots)
        }
        None => None,
    };
    let results = run_grouped(&configs, replay.as_deref());
    let reports: Vec<MetricsReport> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let errors: Vec<(ExperimentConfig, String)> = configs
        .iter()
        .zip(&results)
        .filter_map(|(c, r)| r.as_ref().err().map(|e| (c.clone(), e.clone())))
        .collect();
    match cli.format {
        Format::Json => emit(cli.out.as_deref(), &reports_json(&reports, &errors, &[])?)?,
        Format::Csv => {
            let fresh = cli
                .out
                .as_deref()
                .is_none_or(|p| fs::metadata(p).map_or(true, |m| m.len() == 0));
            let mut text = String::new();
            for (i, (c, r)) in configs.iter().zip(&results).enumerate() {
                let header = fresh && i == 0;
                text += &match r {
                    Ok(report) => reports_csv(std::slice::from_ref(report), header)?,
                    Err(e) => errors_csv(&[(c.clone(), e.clone())], header)?,
                };
            }
            match cli.out.as_deref() {
                Some(path) => OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)?
                    .write_all(text.as_bytes())?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
    }
    if let Some(path) = &args.histograms {
        fs::write(path, histograms_csv(&reports)?)?;
    }
    for r in &reports {
        eprintln!(
            "d={} p={} {} m_iter={} t_bp={}: {} / {} logical errors",
            r.config.distance,
            r.config.p_phys,
            r.config.decoder,
            r.config.m_iter,
            r.config.t_bp,
            r.logical_errors,
            r.shots - r.decode_failures
        );
    }
    if !errors.is_empty() {
        return Err(Failure::Other(format!(
            "{} of {} configurations failed",
            errors.len(),
            configs.len()
        )));
    }
    let failures = reports.iter().map(|r| r.decode_failures).sum();
    check_failures(failures, args.max_failures)
}

fn distinct<T: PartialEq + Copy>(v: &[T]) -> usize {
    let mut seen: Vec<T> = Vec::new();
    for &x in v {
        if !seen.contains(&x) {
            seen.push(x);
        }
    }
    seen.len()
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Outcome<()> {
    if args.distances.is_empty() || args.ps.is_empty() || args.decoders.is_empty() {
        return Err(Failure::Usage(
            "sweep grids must be nonempty (--distances, --ps, --decoders)".into(),
        ));
    }
    let template = ExperimentConfig {
        m_iter: args.m_iter,
        t_bp: args.t_bp,
        seed: cli.seed,
        timing_batch: args.timing_batch,
        ..ExperimentConfig::new(args.distances[0], args.ps[0], args.decoders[0])
    };
    for &d in &args.distances {
        for &p in &args.ps {
            for &decoder in &args.decoders {
                ExperimentConfig {
                    distance: d,
                    rounds: d,
                    p_phys: p,
                    decoder,
                    ..template.clone()
                }
                .validate()?;
            }
            shots_for(p)?;
        }
    }
    if !(args.window > 0.0) {
        return Err(Failure::Usage("--window must be positive".into()));
    }
    let (nd, np) = (distinct(&args.distances), distinct(&args.ps));
    if nd < 3 || np < 4 {
        return Err(Failure::Budget(format!(
            "threshold estimation needs at least 3 distances and 4 error rates, got {nd} and {np}"
        )));
    }
    let opts = ThresholdOptions {
        window: args.window,
        bootstrap: args.bootstrap,
        seed: cli.seed,
    };
    let (reports, fits) = bench::sweep(
        &args.distances,
        &args.ps,
        &args.decoders,
        &template,
        args.shot_cap,
        &opts,
    )?;
    let text = match cli.format {
        Format::Json => reports_json(&reports, &[], &fits)?,
        Format::Csv => reports_csv(&reports, true)? + &thresholds_csv(&template, &fits, false)?,
    };
    emit(cli.out.as_deref(), &text)?;
    let mut failed = Vec::new();
    for (k, fit) in &fits {
        match fit {
            Ok(f) => eprintln!(
                "{k}: p_th = {:.4}% [{:.4}%, {:.4}%]",
                100.0 * f.p_th,
                100.0 * f.ci_low,
                100.0 * f.ci_high
            ),
            Err(e) => failed.push(format!("{k}: {e}")),
        }
    }
    if !failed.is_empty() {
        return Err(Failure::Budget(failed.join("; ")));
    }
    Ok(())
}
