use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use solab::experiment::{write_result_csv, write_weight_pair, write_weights_csv};
use solab::metrics::ValueConvention;
use solab::{
    attractor_set, classify_regime, convergence_score, decode_tour, dominant_attractor, effort_tradeoff, export,
    fit_baseline, load_sweep, modular_from_spec, recall_rate, run_so_with, run_sweep,
    shortest_tour_exhaustive, solve_by_restarts, AppropriatenessRule, Artifact, Engine, ModularSpec, NodeOrder,
    RegimeEvidence, RegimeRule, RngStream, SoConfig, Stage, StateVector, SweepPlan, TspCoefficients, TspInstance,
};

#[derive(Parser)]
#[command(
    name = "solab",
    version,
    about = "Hopfield networks, self-optimization with Hebbian learning, and creativity metrics",
    propagate_version = true
)]
struct Cli {
    /// JSON object whose keys override the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective settings as JSON and exit
    #[arg(long, global = true)]
    print_config: bool,
    /// Silence progress messages on stderr
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a modular coupling matrix W0 as CSV
    GenWeights(GenWeights),
    /// One before/during/after-learning run
    RunSo(RunSo),
    /// Learning-rate sweep over many seeds, resumable
    Sweep(Sweep),
    /// Long single run at a small learning rate
    Effort(Effort),
    /// Recompute creativity scores for a finished sweep
    Metrics(Metrics),
    /// Store random patterns and recall them from corrupted probes
    RecallDemo(RecallDemo),
    /// Travelling-salesman encoding: decode check or random restarts
    TspDemo(TspDemo),
    /// Write figure data for a finished sweep
    Export(Export),
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct NetArgs {
    /// Number of nodes N
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Module size k (must divide N)
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Between-module coupling magnitude p
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Seed for the signs of W0
    #[arg(long, default_value_t = 1)]
    w_seed: u64,
}

impl NetArgs {
    fn spec(&self) -> ModularSpec {
        ModularSpec {
            n: self.n,
            k: self.k,
            p: self.p,
            seed: self.w_seed,
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct GenWeights {
    #[command(flatten)]
    #[serde(flatten)]
    net: NetArgs,
    /// Output CSV (N rows of N values)
    #[arg(long, default_value = "weights_initial.csv")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum EngineArg {
    Fast,
    Reference,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum OrderArg {
    Sweep,
    Uniform,
}

impl From<OrderArg> for NodeOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Sweep => NodeOrder::Sweep,
            OrderArg::Uniform => NodeOrder::Uniform,
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct RunSo {
    #[command(flatten)]
    #[serde(flatten)]
    net: NetArgs,
    /// Learning rate alpha
    #[arg(long, default_value_t = 5e-7)]
    alpha: f64,
    /// Asynchronous updates per reset (T)
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Resets per stage (R)
    #[arg(long, default_value_t = 1000)]
    resets: usize,
    /// Seed for initial states and node choices
    #[arg(long, env = "SO_LAB_MASTER_SEED", default_value_t = 42)]
    seed: u64,
    /// Output CSV of final energies
    #[arg(long, default_value = "runs.csv")]
    out: PathBuf,
    /// Also write weights_initial.csv and weights_learned.csv here
    #[arg(long, value_name = "DIR")]
    weights_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineArg::Fast)]
    engine: EngineArg,
    /// Node selection order within a reset
    #[arg(long, value_enum, default_value_t = OrderArg::Sweep)]
    order: OrderArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    /// 12 rates, 25 seeds, 500 resets
    Desk,
    /// 72 rates, 2000 seeds, 1000 resets
    Full,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct Sweep {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Explicit learning rates (comma-separated); replaces the preset grid
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Seeds per learning rate (N_s)
    #[arg(long)]
    seeds: Option<usize>,
    /// Resets per stage (N_r)
    #[arg(long)]
    resets: Option<usize>,
    /// Asynchronous updates per reset (T)
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    net: NetArgs,
    /// Master seed
    #[arg(long, env = "SO_LAB_MASTER_SEED", default_value_t = 42)]
    seed: u64,
    /// Output directory (cells, runs.csv, scores.csv, baseline.json, manifest.json)
    #[arg(long)]
    out: PathBuf,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Keep the seed-0 learned matrix of this alpha index
    #[arg(long)]
    keep_learned: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct Effort {
    #[command(flatten)]
    #[serde(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = 3e-8)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 17000)]
    resets: usize,
    #[arg(long, env = "SO_LAB_MASTER_SEED", default_value_t = 42)]
    seed: u64,
    /// Output CSV of final energies
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ValueArg {
    /// P(X >= round(k)): the BL mean scores about 0.5
    AtLeastAsGood,
    /// P(X > floor(k))
    StrictlyBetter,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ApproArg {
    /// value x convergence
    Value,
    /// novelty x convergence
    Novelty,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct Metrics {
    /// Sweep directory
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ValueArg::AtLeastAsGood)]
    value: ValueArg,
    #[arg(long, value_enum, default_value_t = ApproArg::Value)]
    appropriateness: ApproArg,
    /// Convergence needed to call an outcome appropriate
    #[arg(long, default_value_t = 0.9)]
    min_convergence: f64,
    /// Lower edge of the BL distribution in sigma below the mean
    #[arg(long, default_value_t = 2.0)]
    band_sigmas: f64,
    /// Write scores here instead of only printing them
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct RecallDemo {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Stored patterns M
    #[arg(long, default_value_t = 5)]
    patterns: usize,
    /// Fraction of probe nodes flipped
    #[arg(long, default_value_t = 0.1)]
    corrupt: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Updates per probe [default: 20 N]
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, env = "SO_LAB_MASTER_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum TspPreset {
    /// Decode the four-city example grid 0010 1000 0001 0100
    Eq4,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct TspDemo {
    #[arg(long, default_value_t = 5)]
    cities: usize,
    #[arg(long, value_enum)]
    preset: Option<TspPreset>,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    /// Updates per restart [default: 50 n^2]
    #[arg(long)]
    steps: Option<usize>,
    /// Side of the square holding the cities [default: largest side keeping valid tours stable]
    #[arg(long)]
    side: Option<f64>,
    #[arg(long, env = "SO_LAB_MASTER_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ArtifactArg {
    All,
    EnergyScatter,
    Distributions,
    ScoresCurve,
    Pareto,
    WeightsHeatmap,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
struct Export {
    /// Sweep directory
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ArtifactArg::All)]
    artifact: ArtifactArg,
    /// Destination [default: <DIR>/figures]
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage problems exit with 1, everything else with 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e
            .chain()
            .any(|c| matches!(c.downcast_ref::<solab::Error>(), Some(solab::Error::Config(_) | solab::Error::Dimension { .. })));
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<solab::Error> for Failure {
    fn from(e: solab::Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

/// Applies the config file on top of the parsed flags.
fn settle<T: Serialize + DeserializeOwned>(args: T, config: Option<&Value>) -> Result<T, Failure> {
    let Some(config) = config else {
        return Ok(args);
    };
    let Value::Object(overrides) = config else {
        return Err(usage("config file must hold a JSON object"));
    };
    let mut value = serde_json::to_value(&args).map_err(|e| Failure::Runtime(e.into()))?;
    let Value::Object(fields) = &mut value else {
        unreachable!("argument structs serialize to objects");
    };
    for (k, v) in overrides {
        if !fields.contains_key(k) {
            return Err(usage(format!("unknown setting {k:?} in config file")));
        }
        fields.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| usage(format!("config file: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            report(&e);
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}

/// Prints the error chain, skipping causes already quoted by their parent.
fn report(e: &anyhow::Error) {
    let mut line = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !line.contains(&text) {
            line = format!("{line}: {text}");
        }
    }
    eprintln!("error: {line}");
}

fn run(cli: Cli) -> Outcome {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            Some(serde_json::from_str::<Value>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let config = config.as_ref();
    macro_rules! dispatch {
        ($args:expr, $handler:path) => {{
            let args = settle($args, config)?;
            if cli.print_config {
                println!("{}", serde_json::to_string_pretty(&args).map_err(|e| Failure::Runtime(e.into()))?);
                return Ok(());
            }
            $handler(args)
        }};
    }
    match cli.command {
        Command::GenWeights(a) => dispatch!(a, gen_weights),
        Command::RunSo(a) => dispatch!(a, run_so),
        Command::Sweep(a) => dispatch!(a, sweep),
        Command::Effort(a) => dispatch!(a, effort),
        Command::Metrics(a) => dispatch!(a, metrics),
        Command::RecallDemo(a) => dispatch!(a, recall_demo),
        Command::TspDemo(a) => dispatch!(a, tsp_demo),
        Command::Export(a) => dispatch!(a, export_cmd),
    }
}

fn gen_weights(a: GenWeights) -> Outcome {
    let w = modular_from_spec(&a.net.spec())?;
    write_weights_csv(&a.out, &w)?;
    println!(
        "wrote {}x{} modular matrix ({} modules of {}) to {}",
        a.net.n,
        a.net.n,
        a.net.n / a.net.k,
        a.net.k,
        a.out.display()
    );
    Ok(())
}

fn run_so(a: RunSo) -> Outcome {
    let w0 = modular_from_spec(&a.net.spec())?;
    let config = SoConfig {
        node_order: a.order.into(),
        ..SoConfig::three_stage(a.alpha, a.steps, a.resets)
    };
    let engine = match a.engine {
        EngineArg::Fast => Engine::Fast,
        EngineArg::Reference => Engine::Reference,
    };
    log::info!("running {} resets of {} steps", 3 * a.resets, a.steps);
    let seed = a.seed;
    let res = run_so_with(&w0, &config, seed, engine, |s| RngStream::derive(seed, 0, 0, s.code()))?;
    write_result_csv(&a.out, &res)?;
    if let Some(dir) = &a.weights_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
        write_weight_pair(dir, &w0, &res.learned)?;
    }
    let bl = res.stage_energies(Stage::BeforeLearning);
    let al = res.stage_energies(Stage::AfterLearning);
    let fit = fit_baseline(&bl)?;
    let conv = convergence_score(&[&al[..]], &fit)?;
    let mean_al = al.iter().sum::<f64>() / al.len() as f64;
    let bl_set = attractor_set(&res.records, Stage::BeforeLearning);
    let dominant = dominant_attractor(&res.records, Stage::AfterLearning);
    let regime = classify_regime(
        &RegimeEvidence {
            convergence: conv.score,
            mean_al_energy: mean_al,
            dominant: dominant.as_ref().map(|(f, s)| (f, *s)),
            bl_attractors: &bl_set,
        },
        &fit,
        &RegimeRule::default(),
    );
    println!("alpha           {}", a.alpha);
    println!("BL mean / sd    {:.3} / {:.3}", fit.mu, fit.sigma);
    println!("AL mean         {mean_al:.3}");
    println!("convergence     {:.3}", conv.score);
    if let Some((fp, share)) = &dominant {
        println!(
            "dominant AL     {:.1}% of resets, visited before learning: {}",
            100.0 * share,
            bl_set.contains(fp)
        );
    }
    println!("regime          {regime}");
    println!("records         {}", a.out.display());
    Ok(())
}

fn sweep(a: Sweep) -> Outcome {
    let mut plan = match a.preset {
        Preset::Desk => SweepPlan::desk_scale(a.seed),
        Preset::Full => SweepPlan::full_scale(a.seed),
    };
    if let Some(alphas) = a.alphas {
        plan.alphas = alphas;
    }
    plan.seeds = a.seeds.unwrap_or(plan.seeds);
    plan.resets = a.resets.unwrap_or(plan.resets);
    plan.steps = a.steps.unwrap_or(plan.steps);
    plan.network = a.net.spec();
    plan.jobs = a.jobs;
    plan.keep_learned = a.keep_learned;
    let ds = run_sweep(&plan, Some(&a.out))?;
    println!(
        "baseline: mu {:.3}, sigma {:.3} over {} samples",
        ds.baseline.mu, ds.baseline.sigma, ds.baseline.sample_count
    );
    print_scores(&ds.scores);
    println!("outputs in {}", a.out.display());
    Ok(())
}

fn print_scores(scores: &[solab::CreativityScores]) {
    println!(
        "{:>10} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}  regime",
        "alpha", "novelty", "value", "conv", "approp", "p1s", "p2s", "p3s"
    );
    for s in scores {
        println!(
            "{:>10.3e} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>7.3} {:>7.3} {:>7.3}  {}",
            s.alpha, s.novelty, s.value, s.convergence, s.appropriateness, s.p_1sigma, s.p_2sigma, s.p_3sigma, s.regime
        );
    }
}

fn effort(a: Effort) -> Outcome {
    let w0 = modular_from_spec(&a.net.spec())?;
    log::info!("running {} resets of {} steps", 3 * a.resets, a.steps);
    let report = effort_tradeoff(&w0, a.alpha, a.steps, a.resets, a.seed, &RegimeRule::default())?;
    if let Some(out) = &a.out {
        write_result_csv(out, &report.result)?;
    }
    println!("alpha           {}", report.alpha);
    println!("resets/stage    {}", report.resets);
    println!("BL mean / sd    {:.3} / {:.3}", report.baseline.mu, report.baseline.sigma);
    println!("AL mean         {:.3}", report.mean_al_energy);
    println!("convergence     {:.3}", report.convergence);
    println!(
        "converged below the BL mean: {}",
        if report.converged_below_mean { "yes" } else { "no" }
    );
    Ok(())
}

fn metrics(a: Metrics) -> Outcome {
    let mut rescore = solab::experiment::read_plan(&a.dir)?;
    rescore.value_convention = match a.value {
        ValueArg::AtLeastAsGood => ValueConvention::AtLeastAsGood,
        ValueArg::StrictlyBetter => ValueConvention::StrictlyBetter,
    };
    rescore.appropriateness = match a.appropriateness {
        ApproArg::Value => AppropriatenessRule::ValueTimesConvergence,
        ApproArg::Novelty => AppropriatenessRule::NoveltyTimesConvergence,
    };
    rescore.regime_rule = RegimeRule {
        min_convergence: a.min_convergence,
        band_sigmas: a.band_sigmas,
        ..RegimeRule::default()
    };
    let ds = load_sweep(&a.dir, Some(&rescore))?;
    let [p1, p2, p3] = ds.baseline_p;
    println!(
        "baseline: mu {:.3}, sigma {:.3}, lambda {:.3}; BL below 1/2/3 sigma: {p1:.4} {p2:.4} {p3:.4}",
        ds.baseline.mu, ds.baseline.sigma, ds.baseline.lambda
    );
    print_scores(&ds.scores);
    if let Some(out) = &a.out {
        solab::experiment::write_scores_csv(out, &ds.scores)?;
    }
    Ok(())
}

fn recall_demo(a: RecallDemo) -> Outcome {
    let steps = a.steps.unwrap_or(20 * a.n);
    let r = recall_rate(a.n, a.patterns, a.corrupt, a.trials, steps, &mut RngStream::new(a.seed))?;
    println!(
        "N={} M={} ({:.3} N), corruption {:.0}%: exact recall {}/{} = {:.3}",
        r.n,
        r.patterns,
        r.patterns as f64 / r.n as f64,
        100.0 * r.corrupt,
        r.exact,
        r.trials,
        r.rate()
    );
    Ok(())
}

fn tsp_demo(a: TspDemo) -> Outcome {
    if a.preset == Some(TspPreset::Eq4) {
        let grid = "0010100000010100";
        let bits: Vec<u8> = grid.bytes().map(|b| b - b'0').collect();
        let state = StateVector::from_binary(&bits)?;
        for row in grid.as_bytes().chunks(4) {
            println!("{}", std::str::from_utf8(row).expect("ascii"));
        }
        match decode_tour(&state, 4)? {
            Ok(tour) => println!("tour {tour}"),
            Err(bad) => println!("{bad}"),
        }
        return Ok(());
    }
    if a.cities < 2 {
        return Err(usage("need at least 2 cities"));
    }
    let coeffs = TspCoefficients::default();
    let side = a.side.unwrap_or_else(|| coeffs.stable_side());
    let mut rng = RngStream::new(a.seed);
    let inst = TspInstance::random_euclidean(a.cities, side, coeffs, &mut rng)?;
    let steps = a.steps.unwrap_or(50 * a.cities * a.cities);
    let summary = solve_by_restarts(&inst, a.restarts, steps, &mut rng)?;
    println!("{} cities in a square of side {side:.4}", a.cities);
    println!("valid decodes   {}/{}", summary.valid, summary.restarts);
    match &summary.best {
        Some((tour, len)) => println!("best tour       {tour} (length {len:.5})"),
        None => println!("best tour       none"),
    }
    if a.cities <= 9 {
        let (opt, len) = shortest_tour_exhaustive(&inst);
        println!("optimum         {opt} (length {len:.5})");
    }
    Ok(())
}

fn export_cmd(a: Export) -> Outcome {
    let ds = load_sweep(&a.dir, None)?;
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("figures"));
    let artifacts: Vec<Artifact> = match a.artifact {
        ArtifactArg::All => Artifact::ALL.to_vec(),
        ArtifactArg::EnergyScatter => vec![Artifact::EnergyScatter],
        ArtifactArg::Distributions => vec![Artifact::Distributions],
        ArtifactArg::ScoresCurve => vec![Artifact::ScoresCurve],
        ArtifactArg::Pareto => vec![Artifact::Pareto],
        ArtifactArg::WeightsHeatmap => vec![Artifact::WeightsHeatmap],
    };
    for artifact in artifacts {
        match export(&ds, artifact, &out) {
            Ok(paths) => paths.iter().for_each(|p| println!("{}", display(p))),
            Err(solab::Error::MissingInput(what)) if a.artifact == ArtifactArg::All => {
                log::warn!("skipping {artifact:?}: missing {what}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
