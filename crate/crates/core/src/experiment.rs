//! Learning-rate sweeps: seed derivation, cell scheduling, persistence and
//! figure-data export.
//!
//! A sweep is a grid of cells keyed by `(alpha index, seed index)`. The
//! before-learning stage does not depend on `alpha`, so it runs once per
//! seed and every cell of that seed shares it. Each finished cell is written
//! to `cells/` under the output directory before the sweep moves on, and a
//! rerun over the same directory only computes the cells that are missing.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::NodeOrder;
use crate::error::{Error, Result};
use crate::metrics::{
    above_chance, aggregate_scores, appropriateness_score, classify_regime, convergence_score, fit_baseline,
    mean_and_sd, novelty_of_energy, value_of_energy_with, AppropriatenessRule, BaselineFit, EnergySample, Regime,
    RegimeEvidence, RegimeRule, ValueConvention,
};
use crate::network::{Fingerprint, WeightMatrix};
use crate::rng::{RngStream, SHARED_ALPHA};
use crate::so::{attractor_set, dominant_attractor, run_so_with, Engine, SoConfig, SoResult, SoRunRecord, Stage};
use crate::weights::{modular_from_spec, ModularSpec};

const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// `count` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// The stream for one stage of one sweep cell.
pub fn derive_seed(master: u64, alpha_index: u64, seed_index: u64, stage: Stage) -> RngStream {
    RngStream::derive(master, alpha_index, seed_index, stage.code())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub alphas: Vec<f64>,
    /// `N_s`.
    pub seeds: usize,
    /// `N_r`, resets per stage.
    pub resets: usize,
    /// `T`, asynchronous steps per reset.
    pub steps: usize,
    pub network: ModularSpec,
    pub master_seed: u64,
    #[serde(default)]
    pub node_order: NodeOrder,
    #[serde(default)]
    pub value_convention: ValueConvention,
    #[serde(default)]
    pub appropriateness: AppropriatenessRule,
    #[serde(default)]
    pub regime_rule: RegimeRule,
    /// Alpha index whose seed-0 learned matrix is kept for export.
    #[serde(default)]
    pub keep_learned: Option<usize>,
    /// Worker threads; never changes the output.
    #[serde(skip, default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl SweepPlan {
    /// 72 learning rates over `[1e-9, 1e-4]`, 2000 seeds, 1000 resets.
    pub fn full_scale(master_seed: u64) -> Self {
        SweepPlan {
            alphas: log_grid(1e-9, 1e-4, 72),
            seeds: 2000,
            resets: 1000,
            ..Self::desk_scale(master_seed)
        }
    }

    /// 12 learning rates over `[1e-9, 1e-4]`, 25 seeds, 500 resets.
    pub fn desk_scale(master_seed: u64) -> Self {
        SweepPlan {
            alphas: log_grid(1e-9, 1e-4, 12),
            seeds: 25,
            resets: 500,
            steps: 1000,
            network: ModularSpec {
                n: 100,
                k: 5,
                p: 0.1,
                seed: 1,
            },
            master_seed,
            node_order: NodeOrder::default(),
            value_convention: ValueConvention::default(),
            appropriateness: AppropriatenessRule::default(),
            regime_rule: RegimeRule::default(),
            keep_learned: None,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::config("alpha grid is empty"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::config(format!("alpha {a} is not a finite non-negative number")));
        }
        if self.seeds == 0 || self.resets == 0 || self.steps == 0 {
            return Err(Error::config("seeds, resets and steps must all be at least 1"));
        }
        if self.resets < 2 && self.seeds < 2 {
            return Err(Error::config("the baseline fit needs at least 2 BL samples"));
        }
        if let Some(i) = self.keep_learned {
            if i >= self.alphas.len() {
                return Err(Error::config(format!("keep_learned index {i} is outside the alpha grid")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be at least 1"));
        }
        self.network.validate()
    }

    fn so_config(&self, alpha: f64, stages: Vec<Stage>) -> SoConfig {
        SoConfig {
            alpha,
            steps_per_reset: self.steps,
            resets_per_stage: self.resets,
            stages,
            record_states: false,
            node_order: self.node_order,
        }
    }
}

/// Per-learning-rate summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreativityScores {
    pub alpha: f64,
    pub novelty: f64,
    pub value: f64,
    pub convergence: f64,
    pub sigma_al: f64,
    pub appropriateness: f64,
    pub p_1sigma: f64,
    pub p_2sigma: f64,
    pub p_3sigma: f64,
    pub mean_al_energy: f64,
    /// Majority of the per-seed labels; ties go to the earlier label.
    pub regime: Regime,
    pub seed_regimes: Vec<Regime>,
}

#[derive(Debug, Clone)]
pub struct SweepDataset {
    pub plan: SweepPlan,
    pub initial_weights: WeightMatrix,
    pub learned_weights: Option<WeightMatrix>,
    pub baseline: BaselineFit,
    /// Fractions of BL energies below `μ_BL - kσ_BL` for k = 1, 2, 3.
    pub baseline_p: [f64; 3],
    /// BL records, one vector per seed.
    pub before: Vec<Vec<SoRunRecord>>,
    /// L and AL records, indexed `[alpha][seed]`.
    pub cells: Vec<Vec<Vec<SoRunRecord>>>,
    pub scores: Vec<CreativityScores>,
    pub wall_time: Duration,
}

impl SweepDataset {
    pub fn samples(&self) -> impl Iterator<Item = EnergySample> + '_ {
        let bl = self.before.iter().enumerate().flat_map(|(s, recs)| {
            recs.iter().map(move |r| EnergySample {
                stage: r.stage,
                alpha: 0.0,
                seed: s as u64,
                reset: r.reset,
                energy: r.energy,
            })
        });
        let learned = self.cells.iter().enumerate().flat_map(move |(a, row)| {
            let alpha = self.plan.alphas[a];
            row.iter().enumerate().flat_map(move |(s, recs)| {
                recs.iter().map(move |r| EnergySample {
                    stage: r.stage,
                    alpha,
                    seed: s as u64,
                    reset: r.reset,
                    energy: r.energy,
                })
            })
        });
        bl.chain(learned)
    }

    /// BL followed by L and AL records of one cell.
    pub fn run(&self, alpha_index: usize, seed_index: usize) -> Option<Vec<&SoRunRecord>> {
        let before = self.before.get(seed_index)?;
        let cell = self.cells.get(alpha_index)?.get(seed_index)?;
        Some(before.iter().chain(cell.iter()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    EnergyScatter,
    Distributions,
    ScoresCurve,
    Pareto,
    WeightsHeatmap,
}

impl Artifact {
    pub const ALL: [Artifact; 5] = [
        Artifact::EnergyScatter,
        Artifact::Distributions,
        Artifact::ScoresCurve,
        Artifact::Pareto,
        Artifact::WeightsHeatmap,
    ];
}

impl std::str::FromStr for Artifact {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "energy_scatter" => Ok(Artifact::EnergyScatter),
            "distributions" => Ok(Artifact::Distributions),
            "scores_curve" => Ok(Artifact::ScoresCurve),
            "pareto" => Ok(Artifact::Pareto),
            "weights_heatmap" => Ok(Artifact::WeightsHeatmap),
            _ => Err(Error::config(format!("unknown artifact {s:?}"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    plan: SweepPlan,
    master_seed: u64,
    code_version: String,
    complete: bool,
    /// `a{alpha}_s{seed}` or `bl_s{seed}` → done.
    cells: BTreeMap<String, bool>,
}

enum CellKey {
    Before(usize),
    Learning(usize, usize),
}

impl CellKey {
    fn name(&self) -> String {
        match self {
            CellKey::Before(s) => format!("bl_s{s:05}"),
            CellKey::Learning(a, s) => format!("a{a:03}_s{s:05}"),
        }
    }
}

struct CellOutput {
    records: Vec<SoRunRecord>,
    learned: Option<WeightMatrix>,
}

/// Runs (or resumes) a sweep. With `out` set, cells and summary files are
/// written there.
pub fn run_sweep(plan: &SweepPlan, out: Option<&Path>) -> Result<SweepDataset> {
    plan.validate()?;
    let started = Instant::now();
    let w0 = modular_from_spec(&plan.network)?;
    let cell_dir = out.map(|o| o.join("cells"));
    if let Some(dir) = &cell_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;

    let mut keys: Vec<CellKey> = (0..plan.seeds).map(CellKey::Before).collect();
    for a in 0..plan.alphas.len() {
        keys.extend((0..plan.seeds).map(|s| CellKey::Learning(a, s)));
    }
    if let Some(o) = out {
        let done = keys
            .iter()
            .map(|k| (k.name(), cell_dir.as_ref().is_some_and(|d| cell_path(d, k).exists())))
            .collect();
        write_manifest(o, plan, done, false)?;
    }

    let finished = AtomicUsize::new(0);
    let total = keys.len();
    let results: Vec<Result<CellOutput>> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let out = run_cell(plan, &w0, key, cell_dir.as_deref());
                let k = finished.fetch_add(1, Ordering::Relaxed) + 1;
                log::info!("cell {} ({k}/{total})", key.name());
                out
            })
            .collect()
    });

    let mut before = Vec::with_capacity(plan.seeds);
    let mut cells = vec![Vec::with_capacity(plan.seeds); plan.alphas.len()];
    let mut learned_weights = None;
    let mut first_error = None;
    let mut done = BTreeMap::new();
    for (key, res) in keys.iter().zip(results) {
        done.insert(key.name(), res.is_ok());
        match res {
            Ok(cell) => match key {
                CellKey::Before(_) => before.push(cell.records),
                CellKey::Learning(a, _) => {
                    if cell.learned.is_some() {
                        learned_weights = cell.learned;
                    }
                    cells[*a].push(cell.records);
                }
            },
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        if let Some(o) = out {
            let _ = write_manifest(o, plan, done, false);
        }
        return Err(e);
    }

    let dataset = assemble(plan, w0, before, cells, learned_weights, started)?;
    if let Some(o) = out {
        write_runs_csv(&o.join("runs.csv"), &dataset)?;
        write_scores_csv(&o.join("scores.csv"), &dataset.scores)?;
        write_json(&o.join("baseline.json"), &dataset.baseline)?;
        write_manifest(o, plan, done, true)?;
    }
    log::info!(
        "sweep finished: {} alphas x {} seeds in {:.1?}",
        plan.alphas.len(),
        plan.seeds,
        dataset.wall_time
    );
    Ok(dataset)
}

/// Rebuilds a finished sweep from its directory without running anything.
///
/// Metric settings (value convention, appropriateness rule, regime rule)
/// come from `rescore` when given, otherwise from the recorded plan.
pub fn load_sweep(dir: &Path, rescore: Option<&SweepPlan>) -> Result<SweepDataset> {
    let started = Instant::now();
    let mut plan = read_plan(dir)?;
    if let Some(r) = rescore {
        plan.value_convention = r.value_convention;
        plan.appropriateness = r.appropriateness;
        plan.regime_rule = r.regime_rule;
    }
    plan.validate()?;
    let cell_dir = dir.join("cells");
    let load = |key: &CellKey| {
        let path = cell_path(&cell_dir, key);
        if !path.exists() {
            return Err(Error::MissingInput(format!("cell {} ({})", key.name(), path.display())));
        }
        read_cell(&path, plan.network.n)
    };
    let before = (0..plan.seeds)
        .map(|s| load(&CellKey::Before(s)))
        .collect::<Result<Vec<_>>>()?;
    let cells = (0..plan.alphas.len())
        .map(|a| (0..plan.seeds).map(|s| load(&CellKey::Learning(a, s))).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let learned = match plan.keep_learned {
        Some(_) if learned_path(&cell_dir).exists() => Some(read_weights_csv(&learned_path(&cell_dir))?),
        _ => None,
    };
    let w0 = modular_from_spec(&plan.network)?;
    assemble(&plan, w0, before, cells, learned, started)
}

fn assemble(
    plan: &SweepPlan,
    w0: WeightMatrix,
    before: Vec<Vec<SoRunRecord>>,
    cells: Vec<Vec<Vec<SoRunRecord>>>,
    learned_weights: Option<WeightMatrix>,
    started: Instant,
) -> Result<SweepDataset> {
    let bl_energies: Vec<f64> = before.iter().flatten().map(|r| r.energy).collect();
    let baseline = fit_baseline(&bl_energies)?;
    let mut baseline_p = [0.0; 3];
    for (i, p) in baseline_p.iter_mut().enumerate() {
        *p = above_chance(&bl_energies, &baseline, (i + 1) as f64 * baseline.sigma)?;
    }
    let scores = plan
        .alphas
        .iter()
        .zip(&cells)
        .map(|(&alpha, row)| score_alpha(plan, alpha, &before, row, &baseline))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepDataset {
        plan: plan.clone(),
        initial_weights: w0,
        learned_weights,
        baseline,
        baseline_p,
        before,
        cells,
        scores,
        wall_time: started.elapsed(),
    })
}

fn cell_path(dir: &Path, key: &CellKey) -> PathBuf {
    dir.join(format!("{}.csv", key.name()))
}

fn learned_path(dir: &Path) -> PathBuf {
    dir.join("learned.csv")
}

fn run_cell(plan: &SweepPlan, w0: &WeightMatrix, key: &CellKey, dir: Option<&Path>) -> Result<CellOutput> {
    let keep = matches!(key, CellKey::Learning(a, 0) if plan.keep_learned == Some(*a));
    if let Some(dir) = dir {
        let path = cell_path(dir, key);
        if path.exists() && (!keep || learned_path(dir).exists()) {
            let records = read_cell(&path, plan.network.n)?;
            let learned = if keep {
                Some(read_weights_csv(&learned_path(dir))?)
            } else {
                None
            };
            return Ok(CellOutput { records, learned });
        }
    }
    let result = match *key {
        CellKey::Before(s) => run_so_with(
            w0,
            &plan.so_config(0.0, vec![Stage::BeforeLearning]),
            plan.master_seed,
            Engine::Fast,
            |stage| derive_seed(plan.master_seed, SHARED_ALPHA, s as u64, stage),
        )?,
        CellKey::Learning(a, s) => run_so_with(
            w0,
            &plan.so_config(plan.alphas[a], vec![Stage::Learning, Stage::AfterLearning]),
            plan.master_seed,
            Engine::Fast,
            |stage| derive_seed(plan.master_seed, a as u64, s as u64, stage),
        )?,
    };
    let learned = keep.then_some(result.learned);
    if let Some(dir) = dir {
        if let Some(w) = &learned {
            write_weights_csv(&learned_path(dir), w)?;
        }
        write_cell(&cell_path(dir, key), &result.records)?;
    }
    Ok(CellOutput {
        records: result.records,
        learned,
    })
}

fn score_alpha(
    plan: &SweepPlan,
    alpha: f64,
    before: &[Vec<SoRunRecord>],
    row: &[Vec<SoRunRecord>],
    fit: &BaselineFit,
) -> Result<CreativityScores> {
    let per_seed: Vec<Vec<f64>> = row
        .iter()
        .map(|recs| {
            recs.iter()
                .filter(|r| r.stage == Stage::AfterLearning)
                .map(|r| r.energy)
                .collect()
        })
        .collect();
    let pooled: Vec<f64> = per_seed.iter().flatten().copied().collect();
    let (novelty, value) = aggregate_scores(&pooled, fit, plan.value_convention)?;
    let conv = convergence_score(&per_seed, fit)?;
    let appropriateness = match plan.appropriateness {
        AppropriatenessRule::ValueTimesConvergence => appropriateness_score(value, conv.score),
        AppropriatenessRule::NoveltyTimesConvergence => appropriateness_score(novelty, conv.score),
    };
    let mut seed_regimes = Vec::with_capacity(row.len());
    for ((recs, bl), energies) in row.iter().zip(before).zip(&per_seed) {
        let bl_set = attractor_set(bl, Stage::BeforeLearning);
        let dominant = dominant_attractor(recs, Stage::AfterLearning);
        let (mean, sd) = mean_and_sd(energies);
        let evidence = RegimeEvidence {
            convergence: (1.0 - sd / fit.sigma).clamp(0.0, 1.0),
            mean_al_energy: mean,
            dominant: dominant.as_ref().map(|(fp, share)| (fp, *share)),
            bl_attractors: &bl_set,
        };
        seed_regimes.push(classify_regime(&evidence, fit, &plan.regime_rule));
    }
    let regime = majority(&seed_regimes);
    let p = |k: f64| above_chance(&pooled, fit, k * fit.sigma);
    Ok(CreativityScores {
        alpha,
        novelty,
        value,
        convergence: conv.score,
        sigma_al: conv.sigma_al,
        appropriateness,
        p_1sigma: p(1.0)?,
        p_2sigma: p(2.0)?,
        p_3sigma: p(3.0)?,
        mean_al_energy: mean_and_sd(&pooled).0,
        regime,
        seed_regimes,
    })
}

fn majority(labels: &[Regime]) -> Regime {
    let order = [
        Regime::NotNovelNotAppropriate,
        Regime::NovelAndAppropriate,
        Regime::AppropriateNotNovel,
        Regime::NovelNotAppropriate,
    ];
    let mut best = order[0];
    let mut best_count = 0;
    for r in order {
        let c = labels.iter().filter(|&&l| l == r).count();
        if c > best_count {
            best = r;
            best_count = c;
        }
    }
    best
}

/// Outcome of a long single-seed run at a small learning rate.
#[derive(Debug, Clone)]
pub struct EffortReport {
    pub alpha: f64,
    pub resets: usize,
    pub baseline: BaselineFit,
    pub convergence: f64,
    pub mean_al_energy: f64,
    /// `c ≥ min_convergence` and the AL mean is below `μ_BL`.
    pub converged_below_mean: bool,
    pub result: SoResult,
}

/// Runs the three stages once with `resets` per stage and reports whether
/// learning settled below the BL mean.
pub fn effort_tradeoff(
    w0: &WeightMatrix,
    alpha: f64,
    steps: usize,
    resets: usize,
    master_seed: u64,
    rule: &RegimeRule,
) -> Result<EffortReport> {
    if !(alpha > 0.0) {
        return Err(Error::config("effort trade-off needs alpha > 0"));
    }
    let config = SoConfig::three_stage(alpha, steps, resets);
    let result = run_so_with(w0, &config, master_seed, Engine::Fast, |stage| {
        derive_seed(master_seed, 0, 0, stage)
    })?;
    let baseline = fit_baseline(&result.stage_energies(Stage::BeforeLearning))?;
    let al = result.stage_energies(Stage::AfterLearning);
    let conv = convergence_score(&[&al[..]], &baseline)?;
    let mean_al_energy = mean_and_sd(&al).0;
    Ok(EffortReport {
        alpha,
        resets,
        baseline,
        convergence: conv.score,
        mean_al_energy,
        converged_below_mean: conv.score >= rule.min_convergence && mean_al_energy < baseline.mu,
        result,
    })
}

/// Writes the files for `artifact` into `dir` and returns their paths.
pub fn export(dataset: &SweepDataset, artifact: Artifact, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match artifact {
        Artifact::EnergyScatter => {
            let mut paths = Vec::new();
            for a in 0..dataset.plan.alphas.len() {
                let run = dataset
                    .run(a, 0)
                    .ok_or_else(|| Error::MissingInput(format!("records for alpha index {a}, seed 0")))?;
                let path = dir.join(format!("energy_scatter_a{a:03}.csv"));
                write_energy_scatter(&path, run.into_iter())?;
                paths.push(path);
            }
            Ok(paths)
        }
        Artifact::Distributions => {
            let path = dir.join("distributions.csv");
            write_distributions(&path, dataset)?;
            Ok(vec![path])
        }
        Artifact::ScoresCurve => {
            let scores = dir.join("scores.csv");
            let baseline = dir.join("baseline.json");
            write_scores_csv(&scores, &dataset.scores)?;
            write_json(&baseline, &dataset.baseline)?;
            Ok(vec![scores, baseline])
        }
        Artifact::Pareto => {
            let path = dir.join("pareto.csv");
            write_pareto(&path, &dataset.baseline, &dataset.scores, dataset.plan.value_convention)?;
            Ok(vec![path])
        }
        Artifact::WeightsHeatmap => {
            let learned = dataset.learned_weights.as_ref().ok_or_else(|| {
                Error::MissingInput("learned weights (rerun the sweep with keep_learned set)".into())
            })?;
            write_weight_pair(dir, &dataset.initial_weights, learned)
        }
    }
}

/// `weights_initial.csv` and `weights_learned.csv`.
pub fn write_weight_pair(dir: &Path, initial: &WeightMatrix, learned: &WeightMatrix) -> Result<Vec<PathBuf>> {
    let a = dir.join("weights_initial.csv");
    let b = dir.join("weights_learned.csv");
    write_weights_csv(&a, initial)?;
    write_weights_csv(&b, learned)?;
    Ok(vec![a, b])
}

fn atomic_write(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    atomic_write(path, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(header).map_err(|e| Error::csv(path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, |buf| {
        serde_json::to_writer_pretty(&mut *buf, value).map_err(|e| Error::json(path, e))?;
        buf.push(b'\n');
        Ok(())
    })
}

fn write_manifest(dir: &Path, plan: &SweepPlan, cells: BTreeMap<String, bool>, complete: bool) -> Result<()> {
    let manifest = Manifest {
        plan: plan.clone(),
        master_seed: plan.master_seed,
        code_version: CODE_VERSION.to_string(),
        complete,
        cells,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

/// The plan recorded in a sweep directory's `manifest.json`.
pub fn read_plan(dir: &Path) -> Result<SweepPlan> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    Ok(manifest.plan)
}

fn write_cell(path: &Path, records: &[SoRunRecord]) -> Result<()> {
    csv_rows(
        path,
        &["stage", "reset", "final_energy", "fixed_point", "fingerprint"],
        records.iter().map(|r| {
            vec![
                r.stage.to_string(),
                r.reset.to_string(),
                r.energy.to_string(),
                u8::from(r.fixed_point).to_string(),
                r.fingerprint.to_string(),
            ]
        }),
    )
}

fn read_cell(path: &Path, n: usize) -> Result<Vec<SoRunRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let bad = |what: &str| Error::config(format!("{}: bad {what}", path.display()));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.len() != 5 {
            return Err(bad("row width"));
        }
        out.push(SoRunRecord {
            stage: row[0].parse()?,
            reset: row[1].parse().map_err(|_| bad("reset"))?,
            energy: row[2].parse().map_err(|_| bad("energy"))?,
            fixed_point: match &row[3] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("fixed_point")),
            },
            fingerprint: Fingerprint::from_hex(n, &row[4])?,
            state: None,
        });
    }
    Ok(out)
}

/// `runs.csv`: every final energy. BL rows carry `alpha = 0`.
pub fn write_runs_csv(path: &Path, dataset: &SweepDataset) -> Result<()> {
    let rows = dataset.samples().zip(
        dataset
            .before
            .iter()
            .flatten()
            .chain(dataset.cells.iter().flatten().flatten()),
    );
    csv_rows(
        path,
        &["stage", "alpha", "seed", "reset", "final_energy", "fixed_point"],
        rows.map(|(s, r)| {
            vec![
                s.stage.to_string(),
                s.alpha.to_string(),
                s.seed.to_string(),
                s.reset.to_string(),
                s.energy.to_string(),
                u8::from(r.fixed_point).to_string(),
            ]
        }),
    )
}

/// Records of a single SO run in the `runs.csv` schema.
pub fn write_result_csv(path: &Path, result: &SoResult) -> Result<()> {
    csv_rows(
        path,
        &["stage", "alpha", "seed", "reset", "final_energy", "fixed_point"],
        result.records.iter().map(|r| {
            vec![
                r.stage.to_string(),
                result.config.alpha.to_string(),
                result.seed.to_string(),
                r.reset.to_string(),
                r.energy.to_string(),
                u8::from(r.fixed_point).to_string(),
            ]
        }),
    )
}

/// `stage,reset,energy` with resets numbered consecutively across stages.
pub fn write_energy_scatter<'r>(path: &Path, records: impl Iterator<Item = &'r SoRunRecord>) -> Result<()> {
    csv_rows(
        path,
        &["stage", "reset", "energy"],
        records
            .enumerate()
            .map(|(i, r)| vec![r.stage.to_string(), i.to_string(), r.energy.to_string()]),
    )
}

pub fn write_scores_csv(path: &Path, scores: &[CreativityScores]) -> Result<()> {
    csv_rows(
        path,
        &[
            "alpha",
            "novelty",
            "value",
            "convergence",
            "appropriateness",
            "p_1sigma",
            "p_2sigma",
            "p_3sigma",
            "regime",
        ],
        scores.iter().map(|s| {
            vec![
                s.alpha.to_string(),
                s.novelty.to_string(),
                s.value.to_string(),
                s.convergence.to_string(),
                s.appropriateness.to_string(),
                s.p_1sigma.to_string(),
                s.p_2sigma.to_string(),
                s.p_3sigma.to_string(),
                s.regime.to_string(),
            ]
        }),
    )
}

/// Histogram rows `stage,alpha,bin_lo,bin_hi,count`: pooled BL first, then AL
/// per learning rate. Bins are a quarter of `σ_BL` wide.
fn write_distributions(path: &Path, dataset: &SweepDataset) -> Result<()> {
    let width = dataset.baseline.sigma / 4.0;
    let origin = dataset.baseline.mu;
    let bin = |e: f64| ((e - origin) / width).floor() as i64;
    let mut rows = Vec::new();
    let mut push = |stage: Stage, alpha: f64, energies: &mut dyn Iterator<Item = f64>| {
        let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
        for e in energies {
            *hist.entry(bin(e)).or_default() += 1;
        }
        for (b, count) in hist {
            let lo = origin + b as f64 * width;
            rows.push(vec![
                stage.to_string(),
                alpha.to_string(),
                lo.to_string(),
                (lo + width).to_string(),
                count.to_string(),
            ]);
        }
    };
    push(
        Stage::BeforeLearning,
        0.0,
        &mut dataset.before.iter().flatten().map(|r| r.energy),
    );
    for (&alpha, row) in dataset.plan.alphas.iter().zip(&dataset.cells) {
        push(
            Stage::AfterLearning,
            alpha,
            &mut row
                .iter()
                .flatten()
                .filter(|r| r.stage == Stage::AfterLearning)
                .map(|r| r.energy),
        );
    }
    csv_rows(path, &["stage", "alpha", "bin_lo", "bin_hi", "count"], rows)
}

/// Novelty against value: the BL curve is traced over energy
/// (`μ_BL ± 6σ_BL`, 241 points), the AL curve over the learning rates.
pub fn write_pareto(
    path: &Path,
    fit: &BaselineFit,
    scores: &[CreativityScores],
    convention: ValueConvention,
) -> Result<()> {
    let bl = (0..=240).map(|i| {
        let e = fit.mu - 6.0 * fit.sigma + fit.sigma * i as f64 / 20.0;
        vec![
            "BL".to_string(),
            e.to_string(),
            novelty_of_energy(e, fit).to_string(),
            value_of_energy_with(e, fit, convention).to_string(),
        ]
    });
    let al = scores
        .iter()
        .map(|s| vec!["AL".to_string(), s.alpha.to_string(), s.novelty.to_string(), s.value.to_string()]);
    csv_rows(path, &["curve", "parameter", "novelty", "value"], bl.chain(al))
}

/// `N` rows of `N` comma-separated reals, no header.
pub fn write_weights_csv(path: &Path, w: &WeightMatrix) -> Result<()> {
    atomic_write(path, |buf| {
        let mut w_csv = csv::WriterBuilder::new().has_headers(false).from_writer(buf);
        for i in 0..w.n() {
            w_csv
                .write_record(w.row(i).iter().map(|x| x.to_string()))
                .map_err(|e| Error::csv(path, e))?;
        }
        w_csv.flush().map_err(|e| Error::io(path, e))
    })
}

pub fn read_weights_csv(path: &Path) -> Result<WeightMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = rec
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    WeightMatrix::from_rows(&rows)
}
