//! Self-optimization: repeated random resets and relaxation under learned
//! weights `W_L`, Hebbian accumulation after every step during the learning
//! stage, and energy bookkeeping against the frozen problem matrix `W₀`.
//!
//! Two engines produce identical records:
//!
//! * [`Engine::Reference`] recomputes every local field by direct summation
//!   and applies each increment elementwise (`O(N²)` per learning step).
//! * [`Engine::Fast`] keeps all local fields up to date incrementally and
//!   defers the increments. Between two flips the state is constant, so the
//!   increments are identical rank-1 terms and only their count is stored.
//!   Within a reset the closed segments form a chain of states differing by
//!   single flips, which makes any column of their accumulated outer products
//!   computable in `O(N + segments)`; they are folded into the count matrix
//!   once, at the end of the reset.
//!
//! Local fields of `W₀` are accumulated in scaled 128-bit integers whenever
//! the entries of `W₀` admit an exact common binary scale (always true for
//! the modular and Hebbian constructors), so both engines see the same,
//! correctly rounded field regardless of summation order and a field of
//! exactly zero maps to `+1` as it should.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{energy_unchecked, field_unchecked, threshold, NodeOrder, NodeSchedule};
use crate::error::{Error, Result};
use crate::hebbian::HebbianCounts;
use crate::network::{Fingerprint, StateVector, WeightMatrix};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "BL")]
    BeforeLearning,
    #[serde(rename = "L")]
    Learning,
    #[serde(rename = "AL")]
    AfterLearning,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::BeforeLearning, Stage::Learning, Stage::AfterLearning];

    /// Stable numeric code used for stream derivation.
    pub fn code(self) -> u64 {
        match self {
            Stage::BeforeLearning => 0,
            Stage::Learning => 1,
            Stage::AfterLearning => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stage::BeforeLearning => "BL",
            Stage::Learning => "L",
            Stage::AfterLearning => "AL",
        }
    }

    pub fn learns(self) -> bool {
        self == Stage::Learning
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BL" => Ok(Stage::BeforeLearning),
            "L" => Ok(Stage::Learning),
            "AL" => Ok(Stage::AfterLearning),
            other => Err(Error::config(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoConfig {
    pub alpha: f64,
    pub steps_per_reset: usize,
    pub resets_per_stage: usize,
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub record_states: bool,
    #[serde(default)]
    pub node_order: NodeOrder,
}

impl SoConfig {
    /// The standard before / during / after learning protocol.
    pub fn three_stage(alpha: f64, steps_per_reset: usize, resets_per_stage: usize) -> Self {
        Self {
            alpha,
            steps_per_reset,
            resets_per_stage,
            stages: Stage::ALL.to_vec(),
            record_states: false,
            node_order: NodeOrder::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be finite and non-negative",
                self.alpha
            )));
        }
        if self.steps_per_reset == 0 || self.resets_per_stage == 0 {
            return Err(Error::config("steps per reset and resets per stage must be at least 1"));
        }
        if self.stages.is_empty() {
            return Err(Error::config("at least one stage is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoRunRecord {
    pub stage: Stage,
    /// Index within the stage, from 0.
    pub reset: usize,
    /// Final energy under `W₀`.
    pub energy: f64,
    /// Whether the final state is stable under the weights driving the dynamics.
    pub fixed_point: bool,
    pub fingerprint: Fingerprint,
    #[serde(skip)]
    pub state: Option<StateVector>,
}

#[derive(Debug, Clone)]
pub struct SoResult {
    pub records: Vec<SoRunRecord>,
    pub learned: WeightMatrix,
    pub config: SoConfig,
    pub seed: u64,
}

impl SoResult {
    pub fn stage_records(&self, stage: Stage) -> impl Iterator<Item = &SoRunRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn stage_energies(&self, stage: Stage) -> Vec<f64> {
        self.stage_records(stage).map(|r| r.energy).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Fast,
    Reference,
}

/// Runs the full protocol with one stream per stage, derived from `seed`.
pub fn run_so(w0: &WeightMatrix, config: &SoConfig, seed: u64) -> Result<SoResult> {
    run_so_with(w0, config, seed, Engine::Fast, |stage| {
        RngStream::derive(seed, 0, 0, stage.code())
    })
}

/// Like [`run_so`] with an explicit engine and stream source.
pub fn run_so_with(
    w0: &WeightMatrix,
    config: &SoConfig,
    seed: u64,
    engine: Engine,
    mut stream_for: impl FnMut(Stage) -> RngStream,
) -> Result<SoResult> {
    config.validate()?;
    if !w0.has_zero_diagonal() || !w0.is_symmetric() {
        return Err(Error::config("W0 must be symmetric with a zero diagonal"));
    }
    let n = w0.n();
    let mut counts = HebbianCounts::new(n);
    let mut records = Vec::with_capacity(config.stages.len() * config.resets_per_stage);
    match engine {
        Engine::Fast => {
            let mut eng = FastEngine::new(w0, config.alpha, &mut counts);
            for &stage in &config.stages {
                let mut rng = stream_for(stage);
                for reset in 0..config.resets_per_stage {
                    records.push(eng.reset(stage, reset, config, &mut rng));
                }
            }
        }
        Engine::Reference => {
            let mode = ProblemField::for_matrix(w0);
            for &stage in &config.stages {
                let mut rng = stream_for(stage);
                for reset in 0..config.resets_per_stage {
                    records.push(reference_reset(w0, mode, config, &mut counts, stage, reset, &mut rng));
                }
            }
        }
    }
    Ok(SoResult {
        records,
        learned: counts.into_weights(w0, config.alpha),
        config: config.clone(),
        seed,
    })
}

fn make_record(
    stage: Stage,
    reset: usize,
    state: &[i8],
    w0: &WeightMatrix,
    fixed_point: bool,
    keep: bool,
) -> SoRunRecord {
    SoRunRecord {
        stage,
        reset,
        energy: energy_unchecked(state, w0, &[]),
        fixed_point,
        fingerprint: Fingerprint::of(state),
        state: keep.then(|| StateVector::new(state.to_vec()).expect("bipolar")),
    }
}

/// How `W₀ s` is evaluated.
#[derive(Debug, Clone, Copy)]
enum ProblemField {
    /// Entries are `w · 2^shift` integers below `2^62`; sums are exact in `i128`.
    Exact { scale: f64, inv_scale: f64 },
    /// Plain floating-point summation in index order.
    Direct,
}

impl ProblemField {
    fn for_matrix(w: &WeightMatrix) -> Self {
        let n = w.n().max(2);
        let headroom = 126 - (usize::BITS - (n - 1).leading_zeros()) as i32 - 2;
        let mut min_exp = i32::MAX;
        let mut max_top = i32::MIN;
        for &x in w.as_slice() {
            if x == 0.0 {
                continue;
            }
            if !x.is_normal() {
                return ProblemField::Direct;
            }
            let bits = x.to_bits();
            let mant = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
            let exp = ((bits >> 52) & 0x7ff) as i32 - 1075;
            let tz = mant.trailing_zeros() as i32;
            min_exp = min_exp.min(exp + tz);
            max_top = max_top.max(exp + 53);
        }
        if min_exp == i32::MAX {
            return ProblemField::Exact { scale: 1.0, inv_scale: 1.0 };
        }
        let shift = -min_exp;
        let top = max_top + shift;
        if top > 62 || top > headroom || !(-1000..=1000).contains(&shift) {
            return ProblemField::Direct;
        }
        ProblemField::Exact {
            scale: 2f64.powi(shift),
            inv_scale: 2f64.powi(-shift),
        }
    }

    #[inline]
    fn fixed(scale: f64, w: f64) -> i128 {
        i128::from((w * scale) as i64)
    }

    fn row_sum(self, row: &[f64], s: &[i8]) -> ProblemSum {
        match self {
            ProblemField::Exact { scale, .. } => ProblemSum::Exact(
                row.iter()
                    .zip(s)
                    .map(|(&w, &sj)| Self::fixed(scale, w) * i128::from(sj))
                    .sum(),
            ),
            ProblemField::Direct => ProblemSum::Direct(field_unchecked(row, s, 0.0)),
        }
    }

    #[inline]
    fn value(self, sum: ProblemSum) -> f64 {
        match (self, sum) {
            (ProblemField::Exact { inv_scale, .. }, ProblemSum::Exact(v)) => v as f64 * inv_scale,
            (_, ProblemSum::Direct(v)) => v,
            _ => unreachable!("field mode mismatch"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ProblemSum {
    Exact(i128),
    Direct(f64),
}

fn learned_field(
    w0: &WeightMatrix,
    mode: ProblemField,
    counts: &HebbianCounts,
    alpha: f64,
    s: &[i8],
    i: usize,
) -> f64 {
    let h: i64 = counts.row(i).iter().zip(s).map(|(&c, &sj)| c * i64::from(sj)).sum();
    mode.value(mode.row_sum(w0.row(i), s)) + alpha * h as f64
}

fn reference_reset(
    w0: &WeightMatrix,
    mode: ProblemField,
    config: &SoConfig,
    counts: &mut HebbianCounts,
    stage: Stage,
    reset: usize,
    rng: &mut RngStream,
) -> SoRunRecord {
    let n = w0.n();
    let alpha = config.alpha;
    let mut s: Vec<i8> = (0..n).map(|_| rng.spin()).collect();
    let mut schedule = NodeSchedule::new(config.node_order, n);
    for _ in 0..config.steps_per_reset {
        let i = schedule.next(rng);
        s[i] = threshold(learned_field(w0, mode, counts, alpha, &s, i));
        if stage.learns() {
            counts.add_outer(&s);
        }
    }
    let fixed = (0..n).all(|i| threshold(learned_field(w0, mode, counts, alpha, &s, i)) == s[i]);
    make_record(stage, reset, &s, w0, fixed, config.record_states)
}

struct FastEngine<'a> {
    n: usize,
    w0: &'a WeightMatrix,
    alpha: f64,
    mode: ProblemField,
    counts: &'a mut HebbianCounts,
    counts_zero: bool,
    s: Vec<i8>,
    /// `W₀ s`, exact when `mode` allows it
    f0: Vec<ProblemSum>,
    /// `H s` for the counts at the start of the reset
    hs: Vec<i64>,
    /// `P s` for the closed segments of the current reset
    ps: Vec<i64>,
    x0: Vec<i8>,
    segments: Vec<i64>,
    /// `(node, new value)` ending each closed segment
    flips: Vec<(usize, i8)>,
    pending: i64,
    col: Vec<i64>,
    suffix: Vec<i64>,
}

impl<'a> FastEngine<'a> {
    fn new(w0: &'a WeightMatrix, alpha: f64, counts: &'a mut HebbianCounts) -> Self {
        let n = w0.n();
        let counts_zero = counts.is_zero();
        Self {
            n,
            w0,
            alpha,
            mode: ProblemField::for_matrix(w0),
            counts,
            counts_zero,
            s: vec![0; n],
            f0: vec![ProblemSum::Direct(0.0); n],
            hs: vec![0; n],
            ps: vec![0; n],
            x0: vec![0; n],
            segments: Vec::new(),
            flips: Vec::new(),
            pending: 0,
            col: vec![0; n],
            suffix: Vec::new(),
        }
    }

    fn reset(&mut self, stage: Stage, reset: usize, config: &SoConfig, rng: &mut RngStream) -> SoRunRecord {
        let n = self.n;
        let learn = stage.learns();
        for v in self.s.iter_mut() {
            *v = rng.spin();
        }
        for i in 0..n {
            self.f0[i] = self.mode.row_sum(self.w0.row(i), &self.s);
        }
        if self.counts_zero {
            self.hs.fill(0);
        } else {
            for i in 0..n {
                self.hs[i] = self
                    .counts
                    .row(i)
                    .iter()
                    .zip(&self.s)
                    .map(|(&c, &sj)| c * i64::from(sj))
                    .sum();
            }
        }
        self.ps.fill(0);
        self.x0.copy_from_slice(&self.s);
        self.segments.clear();
        self.flips.clear();
        self.pending = 0;

        let diag = n as i64 - 1;
        let mut schedule = NodeSchedule::new(config.node_order, n);
        for _ in 0..config.steps_per_reset {
            let i = schedule.next(rng);
            let si = self.s[i];
            let learned = self.hs[i] + self.ps[i] + self.pending * diag * i64::from(si);
            let new = threshold(self.mode.value(self.f0[i]) + self.alpha * learned as f64);
            if new != si {
                self.flip(i, new, learn);
            }
            if learn {
                self.pending += 1;
            }
        }

        let fixed = (0..n).all(|i| {
            let learned = self.hs[i] + self.ps[i] + self.pending * diag * i64::from(self.s[i]);
            threshold(self.mode.value(self.f0[i]) + self.alpha * learned as f64) == self.s[i]
        });
        let record = make_record(stage, reset, &self.s, self.w0, fixed, config.record_states);
        if learn {
            self.segments.push(self.pending);
            self.pending = 0;
            self.fold_segments();
        }
        record
    }

    fn flip(&mut self, m: usize, new: i8, learn: bool) {
        let n = self.n;
        let delta = 2 * new;
        if learn {
            if self.pending != 0 {
                let c = self.pending * (n as i64 - 1);
                for (p, &sj) in self.ps.iter_mut().zip(&self.s) {
                    *p += c * i64::from(sj);
                }
            }
            self.segments.push(self.pending);
            self.flips.push((m, new));
            self.pending = 0;
            self.segment_column(m);
            let d = i64::from(delta);
            for (p, &c) in self.ps.iter_mut().zip(&self.col) {
                *p += d * c;
            }
        }
        match self.mode {
            ProblemField::Exact { scale, .. } => {
                let d = i128::from(delta);
                for (f, &w) in self.f0.iter_mut().zip(self.w0.row(m)) {
                    if let ProblemSum::Exact(v) = f {
                        *v += d * ProblemField::fixed(scale, w);
                    }
                }
            }
            ProblemField::Direct => {
                // incremental updates would drift from the reference; recompute
                self.s[m] = new;
                for i in 0..n {
                    self.f0[i] = ProblemSum::Direct(field_unchecked(self.w0.row(i), &self.s, 0.0));
                }
            }
        }
        if !self.counts_zero {
            let d = i64::from(delta);
            for (h, &c) in self.hs.iter_mut().zip(self.counts.row(m)) {
                *h += d * c;
            }
        }
        self.s[m] = new;
    }

    /// Column `m` of `Σ_k c_k (x_k x_kᵀ - I)` over the closed segments, into `self.col`.
    fn segment_column(&mut self, m: usize) {
        let k = self.segments.len();
        self.suffix.clear();
        self.suffix.resize(k, 0);
        // y_k = c_k · x_k[m]; suffix[j] = Σ_{k > j} y_k
        let mut val = i64::from(self.x0[m]);
        let mut ys = 0i64;
        for (idx, &c) in self.segments.iter().enumerate() {
            let y = c * val;
            self.suffix[idx] = y;
            ys += y;
            if let Some(&(node, _)) = self.flips.get(idx) {
                if node == m {
                    val = -val;
                }
            }
        }
        let mut acc = 0i64;
        for idx in (0..k).rev() {
            let y = self.suffix[idx];
            self.suffix[idx] = acc;
            acc += y;
        }
        for (c, &x) in self.col.iter_mut().zip(&self.x0) {
            *c = ys * i64::from(x);
        }
        for (j, &(node, new)) in self.flips.iter().enumerate() {
            self.col[node] += 2 * i64::from(new) * self.suffix[j];
        }
        self.col[m] = 0;
    }

    fn fold_segments(&mut self) {
        if self.segments.iter().all(|&c| c == 0) {
            return;
        }
        for m in 0..self.n {
            self.segment_column(m);
            for (h, &c) in self.counts.row_mut(m).iter_mut().zip(&self.col) {
                *h += c;
            }
        }
        self.counts_zero = false;
    }
}

/// Distinct flip-canonical fingerprints of the fixed-point finals of `stage`.
pub fn attractor_set<'r>(records: impl IntoIterator<Item = &'r SoRunRecord>, stage: Stage) -> BTreeSet<Fingerprint> {
    records
        .into_iter()
        .filter(|r| r.stage == stage && r.fixed_point)
        .map(|r| r.fingerprint.clone())
        .collect()
}

/// The most frequent final fingerprint of `stage` and its share of the stage's resets.
pub fn dominant_attractor<'r>(
    records: impl IntoIterator<Item = &'r SoRunRecord>,
    stage: Stage,
) -> Option<(Fingerprint, f64)> {
    let mut freq: BTreeMap<&Fingerprint, usize> = BTreeMap::new();
    let mut total = 0usize;
    for r in records.into_iter().filter(|r| r.stage == stage) {
        *freq.entry(&r.fingerprint).or_default() += 1;
        total += 1;
    }
    freq.into_iter()
        .max_by_key(|&(_, c)| c)
        .map(|(f, c)| (f.clone(), c as f64 / total as f64))
}
