//! Constructors for modular constraint matrices and Hebbian pattern storage.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::dynamics::relax;
use crate::network::{BiasVector, StateVector, WeightMatrix, WeightRole};
use crate::rng::RngStream;

/// Block-modular couplings: magnitude 1 inside a module of `k` nodes,
/// magnitude `p` between modules, random sign per unordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularSpec {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub seed: u64,
}

impl ModularSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::config("network and module size must be positive"));
        }
        if self.n % self.k != 0 {
            return Err(Error::config(format!(
                "module size k={} does not divide N={}",
                self.k, self.n
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config(format!("inter-module magnitude p={} not in (0,1)", self.p)));
        }
        Ok(())
    }

    pub fn modules(&self) -> usize {
        self.n / self.k
    }

    #[inline]
    pub fn same_module(&self, i: usize, j: usize) -> bool {
        i / self.k == j / self.k
    }
}

/// Signs are drawn for pairs `i < j` in row-major order.
pub fn modular_weights(spec: &ModularSpec, rng: &mut RngStream) -> Result<WeightMatrix> {
    spec.validate()?;
    let n = spec.n;
    let mut w = WeightMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mag = if spec.same_module(i, j) { 1.0 } else { spec.p };
            w.set_pair(i, j, f64::from(rng.spin()) * mag);
        }
    }
    Ok(w)
}

/// Convenience: modular weights keyed by the spec's own seed.
pub fn modular_from_spec(spec: &ModularSpec) -> Result<WeightMatrix> {
    modular_weights(spec, &mut RngStream::new(spec.seed))
}

/// A non-empty set of equal-length bipolar patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    patterns: Vec<StateVector>,
}

impl PatternSet {
    pub fn new(patterns: Vec<StateVector>) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::config("pattern set is empty"))?;
        for p in &patterns {
            check_dim("pattern", first.len(), p.len())?;
        }
        Ok(Self { patterns })
    }

    pub fn random(n: usize, m: usize, rng: &mut RngStream) -> Result<Self> {
        Self::new((0..m).map(|_| StateVector::random(n, rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn n(&self) -> usize {
        self.patterns[0].len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateVector> {
        self.patterns.iter()
    }
}

/// `w_ij = Σ_k z_k^i z_k^j` off the diagonal, zero on it.
pub fn hebbian_store(patterns: &PatternSet) -> WeightMatrix {
    let n = patterns.n();
    let mut counts = vec![0i64; n * n];
    for z in patterns.iter() {
        let z = z.as_slice();
        for i in 0..n {
            let zi = i64::from(z[i]);
            let row = &mut counts[i * n..(i + 1) * n];
            for (c, &zj) in row.iter_mut().zip(z) {
                *c += zi * i64::from(zj);
            }
        }
    }
    for i in 0..n {
        counts[i * n + i] = 0;
    }
    WeightMatrix::from_raw(n, counts.into_iter().map(|c| c as f64).collect(), WeightRole::Initial)
}

/// Outcome of repeated store-corrupt-relax trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub n: usize,
    pub patterns: usize,
    pub corrupt: f64,
    pub trials: usize,
    /// Trials whose relaxed probe equals the stored pattern exactly.
    pub exact: usize,
}

impl RecallReport {
    pub fn rate(&self) -> f64 {
        self.exact as f64 / self.trials as f64
    }
}

/// Each trial stores `m` fresh random patterns, flips `round(corrupt·n)`
/// distinct nodes of one of them and relaxes for `steps` updates.
pub fn recall_rate(n: usize, m: usize, corrupt: f64, trials: usize, steps: usize, rng: &mut RngStream) -> Result<RecallReport> {
    if !(0.0..=1.0).contains(&corrupt) {
        return Err(Error::config(format!("corruption fraction {corrupt} outside [0, 1]")));
    }
    if trials == 0 {
        return Err(Error::config("need at least one recall trial"));
    }
    let flips = (corrupt * n as f64).round() as usize;
    let bias = BiasVector::zeros(n);
    let mut exact = 0;
    for _ in 0..trials {
        let set = PatternSet::random(n, m, rng)?;
        let w = hebbian_store(&set);
        let target = &set.patterns[rng.node(m)];
        let mut probe = target.clone();
        let mut nodes: Vec<usize> = (0..n).collect();
        for k in 0..flips {
            let pick = k + rng.node(n - k);
            nodes.swap(k, pick);
            probe.flip(nodes[k]);
        }
        let out = relax(probe, &w, &bias, steps, rng, false)?;
        if &out.state == target {
            exact += 1;
        }
    }
    Ok(RecallReport {
        n,
        patterns: m,
        corrupt,
        trials,
        exact,
    })
}
