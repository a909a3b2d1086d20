//! Deterministic bipolar Hopfield dynamics.
//!
//! The threshold maps a zero local field to `+1`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::network::{BiasVector, StateVector, WeightMatrix};
use crate::rng::RngStream;

fn check(state: &StateVector, weights: &WeightMatrix, bias: &BiasVector) -> Result<()> {
    check_dim("state", weights.n(), state.len())?;
    check_dim("bias", weights.n(), bias.len())
}

/// How the node updated at each asynchronous step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    /// Every block of `N` consecutive steps visits each node once, in a
    /// fresh uniformly random order (Fisher–Yates, `N-1` draws per block).
    #[default]
    Sweep,
    /// Independent uniform draws with replacement, one per step.
    Uniform,
}

/// Stream of node indices for one relaxation.
#[derive(Debug, Clone)]
pub struct NodeSchedule {
    order: NodeOrder,
    n: usize,
    perm: Vec<usize>,
    pos: usize,
}

impl NodeSchedule {
    pub fn new(order: NodeOrder, n: usize) -> Self {
        Self {
            order,
            n,
            perm: (0..n).collect(),
            pos: n,
        }
    }

    /// Starts a new relaxation: the next sweep is drawn afresh.
    pub fn restart(&mut self) {
        self.pos = self.n;
    }

    #[inline]
    pub fn next(&mut self, rng: &mut RngStream) -> usize {
        match self.order {
            NodeOrder::Uniform => rng.node(self.n),
            NodeOrder::Sweep => {
                if self.pos == self.n {
                    for k in (1..self.n).rev() {
                        let j = rng.node(k + 1);
                        self.perm.swap(k, j);
                    }
                    self.pos = 0;
                }
                let i = self.perm[self.pos];
                self.pos += 1;
                i
            }
        }
    }
}

#[inline]
pub(crate) fn threshold(field: f64) -> i8 {
    if field >= 0.0 {
        1
    } else {
        -1
    }
}

#[inline]
pub(crate) fn field_unchecked(row: &[f64], state: &[i8], bias: f64) -> f64 {
    row.iter()
        .zip(state)
        .map(|(&w, &s)| w * f64::from(s))
        .sum::<f64>()
        + bias
}

/// `Σ_j w_ij s_j + I_i`.
pub fn local_field(
    state: &StateVector,
    weights: &WeightMatrix,
    bias: &BiasVector,
    i: usize,
) -> Result<f64> {
    check(state, weights, bias)?;
    if i >= weights.n() {
        return Err(Error::config(format!(
            "node index {i} out of range for N={}",
            weights.n()
        )));
    }
    Ok(field_unchecked(
        weights.row(i),
        state.as_slice(),
        bias.as_slice()[i],
    ))
}

/// Updates node `i` in place. Returns whether it changed sign.
pub fn async_step(
    state: &mut StateVector,
    weights: &WeightMatrix,
    bias: &BiasVector,
    i: usize,
) -> Result<bool> {
    let h = local_field(state, weights, bias, i)?;
    let new = threshold(h);
    let flipped = new != state.get(i);
    state.as_mut_slice()[i] = new;
    Ok(flipped)
}

pub(crate) fn energy_unchecked(state: &[i8], weights: &WeightMatrix, bias: &[f64]) -> f64 {
    let n = weights.n();
    let mut quad = 0.0;
    for i in 0..n {
        let row = weights.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * f64::from(state[j]);
        }
        quad += f64::from(state[i]) * acc;
    }
    let lin: f64 = state.iter().zip(bias).map(|(&s, &b)| f64::from(s) * b).sum();
    -0.5 * quad - lin
}

/// `E = -½ Σ_i Σ_j w_ij s_i s_j - Σ_i s_i I_i`.
pub fn energy(state: &StateVector, weights: &WeightMatrix, bias: &BiasVector) -> Result<f64> {
    check(state, weights, bias)?;
    Ok(energy_unchecked(state.as_slice(), weights, bias.as_slice()))
}

/// True iff no single asynchronous update would change the state.
pub fn is_fixed_point(state: &StateVector, weights: &WeightMatrix, bias: &BiasVector) -> Result<bool> {
    check(state, weights, bias)?;
    let s = state.as_slice();
    let b = bias.as_slice();
    Ok((0..weights.n()).all(|i| threshold(field_unchecked(weights.row(i), s, b[i])) == s[i]))
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub state: StateVector,
    /// Energy after each step, when requested.
    pub trace: Option<Vec<f64>>,
    pub flips: usize,
}

/// Runs exactly `steps` asynchronous updates with the default node order.
pub fn relax(
    state: StateVector,
    weights: &WeightMatrix,
    bias: &BiasVector,
    steps: usize,
    rng: &mut RngStream,
    record_trace: bool,
) -> Result<Relaxation> {
    relax_with(state, weights, bias, steps, NodeOrder::default(), rng, record_trace)
}

pub fn relax_with(
    mut state: StateVector,
    weights: &WeightMatrix,
    bias: &BiasVector,
    steps: usize,
    order: NodeOrder,
    rng: &mut RngStream,
    record_trace: bool,
) -> Result<Relaxation> {
    check(&state, weights, bias)?;
    if steps == 0 {
        return Err(Error::config("relaxation needs at least one step"));
    }
    let n = weights.n();
    let b = bias.as_slice();
    let mut trace = record_trace.then(|| Vec::with_capacity(steps));
    let mut e = if record_trace {
        energy_unchecked(state.as_slice(), weights, b)
    } else {
        0.0
    };
    let mut flips = 0;
    let mut schedule = NodeSchedule::new(order, n);
    for _ in 0..steps {
        let i = schedule.next(rng);
        let s = state.as_mut_slice();
        let h = field_unchecked(weights.row(i), s, b[i]);
        let new = threshold(h);
        if new != s[i] {
            flips += 1;
            s[i] = new;
            if record_trace {
                e = energy_unchecked(s, weights, b);
            }
        }
        if let Some(t) = trace.as_mut() {
            t.push(e);
        }
    }
    Ok(Relaxation {
        state,
        trace,
        flips,
    })
}
