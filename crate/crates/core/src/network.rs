//! Core value types: bipolar states, symmetric coupling matrices, biases.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;

/// A bipolar network configuration. Every entry is `-1` or `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVector(Vec<i8>);

impl StateVector {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("state vector must be non-empty"));
        }
        if let Some(pos) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::config(format!(
                "state entry {pos} is {}, expected -1 or +1",
                values[pos]
            )));
        }
        Ok(Self(values))
    }

    pub fn filled(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        Self(vec![value; n])
    }

    /// Uniform random state, one draw per node in index order.
    pub fn random(n: usize, rng: &mut RngStream) -> Self {
        Self((0..n).map(|_| rng.spin()).collect())
    }

    /// Maps a binary `{0,1}` vector through `s = 2q - 1`.
    pub fn from_binary(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(-1),
                1 => Ok(1),
                other => Err(Error::config(format!("binary entry {other} not in {{0,1}}"))),
            })
            .collect::<Result<Vec<_>>>()
            .and_then(Self::new)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.0.iter().map(|&s| u8::from(s > 0)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [i8] {
        &mut self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&s| -s).collect())
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Canonical representative of `{s, -s}`: the lexicographically smaller
    /// one, i.e. the one starting with `-1`.
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(&self.0)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Packed attractor identity, invariant under global sign flip.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    len: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub(crate) fn of(values: &[i8]) -> Self {
        let flip = values.first().is_some_and(|&v| v > 0);
        let mut words = vec![0u64; values.len().div_ceil(64)];
        for (i, &v) in values.iter().enumerate() {
            if (v > 0) != flip {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            len: values.len(),
            words,
        }
    }

    /// Parses the hex form written by `Display` for a state of `len` nodes.
    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let words = len.div_ceil(64);
        if hex.len() != 16 * words || len == 0 {
            return Err(Error::config(format!("fingerprint {hex:?} does not fit {len} nodes")));
        }
        let words = (0..words)
            .map(|w| u64::from_str_radix(&hex[16 * w..16 * (w + 1)], 16))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(format!("fingerprint {hex:?}: {e}")))?;
        let fp = Self { len, words };
        if fp.state().fingerprint() != fp {
            return Err(Error::config(format!("fingerprint {hex:?} is not canonical")));
        }
        Ok(fp)
    }

    /// The canonical state (first entry `-1`).
    pub fn state(&self) -> StateVector {
        StateVector(
            (0..self.len)
                .map(|i| if self.words[i / 64] >> (i % 64) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.words {
            write!(f, "{w:016x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRole {
    /// The problem definition, W₀.
    Initial,
    /// The result of Hebbian accumulation, W_L.
    Learned,
}

/// Symmetric, zero-diagonal `n × n` couplings stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
    role: WeightRole,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
            role: WeightRole::Initial,
        }
    }

    /// Validates symmetry and the zero diagonal exactly.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("weight data", n * n, data.len())?;
        if n == 0 {
            return Err(Error::config("weight matrix must be non-empty"));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::config(format!("diagonal entry {i} is non-zero")));
            }
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if a != b {
                    return Err(Error::config(format!(
                        "asymmetric entries ({i},{j})={a} vs ({j},{i})={b}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::config(format!("entry ({i},{j}) is not finite")));
                }
            }
        }
        Ok(Self {
            n,
            data,
            role: WeightRole::Initial,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            check_dim("weight row", n, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub(crate) fn from_raw(n: usize, data: Vec<f64>, role: WeightRole) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data, role }
    }

    pub fn with_role(mut self, role: WeightRole) -> Self {
        self.role = role;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn role(&self) -> WeightRole {
        self.role
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `w_ij` and `w_ji` together. Diagonal writes are rejected.
    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "diagonal must stay zero");
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| ((i + 1)..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i) == 0.0)
    }
}

/// External inputs `I_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0.0)
    }
}
