//! Travelling-salesman energy encoding over `n²` nodes.
//!
//! Node `x·n + i` is "on" when city `x` is visited at tour position `i`
//! (rows are cities, columns are positions). The binary energy
//!
//! ```text
//! E(v) = A/2 ΣxΣiΣj≠i v_xi v_xj + B/2 ΣiΣxΣy≠x v_xi v_yi
//!      + C/2 (Σ v_xi - n)² + D/2 ΣxΣy≠xΣi d_xy v_xi (v_y,i+1 + v_y,i-1)
//! ```
//!
//! is collected into `½ vᵀQv + Lᵀv + c` (using `v² = v`) and then mapped to
//! bipolar form with `v = (s + 1)/2`, giving `W = -Q/4` and
//! `I = -(Q·1/4 + L/2)`. The Hopfield energy of the encoding differs from
//! `E(v)` by the constant [`TspEncoding::offset`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::dynamics::relax;
use crate::network::{BiasVector, StateVector, WeightMatrix, WeightRole};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TspCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TspCoefficients {
    /// Largest square side for which every valid tour is a fixed point.
    ///
    /// Switching one city off a valid tour costs `C/2` and saves
    /// `D·(d_prev + d_next)`, so distances must stay below `C/(4D)`.
    pub fn stable_side(&self) -> f64 {
        self.c / (4.0 * std::f64::consts::SQRT_2 * self.d)
    }
}

impl Default for TspCoefficients {
    fn default() -> Self {
        Self {
            a: 500.0,
            b: 500.0,
            c: 200.0,
            d: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    n: usize,
    distances: Vec<f64>,
    pub coefficients: TspCoefficients,
}

impl TspInstance {
    pub fn new(n: usize, distances: Vec<f64>, coefficients: TspCoefficients) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("need at least 2 cities, got {n}")));
        }
        check_dim("distance matrix", n * n, distances.len())?;
        for x in 0..n {
            if distances[x * n + x] != 0.0 {
                return Err(Error::config(format!("d[{x}][{x}] must be zero")));
            }
            for y in (x + 1)..n {
                let d = distances[x * n + y];
                if d != distances[y * n + x] || !(d >= 0.0) || !d.is_finite() {
                    return Err(Error::config(format!(
                        "d[{x}][{y}] must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            distances,
            coefficients,
        })
    }

    /// Cities placed uniformly in a square of the given side, Euclidean distances.
    pub fn random_euclidean(n: usize, side: f64, coefficients: TspCoefficients, rng: &mut RngStream) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::config(format!("square side {side} must be positive")));
        }
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (side * rng.uniform(), side * rng.uniform())).collect();
        Self::from_points(&pts, coefficients)
    }

    pub fn from_points(points: &[(f64, f64)], coefficients: TspCoefficients) -> Result<Self> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    let (dx, dy) = (points[x].0 - points[y].0, points[x].1 - points[y].1);
                    d[x * n + y] = dx.hypot(dy);
                }
            }
        }
        Self::new(n, d, coefficients)
    }

    pub fn cities(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.distances[x * self.n + y]
    }
}

/// Couplings and biases whose Hopfield energy equals the tour energy minus
/// `offset`.
#[derive(Debug, Clone)]
pub struct TspEncoding {
    pub weights: WeightMatrix,
    pub bias: BiasVector,
    pub offset: f64,
}

#[inline]
fn node(n: usize, city: usize, pos: usize) -> usize {
    city * n + pos
}

pub fn tsp_weights(inst: &TspInstance) -> Result<TspEncoding> {
    let n = inst.n;
    if n < 2 {
        return Err(Error::config("need at least 2 cities"));
    }
    let big = n * n;
    let TspCoefficients { a, b, c, d } = inst.coefficients;
    let mut q = vec![0.0; big * big];
    let mut lin = vec![0.0; big];

    for x in 0..n {
        for i in 0..n {
            let u = node(n, x, i);
            for j in 0..n {
                if j != i {
                    q[u * big + node(n, x, j)] += a;
                }
            }
            for y in 0..n {
                if y != x {
                    q[u * big + node(n, y, i)] += b;
                }
            }
            for y in 0..n {
                if y == x {
                    continue;
                }
                let dxy = inst.distance(x, y);
                // for n = 2 both neighbours coincide and the term doubles
                for nb in [(i + 1) % n, (i + n - 1) % n] {
                    q[u * big + node(n, y, nb)] += d * dxy;
                }
            }
        }
    }
    for u in 0..big {
        for v in 0..big {
            if u != v {
                q[u * big + v] += c;
            }
        }
        lin[u] += c / 2.0 * (1.0 - 2.0 * n as f64);
    }
    let const_v = c / 2.0 * (n * n) as f64;

    // v = (s+1)/2:  ½vᵀQv + Lᵀv + c0  =  ⅛ sᵀQs + Σ_a s_a (¼ Σ_b Q_ab + ½ L_a) + const
    let mut w = vec![0.0; big * big];
    let mut bias = vec![0.0; big];
    let mut q_total = 0.0;
    let mut l_total = 0.0;
    for u in 0..big {
        let row = &q[u * big..(u + 1) * big];
        let row_sum: f64 = row.iter().sum();
        q_total += row_sum;
        l_total += lin[u];
        bias[u] = -(row_sum / 4.0 + lin[u] / 2.0);
        for v in 0..big {
            w[u * big + v] = -row[v] / 4.0;
        }
    }
    let offset = q_total / 8.0 + l_total / 2.0 + const_v;
    Ok(TspEncoding {
        weights: WeightMatrix::from_raw(big, w, WeightRole::Initial),
        bias: BiasVector::new(bias),
        offset,
    })
}

/// A cyclic visiting order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tour(Vec<usize>);

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &c in &order {
            if c >= n || std::mem::replace(&mut seen[c], true) {
                return Err(Error::config(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Self(order))
    }

    pub fn cities(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Permutation-matrix state: city `x` at position `i` is `+1`.
    pub fn to_state(&self) -> StateVector {
        let n = self.0.len();
        let mut bits = vec![0u8; n * n];
        for (pos, &city) in self.0.iter().enumerate() {
            bits[node(n, city, pos)] = 1;
        }
        StateVector::from_binary(&bits).expect("binary layout")
    }

    /// Same cycle irrespective of start point and direction.
    pub fn canonical(&self) -> Vec<usize> {
        let n = self.0.len();
        let start = self.0.iter().position(|&c| c == 0).unwrap_or(0);
        let fwd: Vec<usize> = (0..n).map(|k| self.0[(start + k) % n]).collect();
        let bwd: Vec<usize> = (0..n).map(|k| self.0[(start + n - k) % n]).collect();
        fwd.min(bwd)
    }
}

impl fmt::Display for Tour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &c) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("->")?;
            }
            if c < 26 {
                write!(f, "{}", (b'A' + c as u8) as char)?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Which permutation-matrix constraints a decoded state breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidTour {
    /// `(city, number of positions switched on)` for every row with a count other than one.
    pub rows: Vec<(usize, usize)>,
    /// `(position, number of cities switched on)` for every column with a count other than one.
    pub columns: Vec<(usize, usize)>,
}

impl fmt::Display for InvalidTour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid tour: rows {:?}, columns {:?}", self.rows, self.columns)
    }
}

pub fn decode_tour(state: &StateVector, n: usize) -> Result<std::result::Result<Tour, InvalidTour>> {
    check_dim("tour state", n * n, state.len())?;
    let s = state.as_slice();
    let on = |x: usize, i: usize| s[node(n, x, i)] > 0;
    let rows: Vec<(usize, usize)> = (0..n)
        .map(|x| (x, (0..n).filter(|&i| on(x, i)).count()))
        .filter(|&(_, c)| c != 1)
        .collect();
    let columns: Vec<(usize, usize)> = (0..n)
        .map(|i| (i, (0..n).filter(|&x| on(x, i)).count()))
        .filter(|&(_, c)| c != 1)
        .collect();
    if !rows.is_empty() || !columns.is_empty() {
        return Ok(Err(InvalidTour { rows, columns }));
    }
    let order = (0..n)
        .map(|i| (0..n).find(|&x| on(x, i)).expect("column has one city"))
        .collect();
    Ok(Ok(Tour(order)))
}

/// Cyclic length, including the closing edge.
pub fn tour_length(tour: &Tour, inst: &TspInstance) -> f64 {
    let c = tour.cities();
    let n = c.len();
    (0..n).map(|k| inst.distance(c[k], c[(k + 1) % n])).sum()
}

/// Exhaustive search over the `(n-1)!/2` distinct cycles (city 0 fixed first).
pub fn shortest_tour_exhaustive(inst: &TspInstance) -> (Tour, f64) {
    fn rec(inst: &TspInstance, path: &mut Vec<usize>, used: &mut [bool], best: &mut (Vec<usize>, f64)) {
        let n = inst.cities();
        if path.len() == n {
            if path.len() > 2 && path[1] > path[n - 1] {
                return;
            }
            let len: f64 = (0..n).map(|k| inst.distance(path[k], path[(k + 1) % n])).sum();
            if len < best.1 {
                *best = (path.clone(), len);
            }
            return;
        }
        for c in 1..n {
            if !used[c] {
                used[c] = true;
                path.push(c);
                rec(inst, path, used, best);
                path.pop();
                used[c] = false;
            }
        }
    }
    let n = inst.cities();
    let mut used = vec![false; n];
    used[0] = true;
    let mut best = (Vec::new(), f64::INFINITY);
    rec(inst, &mut vec![0], &mut used, &mut best);
    (Tour(best.0), best.1)
}

/// Result of relaxing the encoding from many random states.
#[derive(Debug, Clone)]
pub struct RestartSummary {
    pub restarts: usize,
    /// Final states that decode to a permutation.
    pub valid: usize,
    /// Shortest decoded tour and its length.
    pub best: Option<(Tour, f64)>,
}

/// Relaxes the encoding of `inst` from `restarts` random states, `steps`
/// updates each, and keeps the shortest valid decode.
pub fn solve_by_restarts(inst: &TspInstance, restarts: usize, steps: usize, rng: &mut RngStream) -> Result<RestartSummary> {
    let enc = tsp_weights(inst)?;
    let n = inst.n;
    let mut valid = 0;
    let mut best: Option<(Tour, f64)> = None;
    for _ in 0..restarts {
        let s0 = StateVector::random(n * n, rng);
        let out = relax(s0, &enc.weights, &enc.bias, steps, rng, false)?;
        if let Ok(tour) = decode_tour(&out.state, n)? {
            valid += 1;
            let len = tour_length(&tour, inst);
            if best.as_ref().is_none_or(|(_, b)| len < *b) {
                best = Some((tour, len));
            }
        }
    }
    Ok(RestartSummary { restarts, valid, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked four-city example: `v = 0010 1000 0001 0100`.
    const EXAMPLE_BITS: [u8; 16] = [0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0];

    fn unit_square() -> TspInstance {
        TspInstance::from_points(
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
            TspCoefficients::default(),
        )
        .unwrap()
    }

    #[test]
    fn worked_example_decodes_to_b_d_a_c() {
        let s = StateVector::from_binary(&EXAMPLE_BITS).unwrap();
        let tour = decode_tour(&s, 4).unwrap().unwrap();
        assert_eq!(tour.cities(), &[1, 3, 0, 2]);
        assert_eq!(tour.to_string(), "B->D->A->C");
    }

    #[test]
    fn all_off_reports_every_row_and_column() {
        let s = StateVector::filled(9, -1);
        let bad = decode_tour(&s, 3).unwrap().unwrap_err();
        assert_eq!(bad.rows, vec![(0, 0), (1, 0), (2, 0)]);
        assert_eq!(bad.columns, vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn wrong_length_is_an_error() {
        assert!(decode_tour(&StateVector::filled(8, 1), 3).is_err());
    }

    #[test]
    fn random_permutation_round_trips() {
        let mut rng = RngStream::new(5);
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..5).collect();
            for k in (1..5).rev() {
                order.swap(k, rng.node(k + 1));
            }
            let tour = Tour::new(order).unwrap();
            assert_eq!(decode_tour(&tour.to_state(), 5).unwrap().unwrap(), tour);
        }
    }

    #[test]
    fn lengths() {
        let two = TspInstance::new(2, vec![0.0, 3.0, 3.0, 0.0], TspCoefficients::default()).unwrap();
        assert_eq!(tour_length(&Tour::new(vec![0, 1]).unwrap(), &two), 6.0);
        let sq = unit_square();
        assert_eq!(tour_length(&Tour::new(vec![0, 1, 2, 3]).unwrap(), &sq), 4.0);
        assert_eq!(shortest_tour_exhaustive(&sq).1, 4.0);
    }

    #[test]
    fn encoding_is_symmetric_zero_diagonal() {
        let enc = tsp_weights(&unit_square()).unwrap();
        assert!(enc.weights.is_symmetric());
        assert!(enc.weights.has_zero_diagonal());
        assert_eq!(enc.bias.len(), 16);
    }

    #[test]
    fn rejects_single_city() {
        assert!(TspInstance::new(1, vec![0.0], TspCoefficients::default()).is_err());
    }

    #[test]
    fn canonical_cycle_ignores_rotation_and_direction() {
        let a = Tour::new(vec![2, 0, 1, 3]).unwrap();
        let b = Tour::new(vec![3, 1, 0, 2]).unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }
}
