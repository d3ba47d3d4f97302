//! Lazy random walks, exact distribution propagation, stationary
//! distributions, total-variation machinery, and mixing times.
//!
//! States are graph vertices 1..n; matrices use 0-based indices internally
//! (state index v-1 for vertex v). All maxima are evaluated in a fixed state
//! order so results never depend on evaluation order.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::PortLabeledGraph;
use crate::infotheory::{conditional_entropy, Dist, JointDist};

#[derive(Debug, Error, PartialEq)]
pub enum MarkovError {
    #[error("row {row} of transition matrix is not a probability vector")]
    BadRow { row: usize },
    #[error("dimension mismatch: expected {expected} states, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("termination probability q={0} outside (0, 1/2]")]
    BadTerminationProbability(f64),
    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("chain did not mix within the cap of {cap} steps")]
    NotMixedWithinCap { cap: u64 },
}

/// Row-stochastic matrix over the vertex set of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    /// Validates that every row is a probability vector (non-negative,
    /// total mass 1 within 1e-12).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, MarkovError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MarkovError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) || (sum - 1.0).abs() > 1e-12 {
                return Err(MarkovError::BadRow { row: i + 1 });
            }
        }
        Ok(TransitionMatrix { n, rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row
            })
            .collect();
        TransitionMatrix { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row for the state with 0-based index `i` (vertex i+1).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn multiply(&self, other: &TransitionMatrix) -> TransitionMatrix {
        assert_eq!(self.n, other.n, "matrix dimensions must agree");
        let n = self.n;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let a = self.rows[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    rows[i][j] += a * other.rows[k][j];
                }
            }
        }
        TransitionMatrix { n, rows }
    }

    /// t-th matrix power by repeated squaring; t = 0 is the identity.
    pub fn power(&self, t: u64) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.n);
        let mut base = self.clone();
        let mut t = t;
        while t > 0 {
            if t & 1 == 1 {
                result = result.multiply(&base);
            }
            t >>= 1;
            if t > 0 {
                base = base.multiply(&base);
            }
        }
        result
    }

    /// Left action on a row vector: mu -> mu P.
    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.n, "vector dimension must agree");
        let mut out = vec![0.0; self.n];
        for (i, &w) in mu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for j in 0..self.n {
                out[j] += w * self.rows[i][j];
            }
        }
        out
    }
}

/// Lazy random walk: stay with probability 1/2, otherwise step to a uniform
/// neighbor. Aperiodic on every connected graph.
pub fn lazy_walk_matrix(g: &PortLabeledGraph) -> TransitionMatrix {
    let n = g.n();
    let mut rows = vec![vec![0.0; n]; n];
    for v in 1..=n {
        let deg = g.degree(v);
        if deg == 0 {
            rows[v - 1][v - 1] = 1.0;
            continue;
        }
        rows[v - 1][v - 1] = 0.5;
        for &w in g.neighbors(v) {
            rows[v - 1][w - 1] = 1.0 / (2.0 * deg as f64);
        }
    }
    TransitionMatrix { n, rows }
}

/// Simple (non-lazy) random walk: step to a uniform neighbor every round.
/// Periodic on bipartite graphs, which is exactly what the parity
/// counterexample exploits.
pub fn simple_walk_matrix(g: &PortLabeledGraph) -> TransitionMatrix {
    let n = g.n();
    let mut rows = vec![vec![0.0; n]; n];
    for v in 1..=n {
        let deg = g.degree(v);
        if deg == 0 {
            rows[v - 1][v - 1] = 1.0;
            continue;
        }
        for &w in g.neighbors(v) {
            rows[v - 1][w - 1] = 1.0 / deg as f64;
        }
    }
    TransitionMatrix { n, rows }
}

/// Movement kernel of the randomized hider conditioned on survival of one
/// round. The per-round branch split (terminate q, stay 1/2, move 1/2 - q)
/// factors as a Geometric(q) stopping time composed with this kernel:
/// stay (1/2)/(1-q), move (1/2 - q)/((1-q) deg) per neighbor.
pub fn algorithm_walk_matrix(
    g: &PortLabeledGraph,
    q: f64,
) -> Result<TransitionMatrix, MarkovError> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(MarkovError::BadTerminationProbability(q));
    }
    let n = g.n();
    let stay = 0.5 / (1.0 - q);
    let mut rows = vec![vec![0.0; n]; n];
    for v in 1..=n {
        let deg = g.degree(v);
        if deg == 0 {
            rows[v - 1][v - 1] = 1.0;
            continue;
        }
        rows[v - 1][v - 1] = stay;
        let move_each = (0.5 - q) / ((1.0 - q) * deg as f64);
        for &w in g.neighbors(v) {
            rows[v - 1][w - 1] = move_each;
        }
    }
    Ok(TransitionMatrix { n, rows })
}

/// Stationary distribution of the lazy walk: pi(v) = deg(v) / 2m.
pub fn stationary_distribution(g: &PortLabeledGraph) -> Dist<usize> {
    if g.m() == 0 {
        return Dist::point(1);
    }
    let two_m = 2.0 * g.m() as f64;
    let probs: BTreeMap<usize, f64> = g
        .vertices()
        .map(|v| (v, g.degree(v) as f64 / two_m))
        .collect();
    Dist::from_map_unchecked(probs)
}

/// Dense vector over states 0..n-1 from a distribution over vertices 1..n.
pub fn dist_to_dense(d: &Dist<usize>, n: usize) -> Result<Vec<f64>, MarkovError> {
    let mut out = vec![0.0; n];
    for (&v, p) in d.iter() {
        if v < 1 || v > n {
            return Err(MarkovError::DimensionMismatch { expected: n, got: v });
        }
        out[v - 1] = p;
    }
    Ok(out)
}

/// Distribution over vertices 1..n from a dense state vector; drops exact
/// zeros.
pub fn dense_to_dist(v: &[f64]) -> Dist<usize> {
    let probs: BTreeMap<usize, f64> = v
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(i, &p)| (i + 1, p))
        .collect();
    Dist::from_map_unchecked(probs)
}

/// Exact t-step pushforward of a distribution over vertices.
pub fn propagate(
    d: &Dist<usize>,
    p: &TransitionMatrix,
    t: u64,
) -> Result<Dist<usize>, MarkovError> {
    let mut mu = dist_to_dense(d, p.n())?;
    if t <= 64 {
        for _ in 0..t {
            mu = p.apply(&mu);
        }
    } else {
        mu = p.power(t).apply(&mu);
    }
    Ok(dense_to_dist(&mu))
}

/// Total variation distance between two distributions on the same space:
/// half the L1 distance over the union of the outcome sets.
pub fn tv_distance<T: Ord + Clone>(p: &Dist<T>, q: &Dist<T>) -> f64 {
    let mut keys: Vec<&T> = p.iter().map(|(k, _)| k).collect();
    keys.extend(q.iter().map(|(k, _)| k));
    keys.sort();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|k| (p.prob(k) - q.prob(k)).abs())
        .sum::<f64>()
}

fn tv_dense(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

/// Worst-case distance to stationarity d(t) = max_x TV(P^t(x,.), pi).
pub fn d_t(p: &TransitionMatrix, pi: &Dist<usize>, t: u64) -> Result<f64, MarkovError> {
    let pi_dense = dist_to_dense(pi, p.n())?;
    let pt = p.power(t);
    Ok(d_of_power(&pt, &pi_dense))
}

fn d_of_power(pt: &TransitionMatrix, pi_dense: &[f64]) -> f64 {
    (0..pt.n())
        .map(|x| tv_dense(pt.row(x), pi_dense))
        .fold(0.0, f64::max)
}

/// Pairwise worst-case distance dbar(t) = max_{x,y} TV(P^t(x,.), P^t(y,.)).
pub fn dbar_t(p: &TransitionMatrix, t: u64) -> f64 {
    let pt = p.power(t);
    let mut max = 0.0f64;
    for x in 0..pt.n() {
        for y in (x + 1)..pt.n() {
            max = max.max(tv_dense(pt.row(x), pt.row(y)));
        }
    }
    max
}

/// Least t with d(t) <= epsilon, or NotMixedWithinCap if no t <= t_max
/// qualifies.
///
/// Scans incrementally for small caps; for large caps it brackets by
/// repeated squaring and binary-searches, relying on d(t) being
/// non-increasing (which holds for the lazy walks this targets). The
/// returned t always satisfies d(t) <= epsilon and d(t-1) > epsilon.
pub fn mixing_time(
    p: &TransitionMatrix,
    pi: &Dist<usize>,
    epsilon: f64,
    t_max: u64,
) -> Result<u64, MarkovError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MarkovError::BadEpsilon(epsilon));
    }
    let pi_dense = dist_to_dense(pi, p.n())?;

    const SCAN_LIMIT: u64 = 4096;
    if t_max <= SCAN_LIMIT {
        let mut pt = TransitionMatrix::identity(p.n());
        for t in 0..=t_max {
            if t > 0 {
                pt = pt.multiply(p);
            }
            if d_of_power(&pt, &pi_dense) <= epsilon {
                return Ok(t);
            }
        }
        return Err(MarkovError::NotMixedWithinCap { cap: t_max });
    }

    let d_at = |t: u64| d_of_power(&p.power(t), &pi_dense);
    if d_at(0) <= epsilon {
        return Ok(0);
    }
    if d_at(t_max) > epsilon {
        return Err(MarkovError::NotMixedWithinCap { cap: t_max });
    }
    // Invariant: d(lo) > epsilon, d(hi) <= epsilon.
    let mut hi = 1u64;
    while hi < t_max && d_at(hi) > epsilon {
        hi = (hi * 2).min(t_max);
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if d_at(mid) <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    debug_assert!(d_at(hi) <= epsilon && d_at(hi - 1) > epsilon);
    Ok(hi)
}

/// Default mixing-time cap: 8 n^3 ceil(log2(1/epsilon)), sized from the
/// O(n^3) bound on lazy-walk mixing.
pub fn default_mixing_cap(n: usize, epsilon: f64) -> u64 {
    let levels = (1.0 / epsilon).log2().ceil().max(1.0) as u64;
    8 * (n as u64).pow(3) * levels
}

/// Trajectories of D(mu P^t || nu P^t) and H(X0 | X_t) (with X0 ~ mu) for
/// t = 0..=t_max, together with the monotonicity verdicts (slack 1e-9):
/// the relative entropy between two pushforwards never increases and the
/// conditional entropy of the start given the current state never
/// decreases.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub ts: Vec<u64>,
    pub kl: Vec<f64>,
    pub cond_entropy: Vec<f64>,
    pub kl_nonincreasing: bool,
    pub cond_entropy_nondecreasing: bool,
}

pub fn monotonicity_probes(
    p: &TransitionMatrix,
    mu: &Dist<usize>,
    nu: &Dist<usize>,
    t_max: u64,
) -> Result<MonotonicityReport, MarkovError> {
    const SLACK: f64 = 1e-9;
    let n = p.n();
    let mu0 = dist_to_dense(mu, n)?;
    let mut mu_t = mu0.clone();
    let mut nu_t = dist_to_dense(nu, n)?;
    let mut pt = TransitionMatrix::identity(n);

    let mut ts = Vec::new();
    let mut kl = Vec::new();
    let mut cond_entropy = Vec::new();
    for t in 0..=t_max {
        if t > 0 {
            mu_t = p.apply(&mu_t);
            nu_t = p.apply(&nu_t);
            pt = pt.multiply(p);
        }
        ts.push(t);
        kl.push(kl_dense(&mu_t, &nu_t));
        // Joint law of (X0, X_t): mu(x) * P^t(x, y).
        let mut probs = BTreeMap::new();
        for (x, &px) in mu0.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &pyx) in pt.row(x).iter().enumerate() {
                if pyx > 0.0 {
                    probs.insert((x + 1, y + 1), px * pyx);
                }
            }
        }
        let joint = JointDist::new(probs).expect("propagated joint is a distribution");
        cond_entropy.push(conditional_entropy(&joint));
    }
    let kl_nonincreasing = kl.windows(2).all(|w| w[1] <= w[0] + SLACK);
    let cond_entropy_nondecreasing = cond_entropy.windows(2).all(|w| w[1] >= w[0] - SLACK);
    Ok(MonotonicityReport {
        ts,
        kl,
        cond_entropy,
        kl_nonincreasing,
        cond_entropy_nondecreasing,
    })
}

fn kl_dense(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&px, &qx) in p.iter().zip(q.iter()) {
        if px == 0.0 {
            continue;
        }
        if qx == 0.0 {
            return f64::INFINITY;
        }
        d += px * (px / qx).log2();
    }
    d.max(0.0)
}
