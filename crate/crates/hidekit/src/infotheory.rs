//! Exact finite-alphabet information measures, all in bits (base-2 logs).
//!
//! Distributions are sparse maps from outcomes to probabilities. Outcomes are
//! any ordered key type: vertex ids for single agents, whole configurations
//! for multi-agent runs. Iteration over a `BTreeMap` is in ascending key
//! order, which fixes the floating-point summation order and makes every
//! measure reproducible bit-for-bit.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Validation tolerance for total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("q has zero mass at an outcome where p > 0")]
    ZeroInQ,
    #[error("probability {0} outside [0,1]")]
    OutOfRange(f64),
}

/// Probability distribution over a finite outcome space.
///
/// Entries may carry probability zero; the outcome space is the key set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dist<T: Ord> {
    probs: BTreeMap<T, f64>,
}

impl<T: Ord + Clone> Dist<T> {
    /// Validates non-negativity and unit total mass (within 1e-12).
    pub fn new(probs: BTreeMap<T, f64>) -> Result<Self, InfoError> {
        let mut total = 0.0;
        for p in probs.values() {
            if !p.is_finite() || *p < 0.0 {
                return Err(InfoError::InvalidDistribution(format!(
                    "probability {p} is negative or non-finite"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(InfoError::InvalidDistribution(format!(
                "total mass {total} differs from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        Ok(Dist { probs })
    }

    /// Point mass at a single outcome.
    pub fn point(outcome: T) -> Self {
        Dist {
            probs: [(outcome, 1.0)].into_iter().collect(),
        }
    }

    /// Uniform distribution over the given outcomes.
    pub fn uniform<I: IntoIterator<Item = T>>(outcomes: I) -> Result<Self, InfoError> {
        let keys: Vec<T> = outcomes.into_iter().collect();
        if keys.is_empty() {
            return Err(InfoError::InvalidDistribution("empty support".into()));
        }
        let p = 1.0 / keys.len() as f64;
        Self::new(keys.into_iter().map(|k| (k, p)).collect())
    }

    /// The adversarial two-point prior: probability 1/2 at each of u and v.
    pub fn two_point(u: T, v: T) -> Result<Self, InfoError> {
        if u == v {
            return Err(InfoError::InvalidDistribution(
                "two-point prior needs distinct outcomes".into(),
            ));
        }
        Self::new([(u, 0.5), (v, 0.5)].into_iter().collect())
    }

    pub fn prob(&self, outcome: &T) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    /// Entries in ascending outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    /// Outcomes with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.probs.iter().filter(|(_, &p)| p > 0.0).map(|(k, _)| k)
    }

    pub fn support_size(&self) -> usize {
        self.support().count()
    }

    /// Applies a map to outcomes, accumulating probabilities of collisions.
    pub fn map_outcomes<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Dist<U> {
        let mut probs: BTreeMap<U, f64> = BTreeMap::new();
        for (k, p) in self.iter() {
            *probs.entry(f(k)).or_insert(0.0) += p;
        }
        Dist { probs }
    }

    /// Drops zero-probability entries.
    pub fn trim(&self) -> Dist<T> {
        Dist {
            probs: self
                .probs
                .iter()
                .filter(|(_, &p)| p > 0.0)
                .map(|(k, &p)| (k.clone(), p))
                .collect(),
        }
    }

    pub(crate) fn from_map_unchecked(probs: BTreeMap<T, f64>) -> Self {
        Dist { probs }
    }
}

/// Joint distribution over (row outcome, column outcome) pairs. In hiding
/// analyses the row is the initial state X0 and the column the final state
/// XT seen by the adversary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDist<R: Ord, C: Ord> {
    probs: BTreeMap<(R, C), f64>,
}

impl<R: Ord + Clone, C: Ord + Clone> JointDist<R, C> {
    pub fn new(probs: BTreeMap<(R, C), f64>) -> Result<Self, InfoError> {
        // Reuse Dist validation over the paired outcome space.
        let d = Dist::new(probs)?;
        Ok(JointDist { probs: d.probs })
    }

    /// Builds the joint prior(x) * kernel(x)(y) from a prior over rows and a
    /// per-row conditional law. The kernel is only evaluated on the support.
    pub fn from_prior_and_kernel(
        prior: &Dist<R>,
        mut kernel: impl FnMut(&R) -> Dist<C>,
    ) -> Result<Self, InfoError> {
        let mut probs = BTreeMap::new();
        for (x, px) in prior.iter() {
            if px == 0.0 {
                continue;
            }
            let law = kernel(x);
            for (y, pyx) in law.iter() {
                if pyx == 0.0 {
                    continue;
                }
                probs.insert((x.clone(), y.clone()), px * pyx);
            }
        }
        Self::new(probs)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(R, C), f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    pub fn row_marginal(&self) -> Dist<R> {
        let mut probs: BTreeMap<R, f64> = BTreeMap::new();
        for ((r, _), &p) in &self.probs {
            *probs.entry(r.clone()).or_insert(0.0) += p;
        }
        Dist { probs }
    }

    pub fn col_marginal(&self) -> Dist<C> {
        let mut probs: BTreeMap<C, f64> = BTreeMap::new();
        for ((_, c), &p) in &self.probs {
            *probs.entry(c.clone()).or_insert(0.0) += p;
        }
        Dist { probs }
    }

    /// Product of the marginals over the joint's outcome space.
    pub fn product_of_marginals(&self) -> JointDist<R, C> {
        let rows = self.row_marginal();
        let cols = self.col_marginal();
        let mut probs = BTreeMap::new();
        for (r, pr) in rows.iter() {
            for (c, pc) in cols.iter() {
                probs.insert((r.clone(), c.clone()), pr * pc);
            }
        }
        JointDist { probs }
    }

    /// Applies maps to both key components, accumulating collisions.
    pub fn map_outcomes<R2: Ord + Clone, C2: Ord + Clone>(
        &self,
        fr: impl Fn(&R) -> R2,
        fc: impl Fn(&C) -> C2,
    ) -> JointDist<R2, C2> {
        let mut probs: BTreeMap<(R2, C2), f64> = BTreeMap::new();
        for ((r, c), &p) in &self.probs {
            *probs.entry((fr(r), fc(c))).or_insert(0.0) += p;
        }
        JointDist { probs }
    }

    /// Swaps rows and columns.
    pub fn transpose(&self) -> JointDist<C, R> {
        JointDist {
            probs: self
                .probs
                .iter()
                .map(|((r, c), &p)| ((c.clone(), r.clone()), p))
                .collect(),
        }
    }
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0 // convention 0 log 0 = 0
    }
}

/// Shannon entropy H(X) in bits. Zero-probability terms contribute 0.
pub fn entropy<T: Ord + Clone>(d: &Dist<T>) -> f64 {
    let h: f64 = -d.iter().map(|(_, p)| plogp(p)).sum::<f64>();
    h.max(0.0)
}

/// Conditional entropy H(row | column) by the defining double sum: the
/// column-weighted entropy of the conditional row distributions.
pub fn conditional_entropy<R: Ord + Clone, C: Ord + Clone>(j: &JointDist<R, C>) -> f64 {
    // Group the joint by column; BTreeMap keeps the summation order fixed.
    let mut columns: BTreeMap<C, Vec<f64>> = BTreeMap::new();
    for ((_, c), p) in j.iter() {
        columns.entry(c.clone()).or_default().push(p);
    }
    let mut h = 0.0;
    for cell in columns.values() {
        let py: f64 = cell.iter().sum();
        if py <= 0.0 {
            continue;
        }
        h -= cell.iter().map(|&p| plogp(p / py)).sum::<f64>() * py;
    }
    h.max(0.0)
}

/// Mutual information I(X;Y) = H(X) - H(X|Y) in bits.
pub fn mutual_information<R: Ord + Clone, C: Ord + Clone>(j: &JointDist<R, C>) -> f64 {
    (entropy(&j.row_marginal()) - conditional_entropy(j)).max(0.0)
}

/// Uncertainty coefficient U(X;Y) = I(X;Y) / H(X), the fraction of
/// information about the row variable revealed by the column variable.
/// By convention 0 when H(X) = 0 (nothing to reveal); clamped to [0,1]
/// against rounding.
pub fn uncertainty_coefficient<R: Ord + Clone, C: Ord + Clone>(j: &JointDist<R, C>) -> f64 {
    let h = entropy(&j.row_marginal());
    // A point-mass marginal reconstructed from float products lands within
    // rounding of zero entropy, not at exactly zero.
    if h <= MASS_TOLERANCE {
        return 0.0;
    }
    (mutual_information(j) / h).clamp(0.0, 1.0)
}

/// Relative entropy (Kullback-Leibler divergence) D(p || q) in bits over the
/// union of the two outcome spaces, with the conventions 0 log(0/0) = 0,
/// 0 log(0/q) = 0 and p log(p/0) = +infinity. Infinity is a first-class
/// return value, not an error.
pub fn kl_divergence<T: Ord + Clone>(p: &Dist<T>, q: &Dist<T>) -> f64 {
    let mut d = 0.0;
    for (x, px) in p.iter() {
        if px == 0.0 {
            continue;
        }
        let qx = q.prob(x);
        if qx == 0.0 {
            return f64::INFINITY;
        }
        d += px * (px / qx).log2();
    }
    d.max(0.0)
}

/// Chi-square style upper bound on the relative entropy:
/// D(p || q) <= (1/ln 2) (sum_x p(x)^2 / q(x) - 1).
/// Requires q > 0 wherever p > 0.
pub fn kl_upper_bound<T: Ord + Clone>(p: &Dist<T>, q: &Dist<T>) -> Result<f64, InfoError> {
    let mut sum = 0.0;
    for (x, px) in p.iter() {
        let qx = q.prob(x);
        if qx <= 0.0 {
            if px > 0.0 {
                return Err(InfoError::ZeroInQ);
            }
            continue;
        }
        sum += px * px / qx;
    }
    Ok((sum - 1.0) / std::f64::consts::LN_2)
}

/// Binary entropy f(p) = -(p log p + (1-p) log(1-p)), with f(0) = f(1) = 0.
/// Unique maximum 1 at p = 1/2.
pub fn binary_entropy(p: f64) -> Result<f64, InfoError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(InfoError::OutOfRange(p));
    }
    Ok((-plogp(p) - plogp(1.0 - p)).max(0.0))
}
