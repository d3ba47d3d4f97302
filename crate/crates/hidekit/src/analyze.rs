//! The adversary's side: joint laws of (X0, XT), hiding quality reports,
//! and the lower-bound experiments.
//!
//! Exact mode builds the joint from per-start final laws; Monte Carlo mode
//! runs trials over whole configurations (agents are indistinguishable, so
//! the adversary's outcome space is the multiset of positions). Acceptance
//! checks use exact mode only; the plug-in Monte Carlo estimator of mutual
//! information is upward-biased and reported as such.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algorithms::AlgorithmSpec;
use crate::graph::{chain_middle_set, gen_family, GraphError, GraphFamilySpec, PortLabeledGraph};
use crate::infotheory::{
    binary_entropy, entropy, mutual_information, uncertainty_coefficient, Dist, InfoError,
    JointDist,
};
use crate::markov::{
    algorithm_walk_matrix, lazy_walk_matrix, propagate, simple_walk_matrix, MarkovError,
};
use crate::simulate::{
    child_seed, exact_final_law, run_multi, run_truncated, sample_final_config, Configuration,
    SimulateError, DEFAULT_ROUND_CAP,
};

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("bad vertices u={u}, v={v}: {reason}")]
    BadVertices { u: usize, v: usize, reason: String },
    #[error("graph is not bipartite: odd cycle detected at vertex {vertex}")]
    NotBipartite { vertex: usize },
    #[error("{0} is not supported in exact mode")]
    UnsupportedAlgorithm(String),
}

/// How a joint law was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AnalysisMode {
    Exact,
    /// Plug-in estimate from sampled runs; the mutual-information estimate
    /// is upward-biased at finite sample size.
    MonteCarlo { samples: u64, seed: u64 },
}

/// Hiding quality of one algorithm/graph/prior combination. The verdict is
/// the raw measured U(X0;XT); deciding "well hiding" needs a limit over
/// growing n, so no boolean verdict is ever emitted for a single instance.
#[derive(Debug, Clone, Serialize)]
pub struct HidingReport {
    pub h_x0: f64,
    pub mi: f64,
    pub uc: f64,
    #[serde(flatten)]
    pub mode: AnalysisMode,
    pub verdict_epsilon: f64,
}

/// Exact joint law of (X0, XT): prior(x) times the exact final law from x.
pub fn exact_joint(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    prior: &Dist<usize>,
) -> Result<JointDist<usize, usize>, AnalyzeError> {
    let mut laws: BTreeMap<usize, Dist<usize>> = BTreeMap::new();
    for x in prior.support() {
        laws.insert(*x, exact_final_law(g, algo, *x)?);
    }
    Ok(JointDist::from_prior_and_kernel(prior, |x| {
        laws[x].clone()
    })?)
}

/// Plug-in joint over (initial configuration, final configuration) from
/// `samples` independent runs, each with a derived per-trial seed.
pub fn mc_joint(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    prior: &Dist<Configuration>,
    samples: u64,
    seed: u64,
) -> Result<JointDist<Configuration, Configuration>, AnalyzeError> {
    let mut counts: BTreeMap<(Configuration, Configuration), f64> = BTreeMap::new();
    let weight = 1.0 / samples as f64;
    for trial in 0..samples {
        let trial_seed = child_seed(seed, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let initial = draw_from(prior, &mut rng);
        let starts = expand_configuration(&initial);
        let final_config = sample_final_config(g, algo, &starts, trial_seed, DEFAULT_ROUND_CAP)?;
        *counts.entry((initial, final_config)).or_insert(0.0) += weight;
    }
    Ok(JointDist::new(counts)?)
}

/// Lifts a prior over single-agent start vertices to configurations.
pub fn vertex_prior_to_configurations(prior: &Dist<usize>) -> Dist<Configuration> {
    prior.map_outcomes(|&v| Configuration::single(v))
}

fn draw_from<T: Ord + Clone>(d: &Dist<T>, rng: &mut ChaCha8Rng) -> T {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (k, p) in d.iter() {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = Some(k);
        if x < acc {
            return k.clone();
        }
    }
    last.expect("distribution has support").clone()
}

fn expand_configuration(c: &Configuration) -> Vec<usize> {
    let mut starts = Vec::with_capacity(c.total());
    for (v, count) in c.iter() {
        starts.extend(std::iter::repeat(v).take(count));
    }
    starts
}

/// Summarizes a joint law into the hiding metrics.
pub fn hiding_report<R: Ord + Clone, C: Ord + Clone>(
    joint: &JointDist<R, C>,
    mode: AnalysisMode,
) -> HidingReport {
    let h_x0 = entropy(&joint.row_marginal());
    let mi = mutual_information(joint);
    let uc = uncertainty_coefficient(joint);
    HidingReport {
        h_x0,
        mi,
        uc,
        mode,
        verdict_epsilon: uc,
    }
}

/// Exact law of the time-t state of the truncated protocol (hard stop after
/// t rounds). Deterministic protocols are simply run for t rounds; the
/// randomized hider's law is the finite mixture of stopped and still-alive
/// mass at time t.
pub fn truncated_law(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
    t: u64,
) -> Result<Dist<usize>, AnalyzeError> {
    match algo {
        AlgorithmSpec::RandomWalkHider { q } => {
            let q = *q;
            let kernel = algorithm_walk_matrix(g, q)?;
            let n = g.n();
            let mut mu = vec![0.0; n];
            mu[start - 1] = 1.0;
            let mut acc = vec![0.0; n];
            let mut survive = 1.0;
            for _ in 0..t {
                for (a, &m) in acc.iter_mut().zip(mu.iter()) {
                    *a += q * survive * m;
                }
                survive *= 1.0 - q;
                mu = kernel.apply(&mu);
            }
            // Runs still alive at the cutoff sit at the kernel's t-step law.
            for (a, &m) in acc.iter_mut().zip(mu.iter()) {
                *a += survive * m;
            }
            Ok(crate::markov::dense_to_dist(&acc))
        }
        _ => {
            // Deterministic kinds: the time-t state is a point mass.
            let trace = run_truncated(g, algo, start, 0, t)?;
            Ok(Dist::point(*trace.visited.last().expect("nonempty trace")))
        }
    }
}

/// Reachable-set witness at two starts: if the supports of the time-t laws
/// from u and v are disjoint with probability 1/2 + gamma, the two-point
/// prior forces I(X0;X_t) >= 1 - f(1/2 + gamma).
#[derive(Debug, Clone, Serialize)]
pub struct LemmaKnownWitness {
    pub u: usize,
    pub v: usize,
    pub t: u64,
    pub disjoint_prob: f64,
    pub gamma: f64,
    pub eta_bound: f64,
    pub measured_mi: f64,
    #[serde(flatten)]
    pub mode: AnalysisMode,
}

/// Exact variant: reachable sets are the supports of the exact truncated
/// laws, so disjointness is a 0/1 event.
pub fn lemma_known_check(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    t: u64,
    u: usize,
    v: usize,
) -> Result<LemmaKnownWitness, AnalyzeError> {
    check_pair(g, u, v)?;
    let law_u = truncated_law(g, algo, u, t)?;
    let law_v = truncated_law(g, algo, v, t)?;
    let prior = Dist::two_point(u, v)?;
    let joint = JointDist::from_prior_and_kernel(&prior, |&x| {
        if x == u {
            law_u.clone()
        } else {
            law_v.clone()
        }
    })?;
    let support_u: BTreeSet<usize> = law_u.support().copied().collect();
    let support_v: BTreeSet<usize> = law_v.support().copied().collect();
    let disjoint = support_u.is_disjoint(&support_v);
    Ok(witness(u, v, t, disjoint, &joint, AnalysisMode::Exact))
}

/// Sampled variant: reachable sets are unions of observed time-t positions
/// over the trials, and the joint is the stratified plug-in estimate.
pub fn lemma_known_check_sampled(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    t: u64,
    u: usize,
    v: usize,
    trials: u64,
    seed: u64,
) -> Result<LemmaKnownWitness, AnalyzeError> {
    check_pair(g, u, v)?;
    let mut supports = [BTreeSet::new(), BTreeSet::new()];
    let mut counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let weight = 0.5 / trials as f64;
    for (side, &start) in [u, v].iter().enumerate() {
        for trial in 0..trials {
            let trial_seed = child_seed(seed, 2 * trial + side as u64);
            let trace = run_truncated(g, algo, start, trial_seed, t)?;
            let end = *trace.visited.last().expect("nonempty trace");
            supports[side].insert(end);
            *counts.entry((start, end)).or_insert(0.0) += weight;
        }
    }
    let joint = JointDist::new(counts)?;
    let disjoint = supports[0].is_disjoint(&supports[1]);
    let mode = AnalysisMode::MonteCarlo {
        samples: 2 * trials,
        seed,
    };
    Ok(witness(u, v, t, disjoint, &joint, mode))
}

fn check_pair(g: &PortLabeledGraph, u: usize, v: usize) -> Result<(), AnalyzeError> {
    if u == v || !g.contains_vertex(u) || !g.contains_vertex(v) {
        return Err(AnalyzeError::BadVertices {
            u,
            v,
            reason: "need two distinct vertices of the graph".into(),
        });
    }
    Ok(())
}

fn witness(
    u: usize,
    v: usize,
    t: u64,
    disjoint: bool,
    joint: &JointDist<usize, usize>,
    mode: AnalysisMode,
) -> LemmaKnownWitness {
    let disjoint_prob = if disjoint { 1.0 } else { 0.0 };
    let gamma = disjoint_prob - 0.5;
    let eta_bound = 1.0 - binary_entropy(0.5 + gamma).expect("0.5 + gamma within [0,1]");
    LemmaKnownWitness {
        u,
        v,
        t,
        disjoint_prob,
        gamma,
        eta_bound,
        measured_mi: mutual_information(joint),
        mode,
    }
}

/// Step-count lower-bound experiment at a diameter pair: all k agents start
/// together at u or at v (probability 1/2 each) and the report gives
/// Pr[energy >= floor(D/2)] next to the hiding quality of the same setup.
#[derive(Debug, Clone, Serialize)]
pub struct DHalfReport {
    pub u: usize,
    pub v: usize,
    pub diameter: usize,
    pub threshold: u64,
    pub agents: usize,
    pub prob_at_least: f64,
    pub hiding: HidingReport,
}

pub fn floor_d_half_experiment(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    agents: usize,
    trials: u64,
    seed: u64,
) -> Result<DHalfReport, AnalyzeError> {
    assert!(agents >= 1, "need at least one agent");
    let (u, v) = g.diameter_pair();
    let diameter = g.diameter();
    let threshold = (diameter / 2) as u64;

    let prob_at_least = if algo.is_deterministic() {
        // Two exact evaluations, weighted 1/2 each.
        let mut hit = 0.0;
        for &s in &[u, v] {
            let r = run_multi(g, algo, &vec![s; agents], seed)?;
            if r.energy >= threshold {
                hit += 0.5;
            }
        }
        hit
    } else {
        // Stratified trials from each start, weighted 1/2 each.
        let mut freq = 0.0;
        for (side, &s) in [u, v].iter().enumerate() {
            let mut hit = 0u64;
            for trial in 0..trials {
                let trial_seed = child_seed(seed, 2 * trial + side as u64);
                let r = run_multi(g, algo, &vec![s; agents], trial_seed)?;
                if r.energy >= threshold {
                    hit += 1;
                }
            }
            freq += 0.5 * hit as f64 / trials as f64;
        }
        freq
    };

    let hiding = if agents == 1 && algo.supports_exact_law() {
        let prior = Dist::two_point(u, v)?;
        let joint = exact_joint(g, algo, &prior)?;
        hiding_report(&joint, AnalysisMode::Exact)
    } else {
        let prior = Dist::two_point(
            Configuration::from_positions(&vec![u; agents]),
            Configuration::from_positions(&vec![v; agents]),
        )?;
        let joint = mc_joint(g, algo, &prior, trials, seed)?;
        hiding_report(
            &joint,
            AnalysisMode::MonteCarlo {
                samples: trials,
                seed,
            },
        )
    };

    Ok(DHalfReport {
        u,
        v,
        diameter,
        threshold,
        agents,
        prob_at_least,
        hiding,
    })
}

/// One row of the chain-of-cliques scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub x: usize,
    pub y: usize,
    pub n: usize,
    pub m: usize,
    pub trials: u64,
    pub mean_steps: f64,
    pub std_steps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,n,m,trials,mean_steps,std_steps\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.x, r.y, r.n, r.m, r.trials, r.mean_steps, r.std_steps
            ));
        }
        out
    }

    /// Least-squares slope of ln(mean_steps) against ln(m), over rows with
    /// positive means.
    pub fn log_log_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.mean_steps > 0.0)
            .map(|r| ((r.m as f64).ln(), r.mean_steps.ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }
}

/// Rounds until an agent started at vertex 1 (an end-clique vertex) first
/// occupies the middle of the chain, averaged over random family members
/// and trials. The randomized hider is measured through its
/// survival-conditioned movement kernel, so termination does not censor the
/// hitting time.
pub fn chain_cliques_scaling(
    x_list: &[usize],
    y_list: &[usize],
    algo: &AlgorithmSpec,
    members: u64,
    trials: u64,
    seed: u64,
) -> Result<ScalingTable, AnalyzeError> {
    let mut rows = Vec::new();
    let mut instance = 0u64;
    for &x in x_list {
        for &y in y_list {
            let middle = chain_middle_set(x, y);
            let mut steps: Vec<f64> = Vec::with_capacity((members * trials) as usize);
            for _ in 0..members {
                let member_seed = child_seed(seed, instance);
                instance += 1;
                let g = gen_family(&GraphFamilySpec::ChainOfCliques {
                    x,
                    y,
                    seed: Some(member_seed),
                })?;
                for trial in 0..trials {
                    let trial_seed = child_seed(member_seed, trial);
                    steps.push(hitting_rounds(&g, algo, 1, &middle, trial_seed)? as f64);
                }
            }
            let count = steps.len() as f64;
            let mean = steps.iter().sum::<f64>() / count;
            let var = if steps.len() > 1 {
                steps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            rows.push(ScalingRow {
                x,
                y,
                n: y * x + 2 * (y - 1),
                m: y * x * (x - 1) / 2 + 3 * (y - 1),
                trials: members * trials,
                mean_steps: mean,
                std_steps: var.sqrt(),
            });
        }
    }
    Ok(ScalingTable { rows })
}

/// First round at which the agent's position is in `target`.
fn hitting_rounds(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
    target: &BTreeSet<usize>,
    seed: u64,
) -> Result<u64, AnalyzeError> {
    if target.contains(&start) {
        return Ok(0);
    }
    match algo {
        AlgorithmSpec::RandomWalkHider { q } => {
            // Walk the survival-conditioned kernel directly.
            let stay = 0.5 / (1.0 - q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut current = start;
            for round in 1..=DEFAULT_ROUND_CAP {
                let draw: f64 = rng.random();
                if draw >= stay {
                    let deg = g.degree(current);
                    let port = rng.random_range(1..=deg);
                    current = g.neighbor_via_port(current, port);
                }
                if target.contains(&current) {
                    return Ok(round);
                }
            }
            Err(AnalyzeError::Simulate(SimulateError::NonTermination {
                cap: DEFAULT_ROUND_CAP,
                certificate: None,
            }))
        }
        _ => {
            let r = crate::simulate::run_single(g, algo, start, seed)?;
            let hit = r.per_agent[0]
                .visited
                .iter()
                .position(|v| target.contains(v));
            match hit {
                Some(round) => Ok(round as u64),
                None => Err(AnalyzeError::BadVertices {
                    u: start,
                    v: *target.iter().next().expect("nonempty target"),
                    reason: "run terminated without reaching the target set".into(),
                }),
            }
        }
    }
}

/// Parity counterexample on a bipartite graph: with the non-lazy walk and a
/// fixed running time, the side of the bipartition at time t reveals the
/// starting side exactly; the lazy walk at the same t does not.
#[derive(Debug, Clone, Serialize)]
pub struct ParityReport {
    pub t: u64,
    pub u: usize,
    pub v: usize,
    pub uc_nonlazy: f64,
    pub uc_lazy: f64,
}

pub fn bipartite_parity_probe(
    g: &PortLabeledGraph,
    t: u64,
) -> Result<ParityReport, AnalyzeError> {
    two_color(g)?;
    let u = 1;
    // Smallest neighbor of vertex 1: guaranteed the opposite color.
    let v = *g
        .neighbors(u)
        .iter()
        .min()
        .expect("vertex 1 has a neighbor in a connected graph with n >= 2");
    let prior = Dist::two_point(u, v)?;

    let walk = simple_walk_matrix(g);
    let lazy = lazy_walk_matrix(g);
    let mut laws: BTreeMap<usize, (Dist<usize>, Dist<usize>)> = BTreeMap::new();
    for &s in &[u, v] {
        let nonlazy_law = propagate(&Dist::point(s), &walk, t)?;
        let lazy_law = propagate(&Dist::point(s), &lazy, t)?;
        laws.insert(s, (nonlazy_law, lazy_law));
    }
    let joint_nonlazy = JointDist::from_prior_and_kernel(&prior, |s| laws[s].0.clone())?;
    let joint_lazy = JointDist::from_prior_and_kernel(&prior, |s| laws[s].1.clone())?;
    Ok(ParityReport {
        t,
        u,
        v,
        uc_nonlazy: uncertainty_coefficient(&joint_nonlazy),
        uc_lazy: uncertainty_coefficient(&joint_lazy),
    })
}

/// BFS two-coloring; errors with a vertex on an odd cycle when impossible.
fn two_color(g: &PortLabeledGraph) -> Result<Vec<u8>, AnalyzeError> {
    let mut color = vec![u8::MAX; g.n() + 1];
    color[1] = 0;
    let mut queue = std::collections::VecDeque::from([1usize]);
    while let Some(x) = queue.pop_front() {
        for &w in g.neighbors(x) {
            if color[w] == u8::MAX {
                color[w] = 1 - color[x];
                queue.push_back(w);
            } else if color[w] == color[x] {
                return Err(AnalyzeError::NotBipartite { vertex: w });
            }
        }
    }
    Ok(color)
}

/// (t, U(X0;X_t)) series for the truncated protocol, for plot emission.
pub fn truncated_u_series(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    prior: &Dist<usize>,
    t_max: u64,
) -> Result<Vec<(u64, f64)>, AnalyzeError> {
    let mut series = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        let mut laws: BTreeMap<usize, Dist<usize>> = BTreeMap::new();
        for x in prior.support() {
            laws.insert(*x, truncated_law(g, algo, *x, t)?);
        }
        let joint = JointDist::from_prior_and_kernel(prior, |x| laws[x].clone())?;
        series.push((t, uncertainty_coefficient(&joint)));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_family;
    use crate::infotheory::MASS_TOLERANCE;

    fn path(n: usize) -> PortLabeledGraph {
        gen_family(&GraphFamilySpec::Path { n }).unwrap()
    }

    fn cycle(n: usize) -> PortLabeledGraph {
        gen_family(&GraphFamilySpec::Cycle { n }).unwrap()
    }

    #[test]
    fn go_to_min_id_joint_is_product() {
        let g = path(5);
        let prior = Dist::uniform(g.vertices().collect::<Vec<_>>()).unwrap();
        let joint = exact_joint(&g, &AlgorithmSpec::GoToMinId, &prior).unwrap();
        let report = hiding_report(&joint, AnalysisMode::Exact);
        assert!(report.uc.abs() < 1e-12);
        assert!(report.mi.abs() < 1e-12);
    }

    #[test]
    fn point_prior_uses_zero_convention() {
        let g = path(3);
        let prior = Dist::point(2usize);
        let joint = exact_joint(&g, &AlgorithmSpec::RandomWalkHider { q: 0.2 }, &prior).unwrap();
        let report = hiding_report(&joint, AnalysisMode::Exact);
        assert!(report.h_x0 < 1e-12);
        assert_eq!(report.uc, 0.0);
    }

    #[test]
    fn exact_joint_marginal_matches_prior() {
        let g = cycle(5);
        let prior = Dist::new(
            [(1usize, 0.5), (2, 0.25), (4, 0.25)].into_iter().collect(),
        )
        .unwrap();
        for algo in [
            AlgorithmSpec::GoToMinId,
            AlgorithmSpec::DfsMinId,
            AlgorithmSpec::RandomWalkHider { q: 0.1 },
        ] {
            let joint = exact_joint(&g, &algo, &prior).unwrap();
            let rows = joint.row_marginal();
            for (v, p) in prior.iter() {
                assert!(
                    (rows.prob(v) - p).abs() <= MASS_TOLERANCE,
                    "{algo:?} marginal at {v}"
                );
            }
        }
    }

    #[test]
    fn mc_joint_matches_exact_for_deterministic_runs() {
        let g = path(4);
        let vertex_prior = Dist::two_point(1usize, 4).unwrap();
        let prior = vertex_prior_to_configurations(&vertex_prior);
        let mc = mc_joint(&g, &AlgorithmSpec::GoToMinId, &prior, 64, 3).unwrap();
        let exact = exact_joint(&g, &AlgorithmSpec::GoToMinId, &vertex_prior)
            .unwrap()
            .map_outcomes(|&x| Configuration::single(x), |&y| Configuration::single(y));
        // Columns are deterministic, so only the prior sampling fluctuates;
        // mutual information is exactly zero in both.
        assert!(mutual_information(&mc).abs() < 1e-12);
        assert!(mutual_information(&exact).abs() < 1e-12);
    }

    #[test]
    fn mc_joint_two_agents_constant_final() {
        let g = path(3);
        let prior = Dist::two_point(
            Configuration::from_positions(&[2, 2]),
            Configuration::from_positions(&[3, 3]),
        )
        .unwrap();
        let joint = mc_joint(&g, &AlgorithmSpec::GoToMinId, &prior, 50, 0).unwrap();
        let cols = joint.col_marginal();
        let all_home = Configuration::from_positions(&[1, 1]);
        assert!((cols.prob(&all_home) - 1.0).abs() < 1e-12);
        assert!(mutual_information(&joint).abs() < 1e-12);
    }

    #[test]
    fn mc_estimate_approaches_exact_mi() {
        let g = path(3);
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.05 };
        let vertex_prior = Dist::uniform(vec![1usize, 2, 3]).unwrap();
        let exact = mutual_information(&exact_joint(&g, &algo, &vertex_prior).unwrap());
        let prior = vertex_prior_to_configurations(&vertex_prior);
        let mc = mc_joint(&g, &algo, &prior, 50_000, 11).unwrap();
        let estimate = mutual_information(&mc);
        assert!(
            (estimate - exact).abs() < 0.01,
            "exact {exact}, estimate {estimate}"
        );
    }

    #[test]
    fn mc_error_shrinks_with_more_samples() {
        let g = path(3);
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.05 };
        let vertex_prior = Dist::uniform(vec![1usize, 2, 3]).unwrap();
        let exact = mutual_information(&exact_joint(&g, &algo, &vertex_prior).unwrap());
        let prior = vertex_prior_to_configurations(&vertex_prior);
        let err_at = |samples: u64| {
            let mc = mc_joint(&g, &algo, &prior, samples, 17).unwrap();
            (mutual_information(&mc) - exact).abs()
        };
        // Plug-in bias scales like 1/N, so a 16x sample increase should
        // clearly beat the small run.
        assert!(err_at(32_000) < err_at(2_000));
    }

    #[test]
    fn split_start_energy_is_the_max_over_agents() {
        let g = path(5);
        let r = crate::simulate::run_multi(&g, &AlgorithmSpec::GoToMinId, &[1, 5], 0).unwrap();
        assert_eq!(
            r.energy,
            g.distance(1, 1).max(g.distance(5, 1)) as u64
        );
        assert!(r.energy >= (g.diameter() / 2) as u64);
    }

    #[test]
    fn lemma_check_on_p5_with_truncated_go_to_min_id() {
        let g = path(5);
        let w = lemma_known_check(&g, &AlgorithmSpec::GoToMinId, 1, 1, 5).unwrap();
        assert_eq!(w.disjoint_prob, 1.0);
        assert_eq!(w.gamma, 0.5);
        assert!((w.eta_bound - 1.0).abs() < 1e-12);
        assert!((w.measured_mi - 1.0).abs() < 1e-9);
        assert!(w.measured_mi >= w.eta_bound - 1e-6);
    }

    #[test]
    fn lemma_check_sees_overlap_at_large_t() {
        // At t >= d(u,v) the hider's reachable sets always intersect.
        let g = path(3);
        let w = lemma_known_check(&g, &AlgorithmSpec::RandomWalkHider { q: 0.2 }, 4, 1, 3)
            .unwrap();
        assert_eq!(w.disjoint_prob, 0.0);
        assert_eq!(w.gamma, -0.5);
    }

    #[test]
    fn lemma_check_sampled_agrees_on_p5() {
        let g = path(5);
        let w =
            lemma_known_check_sampled(&g, &AlgorithmSpec::GoToMinId, 1, 1, 5, 16, 0).unwrap();
        assert_eq!(w.gamma, 0.5);
        assert!((w.measured_mi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lemma_check_rejects_bad_vertices() {
        let g = path(3);
        assert!(matches!(
            lemma_known_check(&g, &AlgorithmSpec::GoToMinId, 1, 2, 2),
            Err(AnalyzeError::BadVertices { .. })
        ));
    }

    #[test]
    fn d_half_on_p5() {
        let g = path(5);
        let r = floor_d_half_experiment(&g, &AlgorithmSpec::GoToMinId, 1, 1, 0).unwrap();
        assert_eq!((r.u, r.v), (1, 5));
        assert_eq!(r.threshold, 2);
        // From u=1: zero moves; from v=5: four moves. Exactly half the mass
        // clears the threshold, and the hiding is perfect.
        assert_eq!(r.prob_at_least, 0.5);
        assert!(r.hiding.uc.abs() < 1e-12);
    }

    #[test]
    fn d_half_two_agents_energy() {
        let g = path(5);
        let r = floor_d_half_experiment(&g, &AlgorithmSpec::GoToMinId, 2, 1, 0).unwrap();
        // All agents at u gives energy 0; all at v gives energy 4.
        assert_eq!(r.prob_at_least, 0.5);
        assert_eq!(r.agents, 2);
    }

    #[test]
    fn parity_probe_on_c4() {
        let g = cycle(4);
        for t in [0u64, 1, 2, 5, 8] {
            let r = bipartite_parity_probe(&g, t).unwrap();
            assert_eq!(r.uc_nonlazy, 1.0, "parity reveals the side at t={t}");
        }
        let r = bipartite_parity_probe(&g, 8).unwrap();
        assert!(r.uc_lazy < 0.99);
        let r = bipartite_parity_probe(&g, 0).unwrap();
        assert_eq!(r.uc_lazy, 1.0); // no hiding happened yet
    }

    #[test]
    fn parity_probe_rejects_odd_cycles() {
        let g = cycle(5);
        assert!(matches!(
            bipartite_parity_probe(&g, 2),
            Err(AnalyzeError::NotBipartite { .. })
        ));
    }

    #[test]
    fn scaling_y1_is_zero() {
        let t = chain_cliques_scaling(&[4], &[1], &AlgorithmSpec::DfsMinId, 3, 2, 5).unwrap();
        assert_eq!(t.rows[0].mean_steps, 0.0);
    }

    #[test]
    fn scaling_grows_with_chain_length() {
        let t =
            chain_cliques_scaling(&[4], &[3, 5, 7], &AlgorithmSpec::DfsMinId, 5, 1, 5).unwrap();
        assert!(t.rows[0].mean_steps < t.rows[1].mean_steps);
        assert!(t.rows[1].mean_steps < t.rows[2].mean_steps);
    }

    #[test]
    fn scaling_csv_shape() {
        let t = chain_cliques_scaling(&[3], &[2], &AlgorithmSpec::DfsMinId, 2, 2, 1).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,y,n,m,trials,mean_steps,std_steps");
        assert!(lines.next().unwrap().starts_with("3,2,8,9,4,"));
    }

    #[test]
    fn truncated_series_reaches_zero_for_go_to_min_id() {
        let g = path(5);
        let prior = Dist::two_point(1usize, 5).unwrap();
        let series =
            truncated_u_series(&g, &AlgorithmSpec::GoToMinId, &prior, 5).unwrap();
        assert_eq!(series[0].1, 1.0); // identity map leaks everything
        assert!(series[5].1.abs() < 1e-12); // both runs have arrived at 1
    }
}
