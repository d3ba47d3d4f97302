//! Synchronous-round execution engine for k agents on a graph.
//!
//! Agents run independently with derived per-agent seeds; a run is a pure
//! function of (graph, algorithm, starts, seed). Rounds count decision
//! epochs: an agent that draws Terminate on its first decision has a legal
//! zero-round, zero-move run.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{instantiate, Agent, AgentDecision, AlgorithmError, AlgorithmSpec, LocalView};
use crate::graph::PortLabeledGraph;
use crate::infotheory::Dist;
use crate::markov::algorithm_walk_matrix;

/// Default cap on decision epochs per agent.
pub const DEFAULT_ROUND_CAP: u64 = 1_000_000;

/// Tail mass below which the geometric mixture of the randomized hider is
/// truncated (and renormalized) when computing exact final laws.
pub const DEFAULT_TAIL_EPS: f64 = 1e-9;

/// Witness that a memoryless deterministic agent is cycling: it revisited
/// `vertex`, and with no memory and no randomness the stretch between
/// `first_round` and `repeat_round` repeats forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopCertificate {
    pub vertex: usize,
    pub first_round: u64,
    pub repeat_round: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("agent did not terminate within {cap} rounds")]
    NonTermination {
        cap: u64,
        certificate: Option<LoopCertificate>,
    },
    #[error("invalid start vertex {vertex}")]
    InvalidStart { vertex: usize },
    #[error("agent moved through invalid port {port} at vertex {vertex}")]
    BadMove { vertex: usize, port: usize },
    #[error("algorithm has no final law: {0}")]
    UnsupportedAlgorithm(String),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

/// Per-agent record of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    /// Vertex at the start and after each round.
    pub visited: Vec<usize>,
    /// Edge traversals (the energy currency).
    pub moves: u64,
    /// Decision epochs survived before terminating.
    pub rounds: u64,
    pub terminated: bool,
}

/// Multiset of agent positions: how many of the k indistinguishable agents
/// sit at each vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    counts: BTreeMap<usize, usize>,
}

impl Configuration {
    pub fn from_positions(positions: &[usize]) -> Self {
        let mut counts = BTreeMap::new();
        for &v in positions {
            *counts.entry(v).or_insert(0) += 1;
        }
        Configuration { counts }
    }

    pub fn single(vertex: usize) -> Self {
        Self::from_positions(&[vertex])
    }

    pub fn count(&self, vertex: usize) -> usize {
        self.counts.get(&vertex).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }
}

/// Outcome of one multi-agent run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub initial: Configuration,
    #[serde(rename = "final")]
    pub final_config: Configuration,
    pub per_agent: Vec<Trace>,
    /// Max moves over agents: the energy complexity of the run.
    pub energy: u64,
    /// Max rounds over agents.
    pub makespan: u64,
}

/// Stable per-agent seed derivation (SplitMix64 over master and index), so
/// independent agent streams are reproducible across runs and versions.
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct AgentOutcome {
    final_vertex: usize,
    moves: u64,
    rounds: u64,
    visited: Option<Vec<usize>>,
    terminated: bool,
}

/// Drives one agent to termination or the round cap.
///
/// With `detect_loops` (memoryless deterministic agents) a revisited vertex
/// is proof of non-termination and the run stops early with a certificate.
fn drive(
    g: &PortLabeledGraph,
    agent: &mut dyn Agent,
    start: usize,
    rng: &mut ChaCha8Rng,
    cap: u64,
    detect_loops: bool,
    record: bool,
) -> Result<AgentOutcome, SimulateError> {
    if !g.contains_vertex(start) {
        return Err(SimulateError::InvalidStart { vertex: start });
    }
    let mut current = start;
    let mut arrival: Option<usize> = None;
    let mut moves = 0u64;
    let mut rounds = 0u64;
    let mut visited = record.then(|| vec![start]);
    let mut first_seen: BTreeMap<usize, u64> = BTreeMap::new();
    if detect_loops {
        first_seen.insert(start, 0);
    }
    loop {
        if rounds >= cap {
            return Err(SimulateError::NonTermination {
                cap,
                certificate: None,
            });
        }
        let view = LocalView {
            vertex_id: current,
            degree: g.degree(current),
            arrival_port: arrival,
            n_hint: Some(g.n()),
            round: rounds,
        };
        match agent.decide(&view, rng)? {
            AgentDecision::Terminate => {
                return Ok(AgentOutcome {
                    final_vertex: current,
                    moves,
                    rounds,
                    visited,
                    terminated: true,
                });
            }
            AgentDecision::Stay => {
                rounds += 1;
                if let Some(v) = visited.as_mut() {
                    v.push(current);
                }
            }
            AgentDecision::MovePort(p) => {
                if p < 1 || p > g.degree(current) {
                    return Err(SimulateError::BadMove {
                        vertex: current,
                        port: p,
                    });
                }
                arrival = Some(g.arrival_port(current, p));
                current = g.neighbor_via_port(current, p);
                moves += 1;
                rounds += 1;
                if let Some(v) = visited.as_mut() {
                    v.push(current);
                }
                if detect_loops {
                    if let Some(&first_round) = first_seen.get(&current) {
                        return Err(SimulateError::NonTermination {
                            cap,
                            certificate: Some(LoopCertificate {
                                vertex: current,
                                first_round,
                                repeat_round: rounds,
                            }),
                        });
                    }
                    first_seen.insert(current, rounds);
                }
            }
        }
    }
}

fn detect_loops_for(algo: &AlgorithmSpec) -> bool {
    matches!(algo, AlgorithmSpec::DeterministicNoMemory { .. })
}

/// Runs one agent with the default round cap.
pub fn run_single(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
    seed: u64,
) -> Result<RunResult, SimulateError> {
    run_multi_capped(g, algo, &[start], seed, DEFAULT_ROUND_CAP)
}

/// Runs k agents, one per start vertex, each with its own derived seed.
pub fn run_multi(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    starts: &[usize],
    seed: u64,
) -> Result<RunResult, SimulateError> {
    run_multi_capped(g, algo, starts, seed, DEFAULT_ROUND_CAP)
}

pub fn run_multi_capped(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    starts: &[usize],
    seed: u64,
    cap: u64,
) -> Result<RunResult, SimulateError> {
    if starts.is_empty() {
        return Err(SimulateError::InvalidStart { vertex: 0 });
    }
    let detect = detect_loops_for(algo);
    let mut traces = Vec::with_capacity(starts.len());
    let mut finals = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let mut agent = instantiate(algo, g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i as u64));
        let out = drive(g, agent.as_mut(), start, &mut rng, cap, detect, true)?;
        finals.push(out.final_vertex);
        traces.push(Trace {
            visited: out.visited.expect("recording enabled"),
            moves: out.moves,
            rounds: out.rounds,
            terminated: out.terminated,
        });
    }
    let energy = traces.iter().map(|t| t.moves).max().unwrap_or(0);
    let makespan = traces.iter().map(|t| t.rounds).max().unwrap_or(0);
    Ok(RunResult {
        initial: Configuration::from_positions(starts),
        final_config: Configuration::from_positions(&finals),
        per_agent: traces,
        energy,
        makespan,
    })
}

/// Runs one agent with a hard stop after `t` rounds: the truncated
/// protocol whose time-t state the reachable-set lemma talks about.
/// Reaching the cutoff is a normal outcome here (`terminated` stays false),
/// not an error.
pub fn run_truncated(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
    seed: u64,
    t: u64,
) -> Result<Trace, SimulateError> {
    let mut agent = instantiate(algo, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 0));
    drive_partial(g, agent.as_mut(), start, &mut rng, t)
}

/// Like `drive` but stops quietly after `t` rounds.
fn drive_partial(
    g: &PortLabeledGraph,
    agent: &mut dyn Agent,
    start: usize,
    rng: &mut ChaCha8Rng,
    t: u64,
) -> Result<Trace, SimulateError> {
    if !g.contains_vertex(start) {
        return Err(SimulateError::InvalidStart { vertex: start });
    }
    let mut current = start;
    let mut arrival: Option<usize> = None;
    let mut moves = 0u64;
    let mut rounds = 0u64;
    let mut visited = vec![start];
    while rounds < t {
        let view = LocalView {
            vertex_id: current,
            degree: g.degree(current),
            arrival_port: arrival,
            n_hint: Some(g.n()),
            round: rounds,
        };
        match agent.decide(&view, rng)? {
            AgentDecision::Terminate => {
                return Ok(Trace {
                    visited,
                    moves,
                    rounds,
                    terminated: true,
                });
            }
            AgentDecision::Stay => {
                rounds += 1;
                visited.push(current);
            }
            AgentDecision::MovePort(p) => {
                if p < 1 || p > g.degree(current) {
                    return Err(SimulateError::BadMove {
                        vertex: current,
                        port: p,
                    });
                }
                arrival = Some(g.arrival_port(current, p));
                current = g.neighbor_via_port(current, p);
                moves += 1;
                rounds += 1;
                visited.push(current);
            }
        }
    }
    Ok(Trace {
        visited,
        moves,
        rounds,
        terminated: false,
    })
}

/// Final configuration only, skipping trace allocation; the fast path for
/// Monte Carlo estimators.
pub(crate) fn sample_final_config(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    starts: &[usize],
    seed: u64,
    cap: u64,
) -> Result<Configuration, SimulateError> {
    let detect = detect_loops_for(algo);
    let mut finals = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let mut agent = instantiate(algo, g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i as u64));
        let out = drive(g, agent.as_mut(), start, &mut rng, cap, detect, false)?;
        finals.push(out.final_vertex);
    }
    Ok(Configuration::from_positions(&finals))
}

/// Exact law of the final vertex of a single agent started at `start`.
///
/// Deterministic protocols give a point mass (computed by actually running
/// them). The randomized hider's law is the geometric mixture over its
/// survival-conditioned movement kernel, truncated once the remaining tail
/// mass drops below `DEFAULT_TAIL_EPS` and renormalized.
pub fn exact_final_law(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
) -> Result<Dist<usize>, SimulateError> {
    exact_final_law_with_tail(g, algo, start, DEFAULT_TAIL_EPS)
}

pub fn exact_final_law_with_tail(
    g: &PortLabeledGraph,
    algo: &AlgorithmSpec,
    start: usize,
    tail_eps: f64,
) -> Result<Dist<usize>, SimulateError> {
    if !g.contains_vertex(start) {
        return Err(SimulateError::InvalidStart { vertex: start });
    }
    match algo {
        AlgorithmSpec::GoToMinId | AlgorithmSpec::DfsMinId => {
            let result = run_single(g, algo, start, 0)?;
            let last = *result.per_agent[0].visited.last().expect("nonempty trace");
            Ok(Dist::point(last))
        }
        AlgorithmSpec::RandomWalkHider { q } => {
            let q = *q;
            let kernel = algorithm_walk_matrix(g, q)
                .map_err(|_| AlgorithmError::BadTerminationProbability(q))?;
            let n = g.n();
            let mut mu = vec![0.0; n];
            mu[start - 1] = 1.0;
            let mut acc = vec![0.0; n];
            let mut survive = 1.0;
            // Stopped mass after round t is q (1-q)^t at the kernel's
            // t-step pushforward; remaining tail after adding round t is
            // (1-q)^{t+1}.
            loop {
                for (a, &m) in acc.iter_mut().zip(mu.iter()) {
                    *a += q * survive * m;
                }
                survive *= 1.0 - q;
                if survive < tail_eps {
                    break;
                }
                mu = kernel.apply(&mu);
            }
            let total: f64 = acc.iter().sum();
            for a in acc.iter_mut() {
                *a /= total;
            }
            Ok(crate::markov::dense_to_dist(&acc))
        }
        AlgorithmSpec::DeterministicNoMemory { .. } => Err(SimulateError::UnsupportedAlgorithm(
            "deterministic memoryless agents never terminate".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_family, GraphFamilySpec};
    use crate::markov::tv_distance;

    fn path(n: usize) -> PortLabeledGraph {
        gen_family(&GraphFamilySpec::Path { n }).unwrap()
    }

    #[test]
    fn go_to_min_id_run() {
        let g = path(3);
        let r = run_single(&g, &AlgorithmSpec::GoToMinId, 3, 0).unwrap();
        assert_eq!(r.final_config, Configuration::single(1));
        assert_eq!(r.energy, 2);
        assert_eq!(r.makespan, 2);
        assert_eq!(r.per_agent[0].visited, vec![3, 2, 1]);
    }

    #[test]
    fn double_star_trap_yields_certificate() {
        let g = gen_family(&GraphFamilySpec::DoubleStar { d: 3, p: 2 }).unwrap();
        let rule: BTreeMap<usize, usize> = [(1, 1), (4, 2)].into_iter().collect();
        let algo = AlgorithmSpec::DeterministicNoMemory { rule };
        for start in g.vertices() {
            let err = run_single(&g, &algo, start, 0).unwrap_err();
            match err {
                SimulateError::NonTermination {
                    certificate: Some(cert),
                    ..
                } => {
                    assert!(
                        cert.repeat_round <= 2 * g.n() as u64,
                        "from {start}: loop found only at round {}",
                        cert.repeat_round
                    );
                }
                other => panic!("expected loop certificate from {start}, got {other:?}"),
            }
        }
    }

    #[test]
    fn hider_round_count_is_geometric() {
        let g = path(2);
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.25 };
        let trials = 100_000u64;
        let mut total_rounds = 0u64;
        for t in 0..trials {
            let r = run_single(&g, &algo, 1, t).unwrap();
            assert!(r.per_agent[0].terminated);
            total_rounds += r.per_agent[0].rounds;
        }
        let mean = total_rounds as f64 / trials as f64;
        // Rounds survived before termination ~ Geometric(q): mean (1-q)/q = 3.
        assert!((mean - 3.0).abs() < 0.05, "mean rounds {mean}");
    }

    #[test]
    fn multi_agent_runs() {
        let g = path(3);
        let r = run_multi(&g, &AlgorithmSpec::GoToMinId, &[2, 3], 0).unwrap();
        assert_eq!(r.final_config.count(1), 2);
        assert_eq!(r.energy, 2);

        let r = run_multi(&g, &AlgorithmSpec::GoToMinId, &[1, 1, 1], 0).unwrap();
        assert_eq!(r.energy, 0);

        let c4 = gen_family(&GraphFamilySpec::Cycle { n: 4 }).unwrap();
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.25 };
        for seed in 0..50 {
            let r = run_multi(&c4, &algo, &[1, 2, 3], seed).unwrap();
            assert_eq!(r.final_config.total(), 3);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let g = gen_family(&GraphFamilySpec::Cycle { n: 6 }).unwrap();
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.1 };
        let a = run_multi(&g, &algo, &[2, 5], 1234).unwrap();
        let b = run_multi(&g, &algo, &[2, 5], 1234).unwrap();
        assert_eq!(a, b);
        let c = run_multi(&g, &algo, &[2, 5], 1235).unwrap();
        assert_ne!(a, c); // overwhelmingly likely
    }

    #[test]
    fn traces_cross_real_edges() {
        let g = gen_family(&GraphFamilySpec::ChainOfCliques {
            x: 3,
            y: 2,
            seed: Some(9),
        })
        .unwrap();
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.05 };
        for seed in 0..20 {
            let r = run_single(&g, &algo, 2, seed).unwrap();
            for w in r.per_agent[0].visited.windows(2) {
                assert!(
                    w[0] == w[1] || g.neighbors(w[0]).contains(&w[1]),
                    "step {w:?} is not a stay or an edge"
                );
            }
            assert!(r.per_agent[0].moves <= r.per_agent[0].rounds);
        }
    }

    #[test]
    fn exact_law_point_masses() {
        let g = path(4);
        for algo in [AlgorithmSpec::GoToMinId, AlgorithmSpec::DfsMinId] {
            for start in g.vertices() {
                let law = exact_final_law(&g, &algo, start).unwrap();
                assert_eq!(law.prob(&1), 1.0, "{algo:?} from {start}");
            }
        }
    }

    #[test]
    fn exact_law_k2_closed_form() {
        // Two-state chain: stay s = (1/2)/(1-q), lambda = 2s - 1, and the
        // geometric mixture gives p(start) = 1/2 + q / (2 (1 - (1-q) lambda)).
        let g = path(2);
        let q = 0.25;
        let law = exact_final_law(&g, &AlgorithmSpec::RandomWalkHider { q }, 1).unwrap();
        let s = 0.5 / (1.0 - q);
        let lambda = 2.0 * s - 1.0;
        let expected = 0.5 + q / (2.0 * (1.0 - (1.0 - q) * lambda));
        assert!((expected - 2.0 / 3.0).abs() < 1e-12);
        assert!((law.prob(&1) - expected).abs() < 1e-9);
        assert!((law.prob(&2) - (1.0 - expected)).abs() < 1e-9);
    }

    #[test]
    fn exact_law_matches_monte_carlo() {
        let g = path(2);
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.25 };
        let law = exact_final_law(&g, &algo, 1).unwrap();
        let samples = 1_000_000u64;
        let mut hits = 0u64;
        for t in 0..samples {
            let c = sample_final_config(&g, &algo, &[1], t, DEFAULT_ROUND_CAP).unwrap();
            if c.count(1) == 1 {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / samples as f64;
        let empirical = Dist::new(
            [(1usize, p_hat), (2usize, 1.0 - p_hat)]
                .into_iter()
                .collect(),
        )
        .unwrap();
        let tv = tv_distance(&law, &empirical);
        assert!(tv < 0.005);
        // Two outcomes, so TV = |p_hat - p| and 3 sigma of the estimator
        // bounds it.
        let p = law.prob(&1);
        let three_sigma = 3.0 * (p * (1.0 - p) / samples as f64).sqrt();
        assert!(tv <= three_sigma, "TV {tv} above 3 sigma {three_sigma}");
    }

    #[test]
    fn tail_truncation_is_converged() {
        let g = gen_family(&GraphFamilySpec::Cycle { n: 5 }).unwrap();
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.01 };
        let coarse = exact_final_law_with_tail(&g, &algo, 1, DEFAULT_TAIL_EPS).unwrap();
        let fine = exact_final_law_with_tail(&g, &algo, 1, DEFAULT_TAIL_EPS / 2.0).unwrap();
        assert!(tv_distance(&coarse, &fine) < 1e-8);
    }

    #[test]
    fn no_final_law_for_trapped_agents() {
        let g = path(2);
        let rule: BTreeMap<usize, usize> = [(1, 1)].into_iter().collect();
        let err =
            exact_final_law(&g, &AlgorithmSpec::DeterministicNoMemory { rule }, 1).unwrap_err();
        assert!(matches!(err, SimulateError::UnsupportedAlgorithm(_)));
    }

    #[test]
    fn zero_round_runs_are_legal() {
        // Force Terminate on the very first decision by seed search.
        let g = path(2);
        let algo = AlgorithmSpec::RandomWalkHider { q: 0.5 };
        let found = (0..200u64).find_map(|seed| {
            let r = run_single(&g, &algo, 1, seed).unwrap();
            (r.per_agent[0].rounds == 0).then_some(r)
        });
        let r = found.expect("q=1/2 terminates immediately half the time");
        assert_eq!(r.per_agent[0].moves, 0);
        assert_eq!(r.final_config, Configuration::single(1));
    }

    #[test]
    fn run_result_serializes_with_final_key() {
        let g = path(2);
        let r = run_single(&g, &AlgorithmSpec::GoToMinId, 2, 0).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"final\""));
        let back: RunResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
