//! The hiding protocols as pluggable agent behaviors.
//!
//! Each agent sees only a [`LocalView`] per round and answers with an
//! [`AgentDecision`]; resource limits are structural. `GoToMinId` receives
//! the whole graph at construction (declared topology knowledge) and the
//! others are built without it, so they can only learn the graph through
//! ports. `DeterministicNoMemory` decisions are a pure function of the
//! current degree by construction, and only `RandomWalkHider` touches the
//! random stream.

use std::collections::{BTreeMap, VecDeque};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PortLabeledGraph;
use crate::simulate::{self, Trace};

#[derive(Debug, Error, PartialEq)]
pub enum AlgorithmError {
    #[error("termination probability q={0} outside (0, 1/2]")]
    BadTerminationProbability(f64),
    #[error("no movement rule for degree {degree}")]
    RuleMissingDegree { degree: usize },
    #[error("rule sends degree {degree} through invalid port {port}")]
    RulePortOutOfRange { degree: usize, port: usize },
}

/// What an agent may observe in one synchronous round. Vertex ids are
/// readable (nodes are uniquely labeled); no global topology is exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalView {
    pub vertex_id: usize,
    pub degree: usize,
    /// Port through which the agent entered its current vertex; None if it
    /// has not moved since the start.
    pub arrival_port: Option<usize>,
    pub n_hint: Option<usize>,
    pub round: u64,
}

/// One round's outcome: stay put, leave through a port, or finish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentDecision {
    Stay,
    MovePort(usize),
    Terminate,
}

/// Resource declarations for a protocol, mirroring the model's taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resources {
    pub knows_topology: bool,
    pub has_memory: bool,
    pub has_randomness: bool,
    pub knows_n: bool,
}

/// Serializable protocol selector for configs and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum AlgorithmSpec {
    /// Known topology: walk a shortest path to the fixed rendezvous vertex
    /// (vertex 1, the minimum id) and stop.
    #[serde(rename = "go-to-min-id")]
    GoToMinId,
    /// Unknown topology, unlimited memory: explore by DFS over ports, then
    /// return to the minimum-id vertex through the learned map.
    #[serde(rename = "dfs-min-id")]
    DfsMinId,
    /// Unknown topology, no memory, randomized: each round terminate with
    /// probability q, stay with probability 1/2, otherwise move to a
    /// uniformly random neighbor.
    #[serde(rename = "rw-hider")]
    RandomWalkHider { q: f64 },
    /// Unknown topology, no memory, deterministic: a fixed degree -> port
    /// table. Exists to be trapped, not to hide.
    #[serde(rename = "deterministic-no-memory")]
    DeterministicNoMemory {
        #[serde(serialize_with = "serialize_rule")]
        rule: BTreeMap<usize, usize>,
    },
}

/// JSON object keys are strings; render the degree keys of a rule table.
fn serialize_rule<S: serde::Serializer>(
    rule: &BTreeMap<usize, usize>,
    s: S,
) -> Result<S::Ok, S::Error> {
    use serde::Serialize;
    rule.iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect::<BTreeMap<String, usize>>()
        .serialize(s)
}

// Hand-rolled so that parsing stays strict: a tagged enum derive would
// silently drop fields that do not belong to the named kind.
impl<'de> Deserialize<'de> for AlgorithmSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            kind: String,
            #[serde(default)]
            q: Option<f64>,
            #[serde(default)]
            rule: Option<BTreeMap<String, usize>>,
        }
        let raw = Raw::deserialize(d)?;
        let no_q = || -> Result<(), D::Error> {
            match raw.q {
                Some(_) => Err(D::Error::custom(format!(
                    "field `q` does not apply to kind {:?}",
                    raw.kind
                ))),
                None => Ok(()),
            }
        };
        let no_rule = |rule: &Option<_>| -> Result<(), D::Error> {
            match rule {
                Some(_) => Err(D::Error::custom(format!(
                    "field `rule` does not apply to kind {:?}",
                    raw.kind
                ))),
                None => Ok(()),
            }
        };
        match raw.kind.as_str() {
            "go-to-min-id" => {
                no_q()?;
                no_rule(&raw.rule)?;
                Ok(AlgorithmSpec::GoToMinId)
            }
            "dfs-min-id" => {
                no_q()?;
                no_rule(&raw.rule)?;
                Ok(AlgorithmSpec::DfsMinId)
            }
            "rw-hider" => {
                no_rule(&raw.rule)?;
                let q = raw
                    .q
                    .ok_or_else(|| D::Error::custom("kind \"rw-hider\" requires field `q`"))?;
                Ok(AlgorithmSpec::RandomWalkHider { q })
            }
            "deterministic-no-memory" => {
                no_q()?;
                let by_string = raw.rule.ok_or_else(|| {
                    D::Error::custom("kind \"deterministic-no-memory\" requires field `rule`")
                })?;
                let mut rule = BTreeMap::new();
                for (k, v) in by_string {
                    let degree: usize = k
                        .parse()
                        .map_err(|_| D::Error::custom(format!("bad degree key {k:?}")))?;
                    rule.insert(degree, v);
                }
                Ok(AlgorithmSpec::DeterministicNoMemory { rule })
            }
            other => Err(D::Error::custom(format!("unknown algorithm kind {other:?}"))),
        }
    }
}

impl AlgorithmSpec {
    pub fn resources(&self) -> Resources {
        match self {
            AlgorithmSpec::GoToMinId => Resources {
                knows_topology: true,
                has_memory: true,
                has_randomness: false,
                knows_n: true,
            },
            AlgorithmSpec::DfsMinId => Resources {
                knows_topology: false,
                has_memory: true,
                has_randomness: false,
                knows_n: false,
            },
            AlgorithmSpec::RandomWalkHider { .. } => Resources {
                knows_topology: false,
                has_memory: false,
                has_randomness: true,
                knows_n: true,
            },
            AlgorithmSpec::DeterministicNoMemory { .. } => Resources {
                knows_topology: false,
                has_memory: false,
                has_randomness: false,
                knows_n: true,
            },
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !self.resources().has_randomness
    }

    /// Whether the exact law of the final position is computable.
    pub fn supports_exact_law(&self) -> bool {
        !matches!(self, AlgorithmSpec::DeterministicNoMemory { .. })
    }
}

/// A protocol instance driving a single agent, one decision per round.
pub trait Agent {
    fn decide(
        &mut self,
        view: &LocalView,
        rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AlgorithmError>;
}

/// Builds an agent for the given spec. Only `GoToMinId` inspects the graph.
pub fn instantiate(
    spec: &AlgorithmSpec,
    g: &PortLabeledGraph,
) -> Result<Box<dyn Agent>, AlgorithmError> {
    match spec {
        AlgorithmSpec::GoToMinId => Ok(Box::new(GoToMinIdAgent::new(g))),
        AlgorithmSpec::DfsMinId => Ok(Box::new(DfsMinIdAgent::new())),
        AlgorithmSpec::RandomWalkHider { q } => {
            if !(*q > 0.0 && *q <= 0.5) {
                return Err(AlgorithmError::BadTerminationProbability(*q));
            }
            Ok(Box::new(RandomWalkHiderAgent { q: *q }))
        }
        AlgorithmSpec::DeterministicNoMemory { rule } => {
            Ok(Box::new(DeterministicNoMemoryAgent { rule: rule.clone() }))
        }
    }
}

/// Single step of the randomized hider: terminate with probability q, stay
/// with probability 1/2, otherwise move through a uniformly random port.
/// Branches are evaluated in that order, so a run may end with zero moves.
pub fn random_walk_hider_step(
    view: &LocalView,
    q: f64,
    rng: &mut dyn RngCore,
) -> Result<AgentDecision, AlgorithmError> {
    if !(q > 0.0 && q <= 0.5) {
        return Err(AlgorithmError::BadTerminationProbability(q));
    }
    let draw: f64 = rand::Rng::random(&mut *rng);
    if draw < q {
        Ok(AgentDecision::Terminate)
    } else if draw < q + 0.5 {
        Ok(AgentDecision::Stay)
    } else if view.degree == 0 {
        Ok(AgentDecision::Stay) // isolated vertex: nowhere to move
    } else {
        let port = rand::Rng::random_range(&mut *rng, 1..=view.degree);
        Ok(AgentDecision::MovePort(port))
    }
}

/// Single step of a deterministic memoryless agent: look the current degree
/// up in the rule table and move through that port. Never terminates.
pub fn deterministic_no_memory_step(
    view: &LocalView,
    rule: &BTreeMap<usize, usize>,
) -> Result<AgentDecision, AlgorithmError> {
    let &port = rule
        .get(&view.degree)
        .ok_or(AlgorithmError::RuleMissingDegree {
            degree: view.degree,
        })?;
    if port < 1 || port > view.degree {
        return Err(AlgorithmError::RulePortOutOfRange {
            degree: view.degree,
            port,
        });
    }
    Ok(AgentDecision::MovePort(port))
}

/// Runs the known-topology protocol from `start`: shortest path to vertex 1.
pub fn go_to_min_id(g: &PortLabeledGraph, start: usize) -> Trace {
    simulate::run_single(g, &AlgorithmSpec::GoToMinId, start, 0)
        .expect("go-to-min-id terminates within the diameter")
        .per_agent
        .remove(0)
}

/// Runs the unlimited-memory protocol from `start`: port-level DFS of the
/// whole graph, then walk to vertex 1 through the learned map.
pub fn dfs_min_id(g: &PortLabeledGraph, start: usize) -> Trace {
    simulate::run_single(g, &AlgorithmSpec::DfsMinId, start, 0)
        .expect("dfs-min-id terminates within O(m) moves")
        .per_agent
        .remove(0)
}

struct GoToMinIdAgent {
    /// Port toward vertex 1 per vertex; None at vertex 1 itself. Shortest
    /// paths with lexicographically smallest next-vertex tie-breaking.
    next_hop: Vec<Option<usize>>,
}

impl GoToMinIdAgent {
    fn new(g: &PortLabeledGraph) -> Self {
        let dist = g.bfs_distances(1);
        let mut next_hop = vec![None; g.n() + 1];
        for v in 2..=g.n() {
            let next = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| dist[w] + 1 == dist[v])
                .min()
                .expect("connected graph has a parent toward vertex 1");
            next_hop[v] = g.port_to(v, next);
        }
        GoToMinIdAgent { next_hop }
    }
}

impl Agent for GoToMinIdAgent {
    fn decide(
        &mut self,
        view: &LocalView,
        _rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AlgorithmError> {
        Ok(match self.next_hop[view.vertex_id] {
            None => AgentDecision::Terminate,
            Some(port) => AgentDecision::MovePort(port),
        })
    }
}

struct RandomWalkHiderAgent {
    q: f64,
}

impl Agent for RandomWalkHiderAgent {
    fn decide(
        &mut self,
        view: &LocalView,
        rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AlgorithmError> {
        random_walk_hider_step(view, self.q, rng)
    }
}

struct DeterministicNoMemoryAgent {
    rule: BTreeMap<usize, usize>,
}

impl Agent for DeterministicNoMemoryAgent {
    fn decide(
        &mut self,
        view: &LocalView,
        _rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AlgorithmError> {
        deterministic_no_memory_step(view, &self.rule)
    }
}

/// What the DFS agent remembers about a vertex it has seen.
struct KnownVertex {
    /// learned[p-1] = Some(w) once the endpoint of port p is known.
    learned: Vec<Option<usize>>,
    /// Port back to the DFS tree parent; None at the exploration root.
    parent_port: Option<usize>,
}

enum DfsPhase {
    Start,
    /// Moved out of `from` through `port`; the landing vertex decides
    /// whether this becomes a tree edge or a probe to retreat from.
    Probing { from: usize, port: usize },
    /// Moving back after probing an already-known vertex.
    Retreating { to: usize },
    /// Moving back to the tree parent after exhausting a vertex's ports.
    Backtracking { to: usize },
    /// Exploration finished; walking the learned shortest path to vertex 1.
    Homing { ports: VecDeque<usize> },
}

/// Iterative DFS over ports with unlimited memory. Probes ports in
/// ascending order, recognizes already-visited vertices by id and retreats
/// through the arrival port, and backtracks along tree edges. Every probe
/// costs at most two moves and every port is probed at most once, so the
/// whole run takes at most 4m + n moves.
struct DfsMinIdAgent {
    known: BTreeMap<usize, KnownVertex>,
    phase: DfsPhase,
}

impl DfsMinIdAgent {
    fn new() -> Self {
        DfsMinIdAgent {
            known: BTreeMap::new(),
            phase: DfsPhase::Start,
        }
    }

    fn register(&mut self, v: usize, degree: usize, parent_port: Option<usize>) {
        self.known.entry(v).or_insert(KnownVertex {
            learned: vec![None; degree],
            parent_port,
        });
    }

    fn record(&mut self, v: usize, port: usize, neighbor: usize) {
        let kv = self.known.get_mut(&v).expect("vertex registered");
        kv.learned[port - 1] = Some(neighbor);
    }

    /// Next action at vertex `v`: probe the lowest unknown port, else
    /// backtrack, else (at the root) switch to homing.
    fn continue_at(&mut self, v: usize) -> AgentDecision {
        let kv = &self.known[&v];
        if let Some(p) = kv.learned.iter().position(|l| l.is_none()) {
            let port = p + 1;
            self.phase = DfsPhase::Probing { from: v, port };
            return AgentDecision::MovePort(port);
        }
        match kv.parent_port {
            Some(port) => {
                let parent = kv.learned[port - 1].expect("tree parent learned on arrival");
                self.phase = DfsPhase::Backtracking { to: parent };
                AgentDecision::MovePort(port)
            }
            None => {
                // Back at the root with every port of every discovered
                // vertex learned: the map is complete.
                let ports = self.shortest_port_path(v, 1);
                self.phase = DfsPhase::Homing { ports };
                self.next_homing_move(v)
            }
        }
    }

    fn next_homing_move(&mut self, at: usize) -> AgentDecision {
        debug_assert!(self.known.contains_key(&at));
        match &mut self.phase {
            DfsPhase::Homing { ports } => match ports.pop_front() {
                Some(port) => AgentDecision::MovePort(port),
                None => AgentDecision::Terminate,
            },
            _ => unreachable!("homing move outside homing phase"),
        }
    }

    /// BFS in the learned map from `from` to `to`, smallest next-vertex id
    /// on ties; returns the port sequence to walk.
    fn shortest_port_path(&self, from: usize, to: usize) -> VecDeque<usize> {
        let mut prev: BTreeMap<usize, (usize, usize)> = BTreeMap::new(); // v -> (parent, port at parent)
        let mut queue = VecDeque::from([from]);
        let mut seen: BTreeMap<usize, bool> = BTreeMap::new();
        seen.insert(from, true);
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            let kv = &self.known[&v];
            // learned is complete here; iterate ports ascending so ties
            // resolve to the smallest port, then fix min-id ordering below.
            let mut nexts: Vec<(usize, usize)> = kv
                .learned
                .iter()
                .enumerate()
                .map(|(i, l)| (l.expect("complete map"), i + 1))
                .collect();
            nexts.sort_unstable();
            for (w, port) in nexts {
                if seen.insert(w, true).is_none() {
                    prev.insert(w, (v, port));
                    queue.push_back(w);
                }
            }
        }
        let mut ports = VecDeque::new();
        let mut v = to;
        while v != from {
            let (parent, port) = prev[&v];
            ports.push_front(port);
            v = parent;
        }
        ports
    }
}

impl Agent for DfsMinIdAgent {
    fn decide(
        &mut self,
        view: &LocalView,
        _rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AlgorithmError> {
        let v = view.vertex_id;
        let phase = std::mem::replace(&mut self.phase, DfsPhase::Start);
        let decision = match phase {
            DfsPhase::Start => {
                self.register(v, view.degree, None);
                self.continue_at(v)
            }
            DfsPhase::Probing { from, port } => {
                let arrival = view.arrival_port.expect("probing arrives through a port");
                self.record(from, port, v);
                if self.known.contains_key(&v) {
                    // Non-tree edge: remember the far side too, then retreat.
                    self.record(v, arrival, from);
                    self.phase = DfsPhase::Retreating { to: from };
                    AgentDecision::MovePort(arrival)
                } else {
                    self.register(v, view.degree, Some(arrival));
                    self.record(v, arrival, from);
                    self.continue_at(v)
                }
            }
            DfsPhase::Retreating { to } | DfsPhase::Backtracking { to } => {
                debug_assert_eq!(v, to, "retreat/backtrack lands where it started");
                self.continue_at(v)
            }
            DfsPhase::Homing { ports } => {
                self.phase = DfsPhase::Homing { ports };
                self.next_homing_move(v)
            }
        };
        Ok(decision)
    }
}
