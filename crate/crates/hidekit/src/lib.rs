//! hidekit: simulation and analysis of location-hiding protocols for mobile
//! agents on port-labeled graphs.
//!
//! An agent (or a set of indistinguishable agents) starts at vertices drawn
//! from a prior distribution, runs a hiding protocol for some number of
//! synchronous rounds, and an adversary who sees only the final configuration
//! tries to infer the initial one. Hiding quality is quantified by the
//! uncertainty coefficient U(X0;XT) = I(X0;XT) / H(X0).
//!
//! Modules:
//! - [`graph`]: port-labeled graphs, validation, BFS metrics, and the
//!   benchmark/adversarial generator families.
//! - [`infotheory`]: exact finite-alphabet information measures in bits.
//! - [`markov`]: lazy random walks, distribution propagation, total
//!   variation, mixing times.
//! - [`algorithms`]: the hiding protocols as pluggable agent behaviors with
//!   enforced resource limits.
//! - [`simulate`]: the synchronous-round execution engine.
//! - [`analyze`]: the adversary's side; joint laws, hiding reports, and the
//!   lower-bound experiments.

pub mod algorithms;
pub mod analyze;
pub mod graph;
pub mod infotheory;
pub mod markov;
pub mod simulate;
