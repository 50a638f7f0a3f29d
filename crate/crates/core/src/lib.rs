//! Distributed linear-quadratic consensus for networks of single
//! integrators.
//!
//! The library covers both sides of the gain-design trade-off:
//!
//! - **Centralized** ([`centralized`]): the optimal diffusive gain `g*` for
//!   a cost `J = integral of x^T L W L x + u^T R u`, computed from two
//!   singular Lyapunov equations. Needs the whole Laplacian and the whole
//!   initial state.
//! - **Decentralized** ([`tracking`], [`protocol`]): each agent samples its
//!   neighborhood average every `T` time units and runs a discounted LQ
//!   tracking law against the held sample. The gains come from one scalar
//!   Riccati equation that every agent can solve locally, and the sampled
//!   closed loop `x((k+1)T) = Gamma x(kT)` provably reaches consensus.
//!
//! Supporting modules: [`graph`] for connected simple graphs and their
//! matrices, [`numerics`] for the dense kernels, [`costs`] for cost
//! functionals, and [`cli`] for the scenario front end.

pub mod centralized;
pub mod cli;
pub mod costs;
pub mod graph;
pub mod numerics;
pub mod protocol;
pub mod tracking;

pub use centralized::{solve_centralized, CentralizedOutcome, CentralizedSolution};
pub use costs::{cost_neighbor_average, cost_relative_disagreement, CostSpec, ScalarWeights};
pub use graph::{build_graph, derive_matrices, is_connected, Graph, GraphMatrices};
pub use protocol::{
    consensus_certificate, disagreement, gamma_matrix, simulate_protocol, ConsensusCertificate,
    ProtocolConfig, SimulationTrace,
};
pub use tracking::{scalar_agent_gains, solve_tracking, AgentGains, TrackingProblem, TrackingSolution};
