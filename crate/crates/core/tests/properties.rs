//! Property-based invariants over randomized inputs.

mod common;

use nalgebra::DVector;
use proptest::prelude::*;

use common::{random_connected_graph, rng};
use netlq::graph::{derive_matrices, parse_edge_list};
use netlq::protocol::{disagreement, gamma_matrix};

proptest! {
    /// max(x) - min(x) is the largest pairwise distance.
    #[test]
    fn disagreement_is_max_pairwise_distance(xs in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let x = DVector::from_vec(xs.clone());
        let mut oracle = 0.0f64;
        for a in &xs {
            for b in &xs {
                oracle = oracle.max((a - b).abs());
            }
        }
        prop_assert!((disagreement(&x) - oracle).abs() <= 1e-9 * oracle.max(1.0));
    }

    /// The one-period map fixes the all-ones vector for any admissible
    /// gain and sampling period, on any connected graph.
    #[test]
    fn one_period_map_preserves_consensus(seed in any::<u64>(), g in -10.0f64..-0.01, t in 0.01f64..20.0) {
        let graph = random_connected_graph(&mut rng(seed), 12);
        let m = derive_matrices(&graph).unwrap();
        let gamma = gamma_matrix(g, t, &m).unwrap();
        let ones = DVector::from_element(m.node_count(), 1.0);
        prop_assert!((&gamma * &ones - &ones).amax() < 1e-12);
    }

    /// Formatting a graph as an edge list and reparsing reproduces it.
    #[test]
    fn edge_list_round_trips(seed in any::<u64>()) {
        let graph = random_connected_graph(&mut rng(seed), 12);
        let mut text = format!("{}\n", graph.node_count());
        for (i, j) in graph.edges() {
            text.push_str(&format!("{i} {j}\n"));
        }
        let reparsed = parse_edge_list(&text).unwrap();
        prop_assert_eq!(graph, reparsed);
    }
}
