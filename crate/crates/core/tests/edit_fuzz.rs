use causeway_core::knowledge::{validate_edit, EditOp, GraphEdit, GraphHistory, RejectionCode};
use causeway_core::model::{CausalGraph, EdgeRecord, Provenance};
use proptest::prelude::*;

const NODES: [&str; 5] = ["a", "b", "c", "d", "e"];

fn base() -> CausalGraph {
    CausalGraph::from_edges(
        NODES.iter().map(|s| s.to_string()).collect(),
        vec![EdgeRecord::manual("a", "b", 0.5), EdgeRecord::manual("b", "c", -0.4)],
        Provenance::default(),
    )
    .unwrap()
}

fn arb_edit() -> impl Strategy<Value = GraphEdit> {
    (0usize..4, 0usize..6, 0usize..6, -2.0f64..2.0).prop_map(|(kind, s, t, w)| {
        // index 5 names a node that does not exist
        let name = |i: usize| NODES.get(i).map_or("zz".to_string(), |n| n.to_string());
        let (source, target) = (name(s), name(t));
        let op = match kind {
            0 => EditOp::AddEdge { source, target, weight: Some(w) },
            1 => EditOp::RemoveEdge { source, target },
            2 => EditOp::ReverseEdge { source, target },
            _ => EditOp::SetWeight { source, target, weight: w },
        };
        GraphEdit { op, author: "fuzz".into(), timestamp: 0.0 }
    })
}

proptest! {
    #[test]
    fn edits_keep_the_graph_acyclic_and_replayable(edits in prop::collection::vec(arb_edit(), 0..40)) {
        let mut h = GraphHistory::new(base());
        for e in edits {
            let before = h.graph().clone();
            let version = h.version();
            match h.apply(e.clone(), None) {
                Ok(v) => prop_assert_eq!(v, version + 1),
                Err(r) => {
                    prop_assert_eq!(h.graph(), &before);
                    prop_assert_eq!(h.version(), version);
                    if r.code == RejectionCode::Cycle {
                        let w = r.cycle.unwrap();
                        prop_assert_eq!(w.first(), w.last());
                    }
                    // validation never mutates the graph it inspects
                    prop_assert!(validate_edit(&before, &e, None).is_err());
                }
            }
            prop_assert!(h.graph().check_acyclic().is_acyclic());
        }
        let replayed = GraphHistory::replay(base(), &h.log_jsonl(), None).unwrap();
        prop_assert_eq!(replayed.graph().to_json(), h.graph().to_json());
        prop_assert_eq!(h.at_version(h.version()).unwrap(), h.graph().clone());
    }
}
