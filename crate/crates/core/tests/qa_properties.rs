use causeway_core::model::{CausalGraph, EdgeOrigin, Provenance};
use causeway_core::qa::{ask, AnswerStatus, QaState};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = CausalGraph> {
    (2usize..=8).prop_flat_map(|p| {
        (prop::collection::vec(prop::bool::weighted(0.3), p * p), Just((0..p).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(move |(cells, perm)| {
                let b = DMatrix::from_fn(p, p, |i, j| if perm[i] > perm[j] && cells[i * p + j] { 0.7 } else { 0.0 });
                let names = (0..p).map(|i| format!("n{i}")).collect();
                CausalGraph::from_matrix(names, &b, EdgeOrigin::Manual, Provenance::default()).unwrap()
            })
    })
}

fn reach(b: &DMatrix<f64>, from: usize, to: usize) -> bool {
    let mut seen = vec![false; b.nrows()];
    let mut stack = vec![from];
    while let Some(v) = stack.pop() {
        for c in 0..b.nrows() {
            if b[(c, v)] != 0.0 && !seen[c] {
                if c == to {
                    return true;
                }
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    false
}

proptest! {
    #[test]
    fn structure_answers_match_brute_force(g in arb_graph(), i in 0usize..8, j in 0usize..8) {
        let p = g.n_nodes();
        let (i, j) = (i % p, j % p);
        prop_assume!(i != j);
        let (a, b) = (&g.nodes()[i], &g.nodes()[j]);
        let state = QaState { graph: Some(&g), ..Default::default() };
        let w = g.weights();

        let ans = ask(&format!("Does {a} cause {b}?"), &state);
        prop_assert_eq!(ans.status, AnswerStatus::Answered);
        prop_assert_eq!(ans.verdict, Some(reach(w, i, j)));
        let rel = if w[(j, i)] != 0.0 { "direct" } else if reach(w, i, j) { "indirect" } else { "none" };
        prop_assert_eq!(ans.payload["relation"].as_str(), Some(rel));

        let ans = ask(&format!("Is there a causal relation between {a} and {b}?"), &state);
        prop_assert_eq!(ans.verdict, Some(reach(w, i, j) || reach(w, j, i)));

        let ans = ask(&format!("What are the causal parents of {b}?"), &state);
        let mut expected: Vec<String> = (0..p).filter(|&k| w[(j, k)] != 0.0).map(|k| g.nodes()[k].clone()).collect();
        expected.sort();
        let got: Vec<String> = serde_json::from_value(ans.payload["parents"].clone()).unwrap();
        prop_assert_eq!(got, expected);

        // answers are functions of the state only
        prop_assert_eq!(ask(&format!("Does {a} cause {b}?"), &state), ask(&format!("does {a} cause {b}"), &state));
    }
}
