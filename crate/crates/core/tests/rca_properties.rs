use std::collections::BTreeSet;

use causeway_core::effects::total_effects_from_matrix;
use causeway_core::rca::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("v{i}")).collect()
}

/// A ranked list (a permutation of a prefix of the universe) and a truth set.
fn arb_query() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    (Just(names(8)).prop_shuffle(), 0usize..=8, prop::collection::vec(any::<bool>(), 8)).prop_map(|(perm, len, mask)| {
        let pred = perm[..len].to_vec();
        let truth = names(8).into_iter().zip(mask).filter(|(_, m)| *m).map(|(n, _)| n).collect();
        (pred, truth)
    })
}

// average precision written as a mean over truth items of precision at their rank
fn ap_oracle(pred: &[String], truth: &[String], k: usize) -> f64 {
    let top: Vec<&String> = pred.iter().take(k).collect();
    let mut total = 0.0;
    for t in truth {
        if let Some(r) = top.iter().position(|p| *p == t) {
            let hits = top[..=r].iter().filter(|p| truth.contains(p)).count();
            total += hits as f64 / (r + 1) as f64;
        }
    }
    total / k.min(truth.len()) as f64
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_match_oracles(qs in prop::collection::vec(arb_query(), 1..6), k in 1usize..5) {
        let preds: Vec<Vec<String>> = qs.iter().map(|q| q.0.clone()).collect();
        let truths: Vec<Vec<String>> = qs.iter().map(|q| q.1.clone()).collect();
        let map = map_at_k(&preds, &truths, k).unwrap();
        let pr = precision_at_k(&preds, &truths, k).unwrap();
        let rr = mrr(&preds, &truths, None).unwrap();
        let jac = jaccard(&preds, &truths, k).unwrap();
        for m in [&map, &pr, &rr, &jac] {
            prop_assert!((0.0..=1.0).contains(&m.value));
            prop_assert_eq!(&m.flagged, &map.flagged);
        }
        let mut oracle = 0.0;
        for (q, (p, t)) in preds.iter().zip(&truths).enumerate() {
            if t.is_empty() {
                prop_assert!(map.flagged.contains(&q));
                continue;
            }
            let ap = ap_oracle(p, t, k);
            prop_assert!((map.per_query[q] - ap).abs() < 1e-12);
            oracle += ap;
            let top: BTreeSet<&String> = p.iter().take(k).collect();
            let ts: BTreeSet<&String> = t.iter().collect();
            let j = top.intersection(&ts).count() as f64 / top.union(&ts).count() as f64;
            prop_assert!((jac.per_query[q] - j).abs() < 1e-12);
            // single relevant item: AP@K equals the reciprocal rank cut at K
            if t.len() == 1 {
                let cut = mrr(&[p.clone()], &[t.clone()], Some(k)).unwrap().value;
                prop_assert!((map.per_query[q] - cut).abs() < 1e-12);
            }
        }
        prop_assert!((map.value - oracle / preds.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn kappa_identical_is_one_and_symmetric(a in prop::collection::vec(1u32..=5, 1..50), b in prop::collection::vec(1u32..=5, 50)) {
        prop_assert_eq!(weighted_kappa(&a, &a, 1..=5).unwrap(), 1.0);
        let b = &b[..a.len()];
        let k1 = weighted_kappa(&a, b, 1..=5).unwrap();
        let k2 = weighted_kappa(b, &a, 1..=5).unwrap();
        prop_assert!((k1 - k2).abs() < 1e-12);
        prop_assert!(k1 <= 1.0 + 1e-12);
    }

    #[test]
    fn rouge_is_bounded_and_f1_symmetric(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}") {
        let x = rouge1(&a, &b);
        let y = rouge1(&b, &a);
        prop_assert!((0.0..=1.0).contains(&x.f1));
        prop_assert!((x.f1 - y.f1).abs() < 1e-12);
        prop_assert!((x.precision - y.recall).abs() < 1e-12);
    }

    #[test]
    fn ranking_is_scale_invariant(
        weights in prop::collection::vec(prop_oneof![Just(0.0), 0.3f64..1.5], 6),
        values in prop::collection::vec(-3.0f64..13.0, 4),
        factor in 0.1f64..10.0,
    ) {
        // four nodes: v0, v1, v2 feed v3 through a small DAG
        let mut b = DMatrix::zeros(4, 4);
        b[(1, 0)] = weights[0];
        b[(2, 0)] = weights[1];
        b[(2, 1)] = weights[2];
        b[(3, 0)] = weights[3];
        b[(3, 1)] = weights[4];
        b[(3, 2)] = weights[5];
        let em = total_effects_from_matrix(names(4), &b).unwrap();
        let mut tol = ToleranceSpec::new();
        for n in names(4) {
            tol = tol.with_band(&n, "*", 0.0, 10.0).unwrap();
        }
        let dev = detect_deviations(&names(4), &values, &tol, None).unwrap();
        let r1 = rank_root_causes(&dev, &em, "v3", None).unwrap();
        let r2 = rank_root_causes(&dev.scaled(factor), &em, "v3", None).unwrap();
        prop_assert_eq!(r1.ranked_variables(), r2.ranked_variables());
        for c in &r1.candidates {
            prop_assert!((c.score - c.tau.abs() * dev.dev(&c.variable)).abs() < 1e-12);
        }
        for w in r1.candidates.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn deviation_zero_iff_inside(v in -20.0f64..30.0, lo in -5.0f64..5.0, width in 0.1f64..10.0) {
        let tol = ToleranceSpec::new().with_band("x", "*", lo, lo + width).unwrap();
        let r = detect_deviations(&["x".to_string()], &[v], &tol, None).unwrap();
        let inside = v >= lo && v <= lo + width;
        prop_assert_eq!(r.dev("x") == 0.0, inside);
        prop_assert!(r.dev("x") >= 0.0);
    }
}
