use causeway_core::discovery::{discover, DiscoveryConfig};
use causeway_core::effects::{counterfactual_validate, total_effects, CounterfactualOptions, Verdict};
use causeway_core::memory::{MemoryKind, MemoryStore, RecallFilter};
use causeway_core::model::{load_dataset, select_features, FeatureRequest, LoadOptions};
use causeway_core::rca::{detect_deviations, fit_tolerances, rank_root_causes};
use causeway_core::synthetic::{LinearSem, NoiseKind};
use causeway_core::CausalGraph;
use serde_json::json;

fn chain_csv() -> String {
    let names = vec!["feed".to_string(), "pressure".to_string(), "temp".to_string(), "noise".to_string()];
    let sem = LinearSem::from_edges(names, &[(0, 1, 0.9), (1, 2, -0.8)], NoiseKind::Uniform);
    sem.sample(3000, 4).to_csv_string()
}

#[test]
fn csv_to_ranked_root_causes() {
    let loaded = load_dataset(chain_csv().as_bytes(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.dropped, 0);
    let d = loaded.dataset;
    let sel = select_features(&d, &FeatureRequest::VarianceRank { k: 4 }).unwrap();
    assert_eq!(sel.selected.len(), 4);

    let cfg = DiscoveryConfig { n_bootstrap: 20, seed: 3, ..Default::default() };
    let (g, summary) = discover(&d, &cfg).unwrap();
    assert!(g.edge("feed", "pressure").is_some());
    assert!(g.edge("pressure", "temp").is_some());
    assert_eq!(g.edges().len(), 2);
    assert_eq!(summary.n_bootstrap, 20);
    assert_eq!(CausalGraph::from_json(&g.to_json()).unwrap(), g);

    let em = total_effects(&g).unwrap();
    let tau = em.tau("feed", "temp").unwrap();
    assert!((tau - 0.9 * -0.8).abs() < 0.05, "tau {tau}");

    let cf = counterfactual_validate(&d, &em, None, &CounterfactualOptions::default()).unwrap();
    assert_eq!(cf.len(), 3);
    assert!(cf.iter().all(|r| r.verdict == Verdict::Supported), "{cf:#?}");

    let tol = fit_tolerances(&d, 3.0, false).unwrap();
    let band = tol.band("feed", "*").unwrap().clone();
    let values = vec![band.max + 0.5 * (band.max - band.min), 0.0, 0.0, 0.0];
    let dev = detect_deviations(d.variables(), &values, &tol, None).unwrap();
    let report = rank_root_causes(&dev, &em, "temp", Some(3)).unwrap();
    assert_eq!(report.candidates[0].variable, "feed");
    assert!((report.candidates[0].dev - 0.5).abs() < 1e-12);
    assert!(report.candidates[0].explanation.contains("feed -> pressure -> temp"));
}

#[test]
fn dirty_rows_are_dropped_and_counted() {
    let text = "a,b,cycle_state\n1,2,S1\nx,3,S1\n4,5\n6,NaN,S2\n7,8,S2\n";
    let loaded = load_dataset(text.as_bytes(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.dropped, 3);
    assert_eq!(loaded.dataset.rows(), 2);
    assert_eq!(loaded.dataset.cycle_state().unwrap(), ["S1", "S2"]);
}

#[test]
fn memory_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut m = MemoryStore::open(dir.path()).unwrap();
        m.record_event(MemoryKind::Episodic, json!({"event": "discovery", "config": DiscoveryConfig::default()})).unwrap();
        m.record_event(MemoryKind::Procedural, json!({"key": "algorithm", "value": "lingam"})).unwrap();
    }
    let m = MemoryStore::open(dir.path()).unwrap();
    let all = m.recall(&RecallFilter::default());
    assert_eq!(all.len(), 2);
    assert_eq!(all[0].payload["config"]["n_bootstrap"], 100);
    assert_eq!(m.recall(&RecallFilter::kind(MemoryKind::Procedural))[0].payload["value"], "lingam");
    assert!(dir.path().join("episodic.jsonl").exists());
    assert!(dir.path().join("procedural.json").exists());
}
