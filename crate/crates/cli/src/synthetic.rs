use causeway_core::effects::total_effects;
use causeway_core::knowledge::{Entity, OntologyStore, RelationRule};
use causeway_core::qa::{ask, QaState};
use causeway_core::rca::{detect_deviations, rank_root_causes, ToleranceSpec};
use causeway_core::synthetic::{FaultMode, PlantOptions, SyntheticPlant};
use serde_json::json;

use crate::commands::{emit, pretty};
use crate::error::{write, CliError, CliResult};
use crate::evaluate::{FaultSuite, Reference};
use crate::{FaultModeArg, SyntheticArgs};

/// Entity type of the observed variable that only shares a hidden driver with the target.
const AUXILIARY: &str = "auxiliary";

/// Number of fault cases that get a reference root-cause answer.
const RCA_REFERENCES: usize = 5;

pub fn run(a: SyntheticArgs) -> CliResult<()> {
    if a.p < 2 || a.n < 10 || a.trials == 0 {
        return Err(CliError::Usage("need --p >= 2, --n >= 10 and --trials >= 1".into()));
    }
    let mode = match a.mode {
        FaultModeArg::Propagated => FaultMode::Propagated,
        FaultModeArg::Sensor => FaultMode::Sensor,
    };
    let plant = SyntheticPlant::generate_with(a.p, a.n, a.trials, a.seed, PlantOptions { mode, confounded: a.confounded });
    let ontology = plant_ontology(&plant, a.confounded)?;
    let suite = FaultSuite { nodes: plant.nodes.clone(), cases: plant.faults.clone() };
    let references = references(&plant, &ontology)?;

    let dir = &a.out_dir;
    let files = [
        ("data.csv", plant.history.to_csv_string()),
        ("truth_graph.json", plant.truth_graph().to_json()),
        ("tolerances.json", plant.tolerances.to_json()),
        ("faults.json", pretty(&suite)),
        ("ontology.json", ontology.to_json()),
        ("references.json", pretty(&references)),
    ];
    for (name, text) in &files {
        write(&dir.join(name), text)?;
    }
    let manifest = json!({
        "out_dir": dir,
        "files": files.iter().map(|f| f.0).collect::<Vec<_>>(),
        "nodes": plant.nodes,
        "target": plant.target,
        "rows": plant.history.rows(),
        "faults": plant.faults.len(),
        "true_edges": plant.truth_graph().edges().len(),
    });
    emit(None, &pretty(&manifest))
}

fn plant_ontology(plant: &SyntheticPlant, confounded: bool) -> CliResult<OntologyStore> {
    let extra = confounded.then(|| plant.nodes.last().cloned()).flatten();
    let entities = plant
        .nodes
        .iter()
        .map(|n| {
            let auxiliary = extra.as_deref() == Some(n.as_str());
            Entity {
                name: n.clone(),
                description: if auxiliary {
                    format!("auxiliary measurement {n}")
                } else if *n == plant.target {
                    format!("monitored quality variable {n}")
                } else {
                    format!("process variable {n}")
                },
                entity_type: Some(if auxiliary { AUXILIARY } else { "process_variable" }.into()),
                unit: Some("a.u.".into()),
                anomaly_relevance: Some(if *n == plant.target { "high" } else { "medium" }.into()),
            }
        })
        .collect();
    let rules = if confounded {
        let deny = |source: &str, target: &str| RelationRule {
            source: source.into(),
            target: target.into(),
            allowed: false,
            reason: Some("auxiliary measurements neither drive nor are driven by the process".into()),
        };
        vec![deny(&format!("type:{AUXILIARY}"), "*"), deny("*", &format!("type:{AUXILIARY}"))]
    } else {
        Vec::new()
    };
    Ok(OntologyStore::new(entities, rules, ToleranceSpec::new())?)
}

/// Reference answers computed on the ground-truth graph with ontology labels.
fn references(plant: &SyntheticPlant, ontology: &OntologyStore) -> CliResult<Vec<Reference>> {
    let truth = plant.truth_graph();
    let em = total_effects(&truth)?;
    let t = &plant.target;
    let mut questions: Vec<(String, Option<usize>)> = vec![
        (format!("What are the causal parents of {t}?"), None),
        (format!("Which variable has the strongest causal effect on {t}?"), None),
    ];
    for v in plant.nodes.iter().filter(|v| *v != t) {
        questions.push((format!("Does {v} cause {t}?"), None));
    }
    for case in plant.faults.iter().take(RCA_REFERENCES) {
        questions.push((format!("What is the most likely root cause of the anomalous value of variable {t}?"), Some(case.id)));
    }
    questions
        .into_iter()
        .map(|(question, case)| {
            let report = match case {
                Some(id) => {
                    let c = &plant.faults[id];
                    let dev = detect_deviations(&plant.nodes, &c.values, &plant.tolerances, Some(&c.cycle_state))?;
                    Some(rank_root_causes(&dev, &em, &c.target, None)?)
                }
                None => None,
            };
            let state = QaState {
                graph: Some(&truth),
                effects: Some(&em),
                rca: report.as_ref(),
                ontology: Some(ontology),
                ..Default::default()
            };
            let reference = ask(&question, &state).text;
            Ok(Reference { question, reference, case })
        })
        .collect()
}
