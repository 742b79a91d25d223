use std::collections::BTreeMap;

use causeway_core::discovery::discover;
use causeway_core::effects::{total_effects, EffectMatrices};
use causeway_core::knowledge::{EditOp, GraphEdit, GraphHistory, OntologyStore};
use causeway_core::qa::{ask, QaState};
use causeway_core::rca::{
    correlation_baseline, detect_deviations, jaccard, map_at_k, mrr, precision_at_k, rank_root_causes, rouge1,
    BaselineTarget, RcaReport, ToleranceSpec,
};
use causeway_core::synthetic::FaultCase;
use causeway_core::{CausalGraph, Dataset};
use serde::{Deserialize, Serialize};

use crate::commands::{discovery_config, emit, load_data, load_graph, load_ontology_file, load_tolerances, pretty};
use crate::error::{read, AtPath, CliError, CliResult};
use crate::{EvaluateArgs, TableFormat};

/// Labelled faults; `values` of every case follow `nodes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultSuite {
    pub nodes: Vec<String>,
    pub cases: Vec<FaultCase>,
}

/// A question with its reference answer; `case` selects the fault whose RCA report answers it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reference {
    pub question: String,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRow {
    pub method: &'static str,
    /// Mean ROUGE-1 F1 of template answers; `None` when the method does not answer questions.
    pub rouge1: Option<f64>,
    pub jaccard: f64,
    pub map_at_3: f64,
    pub pr_at_2: f64,
    pub mrr: f64,
    /// Cases whose ground truth was empty.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub cases: usize,
    pub jaccard_k: usize,
    pub graph_edges: usize,
    /// Discovered edges removed because the ontology denies the relation.
    pub ontology_removed_edges: Vec<String>,
    pub edits_applied: BTreeMap<&'static str, usize>,
    pub edits_rejected: BTreeMap<&'static str, usize>,
    pub rows: Vec<MethodRow>,
}

const CAUSAL: &str = "causal";
const CORRELATION: &str = "correlation baseline";
const ABLATED: &str = "causal without ontology";

struct Variant {
    graph: CausalGraph,
    effects: EffectMatrices,
    ontology: Option<OntologyStore>,
    applied: usize,
    rejected: usize,
}

/// Applies `edits` on `base`; with an ontology, denied relations are removed first and edits are validated.
fn variant(base: &CausalGraph, ontology: Option<&OntologyStore>, edits: &[GraphEdit], removed: &mut Vec<String>) -> CliResult<Variant> {
    let mut h = GraphHistory::new(base.clone());
    if let Some(o) = ontology {
        for e in base.edges().iter().filter(|e| !o.relation_allowed(&e.source, &e.target)) {
            let op = EditOp::RemoveEdge { source: e.source.clone(), target: e.target.clone() };
            h.apply(GraphEdit { op, author: "ontology".into(), timestamp: 0.0 }, None)
                .map_err(|r| CliError::Usage(r.to_string()))?;
            removed.push(format!("{} -> {}", e.source, e.target));
        }
    }
    let (mut applied, mut rejected) = (0, 0);
    for e in edits {
        match h.apply(e.clone(), ontology) {
            Ok(_) => applied += 1,
            Err(r) => {
                eprintln!("edit rejected ({}): {}", if ontology.is_some() { CAUSAL } else { ABLATED }, r);
                rejected += 1;
            }
        }
    }
    let graph = h.graph().clone();
    let effects = total_effects(&graph)?;
    Ok(Variant { graph, effects, ontology: ontology.cloned(), applied, rejected })
}

fn rankings(suite: &FaultSuite, tol: &ToleranceSpec, em: &EffectMatrices) -> CliResult<Vec<RcaReport>> {
    suite
        .cases
        .iter()
        .map(|c| {
            let dev = detect_deviations(&suite.nodes, &c.values, tol, Some(&c.cycle_state))?;
            Ok(rank_root_causes(&dev, em, &c.target, None)?)
        })
        .collect()
}

fn correlation_rankings(d: &Dataset, suite: &FaultSuite) -> CliResult<Vec<RcaReport>> {
    let mut by_target: BTreeMap<&str, RcaReport> = BTreeMap::new();
    for c in &suite.cases {
        if !by_target.contains_key(c.target.as_str()) {
            by_target.insert(&c.target, correlation_baseline(d, &BaselineTarget::Variable(c.target.clone()), None)?);
        }
    }
    Ok(suite.cases.iter().map(|c| by_target[c.target.as_str()].clone()).collect())
}

fn row(method: &'static str, reports: &[RcaReport], suite: &FaultSuite, jaccard_k: usize, rouge: Option<f64>) -> CliResult<MethodRow> {
    let preds: Vec<Vec<String>> = reports.iter().map(RcaReport::ranked_variables).collect();
    let truths: Vec<Vec<String>> = suite.cases.iter().map(|c| vec![c.root_cause.clone()]).collect();
    let m = mrr(&preds, &truths, None)?;
    Ok(MethodRow {
        method,
        rouge1: rouge,
        jaccard: jaccard(&preds, &truths, jaccard_k)?.value,
        map_at_3: map_at_k(&preds, &truths, 3)?.value,
        pr_at_2: precision_at_k(&preds, &truths, 2)?.value,
        mrr: m.value,
        flagged: m.flagged,
    })
}

fn rouge(v: &Variant, refs: &[Reference], reports: &[RcaReport]) -> CliResult<f64> {
    let mut total = 0.0;
    for r in refs {
        let rca = match r.case {
            Some(id) => Some(reports.get(id).ok_or_else(|| CliError::Usage(format!("reference case {id} does not exist")))?),
            None => None,
        };
        let state = QaState {
            graph: Some(&v.graph),
            effects: Some(&v.effects),
            rca,
            ontology: v.ontology.as_ref(),
            ..Default::default()
        };
        total += rouge1(&ask(&r.question, &state).text, &r.reference).f1;
    }
    Ok(total / refs.len() as f64)
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<Evaluation> {
    let d = load_data(&a.data)?;
    let suite: FaultSuite = serde_json::from_str(&read(&a.faults)?).at(&a.faults)?;
    if suite.cases.is_empty() {
        return Err(CliError::Usage(format!("{}: no fault cases", a.faults.display())));
    }
    let ontology = a.ontology.as_deref().map(load_ontology_file).transpose()?;
    let tol = load_tolerances(a.tolerances.as_deref(), ontology.as_ref())?;
    let edits: Vec<GraphEdit> = match &a.edits {
        Some(p) => read(p)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).at(p))
            .collect::<CliResult<_>>()?,
        None => Vec::new(),
    };
    let refs: Vec<Reference> = match &a.references {
        Some(p) => serde_json::from_str(&read(p)?).at(p)?,
        None => Vec::new(),
    };
    let base = match &a.graph {
        Some(p) => load_graph(p)?,
        None => discover(&d, &discovery_config(&a.discovery)?)?.0,
    };

    let mut removed = Vec::new();
    let full = variant(&base, ontology.as_ref(), &edits, &mut removed)?;
    let ablated = variant(&base, None, &edits, &mut Vec::new())?;
    let full_reports = rankings(&suite, &tol, &full.effects)?;
    let ablated_reports = rankings(&suite, &tol, &ablated.effects)?;
    let corr_reports = correlation_rankings(&d, &suite)?;
    let (r_full, r_ablated) = if refs.is_empty() {
        (None, None)
    } else {
        (Some(rouge(&full, &refs, &full_reports)?), Some(rouge(&ablated, &refs, &ablated_reports)?))
    };

    let k = a.jaccard_k;
    Ok(Evaluation {
        cases: suite.cases.len(),
        jaccard_k: k,
        graph_edges: full.graph.edges().len(),
        ontology_removed_edges: removed,
        edits_applied: [(CAUSAL, full.applied), (ABLATED, ablated.applied)].into(),
        edits_rejected: [(CAUSAL, full.rejected), (ABLATED, ablated.rejected)].into(),
        rows: vec![
            row(CAUSAL, &full_reports, &suite, k, r_full)?,
            row(CORRELATION, &corr_reports, &suite, k, None)?,
            row(ABLATED, &ablated_reports, &suite, k, r_ablated)?,
        ],
    })
}

fn render_table(e: &Evaluation) -> String {
    let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let jac = format!("Jaccard@{}", e.jaccard_k);
    let mut out = format!("{:<26} {:>8} {:>10} {:>7} {:>7} {:>7}\n", "Method", "ROUGE-1", jac, "MAP@3", "PR@2", "MRR");
    for r in &e.rows {
        out.push_str(&format!(
            "{:<26} {:>8} {:>10} {:>7} {:>7} {:>7}\n",
            r.method,
            cell(r.rouge1),
            cell(Some(r.jaccard)),
            cell(Some(r.map_at_3)),
            cell(Some(r.pr_at_2)),
            cell(Some(r.mrr))
        ));
    }
    out.push_str(&format!("{} fault cases, {} edges in the causal graph", e.cases, e.graph_edges));
    if !e.ontology_removed_edges.is_empty() {
        out.push_str(&format!("; ontology removed {}", e.ontology_removed_edges.join(", ")));
    }
    out
}

fn render_csv(e: &Evaluation) -> String {
    let cell = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let mut out = format!("method,rouge1,jaccard_at_{},map_at_3,pr_at_2,mrr\n", e.jaccard_k);
    for r in &e.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            cell(r.rouge1),
            r.jaccard,
            r.map_at_3,
            r.pr_at_2,
            r.mrr
        ));
    }
    out
}

pub fn run(a: EvaluateArgs) -> CliResult<()> {
    let e = evaluate(&a)?;
    let text = match a.format {
        TableFormat::Table => render_table(&e),
        TableFormat::Json => pretty(&e),
        TableFormat::Csv => render_csv(&e),
    };
    emit(a.out.as_deref(), &text)
}
