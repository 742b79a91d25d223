use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::discovery::DiscoveryConfig;
use crate::effects::{total_effects, EffectMatrices};
use crate::knowledge::OntologyStore;
use crate::model::CausalGraph;
use crate::rca::RcaReport;

use super::templates::{parse_question, Category, CompetencyQuestion};

/// Read-only snapshot the answers are computed from.
#[derive(Debug, Clone, Copy, Default)]
pub struct QaState<'a> {
    pub graph: Option<&'a CausalGraph>,
    /// Derived from `graph` when absent.
    pub effects: Option<&'a EffectMatrices>,
    pub rca: Option<&'a RcaReport>,
    pub config: Option<&'a DiscoveryConfig>,
    /// Adds entity descriptions to answer text when present.
    pub ontology: Option<&'a OntologyStore>,
    /// Current operating level per variable, used as the baseline for interventions.
    pub reference_levels: Option<&'a BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    Answered,
    Unsupported,
    UnknownVariable,
    StateUnavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub status: AnswerStatus,
    pub category: Option<Category>,
    pub template_id: Option<String>,
    /// Yes/no outcome for questions that have one.
    pub verdict: Option<bool>,
    pub payload: Value,
    pub text: String,
}

/// Parses and answers in one step; unmatched text yields an `unsupported` answer.
pub fn ask(text: &str, state: &QaState<'_>) -> Answer {
    match parse_question(text) {
        Ok(q) => answer_question(&q, state),
        Err(_) => Answer {
            status: AnswerStatus::Unsupported,
            category: None,
            template_id: None,
            verdict: None,
            payload: Value::Null,
            text: format!("Unsupported question: \"{}\"", text.trim()),
        },
    }
}

struct Ctx<'a, 'q> {
    q: &'q CompetencyQuestion,
    state: &'a QaState<'a>,
}

type Reply = Result<(Option<bool>, Value, String), Answer>;

impl<'a> Ctx<'a, '_> {
    fn fail(&self, status: AnswerStatus, text: String) -> Answer {
        Answer {
            status,
            category: Some(self.q.category),
            template_id: Some(self.q.template_id.clone()),
            verdict: None,
            payload: Value::Null,
            text,
        }
    }

    fn graph(&self) -> Result<&'a CausalGraph, Answer> {
        self.state
            .graph
            .ok_or_else(|| self.fail(AnswerStatus::StateUnavailable, "No causal graph is available yet.".into()))
    }

    fn effects(&self) -> Result<Cow<'a, EffectMatrices>, Answer> {
        if let Some(em) = self.state.effects {
            return Ok(Cow::Borrowed(em));
        }
        let g = self.graph()?;
        total_effects(g).map(Cow::Owned).map_err(|e| {
            self.fail(AnswerStatus::StateUnavailable, format!("Total effects are unavailable: {e}."))
        })
    }

    fn config(&self) -> Result<&'a DiscoveryConfig, Answer> {
        self.state.config.ok_or_else(|| {
            self.fail(AnswerStatus::StateUnavailable, "No discovery configuration is available.".into())
        })
    }

    fn report(&self, target: &str) -> Result<&'a RcaReport, Answer> {
        match self.state.rca {
            Some(r) if r.target == target => Ok(r),
            Some(r) => Err(self.fail(
                AnswerStatus::StateUnavailable,
                format!("No root-cause analysis for {target} is available; the last one targeted {}.", r.target),
            )),
            None => Err(self.fail(AnswerStatus::StateUnavailable, "No root-cause analysis has been run yet.".into())),
        }
    }

    /// Graph node named by slot `i`; exact match first, then a unique case-insensitive one.
    fn var(&self, i: usize) -> Result<String, Answer> {
        let raw = &self.q.slots[i];
        let g = self.graph()?;
        if g.index_of(raw).is_some() {
            return Ok(raw.clone());
        }
        let hits: Vec<&String> = g.nodes().iter().filter(|n| n.eq_ignore_ascii_case(raw)).collect();
        match hits.as_slice() {
            [one] => Ok((*one).clone()),
            _ => Err(self.fail(AnswerStatus::UnknownVariable, format!("{raw} is not a variable in the causal graph."))),
        }
    }

    fn label(&self, name: &str) -> String {
        match self.state.ontology.and_then(|o| o.entity(name)) {
            Some(e) if !e.description.is_empty() => format!("{name} ({})", e.description),
            _ => name.to_string(),
        }
    }

    fn path_text(&self, g: &CausalGraph, from: &str, to: &str) -> Option<Vec<String>> {
        let (f, t) = (g.index_of(from)?, g.index_of(to)?);
        g.path(f, t).map(|p| p.into_iter().map(|i| g.nodes()[i].clone()).collect())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

fn join(names: &[String]) -> String {
    match names.len() {
        0 => "none".into(),
        _ => names.join(", "),
    }
}

/// Answers `q` from `state` alone; the same inputs always give the same text.
pub fn answer_question(q: &CompetencyQuestion, state: &QaState<'_>) -> Answer {
    let ctx = Ctx { q, state };
    let out = match q.template_id.as_str() {
        "does_cause" => does_cause(&ctx),
        "causal_relation" => causal_relation(&ctx),
        "direct_effect_on" | "causal_parents" => parents(&ctx),
        "causal_children" => children(&ctx),
        "causal_path" => causal_path(&ctx),
        "relation_strength" => relation_strength(&ctx),
        "strongest_effect" => strongest_effect(&ctx),
        "intervention" => intervention(&ctx),
        "total_effect" => total_effect(&ctx),
        "most_likely_root_cause" | "strongest_cause" => most_likely(&ctx),
        "top_root_causes" => top_causes(&ctx),
        "is_likely_root_cause" => is_likely(&ctx),
        "compare_root_causes" => compare(&ctx),
        "why_not_root_cause" => why_not(&ctx),
        "discovery_algorithm" => algorithm(&ctx),
        "edge_stability" | "edge_reliability" => edge_stability(&ctx),
        "least_reliable_edges" => least_reliable(&ctx),
        "bootstrap_iterations" => bootstrap_iterations(&ctx),
        "retention_thresholds" => retention(&ctx),
        other => Err(ctx.fail(AnswerStatus::Unsupported, format!("Unknown template {other}."))),
    };
    match out {
        Ok((verdict, payload, text)) => Answer {
            status: AnswerStatus::Answered,
            category: Some(q.category),
            template_id: Some(q.template_id.clone()),
            verdict,
            payload,
            text,
        },
        Err(a) => a,
    }
}

fn does_cause(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    if let Some(e) = g.edge(&a, &b) {
        return Ok((
            Some(true),
            json!({"relation": "direct", "path": [a, b], "weight": e.weight}),
            format!("Yes. {} directly causes {} (edge weight {}).", c.label(&a), c.label(&b), fmt(e.weight)),
        ));
    }
    if let Some(p) = c.path_text(g, &a, &b) {
        let via = join(&p[1..p.len() - 1].to_vec());
        return Ok((
            Some(true),
            json!({"relation": "indirect", "path": p, "via": &p[1..p.len() - 1]}),
            format!("Yes. {} causes {} indirectly via {via}: {}.", c.label(&a), c.label(&b), p.join(" -> ")),
        ));
    }
    Ok((
        Some(false),
        json!({"relation": "none", "path": []}),
        format!("No. There is no directed causal path from {} to {}.", c.label(&a), c.label(&b)),
    ))
}

fn causal_relation(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    for (x, y) in [(&a, &b), (&b, &a)] {
        if let Some(p) = c.path_text(g, x, y) {
            let kind = if p.len() == 2 { "direct" } else { "indirect" };
            return Ok((
                Some(true),
                json!({"relation": kind, "source": x, "target": y, "path": p}),
                format!("Yes. {} causes {} ({kind}): {}.", c.label(x), c.label(y), p.join(" -> ")),
            ));
        }
    }
    Ok((
        Some(false),
        json!({"relation": "none", "path": []}),
        format!("No. There is no directed causal path between {} and {} in either direction.", c.label(&a), c.label(&b)),
    ))
}

fn parents(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let b = c.var(0)?;
    let i = g.index_of(&b).expect("resolved");
    let mut ps: Vec<String> = g.parents(i).into_iter().map(|j| g.nodes()[j].clone()).collect();
    ps.sort();
    let weights: BTreeMap<&String, f64> = ps.iter().map(|p| (p, g.edge(p, &b).expect("parent edge").weight)).collect();
    let labels: Vec<String> = ps.iter().map(|p| c.label(p)).collect();
    let text = if ps.is_empty() {
        format!("{} has no causal parents.", c.label(&b))
    } else {
        format!("The causal parents of {} are {}.", c.label(&b), join(&labels))
    };
    Ok((None, json!({"variable": b, "parents": ps, "weights": weights}), text))
}

fn children(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let a = c.var(0)?;
    let i = g.index_of(&a).expect("resolved");
    let mut cs: Vec<String> = g.children(i).into_iter().map(|j| g.nodes()[j].clone()).collect();
    cs.sort();
    let labels: Vec<String> = cs.iter().map(|p| c.label(p)).collect();
    let text = if cs.is_empty() {
        format!("{} has no causal children.", c.label(&a))
    } else {
        format!("The causal children of {} are {}.", c.label(&a), join(&labels))
    };
    Ok((None, json!({"variable": a, "children": cs}), text))
}

fn causal_path(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    match c.path_text(g, &a, &b) {
        Some(p) => Ok((Some(true), json!({"path": p}), format!("{}.", p.join(" -> ")))),
        None => Ok((
            Some(false),
            json!({"path": []}),
            format!("There is no causal path from {} to {}.", c.label(&a), c.label(&b)),
        )),
    }
}

fn relation_strength(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    let em = c.effects()?;
    for (x, y) in [(&a, &b), (&b, &a)] {
        let tau = em.tau(x, y).unwrap_or(0.0);
        if let Some(e) = g.edge(x, y) {
            return Ok((
                None,
                json!({"source": x, "target": y, "direct_weight": e.weight, "stability": e.stability,
                       "tier": e.tier, "total_effect": tau}),
                format!(
                    "Direct weight of {} -> {}: {} (stability {}, {}). Total effect: {}.",
                    c.label(x),
                    c.label(y),
                    fmt(e.weight),
                    fmt(e.stability),
                    e.tier.label(),
                    fmt(tau)
                ),
            ));
        }
        if tau != 0.0 {
            return Ok((
                None,
                json!({"source": x, "target": y, "direct_weight": 0.0, "stability": null, "total_effect": tau}),
                format!("There is no direct edge {} -> {}. Total effect: {}.", c.label(x), c.label(y), fmt(tau)),
            ));
        }
    }
    Ok((
        None,
        json!({"source": a, "target": b, "direct_weight": 0.0, "total_effect": 0.0}),
        format!("{} and {} are not causally related; both direct weight and total effect are 0.", c.label(&a), c.label(&b)),
    ))
}

fn strongest_effect(c: &Ctx) -> Reply {
    c.graph()?;
    let b = c.var(0)?;
    let em = c.effects()?;
    let t = em.index_of(&b).expect("graph node");
    let best = (0..em.nodes.len())
        .filter(|&j| j != t && em.total[(t, j)] != 0.0)
        .max_by(|&x, &y| {
            em.total[(t, x)].abs().total_cmp(&em.total[(t, y)].abs()).then_with(|| em.nodes[y].cmp(&em.nodes[x]))
        });
    match best {
        Some(j) => {
            let name = &em.nodes[j];
            let tau = em.total[(t, j)];
            Ok((
                None,
                json!({"variable": name, "total_effect": tau}),
                format!("{} has the strongest causal effect on {} (total effect {}).", c.label(name), c.label(&b), fmt(tau)),
            ))
        }
        None => Ok((
            None,
            json!({"variable": null, "total_effect": 0.0}),
            format!("No variable has a causal effect on {}.", c.label(&b)),
        )),
    }
}

fn intervention(c: &Ctx) -> Reply {
    c.graph()?;
    let a = c.var(0)?;
    let b = c.var(2)?;
    let x = &c.q.slots[1];
    let em = c.effects()?;
    let tau = em.tau(&a, &b).expect("graph nodes");
    let reference = c.state.reference_levels.and_then(|r| r.get(&a)).copied();
    match (x.parse::<f64>(), reference) {
        (Ok(v), Some(r)) => {
            let delta = (v - r) * tau;
            Ok((
                None,
                json!({"source": a, "target": b, "value": v, "reference": r, "total_effect": tau, "delta": delta}),
                format!(
                    "Setting {} from {} to {} changes {} by {} (total effect {}).",
                    c.label(&a),
                    fmt(r),
                    fmt(v),
                    c.label(&b),
                    fmt(delta),
                    fmt(tau)
                ),
            ))
        }
        _ => Ok((
            None,
            json!({"source": a, "target": b, "value": x, "reference": reference, "total_effect": tau, "delta_per_unit": tau}),
            format!(
                "Setting {} to {x} changes {} by {} times the change in {} (total effect {} per unit).",
                c.label(&a),
                c.label(&b),
                fmt(tau),
                a,
                fmt(tau)
            ),
        )),
    }
}

fn total_effect(c: &Ctx) -> Reply {
    c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    let tau = c.effects()?.tau(&a, &b).expect("graph nodes");
    Ok((
        None,
        json!({"source": a, "target": b, "total_effect": tau}),
        format!("The total effect of {} on {} is {}.", c.label(&a), c.label(&b), fmt(tau)),
    ))
}

/// A candidate counts as likely when it has a positive score and ranks in the top three.
const LIKELY_RANK: usize = 3;

fn positive(r: &RcaReport) -> Vec<(usize, &crate::rca::RcaCandidate)> {
    r.candidates.iter().enumerate().filter(|(_, c)| c.score > 0.0).map(|(i, c)| (i + 1, c)).collect()
}

fn most_likely(c: &Ctx) -> Reply {
    let b = c.var(0)?;
    let r = c.report(&b)?;
    match positive(r).first() {
        Some((_, top)) => Ok((
            None,
            json!({"target": b, "root_cause": top.variable, "score": top.score, "dev": top.dev, "total_effect": top.tau}),
            format!(
                "The most likely root cause of {} is {} (score {}). {}",
                c.label(&b),
                c.label(&top.variable),
                fmt(top.score),
                top.explanation
            ),
        )),
        None => Ok((
            None,
            json!({"target": b, "root_cause": null}),
            format!("No upstream variable of {} is outside its tolerance band, so no root cause is indicated.", c.label(&b)),
        )),
    }
}

fn top_causes(c: &Ctx) -> Reply {
    let b = c.var(1)?;
    let k: usize = c.q.slots[0].parse().unwrap_or(3).max(1);
    let r = c.report(&b)?;
    let top: Vec<_> = positive(r).into_iter().take(k).collect();
    let ranked: Vec<Value> = top
        .iter()
        .map(|(rank, cand)| json!({"rank": rank, "variable": cand.variable, "score": cand.score}))
        .collect();
    let text = if top.is_empty() {
        format!("No upstream variable of {} is outside its tolerance band.", c.label(&b))
    } else {
        let items: Vec<String> =
            top.iter().map(|(rank, cand)| format!("{rank}. {} (score {})", c.label(&cand.variable), fmt(cand.score))).collect();
        let mut t = format!("Most likely root causes of {}: {}.", c.label(&b), items.join("; "));
        if top.len() < k {
            t.push_str(&format!(" Only {} candidate(s) have a positive score.", top.len()));
        }
        t
    };
    Ok((None, json!({"target": b, "k": k, "ranking": ranked}), text))
}

fn rank_of(r: &RcaReport, name: &str) -> Option<(usize, f64)> {
    r.candidates.iter().position(|c| c.variable == name).map(|i| (i + 1, r.candidates[i].score))
}

fn is_likely(c: &Ctx) -> Reply {
    let (a, b) = (c.var(0)?, c.var(1)?);
    let r = c.report(&b)?;
    match rank_of(r, &a) {
        Some((rank, score)) if score > 0.0 && rank <= LIKELY_RANK => Ok((
            Some(true),
            json!({"variable": a, "target": b, "rank": rank, "score": score}),
            format!("Yes. {} ranks #{rank} among root causes of {} with score {}.", c.label(&a), c.label(&b), fmt(score)),
        )),
        Some((rank, score)) => Ok((
            Some(false),
            json!({"variable": a, "target": b, "rank": rank, "score": score}),
            format!("No. {} ranks #{rank} among root causes of {} with score {}.", c.label(&a), c.label(&b), fmt(score)),
        )),
        None => Ok((
            Some(false),
            json!({"variable": a, "target": b, "rank": null, "score": 0.0}),
            format!("No. {} is not among the ranked candidates for {}.", c.label(&a), c.label(&b)),
        )),
    }
}

fn compare(c: &Ctx) -> Reply {
    let (a, d) = (c.var(0)?, c.var(1)?);
    let Some(r) = c.state.rca else {
        return Err(c.fail(AnswerStatus::StateUnavailable, "No root-cause analysis has been run yet.".into()));
    };
    let sa = rank_of(r, &a).map_or(0.0, |x| x.1);
    let sd = rank_of(r, &d).map_or(0.0, |x| x.1);
    let winner = if sa > sd {
        Some(&a)
    } else if sd > sa {
        Some(&d)
    } else {
        None
    };
    let text = match winner {
        Some(w) => format!(
            "By score comparison for {}: {} is more likely ({} {} vs {} {}).",
            c.label(&r.target),
            c.label(w),
            a,
            fmt(sa),
            d,
            fmt(sd)
        ),
        None => format!("By score comparison for {}: {} and {} are tied at {}.", c.label(&r.target), a, d, fmt(sa)),
    };
    Ok((
        None,
        json!({"target": r.target, "basis": "score_comparison", "scores": {&a: sa, &d: sd}, "more_likely": winner}),
        text,
    ))
}

fn why_not(c: &Ctx) -> Reply {
    let (d, b) = (c.var(0)?, c.var(1)?);
    let r = c.report(&b)?;
    if let Some((rank, score)) = rank_of(r, &d) {
        let cand = &r.candidates[rank - 1];
        let text = if score == 0.0 {
            cand.explanation.clone()
        } else if rank <= LIKELY_RANK {
            format!("{} is in fact a likely root cause of {} (rank #{rank}). {}", c.label(&d), c.label(&b), cand.explanation)
        } else {
            format!(
                "{} ranks only #{rank} for {} with score {}. {}",
                c.label(&d),
                c.label(&b),
                fmt(score),
                cand.explanation
            )
        };
        return Ok((
            Some(score == 0.0 || rank > LIKELY_RANK),
            json!({"variable": d, "target": b, "rank": rank, "score": score, "dev": cand.dev, "total_effect": cand.tau}),
            text,
        ));
    }
    let tau = c.effects()?.tau(&d, &b).unwrap_or(0.0);
    let text = if tau == 0.0 {
        format!("{} has no causal path to {}, so it cannot explain the anomaly.", c.label(&d), c.label(&b))
    } else {
        format!("{} was not among the top candidates reported for {}.", c.label(&d), c.label(&b))
    };
    Ok((Some(true), json!({"variable": d, "target": b, "rank": null, "score": 0.0, "total_effect": tau}), text))
}

fn algorithm(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let prov = g.provenance();
    let n_boot = prov.config.get("n_bootstrap").and_then(Value::as_u64).or(c.state.config.map(|x| x.n_bootstrap as u64));
    let text = match prov.method.as_str() {
        "lingam" => match n_boot {
            Some(n) if prov.config.get("n_bootstrap").is_some() => {
                format!("The graph was learned with ICA-based LiNGAM and filtered by bootstrap edge stability over {n} resamples.")
            }
            _ => "The graph was learned with ICA-based LiNGAM.".to_string(),
        },
        "manual" => "The graph was authored manually.".to_string(),
        other => format!("The graph was produced by {other}."),
    };
    let manual_edits = prov.history.iter().filter(|h| h.author.is_some()).count();
    let text = if manual_edits > 0 { format!("{text} It has {manual_edits} expert edit(s).") } else { text };
    Ok((None, json!({"method": prov.method, "n_bootstrap": n_boot, "expert_edits": manual_edits}), text))
}

fn edge_stability(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let (a, b) = (c.var(0)?, c.var(1)?);
    match g.edge(&a, &b) {
        Some(e) => Ok((
            Some(true),
            json!({"source": a, "target": b, "stability": e.stability, "std": e.std, "frequency": e.frequency,
                   "tier": e.tier, "weight": e.weight}),
            format!(
                "The edge {a} -> {b} has stability score {} ({}), appearing in {}% of resamples with mean weight {}.",
                fmt(e.stability),
                e.tier.label(),
                format!("{:.1}", 100.0 * e.frequency),
                fmt(e.weight)
            ),
        )),
        None => Ok((
            Some(false),
            json!({"source": a, "target": b, "stability": null}),
            format!("There is no edge {a} -> {b} in the graph."),
        )),
    }
}

fn least_reliable(c: &Ctx) -> Reply {
    let g = c.graph()?;
    let Some(min) = g.edges().iter().map(|e| e.stability).min_by(f64::total_cmp) else {
        return Ok((None, json!({"edges": [], "stability": null}), "The graph has no edges.".into()));
    };
    let edges: Vec<String> =
        g.edges().iter().filter(|e| e.stability == min).map(|e| format!("{} -> {}", e.source, e.target)).collect();
    Ok((
        None,
        json!({"edges": edges, "stability": min}),
        format!("The least reliable edge(s): {} with stability score {}.", edges.join(", "), fmt(min)),
    ))
}

fn bootstrap_iterations(c: &Ctx) -> Reply {
    let n = c.config()?.n_bootstrap;
    Ok((None, json!({"n_bootstrap": n}), format!("{n} bootstrap iterations were used.")))
}

fn retention(c: &Ctx) -> Reply {
    let cfg = c.config()?;
    Ok((
        None,
        json!({"stability": cfg.retention_stability, "frequency": cfg.retention_frequency}),
        format!(
            "Edges are retained when stability is at least {} and they appear in at least {}% of resamples.",
            cfg.retention_stability,
            100.0 * cfg.retention_frequency
        ),
    ))
}
