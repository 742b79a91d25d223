use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use causeway_core::discovery::{discover, DiscoveryConfig};
use causeway_core::effects::{
    counterfactual_validate, default_levels, predict_intervention, total_effects, write_counterfactual_csv,
    CounterfactualOptions, CounterfactualSpec,
};
use causeway_core::knowledge::{load_ontology, OntologyStore};
use causeway_core::model::{load_dataset, select_features, FeatureRequest, LoadOptions};
use causeway_core::qa::{ask, QaState};
use causeway_core::rca::{
    correlation_baseline, detect_deviations, most_deviant_variable, rank_root_causes, BaselineTarget, RcaReport,
    ToleranceSpec,
};
use causeway_core::stats::quantile;
use causeway_core::{CausalGraph, Dataset};
use causeway_service::{serve, ServeOptions};
use serde_json::json;

use crate::error::{read, write, AtPath, CliError, CliResult};
use crate::{
    evaluate, synthetic, Command, CounterfactualArgs, DiscoverArgs, DiscoveryFlags, EffectsArgs, QaArgs, RcaArgs,
    RcaMethodArg, ServeArgs,
};

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Discover(a) => discover_cmd(a),
        Command::Effects(a) => effects_cmd(a),
        Command::Counterfactuals(a) => counterfactuals_cmd(a),
        Command::Rca(a) => rca_cmd(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Qa(a) => qa_cmd(a),
        Command::GenSynthetic(a) => synthetic::run(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

/// Writes to `out` or stdout, always ending with a newline.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    let text = if text.ends_with('\n') { text.to_string() } else { format!("{text}\n") };
    match out {
        Some(p) => write(p, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

pub fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output types serialize")
}

pub fn load_data(path: &Path) -> CliResult<Dataset> {
    let loaded = load_dataset(read(path)?.as_bytes(), &LoadOptions::default()).at(path)?;
    if loaded.dropped > 0 {
        eprintln!("{}: dropped {} row(s) with missing or non-numeric values", path.display(), loaded.dropped);
    }
    Ok(loaded.dataset)
}

pub fn load_graph(path: &Path) -> CliResult<CausalGraph> {
    CausalGraph::from_json(&read(path)?).at(path)
}

pub fn load_ontology_file(path: &Path) -> CliResult<OntologyStore> {
    load_ontology(&read(path)?).at(path)
}

/// Explicit tolerance file, else the ontology's tolerance table.
pub fn load_tolerances(path: Option<&Path>, ontology: Option<&OntologyStore>) -> CliResult<ToleranceSpec> {
    if let Some(p) = path {
        return ToleranceSpec::from_json(&read(p)?).at(p);
    }
    match ontology {
        Some(o) if !o.tolerances().is_empty() => Ok(o.tolerances().clone()),
        _ => Err(CliError::Usage("tolerances are required: pass --tolerances or an ontology that defines them".into())),
    }
}

pub fn discovery_config(flags: &DiscoveryFlags) -> CliResult<DiscoveryConfig> {
    let mut cfg = match &flags.config {
        Some(p) => serde_json::from_str::<DiscoveryConfig>(&read(p)?).at(p)?,
        None => DiscoveryConfig::default(),
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(n) = flags.n_bootstrap {
        cfg.n_bootstrap = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn discover_cmd(a: DiscoverArgs) -> CliResult<()> {
    let cfg = discovery_config(&a.discovery)?;
    let mut d = load_data(&a.data)?;
    let request = match (a.features, a.top_correlated, a.top_variance) {
        (Some(names), _, _) => Some(FeatureRequest::Manual { names }),
        (_, Some(k), _) => Some(FeatureRequest::CorrelationRank { k }),
        (_, _, Some(k)) => Some(FeatureRequest::VarianceRank { k }),
        _ => None,
    };
    if let Some(req) = request {
        let sel = select_features(&d, &req)?;
        eprintln!("selected features: {}", sel.selected.join(", "));
        d = d.select(&sel.selected)?;
    }
    let (g, summary) = discover(&d, &cfg)?;
    if let Some(p) = &a.summary {
        write(p, &pretty(&summary))?;
    }
    emit(a.out.as_deref(), &g.to_json())
}

fn effects_cmd(a: EffectsArgs) -> CliResult<()> {
    let g = load_graph(&a.graph)?;
    let em = total_effects(&g)?;
    let text = match &a.whatif {
        None => pretty(&em.to_document(a.hops)),
        Some(source) => {
            let (a1, a2) = match (a.a1, a.a2) {
                (Some(x), Some(y)) => (x, y),
                (x, y) => {
                    let p = a.data.as_ref().ok_or_else(|| {
                        CliError::Usage("--whatif needs --a1 and --a2, or --data for quartile defaults".into())
                    })?;
                    let (q1, q3) = default_levels(&load_data(p)?, source)?;
                    (x.unwrap_or(q1), y.unwrap_or(q3))
                }
            };
            let effects = predict_intervention(&em, source, a1, a2)?;
            pretty(&json!({"source": source, "a1": a1, "a2": a2, "effects": effects}))
        }
    };
    emit(a.out.as_deref(), &text)
}

fn counterfactuals_cmd(a: CounterfactualArgs) -> CliResult<()> {
    let d = load_data(&a.data)?;
    let em = total_effects(&load_graph(&a.graph)?)?;
    let pairs: Option<Vec<CounterfactualSpec>> = match &a.pairs {
        Some(p) => Some(serde_json::from_str(&read(p)?).at(p)?),
        None => None,
    };
    let mut opts = CounterfactualOptions::default();
    if let Some(x) = a.delta {
        opts.delta = x;
    }
    opts.epsilon = a.epsilon;
    let results = counterfactual_validate(&d, &em, pairs.as_deref(), &opts)?;
    let mut buf = Vec::new();
    write_counterfactual_csv(&results, &mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("csv is UTF-8"))
}

fn rca_cmd(a: RcaArgs) -> CliResult<()> {
    if a.method == RcaMethodArg::Correlation {
        let data = a.data.as_ref().ok_or_else(|| CliError::Usage("--method correlation needs --data".into()))?;
        let target = a.target.clone().ok_or_else(|| CliError::Usage("--method correlation needs --target".into()))?;
        let d = load_data(data)?;
        let report = correlation_baseline(&d, &BaselineTarget::Variable(target), a.k)?;
        return emit(a.out.as_deref(), &pretty(&report));
    }
    let g = load_graph(a.graph.as_ref().expect("clap requires --graph for the causal method"))?;
    let ontology = a.ontology.as_deref().map(load_ontology_file).transpose()?;
    let tol = load_tolerances(a.tolerances.as_deref(), ontology.as_ref())?;
    let em = total_effects(&g)?;
    let nodes = g.nodes().to_vec();
    let (values, row_state) = match (&a.values, a.row) {
        (Some(p), _) => {
            let map: BTreeMap<String, f64> = serde_json::from_str(&read(p)?).at(p)?;
            let v = nodes
                .iter()
                .map(|n| map.get(n).copied().ok_or_else(|| CliError::Usage(format!("{}: no value for `{n}`", p.display()))))
                .collect::<CliResult<Vec<_>>>()?;
            (v, None)
        }
        (None, Some(r)) => {
            let d = load_data(a.data.as_ref().expect("clap requires --data with --row"))?;
            if r >= d.rows() {
                return Err(CliError::Usage(format!("--row {r} is out of range ({} rows)", d.rows())));
            }
            let v = nodes.iter().map(|n| d.column(n).map(|c| c[r])).collect::<Result<Vec<_>, _>>()?;
            (v, d.cycle_state().map(|c| c[r].clone()))
        }
        (None, None) => return Err(CliError::Usage("pass --values or --data with --row".into())),
    };
    let state = a.cycle_state.or(row_state);
    let dev = detect_deviations(&nodes, &values, &tol, state.as_deref())?;
    let target = match a.target {
        Some(t) => t,
        None => most_deviant_variable(&dev)
            .ok_or_else(|| CliError::Usage("no variable is outside its tolerance band; pass --target".into()))?,
    };
    let report = rank_root_causes(&dev, &em, &target, a.k)?;
    emit(a.out.as_deref(), &pretty(&report))
}

fn qa_cmd(a: QaArgs) -> CliResult<()> {
    let graph = a.graph.as_deref().map(load_graph).transpose()?;
    let effects = graph.as_ref().map(total_effects).transpose()?;
    let rca: Option<RcaReport> = match &a.rca {
        Some(p) => Some(serde_json::from_str(&read(p)?).at(p)?),
        None => None,
    };
    let ontology = a.ontology.as_deref().map(load_ontology_file).transpose()?;
    let config: Option<DiscoveryConfig> = match &a.config {
        Some(p) => Some(serde_json::from_str(&read(p)?).at(p)?),
        None => None,
    };
    let levels: Option<BTreeMap<String, f64>> = match &a.data {
        Some(p) => {
            let d = load_data(p)?;
            Some(d.variables().iter().zip(d.columns()).map(|(n, c)| (n.clone(), quantile(c, 0.5))).collect())
        }
        None => None,
    };
    let state = QaState {
        graph: graph.as_ref(),
        effects: effects.as_ref(),
        rca: rca.as_ref(),
        config: config.as_ref(),
        ontology: ontology.as_ref(),
        reference_levels: levels.as_ref(),
    };
    let answer = ask(&a.question, &state);
    if a.text {
        emit(None, &answer.text)
    } else {
        emit(None, &pretty(&answer))
    }
}

fn serve_cmd(a: ServeArgs) -> CliResult<()> {
    let mut opts = ServeOptions::default();
    opts.apply_env(std::env::vars()).map_err(CliError::Usage)?;
    if let Some(h) = a.host {
        opts.host = h;
    }
    if let Some(p) = a.port {
        opts.port = p;
    }
    if let Some(d) = a.data_dir {
        opts.data_dir = Some(d);
    }
    if let Some(d) = a.state_dir {
        opts.state_dir = Some(d);
    }
    if let Some(r) = a.replay_rate {
        opts.replay_rate = r;
    }
    if let Some(p) = a.config {
        opts.discovery = serde_json::from_str(&read(&p)?).at(&p)?;
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: "<runtime>".into(), source })?;
    rt.block_on(serve(opts)).map_err(|e| CliError::Service(e.to_string()))
}
