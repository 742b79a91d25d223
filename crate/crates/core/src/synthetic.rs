//! Linear SEM generators with known ground truth, used as oracles and fixtures.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::effects::total_effects_from_matrix;
use crate::model::{topological_order, Acyclicity, CausalGraph, Dataset, EdgeOrigin, Provenance};
use crate::rca::{fit_tolerances, ToleranceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Uniform on [-1, 1].
    Uniform,
    Gaussian,
}

/// `x = B x + e` with independent noise `e`.
#[derive(Debug, Clone)]
pub struct LinearSem {
    pub nodes: Vec<String>,
    /// `b[(i, j)]` is the direct effect of `j` on `i`.
    pub b: DMatrix<f64>,
    pub noise: NoiseKind,
    /// Per-variable noise scale multiplier.
    pub noise_scale: Vec<f64>,
    order: Vec<usize>,
}

impl LinearSem {
    pub fn new(nodes: Vec<String>, b: DMatrix<f64>, noise: NoiseKind) -> Self {
        let order = match topological_order(&b) {
            Acyclicity::Order(o) => o,
            Acyclicity::Cycle(c) => panic!("SEM weight matrix has a cycle through {c:?}"),
        };
        let noise_scale = vec![1.0; nodes.len()];
        Self { nodes, b, noise, noise_scale, order }
    }

    /// Edges as `(source, target, weight)` index triples.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize, f64)], noise: NoiseKind) -> Self {
        let p = nodes.len();
        let mut b = DMatrix::zeros(p, p);
        for &(s, t, w) in edges {
            b[(t, s)] = w;
        }
        Self::new(nodes, b, noise)
    }

    /// Random DAG over `x1..xp`: random causal order, each forward pair linked with
    /// probability `edge_prob`, weights of magnitude in [0.5, 1.0] with random sign.
    pub fn random(p: usize, edge_prob: f64, seed: u64, noise: NoiseKind) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut rng);
        let mut b = DMatrix::zeros(p, p);
        for a in 0..p {
            for c in (a + 1)..p {
                if rng.random::<f64>() < edge_prob {
                    let mag = rng.random_range(0.5..1.0);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    b[(order[c], order[a])] = sign * mag;
                }
            }
        }
        let nodes = (1..=p).map(|i| format!("x{i}")).collect();
        Self::new(nodes, b, noise)
    }

    pub fn p(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.b.iter().filter(|w| **w != 0.0).count()
    }

    fn draw_noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.noise {
            NoiseKind::Uniform => rng.random_range(-1.0..1.0),
            NoiseKind::Gaussian => rng.sample(StandardNormal),
        }
    }

    /// One joint draw of all variables.
    pub fn sample_row(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = self.p();
        let mut x = vec![0.0; p];
        let noise: Vec<f64> = (0..p).map(|i| self.noise_scale[i] * self.draw_noise(rng)).collect();
        for &i in &self.order {
            let mut v = noise[i];
            for j in 0..p {
                let w = self.b[(i, j)];
                if w != 0.0 {
                    v += w * x[j];
                }
            }
            x[i] = v;
        }
        x
    }

    pub fn sample_rows(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample_row(&mut rng)).collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        Dataset::from_rows(self.nodes.clone(), &self.sample_rows(n, seed)).expect("generated data is valid")
    }

    /// Samples all variables and returns only those not listed in `hidden`.
    pub fn sample_observed(&self, n: usize, seed: u64, hidden: &[usize]) -> Dataset {
        let keep: Vec<usize> = (0..self.p()).filter(|i| !hidden.contains(i)).collect();
        let rows: Vec<Vec<f64>> = self
            .sample_rows(n, seed)
            .into_iter()
            .map(|r| keep.iter().map(|&i| r[i]).collect())
            .collect();
        let names = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        Dataset::from_rows(names, &rows).expect("generated data is valid")
    }

    /// Ground-truth graph restricted to the observed (non-hidden) variables.
    pub fn graph_without(&self, hidden: &[usize]) -> CausalGraph {
        let keep: Vec<usize> = (0..self.p()).filter(|i| !hidden.contains(i)).collect();
        let b = DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.b[(keep[r], keep[c])]);
        let names = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        CausalGraph::from_matrix(names, &b, EdgeOrigin::SingleFit, Provenance::new("ground_truth", serde_json::Value::Null))
            .expect("SEM graph is acyclic")
    }

    pub fn graph(&self) -> CausalGraph {
        self.graph_without(&[])
    }
}

/// How an injected fault reaches the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Only the faulty sensor reads out of band; the process itself is unaffected.
    Sensor,
    /// The root variable's own disturbance shifts, and the shift flows to its descendants.
    #[default]
    Propagated,
}

/// One injected fault: an observation where exactly one ancestor of `target` is out of band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultCase {
    pub id: usize,
    pub target: String,
    pub root_cause: String,
    pub cycle_state: String,
    pub values: Vec<f64>,
}

/// Plant generation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlantOptions {
    pub mode: FaultMode,
    /// Adds a hidden driver of the target and an observed variable that shares it,
    /// so the extra variable correlates with the target without causing it.
    pub confounded: bool,
}

/// An 8-variable style plant: SEM, normal history, fitted tolerances and fault cases.
#[derive(Debug, Clone)]
pub struct SyntheticPlant {
    /// Full generating SEM, hidden variables included.
    pub sem: LinearSem,
    /// Observed variable names; fault values follow this order.
    pub nodes: Vec<String>,
    pub hidden: Vec<usize>,
    pub history: Dataset,
    pub tolerances: ToleranceSpec,
    pub target: String,
    pub faults: Vec<FaultCase>,
}

impl SyntheticPlant {
    /// Generates a plant with `p` variables, `n` history rows and `trials` propagated faults.
    pub fn generate(p: usize, n: usize, trials: usize, seed: u64) -> Self {
        Self::generate_with(p, n, trials, seed, PlantOptions::default())
    }

    /// The target is the variable with the most ancestors. Each fault takes a
    /// fresh in-band draw and moves one random ancestor of the target outside
    /// its fitted band by 0.2 to 1.0 band widths.
    pub fn generate_with(p: usize, n: usize, trials: usize, seed: u64, opts: PlantOptions) -> Self {
        let base = plant_sem(p, seed);
        let graph = base.graph();
        let target_idx = (0..p)
            .max_by_key(|&i| (graph.ancestors(i).len(), std::cmp::Reverse(i)))
            .expect("p > 0");
        let ancestors = graph.ancestors(target_idx);
        let (sem, hidden) = if opts.confounded {
            // observed x{p+1} and hidden u share a common cause with the target
            let mut b = DMatrix::zeros(p + 2, p + 2);
            b.view_mut((0, 0), (p, p)).copy_from(&base.b);
            b[(target_idx, p + 1)] = 1.5;
            b[(p, p + 1)] = 1.5;
            let mut nodes = base.nodes.clone();
            nodes.push(format!("x{}", p + 1));
            nodes.push("u".into());
            (LinearSem::new(nodes, b, base.noise), vec![p + 1])
        } else {
            (base, Vec::new())
        };
        let keep: Vec<usize> = (0..sem.p()).filter(|i| !hidden.contains(i)).collect();
        let nodes: Vec<String> = keep.iter().map(|&i| sem.nodes[i].clone()).collect();
        let history = sem.sample_observed(n, seed.wrapping_add(1), &hidden);
        let tolerances = fit_tolerances(&history, 3.0, false).expect("history has non-constant columns");
        let target = sem.nodes[target_idx].clone();
        let total = total_effects_from_matrix(sem.nodes.clone(), &sem.b).expect("SEM is acyclic").total;

        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
        let mut faults = Vec::with_capacity(trials);
        while faults.len() < trials {
            let mut values = sem.sample_row(&mut rng);
            let in_band = keep.iter().all(|&i| {
                let band = tolerances.band(&sem.nodes[i], "*").expect("fitted for every variable");
                values[i] >= band.min && values[i] <= band.max
            });
            if !in_band {
                continue;
            }
            let root = ancestors[rng.random_range(0..ancestors.len())];
            let band = tolerances.band(&sem.nodes[root], "*").expect("fitted");
            let width = band.max - band.min;
            let excess = rng.random_range(0.2..1.0) * width;
            let faulty = if rng.random::<bool>() { band.max + excess } else { band.min - excess };
            match opts.mode {
                FaultMode::Sensor => values[root] = faulty,
                FaultMode::Propagated => {
                    let shift = faulty - values[root];
                    for (i, v) in values.iter_mut().enumerate() {
                        *v += total[(i, root)] * shift;
                    }
                }
            }
            faults.push(FaultCase {
                id: faults.len(),
                target: target.clone(),
                root_cause: sem.nodes[root].clone(),
                cycle_state: "*".into(),
                values: keep.iter().map(|&i| values[i]).collect(),
            });
        }
        Self { sem, nodes, hidden, history, tolerances, target, faults }
    }

    /// Ground-truth graph over the observed variables.
    pub fn truth_graph(&self) -> CausalGraph {
        self.sem.graph_without(&self.hidden)
    }
}

/// Random connected-ish plant DAG: guarantees the last variable in causal order
/// has at least three ancestors.
fn plant_sem(p: usize, seed: u64) -> LinearSem {
    let mut attempt = 0;
    loop {
        let sem = LinearSem::random(p, 0.35, seed.wrapping_mul(31).wrapping_add(attempt), NoiseKind::Uniform);
        let g = sem.graph();
        if (0..p).any(|i| g.ancestors(i).len() >= 3.min(p.saturating_sub(1))) {
            return sem;
        }
        attempt += 1;
    }
}
