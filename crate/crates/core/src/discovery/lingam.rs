use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{assignment::min_cost_assignment, ica::fast_ica, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::model::{CausalGraph, Dataset, EdgeOrigin, Provenance};

/// Output of a single LiNGAM fit.
#[derive(Debug, Clone)]
pub struct LingamFit {
    pub graph: CausalGraph,
    /// Variable indices, causes before effects.
    pub causal_order: Vec<usize>,
    /// Unpruned `B = I - W~` estimate.
    pub raw_weights: DMatrix<f64>,
    pub ica_converged: bool,
    pub ica_iterations: usize,
}

pub(crate) fn check_preconditions(d: &Dataset) -> Result<()> {
    let (n, p) = (d.rows(), d.n_vars());
    if n < 10 * p {
        return Err(Error::TooFewRows { rows: n, vars: p, required: 10 * p });
    }
    for (name, col) in d.variables().iter().zip(d.columns()) {
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::ConstantColumn(name.clone()));
        }
    }
    Ok(())
}

/// Fits an ICA-based LiNGAM model with the ICA initialised from `cfg.seed`.
pub fn fit_lingam(d: &Dataset, cfg: &DiscoveryConfig) -> Result<LingamFit> {
    cfg.validate()?;
    check_preconditions(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    fit_with_rng(d, cfg, &mut rng)
}

pub(crate) fn fit_with_rng(d: &Dataset, cfg: &DiscoveryConfig, rng: &mut ChaCha8Rng) -> Result<LingamFit> {
    let p = d.n_vars();
    let cols: Vec<&[f64]> = d.columns().iter().map(Vec::as_slice).collect();
    let ica = fast_ica(&cols, cfg.ica_max_iter, cfg.ica_tol, rng)?;
    if !ica.converged {
        tracing::warn!(iterations = ica.iterations, "FastICA did not converge; using last iterate");
    }
    let w = &ica.unmixing;

    // Permute rows so the diagonal has no near-zero entries: minimise sum 1/|w|.
    let cost = w.map(|v| if v == 0.0 { f64::MAX / (p as f64 + 1.0) } else { 1.0 / v.abs() });
    let assign = min_cost_assignment(&cost);
    let mut permuted = DMatrix::zeros(p, p);
    for (row, &col) in assign.iter().enumerate() {
        permuted.set_row(col, &w.row(row));
    }

    // Unit diagonal, then B = I - W~.
    let mut raw = DMatrix::zeros(p, p);
    for i in 0..p {
        let d_ii = permuted[(i, i)];
        for j in 0..p {
            raw[(i, j)] = if i == j { 0.0 } else { -permuted[(i, j)] / d_ii };
        }
    }

    let order = estimate_causal_order(&raw);
    let mut position = vec![0; p];
    for (k, &v) in order.iter().enumerate() {
        position[v] = k;
    }
    let mut pruned = raw.clone();
    for i in 0..p {
        for j in 0..p {
            if pruned[(i, j)].abs() < cfg.prune_threshold {
                pruned[(i, j)] = 0.0;
            }
            // only earlier variables in the order may cause later ones
            if position[j] >= position[i] {
                pruned[(i, j)] = 0.0;
            }
        }
    }

    let provenance = Provenance::new(
        "lingam",
        serde_json::json!({
            "config": cfg.to_json(),
            "ica_converged": ica.converged,
            "ica_iterations": ica.iterations,
        }),
    );
    let graph = CausalGraph::from_matrix(d.variables().to_vec(), &pruned, EdgeOrigin::SingleFit, provenance)?;
    Ok(LingamFit {
        graph,
        causal_order: order,
        raw_weights: raw,
        ica_converged: ica.converged,
        ica_iterations: ica.iterations,
    })
}

/// Finds the variable order that best makes `b` strictly lower triangular.
///
/// The `p(p+1)/2` smallest entries are zeroed first, then further entries in
/// increasing magnitude until a permutation to lower-triangular form exists.
pub fn estimate_causal_order(b: &DMatrix<f64>) -> Vec<usize> {
    let p = b.nrows();
    let mut m = b.map(f64::abs);
    let mut positions: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).collect();
    positions.sort_by(|a, c| m[*a].total_cmp(&m[*c]).then(a.cmp(c)));
    let initial = p * (p + 1) / 2;
    for &pos in positions.iter().take(initial) {
        m[pos] = 0.0;
    }
    for &pos in positions.iter().skip(initial) {
        if let Some(order) = search_causal_order(&m) {
            return order;
        }
        m[pos] = 0.0;
    }
    search_causal_order(&m).expect("an all-zero matrix always has an order")
}

/// Repeatedly removes a variable whose row is all zero (no remaining parents).
fn search_causal_order(m: &DMatrix<f64>) -> Option<Vec<usize>> {
    let p = m.nrows();
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut order = Vec::with_capacity(p);
    while !remaining.is_empty() {
        let k = remaining
            .iter()
            .position(|&i| remaining.iter().all(|&j| m[(i, j)] == 0.0))?;
        order.push(remaining.remove(k));
    }
    Some(order)
}
