use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{topological_order, Acyclicity, CausalGraph};

/// Direct effects `B`, total effects `T = (I - B)^-1` and their hop decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectMatrices {
    pub nodes: Vec<String>,
    pub direct: DMatrix<f64>,
    pub total: DMatrix<f64>,
    pub spectral_radius: f64,
    pub acyclic: bool,
}

impl EffectMatrices {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.nodes.iter().position(|n| n == name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Total effect of `source` on `target`.
    pub fn tau(&self, source: &str, target: &str) -> Result<f64> {
        Ok(self.total[(self.index_of(target)?, self.index_of(source)?)])
    }

    /// `[I, B, B^2, ..., B^k]`.
    pub fn hops(&self, k: usize) -> Vec<DMatrix<f64>> {
        let p = self.nodes.len();
        let mut out = Vec::with_capacity(k + 1);
        let mut cur = DMatrix::identity(p, p);
        out.push(cur.clone());
        for _ in 0..k {
            cur = &self.direct * cur;
            out.push(cur.clone());
        }
        out
    }

    /// Hops up to `p - 1`, enough to reproduce `T` for an acyclic graph.
    pub fn default_hops(&self) -> Vec<DMatrix<f64>> {
        self.hops(self.nodes.len().saturating_sub(1))
    }

    pub fn to_document(&self, include_hops: bool) -> EffectsDocument {
        EffectsDocument {
            nodes: self.nodes.clone(),
            direct: rows(&self.direct),
            total: rows(&self.total),
            spectral_radius: self.spectral_radius,
            acyclic: self.acyclic,
            hops: include_hops.then(|| self.default_hops().iter().map(rows).collect()),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Row-major JSON form of [`EffectMatrices`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsDocument {
    pub nodes: Vec<String>,
    pub direct: Vec<Vec<f64>>,
    pub total: Vec<Vec<f64>>,
    pub spectral_radius: f64,
    pub acyclic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hops: Option<Vec<Vec<Vec<f64>>>>,
}

pub fn total_effects(g: &CausalGraph) -> Result<EffectMatrices> {
    total_effects_from_matrix(g.nodes().to_vec(), g.weights())
}

/// Solves `(I - B) T = I`.
///
/// Acyclic patterns are solved by substitution in topological order, which keeps
/// exact zeros for non-ancestor pairs. Cyclic patterns fall back to LU.
pub fn total_effects_from_matrix(nodes: Vec<String>, b: &DMatrix<f64>) -> Result<EffectMatrices> {
    let p = nodes.len();
    if b.nrows() != p || b.ncols() != p {
        return Err(Error::InvalidArgument("B shape does not match node count".into()));
    }
    match topological_order(b) {
        Acyclicity::Order(order) => {
            let mut t = DMatrix::zeros(p, p);
            for j in 0..p {
                for &i in &order {
                    let mut v = if i == j { 1.0 } else { 0.0 };
                    for k in 0..p {
                        let w = b[(i, k)];
                        if w != 0.0 {
                            v += w * t[(k, j)];
                        }
                    }
                    t[(i, j)] = v;
                }
            }
            // B is nilpotent, so every eigenvalue is exactly zero
            Ok(EffectMatrices { nodes, direct: b.clone(), total: t, spectral_radius: 0.0, acyclic: true })
        }
        Acyclicity::Cycle(_) => {
            let rho = b
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if rho >= 1.0 {
                tracing::warn!(spectral_radius = rho, "cyclic B with spectral radius >= 1; series expansion invalid");
            }
            let a = DMatrix::identity(p, p) - b;
            let t = a.lu().try_inverse().ok_or(Error::SingularMatrix)?;
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularMatrix);
            }
            Ok(EffectMatrices { nodes, direct: b.clone(), total: t, spectral_radius: rho, acyclic: false })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEffect {
    pub node: String,
    pub tau: f64,
    pub delta_pred: f64,
}

/// Predicted change `(a2 - a1) * tau` for every node downstream of `source`.
pub fn predict_intervention(em: &EffectMatrices, source: &str, a1: f64, a2: f64) -> Result<Vec<InterventionEffect>> {
    let j = em.index_of(source)?;
    Ok((0..em.nodes.len())
        .filter(|&i| i != j && em.total[(i, j)] != 0.0)
        .map(|i| {
            let tau = em.total[(i, j)];
            InterventionEffect { node: em.nodes[i].clone(), tau, delta_pred: (a2 - a1) * tau }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EdgeRecord, Provenance};

    fn graph(nodes: &[&str], edges: &[(&str, &str, f64)]) -> CausalGraph {
        CausalGraph::from_edges(
            nodes.iter().map(|s| s.to_string()).collect(),
            edges.iter().map(|(s, t, w)| EdgeRecord::manual(*s, *t, *w)).collect(),
            Provenance::default(),
        )
        .unwrap()
    }

    #[test]
    fn empty_graph_is_identity() {
        let em = total_effects(&graph(&["A", "B", "C"], &[])).unwrap();
        assert_eq!(em.total, DMatrix::identity(3, 3));
    }

    #[test]
    fn chain() {
        let em = total_effects(&graph(&["A", "B", "C"], &[("A", "B", 2.0), ("B", "C", 3.0)])).unwrap();
        // series oracle: I + B + B^2
        let b = em.direct.clone();
        let series = DMatrix::identity(3, 3) + &b + &b * &b;
        assert_eq!(em.total, series);
        assert_eq!(em.tau("A", "C").unwrap(), 6.0);
        assert_eq!(em.tau("A", "B").unwrap(), 2.0);
        assert_eq!(em.tau("B", "C").unwrap(), 3.0);
        assert_eq!(em.tau("C", "A").unwrap(), 0.0);
    }

    #[test]
    fn diamond_sums_paths() {
        let em = total_effects(&graph(
            &["A", "B", "C", "D"],
            &[("A", "B", 1.0), ("A", "C", 1.0), ("B", "D", 1.0), ("C", "D", 1.0)],
        ))
        .unwrap();
        assert_eq!(em.tau("A", "D").unwrap(), 2.0);
        for i in 0..4 {
            assert_eq!(em.total[(i, i)], 1.0);
        }
    }

    #[test]
    fn cyclic_matrix_uses_lu() {
        let mut b = DMatrix::zeros(2, 2);
        b[(1, 0)] = 0.5;
        b[(0, 1)] = 0.5;
        let em = total_effects_from_matrix(vec!["A".into(), "B".into()], &b).unwrap();
        assert!(!em.acyclic);
        assert!((em.spectral_radius - 0.5).abs() < 1e-12);
        let check = (DMatrix::identity(2, 2) - &b) * &em.total;
        assert!((check - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_system() {
        let mut b = DMatrix::zeros(2, 2);
        b[(1, 0)] = 1.0;
        b[(0, 1)] = 1.0;
        assert!(matches!(total_effects_from_matrix(vec!["A".into(), "B".into()], &b), Err(Error::SingularMatrix)));
    }

    #[test]
    fn interventions() {
        let em = total_effects(&graph(&["A", "B", "C"], &[("A", "B", 2.0), ("B", "C", 3.0)])).unwrap();
        let out = predict_intervention(&em, "A", 0.0, 1.0).unwrap();
        let c = out.iter().find(|e| e.node == "C").unwrap();
        assert_eq!(c.delta_pred, 6.0);
        let b = out.iter().find(|e| e.node == "B").unwrap();
        assert_eq!(predict_intervention(&em, "A", 1.0, 3.0).unwrap()[0].delta_pred, 2.0 * b.delta_pred);
        assert!(predict_intervention(&em, "A", 2.0, 2.0).unwrap().iter().all(|e| e.delta_pred == 0.0));
        assert!(predict_intervention(&em, "C", 0.0, 1.0).unwrap().is_empty());
        assert!(matches!(predict_intervention(&em, "Z", 0.0, 1.0), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn hops_decomposition() {
        let em = total_effects(&graph(&["A", "B", "C"], &[("A", "B", 2.0), ("B", "C", 3.0)])).unwrap();
        let hops = em.default_hops();
        assert_eq!(hops.len(), 3);
        assert_eq!(hops[2][(2, 0)], 6.0);
        let sum = hops.iter().fold(DMatrix::zeros(3, 3), |acc, h| acc + h);
        assert_eq!(sum, em.total);
        let doc = em.to_document(true);
        assert_eq!(doc.total[2][0], 6.0);
        assert_eq!(doc.hops.unwrap().len(), 3);
    }
}
