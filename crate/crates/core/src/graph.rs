//! Per-view KNN graphs and their renormalized adjacencies
//! `D̃^{-1/2} (A + I) D̃^{-1/2}`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::ndmath::{dot, Matrix};

/// Neighbor count used when none is configured.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Metric {
    Cosine,
    #[default]
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::config(format!(
                "unknown metric `{other}` (expected cosine or euclidean)"
            ))),
        }
    }
}

/// Renormalized adjacency per view.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    pub renorm_adjacencies: Vec<Matrix>,
    /// `None` when the graphs were supplied precomputed.
    pub k: Option<usize>,
    pub metric: Option<Metric>,
}

impl GraphSet {
    /// Wraps raw per-view adjacencies (e.g. loaded from disk), renormalizing
    /// each one.
    pub fn from_adjacencies(raw: &[Matrix]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::config("graph set needs at least one view"));
        }
        let m = raw[0].rows();
        let renorm_adjacencies = raw
            .iter()
            .map(|a| {
                if a.shape() != (m, m) {
                    return Err(Error::shape("GraphSet::from_adjacencies", (m, m), a.shape()));
                }
                renormalize(a)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            renorm_adjacencies,
            k: None,
            metric: None,
        })
    }

    pub fn num_views(&self) -> usize {
        self.renorm_adjacencies.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.renorm_adjacencies.first().map_or(0, Matrix::rows)
    }
}

/// Binary symmetric KNN adjacency with zero diagonal.
///
/// Row `i` picks its `k` most similar other rows, ordered by (distance,
/// index) so ties go to the lower index; the result is symmetrized with an
/// elementwise max. Under the cosine metric a zero-norm row has no defined
/// similarity: it neither picks nor is picked, and is left isolated.
pub fn knn_graph(features: &Matrix, k: usize, metric: Metric) -> Result<Matrix> {
    let m = features.rows();
    if m < 2 || k == 0 || k > m - 1 {
        return Err(Error::config(format!(
            "k = {k} out of range for {m} samples (need 1 <= k <= {})",
            m.saturating_sub(1)
        )));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("knn_graph features".into()));
    }

    let norms: Vec<f64> = (0..m).map(|i| dot(features.row(i), features.row(i)).sqrt()).collect();
    let isolated: Vec<bool> = match metric {
        Metric::Cosine => norms.iter().map(|&n| n == 0.0).collect(),
        Metric::Euclidean => vec![false; m],
    };
    let n_isolated = isolated.iter().filter(|&&z| z).count();
    if n_isolated > 0 {
        warn!("{n_isolated} zero-norm row(s) under cosine metric left isolated in KNN graph");
    }

    // Smaller key = closer.
    let key = |i: usize, j: usize| -> f64 {
        let (a, b) = (features.row(i), features.row(j));
        match metric {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Cosine => -dot(a, b) / (norms[i] * norms[j]),
        }
    };

    let neighbors: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            if isolated[i] {
                return Vec::new();
            }
            let mut cand: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i && !isolated[j])
                .map(|j| (key(i, j), j))
                .collect();
            cand.sort_by(neighbor_order);
            cand.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut adj = Matrix::zeros(m, m);
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            adj.set(i, j, 1.0);
            adj.set(j, i, 1.0);
        }
    }
    Ok(adj)
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the row sums of `A + I`.
pub fn renormalize(adjacency: &Matrix) -> Result<Matrix> {
    if !adjacency.is_square() {
        return Err(Error::Contract(format!(
            "adjacency must be square, got {:?}",
            adjacency.shape()
        )));
    }
    if !adjacency.is_symmetric(1e-12) {
        return Err(Error::Contract("adjacency must be symmetric".into()));
    }
    if adjacency.data().iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Contract(
            "adjacency entries must be finite and non-negative".into(),
        ));
    }
    let m = adjacency.rows();
    let mut tilde = adjacency.clone();
    for i in 0..m {
        tilde.set(i, i, tilde.get(i, i) + 1.0);
    }
    let degree: Vec<f64> = (0..m).map(|i| tilde.row(i).iter().sum()).collect();
    let mut out = tilde;
    for i in 0..m {
        for j in 0..m {
            let v = out.get(i, j);
            if v != 0.0 {
                out.set(i, j, v / (degree[i] * degree[j]).sqrt());
            }
        }
    }
    Ok(out)
}

/// KNN graph plus renormalization for every view.
pub fn build_graphset(dataset: &MultiViewDataset, k: usize, metric: Metric) -> Result<GraphSet> {
    if dataset.views.is_empty() {
        return Err(Error::config("dataset has no views"));
    }
    if dataset.num_samples() < 2 {
        return Err(Error::config("graph construction needs at least 2 samples"));
    }
    let renorm_adjacencies = dataset
        .views
        .par_iter()
        .map(|x| renormalize(&knn_graph(x, k, metric)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(GraphSet {
        renorm_adjacencies,
        k: Some(k),
        metric: Some(metric),
    })
}

fn neighbor_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}
