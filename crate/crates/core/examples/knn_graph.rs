//! Build KNN graphs for two views of the same points and look at the
//! renormalized operators the GCN convolves with.

use lgcn_ff::data::MultiViewDataset;
use lgcn_ff::graph::{build_graphset, knn_graph, renormalize, GraphSet, Metric};
use lgcn_ff::ndmath::Matrix;

/// Points on a line in one view and on a circle in the other.
pub fn views() -> Vec<Matrix> {
    let line = Matrix::from_fn(6, 1, |i, _| i as f64);
    let circle = Matrix::from_fn(6, 2, |i, j| {
        let a = i as f64 * std::f64::consts::TAU / 6.0;
        if j == 0 { a.cos() } else { a.sin() }
    });
    vec![line, circle]
}

pub fn run(k: usize) -> lgcn_ff::Result<GraphSet> {
    let views = views();
    for (v, x) in views.iter().enumerate() {
        let adj = knn_graph(x, k, Metric::Euclidean)?;
        let degrees: Vec<f64> = (0..adj.rows()).map(|i| adj.row(i).iter().sum()).collect();
        println!("view {v}: degrees {degrees:?}");
        let a = renormalize(&adj)?;
        for i in 0..a.rows() {
            let row: Vec<String> = a.row(i).iter().map(|x| format!("{x:.3}")).collect();
            println!("  {}", row.join(" "));
        }
    }
    let ds = MultiViewDataset::new("shapes", views, vec![0, 0, 0, 1, 1, 1], 2)?;
    build_graphset(&ds, k, Metric::Euclidean)
}

fn main() -> lgcn_ff::Result<()> {
    let graphs = run(2)?;
    println!("{} views over {} nodes", graphs.num_views(), graphs.num_nodes());
    Ok(())
}
