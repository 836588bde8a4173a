//! Hypergraph convolution `X' = Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2} X Θ + b`.
//!
//! The normalized propagation is applied by walking the incidence lists; `H` is
//! never materialized. Nodes in no hyperedge get `Dv^{-1/2} = 0`, so their output is
//! the bias alone.

use nalgebra::DMatrix;

use crate::hypergraph::CascadeHypergraph;
use crate::{Error, Result};

/// Precomputed normalization of one hypergraph.
#[derive(Debug, Clone)]
pub struct Propagation {
    num_nodes: usize,
    hyperedges: Vec<Vec<u32>>,
    /// `w_j / d_e(j)`
    edge_scale: Vec<f64>,
    /// `d_v(i)^{-1/2}`, 0 for isolated nodes.
    node_scale: Vec<f64>,
    node_edges: Vec<Vec<u32>>,
}

impl Propagation {
    pub fn new(h: &CascadeHypergraph) -> Self {
        let n = h.num_nodes();
        let node_scale = (0..n)
            .map(|i| {
                // Weighted degree; with unit weights this is the hyperedge count.
                let d: f64 = h.node_edges(i).iter().map(|&j| h.weight(j as usize)).sum();
                if d > 0.0 {
                    d.sqrt().recip()
                } else {
                    0.0
                }
            })
            .collect();
        let edge_scale = (0..h.num_hyperedges())
            .map(|j| h.weight(j) / h.edge_degree(j) as f64)
            .collect();
        Propagation {
            num_nodes: n,
            hyperedges: h.hyperedges().to_vec(),
            edge_scale,
            node_scale,
            node_edges: (0..n).map(|i| h.node_edges(i).to_vec()).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.node_scale[i] == 0.0
    }

    /// Applies the (symmetric) propagation operator to the rows of `z`.
    pub fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(z.nrows(), self.num_nodes, "propagation row count");
        let cols = z.ncols();
        let mut out = DMatrix::zeros(self.num_nodes, cols);
        let mut edge_sum = vec![0.0; self.hyperedges.len()];
        for c in 0..cols {
            let zc = z.column(c);
            for (j, e) in self.hyperedges.iter().enumerate() {
                let s: f64 = e.iter().map(|&i| self.node_scale[i as usize] * zc[i as usize]).sum();
                edge_sum[j] = s * self.edge_scale[j];
            }
            let mut oc = out.column_mut(c);
            for i in 0..self.num_nodes {
                let s: f64 = self.node_edges[i].iter().map(|&j| edge_sum[j as usize]).sum();
                oc[i] = self.node_scale[i] * s;
            }
        }
        out
    }
}

/// Convolution weights: `theta` is `in × out`, `bias` is `1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperConvParams {
    pub theta: DMatrix<f64>,
    pub bias: DMatrix<f64>,
}

pub(crate) fn add_row(m: &mut DMatrix<f64>, row: &DMatrix<f64>) {
    for mut r in m.row_iter_mut() {
        r += row;
    }
}

pub fn hyperconv_forward(x: &DMatrix<f64>, prop: &Propagation, params: &HyperConvParams) -> Result<DMatrix<f64>> {
    if x.nrows() != prop.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != hypergraph nodes {}",
            x.nrows(),
            prop.num_nodes()
        )));
    }
    if x.ncols() != params.theta.nrows() || params.bias.shape() != (1, params.theta.ncols()) {
        return Err(Error::Shape(format!(
            "features have {} columns, Θ is {}×{}, bias is {}×{}",
            x.ncols(),
            params.theta.nrows(),
            params.theta.ncols(),
            params.bias.nrows(),
            params.bias.ncols()
        )));
    }
    let mut out = prop.apply(&(x * &params.theta));
    add_row(&mut out, &params.bias);
    Ok(out)
}
