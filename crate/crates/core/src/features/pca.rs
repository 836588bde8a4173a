//! PCA by thin SVD of the column-centered data.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Reduced cascade features plus the fitted projection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `M × d` projected rows.
    pub rows: DMatrix<f64>,
    /// `D × d`, orthonormal columns ordered by decreasing variance.
    pub basis: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl FeatureMatrix {
    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Projects raw rows (`k × D`) with the fitted mean and basis.
    pub fn transform(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "expected {} raw columns, got {}",
                self.mean.len(),
                raw.ncols()
            )));
        }
        let mut centered = raw.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.basis)
    }
}

/// Centers `raw` by column mean and projects it onto its top `target_dim` right
/// singular vectors.
///
/// Each basis vector's sign is fixed so that its largest-magnitude entry is positive.
pub fn pca_fit_transform(raw: &DMatrix<f64>, target_dim: usize) -> Result<FeatureMatrix> {
    let (m, d) = raw.shape();
    if target_dim == 0 || target_dim > m.min(d) {
        return Err(Error::invalid(format!(
            "PCA target dimension {target_dim} must be in 1..={} for a {m}×{d} matrix",
            m.min(d)
        )));
    }
    let mean = raw.row_mean().transpose();
    let mut centered = raw.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    // Right singular vectors of a wide matrix are the left ones of its transpose.
    let (singular, vectors): (DVector<f64>, DMatrix<f64>) = if m >= d {
        let svd = centered.clone().svd(false, true);
        (svd.singular_values, svd.v_t.expect("requested V").transpose())
    } else {
        let svd = centered.transpose().svd(true, false);
        (svd.singular_values, svd.u.expect("requested U"))
    };

    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));
    let total_var: f64 = singular.iter().map(|s| s * s).sum();

    let mut basis = DMatrix::zeros(d, target_dim);
    let mut ratios = Vec::with_capacity(target_dim);
    for (out, &idx) in order.iter().take(target_dim).enumerate() {
        let mut col = vectors.column(idx).clone_owned();
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        basis.set_column(out, &col);
        let s = singular[idx];
        ratios.push(if total_var > 0.0 { s * s / total_var } else { 0.0 });
    }
    let rows = &centered * &basis;
    Ok(FeatureMatrix {
        rows,
        basis,
        mean,
        explained_variance_ratio: ratios,
    })
}
