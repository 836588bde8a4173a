use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::Sgd),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

/// Full-batch optimizer over a fixed list of tensors.
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        first: Vec<DMatrix<f64>>,
        second: Vec<DMatrix<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, shapes: &[(usize, usize)]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                step: 0,
                first: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
                second: shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect(),
            },
        }
    }

    pub fn step(&mut self, params: &mut [&mut DMatrix<f64>], grads: &[&DMatrix<f64>]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.zip_apply(*g, |x, gx| *x -= *lr * gx);
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                first,
                second,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(first.iter_mut()).zip(second.iter_mut()) {
                    m.zip_apply(*g, |mx, gx| *mx = *beta1 * *mx + (1.0 - *beta1) * gx);
                    v.zip_apply(*g, |vx, gx| *vx = *beta2 * *vx + (1.0 - *beta2) * gx * gx);
                    for ((x, &mx), &vx) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                        *x -= *lr * (mx / c1) / ((vx / c2).sqrt() + *eps);
                    }
                }
            }
        }
    }
}
