//! Weighted linear surrogates fitted on scored coalitions.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::{CoalitionMask, MaskBatch};
use crate::registry::Registry;
use crate::tensor::{normal_equations, wls_solve, Cholesky, DenseMatrix};

/// R² below which a fit is flagged.
pub const R_SQUARED_WARNING: f64 = 0.90;

const LASSO_MAX_ITERATIONS: usize = 20_000;
const LASSO_TOLERANCE: f64 = 1e-10;
const LASSO_RHO: f64 = 1.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// L1 penalty of the lasso; derived from the data when absent.
    pub lasso_alpha: Option<f64>,
}

pub trait Surrogate: Send + Sync {
    fn name(&self) -> &'static str;

    /// Coefficients `[φ₀, φ₁, …]` for the design `[1 ‖ z]`.
    fn fit(&self, problem: &FitProblem, params: &FitParams) -> Result<Vec<f64>>;
}

pub struct WeightedLinear;
pub struct WeightedLasso;

/// The built-in surrogates.
pub fn surrogates() -> &'static Registry<dyn Surrogate> {
    static REGISTRY: OnceLock<Registry<dyn Surrogate>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn Surrogate> = Registry::new("surrogate");
        r.register("wlr", Arc::new(WeightedLinear));
        r.register("weighted-lasso", Arc::new(WeightedLasso));
        r.register("lasso", Arc::new(WeightedLasso));
        r
    })
}

/// Weighted regression problem on the design `[1 ‖ z]`. Kernel weights of
/// unpinned rows are scaled to sum to one; pinned rows keep their weight.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub design: DenseMatrix,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub pinned: Vec<bool>,
}

impl FitProblem {
    pub fn new(masks: &[CoalitionMask], targets: Vec<f64>, batch: &MaskBatch) -> Result<Self> {
        let n = masks.len();
        if targets.len() != n || batch.weights.len() != n || batch.pinned.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} masks, {} targets, {} weights, {} pin flags",
                targets.len(),
                batch.weights.len(),
                batch.pinned.len()
            )));
        }
        let m = masks.first().map_or(0, CoalitionMask::len);
        if n < m + 1 {
            return Err(Error::InsufficientSamples {
                samples: n,
                parameters: m + 1,
            });
        }
        let mut design = DenseMatrix::zeros(n, m + 1);
        for (i, z) in masks.iter().enumerate() {
            if z.len() != m {
                return Err(Error::DimensionMismatch("masks of different lengths".into()));
            }
            design[(i, 0)] = 1.0;
            for j in 0..m {
                if z.get(j) {
                    design[(i, j + 1)] = 1.0;
                }
            }
        }
        let free: f64 = batch
            .weights
            .iter()
            .zip(&batch.pinned)
            .filter(|(_, p)| !**p)
            .map(|(w, _)| w)
            .sum();
        let weights = batch
            .weights
            .iter()
            .zip(&batch.pinned)
            .map(|(&w, &p)| if p || free <= 0.0 { w } else { w / free })
            .collect();
        Ok(Self {
            design,
            targets,
            weights,
            pinned: batch.pinned.clone(),
        })
    }

    pub fn num_players(&self) -> usize {
        self.design.cols() - 1
    }

    pub fn predict(&self, coef: &[f64]) -> Vec<f64> {
        self.design.matvec(coef).expect("coefficient length checked by the caller")
    }

    /// Rows that enter goodness-of-fit and penalty statistics: the unpinned
    /// ones, or all rows when everything is pinned.
    fn free_rows(&self) -> Vec<usize> {
        let free: Vec<usize> = (0..self.targets.len()).filter(|&i| !self.pinned[i]).collect();
        if free.is_empty() {
            (0..self.targets.len()).collect()
        } else {
            free
        }
    }

    fn weighted_mean(&self, rows: &[usize]) -> f64 {
        let w: f64 = rows.iter().map(|&i| self.weights[i]).sum();
        if w <= 0.0 {
            return 0.0;
        }
        rows.iter().map(|&i| self.weights[i] * self.targets[i]).sum::<f64>() / w
    }

    /// Weighted R² over the unpinned rows.
    pub fn r_squared(&self, coef: &[f64]) -> f64 {
        let rows = self.free_rows();
        let pred = self.predict(coef);
        let mean = self.weighted_mean(&rows);
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for &i in &rows {
            ss_res += self.weights[i] * (self.targets[i] - pred[i]).powi(2);
            ss_tot += self.weights[i] * (self.targets[i] - mean).powi(2);
        }
        if ss_tot <= 1e-24 {
            return if ss_res <= 1e-24 { 1.0 } else { 0.0 };
        }
        1.0 - ss_res / ss_tot
    }

    /// `0.01 · max_j |Σ w_i z_ij (y_i − ȳ)|` over the unpinned rows.
    pub fn default_lasso_alpha(&self) -> f64 {
        let rows = self.free_rows();
        let mean = self.weighted_mean(&rows);
        (1..self.design.cols())
            .map(|j| {
                rows.iter()
                    .map(|&i| self.weights[i] * self.design[(i, j)] * (self.targets[i] - mean))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
            * 0.01
    }
}

impl Surrogate for WeightedLinear {
    fn name(&self) -> &'static str {
        "wlr"
    }

    fn fit(&self, problem: &FitProblem, _params: &FitParams) -> Result<Vec<f64>> {
        wls_solve(&problem.design, &problem.targets, &problem.weights, 0.0)
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

impl Surrogate for WeightedLasso {
    fn name(&self) -> &'static str {
        "weighted-lasso"
    }

    /// Minimizes `½ Σ wᵢ (yᵢ − g(zᵢ))² + α Σ_{j≥1} |φⱼ|` by ADMM; the
    /// intercept is not penalized.
    fn fit(&self, problem: &FitProblem, params: &FitParams) -> Result<Vec<f64>> {
        let alpha = params.lasso_alpha.unwrap_or_else(|| problem.default_lasso_alpha());
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("lasso penalty must be nonnegative, got {alpha}")));
        }
        let (a, b) = normal_equations(&problem.design, &problem.targets, &problem.weights);
        let p = a.rows();
        let factor = |rho: f64| -> Result<Cholesky> {
            let mut shifted = a.clone();
            for i in 0..p {
                shifted[(i, i)] += rho;
            }
            Cholesky::factor(&shifted).ok_or(Error::SingularSystem { condition: f64::INFINITY })
        };
        let rho = LASSO_RHO;
        let chol = factor(rho)?;
        let mut z = vec![0.0; p];
        let mut u = vec![0.0; p];
        for _ in 0..LASSO_MAX_ITERATIONS {
            let rhs: Vec<f64> = (0..p).map(|i| b[i] + rho * (z[i] - u[i])).collect();
            let x = chol.solve(&rhs);
            let z_old = z.clone();
            for i in 0..p {
                z[i] = if i == 0 {
                    x[i] + u[i]
                } else {
                    soft_threshold(x[i] + u[i], alpha / rho)
                };
                u[i] += x[i] - z[i];
            }
            let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
            let primal = norm(&(0..p).map(|i| x[i] - z[i]).collect::<Vec<_>>());
            let dual = rho * norm(&(0..p).map(|i| z[i] - z_old[i]).collect::<Vec<_>>());
            let scale = 1.0 + norm(&x).max(norm(&z));
            if primal <= LASSO_TOLERANCE * scale && dual <= LASSO_TOLERANCE * (1.0 + rho * norm(&u)) {
                break;
            }
        }
        Ok(z)
    }
}
