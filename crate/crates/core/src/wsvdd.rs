//! Weighted Support Vector Data Description with a Gaussian kernel.
//!
//! The dual
//!
//! ```text
//! max  Σ αᵢ K(xᵢ,xᵢ) − Σᵢ Σⱼ αᵢ αⱼ K(xᵢ,xⱼ)
//! s.t. Σ αᵢ = 1,   0 ≤ αᵢ ≤ bᵢ P
//! ```
//!
//! is solved by pairwise coordinate ascent (SMO): each update moves mass
//! between two multipliers along the simplex, which keeps the equality
//! constraint and lets the box be enforced by clipping the step. The working
//! pair is the maximal violator for the first index and a second-order gain
//! for the second.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Vector;

/// Margin used to decide that a multiplier is strictly inside its box.
pub const INTERIOR_MARGIN: f64 = 1e-8;

const MIN_CURVATURE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("kernel width must be positive, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// exp(−γ‖x − y‖²).
pub fn kernel(x: &Vector, y: &Vector, gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(gaussian(x, y, gamma))
}

#[inline]
fn gaussian(x: &Vector, y: &Vector, gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// A training vector and its weight b ∈ (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub x: Vector,
    pub weight: f64,
}

impl WeightedSample {
    pub fn new(x: Vector, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::Config(format!("sample weight must lie in (0, 1], got {weight}")));
        }
        Ok(Self { x, weight })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    /// Update budget in sweeps; one sweep is `v` pair updates.
    pub max_sweeps: usize,
    /// Keep the dual objective after every update.
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_sweeps: 10_000, record_objective: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Dual objective Σαᵢ Kᵢᵢ − αᵀKα at `alpha`.
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
    /// Objective after initialization and after each update, when recorded.
    pub objective_trace: Vec<f64>,
}

/// Maximizes the W-SVDD dual for a precomputed kernel matrix and per-sample
/// upper bounds `upper[i] = bᵢ P`.
pub fn solve_dual(gram: &DMatrix<f64>, upper: &[f64], opts: &SolverOptions) -> Result<DualSolution> {
    let v = upper.len();
    if v == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if gram.nrows() != v || gram.ncols() != v {
        return Err(Error::DimensionMismatch { expected: v, got: gram.nrows() });
    }
    let total: f64 = upper.iter().sum();
    if total < 1.0 {
        return Err(Error::Infeasible { total });
    }

    let diag: Vec<f64> = (0..v).map(|i| gram[(i, i)]).collect();
    let mut alpha: Vec<f64> = upper.iter().map(|c| c / total).collect();

    // gradient of the minimization form αᵀKα − diagᵀα
    let mut grad: Vec<f64> = (0..v)
        .map(|i| 2.0 * (0..v).map(|j| gram[(i, j)] * alpha[j]).sum::<f64>() - diag[i])
        .collect();

    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        alpha.iter().zip(&diag).zip(grad).map(|((a, d), g)| a * (d - g)).sum::<f64>() * 0.5
    };

    let mut trace = Vec::new();
    if opts.record_objective {
        trace.push(objective(&alpha, &grad));
    }

    let budget = opts.max_sweeps.saturating_mul(v).max(1);
    let mut iterations = 0;
    loop {
        // i: may increase, steepest descent direction
        let mut i = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        for k in 0..v {
            if alpha[k] < upper[k] && -grad[k] > m_up {
                m_up = -grad[k];
                i = k;
            }
        }
        let mut m_low = f64::INFINITY;
        for k in 0..v {
            if alpha[k] > 0.0 && -grad[k] < m_low {
                m_low = -grad[k];
            }
        }
        let violation = if i == usize::MAX { 0.0 } else { (m_up - m_low).max(0.0) };
        if violation <= opts.tol {
            return Ok(DualSolution {
                objective: objective(&alpha, &grad),
                alpha,
                iterations,
                max_violation: violation,
                objective_trace: trace,
            });
        }
        if iterations >= budget {
            return Err(Error::NonConvergence { iterations, violation });
        }

        // j: may decrease, best second-order gain
        let mut j = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for k in 0..v {
            if k == i || alpha[k] <= 0.0 {
                continue;
            }
            let b = m_up + grad[k];
            if b <= 0.0 {
                continue;
            }
            let a = (diag[i] + diag[k] - 2.0 * gram[(i, k)]).max(MIN_CURVATURE);
            let gain = b * b / a;
            if gain > best {
                best = gain;
                j = k;
            }
        }
        if j == usize::MAX {
            // violation above tol implies a partner exists; guard against rounding
            return Err(Error::NonConvergence { iterations, violation });
        }

        let curvature = diag[i] + diag[j] - 2.0 * gram[(i, j)];
        let room_i = upper[i] - alpha[i];
        let room_j = alpha[j];
        let unconstrained = if curvature > MIN_CURVATURE {
            (grad[j] - grad[i]) / (2.0 * curvature)
        } else {
            f64::INFINITY
        };
        let delta = unconstrained.min(room_i).min(room_j);

        if delta == room_i {
            alpha[i] = upper[i];
        } else {
            alpha[i] += delta;
        }
        if delta == room_j {
            alpha[j] = 0.0;
        } else {
            alpha[j] -= delta;
        }
        for (k, g) in grad.iter_mut().enumerate() {
            *g += 2.0 * delta * (gram[(k, i)] - gram[(k, j)]);
        }
        iterations += 1;
        if opts.record_objective {
            trace.push(objective(&alpha, &grad));
        }
    }
}

/// A trained hypersphere.
#[derive(Debug, Clone, PartialEq)]
pub struct WsvddModel {
    samples: Vec<WeightedSample>,
    alpha: Vec<f64>,
    radius_sq: f64,
    centering_mean: Vector,
    gamma: f64,
    const_term: f64,
    objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Squared feature-space distance to the center minus r².
    pub score: f64,
    pub is_outlier: bool,
}

pub fn gram_matrix(points: &[&Vector], gamma: f64) -> DMatrix<f64> {
    let v = points.len();
    let mut k = DMatrix::zeros(v, v);
    for i in 0..v {
        k[(i, i)] = 1.0;
        for j in 0..i {
            let kij = gaussian(points[i], points[j], gamma);
            k[(i, j)] = kij;
            k[(j, i)] = kij;
        }
    }
    k
}

/// Trains a W-SVDD model on already-centered samples.
pub fn train(samples: Vec<WeightedSample>, penalty: f64, kernel: KernelParams, opts: &SolverOptions) -> Result<WsvddModel> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::Config(format!("penalty must be positive, got {penalty}")));
    }
    let dim = samples[0].x.len();
    if let Some(bad) = samples.iter().find(|s| s.x.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.x.len() });
    }
    let gamma = kernel.gamma();
    let points: Vec<&Vector> = samples.iter().map(|s| &s.x).collect();
    let gram = gram_matrix(&points, gamma);
    let upper: Vec<f64> = samples.iter().map(|s| s.weight * penalty).collect();
    let sol = solve_dual(&gram, &upper, opts)?;

    let v = samples.len();
    let k_alpha: Vec<f64> = (0..v).map(|i| (0..v).map(|j| gram[(i, j)] * sol.alpha[j]).sum()).collect();
    let const_term: f64 = sol.alpha.iter().zip(&k_alpha).map(|(a, ka)| a * ka).sum();
    let dist_sq = |i: usize| gram[(i, i)] - 2.0 * k_alpha[i] + const_term;

    let interior = (0..v)
        .filter(|&i| sol.alpha[i] > INTERIOR_MARGIN && sol.alpha[i] < upper[i] - INTERIOR_MARGIN)
        .min_by(|&a, &b| {
            let da = (sol.alpha[a] - upper[a] / 2.0).abs();
            let db = (sol.alpha[b] - upper[b] / 2.0).abs();
            da.total_cmp(&db)
        });
    let radius_sq = match interior {
        Some(s) => dist_sq(s),
        None => (0..v).filter(|&i| sol.alpha[i] > 0.0).map(dist_sq).fold(0.0, f64::max),
    }
    .max(0.0);

    Ok(WsvddModel {
        samples,
        alpha: sol.alpha,
        radius_sq,
        centering_mean: Vector::zeros(dim),
        gamma,
        const_term,
        objective: sol.objective,
    })
}

/// Scores a point that the caller has already centered with
/// [`WsvddModel::centering_mean`].
pub fn evaluate(model: &WsvddModel, x: &Vector) -> Result<Evaluation> {
    let dim = model.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    let cross: f64 = model.samples.iter().zip(&model.alpha).map(|(s, a)| a * gaussian(x, &s.x, model.gamma)).sum();
    let score = 1.0 - 2.0 * cross + model.const_term - model.radius_sq;
    Ok(Evaluation { score, is_outlier: score > 0.0 })
}

impl WsvddModel {
    pub fn with_centering_mean(mut self, mean: Vector) -> Self {
        self.centering_mean = mean;
        self
    }

    pub fn samples(&self) -> &[WeightedSample] {
        &self.samples
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn centering_mean(&self) -> &Vector {
        &self.centering_mean
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Σᵢ Σⱼ αᵢ αⱼ K(xᵢ, xⱼ).
    pub fn const_term(&self) -> f64 {
        self.const_term
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn dim(&self) -> usize {
        self.centering_mean.len()
    }

    pub fn penalty_bounds(&self, penalty: f64) -> Vec<f64> {
        self.samples.iter().map(|s| s.weight * penalty).collect()
    }
}
