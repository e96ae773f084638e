//! Mean-error theory of attack-free clustered diffusion.
//!
//! With ē_t = E{w_t − w°} stacked over nodes,
//!
//! ```text
//! ē_{t+1} = A_Iᵀ [I − μ(Ω_R + ηQ)] ē_t − μη A_Iᵀ Q w°
//! ```
//!
//! where A_I = A ⊗ I_L lifts the combination matrix, Ω_R = blockdiag(R_n)
//! with R_n = Σ_l c_ln R_{u,l}, and Q = I − G ⊗ I_L carries the
//! inter-cluster weights. The recursion is stable iff the spectral radius of
//! its transition matrix is below one; its fixed point is the asymptotic
//! mean deviation.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::diffusion::{adapt_weights, inter_cluster_weights, AdaptWeights};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    dim: usize,
    /// A with entry (l, n) = a_ln; columns sum to one.
    combination: DMatrix<f64>,
    /// R_n, one L×L block per node.
    regressor_cov: Vec<DMatrix<f64>>,
    /// G with entry (n, k) = ρ_nk, and G_nn = 1 for nodes without
    /// inter-cluster neighbors.
    inter: DMatrix<f64>,
    targets: DVector<f64>,
}

impl NetworkMatrices {
    pub fn new(
        combination: DMatrix<f64>,
        regressor_cov: Vec<DMatrix<f64>>,
        inter: DMatrix<f64>,
        targets: DVector<f64>,
    ) -> Result<Self> {
        let n = combination.nrows();
        if n == 0 || combination.ncols() != n || inter.shape() != (n, n) || regressor_cov.len() != n {
            return Err(Error::Config("network matrices have inconsistent node counts".into()));
        }
        let dim = regressor_cov[0].nrows();
        if regressor_cov.iter().any(|r| r.shape() != (dim, dim)) || targets.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, got: targets.len() });
        }
        for col in 0..n {
            let s: f64 = combination.column(col).sum();
            if (s - 1.0).abs() > 1e-12 || combination.column(col).iter().any(|&a| a < 0.0) {
                return Err(Error::Config(format!("combination column {} is not stochastic", col + 1)));
            }
        }
        Ok(Self { dim, combination, regressor_cov, inter, targets })
    }

    /// Uniform a_ln over N_n^+, uniform ρ over N_n^-, R_n = Σ c_ln σ²_{u,l} I.
    pub fn from_scenario(scenario: &Scenario, adapt: AdaptWeights) -> Self {
        let topo = &scenario.topology;
        let n = topo.num_nodes();
        let dim = scenario.dim();

        let mut combination = DMatrix::zeros(n, n);
        for k in 0..n {
            let hood = topo.same_cluster(k);
            for &l in hood {
                combination[(l, k)] = 1.0 / hood.len() as f64;
            }
        }
        let regressor_cov = (0..n)
            .map(|k| {
                let r: f64 = adapt_weights(topo, k, adapt)
                    .into_iter()
                    .map(|(l, c)| c * scenario.signal.regressor_variance(l))
                    .sum();
                DMatrix::identity(dim, dim) * r
            })
            .collect();
        let mut inter = DMatrix::zeros(n, n);
        for (k, row) in inter_cluster_weights(topo).into_iter().enumerate() {
            if row.is_empty() {
                inter[(k, k)] = 1.0;
            }
            for (j, rho) in row {
                inter[(k, j)] = rho;
            }
        }
        Self { dim, combination, regressor_cov, inter, targets: scenario.truth.stacked() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.combination.nrows()
    }

    pub fn regressor_cov(&self, node: usize) -> &DMatrix<f64> {
        &self.regressor_cov[node]
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// A ⊗ I_L.
    pub fn lifted_combination(&self) -> DMatrix<f64> {
        self.combination.kronecker(&DMatrix::identity(self.dim, self.dim))
    }

    /// I_{LN} − G ⊗ I_L.
    pub fn q(&self) -> DMatrix<f64> {
        let ln = self.num_nodes() * self.dim;
        DMatrix::identity(ln, ln) - self.inter.kronecker(&DMatrix::identity(self.dim, self.dim))
    }

    /// blockdiag(R_1, …, R_N).
    pub fn omega_r(&self) -> DMatrix<f64> {
        let ln = self.num_nodes() * self.dim;
        let mut m = DMatrix::zeros(ln, ln);
        for (k, r) in self.regressor_cov.iter().enumerate() {
            m.view_mut((k * self.dim, k * self.dim), (self.dim, self.dim)).copy_from(r);
        }
        m
    }

    /// A_Iᵀ [I − μ(Ω_R + ηQ)].
    pub fn transition(&self, mu: f64, eta: f64) -> DMatrix<f64> {
        let ln = self.num_nodes() * self.dim;
        let inner = DMatrix::identity(ln, ln) - (self.omega_r() + self.q() * eta) * mu;
        self.lifted_combination().transpose() * inner
    }

    /// −μη A_Iᵀ Q w°.
    pub fn forcing(&self, mu: f64, eta: f64) -> DVector<f64> {
        -(self.lifted_combination().transpose() * (self.q() * &self.targets)) * (mu * eta)
    }

    pub fn mean_recursion_step(&self, e: &DVector<f64>, mu: f64, eta: f64) -> DVector<f64> {
        self.transition(mu, eta) * e + self.forcing(mu, eta)
    }

    /// Iterates the recursion `steps` times from `e0`.
    pub fn iterate(&self, e0: &DVector<f64>, mu: f64, eta: f64, steps: usize) -> DVector<f64> {
        let b = self.transition(mu, eta);
        let f = self.forcing(mu, eta);
        (0..steps).fold(e0.clone(), |e, _| &b * e + &f)
    }

    /// 2 / (max_n λ_max(R_n) + 2η).
    pub fn step_bound(&self, eta: f64) -> f64 {
        let lambda = self
            .regressor_cov
            .iter()
            .map(|r| SymmetricEigen::new(r.clone()).eigenvalues.max())
            .fold(f64::NEG_INFINITY, f64::max);
        2.0 / (lambda + 2.0 * eta)
    }

    /// μη {A_Iᵀ[I − μ(Ω_R + ηQ)] − I}⁻¹ A_Iᵀ Q w°.
    pub fn asymptotic_deviation(&self, mu: f64, eta: f64) -> Result<DVector<f64>> {
        let ln = self.num_nodes() * self.dim;
        let system = self.transition(mu, eta) - DMatrix::identity(ln, ln);
        let rhs = self.lifted_combination().transpose() * (self.q() * &self.targets) * (mu * eta);
        let lu = system.lu();
        let x = lu.solve(&rhs).ok_or(Error::Singular)?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Singular)
        }
    }
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    match Schur::try_new(m.clone(), 1e-14, 100_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_estimate(m, 64),
    }
}

/// ‖M^k‖^{1/k} with k = 2^doublings, an upper estimate converging to ρ(M).
pub fn gelfand_estimate(m: &DMatrix<f64>, doublings: u32) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0f64;
    let mut k = 1.0f64;
    for _ in 0..doublings {
        let n = p.norm();
        if n == 0.0 {
            return 0.0;
        }
        log_scale = 2.0 * (log_scale + n.ln());
        p /= n;
        p = &p * &p;
        k *= 2.0;
        if k > 1e15 {
            break;
        }
    }
    ((log_scale + p.norm().ln()) / k).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn isolated(n: usize, dim: usize, var: f64) -> NetworkMatrices {
        NetworkMatrices::new(
            DMatrix::identity(n, n),
            vec![DMatrix::identity(dim, dim) * var; n],
            DMatrix::identity(n, n),
            DVector::from_element(n * dim, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_contraction() {
        let m = isolated(2, 3, 0.8);
        let e = DVector::from_fn(6, |i, _| i as f64 - 2.0);
        let next = m.mean_recursion_step(&e, 0.1, 0.0);
        assert_abs_diff_eq!(next, &e * (1.0 - 0.1 * 0.8), epsilon = 1e-15);
    }

    #[test]
    fn zero_step_size_freezes() {
        let m = isolated(3, 2, 1.3);
        let e = DVector::from_element(6, 0.7);
        assert_eq!(m.mean_recursion_step(&e, 0.0, 0.02), e);
    }

    #[test]
    fn bound_arithmetic() {
        let m = isolated(4, 3, 1.0);
        assert_abs_diff_eq!(m.step_bound(0.02), 2.0 / 1.04, epsilon = 1e-12);
        let m = isolated(4, 3, 0.5);
        assert_abs_diff_eq!(m.step_bound(0.0), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn no_regularization_means_no_bias() {
        let m = isolated(3, 2, 1.0);
        let d = m.asymptotic_deviation(0.05, 0.0).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn radius_routes_agree() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, -0.3, 0.9, 0.1, 0.0, 0.4, -0.7]);
        let a = spectral_radius(&m);
        let b = gelfand_estimate(&m, 40);
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.2, 1.2, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&rot), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_stochastic_combination() {
        let r = NetworkMatrices::new(
            DMatrix::from_element(2, 2, 0.7),
            vec![DMatrix::identity(1, 1); 2],
            DMatrix::identity(2, 2),
            DVector::zeros(2),
        );
        assert!(r.is_err());
    }
}
