#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use resilient_dlms::rng::{Purpose, Streams};
use resilient_dlms::scenario::{build_topology, make_ground_truth, Scenario, SignalParams, TopologySpec};
use resilient_dlms::Vector;

/// Global optimum of max Σα_i K_ii − αᵀKα, Σα = 1, 0 ≤ α ≤ c, found by
/// enumerating every split of the indices into {at 0, free, at c} and
/// solving the KKT equations of each split directly.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub alpha: Vec<f64>,
    /// Common gradient value of the free multipliers; r² = λ + αᵀKα.
    pub lambda: f64,
    pub objective: f64,
}

pub fn dual_objective(gram: &DMatrix<f64>, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    gram.diagonal().dot(&a) - (a.transpose() * gram * &a)[(0, 0)]
}

pub fn wsvdd_oracle(gram: &DMatrix<f64>, upper: &[f64]) -> Option<OracleSolution> {
    let v = upper.len();
    let tol = 1e-9;
    let mut best: Option<OracleSolution> = None;
    let mut code = vec![0u8; v];
    loop {
        let free: Vec<usize> = (0..v).filter(|&i| code[i] == 1).collect();
        if !free.is_empty() {
            let mut alpha = vec![0.0; v];
            for i in 0..v {
                if code[i] == 2 {
                    alpha[i] = upper[i];
                }
            }
            let fixed_mass: f64 = alpha.iter().sum();
            let f = free.len();
            // [2K_FF  1] [α_F]   [diag(K)_F − 2 K_F,U c_U]
            // [1ᵀ     0] [ λ ] = [1 − Σ c_U            ]
            let mut m = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    m[(r, c)] = 2.0 * gram[(i, j)];
                }
                m[(r, f)] = 1.0;
                m[(f, r)] = 1.0;
                let mut b = gram[(i, i)];
                for j in 0..v {
                    if code[j] == 2 {
                        b -= 2.0 * gram[(i, j)] * upper[j];
                    }
                }
                rhs[r] = b;
            }
            rhs[f] = 1.0 - fixed_mass;
            if let Some(x) = m.lu().solve(&rhs) {
                let lambda = x[f];
                let mut ok = x.iter().all(|z| z.is_finite());
                for (r, &i) in free.iter().enumerate() {
                    alpha[i] = x[r];
                    ok &= x[r] >= -tol && x[r] <= upper[i] + tol;
                }
                if ok {
                    let a = DVector::from_column_slice(&alpha);
                    let grad = gram.diagonal() - 2.0 * (gram * &a);
                    for i in 0..v {
                        match code[i] {
                            0 => ok &= grad[i] <= lambda + 1e-7,
                            2 => ok &= grad[i] >= lambda - 1e-7,
                            _ => {}
                        }
                    }
                }
                if ok {
                    let objective = dual_objective(gram, &alpha);
                    if best.as_ref().is_none_or(|b| objective > b.objective) {
                        best = Some(OracleSolution { alpha, lambda, objective });
                    }
                }
            }
        }
        // next ternary code
        let mut k = 0;
        while k < v && code[k] == 2 {
            code[k] = 0;
            k += 1;
        }
        if k == v {
            break;
        }
        code[k] += 1;
    }
    best
}

pub fn gaussian_gram(points: &[Vector], gamma: f64) -> DMatrix<f64> {
    let v = points.len();
    DMatrix::from_fn(v, v, |i, j| (-gamma * (&points[i] - &points[j]).norm_squared()).exp())
}

/// Oracle decision value ‖φ(x) − o‖² − r² for a solved instance.
pub fn oracle_score(points: &[Vector], gamma: f64, sol: &OracleSolution, x: &Vector) -> f64 {
    let gram = gaussian_gram(points, gamma);
    let a = DVector::from_column_slice(&sol.alpha);
    let quad = (a.transpose() * &gram * &a)[(0, 0)];
    let r2 = sol.lambda + quad;
    let cross: f64 = points.iter().zip(&sol.alpha).map(|(p, al)| al * (-gamma * (p - x).norm_squared()).exp()).sum();
    1.0 - 2.0 * cross + quad - r2
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub points: Vec<Vector>,
    pub weights: Vec<f64>,
    pub penalty: f64,
    pub gamma: f64,
}

/// v ≤ 8 points in L ≤ 3 dimensions, b ∈ [0.3, 1], feasible P.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let v = rng.random_range(1..=8);
    let dim = rng.random_range(1..=3);
    let points = (0..v).map(|_| Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))).collect();
    let weights: Vec<f64> = (0..v).map(|_| rng.random_range(0.3..=1.0)).collect();
    let total: f64 = weights.iter().sum();
    let penalty = rng.random_range(1.0..3.0) / total;
    let gamma = rng.random_range(0.5..5.0);
    Instance { points, weights, penalty, gamma }
}

/// A random clustered network with default variance ranges. Every cluster
/// is internally connected by a path; extra edges are added at random.
pub fn random_scenario(seed: u64) -> Scenario {
    let streams = Streams::new(seed);
    let mut rng = streams.stream(Purpose::Signal, 99, 0, 0, 0);
    let n = rng.random_range(4..=20);
    let m = rng.random_range(1..=4.min(n));
    let mut clusters = vec![Vec::new(); m];
    for k in 0..n {
        clusters[k % m].push(k);
    }
    let mut edges = Vec::new();
    for c in &clusters {
        for w in c.windows(2) {
            edges.push((w[0], w[1]));
        }
        for i in 0..c.len() {
            for j in i + 2..c.len() {
                if rng.random_bool(0.4) {
                    edges.push((c[i], c[j]));
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if a % m != b % m && rng.random_bool(0.15) {
                edges.push((a, b));
            }
        }
    }
    let topology = build_topology(&TopologySpec { num_nodes: n, edges, clusters }).unwrap();
    let signal = SignalParams::draw(n, 3, (0.8, 1.2), (0.01, 0.04), &mut rng).unwrap();
    let base = Vector::from_vec(vec![1.0, -0.5, 0.7]);
    let truth = make_ground_truth(&topology, &base, 0.5, &mut rng).unwrap();
    Scenario::new(topology, signal, truth).unwrap()
}
