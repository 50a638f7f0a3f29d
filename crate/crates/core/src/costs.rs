//! Distributed-LQ cost functionals of the form
//! `J = integral of x^T L W L x + u^T R u`, the two standard constructions
//! (relative disagreement and neighbor-average deviation), the state-weight
//! admissibility check, and numerical cost evaluation along traces.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::GraphMatrices;
use crate::numerics::sym_eigen;
use crate::protocol::SimulationTrace;

#[derive(Debug, Error)]
pub enum CostError {
    #[error("state-weight factor W is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("input weight R is not positive definite (min eigenvalue {0:.3e})")]
    NotPd(f64),
    #[error("scalar weight `{name}` must be positive, got {value}")]
    NonPositiveWeight { name: &'static str, value: f64 },
    #[error("trace grid too coarse: dt = {dt} exceeds T/100 = {limit}")]
    GridTooCoarse { dt: f64, limit: f64 },
    #[error("trace grid is not uniform")]
    NonUniformGrid,
}

/// Weights of a distributed LQ cost: state-weight factor `W`, input weight
/// `R`, and the induced state weight `Q = L W L`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    pub w: DMatrix<f64>,
    pub r_matrix: DMatrix<f64>,
    /// `L W L`, precomputed so costs can be evaluated without the graph.
    pub state_weight: DMatrix<f64>,
}

impl CostSpec {
    /// Validates `W >= 0` and `R > 0`, then precomputes `Q = L W L`.
    pub fn new(
        w: DMatrix<f64>,
        r_matrix: DMatrix<f64>,
        laplacian: &DMatrix<f64>,
    ) -> Result<Self, CostError> {
        let w_eig = sym_eigen(&w).map_err(|_| CostError::NotPsd(f64::NAN))?;
        let w_scale = w_eig.values.amax().max(1.0);
        if w_eig.values[0] < -1e-10 * w_scale {
            return Err(CostError::NotPsd(w_eig.values[0]));
        }
        let r_eig = sym_eigen(&r_matrix).map_err(|_| CostError::NotPd(f64::NAN))?;
        if r_eig.values[0] <= 0.0 {
            return Err(CostError::NotPd(r_eig.values[0]));
        }
        let state_weight = laplacian * &w * laplacian;
        Ok(CostSpec {
            w,
            r_matrix,
            state_weight,
        })
    }
}

/// Scalar weights `(q, r)` and discount factor `alpha` of the local
/// sampled-data tracking costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarWeights {
    pub q: f64,
    pub r: f64,
    pub alpha: f64,
}

impl ScalarWeights {
    pub fn new(q: f64, r: f64, alpha: f64) -> Result<Self, CostError> {
        for (name, value) in [("q", q), ("r", r), ("alpha", alpha)] {
            if !(value > 0.0) {
                return Err(CostError::NonPositiveWeight { name, value });
            }
        }
        Ok(ScalarWeights { q, r, alpha })
    }
}

/// Cost penalizing relative disagreement with neighbors:
/// `W = 2q L^+`, `R = r I`, so that `Q = L W L = 2q L`.
pub fn cost_relative_disagreement(m: &GraphMatrices, q: f64, r: f64) -> CostSpec {
    let n = m.node_count();
    let w = crate::graph::laplacian_pseudoinverse(m) * (2.0 * q);
    let r_matrix = DMatrix::<f64>::identity(n, n) * r;
    CostSpec::new(w, r_matrix, &m.laplacian).expect("2q L^+ is PSD and rI is PD")
}

/// Cost penalizing deviation from the neighborhood average:
/// `W = q (D + I)^{-2}`, `R = r I`, so that `Q = (I - G)^T (I - G) q`.
pub fn cost_neighbor_average(m: &GraphMatrices, q: f64, r: f64) -> CostSpec {
    let n = m.node_count();
    let dpi = m.degree_plus_identity();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = q / (dpi[(i, i)] * dpi[(i, i)]);
    }
    let r_matrix = DMatrix::<f64>::identity(n, n) * r;
    CostSpec::new(w, r_matrix, &m.laplacian).expect("q (D+I)^-2 is PSD and rI is PD")
}

/// Result of the state-weight admissibility check.
#[derive(Debug, Clone)]
pub enum WeightValidation {
    /// `Q = L W L` holds for this PSD witness.
    Accepted { witness: DMatrix<f64> },
    Rejected { reason: String },
}

impl WeightValidation {
    pub fn is_accepted(&self) -> bool {
        matches!(self, WeightValidation::Accepted { .. })
    }
}

/// Check whether a state weight `Q` is admissible for diffusive control,
/// i.e. whether some PSD `W` with `Q = L W L` exists.
///
/// For a connected graph this reduces to `Q 1 = 0`; the returned witness is
/// the smallest-norm choice `W = L^+ Q L^+`, verified by round-trip.
pub fn validate_state_weight(q_matrix: &DMatrix<f64>, m: &GraphMatrices) -> WeightValidation {
    let n = m.node_count();
    let ones = DVector::from_element(n, 1.0);
    let scale = q_matrix.amax().max(1.0);
    let kick = (q_matrix * &ones).amax();
    if kick > 1e-9 * scale {
        return WeightValidation::Rejected {
            reason: format!("Q does not vanish on the consensus direction (|Q 1| = {kick:.3e})"),
        };
    }
    let pinv = crate::graph::laplacian_pseudoinverse(m);
    let witness = &pinv * q_matrix * &pinv;
    let roundtrip = &m.laplacian * &witness * &m.laplacian - q_matrix;
    let err = roundtrip.amax();
    if err > 1e-9 * scale {
        return WeightValidation::Rejected {
            reason: format!("witness round-trip error {err:.3e} exceeds tolerance"),
        };
    }
    WeightValidation::Accepted { witness }
}

/// Composite Simpson weights over a uniform grid; an odd interval count
/// falls back to a trapezoid on the last interval.
fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let pairs = intervals / 2;
    let mut total = 0.0;
    for p in 0..pairs {
        let i = 2 * p;
        total += dt / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
    }
    if intervals % 2 == 1 {
        total += dt / 2.0 * (values[n - 2] + values[n - 1]);
    }
    total
}

fn uniform_dt(times: &[f64]) -> Result<f64, CostError> {
    if times.len() < 2 {
        return Err(CostError::NonUniformGrid);
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1e-12) {
            return Err(CostError::NonUniformGrid);
        }
    }
    Ok(dt)
}

/// Truncated global cost along a trace:
/// `integral of e^{-2 alpha t} (x^T L W L x + u^T R u)` over the trace
/// horizon by composite Simpson quadrature. This approximates the
/// infinite-horizon integral; the tail beyond the horizon is dropped.
pub fn evaluate_trajectory_cost(
    trace: &SimulationTrace,
    spec: &CostSpec,
    alpha: f64,
) -> Result<f64, CostError> {
    assert!(alpha >= 0.0, "discount factor must be nonnegative");
    let dt = uniform_dt(&trace.times)?;
    if let Some(t_sample) = trace.sample_period {
        let limit = t_sample / 100.0;
        if dt > limit * (1.0 + 1e-9) {
            return Err(CostError::GridTooCoarse { dt, limit });
        }
    }
    let mut integrand = Vec::with_capacity(trace.times.len());
    for (row, &t) in trace.times.iter().enumerate() {
        let x = trace.states.row(row).transpose();
        let u = trace.inputs.row(row).transpose();
        let state_term = (x.transpose() * &spec.state_weight * &x)[(0, 0)];
        let input_term = (u.transpose() * &spec.r_matrix * &u)[(0, 0)];
        integrand.push((-2.0 * alpha * t).exp() * (state_term + input_term));
    }
    Ok(simpson(&integrand, dt))
}

/// Truncated sum of the discounted local tracking costs along a sampled
/// trace: `sum_i integral of e^{-2 alpha t} (q (x_i - a_i(kT))^2 + r u_i^2)`
/// with the reference `a(kT) = G x(kT)` held over each sampling interval.
pub fn evaluate_local_discounted_cost(
    trace: &SimulationTrace,
    m: &GraphMatrices,
    weights: &ScalarWeights,
) -> Result<f64, CostError> {
    let dt = uniform_dt(&trace.times)?;
    let t_sample = trace.sample_period.ok_or(CostError::NonUniformGrid)?;
    let per_period = (t_sample / dt).round() as usize;
    let mut integrand = Vec::with_capacity(trace.times.len());
    for (row, &t) in trace.times.iter().enumerate() {
        let k = (row / per_period).min(trace.sample_states.nrows() - 1);
        let xk = trace.sample_states.row(k).transpose();
        let reference = &m.averaging * xk;
        let x = trace.states.row(row).transpose();
        let u = trace.inputs.row(row).transpose();
        let err = &x - &reference;
        let value = weights.q * err.norm_squared() + weights.r * u.norm_squared();
        integrand.push((-2.0 * weights.alpha * t).exp() * value);
    }
    Ok(simpson(&integrand, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, derive_matrices, six_cycle};
    use nalgebra::DMatrix;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn p2() -> GraphMatrices {
        derive_matrices(&build_graph(2, &[(1, 2)]).unwrap()).unwrap()
    }

    #[test]
    fn relative_disagreement_p2() {
        let m = p2();
        let spec = cost_relative_disagreement(&m, 1.0, 1.0);
        let expected_w = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs(&(&spec.w - &expected_w)) < 1e-12);
        // L (2 L^+) L = 2 L
        assert!(max_abs(&(&spec.state_weight - &m.laplacian * 2.0)) < 1e-12);
    }

    #[test]
    fn relative_disagreement_kernel() {
        let m = derive_matrices(&six_cycle()).unwrap();
        let spec = cost_relative_disagreement(&m, 3.0, 2.0);
        let ones = DVector::from_element(6, 1.0);
        assert!((&spec.state_weight * &ones).amax() < 1e-10);
    }

    #[test]
    fn relative_disagreement_matches_pair_sum() {
        // x^T (L W L) x = sum_i sum_{j in N_i} (x_i - x_j)^2 for q = 1
        let g = build_graph(3, &[(1, 2), (2, 3), (3, 1)]).unwrap();
        let m = derive_matrices(&g).unwrap();
        let spec = cost_relative_disagreement(&m, 1.0, 1.0);
        let mut seed = 77u64;
        for _ in 0..10 {
            let x = DVector::from_fn(3, |_, _| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            });
            let quad = (x.transpose() * &spec.state_weight * &x)[(0, 0)];
            let mut pair_sum = 0.0;
            for (i, j) in g.edges() {
                // each unordered edge appears in both neighbor sets
                pair_sum += 2.0 * (x[i - 1] - x[j - 1]).powi(2);
            }
            assert!((quad - pair_sum).abs() < 1e-10 * pair_sum.max(1.0));
        }
    }

    #[test]
    fn neighbor_average_p2() {
        let m = p2();
        let spec = cost_neighbor_average(&m, 1.0, 1.0);
        assert!(max_abs(&(&spec.w - DMatrix::identity(2, 2) * 0.25)) < 1e-15);
        let expected_q = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs(&(&spec.state_weight - &expected_q)) < 1e-12);
    }

    #[test]
    fn neighbor_average_matches_deviation_sum() {
        let g = build_graph(4, &[(1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let m = derive_matrices(&g).unwrap();
        let q = 1.7;
        let spec = cost_neighbor_average(&m, q, 1.0);
        let mut seed = 31u64;
        for _ in 0..10 {
            let x = DVector::from_fn(4, |_, _| {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            });
            let quad = (x.transpose() * &spec.state_weight * &x)[(0, 0)];
            let a = &m.averaging * &x;
            let dev: f64 = (0..4).map(|i| (x[i] - a[i]).powi(2)).sum();
            assert!((quad - q * dev).abs() < 1e-10 * (q * dev).max(1.0));
        }
    }

    #[test]
    fn neighbor_average_scales_linearly() {
        let m = p2();
        let s1 = cost_neighbor_average(&m, 1.0, 1.0);
        let s2 = cost_neighbor_average(&m, 2.0, 1.0);
        assert!(max_abs(&(&s2.state_weight - &s1.state_weight * 2.0)) < 1e-12);
    }

    #[test]
    fn validator_accepts_laplacian_weight() {
        let m = derive_matrices(&six_cycle()).unwrap();
        let q = &m.laplacian * 2.0;
        match validate_state_weight(&q, &m) {
            WeightValidation::Accepted { witness } => {
                let pinv = crate::graph::laplacian_pseudoinverse(&m);
                assert!(max_abs(&(&witness - &pinv * 2.0)) < 1e-9);
            }
            WeightValidation::Rejected { reason } => panic!("rejected: {reason}"),
        }
    }

    #[test]
    fn validator_accepts_neighbor_average_weight() {
        let m = derive_matrices(&six_cycle()).unwrap();
        let spec = cost_neighbor_average(&m, 1.0, 1.0);
        assert!(validate_state_weight(&spec.state_weight, &m).is_accepted());
    }

    #[test]
    fn validator_rejects_identity() {
        let m = derive_matrices(&six_cycle()).unwrap();
        assert!(!validate_state_weight(&DMatrix::identity(6, 6), &m).is_accepted());
    }

    #[test]
    fn scalar_weights_reject_nonpositive() {
        assert!(ScalarWeights::new(1.0, 1.0, 0.0).is_err());
        assert!(ScalarWeights::new(-1.0, 1.0, 0.1).is_err());
        assert!(ScalarWeights::new(1.0, 1.0, 0.01).is_ok());
    }

    #[test]
    fn trajectory_cost_consensus_is_zero() {
        let m = p2();
        let spec = cost_relative_disagreement(&m, 1.0, 1.0);
        let n_pts = 101;
        let times: Vec<f64> = (0..n_pts).map(|i| i as f64 * 0.1).collect();
        let states = DMatrix::from_element(n_pts, 2, 3.0);
        let inputs = DMatrix::zeros(n_pts, 2);
        let trace = SimulationTrace {
            times,
            states,
            inputs,
            sample_states: DMatrix::zeros(0, 2),
            disagreement: vec![0.0; n_pts],
            sample_period: None,
        };
        let cost = evaluate_trajectory_cost(&trace, &spec, 0.0).unwrap();
        assert!(cost.abs() < 1e-12);
    }

    #[test]
    fn trajectory_cost_closed_form() {
        // P2, x(t) = (e^{-2t}, -e^{-2t}), u = xdot, W = I, R = I, alpha = 0:
        // integrand = x^T L^2 x + u^T u = 16 e^{-4t}, integral = 4.
        let m = p2();
        let spec = CostSpec::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            &m.laplacian,
        )
        .unwrap();
        let n_pts = 20_001;
        let dt = 20.0 / (n_pts - 1) as f64;
        let times: Vec<f64> = (0..n_pts).map(|i| i as f64 * dt).collect();
        let mut states = DMatrix::zeros(n_pts, 2);
        let mut inputs = DMatrix::zeros(n_pts, 2);
        for (i, &t) in times.iter().enumerate() {
            let e = (-2.0 * t).exp();
            states[(i, 0)] = e;
            states[(i, 1)] = -e;
            inputs[(i, 0)] = -2.0 * e;
            inputs[(i, 1)] = 2.0 * e;
        }
        let trace = SimulationTrace {
            times,
            states,
            inputs,
            sample_states: DMatrix::zeros(0, 2),
            disagreement: vec![0.0; n_pts],
            sample_period: None,
        };
        let cost = evaluate_trajectory_cost(&trace, &spec, 0.0).unwrap();
        assert!((cost - 4.0).abs() < 1e-6, "cost = {cost}");

        // doubling W doubles the state-cost component
        let spec2 = CostSpec::new(
            DMatrix::identity(2, 2) * 2.0,
            DMatrix::identity(2, 2),
            &m.laplacian,
        )
        .unwrap();
        let cost2 = evaluate_trajectory_cost(&trace, &spec2, 0.0).unwrap();
        // state and input components are each 2 here
        assert!((cost2 - 6.0).abs() < 1e-6, "cost2 = {cost2}");
    }

    #[test]
    fn trajectory_cost_rejects_coarse_grid() {
        let m = p2();
        let spec = cost_relative_disagreement(&m, 1.0, 1.0);
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let trace = SimulationTrace {
            times,
            states: DMatrix::zeros(11, 2),
            inputs: DMatrix::zeros(11, 2),
            sample_states: DMatrix::zeros(2, 2),
            disagreement: vec![0.0; 11],
            sample_period: Some(10.0),
        };
        assert!(matches!(
            evaluate_trajectory_cost(&trace, &spec, 0.0),
            Err(CostError::GridTooCoarse { .. })
        ));
    }
}
