//! Discounted LQ tracking of a constant reference, solved through the
//! extended system with block-diagonal drift `A_e = diag(A - aI, -aI)` and
//! its Riccati equation. The scalar specialization yields the agent gains
//! `(g, g')` used by the sampled-data protocol.
//!
//! The gains are always derived from the Riccati solution itself; the
//! closed-form expression `g = r^{-1}(a - sqrt(a^2 + r q))` sometimes quoted
//! for this problem agrees with the Riccati root only when `r = 1`, so it is
//! not used here.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::costs::ScalarWeights;
use crate::numerics::{solve_sylvester, stabilizing_are, NumericsError};

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,
    #[error("assembled Riccati residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Discounted tracking problem: minimize
/// `integral of e^{-2 alpha t} ((x - r)^T Q (x - r) + u^T R u)` for
/// `xdot = A x + B u` and a constant reference `r`.
#[derive(Debug, Clone)]
pub struct TrackingProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub alpha: f64,
}

/// Blocks of the extended Riccati solution and the resulting gains.
///
/// The optimal law is `u = K1 x + K2 r` with `K1 = -R^{-1} B^T P1` and
/// `K2 = -R^{-1} B^T P12`.
#[derive(Debug, Clone)]
pub struct TrackingSolution {
    pub p1: DMatrix<f64>,
    pub p12: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
}

/// Scalar agent gains: state gain `g < 0` and reference gain `g' = -g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentGains {
    pub g: f64,
    pub g_prime: f64,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Solve the tracking Riccati equation block by block.
///
/// With `A_e = diag(A - aI, -aI)`, `B_e = [B; 0]` and
/// `Q_e = [Q, -Q; -Q, Q]`, the blocks of the extended solution decouple:
/// `P1` is the stabilizing solution of the ARE for `(A - aI, B, Q, R)`,
/// `P12` solves the Sylvester equation
/// `(A - aI - B R^{-1} B^T P1)^T P12 - a P12 = Q`, and
/// `P2 = (Q - P12^T B R^{-1} B^T P12) / (2a)`. The assembled matrix is
/// verified against the full extended equation before returning.
pub fn solve_tracking(p: &TrackingProblem) -> Result<TrackingSolution, TrackingError> {
    let n = p.a.nrows();
    assert!(p.alpha > 0.0, "discount factor must be positive");
    let id = DMatrix::<f64>::identity(n, n);
    let a_shift = &p.a - &id * p.alpha;

    let r_inv = p
        .r
        .clone()
        .try_inverse()
        .ok_or(TrackingError::NotStabilizable)?;
    let gp = &p.b * &r_inv * p.b.transpose();

    let p1 = stabilizing_are(&a_shift, &p.b, &p.q, &p.r).map_err(|e| match e {
        NumericsError::NotStabilizable => TrackingError::NotStabilizable,
        other => TrackingError::Numerics(other),
    })?;

    let a_closed = &a_shift - &gp * &p1;
    // (A - aI - BR^{-1}B^T P1)^T P12 - a P12 = Q
    let p12 = solve_sylvester(
        &a_closed.transpose(),
        &(DMatrix::<f64>::identity(n, n) * -p.alpha),
        &p.q,
    )?;
    let p2 = (&p.q - p12.transpose() * &gp * &p12) / (2.0 * p.alpha);

    // full extended-equation residual
    let mut a_e = DMatrix::<f64>::zeros(2 * n, 2 * n);
    a_e.view_mut((0, 0), (n, n)).copy_from(&a_shift);
    a_e.view_mut((n, n), (n, n))
        .copy_from(&(DMatrix::<f64>::identity(n, n) * -p.alpha));
    let m = p.b.ncols();
    let mut b_e = DMatrix::<f64>::zeros(2 * n, m);
    b_e.view_mut((0, 0), (n, m)).copy_from(&p.b);
    let mut q_e = DMatrix::<f64>::zeros(2 * n, 2 * n);
    q_e.view_mut((0, 0), (n, n)).copy_from(&p.q);
    q_e.view_mut((0, n), (n, n)).copy_from(&(-&p.q));
    q_e.view_mut((n, 0), (n, n)).copy_from(&(-&p.q));
    q_e.view_mut((n, n), (n, n)).copy_from(&p.q);

    let p_e = assemble(&p1, &p12, &p2);
    let residual = a_e.transpose() * &p_e + &p_e * &a_e
        - &p_e * &b_e * &r_inv * b_e.transpose() * &p_e
        + &q_e;
    let tolerance = 1e-9 * max_abs(&q_e).max(1.0);
    let residual = max_abs(&residual);
    if residual > tolerance {
        return Err(TrackingError::ResidualTooLarge {
            residual,
            tolerance,
        });
    }

    let k1 = -(&r_inv * p.b.transpose() * &p1);
    let k2 = -(&r_inv * p.b.transpose() * &p12);
    Ok(TrackingSolution { p1, p12, p2, k1, k2 })
}

/// Assemble the extended solution `[P1, P12; P12^T, P2]`.
pub fn assemble(p1: &DMatrix<f64>, p12: &DMatrix<f64>, p2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p1.nrows();
    let mut p_e = DMatrix::<f64>::zeros(2 * n, 2 * n);
    p_e.view_mut((0, 0), (n, n)).copy_from(p1);
    p_e.view_mut((0, n), (n, n)).copy_from(p12);
    p_e.view_mut((n, 0), (n, n)).copy_from(&p12.transpose());
    p_e.view_mut((n, n), (n, n)).copy_from(p2);
    p_e
}

/// The feedback and feedforward gains of a tracking solution.
pub fn tracking_gains(sol: &TrackingSolution) -> (DMatrix<f64>, DMatrix<f64>) {
    (sol.k1.clone(), sol.k2.clone())
}

/// Agent gains for the single-integrator tracking problem (`A = 0, B = 1`).
///
/// Every agent at every sampling step solves the same scalar problem, so a
/// single `AgentGains` value serves the whole network.
pub fn scalar_agent_gains(w: &ScalarWeights) -> Result<AgentGains, TrackingError> {
    let problem = TrackingProblem {
        a: DMatrix::zeros(1, 1),
        b: DMatrix::from_element(1, 1, 1.0),
        q: DMatrix::from_element(1, 1, w.q),
        r: DMatrix::from_element(1, 1, w.r),
        alpha: w.alpha,
    };
    let sol = solve_tracking(&problem)?;
    let g = -sol.p1[(0, 0)] / w.r;
    let g_prime = -sol.p12[(0, 0)] / w.r;
    debug_assert!(g < 0.0);
    debug_assert!((g_prime + g).abs() <= 1e-12 * g.abs().max(1.0));
    Ok(AgentGains { g, g_prime })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(q: f64, r: f64, alpha: f64) -> TrackingProblem {
        TrackingProblem {
            a: DMatrix::zeros(1, 1),
            b: DMatrix::from_element(1, 1, 1.0),
            q: DMatrix::from_element(1, 1, q),
            r: DMatrix::from_element(1, 1, r),
            alpha,
        }
    }

    #[test]
    fn reference_scalar_instance() {
        let sol = solve_tracking(&scalar_problem(2.0, 1.0, 0.01)).unwrap();
        assert!((sol.p1[(0, 0)] - 1.4042).abs() < 1e-4);
        assert!((sol.p12[(0, 0)] + 1.4042).abs() < 1e-4);
        assert!((sol.k1[(0, 0)] + 1.4042).abs() < 1e-4);
        assert!((sol.k2[(0, 0)] - 1.4042).abs() < 1e-4);
    }

    #[test]
    fn small_q_limit() {
        let sol = solve_tracking(&scalar_problem(1e-10, 1.0, 0.1)).unwrap();
        assert!(sol.p1[(0, 0)].abs() < 1e-6);
        assert!(sol.p12[(0, 0)].abs() < 1e-6);
        assert!(sol.k1[(0, 0)].abs() < 1e-6);
        assert!(sol.k2[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn scalar_root_identity() {
        // p1 solves p1^2 / r + 2 alpha p1 - q = 0, and p1 is the smaller PSD root
        for &(q, r, alpha) in &[(2.0, 1.0, 0.01), (1.0, 3.0, 0.5), (5.0, 0.25, 0.2)] {
            let sol = solve_tracking(&scalar_problem(q, r, alpha)).unwrap();
            let p1 = sol.p1[(0, 0)];
            assert!((p1 * p1 / r + 2.0 * alpha * p1 - q).abs() < 1e-12 * q.max(1.0));
            // both quadratic roots: only the positive one is PSD
            let root_pos = r * (-alpha + (alpha * alpha + q / r).sqrt());
            let root_neg = r * (-alpha - (alpha * alpha + q / r).sqrt());
            assert!(root_neg < 0.0);
            assert!((p1 - root_pos).abs() < 1e-10 * root_pos);
        }
    }

    #[test]
    fn assembled_solution_is_psd() {
        let sol = solve_tracking(&scalar_problem(2.0, 1.0, 0.01)).unwrap();
        let p_e = assemble(&sol.p1, &sol.p12, &sol.p2);
        let eig = crate::numerics::sym_eigen(&p_e).unwrap();
        assert!(eig.values[0] > -1e-10 * eig.values.amax());
    }

    #[test]
    fn closed_loop_transformed_error_decays() {
        let sol = solve_tracking(&scalar_problem(2.0, 1.0, 0.01)).unwrap();
        // A + B k1 - alpha I must be stable
        let acl = 0.0 + sol.k1[(0, 0)] - 0.01;
        assert!(acl < 0.0);
    }

    #[test]
    fn agent_gains_reference_numbers() {
        let w = ScalarWeights::new(2.0, 1.0, 0.01).unwrap();
        let gains = scalar_agent_gains(&w).unwrap();
        assert!((gains.g + 1.4042).abs() < 1e-4);
        assert!((gains.g_prime - 1.4042).abs() < 1e-4);
        assert!((gains.g + gains.g_prime).abs() < 1e-12);
    }

    #[test]
    fn agent_gains_alpha_to_zero_limit() {
        // as alpha -> 0, g -> -sqrt(q/r)
        let w = ScalarWeights::new(1.0, 1.0, 1e-8).unwrap();
        let gains = scalar_agent_gains(&w).unwrap();
        assert!((gains.g + 1.0).abs() < 1e-6);
    }

    #[test]
    fn gain_scaling_in_q_alpha_for_unit_r() {
        // for r = 1 the gain depends on (q, alpha) only through sqrt(alpha^2+q) - alpha
        for &(q, alpha) in &[(2.0, 0.01), (0.5, 0.3), (9.0, 1.0)] {
            let w = ScalarWeights::new(q, 1.0, alpha).unwrap();
            let gains = scalar_agent_gains(&w).unwrap();
            let expected = alpha - (alpha * alpha + q).sqrt();
            assert!((gains.g - expected).abs() < 1e-10);
        }
    }
}
