//! Centralized optimal diffusive gain: over control laws `u = -g L x` the
//! cost collapses to `J(g) = (1/g) x0^T X0 x0 + g x0^T Y0 x0` where `X0` and
//! `Y0` solve the singular Lyapunov equations `-L X - X L + L W L = 0` and
//! `-L Y - Y L + L R L = 0` with `1_N` in their kernels. Computing the
//! optimum needs the whole Laplacian and the whole initial state, which is
//! exactly what the decentralized protocol avoids.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::costs::CostSpec;
use crate::graph::GraphMatrices;
use crate::numerics::{kernel_lyapunov, sym_eigen, NumericsError};
use crate::protocol::{disagreement, SimulationTrace};

#[derive(Debug, Error)]
pub enum CentralizedError {
    #[error("gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How the scalar gain optimization resolves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CentralizedOutcome {
    /// `x0` is already a consensus state; every positive gain gives zero cost.
    AnyGainOptimal,
    /// Input cost is positive but state cost vanishes: the infimum `0` is
    /// approached as `g -> 0+` and never attained.
    NoOptimumExists { infimum: f64 },
    /// Both quadratic forms are positive; the unique minimizer.
    Optimal { gain: f64 },
}

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub x0_matrix: DMatrix<f64>,
    pub y0_matrix: DMatrix<f64>,
    pub outcome: CentralizedOutcome,
    state_form: f64,
    input_form: f64,
}

impl CentralizedSolution {
    /// `x0^T X0 x0` and `x0^T Y0 x0` for the initial state this was solved for.
    pub fn quadratic_forms(&self) -> (f64, f64) {
        (self.state_form, self.input_form)
    }
}

/// Solve the centralized gain optimization for a given initial state.
///
/// A quadratic form counts as zero below `1e-12 |x0|^2`; the three-way case
/// split is exact in the underlying analysis and needs a declared numeric
/// boundary here.
pub fn solve_centralized(
    m: &GraphMatrices,
    spec: &CostSpec,
    x0: &DVector<f64>,
) -> Result<CentralizedSolution, CentralizedError> {
    let l = &m.laplacian;
    let x0_matrix = kernel_lyapunov(l, &spec.state_weight)?;
    let lrl = l * &spec.r_matrix * l;
    let y0_matrix = kernel_lyapunov(l, &lrl)?;

    let state_form = (x0.transpose() * &x0_matrix * x0)[(0, 0)];
    let input_form = (x0.transpose() * &y0_matrix * x0)[(0, 0)];
    let zero = 1e-12 * x0.norm_squared();

    let outcome = if input_form <= zero {
        CentralizedOutcome::AnyGainOptimal
    } else if state_form <= zero {
        CentralizedOutcome::NoOptimumExists { infimum: 0.0 }
    } else {
        CentralizedOutcome::Optimal {
            gain: (state_form / input_form).sqrt(),
        }
    };

    Ok(CentralizedSolution {
        x0_matrix,
        y0_matrix,
        outcome,
        state_form,
        input_form,
    })
}

/// `J(g) = (1/g) x0^T X0 x0 + g x0^T Y0 x0`.
pub fn cost_of_gain(
    g: f64,
    x0: &DVector<f64>,
    sol: &CentralizedSolution,
) -> Result<f64, CentralizedError> {
    if g <= 0.0 {
        return Err(CentralizedError::NonPositiveGain(g));
    }
    let state_form = (x0.transpose() * &sol.x0_matrix * x0)[(0, 0)];
    let input_form = (x0.transpose() * &sol.y0_matrix * x0)[(0, 0)];
    Ok(state_form / g + input_form * g)
}

/// Exact closed-loop trajectory `x(t) = e^{-g L t} x0`, `u = -g L x`,
/// evaluated spectrally on the given time grid.
pub fn centralized_trajectory(
    g: f64,
    m: &GraphMatrices,
    x0: &DVector<f64>,
    grid: &[f64],
) -> Result<SimulationTrace, CentralizedError> {
    if g <= 0.0 {
        return Err(CentralizedError::NonPositiveGain(g));
    }
    let n = m.node_count();
    let eig = sym_eigen(&m.laplacian)?;
    // x(t) = V e^{-g Lambda t} V^T x0; project once, rescale per grid point
    let coeffs = eig.vectors.transpose() * x0;
    let mut states = DMatrix::<f64>::zeros(grid.len(), n);
    let mut inputs = DMatrix::<f64>::zeros(grid.len(), n);
    let mut dis = Vec::with_capacity(grid.len());
    let mut scaled = coeffs.clone();
    for (row, &t) in grid.iter().enumerate() {
        for i in 0..n {
            scaled[i] = coeffs[i] * (-g * eig.values[i] * t).exp();
        }
        let x = &eig.vectors * &scaled;
        let u = &m.laplacian * &x * (-g);
        dis.push(disagreement(&x));
        states.row_mut(row).copy_from(&x.transpose());
        inputs.row_mut(row).copy_from(&u.transpose());
    }
    Ok(SimulationTrace {
        times: grid.to_vec(),
        states,
        inputs,
        sample_states: DMatrix::zeros(0, n),
        disagreement: dis,
        sample_period: None,
    })
}
