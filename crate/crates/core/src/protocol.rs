//! The decentralized sampled-data protocol: between sampling instants each
//! agent runs `u_i(t) = g x_i(t) - g a_i(kT)` against the neighborhood
//! average held from the last sample. The network state then follows the
//! exact closed form
//! `x(t) = G x(kT) + e^{g (t - kT)} (x(kT) - G x(kT))` on each interval,
//! and the sampled states obey `x((k+1)T) = Gamma x(kT)` with
//! `Gamma = e^{gT} I - (e^{gT} - 1) G`. Consensus is certified spectrally.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::costs::ScalarWeights;
use crate::graph::GraphMatrices;
use crate::numerics::{sym_eigen, NumericsError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol requires a negative state gain, got g = {0}")]
    NonNegativeGain(f64),
    #[error("invalid protocol config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Tracking(#[from] crate::tracking::TrackingError),
}

/// Sampled-data run configuration.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolConfig {
    pub weights: ScalarWeights,
    pub sample_period: f64,
    pub horizon: f64,
    pub output_dt: f64,
}

const GRID_ALIGN_TOL: f64 = 1e-9;

fn is_near_integer(x: f64) -> bool {
    (x - x.round()).abs() <= GRID_ALIGN_TOL * x.abs().max(1.0)
}

impl ProtocolConfig {
    /// Checks the grid invariants: `0 < dt <= T <= horizon`, with both
    /// `T/dt` and `horizon/dt` integral so every sampling instant lies
    /// exactly on the output grid.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let err = |msg: String| Err(ProtocolError::InvalidConfig(msg));
        if !(self.sample_period > 0.0) {
            return err(format!("sample period must be positive, got {}", self.sample_period));
        }
        if !(self.output_dt > 0.0) {
            return err(format!("output dt must be positive, got {}", self.output_dt));
        }
        if self.output_dt > self.sample_period * (1.0 + GRID_ALIGN_TOL) {
            return err(format!(
                "output dt {} exceeds sample period {}",
                self.output_dt, self.sample_period
            ));
        }
        if self.horizon < self.sample_period * (1.0 - GRID_ALIGN_TOL) {
            return err(format!(
                "horizon {} is shorter than one sample period {}",
                self.horizon, self.sample_period
            ));
        }
        if !is_near_integer(self.sample_period / self.output_dt) {
            return err(format!(
                "sample period {} is not an integer multiple of output dt {}",
                self.sample_period, self.output_dt
            ));
        }
        if !is_near_integer(self.horizon / self.output_dt) {
            return err(format!(
                "horizon {} is not an integer multiple of output dt {}",
                self.horizon, self.output_dt
            ));
        }
        Ok(())
    }
}

/// A simulated trajectory on a uniform output grid.
///
/// `states` and `inputs` have one row per grid point; `sample_states` holds
/// the discrete sequence `x(kT)`, whose rows coincide exactly with the grid
/// rows at the sampling instants.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub sample_states: DMatrix<f64>,
    pub disagreement: Vec<f64>,
    /// Sampling period, when the trace came from the sampled protocol.
    pub sample_period: Option<f64>,
}

impl SimulationTrace {
    pub fn node_count(&self) -> usize {
        self.states.ncols()
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.states.row(self.states.nrows() - 1).transpose()
    }

    /// First grid time at which the disagreement drops below `tol`.
    pub fn time_to_tolerance(&self, tol: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.disagreement)
            .find(|(_, &d)| d < tol)
            .map(|(&t, _)| t)
    }
}

/// Spectral consensus certificate for a one-period map `Gamma`.
#[derive(Debug, Clone)]
pub struct ConsensusCertificate {
    /// Eigenvalues of `Gamma`, ascending (all real: `Gamma` is similar to a
    /// symmetric matrix).
    pub gamma_eigenvalues: DVector<f64>,
    pub is_consensus: bool,
    /// `1 -` second-largest eigenvalue modulus.
    pub spectral_gap: f64,
}

/// One-period transition map `Gamma = e^{gT} I - (e^{gT} - 1) G`.
pub fn gamma_matrix(
    g: f64,
    sample_period: f64,
    m: &GraphMatrices,
) -> Result<DMatrix<f64>, ProtocolError> {
    if g >= 0.0 {
        return Err(ProtocolError::NonNegativeGain(g));
    }
    assert!(sample_period > 0.0, "sample period must be positive");
    let n = m.node_count();
    let e = (g * sample_period).exp();
    Ok(DMatrix::<f64>::identity(n, n) * e - &m.averaging * (e - 1.0))
}

/// Certify consensus from the spectrum of `Gamma`.
///
/// `Gamma` shares the averaging matrix's symmetrizer, so
/// `(D+I)^{1/2} Gamma (D+I)^{-1/2}` is symmetric and the spectrum is real.
/// Consensus holds iff the only eigenvalue with modulus `>= 1` is a simple
/// eigenvalue `1` whose eigenvector is the all-ones direction.
pub fn consensus_certificate(
    gamma: &DMatrix<f64>,
    m: &GraphMatrices,
) -> Result<ConsensusCertificate, ProtocolError> {
    let n = gamma.nrows();
    let dpi = m.degree_plus_identity();
    let mut d_half = DMatrix::<f64>::zeros(n, n);
    let mut d_half_inv = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let s = dpi[(i, i)].sqrt();
        d_half[(i, i)] = s;
        d_half_inv[(i, i)] = 1.0 / s;
    }
    let sym = &d_half * gamma * &d_half_inv;
    let eig = sym_eigen(&(&sym + sym.transpose()).scale(0.5))?;

    const UNIT_TOL: f64 = 1e-9;
    let moduli: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
    let near_unit: Vec<usize> = (0..n).filter(|&i| moduli[i] >= 1.0 - UNIT_TOL).collect();

    // second-largest modulus
    let mut sorted = moduli.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let spectral_gap = if n > 1 { 1.0 - sorted[1] } else { 1.0 };

    let is_consensus = if near_unit.len() == 1 {
        let idx = near_unit[0];
        if (eig.values[idx] - 1.0).abs() <= UNIT_TOL {
            // eigenvector of the original Gamma: (D+I)^{-1/2} v, must be constant
            let v = &d_half_inv * eig.vectors.column(idx);
            let mean = v.sum() / n as f64;
            let dev = v.iter().fold(0.0f64, |acc, x| acc.max((x - mean).abs()));
            dev <= 1e-8 * mean.abs().max(1e-300)
        } else {
            false
        }
    } else {
        false
    };

    Ok(ConsensusCertificate {
        gamma_eigenvalues: eig.values,
        is_consensus,
        spectral_gap,
    })
}

/// Simulate the sampled-data protocol with the exact per-interval closed
/// form; no ODE stepping is involved.
pub fn simulate_protocol(
    m: &GraphMatrices,
    x0: &DVector<f64>,
    cfg: &ProtocolConfig,
) -> Result<SimulationTrace, ProtocolError> {
    cfg.validate()?;
    let n = m.node_count();
    if x0.len() != n {
        return Err(ProtocolError::InvalidConfig(format!(
            "initial state has length {}, graph has {} nodes",
            x0.len(),
            n
        )));
    }
    let gains = crate::tracking::scalar_agent_gains(&cfg.weights)?;
    let g = gains.g;
    let dt = cfg.output_dt;
    let per_period = (cfg.sample_period / dt).round() as usize;
    let grid_points = (cfg.horizon / dt).round() as usize + 1;
    let n_samples = (grid_points - 1) / per_period + 1;

    let mut times = Vec::with_capacity(grid_points);
    let mut states = DMatrix::<f64>::zeros(grid_points, n);
    let mut inputs = DMatrix::<f64>::zeros(grid_points, n);
    let mut disagreement_vec = Vec::with_capacity(grid_points);
    let mut sample_states = DMatrix::<f64>::zeros(n_samples, n);

    let mut xk = x0.clone();
    let mut held = &m.averaging * &xk; // G x(kT)
    sample_states.row_mut(0).copy_from(&x0.transpose());

    for j in 0..grid_points {
        let offset = j % per_period;
        if offset == 0 && j > 0 {
            // cross a sampling boundary: advance the held sample
            let decay = (g * cfg.sample_period).exp();
            xk = &held + (&xk - &held) * decay;
            held = &m.averaging * &xk;
            let k = j / per_period;
            if k < n_samples {
                sample_states.row_mut(k).copy_from(&xk.transpose());
            }
        }
        // at a sampling instant the state is x(kT) itself, bit for bit
        let x = if offset == 0 {
            xk.clone()
        } else {
            let decay = (g * offset as f64 * dt).exp();
            &held + (&xk - &held) * decay
        };
        let u = (&x - &held) * g;
        times.push(j as f64 * dt);
        disagreement_vec.push(disagreement(&x));
        states.row_mut(j).copy_from(&x.transpose());
        inputs.row_mut(j).copy_from(&u.transpose());
    }

    Ok(SimulationTrace {
        times,
        states,
        inputs,
        sample_states,
        disagreement: disagreement_vec,
        sample_period: Some(cfg.sample_period),
    })
}

/// Iterate `x(k+1) = Gamma x(k)`; row `k` of the result is `Gamma^k x0`.
pub fn discrete_iterate(gamma: &DMatrix<f64>, x0: &DVector<f64>, steps: usize) -> DMatrix<f64> {
    let n = x0.len();
    let mut out = DMatrix::<f64>::zeros(steps + 1, n);
    let mut x = x0.clone();
    out.row_mut(0).copy_from(&x.transpose());
    for k in 1..=steps {
        x = gamma * &x;
        out.row_mut(k).copy_from(&x.transpose());
    }
    out
}

/// Maximum pairwise state difference, `max(x) - min(x)`.
pub fn disagreement(x: &DVector<f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}
