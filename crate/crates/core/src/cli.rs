//! Scenario-driven front end: parse graph and scenario files, run the
//! centralized and/or decentralized experiment, emit CSV traces, and build
//! a run report. The two regression presets reproduce the 6-agent cycle
//! scenario (q = 2, r = 1, alpha = 0.01) with sampling periods 10 and 0.1.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::centralized::{
    centralized_trajectory, cost_of_gain, solve_centralized, CentralizedError, CentralizedOutcome,
};
use crate::costs::{
    cost_neighbor_average, cost_relative_disagreement, evaluate_local_discounted_cost,
    evaluate_trajectory_cost, CostError, CostSpec, ScalarWeights,
};
use crate::graph::{derive_matrices, parse_edge_list, six_cycle, Graph, GraphError, GraphMatrices};
use crate::protocol::{
    consensus_certificate, gamma_matrix, simulate_protocol, ProtocolConfig, ProtocolError,
    SimulationTrace,
};
use crate::tracking::{scalar_agent_gains, TrackingError};

/// Disagreement level under which the network counts as settled in reports.
pub const CONSENSUS_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Scenario(String),
    #[error("initial state has {got} entries but the graph has {expected} nodes")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Centralized(#[from] CentralizedError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Centralized,
    Decentralized,
    Compare,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Centralized => "centralized",
            Mode::Decentralized => "decentralized",
            Mode::Compare => "compare",
        };
        f.write_str(s)
    }
}

/// Which global cost functional the run is judged by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// `W = 2q L^+`, `R = rI`: pairwise disagreement with neighbors.
    RelativeDisagreement,
    /// `W = q (D+I)^{-2}`, `R = rI`: deviation from the neighborhood average.
    NeighborAverage,
}

#[derive(Debug, Clone)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(Graph),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: GraphSource,
    pub x0: Vec<f64>,
    pub weights: ScalarWeights,
    pub sample_period: f64,
    pub horizon: f64,
    pub output_dt: f64,
    pub mode: Mode,
    pub cost: CostKind,
}

/// Parse the flat `key = value` scenario format. Required keys: `graph`,
/// `x0`, `q`, `r`, `alpha`, `T`, `horizon`, `dt`, `mode`. Optional:
/// `cost = relative | neighbor` (default `neighbor`). `#` starts a comment.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let mut graph: Option<PathBuf> = None;
    let mut x0: Option<Vec<f64>> = None;
    let mut numbers: std::collections::HashMap<&str, f64> = Default::default();
    let mut mode: Option<Mode> = None;
    let mut cost = CostKind::NeighborAverage;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| CliError::Scenario(format!("line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "graph" => graph = Some(PathBuf::from(value)),
            "x0" => {
                let parsed: Result<Vec<f64>, _> = value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect();
                x0 = Some(parsed.map_err(|e| bad(format!("bad x0: {e}")))?);
            }
            "q" | "r" | "alpha" | "T" | "horizon" | "dt" => {
                let v: f64 = value.parse().map_err(|e| bad(format!("bad {key}: {e}")))?;
                let key_static = match key {
                    "q" => "q",
                    "r" => "r",
                    "alpha" => "alpha",
                    "T" => "T",
                    "horizon" => "horizon",
                    _ => "dt",
                };
                numbers.insert(key_static, v);
            }
            "mode" => {
                mode = Some(match value {
                    "centralized" => Mode::Centralized,
                    "decentralized" => Mode::Decentralized,
                    "compare" => Mode::Compare,
                    other => return Err(bad(format!("unknown mode `{other}`"))),
                });
            }
            "cost" => {
                cost = match value {
                    "relative" => CostKind::RelativeDisagreement,
                    "neighbor" => CostKind::NeighborAverage,
                    other => return Err(bad(format!("unknown cost `{other}`"))),
                };
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }

    let missing = |name: &str| CliError::Scenario(format!("missing key `{name}`"));
    let num = |name: &'static str| numbers.get(name).copied().ok_or_else(|| missing(name));
    Ok(Scenario {
        name: "scenario".into(),
        graph: GraphSource::Path(graph.ok_or_else(|| missing("graph"))?),
        x0: x0.ok_or_else(|| missing("x0"))?,
        weights: ScalarWeights::new(num("q")?, num("r")?, num("alpha")?)?,
        sample_period: num("T")?,
        horizon: num("horizon")?,
        output_dt: num("dt")?,
        mode: mode.ok_or_else(|| missing("mode"))?,
        cost,
    })
}

/// Load a scenario file; a relative `graph` path is resolved against the
/// scenario file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut scenario = parse_scenario(&text)?;
    scenario.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    if let GraphSource::Path(graph_path) = &scenario.graph {
        if graph_path.is_relative() {
            if let Some(dir) = path.parent() {
                scenario.graph = GraphSource::Path(dir.join(graph_path));
            }
        }
    }
    Ok(scenario)
}

/// The 6-agent cycle scenario with sampling period `T = 10`.
pub fn preset_fig1() -> Scenario {
    Scenario {
        name: "paper-fig1".into(),
        graph: GraphSource::Inline(six_cycle()),
        x0: vec![1.0, 2.0, -1.0, -2.0, 1.0, 3.0],
        weights: ScalarWeights::new(2.0, 1.0, 0.01).unwrap(),
        sample_period: 10.0,
        horizon: 400.0,
        output_dt: 0.1,
        mode: Mode::Compare,
        cost: CostKind::NeighborAverage,
    }
}

/// Same network and weights as [`preset_fig1`] but sampled at `T = 0.1`.
pub fn preset_fig2() -> Scenario {
    Scenario {
        sample_period: 0.1,
        horizon: 60.0,
        output_dt: 0.001,
        name: "paper-fig2".into(),
        ..preset_fig1()
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "paper-fig1" => Some(preset_fig1()),
        "paper-fig2" => Some(preset_fig2()),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct DecentralizedReport {
    pub g: f64,
    pub g_prime: f64,
    pub final_disagreement: f64,
    pub time_to_tolerance: Option<f64>,
    /// Truncated global cost with `alpha = 0`.
    pub global_cost: f64,
    /// Truncated sum of the discounted local tracking costs.
    pub local_discounted_cost: f64,
    pub is_consensus_certified: bool,
    pub spectral_gap: f64,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CentralizedReport {
    pub outcome: CentralizedOutcome,
    /// `J(g*)` from the quadratic forms, when an optimum exists.
    pub formula_cost: Option<f64>,
    pub final_disagreement: Option<f64>,
    pub time_to_tolerance: Option<f64>,
    /// Truncated global cost with `alpha = 0` along the simulated optimum.
    pub global_cost: Option<f64>,
    pub note: Option<String>,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario_name: String,
    pub mode: Mode,
    pub decentralized: Option<DecentralizedReport>,
    pub centralized: Option<CentralizedReport>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {} (mode: {})", self.scenario_name, self.mode)?;
        if let Some(d) = &self.decentralized {
            writeln!(f, "decentralized protocol:")?;
            writeln!(f, "  gains: g = {:.6}, g' = {:.6}", d.g, d.g_prime)?;
            writeln!(f, "  final disagreement: {:.6e}", d.final_disagreement)?;
            match d.time_to_tolerance {
                Some(t) => writeln!(f, "  time to disagreement < {CONSENSUS_TOLERANCE:.0e}: {t}")?,
                None => writeln!(f, "  disagreement never fell below {CONSENSUS_TOLERANCE:.0e}")?,
            }
            writeln!(f, "  truncated global cost (alpha = 0): {:.9}", d.global_cost)?;
            writeln!(
                f,
                "  truncated discounted local cost: {:.9}",
                d.local_discounted_cost
            )?;
            writeln!(
                f,
                "  consensus certificate: {} (spectral gap {:.6})",
                if d.is_consensus_certified { "yes" } else { "no" },
                d.spectral_gap
            )?;
            writeln!(f, "  trace: {}", d.trace_path.display())?;
        }
        if let Some(c) = &self.centralized {
            writeln!(f, "centralized optimum:")?;
            match c.outcome {
                CentralizedOutcome::Optimal { gain } => writeln!(f, "  g* = {gain:.6}")?,
                CentralizedOutcome::AnyGainOptimal => {
                    writeln!(f, "  every g > 0 is optimal (initial state is consensus)")?
                }
                CentralizedOutcome::NoOptimumExists { infimum } => writeln!(
                    f,
                    "  no optimal gain exists; infimum {infimum} approached as g -> 0+"
                )?,
            }
            if let Some(j) = c.formula_cost {
                writeln!(f, "  J(g*) = {j:.9}")?;
            }
            if let Some(d) = c.final_disagreement {
                writeln!(f, "  final disagreement: {d:.6e}")?;
            }
            if let Some(t) = c.time_to_tolerance {
                writeln!(f, "  time to disagreement < {CONSENSUS_TOLERANCE:.0e}: {t}")?;
            }
            if let Some(cost) = c.global_cost {
                writeln!(f, "  truncated global cost (alpha = 0): {cost:.9}")?;
            }
            if let Some(note) = &c.note {
                writeln!(f, "  note: {note}")?;
            }
            if let Some(p) = &c.trace_path {
                writeln!(f, "  trace: {}", p.display())?;
            }
        }
        if let (Some(d), Some(c)) = (&self.decentralized, &self.centralized) {
            if let Some(opt) = c.global_cost {
                writeln!(
                    f,
                    "suboptimality: decentralized / centralized global cost = {:.6}",
                    d.global_cost / opt
                )?;
            }
        }
        Ok(())
    }
}

fn cost_spec_for(kind: CostKind, m: &GraphMatrices, weights: &ScalarWeights) -> CostSpec {
    match kind {
        CostKind::RelativeDisagreement => cost_relative_disagreement(m, weights.q, weights.r),
        CostKind::NeighborAverage => cost_neighbor_average(m, weights.q, weights.r),
    }
}

/// Execute a scenario and write trace files under `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path, quiet: bool) -> Result<RunReport, CliError> {
    let graph = match &scenario.graph {
        GraphSource::Inline(g) => g.clone(),
        GraphSource::Path(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            parse_edge_list(&text)?
        }
    };
    let m = derive_matrices(&graph)?;
    let n = m.node_count();
    if scenario.x0.len() != n {
        return Err(CliError::DimensionMismatch {
            got: scenario.x0.len(),
            expected: n,
        });
    }
    let x0 = DVector::from_vec(scenario.x0.clone());
    let spec = cost_spec_for(scenario.cost, &m, &scenario.weights);
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let decentralized = if matches!(scenario.mode, Mode::Decentralized | Mode::Compare) {
        let cfg = ProtocolConfig {
            weights: scenario.weights,
            sample_period: scenario.sample_period,
            horizon: scenario.horizon,
            output_dt: scenario.output_dt,
        };
        let trace = simulate_protocol(&m, &x0, &cfg)?;
        let gains = scalar_agent_gains(&scenario.weights)?;
        let gamma = gamma_matrix(gains.g, scenario.sample_period, &m)?;
        let cert = consensus_certificate(&gamma, &m)?;
        let global_cost = evaluate_trajectory_cost(&trace, &spec, 0.0)?;
        let local_discounted_cost =
            evaluate_local_discounted_cost(&trace, &m, &scenario.weights)?;
        let trace_path = out_dir.join(format!("{}-decentralized.csv", scenario.name));
        emit_trace(&trace, &trace_path)?;
        Some(DecentralizedReport {
            g: gains.g,
            g_prime: gains.g_prime,
            final_disagreement: *trace.disagreement.last().unwrap(),
            time_to_tolerance: trace.time_to_tolerance(CONSENSUS_TOLERANCE),
            global_cost,
            local_discounted_cost,
            is_consensus_certified: cert.is_consensus,
            spectral_gap: cert.spectral_gap,
            trace_path,
        })
    } else {
        None
    };

    let centralized = if matches!(scenario.mode, Mode::Centralized | Mode::Compare) {
        let sol = solve_centralized(&m, &spec, &x0)?;
        match sol.outcome {
            CentralizedOutcome::Optimal { gain } => {
                let points = (scenario.horizon / scenario.output_dt).round() as usize;
                let grid: Vec<f64> = (0..=points).map(|i| i as f64 * scenario.output_dt).collect();
                let trace = centralized_trajectory(gain, &m, &x0, &grid)?;
                let global_cost = evaluate_trajectory_cost(&trace, &spec, 0.0)?;
                let trace_path = out_dir.join(format!("{}-centralized.csv", scenario.name));
                emit_trace(&trace, &trace_path)?;
                Some(CentralizedReport {
                    outcome: sol.outcome,
                    formula_cost: Some(cost_of_gain(gain, &x0, &sol)?),
                    final_disagreement: trace.disagreement.last().copied(),
                    time_to_tolerance: trace.time_to_tolerance(CONSENSUS_TOLERANCE),
                    global_cost: Some(global_cost),
                    note: None,
                    trace_path: Some(trace_path),
                })
            }
            CentralizedOutcome::AnyGainOptimal => Some(CentralizedReport {
                outcome: sol.outcome,
                formula_cost: Some(0.0),
                final_disagreement: None,
                time_to_tolerance: None,
                global_cost: None,
                note: Some("initial state is already a consensus state; cost is zero".into()),
                trace_path: None,
            }),
            CentralizedOutcome::NoOptimumExists { .. } => Some(CentralizedReport {
                outcome: sol.outcome,
                formula_cost: None,
                final_disagreement: None,
                time_to_tolerance: None,
                global_cost: None,
                note: Some(
                    "state cost vanishes while input cost does not; the infimum 0 is \
                     approached as g -> 0+ and no optimal gain exists"
                        .into(),
                ),
                trace_path: None,
            }),
        }
    } else {
        None
    };

    let report = RunReport {
        scenario_name: scenario.name.clone(),
        mode: scenario.mode,
        decentralized,
        centralized,
    };
    if !quiet {
        print!("{report}");
    }
    Ok(report)
}

/// Write a trace as CSV: `t,x1,...,xN,u1,...,uN,disagreement`, one row per
/// grid point, 17 significant digits so values round-trip bit-exactly.
pub fn emit_trace(trace: &SimulationTrace, path: &Path) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let n = trace.node_count();
    // rows are formatted into one reusable buffer; per-field write! calls
    // through the BufWriter dominate the runtime on long traces otherwise
    let mut write = || -> std::io::Result<()> {
        use std::fmt::Write as _;
        let mut line = String::with_capacity(32 * (2 * n + 2));
        line.push('t');
        for i in 1..=n {
            let _ = write!(line, ",x{i}");
        }
        for i in 1..=n {
            let _ = write!(line, ",u{i}");
        }
        line.push_str(",disagreement\n");
        w.write_all(line.as_bytes())?;
        for (row, &t) in trace.times.iter().enumerate() {
            line.clear();
            let _ = write!(line, "{t:.16e}");
            for i in 0..n {
                let _ = write!(line, ",{:.16e}", trace.states[(row, i)]);
            }
            for i in 0..n {
                let _ = write!(line, ",{:.16e}", trace.inputs[(row, i)]);
            }
            let _ = writeln!(line, ",{:.16e}", trace.disagreement[row]);
            w.write_all(line.as_bytes())?;
        }
        w.flush()
    };
    write().map_err(io_err)
}

/// Parse a CSV produced by [`emit_trace`] back into grid data
/// `(times, states, inputs, disagreement)`.
pub fn parse_trace_csv(
    text: &str,
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::Scenario(format!("trace csv: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols = header.split(',').count();
    if cols < 4 || (cols - 2) % 2 != 0 {
        return Err(bad(format!("unexpected column count {cols}")));
    }
    let n = (cols - 2) / 2;
    let mut times = Vec::new();
    let mut states_rows: Vec<f64> = Vec::new();
    let mut inputs_rows: Vec<f64> = Vec::new();
    let mut dis = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        let values = values.map_err(|e| bad(format!("bad number: {e}")))?;
        if values.len() != cols {
            return Err(bad(format!("row has {} fields, expected {cols}", values.len())));
        }
        times.push(values[0]);
        states_rows.extend_from_slice(&values[1..1 + n]);
        inputs_rows.extend_from_slice(&values[1 + n..1 + 2 * n]);
        dis.push(values[cols - 1]);
    }
    let rows = times.len();
    let states = DMatrix::from_row_slice(rows, n, &states_rows);
    let inputs = DMatrix::from_row_slice(rows, n, &inputs_rows);
    Ok((times, states, inputs, dis))
}
