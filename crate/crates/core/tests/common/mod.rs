//! Shared test support: randomized connected graphs and independent
//! numerical oracles (Taylor matrix exponential, Gauss-Legendre quadrature
//! of the Lyapunov integral, Newton-Kleinman Riccati iteration). The
//! oracles deliberately avoid the library's spectral solution paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netlq::graph::{build_graph, Graph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph on 2..=max_n nodes: a random spanning tree plus
/// extra edges with probability 0.3.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let n = rng.gen_range(2..=max_n);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 2..=n {
        let j = rng.gen_range(1..i);
        edges.push((j, i));
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            if rng.gen_bool(0.3) {
                edges.push((i, j));
            }
        }
    }
    build_graph(n, &edges).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))
}

/// Random symmetric PSD matrix `B^T B` with entries of order one.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    b.transpose() * b
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Matrix exponential by scaling-and-squaring over a plain Taylor series.
/// Independent of the library's spectral evaluation.
pub fn mat_exp_taylor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = max_abs(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = m / 2.0f64.powi(squarings as i32);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..60 {
        term = &term * (&scaled / k as f64);
        result += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Gauss-Legendre nodes and weights on [-1, 1], via Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = pk;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature oracle for `integral over [0, inf) of e^{-tau L} M e^{-tau L}`:
/// composite 20-point Gauss-Legendre on geometrically growing panels,
/// truncated where `e^{-2 lambda_2 tau} < 1e-14` with `lambda_2` the
/// smallest positive eigenvalue of `L`.
pub fn lyapunov_quadrature_oracle(
    l: &DMatrix<f64>,
    m: &DMatrix<f64>,
    lambda2: f64,
    lambda_max: f64,
) -> DMatrix<f64> {
    let n = l.nrows();
    let tau_max = 14.0 * 10.0f64.ln() / (2.0 * lambda2);
    let (nodes, weights) = gauss_legendre(20);
    let mut total = DMatrix::<f64>::zeros(n, n);
    let mut start = 0.0;
    let mut width = 0.25 / lambda_max.max(1e-6);
    while start < tau_max {
        let end = (start + width).min(tau_max);
        let half = 0.5 * (end - start);
        let mid = 0.5 * (end + start);
        for (x, w) in nodes.iter().zip(&weights) {
            let tau = mid + half * x;
            let e = mat_exp_taylor(&(l * -tau));
            total += &e * m * &e * (w * half);
        }
        start = end;
        width *= 2.0;
    }
    total
}

/// Lyapunov solve `A^T X + X A + C = 0` by Kronecker vectorization; used
/// inside the Newton-Kleinman oracle.
fn lyapunov_kron(a: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(&a.transpose()) + a.transpose().kronecker(&id);
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = k.lu().solve(&(-rhs)).expect("Lyapunov pencil is regular");
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    (&x + x.transpose()) * 0.5
}

/// Newton-Kleinman iteration for the stabilizing Riccati solution, started
/// from a gain that already stabilizes `A` (zero gain when `A` is stable).
pub fn newton_kleinman_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let r_inv = r.clone().try_inverse().unwrap();
    let mut k = DMatrix::<f64>::zeros(b.ncols(), n);
    let mut p = DMatrix::<f64>::zeros(n, n);
    for _ in 0..200 {
        let a_c = a - b * &k;
        let c = q + k.transpose() * r * &k;
        let p_next = lyapunov_kron(&a_c, &c);
        let diff = max_abs(&(&p_next - &p));
        p = p_next;
        k = &r_inv * b.transpose() * &p;
        if diff < 1e-14 * max_abs(&p).max(1.0) {
            break;
        }
    }
    p
}
