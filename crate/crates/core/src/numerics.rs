//! Dense small-matrix kernels: cyclic-Jacobi symmetric eigendecomposition,
//! structured Lyapunov solves on singular Laplacian pencils, a stabilizing
//! algebraic Riccati solver, Sylvester solves, and spectral matrix functions.
//!
//! Everything here targets small dense matrices (a few dozen rows at most);
//! accuracy and eigenvector orthogonality matter more than speed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("right-hand side does not vanish on the consensus direction (|M 1| = {0:.3e})")]
    KernelMismatch(f64),
    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,
    #[error("Hamiltonian matrix has no stable invariant subspace of the required dimension")]
    NoStableSubspace,
    #[error("Sylvester pencil is singular (spectra of A and -B intersect)")]
    SingularPencil,
}

/// Relative threshold below which an eigenvalue counts as structurally zero.
pub const KERNEL_RELATIVE_TOL: f64 = 1e-9;

/// Absolute kernel threshold for a spectrum with largest eigenvalue `lambda_max`.
pub fn kernel_threshold(lambda_max: f64) -> f64 {
    KERNEL_RELATIVE_TOL * lambda_max.abs().max(1.0)
}

/// Eigendecomposition of a symmetric matrix: `S = V diag(values) V^T`.
///
/// Eigenvalues are sorted ascending; the columns of `vectors` are the
/// corresponding orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn check_symmetric(s: &DMatrix<f64>) -> Result<(), NumericsError> {
    let scale = max_abs(s).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if worst > 1e-12 * scale {
        return Err(NumericsError::NotSymmetric(worst));
    }
    Ok(())
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic-Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate away every off-diagonal entry in turn until all
/// off-diagonal magnitudes fall below `1e-12 * |S|_F`. Jacobi keeps the
/// accumulated eigenvector matrix orthogonal to machine precision, which
/// the spectral Lyapunov construction depends on.
pub fn sym_eigen(s: &DMatrix<f64>) -> Result<SymEigen, NumericsError> {
    assert_eq!(s.nrows(), s.ncols(), "sym_eigen needs a square matrix");
    check_symmetric(s)?;
    let n = s.nrows();
    let mut a = s.clone();
    // enforce exact symmetry so rotations stay consistent
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let fro = a.norm();
    let tol = 1e-12 * fro;

    let off = |a: &DMatrix<f64>| -> f64 {
        let mut m = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                m = m.max(a[(i, j)].abs());
            }
        }
        m
    };

    let mut converged = n < 2 || off(&a) <= tol;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                // A <- J^T A J on rows/columns p, q
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) <= tol;
    }
    if !converged {
        return Err(NumericsError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values = DVector::from_iterator(n, idx.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vectors.set_column(col, &v.column(i));
    }
    Ok(SymEigen { values, vectors })
}

/// Solve `-L X - X L + M = 0` for the solution with `1_N` in its kernel.
///
/// `L` is a graph Laplacian (symmetric PSD, singular) and `M` must vanish
/// on the consensus direction (`M 1 = 0`). In `L`'s eigenbasis the solution
/// is `X~_ij = M~_ij / (lambda_i + lambda_j)` wherever the denominator is
/// above the kernel threshold, and zero on the kernel block. Zeroing the
/// kernel block selects the unique PSD solution whose kernel contains `1_N`.
pub fn kernel_lyapunov(l: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    let n = l.nrows();
    assert_eq!(m.nrows(), n);
    assert_eq!(m.ncols(), n);
    let ones = DVector::from_element(n, 1.0);
    let kick = (m * &ones).amax();
    if kick > 1e-8 * max_abs(m).max(1.0) {
        return Err(NumericsError::KernelMismatch(kick));
    }

    let eig = sym_eigen(l)?;
    let thr = kernel_threshold(eig.values[n - 1]);
    let m_tilde = eig.vectors.transpose() * m * &eig.vectors;
    let mut x_tilde = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let denom = eig.values[i] + eig.values[j];
            if denom > thr {
                x_tilde[(i, j)] = m_tilde[(i, j)] / denom;
            }
        }
    }
    let x = &eig.vectors * x_tilde * eig.vectors.transpose();
    Ok(symmetrize(&x))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Riccati residual `A^T P + P A - P B R^{-1} B^T P + Q`.
pub fn are_residual(
    a: &DMatrix<f64>,
    gain_product: &DMatrix<f64>, // B R^{-1} B^T
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    a.transpose() * p + p * a - p * gain_product * p + q
}

/// Stabilizing solution of `A^T P + P A - P B R^{-1} B^T P + Q = 0`.
///
/// The stable invariant subspace of the Hamiltonian matrix is extracted
/// with the matrix sign function (Newton iteration with determinant
/// scaling), which is adequate for the small dense instances handled
/// here. A Newton refinement step runs whenever the residual is above
/// tolerance.
pub fn stabilizing_are(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, NumericsError> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.nrows(), n);
    assert_eq!(q.nrows(), n);
    assert_eq!(r.nrows(), r.ncols());

    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(NumericsError::NotStabilizable)?;
    let gp = b * &r_inv * b.transpose(); // B R^{-1} B^T

    // Hamiltonian H = [A, -BR^{-1}B^T; -Q, -A^T]
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&gp));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(&h).ok_or(NumericsError::NotStabilizable)?;

    // Projector onto the stable subspace: (I - sign(H)) / 2, rank n.
    let proj = (DMatrix::<f64>::identity(2 * n, 2 * n) - &sign) * 0.5;
    let qr = proj.col_piv_qr();
    let basis = qr.q();
    let rmat = qr.r();
    if rmat[(n - 1, n - 1)].abs() < 1e-10 * rmat[(0, 0)].abs().max(1e-300) {
        return Err(NumericsError::NoStableSubspace);
    }
    let u1 = basis.view((0, 0), (n, n)).into_owned();
    let u2 = basis.view((n, 0), (n, n)).into_owned();
    let u1t_lu = u1.transpose().lu();
    let p_t = u1t_lu
        .solve(&u2.transpose())
        .ok_or(NumericsError::NoStableSubspace)?;
    let mut p = symmetrize(&p_t.transpose());

    // Newton refinement: A_c^T D + D A_c = -residual with A_c = A - BR^{-1}B^T P.
    let q_scale = max_abs(q).max(1.0);
    for _ in 0..10 {
        let res = are_residual(a, &gp, q, &p);
        if max_abs(&res) < 1e-12 * q_scale {
            break;
        }
        let a_c = a - &gp * &p;
        let delta = solve_sylvester(&a_c.transpose(), &a_c, &(-res))?;
        p = symmetrize(&(p + delta));
    }

    let res = are_residual(a, &gp, q, &p);
    if max_abs(&res) > 1e-10 * q_scale {
        return Err(NumericsError::NoStableSubspace);
    }
    // closed loop must actually be stable, not just a fixed point
    let a_c = a - &gp * &p;
    let abscissa = a_c
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, ev| acc.max(ev.re));
    if abscissa >= 0.0 {
        return Err(NumericsError::NoStableSubspace);
    }
    Ok(p)
}

/// Matrix sign function by Newton iteration `Z <- (cZ + (cZ)^{-1}) / 2`
/// with determinant scaling. Returns `None` when an iterate is singular
/// or the iteration stalls (eigenvalues on the imaginary axis).
fn matrix_sign(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det: f64 = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let z_inv = lu.try_inverse()?;
        let c = det.abs().powf(-1.0 / n as f64);
        let z_new = (&z * c + &z_inv / c) * 0.5;
        let diff = max_abs(&(&z_new - &z));
        let scale = max_abs(&z_new).max(1.0);
        z = z_new;
        if diff <= 1e-14 * scale {
            return Some(z);
        }
    }
    None
}

/// Solve the Sylvester equation `A X + X B = C` by Kronecker vectorization.
///
/// Fine for the small blocks arising here; not meant for large matrices.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, NumericsError> {
    let n = a.nrows();
    let m = b.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.ncols(), m);
    assert_eq!(c.nrows(), n);
    assert_eq!(c.ncols(), m);

    // vec(AX + XB) = (I_m (x) A + B^T (x) I_n) vec(X)
    let id_n = DMatrix::<f64>::identity(n, n);
    let id_m = DMatrix::<f64>::identity(m, m);
    let k = id_m.kronecker(a) + b.transpose().kronecker(&id_n);
    let rhs = DVector::from_column_slice(c.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(NumericsError::SingularPencil)?;
    let x = DMatrix::from_column_slice(n, m, sol.as_slice());

    let res = a * &x + &x * b - c;
    if max_abs(&res) > 1e-10 * max_abs(c).max(1.0) {
        return Err(NumericsError::SingularPencil);
    }
    Ok(x)
}

/// `e^{S t}` for symmetric `S`, evaluated spectrally as `V e^{Lambda t} V^T`.
pub fn matrix_exp_sym(s: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>, NumericsError> {
    let eig = sym_eigen(s)?;
    Ok(exp_from_eigen(&eig, t))
}

/// Same as [`matrix_exp_sym`] but reusing an existing eigendecomposition.
pub fn exp_from_eigen(eig: &SymEigen, t: f64) -> DMatrix<f64> {
    let n = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let e = (eig.values[j] * t).exp();
        scaled.column_mut(j).scale_mut(e);
    }
    scaled * eig.vectors.transpose()
}
