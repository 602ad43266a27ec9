//! Lowest eigenpairs of real-symmetric sparse operators.
//!
//! Small matrices go to LAPACK `dsyevr` with an index range; larger ones use
//! restarted Lanczos with full reorthogonalization and locking of converged
//! vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHermitian;

/// Largest dimension handled by the dense solver.
pub const DENSE_EIGEN_MAX_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub dense_max_dim: usize,
    /// Krylov subspace size per restart cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to the row-sum norm of the matrix.
    pub rel_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { dense_max_dim: DENSE_EIGEN_MAX_DIM, krylov_dim: 80, max_restarts: 300, rel_tol: 1e-8 }
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn lowest_eigenpairs(h: &SparseHermitian, k: usize) -> Result<Eigenpairs> {
    lowest_eigenpairs_with(h, k, &EigenOptions::default())
}

pub fn lowest_eigenpairs_with(h: &SparseHermitian, k: usize, opts: &EigenOptions) -> Result<Eigenpairs> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParams(format!("requested {k} eigenpairs of a {n}-dimensional matrix")));
    }
    let mut pairs = if n <= opts.dense_max_dim {
        dense_lowest(h.to_dense(), n, k)?
    } else {
        lanczos_lowest(h, k, opts)?
    };
    for v in &mut pairs.vectors {
        fix_phase(v);
    }
    let tol = opts.rel_tol * h.norm_bound().max(f64::MIN_POSITIVE);
    for (e, v) in pairs.values.iter().zip(&pairs.vectors) {
        let r = residual(h, *e, v);
        if !(r < tol) {
            return Err(Error::EigenNonConvergence { t: None, detail: format!("residual {r:.3e} exceeds {tol:.3e}") });
        }
    }
    Ok(pairs)
}

/// Lowest `k` eigenpairs of a dense symmetric matrix stored column-major.
pub fn dense_lowest(mut a: Vec<f64>, n: usize, k: usize) -> Result<Eigenpairs> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut m = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * k];
    let mut isuppz = vec![0; 2 * k.max(1)];
    let mut info = 0;
    let mut work = vec![0.0; 1];
    let mut iwork = vec![0; 1];
    // Workspace query, then the solve.
    for query in [true, false] {
        let (lwork, liwork) = if query { (-1, -1) } else { (work.len() as i32, iwork.len() as i32) };
        unsafe {
            lapack::dsyevr(
                b'V', b'I', b'U', ni, &mut a, ni, 0.0, 0.0, 1, k as i32, 0.0, &mut m, &mut w, &mut z, ni,
                &mut isuppz, &mut work, lwork, &mut iwork, liwork, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::EigenNonConvergence { t: None, detail: format!("dsyevr info = {info}") });
        }
        if query {
            work = vec![0.0; work[0] as usize];
            iwork = vec![0; iwork[0] as usize];
        }
    }
    if m as usize != k {
        return Err(Error::EigenNonConvergence { t: None, detail: format!("dsyevr returned {m} of {k} eigenpairs") });
    }
    Ok(Eigenpairs { values: w[..k].to_vec(), vectors: z.chunks(n).map(<[f64]>::to_vec).collect() })
}

fn lanczos_lowest(h: &SparseHermitian, k: usize, opts: &EigenOptions) -> Result<Eigenpairs> {
    let n = h.dim();
    let tol = opts.rel_tol * h.norm_bound() * 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut scratch = vec![0.0; n];

    while locked.len() < k {
        let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut done = false;
        for _ in 0..opts.max_restarts {
            let (theta, y) = lanczos_cycle(h, &locked, &mut start, opts.krylov_dim, &mut scratch)?;
            let r = residual(h, theta, &y);
            start = y;
            if r < tol {
                values.push(theta);
                locked.push(start.clone());
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::EigenNonConvergence {
                t: None,
                detail: format!("Lanczos stalled on eigenpair {} after {} restarts", locked.len(), opts.max_restarts),
            });
        }
    }
    // Locking may converge a near-degenerate pair out of order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(Eigenpairs {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| locked[i].clone()).collect(),
    })
}

/// One Lanczos cycle in the complement of `locked`; returns the lowest Ritz
/// pair.
fn lanczos_cycle(
    h: &SparseHermitian,
    locked: &[Vec<f64>],
    start: &mut [f64],
    m_max: usize,
    w: &mut [f64],
) -> Result<(f64, Vec<f64>)> {
    let n = h.dim();
    orthogonalize(start, locked);
    let nrm = norm(start);
    if nrm == 0.0 {
        return Err(Error::EigenNonConvergence { t: None, detail: "start vector lies in the locked space".into() });
    }
    let mut q: Vec<Vec<f64>> = vec![start.iter().map(|x| x / nrm).collect()];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let m_cap = m_max.min(n - locked.len());
    loop {
        let j = q.len() - 1;
        h.matvec(&q[j], w);
        let a = dot(w, &q[j]);
        alpha.push(a);
        orthogonalize(w, locked);
        // Two passes of classical Gram-Schmidt against the Krylov basis.
        for _ in 0..2 {
            orthogonalize(w, &q);
        }
        let b = norm(w);
        if q.len() == m_cap || b < 1e-13 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (imin, theta) = eig.eigenvalues.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let s = eig.eigenvectors.column(imin);
    let mut y = vec![0.0; n];
    for (qi, si) in q.iter().zip(s.iter()) {
        for (yk, qk) in y.iter_mut().zip(qi) {
            *yk += si * qk;
        }
    }
    orthogonalize(&mut y, locked);
    let ny = norm(&y);
    y.iter_mut().for_each(|x| *x /= ny);
    Ok((theta, y))
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// ‖Hv − ev‖₂.
pub fn residual(h: &SparseHermitian, e: f64, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.matvec(v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

/// Makes the largest-magnitude component positive (first index on ties).
pub fn fix_phase(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
