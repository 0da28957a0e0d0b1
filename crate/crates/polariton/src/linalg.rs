//! Small dense and iterative eigensolvers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues in ascending order.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (c, &o) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(o));
    }
    (values, vectors)
}

/// Make the largest-magnitude component of every column positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for mut c in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in c.iter() {
            if x.abs() > best.abs() + 1e-14 {
                best = x;
            }
        }
        if best < 0.0 {
            c.neg_mut();
        }
    }
}

/// Modified Gram–Schmidt on the columns, in place. Returns an error when a
/// column becomes linearly dependent on its predecessors.
pub fn orthonormalize(u: &mut DMatrix<f64>) -> Result<()> {
    for i in 0..u.ncols() {
        for _ in 0..2 {
            for j in 0..i {
                let p = u.column(j).dot(&u.column(i));
                let cj = u.column(j).clone_owned();
                u.column_mut(i).axpy(-p, &cj, 1.0);
            }
        }
        let nrm = u.column(i).norm();
        if nrm < 1e-12 {
            return Err(Error::Invariant(format!("column {i} is linearly dependent")));
        }
        u.column_mut(i).scale_mut(1.0 / nrm);
    }
    Ok(())
}

/// max |UᵀU − I|.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut e: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { 1.0 } else { 0.0 };
            e = e.max((g[(i, j)] - t).abs());
        }
    }
    e
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self { krylov_dim: 80, max_restarts: 200, tolerance: 1e-9, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: DVector<f64>,
    pub residual: f64,
    pub matvecs: usize,
    /// Second Ritz value of the last cycle, for degeneracy checks.
    pub next_value: f64,
}

/// Lowest eigenpair of a symmetric operator with restarted Lanczos and full
/// reorthogonalization. Each restart begins from the current Ritz vector.
pub fn lanczos_lowest<F>(dim: usize, apply: F, start: Option<DVector<f64>>, cfg: &LanczosConfig) -> Result<LanczosResult>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let mut v0 = match start {
        Some(s) if s.len() == dim && s.norm() > 0.0 => s,
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5)
        }
    };
    v0 /= v0.norm();
    let m = cfg.krylov_dim.min(dim).max(1);
    let mut matvecs = 0;
    let mut last = (f64::NAN, f64::INFINITY, f64::NAN);
    for _ in 0..cfg.max_restarts {
        let mut basis: Vec<DVector<f64>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = apply(&basis[j]);
            matvecs += 1;
            let a = basis[j].dot(&w);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let p = b.dot(&w);
                    w.axpy(-p, b, 1.0);
                }
            }
            let bn = w.norm();
            if j + 1 == m || bn < 1e-13 {
                break;
            }
            beta.push(bn);
            basis.push(w / bn);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let (vals, vecs) = sorted_eigen(&t);
        let mut x = DVector::zeros(dim);
        for (i, b) in basis.iter().enumerate().take(k) {
            x.axpy(vecs[(i, 0)], b, 1.0);
        }
        x /= x.norm();
        let hx = apply(&x);
        matvecs += 1;
        let theta = x.dot(&hx);
        let r = (&hx - &x * theta).norm();
        let next = if k > 1 { vals[1] } else { f64::NAN };
        last = (theta, r, next);
        if r < cfg.tolerance {
            return Ok(LanczosResult { value: theta, vector: x, residual: r, matvecs, next_value: next });
        }
        v0 = x;
    }
    Err(Error::NotConverged { what: "Lanczos", iterations: cfg.max_restarts, residual: last.1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_matches_dense() {
        let n = 120;
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (i as f64).sin() * 3.0 + i as f64 * 0.01
            } else {
                1.0 / (1.0 + (i as f64 - j as f64).powi(2))
            }
        });
        let (vals, _) = sorted_eigen(&m);
        let r = lanczos_lowest(n, |v| &m * v, None, &LanczosConfig { krylov_dim: 30, ..Default::default() }).unwrap();
        assert!((r.value - vals[0]).abs() < 1e-10);
    }

    #[test]
    fn sorted_eigen_is_ascending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, -1.0]);
        let (v, _) = sorted_eigen(&m);
        assert!((v[0] + 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12 && (v[2] - 3.0).abs() < 1e-12);
    }
}
