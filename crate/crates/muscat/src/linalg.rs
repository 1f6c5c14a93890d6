//! Dense complex linear algebra.
//!
//! The coupling systems here are dense, complex, and moderate in size
//! (3M×3M with M up to a few thousand), so the direct backend is a
//! row-parallel partial-pivot LU with a Hager-style 1-norm condition
//! estimate. Larger systems go through a restarted GMRES that only needs a
//! matrix-free [`LinearOperator`]. Both paths are deterministic regardless
//! of the rayon thread count: every reduction runs in a fixed order.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinAlgError {
    #[error("matrix is singular to working precision (zero pivot at column {0})")]
    Singular(usize),
    #[error("matrix is ill-conditioned: 1-norm condition estimate {estimate:.3e} exceeds {limit:.1e}")]
    IllConditioned { estimate: f64, limit: f64 },
    #[error("iterative solver stalled: relative residual {residual:.3e} after {iterations} iterations (tolerance {tolerance:.1e})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },
    #[error("dimension mismatch: operator dim {expected}, vector dim {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Maximum column sum of absolute values.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                sums[j] += v.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        self.data
            .par_chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Packed LU factors of PA with the row permutation.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    data: Vec<Complex64>,
    /// perm[i] is the original row stored at position i.
    perm: Vec<usize>,
}

/// Partial-pivot LU; the trailing update is parallel over rows, which keeps
/// the factorization deterministic.
pub fn lu_factor(mut m: DenseMatrix) -> Result<LuFactors, LinAlgError> {
    let n = m.n;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // Pivot search down column k.
        let mut pivot_row = k;
        let mut pivot_mag = m.get(k, k).norm();
        for i in (k + 1)..n {
            let mag = m.get(i, k).norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if pivot_mag == 0.0 {
            return Err(LinAlgError::Singular(k));
        }
        if pivot_row != k {
            perm.swap(k, pivot_row);
            let (lo, hi) = m.data.split_at_mut(pivot_row * n);
            lo[k * n..(k + 1) * n].swap_with_slice(&mut hi[..n]);
        }

        let inv_pivot = Complex64::new(1.0, 0.0) / m.get(k, k);
        let (head, tail) = m.data.split_at_mut((k + 1) * n);
        let pivot_row_data = &head[k * n..(k + 1) * n];
        tail.par_chunks_mut(n).for_each(|row| {
            let factor = row[k] * inv_pivot;
            row[k] = factor;
            for j in (k + 1)..n {
                row[j] -= factor * pivot_row_data[j];
            }
        });
    }
    Ok(LuFactors {
        n,
        data: m.data,
        perm,
    })
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        // Apply the permutation, then L (unit lower) forward, then U back.
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = x[i];
            for j in 0..i {
                acc -= row[j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        x
    }

    /// Solves Aᴴ x = b (needed by the condition estimator).
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        // A = P⁻¹ L U, so Aᴴ = Uᴴ Lᴴ P and x = P⁻¹ t with Lᴴ t = w, Uᴴ w = b.
        let mut w = b.to_vec();
        for i in 0..n {
            let mut acc = w[i];
            for j in 0..i {
                acc -= self.data[j * n + i].conj() * w[j];
            }
            w[i] = acc / self.data[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut acc = w[i];
            for j in (i + 1)..n {
                acc -= self.data[j * n + i].conj() * w[j];
            }
            w[i] = acc;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Hager-style estimate of ‖A⁻¹‖₁ via a few solves with A and Aᴴ.
    pub fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.n;
        let mut b = vec![Complex64::from(1.0 / n as f64); n];
        let mut best = 0.0_f64;
        let mut last_index = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&b);
            let est: f64 = y.iter().map(|v| v.norm()).sum();
            best = best.max(est);
            let xi: Vec<Complex64> = y
                .iter()
                .map(|v| {
                    if v.norm() == 0.0 {
                        Complex64::from(1.0)
                    } else {
                        v / v.norm()
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            if j == last_index || zmax <= est / n as f64 {
                break;
            }
            last_index = j;
            b = vec![Complex64::new(0.0, 0.0); n];
            b[j] = Complex64::from(1.0);
        }
        best
    }
}

/// Matrix-free operator contract for the iterative backend.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// y = A x.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.copy_from_slice(&self.mul_vec(x));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iters: usize,
    /// Relative residual target ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iters: 2000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot_c(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted GMRES with modified Gram-Schmidt and complex Givens rotations.
/// Starts from x₀ = 0.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[Complex64],
    cfg: &GmresConfig,
) -> Result<(Vec<Complex64>, GmresStats), LinAlgError> {
    let n = op.dim();
    if b.len() != n {
        return Err(LinAlgError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let b_norm = norm2(b);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if b_norm == 0.0 {
        return Ok((
            x,
            GmresStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }

    let m = cfg.restart.max(1);
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    let mut total_iters = 0usize;
    let mut residual = f64::INFINITY;

    while total_iters < cfg.max_iters {
        op.apply(&x, &mut ax);
        let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        residual = beta / b_norm;
        if residual <= cfg.tol {
            return Ok((
                x,
                GmresStats {
                    iterations: total_iters,
                    residual,
                },
            ));
        }

        for v in r.iter_mut() {
            *v /= beta;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r];
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![0.0_f64; m];
        let mut sn = vec![Complex64::new(0.0, 0.0); m];
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::from(beta);
        let mut k_done = 0usize;

        for k in 0..m {
            total_iters += 1;
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            op.apply(&basis[k], &mut w);
            for j in 0..=k {
                let hjk = dot_c(&basis[j], &w);
                h[j][k] = hjk;
                for (wi, vj) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vj;
                }
            }
            let wnorm = norm2(&w);
            h[k + 1][k] = Complex64::from(wnorm);
            if wnorm > 0.0 {
                for wi in w.iter_mut() {
                    *wi /= wnorm;
                }
            }
            basis.push(w);

            // Apply the accumulated rotations, then create a new one.
            for j in 0..k {
                let tmp = Complex64::from(cs[j]) * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] =
                    -sn[j].conj() * h[j][k] + Complex64::from(cs[j]) * h[j + 1][k];
                h[j][k] = tmp;
            }
            let (c, s) = complex_givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = Complex64::from(c) * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = Complex64::new(0.0, 0.0);
            let tmp = Complex64::from(c) * g[k] + s * g[k + 1];
            g[k + 1] = -s.conj() * g[k] + Complex64::from(c) * g[k + 1];
            g[k] = tmp;

            k_done = k + 1;
            residual = g[k_done].norm() / b_norm;
            if residual <= cfg.tol || total_iters >= cfg.max_iters {
                break;
            }
        }

        // Back-substitute the small triangular system and update x.
        let mut y = vec![Complex64::new(0.0, 0.0); k_done];
        for i in (0..k_done).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_done {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vj) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vj;
            }
        }

        if residual <= cfg.tol {
            // Recompute the true residual after the update for the caller.
            op.apply(&x, &mut ax);
            let true_res: f64 =
                norm2(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()) / b_norm;
            return Ok((
                x,
                GmresStats {
                    iterations: total_iters,
                    residual: true_res,
                },
            ));
        }
    }

    Err(LinAlgError::NoConvergence {
        residual,
        iterations: total_iters,
        tolerance: cfg.tol,
    })
}

/// Complex Givens rotation: returns (c, s) with c real such that
/// [c, s; -conj(s), c]·[a; b] = [r; 0].
fn complex_givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let t = (an * an + bn * bn).sqrt();
    let c = an / t;
    let s = (a / an) * b.conj() / t;
    (c, s)
}
