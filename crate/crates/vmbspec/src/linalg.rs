//! Small dense helpers on top of faer.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Col, Mat, MatRef};

/// LU factorization of a complex square matrix with a 1-norm condition estimate.
pub struct Lu {
    lu: PartialPivLu<c64>,
    n: usize,
    norm1: f64,
}

impl Lu {
    pub fn new(a: MatRef<'_, c64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        Self { lu: a.partial_piv_lu(), n: a.nrows(), norm1: norm1(a) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        let mut x = to_col(b);
        self.lu.solve_in_place(x.as_mat_mut());
        from_col(&x)
    }

    pub fn solve_adjoint(&self, b: &[c64]) -> Vec<c64> {
        let mut x = to_col(b);
        self.lu.solve_adjoint_in_place(x.as_mat_mut());
        from_col(&x)
    }

    /// Solves for several right-hand sides stored as columns.
    pub fn solve_mat(&self, b: &Mat<c64>) -> Mat<c64> {
        let mut x = b.clone();
        self.lu.solve_in_place(x.as_mut());
        x
    }

    /// Hager-Higham estimate of `||A^{-1}||_1`.
    pub fn inv_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![c64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            let ynorm: f64 = y.iter().map(|v| v.norm()).sum();
            if ynorm <= est {
                break;
            }
            est = ynorm;
            let s: Vec<c64> = y
                .iter()
                .map(|v| if v.norm() > 0.0 { v / v.norm() } else { c64::new(1.0, 0.0) })
                .collect();
            let z = self.solve_adjoint(&s);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, p| if p.1 > acc.1 { p } else { acc });
            if j == last_j || zmax <= z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum::<f64>() {
                break;
            }
            last_j = j;
            x = vec![c64::new(0.0, 0.0); n];
            x[j] = c64::new(1.0, 0.0);
        }
        // alternative lower bound from an oscillating right-hand side
        let alt: Vec<c64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                c64::new(sign * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }

    pub fn cond1_estimate(&self) -> f64 {
        self.norm1 * self.inv_norm1_estimate()
    }
}

pub fn to_col(x: &[c64]) -> Col<c64> {
    Col::from_fn(x.len(), |i| x[i])
}

pub fn from_col(x: &Col<c64>) -> Vec<c64> {
    (0..x.nrows()).map(|i| x[i]).collect()
}

pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let y = a * to_col(x);
    from_col(&y)
}

pub fn matvec_real(a: MatRef<'_, f64>, x: &[c64]) -> Vec<c64> {
    let re = Col::<f64>::from_fn(x.len(), |i| x[i].re);
    let im = Col::<f64>::from_fn(x.len(), |i| x[i].im);
    let yr = a * &re;
    let yi = a * &im;
    (0..a.nrows()).map(|i| c64::new(yr[i], yi[i])).collect()
}

pub fn norm1(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(a: MatRef<'_, c64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `sqrt(||A||_1 ||A||_inf)`, an upper bound for the spectral norm.
pub fn norm2_bound(a: MatRef<'_, c64>) -> f64 {
    (norm1(a) * norm_inf(a)).sqrt()
}

pub fn vnorm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vdot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

/// Complexifies a real matrix.
pub fn complexify(a: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_estimates() {
        let n = 30;
        let a = Mat::<c64>::from_fn(n, n, |i, j| {
            let d = if i == j { 4.0 } else { 0.0 };
            c64::new(d + ((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05)
        });
        let lu = Lu::new(a.as_ref());
        let b: Vec<c64> = (0..n).map(|i| c64::new(i as f64, 1.0)).collect();
        let x = lu.solve(&b);
        let r = matvec(a.as_ref(), &x);
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let inv = {
            let id = Mat::<c64>::identity(n, n);
            lu.solve_mat(&id)
        };
        let exact = norm1(inv.as_ref());
        let est = lu.inv_norm1_estimate();
        assert!(est <= exact * (1.0 + 1e-12) && est >= 0.3 * exact, "{est} vs {exact}");
    }
}
