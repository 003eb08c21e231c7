//! Dense spectra of mode operators, targeted eigenpairs, gap scans and
//! cross-validation of dispersion branches.
//!
//! Eigenvalues are computed block by block in the reflection basis of the
//! operator (when it has one) with the Hessenberg/QR solver of `faer`.
//! Numbers that feed acceptance checks go through residual validation.

use faer::{c64, Mat, MatRef};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collision::CollisionMatrices;
use crate::dispersion::DispersionBranch;
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2_bound, vnorm, Lu};
use crate::modes::{assemble_mode, Frame, ModeKind, ModeOperator};
use crate::velocity::VelocityGrid;

/// Default dimension cap for dense eigensolves.
pub const DIM_CAP: usize = 2048;

/// Relative residual bound for validated eigenpairs.
pub const PAIR_TOL: f64 = 1e-8;

/// Eigenpair with its residual `||A v - lambda v|| / ||v||`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: c64,
    pub vector: Vec<c64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub s: f64,
    pub frame: Frame,
    pub eigenvalues: Vec<c64>,
    /// Block of each eigenvalue in the operator's reflection basis.
    pub block_of: Vec<usize>,
    pub rightmost: c64,
    /// Upper bound for `||A||_2`, the scale of all residuals.
    pub norm_bound: f64,
    pub validated: Vec<EigenPair>,
}

impl SpectrumReport {
    /// Eigenvalues with `Re lambda > cut`.
    pub fn right_of(&self, cut: f64) -> Vec<c64> {
        self.eigenvalues.iter().copied().filter(|z| z.re > cut).collect()
    }

    pub fn nearest(&self, target: c64) -> Option<c64> {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
    }
}

/// All eigenvalues of a dense complex matrix.
pub fn dense_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension { expected: a.nrows(), got: a.ncols() });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.to_owned()
        .eigenvalues()
        .map_err(|e| Error::Solver(format!("dense eigensolver failed on {}x{}: {e:?}", a.nrows(), a.ncols())))
}

fn normalize(x: &mut [c64]) -> f64 {
    let n = vnorm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|z| *z /= n);
    }
    n
}

/// Shifted inverse iteration for one eigenvalue of `a`.
fn inverse_iteration(a: MatRef<'_, c64>, lambda: c64, rng: &mut ChaCha8Rng) -> Vec<c64> {
    let m = a.nrows();
    let scale = 1.0 + lambda.norm();
    let shifted = |mu: c64| Mat::<c64>::from_fn(m, m, |i, j| if i == j { a[(i, j)] - mu } else { a[(i, j)] });
    let mut mu = lambda;
    let mut lu = Lu::new(shifted(mu).as_ref());
    let mut x: Vec<c64> = (0..m).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    normalize(&mut x);
    for _ in 0..4 {
        let mut y = lu.solve(&x);
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            mu = lambda + c64::new(1e-10, 1e-10) * scale;
            lu = Lu::new(shifted(mu).as_ref());
            continue;
        }
        normalize(&mut y);
        x = y;
    }
    x
}

fn residual(a: MatRef<'_, c64>, lambda: c64, x: &[c64]) -> f64 {
    let ax = matvec(a, x);
    let r: Vec<c64> = ax.iter().zip(x).map(|(p, q)| p - lambda * q).collect();
    vnorm(&r) / vnorm(x)
}

fn lift(op: &ModeOperator, block: usize, y: &[c64]) -> Vec<c64> {
    match op.parity_basis() {
        Some(b) => b.scatter(block, y),
        None => y.to_vec(),
    }
}

/// Full spectrum with `n_validate` eigenpairs checked by inverse iteration.
pub fn eig_all_with(op: &ModeOperator, cap: usize, n_validate: usize, seed: u64) -> Result<SpectrumReport> {
    if op.dim() > cap {
        return Err(Error::Domain(format!("operator dimension {} exceeds cap {cap}", op.dim())));
    }
    let blocks = op.blocks();
    let per_block: Vec<Vec<c64>> =
        blocks.par_iter().map(|b| dense_eigenvalues(b.as_ref())).collect::<Result<_>>()?;
    let mut eigenvalues = Vec::with_capacity(op.dim());
    let mut block_of = Vec::with_capacity(op.dim());
    for (k, ev) in per_block.iter().enumerate() {
        eigenvalues.extend_from_slice(ev);
        block_of.extend(std::iter::repeat_n(k, ev.len()));
    }
    let rightmost = *eigenvalues
        .iter()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::Solver("empty spectrum".into()))?;
    let norm_bound = norm2_bound(op.matrix.as_ref());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = n_validate.min(eigenvalues.len());
    let picks = sample(&mut rng, eigenvalues.len(), count).into_vec();
    let mut validated = Vec::with_capacity(count);
    for idx in picks {
        let (lambda, blk) = (eigenvalues[idx], block_of[idx]);
        let y = inverse_iteration(blocks[blk].as_ref(), lambda, &mut rng);
        let v = lift(op, blk, &y);
        let res = residual(op.matrix.as_ref(), lambda, &v);
        if !(res <= PAIR_TOL * norm_bound) {
            return Err(Error::Solver(format!(
                "eigenpair at {lambda:.6e} fails validation: residual {res:.3e} vs ||A|| <= {norm_bound:.3e}"
            )));
        }
        validated.push(EigenPair { lambda, vector: v, residual: res });
    }
    Ok(SpectrumReport { s: op.s, frame: op.frame, eigenvalues, block_of, rightmost, norm_bound, validated })
}

/// Every eigenvalue with the residual of its computed eigenvector on the
/// full matrix, in the same order as `eig_all`.
pub fn eig_all_residuals(op: &ModeOperator) -> Result<Vec<(c64, f64)>> {
    if op.dim() > DIM_CAP {
        return Err(Error::Domain(format!("operator dimension {} exceeds cap {DIM_CAP}", op.dim())));
    }
    let blocks = op.blocks();
    let per_block: Vec<Vec<(c64, f64)>> = blocks
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            if b.nrows() == 0 {
                return Ok(Vec::new());
            }
            let eig = b.eigen().map_err(|e| Error::Solver(format!("dense eigensolver failed: {e:?}")))?;
            let (u, sv) = (eig.U(), eig.S().column_vector());
            Ok((0..b.nrows())
                .map(|c| {
                    let y: Vec<c64> = (0..b.nrows()).map(|r| u[(r, c)]).collect();
                    let v = lift(op, k, &y);
                    (sv[c], residual(op.matrix.as_ref(), sv[c], &v))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_block.into_iter().flatten().collect())
}

/// Full spectrum with ten validated pairs.
pub fn eig_all(op: &ModeOperator) -> Result<SpectrumReport> {
    eig_all_with(op, DIM_CAP, 10, 0)
}

/// Orthonormalizes the columns in place (Gram-Schmidt, applied twice).
fn orthonormalize(q: &mut [Vec<c64>]) {
    for j in 0..q.len() {
        for _ in 0..2 {
            for i in 0..j {
                let d: c64 = q[j].iter().zip(&q[i]).map(|(a, b)| b.conj() * a).sum();
                let qi = q[i].clone();
                q[j].iter_mut().zip(&qi).for_each(|(a, b)| *a -= d * b);
            }
        }
        normalize(&mut q[j]);
    }
}

/// Subspace inverse iteration with Rayleigh-Ritz on one block.
fn block_near(a: MatRef<'_, c64>, target: c64, k: usize, seed: u64) -> Result<Vec<(c64, Vec<c64>)>> {
    let m = a.nrows();
    let p = (k + 2).min(m);
    let scale = norm2_bound(a).max(1.0);
    let shifted = |mu: c64| Mat::<c64>::from_fn(m, m, |i, j| if i == j { a[(i, j)] - mu } else { a[(i, j)] });
    let mut lu = Lu::new(shifted(target).as_ref());
    if !(lu.cond1_estimate() < 1e14) {
        let mu = target * (1.0 + 1e-8) + c64::new(1e-8, 1e-8);
        lu = Lu::new(shifted(mu).as_ref());
        if !(lu.cond1_estimate() < 1e14) {
            return Err(Error::NearEigenvalue(lu.cond1_estimate()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<c64>> = (0..p)
        .map(|_| (0..m).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
        .collect();
    orthonormalize(&mut q);
    let mut pairs = Vec::new();
    for _ in 0..60 {
        q = q.iter().map(|x| lu.solve(x)).collect();
        orthonormalize(&mut q);
        let aq: Vec<Vec<c64>> = q.iter().map(|x| matvec(a, x)).collect();
        let h = Mat::<c64>::from_fn(p, p, |i, j| q[i].iter().zip(&aq[j]).map(|(x, y)| x.conj() * y).sum());
        let eig = h.eigen().map_err(|e| Error::Solver(format!("Ritz eigensolve failed: {e:?}")))?;
        let (u, s) = (eig.U(), eig.S().column_vector());
        pairs = (0..p)
            .map(|c| {
                let mut x = vec![c64::new(0.0, 0.0); m];
                for (r, qr) in q.iter().enumerate() {
                    x.iter_mut().zip(qr).for_each(|(a, b)| *a += u[(r, c)] * b);
                }
                normalize(&mut x);
                (s[c], x)
            })
            .collect::<Vec<_>>();
        pairs.sort_by(|x, y| (x.0 - target).norm().total_cmp(&(y.0 - target).norm()));
        let done = pairs.iter().take(k).all(|(l, x)| residual(a, *l, x) <= 1e-11 * scale);
        if done {
            break;
        }
    }
    Ok(pairs)
}

/// The `k` eigenpairs nearest `target`.
pub fn eig_near(op: &ModeOperator, target: c64, k: usize) -> Result<Vec<EigenPair>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let blocks = op.blocks();
    let found: Vec<Vec<(usize, c64, Vec<c64>)>> = blocks
        .par_iter()
        .enumerate()
        .map(|(b, a)| {
            let kb = k.min(a.nrows());
            Ok(block_near(a.as_ref(), target, kb, b as u64)?.into_iter().map(|(l, x)| (b, l, x)).collect())
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<(usize, c64, Vec<c64>)> = found.into_iter().flatten().collect();
    all.sort_by(|x, y| (x.1 - target).norm().total_cmp(&(y.1 - target).norm()));
    let norm = norm2_bound(op.matrix.as_ref());
    all.into_iter()
        .take(k)
        .map(|(b, lambda, y)| {
            let v = lift(op, b, &y);
            let res = residual(op.matrix.as_ref(), lambda, &v);
            if res <= PAIR_TOL * norm {
                Ok(EigenPair { lambda, vector: v, residual: res })
            } else {
                Err(Error::NoConvergence { residual: res, iterations: 60 })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapScan {
    /// `(s, max Re lambda)` per level.
    pub rows: Vec<(f64, f64)>,
    /// `-max_s max Re lambda`; positive when a uniform gap is observed.
    pub alpha_emp: f64,
}

/// Rightmost real part of the spectrum for each `s` in the canonical frame.
pub fn gap_scan(kind: ModeKind, s_list: &[f64], cm: &CollisionMatrices, grid: &VelocityGrid) -> Result<GapScan> {
    let rows: Vec<(f64, f64)> = s_list
        .par_iter()
        .map(|&s| {
            let op = assemble_mode(kind, s, Frame::canonical(), cm, grid)?;
            Ok((s, eig_all(&op)?.rightmost.re))
        })
        .collect::<Result<_>>()?;
    let alpha_emp = -rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(GapScan { rows, alpha_emp })
}

/// Largest distance from a converged branch point to the nearest
/// eigenvalue of the operator assembled at the same `s`.
pub fn crossvalidate<F>(branch: &DispersionBranch, op_at: F) -> Result<f64>
where
    F: Fn(f64) -> Result<ModeOperator> + Sync,
{
    let pts: Vec<(f64, c64)> = branch.converged_points().collect();
    if pts.is_empty() {
        return Err(Error::Domain(format!("branch '{}' has no converged points", branch.label)));
    }
    let d: Vec<f64> = pts
        .par_iter()
        .map(|&(s, lambda)| {
            let op = op_at(s)?;
            let mut best = f64::INFINITY;
            for b in op.blocks() {
                for z in dense_eigenvalues(b.as_ref())? {
                    best = best.min((z - lambda).norm());
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Multiset distance between two spectra: the largest distance from a
/// value in either list to the nearest value in the other.
pub fn spectral_distance(a: &[c64], b: &[c64]) -> f64 {
    let one = |x: &[c64], y: &[c64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{g6_eigenvalues_closed, g6_matrix};

    #[test]
    fn g6_spectrum_matches_closed_form() {
        for s in [0.1, 0.5, 1.0] {
            let ev = dense_eigenvalues(g6_matrix(s).as_ref()).unwrap();
            assert!(spectral_distance(&ev, &g6_eigenvalues_closed(s)) < 1e-10);
        }
    }
}
