//! Hard-sphere linearized collision operators.
//!
//! `L = K - nu` and `L1 = K1 - nu` with
//!
//! ```text
//! nu(v)     = int int |(v - v*).w| M(v*) dw dv*
//! k1(v, w)  = 2/sqrt(2 pi) |v-w|^{-1} exp(-|v-w|^2/8 - (|v|^2-|w|^2)^2 / (8|v-w|^2))
//! k(v, w)   = 2 k1(v, w) - (2 pi)^{-1/2} |v-w| exp(-(|v|^2+|w|^2)/4)
//! ```
//!
//! The two gain terms of `K` coincide for hard spheres, so `K` carries
//! `2 k1` while `K1` carries a single copy.
//!
//! Matrices are stored in symmetric coordinates. The integrable diagonal
//! singularity of `k1` is replaced by a per-node diagonal entry calibrated
//! against the collision invariants, after which the null spaces are
//! enforced exactly by projection.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use faer::linalg::solvers::{Llt, Solve};
use faer::{c64, Mat, MatRef, Side};
use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::parity::ParityBasis;
use crate::velocity::{norm2, GridFunction, VelocityGrid};

/// Which collision operator: `L1` (two species, null space `chi_0`) or `L`
/// (one species, null space `chi_0..chi_4`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Two,
    One,
}

impl Species {
    pub fn null_dim(self) -> usize {
        match self {
            Species::Two => 1,
            Species::One => 5,
        }
    }
}

fn legendre64() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(64).unwrap()).as_node_weight_pairs().to_vec()
    })
}

fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    legendre64().iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Collision frequency `nu(v) = 2 pi int |v - v*| M(v*) dv*`.
///
/// The sphere average of `|v - v*|` over `|v*| = r` is `a + r^2/(3a)` for
/// `r < a = |v|` and `r + a^2/(3r)` otherwise, leaving a radial integral.
pub fn collision_frequency(v: [f64; 3]) -> f64 {
    let a = norm2(v).sqrt();
    let g = |r: f64| (-0.5 * r * r).exp();
    let inner = if a > 0.0 { integrate(0.0, a, |r| r * r * g(r) * (a + r * r / (3.0 * a))) } else { 0.0 };
    let outer = integrate(a, a + 14.0, |r| g(r) * (r * r * r + a * a * r / 3.0));
    2.0 * PI * (2.0 / PI).sqrt() * (inner + outer)
}

#[inline]
fn k1_unchecked(v: [f64; 3], w: [f64; 3]) -> f64 {
    let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
    let r2 = norm2(d);
    let e = norm2(v) - norm2(w);
    2.0 / (2.0 * PI).sqrt() / r2.sqrt() * (-r2 / 8.0 - e * e / (8.0 * r2)).exp()
}

#[inline]
fn loss_unchecked(v: [f64; 3], w: [f64; 3]) -> f64 {
    let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
    (2.0 * PI).powf(-0.5) * norm2(d).sqrt() * (-(norm2(v) + norm2(w)) / 4.0).exp()
}

/// Gain kernel of `K1`.
pub fn kernel_k1(v: [f64; 3], w: [f64; 3]) -> Result<f64> {
    if v == w {
        return Err(Error::DiagonalSingularity);
    }
    Ok(k1_unchecked(v, w))
}

/// Kernel of `K`: two gain copies minus the loss part.
pub fn kernel_k(v: [f64; 3], w: [f64; 3]) -> Result<f64> {
    if v == w {
        return Err(Error::DiagonalSingularity);
    }
    Ok(2.0 * k1_unchecked(v, w) - loss_unchecked(v, w))
}

/// Assembled operators in symmetric coordinates.
pub struct CollisionMatrices {
    pub n_per_axis: usize,
    pub nu: Vec<f64>,
    /// `L`, projected so that its null space is exactly `span{chi_0..chi_4}`.
    pub l: Mat<f64>,
    /// `L1`, projected so that its null space is exactly `span{chi_0}`.
    pub l1: Mat<f64>,
    /// Spectral gap of `L` on the complement of its null space.
    pub mu_h: f64,
    pub mu_h1: f64,
    pub norm_l: f64,
    pub norm_l1: f64,
    /// `max_j ||L_raw chi_j|| / ||L||` before projection.
    pub raw_leakage: f64,
    pub raw_leakage1: f64,
    chi: [Vec<f64>; 5],
    chol: Llt<f64>,
    chol1: Llt<f64>,
    cond: f64,
    cond1: f64,
    mode_basis: ParityBasis,
    sectors: OnceLock<Vec<Mat<f64>>>,
    sectors1: OnceLock<Vec<Mat<f64>>>,
}

impl std::fmt::Debug for CollisionMatrices {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionMatrices")
            .field("n_per_axis", &self.n_per_axis)
            .field("mu_h", &self.mu_h)
            .field("mu_h1", &self.mu_h1)
            .field("norm_l", &self.norm_l)
            .field("raw_leakage", &self.raw_leakage)
            .finish_non_exhaustive()
    }
}

struct Calibrated {
    l: Mat<f64>,
    leakage: f64,
}

/// Adds the calibrated diagonal and subtracts `nu`, then projects out the
/// null space `q`. The diagonal is the least-squares fit of
/// `(K chi_j)(v_a) = nu(v_a) chi_j(v_a)` over the columns of `q`.
fn calibrate_and_project(mut k: Mat<f64>, nu: &[f64], q: &[&[f64]]) -> Calibrated {
    let n = nu.len();
    let kq: Vec<Vec<f64>> = q.iter().map(|c| matvec(k.as_ref(), c)).collect();
    for a in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, s) in q.iter().zip(&kq) {
            let t = nu[a] * c[a] - s[a];
            num += t * c[a];
            den += c[a] * c[a];
        }
        k[(a, a)] = num / den - nu[a];
    }
    let mut leak = 0.0f64;
    let lq: Vec<Vec<f64>> = q.iter().map(|c| matvec(k.as_ref(), c)).collect();
    for v in &lq {
        leak = leak.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    // L <- P L P with P = I - Q Q^T
    let m = q.len();
    let mut qlq = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            qlq[i][j] = q[i].iter().zip(&lq[j]).map(|(x, y)| x * y).sum();
        }
    }
    for j in 0..n {
        for i in 0..n {
            let mut corr = 0.0;
            for s in 0..m {
                corr += q[s][i] * lq[s][j] + lq[s][i] * q[s][j];
                for t in 0..m {
                    corr -= q[s][i] * qlq[s][t] * q[t][j];
                }
            }
            k[(i, j)] -= corr;
        }
    }
    for j in 0..n {
        for i in 0..j {
            let s = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    Calibrated { l: k, leakage: leak }
}

fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut y = vec![0.0; n];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += a[(i, j)] * xj;
            }
        }
    }
    y
}

/// Returns (mu, ||L||): the gap on the complement of span(q) and the norm.
fn gap_and_norm(l: &Mat<f64>, q: &[&[f64]], basis: &ParityBasis) -> Result<(f64, f64)> {
    let n = l.nrows();
    let bound = (0..n).map(|i| (0..n).map(|j| l[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let sigma = 2.0 * bound + 1.0;
    let mut shifted = l.clone();
    for c in q {
        for j in 0..n {
            for i in 0..n {
                shifted[(i, j)] -= sigma * c[i] * c[j];
            }
        }
    }
    let mut eigs = Vec::with_capacity(n);
    for s in 0..basis.sectors.len() {
        let block = basis.restrict_real(s, shifted.as_ref());
        let ev = block
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        eigs.extend(ev);
    }
    eigs.sort_by(|a, b| a.total_cmp(b));
    let m = q.len();
    let top = *eigs.last().unwrap();
    let norm = -eigs[m];
    Ok((-top, norm))
}

/// Assembles `L` and `L1` on the grid.
pub fn assemble(grid: &VelocityGrid) -> Result<CollisionMatrices> {
    let n = grid.len();
    let nodes = &grid.nodes;
    let sw = grid.sqrt_weights();
    let nu: Vec<f64> = nodes.par_iter().map(|&v| collision_frequency(v)).collect();

    // column-major buffers, one column per rayon task
    let mut gain = vec![0.0; n * n];
    let mut loss = vec![0.0; n * n];
    gain.par_chunks_mut(n).zip(loss.par_chunks_mut(n)).enumerate().for_each(|(b, (gc, lc))| {
        let w = nodes[b];
        for a in 0..n {
            if a != b {
                let s = sw[a] * sw[b];
                gc[a] = s * k1_unchecked(nodes[a], w);
                lc[a] = s * loss_unchecked(nodes[a], w);
            }
        }
    });
    let g = MatRef::from_column_major_slice(&gain, n, n);
    let lo = MatRef::from_column_major_slice(&loss, n, n);
    let k = Mat::from_fn(n, n, |i, j| 2.0 * g[(i, j)] - lo[(i, j)]);
    let k1 = g.to_owned();
    drop(gain);
    drop(loss);

    let chi: [Vec<f64>; 5] = std::array::from_fn(|j| grid.chi_sym(j).to_vec());
    let q5: Vec<&[f64]> = chi.iter().map(|c| c.as_slice()).collect();
    let q1 = vec![chi[0].as_slice()];

    let cal = calibrate_and_project(k, &nu, &q5);
    let cal1 = calibrate_and_project(k1, &nu, &q1);

    let basis = ParityBasis::collision(grid);
    let (mu_h, norm_l) = gap_and_norm(&cal.l, &q5, &basis)?;
    let (mu_h1, norm_l1) = gap_and_norm(&cal1.l, &q1, &basis)?;
    if mu_h <= 0.0 {
        return Err(Error::Assembly(format!("coercivity of L violated: mu_h = {mu_h:.3e}")));
    }
    if mu_h1 <= 0.0 {
        return Err(Error::Assembly(format!("coercivity of L1 violated: mu_h = {mu_h1:.3e}")));
    }

    let chol = spd_factor(&cal.l, &q5)?;
    let chol1 = spd_factor(&cal1.l, &q1)?;
    let cond = norm_l.max(1.0) / mu_h.min(1.0);
    let cond1 = norm_l1.max(1.0) / mu_h1.min(1.0);

    Ok(CollisionMatrices {
        n_per_axis: grid.n_per_axis,
        nu,
        raw_leakage: cal.leakage / norm_l,
        raw_leakage1: cal1.leakage / norm_l1,
        l: cal.l,
        l1: cal1.l,
        mu_h,
        mu_h1,
        norm_l,
        norm_l1,
        chi,
        chol,
        chol1,
        cond,
        cond1,
        mode_basis: ParityBasis::mode(grid, false),
        sectors: OnceLock::new(),
        sectors1: OnceLock::new(),
    })
}

/// Cholesky factor of `-L + Q Q^T`, positive definite when `L` is coercive.
fn spd_factor(l: &Mat<f64>, q: &[&[f64]]) -> Result<Llt<f64>> {
    let n = l.nrows();
    let a = Mat::from_fn(n, n, |i, j| -l[(i, j)] + q.iter().map(|c| c[i] * c[j]).sum::<f64>());
    a.llt(Side::Lower).map_err(|e| Error::Assembly(format!("pseudo-inverse factorization failed: {e:?}")))
}

impl CollisionMatrices {
    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    /// The projected operator for a species.
    pub fn op(&self, species: Species) -> &Mat<f64> {
        match species {
            Species::Two => &self.l1,
            Species::One => &self.l,
        }
    }

    /// `K = L + diag(nu)` (resp. `K1`), symmetric coordinates.
    pub fn k_matrix(&self, species: Species) -> Mat<f64> {
        let mut k = self.op(species).clone();
        for (a, &v) in self.nu.iter().enumerate() {
            k[(a, a)] += v;
        }
        k
    }

    pub fn gap(&self, species: Species) -> f64 {
        match species {
            Species::Two => self.mu_h1,
            Species::One => self.mu_h,
        }
    }

    pub fn norm(&self, species: Species) -> f64 {
        match species {
            Species::Two => self.norm_l1,
            Species::One => self.norm_l,
        }
    }

    /// Null-space basis in symmetric coordinates.
    pub fn null_basis(&self, species: Species) -> &[Vec<f64>] {
        &self.chi[..species.null_dim()]
    }

    /// Applies `L` (or `L1`) to node values.
    pub fn apply(&self, species: Species, f: &GridFunction, grid: &VelocityGrid) -> Result<GridFunction> {
        let y = grid.to_sym(f)?;
        Ok(grid.from_sym(&crate::linalg::matvec_real(self.op(species).as_ref(), &y)))
    }

    /// Blocks of the operator in the `(v_2, v_3)` reflection basis.
    pub fn sector_blocks(&self, species: Species) -> &[Mat<f64>] {
        let (cell, l) = match species {
            Species::Two => (&self.sectors1, &self.l1),
            Species::One => (&self.sectors, &self.l),
        };
        cell.get_or_init(|| {
            (0..self.mode_basis.sectors.len())
                .map(|s| self.mode_basis.restrict_real(s, l.as_ref()))
                .collect()
        })
    }

    /// Reflection basis matching [`CollisionMatrices::sector_blocks`].
    pub fn mode_basis(&self) -> &ParityBasis {
        &self.mode_basis
    }

    /// Solves `L x = P rhs` with `x` orthogonal to the null space, in
    /// symmetric coordinates. `P` is the complementary projection.
    pub fn solve_sym(&self, species: Species, rhs: &[c64]) -> Result<Vec<c64>> {
        let cond = match species {
            Species::Two => self.cond1,
            Species::One => self.cond,
        };
        if cond > 1e12 {
            return Err(Error::Conditioning(cond));
        }
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::Dimension { expected: n, got: rhs.len() });
        }
        let q = self.null_basis(species);
        let mut p = rhs.to_vec();
        for c in q {
            let d: c64 = p.iter().zip(c).map(|(x, y)| x * y).sum();
            p.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
        }
        // (-L + QQ^T) x = -P rhs forces Q^T x = 0 and L x = P rhs
        let chol = match species {
            Species::Two => &self.chol1,
            Species::One => &self.chol,
        };
        let mut b = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { -p[i].re } else { -p[i].im });
        chol.solve_in_place(b.as_mut());
        Ok((0..n).map(|i| c64::new(b[(i, 0)], b[(i, 1)])).collect())
    }
}

/// `L^{-1} P rhs` (resp. `L1^{-1} P_r rhs`) on node values.
pub fn solve_l_inverse(
    rhs: &GridFunction,
    species: Species,
    cm: &CollisionMatrices,
    grid: &VelocityGrid,
) -> Result<GridFunction> {
    let y = grid.to_sym(rhs)?;
    let x = cm.solve_sym(species, &y)?;
    Ok(grid.from_sym(&x))
}

/// Transport coefficients `kappa_1, kappa_2, kappa_3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCoefficients {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

/// `v_1 chi_j` in symmetric coordinates.
pub(crate) fn v1_chi(grid: &VelocityGrid, j: usize) -> Vec<c64> {
    grid.nodes
        .iter()
        .zip(grid.chi_sym(j))
        .map(|(v, &c)| c64::new(v[0] * c, 0.0))
        .collect()
}

fn real_moment(x: &[c64], g: &[c64]) -> f64 {
    x.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<c64>().re
}

/// `kappa_1 = -(L^{-1} P1 (v1 chi_2), v1 chi_2)`,
/// `kappa_2 = -(L^{-1} P1 (v1 chi_4), v1 chi_4)`,
/// `kappa_3 = -(L1^{-1} chi_1, chi_1)`.
pub fn transport_coefficients(cm: &CollisionMatrices, grid: &VelocityGrid) -> Result<TransportCoefficients> {
    let h2 = v1_chi(grid, 2);
    let h4 = v1_chi(grid, 4);
    let c1: Vec<c64> = grid.chi_sym(1).iter().map(|&x| c64::new(x, 0.0)).collect();
    let kappa1 = -real_moment(&cm.solve_sym(Species::One, &h2)?, &h2);
    let kappa2 = -real_moment(&cm.solve_sym(Species::One, &h4)?, &h4);
    let kappa3 = -real_moment(&cm.solve_sym(Species::Two, &c1)?, &c1);
    for (name, k) in [("kappa1", kappa1), ("kappa2", kappa2), ("kappa3", kappa3)] {
        if !(k > 0.0) {
            return Err(Error::Discretization(format!("{name} = {k:.3e} is not positive")));
        }
    }
    Ok(TransportCoefficients { kappa1, kappa2, kappa3 })
}
