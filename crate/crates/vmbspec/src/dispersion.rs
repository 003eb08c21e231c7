//! Dispersion functions, Newton continuation and expansion coefficients.
//!
//! All resolvents are evaluated at `xi = s e1`. Since the operators then
//! commute with the reflections of `v_2` and `v_3`, every solve runs in
//! one reflection block of roughly a quarter of the grid size.
//!
//! Low-frequency resolvents:
//!
//! ```text
//! low_two:  R  = (L1 - lambda P_r - i s P_r v1 P_r)^{-1}      on chi_0^perp
//! low_one:  R1 = (L  - lambda P_1 - i s P_1 v1 P_1)^{-1}      on N_0^perp
//! high:          (L_(1) - i s v1 - (i v1 / s) P_d - lambda)^{-1}
//! ```
//!
//! The low-frequency inverses are realized by augmenting with `-P` on the
//! null space, which leaves the complement invariant.

use faer::{c64, Mat};

use crate::collision::{v1_chi, CollisionMatrices, Species};
use crate::error::{Error, Result};
use crate::linalg::{matvec, vnorm, Lu};
use crate::modes::ModeKind;
use crate::parity::ParityBasis;
use crate::velocity::VelocityGrid;

/// Which resolvent a moment is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    LowTwo,
    LowOne,
    HighTwo,
    HighOne,
}

impl Variant {
    fn species(self) -> Species {
        match self {
            Variant::LowTwo | Variant::HighTwo => Species::Two,
            Variant::LowOne | Variant::HighOne => Species::One,
        }
    }
}

/// Largest admissible condition estimate of a resolvent solve.
pub const MAX_CONDITION: f64 = 1e10;

/// Block-reduced resolvent solver.
pub struct Resolvent<'a> {
    cm: &'a CollisionMatrices,
    grid: &'a VelocityGrid,
    basis: &'a ParityBasis,
    v1: Vec<Vec<f64>>,
}

impl<'a> Resolvent<'a> {
    pub fn new(cm: &'a CollisionMatrices, grid: &'a VelocityGrid) -> Result<Self> {
        if cm.dim() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: cm.dim() });
        }
        let basis = cm.mode_basis();
        // v1 is constant on every reflection orbit, hence diagonal in each block
        let v1 = basis
            .sectors
            .iter()
            .map(|sec| sec.cols.iter().map(|col| grid.nodes[col[0].0][0]).collect())
            .collect();
        Ok(Self { cm, grid, basis, v1 })
    }

    pub fn grid(&self) -> &VelocityGrid {
        self.grid
    }

    pub fn collision(&self) -> &CollisionMatrices {
        self.cm
    }

    fn null_in_sector(&self, species: Species, sector: usize) -> Vec<Vec<f64>> {
        self.cm
            .null_basis(species)
            .iter()
            .map(|c| self.basis.gather_real(sector, c))
            .filter(|c| c.iter().any(|&x| x != 0.0))
            .collect()
    }

    /// Block matrix of the shifted operator in `sector`.
    fn block_matrix(&self, variant: Variant, lambda: c64, s: f64, sector: usize) -> Mat<c64> {
        let species = variant.species();
        let l = &self.cm.sector_blocks(species)[sector];
        let d = &self.v1[sector];
        let m = l.nrows();
        let is = c64::new(0.0, s);
        let mut a = Mat::<c64>::from_fn(m, m, |i, j| c64::new(l[(i, j)], 0.0));
        for i in 0..m {
            a[(i, i)] -= lambda + is * d[i];
        }
        match variant {
            Variant::LowTwo | Variant::LowOne => {
                // (lambda - 1) Q Q^T + i s (Q Q^T D + D Q Q^T - Q (Q^T D Q) Q^T)
                let q = self.null_in_sector(species, sector);
                for qk in &q {
                    for ql in &q {
                        let qdq: f64 = qk.iter().zip(ql).zip(d).map(|((x, y), z)| x * y * z).sum();
                        for j in 0..m {
                            for i in 0..m {
                                a[(i, j)] -= is * qk[i] * qdq * ql[j];
                            }
                        }
                    }
                    for j in 0..m {
                        for i in 0..m {
                            let qq = qk[i] * qk[j];
                            a[(i, j)] += (lambda - 1.0) * qq + is * (qq * d[j] + d[i] * qq);
                        }
                    }
                }
            }
            Variant::HighTwo | Variant::HighOne => {
                let c0 = self.basis.gather_real(sector, self.grid.chi_sym(0));
                if c0.iter().any(|&x| x != 0.0) {
                    let f = c64::new(0.0, 1.0 / s);
                    for j in 0..m {
                        for i in 0..m {
                            a[(i, j)] -= f * d[i] * c0[i] * c0[j];
                        }
                    }
                }
            }
        }
        a
    }

    fn project_rhs(&self, variant: Variant, sector: usize, h: &mut [c64]) {
        if matches!(variant, Variant::LowTwo | Variant::LowOne) {
            for q in self.null_in_sector(variant.species(), sector) {
                let c: c64 = h.iter().zip(&q).map(|(a, b)| a * b).sum();
                h.iter_mut().zip(&q).for_each(|(a, b)| *a -= c * b);
            }
        }
    }

    /// Solves the resolvent equation for full-length right-hand sides in
    /// symmetric coordinates; returns the solutions in the same form.
    pub fn solve(&self, variant: Variant, lambda: c64, s: f64, rhs: &[Vec<c64>]) -> Result<Vec<Vec<c64>>> {
        if matches!(variant, Variant::HighTwo | Variant::HighOne) && !(s > 0.0) {
            return Err(Error::Domain("high-frequency resolvent needs s > 0".into()));
        }
        let n = self.grid.len();
        let mut out = vec![vec![c64::new(0.0, 0.0); n]; rhs.len()];
        for sector in 0..self.basis.sectors.len() {
            let parts: Vec<Vec<c64>> = rhs.iter().map(|h| self.basis.gather(sector, h)).collect();
            if parts.iter().all(|p| p.iter().all(|z| z.norm() == 0.0)) {
                continue;
            }
            let a = self.block_matrix(variant, lambda, s, sector);
            let lu = Lu::new(a.as_ref());
            let cond = lu.cond1_estimate();
            if !(cond <= MAX_CONDITION) {
                return Err(Error::NearEigenvalue(cond));
            }
            for (k, mut h) in parts.into_iter().enumerate() {
                self.project_rhs(variant, sector, &mut h);
                let mut x = lu.solve(&h);
                // one step of refinement if the residual is above target
                let r: Vec<c64> = matvec(a.as_ref(), &x).iter().zip(&h).map(|(p, q)| q - p).collect();
                if vnorm(&r) > 1e-12 * vnorm(&h) {
                    let dx = lu.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                }
                self.basis.scatter_add(sector, &x, &mut out[k]);
            }
        }
        Ok(out)
    }

    /// Right-hand side vector of a moment index: `chi_i` for the `low_two`
    /// and high variants, `P_1 (v1 chi_i)` for `low_one`.
    pub fn moment_vector(&self, variant: Variant, i: usize) -> Result<Vec<c64>> {
        if i > 4 {
            return Err(Error::Index(i));
        }
        Ok(match variant {
            Variant::LowOne => {
                let mut h = v1_chi(self.grid, i);
                crate::velocity::project_sym(&mut h, crate::velocity::Projection::P1, self.grid);
                h
            }
            _ => self.grid.chi_sym(i).iter().map(|&x| c64::new(x, 0.0)).collect(),
        })
    }

    /// Moment `(R h_i, h_j)` for the given variant.
    pub fn moment(&self, variant: Variant, lambda: c64, s: f64, i: usize, j: usize) -> Result<c64> {
        let hi = self.moment_vector(variant, i)?;
        let hj = self.moment_vector(variant, j)?;
        let x = self.solve(variant, lambda, s, &[hi])?;
        Ok(x[0].iter().zip(&hj).map(|(a, b)| a * b.conj()).sum())
    }

    /// Several moments sharing the factorizations.
    pub fn moments(&self, variant: Variant, lambda: c64, s: f64, pairs: &[(usize, usize)]) -> Result<Vec<c64>> {
        let mut idx: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        idx.sort_unstable();
        idx.dedup();
        let rhs: Vec<Vec<c64>> = idx.iter().map(|&i| self.moment_vector(variant, i)).collect::<Result<_>>()?;
        let sol = self.solve(variant, lambda, s, &rhs)?;
        pairs
            .iter()
            .map(|&(i, j)| {
                let k = idx.iter().position(|&x| x == i).unwrap();
                let hj = self.moment_vector(variant, j)?;
                Ok(sol[k].iter().zip(&hj).map(|(a, b)| a * b.conj()).sum())
            })
            .collect()
    }

    /// `D_0 = lambda - (1 + s^2) (R chi_1, chi_1)`, two species.
    pub fn d_two_low0(&self, lambda: c64, s: f64) -> Result<c64> {
        let r = self.moment(Variant::LowTwo, lambda, s, 1, 1)?;
        Ok(lambda - (1.0 + s * s) * r)
    }

    /// `D_1 = lambda^2 - (R chi_2, chi_2) lambda + s^2`, two species.
    pub fn d_two_low1(&self, lambda: c64, s: f64) -> Result<c64> {
        let r = self.moment(Variant::LowTwo, lambda, s, 2, 2)?;
        Ok(lambda * lambda - r * lambda + s * s)
    }

    /// Determinant of the 3x3 one-species matrix built from `R_11, R_14, R_41, R_44`.
    pub fn detm_one(&self, lambda: c64, s: f64) -> Result<c64> {
        let r = self.moments(Variant::LowOne, lambda, s, &[(1, 1), (1, 4), (4, 1), (4, 4)])?;
        let (r11, r14, r41, r44) = (r[0], r[1], r[2], r[3]);
        let i = c64::new(0.0, 1.0);
        let s2 = s * s;
        let c = i * s * (2.0f64 / 3.0).sqrt();
        let m22 = lambda - s2 * r11;
        let m33 = lambda - s2 * r44;
        let m23 = c - s2 * r41;
        let m32 = c - s2 * r14;
        // first-row expansion; the (2,1) entry i(s + 1/s) times i s gives -(1 + s^2)
        Ok(lambda * (m22 * m33 - m23 * m32) + (1.0 + s2) * m33)
    }

    /// `lambda^3 - s^2 R_22 lambda^2 + (1 + s^2) lambda - s^4 R_22`, one species.
    pub fn d_one_low(&self, lambda: c64, s: f64) -> Result<c64> {
        let r22 = self.moment(Variant::LowOne, lambda, s, 2, 2)?;
        let s2 = s * s;
        Ok(lambda * lambda * lambda - s2 * r22 * lambda * lambda + (1.0 + s2) * lambda - s2 * s2 * r22)
    }

    /// `lambda^2 - ((B - lambda)^{-1} chi_2, chi_2) lambda + s^2`.
    pub fn d_high(&self, kind: ModeKind, lambda: c64, s: f64) -> Result<c64> {
        let variant = match kind {
            ModeKind::TwoSpecies => Variant::HighTwo,
            ModeKind::OneSpecies => Variant::HighOne,
            ModeKind::Boltzmann => {
                return Err(Error::Domain("high-frequency relation needs a field-coupled species".into()))
            }
        };
        let r = self.moment(variant, lambda, s, 2, 2)?;
        Ok(lambda * lambda - r * lambda + s * s)
    }
}

/// Convenience wrapper: one moment without keeping a solver around.
pub fn resolvent_moment(
    cm: &CollisionMatrices,
    grid: &VelocityGrid,
    variant: Variant,
    lambda: c64,
    s: f64,
    i: usize,
    j: usize,
) -> Result<c64> {
    Resolvent::new(cm, grid)?.moment(variant, lambda, s, i, j)
}

/// Converged Newton root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub lambda: c64,
    pub residual: f64,
    pub iterations: usize,
}

/// Residual target `|D| <= NEWTON_TOL (1 + |lambda|)`.
pub const NEWTON_TOL: f64 = 1e-10;

/// Damped Newton iteration with a central-difference derivative.
///
/// Iterates past the residual target until steps reach rounding level so
/// that roots are accurate to machine precision, not only to the residual
/// tolerance.
pub fn newton_solve<F>(d: F, lambda0: c64, s: f64) -> Result<Root>
where
    F: Fn(c64, f64) -> Result<c64>,
{
    let mut lambda = lambda0;
    let mut f = d(lambda, s)?;
    let tol = |l: c64| NEWTON_TOL * (1.0 + l.norm());
    for it in 1..=50 {
        let mut h = 1e-6 * (1.0 + lambda.norm());
        let df = loop {
            match (d(lambda + h, s), d(lambda - h, s)) {
                (Ok(p), Ok(m)) => break (p - m) / (2.0 * h),
                (Err(Error::NearEigenvalue(_)), _) | (_, Err(Error::NearEigenvalue(_))) if h > 1e-9 => h *= 0.5,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        };
        if df.norm() == 0.0 || !df.norm().is_finite() {
            return Err(Error::NoConvergence { residual: f.norm(), iterations: it });
        }
        let step = -f / df;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = lambda + step * t;
            match d(cand, s) {
                Ok(fc) if fc.norm() < f.norm() => {
                    accepted = Some((cand, fc));
                    break;
                }
                Ok(_) if f.norm() <= tol(lambda) => break,
                Ok(_) | Err(Error::NearEigenvalue(_)) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((cand, fc)) = accepted else {
            if f.norm() <= tol(lambda) {
                return Ok(Root { lambda, residual: f.norm(), iterations: it });
            }
            return Err(Error::NoConvergence { residual: f.norm(), iterations: it });
        };
        let moved = (cand - lambda).norm();
        lambda = cand;
        f = fc;
        if moved <= 4.0 * f64::EPSILON * (1.0 + lambda.norm()) && f.norm() <= tol(lambda) {
            return Ok(Root { lambda, residual: f.norm(), iterations: it });
        }
    }
    if f.norm() <= tol(lambda) {
        Ok(Root { lambda, residual: f.norm(), iterations: 50 })
    } else {
        Err(Error::NoConvergence { residual: f.norm(), iterations: 50 })
    }
}

/// A root traced over increasing `s`.
#[derive(Debug, Clone, Default)]
pub struct DispersionBranch {
    pub label: String,
    pub multiplicity: usize,
    pub s: Vec<f64>,
    pub lambda: Vec<c64>,
    pub residual: Vec<f64>,
    pub converged: Vec<bool>,
    /// A second root reached from the constant predictor, when distinct.
    pub alternate: Vec<Option<c64>>,
    /// False if continuation stopped before the end of the grid.
    pub complete: bool,
}

impl DispersionBranch {
    pub fn converged_points(&self) -> impl Iterator<Item = (f64, c64)> + '_ {
        self.s
            .iter()
            .zip(&self.lambda)
            .zip(&self.converged)
            .filter(|(_, &c)| c)
            .map(|((&s, &l), _)| (s, l))
    }

    pub fn ambiguous(&self) -> bool {
        self.alternate.iter().any(|a| a.is_some())
    }
}

fn extrapolate(s: &[f64], l: &[c64], at: f64) -> c64 {
    let k = s.len();
    match k {
        0 => unreachable!(),
        1 => l[0],
        2 => l[1] + (l[1] - l[0]) * ((at - s[1]) / (s[1] - s[0])),
        _ => {
            let (x0, x1, x2) = (s[k - 3], s[k - 2], s[k - 1]);
            let (y0, y1, y2) = (l[k - 3], l[k - 2], l[k - 1]);
            let b0 = (at - x1) * (at - x2) / ((x0 - x1) * (x0 - x2));
            let b1 = (at - x0) * (at - x2) / ((x1 - x0) * (x1 - x2));
            let b2 = (at - x0) * (at - x1) / ((x2 - x0) * (x2 - x1));
            y0 * b0 + y1 * b1 + y2 * b2
        }
    }
}

/// Continues a root of `d(lambda, s) = 0` over an increasing `s` grid.
pub fn trace_branch<F>(d: F, s_grid: &[f64], seed: c64, label: &str, multiplicity: usize) -> Result<DispersionBranch>
where
    F: Fn(c64, f64) -> Result<c64>,
{
    if s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("s grid must be strictly increasing".into()));
    }
    let mut br = DispersionBranch { label: label.to_string(), multiplicity, complete: true, ..Default::default() };
    let mut cs: Vec<f64> = Vec::new();
    let mut cl: Vec<c64> = Vec::new();
    for (k, &s) in s_grid.iter().enumerate() {
        let pred = if cl.is_empty() { seed } else { extrapolate(&cs, &cl, s) };
        let mut result = newton_solve(&d, pred, s);
        if result.is_err() && !cl.is_empty() {
            // escape a real-axis stall past a collision of two real roots
            let kick = (pred - cl[cl.len() - 1]).norm().max(1e-8);
            result = newton_solve(&d, pred + c64::new(0.0, kick), s);
        }
        match result {
            Ok(root) => {
                let mut alt = None;
                if let Some(&last) = cl.last() {
                    if let Ok(r2) = newton_solve(&d, last, s) {
                        if (r2.lambda - root.lambda).norm() > 10.0 * NEWTON_TOL * (1.0 + root.lambda.norm()) {
                            alt = Some(r2.lambda);
                        }
                    }
                }
                br.s.push(s);
                br.lambda.push(root.lambda);
                br.residual.push(root.residual);
                br.converged.push(true);
                br.alternate.push(alt);
                cs.push(s);
                cl.push(root.lambda);
            }
            Err(e) => {
                if k == 0 {
                    return Err(e);
                }
                let residual = match e {
                    Error::NoConvergence { residual, .. } => residual,
                    _ => f64::NAN,
                };
                br.s.push(s);
                br.lambda.push(pred);
                br.residual.push(residual);
                br.converged.push(false);
                br.alternate.push(None);
                br.complete = false;
                break;
            }
        }
    }
    Ok(br)
}

/// Expansion coefficients of the low-frequency eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCoefficients {
    pub a1_two: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl SpectrumCoefficients {
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("a1_two", self.a1_two),
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a3", self.a3),
            ("b1", self.b1),
            ("b2", self.b2),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
        ]
    }
}

/// `(a_j, b_j)` from `g = (L + i P_1)^{-1} P_1 (v1 chi_j)`:
/// `a = -(L g, g)/2`, `b = (||g||^2 + c)/2`.
fn oscillatory_pair(res: &Resolvent<'_>, j: usize, c: f64) -> Result<(f64, f64)> {
    let h = res.moment_vector(Variant::LowOne, j)?;
    // L - lambda P1 - P0 with lambda = -i is L + i P1 - P0
    let g = res.solve(Variant::LowOne, c64::new(0.0, -1.0), 0.0, &[h])?.remove(0);
    let lg = crate::linalg::matvec_real(res.collision().l.as_ref(), &g);
    let lgg: c64 = lg.iter().zip(&g).map(|(a, b)| a * b.conj()).sum();
    let gg: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    Ok((-0.5 * lgg.re, 0.5 * (gg + c)))
}

/// All expansion coefficients. `a_3` and `a_0` come from the block-reduced
/// complex resolvent at `lambda = s = 0`; the `kappa`s from the real
/// Cholesky path of the collision module, so the identities between them
/// compare two independent solves.
pub fn asymptotic_coefficients(cm: &CollisionMatrices, grid: &VelocityGrid) -> Result<SpectrumCoefficients> {
    let res = Resolvent::new(cm, grid)?;
    let zero = c64::new(0.0, 0.0);
    let r22 = res.moment(Variant::LowTwo, zero, 0.0, 2, 2)?;
    let a1_two = -1.0 / r22.re;
    let one = res.moments(Variant::LowOne, zero, 0.0, &[(2, 2), (4, 4)])?;
    let a3 = -one[0].re;
    let a0 = -one[1].re;
    let (a1, b1) = oscillatory_pair(&res, 1, 5.0 / 3.0)?;
    let (a2, b2) = oscillatory_pair(&res, 2, 1.0)?;
    let tc = crate::collision::transport_coefficients(cm, grid)?;
    let out = SpectrumCoefficients {
        a1_two,
        a0,
        a1,
        a2,
        a3,
        b1,
        b2,
        kappa1: tc.kappa1,
        kappa2: tc.kappa2,
        kappa3: tc.kappa3,
    };
    for (name, v) in out.named() {
        if !(v > 0.0) {
            return Err(Error::Discretization(format!("{name} = {v:.3e} is not positive")));
        }
    }
    Ok(out)
}
