//! Block reduction by coordinate reflections.
//!
//! The tensor grid is invariant under `v_k -> -v_k`. Any operator that
//! commutes with a set of these reflections is block diagonal in the
//! symmetry-adapted basis built here, one block per parity character.
//! For a mode operator with `omega = e1` the reflections of `v_2` and `v_3`
//! commute with the generator, which splits it into four blocks of roughly
//! a quarter of the size. The reduction is exact; nothing is discarded.

use faer::{c64, Mat, MatRef};

use crate::velocity::VelocityGrid;

/// One parity block: its character and sparse orthonormal basis columns.
#[derive(Debug, Clone)]
pub struct Sector {
    /// `odd[k]` is true if the block is odd under reflection of axis `k`.
    pub odd: [bool; 3],
    pub cols: Vec<Vec<(usize, f64)>>,
}

/// Symmetry-adapted orthonormal basis of the full coordinate space.
#[derive(Debug, Clone)]
pub struct ParityBasis {
    pub dim: usize,
    pub axes: Vec<usize>,
    pub sectors: Vec<Sector>,
}

/// Parity of the tangent field coordinates `(e1, e2, b1, b2)` of a mode
/// state in the canonical frame `omega = e1, W1 = e2, W2 = e3`.
pub const FIELD_PARITY: [[bool; 3]; 4] =
    [[false, false, true], [false, true, false], [false, true, false], [false, false, true]];

impl ParityBasis {
    /// `axes` lists the reflected velocity axes; `extra` gives the parity of
    /// trailing non-kinetic coordinates.
    pub fn new(grid: &VelocityGrid, axes: &[usize], extra: &[[bool; 3]]) -> Self {
        let n = grid.n_per_axis;
        let nk = grid.len();
        let masks: Vec<[bool; 3]> = (0..1usize << axes.len())
            .map(|bits| {
                let mut odd = [false; 3];
                for (t, &ax) in axes.iter().enumerate() {
                    odd[ax] = bits >> t & 1 == 1;
                }
                odd
            })
            .collect();
        let mut sectors: Vec<Sector> =
            masks.iter().map(|&odd| Sector { odd, cols: Vec::new() }).collect();

        let mut seen = vec![false; nk];
        for a in 0..nk {
            if seen[a] {
                continue;
            }
            let idx = grid.multi_index(a);
            // orbit images with the reflections applied, tagged by which axes flipped
            let mut images: Vec<(usize, [bool; 3])> = Vec::new();
            for bits in 0..1usize << axes.len() {
                let mut j = idx;
                let mut flipped = [false; 3];
                for (t, &ax) in axes.iter().enumerate() {
                    if bits >> t & 1 == 1 {
                        j[ax] = n - 1 - j[ax];
                        flipped[ax] = true;
                    }
                }
                images.push((grid.flat_index(j), flipped));
            }
            for &(b, _) in &images {
                seen[b] = true;
            }
            for (s, odd) in masks.iter().enumerate() {
                let mut col: Vec<(usize, f64)> = Vec::new();
                for &(b, flipped) in &images {
                    let sign: f64 = (0..3)
                        .map(|k| if flipped[k] && odd[k] { -1.0 } else { 1.0 })
                        .product();
                    match col.iter_mut().find(|(i, _)| *i == b) {
                        Some(entry) => entry.1 += sign,
                        None => col.push((b, sign)),
                    }
                }
                col.retain(|&(_, c)| c != 0.0);
                if col.is_empty() {
                    continue;
                }
                let nrm = col.iter().map(|&(_, c)| c * c).sum::<f64>().sqrt();
                col.iter_mut().for_each(|e| e.1 /= nrm);
                col.sort_by_key(|e| e.0);
                sectors[s].cols.push(col);
            }
        }
        for (k, par) in extra.iter().enumerate() {
            let s = masks
                .iter()
                .position(|m| axes.iter().all(|&ax| m[ax] == par[ax]))
                .expect("parity mask");
            sectors[s].cols.push(vec![(nk + k, 1.0)]);
        }
        Self { dim: nk + extra.len(), axes: axes.to_vec(), sectors }
    }

    /// All three reflections, for the collision operators.
    pub fn collision(grid: &VelocityGrid) -> Self {
        Self::new(grid, &[0, 1, 2], &[])
    }

    /// Reflections of `v_2`, `v_3` for canonical-frame mode operators.
    pub fn mode(grid: &VelocityGrid, field_coupled: bool) -> Self {
        let extra: &[[bool; 3]] = if field_coupled { &FIELD_PARITY } else { &[] };
        Self::new(grid, &[1, 2], extra)
    }

    pub fn sector_dim(&self, s: usize) -> usize {
        self.sectors[s].cols.len()
    }

    /// Index of the sector with the given character on the reflected axes.
    pub fn sector_index(&self, odd: [bool; 3]) -> usize {
        self.sectors
            .iter()
            .position(|sec| self.axes.iter().all(|&ax| sec.odd[ax] == odd[ax]))
            .expect("sector")
    }

    /// `B^T A B` for block `s`.
    pub fn restrict(&self, s: usize, a: MatRef<'_, c64>) -> Mat<c64> {
        let cols = &self.sectors[s].cols;
        let m = cols.len();
        let nr = a.nrows();
        let mut ab = Mat::<c64>::zeros(nr, m);
        for (j, col) in cols.iter().enumerate() {
            for &(b, beta) in col {
                for i in 0..nr {
                    ab[(i, j)] += a[(i, b)] * beta;
                }
            }
        }
        Mat::from_fn(m, m, |i, j| cols[i].iter().map(|&(r, alpha)| ab[(r, j)] * alpha).sum())
    }

    /// Real version of [`ParityBasis::restrict`].
    pub fn restrict_real(&self, s: usize, a: MatRef<'_, f64>) -> Mat<f64> {
        let cols = &self.sectors[s].cols;
        let m = cols.len();
        let nr = a.nrows();
        let mut ab = Mat::<f64>::zeros(nr, m);
        for (j, col) in cols.iter().enumerate() {
            for &(b, beta) in col {
                for i in 0..nr {
                    ab[(i, j)] += a[(i, b)] * beta;
                }
            }
        }
        Mat::from_fn(m, m, |i, j| cols[i].iter().map(|&(r, alpha)| ab[(r, j)] * alpha).sum())
    }

    /// `B^T x`.
    pub fn gather(&self, s: usize, x: &[c64]) -> Vec<c64> {
        self.sectors[s]
            .cols
            .iter()
            .map(|col| col.iter().map(|&(i, c)| x[i] * c).sum())
            .collect()
    }

    pub fn gather_real(&self, s: usize, x: &[f64]) -> Vec<f64> {
        self.sectors[s]
            .cols
            .iter()
            .map(|col| col.iter().map(|&(i, c)| x[i] * c).sum())
            .collect()
    }

    /// `x += B y`.
    pub fn scatter_add(&self, s: usize, y: &[c64], x: &mut [c64]) {
        for (col, &yj) in self.sectors[s].cols.iter().zip(y) {
            for &(i, c) in col {
                x[i] += yj * c;
            }
        }
    }

    /// `B y` as a full-length vector.
    pub fn scatter(&self, s: usize, y: &[c64]) -> Vec<c64> {
        let mut x = vec![c64::new(0.0, 0.0); self.dim];
        self.scatter_add(s, y, &mut x);
        x
    }
}
