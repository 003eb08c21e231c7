//! Discrete velocity space.
//!
//! A tensor Gauss-Hermite rule on R^3 exact for polynomials times
//! `exp(-|v|^2 / (2 scale^2))`, the orthonormal Maxwellian basis
//! `chi_0..chi_4`, and the macroscopic/microscopic projections.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use faer::c64;
use gauss_quad::GaussHermite;

use crate::error::{Error, Result};

/// Quadrature nodes and weights on R^3_v.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub n_per_axis: usize,
    pub scale: f64,
    axis: Vec<f64>,
    sqrt_w: Vec<f64>,
    chi_sym: [Vec<f64>; 5],
}

/// Complex samples of a function `f(v)`, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<c64>,
}

/// Density, momentum and energy moments `(f, chi_0)`, `(f, v sqrt(M))`, `(f, chi_4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroMoments {
    pub n: c64,
    pub m: [c64; 3],
    pub q: c64,
}

/// Orthogonal projections of the collision null spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// onto span{chi_0..chi_4}
    P0,
    /// I - P0
    P1,
    /// onto span{chi_0}
    Pd,
    /// I - Pd
    Pr,
}

/// Global Maxwellian `(2 pi)^{-3/2} exp(-|v|^2/2)`.
pub fn maxwellian(v: [f64; 3]) -> f64 {
    (2.0 * PI).powf(-1.5) * (-0.5 * norm2(v)).exp()
}

/// Value of `chi_j` at a single velocity.
pub fn chi_at(j: usize, v: [f64; 3]) -> Result<f64> {
    let sm = maxwellian(v).sqrt();
    match j {
        0 => Ok(sm),
        1..=3 => Ok(v[j - 1] * sm),
        4 => Ok((norm2(v) - 3.0) / 6f64.sqrt() * sm),
        _ => Err(Error::Index(j)),
    }
}

pub(crate) fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Builds the tensor rule with `n_per_axis^3` nodes.
pub fn build_grid(n_per_axis: usize, scale: f64) -> Result<VelocityGrid> {
    if n_per_axis < 4 {
        return Err(Error::InvalidResolution(n_per_axis));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    let n = n_per_axis;
    let rule = GaussHermite::new(NonZeroUsize::new(n).unwrap());
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // exact mirror symmetry, so reflections map nodes onto nodes bit-for-bit
    let mut x = vec![0.0; n];
    let mut wx = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        x[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        wx[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    let c = scale * 2f64.sqrt();
    let axis: Vec<f64> = x.iter().map(|&xi| c * xi).collect();
    let axis_w: Vec<f64> = x
        .iter()
        .zip(&wx)
        .map(|(&xi, &wi)| wi * c * (xi * xi).exp())
        .collect();

    let mut nodes = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                nodes.push([axis[i], axis[j], axis[k]]);
                // sorted product keeps weights exactly permutation invariant
                let mut f = [axis_w[i], axis_w[j], axis_w[k]];
                f.sort_by(|a, b| a.total_cmp(b));
                weights.push(f[0] * f[1] * f[2]);
            }
        }
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    // orthonormalize in the discrete inner product (removes rounding only)
    let mut chi_sym: [Vec<f64>; 5] = Default::default();
    for (j, slot) in chi_sym.iter_mut().enumerate() {
        *slot = nodes
            .iter()
            .zip(&sqrt_w)
            .map(|(&v, &s)| s * chi_at(j, v).unwrap())
            .collect();
    }
    for j in 0..5 {
        for i in 0..j {
            let d = dot(&chi_sym[j], &chi_sym[i]);
            let (head, tail) = chi_sym.split_at_mut(j);
            for (a, b) in tail[0].iter_mut().zip(&head[i]) {
                *a -= d * b;
            }
        }
        let nrm = dot(&chi_sym[j], &chi_sym[j]).sqrt();
        chi_sym[j].iter_mut().for_each(|a| *a /= nrm);
    }

    Ok(VelocityGrid { nodes, weights, n_per_axis: n, scale, axis, sqrt_w, chi_sym })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl VelocityGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One-dimensional node coordinates, ascending and mirror symmetric.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// `sqrt(w_a)`, the map from node values to symmetric coordinates.
    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    /// `chi_j` in symmetric coordinates; the five vectors are orthonormal.
    pub fn chi_sym(&self, j: usize) -> &[f64] {
        &self.chi_sym[j]
    }

    /// Per-axis node indices of a flat node index.
    pub fn multi_index(&self, a: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        [a / (n * n), (a / n) % n, a % n]
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let n = self.n_per_axis;
        (idx[0] * n + idx[1]) * n + idx[2]
    }

    /// Node values to symmetric coordinates.
    pub fn to_sym(&self, f: &GridFunction) -> Result<Vec<c64>> {
        self.check(f)?;
        Ok(f.values.iter().zip(&self.sqrt_w).map(|(v, s)| v * s).collect())
    }

    /// Symmetric coordinates to node values.
    pub fn from_sym(&self, y: &[c64]) -> GridFunction {
        GridFunction { values: y.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect() }
    }

    pub(crate) fn check(&self, f: &GridFunction) -> Result<()> {
        if f.values.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.values.len() });
        }
        Ok(())
    }

    /// Samples a real function at the nodes.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> GridFunction {
        GridFunction { values: self.nodes.iter().map(|&v| c64::new(f(v), 0.0)).collect() }
    }
}

impl GridFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![c64::new(0.0, 0.0); n] }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self { values: values.iter().map(|&x| c64::new(x, 0.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `sum_a w_a f(v_a) conj(g(v_a))`.
pub fn inner_product(f: &GridFunction, g: &GridFunction, grid: &VelocityGrid) -> Result<c64> {
    grid.check(f)?;
    grid.check(g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(&grid.weights)
        .map(|((a, b), w)| a * b.conj() * w)
        .sum())
}

/// Samples of `chi_j`.
pub fn chi(j: usize, grid: &VelocityGrid) -> Result<GridFunction> {
    if j > 4 {
        return Err(Error::Index(j));
    }
    Ok(grid.from_sym(&grid.chi_sym[j].iter().map(|&x| c64::new(x, 0.0)).collect::<Vec<_>>()))
}

/// Applies a null-space projection to node values.
pub fn project(f: &GridFunction, which: Projection, grid: &VelocityGrid) -> Result<GridFunction> {
    let mut y = grid.to_sym(f)?;
    project_sym(&mut y, which, grid);
    Ok(grid.from_sym(&y))
}

/// In-place projection in symmetric coordinates.
pub fn project_sym(y: &mut [c64], which: Projection, grid: &VelocityGrid) {
    let (range, complement) = match which {
        Projection::P0 => (0..5, false),
        Projection::P1 => (0..5, true),
        Projection::Pd => (0..1, false),
        Projection::Pr => (0..1, true),
    };
    let coeffs: Vec<c64> = range
        .clone()
        .map(|j| y.iter().zip(&grid.chi_sym[j]).map(|(a, c)| a * c).sum())
        .collect();
    if complement {
        for (k, j) in range.enumerate() {
            for (a, c) in y.iter_mut().zip(&grid.chi_sym[j]) {
                *a -= coeffs[k] * c;
            }
        }
    } else {
        y.iter_mut().for_each(|a| *a = c64::new(0.0, 0.0));
        for (k, j) in range.enumerate() {
            for (a, c) in y.iter_mut().zip(&grid.chi_sym[j]) {
                *a += coeffs[k] * c;
            }
        }
    }
}

/// Moments `(f, chi_0)`, `(f, v_i sqrt(M))`, `(f, chi_4)`.
pub fn macro_moments(f: &GridFunction, grid: &VelocityGrid) -> Result<MacroMoments> {
    let y = grid.to_sym(f)?;
    let m = |j: usize| -> c64 { y.iter().zip(&grid.chi_sym[j]).map(|(a, c)| a * c).sum() };
    Ok(MacroMoments { n: m(0), m: [m(1), m(2), m(3)], q: m(4) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid12() -> VelocityGrid {
        build_grid(12, 1.0).unwrap()
    }

    #[test]
    fn maxwellian_mass_and_normalization() {
        let g = grid12();
        assert_eq!(g.len(), 1728);
        let mass: f64 = g.nodes.iter().zip(&g.weights).map(|(&v, w)| w * maxwellian(v)).sum();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        let c0 = chi(0, &g).unwrap();
        assert!((inner_product(&c0, &c0, &g).unwrap().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chi_point_values() {
        let z = (2.0 * PI).powf(-0.75);
        assert!((chi_at(0, [0.0; 3]).unwrap() - z).abs() < 1e-15);
        assert!((chi_at(4, [0.0; 3]).unwrap() + 3.0 * z / 6f64.sqrt()).abs() < 1e-15);
        assert!(matches!(chi_at(5, [0.0; 3]), Err(Error::Index(5))));
        assert!(chi(7, &grid12()).is_err());
    }

    #[test]
    fn gram_is_identity() {
        let g = grid12();
        let chis: Vec<_> = (0..5).map(|j| chi(j, &g).unwrap()).collect();
        for i in 0..5 {
            for j in 0..5 {
                let ip = inner_product(&chis[i], &chis[j], &g).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - c64::new(want, 0.0)).norm() < 1e-8, "({i},{j}) {ip}");
                // analytic chi values agree with the orthonormalized ones
                let raw = g.sample(|v| chi_at(i, v).unwrap());
                let d = inner_product(&raw, &chis[j], &g).unwrap();
                assert!((d - c64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn grid_symmetries() {
        let g = build_grid(7, 1.3).unwrap();
        let n = g.n_per_axis;
        for a in 0..g.len() {
            let [i, j, k] = g.multi_index(a);
            let b = g.flat_index([n - 1 - i, n - 1 - j, n - 1 - k]);
            for d in 0..3 {
                assert_eq!(g.nodes[b][d], -g.nodes[a][d]);
            }
            assert_eq!(g.weights[a], g.weights[b]);
            let p = g.flat_index([j, k, i]);
            assert_eq!(g.nodes[p], [g.nodes[a][1], g.nodes[a][2], g.nodes[a][0]]);
            assert_eq!(g.weights[p], g.weights[a]);
            assert!(g.weights[a] > 0.0);
        }
        assert!(matches!(build_grid(3, 1.0), Err(Error::InvalidResolution(3))));
    }

    #[test]
    fn projections() {
        let g = grid12();
        let c0 = chi(0, &g).unwrap();
        let pd = project(&c0, Projection::Pd, &g).unwrap();
        for (a, b) in pd.values.iter().zip(&c0.values) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
        let f = g.sample(|v| v[0] * v[1] * maxwellian(v).sqrt());
        let p0 = project(&f, Projection::P0, &g).unwrap();
        let n0 = inner_product(&p0, &p0, &g).unwrap().re.sqrt();
        assert!(n0 < 1e-8);
        let zero = GridFunction::zeros(g.len());
        assert_eq!(project(&zero, Projection::P1, &g).unwrap(), zero);
        let short = GridFunction::zeros(3);
        assert!(matches!(project(&short, Projection::P0, &g), Err(Error::Dimension { .. })));
    }

    #[test]
    fn parity_of_odd_even_products() {
        let g = grid12();
        let odd = g.sample(|v| v[0] * (1.0 + v[1] * v[1]) * maxwellian(v).sqrt());
        let even = g.sample(|v| (1.0 + v[0] * v[0] + v[2]) * maxwellian(v).sqrt());
        assert!(inner_product(&odd, &even, &g).unwrap().norm() <= 1e-12);
    }

    #[test]
    fn moment_refinement() {
        let f = |v: [f64; 3]| {
            (1.0 + v[0] - 0.5 * v[1] * v[2] + 0.3 * v[0].powi(4) + 0.1 * v[1].powi(3) * v[2].powi(3))
                * maxwellian(v).sqrt()
        };
        let a = build_grid(12, 1.0).unwrap();
        let b = build_grid(16, 1.0).unwrap();
        let ma = macro_moments(&a.sample(f), &a).unwrap();
        let mb = macro_moments(&b.sample(f), &b).unwrap();
        assert!((ma.n - mb.n).norm() < 1e-6);
        assert!((ma.q - mb.q).norm() < 1e-6);
        for i in 0..3 {
            assert!((ma.m[i] - mb.m[i]).norm() < 1e-6);
        }
    }
}
