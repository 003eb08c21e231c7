//! Single Fourier-mode generators.
//!
//! For `xi = s omega` the state is `(f, e, b)` where `e` and `b` are the
//! coordinates of `omega x E` and `omega x B` in the tangent basis
//! `{W1, W2}`. The longitudinal electric field is slaved to the density
//! through the Gauss law and is carried by the `s^{-2} P_d` term of the
//! metric instead of the state.
//!
//! Kinetic components are stored in symmetric coordinates.

use faer::{c64, Mat};

use crate::collision::{CollisionMatrices, Species};
use crate::error::{Error, Result};
use crate::linalg::{matvec, vdot};
use crate::parity::ParityBasis;
use crate::velocity::{GridFunction, VelocityGrid};

/// Orthonormal right-handed frame `(omega, W1, W2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub omega: [f64; 3],
    pub w1: [f64; 3],
    pub w2: [f64; 3],
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot3(a, a).sqrt();
    (n > 1e-300 && n.is_finite()).then(|| [a[0] / n, a[1] / n, a[2] / n])
}

impl Frame {
    /// `omega = e1, W1 = e2, W2 = e3`.
    pub fn canonical() -> Self {
        Self { omega: [1.0, 0.0, 0.0], w1: [0.0, 1.0, 0.0], w2: [0.0, 0.0, 1.0] }
    }

    /// Frame with the given direction; `w1` is orthogonalized against it.
    pub fn new(omega: [f64; 3], w1: [f64; 3]) -> Result<Self> {
        let omega = normalize(omega).ok_or_else(|| Error::Domain("zero direction".into()))?;
        let d = dot3(w1, omega);
        let w1 = normalize([w1[0] - d * omega[0], w1[1] - d * omega[1], w1[2] - d * omega[2]])
            .ok_or_else(|| Error::Domain("tangent vector parallel to omega".into()))?;
        Ok(Self { omega, w1, w2: cross(omega, w1) })
    }

    /// Frame with `W1 = (-omega_2, omega_1, 0) / |.|`, the transverse unit
    /// vector used by the decay scenarios.
    pub fn transverse(omega: [f64; 3]) -> Result<Self> {
        let t = [-omega[1], omega[0], 0.0];
        if dot3(t, t).sqrt() <= 1e-12 * dot3(omega, omega).sqrt() {
            return Err(Error::PoleExclusion);
        }
        Self::new(omega, t)
    }

    /// The frame for `-omega` sharing `W1`.
    pub fn reversed(&self) -> Self {
        let omega = self.omega.map(|x| -x);
        Self { omega, w1: self.w1, w2: cross(omega, self.w1) }
    }

    pub fn is_canonical(&self) -> bool {
        *self == Self::canonical()
    }

    /// Largest deviation from orthonormality and right-handedness.
    pub fn defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b, want) in [
            (self.omega, self.omega, 1.0),
            (self.w1, self.w1, 1.0),
            (self.w2, self.w2, 1.0),
            (self.omega, self.w1, 0.0),
            (self.omega, self.w2, 0.0),
            (self.w1, self.w2, 0.0),
        ] {
            d = d.max((dot3(a, b) - want).abs());
        }
        let c = cross(self.omega, self.w1);
        let c2 = cross(self.omega, self.w2);
        for k in 0..3 {
            d = d.max((c[k] - self.w2[k]).abs()).max((c2[k] + self.w1[k]).abs());
        }
        d
    }
}

/// Which generator a mode operator represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    /// `L - i s (v.omega)`
    Boltzmann,
    /// two-species field system with `L1`
    TwoSpecies,
    /// one-species field system with `L`
    OneSpecies,
}

impl ModeKind {
    pub fn field_coupled(self) -> bool {
        !matches!(self, ModeKind::Boltzmann)
    }

    pub fn collision_species(self) -> Species {
        match self {
            ModeKind::TwoSpecies => Species::Two,
            _ => Species::One,
        }
    }
}

/// A mode state in node values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub f: GridFunction,
    /// `omega x E` in `{W1, W2}`
    pub e: [c64; 2],
    /// `omega x B` in `{W1, W2}`
    pub b: [c64; 2],
}

/// Weighted inner product `(U,V)_xi = (f,g) + s^{-2}(P_d f, P_d g) + (e,e') + (b,b')`.
///
/// The density term carries the longitudinal electric energy and is absent
/// for the Boltzmann generator, whose natural norm is the plain one.
#[derive(Debug, Clone)]
pub struct WeightedMetric {
    pub s: f64,
    density_weight: f64,
    chi0: Vec<f64>,
    n_kinetic: usize,
}

impl WeightedMetric {
    pub fn new(s: f64, grid: &VelocityGrid) -> Self {
        Self { s, density_weight: 1.0 / (s * s), chi0: grid.chi_sym(0).to_vec(), n_kinetic: grid.len() }
    }

    /// Plain `L^2_v` inner product.
    pub fn plain(s: f64, grid: &VelocityGrid) -> Self {
        Self { density_weight: 0.0, ..Self::new(s, grid) }
    }

    /// Inner product of states in symmetric coordinates; any trailing field
    /// coordinates enter with unit weight.
    pub fn inner_sym(&self, y: &[c64], z: &[c64]) -> c64 {
        let nk = self.n_kinetic;
        let dy: c64 = y[..nk].iter().zip(&self.chi0).map(|(a, c)| a * c).sum();
        let dz: c64 = z[..nk].iter().zip(&self.chi0).map(|(a, c)| a * c).sum();
        vdot(y, z) + dy * dz.conj() * self.density_weight
    }

    pub fn norm_sym(&self, y: &[c64]) -> f64 {
        self.inner_sym(y, y).re.max(0.0).sqrt()
    }
}

/// Dense generator of one Fourier mode.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub kind: ModeKind,
    pub s: f64,
    pub frame: Frame,
    /// Acts on `(y, e, b)` with `y` in symmetric coordinates.
    pub matrix: Mat<c64>,
    pub metric: WeightedMetric,
    n_kinetic: usize,
    basis: Option<ParityBasis>,
}

/// `sqrt(w) (v.d) sqrt(M)` in symmetric coordinates.
fn directional_chi(grid: &VelocityGrid, d: [f64; 3]) -> Vec<f64> {
    (0..grid.len())
        .map(|a| d[0] * grid.chi_sym(1)[a] + d[1] * grid.chi_sym(2)[a] + d[2] * grid.chi_sym(3)[a])
        .collect()
}

/// Assembles the mode generator for `xi = s omega`.
pub fn assemble_mode(
    kind: ModeKind,
    s: f64,
    frame: Frame,
    cm: &CollisionMatrices,
    grid: &VelocityGrid,
) -> Result<ModeOperator> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("|xi| must be positive, got {s}")));
    }
    if frame.defect() > 1e-12 {
        return Err(Error::Domain("frame is not orthonormal".into()));
    }
    if cm.dim() != grid.len() {
        return Err(Error::Dimension { expected: grid.len(), got: cm.dim() });
    }
    let nk = grid.len();
    let coupled = kind.field_coupled();
    let dim = if coupled { nk + 4 } else { nk };
    let l = cm.op(kind.collision_species());
    let mut a = Mat::<c64>::zeros(dim, dim);
    for j in 0..nk {
        for i in 0..nk {
            a[(i, j)] = c64::new(l[(i, j)], 0.0);
        }
    }
    let vw: Vec<f64> = grid.nodes.iter().map(|&v| dot3(v, frame.omega)).collect();
    for (i, &x) in vw.iter().enumerate() {
        a[(i, i)] -= c64::new(0.0, s * x);
    }
    if coupled {
        let c0 = grid.chi_sym(0);
        // -(i/s) (v.omega) P_d
        for j in 0..nk {
            if c0[j] == 0.0 {
                continue;
            }
            for i in 0..nk {
                a[(i, j)] -= c64::new(0.0, vw[i] * c0[i] * c0[j] / s);
            }
        }
        let cw1 = directional_chi(grid, frame.w1);
        let cw2 = directional_chi(grid, frame.w2);
        let (e1, e2, b1, b2) = (nk, nk + 1, nk + 2, nk + 3);
        for i in 0..nk {
            // -v sqrt(M) . (omega x E_t)
            a[(i, e1)] = c64::new(-cw2[i], 0.0);
            a[(i, e2)] = c64::new(cw1[i], 0.0);
            // -omega x P_m f
            a[(e1, i)] = c64::new(cw2[i], 0.0);
            a[(e2, i)] = c64::new(-cw1[i], 0.0);
        }
        // Maxwell rotation: d_t e = i s J b, d_t b = -i s J e, J = [[0,-1],[1,0]]
        let is = c64::new(0.0, s);
        a[(e1, b2)] = -is;
        a[(e2, b1)] = is;
        a[(b1, e2)] = is;
        a[(b2, e1)] = -is;
    }
    let basis = frame.is_canonical().then(|| ParityBasis::mode(grid, coupled));
    Ok(ModeOperator {
        kind,
        s,
        frame,
        matrix: a,
        metric: if coupled { WeightedMetric::new(s, grid) } else { WeightedMetric::plain(s, grid) },
        n_kinetic: nk,
        basis,
    })
}

impl ModeOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_kinetic(&self) -> usize {
        self.n_kinetic
    }

    /// Reflection basis, available for the canonical frame.
    pub fn parity_basis(&self) -> Option<&ParityBasis> {
        self.basis.as_ref()
    }

    /// Diagonal blocks in the reflection basis, or the full matrix as a
    /// single block for non-canonical frames.
    pub fn blocks(&self) -> Vec<Mat<c64>> {
        match &self.basis {
            Some(b) => (0..b.sectors.len()).map(|s| b.restrict(s, self.matrix.as_ref())).collect(),
            None => vec![self.matrix.clone()],
        }
    }

    pub fn apply_sym(&self, y: &[c64]) -> Vec<c64> {
        matvec(self.matrix.as_ref(), y)
    }

    /// Flattens a state into symmetric coordinates.
    pub fn state_to_sym(&self, u: &ModeState, grid: &VelocityGrid) -> Result<Vec<c64>> {
        let mut y = grid.to_sym(&u.f)?;
        if self.kind.field_coupled() {
            y.extend_from_slice(&u.e);
            y.extend_from_slice(&u.b);
        }
        Ok(y)
    }

    pub fn state_from_sym(&self, y: &[c64], grid: &VelocityGrid) -> ModeState {
        let nk = self.n_kinetic;
        let zero = c64::new(0.0, 0.0);
        let (e, b) = if self.kind.field_coupled() {
            ([y[nk], y[nk + 1]], [y[nk + 2], y[nk + 3]])
        } else {
            ([zero; 2], [zero; 2])
        };
        ModeState { f: grid.from_sym(&y[..nk]), e, b }
    }

    /// `Re (A U, U)_xi` for a state in symmetric coordinates.
    pub fn dissipation_sym(&self, y: &[c64]) -> f64 {
        self.metric.inner_sym(&self.apply_sym(y), y).re
    }

    /// Flips the sign of the Maxwell `b <- e` block, breaking skew symmetry.
    /// Used only to check that the invariant checks catch the fault.
    #[doc(hidden)]
    pub fn inject_maxwell_sign_flip(&mut self) {
        if self.kind.field_coupled() {
            let nk = self.n_kinetic;
            for (i, j) in [(nk + 2, nk + 1), (nk + 3, nk)] {
                self.matrix[(i, j)] = -self.matrix[(i, j)];
            }
        }
    }
}

/// `||U||_xi` for a state in node values.
pub fn weighted_norm(u: &ModeState, s: f64, grid: &VelocityGrid) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("|xi| must be positive, got {s}")));
    }
    let mut y = grid.to_sym(&u.f)?;
    y.extend_from_slice(&u.e);
    y.extend_from_slice(&u.b);
    Ok(WeightedMetric::new(s, grid).norm_sym(&y))
}

/// Macroscopic 9x9 block of the one-species generator at `xi = s e1`.
///
/// Basis `(W0, W_1, W_2, W_3, W4, X_1, X_2, Y_1, Y_2)`: density, momentum,
/// energy, and the tangent coordinates of `omega x E` and `omega x B`.
pub fn g6_matrix(s: f64) -> Mat<c64> {
    let i = c64::new(0.0, 1.0);
    let r = (2.0f64 / 3.0).sqrt();
    let mut g = Mat::<c64>::zeros(9, 9);
    g[(0, 1)] = -i * s;
    g[(1, 0)] = -i * (s + 1.0 / s);
    g[(1, 4)] = -i * r * s;
    g[(4, 1)] = -i * r * s;
    // momentum <- omega x X, X <- omega x W
    g[(2, 6)] = c64::new(1.0, 0.0);
    g[(3, 5)] = c64::new(-1.0, 0.0);
    g[(5, 3)] = c64::new(1.0, 0.0);
    g[(6, 2)] = c64::new(-1.0, 0.0);
    // X <- i xi x Y, Y <- -i xi x X
    g[(5, 8)] = -i * s;
    g[(6, 7)] = i * s;
    g[(7, 6)] = i * s;
    g[(8, 5)] = -i * s;
    g
}

/// `{0, 0, 0, +-i sqrt(1 + 5s^2/3), -i sqrt(1+s^2) x2, +i sqrt(1+s^2) x2}`.
pub fn g6_eigenvalues_closed(s: f64) -> Vec<c64> {
    let a = (1.0 + 5.0 * s * s / 3.0).sqrt();
    let b = (1.0 + s * s).sqrt();
    let z = c64::new(0.0, 0.0);
    vec![z, z, z, c64::new(0.0, a), c64::new(0.0, -a), c64::new(0.0, -b), c64::new(0.0, -b), c64::new(0.0, b), c64::new(0.0, b)]
}
