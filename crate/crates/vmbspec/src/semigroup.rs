//! Mode propagation, scenario initial data, decay synthesis and fitting.
//!
//! `e^{tA}U_0` is evaluated per reflection block from one dense
//! eigendecomposition. Blocks whose eigenbasis is too ill-conditioned fall
//! back to an adaptive implicit stepper (two-stage Gauss, i.e. the (2,2)
//! Pade map for a linear system) with step-doubling error control.
//!
//! Decay curves are `L^2_x` norms obtained through Parseval from a radial
//! Gauss-Legendre rule (log-mapped in `|xi|`) times a direction rule.

use std::f64::consts::PI;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::collision::CollisionMatrices;
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm1, vnorm, Lu};
use crate::modes::{assemble_mode, cross, dot3, Frame, ModeKind, ModeOperator, ModeState};
use crate::velocity::{GridFunction, VelocityGrid};

/// Relative tolerance of the contraction monitor.
pub const CONTRACTION_TOL: f64 = 1e-8;
/// Eigenbasis condition number above which a block is stepped instead.
pub const MAX_EIGENBASIS_COND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    TwoSpeciesField,
    OneMagnetic,
    OneElectric,
    Boltzmann,
}

impl Scenario {
    pub const ALL: [Scenario; 4] =
        [Scenario::TwoSpeciesField, Scenario::OneMagnetic, Scenario::OneElectric, Scenario::Boltzmann];

    pub fn kind(self) -> ModeKind {
        match self {
            Scenario::TwoSpeciesField => ModeKind::TwoSpecies,
            Scenario::OneMagnetic | Scenario::OneElectric => ModeKind::OneSpecies,
            Scenario::Boltzmann => ModeKind::Boltzmann,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TwoSpeciesField => "two_species_field",
            Scenario::OneMagnetic => "one_magnetic",
            Scenario::OneElectric => "one_electric",
            Scenario::Boltzmann => "boltzmann",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown scenario '{s}'")))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Amplitude profile `c(s) = d0 e^{r0^2/2} e^{-s^2/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub d0: f64,
    pub r0: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Self { d0: 1.0, r0: 1.0 }
    }
}

impl Profile {
    pub fn amplitude(&self, s: f64) -> f64 {
        self.d0 * (0.5 * self.r0 * self.r0).exp() * (-0.5 * s * s).exp()
    }
}

/// Fourier initial data at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialMode {
    pub f: GridFunction,
    pub e: [c64; 3],
    pub b: [c64; 3],
    pub xi: [f64; 3],
    pub scenario: Scenario,
}

/// `(-xi_2, xi_1, 0) / |(xi_1, xi_2)|`.
pub fn transverse_unit(xi: [f64; 3]) -> Result<[f64; 3]> {
    let r = xi[0].hypot(xi[1]);
    if !(r > 1e-12 * (1.0 + xi[2].abs())) {
        return Err(Error::PoleExclusion);
    }
    Ok([-xi[1] / r, xi[0] / r, 0.0])
}

fn scale3(a: [f64; 3], c: c64) -> [c64; 3] {
    [c * a[0], c * a[1], c * a[2]]
}

fn cdot3(a: [f64; 3], z: [c64; 3]) -> c64 {
    z[0] * a[0] + z[1] * a[1] + z[2] * a[2]
}

/// Builds the scenario data at `xi`.
///
/// * `two_species_field`: `f = 0`, `E = 0`, `B = c t`.
/// * `one_magnetic`: `f = c (s chi_0 + chi_4)`, `E = c(-i omega + t)`,
///   `B = c t`; the radial phase makes `i xi.E = (f, chi_0)` exact.
/// * `one_electric`: `f = c (chi_0 + chi_4)`, `E = c(omega + t)`,
///   `B = c t`; Gauss's law is violated by `c |1 - i s|`.
/// * `boltzmann`: `f = c (chi_0 + chi_4)`.
pub fn make_initial(scenario: Scenario, xi: [f64; 3], profile: &Profile, grid: &VelocityGrid) -> Result<InitialMode> {
    let s = dot3(xi, xi).sqrt();
    if !(s > 0.0) {
        return Err(Error::Domain("xi must be nonzero".into()));
    }
    let omega = [xi[0] / s, xi[1] / s, xi[2] / s];
    let c = profile.amplitude(s);
    let zero3 = [c64::new(0.0, 0.0); 3];
    let combo = |a: f64, b: f64| -> GridFunction {
        let y: Vec<f64> = grid.chi_sym(0).iter().zip(grid.chi_sym(4)).map(|(x, z)| c * (a * x + b * z)).collect();
        grid.from_sym(&y.iter().map(|&v| c64::new(v, 0.0)).collect::<Vec<_>>())
    };
    let (f, e, b) = match scenario {
        Scenario::Boltzmann => (combo(1.0, 1.0), zero3, zero3),
        Scenario::TwoSpeciesField => {
            let t = transverse_unit(xi)?;
            (GridFunction::zeros(grid.len()), zero3, scale3(t, c64::new(c, 0.0)))
        }
        Scenario::OneMagnetic | Scenario::OneElectric => {
            let t = transverse_unit(xi)?;
            let radial = if scenario == Scenario::OneMagnetic { c64::new(0.0, -c) } else { c64::new(c, 0.0) };
            let gamma = if scenario == Scenario::OneMagnetic { s } else { 1.0 };
            let e: [c64; 3] = std::array::from_fn(|k| radial * omega[k] + c * t[k]);
            (combo(gamma, 1.0), e, scale3(t, c64::new(c, 0.0)))
        }
    };
    Ok(InitialMode { f, e, b, xi, scenario })
}

impl InitialMode {
    pub fn s(&self) -> f64 {
        dot3(self.xi, self.xi).sqrt()
    }

    pub fn omega(&self) -> [f64; 3] {
        let s = self.s();
        [self.xi[0] / s, self.xi[1] / s, self.xi[2] / s]
    }

    /// `i xi.E - (f, chi_0)`.
    pub fn gauss_residual(&self, grid: &VelocityGrid) -> Result<c64> {
        let y = grid.to_sym(&self.f)?;
        let n: c64 = y.iter().zip(grid.chi_sym(0)).map(|(a, c)| a * c).sum();
        Ok(c64::new(0.0, 1.0) * cdot3(self.xi, self.e) - n)
    }

    /// State in tangent coordinates of `frame`, whose `omega` must be the
    /// direction of `xi`: `e_k = W_k . (omega x E)`, `b_k = W_k . (omega x B)`.
    pub fn tangent_state(&self, frame: &Frame) -> Result<ModeState> {
        let om = self.omega();
        if (0..3).any(|k| (om[k] - frame.omega[k]).abs() > 1e-12) {
            return Err(Error::Domain("frame direction differs from xi".into()));
        }
        let tangent = |z: [c64; 3]| -> [c64; 2] {
            let re = cross(om, [z[0].re, z[1].re, z[2].re]);
            let im = cross(om, [z[0].im, z[1].im, z[2].im]);
            [frame.w1, frame.w2].map(|w| c64::new(dot3(w, re), dot3(w, im)))
        };
        let (e, b) = if self.scenario.kind().field_coupled() {
            (tangent(self.e), tangent(self.b))
        } else {
            ([c64::new(0.0, 0.0); 2], [c64::new(0.0, 0.0); 2])
        };
        Ok(ModeState { f: self.f.clone(), e, b })
    }
}

/// Full fields from a tangent-coordinate state:
/// `E = -(i xi/|xi|^2)(f, chi_0) - omega x e`, `B = -omega x b`, where `e`
/// and `b` are the tangent vectors `e_1 W1 + e_2 W2`.
pub fn reconstruct_fields(
    state: &ModeState,
    xi: [f64; 3],
    frame: &Frame,
    grid: &VelocityGrid,
) -> Result<(GridFunction, [c64; 3], [c64; 3])> {
    let s2 = dot3(xi, xi);
    if !(s2 > 0.0) {
        return Err(Error::Domain("xi must be nonzero".into()));
    }
    let y = grid.to_sym(&state.f)?;
    let n: c64 = y.iter().zip(grid.chi_sym(0)).map(|(a, c)| a * c).sum();
    let om = frame.omega;
    let untangent = |t: [c64; 2]| -> [c64; 3] {
        let v: [c64; 3] = std::array::from_fn(|k| t[0] * frame.w1[k] + t[1] * frame.w2[k]);
        let re = cross(om, [v[0].re, v[1].re, v[2].re]);
        let im = cross(om, [v[0].im, v[1].im, v[2].im]);
        std::array::from_fn(|k| -c64::new(re[k], im[k]))
    };
    let et = untangent(state.e);
    let b = untangent(state.b);
    let long = c64::new(0.0, -1.0) * n / s2;
    let e = std::array::from_fn(|k| long * xi[k] + et[k]);
    Ok((state.f.clone(), e, b))
}

/// How a block was propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Eigen,
    Stepper,
}

/// Trajectory of one mode in symmetric coordinates.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub times: Vec<f64>,
    pub states: Vec<Vec<c64>>,
    /// `max_t ||U(t)||_xi / ||U_0||_xi`.
    pub max_ratio: f64,
    /// Method used per block.
    pub methods: Vec<Method>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("times must be finite, nonnegative and nondecreasing".into()));
    }
    Ok(())
}

/// Eigendecomposition route; `None` if the eigenbasis is too ill-conditioned.
fn propagate_eigen(a: MatRef<'_, c64>, y0: &[c64], times: &[f64]) -> Result<Option<Vec<Vec<c64>>>> {
    let m = a.nrows();
    if m == 0 {
        return Ok(Some(vec![Vec::new(); times.len()]));
    }
    let eig = a.to_owned().eigen().map_err(|e| Error::Solver(format!("eigendecomposition failed: {e:?}")))?;
    let u = eig.U();
    let lam = eig.S().column_vector();
    let lu = Lu::new(u);
    if !(lu.cond1_estimate() <= MAX_EIGENBASIS_COND) {
        return Ok(None);
    }
    let coef = lu.solve(y0);
    Ok(Some(
        times
            .iter()
            .map(|&t| {
                let z: Vec<c64> = (0..m).map(|k| (lam[k] * t).exp() * coef[k]).collect();
                (0..m).map(|i| (0..m).map(|k| u[(i, k)] * z[k]).sum()).collect()
            })
            .collect(),
    ))
}

/// One (2,2) Pade step map `(I - hA/2 + h^2A^2/12)^{-1}(I + hA/2 + h^2A^2/12)`.
struct PadeStep {
    lu: Lu,
    rhs: Mat<c64>,
}

impl PadeStep {
    fn new(a: MatRef<'_, c64>, a2: &Mat<c64>, h: f64) -> Self {
        let m = a.nrows();
        let build = |sign: f64| {
            Mat::<c64>::from_fn(m, m, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                c64::new(id, 0.0) + a[(i, j)] * (sign * 0.5 * h) + a2[(i, j)] * (h * h / 12.0)
            })
        };
        Self { lu: Lu::new(build(-1.0).as_ref()), rhs: build(1.0) }
    }

    fn apply(&self, y: &[c64]) -> Vec<c64> {
        self.lu.solve(&matvec(self.rhs.as_ref(), y))
    }
}

/// Adaptive implicit stepping with step doubling, local relative error
/// target `rtol`.
pub fn propagate_stepper(a: MatRef<'_, c64>, y0: &[c64], times: &[f64], rtol: f64) -> Result<Vec<Vec<c64>>> {
    check_times(times)?;
    let m = a.nrows();
    if m == 0 {
        return Ok(vec![Vec::new(); times.len()]);
    }
    let a2 = a * a;
    let h0 = 0.25 / norm1(a).max(1e-300);
    let mut cache: std::collections::BTreeMap<i32, PadeStep> = std::collections::BTreeMap::new();
    let mut k: i32 = 0;
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let y0n = vnorm(y0);
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0usize;
    for &target in times {
        while t < target {
            steps += 1;
            if steps > 2_000_000 {
                return Err(Error::NoConvergence { residual: f64::NAN, iterations: steps });
            }
            let h_k = h0 * 2f64.powi(k);
            let (y1, y2, h) = if target - t >= h_k {
                for kk in [k, k - 1] {
                    cache.entry(kk).or_insert_with(|| PadeStep::new(a, &a2, h0 * 2f64.powi(kk)));
                }
                let (full, half) = (&cache[&k], &cache[&(k - 1)]);
                (full.apply(&y), half.apply(&half.apply(&y)), h_k)
            } else {
                let h = target - t;
                let (full, half) = (PadeStep::new(a, &a2, h), PadeStep::new(a, &a2, 0.5 * h));
                (full.apply(&y), half.apply(&half.apply(&y)), h)
            };
            let diff: Vec<c64> = y1.iter().zip(&y2).map(|(p, q)| p - q).collect();
            let err = vnorm(&diff) / 15.0;
            let scale = vnorm(&y).max(1e-300 * y0n);
            if err <= rtol * scale {
                // Richardson-corrected value
                y = y2.iter().zip(&diff).map(|(q, d)| q - d / 15.0).collect();
                t += h;
                if err < rtol * scale / 32.0 && h >= h_k {
                    k += 1;
                }
            } else {
                k -= 1;
                if k < -60 {
                    return Err(Error::NoConvergence { residual: err / scale, iterations: steps });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// `e^{tA} y0` at each time, block by block, with contraction monitoring.
pub fn propagate_sym(op: &ModeOperator, y0: &[c64], times: &[f64], force: Option<Method>) -> Result<Propagation> {
    check_times(times)?;
    if y0.len() != op.dim() {
        return Err(Error::Dimension { expected: op.dim(), got: y0.len() });
    }
    let blocks = op.blocks();
    let basis = op.parity_basis();
    let parts: Vec<Vec<c64>> = match basis {
        Some(b) => (0..blocks.len()).map(|s| b.gather(s, y0)).collect(),
        None => vec![y0.to_vec()],
    };
    let results: Vec<(Method, Vec<Vec<c64>>)> = blocks
        .iter()
        .zip(&parts)
        .map(|(a, p)| {
            if p.iter().all(|z| z.norm() == 0.0) {
                return Ok((Method::Eigen, vec![vec![c64::new(0.0, 0.0); p.len()]; times.len()]));
            }
            if force != Some(Method::Stepper) {
                if let Some(traj) = propagate_eigen(a.as_ref(), p, times)? {
                    return Ok((Method::Eigen, traj));
                }
                if force == Some(Method::Eigen) {
                    return Err(Error::Conditioning(MAX_EIGENBASIS_COND));
                }
            }
            Ok((Method::Stepper, propagate_stepper(a.as_ref(), p, times, 1e-12)?))
        })
        .collect::<Result<_>>()?;
    let mut states = vec![vec![c64::new(0.0, 0.0); op.dim()]; times.len()];
    for (blk, (_, traj)) in results.iter().enumerate() {
        for ((state, part), &t) in states.iter_mut().zip(traj).zip(times) {
            if t == 0.0 {
                continue;
            }
            match basis {
                Some(b) => b.scatter_add(blk, part, state),
                None => state.copy_from_slice(part),
            }
        }
    }
    for (state, &t) in states.iter_mut().zip(times) {
        if t == 0.0 {
            state.copy_from_slice(y0);
        }
    }
    let n0 = op.metric.norm_sym(y0);
    let max_ratio = if n0 > 0.0 {
        states.iter().map(|y| op.metric.norm_sym(y) / n0).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(Propagation { times: times.to_vec(), states, max_ratio, methods: results.iter().map(|r| r.0).collect() })
}

/// `e^{tA} U_0` for a state in node values. Fails if the trajectory leaves
/// the contraction bound by more than the monitor tolerance.
pub fn propagate_mode(op: &ModeOperator, u0: &ModeState, times: &[f64], grid: &VelocityGrid) -> Result<Vec<ModeState>> {
    let y0 = op.state_to_sym(u0, grid)?;
    let mut p = propagate_sym(op, &y0, times, None)?;
    if p.max_ratio > 1.0 + CONTRACTION_TOL {
        p = propagate_sym(op, &y0, times, Some(Method::Stepper))?;
        if p.max_ratio > 1.0 + CONTRACTION_TOL {
            return Err(Error::Solver(format!("contraction violated: ratio {:.12}", p.max_ratio)));
        }
    }
    Ok(p.states.iter().map(|y| op.state_from_sym(y, grid)).collect())
}

/// Direction rule on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRule {
    pub points: Vec<[f64; 3]>,
    /// Weights summing to `4 pi`.
    pub weights: Vec<f64>,
}

/// 14-point rule exact for polynomials of degree 5, rotated so that no
/// point lies near `+-e3`.
pub fn lebedev14() -> DirectionRule {
    let mut pts: Vec<[f64; 3]> = Vec::new();
    let mut w = Vec::new();
    for k in 0..3 {
        for sgn in [1.0, -1.0] {
            let mut p = [0.0; 3];
            p[k] = sgn;
            pts.push(p);
            w.push(4.0 * PI / 15.0);
        }
    }
    let r = 1.0 / 3f64.sqrt();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                pts.push([sx * r, sy * r, sz * r]);
                w.push(4.0 * PI * 3.0 / 40.0);
            }
        }
    }
    // fixed rotation R = Rz(0.7) Rx(0.5) Ry(0.3)
    let rot = |p: [f64; 3]| -> [f64; 3] {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let p = [c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]];
        let (c, s) = (0.5f64.cos(), 0.5f64.sin());
        let p = [p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]];
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
    };
    DirectionRule { points: pts.into_iter().map(rot).collect(), weights: w }
}

/// Radial rule `s = s_min (s_max/s_min)^u` with Gauss-Legendre nodes in `u`.
/// Weights include the Jacobian but not the `s^2` volume factor.
pub fn radial_rule(count: usize, s_min: f64, s_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(s_min > 0.0 && s_max > s_min) {
        return Err(Error::Domain(format!("radial range [{s_min}, {s_max}] is invalid")));
    }
    let nz = std::num::NonZeroUsize::new(count).ok_or(Error::InvalidResolution(count))?;
    let gl = GaussLegendre::new(nz);
    let ln = (s_max / s_min).ln();
    let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs
        .into_iter()
        .map(|(x, w)| {
            let u = 0.5 * (x + 1.0);
            let s = s_min * (s_max / s_min).powf(u);
            (s, 0.5 * w * s * ln)
        })
        .unzip())
}

/// `t = 0` followed by `count` geometric samples from 1 to `t_max`.
pub fn time_schedule(t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_max > 1.0) || count < 2 {
        return Err(Error::Domain("time schedule needs t_max > 1 and at least two samples".into()));
    }
    let mut t = vec![0.0];
    t.extend((0..count).map(|k| t_max.powf(k as f64 / (count - 1) as f64)));
    Ok(t)
}

/// Direction handling in the decay synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameMode {
    /// Each radius is computed once in the frame `omega = e1`, `t = e2` and
    /// weighted by the total direction weight. Exact for a rotation
    /// invariant velocity discretization; an approximation on the grid.
    Aligned,
    /// Every direction of the rule is assembled in its own frame.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_radial: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub directions: DirectionRule,
    pub frames: FrameMode,
    pub t_max: f64,
    pub n_times: usize,
    pub n_per_axis: usize,
    pub profile: Profile,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            n_radial: 48,
            s_min: 1e-3,
            s_max: 8.0,
            directions: lebedev14(),
            frames: FrameMode::Aligned,
            t_max: 500.0,
            n_times: 40,
            n_per_axis: 8,
            profile: Profile::default(),
        }
    }
}

/// Channels of a decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    F,
    E,
    B,
    Density,
    Momentum,
    Energy,
    Micro,
    Macro,
    Pd,
    Pr,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::F,
        Channel::E,
        Channel::B,
        Channel::Density,
        Channel::Momentum,
        Channel::Energy,
        Channel::Micro,
        Channel::Macro,
        Channel::Pd,
        Channel::Pr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::F => "f",
            Channel::E => "E",
            Channel::B => "B",
            Channel::Density => "density",
            Channel::Momentum => "momentum",
            Channel::Energy => "energy",
            Channel::Micro => "micro",
            Channel::Macro => "macro",
            Channel::Pd => "pd",
            Channel::Pr => "pr",
        }
    }

    fn index(self) -> usize {
        Channel::ALL.iter().position(|&c| c == self).unwrap()
    }

    fn applies(self, kind: ModeKind) -> bool {
        match self {
            Channel::F | Channel::Density | Channel::Momentum | Channel::Energy => true,
            Channel::E | Channel::B => kind.field_coupled(),
            Channel::Micro | Channel::Macro => kind != ModeKind::TwoSpecies,
            Channel::Pd | Channel::Pr => kind == ModeKind::TwoSpecies,
        }
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown channel '{s}'")))
    }
}

/// `L^2_x` norms over time. Inapplicable channels are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub scenario: Scenario,
    pub times: Vec<f64>,
    channels: [Option<Vec<f64>>; 10],
    pub n_modes: usize,
}

impl DecayCurve {
    pub fn channel(&self, c: Channel) -> Option<&[f64]> {
        self.channels[c.index()].as_deref()
    }
}

/// Squared channel densities of one state at `|xi| = s`.
pub fn channel_squares(kind: ModeKind, s: f64, y: &[c64], grid: &VelocityGrid) -> [f64; 10] {
    let nk = grid.len();
    let f = &y[..nk];
    let mom = |j: usize| -> c64 { f.iter().zip(grid.chi_sym(j)).map(|(a, c)| a * c).sum() };
    let m: [c64; 5] = std::array::from_fn(mom);
    let f2: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    let mut out = [f64::NAN; 10];
    out[Channel::F.index()] = f2;
    out[Channel::Density.index()] = m[0].norm_sqr();
    out[Channel::Momentum.index()] = m[1].norm_sqr() + m[2].norm_sqr() + m[3].norm_sqr();
    out[Channel::Energy.index()] = m[4].norm_sqr();
    if kind.field_coupled() {
        let e2 = y[nk].norm_sqr() + y[nk + 1].norm_sqr();
        out[Channel::E.index()] = m[0].norm_sqr() / (s * s) + e2;
        out[Channel::B.index()] = y[nk + 2].norm_sqr() + y[nk + 3].norm_sqr();
    }
    if kind == ModeKind::TwoSpecies {
        out[Channel::Pd.index()] = m[0].norm_sqr();
        out[Channel::Pr.index()] =
            f.iter().zip(grid.chi_sym(0)).map(|(a, c)| (a - m[0] * c).norm_sqr()).sum();
    } else {
        let micro: f64 = (0..nk)
            .map(|i| {
                let p: c64 = (0..5).map(|j| m[j] * grid.chi_sym(j)[i]).sum();
                (f[i] - p).norm_sqr()
            })
            .sum();
        out[Channel::Micro.index()] = micro;
        out[Channel::Macro.index()] = m.iter().map(|z| z.norm_sqr()).sum();
    }
    out
}

struct ModeJob {
    s: f64,
    weight: f64,
    omega: [f64; 3],
    frame: Frame,
}

fn mode_jobs(cfg: &ExperimentConfig) -> Result<Vec<ModeJob>> {
    let (sr, wr) = radial_rule(cfg.n_radial, cfg.s_min, cfg.s_max)?;
    let mut jobs = Vec::new();
    for (&s, &w) in sr.iter().zip(&wr) {
        match cfg.frames {
            FrameMode::Aligned => {
                let wd: f64 = cfg.directions.weights.iter().sum();
                jobs.push(ModeJob { s, weight: w * s * s * wd, omega: [1.0, 0.0, 0.0], frame: Frame::canonical() });
            }
            FrameMode::Direct => {
                for (p, &wd) in cfg.directions.points.iter().zip(&cfg.directions.weights) {
                    let t = transverse_unit(*p)?;
                    let frame = Frame::new(*p, t)?;
                    jobs.push(ModeJob { s, weight: w * s * s * wd, omega: *p, frame });
                }
            }
        }
    }
    Ok(jobs)
}

/// Decay curve of a scenario. Modes run in parallel; the quadrature sum is
/// accumulated in a fixed order.
pub fn synthesize_decay(cfg: &ExperimentConfig, cm: &CollisionMatrices, grid: &VelocityGrid) -> Result<DecayCurve> {
    let times = time_schedule(cfg.t_max, cfg.n_times)?;
    let kind = cfg.scenario.kind();
    let jobs = mode_jobs(cfg)?;
    let per_mode: Vec<Result<Vec<[f64; 10]>>> = jobs
        .par_iter()
        .map(|job| {
            let xi = job.omega.map(|x| x * job.s);
            let init = make_initial(cfg.scenario, xi, &cfg.profile, grid)?;
            let op = assemble_mode(kind, job.s, job.frame, cm, grid)?;
            let u0 = init.tangent_state(&job.frame)?;
            let y0 = op.state_to_sym(&u0, grid)?;
            let mut p = propagate_sym(&op, &y0, &times, None)?;
            if p.max_ratio > 1.0 + CONTRACTION_TOL {
                p = propagate_sym(&op, &y0, &times, Some(Method::Stepper))?;
                if p.max_ratio > 1.0 + CONTRACTION_TOL {
                    return Err(Error::Solver(format!("contraction violated at s = {}", job.s)));
                }
            }
            Ok(p.states.iter().map(|y| channel_squares(kind, job.s, y, grid)).collect())
        })
        .collect();
    let failed = per_mode.iter().filter(|r| r.is_err()).count();
    if failed as f64 > 1e-3 * jobs.len() as f64 {
        return Err(Error::ModeFailures { failed, total: jobs.len() });
    }
    let mut acc = [[0.0f64; 10]; 1].repeat(times.len());
    for (job, r) in jobs.iter().zip(&per_mode) {
        if let Ok(sq) = r {
            for (a, q) in acc.iter_mut().zip(sq) {
                for c in 0..10 {
                    a[c] += job.weight * q[c];
                }
            }
        }
    }
    let channels = Channel::ALL.map(|c| {
        c.applies(kind).then(|| acc.iter().map(|a| a[c.index()].max(0.0).sqrt()).collect())
    });
    Ok(DecayCurve { scenario: cfg.scenario, times, channels, n_modes: jobs.len() - failed })
}

/// `L^2` norms of the initial data by direct quadrature, with the same
/// channel definitions as [`synthesize_decay`] at `t = 0`. The electric
/// field enters as `|E|^2` of the stored vector, so for data violating
/// Gauss's law this differs from the propagated curve, whose longitudinal
/// field is reconstructed.
pub fn initial_norms(cfg: &ExperimentConfig, grid: &VelocityGrid) -> Result<[Option<f64>; 10]> {
    let kind = cfg.scenario.kind();
    let mut acc = [0.0f64; 10];
    for job in mode_jobs(cfg)? {
        let xi = job.omega.map(|x| x * job.s);
        let init = make_initial(cfg.scenario, xi, &cfg.profile, grid)?;
        let mut y = grid.to_sym(&init.f)?;
        y.extend_from_slice(&[c64::new(0.0, 0.0); 4]);
        let mut sq = channel_squares(kind, job.s, &y, grid);
        if kind.field_coupled() {
            sq[Channel::E.index()] = init.e.iter().map(|z| z.norm_sqr()).sum();
            sq[Channel::B.index()] = init.b.iter().map(|z| z.norm_sqr()).sum();
        }
        for c in 0..10 {
            acc[c] += job.weight * sq[c];
        }
    }
    Ok(Channel::ALL.map(|c| c.applies(kind).then(|| acc[c.index()].max(0.0).sqrt())))
}

/// Closed-form smoke test: each mode decays as `e^{-s^2 t}` with unit
/// amplitude. Returns `(times, ||u(t)||)`.
pub fn scalar_decay(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let times = time_schedule(cfg.t_max, cfg.n_times)?;
    let (sr, wr) = radial_rule(cfg.n_radial, cfg.s_min, cfg.s_max)?;
    let wd: f64 = cfg.directions.weights.iter().sum();
    let norms = times
        .iter()
        .map(|&t| {
            sr.iter()
                .zip(&wr)
                .map(|(&s, &w)| w * s * s * wd * (-2.0 * s * s * t).exp())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok((times, norms))
}

/// Expected late-time behaviour of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `||.|| ~ t^slope`, accepted within `tol`.
    PowerLaw { slope: f64, tol: f64 },
    /// Exponential decay: strictly negative semilog slope.
    Exponential,
}

impl Target {
    pub fn mode(self) -> FitMode {
        match self {
            Target::PowerLaw { .. } => FitMode::LogLog,
            Target::Exponential => FitMode::SemiLog,
        }
    }

    pub fn accepts(self, slope: f64) -> bool {
        match self {
            Target::PowerLaw { slope: s, tol } => (slope - s).abs() <= tol,
            Target::Exponential => slope < 0.0,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::PowerLaw { slope, tol } => write!(f, "{slope} +- {tol}"),
            Target::Exponential => write!(f, "exponential (semilog slope < 0)"),
        }
    }
}

/// Rate targets of each scenario; `tol` is the default power-law tolerance
/// (the one-species micro channel always uses 0.10).
pub fn decay_targets(scenario: Scenario, tol: f64) -> Vec<(Channel, Target)> {
    let p = |slope| Target::PowerLaw { slope, tol };
    match scenario {
        Scenario::TwoSpeciesField => vec![
            (Channel::B, p(-0.75)),
            (Channel::E, p(-1.25)),
            (Channel::Pr, p(-1.25)),
            (Channel::Pd, Target::Exponential),
        ],
        Scenario::Boltzmann => vec![(Channel::Macro, p(-0.75)), (Channel::Micro, p(-1.25))],
        Scenario::OneMagnetic => vec![
            (Channel::F, p(-0.625)),
            (Channel::E, p(-0.75)),
            (Channel::B, p(-0.375)),
            (Channel::Density, p(-1.25)),
            (Channel::Energy, p(-0.75)),
            (Channel::Micro, Target::PowerLaw { slope: -0.875, tol: 0.10 }),
        ],
        Scenario::OneElectric => vec![
            (Channel::F, p(-0.25)),
            (Channel::E, p(-0.25)),
            (Channel::B, p(-0.375)),
            (Channel::Density, p(-0.75)),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// `log y` against `log t`.
    LogLog,
    /// `log y` against `t`.
    SemiLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Least-squares slope over samples with `t` in `window`.
pub fn fit_series(times: &[f64], values: &[f64], window: (f64, f64), mode: FitMode) -> Result<Fit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(&t, &y)| (t, y))
        .collect();
    if pts.len() < 8 {
        return Err(Error::TooFewSamples(pts.len()));
    }
    if let Some(&(t, y)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::ChannelDead(format!("value {y:e} at t = {t}")));
    }
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, y)| (if mode == FitMode::LogLog { t.ln() } else { t }, y.ln()))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xy.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok(Fit { slope, stderr, samples: xy.len() })
}

/// Fits one channel of a decay curve.
pub fn fit_exponent(curve: &DecayCurve, channel: Channel, window: (f64, f64), mode: FitMode) -> Result<Fit> {
    let v = curve
        .channel(channel)
        .ok_or_else(|| Error::ChannelDead(format!("channel {} not defined for {}", channel.name(), curve.scenario)))?;
    fit_series(&curve.times, v, window, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_fit_is_exact() {
        let t: Vec<f64> = (0..20).map(|k| 50.0 * 10f64.powf(k as f64 / 19.0)).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.75)).collect();
        let f = fit_series(&t, &y, (50.0, 500.0), FitMode::LogLog).unwrap();
        assert!((f.slope + 0.75).abs() < 1e-12 && f.stderr < 1e-12);
        assert!(matches!(fit_series(&t[..5], &y[..5], (0.0, 1e9), FitMode::LogLog), Err(Error::TooFewSamples(5))));
    }

    #[test]
    fn direction_rule_weights_and_pole() {
        let r = lebedev14();
        assert!((r.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-13);
        for p in &r.points {
            assert!((dot3(*p, *p) - 1.0).abs() < 1e-14);
            assert!(p[2].abs() < 0.99);
        }
        // degree-2 moment: integral of x^2 over the sphere is 4 pi / 3
        let m: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn stepper_matches_scalar_exponential() {
        let a = Mat::<c64>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64::new(-1.0, 2.0),
            (1, 1) => c64::new(-30.0, 0.0),
            _ => c64::new(0.0, 0.0),
        });
        let y0 = [c64::new(1.0, 0.0), c64::new(1.0, 0.0)];
        let out = propagate_stepper(a.as_ref(), &y0, &[0.0, 0.5, 2.0], 1e-12).unwrap();
        let want = (c64::new(-1.0, 2.0) * 2.0).exp();
        assert!((out[2][0] - want).norm() < 1e-9);
        assert!(out[2][1].norm() < 1e-9);
        assert_eq!(out[0][0], y0[0]);
    }
}
