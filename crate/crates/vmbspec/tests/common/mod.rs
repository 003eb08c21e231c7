//! Independent quadrature oracles shared by integration tests and the
//! acceptance harness. Nothing here calls the closed-form reductions of the
//! library.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

pub fn maxwellian(v: [f64; 3]) -> f64 {
    (2.0 * PI).powf(-1.5) * (-0.5 * dot(v, v)).exp()
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * b[0], a[1] + t * b[1], a[2] + t * b[2]]
}

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
    let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
    rule.as_node_weight_pairs().into_iter().map(|(x, w)| (m + h * x, w * h)).collect()
}

/// Orthonormal `(e1, e2)` completing the unit vector `u`.
fn complete(u: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let t = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = dot(t, u);
    let e1 = add(t, u, -d);
    let n = dot(e1, e1).sqrt();
    let e1 = e1.map(|x| x / n);
    let e2 = [u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]];
    (e1, e2)
}

/// Product rule on the unit sphere with polar axis `axis`: Gauss-Legendre in
/// `cos theta` on `[-1, 0]` and `[0, 1]` separately, trapezoid in `phi`.
/// Weights sum to `4 pi`. Returns `(omega, cos theta, weight)`.
pub fn sphere(axis: [f64; 3], n_theta: usize, n_phi: usize) -> Vec<([f64; 3], f64, f64)> {
    let (e1, e2) = complete(axis);
    let mut out = Vec::with_capacity(2 * n_theta * n_phi);
    for (a, b) in [(-1.0, 0.0), (0.0, 1.0)] {
        for (c, wc) in legendre(n_theta, a, b) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..n_phi {
                let p = 2.0 * PI * k as f64 / n_phi as f64;
                let w: [f64; 3] = std::array::from_fn(|i| c * axis[i] + s * (p.cos() * e1[i] + p.sin() * e2[i]));
                out.push((w, c, wc * 2.0 * PI / n_phi as f64));
            }
        }
    }
    out
}

/// Resolution of the 5-D oracles.
#[derive(Clone, Copy, Debug)]
pub struct OracleRes {
    pub radial: usize,
    pub r_max: f64,
    pub sigma: (usize, usize),
    pub omega: (usize, usize),
}

impl Default for OracleRes {
    fn default() -> Self {
        Self { radial: 32, r_max: 16.0, sigma: (12, 24), omega: (8, 16) }
    }
}

/// Polar rule for `v* = v + r sigma`: `(v*, sigma, r, weight incl. r^2)`.
fn polar(v: [f64; 3], res: &OracleRes) -> Vec<([f64; 3], [f64; 3], f64, f64)> {
    let rr = legendre(res.radial, 0.0, dot(v, v).sqrt() + res.r_max);
    let ss = sphere([0.0, 0.0, 1.0], res.sigma.0, res.sigma.1);
    let mut out = Vec::with_capacity(rr.len() * ss.len());
    for &(r, wr) in &rr {
        for &(sg, _, ws) in &ss {
            out.push((add(v, sg, r), sg, r, wr * ws * r * r));
        }
    }
    out
}

/// `nu(v) = int int |(v - v*) . omega| M(v*) d omega dv*` by 5-D quadrature.
pub fn nu_defining(v: [f64; 3], res: &OracleRes) -> f64 {
    let mut total = 0.0;
    for (vs, sg, r, w) in polar(v, res) {
        let m = maxwellian(vs);
        let mut ang = 0.0;
        for (_, c, wo) in sphere(sg, res.omega.0, res.omega.1) {
            ang += wo * (r * c).abs();
        }
        total += w * m * ang;
    }
    total
}

/// `(K g)(v)` and `(K1 g)(v)` from the collision integral with
/// `v' = v - [(v - v*) . omega] omega`, `v'* = v* + [(v - v*) . omega] omega`:
///
/// `K g  = int int B sqrt(M*) (sqrt(M'*) g(v') + sqrt(M') g(v'*)) - int int B sqrt(M) sqrt(M*) g(v*)`,
/// `K1 g = int int B sqrt(M*) sqrt(M'*) g(v')`, with `B = |(v - v*) . omega|`.
pub fn k_defining(v: [f64; 3], g: &dyn Fn([f64; 3]) -> f64, res: &OracleRes) -> (f64, f64) {
    let sm = |x: [f64; 3]| maxwellian(x).sqrt();
    let smv = sm(v);
    let (mut k, mut k1) = (0.0, 0.0);
    for (vs, sg, r, w) in polar(v, res) {
        let sms = sm(vs);
        let gs = g(vs);
        let (mut gain1, mut gain2, mut loss) = (0.0, 0.0, 0.0);
        // u = v - v* = -r sigma, so u . omega = -r cos(theta) about the axis sigma
        for (om, c, wo) in sphere(sg, res.omega.0, res.omega.1) {
            let un = -r * c;
            let b = un.abs();
            let vp = add(v, om, -un);
            let vsp = add(vs, om, un);
            gain1 += wo * b * sm(vsp) * g(vp);
            gain2 += wo * b * sm(vp) * g(vsp);
            loss += wo * b;
        }
        k += w * sms * (gain1 + gain2 - smv * gs * loss);
        k1 += w * sms * gain1;
    }
    (k, k1)
}

/// `int k(v, w) g(w) dw` with the closed-form kernels, integrated in polar
/// coordinates about `v` so the diagonal singularity is resolved.
pub fn k_resolved(v: [f64; 3], g: &dyn Fn([f64; 3]) -> f64, radial: usize, sigma: (usize, usize)) -> (f64, f64) {
    let res = OracleRes { radial, sigma, ..OracleRes::default() };
    let (mut k, mut k1) = (0.0, 0.0);
    for (w, _, _, wt) in polar(v, &res) {
        let gw = g(w);
        k += wt * vmbspec::collision::kernel_k(v, w).unwrap() * gw;
        k1 += wt * vmbspec::collision::kernel_k1(v, w).unwrap() * gw;
    }
    (k, k1)
}

/// Smooth, anisotropic test function.
pub fn test_gaussian(w: [f64; 3]) -> f64 {
    (-dot(w, w) / 4.0 - 0.3 * w[0] + 0.2 * w[1]).exp()
}

/// Deterministic validation nodes: `count` points with `|v| <= 2.5`.
pub fn validation_nodes(count: usize) -> Vec<[f64; 3]> {
    (0..count)
        .map(|k| {
            let t = k as f64 + 0.5;
            let z = 1.0 - 2.0 * t / count as f64;
            let p = t * PI * (3.0 - 5f64.sqrt());
            let rad = 0.3 + 2.2 * ((k * 7) % count) as f64 / count as f64;
            let s = (1.0 - z * z).sqrt();
            [rad * s * p.cos(), rad * s * p.sin(), rad * z]
        })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
