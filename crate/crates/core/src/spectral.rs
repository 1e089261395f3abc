//! Legendre machinery and the linearized spectrum around the radial bubble.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radial_calculus::RadialGrid;

const T_SLACK: f64 = 1e-12;

fn check_t(t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + T_SLACK) {
        return invalid(format!("Legendre argument must lie in [-1, 1], got {t}"));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// `(P_n(t), P_{n-1}(t))` by the Bonnet recurrence, no range check.
pub(crate) fn legendre_pair(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, t);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

pub fn legendre_p(n: usize, t: f64) -> Result<f64> {
    let t = check_t(t)?;
    if t == 1.0 {
        return Ok(1.0);
    }
    Ok(legendre_pair(n, t).0)
}

/// `P_n'(t)`, with the endpoint limits `(±1)^{n+1} n(n+1)/2`.
pub fn legendre_p_deriv(n: usize, t: f64) -> Result<f64> {
    let t = check_t(t)?;
    let nn = n as f64;
    if (1.0 - t.abs()) < 1e-14 {
        let sign = if t > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        return Ok(sign * nn * (nn + 1.0) / 2.0);
    }
    let (p, pm1) = legendre_pair(n, t);
    Ok(nn * (t * p - pm1) / (t * t - 1.0))
}

/// Associated Legendre function with the `(−1)^m` phase kept:
/// `P_n^m(t) = (−1)^m (1−t²)^{m/2} dᵐ/dtᵐ P_n(t)`.
pub fn legendre_p_assoc(n: usize, m: usize, t: f64) -> Result<f64> {
    if m > n {
        return invalid(format!("order m = {m} exceeds degree n = {n}"));
    }
    let t = check_t(t)?;
    let s = (1.0 - t * t).max(0.0).sqrt();
    // P_m^m = (−1)^m (2m−1)!! s^m
    let mut pmm = 1.0;
    for k in 0..m {
        pmm *= -((2 * k + 1) as f64) * s;
    }
    if n == m {
        return Ok(pmm);
    }
    let mut p_prev = pmm;
    let mut p = t * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=n {
        let next = (t * (2 * l - 1) as f64 * p - (l + m - 1) as f64 * p_prev) / (l - m) as f64;
        p_prev = p;
        p = next;
    }
    Ok(p)
}

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, z);
            let dz = p / (nf * (z * p - pm1) / (z * z - 1.0));
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, z);
        let dp = nf * (z * p - pm1) / (z * z - 1.0);
        x[n - 1 - i] = z;
        x[i] = -z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `μ_n = 2(2 − n − n²)/(2 + n + n²)`, from exact integers with a single rounding.
pub fn bifurcation_mu(n: usize) -> f64 {
    let n = n as i128;
    let num = 2 * (2 - n - n * n);
    let den = 2 + n + n * n;
    num as f64 / den as f64
}

/// `λ(μ) = (2−μ)/(2+μ)`; the kernel condition reads `2λ = n(n+1)`.
pub fn coupling_ratio(mu: f64) -> f64 {
    (2.0 - mu) / (2.0 + mu)
}

/// Continuous mode index solving `n² + n = 2λ(μ)`.
pub fn mode_index(mu: f64) -> Option<f64> {
    if !(mu > -2.0) {
        return None;
    }
    let lam = coupling_ratio(mu);
    let disc = 1.0 + 8.0 * lam;
    if disc < 0.0 {
        return None;
    }
    Some((-1.0 + disc.sqrt()) / 2.0)
}

/// Integer `n` with `(2−μ)/(2+μ) = n(n+1)/2`, if any (tolerance 1e−9 on n).
pub fn eigencondition(mu: f64) -> Option<usize> {
    let x = mode_index(mu)?;
    let n = x.round();
    ((x - n).abs() <= 1e-9 && n >= 0.0).then_some(n as usize)
}

/// Nearest integer mode and its distance in index units.
pub fn nearest_mode(mu: f64) -> Option<(usize, f64)> {
    let x = mode_index(mu)?;
    let n = x.round().max(0.0);
    Some((n as usize, (x - n).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    RadialKernel,
    NonradialKernel,
    Scaling,
    Translation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    pub n: usize,
    pub mu_n: f64,
    pub multiplicity: usize,
    pub kind: ModeKind,
}

impl SpectralMode {
    pub fn new(n: usize) -> Self {
        Self { n, mu_n: bifurcation_mu(n), multiplicity: 2 * n + 1, kind: ModeKind::RadialKernel }
    }

    /// Radial eigenfunction `P_n(t(r))` on a grid.
    pub fn radial_profile(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        kernel_radial(self.n, grid)
    }
}

/// Modes `1..=max_n`, aggregated per index.
pub fn spectrum(max_n: usize) -> Vec<SpectralMode> {
    (1..=max_n).map(SpectralMode::new).collect()
}

pub fn kernel_radial(n: usize, grid: &RadialGrid) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("the constant mode n = 0 is not a bifurcation direction");
    }
    grid.nodes_t.iter().map(|&t| legendre_p(n, t)).collect()
}

pub fn scaling_mode(grid: &RadialGrid) -> Vec<f64> {
    grid.nodes_t.clone()
}

/// Nonradial kernel member `P_n^m(t(r)) cos(mθ)`; evaluated only, never continued.
pub fn kernel_nonradial(n: usize, m: usize, r: f64, angle: f64) -> Result<f64> {
    let t = (8.0 - r * r) / (8.0 + r * r);
    Ok(legendre_p_assoc(n, m, t)? * (m as f64 * angle).cos())
}

/// Translation modes `(r cos θ, r sin θ)/(8 + r²)`.
pub fn translation_modes(r: f64, angle: f64) -> [f64; 2] {
    let q = 8.0 + r * r;
    [r * angle.cos() / q, r * angle.sin() / q]
}
