use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::spectral::gauss_legendre;

const SQRT8: f64 = 2.828_427_124_746_190_3;

/// How a sampled function continues past the ends of the computational
/// interval `s ∈ [0, 1]`. The node map is odd about both ends, so smooth
/// functions of `t` are even there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    /// No symmetry assumed: stencils are shifted inside the node range.
    OneSided,
}

/// Compactified radial mesh.
///
/// Nodes are `t_i = cos θ(s_i)` with `s_i = i/(N − ½)` and
/// `θ(s) = πs + c·sin(πs)`, `c = (stretch − 1)/(stretch + 1)`, so node 0 is
/// `t = 1` (`r = 0`) and `t = −1` sits half a cell past the last node.
/// `stretch` is the ratio of the θ-spacing at `r = 0` to that at `r = ∞`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub nodes_t: Vec<f64>,
    pub nodes_r: Vec<f64>,
    /// Weights for `∫₀^∞ f(r) r dr`.
    pub quad_weights: Vec<f64>,
    pub size: usize,
    pub stretch: f64,
    h: f64,
    c: f64,
    s: Vec<f64>,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
    one_minus_t: Vec<f64>,
    one_plus_t: Vec<f64>,
    s_weights: Vec<f64>,
    t_weights: Vec<f64>,
}

/// Integrals over `[a, b]` of the Lagrange basis on `nodes`.
pub(crate) fn lagrange_integral_weights(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    let (x, w) = gauss_legendre(nodes.len() + 1);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut out = vec![0.0; nodes.len()];
    for (xq, wq) in x.iter().zip(&w) {
        let y = mid + half * xq;
        for (j, o) in out.iter_mut().enumerate() {
            let mut l = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != j {
                    l *= (y - xm) / (nodes[j] - xm);
                }
            }
            *o += half * wq * l;
        }
    }
    out
}

/// Lagrange basis values and first derivatives at `x` for integer nodes `j0..j0+p`.
fn lagrange_basis(j0: isize, p: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..p).map(|k| (j0 + k as isize) as f64).collect();
    let mut l = vec![0.0; p];
    let mut dl = vec![0.0; p];
    for j in 0..p {
        let mut prod = 1.0;
        let mut deriv = 0.0;
        for m in 0..p {
            if m == j {
                continue;
            }
            let inv = 1.0 / (xs[j] - xs[m]);
            // product rule over the running product
            deriv = deriv * (x - xs[m]) * inv + prod * inv;
            prod *= (x - xs[m]) * inv;
        }
        l[j] = prod;
        dl[j] = deriv;
    }
    (l, dl)
}

const STENCIL: usize = 8;

/// Six-point composite panel weights for `[s_k, s_{k+1}]` (nodes k−2..k+3).
const PANEL: [f64; 6] = [
    11.0 / 1440.0,
    -93.0 / 1440.0,
    802.0 / 1440.0,
    802.0 / 1440.0,
    -93.0 / 1440.0,
    11.0 / 1440.0,
];
const HALF_PANEL_NODES: [f64; 6] = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

pub fn make_grid(size: usize, stretch: f64) -> Result<RadialGrid> {
    if size < 16 {
        return invalid(format!("grid size must be at least 16, got {size}"));
    }
    if !(stretch > 0.0) || !stretch.is_finite() {
        return invalid(format!("stretch must be positive, got {stretch}"));
    }
    let n = size;
    let h = 1.0 / (n as f64 - 0.5);
    let c = (stretch - 1.0) / (stretch + 1.0);
    let s: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let theta: Vec<f64> = s.iter().map(|&s| PI * s + c * (PI * s).sin()).collect();
    let dtheta: Vec<f64> = s.iter().map(|&s| PI * (1.0 + c * (PI * s).cos())).collect();
    let half_sin: Vec<f64> = theta.iter().map(|th| (th / 2.0).sin()).collect();
    let half_cos: Vec<f64> = theta.iter().map(|th| (th / 2.0).cos()).collect();
    let one_minus_t: Vec<f64> = half_sin.iter().map(|x| 2.0 * x * x).collect();
    let one_plus_t: Vec<f64> = half_cos.iter().map(|x| 2.0 * x * x).collect();
    let nodes_t: Vec<f64> = theta.iter().map(|th| th.cos()).collect();
    let nodes_r: Vec<f64> = theta.iter().map(|th| SQRT8 * (th / 2.0).tan()).collect();

    let mut grid = RadialGrid {
        nodes_t,
        nodes_r,
        quad_weights: vec![],
        size,
        stretch,
        h,
        c,
        s,
        theta,
        dtheta,
        one_minus_t,
        one_plus_t,
        s_weights: vec![],
        t_weights: vec![],
    };
    grid.s_weights = grid.build_s_weights();
    grid.t_weights = (0..n)
        .map(|i| grid.s_weights[i] * grid.theta[i].sin() * grid.dtheta[i])
        .collect();
    grid.quad_weights = (0..n)
        .map(|i| grid.t_weights[i] * 8.0 / (grid.one_plus_t[i] * grid.one_plus_t[i]))
        .collect();
    Ok(grid)
}

impl RadialGrid {
    /// Node spacing in the computational coordinate.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn r_max(&self) -> f64 {
        self.nodes_r[self.size - 1]
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dtheta_ds(&self) -> &[f64] {
        &self.dtheta
    }

    pub fn one_minus_t(&self) -> &[f64] {
        &self.one_minus_t
    }

    pub fn one_plus_t(&self) -> &[f64] {
        &self.one_plus_t
    }

    /// Weights for `∫₋₁¹ F(t) dt` with `F` smooth in `t`.
    pub fn t_weights(&self) -> &[f64] {
        &self.t_weights
    }

    /// Weights for `∫₀¹ g(s) ds`, `g` odd about both ends.
    pub fn s_weights(&self) -> &[f64] {
        &self.s_weights
    }

    pub fn theta_of_s(&self, s: f64) -> f64 {
        PI * s + self.c * (PI * s).sin()
    }

    pub fn dtheta_of_s(&self, s: f64) -> f64 {
        PI * (1.0 + self.c * (PI * s).cos())
    }

    pub fn s_of_theta(&self, theta: f64) -> f64 {
        let mut s = theta / PI;
        for _ in 0..60 {
            let ds = (self.theta_of_s(s) - theta) / self.dtheta_of_s(s);
            s -= ds;
            if ds.abs() < 1e-16 {
                break;
            }
        }
        s.clamp(0.0, 1.0)
    }

    pub fn s_of_r(&self, r: f64) -> f64 {
        self.s_of_theta(2.0 * (r / SQRT8).atan())
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        self.s_of_theta(t.clamp(-1.0, 1.0).acos())
    }

    /// `(t, r, 1−t, 1+t)` at computational coordinate `s`.
    pub fn point(&self, s: f64) -> (f64, f64, f64, f64) {
        let th = self.theta_of_s(s);
        let (hs, hc) = ((th / 2.0).sin(), (th / 2.0).cos());
        (th.cos(), SQRT8 * hs / hc, 2.0 * hs * hs, 2.0 * hc * hc)
    }

    fn ghost(&self, j: isize, parity: Parity) -> (usize, f64) {
        let n = self.size as isize;
        let sign = if parity == Parity::Odd { -1.0 } else { 1.0 };
        if j < 0 {
            ((-j) as usize, sign)
        } else if j >= n {
            ((2 * n - 1 - j) as usize, sign)
        } else {
            (j as usize, 1.0)
        }
    }

    fn stencil(&self, s: f64, parity: Parity) -> (isize, f64) {
        let x = (s / self.h).clamp(0.0, (self.size as f64) - 0.5);
        let half = (STENCIL / 2) as isize;
        let mut j0 = x.floor() as isize - half + 1;
        if parity == Parity::OneSided {
            j0 = j0.clamp(0, self.size as isize - STENCIL as isize);
        }
        (j0, x)
    }

    /// Lagrange interpolation (8 points in `s`) of nodal samples.
    pub fn interp(&self, y: &[f64], s: f64, parity: Parity) -> f64 {
        let (j0, x) = self.stencil(s, parity);
        let (l, _) = lagrange_basis(j0, STENCIL, x);
        l.iter()
            .enumerate()
            .map(|(k, lk)| {
                let (idx, sg) = self.ghost(j0 + k as isize, parity);
                lk * sg * y[idx]
            })
            .sum()
    }

    /// Derivative in `s` of the interpolant.
    pub fn interp_ds(&self, y: &[f64], s: f64, parity: Parity) -> f64 {
        let (j0, x) = self.stencil(s, parity);
        let (_, dl) = lagrange_basis(j0, STENCIL, x);
        dl.iter()
            .enumerate()
            .map(|(k, dk)| {
                let (idx, sg) = self.ghost(j0 + k as isize, parity);
                dk * sg * y[idx]
            })
            .sum::<f64>()
            / self.h
    }

    /// Composite six-point rule on the odd extension. The last node is half a
    /// cell from `s = 1`, so the final panel is a half interval.
    fn build_s_weights(&self) -> Vec<f64> {
        let n = self.size;
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            for (m, wm) in PANEL.iter().enumerate() {
                let (idx, sg) = self.ghost(k as isize - 2 + m as isize, Parity::Odd);
                w[idx] += sg * wm * self.h;
            }
        }
        let last = lagrange_integral_weights(&HALF_PANEL_NODES, 0.0, 0.5);
        for (m, wm) in last.iter().enumerate() {
            let (idx, sg) = self.ghost(n as isize - 3 + m as isize, Parity::Odd);
            w[idx] += sg * wm * self.h;
        }
        w
    }

    /// Running integrals `∫₀^{s_i} g ds` at every node, plus the total to `s = 1`,
    /// for `g` odd about both ends.
    pub fn cumulative_s(&self, g: &[f64]) -> (Vec<f64>, f64) {
        let n = self.size;
        let mut out = vec![0.0; n];
        let val = |j: isize| {
            let (idx, sg) = self.ghost(j, Parity::Odd);
            sg * g[idx]
        };
        for k in 0..n - 1 {
            let piece: f64 =
                PANEL.iter().enumerate().map(|(m, wm)| wm * val(k as isize - 2 + m as isize)).sum();
            out[k + 1] = out[k] + piece * self.h;
        }
        let last = lagrange_integral_weights(&HALF_PANEL_NODES, 0.0, 0.5);
        let tail: f64 =
            last.iter().enumerate().map(|(m, wm)| wm * val(n as isize - 3 + m as isize)).sum();
        let total = out[n - 1] + tail * self.h;
        (out, total)
    }

    /// `∫₀^∞ f r dr` with the grid weights.
    pub fn integrate_r(&self, f: &[f64]) -> f64 {
        self.quad_weights.iter().zip(f).map(|(w, f)| w * f).sum()
    }

    /// `∫₋₁¹ F dt` with the grid weights.
    pub fn integrate_t(&self, f: &[f64]) -> f64 {
        self.t_weights.iter().zip(f).map(|(w, f)| w * f).sum()
    }

    /// Gauss–Legendre rule with `m` nodes on `[a, b]` in `s`, returned as
    /// `(s, weight)` pairs — an independent node family for cross-checks.
    pub fn gauss_in_s(&self, m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(m);
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        x.iter().zip(&w).map(|(x, w)| (mid + half * x, half * w)).collect()
    }
}
