//! Radial grids and quadrature, the logarithmic potential, the
//! variation-of-constants solver, weighted norms and slope fits.

mod grid;
mod operator;
mod voc;

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use grid::{make_grid, Parity, RadialGrid};
pub use operator::LegendreOperator;
pub use voc::{voc_solve, VocSolution};

use crate::error::{invalid, Error, Result};
use crate::spectral::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub alpha: f64,
}

impl WeightConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(Self { alpha })
    }
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

const PANEL_ORDER: usize = 16;

/// Composite Gauss rule on `[a, b]` in `s` with `panels` equal panels;
/// graded ends are refined geometrically toward the endpoint to absorb
/// logarithmic endpoint behaviour.
pub(crate) fn panel_rule(a: f64, b: f64, panels: usize, grade: (bool, bool)) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let mut out = Vec::with_capacity((panels + 24) * PANEL_ORDER);
    let mut push = |lo: f64, hi: f64| {
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + half * xi, half * wi));
        }
    };
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    if width <= 0.0 {
        return vec![];
    }
    for k in 0..panels {
        let (lo, hi) = (a + k as f64 * width, a + (k + 1) as f64 * width);
        let left = grade.0 && k == 0;
        let right = grade.1 && k == panels - 1;
        if !left && !right {
            push(lo, hi);
            continue;
        }
        // geometric subdivision with ratio 0.15 toward the graded end(s)
        let mut cuts = vec![lo, hi];
        let len = hi - lo;
        if left {
            let mut d = len * if right { 0.5 } else { 1.0 };
            for _ in 0..12 {
                d *= 0.15;
                cuts.push(lo + d);
            }
        }
        if right {
            let mut d = len * if left { 0.5 } else { 1.0 };
            for _ in 0..12 {
                d *= 0.15;
                cuts.push(hi - d);
            }
        }
        if left && right {
            cuts.push(lo + len / 2.0);
        }
        cuts.sort_by(|p, q| p.total_cmp(q));
        cuts.dedup();
        for c in cuts.windows(2) {
            push(c[0], c[1]);
        }
    }
    out
}

/// Number of panels so that `[a, b]` carries about twice the grid density.
pub(crate) fn doubled_panels(grid: &RadialGrid, a: f64, b: f64) -> usize {
    ((2.0 * grid.size as f64 * (b - a)) / PANEL_ORDER as f64).ceil() as usize
}

/// `F = f · 8/(1+t)²` at the nodes, so that `∫ f r dr = ∫ F dt`.
pub(crate) fn to_t_density(grid: &RadialGrid, f: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(grid.one_plus_t())
        .map(|(f, opt)| f * 8.0 / (opt * opt))
        .collect()
}

/// Radial part of the planar logarithmic potential,
/// `M(f)(r) = −log r ∫₀^r f s ds − ∫_r^∞ log s · f s ds`, which solves `−ΔM(f) = f`.
pub fn log_potential(f: &[f64], grid: &RadialGrid, r_eval: f64) -> Result<f64> {
    if f.len() != grid.size {
        return invalid("sample count does not match the grid");
    }
    if !(r_eval >= 0.0) {
        return invalid(format!("radius must be nonnegative, got {r_eval}"));
    }
    if f.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let norm = weighted_norm(f, grid, &WeightConfig::default(), NormKind::X)?;
    if norm.diverged {
        return Err(Error::NonIntegrable(
            "weighted X-norm diverges; f does not decay fast enough".into(),
        ));
    }
    let dens = to_t_density(grid, f);
    let s_r = grid.s_of_r(r_eval);
    let integrand = |s: f64, with_log: bool| {
        let (_, r, ..) = grid.point(s);
        let th = grid.theta_of_s(s);
        let g = grid.interp(&dens, s, Parity::Even) * th.sin() * grid.dtheta_of_s(s);
        if with_log {
            r.ln() * g
        } else {
            g
        }
    };
    let mut inner = 0.0;
    if s_r > 0.0 {
        for (s, w) in panel_rule(0.0, s_r, doubled_panels(grid, 0.0, s_r), (false, false)) {
            inner += w * integrand(s, false);
        }
    }
    let mut outer = 0.0;
    if s_r < 1.0 {
        for (s, w) in panel_rule(s_r, 1.0, doubled_panels(grid, s_r, 1.0), (s_r == 0.0, true)) {
            outer += w * integrand(s, true);
        }
    }
    let lead = if r_eval > 0.0 { -r_eval.ln() * inner } else { 0.0 };
    Ok(lead - outer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    X,
    YLower,
    Star,
    StarStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    /// Set when the far-field trend shows the continuum quantity is infinite;
    /// `value` is then `+∞`.
    pub diverged: bool,
}

impl NormValue {
    fn finite(value: f64) -> Self {
        Self { value, diverged: false }
    }
    fn infinite() -> Self {
        Self { value: f64::INFINITY, diverged: true }
    }
}

/// Log-log slope of `|q|` against `r` over the outermost decade of nodes.
fn far_field_exponent(grid: &RadialGrid, q: &[f64]) -> Option<f64> {
    let r_hi = grid.r_max();
    let pts: Vec<(f64, f64)> = grid
        .nodes_r
        .iter()
        .zip(q)
        .filter(|(r, q)| **r >= r_hi / 10.0 && **r > 1.0 && q.abs() > 0.0)
        .map(|(r, q)| (r.ln(), q.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    Some(least_squares_slope(&pts))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Planar integral `2π ∫ density r dr`; the far-field density per unit
/// `log r` is `density·r²`, whose power-law exponent decides convergence
/// and supplies the tail estimate beyond the last node.
fn planar_integral(grid: &RadialGrid, density: &[f64]) -> NormValue {
    let per_log: Vec<f64> = density.iter().zip(&grid.nodes_r).map(|(d, r)| d * r * r).collect();
    let body = 2.0 * PI * grid.integrate_r(density);
    match far_field_exponent(grid, &per_log) {
        Some(k) if k > -1e-2 => NormValue::infinite(),
        Some(k) => {
            let tail = 2.0 * PI * per_log[grid.size - 1].abs() / k.abs();
            NormValue::finite(body + tail)
        }
        None => NormValue::finite(body),
    }
}

fn sup_weighted(grid: &RadialGrid, weighted: &[f64]) -> NormValue {
    match far_field_exponent(grid, weighted) {
        Some(k) if k > 1e-2 => NormValue::infinite(),
        _ => NormValue::finite(weighted.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
    }
}

/// Weighted norms on radial samples (planar measure `2π r dr` for the
/// integral norms; integral norms are returned as square roots).
pub fn weighted_norm(
    f: &[f64],
    grid: &RadialGrid,
    cfg: &WeightConfig,
    which: NormKind,
) -> Result<NormValue> {
    if f.len() != grid.size {
        return invalid("sample count does not match the grid");
    }
    WeightConfig::new(cfg.alpha)?;
    let a = cfg.alpha;
    let r = &grid.nodes_r;
    let sqrt = |v: NormValue| NormValue { value: v.value.sqrt(), diverged: v.diverged };
    Ok(match which {
        NormKind::X => {
            let d: Vec<f64> =
                f.iter().zip(r).map(|(f, r)| (1.0 + r.powf(2.0 + a)) * f * f).collect();
            sqrt(planar_integral(grid, &d))
        }
        NormKind::YLower => sqrt(planar_integral(grid, &y_density(f, r, a))),
        NormKind::StarStar => {
            let q: Vec<f64> = f.iter().zip(r).map(|(f, r)| (1.0 + r).powf(2.0 + a) * f).collect();
            sup_weighted(grid, &q)
        }
        NormKind::Star => {
            let y = sqrt(planar_integral(grid, &y_density(f, r, a)));
            let q: Vec<f64> = f.iter().zip(r).map(|(f, r)| f / (2.0 + r).ln()).collect();
            let s = sup_weighted(grid, &q);
            NormValue { value: y.value.max(s.value), diverged: y.diverged || s.diverged }
        }
    })
}

fn y_density(f: &[f64], r: &[f64], a: f64) -> Vec<f64> {
    f.iter()
        .zip(r)
        .map(|(f, r)| f * f / (1.0 + r.powf(1.0 + a / 2.0)).powi(2))
        .collect()
}

/// Least-squares slope of `f` against `log r` over nodes with `r ∈ [lo, hi]`.
pub fn asymptotic_slope(f: &[f64], grid: &RadialGrid, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if f.len() != grid.size {
        return invalid("sample count does not match the grid");
    }
    if !(lo >= 100.0) || !(hi > lo) {
        return invalid(format!("slope window must satisfy 100 <= lo < hi, got [{lo}, {hi}]"));
    }
    if hi > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::OutsideSupport(hi));
    }
    let pts: Vec<(f64, f64)> = grid
        .nodes_r
        .iter()
        .zip(f)
        .filter(|(r, _)| **r >= lo && **r <= hi)
        .map(|(r, f)| (r.ln(), *f))
        .collect();
    if pts.len() < 8 {
        return Err(Error::IllConditioned(format!(
            "only {} nodes in window [{lo}, {hi}], need 8",
            pts.len()
        )));
    }
    Ok(least_squares_slope(&pts))
}

/// Default slope window: from `max(100, r_max/100)` to the outermost node.
pub fn default_slope_window(grid: &RadialGrid) -> (f64, f64) {
    ((grid.r_max() / 100.0).max(100.0), grid.r_max())
}

/// `∫₀^∞ Δw · (8−r²)/(8+r²) r dr`, evaluated after two integrations by
/// parts as `−64 ∫ (8−r²)/(8+r²)³ w r dr = −2 ∫₋₁¹ t w dt`.
pub fn k_orthogonality(w: &[f64], grid: &RadialGrid) -> f64 {
    -2.0 * grid
        .t_weights()
        .iter()
        .zip(&grid.nodes_t)
        .zip(w)
        .map(|((q, t), w)| q * t * w)
        .sum::<f64>()
}

/// Shortest round-trip float text, as used in every artifact.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// CSV with columns `t, r, <name>`.
pub fn field_csv(grid: &RadialGrid, name: &str, values: &[f64]) -> String {
    let mut out = format!("t,r,{name}\n");
    for ((t, r), v) in grid.nodes_t.iter().zip(&grid.nodes_r).zip(values) {
        let _ = writeln!(out, "{},{},{}", fmt_float(*t), fmt_float(*r), fmt_float(*v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn slope_examples() {
        let g = make_grid(400, 4.0).unwrap();
        let win = default_slope_window(&g);
        let c = vec![3.0; g.size];
        assert_abs_diff_eq!(asymptotic_slope(&c, &g, win).unwrap(), 0.0, epsilon = 1e-12);
        let wide = make_grid(800, 16.0).unwrap();
        let f: Vec<f64> = wide.nodes_r.iter().map(|r| -2.0 * r.ln() + 1.0 / (1.0 + r)).collect();
        let far = (1000.0, wide.r_max());
        assert_abs_diff_eq!(asymptotic_slope(&f, &wide, far).unwrap(), -2.0, epsilon = 1e-3);
        let f: Vec<f64> = g.nodes_r.iter().map(|r| -2.0 * r.ln()).collect();
        assert!(matches!(asymptotic_slope(&f, &g, (50.0, 900.0)), Err(Error::InvalidInput(_))));
        assert!(matches!(
            asymptotic_slope(&f, &g, (100.0, 2.0 * g.r_max())),
            Err(Error::OutsideSupport(_))
        ));
        let coarse = make_grid(40, 1.0).unwrap();
        let h = vec![0.0; 40];
        assert!(matches!(
            asymptotic_slope(&h, &coarse, (100.0, coarse.r_max())),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn k_constraint_examples() {
        let g = make_grid(400, 4.0).unwrap();
        let ones = vec![1.0; g.size];
        assert_abs_diff_eq!(k_orthogonality(&ones, &g), 0.0, epsilon = 1e-12);
        let t = g.nodes_t.clone();
        assert_abs_diff_eq!(k_orthogonality(&t, &g), -4.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn norms_zero_and_divergence() {
        let g = make_grid(200, 4.0).unwrap();
        let cfg = WeightConfig::default();
        let z = vec![0.0; g.size];
        for k in [NormKind::X, NormKind::YLower, NormKind::Star, NormKind::StarStar] {
            let v = weighted_norm(&z, &g, &cfg, k).unwrap();
            assert_eq!(v.value, 0.0);
            assert!(!v.diverged);
        }
        let one = vec![1.0; g.size];
        assert!(weighted_norm(&one, &g, &cfg, NormKind::StarStar).unwrap().diverged);
        let star = weighted_norm(&one, &g, &cfg, NormKind::Star).unwrap();
        assert!(!star.diverged && star.value.is_finite());
        assert!(WeightConfig::new(1.0).is_err());
    }

    #[test]
    fn panel_rule_integrates_log() {
        // ∫₀¹ log(x) dx = −1 with the left end graded
        let q: f64 = panel_rule(0.0, 1.0, 4, (true, false)).iter().map(|(x, w)| w * x.ln()).sum();
        assert_abs_diff_eq!(q, -1.0, epsilon = 1e-9);
    }
}
