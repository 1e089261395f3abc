//! The projected system for `(φ, ψ, L)` around the radial bubble `U_μ`,
//! its Newton corrector, branch tracing from the Legendre bifurcation
//! points, bifurcation detection on the trivial branch, and continuation
//! of the Jost–Wang pair away from the Cartan coupling.
//!
//! With `u = U_μ + (φ+ψ)/2`, `v = U_μ + (φ−ψ)/2` and `a = (φ+ψ)/2`,
//! `b = (φ−ψ)/2`, every planar row multiplied by `8/(1+t)²` becomes
//!
//! ```text
//! −Dφ − 2(e^a + e^b − 2) − 2Lt = 0
//! −Dψ − 2λ(e^a − e^b)        = 0,   λ = (2−μ)/(2+μ)
//! ```
//!
//! with `D w = ((1−t²)w_t)_t`, closed by `−2∫tφ dt = 0`.

mod branch;
mod cartan;
mod detect;
mod linalg;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use branch::{discrete_bifurcation, trace_branch, Branch, BranchOptions};
pub use cartan::{perturb_cartan, CartanOptions};
pub use detect::{detect_bifurcations, psi_block, Crossing};
pub use linalg::smallest_singular_pair;

use crate::closed_forms::liouville_log_t;
use crate::diagnostics::DiagnosticsReport;
use crate::error::{invalid, Error, Result};
use crate::radial_calculus::{LegendreOperator, RadialGrid};
use crate::spectral::coupling_ratio;

const EXP_GUARD: f64 = 50.0;
/// Ratio of the two smallest singular values below which Newton deflates.
const NEAR_KERNEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    pub mu: f64,
}

impl FieldPair {
    pub fn trivial(size: usize, mu: f64) -> Self {
        Self { phi: vec![0.0; size], psi: vec![0.0; size], l: 0.0, mu }
    }

    /// Shifted fields of an arbitrary pair: `φ = u + v − 2U_μ`, `ψ = u − v`.
    pub fn from_uv(u: &[f64], v: &[f64], mu: f64, grid: &RadialGrid) -> Self {
        let base = bubble(grid, mu);
        Self {
            phi: (0..grid.size).map(|i| u[i] + v[i] - 2.0 * base[i]).collect(),
            psi: (0..grid.size).map(|i| u[i] - v[i]).collect(),
            l: 0.0,
            mu,
        }
    }

    pub fn u(&self, grid: &RadialGrid) -> Vec<f64> {
        let base = bubble(grid, self.mu);
        (0..grid.size).map(|i| base[i] + 0.5 * (self.phi[i] + self.psi[i])).collect()
    }

    pub fn v(&self, grid: &RadialGrid) -> Vec<f64> {
        let base = bubble(grid, self.mu);
        (0..grid.size).map(|i| base[i] + 0.5 * (self.phi[i] - self.psi[i])).collect()
    }

    fn check(&self, grid: &RadialGrid) -> Result<()> {
        if self.phi.len() != grid.size || self.psi.len() != grid.size {
            return invalid("field length does not match the grid");
        }
        if !(self.mu > -2.0) {
            return invalid(format!("mu must exceed -2, got {}", self.mu));
        }
        Ok(())
    }
}

/// `U_μ` (δ = 1) on the nodes.
pub fn bubble(grid: &RadialGrid, mu: f64) -> Vec<f64> {
    grid.one_plus_t().iter().map(|&o| liouville_log_t(mu, o)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub fields: FieldPair,
    pub epsilon: f64,
    pub arclength: f64,
    pub newton_iterations: usize,
    pub diagnostics: Option<DiagnosticsReport>,
    /// Coefficients of `log r` growth of the correctors (Cartan runs only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_growth: Option<[f64; 2]>,
}

/// Residual of the projected system. `phi`/`psi` hold the planar rows on
/// nodes `0..N−1`; the closure rows at `t = −1` have no planar scaling and
/// are reported in compactified form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub closure: [f64; 2],
    pub k: f64,
}

impl ResidualVector {
    pub fn sup_norm(&self) -> f64 {
        self.phi
            .iter()
            .chain(&self.psi)
            .chain(&self.closure)
            .chain(std::iter::once(&self.k))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Grid-bound pieces of the projected system, reused across Newton steps.
#[derive(Debug, Clone)]
pub struct ProjectedSystem<'g> {
    pub grid: &'g RadialGrid,
    pub op: LegendreOperator,
}

struct Nonlinear {
    ea: Vec<f64>,
    eb: Vec<f64>,
    ma: Vec<f64>,
    mb: Vec<f64>,
}

impl<'g> ProjectedSystem<'g> {
    pub fn new(grid: &'g RadialGrid) -> Self {
        Self { grid, op: LegendreOperator::new(grid) }
    }

    pub fn size(&self) -> usize {
        self.grid.size
    }

    /// Unknowns `[φ, ψ, L]`.
    pub fn dim(&self) -> usize {
        2 * self.size() + 1
    }

    fn nonlinear(&self, s: &FieldPair) -> Result<Nonlinear> {
        let n = self.size();
        let mut nl = Nonlinear {
            ea: vec![0.0; n],
            eb: vec![0.0; n],
            ma: vec![0.0; n],
            mb: vec![0.0; n],
        };
        for i in 0..n {
            let a = 0.5 * (s.phi[i] + s.psi[i]);
            let b = 0.5 * (s.phi[i] - s.psi[i]);
            let worst = a.abs().max(b.abs());
            if !(worst <= EXP_GUARD) {
                return Err(Error::Overflow(worst));
            }
            nl.ea[i] = a.exp();
            nl.eb[i] = b.exp();
            nl.ma[i] = a.exp_m1();
            nl.mb[i] = b.exp_m1();
        }
        Ok(nl)
    }

    /// Compactified residual `[Fφ (N), Fψ (N), K]`.
    pub fn residual_t(&self, s: &FieldPair) -> Result<DVector<f64>> {
        s.check(self.grid)?;
        let n = self.size();
        let t = &self.grid.nodes_t;
        let nl = self.nonlinear(s)?;
        let lam = coupling_ratio(s.mu);
        let f_phi: Vec<f64> =
            (0..n).map(|i| 2.0 * (nl.ma[i] + nl.mb[i]) + 2.0 * s.l * t[i]).collect();
        let f_psi: Vec<f64> = (0..n).map(|i| 2.0 * lam * (nl.ma[i] - nl.mb[i])).collect();
        let (f_phi, f_psi) = (self.op.closure_rhs(&f_phi), self.op.closure_rhs(&f_psi));
        let (d_phi, d_psi) = (self.op.apply(&s.phi), self.op.apply(&s.psi));
        let mut out = DVector::zeros(self.dim());
        for i in 0..n {
            out[i] = -d_phi[i] - f_phi[i];
            out[n + i] = -d_psi[i] - f_psi[i];
        }
        out[2 * n] = crate::radial_calculus::k_orthogonality(&s.phi, self.grid);
        Ok(out)
    }

    /// Analytic Jacobian of [`Self::residual_t`] with respect to `[φ, ψ, L]`.
    pub fn jacobian(&self, s: &FieldPair) -> Result<DMatrix<f64>> {
        s.check(self.grid)?;
        let n = self.size();
        let t = &self.grid.nodes_t;
        let nl = self.nonlinear(s)?;
        let lam = coupling_ratio(s.mu);
        let mut j = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            let (st, row) = self.op.row(i);
            for k in 0..3 {
                j[(i, st + k)] -= row[k];
                j[(n + i, n + st + k)] -= row[k];
            }
        }
        // pointwise derivatives of the nonlinear terms, extrapolated on the closure row
        let ex = self.op.extrapolation();
        let mut add_local = |i: usize, node: usize, w: f64| {
            let (sum, diff) = (nl.ea[node] + nl.eb[node], nl.ea[node] - nl.eb[node]);
            j[(i, node)] -= w * sum;
            j[(i, n + node)] -= w * diff;
            j[(i, 2 * n)] -= w * 2.0 * t[node];
            j[(n + i, node)] -= w * lam * diff;
            j[(n + i, n + node)] -= w * lam * sum;
        };
        for i in 0..n - 1 {
            add_local(i, i, 1.0);
        }
        for (k, w) in ex.iter().enumerate() {
            add_local(n - 1, n - 3 + k, *w);
        }
        let tw = self.grid.t_weights();
        for i in 0..n {
            j[(2 * n, i)] = -2.0 * tw[i] * t[i];
        }
        Ok(j)
    }

    /// `∂F/∂μ`.
    pub fn mu_derivative(&self, s: &FieldPair) -> Result<DVector<f64>> {
        let n = self.size();
        let nl = self.nonlinear(s)?;
        let dlam = -4.0 / (2.0 + s.mu).powi(2);
        let f: Vec<f64> = (0..n).map(|i| -2.0 * dlam * (nl.ma[i] - nl.mb[i])).collect();
        let f = self.op.closure_rhs(&f);
        let mut out = DVector::zeros(self.dim());
        for i in 0..n {
            out[n + i] = f[i];
        }
        Ok(out)
    }

    pub fn pack(&self, s: &FieldPair) -> DVector<f64> {
        let n = self.size();
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            x[i] = s.phi[i];
            x[n + i] = s.psi[i];
        }
        x[2 * n] = s.l;
        x
    }

    pub fn unpack(&self, x: &DVector<f64>, mu: f64) -> FieldPair {
        let n = self.size();
        FieldPair {
            phi: x.rows(0, n).iter().copied().collect(),
            psi: x.rows(n, n).iter().copied().collect(),
            l: x[2 * n],
            mu,
        }
    }

    /// Lumped `L²(dt)` weights on `[φ, ψ, L]`: half the distance between
    /// neighbouring nodes (the ends at `t = ±1` included), unit weight on `L`.
    /// Unlike the quadrature weights these are positive at every node.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.size();
        let (omt, opt) = (self.grid.one_minus_t(), self.grid.one_plus_t());
        let cell: Vec<f64> = (0..n)
            .map(|i| {
                let upper = if i == 0 { 0.0 } else { 0.5 * (omt[i] - omt[i - 1]) };
                let lower = if i == n - 1 { opt[i] } else { 0.5 * (opt[i] - opt[i + 1]) };
                upper + lower
            })
            .collect();
        cell.iter().chain(&cell).copied().chain(std::iter::once(1.0)).collect()
    }
}

/// Residual of the projected system at `state`.
pub fn residual(state: &FieldPair, grid: &RadialGrid) -> Result<ResidualVector> {
    let sys = ProjectedSystem::new(grid);
    let r = sys.residual_t(state)?;
    let n = grid.size;
    let planar = |i: usize| grid.one_plus_t()[i].powi(2) / 8.0;
    Ok(ResidualVector {
        phi: (0..n - 1).map(|i| planar(i) * r[i]).collect(),
        psi: (0..n - 1).map(|i| planar(i) * r[n + i]).collect(),
        closure: [r[n - 1], r[2 * n - 1]],
        k: r[2 * n],
    })
}

pub fn jacobian(state: &FieldPair, grid: &RadialGrid) -> Result<DMatrix<f64>> {
    ProjectedSystem::new(grid).jacobian(state)
}

/// Least-squares multiplier implied by fields that need not solve the
/// system: the `L` making the φ-row orthogonal to `t` in `L²(dt)`.
pub fn estimate_multiplier(state: &FieldPair, grid: &RadialGrid) -> Result<f64> {
    let sys = ProjectedSystem::new(grid);
    let mut s = state.clone();
    s.l = 0.0;
    let r = sys.residual_t(&s)?;
    let tw = grid.t_weights();
    let t = &grid.nodes_t;
    let n = grid.size;
    // Fφ(L) = Fφ(0) − 2Lt on every row (closure extrapolation is exact for t)
    let num: f64 = (0..n).map(|i| tw[i] * t[i] * r[i]).sum();
    let den: f64 = (0..n).map(|i| tw[i] * t[i] * 2.0 * t[i]).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub state: FieldPair,
    pub iterations: usize,
    pub residual: f64,
    /// The Jacobian was numerically singular and the step was taken in the
    /// complement of its one-dimensional kernel.
    pub deflated: bool,
}

/// Newton iteration at fixed μ on `[φ, ψ, L]`; stops on the sup-norm of the
/// compactified residual.
pub fn newton_correct(
    state: &FieldPair,
    grid: &RadialGrid,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonReport> {
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let sys = ProjectedSystem::new(grid);
    let mut s = state.clone();
    let mut deflated = false;
    let mut force = None;
    let mut x = sys.pack(&s);
    for it in 0..=max_iter {
        let f = sys.residual_t(&s)?;
        let res = f.amax();
        if res <= tol {
            return Ok(NewtonReport { state: s, iterations: it, residual: res, deflated });
        }
        if it == max_iter || !res.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: res });
        }
        let j = sys.jacobian(&s)?;
        // Near a family of solutions (isolated singular value far below the
        // rest) plain Newton slides along the family; keep the kernel
        // coordinate of the guess instead.
        let near = *force.get_or_insert_with(|| {
            smallest_singular_pair(&j, &sys.weights())
                .map_or(true, |(s1, s2, _)| s1 < NEAR_KERNEL * s2)
        });
        let (dx, used) = linalg::solve_deflated(j, -f, near)?;
        deflated |= used;
        x += dx;
        s = sys.unpack(&x, s.mu);
    }
    unreachable!()
}
