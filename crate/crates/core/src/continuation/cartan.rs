//! Continuation of the radial Jost–Wang pair from `μ = −1` in μ.
//!
//! With `u = u_JW + w_u`, `v = v_JW + w_v` the compactified equations are
//!
//! ```text
//! −D w_u = 2A(e^{w_u} − 1) + μB(e^{w_v} − 1) + (μ+1)B,   A = 8e^{u_JW}/(1+t)²
//! ```
//!
//! and symmetrically for `w_v`. The correctors grow like `log r`, so each is
//! split as `w = cℓ + w̃` with `ℓ = ½ ln(2/(1+t))` (`Dℓ = ½`, `ℓ ~ log r`)
//! and `w̃` bounded; the coefficients `c` are unknowns and `w̃(0) = 0` pins
//! the constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::solve_deflated;
use super::{BranchState, FieldPair};
use crate::closed_forms::{jostwang_eval, JostWangParams};
use crate::diagnostics::{diagnose, DiagnosticsOptions};
use crate::error::{invalid, Error, Result};
use crate::radial_calculus::{LegendreOperator, RadialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub diagnostics: Option<DiagnosticsOptions>,
}

impl Default for CartanOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 20,
            diagnostics: Some(DiagnosticsOptions { expect_quantized: false, ..Default::default() }),
        }
    }
}

struct Cartan<'g> {
    grid: &'g RadialGrid,
    op: LegendreOperator,
    u0: Vec<f64>,
    v0: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    ell: Vec<f64>,
}

impl<'g> Cartan<'g> {
    fn new(p: &JostWangParams, grid: &'g RadialGrid) -> Result<Self> {
        let n = grid.size;
        let mut u0 = vec![0.0; n];
        let mut v0 = vec![0.0; n];
        for i in 0..n {
            let e = jostwang_eval(p, grid.nodes_r[i])?;
            u0[i] = e.u.value;
            v0[i] = e.v.value;
        }
        let opt = grid.one_plus_t();
        let a = (0..n).map(|i| 8.0 * u0[i].exp() / (opt[i] * opt[i])).collect();
        let b = (0..n).map(|i| 8.0 * v0[i].exp() / (opt[i] * opt[i])).collect();
        let ell = opt.iter().map(|o| 0.5 * (std::f64::consts::LN_2 - o.ln())).collect();
        Ok(Self { grid, op: LegendreOperator::new(grid), u0, v0, a, b, ell })
    }

    fn size(&self) -> usize {
        self.grid.size
    }

    /// Full correctors `(w_u, w_v)` from `[w̃_u, c_u, w̃_v, c_v]`.
    fn correctors(&self, x: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.size();
        let (cu, cv) = (x[n], x[2 * n + 1]);
        let wu = (0..n).map(|i| cu * self.ell[i] + x[i]).collect();
        let wv = (0..n).map(|i| cv * self.ell[i] + x[n + 1 + i]).collect();
        (wu, wv)
    }

    fn residual(&self, x: &DVector<f64>, mu: f64) -> DVector<f64> {
        let n = self.size();
        let (wu, wv) = self.correctors(x);
        let mut out = DVector::zeros(2 * n + 2);
        for (blk, (own, other, w_own, w_other)) in
            [(&self.a, &self.b, &wu, &wv), (&self.b, &self.a, &wv, &wu)].into_iter().enumerate()
        {
            let off = blk * (n + 1);
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    2.0 * own[i] * w_own[i].exp_m1()
                        + mu * other[i] * w_other[i].exp_m1()
                        + (mu + 1.0) * other[i]
                })
                .collect();
            let rhs = self.op.closure_rhs(&rhs);
            let tilde: Vec<f64> = (0..n).map(|i| x[off + i]).collect();
            let d = self.op.apply(&tilde);
            let c = x[off + n];
            for i in 0..n {
                out[off + i] = -d[i] - 0.5 * c - rhs[i];
            }
            out[off + n] = x[off];
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>, mu: f64) -> DMatrix<f64> {
        let n = self.size();
        let (wu, wv) = self.correctors(x);
        let ex = self.op.extrapolation();
        let mut j = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        for (blk, (own, other, w_own, w_other)) in
            [(&self.a, &self.b, &wu, &wv), (&self.b, &self.a, &wv, &wu)].into_iter().enumerate()
        {
            let off = blk * (n + 1);
            let oth = (1 - blk) * (n + 1);
            for i in 0..n {
                let (st, row) = self.op.row(i);
                for k in 0..3 {
                    j[(off + i, off + st + k)] -= row[k];
                }
                j[(off + i, off + n)] -= 0.5;
            }
            let mut local = |i: usize, node: usize, wt: f64| {
                let d_own = 2.0 * own[node] * w_own[node].exp();
                let d_other = mu * other[node] * w_other[node].exp();
                j[(off + i, off + node)] -= wt * d_own;
                j[(off + i, off + n)] -= wt * d_own * self.ell[node];
                j[(off + i, oth + node)] -= wt * d_other;
                j[(off + i, oth + n)] -= wt * d_other * self.ell[node];
            };
            for i in 0..n - 1 {
                local(i, i, 1.0);
            }
            for (k, wt) in ex.iter().enumerate() {
                local(n - 1, n - 3 + k, *wt);
            }
            j[(off + n, off)] = 1.0;
        }
        j
    }

    fn newton(&self, mut x: DVector<f64>, mu: f64, tol: f64, max_iter: usize) -> Result<(DVector<f64>, usize)> {
        for it in 0..=max_iter {
            let f = self.residual(&x, mu);
            let res = f.amax();
            if res <= tol {
                return Ok((x, it));
            }
            if it == max_iter || !res.is_finite() {
                return Err(Error::NonConvergence { iterations: it, residual: res });
            }
            let (dx, _) = solve_deflated(self.jacobian(&x, mu), -f, false)?;
            x += dx;
        }
        unreachable!()
    }

    fn state(&self, x: &DVector<f64>, mu: f64, iterations: usize, opts: &CartanOptions) -> Result<BranchState> {
        let n = self.size();
        let (wu, wv) = self.correctors(x);
        let u: Vec<f64> = (0..n).map(|i| self.u0[i] + wu[i]).collect();
        let v: Vec<f64> = (0..n).map(|i| self.v0[i] + wv[i]).collect();
        let diagnostics = match &opts.diagnostics {
            Some(o) => Some(diagnose(&u, &v, mu, 0.0, self.grid, o)?),
            None => None,
        };
        Ok(BranchState {
            fields: FieldPair::from_uv(&u, &v, mu, self.grid),
            epsilon: mu + 1.0,
            arclength: mu + 1.0,
            newton_iterations: iterations,
            diagnostics,
            log_growth: Some([x[n], x[2 * n + 1]]),
        })
    }
}

/// Natural-parameter continuation in μ from the Jost–Wang pair at `μ = −1`
/// to `mu_target` in `steps` equal steps (halved on Newton failure).
/// The first returned state is the unperturbed pair.
pub fn perturb_cartan(
    p: &JostWangParams,
    mu_target: f64,
    steps: usize,
    grid: &RadialGrid,
    opts: &CartanOptions,
) -> Result<Vec<BranchState>> {
    if !(mu_target > -2.0 && mu_target < 2.0) || steps == 0 {
        return invalid(format!("need -2 < mu_target < 2 and steps > 0, got {mu_target}, {steps}"));
    }
    let sys = Cartan::new(p, grid)?;
    let n = grid.size;
    let mut x = DVector::zeros(2 * n + 2);
    let mut mu = -1.0;
    let mut out = vec![sys.state(&x, mu, 0, opts)?];
    if mu_target == -1.0 {
        return Ok(out);
    }
    let dmu0 = (mu_target + 1.0) / steps as f64;
    let mut dmu = dmu0;
    let mut prev: Option<(DVector<f64>, f64)> = None;
    while (mu_target - mu) * dmu0.signum() > 1e-14 {
        let step = if (mu_target - mu).abs() <= dmu.abs() * (1.0 + 1e-9) { mu_target - mu } else { dmu };
        let next = mu + step;
        let guess = match &prev {
            Some((xp, mp)) => &x + (&x - xp) * (step / (mu - mp)),
            None => x.clone(),
        };
        match sys.newton(guess, next, opts.tol, opts.max_newton) {
            Ok((xn, iters)) => {
                out.push(sys.state(&xn, next, iters, opts)?);
                prev = Some((std::mem::replace(&mut x, xn), mu));
                mu = next;
                dmu = (2.0 * dmu).abs().min(dmu0.abs()) * dmu0.signum();
            }
            Err(Error::InvalidInput(m)) => return Err(Error::InvalidInput(m)),
            Err(e) => {
                dmu /= 2.0;
                if dmu.abs() < dmu0.abs() / 1024.0 {
                    return Err(match e {
                        Error::NonConvergence { .. } => e,
                        _ => Error::StepUnderflow(dmu.abs()),
                    });
                }
            }
        }
    }
    Ok(out)
}
