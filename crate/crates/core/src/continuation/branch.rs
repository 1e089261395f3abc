use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::solve_deflated;
use super::{BranchState, FieldPair, ProjectedSystem};
use crate::diagnostics::{diagnose, DiagnosticsOptions};
use crate::error::{invalid, Error, Result};
use crate::radial_calculus::{LegendreOperator, RadialGrid};
use crate::spectral::legendre_p;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOptions {
    pub tol: f64,
    pub max_newton: usize,
    /// Run the diagnostics on every accepted state.
    pub diagnostics: Option<DiagnosticsOptions>,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton: 12, diagnostics: Some(DiagnosticsOptions::default()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub n: usize,
    /// Discrete bifurcation value on this grid.
    pub mu_onset: f64,
    /// States ordered by ε, from `−eps_max` to `+eps_max`.
    pub states: Vec<BranchState>,
}

/// Bifurcation value of the discretized ψ-block near mode `n` and its
/// kernel vector (positive at `t = 1`, unit `L²(dt)` norm).
///
/// The ψ-block at the trivial state is `−D − 2λM`, with `M` the identity
/// except for the closure row, so this is the generalized eigenproblem
/// `−D v = κ M v` solved by Rayleigh-quotient iteration from `κ = n(n+1)`.
pub fn discrete_bifurcation(n: usize, grid: &RadialGrid) -> Result<(f64, Vec<f64>)> {
    if n == 0 {
        return invalid("mode 0 does not bifurcate");
    }
    let size = grid.size;
    let op = LegendreOperator::new(grid);
    let mut a = DMatrix::zeros(size, size);
    for i in 0..size {
        let (st, row) = op.row(i);
        for k in 0..3 {
            a[(i, st + k)] = -row[k];
        }
    }
    let mut m = DMatrix::identity(size, size);
    let ex = op.extrapolation();
    m[(size - 1, size - 1)] = 0.0;
    for k in 0..3 {
        m[(size - 1, size - 3 + k)] = ex[k];
    }
    let mut x = DVector::from_iterator(
        size,
        grid.nodes_t.iter().map(|&t| legendre_p(n, t)).collect::<Result<Vec<_>>>()?,
    );
    let mut kappa = (n * (n + 1)) as f64;
    for _ in 0..30 {
        let mx = &m * &x;
        let ax = &a * &x;
        let k_new = mx.dot(&ax) / mx.dot(&mx);
        let res = (&ax - &mx * k_new).norm() / ax.norm().max(1e-300);
        kappa = k_new;
        if res < 1e-13 {
            break;
        }
        let shifted = &a - &m * kappa;
        match shifted.lu().solve(&mx) {
            Some(y) if y.iter().all(|v| v.is_finite()) => x = y.normalize(),
            _ => break,
        }
    }
    let tw = grid.t_weights();
    let norm = (0..size).map(|i| tw[i] * x[i] * x[i]).sum::<f64>().sqrt();
    let sign = if x[0] < 0.0 { -1.0 } else { 1.0 };
    let v = x.iter().map(|v| sign * v / norm).collect();
    let lam = kappa / 2.0;
    Ok((2.0 * (1.0 - lam) / (1.0 + lam), v))
}

/// Augmented state `[φ, ψ, L, μ]` with the `S` inner product
/// (`L²(dt)` on the fields, unit weight on `L` and `μ`).
struct Tracer<'a, 'g> {
    sys: &'a ProjectedSystem<'g>,
    p: Vec<f64>,
    p_norm2: f64,
    weights: Vec<f64>,
    opts: &'a BranchOptions,
}

enum Constraint<'v> {
    Arclength { from: &'v DVector<f64>, tangent: &'v DVector<f64>, ds: f64 },
    Amplitude(f64),
}

impl<'a, 'g> Tracer<'a, 'g> {
    fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * x[i] * y[i]).sum()
    }

    fn norm(&self, x: &DVector<f64>) -> f64 {
        self.dot(x, x).sqrt()
    }

    fn epsilon(&self, x: &DVector<f64>) -> f64 {
        let n = self.sys.size();
        let tw = self.sys.grid.t_weights();
        (0..n).map(|i| tw[i] * x[n + i] * self.p[i]).sum::<f64>() / (2.0 * self.p_norm2)
    }

    fn state(&self, x: &DVector<f64>) -> FieldPair {
        let d = self.sys.dim();
        self.sys.unpack(&x.rows(0, d).into_owned(), x[d])
    }

    fn correct(&self, guess: DVector<f64>, c: &Constraint) -> Result<(DVector<f64>, usize)> {
        let d = self.sys.dim();
        let n = self.sys.size();
        let tw = self.sys.grid.t_weights();
        let mut x = guess;
        for it in 0..=self.opts.max_newton {
            let s = self.state(&x);
            let f = self.sys.residual_t(&s)?;
            let g = match c {
                Constraint::Arclength { from, tangent, ds } => self.dot(tangent, &(&x - *from)) - ds,
                Constraint::Amplitude(e) => self.epsilon(&x) - e,
            };
            let res = f.amax().max(g.abs());
            if res <= self.opts.tol {
                return Ok((x, it));
            }
            if it == self.opts.max_newton || !res.is_finite() {
                return Err(Error::NonConvergence { iterations: it, residual: res });
            }
            let mut j = DMatrix::zeros(d + 1, d + 1);
            j.view_mut((0, 0), (d, d)).copy_from(&self.sys.jacobian(&s)?);
            j.view_mut((0, d), (d, 1)).copy_from(&self.sys.mu_derivative(&s)?);
            match c {
                Constraint::Arclength { tangent, .. } => {
                    for k in 0..d + 1 {
                        j[(d, k)] = self.weights[k] * tangent[k];
                    }
                }
                Constraint::Amplitude(_) => {
                    for i in 0..n {
                        j[(d, n + i)] = tw[i] * self.p[i] / (2.0 * self.p_norm2);
                    }
                }
            }
            let mut rhs = DVector::zeros(d + 1);
            rhs.rows_mut(0, d).copy_from(&(-f));
            rhs[d] = -g;
            let (dx, _) = solve_deflated(j, rhs, false)?;
            x += dx;
        }
        unreachable!()
    }

    fn finish(&self, x: &DVector<f64>, arclength: f64, iterations: usize) -> Result<BranchState> {
        let fields = self.state(x);
        let diagnostics = match &self.opts.diagnostics {
            Some(o) => {
                let g = self.sys.grid;
                Some(diagnose(&fields.u(g), &fields.v(g), fields.mu, fields.l, g, o)?)
            }
            None => None,
        };
        Ok(BranchState {
            epsilon: self.epsilon(x),
            fields,
            arclength,
            newton_iterations: iterations,
            diagnostics,
            log_growth: None,
        })
    }

    /// One side of the branch, starting from the onset along `sign·tangent`.
    fn side(&self, onset: &DVector<f64>, tangent0: DVector<f64>, ds0: f64, eps_max: f64, sign: f64) -> Result<Vec<BranchState>> {
        let mut out = vec![];
        let mut prev = onset.clone();
        let mut tangent = tangent0 * sign;
        let mut ds = ds0;
        let mut arc = 0.0;
        let target = sign * eps_max;
        loop {
            let guess = &prev + &tangent * ds;
            let last = sign * self.epsilon(&guess) >= eps_max * (1.0 - 1e-9);
            let attempt = if last {
                self.correct(guess, &Constraint::Amplitude(target))
            } else {
                self.correct(guess, &Constraint::Arclength { from: &prev, tangent: &tangent, ds })
            };
            match attempt {
                Ok((x, iters)) => {
                    let step = &x - &prev;
                    let len = self.norm(&step);
                    arc += len;
                    out.push(self.finish(&x, sign * arc, iters)?);
                    if last {
                        return Ok(out);
                    }
                    tangent = step / len;
                    prev = x;
                    ds = (2.0 * ds).min(ds0);
                }
                Err(Error::InvalidInput(m)) => return Err(Error::InvalidInput(m)),
                Err(_) => {
                    ds /= 2.0;
                    if ds < ds0 / 1024.0 {
                        return Err(Error::StepUnderflow(ds));
                    }
                }
            }
        }
    }
}

/// Pseudo-arclength continuation of the branch bifurcating from the trivial
/// solution at mode `n`, out to amplitude `|ε| = eps_max` on both sides.
///
/// `ε = ⟨ψ, P_n⟩ / (2⟨P_n, P_n⟩)` in `L²(dt)`, so `ψ ≈ 2εP_n` near onset.
pub fn trace_branch(
    n: usize,
    eps_max: f64,
    steps: usize,
    grid: &RadialGrid,
    opts: &BranchOptions,
) -> Result<Branch> {
    if !(eps_max > 0.0) || steps == 0 {
        return invalid("eps_max must be positive and steps nonzero");
    }
    let (mu_onset, kernel) = discrete_bifurcation(n, grid)?;
    let sys = ProjectedSystem::new(grid);
    let p: Vec<f64> = grid.nodes_t.iter().map(|&t| legendre_p(n, t)).collect::<Result<_>>()?;
    let tw = grid.t_weights();
    let p_norm2 = (0..grid.size).map(|i| tw[i] * p[i] * p[i]).sum();
    let tracer = Tracer { sys: &sys, p, p_norm2, weights: sys.weights().into_iter().chain([1.0]).collect(), opts };

    let d = sys.dim();
    let mut onset = DVector::zeros(d + 1);
    onset[d] = mu_onset;
    let mut tangent = DVector::zeros(d + 1);
    for i in 0..grid.size {
        tangent[grid.size + i] = kernel[i];
    }
    // ε along the unit tangent grows at rate ⟨v, P⟩/(2‖P‖²)
    let rate = tracer.epsilon(&tangent);
    let ds0 = eps_max / rate / steps as f64;

    let mut neg = tracer.side(&onset, tangent.clone(), ds0, eps_max, -1.0)?;
    neg.reverse();
    let pos = tracer.side(&onset, tangent, ds0, eps_max, 1.0)?;
    let start = tracer.finish(&onset, 0.0, 0)?;
    let mut states = neg;
    states.push(start);
    states.extend(pos);
    Ok(Branch { n, mu_onset, states })
}
