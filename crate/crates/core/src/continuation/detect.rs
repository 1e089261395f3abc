use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radial_calculus::{LegendreOperator, RadialGrid};
use crate::spectral::{coupling_ratio, nearest_mode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub mu: f64,
    pub n: usize,
    /// Distance of the continuous mode index from `n`.
    pub index_distance: f64,
}

/// ψ-block of the linearization at the trivial state, `−D − 2λ(μ)M`.
pub fn psi_block(op: &LegendreOperator, mu: f64) -> DMatrix<f64> {
    let size = op.size();
    let lam2 = 2.0 * coupling_ratio(mu);
    let mut a = DMatrix::zeros(size, size);
    for i in 0..size {
        let (st, row) = op.row(i);
        for k in 0..3 {
            a[(i, st + k)] = -row[k];
        }
    }
    for i in 0..size - 1 {
        a[(i, i)] -= lam2;
    }
    let ex = op.extrapolation();
    for k in 0..3 {
        a[(size - 1, size - 3 + k)] -= lam2 * ex[k];
    }
    a
}

/// Sign of `det(psi_block)`, from the LU pivots and the row permutation.
fn det_sign(op: &LegendreOperator, mu: f64) -> f64 {
    let lu = psi_block(op, mu).lu();
    let mut sign = lu.p().determinant::<f64>();
    for d in lu.u().diagonal().iter() {
        if *d == 0.0 {
            return 0.0;
        }
        sign *= d.signum();
    }
    sign
}

/// Crossings of the trivial branch over `mu_range`: sign changes of the
/// ψ-block determinant on a uniform scan, refined by bisection.
pub fn detect_bifurcations(mu_range: (f64, f64), grid: &RadialGrid) -> Result<Vec<Crossing>> {
    let (lo, hi) = mu_range;
    if !(lo > -2.0 && hi < 2.0 && lo < hi) {
        return invalid(format!("mu range must satisfy -2 < lo < hi < 2, got [{lo}, {hi}]"));
    }
    let op = LegendreOperator::new(grid);
    let samples = ((hi - lo) / 0.005).ceil().max(64.0) as usize;
    let mus: Vec<f64> = (0..=samples).map(|k| lo + (hi - lo) * k as f64 / samples as f64).collect();
    let signs: Vec<f64> = mus.par_iter().map(|&m| det_sign(&op, m)).collect();

    let brackets: Vec<(f64, f64, f64)> = (0..samples)
        .filter(|&k| signs[k] != 0.0 && signs[k + 1] != 0.0 && signs[k] != signs[k + 1])
        .map(|k| (mus[k], mus[k + 1], signs[k]))
        .chain((0..=samples).filter(|&k| signs[k] == 0.0).map(|k| (mus[k], mus[k], 0.0)))
        .collect();
    let mut out: Vec<Crossing> = brackets
        .par_iter()
        .map(|&(mut a, mut b, sa)| {
            while b - a > 1e-13 * (1.0 + a.abs()) {
                let m = 0.5 * (a + b);
                let sm = det_sign(&op, m);
                if sm == 0.0 {
                    a = m;
                    b = m;
                } else if sm == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        })
        .filter_map(|mu| nearest_mode(mu).map(|(n, d)| Crossing { mu, n, index_distance: d }))
        .collect();
    out.sort_by(|x, y| x.mu.total_cmp(&y.mu));
    Ok(out)
}
