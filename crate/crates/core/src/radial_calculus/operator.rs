//! Collocation form of `D w = ((1−t²) w_t)_t` on the grid nodes.
//!
//! Interior rows use the quadratic through three neighbouring nodes, so
//! `D` is exact on quadratics and `P_0, P_1, P_2` are exact discrete
//! eigenvectors. Row 0 sits at `t = 1` where `D w = −2w'(1)`; the last
//! row is a closure at the virtual node `t = −1` where `D w = 2w'(−1)`,
//! built from the last three nodes. Right-hand sides for the closure row
//! are extrapolated to `t = −1` with the same quadratic.

use super::grid::RadialGrid;

#[derive(Debug, Clone)]
pub struct LegendreOperator {
    /// Three weights per row acting on nodes `start[i]..start[i]+3`.
    rows: Vec<[f64; 3]>,
    start: Vec<usize>,
    /// Extrapolation weights to `t = −1` over the last three nodes.
    extrap: [f64; 3],
}

/// Value, first and second derivative weights at the evaluation point for
/// the quadratic through three nodes with offsets `e_k = t_k − x`.
fn quad_weights(e: [f64; 3]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let mut l = [0.0; 3];
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        let den = (e[k] - e[a]) * (e[k] - e[b]);
        l[k] = e[a] * e[b] / den;
        d1[k] = -(e[a] + e[b]) / den;
        d2[k] = 2.0 / den;
    }
    (l, d1, d2)
}

impl LegendreOperator {
    pub fn new(grid: &RadialGrid) -> Self {
        let n = grid.size;
        let t = &grid.nodes_t;
        let (omt, opt) = (grid.one_minus_t(), grid.one_plus_t());
        // t_j − t_i without cancellation near either end
        let diff = |j: usize, i: usize| {
            if t[i] >= 0.0 && t[j] >= 0.0 {
                omt[i] - omt[j]
            } else if t[i] < 0.0 && t[j] < 0.0 {
                opt[j] - opt[i]
            } else {
                t[j] - t[i]
            }
        };
        let mut rows = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n);

        let e0 = [0.0, -omt[1], -omt[2]];
        let (_, d1, _) = quad_weights(e0);
        rows.push([-2.0 * d1[0], -2.0 * d1[1], -2.0 * d1[2]]);
        start.push(0);

        for i in 1..n - 1 {
            let e = [diff(i - 1, i), 0.0, diff(i + 1, i)];
            let (_, d1, d2) = quad_weights(e);
            let one_m_t2 = omt[i] * opt[i];
            let mut row = [0.0; 3];
            for k in 0..3 {
                row[k] = one_m_t2 * d2[k] - 2.0 * t[i] * d1[k];
            }
            rows.push(row);
            start.push(i - 1);
        }

        let e_last = [opt[n - 3], opt[n - 2], opt[n - 1]];
        let (extrap, d1, _) = quad_weights(e_last);
        rows.push([2.0 * d1[0], 2.0 * d1[1], 2.0 * d1[2]]);
        start.push(n - 3);

        Self { rows, start, extrap }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> (usize, [f64; 3]) {
        (self.start[i], self.rows[i])
    }

    pub fn extrapolation(&self) -> [f64; 3] {
        self.extrap
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|i| {
                let (s, r) = self.row(i);
                r[0] * w[s] + r[1] * w[s + 1] + r[2] * w[s + 2]
            })
            .collect()
    }

    /// Nodal right-hand side with the last entry replaced by its value
    /// extrapolated to `t = −1`.
    pub fn closure_rhs(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let mut out = f.to_vec();
        out[n - 1] = self.extrap[0] * f[n - 3] + self.extrap[1] * f[n - 2] + self.extrap[2] * f[n - 1];
        out
    }

    /// Planar radial Laplacian `Δw = ((1+t)²/8)·D w` on the nodes `0..N−1`
    /// (the closure row has no planar counterpart and is dropped).
    pub fn planar_laplacian(&self, grid: &RadialGrid, w: &[f64]) -> Vec<f64> {
        let d = self.apply(w);
        let n = grid.size;
        (0..n - 1)
            .map(|i| grid.one_plus_t()[i].powi(2) / 8.0 * d[i])
            .collect()
    }
}
