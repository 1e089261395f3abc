use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot ratio below which an LU factorization is treated as singular.
const SINGULAR_RATIO: f64 = 1e-13;

fn pivot_ratio(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let d = u.diagonal();
    let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Unit approximate null vector of `a` from one inverse-iteration step,
/// falling back to the SVD when the factorization has an exact zero pivot.
fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let seed = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0);
    let lu = a.clone().lu();
    if let Some(mut x) = lu.solve(&seed) {
        if x.iter().all(|v| v.is_finite()) {
            for _ in 0..2 {
                let nx = x.norm();
                x /= nx;
                match lu.solve(&x) {
                    Some(y) if y.iter().all(|v| v.is_finite()) => x = y,
                    _ => break,
                }
            }
            return x.normalize();
        }
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let k = svd.singular_values.imin();
    v_t.row(k).transpose()
}

/// Solve `J x = rhs`. A numerically singular `J` with a one-dimensional
/// kernel (or any `J` when `force` is set) is handled by the bordered system
/// `[[J, w], [vᵀ, 0]]` built from its right and left null vectors, giving
/// the solution orthogonal to `v`.
pub(crate) fn solve_deflated(j: DMatrix<f64>, rhs: DVector<f64>, force: bool) -> Result<(DVector<f64>, bool)> {
    let n = j.nrows();
    let lu = j.clone().lu();
    if !force && pivot_ratio(&lu) >= SINGULAR_RATIO {
        if let Some(x) = lu.solve(&rhs) {
            if x.iter().all(|v| v.is_finite()) {
                return Ok((x, false));
            }
        }
    }
    let v = null_vector(&j);
    let w = null_vector(&j.transpose());
    let mut b = DMatrix::zeros(n + 1, n + 1);
    b.view_mut((0, 0), (n, n)).copy_from(&j);
    for i in 0..n {
        b[(i, n)] = w[i];
        b[(n, i)] = v[i];
    }
    let mut r = DVector::zeros(n + 1);
    r.rows_mut(0, n).copy_from(&rhs);
    let lu = b.lu();
    if pivot_ratio(&lu) < SINGULAR_RATIO {
        return Err(Error::SingularJacobian);
    }
    let x = lu.solve(&r).ok_or(Error::SingularJacobian)?;
    Ok((x.rows(0, n).into_owned(), true))
}

fn weighted(a: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, k| sq[i] * a[(i, k)] / sq[k])
}

/// Two smallest singular values of `W^{1/2} A W^{−1/2}` and the right
/// singular vector of the smallest, mapped back to nodal coordinates and
/// normalized in the `W`-weighted norm.
///
/// Block inverse iteration on `(SᵀS)⁻¹` through one LU of `S`, followed by
/// a Rayleigh–Ritz step; a dense SVD of the stiff operator is far slower.
pub fn smallest_singular_pair(a: &DMatrix<f64>, weights: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    const BLOCK: usize = 4;
    let s = weighted(a, weights);
    let n = s.ncols();
    let lu = s.clone().lu();
    let lu_t = s.transpose().lu();
    let mut q = DMatrix::from_fn(n, BLOCK, |i, k| ((i * (k + 3) * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5);
    q = q.qr().q();
    for _ in 0..40 {
        let y = lu_t.solve(&q).ok_or(Error::SingularJacobian)?;
        let z = lu.solve(&y).ok_or(Error::SingularJacobian)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        q = z.qr().q();
    }
    let svd = (&s * &q).svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..BLOCK).collect();
    idx.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let k = idx[0];
    let coeff = v_t.row(k).transpose();
    let vec = &q * coeff;
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let vec = (0..n).map(|i| vec[i] / sq[i]).collect();
    Ok((svd.singular_values[k], svd.singular_values[idx[1]], vec))
}


