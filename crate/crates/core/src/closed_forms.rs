//! Closed-form radial solutions: the Liouville bubble family, the radial
//! Jost–Wang pair for the Cartan coupling, and the Gudnason parameter map.
//!
//! Everything is returned in log-space; exponentials are left to callers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleParams {
    pub mu: f64,
    pub delta: f64,
    pub center: [f64; 2],
}

impl LiouvilleParams {
    pub fn new(mu: f64, delta: f64) -> Result<Self> {
        let p = Self { mu, delta, center: [0.0, 0.0] };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > -2.0) || !self.mu.is_finite() {
            return invalid(format!("mu must exceed -2, got {}", self.mu));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return invalid(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }
}

/// Value with first and second radial derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial3 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Radial3 {
    /// `-f'' - f'/r`; uses the regular limit `-2 f''` at the origin.
    pub fn neg_laplacian(&self, r: f64) -> f64 {
        if r == 0.0 {
            -2.0 * self.d2
        } else {
            -self.d2 - self.d1 / r
        }
    }
}

/// `U = log(64δ / ((2+μ)(8δ + r²)²))` centred at `p.center`, evaluated radially.
pub fn liouville_eval(p: &LiouvilleParams, r: f64) -> Result<Radial3> {
    p.validate()?;
    if !(r >= 0.0) {
        return invalid(format!("radius must be nonnegative, got {r}"));
    }
    let (mu, d) = (p.mu, p.delta);
    let q = 8.0 * d + r * r;
    // log q computed as log(8δ) + log1p(r²/8δ) keeps precision near r = 0.
    let log_q = (8.0 * d).ln() + (r * r / (8.0 * d)).ln_1p();
    let value = (64.0 * d).ln() - (2.0 + mu).ln() - 2.0 * log_q;
    Ok(Radial3 {
        value,
        d1: -4.0 * r / q,
        d2: -4.0 * (8.0 * d - r * r) / (q * q),
    })
}

/// Liouville profile with δ = 1 written in the compactified coordinate
/// `t = (8−r²)/(8+r²)`: `e^U = (1+t)²/(4(2+μ))`.
pub fn liouville_log_t(mu: f64, one_plus_t: f64) -> f64 {
    2.0 * one_plus_t.ln() - (4.0 * (2.0 + mu)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JostWangParams {
    pub a1: f64,
    pub a2: f64,
}

impl JostWangParams {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        let p = Self { a1, a2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a2 > 0.0) || !self.a1.is_finite() || !self.a2.is_finite() {
            return invalid(format!(
                "a1, a2 must be positive and finite, got ({}, {})",
                self.a1, self.a2
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostWangEval {
    pub u: Radial3,
    pub v: Radial3,
}

/// Quadratic in x = r² with its two derivatives in x.
#[derive(Clone, Copy)]
struct Quad {
    f: f64,
    df: f64,
    d2f: f64,
}

impl Quad {
    fn new(c0: f64, c1: f64, c2: f64, x: f64) -> Self {
        Self { f: c0 + x * (c1 + x * c2), df: c1 + 2.0 * c2 * x, d2f: 2.0 * c2 }
    }
    /// (log f)' and (log f)'' in x
    fn log_derivs(&self) -> (f64, f64) {
        let g = self.df / self.f;
        (g, self.d2f / self.f - g * g)
    }
}

/// Radial Jost–Wang pair (complex parameters set to zero), with analytic
/// derivatives obtained from the polynomial factors in x = r².
pub fn jostwang_eval(p: &JostWangParams, r: f64) -> Result<JostWangEval> {
    p.validate()?;
    if !(r >= 0.0) {
        return invalid(format!("radius must be nonnegative, got {r}"));
    }
    let (a1s, a2s) = (p.a1 * p.a1, p.a2 * p.a2);
    let x = r * r;
    let a = Quad::new(a1s * a2s, 4.0 * a1s, a2s, x);
    let b = Quad::new(a1s, a2s, 1.0, x);
    let (la1, la2) = a.log_derivs();
    let (lb1, lb2) = b.log_derivs();

    // u = log 4 + log A − 2 log B ;  v = log(16 a1² a2²) + log B − 2 log A
    let u = 4f64.ln() + a.f.ln() - 2.0 * b.f.ln();
    let v = (16.0 * a1s * a2s).ln() + b.f.ln() - 2.0 * a.f.ln();
    let (ux, uxx) = (la1 - 2.0 * lb1, la2 - 2.0 * lb2);
    let (vx, vxx) = (lb1 - 2.0 * la1, lb2 - 2.0 * la2);
    // d/dr = 2r d/dx ; d²/dr² = 2 d/dx + 4x d²/dx²
    let lift = |val: f64, fx: f64, fxx: f64| Radial3 {
        value: val,
        d1: 2.0 * r * fx,
        d2: 2.0 * fx + 4.0 * x * fxx,
    };
    Ok(JostWangEval { u: lift(u, ux, uxx), v: lift(v, vx, vxx) })
}

/// Coupling of the Gudnason model: `2(α² − αβ)/(α² + αβ)`, always in (−2, 2).
pub fn gudnason_mu(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return invalid(format!("alpha, beta must be positive, got ({alpha}, {beta})"));
    }
    // common factor α cancels: 2(α − β)/(α + β), written through the ratio
    // q ≤ 1 so that α + β cannot overflow
    let (q, sign) = if alpha >= beta { (beta / alpha, 1.0) } else { (alpha / beta, -1.0) };
    let mu = sign * 2.0 * (1.0 - q) / (1.0 + q);
    // the true value is interior; rounding may land on ±2 when q < 2⁻⁵⁴
    Ok(mu.clamp(-(2f64.next_down()), 2f64.next_down()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn liouville_origin_value() {
        let p = LiouvilleParams::new(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(liouville_eval(&p, 0.0).unwrap().value, 0.25f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn liouville_far_field_constant() {
        let p = LiouvilleParams::new(0.0, 1.0).unwrap();
        let r = 1e6f64;
        let u = liouville_eval(&p, r).unwrap().value;
        // U + 4 log r = log 32 − 2 log(1 + 8/r²)
        let exact = 32f64.ln() - 2.0 * (8.0 / (r * r)).ln_1p();
        assert_abs_diff_eq!(u + 4.0 * r.ln(), exact, epsilon = 1e-12);
        assert_abs_diff_eq!(u + 4.0 * r.ln(), 32f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn liouville_pointwise_residual() {
        let p = LiouvilleParams::new(-1.0, 2.0).unwrap();
        let e = liouville_eval(&p, 3.0).unwrap();
        let res = e.neg_laplacian(3.0) - (2.0 + p.mu) * e.value.exp();
        assert!(res.abs() < 1e-12, "{res}");
    }

    #[test]
    fn compact_form_matches() {
        for &mu in &[-1.5, 0.0, 1.0] {
            let p = LiouvilleParams::new(mu, 1.0).unwrap();
            for &r in &[0.0, 0.5, 3.0, 40.0] {
                let t1 = 16.0 / (8.0 + r * r);
                let a = liouville_eval(&p, r).unwrap().value;
                assert_abs_diff_eq!(a, liouville_log_t(mu, t1), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LiouvilleParams::new(-2.0, 1.0).is_err());
        assert!(LiouvilleParams::new(0.0, 0.0).is_err());
        assert!(JostWangParams::new(0.0, 1.0).is_err());
        assert!(JostWangParams::new(1.0, -1.0).is_err());
        assert!(gudnason_mu(0.0, 1.0).is_err());
        let bad = LiouvilleParams { mu: -3.0, delta: 1.0, center: [0.0; 2] };
        assert!(liouville_eval(&bad, 1.0).is_err());
    }

    #[test]
    fn jostwang_origin() {
        let p = JostWangParams::new(1.0, 1.0).unwrap();
        let e = jostwang_eval(&p, 0.0).unwrap();
        assert_abs_diff_eq!(e.u.value, 4f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(e.v.value, 16f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn jostwang_solves_cartan_system() {
        let p = JostWangParams::new(1.0, 2.0).unwrap();
        for &r in &[0.0, 0.3, 1.5, 7.0, 60.0] {
            let e = jostwang_eval(&p, r).unwrap();
            let (eu, ev) = (e.u.value.exp(), e.v.value.exp());
            let ru = e.u.neg_laplacian(r) - 2.0 * eu + ev;
            let rv = e.v.neg_laplacian(r) - 2.0 * ev + eu;
            let scale = eu.max(ev).max(1e-300);
            assert!(ru.abs() <= 1e-10 * scale.max(1.0), "r={r} ru={ru}");
            assert!(rv.abs() <= 1e-10 * scale.max(1.0), "r={r} rv={rv}");
        }
    }

    #[test]
    fn jostwang_decay() {
        let p = JostWangParams::new(1.0, 1.0).unwrap();
        let r = 1e3;
        let e = jostwang_eval(&p, r).unwrap();
        assert!(e.u.value.is_finite() && e.v.value.is_finite());
        // r u'(r) → −4
        assert!((r * e.u.d1 + 4.0).abs() < 1e-4);
        assert!((r * e.v.d1 + 4.0).abs() < 1e-4);
    }

    #[test]
    fn gudnason_examples() {
        assert_eq!(gudnason_mu(1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gudnason_mu(1.0, 3.0).unwrap(), -1.0, epsilon = 1e-15);
        assert!((gudnason_mu(2.0, 1e-12).unwrap() - 2.0).abs() < 1e-11);
    }
}
