use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use toda_core::closed_forms::JostWangParams;
use toda_core::continuation::*;
use toda_core::radial_calculus::{asymptotic_slope, make_grid, RadialGrid};
use toda_core::spectral::{bifurcation_mu, legendre_p};
use toda_core::Error;

fn legendre(n: usize, g: &RadialGrid) -> Vec<f64> {
    g.nodes_t.iter().map(|&t| legendre_p(n, t).unwrap()).collect()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn quiet() -> BranchOptions {
    BranchOptions { diagnostics: None, ..Default::default() }
}

#[test]
fn trivial_state_has_zero_residual() {
    let g = make_grid(200, 4.0).unwrap();
    for mu in [-1.5, -0.3, 0.0, 1.2] {
        let r = residual(&FieldPair::trivial(g.size, mu), &g).unwrap();
        assert_eq!(r.sup_norm(), 0.0);
    }
}

#[test]
fn kernel_direction_is_second_order() {
    let g = make_grid(200, 4.0).unwrap();
    let mut norms = vec![];
    for delta in [1e-3, 5e-4] {
        let psi: Vec<f64> = legendre(2, &g).iter().map(|p| delta * p).collect();
        let s = FieldPair { phi: vec![0.0; g.size], psi, l: 0.0, mu: bifurcation_mu(2) };
        norms.push(residual(&s, &g).unwrap().sup_norm());
    }
    let ratio = norms[0] / norms[1];
    assert!((ratio - 4.0).abs() < 0.05, "{norms:?}");
}

#[test]
fn multiplier_row_matches_substitution() {
    let g = make_grid(200, 4.0).unwrap();
    let s = FieldPair { l: 1.0, ..FieldPair::trivial(g.size, 0.0) };
    let r = residual(&s, &g).unwrap();
    for (i, &rad) in g.nodes_r[..g.size - 1].iter().enumerate() {
        let want = -64.0 * (8.0 - rad * rad) / (8.0 + rad * rad).powi(3);
        assert!((r.phi[i] - want).abs() < 1e-12, "node {i}: {} vs {want}", r.phi[i]);
    }
    assert!(r.psi.iter().all(|v| *v == 0.0));
}

#[test]
fn overflow_guard() {
    let g = make_grid(100, 4.0).unwrap();
    let mut s = FieldPair::trivial(g.size, 0.0);
    s.phi[10] = 120.0;
    assert!(matches!(residual(&s, &g), Err(Error::Overflow(_))));
}

fn sample_state(g: &RadialGrid) -> FieldPair {
    let p1 = legendre(1, g);
    let p2 = legendre(2, g);
    FieldPair {
        phi: p1.iter().zip(&g.nodes_t).map(|(p, t)| 0.1 * p + 0.05 * t * t).collect(),
        psi: p2.iter().map(|p| 0.2 * p).collect(),
        l: 0.3,
        mu: -0.3,
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let g = make_grid(120, 4.0).unwrap();
    let sys = ProjectedSystem::new(&g);
    let s = sample_state(&g);
    let j = sys.jacobian(&s).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..5 {
        let d = nalgebra::DVector::from_fn(sys.dim(), |_, _| rng.random_range(-1.0..1.0));
        let h = 1e-6;
        let x = sys.pack(&s);
        let fp = sys.residual_t(&sys.unpack(&(&x + &d * h), s.mu)).unwrap();
        let fm = sys.residual_t(&sys.unpack(&(&x - &d * h), s.mu)).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        let jd = &j * &d;
        let rel = (&fd - &jd).amax() / jd.amax();
        assert!(rel < 1e-6, "relative error {rel:e}");
    }
    let h = 1e-6;
    let shifted = |dm: f64| sys.residual_t(&FieldPair { mu: s.mu + dm, ..s.clone() }).unwrap();
    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
    let an = sys.mu_derivative(&s).unwrap();
    assert!((&fd - &an).amax() / an.amax() < 1e-6);
}

#[test]
fn newton_returns_from_noise() {
    let g = make_grid(200, 4.0).unwrap();
    let mut rng = StdRng::seed_from_u64(42);
    let mut s = FieldPair::trivial(g.size, -0.5);
    for i in 0..g.size {
        s.phi[i] = 1e-3 * rng.random_range(-1.0..1.0);
        s.psi[i] = 1e-3 * rng.random_range(-1.0..1.0);
    }
    let rep = newton_correct(&s, &g, 1e-10, 20).unwrap();
    assert!(rep.iterations <= 6, "{} iterations", rep.iterations);
    assert!(sup(rep.state.phi.iter().chain(&rep.state.psi).copied()) < 1e-9);
    assert!(rep.state.l.abs() < 1e-9);
}

#[test]
fn newton_on_exact_zero_takes_no_steps() {
    let g = make_grid(100, 4.0).unwrap();
    let rep = newton_correct(&FieldPair::trivial(g.size, 0.4), &g, 1e-10, 10).unwrap();
    assert_eq!(rep.iterations, 0);
}

#[test]
fn newton_from_branch_predictor() {
    let g = make_grid(200, 4.0).unwrap();
    let eps = 1e-2;
    let psi: Vec<f64> = legendre(2, &g).iter().map(|p| 2.0 * eps * p).collect();
    let s = FieldPair { phi: vec![0.0; g.size], psi, l: 0.0, mu: bifurcation_mu(2) };
    // the discrete branch bends off μ = −1 by O(ε²h²), which leaves a
    // residual floor of a few 1e−10 at fixed μ
    let rep = newton_correct(&s, &g, 1e-9, 20).unwrap();
    let amp = sup(rep.state.psi.iter().copied());
    assert!((amp - 2.0 * eps).abs() <= 0.2 * 2.0 * eps, "|psi| = {amp}");
    assert!(rep.deflated);
    assert!(sup(rep.state.phi.iter().copied()) > 0.0);
}

#[test]
fn newton_rejects_bad_tolerance() {
    let g = make_grid(100, 4.0).unwrap();
    let s = FieldPair::trivial(g.size, 0.0);
    assert!(matches!(newton_correct(&s, &g, 0.0, 5), Err(Error::InvalidInput(_))));
}

#[test]
fn multiplier_estimate_recovers_l() {
    let g = make_grid(200, 4.0).unwrap();
    let b = trace_branch(2, 0.05, 6, &g, &quiet()).unwrap();
    let end = &b.states.last().unwrap().fields;
    let est = estimate_multiplier(end, &g).unwrap();
    assert!((est - end.l).abs() < 1e-10, "{est} vs {}", end.l);
}

#[test]
fn discrete_onsets() {
    let g = make_grid(200, 4.0).unwrap();
    let (mu2, v) = discrete_bifurcation(2, &g).unwrap();
    assert!((mu2 + 1.0).abs() < 1e-12);
    assert!(v[0] > 0.0);
    let (mu3, _) = discrete_bifurcation(3, &g).unwrap();
    assert!((mu3 - bifurcation_mu(3)).abs() < 1e-3);
    assert!(discrete_bifurcation(0, &g).is_err());
}

#[test]
fn branch_is_symmetric_and_ordered() {
    let g = make_grid(200, 4.0).unwrap();
    let b = trace_branch(3, 1e-3, 4, &g, &quiet()).unwrap();
    assert!((b.mu_onset + 10.0 / 7.0).abs() < 1e-3);
    let eps: Vec<f64> = b.states.iter().map(|s| s.epsilon).collect();
    assert!(eps.windows(2).all(|w| w[0] < w[1]), "{eps:?}");
    assert!((eps[0] + 1e-3).abs() < 1e-12 && (eps[eps.len() - 1] - 1e-3).abs() < 1e-12);
    assert!(b.states.iter().all(|s| s.fields.l.abs() < 1e-9));
}

#[test]
fn detect_examples() {
    let g = make_grid(200, 4.0).unwrap();
    assert!(detect_bifurcations((-0.9, -0.1), &g).unwrap().is_empty());
    let one = detect_bifurcations((-1.001, -0.999), &g).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].n, 2);
    assert!(detect_bifurcations((-2.5, 0.0), &g).is_err());
}

#[test]
fn cartan_zero_length_is_identity() {
    let g = make_grid(200, 4.0).unwrap();
    let p = JostWangParams::new(1.0, 1.0).unwrap();
    let s = perturb_cartan(&p, -1.0, 3, &g, &CartanOptions::default()).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].log_growth, Some([0.0, 0.0]));
    assert!(s[0].diagnostics.as_ref().unwrap().passed);
}

#[test]
fn cartan_increments_grow_logarithmically() {
    let g = make_grid(800, 8.0).unwrap();
    let p = JostWangParams::new(1.0, 1.0).unwrap();
    let opts = CartanOptions { diagnostics: None, ..Default::default() };
    let s = perturb_cartan(&p, -0.95, 5, &g, &opts).unwrap();
    let (first, last) = (&s[0].fields, &s[s.len() - 1].fields);
    let (u0, u1) = (first.u(&g), last.u(&g));
    assert!(sup(last.psi.iter().copied()) > 0.0);
    let inc: Vec<f64> = u0.iter().zip(&u1).map(|(a, b)| (b - a) / 0.05).collect();
    let inner = asymptotic_slope(&inc, &g, (100.0, 300.0)).unwrap();
    let outer = asymptotic_slope(&inc, &g, (300.0, g.r_max())).unwrap();
    assert!(inner.is_finite() && (inner - outer).abs() < 1e-2 * inner.abs().max(1.0), "{inner} {outer}");
    let lg = s[s.len() - 1].log_growth.unwrap();
    assert!((lg[0] / 0.05 - outer).abs() < 1e-2, "{lg:?} {outer}");
}
