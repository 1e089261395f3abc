//! Command implementations. Every artifact is written with shortest
//! round-trip floats and a fixed row order, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use toda_core::closed_forms::{jostwang_eval, liouville_eval, JostWangParams, LiouvilleParams};
use toda_core::continuation::{
    detect_bifurcations, estimate_multiplier, perturb_cartan, trace_branch, BranchOptions,
    BranchState, CartanOptions, FieldPair,
};
use toda_core::diagnostics::{diagnose, DiagnosticsOptions, DiagnosticsReport, MultiplierPolicy};
use toda_core::radial_calculus::{
    field_csv, fmt_float, make_grid, weighted_norm, NormKind, RadialGrid, WeightConfig,
};
use toda_core::spectral::{kernel_radial, spectrum};

use crate::config::{CommandKind, Family, Settings};

/// Runs the configured command; returns the list of diagnostic failures.
pub fn run(s: &Settings) -> Result<Vec<String>> {
    let out = Output::new(&s.output_dir)?;
    match s.command {
        CommandKind::Spectrum => cmd_spectrum(s, &out),
        CommandKind::Kernel => cmd_kernel(s, &out),
        CommandKind::VerifyClosedForm => cmd_verify(s, &out),
        CommandKind::Detect => cmd_detect(s, &out),
        CommandKind::Continue => cmd_continue(s, &out),
        CommandKind::PerturbCartan => cmd_cartan(s, &out),
        CommandKind::Diagnose => cmd_diagnose(s, &out),
    }
}

struct Output<'a> {
    dir: &'a Path,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn grid(s: &Settings) -> Result<RadialGrid> {
    Ok(make_grid(s.grid_size, s.stretch)?)
}

fn diag_options(s: &Settings, expect_quantized: bool) -> DiagnosticsOptions {
    DiagnosticsOptions {
        expect_quantized,
        multiplier: MultiplierPolicy { newton_tol: s.tol, ..Default::default() },
        ..Default::default()
    }
}

fn failures_of(label: &str, report: &DiagnosticsReport) -> Vec<String> {
    if report.passed {
        return vec![];
    }
    let notes: Vec<&str> = report
        .notes
        .iter()
        .filter(|n| !n.starts_with("mass quantization not expected"))
        .map(String::as_str)
        .collect();
    vec![format!("{label}: {}", notes.join("; "))]
}

fn cmd_spectrum(s: &Settings, out: &Output) -> Result<Vec<String>> {
    if s.max_n == 0 {
        bail!("max_n must be positive");
    }
    let mut csv = String::from("n,mu_n,multiplicity\n");
    for m in spectrum(s.max_n) {
        writeln!(csv, "{},{},{}", m.n, fmt_float(m.mu_n), m.multiplicity)?;
    }
    out.write("spectrum.csv", &csv)?;
    Ok(vec![])
}

fn cmd_kernel(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let p = kernel_radial(s.mode_n, &g)?;
    out.write(&format!("kernel_{}.csv", s.mode_n), &field_csv(&g, "P_n", &p))?;
    Ok(vec![])
}

fn cmd_verify(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let (name, mu, u, v, pointwise) = match s.family {
        Family::Liouville => {
            let p = LiouvilleParams::new(s.mu, s.delta)?;
            let mut u = Vec::with_capacity(g.size);
            let mut worst = 0.0f64;
            for &r in &g.nodes_r {
                let e = liouville_eval(&p, r)?;
                worst = worst.max((e.neg_laplacian(r) - (2.0 + s.mu) * e.value.exp()).abs());
                u.push(e.value);
            }
            ("liouville", s.mu, u.clone(), u, worst)
        }
        Family::Jostwang => {
            let p = JostWangParams::new(s.a1, s.a2)?;
            let (mut u, mut v) = (Vec::with_capacity(g.size), Vec::with_capacity(g.size));
            let mut worst = 0.0f64;
            for &r in &g.nodes_r {
                let e = jostwang_eval(&p, r)?;
                let (eu, ev) = (e.u.value.exp(), e.v.value.exp());
                worst = worst
                    .max((e.u.neg_laplacian(r) - (2.0 * eu - ev)).abs())
                    .max((e.v.neg_laplacian(r) - (2.0 * ev - eu)).abs());
                u.push(e.u.value);
                v.push(e.v.value);
            }
            ("jostwang", -1.0, u, v, worst)
        }
    };
    let report = diagnose(&u, &v, mu, 0.0, &g, &diag_options(s, true))?;
    println!(
        "{name}: mu = {}, masses = ({}, {}), pointwise residual = {:.3e}",
        fmt_float(mu),
        fmt_float(report.mass_u),
        fmt_float(report.mass_v),
        pointwise
    );
    let id = s.id.clone().unwrap_or_else(|| format!("closed_{name}"));
    out.json(&format!("report_{id}.json"), &report)?;
    Ok(failures_of(name, &report))
}

fn cmd_detect(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let found = detect_bifurcations(s.mu_range, &g)?;
    let mut csv = String::from("mu,n,index_distance\n");
    for c in &found {
        writeln!(csv, "{},{},{}", fmt_float(c.mu), c.n, fmt_float(c.index_distance))?;
    }
    println!("{} crossing(s) in [{}, {}]", found.len(), fmt_float(s.mu_range.0), fmt_float(s.mu_range.1));
    out.write("detect.csv", &csv)?;
    Ok(vec![])
}

const STATE_HEADER: &str = "arclength,mu,epsilon,L,mass_u,mass_v,pohozaev_residual,newton_iterations";

fn state_row(st: &BranchState) -> String {
    let d = st.diagnostics.as_ref();
    let pick = |f: fn(&DiagnosticsReport) -> f64| d.map_or(String::new(), |d| fmt_float(f(d)));
    format!(
        "{},{},{},{},{},{},{},{}",
        fmt_float(st.arclength),
        fmt_float(st.fields.mu),
        fmt_float(st.epsilon),
        fmt_float(st.fields.l),
        pick(|d| d.mass_u),
        pick(|d| d.mass_v),
        pick(|d| d.pohozaev_residual),
        st.newton_iterations
    )
}

/// Per-state reports and optional field dumps; returns diagnostic failures.
fn write_states(out: &Output, tag: &str, states: &[BranchState], dump: bool) -> Result<Vec<String>> {
    let mut failures = vec![];
    for (k, st) in states.iter().enumerate() {
        if let Some(d) = &st.diagnostics {
            out.json(&format!("report_{tag}_{k}.json"), d)?;
            failures.extend(failures_of(&format!("{tag} state {k}"), d));
        }
        if dump {
            out.json(&format!("fields_{tag}_{k}.json"), &st.fields)?;
        }
    }
    Ok(failures)
}

fn cmd_continue(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let opts = BranchOptions {
        tol: s.tol,
        diagnostics: Some(diag_options(s, true)),
        ..Default::default()
    };
    let b = trace_branch(s.mode_n, s.eps_max, s.steps, &g, &opts)?;
    let mut csv = format!("{STATE_HEADER}\n");
    for st in &b.states {
        writeln!(csv, "{}", state_row(st))?;
    }
    let max_l = b.states.iter().fold(0.0f64, |m, st| m.max(st.fields.l.abs()));
    println!(
        "n = {}: onset mu = {}, {} states, max |L| = {:.3e}",
        b.n,
        fmt_float(b.mu_onset),
        b.states.len(),
        max_l
    );
    out.write(&format!("branch_{}.csv", b.n), &csv)?;
    write_states(out, &format!("branch{}", b.n), &b.states, s.dump_fields)
}

fn cmd_cartan(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let p = JostWangParams::new(s.a1, s.a2)?;
    let opts = CartanOptions { tol: s.tol, diagnostics: Some(diag_options(s, false)), ..Default::default() };
    let states = perturb_cartan(&p, s.mu_target, s.steps, &g, &opts)?;
    let mut csv = format!("{STATE_HEADER},log_growth_u,log_growth_v\n");
    for st in &states {
        let [cu, cv] = st.log_growth.unwrap_or([f64::NAN; 2]);
        writeln!(csv, "{},{},{}", state_row(st), fmt_float(cu), fmt_float(cv))?;
    }
    let last = &states[states.len() - 1].fields;
    let split = last.psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    println!("reached mu = {} in {} states, sup|u - v| = {:.6}", fmt_float(last.mu), states.len(), split);
    out.write("cartan.csv", &csv)?;
    write_states(out, "cartan", &states, s.dump_fields)
}

fn cmd_diagnose(s: &Settings, out: &Output) -> Result<Vec<String>> {
    let g = grid(s)?;
    let mut fields: FieldPair = match &s.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let f: FieldPair =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if f.phi.len() != g.size || f.psi.len() != g.size {
                bail!("state has {} nodes but grid_size is {}", f.phi.len(), g.size);
            }
            f
        }
        None => {
            let opts = BranchOptions { tol: s.tol, diagnostics: None, ..Default::default() };
            let b = trace_branch(s.mode_n, s.eps_max, s.steps, &g, &opts)?;
            b.states[b.states.len() - 1].fields.clone()
        }
    };
    if s.noise > 0.0 {
        let mut rng = StdRng::seed_from_u64(s.seed);
        for p in fields.psi.iter_mut() {
            *p += s.noise * rng.random_range(-1.0..1.0);
        }
    }
    // the multiplier implied by the fields themselves, so perturbed inputs
    // are judged on what they are rather than on a stale stored value
    let l = estimate_multiplier(&fields, &g)?;
    let (u, v) = (fields.u(&g), fields.v(&g));
    let report = diagnose(&u, &v, fields.mu, l, &g, &diag_options(s, true))?;
    let star = weighted_norm(&fields.psi, &g, &WeightConfig::new(s.alpha)?, NormKind::Star)?;
    println!(
        "mu = {}, |L| = {:.3e} (bound {:.3e}), |psi|_* = {:.6e}, passed = {}",
        fmt_float(fields.mu),
        report.l_abs,
        report.multiplier_bound,
        star.value,
        report.passed
    );
    let id = s.id.as_deref().unwrap_or("diagnose");
    out.json(&format!("report_{id}.json"), &report)?;
    Ok(failures_of(id, &report))
}
