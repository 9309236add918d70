//! Sub-pipelines behind each subcommand.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hjc_core::cell::CellProblem;
use hjc_core::diagnostics::{certify_bundle, CertificationReport};
use hjc_core::hamiltonian::{catalog, Hamiltonian1D};
use hjc_core::io::{
    read_bundle, resolve_hamiltonian, resolve_potential, write_bundle, write_corrector_csv, write_json,
    write_pde_log, write_sweep_csv, write_table,
};
use hjc_core::multid::{compare_certificates, MultidOptions, SeparableSystem};
use hjc_core::numeric::linspace;
use hjc_core::pde::{hopf_cole_refined, long_time_slope, PdeReport};
use hjc_core::synth::synthesize_bundle;
use hjc_core::{CounterexampleBundle, PeriodicPotential};
use serde_json::json;

use crate::config::{parse_theta, RunConfig, ThetaItem};

/// How a command ended, when it did not fail outright.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// A demanded certificate was not found.
    NotCertified,
}

const DEFAULT_BUNDLE: &str = "bundle.json";

fn default_bundle_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(DEFAULT_BUNDLE)
}

fn uses_bundle(cfg: &RunConfig) -> bool {
    cfg.bundle.is_some() || cfg.potential == "from-bundle"
}

fn load_bundle(path: &Path) -> Result<CounterexampleBundle> {
    read_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

/// A stored bundle if one was named (or, with `prefer_saved`, one left in the
/// output directory), else a fresh synthesis for the configured Hamiltonian.
/// Returns the bundle and the label of its `G`.
fn bundle_for(
    cfg: &RunConfig,
    default_hamiltonian: &str,
    prefer_saved: bool,
) -> Result<(CounterexampleBundle, String)> {
    if let Some(path) = &cfg.bundle {
        let b = load_bundle(path)?;
        let label = hjc_core::io::read_json::<hjc_core::io::BundleManifest>(path)?.g_label;
        return Ok((b, label));
    }
    if prefer_saved && cfg.hamiltonian.is_none() {
        let path = default_bundle_path(cfg);
        if path.is_file() {
            let label = hjc_core::io::read_json::<hjc_core::io::BundleManifest>(&path)?.g_label;
            return Ok((load_bundle(&path)?, label));
        }
    }
    let label = cfg.hamiltonian_or(default_hamiltonian).to_string();
    Ok((synthesize(cfg, &label)?, label))
}

fn synthesize(cfg: &RunConfig, label: &str) -> Result<CounterexampleBundle> {
    let g = resolve_hamiltonian(label).with_context(|| format!("resolving Hamiltonian '{label}'"))?;
    let points = catalog(label).ok().and_then(|e| e.points);
    let p1 = cfg.p1.or(points.map(|p| p.0));
    let p2 = cfg.p2.or(points.map(|p| p.1));
    let (Some(p1), Some(p2)) = (p1, p2) else {
        bail!("Hamiltonian '{label}' has no catalog points; pass --p1 and --p2");
    };
    synthesize_bundle(&g, p1, p2).with_context(|| format!("synthesizing a potential for '{label}' at ({p1}, {p2})"))
}

fn problem(cfg: &RunConfig, default_hamiltonian: &str) -> Result<(Hamiltonian1D, PeriodicPotential, Option<f64>)> {
    if uses_bundle(cfg) {
        let path = cfg.bundle.clone().unwrap_or_else(|| default_bundle_path(cfg));
        let b = load_bundle(&path)?;
        return Ok((b.g, b.v, Some(b.theta0)));
    }
    let label = cfg.hamiltonian_or(default_hamiltonian);
    let g = resolve_hamiltonian(label).with_context(|| format!("resolving Hamiltonian '{label}'"))?;
    let v = resolve_potential(&cfg.potential).with_context(|| format!("resolving potential '{}'", cfg.potential))?;
    Ok((g, v, None))
}

fn thetas(cfg: &RunConfig, default: &str, theta0: Option<f64>) -> Result<Vec<f64>> {
    parse_theta(cfg.theta.as_deref().unwrap_or(default))?
        .into_iter()
        .map(|t| match t {
            ThetaItem::Value(v) => Ok(v),
            ThetaItem::Theta0 => theta0.ok_or_else(|| anyhow!("theta0 is only defined with a bundle (--bundle)")),
        })
        .collect()
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let (g, v, theta0) = problem(cfg, "quadratic")?;
    let thetas = thetas(cfg, "-2:2:81", theta0)?;
    let cell = CellProblem::new(g, v, cfg.cell())?;
    let mut sols = Vec::with_capacity(thetas.len());
    for p in cell.sweep(&thetas) {
        let theta = p.theta;
        sols.push(p.result.with_context(|| format!("cell problem at theta = {theta}"))?);
    }
    let path = cfg.out.join("sweep.csv");
    write_sweep_csv(&path, &sols)?;
    if let Some(t0) = theta0 {
        let sol = cell.solve(t0).context("cell problem at theta0")?;
        write_corrector_csv(&cfg.out.join("corrector_theta0.csv"), &sol)?;
    }
    println!("sweep: {} points -> {}", sols.len(), path.display());
    Ok(Outcome::Done)
}

pub fn synthesize_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let label = cfg.hamiltonian_or("fig3_flat").to_string();
    let b = synthesize(cfg, &label)?;
    let (json, csv) = write_bundle(&cfg.out, "bundle", &b, &label, cfg.n, cfg.min_per_piece)?;
    println!(
        "synthesize: {label} theta0 = {:.12e}, ell = {:e}, regime = {:?} -> {}, {}",
        b.theta0,
        b.profile.ell,
        b.regime,
        json.display(),
        csv.display()
    );
    Ok(Outcome::Done)
}

fn certification_json(r: &CertificationReport) -> serde_json::Value {
    json!({
        "theta0": r.theta0,
        "hbar_theta0": r.hbar_theta0,
        "i_end_theta0": r.i_end_theta0,
        "c": r.c,
        "c_trials": r.c_trials.iter().map(|&(c, il, ir)| json!({"c": c, "i_left": il, "i_right": ir})).collect::<Vec<_>>(),
        "certificate": r.certificate,
        "left": r.left,
        "right": r.right,
        "k1_profile": r.k1_profile,
        "k1_window": r.k1_window,
    })
}

pub fn certify(cfg: &RunConfig) -> Result<Outcome> {
    let (b, label) = bundle_for(cfg, "fig3_flat", true)?;
    let report = certify_bundle(&b, &cfg.certify()).context("certification")?;
    write_json(&cfg.out.join("certification.json"), &certification_json(&report))?;
    let Some(cert) = report.certificate else {
        println!("certify: {label}: no certificate for c in the scanned range");
        return Ok(Outcome::NotCertified);
    };
    write_json(&cfg.out.join("certificate.json"), &cert)?;
    write_table(&cfg.out.join("hbar_curve.csv"), &["theta", "hbar"], report.curve.iter().map(|&(t, h)| vec![t, h]))?;
    println!(
        "certify: {label}: c = {}, margin = {:.6e} at theta = {:.6e}",
        report.c.unwrap_or(f64::NAN),
        cert.margin,
        cert.theta_mid
    );
    Ok(Outcome::Done)
}

pub fn verify_pde(cfg: &RunConfig) -> Result<Outcome> {
    let (g, v, theta0) = problem(cfg, "quadratic")?;
    let default = if theta0.is_some() { "theta0" } else { "0" };
    let thetas = thetas(cfg, default, theta0)?;
    let cell = CellProblem::new(g.clone(), v.clone(), cfg.cell())?;
    let mut reports = Vec::new();
    for (i, &theta) in thetas.iter().enumerate() {
        let run = long_time_slope(&g, &v, theta, &cfg.pde()).with_context(|| format!("parabolic run at {theta}"))?;
        let hbar = cell.solve(theta).with_context(|| format!("cell problem at {theta}"))?.hbar;
        write_pde_log(&cfg.out.join(format!("pde_log_{i}.csv")), &run.log)?;
        let r = PdeReport { theta, slope: run.slope, hbar_cell: hbar, abs_diff: (run.slope - hbar).abs() };
        println!("verify-pde: theta = {theta:.6e} slope = {:.6e} cell = {hbar:.6e} |diff| = {:.3e}", r.slope, r.abs_diff);
        reports.push(r);
    }
    let out = if reports.len() == 1 { json!(reports[0]) } else { json!(reports) };
    write_json(&cfg.out.join("pde_report.json"), &out)?;
    Ok(Outcome::Done)
}

pub fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let label = cfg.hamiltonian_or("quadratic");
    if label != "quadratic" {
        bail!("the eigenvalue oracle only applies to the quadratic Hamiltonian, got '{label}'");
    }
    let (g, v, _) = problem(cfg, "quadratic")?;
    let thetas = thetas(cfg, "-1:1:5", None)?;
    let cell = CellProblem::new(g, v.clone(), cfg.cell())?;
    let mut rows = Vec::new();
    for &theta in &thetas {
        let o = hopf_cole_refined(&v, theta, cfg.oracle_n).with_context(|| format!("oracle at {theta}"))?;
        let h = cell.solve(theta).with_context(|| format!("cell problem at {theta}"))?.hbar;
        println!("oracle: theta = {theta:.6e} oracle = {o:.12e} cell = {h:.12e} |diff| = {:.3e}", (o - h).abs());
        rows.push(vec![theta, o, h, (o - h).abs()]);
    }
    write_table(&cfg.out.join("oracle.csv"), &["theta", "oracle", "hbar_cell", "abs_diff"], rows)?;
    Ok(Outcome::Done)
}

pub fn multid(cfg: &RunConfig) -> Result<Outcome> {
    let (b, label) = bundle_for(cfg, "multid_g1", false)?;
    let one_d = certify_bundle(&b, &cfg.certify()).context("one-dimensional certification")?;
    let Some(cert_1d) = one_d.certificate else {
        println!("multid: {label}: the one-dimensional effective Hamiltonian was not certified");
        return Ok(Outcome::NotCertified);
    };
    let c = cfg.c.or(one_d.c).expect("certified reports carry c");
    let mut outcome = Outcome::Done;
    let mut summary = Vec::new();
    for &d in &cfg.dims {
        let sys = SeparableSystem::new(&b, d, c, &MultidOptions { cell: cfg.cell(), ..MultidOptions::default() })
            .with_context(|| format!("assembling the d = {d} system"))?;
        let mut levels = Vec::new();
        for frac in [0.25, 0.5, 1.0] {
            let rep = sys.check_sublevel_convexity(frac * sys.r, cfg.samples, cfg.seed)?;
            if !rep.passed() {
                outcome = Outcome::NotCertified;
            }
            levels.push(rep);
        }
        write_json(&cfg.out.join(format!("convexity_d{d}.json")), &levels)?;
        let scan = sys.scan_segment(cfg.points, cfg.hbar_tolerance)?;
        write_table(
            &cfg.out.join(format!("segment_d{d}.csv")),
            &["theta1", "effective_sum"],
            scan.curve.iter().map(|&(t, v)| vec![t, v]),
        )?;
        let agreement = scan.certificate.as_ref().map(|s| compare_certificates(s, &cert_1d, scan.shift));
        if scan.certificate.is_none() {
            outcome = Outcome::NotCertified;
        }
        println!(
            "multid: d = {d} M = {:.6e} R = {:.6e} convexity {} certificate {}",
            sys.m.m,
            sys.r,
            if levels.iter().all(|l| l.passed()) { "passed" } else { "FAILED" },
            if scan.certificate.is_some() { "found" } else { "absent" }
        );
        summary.push(json!({
            "system": sys.summary(),
            "levels": levels.iter().map(|l| json!({"level": l.level, "passed": l.passed(), "violations": l.violations.len()})).collect::<Vec<_>>(),
            "certificate": scan.certificate,
            "shift": scan.shift,
            "agreement": agreement,
            "within_budget": scan.within_budget,
        }));
    }
    write_json(&cfg.out.join("multid_summary.json"), &json!({"certificate_1d": cert_1d, "c": c, "systems": summary}))?;
    Ok(outcome)
}

pub fn figures(cfg: &RunConfig) -> Result<Outcome> {
    let (b, label) = bundle_for(cfg, "fig2_bump", false)?;
    let entry = catalog(&label).ok();
    let base = entry.as_ref().and_then(|e| e.base.clone()).unwrap_or_else(|| b.g.clone());
    let (lo, hi) = (b.p1.min(-1.0) - 1.0, b.p2.max(1.0) + 1.0);
    let ps = linspace(lo, hi, 1201);
    write_table(&cfg.out.join("G_curve.csv"), &["p", "G"], ps.iter().map(|&p| vec![p, base.eval(p)]))?;
    write_table(&cfg.out.join("Gtilde_curve.csv"), &["p", "G"], ps.iter().map(|&p| vec![p, b.g.eval(p)]))?;
    let rows = hjc_core::io::bundle_profile_rows(&b, cfg.n, cfg.min_per_piece)?;
    write_table(&cfg.out.join("profile.csv"), &["x", "f", "fprime"], rows.iter().map(|r| vec![r[0], r[1], r[2]]))?;
    write_table(&cfg.out.join("potential.csv"), &["x", "V"], rows.iter().map(|r| vec![r[0], r[3]]))?;
    let report = certify_bundle(&b, &cfg.certify()).context("certification")?;
    let curve = if report.curve.is_empty() {
        let w = (b.p2 - b.p1) / 8.0;
        let cell = CellProblem::new(b.g.clone(), b.v.clone(), cfg.cell())?;
        let mut curve = Vec::new();
        for p in cell.sweep(&linspace(b.theta0 - w, b.theta0 + w, cfg.points)) {
            curve.push((p.theta, p.result?.hbar));
        }
        curve
    } else {
        report.curve.clone()
    };
    write_table(&cfg.out.join("hbar_curve.csv"), &["theta", "hbar"], curve.iter().map(|&(t, h)| vec![t, h]))?;
    if let Some(cert) = report.certificate {
        write_json(&cfg.out.join("certificate.json"), &cert)?;
    }
    println!("figures: {label} -> {}", cfg.out.display());
    Ok(if report.certified() { Outcome::Done } else { Outcome::NotCertified })
}
