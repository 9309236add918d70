//! CSV and JSON artifacts: sweeps, correctors, bundles, certificates, run logs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::{CellGrid, CorrectorSolution};
use crate::error::{Error, Result};
use crate::hamiltonian::{catalog, Hamiltonian1D, Orientation, SampledTable};
use crate::pde::LogRow;
use crate::potential::PeriodicPotential;
use crate::synth::{synthesize_potential, CounterexampleBundle, ProfileSpec, Regime};

/// Lossless text form of a double (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// Write a table of doubles under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!("row of {} values under {} columns", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a table of doubles, checking the header.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let found: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::InvalidInput(format!("{}: expected columns {header:?}, found {found:?}", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("{}: '{s}': {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// `theta,hbar,p0,residual`.
pub fn write_sweep_csv(path: &Path, solutions: &[CorrectorSolution]) -> Result<()> {
    write_table(
        path,
        &["theta", "hbar", "p0", "residual"],
        solutions.iter().map(|s| vec![s.theta, s.hbar, s.p0, s.residual]),
    )
}

/// `x,f_theta` on the solver grid.
pub fn write_corrector_csv(path: &Path, sol: &CorrectorSolution) -> Result<()> {
    write_table(path, &["x", "f_theta"], sol.x_grid.iter().zip(&sol.f_grid).map(|(&x, &f)| vec![x, f]))
}

/// `t,mean_w,max_w,min_w`.
pub fn write_pde_log(path: &Path, log: &[LogRow]) -> Result<()> {
    write_table(path, &["t", "mean_w", "max_w", "min_w"], log.iter().map(|r| vec![r.t, r.mean_w, r.max_w, r.min_w]))
}

/// Piecewise-sampled Hamiltonian from columns `p,G,G1,G2`.
pub fn read_hamiltonian_csv(path: &Path) -> Result<Hamiltonian1D> {
    let rows = read_table(path, &["p", "G", "G1", "G2"])?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let table = SampledTable::new(col(0), col(1), col(2), col(3))?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sampled").to_string();
    Ok(Hamiltonian1D::from_table(label, table))
}

/// Periodic potential from columns `x,V` sampled on `[0, 1)`.
pub fn read_potential_csv(path: &Path) -> Result<PeriodicPotential> {
    let rows = read_table(path, &["x", "V"])?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sampled").to_string();
    PeriodicPotential::from_samples(label, rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
}

/// Catalog name or path to a `p,G,G1,G2` CSV.
pub fn resolve_hamiltonian(spec: &str) -> Result<Hamiltonian1D> {
    if spec.ends_with(".csv") || Path::new(spec).is_file() {
        read_hamiltonian_csv(Path::new(spec))
    } else {
        Ok(catalog(spec)?.hamiltonian)
    }
}

/// `zero`, `cos`, `cos:<amp>`, `const:<value>` or a path to an `x,V` CSV.
pub fn resolve_potential(spec: &str) -> Result<PeriodicPotential> {
    let number = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("potential '{spec}': {e}")));
    match spec.split_once(':') {
        _ if spec == "zero" => Ok(PeriodicPotential::zero()),
        _ if spec == "cos" => Ok(PeriodicPotential::cosine(1.0)),
        Some(("cos", a)) => Ok(PeriodicPotential::cosine(number(a)?)),
        Some(("const", a)) => Ok(PeriodicPotential::constant(number(a)?)),
        _ if spec.ends_with(".csv") || Path::new(spec).is_file() => read_potential_csv(Path::new(spec)),
        _ => Err(Error::InvalidInput(format!(
            "unknown potential '{spec}' (use zero, cos, cos:<amp>, const:<value> or an x,V CSV file)"
        ))),
    }
}

/// JSON manifest describing a [`CounterexampleBundle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    /// Catalog name, or path of the `p,G,G1,G2` table.
    pub g_label: String,
    pub p1: f64,
    pub p2: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub ell: f64,
    pub ell_prime: f64,
    pub a: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub theta0: f64,
    pub regime: Regime,
    pub orientation: Orientation,
    pub k1: f64,
    pub k2: f64,
}

impl BundleManifest {
    pub fn of(bundle: &CounterexampleBundle, g_label: impl Into<String>) -> Self {
        let p = &bundle.profile;
        Self {
            g_label: g_label.into(),
            p1: bundle.p1,
            p2: bundle.p2,
            big_l: p.big_l,
            ell: p.ell,
            ell_prime: p.ell_prime,
            a: p.a,
            p_min: p.p_min,
            p_max: p.p_max,
            theta0: bundle.theta0,
            regime: bundle.regime,
            orientation: bundle.orientation,
            k1: bundle.k1,
            k2: bundle.k2,
        }
    }

    /// Rebuild the bundle from the stored profile parameters.
    pub fn to_bundle(&self) -> Result<CounterexampleBundle> {
        let g = resolve_hamiltonian(&self.g_label)?;
        let (gw, q1, q2) = match self.orientation {
            Orientation::Direct => (g.clone(), self.p1, self.p2),
            Orientation::Reflected => (g.reflected(), -self.p2, -self.p1),
        };
        let profile = ProfileSpec::new(q1, q2, self.big_l, self.ell, self.ell_prime, self.a, self.p_min, self.p_max)?;
        let (vw, theta_w) = synthesize_potential(&gw, &profile);
        let (v, theta0) = match self.orientation {
            Orientation::Direct => (vw, theta_w),
            Orientation::Reflected => (vw.reflected(), -theta_w),
        };
        if (theta0 - self.theta0).abs() > 1e-12 * (1.0 + theta0.abs()) {
            return Err(Error::InvalidInput(format!("manifest theta0 {} disagrees with the profile mean {theta0}", self.theta0)));
        }
        Ok(CounterexampleBundle {
            g,
            v,
            theta0,
            profile,
            k1: self.k1,
            k2: self.k2,
            regime: self.regime,
            orientation: self.orientation,
            p1: self.p1,
            p2: self.p2,
        })
    }
}

/// `x,f,fprime,V` on the breakpoint-aligned solver grid with `n` cells.
pub fn bundle_profile_rows(bundle: &CounterexampleBundle, n: usize, min_per_piece: usize) -> Result<Vec<Vec<f64>>> {
    let grid = CellGrid::new(&bundle.v, n, min_per_piece)?;
    Ok(grid.x.iter().map(|&x| vec![x, bundle.profile_value(x), bundle.profile_d1(x), bundle.v.eval(x)]).collect())
}

/// Write `<stem>.json` and `<stem>_profile.csv` into `dir`.
pub fn write_bundle(
    dir: &Path,
    stem: &str,
    bundle: &CounterexampleBundle,
    g_label: &str,
    n: usize,
    min_per_piece: usize,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let json = dir.join(format!("{stem}.json"));
    let csv = dir.join(format!("{stem}_profile.csv"));
    write_json(&json, &BundleManifest::of(bundle, g_label))?;
    write_table(&csv, &["x", "f", "fprime", "V"], bundle_profile_rows(bundle, n, min_per_piece)?)?;
    Ok((json, csv))
}

/// Load a bundle from its JSON manifest.
pub fn read_bundle(path: &Path) -> Result<CounterexampleBundle> {
    read_json::<BundleManifest>(path)?.to_bundle()
}
