//! Run configuration: defaults, JSON file, command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hjc_core::cell::CellConfig;
use hjc_core::diagnostics::{CertifyOptions, HBAR_TOLERANCE};
use hjc_core::pde::PdeOptions;
use serde::{Deserialize, Serialize};

/// Every tunable of a run. Flags override the JSON file, which overrides
/// these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog name or `p,G,G1,G2` CSV file; each command has its own default.
    pub hamiltonian: Option<String>,
    /// `zero`, `cos`, `cos:<amp>`, `const:<v>`, an `x,V` CSV, or `from-bundle`.
    pub potential: String,
    /// Bundle manifest written by `synthesize`.
    pub bundle: Option<PathBuf>,
    /// Plateau momenta; default to the catalog entry's points.
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    /// `a:b:n`, or a comma list whose items may be `theta0`.
    pub theta: Option<String>,
    /// ODE grid cells.
    pub n: usize,
    pub min_per_piece: usize,
    pub guard: f64,
    pub tol_period: f64,
    pub tol_theta: f64,
    pub hbar_tolerance: f64,
    /// Sweep points for certification and segment scans.
    pub points: usize,
    pub c_exp_min: u32,
    pub c_exp_max: u32,
    /// PDE grid cells, horizon and step.
    pub n_x: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Oracle grid cells (the refined value also uses twice this).
    pub oracle_n: usize,
    /// Dimensions for `multid`.
    pub dims: Vec<usize>,
    /// Segment half-width for `multid`; defaults to the certified one.
    pub c: Option<f64>,
    /// Monte-Carlo midpoint pairs per level.
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cell = CellConfig::default();
        let cert = CertifyOptions::default();
        let pde = PdeOptions::default();
        Self {
            hamiltonian: None,
            potential: "zero".into(),
            bundle: None,
            p1: None,
            p2: None,
            theta: None,
            n: cell.n,
            min_per_piece: cell.min_per_piece,
            guard: cell.guard,
            tol_period: cell.tol_period,
            tol_theta: cell.tol_theta,
            hbar_tolerance: HBAR_TOLERANCE,
            points: cert.points,
            c_exp_min: cert.c_exp_min,
            c_exp_max: cert.c_exp_max,
            n_x: pde.n_x,
            t_end: pde.t_end,
            dt: pde.dt,
            oracle_n: 512,
            dims: vec![2, 3],
            c: None,
            samples: 100_000,
            seed: 7,
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// Command-line overrides; any of them may follow any subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON file with RunConfig fields (flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Catalog name (quadratic, fig2_bump, fig3_flat, multid_g1, flat_quartic) or p,G,G1,G2 CSV.
    #[arg(long, global = true)]
    pub hamiltonian: Option<String>,
    /// zero, cos, cos:<amp>, const:<v>, an x,V CSV, or from-bundle.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    /// Bundle manifest JSON (implies --potential from-bundle).
    #[arg(long, visible_alias = "from-bundle", global = true, value_name = "FILE")]
    pub bundle: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p2: Option<f64>,
    /// a:b:n, or a comma list (items may be theta0).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// ODE grid cells.
    #[arg(long = "N", visible_alias = "n", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub min_per_piece: Option<usize>,
    #[arg(long, global = true)]
    pub tol_period: Option<f64>,
    #[arg(long, global = true)]
    pub tol_theta: Option<f64>,
    #[arg(long, global = true)]
    pub hbar_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// PDE grid cells.
    #[arg(long = "N-x", visible_alias = "n-x", global = true)]
    pub n_x: Option<usize>,
    /// PDE horizon.
    #[arg(long = "T", visible_alias = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub oracle_n: Option<usize>,
    /// Dimensions for multid, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: HJC_JOBS, then all cores).
    #[arg(long, global = true, env = "HJC_JOBS")]
    pub jobs: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, $($field:ident),*) => {
        $( if let Some(v) = $ov.$field.clone() { $cfg.$field = v; } )*
    };
}

impl RunConfig {
    /// Defaults, then the optional file, then the flags.
    pub fn resolve(ov: &Overrides) -> Result<Self> {
        let mut cfg = match &ov.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        apply!(
            cfg,
            ov,
            potential,
            n,
            min_per_piece,
            tol_period,
            tol_theta,
            hbar_tolerance,
            points,
            n_x,
            t_end,
            dt,
            oracle_n,
            dims,
            samples,
            seed,
            out
        );
        if ov.bundle.is_some() {
            cfg.bundle = ov.bundle.clone();
            if ov.potential.is_none() {
                cfg.potential = "from-bundle".into();
            }
        }
        for (dst, src) in [(&mut cfg.p1, ov.p1), (&mut cfg.p2, ov.p2), (&mut cfg.c, ov.c)] {
            if src.is_some() {
                *dst = src;
            }
        }
        if ov.theta.is_some() {
            cfg.theta = ov.theta.clone();
        }
        if ov.hamiltonian.is_some() {
            cfg.hamiltonian = ov.hamiltonian.clone();
        }
        if ov.jobs.is_some() {
            cfg.jobs = ov.jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_period", self.tol_period),
            ("tol_theta", self.tol_theta),
            ("hbar_tolerance", self.hbar_tolerance),
            ("guard", self.guard),
            ("T", self.t_end),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
        }
        if self.n < 16 || self.min_per_piece < 2 {
            bail!("N must be at least 16 and min_per_piece at least 2");
        }
        if self.points < 3 {
            bail!("points must be at least 3, got {}", self.points);
        }
        if self.c_exp_min > self.c_exp_max || self.c_exp_max > 60 {
            bail!("need c_exp_min <= c_exp_max <= 60");
        }
        if self.dims.iter().any(|&d| d < 2) || self.dims.is_empty() {
            bail!("dims must list dimensions >= 2");
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c < 1.0) {
                bail!("c must lie in (0, 1), got {c}");
            }
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        Ok(())
    }

    /// The configured Hamiltonian, or `default` when none was given.
    pub fn hamiltonian_or<'a>(&'a self, default: &'a str) -> &'a str {
        self.hamiltonian.as_deref().unwrap_or(default)
    }

    pub fn cell(&self) -> CellConfig {
        CellConfig {
            n: self.n,
            min_per_piece: self.min_per_piece,
            guard: self.guard,
            tol_period: self.tol_period,
            tol_theta: self.tol_theta,
            ..CellConfig::default()
        }
    }

    pub fn certify(&self) -> CertifyOptions {
        CertifyOptions {
            cell: self.cell(),
            points: self.points,
            c_exp_min: self.c_exp_min,
            c_exp_max: self.c_exp_max,
            hbar_tolerance: self.hbar_tolerance,
        }
    }

    pub fn pde(&self) -> PdeOptions {
        PdeOptions { n_x: self.n_x, t_end: self.t_end, dt: self.dt, ..PdeOptions::default() }
    }
}

/// One entry of a `--theta` list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaItem {
    Value(f64),
    Theta0,
}

/// Parse `a:b:n` (inclusive, `n >= 1`) or a comma list.
pub fn parse_theta(spec: &str) -> Result<Vec<ThetaItem>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("theta range '{spec}' must look like a:b:n");
        }
        let a: f64 = parts[0].trim().parse().with_context(|| format!("theta range start '{}'", parts[0]))?;
        let b: f64 = parts[1].trim().parse().with_context(|| format!("theta range end '{}'", parts[1]))?;
        let n: usize = parts[2].trim().parse().with_context(|| format!("theta range count '{}'", parts[2]))?;
        if n == 0 || !(a.is_finite() && b.is_finite()) || (n > 1 && !(a < b)) {
            bail!("theta range '{spec}' is degenerate (need a < b and n >= 1)");
        }
        return Ok(hjc_core::numeric::linspace(a, b, n).into_iter().map(ThetaItem::Value).collect());
    }
    spec.split(',')
        .map(|s| {
            let s = s.trim();
            if s == "theta0" {
                Ok(ThetaItem::Theta0)
            } else {
                s.parse::<f64>()
                    .map(ThetaItem::Value)
                    .with_context(|| format!("theta value '{s}' is neither a number nor theta0"))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_specs() {
        let r = parse_theta("-2:2:5").unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], ThetaItem::Value(-2.0));
        assert_eq!(r[4], ThetaItem::Value(2.0));
        assert_eq!(parse_theta("theta0, 0.5").unwrap(), vec![ThetaItem::Theta0, ThetaItem::Value(0.5)]);
        assert!(parse_theta("2:1:5").is_err());
        assert!(parse_theta("0:1:0").is_err());
        assert!(parse_theta("x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"n": 2048, "points": 65, "hamiltonian": "fig3_flat"}"#).unwrap();
        let ov = Overrides { config: Some(path.clone()), points: Some(33), ..Overrides::default() };
        let cfg = RunConfig::resolve(&ov).unwrap();
        assert_eq!(cfg.n, 2048);
        assert_eq!(cfg.points, 33);
        assert_eq!(cfg.hamiltonian.as_deref(), Some("fig3_flat"));
        assert_eq!(cfg.n_x, RunConfig::default().n_x);

        std::fs::write(&path, r#"{"unknown_field": 1}"#).unwrap();
        assert!(RunConfig::resolve(&Overrides { config: Some(path), ..Overrides::default() }).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(RunConfig { tol_period: 0.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { dims: vec![1], ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { c: Some(1.5), ..RunConfig::default() }.validate().is_err());
        RunConfig::default().validate().unwrap();
    }
}
