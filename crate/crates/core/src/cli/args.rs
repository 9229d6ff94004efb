use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Verification and sharp-constant engine for Evans-Lewis type inequalities.
#[derive(Debug, Parser)]
#[command(name = "evanslewis", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,

    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-14)]
    pub abs_tol: f64,

    /// Subdivision budget of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 2000)]
    pub max_subdivisions: usize,

    /// Print JSON on stdout.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,

    /// Print CSV on stdout.
    #[arg(long, global = true)]
    pub csv: bool,

    /// Also write every output file into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norm report, identity residual and inequality slacks of a test function.
    Verify(VerifyArgs),
    /// Sharp spherical constant of a spectrum.
    Sharp(SharpArgs),
    /// Boundary of the admissible (k1, k2) region.
    Region(RegionArgs),
    /// Variational constants and extremizers on widening log-grids.
    Extremize(ExtremizeArgs),
    /// Cartesian finite-difference check of the mode formulas.
    Xcheck(XcheckArgs),
    /// Full verification battery.
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Demo {
    /// Single mode k = 1 with profile r e^{-r}.
    Worked,
    /// Two modes k = 0 and k = 1.
    TwoMode,
    /// Extremizing plateau of half-length 20 in mode k = 1.
    Plateau,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Function spec file: a JSON array of {k, m, profile} or an object
    /// {components, spectrum}.
    #[arg(required_unless_present = "demo", conflicts_with = "demo")]
    pub file: Option<PathBuf>,

    /// Built-in test function.
    #[arg(long, value_enum)]
    pub demo: Option<Demo>,

    /// Coefficient k1 of a weighted inequality to check.
    #[arg(long, requires = "k2")]
    pub k1: Option<f64>,

    /// Coefficient k2 of a weighted inequality to check.
    #[arg(long, requires = "k1")]
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SharpArgs {
    /// Use the spectrum k(k+1) of the sphere.
    #[arg(
        long,
        conflicts_with = "spectrum",
        required_unless_present = "spectrum"
    )]
    pub sphere: bool,

    /// Number of sphere eigenvalues tabulated.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,

    /// Spectrum file {"kind": "custom", "eigenvalues": [...]} or
    /// {"kind": "sphere", "k_max": N}.
    #[arg(long, value_name = "FILE")]
    pub spectrum: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    /// k1 values: a comma-separated list or `START:STOP:COUNT`.
    #[arg(long, default_value = "0:1:21")]
    pub k1_grid: String,

    /// Largest listed sphere eigenvalue index before the tail rule.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,

    /// Allowed distance from the closed-form boundary.
    #[arg(long, default_value_t = 1e-6)]
    pub region_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtremizeArgs {
    /// Mode eigenvalue lambda.
    #[arg(long, default_value_t = 2.0)]
    pub mode_eigenvalue: f64,

    /// Numerator form: lap, lap_r, lap_s, inv or mix:K1,K2.
    #[arg(long, default_value = "lap_s")]
    pub numerator: String,

    /// Denominator form.
    #[arg(long, default_value = "lap")]
    pub denominator: String,

    /// Half-lengths L of the grids [-L, L], comma-separated and increasing.
    #[arg(long = "L", value_delimiter = ',', default_value = "5,10,20")]
    pub half_lengths: Vec<f64>,

    /// Node count of the largest grid; the others keep the same step.
    /// Defaults to 40 L + 1.
    #[arg(long)]
    pub n: Option<usize>,

    /// Smallest accepted final theta as a fraction of the symbol bound.
    #[arg(long, default_value_t = 0.95)]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct XcheckArgs {
    /// Harmonic degree, at most 3.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Harmonic order label in -k..=k.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub m: i32,

    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,

    /// Radial profile as inline JSON or @FILE. Defaults to r e^{-r}.
    #[arg(long)]
    pub profile: Option<String>,

    /// Smallest sample radius.
    #[arg(long, default_value_t = 0.5)]
    pub r_min: f64,

    /// Largest sample radius.
    #[arg(long, default_value_t = 3.0)]
    pub r_max: f64,

    /// Number of sample points.
    #[arg(long, default_value_t = 10)]
    pub points: usize,
}
