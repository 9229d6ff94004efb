//! Verification and sharp-constant engine for Evans-Lewis type inequalities
//! in three dimensions.
//!
//! The numerical core is generic over the scalar type ([`Real`]); the
//! aliases below fix it to `f64`, which is what the command-line front end
//! uses.

pub mod cartesian;
pub mod cli;
pub mod error;
pub mod profiles;
pub mod quadrature;
pub mod rayleigh;
pub mod scalar;
pub mod sharp;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::{Field, Rational, Real};

pub type RadialProfile = profiles::RadialProfile<f64>;
pub type SupportWindow = profiles::SupportWindow<f64>;
pub type QuadratureConfig = quadrature::QuadratureConfig<f64>;
pub type IntegralResult = quadrature::IntegralResult<f64>;
pub type ModeComponent = spectral::ModeComponent<f64>;
pub type TestFunction = spectral::TestFunction<f64>;
pub type NormReport = spectral::NormReport<f64>;
pub type ProofLedger = spectral::ProofLedger<f64>;
pub type MellinSymbol = sharp::MellinSymbol<f64>;
pub type SpectrumSpec = sharp::SpectrumSpec<f64>;
pub type SharpConstantResult = sharp::SharpConstantResult<f64>;
pub type LogGrid = rayleigh::LogGrid<f64>;
pub type FormMatrices = rayleigh::FormMatrices<f64>;
pub type EigResult = rayleigh::EigResult<f64>;
pub type SamplePoint = cartesian::SamplePoint<f64>;
pub type FdConfig = cartesian::FdConfig<f64>;
