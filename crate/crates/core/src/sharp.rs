//! Sharp constants from the Mellin symbol of the radial Laplacian.
//!
//! On scale-critical powers `r^z`, `z = 1/2 + it`, the radial Laplacian in
//! three dimensions acts as multiplication by `A(t) = z(z+1) =
//! (3/4 - t^2) + 2it`, and a mode with spherical eigenvalue `lambda` acts
//! through `A(t) - lambda`. Every best constant below is an extremum over
//! `t` (and over the spectrum) of a ratio of squared moduli of these
//! symbols. Closed forms are provided where they exist and are generic over
//! [`Field`], so they can be evaluated in exact rational arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{critical_symbol, frac, lit, rellich_coefficient, to_f64, Field, Real};

/// `z(z+1)` at `z = 1/2 + it`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinSymbol<T> {
    pub t: T,
    pub re: T,
    pub im: T,
}

impl<T: Real> MellinSymbol<T> {
    /// `|A(t)|^2`.
    pub fn modulus_sq(&self) -> T {
        self.re * self.re + self.im * self.im
    }

    /// `|A(t) - lambda|^2`.
    pub fn shifted_modulus_sq(&self, lambda: T) -> T {
        let d = self.re - lambda;
        d * d + self.im * self.im
    }
}

pub fn symbol<T: Real>(t: T) -> MellinSymbol<T> {
    MellinSymbol {
        t,
        re: critical_symbol::<T>() - t * t,
        im: lit::<T>(2.0) * t,
    }
}

/// Which route produced a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Scan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpConstantResult<T> {
    pub constant: T,
    /// Spectrum index of the binding mode, when a spectrum was given.
    pub attaining_index: Option<usize>,
    pub attaining_eigenvalue: Option<T>,
    pub attaining_t: T,
    pub method: Method,
    pub closed_form: Option<T>,
    pub scan: T,
    pub warnings: Vec<String>,
}

/// Eigenvalues of `-Lambda` on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "SpectrumFile<T>",
    into = "SpectrumFile<T>",
    bound = "T: Real"
)]
pub struct SpectrumSpec<T> {
    eigenvalues: Vec<T>,
    tail: Option<TailRule>,
}

/// Continuation of a spectrum beyond its listed eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailRule {
    /// `k(k+1)` for every index `k`.
    Sphere,
}

/// On-disk form of a spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumFile<T> {
    Sphere { k_max: usize },
    Custom { eigenvalues: Vec<T> },
}

impl<T: Real> TryFrom<SpectrumFile<T>> for SpectrumSpec<T> {
    type Error = Error;

    fn try_from(f: SpectrumFile<T>) -> Result<Self> {
        match f {
            SpectrumFile::Sphere { k_max } => Ok(Self::sphere(k_max)),
            SpectrumFile::Custom { eigenvalues } => Self::custom(eigenvalues),
        }
    }
}

impl<T: Real> From<SpectrumSpec<T>> for SpectrumFile<T> {
    fn from(s: SpectrumSpec<T>) -> Self {
        match s.tail {
            Some(TailRule::Sphere) => SpectrumFile::Sphere {
                k_max: s.eigenvalues.len() - 1,
            },
            None => SpectrumFile::Custom {
                eigenvalues: s.eigenvalues,
            },
        }
    }
}

/// `mu_k = k(k+1)`.
pub fn sphere_eigenvalue<T: Real>(k: usize) -> T {
    T::from_usize(k * (k + 1)).unwrap()
}

impl<T: Real> SpectrumSpec<T> {
    /// `{k(k+1)}` listed up to `k_max` and continued by the same rule.
    pub fn sphere(k_max: usize) -> Self {
        Self {
            eigenvalues: (0..=k_max.max(1)).map(sphere_eigenvalue).collect(),
            tail: Some(TailRule::Sphere),
        }
    }

    pub fn custom(eigenvalues: Vec<T>) -> Result<Self> {
        let Some(first) = eigenvalues.first() else {
            return Err(Error::Spectrum("eigenvalue list is empty".into()));
        };
        if *first != T::zero() {
            return Err(Error::Spectrum(format!(
                "the first eigenvalue must be 0, got {first}"
            )));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::Spectrum("eigenvalues must be finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Spectrum(
                "eigenvalues must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            eigenvalues,
            tail: None,
        })
    }

    pub fn is_sphere(&self) -> bool {
        self.tail == Some(TailRule::Sphere)
    }

    pub fn listed(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn tail(&self) -> Option<TailRule> {
        self.tail
    }

    /// Eigenvalue with index `k`, if the spectrum has one.
    pub fn eigenvalue(&self, k: usize) -> Option<T> {
        match (self.eigenvalues.get(k), self.tail) {
            (Some(l), _) => Some(*l),
            (None, Some(TailRule::Sphere)) => Some(sphere_eigenvalue(k)),
            (None, None) => None,
        }
    }

    fn check_regular(&self) -> Result<()> {
        let three_quarters = critical_symbol::<T>();
        if let Some(l) = self
            .eigenvalues
            .iter()
            .find(|l| is_critical(**l, three_quarters))
        {
            return Err(Error::SingularSpectrum(to_f64(*l)));
        }
        if self.eigenvalues.len() < 2 && self.tail.is_none() {
            return Err(Error::Spectrum("spectrum has no nonzero eigenvalue".into()));
        }
        Ok(())
    }
}

fn is_critical<T: Real>(lambda: T, critical: T) -> bool {
    (lambda - critical).abs() <= lit::<T>(4.0) * T::epsilon() * critical
}

/// Grid-plus-golden-section search over `t in [0, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub t_max: f64,
    pub grid_points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            t_max: 50.0,
            grid_points: 5001,
        }
    }
}

/// `(argmin, min)` of `f` over `[0, t_max]`. The objectives here are even
/// in `t`, so the half line suffices.
pub fn minimize_over_t<T: Real, F: Fn(T) -> T>(f: F, cfg: &ScanConfig) -> (T, T) {
    let n = cfg.grid_points.max(3);
    let t_max = lit::<T>(cfg.t_max);
    let step = t_max / T::from_usize(n - 1).unwrap();
    let node = |j: usize| step * T::from_usize(j).unwrap();
    let mut best_j = 0;
    let mut best = f(T::zero());
    for j in 1..n {
        let v = f(node(j));
        if v < best {
            best = v;
            best_j = j;
        }
    }
    let lo = node(best_j.saturating_sub(1));
    let hi = node((best_j + 1).min(n - 1));
    let (t_ref, v_ref) = golden_section(&f, lo, hi);
    if v_ref < best {
        (t_ref, v_ref)
    } else {
        (node(best_j), best)
    }
}

/// `(argmax, max)` of `f` over `[0, t_max]`.
pub fn maximize_over_t<T: Real, F: Fn(T) -> T>(f: F, cfg: &ScanConfig) -> (T, T) {
    let (t, v) = minimize_over_t(|t| -f(t), cfg);
    (t, -v)
}

fn golden_section<T: Real, F: Fn(T) -> T>(f: &F, mut a: T, mut b: T) -> (T, T) {
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let tol = T::epsilon().sqrt() * (T::one() + b.abs());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // Endpoints matter when the minimizer sits on the boundary t = 0.
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for t in [a, b] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// `lambda^2 / (lambda - 3/4)^2` for `lambda > 3/4`, else `None`.
pub fn closed_form_mode_constant<F: Field>(lambda: F) -> Option<F> {
    let denom = lambda.clone() + rellich_coefficient::<F>();
    if denom <= F::zero() {
        return None;
    }
    Some(lambda.clone() * lambda / (denom.clone() * denom))
}

/// Threshold `1 - R^2 (1/lambda + 1/R)^2`, `R = -3/4`, above which the
/// per-mode quadratic `R^2 + alpha lambda^2 + 2 R lambda` is nonnegative.
pub fn generalized_alpha<F: Field>(lambda: F) -> Result<F> {
    if lambda <= F::zero() {
        return Err(Error::Parameter(format!(
            "generalized_alpha needs a positive eigenvalue, got {lambda:?}"
        )));
    }
    let r = rellich_coefficient::<F>();
    let inner = F::one() / lambda + F::one() / r.clone();
    Ok(F::one() - r.clone() * r * inner.clone() * inner)
}

/// `(25 - 9 k1) / 64`, the boundary of the proven weighted region.
pub fn region_closed_form<F: Field>(k1: F) -> F {
    (frac::<F>(25, 1) - frac::<F>(9, 1) * k1) / frac::<F>(64, 1)
}

fn agreement_tol<T: Real>() -> T {
    lit::<T>(1e-10).max(lit::<T>(1e4) * T::epsilon())
}

/// Best constant `C(lambda) = sup lambda^2 ||g/r^2||^2 / ||(Delta_r - lambda/r^2) g||^2`
/// for a single mode, by closed form and by scanning `|A(t) - lambda|^2`.
pub fn mode_spherical_constant<T: Real>(lambda: T) -> Result<SharpConstantResult<T>> {
    mode_spherical_constant_with(lambda, &ScanConfig::default())
}

pub fn mode_spherical_constant_with<T: Real>(
    lambda: T,
    cfg: &ScanConfig,
) -> Result<SharpConstantResult<T>> {
    if !(lambda.is_finite() && lambda > T::zero()) {
        return Err(Error::Parameter(format!(
            "mode eigenvalue must be positive, got {lambda}"
        )));
    }
    if is_critical(lambda, critical_symbol()) {
        return Err(Error::SingularSpectrum(to_f64(lambda)));
    }
    let (t_min, m_min) = minimize_over_t(|t| symbol(t).shifted_modulus_sq(lambda), cfg);
    let scan = lambda * lambda / m_min;
    let mut warnings = Vec::new();
    let closed = if lambda > critical_symbol() {
        closed_form_mode_constant(lambda)
    } else {
        warnings.push(format!(
            "eigenvalue {lambda} lies below 3/4; closed form not applied, scan value reported"
        ));
        None
    };
    if let Some(c) = closed {
        if (c - scan).abs() > agreement_tol::<T>() * c {
            return Err(Error::Eigen(format!(
                "closed form {c} and scan {scan} disagree for eigenvalue {lambda}"
            )));
        }
    }
    Ok(SharpConstantResult {
        constant: closed.unwrap_or(scan),
        attaining_index: None,
        attaining_eigenvalue: Some(lambda),
        attaining_t: t_min,
        method: if closed.is_some() {
            Method::ClosedForm
        } else {
            Method::Scan
        },
        closed_form: closed,
        scan,
        warnings,
    })
}

/// `sup_k C(lambda_k)` over the nonzero spectrum.
///
/// For spectra above `3/4` the per-mode constant decreases in `lambda`, so
/// a spectrum continued by an increasing tail is settled by its listed part.
pub fn global_spherical_constant<T: Real>(
    spec: &SpectrumSpec<T>,
) -> Result<SharpConstantResult<T>> {
    spec.check_regular()?;
    let mut best: Option<SharpConstantResult<T>> = None;
    for (k, &lambda) in spec.listed().iter().enumerate().skip(1) {
        let mut res = mode_spherical_constant(lambda)?;
        res.attaining_index = Some(k);
        if best.as_ref().is_none_or(|b| res.constant > b.constant) {
            best = Some(res);
        }
    }
    if best.is_none() {
        // Only the tail provides nonzero eigenvalues.
        let mut res = mode_spherical_constant(spec.eigenvalue(1).expect("tail"))?;
        res.attaining_index = Some(1);
        best = Some(res);
    }
    Ok(best.expect("at least one nonzero eigenvalue"))
}

/// Alpha thresholds per nonzero listed eigenvalue: `(index, lambda, alpha)`.
pub fn alpha_table<T: Real>(spec: &SpectrumSpec<T>) -> Result<Vec<(usize, T, T)>> {
    spec.listed()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &l)| Ok((k, l, generalized_alpha(l)?)))
        .collect()
}

/// `(|A - mu|^2 - k1 |A|^2) / mu^2`, the weighted-region kernel.
pub fn region_kernel<T: Real>(k1: T, mu: T, t: T) -> T {
    let a = symbol(t);
    (a.shifted_modulus_sq(mu) - k1 * a.modulus_sq()) / (mu * mu)
}

/// Infimum of the region kernel for one eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeInfimum<T> {
    pub index: usize,
    pub eigenvalue: T,
    pub t: T,
    pub value: T,
}

/// Largest admissible `k2` for a given `k1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint<T> {
    pub k1: T,
    pub k2_max: T,
    pub attaining_index: usize,
    pub attaining_t: T,
    /// Last spectrum index examined.
    pub truncated_at: usize,
    /// `(25 - 9 k1) / 64` when the spectrum is the sphere's.
    pub closed_form: Option<T>,
    pub per_mode: Vec<ModeInfimum<T>>,
}

/// Consecutive increases of the per-mode infimum after which the tail scan
/// stops. The kernel at fixed `t` increases in `mu` for `mu >= 2`.
const MONOTONE_RUN: usize = 3;
const MAX_TAIL_INDEX: usize = 10_000;

/// `k2max(k1) = inf_{k, t} (|A(t) - mu_k|^2 - k1 |A(t)|^2) / mu_k^2`.
pub fn region_boundary<T: Real>(k1: T, spec: &SpectrumSpec<T>) -> Result<RegionPoint<T>> {
    region_boundary_with(k1, spec, &ScanConfig::default())
}

pub fn region_boundary_with<T: Real>(
    k1: T,
    spec: &SpectrumSpec<T>,
    cfg: &ScanConfig,
) -> Result<RegionPoint<T>> {
    if !(k1 >= T::zero() && k1 <= T::one()) {
        return Err(Error::Parameter(format!("k1 must lie in [0, 1], got {k1}")));
    }
    spec.check_regular()?;
    let mut per_mode: Vec<ModeInfimum<T>> = Vec::new();
    let mut run = 0;
    let mut k = 1;
    loop {
        let Some(mu) = spec.eigenvalue(k) else { break };
        let (t, value) = minimize_over_t(|t| region_kernel(k1, mu, t), cfg);
        if let Some(prev) = per_mode.last() {
            run = if value > prev.value { run + 1 } else { 0 };
        }
        per_mode.push(ModeInfimum {
            index: k,
            eigenvalue: mu,
            t,
            value,
        });
        let in_tail = k + 1 >= spec.listed().len();
        if (in_tail && run >= MONOTONE_RUN) || k >= MAX_TAIL_INDEX {
            break;
        }
        k += 1;
    }
    let best = per_mode
        .iter()
        .fold(None::<&ModeInfimum<T>>, |acc, m| match acc {
            Some(b) if b.value <= m.value => Some(b),
            _ => Some(m),
        })
        .expect("at least one nonzero eigenvalue");
    Ok(RegionPoint {
        k1,
        k2_max: best.value,
        attaining_index: best.index,
        attaining_t: best.t,
        truncated_at: per_mode.last().map_or(0, |m| m.index),
        closed_form: spec.is_sphere().then(|| region_closed_form(k1)),
        per_mode: per_mode.clone(),
    })
}

/// Best constant in `||Delta f||^2 >= ||Delta_r f||^2 + c ||Delta_s f||^2`
/// over the sphere spectrum: the region boundary at `k1 = 1`.
pub fn improved_constant<T: Real>() -> Result<SharpConstantResult<T>> {
    let p = region_boundary(T::one(), &SpectrumSpec::sphere(1))?;
    Ok(SharpConstantResult {
        constant: p.k2_max,
        attaining_index: Some(p.attaining_index),
        attaining_eigenvalue: Some(sphere_eigenvalue(p.attaining_index)),
        attaining_t: p.attaining_t,
        method: Method::Scan,
        closed_form: None,
        scan: p.k2_max,
        warnings: vec![format!("mode scan truncated at k = {}", p.truncated_at)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow<T> {
    pub k: usize,
    pub mu: T,
    pub ratio_at_zero: T,
    pub max_ratio: T,
    pub at_t: T,
}

/// Scan of `|A(t)|^2 / |A(t) - mu_k|^2`, the per-mode quotient of
/// `||Delta_r f||^2` over `||Delta f||^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialAudit<T> {
    pub rows: Vec<AuditRow<T>>,
    pub grid_max: T,
    /// The quotient in the radial sector, where both operators coincide.
    pub radial_value: T,
    pub all_below_one: bool,
}

pub fn radial_constant_audit<T: Real>(k_max: usize) -> RadialAudit<T> {
    let cfg = ScanConfig::default();
    let rows: Vec<AuditRow<T>> = (1..=k_max.max(1))
        .map(|k| {
            let mu = sphere_eigenvalue::<T>(k);
            let ratio = |t: T| {
                let a = symbol(t);
                a.modulus_sq() / a.shifted_modulus_sq(mu)
            };
            let (at_t, max_ratio) = maximize_over_t(ratio, &cfg);
            AuditRow {
                k,
                mu,
                ratio_at_zero: ratio(T::zero()),
                max_ratio,
                at_t,
            }
        })
        .collect();
    let grid_max = rows
        .iter()
        .map(|r| r.max_ratio)
        .fold(T::neg_infinity(), T::max);
    RadialAudit {
        all_below_one: rows.iter().all(|r| r.max_ratio < T::one()),
        rows,
        grid_max,
        radial_value: T::one(),
    }
}
