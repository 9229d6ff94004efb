//! Per-mode reductions of the operators and the norm report of a test function.
//!
//! A test function is `f = sum_k g_k(r) Y_k(omega)` with abstract
//! orthonormal harmonics `Y_k`; distinct `(k, m)` labels are orthogonal, so
//! every squared norm is a sum over modes. For a mode with eigenvalue
//! `lambda` and profile `g`:
//!
//! * `Delta f      -> g'' + 2g'/r - lambda g / r^2`
//! * `Delta_r f    -> g'' + 2g'/r`
//! * `Delta_s f    -> -lambda g / r^2`
//! * `f_*          -> g' - g / (2r)`
//!
//! Profiles are real-valued, so the real parts of inner products are the
//! inner products themselves.
//!
//! The admissible class includes rapidly decaying profiles (`PolyExp`,
//! `GaussianLog`) in addition to compactly supported ones; the
//! integration-by-parts identities remain valid because every boundary term
//! vanishes under the declared decay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::RadialProfile;
use crate::quadrature::{integrate_u, weighted_norm_sq, IntegralResult, QuadratureConfig};
use crate::scalar::{frac, lit, rellich_coefficient, Real};
use crate::sharp::{sphere_eigenvalue, SpectrumSpec};

/// One component `g(r) Y(omega)` of a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModeComponent<T> {
    /// Harmonic degree (sphere) or spectrum index (custom).
    pub degree: usize,
    /// Label distinguishing orthonormal harmonics of the same degree.
    pub order: i32,
    pub eigenvalue: T,
    pub profile: RadialProfile<T>,
}

impl<T: Real> ModeComponent<T> {
    /// Sphere mode with eigenvalue `k(k+1)`.
    pub fn sphere(degree: usize, order: i32, profile: RadialProfile<T>) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return Err(Error::TestFunction(format!(
                "order label {order} exceeds degree {degree}"
            )));
        }
        Ok(Self {
            degree,
            order,
            eigenvalue: sphere_eigenvalue(degree),
            profile,
        })
    }

    /// Mode with index `index` into `spec`.
    pub fn in_spectrum(
        spec: &SpectrumSpec<T>,
        index: usize,
        order: i32,
        profile: RadialProfile<T>,
    ) -> Result<Self> {
        let eigenvalue = spec.eigenvalue(index).ok_or_else(|| {
            Error::TestFunction(format!("spectrum has no eigenvalue with index {index}"))
        })?;
        Ok(Self {
            degree: index,
            order,
            eigenvalue,
            profile,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum SpectrumKind<T> {
    Sphere,
    Custom(SpectrumSpec<T>),
}

/// A finite sum of modes with distinct labels, kept sorted by `(k, m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TestFunction<T> {
    components: Vec<ModeComponent<T>>,
    spectrum: SpectrumKind<T>,
}

impl<T: Real> TestFunction<T> {
    pub fn new(mut components: Vec<ModeComponent<T>>, spectrum: SpectrumKind<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::TestFunction("component list is empty".into()));
        }
        components.sort_by_key(|c| (c.degree, c.order));
        if let Some(w) = components
            .windows(2)
            .find(|w| (w[0].degree, w[0].order) == (w[1].degree, w[1].order))
        {
            return Err(Error::TestFunction(format!(
                "duplicate mode label (k={}, m={})",
                w[0].degree, w[0].order
            )));
        }
        for c in &components {
            let expected = match &spectrum {
                SpectrumKind::Sphere => {
                    if c.order.unsigned_abs() as usize > c.degree {
                        return Err(Error::TestFunction(format!(
                            "order label {} exceeds degree {}",
                            c.order, c.degree
                        )));
                    }
                    Some(sphere_eigenvalue::<T>(c.degree))
                }
                SpectrumKind::Custom(spec) => spec.eigenvalue(c.degree),
            };
            if expected != Some(c.eigenvalue) {
                return Err(Error::TestFunction(format!(
                    "eigenvalue {} of mode (k={}, m={}) does not match the spectrum",
                    c.eigenvalue, c.degree, c.order
                )));
            }
        }
        Ok(Self {
            components,
            spectrum,
        })
    }

    /// Sphere-spectrum function from `(k, m, profile)` triples.
    pub fn sphere(modes: Vec<(usize, i32, RadialProfile<T>)>) -> Result<Self> {
        let comps = modes
            .into_iter()
            .map(|(k, m, p)| ModeComponent::sphere(k, m, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps, SpectrumKind::Sphere)
    }

    pub fn components(&self) -> &[ModeComponent<T>] {
        &self.components
    }

    pub fn spectrum(&self) -> &SpectrumKind<T> {
        &self.spectrum
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.spectrum, SpectrumKind::Sphere)
    }

    /// The function with every profile replaced by `r -> g(r / s)`.
    pub fn dilate(&self, s: T) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| {
                Ok(ModeComponent {
                    profile: c.profile.dilate(s)?,
                    ..c.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            components,
            spectrum: self.spectrum.clone(),
        })
    }

    /// Single-component function for mode `i`.
    pub fn single_mode(&self, i: usize) -> Self {
        Self {
            components: vec![self.components[i].clone()],
            spectrum: self.spectrum.clone(),
        }
    }
}

/// `r -> g''(r) + 2 g'(r) / r - lambda g(r) / r^2`.
pub fn laplacian_mode<T: Real>(lambda: T, g: &RadialProfile<T>) -> impl Fn(T) -> T + '_ {
    move |r| {
        let j = g.jet_unchecked(r);
        j.d2 + lit::<T>(2.0) * j.d1 / r - lambda * j.value / (r * r)
    }
}

/// `r -> g''(r) + 2 g'(r) / r`.
pub fn radial_laplacian_mode<T: Real>(g: &RadialProfile<T>) -> impl Fn(T) -> T + '_ {
    move |r| {
        let j = g.jet_unchecked(r);
        j.d2 + lit::<T>(2.0) * j.d1 / r
    }
}

/// `r -> g'(r) - g(r) / (2r)`.
pub fn f_star_mode<T: Real>(g: &RadialProfile<T>) -> impl Fn(T) -> T + '_ {
    move |r| {
        let j = g.jet_unchecked(r);
        j.d1 - j.value / (lit::<T>(2.0) * r)
    }
}

/// The norm quantities of one mode or of a whole function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormQuantities<T> {
    /// `||Delta f||^2`, or `||L f||^2` for a custom spectrum.
    pub lap_sq: T,
    pub lap_r_sq: T,
    /// `||Delta_s f||^2 = ||sum_j L_j^2 f||^2`.
    pub lap_s_sq: T,
    /// `sum_j ||L_j f / |x| ||^2`.
    pub sph_grad_sq: T,
    /// `||f / |x|^2||^2`.
    pub inv_sq: T,
    /// `<-sum_j L_j^2 f_*, f_*>`.
    pub fstar_term: T,
}

impl<T: Real> NormQuantities<T> {
    fn zero() -> Self {
        Self {
            lap_sq: T::zero(),
            lap_r_sq: T::zero(),
            lap_s_sq: T::zero(),
            sph_grad_sq: T::zero(),
            inv_sq: T::zero(),
            fstar_term: T::zero(),
        }
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            lap_sq: self.lap_sq + o.lap_sq,
            lap_r_sq: self.lap_r_sq + o.lap_r_sq,
            lap_s_sq: self.lap_s_sq + o.lap_s_sq,
            sph_grad_sq: self.sph_grad_sq + o.sph_grad_sq,
            inv_sq: self.inv_sq + o.inv_sq,
            fstar_term: self.fstar_term + o.fstar_term,
        }
    }

    /// `lap_sq - [lap_r_sq + lap_s_sq + 2 R sph_grad_sq + 2 fstar_term]`
    /// with `R = -3/4`.
    pub fn identity_residual(&self) -> T {
        let two = lit::<T>(2.0);
        self.lap_sq
            - (self.lap_r_sq
                + self.lap_s_sq
                + two * rellich_coefficient::<T>() * self.sph_grad_sq
                + two * self.fstar_term)
    }

    pub fn as_array(&self) -> [T; 6] {
        [
            self.lap_sq,
            self.lap_r_sq,
            self.lap_s_sq,
            self.sph_grad_sq,
            self.inv_sq,
            self.fstar_term,
        ]
    }
}

/// Per-mode row of a [`NormReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeNorms<T> {
    pub degree: usize,
    pub order: i32,
    pub eigenvalue: T,
    #[serde(flatten)]
    pub norms: NormQuantities<T>,
    pub identity_residual: T,
    /// Sum of quadrature error estimates of the integrals of this mode.
    pub err_estimate: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport<T> {
    #[serde(flatten)]
    pub totals: NormQuantities<T>,
    pub identity_residual: T,
    pub per_mode: Vec<ModeNorms<T>>,
    pub sphere: bool,
}

impl<T: Real> NormReport<T> {
    /// Default slack tolerance `1e-9 max(1, lap_sq)`.
    pub fn default_tol(&self) -> T {
        lit::<T>(1e-9) * self.totals.lap_sq.max(T::one())
    }
}

fn integral<T: Real>(
    res: Result<IntegralResult<T>>,
    c: &ModeComponent<T>,
) -> Result<IntegralResult<T>> {
    res.map_err(|e| Error::Mode {
        degree: c.degree,
        order: c.order,
        source: Box::new(e),
    })
}

fn mode_norms<T: Real>(c: &ModeComponent<T>, cfg: &QuadratureConfig<T>) -> Result<ModeNorms<T>> {
    let g = &c.profile;
    let lambda = c.eigenvalue;
    let window = g.window();
    let breaks = g.breakpoints();
    let lap = integral(
        weighted_norm_sq(laplacian_mode(lambda, g), 2, window, &breaks, cfg),
        c,
    )?;
    let lap_r = integral(
        weighted_norm_sq(radial_laplacian_mode(g), 2, window, &breaks, cfg),
        c,
    )?;
    let inv = integral(
        weighted_norm_sq(|r| g.jet_unchecked(r).value, -2, window, &breaks, cfg),
        c,
    )?;
    let fstar = integral(weighted_norm_sq(f_star_mode(g), 0, window, &breaks, cfg), c)?;
    let norms = NormQuantities {
        lap_sq: lap.value,
        lap_r_sq: lap_r.value,
        lap_s_sq: lambda * lambda * inv.value,
        sph_grad_sq: lambda * inv.value,
        inv_sq: inv.value,
        fstar_term: lambda * fstar.value,
    };
    Ok(ModeNorms {
        degree: c.degree,
        order: c.order,
        eigenvalue: lambda,
        identity_residual: norms.identity_residual(),
        err_estimate: lap.err_estimate + lap_r.err_estimate + inv.err_estimate + fstar.err_estimate,
        norms,
    })
}

/// All six norm quantities, per mode and in total, with the residual of the
/// exact decomposition of `||Delta f||^2`.
pub fn norms_report<T: Real>(
    f: &TestFunction<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<NormReport<T>> {
    let per_mode = f
        .components
        .par_iter()
        .map(|c| mode_norms(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let totals = per_mode
        .iter()
        .fold(NormQuantities::zero(), |acc, m| acc.add(&m.norms));
    Ok(NormReport {
        identity_residual: totals.identity_residual(),
        totals,
        per_mode,
        sphere: f.is_sphere(),
    })
}

/// Slack of the weighted inequality for caller-supplied `(k1, k2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSlack<T> {
    pub k1: T,
    pub k2: T,
    pub slack: T,
    /// False when `(k1, k2)` lies outside `k1 in [0,1]`, `k2 in [0, 25/64]`,
    /// `9 k1 + 64 k2 <= 25`.
    pub proven_region: bool,
}

/// Slack (left side minus right side) of each inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalitySlacks<T> {
    /// `||Delta f||^2 - ||Delta_r f||^2 - ||Delta_s f||^2`; may be negative
    /// in three dimensions and is reported only.
    pub split: T,
    /// `||Delta f||^2 - ||Delta_r f||^2`.
    pub radial_dominance: T,
    /// `||Delta f||^2 - (25/64) ||Delta_s f||^2`.
    pub spherical: T,
    /// `||Delta f||^2 - ||Delta_r f||^2 - (1/4) ||Delta_s f||^2`.
    pub improved: T,
    pub weighted: Option<WeightedSlack<T>>,
    /// `||Delta_r f||^2 - (9/16) ||f / |x|^2||^2`.
    pub radial_rellich: T,
}

impl<T: Real> InequalitySlacks<T> {
    /// Whether every asserted slack is at least `-tol`. The split slack and
    /// weighted slacks outside the proven region are not asserted.
    pub fn all_hold(&self, tol: T) -> bool {
        let weighted_ok = self
            .weighted
            .is_none_or(|w| !w.proven_region || w.slack >= -tol);
        [
            self.radial_dominance,
            self.spherical,
            self.improved,
            self.radial_rellich,
        ]
        .iter()
        .all(|s| *s >= -tol)
            && weighted_ok
    }
}

pub fn in_proven_region<T: Real>(k1: T, k2: T) -> bool {
    k1 >= T::zero()
        && k1 <= T::one()
        && k2 >= T::zero()
        && k2 <= frac::<T>(25, 64)
        && lit::<T>(9.0) * k1 + lit::<T>(64.0) * k2 <= lit(25.0)
}

pub fn check_inequalities<T: Real>(
    report: &NormReport<T>,
    weights: Option<(T, T)>,
) -> Result<InequalitySlacks<T>> {
    if !report.sphere {
        return Err(Error::NotSphere);
    }
    let q = &report.totals;
    Ok(InequalitySlacks {
        split: q.lap_sq - q.lap_r_sq - q.lap_s_sq,
        radial_dominance: q.lap_sq - q.lap_r_sq,
        spherical: q.lap_sq - frac::<T>(25, 64) * q.lap_s_sq,
        improved: q.lap_sq - q.lap_r_sq - frac::<T>(1, 4) * q.lap_s_sq,
        weighted: weights.map(|(k1, k2)| WeightedSlack {
            k1,
            k2,
            slack: q.lap_sq - k1 * q.lap_r_sq - k2 * q.lap_s_sq,
            proven_region: in_proven_region(k1, k2),
        }),
        radial_rellich: q.lap_r_sq - frac::<T>(9, 16) * q.inv_sq,
    })
}

/// The two spectral sums used to split off the sharp constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofLedger<T> {
    pub alpha: T,
    /// `sum_k mu_k (alpha mu_k - 3/2) ||P_k f / |x|^2||^2`.
    pub n1: T,
    /// `sum_{k>=1} [mu_k (alpha mu_k - 3/2) + 9/16] ||P_k f / |x|^2||^2`.
    pub n2_lower: T,
}

pub fn proof_ledger<T: Real>(
    f: &TestFunction<T>,
    alpha: T,
    cfg: &QuadratureConfig<T>,
) -> Result<ProofLedger<T>> {
    let report = norms_report(f, cfg)?;
    proof_ledger_from_report(&report, alpha)
}

pub fn proof_ledger_from_report<T: Real>(
    report: &NormReport<T>,
    alpha: T,
) -> Result<ProofLedger<T>> {
    if !report.sphere {
        return Err(Error::NotSphere);
    }
    let three_halves = frac::<T>(3, 2);
    let nine_sixteenths = frac::<T>(9, 16);
    let (mut n1, mut n2) = (T::zero(), T::zero());
    for m in report.per_mode.iter().filter(|m| m.degree >= 1) {
        let mu = m.eigenvalue;
        let base = mu * (alpha * mu - three_halves);
        n1 = n1 + base * m.norms.inv_sq;
        n2 = n2 + (base + nine_sixteenths) * m.norms.inv_sq;
    }
    Ok(ProofLedger {
        alpha,
        n1,
        n2_lower: n2,
    })
}

/// The cross term `2 <Delta_r f, Delta_s f>` and its lower bound
/// `sum_k 2 R lambda_k ||P_k f / |x|^2||^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossTerm<T> {
    /// `lap_sq - lap_r_sq - lap_s_sq`.
    pub value: T,
    /// The same quantity integrated directly per mode.
    pub direct: T,
    pub lower_bound: T,
    /// `value - lower_bound`; equals `2 fstar_term` by the decomposition.
    pub slack: T,
    pub fstar_term: T,
    pub lap_sq: T,
}

pub fn cross_term<T: Real>(f: &TestFunction<T>, cfg: &QuadratureConfig<T>) -> Result<CrossTerm<T>> {
    let report = norms_report(f, cfg)?;
    let two = lit::<T>(2.0);
    let mut direct = T::zero();
    for c in &f.components {
        if c.eigenvalue == T::zero() {
            continue;
        }
        let g = &c.profile;
        let lambda = c.eigenvalue;
        let radial = radial_laplacian_mode(g);
        // 2 int (g'' + 2g'/r)(-lambda g / r^2) r^2 dr, in u = ln r.
        let res = integral(
            integrate_u(
                |u: T| {
                    let r = u.exp();
                    -two * lambda * radial(r) * g.jet_unchecked(r).value * r
                },
                g.window(),
                &g.breakpoints(),
                cfg,
            ),
            c,
        )?;
        direct = direct + res.value;
    }
    let q = &report.totals;
    let value = q.lap_sq - q.lap_r_sq - q.lap_s_sq;
    let lower_bound = report.per_mode.iter().fold(T::zero(), |acc, m| {
        acc + two * rellich_coefficient::<T>() * m.eigenvalue * m.norms.inv_sq
    });
    Ok(CrossTerm {
        value,
        direct,
        lower_bound,
        slack: value - lower_bound,
        fstar_term: q.fstar_term,
        lap_sq: q.lap_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::plateau_family;

    fn worked() -> TestFunction<f64> {
        TestFunction::sphere(vec![(1, 0, RadialProfile::poly_exp(1.0, 1.0).unwrap())]).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn mode_operator_examples() {
        let lin = RadialProfile::power_bump(1.0, 0.0, 4.0).unwrap();
        let quad = RadialProfile::power_bump(2.0, 0.0, 4.0).unwrap();
        let pe = RadialProfile::poly_exp(1.0, 1.0).unwrap();
        let half = RadialProfile::power_bump(0.5, 0.0, 4.0).unwrap();
        for r in [0.5, 1.0, 2.0] {
            assert!(laplacian_mode(2.0f64, &lin)(r).abs() < 1e-13);
            assert!(laplacian_mode(6.0f64, &quad)(r).abs() < 1e-12);
            let e = (-r).exp();
            assert!((laplacian_mode(2.0, &pe)(r) - (r - 4.0) * e).abs() < 1e-14);
            assert!((radial_laplacian_mode(&quad)(r) - 6.0).abs() < 1e-12);
            assert!((radial_laplacian_mode(&lin)(r) - 2.0 / r).abs() < 1e-13);
            assert!((radial_laplacian_mode(&pe)(r) - (r - 4.0 + 2.0 / r) * e).abs() < 1e-14);
            assert!(f_star_mode(&half)(r).abs() < 1e-14);
            assert!((f_star_mode(&pe)(r) - (0.5 - r) * e).abs() < 1e-15);
            assert!((f_star_mode(&quad)(r) - 1.5 * r).abs() < 1e-13);
        }
    }

    #[test]
    fn worked_report() {
        let rep = norms_report(&worked(), &QuadratureConfig::default()).unwrap();
        let q = rep.totals;
        let expect = [1.75, 0.75, 2.0, 1.0, 0.5, 0.25];
        for (got, want) in q.as_array().iter().zip(expect) {
            assert!(close(*got, want, 1e-9), "{got} vs {want}");
        }
        assert!(rep.identity_residual.abs() <= 1e-9);
    }

    #[test]
    fn radial_mode_report() {
        let f = TestFunction::sphere(vec![(
            0,
            0,
            RadialProfile::gaussian_log(1.0, 0.0, 0.7).unwrap(),
        )])
        .unwrap();
        let rep = norms_report(&f, &QuadratureConfig::default()).unwrap();
        assert_eq!(rep.totals.lap_s_sq, 0.0);
        assert_eq!(rep.totals.sph_grad_sq, 0.0);
        assert_eq!(rep.totals.fstar_term, 0.0);
        assert_eq!(rep.totals.lap_sq, rep.totals.lap_r_sq);
        let s = check_inequalities(&rep, None).unwrap();
        assert_eq!(s.radial_dominance, 0.0);
        assert_eq!(s.spherical, rep.totals.lap_sq);
    }

    #[test]
    fn two_modes_add() {
        let cfg = QuadratureConfig::default();
        let f = TestFunction::sphere(vec![
            (2, 1, RadialProfile::gaussian_log(0.3, 0.5, 0.6).unwrap()),
            (1, -1, RadialProfile::poly_exp(2.0, 1.5).unwrap()),
        ])
        .unwrap();
        let whole = norms_report(&f, &cfg).unwrap();
        assert_eq!(whole.per_mode[0].degree, 1);
        let a = norms_report(&f.single_mode(0), &cfg).unwrap();
        let b = norms_report(&f.single_mode(1), &cfg).unwrap();
        for ((w, x), y) in whole
            .totals
            .as_array()
            .iter()
            .zip(a.totals.as_array())
            .zip(b.totals.as_array())
        {
            assert!(close(*w, x + y, 1e-12));
        }
    }

    #[test]
    fn worked_slacks() {
        let rep = norms_report(&worked(), &QuadratureConfig::default()).unwrap();
        let s = check_inequalities(&rep, Some((0.5, 0.3))).unwrap();
        assert!(close(s.improved, 0.5, 1e-9));
        assert!(close(s.spherical, 31.0 / 32.0, 1e-9));
        assert!(close(s.radial_dominance, 1.0, 1e-9));
        assert!(close(s.radial_rellich, 0.75 - 9.0 / 32.0, 1e-9));
        assert!(close(s.split, -1.0, 1e-9));
        let w = s.weighted.unwrap();
        assert!(w.proven_region);
        assert!(close(w.slack, 1.75 - 0.375 - 0.6, 1e-9));
        assert!(s.all_hold(rep.default_tol()));
        let out = check_inequalities(&rep, Some((1.0, 0.5))).unwrap();
        assert!(!out.weighted.unwrap().proven_region);
    }

    #[test]
    fn worked_ledger() {
        let cfg = QuadratureConfig::default();
        let f = worked();
        let l = proof_ledger(&f, 0.75, &cfg).unwrap();
        assert!(l.n1.abs() <= 1e-9);
        let l = proof_ledger(&f, 1.0, &cfg).unwrap();
        assert!(close(l.n1, 0.5, 1e-9));
        let l = proof_ledger(&f, 39.0 / 64.0, &cfg).unwrap();
        assert!(l.n2_lower.abs() <= 1e-9);
    }

    #[test]
    fn worked_cross_term() {
        let c = cross_term(&worked(), &QuadratureConfig::default()).unwrap();
        assert!(close(c.value, -1.0, 1e-9));
        assert!(close(c.direct, -1.0, 1e-9));
        assert!(close(c.lower_bound, -1.5, 1e-12));
        assert!(close(c.slack, 0.5, 1e-8));
        let radial =
            TestFunction::sphere(vec![(0, 0, RadialProfile::poly_exp(1.0, 1.0).unwrap())]).unwrap();
        let c = cross_term(&radial, &QuadratureConfig::default()).unwrap();
        assert_eq!((c.value, c.lower_bound, c.slack), (0.0, 0.0, 0.0));
    }

    #[test]
    fn plateau_cross_term_slack_shrinks() {
        let cfg = QuadratureConfig::default();
        let mut prev = f64::INFINITY;
        for l in [5.0, 10.0, 20.0] {
            let f = TestFunction::sphere(vec![(1, 0, plateau_family(l).unwrap())]).unwrap();
            let c = cross_term(&f, &cfg).unwrap();
            let rel = c.slack / c.lap_sq;
            assert!(close(c.slack, 2.0 * c.fstar_term, 1e-8));
            assert!(rel < prev);
            prev = rel;
        }
    }

    #[test]
    fn validation() {
        let p = RadialProfile::poly_exp(1.0, 1.0).unwrap();
        assert!(TestFunction::<f64>::sphere(vec![]).is_err());
        assert!(TestFunction::sphere(vec![(1, 0, p.clone()), (1, 0, p.clone())]).is_err());
        assert!(TestFunction::sphere(vec![(1, 2, p.clone())]).is_err());
        let spec = SpectrumSpec::custom(vec![0.0, 4.0, 10.0]).unwrap();
        let bad = ModeComponent {
            degree: 1,
            order: 0,
            eigenvalue: 5.0,
            profile: p.clone(),
        };
        assert!(TestFunction::new(vec![bad], SpectrumKind::Custom(spec.clone())).is_err());
        let good = ModeComponent::in_spectrum(&spec, 1, 0, p.clone()).unwrap();
        let f = TestFunction::new(vec![good], SpectrumKind::Custom(spec.clone())).unwrap();
        let rep = norms_report(&f, &QuadratureConfig::default()).unwrap();
        assert!(matches!(
            check_inequalities(&rep, None),
            Err(Error::NotSphere)
        ));
        assert!(ModeComponent::in_spectrum(&spec, 3, 0, p).is_err());
    }

    #[test]
    fn custom_spectrum_identity_holds() {
        let spec = SpectrumSpec::<f64>::custom(vec![0.0, 4.0, 10.0, 18.0]).unwrap();
        let p = RadialProfile::gaussian_log(0.2, 0.1, 1.1).unwrap();
        let comps = (1..4)
            .map(|k| ModeComponent::in_spectrum(&spec, k, 0, p.clone()).unwrap())
            .collect();
        let f = TestFunction::new(comps, SpectrumKind::Custom(spec)).unwrap();
        let rep = norms_report(&f, &QuadratureConfig::default()).unwrap();
        assert!(rep.identity_residual.abs() <= 1e-9 * rep.totals.lap_sq);
    }
}
