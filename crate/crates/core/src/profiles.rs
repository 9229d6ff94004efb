//! Closed-form radial profiles `g(r)` with exact first and second derivatives.
//!
//! Every family is evaluated in log-radius `u = ln(r / scale)` as a jet
//! `(G, G_u, G_uu)` and converted back with `g' = G_u / r`,
//! `g'' = (G_uu - G_u) / r^2`. Dilation only changes `scale`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Human-readable description of the cutoff used by compactly supported
/// families. Embedded in run manifests.
pub const CUTOFF_DESCRIPTION: &str = "chi(s) = 1 on |s| <= 1/2, 0 on |s| >= 1, \
     chi(s) = S(2(1-|s|)) between, S(t) = rho(1-t) / (rho(1-t) + rho(t)), \
     rho(x) = exp(-1/(1-x^2))";

/// Window in log-radius `u = ln r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportWindow<T> {
    pub u_lo: T,
    pub u_hi: T,
}

impl<T: Real> SupportWindow<T> {
    pub fn new(u_lo: T, u_hi: T) -> Result<Self> {
        if !(u_lo.is_finite() && u_hi.is_finite()) || u_lo >= u_hi {
            return Err(Error::Parameter(format!(
                "window requires finite u_lo < u_hi, got ({u_lo}, {u_hi})"
            )));
        }
        Ok(Self { u_lo, u_hi })
    }

    /// The same window expressed in radius.
    pub fn radial(&self) -> (T, T) {
        (self.u_lo.exp(), self.u_hi.exp())
    }

    pub fn contains_radius(&self, r: T) -> bool {
        let u = r.ln();
        u >= self.u_lo && u <= self.u_hi
    }

    pub fn width(&self) -> T {
        self.u_hi - self.u_lo
    }
}

/// Value and first two derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Real> Jet<T> {
    fn zero() -> Self {
        Self {
            value: T::zero(),
            d1: T::zero(),
            d2: T::zero(),
        }
    }
}

/// Profile families together with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum Family<T> {
    /// `r^exponent * chi((ln r - center) / half_width)`.
    PowerBump {
        exponent: T,
        center: T,
        half_width: T,
    },
    /// `r^exponent * exp(-(ln r - center)^2 / (2 width^2))`.
    GaussianLog { exponent: T, center: T, width: T },
    /// `r^power * exp(-rate * r)`.
    PolyExp { power: T, rate: T },
    /// `r^(1/2) * chi(ln r / half_length)`, the extremizing family.
    Plateau { half_length: T },
    /// Clamped cubic spline through `values` on a uniform grid in `ln r`.
    Tabulated { u_lo: T, u_hi: T, values: Vec<T> },
}

/// Family tag without parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    PowerBump,
    GaussianLog,
    PolyExp,
    Plateau,
    Tabulated,
}

impl<T> Family<T> {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::PowerBump { .. } => FamilyKind::PowerBump,
            Family::GaussianLog { .. } => FamilyKind::GaussianLog,
            Family::PolyExp { .. } => FamilyKind::PolyExp,
            Family::Plateau { .. } => FamilyKind::Plateau,
            Family::Tabulated { .. } => FamilyKind::Tabulated,
        }
    }
}

/// Serialized form of a profile: `{family, params, window, scale}`.
///
/// `window` is derived from the parameters and ignored on input.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileSpec<T> {
    #[serde(flatten)]
    pub family: Family<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<T>,
    #[serde(default)]
    pub window: Option<[T; 2]>,
}

/// A radial profile with exact derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ProfileSpec<T>",
    into = "ProfileSpec<T>",
    bound = "T: Real"
)]
pub struct RadialProfile<T> {
    family: Family<T>,
    scale: T,
    spline: Option<ClampedSpline<T>>,
}

impl<T: Real> TryFrom<ProfileSpec<T>> for RadialProfile<T> {
    type Error = Error;

    fn try_from(spec: ProfileSpec<T>) -> Result<Self> {
        let profile = Self::from_family(spec.family)?;
        match spec.scale {
            Some(s) => profile.dilate(s),
            None => Ok(profile),
        }
    }
}

impl<T: Real> From<RadialProfile<T>> for ProfileSpec<T> {
    fn from(p: RadialProfile<T>) -> Self {
        let (lo, hi) = p.window().radial();
        let scale = if p.scale == T::one() {
            None
        } else {
            Some(p.scale)
        };
        ProfileSpec {
            family: p.family,
            scale,
            window: Some([lo, hi]),
        }
    }
}

fn positive<T: Real>(name: &str, x: T) -> Result<()> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

fn finite<T: Real>(name: &str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {x}")))
    }
}

impl<T: Real> RadialProfile<T> {
    /// Validates parameters and builds the profile.
    pub fn from_family(family: Family<T>) -> Result<Self> {
        let mut spline = None;
        match &family {
            Family::PowerBump {
                exponent,
                center,
                half_width,
            } => {
                finite("exponent", *exponent)?;
                finite("center", *center)?;
                positive("half_width", *half_width)?;
            }
            Family::GaussianLog {
                exponent,
                center,
                width,
            } => {
                finite("exponent", *exponent)?;
                finite("center", *center)?;
                positive("width", *width)?;
            }
            Family::PolyExp { power, rate } => {
                finite("power", *power)?;
                if *power <= lit(0.5) {
                    return Err(Error::Parameter(format!(
                        "power must exceed 1/2 for finite second-order norms, got {power}"
                    )));
                }
                positive("rate", *rate)?;
            }
            Family::Plateau { half_length } => {
                finite("half_length", *half_length)?;
                if *half_length <= T::one() {
                    return Err(Error::Parameter(format!(
                        "plateau half-length must exceed 1, got {half_length}"
                    )));
                }
            }
            Family::Tabulated { u_lo, u_hi, values } => {
                SupportWindow::new(*u_lo, *u_hi)?;
                if values.len() < 4 {
                    return Err(Error::Parameter(format!(
                        "tabulated profile needs at least 4 values, got {}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("tabulated values must be finite".into()));
                }
                // A nonzero end value is a jump at the window edge.
                let peak = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
                let floor = lit::<T>(4.0) * T::epsilon() * peak;
                let ends = [values[0], values[values.len() - 1]];
                if ends.iter().any(|v| v.abs() > floor) {
                    return Err(Error::Parameter(format!(
                        "tabulated values must vanish at both ends, got {} and {}",
                        ends[0], ends[1]
                    )));
                }
                spline = Some(ClampedSpline::new(*u_lo, *u_hi, values.clone()));
            }
        }
        Ok(Self {
            family,
            scale: T::one(),
            spline,
        })
    }

    pub fn power_bump(exponent: T, center: T, half_width: T) -> Result<Self> {
        Self::from_family(Family::PowerBump {
            exponent,
            center,
            half_width,
        })
    }

    pub fn gaussian_log(exponent: T, center: T, width: T) -> Result<Self> {
        Self::from_family(Family::GaussianLog {
            exponent,
            center,
            width,
        })
    }

    pub fn poly_exp(power: T, rate: T) -> Result<Self> {
        Self::from_family(Family::PolyExp { power, rate })
    }

    pub fn plateau(half_length: T) -> Result<Self> {
        Self::from_family(Family::Plateau { half_length })
    }

    pub fn tabulated(u_lo: T, u_hi: T, values: Vec<T>) -> Result<Self> {
        Self::from_family(Family::Tabulated { u_lo, u_hi, values })
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn kind(&self) -> FamilyKind {
        self.family.kind()
    }

    /// Dilation factor relative to the undilated family.
    pub fn scale(&self) -> T {
        self.scale
    }

    /// Whether the profile vanishes identically outside its window.
    pub fn is_compact(&self) -> bool {
        matches!(
            self.family,
            Family::PowerBump { .. } | Family::Plateau { .. } | Family::Tabulated { .. }
        )
    }

    /// Window in log-radius. For decaying families it is the effective
    /// window outside of which all norm integrands are below `1e-30`
    /// relative to their peak.
    pub fn window(&self) -> SupportWindow<T> {
        let (lo, hi) = self.base_window();
        let shift = self.scale.ln();
        SupportWindow {
            u_lo: lo + shift,
            u_hi: hi + shift,
        }
    }

    fn base_window(&self) -> (T, T) {
        match &self.family {
            Family::PowerBump {
                center, half_width, ..
            } => (*center - *half_width, *center + *half_width),
            Family::Plateau { half_length } => (-*half_length, *half_length),
            Family::Tabulated { u_lo, u_hi, .. } => (*u_lo, *u_hi),
            Family::GaussianLog {
                exponent,
                center,
                width,
            } => {
                let drift = (lit::<T>(2.0) * *exponent).abs() + lit(3.0);
                let half = lit::<T>(9.0) * *width + drift * *width * *width / lit(2.0);
                (*center - half, *center + half)
            }
            Family::PolyExp { power, rate } => {
                let excess = lit::<T>(2.0) * *power - T::one();
                let lo = (lit::<T>(-37.0) / excess).max(lit(-700.0));
                let mut r_hi = lit::<T>(35.0) / *rate;
                for _ in 0..30 {
                    r_hi = (lit::<T>(35.0) + (*power + T::one()) * r_hi.max(T::one()).ln()) / *rate;
                }
                let hi = r_hi.ln().max(lo + T::one());
                (lo, hi)
            }
        }
    }

    /// Interior points in log-radius where the integrands change character
    /// (plateau edges, spline knots). Used to seed adaptive quadrature.
    pub fn breakpoints(&self) -> Vec<T> {
        let shift = self.scale.ln();
        let half = lit::<T>(0.5);
        let pts: Vec<T> = match &self.family {
            Family::PowerBump {
                center, half_width, ..
            } => vec![*center - half * *half_width, *center + half * *half_width],
            Family::Plateau { half_length } => vec![-half * *half_length, half * *half_length],
            Family::Tabulated { .. } => {
                let sp = self
                    .spline
                    .as_ref()
                    .expect("tabulated profile carries a spline");
                (1..sp.values.len() - 1).map(|i| sp.node(i)).collect()
            }
            Family::GaussianLog { .. } | Family::PolyExp { .. } => Vec::new(),
        };
        pts.into_iter().map(|u| u + shift).collect()
    }

    /// `g(r)`.
    pub fn eval(&self, r: T) -> Result<T> {
        check_radius(r)?;
        Ok(self.jet_unchecked(r).value)
    }

    /// `g'(r)`.
    pub fn deriv1(&self, r: T) -> Result<T> {
        check_radius(r)?;
        Ok(self.jet_unchecked(r).d1)
    }

    /// `g''(r)`.
    pub fn deriv2(&self, r: T) -> Result<T> {
        check_radius(r)?;
        Ok(self.jet_unchecked(r).d2)
    }

    pub fn jet(&self, r: T) -> Result<Jet<T>> {
        check_radius(r)?;
        Ok(self.jet_unchecked(r))
    }

    /// Jet at `r > 0`; the caller guarantees positivity.
    pub(crate) fn jet_unchecked(&self, r: T) -> Jet<T> {
        let u = (r / self.scale).ln();
        let (g, gu, guu) = self.log_jet(u);
        let r2 = r * r;
        Jet {
            value: g,
            d1: gu / r,
            d2: (guu - gu) / r2,
        }
    }

    /// `(G, G_u, G_uu)` of the undilated family at log-radius `u`.
    fn log_jet(&self, u: T) -> (T, T, T) {
        match &self.family {
            Family::PowerBump {
                exponent,
                center,
                half_width,
            } => power_cutoff_jet(*exponent, *center, *half_width, u),
            Family::Plateau { half_length } => {
                power_cutoff_jet(lit(0.5), T::zero(), *half_length, u)
            }
            Family::GaussianLog {
                exponent,
                center,
                width,
            } => {
                let d = u - *center;
                let s2 = *width * *width;
                let g = (*exponent * u - d * d / (lit::<T>(2.0) * s2)).exp();
                let slope = *exponent - d / s2;
                (g, slope * g, (slope * slope - T::one() / s2) * g)
            }
            Family::PolyExp { power, rate } => {
                let r = u.exp();
                let g = (*power * u - *rate * r).exp();
                let slope = *power - *rate * r;
                (g, slope * g, (slope * slope - *rate * r) * g)
            }
            Family::Tabulated { .. } => self
                .spline
                .as_ref()
                .expect("tabulated profile carries a spline")
                .jet(u),
        }
    }

    /// The profile `r -> g(r / s)`.
    pub fn dilate(&self, s: T) -> Result<Self> {
        if !(s.is_finite() && s > T::zero()) {
            return Err(Error::Parameter(format!(
                "dilation factor must be positive, got {s}"
            )));
        }
        let mut out = self.clone();
        out.scale = self.scale * s;
        Ok(out)
    }
}

fn check_radius<T: Real>(r: T) -> Result<()> {
    if r > T::zero() && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(r.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `g_L(r) = r^(1/2) chi(ln r / L)`, window `(e^-L, e^L)`.
pub fn plateau_family<T: Real>(half_length: T) -> Result<RadialProfile<T>> {
    RadialProfile::plateau(half_length)
}

/// `r -> g(r / s)` with the window scaled by `s`.
pub fn dilate<T: Real>(profile: &RadialProfile<T>, s: T) -> Result<RadialProfile<T>> {
    profile.dilate(s)
}

/// Jet of `e^(beta u) chi((u - center) / half_width)`.
fn power_cutoff_jet<T: Real>(beta: T, center: T, half_width: T, u: T) -> (T, T, T) {
    let s = (u - center) / half_width;
    let c = cutoff_jet(s);
    if c.value == T::zero() && c.d1 == T::zero() && c.d2 == T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let e = (beta * u).exp();
    let c1 = c.d1 / half_width;
    let c2 = c.d2 / (half_width * half_width);
    let two = lit::<T>(2.0);
    (
        e * c.value,
        e * (beta * c.value + c1),
        e * (beta * beta * c.value + two * beta * c1 + c2),
    )
}

/// Standard mollifier `exp(-1/(1-x^2))` and its first two derivatives.
fn mollifier<T: Real>(x: T) -> (T, T, T) {
    let q = T::one() - x * x;
    if q <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    let rho = (-T::one() / q).exp();
    let q2 = q * q;
    let two = lit::<T>(2.0);
    let d1 = -two * x * rho / q2;
    let d2 =
        rho * (lit::<T>(4.0) * x * x / (q2 * q2) - two / q2 - lit::<T>(8.0) * x * x / (q2 * q));
    (rho, d1, d2)
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
fn smooth_step<T: Real>(t: T) -> Jet<T> {
    if t <= T::zero() {
        return Jet::zero();
    }
    if t >= T::one() {
        return Jet {
            value: T::one(),
            d1: T::zero(),
            d2: T::zero(),
        };
    }
    let (ra, ra1, ra2) = mollifier(T::one() - t);
    let (b, b1, b2) = mollifier(t);
    let a = ra;
    let a1 = -ra1;
    let a2 = ra2;
    let sum = a + b;
    let num = a1 * b - a * b1;
    let two = lit::<T>(2.0);
    Jet {
        value: a / sum,
        d1: num / (sum * sum),
        d2: (a2 * b - a * b2) / (sum * sum) - two * num * (a1 + b1) / (sum * sum * sum),
    }
}

/// The cutoff `chi` with derivatives in `s`.
pub fn cutoff_jet<T: Real>(s: T) -> Jet<T> {
    let a = s.abs();
    let half = lit::<T>(0.5);
    if a <= half {
        return Jet {
            value: T::one(),
            d1: T::zero(),
            d2: T::zero(),
        };
    }
    if a >= T::one() {
        return Jet::zero();
    }
    let two = lit::<T>(2.0);
    let st = smooth_step(two * (T::one() - a));
    let sign = if s < T::zero() { -T::one() } else { T::one() };
    Jet {
        value: st.value,
        d1: -two * sign * st.d1,
        d2: lit::<T>(4.0) * st.d2,
    }
}

/// Cubic spline on a uniform grid with zero end slopes.
#[derive(Clone, Debug, PartialEq)]
struct ClampedSpline<T> {
    u_lo: T,
    step: T,
    values: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> ClampedSpline<T> {
    fn new(u_lo: T, u_hi: T, values: Vec<T>) -> Self {
        let n = values.len();
        let h = (u_hi - u_lo) / T::from_usize(n - 1).unwrap();
        let six = lit::<T>(6.0);
        // Tridiagonal system for the second derivatives M_i.
        let mut diag = vec![lit::<T>(4.0); n];
        let mut rhs = vec![T::zero(); n];
        diag[0] = lit(2.0);
        diag[n - 1] = lit(2.0);
        rhs[0] = six / h * ((values[1] - values[0]) / h);
        rhs[n - 1] = six / h * (-(values[n - 1] - values[n - 2]) / h);
        for i in 1..n - 1 {
            rhs[i] = six / (h * h) * (values[i + 1] - lit::<T>(2.0) * values[i] + values[i - 1]);
        }
        // Thomas elimination; off-diagonals are all one.
        for i in 1..n {
            let w = T::one() / diag[i - 1];
            diag[i] = diag[i] - w;
            rhs[i] = rhs[i] - w * rhs[i - 1];
        }
        let mut second = vec![T::zero(); n];
        second[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = (rhs[i] - second[i + 1]) / diag[i];
        }
        Self {
            u_lo,
            step: h,
            values,
            second,
        }
    }

    fn node(&self, i: usize) -> T {
        self.u_lo + self.step * T::from_usize(i).unwrap()
    }

    fn jet(&self, u: T) -> (T, T, T) {
        let n = self.values.len();
        let u_hi = self.node(n - 1);
        if u < self.u_lo || u > u_hi {
            return (T::zero(), T::zero(), T::zero());
        }
        let pos = ((u - self.u_lo) / self.step).floor();
        let i = pos.to_usize().unwrap_or(0).min(n - 2);
        let h = self.step;
        let a = self.node(i + 1) - u;
        let b = u - self.node(i);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let six = lit::<T>(6.0);
        let two = lit::<T>(2.0);
        let c0 = self.values[i] / h - m0 * h / six;
        let c1 = self.values[i + 1] / h - m1 * h / six;
        let value = m0 * a * a * a / (six * h) + m1 * b * b * b / (six * h) + c0 * a + c1 * b;
        let d1 = -m0 * a * a / (two * h) + m1 * b * b / (two * h) - c0 + c1;
        let d2 = (m0 * a + m1 * b) / h;
        (value, d1, d2)
    }
}
