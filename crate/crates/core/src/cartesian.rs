//! Finite-difference check in Cartesian coordinates that the per-mode radial
//! formulas describe `Delta`, `Delta_r` and `Delta_s` on functions of three
//! variables.
//!
//! Modes are realized as `g(|x|) H(x) / |x|^k` with fixed unnormalized real
//! solid harmonics `H` of degree `k <= 3`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::RadialProfile;
use crate::scalar::{lit, to_f64, Real};
use crate::sharp::sphere_eigenvalue;
use crate::spectral::{laplacian_mode, radial_laplacian_mode};

/// Smallest admissible sample radius.
pub const MIN_RADIUS: f64 = 0.1;

/// Stencil reach in units of `h` that must stay inside the domain.
pub const STENCIL_REACH: f64 = 6.0;

/// An error at step `h` counts as resolved when it exceeds the rounding
/// floor `eps * sum |f| / h^2` of the stencil by this factor. Below that the
/// `h -> h/2` ratio measures rounding, whose floor grows fourfold.
pub const RESOLUTION_FACTOR: f64 = 200.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint<T> {
    pub x: [T; 3],
}

impl<T: Real> SamplePoint<T> {
    pub fn new(x: [T; 3]) -> Result<Self> {
        let p = Self { x };
        let r = p.radius();
        if !(r >= lit(MIN_RADIUS)) || !r.is_finite() {
            return Err(Error::Parameter(format!(
                "sample point radius {r} below {MIN_RADIUS}"
            )));
        }
        Ok(p)
    }

    pub fn radius(&self) -> T {
        norm(self.x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig<T> {
    pub h: T,
}

impl<T: Real> Default for FdConfig<T> {
    fn default() -> Self {
        Self { h: lit(1e-3) }
    }
}

impl<T: Real> FdConfig<T> {
    pub fn new(h: T) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::Parameter(format!("step must be positive, got {h}")));
        }
        Ok(Self { h })
    }

    fn halved(&self) -> Self {
        Self {
            h: self.h / lit(2.0),
        }
    }
}

fn norm<T: Real>(x: [T; 3]) -> T {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Real solid harmonic `H_{k,m}` at `x`. Labels run over `-k..=k`.
pub fn solid_harmonic<T: Real>(k: usize, m: i32, x: [T; 3]) -> Result<T> {
    let [x, y, z] = x;
    let c = |v: f64| lit::<T>(v);
    let v = match (k, m) {
        (0, 0) => T::one(),
        (1, -1) => y,
        (1, 0) => z,
        (1, 1) => x,
        (2, -2) => x * y,
        (2, -1) => y * z,
        (2, 0) => c(2.0) * z * z - x * x - y * y,
        (2, 1) => x * z,
        (2, 2) => x * x - y * y,
        (3, -3) => c(3.0) * x * x * y - y * y * y,
        (3, -2) => x * y * z,
        (3, -1) => y * (c(4.0) * z * z - x * x - y * y),
        (3, 0) => z * (c(2.0) * z * z - c(3.0) * x * x - c(3.0) * y * y),
        (3, 1) => x * (c(4.0) * z * z - x * x - y * y),
        (3, 2) => z * (x * x - y * y),
        (3, 3) => x * x * x - c(3.0) * x * y * y,
        (k, _) if k > 3 => {
            return Err(Error::Unsupported(format!(
                "solid harmonics are hard-coded up to degree 3, got {k}"
            )))
        }
        (k, m) => {
            return Err(Error::Parameter(format!(
                "order label {m} out of range for degree {k}"
            )))
        }
    };
    Ok(v)
}

/// Angular factor `H(x) / |x|^k`.
pub fn angular<T: Real>(k: usize, m: i32, x: [T; 3]) -> Result<T> {
    let h = solid_harmonic(k, m, x)?;
    Ok(h / norm(x).powi(k as i32))
}

/// `g(|x|) H(x) / |x|^k`.
pub fn eval_point<T: Real>(k: usize, m: i32, g: &RadialProfile<T>, x: [T; 3]) -> Result<T> {
    let y = angular(k, m, x)?;
    Ok(g.eval(norm(x))? * y)
}

/// Radial interval `(r_lo, r_hi)` a stencil must stay inside.
pub type RadialDomain<T> = (T, T);

fn check_reach<T: Real>(x: [T; 3], reach: T, domain: RadialDomain<T>) -> Result<()> {
    let r = norm(x);
    if r - reach <= domain.0.max(T::zero()) || r + reach >= domain.1 {
        return Err(Error::Stencil { radius: to_f64(r) });
    }
    Ok(())
}

/// Seven-point Laplacian at `x`.
pub fn fd_laplacian<T: Real, F: Fn([T; 3]) -> T>(
    f: F,
    x: [T; 3],
    cfg: &FdConfig<T>,
    domain: RadialDomain<T>,
) -> Result<T> {
    let h = cfg.h;
    check_reach(x, lit::<T>(STENCIL_REACH) * h, domain)?;
    let centre = f(x);
    let mut acc = -lit::<T>(6.0) * centre;
    for axis in 0..3 {
        let mut p = x;
        p[axis] = x[axis] + h;
        acc = acc + f(p);
        p[axis] = x[axis] - h;
        acc = acc + f(p);
    }
    Ok(acc / (h * h))
}

/// `phi'' + (2/r) phi'` for `phi(s) = f(s x / |x|)` by central differences.
pub fn fd_radial_laplacian<T: Real, F: Fn([T; 3]) -> T>(
    f: F,
    x: [T; 3],
    cfg: &FdConfig<T>,
    domain: RadialDomain<T>,
) -> Result<T> {
    let h = cfg.h;
    let two = lit::<T>(2.0);
    check_reach(x, two * h, domain)?;
    let r = norm(x);
    let along = |s: T| f([x[0] * s / r, x[1] * s / r, x[2] * s / r]);
    let (fm, f0, fp) = (along(r - h), along(r), along(r + h));
    let d2 = (fp - two * f0 + fm) / (h * h);
    let d1 = (fp - fm) / (two * h);
    Ok(d2 + two * d1 / r)
}

/// One sample point of a [`ConsistencyReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow<T> {
    pub point: [T; 3],
    pub radius: T,
    /// `laplacian_mode(mu_k, g)(r) Y(x)`.
    pub exact_lap: T,
    pub fd_lap: T,
    pub rel_err_lap: T,
    /// `err(h) / err(h/2)` for the Laplacian.
    pub order_lap: T,
    /// `-mu_k g(r) / r^2 Y(x)`.
    pub exact_sph: T,
    /// `fd_laplacian - fd_radial_laplacian`.
    pub fd_sph: T,
    pub rel_err_sph: T,
    pub order_sph: T,
    /// Rounding floor of the second difference at step `h`.
    pub noise_floor: T,
    pub resolved_lap: bool,
    pub resolved_sph: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport<T> {
    pub degree: usize,
    pub order: i32,
    pub h: T,
    pub rows: Vec<ConsistencyRow<T>>,
    pub max_rel_err_lap: T,
    pub max_rel_err_sph: T,
}

impl<T: Real> ConsistencyReport<T> {
    /// Whether every resolved error ratio lies in `[lo, hi]` and at least
    /// one is resolved.
    pub fn orders_within(&self, lo: T, hi: T) -> bool {
        let inside = |v: T| v >= lo && v <= hi;
        self.resolved_count() > 0
            && self.rows.iter().all(|r| {
                (!r.resolved_lap || inside(r.order_lap)) && (!r.resolved_sph || inside(r.order_sph))
            })
    }

    /// Whether every ratio lies in `[lo, hi]`, resolved or not. For `k = 0`
    /// the spherical part is exactly zero and its ratio is skipped.
    pub fn all_orders_within(&self, lo: T, hi: T) -> bool {
        let inside = |v: T| v >= lo && v <= hi;
        self.rows
            .iter()
            .all(|r| inside(r.order_lap) && (self.degree == 0 || inside(r.order_sph)))
    }

    /// Number of resolved ratios, Laplacian and spherical part together.
    pub fn resolved_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.resolved_lap as usize + r.resolved_sph as usize)
            .sum()
    }

    /// Every ratio is resolved; for `k = 0` the spherical part is exactly
    /// zero and its ratio is not counted.
    pub fn all_resolved(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.resolved_lap && (self.degree == 0 || r.resolved_sph))
    }
}

/// Compares the finite-difference operators against the mode formulas at
/// each point, at `h` and `h/2`.
///
/// Relative errors are taken against the largest of `|Delta f|`,
/// `|Delta_r f|` and `|Delta_s f|` at the point, so a point where the terms
/// cancel is not penalized.
pub fn consistency_report<T: Real>(
    k: usize,
    m: i32,
    g: &RadialProfile<T>,
    points: &[SamplePoint<T>],
    cfg: &FdConfig<T>,
) -> Result<ConsistencyReport<T>> {
    solid_harmonic(k, m, [T::one(); 3])?;
    if points.is_empty() {
        return Err(Error::Parameter("no sample points".into()));
    }
    let mu = sphere_eigenvalue::<T>(k);
    let (r_lo, r_hi) = g.window().radial();
    let domain = (r_lo, r_hi);
    let field = |x: [T; 3]| {
        let r = norm(x);
        g.jet_unchecked(r).value * angular(k, m, x).unwrap_or(T::nan())
    };
    let lap = laplacian_mode(mu, g);
    let lap_r = radial_laplacian_mode(g);
    let half = cfg.halved();

    let rows = points
        .par_iter()
        .map(|p| {
            let x = p.x;
            let r = p.radius();
            let y = angular(k, m, x)?;
            let exact_lap = lap(r) * y;
            let exact_rad = lap_r(r) * y;
            let exact_sph = -mu * g.jet_unchecked(r).value / (r * r) * y;
            let scale = exact_lap.abs().max(exact_rad.abs()).max(exact_sph.abs());

            let at = |c: &FdConfig<T>| -> Result<(T, T)> {
                let l = fd_laplacian(field, x, c, domain)?;
                let lr = fd_radial_laplacian(field, x, c, domain)?;
                Ok((l, l - lr))
            };
            let (fd_lap, fd_sph) = at(cfg)?;
            let (fd_lap2, fd_sph2) = at(&half)?;
            let ratio = |a: T, b: T| (a / b).abs();
            let rel = |e: T| if scale > T::zero() { e / scale } else { e };
            let noise_floor = T::epsilon() * stencil_magnitude(field, x, cfg.h) / (cfg.h * cfg.h);
            let resolved = |e: T| e >= lit::<T>(RESOLUTION_FACTOR) * noise_floor;
            Ok(ConsistencyRow {
                point: x,
                radius: r,
                exact_lap,
                fd_lap,
                rel_err_lap: rel((fd_lap - exact_lap).abs()),
                order_lap: ratio(fd_lap - exact_lap, fd_lap2 - exact_lap),
                exact_sph,
                fd_sph,
                rel_err_sph: rel((fd_sph - exact_sph).abs()),
                order_sph: ratio(fd_sph - exact_sph, fd_sph2 - exact_sph),
                noise_floor,
                resolved_lap: resolved((fd_lap - exact_lap).abs()),
                resolved_sph: k > 0 && resolved((fd_sph - exact_sph).abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_err_lap = rows.iter().fold(T::zero(), |a, r| a.max(r.rel_err_lap));
    let max_rel_err_sph = rows.iter().fold(T::zero(), |a, r| a.max(r.rel_err_sph));
    Ok(ConsistencyReport {
        degree: k,
        order: m,
        h: cfg.h,
        rows,
        max_rel_err_lap,
        max_rel_err_sph,
    })
}

/// `sum |f|` over the seven-point stencil and the two ray neighbours.
fn stencil_magnitude<T: Real, F: Fn([T; 3]) -> T>(f: F, x: [T; 3], h: T) -> T {
    let r = norm(x);
    let mut acc = lit::<T>(6.0) * f(x).abs();
    for axis in 0..3 {
        let mut p = x;
        p[axis] = x[axis] + h;
        acc = acc + f(p).abs();
        p[axis] = x[axis] - h;
        acc = acc + f(p).abs();
    }
    for s in [r - h, r + h] {
        acc = acc + f([x[0] * s / r, x[1] * s / r, x[2] * s / r]).abs();
    }
    acc
}

/// `count` points with radii evenly spread over `[r_lo, r_hi]`. Each takes
/// the direction, out of a fixed spiral of candidates, where `|Y|` is
/// largest, keeping points off the nodal set of the harmonic.
pub fn default_points<T: Real>(
    k: usize,
    m: i32,
    r_lo: T,
    r_hi: T,
    count: usize,
) -> Result<Vec<SamplePoint<T>>> {
    solid_harmonic(k, m, [T::one(); 3])?;
    if count == 0 || !(r_lo > T::zero() && r_hi >= r_lo) {
        return Err(Error::Parameter(format!(
            "need count > 0 and 0 < r_lo <= r_hi, got {count}, [{r_lo}, {r_hi}]"
        )));
    }
    const CANDIDATES: usize = 24;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let frac = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            let r = r_lo + (r_hi - r_lo) * lit(frac);
            let best = (0..CANDIDATES)
                .map(|j| {
                    let zc = 1.0 - (2.0 * j as f64 + 1.0) / CANDIDATES as f64;
                    let rho = (1.0 - zc * zc).sqrt();
                    let phi = golden * (j + 3 * i) as f64;
                    [rho * phi.cos(), rho * phi.sin(), zc]
                })
                .map(|d| {
                    let y =
                        angular(k, m, [lit::<T>(d[0]), lit(d[1]), lit(d[2])]).unwrap_or(T::zero());
                    (d, y.abs())
                })
                .fold(([0.0, 0.0, 1.0], -T::one()), |acc, c| {
                    if c.1 > acc.1 {
                        c
                    } else {
                        acc
                    }
                });
            let d = best.0;
            SamplePoint::new([r * lit(d[0]), r * lit(d[1]), r * lit(d[2])])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;
    const FAR: RadialDomain<f64> = (0.0, f64::INFINITY);

    fn poly_exp() -> RadialProfile<f64> {
        RadialProfile::poly_exp(1.0, 1.0).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let v = eval_point(1, 0, &poly_exp(), [0.0, 0.0, 1.0]).unwrap();
        assert!((v - 1.0 / E).abs() < 1e-15);
        let g = poly_exp();
        let x = [0.3, -0.4, 1.2];
        let r = norm(x);
        assert!((eval_point(0, 0, &g, x).unwrap() - g.eval(r).unwrap()).abs() < 1e-15);
        let sq = RadialProfile::<f64>::gaussian_log(2.0, 0.0, 1e6).unwrap();
        let v = eval_point(2, 0, &sq, [0.0, 0.0, 1.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        assert!(matches!(
            eval_point(5, 0, &g, x),
            Err(Error::Unsupported(_))
        ));
        assert!(eval_point(2, 3, &g, x).is_err());
    }

    #[test]
    fn harmonics_are_harmonic() {
        let cfg = FdConfig::new(1e-3).unwrap();
        for k in 0..=3usize {
            for m in -(k as i32)..=(k as i32) {
                let x = [0.7, -0.5, 0.9];
                let l = fd_laplacian(|p| solid_harmonic(k, m, p).unwrap(), x, &cfg, FAR).unwrap();
                assert!(l.abs() < 1e-6, "k={k} m={m}: {l}");
            }
        }
    }

    #[test]
    fn stencil_examples() {
        let cfg = FdConfig::default();
        let pole = [0.0, 0.0, 1.0];
        let f = |p: [f64; 3]| p[2] * (-norm(p)).exp();
        let l = fd_laplacian(f, pole, &cfg, FAR).unwrap();
        assert!((l + 3.0 / E).abs() < 1e-6, "{l}");
        let lr = fd_radial_laplacian(f, pole, &cfg, FAR).unwrap();
        assert!((lr + 1.0 / E).abs() < 1e-6, "{lr}");
        let sq = fd_laplacian(
            |p: [f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2],
            pole,
            &cfg,
            FAR,
        )
        .unwrap();
        assert!((sq - 6.0).abs() < 1e-6);
        let z = fd_radial_laplacian(|p: [f64; 3]| p[2], pole, &cfg, FAR).unwrap();
        assert!((z - 2.0).abs() < 1e-6);
        let gauss = |p: [f64; 3]| (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp();
        let x = [0.4, 0.5, -0.6];
        let a = fd_laplacian(gauss, x, &cfg, FAR).unwrap();
        let b = fd_radial_laplacian(gauss, x, &cfg, FAR).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn stencil_leaving_domain_is_an_error() {
        let cfg = FdConfig::new(0.1).unwrap();
        let err = fd_laplacian(|p: [f64; 3]| p[2], [0.0, 0.0, 0.5], &cfg, FAR).unwrap_err();
        assert!(matches!(err, Error::Stencil { .. }));
        assert!(fd_laplacian(
            |p: [f64; 3]| p[2],
            [0.0, 0.0, 1.0],
            &FdConfig::default(),
            (0.0, 1.001)
        )
        .is_err());
        assert!(FdConfig::new(0.0f64).is_err());
        assert!(SamplePoint::new([0.0, 0.0, 0.05f64]).is_err());
    }

    #[test]
    fn first_mode_converges_at_second_order() {
        let g = poly_exp();
        let pts = default_points(1, 0, 0.2, 0.5, 10).unwrap();
        let rep = consistency_report(1, 0, &g, &pts, &FdConfig::default()).unwrap();
        assert!(rep.max_rel_err_lap < 1e-5, "{}", rep.max_rel_err_lap);
        assert!(rep.max_rel_err_sph < 1e-5, "{}", rep.max_rel_err_sph);
        assert!(rep.all_resolved(), "{:?}", rep.rows);
        assert!(rep.orders_within(3.5, 4.5), "{:?}", rep.rows);

        // Farther out the truncation error sinks to the rounding floor; those
        // rows are flagged rather than tested.
        let far = default_points(1, 0, 0.5, 3.0, 10).unwrap();
        let rep = consistency_report(1, 0, &g, &far, &FdConfig::default()).unwrap();
        assert!(!rep.all_resolved());
        assert!(rep.orders_within(3.5, 4.5), "{:?}", rep.rows);
    }

    #[test]
    fn radial_mode_has_no_spherical_part() {
        let g = poly_exp();
        let pts = default_points(0, 0, 0.5, 3.0, 5).unwrap();
        let rep = consistency_report(0, 0, &g, &pts, &FdConfig::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.exact_sph == 0.0));
        assert!(rep.max_rel_err_sph < 1e-5);
    }

    #[test]
    fn quadratic_profile_second_mode() {
        // g = r^2 on the flat part of a wide bump; exact spherical part -6 Y.
        let g = RadialProfile::<f64>::power_bump(2.0, 0.0, 8.0).unwrap();
        let pts = default_points(2, 0, 0.5, 2.0, 4).unwrap();
        let rep = consistency_report(2, 0, &g, &pts, &FdConfig::default()).unwrap();
        for row in &rep.rows {
            let y = angular(2, 0, row.point).unwrap();
            assert!((row.exact_sph + 6.0 * y).abs() < 1e-12);
            assert!((row.fd_sph + 6.0 * y).abs() < 1e-5);
        }
    }

    #[test]
    fn default_points_avoid_nodal_sets() {
        for (k, m) in [(1, 0), (2, -2), (3, -2), (3, 3)] {
            let peak = default_points(k, m, 1.0f64, 1.0, 400)
                .unwrap()
                .iter()
                .fold(0.0f64, |a, p| a.max(angular(k, m, p.x).unwrap().abs()));
            for p in default_points(k, m, 0.5f64, 3.0, 10).unwrap() {
                let y = angular(k, m, p.x).unwrap();
                assert!(y.abs() > 0.5 * peak, "k={k} m={m}: {y} vs {peak}");
            }
        }
        assert!(default_points(4, 0, 0.5f64, 3.0, 3).is_err());
    }
}
