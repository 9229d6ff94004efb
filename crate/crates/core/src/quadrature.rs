//! Adaptive Gauss-Kronrod quadrature on `(0, inf)` in log coordinates.
//!
//! `int h(r) dr` is computed as `int h(e^u) e^u du` over a finite window in
//! `u`. Subintervals are refined largest-error-first; the local error is the
//! difference between the 15-point Kronrod and the embedded 7-point Gauss
//! rule. Totals are always summed in order of the left endpoint so results
//! are reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::SupportWindow;
use crate::scalar::{lit, to_f64, Real};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Maximum number of bisections.
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        // 1e-10 is out of reach in single precision.
        let floor = lit::<T>(64.0) * T::epsilon();
        Self {
            rel_tol: lit::<T>(1e-10).max(floor),
            abs_tol: lit(1e-14),
            max_subdivisions: 2000,
        }
    }
}

impl<T: Real> QuadratureConfig<T> {
    pub fn new(rel_tol: T, abs_tol: T, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return Err(Error::Parameter(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Parameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult<T> {
    pub value: T,
    pub err_estimate: T,
    pub subdivisions_used: usize,
    /// Integration window actually used.
    pub window: SupportWindow<T>,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Real> Eq for Segment<T> {}

impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Segment<T> {
    // Largest error first; ties broken by position.
    fn cmp(&self, other: &Self) -> Ordering {
        to_f64(self.err)
            .total_cmp(&to_f64(other.err))
            .then_with(|| to_f64(other.a).total_cmp(&to_f64(self.a)))
    }
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut resk = fc * lit(WGK[7]);
    let mut resg = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half_len * lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        resk = resk + lit::<T>(WGK[j]) * pair;
        if j % 2 == 1 {
            resg = resg + lit::<T>(WG[j / 2]) * pair;
        }
    }
    let value = resk * half_len;
    let err = ((resk - resg) * half_len).abs();
    (value, err)
}

/// `int h(u) du` over `[window.u_lo, window.u_hi]` with optional interior
/// breakpoints seeding the partition.
pub fn integrate_u<T, F>(
    h: F,
    window: SupportWindow<T>,
    breakpoints: &[T],
    cfg: &QuadratureConfig<T>,
) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    cfg.validate()?;
    let (lo, hi) = (window.u_lo, window.u_hi);
    let mut cuts: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    let pieces = (to_f64(window.width()) / 4.0).ceil().max(4.0) as usize;
    let step = window.width() / T::from_usize(pieces).unwrap();
    cuts.extend((1..pieces).map(|i| lo + step * T::from_usize(i).unwrap()));
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|x, y| to_f64(*x).total_cmp(&to_f64(*y)));
    cuts.dedup_by(|x, y| (*x - *y).abs() <= T::epsilon() * (x.abs() + y.abs() + T::one()));

    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = T::zero();
    for w in cuts.windows(2) {
        let (value, err) = kronrod(&h, w[0], w[1]);
        total = total + value;
        total_err = total_err + err;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }

    let mut subdivisions = 0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Convergence {
                value: to_f64(total),
                err_estimate: to_f64(total_err),
                subdivisions,
            });
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            break;
        }
        if subdivisions >= cfg.max_subdivisions {
            let (value, err) = ordered_sum(heap.into_vec());
            return Err(Error::Convergence {
                value: to_f64(value),
                err_estimate: to_f64(err),
                subdivisions,
            });
        }
        let worst = heap.pop().expect("partition is never empty");
        let mid = lit::<T>(0.5) * (worst.a + worst.b);
        let (v1, e1) = kronrod(&h, worst.a, mid);
        let (v2, e2) = kronrod(&h, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        subdivisions += 1;
    }

    let (value, err_estimate) = ordered_sum(heap.into_vec());
    Ok(IntegralResult {
        value,
        err_estimate,
        subdivisions_used: subdivisions,
        window,
    })
}

fn ordered_sum<T: Real>(mut segments: Vec<Segment<T>>) -> (T, T) {
    segments.sort_by(|x, y| to_f64(x.a).total_cmp(&to_f64(y.a)));
    segments
        .iter()
        .fold((T::zero(), T::zero()), |(v, e), s| (v + s.value, e + s.err))
}

/// `int h(r) dr` over the radial image of `window`, computed in `u = ln r`.
pub fn integrate_log<T, F>(
    h: F,
    window: SupportWindow<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    integrate_log_with_breaks(h, window, &[], cfg)
}

/// [`integrate_log`] with interior breakpoints given in log-radius.
pub fn integrate_log_with_breaks<T, F>(
    h: F,
    window: SupportWindow<T>,
    breakpoints: &[T],
    cfg: &QuadratureConfig<T>,
) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    integrate_u(
        |u: T| {
            let r = u.exp();
            h(r) * r
        },
        window,
        breakpoints,
        cfg,
    )
}

/// `int |g(r)|^2 r^w dr`.
///
/// With `w = 2` this is the squared `L^2(R^3)` norm of `g Y` for an
/// orthonormal spherical harmonic `Y`; with `w = -2` it is the per-mode
/// `||f / |x|^2||^2`.
pub fn weighted_norm_sq<T, F>(
    g: F,
    weight_exponent: i32,
    window: SupportWindow<T>,
    breakpoints: &[T],
    cfg: &QuadratureConfig<T>,
) -> Result<IntegralResult<T>>
where
    T: Real,
    F: Fn(T) -> T,
{
    // r^w * r folded into a single exponential in u.
    let shift = T::from_i32(weight_exponent + 1).unwrap();
    integrate_u(
        |u: T| {
            let v = g(u.exp());
            v * v * (shift * u).exp()
        },
        window,
        breakpoints,
        cfg,
    )
}
