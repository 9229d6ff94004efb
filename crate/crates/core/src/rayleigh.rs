//! Variational route to the sharp constants: per-mode quadratic forms on a
//! uniform grid in `u = ln r` and the largest generalized eigenvalue of a
//! pair of them.
//!
//! With `G(u) = g(e^u)` every per-mode norm is `int e^{-u} (P G)^2 du` where
//! `P` is `G_uu + G_u - lambda G` (LAP), `G_uu + G_u` (LAP_R), `-lambda G`
//! (LAP_S) or `G` (INV). Derivatives are central differences and the outer
//! integral is the trapezoid rule.
//!
//! Unknowns are the interior nodes. The end values and the ghost values one
//! step outside the grid are zero, and every node including the two ends
//! contributes a row, so a grid function pays for the kink it makes next to
//! an end. Without those end rows the LAP_R form at `lambda = 0` is nearly
//! singular.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::RadialProfile;
use crate::quadrature::QuadratureConfig;
use crate::scalar::{lit, to_f64, Real};
use crate::sharp::{maximize_over_t, sphere_eigenvalue, symbol, ScanConfig, SpectrumSpec};
use crate::spectral::{norms_report, ModeComponent, NormQuantities, SpectrumKind, TestFunction};

/// Intervals per unit of half-length used by [`LogGrid::symmetric`].
pub const NODES_PER_HALF_LENGTH: f64 = 40.0;

/// Relative guard by which a discrete quotient may exceed the continuum
/// constant.
pub const DISCRETIZATION_GUARD: f64 = 1e-3;

/// Uniform grid `u_i = u_lo + i h`, `i = 0..n`, in log-radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGrid<T> {
    pub u_lo: T,
    pub u_hi: T,
    pub n: usize,
}

impl<T: Real> LogGrid<T> {
    pub fn new(u_lo: T, u_hi: T, n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::Parameter(format!(
                "grid needs at least 16 nodes, got {n}"
            )));
        }
        if !(u_lo.is_finite() && u_hi.is_finite() && u_lo < u_hi) {
            return Err(Error::Parameter(format!(
                "grid window [{u_lo}, {u_hi}] is empty or not finite"
            )));
        }
        Ok(Self { u_lo, u_hi, n })
    }

    /// `[-L, L]` with `40 L + 1` nodes, i.e. `h = 1/20`.
    pub fn symmetric(half_length: T) -> Result<Self> {
        let n = (to_f64(half_length) * NODES_PER_HALF_LENGTH)
            .round()
            .max(0.0) as usize
            + 1;
        Self::new(-half_length, half_length, n)
    }

    pub fn step(&self) -> T {
        (self.u_hi - self.u_lo) / T::from_usize(self.n - 1).unwrap()
    }

    pub fn node(&self, i: usize) -> T {
        self.u_lo + self.step() * T::from_usize(i).unwrap()
    }

    /// Number of unknowns.
    pub fn interior(&self) -> usize {
        self.n - 2
    }
}

/// Which per-mode norm a form discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FormKind<T> {
    /// `||Delta f||^2`
    Lap,
    /// `||Delta_r f||^2`
    LapR,
    /// `||Delta_s f||^2`
    LapS,
    /// `||f / |x|^2||^2`
    Inv,
    /// `k1 ||Delta_r f||^2 + k2 ||Delta_s f||^2`
    Mix { k1: T, k2: T },
}

impl<T: Real> FormKind<T> {
    /// Parses `lap`, `lap_r`, `lap_s`, `inv` or `mix:K1,K2`.
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let kind = match lower.as_str() {
            "lap" => Self::Lap,
            "lap_r" => Self::LapR,
            "lap_s" => Self::LapS,
            "inv" => Self::Inv,
            other => {
                let coeffs = other.strip_prefix("mix:").ok_or_else(|| {
                    Error::Parameter(format!(
                        "unknown form {s:?}; expected lap, lap_r, lap_s, inv or mix:K1,K2"
                    ))
                })?;
                let parts: Vec<f64> = coeffs
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| {
                        Error::Parameter(format!("bad mix coefficients {coeffs:?}: {e}"))
                    })?;
                let [k1, k2] = parts[..] else {
                    return Err(Error::Parameter(format!(
                        "mix needs two coefficients, got {coeffs:?}"
                    )));
                };
                if k1 < 0.0 || k2 < 0.0 || !(k1.is_finite() && k2.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "mix coefficients must be finite and nonnegative, got {k1}, {k2}"
                    )));
                }
                Self::Mix {
                    k1: lit(k1),
                    k2: lit(k2),
                }
            }
        };
        Ok(kind)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Lap => "lap".into(),
            Self::LapR => "lap_r".into(),
            Self::LapS => "lap_s".into(),
            Self::Inv => "inv".into(),
            Self::Mix { k1, k2 } => format!("mix:{k1},{k2}"),
        }
    }

    /// Multiplier of the form on `r^{1/2 + it}`.
    pub fn symbol(&self, lambda: T, t: T) -> T {
        let a = symbol(t);
        match *self {
            Self::Lap => a.shifted_modulus_sq(lambda),
            Self::LapR => a.modulus_sq(),
            Self::LapS => lambda * lambda,
            Self::Inv => T::one(),
            Self::Mix { k1, k2 } => k1 * a.modulus_sq() + k2 * lambda * lambda,
        }
    }

    /// The same form evaluated from continuum norms.
    pub fn from_norms(&self, q: &NormQuantities<T>) -> T {
        match *self {
            Self::Lap => q.lap_sq,
            Self::LapR => q.lap_r_sq,
            Self::LapS => q.lap_s_sq,
            Self::Inv => q.inv_sq,
            Self::Mix { k1, k2 } => k1 * q.lap_r_sq + k2 * q.lap_s_sq,
        }
    }

    /// Row stencil `(x_{i-1}, x_i, x_{i+1})` of the operator `P`. `None`
    /// for the combined form, which is a sum of forms.
    fn stencil(&self, lambda: T, h: T) -> Option<[T; 3]> {
        let two = lit::<T>(2.0);
        let d2 = T::one() / (h * h);
        let d1 = T::one() / (two * h);
        let radial = [d2 - d1, -two * d2, d2 + d1];
        match *self {
            Self::Lap => Some([radial[0], radial[1] - lambda, radial[2]]),
            Self::LapR => Some(radial),
            Self::LapS => Some([T::zero(), -lambda, T::zero()]),
            Self::Inv => Some([T::zero(), T::one(), T::zero()]),
            Self::Mix { .. } => None,
        }
    }
}

/// Symmetric band matrix holding the lower band.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedSym<T> {
    n: usize,
    bw: usize,
    /// `lower[i * (bw + 1) + d] = M[i][i - d]`.
    lower: Vec<T>,
}

impl<T: Real> BandedSym<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            lower: vec![T::zero(); n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            T::zero()
        } else {
            self.lower[i * (self.bw + 1) + (i - j)]
        }
    }

    fn add_lower(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.lower[i * (self.bw + 1) + (i - j)] = self.lower[i * (self.bw + 1) + (i - j)] + v;
    }

    fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!((self.n, self.bw), (other.n, other.bw));
        for (x, y) in self.lower.iter_mut().zip(&other.lower) {
            *x = *x + a * *y;
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
            })
            .collect()
    }

    pub fn quad_form(&self, x: &[T]) -> T {
        self.mul_vec(x)
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
    }

    pub fn max_abs(&self) -> T {
        self.lower.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, j| acc + self.get(i, j).abs())
            })
            .fold(T::zero(), T::max)
    }
}

/// Lower band Cholesky factor `D = L L^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandCholesky<T> {
    l: BandedSym<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn factor(a: &BandedSym<T>) -> Result<Self> {
        let (n, bw) = (a.n, a.bw);
        let mut l = BandedSym::zeros(n, bw);
        let at = |l: &BandedSym<T>, i: usize, j: usize| l.lower[i * (bw + 1) + (i - j)];
        let floor = T::from_usize(n).unwrap() * T::epsilon();
        for j in 0..n {
            let mut s = a.get(j, j);
            for k in j.saturating_sub(bw)..j {
                s = s - at(&l, j, k) * at(&l, j, k);
            }
            if !(s > floor * a.get(j, j).abs()) || !s.is_finite() {
                return Err(Error::Factorization {
                    pivot: j,
                    value: to_f64(s),
                });
            }
            let d = s.sqrt();
            l.lower[j * (bw + 1)] = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut v = a.get(i, j);
                for k in i.saturating_sub(bw)..j {
                    v = v - at(&l, i, k) * at(&l, j, k);
                }
                l.lower[i * (bw + 1) + (i - j)] = v / d;
            }
        }
        Ok(Self { l })
    }

    fn entry(&self, i: usize, j: usize) -> T {
        self.l.lower[i * (self.l.bw + 1) + (i - j)]
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [T]) {
        let bw = self.l.bw;
        for i in 0..b.len() {
            let mut v = b[i];
            for k in i.saturating_sub(bw)..i {
                v = v - self.entry(i, k) * b[k];
            }
            b[i] = v / self.entry(i, i);
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper(&self, b: &mut [T]) {
        let (n, bw) = (b.len(), self.l.bw);
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                v = v - self.entry(k, i) * b[k];
            }
            b[i] = v / self.entry(i, i);
        }
    }
}

/// Numerator and denominator forms of one mode on one grid.
#[derive(Clone, Debug)]
pub struct FormMatrices<T> {
    pub s: BandedSym<T>,
    pub d: BandedSym<T>,
    pub grid: LogGrid<T>,
    pub lambda: T,
    pub numerator: FormKind<T>,
    pub denominator: FormKind<T>,
    chol: BandCholesky<T>,
}

impl<T: Real> FormMatrices<T> {
    pub fn cholesky(&self) -> &BandCholesky<T> {
        &self.chol
    }
}

/// Matrix of one form over the interior unknowns.
pub fn form_matrix<T: Real>(kind: FormKind<T>, lambda: T, grid: &LogGrid<T>) -> BandedSym<T> {
    let m = grid.interior();
    if let FormKind::Mix { k1, k2 } = kind {
        let mut out = BandedSym::zeros(m, 2);
        out.axpy(k1, &form_matrix(FormKind::LapR, lambda, grid));
        out.axpy(k2, &form_matrix(FormKind::LapS, lambda, grid));
        return out;
    }
    let h = grid.step();
    let stencil = kind
        .stencil(lambda, h)
        .expect("single forms have a stencil");
    let mut out = BandedSym::zeros(m, 2);
    let n = grid.n;
    for row in 0..n {
        let half = if row == 0 || row == n - 1 {
            lit::<T>(0.5)
        } else {
            T::one()
        };
        let w = half * h * (-grid.node(row)).exp();
        // Unknown index of node `row - 1 + s` if it is interior.
        let cols: Vec<(usize, T)> = (0..3)
            .filter_map(|s| {
                let node = (row + s).checked_sub(1)?;
                (node >= 1 && node <= n - 2).then(|| (node - 1, stencil[s]))
            })
            .collect();
        for &(a, ca) in &cols {
            for &(b, cb) in &cols {
                if a >= b {
                    out.add_lower(a, b, w * ca * cb);
                }
            }
        }
    }
    out
}

/// Assembles `S` (numerator) and `D` (denominator) and factors `D`.
pub fn assemble_forms<T: Real>(
    lambda: T,
    grid: &LogGrid<T>,
    numerator: FormKind<T>,
    denominator: FormKind<T>,
) -> Result<FormMatrices<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::Parameter(format!(
            "mode eigenvalue must be finite and nonnegative, got {lambda}"
        )));
    }
    let grid = LogGrid::new(grid.u_lo, grid.u_hi, grid.n)?;
    let s = form_matrix(numerator, lambda, &grid);
    let d = form_matrix(denominator, lambda, &grid);
    let chol = BandCholesky::factor(&d)?;
    Ok(FormMatrices {
        s,
        d,
        grid,
        lambda,
        numerator,
        denominator,
        chol,
    })
}

/// Largest generalized eigenpair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigResult<T> {
    pub value: T,
    /// Grid function on all `n` nodes, zero at both ends, scaled so that its
    /// largest entry is `+1`.
    pub coefficients: Vec<T>,
    /// `||S x - value D x|| / ((||S|| + value ||D||) ||x||)`, infinity norms.
    pub residual: T,
    pub grid: LogGrid<T>,
    pub lambda: T,
}

/// Residual bound accepted from the eigensolver.
pub fn residual_tolerance<T: Real>() -> T {
    T::epsilon().sqrt()
}

/// Largest `theta` with `S x = theta D x`.
///
/// `D = L L^T`, the reduced matrix `L^{-1} S L^{-T}` is brought to
/// tridiagonal form by Householder reflections, its top eigenvalue is found
/// by Sturm bisection and the eigenvector by inverse iteration.
pub fn max_generalized_eig<T: Real>(f: &FormMatrices<T>) -> Result<EigResult<T>> {
    let m = f.s.dim();
    let c = reduced_matrix(&f.s, &f.chol);
    let tri = Tridiagonal::householder(c, m);
    let theta = tri.largest_eigenvalue()?;
    let y = tri.inverse_iteration(theta)?;
    let mut x = tri.back_transform(y);
    f.chol.solve_upper(&mut x);

    let sx = f.s.mul_vec(&x);
    let dx = f.d.mul_vec(&x);
    let theta = theta.max(T::zero());
    let num = sx
        .iter()
        .zip(&dx)
        .fold(T::zero(), |acc, (a, b)| acc.max((*a - theta * *b).abs()));
    let x_norm = x.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let scale = (f.s.norm_inf() + theta * f.d.norm_inf()) * x_norm;
    let residual = if scale > T::zero() {
        num / scale
    } else {
        T::zero()
    };
    if !residual.is_finite() || residual > residual_tolerance::<T>() {
        return Err(Error::Eigen(format!(
            "residual {:e} above tolerance {:e}",
            to_f64(residual),
            to_f64(residual_tolerance::<T>())
        )));
    }

    let mut coefficients = Vec::with_capacity(m + 2);
    coefficients.push(T::zero());
    coefficients.extend(x);
    coefficients.push(T::zero());
    let peak = coefficients
        .iter()
        .copied()
        .fold(T::zero(), |p, v| if v.abs() > p.abs() { v } else { p });
    if peak != T::zero() {
        for v in &mut coefficients {
            *v = *v / peak;
        }
    }
    Ok(EigResult {
        value: theta,
        coefficients,
        residual,
        grid: f.grid,
        lambda: f.lambda,
    })
}

/// Dense row-major `L^{-1} S L^{-T}`, symmetrized.
fn reduced_matrix<T: Real>(s: &BandedSym<T>, chol: &BandCholesky<T>) -> Vec<T> {
    let m = s.dim();
    // Columns of Y = L^{-1} S, stored row-major.
    let mut y = vec![T::zero(); m * m];
    let mut col = vec![T::zero(); m];
    for j in 0..m {
        col.iter_mut().for_each(|v| *v = T::zero());
        for i in j.saturating_sub(s.bandwidth())..(j + s.bandwidth() + 1).min(m) {
            col[i] = s.get(i, j);
        }
        chol.solve_lower(&mut col);
        for i in 0..m {
            y[i * m + j] = col[i];
        }
    }
    // Row i of C is L^{-1} applied to row i of Y.
    for row in y.chunks_mut(m) {
        chol.solve_lower(row);
    }
    let half = lit::<T>(0.5);
    for i in 0..m {
        for j in 0..i {
            let v = half * (y[i * m + j] + y[j * m + i]);
            y[i * m + j] = v;
            y[j * m + i] = v;
        }
    }
    y
}

/// `Q^T C Q = T` with the reflectors defining `Q`.
struct Tridiagonal<T> {
    diag: Vec<T>,
    off: Vec<T>,
    /// `(beta, v)` acting on indices `k + 1..m`.
    reflectors: Vec<(T, Vec<T>)>,
}

impl<T: Real> Tridiagonal<T> {
    fn householder(mut a: Vec<T>, m: usize) -> Self {
        let mut reflectors = Vec::with_capacity(m.saturating_sub(2));
        let mut off = vec![T::zero(); m.saturating_sub(1)];
        let two = lit::<T>(2.0);
        for k in 0..m.saturating_sub(2) {
            let len = m - k - 1;
            let mut v: Vec<T> = (0..len).map(|i| a[(k + 1 + i) * m + k]).collect();
            let norm = v.iter().fold(T::zero(), |s, x| s.hypot(*x));
            if norm == T::zero() {
                off[k] = T::zero();
                reflectors.push((T::zero(), v));
                continue;
            }
            let alpha = if v[0] > T::zero() { -norm } else { norm };
            v[0] = v[0] - alpha;
            let vnorm_sq = v.iter().fold(T::zero(), |s, x| s + *x * *x);
            let beta = if vnorm_sq > T::zero() {
                two / vnorm_sq
            } else {
                T::zero()
            };
            off[k] = alpha;

            // p = beta A22 v, w = p - (beta p.v / 2) v, A22 -= v w^T + w v^T.
            let base = k + 1;
            let mut p = vec![T::zero(); len];
            for i in 0..len {
                let row = &a[(base + i) * m + base..(base + i) * m + m];
                p[i] = beta * row.iter().zip(&v).fold(T::zero(), |s, (x, y)| s + *x * *y);
            }
            let pv = p.iter().zip(&v).fold(T::zero(), |s, (x, y)| s + *x * *y);
            let gamma = beta * pv / two;
            let w: Vec<T> = p.iter().zip(&v).map(|(pi, vi)| *pi - gamma * *vi).collect();
            for i in 0..len {
                let (vi, wi) = (v[i], w[i]);
                let row = &mut a[(base + i) * m + base..(base + i) * m + m];
                for j in 0..len {
                    row[j] = row[j] - vi * w[j] - wi * v[j];
                }
            }
            reflectors.push((beta, v));
        }
        if m >= 2 {
            off[m - 2] = a[(m - 1) * m + (m - 2)];
        }
        let diag = (0..m).map(|i| a[i * m + i]).collect();
        Self {
            diag,
            off,
            reflectors,
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: T) -> usize {
        let tiny = T::min_positive_value();
        let mut count = 0;
        let mut d = T::one();
        for i in 0..self.diag.len() {
            let e2 = if i == 0 {
                T::zero()
            } else {
                self.off[i - 1] * self.off[i - 1]
            };
            d = self.diag[i] - x - if i == 0 { T::zero() } else { e2 / d };
            if d == T::zero() {
                d = -tiny;
            }
            if d < T::zero() {
                count += 1;
            }
        }
        count
    }

    fn largest_eigenvalue(&self) -> Result<T> {
        let m = self.diag.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..m {
            let r = (if i > 0 {
                self.off[i - 1].abs()
            } else {
                T::zero()
            }) + (if i + 1 < m {
                self.off[i].abs()
            } else {
                T::zero()
            });
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Eigen("reduced matrix has non-finite entries".into()));
        }
        let two = lit::<T>(2.0);
        for _ in 0..400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                return Ok(hi);
            }
            if self.count_below(mid) == m {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= two * T::epsilon() * lo.abs().max(hi.abs()) {
                return Ok((lo + hi) / two);
            }
        }
        Err(Error::Eigen("bisection did not converge".into()))
    }

    /// Eigenvector of the tridiagonal matrix for eigenvalue `theta`.
    fn inverse_iteration(&self, theta: T) -> Result<Vec<T>> {
        let m = self.diag.len();
        let scale = self
            .diag
            .iter()
            .chain(&self.off)
            .fold(T::zero(), |s, v| s.max(v.abs()));
        let mut y: Vec<T> = (0..m)
            .map(|i| T::one() + lit::<T>(0.01) * T::from_usize(i % 7).unwrap())
            .collect();
        let normalize = |b: &mut Vec<T>| -> bool {
            let n = b.iter().fold(T::zero(), |s, x| s.hypot(*x));
            if !(n > T::zero()) || !n.is_finite() {
                return false;
            }
            b.iter_mut().for_each(|x| *x = *x / n);
            true
        };
        normalize(&mut y);
        // Every vector is an eigenvector of the zero matrix.
        if scale == T::zero() {
            return Ok(y);
        }
        let pivot_floor = T::epsilon() * scale;

        // Gaussian elimination of T - theta I with partial pivoting.
        let mut d: Vec<T> = self.diag.iter().map(|v| *v - theta).collect();
        let mut du = self.off.clone();
        let dl = self.off.clone();
        let mut du2 = vec![T::zero(); m.saturating_sub(2)];
        let mut mult = vec![T::zero(); m.saturating_sub(1)];
        let mut swapped = vec![false; m.saturating_sub(1)];
        for i in 0..m - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < pivot_floor {
                    d[i] = pivot_floor;
                }
                let f = dl[i] / d[i];
                mult[i] = f;
                d[i + 1] = d[i + 1] - f * du[i];
            } else {
                let f = d[i] / dl[i];
                mult[i] = f;
                swapped[i] = true;
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 2 < m {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
            }
        }
        if d[m - 1].abs() < pivot_floor {
            d[m - 1] = pivot_floor;
        }
        let solve = |b: &mut Vec<T>| {
            for i in 0..m - 1 {
                if swapped[i] {
                    let tmp = b[i];
                    b[i] = b[i + 1];
                    b[i + 1] = tmp - mult[i] * b[i];
                } else {
                    b[i + 1] = b[i + 1] - mult[i] * b[i];
                }
            }
            for i in (0..m).rev() {
                let mut v = b[i];
                if i + 1 < m {
                    v = v - du[i] * b[i + 1];
                }
                if i + 2 < m {
                    v = v - du2[i] * b[i + 2];
                }
                b[i] = v / d[i];
            }
        };

        for _ in 0..8 {
            let prev = y.clone();
            solve(&mut y);
            if !normalize(&mut y) {
                return Err(Error::Eigen(
                    "inverse iteration produced a zero vector".into(),
                ));
            }
            let overlap = y.iter().zip(&prev).fold(T::zero(), |s, (a, b)| s + *a * *b);
            if T::one() - overlap.abs() <= lit::<T>(64.0) * T::epsilon() {
                return Ok(y);
            }
        }
        Ok(y)
    }

    /// `Q y`.
    fn back_transform(&self, mut y: Vec<T>) -> Vec<T> {
        for (k, (beta, v)) in self.reflectors.iter().enumerate().rev() {
            let tail = &mut y[k + 1..];
            let dot = tail.iter().zip(v).fold(T::zero(), |s, (a, b)| s + *a * *b);
            let f = *beta * dot;
            for (t, vi) in tail.iter_mut().zip(v) {
                *t = *t - f * *vi;
            }
        }
        y
    }
}

/// One row of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow<T> {
    pub half_length: T,
    pub n: usize,
    pub theta: T,
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy<T> {
    pub lambda: T,
    pub numerator: FormKind<T>,
    pub denominator: FormKind<T>,
    pub rows: Vec<StudyRow<T>>,
    /// `sup_t` of the symbol ratio, when finite.
    pub oracle: Option<T>,
    pub nondecreasing: bool,
    /// Every `theta <= oracle (1 + guard)`.
    pub within_guard: bool,
}

/// `sup_t num(t) / den(t)` over the scan range, `None` if the denominator
/// symbol vanishes somewhere.
pub fn symbol_ratio_bound<T: Real>(
    lambda: T,
    numerator: FormKind<T>,
    denominator: FormKind<T>,
) -> Option<T> {
    let cfg = ScanConfig::default();
    let (_, min_den) = crate::sharp::minimize_over_t(|t| denominator.symbol(lambda, t), &cfg);
    if !(min_den > lit::<T>(1e3) * T::epsilon()) {
        return None;
    }
    let (_, sup) = maximize_over_t(
        |t| numerator.symbol(lambda, t) / denominator.symbol(lambda, t),
        &cfg,
    );
    Some(sup)
}

/// `theta(L)` on `[-L, L]` with `40 L + 1` nodes, cases in parallel.
pub fn convergence_study<T: Real>(
    lambda: T,
    numerator: FormKind<T>,
    denominator: FormKind<T>,
    half_lengths: &[T],
) -> Result<ConvergenceStudy<T>> {
    let step = T::one() / lit::<T>(NODES_PER_HALF_LENGTH / 2.0);
    convergence_study_with(lambda, numerator, denominator, half_lengths, step)
}

/// [`convergence_study`] with grid step `step` on every grid.
pub fn convergence_study_with<T: Real>(
    lambda: T,
    numerator: FormKind<T>,
    denominator: FormKind<T>,
    half_lengths: &[T],
    step: T,
) -> Result<ConvergenceStudy<T>> {
    if !(step > T::zero()) {
        return Err(Error::Parameter(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if half_lengths.is_empty() {
        return Err(Error::Parameter("no half-lengths given".into()));
    }
    if half_lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("half-lengths must be increasing".into()));
    }
    let rows = half_lengths
        .par_iter()
        .map(|&l| {
            let n = (to_f64(lit::<T>(2.0) * l / step)).round().max(0.0) as usize + 1;
            let grid = LogGrid::new(-l, l, n)?;
            let forms = assemble_forms(lambda, &grid, numerator, denominator)?;
            let eig = max_generalized_eig(&forms)?;
            Ok(StudyRow {
                half_length: l,
                n: grid.n,
                theta: eig.value,
                residual: eig.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle = symbol_ratio_bound(lambda, numerator, denominator);
    let nondecreasing = rows.windows(2).all(|w| w[1].theta >= w[0].theta);
    let guard = T::one() + lit::<T>(DISCRETIZATION_GUARD);
    let within_guard = match oracle {
        Some(c) => rows.iter().all(|r| r.theta <= c * guard),
        None => true,
    };
    Ok(ConvergenceStudy {
        lambda,
        numerator,
        denominator,
        rows,
        oracle,
        nondecreasing,
        within_guard,
    })
}

/// The eigenvector as a tabulated profile over the grid window.
pub fn extremizer_profile<T: Real>(e: &EigResult<T>) -> Result<RadialProfile<T>> {
    if e.residual > residual_tolerance::<T>() {
        return Err(Error::Eigen(format!(
            "eigenvector residual {:e} above tolerance",
            to_f64(e.residual)
        )));
    }
    if e.coefficients.len() != e.grid.n {
        return Err(Error::Parameter(format!(
            "{} coefficients for a grid of {} nodes",
            e.coefficients.len(),
            e.grid.n
        )));
    }
    if e.coefficients.iter().all(|v| *v == T::zero()) {
        return Err(Error::Parameter("extremal grid function is zero".into()));
    }
    RadialProfile::tabulated(e.grid.u_lo, e.grid.u_hi, e.coefficients.clone())
}

/// Single-mode test function with eigenvalue `lambda`: a sphere mode when
/// `lambda = k(k+1)`, otherwise the second entry of the spectrum `{0, lambda}`.
pub fn single_mode<T: Real>(lambda: T, profile: RadialProfile<T>) -> Result<TestFunction<T>> {
    let k = ((lit::<T>(0.25) + lambda).sqrt() - lit::<T>(0.5)).round();
    let k = k.to_usize().unwrap_or(0);
    if sphere_eigenvalue::<T>(k) == lambda {
        return TestFunction::sphere(vec![(k, 0, profile)]);
    }
    let spec = SpectrumSpec::custom(vec![T::zero(), lambda])?;
    let comp = ModeComponent::in_spectrum(&spec, 1, 0, profile)?;
    TestFunction::new(vec![comp], SpectrumKind::Custom(spec))
}

/// Continuum quotient `numerator / denominator` of `profile` in the mode
/// with eigenvalue `lambda`.
pub fn rescore<T: Real>(
    lambda: T,
    numerator: FormKind<T>,
    denominator: FormKind<T>,
    profile: &RadialProfile<T>,
    cfg: &QuadratureConfig<T>,
) -> Result<T> {
    let report = norms_report(&single_mode(lambda, profile.clone())?, cfg)?;
    Ok(numerator.from_norms(&report.totals) / denominator.from_norms(&report.totals))
}

/// Largest deviation of `d(ln |x|)/du` from `slope` over the nodes in
/// `[u_lo, u_hi]`, by central differences of the grid function.
pub fn log_slope_deviation<T: Real>(e: &EigResult<T>, slope: T, u_lo: T, u_hi: T) -> Result<T> {
    let h = e.grid.step();
    let two = lit::<T>(2.0);
    let mut worst = T::zero();
    let mut seen = false;
    for i in 1..e.grid.n - 1 {
        let u = e.grid.node(i);
        if u < u_lo || u > u_hi {
            continue;
        }
        let (a, b) = (e.coefficients[i - 1].abs(), e.coefficients[i + 1].abs());
        if a == T::zero() || b == T::zero() {
            return Err(Error::Parameter(format!(
                "grid function vanishes near u = {u}"
            )));
        }
        let s = (b.ln() - a.ln()) / (two * h);
        worst = worst.max((s - slope).abs());
        seen = true;
    }
    if !seen {
        return Err(Error::Parameter(format!(
            "no grid nodes in [{u_lo}, {u_hi}]"
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::weighted_norm_sq;

    fn sample(grid: &LogGrid<f64>, g: impl Fn(f64) -> f64) -> Vec<f64> {
        (1..grid.n - 1).map(|i| g(grid.node(i).exp())).collect()
    }

    #[test]
    fn grid_validation() {
        assert!(LogGrid::new(0.0, 1.0, 15).is_err());
        assert!(LogGrid::new(1.0, 1.0, 20).is_err());
        let g = LogGrid::<f64>::symmetric(20.0).unwrap();
        assert_eq!(g.n, 801);
        assert!((g.step() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(FormKind::<f64>::parse("LAP_S").unwrap(), FormKind::LapS);
        assert_eq!(
            FormKind::<f64>::parse("mix:1,0.25").unwrap(),
            FormKind::Mix { k1: 1.0, k2: 0.25 }
        );
        assert!(FormKind::<f64>::parse("mix:1").is_err());
        assert!(FormKind::<f64>::parse("grad").is_err());
    }

    #[test]
    fn identical_forms_give_one() {
        for (l, n) in [(3.0, 31), (8.0, 200)] {
            let grid = LogGrid::new(-l, l, n).unwrap();
            let f = assemble_forms(2.0f64, &grid, FormKind::Lap, FormKind::Lap).unwrap();
            let e = max_generalized_eig(&f).unwrap();
            assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
        }
    }

    #[test]
    fn spherical_form_vanishes_for_radial_mode() {
        let grid = LogGrid::new(-5.0, 5.0, 101).unwrap();
        let m = form_matrix(FormKind::LapS, 0.0, &grid);
        assert_eq!(m.max_abs(), 0.0);
        let f = assemble_forms(0.0, &grid, FormKind::LapS, FormKind::Lap).unwrap();
        assert_eq!(max_generalized_eig(&f).unwrap().value, 0.0);
    }

    #[test]
    fn indefinite_denominator_rejected() {
        let grid = LogGrid::new(-5.0, 5.0, 101).unwrap();
        let err = assemble_forms(0.0, &grid, FormKind::Lap, FormKind::LapS).unwrap_err();
        assert!(matches!(err, Error::Factorization { .. }));
        assert!(assemble_forms(-1.0, &grid, FormKind::Lap, FormKind::Inv).is_err());
    }

    #[test]
    fn matrices_are_symmetric() {
        let grid = LogGrid::new(-6.0, 4.0, 64).unwrap();
        for kind in [
            FormKind::Lap,
            FormKind::LapR,
            FormKind::LapS,
            FormKind::Inv,
            FormKind::Mix { k1: 1.0, k2: 0.25 },
        ] {
            let m = form_matrix(kind, 2.0f64, &grid).to_dense();
            let max = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..m.len() {
                for j in 0..m.len() {
                    assert!((m[i][j] - m[j][i]).abs() <= 1e-12 * max);
                }
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let grid = LogGrid::new(-3.0, 3.0, 40).unwrap();
        let d = form_matrix(FormKind::Lap, 2.0, &grid);
        let chol = BandCholesky::factor(&d).unwrap();
        let x: Vec<f64> = (0..d.dim()).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = d.mul_vec(&x);
        chol.solve_lower(&mut b);
        chol.solve_upper(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
    }

    /// Forms of sampled `r e^{-r}` against the quadrature values, with the
    /// observed order under halving of `h`. The window keeps the profile
    /// negligible at both ends.
    #[test]
    fn forms_match_quadrature_to_second_order() {
        let g = |r: f64| r * (-r).exp();
        let cfg = QuadratureConfig::default();
        let window = crate::profiles::SupportWindow::new(-30.0, 5.0).unwrap();
        let inv = weighted_norm_sq(&g, -2, window, &[], &cfg).unwrap().value;
        assert!((inv - 0.5).abs() < 1e-12);
        let exact = [
            (FormKind::Inv, 0.5),
            (FormKind::Lap, 1.75),
            (FormKind::LapR, 0.75),
            (FormKind::LapS, 2.0),
        ];
        for (kind, value) in exact {
            let mut errs = vec![];
            for n in [351, 701, 1401] {
                let grid = LogGrid::new(-30.0, 5.0, n).unwrap();
                let m = form_matrix(kind, 2.0, &grid);
                errs.push((m.quad_form(&sample(&grid, g)) - value).abs());
            }
            assert!(errs[2] < 1e-3, "{kind:?}: {errs:?}");
            // The trapezoid rule is spectrally accurate for the mass form.
            if errs[0] < 1e-10 {
                continue;
            }
            for w in errs.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= 1.8, "{kind:?}: order {order}, {errs:?}");
            }
        }
    }

    #[test]
    fn spherical_over_full_laplacian_approaches_mellin_constant() {
        let c = 64.0 / 25.0;
        let grid = LogGrid::new(-20.0, 20.0, 801).unwrap();
        let f = assemble_forms(2.0, &grid, FormKind::LapS, FormKind::Lap).unwrap();
        let e = max_generalized_eig(&f).unwrap();
        assert!(
            e.value >= 0.95 * c && e.value <= c * 1.001,
            "{}",
            e.value / c
        );
        assert!(e.residual < 1e-10);
    }

    #[test]
    fn radial_rellich_approaches_from_below() {
        let c = 16.0 / 9.0;
        let grid = LogGrid::new(-10.0, 10.0, 401).unwrap();
        let f = assemble_forms(0.0, &grid, FormKind::Inv, FormKind::LapR).unwrap();
        let e = max_generalized_eig(&f).unwrap();
        assert!(e.value < c && e.value > 0.85 * c, "{}", e.value / c);
    }

    #[test]
    fn study_is_monotone_and_bounded() {
        let s =
            convergence_study(2.0f64, FormKind::LapS, FormKind::Lap, &[5.0, 10.0, 20.0]).unwrap();
        let c = 64.0 / 25.0;
        assert!((s.oracle.unwrap() - c).abs() < 1e-9);
        assert!(s.nondecreasing && s.within_guard);
        assert!(s.rows.windows(2).all(|w| w[1].theta > w[0].theta));

        let z = convergence_study(0.0, FormKind::LapS, FormKind::Lap, &[5.0, 10.0]).unwrap();
        assert!(z.rows.iter().all(|r| r.theta == 0.0));

        let mix = convergence_study(
            2.0,
            FormKind::Mix { k1: 1.0, k2: 0.25 },
            FormKind::Lap,
            &[5.0, 10.0],
        )
        .unwrap();
        assert!(mix
            .rows
            .iter()
            .all(|r| r.theta <= 1.0 + DISCRETIZATION_GUARD));
        assert!((mix.oracle.unwrap() - 1.0).abs() < 1e-9);

        assert!(convergence_study(2.0, FormKind::LapS, FormKind::Lap, &[10.0, 5.0]).is_err());
    }

    #[test]
    fn symbol_bounds() {
        assert!(
            (symbol_ratio_bound(0.0f64, FormKind::Inv, FormKind::LapR).unwrap() - 16.0 / 9.0).abs()
                < 1e-9
        );
        assert!(symbol_ratio_bound(0.75, FormKind::Inv, FormKind::Lap).is_none());
    }

    #[test]
    fn extremizer_round_trip() {
        let grid = LogGrid::<f64>::symmetric(10.0).unwrap();
        let f = assemble_forms(2.0, &grid, FormKind::LapS, FormKind::Lap).unwrap();
        let e = max_generalized_eig(&f).unwrap();
        assert_eq!(e.coefficients.len(), grid.n);
        assert_eq!((e.coefficients[0], e.coefficients[grid.n - 1]), (0.0, 0.0));
        let p = extremizer_profile(&e).unwrap();
        let q = rescore(
            2.0,
            FormKind::LapS,
            FormKind::Lap,
            &p,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!((q / e.value - 1.0).abs() < 0.01, "{q} vs {}", e.value);

        let j = p.jet(1.0).unwrap();
        assert!((j.d1 / j.value - 0.5).abs() < 0.05, "{}", j.d1 / j.value);

        let mut zero = e.clone();
        zero.coefficients.iter_mut().for_each(|v| *v = 0.0);
        assert!(extremizer_profile(&zero).is_err());
    }

    #[test]
    fn central_log_slope_tends_to_one_half() {
        let dev = |l: f64| {
            let grid = LogGrid::symmetric(l).unwrap();
            let f = assemble_forms(2.0, &grid, FormKind::LapS, FormKind::Lap).unwrap();
            let e = max_generalized_eig(&f).unwrap();
            log_slope_deviation(&e, 0.5, -l / 2.0, l / 2.0).unwrap()
        };
        let (a, b) = (dev(5.0), dev(10.0));
        assert!(b < a && b < 0.2, "{a} {b}");
    }

    #[test]
    fn single_mode_picks_sphere_or_custom() {
        let p = RadialProfile::poly_exp(1.0, 1.0).unwrap();
        assert!(single_mode(2.0, p.clone()).unwrap().is_sphere());
        assert!(!single_mode(2.5, p).unwrap().is_sphere());
    }

    #[test]
    fn f32_agrees_on_small_problem() {
        let g32 = LogGrid::<f32>::new(-4.0, 4.0, 81).unwrap();
        let g64 = LogGrid::<f64>::new(-4.0, 4.0, 81).unwrap();
        let e32 = max_generalized_eig(
            &assemble_forms(2.0f32, &g32, FormKind::Inv, FormKind::Lap).unwrap(),
        );
        let e64 =
            max_generalized_eig(&assemble_forms(2.0, &g64, FormKind::Inv, FormKind::Lap).unwrap())
                .unwrap();
        let e32 = e32.unwrap();
        assert!((e32.value as f64 / e64.value - 1.0).abs() < 1e-2);
    }
}
