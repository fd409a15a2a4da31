//! Step functions on uniform dyadic grids.
//!
//! A [`SampledFunction`] *is* the step function whose value on the cell
//! `[origin + i·step, origin + (i+1)·step)` is `values[i]`; it is not a
//! sampling of a smooth function. Every L^p integral below is therefore the
//! exact integral of that step function, up to floating-point rounding.
//!
//! Translation moves the grid origin and leaves the values untouched, so it
//! is exact. Use [`SampledFunction::extend_to`] to place translated
//! functions on a common grid before combining them. Modulation multiplies
//! each cell by the exponential evaluated at the cell midpoint; against the
//! true modulated function this carries a quadrature error of order
//! `step·|s|` per unit mass.
//!
//! [`SparseFunction`] holds step functions with far-apart pieces, keyed by
//! unit cell, for constructions whose support spans millions of units.

mod sparse;

pub use sparse::SparseFunction;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alignment and exactness tolerance, in units of the grid step.
pub const ALIGN_TOL: f64 = 1e-12;

/// Largest supported `m` in `step = 2^-m`.
pub const MAX_STEP_LOG2: u32 = 40;

/// An L^p exponent `p ≥ 1` together with its conjugate `p' = p/(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent {
    p: f64,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self { p })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `p/(p-1)`, infinite for `p = 1`.
    pub fn conjugate(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else {
            self.p / (self.p - 1.0)
        }
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Exponent::new(p)
    }
}

impl From<Exponent> for f64 {
    fn from(e: Exponent) -> f64 {
        e.p
    }
}

/// A uniform grid of `count` cells of width `2^-step_log2` starting at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: f64,
    step_log2: u32,
    count: usize,
}

impl Grid {
    pub fn new(origin: f64, step_log2: u32, count: usize) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("origin {origin} is not finite")));
        }
        if step_log2 > MAX_STEP_LOG2 {
            return Err(Error::InvalidGrid(format!(
                "step 2^-{step_log2} is finer than 2^-{MAX_STEP_LOG2}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidGrid("cell count must be positive".into()));
        }
        Ok(Self { origin, step_log2, count })
    }

    /// Smallest grid of step `2^-step_log2`, with origin on the absolute
    /// lattice `step·Z`, that covers `[lo, hi)`.
    pub fn covering(lo: f64, hi: f64, step_log2: u32) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidGrid(format!("empty span [{lo}, {hi})")));
        }
        let step = step_from_log2(step_log2);
        let first = (lo / step).floor();
        let last = (hi / step).ceil();
        Grid::new(first * step, step_log2, (last - first) as usize)
    }

    #[inline]
    pub fn origin(&self) -> f64 {
        self.origin
    }

    #[inline]
    pub fn step_log2(&self) -> u32 {
        self.step_log2
    }

    #[inline]
    pub fn step(&self) -> f64 {
        step_from_log2(self.step_log2)
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn span(&self) -> f64 {
        self.count as f64 * self.step()
    }

    pub fn end(&self) -> f64 {
        self.origin + self.span()
    }

    /// Left endpoint of cell `i`.
    #[inline]
    pub fn left(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step()
    }

    #[inline]
    pub fn midpoint(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.step()
    }

    /// Highest frequency representable without aliasing, `1/(2·step)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.step()
    }

    /// Index of the cell boundary located at `x`, if `x` is a boundary.
    pub fn boundary_index(&self, x: f64) -> Option<i64> {
        let u = (x - self.origin) / self.step();
        let r = u.round();
        ((u - r).abs() <= ALIGN_TOL).then_some(r as i64)
    }

    /// Whether the cells of `self` lie on the absolute lattice `step·Z`.
    pub fn is_lattice_aligned(&self) -> bool {
        is_multiple(self.origin, self.step())
    }

    pub fn same_cells(&self, other: &Grid) -> bool {
        self == other
    }
}

#[inline]
pub(crate) fn step_from_log2(m: u32) -> f64 {
    (-(m as f64)).exp2()
}

/// `true` if `x` is an integer multiple of `step` within [`ALIGN_TOL`].
pub(crate) fn is_multiple(x: f64, step: f64) -> bool {
    let u = x / step;
    (u - u.round()).abs() <= ALIGN_TOL
}

/// `e^{2πi s x}` computed from the fractional part of `s·x`.
///
/// For dyadic `s` and `x` the product is exact, which keeps the phase
/// accurate even for `|x|` in the millions.
#[inline]
pub fn unit_phase(s: f64, x: f64) -> Complex64 {
    let y = s * x;
    let frac = y - y.floor();
    Complex64::from_polar(1.0, 2.0 * PI * frac)
}

#[inline]
pub(crate) fn abs_pow(v: Complex64, p: f64) -> f64 {
    if p == 2.0 {
        v.norm_sqr()
    } else {
        v.norm().powf(p)
    }
}

/// A complex step function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledRepr", into = "SampledRepr")]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct SampledRepr {
    origin: f64,
    step_log2: u32,
    values: Vec<[f64; 2]>,
}

impl TryFrom<SampledRepr> for SampledFunction {
    type Error = Error;
    fn try_from(r: SampledRepr) -> Result<Self> {
        let grid = Grid::new(r.origin, r.step_log2, r.values.len())?;
        let values = r.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        SampledFunction::from_values(grid, values)
    }
}

impl From<SampledFunction> for SampledRepr {
    fn from(f: SampledFunction) -> Self {
        SampledRepr {
            origin: f.grid.origin,
            step_log2: f.grid.step_log2,
            values: f.values.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

impl SampledFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.count] }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.count
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::from_values(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Step function whose value on each cell is `f(midpoint)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.count).map(|i| f(grid.midpoint(i))).collect();
        Self { grid, values }
    }

    /// `1_{[lo, hi)}`; both endpoints must be cell boundaries inside the grid.
    pub fn indicator(grid: Grid, lo: f64, hi: f64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        let (a, b) = grid_range(&grid, lo, hi)?;
        for v in &mut f.values[a..b] {
            *v = Complex64::new(1.0, 0.0);
        }
        Ok(f)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    /// `∫|f|^p`.
    pub fn lp_norm_pow(&self, p: Exponent) -> f64 {
        let p = p.p();
        self.values.iter().map(|&v| abs_pow(v, p)).sum::<f64>() * self.grid.step()
    }

    pub fn lp_norm(&self, p: Exponent) -> f64 {
        self.lp_norm_pow(p).powf(1.0 / p.p())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `∫_{[lo,hi)} |f|^p`; the endpoints must be cell boundaries and are
    /// clipped to the grid span.
    pub fn restricted_norm_pow(&self, lo: f64, hi: f64, p: Exponent) -> Result<f64> {
        let lo = lo.max(self.grid.origin);
        let hi = hi.min(self.grid.end());
        if hi <= lo {
            return Ok(0.0);
        }
        let (a, b) = grid_range(&self.grid, lo, hi)?;
        let p = p.p();
        Ok(self.values[a..b].iter().map(|&v| abs_pow(v, p)).sum::<f64>() * self.grid.step())
    }

    /// `τ_t f`, realized by moving the grid origin by `t`.
    pub fn translate(&self, t: f64) -> Result<Self> {
        let step = self.grid.step();
        if !t.is_finite() || !is_multiple(t, step) {
            return Err(Error::NonAlignedShift { shift: t, step });
        }
        let grid = Grid { origin: self.grid.origin + t, ..self.grid };
        Ok(Self { grid, values: self.values.clone() })
    }

    /// `e_s f` with the exponential taken at cell midpoints.
    pub fn modulate(&self, s: f64) -> Result<Self> {
        let limit = self.grid.nyquist();
        if !s.is_finite() || s.abs() >= limit {
            return Err(Error::AliasedFrequency { frequency: s, limit });
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| v * unit_phase(s, self.grid.midpoint(i)))
            .collect();
        Ok(Self { grid: self.grid, values })
    }

    /// `e_s τ_t f`.
    pub fn time_freq_shift(&self, t: f64, s: f64) -> Result<Self> {
        self.translate(t)?.modulate(s)
    }

    /// Re-expresses `self` on `target`, which must share the step and be
    /// offset by a whole number of cells. Nonzero values falling outside
    /// `target` are an error.
    pub fn extend_to(&self, target: &Grid) -> Result<Self> {
        if target.step_log2 != self.grid.step_log2 {
            return Err(Error::GridMismatch);
        }
        let offset = target
            .boundary_index(self.grid.origin)
            .ok_or(Error::GridMismatch)?;
        let mut out = Self::zeros(*target);
        for (i, &v) in self.values.iter().enumerate() {
            let j = offset + i as i64;
            if (0..target.count as i64).contains(&j) {
                out.values[j as usize] = v;
            } else if v != Complex64::new(0.0, 0.0) {
                let (lo, hi) = self.support().unwrap_or((0.0, 0.0));
                return Err(Error::SupportOutOfRange {
                    lo,
                    hi,
                    start: target.origin,
                    end: target.end(),
                });
            }
        }
        Ok(out)
    }

    /// Same function on the grid with step `2^-step_log2 ≤ step`.
    pub fn refine(&self, step_log2: u32) -> Result<Self> {
        if step_log2 < self.grid.step_log2 {
            return Err(Error::GridTooCoarse { need: self.grid.step_log2, have: step_log2 });
        }
        let factor = 1usize << (step_log2 - self.grid.step_log2);
        let grid = Grid::new(self.grid.origin, step_log2, self.grid.count * factor)?;
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, factor))
            .collect();
        Ok(Self { grid, values })
    }

    /// Smallest `[lo, hi)` outside of which `f` vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        let zero = Complex64::new(0.0, 0.0);
        let first = self.values.iter().position(|&v| v != zero)?;
        let last = self.values.iter().rposition(|&v| v != zero)?;
        Some((self.grid.left(first), self.grid.left(last + 1)))
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_cells(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| c * v).collect() }
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.check_grid(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Pointwise modulus as a (real) step function.
    pub fn modulus(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    /// `∫ f·g` (bilinear, no conjugation).
    pub fn pairing(&self, other: &Self) -> Result<Complex64> {
        self.check_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.step())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// Cell index range `[a, b)` of the aligned interval `[lo, hi)` inside `grid`.
pub(crate) fn grid_range(grid: &Grid, lo: f64, hi: f64) -> Result<(usize, usize)> {
    let step = grid.step();
    let a = grid
        .boundary_index(lo)
        .ok_or(Error::NonAlignedShift { shift: lo - grid.origin, step })?;
    let b = grid
        .boundary_index(hi)
        .ok_or(Error::NonAlignedShift { shift: hi - grid.origin, step })?;
    if a < 0 || b > grid.count as i64 || a > b {
        return Err(Error::SupportOutOfRange { lo, hi, start: grid.origin, end: grid.end() });
    }
    Ok((a as usize, b as usize))
}

pub fn lp_norm(f: &SampledFunction, p: Exponent) -> f64 {
    f.lp_norm(p)
}

pub fn translate(f: &SampledFunction, t: f64) -> Result<SampledFunction> {
    f.translate(t)
}

pub fn modulate(f: &SampledFunction, s: f64) -> Result<SampledFunction> {
    f.modulate(s)
}

/// The Gabor atom `x ↦ g(x-t) e^{2πisx}`.
pub fn time_freq_shift(g: &SampledFunction, t: f64, s: f64) -> Result<SampledFunction> {
    g.time_freq_shift(t, s)
}

/// `‖(Σ_j |f_j|²)^{1/2}‖_p`, the L^p(ℓ²) norm of a finite family.
pub fn lp_ell2_norm(fs: &[SampledFunction], p: Exponent) -> Result<f64> {
    let Some(first) = fs.first() else {
        return Ok(0.0);
    };
    if fs.iter().any(|f| f.grid != first.grid) {
        return Err(Error::GridMismatch);
    }
    let half_p = p.p() / 2.0;
    let total: f64 = (0..first.grid.count)
        .map(|i| {
            let sq: f64 = fs.iter().map(|f| f.values[i].norm_sqr()).sum();
            sq.powf(half_p)
        })
        .sum();
    Ok((total * first.grid.step()).powf(1.0 / p.p()))
}

/// Wiener amalgam norm `Σ_k sup_{[k,k+1]} |f|`.
pub fn wiener_norm(f: &SampledFunction) -> Result<f64> {
    let grid = f.grid;
    if !grid.is_lattice_aligned() {
        return Err(Error::NonAlignedGrid);
    }
    let per_unit = 1usize << grid.step_log2;
    // index (in cells) of the first integer point at or after the origin
    let origin_cells = (grid.origin / grid.step()).round() as i64;
    let mut total = 0.0;
    let mut current_unit = None;
    let mut current_sup = 0.0f64;
    for (i, v) in f.values.iter().enumerate() {
        let unit = (origin_cells + i as i64).div_euclid(per_unit as i64);
        if current_unit != Some(unit) {
            total += current_sup;
            current_sup = 0.0;
            current_unit = Some(unit);
        }
        current_sup = current_sup.max(v.norm());
    }
    Ok(total + current_sup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert_eq!(p(4.0).conjugate(), 4.0 / 3.0);
        assert!(p(1.0).conjugate().is_infinite());
    }

    #[test]
    fn unit_indicator_has_unit_norm() {
        let grid = Grid::new(-2.0, 5, 160).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        assert!((lp_norm(&f, p(4.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_half_indicator() {
        let grid = Grid::new(0.0, 3, 8).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 0.5).unwrap().scale(c(2.0));
        assert!((lp_norm(&f, p(2.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn translate_moves_indicator() {
        let grid = Grid::new(0.0, 2, 4).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        let g = translate(&f, 1.0).unwrap();
        assert_eq!(g.support(), Some((1.0, 2.0)));
        assert_eq!(translate(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn non_aligned_shift_is_rejected() {
        let grid = Grid::new(0.0, 2, 4).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        assert!(matches!(f.translate(0.1), Err(Error::NonAlignedShift { .. })));
        assert!(f.translate(0.25).is_ok());
    }

    #[test]
    fn modulation_checks_nyquist() {
        let grid = Grid::new(0.0, 2, 4).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        assert!(matches!(f.modulate(2.0), Err(Error::AliasedFrequency { .. })));
        assert_eq!(f.modulate(0.0).unwrap(), f);
        let g = f.modulate(1.5).unwrap();
        for (a, b) in g.values().iter().zip(f.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn ell2_norm_of_disjoint_unit_cubes() {
        let grid = Grid::new(0.0, 1, 4).unwrap();
        let a = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        let b = SampledFunction::indicator(grid, 1.0, 2.0).unwrap();
        let v = lp_ell2_norm(&[a.clone(), b], p(2.0)).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert!((lp_ell2_norm(std::slice::from_ref(&a), p(3.0)).unwrap() - a.lp_norm(p(3.0))).abs() < 1e-15);
    }

    #[test]
    fn ell2_norm_rejects_mixed_grids() {
        let a = SampledFunction::zeros(Grid::new(0.0, 1, 4).unwrap());
        let b = SampledFunction::zeros(Grid::new(0.5, 1, 4).unwrap());
        assert_eq!(lp_ell2_norm(&[a, b], p(2.0)), Err(Error::GridMismatch));
    }

    #[test]
    fn wiener_norm_of_indicators() {
        let grid = Grid::new(-1.0, 3, 40).unwrap();
        let one = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        let two = SampledFunction::indicator(grid, 0.0, 2.0).unwrap();
        assert_eq!(wiener_norm(&one).unwrap(), 1.0);
        assert_eq!(wiener_norm(&two).unwrap(), 2.0);
        let shifted = SampledFunction::zeros(Grid::new(0.1, 3, 8).unwrap());
        assert_eq!(wiener_norm(&shifted), Err(Error::NonAlignedGrid));
    }

    #[test]
    fn extend_to_keeps_values_and_rejects_overflow() {
        let grid = Grid::new(0.0, 1, 2).unwrap();
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap();
        let big = Grid::new(-1.0, 1, 8).unwrap();
        let g = f.extend_to(&big).unwrap();
        assert_eq!(g.support(), Some((0.0, 1.0)));
        let small = Grid::new(0.5, 1, 1).unwrap();
        assert!(matches!(f.extend_to(&small), Err(Error::SupportOutOfRange { .. })));
    }

    #[test]
    fn refine_preserves_norm() {
        let grid = Grid::new(0.0, 1, 3).unwrap();
        let f = SampledFunction::from_real(grid, &[1.0, -2.0, 0.5]).unwrap();
        let g = f.refine(4).unwrap();
        assert!((f.lp_norm(p(3.0)) - g.lp_norm(p(3.0))).abs() < 1e-14);
    }

    #[test]
    fn json_shape() {
        let grid = Grid::new(0.5, 1, 2).unwrap();
        let f = SampledFunction::from_values(grid, vec![c(1.0), Complex64::new(0.0, -1.0)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"origin":0.5,"step_log2":1,"values":[[1.0,0.0],[0.0,-1.0]]}"#);
        let back: SampledFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
