use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{abs_pow, is_multiple, step_from_log2, unit_phase, Exponent, Grid, SampledFunction};
use crate::error::{Error, Result};

/// Step function on the lattice `2^-m·Z` stored per unit cell.
///
/// Unit cell `n` holds the `2^m` values on `[n, n+1)`. Cells that are absent
/// are zero, so pieces millions of units apart cost nothing in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFunction {
    step_log2: u32,
    cells: BTreeMap<i64, Vec<Complex64>>,
}

impl SparseFunction {
    pub fn zero(step_log2: u32) -> Self {
        Self { step_log2, cells: BTreeMap::new() }
    }

    #[inline]
    pub fn step_log2(&self) -> u32 {
        self.step_log2
    }

    #[inline]
    pub fn per_unit(&self) -> usize {
        1usize << self.step_log2
    }

    pub fn from_sampled(f: &SampledFunction) -> Result<Self> {
        let grid = f.grid();
        if !grid.is_lattice_aligned() {
            return Err(Error::NonAlignedGrid);
        }
        let start = (grid.origin() / grid.step()).round() as i64;
        let mut out = Self::zero(grid.step_log2());
        for (i, &v) in f.values().iter().enumerate() {
            if v != Complex64::new(0.0, 0.0) {
                out.add_at(start + i as i64, v);
            }
        }
        Ok(out)
    }

    /// Dense copy on `grid`, which must share the step and lattice.
    pub fn to_sampled(&self, grid: &Grid) -> Result<SampledFunction> {
        if grid.step_log2() != self.step_log2 || !grid.is_lattice_aligned() {
            return Err(Error::GridMismatch);
        }
        let start = (grid.origin() / grid.step()).round() as i64;
        let mut out = SampledFunction::zeros(*grid);
        let values = out.values_mut();
        for (abs, v) in self.iter_cells() {
            let j = abs - start;
            if (0..grid.count() as i64).contains(&j) {
                values[j as usize] = v;
            } else if v != Complex64::new(0.0, 0.0) {
                let (lo, hi) = self.support().unwrap_or((0.0, 0.0));
                return Err(Error::GridTooSmall { lo, hi, start: grid.origin(), end: grid.end() });
            }
        }
        Ok(out)
    }

    /// Adds `v` to the value on the lattice cell with absolute index `abs`.
    pub fn add_at(&mut self, abs: i64, v: Complex64) {
        let per = self.per_unit() as i64;
        let unit = abs.div_euclid(per);
        let off = abs.rem_euclid(per) as usize;
        let block = self
            .cells
            .entry(unit)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); per as usize]);
        block[off] += v;
    }

    /// Adds `c·values` to unit cell `unit`.
    pub fn add_block(&mut self, unit: i64, c: Complex64, values: &[Complex64]) {
        debug_assert_eq!(values.len(), self.per_unit());
        let per = self.per_unit();
        let block = self
            .cells
            .entry(unit)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); per]);
        for (a, &b) in block.iter_mut().zip(values) {
            *a += c * b;
        }
    }

    pub fn cell(&self, unit: i64) -> Option<&[Complex64]> {
        self.cells.get(&unit).map(|v| v.as_slice())
    }

    /// Iterator over `(unit, values)` in increasing unit order.
    pub fn blocks(&self) -> impl Iterator<Item = (i64, &[Complex64])> {
        self.cells.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn num_blocks(&self) -> usize {
        self.cells.len()
    }

    /// Iterator over `(absolute lattice index, value)` of stored cells.
    pub fn iter_cells(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let per = self.per_unit() as i64;
        self.cells
            .iter()
            .flat_map(move |(&u, vals)| vals.iter().enumerate().map(move |(i, &v)| (u * per + i as i64, v)))
    }

    /// The restriction to `[unit, unit+1)` as a dense function.
    pub fn unit_function(&self, unit: i64) -> SampledFunction {
        let grid = Grid::new(unit as f64, self.step_log2, self.per_unit())
            .expect("unit grid is valid");
        match self.cells.get(&unit) {
            Some(v) => SampledFunction::from_values(grid, v.clone()).expect("block length"),
            None => SampledFunction::zeros(grid),
        }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        let zero = Complex64::new(0.0, 0.0);
        let step = step_from_log2(self.step_log2);
        let first = self.iter_cells().find(|&(_, v)| v != zero)?.0;
        let last = self.iter_cells().filter(|&(_, v)| v != zero).last()?.0;
        Some((first as f64 * step, (last + 1) as f64 * step))
    }

    pub fn is_zero(&self) -> bool {
        self.cells.values().flatten().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn lp_norm_pow(&self, p: Exponent) -> f64 {
        let p = p.p();
        self.cells.values().flatten().map(|&v| abs_pow(v, p)).sum::<f64>()
            * step_from_log2(self.step_log2)
    }

    pub fn lp_norm(&self, p: Exponent) -> f64 {
        self.lp_norm_pow(p).powf(1.0 / p.p())
    }

    /// `‖self - other‖_p` without materializing the difference.
    pub fn lp_distance(&self, other: &Self, p: Exponent) -> Result<f64> {
        if other.step_log2 != self.step_log2 {
            return Err(Error::GridMismatch);
        }
        let q = p.p();
        let pow = |vals: &[Complex64]| vals.iter().map(|&v| abs_pow(v, q)).sum::<f64>();
        let mut total = 0.0;
        let (mut a, mut b) = (self.cells.iter().peekable(), other.cells.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some((ua, va)), Some((ub, vb))) => {
                    if ua < ub {
                        total += pow(va);
                        a.next();
                    } else if ub < ua {
                        total += pow(vb);
                        b.next();
                    } else {
                        total += va.iter().zip(vb.iter()).map(|(&x, &y)| abs_pow(x - y, q)).sum::<f64>();
                        a.next();
                        b.next();
                    }
                }
                (Some((_, va)), None) => {
                    total += pow(va);
                    a.next();
                }
                (None, Some((_, vb))) => {
                    total += pow(vb);
                    b.next();
                }
                (None, None) => break,
            }
        }
        Ok((total * step_from_log2(self.step_log2)).powf(1.0 / q))
    }

    /// `τ_t f`; `t` must be a multiple of the step.
    pub fn translate(&self, t: f64) -> Result<Self> {
        let step = step_from_log2(self.step_log2);
        if !t.is_finite() || !is_multiple(t, step) {
            return Err(Error::NonAlignedShift { shift: t, step });
        }
        let shift = (t / step).round() as i64;
        let per = self.per_unit() as i64;
        if shift.rem_euclid(per) == 0 {
            let du = shift / per;
            let cells = self.cells.iter().map(|(&u, v)| (u + du, v.clone())).collect();
            return Ok(Self { step_log2: self.step_log2, cells });
        }
        let mut out = Self::zero(self.step_log2);
        for (abs, v) in self.iter_cells() {
            out.add_at(abs + shift, v);
        }
        Ok(out)
    }

    /// `e_s f` with the exponential taken at cell midpoints.
    pub fn modulate(&self, s: f64) -> Result<Self> {
        let step = step_from_log2(self.step_log2);
        let limit = 0.5 / step;
        if !s.is_finite() || s.abs() >= limit {
            return Err(Error::AliasedFrequency { frequency: s, limit });
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let per = self.per_unit() as i64;
        let cells = self
            .cells
            .iter()
            .map(|(&u, vals)| {
                let out = vals
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let x = ((u * per + i as i64) as f64 + 0.5) * step;
                        v * unit_phase(s, x)
                    })
                    .collect();
                (u, out)
            })
            .collect();
        Ok(Self { step_log2: self.step_log2, cells })
    }

    pub fn time_freq_shift(&self, t: f64, s: f64) -> Result<Self> {
        self.translate(t)?.modulate(s)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|(&u, v)| (u, v.iter().map(|&x| c * x).collect()))
            .collect();
        Self { step_log2: self.step_log2, cells }
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, c: Complex64, other: &Self) -> Result<()> {
        if other.step_log2 != self.step_log2 {
            return Err(Error::GridMismatch);
        }
        for (&u, vals) in &other.cells {
            self.add_block(u, c, vals);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// Same function on the finer lattice `2^-step_log2·Z`.
    pub fn refine(&self, step_log2: u32) -> Result<Self> {
        if step_log2 < self.step_log2 {
            return Err(Error::GridTooCoarse { need: self.step_log2, have: step_log2 });
        }
        let factor = 1usize << (step_log2 - self.step_log2);
        let cells = self
            .cells
            .iter()
            .map(|(&u, v)| (u, v.iter().flat_map(|&x| std::iter::repeat_n(x, factor)).collect()))
            .collect();
        Ok(Self { step_log2, cells })
    }

    /// Drops the given unit cells, returning the removed part.
    pub fn split_off_units(&mut self, units: &[i64]) -> Self {
        let mut removed = Self::zero(self.step_log2);
        for u in units {
            if let Some(v) = self.cells.remove(u) {
                removed.cells.insert(*u, v);
            }
        }
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn dense_round_trip() {
        let grid = Grid::new(-1.0, 2, 12).unwrap();
        let f = SampledFunction::from_fn(grid, |x| Complex64::new(x, -x * x));
        let s = SparseFunction::from_sampled(&f).unwrap();
        assert_eq!(s.num_blocks(), 3);
        assert_eq!(s.to_sampled(&grid).unwrap(), f);
    }

    #[test]
    fn far_translation_is_cheap_and_isometric() {
        let mut f = SparseFunction::zero(2);
        f.add_block(0, one(), &[one(), -one(), one() * 2.0, one()]);
        let p = Exponent::new(3.0).unwrap();
        let g = f.translate(1_234_567.0).unwrap();
        assert_eq!(g.num_blocks(), 1);
        assert!(g.cell(1_234_567).is_some());
        assert_eq!(g.lp_norm(p), f.lp_norm(p));
        let h = f.translate(0.25).unwrap();
        assert_eq!(h.num_blocks(), 2);
        assert!((h.lp_norm(p) - f.lp_norm(p)).abs() < 1e-15);
    }

    #[test]
    fn to_sampled_reports_small_grid() {
        let mut f = SparseFunction::zero(1);
        f.add_at(10, one());
        let grid = Grid::new(0.0, 1, 4).unwrap();
        assert!(matches!(f.to_sampled(&grid), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn modulation_matches_dense() {
        let grid = Grid::new(3.0, 3, 16).unwrap();
        let f = SampledFunction::from_fn(grid, |x| Complex64::new(x.sin(), 1.0));
        let s = SparseFunction::from_sampled(&f).unwrap().modulate(1.25).unwrap();
        let d = f.modulate(1.25).unwrap();
        assert!(s.to_sampled(&grid).unwrap().max_abs_diff(&d).unwrap() < 1e-14);
    }
}
