//! The Haar system on ℝ, normalized in L^p.
//!
//! Every unit interval `[n, n+1)` carries its own copy of the Haar basis of
//! `L^p[0,1]`: the father function `1_{[n,n+1)}` (encoded as scale `-1`)
//! and the wavelets `±2^{j/p}` on the two halves of the dyadic interval
//! `[n + i·2^-j, n + (i+1)·2^-j)`. The biorthogonal functional of `h` is
//! integration against the same shape normalized in `L^{p'}`, so that
//! `⟨h, h*⟩ = 1`.
//!
//! Indices are ordered by cell (`0, 1, -1, 2, -2, …`), then scale, then
//! position.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grid_range, Exponent, Grid, SampledFunction, SparseFunction};
use crate::rng::{stream, trial_rng};

/// Finest supported Haar scale.
pub const MAX_SCALE: i32 = 38;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HaarIndex {
    cell: i64,
    scale: i32,
    position: u64,
}

impl HaarIndex {
    pub fn new(cell: i64, scale: i32, position: u64) -> Result<Self> {
        if !(-1..=MAX_SCALE).contains(&scale) {
            return Err(Error::InvalidHaarIndex(format!("scale {scale} outside [-1, {MAX_SCALE}]")));
        }
        let limit = if scale < 0 { 1 } else { 1u64 << scale };
        if position >= limit {
            return Err(Error::InvalidHaarIndex(format!(
                "position {position} outside [0, {limit}) at scale {scale}"
            )));
        }
        Ok(Self { cell, scale, position })
    }

    pub fn father(cell: i64) -> Self {
        Self { cell, scale: -1, position: 0 }
    }

    #[inline]
    pub fn cell(&self) -> i64 {
        self.cell
    }

    #[inline]
    pub fn scale(&self) -> i32 {
        self.scale
    }

    #[inline]
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn is_father(&self) -> bool {
        self.scale < 0
    }

    /// `[lo, hi)` outside of which the function vanishes.
    pub fn support(&self) -> (f64, f64) {
        if self.is_father() {
            return (self.cell as f64, self.cell as f64 + 1.0);
        }
        let len = (-(self.scale as f64)).exp2();
        let lo = self.cell as f64 + self.position as f64 * len;
        (lo, lo + len)
    }

    /// `m` such that step `2^-m` resolves both halves.
    pub fn required_step_log2(&self) -> u32 {
        (self.scale + 1) as u32
    }

    /// Modulus of the function normalized in L^q on its support.
    pub fn amplitude(&self, q: f64) -> f64 {
        if self.is_father() || q.is_infinite() {
            1.0
        } else {
            (self.scale as f64 / q).exp2()
        }
    }

    fn sort_key(&self) -> (u64, bool, i32, u64) {
        (self.cell.unsigned_abs(), self.cell < 0, self.scale, self.position)
    }

    /// All indices on cells in `cells` with scale at most `max_scale`, in
    /// enumeration order.
    pub fn enumerate(cells: Range<i64>, max_scale: i32) -> Vec<HaarIndex> {
        let mut out = Vec::new();
        for cell in cells {
            out.push(Self::father(cell));
            for scale in 0..=max_scale {
                for position in 0..(1u64 << scale) {
                    out.push(Self { cell, scale, position });
                }
            }
        }
        out.sort();
        out
    }

    /// The first `count` indices on cell 0 in enumeration order: the father
    /// function followed by wavelets of increasing scale.
    pub fn first_on_cell_zero(count: usize) -> Vec<HaarIndex> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(Self::father(0));
        let mut scale = 0;
        while out.len() < count {
            for position in 0..(1u64 << scale) {
                if out.len() == count {
                    break;
                }
                out.push(Self { cell: 0, scale, position });
            }
            scale += 1;
        }
        out
    }
}

impl Ord for HaarIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for HaarIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cell ranges of the positive and negative halves (the whole support for
/// a father function, with an empty second range).
fn half_ranges(idx: &HaarIndex, grid: &Grid) -> Result<((usize, usize), (usize, usize))> {
    if grid.step_log2() < idx.required_step_log2() {
        return Err(Error::GridTooCoarse { need: idx.required_step_log2(), have: grid.step_log2() });
    }
    let (lo, hi) = idx.support();
    if lo < grid.origin() || hi > grid.end() {
        return Err(Error::SupportOutOfRange { lo, hi, start: grid.origin(), end: grid.end() });
    }
    if idx.is_father() {
        let r = grid_range(grid, lo, hi)?;
        return Ok((r, (r.1, r.1)));
    }
    let mid = 0.5 * (lo + hi);
    Ok((grid_range(grid, lo, mid)?, grid_range(grid, mid, hi)?))
}

/// `h_idx` normalized in L^p, as a step function on `grid`.
pub fn haar_function(idx: &HaarIndex, p: Exponent, grid: &Grid) -> Result<SampledFunction> {
    let ((a, b), (c, d)) = half_ranges(idx, grid)?;
    let amp = idx.amplitude(p.p());
    let mut f = SampledFunction::zeros(*grid);
    let values = f.values_mut();
    for v in &mut values[a..b] {
        *v = Complex64::new(amp, 0.0);
    }
    for v in &mut values[c..d] {
        *v = Complex64::new(-amp, 0.0);
    }
    Ok(f)
}

/// The biorthogonal partner `h*_idx`, normalized in L^{p'}.
pub fn haar_dual_function(idx: &HaarIndex, p: Exponent, grid: &Grid) -> Result<SampledFunction> {
    let ((a, b), (c, d)) = half_ranges(idx, grid)?;
    let amp = idx.amplitude(p.conjugate());
    let mut f = SampledFunction::zeros(*grid);
    let values = f.values_mut();
    for v in &mut values[a..b] {
        *v = Complex64::new(amp, 0.0);
    }
    for v in &mut values[c..d] {
        *v = Complex64::new(-amp, 0.0);
    }
    Ok(f)
}

/// `h*_idx(f) = ∫ f·h*_idx`.
pub fn haar_functional(idx: &HaarIndex, f: &SampledFunction, p: Exponent) -> Result<Complex64> {
    let ((a, b), (c, d)) = half_ranges(idx, f.grid())?;
    let v = f.values();
    let plus: Complex64 = v[a..b].iter().sum();
    let minus: Complex64 = v[c..d].iter().sum();
    Ok((plus - minus) * (idx.amplitude(p.conjugate()) * f.grid().step()))
}

/// `h_idx` on the lattice `2^-step_log2·Z`.
pub fn haar_function_sparse(idx: &HaarIndex, p: Exponent, step_log2: u32) -> Result<SparseFunction> {
    let grid = Grid::new(idx.cell() as f64, step_log2, 1usize << step_log2)?;
    SparseFunction::from_sampled(&haar_function(idx, p, &grid)?)
}

/// `h*_idx(f)` for a function stored per unit cell.
pub fn haar_functional_sparse(idx: &HaarIndex, f: &SparseFunction, p: Exponent) -> Result<Complex64> {
    let unit = f.unit_function(idx.cell());
    haar_functional(idx, &unit, p)
}

/// Finite family of Haar coefficients keyed by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HaarCoefficients {
    entries: BTreeMap<HaarIndex, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientRow {
    cell: i64,
    scale: i32,
    position: u64,
    re: f64,
    im: f64,
}

impl Serialize for HaarCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<CoefficientRow> = self
            .entries
            .iter()
            .map(|(k, v)| CoefficientRow {
                cell: k.cell,
                scale: k.scale,
                position: k.position,
                re: v.re,
                im: v.im,
            })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HaarCoefficients {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<CoefficientRow>::deserialize(d)?;
        let mut out = HaarCoefficients::default();
        for r in rows {
            let idx = HaarIndex::new(r.cell, r.scale, r.position).map_err(serde::de::Error::custom)?;
            out.insert(idx, Complex64::new(r.re, r.im));
        }
        Ok(out)
    }
}

impl HaarCoefficients {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, idx: HaarIndex, c: Complex64) {
        self.entries.insert(idx, c);
    }

    pub fn get(&self, idx: &HaarIndex) -> Option<Complex64> {
        self.entries.get(idx).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HaarIndex, &Complex64)> {
        self.entries.iter()
    }

    pub fn map_values(&self, mut f: impl FnMut(usize, Complex64) -> Complex64) -> Self {
        let entries = self.entries.iter().enumerate().map(|(n, (k, &v))| (*k, f(n, v))).collect();
        Self { entries }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let zero = Complex64::new(0.0, 0.0);
        self.entries
            .keys()
            .chain(other.entries.keys())
            .map(|k| (self.get(k).unwrap_or(zero) - other.get(k).unwrap_or(zero)).norm())
            .fold(0.0, f64::max)
    }
}

impl FromIterator<(HaarIndex, Complex64)> for HaarCoefficients {
    fn from_iter<I: IntoIterator<Item = (HaarIndex, Complex64)>>(iter: I) -> Self {
        Self { entries: iter.into_iter().collect() }
    }
}

/// Haar coefficients of `f` for all indices on `cells` up to `max_scale`.
pub fn haar_expand(
    f: &SampledFunction,
    p: Exponent,
    cells: Range<i64>,
    max_scale: i32,
) -> Result<HaarCoefficients> {
    let indices = HaarIndex::enumerate(cells, max_scale);
    let coeffs: Result<Vec<_>> = indices
        .par_iter()
        .map(|idx| haar_functional(idx, f, p).map(|c| (*idx, c)))
        .collect();
    Ok(coeffs?.into_iter().collect())
}

/// `Σ c_idx h_idx` on `grid`.
pub fn haar_reconstruct(coeffs: &HaarCoefficients, p: Exponent, grid: &Grid) -> Result<SampledFunction> {
    let mut f = SampledFunction::zeros(*grid);
    for (idx, &c) in coeffs.iter() {
        let ((a, b), (cc, d)) = half_ranges(idx, grid)?;
        let amp = c * idx.amplitude(p.p());
        let values = f.values_mut();
        for v in &mut values[a..b] {
            *v += amp;
        }
        for v in &mut values[cc..d] {
            *v -= amp;
        }
    }
    Ok(f)
}

/// Unit cells covered by `grid` and the finest scale it resolves, provided
/// the grid consists of whole unit cells.
pub fn full_scale_cells(grid: &Grid) -> Result<(Range<i64>, i32)> {
    let per = 1usize << grid.step_log2();
    if grid.origin().fract() != 0.0 || !grid.count().is_multiple_of(per) {
        return Err(Error::NonAlignedGrid);
    }
    let start = grid.origin() as i64;
    let units = (grid.count() / per) as i64;
    Ok((start..start + units, grid.step_log2() as i32 - 1))
}

/// Checked sign-flip bound for the L^p-normalized Haar system.
pub fn unconditional_constant(p: Exponent) -> f64 {
    let q = p.p();
    if q == 1.0 {
        f64::INFINITY
    } else {
        (q - 1.0).max(1.0 / (q - 1.0))
    }
}

/// Largest `‖Σ θ_k c_k h_k‖_p / ‖f‖_p` over `trials` sampled ±1 patterns,
/// where `c_k` are the full-scale Haar coefficients of `f`.
pub fn haar_unconditionality_ratio(f: &SampledFunction, p: Exponent, trials: usize, seed: u64) -> Result<f64> {
    let norm = f.lp_norm(p);
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let (cells, max_scale) = full_scale_cells(f.grid())?;
    let coeffs = haar_expand(f, p, cells, max_scale)?;
    let grid = *f.grid();
    let ratios: Result<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, stream::SIGNS, trial);
            let flipped = coeffs.map_values(|_, c| if rng.gen::<bool>() { c } else { -c });
            Ok(haar_reconstruct(&flipped, p, &grid)?.lp_norm(p) / norm)
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    fn unit_grid(m: u32) -> Grid {
        Grid::new(0.0, m, 1 << m).unwrap()
    }

    #[test]
    fn index_validation() {
        assert!(HaarIndex::new(0, -1, 1).is_err());
        assert!(HaarIndex::new(0, 2, 4).is_err());
        assert!(HaarIndex::new(0, -2, 0).is_err());
        assert!(HaarIndex::new(-3, 2, 3).is_ok());
    }

    #[test]
    fn father_is_unit_indicator() {
        let grid = Grid::new(-1.0, 2, 12).unwrap();
        let h = haar_function(&HaarIndex::father(0), p(2.5), &grid).unwrap();
        assert_eq!(h, SampledFunction::indicator(grid, 0.0, 1.0).unwrap());
        assert!((h.lp_norm(p(2.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mother_at_p4() {
        let h = haar_function(&HaarIndex::new(0, 0, 0).unwrap(), p(4.0), &unit_grid(1)).unwrap();
        assert_eq!(h.values()[0].re, 1.0);
        assert_eq!(h.values()[1].re, -1.0);
        assert!((h.lp_norm(p(4.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_two_position_one_at_p2() {
        let grid = unit_grid(3);
        let idx = HaarIndex::new(0, 2, 1).unwrap();
        let h = haar_function(&idx, p(2.0), &grid).unwrap();
        let vals: Vec<f64> = h.values().iter().map(|v| v.re).collect();
        assert_eq!(vals, vec![0.0, 0.0, 2.0, -2.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((h.lp_norm(p(2.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_errors() {
        let idx = HaarIndex::new(0, 3, 0).unwrap();
        assert!(matches!(haar_function(&idx, p(2.0), &unit_grid(3)), Err(Error::GridTooCoarse { .. })));
        let far = HaarIndex::father(5);
        assert!(matches!(haar_function(&far, p(2.0), &unit_grid(3)), Err(Error::SupportOutOfRange { .. })));
    }

    #[test]
    fn functional_of_scaled_father() {
        let grid = unit_grid(3);
        let f = SampledFunction::indicator(grid, 0.0, 1.0).unwrap().scale(Complex64::new(3.0, 0.0));
        let c = haar_functional(&HaarIndex::father(0), &f, p(1.7)).unwrap();
        assert!((c - Complex64::new(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn biorthogonality_and_normalization() {
        let grid = Grid::new(-1.0, 4, 32).unwrap();
        for &q in &[1.5, 2.0, 3.0, 4.0] {
            let pp = p(q);
            let idx = HaarIndex::enumerate(-1..1, 3);
            for a in &idx {
                let ha = haar_function(a, pp, &grid).unwrap();
                let da = haar_dual_function(a, pp, &grid).unwrap();
                assert!((ha.lp_norm(pp) - 1.0).abs() < 1e-12);
                assert!((da.lp_norm(Exponent::new(pp.conjugate()).unwrap()) - 1.0).abs() < 1e-12);
                for b in &idx {
                    let v = haar_functional(b, &ha, pp).unwrap();
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-12, "{a:?} {b:?} {v}");
                }
            }
        }
    }

    #[test]
    fn enumeration_order() {
        let idx = HaarIndex::enumerate(-1..2, 0);
        let cells: Vec<i64> = idx.iter().map(|i| i.cell()).collect();
        assert_eq!(cells, vec![0, 0, 1, 1, -1, -1]);
        let first = HaarIndex::first_on_cell_zero(4);
        assert_eq!(
            first,
            vec![
                HaarIndex::father(0),
                HaarIndex::new(0, 0, 0).unwrap(),
                HaarIndex::new(0, 1, 0).unwrap(),
                HaarIndex::new(0, 1, 1).unwrap()
            ]
        );
    }

    #[test]
    fn empty_coefficients_reconstruct_zero() {
        let f = haar_reconstruct(&HaarCoefficients::new(), p(3.0), &unit_grid(2)).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn single_atom_and_disjoint_pair_are_sign_invariant() {
        let grid = Grid::new(0.0, 3, 16).unwrap();
        let pp = p(4.0);
        let h = haar_function(&HaarIndex::new(0, 1, 0).unwrap(), pp, &grid).unwrap();
        let r = haar_unconditionality_ratio(&h, pp, 32, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let h2 = haar_function(&HaarIndex::new(1, 2, 3).unwrap(), pp, &grid).unwrap();
        let sum = h.add(&h2).unwrap();
        let r = haar_unconditionality_ratio(&sum, pp, 64, 2).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function_is_rejected() {
        let f = SampledFunction::zeros(unit_grid(2));
        assert_eq!(haar_unconditionality_ratio(&f, p(3.0), 4, 0), Err(Error::ZeroFunction));
    }

    #[test]
    fn coefficient_json_rows() {
        let c: HaarCoefficients =
            [(HaarIndex::new(-2, 1, 1).unwrap(), Complex64::new(0.5, -1.0))].into_iter().collect();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"[{"cell":-2,"scale":1,"position":1,"re":0.5,"im":-1.0}]"#);
        let back: HaarCoefficients = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
