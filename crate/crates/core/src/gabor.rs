//! Finite Gabor systems `{e_s τ_t g : (t, s) ∈ Λ}` on a common grid.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_ell2_norm, Exponent, Grid, SampledFunction};
use crate::rng::{stream, trial_rng};

/// Largest family for which sign patterns are enumerated exhaustively.
pub const EXACT_SIGN_LIMIT: usize = 12;

/// A time–frequency shift `(t, s)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeFreqPoint {
    pub t: f64,
    pub s: f64,
}

impl TimeFreqPoint {
    pub fn new(t: f64, s: f64) -> Self {
        // normalize -0.0 so that equality and ordering agree
        Self { t: t + 0.0, s: s + 0.0 }
    }
}

impl PartialEq for TimeFreqPoint {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TimeFreqPoint {}

impl Ord for TimeFreqPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.t + 0.0)
            .total_cmp(&(other.t + 0.0))
            .then((self.s + 0.0).total_cmp(&(other.s + 0.0)))
    }
}

impl PartialOrd for TimeFreqPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Coefficients `a_{ts}` indexed by points of Λ.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientMap {
    entries: BTreeMap<TimeFreqPoint, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientRow {
    t: f64,
    s: f64,
    re: f64,
    im: f64,
}

impl Serialize for CoefficientMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<_> = self
            .entries
            .iter()
            .map(|(k, v)| CoefficientRow { t: k.t, s: k.s, re: v.re, im: v.im })
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<CoefficientRow>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| (TimeFreqPoint::new(r.t, r.s), Complex64::new(r.re, r.im)))
            .collect())
    }
}

impl CoefficientMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pt: TimeFreqPoint, a: Complex64) {
        self.entries.insert(pt, a);
    }

    pub fn get(&self, pt: &TimeFreqPoint) -> Option<Complex64> {
        self.entries.get(pt).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TimeFreqPoint, &Complex64)> {
        self.entries.iter()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.entries.iter().map(|(k, &v)| (*k, c * v)).collect()
    }

    /// Entrywise sum.
    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &v) in &other.entries {
            *out.entries.entry(*k).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        out
    }
}

impl FromIterator<(TimeFreqPoint, Complex64)> for CoefficientMap {
    fn from_iter<I: IntoIterator<Item = (TimeFreqPoint, Complex64)>>(iter: I) -> Self {
        Self { entries: iter.into_iter().collect() }
    }
}

/// The system 𝒢(g; Λ) with every atom materialized on `grid`.
#[derive(Debug, Clone)]
pub struct GaborSystem {
    window: SampledFunction,
    points: Vec<TimeFreqPoint>,
    grid: Grid,
    index: BTreeMap<TimeFreqPoint, usize>,
    atoms: Vec<SampledFunction>,
}

impl GaborSystem {
    /// Builds the system; fails if some atom is not representable on `grid`
    /// (misaligned shift, aliased frequency, or support outside the span).
    pub fn new(window: SampledFunction, points: Vec<TimeFreqPoint>, grid: Grid) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (n, pt) in points.iter().enumerate() {
            if index.insert(*pt, n).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate point ({}, {})", pt.t, pt.s)));
            }
        }
        let atoms: Result<Vec<_>> = points
            .par_iter()
            .map(|pt| window.time_freq_shift(pt.t, pt.s)?.extend_to(&grid))
            .collect();
        Ok(Self { window, points, grid, index, atoms: atoms? })
    }

    pub fn window(&self) -> &SampledFunction {
        &self.window
    }

    pub fn points(&self) -> &[TimeFreqPoint] {
        &self.points
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `e_s τ_t g` on the common grid.
    pub fn atom(&self, pt: &TimeFreqPoint) -> Result<&SampledFunction> {
        self.index
            .get(pt)
            .map(|&n| &self.atoms[n])
            .ok_or(Error::UnknownPoint { t: pt.t, s: pt.s })
    }

    fn terms(&self, a: &CoefficientMap) -> Result<Vec<(usize, Complex64)>> {
        a.iter()
            .map(|(pt, &c)| {
                self.index
                    .get(pt)
                    .map(|&n| (n, c))
                    .ok_or(Error::UnknownPoint { t: pt.t, s: pt.s })
            })
            .collect()
    }

    fn combine(&self, terms: &[(usize, Complex64)]) -> SampledFunction {
        let mut out = SampledFunction::zeros(self.grid);
        for &(n, c) in terms {
            out.add_scaled(c, &self.atoms[n]).expect("atoms share the system grid");
        }
        out
    }

    /// `Σ a_{ts} e_s τ_t g`.
    pub fn synthesize(&self, a: &CoefficientMap) -> Result<SampledFunction> {
        Ok(self.combine(&self.terms(a)?))
    }

    /// Extreme values of `‖Σ θ a atom‖_p / ‖Σ a atom‖_p` over sign patterns
    /// θ, returned as `(max, min)`. All patterns are enumerated when `a` has
    /// at most [`EXACT_SIGN_LIMIT`] entries, otherwise `trials` patterns are
    /// sampled from `seed`.
    pub fn sign_flip_ratio(&self, a: &CoefficientMap, p: Exponent, trials: usize, seed: u64) -> Result<(f64, f64)> {
        let terms = self.terms(a)?;
        let base = self.combine(&terms).lp_norm(p);
        if base == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let n = terms.len();
        let eval = |signs: &dyn Fn(usize) -> bool| {
            let flipped: Vec<_> = terms
                .iter()
                .enumerate()
                .map(|(k, &(i, c))| (i, if signs(k) { c } else { -c }))
                .collect();
            self.combine(&flipped).lp_norm(p) / base
        };
        let ratios: Vec<f64> = if n <= EXACT_SIGN_LIMIT {
            (0u64..1 << n)
                .into_par_iter()
                .map(|mask| eval(&|k| mask >> k & 1 == 0))
                .collect()
        } else {
            (0..trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(seed, stream::SIGNS, trial);
                    let bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                    eval(&|k| bits[k])
                })
                .collect()
        };
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((max, min))
    }

    /// `‖(Σ |a_{ts}|² |e_s τ_t g|²)^{1/2}‖_p`.
    pub fn square_function_equivalent(&self, a: &CoefficientMap, p: Exponent) -> Result<f64> {
        let family = self.scaled_atoms(a)?;
        if family.is_empty() {
            return Ok(0.0);
        }
        lp_ell2_norm(&family, p)
    }

    /// The family `{a_{ts} e_s τ_t g}` in map order.
    pub fn scaled_atoms(&self, a: &CoefficientMap) -> Result<Vec<SampledFunction>> {
        Ok(self.terms(a)?.into_iter().map(|(n, c)| self.atoms[n].scale(c)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    fn unit_window() -> SampledFunction {
        SampledFunction::indicator(Grid::new(0.0, 3, 8).unwrap(), 0.0, 1.0).unwrap()
    }

    fn big_grid() -> Grid {
        Grid::new(-4.0, 3, 96).unwrap()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn single_unit_coefficient_gives_window() {
        let sys = GaborSystem::new(unit_window(), vec![TimeFreqPoint::new(0.0, 0.0)], big_grid()).unwrap();
        let a: CoefficientMap = [(TimeFreqPoint::new(0.0, 0.0), one())].into_iter().collect();
        let f = sys.synthesize(&a).unwrap();
        assert_eq!(f, unit_window().extend_to(&big_grid()).unwrap());
        assert!(sys.synthesize(&CoefficientMap::new()).unwrap().is_zero());
    }

    #[test]
    fn unknown_point_is_rejected() {
        let sys = GaborSystem::new(unit_window(), vec![TimeFreqPoint::new(0.0, 0.0)], big_grid()).unwrap();
        let a: CoefficientMap = [(TimeFreqPoint::new(1.0, 0.0), one())].into_iter().collect();
        assert!(matches!(sys.synthesize(&a), Err(Error::UnknownPoint { .. })));
        assert!(sys.atom(&TimeFreqPoint::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn atom_outside_grid_fails_construction() {
        let r = GaborSystem::new(unit_window(), vec![TimeFreqPoint::new(20.0, 0.0)], big_grid());
        assert!(matches!(r, Err(Error::SupportOutOfRange { .. })));
    }

    #[test]
    fn disjoint_atoms_add_in_pth_power() {
        let pts = vec![TimeFreqPoint::new(0.0, 1.0), TimeFreqPoint::new(2.0, -2.5)];
        let sys = GaborSystem::new(unit_window(), pts.clone(), big_grid()).unwrap();
        let a: CoefficientMap = pts.iter().map(|&pt| (pt, one())).collect();
        let pp = p(3.0);
        let lhs = sys.synthesize(&a).unwrap().lp_norm_pow(pp);
        let rhs: f64 = pts.iter().map(|pt| sys.atom(pt).unwrap().lp_norm_pow(pp)).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let (max, min) = sys.sign_flip_ratio(&a, pp, 0, 0).unwrap();
        assert!((max - 1.0).abs() < 1e-12 && (min - 1.0).abs() < 1e-12);
        let sf = sys.square_function_equivalent(&a, pp).unwrap();
        assert!((sf - lhs.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_atom_square_function() {
        let pt = TimeFreqPoint::new(1.0, 0.5);
        let sys = GaborSystem::new(unit_window(), vec![pt], big_grid()).unwrap();
        let a: CoefficientMap = [(pt, Complex64::new(0.0, -2.0))].into_iter().collect();
        let sf = sys.square_function_equivalent(&a, p(1.5)).unwrap();
        assert!((sf - 2.0).abs() < 1e-12);
        assert_eq!(sys.sign_flip_ratio(&a, p(1.5), 0, 0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn zero_synthesis_is_rejected_for_sign_ratio() {
        let pt = TimeFreqPoint::new(0.0, 0.0);
        let sys = GaborSystem::new(unit_window(), vec![pt], big_grid()).unwrap();
        let a: CoefficientMap = [(pt, Complex64::new(0.0, 0.0))].into_iter().collect();
        assert_eq!(sys.sign_flip_ratio(&a, p(2.0), 4, 0), Err(Error::ZeroFunction));
    }

    #[test]
    fn points_normalize_negative_zero() {
        assert_eq!(TimeFreqPoint::new(-0.0, 0.0), TimeFreqPoint::new(0.0, -0.0));
    }

    #[test]
    fn coefficient_json_rows() {
        let a: CoefficientMap = [(TimeFreqPoint::new(0.5, 2.0), Complex64::new(1.0, -1.0))].into_iter().collect();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"[{"t":0.5,"s":2.0,"re":1.0,"im":-1.0}]"#);
        assert_eq!(serde_json::from_str::<CoefficientMap>(&s).unwrap(), a);
    }
}
