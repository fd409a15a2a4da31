//! Fourier partial sums `Δ_I` and band square functions on a periodized grid.
//!
//! A function on a grid of span `L` is treated as `L`-periodic, with discrete
//! frequencies `k/L`. The DFT bin `k` is read as frequency `k/L` for
//! `k < N/2` and `(k-N)/L` otherwise, so the representable band is
//! `[-N/(2L), N/(2L))`. Intervals are half-open: `ν ∈ [lo, hi)`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_ell2_norm, Exponent, SampledFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyInterval {
    lo: f64,
    hi: f64,
}

impl FrequencyInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("empty frequency interval [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, nu: f64) -> bool {
        self.lo <= nu && nu < self.hi
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Self { lo, hi })
    }
}

/// Signed frequency of DFT bin `k` for `n` cells spanning `span`.
pub fn bin_frequency(k: usize, n: usize, span: f64) -> f64 {
    let signed = if 2 * k < n { k as i64 } else { k as i64 - n as i64 };
    signed as f64 / span
}

fn spectrum(f: &SampledFunction) -> Vec<Complex64> {
    let mut buf = f.values().to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn from_spectrum(f: &SampledFunction, mut spec: Vec<Complex64>) -> SampledFunction {
    let n = spec.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let scale = 1.0 / n as f64;
    for v in &mut spec {
        *v *= scale;
    }
    SampledFunction::from_values(*f.grid(), spec).expect("same length")
}

/// `Δ_I f`: the inverse transform of `f̂` restricted to frequencies in `I`.
pub fn partial_sum(f: &SampledFunction, interval: &FrequencyInterval) -> SampledFunction {
    let n = f.grid().count();
    let span = f.grid().span();
    let mut spec = spectrum(f);
    for (k, v) in spec.iter_mut().enumerate() {
        if !interval.contains(bin_frequency(k, n, span)) {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    from_spectrum(f, spec)
}

/// Fails with `OverlappingIntervals` on the first overlapping pair.
pub fn check_disjoint(intervals: &[FrequencyInterval]) -> Result<()> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for w in sorted.windows(2) {
        if w[0].overlaps(&w[1]) {
            return Err(Error::OverlappingIntervals {
                a_lo: w[0].lo,
                a_hi: w[0].hi,
                b_lo: w[1].lo,
                b_hi: w[1].hi,
            });
        }
    }
    Ok(())
}

/// The band projections `Δ_{I_k} f` for pairwise disjoint intervals.
pub fn band_projections(f: &SampledFunction, intervals: &[FrequencyInterval]) -> Result<Vec<SampledFunction>> {
    check_disjoint(intervals)?;
    let spec = spectrum(f);
    let n = f.grid().count();
    let span = f.grid().span();
    Ok(intervals
        .par_iter()
        .map(|iv| {
            let masked = spec
                .iter()
                .enumerate()
                .map(|(k, &v)| if iv.contains(bin_frequency(k, n, span)) { v } else { Complex64::new(0.0, 0.0) })
                .collect();
            from_spectrum(f, masked)
        })
        .collect())
}

/// `‖(Σ_k |Δ_{I_k} f|²)^{1/2}‖_p` for disjoint intervals and `p ≥ 2`.
pub fn rdf_square_norm(f: &SampledFunction, intervals: &[FrequencyInterval], p: Exponent) -> Result<f64> {
    if p.p() < 2.0 {
        return Err(Error::InvalidArgument(format!("square-function bound needs p >= 2, got {}", p.p())));
    }
    let bands = band_projections(f, intervals)?;
    if bands.is_empty() {
        return Ok(0.0);
    }
    lp_ell2_norm(&bands, p)
}

/// Equal-length bands of width `width` covering the representable spectrum
/// of an `n`-cell grid of span `span`.
pub fn uniform_partition(n: usize, span: f64, width: f64) -> Result<Vec<FrequencyInterval>> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument("band width must be positive".into()));
    }
    let lo = -(n as f64) / (2.0 * span);
    let hi = (n as f64) / (2.0 * span);
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = (a + width).min(hi);
        out.push(FrequencyInterval::new(a, b)?);
        a = b;
    }
    Ok(out)
}

/// Splits a family into subfamilies of pairwise disjoint intervals by greedy
/// coloring in order of left endpoints, which is optimal for interval
/// graphs.
pub fn overlapping_family_split(intervals: &[FrequencyInterval]) -> Vec<Vec<FrequencyInterval>> {
    let mut order: Vec<usize> = (0..intervals.len()).collect();
    order.sort_by(|&a, &b| intervals[a].lo.total_cmp(&intervals[b].lo).then(a.cmp(&b)));
    // per class: right end of its last interval
    let mut classes: Vec<(f64, Vec<FrequencyInterval>)> = Vec::new();
    for i in order {
        let iv = intervals[i];
        match classes.iter_mut().find(|(end, _)| *end <= iv.lo) {
            Some((end, members)) => {
                *end = iv.hi;
                members.push(iv);
            }
            None => classes.push((iv.hi, vec![iv])),
        }
    }
    classes.into_iter().map(|(_, m)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{unit_phase, Grid};

    fn tone(grid: Grid, s: f64) -> SampledFunction {
        SampledFunction::from_fn(grid, |x| unit_phase(s, x))
    }

    #[test]
    fn band_pass_keeps_in_band_tone() {
        let grid = Grid::new(0.0, 4, 64).unwrap();
        let f = tone(grid, 1.5);
        let pass = partial_sum(&f, &FrequencyInterval::new(1.0, 2.0).unwrap());
        assert!(pass.max_abs_diff(&f).unwrap() < 1e-12);
        let stop = partial_sum(&f, &FrequencyInterval::new(2.0, 3.0).unwrap());
        assert!(stop.sup_norm() < 1e-12);
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let grid = Grid::new(0.0, 3, 32).unwrap();
        let f = tone(grid, 0.25);
        let ivs = [FrequencyInterval::new(0.0, 1.0).unwrap(), FrequencyInterval::new(0.5, 2.0).unwrap()];
        let p = Exponent::new(3.0).unwrap();
        assert!(matches!(rdf_square_norm(&f, &ivs, p), Err(Error::OverlappingIntervals { .. })));
        let touching = [FrequencyInterval::new(0.0, 1.0).unwrap(), FrequencyInterval::new(1.0, 2.0).unwrap()];
        assert!(rdf_square_norm(&f, &touching, p).is_ok());
    }

    #[test]
    fn splitting_families() {
        let disjoint: Vec<_> = (0..5).map(|k| FrequencyInterval::new(k as f64, k as f64 + 1.0).unwrap()).collect();
        assert_eq!(overlapping_family_split(&disjoint).len(), 1);
        let nested = [FrequencyInterval::new(0.0, 4.0).unwrap(), FrequencyInterval::new(1.0, 2.0).unwrap()];
        assert_eq!(overlapping_family_split(&nested).len(), 2);
        assert!(overlapping_family_split(&[]).is_empty());
    }

    #[test]
    fn uniform_partition_covers_band() {
        let ivs = uniform_partition(64, 4.0, 2.0).unwrap();
        assert_eq!(ivs.len(), 8);
        assert_eq!(ivs[0].lo(), -8.0);
        assert_eq!(ivs[7].hi(), 8.0);
        check_disjoint(&ivs).unwrap();
    }
}
