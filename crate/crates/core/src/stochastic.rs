//! Rademacher averages and the Khintchine-type inequalities built on them.
//!
//! Expectations over signs are computed by exhaustive enumeration where the
//! family is small enough; since `‖Σ ε f‖` is invariant under `ε ↦ -ε`,
//! only the patterns with `ε_1 = +1` are visited.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{abs_pow, unit_phase, Exponent, Grid, SampledFunction};
use crate::rng::{stream, trial_rng};

/// Largest function family averaged exactly.
pub const EXACT_LIMIT: usize = 12;
/// Largest scalar family averaged exactly.
pub const SCALAR_EXACT_LIMIT: usize = 20;
/// Finest grid used for lacunary sums on `[0, 1)`.
pub const LACUNARY_MAX_LOG2: u32 = 24;

/// A pattern of ±1 signs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPattern {
    bits: Vec<i8>,
}

impl SignPattern {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidArgument("sign patterns hold only +1 and -1".into()));
        }
        Ok(Self { bits })
    }

    /// Bit `k` of `mask` set means `ε_k = -1`.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self { bits: (0..n).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect() }
    }

    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        Self { bits: (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn sign(&self, k: usize) -> f64 {
        self.bits[k] as f64
    }

    /// `Σ ε_k f_k`.
    pub fn apply(&self, fs: &[SampledFunction]) -> Result<SampledFunction> {
        if fs.len() != self.bits.len() {
            return Err(Error::InvalidArgument(format!(
                "{} signs for {} functions",
                self.bits.len(),
                fs.len()
            )));
        }
        let Some(first) = fs.first() else {
            return Err(Error::InvalidArgument("empty family".into()));
        };
        let mut out = SampledFunction::zeros(*first.grid());
        for (f, &b) in fs.iter().zip(&self.bits) {
            out.add_scaled(Complex64::new(b as f64, 0.0), f)?;
        }
        Ok(out)
    }
}

fn check_family(fs: &[SampledFunction], limit: usize) -> Result<()> {
    if fs.len() > limit {
        return Err(Error::TooManyFunctions { n: fs.len(), max: limit });
    }
    if let Some(first) = fs.first() {
        if fs.iter().any(|f| f.grid() != first.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// `‖Σ ε f‖_p^q` averaged over all sign patterns with `ε_1 = +1`.
fn exact_sign_average(fs: &[SampledFunction], p: Exponent, q: f64) -> Result<f64> {
    check_family(fs, EXACT_LIMIT)?;
    let n = fs.len();
    if n == 0 {
        return Ok(0.0);
    }
    let half = 1u64 << (n - 1);
    let total: f64 = (0..half)
        .into_par_iter()
        .map(|mask| {
            let pattern = SignPattern::from_mask(mask << 1, n);
            let sum = pattern.apply(fs).expect("family checked");
            let pow = sum.lp_norm_pow(p);
            if q == p.p() {
                pow
            } else {
                pow.powf(q / p.p())
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total / half as f64)
}

/// `(𝔼‖Σ ε_j f_j‖_p^p)^{1/p}`, enumerated exactly (at most 12 functions).
pub fn rademacher_pnorm_exact(fs: &[SampledFunction], p: Exponent) -> Result<f64> {
    Ok(exact_sign_average(fs, p, p.p())?.powf(1.0 / p.p()))
}

/// `𝔼‖Σ ε_j f_j‖_p`, enumerated exactly (at most 12 functions).
pub fn rademacher_mean_norm(fs: &[SampledFunction], p: Exponent) -> Result<f64> {
    exact_sign_average(fs, p, 1.0)
}

/// Monte Carlo estimate of `𝔼‖Σ ε f‖_p^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    /// Standard error of the mean; NaN for a single trial.
    pub stderr: f64,
    pub trials: usize,
}

/// Sample mean of `‖Σ ε f‖_p^p` over `trials` seeded sign patterns.
pub fn rademacher_pnorm_mc(fs: &[SampledFunction], p: Exponent, trials: usize, seed: u64) -> Result<MonteCarloEstimate> {
    check_family(fs, usize::MAX)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if fs.is_empty() {
        return Ok(MonteCarloEstimate { estimate: 0.0, stderr: 0.0, trials });
    }
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, stream::SIGNS, trial);
            let pattern = SignPattern::random(&mut rng, fs.len());
            pattern.apply(fs).expect("family checked").lp_norm_pow(p)
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stderr = if samples.len() < 2 {
        f64::NAN
    } else {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(MonteCarloEstimate { estimate: mean, stderr, trials })
}

/// `(𝔼|Σ a_n ε_n|^p)^{1/p} / (Σ|a_n|²)^{1/2}`, enumerated exactly.
pub fn khintchine_ratio(a: &[Complex64], p: Exponent) -> Result<f64> {
    if a.len() > SCALAR_EXACT_LIMIT {
        return Err(Error::TooManyFunctions { n: a.len(), max: SCALAR_EXACT_LIMIT });
    }
    let l2 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let n = a.len();
    let half = 1u64 << (n - 1);
    let q = p.p();
    let total: f64 = (0..half)
        .into_par_iter()
        .map(|mask| {
            let mask = mask << 1;
            let s: Complex64 = a
                .iter()
                .enumerate()
                .map(|(k, &v)| if mask >> k & 1 == 1 { -v } else { v })
                .sum();
            abs_pow(s, q)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok((total / half as f64).powf(1.0 / q) / l2)
}

fn ell2_of_norms(fs: &[SampledFunction], p: Exponent) -> f64 {
    fs.iter().map(|f| f.lp_norm(p).powi(2)).sum::<f64>().sqrt()
}

/// `(Σ‖f_j‖_p²)^{1/2} / 𝔼‖Σ ε_j f_j‖_p` for `p ≤ 2`.
pub fn cotype2_ratio(fs: &[SampledFunction], p: Exponent) -> Result<f64> {
    if p.p() > 2.0 {
        return Err(Error::InvalidArgument(format!("cotype 2 ratio needs p <= 2, got {}", p.p())));
    }
    let mean = rademacher_mean_norm(fs, p)?;
    if mean == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(ell2_of_norms(fs, p) / mean)
}

/// `𝔼‖Σ ε_j f_j‖_p / (Σ‖f_j‖_p²)^{1/2}` for `p ≥ 2`.
pub fn type2_ratio(fs: &[SampledFunction], p: Exponent) -> Result<f64> {
    if p.p() < 2.0 {
        return Err(Error::InvalidArgument(format!("type 2 ratio needs p >= 2, got {}", p.p())));
    }
    let denom = ell2_of_norms(fs, p);
    if denom == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(rademacher_mean_norm(fs, p)? / denom)
}

/// Known square-function constants `(A_p, B_p)`: `A_p = 1` for `p ≥ 2`
/// and `B_p = 1` for `p ≤ 2`; the other side is `None`.
pub fn square_function_constants(p: Exponent) -> (Option<f64>, Option<f64>) {
    let q = p.p();
    (
        (q >= 2.0).then_some(1.0),
        (q <= 2.0).then_some(1.0),
    )
}

/// Positive integer frequencies with `s_{n+1} ≥ λ s_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LacunarySequence {
    freqs: Vec<u64>,
    lambda: f64,
}

impl LacunarySequence {
    pub fn new(freqs: Vec<u64>, lambda: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(Error::NotLacunary(format!("ratio bound {lambda} must exceed 1")));
        }
        if freqs.contains(&0) {
            return Err(Error::NotLacunary("frequencies must be positive".into()));
        }
        if freqs.iter().any(|&s| s > 1 << 53) {
            return Err(Error::InvalidArgument("frequencies above 2^53 are not exact".into()));
        }
        for w in freqs.windows(2) {
            // both sides exact: integers below 2^53 times a double
            if (w[1] as f64) < lambda * w[0] as f64 {
                return Err(Error::NotLacunary(format!("{} / {} < {lambda}", w[1], w[0])));
            }
        }
        Ok(Self { freqs, lambda })
    }

    /// Geometric sequence `1, q, q², …` with `n` terms.
    pub fn geometric(ratio: u64, n: usize) -> Result<Self> {
        let freqs = (0..n as u32).map(|k| ratio.pow(k)).collect();
        Self::new(freqs, ratio as f64)
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Grid on `[0,1)` fine enough for the highest frequency.
    pub fn grid(&self) -> Result<Grid> {
        let max = self.freqs.iter().copied().max().unwrap_or(1);
        let bits = 64 - max.leading_zeros();
        let m = (bits + 4).max(12);
        if m > LACUNARY_MAX_LOG2 {
            return Err(Error::AliasedFrequency {
                frequency: max as f64,
                limit: (LACUNARY_MAX_LOG2 as f64 - 1.0).exp2(),
            });
        }
        Grid::new(0.0, m, 1 << m)
    }
}

/// The trigonometric sum `Σ a_n e_{s_n}` as a step function on `grid`.
pub fn trigonometric_sum(a: &[Complex64], freqs: &[u64], grid: &Grid) -> Result<SampledFunction> {
    if a.len() != freqs.len() {
        return Err(Error::InvalidArgument(format!("{} coefficients for {} frequencies", a.len(), freqs.len())));
    }
    if let Some(&max) = freqs.iter().max() {
        if max as f64 >= grid.nyquist() {
            return Err(Error::AliasedFrequency { frequency: max as f64, limit: grid.nyquist() });
        }
    }
    let values: Vec<Complex64> = (0..grid.count())
        .into_par_iter()
        .map(|i| {
            let x = grid.midpoint(i);
            a.iter().zip(freqs).map(|(&c, &s)| c * unit_phase(s as f64, x)).sum()
        })
        .collect();
    SampledFunction::from_values(*grid, values)
}

/// `(∫_0^1 |Σ a_n e_{s_n}(x)|^p dx)^{1/p}` by midpoint quadrature.
pub fn lacunary_pnorm(a: &[Complex64], seq: &LacunarySequence, p: Exponent) -> Result<f64> {
    let grid = seq.grid()?;
    Ok(trigonometric_sum(a, seq.freqs(), &grid)?.lp_norm(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SampledFunction;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_function_average_is_its_norm() {
        let grid = Grid::new(0.0, 2, 8).unwrap();
        let f = SampledFunction::from_real(grid, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 0.0, 3.0]).unwrap();
        let v = rademacher_pnorm_exact(std::slice::from_ref(&f), p(3.0)).unwrap();
        assert!((v - f.lp_norm(p(3.0))).abs() < 1e-14);
    }

    #[test]
    fn disjoint_pair_average() {
        let grid = Grid::new(0.0, 1, 4).unwrap();
        let f = SampledFunction::from_real(grid, &[1.0, 2.0, 0.0, 0.0]).unwrap();
        let g = SampledFunction::from_real(grid, &[0.0, 0.0, -3.0, 1.0]).unwrap();
        let pp = p(2.5);
        let expect = (f.lp_norm_pow(pp) + g.lp_norm_pow(pp)).powf(1.0 / 2.5);
        assert!((rademacher_pnorm_exact(&[f, g], pp).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn too_many_functions() {
        let grid = Grid::new(0.0, 0, 1).unwrap();
        let fs = vec![SampledFunction::zeros(grid); 13];
        assert_eq!(rademacher_pnorm_exact(&fs, p(2.0)), Err(Error::TooManyFunctions { n: 13, max: 12 }));
    }

    #[test]
    fn monte_carlo_zero_family_and_reproducibility() {
        let grid = Grid::new(0.0, 1, 4).unwrap();
        let zeros = vec![SampledFunction::zeros(grid); 3];
        assert_eq!(rademacher_pnorm_mc(&zeros, p(3.0), 10, 1).unwrap().estimate, 0.0);
        let f = SampledFunction::from_real(grid, &[1.0, -1.0, 2.0, 0.0]).unwrap();
        let g = SampledFunction::from_real(grid, &[0.5, 1.0, 1.0, 1.0]).unwrap();
        let a = rademacher_pnorm_mc(&[f.clone(), g.clone()], p(3.0), 1, 42).unwrap();
        let b = rademacher_pnorm_mc(&[f, g], p(3.0), 1, 42).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn khintchine_small_cases() {
        assert!((khintchine_ratio(&[c(1.0)], p(3.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((khintchine_ratio(&[c(1.0), c(1.0)], p(2.0)).unwrap() - 1.0).abs() < 1e-15);
        // patterns: |2|^4, |0|^4, |0|^4, |2|^4 → mean 8, ratio 8^{1/4}/√2
        let r = khintchine_ratio(&[c(1.0), c(1.0)], p(4.0)).unwrap();
        assert!((r - 8f64.powf(0.25) / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(khintchine_ratio(&[c(0.0)], p(2.0)), Err(Error::ZeroFunction));
    }

    #[test]
    fn type_and_cotype_of_single_and_disjoint() {
        let grid = Grid::new(0.0, 1, 4).unwrap();
        let f = SampledFunction::from_real(grid, &[1.0, 2.0, 0.0, 0.0]).unwrap();
        let g = SampledFunction::from_real(grid, &[0.0, 0.0, -3.0, 1.0]).unwrap();
        assert!((type2_ratio(std::slice::from_ref(&f), p(3.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!((cotype2_ratio(std::slice::from_ref(&f), p(1.5)).unwrap() - 1.0).abs() < 1e-14);
        assert!((type2_ratio(&[f.clone(), g.clone()], p(2.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!((cotype2_ratio(&[f.clone(), g.clone()], p(2.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!(type2_ratio(std::slice::from_ref(&f), p(1.5)).is_err());
        assert!(cotype2_ratio(&[f], p(3.0)).is_err());
    }

    #[test]
    fn lacunary_validation() {
        assert!(matches!(LacunarySequence::new(vec![1, 2, 3], 1.6), Err(Error::NotLacunary(_))));
        assert!(LacunarySequence::new(vec![1, 3, 9], 3.0).is_ok());
        assert!(LacunarySequence::new(vec![1, 2], 1.0).is_err());
    }

    #[test]
    fn lacunary_single_term_and_p2() {
        let seq = LacunarySequence::geometric(2, 9).unwrap();
        let one = [Complex64::new(0.6, 0.8)];
        let single = LacunarySequence::new(vec![5], 2.0).unwrap();
        assert!((lacunary_pnorm(&one, &single, p(3.0)).unwrap() - 1.0).abs() < 1e-12);
        let a: Vec<Complex64> = (0..9).map(|k| Complex64::new(1.0 / (k as f64 + 1.0), k as f64 * 0.1)).collect();
        let l2 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((lacunary_pnorm(&a, &seq, p(2.0)).unwrap() - l2).abs() < 1e-12);
    }

    #[test]
    fn sign_pattern_validation() {
        assert!(SignPattern::new(vec![1, 0]).is_err());
        assert_eq!(SignPattern::from_mask(0b10, 3), SignPattern::new(vec![1, -1, 1]).unwrap());
    }
}
