//! The two explicit counterexample windows and their norm formulas.
//!
//! Dilation case (`1 ≤ p < 2`): `g = Σ_{k≥1} c_k 2^{k/p} 1_{[k, k+2^-k]}`
//! with Λ = `{(2^-j, 2^j)}`, for which
//! `‖Φ_a‖_p ≍ (Σ|a_j|^p w_j)^{1/p} + ‖a‖_2`, `w_j = Σ_{k≥j}|c_k|^p`.
//!
//! Translates case (`p > 2`): `g = Σ_{k≥0} c_k e_{2^k} 1_{[k, k+1]}` with
//! integer translates, for which on `[l, l+1]`
//! `Φ_a = Σ_{k<l} a_{l-k} c_k e_{2^k}` and
//! `‖Φ_a‖_p^p ≍ Σ_l (Σ_k |a_{l-k}|² |c_k|²)^{p/2}`.
//!
//! The implied constants are not explicit; [`crate::calibration`] records
//! observed windows for regression.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{CoefficientMap, GaborSystem, TimeFreqPoint};
use crate::grid::{unit_phase, Exponent, Grid, SampledFunction};
use crate::rng::{derive_seed, stream, trial_rng};

/// Default resolution for the dilation example.
pub const THM42_STEP_LOG2: u32 = 15;
/// Default resolution for the translates example; `|Σ b_k e_{2^k}|^4` with
/// `2^k ≤ 2^6` is integrated exactly at this step.
pub const THM52_STEP_LOG2: u32 = 12;

/// Coefficients `c_k`, `k = start, start+1, …`, and their tail sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    start: i64,
    c: Vec<Complex64>,
    p: Exponent,
}

impl WeightSequence {
    pub fn new(start: i64, c: Vec<Complex64>, p: Exponent) -> Self {
        Self { start, c, p }
    }

    /// Rescales so that `Σ|c_k|^p = 1`.
    pub fn normalized(start: i64, c: Vec<Complex64>, p: Exponent) -> Result<Self> {
        let s: f64 = c.iter().map(|v| v.norm().powf(p.p())).sum();
        if s == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let scale = s.powf(-1.0 / p.p());
        Ok(Self { start, c: c.into_iter().map(|v| v * scale).collect(), p })
    }

    /// The sequence starting at `k = 1` whose tail sums are `w_1, …, w_K`
    /// (and zero beyond), `c_k = (w_k - w_{k+1})^{1/p}`.
    pub fn from_tail_weights(w: &[f64], p: Exponent) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.windows(2).any(|x| x[1] > x[0]) {
            return Err(Error::InvalidArgument("tail weights must be finite, non-negative and non-increasing".into()));
        }
        let c = (0..w.len())
            .map(|i| {
                let next = w.get(i + 1).copied().unwrap_or(0.0);
                Complex64::new((w[i] - next).powf(1.0 / p.p()), 0.0)
            })
            .collect();
        Ok(Self { start: 1, c, p })
    }

    /// `w_j = j^{-α}` for `j ≤ K`, so that `Σ_{j≤n} w_j` outgrows `n^{p/2}`
    /// when `α < 1 - p/2`.
    pub fn power_law_tail(alpha: f64, k_max: usize, p: Exponent) -> Result<Self> {
        let w: Vec<f64> = (1..=k_max).map(|j| (j as f64).powf(-alpha)).collect();
        Self::from_tail_weights(&w, p)
    }

    /// `c_k ∝ (k+1)^{-1/2}`, `k = 0..=K`, normalized in `ℓ^p`; the square sum
    /// diverges as `K` grows.
    pub fn harmonic_square(k_max: usize, p: Exponent) -> Result<Self> {
        let c = (0..=k_max).map(|k| Complex64::new(((k + 1) as f64).powf(-0.5), 0.0)).collect();
        Self::normalized(0, c, p)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.c
    }

    /// Last index carrying a coefficient.
    pub fn last(&self) -> i64 {
        self.start + self.c.len() as i64 - 1
    }

    pub fn c(&self, k: i64) -> Complex64 {
        if k < self.start {
            return Complex64::new(0.0, 0.0);
        }
        self.c.get((k - self.start) as usize).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// `Σ |c_k|^p`.
    pub fn power_sum(&self) -> f64 {
        self.c.iter().map(|v| v.norm().powf(self.p.p())).sum()
    }

    /// `w_j = Σ_{k≥j} |c_k|^p`.
    pub fn w(&self, j: i64) -> f64 {
        (j.max(self.start)..=self.last()).map(|k| self.c(k).norm().powf(self.p.p())).sum()
    }
}

fn require_cover(grid: &Grid, lo: f64, hi: f64) -> Result<()> {
    if grid.origin() > lo || grid.end() < hi {
        return Err(Error::SupportOutOfRange { lo, hi, start: grid.origin(), end: grid.end() });
    }
    Ok(())
}

/// `g = Σ_{k=1}^{K} c_k 2^{k/p} 1_{[k, k+2^-k]}` on `grid` (step `≤ 2^-K`).
pub fn thm42_window(c: &WeightSequence, p: Exponent, k_max: u32, grid: &Grid) -> Result<SampledFunction> {
    if grid.step_log2() < k_max {
        return Err(Error::GridTooCoarse { need: k_max, have: grid.step_log2() });
    }
    if k_max >= 1 {
        require_cover(grid, 1.0, k_max as f64 + 0.5f64.powi(k_max as i32))?;
    }
    Ok(SampledFunction::from_fn(*grid, |x| {
        let k = x.floor();
        if k < 1.0 || k > k_max as f64 || x - k >= 0.5f64.powi(k as i32) {
            return Complex64::new(0.0, 0.0);
        }
        c.c(k as i64) * 2f64.powf(k / p.p())
    }))
}

/// `{(2^-j, 2^j) : j = 1..J}`.
pub fn thm42_lattice(j_max: u32) -> Vec<TimeFreqPoint> {
    (1..=j_max as i32).map(|j| TimeFreqPoint::new(0.5f64.powi(j), 2f64.powi(j))).collect()
}

/// `(Σ |a_j|^p w_j)^{1/p} + (Σ |a_j|²)^{1/2}` with `a = (a_1, a_2, …)`.
pub fn thm42_predicted_norm(a: &[Complex64], c: &WeightSequence, p: Exponent) -> f64 {
    let first: f64 = a
        .iter()
        .enumerate()
        .map(|(i, v)| v.norm().powf(p.p()) * c.w(i as i64 + 1))
        .sum();
    let second: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    first.powf(1.0 / p.p()) + second.sqrt()
}

/// `(Σ_{j≤n} w_j) / n^{p/2}` for `n = 1..=n_max`.
pub fn thm42_growth_ratios(w: impl Fn(usize) -> f64, p: Exponent, n_max: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=n_max)
        .map(|n| {
            acc += w(n);
            acc / (n as f64).powf(p.p() / 2.0)
        })
        .collect()
}

/// Which of the three interval families of the dilation example a piece
/// belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalType {
    /// `[k+2^-l, k+2^-l+2^-k]`, `1 ≤ l < k`: `Φ = c_k 2^{k/p} a_l e_{2^l}`.
    Single,
    /// `[k+2^-k+2^-l-1, k+2^-k+2^-l]`, `l ≥ k`: `Φ = c_k 2^{k/p} Σ_{j=k}^{l} a_j e_{2^j}`.
    Head,
    /// `[k+2^-l-1, k+2^-l]`, `l ≥ k`: `Φ = c_k 2^{k/p} Σ_{j>l} a_j e_{2^j}`.
    Tail,
}

/// A piece of `[k, k+1]`. `l = None` marks the union over all `l ≥ L`
/// with `L = max(k, J)`, on which the finite sums no longer change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub kind: IntervalType,
    pub k: u32,
    pub l: Option<u32>,
    pub lo: f64,
    pub hi: f64,
}

/// The pieces of `[k, k+1]` for coefficients supported on `j ≤ J`.
pub fn thm42_pieces(k: u32, j_max: u32) -> Vec<Piece> {
    let kf = k as f64;
    let d = |e: u32| 0.5f64.powi(e as i32);
    let big = k.max(j_max);
    let mut out = Vec::new();
    for l in 1..k {
        out.push(Piece { kind: IntervalType::Single, k, l: Some(l), lo: kf + d(l), hi: kf + d(l) + d(k) });
    }
    for l in k..big {
        out.push(Piece { kind: IntervalType::Head, k, l: Some(l), lo: kf + d(k) + d(l + 1), hi: kf + d(k) + d(l) });
        out.push(Piece { kind: IntervalType::Tail, k, l: Some(l), lo: kf + d(l + 1), hi: kf + d(l) });
    }
    out.push(Piece { kind: IntervalType::Head, k, l: None, lo: kf + d(k), hi: kf + d(k) + d(big) });
    out.push(Piece { kind: IntervalType::Tail, k, l: None, lo: kf, hi: kf + d(big) });
    out.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    out
}

/// Exact check that the pieces, sorted by left end, are non-empty, have
/// disjoint interiors and lie in `[k, k+1]`.
pub fn pieces_disjoint(pieces: &[Piece], k: u32) -> bool {
    let mut at = k as f64;
    for piece in pieces {
        if piece.lo < at || !(piece.hi > piece.lo) {
            return false;
        }
        at = piece.hi;
    }
    at <= k as f64 + 1.0
}

/// The value of `Φ_a` on a piece, from the closed-form description.
fn piece_value(piece: &Piece, a: &[Complex64], c: &WeightSequence, p: Exponent, x: f64) -> Complex64 {
    let k = piece.k as i64;
    let amp = c.c(k) * 2f64.powf(k as f64 / p.p());
    let term = |j: usize| a.get(j - 1).map_or(Complex64::new(0.0, 0.0), |&aj| aj * unit_phase(2f64.powi(j as i32), x));
    let n = a.len();
    let sum: Complex64 = match (piece.kind, piece.l) {
        (IntervalType::Single, Some(l)) => term(l as usize),
        (IntervalType::Head, Some(l)) => (k as usize..=l as usize).map(term).sum(),
        (IntervalType::Head, None) => (k as usize..=n.max(k as usize)).map(term).sum(),
        (IntervalType::Tail, Some(l)) => (l as usize + 1..=n.max(l as usize)).map(term).sum(),
        _ => Complex64::new(0.0, 0.0),
    };
    amp * sum
}

/// `Φ_a` assembled piece by piece from the closed form, on `grid`.
pub fn thm42_piecewise(a: &[Complex64], c: &WeightSequence, p: Exponent, k_max: u32, grid: &Grid) -> SampledFunction {
    let j_max = a.len() as u32;
    let pieces: Vec<Vec<Piece>> = (1..=k_max).map(|k| thm42_pieces(k, j_max)).collect();
    SampledFunction::from_fn(*grid, |x| {
        let k = x.floor();
        if k < 1.0 || k > k_max as f64 {
            return Complex64::new(0.0, 0.0);
        }
        pieces[k as usize - 1]
            .iter()
            .find(|pc| pc.lo <= x && x < pc.hi)
            .map_or(Complex64::new(0.0, 0.0), |pc| piece_value(pc, a, c, p, x))
    })
}

/// One random coefficient vector and its norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub computed: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Outcome of [`thm42_verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm42Report {
    pub p: f64,
    pub k_max: u32,
    pub j_max: u32,
    pub step_log2: u32,
    pub window_norm_pow: f64,
    pub rows: Vec<TrialRow>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Ratio for `a = e_1`.
    pub e1_ratio: f64,
    /// Extremes of `‖Φ_a|_{[k,k+1]}‖_p^p / (|c_k|^p {Σ_{j≤k}|a_j|^p + (Σ_{j>k}|a_j|²)^{p/2}})`.
    pub interval_ratio_min: f64,
    pub interval_ratio_max: f64,
    /// Every piece family is pairwise disjoint inside its unit interval.
    pub pieces_disjoint: bool,
    /// Largest `|Σ_pieces ‖Φ_a‖^p - ‖Φ_a|_{[k,k+1]}‖^p|`, relative to `‖Φ_a‖_p^p`.
    pub decomposition_error: f64,
    /// Largest deviation of the closed form from the synthesized `Φ_a`,
    /// relative to `‖Φ_a‖_∞`.
    pub closed_form_error: f64,
    /// Largest relative deviation of the type (1) contribution from
    /// `|c_k|^p Σ_{j<k}|a_j|^p`.
    pub single_type_error: f64,
}

fn random_coefficients<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn coefficient_map(points: &[TimeFreqPoint], a: &[Complex64]) -> CoefficientMap {
    points.iter().copied().zip(a.iter().copied()).collect()
}

fn extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// The dilation-example system: window of `c` on `[1, K+1)` and Λ for `J`.
pub fn thm42_system(c: &WeightSequence, p: Exponent, j_max: u32, step_log2: u32) -> Result<GaborSystem> {
    let k_max = c.last().max(0) as u32;
    let grid = Grid::new(1.0, step_log2, (k_max.max(1) as usize) << step_log2)?;
    let window = thm42_window(c, p, k_max, &grid)?;
    GaborSystem::new(window, thm42_lattice(j_max), grid)
}

pub fn thm42_verify(c: &WeightSequence, p: Exponent, j_max: u32, trials: usize, seed: u64) -> Result<Thm42Report> {
    thm42_verify_on(c, p, j_max, trials, seed, THM42_STEP_LOG2)
}

/// Random coefficient vectors `a ∈ C^J` against the predicted norm, with
/// the piece decomposition checked on every trial.
pub fn thm42_verify_on(
    c: &WeightSequence,
    p: Exponent,
    j_max: u32,
    trials: usize,
    seed: u64,
    step_log2: u32,
) -> Result<Thm42Report> {
    if c.start() != 1 {
        return Err(Error::InvalidArgument("dilation window coefficients start at k = 1".into()));
    }
    let system = thm42_system(c, p, j_max, step_log2)?;
    let grid = *system.grid();
    let k_max = c.last() as u32;
    let pp = p.p();
    let mut e1 = vec![Complex64::new(0.0, 0.0); j_max as usize];
    let e1_ratio = if j_max > 0 {
        e1[0] = Complex64::new(1.0, 0.0);
        system.synthesize(&coefficient_map(system.points(), &e1))?.lp_norm(p) / thm42_predicted_norm(&e1, c, p)
    } else {
        f64::NAN
    };
    let disjoint = (1..=k_max).all(|k| pieces_disjoint(&thm42_pieces(k, j_max), k));

    struct Out {
        row: TrialRow,
        iv: (f64, f64),
        decomposition: f64,
        closed_form: f64,
        single: f64,
    }
    let outs: Result<Vec<Out>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, stream::COEFFICIENTS, trial);
            let a = random_coefficients(&mut rng, j_max as usize);
            let phi = system.synthesize(&coefficient_map(system.points(), &a))?;
            let total = phi.lp_norm_pow(p);
            let computed = total.powf(1.0 / pp);
            let predicted = thm42_predicted_norm(&a, c, p);
            let mut iv = (f64::INFINITY, f64::NEG_INFINITY);
            let mut decomposition: f64 = 0.0;
            let mut single: f64 = 0.0;
            for k in 1..=k_max {
                let kf = k as f64;
                let whole = phi.restricted_norm_pow(kf, kf + 1.0, p)?;
                let pieces = thm42_pieces(k, j_max);
                let mut sum = 0.0;
                let mut single_sum = 0.0;
                for pc in &pieces {
                    let v = phi.restricted_norm_pow(pc.lo, pc.hi, p)?;
                    sum += v;
                    if pc.kind == IntervalType::Single {
                        single_sum += v;
                    }
                }
                decomposition = decomposition.max((sum - whole).abs() / total);
                let ck = c.c(k as i64).norm().powf(pp);
                let head: f64 = a.iter().take(k as usize - 1).map(|v| v.norm().powf(pp)).sum();
                let expected_single = ck * head;
                if expected_single > 0.0 {
                    single = single.max((single_sum - expected_single).abs() / expected_single);
                } else {
                    single = single.max(single_sum / total);
                }
                if ck > 0.0 {
                    let upto: f64 = a.iter().take(k as usize).map(|v| v.norm().powf(pp)).sum();
                    let beyond: f64 = a.iter().skip(k as usize).map(|v| v.norm_sqr()).sum();
                    let r = whole / (ck * (upto + beyond.powf(pp / 2.0)));
                    iv = (iv.0.min(r), iv.1.max(r));
                }
            }
            let closed = thm42_piecewise(&a, c, p, k_max, &grid);
            let closed_form = phi.max_abs_diff(&closed)? / phi.sup_norm();
            Ok(Out {
                row: TrialRow {
                    trial,
                    seed: derive_seed(seed, stream::COEFFICIENTS, trial),
                    computed,
                    predicted,
                    ratio: computed / predicted,
                },
                iv,
                decomposition,
                closed_form,
                single,
            })
        })
        .collect();
    let outs = outs?;
    let (ratio_min, ratio_max) = extremes(outs.iter().map(|o| o.row.ratio));
    let interval_ratio_min = outs.iter().map(|o| o.iv.0).fold(f64::INFINITY, f64::min);
    let interval_ratio_max = outs.iter().map(|o| o.iv.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(Thm42Report {
        p: pp,
        k_max,
        j_max,
        step_log2,
        window_norm_pow: system.window().lp_norm_pow(p),
        ratio_min,
        ratio_max,
        e1_ratio,
        interval_ratio_min,
        interval_ratio_max,
        pieces_disjoint: disjoint,
        decomposition_error: outs.iter().map(|o| o.decomposition).fold(0.0, f64::max),
        closed_form_error: outs.iter().map(|o| o.closed_form).fold(0.0, f64::max),
        single_type_error: outs.iter().map(|o| o.single).fold(0.0, f64::max),
        rows: outs.into_iter().map(|o| o.row).collect(),
    })
}

/// `g = Σ_{k=0}^{K} c_k e_{2^k} 1_{[k, k+1]}` on `grid`.
pub fn thm52_window(c: &WeightSequence, p: Exponent, k_max: u32, grid: &Grid) -> Result<SampledFunction> {
    let _ = p;
    let top = 2f64.powi(k_max as i32);
    if top >= grid.nyquist() {
        return Err(Error::AliasedFrequency { frequency: top, limit: grid.nyquist() });
    }
    require_cover(grid, 0.0, k_max as f64 + 1.0)?;
    Ok(SampledFunction::from_fn(*grid, |x| {
        let k = x.floor();
        if k < 0.0 || k > k_max as f64 {
            return Complex64::new(0.0, 0.0);
        }
        c.c(k as i64) * unit_phase(2f64.powi(k as i32), x)
    }))
}

/// `Σ_{l≥1} (Σ_{k=0}^{l-1} |a_{l-k}|² |c_k|²)^{p/2}` with `a = (a_1, a_2, …)`.
pub fn thm52_predicted(a: &[Complex64], c: &WeightSequence, p: Exponent) -> f64 {
    let n = a.len() as i64;
    let last = c.last();
    (1..=n + last + 1)
        .map(|l| {
            let inner: f64 = (0..l)
                .filter(|&k| l - k <= n)
                .map(|k| a[(l - k - 1) as usize].norm_sqr() * c.c(k).norm_sqr())
                .sum();
            inner.powf(p.p() / 2.0)
        })
        .sum()
}

/// `G(n)/n` with `G(n) = Σ_{l≤n} (Σ_{k<l} |c_k|²)^{p/2}`, `n = 1..=n_max`.
pub fn thm52_growth_ratios(c: &WeightSequence, p: Exponent, n_max: usize) -> Vec<f64> {
    let mut acc = 0.0;
    let mut squares = 0.0;
    (1..=n_max as i64)
        .map(|l| {
            squares += c.c(l - 1).norm_sqr();
            acc += squares.powf(p.p() / 2.0);
            acc / l as f64
        })
        .collect()
}

/// First `n` with `G(n)/n > threshold`.
pub fn thm52_growth_scan(c: &WeightSequence, p: Exponent, threshold: f64, n_max: usize) -> Option<usize> {
    thm52_growth_ratios(c, p, n_max).iter().position(|&r| r > threshold).map(|i| i + 1)
}

/// Integer-translate system `{g(x - j)}_{j=1..n}` on `[1, n+K+1)`.
pub fn thm52_system(c: &WeightSequence, p: Exponent, n: usize, step_log2: u32) -> Result<GaborSystem> {
    if c.start() != 0 {
        return Err(Error::InvalidArgument("translates window coefficients start at k = 0".into()));
    }
    let k_max = c.last() as u32;
    let window_grid = Grid::new(0.0, step_log2, (k_max as usize + 1) << step_log2)?;
    let window = thm52_window(c, p, k_max, &window_grid)?;
    let grid = Grid::new(1.0, step_log2, (n + k_max as usize + 1) << step_log2)?;
    let points = (1..=n).map(|j| TimeFreqPoint::new(j as f64, 0.0)).collect();
    GaborSystem::new(window, points, grid)
}

/// Split `g = φ + ψ` with `φ` the first `K_0+1` summands and the translates
/// `t_j = jM`, `M = K_0 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub n: usize,
    pub k0: u32,
    /// `‖ψ‖_p`.
    pub eps: f64,
    pub m: u32,
    /// `‖Σ_{j≤n} g(x - jM)‖_p`.
    pub norm: f64,
    /// `2 n^{1/p}`.
    pub bound: f64,
}

/// Picks the smallest `K_0` with `n^{1/p} + εn < 2n^{1/p}` and evaluates the
/// translate sum at separation `M = K_0 + 1`.
pub fn thm52_separation(c: &WeightSequence, p: Exponent, n: usize, step_log2: u32) -> Result<Separation> {
    let k_max = c.last() as u32;
    let pp = p.p();
    let nf = n as f64;
    let root = nf.powf(1.0 / pp);
    let (k0, eps) = (0..=k_max)
        .map(|k0| {
            let tail: f64 = (k0 as i64 + 1..=k_max as i64).map(|k| c.c(k).norm().powf(pp)).sum();
            (k0, tail.powf(1.0 / pp))
        })
        .find(|&(_, eps)| root + eps * nf < 2.0 * root)
        .expect("the full window has an empty tail");
    let m = k0 + 1;
    let window_grid = Grid::new(0.0, step_log2, (k_max as usize + 1) << step_log2)?;
    let window = thm52_window(c, p, k_max, &window_grid)?;
    let span = (n - 1) * m as usize + k_max as usize + 1;
    let grid = Grid::new(m as f64, step_log2, span << step_log2)?;
    let points = (1..=n).map(|j| TimeFreqPoint::new((j as u32 * m) as f64, 0.0)).collect();
    let system = GaborSystem::new(window, points, grid)?;
    let ones = vec![Complex64::new(1.0, 0.0); n];
    let norm = system.synthesize(&coefficient_map(system.points(), &ones))?.lp_norm(p);
    Ok(Separation { n, k0, eps, m, norm, bound: 2.0 * root })
}

/// Outcome of [`thm52_verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm52Report {
    pub p: f64,
    pub k_max: u32,
    pub n_max: usize,
    pub step_log2: u32,
    pub window_norm_pow: f64,
    /// Ratios of `‖Φ_a‖_p^p` to the predicted sum.
    pub rows: Vec<TrialRow>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub e1_ratio: f64,
    /// `G(n)/n` for `n = 1..=growth_len`.
    pub growth: Vec<f64>,
    pub n_star: Option<usize>,
    pub separation: Separation,
}

pub fn thm52_verify(c: &WeightSequence, p: Exponent, n_max: usize, trials: usize, seed: u64) -> Result<Thm52Report> {
    thm52_verify_on(c, p, n_max, trials, seed, THM52_STEP_LOG2)
}

/// Random `a ∈ C^{n_max}` against the predicted sum, plus the growth scan
/// and the separated translate sum at `n = 8`.
pub fn thm52_verify_on(
    c: &WeightSequence,
    p: Exponent,
    n_max: usize,
    trials: usize,
    seed: u64,
    step_log2: u32,
) -> Result<Thm52Report> {
    let system = thm52_system(c, p, n_max, step_log2)?;
    let mut e1 = vec![Complex64::new(0.0, 0.0); n_max];
    e1[0] = Complex64::new(1.0, 0.0);
    let e1_ratio =
        system.synthesize(&coefficient_map(system.points(), &e1))?.lp_norm_pow(p) / thm52_predicted(&e1, c, p);
    let rows: Result<Vec<TrialRow>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, stream::COEFFICIENTS, trial);
            let a = random_coefficients(&mut rng, n_max);
            let computed = system.synthesize(&coefficient_map(system.points(), &a))?.lp_norm_pow(p);
            let predicted = thm52_predicted(&a, c, p);
            Ok(TrialRow {
                trial,
                seed: derive_seed(seed, stream::COEFFICIENTS, trial),
                computed,
                predicted,
                ratio: computed / predicted,
            })
        })
        .collect();
    let rows = rows?;
    let (ratio_min, ratio_max) = extremes(rows.iter().map(|r| r.ratio));
    let growth = thm52_growth_ratios(c, p, 64);
    let n_star = growth.iter().position(|&r| r > 2.0).map(|i| i + 1);
    Ok(Thm52Report {
        p: p.p(),
        k_max: c.last() as u32,
        n_max,
        step_log2,
        window_norm_pow: system.window().lp_norm_pow(p),
        rows,
        ratio_min,
        ratio_max,
        e1_ratio,
        growth,
        n_star,
        separation: thm52_separation(c, p, 8, step_log2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn first_summand_only() {
        let c = WeightSequence::new(1, vec![Complex64::new(1.0, 0.0)], p(1.5));
        let grid = Grid::new(1.0, 3, 16).unwrap();
        let g = thm42_window(&c, p(1.5), 1, &grid).unwrap();
        assert!((g.lp_norm(p(1.5)) - 1.0).abs() < 1e-15);
        assert_eq!(g.support(), Some((1.0, 1.5)));
        assert!((g.values()[0].re - 2f64.powf(1.0 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn lattice_points() {
        assert_eq!(thm42_lattice(1), vec![TimeFreqPoint::new(0.5, 2.0)]);
        assert!(thm42_lattice(0).is_empty());
    }

    #[test]
    fn predicted_norm_trivial_cases() {
        let c = WeightSequence::power_law_tail(0.1, 8, p(1.5)).unwrap();
        assert_eq!(thm42_predicted_norm(&[Complex64::new(0.0, 0.0); 3], &c, p(1.5)), 0.0);
        let e1 = [Complex64::new(1.0, 0.0)];
        assert!((thm42_predicted_norm(&e1, &c, p(1.5)) - 2.0).abs() < 1e-14);
        assert!((c.power_sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pieces_are_disjoint() {
        for k in 1..=8 {
            for j in 0..=10 {
                let pieces = thm42_pieces(k, j);
                assert!(pieces_disjoint(&pieces, k), "k={k} J={j}");
                assert_eq!(pieces[0].lo, k as f64);
                let end = pieces.last().unwrap().hi;
                let expected = (k as f64 + 0.5f64.powi(k as i32 - 1)).max(k as f64 + 0.5 + 0.5f64.powi(k as i32));
                assert_eq!(end, expected);
            }
        }
    }

    #[test]
    fn coarse_or_aliasing_grids_rejected() {
        let c = WeightSequence::power_law_tail(0.1, 8, p(1.5)).unwrap();
        let grid = Grid::new(1.0, 6, 8 << 6).unwrap();
        assert!(matches!(thm42_window(&c, p(1.5), 8, &grid), Err(Error::GridTooCoarse { .. })));
        let c = WeightSequence::harmonic_square(6, p(4.0)).unwrap();
        let grid = Grid::new(0.0, 7, 7 << 7).unwrap();
        assert!(matches!(thm52_window(&c, p(4.0), 6, &grid), Err(Error::AliasedFrequency { .. })));
    }

    #[test]
    fn translates_window_modulus() {
        let c = WeightSequence::harmonic_square(6, p(4.0)).unwrap();
        let grid = Grid::new(0.0, 9, 7 << 9).unwrap();
        let g = thm52_window(&c, p(4.0), 6, &grid).unwrap();
        for (i, v) in g.values().iter().enumerate() {
            let k = (grid.midpoint(i)).floor() as i64;
            assert!((v.norm() - c.c(k).norm()).abs() < 1e-15);
        }
        assert!((g.lp_norm_pow(p(4.0)) - 1.0).abs() < 1e-13);
    }
}
