//! Unconditional approximate Schauder frame of Gabor type for `L^p`, `p > 2`.
//!
//! The construction takes Haar atoms `h_1, …, h_K`, block sizes `N_k` with
//! `Σ N_k^{1-p/2} < (2K_p)^{-p/2}`, and translates `(t_i, s_i)` drawn from
//! a point set Λ, block `J_k` of the indices being paired with `h_k`. The
//! window is
//!
//! ```text
//! g = Σ_k Σ_{i∈J_k} N_k^{-1/2} τ_{-t_i}(e_{-s_i} h_k)
//! ```
//!
//! and the functional attached to `(t_j, s_j)`, `j ∈ J_l`, is
//! `N_l^{-1/2} h_l^*`. Applying `S f = Σ_j g*_j(f) e_{s_j} τ_{t_j} g`
//! splits into the main term (pairs `i = j`, which sum to `f` on the span V
//! of the atoms) and an error term made of pieces supported on the sets
//! `E(i,k,j,l) = supp(h_k) + t_j - t_i`. When those sets are pairwise
//! disjoint, `‖S f - f‖_p ≤ q ‖f‖_p` with `q = K_p (Σ N_k^{1-p/2})^{2/p}`.
//!
//! Only finitely many blocks are built. The Haar complement of V, on which
//! the blocks beyond the plan act, is passed through unchanged; this is the
//! limit of those blocks as their sizes grow. With it, `S = I + R P_V`
//! where `R` maps V into functions vanishing on the atom supports, so `S`
//! is invertible and the Neumann iteration converges.

use std::collections::HashMap;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::TimeFreqPoint;
use crate::grid::{Exponent, Grid, SampledFunction, SparseFunction};
use crate::haar::{haar_function_sparse, haar_functional_sparse, HaarIndex};

/// Upper limit of the `N_1` scan in [`plan_blocks`].
pub const MAX_FIRST_BLOCK: usize = 1_000_000;

/// Relative margin applied to the strict block condition so that exact
/// equality never passes through rounding.
const STRICT_MARGIN: f64 = 1e-12;

/// Iteration cap for plans whose contraction constant is not below 1.
const UNCERTIFIED_MAX_ITER: usize = 64;

/// Block sizes `N_1..N_K` and the Haar constant they were planned against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    p: Exponent,
    kp: f64,
    sizes: Vec<usize>,
}

/// `Σ N_k^{1-p/2}`.
pub fn block_sum(p: Exponent, sizes: &[usize]) -> f64 {
    let e = 1.0 - p.p() / 2.0;
    sizes.iter().map(|&n| (n as f64).powf(e)).sum()
}

/// `(2K_p)^{-p/2}`.
pub fn block_threshold(p: Exponent, kp: f64) -> f64 {
    (2.0 * kp).powf(-p.p() / 2.0)
}

/// The strict condition `Σ N_k^{1-p/2} < (2K_p)^{-p/2}`.
pub fn block_condition_holds(p: Exponent, kp: f64, sizes: &[usize]) -> bool {
    block_sum(p, sizes) < block_threshold(p, kp) * (1.0 - STRICT_MARGIN)
}

/// Haar unconditionality constant used by the construction, `p - 1`.
pub fn haar_constant(p: Exponent) -> f64 {
    p.p() - 1.0
}

impl BlockPlan {
    /// A plan with explicit sizes; the block condition must hold.
    pub fn from_sizes(p: Exponent, sizes: Vec<usize>) -> Result<Self> {
        let plan = Self::from_sizes_unchecked(p, sizes)?;
        if !plan.is_certified() {
            return Err(Error::InfeasiblePlan(format!(
                "Σ N_k^(1-p/2) = {} is not below (2K_p)^(-p/2) = {}",
                plan.block_sum(),
                plan.threshold()
            )));
        }
        Ok(plan)
    }

    /// A plan that skips the block condition, for degenerate configurations
    /// such as a single block of size one.
    pub fn from_sizes_unchecked(p: Exponent, sizes: Vec<usize>) -> Result<Self> {
        if p.p() <= 2.0 {
            return Err(Error::InfeasiblePlan(format!("p must exceed 2, got {}", p.p())));
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InfeasiblePlan("block sizes must be positive and non-empty".into()));
        }
        Ok(Self { p, kp: haar_constant(p), sizes })
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn kp(&self) -> f64 {
        self.kp
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn block_sum(&self) -> f64 {
        block_sum(self.p, &self.sizes)
    }

    pub fn threshold(&self) -> f64 {
        block_threshold(self.p, self.kp)
    }

    pub fn is_certified(&self) -> bool {
        block_condition_holds(self.p, self.kp, &self.sizes)
    }

    /// Consecutive index runs `J_1, J_2, …` (0-based).
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }

    /// Block assignment of every index `0..total`.
    pub fn assignment(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect()
    }
}

/// Plans `num_blocks` blocks with `N_k = ceil(N_1·growth^{k-1})` and the
/// smallest `N_1` satisfying the strict block condition.
pub fn plan_blocks(p: Exponent, num_blocks: usize, growth: f64) -> Result<BlockPlan> {
    if p.p() <= 2.0 {
        return Err(Error::InfeasiblePlan(format!("p must exceed 2, got {}", p.p())));
    }
    if num_blocks == 0 {
        return Err(Error::InfeasiblePlan("at least one block is required".into()));
    }
    if !(growth >= 2.0) || !growth.is_finite() {
        return Err(Error::InvalidArgument(format!("growth must be at least 2, got {growth}")));
    }
    let kp = haar_constant(p);
    let sizes_for = |n1: usize| -> Vec<usize> {
        (0..num_blocks)
            .map(|k| (n1 as f64 * growth.powi(k as i32)).ceil() as usize)
            .collect()
    };
    let holds = |n1: usize| block_condition_holds(p, kp, &sizes_for(n1));
    if !holds(MAX_FIRST_BLOCK) {
        return Err(Error::InfeasiblePlan(format!(
            "no N_1 <= {MAX_FIRST_BLOCK} satisfies the block condition"
        )));
    }
    // the block sum is non-increasing in N_1
    let (mut lo, mut hi) = (0usize, MAX_FIRST_BLOCK);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BlockPlan::from_sizes(p, sizes_for(hi))
}

/// `q = K_p (Σ N_k^{1-p/2})^{2/p}`.
pub fn error_bound(plan: &BlockPlan) -> f64 {
    plan.kp * plan.block_sum().powf(2.0 / plan.p.p())
}

/// How translates are picked from Λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub enum TranslateRule {
    /// Greedy in order of `|t|`: accept a candidate when every new set
    /// `E(i,k,j,l)` avoids all earlier ones.
    #[default]
    DistinctDifferences,
    /// Accept the next candidate with `|t| ≥ factor·|t_prev| + offset`,
    /// doubling the factor while the certificate fails.
    Geometric { factor: f64, offset: f64 },
}


/// Chosen points `(t_i, s_i)` with their block assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateSelection {
    points: Vec<TimeFreqPoint>,
    blocks: Vec<usize>,
}

impl TranslateSelection {
    pub fn new(points: Vec<TimeFreqPoint>, plan: &BlockPlan) -> Result<Self> {
        if points.len() != plan.total() {
            return Err(Error::InvalidArgument(format!(
                "{} points for a plan of {} translates",
                points.len(),
                plan.total()
            )));
        }
        for w in points.windows(2) {
            if !(w[1].t.abs() > w[0].t.abs()) {
                return Err(Error::InvalidArgument("|t_i| must be strictly increasing".into()));
            }
        }
        Ok(Self { points, blocks: plan.assignment() })
    }

    pub fn points(&self) -> &[TimeFreqPoint] {
        &self.points
    }

    /// Block index `k(i)` of every translate.
    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Disjoint half-open intervals of length at most `width`, bucketed by
/// `floor(lo / width)`.
struct IntervalSet {
    width: f64,
    buckets: HashMap<i64, Vec<(f64, f64)>>,
}

impl IntervalSet {
    fn new(width: f64) -> Self {
        Self { width, buckets: HashMap::new() }
    }

    fn bucket(&self, x: f64) -> i64 {
        (x / self.width).floor() as i64
    }

    fn overlaps(&self, lo: f64, hi: f64) -> bool {
        (self.bucket(lo) - 1..=self.bucket(hi)).any(|b| {
            self.buckets
                .get(&b)
                .is_some_and(|v| v.iter().any(|&(a, z)| a < hi && lo < z))
        })
    }

    fn insert(&mut self, lo: f64, hi: f64) {
        let b = self.bucket(lo);
        self.buckets.entry(b).or_default().push((lo, hi));
    }
}

/// Result of the exact disjointness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessCertificate {
    /// Number of sets `E(i,k,j,l)` with `i ≠ j`.
    pub error_sets: usize,
    /// Smallest gap between consecutive sets, including the atom region.
    pub min_gap: f64,
    /// Smallest gap between consecutive window summands.
    pub window_min_gap: f64,
}

fn hull(haar: &[HaarIndex]) -> (f64, f64) {
    haar.iter().map(|h| h.support()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
        (a.min(lo), b.max(hi))
    })
}

fn check_haar(plan: &BlockPlan, haar: &[HaarIndex]) -> Result<()> {
    if haar.len() != plan.num_blocks() {
        return Err(Error::InvalidArgument(format!(
            "{} Haar atoms for {} blocks",
            haar.len(),
            plan.num_blocks()
        )));
    }
    Ok(())
}

/// Picks `plan.total()` translates from `lambda` according to `rule` and
/// certifies the result.
pub fn select_translates(
    lambda: &[TimeFreqPoint],
    plan: &BlockPlan,
    haar: &[HaarIndex],
    rule: TranslateRule,
) -> Result<TranslateSelection> {
    check_haar(plan, haar)?;
    let mut candidates: Vec<TimeFreqPoint> = lambda.to_vec();
    candidates.sort_by(|a, b| {
        a.t.abs()
            .total_cmp(&b.t.abs())
            .then((a.t < 0.0).cmp(&(b.t < 0.0)))
            .then(a.s.total_cmp(&b.s))
    });
    let needed = plan.total();
    let assignment = plan.assignment();
    match rule {
        TranslateRule::DistinctDifferences => {
            let points = greedy_distinct(&candidates, &assignment, haar, needed)?;
            let selection = TranslateSelection { points, blocks: assignment };
            verify_disjointness(&selection, haar)?;
            Ok(selection)
        }
        TranslateRule::Geometric { factor, offset } => {
            if !(factor >= 1.0) || !(offset >= 0.0) {
                return Err(Error::InvalidArgument("geometric rule needs factor >= 1, offset >= 0".into()));
            }
            let mut factor = factor;
            let mut last_err = None;
            for _ in 0..8 {
                let mut points: Vec<TimeFreqPoint> = Vec::with_capacity(needed);
                for c in &candidates {
                    if points.len() == needed {
                        break;
                    }
                    let prev = points.last().map_or(0.0, |p| p.t.abs());
                    if c.t.abs() > prev && c.t.abs() >= factor * prev + offset {
                        points.push(*c);
                    }
                }
                if points.len() < needed {
                    return Err(Error::InsufficientSpread { needed, found: points.len() });
                }
                let selection = TranslateSelection { points, blocks: assignment.clone() };
                match verify_disjointness(&selection, haar) {
                    Ok(_) => return Ok(selection),
                    Err(e) => last_err = Some(e),
                }
                factor *= 2.0;
            }
            Err(last_err.expect("at least one attempt"))
        }
    }
}

fn greedy_distinct(
    candidates: &[TimeFreqPoint],
    assignment: &[usize],
    haar: &[HaarIndex],
    needed: usize,
) -> Result<Vec<TimeFreqPoint>> {
    let supports: Vec<(f64, f64)> = haar.iter().map(|h| h.support()).collect();
    let (hlo, hhi) = hull(haar);
    let mut error_sets = IntervalSet::new(hhi - hlo);
    error_sets.insert(hlo, hhi);
    let mut summands = IntervalSet::new(hhi - hlo);
    let mut chosen: Vec<TimeFreqPoint> = Vec::with_capacity(needed);
    let mut fresh: Vec<(f64, f64)> = Vec::new();
    for cand in candidates {
        if chosen.len() == needed {
            break;
        }
        let t = cand.t;
        if let Some(prev) = chosen.last() {
            if !(t.abs() > prev.t.abs()) {
                continue;
            }
        }
        let n = chosen.len();
        let (klo, khi) = supports[assignment[n]];
        if summands.overlaps(klo - t, khi - t) {
            continue;
        }
        // newest translates first: their differences land where sets are dense
        let clash = chosen.iter().enumerate().rev().any(|(m, prev)| {
            let (mlo, mhi) = supports[assignment[m]];
            error_sets.overlaps(klo + prev.t - t, khi + prev.t - t)
                || error_sets.overlaps(mlo + t - prev.t, mhi + t - prev.t)
        });
        if clash {
            continue;
        }
        fresh.clear();
        for (m, prev) in chosen.iter().enumerate() {
            let (mlo, mhi) = supports[assignment[m]];
            fresh.push((klo + prev.t - t, khi + prev.t - t));
            fresh.push((mlo + t - prev.t, mhi + t - prev.t));
        }
        fresh.sort_by(|a, b| a.0.total_cmp(&b.0));
        if fresh.windows(2).any(|w| w[1].0 < w[0].1) {
            continue;
        }
        for &(lo, hi) in &fresh {
            error_sets.insert(lo, hi);
        }
        summands.insert(klo - t, khi - t);
        chosen.push(*cand);
    }
    if chosen.len() < needed {
        return Err(Error::InsufficientSpread { needed, found: chosen.len() });
    }
    Ok(chosen)
}

fn min_gap_sorted(mut intervals: Vec<(f64, f64)>, what: &str) -> Result<f64> {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gap = f64::INFINITY;
    for w in intervals.windows(2) {
        let g = w[1].0 - w[0].1;
        if g < 0.0 {
            return Err(Error::DisjointnessViolated(format!(
                "{what} [{}, {}) and [{}, {}) overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        gap = gap.min(g);
    }
    Ok(gap)
}

/// Checks, by exact interval arithmetic, that the sets
/// `E(i,k,j,l) = supp(h_k) + t_j - t_i` (`i ≠ j`) are pairwise disjoint and
/// avoid the atom region, and that the window summands
/// `supp(h_k) - t_i` are pairwise disjoint.
pub fn verify_disjointness(selection: &TranslateSelection, haar: &[HaarIndex]) -> Result<DisjointnessCertificate> {
    let supports: Vec<(f64, f64)> = haar.iter().map(|h| h.support()).collect();
    let pts = &selection.points;
    let blocks = &selection.blocks;
    if blocks.iter().any(|&k| k >= supports.len()) {
        return Err(Error::InvalidArgument("block index without a Haar atom".into()));
    }
    let n = pts.len();
    let mut sets: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (lo, hi) = supports[blocks[i]];
            let ti = pts[i].t;
            (0..n).filter(move |&j| j != i).map(move |j| (lo + pts[j].t - ti, hi + pts[j].t - ti))
        })
        .collect();
    let error_sets = sets.len();
    sets.push(hull(haar));
    let min_gap = min_gap_sorted(sets, "error sets")?;
    let summands: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (lo, hi) = supports[blocks[i]];
            (lo - pts[i].t, hi - pts[i].t)
        })
        .collect();
    let window_min_gap = min_gap_sorted(summands, "window summands")?;
    Ok(DisjointnessCertificate { error_sets, min_gap, window_min_gap })
}

/// `g = Σ_k Σ_{i∈J_k} N_k^{-1/2} τ_{-t_i}(e_{-s_i} h_k)` on the lattice
/// `2^-step_log2·Z`.
pub fn build_window(
    plan: &BlockPlan,
    selection: &TranslateSelection,
    haar: &[HaarIndex],
    step_log2: u32,
) -> Result<SparseFunction> {
    Ok(window_summands(plan, selection, haar, step_log2)?
        .into_iter()
        .fold(SparseFunction::zero(step_log2), |mut acc, s| {
            acc.add_scaled(Complex64::new(1.0, 0.0), &s).expect("same lattice");
            acc
        }))
}

fn window_summands(
    plan: &BlockPlan,
    selection: &TranslateSelection,
    haar: &[HaarIndex],
    step_log2: u32,
) -> Result<Vec<SparseFunction>> {
    check_haar(plan, haar)?;
    let need = haar.iter().map(|h| h.required_step_log2()).max().unwrap_or(0);
    if step_log2 < need {
        return Err(Error::GridTooCoarse { need, have: step_log2 });
    }
    let atoms: Result<Vec<SparseFunction>> =
        haar.iter().map(|h| haar_function_sparse(h, plan.p, step_log2)).collect();
    let atoms = atoms?;
    selection
        .points
        .iter()
        .zip(&selection.blocks)
        .map(|(pt, &k)| {
            let c = (plan.sizes[k] as f64).powf(-0.5);
            Ok(atoms[k].modulate(-pt.s)?.translate(-pt.t)?.scale(Complex64::new(c, 0.0)))
        })
        .collect()
}

/// A built frame with its certificate and cached atoms `e_{s_j} τ_{t_j} g`.
#[derive(Debug, Clone)]
pub struct ConstructedFrame {
    plan: BlockPlan,
    selection: TranslateSelection,
    haar: Vec<HaarIndex>,
    step_log2: u32,
    window: SparseFunction,
    q: f64,
    certificate: DisjointnessCertificate,
    haar_atoms: Vec<SparseFunction>,
    atoms: Vec<SparseFunction>,
}

/// Serialized form of a [`ConstructedFrame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBundle {
    pub plan: BlockPlan,
    pub haar: Vec<HaarIndex>,
    pub step_log2: u32,
    pub points: Vec<TimeFreqPoint>,
    pub q: f64,
    pub certificate: DisjointnessCertificate,
    pub window: SparseFunction,
}

impl ConstructedFrame {
    /// Assembles the frame: certificate, window and atoms.
    pub fn new(plan: BlockPlan, selection: TranslateSelection, haar: Vec<HaarIndex>, step_log2: u32) -> Result<Self> {
        let certificate = verify_disjointness(&selection, &haar)?;
        let window = build_window(&plan, &selection, &haar, step_log2)?;
        let haar_atoms: Result<Vec<_>> = haar.iter().map(|h| haar_function_sparse(h, plan.p, step_log2)).collect();
        let atoms: Result<Vec<_>> = selection
            .points
            .par_iter()
            .map(|pt| window.time_freq_shift(pt.t, pt.s))
            .collect();
        let q = error_bound(&plan);
        Ok(Self {
            plan,
            selection,
            haar,
            step_log2,
            window,
            q,
            certificate,
            haar_atoms: haar_atoms?,
            atoms: atoms?,
        })
    }

    /// Full pipeline: Haar atoms on cell 0, translate selection, window.
    pub fn build(plan: BlockPlan, lambda: &[TimeFreqPoint], rule: TranslateRule) -> Result<Self> {
        let haar = HaarIndex::first_on_cell_zero(plan.num_blocks());
        let step_log2 = haar.iter().map(|h| h.required_step_log2()).max().unwrap_or(0);
        let selection = select_translates(lambda, &plan, &haar, rule)?;
        Self::new(plan, selection, haar, step_log2)
    }

    pub fn from_bundle(bundle: &FrameBundle) -> Result<Self> {
        let selection = TranslateSelection::new(bundle.points.clone(), &bundle.plan)?;
        let frame = Self::new(bundle.plan.clone(), selection, bundle.haar.clone(), bundle.step_log2)?;
        if frame.window != bundle.window {
            return Err(Error::InvalidArgument("stored window differs from the rebuilt one".into()));
        }
        Ok(frame)
    }

    pub fn to_bundle(&self) -> FrameBundle {
        FrameBundle {
            plan: self.plan.clone(),
            haar: self.haar.clone(),
            step_log2: self.step_log2,
            points: self.selection.points.clone(),
            q: self.q,
            certificate: self.certificate,
            window: self.window.clone(),
        }
    }

    pub fn plan(&self) -> &BlockPlan {
        &self.plan
    }

    pub fn selection(&self) -> &TranslateSelection {
        &self.selection
    }

    pub fn haar(&self) -> &[HaarIndex] {
        &self.haar
    }

    pub fn step_log2(&self) -> u32 {
        self.step_log2
    }

    pub fn window(&self) -> &SparseFunction {
        &self.window
    }

    /// The window as a dense step function on `grid`.
    pub fn window_on_grid(&self, grid: &Grid) -> Result<SampledFunction> {
        self.window.to_sampled(grid)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn certificate(&self) -> &DisjointnessCertificate {
        &self.certificate
    }

    pub fn atom(&self, j: usize) -> &SparseFunction {
        &self.atoms[j]
    }

    /// `‖g‖_p^p` as computed and as predicted by `Σ N_k^{1-p/2}`.
    pub fn window_norm_check(&self) -> (f64, f64) {
        (self.window.lp_norm_pow(self.plan.p), self.plan.block_sum())
    }

    /// Haar coefficients `h_l^*(f)`, one per block.
    pub fn haar_coefficients(&self, f: &SparseFunction) -> Result<Vec<Complex64>> {
        self.haar.iter().map(|h| haar_functional_sparse(h, f, self.plan.p)).collect()
    }

    /// `Σ_l c_l h_l`.
    pub fn span_element(&self, coeffs: &[Complex64]) -> SparseFunction {
        let mut v = SparseFunction::zero(self.step_log2);
        for (c, h) in coeffs.iter().zip(&self.haar_atoms) {
            v.add_scaled(*c, h).expect("same lattice");
        }
        v
    }

    /// `(P_V f, ‖f - P_V f‖_p)`.
    pub fn project_onto_span(&self, f: &SparseFunction) -> Result<(SparseFunction, f64)> {
        let v = self.span_element(&self.haar_coefficients(f)?);
        let residual = f.sub(&v)?.lp_norm(self.plan.p);
        Ok((v, residual))
    }

    /// Frame coefficients `g*_{t_j s_j}(f) = N_l^{-1/2} h_l^*(f)`, `j ∈ J_l`.
    pub fn frame_coefficients(&self, f: &SparseFunction) -> Result<Vec<Complex64>> {
        let c = self.haar_coefficients(f)?;
        Ok(self
            .selection
            .blocks
            .iter()
            .map(|&l| c[l] * (self.plan.sizes[l] as f64).powf(-0.5))
            .collect())
    }

    /// `Σ_j θ_j c_j e_{s_j} τ_{t_j} g`.
    pub fn synthesize(&self, coeffs: &[Complex64], signs: Option<&[f64]>) -> SparseFunction {
        let mut out = SparseFunction::zero(self.step_log2);
        for (j, (c, atom)) in coeffs.iter().zip(&self.atoms).enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let theta = signs.map_or(1.0, |s| s[j]);
            out.add_scaled(*c * theta, atom).expect("same lattice");
        }
        out
    }

    /// `S f`: the frame series on `P_V f` plus the Haar complement
    /// `f - P_V f` passed through unchanged.
    pub fn apply(&self, f: &SparseFunction) -> Result<SparseFunction> {
        if f.step_log2() != self.step_log2 {
            return Err(Error::GridMismatch);
        }
        let haar_c = self.haar_coefficients(f)?;
        let coeffs: Vec<Complex64> = self
            .selection
            .blocks
            .iter()
            .map(|&l| haar_c[l] * (self.plan.sizes[l] as f64).powf(-0.5))
            .collect();
        let mut out = self.synthesize(&coeffs, None);
        out.add_scaled(Complex64::new(1.0, 0.0), f)?;
        out.add_scaled(Complex64::new(-1.0, 0.0), &self.span_element(&haar_c))?;
        Ok(out)
    }

    /// The series for `f ∈ V` split by quadruples: `(main, error)` with
    /// `main` the pairs `i = j` and `error` the pairs `i ≠ j`.
    pub fn split_terms(&self, f: &SparseFunction) -> Result<(SparseFunction, SparseFunction)> {
        let coeffs = self.frame_coefficients(f)?;
        let summands = window_summands(&self.plan, &self.selection, &self.haar, self.step_log2)?;
        let pts = &self.selection.points;
        let parts: Result<Vec<(SparseFunction, SparseFunction)>> = (0..pts.len())
            .into_par_iter()
            .map(|j| {
                let mut main = SparseFunction::zero(self.step_log2);
                let mut error = SparseFunction::zero(self.step_log2);
                if coeffs[j] == Complex64::new(0.0, 0.0) {
                    return Ok((main, error));
                }
                for (i, summand) in summands.iter().enumerate() {
                    let piece = summand.time_freq_shift(pts[j].t, pts[j].s)?;
                    if i == j {
                        main.add_scaled(coeffs[j], &piece)?;
                    } else {
                        error.add_scaled(coeffs[j], &piece)?;
                    }
                }
                Ok((main, error))
            })
            .collect();
        let mut main = SparseFunction::zero(self.step_log2);
        let mut error = SparseFunction::zero(self.step_log2);
        for (m, e) in parts? {
            main.add_scaled(Complex64::new(1.0, 0.0), &m)?;
            error.add_scaled(Complex64::new(1.0, 0.0), &e)?;
        }
        Ok((main, error))
    }

    /// Random element `Σ_l c_l h_l` of V with `Re c_l, Im c_l ∈ [-1, 1)`.
    pub fn random_span_element<R: Rng>(&self, rng: &mut R) -> SparseFunction {
        let coeffs: Vec<Complex64> = (0..self.haar.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        self.span_element(&coeffs)
    }

    /// Certified iteration count `ceil(ln tol / ln q) + 1`.
    pub fn iteration_bound(&self, tol: f64) -> usize {
        if self.q < 1.0 && self.q > 0.0 {
            ((tol.ln() / self.q.ln()).ceil().max(0.0) as usize) + 1
        } else if self.q == 0.0 {
            1
        } else {
            UNCERTIFIED_MAX_ITER
        }
    }
}

pub fn frame_operator(frame: &ConstructedFrame, f: &SparseFunction) -> Result<SparseFunction> {
    frame.apply(f)
}

/// Outcome of [`invert_neumann`].
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub solution: SparseFunction,
    pub iterations: usize,
    /// `‖S y - f‖_p / ‖f‖_p` at exit.
    pub relative_residual: f64,
}

/// Solves `S y = f` by `y_{n+1} = f + (I - S) y_n`, `y_0 = 0`.
pub fn invert_neumann(frame: &ConstructedFrame, f: &SparseFunction, tol: f64) -> Result<NeumannSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let p = frame.plan.p;
    let norm = f.lp_norm(p);
    if norm == 0.0 {
        return Ok(NeumannSolution {
            solution: SparseFunction::zero(frame.step_log2),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let bound = frame.iteration_bound(tol);
    let mut y = SparseFunction::zero(frame.step_log2);
    let mut sy = SparseFunction::zero(frame.step_log2);
    let mut residual = f64::INFINITY;
    for n in 1..=bound {
        // y ← y + (f - S y)
        let defect = f.sub(&sy)?;
        y.add_scaled(Complex64::new(1.0, 0.0), &defect)?;
        sy = frame.apply(&y)?;
        residual = sy.lp_distance(f, p)? / norm;
        if residual <= tol {
            return Ok(NeumannSolution { solution: y, iterations: n, relative_residual: residual });
        }
    }
    Err(Error::NoConvergence { iterations: bound, residual })
}

/// Reconstruction through the corrected functionals `(S^{-1})^* g*_j`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub approximation: SparseFunction,
    pub relative_error: f64,
    pub iterations: usize,
    /// `g*_j(S^{-1} f)`, one per translate.
    pub coefficients: Vec<Complex64>,
    /// Haar-complement part of `S^{-1} f`, reproduced outside the frame series.
    pub complement: SparseFunction,
}

impl Reconstruction {
    /// `Σ_j θ_j c_j e_{s_j} τ_{t_j} g` plus the complement part.
    pub fn with_signs(&self, frame: &ConstructedFrame, signs: &[f64]) -> Result<SparseFunction> {
        let mut out = frame.synthesize(&self.coefficients, Some(signs));
        out.add_scaled(Complex64::new(1.0, 0.0), &self.complement)?;
        Ok(out)
    }
}

/// `Σ_j g*_j(S^{-1} f) e_{s_j} τ_{t_j} g` and its relative L^p error.
pub fn reconstruct(frame: &ConstructedFrame, f: &SparseFunction, tol: f64) -> Result<Reconstruction> {
    let solved = invert_neumann(frame, f, tol)?;
    let y = &solved.solution;
    let coefficients = frame.frame_coefficients(y)?;
    let (v, _) = frame.project_onto_span(y)?;
    let complement = y.sub(&v)?;
    let mut approximation = frame.synthesize(&coefficients, None);
    approximation.add_scaled(Complex64::new(1.0, 0.0), &complement)?;
    let p = frame.plan.p;
    let norm = f.lp_norm(p);
    let relative_error = if norm == 0.0 { 0.0 } else { approximation.lp_distance(f, p)? / norm };
    Ok(Reconstruction {
        approximation,
        relative_error,
        iterations: solved.iterations,
        coefficients,
        complement,
    })
}

/// Candidate set `{(n, s_n) : 1 ≤ |n| ≤ radius}` with frequencies cycling
/// through `freqs`.
pub fn integer_points(radius: i64, freqs: &[f64]) -> Vec<TimeFreqPoint> {
    let freqs = if freqs.is_empty() { &[0.0][..] } else { freqs };
    let len = freqs.len() as i64;
    (1..=radius)
        .flat_map(|n| {
            [
                TimeFreqPoint::new(n as f64, freqs[(n % len) as usize]),
                TimeFreqPoint::new(-(n as f64), freqs[((n + 1) % len) as usize]),
            ]
        })
        .collect()
}

/// `{(±base^n, 0) : 1 ≤ n ≤ count}`.
pub fn geometric_points(base: f64, count: u32) -> Vec<TimeFreqPoint> {
    (1..=count as i32)
        .flat_map(|n| {
            let t = base.powi(n);
            [TimeFreqPoint::new(t, 0.0), TimeFreqPoint::new(-t, 0.0)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn single_block_plan_at_p4() {
        let plan = plan_blocks(p(4.0), 1, 2.0).unwrap();
        assert_eq!(plan.sizes(), &[37]);
        assert!(!block_condition_holds(p(4.0), 3.0, &[36]));
    }

    #[test]
    fn plan_rejects_p_at_most_two() {
        assert!(matches!(plan_blocks(p(2.0), 3, 2.0), Err(Error::InfeasiblePlan(_))));
        assert!(matches!(plan_blocks(p(1.5), 1, 2.0), Err(Error::InfeasiblePlan(_))));
        assert!(plan_blocks(p(4.0), 2, 1.5).is_err());
    }

    #[test]
    fn explicit_sizes_must_satisfy_condition() {
        assert!(BlockPlan::from_sizes(p(4.0), vec![72, 144, 288]).is_ok());
        assert!(BlockPlan::from_sizes(p(4.0), vec![10, 20]).is_err());
        assert!(BlockPlan::from_sizes_unchecked(p(4.0), vec![1]).is_ok());
        assert!(BlockPlan::from_sizes(p(4.0), vec![]).is_err());
    }

    #[test]
    fn blocks_are_consecutive() {
        let plan = BlockPlan::from_sizes_unchecked(p(3.0), vec![2, 3, 1]).unwrap();
        assert_eq!(plan.blocks(), vec![0..2, 2..5, 5..6]);
        assert_eq!(plan.assignment(), vec![0, 0, 1, 1, 1, 2]);
    }

    #[test]
    fn strip_and_single_point_lack_spread() {
        let plan = BlockPlan::from_sizes(p(4.0), vec![37]).unwrap();
        let haar = HaarIndex::first_on_cell_zero(1);
        let strip: Vec<TimeFreqPoint> = (-5..=5)
            .flat_map(|t| (0..20).map(move |s| TimeFreqPoint::new(t as f64, s as f64 * 0.1)))
            .collect();
        let r = select_translates(&strip, &plan, &haar, TranslateRule::DistinctDifferences);
        assert!(matches!(r, Err(Error::InsufficientSpread { needed: 37, .. })));
        let one = [TimeFreqPoint::new(3.0, 0.0)];
        let two = BlockPlan::from_sizes_unchecked(p(4.0), vec![2]).unwrap();
        let r = select_translates(&one, &two, &haar, TranslateRule::DistinctDifferences);
        assert!(matches!(r, Err(Error::InsufficientSpread { needed: 2, found: 1 })));
    }

    #[test]
    fn overlapping_selection_is_caught() {
        let plan = BlockPlan::from_sizes_unchecked(p(4.0), vec![3]).unwrap();
        let haar = HaarIndex::first_on_cell_zero(1);
        // differences 1-0... t = 1, 2, 3 give t_2 - t_1 = t_3 - t_2
        let pts = vec![TimeFreqPoint::new(1.0, 0.0), TimeFreqPoint::new(2.0, 0.0), TimeFreqPoint::new(3.0, 0.0)];
        let sel = TranslateSelection::new(pts, &plan).unwrap();
        assert!(matches!(verify_disjointness(&sel, &haar), Err(Error::DisjointnessViolated(_))));
    }

    #[test]
    fn trivial_frame_is_identity_on_span() {
        let plan = BlockPlan::from_sizes_unchecked(p(4.0), vec![1]).unwrap();
        let frame = ConstructedFrame::build(plan, &[TimeFreqPoint::new(5.0, 0.25)], TranslateRule::DistinctDifferences)
            .unwrap();
        let (norm_pow, predicted) = frame.window_norm_check();
        assert!((norm_pow - 1.0).abs() < 1e-15 && predicted == 1.0);
        let h1 = frame.span_element(&[Complex64::new(1.0, 0.0)]);
        let sf = frame.apply(&h1).unwrap();
        assert!(sf.sub(&h1).unwrap().lp_norm(p(4.0)) < 1e-14);
        let sol = invert_neumann(&frame, &h1, 1e-8).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(frame.apply(&SparseFunction::zero(frame.step_log2())).unwrap().is_zero());
    }
}
