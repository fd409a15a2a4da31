//! Seeded verification suites for the classical inequalities: Khintchine,
//! the square-function sandwich, type and cotype, lacunary Khintchine and
//! the Littlewood–Paley square function of disjoint bands.
//!
//! Each suite returns its metrics, structural checks, a CSV table and the
//! observed extremes of every uncalibrated ratio; comparison with recorded
//! constants happens in [`crate::calibration`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::Window;
use crate::error::{Error, Result};
use crate::fourier::{partial_sum, rdf_square_norm, uniform_partition, FrequencyInterval};
use crate::gabor::TimeFreqPoint;
use crate::grid::{lp_ell2_norm, unit_phase, Exponent, Grid, SampledFunction};
use crate::report::{Check, Table};
use crate::rng::{stream, trial_rng};
use crate::stochastic::{
    cotype2_ratio, khintchine_ratio, lacunary_pnorm, rademacher_pnorm_exact, type2_ratio, LacunarySequence,
    EXACT_LIMIT,
};

/// Tolerance for the exact one-sided Khintchine and square-function bounds.
pub const EXACT_SIDE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Khintchine,
    Squarefunc,
    TypeCotype,
    Lacunary,
    Rdf,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Khintchine, Suite::Squarefunc, Suite::TypeCotype, Suite::Lacunary, Suite::Rdf];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Khintchine => "khintchine",
            Suite::Squarefunc => "squarefunc",
            Suite::TypeCotype => "type_cotype",
            Suite::Lacunary => "lacunary",
            Suite::Rdf => "rdf",
        }
    }

    /// Reference parameters; calibration constants are recorded with these.
    pub fn reference(&self) -> SuiteParams {
        let (ps, instances, n_max): (&[f64], usize, usize) = match self {
            Suite::Khintchine => (&[1.5, 2.0, 3.0, 4.0], 100, 12),
            Suite::Squarefunc => (&[1.5, 3.0, 4.0], 50, 10),
            Suite::TypeCotype => (&[1.5, 3.0, 4.0], 50, 10),
            Suite::Lacunary => (&[4.0], 100, 9),
            Suite::Rdf => (&[3.0, 4.0], 100, 32),
        };
        SuiteParams { ps: ps.to_vec(), instances, n_max, seed: REFERENCE_SEED }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s}")))
    }
}

/// Seed of every reference run.
pub const REFERENCE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub ps: Vec<f64>,
    /// Instances per exponent.
    pub instances: usize,
    /// Largest family size (for `rdf`, the number of bands).
    pub n_max: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteOutcome {
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub table: Table,
    /// Observed `[min, max]` of ratios with unknown constants.
    pub observed: BTreeMap<String, Window>,
}

pub fn run_suite(suite: Suite, params: &SuiteParams) -> Result<SuiteOutcome> {
    if params.instances == 0 || params.n_max == 0 || params.ps.is_empty() {
        return Err(Error::InvalidArgument("suite needs instances, n_max and exponents".into()));
    }
    let ps: Result<Vec<Exponent>> = params.ps.iter().map(|&p| Exponent::new(p)).collect();
    let ps = ps?;
    match suite {
        Suite::Khintchine => khintchine_suite(&ps, params),
        Suite::Squarefunc => squarefunc_suite(&ps, params),
        Suite::TypeCotype => type_cotype_suite(&ps, params),
        Suite::Lacunary => lacunary_suite(&ps, params),
        Suite::Rdf => rdf_suite(&ps, params),
    }
}

/// Key of an exponent in metric names: `p1.5`, `p3`.
pub fn p_key(p: f64) -> String {
    format!("p{p}")
}

fn window_of(values: &[f64]) -> Window {
    Window::new(
        values.iter().copied().fold(f64::INFINITY, f64::min),
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn complex_uniform<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Trial index of instance `i` under exponent slot `slot`.
fn instance_index(slot: usize, i: usize) -> u64 {
    ((slot as u64) << 32) | i as u64
}

fn khintchine_suite(ps: &[Exponent], params: &SuiteParams) -> Result<SuiteOutcome> {
    let n_max = params.n_max.min(crate::stochastic::SCALAR_EXACT_LIMIT);
    let mut out = SuiteOutcome { table: Table::new(&["instance", "n", "p", "ratio", "bound", "pass"]), ..Default::default() };
    for (slot, &p) in ps.iter().enumerate() {
        let rows: Result<Vec<(usize, f64)>> = (0..params.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(params.seed, stream::COEFFICIENTS, instance_index(slot, i));
                let n = rng.gen_range(1..=n_max);
                let a: Vec<Complex64> = (0..n).map(|_| complex_uniform(&mut rng)).collect();
                Ok((n, khintchine_ratio(&a, p)?))
            })
            .collect();
        let rows = rows?;
        let ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let q = p.p();
        let lower = q >= 2.0;
        let upper = q <= 2.0;
        for (i, &(n, r)) in rows.iter().enumerate() {
            let pass = (!lower || r >= 1.0 - EXACT_SIDE_TOL) && (!upper || r <= 1.0 + EXACT_SIDE_TOL);
            out.table.push(vec![i.to_string(), n.to_string(), q.to_string(), r.to_string(), "1".into(), pass.to_string()]);
        }
        let w = window_of(&ratios);
        let key = p_key(q);
        out.metrics.insert(format!("{key}.ratio_min"), w.lo);
        out.metrics.insert(format!("{key}.ratio_max"), w.hi);
        if lower {
            out.checks.push(Check::at_least(format!("khintchine.{key}.lower"), w.lo, 1.0 - EXACT_SIDE_TOL));
        }
        if upper {
            out.checks.push(Check::at_most(format!("khintchine.{key}.upper"), w.hi, 1.0 + EXACT_SIDE_TOL));
        }
    }
    Ok(out)
}

/// Grid of the function corpora: `[0, 8)` at step `2^-6`.
pub fn corpus_grid() -> Grid {
    Grid::new(0.0, 6, 8 << 6).expect("valid corpus grid")
}

/// A family of `n` scaled Gabor atoms of the hat window on `[0, 2]`, with
/// integer shifts in `0..=5` and frequencies in `(1/4)Z ∩ [-4, 4]`.
pub fn random_atom_family<R: Rng>(rng: &mut R, grid: &Grid, n: usize) -> Result<Vec<SampledFunction>> {
    let window = SampledFunction::from_fn(*grid, |x| Complex64::new((1.0 - (x - 1.0).abs()).max(0.0), 0.0));
    (0..n)
        .map(|_| {
            let pt = TimeFreqPoint::new(rng.gen_range(0..=5) as f64, rng.gen_range(-16..=16) as f64 / 4.0);
            let c = complex_uniform(rng);
            Ok(window.time_freq_shift(pt.t, pt.s)?.extend_to(grid)?.scale(c))
        })
        .collect()
}

fn squarefunc_suite(ps: &[Exponent], params: &SuiteParams) -> Result<SuiteOutcome> {
    let grid = corpus_grid();
    let n_max = params.n_max.min(EXACT_LIMIT);
    let mut out =
        SuiteOutcome { table: Table::new(&["instance", "n", "p", "rademacher", "square_function", "ratio"]), ..Default::default() };
    for (slot, &p) in ps.iter().enumerate() {
        let rows: Result<Vec<(usize, f64, f64)>> = (0..params.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(params.seed, stream::FUNCTIONS, instance_index(slot, i));
                let n = rng.gen_range(1..=n_max);
                let fs = random_atom_family(&mut rng, &grid, n)?;
                Ok((n, rademacher_pnorm_exact(&fs, p)?, lp_ell2_norm(&fs, p)?))
            })
            .collect();
        let rows = rows?;
        let q = p.p();
        let ratios: Vec<f64> = rows.iter().map(|&(_, r, sf)| r / sf).collect();
        for (i, (&(n, r, sf), ratio)) in rows.iter().zip(&ratios).enumerate() {
            out.table.push(vec![i.to_string(), n.to_string(), q.to_string(), r.to_string(), sf.to_string(), ratio.to_string()]);
        }
        let w = window_of(&ratios);
        let key = p_key(q);
        out.metrics.insert(format!("{key}.ratio_min"), w.lo);
        out.metrics.insert(format!("{key}.ratio_max"), w.hi);
        if q >= 2.0 {
            out.checks.push(Check::at_least(format!("squarefunc.{key}.lower"), w.lo, 1.0 - EXACT_SIDE_TOL));
        }
        if q <= 2.0 {
            out.checks.push(Check::at_most(format!("squarefunc.{key}.upper"), w.hi, 1.0 + EXACT_SIDE_TOL));
        }
        if q != 2.0 {
            out.observed.insert(format!("squarefunc.{key}"), w);
        }
    }
    Ok(out)
}

fn type_cotype_suite(ps: &[Exponent], params: &SuiteParams) -> Result<SuiteOutcome> {
    let grid = corpus_grid();
    let n_max = params.n_max.min(EXACT_LIMIT);
    let mut out = SuiteOutcome { table: Table::new(&["instance", "n", "p", "kind", "ratio"]), ..Default::default() };
    for (slot, &p) in ps.iter().enumerate() {
        let q = p.p();
        let kind = if q >= 2.0 { "type" } else { "cotype" };
        let ratios: Result<Vec<(usize, f64)>> = (0..params.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(params.seed, stream::FUNCTIONS, instance_index(slot, i));
                let n = rng.gen_range(1..=n_max);
                let fs = random_atom_family(&mut rng, &grid, n)?;
                let r = if q >= 2.0 { type2_ratio(&fs, p)? } else { cotype2_ratio(&fs, p)? };
                Ok((n, r))
            })
            .collect();
        let ratios = ratios?;
        for (i, &(n, r)) in ratios.iter().enumerate() {
            out.table.push(vec![i.to_string(), n.to_string(), q.to_string(), kind.into(), r.to_string()]);
        }
        let w = window_of(&ratios.iter().map(|r| r.1).collect::<Vec<_>>());
        let key = p_key(q);
        out.metrics.insert(format!("{key}.{kind}_min"), w.lo);
        out.metrics.insert(format!("{key}.{kind}_max"), w.hi);
        out.checks.push(Check::new(format!("type_cotype.{key}.finite"), w.hi.is_finite(), format!("max {}", w.hi)));
        out.observed.insert(format!("type_cotype.{key}"), w);
    }
    Ok(out)
}

/// `‖Σ a_n e_{2^n}‖_4^4 = 2‖a‖_2^4 - Σ|a_n|^4` for distinct powers of two.
pub fn powers_of_two_fourth_moment(a: &[Complex64]) -> f64 {
    let s2: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let s4: f64 = a.iter().map(|v| v.norm_sqr().powi(2)).sum();
    2.0 * s2 * s2 - s4
}

fn lacunary_suite(ps: &[Exponent], params: &SuiteParams) -> Result<SuiteOutcome> {
    let seq = LacunarySequence::geometric(2, params.n_max)?;
    let two = Exponent::new(2.0)?;
    let mut out = SuiteOutcome { table: Table::new(&["instance", "p", "norm", "ell2", "ratio"]), ..Default::default() };
    for (slot, &p) in ps.iter().enumerate() {
        let q = p.p();
        let rows: Result<Vec<(f64, f64, f64, f64)>> = (0..params.instances)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(params.seed, stream::COEFFICIENTS, instance_index(slot, i));
                let a: Vec<Complex64> = (0..seq.freqs().len()).map(|_| complex_uniform(&mut rng)).collect();
                let l2 = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                let norm = lacunary_pnorm(&a, &seq, p)?;
                let norm2 = lacunary_pnorm(&a, &seq, two)?;
                let fourth = if q == 4.0 { (norm.powi(4) / powers_of_two_fourth_moment(&a) - 1.0).abs() } else { 0.0 };
                Ok((norm, l2, (norm2 / l2 - 1.0).abs(), fourth))
            })
            .collect();
        let rows = rows?;
        let ratios: Vec<f64> = rows.iter().map(|r| r.0 / r.1).collect();
        for (i, (r, ratio)) in rows.iter().zip(&ratios).enumerate() {
            out.table.push(vec![i.to_string(), q.to_string(), r.0.to_string(), r.1.to_string(), ratio.to_string()]);
        }
        let key = p_key(q);
        let w = window_of(&ratios);
        out.metrics.insert(format!("{key}.ratio_min"), w.lo);
        out.metrics.insert(format!("{key}.ratio_max"), w.hi);
        let ortho = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        out.metrics.insert("p2.max_deviation".into(), ortho);
        out.checks.push(Check::at_most("lacunary.p2.orthogonality", ortho, 1e-12));
        if q == 4.0 && seq.freqs().len() <= 1 << 10 {
            let dev = rows.iter().map(|r| r.3).fold(0.0, f64::max);
            out.metrics.insert(format!("{key}.fourth_moment_deviation"), dev);
            out.checks.push(Check::at_most("lacunary.p4.fourth_moment_identity", dev, 1e-10));
        }
        out.observed.insert(format!("lacunary.{key}"), w);
    }
    Ok(out)
}

/// Grid of the band-projection corpus: `[0, 8)` at step `2^-7`.
pub fn rdf_grid() -> Grid {
    Grid::new(0.0, 7, 8 << 7).expect("valid rdf grid")
}

fn random_function<R: Rng>(rng: &mut R, grid: &Grid) -> SampledFunction {
    SampledFunction::from_values(*grid, (0..grid.count()).map(|_| complex_uniform(rng)).collect())
        .expect("matching length")
}

/// Fourier-tool identities on one random function.
struct FourierChecks {
    in_band: f64,
    out_band: f64,
    idempotence: f64,
    intersection: f64,
    plancherel: f64,
    identity: f64,
}

fn fourier_identities(f: &SampledFunction, bands: &[FrequencyInterval]) -> Result<FourierChecks> {
    let grid = f.grid();
    let span = grid.span();
    let nyq = grid.count() as f64 / (2.0 * span);
    let two = Exponent::new(2.0)?;
    // a tone on the discrete spectrum strictly inside the first band
    let s = bands[0].lo() + 1.0 / span;
    let tone = SampledFunction::from_fn(*grid, |x| unit_phase(s, x));
    let in_band = partial_sum(&tone, &bands[0]).max_abs_diff(&tone)?;
    let out_band = partial_sum(&tone, &bands[bands.len() - 1]).sup_norm();
    let i = FrequencyInterval::new(-nyq / 2.0, nyq / 4.0)?;
    let j = FrequencyInterval::new(-nyq / 8.0, nyq / 2.0)?;
    let di = partial_sum(f, &i);
    let idempotence = partial_sum(&di, &i).max_abs_diff(&di)?;
    let both = partial_sum(&partial_sum(f, &j), &i);
    let meet = partial_sum(f, &i.intersection(&j).expect("overlapping"));
    let intersection = both.max_abs_diff(&meet)?;
    let plancherel = (rdf_square_norm(f, bands, two)? / f.lp_norm(two) - 1.0).abs();
    let all = FrequencyInterval::new(-nyq, nyq)?;
    let identity = (rdf_square_norm(f, &[all], two)? / f.lp_norm(two) - 1.0).abs();
    Ok(FourierChecks { in_band, out_band, idempotence, intersection, plancherel, identity })
}

fn rdf_suite(ps: &[Exponent], params: &SuiteParams) -> Result<SuiteOutcome> {
    let grid = rdf_grid();
    let nyq = grid.count() as f64 / (2.0 * grid.span());
    let bands = uniform_partition(grid.count(), grid.span(), 2.0 * nyq / params.n_max as f64)?;
    let mut out = SuiteOutcome { table: Table::new(&["instance", "p", "square_norm", "norm", "ratio"]), ..Default::default() };
    let corpus: Vec<SampledFunction> = (0..params.instances as u64)
        .map(|i| random_function(&mut trial_rng(params.seed, stream::CORPUS, i), &grid))
        .collect();
    let checks: Result<Vec<FourierChecks>> = corpus.par_iter().map(|f| fourier_identities(f, &bands)).collect();
    let checks = checks?;
    let worst = |g: fn(&FourierChecks) -> f64| checks.iter().map(g).fold(0.0, f64::max);
    let items: [(&str, f64, f64); 6] = [
        ("in_band_tone", worst(|c| c.in_band), 1e-9),
        ("out_of_band_tone", worst(|c| c.out_band), 1e-9),
        ("idempotence", worst(|c| c.idempotence), 1e-9),
        ("intersection_law", worst(|c| c.intersection), 1e-9),
        ("plancherel", worst(|c| c.plancherel), 1e-10),
        ("full_band_identity", worst(|c| c.identity), 1e-10),
    ];
    for (name, v, tol) in items {
        out.metrics.insert(format!("fourier.{name}"), v);
        out.checks.push(Check::at_most(format!("rdf.{name}"), v, tol));
    }
    out.metrics.insert("bands".into(), bands.len() as f64);
    for &p in ps {
        let q = p.p();
        let rows: Result<Vec<(f64, f64)>> =
            corpus.par_iter().map(|f| Ok((rdf_square_norm(f, &bands, p)?, f.lp_norm(p)))).collect();
        let rows = rows?;
        let ratios: Vec<f64> = rows.iter().map(|r| r.0 / r.1).collect();
        for (i, (r, ratio)) in rows.iter().zip(&ratios).enumerate() {
            out.table.push(vec![i.to_string(), q.to_string(), r.0.to_string(), r.1.to_string(), ratio.to_string()]);
        }
        let key = p_key(q);
        let w = window_of(&ratios);
        out.metrics.insert(format!("{key}.ratio_min"), w.lo);
        out.metrics.insert(format!("{key}.ratio_max"), w.hi);
        out.observed.insert(format!("rdf.{key}"), w);
    }
    Ok(out)
}
