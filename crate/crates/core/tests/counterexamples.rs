use gaborlab::counterexamples::{
    thm42_growth_ratios, thm42_system, thm42_verify, thm42_window, thm52_growth_scan, thm52_separation,
    thm52_system, thm52_verify, WeightSequence, THM52_STEP_LOG2,
};
use gaborlab::gabor::CoefficientMap;
use gaborlab::grid::wiener_norm;
use gaborlab::rng::{stream, trial_rng};
use gaborlab::{Exponent, Grid};
use num_complex::Complex64;
use rand::Rng;

fn p(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

#[test]
fn dilation_window_norms() {
    let pp = p(1.5);
    let c = WeightSequence::power_law_tail(0.1, 8, pp).unwrap();
    let grid = Grid::new(1.0, 10, 8 << 10).unwrap();
    let g = thm42_window(&c, pp, 8, &grid).unwrap();
    assert!((g.lp_norm_pow(pp) - 1.0).abs() < 1e-10);
    let expected: f64 = (1..=8).map(|k| c.c(k).norm() * 2f64.powf(k as f64 / 1.5)).sum();
    assert!((wiener_norm(&g).unwrap() - expected).abs() < 1e-12 * expected);
}

#[test]
fn dilation_example_checks() {
    let pp = p(1.5);
    let c = WeightSequence::power_law_tail(0.1, 8, pp).unwrap();
    let report = thm42_verify(&c, pp, 8, 24, 11).unwrap();
    assert!((report.e1_ratio - 0.5).abs() < 1e-12);
    assert!(report.pieces_disjoint);
    assert!(report.decomposition_error < 1e-12, "{}", report.decomposition_error);
    assert!(report.closed_form_error < 1e-12, "{}", report.closed_form_error);
    assert!(report.single_type_error < 1e-12, "{}", report.single_type_error);
    assert!(report.ratio_min > 0.0 && report.ratio_max < 1.0 + 1e-12);
    assert_eq!(report.rows.len(), 24);
}

#[test]
fn dilation_growth_is_monotone() {
    let ratios = thm42_growth_ratios(|j| (j as f64).powf(-0.1), p(1.5), 64);
    assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    assert!(ratios[63] > ratios[0]);
}

#[test]
fn single_coefficient_system_reproduces_window() {
    let pp = p(1.5);
    let c = WeightSequence::power_law_tail(0.1, 4, pp).unwrap();
    let system = thm42_system(&c, pp, 3, 12).unwrap();
    let atom = system.atom(&system.points()[2]).unwrap();
    assert!((atom.lp_norm(pp) - system.window().lp_norm(pp)).abs() < 1e-12);
}

/// `∫_0^1 |Σ b_k e_{2^k}|^4 = 2(Σ|b_k|²)² - Σ|b_k|⁴`, since sums of two
/// distinct powers of two are distinct.
fn fourth_moment(b: &[Complex64]) -> f64 {
    let s2: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    let s4: f64 = b.iter().map(|v| v.norm_sqr().powi(2)).sum();
    2.0 * s2 * s2 - s4
}

#[test]
fn translates_norm_matches_fourth_moment_identity() {
    let pp = p(4.0);
    let c = WeightSequence::harmonic_square(6, pp).unwrap();
    let n = 8;
    let system = thm52_system(&c, pp, n, THM52_STEP_LOG2).unwrap();
    assert!((system.window().lp_norm_pow(pp) - 1.0).abs() < 1e-12);
    for trial in 0..10 {
        let mut rng = trial_rng(5, stream::COEFFICIENTS, trial);
        let a: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let map: CoefficientMap = system.points().iter().copied().zip(a.iter().copied()).collect();
        let computed = system.synthesize(&map).unwrap().lp_norm_pow(pp);
        let exact: f64 = (1..=(n + 7) as i64)
            .map(|l| {
                let b: Vec<Complex64> = (0..l)
                    .filter(|&k| l - k <= n as i64 && k <= 6)
                    .map(|k| a[(l - k - 1) as usize] * c.c(k))
                    .collect();
                fourth_moment(&b)
            })
            .sum();
        assert!((computed - exact).abs() < 1e-10 * exact, "{computed} vs {exact}");
    }
}

#[test]
fn translates_report() {
    let pp = p(4.0);
    let c = WeightSequence::harmonic_square(6, pp).unwrap();
    let report = thm52_verify(&c, pp, 8, 16, 3).unwrap();
    assert!((report.e1_ratio - 1.0).abs() < 1e-12);
    assert!(report.ratio_min >= 1.0 - 1e-12 && report.ratio_max <= 2.0 + 1e-12);
    assert_eq!(report.n_star, Some(5));
    let sep = report.separation;
    assert!(sep.norm < sep.bound);
}

#[test]
fn growth_scan_oracle() {
    let pp = p(4.0);
    let c = WeightSequence::harmonic_square(6, pp).unwrap();
    let z4: f64 = (1..=7).map(|k| 1.0 / (k * k) as f64).sum();
    let mut g = 0.0;
    let mut first = None;
    for n in 1..=64usize {
        let s: f64 = (1..=n.min(7)).map(|k| 1.0 / k as f64).sum::<f64>() / z4.sqrt();
        g += s * s;
        if first.is_none() && g / n as f64 > 2.0 {
            first = Some(n);
        }
    }
    assert_eq!(thm52_growth_scan(&c, pp, 2.0, 64), first);
}

#[test]
fn separated_translates_stay_below_bound() {
    let pp = p(4.0);
    let c = WeightSequence::harmonic_square(6, pp).unwrap();
    let sep = thm52_separation(&c, pp, 8, 10).unwrap();
    assert!(sep.eps * 8.0 + 8f64.powf(0.25) < 2.0 * 8f64.powf(0.25));
    assert_eq!(sep.m, sep.k0 + 1);
    assert!(sep.norm < 2.0 * 8f64.powf(0.25));
    assert!(sep.norm >= 8f64.powf(0.25) * (1.0 - 1e-12));
}
