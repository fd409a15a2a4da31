use gaborlab::frame::{
    block_condition_holds, error_bound, integer_points, invert_neumann, plan_blocks, reconstruct, BlockPlan,
    ConstructedFrame, TranslateRule,
};
use gaborlab::rng::{stream, trial_rng};
use gaborlab::{Error, Exponent};
use num_complex::Complex64;

const FREQS: [f64; 7] = [0.0, 0.25, -0.5, 0.75, -1.25, 1.5, -1.75];

fn p(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

/// `Σ 1/N_k < 1/36` decided in integers, the p = 4 block condition.
fn condition_p4_exact(sizes: &[u128]) -> bool {
    let prod: u128 = sizes.iter().product();
    let num: u128 = sizes.iter().map(|n| prod / n).sum();
    36 * num < prod
}

#[test]
fn planned_first_block_is_minimal() {
    let plan = plan_blocks(p(4.0), 3, 2.0).unwrap();
    let n1 = plan.sizes()[0] as u128;
    assert_eq!(plan.sizes(), &[64, 128, 256]);
    assert!(condition_p4_exact(&[n1, 2 * n1, 4 * n1]));
    for m in 1..n1 {
        assert!(!condition_p4_exact(&[m, 2 * m, 4 * m]), "N_1 = {m} should fail");
        assert!(!block_condition_holds(p(4.0), 3.0, &[m as usize, 2 * m as usize, 4 * m as usize]));
    }
}

#[test]
fn planned_sizes_for_other_exponents_satisfy_condition() {
    for (pv, k, g) in [(3.0, 2, 2.0), (6.0, 4, 3.0), (2.5, 1, 2.0)] {
        let plan = plan_blocks(p(pv), k, g).unwrap();
        assert!(plan.is_certified());
        assert!(error_bound(&plan) < 0.5 * 2f64.sqrt() + 1e-12);
        let mut smaller: Vec<usize> = plan.sizes().to_vec();
        smaller[0] -= 1;
        let shrunk: Vec<usize> = (0..k).map(|i| ((smaller[0] as f64) * g.powi(i as i32)).ceil() as usize).collect();
        assert!(!block_condition_holds(p(pv), pv - 1.0, &shrunk));
    }
}

#[test]
fn contraction_constant_of_reference_sizes() {
    let plan = BlockPlan::from_sizes(p(4.0), vec![72, 144, 288]).unwrap();
    assert!((plan.block_sum() - 7.0 / 288.0).abs() < 1e-16);
    let q = error_bound(&plan);
    assert!((q - 3.0 * (7.0f64 / 288.0).sqrt()).abs() < 1e-15);
    assert!(q < 0.5);
}

#[test]
fn reference_frame_end_to_end() {
    let plan = BlockPlan::from_sizes(p(4.0), vec![72, 144, 288]).unwrap();
    let lambda = integer_points(1_500_000, &FREQS);
    let frame = ConstructedFrame::build(plan, &lambda, TranslateRule::DistinctDifferences).unwrap();
    assert_eq!(frame.selection().len(), 504);
    assert_eq!(frame.certificate().error_sets, 504 * 503);
    assert_eq!(frame.iteration_bound(1e-8), 26);
    let (norm_pow, predicted) = frame.window_norm_check();
    assert!((norm_pow - predicted).abs() < 1e-12 * predicted);

    let mut rng = trial_rng(7, stream::CORPUS, 0);
    let f = frame.random_span_element(&mut rng);
    let pp = p(4.0);
    let (main, error) = frame.split_terms(&f).unwrap();
    assert!(main.sub(&f).unwrap().lp_norm(pp) < 1e-12 * f.lp_norm(pp));
    let sf = frame.apply(&f).unwrap();
    assert!(sf.sub(&main).unwrap().sub(&error).unwrap().lp_norm(pp) < 1e-12 * f.lp_norm(pp));
    let ratio = error.lp_norm(pp) / f.lp_norm(pp);
    assert!(ratio <= frame.q(), "{ratio} > {}", frame.q());

    let solved = invert_neumann(&frame, &f, 1e-8).unwrap();
    assert!(solved.iterations <= 26);
    let rec = reconstruct(&frame, &f, 1e-8).unwrap();
    assert!(rec.relative_error < 1e-8);
    assert_eq!(rec.coefficients.len(), 504);
}

#[test]
fn geometric_rule_on_sparse_candidates() {
    let plan = BlockPlan::from_sizes(p(4.0), vec![37]).unwrap();
    let lambda = integer_points(1 << 22, &[0.0]);
    let r = ConstructedFrame::build(plan.clone(), &lambda, TranslateRule::Geometric { factor: 4.0, offset: 4.0 });
    assert!(matches!(r, Err(Error::InsufficientSpread { needed: 37, .. })));
    let lambda = gaborlab::frame::geometric_points(2.0, 40);
    let frame = ConstructedFrame::build(plan, &lambda, TranslateRule::Geometric { factor: 2.0, offset: 0.0 }).unwrap();
    assert_eq!(frame.selection().len(), 37);
    let f = frame.span_element(&[Complex64::new(1.0, -2.0)]);
    assert!(reconstruct(&frame, &f, 1e-10).unwrap().relative_error < 1e-10);
}
