use cdmdc::dmd::{dmdc_unknown_b, AugmentedSvd, SnapshotSet};
use cdmdc::measurement::{MeasurementKind, MeasurementOperator, MeasurementSpec};
use cdmdc::numerics::{RealMatrix, RealVector};
use cdmdc::rng;
use cdmdc::testbed::{add_noise, simulate, Forcing, LowRankPlant, SyntheticRun};
use cdmdc::verify::{
    check_lemma1, check_lemma2, check_lemma_sum, check_markov, check_theorem1, check_theorem2,
    check_theorem3, controllability, numerical_rank, theorem_suite, DmdcOperators, LowRankOperator,
    SuiteOptions,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn two_state_run(seed: u64) -> SyntheticRun {
    let plant = LowRankPlant::two_state(1024).unwrap();
    let x0 = RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0);
    simulate(&plant, &x0, &Forcing::Gaussian { std: 1.0, seed }, 301).unwrap()
}

fn compressed(snaps: &SnapshotSet, c: &MeasurementOperator) -> SnapshotSet {
    SnapshotSet::new(
        c.compress(&snaps.x).unwrap(),
        c.compress(&snaps.x_shifted).unwrap(),
        snaps.inputs.clone(),
        snaps.dt,
    )
    .unwrap()
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    let mut s = rng::stream(seed, rng::AUXILIARY);
    RealMatrix::from_fn(rows, cols, |_, _| s.sample(StandardNormal))
}

#[test]
fn theorems_hold_on_noiseless_data() {
    let run = two_state_run(2);
    for kind in MeasurementKind::ALL {
        let c = MeasurementOperator::build(MeasurementSpec::new(kind, 128, 1024, 8)).unwrap();
        let reports = theorem_suite(&run.snapshots, &c, &SuiteOptions::default()).unwrap();
        for r in reports.iter().filter(|r| !r.identity.starts_with("lemma")) {
            assert!(
                r.passed,
                "{kind:?}: {} residual {:e}",
                r.identity, r.residual
            );
        }
        let scores = reports[0].assumptions.unwrap();
        assert!(
            scores.temporal_subspace < 1e-10
                && scores.output_subspace < 1e-10
                && scores.input_subspace < 1e-10
        );
    }
}

// With C a permutation, Ω_Y = diag(C, I) Ω shares Ω's singular factors, so
// the first lemma's right side collapses to ṼΣ̃⁻¹ Ũ₁ᵀŨ₁ and the second to
// ṼΣ̃⁻¹ Ũ₂ᵀŨ₂. Each lemma alone therefore misses exactly the other term,
// while their sum is ṼΣ̃⁻¹ (Ũ₁ᵀŨ₁ + Ũ₂ᵀŨ₂) = ṼΣ̃⁻¹.
#[test]
fn lemmas_split_a_single_identity() {
    let run = two_state_run(4);
    let s = &run.snapshots;
    let perm: Vec<usize> = (0..1024).rev().collect();
    let c = MeasurementOperator::single_pixel(1024, perm).unwrap();
    let full = AugmentedSvd::compute(s, 2, 3).unwrap();
    let comp = AugmentedSvd::compute(&compressed(s, &c), 2, 3).unwrap();

    let gram1 = full.u1.tr_mul(&full.u1);
    let gram2 = full.u2.tr_mul(&full.u2);
    let eye = RealMatrix::identity(3, 3);
    assert!((&gram1 + &gram2 - &eye).norm() < 1e-12);
    assert!((&gram1 - &eye).norm() > 1e-3);

    let vs = full.v_sigma_inv();
    let lemma1 = check_lemma1(&full, &comp, &c, 1e-8).unwrap();
    let predicted1 = (&vs - &vs * &gram1).norm() / vs.norm();
    assert!((lemma1.residual - predicted1).abs() < 1e-10 * predicted1.max(1.0));
    assert!(!lemma1.passed);
    let lemma2 = check_lemma2(&full, &comp, 1e-8).unwrap();
    let predicted2 = (&vs - &vs * &gram2).norm() / vs.norm();
    assert!((lemma2.residual - predicted2).abs() < 1e-10);
    assert!(check_lemma_sum(&full, &comp, &c, 1e-10).unwrap().passed);
}

#[test]
fn lemma_sum_holds_for_every_kind() {
    let run = two_state_run(5);
    let s = &run.snapshots;
    let full = AugmentedSvd::compute(s, 2, 3).unwrap();
    for kind in MeasurementKind::ALL {
        let c = MeasurementOperator::build(MeasurementSpec::new(kind, 96, 1024, 1)).unwrap();
        let comp = AugmentedSvd::compute(&compressed(s, &c), 2, 3).unwrap();
        let r = check_lemma_sum(&full, &comp, &c, 1e-8).unwrap();
        assert!(r.passed, "{kind:?}: {:e}", r.residual);
    }
}

#[test]
fn permutation_measurements_are_exact() {
    let run = two_state_run(6);
    let s = &run.snapshots;
    let perm: Vec<usize> = (0..1024).map(|i| (i * 5 + 3) % 1024).collect();
    let c = MeasurementOperator::single_pixel(1024, perm).unwrap();
    let reports = theorem_suite(s, &c, &SuiteOptions::default()).unwrap();
    for r in reports.iter().filter(|r| !r.identity.starts_with("lemma")) {
        assert!(r.residual < 1e-10, "{}: {:e}", r.identity, r.residual);
    }
}

#[test]
fn violated_output_subspace_breaks_theorem_one() {
    // generic data truncated to r̃ = 3 leaves most of X′ outside span(Ũ₁)
    let x = random_matrix(60, 20, 1);
    let xp = random_matrix(60, 20, 2);
    let u = random_matrix(1, 20, 3);
    let snaps = SnapshotSet::new(x, xp, Some(u), 1.0).unwrap();
    let c = MeasurementOperator::build(MeasurementSpec::new(
        MeasurementKind::GaussianRandom,
        12,
        60,
        4,
    ))
    .unwrap();
    let full = AugmentedSvd::compute(&snaps, 2, 3).unwrap();
    let comp = AugmentedSvd::compute(&compressed(&snaps, &c), 2, 3).unwrap();
    let ops = DmdcOperators::new(&snaps.x_shifted, &full);
    let ops_y = DmdcOperators::new(&c.compress(&snaps.x_shifted).unwrap(), &comp);
    let t1 = check_theorem1(&ops.a, &ops_y.a, &c, &snaps.x_shifted, 1e-8).unwrap();
    assert!(t1.residual > 1e-2 && !t1.passed, "{:e}", t1.residual);
    let t2 = check_theorem2(&ops.b, &ops_y.b, &c, 1e-8).unwrap();
    assert!(t2.residual > 1e-2 && !t2.passed);
    let scores = cdmdc::verify::assumption_scores(&full, &comp, &snaps.x_shifted);
    assert!(scores.output_subspace > 0.1);
}

#[test]
fn theorem3_flags_null_space_modes() {
    let run = two_state_run(7);
    let s = &run.snapshots;
    let model = dmdc_unknown_b(s, 2, 3).unwrap();
    // rows orthogonal to both lifting columns annihilate every mode
    let p = &LowRankPlant::two_state(1024).unwrap().lifting;
    let q = p.clone().qr().q();
    let basis = RealMatrix::identity(1024, 1024) - &q * q.transpose();
    let rows = basis.rows(0, 8).into_owned();
    let c = MeasurementOperator::from_dense(rows).unwrap();
    assert!(c.compress(&s.x).unwrap().norm() < 1e-12 * s.x.norm());
    let a_y = LowRankOperator {
        left: RealMatrix::identity(8, 2),
        right: RealMatrix::identity(2, 8),
    };
    for r in check_theorem3(&model, &a_y, &c, 1e-8).unwrap() {
        assert!(r.passed);
        assert!(r.note.as_deref().unwrap().contains("null space"));
    }
}

#[test]
fn markov_k0_is_theorem2_and_zero_b_is_trivial() {
    let run = two_state_run(8);
    let s = &run.snapshots;
    let c = MeasurementOperator::build(MeasurementSpec::new(
        MeasurementKind::UniformRandom,
        64,
        1024,
        2,
    ))
    .unwrap();
    let full = AugmentedSvd::compute(s, 2, 3).unwrap();
    let comp = AugmentedSvd::compute(&compressed(s, &c), 2, 3).unwrap();
    let ops = DmdcOperators::new(&s.x_shifted, &full);
    let ops_y = DmdcOperators::new(&c.compress(&s.x_shifted).unwrap(), &comp);
    let seq = check_markov(&ops.a, &ops.b, &ops_y.a, &ops_y.b, &c, 5, 1e-8).unwrap();
    assert_eq!(seq.len(), 6);
    let t2 = check_theorem2(&ops.b, &ops_y.b, &c, 1e-8).unwrap();
    assert!((seq[0].residual - t2.residual).abs() <= 1e-15 + t2.residual);
    assert!(seq.iter().all(|r| r.passed));

    let zero = RealMatrix::zeros(1024, 1);
    let zero_y = RealMatrix::zeros(64, 1);
    for r in check_markov(&ops.a, &zero, &ops_y.a, &zero_y, &c, 3, 1e-8).unwrap() {
        assert_eq!(r.residual, 0.0);
        assert!(r.passed);
    }
}

#[test]
fn noisy_suite_is_advisory() {
    let run = two_state_run(9);
    let s = &run.snapshots;
    let noisy = SnapshotSet::new(
        add_noise(&s.x, 0.5, 1).unwrap(),
        add_noise(&s.x_shifted, 0.5, 2).unwrap(),
        s.inputs.clone(),
        s.dt,
    )
    .unwrap();
    let c = MeasurementOperator::build(MeasurementSpec::new(
        MeasurementKind::GaussianRandom,
        128,
        1024,
        3,
    ))
    .unwrap();
    let opts = SuiteOptions {
        advisory: true,
        ..SuiteOptions::default()
    };
    let reports = theorem_suite(&noisy, &c, &opts).unwrap();
    assert!(reports
        .iter()
        .all(|r| r.advisory && r.passed && !r.failed()));
    let scores = reports[0].assumptions.unwrap();
    assert!(scores.temporal_subspace > 1e-6);
}

#[test]
fn controllability_of_lifted_plant() {
    let plant = LowRankPlant::two_state(64).unwrap();
    let (_, rank) = controllability(&plant.atilde, &plant.btilde, None).unwrap();
    assert_eq!(rank, 2);
    let pinv = cdmdc::numerics::pseudoinverse(&plant.lifting).unwrap();
    let a = &plant.lifting * &plant.atilde * pinv;
    let (m, rank) = controllability(&a, &plant.b(), Some(6)).unwrap();
    assert_eq!(m.shape(), (64, 6));
    assert_eq!(rank, 2);
}

fn rank_at(m: &RealMatrix, relative: f64) -> usize {
    let s = m.clone().svd(false, false).singular_values;
    let top = s.max();
    s.iter().filter(|&&v| v > relative * top).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn controllability_rank_is_similarity_invariant(seed in 0u64..10_000, n in 2usize..7, q in 1usize..3, drop in 0usize..3) {
        let mut a = random_matrix(n, n, seed);
        let b = random_matrix(n, q, seed + 1);
        // make the pair uncontrollable by zeroing coupling into the last states
        let keep = n.saturating_sub(drop).max(1);
        let mut b = b;
        for i in keep..n {
            b.row_mut(i).fill(0.0);
            for j in 0..keep {
                a[(i, j)] = 0.0;
            }
        }
        let t = random_matrix(n, n, seed + 2) + RealMatrix::identity(n, n) * (n as f64);
        let t_inv = t.clone().try_inverse().unwrap();
        let (m1, _) = controllability(&a, &b, None).unwrap();
        let (m2, _) = controllability(&(&t * &a * &t_inv), &(&t * &b), None).unwrap();
        let (r1, r2) = (rank_at(&m1, 1e-9), rank_at(&m2, 1e-9));
        prop_assert_eq!(r1, r2);
        prop_assert!(r1 <= keep);
    }

    #[test]
    fn numerical_rank_of_products(seed in 0u64..10_000, k in 1usize..5) {
        let m = random_matrix(9, k, seed) * random_matrix(k, 7, seed + 9);
        prop_assert_eq!(numerical_rank(&m), k);
    }
}
