use cdmdc::compressive::{cdmd, cdmdc, Branch, CompressiveInputs, RecoveryPath};
use cdmdc::dmd::{dmdc_known_b, dmdc_unknown_b};
use cdmdc::error::Error;
use cdmdc::measurement::{MeasurementKind, MeasurementOperator, MeasurementSpec};
use cdmdc::numerics::RealVector;
use cdmdc::testbed::{simulate, Forcing, LowRankPlant, SyntheticRun};
use cdmdc::verify::{b_error, mode_error};

fn two_state_run(seed: u64) -> (LowRankPlant, SyntheticRun) {
    let plant = LowRankPlant::two_state(1024).unwrap();
    let x0 = RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0);
    let run = simulate(&plant, &x0, &Forcing::Gaussian { std: 1.0, seed }, 301).unwrap();
    (plant, run)
}

fn measure(kind: MeasurementKind, p: usize, seed: u64) -> MeasurementOperator {
    MeasurementOperator::build(MeasurementSpec::new(kind, p, 1024, seed)).unwrap()
}

#[test]
fn every_branch_reaches_table_one_accuracy() {
    let (_, run) = two_state_run(7);
    let s = &run.snapshots;
    let u = s.require_inputs().unwrap();
    let b = &run.b_true;
    for kind in MeasurementKind::ALL {
        let c = measure(kind, 128, 11);
        let y = c.compress(&s.x).unwrap();
        let yp = c.compress(&s.x_shifted).unwrap();
        let base = CompressiveInputs::new(&y, &yp, &c, s.dt, 2)
            .with_inputs(u)
            .with_r_tilde(3);
        let cases = [
            (
                base.clone()
                    .with_full_state(&s.x, &s.x_shifted)
                    .with_known_b(b),
                Branch::CompressedDmdKnownB,
            ),
            (
                base.clone().with_full_state(&s.x, &s.x_shifted),
                Branch::CompressedDmdcUnknownB,
            ),
            (
                base.clone().with_known_b(b),
                Branch::CompressedSensingDmdKnownB,
            ),
            (base.clone(), Branch::CompressedSensingDmdcUnknownB),
        ];
        for (inputs, branch) in cases {
            let m = cdmdc(&inputs).unwrap();
            assert_eq!(m.branch, branch);
            let err = mode_error(
                &run.true_modes,
                &m.model.modes,
                Some((&run.true_eigenvalues, m.eigenvalues())),
            )
            .unwrap();
            assert!(err < 1e-10, "{kind:?} {branch:?}: mode error {err:e}");
            let be = b_error(b, m.model.b_hat.as_ref().unwrap()).unwrap();
            assert!(be < 1e-10, "{kind:?} {branch:?}: B error {be:e}");
            if branch.path() == RecoveryPath::CompressedSensing {
                assert!(m.recovery_converged());
            }
        }
    }
}

#[test]
fn full_state_dmdc_matches_truth() {
    let (_, run) = two_state_run(3);
    let s = &run.snapshots;
    let unknown = dmdc_unknown_b(s, 2, 3).unwrap();
    let known = dmdc_known_b(s, &run.b_true, 2).unwrap();
    for model in [&unknown, &known] {
        assert!(
            mode_error(
                &run.true_modes,
                &model.modes,
                Some((&run.true_eigenvalues, &model.eigenvalues))
            )
            .unwrap()
                < 1e-10
        );
    }
    assert!(b_error(&run.b_true, unknown.b_hat.as_ref().unwrap()).unwrap() < 1e-10);
}

#[test]
fn cdmd_on_unforced_data_recovers_spectrum() {
    let plant = LowRankPlant::two_state(1024).unwrap();
    let x0 = RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0);
    let run = simulate(&plant, &x0, &Forcing::Zero, 101).unwrap();
    let s = &run.snapshots;
    let c = measure(MeasurementKind::GaussianRandom, 64, 5);
    let y = c.compress(&s.x).unwrap();
    let yp = c.compress(&s.x_shifted).unwrap();
    let inputs = CompressiveInputs::new(&y, &yp, &c, s.dt, 2);
    for (m, branch) in [
        (
            cdmd(&inputs.clone().with_full_state(&s.x, &s.x_shifted)).unwrap(),
            Branch::CompressedDmd,
        ),
        (cdmd(&inputs).unwrap(), Branch::CompressedSensingDmd),
    ] {
        assert_eq!(m.branch, branch);
        let err = mode_error(
            &run.true_modes,
            &m.model.modes,
            Some((&run.true_eigenvalues, m.eigenvalues())),
        )
        .unwrap();
        assert!(err < 1e-10, "{branch:?}: {err:e}");
    }
}

#[test]
fn branch_input_errors() {
    let (_, run) = two_state_run(1);
    let s = &run.snapshots;
    let c = measure(MeasurementKind::BernoulliRandom, 32, 2);
    let y = c.compress(&s.x).unwrap();
    let yp = c.compress(&s.x_shifted).unwrap();
    let base = CompressiveInputs::new(&y, &yp, &c, s.dt, 2);
    assert!(matches!(cdmdc(&base), Err(Error::MissingInput(_))));

    let other = measure(MeasurementKind::BernoulliRandom, 32, 3);
    let wrong = CompressiveInputs::new(&y, &yp, &other, s.dt, 2)
        .with_inputs(s.require_inputs().unwrap())
        .with_full_state(&s.x, &s.x_shifted);
    assert!(matches!(cdmdc(&wrong), Err(Error::Inconsistent { .. })));
    assert!(cdmdc(&wrong.without_consistency_check()).is_ok());

    let short = y.rows(0, 16).into_owned();
    let bad = CompressiveInputs::new(&short, &short, &c, s.dt, 2);
    assert!(matches!(cdmd(&bad), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn lossless_single_pixel_matches_dmdc() {
    let (_, run) = two_state_run(9);
    let s = &run.snapshots;
    let u = s.require_inputs().unwrap();
    let perm: Vec<usize> = (0..1024).map(|i| (i * 357) % 1024).collect();
    let c = MeasurementOperator::single_pixel(1024, perm).unwrap();
    let y = c.compress(&s.x).unwrap();
    let yp = c.compress(&s.x_shifted).unwrap();
    let reference = dmdc_unknown_b(s, 2, 3).unwrap();
    let inputs = CompressiveInputs::new(&y, &yp, &c, s.dt, 2)
        .with_inputs(u)
        .with_r_tilde(3);
    for m in [
        cdmdc(&inputs).unwrap(),
        cdmdc(&inputs.clone().with_full_state(&s.x, &s.x_shifted)).unwrap(),
    ] {
        let e = mode_error(
            &reference.modes,
            &m.model.modes,
            Some((&reference.eigenvalues, m.eigenvalues())),
        )
        .unwrap();
        assert!(e < 1e-10, "{:?}: {e:e}", m.branch);
        let be = b_error(
            reference.b_hat.as_ref().unwrap(),
            m.model.b_hat.as_ref().unwrap(),
        )
        .unwrap();
        assert!(be < 1e-10);
    }
}
