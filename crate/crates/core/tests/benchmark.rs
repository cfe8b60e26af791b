use langevin_kit::benchmark::{
    benchmark_target, marginal_accuracy, run_benchmark, synthetic_dataset, BenchmarkConfig,
    PriorKind, ScheduleRule,
};
use langevin_kit::samplers::run_chain_observed;
use langevin_kit::{Algorithm, ChainConfig, Potential, StepSchedule};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn ula_samples(precondition: bool, n: usize, gamma: f64) -> DMatrix<f64> {
    let ds = synthetic_dataset(100, 5, 77).unwrap();
    let target = benchmark_target(&ds, PriorKind::Zellner, precondition).unwrap();
    let schedule = StepSchedule::constant(gamma).unwrap();
    let cfg = ChainConfig::new(Algorithm::Ula, n, 9).replica(precondition as u64);
    let mut rows = Vec::with_capacity(n * 5);
    run_chain_observed(&target.potential, &schedule, &cfg, |_, x| rows.extend(target.map.back(x))).unwrap();
    DMatrix::from_row_slice(n, 5, &rows)
}

#[test]
fn preconditioned_and_raw_chains_agree() {
    let ds = synthetic_dataset(100, 5, 77).unwrap();
    let raw = benchmark_target(&ds, PriorKind::Zellner, false).unwrap();
    let pre = benchmark_target(&ds, PriorKind::Zellner, true).unwrap();
    let gamma = 0.25 * raw
        .potential
        .constants()
        .discretization_step_cap()
        .min(pre.potential.constants().discretization_step_cap());
    let n = 400_000;
    let ma = marginal_accuracy(&ula_samples(true, n, gamma), &ula_samples(false, n, gamma), 50).unwrap();
    assert!(ma.mean >= 0.95, "{ma:?}");
}

#[test]
fn benchmark_report_is_reproducible() {
    let ds = synthetic_dataset(80, 3, 5).unwrap();
    let mut cfg = BenchmarkConfig::new(3_000, 21);
    cfg.replicas = 2;
    cfg.schedule = ScheduleRule::PaperDecreasing;
    let a = run_benchmark(&ds, &cfg).unwrap();
    let b = run_benchmark(&ds, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mala = a.algorithms.iter().find(|r| r.algorithm == Algorithm::Mala).unwrap();
    assert!(mala.acceptance_rate > 0.2 && mala.acceptance_rate < 1.0);
    assert!((0.35..=0.65).contains(&a.reference.acceptance_rate));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginal_accuracy_symmetric_and_bounded(
        a in prop::collection::vec(-10.0f64..10.0, 2..200),
        b in prop::collection::vec(-10.0f64..10.0, 2..200),
        bins in 1usize..80,
    ) {
        let (na, nb) = (a.len() / 2, b.len() / 2);
        let ma = DMatrix::from_column_slice(na, 2, &a[..2 * na]);
        let mb = DMatrix::from_column_slice(nb, 2, &b[..2 * nb]);
        let ab = marginal_accuracy(&ma, &mb, bins).unwrap();
        let ba = marginal_accuracy(&mb, &ma, bins).unwrap();
        prop_assert_eq!(&ab, &ba);
        for v in ab.per_dimension {
            prop_assert!((0.5..=1.0).contains(&v));
        }
    }
}
