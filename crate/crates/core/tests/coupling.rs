mod common;

use std::sync::Arc;

use langevin_kit::benchmark::{synthetic_dataset, zellner_prior};
use langevin_kit::coupling::{
    coupling_step, simulate_uncoupled_fraction, tv_bound_ar, ula_as_ar_spec, xi, ArCouplingSpec,
};
use langevin_kit::rng::{fill_standard_normal, stream_rng};
use langevin_kit::{GaussianPotential, LogisticModel, LogisticPotential, Potential, StepSchedule};
use proptest::prelude::*;

use common::{mean, variance};

fn linear_spec(scale: f64, sigma: f64, horizon: usize) -> ArCouplingSpec {
    let map = Box::new(move |_: usize, x: &[f64], out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = scale * v;
        }
    });
    ArCouplingSpec::new(2, map, vec![1.0 - scale; horizon], vec![sigma; horizon]).unwrap()
}

#[test]
fn marginals_follow_the_transition_law() {
    let spec = linear_spec(0.8, 0.7, 1);
    let (x, y) = ([1.0, -0.5], [0.2, 0.9]);
    let draws = 100_000;
    let mut rng = stream_rng(31, 0);
    let mut xs = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut ys = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut cross_x = Vec::with_capacity(draws);
    let mut cross_y = Vec::with_capacity(draws);
    for _ in 0..draws {
        let step = coupling_step(&spec, 1, &x, &y, &mut rng).unwrap();
        for i in 0..2 {
            xs[i].push(step.x[i]);
            ys[i].push(step.y[i]);
        }
        cross_x.push((step.x[0] - 0.8 * x[0]) * (step.x[1] - 0.8 * x[1]));
        cross_y.push((step.y[0] - 0.8 * y[0]) * (step.y[1] - 0.8 * y[1]));
    }
    let s2 = 0.49;
    let n = draws as f64;
    for (samples, centre, cross) in [(&xs, x, &cross_x), (&ys, y, &cross_y)] {
        for i in 0..2 {
            let m = mean(&samples[i]);
            assert!((m - 0.8 * centre[i]).abs() <= 4.0 * (s2 / n).sqrt());
            // Var of a sample variance of a normal is 2σ⁴/(n-1).
            let v = variance(&samples[i]);
            assert!((v - s2).abs() <= 4.0 * (2.0 * s2 * s2 / (n - 1.0)).sqrt());
        }
        assert!(mean(cross).abs() <= 4.0 * (s2 * s2 / n).sqrt());
    }
}

#[test]
fn coalescence_is_absorbing() {
    let spec = linear_spec(0.9, 0.5, 200);
    let mut rng = stream_rng(8, 0);
    for _ in 0..200 {
        let (mut x, mut y) = (vec![0.0, 0.0], vec![0.4, -0.3]);
        let mut met = false;
        for k in 1..=200 {
            let step = coupling_step(&spec, k, &x, &y, &mut rng).unwrap();
            if met {
                assert!(step.coupled && step.x == step.y);
            }
            met |= step.coupled;
            x = step.x;
            y = step.y;
        }
    }
}

#[test]
fn uncoupled_fraction_below_bound_for_anisotropic_target() {
    let p: Arc<dyn Potential> = Arc::new(GaussianPotential::new(&[0.5, 2.0]).unwrap());
    let schedule = StepSchedule::polynomial(0.3, 0.5).unwrap();
    let spec = ula_as_ar_spec(p, schedule, 30).unwrap();
    for (x, y) in [([0.0, 0.0], [1.0, 0.0]), ([1.0, 1.0], [-1.0, 0.5])] {
        for n in [1, 3, 10, 30] {
            let (frac, se) = simulate_uncoupled_fraction(&spec, &x, &y, n, 20_000, 12).unwrap();
            let bound = tv_bound_ar(&spec, &x, &y, n).unwrap();
            assert!(frac <= bound + 3.0 * se, "n={n}: {frac} > {bound}");
        }
    }
    assert_eq!(simulate_uncoupled_fraction(&spec, &[0.3, 0.3], &[0.3, 0.3], 5, 1000, 1).unwrap().0, 0.0);
}

#[test]
fn ula_map_is_lipschitz_on_logistic_target() {
    let ds = synthetic_dataset(100, 5, 21).unwrap();
    let prior = zellner_prior(&ds).unwrap();
    let p = LogisticPotential::new(LogisticModel::new(ds.design, ds.labels, prior).unwrap()).unwrap();
    let c = p.constants();
    let gamma = 0.5 * c.contraction_step_cap();
    let spec = ula_as_ar_spec(Arc::new(p), StepSchedule::constant(gamma).unwrap(), 1).unwrap();
    let lip = 1.0 - spec.deficit(1).unwrap();
    assert!((lip * lip - (1.0 - c.kappa * gamma)).abs() < 1e-15);
    let mut rng = stream_rng(2, 0);
    let (mut x, mut y) = (vec![0.0; 5], vec![0.0; 5]);
    let (mut hx, mut hy) = (vec![0.0; 5], vec![0.0; 5]);
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    for _ in 0..1000 {
        fill_standard_normal(&mut rng, &mut x);
        fill_standard_normal(&mut rng, &mut y);
        spec.apply(1, &x, &mut hx);
        spec.apply(1, &y, &mut hy);
        assert!(dist(&hx, &hy) <= lip * dist(&x, &y));
    }
}

proptest! {
    #[test]
    fn xi_matches_direct_sum(
        deficits in prop::collection::vec(0.0f64..0.9, 1..12),
        sigma in 0.1f64..3.0,
    ) {
        let h = deficits.len();
        let map = Box::new(|_: usize, x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let spec = ArCouplingSpec::new(1, map, deficits.clone(), vec![sigma; h]).unwrap();
        for k1 in 1..=h {
            for k2 in k1..=h {
                let mut want = 0.0;
                for i in k1..=k2 {
                    let prod: f64 = (k1..=i).map(|j| (1.0 - deficits[j - 1]).powi(-2)).product();
                    want += sigma * sigma * prod;
                }
                let got = xi(&spec, k1, k2).unwrap();
                prop_assert!((got - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn tv_bound_is_a_probability_decreasing_in_horizon(dist in 0.0f64..10.0) {
        let spec = linear_spec(0.95, 0.4, 50);
        let mut prev = 1.0;
        for n in 1..=50 {
            let b = tv_bound_ar(&spec, &[0.0, 0.0], &[dist, 0.0], n).unwrap();
            prop_assert!((0.0..=1.0).contains(&b) && b <= prev);
            prev = b;
        }
    }
}
