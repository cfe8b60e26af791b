use langevin_kit::StepSchedule;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Σ_{i=1}^{n+1} ∏_{k=i+1}^{n+1}(1-ϖγ_k) γ_i^j
    ///   ≤ ∏_{k=ℓ}^{n+1}(1-ϖγ_k) Σ_{i=1}^{ℓ-1} γ_i^j + γ_ℓ^{j-1}/ϖ
    #[test]
    fn weighted_sum_recurrence(
        varpi in 0.05f64..5.0,
        frac in 0.01f64..0.999,
        alpha in 0.0f64..1.0,
        n in 1usize..40,
    ) {
        let s = StepSchedule::polynomial(frac / varpi, alpha).unwrap();
        for j in 1..=3 {
            let jf = j as f64;
            let lhs: f64 = (1..=n + 1)
                .map(|i| s.contraction_product(varpi, i + 1, n + 1).unwrap() * s.gamma(i).unwrap().powf(jf))
                .sum();
            for l in 1..=n + 1 {
                let head: f64 = (1..l).map(|i| s.gamma(i).unwrap().powf(jf)).sum();
                let rhs = s.contraction_product(varpi, l, n + 1).unwrap() * head
                    + s.gamma(l).unwrap().powf(jf - 1.0) / varpi;
                prop_assert!(lhs <= rhs * (1.0 + 1e-12), "j={} l={} lhs={} rhs={}", j, l, lhs, rhs);
            }
        }
    }

    #[test]
    fn steps_nonincreasing_and_sums_nondecreasing(
        gamma1 in 1e-4f64..2.0,
        alpha in 0.0f64..1.0,
        n in 1usize..200,
    ) {
        let s = StepSchedule::polynomial(gamma1, alpha).unwrap();
        for k in 1..n {
            prop_assert!(s.gamma(k + 1).unwrap() <= s.gamma(k).unwrap());
            prop_assert!(s.gamma_sum(1, k + 1) >= s.gamma_sum(1, k));
        }
        prop_assert_eq!(s.gamma_sum(n + 1, n), 0.0);
    }

    #[test]
    fn cap_is_an_admissibility_check(
        gamma1 in 1e-3f64..2.0,
        alpha in 0.0f64..1.0,
        cap in 1e-3f64..1.0,
    ) {
        let capped = StepSchedule::polynomial(gamma1, alpha).unwrap().with_cap(cap);
        prop_assert_eq!(capped.is_ok(), gamma1 <= cap);
    }
}
