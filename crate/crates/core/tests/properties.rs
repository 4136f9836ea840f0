use kvfrac::domain::{build_rect_mesh, CrackPath, CrackedSpace};
use kvfrac::energy::viscous_increment;
use kvfrac::error::MeshError;
use kvfrac::stepper::{NewtonStats, StepState};
use kvfrac::{PowerLaw, SymTensor2};
use proptest::prelude::*;

fn tensor() -> impl Strategy<Value = SymTensor2> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| SymTensor2::new(a, b, c))
}

proptest! {
    #[test]
    fn inverse_law_is_monotone(p in 1.1..4.0f64, eps in 0.0..1.0f64, a in tensor(), b in tensor()) {
        let law = PowerLaw::new(p, eps).unwrap();
        let pairing = (law.g_inverse(&a) - law.g_inverse(&b)).dot(&(a - b));
        prop_assert!(pairing >= -1e-12 * (1.0 + a.norm_squared() + b.norm_squared()));
    }

    #[test]
    fn fenchel_young_inequality(p in 1.1..4.0f64, a in tensor(), b in tensor()) {
        let law = PowerLaw::new(p, 0.0).unwrap();
        prop_assert!(law.phi(&a) + law.phi_star(&b) >= a.dot(&b) - 1e-10 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn viscous_increment_is_non_negative(
        p in 1.2..3.5f64,
        u in prop::collection::vec(-1.0..1.0f64, 32),
        du in prop::collection::vec(-1.0..1.0f64, 32),
    ) {
        let space = CrackedSpace::uncracked(&build_rect_mesh(1.0, 1.0, 3, 3).unwrap()).unwrap();
        let state = StepState {
            k: 1,
            t: 0.1,
            u,
            du,
            ddu: vec![0.0; 32],
            sigma: vec![SymTensor2::ZERO; space.num_elements()],
            stats: NewtonStats::default(),
        };
        let law = PowerLaw::new(p, 0.0).unwrap();
        prop_assert!(viscous_increment(&space, &state, &law, 0.1) >= 0.0);
    }

    #[test]
    fn release_times_must_not_decrease(times in prop::collection::vec(0.0..1.0f64, 4)) {
        let sorted = times.windows(2).all(|w| w[0] <= w[1]);
        let result = CrackPath::new(vec![1, 2, 3, 4, 5], times);
        match result {
            Ok(_) => prop_assert!(sorted),
            Err(MeshError::ReleaseNotMonotone { .. }) => prop_assert!(!sorted),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}
