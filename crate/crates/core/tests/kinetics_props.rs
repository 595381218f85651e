use nvsim::kinetics::{evolve_populations, rate, steady_state, ChargeKinetics, ChargePopulations, Laser, RateLaw};
use proptest::prelude::*;

fn laser() -> impl Strategy<Value = Laser> {
    prop_oneof![Just(Laser::Red), Just(Laser::Green)]
}

fn kinetics() -> impl Strategy<Value = ChargeKinetics> {
    (1e-3f64..1.0, 1e-2f64..1e2, 1e-3f64..1.0, 1e-3f64..1.0, 0.0f64..0.1, 0.1f64..=1.0).prop_map(|(kr, ps, kgb, kgd, krd, eta)| {
        ChargeKinetics {
            red_bright_to_dark: RateLaw::new(kr, ps).unwrap(),
            green_bright_to_dark: RateLaw::new(kgb, 1.0).unwrap(),
            green_dark_to_bright: RateLaw::new(kgd, 1.0).unwrap(),
            red_dark_to_bright: RateLaw::new(krd, ps).unwrap(),
            misalignment_eta: eta,
        }
    })
}

proptest! {
    #[test]
    fn conserved_and_semigroup(kin in kinetics(), las in laser(), p in 1e-3f64..1e2, d0 in 0.0f64..=1.0, t1 in 0.0f64..1e-3, t2 in 0.0f64..1e-3) {
        let p0 = ChargePopulations::from_dark(d0);
        let a = evolve_populations(evolve_populations(p0, &kin, las, p, t1), &kin, las, p, t2);
        let b = evolve_populations(p0, &kin, las, p, t1 + t2);
        prop_assert!((a.p_dark - b.p_dark).abs() < 1e-12);
        prop_assert!((a.p_bright + a.p_dark - 1.0).abs() < 1e-12);
        prop_assert!((b.p_bright + b.p_dark - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relaxes_to_steady_state(kin in kinetics(), las in laser(), p in 1e-3f64..1e2, d0 in 0.0f64..=1.0) {
        let (bd, db) = kin.rates(las, p);
        let t = 50.0 / (bd + db) * 1e-6;
        let end = evolve_populations(ChargePopulations::from_dark(d0), &kin, las, p, t);
        let ss = steady_state(&kin, las, p).unwrap();
        prop_assert!((end.p_dark - ss.p_dark).abs() < 1e-9);
    }

    #[test]
    fn misalignment_scales_tau(kin in kinetics(), p in 1e-3f64..1e2, eta in 0.05f64..=1.0) {
        let aligned = kin.with_misalignment(1.0);
        let tilted = kin.with_misalignment(eta);
        let tau = |k: &ChargeKinetics| 1.0 / k.rates(Laser::Red, p).0;
        let ratio = tau(&tilted) / tau(&aligned);
        prop_assert!((ratio - 1.0 / eta).abs() < 1e-12 / eta);
    }

    #[test]
    fn log_slopes_at_the_ends(k in 1e-4f64..10.0, psat in 1e-3f64..1e3) {
        let law = RateLaw::new(k, psat).unwrap();
        let slope = |x: f64| {
            let h: f64 = 1e-5;
            (rate(&law, x * h.exp(), 1.0).ln() - rate(&law, x * (-h).exp(), 1.0).ln()) / (2.0 * h)
        };
        let lo = slope(psat / 1000.0);
        let hi = slope(psat * 1000.0);
        prop_assert!((1.99..=2.0).contains(&lo), "{lo}");
        prop_assert!((1.0..=1.01).contains(&hi), "{hi}");
    }
}

#[test]
fn default_green_equilibrium() {
    let kin = ChargeKinetics::default();
    for p in [0.01, 1.0, 100.0] {
        let ss = steady_state(&kin, Laser::Green, p).unwrap();
        assert!((ss.p_dark - 0.3).abs() < 1e-12);
    }
    let tau = 1.0 / kin.rates(Laser::Red, 1.0).0 * 1e-6;
    assert!((tau - 120e-6).abs() < 1e-15);
}
