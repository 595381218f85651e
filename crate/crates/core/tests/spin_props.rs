use nvsim::spin::{DarkBranch, Isotope, IsotopeKind, Relaxation, SpinSystem, GAMMA_N15_MHZ_PER_T, QUADRUPOLE_N14_MHZ};
use proptest::prelude::*;

fn relax() -> Relaxation {
    Relaxation::new(1.0, 1.0).unwrap()
}

fn system(iso: Isotope, field: f64, product: f64) -> SpinSystem {
    SpinSystem::with_dark_pair(iso, field, product, relax(), relax()).unwrap()
}

fn dark_lines(sys: &SpinSystem) -> Vec<f64> {
    let mut v: Vec<f64> = [DarkBranch::Plus, DarkBranch::Minus]
        .iter()
        .flat_map(|b| sys.transitions(sys.dark(*b)).into_iter().map(|t| t.frequency_mhz))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn isotope() -> impl Strategy<Value = Isotope> {
    prop_oneof![Just(Isotope::n14()), Just(Isotope::n15())]
}

proptest! {
    #[test]
    fn dark_union_is_mirror_symmetric(iso in isotope(), field in 0.0f64..2.0, product in -10.0f64..10.0) {
        let a = dark_lines(&system(iso, field, product));
        let b = dark_lines(&system(iso, field, -product));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn n14_pair_sum_and_difference(field in 0.0f64..3.0, product in -10.0f64..10.0) {
        let sys = system(Isotope::n14(), field, product);
        let q = QUADRUPOLE_N14_MHZ.abs();
        for m in sys.manifolds() {
            let c = -sys.isotope().gamma_mhz_per_t() * field + m.hyperfine_product_mhz();
            let t = sys.transitions(m);
            let (lo, hi) = (t[0].frequency_mhz, t[1].frequency_mhz);
            if c.abs() <= q {
                prop_assert!((lo + hi - 2.0 * q).abs() < 1e-9);
                prop_assert!((hi - lo - 2.0 * c.abs()).abs() < 1e-9);
            } else {
                prop_assert!((lo + hi - 2.0 * c.abs()).abs() < 1e-9);
                prop_assert!((hi - lo - 2.0 * q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn transitions_ignore_energy_offset(iso in isotope(), field in 0.0f64..2.0, product in -10.0f64..10.0, offset in -1e3f64..1e3) {
        let sys = system(iso, field, product);
        for m in sys.manifolds() {
            let shifted: Vec<(nvsim::spin::HalfInt, f64)> =
                sys.level_energies(m).into_iter().map(|(k, e)| (k, e + offset)).collect();
            let mut from_shifted: Vec<f64> = shifted.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
            from_shifted.sort_by(f64::total_cmp);
            for (t, f) in sys.transitions(m).iter().zip(&from_shifted) {
                prop_assert!((t.frequency_mhz - f).abs() < 1e-9 * (1.0 + offset.abs()));
            }
        }
    }

    #[test]
    fn n15_even_under_sign_flip_with_branch_swap(field in 0.0f64..3.0, product in -10.0f64..10.0) {
        let flipped = Isotope::new(IsotopeKind::N15, -GAMMA_N15_MHZ_PER_T, 0.0).unwrap();
        let a = system(Isotope::n15(), field, product);
        let b = system(flipped, field, product);
        let f = |s: &SpinSystem, br| s.transitions(s.dark(br))[0].frequency_mhz;
        prop_assert!((f(&a, DarkBranch::Plus) - f(&b, DarkBranch::Minus)).abs() < 1e-12);
        prop_assert!((f(&a, DarkBranch::Minus) - f(&b, DarkBranch::Plus)).abs() < 1e-12);
        let g = |s: &SpinSystem| s.transitions(s.bright())[0].frequency_mhz;
        prop_assert!((g(&a) - g(&b)).abs() < 1e-12);
    }
}

#[test]
fn reference_lines_at_0_6_tesla() {
    let n14 = system(Isotope::n14(), 0.6, -3.03);
    let bright: Vec<f64> = n14.transitions(n14.bright()).iter().map(|t| t.frequency_mhz).collect();
    // Q ± γB with Q = 4.654 MHz, γB = 1.84596 MHz.
    assert!((bright[0] - 2.80804).abs() < 1e-6);
    assert!((bright[1] - 6.49996).abs() < 1e-6);
    let n15 = system(Isotope::n15(), 0.6, -4.242);
    assert!((n15.transitions(n15.bright())[0].frequency_mhz - 2.58936).abs() < 1e-6);
    assert!((n15.transitions(n15.dark(DarkBranch::Plus))[0].frequency_mhz - 1.65264).abs() < 1e-6);
}
