use nvsim::config::RunConfig;
use nvsim::dsl::{Instruction, LaserColor, PulseProgram, Value};
use nvsim::kinetics::{evolve_populations, ChargePopulations, Laser};
use nvsim::qnd::{rf_program, ChargeState, Experiment, ExperimentResult, RfPulse};
use nvsim::readout::ReadoutModel;
use nvsim::spin::{HalfInt, Isotope, Relaxation, SpinSystem, DARK_HYPERFINE_PRODUCT_N15_MHZ};
use proptest::prelude::*;

const BRIGHT_N15_HZ: f64 = 2.58936e6;

fn default_experiment() -> Experiment {
    RunConfig::default().experiment().unwrap()
}

/// N15 with nuclear T1 pushed out of reach.
fn no_t1(fidelity: f64) -> Experiment {
    let bright = Relaxation::new(1e9, 1.6).unwrap();
    let dark = Relaxation::new(1e9, 6e-6).unwrap();
    let system = SpinSystem::with_dark_pair(Isotope::n15(), 0.6, DARK_HYPERFINE_PRODUCT_N15_MHZ, bright, dark).unwrap();
    let mut e = default_experiment();
    e.system = system;
    e.readout = ReadoutModel::bernoulli(fidelity).unwrap();
    e
}

fn laser(color: LaserColor, power_w: f64, duration_s: f64) -> Instruction {
    Instruction::Laser { color, power: Value::Fixed(power_w), duration: Value::Fixed(duration_s) }
}

fn program(instructions: Vec<Instruction>) -> PulseProgram {
    PulseProgram { name: "t".into(), instructions, sweeps: Vec::new() }
}

fn within(r: &ExperimentResult, expected: f64, k: f64) -> bool {
    let sigma = (expected * (1.0 - expected) / r.n_shots as f64).sqrt().max(1e-4);
    (r.flip_fraction - expected).abs() <= k * sigma
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn same_seed_same_result_any_thread_count(seed in any::<u64>(), point in 0u64..1000, red_us in 0.0f64..400.0) {
        let e = default_experiment();
        let p = {
            let mut p = rf_program(HalfInt::HALF, 1.653e6, RfPulse { rabi_hz: 25e3, duration_s: 100e-6 });
            p.instructions.insert(1, laser(LaserColor::Red, 1e-3, red_us * 1e-6));
            p
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| e.run_point(&p, 400, seed, point).unwrap())
        };
        let one = run(1);
        prop_assert_eq!(one, run(4));
        prop_assert_eq!(one, e.run_point(&p, 400, seed, point).unwrap());
        let records = e.run_shots(&p, 400, seed, point).unwrap();
        prop_assert_eq!(ExperimentResult::from_records(&records), one);
        prop_assert!(records.iter().enumerate().all(|(s, r)| r.rng_stream_id == point * 400 + s as u64));
    }

    #[test]
    fn stream_depends_only_on_point_and_shot(seed in any::<u64>()) {
        // A point computed alone equals the same point inside a grid.
        let e = default_experiment();
        let ps: Vec<_> = [2.0e6, 2.3e6, BRIGHT_N15_HZ]
            .iter()
            .map(|&f| rf_program(HalfInt::HALF, f, RfPulse { rabi_hz: 25e3, duration_s: 20e-6 }))
            .collect();
        let grid = e.run_grid(&ps, 300, seed).unwrap();
        prop_assert_eq!(grid[2], e.run_point(&ps[2], 300, seed, 2).unwrap());
    }

    #[test]
    fn without_rf_only_init_and_readout_errors_remain(
        f in 0.8f64..1.0,
        green_us in 0.0f64..30.0,
        red_us in 0.0f64..30.0,
        seed in any::<u64>(),
    ) {
        // Charge jumps under both lasers, no nuclear drive: every reported
        // flip is a failed initialization or readout.
        let e = no_t1(f);
        let p = program(vec![
            Instruction::InitNuclear { target: HalfInt::HALF },
            laser(LaserColor::Green, 1e-3, green_us * 1e-6),
            laser(LaserColor::Red, 1e-3, red_us * 1e-6),
            Instruction::Wait { duration: Value::Fixed(5e-6) },
            Instruction::Readout,
        ]);
        let r = e.run_sequence(&p, 4000, seed).unwrap();
        prop_assert_eq!(r.true_flips, 0);
        prop_assert!(within(&r, 1.0 - f * f, 4.0), "{} vs {}", r.flip_fraction, 1.0 - f * f);
    }
}

#[test]
fn rabi_trace_matches_closed_form() {
    let e = default_experiment();
    let durations: Vec<f64> = (0..20).map(|i| i as f64 * 5e-6).collect();
    let mc = e.rabi_scan(HalfInt::HALF, BRIGHT_N15_HZ, 25e3, &durations, 4000, 9).unwrap();
    let mut worst: f64 = 0.0;
    for (t, r) in durations.iter().zip(&mc) {
        let p = rf_program(HalfInt::HALF, BRIGHT_N15_HZ, RfPulse { rabi_hz: 25e3, duration_s: *t });
        let a = e.analytic_flip_fraction(&p).unwrap();
        let sigma = (a * (1.0 - a) / r.n_shots as f64).sqrt();
        worst = worst.max((r.flip_fraction - a).abs() / sigma);
    }
    assert!(worst <= 4.0, "worst deviation {worst} sigma");
}

#[test]
fn charge_marginals_follow_master_equation() {
    let e = default_experiment();
    for (i, red_s) in [0.0, 60e-6, 120e-6, 400e-6].into_iter().enumerate() {
        let p = program(vec![
            Instruction::InitNuclear { target: HalfInt::HALF },
            laser(LaserColor::Red, 1e-3, red_s),
            Instruction::Readout,
        ]);
        let records = e.run_shots(&p, 8000, 21, i as u64).unwrap();
        let bright = records.iter().filter(|r| r.charge_at_readout == ChargeState::Bright).count() as f64 / records.len() as f64;
        let start = e.initial_populations().unwrap();
        let expected = evolve_populations(start, &e.kinetics, Laser::Red, 1.0, red_s).p_bright;
        let sigma = (expected * (1.0 - expected) / records.len() as f64).sqrt();
        assert!((bright - expected).abs() <= 4.0 * sigma, "red {red_s}: {bright} vs {expected}");
    }
}

#[test]
fn nuclear_relaxation_during_wait() {
    // Relaxation replaces the level by a uniform draw, so the true flip
    // probability after t is (1 − e^(−t/T1))·(1 − 1/levels).
    let f: f64 = 0.98;
    for (p_bright, t1) in [(1.0, 0.8), (0.0, 0.09)] {
        let mut e = default_experiment();
        e.options.initial_populations = Some(ChargePopulations::from_dark(1.0 - p_bright));
        e.readout = ReadoutModel::bernoulli(f).unwrap();
        let p = program(vec![
            Instruction::InitNuclear { target: HalfInt::HALF },
            Instruction::Wait { duration: Value::Fixed(t1) },
            Instruction::Readout,
        ]);
        let r = e.run_sequence(&p, 20_000, 5).unwrap();
        let p_flip = (1.0 - (-1f64).exp()) * 0.5;
        let expected = (1.0 - f * f) + (2.0 * f * f - 1.0) * p_flip;
        assert!(within(&r, expected, 4.0), "T1 {t1}: {} vs {expected}", r.flip_fraction);
    }
}

#[test]
fn charge_breakdown_is_consistent() {
    let e = default_experiment();
    let p = rf_program(HalfInt::HALF, BRIGHT_N15_HZ, RfPulse { rabi_hz: 25e3, duration_s: 20e-6 });
    let r = e.run_sequence(&p, 5000, 3).unwrap();
    let b = r.by_initial_charge;
    assert_eq!(b.bright.shots + b.dark.shots, r.n_shots);
    assert_eq!(b.bright.flips + b.dark.flips, r.flips);
    // Green steady state: 70 % bright at the start of each shot.
    let share = b.bright.shots as f64 / r.n_shots as f64;
    assert!((share - 0.7).abs() < 4.0 * (0.21f64 / 5000.0).sqrt(), "{share}");
    // Bright shots flip on the bright line; dark shots only show the baseline.
    assert!(b.bright.fraction() > 0.8 && b.dark.fraction() < 0.1, "{:?}", b);
}
