use nvsim::fit::{fit, numeric_jacobian, ModelFunction};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A model, true parameters, the x grid and the per-parameter scale used to
/// judge recovery (the amplitude for offsets, the value itself otherwise).
#[derive(Debug, Clone)]
struct Case {
    model: ModelFunction,
    truth: Vec<f64>,
    xs: Vec<f64>,
    scale: Vec<f64>,
}

fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn exp_case() -> impl Strategy<Value = Case> {
    (0.1f64..10.0, prop::bool::ANY, 1e-5f64..1.0, -1.0f64..1.0).prop_map(|(a, neg, tau, c)| {
        let a = if neg { -a } else { a };
        Case { model: ModelFunction::exp_decay(), truth: vec![a, tau, c], xs: lin(0.0, 5.0 * tau, 60), scale: vec![a.abs(), tau, a.abs()] }
    })
}

fn lorentzian_case() -> impl Strategy<Value = Case> {
    (0.05f64..1.0, 1e6f64..1e7, 1e4f64..1e5, 0.0f64..0.1).prop_map(|(a, x0, w, c)| Case {
        model: ModelFunction::lorentzian(),
        truth: vec![a, x0, w, c],
        xs: lin(x0 - 5.0 * w, x0 + 5.0 * w, 101),
        scale: vec![a, w, w, a],
    })
}

fn rabi_line_case() -> impl Strategy<Value = Case> {
    (0.3f64..1.0, 1e6f64..1e7, 5e3f64..5e4, 0.8f64..1.2, 0.0f64..0.1).prop_map(|(a, x0, rabi, k, c)| {
        let t = 0.5 / rabi * k;
        Case {
            model: ModelFunction::detuned_rabi_line(t),
            truth: vec![a, x0, rabi, c],
            xs: lin(x0 - 4.0 * rabi, x0 + 4.0 * rabi, 121),
            scale: vec![a, rabi, rabi, a],
        }
    })
}

fn damped_case() -> impl Strategy<Value = Case> {
    (0.3f64..1.0, 2.0f64..50.0, 5e3f64..5e4, 0.0f64..0.1).prop_map(|(a, periods, rabi, c)| Case {
        model: ModelFunction::damped_rabi(),
        truth: vec![a, periods / rabi, rabi, c],
        xs: lin(0.0, 6.0 / rabi, 200),
        scale: vec![a, periods / rabi, rabi, a],
    })
}

fn saturable_case() -> impl Strategy<Value = Case> {
    (1e-3f64..10.0, 1e-2f64..1e2).prop_map(|(k, ps)| Case {
        model: ModelFunction::saturable_power(),
        truth: vec![k, ps],
        xs: (0..31).map(|i| ps * 10f64.powf(-3.0 + 0.2 * i as f64)).collect(),
        scale: vec![k, ps],
    })
}

fn any_case() -> impl Strategy<Value = Case> {
    prop_oneof![exp_case(), lorentzian_case(), rabi_line_case(), damped_case(), saturable_case()]
}

fn clean(c: &Case) -> Vec<f64> {
    c.xs.iter().map(|&x| c.model.eval(x, &c.truth)).collect()
}

fn round_trip(strategy: impl Strategy<Value = Case>) {
    let mut runner = TestRunner::new(Config { cases: 64, ..Config::default() });
    runner
        .run(&strategy, |c| {
            let r = fit(&c.model, &c.xs, &clean(&c), None, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for i in 0..c.truth.len() {
                let err = (r.estimates[i] - c.truth[i]).abs() / c.scale[i];
                prop_assert!(err < 1e-3, "{} {}: {} vs {}", c.model, r.param_names[i], r.estimates[i], c.truth[i]);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn round_trip_exp_decay() {
    round_trip(exp_case());
}

#[test]
fn round_trip_lorentzian() {
    round_trip(lorentzian_case());
}

#[test]
fn round_trip_detuned_rabi_line() {
    round_trip(rabi_line_case());
}

#[test]
fn round_trip_damped_rabi() {
    round_trip(damped_case());
}

#[test]
fn round_trip_saturable_power() {
    round_trip(saturable_case());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_does_not_matter(c in any_case(), seed in 0u64..1000) {
        let ys = clean(&c);
        let n = c.xs.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
        let xs2: Vec<f64> = idx.iter().map(|&i| c.xs[i]).collect();
        let ys2: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        let a = fit(&c.model, &c.xs, &ys, None, None).unwrap();
        let b = fit(&c.model, &xs2, &ys2, None, None).unwrap();
        prop_assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn jacobian_matches_central_difference(c in any_case(), pick in 0usize..1000) {
        let x = c.xs[pick % c.xs.len()];
        let j = numeric_jacobian(&c.model, &[x], &c.truth);
        // Forward differences carry curvature error, so judge against the
        // largest scaled sensitivity anywhere on the grid.
        let norm = numeric_jacobian(&c.model, &c.xs, &c.truth)
            .iter()
            .flat_map(|row| row.iter().zip(&c.scale).map(|(d, s)| (d * s).abs()))
            .fold(1e-300, f64::max);
        for k in 0..c.truth.len() {
            let h = 1e-5 * c.scale[k];
            let mut p = c.truth.clone();
            p[k] += h;
            let up = c.model.eval(x, &p);
            p[k] -= 2.0 * h;
            let down = c.model.eval(x, &p);
            let central = (up - down) / (2.0 * h);
            prop_assert!(((j[0][k] - central) * c.scale[k]).abs() <= 1e-5 * norm, "{} param {k}: {} vs {central}", c.model, j[0][k]);
        }
    }
}

/// Standard errors against the scatter of 200 noisy refits.
fn noise_sanity(c: Case, sigma: f64) {
    let ys0 = clean(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.0, sigma).unwrap();
    let sig = vec![sigma; c.xs.len()];
    let reps = 200;
    let p = c.truth.len();
    let mut est = vec![Vec::with_capacity(reps); p];
    let mut se = vec![0.0; p];
    for _ in 0..reps {
        let ys: Vec<f64> = ys0.iter().map(|y| y + noise.sample(&mut rng)).collect();
        let r = fit(&c.model, &c.xs, &ys, Some(&sig), Some(&c.truth)).unwrap();
        for k in 0..p {
            est[k].push(r.estimates[k]);
            se[k] += r.std_errors[k] / reps as f64;
        }
    }
    for k in 0..p {
        let m = est[k].iter().sum::<f64>() / reps as f64;
        let sd = (est[k].iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let ratio = se[k] / sd;
        assert!((0.5..=2.0).contains(&ratio), "{} param {k}: stderr {} vs scatter {sd}", c.model, se[k]);
    }
}

#[test]
fn standard_errors_track_scatter() {
    let mut runner = TestRunner::deterministic();
    for strategy in [exp_case().boxed(), lorentzian_case().boxed(), rabi_line_case().boxed(), damped_case().boxed()] {
        let c = strategy.new_tree(&mut runner).unwrap().current();
        noise_sanity(c, 0.01);
    }
    let c = saturable_case().new_tree(&mut runner).unwrap().current();
    let scale = c.model.eval(c.xs[15], &c.truth);
    noise_sanity(c, 0.01 * scale);
}
