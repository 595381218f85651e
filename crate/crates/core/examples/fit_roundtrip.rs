//! Generates noisy data from each fit model and fits it back.

use nvsim::fit::{fit, ModelFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(ModelFunction, Vec<f64>, Vec<f64>)> = vec![
        (ModelFunction::exp_decay(), vec![1.0, 120e-6, 0.05], (0..60).map(|i| i as f64 * 10e-6).collect()),
        (ModelFunction::lorentzian(), vec![0.4, 1.653e6, 40e3, 0.04], (0..81).map(|i| 1.5e6 + i as f64 * 4e3).collect()),
        (ModelFunction::detuned_rabi_line(20e-6), vec![0.6, 2.589e6, 25e3, 0.04], (0..81).map(|i| 2.489e6 + i as f64 * 2.5e3).collect()),
        (ModelFunction::damped_rabi(), vec![0.65, 60e-6, 25e3, 0.04], (0..101).map(|i| i as f64 * 1e-6).collect()),
        (ModelFunction::saturable_power(), vec![0.0167, 1.0], (0..31).map(|i| 10f64.powf(-3.0 + 0.2 * i as f64)).collect()),
    ];
    for (model, truth, xs) in cases {
        let clean: Vec<f64> = xs.iter().map(|&x| model.eval(x, &truth)).collect();
        let sigmas: Vec<f64> = clean.iter().map(|y| 0.01 * y.abs().max(1e-3)).collect();
        let ys: Vec<f64> = clean.iter().zip(&sigmas).map(|(y, s)| y + Normal::new(0.0, *s).unwrap().sample(&mut rng)).collect();
        let r = fit(&model, &xs, &ys, Some(&sigmas), None)?;
        println!("{:?}", model.kind);
        for (i, name) in r.param_names.iter().enumerate() {
            println!("  {name:<10} true {:>12.5e}  fit {:>12.5e} ± {:.2e}", truth[i], r.estimates[i], r.std_errors[i]);
        }
    }
    Ok(())
}
