//! Monte Carlo Rabi oscillation on the bright N15 line with imperfect
//! readout, compared with the closed-form contrast.

use nvsim::config::RunConfig;
use nvsim::kinetics::ChargePopulations;
use nvsim::qnd::expected_flip_fraction;
use nvsim::spin::HalfInt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig { n_shots: 4000, ..RunConfig::default() };
    let mut exp = cfg.experiment()?;
    exp.options.initial_populations = Some(ChargePopulations::from_dark(0.3));
    exp.options.p_pol = 1.0;

    let f_line = exp.system.transitions(exp.system.bright())[0].frequency_mhz * 1e6;
    let rabi = 25e3;
    let durations: Vec<f64> = (0..=20).map(|i| i as f64 * 2e-6).collect();
    let res = exp.rabi_scan(HalfInt::HALF, f_line, rabi, &durations, cfg.n_shots, cfg.seed)?;

    let fid = cfg.readout.fidelity;
    println!("baseline {:.4}  peak {:.4}", expected_flip_fraction(fid, 0.0, 0.0), expected_flip_fraction(fid, 0.7, 1.0));
    println!("{:>10} {:>10} {:>8}", "t_us", "flip", "stderr");
    for (t, r) in durations.iter().zip(&res) {
        println!("{:>10.1} {:>10.4} {:>8.4}", t * 1e6, r.flip_fraction, r.stderr);
    }
    Ok(())
}
