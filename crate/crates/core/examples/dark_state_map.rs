//! Spectrum around the N15 lines after red pre-pulses of growing length; the
//! bright line fades while the dark line grows. Line amplitudes are turned
//! back into charge populations.

use nvsim::config::RunConfig;
use nvsim::kinetics::{evolve_populations, Laser};
use nvsim::qnd::{deduce_populations, RfPulse};
use nvsim::spin::{DarkBranch, HalfInt};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig { n_shots: 2000, ..RunConfig::default() };
    let exp = cfg.experiment()?;
    let sys = &exp.system;
    let bright = sys.transitions(sys.bright())[0].frequency_mhz * 1e6;
    let dark = sys.transitions(sys.dark(DarkBranch::Plus))[0].frequency_mhz * 1e6;
    let reds = [0.0, 50e-6, 100e-6, 200e-6, 400e-6, 1e-3];
    let pulse = RfPulse { rabi_hz: 25e3, duration_s: 100e-6 };
    let rows = exp.map2d(HalfInt::HALF, &[bright, dark], &reds, cfg.lasers.red_power_mw, pulse, cfg.n_shots, cfg.seed)?;

    let start = exp.initial_populations()?;
    println!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "red_us", "bright", "dark", "p_B", "p_D", "true p_D");
    for (l, row) in reds.iter().zip(&rows) {
        let d = deduce_populations(row[0].flip_fraction, row[1].flip_fraction, cfg.readout.fidelity)?;
        let truth = evolve_populations(start, &cfg.kinetics, Laser::Red, cfg.lasers.red_power_mw, *l);
        println!(
            "{:>8.0} {:>8.4} {:>8.4} {:>8.3} {:>8.3} {:>8.3}",
            l * 1e6,
            row[0].flip_fraction,
            row[1].flip_fraction,
            d.p_bright,
            d.p_dark,
            truth.p_dark
        );
    }
    Ok(())
}
