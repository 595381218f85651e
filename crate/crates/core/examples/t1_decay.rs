//! Nuclear polarization decay in the dark and bright charge states, measured
//! by waiting between initialization and readout, then fitted.

use nvsim::config::RunConfig;
use nvsim::dsl::{Instruction, PulseProgram, Value};
use nvsim::fit::{fit, ModelFunction};
use nvsim::kinetics::ChargePopulations;
use nvsim::qnd::Experiment;
use nvsim::spin::HalfInt;

fn program(wait_s: f64, red_s: f64) -> PulseProgram {
    let mut instructions = vec![Instruction::InitNuclear { target: HalfInt::HALF }];
    if red_s > 0.0 {
        instructions.push(Instruction::Laser {
            color: nvsim::dsl::LaserColor::Red,
            power: Value::Fixed(1e-3),
            duration: Value::Fixed(red_s),
        });
    }
    instructions.push(Instruction::Wait { duration: Value::Fixed(wait_s) });
    instructions.push(Instruction::Readout);
    PulseProgram { name: "t1".into(), instructions, sweeps: Vec::new() }
}

fn decay(exp: &Experiment, waits: &[f64], red_s: f64, shots: u64) -> Result<f64, Box<dyn std::error::Error>> {
    let programs: Vec<_> = waits.iter().map(|&w| program(w, red_s)).collect();
    let res = exp.run_grid(&programs, shots, 5)?;
    let ys: Vec<f64> = res.iter().map(|r| r.flip_fraction).collect();
    let sig: Vec<f64> = res.iter().map(|r| r.stderr.max(1e-3)).collect();
    let r = fit(&ModelFunction::exp_decay(), waits, &ys, Some(&sig), None)?;
    Ok(r.param("tau").unwrap_or(f64::NAN))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let shots = 3000;

    let mut exp = cfg.experiment()?;
    exp.options.initial_populations = Some(ChargePopulations::BRIGHT);
    let dark_waits: Vec<f64> = (0..16).map(|i| i as f64 * 20e-3).collect();
    let tau_dark = decay(&exp, &dark_waits, 2e-3, shots)?;

    exp.options.initial_populations = Some(ChargePopulations::BRIGHT);
    let bright_waits: Vec<f64> = (0..16).map(|i| i as f64 * 200e-3).collect();
    let tau_bright = decay(&exp, &bright_waits, 0.0, shots)?;

    println!("dark   T1 {:.1} ms (configured {:.1} ms)", tau_dark * 1e3, cfg.spin.dark.t1_s * 1e3);
    println!("bright T1 {:.1} ms (configured {:.1} ms)", tau_bright * 1e3, cfg.spin.bright.t1_s * 1e3);
    Ok(())
}
