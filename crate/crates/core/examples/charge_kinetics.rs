//! Charge-state populations: green equilibrium and the red-light decay of the
//! bright state, aligned and misaligned.

use nvsim::kinetics::{evolve_populations, steady_state, ChargeKinetics, ChargePopulations, Laser};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kin = ChargeKinetics::default();
    let ss = steady_state(&kin, Laser::Green, 1.0)?;
    let (bd, db) = kin.rates(Laser::Green, 1.0);
    println!("green: p_bright {:.3}  p_dark {:.3}  R_BD/R_DB {:.4}", ss.p_bright, ss.p_dark, bd / db);

    let tilted = kin.with_misalignment(120.0 / 184.0);
    println!("{:>8} {:>10} {:>10}", "t_us", "aligned", "tilted");
    for i in 0..=10 {
        let t = i as f64 * 50e-6;
        let a = evolve_populations(ChargePopulations::BRIGHT, &kin, Laser::Red, 1.0, t);
        let b = evolve_populations(ChargePopulations::BRIGHT, &tilted, Laser::Red, 1.0, t);
        println!("{:>8.0} {:>10.4} {:>10.4}", t * 1e6, a.p_bright, b.p_bright);
    }
    Ok(())
}
