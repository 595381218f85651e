//! Parses a pulse program with a sweep, prints its canonical form and runs
//! every sweep point.
//!
//! ```text
//! cargo run --example pulse_program -- crates/core/sequences/fig3a.seq
//! ```

use nvsim::config::RunConfig;
use nvsim::dsl;

const DEMO: &str = r#"seq "red_sweep"
  init nuclear m_I=+1/2
  laser red power=1mW duration=sweep(t_red, 10us..1ms, 6 log)
  rf freq=1.653MHz rabi=25kHz duration=100us
  readout
end
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEMO.to_string(),
    };
    let program = match dsl::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    print!("{}", dsl::serialize(&program));

    let cfg = RunConfig { n_shots: 500, ..RunConfig::default() };
    let exp = cfg.experiment()?;
    for (coords, r) in exp.run_sweeps(&program, cfg.n_shots, cfg.seed)? {
        let at: Vec<String> = coords.iter().map(|(n, v)| format!("{n}={v:.3e}")).collect();
        println!("{:<40} {:.4} ± {:.4}", at.join(" "), r.flip_fraction, r.stderr);
    }
    Ok(())
}
