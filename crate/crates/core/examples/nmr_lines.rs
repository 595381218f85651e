//! Nuclear transition frequencies of both isotopes in the bright and dark
//! charge states, and which dark lines are visible at a given field.
//!
//! ```text
//! cargo run --example nmr_lines -- 0.6
//! ```

use nvsim::config::RunConfig;
use nvsim::spin::{dark_line_visibility, IsotopeKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let field: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.6);
    for isotope in [IsotopeKind::N14, IsotopeKind::N15] {
        let mut cfg = RunConfig::default();
        cfg.spin.isotope = isotope;
        cfg.spin.field_t = field;
        let sys = cfg.system()?;
        println!("{isotope:?} at {field} T");
        for m in sys.manifolds() {
            for t in sys.transitions(m) {
                println!("  {:?} {:?}  m_I {} <-> {}  {:.4} MHz", m.kind(), m.branch(), t.m_from, t.m_to, t.frequency_mhz);
            }
        }
    }
    let visible = dark_line_visibility(field, RunConfig::default().spin.dark_visibility_threshold_t);
    println!("visible dark branches: {visible:?}");
    Ok(())
}
