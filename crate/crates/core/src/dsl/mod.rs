//! Line-oriented pulse-sequence language.
//!
//! ```text
//! seq "fig3a"
//!   init nuclear m_I=+1/2
//!   laser red power=1mW duration=sweep(t_red, 1us..2ms, 30 log)
//!   rf freq=1.653MHz rabi=25kHz duration=100us
//!   readout
//! end
//! ```
//!
//! Quantities are a decimal number followed by a unit (`Hz kHz MHz`,
//! `ns us ms s`, `nW uW mW W`, `mT T`) and are stored in base units. Sweeps
//! are declared either inline as `sweep(name, start..stop, count [lin|log])`
//! or on their own line as `sweep name start..stop count [lin|log]`, and
//! referenced elsewhere as `$name`.

mod parse;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::spin::{HalfInt, Isotope};

pub use parse::{parse, parse_quantity};
pub use serialize::{format_quantity, serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Frequency,
    Time,
    Power,
    Field,
}

impl Dimension {
    /// `(symbol, decimal exponent)` from smallest to largest.
    pub(crate) fn units(self) -> &'static [(&'static str, i32)] {
        match self {
            Dimension::Frequency => &[("Hz", 0), ("kHz", 3), ("MHz", 6)],
            Dimension::Time => &[("ns", -9), ("us", -6), ("ms", -3), ("s", 0)],
            Dimension::Power => &[("nW", -9), ("uW", -6), ("mW", -3), ("W", 0)],
            Dimension::Field => &[("mT", -3), ("T", 0)],
        }
    }

    pub fn base_unit(self) -> &'static str {
        match self {
            Dimension::Frequency => "Hz",
            Dimension::Time => "s",
            Dimension::Power => "W",
            Dimension::Field => "T",
        }
    }

    pub(crate) fn lookup(unit: &str) -> Option<(Dimension, i32)> {
        if unit == "µs" {
            return Some((Dimension::Time, -6));
        }
        [Dimension::Frequency, Dimension::Time, Dimension::Power, Dimension::Field]
            .into_iter()
            .find_map(|d| d.units().iter().find(|(s, _)| *s == unit).map(|&(_, e)| (d, e)))
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Frequency => "frequency",
            Dimension::Time => "time",
            Dimension::Power => "power",
            Dimension::Field => "magnetic field",
        })
    }
}

/// A quantity slot: either a fixed value in base units or a sweep reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Fixed(f64),
    Sweep(String),
}

impl Value {
    pub fn fixed(&self) -> Option<f64> {
        match self {
            Value::Fixed(v) => Some(*v),
            Value::Sweep(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaserColor {
    Red,
    Green,
}

impl LaserColor {
    pub fn keyword(self) -> &'static str {
        match self {
            LaserColor::Red => "red",
            LaserColor::Green => "green",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    InitNuclear { target: HalfInt },
    Laser { color: LaserColor, power: Value, duration: Value },
    Rf { frequency: Value, rabi: Value, duration: Value },
    Wait { duration: Value },
    Readout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridKind {
    Lin,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDecl {
    pub name: String,
    pub dimension: Dimension,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub kind: GridKind,
}

impl SweepDecl {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        match n {
            0 => Vec::new(),
            1 => vec![self.start],
            _ => (0..n)
                .map(|i| {
                    if i == 0 {
                        return self.start;
                    }
                    if i == n - 1 {
                        return self.stop;
                    }
                    let frac = i as f64 / (n - 1) as f64;
                    match self.kind {
                        GridKind::Lin => self.start + (self.stop - self.start) * frac,
                        GridKind::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * frac).exp(),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub name: String,
    pub instructions: Vec<Instruction>,
    pub sweeps: Vec<SweepDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    UnknownKeyword,
    MalformedQuantity,
    UnitMismatch,
    Structure,
    DuplicateSweep,
    Syntax,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("program has {0} sweep dimensions, at most 2 are supported")]
    TooManySweeps(usize),
    #[error("sweep `{0}` has an empty grid")]
    EmptyGrid(String),
    #[error("m_I = {target} is not a level of {isotope:?}")]
    InvalidTarget { target: HalfInt, isotope: crate::spin::IsotopeKind },
    #[error("instruction {index} still references sweep `{name}`")]
    UnresolvedSweep { index: usize, name: String },
}

/// One point of a sweep expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub coordinates: Vec<(String, f64)>,
    pub program: PulseProgram,
}

impl PulseProgram {
    pub fn is_concrete(&self) -> bool {
        self.sweeps.is_empty()
    }

    pub fn init_targets(&self) -> impl Iterator<Item = HalfInt> + '_ {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::InitNuclear { target } => Some(*target),
            _ => None,
        })
    }

    pub fn validate_for(&self, isotope: &Isotope) -> Result<(), ProgramError> {
        for target in self.init_targets() {
            if !isotope.has_level(target) {
                return Err(ProgramError::InvalidTarget { target, isotope: isotope.kind() });
            }
        }
        Ok(())
    }

    fn substitute(&self, bindings: &[(String, f64)]) -> PulseProgram {
        let resolve = |v: &Value| match v {
            Value::Sweep(name) => bindings
                .iter()
                .find(|(n, _)| n == name)
                .map(|&(_, x)| Value::Fixed(x))
                .unwrap_or_else(|| v.clone()),
            Value::Fixed(_) => v.clone(),
        };
        let instructions = self
            .instructions
            .iter()
            .map(|ins| match ins {
                Instruction::Laser { color, power, duration } => {
                    Instruction::Laser { color: *color, power: resolve(power), duration: resolve(duration) }
                }
                Instruction::Rf { frequency, rabi, duration } => {
                    Instruction::Rf { frequency: resolve(frequency), rabi: resolve(rabi), duration: resolve(duration) }
                }
                Instruction::Wait { duration } => Instruction::Wait { duration: resolve(duration) },
                other => other.clone(),
            })
            .collect();
        PulseProgram { name: self.name.clone(), instructions, sweeps: Vec::new() }
    }
}

/// Cartesian product of the declared sweeps, row-major with the first
/// declared sweep outermost.
pub fn expand_sweeps(program: &PulseProgram) -> Result<Vec<SweepPoint>, ProgramError> {
    if program.sweeps.len() > 2 {
        return Err(ProgramError::TooManySweeps(program.sweeps.len()));
    }
    let grids: Vec<(String, Vec<f64>)> = program
        .sweeps
        .iter()
        .map(|s| {
            let v = s.values();
            if v.is_empty() {
                Err(ProgramError::EmptyGrid(s.name.clone()))
            } else {
                Ok((s.name.clone(), v))
            }
        })
        .collect::<Result<_, _>>()?;

    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, values) in &grids {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push((name.clone(), x));
                    p
                })
            })
            .collect();
    }
    Ok(points
        .into_iter()
        .map(|coords| SweepPoint { program: program.substitute(&coords), coordinates: coords })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(name: &str, start: f64, stop: f64, count: usize, kind: GridKind) -> SweepDecl {
        SweepDecl { name: name.into(), dimension: Dimension::Time, start, stop, count, kind }
    }

    #[test]
    fn log_grid_is_geometric() {
        let v = sweep("t", 1e-6, 1e-3, 4, GridKind::Log).values();
        let expected = [1e-6, 1e-5, 1e-4, 1e-3];
        for (a, b) in v.iter().zip(expected) {
            assert!((a / b - 1.0).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(sweep("t", 2.0, 5.0, 1, GridKind::Lin).values(), vec![2.0]);
        assert_eq!(sweep("t", 0.0, 3.0, 4, GridKind::Lin).values(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn expansion_order_and_counts() {
        let base = PulseProgram {
            name: "x".into(),
            instructions: vec![
                Instruction::InitNuclear { target: HalfInt::ZERO },
                Instruction::Laser { color: LaserColor::Red, power: Value::Fixed(1e-3), duration: Value::Sweep("t".into()) },
                Instruction::Rf { frequency: Value::Sweep("f".into()), rabi: Value::Fixed(25e3), duration: Value::Fixed(2e-5) },
                Instruction::Readout,
            ],
            sweeps: vec![
                sweep("t", 0.0, 1e-3, 30, GridKind::Lin),
                SweepDecl { dimension: Dimension::Frequency, ..sweep("f", 1e6, 2e6, 41, GridKind::Lin) },
            ],
        };
        let pts = expand_sweeps(&base).unwrap();
        assert_eq!(pts.len(), 1230);
        assert_eq!(pts[0].coordinates[0].1, 0.0);
        assert_eq!(pts[1].coordinates[0].1, 0.0);
        assert!((pts[41].coordinates[0].1 - 1e-3 / 29.0).abs() < 1e-18);
        assert!(pts.iter().all(|p| p.program.is_concrete()));

        let single = PulseProgram { sweeps: vec![], instructions: vec![Instruction::Readout], name: "s".into() };
        assert_eq!(expand_sweeps(&single).unwrap().len(), 1);

        let mut empty = base.clone();
        empty.sweeps[0].count = 0;
        assert_eq!(expand_sweeps(&empty), Err(ProgramError::EmptyGrid("t".into())));

        let mut three = base;
        three.sweeps.push(sweep("w", 0.0, 1.0, 2, GridKind::Lin));
        assert_eq!(expand_sweeps(&three), Err(ProgramError::TooManySweeps(3)));
    }
}
