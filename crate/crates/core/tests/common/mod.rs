#![allow(dead_code)]

use nvsim::dsl::{Dimension, GridKind, Instruction, LaserColor, PulseProgram, SweepDecl, Value};
use nvsim::spin::HalfInt;
use proptest::prelude::*;

/// Positive magnitudes spanning the units of every dimension.
pub fn magnitude() -> impl Strategy<Value = f64> {
    (-9.0f64..6.0).prop_map(|e| 10f64.powf(e))
}

fn sweep_decl(name: String, dimension: Dimension) -> impl Strategy<Value = SweepDecl> {
    (magnitude(), magnitude(), 0usize..40, prop::bool::ANY).prop_map(move |(a, b, count, log)| SweepDecl {
        name: name.clone(),
        dimension,
        start: a.min(b),
        stop: a.max(b),
        count,
        kind: if log { GridKind::Log } else { GridKind::Lin },
    })
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    LaserPower,
    LaserDuration,
    RfFreq,
    RfRabi,
    RfDuration,
    Wait,
}

impl Slot {
    fn dimension(self) -> Dimension {
        match self {
            Slot::LaserPower => Dimension::Power,
            Slot::RfFreq | Slot::RfRabi => Dimension::Frequency,
            _ => Dimension::Time,
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Laser(bool),
    Rf,
    Wait,
}

fn fixed_value(slot: Slot) -> BoxedStrategy<f64> {
    match slot {
        Slot::RfFreq => magnitude().boxed(),
        _ => prop_oneof![1 => Just(0.0), 6 => magnitude()].boxed(),
    }
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![prop::bool::ANY.prop_map(Shape::Laser), Just(Shape::Rf), Just(Shape::Wait)]
}

fn pre_shape() -> impl Strategy<Value = Shape> {
    prop_oneof![prop::bool::ANY.prop_map(Shape::Laser), Just(Shape::Wait)]
}

fn slots(s: &Shape) -> Vec<Slot> {
    match s {
        Shape::Laser(_) => vec![Slot::LaserPower, Slot::LaserDuration],
        Shape::Rf => vec![Slot::RfFreq, Slot::RfRabi, Slot::RfDuration],
        Shape::Wait => vec![Slot::Wait],
    }
}

/// Valid programs: optional laser/wait lines, `init`, a body, `readout`.
/// About a third of the quantity slots become sweep references.
pub fn program() -> impl Strategy<Value = PulseProgram> {
    let name = "[ -~µ]{0,12}";
    let target = (-2i32..=2).prop_map(HalfInt::from_twice);
    (name, target, prop::collection::vec(pre_shape(), 0..3), prop::collection::vec(shape(), 0..6))
        .prop_flat_map(|(name, target, pre, body)| {
            let all: Vec<Slot> = pre.iter().chain(&body).flat_map(slots).collect();
            let values: Vec<BoxedStrategy<(f64, bool)>> =
                all.iter().map(|&s| (fixed_value(s), prop::bool::weighted(0.3)).boxed()).collect();
            (Just((name, target, pre, body, all)), values)
        })
        .prop_flat_map(|((name, target, pre, body, all), values)| {
            let decls: Vec<BoxedStrategy<SweepDecl>> = all
                .iter()
                .zip(&values)
                .enumerate()
                .filter(|(_, (_, v))| v.1)
                .map(|(i, (s, _))| sweep_decl(format!("s{i}"), s.dimension()).boxed())
                .collect();
            (Just((name, target, pre, body, all, values)), decls)
        })
        .prop_map(|((name, target, pre, body, all, values), sweeps)| {
            let mut vals = values.iter().enumerate().map(|(i, &(v, swept))| {
                if swept {
                    Value::Sweep(format!("s{i}"))
                } else {
                    Value::Fixed(v)
                }
            });
            let _ = all;
            let mut build = |s: &Shape| match s {
                Shape::Laser(red) => Instruction::Laser {
                    color: if *red { LaserColor::Red } else { LaserColor::Green },
                    power: vals.next().unwrap(),
                    duration: vals.next().unwrap(),
                },
                Shape::Rf => Instruction::Rf {
                    frequency: vals.next().unwrap(),
                    rabi: vals.next().unwrap(),
                    duration: vals.next().unwrap(),
                },
                Shape::Wait => Instruction::Wait { duration: vals.next().unwrap() },
            };
            let mut instructions: Vec<Instruction> = pre.iter().map(&mut build).collect();
            instructions.push(Instruction::InitNuclear { target });
            instructions.extend(body.iter().map(&mut build));
            instructions.push(Instruction::Readout);
            PulseProgram { name, instructions, sweeps }
        })
}
