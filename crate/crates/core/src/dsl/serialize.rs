use std::fmt::Write;

use super::{Dimension, GridKind, Instruction, PulseProgram, SweepDecl, Value};

/// Plain decimal text for `value·10^(-exponent)` without going through a
/// floating-point division, so parsing the text back with the same unit
/// yields the identical `f64`.
fn shifted_decimal(value: f64, exponent: i32) -> String {
    let sci = format!("{:e}", value.abs());
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    // value = 0.DIGITS × 10^(exp+1); in the unit it has `point` integer digits.
    let point = exp + 1 - exponent;
    let len = digits.len() as i32;
    let body = if point >= len {
        format!("{digits}{}", "0".repeat((point - len) as usize))
    } else if point > 0 {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    } else {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    };
    if value.is_sign_negative() && value != 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

/// Canonical text for a base-unit value: the largest unit in which the
/// magnitude is at least 1 (the smallest unit otherwise, the base unit for 0).
pub fn format_quantity(value: f64, dimension: Dimension) -> String {
    if value == 0.0 {
        return format!("0{}", dimension.base_unit());
    }
    let sci = format!("{:e}", value.abs());
    let leading: i32 = sci.split_once('e').expect("exponent").1.parse().expect("integer exponent");
    let units = dimension.units();
    let &(symbol, exponent) = units.iter().rev().find(|(_, e)| *e <= leading).unwrap_or(&units[0]);
    format!("{}{symbol}", shifted_decimal(value, exponent))
}

fn value_text(v: &Value, dim: Dimension) -> String {
    match v {
        Value::Fixed(x) => format_quantity(*x, dim),
        Value::Sweep(name) => format!("${name}"),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn sweep_line(s: &SweepDecl) -> String {
    let kind = match s.kind {
        GridKind::Lin => "lin",
        GridKind::Log => "log",
    };
    format!(
        "sweep {} {}..{} {} {kind}",
        s.name,
        format_quantity(s.start, s.dimension),
        format_quantity(s.stop, s.dimension),
        s.count
    )
}

/// Canonical LF-terminated text; sweeps are hoisted into declaration lines in
/// their declared order.
pub fn serialize(program: &PulseProgram) -> String {
    use Dimension::*;
    let mut out = String::new();
    writeln!(out, "seq {}", quote(&program.name)).unwrap();
    for s in &program.sweeps {
        writeln!(out, "  {}", sweep_line(s)).unwrap();
    }
    for ins in &program.instructions {
        let line = match ins {
            Instruction::InitNuclear { target } => {
                let t = target.to_string();
                let t = if target.twice() > 0 { format!("+{t}") } else { t };
                format!("init nuclear m_I={t}")
            }
            Instruction::Laser { color, power, duration } => format!(
                "laser {} power={} duration={}",
                color.keyword(),
                value_text(power, Power),
                value_text(duration, Time)
            ),
            Instruction::Rf { frequency, rabi, duration } => format!(
                "rf freq={} rabi={} duration={}",
                value_text(frequency, Frequency),
                value_text(rabi, Frequency),
                value_text(duration, Time)
            ),
            Instruction::Wait { duration } => format!("wait duration={}", value_text(duration, Time)),
            Instruction::Readout => "readout".to_string(),
        };
        writeln!(out, "  {line}").unwrap();
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn canonical_units() {
        assert_eq!(format_quantity(2e6, Dimension::Frequency), "2MHz");
        assert_eq!(format_quantity(2000e3, Dimension::Frequency), "2MHz");
        assert_eq!(format_quantity(4.654e6, Dimension::Frequency), "4.654MHz");
        assert_eq!(format_quantity(25e3, Dimension::Frequency), "25kHz");
        assert_eq!(format_quantity(0.5, Dimension::Frequency), "0.5Hz");
        assert_eq!(format_quantity(120e-6, Dimension::Time), "120us");
        assert_eq!(format_quantity(1e-9, Dimension::Time), "1ns");
        assert_eq!(format_quantity(1.5e-10, Dimension::Time), "0.15ns");
        assert_eq!(format_quantity(2.0, Dimension::Time), "2s");
        assert_eq!(format_quantity(1e-3, Dimension::Power), "1mW");
        assert_eq!(format_quantity(0.0, Dimension::Time), "0s");
        assert_eq!(format_quantity(1234.5, Dimension::Time), "1234.5s");
    }

    #[test]
    fn minimal_round_trip() {
        let text = "seq \"a\"\n init nuclear m_I=0\n rf freq=4.654MHz rabi=25kHz duration=20us\n readout\nend";
        let p = parse(text).unwrap();
        let canon = serialize(&p);
        assert_eq!(
            canon,
            "seq \"a\"\n  init nuclear m_I=0\n  rf freq=4.654MHz rabi=25kHz duration=20us\n  readout\nend\n"
        );
        assert_eq!(parse(&canon).unwrap(), p);
    }

    #[test]
    fn sweeps_preserved() {
        let p = parse(
            "seq \"m\"\ninit nuclear m_I=1/2\nlaser red power=1mW duration=sweep(t_red, 0..2ms, 30)\n\
             rf freq=sweep(f, 1.5MHz..2.7MHz, 41) rabi=25kHz duration=100us\nreadout\nend",
        )
        .unwrap();
        let canon = serialize(&p);
        assert!(canon.contains("sweep t_red 0s..2ms 30 lin"), "{canon}");
        assert!(canon.contains("sweep f 1.5MHz..2.7MHz 41 lin"), "{canon}");
        assert!(canon.contains("init nuclear m_I=+1/2"));
        assert_eq!(parse(&canon).unwrap(), p);
    }
}
