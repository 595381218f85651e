use super::{
    Dimension, GridKind, Instruction, LaserColor, ParseError, ParseErrorKind, PulseProgram, SweepDecl, Value,
};
use crate::spin::HalfInt;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Eq,
    LParen,
    RParen,
    Comma,
    DotDot,
    Dollar,
    Slash,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn err(line: usize, col: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
    ParseError { line, col, kind, message: message.into() }
}

fn tokenize(line_no: usize, text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' || c == 'µ' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == 'µ') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || ((c == '-' || c == '+') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // A single '.' followed by a digit is a decimal point; ".." is a range.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err(line_no, col, ParseErrorKind::Syntax, "unterminated string")),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => return Err(err(line_no, i + 1, ParseErrorKind::Syntax, "invalid escape in string")),
                        };
                        s.push(esc);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let t = match c {
                '=' => Tok::Eq,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '$' => Tok::Dollar,
                '/' => Tok::Slash,
                '.' if chars.get(i + 1) == Some(&'.') => {
                    i += 1;
                    Tok::DotDot
                }
                other => {
                    return Err(err(line_no, col, ParseErrorKind::Syntax, format!("unexpected character `{other}`")))
                }
            };
            i += 1;
            t
        };
        out.push(Token { tok, col });
    }
    Ok(out)
}

/// Cursor over one line's tokens.
struct Line<'a> {
    no: usize,
    toks: &'a [Token],
    pos: usize,
    end_col: usize,
}

impl<'a> Line<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += usize::from(t.is_some());
        t
    }

    fn error(&self, kind: ParseErrorKind, msg: impl Into<String>) -> ParseError {
        err(self.no, self.col(), kind, msg)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(ParseErrorKind::Syntax, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s.as_str(), col))
            }
            _ => Err(self.error(ParseErrorKind::Syntax, format!("expected {what}"))),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            Err(self.error(ParseErrorKind::Syntax, "unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

/// A parsed `number unit` pair.
struct Quantity {
    value: f64,
    dimension: Dimension,
    col: usize,
}

fn scale(number: &str, exponent: i32) -> Option<f64> {
    // Decimal text shifted by the unit exponent parses to the correctly
    // rounded base-unit value, so `1MHz`, `1000kHz` and `1000000Hz` agree.
    format!("{number}e{exponent}").parse::<f64>().ok().filter(|v| v.is_finite())
}

fn quantity(line: &mut Line<'_>, inherit_unit: Option<&str>) -> Result<Quantity, ParseError> {
    let col = line.col();
    let number = match line.peek() {
        Some(Tok::Number(n)) => {
            line.pos += 1;
            n.clone()
        }
        _ => return Err(line.error(ParseErrorKind::MalformedQuantity, "malformed quantity: expected a number")),
    };
    let unit = match line.peek() {
        Some(Tok::Ident(u)) => {
            line.pos += 1;
            u.as_str()
        }
        _ => match inherit_unit {
            Some(u) => u,
            None => return Err(err(line.no, col, ParseErrorKind::MalformedQuantity, "malformed quantity: missing unit")),
        },
    };
    let (dimension, exponent) = super::Dimension::lookup(unit)
        .ok_or_else(|| err(line.no, col, ParseErrorKind::MalformedQuantity, format!("malformed quantity: unknown unit `{unit}`")))?;
    let value = scale(&number, exponent)
        .ok_or_else(|| err(line.no, col, ParseErrorKind::MalformedQuantity, "malformed quantity: number out of range"))?;
    Ok(Quantity { value, dimension, col })
}

fn unit_of<'l>(line: &'l Line<'_>, idx: usize) -> Option<&'l str> {
    match line.toks.get(idx).map(|t| &t.tok) {
        Some(Tok::Ident(u)) => Some(u.as_str()),
        _ => None,
    }
}

/// `start..stop count [lin|log]`; the start may omit its unit.
fn sweep_body(line: &mut Line<'_>, name: String) -> Result<SweepDecl, ParseError> {
    let start_pos = line.pos;
    // Look ahead for the stop unit so `0..2ms` works.
    let stop_unit = {
        let mut j = start_pos;
        while j < line.toks.len() && line.toks[j].tok != Tok::DotDot {
            j += 1;
        }
        unit_of(line, j + 2).map(str::to_string)
    };
    let start = quantity(line, stop_unit.as_deref())?;
    line.expect(Tok::DotDot, "`..` between sweep bounds")?;
    let stop = quantity(line, None)?;
    if start.dimension != stop.dimension {
        return Err(err(
            line.no,
            stop.col,
            ParseErrorKind::UnitMismatch,
            format!("unit mismatch: sweep bounds are {} and {}", start.dimension, stop.dimension),
        ));
    }
    if line.peek() == Some(&Tok::Comma) {
        line.pos += 1;
    }
    let count_col = line.col();
    let count = match line.next().map(|t| &t.tok) {
        Some(Tok::Number(n)) => n
            .parse::<usize>()
            .map_err(|_| err(line.no, count_col, ParseErrorKind::Syntax, "sweep count must be a nonnegative integer"))?,
        _ => return Err(err(line.no, count_col, ParseErrorKind::Syntax, "expected sweep point count")),
    };
    let kind = match line.peek() {
        Some(Tok::Ident(k)) if k == "lin" => {
            line.pos += 1;
            GridKind::Lin
        }
        Some(Tok::Ident(k)) if k == "log" => {
            line.pos += 1;
            GridKind::Log
        }
        Some(Tok::Ident(k)) => {
            return Err(line.error(ParseErrorKind::UnknownKeyword, format!("unknown grid kind `{k}` (expected lin or log)")))
        }
        _ => GridKind::Lin,
    };
    if kind == GridKind::Log && !(start.value > 0.0 && stop.value > 0.0) {
        return Err(err(line.no, start.col, ParseErrorKind::MalformedQuantity, "log sweep bounds must be positive"));
    }
    Ok(SweepDecl { name, dimension: start.dimension, start: start.value, stop: stop.value, count, kind })
}

struct State {
    sweeps: Vec<(SweepDecl, usize, usize)>,
    used: Vec<String>,
}

impl State {
    fn declare(&mut self, decl: SweepDecl, line: usize, col: usize) -> Result<(), ParseError> {
        if self.sweeps.iter().any(|(d, _, _)| d.name == decl.name) {
            return Err(err(line, col, ParseErrorKind::DuplicateSweep, format!("duplicate sweep `{}`", decl.name)));
        }
        self.sweeps.push((decl, line, col));
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Sign {
    Positive,
    NonNegative,
}

fn value(line: &mut Line<'_>, st: &mut State, want: Dimension, sign: Sign) -> Result<Value, ParseError> {
    let col = line.col();
    let line_no = line.no;
    let mismatch = |c: usize, got: Dimension| {
        err(line_no, c, ParseErrorKind::UnitMismatch, format!("unit mismatch: expected {want}, got {got}"))
    };
    let check_value = |c: usize, v: f64| -> Result<(), ParseError> {
        let ok = match sign {
            Sign::Positive => v > 0.0,
            Sign::NonNegative => v >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            let need = if matches!(sign, Sign::Positive) { "> 0" } else { "≥ 0" };
            Err(err(line_no, c, ParseErrorKind::MalformedQuantity, format!("{want} must be {need}")))
        }
    };
    match line.peek() {
        Some(Tok::Dollar) => {
            line.pos += 1;
            let (name, _) = line.ident("sweep name after `$`")?;
            let decl = st
                .sweeps
                .iter()
                .find(|(d, _, _)| d.name == name)
                .map(|(d, _, _)| d.clone())
                .ok_or_else(|| err(line.no, col, ParseErrorKind::Structure, format!("undeclared sweep `{name}`")))?;
            if decl.dimension != want {
                return Err(mismatch(col, decl.dimension));
            }
            for v in decl.values() {
                check_value(col, v)?;
            }
            st.used.push(name.to_string());
            Ok(Value::Sweep(name.to_string()))
        }
        Some(Tok::Ident(kw)) if kw == "sweep" => {
            line.pos += 1;
            line.expect(Tok::LParen, "`(` after sweep")?;
            let (name, name_col) = line.ident("sweep name")?;
            line.expect(Tok::Comma, "`,` after sweep name")?;
            let decl = sweep_body(line, name.to_string())?;
            line.expect(Tok::RParen, "`)` closing sweep")?;
            if decl.dimension != want {
                return Err(mismatch(col, decl.dimension));
            }
            for v in decl.values() {
                check_value(col, v)?;
            }
            st.declare(decl, line.no, name_col)?;
            st.used.push(name.to_string());
            Ok(Value::Sweep(name.to_string()))
        }
        _ => {
            let q = quantity(line, None)?;
            if q.dimension != want {
                return Err(mismatch(q.col, q.dimension));
            }
            check_value(q.col, q.value)?;
            Ok(Value::Fixed(q.value))
        }
    }
}

/// `key=value` arguments in any order; every key is required exactly once.
fn keyword_args(
    line: &mut Line<'_>,
    st: &mut State,
    spec: &[(&str, Dimension, Sign)],
) -> Result<Vec<Value>, ParseError> {
    let mut found: Vec<Option<Value>> = vec![None; spec.len()];
    while line.peek().is_some() {
        let (key, key_col) = line.ident("`key=value` argument")?;
        let idx = spec.iter().position(|(k, _, _)| *k == key).ok_or_else(|| {
            err(line.no, key_col, ParseErrorKind::UnknownKeyword, format!("unknown keyword `{key}`"))
        })?;
        if found[idx].is_some() {
            return Err(err(line.no, key_col, ParseErrorKind::Syntax, format!("duplicate argument `{key}`")));
        }
        line.expect(Tok::Eq, "`=`")?;
        let (_, dim, sign) = spec[idx];
        found[idx] = Some(value(line, st, dim, sign)?);
    }
    let end = line.end_col;
    found
        .into_iter()
        .zip(spec)
        .map(|(v, (k, _, _))| v.ok_or_else(|| err(line.no, end, ParseErrorKind::Syntax, format!("missing argument `{k}`"))))
        .collect()
}

fn half_int(line: &mut Line<'_>) -> Result<HalfInt, ParseError> {
    let col = line.col();
    let mut text = match line.next().map(|t| &t.tok) {
        Some(Tok::Number(n)) => n.clone(),
        _ => return Err(err(line.no, col, ParseErrorKind::Syntax, "expected m_I value")),
    };
    if line.peek() == Some(&Tok::Slash) {
        line.pos += 1;
        match line.next().map(|t| &t.tok) {
            Some(Tok::Number(d)) => {
                text.push('/');
                text.push_str(d);
            }
            _ => return Err(err(line.no, col, ParseErrorKind::Syntax, "expected denominator")),
        }
    }
    text.parse().map_err(|_| err(line.no, col, ParseErrorKind::Syntax, format!("invalid m_I value `{text}`")))
}

fn instruction(line: &mut Line<'_>, st: &mut State) -> Result<Option<Instruction>, ParseError> {
    use Dimension::*;
    let (kw, kw_col) = line.ident("instruction keyword")?;
    let ins = match kw {
        "init" => {
            let (what, c) = line.ident("`nuclear`")?;
            if what != "nuclear" {
                return Err(err(line.no, c, ParseErrorKind::UnknownKeyword, format!("unknown init target `{what}`")));
            }
            let (key, c) = line.ident("`m_I`")?;
            if key != "m_I" {
                return Err(err(line.no, c, ParseErrorKind::UnknownKeyword, format!("unknown keyword `{key}`")));
            }
            line.expect(Tok::Eq, "`=`")?;
            Instruction::InitNuclear { target: half_int(line)? }
        }
        "laser" => {
            let (color, c) = line.ident("laser color")?;
            let color = match color {
                "red" => LaserColor::Red,
                "green" => LaserColor::Green,
                other => {
                    return Err(err(line.no, c, ParseErrorKind::UnknownKeyword, format!("unknown laser color `{other}`")))
                }
            };
            let mut v = keyword_args(line, st, &[("power", Power, Sign::NonNegative), ("duration", Time, Sign::NonNegative)])?;
            let duration = v.pop().expect("two args");
            let power = v.pop().expect("two args");
            Instruction::Laser { color, power, duration }
        }
        "rf" => {
            let mut v = keyword_args(
                line,
                st,
                &[
                    ("freq", Frequency, Sign::Positive),
                    ("rabi", Frequency, Sign::NonNegative),
                    ("duration", Time, Sign::NonNegative),
                ],
            )?;
            let duration = v.pop().expect("three args");
            let rabi = v.pop().expect("three args");
            let frequency = v.pop().expect("three args");
            Instruction::Rf { frequency, rabi, duration }
        }
        "wait" => {
            let mut v = keyword_args(line, st, &[("duration", Time, Sign::NonNegative)])?;
            Instruction::Wait { duration: v.pop().expect("one arg") }
        }
        "readout" => Instruction::Readout,
        "sweep" => {
            let (name, name_col) = line.ident("sweep name")?;
            let decl = sweep_body(line, name.to_string())?;
            st.declare(decl, line.no, name_col)?;
            line.finish()?;
            return Ok(None);
        }
        other => {
            return Err(err(line.no, kw_col, ParseErrorKind::UnknownKeyword, format!("unknown keyword `{other}`")))
        }
    };
    line.finish()?;
    Ok(Some(ins))
}

/// Parses one `number unit` quantity such as `120us` into base units.
pub fn parse_quantity(text: &str, want: Dimension) -> Result<f64, ParseError> {
    let toks = tokenize(1, text)?;
    let mut line = Line { no: 1, toks: &toks, pos: 0, end_col: text.chars().count() + 1 };
    let q = quantity(&mut line, None)?;
    line.finish()?;
    if q.dimension != want {
        return Err(err(1, q.col, ParseErrorKind::UnitMismatch, format!("unit mismatch: expected {want}, got {}", q.dimension)));
    }
    Ok(q.value)
}

/// Parses `.seq` text (UTF-8, LF or CRLF line endings).
pub fn parse(text: &str) -> Result<PulseProgram, ParseError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let lines: Vec<(usize, &str)> =
        text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate().map(|(i, l)| (i + 1, l)).collect();
    let last_line = lines.len().max(1);

    let mut tokenized = Vec::with_capacity(lines.len());
    for &(no, l) in &lines {
        tokenized.push((no, tokenize(no, l)?, l.chars().count() + 1));
    }
    let mut it = tokenized.iter().filter(|(_, t, _)| !t.is_empty());

    let (no, toks, end_col) = it
        .next()
        .ok_or_else(|| err(1, 1, ParseErrorKind::Structure, "empty program: expected `seq \"name\"`"))?;
    let mut header = Line { no: *no, toks, pos: 0, end_col: *end_col };
    let (kw, c) = header.ident("`seq`")?;
    if kw != "seq" {
        return Err(err(*no, c, ParseErrorKind::UnknownKeyword, format!("expected `seq`, found `{kw}`")));
    }
    let name = match header.next().map(|t| &t.tok) {
        Some(Tok::Str(s)) => s.clone(),
        _ => return Err(err(*no, header.col(), ParseErrorKind::Syntax, "expected quoted program name")),
    };
    header.finish()?;

    let mut st = State { sweeps: Vec::new(), used: Vec::new() };
    let mut instructions = Vec::new();
    let mut positions = Vec::new();
    let mut end_line = None;
    for (no, toks, end_col) in it.by_ref() {
        if matches!(&toks[0].tok, Tok::Ident(k) if k == "end") {
            let l = Line { no: *no, toks, pos: 1, end_col: *end_col };
            l.finish()?;
            end_line = Some(*no);
            break;
        }
        let mut l = Line { no: *no, toks, pos: 0, end_col: *end_col };
        if let Some(ins) = instruction(&mut l, &mut st)? {
            positions.push((*no, toks[0].col));
            instructions.push(ins);
        }
    }
    let end_line = end_line.ok_or_else(|| err(last_line, 1, ParseErrorKind::Structure, "missing `end`"))?;
    if let Some((no, toks, _)) = it.next() {
        return Err(err(*no, toks[0].col, ParseErrorKind::Structure, "content after `end`"));
    }

    // Structural rules.
    let mut seen_init = false;
    for (i, ins) in instructions.iter().enumerate() {
        let (no, col) = positions[i];
        match ins {
            Instruction::InitNuclear { .. } => seen_init = true,
            Instruction::Rf { .. } if !seen_init => {
                return Err(err(no, col, ParseErrorKind::Structure, "rf pulse before `init nuclear`"));
            }
            Instruction::Readout if i + 1 != instructions.len() => {
                let (n2, c2) = positions[i + 1];
                return Err(err(n2, c2, ParseErrorKind::Structure, "`readout` must be the last instruction"));
            }
            _ => {}
        }
    }
    if !matches!(instructions.last(), Some(Instruction::Readout)) {
        return Err(err(end_line, 1, ParseErrorKind::Structure, "program must end with `readout`"));
    }
    for (decl, no, col) in &st.sweeps {
        if !st.used.contains(&decl.name) {
            return Err(err(*no, *col, ParseErrorKind::Structure, format!("sweep `{}` is never referenced", decl.name)));
        }
    }

    Ok(PulseProgram { name, instructions, sweeps: st.sweeps.into_iter().map(|(d, _, _)| d).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind_at(text: &str) -> (usize, usize, ParseErrorKind, String) {
        let e = parse(text).unwrap_err();
        (e.line, e.col, e.kind, e.message)
    }

    #[test]
    fn minimal_program() {
        let p = parse("seq \"a\"\n init nuclear m_I=0\n rf freq=4.654MHz rabi=25kHz duration=20us\n readout\nend").unwrap();
        assert_eq!(p.name, "a");
        assert_eq!(p.instructions.len(), 3);
        assert_eq!(
            p.instructions[1],
            Instruction::Rf { frequency: Value::Fixed(4.654e6), rabi: Value::Fixed(25e3), duration: Value::Fixed(20e-6) }
        );
    }

    #[test]
    fn crlf_comments_and_spacing() {
        let text = "# header\r\nseq \"b\"  # name\r\n  init   nuclear m_I = -1/2\r\n\r\n  wait duration = 3 ms\r\n  readout\r\nend\r\n";
        let p = parse(text).unwrap();
        assert_eq!(p.instructions[0], Instruction::InitNuclear { target: HalfInt::MINUS_HALF });
        assert_eq!(p.instructions[1], Instruction::Wait { duration: Value::Fixed(3e-3) });
    }

    #[test]
    fn unit_equivalences_are_exact() {
        let f = |q: &str| match &parse(&format!("seq \"u\"\ninit nuclear m_I=0\nrf freq={q} rabi=1kHz duration=1us\nreadout\nend"))
            .unwrap()
            .instructions[1]
        {
            Instruction::Rf { frequency: Value::Fixed(v), .. } => *v,
            _ => unreachable!(),
        };
        assert_eq!(f("1MHz"), 1e6);
        assert_eq!(f("1000kHz"), 1e6);
        assert_eq!(f("1000000Hz"), 1e6);
        assert_eq!(f("2.589MHz"), f("2589kHz"));
    }

    #[test]
    fn unit_mismatch_points_at_quantity() {
        let (line, col, kind, msg) = kind_at("seq \"a\"\ninit nuclear m_I=0\nrf freq=20us rabi=1kHz duration=1us\nreadout\nend");
        assert_eq!((line, col, kind), (3, 9, ParseErrorKind::UnitMismatch));
        assert!(msg.starts_with("unit mismatch: expected frequency"), "{msg}");
    }

    #[test]
    fn structural_errors() {
        let (l, _, k, _) = kind_at("seq \"a\"\nrf freq=1MHz rabi=1kHz duration=1us\ninit nuclear m_I=0\nreadout\nend");
        assert_eq!((l, k), (2, ParseErrorKind::Structure));
        let (l, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nreadout\nwait duration=1us\nend");
        assert_eq!((l, k), (4, ParseErrorKind::Structure));
        let (l, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nend");
        assert_eq!((l, k), (3, ParseErrorKind::Structure));
        let (l, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nreadout\n");
        assert_eq!((l, k), (4, ParseErrorKind::Structure));
        let (_, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nreadout\nend\nreadout");
        assert_eq!(k, ParseErrorKind::Structure);
        let (l, c, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nflip now\nreadout\nend");
        assert_eq!((l, c, k), (3, 1, ParseErrorKind::UnknownKeyword));
        let (_, _, k, _) = kind_at("");
        assert_eq!(k, ParseErrorKind::Structure);
    }

    #[test]
    fn malformed_quantities() {
        let (_, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nwait duration=3\nreadout\nend");
        assert_eq!(k, ParseErrorKind::MalformedQuantity);
        let (_, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nwait duration=3parsec\nreadout\nend");
        assert_eq!(k, ParseErrorKind::MalformedQuantity);
        let (_, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nwait duration=-3us\nreadout\nend");
        assert_eq!(k, ParseErrorKind::MalformedQuantity);
        let (_, _, k, _) = kind_at("seq \"a\"\ninit nuclear m_I=0\nrf freq=0MHz rabi=1kHz duration=1us\nreadout\nend");
        assert_eq!(k, ParseErrorKind::MalformedQuantity);
        // Exponents are not part of the surface syntax.
        assert!(parse("seq \"a\"\ninit nuclear m_I=0\nwait duration=1e3us\nreadout\nend").is_err());
    }

    #[test]
    fn sweeps_inline_and_declared() {
        let p = parse(
            "seq \"fig3a\"\ninit nuclear m_I=+1/2\nlaser red power=1mW duration=sweep(t_red, 1us..2ms, 50 log)\n\
             rf freq=2.589MHz rabi=25kHz duration=100us\nreadout\nend",
        )
        .unwrap();
        assert_eq!(p.sweeps.len(), 1);
        assert_eq!(p.sweeps[0].count, 50);
        assert_eq!(p.sweeps[0].kind, GridKind::Log);
        assert_eq!(p.sweeps[0].start, 1e-6);

        let p = parse("seq \"s\"\nsweep t 0..2ms 5\ninit nuclear m_I=0\nwait duration=$t\nreadout\nend").unwrap();
        assert_eq!(p.sweeps[0].start, 0.0);
        assert_eq!(p.sweeps[0].stop, 2e-3);
        assert_eq!(p.sweeps[0].kind, GridKind::Lin);

        let (l, _, k, _) = kind_at("seq \"s\"\nsweep t 0..2ms 5\nsweep t 0..1ms 5\ninit nuclear m_I=0\nwait duration=$t\nreadout\nend");
        assert_eq!((l, k), (3, ParseErrorKind::DuplicateSweep));
        let (l, _, k, _) = kind_at("seq \"s\"\nsweep t 0..2ms 5\ninit nuclear m_I=0\nreadout\nend");
        assert_eq!((l, k), (2, ParseErrorKind::Structure));
        let (_, _, k, _) = kind_at("seq \"s\"\nsweep t 0..2ms 5\ninit nuclear m_I=0\nrf freq=$t rabi=1kHz duration=1us\nreadout\nend");
        assert_eq!(k, ParseErrorKind::UnitMismatch);
        let (_, _, k, _) = kind_at("seq \"s\"\ninit nuclear m_I=0\nwait duration=sweep(t, 0..2ms, 5 log)\nreadout\nend");
        assert_eq!(k, ParseErrorKind::MalformedQuantity);
    }

    #[test]
    fn errors_stay_in_bounds() {
        for text in ["seq", "seq \"x", "seq \"a\"\ninit nuclear m_I=", "seq \"a\"\nlaser red power=1mW", "seq \"a\" extra\nend"] {
            let e = parse(text).unwrap_err();
            let lines: Vec<&str> = text.split('\n').collect();
            assert!(e.line >= 1 && e.line <= lines.len(), "{text:?}: {e}");
            assert!(e.col >= 1 && e.col <= lines[e.line - 1].chars().count() + 1, "{text:?}: {e}");
        }
    }
}
