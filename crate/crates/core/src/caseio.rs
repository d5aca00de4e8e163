//! Reader and writer for the table subset of the MATPOWER `.m` case format.
//!
//! Accepted statements are `mpc.<name> = <scalar>;`, `mpc.<name> = '<text>';`,
//! `mpc.<name> = [ rows ];` and `mpc.<name> = { ... };` (cell arrays are
//! skipped), plus a leading `function mpc = <name>` line. `%` starts a line
//! comment. Rows are separated by `;` or newlines, columns by whitespace or
//! commas. Only `baseMVA`, `bus`, `gen` and `branch` are interpreted.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const BUS_COLUMNS: usize = 13;
pub const GEN_COLUMNS: usize = 10;
pub const BRANCH_COLUMNS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Pq,
    Pv,
    Slack,
}

impl BusKind {
    fn code(self) -> u8 {
        match self {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// MW
    pub p_demand: f64,
    /// MVAr
    pub q_demand: f64,
    /// MW consumed at 1 p.u. voltage
    pub g_shunt: f64,
    /// MVAr injected at 1 p.u. voltage
    pub b_shunt: f64,
    pub v_mag_init: f64,
    /// degrees
    pub v_ang_init: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStatus {
    InService,
    OutOfService,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b_total: f64,
    /// Off-nominal turns ratio; 0 stands for 1.0.
    pub tap: f64,
    /// Phase shift, degrees.
    pub shift: f64,
    pub status: BranchStatus,
}

impl Branch {
    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }

    /// Turns ratio with the zero sentinel resolved.
    pub fn effective_tap(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenStatus {
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub p_gen: f64,
    pub q_gen: f64,
    pub v_setpoint: f64,
    pub status: GenStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    index: HashMap<u32, usize>,
}

impl NetworkCase {
    /// Assembles a case from its tables, checking the structural invariants
    /// (unique ids, one slack bus, existing endpoints).
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
    ) -> Result<Self> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(Error::InvalidCase(format!("baseMVA must be positive, got {base_mva}")));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::InvalidCase(format!("duplicate bus id {}", bus.id)));
            }
            if !(bus.v_mag_init > 0.0) {
                return Err(Error::InvalidCase(format!(
                    "bus {} has non-positive initial voltage {}",
                    bus.id, bus.v_mag_init
                )));
            }
        }
        let slacks = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return Err(Error::InvalidCase(format!("expected exactly one slack bus, found {slacks}")));
        }
        for g in &generators {
            if !index.contains_key(&g.bus) {
                return Err(Error::InvalidCase(format!("generator at unknown bus {}", g.bus)));
            }
        }
        for (k, br) in branches.iter().enumerate() {
            for end in [br.from_bus, br.to_bus] {
                if !index.contains_key(&end) {
                    return Err(Error::InvalidCase(format!(
                        "branch {} references unknown bus {end}",
                        k + 1
                    )));
                }
            }
            if br.from_bus == br.to_bus {
                return Err(Error::InvalidCase(format!(
                    "branch {} connects bus {} to itself",
                    k + 1,
                    br.from_bus
                )));
            }
        }
        Ok(Self {
            base_mva,
            buses,
            generators,
            branches,
            index,
        })
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Dense index of a bus id (file order).
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated at construction")
    }

    /// Errors unless the in-service branches connect every bus.
    pub fn check_connected(&self) -> Result<()> {
        let n = self.buses.len();
        if n == 0 {
            return Err(Error::InvalidCase("case has no buses".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for br in self.branches.iter().filter(|b| b.in_service()) {
            let (f, t) = (self.index[&br.from_bus], self.index[&br.to_bus]);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidCase(format!(
                "bus {} is not connected to bus {}",
                self.buses[i].id, self.buses[0].id
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str,
    Dot,
    Eq,
    Semi,
    Comma,
    Newline,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn number(&mut self, first: char, line: usize, column: usize) -> Result<Tok> {
        let mut text = String::new();
        text.push(first);
        while let Some(&c) = self.chars.peek() {
            let accept = c.is_ascii_alphanumeric()
                || c == '.'
                || ((c == '+' || c == '-') && text.ends_with(['e', 'E']));
            if !accept {
                break;
            }
            text.push(c);
            self.bump();
        }
        let body = text.trim_start_matches(['+', '-']);
        let negative = text.starts_with('-');
        let value = match body {
            "Inf" | "inf" => f64::INFINITY,
            "NaN" | "nan" => f64::NAN,
            _ if body.starts_with(|c: char| c.is_ascii_digit() || c == '.')
                && body.chars().all(|c| {
                    c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-')
                }) =>
            {
                body.parse::<f64>()
                    .map_err(|_| self.err(line, column, format!("malformed number '{text}'")))?
            }
            _ => return Err(self.err(line, column, format!("malformed number '{text}'"))),
        };
        Ok(Tok::Number(if negative { -value } else { value }))
    }

    fn next_token(&mut self) -> Result<Token> {
        loop {
            let (line, column) = (self.line, self.column);
            let Some(c) = self.bump() else {
                return Ok(Token { tok: Tok::Eof, line, column });
            };
            let tok = match c {
                ' ' | '\t' | '\r' => continue,
                '%' => {
                    while self.chars.peek().is_some_and(|&c| c != '\n') {
                        self.bump();
                    }
                    continue;
                }
                '\n' => Tok::Newline,
                '.' if self.chars.peek().is_some_and(|c| c.is_ascii_digit()) => {
                    self.number('.', line, column)?
                }
                '.' => Tok::Dot,
                '=' => Tok::Eq,
                ';' => Tok::Semi,
                ',' => Tok::Comma,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '\'' => {
                    loop {
                        match self.bump() {
                            Some('\'') if self.chars.peek() == Some(&'\'') => {
                                self.bump();
                            }
                            Some('\'') => break,
                            Some('\n') | None => {
                                return Err(self.err(line, column, "unterminated string"))
                            }
                            Some(_) => {}
                        }
                    }
                    Tok::Str
                }
                '+' | '-' => {
                    if self
                        .chars
                        .peek()
                        .is_some_and(|&c| c.is_ascii_digit() || c == '.' || c == 'I' || c == 'N' || c == 'i' || c == 'n')
                    {
                        self.number(c, line, column)?
                    } else {
                        return Err(self.err(line, column, format!("unexpected '{c}'")));
                    }
                }
                c if c.is_ascii_digit() => self.number(c, line, column)?,
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut ident = String::from(c);
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            ident.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match ident.as_str() {
                        "Inf" | "NaN" => Tok::Number(if ident == "Inf" { f64::INFINITY } else { f64::NAN }),
                        _ => Tok::Ident(ident),
                    }
                }
                other => return Err(self.err(line, column, format!("unexpected character {other:?}"))),
            };
            return Ok(Token { tok, line, column });
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

enum Value {
    Scalar(f64),
    Matrix(Vec<(usize, Vec<f64>)>),
    Other,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Token>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<Token> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    fn peek(&mut self) -> Result<&Token> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token> {
        let t = self.next()?;
        if t.tok == want {
            Ok(t)
        } else {
            Err(unexpected(&t, what))
        }
    }

    fn statements(&mut self) -> Result<HashMap<String, (usize, Value)>> {
        let mut fields = HashMap::new();
        loop {
            let t = self.next()?;
            match &t.tok {
                Tok::Eof => return Ok(fields),
                Tok::Newline | Tok::Semi | Tok::Comma => continue,
                Tok::Ident(w) if w == "function" => loop {
                    match self.next()?.tok {
                        Tok::Newline | Tok::Eof => break,
                        _ => {}
                    }
                },
                Tok::Ident(w) if w == "mpc" => {
                    self.expect(Tok::Dot, "'.' after mpc")?;
                    let name_tok = self.next()?;
                    let Tok::Ident(name) = name_tok.tok else {
                        return Err(unexpected(&name_tok, "field name"));
                    };
                    self.expect(Tok::Eq, "'='")?;
                    let value = self.value()?;
                    let end = self.next()?;
                    match end.tok {
                        Tok::Semi | Tok::Newline | Tok::Eof => {}
                        _ => return Err(unexpected(&end, "';' or end of line")),
                    }
                    fields.insert(name, (t.line, value));
                    if end.tok == Tok::Eof {
                        return Ok(fields);
                    }
                }
                _ => return Err(unexpected(&t, "'mpc.<name> = ...' statement")),
            }
        }
    }

    fn value(&mut self) -> Result<Value> {
        let t = self.next()?;
        match t.tok {
            Tok::Number(v) => Ok(Value::Scalar(v)),
            Tok::Str => Ok(Value::Other),
            Tok::LBracket => self.matrix(),
            Tok::LBrace => {
                let mut depth = 1;
                while depth > 0 {
                    let t = self.next()?;
                    match t.tok {
                        Tok::LBrace => depth += 1,
                        Tok::RBrace => depth -= 1,
                        Tok::Eof => return Err(unexpected(&t, "'}'")),
                        _ => {}
                    }
                }
                Ok(Value::Other)
            }
            _ => Err(unexpected(&t, "value")),
        }
    }

    fn matrix(&mut self) -> Result<Value> {
        let mut rows = Vec::new();
        let mut current: Vec<f64> = Vec::new();
        let mut row_line = self.peek()?.line;
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Number(v) => {
                    if current.is_empty() {
                        row_line = t.line;
                    }
                    current.push(v);
                }
                Tok::Comma => {}
                Tok::Semi | Tok::Newline => {
                    if !current.is_empty() {
                        rows.push((row_line, std::mem::take(&mut current)));
                    }
                }
                Tok::RBracket => {
                    if !current.is_empty() {
                        rows.push((row_line, current));
                    }
                    return Ok(Value::Matrix(rows));
                }
                _ => return Err(unexpected(&t, "number or ']'")),
            }
        }
    }
}

fn unexpected(t: &Token, what: &str) -> Error {
    let found = match &t.tok {
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Number(v) => format!("number {v}"),
        Tok::Eof => "end of input".to_string(),
        other => format!("{other:?}"),
    };
    Error::Syntax {
        line: t.line,
        column: t.column,
        message: format!("expected {what}, found {found}"),
    }
}

fn take_matrix(
    fields: &mut HashMap<String, (usize, Value)>,
    name: &str,
    min_cols: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    match fields.remove(name) {
        None => Err(Error::InvalidCase(format!("missing required matrix mpc.{name}"))),
        Some((line, Value::Scalar(_) | Value::Other)) => Err(Error::InvalidCase(format!(
            "mpc.{name} on line {line} must be a matrix"
        ))),
        Some((_, Value::Matrix(rows))) => {
            for (line, row) in &rows {
                if row.len() < min_cols {
                    return Err(Error::InvalidCase(format!(
                        "mpc.{name} row on line {line} has {} columns, need at least {min_cols}",
                        row.len()
                    )));
                }
            }
            Ok(rows)
        }
    }
}

fn finite(v: f64, line: usize, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidCase(format!("non-finite {what} on line {line}")))
    }
}

fn bus_id(v: f64, line: usize) -> Result<u32> {
    if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(Error::InvalidCase(format!("bus id {v} on line {line} is not a positive integer")))
    }
}

/// Parses raw bytes, reporting invalid UTF-8 as a syntax error.
pub fn parse_case_bytes(bytes: &[u8]) -> Result<NetworkCase> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_case(text),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = 1 + prefix.iter().filter(|&&b| b == b'\n').count();
            let column = 1 + prefix.iter().rev().take_while(|&&b| b != b'\n').count();
            Err(Error::Syntax {
                line,
                column,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

pub fn parse_case(text: &str) -> Result<NetworkCase> {
    let mut parser = Parser {
        lexer: Lexer::new(text),
        peeked: None,
    };
    let mut fields = parser.statements()?;

    let base_mva = match fields.remove("baseMVA") {
        Some((_, Value::Scalar(v))) => v,
        Some((line, _)) => {
            return Err(Error::InvalidCase(format!("mpc.baseMVA on line {line} must be a scalar")))
        }
        None => return Err(Error::InvalidCase("missing required matrix mpc.baseMVA".into())),
    };
    let bus_rows = take_matrix(&mut fields, "bus", BUS_COLUMNS)?;
    let gen_rows = take_matrix(&mut fields, "gen", GEN_COLUMNS)?;
    let branch_rows = take_matrix(&mut fields, "branch", BRANCH_COLUMNS)?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (line, r) in &bus_rows {
        let line = *line;
        let kind = match r[1] {
            k if k == 1.0 => BusKind::Pq,
            k if k == 2.0 => BusKind::Pv,
            k if k == 3.0 => BusKind::Slack,
            k => {
                return Err(Error::InvalidCase(format!("unsupported bus type {k} on line {line}")))
            }
        };
        buses.push(Bus {
            id: bus_id(r[0], line)?,
            kind,
            p_demand: finite(r[2], line, "Pd")?,
            q_demand: finite(r[3], line, "Qd")?,
            g_shunt: finite(r[4], line, "Gs")?,
            b_shunt: finite(r[5], line, "Bs")?,
            v_mag_init: finite(r[7], line, "Vm")?,
            v_ang_init: finite(r[8], line, "Va")?,
            base_kv: finite(r[9], line, "baseKV")?,
        });
    }
    let mut generators = Vec::with_capacity(gen_rows.len());
    for (line, r) in &gen_rows {
        let line = *line;
        generators.push(Generator {
            bus: bus_id(r[0], line)?,
            p_gen: finite(r[1], line, "Pg")?,
            q_gen: finite(r[2], line, "Qg")?,
            v_setpoint: finite(r[5], line, "Vg")?,
            status: if finite(r[7], line, "gen status")? > 0.0 {
                GenStatus::On
            } else {
                GenStatus::Off
            },
        });
    }
    let mut branches = Vec::with_capacity(branch_rows.len());
    for (line, r) in &branch_rows {
        let line = *line;
        branches.push(Branch {
            from_bus: bus_id(r[0], line)?,
            to_bus: bus_id(r[1], line)?,
            r: finite(r[2], line, "r")?,
            x: finite(r[3], line, "x")?,
            b_total: finite(r[4], line, "b")?,
            tap: finite(r[8], line, "ratio")?,
            shift: finite(r[9], line, "angle")?,
            status: if finite(r[10], line, "branch status")? > 0.0 {
                BranchStatus::InService
            } else {
                BranchStatus::OutOfService
            },
        });
    }
    NetworkCase::new(base_mva, buses, generators, branches)
}

/// Serializes a case in the same restricted grammar. Columns not carried by
/// the in-memory types are written with neutral defaults.
pub fn write_case(case: &NetworkCase) -> String {
    let mut out = String::new();
    out.push_str("function mpc = case_written\n");
    out.push_str("mpc.version = '2';\n");
    let _ = writeln!(out, "mpc.baseMVA = {};", case.base_mva);
    out.push_str("\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n");
    out.push_str("mpc.bus = [\n");
    for b in &case.buses {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t1.1\t0.9;",
            b.id,
            b.kind.code(),
            b.p_demand,
            b.q_demand,
            b.g_shunt,
            b.b_shunt,
            b.v_mag_init,
            b.v_ang_init,
            b.base_kv
        );
    }
    out.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n");
    out.push_str("mpc.gen = [\n");
    for g in &case.generators {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t9999\t-9999\t{}\t{}\t{}\t9999\t0;",
            g.bus,
            g.p_gen,
            g.q_gen,
            g.v_setpoint,
            case.base_mva,
            u8::from(g.status == GenStatus::On)
        );
    }
    out.push_str("];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n");
    out.push_str("mpc.branch = [\n");
    for br in &case.branches {
        let _ = writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{}\t-360\t360;",
            br.from_bus,
            br.to_bus,
            br.r,
            br.x,
            br.b_total,
            br.tap,
            br.shift,
            u8::from(br.in_service())
        );
    }
    out.push_str("];\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;

    #[test]
    fn bundled_case_sizes() {
        let c5 = parse_case(data::CASE5).unwrap();
        assert_eq!((c5.buses.len(), c5.branches.len()), (5, 6));
        let c14 = parse_case(data::CASE14).unwrap();
        assert_eq!((c14.buses.len(), c14.branches.len()), (14, 20));
        assert_eq!(c14.generators.len(), 5);
        assert_eq!(c14.base_mva, 100.0);
    }

    #[test]
    fn base_mva_only_is_missing_matrix() {
        let err = parse_case("mpc.baseMVA = 100;").unwrap_err();
        assert!(matches!(err, Error::InvalidCase(ref m) if m.contains("missing required matrix")));
    }

    fn tiny(bus_rows: &str, branch_rows: &str) -> String {
        format!(
            "mpc.baseMVA = 100;\nmpc.bus = [\n{bus_rows}];\nmpc.gen = [\n1 0 0 0 0 1 100 1 0 0;\n];\nmpc.branch = [\n{branch_rows}];\n"
        )
    }

    const B1: &str = "1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n";
    const B2: &str = "2 1 10 5 0 0 1 1 0 230 1 1.1 0.9;\n";

    #[test]
    fn structural_errors() {
        let dup = tiny(&format!("{B1}{B1}"), "");
        assert!(matches!(parse_case(&dup), Err(Error::InvalidCase(m)) if m.contains("duplicate")));

        let dangling = tiny(B1, "1 7 0 0.1 0 0 0 0 0 0 1 -360 360;\n");
        assert!(matches!(parse_case(&dangling), Err(Error::InvalidCase(m)) if m.contains("unknown bus 7")));

        let no_slack = tiny(B2, "");
        let no_slack = no_slack.replace("1 0 0 0 0 1 100", "2 0 0 0 0 1 100");
        assert!(matches!(parse_case(&no_slack), Err(Error::InvalidCase(m)) if m.contains("one slack")));

        let two_slack = tiny(&format!("{B1}{}", B2.replacen(" 1 ", " 3 ", 1)), "");
        assert!(matches!(parse_case(&two_slack), Err(Error::InvalidCase(m)) if m.contains("found 2")));
    }

    #[test]
    fn syntax_error_has_position() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9 $;\n];";
        match parse_case(text) {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 34)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_consecutive_ids_are_mapped() {
        let text = tiny(
            &format!("{B1}{}", B2.replacen("2 ", "40 ", 1)),
            "1 40 0 0.1 0 0 0 0 0 0 1 -360 360;\n",
        );
        let c = parse_case(&text).unwrap();
        assert_eq!(c.bus_index(40), Some(1));
        assert_eq!(c.bus_index(2), None);
        c.check_connected().unwrap();
    }

    #[test]
    fn tap_zero_sentinel_survives_round_trip() {
        let text = tiny(&format!("{B1}{B2}"), "1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;\n");
        let c = parse_case(&text).unwrap();
        assert_eq!(c.branches[0].tap, 0.0);
        let back = parse_case(&write_case(&c)).unwrap();
        assert_eq!(back.branches[0].tap, 0.0);
        assert_eq!(back.branches[0].effective_tap(), 1.0);
    }

    #[test]
    fn single_bus_case_writes() {
        let c = parse_case(&tiny(B1, "")).unwrap();
        let text = write_case(&c);
        assert_eq!(parse_case(&text).unwrap(), c);
    }

    #[test]
    fn disconnected_case_fails_connectivity() {
        let c = parse_case(&tiny(&format!("{B1}{B2}"), "")).unwrap();
        assert!(c.check_connected().is_err());
    }

    #[test]
    fn comments_commas_and_cells_ignored() {
        let text = "% header\nfunction mpc = t\nmpc.version = '2';\nmpc.baseMVA = 100; % trailing\n\
            mpc.bus = [ 1, 3, 0, 0, 0, 0, 1, 1, 0, 230, 1, 1.1, 0.9 ];\n\
            mpc.gen = [];\nmpc.branch = [];\nmpc.bus_name = {\n\t'a;b';\n};\nmpc.extra = [1 2; 3 4];\n";
        let c = parse_case(text).unwrap();
        assert_eq!(c.buses.len(), 1);
        assert!(c.generators.is_empty());
    }

    #[test]
    fn invalid_utf8_is_structured() {
        assert!(matches!(
            parse_case_bytes(b"mpc.baseMVA = 1\xff00;"),
            Err(Error::Syntax { line: 1, .. })
        ));
    }
}
