//! Plain-text case format.
//!
//! A document is a sequence of sections. Each section starts with a header
//! line holding the structure name (`Bus.con`, `PQgen.con`, `Bus.names`,
//! ...), followed by rows of whitespace-separated fields in the column order
//! of the structure. Trailing optional columns may be omitted. Name sections
//! hold one double-quoted string per line. `#` starts a comment that runs to
//! the end of the line.
//!
//! ```text
//! System.con
//! 100
//! Bus.con
//! 101 34.5 1 0 3 3
//! Bus.names
//! "CQBRD1EOL034"
//! Line.con
//! 104 105 100 34.5 60 0 34.5/230 0 0.125 0 1/1 0 0.46 0.72 0.8 1
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::case::*;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: {section} expects {expected} columns, found {found}")]
    Arity { line: usize, section: &'static str, expected: String, found: usize },
    #[error("line {line}: unknown section `{header}`")]
    UnknownSection { line: usize, header: String },
    #[error("line {line}: duplicate section `{header}`")]
    DuplicateSection { line: usize, header: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Arity { line, .. }
            | ParseError::UnknownSection { line, .. }
            | ParseError::DuplicateSection { line, .. } => *line,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Section {
    System,
    Bus,
    Areas,
    Regions,
    BusNames,
    AreaNames,
    RegionNames,
    Pq,
    PqGen,
    Slack,
    Pv,
    Shunts,
    Line,
    Supply,
    Demand,
    LoadLevel(LoadLevel),
    CapacityFactor(PrimarySource),
    Source,
}

impl Section {
    const ALL: [Section; 22] = [
        Section::System,
        Section::Bus,
        Section::Areas,
        Section::Regions,
        Section::BusNames,
        Section::AreaNames,
        Section::RegionNames,
        Section::Pq,
        Section::PqGen,
        Section::Slack,
        Section::Pv,
        Section::Shunts,
        Section::Line,
        Section::Supply,
        Section::Demand,
        Section::LoadLevel(LoadLevel::Heavy),
        Section::LoadLevel(LoadLevel::Medium),
        Section::LoadLevel(LoadLevel::Light),
        Section::CapacityFactor(PrimarySource::Wind),
        Section::CapacityFactor(PrimarySource::Hydro),
        Section::CapacityFactor(PrimarySource::Fossil),
        Section::Source,
    ];

    fn header(self) -> &'static str {
        match self {
            Section::System => "System.con",
            Section::Bus => "Bus.con",
            Section::Areas => "Areas.con",
            Section::Regions => "Regions.con",
            Section::BusNames => "Bus.names",
            Section::AreaNames => "Areas.names",
            Section::RegionNames => "Regions.names",
            Section::Pq => "PQ.con",
            Section::PqGen => "PQgen.con",
            Section::Slack => "SW.con",
            Section::Pv => "PV.con",
            Section::Shunts => "Shunts.con",
            Section::Line => "Line.con",
            Section::Supply => "Supply.con",
            Section::Demand => "Demand.con",
            Section::LoadLevel(LoadLevel::Heavy) => "LoadLev.Heavy.con",
            Section::LoadLevel(LoadLevel::Medium) => "LoadLev.Medium.con",
            Section::LoadLevel(LoadLevel::Light) => "LoadLev.Light.con",
            Section::CapacityFactor(PrimarySource::Wind) => "CapacFactor.Wind.con",
            Section::CapacityFactor(PrimarySource::Hydro) => "CapacFactor.Hydro.con",
            Section::CapacityFactor(PrimarySource::Fossil) => "CapacFactor.FFuel.con",
            Section::Source => "Source.con",
        }
    }

    fn from_header(text: &str) -> Option<Self> {
        Section::ALL.into_iter().find(|s| s.header() == text)
    }

    /// (required, total) column counts.
    fn arity(self) -> (usize, usize) {
        match self {
            Section::System => (1, 1),
            Section::Bus => (2, 6),
            Section::Areas | Section::Regions => (1, 6),
            Section::BusNames | Section::AreaNames | Section::RegionNames => (1, 1),
            Section::Pq | Section::PqGen => (5, 9),
            Section::Slack => (5, 13),
            Section::Pv => (5, 11),
            Section::Shunts => (6, 7),
            Section::Line => (10, 16),
            Section::Supply => (5, 20),
            Section::Demand => (6, 18),
            Section::LoadLevel(_) | Section::CapacityFactor(_) => (13, 13),
            Section::Source => (2, 2),
        }
    }

    fn is_names(self) -> bool {
        matches!(self, Section::BusNames | Section::AreaNames | Section::RegionNames)
    }
}

#[derive(Debug)]
struct Token {
    text: String,
    column: usize,
    quoted: bool,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, column, message: message.into() }
}

fn tokenize(line_no: usize, line: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '"' {
            chars.next();
            let mut text = String::new();
            let mut closed = false;
            while let Some((_, c)) = chars.next() {
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match chars.next() {
                        Some((_, e @ ('"' | '\\'))) => text.push(e),
                        _ => return Err(syntax(line_no, start + 1, "invalid escape in quoted string")),
                    },
                    c => text.push(c),
                }
            }
            if !closed {
                return Err(syntax(line_no, start + 1, "unterminated quoted string"));
            }
            tokens.push(Token { text, column: start + 1, quoted: true });
            continue;
        }
        let mut end = start;
        while let Some(&(i, c)) = chars.peek() {
            if c.is_whitespace() || c == '#' || c == '"' {
                break;
            }
            end = i + c.len_utf8();
            chars.next();
        }
        tokens.push(Token { text: line[start..end].to_string(), column: start + 1, quoted: false });
    }
    Ok(tokens)
}

struct Row {
    line: usize,
    tokens: Vec<Token>,
}

impl Row {
    fn token(&self, i: usize) -> Option<&Token> {
        self.tokens.get(i)
    }

    fn real(&self, i: usize, default: f64) -> Result<f64, ParseError> {
        match self.token(i) {
            None => Ok(default),
            Some(t) => parse_real(self.line, t),
        }
    }

    fn id(&self, i: usize, default: u32) -> Result<u32, ParseError> {
        let Some(t) = self.token(i) else { return Ok(default) };
        let v = parse_real(self.line, t)?;
        if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return Err(syntax(self.line, t.column, format!("expected a non-negative integer, found `{}`", t.text)));
        }
        Ok(v as u32)
    }

    fn flag(&self, i: usize, default: bool) -> Result<bool, ParseError> {
        match self.token(i) {
            None => Ok(default),
            Some(t) => {
                let v = parse_real(self.line, t)?;
                match v {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(syntax(self.line, t.column, format!("expected 0 or 1, found `{}`", t.text))),
                }
            }
        }
    }

    /// `a/b` text or a plain number.
    fn fraction(&self, i: usize, default: f64) -> Result<f64, ParseError> {
        match self.token(i) {
            None => Ok(default),
            Some(t) => match t.text.split_once('/') {
                Some(_) => {
                    let r = parse_ratio(self.line, t)?;
                    Ok(r.value())
                }
                None => parse_real(self.line, t),
            },
        }
    }

    fn ratio(&self, i: usize) -> Result<Option<TransformationRatio>, ParseError> {
        let Some(t) = self.token(i) else { return Ok(None) };
        if t.text.contains('/') {
            return parse_ratio(self.line, t).map(Some);
        }
        let v = parse_real(self.line, t)?;
        if v == 0.0 {
            Ok(None)
        } else {
            Ok(Some(TransformationRatio { primary_kv: v, secondary_kv: 1.0 }))
        }
    }

    fn months(&self) -> Result<MonthlyProfile, ParseError> {
        let area = self.id(0, 0)?;
        let mut values = [0.0; 12];
        for (m, v) in values.iter_mut().enumerate() {
            *v = self.real(m + 1, 0.0)?;
        }
        Ok(MonthlyProfile { area, values })
    }
}

fn parse_real(line: usize, t: &Token) -> Result<f64, ParseError> {
    if t.quoted {
        return Err(syntax(line, t.column, "expected a number, found a quoted string"));
    }
    let v: f64 =
        t.text.parse().map_err(|_| syntax(line, t.column, format!("expected a number, found `{}`", t.text)))?;
    if v.is_nan() {
        return Err(syntax(line, t.column, "NaN is not a valid field value"));
    }
    Ok(v)
}

fn parse_ratio(line: usize, t: &Token) -> Result<TransformationRatio, ParseError> {
    let bad = || syntax(line, t.column, format!("expected a ratio `a/b`, found `{}`", t.text));
    let (a, b) = t.text.split_once('/').ok_or_else(bad)?;
    let primary_kv: f64 = a.parse().map_err(|_| bad())?;
    let secondary_kv: f64 = b.parse().map_err(|_| bad())?;
    if !(primary_kv.is_finite() && secondary_kv.is_finite()) || secondary_kv == 0.0 {
        return Err(bad());
    }
    Ok(TransformationRatio { primary_kv, secondary_kv })
}

fn is_header(t: &Token) -> bool {
    !t.quoted && t.text.starts_with(|c: char| c.is_ascii_alphabetic())
}

/// Parses a case document.
pub fn parse_case(text: &str) -> Result<PowerCase, ParseError> {
    let mut case = PowerCase::default();
    let mut seen = HashSet::new();
    let mut current: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens = tokenize(line, raw)?;
        let Some(first) = tokens.first() else { continue };

        if is_header(first) {
            if let Some(extra) = tokens.get(1) {
                return Err(syntax(line, extra.column, "unexpected text after section header"));
            }
            let section = Section::from_header(&first.text)
                .ok_or_else(|| ParseError::UnknownSection { line, header: first.text.clone() })?;
            if !seen.insert(section) {
                return Err(ParseError::DuplicateSection { line, header: first.text.clone() });
            }
            current = Some(section);
            continue;
        }

        let Some(section) = current else {
            return Err(syntax(line, first.column, "data row before any section header"));
        };
        let (required, total) = section.arity();
        if tokens.len() < required || tokens.len() > total {
            let expected = if required == total { total.to_string() } else { format!("{required} to {total}") };
            return Err(ParseError::Arity { line, section: section.header(), expected, found: tokens.len() });
        }
        if section.is_names() {
            let t = &tokens[0];
            if !t.quoted {
                return Err(syntax(line, t.column, "names must be double-quoted"));
            }
            let target = match section {
                Section::BusNames => &mut case.bus_names,
                Section::AreaNames => &mut case.area_names,
                _ => &mut case.region_names,
            };
            target.push(t.text.clone());
            continue;
        }
        let row = Row { line, tokens };
        push_row(&mut case, section, &row)?;
    }
    Ok(case)
}

fn push_row(case: &mut PowerCase, section: Section, r: &Row) -> Result<(), ParseError> {
    match section {
        Section::System => {
            case.system_base = r.real(0, DEFAULT_SYSTEM_BASE)?;
            if !(case.system_base > 0.0) {
                return Err(syntax(r.line, r.tokens[0].column, "system power base must be positive"));
            }
        }
        Section::Bus => case.buses.push(BusRecord {
            number: r.id(0, 0)?,
            v_base: r.real(1, 0.0)?,
            v0: r.real(2, 1.0)?,
            theta0: r.real(3, 0.0)?,
            area: r.id(4, 1)?,
            region: r.id(5, 1)?,
        }),
        Section::Areas | Section::Regions => {
            let rec = AreaRecord {
                number: r.id(0, 0)?,
                slack_bus: r.id(1, 0)?,
                s_base: r.real(2, DEFAULT_SYSTEM_BASE)?,
                p_exported: r.real(3, 0.0)?,
                p_tolerance: r.real(4, 0.0)?,
                growth_rate: r.real(5, 0.0)?,
            };
            if section == Section::Areas {
                case.areas.push(rec);
            } else {
                case.regions.push(rec);
            }
        }
        Section::Pq => case.pq_loads.push(PqLoad {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            v_base: r.real(2, 0.0)?,
            p_load: r.real(3, 0.0)?,
            q_load: r.real(4, 0.0)?,
            v_max: r.real(5, DEFAULT_V_MAX)?,
            v_min: r.real(6, DEFAULT_V_MIN)?,
            z_convertible: r.flag(7, false)?,
            connected: r.flag(8, true)?,
        }),
        Section::PqGen => case.pq_gens.push(PqGen {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            v_base: r.real(2, 0.0)?,
            p_gen: r.real(3, 0.0)?,
            q_gen: r.real(4, 0.0)?,
            v_max: r.real(5, DEFAULT_V_MAX)?,
            v_min: r.real(6, DEFAULT_V_MIN)?,
            z_convertible: r.flag(7, false)?,
            connected: r.flag(8, true)?,
        }),
        Section::Slack => case.slack_gens.push(SlackGen {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            v_base: r.real(2, 0.0)?,
            v0: r.real(3, 1.0)?,
            theta0: r.real(4, 0.0)?,
            q_max: r.real(5, DEFAULT_Q_LIMIT)?,
            q_min: r.real(6, -DEFAULT_Q_LIMIT)?,
            v_max: r.real(7, DEFAULT_V_MAX)?,
            v_min: r.real(8, DEFAULT_V_MIN)?,
            p_g0: r.real(9, 0.0)?,
            gamma: r.real(10, 1.0)?,
            is_phase_reference: r.flag(11, true)?,
            connected: r.flag(12, true)?,
        }),
        Section::Pv => case.pv_gens.push(PvGen {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            v_base: r.real(2, 0.0)?,
            p_gen: r.real(3, 0.0)?,
            v0: r.real(4, 1.0)?,
            q_max: r.real(5, DEFAULT_Q_LIMIT)?,
            q_min: r.real(6, -DEFAULT_Q_LIMIT)?,
            v_max: r.real(7, DEFAULT_V_MAX)?,
            v_min: r.real(8, DEFAULT_V_MIN)?,
            gamma: r.real(9, 0.0)?,
            connected: r.flag(10, true)?,
        }),
        Section::Shunts => case.shunts.push(Shunt {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            v_base: r.real(2, 0.0)?,
            f_nominal: r.real(3, 60.0)?,
            g: r.real(4, 0.0)?,
            b: r.real(5, 0.0)?,
            connected: r.flag(6, true)?,
        }),
        Section::Line => case.branches.push(Branch {
            from_bus: r.id(0, 0)?,
            to_bus: r.id(1, 0)?,
            s_base: r.real(2, 0.0)?,
            v_base: r.real(3, 0.0)?,
            f_nominal: r.real(4, 60.0)?,
            length: r.real(5, 0.0)?,
            k_t: r.ratio(6)?,
            r: r.real(7, 0.0)?,
            x: r.real(8, 0.0)?,
            b: r.real(9, 0.0)?,
            tap: r.fraction(10, 0.0)?,
            phase_shift: r.real(11, 0.0)?,
            i_max: r.real(12, 0.0)?,
            p_max: r.real(13, 0.0)?,
            s_max: r.real(14, 0.0)?,
            connected: r.flag(15, true)?,
        }),
        Section::Supply => case.supplies.push(SupplyBid {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            p_s0: r.real(2, 0.0)?,
            p_s_max: r.real(3, 0.0)?,
            p_s_min: r.real(4, 0.0)?,
            p_s: r.real(5, 0.0)?,
            active_cost: CostPolynomial::new(r.real(6, 0.0)?, r.real(7, 0.0)?, r.real(8, 0.0)?),
            reactive_cost: CostPolynomial::new(r.real(9, 0.0)?, r.real(10, 0.0)?, r.real(11, 0.0)?),
            commitment: r.flag(12, false)?,
            reserved: [r.real(13, 0.0)?, r.real(17, 0.0)?, r.real(18, 0.0)?],
            gamma: r.real(14, 1.0)?,
            q_max: r.real(15, 0.0)?,
            q_min: r.real(16, 0.0)?,
            connected: r.flag(19, true)?,
        }),
        Section::Demand => case.demands.push(DemandBid {
            bus: r.id(0, 0)?,
            s_base: r.real(1, 0.0)?,
            p_d0: r.real(2, 0.0)?,
            q_d0: r.real(3, 0.0)?,
            p_d_max: r.real(4, 0.0)?,
            p_d_min: r.real(5, 0.0)?,
            p_d: r.real(6, 0.0)?,
            active_cost: CostPolynomial::new(r.real(7, 0.0)?, r.real(8, 0.0)?, r.real(9, 0.0)?),
            reactive_cost: CostPolynomial::new(r.real(10, 0.0)?, r.real(11, 0.0)?, r.real(12, 0.0)?),
            commitment: r.flag(13, false)?,
            reserved: [r.real(14, 0.0)?, r.real(15, 0.0)?, r.real(16, 0.0)?],
            connected: r.flag(17, true)?,
        }),
        Section::LoadLevel(level) => case.load_levels.rows_mut(level).push(r.months()?),
        Section::CapacityFactor(source) => case.capacity_factors.rows_mut(source).push(r.months()?),
        Section::Source => {
            let t = &r.tokens[1];
            let source = PrimarySource::parse(&t.text)
                .ok_or_else(|| syntax(r.line, t.column, format!("unknown primary source `{}`", t.text)))?;
            case.source_tags.push(SourceTag { bus: r.id(0, 0)?, source });
        }
        Section::BusNames | Section::AreaNames | Section::RegionNames => unreachable!(),
    }
    Ok(())
}

/// Reactive limit assumed when a generator row omits it (p.u.).
pub const DEFAULT_Q_LIMIT: f64 = 99.0;

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn quote(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 2);
    out.push('"');
    for c in name.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

struct Writer {
    out: String,
}

impl Writer {
    fn section(&mut self, header: &str, columns: &str) {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "{header}");
        let _ = writeln!(self.out, "# {columns}");
    }

    fn row(&mut self, fields: &[String]) {
        self.out.push_str(&fields.join(" "));
        self.out.push('\n');
    }
}

macro_rules! fields {
    ($($e:expr),* $(,)?) => { [$($e.to_string()),*] };
}

fn months(p: &MonthlyProfile) -> Vec<String> {
    std::iter::once(p.area.to_string()).chain(p.values.iter().map(|v| v.to_string())).collect()
}

/// Writes a case document that [`parse_case`] reads back into an equal case.
/// Empty tables are omitted.
pub fn serialize_case(case: &PowerCase) -> String {
    let mut w = Writer { out: String::new() };

    w.section("System.con", "Sb(MVA)");
    w.row(&fields![case.system_base]);

    if !case.buses.is_empty() {
        w.section("Bus.con", "bus Vb(kV) V0 theta0(rad) area region");
        for b in &case.buses {
            w.row(&fields![b.number, b.v_base, b.v0, b.theta0, b.area, b.region]);
        }
    }
    for (header, table) in [("Areas.con", &case.areas), ("Regions.con", &case.regions)] {
        if table.is_empty() {
            continue;
        }
        w.section(header, "number slack_bus Sb Pex Ptol growth(%)");
        for a in table {
            w.row(&fields![a.number, a.slack_bus, a.s_base, a.p_exported, a.p_tolerance, a.growth_rate]);
        }
    }
    for (header, names) in
        [("Bus.names", &case.bus_names), ("Areas.names", &case.area_names), ("Regions.names", &case.region_names)]
    {
        if names.is_empty() {
            continue;
        }
        w.section(header, "name");
        for n in names {
            w.row(&[quote(n)]);
        }
    }
    if !case.pq_loads.is_empty() {
        w.section("PQ.con", "bus Sb Vb PL QL Vmax Vmin z u");
        for l in &case.pq_loads {
            w.row(&fields![
                l.bus,
                l.s_base,
                l.v_base,
                l.p_load,
                l.q_load,
                l.v_max,
                l.v_min,
                flag(l.z_convertible),
                flag(l.connected)
            ]);
        }
    }
    if !case.pq_gens.is_empty() {
        w.section("PQgen.con", "bus Sb Vb Pg Qg Vmax Vmin z u");
        for g in &case.pq_gens {
            w.row(&fields![
                g.bus,
                g.s_base,
                g.v_base,
                g.p_gen,
                g.q_gen,
                g.v_max,
                g.v_min,
                flag(g.z_convertible),
                flag(g.connected)
            ]);
        }
    }
    if !case.slack_gens.is_empty() {
        w.section("SW.con", "bus Sb Vb V0 theta0 Qmax Qmin Vmax Vmin Pg0 gamma ref u");
        for s in &case.slack_gens {
            w.row(&fields![
                s.bus,
                s.s_base,
                s.v_base,
                s.v0,
                s.theta0,
                s.q_max,
                s.q_min,
                s.v_max,
                s.v_min,
                s.p_g0,
                s.gamma,
                flag(s.is_phase_reference),
                flag(s.connected)
            ]);
        }
    }
    if !case.pv_gens.is_empty() {
        w.section("PV.con", "bus Sb Vb Pg V0 Qmax Qmin Vmax Vmin gamma u");
        for p in &case.pv_gens {
            w.row(&fields![
                p.bus,
                p.s_base,
                p.v_base,
                p.p_gen,
                p.v0,
                p.q_max,
                p.q_min,
                p.v_max,
                p.v_min,
                p.gamma,
                flag(p.connected)
            ]);
        }
    }
    if !case.shunts.is_empty() {
        w.section("Shunts.con", "bus Sb Vb fn g b u");
        for s in &case.shunts {
            w.row(&fields![s.bus, s.s_base, s.v_base, s.f_nominal, s.g, s.b, flag(s.connected)]);
        }
    }
    if !case.branches.is_empty() {
        w.section("Line.con", "from to Sb Vb fn length kT r x b a phi Imax Pmax Smax u");
        for b in &case.branches {
            let k_t = b.k_t.map_or_else(|| "0".to_string(), |k| k.to_string());
            w.row(&fields![
                b.from_bus,
                b.to_bus,
                b.s_base,
                b.v_base,
                b.f_nominal,
                b.length,
                k_t,
                b.r,
                b.x,
                b.b,
                b.tap,
                b.phase_shift,
                b.i_max,
                b.p_max,
                b.s_max,
                flag(b.connected)
            ]);
        }
    }
    if !case.supplies.is_empty() {
        w.section("Supply.con", "bus Sb PS0 PSmax PSmin PS CP0 CP1 CP2 CQ0 CQ1 CQ2 uc - gamma Qmax Qmin - - u");
        for s in &case.supplies {
            let (a, q) = (s.active_cost, s.reactive_cost);
            w.row(&fields![
                s.bus,
                s.s_base,
                s.p_s0,
                s.p_s_max,
                s.p_s_min,
                s.p_s,
                a.c0,
                a.c1,
                a.c2,
                q.c0,
                q.c1,
                q.c2,
                flag(s.commitment),
                s.reserved[0],
                s.gamma,
                s.q_max,
                s.q_min,
                s.reserved[1],
                s.reserved[2],
                flag(s.connected)
            ]);
        }
    }
    if !case.demands.is_empty() {
        w.section("Demand.con", "bus Sb PD0 QD0 PDmax PDmin PD CP0 CP1 CP2 CQ0 CQ1 CQ2 uc - - - u");
        for d in &case.demands {
            let (a, q) = (d.active_cost, d.reactive_cost);
            w.row(&fields![
                d.bus,
                d.s_base,
                d.p_d0,
                d.q_d0,
                d.p_d_max,
                d.p_d_min,
                d.p_d,
                a.c0,
                a.c1,
                a.c2,
                q.c0,
                q.c1,
                q.c2,
                flag(d.commitment),
                d.reserved[0],
                d.reserved[1],
                d.reserved[2],
                flag(d.connected)
            ]);
        }
    }
    for level in LoadLevel::ALL {
        let rows = case.load_levels.rows(level);
        if rows.is_empty() {
            continue;
        }
        w.section(Section::LoadLevel(level).header(), "area m1 .. m12");
        for p in rows {
            w.row(&months(p));
        }
    }
    for source in PrimarySource::ALL {
        let rows = case.capacity_factors.rows(source);
        if rows.is_empty() {
            continue;
        }
        w.section(Section::CapacityFactor(source).header(), "area m1 .. m12");
        for p in rows {
            w.row(&months(p));
        }
    }
    if !case.source_tags.is_empty() {
        w.section("Source.con", "bus source");
        for t in &case.source_tags {
            w.row(&fields![t.bus, t.source]);
        }
    }
    w.out
}
