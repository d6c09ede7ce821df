use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::{classify_branch, BranchClass, LoadLevel, MonthlyProfile, PowerCase, PrimarySource};

/// Minimum power factor magnitude of a PQ generator, on either side.
pub const MIN_POWER_FACTOR: f64 = 0.95;

const PF_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Case,
    Bus,
    Area,
    Region,
    BusNames,
    AreaNames,
    RegionNames,
    PqLoad,
    PqGen,
    Slack,
    Pv,
    Shunt,
    Branch,
    Supply,
    Demand,
    LoadLevel(LoadLevel),
    CapacityFactor(PrimarySource),
    SourceTag,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordKind::Case => f.write_str("case"),
            RecordKind::Bus => f.write_str("Bus.con"),
            RecordKind::Area => f.write_str("Areas.con"),
            RecordKind::Region => f.write_str("Regions.con"),
            RecordKind::BusNames => f.write_str("Bus.names"),
            RecordKind::AreaNames => f.write_str("Areas.names"),
            RecordKind::RegionNames => f.write_str("Regions.names"),
            RecordKind::PqLoad => f.write_str("PQ.con"),
            RecordKind::PqGen => f.write_str("PQgen.con"),
            RecordKind::Slack => f.write_str("SW.con"),
            RecordKind::Pv => f.write_str("PV.con"),
            RecordKind::Shunt => f.write_str("Shunts.con"),
            RecordKind::Branch => f.write_str("Line.con"),
            RecordKind::Supply => f.write_str("Supply.con"),
            RecordKind::Demand => f.write_str("Demand.con"),
            RecordKind::LoadLevel(LoadLevel::Heavy) => f.write_str("LoadLev.Heavy.con"),
            RecordKind::LoadLevel(LoadLevel::Medium) => f.write_str("LoadLev.Medium.con"),
            RecordKind::LoadLevel(LoadLevel::Light) => f.write_str("LoadLev.Light.con"),
            RecordKind::CapacityFactor(PrimarySource::Wind) => f.write_str("CapacFactor.Wind.con"),
            RecordKind::CapacityFactor(PrimarySource::Hydro) => f.write_str("CapacFactor.Hydro.con"),
            RecordKind::CapacityFactor(PrimarySource::Fossil) => f.write_str("CapacFactor.FFuel.con"),
            RecordKind::SourceTag => f.write_str("Source.con"),
        }
    }
}

/// Violated invariant. Each rule has a stable identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    InvalidBusNumber,
    DuplicateBus,
    NonPositiveVoltageBase,
    NonPositiveInitialVoltage,
    UnknownBus,
    UnknownAreaSlack,
    NonPositivePowerBase,
    NameTableLength,
    VoltageBand,
    NegativeLoad,
    CoincidentPqLoadAndGen,
    PowerFactorBand,
    NoPhaseReference,
    MultiplePhaseReferences,
    ReactiveBand,
    LossShareRange,
    NonPositiveFrequency,
    SelfLoop,
    ZeroReactance,
    TapDefaulted,
    OfferBounds,
    NegativeCost,
    DemandBounds,
    DemandWithoutLoad,
    NonPositiveCentroid,
    CentroidOrder,
    CapacityFactorRange,
    DuplicateProfile,
    DuplicateSourceTag,
    Islanded,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::InvalidBusNumber => "bus-number",
            Rule::DuplicateBus => "bus-duplicate",
            Rule::NonPositiveVoltageBase => "bus-vbase",
            Rule::NonPositiveInitialVoltage => "bus-v0",
            Rule::UnknownBus => "unknown-bus",
            Rule::UnknownAreaSlack => "area-slack",
            Rule::NonPositivePowerBase => "sbase",
            Rule::NameTableLength => "names-length",
            Rule::VoltageBand => "voltage-band",
            Rule::NegativeLoad => "load-sign",
            Rule::CoincidentPqLoadAndGen => "pq-coincident",
            Rule::PowerFactorBand => "pf-band",
            Rule::NoPhaseReference => "phase-reference-missing",
            Rule::MultiplePhaseReferences => "phase-reference-multiple",
            Rule::ReactiveBand => "reactive-band",
            Rule::LossShareRange => "loss-share",
            Rule::NonPositiveFrequency => "frequency",
            Rule::SelfLoop => "branch-self-loop",
            Rule::ZeroReactance => "branch-zero-reactance",
            Rule::TapDefaulted => "transformer-tap-defaulted",
            Rule::OfferBounds => "supply-bounds",
            Rule::NegativeCost => "cost-sign",
            Rule::DemandBounds => "demand-bounds",
            Rule::DemandWithoutLoad => "demand-without-load",
            Rule::NonPositiveCentroid => "centroid-positive",
            Rule::CentroidOrder => "centroid-order",
            Rule::CapacityFactorRange => "capacity-factor-range",
            Rule::DuplicateProfile => "profile-duplicate",
            Rule::DuplicateSourceTag => "source-tag-duplicate",
            Rule::Islanded => "islanded",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::InvalidBusNumber => "bus number must be a positive integer",
            Rule::DuplicateBus => "bus number is not unique",
            Rule::NonPositiveVoltageBase => "voltage base must be positive",
            Rule::NonPositiveInitialVoltage => "initial voltage magnitude must be positive",
            Rule::UnknownBus => "references an unknown bus",
            Rule::UnknownAreaSlack => "area slack bus is neither 0 nor a known bus",
            Rule::NonPositivePowerBase => "power base must be positive",
            Rule::NameTableLength => "name table length differs from its record table",
            Rule::VoltageBand => "minimum voltage is not below maximum voltage",
            Rule::NegativeLoad => "load active power is negative",
            Rule::CoincidentPqLoadAndGen => "coincident PQ load and PQ generator",
            Rule::PowerFactorBand => "power factor outside 0.95 band",
            Rule::NoPhaseReference => "no phase reference",
            Rule::MultiplePhaseReferences => "more than one phase reference",
            Rule::ReactiveBand => "minimum reactive power is not below maximum",
            Rule::LossShareRange => "loss-sharing factor outside [0, 1]",
            Rule::NonPositiveFrequency => "nominal frequency must be positive",
            Rule::SelfLoop => "branch connects a bus to itself",
            Rule::ZeroReactance => "branch reactance is zero",
            Rule::TapDefaulted => "transformer ratio given without tap, nominal tap 1 assumed",
            Rule::OfferBounds => "minimum offer exceeds maximum offer",
            Rule::NegativeCost => "cost coefficient is negative",
            Rule::DemandBounds => "demand bounds must satisfy 0 <= min <= max",
            Rule::DemandWithoutLoad => "demand bid at a bus without PQ load",
            Rule::NonPositiveCentroid => "load-level centroid must be positive",
            Rule::CentroidOrder => "centroids must satisfy heavy >= medium >= light",
            Rule::CapacityFactorRange => "capacity factor outside (0, 1]",
            Rule::DuplicateProfile => "more than one row for the same area",
            Rule::DuplicateSourceTag => "more than one source tag for the same bus",
            Rule::Islanded => "bus not connected to the phase reference",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub kind: RecordKind,
    /// 0-based row in the record table.
    pub row: usize,
    pub rule: Rule,
    pub severity: Severity,
}

impl Diagnostic {
    fn error(kind: RecordKind, row: usize, rule: Rule) -> Self {
        Self { kind, row, rule, severity: Severity::Error }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}] {} row {}: {}", self.rule.id(), self.kind, self.row + 1, self.rule.description())
    }
}

/// Checks every record invariant of the case. An empty result means the case
/// is consistent; warnings flag normalizations applied by the solvers.
pub fn validate_case(case: &PowerCase) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let known: HashSet<_> = case.buses.iter().map(|b| b.number).collect();

    check_buses(case, &mut out);
    check_areas(case, &known, &mut out);
    check_names(case, &mut out);
    check_injections(case, &known, &mut out);
    check_branches(case, &known, &mut out);
    check_market(case, &known, &mut out);
    check_profiles(case, &mut out);
    check_phase_reference(case, &known, &mut out);
    out
}

fn check_buses(case: &PowerCase, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for (row, bus) in case.buses.iter().enumerate() {
        if bus.number == 0 {
            out.push(Diagnostic::error(RecordKind::Bus, row, Rule::InvalidBusNumber));
        }
        if !seen.insert(bus.number) {
            out.push(Diagnostic::error(RecordKind::Bus, row, Rule::DuplicateBus));
        }
        if !(bus.v_base > 0.0) {
            out.push(Diagnostic::error(RecordKind::Bus, row, Rule::NonPositiveVoltageBase));
        }
        if !(bus.v0 > 0.0) {
            out.push(Diagnostic::error(RecordKind::Bus, row, Rule::NonPositiveInitialVoltage));
        }
    }
}

fn check_areas(case: &PowerCase, known: &HashSet<u32>, out: &mut Vec<Diagnostic>) {
    for (kind, table) in [(RecordKind::Area, &case.areas), (RecordKind::Region, &case.regions)] {
        for (row, area) in table.iter().enumerate() {
            if area.slack_bus != 0 && !known.contains(&area.slack_bus) {
                out.push(Diagnostic::error(kind, row, Rule::UnknownAreaSlack));
            }
            if !(area.s_base > 0.0) {
                out.push(Diagnostic::error(kind, row, Rule::NonPositivePowerBase));
            }
        }
    }
}

fn check_names(case: &PowerCase, out: &mut Vec<Diagnostic>) {
    let tables = [
        (RecordKind::BusNames, case.bus_names.len(), case.buses.len()),
        (RecordKind::AreaNames, case.area_names.len(), case.areas.len()),
        (RecordKind::RegionNames, case.region_names.len(), case.regions.len()),
    ];
    for (kind, names, records) in tables {
        if names != 0 && names != records {
            out.push(Diagnostic::error(kind, names.min(records), Rule::NameTableLength));
        }
    }
}

fn bus_ref(known: &HashSet<u32>, bus: u32, kind: RecordKind, row: usize, out: &mut Vec<Diagnostic>) {
    if !known.contains(&bus) {
        out.push(Diagnostic::error(kind, row, Rule::UnknownBus));
    }
}

fn positive_base(s_base: f64, kind: RecordKind, row: usize, out: &mut Vec<Diagnostic>) {
    if !(s_base > 0.0) {
        out.push(Diagnostic::error(kind, row, Rule::NonPositivePowerBase));
    }
}

fn check_injections(case: &PowerCase, known: &HashSet<u32>, out: &mut Vec<Diagnostic>) {
    for (row, load) in case.pq_loads.iter().enumerate() {
        let kind = RecordKind::PqLoad;
        bus_ref(known, load.bus, kind, row, out);
        positive_base(load.s_base, kind, row, out);
        if !(load.v_min < load.v_max) {
            out.push(Diagnostic::error(kind, row, Rule::VoltageBand));
        }
        if load.p_load < 0.0 {
            out.push(Diagnostic::error(kind, row, Rule::NegativeLoad));
        }
    }

    let load_buses: HashSet<_> = case.pq_loads.iter().map(|l| l.bus).collect();
    for (row, gen) in case.pq_gens.iter().enumerate() {
        let kind = RecordKind::PqGen;
        bus_ref(known, gen.bus, kind, row, out);
        positive_base(gen.s_base, kind, row, out);
        if !(gen.v_min < gen.v_max) {
            out.push(Diagnostic::error(kind, row, Rule::VoltageBand));
        }
        if load_buses.contains(&gen.bus) {
            out.push(Diagnostic::error(kind, row, Rule::CoincidentPqLoadAndGen));
        }
        if gen.connected && gen.p_gen > 0.0 {
            if let Some(pf) = gen.power_factor() {
                if pf < MIN_POWER_FACTOR - PF_SLACK {
                    out.push(Diagnostic::error(kind, row, Rule::PowerFactorBand));
                }
            }
        }
    }

    for (row, sw) in case.slack_gens.iter().enumerate() {
        let kind = RecordKind::Slack;
        bus_ref(known, sw.bus, kind, row, out);
        positive_base(sw.s_base, kind, row, out);
        if !(sw.q_min < sw.q_max) {
            out.push(Diagnostic::error(kind, row, Rule::ReactiveBand));
        }
        if !(sw.v_min < sw.v_max) {
            out.push(Diagnostic::error(kind, row, Rule::VoltageBand));
        }
        if !(0.0..=1.0).contains(&sw.gamma) {
            out.push(Diagnostic::error(kind, row, Rule::LossShareRange));
        }
    }

    for (row, pv) in case.pv_gens.iter().enumerate() {
        let kind = RecordKind::Pv;
        bus_ref(known, pv.bus, kind, row, out);
        positive_base(pv.s_base, kind, row, out);
        if !(pv.q_min < pv.q_max) {
            out.push(Diagnostic::error(kind, row, Rule::ReactiveBand));
        }
        if !(pv.v_min < pv.v_max) {
            out.push(Diagnostic::error(kind, row, Rule::VoltageBand));
        }
        if !(0.0..=1.0).contains(&pv.gamma) {
            out.push(Diagnostic::error(kind, row, Rule::LossShareRange));
        }
    }

    for (row, sh) in case.shunts.iter().enumerate() {
        let kind = RecordKind::Shunt;
        bus_ref(known, sh.bus, kind, row, out);
        positive_base(sh.s_base, kind, row, out);
        if !(sh.f_nominal > 0.0) {
            out.push(Diagnostic::error(kind, row, Rule::NonPositiveFrequency));
        }
    }
}

fn check_branches(case: &PowerCase, known: &HashSet<u32>, out: &mut Vec<Diagnostic>) {
    for (row, br) in case.branches.iter().enumerate() {
        let kind = RecordKind::Branch;
        bus_ref(known, br.from_bus, kind, row, out);
        bus_ref(known, br.to_bus, kind, row, out);
        positive_base(br.s_base, kind, row, out);
        if br.from_bus == br.to_bus {
            out.push(Diagnostic::error(kind, row, Rule::SelfLoop));
        }
        if br.x == 0.0 {
            out.push(Diagnostic::error(kind, row, Rule::ZeroReactance));
        }
        if !(br.f_nominal > 0.0) {
            out.push(Diagnostic::error(kind, row, Rule::NonPositiveFrequency));
        }
        if classify_branch(br) != BranchClass::Line && br.tap == 0.0 {
            out.push(Diagnostic { kind, row, rule: Rule::TapDefaulted, severity: Severity::Warning });
        }
    }
}

fn check_market(case: &PowerCase, known: &HashSet<u32>, out: &mut Vec<Diagnostic>) {
    for (row, s) in case.supplies.iter().enumerate() {
        let kind = RecordKind::Supply;
        bus_ref(known, s.bus, kind, row, out);
        positive_base(s.s_base, kind, row, out);
        if s.p_s_min > s.p_s_max {
            out.push(Diagnostic::error(kind, row, Rule::OfferBounds));
        }
        if s.q_min > s.q_max {
            out.push(Diagnostic::error(kind, row, Rule::ReactiveBand));
        }
        if !(0.0..=1.0).contains(&s.gamma) {
            out.push(Diagnostic::error(kind, row, Rule::LossShareRange));
        }
        if negative_cost(&[s.active_cost, s.reactive_cost]) {
            out.push(Diagnostic::error(kind, row, Rule::NegativeCost));
        }
    }

    let load_buses: HashSet<_> = case.pq_loads.iter().map(|l| l.bus).collect();
    for (row, d) in case.demands.iter().enumerate() {
        let kind = RecordKind::Demand;
        bus_ref(known, d.bus, kind, row, out);
        positive_base(d.s_base, kind, row, out);
        if !(0.0 <= d.p_d_min && d.p_d_min <= d.p_d_max) {
            out.push(Diagnostic::error(kind, row, Rule::DemandBounds));
        }
        if negative_cost(&[d.active_cost, d.reactive_cost]) {
            out.push(Diagnostic::error(kind, row, Rule::NegativeCost));
        }
        if !load_buses.contains(&d.bus) {
            out.push(Diagnostic::error(kind, row, Rule::DemandWithoutLoad));
        }
    }
}

fn negative_cost(polys: &[super::CostPolynomial]) -> bool {
    polys.iter().any(|c| c.c0 < 0.0 || c.c1 < 0.0 || c.c2 < 0.0)
}

fn duplicate_areas(rows: &[MonthlyProfile], kind: RecordKind, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for (row, p) in rows.iter().enumerate() {
        if !seen.insert(p.area) {
            out.push(Diagnostic::error(kind, row, Rule::DuplicateProfile));
        }
    }
}

fn check_profiles(case: &PowerCase, out: &mut Vec<Diagnostic>) {
    let levels = &case.load_levels;
    for level in LoadLevel::ALL {
        let kind = RecordKind::LoadLevel(level);
        duplicate_areas(levels.rows(level), kind, out);
        for (row, p) in levels.rows(level).iter().enumerate() {
            if p.values.iter().any(|v| !(*v > 0.0)) {
                out.push(Diagnostic::error(kind, row, Rule::NonPositiveCentroid));
            }
        }
    }
    // heavy >= medium >= light wherever an area has more than one level
    for (row, medium) in levels.medium.iter().enumerate() {
        let heavy = levels.profile(LoadLevel::Heavy, medium.area);
        let light = levels.profile(LoadLevel::Light, medium.area);
        let broken = (0..12).any(|m| {
            heavy.is_some_and(|h| h.values[m] < medium.values[m])
                || light.is_some_and(|l| medium.values[m] < l.values[m])
        });
        if broken {
            out.push(Diagnostic::error(RecordKind::LoadLevel(LoadLevel::Medium), row, Rule::CentroidOrder));
        }
    }
    for (row, heavy) in levels.heavy.iter().enumerate() {
        if levels.profile(LoadLevel::Medium, heavy.area).is_some() {
            continue;
        }
        if let Some(light) = levels.profile(LoadLevel::Light, heavy.area) {
            if (0..12).any(|m| heavy.values[m] < light.values[m]) {
                out.push(Diagnostic::error(RecordKind::LoadLevel(LoadLevel::Heavy), row, Rule::CentroidOrder));
            }
        }
    }

    for source in PrimarySource::ALL {
        let kind = RecordKind::CapacityFactor(source);
        let rows = case.capacity_factors.rows(source);
        duplicate_areas(rows, kind, out);
        for (row, p) in rows.iter().enumerate() {
            if p.values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                out.push(Diagnostic::error(kind, row, Rule::CapacityFactorRange));
            }
        }
    }

    let mut tagged = HashSet::new();
    for (row, tag) in case.source_tags.iter().enumerate() {
        if !tagged.insert(tag.bus) {
            out.push(Diagnostic::error(RecordKind::SourceTag, row, Rule::DuplicateSourceTag));
        }
        if case.bus(tag.bus).is_none() {
            out.push(Diagnostic::error(RecordKind::SourceTag, row, Rule::UnknownBus));
        }
    }
}

fn check_phase_reference(case: &PowerCase, known: &HashSet<u32>, out: &mut Vec<Diagnostic>) {
    let refs: Vec<_> =
        case.slack_gens.iter().enumerate().filter(|(_, s)| s.connected && s.is_phase_reference).collect();
    let reference = match refs.as_slice() {
        [] => {
            out.push(Diagnostic::error(RecordKind::Case, 0, Rule::NoPhaseReference));
            return;
        }
        [(_, r)] => r.bus,
        [_, rest @ ..] => {
            for (row, _) in rest {
                out.push(Diagnostic::error(RecordKind::Slack, *row, Rule::MultiplePhaseReferences));
            }
            return;
        }
    };
    if !known.contains(&reference) {
        return;
    }

    let mut adjacency: HashMap<u32, Vec<u32>> = HashMap::new();
    for br in case.branches.iter().filter(|b| b.connected) {
        if known.contains(&br.from_bus) && known.contains(&br.to_bus) {
            adjacency.entry(br.from_bus).or_default().push(br.to_bus);
            adjacency.entry(br.to_bus).or_default().push(br.from_bus);
        }
    }
    let mut reached = HashSet::from([reference]);
    let mut queue = VecDeque::from([reference]);
    while let Some(bus) = queue.pop_front() {
        for next in adjacency.get(&bus).into_iter().flatten() {
            if reached.insert(*next) {
                queue.push_back(*next);
            }
        }
    }
    for (row, bus) in case.buses.iter().enumerate() {
        if !reached.contains(&bus.number) {
            out.push(Diagnostic::error(RecordKind::Bus, row, Rule::Islanded));
        }
    }
}
