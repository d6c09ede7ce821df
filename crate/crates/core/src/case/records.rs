use std::fmt;

/// Bus identifier as it appears in the case tables.
pub type BusId = u32;

/// Default voltage band of load and PQ-generator buses (p.u.).
pub const DEFAULT_V_MIN: f64 = 0.9;
pub const DEFAULT_V_MAX: f64 = 1.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BusRecord {
    pub number: BusId,
    /// kV
    pub v_base: f64,
    /// Voltage magnitude initial guess (p.u.).
    pub v0: f64,
    /// Voltage phase initial guess (rad).
    pub theta0: f64,
    pub area: u32,
    pub region: u32,
}

/// Row of `Areas.con` or `Regions.con`; both tables share the layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaRecord {
    pub number: u32,
    /// Reference bus of the area, 0 when the area has none.
    pub slack_bus: BusId,
    pub s_base: f64,
    /// Exported interchange, positive when injecting (p.u.).
    pub p_exported: f64,
    pub p_tolerance: f64,
    /// Annual growth rate (%).
    pub growth_rate: f64,
}

pub type RegionRecord = AreaRecord;

/// Constant-power load (`PQ.con`). Powers are consumption-positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PqLoad {
    pub bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub p_load: f64,
    pub q_load: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub z_convertible: bool,
    pub connected: bool,
}

/// Fixed-output generator seen by the solvers as a negative load (`PQgen.con`).
/// Powers are generation-positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PqGen {
    pub bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub p_gen: f64,
    pub q_gen: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub z_convertible: bool,
    pub connected: bool,
}

impl PqGen {
    /// Power factor magnitude, `None` when the unit produces no power at all.
    pub fn power_factor(&self) -> Option<f64> {
        let s = self.p_gen.hypot(self.q_gen);
        (s > 0.0).then(|| self.p_gen.abs() / s)
    }
}

/// Slack generator (`SW.con`).
#[derive(Clone, Debug, PartialEq)]
pub struct SlackGen {
    pub bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub v0: f64,
    pub theta0: f64,
    pub q_max: f64,
    pub q_min: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// Initial active power used by the distributed-slack model.
    pub p_g0: f64,
    /// Loss-sharing factor.
    pub gamma: f64,
    /// Set on the single unit that fixes the phase of the case.
    pub is_phase_reference: bool,
    pub connected: bool,
}

/// Voltage-controlled generator (`PV.con`).
#[derive(Clone, Debug, PartialEq)]
pub struct PvGen {
    pub bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub p_gen: f64,
    pub v0: f64,
    pub q_max: f64,
    pub q_min: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub gamma: f64,
    pub connected: bool,
}

/// Shunt compensation device (`Shunts.con`). Positive `b` is capacitive.
#[derive(Clone, Debug, PartialEq)]
pub struct Shunt {
    pub bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub f_nominal: f64,
    pub g: f64,
    pub b: f64,
    pub connected: bool,
}

/// Nominal primary/secondary voltage pair of a transformer, written `a/b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformationRatio {
    pub primary_kv: f64,
    pub secondary_kv: f64,
}

impl TransformationRatio {
    pub fn value(&self) -> f64 {
        self.primary_kv / self.secondary_kv
    }
}

impl fmt::Display for TransformationRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.primary_kv, self.secondary_kv)
    }
}

/// Line or transformer (`Line.con`).
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub s_base: f64,
    pub v_base: f64,
    pub f_nominal: f64,
    /// km; zero means `r`, `x` and `b` are totals in p.u., otherwise per km.
    pub length: f64,
    /// `None` stands for a zero ratio column.
    pub k_t: Option<TransformationRatio>,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    /// Off-nominal tap ratio; zero on lines.
    pub tap: f64,
    /// Degrees.
    pub phase_shift: f64,
    pub i_max: f64,
    pub p_max: f64,
    pub s_max: f64,
    pub connected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BranchClass {
    Line,
    Transformer,
    PhaseShifter,
}

impl fmt::Display for BranchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchClass::Line => "line",
            BranchClass::Transformer => "transformer",
            BranchClass::PhaseShifter => "phase_shifter",
        })
    }
}

/// Transformer iff a ratio or a tap is present; a nonzero phase shift on a
/// transformer makes it a phase shifter.
pub fn classify_branch(branch: &Branch) -> BranchClass {
    let ratio_present = branch.k_t.is_some_and(|k| k.value() > 0.0);
    if ratio_present || branch.tap > 0.0 {
        if branch.phase_shift != 0.0 {
            BranchClass::PhaseShifter
        } else {
            BranchClass::Transformer
        }
    } else {
        BranchClass::Line
    }
}

impl Branch {
    pub fn class(&self) -> BranchClass {
        classify_branch(self)
    }

    /// Tap used when stamping: lines carry 1, a transformer with a ratio but
    /// no tap is taken at nominal tap.
    pub fn effective_tap(&self) -> f64 {
        if self.tap > 0.0 {
            self.tap
        } else {
            1.0
        }
    }

    /// `(r, x, b)` totals in p.u. of the record base.
    pub fn lumped_parameters(&self) -> (f64, f64, f64) {
        if self.length > 0.0 {
            (self.r * self.length, self.x * self.length, self.b * self.length)
        } else {
            (self.r, self.x, self.b)
        }
    }
}

/// Quadratic price or cost curve `c0 + c1 p + c2 p²`, with `p` in MW (MVAr).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostPolynomial {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CostPolynomial {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.c0 + self.c1 * p + self.c2 * p * p
    }

    pub fn derivative(&self, p: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * p
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && self.c1 == 0.0 && self.c2 == 0.0
    }

    pub fn is_convex(&self) -> bool {
        self.c2 >= 0.0
    }
}

/// Market offer of a power plant (`Supply.con`).
#[derive(Clone, Debug, PartialEq)]
pub struct SupplyBid {
    pub bus: BusId,
    pub s_base: f64,
    /// Active power growth direction.
    pub p_s0: f64,
    pub p_s_max: f64,
    pub p_s_min: f64,
    /// Result slot for the optimized offer.
    pub p_s: f64,
    pub active_cost: CostPolynomial,
    pub reactive_cost: CostPolynomial,
    pub commitment: bool,
    pub gamma: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// Columns 14, 18 and 19, kept for round trips.
    pub reserved: [f64; 3],
    pub connected: bool,
}

/// Elastic demand bid (`Demand.con`).
#[derive(Clone, Debug, PartialEq)]
pub struct DemandBid {
    pub bus: BusId,
    pub s_base: f64,
    pub p_d0: f64,
    pub q_d0: f64,
    pub p_d_max: f64,
    pub p_d_min: f64,
    pub p_d: f64,
    pub active_cost: CostPolynomial,
    pub reactive_cost: CostPolynomial,
    pub commitment: bool,
    /// Columns 15 to 17.
    pub reserved: [f64; 3],
    pub connected: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoadLevel {
    Heavy,
    Medium,
    Light,
}

impl LoadLevel {
    pub const ALL: [LoadLevel; 3] = [LoadLevel::Heavy, LoadLevel::Medium, LoadLevel::Light];
}

impl fmt::Display for LoadLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadLevel::Heavy => "heavy",
            LoadLevel::Medium => "medium",
            LoadLevel::Light => "light",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimarySource {
    Wind,
    Hydro,
    Fossil,
}

impl PrimarySource {
    pub const ALL: [PrimarySource; 3] = [PrimarySource::Wind, PrimarySource::Hydro, PrimarySource::Fossil];

    /// Plant-type code used at the end of bus names (`...EOL034`).
    pub fn name_code(self) -> &'static str {
        match self {
            PrimarySource::Wind => "EOL",
            PrimarySource::Hydro => "UHE",
            PrimarySource::Fossil => "UTE",
        }
    }

    /// Source from a bus name such as `CQBRD1EOL034`: trailing voltage digits
    /// are dropped and the remaining suffix is matched against the plant codes.
    pub fn from_bus_name(name: &str) -> Option<Self> {
        let stem = name.trim().trim_end_matches(|c: char| c.is_ascii_digit());
        let stem = stem.to_ascii_uppercase();
        PrimarySource::ALL.into_iter().find(|s| stem.ends_with(s.name_code()))
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "wind" | "eol" => Some(PrimarySource::Wind),
            "hydro" | "uhe" => Some(PrimarySource::Hydro),
            "fossil" | "ffuel" | "ute" => Some(PrimarySource::Fossil),
            _ => None,
        }
    }
}

impl fmt::Display for PrimarySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrimarySource::Wind => "wind",
            PrimarySource::Hydro => "hydro",
            PrimarySource::Fossil => "fossil",
        })
    }
}

/// Twelve monthly values for one area (load-level centroids or capacity factors).
#[derive(Clone, Debug, PartialEq)]
pub struct MonthlyProfile {
    pub area: u32,
    pub values: [f64; 12],
}

impl MonthlyProfile {
    /// `month` is 1-based.
    pub fn month(&self, month: u8) -> f64 {
        self.values[usize::from(month) - 1]
    }
}

/// Heavy, medium and light load-level centroids, relative to the annual
/// average load of each area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadLevelTable {
    pub heavy: Vec<MonthlyProfile>,
    pub medium: Vec<MonthlyProfile>,
    pub light: Vec<MonthlyProfile>,
}

impl LoadLevelTable {
    pub fn rows(&self, level: LoadLevel) -> &[MonthlyProfile] {
        match level {
            LoadLevel::Heavy => &self.heavy,
            LoadLevel::Medium => &self.medium,
            LoadLevel::Light => &self.light,
        }
    }

    pub fn rows_mut(&mut self, level: LoadLevel) -> &mut Vec<MonthlyProfile> {
        match level {
            LoadLevel::Heavy => &mut self.heavy,
            LoadLevel::Medium => &mut self.medium,
            LoadLevel::Light => &mut self.light,
        }
    }

    pub fn profile(&self, level: LoadLevel, area: u32) -> Option<&MonthlyProfile> {
        self.rows(level).iter().find(|p| p.area == area)
    }

    pub fn is_empty(&self) -> bool {
        self.heavy.is_empty() && self.medium.is_empty() && self.light.is_empty()
    }
}

/// Monthly capacity factors per primary source and area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CapacityFactorTable {
    pub wind: Vec<MonthlyProfile>,
    pub hydro: Vec<MonthlyProfile>,
    pub fossil: Vec<MonthlyProfile>,
}

impl CapacityFactorTable {
    pub fn rows(&self, source: PrimarySource) -> &[MonthlyProfile] {
        match source {
            PrimarySource::Wind => &self.wind,
            PrimarySource::Hydro => &self.hydro,
            PrimarySource::Fossil => &self.fossil,
        }
    }

    pub fn rows_mut(&mut self, source: PrimarySource) -> &mut Vec<MonthlyProfile> {
        match source {
            PrimarySource::Wind => &mut self.wind,
            PrimarySource::Hydro => &mut self.hydro,
            PrimarySource::Fossil => &mut self.fossil,
        }
    }

    pub fn profile(&self, source: PrimarySource, area: u32) -> Option<&MonthlyProfile> {
        self.rows(source).iter().find(|p| p.area == area)
    }

    pub fn is_empty(&self) -> bool {
        self.wind.is_empty() && self.hydro.is_empty() && self.fossil.is_empty()
    }
}

/// Explicit primary-source tag for the generators of a bus, overriding the
/// bus-name convention.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTag {
    pub bus: BusId,
    pub source: PrimarySource,
}
