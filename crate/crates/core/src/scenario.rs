//! Operating scenarios: monthly load-level centroids, per-source capacity
//! factors and compounded annual load growth.

use thiserror::Error;

use crate::case::{BusId, LoadLevel, PowerCase, PrimarySource};

/// Load level a scenario is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelChoice {
    Level(LoadLevel),
    /// The case loads as written (multiplier 1).
    AnnualAverage,
}

impl std::str::FromStr for LevelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "heavy" => Ok(LevelChoice::Level(LoadLevel::Heavy)),
            "medium" => Ok(LevelChoice::Level(LoadLevel::Medium)),
            "light" => Ok(LevelChoice::Level(LoadLevel::Light)),
            "annual-average" | "average" => Ok(LevelChoice::AnnualAverage),
            other => Err(format!("unknown load level `{other}`")),
        }
    }
}

/// Which primary sources get their monthly capacity factor applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceScaling {
    pub wind: bool,
    pub hydro: bool,
    pub fossil: bool,
}

impl SourceScaling {
    pub const ALL: Self = Self { wind: true, hydro: true, fossil: true };
    pub const NONE: Self = Self { wind: false, hydro: false, fossil: false };

    pub fn enabled(&self, source: PrimarySource) -> bool {
        match source {
            PrimarySource::Wind => self.wind,
            PrimarySource::Hydro => self.hydro,
            PrimarySource::Fossil => self.fossil,
        }
    }

    pub fn any(&self) -> bool {
        self.wind || self.hydro || self.fossil
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    /// Calendar month, 1 to 12.
    pub month: u8,
    pub level: LevelChoice,
    pub source_scaling: SourceScaling,
    /// Yearly load growth in percent, applied in order.
    pub growth_rates: Vec<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            month: 9,
            level: LevelChoice::AnnualAverage,
            source_scaling: SourceScaling::NONE,
            growth_rates: Vec::new(),
        }
    }
}

impl ScenarioSpec {
    pub fn check(&self) -> Result<(), ScenarioError> {
        if !(1..=12).contains(&self.month) {
            return Err(ScenarioError::InvalidMonth(self.month));
        }
        if let Some(&rate) = self.growth_rates.iter().find(|r| !(**r > -100.0) || !r.is_finite()) {
            return Err(ScenarioError::InvalidGrowthRate(rate));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error("month {0} is outside 1..=12")]
    InvalidMonth(u8),
    #[error("growth rate {0}% must be finite and above -100%")]
    InvalidGrowthRate(f64),
    #[error("no {level} load-level profile for area {area}")]
    MissingLoadLevel { level: LoadLevel, area: u32 },
    #[error("no {primary:?} capacity-factor profile for area {area}")]
    MissingCapacityFactor { primary: PrimarySource, area: u32 },
    #[error("{table} row {row}: cannot tell the primary source of the generator at bus {bus}")]
    UntaggedGenerator { table: &'static str, row: usize, bus: BusId },
    #[error("{table} row {row}: unknown bus {bus}")]
    UnknownBus { table: &'static str, row: usize, bus: BusId },
}

/// `base * prod(1 + r / 100)`.
pub fn compound_growth(base: f64, rates: &[f64]) -> f64 {
    rates.iter().fold(base, |acc, r| acc * (1.0 + r / 100.0))
}

/// Multiplies every PQ load by its area centroid for the chosen level and
/// month.
pub fn apply_load_level(case: &PowerCase, spec: &ScenarioSpec) -> Result<PowerCase, ScenarioError> {
    spec.check()?;
    let mut out = case.clone();
    let LevelChoice::Level(level) = spec.level else {
        return Ok(out);
    };
    for (row, load) in out.pq_loads.iter_mut().enumerate() {
        let area = case.bus(load.bus).ok_or(ScenarioError::UnknownBus { table: "PQ.con", row, bus: load.bus })?.area;
        match case.load_levels.profile(level, area) {
            Some(profile) => {
                let mult = profile.month(spec.month);
                load.p_load *= mult;
                load.q_load *= mult;
            }
            None if load.p_load == 0.0 && load.q_load == 0.0 => {}
            None => return Err(ScenarioError::MissingLoadLevel { level, area }),
        }
    }
    Ok(out)
}

/// Scales every PQ load by the compounded growth factor.
pub fn apply_growth(case: &PowerCase, spec: &ScenarioSpec) -> Result<PowerCase, ScenarioError> {
    spec.check()?;
    let factor = compound_growth(1.0, &spec.growth_rates);
    let mut out = case.clone();
    for load in &mut out.pq_loads {
        load.p_load *= factor;
        load.q_load *= factor;
    }
    Ok(out)
}

/// Scales generator outputs by the monthly capacity factor of their primary
/// source and area: PV active power, slack base power and PQ generator active
/// and reactive power.
pub fn apply_capacity_factors(case: &PowerCase, spec: &ScenarioSpec) -> Result<PowerCase, ScenarioError> {
    spec.check()?;
    let mut out = case.clone();
    if !spec.source_scaling.any() {
        return Ok(out);
    }
    let factor = |table: &'static str, row: usize, bus: BusId| -> Result<f64, ScenarioError> {
        let area = case.bus(bus).ok_or(ScenarioError::UnknownBus { table, row, bus })?.area;
        let source = case.source_of(bus).ok_or(ScenarioError::UntaggedGenerator { table, row, bus })?;
        if !spec.source_scaling.enabled(source) {
            return Ok(1.0);
        }
        case.capacity_factors
            .profile(source, area)
            .map(|p| p.month(spec.month))
            .ok_or(ScenarioError::MissingCapacityFactor { primary: source, area })
    };
    for (row, g) in out.pq_gens.iter_mut().enumerate() {
        let f = factor("PQgen.con", row, g.bus)?;
        g.p_gen *= f;
        g.q_gen *= f;
    }
    for (row, g) in out.pv_gens.iter_mut().enumerate() {
        g.p_gen *= factor("PV.con", row, g.bus)?;
    }
    for (row, g) in out.slack_gens.iter_mut().enumerate() {
        g.p_g0 *= factor("SW.con", row, g.bus)?;
    }
    Ok(out)
}

/// Load level, then growth, then capacity factors.
pub fn apply_scenario(case: &PowerCase, spec: &ScenarioSpec) -> Result<PowerCase, ScenarioError> {
    let leveled = apply_load_level(case, spec)?;
    let grown = apply_growth(&leveled, spec)?;
    apply_capacity_factors(&grown, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::*;

    fn profile(area: u32, value: f64) -> MonthlyProfile {
        MonthlyProfile { area, values: [value; 12] }
    }

    fn case() -> PowerCase {
        let bus = |number, area| BusRecord { number, v_base: 34.5, v0: 1.0, theta0: 0.0, area, region: 1 };
        let mut case = PowerCase {
            buses: vec![bus(101, 3), bus(107, 3), bus(294, 3)],
            bus_names: vec!["CQBRD1EOL034".into(), "RUSSAS-CE069".into(), "XINGO-UHE013".into()],
            pq_loads: vec![PqLoad {
                bus: 107,
                s_base: 100.0,
                v_base: 69.0,
                p_load: 0.1208,
                q_load: 0.0172,
                v_max: 1.1,
                v_min: 0.9,
                z_convertible: false,
                connected: true,
            }],
            pq_gens: vec![PqGen {
                bus: 101,
                s_base: 100.0,
                v_base: 34.5,
                p_gen: 0.57,
                q_gen: 0.0,
                v_max: 1.1,
                v_min: 0.9,
                z_convertible: false,
                connected: true,
            }],
            slack_gens: vec![SlackGen {
                bus: 294,
                s_base: 100.0,
                v_base: 13.8,
                v0: 1.0,
                theta0: 0.0,
                q_max: 99.0,
                q_min: -99.0,
                v_max: 1.1,
                v_min: 0.9,
                p_g0: 31.62,
                gamma: 1.0,
                is_phase_reference: true,
                connected: true,
            }],
            ..PowerCase::default()
        };
        let mut heavy = profile(3, 1.0);
        heavy.values[8] = 1.0990;
        case.load_levels.heavy.push(heavy);
        let mut wind = profile(3, 0.5);
        wind.values[8] = 0.61;
        case.capacity_factors.wind.push(wind);
        let mut hydro = profile(3, 0.5);
        hydro.values[8] = 0.32;
        case.capacity_factors.hydro.push(hydro);
        case
    }

    fn heavy_september() -> ScenarioSpec {
        ScenarioSpec { level: LevelChoice::Level(LoadLevel::Heavy), ..ScenarioSpec::default() }
    }

    #[test]
    fn heavy_september_scales_load() {
        let out = apply_load_level(&case(), &heavy_september()).unwrap();
        assert!((out.pq_loads[0].p_load - 0.1208 * 1.0990).abs() < 1e-15);
        assert!((out.pq_loads[0].p_load - 0.13276).abs() < 1e-5);
        assert!((out.pq_loads[0].q_load - 0.0172 * 1.0990).abs() < 1e-15);
    }

    #[test]
    fn annual_average_is_identity() {
        let c = case();
        assert_eq!(apply_scenario(&c, &ScenarioSpec::default()).unwrap(), c);
    }

    #[test]
    fn missing_level_profile_is_an_error() {
        let mut c = case();
        c.load_levels.heavy.clear();
        assert_eq!(
            apply_load_level(&c, &heavy_september()).unwrap_err(),
            ScenarioError::MissingLoadLevel { level: LoadLevel::Heavy, area: 3 }
        );
    }

    #[test]
    fn capacity_factors_scale_by_source() {
        let spec = ScenarioSpec { source_scaling: SourceScaling::ALL, ..ScenarioSpec::default() };
        let out = apply_capacity_factors(&case(), &spec).unwrap();
        assert_eq!(out.pq_gens[0].p_gen, 0.57 * 0.61);
        assert!((out.pq_gens[0].p_gen - 0.3477).abs() < 1e-12);
        assert!((out.slack_gens[0].p_g0 - 10.1184).abs() < 1e-12);
    }

    #[test]
    fn untagged_generator_is_an_error() {
        let mut c = case();
        c.bus_names[0] = "PLAIN".into();
        let spec = ScenarioSpec { source_scaling: SourceScaling::ALL, ..ScenarioSpec::default() };
        assert!(matches!(
            apply_capacity_factors(&c, &spec).unwrap_err(),
            ScenarioError::UntaggedGenerator { bus: 101, .. }
        ));
        c.source_tags.push(SourceTag { bus: 101, source: PrimarySource::Wind });
        assert!(apply_capacity_factors(&c, &spec).is_ok());
    }

    #[test]
    fn compound_growth_examples() {
        assert!((compound_growth(1.0, &[3.7, 3.7, 3.6, 1.8]) - 1.1341).abs() < 1e-4);
        assert_eq!(compound_growth(0.7, &[]), 0.7);
        assert!((compound_growth(2.0, &[10.0]) - 2.2).abs() < 1e-15);
    }

    #[test]
    fn spec_checks() {
        let bad_month = ScenarioSpec { month: 13, ..ScenarioSpec::default() };
        assert_eq!(bad_month.check(), Err(ScenarioError::InvalidMonth(13)));
        let bad_rate = ScenarioSpec { growth_rates: vec![-100.0], ..ScenarioSpec::default() };
        assert!(bad_rate.check().is_err());
        assert_eq!("Heavy".parse::<LevelChoice>(), Ok(LevelChoice::Level(LoadLevel::Heavy)));
    }
}
