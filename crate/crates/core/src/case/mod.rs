//! Record tables of a power-system case and the aggregate [`PowerCase`].
//!
//! Records are kept exactly as written in the case file, each on its own
//! power base. Solvers rescale to [`PowerCase::system_base`] when they build
//! their models.

mod records;
mod validate;

pub use records::*;
pub use validate::{validate_case, Diagnostic, RecordKind, Rule, Severity};

use std::collections::HashMap;

/// System power base used when a case does not declare one (MVA).
pub const DEFAULT_SYSTEM_BASE: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerCase {
    /// MVA base of all solver quantities.
    pub system_base: f64,
    pub buses: Vec<BusRecord>,
    pub areas: Vec<AreaRecord>,
    pub regions: Vec<RegionRecord>,
    pub bus_names: Vec<String>,
    pub area_names: Vec<String>,
    pub region_names: Vec<String>,
    pub pq_loads: Vec<PqLoad>,
    pub pq_gens: Vec<PqGen>,
    pub slack_gens: Vec<SlackGen>,
    pub pv_gens: Vec<PvGen>,
    pub shunts: Vec<Shunt>,
    pub branches: Vec<Branch>,
    pub supplies: Vec<SupplyBid>,
    pub demands: Vec<DemandBid>,
    pub load_levels: LoadLevelTable,
    pub capacity_factors: CapacityFactorTable,
    pub source_tags: Vec<SourceTag>,
}

impl Default for PowerCase {
    fn default() -> Self {
        Self {
            system_base: DEFAULT_SYSTEM_BASE,
            buses: Vec::new(),
            areas: Vec::new(),
            regions: Vec::new(),
            bus_names: Vec::new(),
            area_names: Vec::new(),
            region_names: Vec::new(),
            pq_loads: Vec::new(),
            pq_gens: Vec::new(),
            slack_gens: Vec::new(),
            pv_gens: Vec::new(),
            shunts: Vec::new(),
            branches: Vec::new(),
            supplies: Vec::new(),
            demands: Vec::new(),
            load_levels: LoadLevelTable::default(),
            capacity_factors: CapacityFactorTable::default(),
            source_tags: Vec::new(),
        }
    }
}

impl PowerCase {
    /// Number of buses `N_B`.
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// Map from bus number to row position in the bus table.
    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.number, i)).collect()
    }

    pub fn bus(&self, number: BusId) -> Option<&BusRecord> {
        self.buses.iter().find(|b| b.number == number)
    }

    /// Name bound positionally from `Bus.names`.
    pub fn bus_name(&self, number: BusId) -> Option<&str> {
        let pos = self.buses.iter().position(|b| b.number == number)?;
        self.bus_names.get(pos).map(String::as_str)
    }

    /// Name when available, otherwise the bus number.
    pub fn bus_label(&self, number: BusId) -> String {
        match self.bus_name(number) {
            Some(name) => name.to_string(),
            None => number.to_string(),
        }
    }

    /// The connected slack unit that fixes the phase, when exactly one exists.
    pub fn phase_reference(&self) -> Option<&SlackGen> {
        let mut refs = self.slack_gens.iter().filter(|s| s.connected && s.is_phase_reference);
        let first = refs.next()?;
        refs.next().is_none().then_some(first)
    }

    /// Factor converting a quantity in p.u. of `record_base` to the system base.
    pub fn to_system_base(&self, record_base: f64) -> f64 {
        if record_base > 0.0 {
            record_base / self.system_base
        } else {
            1.0
        }
    }

    /// Primary source of the generators at `bus`: explicit tag first, then the
    /// plant code at the end of the bus name.
    pub fn source_of(&self, bus: BusId) -> Option<PrimarySource> {
        self.source_tags
            .iter()
            .find(|t| t.bus == bus)
            .map(|t| t.source)
            .or_else(|| self.bus_name(bus).and_then(PrimarySource::from_bus_name))
    }

    /// In-service active load of the whole case, in p.u. of the system base.
    pub fn total_active_load(&self) -> f64 {
        self.pq_loads.iter().filter(|l| l.connected).map(|l| l.p_load * self.to_system_base(l.s_base)).sum()
    }
}
