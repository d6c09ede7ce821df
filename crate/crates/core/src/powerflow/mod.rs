//! Newton-Raphson AC power flow in polar coordinates with an optional
//! distributed slack, generator reactive limits and conversion of
//! voltage-violating loads to constant impedance.

mod impedance;
pub(crate) mod model;

pub use impedance::ConstantImpedanceLoad;
pub use model::{LoadSource, UnitKind};

use std::collections::HashSet;

use thiserror::Error;

use crate::case::{BusId, PowerCase};
use crate::network::{injections, NetworkError};
use model::{FlowModel, State};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{table} row {row}: unknown bus {bus}")]
    UnknownBus { table: &'static str, row: usize, bus: BusId },
    #[error("no single connected phase-reference slack unit")]
    NoPhaseReference,
    #[error("distributed slack selected but no unit has a nonzero loss share")]
    NoLossSharing,
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("no convergence after {iterations} iterations (max mismatch {mismatch:.3e})")]
    NotConverged { iterations: usize, mismatch: f64 },
    #[error("record at bus {bus} does not allow conversion to impedance")]
    NotConvertible { bus: BusId },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Largest admissible mismatch in p.u. on the system base.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub distributed_slack: bool,
    pub enforce_q_limits: bool,
    /// Start every angle at zero instead of the bus guesses.
    pub flat_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 30,
            distributed_slack: false,
            enforce_q_limits: false,
            flat_start: true,
        }
    }
}

/// Active and reactive output of one slack or PV unit (p.u., system base).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitOutput {
    pub kind: UnitKind,
    /// Row in `SW.con` or `PV.con`.
    pub row: usize,
    pub bus: BusId,
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QLimit {
    Max,
    Min,
}

/// A load record switched to constant impedance during the solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvertedLoad {
    pub source: LoadSource,
    pub row: usize,
    pub bus: BusId,
    pub model: ConstantImpedanceLoad,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerFlowSolution {
    pub buses: Vec<BusId>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Loss-share scalar (zero with a single slack).
    pub k_g: f64,
    pub p_injected: Vec<f64>,
    pub q_injected: Vec<f64>,
    pub losses_mw: f64,
    pub converged: bool,
    /// Newton iterations summed over all re-solves.
    pub iterations: usize,
    pub max_mismatch: f64,
    pub units: Vec<UnitOutput>,
    /// Buses whose controlling units ended at a reactive limit.
    pub pinned: Vec<(BusId, QLimit)>,
    /// Set when reactive-limit switching cycled and was stopped.
    pub q_limit_oscillation: bool,
    pub converted: Vec<ConvertedLoad>,
    pub system_base: f64,
}

impl PowerFlowSolution {
    pub fn position(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|b| *b == bus)
    }

    pub fn voltage(&self, bus: BusId) -> Option<(f64, f64)> {
        self.position(bus).map(|i| (self.v[i], self.theta[i]))
    }
}

const Q_LIMIT_TOLERANCE: f64 = 1e-6;

/// Solves the bus balance equations of `case`.
pub fn solve_power_flow(case: &PowerCase, options: &SolverOptions) -> Result<PowerFlowSolution, PowerFlowError> {
    let solved = solve_model(case, options)?;
    Ok(finish(case, &solved.model, &solved.state, solved.iterations, solved.oscillation))
}

pub(crate) struct SolvedModel {
    pub model: FlowModel,
    pub state: State,
    pub iterations: usize,
    pub oscillation: bool,
}

/// Solves the case and keeps the final typing and conversions for reuse.
pub(crate) fn solve_model(case: &PowerCase, options: &SolverOptions) -> Result<SolvedModel, PowerFlowError> {
    let mut model = FlowModel::from_case(case, options.distributed_slack)?;
    let mut state = model.initial_state(case, options.flat_start);
    let mut iterations = 0;
    let mut oscillation = false;
    let max_rounds = 2 * model.len() + 10;

    loop {
        let mut seen = HashSet::new();
        seen.insert(typing_key(&model));
        let mut rounds = 0;
        loop {
            iterations += model.newton(&mut state, options)?;
            if !options.enforce_q_limits {
                break;
            }
            let previous = model.pinned.clone();
            let previous_state = state.clone();
            if !update_q_limits(&mut model, &mut state) {
                break;
            }
            rounds += 1;
            if !seen.insert(typing_key(&model)) || rounds > max_rounds {
                oscillation = true;
                model.pinned = previous;
                state = previous_state;
                break;
            }
        }
        if !convert_violating_loads(&mut model, &state) {
            break;
        }
    }
    Ok(SolvedModel { model, state, iterations, oscillation })
}

fn typing_key(model: &FlowModel) -> Vec<u8> {
    model
        .pinned
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            None => 0,
            Some(q) if *q >= model.q_max[i] => 1,
            Some(_) => 2,
        })
        .collect()
}

/// Pins units beyond a reactive bound and releases pinned units whose voltage
/// error has changed sign. Returns whether the typing changed.
fn update_q_limits(model: &mut FlowModel, state: &mut State) -> bool {
    let (_, q_calc) = injections(&model.y, &state.v, &state.theta);
    let mut changed = false;
    for i in 0..model.len() {
        let Some(v_set) = model.v_set[i] else { continue };
        match model.pinned[i] {
            None => {
                let q = model.generated_q(i, state, q_calc[i]);
                if q > model.q_max[i] + Q_LIMIT_TOLERANCE {
                    model.pinned[i] = Some(model.q_max[i]);
                    changed = true;
                } else if q < model.q_min[i] - Q_LIMIT_TOLERANCE {
                    model.pinned[i] = Some(model.q_min[i]);
                    changed = true;
                }
            }
            Some(q) => {
                let at_max = q >= model.q_max[i];
                let release = if at_max { state.v[i] > v_set } else { state.v[i] < v_set };
                if release {
                    model.pinned[i] = None;
                    state.v[i] = v_set;
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Converts loads whose bus voltage left their band. Returns whether any
/// conversion happened.
fn convert_violating_loads(model: &mut FlowModel, state: &State) -> bool {
    let mut changed = false;
    for e in 0..model.loads.len() {
        let load = &model.loads[e];
        if !load.convertible || load.converted.is_some() {
            continue;
        }
        let v = state.v[load.bus];
        let v_lim = if v > load.v_max {
            load.v_max
        } else if v < load.v_min {
            load.v_min
        } else {
            continue;
        };
        model.convert(e, v_lim);
        changed = true;
    }
    changed
}

pub(crate) fn finish(
    case: &PowerCase,
    model: &FlowModel,
    state: &State,
    iterations: usize,
    oscillation: bool,
) -> PowerFlowSolution {
    let (p, q) = injections(&model.y, &state.v, &state.theta);
    let layout = model.layout();
    let max_mismatch = model.mismatch(&layout, state).amax();
    let units = unit_outputs(model, state, &p, &q);
    let pinned = model
        .pinned
        .iter()
        .enumerate()
        .filter_map(|(i, pin)| {
            pin.map(|q| (model.buses[i], if q >= model.q_max[i] { QLimit::Max } else { QLimit::Min }))
        })
        .collect();
    let converted = model
        .loads
        .iter()
        .filter_map(|l| {
            l.converted.map(|z| ConvertedLoad { source: l.source, row: l.row, bus: model.buses[l.bus], model: z })
        })
        .collect();
    PowerFlowSolution {
        buses: model.buses.clone(),
        v: state.v.clone(),
        theta: state.theta.clone(),
        k_g: state.k_g,
        losses_mw: p.iter().sum::<f64>() * case.system_base,
        p_injected: p,
        q_injected: q,
        converged: true,
        iterations,
        max_mismatch,
        units,
        pinned,
        q_limit_oscillation: oscillation,
        converted,
        system_base: case.system_base,
    }
}

fn unit_outputs(model: &FlowModel, state: &State, p: &[f64], q: &[f64]) -> Vec<UnitOutput> {
    let mut out = Vec::with_capacity(model.units.len());
    for u in &model.units {
        let i = u.bus;
        let p_out = if model.distributed {
            u.p0 * (1.0 + u.gamma * state.k_g)
        } else if u.is_reference {
            // the reference absorbs whatever the rest of the bus does not cover
            let (spec, _) = model.specified(i, state);
            p[i] - spec + u.p0
        } else {
            u.p0
        };
        let q_bus = model.generated_q(i, state, q[i]);
        let peers: Vec<_> = model.units.iter().filter(|o| o.bus == i).collect();
        let total_range: f64 = peers.iter().map(|o| o.q_range.max(0.0)).sum();
        let share = if total_range > 0.0 { u.q_range.max(0.0) / total_range } else { 1.0 / peers.len() as f64 };
        out.push(UnitOutput { kind: u.kind, row: u.row, bus: model.buses[i], p: p_out, q: q_bus * share });
    }
    out
}
