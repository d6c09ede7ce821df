//! Bus-injection model shared by the power flow and the continuation tracer.
//!
//! Specified net injection at bus `i` (generation positive):
//!
//! ```text
//! P_i = p_fixed + (lambda - 1) p_dir + k_G p_share - p_z V^2
//! Q_i = q_fixed + (lambda - 1) q_dir - q_z V^2 (+ pinned reactive output)
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::case::{BusId, PowerCase};
use crate::network::{build_admittance, injections, InjectionJacobian};

use super::{ConstantImpedanceLoad, PowerFlowError, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitKind {
    Slack,
    Pv,
}

#[derive(Clone, Debug)]
pub(crate) struct Unit {
    pub kind: UnitKind,
    pub row: usize,
    pub bus: usize,
    pub p0: f64,
    pub gamma: f64,
    pub q_range: f64,
    pub is_reference: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadSource {
    PqLoad,
    PqGen,
}

/// A constant-power consumer that may turn into a constant impedance.
#[derive(Clone, Debug)]
pub(crate) struct LoadEntry {
    pub source: LoadSource,
    pub row: usize,
    pub bus: usize,
    /// Consumption on the system base (negative for PQ generators).
    pub p: f64,
    pub q: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub convertible: bool,
    pub converted: Option<ConstantImpedanceLoad>,
}

#[derive(Clone, Debug)]
pub(crate) struct FlowModel {
    pub buses: Vec<BusId>,
    pub y: DMatrix<Complex64>,
    pub reference: usize,
    pub ref_theta: f64,
    /// Voltage setpoint of buses with a voltage-controlling unit.
    pub v_set: Vec<Option<f64>>,
    pub q_max: Vec<f64>,
    pub q_min: Vec<f64>,
    /// Reactive output of a controlling unit held at one of its limits.
    pub pinned: Vec<Option<f64>>,
    pub p_fixed: Vec<f64>,
    pub q_fixed: Vec<f64>,
    pub p_dir: Vec<f64>,
    pub q_dir: Vec<f64>,
    pub p_share: Vec<f64>,
    pub p_z: Vec<f64>,
    pub q_z: Vec<f64>,
    pub distributed: bool,
    pub units: Vec<Unit>,
    pub loads: Vec<LoadEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct State {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub k_g: f64,
    pub lambda: f64,
}

/// Positions of unknowns and equations for the current bus typing.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub theta_pos: Vec<Option<usize>>,
    pub v_pos: Vec<Option<usize>>,
    pub k_pos: Option<usize>,
    pub p_rows: Vec<usize>,
    pub q_rows: Vec<usize>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.p_rows.len() + self.q_rows.len()
    }
}

impl FlowModel {
    pub fn from_case(case: &PowerCase, distributed: bool) -> Result<Self, PowerFlowError> {
        let admittance = build_admittance(case)?;
        let index = case.bus_index();
        let n = case.bus_count();
        let locate = |table: &'static str, row: usize, bus: BusId| {
            index.get(&bus).copied().ok_or(PowerFlowError::UnknownBus { table, row, bus })
        };
        let reference = case.phase_reference().ok_or(PowerFlowError::NoPhaseReference)?;
        let ref_idx = locate("SW.con", 0, reference.bus)?;

        let mut m = FlowModel {
            buses: case.buses.iter().map(|b| b.number).collect(),
            y: admittance.matrix().clone(),
            reference: ref_idx,
            ref_theta: reference.theta0,
            v_set: vec![None; n],
            q_max: vec![0.0; n],
            q_min: vec![0.0; n],
            pinned: vec![None; n],
            p_fixed: vec![0.0; n],
            q_fixed: vec![0.0; n],
            p_dir: vec![0.0; n],
            q_dir: vec![0.0; n],
            p_share: vec![0.0; n],
            p_z: vec![0.0; n],
            q_z: vec![0.0; n],
            distributed,
            units: Vec::new(),
            loads: Vec::new(),
        };

        for (row, g) in case.slack_gens.iter().enumerate() {
            if !g.connected {
                continue;
            }
            let bus = locate("SW.con", row, g.bus)?;
            let s = case.to_system_base(g.s_base);
            m.add_unit(Unit {
                kind: UnitKind::Slack,
                row,
                bus,
                p0: g.p_g0 * s,
                gamma: g.gamma,
                q_range: (g.q_max - g.q_min) * s,
                is_reference: g.is_phase_reference,
            });
            m.control_voltage(bus, g.v0, g.q_min * s, g.q_max * s);
        }
        for (row, g) in case.pv_gens.iter().enumerate() {
            if !g.connected {
                continue;
            }
            let bus = locate("PV.con", row, g.bus)?;
            let s = case.to_system_base(g.s_base);
            m.add_unit(Unit {
                kind: UnitKind::Pv,
                row,
                bus,
                p0: g.p_gen * s,
                gamma: g.gamma,
                q_range: (g.q_max - g.q_min) * s,
                is_reference: false,
            });
            m.control_voltage(bus, g.v0, g.q_min * s, g.q_max * s);
        }
        // the phase reference always regulates its own setpoint
        m.v_set[ref_idx] = Some(reference.v0);

        for (row, l) in case.pq_loads.iter().enumerate() {
            if !l.connected {
                continue;
            }
            let s = case.to_system_base(l.s_base);
            m.loads.push(LoadEntry {
                source: LoadSource::PqLoad,
                row,
                bus: locate("PQ.con", row, l.bus)?,
                p: l.p_load * s,
                q: l.q_load * s,
                v_min: l.v_min,
                v_max: l.v_max,
                convertible: l.z_convertible,
                converted: None,
            });
        }
        for (row, g) in case.pq_gens.iter().enumerate() {
            if !g.connected {
                continue;
            }
            let s = case.to_system_base(g.s_base);
            m.loads.push(LoadEntry {
                source: LoadSource::PqGen,
                row,
                bus: locate("PQgen.con", row, g.bus)?,
                p: -g.p_gen * s,
                q: -g.q_gen * s,
                v_min: g.v_min,
                v_max: g.v_max,
                convertible: g.z_convertible,
                converted: None,
            });
        }
        for l in &m.loads {
            m.p_fixed[l.bus] -= l.p;
            m.q_fixed[l.bus] -= l.q;
        }

        if distributed {
            if m.p_share.iter().all(|s| *s == 0.0) {
                return Err(PowerFlowError::NoLossSharing);
            }
        } else {
            m.p_share.iter_mut().for_each(|s| *s = 0.0);
        }
        Ok(m)
    }

    fn add_unit(&mut self, unit: Unit) {
        self.p_fixed[unit.bus] += unit.p0;
        self.p_share[unit.bus] += unit.gamma * unit.p0;
        self.units.push(unit);
    }

    fn control_voltage(&mut self, bus: usize, v0: f64, q_min: f64, q_max: f64) {
        if self.v_set[bus].is_none() {
            self.v_set[bus] = Some(v0);
        }
        self.q_min[bus] += q_min;
        self.q_max[bus] += q_max;
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    /// Whether bus `i` currently holds its voltage.
    pub fn holds_voltage(&self, i: usize) -> bool {
        self.v_set[i].is_some() && self.pinned[i].is_none()
    }

    pub fn initial_state(&self, case: &PowerCase, flat_start: bool) -> State {
        let n = self.len();
        let mut v = Vec::with_capacity(n);
        let mut theta = Vec::with_capacity(n);
        for (i, b) in case.buses.iter().enumerate() {
            v.push(self.v_set[i].unwrap_or(if b.v0 > 0.0 { b.v0 } else { 1.0 }));
            theta.push(if flat_start { 0.0 } else { b.theta0 });
        }
        theta[self.reference] = self.ref_theta;
        State { v, theta, k_g: 0.0, lambda: 1.0 }
    }

    pub fn layout(&self) -> Layout {
        let n = self.len();
        let mut theta_pos = vec![None; n];
        let mut v_pos = vec![None; n];
        let mut p_rows = Vec::new();
        let mut q_rows = Vec::new();
        let mut next = 0;
        for i in 0..n {
            if i != self.reference {
                theta_pos[i] = Some(next);
                next += 1;
            }
            if i != self.reference || self.distributed {
                p_rows.push(i);
            }
        }
        for i in 0..n {
            if !self.holds_voltage(i) {
                v_pos[i] = Some(next);
                next += 1;
                q_rows.push(i);
            }
        }
        let k_pos = self.distributed.then_some(next);
        Layout { theta_pos, v_pos, k_pos, p_rows, q_rows }
    }

    /// Specified active and reactive injection at bus `i`.
    pub fn specified(&self, i: usize, state: &State) -> (f64, f64) {
        let growth = state.lambda - 1.0;
        let v2 = state.v[i] * state.v[i];
        let p = self.p_fixed[i] + growth * self.p_dir[i] + state.k_g * self.p_share[i] - self.p_z[i] * v2;
        let q = self.q_fixed[i] + growth * self.q_dir[i] - self.q_z[i] * v2 + self.pinned[i].unwrap_or(0.0);
        (p, q)
    }

    pub fn mismatch(&self, layout: &Layout, state: &State) -> DVector<f64> {
        let (p, q) = injections(&self.y, &state.v, &state.theta);
        let mut f = DVector::zeros(layout.len());
        for (r, &i) in layout.p_rows.iter().enumerate() {
            f[r] = self.specified(i, state).0 - p[i];
        }
        let off = layout.p_rows.len();
        for (r, &i) in layout.q_rows.iter().enumerate() {
            f[off + r] = self.specified(i, state).1 - q[i];
        }
        f
    }

    /// Jacobian of [`FlowModel::mismatch`] with respect to the layout unknowns.
    pub fn jacobian(&self, layout: &Layout, state: &State) -> DMatrix<f64> {
        let n = self.len();
        let jac = InjectionJacobian::new(&self.y, &state.v, &state.theta);
        let dim = layout.len();
        let mut j = DMatrix::zeros(dim, dim);
        let off = layout.p_rows.len();
        for (r, &i) in layout.p_rows.iter().enumerate() {
            for k in 0..n {
                if let Some(c) = layout.theta_pos[k] {
                    j[(r, c)] = -jac.dp_dtheta[(i, k)];
                }
                if let Some(c) = layout.v_pos[k] {
                    j[(r, c)] = -jac.dp_dv[(i, k)];
                }
            }
            if let Some(c) = layout.v_pos[i] {
                j[(r, c)] -= 2.0 * self.p_z[i] * state.v[i];
            }
            if let Some(c) = layout.k_pos {
                j[(r, c)] = self.p_share[i];
            }
        }
        for (r, &i) in layout.q_rows.iter().enumerate() {
            for k in 0..n {
                if let Some(c) = layout.theta_pos[k] {
                    j[(off + r, c)] = -jac.dq_dtheta[(i, k)];
                }
                if let Some(c) = layout.v_pos[k] {
                    j[(off + r, c)] = -jac.dq_dv[(i, k)];
                }
            }
            if let Some(c) = layout.v_pos[i] {
                j[(off + r, c)] -= 2.0 * self.q_z[i] * state.v[i];
            }
        }
        j
    }

    /// Derivative of the mismatch with respect to `lambda`.
    pub fn lambda_column(&self, layout: &Layout) -> DVector<f64> {
        let off = layout.p_rows.len();
        let mut col = DVector::zeros(layout.len());
        for (r, &i) in layout.p_rows.iter().enumerate() {
            col[r] = self.p_dir[i];
        }
        for (r, &i) in layout.q_rows.iter().enumerate() {
            col[off + r] = self.q_dir[i];
        }
        col
    }

    pub fn unknowns(&self, layout: &Layout, state: &State) -> DVector<f64> {
        let mut x = DVector::zeros(layout.len());
        for i in 0..self.len() {
            if let Some(c) = layout.theta_pos[i] {
                x[c] = state.theta[i];
            }
            if let Some(c) = layout.v_pos[i] {
                x[c] = state.v[i];
            }
        }
        if let Some(c) = layout.k_pos {
            x[c] = state.k_g;
        }
        x
    }

    pub fn set_unknowns(&self, layout: &Layout, state: &mut State, x: &DVector<f64>) {
        for i in 0..self.len() {
            if let Some(c) = layout.theta_pos[i] {
                state.theta[i] = x[c];
            }
            if let Some(c) = layout.v_pos[i] {
                state.v[i] = x[c];
            }
        }
        if let Some(c) = layout.k_pos {
            state.k_g = x[c];
        }
    }

    /// Holds every voltage-controlled bus at its setpoint.
    pub fn impose_setpoints(&self, state: &mut State) {
        for i in 0..self.len() {
            if let (Some(v), true) = (self.v_set[i], self.holds_voltage(i)) {
                state.v[i] = v;
            }
        }
        state.theta[self.reference] = self.ref_theta;
    }

    /// Full Newton iterations at fixed `lambda`. Returns the iteration count.
    pub fn newton(&self, state: &mut State, options: &SolverOptions) -> Result<usize, PowerFlowError> {
        let layout = self.layout();
        self.impose_setpoints(state);
        let mut x = self.unknowns(&layout, state);
        for iteration in 0..=options.max_iterations {
            let f = self.mismatch(&layout, state);
            let worst = f.amax();
            if !worst.is_finite() {
                return Err(PowerFlowError::Diverged { iteration });
            }
            if worst <= options.tolerance {
                return Ok(iteration);
            }
            if iteration == options.max_iterations {
                return Err(PowerFlowError::NotConverged { iterations: iteration, mismatch: worst });
            }
            let j = self.jacobian(&layout, state);
            let dx = j
                .lu()
                .solve(&f)
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .ok_or(PowerFlowError::SingularJacobian { iteration })?;
            x -= dx;
            self.set_unknowns(&layout, state, &x);
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Reactive output of the voltage-controlling units at bus `i`.
    pub fn generated_q(&self, i: usize, state: &State, q_calc: f64) -> f64 {
        let growth = state.lambda - 1.0;
        let others = self.q_fixed[i] + growth * self.q_dir[i] - self.q_z[i] * state.v[i].powi(2);
        q_calc - others
    }

    /// Replaces the constant-power part of a load by its frozen impedance.
    pub fn convert(&mut self, entry: usize, v_lim: f64) {
        let load = &mut self.loads[entry];
        let z = ConstantImpedanceLoad::new(load.p.hypot(load.q), load.q.atan2(load.p), v_lim);
        let (g, b) = z.coefficients();
        load.converted = Some(z);
        self.p_fixed[load.bus] += load.p;
        self.q_fixed[load.bus] += load.q;
        self.p_z[load.bus] += g;
        self.q_z[load.bus] += b;
    }
}
