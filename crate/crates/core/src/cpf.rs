//! Continuation power flow: traces voltages as supply and demand grow with the
//! loading parameter `lambda` and locates the point of maximum loadability.
//!
//! Along the curve
//!
//! ```text
//! P_G = P_G0 + (lambda - 1 + gamma k_G) P_S0
//! P_L = P_L0 + (lambda - 1) P_D0
//! Q_L = Q_L0 + (lambda - 1) Q_D0
//! ```
//!
//! The tracer uses a tangent predictor and a corrector that fixes the
//! component of the state with the largest tangent entry, so it walks through
//! the nose where the plain Jacobian is singular.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::case::{BusId, PowerCase};
use crate::powerflow::model::{FlowModel, Layout, State};
use crate::powerflow::{solve_model, PowerFlowError, SolverOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct SupplyDirection {
    pub bus: BusId,
    /// Generation increase per unit of `lambda` (p.u., system base).
    pub p_s0: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemandDirection {
    pub bus: BusId,
    pub p_d0: f64,
    pub q_d0: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthDirections {
    pub supplies: Vec<SupplyDirection>,
    pub demands: Vec<DemandDirection>,
}

impl GrowthDirections {
    /// Directions from the `Supply.con` and `Demand.con` rows. Without demand
    /// rows every in-service load grows from its base value; without supply
    /// rows every slack and PV unit grows from its base output.
    pub fn from_case(case: &PowerCase) -> Self {
        let supplies: Vec<_> = case
            .supplies
            .iter()
            .filter(|s| s.connected)
            .map(|s| SupplyDirection { bus: s.bus, p_s0: s.p_s0 * case.to_system_base(s.s_base), gamma: s.gamma })
            .collect();
        let supplies = if supplies.is_empty() {
            let slack = case.slack_gens.iter().filter(|g| g.connected).map(|g| SupplyDirection {
                bus: g.bus,
                p_s0: g.p_g0 * case.to_system_base(g.s_base),
                gamma: g.gamma,
            });
            let pv = case.pv_gens.iter().filter(|g| g.connected).map(|g| SupplyDirection {
                bus: g.bus,
                p_s0: g.p_gen * case.to_system_base(g.s_base),
                gamma: g.gamma,
            });
            slack.chain(pv).collect()
        } else {
            supplies
        };

        let demands: Vec<_> = case
            .demands
            .iter()
            .filter(|d| d.connected)
            .map(|d| {
                let s = case.to_system_base(d.s_base);
                DemandDirection { bus: d.bus, p_d0: d.p_d0 * s, q_d0: d.q_d0 * s }
            })
            .collect();
        let demands = if demands.is_empty() {
            case.pq_loads
                .iter()
                .filter(|l| l.connected)
                .map(|l| {
                    let s = case.to_system_base(l.s_base);
                    DemandDirection { bus: l.bus, p_d0: l.p_load * s, q_d0: l.q_load * s }
                })
                .collect()
        } else {
            demands
        };
        Self { supplies, demands }
    }

    /// Total active demand growth `sum P_D0` in p.u.
    pub fn total_demand(&self) -> f64 {
        self.demands.iter().map(|d| d.p_d0).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpfOptions {
    pub solver: SolverOptions,
    /// Predictor step length along the normalized tangent.
    pub initial_step: f64,
    pub min_step: f64,
    /// Accepted points before giving up on finding the nose.
    pub max_points: usize,
}

impl Default for CpfOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), initial_step: 0.1, min_step: 1e-4, max_points: 5000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpfPoint {
    pub lambda: f64,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub k_g: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpfTrace {
    pub buses: Vec<BusId>,
    pub points: Vec<CpfPoint>,
    /// Index of the maximum loadability point.
    pub nose_index: usize,
    pub delta_lambda: f64,
    /// `sum P_D0` of the traced direction, p.u.
    pub demand_growth: f64,
    pub system_base: f64,
}

impl CpfTrace {
    pub fn nose(&self) -> &CpfPoint {
        &self.points[self.nose_index]
    }

    pub fn position(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|b| *b == bus)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpfError {
    #[error("base case: {0}")]
    BaseCase(PowerFlowError),
    #[error("no load increase direction")]
    NoLoadIncrease,
    #[error("growth direction references unknown bus {0}")]
    UnknownBus(BusId),
    #[error("corrector failed near lambda = {lambda:.6} with the step at its minimum")]
    CorrectorFailed { lambda: f64 },
    #[error("nose not bracketed")]
    NoseNotBracketed,
    #[error("trace has a single point")]
    SinglePoint,
}

/// Loadability margin of a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadabilityMargin {
    pub delta_lambda: f64,
    pub margin_mw: f64,
}

/// Traces the PV curve of `case` along `dirs` up to the first point past the
/// nose, with the nose itself located to high accuracy and inserted.
pub fn trace_pv_curve(case: &PowerCase, dirs: &GrowthDirections, options: &CpfOptions) -> Result<CpfTrace, CpfError> {
    if dirs.demands.iter().all(|d| d.p_d0 == 0.0 && d.q_d0 == 0.0) {
        return Err(CpfError::NoLoadIncrease);
    }
    let solved = solve_model(case, &options.solver).map_err(CpfError::BaseCase)?;
    let mut model = solved.model;
    set_directions(&mut model, case, dirs, options.solver.distributed_slack)?;
    let mut state = solved.state;
    state.lambda = 1.0;
    model.newton(&mut state, &options.solver).map_err(CpfError::BaseCase)?;

    let tracer = Tracer { model: &model, layout: model.layout(), options, template: state };
    let points = tracer.run()?;
    let (nose_index, nose) =
        points.iter().enumerate().max_by(|a, b| a.1.lambda.total_cmp(&b.1.lambda)).expect("trace is never empty");
    Ok(CpfTrace {
        buses: model.buses.clone(),
        delta_lambda: nose.lambda - 1.0,
        nose_index,
        points,
        demand_growth: dirs.total_demand(),
        system_base: case.system_base,
    })
}

fn set_directions(
    model: &mut FlowModel,
    case: &PowerCase,
    dirs: &GrowthDirections,
    distributed: bool,
) -> Result<(), CpfError> {
    let index = case.bus_index();
    let n = model.len();
    model.p_dir = vec![0.0; n];
    model.q_dir = vec![0.0; n];
    let mut share = vec![0.0; n];
    for s in &dirs.supplies {
        let i = *index.get(&s.bus).ok_or(CpfError::UnknownBus(s.bus))?;
        model.p_dir[i] += s.p_s0;
        share[i] += s.gamma * s.p_s0;
    }
    for d in &dirs.demands {
        let i = *index.get(&d.bus).ok_or(CpfError::UnknownBus(d.bus))?;
        model.p_dir[i] -= d.p_d0;
        model.q_dir[i] -= d.q_d0;
    }
    if distributed {
        if share.iter().all(|s| *s == 0.0) {
            return Err(CpfError::BaseCase(PowerFlowError::NoLossSharing));
        }
        model.p_share = share;
    }
    Ok(())
}

struct Tracer<'a> {
    model: &'a FlowModel,
    layout: Layout,
    options: &'a CpfOptions,
    template: State,
}

impl Tracer<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn pack(&self, state: &State) -> DVector<f64> {
        let x = self.model.unknowns(&self.layout, state);
        let mut y = DVector::zeros(self.dim() + 1);
        y.rows_mut(0, self.dim()).copy_from(&x);
        y[self.dim()] = state.lambda;
        y
    }

    fn unpack(&self, y: &DVector<f64>) -> State {
        let mut state = self.template.clone();
        self.model.set_unknowns(&self.layout, &mut state, &y.rows(0, self.dim()).into_owned());
        state.lambda = y[self.dim()];
        state
    }

    fn point(&self, y: &DVector<f64>) -> CpfPoint {
        let s = self.unpack(y);
        CpfPoint { lambda: s.lambda, v: s.v, theta: s.theta, k_g: s.k_g }
    }

    /// Jacobian of the mismatch with respect to `[x; lambda]` plus a row
    /// selecting component `k`.
    fn bordered(&self, state: &State, k: usize) -> DMatrix<f64> {
        let m = self.dim();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(&self.model.jacobian(&self.layout, state));
        a.view_mut((0, m), (m, 1)).copy_from(&self.model.lambda_column(&self.layout));
        a[(m, k)] = 1.0;
        a
    }

    fn tangent(&self, y: &DVector<f64>, k: usize, previous: Option<&DVector<f64>>) -> Option<DVector<f64>> {
        let m = self.dim();
        let a = self.bordered(&self.unpack(y), k);
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let mut t = a.lu().solve(&rhs)?;
        let norm = t.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        t /= norm;
        let forward = match previous {
            Some(p) => t.dot(p) >= 0.0,
            None => t[m] >= 0.0,
        };
        if !forward {
            t = -t;
        }
        Some(t)
    }

    /// Solves the flow equations with component `k` held at `target`.
    fn correct(&self, mut y: DVector<f64>, k: usize, target: f64) -> Option<DVector<f64>> {
        let m = self.dim();
        y[k] = target;
        for _ in 0..=self.options.solver.max_iterations {
            let state = self.unpack(&y);
            let f = self.model.mismatch(&self.layout, &state);
            let worst = f.amax();
            if !worst.is_finite() {
                return None;
            }
            if worst <= self.options.solver.tolerance {
                return Some(y);
            }
            let mut g = DVector::zeros(m + 1);
            g.rows_mut(0, m).copy_from(&f);
            let dy = self.bordered(&state, k).lu().solve(&g)?;
            if !dy.iter().all(|d| d.is_finite()) {
                return None;
            }
            y -= dy;
        }
        None
    }

    fn run(&self) -> Result<Vec<CpfPoint>, CpfError> {
        let m = self.dim();
        let lam = m;
        let mut ys = vec![self.pack(&self.template)];
        let mut previous: Option<DVector<f64>> = None;
        let mut k = lam;
        let mut step = self.options.initial_step;
        loop {
            if ys.len() > self.options.max_points {
                return Err(CpfError::NoseNotBracketed);
            }
            let y = ys.last().expect("trace holds the base point").clone();
            let fail = |step: &mut f64| {
                *step *= 0.5;
                if *step < self.options.min_step {
                    Err(CpfError::CorrectorFailed { lambda: y[lam] })
                } else {
                    Ok(())
                }
            };
            let Some(t) = self.tangent(&y, k, previous.as_ref()) else {
                fail(&mut step)?;
                continue;
            };
            let next_k = t.iamax();
            let predicted = &y + step * &t;
            let Some(corrected) = self.correct(predicted.clone(), next_k, predicted[next_k]) else {
                fail(&mut step)?;
                continue;
            };
            if corrected[lam] <= y[lam] {
                if ys.len() < 2 {
                    fail(&mut step)?;
                    continue;
                }
                let before = &ys[ys.len() - 2];
                let (nose, k) = self.refine_nose(before, &y, &corrected);
                let mut points: Vec<CpfPoint> = ys.iter().map(|y| self.point(y)).collect();
                if nose[lam] > y[lam] {
                    // keep the points in arc order: the nose may lie before the
                    // last accepted point when that one is already past it
                    let between_before = (nose[k] - before[k]) * (y[k] - nose[k]) > 0.0;
                    let at = if between_before { points.len() - 1 } else { points.len() };
                    points.insert(at, self.point(&nose));
                }
                points.push(self.point(&corrected));
                return Ok(points);
            }
            ys.push(corrected);
            previous = Some(t);
            k = next_k;
        }
    }

    /// Maximizes `lambda` over the state component that moves most between
    /// `a` and `c`, with `b` the best point so far. Returns the best point and
    /// the component used.
    fn refine_nose(&self, a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> (DVector<f64>, usize) {
        let m = self.dim();
        let k = (0..m).max_by(|&i, &j| (c[i] - a[i]).abs().total_cmp(&(c[j] - a[j]).abs())).unwrap_or(0);
        let guess = |s: f64| -> DVector<f64> {
            // piecewise-linear interpolation through a, b, c in component k
            let (p, q) = if (s - a[k]) * (b[k] - s) >= 0.0 { (a, b) } else { (b, c) };
            let span = q[k] - p[k];
            let w = if span == 0.0 { 0.0 } else { (s - p[k]) / span };
            p + (q - p) * w
        };
        let evaluate = |s: f64| -> Option<DVector<f64>> { self.correct(guess(s), k, s) };

        let mut best = b.clone();
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (a[k], c[k]);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let lambda_of = |s: f64, best: &mut DVector<f64>| -> f64 {
            match evaluate(s) {
                Some(y) => {
                    if y[m] > best[m] {
                        *best = y.clone();
                    }
                    y[m]
                }
                None => f64::NEG_INFINITY,
            }
        };
        let mut f1 = lambda_of(x1, &mut best);
        let mut f2 = lambda_of(x2, &mut best);
        for _ in 0..200 {
            if (hi - lo).abs() <= 1e-11 * (1.0 + lo.abs()) {
                break;
            }
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = lambda_of(x1, &mut best);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = lambda_of(x2, &mut best);
            }
        }
        (best, k)
    }
}

/// `Delta lambda` at the nose and the matching active-power margin in MW.
pub fn loadability_margin(trace: &CpfTrace) -> Result<LoadabilityMargin, CpfError> {
    if trace.points.len() < 2 {
        return Err(CpfError::SinglePoint);
    }
    if trace.nose_index == 0 || trace.nose_index + 1 >= trace.points.len() {
        return Err(CpfError::NoseNotBracketed);
    }
    let nose = &trace.points[trace.nose_index];
    let delta_lambda = nose.lambda - 1.0;
    Ok(LoadabilityMargin { delta_lambda, margin_mw: delta_lambda * trace.demand_growth * trace.system_base })
}

const TIE: f64 = 1e-9;

/// Bus with the largest voltage drop from the base point to the nose. Ties go
/// to the lower nose voltage, then to the lower bus number.
pub fn critical_bus(trace: &CpfTrace) -> BusId {
    let base = &trace.points[0];
    let nose = trace.nose();
    let mut best = 0;
    for i in 1..trace.buses.len() {
        let drop_i = base.v[i] - nose.v[i];
        let drop_b = base.v[best] - nose.v[best];
        let better = if (drop_i - drop_b).abs() > TIE {
            drop_i > drop_b
        } else if (nose.v[i] - nose.v[best]).abs() > TIE {
            nose.v[i] < nose.v[best]
        } else {
            trace.buses[i] < trace.buses[best]
        };
        if better {
            best = i;
        }
    }
    trace.buses[best]
}

/// PV-curve table: `Loading` (`lambda - 1`) followed by one voltage column
/// per requested bus, headed by its label.
pub fn pv_curve_csv(trace: &CpfTrace, columns: &[(BusId, String)]) -> String {
    let mut out = String::from("Loading");
    for (_, label) in columns {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let positions: Vec<Option<usize>> = columns.iter().map(|(b, _)| trace.position(*b)).collect();
    for p in &trace.points {
        let _ = write!(out, "{}", p.lambda - 1.0);
        for pos in &positions {
            match pos {
                Some(i) => {
                    let _ = write!(out, ",{}", p.v[*i]);
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
