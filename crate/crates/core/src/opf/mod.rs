//! Multi-objective optimal power flow blending short-term market surplus and
//! the voltage-stability margin:
//!
//! ```text
//! min G = -omega (C_D(P_D) - C_S(P_S)) - (1 - omega) lambda_c
//! ```
//!
//! subject to base-case and critical-case balance, bid bounds, voltage and
//! reactive limits and `lambda_min <= lambda_c <= lambda_max`. Inelastic load
//! is a fixed share of the case load; the elastic remainder is bought through
//! the demand bids.

mod ipm;
mod problem;

pub use ipm::IpmOptions;

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::case::{BusId, DemandBid, PowerCase, SupplyBid, DEFAULT_V_MAX, DEFAULT_V_MIN};
use crate::network::{build_admittance, injections, NetworkError};
use crate::powerflow::{solve_power_flow, SolverOptions};
use ipm::{IpmFailure, Nlp};
use problem::{bid_cost, DemandVar, MarketProblem, SupplyVar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpfError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("no single connected phase-reference slack unit")]
    NoPhaseReference,
    #[error("{table} row {row}: unknown bus {bus}")]
    UnknownBus { table: &'static str, row: usize, bus: BusId },
    #[error("no in-service supply or demand bids")]
    NoMarket,
    #[error("weighting factor {0} is outside [0, 1]")]
    InvalidOmega(f64),
    #[error("invalid loading bounds [{0}, {1}]")]
    InvalidLambdaBounds(f64, f64),
    #[error("empty voltage band at bus {0}")]
    EmptyVoltageBand(BusId),
    #[error("iteration limit reached with constraint violation {feasibility:.3e}")]
    IterationLimit { feasibility: f64 },
    #[error("numerical breakdown at iteration {iteration}")]
    Numerical { iteration: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpfOptions {
    /// Weight of the market surplus; `1 - omega` weights `lambda_c`.
    pub omega: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Share of every case load that is inelastic.
    pub inelastic_share: f64,
    pub ipm: IpmOptions,
    /// Start each sweep point from the previous optimum.
    pub warm_start: bool,
}

impl Default for OpfOptions {
    fn default() -> Self {
        Self {
            omega: 0.5,
            lambda_min: 1.01,
            lambda_max: 1.99,
            inelastic_share: 0.9,
            ipm: IpmOptions::default(),
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpfSolution {
    pub omega: f64,
    pub buses: Vec<BusId>,
    /// Bus of each in-service supply bid, in `Supply.con` order.
    pub supply_buses: Vec<BusId>,
    /// Dispatched offers (p.u.).
    pub p_s: Vec<f64>,
    pub demand_buses: Vec<BusId>,
    pub p_d: Vec<f64>,
    /// Buses with reactive-controlling units.
    pub q_buses: Vec<BusId>,
    pub q_g: Vec<f64>,
    pub q_gc: Vec<f64>,
    pub lambda_c: f64,
    pub k_gc: f64,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub v_c: Vec<f64>,
    pub theta_c: Vec<f64>,
    /// Specified net injections of the base and critical cases (p.u.).
    pub p_net: Vec<f64>,
    pub q_net: Vec<f64>,
    pub p_net_c: Vec<f64>,
    pub q_net_c: Vec<f64>,
    /// Value of `G`.
    pub objective: f64,
    /// `C_D - C_S` per hour.
    pub surplus: f64,
    pub losses_mw: f64,
    pub iterations: usize,
    pub system_base: f64,
    variables: DVector<f64>,
}

impl OpfSolution {
    /// Total dispatched supply in MW.
    pub fn supply_mw(&self) -> f64 {
        self.p_s.iter().sum::<f64>() * self.system_base
    }
}

/// Quantities priced by [`evaluate_costs`], in MW and MVAr. Empty reactive
/// vectors mean no reactive quantities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarketQuantities {
    pub supply_p: Vec<f64>,
    pub supply_q: Vec<f64>,
    pub demand_p: Vec<f64>,
    pub demand_q: Vec<f64>,
}

/// `(C_S, C_D)`: total supply cost and total demand benefit per hour.
pub fn evaluate_costs(supplies: &[SupplyBid], demands: &[DemandBid], quantities: &MarketQuantities) -> (f64, f64) {
    let at = |v: &[f64], k: usize| v.get(k).copied();
    let mut c_s = 0.0;
    for (k, s) in supplies.iter().enumerate() {
        if let Some(p) = at(&quantities.supply_p, k) {
            c_s += bid_cost(&s.active_cost, s.commitment, p);
        }
        if let Some(q) = at(&quantities.supply_q, k) {
            c_s += bid_cost(&s.reactive_cost, s.commitment, q);
        }
    }
    let mut c_d = 0.0;
    for (k, d) in demands.iter().enumerate() {
        if let Some(p) = at(&quantities.demand_p, k) {
            c_d += bid_cost(&d.active_cost, d.commitment, p);
        }
        if let Some(q) = at(&quantities.demand_q, k) {
            c_d += bid_cost(&d.reactive_cost, d.commitment, q);
        }
    }
    (c_s, c_d)
}

/// Solves the program for one weighting factor.
pub fn solve_market_vsc_opf(case: &PowerCase, options: &OpfOptions) -> Result<OpfSolution, OpfError> {
    let built = build(case, options)?;
    let start = initial_point(case, &built);
    run(case, &built, &start, options)
}

/// One solution per weighting factor, in input order. With warm starts each
/// point starts from the previous optimum; otherwise points run in parallel.
pub fn pareto_sweep(case: &PowerCase, omegas: &[f64], options: &OpfOptions) -> Vec<Result<OpfSolution, OpfError>> {
    let solve_one = |omega: f64, warm: Option<&DVector<f64>>| {
        let opts = OpfOptions { omega, ..options.clone() };
        let built = build(case, &opts)?;
        let start = match warm {
            Some(z) => z.clone(),
            None => initial_point(case, &built),
        };
        run(case, &built, &start, &opts)
    };
    if !options.warm_start {
        return omegas.par_iter().map(|&w| solve_one(w, None)).collect();
    }
    let mut out: Vec<Result<OpfSolution, OpfError>> = Vec::with_capacity(omegas.len());
    let mut warm: Option<DVector<f64>> = None;
    for &omega in omegas {
        let mut result = solve_one(omega, warm.as_ref());
        if result.is_err() && warm.is_some() {
            result = solve_one(omega, None);
        }
        if let Ok(sol) = &result {
            warm = Some(sol.variables.clone());
        }
        out.push(result);
    }
    out
}

/// Dispatch-versus-weighting table: `weighting` then one MW column per
/// supply bid, headed by its bus label. Failed points keep empty cells.
pub fn pareto_csv(case: &PowerCase, omegas: &[f64], results: &[Result<OpfSolution, OpfError>]) -> String {
    let plants: Vec<String> = case.supplies.iter().filter(|s| s.connected).map(|s| case.bus_label(s.bus)).collect();
    let mut out = String::from("weighting");
    for p in &plants {
        out.push(',');
        out.push_str(p);
    }
    out.push('\n');
    for (omega, result) in omegas.iter().zip(results) {
        let _ = write!(out, "{omega}");
        match result {
            Ok(sol) => {
                for p in &sol.p_s {
                    let _ = write!(out, ",{}", p * sol.system_base);
                }
            }
            Err(_) => out.push_str(&",".repeat(plants.len())),
        }
        out.push('\n');
    }
    out
}

struct Built {
    problem: MarketProblem,
    buses: Vec<BusId>,
    supply_buses: Vec<BusId>,
    demand_buses: Vec<BusId>,
}

fn build(case: &PowerCase, options: &OpfOptions) -> Result<Built, OpfError> {
    if !(0.0..=1.0).contains(&options.omega) {
        return Err(OpfError::InvalidOmega(options.omega));
    }
    if !(options.lambda_min < options.lambda_max) {
        return Err(OpfError::InvalidLambdaBounds(options.lambda_min, options.lambda_max));
    }
    let admittance = build_admittance(case)?;
    let index = case.bus_index();
    let n = case.bus_count();
    let locate = |table: &'static str, row: usize, bus: BusId| {
        index.get(&bus).copied().ok_or(OpfError::UnknownBus { table, row, bus })
    };
    let reference = case.phase_reference().ok_or(OpfError::NoPhaseReference)?;
    let ref_idx = locate("SW.con", 0, reference.bus)?;
    let base = |s: f64| case.to_system_base(s);

    let mut v_lower = vec![f64::NEG_INFINITY; n];
    let mut v_upper = vec![f64::INFINITY; n];
    let mut band = |i: usize, lo: f64, hi: f64| {
        v_lower[i] = v_lower[i].max(lo);
        v_upper[i] = v_upper[i].min(hi);
    };
    let mut q_bounds: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut p_g0 = vec![0.0; n];
    let mut q_w = vec![0.0; n];
    let mut p_l0 = vec![0.0; n];
    let mut q_l0 = vec![0.0; n];

    for (row, g) in case.slack_gens.iter().enumerate().filter(|(_, g)| g.connected) {
        let i = locate("SW.con", row, g.bus)?;
        band(i, g.v_min, g.v_max);
        let e = q_bounds.entry(i).or_default();
        e.0 += g.q_min * base(g.s_base);
        e.1 += g.q_max * base(g.s_base);
        p_g0[i] += g.p_g0 * base(g.s_base);
    }
    for (row, g) in case.pv_gens.iter().enumerate().filter(|(_, g)| g.connected) {
        let i = locate("PV.con", row, g.bus)?;
        band(i, g.v_min, g.v_max);
        let e = q_bounds.entry(i).or_default();
        e.0 += g.q_min * base(g.s_base);
        e.1 += g.q_max * base(g.s_base);
        p_g0[i] += g.p_gen * base(g.s_base);
    }
    for (row, g) in case.pq_gens.iter().enumerate().filter(|(_, g)| g.connected) {
        let i = locate("PQgen.con", row, g.bus)?;
        band(i, g.v_min, g.v_max);
        p_g0[i] += g.p_gen * base(g.s_base);
        q_w[i] += g.q_gen * base(g.s_base);
    }
    for (row, l) in case.pq_loads.iter().enumerate().filter(|(_, l)| l.connected) {
        let i = locate("PQ.con", row, l.bus)?;
        band(i, l.v_min, l.v_max);
        p_l0[i] += options.inelastic_share * l.p_load * base(l.s_base);
        q_l0[i] += options.inelastic_share * l.q_load * base(l.s_base);
    }
    for i in 0..n {
        if !v_lower[i].is_finite() {
            v_lower[i] = DEFAULT_V_MIN;
        }
        if !v_upper[i].is_finite() {
            v_upper[i] = DEFAULT_V_MAX;
        }
        if v_lower[i] >= v_upper[i] {
            return Err(OpfError::EmptyVoltageBand(case.buses[i].number));
        }
    }

    let mut q_buses: Vec<usize> = q_bounds.keys().copied().collect();
    q_buses.sort_unstable();
    let q_lower = q_buses.iter().map(|i| q_bounds[i].0).collect();
    let q_upper = q_buses.iter().map(|i| q_bounds[i].1).collect();

    let mut supplies = Vec::new();
    let mut supply_buses = Vec::new();
    for (row, s) in case.supplies.iter().enumerate().filter(|(_, s)| s.connected) {
        let i = locate("Supply.con", row, s.bus)?;
        // the offer replaces whatever fixed generation the bus had
        p_g0[i] = 0.0;
        supplies.push(SupplyVar {
            bus: i,
            lower: s.p_s_min * base(s.s_base),
            upper: s.p_s_max * base(s.s_base),
            active_cost: s.active_cost,
            reactive_cost: s.reactive_cost,
            commitment: s.commitment,
            q_slot: q_buses.iter().position(|q| *q == i),
        });
        supply_buses.push(s.bus);
    }
    let mut demands = Vec::new();
    let mut demand_buses = Vec::new();
    for (row, d) in case.demands.iter().enumerate().filter(|(_, d)| d.connected) {
        let i = locate("Demand.con", row, d.bus)?;
        demands.push(DemandVar {
            bus: i,
            lower: d.p_d_min * base(d.s_base),
            upper: d.p_d_max * base(d.s_base),
            ratio: if d.p_d0 != 0.0 { d.q_d0 / d.p_d0 } else { 0.0 },
            active_cost: d.active_cost,
            reactive_cost: d.reactive_cost,
            commitment: d.commitment,
        });
        demand_buses.push(d.bus);
    }
    if supplies.is_empty() && demands.is_empty() {
        return Err(OpfError::NoMarket);
    }

    let largest_price = supplies
        .iter()
        .map(|s| s.active_cost.c1.abs().max(s.reactive_cost.c1.abs()))
        .chain(demands.iter().map(|d| d.active_cost.c1.abs().max(d.reactive_cost.c1.abs())))
        .fold(0.0, f64::max);
    let objective_scale = 1.0 + options.omega * case.system_base * largest_price;

    Ok(Built {
        problem: MarketProblem {
            y: admittance.matrix().clone(),
            reference: ref_idx,
            ref_theta: reference.theta0,
            v_lower,
            v_upper,
            q_buses,
            q_lower,
            q_upper,
            supplies,
            demands,
            p_g0,
            p_l0,
            q_l0,
            q_w,
            lambda_min: options.lambda_min,
            lambda_max: options.lambda_max,
            omega: options.omega,
            system_base: case.system_base,
            objective_scale,
        },
        buses: case.buses.iter().map(|b| b.number).collect(),
        supply_buses,
        demand_buses,
    })
}

/// Voltages from a plain power flow when it solves, flat otherwise; market
/// quantities at mid-band.
fn initial_point(case: &PowerCase, built: &Built) -> DVector<f64> {
    let p = &built.problem;
    let n = p.n();
    let (theta, v, q_gen) = match solve_power_flow(case, &SolverOptions::default()) {
        Ok(sol) => {
            let mut q = vec![0.0; n];
            for u in &sol.units {
                if let Some(i) = sol.position(u.bus) {
                    q[i] += u.q;
                }
            }
            (sol.theta, sol.v, q)
        }
        Err(_) => (vec![p.ref_theta; n], vec![1.0; n], vec![0.0; n]),
    };
    let mid = |lo: f64, hi: f64| 0.5 * (lo + hi);
    let p_s: Vec<f64> = p.supplies.iter().map(|s| mid(s.lower, s.upper)).collect();
    let p_d: Vec<f64> = p.demands.iter().map(|d| mid(d.lower, d.upper)).collect();
    let lambda = p.lambda_min + 0.25 * (p.lambda_max - p.lambda_min);
    p.encode(&theta, &v, &theta, &v, &q_gen, &p_s, &p_d, lambda)
}

fn run(case: &PowerCase, built: &Built, start: &DVector<f64>, options: &OpfOptions) -> Result<OpfSolution, OpfError> {
    let p = &built.problem;
    let result = ipm::solve(p, start, &options.ipm).map_err(|e| match e {
        IpmFailure::IterationLimit { feasibility } => OpfError::IterationLimit { feasibility },
        IpmFailure::Numerical { iteration } => OpfError::Numerical { iteration },
    })?;
    let z = result.z;
    let b = p.blocks();
    let d = p.decode(&z);
    let n = p.n();
    let (p_calc, _) = injections(&p.y, &d.v, &d.theta);
    let q_g: Vec<f64> = (0..p.q_buses.len()).map(|k| z[b.qg + k]).collect();
    let q_gc: Vec<f64> = (0..p.q_buses.len()).map(|k| z[b.qg_c + k]).collect();
    let p_net = (0..n).map(|i| d.p_gen[i] - d.p_load[i]).collect();
    let q_net = (0..n).map(|i| d.q_gen[i] + p.q_w[i] - d.q_load[i]).collect();
    let p_net_c = (0..n).map(|i| (d.lambda + d.k_g) * d.p_gen[i] - d.lambda * d.p_load[i]).collect();
    let q_net_c = (0..n).map(|i| d.q_gen_c[i] + p.q_w[i] - d.lambda * d.q_load[i]).collect();
    Ok(OpfSolution {
        omega: options.omega,
        buses: built.buses.clone(),
        supply_buses: built.supply_buses.clone(),
        p_s: (0..p.supplies.len()).map(|k| z[b.ps + k]).collect(),
        demand_buses: built.demand_buses.clone(),
        p_d: (0..p.demands.len()).map(|k| z[b.pd + k]).collect(),
        q_buses: p.q_buses.iter().map(|i| built.buses[*i]).collect(),
        q_g,
        q_gc,
        lambda_c: d.lambda,
        k_gc: d.k_g,
        p_net,
        q_net,
        p_net_c,
        q_net_c,
        objective: p.objective(&z) * p.objective_scale,
        surplus: p.surplus(&z),
        losses_mw: p_calc.iter().sum::<f64>() * case.system_base,
        iterations: result.iterations,
        system_base: case.system_base,
        v: d.v,
        theta: d.theta,
        v_c: d.v_c,
        theta_c: d.theta_c,
        variables: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::CostPolynomial;

    fn supply(c0: f64, c1: f64, c2: f64, committed: bool) -> SupplyBid {
        SupplyBid {
            bus: 1,
            s_base: 100.0,
            p_s0: 0.0,
            p_s_max: 1.0,
            p_s_min: 0.0,
            p_s: 0.0,
            active_cost: CostPolynomial::new(c0, c1, c2),
            reactive_cost: CostPolynomial::default(),
            commitment: committed,
            gamma: 1.0,
            q_max: 0.0,
            q_min: 0.0,
            reserved: [0.0; 3],
            connected: true,
        }
    }

    #[test]
    fn cost_evaluation() {
        let q = |p: f64| MarketQuantities { supply_p: vec![p], ..MarketQuantities::default() };
        assert_eq!(evaluate_costs(&[supply(0.0, 173.38, 0.0, true)], &[], &q(1.0)), (173.38, 0.0));
        assert_eq!(evaluate_costs(&[supply(0.0, 0.0, 0.0, true)], &[], &q(7.0)), (0.0, 0.0));
        assert_eq!(evaluate_costs(&[supply(1.0, 2.0, 3.0, true)], &[], &q(2.0)).0, 17.0);
        assert_eq!(evaluate_costs(&[supply(1.0, 2.0, 3.0, false)], &[], &q(2.0)).0, 16.0);
    }

    #[test]
    fn omega_out_of_range_is_rejected() {
        let options = OpfOptions { omega: 1.5, ..OpfOptions::default() };
        assert_eq!(solve_market_vsc_opf(&PowerCase::default(), &options).unwrap_err(), OpfError::InvalidOmega(1.5));
    }

    #[test]
    fn empty_sweep_is_empty() {
        assert!(pareto_sweep(&PowerCase::default(), &[], &OpfOptions::default()).is_empty());
    }
}
