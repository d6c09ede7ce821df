//! Fixture loading and independent reference solvers shared by the
//! integration tests. Nothing here calls the library's network or solver
//! code: the admittance matrix is rebuilt from the branch records and the
//! balance equations are solved by a dense Newton iteration on a
//! finite-difference Jacobian.

#![allow(dead_code)]

pub mod gen;

use std::collections::HashMap;

use gridcase::case::{BusId, PowerCase};
use gridcase::parse_case;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/fixtures/{name}.case", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn fixture(name: &str) -> PowerCase {
    parse_case(&fixture_text(name)).expect("fixture parses")
}

pub const FIXTURES: [&str; 2] = ["desk3", "desk9"];

/// Admittance matrix from the branch and shunt records, on the system base.
pub fn ybus(case: &PowerCase) -> Vec<Vec<Complex64>> {
    let n = case.buses.len();
    let pos: HashMap<BusId, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.number, i)).collect();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in case.branches.iter().filter(|b| b.connected) {
        let scale = case.system_base / br.s_base;
        let len = if br.length > 0.0 { br.length } else { 1.0 };
        let z = Complex64::new(br.r * len * scale, br.x * len * scale);
        let series = 1.0 / z;
        let charging = Complex64::new(0.0, br.b * len / scale / 2.0);
        let a = if br.tap > 0.0 { br.tap } else { 1.0 };
        let t = Complex64::from_polar(a, br.phase_shift.to_radians());
        let (f, k) = (pos[&br.from_bus], pos[&br.to_bus]);
        y[f][f] += (series + charging) / (a * a);
        y[k][k] += series + charging;
        y[f][k] -= series / t.conj();
        y[k][f] -= series / t;
    }
    for sh in case.shunts.iter().filter(|s| s.connected) {
        let i = pos[&sh.bus];
        y[i][i] += Complex64::new(sh.g, sh.b) * (sh.s_base / case.system_base);
    }
    y
}

/// Complex power injected at every bus, `V_i conj(sum_k Y_ik V_k)`.
pub fn power(y: &[Vec<Complex64>], v: &[f64], theta: &[f64]) -> Vec<Complex64> {
    let phasor: Vec<Complex64> = v.iter().zip(theta).map(|(m, a)| Complex64::from_polar(*m, *a)).collect();
    (0..v.len())
        .map(|i| {
            let current: Complex64 = (0..v.len()).map(|k| y[i][k] * phasor[k]).sum();
            phasor[i] * current.conj()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Reference,
    Voltage,
    Load,
}

/// Bus types and scheduled net injections (p.u.) of a case.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub kind: Vec<Kind>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Schedule {
    pub fn from_case(case: &PowerCase) -> Self {
        let n = case.buses.len();
        let pos: HashMap<BusId, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.number, i)).collect();
        let base = |s: f64| s / case.system_base;
        let mut s = Schedule {
            kind: vec![Kind::Load; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
            v: vec![1.0; n],
            theta: vec![0.0; n],
        };
        for l in case.pq_loads.iter().filter(|l| l.connected) {
            s.p[pos[&l.bus]] -= l.p_load * base(l.s_base);
            s.q[pos[&l.bus]] -= l.q_load * base(l.s_base);
        }
        for g in case.pq_gens.iter().filter(|g| g.connected) {
            s.p[pos[&g.bus]] += g.p_gen * base(g.s_base);
            s.q[pos[&g.bus]] += g.q_gen * base(g.s_base);
        }
        for g in case.pv_gens.iter().filter(|g| g.connected) {
            let i = pos[&g.bus];
            s.p[i] += g.p_gen * base(g.s_base);
            s.kind[i] = Kind::Voltage;
            s.v[i] = g.v0;
        }
        for g in case.slack_gens.iter().filter(|g| g.connected) {
            let i = pos[&g.bus];
            s.kind[i] = if g.is_phase_reference { Kind::Reference } else { Kind::Voltage };
            s.p[i] += g.p_g0 * base(g.s_base);
            s.v[i] = g.v0;
            s.theta[i] = g.theta0;
        }
        s
    }

    /// Schedule at loading `lambda` along the supply and demand rows (or the
    /// base loads and unit outputs when those are absent).
    pub fn at_loading(case: &PowerCase, lambda: f64) -> Self {
        let mut s = Self::from_case(case);
        let pos: HashMap<BusId, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.number, i)).collect();
        let base = |b: f64| b / case.system_base;
        let growth = lambda - 1.0;
        let supplies: Vec<_> = case.supplies.iter().filter(|r| r.connected).collect();
        if supplies.is_empty() {
            for g in case.pv_gens.iter().filter(|g| g.connected) {
                s.p[pos[&g.bus]] += growth * g.p_gen * base(g.s_base);
            }
            for g in case.slack_gens.iter().filter(|g| g.connected) {
                s.p[pos[&g.bus]] += growth * g.p_g0 * base(g.s_base);
            }
        } else {
            for r in supplies {
                s.p[pos[&r.bus]] += growth * r.p_s0 * base(r.s_base);
            }
        }
        let demands: Vec<_> = case.demands.iter().filter(|r| r.connected).collect();
        if demands.is_empty() {
            for l in case.pq_loads.iter().filter(|l| l.connected) {
                s.p[pos[&l.bus]] -= growth * l.p_load * base(l.s_base);
                s.q[pos[&l.bus]] -= growth * l.q_load * base(l.s_base);
            }
        } else {
            for r in demands {
                s.p[pos[&r.bus]] -= growth * r.p_d0 * base(r.s_base);
                s.q[pos[&r.bus]] -= growth * r.q_d0 * base(r.s_base);
            }
        }
        s
    }
}

/// Solution of the balance equations of `schedule`, or `None` when Newton
/// does not reach `1e-11` from the given start.
pub fn dense_newton(
    y: &[Vec<Complex64>],
    schedule: &Schedule,
    start: Option<(&[f64], &[f64])>,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = schedule.kind.len();
    let angle_buses: Vec<usize> = (0..n).filter(|i| schedule.kind[*i] != Kind::Reference).collect();
    let magnitude_buses: Vec<usize> = (0..n).filter(|i| schedule.kind[*i] == Kind::Load).collect();
    let (mut v, mut theta) = match start {
        Some((v, t)) => (v.to_vec(), t.to_vec()),
        None => (schedule.v.clone(), schedule.theta.clone()),
    };
    for i in 0..n {
        if schedule.kind[i] != Kind::Load {
            v[i] = schedule.v[i];
        }
        if schedule.kind[i] == Kind::Reference {
            theta[i] = schedule.theta[i];
        }
    }
    let unknowns = angle_buses.len() + magnitude_buses.len();
    let pack = |v: &[f64], t: &[f64]| {
        DVector::from_iterator(unknowns, angle_buses.iter().map(|i| t[*i]).chain(magnitude_buses.iter().map(|i| v[*i])))
    };
    let unpack = |x: &DVector<f64>, v: &mut Vec<f64>, t: &mut Vec<f64>| {
        for (k, i) in angle_buses.iter().enumerate() {
            t[*i] = x[k];
        }
        for (k, i) in magnitude_buses.iter().enumerate() {
            v[*i] = x[angle_buses.len() + k];
        }
    };
    let residual = |v: &[f64], t: &[f64]| {
        let s = power(y, v, t);
        DVector::from_iterator(
            unknowns,
            angle_buses
                .iter()
                .map(|i| s[*i].re - schedule.p[*i])
                .chain(magnitude_buses.iter().map(|i| s[*i].im - schedule.q[*i])),
        )
    };

    let mut x = pack(&v, &theta);
    for _ in 0..60 {
        unpack(&x, &mut v, &mut theta);
        let f = residual(&v, &theta);
        if !f.iter().all(|r| r.is_finite()) {
            return None;
        }
        if f.amax() < 1e-11 {
            return Some((v, theta));
        }
        let h = 1e-7;
        let mut jac = DMatrix::zeros(unknowns, unknowns);
        for c in 0..unknowns {
            let (mut vp, mut tp) = (v.clone(), theta.clone());
            let (mut vm, mut tm) = (v.clone(), theta.clone());
            let mut xp = x.clone();
            xp[c] += h;
            unpack(&xp, &mut vp, &mut tp);
            let mut xm = x.clone();
            xm[c] -= h;
            unpack(&xm, &mut vm, &mut tm);
            let column = (residual(&vp, &tp) - residual(&vm, &tm)) / (2.0 * h);
            jac.set_column(c, &column);
        }
        let dx = jac.lu().solve(&(-f))?;
        x += dx;
        if x.iter().any(|e| !e.is_finite())
            || magnitude_buses.iter().enumerate().any(|(k, _)| x[angle_buses.len() + k] < 0.3)
        {
            return None;
        }
    }
    None
}

/// Largest loading `lambda` at which the balance equations still solve,
/// found by bisection with warm starts along the upper branch.
pub fn loadability_by_bisection(case: &PowerCase, tolerance: f64) -> f64 {
    let y = ybus(case);
    let base = dense_newton(&y, &Schedule::at_loading(case, 1.0), None).expect("base case solves");
    let (mut lo, mut state) = (1.0, base);
    let mut step = 0.5;
    // bracket with growing steps
    let mut hi = loop {
        let trial = lo + step;
        match dense_newton(&y, &Schedule::at_loading(case, trial), Some((&state.0, &state.1))) {
            Some(next) => {
                lo = trial;
                state = next;
                step *= 1.5;
            }
            None => break trial,
        }
    };
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        match dense_newton(&y, &Schedule::at_loading(case, mid), Some((&state.0, &state.1))) {
            Some(next) => {
                lo = mid;
                state = next;
            }
            None => hi = mid,
        }
    }
    hi = 0.5 * (lo + hi);
    hi
}

/// `desk9` with one violation of every validator rule, one case per rule.
pub fn seeded_violations() -> Vec<(gridcase::case::Rule, PowerCase)> {
    use gridcase::case::{PrimarySource, Rule, SlackGen, SourceTag};
    let base = fixture("desk9");
    let seeded = |rule: Rule, mutate: &dyn Fn(&mut PowerCase)| {
        let mut case = base.clone();
        mutate(&mut case);
        (rule, case)
    };
    vec![
        seeded(Rule::InvalidBusNumber, &|c| c.buses[0].number = 0),
        seeded(Rule::DuplicateBus, &|c| c.buses[1].number = c.buses[0].number),
        seeded(Rule::NonPositiveVoltageBase, &|c| c.buses[0].v_base = 0.0),
        seeded(Rule::NonPositiveInitialVoltage, &|c| c.buses[2].v0 = -1.0),
        seeded(Rule::UnknownBus, &|c| c.pq_loads[0].bus = 999),
        seeded(Rule::UnknownAreaSlack, &|c| c.areas[0].slack_bus = 999),
        seeded(Rule::NonPositivePowerBase, &|c| c.pq_loads[0].s_base = -100.0),
        seeded(Rule::NameTableLength, &|c| {
            c.bus_names.pop();
        }),
        seeded(Rule::VoltageBand, &|c| c.pq_loads[0].v_min = 1.2),
        seeded(Rule::NegativeLoad, &|c| c.pq_loads[1].p_load = -0.1),
        seeded(Rule::CoincidentPqLoadAndGen, &|c| c.pq_loads[0].bus = 101),
        seeded(Rule::PowerFactorBand, &|c| c.pq_gens[0].q_gen = 0.5),
        seeded(Rule::NoPhaseReference, &|c| c.slack_gens[0].is_phase_reference = false),
        seeded(Rule::MultiplePhaseReferences, &|c| {
            let second = SlackGen { bus: 132, ..c.slack_gens[0].clone() };
            c.slack_gens.push(second);
        }),
        seeded(Rule::ReactiveBand, &|c| c.pv_gens[0].q_min = 2.0),
        seeded(Rule::LossShareRange, &|c| c.pv_gens[0].gamma = 1.5),
        seeded(Rule::NonPositiveFrequency, &|c| c.branches[0].f_nominal = 0.0),
        seeded(Rule::SelfLoop, &|c| c.branches[4].to_bus = c.branches[4].from_bus),
        seeded(Rule::ZeroReactance, &|c| c.branches[5].x = 0.0),
        seeded(Rule::TapDefaulted, &|c| c.branches[0].tap = 0.0),
        seeded(Rule::OfferBounds, &|c| c.supplies[0].p_s_min = 1.0),
        seeded(Rule::NegativeCost, &|c| c.supplies[1].active_cost.c1 = -1.0),
        seeded(Rule::DemandBounds, &|c| c.demands[0].p_d_min = -0.1),
        seeded(Rule::DemandWithoutLoad, &|c| c.demands[0].bus = 105),
        seeded(Rule::NonPositiveCentroid, &|c| c.load_levels.heavy[0].values[0] = 0.0),
        seeded(Rule::CentroidOrder, &|c| c.load_levels.light[0].values[0] = 2.0),
        seeded(Rule::CapacityFactorRange, &|c| c.capacity_factors.wind[0].values[0] = 1.5),
        seeded(Rule::DuplicateProfile, &|c| {
            let copy = c.load_levels.heavy[0].clone();
            c.load_levels.heavy.push(copy);
        }),
        seeded(Rule::DuplicateSourceTag, &|c| {
            c.source_tags.push(SourceTag { bus: 101, source: PrimarySource::Wind });
            c.source_tags.push(SourceTag { bus: 101, source: PrimarySource::Hydro });
        }),
        seeded(Rule::Islanded, &|c| c.branches.retain(|b| !(b.from_bus == 103 && b.to_bus == 107))),
    ]
}
