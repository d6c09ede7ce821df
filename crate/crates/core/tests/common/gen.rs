//! Random cases for property tests: a spanning tree of branches plus a few
//! meshing ones, one phase-reference slack, PV units, loads and wind farms at
//! light loading, and optional market and scenario tables.

use gridcase::case::*;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct BusDraw {
    area: u32,
    v0: f64,
    /// 0 none, 1 PV unit, 2 PQ generator
    unit: u8,
    p: f64,
    q_ratio: f64,
    v_set: f64,
    load: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
struct BranchDraw {
    pick: usize,
    r: f64,
    x: f64,
    b: f64,
    tap: Option<f64>,
}

fn bus_draw() -> impl Strategy<Value = BusDraw> {
    (
        1u32..=3,
        0.95f64..1.05,
        0u8..3,
        0.0f64..0.8,
        -0.3f64..0.3,
        0.98f64..1.05,
        prop::option::of((0.0f64..0.6, -0.1f64..0.3)),
    )
        .prop_map(|(area, v0, unit, p, q_ratio, v_set, load)| BusDraw { area, v0, unit, p, q_ratio, v_set, load })
}

fn branch_draw() -> impl Strategy<Value = BranchDraw> {
    (0usize..1000, 0.0f64..0.05, 0.02f64..0.3, 0.0f64..0.1, prop::option::of(0.95f64..1.05))
        .prop_map(|(pick, r, x, b, tap)| BranchDraw { pick, r, x, b, tap })
}

fn profile(area: u32) -> impl Strategy<Value = MonthlyProfile> {
    prop::array::uniform12(0.05f64..1.0).prop_map(move |values| MonthlyProfile { area, values })
}

fn name() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 _\"\\\\-]{1,14}"
}

#[derive(Clone, Debug)]
struct Extras {
    names: bool,
    bus_names: Vec<String>,
    shunt: Option<(usize, f64)>,
    supply: Option<(usize, f64, f64, f64)>,
    demand: Option<(f64, f64)>,
    levels: Vec<MonthlyProfile>,
    factors: Vec<MonthlyProfile>,
    tag: Option<usize>,
}

fn extras(n: usize) -> impl Strategy<Value = Extras> {
    (
        any::<bool>(),
        prop::collection::vec(name(), n),
        prop::option::of((0..n, -0.2f64..0.2)),
        prop::option::of((0..n, 0.1f64..2.0, 0.0f64..300.0, 0.0f64..0.01)),
        prop::option::of((0.1f64..1.0, 100.0f64..900.0)),
        prop::collection::vec(profile(1), 0..=1),
        prop::collection::vec(profile(2), 0..=1),
        prop::option::of(0..n),
    )
        .prop_map(|(names, bus_names, shunt, supply, demand, levels, factors, tag)| Extras {
            names,
            bus_names,
            shunt,
            supply,
            demand,
            levels,
            factors,
            tag,
        })
}

pub fn arb_case() -> impl Strategy<Value = PowerCase> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::btree_set(1u32..999, n),
            prop::collection::vec(bus_draw(), n),
            prop::collection::vec(branch_draw(), n - 1),
            prop::collection::vec((0usize..1000, branch_draw()), 0..3),
            extras(n),
        )
            .prop_map(build)
    })
}

type Draws = (std::collections::BTreeSet<u32>, Vec<BusDraw>, Vec<BranchDraw>, Vec<(usize, BranchDraw)>, Extras);

fn build((numbers, draws, tree, mesh, extra): Draws) -> PowerCase {
    let numbers: Vec<u32> = numbers.into_iter().collect();
    let n = numbers.len();
    let mut case = PowerCase::default();
    for (i, d) in draws.iter().enumerate() {
        case.buses.push(BusRecord {
            number: numbers[i],
            v_base: 230.0,
            v0: d.v0,
            theta0: 0.0,
            area: d.area,
            region: 1,
        });
    }
    let branch = |from: usize, to: usize, d: &BranchDraw| Branch {
        from_bus: numbers[from],
        to_bus: numbers[to],
        s_base: 100.0,
        v_base: 230.0,
        f_nominal: 60.0,
        length: 0.0,
        k_t: d.tap.map(|_| TransformationRatio { primary_kv: 230.0, secondary_kv: 230.0 }),
        r: d.r,
        x: d.x,
        b: d.b,
        tap: d.tap.unwrap_or(0.0),
        phase_shift: 0.0,
        i_max: 0.0,
        p_max: 0.0,
        s_max: 0.0,
        connected: true,
    };
    for (k, d) in tree.iter().enumerate() {
        let child = k + 1;
        case.branches.push(branch(d.pick % child, child, d));
    }
    for (other, d) in &mesh {
        let (a, b) = (other % n, d.pick % n);
        if a != b {
            case.branches.push(branch(a, b, d));
        }
    }
    case.slack_gens.push(SlackGen {
        bus: numbers[0],
        s_base: 100.0,
        v_base: 230.0,
        v0: draws[0].v_set,
        theta0: 0.0,
        q_max: 99.0,
        q_min: -99.0,
        v_max: 1.1,
        v_min: 0.9,
        p_g0: draws[0].p,
        gamma: 1.0,
        is_phase_reference: true,
        connected: true,
    });
    for (i, d) in draws.iter().enumerate().skip(1) {
        match d.unit {
            1 => case.pv_gens.push(PvGen {
                bus: numbers[i],
                s_base: 100.0,
                v_base: 230.0,
                p_gen: d.p,
                v0: d.v_set,
                q_max: 99.0,
                q_min: -99.0,
                v_max: 1.1,
                v_min: 0.9,
                gamma: 1.0,
                connected: true,
            }),
            2 => case.pq_gens.push(PqGen {
                bus: numbers[i],
                s_base: 100.0,
                v_base: 230.0,
                p_gen: d.p,
                q_gen: d.p * d.q_ratio,
                v_max: 1.1,
                v_min: 0.9,
                z_convertible: false,
                connected: true,
            }),
            _ => {}
        }
        if d.unit == 2 {
            continue;
        }
        if let Some((p, q)) = d.load {
            case.pq_loads.push(PqLoad {
                bus: numbers[i],
                s_base: 100.0,
                v_base: 230.0,
                p_load: p,
                q_load: q,
                v_max: 1.1,
                v_min: 0.9,
                z_convertible: false,
                connected: true,
            });
        }
    }
    if extra.names {
        case.bus_names = extra.bus_names.clone();
    }
    if let Some((i, b)) = extra.shunt {
        case.shunts.push(Shunt {
            bus: numbers[i],
            s_base: 100.0,
            v_base: 230.0,
            f_nominal: 60.0,
            g: 0.0,
            b,
            connected: true,
        });
    }
    if let Some((i, max, c1, c2)) = extra.supply {
        case.supplies.push(SupplyBid {
            bus: numbers[i],
            s_base: 100.0,
            p_s0: 0.5 * max,
            p_s_max: max,
            p_s_min: 0.0,
            p_s: 0.0,
            active_cost: CostPolynomial::new(0.0, c1, c2),
            reactive_cost: CostPolynomial::default(),
            commitment: true,
            gamma: 1.0,
            q_max: 0.5,
            q_min: -0.5,
            reserved: [0.0; 3],
            connected: true,
        });
    }
    if let (Some((p_max, c1)), Some(load)) = (extra.demand, case.pq_loads.first().cloned()) {
        case.demands.push(DemandBid {
            bus: load.bus,
            s_base: 100.0,
            p_d0: load.p_load,
            q_d0: load.q_load,
            p_d_max: p_max,
            p_d_min: 0.0,
            p_d: 0.0,
            active_cost: CostPolynomial::new(0.0, c1, 0.0),
            reactive_cost: CostPolynomial::default(),
            commitment: true,
            reserved: [0.0; 3],
            connected: true,
        });
    }
    case.load_levels.heavy = extra.levels.clone();
    case.capacity_factors.wind = extra.factors.clone();
    if let Some(i) = extra.tag {
        case.source_tags.push(SourceTag { bus: numbers[i], source: PrimarySource::Hydro });
    }
    case
}
