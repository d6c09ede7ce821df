mod common;

use common::gen::arb_case;
use gridcase::case::{LoadLevel, MonthlyProfile, PowerCase};
use gridcase::network::build_admittance;
use gridcase::powerflow::{solve_power_flow, ConstantImpedanceLoad, SolverOptions};
use gridcase::scenario::{apply_growth, apply_load_level, compound_growth, LevelChoice, ScenarioSpec};
use gridcase::{parse_case, serialize_case};
use proptest::prelude::*;

fn permuted() -> impl Strategy<Value = (PowerCase, Vec<usize>)> {
    arb_case().prop_flat_map(|case| {
        let n = case.buses.len();
        (Just(case), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity(case in arb_case()) {
        let text = serialize_case(&case);
        prop_assert_eq!(parse_case(&text).unwrap(), case);
    }

    #[test]
    fn comments_and_blank_lines_change_nothing(case in arb_case(), every in 1usize..4) {
        let text = serialize_case(&case);
        let mut noisy = String::from("# leading comment\n\n");
        for (k, line) in text.lines().enumerate() {
            noisy.push_str(line);
            if k % every == 0 && !line.is_empty() {
                noisy.push_str("   # trailing note");
            }
            noisy.push('\n');
            if k % every == 0 {
                noisy.push_str("\n   \n# between rows\n");
            }
        }
        prop_assert_eq!(parse_case(&noisy).unwrap(), case);
    }

    #[test]
    fn admittance_is_symmetric_and_matches_the_oracle(case in arb_case()) {
        let y = build_admittance(&case).unwrap();
        let oracle = common::ybus(&case);
        let m = y.matrix();
        for i in 0..y.len() {
            for k in 0..y.len() {
                prop_assert!((m[(i, k)] - m[(k, i)]).norm() < 1e-12);
                prop_assert!((m[(i, k)] - oracle[i][k]).norm() < 1e-9 * (1.0 + oracle[i][k].norm()));
            }
        }
    }

    #[test]
    fn bus_order_does_not_change_the_solution((case, order) in permuted()) {
        let Ok(reference) = solve_power_flow(&case, &SolverOptions::default()) else {
            return Err(TestCaseError::reject("case does not solve"));
        };
        let mut shuffled = case.clone();
        shuffled.buses = order.iter().map(|i| case.buses[*i].clone()).collect();
        if !case.bus_names.is_empty() {
            shuffled.bus_names = order.iter().map(|i| case.bus_names[*i].clone()).collect();
        }
        shuffled.branches.reverse();
        let sol = solve_power_flow(&shuffled, &SolverOptions::default()).unwrap();
        for (i, bus) in reference.buses.iter().enumerate() {
            let (v, theta) = sol.voltage(*bus).unwrap();
            prop_assert!((v - reference.v[i]).abs() < 1e-8);
            prop_assert!((theta - reference.theta[i]).abs() < 1e-8);
        }
        prop_assert!((sol.losses_mw - reference.losses_mw).abs() < 1e-6);
    }

    #[test]
    fn solutions_balance_every_bus(case in arb_case()) {
        let Ok(sol) = solve_power_flow(&case, &SolverOptions::default()) else {
            return Err(TestCaseError::reject("case does not solve"));
        };
        let schedule = common::Schedule::from_case(&case);
        let s = common::power(&common::ybus(&case), &sol.v, &sol.theta);
        for (i, s) in s.iter().enumerate() {
            if schedule.kind[i] != common::Kind::Reference {
                prop_assert!((s.re - schedule.p[i]).abs() < 1e-8);
            }
            if schedule.kind[i] == common::Kind::Load {
                prop_assert!((s.im - schedule.q[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn level_and_growth_compose(
        p in 0.0f64..5.0,
        centroid in 0.5f64..1.5,
        rates in prop::collection::vec(-5.0f64..10.0, 0..5),
        month in 1u8..=12,
    ) {
        let text = format!(
            "Bus.con\n1 230 1 0 1 1\nPQ.con\n1 100 230 {p} {q} 1.1 0.9 0 1\n",
            q = 0.3 * p
        );
        let mut case = parse_case(&text).unwrap();
        let mut values = [1.0; 12];
        values[usize::from(month) - 1] = centroid;
        case.load_levels.heavy.push(MonthlyProfile { area: 1, values });
        let spec = ScenarioSpec {
            month,
            level: LevelChoice::Level(LoadLevel::Heavy),
            growth_rates: rates.clone(),
            ..ScenarioSpec::default()
        };
        let scaled = apply_growth(&apply_load_level(&case, &spec).unwrap(), &spec).unwrap();
        let expected = p * centroid * compound_growth(1.0, &rates);
        prop_assert!((scaled.pq_loads[0].p_load - expected).abs() <= 1e-14 * (1.0 + expected.abs()));
        let ratio = scaled.pq_loads[0].q_load / scaled.pq_loads[0].p_load;
        if p > 0.0 {
            prop_assert!((ratio - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn impedance_load_keeps_its_power_factor(
        s0 in 0.01f64..5.0,
        angle in -1.5f64..1.5,
        v_lim in 0.85f64..1.15,
        v in 0.5f64..1.3,
    ) {
        let z = ConstantImpedanceLoad::new(s0, angle, v_lim);
        let (p_lim, q_lim) = z.power_at(v_lim);
        prop_assert_eq!(p_lim, s0 * angle.cos());
        prop_assert_eq!(q_lim, s0 * angle.sin());
        let (p, q) = z.power_at(v);
        if p.abs() > 1e-9 {
            prop_assert!((q / p - angle.tan()).abs() <= 1e-12 * (1.0 + angle.tan().abs()));
        }
    }
}
