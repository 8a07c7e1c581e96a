use num_traits::Zero;
use qkd_milp::{MilpStatus, SolverParams};
use qkd_sagin::experiment::{
    cost_inflation_sweep, demand_sweep, km_reservation_sweep, reservation_sweep, ExperimentError, SweepTable, CSV_SCHEMA,
};
use qkd_sagin::instance::{load_instance_file, Instance};
use qkd_sagin::report::{render_record, solve_record};
use qkd_sagin::solution::{is_simple_path, solve_instance};
use qkd_sagin::topology::{Layer, Medium};
use qkd_sagin::Rational;

fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

fn grid(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| q(x)).collect()
}

fn example(name: &str) -> Instance {
    load_instance_file(format!("{}/../../instances/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn params() -> SolverParams {
    SolverParams::default()
}

fn check_rows(t: &SweepTable) {
    for r in &t.rows {
        if let Some(c) = &r.cost {
            assert_eq!(c.total, c.first_stage.clone() + c.second_stage_expected.clone(), "{}", r.value);
        }
    }
}

#[test]
fn cost_structure_optimum() {
    // route 1>2>4, 150 km hops (one span): 30 QKD and 10 KM wavelengths
    // reserved per hop at 1750+150 and 2700+150, used at the same prices
    // with rates 1/2 and 1 each half the time
    let inst = example("cost_structure.toml");
    let report = solve_instance(&inst, &params()).unwrap();
    assert_eq!(report.status, MilpStatus::Optimal);
    let plan = report.plan.as_ref().unwrap();
    assert_eq!(plan.routes[0].summary(), "1>2>4[fiber,fiber]");
    assert_eq!(plan.cost.first_stage, q(2 * (30 * 1900 + 10 * 2850)));
    assert_eq!(plan.cost.second_stage_expected, q(2 * (15 * 1900 + 5 * 2850 + 30 * 1900 + 10 * 2850) / 2));
    assert_eq!(plan.cost.total, q(299250));

    let rec = render_record(&solve_record(&inst, &report));
    assert!(rec.contains("status=optimal\n"));
    assert!(rec.contains("total=299250\n"));
    assert!(rec.contains("route.1=1>2>4[fiber,fiber]\n"));
    assert!(rec.contains("hop.1.1-2.fiber.qkd=r=30 e=22.5 o=0\n"));
    assert!(rec.contains("hop.1.2-4.fiber.km=r=10 e=7.5 o=0\n"));
}

#[test]
fn reservation_sweep_ends() {
    let inst = example("cost_structure.toml");
    let t = reservation_sweep(&inst, &grid(&[0, 30, 60, 90]), &params()).unwrap();
    check_rows(&t);
    let od: Vec<Rational> = t
        .rows
        .iter()
        .map(|r| {
            let u = r.usage.as_ref().unwrap();
            u.ondemand_qkd_expected.clone()
        })
        .collect();
    // 60 covers the worst case (30 per hop on two hops)
    assert!(od[2].is_zero() && od[3].is_zero());
    assert!(od.iter().all(|v| *v <= od[0]));
    assert_eq!(t.rows[0].usage.as_ref().unwrap().reserved_qkd, 0);
    assert_eq!(t.rows[3].usage.as_ref().unwrap().reserved_qkd, 90);
}

#[test]
fn km_sweep_ends() {
    let inst = example("cost_structure.toml");
    let t = km_reservation_sweep(&inst, &grid(&[0, 10, 20, 30]), &params()).unwrap();
    check_rows(&t);
    let u0 = t.rows[0].usage.as_ref().unwrap();
    assert_eq!(u0.reserved_km, 0);
    assert!(u0.used_km_expected.is_zero());
    // expected KM need: (5 + 10) / 2 per hop on two hops
    assert_eq!(u0.ondemand_km_expected, q(15));
    for r in &t.rows[2..] {
        assert!(r.usage.as_ref().unwrap().ondemand_km_expected.is_zero());
    }
}

#[test]
fn zero_demand_costs_nothing() {
    let inst = example("cost_structure.toml");
    let t = demand_sweep(&inst, &grid(&[0, 1]), &params()).unwrap();
    assert!(t.rows[0].cost.as_ref().unwrap().total.is_zero());
    assert_eq!(t.rows[1].cost.as_ref().unwrap().total, q(299250));
}

#[test]
fn unit_inflation_is_the_baseline() {
    let inst = example("medium_transition.toml");
    let base = solve_instance(&inst, &params()).unwrap();
    let t = cost_inflation_sweep(&inst, &grid(&[1, 16]), &params()).unwrap();
    check_rows(&t);
    assert_eq!(Some(t.rows[0].cost.as_ref().unwrap().total.clone()), base.objective);
    let sat = &t.rows[1].usage.as_ref().unwrap().medium_wavelengths[&Medium::Satellite];
    assert!(*sat > q(0));
}

#[test]
fn sweep_grids_are_validated() {
    let inst = example("cost_structure.toml");
    for bad in [vec![], grid(&[2, 1]), grid(&[1, 1]), grid(&[-1])] {
        assert!(matches!(demand_sweep(&inst, &bad, &params()), Err(ExperimentError::Grid(_))), "{bad:?}");
    }
    let half = vec![Rational::new(1.into(), 2.into())];
    assert!(matches!(reservation_sweep(&inst, &half, &params()), Err(ExperimentError::Grid(_))));
    assert!(matches!(cost_inflation_sweep(&inst, &half, &params()), Err(ExperimentError::Grid(_))));
}

#[test]
fn csv_is_deterministic() {
    let inst = example("cost_structure.toml");
    let a = demand_sweep(&inst, &grid(&[1, 2, 3]), &params()).unwrap().to_csv().unwrap();
    let b = demand_sweep(&inst, &grid(&[1, 2, 3]), &params()).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap(), format!("# sweep=demand schema={CSV_SCHEMA}"));
    assert!(lines.next().unwrap().starts_with("value,status,first_stage,"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn aerial_example_routes_through_uavs() {
    let inst = example("uav_satellite.toml");
    let report = solve_instance(&inst, &params()).unwrap();
    let plan = report.plan.unwrap();
    let r = &plan.routes[0];
    assert!(is_simple_path(&inst, r.request, r));
    assert_eq!(r.nodes, vec![1, 3, 6, 5]);
    assert!(r.nodes.iter().all(|n| inst.topology.node(*n).unwrap().layer == Layer::Aerial));
}

#[test]
fn nsfnet_example_mixes_fiber_and_uavs() {
    let inst = example("nsfnet_sagin.toml");
    let report = solve_instance(&inst, &params()).unwrap();
    assert_eq!(report.status, MilpStatus::Optimal);
    let plan = report.plan.unwrap();
    let r = &plan.routes[0];
    assert_eq!((r.nodes.first(), r.nodes.last()), (Some(&15), Some(&18)));
    assert!(is_simple_path(&inst, r.request, r));
    let media: Vec<Medium> = r.hops.iter().flat_map(|h| h.media.iter().copied()).collect();
    assert!(media.contains(&Medium::Fiber) && media.contains(&Medium::Uav), "{}", r.summary());
    let la = &plan.allocation.links[0];
    assert!(r.hops.iter().flat_map(|h| &h.links).any(|&k| la[k].reserve_qkd > 0));
    assert!(r.hops.iter().flat_map(|h| &h.links).any(|&k| la[k].second.iter().any(|x| x.ondemand_qkd > 0)));
}
