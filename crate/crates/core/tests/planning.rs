use std::collections::BTreeSet;

use num_traits::Zero;
use proptest::prelude::*;
use qkd_milp::{export_lp_format, MilpStatus, SolverParams};
use qkd_sagin::builder::{build_deterministic_equivalent, flow_rows, ColumnLayout, RowFamily};
use qkd_sagin::instance::{load_instance, Instance};
use qkd_sagin::recourse::{
    evaluate_fixed_first_stage, expected_value_instance, expected_value_problem, value_of_stochastic_solution,
    FirstStage, RecourseError,
};
use qkd_sagin::scenario::Weather;
use qkd_sagin::solution::{cost_breakdown, is_simple_path, solve_instance, Allocation};
use qkd_sagin::synthetic::{random_instance, SyntheticSpec};
use qkd_sagin::topology::Medium;
use qkd_sagin::Rational;

fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// Two ground nodes joined by a 160 km fiber, one request 0 -> 1.
fn pair(rates: &str, weather: &str, extra: &str) -> Instance {
    load_instance(&format!(
        r#"
[[nodes]]
id = 0
layer = "ground"

[[nodes]]
id = 1
layer = "ground"

[[links]]
from = 0
to = 1
medium = "fiber"
distance_km = 160
{extra}

[[requests]]
id = 1
source = 0
destination = 1
demand_kbps = {rates}

[scenarios]
weather = {weather}
"#
    ))
    .unwrap()
}

fn families(families: &[RowFamily]) -> BTreeSet<&'static str> {
    families.iter().map(|f| f.as_str()).collect()
}

#[test]
fn smallest_model_layout() {
    let inst = pair("[1]", "[\"clear\"]", "");
    let b = build_deterministic_equivalent(&inst).unwrap();
    let names: Vec<&str> = b.model.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["w_0_1_1", "xrqk_0_1_1", "xrkm_0_1_1", "xeqk_0_1_1_0", "xekm_0_1_1_0", "xoqk_0_1_1_0", "xokm_0_1_1_0"]);
    assert_eq!(b.model.columns.iter().filter(|c| c.upper == Some(q(1))).count(), 1);
    // source, out, destination; two reservation caps; two use and two
    // on-demand links; one QKD and one KM demand row
    assert_eq!(b.model.num_rows(), 11);
    let expected: BTreeSet<&str> = [
        RowFamily::FlowSource,
        RowFamily::FlowDestination,
        RowFamily::FlowOut,
        RowFamily::ReserveLink,
        RowFamily::UseWithinReserve,
        RowFamily::OnDemandLink,
        RowFamily::DemandQkd,
        RowFamily::DemandKm,
    ]
    .iter()
    .map(|f| f.as_str())
    .collect();
    assert_eq!(families(&b.row_families), expected);
}

#[test]
fn no_satellite_columns_without_satellite_links() {
    let inst = pair("[1, 2]", "[\"clear\", \"cloudy\"]", "");
    let b = build_deterministic_equivalent(&inst).unwrap();
    assert!(b.model.columns.iter().all(|c| !c.name.starts_with('z')));
}

const GROUND_SPACE: &str = r#"
[[nodes]]
id = 0
layer = "ground"

[[nodes]]
id = 1
layer = "space"

[[links]]
from = 0
to = 1
medium = "satellite"
distance_km = 800

[[requests]]
id = 1
source = 0
destination = 1
demand_kbps = [1, 2]
"#;

#[test]
fn cloudy_scenarios_close_satellites() {
    let inst = load_instance(&format!("{GROUND_SPACE}\n[scenarios]\nweather = [\"cloudy\"]\n")).unwrap();
    let b = build_deterministic_equivalent(&inst).unwrap();
    let second: Vec<&str> = b.model.columns.iter().map(|c| c.name.as_str()).filter(|n| n.starts_with("ze") || n.starts_with("zo")).collect();
    assert_eq!(second.len(), 8);
    for c in &b.model.columns {
        if c.name.starts_with("ze") || c.name.starts_with("zo") {
            assert_eq!(c.upper, Some(q(0)), "{}", c.name);
        }
    }
    let report = solve_instance(&inst, &SolverParams::default()).unwrap();
    assert_eq!(report.status, MilpStatus::Infeasible);
    assert_eq!(report.diagnosis.unwrap().family, RowFamily::DemandQkd);
}

#[test]
fn clear_scenarios_keep_satellites_open() {
    let inst = load_instance(&format!("{GROUND_SPACE}\n[scenarios]\nweather = [\"clear\", \"cloudy\"]\n")).unwrap();
    let b = build_deterministic_equivalent(&inst).unwrap();
    for (s, sc) in inst.scenarios.scenarios.iter().enumerate() {
        let j = b.layout.requests[0].links[0].second[s].use_qkd;
        let open = sc.weather == Weather::Clear;
        assert_eq!(b.model.columns[j].upper.as_ref().unwrap().is_zero(), !open);
    }
}

/// Every w-assignment satisfying the flow rows, as sets of arcs `from->to`.
fn feasible_routings(inst: &Instance) -> Vec<BTreeSet<(u32, u32)>> {
    let layout = ColumnLayout::new(inst);
    let rows = flow_rows(inst, &layout);
    let w = &layout.requests[0].w;
    let mut found = Vec::new();
    for mask in 0u32..(1 << w.len()) {
        let mut values = vec![q(0); layout.num_columns];
        for (a, &j) in w.iter().enumerate() {
            if mask >> a & 1 == 1 {
                values[j] = q(1);
            }
        }
        if rows.iter().all(|(_, r)| r.violation(&values).is_zero()) {
            found.push((0..w.len()).filter(|a| mask >> a & 1 == 1).map(|a| (layout.arcs[a].from, layout.arcs[a].to)).collect());
        }
    }
    found
}

fn graph(arcs: &[(u32, u32)]) -> Instance {
    let mut doc = String::new();
    for n in 0..3 {
        doc += &format!("[[nodes]]\nid = {n}\nlayer = \"ground\"\n\n");
    }
    for (a, b) in arcs {
        doc += &format!("[[links]]\nfrom = {a}\nto = {b}\nmedium = \"fiber\"\ndistance_km = 10\n\n");
    }
    doc += "[[requests]]\nid = 1\nsource = 0\ndestination = 2\ndemand_kbps = [1]\n";
    load_instance(&doc).unwrap()
}

#[test]
fn path_graph_has_one_routing() {
    let found = feasible_routings(&graph(&[(0, 1), (1, 2)]));
    assert_eq!(found, vec![BTreeSet::from([(0, 1), (1, 2)])]);
}

#[test]
fn triangle_routings() {
    let inst = graph(&[(0, 1), (1, 2), (0, 2), (1, 0), (2, 1)]);
    let mut found = feasible_routings(&inst);
    found.sort();
    // the balance rows also admit the direct arc plus a loop through the
    // destination; every selected arc must carry wavelengths, so such loops
    // only cost money
    assert_eq!(
        found,
        vec![BTreeSet::from([(0, 1), (1, 2)]), BTreeSet::from([(0, 2)]), BTreeSet::from([(0, 2), (1, 2), (2, 1)])]
    );
    let report = solve_instance(&inst, &SolverParams::default()).unwrap();
    let plan = report.plan.unwrap();
    let layout = &report.built.layout;
    let selected: BTreeSet<(u32, u32)> =
        (0..layout.arcs.len()).filter(|&a| plan.allocation.w[0][a]).map(|a| (layout.arcs[a].from, layout.arcs[a].to)).collect();
    assert_eq!(selected, BTreeSet::from([(0, 2)]));
}

fn column(inst: &Instance, name: &str) -> usize {
    let b = build_deterministic_equivalent(inst).unwrap();
    b.model.columns.iter().position(|c| c.name == name).unwrap_or_else(|| panic!("{name}"))
}

#[test]
fn unrouted_links_carry_nothing() {
    let inst = pair("[1]", "[\"clear\"]", "");
    let b = build_deterministic_equivalent(&inst).unwrap();
    for name in ["xrqk_0_1_1", "xrkm_0_1_1", "xoqk_0_1_1_0", "xokm_0_1_1_0"] {
        let mut values = vec![q(0); b.model.num_columns()];
        values[column(&inst, name)] = q(1);
        assert!(!b.model.row_violations(&values, &q(0)).is_empty(), "{name}");
    }
    // utilization is tied to the reservation rather than to w
    let mut values = vec![q(0); b.model.num_columns()];
    values[column(&inst, "xeqk_0_1_1_0")] = q(1);
    assert!(!b.model.row_violations(&values, &q(0)).is_empty());
}

#[test]
fn use_beyond_reservation_is_violated_by_the_excess() {
    let inst = pair("[1]", "[\"clear\"]", "");
    let b = build_deterministic_equivalent(&inst).unwrap();
    let mut values = vec![q(0); b.model.num_columns()];
    values[column(&inst, "w_0_1_1")] = q(1);
    values[column(&inst, "xrqk_0_1_1")] = q(3);
    values[column(&inst, "xeqk_0_1_1_0")] = q(5);
    let row = b.model.rows.iter().find(|r| r.name == "use_xeqk_0_1_1_0").unwrap();
    assert_eq!(row.violation(&values), q(2));
}

#[test]
fn aggregate_caps_use_link_capacities() {
    let inst = load_instance(
        r#"
[[nodes]]
id = 0
layer = "ground"

[[nodes]]
id = 1
layer = "ground"

[[links]]
from = 0
to = 1
medium = "fiber"
distance_km = 50

[[requests]]
id = 1
source = 0
destination = 1
demand_kbps = [1]

[[requests]]
id = 2
source = 0
destination = 1
demand_kbps = [2]
"#,
    )
    .unwrap();
    let b = build_deterministic_equivalent(&inst).unwrap();
    for (fam, rhs) in [
        (RowFamily::AggregateUseQkd, 150),
        (RowFamily::AggregateUseKm, 30),
        (RowFamily::AggregateOnDemandQkd, 150),
        (RowFamily::AggregateOnDemandKm, 30),
    ] {
        let rows: Vec<_> = b.row_families.iter().zip(&b.model.rows).filter(|(f, _)| **f == fam).collect();
        // one link, two scenarios (clear and cloudy), two requests per row
        assert_eq!(rows.len(), 2);
        for (_, r) in rows {
            assert_eq!(r.rhs, q(rhs));
            assert_eq!(r.coefficients.len(), 2);
        }
    }
}

#[test]
fn demand_rows_scale_with_rate() {
    let inst = pair("[0, 5]", "[\"clear\"]", "");
    let b = build_deterministic_equivalent(&inst).unwrap();
    let w = column(&inst, "w_0_1_1");
    let coef = |name: &str| {
        let r = b.model.rows.iter().find(|r| r.name == name).unwrap();
        assert!(r.rhs.is_zero());
        r.coefficients.iter().find(|(j, _)| *j == w).map(|(_, a)| a.clone())
    };
    assert_eq!(coef("demqkd_0_1_1_1"), Some(q(-15)));
    assert_eq!(coef("demkm_0_1_1_1"), Some(q(-5)));
    assert_eq!(coef("demqkd_0_1_1_0"), None);
    assert_eq!(coef("demkm_0_1_1_0"), None);
}

#[test]
fn tiny_plan_prices_match_objective() {
    let inst = pair("[1]", "[\"clear\"]", "");
    let report = solve_instance(&inst, &SolverParams::default()).unwrap();
    assert_eq!(report.status, MilpStatus::Optimal);
    let plan = report.plan.unwrap();
    assert_eq!(plan.routes[0].nodes, vec![0, 1]);
    assert_eq!(Some(plan.cost.total.clone()), report.objective);
    // 3 QKD + 1 KM wavelengths: reserved and used at 1910 + 2860 per pair,
    // or bought on demand at 3 * 3820 + 5720; both total 17180
    assert_eq!(plan.cost.total, q(17180));
}

#[test]
fn capacity_below_demand_is_infeasible() {
    let caps = "caps = { qkd_reserved_max = 1, qkd_ondemand_max = 1, km_reserved_max = 5, km_ondemand_max = 5 }";
    let inst = pair("[1]", "[\"clear\"]", caps);
    let report = solve_instance(&inst, &SolverParams::default()).unwrap();
    assert_eq!(report.status, MilpStatus::Infeasible);
    assert!(report.plan.is_none());
    let d = report.diagnosis.unwrap();
    assert_eq!((d.family, d.request, d.scenario), (RowFamily::DemandQkd, Some(1), Some(0)));
}

fn fixed(inst: &Instance, r_qkd: u64, r_km: u64) -> FirstStage {
    let layout = ColumnLayout::new(inst);
    let mut w = vec![vec![false; layout.arcs.len()]; 1];
    w[0][0] = true;
    let n = inst.topology.links().len();
    FirstStage { w, reserve_qkd: vec![vec![r_qkd; n]], reserve_km: vec![vec![r_km; n]] }
}

#[test]
fn worst_case_reservation_needs_no_ondemand() {
    let inst = pair("[1, 2]", "[\"clear\"]", "");
    let eval = evaluate_fixed_first_stage(&inst, &fixed(&inst, 6, 2), &SolverParams::default()).unwrap();
    for la in &eval.allocation.links[0] {
        assert!(la.second.iter().all(|x| x.ondemand_qkd == 0 && x.ondemand_km == 0));
    }
    // first stage 6 * 1910 + 2 * 2860; utilization (3 * 1910 + 2860) at
    // rate 1 and twice that at rate 2
    assert_eq!(eval.cost.first_stage, q(17180));
    assert_eq!(eval.cost.second_stage, vec![q(8590), q(17180)]);
    assert_eq!(eval.cost.second_stage_expected, q(12885));
}

#[test]
fn zero_reservation_buys_everything_on_demand() {
    let inst = pair("[1, 2]", "[\"clear\"]", "");
    let eval = evaluate_fixed_first_stage(&inst, &fixed(&inst, 0, 0), &SolverParams::default()).unwrap();
    let x: Vec<_> = eval.allocation.links[0][0].second.iter().map(|x| (x.use_qkd, x.use_km, x.ondemand_qkd, x.ondemand_km)).collect();
    assert_eq!(x, vec![(0, 0, 3, 1), (0, 0, 6, 2)]);
    assert_eq!(eval.cost.first_stage, q(0));
    assert_eq!(eval.cost.second_stage, vec![q(17180), q(34360)]);
}

#[test]
fn reservation_above_cap_is_rejected() {
    let inst = pair("[1]", "[\"clear\"]", "");
    let r = evaluate_fixed_first_stage(&inst, &fixed(&inst, 151, 0), &SolverParams::default());
    assert!(matches!(r, Err(RecourseError::InvalidFirstStage(_))));
}

#[test]
fn missing_capacity_reports_shortfall() {
    let caps = "caps = { qkd_reserved_max = 10, qkd_ondemand_max = 0, km_reserved_max = 5, km_ondemand_max = 0 }";
    let inst = pair("[1, 3]", "[\"clear\"]", caps);
    let r = evaluate_fixed_first_stage(&inst, &fixed(&inst, 3, 1), &SolverParams::default());
    match r {
        Err(RecourseError::ScenarioInfeasible { scenario: 1, request: Some(1), shortfall: Some(6), .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn expected_value_uses_mean_rate() {
    let inst = pair("[1, 3]", "[\"clear\", \"cloudy\"]", "");
    let ev = expected_value_instance(&inst).unwrap();
    assert_eq!(ev.scenarios.len(), 1);
    assert_eq!(ev.scenarios.scenarios[0].rates_kbps[&1], q(2));
    assert_eq!(ev.scenarios.scenarios[0].weather, Weather::Clear);
}

#[test]
fn single_scenario_expected_value_is_the_same_model() {
    let inst = pair("[2]", "[\"clear\"]", "");
    let ev = expected_value_problem(&inst).unwrap();
    let de = build_deterministic_equivalent(&inst).unwrap();
    assert_eq!(export_lp_format(&ev.model), export_lp_format(&de.model));
}

#[test]
fn stochastic_plan_beats_mean_plan_under_recourse_prices() {
    // on-demand at four times the price: the mean plan reserves for rate 2
    // and pays on-demand when rate 3 shows up
    let inst = pair("[1, 3]", "[\"clear\"]", "").with_scaled_demand(&q(1)).unwrap();
    let mut inst = inst;
    inst.cost_table = qkd_sagin::cost_model::CostTable::with_ondemand_factor(&q(4));
    let v = value_of_stochastic_solution(&inst, &SolverParams::default()).unwrap();
    assert!(v.is_nonnegative());
    assert!(v.vss().unwrap() > q(0));
}

fn uses_cloudy_satellites(inst: &Instance, alloc: &Allocation) -> bool {
    let links = inst.topology.links();
    alloc.links.iter().any(|per_link| {
        per_link.iter().enumerate().any(|(k, la)| {
            links[k].medium == Medium::Satellite
                && la.second.iter().zip(&inst.scenarios.scenarios).any(|(x, sc)| {
                    sc.weather == Weather::Cloudy && x.use_qkd + x.use_km + x.ondemand_qkd + x.ondemand_km > 0
                })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_plans_hold_their_invariants(seed in 0u64..5000) {
        let inst = random_instance(seed, &SyntheticSpec::default()).unwrap();
        let a = build_deterministic_equivalent(&inst).unwrap();
        let b = build_deterministic_equivalent(&inst).unwrap();
        prop_assert_eq!(export_lp_format(&a.model), export_lp_format(&b.model));
        prop_assert_eq!(&a.row_families, &b.row_families);

        let report = solve_instance(&inst, &SolverParams::default()).unwrap();
        let Some(plan) = report.plan else { return Ok(()) };
        for r in &plan.routes {
            prop_assert!(is_simple_path(&inst, r.request, r));
        }
        for per_link in &plan.allocation.links {
            for la in per_link {
                for x in &la.second {
                    prop_assert!(x.use_qkd <= la.reserve_qkd && x.use_km <= la.reserve_km);
                }
            }
        }
        prop_assert!(!uses_cloudy_satellites(&inst, &plan.allocation));
        let c = cost_breakdown(&inst, &report.built.layout, &plan.allocation).unwrap();
        let expected: Rational =
            inst.scenarios.scenarios.iter().zip(&c.second_stage).map(|(s, v)| s.probability.clone() * v.clone()).sum();
        prop_assert_eq!(Some(c.first_stage + expected), report.objective);
    }
}
