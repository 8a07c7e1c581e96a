//! Second-stage evaluation of a fixed first stage, and the expected-value
//! problem used to measure the value of the stochastic solution.

use num_traits::Zero;
use qkd_milp::{solve_milp, MilpStatus, Rational, SolverParams};
use thiserror::Error;

use crate::builder::{arc_parallel_links, build_deterministic_equivalent, BuildError, BuiltModel, RowFamily};
use crate::instance::{Instance, InstanceError};
use crate::scenario::{satellite_available, Scenario, Weather};
use crate::solution::{cost_breakdown, solve_instance, Allocation, CostBreakdown, LinkAllocation, PlanError};
use crate::topology::Medium;

#[derive(Debug, Error)]
pub enum RecourseError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Model(#[from] qkd_milp::ModelError),
    #[error("first stage does not fit the instance: {0}")]
    InvalidFirstStage(String),
    #[error("scenario {scenario} is infeasible for the fixed first stage: {detail}")]
    ScenarioInfeasible {
        scenario: usize,
        request: Option<u32>,
        /// Missing wavelengths on the worst hop, when a single request
        /// already falls short on its own.
        shortfall: Option<u64>,
        detail: String,
    },
    #[error("scenario {scenario}: solver stopped with status {status}")]
    Limit { scenario: usize, status: &'static str },
}

/// Routing and reservations, `[request][arc]` and `[request][link]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstStage {
    pub w: Vec<Vec<bool>>,
    pub reserve_qkd: Vec<Vec<u64>>,
    pub reserve_km: Vec<Vec<u64>>,
}

impl FirstStage {
    pub fn of(alloc: &Allocation) -> Self {
        FirstStage {
            w: alloc.w.clone(),
            reserve_qkd: alloc.links.iter().map(|ls| ls.iter().map(|l| l.reserve_qkd).collect()).collect(),
            reserve_km: alloc.links.iter().map(|ls| ls.iter().map(|l| l.reserve_km).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecourseEvaluation {
    /// The fixed first stage together with the optimal recourse of every
    /// scenario.
    pub allocation: Allocation,
    pub cost: CostBreakdown,
}

fn check_first_stage(built: &BuiltModel, first: &FirstStage) -> Result<(), RecourseError> {
    let layout = &built.layout;
    let shape_ok = first.w.len() == layout.requests.len()
        && first.reserve_qkd.len() == layout.requests.len()
        && first.reserve_km.len() == layout.requests.len()
        && layout.requests.iter().enumerate().all(|(f, rc)| {
            first.w[f].len() == rc.w.len()
                && first.reserve_qkd[f].len() == rc.links.len()
                && first.reserve_km[f].len() == rc.links.len()
        });
    if !shape_ok {
        return Err(RecourseError::InvalidFirstStage("dimensions do not match the instance".into()));
    }
    let alloc = Allocation {
        w: first.w.clone(),
        links: (0..layout.requests.len())
            .map(|f| {
                (0..layout.requests[f].links.len())
                    .map(|k| LinkAllocation {
                        reserve_qkd: first.reserve_qkd[f][k],
                        reserve_km: first.reserve_km[f][k],
                        second: vec![Default::default(); layout.requests[f].links[k].second.len()],
                    })
                    .collect()
            })
            .collect(),
    };
    let values = alloc.to_values(layout);
    for (i, row) in built.model.rows.iter().enumerate() {
        let fam = built.row_families[i];
        let first_stage_row = matches!(
            fam,
            RowFamily::FlowSource | RowFamily::FlowDestination | RowFamily::FlowTransit | RowFamily::FlowOut | RowFamily::ReserveLink
        );
        if first_stage_row && row.violation(&values) > Rational::zero() {
            return Err(RecourseError::InvalidFirstStage(format!("row {} is violated", row.name)));
        }
    }
    for (c, v) in built.model.columns.iter().zip(&values) {
        if c.upper.as_ref().is_some_and(|u| v > u) {
            return Err(RecourseError::InvalidFirstStage(format!("{} = {v} exceeds its bound", c.name)));
        }
    }
    Ok(())
}

fn shortfall(inst: &Instance, built: &BuiltModel, first: &FirstStage, scenario: &Scenario) -> Option<(u32, u64, String)> {
    let links = inst.topology.links();
    let mut worst: Option<(u32, u64, String)> = None;
    for (f, req) in inst.requests.iter().enumerate() {
        for (a, arc) in built.layout.arcs.iter().enumerate() {
            if !first.w[f][a] {
                continue;
            }
            let p = arc_parallel_links(inst, arc, &scenario.rates_kbps[&req.id]);
            let open: Vec<usize> = arc
                .links
                .iter()
                .copied()
                .filter(|&k| links[k].medium != Medium::Satellite || satellite_available(scenario))
                .collect();
            let cap_q: u64 = open
                .iter()
                .map(|&k| {
                    let c = &links[k].capacities;
                    first.reserve_qkd[f][k].min(c.qkd_reserved_max) + c.qkd_ondemand_max
                })
                .sum();
            let cap_k: u64 = open
                .iter()
                .map(|&k| {
                    let c = &links[k].capacities;
                    first.reserve_km[f][k].min(c.km_reserved_max) + c.km_ondemand_max
                })
                .sum();
            for (need, have, what) in [(p * inst.w_qkd, cap_q, "QKD"), (p * inst.w_kml, cap_k, "KM")] {
                if need > have && worst.as_ref().is_none_or(|w| need - have > w.1) {
                    worst = Some((
                        req.id,
                        need - have,
                        format!("request {} needs {need} {what} wavelengths on {}->{} but at most {have} are available", req.id, arc.from, arc.to),
                    ));
                }
            }
        }
    }
    worst
}

/// Solves the recourse problem of every scenario with routing and
/// reservations held fixed, and prices the result.
pub fn evaluate_fixed_first_stage(
    inst: &Instance,
    first: &FirstStage,
    params: &SolverParams,
) -> Result<RecourseEvaluation, RecourseError> {
    let full = build_deterministic_equivalent(inst)?;
    check_first_stage(&full, first)?;
    let layout = &full.layout;
    let mut allocation = Allocation {
        w: first.w.clone(),
        links: (0..layout.requests.len())
            .map(|f| {
                (0..layout.requests[f].links.len())
                    .map(|k| LinkAllocation {
                        reserve_qkd: first.reserve_qkd[f][k],
                        reserve_km: first.reserve_km[f][k],
                        second: Vec::with_capacity(inst.scenarios.len()),
                    })
                    .collect()
            })
            .collect(),
    };
    let q = |x: u64| Some(Rational::from_integer(x.into()));
    for (s, scenario) in inst.scenarios.scenarios.iter().enumerate() {
        let restricted = inst.restricted_to(scenario)?;
        let mut built = build_deterministic_equivalent(&restricted)?;
        for (f, rc) in built.layout.requests.iter().enumerate() {
            for (a, &j) in rc.w.iter().enumerate() {
                let v = q(first.w[f][a] as u64);
                built.model.columns[j].lower = v.clone();
                built.model.columns[j].upper = v;
            }
            for (k, lc) in rc.links.iter().enumerate() {
                for (j, v) in [(lc.reserve_qkd, first.reserve_qkd[f][k]), (lc.reserve_km, first.reserve_km[f][k])] {
                    built.model.columns[j].lower = q(v);
                    built.model.columns[j].upper = q(v);
                }
            }
        }
        let result = solve_milp(&built.model, params)?;
        match result.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => {
                let detail = shortfall(inst, &full, first, scenario);
                return Err(RecourseError::ScenarioInfeasible {
                    scenario: s,
                    request: detail.as_ref().map(|d| d.0),
                    shortfall: detail.as_ref().map(|d| d.1),
                    detail: detail
                        .map(|d| d.2)
                        .unwrap_or_else(|| "requests exceed the shared per-link capacities together".into()),
                });
            }
            other => return Err(RecourseError::Limit { scenario: s, status: other.as_str() }),
        }
        let single = Allocation::from_values(&built, &result.values)?;
        for (f, per_link) in single.links.iter().enumerate() {
            for (k, la) in per_link.iter().enumerate() {
                allocation.links[f][k].second.push(la.second[0]);
            }
        }
    }
    let cost = cost_breakdown(inst, layout, &allocation)?;
    Ok(RecourseEvaluation { allocation, cost })
}

/// Single scenario at the expected rates in clear weather, or cloudy when
/// the instance never sees clear skies.
pub fn expected_value_instance(inst: &Instance) -> Result<Instance, InstanceError> {
    let weather = if inst.scenarios.weather_support.contains(Weather::Clear) { Weather::Clear } else { Weather::Cloudy };
    let scenario = Scenario {
        rates_kbps: inst.scenarios.mean_rates(),
        weather,
        probability: Rational::from_integer(1.into()),
    };
    inst.restricted_to(&scenario)
}

pub fn expected_value_problem(inst: &Instance) -> Result<BuiltModel, RecourseError> {
    Ok(build_deterministic_equivalent(&expected_value_instance(inst)?)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VssReport {
    pub sp_status: MilpStatus,
    pub sp_objective: Option<Rational>,
    /// Expected cost of the expected-value first stage; `None` when that
    /// first stage has no feasible recourse in some scenario (infinite cost)
    /// or the expected-value problem itself is infeasible.
    pub ev_policy_cost: Option<Rational>,
}

impl VssReport {
    /// EV-policy cost minus SP optimum; `None` stands for +infinity.
    pub fn vss(&self) -> Option<Rational> {
        Some(self.ev_policy_cost.clone()? - self.sp_objective.clone()?)
    }

    /// SP optimum no worse than the expected-value policy.
    pub fn is_nonnegative(&self) -> bool {
        match (&self.sp_objective, &self.ev_policy_cost) {
            (Some(sp), Some(ev)) => sp <= ev,
            (_, None) => true,
            (None, Some(_)) => false,
        }
    }
}

pub fn value_of_stochastic_solution(inst: &Instance, params: &SolverParams) -> Result<VssReport, RecourseError> {
    let sp = solve_instance(inst, params)?;
    let ev = solve_instance(&expected_value_instance(inst)?, params)?;
    let ev_policy_cost = match &ev.plan {
        Some(plan) if ev.status == MilpStatus::Optimal => {
            match evaluate_fixed_first_stage(inst, &FirstStage::of(&plan.allocation), params) {
                Ok(eval) => Some(eval.cost.total),
                Err(RecourseError::ScenarioInfeasible { .. }) => None,
                Err(e) => return Err(e),
            }
        }
        _ => None,
    };
    Ok(VssReport { sp_status: sp.status, sp_objective: sp.objective, ev_policy_cost })
}
