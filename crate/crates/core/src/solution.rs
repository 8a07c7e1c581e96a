//! Turning solver assignments into plans, and solving whole instances.

use std::collections::{BTreeSet, VecDeque};
use std::time::Duration;

use num_traits::{ToPrimitive, Zero};
use qkd_milp::{solve_milp, MilpStatus, Rational, SolverParams};
use thiserror::Error;

use crate::builder::{arc_parallel_links, build_deterministic_equivalent, BuildError, BuiltModel, ColumnLayout, RowFamily};
use crate::cost_model::phase_unit_costs;
use crate::instance::Instance;
use crate::scenario::satellite_available;
use crate::topology::Medium;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Model(#[from] qkd_milp::ModelError),
    #[error("assignment violates the model: {0}")]
    Infeasible(String),
    #[error("value {value} of column {column} is not a nonnegative integer")]
    NotIntegral { column: String, value: String },
    #[error("request {request}: routing variables do not form a path from {source_node} to {destination} ({detail})")]
    BrokenRoute { request: u32, source_node: u32, destination: u32, detail: String },
    #[error("recomputed cost {recomputed} differs from the model objective {objective}")]
    CostMismatch { recomputed: String, objective: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SecondStageValues {
    pub use_qkd: u64,
    pub use_km: u64,
    pub ondemand_qkd: u64,
    pub ondemand_km: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkAllocation {
    pub reserve_qkd: u64,
    pub reserve_km: u64,
    /// One entry per scenario.
    pub second: Vec<SecondStageValues>,
}

impl LinkAllocation {
    pub fn carries_anything(&self) -> bool {
        self.reserve_qkd > 0
            || self.reserve_km > 0
            || self.second.iter().any(|s| *s != SecondStageValues::default())
    }
}

/// Integer decisions of a plan, indexed like [`ColumnLayout`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocation {
    /// `[request][arc]`.
    pub w: Vec<Vec<bool>>,
    /// `[request][link]`.
    pub links: Vec<Vec<LinkAllocation>>,
}

fn to_u64(model_name: &str, v: &Rational) -> Result<u64, PlanError> {
    if v.is_integer() {
        if let Some(u) = v.to_integer().to_u64() {
            return Ok(u);
        }
    }
    Err(PlanError::NotIntegral { column: model_name.to_string(), value: v.to_string() })
}

impl Allocation {
    pub fn from_values(built: &BuiltModel, values: &[Rational]) -> Result<Self, PlanError> {
        let cols = &built.model.columns;
        let get = |j: usize| to_u64(&cols[j].name, &values[j]);
        let mut w = Vec::new();
        let mut links = Vec::new();
        for rc in &built.layout.requests {
            w.push(rc.w.iter().map(|&j| get(j).map(|v| v == 1)).collect::<Result<Vec<_>, _>>()?);
            let mut per_link = Vec::new();
            for lc in &rc.links {
                let second = lc
                    .second
                    .iter()
                    .map(|s| {
                        Ok(SecondStageValues {
                            use_qkd: get(s.use_qkd)?,
                            use_km: get(s.use_km)?,
                            ondemand_qkd: get(s.ondemand_qkd)?,
                            ondemand_km: get(s.ondemand_km)?,
                        })
                    })
                    .collect::<Result<Vec<_>, PlanError>>()?;
                per_link.push(LinkAllocation { reserve_qkd: get(lc.reserve_qkd)?, reserve_km: get(lc.reserve_km)?, second });
            }
            links.push(per_link);
        }
        Ok(Allocation { w, links })
    }

    /// Column values of this allocation in `layout` order.
    pub fn to_values(&self, layout: &ColumnLayout) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); layout.num_columns];
        let q = |x: u64| Rational::from_integer(x.into());
        for (f, rc) in layout.requests.iter().enumerate() {
            for (a, &j) in rc.w.iter().enumerate() {
                v[j] = q(self.w[f][a] as u64);
            }
            for (k, lc) in rc.links.iter().enumerate() {
                let la = &self.links[f][k];
                v[lc.reserve_qkd] = q(la.reserve_qkd);
                v[lc.reserve_km] = q(la.reserve_km);
                for (s, sc) in lc.second.iter().enumerate() {
                    let x = la.second[s];
                    v[sc.use_qkd] = q(x.use_qkd);
                    v[sc.use_km] = q(x.use_km);
                    v[sc.ondemand_qkd] = q(x.ondemand_qkd);
                    v[sc.ondemand_km] = q(x.ondemand_km);
                }
            }
        }
        v
    }
}

/// One hop of a route with the media that carry wavelengths on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopPlan {
    pub arc: usize,
    pub from: u32,
    pub to: u32,
    /// Links of the arc that carry any wavelength; the first link of the
    /// arc when nothing is needed (zero demand).
    pub links: Vec<usize>,
    pub media: Vec<Medium>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePlan {
    pub request: u32,
    pub nodes: Vec<u32>,
    pub hops: Vec<HopPlan>,
}

impl RoutePlan {
    /// `1>2>4[fiber,uav]` style summary.
    pub fn summary(&self) -> String {
        let nodes: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
        let media: Vec<String> = self
            .hops
            .iter()
            .map(|h| h.media.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+"))
            .collect();
        format!("{}[{}]", nodes.join(">"), media.join(","))
    }
}

/// Follows the selected arcs from the source. Selected arcs off that path
/// (zero-cost detours the solver is free to switch on) are ignored.
pub fn extract_routes(inst: &Instance, layout: &ColumnLayout, alloc: &Allocation) -> Result<Vec<RoutePlan>, PlanError> {
    let mut routes = Vec::with_capacity(inst.requests.len());
    for (f, req) in inst.requests.iter().enumerate() {
        let broken = |detail: String| PlanError::BrokenRoute {
            request: req.id,
            source_node: req.source,
            destination: req.destination,
            detail,
        };
        let mut nodes = vec![req.source];
        let mut seen = BTreeSet::from([req.source]);
        let mut hops = Vec::new();
        let mut at = req.source;
        while at != req.destination {
            let out: Vec<usize> =
                (0..layout.arcs.len()).filter(|&a| layout.arcs[a].from == at && alloc.w[f][a]).collect();
            let &[a] = out.as_slice() else {
                return Err(broken(format!("node {at} has {} selected outgoing arcs", out.len())));
            };
            let arc = &layout.arcs[a];
            if !seen.insert(arc.to) {
                return Err(broken(format!("node {} is visited twice", arc.to)));
            }
            let mut used: Vec<usize> = arc.links.iter().copied().filter(|&k| alloc.links[f][k].carries_anything()).collect();
            if used.is_empty() {
                used.push(arc.links[0]);
            }
            let media = used.iter().map(|&k| inst.topology.links()[k].medium).collect();
            hops.push(HopPlan { arc: a, from: arc.from, to: arc.to, links: used, media });
            nodes.push(arc.to);
            at = arc.to;
        }
        routes.push(RoutePlan { request: req.id, nodes, hops });
    }
    Ok(routes)
}

/// True iff `route` is a simple directed path from the request's source to
/// its destination over links of the topology.
pub fn is_simple_path(inst: &Instance, request: u32, route: &RoutePlan) -> bool {
    let Some(req) = inst.requests.iter().find(|r| r.id == request) else {
        return false;
    };
    let distinct: BTreeSet<u32> = route.nodes.iter().copied().collect();
    route.nodes.first() == Some(&req.source)
        && route.nodes.last() == Some(&req.destination)
        && distinct.len() == route.nodes.len()
        && route.hops.len() + 1 == route.nodes.len()
        && route.hops.iter().zip(route.nodes.windows(2)).all(|(h, pair)| {
            h.from == pair[0]
                && h.to == pair[1]
                && !h.links.is_empty()
                && h.links.iter().all(|&k| {
                    let l = &inst.topology.links()[k];
                    l.from == pair[0] && l.to == pair[1]
                })
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostBreakdown {
    pub routing: Rational,
    /// Reservation equipment and channel cost (includes routing).
    pub first_stage: Rational,
    /// Unweighted second-stage cost of each scenario.
    pub second_stage: Vec<Rational>,
    pub second_stage_expected: Rational,
    pub total: Rational,
}

/// Prices an allocation directly from the cost tables, without looking at
/// the model objective.
pub fn cost_breakdown(inst: &Instance, layout: &ColumnLayout, alloc: &Allocation) -> Result<CostBreakdown, PlanError> {
    let links = inst.topology.links();
    let q = |x: u64| Rational::from_integer(x.into());
    let mut routing = Rational::zero();
    let mut first = Rational::zero();
    let mut second = vec![Rational::zero(); inst.scenarios.len()];
    for (f, req) in inst.requests.iter().enumerate() {
        for (a, arc) in layout.arcs.iter().enumerate() {
            if alloc.w[f][a] {
                routing += inst.routing_cost(arc.to, req.id);
            }
        }
        for (k, l) in links.iter().enumerate() {
            let params = &inst.medium_params[&l.medium];
            let u = phase_unit_costs(l.medium, params, &inst.cost_table, &l.distance_km).map_err(BuildError::from)?;
            let e = &l.distance_km;
            let la = &alloc.links[f][k];
            first += q(la.reserve_qkd) * (u.tau.clone() + e * &u.ch_r) + q(la.reserve_km) * (u.lambda.clone() + e * &u.ch_r);
            for (s, x) in la.second.iter().enumerate() {
                second[s] += q(x.use_qkd) * (u.phi.clone() + e * &u.ch_e)
                    + q(x.use_km) * (u.delta.clone() + e * &u.ch_e)
                    + q(x.ondemand_qkd) * (u.psi.clone() + e * &u.ch_o)
                    + q(x.ondemand_km) * (u.xi.clone() + e * &u.ch_o);
            }
        }
    }
    first += routing.clone();
    let expected: Rational = inst
        .scenarios
        .scenarios
        .iter()
        .zip(&second)
        .map(|(sc, c)| sc.probability.clone() * c.clone())
        .sum();
    Ok(CostBreakdown {
        routing,
        total: first.clone() + expected.clone(),
        first_stage: first,
        second_stage: second,
        second_stage_expected: expected,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSolution {
    pub allocation: Allocation,
    pub routes: Vec<RoutePlan>,
    pub cost: CostBreakdown,
}

/// Checks the assignment against the model, rebuilds routes and prices
/// the plan from scratch; the recomputed total must equal the objective.
pub fn extract_solution(inst: &Instance, built: &BuiltModel, values: &[Rational]) -> Result<PlanSolution, PlanError> {
    if values.len() != built.model.num_columns() {
        return Err(PlanError::Infeasible(format!(
            "{} values for {} columns",
            values.len(),
            built.model.num_columns()
        )));
    }
    let violations = built.model.row_violations(values, &Rational::zero());
    if let Some((i, by)) = violations.first() {
        return Err(PlanError::Infeasible(format!("row {} violated by {by}", built.model.rows[*i].name)));
    }
    for (c, v) in built.model.columns.iter().zip(values) {
        let below = c.lower.as_ref().is_some_and(|l| v < l);
        let above = c.upper.as_ref().is_some_and(|u| v > u);
        if below || above {
            return Err(PlanError::Infeasible(format!("column {} = {v} is out of bounds", c.name)));
        }
    }
    let allocation = Allocation::from_values(built, values)?;
    let routes = extract_routes(inst, &built.layout, &allocation)?;
    let cost = cost_breakdown(inst, &built.layout, &allocation)?;
    let objective = built.model.objective_value(values);
    if cost.total != objective {
        return Err(PlanError::CostMismatch { recomputed: cost.total.to_string(), objective: objective.to_string() });
    }
    Ok(PlanSolution { allocation, routes, cost })
}

/// Why an instance has no feasible plan, at row-family granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnosis {
    pub family: RowFamily,
    pub request: Option<u32>,
    pub scenario: Option<usize>,
    pub message: String,
}

/// Graph-level feasibility checks, one request at a time: per scenario,
/// some path must offer enough QKD (then KM) wavelengths on every hop, and
/// one path must do so in all scenarios at once. When every request passes
/// on its own, the shared per-link capacities are blamed.
pub fn diagnose_infeasibility(inst: &Instance, layout: &ColumnLayout) -> Diagnosis {
    let links = inst.topology.links();
    let scenarios = &inst.scenarios.scenarios;
    let arc_ok = |a: usize, f: usize, s: usize, qkd: bool, km: bool| {
        let arc = &layout.arcs[a];
        let sc = &scenarios[s];
        let p = arc_parallel_links(inst, arc, &sc.rates_kbps[&inst.requests[f].id]);
        let open: Vec<_> = arc
            .links
            .iter()
            .map(|&k| &links[k])
            .filter(|l| l.medium != Medium::Satellite || satellite_available(sc))
            .collect();
        let q_cap: u64 = open.iter().map(|l| l.capacities.qkd_reserved_max + l.capacities.qkd_ondemand_max).sum();
        let k_cap: u64 = open.iter().map(|l| l.capacities.km_reserved_max + l.capacities.km_ondemand_max).sum();
        (!qkd || q_cap >= p * inst.w_qkd) && (!km || k_cap >= p * inst.w_kml)
    };
    let reachable = |f: usize, ok: &dyn Fn(usize) -> bool| {
        let req = &inst.requests[f];
        let mut seen = BTreeSet::from([req.source]);
        let mut queue = VecDeque::from([req.source]);
        while let Some(n) = queue.pop_front() {
            if n == req.destination {
                return true;
            }
            for (a, arc) in layout.arcs.iter().enumerate() {
                if arc.from == n && ok(a) && seen.insert(arc.to) {
                    queue.push_back(arc.to);
                }
            }
        }
        false
    };
    for (f, req) in inst.requests.iter().enumerate() {
        if !reachable(f, &|_| true) {
            return Diagnosis {
                family: RowFamily::FlowDestination,
                request: Some(req.id),
                scenario: None,
                message: format!("request {}: node {} cannot reach node {}", req.id, req.source, req.destination),
            };
        }
        for (family, qkd, km, what) in
            [(RowFamily::DemandQkd, true, false, "QKD"), (RowFamily::DemandKm, false, true, "KM")]
        {
            for s in 0..scenarios.len() {
                if !reachable(f, &|a| arc_ok(a, f, s, qkd, km)) {
                    return Diagnosis {
                        family,
                        request: Some(req.id),
                        scenario: Some(s),
                        message: format!(
                            "request {} in scenario {s}: no path offers enough {what} wavelengths on every hop",
                            req.id
                        ),
                    };
                }
            }
        }
        if !reachable(f, &|a| (0..scenarios.len()).all(|s| arc_ok(a, f, s, true, true))) {
            return Diagnosis {
                family: RowFamily::DemandQkd,
                request: Some(req.id),
                scenario: None,
                message: format!("request {}: no single path meets the demand in every scenario", req.id),
            };
        }
    }
    Diagnosis {
        family: RowFamily::AggregateOnDemandQkd,
        request: None,
        scenario: None,
        message: "requests fit individually but not together within the shared link capacities".into(),
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: MilpStatus,
    pub plan: Option<PlanSolution>,
    pub objective: Option<Rational>,
    pub best_bound: Option<Rational>,
    pub nodes: u64,
    pub wall_time: Duration,
    pub diagnosis: Option<Diagnosis>,
    pub built: BuiltModel,
}

/// Builds and solves the deterministic equivalent, then extracts and
/// cross-checks the plan.
pub fn solve_instance(inst: &Instance, params: &SolverParams) -> Result<SolveReport, PlanError> {
    let built = build_deterministic_equivalent(inst)?;
    let result = solve_milp(&built.model, params)?;
    let plan = if result.has_solution() {
        let plan = extract_solution(inst, &built, &result.values)?;
        if Some(&plan.cost.total) != result.objective.as_ref() {
            return Err(PlanError::CostMismatch {
                recomputed: plan.cost.total.to_string(),
                objective: format!("{:?}", result.objective),
            });
        }
        Some(plan)
    } else {
        None
    };
    let diagnosis = (result.status == MilpStatus::Infeasible).then(|| diagnose_infeasibility(inst, &built.layout));
    Ok(SolveReport {
        status: result.status,
        plan,
        objective: result.objective,
        best_bound: result.best_bound,
        nodes: result.nodes,
        wall_time: result.wall_time,
        diagnosis,
        built,
    })
}
