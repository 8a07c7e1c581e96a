//! Parameter sweeps over reservation levels, demand scale and equipment
//! prices, with CSV output.

use std::collections::BTreeMap;

use num_traits::{One, ToPrimitive, Zero};
use qkd_milp::{format_exact, MilpStatus, Rational, SolverParams};
use thiserror::Error;

use crate::builder::{arc_parallel_links, ColumnLayout};
use crate::cost_model::Phase;
use crate::instance::{Instance, InstanceError};
use crate::recourse::{evaluate_fixed_first_stage, FirstStage, RecourseError};
use crate::scenario::Weather;
use crate::solution::{is_simple_path, solve_instance, Allocation, CostBreakdown, PlanError, RoutePlan};
use crate::topology::Medium;

/// Version of the CSV column layout.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Recourse(#[from] RecourseError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("the unconstrained problem ended with status {0}; a reservation sweep needs its optimum")]
    BaseNotOptimal(&'static str),
    #[error("extracted route of request {0} is not a simple path")]
    BadRoute(u32),
    #[error("cannot write CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Reservation,
    KmReservation,
    Demand,
    CostInflation,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Reservation => "reservation",
            SweepKind::KmReservation => "km",
            SweepKind::Demand => "demand",
            SweepKind::CostInflation => "cost-inflation",
        }
    }
}

/// Wavelength totals of a plan, summed over requests and links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageSummary {
    pub reserved_qkd: u64,
    pub reserved_km: u64,
    pub used_qkd_expected: Rational,
    pub used_km_expected: Rational,
    pub ondemand_qkd_expected: Rational,
    pub ondemand_km_expected: Rational,
    /// Largest on-demand total over scenarios.
    pub ondemand_qkd_max: u64,
    pub ondemand_km_max: u64,
    /// Reserved plus expected on-demand wavelengths (QKD and KM) per medium.
    pub medium_wavelengths: BTreeMap<Medium, Rational>,
    /// Largest satellite usage (utilized plus on-demand) in a cloudy scenario.
    pub satellite_cloudy_max: u64,
}

pub fn usage_summary(inst: &Instance, alloc: &Allocation) -> UsageSummary {
    let links = inst.topology.links();
    let scenarios = &inst.scenarios.scenarios;
    let q = |x: u64| Rational::from_integer(x.into());
    let mut u = UsageSummary {
        reserved_qkd: 0,
        reserved_km: 0,
        used_qkd_expected: Rational::zero(),
        used_km_expected: Rational::zero(),
        ondemand_qkd_expected: Rational::zero(),
        ondemand_km_expected: Rational::zero(),
        ondemand_qkd_max: 0,
        ondemand_km_max: 0,
        medium_wavelengths: Medium::ALL.into_iter().map(|m| (m, Rational::zero())).collect(),
        satellite_cloudy_max: 0,
    };
    let mut od_q = vec![0u64; scenarios.len()];
    let mut od_k = vec![0u64; scenarios.len()];
    let mut sat_cloudy = vec![0u64; scenarios.len()];
    for per_link in &alloc.links {
        for (k, la) in per_link.iter().enumerate() {
            let medium = links[k].medium;
            u.reserved_qkd += la.reserve_qkd;
            u.reserved_km += la.reserve_km;
            *u.medium_wavelengths.get_mut(&medium).unwrap() += q(la.reserve_qkd + la.reserve_km);
            for (s, x) in la.second.iter().enumerate() {
                let p = &scenarios[s].probability;
                u.used_qkd_expected += p * q(x.use_qkd);
                u.used_km_expected += p * q(x.use_km);
                u.ondemand_qkd_expected += p * q(x.ondemand_qkd);
                u.ondemand_km_expected += p * q(x.ondemand_km);
                *u.medium_wavelengths.get_mut(&medium).unwrap() += p * q(x.ondemand_qkd + x.ondemand_km);
                od_q[s] += x.ondemand_qkd;
                od_k[s] += x.ondemand_km;
                if medium == Medium::Satellite && scenarios[s].weather == Weather::Cloudy {
                    sat_cloudy[s] += x.use_qkd + x.use_km + x.ondemand_qkd + x.ondemand_km;
                }
            }
        }
    }
    u.ondemand_qkd_max = od_q.into_iter().max().unwrap_or(0);
    u.ondemand_km_max = od_k.into_iter().max().unwrap_or(0);
    u.satellite_cloudy_max = sat_cloudy.into_iter().max().unwrap_or(0);
    u
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub value: Rational,
    /// `optimal`, `infeasible` or a solver limit status.
    pub status: String,
    pub cost: Option<CostBreakdown>,
    pub usage: Option<UsageSummary>,
    pub routes: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

const HEADER: [&str; 17] = [
    "value",
    "status",
    "first_stage",
    "second_stage_expected",
    "total",
    "reserved_qkd",
    "reserved_km",
    "used_qkd_expected",
    "used_km_expected",
    "ondemand_qkd_expected",
    "ondemand_km_expected",
    "ondemand_qkd_max",
    "ondemand_km_max",
    "fiber_wavelengths",
    "uav_wavelengths",
    "satellite_wavelengths",
    "routes",
];

impl SweepTable {
    /// A `# sweep=<kind> schema=<n>` line, the header, one record per row.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).map_err(|e| ExperimentError::Csv(e.to_string()))?;
        for r in &self.rows {
            let mut rec = vec![format_exact(&r.value), r.status.clone()];
            match &r.cost {
                Some(c) => rec.extend([&c.first_stage, &c.second_stage_expected, &c.total].map(format_exact)),
                None => rec.extend(std::iter::repeat_n(String::new(), 3)),
            }
            match &r.usage {
                Some(u) => {
                    rec.push(u.reserved_qkd.to_string());
                    rec.push(u.reserved_km.to_string());
                    for v in [&u.used_qkd_expected, &u.used_km_expected, &u.ondemand_qkd_expected, &u.ondemand_km_expected] {
                        rec.push(format_exact(v));
                    }
                    rec.push(u.ondemand_qkd_max.to_string());
                    rec.push(u.ondemand_km_max.to_string());
                    for m in Medium::ALL {
                        rec.push(format_exact(&u.medium_wavelengths[&m]));
                    }
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 11)),
            }
            rec.push(r.routes.clone());
            w.write_record(&rec).map_err(|e| ExperimentError::Csv(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| ExperimentError::Csv(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| ExperimentError::Csv(e.to_string()))?;
        Ok(format!("# sweep={} schema={CSV_SCHEMA}\n{body}", self.kind.as_str()))
    }
}

fn check_grid(grid: &[Rational], min: Rational, integral: bool) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Grid("the grid is empty".into()));
    }
    if grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(ExperimentError::Grid("values must be strictly increasing".into()));
    }
    if grid[0] < min {
        return Err(ExperimentError::Grid(format!("values must be at least {}", format_exact(&min))));
    }
    if integral && grid.iter().any(|v| !v.is_integer()) {
        return Err(ExperimentError::Grid("levels must be whole wavelength counts".into()));
    }
    Ok(())
}

pub fn route_summary(routes: &[RoutePlan]) -> String {
    routes.iter().map(|r| format!("{}:{}", r.request, r.summary())).collect::<Vec<_>>().join(" ")
}

fn check_routes(inst: &Instance, routes: &[RoutePlan]) -> Result<(), ExperimentError> {
    for r in routes {
        if !is_simple_path(inst, r.request, r) {
            return Err(ExperimentError::BadRoute(r.request));
        }
    }
    Ok(())
}

fn solved_row(inst: &Instance, value: Rational, params: &SolverParams) -> Result<SweepRow, ExperimentError> {
    let report = solve_instance(inst, params)?;
    match report.plan {
        Some(plan) => {
            check_routes(inst, &plan.routes)?;
            Ok(SweepRow {
                value,
                status: report.status.as_str().into(),
                usage: Some(usage_summary(inst, &plan.allocation)),
                routes: route_summary(&plan.routes),
                cost: Some(plan.cost),
            })
        }
        None => Ok(SweepRow { value, status: report.status.as_str().into(), cost: None, usage: None, routes: String::new() }),
    }
}

/// Re-solves with every rate (support and realizations) scaled.
pub fn demand_sweep(inst: &Instance, scalings: &[Rational], params: &SolverParams) -> Result<SweepTable, ExperimentError> {
    check_grid(scalings, Rational::zero(), false)?;
    let mut rows = Vec::with_capacity(scalings.len());
    for c in scalings {
        rows.push(solved_row(&inst.with_scaled_demand(c)?, c.clone(), params)?);
    }
    Ok(SweepTable { kind: SweepKind::Demand, rows })
}

/// Multiplies the fiber and UAV reservation prices of the five equipment
/// components (not the channel price) and re-solves.
pub fn cost_inflation_sweep(
    inst: &Instance,
    multipliers: &[Rational],
    params: &SolverParams,
) -> Result<SweepTable, ExperimentError> {
    check_grid(multipliers, Rational::one(), false)?;
    let mut rows = Vec::with_capacity(multipliers.len());
    for m in multipliers {
        let mut scaled = inst.clone();
        for medium in [Medium::Fiber, Medium::Uav] {
            let betas = inst.cost_table.get(medium, Phase::Reservation).map_err(InstanceError::from)?.scaled_equipment(m);
            scaled.cost_table.set(medium, Phase::Reservation, betas).map_err(InstanceError::from)?;
        }
        rows.push(solved_row(&scaled, m.clone(), params)?);
    }
    Ok(SweepTable { kind: SweepKind::CostInflation, rows })
}

/// Spreads `level` reserved wavelengths of one kind over the routes: in
/// request-id order and then hop order, each hop first gets what its
/// worst scenario needs, then the rest fills hops up to their caps. `None`
/// when the caps cannot absorb the level.
pub fn apportion_reservation(
    inst: &Instance,
    layout: &ColumnLayout,
    routes: &[RoutePlan],
    base: &[Vec<u64>],
    level: u64,
    qkd: bool,
) -> Option<Vec<Vec<u64>>> {
    let links = inst.topology.links();
    let mut out: Vec<Vec<u64>> = base.iter().map(|v| vec![0; v.len()]).collect();
    let mut order: Vec<usize> = (0..inst.requests.len()).collect();
    order.sort_by_key(|&f| inst.requests[f].id);
    // (request position, link, worst-case need, cap)
    let mut slots = Vec::new();
    for &f in &order {
        let req = &inst.requests[f];
        let Some(route) = routes.iter().find(|r| r.request == req.id) else { continue };
        for hop in &route.hops {
            let k = *hop.links.iter().max_by_key(|&&k| (base[f][k], std::cmp::Reverse(k))).unwrap();
            let arc = &layout.arcs[hop.arc];
            let worst = inst
                .scenarios
                .scenarios
                .iter()
                .map(|s| arc_parallel_links(inst, arc, &s.rates_kbps[&req.id]))
                .max()
                .unwrap_or(0);
            let caps = &links[k].capacities;
            let (need, cap) = if qkd {
                (worst * inst.w_qkd, caps.qkd_reserved_max)
            } else {
                (worst * inst.w_kml, caps.km_reserved_max)
            };
            slots.push((f, k, need, cap));
        }
    }
    let mut left = level;
    for &(f, k, need, cap) in &slots {
        let give = left.min(need.min(cap));
        out[f][k] += give;
        left -= give;
    }
    for &(f, k, _, cap) in &slots {
        let give = left.min(cap - out[f][k]);
        out[f][k] += give;
        left -= give;
    }
    (left == 0).then_some(out)
}

fn reservation_like(
    inst: &Instance,
    levels: &[Rational],
    params: &SolverParams,
    qkd: bool,
) -> Result<SweepTable, ExperimentError> {
    check_grid(levels, Rational::zero(), true)?;
    let kind = if qkd { SweepKind::Reservation } else { SweepKind::KmReservation };
    let base = solve_instance(inst, params)?;
    if base.status != MilpStatus::Optimal {
        return Err(ExperimentError::BaseNotOptimal(base.status.as_str()));
    }
    let plan = base.plan.expect("optimal solves carry a plan");
    check_routes(inst, &plan.routes)?;
    let first = FirstStage::of(&plan.allocation);
    let mut rows = Vec::with_capacity(levels.len());
    for v in levels {
        let level = v.to_integer().to_u64().ok_or_else(|| ExperimentError::Grid(format!("level {v} is too large")))?;
        let base_kind = if qkd { &first.reserve_qkd } else { &first.reserve_km };
        let infeasible = || SweepRow { value: v.clone(), status: "infeasible".into(), cost: None, usage: None, routes: String::new() };
        let Some(levels_per_link) = apportion_reservation(inst, &base.built.layout, &plan.routes, base_kind, level, qkd) else {
            // the caps cannot hold this level
            rows.push(infeasible());
            continue;
        };
        let mut fixed = first.clone();
        if qkd {
            fixed.reserve_qkd = levels_per_link;
        } else {
            fixed.reserve_km = levels_per_link;
        }
        match evaluate_fixed_first_stage(inst, &fixed, params) {
            Ok(eval) => rows.push(SweepRow {
                value: v.clone(),
                status: "optimal".into(),
                usage: Some(usage_summary(inst, &eval.allocation)),
                routes: route_summary(&plan.routes),
                cost: Some(eval.cost),
            }),
            Err(RecourseError::ScenarioInfeasible { .. }) => rows.push(infeasible()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(SweepTable { kind, rows })
}

/// Fixes the total reserved QKD wavelengths on the optimal routes to each
/// level (routing and KM reservation stay at the optimum) and evaluates the
/// expected recourse.
pub fn reservation_sweep(inst: &Instance, levels: &[Rational], params: &SolverParams) -> Result<SweepTable, ExperimentError> {
    reservation_like(inst, levels, params, true)
}

/// As [`reservation_sweep`], for KM wavelengths.
pub fn km_reservation_sweep(inst: &Instance, levels: &[Rational], params: &SolverParams) -> Result<SweepTable, ExperimentError> {
    reservation_like(inst, levels, params, false)
}
