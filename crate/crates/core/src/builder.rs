//! Deterministic-equivalent MILP of the two-stage planning problem.
//!
//! Routing is decided per arc, an ordered node pair that may carry parallel
//! links of several media. For request `f`:
//!
//! * `w_i_n_f` (binary) selects arc `i -> n`;
//! * `{m}rqk_i_n_f`, `{m}rkm_i_n_f` reserve QKD / KM wavelengths on the
//!   medium-`m` link of that arc (`m` is `x` fiber, `y` UAV, `z` satellite);
//! * `{m}eqk_i_n_f_s`, `{m}ekm_i_n_f_s` use reserved wavelengths and
//!   `{m}oqk_i_n_f_s`, `{m}okm_i_n_f_s` buy on-demand ones in scenario `s`.
//!
//! Products with the routing binary are linearized as `v <= cap * w`; the
//! usage variables inherit that bound through `use <= reserve`.

use std::collections::HashMap;

use num_traits::Zero;
use qkd_milp::{MilpModel, Rational, Row, RowSense, VarKind};
use thiserror::Error;

use crate::cost_model::{parallel_links, phase_unit_costs, CostError, PhaseUnitCosts};
use crate::instance::{Instance, InstanceError};
use crate::scenario::satellite_available;
use crate::topology::Medium;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Ordered node pair with its parallel links (link indices, by medium).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub from: u32,
    pub to: u32,
    pub links: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondStageColumns {
    pub use_qkd: usize,
    pub use_km: usize,
    pub ondemand_qkd: usize,
    pub ondemand_km: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkColumns {
    pub reserve_qkd: usize,
    pub reserve_km: usize,
    /// One entry per scenario.
    pub second: Vec<SecondStageColumns>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestColumns {
    /// One routing binary per arc.
    pub w: Vec<usize>,
    /// One block per link.
    pub links: Vec<LinkColumns>,
}

/// Where every decision variable lives in the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnLayout {
    pub arcs: Vec<Arc>,
    pub arc_of_link: Vec<usize>,
    /// Parallel to `Instance::requests`.
    pub requests: Vec<RequestColumns>,
    pub num_columns: usize,
}

impl ColumnLayout {
    /// Column order: per request, its routing binaries, then the two
    /// reservation columns of every link, then per link and scenario the
    /// four second-stage columns.
    pub fn new(inst: &Instance) -> Self {
        let mut arcs: Vec<Arc> = Vec::new();
        let mut arc_index: HashMap<(u32, u32), usize> = HashMap::new();
        let mut arc_of_link = Vec::with_capacity(inst.topology.links().len());
        for (k, l) in inst.topology.links().iter().enumerate() {
            let a = *arc_index.entry((l.from, l.to)).or_insert_with(|| {
                arcs.push(Arc { from: l.from, to: l.to, links: Vec::new() });
                arcs.len() - 1
            });
            arcs[a].links.push(k);
            arc_of_link.push(a);
        }
        let links = inst.topology.links();
        for a in &mut arcs {
            a.links.sort_by_key(|&k| links[k].medium);
        }
        let scenarios = inst.scenarios.len();
        let mut next = 0usize;
        let mut take = |n: usize| {
            next += n;
            next - n
        };
        let mut requests = Vec::with_capacity(inst.requests.len());
        for _ in &inst.requests {
            let w: Vec<usize> = arcs.iter().map(|_| take(1)).collect();
            let reserve: Vec<usize> = links.iter().map(|_| take(2)).collect();
            let link_cols = reserve
                .into_iter()
                .map(|r| LinkColumns {
                    reserve_qkd: r,
                    reserve_km: r + 1,
                    second: (0..scenarios)
                        .map(|_| {
                            let c = take(4);
                            SecondStageColumns { use_qkd: c, use_km: c + 1, ondemand_qkd: c + 2, ondemand_km: c + 3 }
                        })
                        .collect(),
                })
                .collect();
            requests.push(RequestColumns { w, links: link_cols });
        }
        ColumnLayout { arcs, arc_of_link, requests, num_columns: next }
    }
}

/// What a row encodes; used for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowFamily {
    FlowSource,
    FlowDestination,
    FlowTransit,
    FlowOut,
    ReserveLink,
    UseWithinReserve,
    OnDemandLink,
    DemandQkd,
    DemandKm,
    AggregateUseQkd,
    AggregateUseKm,
    AggregateOnDemandQkd,
    AggregateOnDemandKm,
}

impl RowFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            RowFamily::FlowSource => "flow-source",
            RowFamily::FlowDestination => "flow-destination",
            RowFamily::FlowTransit => "flow-transit",
            RowFamily::FlowOut => "flow-out",
            RowFamily::ReserveLink => "reserve-link",
            RowFamily::UseWithinReserve => "use-within-reserve",
            RowFamily::OnDemandLink => "ondemand-link",
            RowFamily::DemandQkd => "demand-qkd",
            RowFamily::DemandKm => "demand-km",
            RowFamily::AggregateUseQkd => "aggregate-use-qkd",
            RowFamily::AggregateUseKm => "aggregate-use-km",
            RowFamily::AggregateOnDemandQkd => "aggregate-ondemand-qkd",
            RowFamily::AggregateOnDemandKm => "aggregate-ondemand-km",
        }
    }
}

pub type FamilyRow = (RowFamily, Row<Rational>);

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: MilpModel<Rational>,
    pub layout: ColumnLayout,
    /// Parallel to `model.rows`.
    pub row_families: Vec<RowFamily>,
    /// Parallel to `Instance::topology.links()`.
    pub unit_costs: Vec<PhaseUnitCosts<Rational>>,
}

/// Selects one second-stage column index.
type ColumnPick = fn(&SecondStageColumns) -> usize;

fn q(v: u64) -> Rational {
    Rational::from_integer(v.into())
}

/// Unit prices of every link.
pub fn link_unit_costs(inst: &Instance) -> Result<Vec<PhaseUnitCosts<Rational>>, BuildError> {
    inst.topology
        .links()
        .iter()
        .map(|l| {
            let params = inst
                .medium_params
                .get(&l.medium)
                .ok_or_else(|| InstanceError::Invalid(format!("no parameters for medium {}", l.medium)))?;
            Ok(phase_unit_costs(l.medium, params, &inst.cost_table, &l.distance_km)?)
        })
        .collect()
}

/// Parallel QKD links a request with `rate` needs on `arc`. Parallel media
/// with different key-rate capacities use the smallest one.
pub fn arc_parallel_links(inst: &Instance, arc: &Arc, rate: &Rational) -> u64 {
    arc.links
        .iter()
        .map(|&k| parallel_links(rate, &inst.medium_params[&inst.topology.links()[k].medium]))
        .max()
        .unwrap_or(0)
}

fn name_link(inst: &Instance, link: usize, kind: &str, f: u32) -> String {
    let l = &inst.topology.links()[link];
    format!("{}{}_{}_{}_{}", l.medium.letter(), kind, l.from, l.to, f)
}

fn add_columns(inst: &Instance, layout: &ColumnLayout, costs: &[PhaseUnitCosts<Rational>], model: &mut MilpModel<Rational>) {
    let links = inst.topology.links();
    for (fi, req) in inst.requests.iter().enumerate() {
        let cols = &layout.requests[fi];
        for (a, arc) in layout.arcs.iter().enumerate() {
            let j = model.add_binary(format!("w_{}_{}_{}", arc.from, arc.to, req.id), inst.routing_cost(arc.to, req.id));
            debug_assert_eq!(j, cols.w[a]);
        }
        for (k, l) in links.iter().enumerate() {
            let c = &costs[k];
            let e = &l.distance_km;
            let caps = &l.capacities;
            let j = model.add_column(
                name_link(inst, k, "rqk", req.id),
                Some(Rational::zero()),
                Some(q(caps.qkd_reserved_max)),
                VarKind::Integer,
                c.tau.clone() + e.clone() * c.ch_r.clone(),
            );
            debug_assert_eq!(j, cols.links[k].reserve_qkd);
            model.add_column(
                name_link(inst, k, "rkm", req.id),
                Some(Rational::zero()),
                Some(q(caps.km_reserved_max)),
                VarKind::Integer,
                c.lambda.clone() + e.clone() * c.ch_r.clone(),
            );
        }
        for (k, l) in links.iter().enumerate() {
            let c = &costs[k];
            let e = &l.distance_km;
            let caps = &l.capacities;
            for (s, sc) in inst.scenarios.scenarios.iter().enumerate() {
                let p = &sc.probability;
                let open = l.medium != Medium::Satellite || satellite_available(sc);
                let cap = |v: u64| Some(if open { q(v) } else { Rational::zero() });
                let base = name_link(inst, k, "", req.id);
                let (m, rest) = base.split_at(1);
                let name = |kind: &str| format!("{m}{kind}{rest}_{s}");
                let j = model.add_column(
                    name("eqk"),
                    Some(Rational::zero()),
                    cap(caps.qkd_reserved_max),
                    VarKind::Integer,
                    p.clone() * (c.phi.clone() + e.clone() * c.ch_e.clone()),
                );
                debug_assert_eq!(j, cols.links[k].second[s].use_qkd);
                model.add_column(
                    name("ekm"),
                    Some(Rational::zero()),
                    cap(caps.km_reserved_max),
                    VarKind::Integer,
                    p.clone() * (c.delta.clone() + e.clone() * c.ch_e.clone()),
                );
                model.add_column(
                    name("oqk"),
                    Some(Rational::zero()),
                    cap(caps.qkd_ondemand_max),
                    VarKind::Integer,
                    p.clone() * (c.psi.clone() + e.clone() * c.ch_o.clone()),
                );
                model.add_column(
                    name("okm"),
                    Some(Rational::zero()),
                    cap(caps.km_ondemand_max),
                    VarKind::Integer,
                    p.clone() * (c.xi.clone() + e.clone() * c.ch_o.clone()),
                );
            }
        }
    }
}

/// Source, destination and transit balances plus at most one outgoing arc
/// per node, for every request.
pub fn flow_rows(inst: &Instance, layout: &ColumnLayout) -> Vec<FamilyRow> {
    let one = q(1);
    let mut rows = Vec::new();
    for (fi, req) in inst.requests.iter().enumerate() {
        let w = &layout.requests[fi].w;
        for node in inst.topology.nodes() {
            let n = node.id;
            let out: Vec<usize> = (0..layout.arcs.len()).filter(|&a| layout.arcs[a].from == n).collect();
            let inc: Vec<usize> = (0..layout.arcs.len()).filter(|&a| layout.arcs[a].to == n).collect();
            let balance = |sign_out: i64| -> Vec<(usize, Rational)> {
                out.iter()
                    .map(|&a| (w[a], Rational::from_integer(sign_out.into())))
                    .chain(inc.iter().map(|&a| (w[a], Rational::from_integer((-sign_out).into()))))
                    .collect()
            };
            if n == req.source {
                rows.push((RowFamily::FlowSource, Row::new(format!("src_{n}_{}", req.id), balance(1), RowSense::Eq, one.clone())));
            } else if n == req.destination {
                rows.push((RowFamily::FlowDestination, Row::new(format!("dst_{n}_{}", req.id), balance(-1), RowSense::Eq, one.clone())));
            } else if !out.is_empty() || !inc.is_empty() {
                rows.push((RowFamily::FlowTransit, Row::new(format!("bal_{n}_{}", req.id), balance(1), RowSense::Eq, Rational::zero())));
            }
            if !out.is_empty() {
                let coefs = out.iter().map(|&a| (w[a], one.clone())).collect();
                rows.push((RowFamily::FlowOut, Row::new(format!("out_{n}_{}", req.id), coefs, RowSense::Le, one.clone())));
            }
        }
    }
    rows
}

/// Off-route forcing of reservation and on-demand variables, usage within
/// reservation, and (with two or more requests) per-link aggregate caps.
pub fn capacity_and_linking_rows(inst: &Instance, layout: &ColumnLayout) -> Vec<FamilyRow> {
    let links = inst.topology.links();
    let one = q(1);
    let mut rows = Vec::new();
    for (fi, req) in inst.requests.iter().enumerate() {
        let cols = &layout.requests[fi];
        for (k, l) in links.iter().enumerate() {
            let w = cols.w[layout.arc_of_link[k]];
            let lc = &cols.links[k];
            let caps = &l.capacities;
            let tag = |kind: &str| name_link(inst, k, kind, req.id);
            rows.push((
                RowFamily::ReserveLink,
                Row::new(format!("cap_{}", tag("rqk")), vec![(lc.reserve_qkd, one.clone()), (w, -q(caps.qkd_reserved_max))], RowSense::Le, Rational::zero()),
            ));
            rows.push((
                RowFamily::ReserveLink,
                Row::new(format!("cap_{}", tag("rkm")), vec![(lc.reserve_km, one.clone()), (w, -q(caps.km_reserved_max))], RowSense::Le, Rational::zero()),
            ));
        }
        for (k, l) in links.iter().enumerate() {
            let w = cols.w[layout.arc_of_link[k]];
            let lc = &cols.links[k];
            let caps = &l.capacities;
            for (s, sc) in lc.second.iter().enumerate() {
                let tag = |kind: &str| format!("{}_{s}", name_link(inst, k, kind, req.id));
                rows.push((
                    RowFamily::UseWithinReserve,
                    Row::new(format!("use_{}", tag("eqk")), vec![(sc.use_qkd, one.clone()), (lc.reserve_qkd, -one.clone())], RowSense::Le, Rational::zero()),
                ));
                rows.push((
                    RowFamily::UseWithinReserve,
                    Row::new(format!("use_{}", tag("ekm")), vec![(sc.use_km, one.clone()), (lc.reserve_km, -one.clone())], RowSense::Le, Rational::zero()),
                ));
                rows.push((
                    RowFamily::OnDemandLink,
                    Row::new(format!("cap_{}", tag("oqk")), vec![(sc.ondemand_qkd, one.clone()), (w, -q(caps.qkd_ondemand_max))], RowSense::Le, Rational::zero()),
                ));
                rows.push((
                    RowFamily::OnDemandLink,
                    Row::new(format!("cap_{}", tag("okm")), vec![(sc.ondemand_km, one.clone()), (w, -q(caps.km_ondemand_max))], RowSense::Le, Rational::zero()),
                ));
            }
        }
    }
    if inst.requests.len() >= 2 {
        for (k, l) in links.iter().enumerate() {
            let caps = &l.capacities;
            for s in 0..inst.scenarios.len() {
                let families: [(RowFamily, &str, u64, ColumnPick); 4] = [
                    (RowFamily::AggregateUseQkd, "eqk", caps.qkd_reserved_max, |c| c.use_qkd),
                    (RowFamily::AggregateUseKm, "ekm", caps.km_reserved_max, |c| c.use_km),
                    (RowFamily::AggregateOnDemandQkd, "oqk", caps.qkd_ondemand_max, |c| c.ondemand_qkd),
                    (RowFamily::AggregateOnDemandKm, "okm", caps.km_ondemand_max, |c| c.ondemand_km),
                ];
                for (family, kind, cap, pick) in families {
                    let coefs = layout.requests.iter().map(|rc| (pick(&rc.links[k].second[s]), one.clone())).collect();
                    rows.push((
                        family,
                        Row::new(format!("agg_{}{}_{}_{}_{s}", l.medium.letter(), kind, l.from, l.to), coefs, RowSense::Le, q(cap)),
                    ));
                }
            }
        }
    }
    rows
}

/// Per arc, request and scenario: wavelengths over all media of the arc
/// cover `W * P * w` for QKD and KM.
pub fn demand_rows(inst: &Instance, layout: &ColumnLayout) -> Vec<FamilyRow> {
    let one = q(1);
    let mut rows = Vec::new();
    for (fi, req) in inst.requests.iter().enumerate() {
        let cols = &layout.requests[fi];
        for (a, arc) in layout.arcs.iter().enumerate() {
            for (s, sc) in inst.scenarios.scenarios.iter().enumerate() {
                let p = arc_parallel_links(inst, arc, &sc.rates_kbps[&req.id]);
                for (family, tag, wmul, pick) in [
                    (RowFamily::DemandQkd, "qkd", inst.w_qkd, (|c: &SecondStageColumns| (c.use_qkd, c.ondemand_qkd)) as fn(&SecondStageColumns) -> (usize, usize)),
                    (RowFamily::DemandKm, "km", inst.w_kml, |c: &SecondStageColumns| (c.use_km, c.ondemand_km)),
                ] {
                    let mut coefs = Vec::with_capacity(2 * arc.links.len() + 1);
                    for &k in &arc.links {
                        let (u, o) = pick(&cols.links[k].second[s]);
                        coefs.push((u, one.clone()));
                        coefs.push((o, one.clone()));
                    }
                    let need = p * wmul;
                    if need > 0 {
                        coefs.push((cols.w[a], -q(need)));
                    }
                    rows.push((
                        family,
                        Row::new(format!("dem{tag}_{}_{}_{}_{s}", arc.from, arc.to, req.id), coefs, RowSense::Ge, Rational::zero()),
                    ));
                }
            }
        }
    }
    rows
}

pub fn build_deterministic_equivalent(inst: &Instance) -> Result<BuiltModel, BuildError> {
    inst.validate()?;
    let layout = ColumnLayout::new(inst);
    let unit_costs = link_unit_costs(inst)?;
    let mut model = MilpModel::new(inst.name.clone());
    add_columns(inst, &layout, &unit_costs, &mut model);
    debug_assert_eq!(model.num_columns(), layout.num_columns);
    let mut row_families = Vec::new();
    for (family, row) in flow_rows(inst, &layout)
        .into_iter()
        .chain(capacity_and_linking_rows(inst, &layout))
        .chain(demand_rows(inst, &layout))
    {
        model.add_row(row);
        row_families.push(family);
    }
    Ok(BuiltModel { model, layout, row_families, unit_costs })
}
