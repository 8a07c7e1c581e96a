//! Planning instance: network, requests, scenarios, prices and options, and
//! the TOML document that describes them.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use num_traits::Zero;
use qkd_milp::{BranchingRule, NodeSelection, Rational, SolverParams};
use serde::Deserialize;
use thiserror::Error;

use crate::cost_model::{ComponentBetas, CostError, CostTable, MediumParams, Phase};
use crate::numeric;
use crate::scenario::{
    enumerate_scenarios, sample_scenarios, RateSupport, Scenario, ScenarioError, ScenarioSet, Weather,
    WeatherSupport, DEFAULT_SCENARIO_LIMIT,
};
use crate::topology::{parse_network, Medium, NetworkDoc, Request, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Solver settings carried by an instance document.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub node_limit: Option<u64>,
    pub time_limit_s: Option<f64>,
    pub threads: Option<usize>,
    pub branching: Option<String>,
    pub node_selection: Option<String>,
}

impl SolverConfig {
    pub fn params(&self) -> Result<SolverParams, InstanceError> {
        let mut p = SolverParams { node_limit: self.node_limit, ..SolverParams::default() };
        if let Some(t) = self.time_limit_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(InstanceError::Invalid("solver.time_limit_s must be positive".into()));
            }
            p.time_limit = Some(Duration::from_secs_f64(t));
        }
        if let Some(n) = self.threads {
            p.threads = n.max(1);
        }
        if let Some(b) = &self.branching {
            p.branching = match b.as_str() {
                "lowest-index" => BranchingRule::LowestIndex,
                "most-fractional" => BranchingRule::MostFractional,
                other => return Err(InstanceError::Invalid(format!("unknown branching rule `{other}`"))),
            };
        }
        if let Some(s) = &self.node_selection {
            p.node_selection = match s.as_str() {
                "best-bound" => NodeSelection::BestBound,
                "depth-first" => NodeSelection::DepthFirst,
                other => return Err(InstanceError::Invalid(format!("unknown node selection `{other}`"))),
            };
        }
        if p.node_limit == Some(0) {
            return Err(InstanceError::Invalid("solver.node_limit must be positive".into()));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub topology: Topology,
    pub requests: Vec<Request>,
    pub scenarios: ScenarioSet,
    pub cost_table: CostTable<Rational>,
    pub medium_params: BTreeMap<Medium, MediumParams<Rational>>,
    /// Cost of routing request `f` into node `n`, keyed `(n, f)`. Missing
    /// entries are zero.
    pub routing_cost: BTreeMap<(u32, u32), Rational>,
    /// Wavelengths per parallel QKD link.
    pub w_qkd: u64,
    /// Wavelengths per parallel KM need.
    pub w_kml: u64,
    pub solver: SolverConfig,
}

impl Instance {
    /// Instance with default prices, media and multipliers.
    pub fn new(topology: Topology, requests: Vec<Request>, scenarios: ScenarioSet) -> Result<Self, InstanceError> {
        let inst = Instance {
            name: "instance".into(),
            topology,
            requests,
            scenarios,
            cost_table: CostTable::default(),
            medium_params: Medium::ALL.into_iter().map(|m| (m, MediumParams::defaults(m))).collect(),
            routing_cost: BTreeMap::new(),
            w_qkd: 3,
            w_kml: 1,
            solver: SolverConfig::default(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let mut ids = std::collections::BTreeSet::new();
        for r in &self.requests {
            self.topology.validate_request(r)?;
            if !ids.insert(r.id) {
                return Err(TopologyError::DuplicateRequest(r.id).into());
            }
            match self.scenarios.rate_support.get(&r.id) {
                Some(support) if r.demand_kbps.iter().all(|v| support.contains(v)) => {}
                _ => {
                    return Err(InstanceError::Invalid(format!(
                        "request {} demand values are missing from the scenario rate support",
                        r.id
                    )))
                }
            }
        }
        if self.scenarios.rate_support.len() != self.requests.len() {
            return Err(InstanceError::Invalid("scenario set rates a request that does not exist".into()));
        }
        self.scenarios.validate()?;
        for l in self.topology.links() {
            if !self.medium_params.contains_key(&l.medium) {
                return Err(InstanceError::Invalid(format!("no parameters for medium {}", l.medium)));
            }
            for phase in Phase::ALL {
                self.cost_table.get(l.medium, phase)?;
            }
        }
        for ((n, f), c) in &self.routing_cost {
            if !self.topology.contains(*n) {
                return Err(TopologyError::UnknownNode { context: "routing cost".into(), id: *n }.into());
            }
            if !ids.contains(f) {
                return Err(InstanceError::Invalid(format!("routing cost for unknown request {f}")));
            }
            if *c < Rational::zero() {
                return Err(InstanceError::Invalid("routing costs must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn request_position(&self, id: u32) -> Option<usize> {
        self.requests.iter().position(|r| r.id == id)
    }

    pub fn routing_cost(&self, node: u32, request: u32) -> Rational {
        self.routing_cost.get(&(node, request)).cloned().unwrap_or_else(Rational::zero)
    }

    /// Copy with every rate (supports and scenario realizations) multiplied
    /// by `factor`. Scenarios that become identical are merged.
    pub fn with_scaled_demand(&self, factor: &Rational) -> Result<Instance, InstanceError> {
        let mut inst = self.clone();
        for r in &mut inst.requests {
            for v in &mut r.demand_kbps {
                *v = v.clone() * factor.clone();
            }
            r.demand_kbps.dedup();
        }
        let support: RateSupport = self
            .scenarios
            .rate_support
            .iter()
            .map(|(id, v)| {
                let mut v: Vec<Rational> = v.iter().map(|x| x.clone() * factor.clone()).collect();
                v.dedup();
                (*id, v)
            })
            .collect();
        let mut merged: Vec<Scenario> = Vec::new();
        let mut index: HashMap<(Vec<Rational>, Weather), usize> = HashMap::new();
        for s in &self.scenarios.scenarios {
            let rates: BTreeMap<u32, Rational> =
                s.rates_kbps.iter().map(|(id, v)| (*id, v.clone() * factor.clone())).collect();
            let key = (rates.values().cloned().collect::<Vec<_>>(), s.weather);
            match index.get(&key) {
                Some(&i) => merged[i].probability += s.probability.clone(),
                None => {
                    index.insert(key, merged.len());
                    merged.push(Scenario { rates_kbps: rates, weather: s.weather, probability: s.probability.clone() });
                }
            }
        }
        inst.scenarios = ScenarioSet::from_scenarios(merged, support, self.scenarios.weather_support.clone())?;
        inst.validate()?;
        Ok(inst)
    }

    /// Copy holding a single scenario with probability one.
    pub fn restricted_to(&self, scenario: &Scenario) -> Result<Instance, InstanceError> {
        let mut inst = self.clone();
        let support: RateSupport = scenario.rates_kbps.iter().map(|(id, v)| (*id, vec![v.clone()])).collect();
        for r in &mut inst.requests {
            r.demand_kbps = support[&r.id].clone();
        }
        let one = Scenario { probability: Rational::from_integer(1.into()), ..scenario.clone() };
        let weather = WeatherSupport::uniform(&[scenario.weather])?;
        inst.scenarios = ScenarioSet::from_scenarios(vec![one], support, weather)?;
        Ok(inst)
    }
}

// ---- document form ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default = "default_weather")]
    weather: Vec<Weather>,
    #[serde(default, with = "numeric::option_vec")]
    weather_probabilities: Option<Vec<Rational>>,
    #[serde(default = "default_mode")]
    mode: String,
    samples: Option<u64>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_limit")]
    limit: u64,
}

fn default_weather() -> Vec<Weather> {
    vec![Weather::Clear, Weather::Cloudy]
}

fn default_mode() -> String {
    "enumerate".into()
}

fn default_limit() -> u64 {
    DEFAULT_SCENARIO_LIMIT
}

impl Default for ScenarioDoc {
    fn default() -> Self {
        ScenarioDoc {
            weather: default_weather(),
            weather_probabilities: None,
            mode: default_mode(),
            samples: None,
            seed: 0,
            limit: default_limit(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideDoc {
    medium: Medium,
    phase: String,
    #[serde(default, with = "numeric::option")]
    tx: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    rx: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    km: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    si: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    md: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    ch: Option<Rational>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsDoc {
    #[serde(default = "default_factor", with = "numeric")]
    ondemand_factor: Rational,
    #[serde(default, rename = "override")]
    overrides: Vec<OverrideDoc>,
}

fn default_factor() -> Rational {
    Rational::from_integer(2.into())
}

impl Default for CostsDoc {
    fn default() -> Self {
        CostsDoc { ondemand_factor: default_factor(), overrides: Vec::new() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MediumDoc {
    #[serde(default, with = "numeric::option")]
    theta_km: Option<Rational>,
    #[serde(default, with = "numeric::option")]
    key_rate_kbps: Option<Rational>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoutingCostDoc {
    node: u32,
    /// Applies to every request when absent.
    request: Option<u32>,
    #[serde(with = "numeric")]
    cost: Rational,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsDoc {
    #[serde(default = "default_w_qkd")]
    w_qkd: u64,
    #[serde(default = "default_w_kml")]
    w_kml: u64,
    #[serde(default)]
    media: BTreeMap<Medium, MediumDoc>,
    #[serde(default)]
    routing_cost: Vec<RoutingCostDoc>,
}

fn default_w_qkd() -> u64 {
    3
}

fn default_w_kml() -> u64 {
    1
}

impl Default for OptionsDoc {
    fn default() -> Self {
        OptionsDoc { w_qkd: 3, w_kml: 1, media: BTreeMap::new(), routing_cost: Vec::new() }
    }
}

// `flatten` rules out `deny_unknown_fields` here; the nested tables still
// reject unknown keys.
#[derive(Debug, Deserialize)]
struct InstanceDoc {
    #[serde(default)]
    name: Option<String>,
    #[serde(flatten)]
    network: NetworkDoc,
    #[serde(default)]
    scenarios: ScenarioDoc,
    #[serde(default)]
    costs: CostsDoc,
    #[serde(default)]
    options: OptionsDoc,
    #[serde(default)]
    solver: SolverConfig,
}

/// Parses and validates an instance document.
pub fn load_instance(document: &str) -> Result<Instance, InstanceError> {
    load_instance_seeded(document, None)
}

/// As [`load_instance`], with `seed` replacing the document's sampling seed.
pub fn load_instance_seeded(document: &str, seed: Option<u64>) -> Result<Instance, InstanceError> {
    // parse the network part first so its messages stay specific
    parse_network(document)?;
    let doc: InstanceDoc = toml::from_str(document).map_err(|e| TopologyError::Parse(e.to_string()))?;
    let topology = doc.network.topology()?;
    let requests = doc.network.requests(&topology)?;

    let weather = match &doc.scenarios.weather_probabilities {
        None => WeatherSupport::uniform(&doc.scenarios.weather)?,
        Some(p) if p.len() == doc.scenarios.weather.len() => {
            WeatherSupport::weighted(doc.scenarios.weather.iter().copied().zip(p.iter().cloned()).collect())?
        }
        Some(_) => {
            return Err(InstanceError::Invalid("weather_probabilities must match weather in length".into()));
        }
    };
    let support: RateSupport = requests.iter().map(|r| (r.id, r.demand_kbps.clone())).collect();
    let scenarios = match doc.scenarios.mode.as_str() {
        "enumerate" => enumerate_scenarios(&support, &weather, doc.scenarios.limit)?,
        "sample" => {
            let n = doc
                .scenarios
                .samples
                .ok_or_else(|| InstanceError::Invalid("scenarios.samples is required when mode = \"sample\"".into()))?;
            sample_scenarios(&support, &weather, seed.unwrap_or(doc.scenarios.seed), n)?
        }
        other => return Err(InstanceError::Invalid(format!("unknown scenario mode `{other}`"))),
    };

    let mut cost_table = CostTable::with_ondemand_factor(&doc.costs.ondemand_factor);
    if doc.costs.ondemand_factor < Rational::zero() {
        return Err(InstanceError::Invalid("costs.ondemand_factor must be nonnegative".into()));
    }
    for o in &doc.costs.overrides {
        let phase = Phase::parse(&o.phase)
            .ok_or_else(|| InstanceError::Invalid(format!("unknown cost phase `{}`", o.phase)))?;
        let base = cost_table.get(o.medium, phase)?.clone();
        let pick = |v: &Option<Rational>, d: Rational| v.clone().unwrap_or(d);
        let betas = ComponentBetas {
            tx: pick(&o.tx, base.tx),
            rx: pick(&o.rx, base.rx),
            km: pick(&o.km, base.km),
            si: pick(&o.si, base.si),
            md: pick(&o.md, base.md),
            ch: pick(&o.ch, base.ch),
        };
        cost_table.set(o.medium, phase, betas)?;
    }

    let mut medium_params = BTreeMap::new();
    for m in Medium::ALL {
        let d = MediumParams::<Rational>::defaults(m);
        let (theta, k) = match doc.options.media.get(&m) {
            Some(md) => (
                md.theta_km.clone().unwrap_or(d.theta_km),
                md.key_rate_kbps.clone().unwrap_or(d.key_rate_capacity_kbps),
            ),
            None => (d.theta_km, d.key_rate_capacity_kbps),
        };
        medium_params.insert(m, MediumParams::new(theta, k)?);
    }

    let mut routing_cost = BTreeMap::new();
    for rc in &doc.options.routing_cost {
        match rc.request {
            Some(f) => {
                routing_cost.insert((rc.node, f), rc.cost.clone());
            }
            None => {
                for r in &requests {
                    routing_cost.insert((rc.node, r.id), rc.cost.clone());
                }
            }
        }
    }
    if doc.options.w_qkd == 0 || doc.options.w_kml == 0 {
        return Err(InstanceError::Invalid("options.w_qkd and options.w_kml must be positive".into()));
    }
    doc.solver.params()?;

    let inst = Instance {
        name: doc.name.unwrap_or_else(|| "instance".into()),
        topology,
        requests,
        scenarios,
        cost_table,
        medium_params,
        routing_cost,
        w_qkd: doc.options.w_qkd,
        w_kml: doc.options.w_kml,
        solver: doc.solver,
    };
    inst.validate()?;
    Ok(inst)
}

pub fn load_instance_file(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    load_instance_file_seeded(path, None)
}

pub fn load_instance_file_seeded(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| InstanceError::Io { path: path.display().to_string(), message: e.to_string() })?;
    load_instance_seeded(&text, seed)
}
