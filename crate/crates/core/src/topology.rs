//! Space-air-ground network graph: nodes, directed media links, requests.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use qkd_milp::Rational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Ground,
    Aerial,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Fiber,
    Uav,
    Satellite,
}

impl Medium {
    pub const ALL: [Medium; 3] = [Medium::Fiber, Medium::Uav, Medium::Satellite];

    pub fn as_str(self) -> &'static str {
        match self {
            Medium::Fiber => "fiber",
            Medium::Uav => "uav",
            Medium::Satellite => "satellite",
        }
    }

    /// Variable-name prefix: `x` fiber, `y` UAV, `z` satellite.
    pub fn letter(self) -> char {
        match self {
            Medium::Fiber => 'x',
            Medium::Uav => 'y',
            Medium::Satellite => 'z',
        }
    }

    pub fn parse(s: &str) -> Option<Medium> {
        Medium::ALL.into_iter().find(|m| m.as_str().eq_ignore_ascii_case(s))
    }

    /// Whether a link of this medium may join nodes on these layers.
    pub fn allows(self, a: Layer, b: Layer) -> bool {
        match self {
            Medium::Fiber => a == Layer::Ground && b == Layer::Ground,
            Medium::Uav => a == Layer::Aerial || b == Layer::Aerial,
            Medium::Satellite => a == Layer::Space || b == Layer::Space,
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Wavelength caps of one link, in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumCapacities {
    #[serde(default = "default_qkd_cap")]
    pub qkd_reserved_max: u64,
    #[serde(default = "default_km_cap")]
    pub km_reserved_max: u64,
    #[serde(default = "default_qkd_cap")]
    pub qkd_ondemand_max: u64,
    #[serde(default = "default_km_cap")]
    pub km_ondemand_max: u64,
}

pub const DEFAULT_QKD_CAP: u64 = 150;
pub const DEFAULT_KM_CAP: u64 = 30;

fn default_qkd_cap() -> u64 {
    DEFAULT_QKD_CAP
}

fn default_km_cap() -> u64 {
    DEFAULT_KM_CAP
}

impl Default for MediumCapacities {
    fn default() -> Self {
        MediumCapacities {
            qkd_reserved_max: DEFAULT_QKD_CAP,
            km_reserved_max: DEFAULT_KM_CAP,
            qkd_ondemand_max: DEFAULT_QKD_CAP,
            km_ondemand_max: DEFAULT_KM_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: u32,
    pub layer: Layer,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub from: u32,
    pub to: u32,
    pub medium: Medium,
    pub distance_km: Rational,
    pub capacities: MediumCapacities,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u32,
    pub source: u32,
    pub destination: u32,
    /// Support of the secret-key rate in kbps, ascending and duplicate-free.
    pub demand_kbps: Vec<Rational>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("cannot parse document: {0}")]
    Parse(String),
    #[error("node id {0} is declared twice")]
    DuplicateNode(u32),
    #[error("{context} refers to undefined node id {id}")]
    UnknownNode { context: String, id: u32 },
    #[error("link {from}->{to} starts and ends at the same node")]
    SelfLoop { from: u32, to: u32 },
    #[error("link {from}->{to} must have a positive distance")]
    NonPositiveDistance { from: u32, to: u32 },
    #[error("link {from}->{to} ({medium}) is declared twice")]
    DuplicateLink { from: u32, to: u32, medium: Medium },
    #[error("link {from}->{to}: {medium} cannot join a {a:?} node and a {b:?} node")]
    MediumLayer { from: u32, to: u32, medium: Medium, a: Layer, b: Layer },
    #[error("request id {0} is declared twice")]
    DuplicateRequest(u32),
    #[error("request {0} has the same source and destination")]
    RequestLoop(u32),
    #[error("request {0} needs at least one demand value")]
    EmptyDemand(u32),
    #[error("request {0} has a negative demand value")]
    NegativeDemand(u32),
}

/// Validated, immutable network graph with adjacency indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    position: HashMap<u32, usize>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut position = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if position.insert(n.id, i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id));
            }
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        let mut seen = BTreeSet::new();
        for (k, l) in links.iter().enumerate() {
            let context = format!("link {}->{}", l.from, l.to);
            let &a = position
                .get(&l.from)
                .ok_or_else(|| TopologyError::UnknownNode { context: context.clone(), id: l.from })?;
            let &b = position.get(&l.to).ok_or(TopologyError::UnknownNode { context, id: l.to })?;
            if l.from == l.to {
                return Err(TopologyError::SelfLoop { from: l.from, to: l.to });
            }
            if l.distance_km <= Rational::from_integer(0.into()) {
                return Err(TopologyError::NonPositiveDistance { from: l.from, to: l.to });
            }
            if !seen.insert((l.from, l.to, l.medium)) {
                return Err(TopologyError::DuplicateLink { from: l.from, to: l.to, medium: l.medium });
            }
            let (la, lb) = (nodes[a].layer, nodes[b].layer);
            if !l.medium.allows(la, lb) {
                return Err(TopologyError::MediumLayer { from: l.from, to: l.to, medium: l.medium, a: la, b: lb });
            }
            outgoing[a].push(k);
            incoming[b].push(k);
        }
        Ok(Topology { nodes, links, position, outgoing, incoming })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.position.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: u32) -> bool {
        self.position.contains_key(&id)
    }

    /// Indices (into [`Topology::links`]) of links leaving `id`.
    pub fn outgoing(&self, id: u32) -> Result<&[usize], TopologyError> {
        self.position
            .get(&id)
            .map(|&i| self.outgoing[i].as_slice())
            .ok_or(TopologyError::UnknownNode { context: "outgoing query".into(), id })
    }

    /// Indices (into [`Topology::links`]) of links entering `id`.
    pub fn incoming(&self, id: u32) -> Result<&[usize], TopologyError> {
        self.position
            .get(&id)
            .map(|&i| self.incoming[i].as_slice())
            .ok_or(TopologyError::UnknownNode { context: "incoming query".into(), id })
    }

    pub fn has_medium(&self, medium: Medium) -> bool {
        self.links.iter().any(|l| l.medium == medium)
    }

    pub fn validate_request(&self, r: &Request) -> Result<(), TopologyError> {
        for id in [r.source, r.destination] {
            if !self.contains(id) {
                return Err(TopologyError::UnknownNode { context: format!("request {}", r.id), id });
            }
        }
        if r.source == r.destination {
            return Err(TopologyError::RequestLoop(r.id));
        }
        if r.demand_kbps.is_empty() {
            return Err(TopologyError::EmptyDemand(r.id));
        }
        if r.demand_kbps.iter().any(|v| *v < Rational::from_integer(0.into())) {
            return Err(TopologyError::NegativeDemand(r.id));
        }
        Ok(())
    }
}

// ---- document form ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct LinkDoc {
    pub from: u32,
    pub to: u32,
    pub medium: Medium,
    #[serde(with = "numeric")]
    pub distance_km: Rational,
    #[serde(default)]
    pub caps: MediumCapacities,
    /// Also declare the reverse link with the same data.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bidirectional: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RequestDoc {
    pub id: u32,
    pub source: u32,
    pub destination: u32,
    #[serde(with = "numeric::vec")]
    pub demand_kbps: Vec<Rational>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct NetworkDoc {
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requests: Vec<RequestDoc>,
}

impl NetworkDoc {
    pub(crate) fn topology(&self) -> Result<Topology, TopologyError> {
        let mut links = Vec::with_capacity(self.links.len());
        for d in &self.links {
            let link = Link {
                from: d.from,
                to: d.to,
                medium: d.medium,
                distance_km: d.distance_km.clone(),
                capacities: d.caps,
            };
            if d.bidirectional {
                let mut back = link.clone();
                std::mem::swap(&mut back.from, &mut back.to);
                links.push(link);
                links.push(back);
            } else {
                links.push(link);
            }
        }
        Topology::new(self.nodes.clone(), links)
    }

    pub(crate) fn requests(&self, topology: &Topology) -> Result<Vec<Request>, TopologyError> {
        let mut ids = BTreeSet::new();
        let mut out = Vec::with_capacity(self.requests.len());
        for d in &self.requests {
            if !ids.insert(d.id) {
                return Err(TopologyError::DuplicateRequest(d.id));
            }
            let mut demand = d.demand_kbps.clone();
            demand.sort();
            demand.dedup();
            let r = Request { id: d.id, source: d.source, destination: d.destination, demand_kbps: demand };
            topology.validate_request(&r)?;
            out.push(r);
        }
        Ok(out)
    }
}

pub(crate) fn parse_network(document: &str) -> Result<NetworkDoc, TopologyError> {
    toml::from_str(document).map_err(|e| TopologyError::Parse(e.to_string()))
}

/// Reads `[[nodes]]` and `[[links]]` from a TOML document. Other tables are
/// ignored so the same text can carry requests and solver settings.
pub fn load_topology(document: &str) -> Result<Topology, TopologyError> {
    parse_network(document)?.topology()
}

/// Reads `[[requests]]` and checks them against `topology`.
pub fn load_requests(document: &str, topology: &Topology) -> Result<Vec<Request>, TopologyError> {
    parse_network(document)?.requests(topology)
}

/// TOML text that [`load_topology`] maps back to an equal topology.
pub fn serialize_topology(topology: &Topology) -> String {
    serialize_network(topology, &[])
}

pub fn serialize_network(topology: &Topology, requests: &[Request]) -> String {
    let doc = network_doc(topology, requests);
    toml::to_string(&doc).expect("network documents always serialize")
}

pub(crate) fn network_doc(topology: &Topology, requests: &[Request]) -> NetworkDoc {
    NetworkDoc {
        nodes: topology.nodes.clone(),
        links: topology
            .links
            .iter()
            .map(|l| LinkDoc {
                from: l.from,
                to: l.to,
                medium: l.medium,
                distance_km: l.distance_km.clone(),
                caps: l.capacities,
                bidirectional: false,
            })
            .collect(),
        requests: requests
            .iter()
            .map(|r| RequestDoc {
                id: r.id,
                source: r.source,
                destination: r.destination,
                demand_kbps: r.demand_kbps.clone(),
            })
            .collect(),
    }
}
