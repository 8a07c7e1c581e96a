//! Small random instances for cross-checking the solver against the
//! enumeration oracle.

use std::collections::BTreeMap;

use qkd_milp::Rational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost_model::{CostTable, Phase};
use crate::instance::{Instance, InstanceError};
use crate::scenario::{enumerate_scenarios, RateSupport, Weather, WeatherSupport};
use crate::topology::{Layer, Link, Medium, MediumCapacities, Node, Request, Topology};

/// Size limits of generated instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub max_nodes: u32,
    pub max_links: usize,
    pub max_requests: usize,
    pub max_scenarios: usize,
    pub max_cap: u64,
    pub max_rate: i64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { max_nodes: 4, max_links: 5, max_requests: 2, max_scenarios: 4, max_cap: 6, max_rate: 3 }
    }
}

fn q(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

fn random_layer(rng: &mut ChaCha8Rng) -> Layer {
    match rng.gen_range(0..10) {
        0..=3 => Layer::Ground,
        4..=6 => Layer::Aerial,
        _ => Layer::Space,
    }
}

fn random_distance(rng: &mut ChaCha8Rng, medium: Medium) -> Rational {
    match medium {
        Medium::Fiber => q(rng.gen_range(20..=400)),
        // a few hundred metres to a few km
        Medium::Uav => Rational::new(rng.gen_range(1..=40).into(), 10.into()),
        Medium::Satellite => q(rng.gen_range(300..=1500)),
    }
}

/// Deterministic instance for `seed`. Requests always have at least one
/// candidate path; satellites and cloudy skies are common.
pub fn random_instance(seed: u64, spec: &SyntheticSpec) -> Result<Instance, InstanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=spec.max_nodes.max(2));
    let mut layers: Vec<Layer> = (0..n).map(|_| random_layer(&mut rng)).collect();
    // a space node makes satellite links possible
    if n >= 3 && rng.gen_bool(0.6) && !layers.contains(&Layer::Space) {
        layers[rng.gen_range(0..n as usize)] = Layer::Space;
    }
    let nodes: Vec<Node> =
        layers.iter().enumerate().map(|(i, l)| Node { id: i as u32, layer: *l, label: format!("n{i}") }).collect();

    // QKD needs three wavelengths per parallel link, so its pools start higher
    let lo = spec.max_cap / 2;
    let mut caps = || MediumCapacities {
        qkd_reserved_max: rng.gen_range(lo..=spec.max_cap),
        km_reserved_max: rng.gen_range(0..=spec.max_cap),
        qkd_ondemand_max: rng.gen_range(lo..=spec.max_cap),
        km_ondemand_max: rng.gen_range(1..=spec.max_cap),
    };
    let mut link_caps: Vec<MediumCapacities> = (0..spec.max_links).map(|_| caps()).collect();

    let mut links: Vec<Link> = Vec::new();
    let mut add = |rng: &mut ChaCha8Rng, links: &mut Vec<Link>, a: u32, b: u32| {
        if links.len() >= spec.max_links || a == b {
            return;
        }
        let allowed: Vec<Medium> =
            Medium::ALL.into_iter().filter(|m| m.allows(layers[a as usize], layers[b as usize])).collect();
        let fresh: Vec<Medium> = allowed
            .into_iter()
            .filter(|m| !links.iter().any(|l| l.from == a && l.to == b && l.medium == *m))
            .collect();
        let Some(&medium) = fresh.choose(rng) else { return };
        links.push(Link {
            from: a,
            to: b,
            medium,
            distance_km: random_distance(rng, medium),
            capacities: link_caps.pop().expect("one cap set per link"),
        });
    };

    let nreq = rng.gen_range(1..=spec.max_requests.max(1));
    let mut requests = Vec::new();
    for id in 0..nreq {
        let s = rng.gen_range(0..n);
        let mut d = rng.gen_range(0..n - 1);
        if d >= s {
            d += 1;
        }
        // a candidate path, direct or through a relay
        if n >= 3 && rng.gen_bool(0.6) {
            let mid = (0..n).filter(|&m| m != s && m != d).collect::<Vec<_>>();
            let m = *mid.choose(&mut rng).unwrap();
            add(&mut rng, &mut links, s, m);
            add(&mut rng, &mut links, m, d);
        } else {
            add(&mut rng, &mut links, s, d);
        }
        requests.push((id as u32 + 1, s, d));
    }
    while links.len() < spec.max_links && rng.gen_bool(0.7) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        add(&mut rng, &mut links, a, b);
    }
    let topology = Topology::new(nodes, links)?;

    // rate supports and weather, product at most max_scenarios
    let weather_states: Vec<Weather> = match rng.gen_range(0..4) {
        0 => vec![Weather::Clear],
        1 => vec![Weather::Cloudy],
        _ => vec![Weather::Clear, Weather::Cloudy],
    };
    let mut budget = spec.max_scenarios / weather_states.len();
    let mut support: RateSupport = BTreeMap::new();
    let mut reqs = Vec::new();
    for (id, s, d) in requests {
        let mut values: Vec<i64> = (0..=spec.max_rate).collect();
        values.shuffle(&mut rng);
        let k = if budget >= 2 && rng.gen_bool(0.6) { 2 } else { 1 };
        budget /= k;
        let mut v: Vec<Rational> = values[..k].iter().map(|&x| q(x)).collect();
        v.sort();
        support.insert(id, v.clone());
        reqs.push(Request { id, source: s, destination: d, demand_kbps: v });
    }
    let weather = WeatherSupport::uniform(&weather_states)?;
    let scenarios = enumerate_scenarios(&support, &weather, spec.max_scenarios as u64)?;

    let mut inst = Instance::new(topology, reqs, scenarios)?;
    inst.name = format!("synthetic-{seed}");
    inst.cost_table = CostTable::with_ondemand_factor(&q(rng.gen_range(2..=4)));
    if rng.gen_bool(0.3) {
        // a cheaper satellite makes it competitive on these short hops
        let cheap = inst.cost_table.get(Medium::Satellite, Phase::Reservation)?.scaled(&Rational::new(1.into(), 20.into()));
        for phase in Phase::ALL {
            let factor = if phase == Phase::OnDemand { q(2) } else { q(1) };
            inst.cost_table.set(Medium::Satellite, phase, cheap.scaled(&factor))?;
        }
    }
    for r in &inst.requests.clone() {
        if rng.gen_bool(0.3) {
            let node = rng.gen_range(0..n);
            inst.routing_cost.insert((node, r.id), q(rng.gen_range(0..=3)));
        }
    }
    inst.validate()?;
    Ok(inst)
}
