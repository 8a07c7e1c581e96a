//! Equipment counts, link-length cost and per-wavelength unit prices.
//!
//! All functions are generic over [`Scalar`]; the planner instantiates them
//! with exact rationals, so ceilings are the only non-field operations.

use std::collections::BTreeMap;
use std::ops::Add;

use qkd_milp::Scalar;
use thiserror::Error;

use crate::topology::Medium;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Reservation,
    Utilization,
    OnDemand,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Reservation, Phase::Utilization, Phase::OnDemand];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Reservation => "reservation",
            Phase::Utilization => "utilization",
            Phase::OnDemand => "ondemand",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("no cost entry for {medium} in the {phase} phase")]
    MissingEntry { medium: Medium, phase: &'static str },
    #[error("{what} must be positive")]
    NonPositive { what: String },
    #[error("cost entry for {medium}/{phase} has a negative value")]
    Negative { medium: Medium, phase: &'static str },
}

/// Span length Θ and per-link key-rate capacity K of one medium.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumParams<T> {
    pub theta_km: T,
    pub key_rate_capacity_kbps: T,
}

impl<T: Scalar> MediumParams<T> {
    pub fn new(theta_km: T, key_rate_capacity_kbps: T) -> Result<Self, CostError> {
        if !theta_km.is_pos() {
            return Err(CostError::NonPositive { what: "theta_km".into() });
        }
        if !key_rate_capacity_kbps.is_pos() {
            return Err(CostError::NonPositive { what: "key_rate_capacity_kbps".into() });
        }
        Ok(MediumParams { theta_km, key_rate_capacity_kbps })
    }

    /// Θ = 160 km (fiber), 1 km (UAV), 1000 km (satellite); K = 1 kbps.
    pub fn defaults(medium: Medium) -> Self {
        let theta = match medium {
            Medium::Fiber => 160,
            Medium::Uav => 1,
            Medium::Satellite => 1000,
        };
        MediumParams { theta_km: T::from_i64(theta).unwrap(), key_rate_capacity_kbps: T::one() }
    }
}

/// Unit prices of the six components for one (medium, phase).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBetas<T> {
    pub tx: T,
    pub rx: T,
    pub km: T,
    pub si: T,
    pub md: T,
    /// Per km per wavelength.
    pub ch: T,
}

impl<T: Scalar> ComponentBetas<T> {
    fn from_ints(v: [i64; 6]) -> Self {
        let c = |i: usize| T::from_i64(v[i]).unwrap();
        ComponentBetas { tx: c(0), rx: c(1), km: c(2), si: c(3), md: c(4), ch: c(5) }
    }

    pub fn scaled(&self, factor: &T) -> Self {
        let s = |v: &T| v.clone() * factor.clone();
        ComponentBetas { tx: s(&self.tx), rx: s(&self.rx), km: s(&self.km), si: s(&self.si), md: s(&self.md), ch: s(&self.ch) }
    }

    /// Scales the five equipment prices and leaves the channel price alone.
    pub fn scaled_equipment(&self, factor: &T) -> Self {
        let s = |v: &T| v.clone() * factor.clone();
        ComponentBetas { tx: s(&self.tx), rx: s(&self.rx), km: s(&self.km), si: s(&self.si), md: s(&self.md), ch: self.ch.clone() }
    }

    fn any_negative(&self) -> bool {
        [&self.tx, &self.rx, &self.km, &self.si, &self.md, &self.ch].iter().any(|v| v.is_neg())
    }
}

/// Component prices for every medium and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable<T> {
    entries: BTreeMap<(Medium, Phase), ComponentBetas<T>>,
}

impl<T: Scalar> CostTable<T> {
    pub fn empty() -> Self {
        CostTable { entries: BTreeMap::new() }
    }

    /// Published reservation prices, reused for utilization, with on-demand
    /// prices at `ondemand_factor` times reservation.
    pub fn with_ondemand_factor(ondemand_factor: &T) -> Self {
        let mut t = Self::empty();
        for medium in Medium::ALL {
            let base = ComponentBetas::from_ints(match medium {
                Medium::Fiber => [1500, 2250, 1200, 150, 300, 1],
                Medium::Uav => [3000, 4500, 2400, 300, 600, 2],
                Medium::Satellite => [12000, 22000, 10000, 2000, 1000, 20],
            });
            t.entries.insert((medium, Phase::OnDemand), base.scaled(ondemand_factor));
            t.entries.insert((medium, Phase::Utilization), base.clone());
            t.entries.insert((medium, Phase::Reservation), base);
        }
        t
    }

    pub fn get(&self, medium: Medium, phase: Phase) -> Result<&ComponentBetas<T>, CostError> {
        self.entries.get(&(medium, phase)).ok_or(CostError::MissingEntry { medium, phase: phase.as_str() })
    }

    pub fn set(&mut self, medium: Medium, phase: Phase, betas: ComponentBetas<T>) -> Result<(), CostError> {
        if betas.any_negative() {
            return Err(CostError::Negative { medium, phase: phase.as_str() });
        }
        self.entries.insert((medium, phase), betas);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Medium, Phase), &ComponentBetas<T>)> {
        self.entries.iter()
    }
}

impl<T: Scalar> Default for CostTable<T> {
    fn default() -> Self {
        Self::with_ondemand_factor(&T::from_i64(2).unwrap())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComponentCounts {
    pub tx: u64,
    pub rx: u64,
    pub lkm: u64,
    pub si: u64,
    pub md: u64,
}

impl Add for ComponentCounts {
    type Output = ComponentCounts;

    fn add(self, o: ComponentCounts) -> ComponentCounts {
        ComponentCounts {
            tx: self.tx + o.tx,
            rx: self.rx + o.rx,
            lkm: self.lkm + o.lkm,
            si: self.si + o.si,
            md: self.md + o.md,
        }
    }
}

fn ceil_u64<T: Scalar>(v: T) -> u64 {
    let c = v.ceil();
    if c.is_neg() {
        0
    } else {
        c.to_u64().expect("ceiling fits in u64")
    }
}

/// Parallel QKD links needed for `rate_kbps`: ⌈rate / K⌉.
pub fn parallel_links<T: Scalar>(rate_kbps: &T, medium: &MediumParams<T>) -> u64 {
    ceil_u64(rate_kbps.clone() / medium.key_rate_capacity_kbps.clone())
}

/// Number of spans of length Θ on a link: ⌈e / Θ⌉.
pub fn span_count<T: Scalar>(distance_km: &T, theta_km: &T) -> u64 {
    ceil_u64(distance_km.clone() / theta_km.clone())
}

pub fn component_counts_link<T: Scalar>(p: u64, distance_km: &T, medium: &MediumParams<T>) -> ComponentCounts {
    let s = span_count(distance_km, &medium.theta_km);
    let si = s.saturating_sub(1);
    ComponentCounts { tx: 2 * p * s, rx: p * s, lkm: s + 1, si, md: s + si }
}

/// Component-wise sum over the links of a route, each given as
/// `(distance, medium parameters)`.
pub fn component_counts_route<'a, T: Scalar>(
    p: u64,
    route: impl IntoIterator<Item = (&'a T, &'a MediumParams<T>)>,
) -> ComponentCounts {
    route
        .into_iter()
        .fold(ComponentCounts::default(), |acc, (e, m)| acc + component_counts_link(p, e, m))
}

/// Wavelength-km of `p` QKD links (three wavelengths each) plus one KM link.
pub fn channel_cost_link<T: Scalar>(p: u64, distance_km: &T) -> T {
    T::from_u64(3 * p).unwrap() * distance_km.clone() + distance_km.clone()
}

/// Per-wavelength unit prices on one link, evaluated with a single parallel
/// link: `tau/phi/psi` price a QKD wavelength, `lambda/delta/xi` a KM
/// wavelength, `ch_*` is the per-km channel price of the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseUnitCosts<T> {
    pub tau: T,
    pub lambda: T,
    pub phi: T,
    pub delta: T,
    pub psi: T,
    pub xi: T,
    pub ch_r: T,
    pub ch_e: T,
    pub ch_o: T,
}

fn qkd_price<T: Scalar>(c: &ComponentCounts, b: &ComponentBetas<T>) -> T {
    let n = |v: u64| T::from_u64(v).unwrap();
    (n(c.tx) * b.tx.clone() + n(c.rx) * b.rx.clone()) / n(3)
}

fn km_price<T: Scalar>(c: &ComponentCounts, b: &ComponentBetas<T>) -> T {
    let n = |v: u64| T::from_u64(v).unwrap();
    n(c.lkm) * b.km.clone() + n(c.si) * b.si.clone() + n(c.md) * b.md.clone()
}

pub fn phase_unit_costs<T: Scalar>(
    medium: Medium,
    params: &MediumParams<T>,
    table: &CostTable<T>,
    distance_km: &T,
) -> Result<PhaseUnitCosts<T>, CostError> {
    let counts = component_counts_link(1, distance_km, params);
    let r = table.get(medium, Phase::Reservation)?;
    let e = table.get(medium, Phase::Utilization)?;
    let o = table.get(medium, Phase::OnDemand)?;
    Ok(PhaseUnitCosts {
        tau: qkd_price(&counts, r),
        lambda: km_price(&counts, r),
        phi: qkd_price(&counts, e),
        delta: km_price(&counts, e),
        psi: qkd_price(&counts, o),
        xi: km_price(&counts, o),
        ch_r: r.ch.clone(),
        ch_e: e.ch.clone(),
        ch_o: o.ch.clone(),
    })
}
