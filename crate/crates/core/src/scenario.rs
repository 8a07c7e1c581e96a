//! Joint scenarios: one secret-key rate per request plus a global weather state.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, ToPrimitive, Zero};
use qkd_milp::Rational;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SCENARIO_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Cloudy,
}

impl Weather {
    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Cloudy => "cloudy",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    /// Request id to realized rate (kbps).
    pub rates_kbps: BTreeMap<u32, Rational>,
    pub weather: Weather,
    pub probability: Rational,
}

impl Scenario {
    fn key(&self) -> (Vec<Rational>, Weather) {
        (self.rates_kbps.values().cloned().collect(), self.weather)
    }
}

/// True iff satellites can carry keys in this scenario.
pub fn satellite_available(scenario: &Scenario) -> bool {
    scenario.weather == Weather::Clear
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("request {0} has an empty rate support")]
    EmptySupport(u32),
    #[error("request {0} has a negative rate")]
    NegativeRate(u32),
    #[error("the weather support is empty")]
    EmptyWeather,
    #[error("weather state {0} is listed twice")]
    DuplicateWeather(Weather),
    #[error("weather probabilities must be positive and sum to 1")]
    BadWeatherProbabilities,
    #[error("the scenario product has {size} elements, above the limit of {limit}; use sampling instead")]
    TooMany { size: String, limit: u64 },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("scenario set is inconsistent: {0}")]
    Inconsistent(String),
}

/// Weather states with their probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeatherSupport(Vec<(Weather, Rational)>);

impl WeatherSupport {
    pub fn uniform(states: &[Weather]) -> Result<Self, ScenarioError> {
        if states.is_empty() {
            return Err(ScenarioError::EmptyWeather);
        }
        let p = Rational::new(1.into(), (states.len() as i64).into());
        Self::weighted(states.iter().map(|w| (*w, p.clone())).collect())
    }

    pub fn weighted(states: Vec<(Weather, Rational)>) -> Result<Self, ScenarioError> {
        if states.is_empty() {
            return Err(ScenarioError::EmptyWeather);
        }
        for (i, (w, _)) in states.iter().enumerate() {
            if states[..i].iter().any(|(v, _)| v == w) {
                return Err(ScenarioError::DuplicateWeather(*w));
            }
        }
        let total: Rational = states.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() || states.iter().any(|(_, p)| *p <= Rational::zero()) {
            return Err(ScenarioError::BadWeatherProbabilities);
        }
        Ok(WeatherSupport(states))
    }

    pub fn clear_and_cloudy() -> Self {
        Self::uniform(&[Weather::Clear, Weather::Cloudy]).expect("two distinct states")
    }

    pub fn states(&self) -> &[(Weather, Rational)] {
        &self.0
    }

    pub fn contains(&self, w: Weather) -> bool {
        self.0.iter().any(|(v, _)| *v == w)
    }
}

/// Per-request rate supports, keyed by request id.
pub type RateSupport = BTreeMap<u32, Vec<Rational>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub rate_support: RateSupport,
    pub weather_support: WeatherSupport,
}

fn check_support(support: &RateSupport) -> Result<RateSupport, ScenarioError> {
    let mut clean = BTreeMap::new();
    for (id, values) in support {
        if values.is_empty() {
            return Err(ScenarioError::EmptySupport(*id));
        }
        if values.iter().any(|v| *v < Rational::zero()) {
            return Err(ScenarioError::NegativeRate(*id));
        }
        let mut v = values.clone();
        v.sort();
        v.dedup();
        clean.insert(*id, v);
    }
    Ok(clean)
}

/// Full Cartesian product with uniform rates and the given weather law.
pub fn enumerate_scenarios(
    rate_support: &RateSupport,
    weather: &WeatherSupport,
    limit: u64,
) -> Result<ScenarioSet, ScenarioError> {
    let support = check_support(rate_support)?;
    let mut size: u128 = weather.0.len() as u128;
    for v in support.values() {
        size = size.saturating_mul(v.len() as u128);
    }
    if size > limit as u128 {
        return Err(ScenarioError::TooMany { size: size.to_string(), limit });
    }
    let rate_prob: Rational = support
        .values()
        .map(|v| Rational::new(1.into(), (v.len() as i64).into()))
        .product();
    let ids: Vec<u32> = support.keys().copied().collect();
    let mut scenarios = Vec::with_capacity(size as usize);
    let mut digits = vec![0usize; ids.len()];
    loop {
        let rates: BTreeMap<u32, Rational> =
            ids.iter().zip(&digits).map(|(id, &d)| (*id, support[id][d].clone())).collect();
        for (w, p) in &weather.0 {
            scenarios.push(Scenario { rates_kbps: rates.clone(), weather: *w, probability: rate_prob.clone() * p.clone() });
        }
        // odometer over requests, last request fastest
        let mut k = ids.len();
        loop {
            if k == 0 {
                let set = ScenarioSet { scenarios, rate_support: support, weather_support: weather.clone() };
                set.validate()?;
                return Ok(set);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < support[&ids[k]].len() {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// `n` i.i.d. draws from the product law; repeated draws are merged and
/// weighted by their multiplicity. First-draw order is kept.
pub fn sample_scenarios(
    rate_support: &RateSupport,
    weather: &WeatherSupport,
    seed: u64,
    n: u64,
) -> Result<ScenarioSet, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::NoSamples);
    }
    let support = check_support(rate_support)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = weather.0.iter().map(|(_, p)| p.to_f64().unwrap_or(0.0)).collect();
    let weather_pick = WeightedIndex::new(&weights).expect("weights are positive");

    let mut order: Vec<(BTreeMap<u32, Rational>, Weather)> = Vec::new();
    let mut counts: HashMap<(Vec<Rational>, Weather), (usize, u64)> = HashMap::new();
    for _ in 0..n {
        let rates: BTreeMap<u32, Rational> =
            support.iter().map(|(id, v)| (*id, v[rng.gen_range(0..v.len())].clone())).collect();
        let w = weather.0[weather_pick.sample(&mut rng)].0;
        let key = (rates.values().cloned().collect::<Vec<_>>(), w);
        match counts.get_mut(&key) {
            Some((_, c)) => *c += 1,
            None => {
                counts.insert(key, (order.len(), 1));
                order.push((rates, w));
            }
        }
    }
    let scenarios = order
        .into_iter()
        .map(|(rates, w)| {
            let key = (rates.values().cloned().collect::<Vec<_>>(), w);
            let count = counts[&key].1;
            Scenario {
                rates_kbps: rates,
                weather: w,
                probability: Rational::new((count as i64).into(), (n as i64).into()),
            }
        })
        .collect();
    let set = ScenarioSet { scenarios, rate_support: support, weather_support: weather.clone() };
    set.validate()?;
    Ok(set)
}

impl ScenarioSet {
    /// Builds a set from explicit scenarios and checks its invariants.
    pub fn from_scenarios(
        scenarios: Vec<Scenario>,
        rate_support: RateSupport,
        weather_support: WeatherSupport,
    ) -> Result<Self, ScenarioError> {
        let set = ScenarioSet { scenarios, rate_support, weather_support };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Probabilities are positive and sum to exactly 1, scenarios are
    /// pairwise distinct and every scenario rates every request.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.scenarios.is_empty() {
            return Err(ScenarioError::Inconsistent("no scenarios".into()));
        }
        let mut total = Rational::zero();
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.probability <= Rational::zero() {
                return Err(ScenarioError::Inconsistent(format!("scenario {i} has probability {}", s.probability)));
            }
            if !s.rates_kbps.keys().eq(self.rate_support.keys()) {
                return Err(ScenarioError::Inconsistent(format!("scenario {i} does not rate every request")));
            }
            if !seen.insert(s.key()) {
                return Err(ScenarioError::Inconsistent(format!("scenario {i} is a duplicate")));
            }
            total += s.probability.clone();
        }
        if !total.is_one() {
            return Err(ScenarioError::Inconsistent(format!("probabilities sum to {total}")));
        }
        Ok(())
    }

    /// Expected rate of each request under the scenario probabilities.
    pub fn mean_rates(&self) -> BTreeMap<u32, Rational> {
        self.rate_support
            .keys()
            .map(|id| {
                let mean: Rational =
                    self.scenarios.iter().map(|s| s.probability.clone() * s.rates_kbps[id].clone()).sum();
                (*id, mean)
            })
            .collect()
    }
}
