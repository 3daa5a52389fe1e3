//! Heterogeneous client populations and user assignment.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::FederationError;
use crate::data::{CustomerProfile, CustomerType, RiskLevel};
use crate::seed::rng_for;

pub const N_CAPACITY_BUCKETS: usize = 4;
/// customer type x risk level x capacity bucket.
pub const N_STRATA: usize = CustomerType::ALL.len() * RiskLevel::ALL.len() * N_CAPACITY_BUCKETS;
pub const DEFAULT_CONCENTRATION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    #[default]
    NonIid,
    Iid,
}

impl std::str::FromStr for ClientMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "noniid" => Ok(ClientMode::NonIid),
            "iid" => Ok(ClientMode::Iid),
            other => Err(format!("unknown client mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub client_id: usize,
    /// Distribution over [`N_STRATA`] strata, indexed by [`Strata::index`].
    pub stratum_weights: Vec<f64>,
}

/// Investment-capacity quartile edges of a profile population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strata {
    pub capacity_edges: [Decimal; N_CAPACITY_BUCKETS - 1],
}

impl Strata {
    /// Quartile edges by nearest rank: edge `q` is the value at sorted position
    /// `ceil(q * n / 4) - 1`.
    pub fn from_profiles(profiles: &[CustomerProfile]) -> Self {
        let mut caps: Vec<Decimal> = profiles.iter().map(|p| p.investment_capacity).collect();
        caps.sort();
        let mut edges = [Decimal::ZERO; N_CAPACITY_BUCKETS - 1];
        if !caps.is_empty() {
            for (q, edge) in edges.iter_mut().enumerate() {
                let rank = ((q + 1) * caps.len()).div_ceil(N_CAPACITY_BUCKETS);
                *edge = caps[rank.max(1) - 1];
            }
        }
        Self { capacity_edges: edges }
    }

    /// Bucket `b` holds capacities in `(edge[b-1], edge[b]]`.
    pub fn capacity_bucket(&self, capacity: Decimal) -> usize {
        self.capacity_edges.iter().filter(|e| capacity > **e).count()
    }

    pub fn index(&self, p: &CustomerProfile) -> usize {
        (p.customer_type.index() * RiskLevel::ALL.len() + p.risk_level.index()) * N_CAPACITY_BUCKETS
            + self.capacity_bucket(p.investment_capacity)
    }
}

/// Symmetric Dirichlet draw as normalised Gamma variates.
pub(crate) fn dirichlet(rng: &mut impl Rng, k: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut w: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = w.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        w.iter_mut().for_each(|x| *x /= sum);
    } else {
        // Every variate underflowed: the limit is a point mass.
        let hot = rng.random_range(0..k);
        w = (0..k).map(|i| if i == hot { 1.0 } else { 0.0 }).collect();
    }
    w
}

pub fn make_clients(n: usize, mode: ClientMode, concentration: f64, seed: u64) -> Result<Vec<ClientProfile>, FederationError> {
    if n == 0 {
        return Err(FederationError::Invalid("at least one client is required".into()));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(FederationError::Invalid(format!("concentration must be positive, got {concentration}")));
    }
    Ok((0..n)
        .map(|client_id| {
            let stratum_weights = match mode {
                ClientMode::Iid => vec![1.0 / N_STRATA as f64; N_STRATA],
                ClientMode::NonIid => {
                    let mut rng = rng_for(seed, &["client", &client_id.to_string()]);
                    dirichlet(&mut rng, N_STRATA, concentration)
                }
            };
            ClientProfile {
                client_id,
                stratum_weights,
            }
        })
        .collect())
}

/// Customer to client map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub n_clients: usize,
    pub clients: BTreeMap<String, usize>,
}

impl Assignment {
    pub fn client_of(&self, customer_id: &str) -> Option<usize> {
        self.clients.get(customer_id).copied()
    }

    /// Customers of `client`, sorted.
    pub fn customers_of(&self, client: usize) -> Vec<&str> {
        self.clients
            .iter()
            .filter(|(_, c)| **c == client)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_clients];
        for c in self.clients.values() {
            counts[*c] += 1;
        }
        counts
    }
}

/// Assign each customer to a client drawn with probability proportional to
/// the client's weight on the customer's stratum.
pub fn assign_users(profiles: &[CustomerProfile], clients: &[ClientProfile], seed: u64) -> Result<Assignment, FederationError> {
    if clients.is_empty() {
        return Err(FederationError::Invalid("no clients".into()));
    }
    let strata = Strata::from_profiles(profiles);
    let mut samplers: BTreeMap<usize, WeightedIndex<f64>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for p in profiles {
        let s = strata.index(p);
        if !samplers.contains_key(&s) {
            let weights = clients.iter().map(|c| c.stratum_weights.get(s).copied().unwrap_or(0.0));
            let sampler = WeightedIndex::new(weights).map_err(|_| FederationError::EmptyStratumSupport(s))?;
            samplers.insert(s, sampler);
        }
        let mut rng = rng_for(seed, &["assign", &p.customer_id]);
        let c = clients[samplers[&s].sample(&mut rng)].client_id;
        out.insert(p.customer_id.clone(), c);
    }
    let n_clients = clients.iter().map(|c| c.client_id + 1).max().unwrap_or(0);
    Ok(Assignment {
        n_clients,
        clients: out,
    })
}
