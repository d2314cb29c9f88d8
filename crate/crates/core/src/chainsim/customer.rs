use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;

/// Parameters of a log-normal amount distribution over minor units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        LogNormal::new(self.mu, self.sigma)
            .expect("sigma is validated at construction")
            .sample(rng)
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }
}

/// Behavioural segment used to draw a customer's rates and amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Retail,
    Business,
    Occasional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerProfile {
    pub customer_id: String,
    pub name: String,
    pub postal_address: String,
    pub identification_number: String,
    pub wallet_address: String,
    pub home_currency: String,
    /// Expected transactions per day.
    pub activity_rate: f64,
    pub typical_amount: LogNormalParams,
    pub token_balance: u64,
    pub segment: Segment,
    /// Index into the scenario corridor table used for most transfers.
    pub home_corridor: usize,
    /// Regular receivers (customer indices).
    pub contacts: Vec<usize>,
}

const FIRST_NAMES: &[&str] = &[
    "Amara",
    "Bilal",
    "Carmen",
    "Dmytro",
    "Esther",
    "Farid",
    "Grace",
    "Hana",
    "Ibrahim",
    "Jun",
    "Kofi",
    "Lucia",
    "Mateo",
    "Nadia",
    "Oluwaseun",
    "Priya",
    "Quang",
    "Rosa",
    "Samir",
    "Tanvi",
    "Uchenna",
    "Valeria",
    "Wei",
    "Ximena",
    "Yusuf",
    "Zara",
];

const LAST_NAMES: &[&str] = &[
    "Adeyemi",
    "Bautista",
    "Chaudhry",
    "Dela Cruz",
    "Eze",
    "Fernandez",
    "Gupta",
    "Hassan",
    "Ivanenko",
    "Jimenez",
    "Khan",
    "Lopez",
    "Mensah",
    "Nguyen",
    "Okafor",
    "Patel",
    "Quispe",
    "Reyes",
    "Santos",
    "Tkachenko",
    "Usman",
    "Vargas",
    "Wang",
    "Yilmaz",
    "Zulu",
];

const STREETS: &[&str] = &[
    "Harbor Rd",
    "Market St",
    "Station Ave",
    "Palm Way",
    "Mill Lane",
    "Cedar St",
    "King St",
    "Garden Rd",
    "River Walk",
    "Bridge St",
];

const CITIES: &[&str] = &[
    "Houston",
    "Dubai",
    "London",
    "Madrid",
    "Chicago",
    "Lyon",
    "Birmingham",
    "Miami",
    "Berlin",
    "Toronto",
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn draw_wallet(rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>) -> String {
    loop {
        let bytes: [u8; 20] = rng.random();
        let wallet = format!("0x{}", hex::encode(bytes));
        if taken.insert(wallet.clone()) {
            return wallet;
        }
    }
}

pub(crate) fn generate_customers(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<CustomerProfile> {
    let n = cfg.n_customers;
    let mut wallets = BTreeSet::new();
    let mut customers = Vec::with_capacity(n);
    for i in 0..n {
        let segment = match rng.random::<f64>() {
            u if u < 0.70 => Segment::Retail,
            u if u < 0.85 => Segment::Business,
            _ => Segment::Occasional,
        };
        let (rate_median, amount_median, amount_sigma): (f64, f64, f64) = match segment {
            Segment::Retail => (26.0, 250_00.0, 0.7),
            Segment::Business => (60.0, 15_000_00.0, 0.5),
            Segment::Occasional => (0.05, 400_00.0, 0.6),
        };
        let activity_rate = rate_median * (rng.random::<f64>() * 1.2 - 0.6).exp();
        let amount_mu = amount_median.ln() + rng.random::<f64>() * 0.8 - 0.4;
        let home_corridor = rng.random_range(0..cfg.corridors.len());
        let first = pick(rng, FIRST_NAMES);
        let last = pick(rng, LAST_NAMES);
        let street_no = rng.random_range(1..=999);
        let street = pick(rng, STREETS);
        let city = pick(rng, CITIES);
        let id_number = format!("ID-{:09}", rng.random_range(0..1_000_000_000u64));
        let wallet_address = draw_wallet(rng, &mut wallets);
        let token_balance = rng.random_range(2_000_000_00..20_000_000_00u64);
        customers.push(CustomerProfile {
            customer_id: format!("C{i:06}"),
            name: format!("{first} {last}"),
            postal_address: format!("{street_no} {street}, {city}"),
            identification_number: id_number,
            wallet_address,
            home_currency: cfg.corridors[home_corridor].source.clone(),
            activity_rate,
            typical_amount: LogNormalParams {
                mu: amount_mu,
                sigma: amount_sigma,
            },
            token_balance,
            segment,
            home_corridor,
            contacts: Vec::new(),
        });
    }
    // contacts are drawn after every profile exists so any customer can be a receiver
    if n > 1 {
        for i in 0..n {
            let k = match customers[i].segment {
                Segment::Business => rng.random_range(4..=10),
                _ => rng.random_range(1..=3),
            };
            let mut contacts = BTreeSet::new();
            while contacts.len() < k.min(n - 1) {
                let j = rng.random_range(0..n);
                if j != i {
                    contacts.insert(j);
                }
            }
            customers[i].contacts = contacts.into_iter().collect();
        }
    }
    customers
}

pub fn is_wallet_address(s: &str) -> bool {
    s.len() == 42 && s.starts_with("0x") && s[2..].bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn wallets_are_well_formed_and_unique() {
        let cfg = ScenarioConfig {
            n_customers: 3000,
            ..ScenarioConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = generate_customers(&cfg, &mut rng);
        let set: BTreeSet<_> = cs.iter().map(|c| c.wallet_address.clone()).collect();
        assert_eq!(set.len(), cs.len());
        assert!(cs.iter().all(|c| is_wallet_address(&c.wallet_address)));
        assert!(cs
            .iter()
            .all(|c| !c.contacts.contains(&cs.iter().position(|x| x == c).unwrap())));
    }

    #[test]
    fn wallet_pattern() {
        assert!(is_wallet_address("0x00000000000000000000000000000000000000af"));
        assert!(!is_wallet_address("0x00000000000000000000000000000000000000AF"));
        assert!(!is_wallet_address("00000000000000000000000000000000000000af"));
    }
}
