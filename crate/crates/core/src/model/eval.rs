//! Analytic evaluation of arbitrary (not necessarily threshold) policies.
//!
//! A node of class `c` is contacted by the source as a Poisson process of rate
//! `lambda_c`; a contact in sub-slot `k` hands over the packet with probability
//! `mu_c(k)`, so the chance of receiving nothing over sub-slots `k..=k2` is
//! `exp(-lambda_c * dt * sum mu_c)`. Holding counts are binomial, which gives
//! the per-slot Laplace transform in closed form.

use serde::Serialize;

use super::{Policy, Scenario};

/// Probability that one node receives nothing over sub-slots `k..=k2`.
pub fn q_no_receive(mu: &[f64], k: usize, k2: usize, lam: f64, dt: f64) -> f64 {
    debug_assert!(k <= k2 && k2 < mu.len());
    let mass: f64 = mu[k..=k2].iter().sum();
    (-lam * dt * mass).exp()
}

/// Start of the sub-slot window during which a copy received is still held at `k`.
fn window_start(k: usize, ttl: usize) -> usize {
    k.saturating_sub(ttl)
}

/// E[X_{c,k}]: expected number of class-`c` nodes that received the packet in sub-slots `0..=k`.
pub fn expected_received(c: usize, k: usize, pol: &Policy, sc: &Scenario) -> f64 {
    let mass: f64 = pol.class(c)[..=k].iter().sum();
    f64::from(sc.class(c).population) * -(-sc.contacts_per_sub_slot(c) * mass).exp_m1()
}

/// E[Y_{c,k}]: expected number of class-`c` nodes holding a copy at sub-slot `k`.
pub fn expected_holding(c: usize, k: usize, pol: &Policy, sc: &Scenario) -> f64 {
    f64::from(sc.class(c).population) * holding_prob(c, k, pol, sc)
}

/// Per-node holding probability p_{c,k} = 1 - Q_{c, max(0,k-t_c), k}.
pub fn holding_prob(c: usize, k: usize, pol: &Policy, sc: &Scenario) -> f64 {
    let mass: f64 = pol.class(c)[window_start(k, sc.ttl(c))..=k].iter().sum();
    -(-sc.contacts_per_sub_slot(c) * mass).exp_m1()
}

/// E[exp(-s Y_{c,h})] for the binomial holding count.
pub fn holding_laplace(s: f64, c: usize, h: usize, pol: &Policy, sc: &Scenario) -> f64 {
    let p = holding_prob(c, h, pol, sc);
    binomial_laplace(sc.class(c).population, p, s)
}

/// `(1 - p (1 - e^{-s}))^n`, the Laplace transform of Binomial(n, p) at `s`.
pub fn binomial_laplace(n: u32, p: f64, s: f64) -> f64 {
    (f64::from(n) * log_binomial_factor(p, s)).exp()
}

/// `ln(1 - p (1 - e^{-s}))`, computed without cancellation for small p or s.
#[inline]
pub(crate) fn log_binomial_factor(p: f64, s: f64) -> f64 {
    (p * (-s).exp_m1()).ln_1p()
}

/// Probability the sink has the packet within the first `k` sub-slots.
///
/// Slots are treated as independent: the result is one minus the product over
/// classes and sub-slots `0..k` of the holding-count Laplace transforms, each
/// taken at `lambda_c * dt`.
pub fn delivery_probability(pol: &Policy, k: usize, sc: &Scenario) -> f64 {
    debug_assert!(k <= pol.len());
    let mut log_miss = 0.0;
    for c in 0..pol.num_classes() {
        let s = sc.contacts_per_sub_slot(c);
        let n = f64::from(sc.class(c).population);
        let ttl = sc.ttl(c);
        let mu = pol.class(c);
        // running window sum of mu over [k - ttl, k]
        let mut mass = 0.0;
        for h in 0..k {
            mass += mu[h];
            if h > ttl {
                mass -= mu[h - ttl - 1];
            }
            let p = -(-s * mass.max(0.0)).exp_m1();
            log_miss += n * log_binomial_factor(p, s);
        }
    }
    -log_miss.exp_m1()
}

/// Expected energy: transmissions plus beaconing, summed over the horizon.
pub fn energy_spent(pol: &Policy, sc: &Scenario) -> f64 {
    transmission_energy(pol, sc) + beacon_energy(pol, sc)
}

/// Expected forwarding energy, `sum_c rho_c E[X_c]` at the last sub-slot.
pub fn transmission_energy(pol: &Policy, sc: &Scenario) -> f64 {
    (0..pol.num_classes())
        .map(|c| {
            let cls = sc.class(c);
            let mass: f64 = pol.class(c).iter().sum();
            cls.tx_cost
                * f64::from(cls.population)
                * -(-sc.contacts_per_sub_slot(c) * mass).exp_m1()
        })
        .sum()
}

/// Expected beaconing energy: a technology pays for every sub-slot in which
/// at least one of its classes transmits.
pub fn beacon_energy(pol: &Policy, sc: &Scenario) -> f64 {
    (0..sc.technologies().len())
        .map(|w| {
            let members = sc.members(w);
            let per_slot = sc.beacon_per_sub_slot(w);
            if members.is_empty() || per_slot == 0.0 {
                return 0.0;
            }
            (0..pol.len())
                .map(|k| {
                    let idle: f64 = members.iter().map(|&c| 1.0 - pol.class(c)[k]).product();
                    per_slot * (1.0 - idle)
                })
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub delivery_prob: f64,
    pub energy_spent: f64,
    pub feasible: bool,
}

/// Delivery probability at the full horizon, energy, and the budget verdict.
pub fn evaluate(pol: &Policy, sc: &Scenario) -> PolicyEvaluation {
    let energy = energy_spent(pol, sc);
    PolicyEvaluation {
        delivery_prob: delivery_probability(pol, pol.len(), sc),
        energy_spent: energy,
        feasible: energy <= sc.budget() + sc.feasibility_tolerance(),
    }
}
