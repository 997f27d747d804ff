//! Closed-form evaluation of threshold profiles.
//!
//! For a threshold policy the delivery objective factorizes per class:
//! `ln(1 - F_D) = sum_c G_c(h_c)`, where `G_c` only depends on class `c`'s own
//! threshold. Integer thresholds are tabulated once per scenario; a fractional
//! threshold costs one pass over the sub-slots whose holding window contains
//! the fractional sub-slot.
//!
//! Energy of a threshold profile is `O(|C|)`: the beaconing term of a
//! technology only depends on the largest integer part among its classes.

use super::eval::log_binomial_factor;
use super::{Scenario, ThresholdPolicy};

#[derive(Debug, Clone)]
struct ClassTable {
    /// lambda * dt, also the Laplace argument.
    rate_dt: f64,
    population: f64,
    ttl: usize,
    /// prefix[m] = sum over sub-slots k < m of phi(min(k, ttl) + 1)
    prefix: Vec<f64>,
    /// gamma[m] = G(m) for integer thresholds 0..=h_max
    gamma: Vec<f64>,
}

impl ClassTable {
    /// ln X* for one sub-slot whose holding window carries `mass`.
    #[inline]
    fn phi(&self, mass: f64) -> f64 {
        if mass <= 0.0 {
            return 0.0;
        }
        let p = -(-self.rate_dt * mass).exp_m1();
        self.population * log_binomial_factor(p, self.rate_dt)
    }

    fn gamma_at(&self, h: f64, n: usize) -> f64 {
        let m = h.floor() as usize;
        let alpha = h - m as f64;
        let t = self.ttl;
        let mut acc = self.prefix[m];
        let k_end = (m + t).min(n - 1);
        // sub-slots whose window starts at 0: mass m + alpha
        let flat_end = t.min(k_end);
        if flat_end >= m {
            acc += (flat_end - m + 1) as f64 * self.phi(m as f64 + alpha);
        }
        // sub-slots whose window has slid past 0
        for k in m.max(t + 1)..=k_end {
            acc += self.phi((m + t - k) as f64 + alpha);
        }
        acc
    }
}

/// Energy of threshold profiles; needs no per-slot tables.
#[derive(Debug, Clone)]
pub struct ProfileCost {
    tx_weight: Vec<f64>,
    rate_dt: Vec<f64>,
    beacon: Vec<f64>,
    tech_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    h_max: f64,
}

impl ProfileCost {
    pub fn new(sc: &Scenario) -> Self {
        let techs = sc.technologies().len();
        Self {
            tx_weight: sc
                .classes()
                .iter()
                .map(|cls| cls.tx_cost * f64::from(cls.population))
                .collect(),
            rate_dt: (0..sc.num_classes())
                .map(|c| sc.contacts_per_sub_slot(c))
                .collect(),
            beacon: (0..techs).map(|w| sc.beacon_per_sub_slot(w)).collect(),
            tech_of: (0..sc.num_classes()).map(|c| sc.technology_of(c)).collect(),
            members: (0..techs).map(|w| sc.members(w).to_vec()).collect(),
            h_max: sc.max_threshold(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.tx_weight.len()
    }

    pub fn max_threshold(&self) -> f64 {
        self.h_max
    }

    /// rho_c * N_c, the transmission energy if every node of the class is reached.
    pub fn tx_weight(&self, c: usize) -> f64 {
        self.tx_weight[c]
    }

    /// lambda_c * dt.
    pub fn rate_dt(&self, c: usize) -> f64 {
        self.rate_dt[c]
    }

    /// Expected transmission energy of class `c` at threshold `h`.
    pub fn tx_cost(&self, c: usize, h: f64) -> f64 {
        self.tx_weight[c] * -(-self.rate_dt[c] * h).exp_m1()
    }

    /// d/dh of [`tx_cost`](Self::tx_cost).
    pub fn tx_slope(&self, c: usize, h: f64) -> f64 {
        self.tx_weight[c] * self.rate_dt[c] * (-self.rate_dt[c] * h).exp()
    }

    /// Cost of one more full sub-slot for class `c` sitting at integer threshold `m`.
    pub fn next_slot_tx_cost(&self, c: usize, m: usize) -> f64 {
        let a = self.rate_dt[c];
        self.tx_weight[c] * (-a * m as f64).exp() * -(-a).exp_m1()
    }

    pub fn technology_of(&self, c: usize) -> usize {
        self.tech_of[c]
    }

    pub fn technologies(&self) -> usize {
        self.beacon.len()
    }

    pub fn members(&self, w: usize) -> &[usize] {
        &self.members[w]
    }

    /// Beaconing energy of technology `w` per active sub-slot.
    pub fn beacon_per_sub_slot(&self, w: usize) -> f64 {
        self.beacon[w]
    }

    /// Expected beaconing energy of technology `w` under the profile.
    pub fn beacon_cost(&self, w: usize, thresholds: &[f64]) -> f64 {
        let b = self.beacon[w];
        if b == 0.0 || self.members[w].is_empty() {
            return 0.0;
        }
        let top = self.members[w]
            .iter()
            .map(|&c| thresholds[c].floor())
            .fold(f64::NEG_INFINITY, f64::max);
        let idle: f64 = self.members[w]
            .iter()
            .filter(|&&c| thresholds[c].floor() == top)
            .map(|&c| 1.0 - (thresholds[c] - top))
            .product();
        b * (top + 1.0 - idle)
    }

    /// Right-derivative of the beaconing energy with respect to class `c`'s threshold.
    fn beacon_slope(&self, c: usize, thresholds: &[f64]) -> f64 {
        let w = self.tech_of[c];
        let b = self.beacon[w];
        if b == 0.0 {
            return 0.0;
        }
        let fl = thresholds[c].floor();
        let others_top = self.members[w]
            .iter()
            .filter(|&&o| o != c)
            .map(|&o| thresholds[o].floor())
            .fold(f64::NEG_INFINITY, f64::max);
        if fl > others_top {
            b
        } else if fl < others_top {
            0.0
        } else {
            let idle: f64 = self.members[w]
                .iter()
                .filter(|&&o| o != c && thresholds[o].floor() == fl)
                .map(|&o| 1.0 - (thresholds[o] - fl))
                .product();
            b * idle
        }
    }

    /// Expected energy of a threshold profile.
    pub fn energy(&self, thresholds: &[f64]) -> f64 {
        let tx: f64 = thresholds
            .iter()
            .enumerate()
            .map(|(c, &h)| self.tx_cost(c, h))
            .sum();
        let beacon: f64 = (0..self.beacon.len())
            .map(|w| self.beacon_cost(w, thresholds))
            .sum();
        tx + beacon
    }

    /// Energy and its right-derivative in `thresholds[c]`.
    pub fn energy_and_slope(&self, c: usize, thresholds: &[f64]) -> (f64, f64) {
        let slope = self.tx_slope(c, thresholds[c]) + self.beacon_slope(c, thresholds);
        (self.energy(thresholds), slope)
    }
}

/// Per-class delivery tables plus the energy model for one scenario.
#[derive(Debug, Clone)]
pub struct ThresholdEvaluator {
    horizon: usize,
    tables: Vec<ClassTable>,
    cost: ProfileCost,
}

impl ThresholdEvaluator {
    pub fn new(sc: &Scenario) -> Self {
        let n = sc.horizon();
        let tables = (0..sc.num_classes())
            .map(|c| {
                let mut t = ClassTable {
                    rate_dt: sc.contacts_per_sub_slot(c),
                    population: f64::from(sc.class(c).population),
                    ttl: sc.ttl(c),
                    prefix: Vec::with_capacity(n + 1),
                    gamma: Vec::with_capacity(n),
                };
                let mut acc = 0.0;
                t.prefix.push(0.0);
                for k in 0..n {
                    acc += t.phi((k.min(t.ttl) + 1) as f64);
                    t.prefix.push(acc);
                }
                t.gamma = (0..n).map(|m| t.gamma_at(m as f64, n)).collect();
                t
            })
            .collect();
        Self {
            horizon: n,
            tables,
            cost: ProfileCost::new(sc),
        }
    }

    pub fn cost(&self) -> &ProfileCost {
        &self.cost
    }

    pub fn num_classes(&self) -> usize {
        self.tables.len()
    }

    pub fn max_threshold(&self) -> f64 {
        self.cost.h_max
    }

    /// Class `c`'s contribution to `ln(1 - F_D)` at threshold `h`.
    pub fn log_miss(&self, c: usize, h: f64) -> f64 {
        debug_assert!(
            (0.0..=self.cost.h_max).contains(&h),
            "threshold {h} out of range"
        );
        if h.fract() == 0.0 {
            self.tables[c].gamma[h as usize]
        } else {
            self.tables[c].gamma_at(h, self.horizon)
        }
    }

    /// Same as [`log_miss`](Self::log_miss) for an integer threshold.
    pub fn log_miss_int(&self, c: usize, m: usize) -> f64 {
        self.tables[c].gamma[m]
    }

    /// Delivery probability of a threshold profile over the full horizon.
    pub fn delivery(&self, thresholds: &[f64]) -> f64 {
        let s: f64 = thresholds
            .iter()
            .enumerate()
            .map(|(c, &h)| self.log_miss(c, h))
            .sum();
        -s.exp_m1()
    }

    pub fn delivery_of(&self, tp: &ThresholdPolicy) -> f64 {
        self.delivery(tp.thresholds())
    }

    pub fn energy(&self, thresholds: &[f64]) -> f64 {
        self.cost.energy(thresholds)
    }
}
