//! Monte Carlo simulation of the two-hop contact process.
//!
//! Each relay meets the source as a Poisson process. A meeting during sub-slot
//! `k` hands over the packet with probability `mu_c(k)`; once accepted, the
//! relay keeps the copy for its TTL and then drops it for good. A holding relay
//! meets the sink at the same rate and delivers on the first meeting.
//!
//! Trials use independent ChaCha streams keyed by `(seed, trial index)` and
//! are reduced in fixed-size chunks in index order, so results do not depend
//! on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{
    beacon_energy, delivery_probability, energy_spent, Policy, PolicyError, Scenario,
};

const CHUNK: u64 = 2048;
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BeaconMode {
    /// Add the expected beaconing energy of the policy to every trial.
    Expected,
    /// Per sub-slot and class, draw whether the source is willing to
    /// transmit; a technology beacons in a sub-slot if any of its classes is.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub record_energy: bool,
    /// Record per-class holding counts per sub-slot and transmissions.
    pub track_counts: bool,
    pub beacon_mode: BeaconMode,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            record_energy: true,
            track_counts: false,
            beacon_mode: BeaconMode::Expected,
        }
    }
}

/// Sample mean with a 95% normal-approximation half-width (infinite below two samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        if n < 2 {
            return Self {
                mean,
                ci95: f64::INFINITY,
            };
        }
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Self {
            mean,
            ci95: Z95 * (var / nf).sqrt(),
        }
    }

    /// Whether `value` lies within `k` half-widths of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.ci95
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimOutcome {
    pub delivery_freq: f64,
    pub ci95_halfwidth: f64,
    pub mean_energy: f64,
    pub mean_energy_ci: f64,
    pub trials: u64,
    /// `[class][sub-slot]` relays holding a copy, when tracked.
    pub holding: Option<Vec<Vec<Estimate>>>,
    /// Forwards per class, when tracked.
    pub transmissions: Option<Vec<Estimate>>,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    delivered: u64,
    energy: f64,
    energy_sq: f64,
    holding: Vec<Vec<(f64, f64)>>,
    forwards: Vec<(f64, f64)>,
}

impl Acc {
    fn new(classes: usize, horizon: usize, track: bool) -> Self {
        Self {
            holding: if track {
                vec![vec![(0.0, 0.0); horizon]; classes]
            } else {
                Vec::new()
            },
            forwards: if track {
                vec![(0.0, 0.0); classes]
            } else {
                Vec::new()
            },
            ..Default::default()
        }
    }

    fn absorb(&mut self, other: &Acc) {
        self.delivered += other.delivered;
        self.energy += other.energy;
        self.energy_sq += other.energy_sq;
        for (a, b) in self.holding.iter_mut().zip(&other.holding) {
            for (x, y) in a.iter_mut().zip(b) {
                x.0 += y.0;
                x.1 += y.1;
            }
        }
        for (x, y) in self.forwards.iter_mut().zip(&other.forwards) {
            x.0 += y.0;
            x.1 += y.1;
        }
    }
}

struct Prepared<'a> {
    sc: &'a Scenario,
    pol: &'a Policy,
    dt: f64,
    horizon: usize,
    /// end of the last sub-slot with mu > 0, per class
    active_until: Vec<f64>,
    expected_beacon: f64,
}

impl Prepared<'_> {
    #[allow(clippy::needless_range_loop)]
    fn trial(&self, cfg: &SimConfig, index: u64, acc: &mut Acc, scratch: &mut [Vec<u32>]) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        let end = self.horizon as f64 * self.dt;
        let mut delivered = false;
        let mut energy = 0.0;
        for c in 0..self.sc.num_classes() {
            let lam = self.sc.contact_rate(c);
            let mu = self.pol.class(c);
            let ttl = self.sc.ttl(c);
            let rho = self.sc.class(c).tx_cost;
            let mut forwards = 0u32;
            if cfg.track_counts {
                scratch[c].fill(0);
            }
            if lam <= 0.0 {
                continue;
            }
            for _ in 0..self.sc.class(c).population {
                let mut t = 0.0;
                let accepted = loop {
                    let gap: f64 = rng.sample(Exp1);
                    t += gap / lam;
                    if t >= self.active_until[c] {
                        break None;
                    }
                    let k = ((t / self.dt) as usize).min(self.horizon - 1);
                    let m = mu[k];
                    if m >= 1.0 || (m > 0.0 && rng.random::<f64>() < m) {
                        break Some((t, k));
                    }
                };
                let Some((t_in, k_in)) = accepted else {
                    continue;
                };
                forwards += 1;
                let last = (k_in + ttl).min(self.horizon - 1);
                let drop_at = ((last + 1) as f64 * self.dt).min(end);
                let gap: f64 = rng.sample(Exp1);
                if t_in + gap / lam < drop_at {
                    delivered = true;
                }
                if cfg.track_counts {
                    for h in &mut scratch[c][k_in..=last] {
                        *h += 1;
                    }
                }
            }
            energy += rho * f64::from(forwards);
            if cfg.track_counts {
                let f = f64::from(forwards);
                acc.forwards[c].0 += f;
                acc.forwards[c].1 += f * f;
                for (slot, &h) in acc.holding[c].iter_mut().zip(&scratch[c]) {
                    let h = f64::from(h);
                    slot.0 += h;
                    slot.1 += h * h;
                }
            }
        }
        energy += match cfg.beacon_mode {
            BeaconMode::Expected => self.expected_beacon,
            BeaconMode::Sampled => self.sampled_beacon(&mut rng),
        };
        acc.delivered += u64::from(delivered);
        if cfg.record_energy {
            acc.energy += energy;
            acc.energy_sq += energy * energy;
        }
    }

    fn sampled_beacon(&self, rng: &mut ChaCha8Rng) -> f64 {
        let sc = self.sc;
        let mut total = 0.0;
        for w in 0..sc.technologies().len() {
            let b = sc.beacon_per_sub_slot(w);
            if b == 0.0 {
                continue;
            }
            for k in 0..self.horizon {
                let on = sc.members(w).iter().any(|&c| {
                    let m = self.pol.class(c)[k];
                    m >= 1.0 || (m > 0.0 && rng.random::<f64>() < m)
                });
                if on {
                    total += b;
                }
            }
        }
        total
    }
}

pub fn simulate(sc: &Scenario, pol: &Policy, cfg: &SimConfig) -> Result<SimOutcome, PolicyError> {
    pol.check_shape(sc)?;
    assert!(cfg.trials >= 1, "at least one trial required");
    let horizon = sc.horizon();
    let dt = sc.sub_slot_len();
    let prep = Prepared {
        sc,
        pol,
        dt,
        horizon,
        active_until: (0..sc.num_classes())
            .map(|c| {
                pol.class(c)
                    .iter()
                    .rposition(|&m| m > 0.0)
                    .map_or(0.0, |k| (k + 1) as f64 * dt)
            })
            .collect(),
        expected_beacon: beacon_energy(pol, sc),
    };
    let classes = sc.num_classes();
    let chunks = cfg.trials.div_ceil(CHUNK);
    let parts: Vec<Acc> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut acc = Acc::new(classes, horizon, cfg.track_counts);
            let mut scratch = if cfg.track_counts {
                vec![vec![0u32; horizon]; classes]
            } else {
                vec![Vec::new(); classes]
            };
            for t in i * CHUNK..((i + 1) * CHUNK).min(cfg.trials) {
                prep.trial(cfg, t, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut total = Acc::new(classes, horizon, cfg.track_counts);
    for p in &parts {
        total.absorb(p);
    }

    let n = cfg.trials;
    let freq = total.delivered as f64 / n as f64;
    let freq_ci = if n < 2 {
        f64::INFINITY
    } else {
        Z95 * (freq * (1.0 - freq) / n as f64).sqrt()
    };
    let energy = if cfg.record_energy {
        Estimate::from_sums(total.energy, total.energy_sq, n)
    } else {
        Estimate {
            mean: f64::NAN,
            ci95: f64::NAN,
        }
    };
    Ok(SimOutcome {
        delivery_freq: freq,
        ci95_halfwidth: freq_ci,
        mean_energy: energy.mean,
        mean_energy_ci: energy.ci95,
        trials: n,
        holding: cfg.track_counts.then(|| {
            total
                .holding
                .iter()
                .map(|v| {
                    v.iter()
                        .map(|&(s, q)| Estimate::from_sums(s, q, n))
                        .collect()
                })
                .collect()
        }),
        transmissions: cfg.track_counts.then(|| {
            total
                .forwards
                .iter()
                .map(|&(s, q)| Estimate::from_sums(s, q, n))
                .collect()
        }),
    })
}

/// Exact expected number of class-`c` relays holding a copy at sub-slot `k`
/// in the simulated process, where a relay accepts at most once: it must not
/// have accepted before the TTL window and must accept inside it.
pub fn exact_holding(c: usize, k: usize, pol: &Policy, sc: &Scenario) -> f64 {
    let a = sc.contacts_per_sub_slot(c);
    let mu = pol.class(c);
    let start = k.saturating_sub(sc.ttl(c));
    let before: f64 = mu[..start].iter().sum();
    let window: f64 = mu[start..=k].iter().sum();
    f64::from(sc.class(c).population) * (-a * before).exp() * -(-a * window).exp_m1()
}

/// Exact expected forwards to class `c` over the horizon.
pub fn exact_transmissions(c: usize, pol: &Policy, sc: &Scenario) -> f64 {
    let mass: f64 = pol.class(c).iter().sum();
    f64::from(sc.class(c).population) * -(-sc.contacts_per_sub_slot(c) * mass).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Largest acceptable |empirical - analytic| delivery probability.
    pub delivery_abs: f64,
    /// Energy must lie within this many 95% half-widths.
    pub energy_ci_multiple: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            delivery_abs: 0.02,
            energy_ci_multiple: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub analytic_delivery: f64,
    pub analytic_energy: f64,
    pub empirical: SimOutcome,
    pub delivery_gap: f64,
    pub energy_gap: f64,
    pub tolerances: Tolerances,
    /// Delivery gap exceeds both the tolerance and the sampling noise.
    pub delivery_flag: bool,
    pub energy_flag: bool,
}

impl Validation {
    pub fn flagged(&self) -> bool {
        self.delivery_flag || self.energy_flag
    }
}

pub fn validate(sc: &Scenario, pol: &Policy, cfg: &SimConfig) -> Result<Validation, PolicyError> {
    validate_with(sc, pol, cfg, Tolerances::default())
}

pub fn validate_with(
    sc: &Scenario,
    pol: &Policy,
    cfg: &SimConfig,
    tol: Tolerances,
) -> Result<Validation, PolicyError> {
    let cfg = SimConfig {
        record_energy: true,
        ..*cfg
    };
    let sim = simulate(sc, pol, &cfg)?;
    let analytic_delivery = delivery_probability(pol, pol.len(), sc);
    let analytic_energy = energy_spent(pol, sc);
    let delivery_gap = sim.delivery_freq - analytic_delivery;
    let energy_gap = sim.mean_energy - analytic_energy;
    let delivery_flag =
        delivery_gap.abs() > tol.delivery_abs && delivery_gap.abs() > 3.0 * sim.ci95_halfwidth;
    let energy_flag = energy_gap.abs() > tol.energy_ci_multiple * sim.mean_energy_ci;
    Ok(Validation {
        analytic_delivery,
        analytic_energy,
        empirical: sim,
        delivery_gap,
        energy_gap,
        tolerances: tol,
        delivery_flag,
        energy_flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeClass, ThresholdPolicy};

    fn one_node(ld: f64, slots: usize) -> Scenario {
        Scenario::builder()
            .deadline(slots as f64)
            .slot_len(1.0)
            .budget(1.0)
            .technology("t", 0.0)
            .class(NodeClass::with_rate(1, slots as u32, ld, 1.0, "t"))
            .build()
            .unwrap()
    }

    #[test]
    fn silent_policy_never_delivers() {
        let sc = one_node(0.1, 2);
        let out = validate(&sc, &Policy::zeros(1, 2), &SimConfig::new(1000, 1)).unwrap();
        assert_eq!(out.empirical.delivery_freq, 0.0);
        assert_eq!(out.empirical.mean_energy, 0.0);
        assert_eq!(out.delivery_gap, 0.0);
        assert_eq!(out.energy_gap, 0.0);
        assert!(!out.flagged());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let sc = one_node(0.3, 4);
        let pol = ThresholdPolicy::new(vec![2.5]).expand(&sc).unwrap();
        let cfg = SimConfig {
            track_counts: true,
            ..SimConfig::new(10_000, 7)
        };
        let a = simulate(&sc, &pol, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| simulate(&sc, &pol, &cfg).unwrap());
        assert_eq!(a.delivery_freq.to_bits(), b.delivery_freq.to_bits());
        assert_eq!(a.mean_energy.to_bits(), b.mean_energy.to_bits());
        assert_eq!(
            a.holding.unwrap()[0][1].mean.to_bits(),
            b.holding.unwrap()[0][1].mean.to_bits()
        );
    }

    #[test]
    fn single_trial_is_not_flagged() {
        let sc = one_node(0.1, 2);
        let out = validate(&sc, &Policy::ones(1, 2), &SimConfig::new(1, 3)).unwrap();
        assert!(out.empirical.ci95_halfwidth.is_infinite());
        assert!(!out.flagged());
    }

    #[test]
    fn wrong_policy_length_is_rejected() {
        let sc = one_node(0.1, 2);
        assert!(simulate(&sc, &Policy::ones(1, 3), &SimConfig::new(10, 0)).is_err());
    }

    #[test]
    fn exact_holding_matches_model_without_ttl() {
        let sc = one_node(0.1, 6);
        let pol = ThresholdPolicy::new(vec![3.5]).expand(&sc).unwrap();
        for k in 0..6 {
            let model = crate::model::expected_holding(0, k, &pol, &sc);
            assert!((exact_holding(0, k, &pol, &sc) - model).abs() < 1e-15);
        }
    }
}
