//! Synthetic session streams with fraud rings, background fraud and
//! delayed adjudication.
//!
//! Benign traffic: each account has a home device and a home IP and mostly
//! sticks to them; the IP pool is smaller than the account pool, so
//! households share addresses. Background fraud is an independent per-session
//! coin flip on a victim's usual IP; most such sessions come from a pool of
//! fraudster devices that stays in use across the whole horizon, so a device
//! seen in an adjudicated fraud tends to show up again later.
//!
//! Rings: a ring takes over a fixed set of victim accounts and operates from
//! its own small pool of devices and IPs. It strikes in several waves; each
//! wave is a short burst, and later waves reuse the same devices, IPs and
//! victims, so by the time a wave starts some of the earlier one has been
//! adjudicated.
//!
//! Features: benign rows are standard normal; fraud rows are shifted by
//! `feature_signal_strength * signal_scale` along one random unit direction.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::Session;

const DAY: f64 = 86_400.0;
const HOUR: f64 = 3_600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub n_sessions: usize,
    pub horizon_days: f64,
    pub d: usize,
    pub base_fraud_rate: f64,
    pub n_accounts: usize,
    pub n_devices: usize,
    pub n_ips: usize,
    /// Probability that a benign session uses a random device instead of the home one.
    pub device_switch_prob: f64,
    /// Probability that a benign session uses a random IP instead of the home one.
    pub ip_switch_prob: f64,
    pub ring_count: usize,
    pub ring_size_accounts: usize,
    pub ring_shared_devices: usize,
    pub ring_shared_ips: usize,
    pub ring_burst_hours: f64,
    pub ring_waves: usize,
    pub ring_wave_gap_days: [f64; 2],
    /// Mean ring sessions per victim account, summed over all waves.
    pub ring_sessions_per_account: f64,
    /// Devices shared by background fraudsters over the whole horizon.
    pub fraud_device_pool: usize,
    /// Probability that a background fraud session uses a fraudster device.
    pub fraud_device_prob: f64,
    pub feature_signal_strength: f64,
    pub signal_scale: f64,
    pub adjudication_delay_days: [f64; 2],
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_sessions: 200_000,
            horizon_days: 30.0,
            d: 16,
            base_fraud_rate: 0.02,
            n_accounts: 20_000,
            n_devices: 24_000,
            n_ips: 12_000,
            device_switch_prob: 0.1,
            ip_switch_prob: 0.2,
            ring_count: 40,
            ring_size_accounts: 25,
            ring_shared_devices: 3,
            ring_shared_ips: 2,
            ring_burst_hours: 48.0,
            ring_waves: 4,
            ring_wave_gap_days: [2.0, 6.0],
            ring_sessions_per_account: 3.0,
            fraud_device_pool: 200,
            fraud_device_prob: 0.8,
            feature_signal_strength: 0.3,
            signal_scale: 2.6,
            adjudication_delay_days: [1.0, 14.0],
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("generator: {m}")));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.n_sessions == 0 || self.d == 0 {
            return fail("n_sessions and d must be positive".into());
        }
        if !(self.horizon_days > 0.0 && self.horizon_days.is_finite()) {
            return fail("horizon_days must be positive".into());
        }
        for (name, p) in [
            ("base_fraud_rate", self.base_fraud_rate),
            ("device_switch_prob", self.device_switch_prob),
            ("ip_switch_prob", self.ip_switch_prob),
            ("fraud_device_prob", self.fraud_device_prob),
            ("feature_signal_strength", self.feature_signal_strength),
        ] {
            if !unit(p) {
                return fail(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if self.n_accounts == 0 || self.n_devices == 0 || self.n_ips == 0 {
            return fail("identifier pools must be non-empty".into());
        }
        if !(self.signal_scale >= 0.0 && self.signal_scale.is_finite()) {
            return fail("signal_scale must be finite and non-negative".into());
        }
        let [lo, hi] = self.adjudication_delay_days;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return fail(format!("adjudication delay range [{lo}, {hi}] invalid"));
        }
        if self.ring_count > 0 {
            if self.ring_size_accounts == 0 || self.ring_shared_devices == 0 || self.ring_shared_ips == 0 {
                return fail("ring shape must be positive".into());
            }
            if self.ring_size_accounts > self.n_accounts {
                return fail(format!(
                    "ring of {} accounts exceeds the account pool of {}",
                    self.ring_size_accounts, self.n_accounts
                ));
            }
            if self.ring_waves == 0 {
                return fail("ring_waves must be positive".into());
            }
            if !(self.ring_burst_hours > 0.0 && self.ring_burst_hours / 24.0 <= self.horizon_days) {
                return fail("ring burst must be positive and no longer than the horizon".into());
            }
            let [g0, g1] = self.ring_wave_gap_days;
            if !(g0 >= 0.0 && g0 <= g1 && g1.is_finite()) {
                return fail(format!("wave gap range [{g0}, {g1}] invalid"));
            }
            if self.ring_sessions_per_account.is_nan() || self.ring_sessions_per_account <= 0.0 {
                return fail("ring_sessions_per_account must be positive".into());
            }
            if self.ring_sessions_total() > self.n_sessions {
                return fail(format!(
                    "{} ring sessions exceed n_sessions = {}",
                    self.ring_sessions_total(),
                    self.n_sessions
                ));
            }
        }
        Ok(())
    }

    fn ring_sessions_per_ring(&self) -> usize {
        (self.ring_size_accounts as f64 * self.ring_sessions_per_account).round().max(1.0) as usize
    }

    pub fn ring_sessions_total(&self) -> usize {
        if self.ring_count == 0 {
            0
        } else {
            self.ring_count * self.ring_sessions_per_ring()
        }
    }

    /// Per-session fraud probability for non-ring traffic, chosen so that the
    /// overall prevalence matches `base_fraud_rate` when rings leave room.
    pub fn background_fraud_rate(&self) -> f64 {
        let n = self.n_sessions as f64;
        let ring = self.ring_sessions_total() as f64;
        if ring >= n {
            return 0.0;
        }
        ((self.base_fraud_rate * n - ring) / (n - ring)).clamp(0.0, 1.0)
    }
}

struct Gen {
    rng: ChaCha8Rng,
    direction: Vec<f64>,
    shift: f64,
    delay: [f64; 2],
}

impl Gen {
    fn features(&mut self, fraud: bool) -> Vec<f64> {
        let shift = if fraud { self.shift } else { 0.0 };
        self.direction
            .clone()
            .into_iter()
            .map(|u| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z + shift * u
            })
            .collect()
    }

    fn session(&mut self, account: String, device: String, ip: String, t: i64, fraud: bool) -> Session {
        let x = self.features(fraud);
        let [lo, hi] = self.delay;
        let delay = (self.rng.random_range(lo..=hi) * DAY).round() as i64;
        Session {
            account_id: account,
            device_id: device,
            ip_address: ip,
            t,
            x,
            y: u8::from(fraud),
            tau: t + delay,
        }
    }
}

fn account_name(i: usize) -> String {
    format!("acct-{i:06}")
}

/// Generates a time-sorted labeled stream; deterministic in `cfg.seed`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Vec<Session>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut direction: Vec<f64> = (0..cfg.d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    direction.iter_mut().for_each(|v| *v /= norm);

    // Home identifiers: devices are mostly personal, IPs are shared by households.
    let home_device: Vec<usize> = (0..cfg.n_accounts).map(|i| i % cfg.n_devices).collect();
    let home_ip: Vec<usize> = (0..cfg.n_accounts).map(|_| rng.random_range(0..cfg.n_ips)).collect();

    let mut g = Gen {
        rng,
        direction,
        shift: cfg.feature_signal_strength * cfg.signal_scale,
        delay: cfg.adjudication_delay_days,
    };
    let horizon = cfg.horizon_days * DAY;
    let t_max = (horizon.ceil() as i64 - 1).max(0);
    let mut out = Vec::with_capacity(cfg.n_sessions);

    if cfg.ring_count > 0 {
        let per_ring = cfg.ring_sessions_per_ring();
        let burst = cfg.ring_burst_hours * HOUR;
        let [gap_lo, gap_hi] = cfg.ring_wave_gap_days;
        for r in 0..cfg.ring_count {
            let victims = index::sample(&mut g.rng, cfg.n_accounts, cfg.ring_size_accounts).into_vec();
            let mut offsets = vec![0.0];
            for _ in 1..cfg.ring_waves {
                let gap = g.rng.random_range(gap_lo..=gap_hi) * DAY;
                offsets.push(offsets.last().copied().unwrap_or(0.0) + gap);
            }
            // The campaign may have begun before the observed horizon; only
            // waves that fit inside it are emitted, which keeps ring activity
            // evenly spread over time.
            let latest = (horizon - burst).max(0.0);
            let first = g.rng.random_range(-offsets[offsets.len() - 1]..=latest);
            let mut starts: Vec<f64> = offsets
                .iter()
                .map(|o| first + o)
                .filter(|s| (0.0..=latest).contains(s))
                .collect();
            if starts.is_empty() {
                starts.push(first.clamp(0.0, latest));
            }
            let waves = starts.len();
            for (w, start) in starts.into_iter().enumerate() {
                let count = per_ring / waves + usize::from(w < per_ring % waves);
                for _ in 0..count {
                    let account = account_name(victims[g.rng.random_range(0..victims.len())]);
                    let device = format!("ring{r:03}-dev{}", g.rng.random_range(0..cfg.ring_shared_devices));
                    let ip = format!("ring{r:03}-ip{}", g.rng.random_range(0..cfg.ring_shared_ips));
                    let t = ((start + g.rng.random_range(0.0..burst)) as i64).min(t_max);
                    out.push(g.session(account, device, ip, t, true));
                }
            }
        }
    }

    let background = cfg.background_fraud_rate();
    while out.len() < cfg.n_sessions {
        let a = g.rng.random_range(0..cfg.n_accounts);
        let device = if g.rng.random_bool(cfg.device_switch_prob) {
            g.rng.random_range(0..cfg.n_devices)
        } else {
            home_device[a]
        };
        let ip = if g.rng.random_bool(cfg.ip_switch_prob) {
            g.rng.random_range(0..cfg.n_ips)
        } else {
            home_ip[a]
        };
        let t = (g.rng.random_range(0.0..horizon) as i64).min(t_max);
        let fraud = g.rng.random_bool(background);
        let device = if fraud && cfg.fraud_device_pool > 0 && g.rng.random_bool(cfg.fraud_device_prob) {
            format!("fraud-dev{:04}", g.rng.random_range(0..cfg.fraud_device_pool))
        } else {
            format!("dev-{device:06}")
        };
        out.push(g.session(account_name(a), device, format!("ip-{ip:06}"), t, fraud));
    }
    out.sort_by_key(|s| s.t);
    Ok(out)
}
