//! Network instances: geometry, large-scale pathloss and Rayleigh small-scale
//! fading for an IRS-aided wireless powered network.
//!
//! All power quantities are configured in dBm and converted to watts on
//! access. Channels are generated from a ChaCha stream per link group: stream
//! 0 carries the HAP-IRS channel and stream `1 + k` carries device `k`'s
//! position, direct channel and IRS-device channel, in that order. Changing
//! the number of devices or elements therefore never perturbs the draws of
//! unrelated links.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A per-device scalar that may be given once for every device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDevice {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerDevice {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            PerDevice::Uniform(x) => *x,
            PerDevice::Each(v) => v[k],
        }
    }

    pub fn values(&self, num_devices: usize) -> Vec<f64> {
        (0..num_devices).map(|k| self.get(k)).collect()
    }

    fn check_len(&self, name: &str, num_devices: usize) -> Result<()> {
        match self {
            PerDevice::Each(v) if v.len() != num_devices => Err(Error::InvalidConfig(format!(
                "{name} has {} entries for {num_devices} devices",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

fn default_weights() -> PerDevice {
    PerDevice::Uniform(1.0)
}

/// System constants and geometry. Mirrors the on-disk TOML layout exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_elements: usize,
    pub num_devices: usize,
    pub hap_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Frame length in seconds.
    pub total_time: f64,
    pub efficiencies: PerDevice,
    #[serde(default = "default_weights")]
    pub weights: PerDevice,
    pub hap_pos: [f64; 3],
    pub irs_pos: [f64; 3],
    pub device_center: [f64; 3],
    pub device_radius: f64,
    /// Explicit device coordinates; overrides the disk when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_positions: Option<Vec<[f64; 3]>>,
    pub pathloss_exp_hap_irs: f64,
    pub pathloss_exp_irs_device: f64,
    pub pathloss_exp_hap_device: f64,
    pub ref_loss_db: f64,
    pub seed: u64,
}

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SystemConfig {
    /// Reduced setting used by the property suite: N = 16, K = 4.
    pub fn desk() -> Self {
        Self {
            num_elements: 16,
            num_devices: 4,
            ..Self::paper()
        }
    }

    /// Full simulation setting: N = 50, K = 10, 40 dBm at the HAP.
    pub fn paper() -> Self {
        Self {
            num_elements: 50,
            num_devices: 10,
            hap_power_dbm: 40.0,
            noise_power_dbm: -80.0,
            total_time: 1.0,
            efficiencies: PerDevice::Uniform(0.8),
            weights: PerDevice::Uniform(1.0),
            hap_pos: [0.0, 0.0, 0.0],
            irs_pos: [10.0, 0.0, 4.0],
            device_center: [10.0, 0.0, 0.0],
            device_radius: 1.5,
            device_positions: None,
            pathloss_exp_hap_irs: 2.2,
            pathloss_exp_irs_device: 2.2,
            pathloss_exp_hap_device: 3.4,
            ref_loss_db: 30.0,
            seed: 1,
        }
    }

    pub fn hap_power_w(&self) -> f64 {
        dbm_to_watts(self.hap_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm)
    }

    pub fn efficiency(&self, k: usize) -> f64 {
        self.efficiencies.get(k)
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights.get(k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_elements == 0 {
            return bad("num_elements must be at least 1".into());
        }
        if self.num_devices == 0 {
            return bad("num_devices must be at least 1".into());
        }
        if !self.hap_power_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return bad("power levels must be finite".into());
        }
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return bad(format!("total_time {} must be positive", self.total_time));
        }
        self.efficiencies.check_len("efficiencies", self.num_devices)?;
        self.weights.check_len("weights", self.num_devices)?;
        for k in 0..self.num_devices {
            let eta = self.efficiency(k);
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("efficiency {eta} of device {k} outside (0, 1]"));
            }
            let w = self.weight(k);
            if !(w >= 0.0) || !w.is_finite() {
                return bad(format!("weight {w} of device {k} must be nonnegative"));
            }
        }
        if !(self.device_radius >= 0.0) {
            return bad("device_radius must be nonnegative".into());
        }
        for (name, e) in [
            ("pathloss_exp_hap_irs", self.pathloss_exp_hap_irs),
            ("pathloss_exp_irs_device", self.pathloss_exp_irs_device),
            ("pathloss_exp_hap_device", self.pathloss_exp_hap_device),
        ] {
            if !(e > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if let Some(pos) = &self.device_positions {
            if pos.len() != self.num_devices {
                return bad(format!(
                    "device_positions has {} entries for {} devices",
                    pos.len(),
                    self.num_devices
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Linear power gain of a link: `10^(-ref_loss_db/10) * distance^(-exponent)`.
pub fn pathloss(distance: f64, exponent: f64, ref_loss_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::InvalidGeometry { distance });
    }
    Ok(10f64.powf(-ref_loss_db / 10.0) * distance.powf(-exponent))
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Immutable problem instance.
///
/// `cascaded[k]` holds the entries of the row vector `q_k^H = h_{r,k}^H diag(g)`,
/// so the reflected contribution for phases `v` is `sum_n cascaded[k][n] * v[n]`.
/// `direct[k]` is the scalar direct-link coefficient added to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub device_positions: Vec<[f64; 3]>,
    /// HAP to IRS channel, one entry per element.
    pub g: Vec<Complex64>,
    /// IRS to device channels.
    pub h_r: Vec<Vec<Complex64>>,
    /// HAP to device channels.
    pub direct: Vec<Complex64>,
    pub cascaded: Vec<Vec<Complex64>>,
}

fn cn01<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn link_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a Rayleigh-faded instance from `config`. Deterministic in `config.seed`.
pub fn generate_scenario(config: &SystemConfig) -> Result<Scenario> {
    config.validate()?;
    let n = config.num_elements;
    let k_total = config.num_devices;

    let d_hi = distance(&config.hap_pos, &config.irs_pos);
    let pl_hi = pathloss(d_hi, config.pathloss_exp_hap_irs, config.ref_loss_db)?;
    let mut rng = link_rng(config.seed, 0);
    let amp_hi = pl_hi.sqrt();
    let g: Vec<Complex64> = (0..n).map(|_| cn01(&mut rng) * amp_hi).collect();

    let mut positions = Vec::with_capacity(k_total);
    let mut h_r = Vec::with_capacity(k_total);
    let mut direct = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut rng = link_rng(config.seed, 1 + k as u64);
        let u: f64 = rng.random();
        let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let pos = match &config.device_positions {
            Some(p) => p[k],
            None => {
                let r = config.device_radius * u.sqrt();
                let c = config.device_center;
                [c[0] + r * phi.cos(), c[1] + r * phi.sin(), c[2]]
            }
        };
        let pl_hd = pathloss(
            distance(&config.hap_pos, &pos),
            config.pathloss_exp_hap_device,
            config.ref_loss_db,
        )?;
        let pl_id = pathloss(
            distance(&config.irs_pos, &pos),
            config.pathloss_exp_irs_device,
            config.ref_loss_db,
        )?;
        direct.push(cn01(&mut rng) * pl_hd.sqrt());
        let amp = pl_id.sqrt();
        h_r.push((0..n).map(|_| cn01(&mut rng) * amp).collect());
        positions.push(pos);
    }
    Scenario::from_channels(config.clone(), positions, g, h_r, direct)
}

impl Scenario {
    /// Builds a scenario from explicit channels, deriving the cascaded rows.
    pub fn from_channels(
        config: SystemConfig,
        device_positions: Vec<[f64; 3]>,
        g: Vec<Complex64>,
        h_r: Vec<Vec<Complex64>>,
        direct: Vec<Complex64>,
    ) -> Result<Self> {
        config.validate()?;
        let n = config.num_elements;
        let k_total = config.num_devices;
        let check = |expected: usize, found: usize| {
            if expected != found {
                Err(Error::DimensionMismatch { expected, found })
            } else {
                Ok(())
            }
        };
        check(n, g.len())?;
        check(k_total, h_r.len())?;
        check(k_total, direct.len())?;
        check(k_total, device_positions.len())?;
        for h in &h_r {
            check(n, h.len())?;
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !g.iter().chain(h_r.iter().flatten()).chain(direct.iter()).all(finite) {
            return Err(Error::InvalidConfig("channel entries must be finite".into()));
        }
        let cascaded = h_r
            .iter()
            .map(|h| h.iter().zip(&g).map(|(hr, gn)| hr.conj() * gn).collect())
            .collect();
        Ok(Self {
            config,
            device_positions,
            g,
            h_r,
            direct,
            cascaded,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.config.num_elements
    }

    pub fn num_devices(&self) -> usize {
        self.config.num_devices
    }

    /// Entries of `q̄_k^H = [q_k^H, h_{d,k}]`.
    pub fn augmented_row(&self, k: usize) -> Vec<Complex64> {
        let mut row = self.cascaded[k].clone();
        row.push(self.direct[k]);
        row
    }

    /// Copy of this instance with every reflected path removed.
    pub fn without_irs(&self) -> Scenario {
        let n = self.num_elements();
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Scenario {
            config: self.config.clone(),
            device_positions: self.device_positions.clone(),
            g: zero.clone(),
            h_r: self.h_r.clone(),
            direct: self.direct.clone(),
            cascaded: vec![zero; self.num_devices()],
        }
    }

    /// Copy with device `k`'s direct and reflected channels scaled by `factor`.
    pub fn with_device_scaled(&self, k: usize, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.direct[k] *= factor;
        for c in &mut s.h_r[k] {
            *c *= factor;
        }
        for c in &mut s.cascaded[k] {
            *c *= factor;
        }
        s
    }
}
