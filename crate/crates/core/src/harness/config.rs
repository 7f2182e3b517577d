//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key must be known;
//! unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{dbm_to_watts, ChannelConfig};
use crate::error::{Error, Result};
use crate::noma::NomaConfig;
use crate::qoe::{CmfParams, QoeProfile, SynthParams};
use crate::scheduler::{Mode, SchedulerConfig};
use crate::video::{QualityLadder, QualityLevel};

#[derive(Debug, Clone, PartialEq)]
pub struct VideoConfig {
    pub ladder: QualityLadder,
    pub slot_s: f64,
    pub startup_threshold_s: f64,
    pub length_s: f64,
}

impl Default for VideoConfig {
    fn default() -> Self {
        Self {
            ladder: QualityLadder::default(),
            slot_s: 1.0,
            startup_threshold_s: 2.0,
            length_s: 600.0,
        }
    }
}

/// Where per-user QoE profiles come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    /// `(w_quality, w_stall)` per user, in user order. Users beyond the
    /// list get balanced weights.
    Inline(Vec<(f64, f64)>),
    /// Profile section of a fitted model dump.
    Model(PathBuf),
}

impl Default for ProfileSource {
    fn default() -> Self {
        ProfileSource::Inline(vec![(0.8, 0.2), (0.6, 0.4), (0.4, 0.6), (0.2, 0.8)])
    }
}

impl ProfileSource {
    pub fn resolve(&self, n_users: usize) -> Result<Vec<QoeProfile>> {
        let mut profiles: Vec<QoeProfile> = (0..n_users).map(QoeProfile::balanced).collect();
        match self {
            ProfileSource::Inline(weights) => {
                for (u, &(q, s)) in weights.iter().enumerate().take(n_users) {
                    profiles[u] = QoeProfile::from_weights(u, q, s);
                }
            }
            ProfileSource::Model(path) => {
                for p in crate::qoe::read_profiles(path)? {
                    if p.user_id < n_users {
                        profiles[p.user_id] = QoeProfile::from_weights(p.user_id, p.w_quality, p.w_stall);
                    }
                }
            }
        }
        Ok(profiles)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_users: usize,
    pub horizon_slots: u64,
    pub bandwidth_hz: f64,
    pub seed: u64,
    pub channel: ChannelConfig,
    pub noma: NomaConfig,
    pub video: VideoConfig,
    pub sched: SchedulerConfig,
    pub profiles: ProfileSource,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_users: 4,
            horizon_slots: 600,
            bandwidth_hz: 5e6,
            seed: 1,
            channel: ChannelConfig::default(),
            noma: NomaConfig::default(),
            video: VideoConfig::default(),
            sched: SchedulerConfig::default(),
            profiles: ProfileSource::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.noma.validate()?;
        self.sched.validate()?;
        if self.n_users == 0 {
            return Err(Error::Config("sim.n_users must be at least 1".into()));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::Config("sim.bandwidth_hz must be positive".into()));
        }
        let v = &self.video;
        if !(v.slot_s > 0.0) || !(v.startup_threshold_s >= 0.0) || !(v.length_s >= 0.0) {
            return Err(Error::Config(
                "video.slot_s must be positive; startup threshold and length non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub seeds: usize,
    pub omega_grid: Vec<f64>,
    pub bandwidth_grid_hz: Vec<f64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            seeds: 30,
            omega_grid: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            bandwidth_grid_hz: vec![2.5e6, 5e6, 10e6, 20e6],
        }
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub sim: SimConfig,
    pub sweep: SweepSettings,
    pub data: SynthParams,
    pub cmf: CmfParams,
    pub top_k: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            sweep: SweepSettings::default(),
            data: SynthParams::default(),
            cmf: CmfParams::default(),
            top_k: 3,
        }
    }
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().to_string();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn pairs(key: &str, v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("`{key}`: expected `a:b` pairs, got `{p}`")))?;
            Ok((num(key, a.trim())?, num(key, b.trim())?))
        })
        .collect()
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s = Settings::default();
        for (key, v) in parse_kv(text)? {
            let k = key.as_str();
            let sim = &mut s.sim;
            match k {
                "sim.n_users" => sim.n_users = num(k, &v)?,
                "sim.horizon_slots" => sim.horizon_slots = num(k, &v)?,
                "sim.bandwidth_hz" => sim.bandwidth_hz = num(k, &v)?,
                "sim.seed" => sim.seed = num(k, &v)?,
                "cell.radius_m" => sim.channel.geometry.radius_m = num(k, &v)?,
                "cell.min_distance_m" => sim.channel.geometry.min_distance_m = num(k, &v)?,
                "channel.pl0_db" => sim.channel.path_loss.pl0_db = num(k, &v)?,
                "channel.eta" => sim.channel.path_loss.eta = num(k, &v)?,
                "noise.psd_dbm_hz" => sim.channel.noise.psd_dbm_hz = num(k, &v)?,
                "noise.nf_db" => sim.channel.noise.noise_figure_db = num(k, &v)?,
                "mobility.speed_mps" => sim.channel.speed_mps = num(k, &v)?,
                "noma.total_power_dbm" => sim.noma.total_power_w = dbm_to_watts(num(k, &v)?),
                "noma.max_cluster_size" => sim.noma.max_cluster_size = num(k, &v)?,
                "noma.power_grid_step" => sim.noma.power_grid_step = num(k, &v)?,
                "noma.stale_csi" => sim.noma.stale_csi = boolean(k, &v)?,
                "video.ladder" => {
                    let levels = pairs(k, &v)?
                        .into_iter()
                        .map(|(bitrate_bps, psnr_db)| QualityLevel { bitrate_bps, psnr_db })
                        .collect();
                    sim.video.ladder = QualityLadder::new(levels)?;
                }
                "video.slot_s" => sim.video.slot_s = num(k, &v)?,
                "video.startup_threshold_s" => sim.video.startup_threshold_s = num(k, &v)?,
                "video.length_s" => sim.video.length_s = num(k, &v)?,
                "sched.mode" => sim.sched.mode = v.parse::<Mode>()?,
                "sched.omega" => sim.sched.omega = num(k, &v)?,
                "sched.decision_space_limit" => sim.sched.decision_space_limit = num(k, &v)?,
                "qoe.profiles" => sim.profiles = ProfileSource::Inline(pairs(k, &v)?),
                "qoe.model" => sim.profiles = ProfileSource::Model(base_dir.join(&v)),
                "qoe.top_k" => s.top_k = num(k, &v)?,
                "sweep.seeds" => s.sweep.seeds = num(k, &v)?,
                "sweep.omega_grid" => s.sweep.omega_grid = list(k, &v)?,
                "sweep.bandwidth_grid_hz" => s.sweep.bandwidth_grid_hz = list(k, &v)?,
                "data.n_users" => s.data.n_users = num(k, &v)?,
                "data.n_services" => s.data.n_services = num(k, &v)?,
                "data.noise_sigma" => s.data.noise_sigma = num(k, &v)?,
                "data.observe_rate" => s.data.observe_rate = num(k, &v)?,
                "cmf.rank" => s.cmf.rank = num(k, &v)?,
                "cmf.beta_y" => s.cmf.beta_y = num(k, &v)?,
                "cmf.beta_u" => s.cmf.beta_u = num(k, &v)?,
                "cmf.beta_s" => s.cmf.beta_s = num(k, &v)?,
                "cmf.lambda" => s.cmf.lambda = num(k, &v)?,
                "cmf.max_iter" => s.cmf.max_iter = num(k, &v)?,
                "cmf.seed" => s.cmf.seed = num(k, &v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        s.sim.validate()?;
        if s.sweep.seeds == 0 || s.sweep.omega_grid.is_empty() || s.sweep.bandwidth_grid_hz.is_empty() {
            return Err(Error::Config("sweep grids and seed count must be non-empty".into()));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_section() {
        let text = "
            # comment
            sim.n_users = 3
            sim.bandwidth_hz = 2.5e6
            cell.radius_m = 300   # trailing comment
            noma.total_power_dbm = 30
            noma.stale_csi = true
            video.ladder = 1e6:30, 2e6:35
            sched.mode = baseline
            sched.omega = 2.5
            qoe.profiles = 0.9:0.1, 0.2:0.8
            sweep.omega_grid = 0, 1, 2
            cmf.rank = 2
        ";
        let s = Settings::from_text(text, Path::new(".")).unwrap();
        assert_eq!(s.sim.n_users, 3);
        assert_eq!(s.sim.bandwidth_hz, 2.5e6);
        assert_eq!(s.sim.channel.geometry.radius_m, 300.0);
        assert!((s.sim.noma.total_power_w - 1.0).abs() < 1e-12);
        assert!(s.sim.noma.stale_csi);
        assert_eq!(s.sim.video.ladder.len(), 2);
        assert_eq!(s.sim.sched.mode, Mode::Baseline);
        assert_eq!(s.sweep.omega_grid, vec![0.0, 1.0, 2.0]);
        assert_eq!(s.cmf.rank, 2);
        let p = s.sim.profiles.resolve(3).unwrap();
        assert_eq!(p[0].w_quality, 0.9);
        assert_eq!(p[2], QoeProfile::balanced(2));
    }

    #[test]
    fn default_power_is_twenty_dbm() {
        assert!((SimConfig::default().noma.total_power_w - 0.1).abs() < 1e-15);
    }

    #[test]
    fn config_errors() {
        for bad in [
            "bogus.key = 1",
            "sim.n_users",
            "sim.n_users = four",
            "sim.n_users = 1\nsim.n_users = 2",
            "cell.min_distance_m = 600",
            "sched.omega = -1",
            "noma.max_cluster_size = 4",
            "video.ladder = 2e6:30, 1e6:35",
        ] {
            let err = Settings::from_text(bad, Path::new(".")).unwrap_err();
            assert!(err.is_config_error(), "{bad}: {err}");
        }
    }
}
