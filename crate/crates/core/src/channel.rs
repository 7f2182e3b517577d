//! Per-slot wireless channel states: random-waypoint mobility inside the
//! cell, log-distance path loss, Rayleigh block fading and thermal noise.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, Stream};

/// Annulus around the base station (at the origin) that users live in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub radius_m: f64,
    pub min_distance_m: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self {
            radius_m: 500.0,
            min_distance_m: 10.0,
        }
    }
}

impl CellGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > self.min_distance_m && self.min_distance_m > 0.0) {
            return Err(Error::Config(format!(
                "cell geometry requires radius_m > min_distance_m > 0 (got {} / {})",
                self.radius_m, self.min_distance_m
            )));
        }
        Ok(())
    }

    /// Uniform point (by area) in the annulus.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let r0 = self.min_distance_m * self.min_distance_m;
        let r1 = self.radius_m * self.radius_m;
        let r = (r0 + rng.random::<f64>() * (r1 - r0)).sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        (r * theta.cos(), r * theta.sin())
    }

    /// Radially projects a point back into the annulus.
    pub fn clamp(&self, p: (f64, f64)) -> (f64, f64) {
        let d = p.0.hypot(p.1);
        if d == 0.0 {
            return (self.min_distance_m, 0.0);
        }
        let target = d.clamp(self.min_distance_m, self.radius_m);
        if target == d {
            p
        } else {
            let s = target / d;
            (p.0 * s, p.1 * s)
        }
    }

    pub fn contains(&self, d: f64) -> bool {
        const SLACK: f64 = 1e-9;
        d >= self.min_distance_m * (1.0 - SLACK) && d <= self.radius_m * (1.0 + SLACK)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub user_id: usize,
    pub position: (f64, f64),
    pub waypoint: (f64, f64),
    pub speed_mps: f64,
}

impl UserState {
    pub fn distance_m(&self) -> f64 {
        self.position.0.hypot(self.position.1)
    }

    /// Drops a user at a uniform position with a uniform first waypoint.
    pub fn place<R: Rng + ?Sized>(
        user_id: usize,
        geometry: &CellGeometry,
        speed_mps: f64,
        rng: &mut R,
    ) -> Self {
        let position = geometry.sample_point(rng);
        let waypoint = geometry.sample_point(rng);
        Self {
            user_id,
            position,
            waypoint,
            speed_mps,
        }
    }

    /// One random-waypoint step. Movement left over after reaching the
    /// waypoint is discarded.
    pub fn advance<R: Rng + ?Sized>(&mut self, geometry: &CellGeometry, dt: f64, rng: &mut R) {
        let dx = self.waypoint.0 - self.position.0;
        let dy = self.waypoint.1 - self.position.1;
        let remaining = dx.hypot(dy);
        let step = self.speed_mps.max(0.0) * dt;
        if remaining <= step {
            self.position = self.waypoint;
            self.waypoint = geometry.sample_point(rng);
        } else {
            let s = step / remaining;
            self.position = (self.position.0 + dx * s, self.position.1 + dy * s);
        }
        // Straight legs may cut through the inner exclusion disc.
        self.position = geometry.clamp(self.position);
    }
}

pub fn advance_mobility<R: Rng + ?Sized>(
    users: &mut [UserState],
    geometry: &CellGeometry,
    dt: f64,
    rng: &mut R,
) {
    for user in users.iter_mut() {
        user.advance(geometry, dt, rng);
    }
}

/// Log-distance path loss `PL0 - 10 eta log10(d / d0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub eta: f64,
    pub reference_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            pl0_db: -30.0,
            eta: 3.5,
            reference_m: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn gain_db(&self, distance_m: f64) -> f64 {
        self.pl0_db - 10.0 * self.eta * (distance_m / self.reference_m).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub psd_dbm_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
        }
    }
}

impl NoiseConfig {
    pub fn noise_dbm(&self, bandwidth_hz: f64) -> f64 {
        self.psd_dbm_hz + self.noise_figure_db + 10.0 * bandwidth_hz.log10()
    }

    /// Noise power in watts over `bandwidth_hz`.
    pub fn noise_power(&self, bandwidth_hz: f64) -> f64 {
        dbm_to_watts(self.noise_dbm(bandwidth_hz))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `|h|^2` of a unit-power Rayleigh envelope, i.e. an Exp(1) draw.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub user_id: usize,
    pub slot: u64,
    pub path_loss_lin: f64,
    pub fading_lin: f64,
    pub gain_lin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub geometry: CellGeometry,
    pub path_loss: PathLossModel,
    pub noise: NoiseConfig,
    pub speed_mps: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            geometry: CellGeometry::default(),
            path_loss: PathLossModel::default(),
            noise: NoiseConfig::default(),
            speed_mps: 1.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.noise.psd_dbm_hz < 0.0) {
            return Err(Error::Config("noise.psd_dbm_hz must be negative".into()));
        }
        if !(self.path_loss.eta > 0.0) || !self.path_loss.pl0_db.is_finite() {
            return Err(Error::Config("channel.eta must be positive, channel.pl0_db finite".into()));
        }
        if !(self.speed_mps >= 0.0) {
            return Err(Error::Config("mobility.speed_mps must be non-negative".into()));
        }
        Ok(())
    }

    /// Linear path gain at `distance_m`; distances inside the exclusion
    /// disc are rejected.
    pub fn path_loss(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m >= self.geometry.min_distance_m * (1.0 - 1e-9)) {
            return Err(Error::GeometryViolation {
                distance_m,
                min_distance_m: self.geometry.min_distance_m,
            });
        }
        Ok(db_to_lin(self.path_loss.gain_db(distance_m)))
    }

    /// Channel sample for one user in one slot. The fading draw is keyed
    /// on `(seed, slot, user_id)` only.
    pub fn sample(&self, seed: u64, slot: u64, user: &UserState) -> Result<ChannelSample> {
        let path_loss_lin = self.path_loss(user.distance_m())?;
        let mut rng = keyed_rng(seed, Stream::Fading, slot, user.user_id as u64);
        let fading_lin = sample_fading(&mut rng);
        Ok(ChannelSample {
            user_id: user.user_id,
            slot,
            path_loss_lin,
            fading_lin,
            gain_lin: path_loss_lin * fading_lin,
        })
    }
}
