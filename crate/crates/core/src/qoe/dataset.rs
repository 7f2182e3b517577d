//! Synthetic viewing-session datasets and their delimited-text form.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use super::cmf::QoeMatrix;
use super::info_gain::{Column, FactorTable};
use super::{FeatureMatrix, QoeProfile, PSNR_DEFICIT, STALL_RATE};
use crate::error::{Error, Result};

pub const SESSION_HEADER: [&str; 9] = [
    "user_id",
    "service_id",
    "net_cond",
    "hw_class",
    "context",
    "psnr_deficit",
    "stall_rate",
    "qoe",
    "engagement",
];

/// Confounding-factor columns scored by information gain.
pub const FACTOR_COLUMNS: [&str; 5] = ["net_cond", "hw_class", "context", "psnr_deficit", "stall_rate"];

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub user_id: usize,
    pub service_id: usize,
    pub net_cond: f64,
    pub hw_class: i64,
    pub context: i64,
    pub psnr_deficit: f64,
    pub stall_rate: f64,
    pub qoe: f64,
    /// Usage-time class: 0 short, 1 medium, 2 long.
    pub engagement: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionTable {
    pub rows: Vec<SessionRow>,
}

impl SessionTable {
    pub fn factor_table(&self) -> FactorTable {
        let r = &self.rows;
        FactorTable {
            names: FACTOR_COLUMNS.iter().map(|s| s.to_string()).collect(),
            factors: vec![
                Column::Numeric(r.iter().map(|x| x.net_cond).collect()),
                Column::Categorical(r.iter().map(|x| x.hw_class).collect()),
                Column::Categorical(r.iter().map(|x| x.context).collect()),
                Column::Numeric(r.iter().map(|x| x.psnr_deficit).collect()),
                Column::Numeric(r.iter().map(|x| x.stall_rate).collect()),
            ],
            label: Column::Categorical(r.iter().map(|x| x.engagement).collect()),
        }
    }

    /// QoE matrix plus user attributes (`net_cond, hw_class, context`)
    /// and service attributes (`psnr_deficit, stall_rate`). Ids are dense
    /// from zero; users or services without a session get zero attributes.
    pub fn to_matrices(&self) -> (QoeMatrix, FeatureMatrix, FeatureMatrix) {
        let nu = self.rows.iter().map(|r| r.user_id + 1).max().unwrap_or(0);
        let ns = self.rows.iter().map(|r| r.service_id + 1).max().unwrap_or(0);
        let mut scores = DMatrix::zeros(nu, ns);
        let mut observed = DMatrix::from_element(nu, ns, false);
        let mut xu = DMatrix::zeros(nu, 3);
        let mut xs = DMatrix::zeros(ns, 2);
        for r in &self.rows {
            scores[(r.user_id, r.service_id)] = r.qoe;
            observed[(r.user_id, r.service_id)] = true;
            xu[(r.user_id, 0)] = r.net_cond;
            xu[(r.user_id, 1)] = r.hw_class as f64;
            xu[(r.user_id, 2)] = r.context as f64;
            xs[(r.service_id, 0)] = r.psnr_deficit;
            xs[(r.service_id, 1)] = r.stall_rate;
        }
        (
            QoeMatrix { scores, observed },
            FeatureMatrix {
                names: vec!["net_cond".into(), "hw_class".into(), "context".into()],
                values: xu,
            },
            FeatureMatrix {
                names: vec![PSNR_DEFICIT.into(), STALL_RATE.into()],
                values: xs,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_services: usize,
    pub noise_sigma: f64,
    pub observe_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_services: 50,
            noise_sigma: 0.05,
            observe_rate: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub sessions: SessionTable,
    pub qoe: QoeMatrix,
    pub user_features: FeatureMatrix,
    pub service_features: FeatureMatrix,
    pub truth: Vec<QoeProfile>,
}

pub fn engagement_class(qoe: f64) -> i64 {
    if qoe < 1.0 / 3.0 {
        0
    } else if qoe < 2.0 / 3.0 {
        1
    } else {
        2
    }
}

/// Draws a dataset whose QoE is linear in the service's PSNR deficit and
/// stall rate: `qoe = 1 - w_q * deficit - w_s * stall + noise`, clipped to
/// `[0, 1]`, with per-user weights on the unit simplex.
pub fn synth_dataset<R: Rng + ?Sized>(rng: &mut R, p: &SynthParams) -> Result<SyntheticDataset> {
    if p.n_users < 2 || p.n_services < 2 {
        return Err(Error::InvalidInput("synthetic dataset needs at least 2 users and 2 services".into()));
    }
    if !(0.0..=1.0).contains(&p.observe_rate) || !(p.noise_sigma >= 0.0) {
        return Err(Error::InvalidInput("observe_rate must be in [0, 1] and noise_sigma >= 0".into()));
    }
    let weight = Beta::new(2.0, 2.0).expect("valid beta");
    let noise = Normal::new(0.0, p.noise_sigma).expect("valid normal");

    let truth: Vec<QoeProfile> = (0..p.n_users).map(|u| QoeProfile::new(u, weight.sample(rng))).collect();
    let users: Vec<(f64, i64, i64)> = (0..p.n_users)
        .map(|_| (rng.random::<f64>(), rng.random_range(0..3), rng.random_range(0..4)))
        .collect();
    let services: Vec<(f64, f64)> = (0..p.n_services).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();

    let mut rows = Vec::new();
    let mut scores = DMatrix::zeros(p.n_users, p.n_services);
    let mut observed = DMatrix::from_element(p.n_users, p.n_services, false);
    for (u, prof) in truth.iter().enumerate() {
        for (s, &(deficit, stall)) in services.iter().enumerate() {
            let clean = 1.0 - prof.w_quality * deficit - prof.w_stall * stall;
            let qoe = (clean + noise.sample(rng)).clamp(0.0, 1.0);
            scores[(u, s)] = qoe;
            if rng.random_bool(p.observe_rate) {
                observed[(u, s)] = true;
                let (net_cond, hw_class, context) = users[u];
                rows.push(SessionRow {
                    user_id: u,
                    service_id: s,
                    net_cond,
                    hw_class,
                    context,
                    psnr_deficit: deficit,
                    stall_rate: stall,
                    qoe,
                    engagement: engagement_class(qoe),
                });
            }
        }
    }

    let user_features = FeatureMatrix {
        names: vec!["net_cond".into(), "hw_class".into(), "context".into()],
        values: DMatrix::from_fn(p.n_users, 3, |i, j| match j {
            0 => users[i].0,
            1 => users[i].1 as f64,
            _ => users[i].2 as f64,
        }),
    };
    let service_features = FeatureMatrix {
        names: vec![PSNR_DEFICIT.into(), STALL_RATE.into()],
        values: DMatrix::from_fn(p.n_services, 2, |i, j| if j == 0 { services[i].0 } else { services[i].1 }),
    };
    Ok(SyntheticDataset {
        sessions: SessionTable { rows },
        qoe: QoeMatrix { scores, observed },
        user_features,
        service_features,
        truth,
    })
}

pub fn write_sessions(table: &SessionTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SESSION_HEADER)?;
    for r in &table.rows {
        w.write_record([
            r.user_id.to_string(),
            r.service_id.to_string(),
            r.net_cond.to_string(),
            r.hw_class.to_string(),
            r.context.to_string(),
            r.psnr_deficit.to_string(),
            r.stall_rate.to_string(),
            r.qoe.to_string(),
            r.engagement.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| {
        Error::parse(
            format!("sessions line {line}"),
            format!("bad value `{raw}` in column `{}`", SESSION_HEADER[i]),
        )
    })
}

pub fn read_sessions(path: &Path) -> Result<SessionTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SESSION_HEADER {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected header {}", SESSION_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        rows.push(SessionRow {
            user_id: field(&rec, 0, line)?,
            service_id: field(&rec, 1, line)?,
            net_cond: field(&rec, 2, line)?,
            hw_class: field(&rec, 3, line)?,
            context: field(&rec, 4, line)?,
            psnr_deficit: field(&rec, 5, line)?,
            stall_rate: field(&rec, 6, line)?,
            qoe: field(&rec, 7, line)?,
            engagement: field(&rec, 8, line)?,
        });
    }
    Ok(SessionTable { rows })
}

pub fn write_profiles(profiles: &[QoeProfile], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["user_id", "w_quality", "w_stall"])?;
    for p in profiles {
        w.write_record([p.user_id.to_string(), p.w_quality.to_string(), p.w_stall.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
