//! QoE evaluation and demand mapping: factor ranking, collective matrix
//! factorization, per-user QoE profiles and the per-slot QoE loss.

mod cmf;
mod dataset;
mod info_gain;
mod model_io;

pub use cmf::{cmf_fit, cmf_predict, objective, CmfModel, CmfParams, QoeMatrix};
pub use dataset::{
    read_sessions, synth_dataset, write_profiles, write_sessions, SessionRow, SessionTable,
    SyntheticDataset, SynthParams, FACTOR_COLUMNS, SESSION_HEADER,
};
pub use info_gain::{entropy, equal_frequency_bins, information_gain, rank_top_k, Column, FactorTable};
pub use model_io::{read_model, read_profiles, write_model};

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::video::{PlayOutcome, QualityLadder};

pub const PSNR_DEFICIT: &str = "psnr_deficit";
pub const STALL_RATE: &str = "stall_rate";

/// How much a user cares about picture quality versus smooth playback.
/// The two weights always sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QoeProfile {
    pub user_id: usize,
    pub w_quality: f64,
    pub w_stall: f64,
}

impl QoeProfile {
    pub fn new(user_id: usize, w_quality: f64) -> Self {
        let w_quality = w_quality.clamp(0.0, 1.0);
        Self {
            user_id,
            w_quality,
            w_stall: 1.0 - w_quality,
        }
    }

    pub fn balanced(user_id: usize) -> Self {
        Self::new(user_id, 0.5)
    }

    /// Normalizes two non-negative weights; `(0, 0)` maps to balanced.
    pub fn from_weights(user_id: usize, quality: f64, stall: f64) -> Self {
        let (q, s) = (quality.max(0.0), stall.max(0.0));
        if q + s > 0.0 {
            Self {
                user_id,
                w_quality: q / (q + s),
                w_stall: s / (q + s),
            }
        } else {
            Self::balanced(user_id)
        }
    }
}

/// Attribute matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Profile from the completed QoE row of `user`: an OLS fit of predicted
/// QoE on the services' PSNR deficit and stall rate. Negated slopes,
/// clamped at zero and normalized, become the quality and stall weights.
///
/// Returns the balanced profile (with a warning) when the regression is
/// rank deficient.
pub fn derive_profile(model: &CmfModel, user: usize, xs: &FeatureMatrix) -> Result<QoeProfile> {
    let di = xs
        .column_index(PSNR_DEFICIT)
        .ok_or_else(|| Error::InvalidInput(format!("service features lack `{PSNR_DEFICIT}`")))?;
    let si = xs
        .column_index(STALL_RATE)
        .ok_or_else(|| Error::InvalidInput(format!("service features lack `{STALL_RATE}`")))?;
    if xs.values.nrows() != model.n_services() {
        return Err(Error::InvalidInput("service feature rows differ from model".into()));
    }

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for s in 0..model.n_services() {
        let y = cmf_predict(model, user, s)?;
        let x = Vector3::new(1.0, xs.values[(s, di)], xs.values[(s, si)]);
        xtx += x * x.transpose();
        xty += x * y;
    }
    // Relative conditioning guard on the normal equations.
    let scale = xtx.abs().max().max(f64::MIN_POSITIVE);
    let Some(inv) = (xtx / scale).try_inverse().filter(|_| (xtx / scale).determinant().abs() > 1e-12) else {
        log::warn!("rank-deficient profile regression for user {user}; using balanced weights");
        return Ok(QoeProfile::balanced(user));
    };
    let coef = inv * xty / scale;
    // Round-off on a flat QoE row must not pick a winner.
    let slope = |c: f64| if c.abs() < 1e-9 { 0.0 } else { -c };
    Ok(QoeProfile::from_weights(user, slope(coef[1]), slope(coef[2])))
}

/// Per-slot QoE loss in `[0, 1]`.
///
/// Playing level `l` costs the quality weight times the normalized PSNR
/// gap to the top level; a stall costs the full unit; slots before
/// playback starts (and after the video ends) cost nothing.
pub fn qoe_loss(profile: &QoeProfile, outcome: PlayOutcome, ladder: &QualityLadder) -> f64 {
    match outcome {
        PlayOutcome::Played(l) => profile.w_quality * psnr_deficit(ladder, l),
        PlayOutcome::Stall => profile.w_quality + profile.w_stall,
        PlayOutcome::NotJoined | PlayOutcome::Joined | PlayOutcome::Ended => 0.0,
    }
}

/// `(psnr(top) - psnr(l)) / (psnr(top) - psnr(1))`, zero for one-level ladders.
pub fn psnr_deficit(ladder: &QualityLadder, level: usize) -> f64 {
    let top = ladder.psnr(ladder.top());
    let span = top - ladder.psnr(1);
    if span > 0.0 {
        (top - ladder.psnr(level)) / span
    } else {
        0.0
    }
}
