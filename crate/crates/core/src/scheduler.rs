//! Per-slot joint decisions over user clustering, power allocation and
//! per-user quality level.
//!
//! The QoE-aware scheduler maximizes the drift-plus-penalty objective
//! `sum_u q_u * p_u - omega * sum_u Q_u`, where `q_u` is the transmitter
//! backlog in seconds, `p_u` the predicted playable seconds delivered this
//! slot and `Q_u` the predicted QoE loss. The baseline maximizes the sum of
//! achievable rates and then gives every user the best level its rate
//! carries.
//!
//! Both search the same space in the same canonical order (cluster plans
//! from [`enumerate_plans`], then the level tuple with `None` before level
//! 1, first user most significant) and keep the first maximal candidate.
//! For a fixed plan the QoE objective is a sum of per-user terms, so the
//! best level tuple is found user by user; that is an exact search of the
//! tuple space, not a heuristic.

use std::fmt;
use std::str::FromStr;

use crate::channel::NoiseConfig;
use crate::error::{Error, Result};
use crate::noma::{count_plans, enumerate_plans, ClusterPlan, NomaConfig, UserId};
use crate::qoe::{psnr_deficit, qoe_loss, QoeProfile};
use crate::video::{deliverable_s, LevelId, PlayOutcome, QualityLadder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    QoeAware,
    Baseline,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::QoeAware => "qoe_aware",
            Mode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qoe_aware" | "qoe-aware" | "aware" => Ok(Mode::QoeAware),
            "baseline" | "max_sum_rate" => Ok(Mode::Baseline),
            other => Err(Error::Config(format!("unknown scheduler mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub omega: f64,
    pub mode: Mode,
    /// Upper bound on `plans x level tuples` a slot may search.
    pub decision_space_limit: u64,
    /// Optional per-user minimum rate (bps) a plan must give every user.
    /// Plans violating it are skipped. Disabled by default.
    pub min_rate_bps: Option<Vec<f64>>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            omega: 4.0,
            mode: Mode::QoeAware,
            decision_space_limit: 1_000_000,
            min_rate_bps: None,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::Config(format!("sched.omega must be >= 0 (got {})", self.omega)));
        }
        Ok(())
    }
}

/// What the scheduler knows about one user at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSlot {
    pub gain_lin: f64,
    pub backlog_s: f64,
    pub buffered_s: f64,
    pub joined: bool,
    pub head_level: Option<LevelId>,
    pub profile: QoeProfile,
}

/// Scheduler input for one slot. User `i` of `users` has user id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub slot: u64,
    pub users: Vec<UserSlot>,
    pub bandwidth_hz: f64,
    pub noma: NomaConfig,
    pub noise: NoiseConfig,
    pub ladder: QualityLadder,
    pub slot_s: f64,
}

impl SlotState {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        (0..self.users.len()).collect()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.gain_lin).collect()
    }

    /// Predicted playable seconds for a user at `level` over `rate_bps`,
    /// computed exactly as `SourceQueue::transmit` would.
    pub fn predicted_delivery(&self, user: usize, level: Option<LevelId>, rate_bps: f64) -> f64 {
        match level {
            Some(l) => deliverable_s(rate_bps, self.ladder.bitrate(l), self.users[user].backlog_s, self.slot_s),
            None => 0.0,
        }
    }
}

/// A user's QoE loss model with the preference weights bound in.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluator {
    pub profile: QoeProfile,
    deficits: Vec<f64>,
    ladder: QualityLadder,
}

impl LossEvaluator {
    /// Realized loss of a played-slot outcome; identical to `qoe_loss`.
    pub fn loss(&self, outcome: PlayOutcome) -> f64 {
        match outcome {
            PlayOutcome::Played(l) => self.profile.w_quality * self.deficits[l - 1],
            other => qoe_loss(&self.profile, other, &self.ladder),
        }
    }

    /// One-slot-lookahead loss for a candidate.
    ///
    /// * content delivered: the candidate level's quality loss;
    /// * nothing delivered, joined, buffer holds a slot: loss of the level
    ///   at the buffer head;
    /// * nothing delivered, joined, buffer short of a slot: a stall;
    /// * nothing delivered, not joined: zero.
    pub fn predicted(&self, user: &UserSlot, level: Option<LevelId>, delivered_s: f64, slot_s: f64) -> f64 {
        if delivered_s > 0.0 {
            let l = level.expect("delivery implies a level");
            self.loss(PlayOutcome::Played(l))
        } else if !user.joined {
            0.0
        } else if user.buffered_s >= slot_s {
            match user.head_level {
                Some(h) => self.loss(PlayOutcome::Played(h)),
                None => 0.0,
            }
        } else {
            self.loss(PlayOutcome::Stall)
        }
    }
}

/// Binds every profile into a loss evaluator.
pub fn map_demands(profiles: &[QoeProfile], ladder: &QualityLadder) -> Vec<LossEvaluator> {
    let deficits: Vec<f64> = ladder.ids().map(|l| psnr_deficit(ladder, l)).collect();
    profiles
        .iter()
        .map(|p| LossEvaluator {
            profile: *p,
            deficits: deficits.clone(),
            ladder: ladder.clone(),
        })
        .collect()
}

/// A plan plus a level choice for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub plan: ClusterPlan,
    pub levels: Vec<Option<LevelId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    pub plan: ClusterPlan,
    pub levels: Vec<Option<LevelId>>,
    pub rates_bps: Vec<f64>,
    pub delivered_s: Vec<f64>,
    pub predicted_loss: Vec<f64>,
    /// Drift-plus-penalty value (QoE-aware) or sum rate (baseline).
    pub objective: f64,
}

/// `sum_u q_u * p_u - omega * sum_u Q_u` from per-user parts.
pub fn drift_plus_penalty(backlogs: &[f64], delivered: &[f64], losses: &[f64], omega: f64) -> f64 {
    let service: f64 = backlogs.iter().zip(delivered).map(|(q, p)| q * p).sum();
    let penalty: f64 = losses.iter().sum();
    service - omega * penalty
}

/// Objective of an explicit candidate.
pub fn qoe_objective(state: &SlotState, evaluators: &[LossEvaluator], candidate: &Candidate, omega: f64) -> f64 {
    let rates = candidate.plan.rates(&state.noise, &state.gains(), state.n_users());
    let delivered: Vec<f64> = (0..state.n_users())
        .map(|u| state.predicted_delivery(u, candidate.levels[u], rates[u]))
        .collect();
    let losses: Vec<f64> = (0..state.n_users())
        .map(|u| evaluators[u].predicted(&state.users[u], candidate.levels[u], delivered[u], state.slot_s))
        .collect();
    let backlogs: Vec<f64> = state.users.iter().map(|u| u.backlog_s).collect();
    drift_plus_penalty(&backlogs, &delivered, &losses, omega)
}

/// Level choices in canonical order: `None`, then 1..=L.
fn level_choices(ladder: &QualityLadder) -> Vec<Option<LevelId>> {
    std::iter::once(None).chain(ladder.ids().map(Some)).collect()
}

fn check_space(state: &SlotState, cfg: &SchedulerConfig) -> Result<()> {
    let plans = count_plans(&state.user_ids(), &state.noma)?;
    let tuples = ((state.ladder.len() + 1) as u128)
        .checked_pow(state.n_users() as u32)
        .unwrap_or(u128::MAX);
    let candidates = plans.saturating_mul(tuples);
    if candidates > u128::from(cfg.decision_space_limit) {
        let dimension = if plans >= tuples {
            "cluster plans (partitions x power allocations)"
        } else {
            "per-user quality levels"
        };
        return Err(Error::DecisionSpaceExceeded {
            candidates,
            limit: cfg.decision_space_limit,
            dimension,
        });
    }
    Ok(())
}

fn feasible(rates: &[f64], cfg: &SchedulerConfig) -> bool {
    match &cfg.min_rate_bps {
        Some(min) => rates.iter().zip(min).all(|(r, m)| r >= m),
        None => true,
    }
}

fn validate_state(state: &SlotState) -> Result<()> {
    if state.users.is_empty() {
        return Err(Error::InvalidInput("slot state has no users".into()));
    }
    if !(state.slot_s > 0.0) || !(state.bandwidth_hz > 0.0) {
        return Err(Error::InvalidInput("slot duration and bandwidth must be positive".into()));
    }
    Ok(())
}

/// Best decision within one plan, or `None` if the plan is infeasible.
fn best_in_plan_aware(
    state: &SlotState,
    evaluators: &[LossEvaluator],
    choices: &[Option<LevelId>],
    plan: &ClusterPlan,
    cfg: &SchedulerConfig,
) -> Option<SlotDecision> {
    let n = state.n_users();
    let rates = plan.rates(&state.noise, &state.gains(), n);
    if !feasible(&rates, cfg) {
        return None;
    }
    let mut levels = Vec::with_capacity(n);
    let mut delivered = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    for (u, user) in state.users.iter().enumerate() {
        let mut best: Option<(f64, Option<LevelId>, f64, f64)> = None;
        for &level in choices {
            let p = state.predicted_delivery(u, level, rates[u]);
            let q = evaluators[u].predicted(user, level, p, state.slot_s);
            let term = user.backlog_s * p - cfg.omega * q;
            if best.is_none_or(|b| term > b.0) {
                best = Some((term, level, p, q));
            }
        }
        let (_, level, p, q) = best.expect("at least one level choice");
        levels.push(level);
        delivered.push(p);
        losses.push(q);
    }
    let backlogs: Vec<f64> = state.users.iter().map(|u| u.backlog_s).collect();
    let objective = drift_plus_penalty(&backlogs, &delivered, &losses, cfg.omega);
    Some(SlotDecision {
        plan: plan.clone(),
        levels,
        rates_bps: rates,
        delivered_s: delivered,
        predicted_loss: losses,
        objective,
    })
}

fn best_in_plan_baseline(
    state: &SlotState,
    evaluators: &[LossEvaluator],
    plan: &ClusterPlan,
    cfg: &SchedulerConfig,
) -> Option<SlotDecision> {
    let n = state.n_users();
    let rates = plan.rates(&state.noise, &state.gains(), n);
    if !feasible(&rates, cfg) {
        return None;
    }
    let objective: f64 = rates.iter().sum();
    let levels: Vec<Option<LevelId>> = rates.iter().map(|&r| state.ladder.highest_fitting(r)).collect();
    let delivered: Vec<f64> = (0..n).map(|u| state.predicted_delivery(u, levels[u], rates[u])).collect();
    let losses = (0..n)
        .map(|u| evaluators[u].predicted(&state.users[u], levels[u], delivered[u], state.slot_s))
        .collect();
    Some(SlotDecision {
        plan: plan.clone(),
        levels,
        rates_bps: rates,
        delivered_s: delivered,
        predicted_loss: losses,
        objective,
    })
}

/// Plans with at least this many entries are scored on the rayon pool.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_PLANS: usize = 128;

/// First maximal decision in plan order.
fn reduce_first_max<F>(plans: &[ClusterPlan], score: F) -> Option<SlotDecision>
where
    F: Fn(&ClusterPlan) -> Option<SlotDecision> + Sync,
{
    let better = |a: (usize, SlotDecision), b: (usize, SlotDecision)| {
        if b.1.objective > a.1.objective || (b.1.objective == a.1.objective && b.0 < a.0) {
            b
        } else {
            a
        }
    };
    #[cfg(feature = "parallel")]
    if plans.len() >= PARALLEL_MIN_PLANS {
        use rayon::prelude::*;
        return plans
            .par_iter()
            .enumerate()
            .filter_map(|(i, p)| score(p).map(|d| (i, d)))
            .reduce_with(better)
            .map(|(_, d)| d);
    }
    plans
        .iter()
        .enumerate()
        .filter_map(|(i, p)| score(p).map(|d| (i, d)))
        .reduce(better)
        .map(|(_, d)| d)
}

pub fn schedule_qoe_aware(state: &SlotState, evaluators: &[LossEvaluator], cfg: &SchedulerConfig) -> Result<SlotDecision> {
    validate_state(state)?;
    check_space(state, cfg)?;
    let plans = enumerate_plans(&state.user_ids(), &state.gains(), &state.noma, state.bandwidth_hz)?;
    let choices = level_choices(&state.ladder);
    reduce_first_max(&plans, |p| best_in_plan_aware(state, evaluators, &choices, p, cfg))
        .ok_or_else(|| Error::InvalidInput("no cluster plan satisfies the minimum-rate constraints".into()))
}

pub fn schedule_baseline(state: &SlotState, evaluators: &[LossEvaluator], cfg: &SchedulerConfig) -> Result<SlotDecision> {
    validate_state(state)?;
    check_space(state, cfg)?;
    let plans = enumerate_plans(&state.user_ids(), &state.gains(), &state.noma, state.bandwidth_hz)?;
    reduce_first_max(&plans, |p| best_in_plan_baseline(state, evaluators, p, cfg))
        .ok_or_else(|| Error::InvalidInput("no cluster plan satisfies the minimum-rate constraints".into()))
}

pub fn schedule(state: &SlotState, evaluators: &[LossEvaluator], cfg: &SchedulerConfig) -> Result<SlotDecision> {
    match cfg.mode {
        Mode::QoeAware => schedule_qoe_aware(state, evaluators, cfg),
        Mode::Baseline => schedule_baseline(state, evaluators, cfg),
    }
}
