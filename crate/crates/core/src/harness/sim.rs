//! The slot loop.
//!
//! Every slot runs, in order: source arrival, mobility, channel sampling,
//! scheduling, SIC decode realization, transmission, playback and QoE-loss
//! accounting.

use crate::channel::UserState;
use crate::error::Result;
use crate::noma::{realized_layer_rates, sic_decode_outcome};
use crate::rng::{keyed_rng, Stream};
use crate::scheduler::{map_demands, schedule, SlotState, UserSlot};
use crate::video::{quality_metrics, ClientBuffer, SourceQueue};

use super::config::SimConfig;
use super::trace::TraceRow;

#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub user_id: usize,
    pub mean_psnr_db: Option<f64>,
    pub psnr_sum_db: f64,
    pub played_slots: u64,
    pub stall_count: u64,
    pub join_time_slots: Option<u64>,
    pub mean_rate_bps: f64,
    pub mean_loss: f64,
    pub delivered_s: f64,
    pub played_s: f64,
    pub final_buffer_s: f64,
}

/// The numbers one sweep row reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    /// Pooled over every played slot of every user.
    pub mean_psnr_db: Option<f64>,
    pub stall_count: u64,
    /// Mean over users that joined.
    pub join_time_slots: Option<f64>,
    pub mean_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub users: Vec<UserMetrics>,
    pub aggregate: AggregateMetrics,
    pub mean_objective: Option<f64>,
    pub trace: Vec<TraceRow>,
}

pub(crate) fn aggregate(users: &[UserMetrics], slots: u64) -> AggregateMetrics {
    let psnr_sum: f64 = users.iter().map(|u| u.psnr_sum_db).sum();
    let played: u64 = users.iter().map(|u| u.played_slots).sum();
    let joins: Vec<u64> = users.iter().filter_map(|u| u.join_time_slots).collect();
    let rate_sum: f64 = users.iter().map(|u| u.mean_rate_bps).sum();
    AggregateMetrics {
        mean_psnr_db: (played > 0).then(|| psnr_sum / played as f64),
        stall_count: users.iter().map(|u| u.stall_count).sum(),
        join_time_slots: (!joins.is_empty()).then(|| joins.iter().sum::<u64>() as f64 / joins.len() as f64),
        mean_rate_bps: if slots == 0 || users.is_empty() {
            0.0
        } else {
            rate_sum / users.len() as f64
        },
    }
}

pub fn run(cfg: &SimConfig) -> Result<RunMetrics> {
    cfg.validate()?;
    let n = cfg.n_users;
    let slot_s = cfg.video.slot_s;
    let ladder = &cfg.video.ladder;
    let profiles = cfg.profiles.resolve(n)?;
    let evaluators = map_demands(&profiles, ladder);

    let geometry = cfg.channel.geometry;
    let mut users: Vec<UserState> = (0..n)
        .map(|u| {
            let mut rng = keyed_rng(cfg.seed, Stream::Placement, u as u64, 0);
            UserState::place(u, &geometry, cfg.channel.speed_mps, &mut rng)
        })
        .collect();
    let mut mobility: Vec<_> = (0..n).map(|u| keyed_rng(cfg.seed, Stream::Mobility, u as u64, 0)).collect();
    let mut queues: Vec<SourceQueue> = (0..n).map(|u| SourceQueue::new(u, cfg.video.length_s)).collect();
    let mut buffers: Vec<ClientBuffer> = (0..n).map(ClientBuffer::new).collect();

    let mut prev_gains: Option<Vec<f64>> = None;
    let mut trace = Vec::with_capacity(n * cfg.horizon_slots as usize);
    let mut rate_sums = vec![0.0; n];
    let mut loss_sums = vec![0.0; n];
    let mut objective_sum = 0.0;

    for slot in 0..cfg.horizon_slots {
        for q in &mut queues {
            q.source_arrival(slot_s);
        }
        for (u, rng) in users.iter_mut().zip(&mut mobility) {
            u.advance(&geometry, slot_s, rng);
        }
        let gains: Vec<f64> = users
            .iter()
            .map(|u| cfg.channel.sample(cfg.seed, slot, u).map(|s| s.gain_lin))
            .collect::<Result<_>>()?;
        let sched_gains = match (&prev_gains, cfg.noma.stale_csi) {
            (Some(p), true) => p.clone(),
            _ => gains.clone(),
        };

        let state = SlotState {
            slot,
            users: (0..n)
                .map(|u| UserSlot {
                    gain_lin: sched_gains[u],
                    backlog_s: queues[u].backlog_s,
                    buffered_s: buffers[u].buffered_s,
                    joined: buffers[u].joined,
                    head_level: buffers[u].head_level(),
                    profile: profiles[u],
                })
                .collect(),
            bandwidth_hz: cfg.bandwidth_hz,
            noma: cfg.noma.clone(),
            noise: cfg.channel.noise,
            ladder: ladder.clone(),
            slot_s,
        };
        let decision = schedule(&state, &evaluators, &cfg.sched)?;

        let mut success = vec![true; n];
        for pc in &decision.plan.clusters {
            let members = pc.cluster.members();
            let assigned: Vec<f64> = members
                .iter()
                .map(|&u| match decision.levels[u] {
                    Some(l) => decision.delivered_s[u] * ladder.bitrate(l) / slot_s,
                    None => 0.0,
                })
                .collect();
            let noise_w = cfg.channel.noise.noise_power(pc.bandwidth_hz);
            let realized = realized_layer_rates(&pc.cluster, &pc.alloc, pc.power_w, pc.bandwidth_hz, noise_w, &gains);
            for (&u, ok) in members.iter().zip(sic_decode_outcome(&pc.cluster, &assigned, &realized)) {
                success[u] = ok;
            }
        }

        let plan_label = decision.plan.label();
        objective_sum += decision.objective;
        for u in 0..n {
            let backlog_s = queues[u].backlog_s;
            let buffer_start_s = buffers[u].buffered_s;
            let receipt = queues[u].transmit(slot, ladder, decision.levels[u], decision.rates_bps[u], slot_s, success[u]);
            buffers[u].set_source_drained(queues[u].drained());
            let outcome = buffers[u].playback_step(&receipt, slot_s, cfg.video.startup_threshold_s);
            let loss = evaluators[u].loss(outcome);
            rate_sums[u] += decision.rates_bps[u];
            loss_sums[u] += loss;
            trace.push(TraceRow {
                slot,
                user_id: u,
                gain_lin: gains[u],
                backlog_s,
                buffer_start_s,
                plan: plan_label.clone(),
                level: decision.levels[u],
                rate_bps: decision.rates_bps[u],
                delivered_s: receipt.delivered_s,
                decoded: success[u],
                outcome,
                played_s: buffers[u].last_played_s,
                buffer_end_s: buffers[u].buffered_s,
                loss,
                objective: decision.objective,
            });
        }
        prev_gains = Some(gains);
    }

    let slots = cfg.horizon_slots;
    let users_out: Vec<UserMetrics> = buffers
        .iter()
        .enumerate()
        .map(|(u, b)| {
            let qm = quality_metrics(&b.played_log, ladder);
            UserMetrics {
                user_id: u,
                mean_psnr_db: qm.mean_psnr_db,
                psnr_sum_db: qm.psnr_sum_db,
                played_slots: qm.played_slots,
                stall_count: b.stall_count,
                join_time_slots: qm.join_time_slots,
                mean_rate_bps: if slots == 0 { 0.0 } else { rate_sums[u] / slots as f64 },
                mean_loss: if slots == 0 { 0.0 } else { loss_sums[u] / slots as f64 },
                delivered_s: b.delivered_s,
                played_s: b.played_s,
                final_buffer_s: b.buffered_s,
            }
        })
        .collect();

    Ok(RunMetrics {
        aggregate: aggregate(&users_out, slots),
        users: users_out,
        mean_objective: (slots > 0).then(|| objective_sum / slots as f64),
        trace,
    })
}

pub const SUMMARY_HEADER: &str =
    "user,mean_psnr_db,stall_count,join_time_slots,mean_rate_bps,mean_loss,delivered_s,played_s,final_buffer_s";

fn field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-user metrics plus an `all` row, as CSV. The `all` row leaves the
/// per-user-only columns empty except `mean_loss`, which carries the mean
/// slot objective.
pub fn format_summary(users: &[UserMetrics], agg: &AggregateMetrics, mean_objective: Option<f64>) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for u in users {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            u.user_id,
            field(u.mean_psnr_db),
            u.stall_count,
            field(u.join_time_slots),
            u.mean_rate_bps,
            u.mean_loss,
            u.delivered_s,
            u.played_s,
            u.final_buffer_s
        ));
    }
    out.push_str(&format!(
        "all,{},{},{},{},{},,,\n",
        field(agg.mean_psnr_db),
        agg.stall_count,
        field(agg.join_time_slots),
        agg.mean_rate_bps,
        field(mean_objective)
    ));
    out
}
