//! Per-slot trace files and metric replay.
//!
//! One tab-separated line per slot per user, after a `#`-prefixed header:
//!
//! | column | meaning |
//! |---|---|
//! | `slot` | slot index |
//! | `user` | user id |
//! | `gain_lin` | realized channel gain this slot |
//! | `backlog_s` | transmitter backlog `q_u(t)` seen by the scheduler |
//! | `buffer_start_s` | client buffer at the start of the slot |
//! | `plan` | chosen cluster plan, strongest member first |
//! | `level` | scheduled quality level, `-` if unserved |
//! | `rate_bps` | scheduled rate |
//! | `delivered_s` | playable seconds received |
//! | `decoded` | 1 if SIC decoding succeeded |
//! | `outcome` | `wait`, `join`, `play:<level>`, `stall` or `end` |
//! | `played_s` | seconds played this slot |
//! | `buffer_end_s` | client buffer at the end of the slot |
//! | `loss` | realized QoE loss `Q_u(t)` |
//! | `objective` | scheduler objective of the slot decision |

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::video::{LevelId, PlayOutcome, QualityLadder};

use super::sim::{aggregate, AggregateMetrics, UserMetrics};

pub const TRACE_HEADER: &str = "#slot\tuser\tgain_lin\tbacklog_s\tbuffer_start_s\tplan\tlevel\trate_bps\tdelivered_s\tdecoded\toutcome\tplayed_s\tbuffer_end_s\tloss\tobjective";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub user_id: usize,
    pub gain_lin: f64,
    pub backlog_s: f64,
    pub buffer_start_s: f64,
    pub plan: String,
    pub level: Option<LevelId>,
    pub rate_bps: f64,
    pub delivered_s: f64,
    pub decoded: bool,
    pub outcome: PlayOutcome,
    pub played_s: f64,
    pub buffer_end_s: f64,
    pub loss: f64,
    pub objective: f64,
}

fn outcome_str(o: PlayOutcome) -> String {
    match o {
        PlayOutcome::NotJoined => "wait".into(),
        PlayOutcome::Joined => "join".into(),
        PlayOutcome::Played(l) => format!("play:{l}"),
        PlayOutcome::Stall => "stall".into(),
        PlayOutcome::Ended => "end".into(),
    }
}

fn parse_outcome(s: &str) -> Option<PlayOutcome> {
    match s {
        "wait" => Some(PlayOutcome::NotJoined),
        "join" => Some(PlayOutcome::Joined),
        "stall" => Some(PlayOutcome::Stall),
        "end" => Some(PlayOutcome::Ended),
        _ => s.strip_prefix("play:")?.parse().ok().map(PlayOutcome::Played),
    }
}

pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let level = r.level.map_or_else(|| "-".to_string(), |l| l.to_string());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.slot,
            r.user_id,
            r.gain_lin,
            r.backlog_s,
            r.buffer_start_s,
            r.plan,
            level,
            r.rate_bps,
            r.delivered_s,
            u8::from(r.decoded),
            outcome_str(r.outcome),
            r.played_s,
            r.buffer_end_s,
            r.loss,
            r.objective
        );
    }
    out
}

pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_trace(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let ctx = || format!("trace line {}", i + 1);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 15 {
            return Err(Error::parse(ctx(), format!("expected 15 fields, found {}", f.len())));
        }
        fn p<T: std::str::FromStr>(s: &str, name: &str, ctx: &dyn Fn() -> String) -> Result<T> {
            s.parse().map_err(|_| Error::parse(ctx(), format!("bad {name} `{s}`")))
        }
        rows.push(TraceRow {
            slot: p(f[0], "slot", &ctx)?,
            user_id: p(f[1], "user", &ctx)?,
            gain_lin: p(f[2], "gain_lin", &ctx)?,
            backlog_s: p(f[3], "backlog_s", &ctx)?,
            buffer_start_s: p(f[4], "buffer_start_s", &ctx)?,
            plan: f[5].to_string(),
            level: if f[6] == "-" { None } else { Some(p(f[6], "level", &ctx)?) },
            rate_bps: p(f[7], "rate_bps", &ctx)?,
            delivered_s: p(f[8], "delivered_s", &ctx)?,
            decoded: match f[9] {
                "1" => true,
                "0" => false,
                s => return Err(Error::parse(ctx(), format!("bad decoded flag `{s}`"))),
            },
            outcome: parse_outcome(f[10]).ok_or_else(|| Error::parse(ctx(), format!("bad outcome `{}`", f[10])))?,
            played_s: p(f[11], "played_s", &ctx)?,
            buffer_end_s: p(f[12], "buffer_end_s", &ctx)?,
            loss: p(f[13], "loss", &ctx)?,
            objective: p(f[14], "objective", &ctx)?,
        });
    }
    Ok(rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMetrics {
    pub users: Vec<UserMetrics>,
    pub aggregate: AggregateMetrics,
    pub mean_objective: Option<f64>,
}

/// Recomputes run metrics from trace rows alone (plus the ladder for
/// PSNR values).
pub fn replay(rows: &[TraceRow], ladder: &QualityLadder) -> Result<ReplayMetrics> {
    let n = rows.iter().map(|r| r.user_id + 1).max().unwrap_or(0);
    let mut users: Vec<UserMetrics> = (0..n)
        .map(|u| UserMetrics {
            user_id: u,
            mean_psnr_db: None,
            psnr_sum_db: 0.0,
            played_slots: 0,
            stall_count: 0,
            join_time_slots: None,
            mean_rate_bps: 0.0,
            mean_loss: 0.0,
            delivered_s: 0.0,
            played_s: 0.0,
            final_buffer_s: 0.0,
        })
        .collect();
    let mut first_slot: Vec<Option<u64>> = vec![None; n];
    let mut counts = vec![0u64; n];
    let mut rate_sums = vec![0.0; n];
    let mut loss_sums = vec![0.0; n];
    let mut objective_sum = 0.0;
    let mut slots = 0u64;

    for r in rows {
        let u = r.user_id;
        let m = &mut users[u];
        let first = *first_slot[u].get_or_insert(r.slot);
        match r.outcome {
            PlayOutcome::Played(l) => {
                let level = ladder
                    .level(l)
                    .ok_or_else(|| Error::InvalidInput(format!("trace level {l} is not in the ladder")))?;
                m.psnr_sum_db += level.psnr_db;
                m.played_slots += 1;
            }
            PlayOutcome::Stall => m.stall_count += 1,
            PlayOutcome::Joined => m.join_time_slots = Some(r.slot - first),
            PlayOutcome::NotJoined | PlayOutcome::Ended => {}
        }
        rate_sums[u] += r.rate_bps;
        loss_sums[u] += r.loss;
        m.delivered_s += r.delivered_s;
        m.played_s += r.played_s;
        m.final_buffer_s = r.buffer_end_s;
        counts[u] += 1;
        if u == 0 {
            objective_sum += r.objective;
            slots += 1;
        }
    }
    for (u, m) in users.iter_mut().enumerate() {
        m.mean_psnr_db = (m.played_slots > 0).then(|| m.psnr_sum_db / m.played_slots as f64);
        if counts[u] > 0 {
            m.mean_rate_bps = rate_sums[u] / counts[u] as f64;
            m.mean_loss = loss_sums[u] / counts[u] as f64;
        }
    }
    Ok(ReplayMetrics {
        aggregate: aggregate(&users, slots),
        users,
        mean_objective: (slots > 0).then(|| objective_sum / slots as f64),
    })
}
