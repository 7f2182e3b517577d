//! Shared test helpers: an independent brute-force scheduler oracle and a
//! random slot-state generator.
//!
//! The oracle deliberately shares no code with the library beyond the
//! input data types. It enumerates set partitions by restricted growth
//! strings, builds its own power grid, evaluates SIC rates from the
//! textbook formula and walks the full level-tuple product.

#![allow(dead_code)]

use noma_qoe::channel::NoiseConfig;
use noma_qoe::noma::NomaConfig;
use noma_qoe::qoe::QoeProfile;
use noma_qoe::scheduler::{SlotState, UserSlot};
use noma_qoe::video::{QualityLadder, QualityLevel};
use rand::Rng;

/// One brute-force decision: the plan as (members strongest first,
/// fractions) per cluster, the level tuple and the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDecision {
    pub clusters: Vec<(Vec<usize>, Vec<f64>)>,
    pub levels: Vec<Option<usize>>,
    pub rates: Vec<f64>,
    pub objective: f64,
}

/// Set partitions of `0..n` with blocks of at most `max_block`, each
/// block ascending, blocks ordered by first element, sorted
/// lexicographically.
pub fn oracle_partitions(n: usize, max_block: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    fn rec(i: usize, n: usize, max_block: usize, rgs: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let k = rgs.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); k];
            for (u, &b) in rgs.iter().enumerate() {
                blocks[b].push(u);
            }
            if blocks.iter().all(|b| b.len() <= max_block) {
                out.push(blocks);
            }
            return;
        }
        let used = rgs[..i].iter().max().map_or(0, |m| m + 1);
        for b in 0..=used {
            rgs[i] = b;
            rec(i + 1, n, max_block, rgs, out);
        }
    }
    if n > 0 {
        rec(0, n, max_block, &mut rgs, &mut out);
    }
    out.sort();
    out
}

/// Strongest-first fractions for a cluster of `size`, weakest member's
/// share ascending (then the middle member's).
pub fn oracle_grid(size: usize, step: f64) -> Vec<Vec<f64>> {
    let steps = (1.0 / step).round() as i64;
    let mut out = Vec::new();
    match size {
        1 => out.push(vec![1.0]),
        2 => {
            for k in 1..steps {
                let weak = 0.5 + k as f64 * step;
                if weak <= 1.0 - step + 1e-12 {
                    out.push(vec![1.0 - weak, weak]);
                }
            }
        }
        3 => {
            for i in 1..steps {
                for j in (i + 1)..steps {
                    let (s, m) = (i as f64 * step, j as f64 * step);
                    let w = 1.0 - s - m;
                    if s < 1.0 / 3.0 && w > m + 1e-12 {
                        out.push(vec![s, m, w]);
                    }
                }
            }
            out.sort_by(|a, b| a[2].total_cmp(&b[2]).then(a[1].total_cmp(&b[1])));
        }
        _ => {}
    }
    out
}

fn noise_w(noise: &NoiseConfig, bw: f64) -> f64 {
    let dbm = noise.psd_dbm_hz + noise.noise_figure_db + 10.0 * bw.log10();
    10f64.powf((dbm - 30.0) / 10.0)
}

/// SIC rates of a cluster, members strongest first: member `i` sees the
/// layers of members `0..i` as interference.
pub fn oracle_sic(gains: &[f64], fractions: &[f64], power: f64, bw: f64, noise: f64) -> Vec<f64> {
    (0..gains.len())
        .map(|i| {
            let interference: f64 = fractions[..i].iter().map(|a| a * power * gains[i]).sum();
            bw * (1.0 + fractions[i] * power * gains[i] / (interference + noise)).log2()
        })
        .collect()
}

/// Clusters as (members strongest first, fractions) plus per-user rates.
type OraclePlan = (Vec<(Vec<usize>, Vec<f64>)>, Vec<f64>);

fn plans(state: &SlotState) -> Vec<OraclePlan> {
    let n = state.users.len();
    let g: Vec<f64> = state.users.iter().map(|u| u.gain_lin).collect();
    let mut out = Vec::new();
    for partition in oracle_partitions(n, state.noma.max_cluster_size) {
        let k = partition.len() as f64;
        let bw = state.bandwidth_hz / k;
        let power = state.noma.total_power_w / k;
        let blocks: Vec<Vec<usize>> = partition
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_by(|&x, &y| g[y].total_cmp(&g[x]).then(x.cmp(&y)));
                b
            })
            .collect();
        let grids: Vec<Vec<Vec<f64>>> = blocks.iter().map(|b| oracle_grid(b.len(), state.noma.power_grid_step)).collect();
        if grids.iter().any(|gr| gr.is_empty()) {
            continue;
        }
        // Odometer, first cluster most significant.
        let total: usize = grids.iter().map(|gr| gr.len()).product();
        for mut idx in 0..total {
            let mut choice = vec![0; blocks.len()];
            for c in (0..blocks.len()).rev() {
                choice[c] = idx % grids[c].len();
                idx /= grids[c].len();
            }
            let mut rates = vec![0.0; n];
            let mut clusters = Vec::new();
            for (c, b) in blocks.iter().enumerate() {
                let fr = &grids[c][choice[c]];
                let bg: Vec<f64> = b.iter().map(|&u| g[u]).collect();
                let r = oracle_sic(&bg, fr, power, bw, noise_w(&state.noise, bw));
                for (&u, x) in b.iter().zip(r) {
                    rates[u] = x;
                }
                clusters.push((b.clone(), fr.clone()));
            }
            out.push((clusters, rates));
        }
    }
    out
}

fn delivered(state: &SlotState, u: usize, level: Option<usize>, rate: f64) -> f64 {
    match level {
        None => 0.0,
        Some(l) => {
            let chunks = (rate / state.ladder.levels()[l - 1].bitrate_bps).floor();
            state.users[u].backlog_s.min(chunks * state.slot_s)
        }
    }
}

fn level_loss(state: &SlotState, u: usize, l: usize) -> f64 {
    let lv = state.ladder.levels();
    let top = lv[lv.len() - 1].psnr_db;
    let span = top - lv[0].psnr_db;
    let deficit = if span > 0.0 { (top - lv[l - 1].psnr_db) / span } else { 0.0 };
    state.users[u].profile.w_quality * deficit
}

fn predicted_loss(state: &SlotState, u: usize, level: Option<usize>, p: f64) -> f64 {
    let user = &state.users[u];
    if p > 0.0 {
        level_loss(state, u, level.unwrap())
    } else if !user.joined {
        0.0
    } else if user.buffered_s >= state.slot_s {
        user.head_level.map_or(0.0, |h| level_loss(state, u, h))
    } else {
        user.profile.w_quality + user.profile.w_stall
    }
}

/// Every level tuple, first user most significant, `None` before level 1.
fn tuples(n: usize, levels: usize) -> Vec<Vec<Option<usize>>> {
    let base = levels + 1;
    (0..base.pow(n as u32))
        .map(|mut i| {
            let mut t = vec![None; n];
            for u in (0..n).rev() {
                let d = i % base;
                i /= base;
                t[u] = if d == 0 { None } else { Some(d) };
            }
            t
        })
        .collect()
}

pub fn oracle_aware(state: &SlotState, omega: f64) -> OracleDecision {
    let n = state.users.len();
    let all = tuples(n, state.ladder.len());
    let mut best: Option<OracleDecision> = None;
    for (clusters, rates) in plans(state) {
        for t in &all {
            let mut service = 0.0;
            let mut penalty = 0.0;
            for u in 0..n {
                let p = delivered(state, u, t[u], rates[u]);
                service += state.users[u].backlog_s * p;
                penalty += predicted_loss(state, u, t[u], p);
            }
            let obj = service - omega * penalty;
            if best.as_ref().is_none_or(|b| obj > b.objective) {
                best = Some(OracleDecision {
                    clusters: clusters.clone(),
                    levels: t.clone(),
                    rates: rates.clone(),
                    objective: obj,
                });
            }
        }
    }
    best.unwrap()
}

pub fn oracle_baseline(state: &SlotState) -> OracleDecision {
    let mut best: Option<OracleDecision> = None;
    for (clusters, rates) in plans(state) {
        let obj: f64 = rates.iter().sum();
        if best.as_ref().is_none_or(|b| obj > b.objective) {
            let levels = rates
                .iter()
                .map(|&r| {
                    let lv = state.ladder.levels();
                    (1..=lv.len()).rev().find(|&l| lv[l - 1].bitrate_bps <= r)
                })
                .collect();
            best = Some(OracleDecision {
                clusters,
                levels,
                rates,
                objective: obj,
            });
        }
    }
    best.unwrap()
}

pub fn two_level_ladder() -> QualityLadder {
    QualityLadder::new(vec![
        QualityLevel { bitrate_bps: 1.0e6, psnr_db: 34.0 },
        QualityLevel { bitrate_bps: 3.0e6, psnr_db: 42.0 },
    ])
    .unwrap()
}

/// A random slot state with up to `max_users` users on realistic path
/// gains, integer-second queues and buffers, and random profiles.
pub fn random_state<R: Rng>(rng: &mut R, max_users: usize, ladder: QualityLadder, step: f64) -> SlotState {
    let n = rng.random_range(1..=max_users);
    let levels = ladder.len();
    let users = (0..n)
        .map(|u| {
            let buffered = rng.random_range(0..=3) as f64;
            let joined = rng.random_bool(0.7);
            UserSlot {
                gain_lin: 10f64.powf(rng.random_range(-13.5..-10.0)),
                backlog_s: rng.random_range(0..=5) as f64,
                buffered_s: buffered,
                joined,
                head_level: (buffered > 0.0).then(|| rng.random_range(1..=levels)),
                profile: QoeProfile::new(u, rng.random_range(0.0..=1.0)),
            }
        })
        .collect();
    SlotState {
        slot: rng.random_range(0..1000),
        users,
        bandwidth_hz: [2.5e6, 5e6, 10e6, 20e6][rng.random_range(0..4)],
        noma: NomaConfig {
            power_grid_step: step,
            ..NomaConfig::default()
        },
        noise: NoiseConfig::default(),
        ladder,
        slot_s: 1.0,
    }
}

/// Engine plan in the oracle's shape.
pub fn plan_shape(plan: &noma_qoe::noma::ClusterPlan) -> Vec<(Vec<usize>, Vec<f64>)> {
    plan.clusters
        .iter()
        .map(|pc| (pc.cluster.members().to_vec(), pc.alloc.fractions.clone()))
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
