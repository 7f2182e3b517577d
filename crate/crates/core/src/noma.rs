//! Power-domain NOMA mechanics: user clustering, within-cluster power
//! allocation, SIC achievable rates and cascade decode failures.
//!
//! Cluster members are always stored strongest first (descending channel
//! gain, ties by ascending user id). The strongest member gets the smallest
//! power fraction and decodes every other layer before its own; the
//! weakest member decodes only its own layer and treats the rest as noise.

use crate::error::{Error, Result};

pub type UserId = usize;

/// Largest user set `enumerate_partitions` accepts.
pub const MAX_ENUMERATED_USERS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct NomaConfig {
    pub total_power_w: f64,
    pub max_cluster_size: usize,
    pub power_grid_step: f64,
    /// Schedule on the previous slot's gains, realize on the current ones.
    pub stale_csi: bool,
}

impl Default for NomaConfig {
    fn default() -> Self {
        Self {
            total_power_w: crate::channel::dbm_to_watts(20.0),
            max_cluster_size: 2,
            power_grid_step: 0.05,
            stale_csi: false,
        }
    }
}

impl NomaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_power_w > 0.0) || !self.total_power_w.is_finite() {
            return Err(Error::Config("noma total power must be positive".into()));
        }
        if !(1..=3).contains(&self.max_cluster_size) {
            return Err(Error::Config(format!(
                "noma.max_cluster_size must be 1, 2 or 3 (got {})",
                self.max_cluster_size
            )));
        }
        if !(self.power_grid_step > 0.0 && self.power_grid_step < 0.5) {
            return Err(Error::Config(format!(
                "noma.power_grid_step must lie in (0, 0.5) (got {})",
                self.power_grid_step
            )));
        }
        Ok(())
    }
}

/// Users sharing one subcarrier, strongest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cluster {
    members: Vec<UserId>,
}

impl Cluster {
    /// Orders `block` by descending gain (ties by ascending id).
    /// `gains` is indexed by user id.
    pub fn ordered(block: &[UserId], gains: &[f64]) -> Self {
        let mut members = block.to_vec();
        members.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
        Self { members }
    }

    pub fn members(&self) -> &[UserId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// SIC position of `user` (0 = strongest, decodes everything).
    pub fn position(&self, user: UserId) -> Option<usize> {
        self.members.iter().position(|&m| m == user)
    }
}

/// Power fractions aligned with `Cluster::members` (strongest first).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub fractions: Vec<f64>,
}

impl PowerAllocation {
    pub fn full() -> Self {
        Self {
            fractions: vec![1.0],
        }
    }
}

/// Every power allocation the grid search considers for a cluster of
/// `size` members. Fractions are strictly increasing from the strongest
/// to the weakest member and every member gets at least `step`.
///
/// Order: weakest member's fraction ascending, then the middle member's.
pub fn power_grid(size: usize, step: f64) -> Vec<PowerAllocation> {
    const EPS: f64 = 1e-12;
    match size {
        0 => Vec::new(),
        1 => vec![PowerAllocation::full()],
        2 => {
            let mut out = Vec::new();
            let mut k = 1u32;
            loop {
                let weak = 0.5 + f64::from(k) * step;
                if weak > 1.0 - step + EPS {
                    break;
                }
                out.push(PowerAllocation {
                    fractions: vec![1.0 - weak, weak],
                });
                k += 1;
            }
            out
        }
        3 => {
            let mut out = Vec::new();
            let mut i = 1u32;
            while f64::from(i) * step < 1.0 / 3.0 {
                let strong = f64::from(i) * step;
                let mut j = i + 1;
                loop {
                    let middle = f64::from(j) * step;
                    let weak = 1.0 - strong - middle;
                    if weak <= middle + EPS {
                        break;
                    }
                    out.push(PowerAllocation {
                        fractions: vec![strong, middle, weak],
                    });
                    j += 1;
                }
                i += 1;
            }
            out.sort_by(|a, b| {
                a.fractions[2]
                    .total_cmp(&b.fractions[2])
                    .then(a.fractions[1].total_cmp(&b.fractions[1]))
            });
            out
        }
        _ => Vec::new(),
    }
}

/// All set partitions of `user_ids` with blocks of at most `max_block`
/// members, in canonical order: each block ascending, blocks ordered by
/// their smallest element, partitions sorted lexicographically.
pub fn enumerate_partitions(user_ids: &[UserId], max_block: usize) -> Result<Vec<Vec<Vec<UserId>>>> {
    if user_ids.len() > MAX_ENUMERATED_USERS {
        return Err(Error::DecisionSpaceTooLarge {
            n: user_ids.len(),
            max: MAX_ENUMERATED_USERS,
        });
    }
    if user_ids.is_empty() {
        return Err(Error::InvalidInput("cannot partition an empty user set".into()));
    }
    if max_block == 0 {
        return Err(Error::InvalidInput("max block size must be at least 1".into()));
    }
    let mut ids = user_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != user_ids.len() {
        return Err(Error::InvalidInput("duplicate user ids".into()));
    }

    let mut out = Vec::new();
    let mut current = Vec::new();
    partitions_rec(&ids, max_block, &mut current, &mut out);
    out.sort();
    Ok(out)
}

fn partitions_rec(
    rest: &[UserId],
    max_block: usize,
    current: &mut Vec<Vec<UserId>>,
    out: &mut Vec<Vec<Vec<UserId>>>,
) {
    let Some((&head, tail)) = rest.split_first() else {
        out.push(current.clone());
        return;
    };
    // Pick the companions of `head` among `tail`, then recurse on the rest.
    let mut chosen = Vec::with_capacity(max_block);
    companions_rec(head, tail, 0, max_block - 1, &mut chosen, max_block, current, out);
}

#[allow(clippy::too_many_arguments)]
fn companions_rec(
    head: UserId,
    tail: &[UserId],
    from: usize,
    slots_left: usize,
    chosen: &mut Vec<usize>,
    max_block: usize,
    current: &mut Vec<Vec<UserId>>,
    out: &mut Vec<Vec<Vec<UserId>>>,
) {
    let mut block = vec![head];
    block.extend(chosen.iter().map(|&i| tail[i]));
    let remaining: Vec<UserId> = tail
        .iter()
        .enumerate()
        .filter(|(i, _)| !chosen.contains(i))
        .map(|(_, &u)| u)
        .collect();
    current.push(block);
    partitions_rec(&remaining, max_block, current, out);
    current.pop();

    if slots_left == 0 {
        return;
    }
    for i in from..tail.len() {
        chosen.push(i);
        companions_rec(head, tail, i + 1, slots_left - 1, chosen, max_block, current, out);
        chosen.pop();
    }
}

/// Rate of the layer at SIC position `layer` as seen by a receiver with
/// channel gain `gain`, after that receiver has cancelled every weaker
/// member's layer. Layers of stronger members (positions `< layer`)
/// remain as interference.
pub fn layer_rate(
    alloc: &PowerAllocation,
    layer: usize,
    gain: f64,
    power_w: f64,
    bandwidth_hz: f64,
    noise_w: f64,
) -> f64 {
    let interference: f64 = alloc.fractions[..layer].iter().sum();
    let received = power_w * gain;
    let sinr = alloc.fractions[layer] * received / (received * interference + noise_w);
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Achievable SIC rate of every member (aligned with `cluster.members()`).
pub fn sic_rates(
    cluster: &Cluster,
    alloc: &PowerAllocation,
    power_w: f64,
    bandwidth_hz: f64,
    noise_w: f64,
    gains: &[f64],
) -> Vec<f64> {
    cluster
        .members()
        .iter()
        .enumerate()
        .map(|(pos, &u)| layer_rate(alloc, pos, gains[u], power_w, bandwidth_hz, noise_w))
        .collect()
}

/// Full-power single-user capacity of the best member; upper-bounds the
/// SIC sum rate of any allocation.
pub fn sum_rate_bound(
    cluster: &Cluster,
    power_w: f64,
    bandwidth_hz: f64,
    noise_w: f64,
    gains: &[f64],
) -> f64 {
    let g_max = cluster
        .members()
        .iter()
        .map(|&u| gains[u])
        .fold(0.0, f64::max);
    bandwidth_hz * (1.0 + power_w * g_max / noise_w).log2()
}

/// `out[receiver][layer]`: rate each layer supports at each receiver under
/// the realized gains. Entries for layers a receiver never decodes
/// (stronger members' layers) are `NaN`.
pub fn realized_layer_rates(
    cluster: &Cluster,
    alloc: &PowerAllocation,
    power_w: f64,
    bandwidth_hz: f64,
    noise_w: f64,
    realized_gains: &[f64],
) -> Vec<Vec<f64>> {
    let n = cluster.len();
    cluster
        .members()
        .iter()
        .enumerate()
        .map(|(rx, &u)| {
            (0..n)
                .map(|layer| {
                    if layer < rx {
                        f64::NAN
                    } else {
                        layer_rate(alloc, layer, realized_gains[u], power_w, bandwidth_hz, noise_w)
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-member decode success. Receiver `rx` decodes layers from the
/// weakest member down to its own; a layer whose realized rate falls short
/// of its assigned bitrate fails and takes every later layer with it.
pub fn sic_decode_outcome(
    cluster: &Cluster,
    assigned_bitrates: &[f64],
    realized_rates: &[Vec<f64>],
) -> Vec<bool> {
    let n = cluster.len();
    (0..n)
        .map(|rx| (rx..n).rev().all(|layer| realized_rates[rx][layer] >= assigned_bitrates[layer]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedCluster {
    pub cluster: Cluster,
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub alloc: PowerAllocation,
}

/// A partition of the users into clusters with equal bandwidth and power
/// shares and a power allocation inside every cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub clusters: Vec<PlannedCluster>,
}

impl ClusterPlan {
    /// Predicted per-user rates, indexed by user id (`n_users` long).
    pub fn rates(&self, noise: &crate::channel::NoiseConfig, gains: &[f64], n_users: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_users];
        for pc in &self.clusters {
            let noise_w = noise.noise_power(pc.bandwidth_hz);
            let r = sic_rates(&pc.cluster, &pc.alloc, pc.power_w, pc.bandwidth_hz, noise_w, gains);
            for (&u, rate) in pc.cluster.members().iter().zip(r) {
                out[u] = rate;
            }
        }
        out
    }

    /// Compact label, e.g. `{1,0:0.25/0.75}{2}` (strongest first).
    pub fn label(&self) -> String {
        let mut s = String::new();
        for pc in &self.clusters {
            s.push('{');
            let ids: Vec<String> = pc.cluster.members().iter().map(|u| u.to_string()).collect();
            s.push_str(&ids.join(","));
            if pc.cluster.len() > 1 {
                let fr: Vec<String> = pc.alloc.fractions.iter().map(|f| format!("{f:.4}")).collect();
                s.push(':');
                s.push_str(&fr.join("/"));
            }
            s.push('}');
        }
        s
    }
}

/// Number of (partition, power allocation) combinations without building
/// them.
pub fn count_plans(user_ids: &[UserId], cfg: &NomaConfig) -> Result<u128> {
    let partitions = enumerate_partitions(user_ids, cfg.max_cluster_size)?;
    let grid_sizes: Vec<u128> = (0..=cfg.max_cluster_size)
        .map(|s| power_grid(s, cfg.power_grid_step).len() as u128)
        .collect();
    Ok(partitions
        .iter()
        .map(|p| p.iter().map(|b| grid_sizes[b.len()]).product::<u128>())
        .sum())
}

/// Every cluster plan in canonical order: partitions in
/// `enumerate_partitions` order, then power allocations as an odometer
/// with the first cluster's allocation most significant.
pub fn enumerate_plans(
    user_ids: &[UserId],
    gains: &[f64],
    cfg: &NomaConfig,
    bandwidth_hz: f64,
) -> Result<Vec<ClusterPlan>> {
    let partitions = enumerate_partitions(user_ids, cfg.max_cluster_size)?;
    let grids: Vec<Vec<PowerAllocation>> = (0..=cfg.max_cluster_size)
        .map(|s| power_grid(s, cfg.power_grid_step))
        .collect();
    let mut plans = Vec::new();
    for partition in &partitions {
        let k = partition.len() as f64;
        let clusters: Vec<Cluster> = partition.iter().map(|b| Cluster::ordered(b, gains)).collect();
        let sizes: Vec<usize> = clusters.iter().map(|c| grids[c.len()].len()).collect();
        if sizes.contains(&0) {
            continue;
        }
        let mut idx = vec![0usize; clusters.len()];
        'odometer: loop {
            plans.push(ClusterPlan {
                clusters: clusters
                    .iter()
                    .zip(&idx)
                    .map(|(c, &i)| PlannedCluster {
                        cluster: c.clone(),
                        bandwidth_hz: bandwidth_hz / k,
                        power_w: cfg.total_power_w / k,
                        alloc: grids[c.len()][i].clone(),
                    })
                    .collect(),
            });
            for pos in (0..idx.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    continue 'odometer;
                }
                idx[pos] = 0;
            }
            break;
        }
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partitions_of_two_and_three() {
        let p = enumerate_partitions(&[1, 2], 2).unwrap();
        assert_eq!(p, vec![vec![vec![1], vec![2]], vec![vec![1, 2]]]);
        let p = enumerate_partitions(&[1, 2, 3], 2).unwrap();
        assert_eq!(
            p,
            vec![
                vec![vec![1], vec![2], vec![3]],
                vec![vec![1], vec![2, 3]],
                vec![vec![1, 2], vec![3]],
                vec![vec![1, 3], vec![2]],
            ]
        );
        assert_eq!(enumerate_partitions(&[1, 2, 3, 4], 2).unwrap().len(), 10);
    }

    #[test]
    fn partition_guard() {
        let err = enumerate_partitions(&[0, 1, 2, 3, 4, 5, 6], 2).unwrap_err();
        assert!(err.to_string().contains("decision space too large"));
        assert!(enumerate_partitions(&[], 2).is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(power_grid(1, 0.05), vec![PowerAllocation::full()]);
        let g2 = power_grid(2, 0.05);
        assert_eq!(g2.len(), 9);
        assert_relative_eq!(g2[0].fractions[1], 0.55, epsilon = 1e-12);
        assert_relative_eq!(g2[8].fractions[1], 0.95, epsilon = 1e-12);
        assert_eq!(power_grid(2, 0.25).len(), 1);
        let g3 = power_grid(3, 0.05);
        assert!(!g3.is_empty());
        for a in g2.iter().chain(&g3) {
            assert!((a.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(a.fractions.windows(2).all(|w| w[0] < w[1]));
            assert!(a.fractions.iter().all(|&f| f > 0.0 && f <= 1.0));
        }
    }

    #[test]
    fn two_user_rates_normalized() {
        let gains = [4.0, 1.0];
        let c = Cluster::ordered(&[1, 0], &gains);
        assert_eq!(c.members(), &[0, 1]);
        let alloc = PowerAllocation {
            fractions: vec![0.2, 0.8],
        };
        let r = sic_rates(&c, &alloc, 1.0, 1.0, 1.0, &gains);
        assert_relative_eq!(r[1], (1.0f64 + 0.8 / 1.2).log2(), epsilon = 1e-12);
        assert_relative_eq!(r[1], 0.737, epsilon = 1e-3);
        assert_relative_eq!(r[0], 0.848, epsilon = 1e-3);
        let bound = sum_rate_bound(&c, 1.0, 1.0, 1.0, &gains);
        assert_relative_eq!(bound, 5f64.log2(), epsilon = 1e-12);
        assert!(r[0] + r[1] <= bound);
    }

    #[test]
    fn degenerate_and_singleton_rates() {
        let gains = [4.0, 1.0];
        let c = Cluster::ordered(&[0, 1], &gains);
        let alloc = PowerAllocation {
            fractions: vec![0.0, 1.0],
        };
        let r = sic_rates(&c, &alloc, 1.0, 1.0, 1.0, &gains);
        assert_eq!(r[0], 0.0);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-12);

        let s = Cluster::ordered(&[0], &gains);
        let r = sic_rates(&s, &PowerAllocation::full(), 2.0, 3.0, 0.5, &gains);
        assert_relative_eq!(r[0], 3.0 * (1.0f64 + 2.0 * 4.0 / 0.5).log2(), epsilon = 1e-12);
        assert_eq!(r[0], sum_rate_bound(&s, 2.0, 3.0, 0.5, &gains));
    }

    #[test]
    fn equal_gains_order_by_id() {
        let c = Cluster::ordered(&[3, 1, 2], &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(c.members(), &[1, 2, 3]);
    }

    #[test]
    fn rate_monotone_in_own_fraction() {
        let gains = [10.0, 0.7];
        let c = Cluster::ordered(&[0, 1], &gains);
        let grid = power_grid(2, 0.05);
        let rates: Vec<_> = grid.iter().map(|a| sic_rates(&c, a, 1.0, 1.0, 1.0, &gains)).collect();
        for w in rates.windows(2) {
            assert!(w[1][1] >= w[0][1], "weak rate must grow with its fraction");
            assert!(w[1][0] <= w[0][0], "strong rate must shrink as its fraction falls");
        }
    }

    #[test]
    fn outcome_rules() {
        let c = Cluster::ordered(&[0, 1], &[4.0, 1.0]);
        // realized[rx][layer]; layer 0 = strong user, layer 1 = weak user.
        let ok = vec![vec![2.0, 2.0], vec![f64::NAN, 2.0]];
        assert_eq!(sic_decode_outcome(&c, &[1.0, 1.0], &ok), vec![true, true]);

        // Strong receiver cannot cancel the weak layer: its own layer is lost too.
        let strong_blocked = vec![vec![5.0, 0.5], vec![f64::NAN, 2.0]];
        assert_eq!(sic_decode_outcome(&c, &[1.0, 1.0], &strong_blocked), vec![false, true]);

        // Weak receiver misses its own layer; strong decodes both.
        let weak_fails = vec![vec![2.0, 2.0], vec![f64::NAN, 0.5]];
        assert_eq!(sic_decode_outcome(&c, &[1.0, 1.0], &weak_fails), vec![true, false]);
    }

    #[test]
    fn perfect_csi_decodes() {
        let gains = [3.0, 0.2, 1.1];
        let c = Cluster::ordered(&[0, 1, 2], &gains);
        for alloc in power_grid(3, 0.05) {
            let sched = sic_rates(&c, &alloc, 0.5, 2.0, 0.1, &gains);
            let realized = realized_layer_rates(&c, &alloc, 0.5, 2.0, 0.1, &gains);
            assert!(sic_decode_outcome(&c, &sched, &realized).iter().all(|&b| b));
        }
    }

    #[test]
    fn plan_enumeration_counts() {
        let cfg = NomaConfig::default();
        let ids = [0, 1, 2, 3];
        let gains = [1.0, 2.0, 3.0, 4.0];
        let plans = enumerate_plans(&ids, &gains, &cfg, 10e6).unwrap();
        // 1 all-singleton + 6 single pairs x 9 + 3 double pairs x 81.
        assert_eq!(plans.len(), 1 + 6 * 9 + 3 * 81);
        assert_eq!(count_plans(&ids, &cfg).unwrap(), plans.len() as u128);
        for p in &plans {
            let bw: f64 = p.clusters.iter().map(|c| c.bandwidth_hz).sum();
            let pw: f64 = p.clusters.iter().map(|c| c.power_w).sum();
            assert_relative_eq!(bw, 10e6, max_relative = 1e-12);
            assert_relative_eq!(pw, cfg.total_power_w, max_relative = 1e-12);
        }
    }
}
