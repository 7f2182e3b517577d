//! Video data plane: quality ladder, transmitter-side source queues,
//! whole-chunk delivery and client playback buffers.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// 1-based quality level index into a `QualityLadder`.
pub type LevelId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityLevel {
    pub bitrate_bps: f64,
    pub psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityLadder {
    levels: Vec<QualityLevel>,
}

impl Default for QualityLadder {
    fn default() -> Self {
        Self::new(vec![
            QualityLevel { bitrate_bps: 0.8e6, psnr_db: 32.0 },
            QualityLevel { bitrate_bps: 1.5e6, psnr_db: 36.0 },
            QualityLevel { bitrate_bps: 3.0e6, psnr_db: 40.0 },
            QualityLevel { bitrate_bps: 6.0e6, psnr_db: 44.0 },
        ])
        .expect("default ladder is valid")
    }
}

impl QualityLadder {
    pub fn new(levels: Vec<QualityLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("quality ladder must have at least one level".into()));
        }
        for l in &levels {
            if !(l.bitrate_bps > 0.0) || !l.psnr_db.is_finite() || !l.bitrate_bps.is_finite() {
                return Err(Error::Config(format!("invalid ladder level {l:?}")));
            }
        }
        for w in levels.windows(2) {
            if !(w[1].bitrate_bps > w[0].bitrate_bps && w[1].psnr_db > w[0].psnr_db) {
                return Err(Error::Config(
                    "ladder bitrate and psnr must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, id: LevelId) -> Option<&QualityLevel> {
        id.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn bitrate(&self, id: LevelId) -> f64 {
        self.levels[id - 1].bitrate_bps
    }

    pub fn psnr(&self, id: LevelId) -> f64 {
        self.levels[id - 1].psnr_db
    }

    pub fn top(&self) -> LevelId {
        self.levels.len()
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = LevelId> {
        1..=self.levels.len()
    }

    /// Highest level whose bitrate fits in `rate_bps`.
    pub fn highest_fitting(&self, rate_bps: f64) -> Option<LevelId> {
        self.ids().rev().find(|&l| self.bitrate(l) <= rate_bps)
    }

    pub fn levels(&self) -> &[QualityLevel] {
        &self.levels
    }
}

/// Seconds of content a slot can deliver: whole chunks only, capped by the
/// backlog.
pub fn deliverable_s(rate_bps: f64, bitrate_bps: f64, backlog_s: f64, slot_s: f64) -> f64 {
    let chunks = (rate_bps / bitrate_bps).floor().max(0.0);
    backlog_s.min(chunks * slot_s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceQueue {
    pub user_id: usize,
    pub backlog_s: f64,
    pub next_chunk_index: u64,
    pub remaining_video_s: f64,
}

impl SourceQueue {
    pub fn new(user_id: usize, video_length_s: f64) -> Self {
        Self {
            user_id,
            backlog_s: 0.0,
            next_chunk_index: 0,
            remaining_video_s: video_length_s,
        }
    }

    /// Live-feed arrival of up to `slot_s` seconds of new content.
    pub fn source_arrival(&mut self, slot_s: f64) {
        let add = slot_s.min(self.remaining_video_s).max(0.0);
        self.backlog_s += add;
        self.remaining_video_s -= add;
    }

    /// True once every second of the video has left the transmitter.
    pub fn drained(&self) -> bool {
        self.backlog_s <= 0.0 && self.remaining_video_s <= 0.0
    }

    /// Sends whole chunks at `level` over a link of `rate_bps`. A failed
    /// decode delivers nothing and leaves the backlog untouched.
    pub fn transmit(
        &mut self,
        slot: u64,
        ladder: &QualityLadder,
        level: Option<LevelId>,
        rate_bps: f64,
        slot_s: f64,
        decode_success: bool,
    ) -> ChunkReceipt {
        let delivered_s = match level {
            Some(l) if decode_success => deliverable_s(rate_bps, ladder.bitrate(l), self.backlog_s, slot_s),
            _ => 0.0,
        };
        self.backlog_s -= delivered_s;
        self.next_chunk_index += (delivered_s / slot_s).ceil() as u64;
        ChunkReceipt {
            user_id: self.user_id,
            slot,
            level,
            delivered_s,
            success: decode_success,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkReceipt {
    pub user_id: usize,
    pub slot: u64,
    pub level: Option<LevelId>,
    pub delivered_s: f64,
    pub success: bool,
}

/// What a client did with one slot of wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlayOutcome {
    /// Still filling the startup buffer.
    NotJoined,
    /// Startup threshold reached this slot; playback begins next slot.
    Joined,
    Played(LevelId),
    Stall,
    /// Everything has been played.
    Ended,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientBuffer {
    pub user_id: usize,
    pub buffered_s: f64,
    pub joined: bool,
    pub join_slot: Option<u64>,
    pub stall_count: u64,
    pub played_log: Vec<(u64, PlayOutcome)>,
    pub played_s: f64,
    /// Seconds played in the most recent slot.
    pub last_played_s: f64,
    pub delivered_s: f64,
    segments: VecDeque<(LevelId, f64)>,
    source_drained: bool,
}

impl ClientBuffer {
    pub fn new(user_id: usize) -> Self {
        Self {
            user_id,
            buffered_s: 0.0,
            joined: false,
            join_slot: None,
            stall_count: 0,
            played_log: Vec::new(),
            played_s: 0.0,
            last_played_s: 0.0,
            delivered_s: 0.0,
            segments: VecDeque::new(),
            source_drained: false,
        }
    }

    /// Level of the content at the head of the buffer, if any.
    pub fn head_level(&self) -> Option<LevelId> {
        self.segments.front().map(|&(l, _)| l)
    }

    /// Marks that no further content will ever arrive, so an empty buffer
    /// means the video ended rather than stalled.
    pub fn set_source_drained(&mut self, drained: bool) {
        self.source_drained = drained;
    }

    fn consume(&mut self, mut amount: f64) -> f64 {
        let mut taken = 0.0;
        while amount > 0.0 {
            let Some(front) = self.segments.front_mut() else {
                break;
            };
            let t = front.1.min(amount);
            front.1 -= t;
            amount -= t;
            taken += t;
            if front.1 <= 0.0 {
                self.segments.pop_front();
            }
        }
        taken
    }

    /// Advances playback by one slot.
    ///
    /// Order: join check on `buffered + delivered`, then playback from the
    /// buffer as it stood at the start of the slot, then the new delivery
    /// is appended. The joining slot itself plays nothing.
    pub fn playback_step(&mut self, receipt: &ChunkReceipt, slot_s: f64, startup_threshold_s: f64) -> PlayOutcome {
        let delivered = if receipt.success { receipt.delivered_s } else { 0.0 };
        let slot = receipt.slot;
        self.last_played_s = 0.0;

        let outcome = if !self.joined {
            let available = self.buffered_s + delivered;
            let short_video = self.source_drained && available > 0.0;
            if available >= startup_threshold_s || short_video {
                self.joined = true;
                self.join_slot = Some(slot);
                PlayOutcome::Joined
            } else {
                PlayOutcome::NotJoined
            }
        } else if self.buffered_s >= slot_s {
            let level = self.head_level().expect("buffered content has a level");
            let played = self.consume(slot_s);
            self.buffered_s -= played;
            self.played_s += played;
            self.last_played_s = played;
            PlayOutcome::Played(level)
        } else if self.source_drained && self.buffered_s <= 0.0 && delivered <= 0.0 {
            PlayOutcome::Ended
        } else if self.source_drained && self.buffered_s > 0.0 {
            let level = self.head_level().expect("buffered content has a level");
            let played = self.consume(self.buffered_s);
            self.buffered_s -= played;
            self.played_s += played;
            self.last_played_s = played;
            PlayOutcome::Played(level)
        } else {
            self.stall_count += 1;
            PlayOutcome::Stall
        };

        if delivered > 0.0 {
            let level = receipt.level.expect("delivered content has a level");
            self.segments.push_back((level, delivered));
            self.buffered_s += delivered;
            self.delivered_s += delivered;
        }
        self.played_log.push((slot, outcome));
        outcome
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityMetrics {
    /// `None` when nothing was ever played.
    pub mean_psnr_db: Option<f64>,
    pub psnr_sum_db: f64,
    pub stall_count: u64,
    /// `None` when the user never joined.
    pub join_time_slots: Option<u64>,
    pub played_slots: u64,
}

pub fn quality_metrics(played_log: &[(u64, PlayOutcome)], ladder: &QualityLadder) -> QualityMetrics {
    let mut psnr_sum = 0.0;
    let mut played = 0u64;
    let mut stalls = 0u64;
    let mut join = None;
    let first = played_log.first().map(|&(s, _)| s);
    for &(slot, outcome) in played_log {
        match outcome {
            PlayOutcome::Played(l) => {
                psnr_sum += ladder.psnr(l);
                played += 1;
            }
            PlayOutcome::Stall => stalls += 1,
            PlayOutcome::Joined => join = first.map(|f| slot - f),
            PlayOutcome::NotJoined | PlayOutcome::Ended => {}
        }
    }
    QualityMetrics {
        mean_psnr_db: (played > 0).then(|| psnr_sum / played as f64),
        psnr_sum_db: psnr_sum,
        stall_count: stalls,
        join_time_slots: join,
        played_slots: played,
    }
}
