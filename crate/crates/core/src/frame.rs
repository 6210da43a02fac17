use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slotted frame geometry.
///
/// Serialized with the field names `tau_s`, `F`, `k_w`, `k_t`, `k_c`.
/// Deserialization validates the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrameConfig")]
pub struct FrameConfig {
    /// Slot duration in seconds.
    pub tau_s: f64,
    /// Slots per frame.
    #[serde(rename = "F")]
    pub slots: u32,
    /// Slots for the wake-up signal and radio activation of one device.
    pub k_w: u32,
    /// Slots for one woken device's data transmission.
    pub k_t: u32,
    /// Slots for the push control message (beacon).
    pub k_c: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrameConfig {
    tau_s: f64,
    #[serde(rename = "F")]
    slots: u32,
    k_w: u32,
    k_t: u32,
    k_c: u32,
}

impl TryFrom<RawFrameConfig> for FrameConfig {
    type Error = Error;

    fn try_from(raw: RawFrameConfig) -> Result<Self> {
        FrameConfig::new(raw.tau_s, raw.slots, raw.k_w, raw.k_t, raw.k_c)
    }
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig::DEFAULT
    }
}

impl FrameConfig {
    /// 0.25 ms slots, 101 slots per frame (25.25 ms), `k_w = 4`,
    /// `k_t = k_c = 1`.
    pub const DEFAULT: FrameConfig = FrameConfig {
        tau_s: 0.000_25,
        slots: 101,
        k_w: 4,
        k_t: 1,
        k_c: 1,
    };

    pub fn new(tau_s: f64, slots: u32, k_w: u32, k_t: u32, k_c: u32) -> Result<Self> {
        let cfg = FrameConfig {
            tau_s,
            slots,
            k_w,
            k_t,
            k_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s.is_finite() && self.tau_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_s must be finite and > 0, got {}",
                self.tau_s
            )));
        }
        for (name, v) in [("F", self.slots), ("k_w", self.k_w), ("k_t", self.k_t), ("k_c", self.k_c)] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        let need = self.k_c as u64 + self.k_w as u64 + self.k_t as u64 + 1;
        if (self.slots as u64) < need {
            return Err(Error::InvalidConfig(format!(
                "F = {} is too small: need F >= k_c + k_w + k_t + 1 = {need}",
                self.slots
            )));
        }
        Ok(())
    }

    /// Frame duration `tau * F` in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.tau_s * self.slots as f64
    }

    /// Slots consumed by serving one query (`k_w + k_t`).
    pub fn service_slots(&self) -> u32 {
        self.k_w + self.k_t
    }

    /// Push access slots left when reserving `q` query services. May be
    /// zero or negative for infeasible `q`.
    pub fn access_slots(&self, q: u32) -> i64 {
        self.slots as i64 - self.k_c as i64 - q as i64 * self.service_slots() as i64
    }

    /// Largest `q` that still leaves at least one push access slot.
    pub fn q_max(&self) -> u32 {
        (self.slots - self.k_c - 1) / self.service_slots()
    }

    pub fn split_for_q(&self, q: u32) -> Result<FrameSplit> {
        let k_a = self.access_slots(q);
        if k_a < 1 {
            return Err(Error::InvalidSplit {
                q,
                k_a,
                q_max: self.q_max(),
            });
        }
        let pull_slots = q as u64 * self.service_slots() as u64;
        let push_slots = self.k_c as u64 + k_a as u64;
        Ok(FrameSplit {
            q,
            k_a: k_a as u32,
            t_pull: pull_slots as f64 * self.tau_s,
            t_push: push_slots as f64 * self.tau_s,
        })
    }
}

/// Division of one frame between `q` scheduled query services and push
/// random access.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSplit {
    pub q: u32,
    /// Random-access slots for push packets.
    pub k_a: u32,
    /// Seconds reserved for pull services.
    pub t_pull: f64,
    /// Seconds for the control message plus random access.
    pub t_push: f64,
}
