use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySample {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
}

/// Fixed-capacity chronological record of recent (t, x, v) samples, queried at
/// retarded times by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    ring: Vec<HistorySample>,
    head: usize,
    len: usize,
}

impl HistoryBuffer {
    /// Capacity ceil(span/dt) + 3, enough to bracket t − span after every push.
    pub fn for_span(span: f64, dt: f64) -> Self {
        let capacity = (span / dt).ceil().max(0.0) as usize + 3;
        Self::with_capacity(capacity)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        let empty = HistorySample { time: f64::NAN, position: f64::NAN, velocity: f64::NAN };
        Self { ring: vec![empty; capacity.max(2)], head: 0, len: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.ring.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn get(&self, i: usize) -> &HistorySample {
        let j = self.head + i;
        let cap = self.ring.len();
        &self.ring[if j >= cap { j - cap } else { j }]
    }

    /// Appends a sample, evicting the oldest when full. Times must increase.
    #[inline]
    pub fn push(&mut self, time: f64, position: f64, velocity: f64) {
        debug_assert!(self.len == 0 || self.get(self.len - 1).time < time);
        let cap = self.ring.len();
        let sample = HistorySample { time, position, velocity };
        if self.len == cap {
            self.ring[self.head] = sample;
            self.head = if self.head + 1 == cap { 0 } else { self.head + 1 };
        } else {
            let j = self.head + self.len;
            self.ring[if j >= cap { j - cap } else { j }] = sample;
            self.len += 1;
        }
    }

    pub fn earliest(&self) -> Option<f64> {
        (self.len > 0).then(|| self.get(0).time)
    }

    pub fn latest(&self) -> Option<HistorySample> {
        (self.len > 0).then(|| *self.get(self.len - 1))
    }

    pub fn samples(&self) -> impl Iterator<Item = &HistorySample> {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Linearly interpolated (x, v) at `time`.
    pub fn at(&self, time: f64) -> Result<(f64, f64)> {
        if self.len == 0 {
            return Err(Error::HistoryUnderrun { requested: time, earliest: f64::NAN, latest: f64::NAN });
        }
        let (first, last) = (*self.get(0), *self.get(self.len - 1));
        // absorbs rounding in accumulated step times
        let slack = 1e-9 * (last.time - first.time).abs().max(f64::MIN_POSITIVE);
        if !(time >= first.time - slack && time <= last.time + slack) {
            return Err(Error::HistoryUnderrun { requested: time, earliest: first.time, latest: last.time });
        }
        if self.len == 1 {
            return Ok((first.position, first.velocity));
        }
        // samples are near-uniform, so guess the bracket and correct locally
        let spacing = (last.time - first.time) / (self.len - 1) as f64;
        let mut i = (((time - first.time) / spacing).max(0.0) as usize).min(self.len - 2);
        while i < self.len - 2 && self.get(i + 1).time < time {
            i += 1;
        }
        while i > 0 && self.get(i).time > time {
            i -= 1;
        }
        let (a, b) = (self.get(i), self.get(i + 1));
        let w = (time - a.time) / (b.time - a.time);
        Ok((a.position + w * (b.position - a.position), a.velocity + w * (b.velocity - a.velocity)))
    }

    pub fn velocity_at(&self, time: f64) -> Result<f64> {
        self.at(time).map(|(_, v)| v)
    }
}
