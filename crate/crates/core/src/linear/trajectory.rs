use std::collections::VecDeque;

use crate::error::Result;
use crate::linear::{Observer, StateView};
use crate::model::{MemoryCap, Radii, RadialGrid};
use crate::norms::NormLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupTrigger {
    Threshold,
    NonFinite,
}

impl BlowupTrigger {
    pub fn name(&self) -> &'static str {
        match self {
            BlowupTrigger::Threshold => "threshold",
            BlowupTrigger::NonFinite => "nonfinite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blowup {
    pub t: f64,
    pub trigger: BlowupTrigger,
}

impl Blowup {
    pub fn threshold(t: f64) -> Self {
        Blowup { t, trigger: BlowupTrigger::Threshold }
    }

    pub fn non_finite(t: f64) -> Self {
        Blowup { t, trigger: BlowupTrigger::NonFinite }
    }
}

/// One stored time level. Arrays cover the causal window; nodes past their end are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub t: f64,
    pub step: usize,
    pub lo: usize,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

impl Level {
    pub fn from_view(s: &StateView<'_>) -> Self {
        Level {
            t: s.t,
            step: s.step,
            lo: s.lo,
            v: s.v.to_vec(),
            p: s.p.to_vec(),
        }
    }

    pub fn view(&self) -> StateView<'_> {
        StateView {
            t: self.t,
            step: self.step,
            lo: self.lo,
            v: &self.v,
            p: &self.p,
        }
    }

    #[inline]
    pub fn v_at(&self, i: usize) -> f64 {
        self.v.get(i).copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn p_at(&self, i: usize) -> f64 {
        self.p.get(i).copied().unwrap_or(0.0)
    }

    /// Zero-padded copy of v on `n` nodes.
    pub fn full_v(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.v_at(i)).collect()
    }

    pub fn full_p(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.p_at(i)).collect()
    }

    fn bytes(&self) -> u64 {
        16 * self.v.len() as u64 + 32
    }
}

/// Space-time record of (v, p), decimated by `stride`, plus the last three levels.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: RadialGrid,
    pub stride: usize,
    levels: Vec<Level>,
    ring: VecDeque<Level>,
    pub blowup: Option<Blowup>,
    pub norms: Option<NormLog>,
    bytes: u64,
    cap: MemoryCap,
}

impl Trajectory {
    /// Empty trajectory that fills itself as an [`Observer`].
    pub fn recorder(grid: &RadialGrid, stride: usize) -> Self {
        Trajectory {
            grid: grid.clone(),
            stride,
            levels: Vec::new(),
            ring: VecDeque::with_capacity(3),
            blowup: None,
            norms: None,
            bytes: 0,
            cap: MemoryCap::from_env(),
        }
    }

    pub fn with_cap(mut self, cap: MemoryCap) -> Self {
        self.cap = cap;
        self
    }

    /// Number of stored (decimated) levels.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, k: usize) -> &Level {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn times(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.t).collect()
    }

    /// The most recent levels, oldest first (at most three).
    pub fn ring(&self) -> impl ExactSizeIterator<Item = &Level> {
        self.ring.iter()
    }

    pub fn last(&self) -> Option<&Level> {
        self.ring.back()
    }

    /// Time up to which the record is valid.
    pub fn end_time(&self) -> f64 {
        self.last().map(|l| l.t).unwrap_or(0.0)
    }

    /// Stored level closest to `t`.
    pub fn level_near(&self, t: f64) -> Option<&Level> {
        let candidates = self.levels.iter().chain(self.ring.iter());
        candidates.min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Grows the grid record after the integrator moved to a larger grid.
    pub fn regrid(&mut self, grid: &RadialGrid) {
        self.grid = grid.clone();
    }
}

impl Observer for Trajectory {
    fn observe(&mut self, _radii: &Radii, state: &StateView<'_>) -> Result<()> {
        if self.ring.len() == 3 {
            self.ring.pop_front();
        }
        self.ring.push_back(Level::from_view(state));
        if self.stride > 0 && state.step % self.stride == 0 {
            let lv = Level::from_view(state);
            self.bytes += lv.bytes();
            self.cap.check("trajectory storage", self.bytes)?;
            self.levels.push(lv);
        }
        Ok(())
    }
}
