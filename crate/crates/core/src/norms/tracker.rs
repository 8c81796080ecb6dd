use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linear::{Observer, StateView};
use crate::model::{velocity_fields, Radii, RadialGrid};
use crate::norms::fields::{build_fields, multi_indices};
use crate::norms::{for_each_cell, NormConfig};

/// Norm values at one time level. Space-time quantities are integrals of squares over [0, t].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelNorms {
    pub t: f64,
    /// ‖∂^α u′(t)‖ per multi-index.
    pub energy: Vec<f64>,
    /// ∫₀ᵗ ‖(1+r)^{-1/2} ∂^α u′‖² ds per multi-index.
    pub kss: Vec<f64>,
    /// ∫₀ᵗ ‖u′‖² ds.
    pub spacetime: f64,
    /// ∫₀ᵗ ∫_{r<1} |u′|².
    pub ball: f64,
    /// ∫_{r<R} |u′(t)|² per local radius.
    pub local_energy: Vec<f64>,
    /// ∫₀ᵗ ∫_{r<R} |u′|² per local radius.
    pub local_spacetime: Vec<f64>,
    /// ∫₀ᵗ ∫_{r<R} u² per local radius.
    pub local_u2: Vec<f64>,
    /// ∫₀ᵗ ∫_{R_j ≤ r < b·R_j} r⁻¹|u′|² per dyadic annulus.
    pub dyadic: Vec<f64>,
}

impl LevelNorms {
    /// Σ_α (‖∂^α u′(t)‖ + (ln(2+t))^{-1/2} ‖(1+r)^{-1/2} ∂^α u′‖_{L²([0,t])}).
    pub fn weighted_sum(&self, log_shift: f64) -> f64 {
        let l = (log_shift + self.t).ln();
        self.energy.iter().zip(&self.kss).map(|(e, k)| e + (k / l).sqrt()).sum()
    }
}

/// Dyadic decomposition of the weighted space-time norm at time t (all entries are norms).
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicProfile {
    pub t: f64,
    /// ‖u′‖ over {0 ≤ s ≤ t, r < 1}.
    pub ball: f64,
    /// (R, ‖r^{-1/2} u′‖ over {0 ≤ s ≤ t, r ∈ [R, 2R)}) for R ≤ max(t, 1).
    pub annuli: Vec<(f64, f64)>,
    /// Same norm over the annuli with R > t.
    pub outer: f64,
    /// ‖(1+r)^{-1/2} u′‖ over {0 ≤ s ≤ t}.
    pub weighted: f64,
}

impl DyadicProfile {
    /// ball² + Σ annuli² + outer².
    pub fn pieces_squared(&self) -> f64 {
        self.ball * self.ball + self.annuli.iter().map(|a| a.1 * a.1).sum::<f64>() + self.outer * self.outer
    }
}

/// Per-level norm rows produced by a [`NormTracker`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormLog {
    pub config: NormConfig,
    pub indices: Vec<(usize, usize)>,
    pub rows: Vec<LevelNorms>,
    /// Inner radius of each dyadic annulus.
    pub annulus_inner: Vec<f64>,
}

impl NormLog {
    /// Last row at or before `t`.
    pub fn row_at(&self, t: f64) -> Option<&LevelNorms> {
        let k = self.rows.partition_point(|r| r.t <= t + 1e-9 * t.max(1.0));
        if k == 0 {
            None
        } else {
            Some(&self.rows[k - 1])
        }
    }

    pub fn last(&self) -> Option<&LevelNorms> {
        self.rows.last()
    }

    /// sup over rows with t ≤ t_max of [`LevelNorms::weighted_sum`].
    pub fn m_norm(&self, t_max: f64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.t <= t_max + 1e-9 * t_max.max(1.0))
            .map(|r| r.weighted_sum(self.config.log_shift))
            .fold(0.0, f64::max)
    }

    /// Σ_α ‖∂^α u′(0)‖.
    pub fn data_norm(&self) -> f64 {
        self.rows.first().map(|r| r.energy.iter().sum()).unwrap_or(0.0)
    }

    pub fn dyadic_profile(&self, t: f64) -> Option<DyadicProfile> {
        let row = self.row_at(t)?;
        let cut = t.max(1.0);
        let mut annuli = Vec::new();
        let mut outer = 0.0;
        for (j, &val) in row.dyadic.iter().enumerate() {
            let radius = self.annulus_inner[j];
            if radius <= cut {
                annuli.push((radius, val.sqrt()));
            } else {
                outer += val;
            }
        }
        Some(DyadicProfile {
            t: row.t,
            ball: row.ball.sqrt(),
            annuli,
            outer: outer.sqrt(),
            weighted: row.kss[0].sqrt(),
        })
    }
}

#[derive(Debug, Clone)]
struct Slot {
    t: f64,
    step: usize,
    v: Vec<f64>,
    p: Vec<f64>,
    ut: Vec<f64>,
    ur: Vec<f64>,
}

/// Node and cell weights for one grid size.
#[derive(Debug, Clone, Default)]
struct Weights {
    kss_node: Vec<f64>,
    kss_mid: Vec<f64>,
    inv_node: Vec<f64>,
    inv_mid: Vec<f64>,
    /// Annulus index of each cell (by midpoint), or `usize::MAX` inside the unit ball.
    bucket: Vec<usize>,
    mid: Vec<f64>,
    annulus_inner: Vec<f64>,
}

impl Weights {
    fn build(radii: &Radii, cfg: &NormConfig) -> Self {
        let n = radii.len();
        let half = 0.5 * radii.dr;
        let mid: Vec<f64> = radii.r.iter().map(|r| r + half).collect();
        let r_top = radii.r[n - 1] + radii.dr;
        let mut annulus_inner = Vec::new();
        let mut radius = 1.0;
        while radius < r_top {
            annulus_inner.push(radius);
            radius *= cfg.dyadic_base;
        }
        let bucket = mid
            .iter()
            .map(|&m| {
                if m < 1.0 {
                    usize::MAX
                } else {
                    let j = annulus_inner.partition_point(|&a| a <= m);
                    j.saturating_sub(1)
                }
            })
            .collect();
        let ws = cfg.weight_shift;
        Weights {
            kss_node: radii.r.iter().map(|r| 1.0 / (ws + r)).collect(),
            kss_mid: mid.iter().map(|r| 1.0 / (ws + r)).collect(),
            inv_node: radii.r.iter().map(|&r| if r > 0.0 { 1.0 / r } else { 0.0 }).collect(),
            inv_mid: mid.iter().map(|r| 1.0 / r).collect(),
            bucket,
            mid,
            annulus_inner,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Totals {
    kss: Vec<f64>,
    spacetime: f64,
    ball: f64,
    local_spacetime: Vec<f64>,
    local_u2: Vec<f64>,
    dyadic: Vec<f64>,
}

/// Streaming norm computation, fed one level at a time as an [`Observer`].
///
/// With order N ≥ 1 time derivatives use centred three-level differences (one-sided
/// four-level stencils at the first and last level), so rows lag the input by one level
/// and the last row appears in [`NormTracker::finish`].
#[derive(Debug, Clone)]
pub struct NormTracker {
    cfg: NormConfig,
    indices: Vec<(usize, usize)>,
    dt: f64,
    radii: Radii,
    weights: Weights,
    slots: VecDeque<Slot>,
    count: usize,
    processed: usize,
    totals: Totals,
    rows: Vec<LevelNorms>,
}

impl NormTracker {
    pub fn new(grid: &RadialGrid, cfg: NormConfig) -> Self {
        let indices = multi_indices(cfg.order.min(crate::norms::MAX_ORDER));
        let radii = Radii::new(grid);
        let weights = Weights::build(&radii, &cfg);
        let totals = Totals {
            kss: vec![0.0; indices.len()],
            local_spacetime: vec![0.0; cfg.local_radii.len()],
            local_u2: vec![0.0; cfg.local_radii.len()],
            dyadic: vec![0.0; weights.annulus_inner.len()],
            ..Default::default()
        };
        NormTracker {
            cfg,
            indices,
            dt: grid.dt,
            radii,
            weights,
            slots: VecDeque::with_capacity(4),
            count: 0,
            processed: 0,
            totals,
            rows: Vec::new(),
        }
    }

    pub fn config(&self) -> &NormConfig {
        &self.cfg
    }

    /// Rows produced so far.
    pub fn rows(&self) -> &[LevelNorms] {
        &self.rows
    }

    /// Flushes the last level and returns the log.
    pub fn finish(mut self) -> Result<NormLog> {
        self.cfg.validate()?;
        if self.count > self.processed {
            if self.count < 4 {
                return Err(Error::InvalidSequence(format!(
                    "derivative order {} needs at least 4 levels, got {}",
                    self.cfg.order, self.count
                )));
            }
            let last = self.slots.len() - 1;
            self.process(last, true)?;
        }
        Ok(NormLog {
            config: self.cfg,
            indices: self.indices,
            rows: self.rows,
            annulus_inner: self.weights.annulus_inner,
        })
    }

    fn regrid(&mut self, radii: &Radii) {
        self.radii = radii.clone();
        self.weights = Weights::build(radii, &self.cfg);
        self.totals.dyadic.resize(self.weights.annulus_inner.len(), 0.0);
    }

    /// Computes the row of the level stored in `slots[idx]` and advances the totals.
    fn process(&mut self, idx: usize, keep: bool) -> Result<()> {
        let level = self.processed;
        let dt = self.dt;
        let radii = &self.radii;
        let w = &self.weights;
        let slot = &self.slots[idx];
        let nl = self.cfg.local_radii.len();
        let scale = 4.0 * PI * radii.dr;

        let (mut e0, mut k0) = (0.0, 0.0);
        let mut ball = 0.0;
        let mut local_e = vec![0.0; nl];
        let mut local_u2 = vec![0.0; nl];
        let mut dyadic = vec![0.0; w.annulus_inner.len()];
        let local_radii = &self.cfg.local_radii;
        let v = &slot.v;
        for_each_cell(radii, &slot.v, &slot.p, |i, a, b, g| {
            let e = a + b + g;
            e0 += e;
            k0 += w.kss_node[i] * a + w.kss_node[i + 1] * b + w.kss_mid[i] * g;
            let mid = w.mid[i];
            let bucket = w.bucket[i];
            if bucket == usize::MAX {
                ball += e;
            } else {
                dyadic[bucket] += w.inv_node[i] * a + w.inv_node[i + 1] * b + w.inv_mid[i] * g;
            }
            let u2 = 0.5 * (v[i] * v[i] + v[i + 1] * v[i + 1]);
            for (k, &rad) in local_radii.iter().enumerate() {
                if mid < rad {
                    local_e[k] += e;
                    local_u2[k] += u2;
                }
            }
        });
        let mut energy2 = vec![e0 * scale];
        let mut kss_density = vec![k0 * scale];

        if self.cfg.order > 0 {
            let (levels, pos) = self.stencil(idx, level);
            let refs: Vec<(&[f64], &[f64])> = levels
                .iter()
                .map(|&k| (self.slots[k].ut.as_slice(), self.slots[k].ur.as_slice()))
                .collect();
            let fields = build_fields(radii, &refs, pos, dt, self.cfg.order)
                .ok_or_else(|| Error::Internal("missing time stencil".into()))?;
            for f in fields.iter().skip(1) {
                let (mut e, mut k) = (0.0, 0.0);
                let m = f.ut.len().min(radii.len());
                for i in 0..m {
                    let r = radii.r[i];
                    let d = (f.ut[i] * f.ut[i] + f.ur[i] * f.ur[i]) * r * r;
                    let tw = if i == 0 || i + 1 == radii.len() { 0.5 } else { 1.0 };
                    e += tw * d;
                    k += tw * d * w.kss_node[i];
                }
                energy2.push(e * scale);
                kss_density.push(k * scale);
            }
        }

        let t = slot.t;
        let tot = &mut self.totals;
        if keep || level % self.cfg.keep_every == 0 {
            self.rows.push(LevelNorms {
                t,
                energy: energy2.iter().map(|x| x.sqrt()).collect(),
                kss: tot.kss.clone(),
                spacetime: tot.spacetime,
                ball: tot.ball,
                local_energy: local_e.iter().map(|x| x * scale).collect(),
                local_spacetime: tot.local_spacetime.clone(),
                local_u2: tot.local_u2.clone(),
                dyadic: tot.dyadic.clone(),
            });
        }
        for (acc, d) in tot.kss.iter_mut().zip(&kss_density) {
            *acc += dt * d;
        }
        tot.spacetime += dt * energy2[0];
        tot.ball += dt * ball * scale;
        for k in 0..nl {
            tot.local_spacetime[k] += dt * local_e[k] * scale;
            tot.local_u2[k] += dt * local_u2[k] * scale;
        }
        for (acc, d) in tot.dyadic.iter_mut().zip(&dyadic) {
            *acc += dt * d * scale;
        }
        self.processed += 1;
        Ok(())
    }

    /// Slot indices of the time stencil for the level in `slots[idx]`, and its position.
    fn stencil(&self, idx: usize, level: usize) -> (Vec<usize>, usize) {
        let len = self.slots.len();
        if level == 0 {
            ((0..4).collect(), 0)
        } else if idx + 1 < len {
            ((idx - 1..=idx + 1).collect(), 1)
        } else {
            ((len - 4..len).collect(), 3)
        }
    }
}

impl Observer for NormTracker {
    fn observe(&mut self, radii: &Radii, state: &StateView<'_>) -> Result<()> {
        if let Some(prev) = self.slots.back() {
            if state.step != prev.step + 1 {
                return Err(Error::InvalidSequence(format!(
                    "norm tracker expected step {}, got {}",
                    prev.step + 1,
                    state.step
                )));
            }
        }
        if radii.len() != self.radii.len() {
            self.regrid(radii);
        }
        let m = state.v.len();
        let (mut ut, mut ur) = (Vec::new(), Vec::new());
        if self.cfg.order > 0 {
            let mut u = vec![0.0; m];
            ut = vec![0.0; m];
            ur = vec![0.0; m];
            velocity_fields(radii, state.v, state.p, &mut u, &mut ut, &mut ur);
        }
        let cap = if self.cfg.order == 0 { 1 } else { 4 };
        if self.slots.len() == cap {
            self.slots.pop_front();
        }
        self.slots.push_back(Slot {
            t: state.t,
            step: state.step,
            v: state.v.to_vec(),
            p: state.p.to_vec(),
            ut,
            ur,
        });
        self.count += 1;
        if self.cfg.order == 0 {
            self.process(0, false)?;
        } else if self.count == 4 {
            for idx in 0..3 {
                self.process(idx, false)?;
            }
        } else if self.count > 4 {
            self.process(2, false)?;
        }
        Ok(())
    }
}
