//! Classical four-stage Runge–Kutta on flat `f64` buffers.
//!
//! Only the index ranges passed to [`Rk4::step`] are advanced; everything outside
//! them is left untouched in both the state and the stage buffer.

use std::ops::Range;

pub trait OdeSystem {
    /// Writes dy/dt at `(t, y)` into `dy` over the active ranges. `stage` is 0..4.
    fn rhs(&mut self, t: f64, stage: usize, y: &[f64], dy: &mut [f64]);
}

impl<F: FnMut(f64, usize, &[f64], &mut [f64])> OdeSystem for F {
    fn rhs(&mut self, t: f64, stage: usize, y: &[f64], dy: &mut [f64]) {
        self(t, stage, y, dy)
    }
}

/// Index (into the state buffer) of the first non-finite value produced by a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFinite(pub usize);

#[derive(Debug, Clone)]
pub struct Rk4 {
    stage: Vec<f64>,
    k: Vec<f64>,
    acc: Vec<f64>,
}

impl Rk4 {
    /// Buffers sized for `y`; the stage buffer starts as a copy of it.
    pub fn new(y: &[f64]) -> Self {
        Rk4 {
            stage: y.to_vec(),
            k: vec![0.0; y.len()],
            acc: vec![0.0; y.len()],
        }
    }

    /// Re-synchronises the stage buffer after the caller changed `y` (e.g. grew it).
    pub fn sync(&mut self, y: &[f64]) {
        self.stage.clear();
        self.stage.extend_from_slice(y);
        self.k.resize(y.len(), 0.0);
        self.acc.resize(y.len(), 0.0);
    }

    /// Copies `y` into the stage buffer over `range` (nodes that left the active ranges).
    pub fn sync_range(&mut self, y: &[f64], range: Range<usize>) {
        self.stage[range.clone()].copy_from_slice(&y[range]);
    }

    /// Advances `y` from `t` to `t + dt`. On failure `y` is left at its value at `t`.
    pub fn step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        t: f64,
        dt: f64,
        y: &mut Vec<f64>,
        ranges: &[Range<usize>],
    ) -> Result<(), NonFinite> {
        debug_assert_eq!(self.stage.len(), y.len());
        let half = 0.5 * dt;

        sys.rhs(t, 0, y, &mut self.k);
        for r in ranges {
            for i in r.clone() {
                let k = self.k[i];
                self.acc[i] = k;
                self.stage[i] = y[i] + half * k;
            }
        }
        self.check_stage(ranges)?;

        sys.rhs(t + half, 1, &self.stage, &mut self.k);
        for r in ranges {
            for i in r.clone() {
                let k = self.k[i];
                self.acc[i] += 2.0 * k;
                self.stage[i] = y[i] + half * k;
            }
        }
        self.check_stage(ranges)?;

        sys.rhs(t + half, 2, &self.stage, &mut self.k);
        for r in ranges {
            for i in r.clone() {
                let k = self.k[i];
                self.acc[i] += 2.0 * k;
                self.stage[i] = y[i] + dt * k;
            }
        }
        self.check_stage(ranges)?;

        sys.rhs(t + dt, 3, &self.stage, &mut self.k);
        let sixth = dt / 6.0;
        for r in ranges {
            for i in r.clone() {
                self.stage[i] = y[i] + sixth * (self.acc[i] + self.k[i]);
            }
        }
        self.check_stage(ranges)?;
        std::mem::swap(y, &mut self.stage);
        Ok(())
    }

    fn check_stage(&self, ranges: &[Range<usize>]) -> Result<(), NonFinite> {
        for r in ranges {
            // sum is non-finite iff some entry is (or the sum overflows, which we also treat as failure)
            let s: f64 = self.stage[r.clone()].iter().map(|x| x.abs()).sum();
            if !s.is_finite() {
                let idx = r.clone().find(|&i| !self.stage[i].is_finite()).unwrap_or(r.start);
                return Err(NonFinite(idx));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_linear_decay() {
        // y' = -y, y(0) = 1
        let mut errs = Vec::new();
        for &dt in &[0.1, 0.05] {
            let mut y = vec![1.0];
            let mut rk = Rk4::new(&y);
            let mut f = |_t: f64, _s: usize, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
            let steps = (1.0 / dt) as usize;
            for k in 0..steps {
                rk.step(&mut f, k as f64 * dt, dt, &mut y, &[0..1]).unwrap();
            }
            errs.push((y[0] - (-1.0f64).exp()).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.8 && order < 4.2, "order {order}");
    }

    #[test]
    fn untouched_outside_ranges() {
        let mut y = vec![1.0, 7.0, 1.0];
        let mut rk = Rk4::new(&y);
        let mut f = |_t: f64, _s: usize, _y: &[f64], dy: &mut [f64]| {
            dy[0] = 1.0;
            dy[2] = 1.0;
        };
        rk.step(&mut f, 0.0, 0.5, &mut y, &[0..1, 2..3]).unwrap();
        assert_eq!(y[1], 7.0);
        assert!((y[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn reports_non_finite_and_keeps_state() {
        let mut y = vec![1.0];
        let mut rk = Rk4::new(&y);
        let mut f = |_t: f64, _s: usize, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * 1e300;
        let err = rk.step(&mut f, 0.0, 1e10, &mut y, &[0..1]).unwrap_err();
        assert_eq!(err, NonFinite(0));
        assert_eq!(y[0], 1.0);
    }
}
