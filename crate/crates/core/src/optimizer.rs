//! ADAM with piecewise-constant learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ADAM moment buffers and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One bias-corrected ADAM update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch: state {}, params {}, grad {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient component {i}")));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powf(self.step as f64);
        let bc2 = 1.0 - self.beta2.powf(self.step as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    state.step(params, grad, lr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub epochs: usize,
    pub lr: f64,
}

/// Ordered `(epochs, learning rate)` segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("schedule has no segments".into()));
        }
        if let Some(s) = segments.iter().find(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", s.lr)));
        }
        Ok(Self { segments })
    }

    pub fn constant(epochs: usize, lr: f64) -> Result<Self> {
        Self::new(vec![Segment { epochs, lr }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_epochs(&self) -> usize {
        self.segments.iter().map(|s| s.epochs).sum()
    }

    /// Learning rate at a zero-based epoch index (last rate past the end).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut acc = 0;
        for s in &self.segments {
            acc += s.epochs;
            if epoch < acc {
                return s.lr;
            }
        }
        self.segments.last().map(|s| s.lr).unwrap_or(0.0)
    }

    /// Every epoch's learning rate, in order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| std::iter::repeat_n(s.lr, s.epochs))
    }

    /// Same segments with every epoch count multiplied by `factor` (at least one epoch each).
    pub fn scaled(&self, factor: f64) -> Schedule {
        Schedule {
            segments: self
                .segments
                .iter()
                .map(|s| Segment { epochs: ((s.epochs as f64 * factor).round() as usize).max(1), lr: s.lr })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainingRole {
    SourceFourier,
    FineTuneFourier,
    SourceBaseline,
    FineTuneBaseline,
}

pub fn schedule_for(role: TrainingRole) -> Schedule {
    let segs = match role {
        TrainingRole::SourceFourier => vec![Segment { epochs: 300, lr: 10.0 }, Segment { epochs: 300, lr: 1e-3 }],
        TrainingRole::FineTuneFourier => vec![Segment { epochs: 300, lr: 0.1 }],
        TrainingRole::SourceBaseline => vec![Segment { epochs: 100_000, lr: 1e-3 }],
        TrainingRole::FineTuneBaseline => vec![Segment { epochs: 50_000, lr: 1e-3 }],
    };
    Schedule { segments: segs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut st = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 3.5];
        adam_step(&mut st, &mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn first_step_is_normalised() {
        for &g in &[0.37, -12.0, 4e5] {
            let mut st = AdamState::new(1);
            let mut p = vec![0.0];
            st.step(&mut p, &[g], 0.01).unwrap();
            let expect = -0.01 * g / (g.abs() + 1e-8);
            assert!((p[0] - expect).abs() < 1e-15, "{} vs {}", p[0], expect);
        }
    }

    #[test]
    fn scalar_quadratic_converges() {
        let mut st = AdamState::new(1);
        let mut x = vec![0.0];
        for _ in 0..500 {
            let g = 2.0 * (x[0] - 3.0);
            st.step(&mut x, &[g], 0.1).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut st = AdamState::new(2);
        let mut p = vec![0.0; 2];
        assert!(st.step(&mut p, &[1.0], 0.1).is_err());
        assert!(matches!(st.step(&mut p, &[f64::NAN, 1.0], 0.1), Err(Error::Divergence(_))));
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut st = AdamState::new(2);
            let mut p = vec![1.0, -1.0];
            for k in 0..200 {
                let g = [p[0] * 3.0 + (k as f64).sin(), p[1] - 0.5];
                st.step(&mut p, &g, 0.05).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn monotone_on_convex_quadratic_after_warmup() {
        // f(x) = sum_i c_i (x_i - 1)^2
        let c = [1.0, 4.0, 0.25];
        let f = |x: &[f64]| x.iter().zip(&c).map(|(x, c)| c * (x - 1.0).powi(2)).sum::<f64>();
        for &lr in &[0.001, 0.01] {
            let mut st = AdamState::new(3);
            let mut x = vec![-3.0, 5.0, 2.0];
            let mut prev = f(&x);
            for k in 0..300 {
                let g: Vec<f64> = x.iter().zip(&c).map(|(x, c)| 2.0 * c * (x - 1.0)).collect();
                st.step(&mut x, &g, lr).unwrap();
                let cur = f(&x);
                if k >= 10 {
                    assert!(cur <= prev, "lr {lr} step {k}: {cur} > {prev}");
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn default_schedules() {
        let s = schedule_for(TrainingRole::SourceFourier);
        assert_eq!(s.total_epochs(), 600);
        assert_eq!(s.lr_at(0), 10.0);
        assert_eq!(s.lr_at(299), 10.0);
        assert_eq!(s.lr_at(300), 1e-3);
        let f = schedule_for(TrainingRole::FineTuneFourier);
        assert_eq!(f.total_epochs(), 300);
        assert!(f.iter().all(|lr| lr == 0.1));
        let b = schedule_for(TrainingRole::SourceBaseline);
        assert_eq!(b.total_epochs(), 100_000);
        assert_eq!(b.segments().len(), 1);
        assert_eq!(b.lr_at(50_000), 1e-3);
        assert_eq!(schedule_for(TrainingRole::FineTuneBaseline).total_epochs(), 50_000);
        assert_eq!(s.iter().count(), 600);
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::constant(10, 0.0).is_err());
        assert_eq!(Schedule::constant(10, 0.5).unwrap().scaled(0.1).total_epochs(), 1);
    }
}
