use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.dim() != g.dim() {
                return Err(Error::Shape(format!(
                    "gradient {:?} vs parameter {:?}",
                    g.dim(),
                    p.dim()
                )));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.raw_dim())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.dim() != p.dim())
        {
            return Err(Error::Shape("parameter set changed between steps".into()));
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    let g = g + c.weight_decay * *p;
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= c.lr * mhat / (vhat.sqrt() + c.eps);
                });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            factor: 0.6,
            patience: 10,
            min_lr: 5e-6,
        }
    }
}

/// Reduce-on-plateau for a metric to minimize. A metric counts as an
/// improvement only when strictly below the best seen so far; once `patience`
/// consecutive epochs fail to improve the rate is multiplied by `factor`
/// (floored at `min_lr`) and the counter restarts.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub config: PlateauConfig,
    lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, config: PlateauConfig) -> Self {
        Self {
            config,
            lr: lr.max(config.min_lr),
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, metric: f64) -> Result<f64> {
        if metric.is_nan() {
            return Err(Error::Numeric("NaN validation metric".into()));
        }
        if metric < self.best {
            self.best = metric;
            self.wait = 0;
        } else {
            self.wait += 1;
            if self.wait >= self.config.patience {
                self.lr = (self.lr * self.config.factor).max(self.config.min_lr);
                self.wait = 0;
            }
        }
        Ok(self.lr)
    }
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Records a metric; returns `(improved, should_stop)`.
    pub fn update(&mut self, metric: f64) -> (bool, bool) {
        if metric < self.best {
            self.best = metric;
            self.wait = 0;
            (true, false)
        } else {
            self.wait += 1;
            (false, self.wait >= self.patience)
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![array![[1.0, -2.0]], array![[3.0]]];
        let before = p.clone();
        let g = vec![array![[0.0, 0.0]], array![[0.0]]];
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(AdamConfig {
            lr: 0.1,
            ..Default::default()
        });
        let mut p = vec![array![[0.0]]];
        adam.step(&mut p, &[array![[1.0]]]).unwrap();
        // mhat = 1, vhat = 1, step = lr / (1 + eps)
        assert!((p[0][[0, 0]] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn step_counter_increases() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![array![[0.5]]];
        adam.step(&mut p, &[array![[1.0]]]).unwrap();
        assert_eq!(adam.steps(), 1);
        adam.step(&mut p, &[array![[1.0]]]).unwrap();
        assert_eq!(adam.steps(), 2);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = vec![array![[0.5, 1.0]]];
        assert!(adam.step(&mut p, &[array![[1.0]]]).is_err());
        assert!(adam.step(&mut p, &[]).is_err());
    }

    #[test]
    fn plateau_reduces_after_patience() {
        let mut s = PlateauScheduler::new(1e-4, PlateauConfig::default());
        let mut lrs = Vec::new();
        for _ in 0..11 {
            lrs.push(s.step(1.0).unwrap());
        }
        assert!(lrs[..10].iter().all(|&lr| lr == 1e-4));
        assert!((lrs[10] - 6e-5).abs() < 1e-18);
    }

    #[test]
    fn plateau_constant_while_improving() {
        let mut s = PlateauScheduler::new(1e-4, PlateauConfig::default());
        for i in 0..50 {
            assert_eq!(s.step(100.0 - i as f64).unwrap(), 1e-4);
        }
    }

    #[test]
    fn plateau_floor() {
        let mut s = PlateauScheduler::new(5e-6, PlateauConfig::default());
        for _ in 0..20 {
            assert_eq!(s.step(1.0).unwrap(), 5e-6);
        }
        assert!(s.step(f64::NAN).is_err());
    }

    #[test]
    fn plateau_is_non_increasing() {
        let mut s = PlateauScheduler::new(1e-3, PlateauConfig::default());
        let mut prev = s.lr();
        for i in 0..300 {
            let metric = ((i * 7919) % 13) as f64;
            let lr = s.step(metric).unwrap();
            assert!(lr <= prev && lr >= 5e-6);
            prev = lr;
        }
    }

    #[test]
    fn early_stopping_patience() {
        let mut e = EarlyStopping::new(3);
        assert_eq!(e.update(1.0), (true, false));
        assert_eq!(e.update(1.0), (false, false));
        assert_eq!(e.update(2.0), (false, false));
        assert_eq!(e.update(1.5), (false, true));
    }
}
