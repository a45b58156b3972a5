use crate::error::{dim, param, Result};
use crate::grid::RasterGrid;

/// Cosine annealing restarted after periods `t0, t0 * mult, t0 * mult^2, ...`.
#[derive(Debug, Clone, Copy)]
pub struct CosineRestarts {
    pub base: f64,
    pub min: f64,
    pub t0: usize,
    pub mult: usize,
}

impl CosineRestarts {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut period = self.t0.max(1);
        let mut t = epoch;
        while t >= period {
            t -= period;
            period *= self.mult.max(1);
        }
        let phase = t as f64 / period as f64;
        self.min + 0.5 * (self.base - self.min) * (1.0 + (std::f64::consts::PI * phase).cos())
    }
}

/// Adam with decoupled weight decay over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1, beta2, eps }
    }

    /// One update of the entries where `active` is set; the rest stay put.
    pub fn step(&mut self, x: &mut [f64], grad: &[f64], lr: f64, weight_decay: f64, active: &[bool]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            if !active[i] {
                continue;
            }
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            x[i] -= lr * weight_decay * x[i];
            x[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

pub(crate) fn ema_update_in_place(shadow: &mut [f64], current: &[f64], alpha: f64) {
    for (s, &c) in shadow.iter_mut().zip(current) {
        *s = alpha * *s + (1.0 - alpha) * c;
    }
}

/// `alpha * shadow + (1 - alpha) * current` cellwise.
pub fn ema_update(shadow: &RasterGrid, current: &RasterGrid, alpha: f64) -> Result<RasterGrid> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(param(format!("EMA decay must lie in [0, 1), got {alpha}")));
    }
    if !shadow.geometry().same_shape(current.geometry()) {
        return Err(dim("EMA shadow and current state differ in shape"));
    }
    let mut out = shadow.clone();
    ema_update_in_place(out.values_mut(), current.values(), alpha);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;

    #[test]
    fn ema_examples() {
        let g = Geometry::unit(3, 3).unwrap();
        let zero = RasterGrid::zeros(g);
        let one = RasterGrid::filled(g, 1.0);
        assert_eq!(ema_update(&zero, &one, 0.0).unwrap(), one);
        let s = ema_update(&zero, &one, 0.999).unwrap();
        assert!((s.get(1, 1) - 0.001).abs() < 1e-15);
        assert!(ema_update(&zero, &one, 1.0).is_err());
    }

    #[test]
    fn ema_converges_geometrically() {
        let g = Geometry::unit(3, 3).unwrap();
        let target = RasterGrid::filled(g, 2.5);
        let mut s = RasterGrid::zeros(g);
        for n in 1..=3000 {
            s = ema_update(&s, &target, 0.999).unwrap();
            if n % 500 == 0 {
                let expected = 2.5 * (1.0 - 0.999f64.powi(n));
                assert!((s.get(0, 0) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restarts_follow_period_doubling() {
        let s = CosineRestarts { base: 1.0, min: 0.0, t0: 500, mult: 2 };
        assert_eq!(s.lr_at(0), 1.0);
        assert!((s.lr_at(250) - 0.5).abs() < 1e-12);
        assert_eq!(s.lr_at(500), 1.0);
        assert!((s.lr_at(1000) - 0.5).abs() < 1e-12);
        assert_eq!(s.lr_at(1500), 1.0);
        assert_eq!(s.lr_at(3500), 1.0);
        assert!(s.lr_at(3499) < 1e-5);
    }

    #[test]
    fn adam_minimises_a_quadratic_and_respects_frozen_cells() {
        let mut x = vec![5.0, -3.0, 7.0];
        let active = [true, true, false];
        let mut opt = Adam::new(3, 0.9, 0.999, 1e-8);
        for _ in 0..3000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * (v - 1.0)).collect();
            opt.step(&mut x, &g, 0.05, 0.0, &active);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
        assert_eq!(x[2], 7.0);
    }
}
