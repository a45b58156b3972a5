//! Loss terms, their gradients with respect to the normalised residual, and
//! the epoch-dependent weighting.

mod objective;
mod terms;

pub use objective::{total_loss, LossBreakdown, Objective, Term, TermValues};
pub use terms::{
    loss_flow_tv, loss_laplacian, loss_nonneg, loss_prior, loss_radar, mass_residual, slope_weight,
};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Standard Huber penalty and its derivative.
#[inline]
pub fn huber(t: f64, delta: f64) -> (f64, f64) {
    if t.abs() <= delta {
        (0.5 * t * t, t)
    } else {
        (delta * (t.abs() - 0.5 * delta), delta * t.signum())
    }
}

/// `sqrt(t^2 + eta^2) - eta` and its derivative.
#[inline]
pub(crate) fn smooth_abs(t: f64, eta: f64) -> (f64, f64) {
    let s = (t * t + eta * eta).sqrt();
    (s - eta, t / s)
}

/// Weight that is 0 up to `start_frac * total`, rises linearly to `target` at
/// `end_frac * total` and stays there.
pub fn ramp_weight(epoch: usize, total: usize, target: f64, start_frac: f64, end_frac: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&start_frac) || !(start_frac < end_frac && end_frac <= 1.0) {
        return Err(param(format!("ramp needs 0 <= start < end <= 1, got {start_frac}..{end_frac}")));
    }
    if total == 0 {
        return Err(param("ramp needs at least one epoch"));
    }
    let frac = epoch as f64 / total as f64;
    let t = ((frac - start_frac) / (end_frac - start_frac)).clamp(0.0, 1.0);
    Ok(target * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothKernel {
    /// Odd window size in cells; 1 disables smoothing.
    pub size: usize,
    pub sigma: f64,
}

impl SmoothKernel {
    pub const IDENTITY: Self = Self { size: 1, sigma: 1.0 };
}

/// Kernel used on the mass residual before and after `switch_frac` of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSchedule {
    pub early: SmoothKernel,
    pub late: SmoothKernel,
    pub switch_frac: f64,
}

impl Default for SmoothingSchedule {
    fn default() -> Self {
        Self {
            early: SmoothKernel { size: 11, sigma: 3.5 },
            late: SmoothKernel { size: 15, sigma: 5.0 },
            switch_frac: 0.5,
        }
    }
}

impl SmoothingSchedule {
    pub fn none() -> Self {
        Self { early: SmoothKernel::IDENTITY, late: SmoothKernel::IDENTITY, switch_frac: 0.5 }
    }

    /// 0 for the early kernel, 1 for the late one.
    pub fn phase(&self, epoch: usize, total: usize) -> usize {
        usize::from(epoch as f64 >= self.switch_frac * total as f64)
    }

    pub fn kernel(&self, phase: usize) -> SmoothKernel {
        if phase == 0 {
            self.early
        } else {
            self.late
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_data: f64,
    /// Target weight of the mass term, reached at the end of its ramp.
    pub lambda_phys: f64,
    pub lambda_tv: f64,
    pub lambda_lap: f64,
    pub lambda_nonneg: f64,
    /// Target weight of the prior term, reached at the end of its ramp.
    pub lambda_prior: f64,
    pub delta_radar: f64,
    pub delta_mass: f64,
    pub delta_prior: f64,
    pub beta_perp: f64,
    pub beta_par: f64,
    /// Exponent `q` of the `(1 - c)^q` weight on the mass residual.
    pub mass_conf_exponent: f64,
    pub scales: Vec<usize>,
    /// Per-scale weights; uniform `1 / |scales|` when absent.
    pub scale_weights: Option<Vec<f64>>,
    pub smoothing: SmoothingSchedule,
    /// Added to `|v|` before normalising the flow direction (m/yr).
    pub flow_eps: f64,
    /// Smoothing of absolute values in the TV and Laplacian terms.
    pub abs_eta: f64,
    /// Lower bound on the radar confidence weight.
    pub radar_weight_floor: f64,
    /// Lower bound on the 90th-percentile prior slope.
    pub slope_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_data: 2.0,
            lambda_phys: 1e-2,
            lambda_tv: 5e-4,
            lambda_lap: 2e-4,
            lambda_nonneg: 1e-3,
            lambda_prior: 5e-3,
            delta_radar: 1.0,
            delta_mass: 5.0,
            delta_prior: 10.0,
            beta_perp: 0.9,
            beta_par: 0.35,
            mass_conf_exponent: 1.0,
            scales: vec![1, 2, 4],
            scale_weights: None,
            smoothing: SmoothingSchedule::default(),
            flow_eps: 1e-3,
            abs_eta: 1e-3,
            radar_weight_floor: 0.05,
            slope_floor: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda_data,
            self.lambda_phys,
            self.lambda_tv,
            self.lambda_lap,
            self.lambda_nonneg,
            self.lambda_prior,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(param("loss weights must be finite and non-negative"));
        }
        for (name, d) in [
            ("delta_radar", self.delta_radar),
            ("delta_mass", self.delta_mass),
            ("delta_prior", self.delta_prior),
            ("flow_eps", self.flow_eps),
            ("abs_eta", self.abs_eta),
            ("slope_floor", self.slope_floor),
        ] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(param(format!("{name} must be positive, got {d}")));
            }
        }
        if !(self.beta_perp > self.beta_par && self.beta_par >= 0.0) {
            return Err(param("flow TV needs beta_perp > beta_par >= 0"));
        }
        if !(1.0..=2.0).contains(&self.mass_conf_exponent) {
            return Err(param("mass confidence exponent must lie in [1, 2]"));
        }
        if !(0.0..=1.0).contains(&self.radar_weight_floor) {
            return Err(param("radar weight floor must lie in [0, 1]"));
        }
        if self.scales.is_empty() || self.scales.contains(&0) {
            return Err(param("pooling scales must be non-empty and positive"));
        }
        if let Some(w) = &self.scale_weights {
            if w.len() != self.scales.len() || w.iter().any(|x| !(*x >= 0.0)) {
                return Err(param("scale weights must match the scales and be non-negative"));
            }
        }
        for k in [self.smoothing.early, self.smoothing.late] {
            crate::grid::stencil::gaussian_kernel(k.size, k.sigma)?;
        }
        if !(0.0..=1.0).contains(&self.smoothing.switch_frac) {
            return Err(param("smoothing switch fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        match &self.scale_weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.scales.len() as f64; self.scales.len()],
        }
    }
}

/// Ramp fractions for the scheduled weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub phys_ramp_start: f64,
    pub phys_ramp_end: f64,
    pub prior_ramp_start: f64,
    pub prior_ramp_end: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { phys_ramp_start: 0.0, phys_ramp_end: 0.9, prior_ramp_start: 0.3, prior_ramp_end: 0.9 }
    }
}

/// Effective weight of every term at one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermWeights {
    pub radar: f64,
    pub mass: f64,
    pub flow_tv: f64,
    pub laplacian: f64,
    pub nonneg: f64,
    pub prior: f64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        ramp_weight(0, 1, 1.0, self.phys_ramp_start, self.phys_ramp_end)?;
        ramp_weight(0, 1, 1.0, self.prior_ramp_start, self.prior_ramp_end)?;
        Ok(())
    }

    pub fn weights(&self, cfg: &LossConfig, epoch: usize, total: usize) -> Result<TermWeights> {
        Ok(TermWeights {
            radar: cfg.lambda_data,
            mass: ramp_weight(epoch, total, cfg.lambda_phys, self.phys_ramp_start, self.phys_ramp_end)?,
            flow_tv: cfg.lambda_tv,
            laplacian: cfg.lambda_lap,
            nonneg: cfg.lambda_nonneg,
            prior: ramp_weight(epoch, total, cfg.lambda_prior, self.prior_ramp_start, self.prior_ramp_end)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_examples() {
        assert_eq!(huber(0.0, 1.0), (0.0, 0.0));
        assert_eq!(huber(0.5, 1.0).0, 0.125);
        assert_eq!(huber(3.0, 1.0), (2.5, 1.0));
        assert_eq!(huber(-3.0, 1.0), (2.5, -1.0));
    }

    #[test]
    fn ramp_examples() {
        assert_eq!(ramp_weight(0, 1000, 5e-3, 0.3, 0.9).unwrap(), 0.0);
        assert_eq!(ramp_weight(300, 1000, 5e-3, 0.3, 0.9).unwrap(), 0.0);
        assert!((ramp_weight(600, 1000, 5e-3, 0.3, 0.9).unwrap() - 2.5e-3).abs() < 1e-15);
        assert_eq!(ramp_weight(900, 1000, 5e-3, 0.3, 0.9).unwrap(), 5e-3);
        assert_eq!(ramp_weight(1000, 1000, 5e-3, 0.3, 0.9).unwrap(), 5e-3);
        assert_eq!(ramp_weight(900, 1000, 1e-2, 0.0, 0.9).unwrap(), 1e-2);
        assert!(ramp_weight(1, 10, 1.0, 0.9, 0.3).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        LossConfig::default().validate().unwrap();
        Schedule::default().validate().unwrap();
        let bad = LossConfig { beta_perp: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn smoothing_phase_switches_at_half() {
        let s = SmoothingSchedule::default();
        assert_eq!(s.phase(499, 1000), 0);
        assert_eq!(s.phase(500, 1000), 1);
        assert_eq!(s.kernel(1).size, 15);
    }
}
