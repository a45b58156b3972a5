use serde::{Deserialize, Serialize};

use crate::data::Pick;
use crate::error::{param, Error, Result};

/// Exponential semivariogram `nugget + sill * (1 - exp(-d / range))`, zero at
/// the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub nugget: f64,
    /// Partial sill.
    pub sill: f64,
    pub range: f64,
}

impl VariogramModel {
    pub fn new(nugget: f64, sill: f64, range: f64) -> Result<Self> {
        if !(nugget >= 0.0 && sill > 0.0 && range > 0.0) || !(nugget + sill + range).is_finite() {
            return Err(param(format!("invalid variogram nugget={nugget} sill={sill} range={range}")));
        }
        Ok(Self { nugget, sill, range })
    }

    pub fn gamma(&self, d: f64) -> f64 {
        if d <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * (1.0 - (-d / self.range).exp())
        }
    }

    /// `C(d) = nugget + sill - gamma(d)`, so `C(0)` is the total sill.
    pub fn covariance(&self, d: f64) -> f64 {
        self.nugget + self.sill - self.gamma(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Mean separation of the pairs in the bin.
    pub lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

/// Cressie–Hawkins robust semivariogram over `bins` equal lag classes up to
/// `max_lag`. Empty classes are left out.
pub fn empirical_variogram(points: &[Pick], bins: usize, max_lag: f64) -> Result<Vec<VariogramBin>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("variogram needs at least 2 points, got {}", points.len())));
    }
    if bins == 0 || !(max_lag > 0.0) {
        return Err(param("variogram needs at least one bin and a positive max lag"));
    }
    let width = max_lag / bins as f64;
    let mut root_sum = vec![0.0; bins];
    let mut lag_sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a.x - b.x).hypot(a.y - b.y);
            if d > max_lag {
                continue;
            }
            let k = ((d / width) as usize).min(bins - 1);
            root_sum[k] += (a.bed - b.bed).abs().sqrt();
            lag_sum[k] += d;
            count[k] += 1;
        }
    }
    Ok((0..bins)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let n = count[k] as f64;
            let m = root_sum[k] / n;
            VariogramBin { lag: lag_sum[k] / n, gamma: m.powi(4) / (0.914 + 0.988 / n), pairs: count[k] }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Weighted least-squares objective at the fit.
    pub loss: f64,
    /// Set when every bin had zero semivariance and a floor model was returned.
    pub degenerate: bool,
}

const SILL_FLOOR: f64 = 1e-9;

/// `sum N_h (gamma_hat - gamma)^2 / gamma^2` over bins.
pub fn wls_loss(bins: &[VariogramBin], m: &VariogramModel) -> f64 {
    bins.iter()
        .map(|b| {
            let g = m.gamma(b.lag).max(f64::MIN_POSITIVE);
            b.pairs as f64 * ((b.gamma - g) / g).powi(2)
        })
        .sum()
}

/// Pattern search from one start over `(nugget, ln sill, ln range)`.
pub fn fit_from(bins: &[VariogramBin], start: VariogramModel) -> VariogramFit {
    let gmax = bins.iter().map(|b| b.gamma).fold(0.0, f64::max);
    let lmax = bins.iter().map(|b| b.lag).fold(0.0, f64::max);
    let min_range = 1e-6 * lmax;
    let to_model = |p: &[f64; 3]| VariogramModel { nugget: p[0], sill: p[1].exp(), range: p[2].exp() };
    let clamp = |p: &mut [f64; 3]| {
        p[0] = p[0].max(0.0);
        p[1] = p[1].max((SILL_FLOOR * gmax.max(1.0)).ln());
        p[2] = p[2].max(min_range.ln());
    };
    let mut p = [start.nugget, start.sill.ln(), start.range.ln()];
    clamp(&mut p);
    let mut best = wls_loss(bins, &to_model(&p));
    let mut step = [0.25 * gmax, 0.5, 0.5];
    let tol = [1e-12 * gmax, 1e-12, 1e-12];
    for _ in 0..200_000 {
        if (0..3).all(|i| step[i] <= tol[i]) {
            break;
        }
        for i in 0..3 {
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let mut q = p;
                q[i] += dir * step[i];
                clamp(&mut q);
                let l = wls_loss(bins, &to_model(&q));
                if l < best {
                    best = l;
                    p = q;
                    moved = true;
                    break;
                }
            }
            step[i] *= if moved { 1.5 } else { 0.5 };
        }
    }
    VariogramFit { model: to_model(&p), loss: best, degenerate: false }
}

/// Weighted least-squares exponential fit, best of a grid of starts.
pub fn fit_exponential_variogram(bins: &[VariogramBin]) -> Result<VariogramFit> {
    let nonempty: Vec<VariogramBin> = bins.iter().copied().filter(|b| b.pairs > 0).collect();
    if nonempty.len() < 3 {
        return Err(Error::InsufficientData(format!("variogram fit needs 3 non-empty bins, got {}", nonempty.len())));
    }
    let gmax = nonempty.iter().map(|b| b.gamma).fold(0.0, f64::max);
    let lmax = nonempty.iter().map(|b| b.lag).fold(0.0, f64::max);
    if gmax <= 0.0 {
        return Ok(VariogramFit {
            model: VariogramModel { nugget: 0.0, sill: SILL_FLOOR, range: lmax.max(f64::MIN_POSITIVE) / 3.0 },
            loss: 0.0,
            degenerate: true,
        });
    }
    let mut best: Option<VariogramFit> = None;
    for nf in [0.0, 0.2, 0.5] {
        for sf in [0.5, 1.0, 1.5] {
            for rf in [0.05, 0.2, 0.5] {
                let start = VariogramModel { nugget: nf * gmax, sill: sf * gmax, range: rf * lmax };
                let fit = fit_from(&nonempty, start);
                if best.as_ref().is_none_or(|b| fit.loss < b.loss) {
                    best = Some(fit);
                }
            }
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn exact_bins(m: &VariogramModel, lags: impl Iterator<Item = f64>) -> Vec<VariogramBin> {
        lags.map(|d| VariogramBin { lag: d, gamma: m.gamma(d), pairs: 50 }).collect()
    }

    #[test]
    fn model_shape() {
        let m = VariogramModel::new(1.0, 4.0, 10.0).unwrap();
        assert_eq!(m.gamma(0.0), 0.0);
        assert_eq!(m.covariance(0.0), 5.0);
        assert!((m.gamma(1e9) - 5.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 1..100 {
            let g = m.gamma(i as f64 * 0.7);
            assert!(g >= prev);
            prev = g;
        }
        assert!(VariogramModel::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_residuals_and_pair_counting() {
        let pts: Vec<Pick> = (0..10).map(|i| Pick { x: i as f64, y: 0.0, bed: 3.0 }).collect();
        let v = empirical_variogram(&pts, 5, 10.0).unwrap();
        assert!(v.iter().all(|b| b.gamma == 0.0));
        assert_eq!(v.iter().map(|b| b.pairs).sum::<usize>(), 45);

        let two = [Pick { x: 0.0, y: 0.0, bed: 0.0 }, Pick { x: 3.0, y: 4.0, bed: 2.0 }];
        let v = empirical_variogram(&two, 1, 10.0).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].pairs, 1);
        assert_eq!(v[0].lag, 5.0);
        assert!((v[0].gamma - 4.0 / (0.914 + 0.988)).abs() < 1e-12);
        assert!(empirical_variogram(&two[..1], 1, 10.0).is_err());
    }

    #[test]
    fn exact_points_are_recovered() {
        let truth = VariogramModel::new(0.0, 4.0, 10.0).unwrap();
        let fit = fit_exponential_variogram(&exact_bins(&truth, (1..=20).map(|i| i as f64 * 1.5))).unwrap();
        let m = fit.model;
        assert!(m.nugget < 0.05 * truth.sill, "{m:?}");
        assert!((m.sill - 4.0).abs() < 0.2, "{m:?}");
        assert!((m.range - 10.0).abs() < 0.5, "{m:?}");
    }

    #[test]
    fn multi_start_beats_each_single_start() {
        let truth = VariogramModel::new(0.7, 2.0, 6.0).unwrap();
        let bins: Vec<VariogramBin> = exact_bins(&truth, (1..=15).map(|i| i as f64))
            .into_iter()
            .enumerate()
            .map(|(i, mut b)| {
                b.gamma *= 1.0 + 0.05 * ((i * 7) as f64).sin();
                b
            })
            .collect();
        let best = fit_exponential_variogram(&bins).unwrap();
        for start in [(0.0, 0.1, 0.5), (1.0, 5.0, 20.0), (0.1, 1.0, 1.0)] {
            let single = fit_from(&bins, VariogramModel { nugget: start.0, sill: start.1, range: start.2 });
            assert!(best.loss <= single.loss + 1e-12);
        }
    }

    #[test]
    fn flat_points_fit_a_flat_curve() {
        let bins: Vec<VariogramBin> = (1..=12).map(|i| VariogramBin { lag: i as f64 * 2.0, gamma: 3.0, pairs: 40 }).collect();
        let m = fit_exponential_variogram(&bins).unwrap().model;
        for b in &bins[4..] {
            assert!((m.gamma(b.lag) - 3.0).abs() < 0.05 * 3.0, "{m:?}");
        }
    }

    #[test]
    fn degenerate_bins_flagged() {
        let bins: Vec<VariogramBin> = (1..=4).map(|i| VariogramBin { lag: i as f64, gamma: 0.0, pairs: 3 }).collect();
        let f = fit_exponential_variogram(&bins).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.model.nugget, 0.0);
        assert!(fit_exponential_variogram(&bins[..2]).is_err());
    }

    /// Gaussian fields with a known exponential covariance, drawn through a
    /// Cholesky factor; the averaged estimator should sit near the model.
    #[test]
    fn estimator_tracks_simulated_fields() {
        let truth = VariogramModel::new(0.0, 4.0, 5.0).unwrap();
        let side = 20usize;
        let pts: Vec<(f64, f64)> = (0..side * side).map(|i| ((i % side) as f64, (i / side) as f64)).collect();
        let n = pts.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            truth.covariance(d) + if i == j { 1e-10 } else { 0.0 }
        });
        let l = cov.cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (bins, max_lag) = (6, 9.0);
        let mut acc = vec![(0.0, 0.0); bins];
        let reps = 20;
        for _ in 0..reps {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let f = &l * z;
            let picks: Vec<Pick> = pts.iter().zip(f.iter()).map(|(&(x, y), &v)| Pick { x, y, bed: v }).collect();
            let v = empirical_variogram(&picks, bins, max_lag).unwrap();
            assert_eq!(v.len(), bins);
            for (k, b) in v.iter().enumerate() {
                acc[k].0 += b.lag / reps as f64;
                acc[k].1 += b.gamma / reps as f64;
            }
        }
        for (lag, g) in acc {
            let expect = truth.gamma(lag);
            assert!((g - expect).abs() < 0.25 * expect, "lag {lag}: {g} vs {expect}");
        }
    }
}
