//! Correlation functions `ρ_{φ,ψ}(t)` and exponential-rate fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{PhaseObservable, SuspensionSemiflow, Walker};
use crate::error::{Error, Result};
use crate::par;
use crate::stats;

/// Number of independent generator streams per correlation estimate.
pub const BATCHES: usize = 100;

/// Minimum number of points above the noise floor for a fit.
pub const MIN_WINDOW: usize = 8;

/// Uniform grid `0, dt, 2dt, …, t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_max: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0 && t_max >= 0.0) {
            return Err(Error::InvalidModel(format!("bad time grid dt={dt}, t_max={t_max}")));
        }
        Ok(TimeGrid { dt, t_max })
    }

    /// `dt = 0.1`, `t_max = 30·r̄`.
    pub fn default_for(mean_roof: f64) -> Self {
        TimeGrid {
            dt: 0.1,
            t_max: 30.0 * mean_roof,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let n = (self.t_max / self.dt + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub sample_count: usize,
    pub batches: usize,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some((self.values[i], self.std_errors[i]))
    }
}

struct BatchSums {
    n: usize,
    fp: Vec<f64>,
    f: Vec<f64>,
    p: f64,
}

impl BatchSums {
    fn rho(&self) -> Vec<f64> {
        let n = self.n as f64;
        let mp = self.p / n;
        self.fp
            .iter()
            .zip(&self.f)
            .map(|(fp, f)| fp / n - (f / n) * mp)
            .collect()
    }
}

impl SuspensionSemiflow {
    fn batch_sums(
        &self,
        phi: &PhaseObservable,
        psi: &PhaseObservable,
        times: &[f64],
        count: usize,
        seed: u64,
        batch: u64,
    ) -> BatchSums {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let mut sums = BatchSums {
            n: 0,
            fp: vec![0.0; times.len()],
            f: vec![0.0; times.len()],
            p: 0.0,
        };
        let mut row = vec![0.0; times.len()];
        while sums.n < count {
            let Some(p0) = self.draw(&mut rng) else { continue };
            let mut w = Walker {
                p: p0,
                r: self.roof().value(p0.x).unwrap_or(f64::NAN),
            };
            let mut last = 0.0;
            let mut ok = true;
            for (j, &t) in times.iter().enumerate() {
                if self.advance(&mut w, t - last).is_err() {
                    ok = false;
                    break;
                }
                last = t;
                row[j] = phi.eval(&w.p);
            }
            if !ok {
                continue;
            }
            let s = psi.eval(&p0);
            for (j, &v) in row.iter().enumerate() {
                sums.fp[j] += v * s;
                sums.f[j] += v;
            }
            sums.p += s;
            sums.n += 1;
        }
        sums
    }

    /// Monte Carlo `ρ_{φ,ψ}(t) = ∫φ∘F_t·ψ dη̂ − ∫φ dη̂·∫ψ dη̂` over `samples`
    /// invariant draws split into [`BATCHES`] streams. Standard errors are by
    /// batch means.
    pub fn correlation(
        &self,
        phi: &PhaseObservable,
        psi: &PhaseObservable,
        grid: TimeGrid,
        samples: usize,
        seed: u64,
    ) -> CorrelationSeries {
        let times = grid.times();
        let batches = BATCHES.min(samples.max(2));
        let sums = par::map_range(batches, |b| {
            let count = samples / batches + usize::from(b < samples % batches);
            self.batch_sums(phi, psi, &times, count, seed, b as u64)
        });
        let t = times.len();
        let mut fp = vec![0.0; t];
        let mut f = vec![0.0; t];
        let mut p = 0.0;
        let mut n = 0;
        for s in &sums {
            for j in 0..t {
                fp[j] += s.fp[j];
                f[j] += s.f[j];
            }
            p += s.p;
            n += s.n;
        }
        let pooled = BatchSums { n, fp, f, p };
        let values = pooled.rho();
        let per_batch: Vec<Vec<f64>> = sums.iter().filter(|s| s.n > 0).map(BatchSums::rho).collect();
        let b = per_batch.len() as f64;
        let std_errors = (0..t)
            .map(|j| {
                let m = per_batch.iter().map(|r| r[j]).sum::<f64>() / b;
                let var = per_batch.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (b - 1.0);
                (var / b).sqrt()
            })
            .collect();
        CorrelationSeries {
            times,
            values,
            std_errors,
            sample_count: n,
            batches,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitVerdict {
    Decay,
    NoDecay,
}

/// Fit of `log|ρ(t)| ≈ log C − γt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub verdict: FitVerdict,
    pub gamma: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// 95% confidence interval of the fitted slope `−γ`.
    pub slope_interval: (f64, f64),
    pub noise_floor: f64,
    /// Points above the floor inside the window.
    pub above_floor: usize,
    /// Upper-envelope points actually regressed.
    pub points_used: usize,
}

/// Fit over the whole grid, the window ending at the last point above the floor.
pub fn fit_rate(series: &CorrelationSeries, noise_floor_mult: f64) -> Result<RateFit> {
    fit_rate_windowed(series, noise_floor_mult, f64::NEG_INFINITY, 0.0)
}

/// Least squares on `(t, log|ρ(t)|)`.
///
/// The noise floor is `k·max(std_errors)`. The window starts at the first
/// grid point at or after `t_start` and ends at the last point above the
/// floor. With `quiet_time > 0` it ends instead at the last point above the
/// floor before the first stretch of length `quiet_time` spent below it, so
/// isolated noise excursions late in the grid do not extend the window.
///
/// Inside the window only upper-envelope points are regressed: points above
/// the floor that dominate every later `|ρ|`. The verdict is `NoDecay` when
/// the window reaches the final tenth of the grid, or when the 95% interval
/// of the slope does not lie below zero.
pub fn fit_rate_windowed(
    series: &CorrelationSeries,
    noise_floor_mult: f64,
    t_start: f64,
    quiet_time: f64,
) -> Result<RateFit> {
    let floor = noise_floor_mult * series.std_errors.iter().copied().fold(0.0, f64::max);
    let n = series.len();
    let first = series.times.iter().position(|&t| t >= t_start).unwrap_or(n);
    let mut above = Vec::new();
    for i in first..n {
        if series.values[i].abs() > floor {
            above.push(i);
        } else if quiet_time > 0.0 {
            let since = above.last().map_or(series.times[first], |&j| series.times[j]);
            if !above.is_empty() && series.times[i] - since >= quiet_time {
                break;
            }
        }
    }
    if above.len() < MIN_WINDOW {
        return Err(Error::WindowTooShort {
            found: above.len(),
            needed: MIN_WINDOW,
        });
    }
    let last = *above.last().expect("non-empty");
    let persistent = (last as f64) >= 0.9 * (n - 1) as f64;

    let mut records = Vec::new();
    let mut running = 0.0f64;
    for i in (first..=last).rev() {
        let a = series.values[i].abs();
        if a > floor && a >= running {
            records.push(i);
        }
        running = running.max(a);
    }
    records.reverse();
    let xs: Vec<f64> = records.iter().map(|&i| series.times[i]).collect();
    let ys: Vec<f64> = records.iter().map(|&i| series.values[i].abs().ln()).collect();

    let window = (series.times[first], series.times[last]);
    let fit = stats::ols(&xs, &ys);
    let (slope, intercept, r_squared, interval) = match fit {
        Some(l) if l.n > 2 => {
            let t = StudentsT::new(0.0, 1.0, (l.n - 2) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.975);
            let half = t * l.slope_stderr;
            (l.slope, l.intercept, l.r_squared, (l.slope - half, l.slope + half))
        }
        Some(l) => (l.slope, l.intercept, l.r_squared, (f64::NEG_INFINITY, f64::INFINITY)),
        None => (0.0, 0.0, 0.0, (f64::NEG_INFINITY, f64::INFINITY)),
    };
    let decays = !persistent && interval.1 < 0.0;
    Ok(RateFit {
        verdict: if decays { FitVerdict::Decay } else { FitVerdict::NoDecay },
        gamma: -slope,
        prefactor: intercept.exp(),
        r_squared,
        window,
        slope_interval: interval,
        noise_floor: floor,
        above_floor: above.len(),
        points_used: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn synthetic(f: impl Fn(f64) -> f64, noise: f64, seed: u64) -> CorrelationSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = TimeGrid::new(0.1, 40.0).unwrap().times();
        let values = times
            .iter()
            .map(|&t| f(t) + noise * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        CorrelationSeries {
            std_errors: vec![noise; times.len()],
            times,
            values,
            sample_count: 0,
            batches: 0,
        }
    }

    #[test]
    fn synthetic_rate() {
        let s = synthetic(|t| 0.5 * (-0.7 * t).exp(), 1e-4, 1);
        let fit = fit_rate(&s, 3.0).unwrap();
        assert_eq!(fit.verdict, FitVerdict::Decay);
        assert!((fit.gamma - 0.7).abs() < 0.05, "{fit:?}");
        assert!(fit.r_squared >= 0.99);
    }

    #[test]
    fn periodic_series_does_not_decay() {
        let s = synthetic(|t| 0.5 * (std::f64::consts::TAU * t).cos(), 1e-3, 2);
        assert_eq!(fit_rate(&s, 3.0).unwrap().verdict, FitVerdict::NoDecay);
    }

    #[test]
    fn zero_series_is_too_short() {
        let s = synthetic(|_| 0.0, 0.0, 3);
        assert!(matches!(fit_rate(&s, 3.0), Err(Error::WindowTooShort { found: 0, .. })));
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = TimeGrid::new(0.1, 1.0).unwrap().times();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-15);
    }
}
