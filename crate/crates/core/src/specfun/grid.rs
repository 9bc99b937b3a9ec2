//! Inverse-CDF sampling from a one-dimensional log density on a grid.
//!
//! The density is tabulated in the same transformed coordinate the quadrature
//! uses, over the range where it is within `exp(-46)` of its peak, and treated
//! as piecewise linear between nodes. Draws invert the resulting CDF exactly.

use rand::RngCore;

use super::quadrature::{find_peak, tails, Abscissa, Profile, Transform};
use crate::error::{Error, Result};
use crate::rng::uniform;

/// Default number of grid nodes.
pub const GRID_POINTS: usize = 2048;

#[derive(Clone, Debug)]
pub struct GridSampler {
    transform: Transform,
    v0: f64,
    h: f64,
    dens: Vec<f64>,
    cum: Vec<f64>,
    log_scale: f64,
}

impl GridSampler {
    pub fn new<F>(log_f: F, lo: f64, hi: f64, points: usize) -> Result<Self>
    where
        F: Fn(&Abscissa) -> f64,
    {
        if points < 3 {
            return Err(Error::Domain("grid sampler needs at least 3 points".into()));
        }
        let transform = Transform::new(lo, hi)?;
        let profile = Profile::new(&log_f, transform);
        let peak = find_peak(&profile)
            .ok_or_else(|| Error::Domain("density vanishes on the whole support".into()))?;
        if !peak.height.is_finite() {
            return Err(Error::Domain("density is not finite at its peak".into()));
        }
        let (l, r) = tails(&profile, peak);
        let h = (r - l) / (points - 1) as f64;
        let dens: Vec<f64> = (0..points)
            .map(|i| (profile.eval(l + h * i as f64) - peak.height).exp())
            .collect();
        let mut cum = Vec::with_capacity(points);
        cum.push(0.0);
        for i in 1..points {
            cum.push(cum[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]));
        }
        if !(cum[points - 1] > 0.0) {
            return Err(Error::Domain("grid captured no mass".into()));
        }
        Ok(GridSampler {
            transform,
            v0: l,
            h,
            dens,
            cum,
            log_scale: peak.height,
        })
    }

    /// Trapezoid estimate of `log ∫ exp(log_f)`.
    pub fn log_integral(&self) -> f64 {
        self.cum[self.cum.len() - 1].ln() + self.log_scale
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Abscissa {
        let total = self.cum[self.cum.len() - 1];
        let target = uniform(rng) * total;
        // Last node with cum <= target.
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => i.min(self.cum.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.cum.len() - 2),
        };
        let m = (target - self.cum[i]) / self.h;
        let (d0, d1) = (self.dens[i], self.dens[i + 1]);
        let delta = d1 - d0;
        let disc = (d0 * d0 + 2.0 * delta * m).max(0.0);
        let denom = d0 + disc.sqrt();
        let frac = if denom > 0.0 { (2.0 * m / denom).clamp(0.0, 1.0) } else { 0.5 };
        self.transform.at(self.v0 + self.h * (i as f64 + frac)).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::specfun::gamma::log_beta_unchecked;

    #[test]
    fn beta_draws_have_right_moments() {
        let (a, b) = (2.5, 7.0);
        let lb = log_beta_unchecked(a, b);
        let gs = GridSampler::new(
            |x| (a - 1.0) * x.ln_from_lo + (b - 1.0) * x.ln_to_hi - lb,
            0.0,
            1.0,
            GRID_POINTS,
        )
        .unwrap();
        assert!(gs.log_integral().abs() < 1e-4);
        let mut rng = stream(5);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| gs.sample(&mut rng).x).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        let want_mean = a / (a + b);
        let want_var = a * b / ((a + b).powi(2) * (a + b + 1.0));
        assert!((mean - want_mean).abs() < 4.0 * (want_var / n as f64).sqrt());
        assert!((var - want_var).abs() < 0.02 * want_var);
    }

    #[test]
    fn half_line_exponential() {
        let gs = GridSampler::new(|x| -x.from_lo, 3.0, f64::INFINITY, GRID_POINTS).unwrap();
        let mut rng = stream(9);
        let n = 100_000;
        let mean = (0..n).map(|_| gs.sample(&mut rng).x).sum::<f64>() / n as f64;
        assert!((mean - 4.0).abs() < 0.02);
    }
}
