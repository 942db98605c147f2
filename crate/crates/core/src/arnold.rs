//! Long runs from the all-up state with a tiny random seed deviation: the
//! nearly quasiperiodic regime and its eventual breakdown.
//!
//! [`WatchState`] is the full resumable state of such a run. Time is kept as
//! an integer step count, so a run resumed from a serialized checkpoint
//! continues bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::classical::{Chain, HamiltonianParams, Propagator, SpinChainState};
use crate::error::{Error, Result};
use crate::lyapunov::random_tangent_deviation;
use crate::rng::rng_from_seed;
use crate::spectral::{fourier_intensities, h0_h1_split, mode_indices};
use crate::vec3::{self, Vec3};

/// Checkpoint cadence for long runs, in time units.
pub const CHECKPOINT_EVERY: f64 = 1e4;
/// The quasiperiodic regime is established after this time.
pub const QP_ONSET: f64 = 300.0;
/// Norm of the seed deviation per √L.
pub const SEED_DEVIATION: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchState {
    pub coupling: f64,
    pub field: f64,
    pub dt: f64,
    pub seed: u64,
    pub steps: u64,
    pub spins: Vec<Vec3>,
    /// Smallest F₀ seen at samples after [`QP_ONSET`].
    pub min_f0: Option<f64>,
    /// First sample after [`QP_ONSET`] with F₀ < L/2.
    pub breakdown: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WatchSample {
    pub time: f64,
    pub s1x: f64,
    pub s1z: f64,
    pub f0: f64,
    /// Largest F_q over q ≠ 0 and its index k.
    pub f_max: f64,
    pub k_max: i64,
    pub h0: f64,
    pub h1: f64,
}

impl WatchState {
    /// All spins up plus a random tangent deviation of norm 1e-11·√L.
    pub fn new(params: &HamiltonianParams, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let up = vec![[0.0, 0.0, 1.0]; params.length];
        let d0 = SEED_DEVIATION * (params.length as f64).sqrt();
        let delta = random_tangent_deviation(&up, d0, &mut rng_from_seed(seed));
        let spins = up.iter().zip(&delta).map(|(s, d)| vec3::normalize(vec3::add(*s, *d))).collect();
        Ok(Self { coupling: params.coupling, field: params.field, dt, seed, steps: 0, spins, min_f0: None, breakdown: None })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn params(&self) -> Result<HamiltonianParams> {
        HamiltonianParams::new(self.coupling, self.field, self.spins.len())
    }

    pub fn sample(&self) -> WatchSample {
        let l = self.spins.len();
        let f = fourier_intensities(&self.spins);
        let k = mode_indices(l);
        let j0 = k.iter().position(|&x| x == 0).expect("k = 0 is always present");
        let (k_max, f_max) = k
            .iter()
            .zip(&f)
            .filter(|(k, _)| **k != 0)
            .fold((0, 0.0), |a, (k, v)| if *v > a.1 { (*k, *v) } else { a });
        let state = SpinChainState { spins: self.spins.clone(), time: self.time() };
        let split = self.params().map(|p| h0_h1_split(&state, &p));
        let (h0, h1) = split.map(|s| (s.h0, s.h1)).unwrap_or((f64::NAN, f64::NAN));
        WatchSample { time: self.time(), s1x: self.spins[0][0], s1z: self.spins[0][2], f0: f[j0], f_max, k_max, h0, h1 }
    }

    /// Integrates up to `t_end`, calling `on_sample` every `sample_steps`
    /// steps, plus once at t = 0 for a fresh run. Stops early
    /// at breakdown when `stop_on_breakdown` is set.
    pub fn advance(
        &mut self,
        t_end: f64,
        sample_steps: u64,
        stop_on_breakdown: bool,
        on_sample: &mut dyn FnMut(&WatchSample),
    ) -> Result<()> {
        let sample_steps = sample_steps.max(1);
        let end = (t_end / self.dt).round() as u64;
        let params = self.params()?;
        let mut prop = Propagator::new(Chain { coupling: params.coupling, field: params.field }, self.dt, self.spins.len());
        let half = 0.5 * self.spins.len() as f64;
        if self.steps == 0 {
            on_sample(&self.sample());
        }
        while self.steps < end {
            let next = ((self.steps / sample_steps + 1) * sample_steps).min(end);
            let t = self.time();
            prop.advance(&mut self.spins, (next - self.steps) as usize, t)?;
            self.steps = next;
            if self.steps % sample_steps != 0 {
                continue;
            }
            let s = self.sample();
            on_sample(&s);
            if s.time >= QP_ONSET {
                self.min_f0 = Some(self.min_f0.map_or(s.f0, |m| m.min(s.f0)));
                if self.breakdown.is_none() && s.f0 < half {
                    self.breakdown = Some(s.time);
                    if stop_on_breakdown {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resume_is_bit_identical() {
        let p = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let mut whole = WatchState::new(&p, 0.01, 3).unwrap();
        let mut a = Vec::new();
        whole.advance(20.0, 100, false, &mut |s| a.push(*s)).unwrap();

        let mut first = WatchState::new(&p, 0.01, 3).unwrap();
        let mut b = Vec::new();
        first.advance(10.0, 100, false, &mut |s| b.push(*s)).unwrap();
        let text = serde_json::to_string(&first).unwrap();
        let mut resumed: WatchState = serde_json::from_str(&text).unwrap();
        resumed.advance(20.0, 100, false, &mut |s| b.push(*s)).unwrap();
        assert_eq!(whole, resumed);
        assert_eq!(a, b);
    }

    #[test]
    fn starts_near_all_up() {
        let p = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let w = WatchState::new(&p, 0.01, 1).unwrap();
        let s = w.sample();
        assert!((s.f0 - 6.0).abs() < 1e-12);
        assert!(s.f_max < 1e-20);
        assert!(s.h0.abs() < 1e-9 && s.h1.abs() < 1e-9);
    }
}
