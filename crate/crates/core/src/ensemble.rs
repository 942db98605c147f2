//! Classical ensembles: imitations of the quantum state |m = S⟩ and small
//! perturbations of the all-up periodic orbit.
//!
//! Ensemble means are reduced in fixed blocks of [`BLOCK`] members, pairwise
//! within each block and then pairwise across blocks, so the result does not
//! depend on the thread count.

use rand::Rng as _;
use serde::Serialize;

use crate::classical::{HamiltonianParams, Rk4, SpinChainState};
use crate::quantum::Spin;
use crate::rng::{self, Rng};
use crate::stats;
use crate::vec3::Vec3;
use crate::{par, Error, Result};

pub const BLOCK: usize = 64;
pub const DEFAULT_RADIUS: f64 = 1e-4;
pub const DEFAULT_MEMBERS: usize = 1000;
pub const IMITATION_MEMBERS: usize = 10_000;
/// Upper end of the fit window for 1 − S̄₁ᶻ at the maxima.
pub const FIT_CEILING: f64 = 1e-2;
pub const MIN_RUN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EnsembleKind {
    QuantumImitation(Spin),
    PerturbedPeriodic { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub members: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one member".into()));
        }
        if let EnsembleKind::PerturbedPeriodic { radius } = self.kind {
            if !(radius > 0.0 && radius < 1.0) {
                return Err(Error::InvalidParameter(format!("radius must be in (0, 1), got {radius}")));
            }
        }
        Ok(())
    }

    pub fn sample(&self, length: usize, member: usize) -> SpinChainState {
        let mut rng = rng::job_rng(self.seed, member as u64);
        match self.kind {
            EnsembleKind::QuantumImitation(spin) => sample_quantum_imitation(spin, length, &mut rng),
            EnsembleKind::PerturbedPeriodic { radius } => sample_perturbed_periodic(length, radius, &mut rng),
        }
    }
}

/// Each spin gets Sz uniform on the top interval [1 − 2/(2S+1), 1] and a
/// uniform azimuth.
pub fn sample_quantum_imitation(spin: Spin, length: usize, rng: &mut Rng) -> SpinChainState {
    let width = 2.0 / spin.dim() as f64;
    let spins = (0..length)
        .map(|_| {
            let z: f64 = 1.0 - width * rng.random::<f64>();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let r = (1.0 - z * z).max(0.0).sqrt();
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect();
    SpinChainState { spins, time: 0.0 }
}

/// Each spin gets (δx, δy) uniform over the disk of the given radius and
/// Sz = √(1 − δx² − δy²).
pub fn sample_perturbed_periodic(length: usize, radius: f64, rng: &mut Rng) -> SpinChainState {
    let spins = (0..length)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let (x, y) = (r * phi.cos(), r * phi.sin());
            [x, y, (1.0 - x * x - y * y).sqrt()]
        })
        .collect();
    SpinChainState { spins, time: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedSeries {
    pub times: Vec<f64>,
    /// Ensemble mean of S₁ᶻ.
    pub mean: Vec<f64>,
    /// Standard error of the mean.
    pub stderr: Vec<f64>,
    pub members: usize,
}

/// Integrate every member for `duration` and average S₁ᶻ at every `stride`-th
/// step (t = 0 included).
pub fn averaged_series(
    spec: &EnsembleSpec,
    params: &HamiltonianParams,
    duration: f64,
    dt: f64,
    stride: usize,
) -> Result<AveragedSeries> {
    spec.validate()?;
    if !(dt > 0.0 && duration > 0.0) {
        return Err(Error::InvalidParameter("need dt > 0 and duration > 0".into()));
    }
    let stride = stride.max(1);
    let steps = (duration / dt).round() as usize;
    let samples = steps / stride + 1;
    let blocks = spec.members.div_ceil(BLOCK);
    let partial: Result<Vec<(Vec<f64>, Vec<f64>)>> = par::map_range(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(spec.members);
        let mut series = Vec::with_capacity(hi - lo);
        for m in lo..hi {
            series.push(member_series(&spec.sample(params.length, m), params, steps, dt, stride)?);
        }
        let column = |k: usize, sq: bool| {
            let v: Vec<f64> = series.iter().map(|s| if sq { s[k] * s[k] } else { s[k] }).collect();
            stats::pairwise_sum(&v)
        };
        Ok(((0..samples).map(|k| column(k, false)).collect(), (0..samples).map(|k| column(k, true)).collect()))
    })
    .into_iter()
    .collect();
    let partial = partial?;
    let n = spec.members as f64;
    let mut mean = Vec::with_capacity(samples);
    let mut stderr = Vec::with_capacity(samples);
    for k in 0..samples {
        let s: Vec<f64> = partial.iter().map(|p| p.0[k]).collect();
        let q: Vec<f64> = partial.iter().map(|p| p.1[k]).collect();
        let m = stats::pairwise_sum(&s) / n;
        let var = if spec.members > 1 { ((stats::pairwise_sum(&q) / n - m * m) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        mean.push(m);
        stderr.push((var / n).sqrt());
    }
    let times = (0..samples).map(|k| (k * stride) as f64 * dt).collect();
    Ok(AveragedSeries { times, mean, stderr, members: spec.members })
}

fn member_series(state: &SpinChainState, params: &HamiltonianParams, steps: usize, dt: f64, stride: usize) -> Result<Vec<f64>> {
    let dynamics = crate::classical::Chain { coupling: params.coupling, field: params.field };
    let mut spins: Vec<Vec3> = state.spins.clone();
    let mut rk = Rk4::new(spins.len());
    let mut out = Vec::with_capacity(steps / stride + 1);
    out.push(spins[0][2]);
    for k in 1..=steps {
        if !rk.step(&dynamics, &mut spins, dt) {
            return Err(Error::NumericBlowup { time: k as f64 * dt });
        }
        if k % stride == 0 {
            out.push(spins[0][2]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub time: f64,
    /// 1 − S̄₁ᶻ at the interpolated maximum.
    pub deficit: f64,
}

/// Local maxima of the mean, refined by a parabola through the three samples
/// around each discrete maximum.
pub fn maxima(series: &AveragedSeries) -> Vec<Maximum> {
    let y = &series.mean;
    let mut out = Vec::new();
    if y.len() < 3 {
        return out;
    }
    let step = series.times[1] - series.times[0];
    for k in 1..y.len() - 1 {
        if y[k] > y[k - 1] && y[k] >= y[k + 1] {
            let (u, v) = stats::parabolic_vertex(y[k - 1], y[k], y[k + 1]);
            out.push(Maximum { time: series.times[k] + u * step, deficit: 1.0 - v });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthVerdict {
    Growth,
    NoGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OtocFit {
    pub verdict: GrowthVerdict,
    /// slope/2 of log(1 − S̄₁ᶻ(t_m)) against t_m; `None` for no growth.
    pub lambda: Option<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    /// Deficit bounds [10·radius², ceiling] used to select maxima.
    pub window: (f64, f64),
    /// Time span of the fitted maxima.
    pub fit_span: (f64, f64),
    pub maxima: Vec<Maximum>,
    pub used: usize,
}

/// Single-observable Lyapunov estimate from the maxima of the averaged S₁ᶻ.
/// The fit uses the longest run of consecutive maxima inside the deficit
/// window whose deficits increase monotonically; fewer than [`MIN_RUN`] such
/// maxima, or a slope within two standard errors of zero, is a no-growth
/// verdict.
pub fn otoc_style_exponent(series: &AveragedSeries, radius: f64) -> OtocFit {
    let window = (10.0 * radius * radius, FIT_CEILING);
    let all = maxima(series);
    let inside = |m: &Maximum| m.deficit >= window.0 && m.deficit <= window.1;
    let mut best = 0..0;
    let mut k = 0;
    while k < all.len() {
        if !inside(&all[k]) {
            k += 1;
            continue;
        }
        let start = k;
        k += 1;
        while k < all.len() && inside(&all[k]) && all[k].deficit > all[k - 1].deficit {
            k += 1;
        }
        if k - start > best.len() {
            best = start..k;
        }
    }
    let run: Vec<Maximum> = all[best].to_vec();
    let no_growth = |slope: f64, slope_stderr: f64, r_squared: f64, span: (f64, f64), used: usize| OtocFit {
        verdict: GrowthVerdict::NoGrowth,
        lambda: None,
        slope,
        slope_stderr,
        r_squared,
        window,
        fit_span: span,
        maxima: all.clone(),
        used,
    };
    if run.len() < MIN_RUN {
        return no_growth(0.0, f64::NAN, 0.0, (f64::NAN, f64::NAN), run.len());
    }
    let t: Vec<f64> = run.iter().map(|m| m.time).collect();
    let y: Vec<f64> = run.iter().map(|m| m.deficit.ln()).collect();
    let fit = stats::linear_fit(&t, &y);
    let span = (t[0], t[t.len() - 1]);
    if !(fit.slope > 2.0 * fit.slope_stderr) {
        return no_growth(fit.slope, fit.slope_stderr, fit.r_squared, span, run.len());
    }
    OtocFit {
        verdict: GrowthVerdict::Growth,
        lambda: Some(fit.slope / 2.0),
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        window,
        fit_span: span,
        maxima: all,
        used: run.len(),
    }
}

/// Samples the perturbed-periodic ensemble, averages S₁ᶻ and fits the growth
/// of its maxima.
#[allow(clippy::too_many_arguments)]
pub fn otoc_exponent(
    params: &HamiltonianParams,
    members: usize,
    radius: f64,
    duration: f64,
    dt: f64,
    stride: usize,
    seed: u64,
) -> Result<(OtocFit, AveragedSeries)> {
    let spec = EnsembleSpec { kind: EnsembleKind::PerturbedPeriodic { radius }, members, seed };
    let series = averaged_series(&spec, params, duration, dt, stride)?;
    Ok((otoc_style_exponent(&series, radius), series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::energy;

    #[test]
    fn imitation_samples_top_interval() {
        let spin = Spin::from_twice(2).unwrap();
        let mut rng = rng::rng_from_seed(4);
        let mut zs = Vec::new();
        for _ in 0..2000 {
            let s = sample_quantum_imitation(spin, 5, &mut rng);
            assert!(s.max_norm_error() < 1e-12);
            for v in &s.spins {
                assert!(v[2] >= 1.0 - 2.0 / 3.0 - 1e-15);
                zs.push(v[2]);
            }
        }
        let want = 1.0 - 1.0 / 3.0;
        let err = stats::std_dev(&zs) / (zs.len() as f64).sqrt();
        assert!((stats::mean(&zs) - want).abs() < 4.0 * err);
    }

    #[test]
    fn perturbed_samples_stay_close() {
        let mut rng = rng::rng_from_seed(9);
        let p = HamiltonianParams::new(1.76, 1.0, 20).unwrap();
        for radius in [1e-2, 1e-4] {
            for _ in 0..200 {
                let s = sample_perturbed_periodic(20, radius, &mut rng);
                assert!(s.max_norm_error() < 1e-12);
                let dev: f64 = s.spins.iter().map(|v| v[0] * v[0] + v[1] * v[1] + (1.0 - v[2]).powi(2)).sum::<f64>().sqrt();
                assert!(dev <= radius * (2.0 * 20.0f64).sqrt());
                assert!(energy(&s, &p).abs() < 10.0 * radius * 20.0);
            }
        }
    }

    #[test]
    fn reduction_is_block_deterministic() {
        let p = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let spec = EnsembleSpec { kind: EnsembleKind::PerturbedPeriodic { radius: 1e-3 }, members: 130, seed: 2 };
        let a = averaged_series(&spec, &p, 0.5, 0.01, 5).unwrap();
        let b = par::with_jobs(1, || averaged_series(&spec, &p, 0.5, 0.01, 5).unwrap());
        assert_eq!(a, b);
        assert!(a.mean[0] >= 1.0 - 1e-6);
        assert!(a.mean.iter().all(|m| m.abs() <= 1.0));
    }

    #[test]
    fn no_growth_at_zero_coupling() {
        let p = HamiltonianParams::new(0.0, 1.0, 8).unwrap();
        let (fit, _) = otoc_exponent(&p, 64, 1e-4, 40.0, 0.005, 2, 1).unwrap();
        assert_eq!(fit.verdict, GrowthVerdict::NoGrowth, "{fit:?}");
    }

    #[test]
    fn synthetic_growth_is_recovered() {
        // 1 − S̄ = 1e-7 e^{0.6 t} sin²-shaped oscillation with period 1.4.
        let dt = 0.01;
        let times: Vec<f64> = (0..3000).map(|k| k as f64 * dt).collect();
        let mean = times
            .iter()
            .map(|&t| {
                let env = (1e-7 * (0.6 * t).exp()).min(0.5);
                1.0 - env - 0.5 * (1.0 - (std::f64::consts::TAU * t / 1.4).cos())
            })
            .collect();
        let series = AveragedSeries { stderr: vec![0.0; times.len()], times, mean, members: 1 };
        let fit = otoc_style_exponent(&series, 1e-4);
        assert_eq!(fit.verdict, GrowthVerdict::Growth);
        assert!((fit.lambda.unwrap() - 0.3).abs() < 0.01, "{fit:?}");
    }
}
