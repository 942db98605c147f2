//! Wave-number and frequency resolved analysis: spatial Fourier intensities,
//! the λ_p(L) window fit, Mechanism A, Brillouin-zone backfolding, temporal
//! spectra and the ℋ₀/ℋ₁ split.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::classical::{self, HamiltonianParams, SpinChainState};
use crate::error::{Error, Result};
use crate::stats;
use crate::vec3::Vec3;

/// Distinct wave-number indices k for a chain of length L, ascending, in
/// (−L/2, L/2].
pub fn mode_indices(length: usize) -> Vec<i64> {
    let l = length as i64;
    (-((l - 1) / 2)..=l / 2).collect()
}

pub fn wave_number(k: i64, length: usize) -> f64 {
    2.0 * PI * k as f64 / length as f64
}

/// (1/L)|Σ_m v_m e^{−iqm}|² for every k of [`mode_indices`], with the squared
/// moduli of the three component transforms summed.
pub fn fourier_intensities(v: &[Vec3]) -> Vec<f64> {
    let l = v.len();
    mode_indices(l)
        .into_iter()
        .map(|k| {
            let mut acc = [Complex::new(0.0, 0.0); 3];
            for (m, s) in v.iter().enumerate() {
                // Sites are numbered from 1; the phase origin drops out of |·|².
                let ph = -wave_number(k, l) * (m + 1) as f64;
                let e = Complex::new(ph.cos(), ph.sin());
                for c in 0..3 {
                    acc[c] += e * s[c];
                }
            }
            acc.iter().map(|a| a.norm_sqr()).sum::<f64>() / l as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeIntensitySeries {
    pub length: usize,
    pub k: Vec<i64>,
    pub q: Vec<f64>,
    pub times: Vec<f64>,
    /// values[t][j] is F at times[t] for mode k[j].
    pub values: Vec<Vec<f64>>,
}

impl ModeIntensitySeries {
    pub fn from_states<'a>(states: impl IntoIterator<Item = (f64, &'a [Vec3])>) -> Result<Self> {
        let mut out: Option<ModeIntensitySeries> = None;
        for (t, s) in states {
            let o = out.get_or_insert_with(|| {
                let k = mode_indices(s.len());
                let q = k.iter().map(|&k| wave_number(k, s.len())).collect();
                ModeIntensitySeries { length: s.len(), k, q, times: vec![], values: vec![] }
            });
            if s.len() != o.length {
                return Err(Error::DimensionMismatch { expected: o.length, got: s.len() });
            }
            o.times.push(t);
            o.values.push(fourier_intensities(s));
        }
        out.ok_or_else(|| Error::InvalidParameter("no states".into()))
    }

    /// Column for wave-number index k (taken modulo L and folded).
    pub fn mode(&self, k: i64) -> Vec<f64> {
        let j = self.column(k);
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn column(&self, k: i64) -> usize {
        let l = self.length as i64;
        let mut k = k.rem_euclid(l);
        if k > l / 2 {
            k -= l;
        }
        self.k.iter().position(|&x| x == k).expect("folded index is in range")
    }
}

/// Integrates `state` and records F_q every `stride` steps.
pub fn record_mode_intensities(
    state: &SpinChainState,
    params: &HamiltonianParams,
    duration: f64,
    dt: f64,
    stride: usize,
) -> Result<ModeIntensitySeries> {
    let mut st = state.clone();
    let mut rows = vec![(st.time, st.spins.clone())];
    classical::integrate(&mut st, params, duration, dt, stride, &mut |s: &SpinChainState| {
        rows.push((s.time, s.spins.clone()));
    })?;
    ModeIntensitySeries::from_states(rows.iter().map(|(t, s)| (*t, s.as_slice())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovVectorSpectrum {
    pub k: Vec<i64>,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    /// Dominant |k| and its wave number (the ±k pair counts as one peak).
    pub k_p: i64,
    pub q_p: f64,
    /// Weight of the ±k_p pair in Σ_q f(q).
    pub peak_weight: f64,
}

pub fn lyapunov_vector_spectrum(v: &[Vec3]) -> LyapunovVectorSpectrum {
    let l = v.len();
    let k = mode_indices(l);
    let f = fourier_intensities(v);
    let total: f64 = f.iter().sum();
    let pair = |kk: i64| -> f64 { k.iter().zip(&f).filter(|(x, _)| x.abs() == kk).map(|(_, y)| y).sum() };
    let (k_p, w) = (0..=(l as i64) / 2).map(|kk| (kk, pair(kk))).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
    LyapunovVectorSpectrum {
        q: k.iter().map(|&x| wave_number(x, l)).collect(),
        k,
        f,
        k_p,
        q_p: wave_number(k_p, l),
        peak_weight: w / total,
    }
}

/// Parabolic instability window λ(q) = λ_max − α(q₀ − q)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnstableWindow {
    pub q0: f64,
    pub lambda_max: f64,
    pub alpha: f64,
}

impl UnstableWindow {
    /// The narrow second window with its published parameters.
    pub const NARROW_J176: UnstableWindow = UnstableWindow { q0: 1.51, lambda_max: 0.104, alpha: 1.23e2 };

    pub fn rate(&self, q: f64) -> f64 {
        self.lambda_max - self.alpha * (self.q0 - q).powi(2)
    }

    pub fn half_width(&self) -> f64 {
        (self.lambda_max / self.alpha).max(0.0).sqrt()
    }

    /// Unstable q range widened by `margin` on each side.
    pub fn edges(&self, margin: f64) -> (f64, f64) {
        let w = self.half_width();
        (self.q0 - w - margin, self.q0 + w + margin)
    }
}

/// Distance from q₀ to the nearest allowed wave number 2πn/L.
pub fn detuning(q0: f64, length: usize) -> f64 {
    let step = 2.0 * PI / length as f64;
    q0 - step * (q0 / step).round()
}

/// Window model for λ_p(L), clipped at zero.
pub fn lambda_of_l(w: &UnstableWindow, length: usize) -> f64 {
    (w.lambda_max - w.alpha * detuning(w.q0, length).powi(2)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaOfLFit {
    pub window: UnstableWindow,
    pub rms: f64,
    /// (L, measured, fitted) for every sample used in the fit.
    pub used: Vec<(usize, f64, f64)>,
    /// Samples at or below the threshold, treated as stable and left out.
    pub excluded: Vec<(usize, f64)>,
    pub threshold: f64,
}

impl LambdaOfLFit {
    pub fn predict(&self, length: usize) -> f64 {
        lambda_of_l(&self.window, length)
    }

    pub fn predicted_stable(&self, length: usize) -> bool {
        self.predict(length) <= 0.0
    }
}

fn window_lsq(samples: &[(usize, f64)], q0: f64) -> Option<(f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|(l, _)| vec![1.0, -detuning(q0, *l).powi(2)]).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let c = stats::least_squares(&rows, &y)?;
    let rss = rows.iter().zip(&y).map(|(r, y)| (y - c[0] - c[1] * r[1]).powi(2)).sum();
    Some((c[0], c[1], rss))
}

/// Least-squares fit of λ_p(L) = λ_max − α[q₀ − (2π/L)·round(q₀L/2π)]².
/// Samples with λ_p ≤ `threshold` count as stable and are left out; at least
/// six must remain. For fixed q₀ the model is linear in (λ_max, α), so q₀ is
/// scanned on a fine grid over (0, π] and the best cell refined by golden
/// section. The q₀ score adds (prediction − threshold)² for every excluded
/// sample predicted above the threshold; without it an aliased q₀ can match
/// the unstable lengths while calling stable ones unstable.
pub fn fit_lambda_of_l(samples: &[(usize, f64)], threshold: f64) -> Result<LambdaOfLFit> {
    let (used, excluded): (Vec<(usize, f64)>, Vec<(usize, f64)>) = samples.iter().partition(|s| s.1 > threshold);
    if used.len() < 6 {
        return Err(Error::FitFailure(format!("need ≥ 6 positive samples, got {}", used.len())));
    }
    let rss = |q0: f64| -> f64 {
        match window_lsq(&used, q0) {
            Some((lm, a, r)) if a > 0.0 && lm > 0.0 => {
                let w = UnstableWindow { q0, lambda_max: lm, alpha: a };
                r + excluded.iter().map(|&(l, _)| (lambda_of_l(&w, l) - threshold).max(0.0).powi(2)).sum::<f64>()
            }
            _ => f64::INFINITY,
        }
    };
    let n = 20000;
    let grid: Vec<f64> = (1..=n).map(|i| PI * i as f64 / n as f64).collect();
    let (i_best, _) = grid.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &q)| {
        let r = rss(q);
        if r < b.1 {
            (i, r)
        } else {
            b
        }
    });
    let h = PI / n as f64;
    let (mut a, mut b) = ((grid[i_best] - h).max(h * 0.5), (grid[i_best] + h).min(PI));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if rss(c) < rss(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let q0 = if rss(0.5 * (a + b)) <= rss(grid[i_best]) { 0.5 * (a + b) } else { grid[i_best] };
    let (lm, alpha, r) =
        window_lsq(&used, q0).filter(|c| c.2.is_finite()).ok_or_else(|| Error::FitFailure("singular window fit".into()))?;
    let window = UnstableWindow { q0, lambda_max: lm, alpha };
    let rms = (r / used.len() as f64).sqrt();
    if !(alpha > 0.0 && lm > 0.0) || rms > 0.2 * lm {
        return Err(Error::FitFailure(format!("rms {rms:.4} vs λ_max {lm:.4}")));
    }
    let used = used.iter().map(|&(l, y)| (l, y, lm - alpha * detuning(q0, l).powi(2))).collect();
    Ok(LambdaOfLFit { window, rms, used, excluded, threshold })
}

/// Least-squares parabola λ_max − α(q₀ − q)² through (q, λ) samples, for
/// re-fitting a window from a measured rate curve.
pub fn fit_window(points: &[(f64, f64)]) -> Result<UnstableWindow> {
    if points.len() < 3 {
        return Err(Error::FitFailure("window fit needs ≥ 3 points".into()));
    }
    let qm = stats::mean(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let rows: Vec<Vec<f64>> = points.iter().map(|(q, _)| vec![1.0, q - qm, (q - qm).powi(2)]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let c = stats::least_squares(&rows, &y).ok_or_else(|| Error::FitFailure("singular parabola".into()))?;
    if c[2] >= 0.0 {
        return Err(Error::FitFailure("parabola opens upward".into()));
    }
    let alpha = -c[2];
    let x0 = c[1] / (2.0 * alpha);
    Ok(UnstableWindow { q0: qm + x0, lambda_max: c[0] + alpha * x0 * x0, alpha })
}

/// A contiguous run of positive rates in a sampled λ(q) curve and the
/// parabola fitted to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredWindow {
    pub q_lo: f64,
    pub q_hi: f64,
    pub peak: (f64, f64),
    pub fit: UnstableWindow,
}

/// Splits `curve` (ascending q) into positive runs and fits each run with
/// [`fit_window`]. Runs with fewer than three samples are dropped.
pub fn unstable_windows(curve: &[(f64, f64)]) -> Vec<MeasuredWindow> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < curve.len() {
        if curve[i].1 <= 0.0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < curve.len() && curve[i].1 > 0.0 {
            i += 1;
        }
        let run = &curve[start..i];
        let peak = run.iter().cloned().fold((0.0, f64::NEG_INFINITY), |a, p| if p.1 > a.1 { p } else { a });
        if let Ok(fit) = fit_window(run) {
            out.push(MeasuredWindow { q_lo: run[0].0, q_hi: run[run.len() - 1].0, peak, fit });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnstableMode {
    pub n: usize,
    pub q: f64,
    pub window: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismA {
    pub length: usize,
    pub operational: bool,
    pub modes: Vec<UnstableMode>,
}

/// Allowed q = 2πn/L (0 < n ≤ L/2) inside any window; Mechanism A is
/// operational when there are at least two. Window membership is computed as
/// an integer range of n per window.
pub fn mechanism_a_criterion(length: usize, windows: &[UnstableWindow], margin: f64) -> MechanismA {
    let step = 2.0 * PI / length as f64;
    let mut modes: Vec<UnstableMode> = Vec::new();
    for (wi, w) in windows.iter().enumerate() {
        if w.lambda_max <= 0.0 {
            continue;
        }
        let (lo, hi) = w.edges(margin);
        let first = ((lo / step).floor() as i64 + 1).max(1);
        let last = ((hi / step).ceil() as i64 - 1).min(length as i64 / 2);
        for n in first..=last {
            let q = step * n as f64;
            if !modes.iter().any(|m| m.n == n as usize) {
                modes.push(UnstableMode { n: n as usize, q, window: wi, rate: w.rate(q) });
            }
        }
    }
    modes.sort_by(|a, b| b.rate.total_cmp(&a.rate));
    MechanismA { length, operational: modes.len() >= 2, modes }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedZone {
    pub length: usize,
    pub n: usize,
    /// gcd(L, n).
    pub u: usize,
    /// 2πu/L.
    pub q_u: f64,
    /// Allowed k = 0..L−1 grouped by k mod u; group 0 holds ±k_p.
    pub groups: Vec<Vec<usize>>,
    /// u = 1: every mode backfolds onto q_p.
    pub all_coupled: bool,
}

pub fn reduced_brillouin(length: usize, n: usize) -> Result<ReducedZone> {
    if n == 0 || n >= length {
        return Err(Error::InvalidParameter(format!("need 0 < n < L, got n = {n}, L = {length}")));
    }
    let u = gcd(length, n);
    let groups = (0..u).map(|r| (0..length).filter(|k| k % u == r).collect()).collect();
    Ok(ReducedZone { length, n, u, q_u: 2.0 * PI * u as f64 / length as f64, groups, all_coupled: u == 1 })
}

pub const TUKEY_FRACTION: f64 = 0.1;
pub const SPECTRUM_STRIDE: f64 = 0.05;

/// Tukey (tapered cosine) window with taper fraction `alpha`.
pub fn tukey(n: usize, alpha: f64) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    let edge = alpha * (n - 1) as f64 / 2.0;
    (0..n)
        .map(|i| {
            let x = i.min(n - 1 - i) as f64;
            if edge > 0.0 && x < edge {
                0.5 * (1.0 - (PI * x / edge).cos())
            } else {
                1.0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencySpectrum {
    /// Angular frequencies 0 ..= π/δt.
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
    pub taper: f64,
    pub interval: (f64, f64),
    pub sample_dt: f64,
}

impl FrequencySpectrum {
    pub fn bin_width(&self) -> f64 {
        self.omega.get(1).copied().unwrap_or(0.0)
    }
}

/// Windowed two-sided power |Σ x_n w_n e^{−iωt_n} δt|² after removing the
/// mean, over all FFT bins.
pub fn power_two_sided(x: &[f64], sample_dt: f64, taper: f64) -> Vec<f64> {
    let mean = stats::mean(x);
    let w = tukey(x.len(), taper);
    let mut buf: Vec<Complex<f64>> = x.iter().zip(&w).map(|(v, w)| Complex::new((v - mean) * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() * sample_dt * sample_dt).collect()
}

/// Power spectrum of `signal` (sampled every `sample_dt` from `t_first`)
/// over [start, start + width].
pub fn temporal_spectrum(
    signal: &[f64],
    t_first: f64,
    sample_dt: f64,
    start: f64,
    width: f64,
    taper: f64,
) -> Result<FrequencySpectrum> {
    let available = t_first + sample_dt * signal.len().saturating_sub(1) as f64;
    let i0 = ((start - t_first) / sample_dt).round();
    let n = (width / sample_dt).round() as usize + 1;
    if i0 < 0.0 || i0 as usize + n > signal.len() || n < 4 {
        return Err(Error::IntervalOutOfRange { start, end: start + width, available });
    }
    let i0 = i0 as usize;
    let p = power_two_sided(&signal[i0..i0 + n], sample_dt, taper);
    let dw = 2.0 * PI / (n as f64 * sample_dt);
    let half = n / 2 + 1;
    Ok(FrequencySpectrum {
        omega: (0..half).map(|i| i as f64 * dw).collect(),
        power: p[..half].to_vec(),
        taper,
        interval: (t_first + i0 as f64 * sample_dt, t_first + (i0 + n - 1) as f64 * sample_dt),
        sample_dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub bin: usize,
    /// Interpolated between bins on the log power.
    pub omega: f64,
    pub power: f64,
    /// Power over the local median.
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakCriterion {
    /// Power must exceed this multiple of the median over the background span.
    pub ratio: f64,
    /// Bins on each side a peak must dominate.
    pub neighborhood: usize,
    /// Bins on each side used for the median.
    pub background: usize,
    /// Power must also exceed this fraction of the strongest bin.
    pub dynamic_range: f64,
}

impl Default for PeakCriterion {
    fn default() -> Self {
        PeakCriterion { ratio: 5.0, neighborhood: 3, background: 200, dynamic_range: 1e-8 }
    }
}

/// Local maxima standing `ratio`× above the median power of the surrounding
/// `background` bins, strongest first. A global median is dominated by the
/// slowly decaying leakage of the strongest lines, which hides the weaker
/// combination peaks. Far from a strong line the taper's sidelobes still
/// stand several times above their own local median, so peaks must also
/// clear `dynamic_range` times the strongest bin.
pub fn find_peaks(s: &FrequencySpectrum, crit: &PeakCriterion) -> Vec<Peak> {
    let p = &s.power;
    let n = p.len();
    let dw = s.bin_width();
    let floor = crit.dynamic_range * p.iter().cloned().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if p[i] <= floor {
            continue;
        }
        let lo = i.saturating_sub(crit.neighborhood);
        let hi = (i + crit.neighborhood).min(n - 1);
        if (lo..=hi).any(|j| j != i && p[j] >= p[i]) {
            continue;
        }
        let blo = i.saturating_sub(crit.background);
        let bhi = (i + crit.background).min(n - 1);
        let med = stats::median(&p[blo..=bhi]);
        if !(p[i] > crit.ratio * med) {
            continue;
        }
        let l = |x: f64| x.max(1e-300).ln();
        let (off, _) = stats::parabolic_vertex(l(p[i - 1]), l(p[i]), l(p[i + 1]));
        peaks.push(Peak { bin: i, omega: (i as f64 + off.clamp(-0.5, 0.5)) * dw, power: p[i], prominence: p[i] / med });
    }
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power));
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicFrequencies {
    pub omega0: f64,
    pub omega1: f64,
}

/// Slow frequency: the strongest peak in (0, ω₀/4), replaced by its lowest
/// subharmonic ω/k (k ≤ 4) that is itself a peak within two bins carrying at
/// least a tenth of its power. Without the subharmonic step the pick flips
/// between the modulation frequency and its second harmonic from window to
/// window.
fn slow_frequency(peaks: &[Peak], omega0: f64, bin: f64, crit: &PeakCriterion) -> Option<f64> {
    let low: Vec<&Peak> = peaks.iter().filter(|p| p.omega < 0.25 * omega0 && p.bin > crit.neighborhood).collect();
    let top = *low.first()?;
    let mut best = top.omega;
    for k in 2..=4 {
        let target = top.omega / k as f64;
        if let Some(p) = low.iter().find(|p| (p.omega - target).abs() <= 2.0 * bin && p.power >= 0.1 * top.power) {
            best = p.omega;
        }
    }
    Some(best)
}

/// ω₀: strongest peak within ±`rel` of `omega_p`; ω₁: the slow modulation
/// frequency below ω₀/4.
pub fn peak_frequencies(s: &FrequencySpectrum, omega_p: f64, rel: f64, crit: &PeakCriterion) -> Result<CharacteristicFrequencies> {
    let peaks = find_peaks(s, crit);
    let w0 = peaks
        .iter()
        .find(|p| (p.omega - omega_p).abs() <= rel * omega_p)
        .ok_or(Error::PeakNotFound { lo: (1.0 - rel) * omega_p, hi: (1.0 + rel) * omega_p })?
        .omega;
    let w1 = slow_frequency(&peaks, w0, s.bin_width(), crit).ok_or(Error::PeakNotFound { lo: 0.0, hi: 0.25 * w0 })?;
    Ok(CharacteristicFrequencies { omega0: w0, omega1: w1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftRow {
    pub start: f64,
    pub omega0: Option<f64>,
    pub omega1: Option<f64>,
}

/// [`peak_frequencies`] over sliding windows of `width` every `step`.
pub fn frequency_drift(
    signal: &[f64],
    t_first: f64,
    sample_dt: f64,
    width: f64,
    step: f64,
    omega_p: f64,
    crit: &PeakCriterion,
) -> Vec<DriftRow> {
    let t_end = t_first + sample_dt * signal.len().saturating_sub(1) as f64;
    let mut rows = Vec::new();
    let mut start = t_first;
    while start + width <= t_end + 1e-9 {
        let row = match temporal_spectrum(signal, t_first, sample_dt, start, width, TUKEY_FRACTION) {
            Ok(s) => {
                let peaks = find_peaks(&s, crit);
                let w0 = peaks.iter().find(|p| (p.omega - omega_p).abs() <= 0.25 * omega_p).map(|p| p.omega);
                let w1 = w0.and_then(|w0| slow_frequency(&peaks, w0, s.bin_width(), crit));
                DriftRow { start, omega0: w0, omega1: w1 }
            }
            Err(_) => DriftRow { start, omega0: None, omega1: None },
        };
        rows.push(row);
        start += step;
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridAssignment {
    pub omega: f64,
    pub m: i64,
    pub n: i64,
    /// |ω − (m·ω₀/2 + n·ω₁)| in bins.
    pub miss_bins: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakGrid {
    pub omega0: f64,
    pub omega1: f64,
    pub ratio: f64,
    pub assignments: Vec<GridAssignment>,
    /// Fraction of peaks matched within `tol_bins`.
    pub matched: f64,
}

/// Assigns every peak the nearest m·(ω₀/2) + n·ω₁ with 0 ≤ m ≤ `m_max`,
/// |n| ≤ `n_max`, then refines (ω₀, ω₁) by least squares over the matched
/// peaks.
pub fn fit_peak_grid(peaks: &[Peak], guess: CharacteristicFrequencies, bin: f64, m_max: i64, n_max: i64, tol_bins: f64) -> PeakGrid {
    let assign = |w0: f64, w1: f64| -> Vec<GridAssignment> {
        peaks
            .iter()
            .map(|p| {
                let mut best = GridAssignment { omega: p.omega, m: 0, n: 0, miss_bins: f64::INFINITY };
                for m in 0..=m_max {
                    for n in -n_max..=n_max {
                        let miss = (p.omega - (m as f64 * 0.5 * w0 + n as f64 * w1)).abs() / bin;
                        if miss < best.miss_bins {
                            best = GridAssignment { omega: p.omega, m, n, miss_bins: miss };
                        }
                    }
                }
                best
            })
            .collect()
    };
    let (mut w0, mut w1) = (guess.omega0, guess.omega1);
    let mut a = assign(w0, w1);
    for _ in 0..3 {
        let ok: Vec<&GridAssignment> = a.iter().filter(|g| g.miss_bins <= tol_bins && (g.m, g.n) != (0, 0)).collect();
        let rows: Vec<Vec<f64>> = ok.iter().map(|g| vec![0.5 * g.m as f64, g.n as f64]).collect();
        let y: Vec<f64> = ok.iter().map(|g| g.omega).collect();
        if let Some(c) = stats::least_squares(&rows, &y) {
            if c[0] > 0.0 && c[1] > 0.0 {
                w0 = c[0];
                w1 = c[1];
            }
        }
        a = assign(w0, w1);
    }
    let matched = a.iter().filter(|g| g.miss_bins <= tol_bins).count() as f64 / a.len().max(1) as f64;
    PeakGrid { omega0: w0, omega1: w1, ratio: w0 / w1, assignments: a, matched }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySplit {
    pub h0: f64,
    pub h1: f64,
}

/// ℋ₀ from the total polarization with J₀ = 2J/L, and ℋ₁ evaluated from its
/// own definition (nearest-neighbour bonds minus the all-to-all term).
pub fn h0_h1_split(state: &SpinChainState, params: &HamiltonianParams) -> EnergySplit {
    let (j, h) = (params.coupling, params.field);
    let l = state.len();
    let j0 = 2.0 * j / l as f64;
    let m = state.polarization();
    let h0 = -0.5 * (j0 * m[0] * m[0] + 2.0 * j0 * m[1] * m[1]) + h * (m[0] + m[1]);
    let s = &state.spins;
    let bonds: f64 = (0..l).map(|i| j * s[i][0] * s[(i + 1) % l][0] + 2.0 * j * s[i][1] * s[(i + 1) % l][1]).sum();
    let mut all = 0.0;
    for a in s {
        for b in s {
            all += j0 * a[0] * b[0] + 2.0 * j0 * a[1] * b[1];
        }
    }
    EnergySplit { h0, h1: -bonds + 0.5 * all }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicRate {
    pub harmonic: usize,
    pub k: i64,
    pub rate: f64,
    /// rate / (2λ_p).
    pub multiple: f64,
    pub window: (f64, f64),
    pub decades: f64,
    pub r_squared: f64,
}

/// Log-linear growth rates of F at k = n·k_p for n = 1..=`harmonics`. Each
/// fit runs on the last stretch before the leading mode saturates where
/// F lies between 1e3× its pre-growth floor and `ceiling`·L; it must span
/// three decades.
pub fn growth_rate_ladder(
    series: &ModeIntensitySeries,
    k_p: i64,
    harmonics: usize,
    lambda_p: f64,
    ceiling: f64,
) -> Result<Vec<HarmonicRate>> {
    let l = series.length as f64;
    let lead = series.mode(k_p);
    // Saturation: first time the leading mode passes `ceiling`·L.
    let t_sat = lead.iter().position(|&f| f > ceiling * l).ok_or(Error::WindowTooShort { decades: 0.0 })?;
    let mut out = Vec::new();
    for n in 1..=harmonics {
        let k = n as i64 * k_p;
        let f = series.mode(k);
        let floor = f[..=t_sat].iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
        let i_floor = f[..=t_sat].iter().position(|&x| x.max(1e-300) == floor).unwrap_or(0);
        let top = (ceiling * l).min(f[t_sat]);
        let lo = 1e3 * floor;
        let idx: Vec<usize> = (i_floor..=t_sat).filter(|&i| f[i] >= lo && f[i] <= top).collect();
        let decades = if top > lo { (top / lo).log10() } else { 0.0 };
        if idx.len() < 5 || decades < 3.0 {
            return Err(Error::WindowTooShort { decades });
        }
        let x: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| f[i].ln()).collect();
        let fit = stats::linear_fit(&x, &y);
        out.push(HarmonicRate {
            harmonic: n,
            k,
            rate: fit.slope,
            multiple: fit.slope / (2.0 * lambda_p),
            window: (x[0], *x.last().unwrap()),
            decades,
            r_squared: fit.r_squared,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3;

    #[test]
    fn all_up_has_only_q0() {
        let f = fourier_intensities(&vec![[0.0, 0.0, 1.0]; 7]);
        let k = mode_indices(7);
        for (k, f) in k.iter().zip(&f) {
            if *k == 0 {
                assert!((f - 7.0).abs() < 1e-12);
            } else {
                assert!(f.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indices_cover_zone() {
        assert_eq!(mode_indices(6), vec![-2, -1, 0, 1, 2, 3]);
        assert_eq!(mode_indices(7), vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn flipped_site_parseval() {
        let mut s = vec![[0.0, 0.0, 1.0]; 9];
        s[4] = [0.0, 0.0, -1.0];
        let total: f64 = fourier_intensities(&s).iter().sum();
        assert!((total - 9.0).abs() < 1e-10);
    }

    #[test]
    fn uniform_deviation_peaks_at_zero() {
        let s = lyapunov_vector_spectrum(&vec![[0.3, -0.1, 0.0]; 10]);
        assert_eq!(s.k_p, 0);
        assert!((s.peak_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standing_wave_gives_pair() {
        let l = 18;
        let v: Vec<Vec3> = (1..=l).map(|m| [(wave_number(3, l) * m as f64).cos(), 0.0, 0.0]).collect();
        let s = lyapunov_vector_spectrum(&v);
        assert_eq!(s.k_p, 3);
        let i = s.k.iter().position(|&k| k == 3).unwrap();
        let j = s.k.iter().position(|&k| k == -3).unwrap();
        assert!((s.f[i] - s.f[j]).abs() < 1e-12);
    }

    #[test]
    fn window_fit_roundtrip_noiseless() {
        let w = UnstableWindow { q0: 1.3, lambda_max: 0.35, alpha: 8.0 };
        let samples: Vec<(usize, f64)> = (4..=44).map(|l| (l, lambda_of_l(&w, l))).collect();
        let fit = fit_lambda_of_l(&samples, 1e-9).unwrap();
        assert!((fit.window.q0 - 1.3).abs() < 1e-6, "{:?}", fit.window);
        assert!((fit.window.lambda_max - 0.35).abs() < 1e-8);
        assert!((fit.window.alpha - 8.0).abs() < 1e-5);
    }

    #[test]
    fn stable_lengths_rule_out_aliased_windows() {
        let w = UnstableWindow { q0: 1.7780959926484934, lambda_max: 0.1, alpha: 45.17086918004957 };
        let samples: Vec<(usize, f64)> = (4..=44).map(|l| (l, lambda_of_l(&w, l))).collect();
        let fit = fit_lambda_of_l(&samples, 0.0).unwrap();
        for &(l, y) in &samples {
            assert!((fit.predict(l) - y).abs() < 1e-4, "L={l}: {} vs {y}", fit.predict(l));
        }
    }

    #[test]
    fn too_few_positive_samples() {
        let s = vec![(4, 0.1), (5, 0.0), (6, 0.2), (7, 0.1), (8, 0.0), (9, 0.3)];
        assert!(matches!(fit_lambda_of_l(&s, 0.02), Err(Error::FitFailure(_))));
    }

    #[test]
    fn parabola_refit() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| 1.48 + 0.008 * i as f64).map(|q| (q, UnstableWindow::NARROW_J176.rate(q))).collect();
        let w = fit_window(&pts).unwrap();
        assert!((w.q0 - 1.51).abs() < 1e-9 && (w.alpha - 123.0).abs() < 1e-6 && (w.lambda_max - 0.104).abs() < 1e-9);
    }

    #[test]
    fn brillouin_examples() {
        assert_eq!(reduced_brillouin(18, 3).unwrap().u, 3);
        assert_eq!(reduced_brillouin(19, 3).unwrap().u, 1);
        let z = reduced_brillouin(6, 1).unwrap();
        assert!(z.all_coupled && z.groups.len() == 1 && z.groups[0].len() == 6);
        assert!(reduced_brillouin(6, 6).is_err());
    }

    #[test]
    fn tukey_shape() {
        let w = tukey(101, 0.1);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[50], 1.0);
        assert_eq!(w[5], 1.0);
        assert!(w[2] > 0.0 && w[2] < 1.0);
        assert!((w[1] - w[99]).abs() < 1e-15);
    }

    #[test]
    fn two_tone_peaks() {
        let dt = 0.05;
        let (w0, w1) = (4.41, 0.42);
        let x: Vec<f64> = (0..=120000).map(|i| i as f64 * dt).map(|t| (w0 * t).cos() + 0.1 * (w1 * t).cos()).collect();
        let s = temporal_spectrum(&x, 0.0, dt, 0.0, 6000.0, TUKEY_FRACTION).unwrap();
        let f = peak_frequencies(&s, 4.4, 0.1, &PeakCriterion::default()).unwrap();
        assert!((f.omega0 - w0).abs() < s.bin_width());
        assert!((f.omega1 - w1).abs() < s.bin_width());
        assert!(temporal_spectrum(&x, 0.0, dt, 100.0, 6000.0, TUKEY_FRACTION).is_err());
    }

    #[test]
    fn single_tone_has_no_low_peak() {
        let dt = 0.05;
        let x: Vec<f64> = (0..=120000).map(|i| (4.41 * i as f64 * dt).sin()).collect();
        let s = temporal_spectrum(&x, 0.0, dt, 0.0, 6000.0, TUKEY_FRACTION).unwrap();
        assert!(matches!(peak_frequencies(&s, 4.4, 0.1, &PeakCriterion::default()), Err(Error::PeakNotFound { .. })));
    }

    #[test]
    fn split_identity_and_all_up() {
        let p = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let up = SpinChainState::all_up(6);
        let e = h0_h1_split(&up, &p);
        assert_eq!((e.h0, e.h1), (0.0, 0.0));
        let s: Vec<Vec3> = (0..6).map(|i| vec3::from_angles(0.3 + 0.4 * i as f64, 1.1 * i as f64)).collect();
        let st = SpinChainState::from_spins(s).unwrap();
        let e = h0_h1_split(&st, &p);
        assert!((e.h0 + e.h1 - classical::energy(&st, &p)).abs() < 1e-12);
    }

    #[test]
    fn mechanism_a_brute_force() {
        let windows = [UnstableWindow { q0: 0.969, lambda_max: 0.3237, alpha: 25.9 }, UnstableWindow::NARROW_J176];
        for l in 2..=100 {
            let got = mechanism_a_criterion(l, &windows, 0.0);
            let brute: Vec<usize> =
                (1..=l / 2).filter(|&n| windows.iter().any(|w| w.rate(2.0 * PI * n as f64 / l as f64) > 0.0)).collect();
            let mut ns: Vec<usize> = got.modes.iter().map(|m| m.n).collect();
            ns.sort();
            assert_eq!(ns, brute, "L = {l}");
        }
    }
}
