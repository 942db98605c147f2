//! Largest Lyapunov exponents by the two-trajectory reset method, stability
//! certificates for periodic orbits, the fixed-point exponent λ_S, the
//! separatrix cusp and Floquet exponents of single Fourier modes.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::classical::{
    self, find_saddle, periodic_orbit, Chain, FixedPoint, HamiltonianParams, OneSpin, OrbitClass,
    OrbitOptions, Propagator, SpinChainState,
};
use crate::rng::{self, Rng};
use crate::stats::{self, LineFit};
use crate::vec3::{self, Vec3};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReferenceKind {
    Periodic,
    Ergodic,
    FixedPoint,
}

/// Reference trajectory of a Lyapunov run.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// All spins equal to `spin`; integrated as a single spin under H_p.
    Uniform { spin: Vec3, kind: ReferenceKind },
    /// A general chain state.
    Chain { state: SpinChainState, kind: ReferenceKind },
}

impl Reference {
    /// Translationally invariant orbit starting from all spins up.
    pub fn periodic() -> Self {
        Reference::Uniform { spin: [0.0, 0.0, 1.0], kind: ReferenceKind::Periodic }
    }

    pub fn fixed_point(fp: &FixedPoint) -> Self {
        Reference::Uniform { spin: fp.orientation, kind: ReferenceKind::FixedPoint }
    }

    pub fn ergodic(state: SpinChainState) -> Self {
        Reference::Chain { state, kind: ReferenceKind::Ergodic }
    }

    pub fn kind(&self) -> ReferenceKind {
        match self {
            Reference::Uniform { kind, .. } | Reference::Chain { kind, .. } => *kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResetPolicy {
    Fixed(usize),
    /// Stop once the running mean has stayed within `rel_tol` (relative) of
    /// its current value over the last `tail` fraction of resets.
    Adaptive { min: usize, max: usize, rel_tol: f64, tail: f64 },
}

impl ResetPolicy {
    pub fn adaptive(min: usize, max: usize) -> Self {
        ResetPolicy::Adaptive { min, max, rel_tol: 0.005, tail: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenettinConfig {
    /// Initial and reset deviation norm; `None` means 1e-8·√L.
    pub d0: Option<f64>,
    pub reset_interval: f64,
    pub resets: ResetPolicy,
    pub dt: f64,
    pub seed: u64,
}

impl BenettinConfig {
    pub fn periodic(seed: u64) -> Self {
        Self {
            d0: None,
            reset_interval: 1.0,
            resets: ResetPolicy::adaptive(300, 5000),
            dt: classical::DEFAULT_DT,
            seed,
        }
    }

    pub fn ergodic(seed: u64) -> Self {
        Self { d0: None, reset_interval: 5.0, resets: ResetPolicy::Fixed(1000), dt: classical::DEFAULT_DT, seed }
    }

    pub fn d0_for(&self, length: usize) -> f64 {
        self.d0.unwrap_or(1e-8 * (length as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovRun {
    pub kind: ReferenceKind,
    pub d0: f64,
    pub reset_interval: f64,
    pub resets: usize,
    /// log(|δ𝒮(mT_R)| / d0) for m = 1..=M.
    pub log_stretches: Vec<f64>,
    pub exponent: f64,
    /// Batch-means standard error over 10 blocks.
    pub stderr: f64,
    /// Running estimate after each reset.
    pub running_mean: Vec<f64>,
    /// Unit 3L-vector δ𝒮/|δ𝒮| at the last reset.
    pub lyapunov_vector: Vec<Vec3>,
    pub seed: u64,
}

/// Random deviation of norm `d0` tangent to the sphere at each reference spin.
pub fn random_tangent_deviation(reference: &[Vec3], d0: f64, rng: &mut Rng) -> Vec<Vec3> {
    let mut delta: Vec<Vec3> = reference
        .iter()
        .map(|s| {
            let g: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            vec3::axpy(g, -vec3::dot(g, *s), *s)
        })
        .collect();
    let n = deviation_norm(&delta);
    for d in &mut delta {
        *d = vec3::scale(*d, d0 / n);
    }
    delta
}

pub fn deviation_norm(delta: &[Vec3]) -> f64 {
    delta.iter().map(|d| vec3::dot(*d, *d)).sum::<f64>().sqrt()
}

fn perturbed(reference: &[Vec3], delta: &[Vec3]) -> Vec<Vec3> {
    reference.iter().zip(delta).map(|(s, d)| vec3::normalize(vec3::add(*s, *d))).collect()
}

enum RefState {
    Uniform(Propagator<OneSpin>, [Vec3; 1]),
    Chain(Propagator<Chain>, Vec<Vec3>),
}

impl RefState {
    fn new(reference: &Reference, params: &HamiltonianParams, dt: f64) -> Self {
        let (j, h) = (params.coupling, params.field);
        match reference {
            Reference::Uniform { spin, .. } => {
                RefState::Uniform(Propagator::new(OneSpin { coupling: j, field: h }, dt, 1), [vec3::normalize(*spin)])
            }
            Reference::Chain { state, .. } => {
                RefState::Chain(Propagator::new(Chain { coupling: j, field: h }, dt, state.len()), state.spins.clone())
            }
        }
    }

    fn advance(&mut self, steps: usize, t0: f64) -> Result<()> {
        match self {
            RefState::Uniform(p, s) => p.advance(s, steps, t0),
            RefState::Chain(p, s) => p.advance(s, steps, t0),
        }
    }

    fn site(&self, i: usize) -> Vec3 {
        match self {
            RefState::Uniform(_, s) => s[0],
            RefState::Chain(_, s) => s[i],
        }
    }

    fn expanded(&self, length: usize) -> Vec<Vec3> {
        (0..length).map(|i| self.site(i)).collect()
    }
}

/// Two-trajectory Benettin run: integrate the reference and a twin displaced
/// by δ𝒮, record the log stretch every T_R, rescale δ𝒮 back to d0.
pub fn benettin(params: &HamiltonianParams, reference: &Reference, cfg: &BenettinConfig) -> Result<LyapunovRun> {
    let length = params.length;
    if let Reference::Chain { state, .. } = reference {
        if state.len() != length {
            return Err(Error::DimensionMismatch { expected: length, got: state.len() });
        }
    }
    if !(cfg.reset_interval > 0.0 && cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("T_R and dt must be positive".into()));
    }
    let d0 = cfg.d0_for(length);
    let limit = 1e-2 * (length as f64).sqrt();
    let steps = (cfg.reset_interval / cfg.dt).round().max(1.0) as usize;
    let t_r = steps as f64 * cfg.dt;
    let (min_resets, max_resets) = match cfg.resets {
        ResetPolicy::Fixed(m) => (m.max(1), m.max(1)),
        ResetPolicy::Adaptive { min, max, .. } => (min.max(1), max.max(min).max(1)),
    };

    let mut rng = rng::rng_from_seed(cfg.seed);
    let mut refst = RefState::new(reference, params, cfg.dt);
    let start = refst.expanded(length);
    let mut delta = random_tangent_deviation(&start, d0, &mut rng);
    let mut twin = perturbed(&start, &delta);
    let mut twin_prop = Propagator::new(Chain { coupling: params.coupling, field: params.field }, cfg.dt, length);

    let mut log_stretches = Vec::with_capacity(min_resets);
    let mut running_mean = Vec::with_capacity(min_resets);
    let mut sum = 0.0;
    for m in 1..=max_resets {
        let t0 = (m - 1) as f64 * t_r;
        refst.advance(steps, t0)?;
        twin_prop.advance(&mut twin, steps, t0)?;
        for (i, d) in delta.iter_mut().enumerate() {
            *d = vec3::sub(twin[i], refst.site(i));
        }
        let d = deviation_norm(&delta);
        if !(d <= limit) {
            return Err(Error::DeviationBlowup { interval: m, norm: d, limit });
        }
        let ls = (d / d0).ln();
        log_stretches.push(ls);
        sum += ls;
        running_mean.push(sum / (m as f64 * t_r));
        for (i, dv) in delta.iter_mut().enumerate() {
            *dv = vec3::scale(*dv, d0 / d);
            twin[i] = vec3::normalize(vec3::add(refst.site(i), *dv));
        }
        if m >= min_resets {
            if let ResetPolicy::Adaptive { rel_tol, tail, .. } = cfg.resets {
                if converged(&running_mean, rel_tol, tail) {
                    break;
                }
            }
        }
    }
    let resets = log_stretches.len();
    let exponent = stats::mean(&log_stretches) / t_r;
    let rates: Vec<f64> = log_stretches.iter().map(|l| l / t_r).collect();
    let stderr = stats::batch_means_stderr(&rates, 10);
    let n = deviation_norm(&delta);
    let lyapunov_vector = delta.iter().map(|d| vec3::scale(*d, 1.0 / n)).collect();
    Ok(LyapunovRun {
        kind: reference.kind(),
        d0,
        reset_interval: t_r,
        resets,
        log_stretches,
        exponent,
        stderr,
        running_mean,
        lyapunov_vector,
        seed: cfg.seed,
    })
}

fn converged(running: &[f64], rel_tol: f64, tail: f64) -> bool {
    let m = running.len();
    let last = running[m - 1];
    let from = ((1.0 - tail) * m as f64).floor() as usize;
    let scale = last.abs().max(1e-300);
    running[from.min(m - 1)..].iter().all(|r| (r - last).abs() <= rel_tol * scale)
}

/// Random chain state with energy `target`: two random product states on
/// either side of the target are blended site by site and the blend
/// parameter is bisected.
pub fn random_state_at_energy(params: &HamiltonianParams, target: f64, rng: &mut Rng) -> SpinChainState {
    let l = params.length;
    let random_state = |rng: &mut Rng| -> Vec<Vec3> {
        (0..l)
            .map(|_| {
                let g: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
                vec3::normalize(g)
            })
            .collect()
    };
    let e = |s: &[Vec3]| classical::chain_energy(s, params.coupling, params.field);
    let (above, below) = loop {
        let a = random_state(rng);
        let b = random_state(rng);
        let (ea, eb) = (e(&a), e(&b));
        if ea > target && eb < target {
            break (a, b);
        }
        if eb > target && ea < target {
            break (b, a);
        }
    };
    let blend = |s: f64| -> Vec<Vec3> {
        above.iter().zip(&below).map(|(a, b)| vec3::normalize(vec3::add(vec3::scale(*a, 1.0 - s), vec3::scale(*b, s)))).collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if e(&blend(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    SpinChainState { spins: blend(0.5 * (lo + hi)), time: 0.0 }
}

/// Generic state on the `target` energy shell after a burn-in integration.
pub fn ergodic_reference(params: &HamiltonianParams, target: f64, burn_in: f64, seed: u64) -> Result<Reference> {
    let mut rng = rng::rng_from_seed(seed);
    let mut st = random_state_at_energy(params, target, &mut rng);
    classical::integrate(&mut st, params, burn_in, classical::DEFAULT_DT, usize::MAX, &mut |_: &SpinChainState| {})?;
    st.time = 0.0;
    Ok(Reference::ergodic(st))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrRow {
    pub reset_interval: f64,
    pub exponent: f64,
    pub stderr: f64,
    pub resets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub table: Vec<TrRow>,
    /// R² (on λ) of λ(T_R) = (a + b·log T_R)/T_R.
    pub decay_r_squared: f64,
    pub decay_fit: (f64, f64),
    /// Every λ(T_R) within 2σ of the weighted mean.
    pub flat: bool,
    pub weighted_mean: f64,
}

/// Verdict from a λ(T_R) table: Stable if λ decays like (a + b·log T_R)/T_R
/// with R² > 0.95 (or vanishes outright), Unstable if λ is T_R-independent
/// within 2σ and positive.
pub fn classify_tr_table(table: &[TrRow]) -> StabilityCertificate {
    let tr: Vec<f64> = table.iter().map(|r| r.reset_interval).collect();
    let lam: Vec<f64> = table.iter().map(|r| r.exponent).collect();
    let lt: Vec<f64> = tr.iter().map(|t| t.ln()).collect();
    let prod: Vec<f64> = lam.iter().zip(&tr).map(|(l, t)| l * t).collect();
    let fit = stats::linear_fit(&lt, &prod);
    let pred: Vec<f64> = tr.iter().map(|t| (fit.intercept + fit.slope * t.ln()) / t).collect();
    let mean_l = stats::mean(&lam);
    let ss_tot: f64 = lam.iter().map(|l| (l - mean_l).powi(2)).sum();
    let ss_res: f64 = lam.iter().zip(&pred).map(|(l, p)| (l - p).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let sig: Vec<f64> = table.iter().map(|r| r.stderr.max(1e-12)).collect();
    let wsum: f64 = sig.iter().map(|s| 1.0 / (s * s)).sum();
    let wmean = lam.iter().zip(&sig).map(|(l, s)| l / (s * s)).sum::<f64>() / wsum;
    let flat = lam.iter().zip(&sig).all(|(l, s)| (l - wmean).abs() <= 2.0 * s);

    let max_abs = lam.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let decays = lam.last().copied().unwrap_or(0.0) < 0.5 * lam.first().copied().unwrap_or(0.0);
    let verdict = if max_abs < 1e-3 || (r2 > 0.95 && fit.slope > 0.0 && decays) {
        Verdict::Stable
    } else if flat && wmean > 2.0 * (1.0 / wsum.sqrt()) {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    StabilityCertificate {
        verdict,
        table: table.to_vec(),
        decay_r_squared: r2,
        decay_fit: (fit.intercept, fit.slope),
        flat,
        weighted_mean: wmean,
    }
}

/// Periodic-orbit Benettin runs over a T_R grid, followed by [`classify_tr_table`].
pub fn stability_certificate(
    params: &HamiltonianParams,
    tr_grid: &[f64],
    resets: usize,
    seed: u64,
) -> Result<StabilityCertificate> {
    let lo = tr_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tr_grid.iter().cloned().fold(0.0, f64::max);
    if tr_grid.len() < 3 || hi / lo < 10.0 - 1e-9 {
        return Err(Error::InvalidParameter("T_R grid needs ≥ 3 points spanning a decade".into()));
    }
    let runs = par::map(tr_grid, |&t| {
        let cfg = BenettinConfig {
            reset_interval: t,
            resets: ResetPolicy::Fixed(resets),
            ..BenettinConfig::periodic(seed)
        };
        benettin(params, &Reference::periodic(), &cfg)
    });
    let mut table = Vec::new();
    for r in runs {
        let r = r?;
        table.push(TrRow { reset_interval: r.reset_interval, exponent: r.exponent, stderr: r.stderr, resets: r.resets });
    }
    Ok(classify_tr_table(&table))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCurve {
    /// Initial deviation, absolute.
    pub d0: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub fit: LineFit,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointExponent {
    pub lambda_s: f64,
    pub curves: Vec<GrowthCurve>,
    /// Largest relative deviation of a per-d0 exponent from their mean.
    pub spread: f64,
}

/// Shape of the initial deviation from the uniform fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    /// The same random tangent vector on every site (the q = 0 sector).
    Uniform,
    /// Independent random tangent vectors on every site.
    Random,
}

/// Free growth of |𝒮(t) − 𝒮*| away from the uniform fixed point. `d0_scaled`
/// are multiples of √L. Each curve is fitted log-linearly on the late-time
/// window [max(10·d0, 1e-3·√L), 0.1·√L], which must span at least two
/// decades.
///
/// q = 0 is the fastest mode at S* (see [`fixed_point_mode_exponent`]), so
/// every generic deviation ends up growing at the q = 0 rate. A random
/// deviation gets there only after the q = ±2π/L modes have died out
/// relative to it, which at L = 10 takes longer than the growth window lasts.
/// [`Perturbation::Uniform`] starts in the q = 0 sector directly.
pub fn fixed_point_exponent(
    fp: &FixedPoint,
    length: usize,
    d0_scaled: &[f64],
    perturbation: Perturbation,
    dt: f64,
    seed: u64,
) -> Result<FixedPointExponent> {
    let params = HamiltonianParams::new(fp.coupling, fp.field, length)?;
    let sqrt_l = (length as f64).sqrt();
    let upper = 0.1 * sqrt_l;
    let curves = par::map_range(d0_scaled.len(), |k| -> Result<GrowthCurve> {
        let d0 = d0_scaled[k] * sqrt_l;
        let lower = (10.0 * d0).max(1e-3 * sqrt_l);
        let decades = (upper / lower).log10();
        if decades < 2.0 - 1e-9 {
            return Err(Error::WindowTooShort { decades });
        }
        let mut rng = rng::rng_from_seed(seed);
        let star = vec![fp.orientation; length];
        let mut delta = random_tangent_deviation(&star, d0, &mut rng);
        if perturbation == Perturbation::Uniform {
            let v = vec3::scale(delta[0], d0 / (vec3::norm(delta[0]) * sqrt_l));
            delta.iter_mut().for_each(|d| *d = v);
        }
        let mut spins = perturbed(&star, &delta);
        let mut prop = Propagator::new(Chain { coupling: params.coupling, field: params.field }, dt, length);
        let dist = |s: &[Vec3]| s.iter().map(|x| vec3::norm(vec3::sub(*x, fp.orientation)).powi(2)).sum::<f64>().sqrt();
        let mut times = vec![0.0];
        let mut distances = vec![dist(&spins)];
        let stride = ((0.01 / dt).round() as usize).max(1);
        let mut t = 0.0;
        while *distances.last().unwrap() < upper {
            prop.advance(&mut spins, stride, t)?;
            t += stride as f64 * dt;
            times.push(t);
            distances.push(dist(&spins));
            if t > 1e3 {
                return Err(Error::FitFailure("no growth away from the fixed point".into()));
            }
        }
        let (x, y): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&distances)
            .filter(|(_, d)| **d >= lower && **d <= upper)
            .map(|(t, d)| (*t, d.ln()))
            .unzip();
        if x.len() < 5 {
            return Err(Error::FitFailure("too few points in growth window".into()));
        }
        let fit = stats::linear_fit(&x, &y);
        Ok(GrowthCurve { d0, times, distances, fit, window: (lower, upper) })
    });
    let curves: Vec<GrowthCurve> = curves.into_iter().collect::<Result<_>>()?;
    let rates: Vec<f64> = curves.iter().map(|c| c.fit.slope).collect();
    let lambda_s = stats::mean(&rates);
    let spread = rates.iter().map(|r| (r / lambda_s - 1.0).abs()).fold(0.0, f64::max);
    Ok(FixedPointExponent { lambda_s, curves, spread })
}

/// Growth rate of the wave-number-q deviation from the uniform state at a
/// fixed point, from the linearization `A(q) = −[S]ₓ D(q) + [H]ₓ` with
/// `D(q) = diag(−2J cos q, −4J cos q, 0)`. A(q) has eigenvalues {0, ±λ}, so
/// λ² is minus the sum of its principal 2×2 minors. Returns 0 for elliptic
/// modes.
pub fn fixed_point_mode_exponent(s: Vec3, j: f64, h: f64, q: f64) -> f64 {
    let c = q.cos();
    let hf = classical::one_spin_field(s, j, h);
    let d = [-2.0 * j * c, -4.0 * j * c, 0.0];
    let skew = |v: Vec3| [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]];
    let (ss, hh) = (skew(s), skew(hf));
    let mut a = [[0.0; 3]; 3];
    for r in 0..3 {
        for col in 0..3 {
            a[r][col] = -ss[r][col] * d[col] + hh[r][col];
        }
    }
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    (-minors).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CuspPoint {
    pub delta_j: f64,
    pub coupling: f64,
    pub class: OrbitClass,
    pub period: f64,
    pub lambda: f64,
    pub stderr: f64,
    pub resets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CuspSide {
    pub lambda_a: f64,
    pub c: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspFit {
    pub lambda_a: f64,
    pub c: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub points: Vec<CuspPoint>,
    /// Fits restricted to ΔJ < 0 and ΔJ > 0.
    pub below: Option<CuspSide>,
    pub above: Option<CuspSide>,
    /// |λ_A(below) − λ_A(above)|.
    pub side_asymmetry: f64,
    pub cutoff: f64,
}

/// λ_p(J) = λ_A + C / log|ΔJ|, linear in x = 1/log|ΔJ|, on points with
/// |ΔJ| ≤ `cutoff`.
pub fn fit_cusp(points: &[CuspPoint], cutoff: f64) -> Result<CuspFit> {
    let used: Vec<&CuspPoint> = points.iter().filter(|p| p.delta_j.abs() <= cutoff).collect();
    if used.len() < 3 {
        return Err(Error::FitFailure("cusp fit needs at least 3 points below the cutoff".into()));
    }
    let side = |sel: &dyn Fn(&CuspPoint) -> bool| -> Option<CuspSide> {
        let pts: Vec<&&CuspPoint> = used.iter().filter(|p| sel(p)).collect();
        if pts.len() < 3 {
            return None;
        }
        let x: Vec<f64> = pts.iter().map(|p| 1.0 / p.delta_j.abs().ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.lambda).collect();
        let f = stats::linear_fit(&x, &y);
        Some(CuspSide { lambda_a: f.intercept, c: f.slope, r_squared: f.r_squared })
    };
    let x: Vec<f64> = used.iter().map(|p| 1.0 / p.delta_j.abs().ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.lambda).collect();
    let f = stats::linear_fit(&x, &y);
    let residuals = x.iter().zip(&y).map(|(a, b)| b - f.intercept - f.slope * a).collect();
    let below = side(&|p: &CuspPoint| p.delta_j < 0.0);
    let above = side(&|p: &CuspPoint| p.delta_j > 0.0);
    let side_asymmetry = match (below, above) {
        (Some(a), Some(b)) => (a.lambda_a - b.lambda_a).abs(),
        _ => f64::NAN,
    };
    Ok(CuspFit {
        lambda_a: f.intercept,
        c: f.slope,
        r_squared: f.r_squared,
        residuals,
        points: points.to_vec(),
        below,
        above,
        side_asymmetry,
        cutoff,
    })
}

/// Periodic-orbit exponents at J = J* + ΔJ, fitted with [`fit_cusp`]. The
/// minimum number of resets is raised so every run covers ≥ `periods` orbit
/// periods.
pub fn cusp_scan(
    h: f64,
    deltas: &[f64],
    length: usize,
    cfg: &BenettinConfig,
    periods: f64,
    cutoff: f64,
) -> Result<CuspFit> {
    let fp = classical::find_separatrix_j(h)?;
    let pts = par::map_range(deltas.len(), |k| -> Result<CuspPoint> {
        let dj = deltas[k];
        let params = HamiltonianParams::new(fp.coupling + dj, h, length)?;
        let orbit = periodic_orbit(&params, [0.0, 0.0, 1.0], &OrbitOptions::default())?;
        let mut c = *cfg;
        c.seed = rng::sub_seed(cfg.seed, k as u64);
        let need = (periods * orbit.period / c.reset_interval).ceil() as usize;
        c.resets = match c.resets {
            ResetPolicy::Adaptive { min, max, rel_tol, tail } => {
                ResetPolicy::Adaptive { min: min.max(need), max: max.max(need), rel_tol, tail }
            }
            ResetPolicy::Fixed(m) => ResetPolicy::Fixed(m.max(need)),
        };
        let run = benettin(&params, &Reference::periodic(), &c)?;
        Ok(CuspPoint {
            delta_j: dj,
            coupling: params.coupling,
            class: orbit.class,
            period: orbit.period,
            lambda: run.exponent,
            stderr: run.stderr,
            resets: run.resets,
        })
    });
    let pts: Vec<CuspPoint> = pts.into_iter().collect::<Result<_>>()?;
    fit_cusp(&pts, cutoff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub delta_j: f64,
    pub class: OrbitClass,
    pub min_distance: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatrixScalings {
    pub points: Vec<ScalingPoint>,
    /// log|ΔS|_min against log|ΔJ|; slope is the exponent p.
    pub distance_rotation: LineFit,
    pub distance_libration: LineFit,
    /// T against −log|ΔJ|; slope is s/λ_S.
    pub period_rotation: LineFit,
    pub period_libration: LineFit,
    /// One-spin saddle rate at J*.
    pub lambda_s: f64,
}

/// Closest approach to the saddle and period of the orbit from (0,0,1) at
/// J* + ΔJ, with power-law and logarithmic fits on each side.
pub fn separatrix_scalings(h: f64, deltas: &[f64]) -> Result<SeparatrixScalings> {
    let fp = classical::find_separatrix_j(h)?;
    let opts = OrbitOptions { sample_stride: 1, ..OrbitOptions::default() };
    let pts = par::map(deltas, |&dj| -> Result<ScalingPoint> {
        let params = HamiltonianParams::new(fp.coupling + dj, h, 2)?;
        let orbit = periodic_orbit(&params, [0.0, 0.0, 1.0], &opts)?;
        let saddle = find_saddle(params.coupling, h)
            .ok_or_else(|| Error::InvalidParameter(format!("no saddle at J = {}", params.coupling)))?;
        Ok(ScalingPoint {
            delta_j: dj,
            class: orbit.class,
            min_distance: orbit.min_distance_to(saddle.orientation),
            period: orbit.period,
        })
    });
    let points: Vec<ScalingPoint> = pts.into_iter().collect::<Result<_>>()?;
    let fit = |class: OrbitClass, f: &dyn Fn(&ScalingPoint) -> (f64, f64)| -> Result<LineFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter(|p| p.class == class).map(f).unzip();
        if x.len() < 3 {
            return Err(Error::FitFailure(format!("need ≥ 3 {class:?} points")));
        }
        Ok(stats::linear_fit(&x, &y))
    };
    let dist = |p: &ScalingPoint| (p.delta_j.abs().ln(), p.min_distance.ln());
    let per = |p: &ScalingPoint| (-p.delta_j.abs().ln(), p.period);
    Ok(SeparatrixScalings {
        distance_rotation: fit(OrbitClass::Rotation, &dist)?,
        distance_libration: fit(OrbitClass::Libration, &dist)?,
        period_rotation: fit(OrbitClass::Rotation, &per)?,
        period_libration: fit(OrbitClass::Libration, &per)?,
        lambda_s: fp.exponent,
        points,
    })
}

/// Benettin λ_p for each chain length, all at the same J and h.
pub fn scan_lengths(j: f64, h: f64, lengths: &[usize], cfg: &BenettinConfig) -> Result<Vec<LyapunovRun>> {
    par::map_range(lengths.len(), |k| {
        let params = HamiltonianParams::new(j, h, lengths[k])?;
        let mut c = *cfg;
        c.seed = rng::sub_seed(cfg.seed, k as u64);
        benettin(&params, &Reference::periodic(), &c)
    })
    .into_iter()
    .collect()
}

/// Benettin λ_p for each coupling at fixed L.
pub fn scan_couplings(couplings: &[f64], h: f64, length: usize, cfg: &BenettinConfig) -> Result<Vec<LyapunovRun>> {
    par::map_range(couplings.len(), |k| {
        let params = HamiltonianParams::new(couplings[k], h, length)?;
        let mut c = *cfg;
        c.seed = rng::sub_seed(cfg.seed, k as u64);
        benettin(&params, &Reference::periodic(), &c)
    })
    .into_iter()
    .collect()
}

/// Floquet exponent of the plane-wave deviation with wave number `q` around
/// the uniform orbit from (0,0,1).
///
/// A deviation δS_m = Re(a e^{iqm}) obeys
/// `da/dt = δH(a) × S + H(S) × a` with `δH(a) = (−2J cos q a_x, −4J cos q a_y, 0)`.
/// The exponent is ln|μ_max|/T for the monodromy over one period, restricted
/// to the tangent plane at (0,0,1).
pub fn floquet_exponent(j: f64, h: f64, q: f64, period: f64, dt: f64) -> f64 {
    let steps = (period / dt).round() as usize;
    let dt = period / steps as f64;
    let c = q.cos();
    let field = |s: Vec3| classical::one_spin_field(s, j, h);
    // State: spin plus two tangent columns.
    let rhs = |y: &[Vec3; 3]| -> [Vec3; 3] {
        let s = y[0];
        let hs = field(s);
        let mut out = [vec3::cross(hs, s), [0.0; 3], [0.0; 3]];
        for k in 1..3 {
            let a = y[k];
            let dh = [-2.0 * j * c * a[0], -4.0 * j * c * a[1], 0.0];
            out[k] = vec3::add(vec3::cross(dh, s), vec3::cross(hs, a));
        }
        out
    };
    let mut y: [Vec3; 3] = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
    let comb = |y: &[Vec3; 3], k: &[Vec3; 3], f: f64| -> [Vec3; 3] {
        [vec3::axpy(y[0], f, k[0]), vec3::axpy(y[1], f, k[1]), vec3::axpy(y[2], f, k[2])]
    };
    for _ in 0..steps {
        let k1 = rhs(&y);
        let k2 = rhs(&comb(&y, &k1, 0.5 * dt));
        let k3 = rhs(&comb(&y, &k2, 0.5 * dt));
        let k4 = rhs(&comb(&y, &k3, dt));
        for i in 0..3 {
            for c in 0..3 {
                y[i][c] += dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            }
        }
        y[0] = vec3::normalize(y[0]);
    }
    // Tangent plane at (0,0,1) is spanned by x̂, ŷ.
    let m = [[y[1][0], y[2][0]], [y[1][1], y[2][1]]];
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    let mu = if disc > 0.0 { 0.5 * (tr.abs() + disc.sqrt()) } else { det.abs().sqrt() };
    (mu.ln() / period).max(0.0)
}

/// Floquet exponents over a q grid for the orbit from (0,0,1).
pub fn floquet_spectrum(j: f64, h: f64, qs: &[f64], dt: f64) -> Result<Vec<(f64, f64)>> {
    let params = HamiltonianParams::new(j, h, 2)?;
    let orbit = periodic_orbit(&params, [0.0, 0.0, 1.0], &OrbitOptions::default())?;
    Ok(par::map(qs, |&q| (q, floquet_exponent(j, h, q, orbit.period, dt))))
}

/// Largest Floquet exponent over the allowed wave numbers 2πn/L, with the
/// maximizing n.
pub fn floquet_lambda_p(j: f64, h: f64, length: usize, dt: f64) -> Result<(f64, usize)> {
    let params = HamiltonianParams::new(j, h, 2)?;
    let orbit = periodic_orbit(&params, [0.0, 0.0, 1.0], &OrbitOptions::default())?;
    let mut best = (0.0, 0);
    for n in 1..=length / 2 {
        let q = 2.0 * std::f64::consts::PI * n as f64 / length as f64;
        let l = floquet_exponent(j, h, q, orbit.period, dt);
        if l > best.0 {
            best = (l, n);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn noninteracting_chain_has_zero_exponent() {
        let params = HamiltonianParams::new(0.0, 1.0, 6).unwrap();
        let cfg = BenettinConfig { resets: ResetPolicy::Fixed(50), ..BenettinConfig::periodic(1) };
        let run = benettin(&params, &Reference::periodic(), &cfg).unwrap();
        assert!(run.exponent.abs() < 1e-3, "{}", run.exponent);
    }

    #[test]
    fn exponent_is_mean_log_stretch_over_tr() {
        let params = HamiltonianParams::new(1.76, 1.0, 6).unwrap();
        let cfg = BenettinConfig { resets: ResetPolicy::Fixed(40), ..BenettinConfig::periodic(2) };
        let run = benettin(&params, &Reference::periodic(), &cfg).unwrap();
        assert_eq!(run.resets, 40);
        assert_eq!(run.exponent, stats::mean(&run.log_stretches) / run.reset_interval);
        let n = deviation_norm(&run.lyapunov_vector);
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_preserves_direction() {
        let mut rng = rng::rng_from_seed(4);
        let reference = vec![[0.0, 0.0, 1.0]; 5];
        let delta = random_tangent_deviation(&reference, 3e-5, &mut rng);
        let d = deviation_norm(&delta);
        let scaled: Vec<Vec3> = delta.iter().map(|v| vec3::scale(*v, 1e-8 / d)).collect();
        let dot: f64 = delta.iter().zip(&scaled).map(|(a, b)| vec3::dot(*a, *b)).sum();
        let cos = dot / (d * deviation_norm(&scaled));
        assert!((cos - 1.0).abs() < 1e-12);
        assert!((deviation_norm(&scaled) - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn blowup_when_interval_too_long() {
        let params = HamiltonianParams::new(1.76, 1.0, 13).unwrap();
        let cfg = BenettinConfig {
            d0: Some(1e-6),
            reset_interval: 60.0,
            resets: ResetPolicy::Fixed(2),
            ..BenettinConfig::periodic(1)
        };
        let r = benettin(&params, &Reference::periodic(), &cfg);
        assert!(matches!(r, Err(Error::DeviationBlowup { .. })), "{r:?}");
    }

    #[test]
    fn energy_shell_sampler_hits_target() {
        let params = HamiltonianParams::new(1.76, 1.0, 10).unwrap();
        let mut rng = rng::rng_from_seed(8);
        let st = random_state_at_energy(&params, 0.0, &mut rng);
        assert!(classical::energy(&st, &params).abs() < 1e-10);
        assert!(st.max_norm_error() < 1e-12);
    }

    #[test]
    fn floquet_matches_fixed_point_linearization_limits() {
        // J = 0: free precession, every mode neutral.
        assert!(floquet_exponent(0.0, 1.0, 0.7, 2.0 * PI / 2f64.sqrt(), 1e-3) < 1e-9);
        // q = 0 is the one-spin flow itself: neutral.
        let p = HamiltonianParams::new(1.76, 1.0, 2).unwrap();
        let orbit = periodic_orbit(&p, [0.0, 0.0, 1.0], &OrbitOptions::default()).unwrap();
        assert!(floquet_exponent(1.76, 1.0, 0.0, orbit.period, 1e-3) < 1e-6);
        // Main window peak near q ≈ 0.97.
        let l = floquet_exponent(1.76, 1.0, 0.975, orbit.period, 1e-3);
        assert!((l - 0.3235).abs() < 2e-3, "{l}");
    }

    #[test]
    fn fixed_point_modes() {
        let fp = classical::find_separatrix_j(1.0).unwrap();
        let rate = |q: f64| fixed_point_mode_exponent(fp.orientation, fp.coupling, 1.0, q);
        assert!((rate(0.0) - fp.exponent).abs() < 1e-9);
        assert!((rate(PI / 5.0) - 1.699).abs() < 1e-3, "{}", rate(PI / 5.0));
        assert_eq!(rate(PI / 2.0), 0.0);
        for k in 1..=50 {
            assert!(rate(PI * k as f64 / 50.0) < rate(0.0));
        }
    }

    #[test]
    fn fixed_point_growth_is_d0_independent() {
        let fp = classical::find_separatrix_j(1.0).unwrap();
        let r = fixed_point_exponent(&fp, 10, &[1e-6, 1e-5, 1e-4], Perturbation::Uniform, 1e-3, 3).unwrap();
        assert!(r.spread < 0.02, "{}", r.spread);
        assert!((r.lambda_s - fp.exponent).abs() < 0.01, "{}", r.lambda_s);
        let short = fixed_point_exponent(&fp, 10, &[1e-3], Perturbation::Uniform, 1e-3, 3);
        assert!(matches!(short, Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn tr_table_classification() {
        let stable: Vec<TrRow> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&t: &f64| TrRow { reset_interval: t, exponent: (0.5 + (t).ln()) / t, stderr: 1e-4, resets: 100 })
            .collect();
        assert_eq!(classify_tr_table(&stable).verdict, Verdict::Stable);
        let unstable: Vec<TrRow> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| TrRow { reset_interval: t, exponent: 0.3 + 0.002 * (i as f64 - 2.0), stderr: 0.005, resets: 100 })
            .collect();
        assert_eq!(classify_tr_table(&unstable).verdict, Verdict::Unstable);
    }
}
