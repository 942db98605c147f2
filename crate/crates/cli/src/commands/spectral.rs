//! Mode intensities, temporal spectra, the unstable-window criterion and
//! long quasiperiodic runs.

use std::f64::consts::PI;
use std::fs;

use clap::Args;
use serde::{Deserialize, Serialize};
use spinchaos::arnold::{self, WatchSample, WatchState};
use spinchaos::classical::{self, periodic_orbit, HamiltonianParams, OrbitOptions, SpinChainState};
use spinchaos::lyapunov;
use spinchaos::spectral::{
    self, find_peaks, fit_peak_grid, growth_rate_ladder, mechanism_a_criterion, peak_frequencies, record_mode_intensities,
    reduced_brillouin, temporal_spectrum, PeakCriterion, UnstableWindow, SPECTRUM_STRIDE, TUKEY_FRACTION,
};

use super::{filled, set};
use crate::config::{Grid, IntGrid};
use crate::output::{io_err, Run};
use crate::{CliError, Ctx, Task};

/// Angular frequency of the one-spin orbit from (0,0,1).
fn orbit_frequency(j: f64, h: f64) -> Result<f64, CliError> {
    let o = periodic_orbit(&HamiltonianParams::new(j, h, 2)?, [0.0, 0.0, 1.0], &OrbitOptions::default())?;
    Ok(2.0 * PI / o.period)
}

fn sample_steps(dt: f64) -> Result<u64, CliError> {
    let n = (SPECTRUM_STRIDE / dt).round();
    if n < 1.0 || (n * dt - SPECTRUM_STRIDE).abs() > 1e-9 {
        return Err(CliError::Usage(format!("dt = {dt} must divide the sampling step {SPECTRUM_STRIDE}")));
    }
    Ok(n as u64)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Integration time.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Record F_q every this many steps.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Number of harmonics n·k_p in the growth-rate ladder.
    #[arg(long)]
    pub harmonics: Option<usize>,
    /// Growth fits stop once the leading mode passes ceiling·L.
    #[arg(long)]
    pub ceiling: Option<f64>,
}

#[derive(Serialize)]
struct ModeRow {
    t: f64,
    k: i64,
    q: f64,
    f: f64,
}

#[derive(Serialize)]
struct LadderRow {
    harmonic: usize,
    k: i64,
    rate: f64,
    multiple: f64,
    t_from: f64,
    t_to: f64,
    decades: f64,
    r_squared: f64,
}

impl Task for ModesArgs {
    const NAME: &'static str = "fourier-modes";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, 18);
        set(&mut self.t, 250.0);
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.stride, 50);
        set(&mut self.harmonics, 3);
        set(&mut self.ceiling, 1e-2);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h, l, dt) = (filled(&self.j), filled(&self.h), filled(&self.l), filled(&self.dt));
        let params = HamiltonianParams::new(j, h, l)?;
        let seeded = WatchState::new(&params, dt, ctx.seed)?;
        let state = SpinChainState { spins: seeded.spins, time: 0.0 };
        let series = record_mode_intensities(&state, &params, filled(&self.t), dt, filled(&self.stride))?;
        let mut rows = Vec::new();
        for (i, t) in series.times.iter().enumerate() {
            for (c, (&k, &q)) in series.k.iter().zip(&series.q).enumerate() {
                if k >= 0 {
                    rows.push(ModeRow { t: *t, k, q, f: series.values[i][c] });
                }
            }
        }
        run.table("modes", &rows)?;
        let (lambda_p, n) = lyapunov::floquet_lambda_p(j, h, l, dt)?;
        let mut lines = vec![format!("lambda_p = {lambda_p:.5} at k_p = {n} (Floquet)")];
        if n == 0 {
            lines.push("no unstable mode: the ladder is empty".into());
            run.json("report.json", &serde_json::json!({ "lambda_p": lambda_p, "k_p": n }))?;
            return Ok(lines);
        }
        let ladder = growth_rate_ladder(&series, n as i64, filled(&self.harmonics), lambda_p, filled(&self.ceiling))?;
        for r in &ladder {
            lines.push(format!(
                "n = {} (k = {}): rate {:.4} = {:.3} × 2 lambda_p over [{:.1}, {:.1}]",
                r.harmonic, r.k, r.rate, r.multiple, r.window.0, r.window.1
            ));
        }
        let rows: Vec<LadderRow> = ladder
            .iter()
            .map(|r| LadderRow {
                harmonic: r.harmonic,
                k: r.k,
                rate: r.rate,
                multiple: r.multiple,
                t_from: r.window.0,
                t_to: r.window.1,
                decades: r.decades,
                r_squared: r.r_squared,
            })
            .collect();
        run.table("ladder", &rows)?;
        run.json("report.json", &serde_json::json!({ "lambda_p": lambda_p, "k_p": n, "ladder": ladder }))?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Window start and width.
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    /// Tukey taper fraction.
    #[arg(long)]
    pub taper: Option<f64>,
    /// Grid search ranges and matching tolerance (bins) for m·ω₀/2 + n·ω₁.
    #[arg(long)]
    pub m_max: Option<i64>,
    #[arg(long)]
    pub n_max: Option<i64>,
    #[arg(long)]
    pub tol_bins: Option<f64>,
}

#[derive(Serialize)]
struct PowerRow {
    omega: f64,
    power: f64,
}

impl Task for SpectrumArgs {
    const NAME: &'static str = "temporal-spectrum";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, 6);
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.start, arnold::QP_ONSET);
        set(&mut self.width, 6000.0);
        set(&mut self.taper, TUKEY_FRACTION);
        set(&mut self.m_max, 8);
        set(&mut self.n_max, 12);
        set(&mut self.tol_bins, 2.0);
        sample_steps(filled(&self.dt)).map(|_| ())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h, dt) = (filled(&self.j), filled(&self.h), filled(&self.dt));
        let params = HamiltonianParams::new(j, h, filled(&self.l))?;
        let (start, width) = (filled(&self.start), filled(&self.width));
        let mut w = WatchState::new(&params, dt, ctx.seed)?;
        let mut signal = Vec::new();
        w.advance(start + width, sample_steps(dt)?, false, &mut |s| signal.push(s.s1x))?;
        let spec = temporal_spectrum(&signal, 0.0, SPECTRUM_STRIDE, start, width, filled(&self.taper))?;
        let crit = PeakCriterion::default();
        let peaks = find_peaks(&spec, &crit);
        let rows: Vec<PowerRow> = spec.omega.iter().zip(&spec.power).map(|(&omega, &power)| PowerRow { omega, power }).collect();
        run.table("spectrum", &rows)?;
        run.table("peaks", &peaks)?;
        let omega_p = orbit_frequency(j, h)?;
        let mut lines = vec![format!("{} peaks; orbit frequency {omega_p:.4}", peaks.len())];
        let mut report = serde_json::json!({ "omega_p": omega_p, "interval": spec.interval, "bin": spec.bin_width() });
        match peak_frequencies(&spec, omega_p, 0.25, &crit) {
            Ok(cf) => {
                let grid = fit_peak_grid(&peaks, cf, spec.bin_width(), filled(&self.m_max), filled(&self.n_max), filled(&self.tol_bins));
                lines.push(format!(
                    "omega0 = {:.5}, omega1 = {:.5}, ratio {:.3}; {:.0}% of peaks on the grid",
                    grid.omega0,
                    grid.omega1,
                    grid.ratio,
                    100.0 * grid.matched
                ));
                run.table("grid", &grid.assignments)?;
                report["frequencies"] = serde_json::json!(cf);
                report["grid"] = serde_json::json!({
                    "omega0": grid.omega0, "omega1": grid.omega1, "ratio": grid.ratio, "matched": grid.matched
                });
            }
            Err(e) => lines.push(format!("no characteristic frequencies: {e}")),
        }
        report["min_f0"] = serde_json::json!(w.min_f0);
        report["breakdown"] = serde_json::json!(w.breakdown);
        run.json("report.json", &report)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Chain lengths to classify.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<IntGrid>,
    /// Number of q samples on (0, π] for the Floquet window scan.
    #[arg(long)]
    pub q_samples: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Replace the fitted narrow window by the published one at J = 1.76.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub published_narrow: Option<bool>,
    /// Explicit windows as q0,lambda_max,alpha triples (skips the scan).
    #[arg(long)]
    pub window: Option<Vec<Grid>>,
    /// Widen every window by this much in q.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Drop scanned windows whose peak rate is below this.
    #[arg(long)]
    pub min_rate: Option<f64>,
}

#[derive(Serialize)]
struct FloquetRow {
    q: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct CriterionRow {
    #[serde(rename = "L")]
    l: usize,
    operational: bool,
    unstable_n: String,
    k_p: usize,
    reduced_u: Option<usize>,
    all_coupled: Option<bool>,
}

impl Task for MechanismArgs {
    const NAME: &'static str = "mechanism-criterion";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, IntGrid(vec![6, 18, 19, 21, 42]));
        set(&mut self.q_samples, 1570);
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.published_narrow, false);
        set(&mut self.margin, 0.0);
        set(&mut self.min_rate, 0.05);
        if let Some(ws) = &self.window {
            if ws.iter().any(|w| w.0.len() != 3) {
                return Err(CliError::Usage("--window takes q0,lambda_max,alpha".into()));
            }
        }
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h, dt) = (filled(&self.j), filled(&self.h), filled(&self.dt));
        let mut lines = Vec::new();
        let windows: Vec<UnstableWindow> = match &self.window {
            Some(ws) => ws.iter().map(|w| UnstableWindow { q0: w.0[0], lambda_max: w.0[1], alpha: w.0[2] }).collect(),
            None => {
                let n = filled(&self.q_samples);
                let qs: Vec<f64> = (1..=n).map(|i| PI * i as f64 / n as f64).collect();
                let curve = lyapunov::floquet_spectrum(j, h, &qs, dt)?;
                let rows: Vec<FloquetRow> = curve.iter().map(|&(q, lambda)| FloquetRow { q, lambda }).collect();
                run.table("floquet", &rows)?;
                let measured = spectral::unstable_windows(&curve);
                run.json("windows.json", &measured)?;
                let min_rate = filled(&self.min_rate);
                let mut ws = Vec::new();
                for m in &measured {
                    let kept = m.peak.1 >= min_rate;
                    lines.push(format!(
                        "window q in [{:.4}, {:.4}]: q0 = {:.4}, lambda_max = {:.4}, alpha = {:.2}{}",
                        m.q_lo,
                        m.q_hi,
                        m.fit.q0,
                        m.fit.lambda_max,
                        m.fit.alpha,
                        if kept { "" } else { " (below --min-rate, ignored)" }
                    ));
                    if kept {
                        ws.push(m.fit);
                    }
                }
                if filled(&self.published_narrow) {
                    let narrow = UnstableWindow::NARROW_J176;
                    ws.retain(|w| (w.q0 - narrow.q0).abs() > 0.1);
                    ws.push(narrow);
                }
                ws
            }
        };
        let mut rows = Vec::new();
        for &l in &filled(&self.l).0 {
            let m = mechanism_a_criterion(l, &windows, filled(&self.margin));
            let (_, k_p) = lyapunov::floquet_lambda_p(j, h, l, dt)?;
            let zone = if k_p > 0 { reduced_brillouin(l, k_p).ok() } else { None };
            let ns: Vec<String> = m.modes.iter().map(|m| m.n.to_string()).collect();
            lines.push(format!("L = {l:3}: {} (n = {})", if m.operational { "operational" } else { "not operational" }, ns.join(",")));
            rows.push(CriterionRow {
                l,
                operational: m.operational,
                unstable_n: ns.join(" "),
                k_p,
                reduced_u: zone.as_ref().map(|z| z.u),
                all_coupled: zone.as_ref().map(|z| z.all_coupled),
            });
        }
        run.table("criterion", &rows)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WatchArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Run until this time (a resumed run may extend it).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Write one sample row every this many time units.
    #[arg(long)]
    pub record_every: Option<f64>,
    /// Window width for the frequency-drift table.
    #[arg(long)]
    pub drift_width: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stop_on_breakdown: Option<bool>,
    /// Continue from checkpoint.json in the run directory.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resume: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    state: WatchState,
    /// s₁ˣ samples of the current drift window and its start time.
    window: Vec<f64>,
    window_start: f64,
    samples_len: u64,
    drift_len: u64,
}

const CHECKPOINT: &str = "checkpoint.json";

#[derive(Serialize)]
struct DriftOut {
    start: f64,
    omega0: Option<f64>,
    omega1: Option<f64>,
    ratio: Option<f64>,
}

impl Task for WatchArgs {
    const NAME: &'static str = "arnold-watch";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, 6);
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.t_end, 1e5);
        set(&mut self.record_every, 1.0);
        set(&mut self.drift_width, 6000.0);
        set(&mut self.stop_on_breakdown, false);
        set(&mut self.resume, false);
        sample_steps(filled(&self.dt)).map(|_| ())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h, dt) = (filled(&self.j), filled(&self.h), filled(&self.dt));
        let params = HamiltonianParams::new(j, h, filled(&self.l))?;
        let steps = sample_steps(dt)?;
        let record = ((filled(&self.record_every) / SPECTRUM_STRIDE).round() as u64).max(1);
        let width = filled(&self.drift_width);
        let window_len = (width / SPECTRUM_STRIDE).round() as usize + 1;
        let omega_p = orbit_frequency(j, h)?;
        let crit = PeakCriterion::default();
        let ck_path = run.dir.join(CHECKPOINT);

        let mut ck = if filled(&self.resume) {
            let text = fs::read_to_string(&ck_path).map_err(|e| io_err(&ck_path, e))?;
            let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| io_err(&ck_path, e))?;
            let s = &ck.state;
            if s.coupling != j || s.field != h || s.dt != dt || s.seed != ctx.seed || s.spins.len() != params.length {
                return Err(CliError::Usage("checkpoint parameters differ from this run (J, h, L, dt, seed)".into()));
            }
            ck
        } else {
            Checkpoint { state: WatchState::new(&params, dt, ctx.seed)?, window: Vec::new(), window_start: 0.0, samples_len: 0, drift_len: 0 }
        };
        let resuming = ck.state.steps > 0;
        let mut samples = run.stream("samples", resuming.then_some(ck.samples_len))?;
        let mut drift = run.stream("drift", resuming.then_some(ck.drift_len))?;

        let t_end = filled(&self.t_end);
        let stop = filled(&self.stop_on_breakdown);
        let mut failure: Option<CliError> = None;
        while ck.state.time() < t_end - 0.5 * dt && !(stop && ck.state.breakdown.is_some()) {
            let next = ((ck.state.time() / arnold::CHECKPOINT_EVERY).floor() + 1.0) * arnold::CHECKPOINT_EVERY;
            let target = next.min(t_end);
            let (window, window_start) = (&mut ck.window, &mut ck.window_start);
            let mut on_sample = |s: &WatchSample| {
                if failure.is_some() {
                    return;
                }
                let k = (s.time / SPECTRUM_STRIDE).round() as u64;
                if k % record == 0 {
                    if let Err(e) = samples.row(s) {
                        failure = Some(e);
                    }
                }
                if window.is_empty() {
                    *window_start = s.time;
                }
                window.push(s.s1x);
                if window.len() == window_len {
                    let row = match temporal_spectrum(window, *window_start, SPECTRUM_STRIDE, *window_start, width, TUKEY_FRACTION) {
                        Ok(sp) => match peak_frequencies(&sp, omega_p, 0.25, &crit) {
                            Ok(cf) => DriftOut { start: *window_start, omega0: Some(cf.omega0), omega1: Some(cf.omega1), ratio: Some(cf.omega0 / cf.omega1) },
                            Err(_) => DriftOut { start: *window_start, omega0: None, omega1: None, ratio: None },
                        },
                        Err(_) => DriftOut { start: *window_start, omega0: None, omega1: None, ratio: None },
                    };
                    if let Err(e) = drift.row(&row) {
                        failure = Some(e);
                    }
                    // Windows share their boundary sample.
                    let last = *window.last().unwrap_or(&0.0);
                    window.clear();
                    window.push(last);
                    *window_start = s.time;
                }
            };
            ck.state.advance(target, steps, stop, &mut on_sample)?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            ck.samples_len = samples.flush()?;
            ck.drift_len = drift.flush()?;
            let text = serde_json::to_string(&ck).map_err(|e| io_err(&ck_path, e))?;
            fs::write(&ck_path, text).map_err(|e| io_err(&ck_path, e))?;
        }
        samples.finish()?;
        drift.finish()?;
        let s = &ck.state;
        let report = serde_json::json!({
            "time": s.time(),
            "min_f0_after_onset": s.min_f0,
            "breakdown": s.breakdown,
            "quasiperiodic_until": s.breakdown.unwrap_or(s.time()),
            "omega_p": omega_p,
        });
        run.json("report.json", &report)?;
        let mut lines = vec![format!("reached t = {:.1}", s.time())];
        match s.breakdown {
            Some(t) => lines.push(format!("breakdown (F0 < L/2) at t = {t:.1}")),
            None => lines.push(format!("still quasiperiodic, min F0 = {:.4} of {}", s.min_f0.unwrap_or(f64::NAN), params.length)),
        }
        Ok(lines)
    }
}
