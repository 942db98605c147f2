//! Orbits, the separatrix and Lyapunov exponents of the classical chain.

use clap::Args;
use serde::{Deserialize, Serialize};
use spinchaos::classical::{self, periodic_orbit, HamiltonianParams, OneSpin, OrbitClass, OrbitOptions, Propagator};
use spinchaos::lyapunov::{
    self, benettin, BenettinConfig, Perturbation, Reference, ReferenceKind, ResetPolicy,
};
use spinchaos::spectral::{fit_lambda_of_l, lyapunov_vector_spectrum};
use spinchaos::{rng, vec3, Error};

use super::{filled, set};
use crate::config::{Grid, IntGrid};
use crate::output::Run;
use crate::{CliError, Ctx, Task};

fn j_star(h: f64) -> Result<f64, CliError> {
    Ok(classical::find_separatrix_j(h)?.coupling)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitArgs {
    /// Coupling(s) J.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<Grid>,
    /// Field h.
    #[arg(long)]
    pub h: Option<f64>,
    /// Initial spin as x,y,z (normalized).
    #[arg(long)]
    pub s0: Option<Grid>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Give up closing the orbit after this time; a non-closing orbit is
    /// reported as open and sampled up to `open-t`.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub open_t: Option<f64>,
    /// Keep every n-th step as a sample.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Serialize)]
struct OrbitRow {
    #[serde(rename = "J")]
    j: f64,
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Serialize)]
struct OrbitSummary {
    #[serde(rename = "J")]
    j: f64,
    h: f64,
    class: Option<OrbitClass>,
    closed: bool,
    period: Option<f64>,
    energy: f64,
    closure_distance: Option<f64>,
    samples: usize,
}

impl Task for OrbitArgs {
    const NAME: &'static str = "classical-orbit";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, Grid(vec![1.76]));
        set(&mut self.h, 1.0);
        set(&mut self.s0, Grid(vec![0.0, 0.0, 1.0]));
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.t_max, 1e3);
        set(&mut self.open_t, 100.0);
        set(&mut self.stride, 10);
        if filled(&self.s0).0.len() != 3 {
            return Err(CliError::Usage("--s0 needs three components".into()));
        }
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let s0 = filled(&self.s0).0;
        let s0 = vec3::normalize([s0[0], s0[1], s0[2]]);
        let h = filled(&self.h);
        let opts = OrbitOptions {
            dt: filled(&self.dt),
            t_max: filled(&self.t_max),
            sample_stride: filled(&self.stride),
            ..OrbitOptions::default()
        };
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        let mut lines = Vec::new();
        for &j in &filled(&self.j).0 {
            let params = HamiltonianParams::new(j, h, 2)?;
            let energy = classical::one_spin_energy(s0, j, h);
            match periodic_orbit(&params, s0, &opts) {
                Ok(o) => {
                    for (t, s) in o.sample_times.iter().zip(&o.samples) {
                        rows.push(OrbitRow { j, t: *t, x: s[0], y: s[1], z: s[2] });
                    }
                    lines.push(format!("J = {j}: {:?}, period {:.6}, energy {:.6}", o.class, o.period, o.energy));
                    summary.push(OrbitSummary {
                        j,
                        h,
                        class: Some(o.class),
                        closed: true,
                        period: Some(o.period),
                        energy: o.energy,
                        closure_distance: Some(o.closure_distance),
                        samples: o.samples.len(),
                    });
                }
                Err(Error::NoClosure { .. }) => {
                    // At the separatrix the orbit only approaches the saddle.
                    let mut prop = Propagator::new(OneSpin { coupling: j, field: h }, opts.dt, 1);
                    let mut s = [s0];
                    let steps = (filled(&self.open_t) / opts.dt).round() as usize;
                    let stride = opts.sample_stride.max(1);
                    rows.push(OrbitRow { j, t: 0.0, x: s0[0], y: s0[1], z: s0[2] });
                    for k in (stride..=steps).step_by(stride) {
                        prop.advance(&mut s, stride, (k - stride) as f64 * opts.dt)?;
                        rows.push(OrbitRow { j, t: k as f64 * opts.dt, x: s[0][0], y: s[0][1], z: s[0][2] });
                    }
                    lines.push(format!("J = {j}: open (no return within t_max), energy {energy:.6}"));
                    summary.push(OrbitSummary {
                        j,
                        h,
                        class: Some(classical::classify_orbit(&params, energy)),
                        closed: false,
                        period: None,
                        energy,
                        closure_distance: None,
                        samples: steps / stride + 1,
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        run.table("orbit", &rows)?;
        run.json("report.json", &summary)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatrixArgs {
    #[arg(long)]
    pub h: Option<f64>,
    /// Bisection bracket for J.
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also compute closest approach and period scalings at J* + ΔJ for
    /// ΔJ = ±10^-k, k on this grid.
    #[arg(long)]
    pub scaling_decades: Option<Grid>,
}

#[derive(Serialize)]
struct ScalingRow {
    delta_j: f64,
    class: OrbitClass,
    min_distance: f64,
    period: f64,
}

impl Task for SeparatrixArgs {
    const NAME: &'static str = "separatrix";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.h, 1.0);
        set(&mut self.lo, 0.5);
        set(&mut self.hi, 2.0);
        set(&mut self.tol, 1e-10);
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let h = filled(&self.h);
        let fp = classical::find_separatrix_j_in(h, filled(&self.lo), filled(&self.hi), filled(&self.tol))?;
        let mut lines = vec![
            format!("J* = {:.10}", fp.coupling),
            format!("S* = ({:.10}, {:.10}, {:.10})", fp.orientation[0], fp.orientation[1], fp.orientation[2]),
            format!("lambda_S = {:.6}", fp.exponent),
        ];
        let mut report = serde_json::json!({ "fixed_point": fp });
        if let Some(Grid(decades)) = &self.scaling_decades {
            let deltas: Vec<f64> = decades.iter().flat_map(|k| [-(10f64.powf(-k)), 10f64.powf(-k)]).collect();
            let s = lyapunov::separatrix_scalings(h, &deltas)?;
            let rows: Vec<ScalingRow> = s
                .points
                .iter()
                .map(|p| ScalingRow { delta_j: p.delta_j, class: p.class, min_distance: p.min_distance, period: p.period })
                .collect();
            run.table("scalings", &rows)?;
            lines.push(format!(
                "closest approach exponent: rotation {:.4}, libration {:.4}",
                s.distance_rotation.slope, s.distance_libration.slope
            ));
            lines.push(format!(
                "period slope: rotation {:.4} (1/lambda_S = {:.4}), libration {:.4} (2/lambda_S = {:.4})",
                s.period_rotation.slope,
                1.0 / s.lambda_s,
                s.period_libration.slope,
                2.0 / s.lambda_s
            ));
            report["scalings"] = serde_json::json!({
                "distance_rotation": s.distance_rotation,
                "distance_libration": s.distance_libration,
                "period_rotation": s.period_rotation,
                "period_libration": s.period_libration,
                "lambda_s": s.lambda_s,
            });
        }
        run.json("report.json", &report)?;
        Ok(lines)
    }
}

/// Benettin settings shared by the scans.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenettinArgs {
    /// Reference trajectory: periodic (all spins up) or ergodic (E = 0 shell).
    #[arg(long)]
    pub reference: Option<String>,
    /// Reset interval T_R.
    #[arg(long = "TR")]
    #[serde(rename = "TR")]
    pub tr: Option<f64>,
    /// Fixed number of resets M; adaptive (300 to 5000) for periodic runs when unset.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Deviation norm d0 [default: 1e-8·√L].
    #[arg(long)]
    pub d0: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Burn-in time for ergodic references.
    #[arg(long)]
    pub burn_in: Option<f64>,
}

impl BenettinArgs {
    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.reference, "periodic".to_string());
        let ergodic = match filled(&self.reference).as_str() {
            "periodic" => false,
            "ergodic" => true,
            other => return Err(CliError::Usage(format!("--reference must be periodic or ergodic, got {other:?}"))),
        };
        set(&mut self.tr, if ergodic { 5.0 } else { 1.0 });
        if ergodic {
            set(&mut self.m, 1000);
        }
        set(&mut self.dt, classical::DEFAULT_DT);
        set(&mut self.burn_in, 100.0);
        Ok(())
    }

    fn config(&self, seed: u64) -> BenettinConfig {
        let base = if self.ergodic() { BenettinConfig::ergodic(seed) } else { BenettinConfig::periodic(seed) };
        BenettinConfig {
            d0: self.d0,
            reset_interval: filled(&self.tr),
            resets: self.m.map(ResetPolicy::Fixed).unwrap_or(base.resets),
            dt: filled(&self.dt),
            seed,
        }
    }

    fn ergodic(&self) -> bool {
        filled(&self.reference) == "ergodic"
    }

    /// One run at (J, h, L) with its own sub-seed.
    fn run(&self, j: f64, h: f64, length: usize, seed: u64) -> Result<lyapunov::LyapunovRun, CliError> {
        let params = HamiltonianParams::new(j, h, length)?;
        let cfg = self.config(seed);
        let reference = if self.ergodic() {
            lyapunov::ergodic_reference(&params, 0.0, filled(&self.burn_in), rng::sub_seed(seed, u64::MAX))?
        } else {
            Reference::periodic()
        };
        Ok(benettin(&params, &reference, &cfg)?)
    }
}

#[derive(Serialize)]
struct LambdaRow {
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "L")]
    l: usize,
    kind: ReferenceKind,
    lambda: f64,
    stderr: f64,
    resets: usize,
    k_p: i64,
    q_p: f64,
    seed: u64,
}

#[derive(Serialize)]
struct VectorRow {
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "L")]
    l: usize,
    k: i64,
    q: f64,
    f: f64,
}

fn scan(
    b: &BenettinArgs,
    points: &[(f64, usize)],
    h: f64,
    seed: u64,
    run: &mut Run,
) -> Result<Vec<LambdaRow>, CliError> {
    let results = spinchaos::par::map_range(points.len(), |k| {
        let (j, l) = points[k];
        let s = rng::sub_seed(seed, k as u64);
        b.run(j, h, l, s).map(|r| (j, l, s, r))
    });
    let mut rows = Vec::new();
    let mut vectors = Vec::new();
    for r in results {
        let (j, l, s, r) = r?;
        let spec = lyapunov_vector_spectrum(&r.lyapunov_vector);
        for ((k, q), f) in spec.k.iter().zip(&spec.q).zip(&spec.f) {
            vectors.push(VectorRow { j, l, k: *k, q: *q, f: *f });
        }
        rows.push(LambdaRow {
            j,
            l,
            kind: r.kind,
            lambda: r.exponent,
            stderr: r.stderr,
            resets: r.resets,
            k_p: spec.k_p,
            q_p: spec.q_p,
            seed: s,
        });
    }
    run.table("vectors", &vectors)?;
    Ok(rows)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanJArgs {
    /// Coupling grid, e.g. 0.6..2.4:0.05.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<Grid>,
    /// Chain length(s).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<IntGrid>,
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub benettin: BenettinArgs,
}

impl Task for ScanJArgs {
    const NAME: &'static str = "lyapunov-scan-J";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, Grid(vec![0.79, 1.76]));
        set(&mut self.l, IntGrid(vec![10]));
        set(&mut self.h, 1.0);
        self.benettin.fill()
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let points: Vec<(f64, usize)> =
            filled(&self.l).0.iter().flat_map(|&l| filled(&self.j).0.into_iter().map(move |j| (j, l))).collect();
        let rows = scan(&self.benettin, &points, filled(&self.h), ctx.seed, run)?;
        let lines = rows
            .iter()
            .map(|r| format!("L = {:3}  J = {:.4}  lambda = {:.5} ± {:.5}  q_p = {:.4}", r.l, r.j, r.lambda, r.stderr, r.q_p))
            .collect();
        run.table("lambda", &rows)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanLArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    /// Chain lengths, e.g. 4..44.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<IntGrid>,
    #[arg(long)]
    pub h: Option<f64>,
    /// λ_p at or below this counts as stable in the window fit.
    #[arg(long)]
    pub stable_threshold: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub benettin: BenettinArgs,
}

impl Task for ScanLArgs {
    const NAME: &'static str = "lyapunov-scan-L";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.l, IntGrid((4..=44).collect()));
        set(&mut self.h, 1.0);
        set(&mut self.stable_threshold, 0.02);
        self.benettin.fill()
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let j = filled(&self.j);
        let points: Vec<(f64, usize)> = filled(&self.l).0.iter().map(|&l| (j, l)).collect();
        let rows = scan(&self.benettin, &points, filled(&self.h), ctx.seed, run)?;
        let mut lines: Vec<String> =
            rows.iter().map(|r| format!("L = {:3}  lambda = {:.5} ± {:.5}  k_p = {}", r.l, r.lambda, r.stderr, r.k_p)).collect();
        run.table("lambda", &rows)?;
        let samples: Vec<(usize, f64)> = rows.iter().map(|r| (r.l, r.lambda)).collect();
        match fit_lambda_of_l(&samples, filled(&self.stable_threshold)) {
            Ok(fit) => {
                let stable: Vec<usize> = (2..=100).filter(|&l| fit.predicted_stable(l)).collect();
                lines.push(format!(
                    "fit: lambda_max = {:.4}, q0 = {:.4}, alpha = {:.3}, rms = {:.4}",
                    fit.window.lambda_max, fit.window.q0, fit.window.alpha, fit.rms
                ));
                lines.push(format!("predicted stable L <= 100: {stable:?}"));
                run.json("fit.json", &serde_json::json!({ "fit": fit, "predicted_stable": stable }))?;
            }
            Err(e) => lines.push(format!("window fit unavailable: {e}")),
        }
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Reset intervals T_R; must span at least a decade.
    #[arg(long = "TR")]
    #[serde(rename = "TR")]
    pub tr: Option<Grid>,
    /// Resets per T_R.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
}

impl Task for CertificateArgs {
    const NAME: &'static str = "stability-certificate";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.l, 23);
        set(&mut self.h, 1.0);
        set(&mut self.tr, Grid(vec![1.0, 2.0, 5.0, 10.0, 20.0]));
        set(&mut self.m, 1000);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let params = HamiltonianParams::new(filled(&self.j), filled(&self.h), filled(&self.l))?;
        let cert = lyapunov::stability_certificate(&params, &filled(&self.tr).0, filled(&self.m), ctx.seed)?;
        run.table("lambda_tr", &cert.table)?;
        run.json("certificate.json", &cert)?;
        let mut lines: Vec<String> =
            cert.table.iter().map(|r| format!("T_R = {:6.2}  lambda = {:.5} ± {:.5}", r.reset_interval, r.exponent, r.stderr)).collect();
        lines.push(format!("verdict: {:?} (decay fit R² = {:.4}, flat = {})", cert.verdict, cert.decay_r_squared, cert.flat));
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuspArgs {
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Exponents k of |ΔJ| = 10^-k, used on both sides of J*.
    #[arg(long)]
    pub decades: Option<Grid>,
    /// Fit only |ΔJ| up to this value.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Minimum number of orbit periods per run.
    #[arg(long)]
    pub periods: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Serialize)]
struct CuspRow {
    delta_j: f64,
    #[serde(rename = "J")]
    j: f64,
    class: OrbitClass,
    period: f64,
    lambda: f64,
    stderr: f64,
    resets: usize,
}

impl Task for CuspArgs {
    const NAME: &'static str = "cusp-scan";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.h, 1.0);
        set(&mut self.l, 10);
        set(&mut self.decades, Grid((2..=12).map(|k| 0.5 * k as f64).collect()));
        set(&mut self.cutoff, 1e-2);
        set(&mut self.periods, 100.0);
        set(&mut self.dt, classical::DEFAULT_DT);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let deltas: Vec<f64> = filled(&self.decades).0.iter().flat_map(|k| [-(10f64.powf(-k)), 10f64.powf(-k)]).collect();
        let cfg = BenettinConfig { dt: filled(&self.dt), ..BenettinConfig::periodic(ctx.seed) };
        let fit = lyapunov::cusp_scan(filled(&self.h), &deltas, filled(&self.l), &cfg, filled(&self.periods), filled(&self.cutoff))?;
        let rows: Vec<CuspRow> = fit
            .points
            .iter()
            .map(|p| CuspRow {
                delta_j: p.delta_j,
                j: p.coupling,
                class: p.class,
                period: p.period,
                lambda: p.lambda,
                stderr: p.stderr,
                resets: p.resets,
            })
            .collect();
        run.table("cusp", &rows)?;
        run.json("fit.json", &fit)?;
        Ok(vec![
            format!("lambda_A = {:.4}, C = {:.4}, R² = {:.4}", fit.lambda_a, fit.c, fit.r_squared),
            format!("side asymmetry |lambda_A(-) - lambda_A(+)| = {:.4}", fit.side_asymmetry),
        ])
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointArgs {
    #[arg(long)]
    pub h: Option<f64>,
    /// Coupling [default: J* for the given h].
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Initial distances d0/√L.
    #[arg(long)]
    pub d0: Option<Grid>,
    /// uniform (q = 0 sector) or random (independent per site).
    #[arg(long)]
    pub perturbation: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Serialize)]
struct GrowthRow {
    d0: f64,
    t: f64,
    distance: f64,
}

impl Task for FixedPointArgs {
    const NAME: &'static str = "fixed-point-exponent";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.h, 1.0);
        let h = filled(&self.h);
        if self.j.is_none() {
            self.j = Some(j_star(h)?);
        }
        set(&mut self.l, 10);
        set(&mut self.d0, Grid(vec![1e-6, 1e-5, 1e-4]));
        set(&mut self.perturbation, "uniform".into());
        set(&mut self.dt, classical::DEFAULT_DT);
        match filled(&self.perturbation).as_str() {
            "uniform" | "random" => Ok(()),
            p => Err(CliError::Usage(format!("--perturbation must be uniform or random, got {p:?}"))),
        }
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let h = filled(&self.h);
        let j = filled(&self.j);
        let saddle = classical::find_saddle(j, h).ok_or_else(|| CliError::Usage(format!("no saddle of H_p at J = {j}")))?;
        let fp = classical::FixedPoint { orientation: saddle.orientation, coupling: j, field: h, exponent: saddle.exponent() };
        let pert = if filled(&self.perturbation) == "random" { Perturbation::Random } else { Perturbation::Uniform };
        let r = lyapunov::fixed_point_exponent(&fp, filled(&self.l), &filled(&self.d0).0, pert, filled(&self.dt), ctx.seed)?;
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for c in &r.curves {
            for (t, d) in c.times.iter().zip(&c.distances) {
                rows.push(GrowthRow { d0: c.d0, t: *t, distance: *d });
            }
            lines.push(format!("d0 = {:.1e}: slope {:.4} over [{:.3}, {:.3}]", c.d0, c.fit.slope, c.window.0, c.window.1));
        }
        run.table("growth", &rows)?;
        run.json(
            "report.json",
            &serde_json::json!({ "lambda_s": r.lambda_s, "spread": r.spread, "one_spin_rate": fp.exponent }),
        )?;
        lines.push(format!("lambda_S = {:.4} (spread {:.2}%), one-spin saddle rate {:.4}", r.lambda_s, 100.0 * r.spread, fp.exponent));
        Ok(lines)
    }
}
