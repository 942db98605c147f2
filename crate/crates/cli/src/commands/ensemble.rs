//! Classical ensembles: single-observable growth and the quantum imitation.

use clap::Args;
use serde::{Deserialize, Serialize};
use spinchaos::classical::HamiltonianParams;
use spinchaos::ensemble::{
    averaged_series, otoc_exponent, EnsembleKind, EnsembleSpec, DEFAULT_MEMBERS, DEFAULT_RADIUS, IMITATION_MEMBERS,
};
use spinchaos::lyapunov::{benettin, BenettinConfig, Reference};

use super::{filled, set};
use crate::config::SpinArg;
use crate::output::Run;
use crate::{CliError, Ctx, Task};

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    mean: f64,
    stderr: f64,
}

fn series_rows(times: &[f64], mean: &[f64], stderr: &[f64]) -> Vec<SeriesRow> {
    times.iter().zip(mean).zip(stderr).map(|((&t, &mean), &stderr)| SeriesRow { t, mean, stderr }).collect()
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtocArgs {
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Ensemble size N.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Radius of the transverse disk around (0,0,1).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Sampling step of the averaged S₁ᶻ.
    #[arg(long)]
    pub sample: Option<f64>,
    /// Also run Benettin on the periodic orbit for comparison.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub benettin: Option<bool>,
}

impl Task for OtocArgs {
    const NAME: &'static str = "ensemble-otoc";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, 100);
        set(&mut self.n, DEFAULT_MEMBERS);
        set(&mut self.radius, DEFAULT_RADIUS);
        set(&mut self.duration, 40.0);
        set(&mut self.dt, 0.01);
        set(&mut self.sample, 0.01);
        set(&mut self.benettin, true);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let params = HamiltonianParams::new(filled(&self.j), filled(&self.h), filled(&self.l))?;
        let dt = filled(&self.dt);
        let stride = ((filled(&self.sample) / dt).round() as usize).max(1);
        let (fit, series) =
            otoc_exponent(&params, filled(&self.n), filled(&self.radius), filled(&self.duration), dt, stride, ctx.seed)?;
        run.table("series", &series_rows(&series.times, &series.mean, &series.stderr))?;
        run.table("maxima", &fit.maxima)?;
        let mut lines = vec![match fit.lambda {
            Some(l) => format!(
                "lambda = {l:.4} from {} maxima over [{:.2}, {:.2}], R² = {:.4}",
                fit.used, fit.fit_span.0, fit.fit_span.1, fit.r_squared
            ),
            None => format!("no growth ({:?})", fit.verdict),
        }];
        let mut report = serde_json::json!({ "fit": fit });
        if filled(&self.benettin) {
            let r = benettin(&params, &Reference::periodic(), &BenettinConfig::periodic(ctx.seed))?;
            lines.push(format!("Benettin lambda_p = {:.4} ± {:.4}", r.exponent, r.stderr));
            if let Some(l) = fit.lambda {
                lines.push(format!("relative difference {:.1}%", 100.0 * (l / r.exponent - 1.0)));
            }
            report["benettin"] = serde_json::json!({ "lambda": r.exponent, "stderr": r.stderr, "resets": r.resets });
        }
        run.json("report.json", &report)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImitationArgs {
    /// Quantum spin being imitated.
    #[arg(long = "S")]
    #[serde(rename = "S")]
    pub s: Option<SpinArg>,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub sample: Option<f64>,
}

impl Task for ImitationArgs {
    const NAME: &'static str = "ensemble-imitation";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.s, "1".parse().map_err(CliError::Usage)?);
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.l, 10);
        set(&mut self.n, IMITATION_MEMBERS);
        set(&mut self.duration, 10.0);
        set(&mut self.dt, 0.005);
        set(&mut self.sample, 0.05);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let params = HamiltonianParams::new(filled(&self.j), filled(&self.h), filled(&self.l))?;
        let dt = filled(&self.dt);
        let stride = ((filled(&self.sample) / dt).round() as usize).max(1);
        let spec = EnsembleSpec { kind: EnsembleKind::QuantumImitation(filled(&self.s).0), members: filled(&self.n), seed: ctx.seed };
        let s = averaged_series(&spec, &params, filled(&self.duration), dt, stride)?;
        run.table("series", &series_rows(&s.times, &s.mean, &s.stderr))?;
        let last = s.mean.len() - 1;
        Ok(vec![format!(
            "{} members; mean S1z: {:.4} at t = 0, {:.4} at t = {:.2}",
            s.members, s.mean[0], s.mean[last], s.times[last]
        )])
    }
}
