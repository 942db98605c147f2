//! Exact-diagonalization subcommands.

use clap::Args;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use spinchaos::classical::{periodic_orbit, HamiltonianParams, OrbitOptions};
use spinchaos::ensemble::{averaged_series, EnsembleKind, EnsembleSpec};
use spinchaos::quantum::{
    self, build_hamiltonian, diagonal_ensemble, eigenvalues, evolve_full, evolve_in_eigenbasis, psi_inf,
    scar_report, site_average_operator, site_expectation, spherical_overlap_map, to_eigenbasis, Axis, ChainParams,
    Reflection, SparseHamiltonian, SphericalGrid, DEFAULT_DIM_LIMIT, R_TRIM,
};
use spinchaos::{rng, stats};

use super::{filled, set};
use crate::config::{Grid, SpinArg, Systems};
use crate::output::Run;
use crate::{CliError, Ctx, Task};

/// Sampling step of relaxation curves.
const CURVE_DT: f64 = 0.05;

fn time_grid(t_max: f64) -> Vec<f64> {
    let n = (t_max / CURVE_DT).round() as usize;
    (0..=n).map(|k| k as f64 * CURVE_DT).collect()
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RArgs {
    /// Spins and lengths, e.g. "1/2:12..14;1:7..8". Levels are pooled over
    /// the lengths of each spin.
    #[arg(long)]
    pub systems: Option<Systems>,
    /// Renormalized coupling J̃.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Fraction of levels dropped at each spectral edge.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Size of the Poisson reference spectrum (0 to skip).
    #[arg(long)]
    pub poisson_levels: Option<usize>,
}

#[derive(Serialize)]
struct RRow {
    #[serde(rename = "S")]
    s: String,
    #[serde(rename = "L")]
    l: String,
    block: &'static str,
    levels: usize,
    r_mean: f64,
    count: usize,
    degenerate: usize,
}

impl Task for RArgs {
    const NAME: &'static str = "quantum-rvalue";

    fn fill(&mut self) -> Result<(), CliError> {
        if self.systems.is_none() {
            self.systems = Some("1/2:12..14;1:7..8".parse().map_err(CliError::Usage)?);
        }
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.trim, R_TRIM);
        set(&mut self.poisson_levels, 20_000);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h, trim) = (filled(&self.j), filled(&self.h), filled(&self.trim));
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for (spin, lengths) in &filled(&self.systems).0 {
            let mut blocks: Vec<Vec<f64>> = Vec::new();
            for &l in lengths {
                let params = ChainParams::new(*spin, l, j, h)?;
                for (name, refl) in [("even", Reflection::Even), ("odd", Reflection::Odd)] {
                    let levels = eigenvalues(&build_hamiltonian(&params, refl, DEFAULT_DIM_LIMIT)?.hamiltonian)?;
                    let r = quantum::r_statistic(&levels, trim)?;
                    rows.push(RRow {
                        s: spin.to_string(),
                        l: l.to_string(),
                        block: name,
                        levels: levels.len(),
                        r_mean: r.mean,
                        count: r.count,
                        degenerate: r.degenerate,
                    });
                    blocks.push(levels);
                }
            }
            let refs: Vec<&[f64]> = blocks.iter().map(Vec::as_slice).collect();
            let r = quantum::pooled_r_statistic(&refs, trim)?;
            let ls: Vec<String> = lengths.iter().map(|l| l.to_string()).collect();
            lines.push(format!("S = {spin}, L = {}: <r> = {:.4} over {} ratios", ls.join(","), r.mean, r.count));
            rows.push(RRow {
                s: spin.to_string(),
                l: ls.join(" "),
                block: "pooled",
                levels: blocks.iter().map(Vec::len).sum(),
                r_mean: r.mean,
                count: r.count,
                degenerate: r.degenerate,
            });
        }
        let n = filled(&self.poisson_levels);
        if n > 0 {
            let mut g = rng::rng_from_seed(ctx.seed);
            let levels: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
            let r = quantum::r_statistic(&levels, trim)?;
            lines.push(format!("Poisson reference ({n} uniform levels): <r> = {:.4}", r.mean));
            rows.push(RRow {
                s: "-".into(),
                l: "-".into(),
                block: "poisson",
                levels: n,
                r_mean: r.mean,
                count: r.count,
                degenerate: r.degenerate,
            });
        }
        run.table("rvalues", &rows)?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxArgs {
    #[arg(long = "S")]
    #[serde(rename = "S")]
    pub s: Option<SpinArg>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Renormalized coupling(s) J̃.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<Grid>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Chain length for the Ψinf reference (full-basis Krylov evolution;
    /// 0 to skip).
    #[arg(long)]
    pub inf_length: Option<usize>,
    /// Classical imitation-ensemble size (0 to skip).
    #[arg(long)]
    pub imitation: Option<usize>,
    /// Fluctuation band and gap statistics are taken over [window_start, t_max].
    #[arg(long)]
    pub window_start: Option<f64>,
    /// The baseline is the mean of ⟨S₁ᶻ⟩/S over [0, baseline_window].
    #[arg(long)]
    pub baseline_window: Option<f64>,
}

#[derive(Serialize)]
struct RelaxRow {
    #[serde(rename = "J")]
    j: f64,
    t: f64,
    up: f64,
    inf: Option<f64>,
    classical: Option<f64>,
    classical_stderr: Option<f64>,
}

#[derive(Serialize)]
struct RelaxSummary {
    #[serde(rename = "J")]
    j: f64,
    dim: usize,
    diagonal_ensemble: f64,
    baseline: f64,
    band: Option<f64>,
    min_gap: Option<f64>,
    mean_gap: Option<f64>,
    imitation_max_deviation: Option<f64>,
    inf_max_norm_error: Option<f64>,
}

impl Task for RelaxArgs {
    const NAME: &'static str = "quantum-relax";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.s, "3/2".parse().map_err(CliError::Usage)?);
        set(&mut self.l, 6);
        set(&mut self.j, Grid(vec![1.76]));
        set(&mut self.h, 1.0);
        set(&mut self.t_max, 10.0);
        set(&mut self.inf_length, filled(&self.l));
        set(&mut self.imitation, 0);
        set(&mut self.window_start, 3.0);
        set(&mut self.baseline_window, 5.0);
        Ok(())
    }

    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let spin = filled(&self.s).0;
        let sv = spin.value();
        let (l, h, t_max) = (filled(&self.l), filled(&self.h), filled(&self.t_max));
        let times = time_grid(t_max);
        let w0 = times.iter().position(|&t| t >= filled(&self.window_start) - 1e-9).unwrap_or(0);
        let nb = (filled(&self.baseline_window) / CURVE_DT).round() as usize;
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        let mut lines = Vec::new();
        let couplings = filled(&self.j).0;
        for (ji, &j) in couplings.iter().enumerate() {
            let params = ChainParams::new(spin, l, j, h)?;
            let chain = build_hamiltonian(&params, Reflection::Even, DEFAULT_DIM_LIMIT)?;
            let eig = chain.diagonalize()?;
            let op = to_eigenbasis(&eig, &site_average_operator(&chain.basis, Axis::Z))?;
            let c = eig.coefficients(&chain.psi_up())?;
            let up: Vec<f64> = evolve_in_eigenbasis(&eig, &c, &op, &times).values.iter().map(|v| v / sv).collect();
            let de = diagonal_ensemble(&c, &op) / sv;
            let baseline = stats::mean(&up[..=nb.min(up.len() - 1)]);

            let li = filled(&self.inf_length);
            let inf = if li > 0 {
                let p = ChainParams::new(spin, li, j, h)?;
                let psi = psi_inf(spin, li, rng::sub_seed(ctx.seed, 2 * ji as u64))?;
                let r = evolve_full(&SparseHamiltonian::new(&p)?, &psi, &times, |x| site_expectation(spin, li, x, 0, Axis::Z))?;
                Some((r.values.iter().map(|v| v / sv).collect::<Vec<f64>>(), r.max_norm_error))
            } else {
                None
            };

            let n = filled(&self.imitation);
            let classical = if n > 0 {
                let spec = EnsembleSpec {
                    kind: EnsembleKind::QuantumImitation(spin),
                    members: n,
                    seed: rng::sub_seed(ctx.seed, 2 * ji as u64 + 1),
                };
                let dt = 0.005;
                let stride = (CURVE_DT / dt).round() as usize;
                Some(averaged_series(&spec, &HamiltonianParams::new(j, h, l)?, t_max, dt, stride)?)
            } else {
                None
            };

            // The unit-length classical mean is compared with ⟨S₁ᶻ⟩/(S + ½):
            // both start at 2S/(2S+1) relative to their own normalization.
            let quantum_scale = sv / (sv + 0.5);
            let mut imitation_dev: Option<f64> = None;
            for (k, &t) in times.iter().enumerate() {
                let (cl, se) = match &classical {
                    Some(c) if k < c.mean.len() => (Some(c.mean[k]), Some(c.stderr[k])),
                    _ => (None, None),
                };
                if let Some(cl) = cl {
                    let d = (up[k] * quantum_scale - cl).abs();
                    imitation_dev = Some(imitation_dev.map_or(d, |m| m.max(d)));
                }
                rows.push(RelaxRow { j, t, up: up[k], inf: inf.as_ref().map(|(v, _)| v[k]), classical: cl, classical_stderr: se });
            }

            let (band, min_gap, mean_gap) = match &inf {
                Some((v, _)) => {
                    let band = stats::std_dev(&v[w0..]);
                    let gaps: Vec<f64> = up[w0..].iter().zip(&v[w0..]).map(|(u, i)| u - i).collect();
                    (Some(band), Some(gaps.iter().cloned().fold(f64::INFINITY, f64::min)), Some(stats::mean(&gaps)))
                }
                None => (None, None, None),
            };
            let mut line = format!("J = {j:.4}: dim {}, baseline {baseline:.4}", eig.dim());
            if let (Some(b), Some(g)) = (band, min_gap) {
                line += &format!(", min gap {g:.4} = {:.1} × band {b:.4}", g / b);
            }
            if let Some(d) = imitation_dev {
                line += &format!(", imitation max |Δ| {d:.4}");
            }
            lines.push(line);
            summary.push(RelaxSummary {
                j,
                dim: eig.dim(),
                diagonal_ensemble: de,
                baseline,
                band,
                min_gap,
                mean_gap,
                imitation_max_deviation: imitation_dev,
                inf_max_norm_error: inf.as_ref().map(|x| x.1),
            });
        }
        run.table("relaxation", &rows)?;
        let baselines: Vec<f64> = summary.iter().map(|s| s.baseline).collect();
        let crossover = quantum::crossover_region(&couplings, &baselines);
        if couplings.len() > 1 {
            match crossover {
                Some(c) => lines.push(format!("baseline 10-90% rise over J in [{:.4}, {:.4}]", c.lower, c.upper)),
                None => lines.push("baseline does not rise across the J scan".into()),
            }
        }
        run.json("report.json", &serde_json::json!({ "spin": spin, "L": l, "runs": summary, "crossover": crossover }))?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScarArgs {
    #[arg(long = "S")]
    #[serde(rename = "S")]
    pub s: Option<SpinArg>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
}

impl Task for ScarArgs {
    const NAME: &'static str = "scar-report";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.s, "2".parse().map_err(CliError::Usage)?);
        set(&mut self.l, 6);
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let params = ChainParams::new(filled(&self.s).0, filled(&self.l), filled(&self.j), filled(&self.h))?;
        let (report, _, _) = scar_report(&params)?;
        run.table("eigenstates", &report.rows)?;
        let m = report.max_overlap();
        let scars: Vec<usize> = report.scars().map(|r| r.index).collect();
        run.json(
            "report.json",
            &serde_json::json!({
                "params": params,
                "dim": report.rows.len(),
                "overlap_sum": report.overlap_sum,
                "max_overlap": m,
                "scars": scars,
            }),
        )?;
        Ok(vec![
            format!("sector dimension {}", report.rows.len()),
            format!(
                "max overlap: state {} at E = {:.4}, overlap {:.4}, outlier score {:.2}, central {}",
                m.index, m.energy, m.overlap, m.outlier_score, m.central
            ),
            format!("{} central entanglement outliers: {scars:?}", scars.len()),
        ])
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapArgs {
    #[arg(long = "S")]
    #[serde(rename = "S")]
    pub s: Option<SpinArg>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Eigenstate index in the even block [default: largest Ψup overlap].
    #[arg(long)]
    pub state: Option<usize>,
    /// Also map this many neighbours on each side of the state.
    #[arg(long)]
    pub neighbours: Option<usize>,
    #[arg(long)]
    pub n_theta: Option<usize>,
    #[arg(long)]
    pub n_phi: Option<usize>,
    /// On-orbit band and off-orbit distance (radians) for the contrast ratio.
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub off: Option<f64>,
}

#[derive(Serialize)]
struct MapRow {
    state: usize,
    theta: f64,
    phi: f64,
    overlap: f64,
}

impl Task for MapArgs {
    const NAME: &'static str = "spherical-map";

    fn fill(&mut self) -> Result<(), CliError> {
        set(&mut self.s, "2".parse().map_err(CliError::Usage)?);
        set(&mut self.l, 6);
        set(&mut self.j, 1.76);
        set(&mut self.h, 1.0);
        set(&mut self.neighbours, 2);
        set(&mut self.n_theta, SphericalGrid::default().n_theta);
        set(&mut self.n_phi, SphericalGrid::default().n_phi);
        set(&mut self.band, 0.15);
        set(&mut self.off, 0.3);
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let (j, h) = (filled(&self.j), filled(&self.h));
        let params = ChainParams::new(filled(&self.s).0, filled(&self.l), j, h)?;
        let (report, chain, eig) = scar_report(&params)?;
        let center = self.state.unwrap_or(report.max_overlap().index);
        if center >= eig.dim() {
            return Err(CliError::Usage(format!("--state {center} outside the sector (dimension {})", eig.dim())));
        }
        let orbit = periodic_orbit(&HamiltonianParams::new(j, h, 2)?, [0.0, 0.0, 1.0], &OrbitOptions::default())?;
        let grid = SphericalGrid { n_theta: filled(&self.n_theta), n_phi: filled(&self.n_phi) };
        let k = filled(&self.neighbours);
        let states: Vec<usize> = (center.saturating_sub(k)..=(center + k).min(eig.dim() - 1)).collect();
        let mut rows = Vec::new();
        let mut contrasts = Vec::new();
        let mut lines = Vec::new();
        for &n in &states {
            let map = spherical_overlap_map(&chain.basis, &eig.vector(n), grid)?;
            let c = quantum::orbit_band_contrast(&map, &orbit.samples, filled(&self.band), filled(&self.off));
            for (i, &theta) in map.theta.iter().enumerate() {
                for (jj, &phi) in map.phi.iter().enumerate() {
                    rows.push(MapRow { state: n, theta, phi, overlap: map.at(i, jj) });
                }
            }
            lines.push(format!(
                "state {n}{}: E = {:.4}, overlap {:.4}, on/off ratio {:.2}",
                if n == center { " (target)" } else { "" },
                eig.values[n],
                report.rows[n].overlap,
                c.ratio
            ));
            contrasts.push(serde_json::json!({ "state": n, "energy": eig.values[n], "overlap": report.rows[n].overlap, "contrast": c }));
        }
        run.table("map", &rows)?;
        run.json("report.json", &serde_json::json!({ "target": center, "states": contrasts }))?;
        Ok(lines)
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrArgs {
    /// Spins and lengths, e.g. "3/2:8;2:7".
    #[arg(long)]
    pub systems: Option<Systems>,
    /// J̃ grid.
    #[arg(long = "J")]
    #[serde(rename = "J")]
    pub j: Option<Grid>,
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Serialize)]
struct PrRow {
    #[serde(rename = "S")]
    s: String,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "J")]
    j: f64,
    participation: f64,
    dim: usize,
}

impl Task for PrArgs {
    const NAME: &'static str = "pr-scan";

    fn fill(&mut self) -> Result<(), CliError> {
        if self.systems.is_none() {
            self.systems = Some("1/2:12;3/2:6;2:5".parse().map_err(CliError::Usage)?);
        }
        set(&mut self.j, "0.8..1.6:0.05".parse().map_err(CliError::Usage)?);
        set(&mut self.h, 1.0);
        Ok(())
    }

    fn exec(&self, _: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError> {
        let h = filled(&self.h);
        let grid = filled(&self.j).0;
        let j_star = spinchaos::classical::find_separatrix_j(h)?.coupling;
        let mut rows = Vec::new();
        let mut peaks = Vec::new();
        let mut lines = Vec::new();
        for (spin, lengths) in &filled(&self.systems).0 {
            for &l in lengths {
                let scan = quantum::participation_ratio_scan(*spin, l, &grid, h)?;
                for p in &scan.points {
                    rows.push(PrRow { s: spin.to_string(), l, j: p.coupling, participation: p.participation, dim: p.dim });
                }
                lines.push(format!(
                    "S = {spin}, L = {l}: peak at J = {:.4} ({:+.1}% from J*), relative prominence {:.3}",
                    scan.peak_coupling,
                    100.0 * (scan.peak_coupling / j_star - 1.0),
                    scan.relative_prominence
                ));
                peaks.push(serde_json::json!({
                    "S": spin, "L": l, "peak_coupling": scan.peak_coupling, "peak_value": scan.peak_value,
                    "relative_offset": scan.peak_coupling / j_star - 1.0,
                    "prominence": scan.prominence, "relative_prominence": scan.relative_prominence,
                }));
            }
        }
        run.table("participation", &rows)?;
        run.json("report.json", &serde_json::json!({ "j_star": j_star, "scans": peaks }))?;
        Ok(lines)
    }
}
