//! `spinchaos` command-line front end.
//!
//! Exit status: 0 success, 2 usage or configuration error, 3 numerical
//! failure inside a computation, 4 I/O failure, 5 checksum mismatch in
//! `verify`. Failures also print one JSON error record on stderr.

mod commands;
mod config;
mod output;
mod recipes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::commands::{classical as cl, ensemble as en, quantum as qu, spectral as sp};
use crate::config::FileConfig;
use crate::output::{Format, Run};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(spinchaos::Error),
    Io(String),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
            CliError::Verify(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
            CliError::Verify(_) => "verify",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Verify(m) => m.clone(),
            CliError::Numeric(e) => e.to_string(),
        }
    }
}

impl From<spinchaos::Error> for CliError {
    fn from(e: spinchaos::Error) -> Self {
        match e {
            spinchaos::Error::InvalidParameter(m) => CliError::Usage(m),
            e => CliError::Numeric(e),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spinchaos", version, about = "Classical and quantum chaos in the anisotropic XY spin chain")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Global {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory [default: $SPINCHAOS_OUT_DIR/<subcommand>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; drawn from system entropy and recorded when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for scans and ensembles (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Command {
    ClassicalOrbit(cl::OrbitArgs),
    Separatrix(cl::SeparatrixArgs),
    #[command(name = "lyapunov-scan-J", alias = "lyapunov-scan-j")]
    LyapunovScanJ(cl::ScanJArgs),
    #[command(name = "lyapunov-scan-L", alias = "lyapunov-scan-l")]
    LyapunovScanL(cl::ScanLArgs),
    StabilityCertificate(cl::CertificateArgs),
    CuspScan(cl::CuspArgs),
    FixedPointExponent(cl::FixedPointArgs),
    FourierModes(sp::ModesArgs),
    TemporalSpectrum(sp::SpectrumArgs),
    MechanismCriterion(sp::MechanismArgs),
    ArnoldWatch(sp::WatchArgs),
    QuantumRvalue(qu::RArgs),
    QuantumRelax(qu::RelaxArgs),
    ScarReport(qu::ScarArgs),
    SphericalMap(qu::MapArgs),
    PrScan(qu::PrArgs),
    EnsembleOtoc(en::OtocArgs),
    EnsembleImitation(en::ImitationArgs),
    /// Run a figure preset (`--list` to enumerate, `--show` to print it).
    Recipe(RecipeArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay {
        /// Run directory or manifest file.
        manifest: PathBuf,
    },
    /// Recompute the checksums listed in a run's manifest.
    Verify {
        /// Run directory or manifest file.
        dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RecipeArgs {
    /// Recipe name, e.g. fig8.
    name: Option<String>,
    #[arg(long)]
    list: bool,
    /// Print the preset as a config file instead of running it.
    #[arg(long)]
    show: bool,
}

/// Settings shared by every subcommand after merging.
pub struct Ctx {
    pub seed: u64,
    pub jobs: usize,
}

/// A computation subcommand: its flags double as config-file keys.
pub trait Task: Serialize + DeserializeOwned + Default + Clone + Send + Sync {
    const NAME: &'static str;
    /// Replace unset fields by their defaults and validate.
    fn fill(&mut self) -> Result<(), CliError>;
    /// Run, write outputs into `run`, return summary lines.
    fn exec(&self, ctx: &Ctx, run: &mut Run) -> Result<Vec<String>, CliError>;
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({ "error": e.kind(), "exit_code": e.code(), "message": e.message() });
            eprintln!("{record}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Recipe(r) => recipe(r, cli.global),
        Command::Replay { manifest } => {
            let m = output::read_manifest(&manifest)?;
            let file = FileConfig::from_json(m.config).map_err(CliError::Usage)?;
            by_name(&m.subcommand, &cli.global, &file)
        }
        Command::Verify { dir } => {
            let rows = output::verify(&dir)?;
            let bad = rows.iter().filter(|r| r.status != "ok").count();
            for r in &rows {
                println!("{:<8} {}", r.status, r.path);
            }
            if bad > 0 {
                return Err(CliError::Verify(format!("{bad} of {} files failed verification", rows.len())));
            }
            Ok(())
        }
        Command::ClassicalOrbit(a) => launch(a, &cli.global, &file),
        Command::Separatrix(a) => launch(a, &cli.global, &file),
        Command::LyapunovScanJ(a) => launch(a, &cli.global, &file),
        Command::LyapunovScanL(a) => launch(a, &cli.global, &file),
        Command::StabilityCertificate(a) => launch(a, &cli.global, &file),
        Command::CuspScan(a) => launch(a, &cli.global, &file),
        Command::FixedPointExponent(a) => launch(a, &cli.global, &file),
        Command::FourierModes(a) => launch(a, &cli.global, &file),
        Command::TemporalSpectrum(a) => launch(a, &cli.global, &file),
        Command::MechanismCriterion(a) => launch(a, &cli.global, &file),
        Command::ArnoldWatch(a) => launch(a, &cli.global, &file),
        Command::QuantumRvalue(a) => launch(a, &cli.global, &file),
        Command::QuantumRelax(a) => launch(a, &cli.global, &file),
        Command::ScarReport(a) => launch(a, &cli.global, &file),
        Command::SphericalMap(a) => launch(a, &cli.global, &file),
        Command::PrScan(a) => launch(a, &cli.global, &file),
        Command::EnsembleOtoc(a) => launch(a, &cli.global, &file),
        Command::EnsembleImitation(a) => launch(a, &cli.global, &file),
    }
}

/// Runs the subcommand `name` with all parameters taken from `file`.
fn by_name(name: &str, global: &Global, file: &FileConfig) -> Result<(), CliError> {
    macro_rules! go {
        ($($t:ty),*) => {
            $(if name == <$t>::NAME { return launch(<$t>::default(), global, file); })*
        };
    }
    go!(
        cl::OrbitArgs, cl::SeparatrixArgs, cl::ScanJArgs, cl::ScanLArgs, cl::CertificateArgs, cl::CuspArgs,
        cl::FixedPointArgs, sp::ModesArgs, sp::SpectrumArgs, sp::MechanismArgs, sp::WatchArgs, qu::RArgs,
        qu::RelaxArgs, qu::ScarArgs, qu::MapArgs, qu::PrArgs, en::OtocArgs, en::ImitationArgs
    );
    Err(CliError::Usage(format!("unknown subcommand {name:?}")))
}

fn recipe(r: RecipeArgs, global: Global) -> Result<(), CliError> {
    if r.list || r.name.is_none() {
        for (name, about) in recipes::list() {
            println!("{name:<6} {about}");
        }
        return Ok(());
    }
    let name = r.name.unwrap_or_default();
    let text = recipes::preset(&name).ok_or_else(|| CliError::Usage(format!("unknown recipe {name:?}; try --list")))?;
    if r.show {
        print!("{text}");
        return Ok(());
    }
    let file = FileConfig::parse(text).map_err(|e| CliError::Usage(format!("recipe {name}: {e}")))?;
    let sub = file.global.get("subcommand").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut global = global;
    if global.out.is_none() {
        global.out = Some(output::default_dir(&name));
    }
    by_name(&sub, &global, &file)
}

fn global_value<T: DeserializeOwned>(file: &FileConfig, key: &str) -> Result<Option<T>, CliError> {
    match file.global.get(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| CliError::Usage(format!("{key}: {e}"))),
    }
}

fn launch<T: Task>(flags: T, global: &Global, file: &FileConfig) -> Result<(), CliError> {
    let mut args: T = config::merge(&flags, file.table(T::NAME), T::NAME)?;
    args.fill()?;
    let seed = match global.seed.or(global_value(file, "seed")?) {
        Some(s) => s,
        None => rand::random::<u64>(),
    };
    let jobs = global.jobs.or(global_value(file, "jobs")?).unwrap_or(0);
    let format = global.format.or(global_value(file, "format")?).unwrap_or_default();
    let out = match (&global.out, global_value::<PathBuf>(file, "out")?) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => output::default_dir(T::NAME),
    };
    let mut snapshot = Map::new();
    snapshot.insert("subcommand".into(), json!(T::NAME));
    snapshot.insert("seed".into(), json!(seed));
    snapshot.insert("format".into(), serde_json::to_value(format).unwrap_or(Value::Null));
    snapshot.insert(T::NAME.into(), serde_json::to_value(&args).map_err(|e| CliError::Usage(e.to_string()))?);
    let mut run = Run::create(out, format, T::NAME, seed, Value::Object(snapshot))?;
    let ctx = Ctx { seed, jobs };
    let lines = spinchaos::par::with_jobs(jobs, || args.exec(&ctx, &mut run))?;
    let manifest = run.finish()?;
    for l in lines {
        println!("{l}");
    }
    println!("manifest: {}", manifest.display());
    Ok(())
}
