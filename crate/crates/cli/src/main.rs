//! `cfisac`: Monte Carlo experiments for cell-free ISAC beamforming.
//!
//! Writes `<experiment>.csv` and `<experiment>_summary.json` into `--out`.
//! Failures print `{"error": {"kind": ..., "message": ...}}` on stderr and
//! exit nonzero (2 for bad input, 3 for infeasible scenarios, 1 otherwise).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use cfisac_core::experiment::{self, ExperimentKind, ExperimentOutput, ExperimentSpec};
use cfisac_core::metrics::{fronthaul_bytes, Method};
use cfisac_core::twostage::{LocalFallback, SensingInit};
use cfisac_core::{default_config, Error, Result, SystemConfig};

#[derive(Debug, Parser)]
#[command(name = "cfisac", version, about = "Cell-free ISAC beamforming experiments")]
struct Args {
    /// convergence | beampattern | tradeoff | fronthaul
    #[arg(long, short = 'e')]
    experiment: Option<String>,

    /// JSON config; missing fields take their default values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    trials: Option<usize>,

    /// Index of the first trial (re-run a single trial with --trials 1).
    #[arg(long, default_value_t = 0)]
    first_trial: u64,

    #[arg(long)]
    seed: Option<u64>,

    /// Sensing thresholds in dB, comma separated or repeated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delta: Vec<f64>,

    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,

    /// Override a config field, e.g. `--set Ntx=64 --set 'Pm=[1,1,1,1]'`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Two-stage iterations (default: 10 for convergence, n_iter otherwise).
    #[arg(long)]
    iterations: Option<usize>,

    /// MM iterations of the centralized reference.
    #[arg(long)]
    centralized_iterations: Option<usize>,

    /// Surrogate steps per stage and exchange.
    #[arg(long)]
    inner_steps: Option<usize>,

    /// Initial sensing cache: equal_share | uniform.
    #[arg(long)]
    sensing_init: Option<String>,

    /// AP behaviour on an infeasible surrogate: max_sensing | keep_previous.
    #[arg(long)]
    local_fallback: Option<String>,

    /// Trial whose channel draw the beampattern experiment uses (default:
    /// the first draw feasible at every threshold).
    #[arg(long)]
    beampattern_trial: Option<u64>,

    /// Show fronthaul loads in bytes (complex64) instead of complex scalars.
    #[arg(long)]
    bytes: bool,

    /// Print the effective config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig> {
    let Some(path) = path else { return Ok(default_config()) };
    let text = std::fs::read_to_string(path)?;
    let user: Value = serde_json::from_str(&text)?;
    let Value::Object(user) = user else {
        return Err(Error::InvalidConfig("config file must hold a JSON object".into()));
    };
    let mut merged = serde_json::to_value(default_config())?;
    let obj = merged.as_object_mut().expect("config serializes to an object");
    for (k, v) in user {
        obj.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn parse_enum<T: serde::de::DeserializeOwned>(name: &str, raw: &str) -> Result<T> {
    serde_json::from_value(Value::String(raw.to_string()))
        .map_err(|_| Error::InvalidExperiment(format!("unknown {name} `{raw}`")))
}

fn build_spec(args: &Args) -> Result<Option<ExperimentSpec>> {
    let mut config = load_config(args.config.as_deref())?;
    for assignment in &args.overrides {
        config = config.with_override(assignment)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(None);
    }
    let kind: ExperimentKind = args
        .experiment
        .as_deref()
        .ok_or_else(|| Error::InvalidExperiment("--experiment is required".into()))?
        .parse()?;
    let mut spec = ExperimentSpec::new(kind, config);
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    spec.first_trial = args.first_trial;
    spec.beampattern_trial = args.beampattern_trial;
    if !args.delta.is_empty() {
        spec.delta_list = args.delta.clone();
    }
    if let Some(n) = args.iterations {
        spec.iterations = n;
    }
    if let Some(n) = args.centralized_iterations {
        spec.centralized_iterations = n;
    }
    if let Some(n) = args.inner_steps {
        if n == 0 {
            return Err(Error::InvalidExperiment("--inner-steps must be at least 1".into()));
        }
        spec.options.inner_steps = n;
    }
    if let Some(raw) = &args.sensing_init {
        spec.options.sensing_init = parse_enum::<SensingInit>("sensing init", raw)?;
    }
    if let Some(raw) = &args.local_fallback {
        spec.options.local_fallback = parse_enum::<LocalFallback>("local fallback", raw)?;
    }
    Ok(Some(spec))
}

fn print_report(output: &ExperimentOutput, bytes: bool) {
    let summary = &output.summary;
    if summary.experiment == ExperimentKind::Fronthaul {
        let unit = if bytes { "bytes" } else { "complex scalars" };
        println!("fronthaul load ({unit}, {} two-stage iterations)", summary.spec.iterations);
        println!("{:>6} {:>4} {:>4} {:>12} {:>12}", "Ntx", "M", "K", "tsdba", "centralized");
        for &(m, k) in &summary.spec.fronthaul_pairs {
            for &ntx in &summary.spec.ntx_list {
                let params = format!("Ntx={ntx};M={m};K={k}");
                let load = |method: Method| {
                    let v = output
                        .rows
                        .iter()
                        .find(|r| r.method == method && r.params == params)
                        .map_or(0, |r| r.value as u64);
                    if bytes {
                        fronthaul_bytes(v)
                    } else {
                        v
                    }
                };
                println!("{ntx:>6} {m:>4} {k:>4} {:>12} {:>12}", load(Method::Tsdba), load(Method::Centralized));
            }
        }
        return;
    }
    for e in summary.means.iter().filter(|e| e.metric_name == "sum_sinr") {
        println!(
            "{:<12} delta={:>5} dB  iter={:>3}  mean sum SINR={:>10.4}  (n={})",
            e.method.as_str(),
            e.delta_db,
            e.iteration,
            e.mean,
            e.count
        );
    }
    for c in &summary.infeasible {
        println!("{:<12} delta={:>5} dB  infeasible trials: {}", c.method.as_str(), c.delta_db, c.count);
    }
}

fn run(args: &Args) -> Result<()> {
    let Some(spec) = build_spec(args)? else { return Ok(()) };
    let output = experiment::run_experiment(&spec)?;
    let (csv, json) = experiment::write_outputs(&output, &args.out)?;
    print_report(&output, args.bytes);
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidExperiment(_) | Error::Json(_) => 2,
        Error::GlobalInfeasible | Error::NullspaceEmpty { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let obj = json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
            eprintln!("{obj}");
            ExitCode::from(exit_code(&err))
        }
    }
}
