//! Command-line front end: `frontier`, `verify` and `gen`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::data::{
    generate, load_csv, split, standardize, CsvOptions, Dataset, Noise, SyntheticConfig,
    SyntheticKind,
};
use crate::error::{Error, Result};
use crate::frontier::{frontier_from_reports, write_files, FrontierRecord, Split};
use crate::models::{Activation, ModelSpec, DEFAULT_HIDDEN_WIDTH};
use crate::solver::{geometric_grid, sweep, SolverConfig};
use crate::verify::{run_checks, CheckStatus};
use crate::VERSION;

pub const EXIT_OK: u8 = 0;
pub const EXIT_SOLVER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;

pub const THREADS_ENV: &str = "TILT_FRONTIER_THREADS";

/// Iteration cap per tilt for `frontier` unless overridden.
pub const DEFAULT_CLI_MAX_ITERS: usize = 2_000;

/// Exit code for a library error.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::MissingColumn(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::Divergence { .. } => EXIT_SOLVER,
        _ => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tilt-frontier",
    version,
    about = "Tilted risk minimization frontiers and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the tilt and write average-versus-worst-case loss frontiers.
    Frontier(FrontierArgs),
    /// Run numerical checks of the objective's properties.
    Verify(VerifyArgs),
    /// Write a synthetic dataset and its metadata.
    Gen(GenArgs),
}

#[derive(Debug, Default, Args)]
pub struct FrontierArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Column of group labels; omitted means the whole sample is one group.
    #[arg(long)]
    pub group: Option<String>,
    /// Target value coded as 1; every other value is 0.
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Comma-separated models: linear, logistic, mlpK (K hidden layers).
    #[arg(long, visible_alias = "models")]
    pub model: Option<String>,
    /// Width of every hidden layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Hidden activation: relu or tanh.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Held-out fraction; 0 disables the split.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub start_from_utilitarian: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Plain-text `key=value` settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct VerifyArgs {
    /// Check to run; repeat for several. Runs every check when absent.
    #[arg(long = "check")]
    pub checks: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print the available check names and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// linear-noise or two-group-logistic.
    #[arg(long, default_value = "linear-noise")]
    pub kind: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// gaussian or skewed.
    #[arg(long, default_value = "gaussian")]
    pub noise: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0.3)]
    pub group_imbalance: f64,
    #[arg(long, default_value_t = 0.0)]
    pub feature_mean: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; metadata goes next to it as `<stem>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Fully resolved settings of a frontier run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub target: String,
    pub group: Option<String>,
    pub positive_label: Option<String>,
    pub models: Vec<String>,
    pub hidden: usize,
    pub activation: Activation,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub test_fraction: f64,
    pub start_from_utilitarian: bool,
    pub max_iters: usize,
    pub grad_tol: f64,
}

const CONFIG_KEYS: [&str; 16] = [
    "data",
    "target",
    "group",
    "positive-label",
    "model",
    "hidden",
    "activation",
    "lambda-min",
    "lambda-max",
    "lambda-count",
    "seed",
    "out",
    "test-fraction",
    "start-from-utilitarian",
    "max-iters",
    "grad-tol",
];

/// Parses `key=value` lines; `#` starts a comment. Underscores in keys are
/// read as dashes, and `models` as `model`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut settings = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected key=value", number + 1))
        })?;
        let mut key = key.trim().replace('_', "-");
        if key == "models" {
            key = "model".into();
        }
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "config line {}: unknown key `{key}`",
                number + 1
            )));
        }
        settings.insert(key, value.trim().to_string());
    }
    Ok(settings)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value `{value}` for `{key}`"
        ))),
    }
}

impl RunConfig {
    /// Merges flags over the optional config file over the defaults.
    pub fn resolve(args: &FrontierArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).map(String::as_str);
        fn pick<T: std::str::FromStr>(
            flag: Option<T>,
            file: Option<&str>,
            key: &str,
            default: T,
        ) -> Result<T> {
            match (flag, file) {
                (Some(v), _) => Ok(v),
                (None, Some(s)) => parse_value(key, s),
                (None, None) => Ok(default),
            }
        }

        let data = args
            .data
            .clone()
            .or_else(|| get("data").map(PathBuf::from))
            .ok_or_else(|| Error::Config("`--data` is required".into()))?;
        let target = args
            .target
            .clone()
            .or_else(|| get("target").map(String::from))
            .ok_or_else(|| Error::Config("`--target` is required".into()))?;
        let models: Vec<String> = args
            .model
            .clone()
            .or_else(|| get("model").map(String::from))
            .unwrap_or_else(|| "logistic".into())
            .split(',')
            .map(|m| m.trim().to_string())
            .filter(|m| !m.is_empty())
            .collect();
        if models.is_empty() {
            return Err(Error::Config("no model given".into()));
        }
        let activation = match args.activation.as_deref().or(get("activation")) {
            Some(a) => a
                .parse()
                .map_err(|_| Error::Config(format!("unknown activation `{a}`")))?,
            None => Activation::Relu,
        };
        let start_from_utilitarian = args.start_from_utilitarian
            || get("start-from-utilitarian")
                .map(|v| parse_bool("start-from-utilitarian", v))
                .transpose()?
                .unwrap_or(false);

        let config = Self {
            data,
            target,
            group: args
                .group
                .clone()
                .or_else(|| get("group").map(String::from)),
            positive_label: args
                .positive_label
                .clone()
                .or_else(|| get("positive-label").map(String::from)),
            models,
            hidden: pick(args.hidden, get("hidden"), "hidden", DEFAULT_HIDDEN_WIDTH)?,
            activation,
            lambda_min: pick(args.lambda_min, get("lambda-min"), "lambda-min", 1e-3)?,
            lambda_max: pick(args.lambda_max, get("lambda-max"), "lambda-max", 1e2)?,
            lambda_count: pick(args.lambda_count, get("lambda-count"), "lambda-count", 25)?,
            seed: pick(args.seed, get("seed"), "seed", 0)?,
            out: args
                .out
                .clone()
                .or_else(|| get("out").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("frontier_out")),
            test_fraction: pick(
                args.test_fraction,
                get("test-fraction"),
                "test-fraction",
                0.3,
            )?,
            start_from_utilitarian,
            max_iters: pick(
                args.max_iters,
                get("max-iters"),
                "max-iters",
                DEFAULT_CLI_MAX_ITERS,
            )?,
            grad_tol: pick(args.grad_tol, get("grad-tol"), "grad-tol", 1e-8)?,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "test-fraction must lie in [0, 1), got {}",
                self.test_fraction
            )));
        }
        geometric_grid(self.lambda_min, self.lambda_max, self.lambda_count)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.solver_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        for name in &self.models {
            ModelSpec::from_name(name, 1, self.hidden, self.activation)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            seed: self.seed,
            start_from_utilitarian: self.start_from_utilitarian,
            ..Default::default()
        }
    }

    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        geometric_grid(self.lambda_min, self.lambda_max, self.lambda_count)
    }

    /// `key=value` rendering that parses back to the same settings.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        let _ = writeln!(s, "# tilt-frontier {VERSION}");
        let _ = writeln!(s, "data={}", self.data.display());
        let _ = writeln!(s, "target={}", self.target);
        if self.group.is_some() {
            let _ = writeln!(s, "group={}", opt(&self.group));
        }
        if self.positive_label.is_some() {
            let _ = writeln!(s, "positive-label={}", opt(&self.positive_label));
        }
        let _ = writeln!(s, "model={}", self.models.join(","));
        let _ = writeln!(s, "hidden={}", self.hidden);
        let _ = writeln!(s, "activation={}", self.activation);
        let _ = writeln!(s, "lambda-min={}", self.lambda_min);
        let _ = writeln!(s, "lambda-max={}", self.lambda_max);
        let _ = writeln!(s, "lambda-count={}", self.lambda_count);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "out={}", self.out.display());
        let _ = writeln!(s, "test-fraction={}", self.test_fraction);
        let _ = writeln!(s, "start-from-utilitarian={}", self.start_from_utilitarian);
        let _ = writeln!(s, "max-iters={}", self.max_iters);
        let _ = writeln!(s, "grad-tol={}", self.grad_tol);
        s
    }
}

/// Frontier of one model and whether every tilt diverged.
#[derive(Debug, Clone)]
pub struct ModelFrontier {
    pub model_id: String,
    pub records: Vec<FrontierRecord>,
    pub all_diverged: bool,
}

/// Loads the data, splits it (stratified by group when there are groups)
/// and standardizes both splits with training statistics. Also returns the
/// sorted group names of the full dataset.
pub fn prepare_data(config: &RunConfig) -> Result<(Dataset, Option<Dataset>, Option<Vec<String>>)> {
    let load = load_csv(
        &config.data,
        &CsvOptions {
            target: config.target.clone(),
            group: config.group.clone(),
            positive_label: config.positive_label.clone(),
            classification: config.models.iter().any(|m| m != "linear"),
        },
    )?;
    let dataset = load.dataset;
    let group_names = dataset.group_names();
    let (train, test) = if config.test_fraction > 0.0 {
        let (train, test) = split(
            &dataset,
            config.test_fraction,
            config.seed,
            group_names.is_some(),
        )?;
        (train, Some(test))
    } else {
        (dataset, None)
    };
    let (train, transform) = standardize(&train)?;
    let test = test.map(|t| transform.apply(&t)).transpose()?;
    Ok((train, test, group_names))
}

/// Prepares the data and sweeps every model.
/// Models run concurrently; each result depends only on its own inputs.
pub fn run_frontier(config: &RunConfig) -> Result<(Vec<ModelFrontier>, Vec<String>)> {
    let (train, test, group_names) = prepare_data(config)?;
    let grid = config.lambda_grid()?;
    let solver = config.solver_config();

    let run_model = |name: &String| -> Result<ModelFrontier> {
        let spec = ModelSpec::from_name(name, train.p(), config.hidden, config.activation)?;
        let reports = sweep(&spec, &train, &grid, &solver)?;
        let records = frontier_from_reports(
            &spec,
            &train,
            test.as_ref(),
            group_names.as_deref(),
            &grid,
            &reports,
        )?;
        Ok(ModelFrontier {
            model_id: spec.model_id(),
            records,
            all_diverged: reports.iter().all(|r| r.diverged),
        })
    };

    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    let frontiers = pool.install(|| {
        config
            .models
            .par_iter()
            .map(run_model)
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((frontiers, group_names.unwrap_or_default()))
}

fn write_outputs(
    config: &RunConfig,
    frontiers: &[ModelFrontier],
    group_names: &[String],
) -> Result<()> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    for frontier in frontiers {
        write_files(
            &config.out,
            &format!("frontier_{}", frontier.model_id),
            &frontier.records,
            group_names,
        )?;
    }
    let path = config.out.join("resolved_config.txt");
    fs::write(&path, config.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn fmt_gamma(gamma: Option<f64>) -> String {
    gamma
        .map(|g| format!("{g:.4}"))
        .unwrap_or_else(|| "-".into())
}

fn summary_lines(frontier: &ModelFrontier) -> Vec<String> {
    let mut lines = Vec::new();
    let mut records = frontier.records.iter().peekable();
    while let Some(train) = records.next() {
        let mut line = format!(
            "{:<10} lambda={:<12.6e} train avg={:.6} max={:.6} gamma={} converged={}",
            frontier.model_id,
            train.lambda,
            train.avg_individual_loss,
            train.max_individual_loss,
            fmt_gamma(train.gamma_hat),
            train.converged
        );
        if let Some(test) = records.next_if(|r| r.split == Split::Test) {
            let _ = write!(
                line,
                " test avg={:.6} max={:.6}",
                test.avg_individual_loss, test.max_individual_loss
            );
        }
        lines.push(line);
    }
    lines
}

/// Runs every model and writes the frontier files and resolved config.
pub fn execute_frontier(config: &RunConfig) -> Result<Vec<ModelFrontier>> {
    let (frontiers, group_names) = run_frontier(config)?;
    write_outputs(config, &frontiers, &group_names)?;
    Ok(frontiers)
}

/// Exit code for finished frontiers: solver failure when some model
/// diverged at every tilt.
pub fn frontier_exit_code(frontiers: &[ModelFrontier]) -> u8 {
    if frontiers.iter().any(|f| f.all_diverged) {
        EXIT_SOLVER
    } else {
        EXIT_OK
    }
}

pub fn cmd_frontier(args: &FrontierArgs) -> Result<u8> {
    let config = RunConfig::resolve(args)?;
    let frontiers = execute_frontier(&config)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for frontier in &frontiers {
        for line in summary_lines(frontier) {
            let _ = writeln!(out, "{line}");
        }
    }
    let failed: Vec<&str> = frontiers
        .iter()
        .filter(|f| f.all_diverged)
        .map(|f| f.model_id.as_str())
        .collect();
    if !failed.is_empty() {
        eprintln!(
            "error: solver diverged at every lambda for {}",
            failed.join(", ")
        );
    }
    Ok(frontier_exit_code(&frontiers))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    if args.list {
        for name in crate::verify::CHECK_NAMES {
            println!("{name}");
        }
        return Ok(EXIT_OK);
    }
    let reports = run_checks(&args.checks)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let path = args.out.join("verify_report.jsonl");
    let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    for report in &reports {
        serde_json::to_writer(&mut file, report)?;
        writeln!(file).map_err(|e| Error::io(&path, e))?;
        println!("{}", report.summary_line());
    }
    let all_pass = reports.iter().all(|r| r.status == CheckStatus::Pass);
    Ok(if all_pass { EXIT_OK } else { EXIT_SOLVER })
}

pub fn gen_config(args: &GenArgs) -> Result<SyntheticConfig> {
    let kind = match args.kind.as_str() {
        "linear-noise" | "linear" => SyntheticKind::LinearNoise,
        "two-group-logistic" | "logistic" => SyntheticKind::TwoGroupLogistic,
        other => return Err(Error::Config(format!("unknown synthetic kind `{other}`"))),
    };
    let noise = match args.noise.as_str() {
        "gaussian" => Noise::Gaussian { sigma: args.sigma },
        "skewed" | "exponential" => Noise::SkewedExponential { rate: args.rate },
        other => return Err(Error::Config(format!("unknown noise `{other}`"))),
    };
    Ok(SyntheticConfig {
        kind,
        n: args.n,
        p: args.p,
        noise,
        group_imbalance: args.group_imbalance,
        seed: args.seed,
        feature_mean: args.feature_mean,
        theta_star: None,
    })
}

pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "synthetic".into());
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let config = gen_config(args)?;
    let synthetic = generate(&config).map_err(|e| match e {
        Error::InvalidParameter(m) | Error::InvalidInput(m) => Error::Config(m),
        other => other,
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    synthetic.dataset.write_csv(&args.out)?;
    let meta = metadata_path(&args.out);
    synthetic.metadata.write_json(&meta)?;
    println!(
        "wrote {} rows to {} and metadata to {}",
        synthetic.dataset.n(),
        args.out.display(),
        meta.display()
    );
    Ok(EXIT_OK)
}

/// Parses `argv`, runs the command and maps errors to exit codes.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let result = match &cli.command {
        Command::Frontier(args) => cmd_frontier(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parsing() {
        let s = parse_config_text(
            "# comment\ndata = a.csv\nlambda_count=5 # trailing\nmodels=logistic,mlp1\n\n",
        )
        .unwrap();
        assert_eq!(s["data"], "a.csv");
        assert_eq!(s["lambda-count"], "5");
        assert_eq!(s["model"], "logistic,mlp1");
        assert!(matches!(
            parse_config_text("nonsense"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config_text("colour=blue"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "data=x.csv\ntarget=y\nlambda-count=7\nseed=3\nstart-from-utilitarian=true\n",
        )
        .unwrap();
        let args = FrontierArgs {
            config: Some(path),
            seed: Some(11),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!(c.lambda_count, 7);
        assert_eq!(c.seed, 11);
        assert!(c.start_from_utilitarian);
        assert_eq!(c.models, vec!["logistic".to_string()]);
        assert_eq!(c.lambda_grid().unwrap().len(), 7);
    }

    #[test]
    fn resolved_text_round_trips() {
        let args = FrontierArgs {
            data: Some("d.csv".into()),
            target: Some("y".into()),
            group: Some("g".into()),
            model: Some("logistic, mlp2".into()),
            activation: Some("tanh".into()),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.cfg");
        fs::write(&path, c.to_text()).unwrap();
        let again = RunConfig::resolve(&FrontierArgs {
            config: Some(path),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let base = || FrontierArgs {
            data: Some("d.csv".into()),
            target: Some("y".into()),
            ..Default::default()
        };
        for args in [
            FrontierArgs {
                model: Some("forest".into()),
                ..base()
            },
            FrontierArgs {
                lambda_min: Some(-1.0),
                ..base()
            },
            FrontierArgs {
                test_fraction: Some(1.0),
                ..base()
            },
            FrontierArgs {
                activation: Some("sigmoid".into()),
                ..base()
            },
            FrontierArgs {
                grad_tol: Some(0.0),
                ..base()
            },
            FrontierArgs {
                target: None,
                ..base()
            },
        ] {
            let err = RunConfig::resolve(&args).unwrap_err();
            assert_eq!(exit_code(&err), EXIT_CONFIG, "{err}");
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::MissingColumn("y".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::EmptyDataset), EXIT_DATA);
        assert_eq!(exit_code(&Error::Data("bad".into())), EXIT_DATA);
    }

    #[test]
    fn metadata_sits_next_to_csv() {
        assert_eq!(
            metadata_path(Path::new("out/s.csv")),
            PathBuf::from("out/s.meta.json")
        );
    }
}
