//! trunctail: simulate truncated heavy-tailed data, estimate tail and
//! second-order parameters, run the Monte-Carlo grid and evaluate
//! asymptotic variances.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or domain error.

mod output;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trunctail::asymptotics::{constants, sigma_alpha_sq, sigma_bmn_sq, sigma_star_sq, SecondOrderContext};
use trunctail::estimators::{full_pipeline, hill, KChoice, PipelineConfig, RhoEstimate};
use trunctail::montecarlo::{run_grid, AbiasMode, McConfig};
use trunctail::product_limit::ProductLimitTables;
use trunctail::sampling::{draw_truncated_sample, ObservedSample, TruncationModel};
use trunctail::selection::SelectionConfig;
use trunctail::Error;

use output::Record;

#[derive(Debug, Parser)]
#[command(name = "trunctail", version, about = "Tail-index and second-order parameter estimation under random right truncation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a truncated Burr sample and write it as x,y CSV.
    Simulate(SimulateArgs),
    /// Estimate gamma1, rho1 and the bias-reduced tail index from x,y CSV.
    Estimate(EstimateArgs),
    /// Run the Monte-Carlo grid.
    Mc(McArgs),
    /// Print limiting constants and asymptotic variances.
    Variance(VarianceArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    gamma1: f64,
    /// Observed fraction gamma2 / (gamma1 + gamma2).
    #[arg(long, conflicts_with = "gamma2", required_unless_present = "gamma2")]
    p: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Number of latent pairs N before truncation.
    #[arg(long)]
    n_pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when omitted (the summary then goes to
    /// standard error).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum KArg {
    Auto,
    Fixed(usize),
}

fn parse_k(s: &str) -> Result<KArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KArg::Auto);
    }
    s.parse::<usize>()
        .map(KArg::Fixed)
        .map_err(|_| format!("expected `auto` or a positive integer, got `{s}`"))
}

#[derive(Debug, Args)]
struct SelectionArgs {
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Exponent of the Reiss-Thomas weights.
    #[arg(long, default_value_t = 0.3)]
    theta_rt: f64,
    /// Lower end of the Reiss-Thomas search as a fraction of n.
    #[arg(long, default_value_t = 0.05)]
    k_floor: f64,
}

impl SelectionArgs {
    fn config(&self) -> SelectionConfig {
        SelectionConfig {
            epsilon: self.epsilon,
            theta: self.theta_rt,
            k_floor_fraction: self.k_floor,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sample fraction: `auto` (Reiss-Thomas) or an integer in [1, n-1].
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    k: KArg,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    fallback_rho: f64,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Print one JSON object instead of key=value lines.
    #[arg(long)]
    json_lines: bool,
    /// Also write the product-limit tables (i,x,c,f,ratio) to this CSV.
    #[arg(long)]
    dump_tables: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AbiasArg {
    /// |mean - truth|
    AbsMean,
    /// mean |estimate - truth|
    MeanAbs,
}

#[derive(Debug, Args)]
struct McArgs {
    /// key=value file with any of: gamma1, p, N, replicates, seed, delta, alpha.
    /// Flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    gamma1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long = "n", value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, value_enum, default_value_t = AbiasArg::AbsMean)]
    abias: AbiasArg,
    /// Report CSV; the aligned table is written next to it with a .txt
    /// extension. Without it the table goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VarianceArgs {
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    gamma2: f64,
    #[arg(long, allow_hyphen_values = true)]
    rho1: f64,
    /// Defaults to rho1.
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Also write the values as name,value CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn compute(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Range { .. } | Error::EmptyRange { .. } => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::compute(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Mc(a) => mc(a),
        Command::Variance(a) => variance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("TRUNCTAIL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("TRUNCTAIL_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let model = match (a.p, a.gamma2) {
        (Some(p), None) => TruncationModel::burr_with_p(a.gamma1, p, a.delta)?,
        (None, Some(g2)) => TruncationModel::burr(a.gamma1, g2, a.delta)?,
        _ => return Err(Failure::usage("give exactly one of --p and --gamma2")),
    };
    if a.n_pairs == 0 {
        return Err(Failure::usage("--n-pairs must be at least 1"));
    }
    let sample = draw_truncated_sample(&model, a.n_pairs, a.seed)?;

    let mut rec = Record::new();
    rec.int("seed", a.seed)
        .int("N", a.n_pairs as u64)
        .int("n", sample.n() as u64)
        .num("kept_fraction", sample.n() as f64 / a.n_pairs as f64)
        .num("gamma1", model.gamma1)
        .num("gamma2", model.gamma2)
        .num("gamma", model.gamma)
        .num("p", model.p)
        .num("rho1", model.rho1)
        .num("delta", model.delta);

    match &a.out {
        Some(path) => {
            sample.write_csv(BufWriter::new(File::create(path)?))?;
            rec.text("out", &path.display().to_string());
            rec.print_kv(io::stdout().lock())?;
        }
        None => {
            let stdout = io::stdout();
            sample.write_csv(stdout.lock())?;
            rec.print_kv(io::stderr().lock())?;
        }
    }
    Ok(())
}

fn read_sample(path: &PathBuf) -> Result<ObservedSample, Failure> {
    let file = File::open(path).map_err(|e| Failure::compute(format!("{}: {e}", path.display())))?;
    Ok(ObservedSample::read_csv(io::BufReader::new(file))?)
}

fn estimate(a: EstimateArgs) -> CliResult {
    let selection = a.selection.config();
    selection.validate()?;
    let sample = read_sample(&a.input)?;
    let tables = ProductLimitTables::build(&sample)?;
    if let Some(path) = &a.dump_tables {
        tables.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let cfg = PipelineConfig {
        k: match a.k {
            KArg::Auto => KChoice::Auto,
            KArg::Fixed(k) => KChoice::Fixed(k),
        },
        alpha: a.alpha,
        fallback_rho: a.fallback_rho,
        selection,
    };
    let est = full_pipeline(&sample, &cfg)?;

    let mut rec = Record::new();
    rec.int("n", sample.n() as u64)
        .int("k_used", est.k_used as u64)
        .int("k_bmn", est.k_bmn as u64)
        .int("upsilon_used", est.upsilon_used as u64)
        .num("alpha", est.alpha_used)
        .num("gamma_bmn", est.gamma_bmn);
    match est.rho1_hat {
        RhoEstimate::Admissible(rho) => {
            rec.text("rho1_status", "admissible").num("rho1_hat", rho);
        }
        RhoEstimate::NotAdmissible { s } => {
            rec.text("rho1_status", "not_admissible").num("s_statistic", s);
        }
    }
    rec.num("rho_used", est.rho_used)
        .num("a0_hat", est.a0_hat)
        .num("gamma1_hat", est.gamma1_hat);

    // plug-in standard errors, with gamma2 from the Hill estimator on y
    let ys: Vec<f64> = sample.pairs().iter().map(|p| p.1).collect();
    let gamma2_hat = hill(&ys, est.k_bmn)?;
    rec.num("gamma2_hat", gamma2_hat);
    let plug_in = SecondOrderContext::new(est.gamma_bmn, gamma2_hat, est.rho_used, est.rho_used, est.alpha_used);
    match plug_in {
        Ok(ctx) if ctx.in_theory_regime() => {
            let bmn = sigma_bmn_sq(&ctx)?;
            rec.num("se_gamma_bmn", (bmn / est.k_bmn as f64).sqrt());
            match sigma_star_sq(&ctx) {
                Ok(star) => rec.num("se_gamma1_hat", (star / est.k_used as f64).sqrt()),
                Err(e) => rec.text("se_gamma1_hat", &format!("unavailable ({e})")),
            };
        }
        _ => {
            rec.text("se_gamma_bmn", "unavailable (gamma_bmn >= gamma2_hat)");
            rec.text("se_gamma1_hat", "unavailable (gamma_bmn >= gamma2_hat)");
        }
    }

    let stdout = io::stdout();
    if a.json_lines {
        rec.print_json(stdout.lock())?;
    } else {
        rec.print_kv(stdout.lock())?;
    }
    Ok(())
}

/// Settings read from an `mc --config` file.
#[derive(Debug, Default)]
struct McFile {
    gamma1: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    n_list: Option<Vec<usize>>,
    replicates: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    alpha: Option<f64>,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, Failure> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Failure::usage(format!("config: bad value `{v}` for `{key}`")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Failure> {
    value
        .trim()
        .parse()
        .map_err(|_| Failure::usage(format!("config: bad value `{value}` for `{key}`")))
}

fn read_mc_file(path: &PathBuf) -> Result<McFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut cfg = McFile::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        match key {
            "gamma1" => cfg.gamma1 = Some(parse_list(key, value)?),
            "p" => cfg.p = Some(parse_list(key, value)?),
            "N" | "n" => cfg.n_list = Some(parse_list(key, value)?),
            "replicates" => cfg.replicates = Some(parse_one(key, value)?),
            "seed" => cfg.seed = Some(parse_one(key, value)?),
            "delta" => cfg.delta = Some(parse_one(key, value)?),
            "alpha" => cfg.alpha = Some(parse_one(key, value)?),
            other => {
                return Err(Failure::usage(format!("config line {}: unknown key `{other}`", lineno + 1)));
            }
        }
    }
    Ok(cfg)
}

fn mc(a: McArgs) -> CliResult {
    let file = match &a.config {
        Some(path) => read_mc_file(path)?,
        None => McFile::default(),
    };
    let defaults = McConfig::default();
    let cfg = McConfig {
        gamma1_list: a.gamma1.or(file.gamma1).unwrap_or(defaults.gamma1_list),
        p_list: a.p.or(file.p).unwrap_or(defaults.p_list),
        n_list: a.n_list.or(file.n_list).unwrap_or(defaults.n_list),
        replicates: a.replicates.or(file.replicates).unwrap_or(defaults.replicates),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
        delta: a.delta.or(file.delta).unwrap_or(defaults.delta),
        alpha: a.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        selection: a.selection.config(),
        fallback_rho: defaults.fallback_rho,
        abias: match a.abias {
            AbiasArg::AbsMean => AbiasMode::AbsoluteMean,
            AbiasArg::MeanAbs => AbiasMode::MeanAbsolute,
        },
    };
    let report = run_grid(&cfg)?;
    let table = report.to_table();

    let mut rec = Record::new();
    rec.int("seed", cfg.seed)
        .int("replicates", cfg.replicates as u64)
        .int("cells", report.cells.len() as u64);
    match &a.out {
        Some(path) => {
            report.write_csv(BufWriter::new(File::create(path)?))?;
            let table_path = path.with_extension("txt");
            fs::write(&table_path, &table)?;
            rec.text("out", &path.display().to_string())
                .text("table", &table_path.display().to_string());
            rec.print_kv(io::stdout().lock())?;
        }
        None => {
            let mut out = io::stdout().lock();
            rec.print_kv(&mut out)?;
            writeln!(out)?;
            out.write_all(table.as_bytes())?;
        }
    }

    let failed: Vec<String> = report
        .failed_cells()
        .map(|c| {
            let why = c.first_failure.as_ref().map(|e| e.to_string()).unwrap_or_default();
            format!(
                "gamma1={} p={} N={}: {}/{} replicates failed ({why})",
                c.gamma1, c.p, c.big_n, c.failure_count, c.replicates
            )
        })
        .collect();
    if !failed.is_empty() {
        return Err(Failure::compute(format!("{} cell(s) failed:\n  {}", failed.len(), failed.join("\n  "))));
    }
    Ok(())
}

fn variance(a: VarianceArgs) -> CliResult {
    let ctx = SecondOrderContext::new(a.gamma1, a.gamma2, a.rho1, a.beta1.unwrap_or(a.rho1), a.alpha)?;
    if !ctx.in_theory_regime() {
        return Err(Failure::compute(format!(
            "pole: the asymptotic variances need gamma1 < gamma2, got gamma1 = {} and gamma2 = {}",
            ctx.gamma1, ctx.gamma2
        )));
    }
    let k = constants(&ctx)?;
    let al = ctx.alpha;
    let mut rec = Record::new();
    rec.num("gamma1", ctx.gamma1)
        .num("gamma2", ctx.gamma2)
        .num("gamma", ctx.gamma)
        .num("rho1", ctx.rho1)
        .num("beta1", ctx.beta1)
        .num("alpha", al);
    for (name, order) in [("alpha", al), ("alpha+1", al + 1.0), ("2alpha", 2.0 * al), ("1", 1.0), ("2", 2.0)] {
        rec.num(&format!("mu1[{name}]"), k.mu1(order))
            .num(&format!("mu2[{name}]"), k.mu2(order))
            .num(&format!("mu3[{name}]"), k.mu3(order))
            .num(&format!("mu4[{name}]"), k.mu4(order))
            .num(&format!("m[{name}]"), k.m(order))
            .num(&format!("c[{name}]"), k.c(order))
            .num(&format!("d[{name}]"), k.d(order))
            .num(&format!("r[{name}]"), k.r(order)?);
    }
    rec.num("tau1", k.tau1)
        .num("tau2", k.tau2)
        .num("tau3", k.tau3)
        .num("tau4", k.tau4)
        .num("tau5", k.tau5)
        .num("tau6", k.tau6)
        .num("eta1", k.eta1)
        .num("eta2", k.eta2)
        .num("xi", k.xi)
        .num("mu", k.mu)
        .num("sigma2_bmn", sigma_bmn_sq(&ctx)?)
        .num("sigma2_alpha", sigma_alpha_sq(&ctx)?)
        .num("sigma2_star", sigma_star_sq(&ctx)?);
    rec.print_kv(io::stdout().lock())?;
    if let Some(path) = &a.csv {
        rec.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}
