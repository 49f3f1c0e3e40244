//! Thin command-line front end; all logic lives in the library.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csauc::bench::{bench_scaling, render_csv, BenchConfig};
use csauc::gen::{write_csv, BidDist, GenConfig};
use csauc::{
    auc_pairwise, csauc_exact, eval::parse_metric_list, evaluate_file, read_all, render_json,
    render_text, BidQuantization, BucketingConfig, ColumnSel, Error, EvalOptions, GroupPolicy,
    GroupWeight, InputFormat, InputSpec, Result, TiePolicy,
};

#[derive(Parser)]
#[command(
    name = "csauc",
    version,
    about = "Offline CTR-model evaluation: csAUC, AUC, grouped variants, COPC, ROPR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a prediction log and print a metrics report.
    Eval(EvalArgs),
    /// Brute-force pairwise evaluation of a small log (ground truth).
    Oracle(OracleArgs),
    /// Generate a synthetic prediction log.
    Gen(GenArgs),
    /// Time the grid sweep against the quadratic baseline.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input path, or - for standard input.
    #[arg(long)]
    input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// The input has no header row; columns are label,bid,pctr,group.
    #[arg(long)]
    no_header: bool,
    /// Column (header name, or index with --no-header) of the group key.
    #[arg(long)]
    group_key: Option<String>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
}

impl InputArgs {
    fn to_spec(&self) -> InputSpec {
        let format = match self.format {
            Some(FormatArg::Csv) => InputFormat::Csv,
            Some(FormatArg::Tsv) => InputFormat::Tsv,
            Some(FormatArg::Jsonl) => InputFormat::Jsonl,
            None => InputSpec::from_path(&self.input).format,
        };
        let mut spec = InputSpec::new(self.input.clone(), format, !self.no_header);
        if let Some(raw) = &self.group_key {
            spec.columns.group = Some(ColumnSel::parse(raw));
        }
        spec
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Tsv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Half,
    Full,
}

impl From<TieArg> for TiePolicy {
    fn from(arg: TieArg) -> TiePolicy {
        match arg {
            TieArg::Half => TiePolicy::HalfCredit,
            TieArg::Full => TiePolicy::FullCredit,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Rewardmax,
    Count,
    Uniform,
}

impl From<WeightArg> for GroupWeight {
    fn from(arg: WeightArg) -> GroupWeight {
        match arg {
            WeightArg::Rewardmax => GroupWeight::RewardMax,
            WeightArg::Count => GroupWeight::ImpressionCount,
            WeightArg::Uniform => GroupWeight::Uniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Text,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated list: auc,csauc,gcsauc,gauc,copc,ropr.
    #[arg(long, default_value = "auc,csauc,copc,ropr")]
    metrics: String,
    #[arg(long, value_enum, default_value = "half")]
    tie_policy: TieArg,
    /// Number of score buckets.
    #[arg(long, default_value_t = csauc::DEFAULT_PCPM_BUCKETS)]
    pcpm_buckets: usize,
    /// Bid leveling: exact, width:W, or quantile:K.
    #[arg(long, default_value = "exact")]
    bid_buckets: String,
    #[arg(long, value_enum, default_value = "rewardmax")]
    group_weight: WeightArg,
    /// Skip groups smaller than this.
    #[arg(long, default_value_t = 2)]
    min_group_size: usize,
    /// Include the per-group breakdown in the report.
    #[arg(long)]
    per_group: bool,
    /// Decimal places in the report.
    #[arg(long, default_value_t = 6)]
    precision: usize,
    /// Report rendering.
    #[arg(long, value_enum, default_value = "json")]
    report: ReportArg,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "half")]
    tie_policy: TieArg,
    /// Largest input the quadratic enumeration accepts.
    #[arg(long, default_value_t = 20_000)]
    cap: u64,
    /// Run the pairwise enumeration regardless of input size.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Args)]
struct GenArgs {
    /// Output path, or - for standard output.
    #[arg(long)]
    output: PathBuf,
    /// Rows to generate.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Campaign count; bounds the number of distinct bids.
    #[arg(long, default_value_t = 16)]
    campaigns: u32,
    /// Bid distribution: uniform or lognormal.
    #[arg(long, default_value = "uniform")]
    bid_dist: String,
    /// Largest uniform integer bid.
    #[arg(long, default_value_t = 100)]
    bid_max: u32,
    /// Predictor noise in logit space; 0 preserves true-rate order.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Group keys to spread rows over; 0 omits the column.
    #[arg(long, default_value_t = 0)]
    groups: u32,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated sample counts.
    #[arg(long, default_value = "1000,10000,100000")]
    sizes: String,
    /// Comma-separated level counts.
    #[arg(long, default_value = "10,100")]
    levels: String,
    /// Comma-separated score bucket counts.
    #[arg(long, default_value = "1001,100001")]
    buckets: String,
    /// Timed repetitions per configuration (median reported).
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Baseline runs only for sizes at or below this.
    #[arg(long, default_value_t = 20_000)]
    oracle_cap: u64,
}

fn main() -> ExitCode {
    csauc::init_thread_cap();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval(args) => run_eval(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Gen(args) => run_gen(args),
        Command::Bench(args) => run_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.name());
            ExitCode::FAILURE
        }
    }
}

fn parse_bid_buckets(raw: &str) -> Result<BidQuantization> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("exact") {
        return Ok(BidQuantization::ExactBids);
    }
    if let Some(width) = raw.strip_prefix("width:") {
        let width: f64 = width
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad bid bucket width {width:?}")))?;
        return Ok(BidQuantization::FixedWidth(width));
    }
    if let Some(k) = raw.strip_prefix("quantile:") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad quantile count {k:?}")))?;
        return Ok(BidQuantization::Quantile(k));
    }
    Err(Error::InvalidConfig(format!(
        "bid buckets must be exact, width:W or quantile:K, got {raw:?}"
    )))
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let spec = args.input.to_spec();
    let options = EvalOptions {
        metrics: parse_metric_list(&args.metrics)?,
        tie_policy: args.tie_policy.into(),
        bucketing: BucketingConfig {
            n_buckets: args.pcpm_buckets,
            quantization: parse_bid_buckets(&args.bid_buckets)?,
        },
        group_policy: GroupPolicy {
            weight: args.group_weight.into(),
            min_group_size: args.min_group_size,
        },
        strict: args.input.strict,
        per_group: args.per_group,
    };
    let (report, tally) = evaluate_file(&spec, &options)?;
    if !tally.is_empty() {
        eprintln!("{tally}");
    }
    match args.report {
        ReportArg::Json => println!("{}", render_json(&report, args.precision)),
        ReportArg::Text => print!("{}", render_text(&report, args.precision)),
    }
    Ok(())
}

fn run_oracle(args: OracleArgs) -> Result<()> {
    let spec = args.input.to_spec();
    let (samples, tally) = read_all(&spec, args.input.strict)?;
    if !tally.is_empty() {
        eprintln!("{tally}");
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !args.force && samples.len() as u64 > args.cap {
        return Err(Error::InputTooLarge {
            n: samples.len() as u64,
            cap: args.cap,
        });
    }
    let result = csauc_exact(&samples, args.tie_policy.into())?;
    let auc = match auc_pairwise(&samples) {
        Ok(auc) => Some(auc),
        Err(Error::NoPosNegPairs) => None,
        Err(e) => return Err(e),
    };
    let precision = args.precision;
    let mut out = String::from("{");
    if let Some(auc) = auc {
        out.push_str(&format!("\"auc\":{auc:.precision$},"));
    }
    out.push_str(&format!(
        "\"csauc\":{:.precision$},\"reward_rank\":{:.precision$},\"reward_max\":{:.precision$},\"n_pairs\":{},\"n_samples\":{}}}",
        result.csauc, result.reward_rank, result.reward_max, result.n_pairs, samples.len()
    ));
    println!("{out}");
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let bid_dist = match args.bid_dist.trim().to_ascii_lowercase().as_str() {
        "uniform" => BidDist::UniformInt { max: args.bid_max },
        "lognormal" => BidDist::LogNormal {
            mu: (args.bid_max as f64).ln() / 2.0,
            sigma: 0.8,
        },
        other => {
            return Err(Error::InvalidConfig(format!(
                "bid distribution must be uniform or lognormal, got {other:?}"
            )))
        }
    };
    let config = GenConfig {
        seed: args.seed,
        n: args.n,
        campaigns: args.campaigns,
        bid_dist,
        noise: args.noise,
        groups: args.groups,
    };
    if args.output.as_os_str() == "-" {
        write_csv(&config, io::stdout().lock())?;
    } else {
        let file = File::create(&args.output)?;
        write_csv(&config, file)?;
    }
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
        raw.split(',')
            .map(|part| {
                part.trim()
                    .parse::<T>()
                    .map_err(|_| Error::InvalidConfig(format!("bad {what} entry {part:?}")))
            })
            .collect()
    }
    let config = BenchConfig {
        sizes: parse_list(&args.sizes, "sizes")?,
        levels: parse_list(&args.levels, "levels")?,
        buckets: parse_list(&args.buckets, "buckets")?,
        runs: args.runs,
        seed: args.seed,
        oracle_cap: args.oracle_cap,
    };
    let rows = bench_scaling(&config)?;
    let mut stdout = io::stdout().lock();
    stdout.write_all(render_csv(&rows).as_bytes())?;
    Ok(())
}
