//! Command-line harness: instance generation, solving, streaming, the
//! value-oracle benchmark, comparisons and sweeps, sample-size planning,
//! StackExchange ingestion, and the verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 data
//! error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use testscore::error::Error;
use testscore::harness::{
    self, run_comparison, summarize, sweep, CostMode, DistFamily, SweepAxis, SyntheticConfig,
};
use testscore::instance::Instance;
use testscore::samples::{hoeffding_samples, mcdiarmid_samples, topset_samples, AccuracySpec};
use testscore::scores::{estimate_scores, exact_score_table, ScoreTable, DEFAULT_ENUM_CAP};
use testscore::solvers::{
    celf, solution_csv_header, solution_csv_row, streaming_tsg, tsg, tsg_with, ExactEvaluator,
};
use testscore::stackexchange::{
    build_instance, build_profiles, parse_dump, profiles_csv, test_samples_csv, BetaPrior,
};
use testscore::value_fn::ValueFunction;
use testscore::Seed;

#[derive(Parser)]
#[command(
    name = "testscore",
    about = "Budgeted stochastic utility maximization via replication test scores",
    version
)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Output format; csv is the only supported value.
    #[arg(long, global = true, default_value = "csv")]
    format: String,

    /// Suppress the timestamped header line and zero wall-clock columns so
    /// reruns with the same seed are byte-identical.
    #[arg(long, global = true)]
    deterministic_header: bool,

    /// Plain-text key=value file supplying defaults for omitted flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Synthetic-setting flags shared by gen, compare, and sweep. Omitted flags
/// fall back to the key=value config file, then to the built-in defaults.
#[derive(Args, Clone)]
struct SettingArgs {
    /// Number of items.
    #[arg(long)]
    n: Option<usize>,

    /// Budget limit.
    #[arg(long)]
    budget: Option<f64>,

    /// Value distribution family: bernoulli, exponential, pareto:SHAPE,
    /// deterministic.
    #[arg(long)]
    dist: Option<String>,

    /// Group value function tag, e.g. modular, topr:1, ces:2, power:0.5,
    /// succ:exp.
    #[arg(long)]
    value_fn: Option<String>,

    /// Cost coefficient in c = 1 + lambda * mean.
    #[arg(long)]
    lambda: Option<f64>,

    /// Training samples per item.
    #[arg(long)]
    samples: Option<usize>,

    /// Instances per setting.
    #[arg(long)]
    instances: Option<usize>,

    /// correlated or independent costs.
    #[arg(long)]
    cost_mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic instance files.
    Gen(SettingArgs),

    /// Estimate scores and run the two-candidate greedy on an instance file.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        value_fn: String,
        /// Training samples per item.
        #[arg(long, default_value_t = 150)]
        samples: usize,
        /// Joint realizations for the candidate comparison.
        #[arg(long, default_value_t = harness::DEFAULT_EVAL_REPS)]
        eval_reps: usize,
        /// Use exact scores and exact utilities (finite supports only).
        #[arg(long)]
        exact: bool,
        /// Also write the score table as CSV.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },

    /// Run the single-pass streaming selection over an instance file.
    Stream {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        value_fn: String,
        #[arg(long, default_value_t = 150)]
        samples: usize,
        #[arg(long, default_value_t = harness::DEFAULT_EVAL_REPS)]
        eval_reps: usize,
        /// Shuffle the arrival order with this seed; default is file order.
        #[arg(long)]
        shuffle: Option<u64>,
    },

    /// Run the lazy value-oracle greedy benchmark on an instance file.
    Celf {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        value_fn: String,
        /// Realizations per marginal estimate.
        #[arg(long, default_value_t = 150)]
        samples: usize,
    },

    /// Compare the greedy against the benchmark on synthetic instances.
    Compare {
        #[command(flatten)]
        setting: SettingArgs,
        /// Run the full 100-instance protocol instead of the desk-scale
        /// default.
        #[arg(long)]
        full: bool,
    },

    /// Sweep one axis of the comparison configuration.
    Sweep {
        #[command(flatten)]
        setting: SettingArgs,
        /// lambda, samples, dist, or value-fn.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        full: bool,
    },

    /// Print per-item sufficient sample sizes as CSV.
    Plan {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        value_fn: String,
        /// Relative score error target.
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Failure probability target.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Training samples for estimated scores when exact scores are
        /// unavailable.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Tail quantile at which unbounded supports are truncated.
        #[arg(long, default_value_t = 1.0 - 1e-6)]
        truncate_quantile: f64,
    },

    /// Build an experiment instance from StackExchange dump files.
    Ingest {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        votes: PathBuf,
        /// Virtual up,down votes, e.g. 5,5.
        #[arg(long, default_value = "5,5")]
        prior: String,
        #[arg(long, default_value_t = 130)]
        min_answers: usize,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Held-out test samples per expert.
        #[arg(long, default_value_t = 30)]
        holdout: usize,
        /// Budget as a fraction of the summed estimated means.
        #[arg(long, default_value_t = 0.3)]
        budget_fraction: f64,
        /// Drop answers with no votes instead of scoring them at the prior
        /// mean.
        #[arg(long)]
        exclude_unvoted: bool,
    },

    /// Run the composite verification suite.
    Verify {
        /// Corpus scale; 500 reproduces the acceptance-suite sizes.
        #[arg(long, default_value_t = 500)]
        corpus: usize,
    },
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(core) = err.downcast_ref::<Error>() {
        return match core {
            Error::Parse { .. } | Error::Io(_) | Error::UnknownItem(_) | Error::Protocol(_) => {
                ExitCode::from(3)
            }
            _ => ExitCode::from(2),
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return ExitCode::from(3);
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

/// key=value lines; blank lines and # comments ignored.
fn load_config(path: Option<&Path>) -> anyhow::Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    let Some(path) = path else { return Ok(map) };
    let text = fs::read_to_string(path).map_err(Error::Io)?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected key=value, got {line}"),
            }
            .into());
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn setting_to_config(
    setting: &SettingArgs,
    file: &HashMap<String, String>,
    seed: u64,
) -> anyhow::Result<SyntheticConfig> {
    fn pick<T: FromStr>(
        flag: Option<T>,
        file: &HashMap<String, String>,
        key: &str,
        default: T,
    ) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match file.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!(Error::InvalidParameter(format!("{key}: {e}")))),
            None => Ok(default),
        }
    }

    let value_fn: ValueFunction =
        pick(setting.value_fn.as_deref().map(str::to_string), file, "value_fn", "modular".into())?
            .parse()
            .map_err(anyhow::Error::from)?;
    let dist: DistFamily =
        pick(setting.dist.clone(), file, "dist", "bernoulli".into())?.parse()?;
    let cost_mode: CostMode =
        pick(setting.cost_mode.clone(), file, "cost_mode", "correlated".into())?.parse()?;

    let mut cfg = SyntheticConfig::new(value_fn, dist);
    cfg.n = pick(setting.n, file, "n", cfg.n)?;
    cfg.budget = pick(setting.budget, file, "budget", cfg.budget)?;
    cfg.lambda = pick(setting.lambda, file, "lambda", cfg.lambda)?;
    cfg.train_samples = pick(setting.samples, file, "samples", cfg.train_samples)?;
    cfg.instances = pick(setting.instances, file, "instances", cfg.instances)?;
    cfg.cost_mode = cost_mode;
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn header_line(deterministic: bool) -> Option<String> {
    if deterministic {
        None
    } else {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Some(format!("# generated at unix {now}"))
    }
}

fn write_csv(
    path: &Path,
    header_comment: Option<&str>,
    header: &str,
    rows: &[String],
) -> anyhow::Result<()> {
    let mut out = String::new();
    if let Some(comment) = header_comment {
        out.push_str(comment);
        out.push('\n');
    }
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::Io)?;
    }
    fs::write(path, out).map_err(Error::Io)?;
    Ok(())
}

fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).map_err(Error::Io)?;
    let trimmed = text.trim_start();
    let inst = if trimmed.starts_with('{') {
        Instance::from_json(&text)?
    } else {
        Instance::from_text(&text)?
    };
    Ok(inst)
}

fn score_table(
    instance: &Instance,
    g: &ValueFunction,
    samples: usize,
    exact: bool,
    seed: Seed,
) -> anyhow::Result<ScoreTable> {
    if exact {
        Ok(exact_score_table(instance, g, DEFAULT_ENUM_CAP)?)
    } else {
        Ok(estimate_scores(instance, g, samples, seed)?)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if cli.format != "csv" {
        return Err(Error::InvalidParameter(format!(
            "unsupported output format {}",
            cli.format
        ))
        .into());
    }
    let file_config = load_config(cli.config.as_deref())?;
    let seed = Seed(cli.seed);
    let comment = header_line(cli.deterministic_header);

    match cli.command {
        Command::Gen(setting) => {
            let cfg = setting_to_config(&setting, &file_config, cli.seed)?;
            fs::create_dir_all(&cli.out).map_err(Error::Io)?;
            for index in 0..cfg.instances as u64 {
                let instance = harness::generate_synthetic(&cfg, index)?;
                let path = cli.out.join(format!("instance_{index:03}.txt"));
                fs::write(&path, instance.to_text()).map_err(Error::Io)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Solve { instance, value_fn, samples, eval_reps, exact, scores_out } => {
            let inst = load_instance(&instance)?;
            let g: ValueFunction = value_fn.parse()?;
            let table = score_table(&inst, &g, samples, exact, seed)?;
            if let Some(path) = scores_out {
                fs::write(&path, table.to_csv()).map_err(Error::Io)?;
            }
            let sol = if exact {
                let mut evaluator = ExactEvaluator::new(&inst, &g, DEFAULT_ENUM_CAP);
                tsg_with(&inst, &table, &mut evaluator)?
            } else {
                tsg(&inst, &table, eval_reps, seed)?
            };
            println!("{}", solution_csv_header());
            println!(
                "{}",
                solution_csv_row("tsg", cli.seed, inst.len(), inst.budget(), &g.tag(), &sol)
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Stream { instance, value_fn, samples, eval_reps, shuffle } => {
            let inst = load_instance(&instance)?;
            let g: ValueFunction = value_fn.parse()?;
            let table = estimate_scores(&inst, &g, samples, seed)?;
            let mut order: Vec<usize> = (0..inst.len()).collect();
            if let Some(shuffle_seed) = shuffle {
                let mut rng = Seed(shuffle_seed).stream(testscore::Purpose::Fuzz, &[]);
                rng.shuffle(&mut order);
            }
            let stream: Vec<_> = order.iter().map(|&i| inst.items()[i].clone()).collect();
            let score_fn = |item: &testscore::Item| {
                table.get(item.id).map(|e| e.r_hat).unwrap_or(0.0)
            };
            let (sol, stats) =
                streaming_tsg(stream, inst.budget(), &g, score_fn, eval_reps, seed)?;
            println!("{}", solution_csv_header());
            println!(
                "{}",
                solution_csv_row("stream", cli.seed, inst.len(), inst.budget(), &g.tag(), &sol)
            );
            println!(
                "# peak_buffer_items={} updates={} final_buffer={}",
                stats.peak_buffer_items,
                stats.updates,
                stats
                    .final_buffer
                    .iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Celf { instance, value_fn, samples } => {
            let inst = load_instance(&instance)?;
            let g: ValueFunction = value_fn.parse()?;
            let sol = celf(&inst, &g, samples, seed)?;
            println!("{}", solution_csv_header());
            println!(
                "{}",
                solution_csv_row("celf", cli.seed, inst.len(), inst.budget(), &g.tag(), &sol)
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Compare { setting, full } => {
            let mut cfg = setting_to_config(&setting, &file_config, cli.seed)?;
            if full {
                cfg.instances = 100;
            }
            let rows = run_comparison(&cfg)?;
            let csv_rows: Vec<String> =
                rows.iter().map(|r| r.to_csv(cli.deterministic_header)).collect();
            let path = cli.out.join("comparison.csv");
            write_csv(&path, comment.as_deref(), harness::comparison_csv_header(), &csv_rows)?;
            let summary = summarize("all", &rows);
            println!("{}", harness::summary_csv_header());
            println!("{}", summary.to_csv());
            println!("# wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Sweep { setting, axis, values, full } => {
            let mut cfg = setting_to_config(&setting, &file_config, cli.seed)?;
            if full {
                cfg.instances = 100;
            }
            let axis: SweepAxis = axis.parse()?;
            let result = sweep(&cfg, axis, &values)?;
            for cell in &result.cells {
                let rows: Vec<String> =
                    cell.rows.iter().map(|r| r.to_csv(cli.deterministic_header)).collect();
                let safe: String = cell
                    .label
                    .chars()
                    .map(|c| if c.is_alphanumeric() { c } else { '_' })
                    .collect();
                let path = cli.out.join(format!("sweep_{safe}.csv"));
                write_csv(&path, comment.as_deref(), harness::comparison_csv_header(), &rows)?;
            }
            let summary_rows: Vec<String> =
                result.summaries.iter().map(|s| s.to_csv()).collect();
            let path = cli.out.join("sweep_summary.csv");
            write_csv(&path, comment.as_deref(), harness::summary_csv_header(), &summary_rows)?;
            println!("{}", harness::summary_csv_header());
            for s in &result.summaries {
                println!("{}", s.to_csv());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Plan { instance, value_fn, epsilon, delta, samples, truncate_quantile } => {
            let inst = load_instance(&instance)?;
            let g: ValueFunction = value_fn.parse()?;
            let acc = AccuracySpec::new(epsilon, delta)?;
            // Exact scores where the support allows, estimates otherwise.
            let table = match exact_score_table(&inst, &g, DEFAULT_ENUM_CAP) {
                Ok(t) => t,
                Err(_) => estimate_scores(&inst, &g, samples, seed)?,
            };
            // True score at the ranking's budget cut, for the top-set bound.
            let mut ranked: Vec<(u64, f64, f64)> = table
                .entries()
                .iter()
                .map(|e| (e.item_id, e.cost, e.r_hat))
                .collect();
            ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
            let mut cum = 0.0;
            let mut cut = 0;
            for item in &ranked {
                if cum + item.1 <= inst.budget() {
                    cum += item.1;
                    cut += 1;
                } else {
                    break;
                }
            }
            let score_cut = (cut < ranked.len()).then(|| ranked[cut].2);

            println!("id,k,T_hoeffding,T_mcdiarmid,T_topset");
            for item in inst.items() {
                let k = inst.replication_count(item.id)?;
                let bound = item.dist.truncated_bound(truncate_quantile)?;
                let (g_sup, g1_sup) = g.sup_norms(bound, k)?;
                let r = table.get(item.id)?.r_hat;
                let t_h = hoeffding_samples(k, g_sup, r, &acc)?;
                let t_m = mcdiarmid_samples(k, g1_sup, r, &acc)?;
                let t_top = match score_cut {
                    Some(rc) => {
                        topset_samples(&[k], g_sup, g1_sup, rc, inst.len(), &acc)?[0]
                    }
                    None => 0,
                };
                println!("{},{},{},{},{}", item.id, k, t_h, t_m, t_top);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Ingest {
            posts,
            votes,
            prior,
            min_answers,
            lambda,
            holdout,
            budget_fraction,
            exclude_unvoted,
        } => {
            let (a0, b0) = prior
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("prior {prior} must look like 5,5"))
                })?;
            let prior = BetaPrior::new(a0, b0)?;
            let mut records = parse_dump(&posts, &votes)?;
            if exclude_unvoted {
                records = testscore::stackexchange::filter_unvoted(&records);
            }
            let profiles = build_profiles(&records, min_answers, &prior)?;
            let data = build_instance(&profiles, lambda, holdout, budget_fraction, seed)?;
            fs::create_dir_all(&cli.out).map_err(Error::Io)?;
            let profiles_path = cli.out.join("profiles.csv");
            fs::write(&profiles_path, profiles_csv(&profiles)).map_err(Error::Io)?;
            let instance_path = cli.out.join("instance.txt");
            fs::write(&instance_path, data.instance.to_text()).map_err(Error::Io)?;
            let tests_path = cli.out.join("test_samples.csv");
            fs::write(&tests_path, test_samples_csv(&data.test_samples)).map_err(Error::Io)?;
            println!(
                "# answers={} experts={} budget={:?} truncated_costs={}",
                records.len(),
                profiles.len(),
                data.instance.budget(),
                data.truncated_costs
            );
            println!("{}", profiles_path.display());
            println!("{}", instance_path.display());
            println!("{}", tests_path.display());
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { corpus } => {
            let report = testscore::harness::verify::verify_suite(corpus, seed);
            if corpus == 0 {
                eprintln!("warning: corpus size 0, every check is vacuous");
            }
            for check in &report.checks {
                let verdict = if check.pass { "PASS" } else { "FAIL" };
                println!("{verdict}: {} — {}", check.name, check.detail);
            }
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}
