mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use belief_info::critical::{self, ExpectationConstraint, SolverReport};
use belief_info::experiments::{self, ExperimentConfig, RecordCsvWriter};
use belief_info::fisher::{self, Belief, FamilySpec, Reference};
use belief_info::gaussian::Gaussian;
use belief_info::labelinfo;
use belief_info::measures::{self, InfoValue, Units};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::io::{CliError, CliResult, Format, Sink};

/// View-dependent information measures, solvers and experiment harnesses.
#[derive(Parser)]
#[command(name = "belief-info", version)]
struct Cli {
    /// Units for every reported information value.
    #[arg(long, global = true, default_value = "bits", value_parser = io::parse_units)]
    units: Units,
    /// Seed for randomized commands; one is generated and printed when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving output artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads for parallel commands.
    #[arg(long, global = true, env = "BELIEF_INFO_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Information measures over discrete beliefs.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Information-critical distributions and annealed inference.
    #[command(subcommand)]
    Critical(CriticalCmd),
    /// Monte-Carlo study of first-inference information in a Gaussian model.
    Simulate(SimulateArgs),
    /// Label information for classifier prediction logs.
    #[command(subcommand)]
    Labels(LabelsCmd),
    /// Generalized Fisher score and matrix of a parametric family.
    Fisher(FisherArgs),
}

/// Arguments accept inline JSON or a path to a JSON file. Distributions may be
/// bare arrays, `{"probs": [..]}` or `{"weights": [..]}`.
#[derive(Subcommand)]
enum MeasureCmd {
    /// Information from q0 to q1 in the view of `view`.
    Info {
        #[arg(long)]
        view: String,
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
    },
    Entropy {
        #[arg(long)]
        probs: String,
    },
    CrossEntropy {
        #[arg(long)]
        view: String,
        #[arg(long)]
        q: String,
    },
    Kl {
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
    },
    /// Entropy difference H(q1) − H(q0).
    Lindley {
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
    },
    Mutual {
        #[arg(long)]
        joint: String,
    },
    /// Weighted Lᵖ norm of the information density.
    Pseudometric {
        #[arg(long)]
        view: String,
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Variance of the information density (squared units).
    Variance {
        #[arg(long)]
        view: String,
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
    },
    /// Information gained when `outcome` is realized.
    Realization {
        #[arg(long)]
        q: String,
        #[arg(long)]
        outcome: usize,
    },
    /// Information density at one outcome.
    Density {
        #[arg(long)]
        q1: String,
        #[arg(long)]
        q0: String,
        #[arg(long)]
        outcome: usize,
    },
}

#[derive(Subcommand)]
enum CriticalCmd {
    /// Maximum-entropy distribution under expectation constraints.
    Maxent {
        #[arg(long)]
        size: usize,
        /// `[{"kernel": [..], "target": x}, ..]`
        #[arg(long, default_value = "[]")]
        constraints: String,
        #[arg(long, default_value_t = critical::DEFAULT_TOL)]
        tol: f64,
    },
    /// Minimal-information distribution relative to `q0`.
    MinInfo {
        #[arg(long)]
        q0: String,
        #[arg(long, default_value = "[]")]
        constraints: String,
        #[arg(long, default_value_t = critical::DEFAULT_TOL)]
        tol: f64,
    },
    /// Minimal-information distribution meeting information targets toward given states.
    Constrained {
        #[arg(long)]
        q0: String,
        #[arg(long)]
        states: String,
        /// Targets in the selected units.
        #[arg(long)]
        targets: String,
        #[arg(long, default_value_t = critical::DEFAULT_TOL)]
        tol: f64,
    },
    /// Tempered posterior prior · likelihood^λ.
    Anneal {
        #[arg(long)]
        prior: String,
        #[arg(long)]
        likelihood: String,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
    /// Find λ giving a target information (selected units) from prior to annealed belief.
    AnnealSolve {
        #[arg(long)]
        prior: String,
        #[arg(long)]
        likelihood: String,
        #[arg(long, allow_hyphen_values = true)]
        target: f64,
        /// Tolerance in the selected units.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (inline JSON or file); defaults apply to missing fields.
    #[arg(long, default_value = "{}")]
    config: String,
    /// Override the number of experiments.
    #[arg(long)]
    num_experiments: Option<u64>,
    /// Also write one CSV row per experiment (requires --out).
    #[arg(long)]
    records: bool,
}

#[derive(Subcommand)]
enum LabelsCmd {
    /// Analyze a prediction log CSV (`id,label,p0..`, optional `baseline0..`, `mislabeled`).
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate a synthetic prediction log with known mislabeled records.
    Synth {
        #[arg(long)]
        num: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0.9)]
        confidence: f64,
        #[arg(long, default_value_t = 0.5)]
        mislabel_fraction: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FisherMethod {
    Auto,
    FiniteDifference,
}

#[derive(Args)]
struct FisherArgs {
    /// `{"family": "gaussian-location", "noise_cov": [[..]]}` or
    /// `{"family": "categorical-softmax", "kernel": [[..]]}`
    #[arg(long)]
    family: String,
    /// A Gaussian `{"mean", "cov"}` or a categorical `{"probs"}`.
    #[arg(long)]
    view: String,
    #[arg(long)]
    theta: String,
    /// Reference belief: `flat`, a Gaussian, or weights.
    #[arg(long, default_value = "flat")]
    q0: String,
    #[arg(long, value_enum, default_value = "auto")]
    method: FisherMethod,
}

struct Ctx {
    units: Units,
    seed: Option<u64>,
    format: Format,
    sink: Sink,
}

impl Ctx {
    fn scale(&self, nats: f64) -> f64 {
        self.units.from_nats(nats)
    }

    fn value(&self, v: InfoValue) -> CliResult<String> {
        self.scalar(v.nats(), self.units.as_str())
    }

    fn scalar(&self, nats: f64, units: &str) -> CliResult<String> {
        let v = if units.ends_with("^2") { nats * self.scale(1.0).powi(2) } else { self.scale(nats) };
        Ok(match self.format {
            Format::Json => io::pretty(&json!({ "value": io::real(v), "units": units }))?,
            Format::Csv => format!("value,units\n{},{units}\n", experiments::fmt_real(v)),
        })
    }

    /// The seed to use, generating and announcing one when none was given.
    fn seed_or_generate(&self, configured: Option<u64>) -> u64 {
        self.seed.or(configured).unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        })
    }
}

fn measure(ctx: &Ctx, cmd: &MeasureCmd) -> CliResult<String> {
    use io::{categorical, joint, weights};
    match cmd {
        MeasureCmd::Info { view, q1, q0 } => ctx.value(measures::info(
            &categorical(view, "view")?,
            &weights(q1, "q1")?,
            &weights(q0, "q0")?,
        )?),
        MeasureCmd::Entropy { probs } => ctx.value(measures::entropy(&categorical(probs, "probs")?)),
        MeasureCmd::CrossEntropy { view, q } => {
            ctx.value(measures::cross_entropy(&categorical(view, "view")?, &weights(q, "q")?)?)
        }
        MeasureCmd::Kl { q1, q0 } => ctx.value(measures::kl(&categorical(q1, "q1")?, &weights(q0, "q0")?)?),
        MeasureCmd::Lindley { q1, q0 } => {
            ctx.value(measures::lindley(&categorical(q1, "q1")?, &categorical(q0, "q0")?))
        }
        MeasureCmd::Mutual { joint: j } => ctx.value(measures::mutual_information(&joint(j)?)),
        MeasureCmd::Pseudometric { view, q1, q0, p } => ctx.value(measures::pseudometric_lp(
            &categorical(view, "view")?,
            &weights(q1, "q1")?,
            &weights(q0, "q0")?,
            *p,
        )?),
        MeasureCmd::Variance { view, q1, q0 } => {
            let v = measures::info_variance(&categorical(view, "view")?, &weights(q1, "q1")?, &weights(q0, "q0")?)?;
            ctx.scalar(v, &format!("{}^2", ctx.units))
        }
        MeasureCmd::Realization { q, outcome } => ctx.value(measures::realization_info(&weights(q, "q")?, *outcome)?),
        MeasureCmd::Density { q1, q0, outcome } => {
            ctx.value(measures::info_density(&weights(q1, "q1")?, &weights(q0, "q0")?, *outcome)?)
        }
    }
}

fn probs_json(c: &belief_info::Categorical) -> Value {
    json!(c.probs())
}

fn critical_cmd(ctx: &Ctx, cmd: &CriticalCmd) -> CliResult<String> {
    let report = |s: critical::CriticalSolution| io::pretty(&SolverReport::from(&s));
    match cmd {
        CriticalCmd::Maxent { size, constraints, tol } => {
            let cs: Vec<ExpectationConstraint> = io::decode(constraints)?;
            report(critical::max_entropy_distribution(*size, &cs, *tol)?)
        }
        CriticalCmd::MinInfo { q0, constraints, tol } => {
            let cs: Vec<ExpectationConstraint> = io::decode(constraints)?;
            report(critical::min_info_distribution(&io::weights(q0, "q0")?, &cs, *tol)?)
        }
        CriticalCmd::Constrained { q0, states, targets, tol } => {
            let targets: Vec<f64> =
                io::reals(targets, "targets")?.iter().map(|t| t / ctx.scale(1.0)).collect();
            report(critical::constrained_info_distribution(
                &io::weights(q0, "q0")?,
                &io::weights_list(states, "states")?,
                &targets,
                *tol,
            )?)
        }
        CriticalCmd::Anneal { prior, likelihood, lambda } => {
            let r = critical::anneal(&io::categorical(prior, "prior")?, &io::weights(likelihood, "likelihood")?, *lambda)?;
            io::pretty(&json!({ "lambda": lambda, "probs": probs_json(&r) }))
        }
        CriticalCmd::AnnealSolve { prior, likelihood, target, tol } => {
            let prior = io::categorical(prior, "prior")?;
            let like = io::weights(likelihood, "likelihood")?;
            let per_nat = ctx.scale(1.0);
            let (lambda, r) = critical::solve_annealing_lambda(&prior, &like, target / per_nat, tol / per_nat)?;
            let post = critical::anneal(&prior, &like, 1.0)?.to_weights();
            let achieved = measures::info(&r, &post, &prior.to_weights())?;
            io::pretty(&json!({
                "lambda": lambda,
                "probs": probs_json(&r),
                "info": io::real(achieved.in_units(ctx.units)),
                "units": ctx.units,
            }))
        }
    }
}

fn simulate(ctx: &Ctx, args: &SimulateArgs) -> CliResult<String> {
    let raw = io::load_json(&args.config)?;
    let configured_seed = raw.get("master_seed").and_then(Value::as_u64);
    let mut config: ExperimentConfig = serde_json::from_value(raw)?;
    if let Some(n) = args.num_experiments {
        config.num_experiments = n;
    }
    config.master_seed = ctx.seed_or_generate(configured_seed);

    let records_path = if args.records {
        Some(ctx.sink.artifact("records.csv")?.ok_or_else(|| CliError::Input("--records requires --out".into()))?)
    } else {
        None
    };
    let summary = match &records_path {
        Some(path) => {
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            let mut writer = RecordCsvWriter::new(file, &config, ctx.units)?;
            let s = experiments::run_ensemble_with(&config, |r| writer.write(r))?;
            writer.finish()?;
            s
        }
        None => experiments::run_ensemble(&config)?,
    }
    .in_units(ctx.units);

    let summary_json = io::pretty(&json!({ "config": config, "summary": summary }))?;
    let mut histogram = Vec::new();
    experiments::write_histogram_csv(&summary, &mut histogram)?;
    if let Some(path) = ctx.sink.artifact("summary.json")? {
        ctx.sink.write(&path, summary_json.as_bytes())?;
    }
    if let Some(path) = ctx.sink.artifact("histogram.csv")? {
        ctx.sink.write(&path, &histogram)?;
    }
    Ok(match ctx.format {
        Format::Json => summary_json,
        Format::Csv => String::from_utf8(histogram).expect("CSV output is UTF-8"),
    })
}

fn labels(ctx: &Ctx, cmd: &LabelsCmd) -> CliResult<String> {
    match cmd {
        LabelsCmd::Analyze { input } => {
            let file = std::fs::File::open(input)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", input.display())))?;
            let records = labelinfo::read_records_csv(file)?;
            let report = labelinfo::analyze(&records)?.in_units(ctx.units);
            let report_json = io::pretty(&report)?;
            let mut rows = Vec::new();
            labelinfo::write_report_csv(&report, &mut rows)?;
            if let Some(path) = ctx.sink.artifact("label_report.json")? {
                ctx.sink.write(&path, report_json.as_bytes())?;
            }
            if let Some(path) = ctx.sink.artifact("label_records.csv")? {
                ctx.sink.write(&path, &rows)?;
            }
            Ok(match ctx.format {
                Format::Json => report_json,
                Format::Csv => String::from_utf8(rows).expect("CSV output is UTF-8"),
            })
        }
        LabelsCmd::Synth { num, classes, confidence, mislabel_fraction } => {
            let seed = ctx.seed_or_generate(None);
            let records = labelinfo::generate_synthetic(*num, *classes, *confidence, *mislabel_fraction, seed)?;
            let mut csv = Vec::new();
            labelinfo::write_records_csv(&records, &mut csv)?;
            if let Some(path) = ctx.sink.artifact("synthetic.csv")? {
                ctx.sink.write(&path, &csv)?;
            }
            Ok(String::from_utf8(csv).expect("CSV output is UTF-8"))
        }
    }
}

fn reference(arg: &str) -> CliResult<Reference> {
    if arg.trim() == "flat" {
        return Ok(Reference::Flat);
    }
    let value = io::load_json(arg)?;
    if value.get("mean").is_some() {
        return Ok(Reference::Gaussian(serde_json::from_value::<Gaussian>(value)?));
    }
    Ok(Reference::Weights(io::weights(arg, "q0")?))
}

fn fisher_cmd(ctx: &Ctx, args: &FisherArgs) -> CliResult<String> {
    let family = io::decode::<FamilySpec>(&args.family)?.build()?;
    let view: Belief = io::decode(&args.view)?;
    let theta = io::reals(&args.theta, "theta")?;
    let q0 = reference(&args.q0)?;
    let (score, matrix) = match args.method {
        FisherMethod::Auto => (
            fisher::fisher_score(&view, family.as_ref(), &q0, &theta)?,
            fisher::fisher_matrix(&view, family.as_ref(), &q0, &theta)?,
        ),
        FisherMethod::FiniteDifference => (
            fisher::finite_difference_score(&view, family.as_ref(), &q0, &theta)?,
            fisher::finite_difference_matrix(&view, family.as_ref(), &q0, &theta)?,
        ),
    };
    let k = ctx.scale(1.0);
    let score: Vec<f64> = score.iter().map(|s| s * k).collect();
    let matrix: Vec<Vec<f64>> = matrix.row_iter().map(|r| r.iter().map(|v| v * k + 0.0).collect()).collect();
    io::pretty(&json!({ "score": score, "matrix": matrix, "units": ctx.units }))
}

fn run(cli: Cli) -> CliResult<String> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot configure {jobs} workers: {e}")))?;
    }
    let ctx = Ctx { units: cli.units, seed: cli.seed, format: cli.format, sink: Sink { out_dir: cli.out } };
    match &cli.command {
        Command::Measure(cmd) => measure(&ctx, cmd),
        Command::Critical(cmd) => critical_cmd(&ctx, cmd),
        Command::Simulate(args) => simulate(&ctx, args),
        Command::Labels(cmd) => labels(&ctx, cmd),
        Command::Fisher(args) => fisher_cmd(&ctx, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::Input(e.to_string().trim_end().to_string());
            println!("{}", err.envelope());
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let (_, status) = err.classify();
            println!("{}", err.envelope());
            eprintln!("error: {err}");
            ExitCode::from(status as u8)
        }
    }
}
