use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use delta_core::benefit::BenefitConfig;
use delta_core::model::{ObjectCatalog, Trace};
use delta_core::simharness::{compare, run, CacheSize, ComparisonReport, PolicySpec, RunConfig, RunReport};
use delta_core::workload::{
    generate, load_trace, repartition, scale_updates, validate, write_catalog, write_trace, GeneratorParams,
};
use delta_core::yardsticks::UpdateShipping;

#[derive(Parser)]
#[command(name = "delta", version, about = "Trace-driven simulator for update-aware middleware caches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog and trace
    Gen(GenArgs),
    /// Replay a trace through one policy
    Run(RunArgs),
    /// Replay a trace through several policies
    Compare(CompareArgs),
    /// Emit plot-ready sweep data
    Report(ReportArgs),
    /// Check a trace and its catalog
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory
    #[arg(long, env = "DELTA_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    /// JSON file with generator parameters; flags below override it
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    objects: Option<u64>,
    #[arg(long)]
    queries: Option<u64>,
    #[arg(long)]
    updates: Option<u64>,
    #[arg(long)]
    selectivity: Option<f64>,
    #[arg(long)]
    update_fraction: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TraceArgs {
    /// trace.jsonl, optionally gzip-compressed
    #[arg(long)]
    trace: PathBuf,
    /// Catalog file; defaults to the one named in the trace header
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    seed: u64,
    /// Cache size as a fraction of the catalog
    #[arg(long, default_value_t = 0.3, conflicts_with = "cache_bytes")]
    cache_frac: f64,
    /// Cache size in bytes
    #[arg(long)]
    cache_bytes: Option<u64>,
    /// Events excluded from the post-warm-up totals
    #[arg(long, default_value_t = 0)]
    warmup: u64,
    /// Sample the ledger every this many events
    #[arg(long, default_value_t = 100)]
    stride: u64,
    /// Smoothing factor for benefit
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Window length in events for benefit
    #[arg(long, default_value_t = 1000)]
    delta: u64,
    /// When soptimal ships updates
    #[arg(long, value_enum, default_value_t = Shipping::Eager)]
    shipping: Shipping,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shipping {
    Eager,
    Lazy,
}

impl SimArgs {
    fn spec(&self, name: &str) -> Result<PolicySpec> {
        Ok(match PolicySpec::from_name(name) {
            Some(PolicySpec::Benefit(_)) => PolicySpec::Benefit(BenefitConfig {
                alpha: self.alpha,
                delta: self.delta,
            }),
            Some(PolicySpec::SOptimal { .. }) => PolicySpec::SOptimal {
                shipping: match self.shipping {
                    Shipping::Eager => UpdateShipping::Eager,
                    Shipping::Lazy => UpdateShipping::Lazy,
                },
            },
            Some(spec) => spec,
            None => bail!("unknown policy {name:?} (expected vcover, benefit, nocache, replica or soptimal)"),
        })
    }

    fn config(&self, name: &str) -> Result<RunConfig> {
        let capacity = match self.cache_bytes {
            Some(b) => CacheSize::Bytes(b),
            None => CacheSize::Fraction(self.cache_frac),
        };
        let config = RunConfig {
            policy: self.spec(name)?,
            capacity,
            seed: self.seed,
            warmup_events: self.warmup,
            sample_stride: self.stride,
        };
        config.validate()?;
        Ok(config)
    }

    fn configs(&self, policies: &[String]) -> Result<Vec<RunConfig>> {
        policies.iter().map(|p| self.config(p)).collect()
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long)]
    policy: String,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long, value_delimiter = ',', default_value = "vcover,benefit,nocache,replica,soptimal")]
    policies: Vec<String>,
    /// Re-cut the catalog into each of these object counts and compare at each
    #[arg(long, value_delimiter = ',')]
    granularity: Vec<u64>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    /// Cumulative cost per event for each policy
    Cumulative,
    /// Final cost against update multiplicity
    Updates,
    /// Final cost against number of objects
    Granularity,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long, value_enum)]
    sweep: Sweep,
    #[arg(long, value_delimiter = ',', default_value = "vcover,benefit,nocache,replica,soptimal")]
    policies: Vec<String>,
    /// Update multiplicities for the updates sweep
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    update_scale: Vec<u64>,
    /// Object counts for the granularity sweep
    #[arg(long, value_delimiter = ',', default_value = "10,68,91,532")]
    granularity: Vec<u64>,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: TraceArgs,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut params: GeneratorParams = match &args.params {
        Some(p) => serde_json::from_reader(File::open(p).with_context(|| format!("opening {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => GeneratorParams::default(),
    };
    if let Some(v) = args.objects {
        params.n_objects = v;
        params.query_hotspots.retain(|h| *h < v);
        params.update_hotspots.retain(|h| *h < v);
    }
    if let Some(v) = args.queries {
        params.n_queries = v;
    }
    if let Some(v) = args.updates {
        params.n_updates = v;
    }
    if let Some(v) = args.selectivity {
        params.selectivity = v;
    }
    if let Some(v) = args.update_fraction {
        params.update_fraction = v;
    }
    let workload = generate(&params, args.seed)?;
    let dir = &args.out.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = create(dir, "catalog.json")?;
    write_catalog(&workload.catalog, &mut out)?;
    out.flush()?;
    write_trace(&workload.header, &workload.trace, create(dir, "trace.jsonl")?)?;
    eprintln!(
        "wrote {} objects and {} events to {}",
        workload.catalog.len(),
        workload.trace.len(),
        dir.display()
    );
    Ok(())
}

fn load(input: &TraceArgs) -> Result<(ObjectCatalog, Trace)> {
    let (_, catalog, trace) = load_trace(&input.trace, input.catalog.as_deref())
        .with_context(|| format!("loading {}", input.trace.display()))?;
    Ok((catalog, trace))
}

fn write_report(report: &RunReport, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = create(dir, "summary.json")?;
    report.write_summary_json(&mut out)?;
    out.write_all(b"\n")?;
    out.flush()?;
    match format {
        Format::Csv => report.write_series_csv(create(dir, "series.csv")?)?,
        Format::Json => {
            let mut out = create(dir, "series.json")?;
            serde_json::to_writer_pretty(&mut out, &report.series)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    let mut out = create(dir, "decisions.jsonl")?;
    report.write_decision_log(&mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (catalog, trace) = load(&args.input)?;
    let config = args.sim.config(&args.policy)?;
    let report = run(&trace, &catalog, &config)?;
    write_report(&report, &args.out.out, args.sim.format)?;
    let t = report.summary.totals;
    println!(
        "{}: total {} (queries {}, updates {}, loads {})",
        report.summary.policy, t.total, t.query_ship, t.update_ship, t.load
    );
    Ok(())
}

fn write_comparison(cmp: &ComparisonReport, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    match format {
        Format::Csv => {
            cmp.write_table_csv(create(dir, "comparison.csv")?)?;
            cmp.write_aligned_series_csv(create(dir, "series.csv")?)?;
        }
        Format::Json => {
            let mut out = create(dir, "comparison.json")?;
            serde_json::to_writer_pretty(&mut out, &cmp.rows())?;
            out.write_all(b"\n")?;
            out.flush()?;
            let series: Vec<_> = cmp
                .reports
                .iter()
                .map(|r| serde_json::json!({ "policy": r.summary.policy, "series": r.series }))
                .collect();
            let mut out = create(dir, "series.json")?;
            serde_json::to_writer_pretty(&mut out, &series)?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

fn print_table(cmp: &ComparisonReport) {
    for row in cmp.rows() {
        println!("{:<10} {:>20}", row.policy, row.totals.total);
    }
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let (catalog, trace) = load(&args.input)?;
    let configs = args.sim.configs(&args.policies)?;
    if args.granularity.is_empty() {
        let cmp = compare(&trace, &catalog, &configs)?;
        write_comparison(&cmp, &args.out.out, args.sim.format)?;
        print_table(&cmp);
        return Ok(());
    }
    for &g in &args.granularity {
        let (cat, tr) = repartition(&catalog, &trace, g)?;
        let cmp = compare(&tr, &cat, &configs)?;
        println!("granularity {g}");
        print_table(&cmp);
        write_comparison(&cmp, &args.out.out.join(format!("granularity-{g}")), args.sim.format)?;
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let (catalog, trace) = load(&args.input)?;
    let configs = args.sim.configs(&args.policies)?;
    let dir = &args.out.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (name, xs, label): (&str, &[u64], &str) = match args.sweep {
        Sweep::Cumulative => {
            let cmp = compare(&trace, &catalog, &configs)?;
            let path = dir.join("cumulative.csv");
            cmp.write_aligned_series_csv(File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
            println!("{}", path.display());
            return Ok(());
        }
        Sweep::Updates => ("updates.csv", &args.update_scale, "update_scale"),
        Sweep::Granularity => ("granularity.csv", &args.granularity, "objects"),
    };
    let mut out = create(dir, name)?;
    writeln!(out, "{label},policy,query_ship,update_ship,load,total")?;
    for &x in xs {
        let (cat, tr) = match args.sweep {
            Sweep::Updates => {
                if x == 0 {
                    bail!("update scale must be at least 1");
                }
                (catalog.clone(), scale_updates(&trace, x))
            }
            _ => repartition(&catalog, &trace, x)?,
        };
        for row in compare(&tr, &cat, &configs)?.rows() {
            let t = row.totals;
            writeln!(out, "{x},{},{},{},{},{}", row.policy, t.query_ship, t.update_ship, t.load, t.total)?;
        }
    }
    out.flush()?;
    println!("{}", dir.join(name).display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let report = validate(&args.input.trace, args.input.catalog.as_deref())
        .with_context(|| format!("validating {}", args.input.trace.display()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Report(a) => cmd_report(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
