use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prodnormal::exact::{ProductParams, TruncationPolicy};
use prodnormal::method::{Evaluation, MethodRegistry, Quantity};
use prodnormal::montecarlo::{
    empirical_quantile, empirical_tail_prob, empirical_tvar, empirical_tvar_standard_error,
    simulate, SimulationConfig,
};
use prodnormal::tables::{
    compute_table, format_cell, table_row, Reference, TableKind, TableRow, GRID_ROWS,
};
use prodnormal::Error;

mod output;

use output::{float, write_records, Format, Record};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID_PARAMETERS: u8 = 2;
const EXIT_STRICT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "prodnormal", version, about = "Distribution of the product of two correlated normals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a quantity at one or more points or levels.
    Eval(EvalArgs),
    /// Relative errors of the tail approximations on the standard grid.
    Tables(TablesArgs),
    /// Run a simulation and report empirical tail estimators.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu_x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu_y: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma_x: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma_y: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho: f64,
}

impl ParamArgs {
    fn build(&self) -> Result<ProductParams, Error> {
        ProductParams::new(self.mu_x, self.mu_y, self.sigma_x, self.sigma_y, self.rho)
    }
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Number of samples.
    #[arg(long = "n", default_value_t = 10_000_000)]
    n_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Work units; output depends only on (seed, chunks).
    #[arg(long, default_value_t = 8)]
    chunks: usize,
}

impl SimArgs {
    fn config(&self) -> SimulationConfig {
        let mut c = SimulationConfig::new(self.n_samples, self.seed);
        c.n_chunks = self.chunks;
        c
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_parser = parse_quantity)]
    quantity: Quantity,
    /// exact, asymptotic or mc.
    #[arg(long, default_value = "exact")]
    method: String,
    /// Points, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "p")]
    x: Vec<f64>,
    /// Probability levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Outer terms of the density series.
    #[arg(long)]
    n_max: Option<usize>,
    /// Relative tolerance of the density series.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Exit with status 3 if any asymptotic result is outside its regime.
    #[arg(long)]
    strict: bool,
    #[command(flatten)]
    sim: SimArgs,
    /// Write to a file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scale {
    /// Quadrature references for every row.
    Desk,
    /// Monte Carlo references for selected rows.
    FullRowSubset,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Text,
}

#[derive(Args)]
struct TablesArgs {
    /// 1: density, 2: tail probability, 3: quantile, 4: TVaR.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4))]
    table: u32,
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    /// Zero-based grid rows for the Monte Carlo scale (default: all).
    #[arg(long, value_delimiter = ',')]
    rows: Vec<usize>,
    #[arg(long = "n", default_value_t = 100_000_000)]
    n_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    chunks: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Levels at which the quantile and TVaR are reported.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Points at which the tail probability is counted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the sample moments and block sizes as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure carrying the process exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::Domain(_) | Error::UnknownMethod(_) => {
                EXIT_INVALID_PARAMETERS
            }
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        io::Error::from(e).into()
    }
}

fn open_output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_eval(args: EvalArgs) -> Result<(), Failure> {
    let params = args.params.build()?;
    let mut policy = TruncationPolicy::default();
    if let Some(n) = args.n_max {
        policy.n_max = n;
    }
    if let Some(t) = args.tol {
        policy.rel_tol = t;
    }
    policy.validate()?;
    let inputs = if args.quantity.takes_probability() {
        if !args.x.is_empty() {
            return Err(Error::InvalidParameter(format!("{} takes --p, not --x", args.quantity)).into());
        }
        &args.p
    } else {
        if !args.p.is_empty() {
            return Err(Error::InvalidParameter(format!("{} takes --x, not --p", args.quantity)).into());
        }
        &args.x
    };
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("no evaluation points given".into()).into());
    }
    let registry = MethodRegistry::with_defaults(policy, args.sim.config());
    let method = registry.get(&args.method)?;
    let evals = method.evaluate(&params, args.quantity, inputs)?;
    let records: Vec<Record<'_>> = evals
        .iter()
        .map(|eval| Record {
            method: method.name(),
            quantity: args.quantity,
            params,
            eval,
        })
        .collect();
    write_records(open_output(&args.output)?, args.format, &records)?;
    if args.strict && evals.iter().any(|e| !e.validity.valid) {
        let reasons: Vec<&str> = evals
            .iter()
            .filter(|e| !e.validity.valid)
            .map(|e| e.validity.reason.as_str())
            .collect();
        return Err(Failure {
            code: EXIT_STRICT_INVALID,
            message: format!("approximation not valid: {}", reasons.join("; ")),
        });
    }
    Ok(())
}

fn run_tables(args: TablesArgs) -> Result<(), Failure> {
    let kind = TableKind::from_number(args.table)?;
    let rows: Vec<TableRow> = match args.scale {
        Scale::Desk => {
            if !args.rows.is_empty() {
                return Err(Error::InvalidParameter("--rows applies to the full-row-subset scale".into()).into());
            }
            compute_table(kind, &Reference::Quadrature)?
        }
        Scale::FullRowSubset => {
            let mut config = SimulationConfig::new(args.n_samples, args.seed);
            config.n_chunks = args.chunks;
            let reference = Reference::MonteCarlo(config);
            let picks: Vec<usize> = if args.rows.is_empty() {
                (0..GRID_ROWS.len()).collect()
            } else {
                args.rows.clone()
            };
            picks
                .iter()
                .map(|&i| {
                    let row = *GRID_ROWS.get(i).ok_or_else(|| {
                        Error::InvalidParameter(format!("row {i} outside 0..{}", GRID_ROWS.len()))
                    })?;
                    table_row(kind, row, &reference)
                })
                .collect::<Result<_, Error>>()?
        }
    };
    let mut out = open_output(&args.output)?;
    let header: Vec<String> = ["mu_x", "mu_y", "rho"]
        .iter()
        .map(|s| s.to_string())
        .chain(kind.columns())
        .collect();
    let lines: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            [r.mu_x, r.mu_y, r.rho]
                .iter()
                .map(|v| v.to_string())
                .chain(r.cells.iter().map(|c| format_cell(*c)))
                .collect()
        })
        .collect();
    match args.format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&header).map_err(io::Error::from)?;
            for l in &lines {
                w.write_record(l).map_err(io::Error::from)?;
            }
            w.flush()?;
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|j| lines.iter().map(|l| l[j].len()).chain([header[j].len()]).max().unwrap_or(0))
                .collect();
            for l in std::iter::once(&header).chain(&lines) {
                let cells: Vec<String> =
                    l.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                writeln!(out, "{}", cells.join("  "))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let params = args.params.build()?;
    let mut config = args.sim.config();
    for &p in &args.levels {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("level must lie in (0, 1), got {p}")).into());
        }
        if p >= 0.5 {
            config.upper_levels.push(p);
        } else {
            config.lower_levels.push(p);
        }
    }
    config.thresholds = args.thresholds.clone();
    let summary = simulate(&params, &config)?;
    let n = summary.n as f64;
    let mut evals: Vec<(Quantity, Evaluation)> = Vec::new();
    let with_error = |input: f64, value: f64, se: Option<f64>| {
        let mut e = Evaluation {
            input,
            value,
            validity: Default::default(),
            diagnostics: Default::default(),
        };
        e.validity.valid = true;
        e.diagnostics.n_used = Some(summary.n as usize);
        e.diagnostics.standard_error = se;
        e
    };
    for &p in &args.levels {
        let q = empirical_quantile(&summary, p)?;
        evals.push((Quantity::Quantile, with_error(p, q, None)));
        let t = empirical_tvar(&summary, p)?;
        let se = empirical_tvar_standard_error(&summary, p)?;
        evals.push((Quantity::Tvar, with_error(p, t, Some(se))));
    }
    for &x in &args.thresholds {
        let s = empirical_tail_prob(&summary, x)?;
        evals.push((Quantity::Survival, with_error(x, s, Some((s * (1.0 - s) / n).sqrt()))));
    }
    let records: Vec<Record<'_>> = evals
        .iter()
        .map(|(quantity, eval)| Record {
            method: "mc",
            quantity: *quantity,
            params,
            eval,
        })
        .collect();
    write_records(open_output(&args.output)?, args.format, &records)?;
    if let Some(path) = &args.summary {
        let text = format!(
            "{{\"n\":{},\"seed\":{},\"chunks\":{},\"mean\":{},\"variance\":{},\"mean_standard_error\":{},\"top_block\":{},\"bottom_block\":{}}}\n",
            summary.n,
            config.seed,
            config.n_chunks,
            float(summary.mean),
            float(summary.variance()),
            float(summary.mean_standard_error()),
            summary.sorted_top_block.len(),
            summary.sorted_bottom_block.len(),
        );
        // validate before writing so a malformed float can never reach disk
        serde_json::from_str::<serde_json::Value>(&text)?;
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("PRODNORMAL_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Failure {
            code: EXIT_INVALID_PARAMETERS,
            message: format!("PRODNORMAL_THREADS must be a positive integer, got `{v}`"),
        })?;
        if n == 0 {
            return Err(Failure {
                code: EXIT_INVALID_PARAMETERS,
                message: "PRODNORMAL_THREADS must be positive".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                code: EXIT_FAILURE,
                message: e.to_string(),
            })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Tables(a) => run_tables(a),
        Command::Simulate(a) => run_simulate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("prodnormal: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
