//! The `ltm` command line: partitions, segment traces, Monte Carlo verifiers,
//! Lyapunov estimates and figures, with JSON reports.
//!
//! Exit status is 0 when every check of the invoked command passes, 1 when a
//! check fails (the JSON report is still written) and 2 when the arguments
//! violate a precondition.

pub mod suites;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ltm_core::certifier::report::SuiteReport;
use ltm_core::certifier::thresholds::{solve_threshold, ThresholdId};
use ltm_core::certifier::trace::TraceResult;
use ltm_core::diagnostics::figures::{render_figure, FigureId, FigureSpec};
use ltm_core::diagnostics::lyapunov::LyapunovEstimate;
use ltm_core::geometry::{cone_contains, ConeId, EPS_GEO};
use ltm_core::{build_partition, LtmError, MapId, Params, Polygon, Segment, Tracer, Vec2, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "LTM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ltm", version, about = "Linked twist map partitions, verifiers and figures")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory receiving JSON reports and CSV exports.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct AlphaArg {
    #[arg(long, default_value_t = 2.5, allow_negative_numbers = true)]
    alpha: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every parameter threshold and print it with its residual.
    Thresholds,
    /// Build both return-time partitions, validate them and export CSV.
    Partition {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, default_value_t = 15)]
        k_max: u32,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
    },
    /// Trace one segment of S and print the derivation.
    Trace {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, allow_negative_numbers = true)]
        y0: f64,
        #[arg(long, allow_negative_numbers = true)]
        x1: f64,
        #[arg(long, allow_negative_numbers = true)]
        y1: f64,
        #[arg(long, default_value_t = 200)]
        budget: u32,
        #[arg(long, default_value_t = 15)]
        k_max: u32,
    },
    /// Run a Monte Carlo verifier.
    Verify {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 200)]
        budget: u32,
        #[arg(long, default_value_t = 15)]
        k_max: u32,
    },
    /// Render a figure as SVG.
    Figure {
        #[arg(long, value_parser = parse_figure)]
        id: FigureId,
        /// Defaults to the parameter the figure illustrates.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Lyapunov exponent of H from random restarts.
    Lyapunov {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, default_value_t = 100_000)]
        iters: u64,
        #[arg(long, default_value_t = suites::LYAPUNOV_RESTARTS)]
        restarts: u32,
    },
    /// Run every check at one parameter and write a single JSON report.
    Report {
        #[command(flatten)]
        alpha: AlphaArg,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 200)]
        budget: u32,
        #[arg(long, default_value_t = 15)]
        k_max: u32,
        #[arg(long, default_value_t = 100_000)]
        iters: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Lemma {
    #[value(name = "1")]
    One,
    #[value(name = "3")]
    Three,
    Growth,
    Pipeline,
}

fn parse_figure(s: &str) -> std::result::Result<FigureId, String> {
    FigureId::from_name(s).ok_or_else(|| format!("unknown figure {s:?}, expected fig2, fig3a, fig3b or fig4"))
}

/// Everything a run depends on, validated before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub seed: u64,
    pub k_max: u32,
    pub budget: u32,
    pub samples: u64,
    /// Not part of the report, so runs that differ only here compare equal.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 2.5,
            seed: 42,
            k_max: 15,
            budget: 200,
            samples: 1000,
            output_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<Params, Failure> {
        let params = Params::new(self.alpha).map_err(Failure::from)?;
        params.require_strict("the certifier").map_err(Failure::from)?;
        if self.k_max < 5 {
            return Err(Failure::from(LtmError::PartitionTooSmall { k_max: self.k_max }));
        }
        if self.budget == 0 {
            return Err(Failure::precondition("budget must be at least 1"));
        }
        if self.samples == 0 {
            return Err(Failure::precondition("samples must be positive"));
        }
        Ok(params)
    }
}

/// Why a run stopped early.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn precondition(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_PRECONDITION,
            message: msg.into(),
        }
    }
}

impl From<LtmError> for Failure {
    fn from(e: LtmError) -> Self {
        let code = match e {
            LtmError::InvalidAlpha { .. }
            | LtmError::ExtendedDomain { .. }
            | LtmError::OutsideDomain { .. }
            | LtmError::InvalidIndex { .. }
            | LtmError::DegenerateSegment { .. }
            | LtmError::PartitionTooSmall { .. }
            | LtmError::InvalidArgument(_)
            | LtmError::Io(_) => EXIT_PRECONDITION,
            _ => EXIT_ASSERTION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Result of one subcommand before it is written out.
struct Output {
    /// File name of the JSON report inside the output directory.
    name: String,
    json: String,
    text: String,
    passed: bool,
    /// Extra files for the output directory.
    files: Vec<(String, Vec<u8>)>,
}

fn json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::from(LtmError::from(e)))
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(f) => return report_failure(&f),
    };
    let result = match &pool {
        Some(p) => p.install(|| dispatch(&cli)),
        None => dispatch(&cli),
    };
    match result.and_then(|out| write_output(&cli, out)) {
        Ok(passed) => {
            if passed {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            }
        }
        Err(f) => report_failure(&f),
    }
}

fn report_failure(f: &Failure) -> i32 {
    eprintln!("ltm: {}", f.message.lines().next().unwrap_or(""));
    f.code
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::precondition(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Failure::precondition(e.to_string()))
}

fn write_output(cli: &Cli, out: Output) -> Result<bool, Failure> {
    let dir = &cli.output_dir;
    if !out.name.is_empty() {
        fs::create_dir_all(dir).map_err(|e| Failure::from(LtmError::from(e)))?;
        write(&dir.join(&out.name), out.json.as_bytes())?;
    }
    for (name, bytes) in &out.files {
        write(&dir.join(name), bytes)?;
    }
    if cli.json {
        println!("{}", out.json);
    } else {
        print!("{}", out.text);
    }
    Ok(out.passed)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure {
        code: EXIT_PRECONDITION,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn dispatch(cli: &Cli) -> Result<Output, Failure> {
    let base = RunConfig {
        seed: cli.seed,
        output_dir: cli.output_dir.clone(),
        ..RunConfig::default()
    };
    match &cli.command {
        Command::Thresholds => cmd_thresholds(&base),
        Command::Partition { alpha, k_max, samples } => cmd_partition(&RunConfig {
            alpha: alpha.alpha,
            k_max: *k_max,
            samples: *samples,
            ..base
        }),
        Command::Trace {
            alpha,
            x0,
            y0,
            x1,
            y1,
            budget,
            k_max,
        } => cmd_trace(
            &RunConfig {
                alpha: alpha.alpha,
                budget: *budget,
                k_max: *k_max,
                ..base
            },
            Vec2::new(*x0, *y0),
            Vec2::new(*x1, *y1),
        ),
        Command::Verify {
            lemma,
            alpha,
            samples,
            budget,
            k_max,
        } => cmd_verify(
            &RunConfig {
                alpha: alpha.alpha,
                samples: *samples,
                budget: *budget,
                k_max: *k_max,
                ..base
            },
            *lemma,
        ),
        Command::Figure { id, alpha, out } => cmd_figure(*id, alpha.unwrap_or(id.default_alpha()), out),
        Command::Lyapunov { alpha, iters, restarts } => cmd_lyapunov(
            &RunConfig {
                alpha: alpha.alpha,
                ..base
            },
            *iters,
            *restarts,
        ),
        Command::Report {
            alpha,
            samples,
            budget,
            k_max,
            iters,
        } => cmd_report(
            &RunConfig {
                alpha: alpha.alpha,
                samples: *samples,
                budget: *budget,
                k_max: *k_max,
                ..base
            },
            *iters,
        ),
    }
}

fn status(rep: &VerifyReport) -> String {
    let verdict = if rep.all_passed() { "PASS" } else { "FAIL" };
    let mut s = format!("{verdict} {}: {}/{} passed", rep.id, rep.passes, rep.samples);
    if let Some(f) = rep.failures.first() {
        let _ = write!(s, "; first failure: {}", f.description);
    }
    s.push('\n');
    s
}

fn cmd_thresholds(cfg: &RunConfig) -> Result<Output, Failure> {
    let (sols, rep) = suites::thresholds(cfg.alpha, cfg.seed)?;
    let mut text = String::new();
    for s in &sols {
        let (stated, _) = s.id.stated();
        let _ = writeln!(
            text,
            "{:<7} {:.10}  residual {:.2e}  stated {stated}  ({})",
            s.id.name(),
            s.value,
            s.residual,
            s.id.description()
        );
    }
    text.push_str(&status(&rep));
    Ok(Output {
        name: "thresholds.json".into(),
        json: json(&rep)?,
        text,
        passed: rep.all_passed(),
        files: Vec::new(),
    })
}

#[derive(Serialize)]
struct PartitionOutput {
    config: RunConfig,
    partitions: Vec<suites::PartitionSummary>,
    report: VerifyReport,
}

fn cmd_partition(cfg: &RunConfig) -> Result<Output, Failure> {
    let params = cfg.validate()?;
    let mut partitions = Vec::new();
    let mut report = VerifyReport::new("partition", cfg.alpha, cfg.seed);
    let mut files = Vec::new();
    let mut text = String::new();
    for map in [MapId::F, MapId::G] {
        let part = build_partition(map, cfg.k_max, &params)?;
        let (summary, rep) = suites::partition_check(&part, cfg.samples, cfg.seed, &params);
        let mut csv = Vec::new();
        let header = format!(
            "ltm partition side={:?} alpha={} k_max={} seed={} version={}",
            part.side,
            cfg.alpha,
            cfg.k_max,
            cfg.seed,
            env!("CARGO_PKG_VERSION")
        );
        part.write_csv(&mut csv, &header)?;
        files.push((
            format!("partition_{}.csv", format!("{:?}", part.side).to_lowercase()),
            csv,
        ));
        let _ = writeln!(
            text,
            "{:?}: {} cells, tail area {:.3e}, agreement {:.6} over {} samples ({} boundary, {} tail flagged)",
            part.side,
            summary.cells,
            summary.tail_area,
            summary.validation.agreement(),
            summary.validation.samples,
            summary.validation.boundary_flagged,
            summary.validation.tail_flagged
        );
        partitions.push(summary);
        report = report.merge(rep);
    }
    text.push_str(&status(&report));
    let passed = report.all_passed();
    let out = PartitionOutput {
        config: cfg.clone(),
        partitions,
        report,
    };
    Ok(Output {
        name: "partition.json".into(),
        json: json(&out)?,
        text,
        passed,
        files,
    })
}

#[derive(Serialize)]
struct TraceOutput {
    config: RunConfig,
    segment: Segment,
    result: TraceResult,
}

fn cmd_trace(cfg: &RunConfig, p0: Vec2, p1: Vec2) -> Result<Output, Failure> {
    let params = cfg.validate()?;
    let seg = Segment::new(p0, p1)?;
    let square = Polygon::square_s(&params);
    for p in [p0, p1] {
        if !square.contains(p, EPS_GEO) {
            return Err(LtmError::OutsideDomain {
                x: p.x,
                y: p.y,
                region: "S",
            }
            .into());
        }
    }
    if !cone_contains(ConeId::C, seg.direction(), &params)? {
        return Err(Failure::precondition("segment direction is not in the unstable cone"));
    }
    let tracer = Tracer::new(&params, cfg.k_max)?;
    let result = tracer.trace_segment(&seg, cfg.budget)?;

    let mut text = String::new();
    for (i, s) in result.steps.iter().enumerate() {
        let crossed: Vec<String> = s.crossed.iter().map(|l| l.to_string()).collect();
        let _ = write!(
            text,
            "step {:>3} {:?}_S  crossed [{}]  return {}",
            i + 1,
            s.side,
            crossed.join(", "),
            s.power
        );
        if let Some(g) = s.growth_sum {
            let _ = write!(text, "  growth sum {g:.6}");
        }
        if s.tail_pieces > 0 {
            let _ = write!(text, "  tail pieces {}", s.tail_pieces);
        }
        let _ = writeln!(
            text,
            "  image ({:.9}, {:.9}) -> ({:.9}, {:.9})",
            s.image.p0.x, s.image.p0.y, s.image.p1.x, s.image.p1.y
        );
    }
    let _ = write!(text, "outcome {:?}", result.outcome);
    if let Some(d) = result.delta {
        let _ = write!(text, ", delta {d:.6}");
    }
    if let Some(k) = result.k_bridge {
        let star = if result.bridge_starred { "*" } else { "" };
        let _ = write!(text, ", bridges L{}{star} and L{k}{star}", k - 1);
    }
    if let Some(t) = result.trigger {
        let _ = write!(text, ", trigger {t:?}");
    }
    if let Some(w) = &result.witness {
        let _ = write!(
            text,
            ", v-segment after {} iterates (residual {:.1e})",
            w.iterates, w.residual
        );
    }
    if let Some(n) = &result.note {
        let _ = write!(text, ", {n}");
    }
    text.push('\n');
    let passed = result.is_classified();
    let out = TraceOutput {
        config: cfg.clone(),
        segment: seg,
        result,
    };
    Ok(Output {
        name: "trace.json".into(),
        json: json(&out)?,
        text,
        passed,
        files: Vec::new(),
    })
}

fn cmd_verify(cfg: &RunConfig, lemma: Lemma) -> Result<Output, Failure> {
    let params = cfg.validate()?;
    if lemma == Lemma::One {
        let a1 = solve_threshold(ThresholdId::Alpha1)?.value;
        if cfg.alpha < a1 {
            return Err(Failure::precondition(format!(
                "lemma 1 needs alpha >= alpha1 = {a1:.10}"
            )));
        }
    }
    let tracer = Tracer::new(&params, cfg.k_max)?;
    let (name, json_text, rep) = match lemma {
        Lemma::One => {
            let rep = suites::lemma1(&tracer, cfg.samples, cfg.seed)?;
            ("verify_lemma1.json", json(&rep)?, rep)
        }
        Lemma::Three => {
            let rep = suites::lemma3(&tracer, cfg.samples, cfg.seed, cfg.budget)?;
            ("verify_lemma3.json", json(&rep)?, rep)
        }
        Lemma::Growth => {
            let rep = suites::growth(&tracer, cfg.samples, cfg.seed, cfg.budget);
            ("verify_growth.json", json(&rep)?, rep)
        }
        Lemma::Pipeline => {
            let r = suites::pipeline(&tracer, cfg.seed)?;
            ("verify_pipeline.json", json(&r)?, r.report)
        }
    };
    let mut text = String::new();
    for (k, v) in &rep.metrics {
        let _ = writeln!(text, "{k} = {v}");
    }
    text.push_str(&status(&rep));
    Ok(Output {
        name: name.into(),
        json: json_text,
        text,
        passed: rep.all_passed(),
        files: Vec::new(),
    })
}

fn cmd_figure(id: FigureId, alpha: f64, out: &Path) -> Result<Output, Failure> {
    let spec = FigureSpec {
        id,
        alpha,
        out: out.to_path_buf(),
    };
    render_figure(&spec)?;
    Ok(Output {
        name: String::new(),
        json: json(&spec)?,
        text: format!("wrote {} ({id} at alpha = {alpha})\n", out.display()),
        passed: true,
        files: Vec::new(),
    })
}

#[derive(Serialize)]
struct LyapunovOutput {
    config: RunConfig,
    estimate: LyapunovEstimate,
    report: VerifyReport,
}

fn cmd_lyapunov(cfg: &RunConfig, iters: u64, restarts: u32) -> Result<Output, Failure> {
    let params = cfg.validate()?;
    if iters < 1000 {
        return Err(Failure::precondition("iters must be at least 1000"));
    }
    let (estimate, report) = suites::lyapunov(&params, iters, restarts, cfg.seed)?;
    let mut text = format!(
        "lambda = {:.6} +- {:.6} (spread {:.6} over {} restarts of {iters})\n",
        estimate.lambda,
        estimate.ci_halfwidth,
        estimate.spread,
        estimate.samples.len()
    );
    text.push_str(&status(&report));
    let passed = report.all_passed();
    let out = LyapunovOutput {
        config: cfg.clone(),
        estimate,
        report,
    };
    Ok(Output {
        name: "lyapunov.json".into(),
        json: json(&out)?,
        text,
        passed,
        files: Vec::new(),
    })
}

fn cmd_report(cfg: &RunConfig, iters: u64) -> Result<Output, Failure> {
    let params = cfg.validate()?;
    let tracer = Tracer::new(&params, cfg.k_max)?;
    let mut reports = Vec::new();
    reports.push(suites::thresholds(cfg.alpha, cfg.seed)?.1);
    for part in [&tracer.part_f, &tracer.part_g] {
        reports.push(suites::partition_check(part, cfg.samples, cfg.seed, &params).1);
    }
    reports.push(suites::periodic_check(&tracer, cfg.seed)?.1);
    if cfg.alpha >= solve_threshold(ThresholdId::Alpha1)?.value {
        reports.push(suites::lemma1(&tracer, cfg.samples, cfg.seed)?);
    }
    reports.push(suites::lemma3(&tracer, cfg.samples, cfg.seed, cfg.budget)?);
    reports.push(suites::growth(&tracer, cfg.samples, cfg.seed, cfg.budget));
    reports.push(suites::pipeline(&tracer, cfg.seed)?.report);
    reports.push(suites::lyapunov(&params, iters, suites::LYAPUNOV_RESTARTS, cfg.seed)?.1);
    let suite = SuiteReport::new(cfg.alpha, cfg.seed, reports);
    let text: String = suite.reports.iter().map(status).collect();
    Ok(Output {
        name: "report.json".into(),
        json: suite.to_json()?,
        text,
        passed: suite.passed,
        files: Vec::new(),
    })
}
