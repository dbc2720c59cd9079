use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::ThreadPool;

use nucpt::applog::{self, format_full, valid_identifier};
use nucpt::parallel::{self, DenoiseRun};
use nucpt::report::{fit_log, format3, render_csv, render_table};
use nucpt::{atomic, batch, instance_file, svg};
use nucpt_core::ensembles::{make_instance, EnsembleSpec, Measurement};
use nucpt_core::harness::{plan_experiment, PlanSpec, SuccessCurvePoint};
use nucpt_core::minimax::{curve_point, tabulate, CurveQuery, Ensemble};
use nucpt_core::solver::{solve, Constraint, RecoveryProblem, SolverOptions};
use nucpt_core::svt::DenoiseConfig;

#[derive(Parser)]
#[command(name = "nucpt", version, about = "Minimax MSE curves, SVT denoising and nuclear-norm phase transitions")]
struct Cli {
    /// Worker threads for Monte Carlo work [default: one per logical core]
    #[arg(long, global = true, env = "NUCPT_WORKERS")]
    workers: Option<usize>,
    /// Master random seed [default: 0, or the batch file's seed]
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Mat,
    Sym,
}

impl From<ClassArg> for Ensemble {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Mat => Ensemble::Mat,
            ClassArg::Sym => Ensemble::Sym,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasurementArg {
    Gauss,
    Rademacher,
}

impl From<MeasurementArg> for Measurement {
    fn from(m: MeasurementArg) -> Self {
        match m {
            MeasurementArg::Gauss => Measurement::Gaussian,
            MeasurementArg::Rademacher => Measurement::Rademacher,
        }
    }
}

/// `lo:hi:n`, `n` evenly spaced values including both ends.
#[derive(Clone, Copy, Debug)]
struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    fn values(self) -> Vec<f64> {
        match self.n {
            1 => vec![self.lo],
            n => (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err("expected lo:hi:n".into());
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count '{n}'"))?;
    if n == 0 || !(lo <= hi) {
        return Err("need lo <= hi and n >= 1".into());
    }
    Ok(Grid { lo, hi, n })
}

#[derive(Subcommand)]
enum Command {
    /// Minimax MSE M(rho; beta): one value at 3 decimals, or a CSV table over a grid
    MseCurve(MseCurveArgs),
    /// Monte Carlo MSE of singular value soft thresholding at the tuned threshold
    DenoiseMc(DenoiseArgs),
    /// Solve a stored instance by nuclear-norm minimization
    Recover(RecoverArgs),
    /// Write one random problem instance to a binary file
    MakeInstance(MakeInstanceArgs),
    /// Run a phase-transition experiment and write its trial log
    PhaseExperiment(PhaseArgs),
    /// Run every experiment of a batch configuration into one trial log
    PhaseBatch(BatchArgs),
    /// Fit logistic phase transitions to the experiments in a trial log
    FitPt(FitArgs),
    /// Plot minimax MSE curves with fitted transitions overlaid, as SVG
    PlotCurves(PlotArgs),
}

#[derive(Args)]
struct MseCurveArgs {
    #[arg(long, value_enum, default_value = "mat")]
    ensemble: ClassArg,
    /// Aspect ratio M/N in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Single rank fraction
    #[arg(long, conflicts_with = "rho_grid", required_unless_present = "rho_grid")]
    rho: Option<f64>,
    /// Rank fractions lo:hi:n
    #[arg(long, value_parser = parse_grid)]
    rho_grid: Option<Grid>,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long, value_enum, default_value = "mat")]
    ensemble: ClassArg,
    /// Rank fraction; the rank is round(rho * N)
    #[arg(long)]
    rho: f64,
    /// Matrix size N (square)
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Report the MSE on this threshold grid lo:hi:n instead of tuning
    #[arg(long, value_parser = parse_grid)]
    lambda_grid: Option<Grid>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Impose positive semidefiniteness (always on for symmetric instances)
    #[arg(long)]
    psd: bool,
    /// Relative feasibility tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Relative duality-gap tolerance
    #[arg(long, default_value_t = 1e-6)]
    gap_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Success threshold on ||X - X0||_F / ||X0||_F
    #[arg(long, default_value_t = 1e-3)]
    success_tol: f64,
}

#[derive(Args)]
struct MakeInstanceArgs {
    #[arg(long, value_enum, default_value = "mat")]
    class: ClassArg,
    #[arg(long, value_enum, default_value = "gauss")]
    measurement: MeasurementArg,
    /// Rows M [default: N]
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    /// Number of measurements
    #[arg(long)]
    measurements: usize,
    /// Stream index under the seed
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, value_enum, default_value = "mat")]
    class: ClassArg,
    #[arg(long, value_enum, default_value = "gauss")]
    measurement: MeasurementArg,
    /// Rows M [default: N]
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    rank: usize,
    /// Trials per grid point
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Half-width of the delta window around the center
    #[arg(long, default_value_t = 0.05)]
    window: f64,
    /// Grid points across the window
    #[arg(long, default_value_t = 13)]
    points: usize,
    /// Window center [default: M(rho; beta)]
    #[arg(long)]
    center: Option<f64>,
    /// Success threshold on ||X - X0||_F / ||X0||_F
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value = "NUCPT")]
    project: String,
    #[arg(long, default_value = "PT")]
    experiment: String,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Trial log path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    log: PathBuf,
    /// Curve supplying M(rho) and the dimension count
    #[arg(long, value_enum, default_value = "mat")]
    curve: ClassArg,
    /// Aspect ratio [default: min(M, N) / max(M, N) of each experiment]
    #[arg(long)]
    beta: Option<f64>,
    /// Also write the fits as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Extra aspect ratios for general-matrix curves (beta = 1 and the symmetric curve are always drawn)
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// Trial logs whose fitted transitions are overlaid
    #[arg(long)]
    log: Vec<PathBuf>,
    /// Curve used to fit the overlaid logs
    #[arg(long, value_enum, default_value = "mat")]
    curve: ClassArg,
    /// Samples per curve
    #[arg(long, default_value_t = 201)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl From<nucpt_core::Error> for Failure {
    fn from(e: nucpt_core::Error) -> Self {
        use nucpt_core::Error as E;
        match e {
            E::Domain(_) | E::InvalidGeometry(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<batch::ConfigError> for Failure {
    fn from(e: batch::ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

type Outcome = Result<(), Failure>;

fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => atomic::write_bytes(p, text.as_bytes()),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn worker_pool(workers: Option<usize>) -> Result<ThreadPool, Failure> {
    parallel::pool(workers).map_err(|e| Failure::Io(format!("cannot start worker pool: {e}")))
}

fn mse_curve(a: MseCurveArgs) -> Outcome {
    let ensemble = Ensemble::from(a.ensemble);
    if let Some(rho) = a.rho {
        let p = curve_point(&CurveQuery::new(rho, a.beta, ensemble)?)?;
        return Ok(emit(a.out.as_deref(), &format!("{}\n", format3(p.mse)))?);
    }
    let grid = a.rho_grid.expect("clap requires --rho or --rho-grid");
    let mut s = String::from("rho,mse,lambda_star\n");
    for p in tabulate(ensemble, a.beta, &grid.values())? {
        let _ = writeln!(s, "{},{},{}", format_full(p.rho), format_full(p.mse), format_full(p.lambda_star));
    }
    Ok(emit(a.out.as_deref(), &s)?)
}

fn denoise_mc(a: DenoiseArgs, seed: u64, pool: &ThreadPool) -> Outcome {
    let cfg = DenoiseConfig::square(a.ensemble.into(), a.rho, a.n, a.trials, seed)?;
    let run = DenoiseRun::generate(pool, &cfg)?;
    let mut s = String::from("lambda,mse\n");
    match a.lambda_grid {
        Some(g) => {
            for l in g.values() {
                let _ = writeln!(s, "{},{}", format_full(l), format_full(run.mse(pool, l)));
            }
        }
        None => {
            let t = run.tune(pool, cfg.cols);
            let _ = writeln!(s, "{},{}", format_full(t.lambda), format_full(t.mse));
        }
    }
    Ok(emit(a.out.as_deref(), &s)?)
}

fn recover(a: RecoverArgs) -> Outcome {
    let inst = instance_file::read(open(&a.instance)?).map_err(|e| Failure::Io(format!("{}: {e}", a.instance.display())))?;
    let mut problem = RecoveryProblem::from_instance(&inst);
    if a.psd {
        problem.constraint = Constraint::Psd;
    }
    let problem = RecoveryProblem::new(problem.a, problem.y, problem.rows, problem.cols, problem.constraint)?.with_options(
        SolverOptions { feasibility_tol: a.tol, objective_tol: a.gap_tol, max_iters: a.max_iters, ..SolverOptions::default() },
    );
    let report = solve(&problem)?;
    let x0_norm = inst.x0.norm();
    let rel = (&report.x - &inst.x0).norm() / if x0_norm > 0.0 { x0_norm } else { 1.0 };
    let s = format!(
        "feasibility {}\nobjective {}\ngap {}\niterations {}\nrelative_error {}\nsuccess {}\n",
        format_full(report.feasibility),
        format_full(report.objective),
        format_full(report.gap),
        report.iterations,
        format_full(rel),
        u8::from(rel < a.success_tol)
    );
    Ok(emit(None, &s)?)
}

fn make_instance_cmd(a: MakeInstanceArgs, seed: u64) -> Outcome {
    let spec = EnsembleSpec {
        class: a.class.into(),
        measurement: a.measurement.into(),
        rows: a.m.unwrap_or(a.n),
        cols: a.n,
        rank: a.rank,
        measurements: a.measurements,
        seed,
        trial: a.trial,
    };
    let inst = make_instance(&spec)?;
    Ok(atomic::write_with(&a.out, |w| instance_file::write(w, &inst))?)
}

fn summary(points: &[SuccessCurvePoint]) -> String {
    let mut s = String::from("delta,n,trials,successes,pi_hat\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", format_full(p.delta), p.n, p.trials, p.successes, format_full(p.pi_hat));
    }
    s
}

fn phase_experiment(a: PhaseArgs, seed: u64, pool: &ThreadPool) -> Outcome {
    if !valid_identifier(&a.project) || !valid_identifier(&a.experiment) {
        return Err(Failure::Usage("project and experiment must be non-empty and free of whitespace".into()));
    }
    let mut spec = PlanSpec::new(a.class.into(), a.measurement.into(), a.m.unwrap_or(a.n), a.n, a.rank);
    spec.trials = a.trials;
    spec.window = a.window;
    spec.points = a.points;
    spec.center = a.center;
    spec.success_tol = a.tol;
    spec.project = a.project;
    spec.experiment = a.experiment;
    let plan = plan_experiment(&spec)?;
    let opts = SolverOptions { max_iters: a.max_iters, ..SolverOptions::default() };
    let (records, points) = parallel::run_experiment(pool, &plan, seed, &opts)?;
    let log = applog::render(&records);
    match a.out {
        Some(path) => {
            atomic::write_bytes(&path, log.as_bytes())?;
            emit(None, &summary(&points))?;
        }
        None => emit(None, &log)?,
    }
    Ok(())
}

fn phase_batch(a: BatchArgs, seed: Option<u64>, pool: &ThreadPool) -> Outcome {
    let cfg = batch::parse(&std::fs::read_to_string(&a.config).map_err(|e| Failure::Io(format!("{}: {e}", a.config.display())))?)?;
    let seed = seed.unwrap_or(cfg.seed);
    let opts = SolverOptions { max_iters: a.max_iters, ..SolverOptions::default() };
    let mut all = Vec::new();
    let mut report = String::from("experiment,delta,n,trials,successes,pi_hat\n");
    for spec in &cfg.plans {
        let plan = plan_experiment(spec)?;
        let (mut records, points) = parallel::run_experiment(pool, &plan, seed, &opts)?;
        for r in &mut records {
            r.line += all.len();
        }
        all.extend(records);
        for p in &points {
            let _ = writeln!(report, "{},{},{},{},{},{}", spec.experiment, format_full(p.delta), p.n, p.trials, p.successes, format_full(p.pi_hat));
        }
    }
    atomic::write_bytes(&a.out, applog::render(&all).as_bytes())?;
    Ok(emit(None, &report)?)
}

fn read_log(path: &Path) -> Result<Vec<nucpt_core::harness::TrialRecord>, Failure> {
    let records = applog::read(open(path)?).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(Failure::Usage(format!("log {} holds no trials", path.display())));
    }
    Ok(records)
}

fn fit_pt(a: FitArgs) -> Outcome {
    let rows = fit_log(&read_log(&a.log)?, a.curve.into(), a.beta)?;
    if let Some(csv) = &a.csv {
        atomic::write_bytes(csv, render_csv(&rows).as_bytes())?;
    }
    Ok(emit(None, &render_table(&rows))?)
}

fn plot_curves(a: PlotArgs) -> Outcome {
    if a.samples < 2 {
        return Err(Failure::Usage("need at least 2 samples per curve".into()));
    }
    let rhos: Vec<f64> = (0..a.samples).map(|i| i as f64 / (a.samples - 1) as f64).collect();
    let curve = |label: String, e: Ensemble, beta: f64| -> Result<svg::Series, Failure> {
        let pts = tabulate(e, beta, &rhos)?.into_iter().map(|p| (p.rho, p.mse)).collect();
        Ok(svg::Series { label, points: pts })
    };
    let mut curves = vec![curve("Mat, beta = 1".into(), Ensemble::Mat, 1.0)?, curve("Sym".into(), Ensemble::Sym, 1.0)?];
    for &b in &a.beta {
        if b != 1.0 {
            curves.push(curve(format!("Mat, beta = {b}"), Ensemble::Mat, b)?);
        }
    }
    let mut markers = Vec::new();
    for path in &a.log {
        let fits = fit_log(&read_log(path)?, a.curve.into(), None)?;
        let points = fits.iter().filter(|r| r.fit.delta_hat.is_finite()).map(|r| (r.rho, r.fit.delta_hat)).collect();
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        markers.push(svg::Series { label: format!("fitted transitions, {name}"), points });
    }
    let doc = svg::render("Asymptotic minimax MSE", "rho", "delta", &curves, &markers);
    Ok(atomic::write_bytes(&a.out, doc.as_bytes())?)
}

fn dispatch(cli: Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::MseCurve(a) => mse_curve(a),
        Command::DenoiseMc(a) => denoise_mc(a, seed, &worker_pool(cli.workers)?),
        Command::Recover(a) => recover(a),
        Command::MakeInstance(a) => make_instance_cmd(a, seed),
        Command::PhaseExperiment(a) => phase_experiment(a, seed, &worker_pool(cli.workers)?),
        Command::PhaseBatch(a) => phase_batch(a, cli.seed, &worker_pool(cli.workers)?),
        Command::FitPt(a) => fit_pt(a),
        Command::PlotCurves(a) => plot_curves(a),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").replace('"', "'")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage message=\"{}\"", one_line(first));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, code, msg) = match f {
                Failure::Usage(m) => ("usage", 2, m),
                Failure::Io(m) => ("io", 2, m),
                Failure::Numerical(m) => ("numerical", 3, m),
            };
            eprintln!("error kind={kind} message=\"{}\"", one_line(&msg));
            ExitCode::from(code)
        }
    }
}
