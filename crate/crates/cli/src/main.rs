use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sepnn::certify::{log_grid, Notion, DEFAULT_EPSILON, DEFAULT_FIT_WINDOW, DEFAULT_FLAT_TOL, DYKSTRA_MAX_ITER, DYKSTRA_TOL};
use sepnn::linalg::io::write_matrix;
use sepnn::model::save_checkpoint;
use sepnn::optim::{train_logged, AdadeltaConfig, TrainConfig};
use sepnn::states::{reference_distance, Family, FamilySpec, LossKind};
use sepnn::Error;
use sepnn_cli::bench::{self, AnsatzReport, GdBenchSpec, RandomBenchSpec};
use sepnn_cli::harness::{self, CertifySpec, ScanSpec};
use sepnn_cli::output::{self, meta};
use sepnn_cli::pool::default_workers;
use sepnn_cli::{exit_code, EXIT_NUMERIC};

#[derive(Parser)]
#[command(name = "sepnn", version, about = "Closest separable states from a neural-network decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one target state.
    Train(TrainCmd),
    /// Train over a q grid and fit the separability threshold.
    Scan(ScanCmd),
    /// Separability-ball certificates over a q grid.
    Certify(CertifyCmd),
    /// Trained distances of random two-qubit states against PPT diagnostics.
    RandomBench(RandomBenchCmd),
    /// Plain gradient-descent baseline curves.
    GdBench(GdBenchCmd),
    /// Bell closest-state ansatz regions and the two-qubit ansatz bound.
    AnsatzCheck(AnsatzCheckCmd),
}

#[derive(Args, Clone)]
struct TargetArgs {
    /// isotropic, werner, horodecki, ghz, w.
    #[arg(long)]
    family: Family,
    /// Local dimension, or party count for ghz and w.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Structure: full, cut:1|23, bisep, bisep:..., bisep-size:m, trisep, trisep:...
    #[arg(long, default_value = "full")]
    structure: String,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value = "trace")]
    loss: LossKind,
    /// Decomposition size (default: product of local dimensions).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 3000)]
    batches: usize,
    #[arg(long, default_value_t = 2e-3)]
    separable_tol: f64,
    #[arg(long, default_value_t = 2e-4)]
    converge_tol: f64,
    #[arg(long, default_value_t = 1)]
    patience: usize,
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
    #[arg(long, default_value_t = 0.95)]
    decay: f64,
    #[arg(long = "adadelta-eps", default_value_t = 1e-6)]
    adadelta_eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            k: self.k,
            width: self.width,
            max_epochs: self.epochs,
            batches_per_epoch: self.batches,
            separable_tol: self.separable_tol,
            converge_tol: self.converge_tol,
            patience: self.patience,
            adadelta: AdadeltaConfig {
                decay: self.decay,
                eps: self.adadelta_eps,
                lr: self.lr,
            },
            seed: self.seed,
            restarts: self.restarts,
        }
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long)]
    q: f64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write the per-epoch log as CSV.
    #[arg(long)]
    log: bool,
}

#[derive(Args)]
struct GridArgs {
    /// Comma-separated, strictly increasing q values (default: 11 points plus the known boundary).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Worker threads (default: SEPNN_WORKERS or all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScanCmd {
    #[command(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_FLAT_TOL)]
    flat_tol: f64,
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW)]
    fit_window: usize,
}

#[derive(Args)]
struct CertifyCmd {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// full or bisep.
    #[arg(long, default_value = "full")]
    notion: Notion,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps_prime_min: f64,
    #[arg(long, default_value_t = 1e3)]
    eps_prime_max: f64,
    #[arg(long, default_value_t = 40)]
    eps_prime_points: usize,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct RandomBenchCmd {
    #[arg(long, default_value_t = 400)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    state_seed: u64,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GdBenchCmd {
    #[arg(long, default_value_t = 20)]
    runs: usize,
    #[arg(long, default_value_t = 250)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct AnsatzCheckCmd {
    /// Grid steps per parameter axis.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 400)]
    random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn family_spec(family: Family, d: usize, q: f64) -> FamilySpec {
    FamilySpec::new(family, d, q)
}

fn grid_for(args: &GridArgs, family: Family, d: usize) -> Vec<f64> {
    args.grid.clone().unwrap_or_else(|| harness::default_grid(family, d))
}

fn cmd_train(c: TrainCmd) -> Outcome {
    let spec = family_spec(c.target.family, c.target.d, c.q);
    let target = spec.build()?;
    let structure = harness::parse_structure(&c.target.structure, spec.dims())?;
    let config = c.train.config();
    let mut log_buf = Vec::new();
    let result = train_logged(&target, &structure, &config, c.log.then_some(&mut log_buf as &mut dyn Write))?;

    if c.log {
        create(&c.out, "train_log.csv")?.write_all(&log_buf)?;
    }
    fs::create_dir_all(&c.out)?;
    save_checkpoint(&result.model, c.out.join("model.ckpt"))?;
    write_matrix(c.out.join("state.txt"), result.state.matrix(), result.state.dims())?;
    let reference = reference_distance(spec.family, spec.dim, spec.q, config.loss).ok();
    let mut m = meta(&[
        ("command", &"train"),
        ("family", &spec.family),
        ("dim", &spec.dim),
        ("q", &spec.q),
        ("structure", &structure.descriptor()),
    ]);
    m.extend(output::train_meta(&config));
    let mut w = create(&c.out, "result.csv")?;
    output::write_header(&mut w, &m, &["distance", "reference", "status", "epochs", "batches", "seed", "wall_time"])?;
    output::write_row(
        &mut w,
        &[
            result.distance.to_string(),
            output::opt(reference),
            result.stop.to_string(),
            result.epochs.to_string(),
            result.batches.to_string(),
            result.seed.to_string(),
            format!("{:.3}", result.wall_time.as_secs_f64()),
        ],
    )?;
    w.flush()?;
    println!(
        "{} d={} q={} {}: distance {:.6} ({}, {} epochs, {:.1}s){}",
        spec.family,
        spec.dim,
        spec.q,
        config.loss,
        result.distance,
        result.stop,
        result.epochs,
        result.wall_time.as_secs_f64(),
        reference.map_or(String::new(), |r| format!(", reference {r:.6}"))
    );
    Ok(())
}

fn cmd_scan(c: ScanCmd) -> Outcome {
    let spec = ScanSpec {
        family: family_spec(c.target.family, c.target.d, 0.0),
        structure: c.target.structure.clone(),
        config: c.train.config(),
        grid: grid_for(&c.grid, c.target.family, c.target.d),
        workers: c.grid.workers.unwrap_or_else(default_workers),
        flat_tol: c.flat_tol,
        fit_window: c.fit_window,
    };
    let outcome = harness::run_scan(&spec)?;
    let mut w = create(&c.grid.out, "scan.csv")?;
    harness::write_scan(&mut w, &spec, &outcome)?;
    w.flush()?;
    for r in &outcome.rows {
        println!("q={:<8} distance {:.6} {}", r.q, r.best_distance, r.status);
    }
    match &outcome.estimate {
        Ok(e) => println!("threshold q* = {:.5} (slope {:.4}, {} points)", e.q_star, e.slope, e.points.len()),
        Err(msg) => println!("threshold unavailable: {msg}"),
    }
    if outcome.rows.iter().any(|r| !r.best_distance.is_finite()) {
        return Err(Failure::Lib(Error::Unsupported("some grid points failed".into())));
    }
    Ok(())
}

fn cmd_certify(c: CertifyCmd) -> Outcome {
    if c.eps_prime_points == 0 || !(c.eps_prime_min > 0.0 && c.eps_prime_max >= c.eps_prime_min) {
        return Err(Error::InvalidParameter("eps' grid needs positive bounds and at least one point".into()).into());
    }
    let spec = CertifySpec {
        family: family_spec(c.family, c.d, 0.0),
        notion: c.notion,
        epsilon: c.epsilon,
        eps_prime_grid: log_grid(c.eps_prime_min, c.eps_prime_max, c.eps_prime_points),
        config: c.train.config(),
        grid: grid_for(&c.grid, c.family, c.d),
        workers: c.grid.workers.unwrap_or_else(default_workers),
    };
    let outcome = harness::run_certify(&spec)?;
    let mut w = create(&c.grid.out, "certify.csv")?;
    harness::write_certify(&mut w, &spec, &outcome)?;
    w.flush()?;
    for (r, q) in outcome.results.iter().zip(&spec.grid) {
        match r {
            Ok(cert) => {
                println!("q={q:<8} {} purity {:.5} bound {:.5}", cert.verdict, cert.best_purity, cert.purity_bound);
                if cert.certified() {
                    let name = format!("css_q{q}.txt");
                    write_matrix(c.grid.out.join(name), cert.css_state.matrix(), cert.css_state.dims())?;
                }
            }
            Err(e) => println!("q={q:<8} error: {e}"),
        }
    }
    match outcome.lower_bound {
        Some(q) => println!("largest certified q = {q}"),
        None => println!("no q certified"),
    }
    Ok(())
}

fn cmd_random_bench(c: RandomBenchCmd) -> Outcome {
    let spec = RandomBenchSpec {
        count: c.count,
        state_seed: c.state_seed,
        config: c.train.config(),
        workers: c.workers.unwrap_or_else(default_workers),
        dykstra_tol: DYKSTRA_TOL,
        dykstra_max_iter: DYKSTRA_MAX_ITER,
    };
    let rows = bench::random_bench(&spec)?;
    let mut w = create(&c.out, "random_bench.csv")?;
    bench::write_random_bench(&mut w, &spec, &rows)?;
    w.flush()?;
    println!("{} states written", rows.len());
    Ok(())
}

fn cmd_gd_bench(c: GdBenchCmd) -> Outcome {
    let spec = GdBenchSpec {
        runs: c.runs,
        rounds: c.rounds,
        seed: c.seed,
        workers: c.workers.unwrap_or_else(default_workers),
    };
    let curves = bench::gd_bench(&spec)?;
    let mut w = create(&c.out, "gd_bench.csv")?;
    bench::write_gd_bench(&mut w, &spec, &curves)?;
    w.flush()?;
    for target in ["bell", "isotropic5"] {
        for real_only in [false, true] {
            let best = curves
                .iter()
                .filter(|x| x.target == target && x.real_only == real_only)
                .map(|x| x.final_distance())
                .fold(f64::INFINITY, f64::min);
            let mode = if real_only { "real" } else { "complex" };
            println!("{target} {mode}: best final distance {best:.6}");
        }
    }
    Ok(())
}

fn cmd_ansatz_check(c: AnsatzCheckCmd) -> Outcome {
    let report: AnsatzReport = bench::ansatz_check(c.steps, c.random, c.seed)?;
    let mut w = create(&c.out, "ansatz_check.csv")?;
    bench::write_ansatz_check(&mut w, &report)?;
    w.flush()?;
    let invalid = report.rows.iter().filter(|r| !r.valid).count();
    println!(
        "regions: {} points, {} invalid (excluded), {} violations",
        report.rows.len(),
        invalid,
        report.region_violations()
    );
    println!(
        "random: {} states, {} NPT, {} invalid ansatz, {} bound violations",
        report.random_states, report.random_npt, report.random_invalid, report.random_violations
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Scan(c) => cmd_scan(c),
        Command::Certify(c) => cmd_certify(c),
        Command::RandomBench(c) => cmd_random_bench(c),
        Command::GdBench(c) => cmd_gd_bench(c),
        Command::AnsatzCheck(c) => cmd_ansatz_check(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERIC as u8)
        }
    }
}
