use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use nonlocal_neumann::harness::{self, OutputPaths};
use nonlocal_neumann::kernels::{self, KernelProfile, NormalizationConstants};
use nonlocal_neumann::{Error, Result, StudyConfig};

/// Nonlocal Neumann diffusion: kernel checks, single runs and eps-sweeps.
#[derive(Parser, Debug)]
#[command(name = "nlneumann", version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print C1, C2 and health checks for a kernel (quartic, cosine, custom:<file>).
    VerifyKernel {
        kernel: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Solve at the first eps of a config and write the final field.
    Run { config: PathBuf },
    /// Run the full eps-sweep and write errors.csv, plot.gp and manifest.json.
    Study { config: PathBuf },
    /// Compare the Picard construction with the explicit stepper.
    Compare { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::VerifyKernel { kernel, dim } => verify_kernel(&kernel, dim),
        Command::Run { config } => run(&config),
        Command::Study { config } => study(&config),
        Command::Compare { config } => compare(&config),
    }
}

fn verify_kernel(spec: &str, dim: usize) -> Result<()> {
    let profile = KernelProfile::from_spec(spec, dim)?;
    let consts = NormalizationConstants::compute(&profile)?;
    let residual = kernels::c2_residual(&profile, consts.c2)?;
    let report = kernels::verify_kernel(&profile);
    println!("kernel          {spec} (dim {dim}, support {})", profile.support());
    println!("C1              {:.15}", consts.c1);
    println!("C2              {:.15}", consts.c2);
    println!("C2 residual     {residual:.3e}");
    println!("unit mass error {:.3e}", report.unit_mass_error);
    println!("min on support  {:.3e}", report.min_on_support);
    println!("symmetry error  {:.3e}", report.symmetry_error);
    if report.passes() {
        println!("status          ok");
        Ok(())
    } else {
        Err(Error::DegenerateKernel(format!("{spec} fails the kernel checks")))
    }
}

fn run(path: &Path) -> Result<()> {
    let cfg = StudyConfig::from_file(path)?;
    let eps = cfg.eps_list[0];
    let run = harness::run_case(&cfg, eps)?;
    let row = &run.row;
    println!(
        "eps = {eps}  h = {}  nodes = {}  dt = {:.3e}  runtime = {:.2} s",
        row.h, row.nodes, row.dt, row.runtime_s
    );
    println!("sup error {:.6e}", row.sup_error);
    println!("L1 error  {:.6e}", row.l1_error);
    for (name, w) in ["1", "x", "sin"].iter().zip(&row.weak_errors) {
        println!("weak[{name}]   {w:.6e}");
    }
    let mut text = String::from("x,y,u,reference\n");
    for (x, u) in run.grid.nodes().iter().zip(run.field.values()) {
        let reference = run.reference.eval(x, cfg.t_end);
        let _ = writeln!(
            text,
            "{},{},{},{}",
            harness::format_sci(x[0]),
            harness::format_sci(x[1]),
            harness::format_sci(*u),
            harness::format_sci(reference)
        );
    }
    let out = cfg.out_dir.join("field.csv");
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
    std::fs::write(&out, text).map_err(|e| io_error(&out, e))?;
    info!("wrote {}", out.display());
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn study(path: &Path) -> Result<()> {
    let cfg = StudyConfig::from_file(path)?;
    let result = harness::run_study(&cfg)?;
    println!(
        "{:>10} {:>13} {:>13} {:>13} {:>13} {:>13} {:>9}",
        "eps", "sup", "L1", "weak[1]", "weak[x]", "weak[sin]", "time [s]"
    );
    for row in &result.rows {
        let w = |j: usize| row.weak_errors.get(j).copied().unwrap_or(f64::NAN);
        println!(
            "{:>10.4} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>9.2}",
            row.eps,
            row.sup_error,
            row.l1_error,
            w(0),
            w(1),
            w(2),
            row.runtime_s
        );
    }
    for failure in &result.failures {
        println!("eps = {} failed: {}", failure.eps, failure.message);
    }
    match &result.orders {
        Some(o) => {
            let show = |v: Option<f64>| v.map_or("-".to_string(), |p| format!("{p:.3}"));
            let weak: Vec<String> = o.weak.iter().map(|&v| show(v)).collect();
            println!(
                "fitted orders: sup {}, L1 {}, weak [{}]",
                show(o.sup),
                show(o.l1),
                weak.join(", ")
            );
        }
        None => println!("fitted orders: fewer than two valid rows"),
    }
    let paths = OutputPaths::in_dir(&cfg.out_dir);
    harness::emit_outputs(&result, &paths)?;
    info!("wrote {}, {} and {}", paths.csv.display(), paths.plot.display(), paths.manifest.display());
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{} eps rows failed", result.failures.len())))
    }
}

fn compare(path: &Path) -> Result<()> {
    let cfg = StudyConfig::from_file(path)?;
    println!(
        "{:>10} {:>12} {:>8} {:>11} {:>10} {:>14}",
        "eps", "window", "windows", "max iters", "max ratio", "sup |P - RK4|"
    );
    for &eps in &cfg.eps_list {
        let c = harness::compare_picard(&cfg, eps)?;
        println!(
            "{:>10.4} {:>12.4e} {:>8} {:>11} {:>10.4} {:>14.4e}",
            c.eps, c.window, c.windows, c.max_iterations, c.max_ratio, c.sup_difference
        );
    }
    Ok(())
}
