//! `memsim`: run storage / retrieval scenarios, reproduce the reference data sets, compute optimal modes.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a `reproduce` threshold was missed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eit_memory::io;
use eit_memory::optimal::{efficiency_sweep, kernel_oracle, optimal_mode, OptimalModeConfig};
use eit_memory::scenario::{
    cached_optimal_mode, partial_retrieve_scenario, reproduce, run_scenario, run_sweep, write_summary, Figure,
    RunSummary, ScenarioSpec,
};
use eit_memory::shaping::{retrieval_control, writing_control, ShapingOptions};
use eit_memory::solver::SolverOptions;
use eit_memory::{Envelope, EnvelopeKind, Error, MediumParams};

#[derive(Parser)]
#[command(
    name = "memsim",
    version,
    about = "Optimal light storage and retrieval in Lambda-type atomic ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file through writing, storage and retrieval.
    Simulate {
        spec: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Split retrieval in two stages releasing this fraction first.
        #[arg(long)]
        partial: Option<f64>,
    },
    /// Regenerate one of the reference data sets and check its thresholds.
    Reproduce {
        /// fig1, fig2 or fig3.
        figure: String,
        /// Mixing angles for fig3, in radians.
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<f64>>,
        /// Defaults to out/<figure>.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Optimal spin wave and maximum efficiency for an optical depth.
    OptimalMode {
        #[arg(long = "alpha-l", alias = "alphaL")]
        alpha_l: f64,
        /// Also tabulate eta_max over these optical depths.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Cross-check against the kernel oracle.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 200)]
        n_z: usize,
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
        /// Write and read window length.
        #[arg(long, default_value_t = 50.0)]
        window: f64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Compute writing and retrieval controls for a scenario without simulating it.
    ShapeControl {
        spec: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a scenario once per value of one numeric field.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
}

/// Command-line replacements for scenario fields.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long = "alpha-l", alias = "alphaL")]
    alpha_l: Option<f64>,
    /// Storage time in units of 1/gamma.
    #[arg(long)]
    tau: Option<f64>,
    /// Storage time in microseconds.
    #[arg(long)]
    tau_us: Option<f64>,
    /// Spin decay rate in rad/s.
    #[arg(long)]
    gamma_s: Option<f64>,
    /// Spin decay rate in 1/us.
    #[arg(long)]
    gamma_s_us: Option<f64>,
    #[arg(long)]
    omega_max: Option<f64>,
    #[arg(long)]
    n_z: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    refine_passes: Option<usize>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Overrides {
    /// Loads the scenario file and applies overrides; microsecond values become dimensionless here.
    fn apply(&self, path: &Path) -> eit_memory::Result<ScenarioSpec> {
        let mut spec = ScenarioSpec::load(path)?;
        if let Some(id) = &self.id {
            spec.id = id.clone();
        }
        if let Some(dir) = &self.out_dir {
            spec.output.dir = dir.clone();
        }
        let numeric = [
            ("alpha_l", self.alpha_l),
            ("gamma_s", self.gamma_s),
            ("gamma_s", self.gamma_s_us.map(|r| r * 1e6)),
            ("omega_max", self.omega_max),
            ("n_z", self.n_z.map(|n| n as f64)),
            ("dt", self.dt),
            ("refine_passes", self.refine_passes.map(|n| n as f64)),
            ("storage_time", self.tau),
        ];
        for (name, value) in numeric {
            if let Some(v) = value {
                spec.set_param(name, v)?;
            }
        }
        if let Some(us) = self.tau_us {
            let tau = spec.medium()?.time_from_us(us);
            spec.set_param("storage_time", tau)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn print_run(r: &RunSummary) {
    let m = &r.metrics;
    print!(
        "{}: eta = {:.4}  J2 = {:.4}  F = {:.4}  HOM = {:.4}  eta_max = {:.4}",
        r.id, m.eta, m.j2, m.fidelity, m.hom_coincidence, r.eta_max
    );
    if let Some(b) = &m.bins {
        print!("  bin ratio = {:.4}  J2(g1,g2) = {:.4}", b.ratio, b.j2_bins);
    }
    println!("  ({:.1} s)", r.wall_time);
    for w in &r.warnings {
        println!("  warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run(command: Command) -> eit_memory::Result<ExitCode> {
    match command {
        Command::Simulate {
            spec,
            overrides,
            partial,
        } => {
            let spec = overrides.apply(&spec)?;
            let summary_path = spec.output.dir.join("summary.csv");
            match partial {
                None => {
                    let r = run_scenario(&spec)?;
                    print_run(&r);
                    write_summary(&summary_path, std::slice::from_ref(&r), false)?;
                }
                Some(f) => {
                    let p = partial_retrieve_scenario(&spec, f)?;
                    for r in [&p.full, &p.first, &p.second] {
                        print_run(r);
                    }
                    println!(
                        "fraction requested {:.4}, achieved {:.4}; stage energies sum to the full retrieval within {:.2e}",
                        p.fraction_requested, p.fraction_achieved, p.energy_sum_error
                    );
                    write_summary(&summary_path, &[p.full, p.first, p.second], false)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce {
            figure,
            theta,
            out_dir,
            jobs,
        } => {
            let fig: Figure = figure.parse()?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("out").join(fig.name()));
            let report = reproduce(fig, theta.as_deref(), &dir, jobs)?;
            for r in &report.runs {
                print_run(r);
            }
            for c in &report.checks {
                println!(
                    "{} {}: {:.5} (required {})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.requirement
                );
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::OptimalMode {
            alpha_l,
            sweep,
            oracle,
            n_z,
            dt,
            window,
            out_dir,
            jobs,
        } => {
            let medium = MediumParams::new(alpha_l, eit_memory::medium::DEFAULT_GAMMA, 0.0, 0.0)?;
            let cfg = OptimalModeConfig {
                t_window: window,
                dt,
                solver: SolverOptions {
                    n_z,
                    ..Default::default()
                },
                ..Default::default()
            };
            let r = optimal_mode(&medium, &cfg)?;
            let path = out_dir.join(format!("optimal_mode_alpha_l{alpha_l}.csv"));
            io::write_spin_csv(&path, &r.mode)?;
            println!(
                "alpha_l = {alpha_l}: eta_max = {:.5} after {} iterations; mode written to {}",
                r.eta_max,
                r.iterations,
                path.display()
            );
            if oracle {
                let o = kernel_oracle(&medium, n_z.min(100))?;
                let ov = o.mode.resampled(r.mode.grid()).overlap(&r.mode)?;
                println!("kernel oracle: eta_max = {:.5}, mode overlap = {:.5}", o.eta_max, ov);
            }
            if let Some(values) = sweep {
                let pool = rayon_pool(jobs)?;
                let rows = pool.install(|| efficiency_sweep(&medium, &values, &cfg))?;
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|(a, r)| vec![*a, a / 2.0, r.eta_max, r.iterations as f64])
                    .collect();
                let path = out_dir.join("efficiency_vs_depth.csv");
                io::write_table(&path, &["alpha_l", "d", "eta_max", "iterations"], &table)?;
                for (a, r) in &rows {
                    println!("alpha_l = {a}: eta_max = {:.5}", r.eta_max);
                }
                println!("table written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ShapeControl { spec, overrides } => {
            let spec = overrides.apply(&spec)?;
            shape_only(&spec).map_err(|e| Error::Scenario {
                id: spec.id.clone(),
                source: Box::new(e),
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            spec,
            param,
            values,
            overrides,
            jobs,
        } => {
            let spec = overrides.apply(&spec)?;
            let runs = run_sweep(&spec, &param, &values, jobs)?;
            for r in &runs {
                print_run(r);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn rayon_pool(jobs: usize) -> eit_memory::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Adiabatic controls for storing the input into the optimal mode and retrieving that mode into the target.
fn shape_only(spec: &ScenarioSpec) -> eit_memory::Result<()> {
    let r = spec.resolve()?;
    let mode = cached_optimal_mode(&r.medium, r.solver.n_z, spec.grid.dt, spec.protocol.write_window)?;
    let opts = ShapingOptions {
        omega_max: r.omega_max,
        ..Default::default()
    };
    let w = writing_control(&r.medium, &r.input, &mode.mode, &opts)?;
    let rd = retrieval_control(&r.medium, &mode.mode, &r.target, &opts)?;
    let dir = &spec.output.dir;
    let id = &spec.id;
    let silent = Envelope::zeros(r.write_grid, EnvelopeKind::Signal);
    io::write_stage_csv(
        &dir.join(format!("{id}_write_control.csv")),
        &w.control,
        Some(&r.input),
        &silent,
    )?;
    io::write_stage_csv(
        &dir.join(format!("{id}_read_control.csv")),
        &rd.control,
        None,
        &rd.clock.predicted_output,
    )?;
    #[derive(serde::Serialize)]
    struct Report {
        eta_max: f64,
        writing: eit_memory::shaping::ShapingReport,
        retrieval: eit_memory::shaping::ShapingReport,
    }
    let report = Report {
        eta_max: mode.eta_max,
        writing: w.report(),
        retrieval: rd.report(),
    };
    io::write_json(&dir.join(format!("{id}_shaping.json")), &report)?;
    println!(
        "{id}: writing peak Omega = {:.3}, retrieval peak Omega = {:.3}, eta_r = {:.4}, predicted J2 = {:.5}",
        report.writing.peak_omega, report.retrieval.peak_omega, report.retrieval.eta_r, report.retrieval.predicted_j2
    );
    for (name, rep) in [("writing", &report.writing), ("retrieval", &report.retrieval)] {
        if rep.cap_saturated {
            println!("  warning: {name} control saturated at omega_max = {}", r.omega_max);
        }
    }
    Ok(())
}
