use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liquar_core::analytic::{convexity_report_at, solve_optimal};
use liquar_core::demand::{check_assumption1a, FeasibleBox};
use liquar_core::harness::{
    preset, preset_names, regret_curve, regret_svg, replicate, replicate_pto, trajectory_svg, validate_simulator,
    ReplicateReport,
};
use liquar_core::liquar::run_liquar;
use liquar_core::pto::{run_ppto, sensitivity_misspecification, PtoParams};
use liquar_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "liquar", version, about = "Online pricing and capacity sizing experiments for a single-server queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment name; the first configuration is used.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-information optimum of the configured model.
    SolveOptimal {
        #[command(flatten)]
        source: Source,
    },
    /// One LiQUAR run.
    RunLiquar {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One predict-then-optimize run over the LiQUAR horizon.
    RunPto {
        #[command(flatten)]
        source: Source,
        /// Exploration ratio.
        #[arg(long)]
        theta: f64,
        /// Number of exploration prices; defaults to `pto.m` or 3.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicated LiQUAR runs (and pPTO when the config has a `pto` section).
    Replicate {
        #[command(flatten)]
        source: Source,
        /// Number of runs; defaults to the config's `replications`.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG charts.
        #[arg(long)]
        svg: bool,
        /// Skip the pPTO comparison.
        #[arg(long)]
        no_pto: bool,
    },
    /// Profit loss from optimizing against deflated demand.
    Sensitivity {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.2,0.1,0.05,0.02,0.01,0.005,0.002,0.001")]
        h0_list: Vec<f64>,
        /// Search box `mu_lo,mu_hi,p_lo,p_hi` for both optima.
        #[arg(long, value_delimiter = ',', default_value = "2,15,2,8")]
        search_box: Vec<f64>,
    },
    /// Sufficient-condition and convexity reports for the configured box.
    CheckAssumptions {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Simulator oracle suite.
    ValidateSim {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e6)]
        horizon: f64,
    },
    /// Lists built-in experiments.
    Presets,
    /// Writes every built-in experiment as TOML under `dir`.
    ExportPresets {
        #[arg(long, default_value = "configs")]
        dir: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::UnknownPreset { .. }
            | Error::InvalidBox(_)
            | Error::InvalidDemand(_)
            | Error::InvalidDistribution(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load(source: &Source) -> CliResult<ExperimentConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Failure::Config(format!("cannot read config: {io}")),
            other => other.into(),
        }),
        (None, Some(name)) => Ok(preset(name)?.configs.remove(0)),
        (None, None) => Err(Failure::Config("pass --config FILE or --preset NAME".into())),
    }
}

fn configs(source: &Source) -> CliResult<Vec<ExperimentConfig>> {
    match (&source.config, &source.preset) {
        (None, Some(name)) => Ok(preset(name)?.configs),
        _ => Ok(vec![load(source)?]),
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> CliResult {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '-' }).collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

fn solve(source: &Source) -> CliResult {
    let cfg = load(source)?;
    let opt = solve_optimal(&cfg.model.objective(), &cfg.model.bounds)?;
    println!(
        "mu*={:.5} p*={:.5} f*={:.5} rho*={:.5} profit*={:.5} |grad|={:.2e}",
        opt.policy.mu, opt.policy.p, opt.f, opt.rho, opt.profit, opt.grad_norm
    );
    Ok(())
}

fn run_liquar_cmd(source: &Source, seed: u64, out: &Option<PathBuf>) -> CliResult {
    let cfg = load(source)?;
    cfg.validate()?;
    let opt = solve_optimal(&cfg.model.objective(), &cfg.model.bounds)?;
    let run = run_liquar(&cfg.model, &cfg.schedule, cfg.initial, cfg.w0, seed)?;
    let report = regret_curve(&run, opt.f);
    let x = run.final_policy;
    println!(
        "final x=({:.4},{:.4}) distance={:.4} regret={:.2} relative={:.5} time={:.1}",
        x.mu,
        x.p,
        x.distance(&opt.policy),
        report.final_regret(),
        report.final_relative(),
        report.final_time()
    );
    if let Some(dir) = out_dir(out, &cfg) {
        fs::create_dir_all(&dir)?;
        cfg.save(dir.join("config.toml"))?;
        write_json(&dir, "seeds.json", &serde_json::to_value(&run.manifest).unwrap_or_default())?;
        run.write_cycles_csv(create(&dir, "cycles.csv")?)?;
        run.write_iterations_csv(create(&dir, "iterations.csv")?)?;
        let mut f = create(&dir, "regret.csv")?;
        writeln!(f, "time,regret,relative")?;
        for i in 0..report.time.len() {
            writeln!(f, "{},{},{}", report.time[i], report.regret[i], report.relative[i])?;
        }
        write_json(
            &dir,
            "summary.json",
            &serde_json::json!({
                "seed": seed,
                "optimum": opt,
                "final_policy": x,
                "final_distance": x.distance(&opt.policy),
                "final_regret": report.final_regret(),
                "final_relative_regret": report.final_relative(),
                "total_time": report.final_time(),
            }),
        )?;
        if cfg.output.svg {
            fs::write(dir.join("trajectory.svg"), trajectory_svg(&cfg.name, &run.trajectory(), opt.policy))?;
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn run_pto_cmd(source: &Source, theta: f64, m: Option<usize>, seed: u64, out: &Option<PathBuf>) -> CliResult {
    let cfg = load(source)?;
    cfg.validate()?;
    let settings = cfg.pto.clone();
    let family = settings.as_ref().map(|s| s.family).unwrap_or(cfg.model.demand.family());
    let m = m.or(settings.as_ref().map(|s| s.m)).unwrap_or(3);
    let params = PtoParams {
        explore_mu: settings.and_then(|s| s.explore_mu),
        ..PtoParams::new(family, theta, m, cfg.schedule.total_time())
    };
    let opt = solve_optimal(&cfg.model.objective(), &cfg.model.bounds)?;
    let res = run_ppto(&cfg.model, &params, seed)?;
    let report = regret_curve(&res, opt.f);
    println!(
        "fitted {:?}; policy=({:.4},{:.4}) distance={:.4} regret={:.2} relative={:.5}",
        res.fit.curve,
        res.policy.mu,
        res.policy.p,
        res.policy.distance(&opt.policy),
        report.final_regret(),
        report.final_relative()
    );
    if let Some(dir) = out_dir(out, &cfg) {
        fs::create_dir_all(&dir)?;
        cfg.save(dir.join("config.toml"))?;
        res.write_ledger_csv(create(&dir, "ledger.csv")?)?;
        let mut summary = res.summary_json();
        summary["optimum"] = serde_json::to_value(opt).unwrap_or_default();
        summary["final_regret"] = report.final_regret().into();
        summary["final_relative_regret"] = report.final_relative().into();
        write_json(&dir, "summary.json", &summary)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn print_report(r: &ReplicateReport) {
    println!(
        "{}: runs={} final mean regret={:.2} median final relative={:.5} median final distance={} slope={}",
        r.name,
        r.runs,
        r.mean_regret.last().copied().unwrap_or(f64::NAN),
        r.median_final_relative,
        r.median_final_distance.map(|d| format!("{d:.4}")).unwrap_or_else(|| "n/a".into()),
        r.fit.map(|f| format!("{:.4}", f.slope)).unwrap_or_else(|| "n/a".into())
    );
}

fn save_report(dir: &Path, r: &ReplicateReport, svg: bool) -> CliResult {
    fs::create_dir_all(dir)?;
    r.write_csv(create(dir, "regret.csv")?)?;
    write_json(dir, "summary.json", &r.summary_json())?;
    if svg {
        fs::write(dir.join("regret.svg"), regret_svg(r))?;
        if !r.mean_trajectory.is_empty() {
            fs::write(dir.join("trajectory.svg"), trajectory_svg(&r.name, &r.mean_trajectory, r.optimum.policy))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn replicate_cmd(
    source: &Source,
    runs: Option<usize>,
    seed0: u64,
    jobs: usize,
    out: &Option<PathBuf>,
    svg: bool,
    no_pto: bool,
) -> CliResult {
    let cfgs = configs(source)?;
    let many = cfgs.len() > 1;
    for cfg in &cfgs {
        let n = runs.unwrap_or(cfg.replications);
        let report = replicate(cfg, n, seed0, jobs)?;
        print_report(&report);
        let dir = out_dir(out, cfg).map(|d| if many { d.join(slug(&cfg.name)) } else { d });
        if let Some(dir) = &dir {
            save_report(&dir.join("liquar"), &report, svg || cfg.output.svg)?;
            cfg.save(dir.join("config.toml"))?;
        }
        if let (Some(pto), false) = (&cfg.pto, no_pto) {
            for &theta in &pto.thetas {
                let r = replicate_pto(cfg, theta, n, seed0, jobs)?;
                print_report(&r);
                if let Some(dir) = &dir {
                    save_report(&dir.join(format!("pto-theta-{theta}")), &r, svg || cfg.output.svg)?;
                }
            }
        }
        if let Some(dir) = &dir {
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn sensitivity_cmd(source: &Source, epsilon: f64, h0_list: &[f64], search_box: &[f64]) -> CliResult {
    let cfg = if source.config.is_none() && source.preset.is_none() {
        preset("base-6.1")?.configs.remove(0)
    } else {
        load(source)?
    };
    let [mu_lo, mu_hi, p_lo, p_hi] = search_box else {
        return Err(Failure::Config("--search-box needs four values mu_lo,mu_hi,p_lo,p_hi".into()));
    };
    let search = FeasibleBox::new(*mu_lo, *mu_hi, *p_lo, *p_hi)?;
    let rows = sensitivity_misspecification(&cfg.model.objective(), &search, epsilon, h0_list)?;
    println!("h0,rho_star,mu_star,p_star,mu_hat,p_hat,relative_loss,workload_error,stable");
    for r in rows {
        println!(
            "{},{:.5},{:.5},{:.5},{:.5},{:.5},{:.6},{:.6},{}",
            r.h0, r.rho_star, r.x_star.mu, r.x_star.p, r.x_hat.mu, r.x_hat.p, r.relative_loss, r.workload_error, r.stable
        );
    }
    Ok(())
}

fn check_cmd(source: &Source, grid: usize) -> CliResult {
    let cfg = load(source)?;
    let m = &cfg.model;
    let report = check_assumption1a(&m.demand, &m.bounds, m.h0, m.service.scv(), grid);
    println!(
        "sufficient conditions: holds={} stable={} slope slack={:.4e} (p={:.4}) hessian slack={:.4e} at ({:.4},{:.4})",
        report.holds,
        report.stable,
        report.slope_min_slack,
        report.slope_worst_price,
        report.hessian_min_slack,
        report.hessian_worst_point.mu,
        report.hessian_worst_point.p
    );
    let obj = m.objective();
    let opt = solve_optimal(&obj, &m.bounds)?;
    let conv = convexity_report_at(&obj, &m.bounds, grid, opt.policy);
    println!(
        "convexity: convex={} min det={:.4e} at ({:.4},{:.4}) min f_pp={:.4e} min f_mumu={:.4e} K0={:.4e} skipped={}",
        conv.convex,
        conv.min_det,
        conv.min_det_point.mu,
        conv.min_det_point.p,
        conv.min_dpp,
        conv.min_dmumu,
        conv.k0,
        conv.skipped
    );
    Ok(())
}

fn validate_cmd(seed: u64, horizon: f64) -> CliResult {
    let checks = validate_simulator(seed, horizon)?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.pass);
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} simulator checks failed")));
    }
    Ok(())
}

fn export_cmd(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)?;
    for name in preset_names() {
        let p = preset(name)?;
        if p.configs.len() == 1 {
            p.configs[0].save(dir.join(format!("{name}.toml")))?;
        } else {
            let sub = dir.join(name);
            fs::create_dir_all(&sub)?;
            for (i, c) in p.configs.iter().enumerate() {
                c.save(sub.join(format!("{:02}-{}.toml", i + 1, slug(&c.name))))?;
            }
        }
    }
    println!("wrote {} presets to {}", preset_names().len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveOptimal { source } => solve(source),
        Command::RunLiquar { source, seed, out } => run_liquar_cmd(source, *seed, out),
        Command::RunPto { source, theta, m, seed, out } => run_pto_cmd(source, *theta, *m, *seed, out),
        Command::Replicate { source, runs, seed0, jobs, out, svg, no_pto } => {
            replicate_cmd(source, *runs, *seed0, *jobs, out, *svg, *no_pto)
        }
        Command::Sensitivity { source, epsilon, h0_list, search_box } => sensitivity_cmd(source, *epsilon, h0_list, search_box),
        Command::CheckAssumptions { source, grid } => check_cmd(source, *grid),
        Command::ValidateSim { seed, horizon } => validate_cmd(*seed, *horizon),
        Command::Presets => {
            for name in preset_names() {
                if let Ok(p) = preset(name) {
                    println!("{name:<24} {} ({} config{})", p.description, p.configs.len(), if p.configs.len() == 1 { "" } else { "s" });
                }
            }
            Ok(())
        }
        Command::ExportPresets { dir } => export_cmd(dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
