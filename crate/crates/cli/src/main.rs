use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spillopt_core::evaluation::evaluate_instance;
use spillopt_core::formulation::{check_invariants, coverage_stats, formulate};
use spillopt_core::io::{
    parse_inputs, read_config, read_resources, read_spills, sample_scenarios, write_scenario_plots,
    write_scenarios, write_solution_reports, write_sweep_reports, write_voi_reports, InputBundle, InputError,
    ParsedInputs, RunManifest,
};
use spillopt_core::milp::mps::write_mps;
use spillopt_core::model::Weights;
use spillopt_core::repair::repair_loop;
use spillopt_core::solve::solve_instance;
use spillopt_core::scenario::{fit_exponential, ks_test, validate_scenarios};
use spillopt_core::sweep::{
    best_configuration, enumerate_grid, pareto_frontier, read_sweep_csv, run_sweep, write_pareto_csv, WeightGrid,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "spillopt", version, about = "Oil-spill response station siting under uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a bundle, listing warnings.
    Validate { bundle: PathBuf },
    /// Sample scenarios from the historical spills and write scenarios.json.
    GenScenarios {
        bundle: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of sampled scenarios (in addition to the deterministic one).
        #[arg(long)]
        n: Option<usize>,
        /// Output file; defaults to the bundle's scenarios.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the stochastic model and write solution reports.
    Solve {
        bundle: PathBuf,
        /// k1,omega1,omega2,omega3
        #[arg(long, value_parser = parse_weights)]
        weights: Option<Weights>,
        #[arg(long, default_value = "out/solve")]
        out: PathBuf,
        /// Write the per-node branch-and-bound trace.
        #[arg(long)]
        trace: bool,
    },
    /// Compute RP, EWS, EVP, EEV, VSS and EVPI.
    Evaluate {
        bundle: PathBuf,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<Weights>,
        #[arg(long, default_value = "out/evaluate")]
        out: PathBuf,
    },
    /// Solve every configuration of the weight grid.
    Sweep {
        bundle: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        k1_step: f64,
        #[arg(long, default_value_t = 0.1)]
        omega_step: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out/sweep")]
        out: PathBuf,
    },
    /// Extract the Pareto frontier from a sweep CSV.
    Pareto {
        sweep_csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the model in fixed-width MPS format.
    ExportMps {
        bundle: PathBuf,
        #[arg(long, value_parser = parse_weights)]
        weights: Option<Weights>,
        #[arg(long, default_value = "out/model.mps")]
        out: PathBuf,
    },
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err("expected k1,omega1,omega2,omega3".into());
    }
    let w = Weights::new(parts[0], [parts[1], parts[2], parts[3]]);
    w.validate().map_err(|e| e.to_string())?;
    Ok(w)
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_VALIDATION, message: e.to_string() }
    }
    fn solver(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_SOLVER, message: e.to_string() }
    }
    fn io(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        match e {
            InputError::Io { .. } => Failure::io(e),
            other => Failure::validation(other),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(bundle: &Path) -> Result<(InputBundle, ParsedInputs), Failure> {
    let b = InputBundle::from_dir(bundle);
    let parsed = parse_inputs(&b)?;
    Ok((b, parsed))
}

fn prepare_out(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn manifest(command: &str, bundle: &InputBundle, seed: u64, out: &Path) -> Outcome {
    let m = RunManifest::new(command, Some(&bundle.config), &bundle.existing_files(), seed).map_err(Failure::io)?;
    m.write(out).map_err(Failure::io)
}

fn validate(bundle: &Path) -> Outcome {
    let (_, parsed) = load(bundle)?;
    let inst = &parsed.instance;
    println!(
        "ok: {} stations, {} spills, {} resources, {} scenarios, {} eligible pairs",
        inst.num_stations(),
        inst.num_spills(),
        inst.num_resources(),
        inst.num_scenarios(),
        inst.pairs.len()
    );
    if parsed.generated_scenarios {
        println!("note: no scenarios.json; scenarios were sampled from the spill history");
    }
    for w in inst.validation_warnings() {
        println!("warning: {w}");
    }
    Ok(())
}

fn gen_scenarios(bundle: &Path, seed: Option<u64>, n: Option<usize>, out: Option<PathBuf>) -> Outcome {
    let b = InputBundle::from_dir(bundle);
    let mut config = read_config(&b.config)?;
    let resources = read_resources(&b.resources)?;
    let spills = read_spills(&b.spills)?;
    if let Some(seed) = seed {
        config.sampling.rng_seed = seed;
    }
    if let Some(n) = n {
        config.sampling.n_stochastic = n;
        if config.probabilities.len() != n + 1 {
            eprintln!("warning: config lists {} probabilities; using uniform weights over {} scenarios", config.probabilities.len(), n + 1);
            config.probabilities = vec![1.0 / (n + 1) as f64; n + 1];
        }
    }
    let volumes: Vec<f64> = spills.iter().map(|s| s.base_volume).collect();
    let fitted = fit_exponential(&volumes).map_err(Failure::validation)?;
    let ks = ks_test(&volumes, &fitted);
    let set = sample_scenarios(&spills, &resources, &config)?;
    let report = validate_scenarios(&set, &spills, &resources, &config.model, config.sampling.validation_tol);
    let path = out.unwrap_or(b.scenarios.clone());
    write_scenarios(&path, &set.scenarios, &spills, &resources)?;
    println!("fit: rate {:.6e} per gal (mean {:.2} gal), n = {}", fitted.rate, fitted.mean(), fitted.sample_size);
    println!("ks: D = {:.4}, p = {:.4}", ks.statistic, ks.p_value);
    println!("scenarios: {} ({} spill-scenario instances) -> {}", set.scenarios.len(), set.num_instances(), path.display());
    for c in &report.checks {
        println!(
            "check {:<20} mean dev {:>6.1}%  std dev {:>6.1}%  {}",
            c.parameter,
            100.0 * c.mean_deviation,
            100.0 * c.std_deviation,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("validation: {}", if report.pass { "pass" } else { "fail" });
    Ok(())
}

fn solve(bundle: &Path, weights: Option<Weights>, out: &Path, trace: bool) -> Outcome {
    let (b, parsed) = load(bundle)?;
    let inst = &parsed.instance;
    let weights = weights.unwrap_or(parsed.config.weights);
    let mut options = parsed.config.solver.to_options();
    options.trace = trace;
    let result = repair_loop(inst, &weights, &options).map_err(Failure::solver)?;
    let solution = &result.solution;
    if !solution.has_incumbent() {
        return Err(Failure::solver(format!("no feasible solution found (status {:?})", solution.status)));
    }
    prepare_out(out)?;
    let mut used = inst.clone();
    used.config.n_max_stations = result.n_final;
    let model = formulate(&used, &weights).map_err(Failure::validation)?;
    let violations = check_invariants(&model, solution, &used);
    write_solution_reports(out, &used, solution).map_err(Failure::io)?;
    write_scenario_plots(out, &used, solution).map_err(Failure::io)?;
    if trace {
        let (_, outcome) = solve_instance(&used, &weights, &options).map_err(Failure::solver)?;
        let lines: String = outcome.trace.iter().map(|t| format!("{t}\n")).collect();
        fs::write(out.join("trace.txt"), lines).map_err(Failure::io)?;
    }
    manifest("solve", &b, options.seed, out)?;

    let stats = coverage_stats(solution, &used);
    let names: Vec<String> = solution
        .selected()
        .iter()
        .map(|&i| format!("{} ({})", inst.stations[i].id, inst.stations[i].name))
        .collect();
    println!("status: {:?}", solution.status);
    println!("weights: {weights}");
    println!("objective: {:.6}", solution.objective);
    println!("coverage term: {:.6}  cost term: {:.6}", solution.coverage_term, solution.cost_term);
    println!("stations: {}", if names.is_empty() { "none".into() } else { names.join(", ") });
    println!("fixed cost: {:.4} (x {} currency)", inst.fixed_cost(&solution.open), inst.config.cost_unit);
    println!("coverage: {} of {} spill-scenarios ({:.1}%)", stats.covered_pairs, stats.total_pairs, 100.0 * stats.rate);
    if result.adjustments > 0 {
        println!("repair: station budget raised {} time(s) to {}", result.adjustments, result.n_final);
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    for v in &violations {
        eprintln!("invariant violated: {v}");
    }
    if !violations.is_empty() {
        return Err(Failure::solver(format!("{} invariant violation(s)", violations.len())));
    }
    println!("reports written to {}", out.display());
    Ok(())
}

fn evaluate(bundle: &Path, weights: Option<Weights>, out: &Path) -> Outcome {
    let (b, parsed) = load(bundle)?;
    let weights = weights.unwrap_or(parsed.config.weights);
    let options = parsed.config.solver.to_options();
    let eval = evaluate_instance(&parsed.instance, &weights, &options).map_err(Failure::solver)?;
    prepare_out(out)?;
    write_voi_reports(out, &eval.report).map_err(Failure::io)?;
    manifest("evaluate", &b, options.seed, out)?;
    print!("{}", eval.report.to_text_table());
    println!("reports written to {}", out.display());
    Ok(())
}

fn sweep(bundle: &Path, k1_step: f64, omega_step: f64, jobs: usize, out: &Path) -> Outcome {
    let (b, parsed) = load(bundle)?;
    let grid = WeightGrid::with_k1_step(k1_step, omega_step).map_err(Failure::validation)?;
    let configs = enumerate_grid(&grid).map_err(Failure::validation)?;
    let options = parsed.config.solver.to_options();
    let runs = run_sweep(&parsed.instance, &configs, &options, jobs).map_err(Failure::solver)?;
    let frontier = pareto_frontier(&runs);
    prepare_out(out)?;
    write_sweep_reports(out, &runs, &frontier).map_err(Failure::io)?;
    manifest("sweep", &b, options.seed, out)?;
    let failed = runs.iter().filter(|r| !r.succeeded()).count();
    println!("runs: {} ({} failed)", runs.len(), failed);
    match best_configuration(&runs) {
        Ok(best) => println!(
            "best: {} objective {:.6} coverage {:.6} cost {:.6} stations {:?}",
            best.weights,
            best.objective,
            best.coverage_value,
            best.cost_value,
            best.stations()
        ),
        Err(e) => return Err(Failure::solver(e)),
    }
    println!("pareto points: {}", frontier.len());
    println!("reports written to {}", out.display());
    Ok(())
}

fn pareto(sweep_csv: &Path, out: Option<PathBuf>) -> Outcome {
    let file = fs::File::open(sweep_csv).map_err(|e| Failure::io(format!("{}: {e}", sweep_csv.display())))?;
    let runs = read_sweep_csv(file).map_err(Failure::validation)?;
    let frontier = pareto_frontier(&runs);
    match out {
        Some(path) => {
            let f = fs::File::create(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
            write_pareto_csv(&frontier, f).map_err(Failure::io)?;
            println!("{} pareto points written to {}", frontier.len(), path.display());
        }
        None => write_pareto_csv(&frontier, std::io::stdout().lock()).map_err(Failure::io)?,
    }
    Ok(())
}

fn export_mps(bundle: &Path, weights: Option<Weights>, out: &Path) -> Outcome {
    let (b, parsed) = load(bundle)?;
    let weights = weights.unwrap_or(parsed.config.weights);
    let model = formulate(&parsed.instance, &weights).map_err(Failure::validation)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    let f = fs::File::create(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    write_mps(&model.problem, std::io::BufWriter::new(f)).map_err(Failure::io)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        manifest("export-mps", &b, 0, dir)?;
    }
    println!(
        "{} columns, {} rows written to {}",
        model.problem.num_columns(),
        model.problem.num_rows(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { bundle } => validate(&bundle),
        Command::GenScenarios { bundle, seed, n, out } => gen_scenarios(&bundle, seed, n, out),
        Command::Solve { bundle, weights, out, trace } => solve(&bundle, weights, &out, trace),
        Command::Evaluate { bundle, weights, out } => evaluate(&bundle, weights, &out),
        Command::Sweep { bundle, k1_step, omega_step, jobs, out } => sweep(&bundle, k1_step, omega_step, jobs, &out),
        Command::Pareto { sweep_csv, out } => pareto(&sweep_csv, out),
        Command::ExportMps { bundle, weights, out } => export_mps(&bundle, weights, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
