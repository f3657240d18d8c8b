//! Experiment command-line front end: parses a TOML experiment config,
//! dispatches the solver/experiment drivers and manages output directories.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wavecell::config::{load_config, EntropyOptions, ExperimentKind, ResolvedConfig};
use wavecell::entropy::{alpha_grid, entropy_functional_discrete, Branch, SteadyState};
use wavecell::experiments::{run_convergence, run_parameter_sweep, run_time_to_error};
use wavecell::jumpfield::PresetSampler;
use wavecell::solver::{solve, FluxModel, Solution, SolverConfig};

#[derive(Parser)]
#[command(
    name = "wavecell",
    version,
    about = "Finite-volume experiments for conservation laws with random discontinuous coefficients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-sample solve with snapshot CSVs.
    Solve(RunArgs),
    /// Monte Carlo convergence / time-to-error study.
    Convergence(RunArgs),
    /// Parameter sweep across one axis.
    Sweep(RunArgs),
    /// Emit coefficient realizations on a plotting grid.
    SampleCoefficient(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $WAVECELL_OUT/<name> or ./out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Allow overwriting a completed run in the output directory.
    #[arg(long)]
    force: bool,
    /// Config override `section.key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run("solve", args, cmd_solve),
        Command::Convergence(args) => run("convergence", args, cmd_convergence),
        Command::Sweep(args) => run("sweep", args, cmd_sweep),
        Command::SampleCoefficient(args) => run("sample-coefficient", args, cmd_sample_coefficient),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(
    command: &str,
    args: RunArgs,
    body: fn(&ResolvedConfig, &Path) -> Result<Vec<(String, String)>>,
) -> Result<()> {
    let mut overrides: Vec<(String, String)> = Vec::new();
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("override '{s}' is not of the form key=value"))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("experiment.master_seed".into(), seed.to_string()));
    }
    let config = load_config(&args.config, &overrides)?;

    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool already initialized")?;
    }

    let out_dir = match args.out {
        Some(dir) => dir,
        None => match std::env::var_os("WAVECELL_OUT") {
            Some(root) => PathBuf::from(root).join(&config.name),
            None => PathBuf::from("out").join(&config.name),
        },
    };
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let manifest_path = out_dir.join("manifest.toml");
    if manifest_path.exists() && !args.force {
        let existing = std::fs::read_to_string(&manifest_path).unwrap_or_default();
        if existing.contains("status = \"complete\"") {
            bail!(
                "output directory {} holds a completed run; pass --force to overwrite",
                out_dir.display()
            );
        }
    }
    write_manifest(&manifest_path, command, &config, "running", &[])?;

    let results = body(&config, &out_dir)?;
    write_manifest(&manifest_path, command, &config, "complete", &results)?;
    println!("done: outputs in {}", out_dir.display());
    Ok(())
}

fn write_manifest(
    path: &Path,
    command: &str,
    config: &ResolvedConfig,
    status: &str,
    results: &[(String, String)],
) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("status = \"{status}\"\n"));
    text.push_str(&format!("command = \"{command}\"\n"));
    text.push_str(&format!("name = \"{}\"\n", config.name));
    text.push_str(&format!("master_seed = {}\n", config.spec.master_seed));
    for (k, v) in results {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str("\nconfig = '''\n");
    text.push_str(&config.resolved_toml);
    text.push_str("'''\n");
    std::fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn sample_coefficient_at(
    config: &ResolvedConfig,
    sample_index: u64,
) -> Result<(PresetSampler, Arc<wavecell::jumpfield::SampledCoefficient>)> {
    use rand::SeedableRng;
    let sampler = PresetSampler::with_kl_options(
        config.spec.preset.clone(),
        config.spec.domain,
        config.spec.kl,
    )?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
        config.spec.master_seed.wrapping_add(sample_index),
    );
    let coefficient = Arc::new(sampler.sample(&mut rng)?);
    Ok((sampler, coefficient))
}

fn plotting_grid(domain: (f64, f64), n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| domain.0 + (domain.1 - domain.0) * k as f64 / n as f64)
        .collect()
}

fn coefficient_csv(
    coefficient: &wavecell::jumpfield::SampledCoefficient,
    grid: &[f64],
) -> Result<String> {
    let mut csv = String::from("x,a\n");
    for &x in grid {
        csv.push_str(&format!("{},{}\n", x, coefficient.eval(x)?));
    }
    Ok(csv)
}

fn eigenvalues_csv(sampler: &PresetSampler) -> Option<String> {
    sampler.kl_basis().map(|basis| {
        let mut csv = String::from("index,eigenvalue\n");
        for (i, ev) in basis.eigenvalues().iter().enumerate() {
            csv.push_str(&format!("{},{}\n", i + 1, ev));
        }
        csv
    })
}

fn cmd_solve(config: &ResolvedConfig, out: &Path) -> Result<Vec<(String, String)>> {
    if !matches!(config.kind, ExperimentKind::Solve) {
        bail!("config declares kind '{}', expected 'solve'", config.kind.id());
    }
    let mesh_cfg = config
        .solve_mesh
        .as_ref()
        .expect("validated solve config has a mesh section");
    let (sampler, coefficient) = sample_coefficient_at(config, 0)?;
    let mesh = mesh_cfg.strategy.build(
        config.spec.domain,
        mesh_cfg.n_cells,
        coefficient.discontinuities(),
    )?;
    let model = FluxModel::burgers(Arc::clone(&coefficient));

    let mut output_times = config.output_times.clone();
    if let Some(entropy) = &config.entropy {
        let k = entropy.time_records;
        output_times
            .extend((1..k).map(|i| config.spec.t_end * i as f64 / k as f64));
    }
    let solver_config = SolverConfig {
        integrator: mesh_cfg.integrator,
        cfl_number: config.spec.cfl,
        t_end: config.spec.t_end,
        newton_tol: config.newton_tol,
        newton_max_iter: config.newton_max_iter,
        implicit_dt: config.spec.implicit_dt,
        output_times,
        ..Default::default()
    };
    let u0 = config.spec.initial.to_fn(&coefficient);
    let solution = solve(&model, &mesh, &u0, &solver_config)?;

    // Snapshots: one CSV of cell centers per recorded time.
    let mut index = String::from("index,time,file\n");
    for (k, t) in solution.times.iter().enumerate() {
        let file = format!("snapshot_{k:03}.csv");
        let mut csv = String::from("x,u\n");
        for i in 0..mesh.n_cells() {
            csv.push_str(&format!("{},{}\n", mesh.cell_center(i), solution.states[k][i]));
        }
        write_csv(&out.join(&file), &csv)?;
        index.push_str(&format!("{k},{t},{file}\n"));
    }
    write_csv(&out.join("snapshots.csv"), &index)?;

    let mut mass = String::from("step,t,mass\n");
    for (step, (t, m)) in solution.total_mass_trace.iter().enumerate() {
        mass.push_str(&format!("{step},{t},{m}\n"));
    }
    write_csv(&out.join("mass_trace.csv"), &mass)?;

    let grid = plotting_grid(config.spec.domain, config.output_grid);
    write_csv(&out.join("coefficient.csv"), &coefficient_csv(&coefficient, &grid)?)?;
    if let Some(csv) = eigenvalues_csv(&sampler) {
        write_csv(&out.join("eigenvalues.csv"), &csv)?;
    }

    let mut mesh_csv = String::from("interface,flagged\n");
    for (i, x) in mesh.interfaces().iter().enumerate() {
        let flagged = mesh.flagged_interfaces().contains(&i) as u8;
        mesh_csv.push_str(&format!("{x},{flagged}\n"));
    }
    write_csv(&out.join("mesh.csv"), &mesh_csv)?;

    if let Some(entropy) = &config.entropy {
        let csv = entropy_report(&solution, &model, entropy, mesh_cfg.n_cells)?;
        write_csv(&out.join("entropy.csv"), &csv)?;
    }

    Ok(vec![
        ("result_steps".into(), solution.steps.to_string()),
        ("result_flux_bound".into(), format!("{}", solution.flux_bound)),
        (
            "result_max_mass_drift".into(),
            format!("{}", solution.max_mass_drift()),
        ),
    ])
}

fn entropy_report(
    solution: &Solution,
    model: &FluxModel,
    options: &EntropyOptions,
    n_x: usize,
) -> Result<String> {
    let max_u = solution
        .states
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, &u| m.max(u.abs()));
    let a_sup = match model {
        FluxModel::MultiplicativeConvex { coefficient, .. } => coefficient.upper_bound(),
        FluxModel::General { .. } => 1.0,
    };
    let hi = (a_sup * max_u * max_u / 2.0).max(options.alpha_min * 10.0);
    let alphas = alpha_grid(options.alpha_min, hi, options.alpha_count)?;
    let mut csv = String::from("alpha,test_fn,j_alpha,n_x\n");
    for &alpha in &alphas {
        let steady = SteadyState::new(model.clone(), alpha, Branch::Plus)?;
        for phi in &options.test_functions {
            let j = entropy_functional_discrete(solution, &steady, phi)?;
            csv.push_str(&format!("{alpha},{},{j},{n_x}\n", phi.id));
        }
    }
    Ok(csv)
}

fn cmd_convergence(config: &ResolvedConfig, out: &Path) -> Result<Vec<(String, String)>> {
    let report = match config.kind {
        ExperimentKind::Convergence => run_convergence(&config.spec)?,
        ExperimentKind::TimeToError => run_time_to_error(&config.spec)?,
        other => bail!(
            "config declares kind '{}', expected 'convergence' or 'time_to_error'",
            other.id()
        ),
    };
    if !report.failures.is_empty() {
        eprintln!(
            "warning: {} of {} samples failed and were excluded (see failures.csv)",
            report.failures.len(),
            config.spec.samples
        );
    }
    report.write_csvs(out)?;
    Ok(vec![
        ("result_samples_ok".into(), (config.spec.samples - report.failures.len()).to_string()),
        ("result_samples_failed".into(), report.failures.len().to_string()),
    ])
}

fn cmd_sweep(config: &ResolvedConfig, out: &Path) -> Result<Vec<(String, String)>> {
    if !matches!(config.kind, ExperimentKind::Sweep) {
        bail!("config declares kind '{}', expected 'sweep'", config.kind.id());
    }
    let axis = config.sweep.as_ref().expect("validated sweep config");
    let entries = run_parameter_sweep(axis, &config.spec)?;
    let mut summary =
        String::from("axis_value,integrator,strategy,norm,mean_rate,median_rate,samples_ok\n");
    let mut failed_total = 0usize;
    for entry in &entries {
        let dir_name: String = entry
            .label
            .replace('=', "_")
            .replace('.', "p")
            .replace(['/', '\\'], "_");
        entry.report.write_csvs(&out.join(&dir_name))?;
        failed_total += entry.report.failures.len();
        for &integrator in &entry.report.integrators {
            for &strategy in &entry.report.strategies {
                for &norm in &entry.report.norms {
                    let mean = entry.report.mean_rate(integrator, strategy, norm);
                    let median = entry.report.median_rate(integrator, strategy, norm);
                    if let (Some(mean), Some(median)) = (mean, median) {
                        summary.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            entry.value,
                            integrator.id(),
                            strategy.id(),
                            norm.id(),
                            mean,
                            median,
                            entry.report.rates_for(integrator, strategy, norm).len()
                        ));
                    }
                }
            }
        }
    }
    write_csv(&out.join("sweep_summary.csv"), &summary)?;
    if failed_total > 0 {
        eprintln!("warning: {failed_total} sample(s) failed across the sweep");
    }
    Ok(vec![(
        "result_entries".into(),
        entries.len().to_string(),
    )])
}

fn cmd_sample_coefficient(config: &ResolvedConfig, out: &Path) -> Result<Vec<(String, String)>> {
    if !matches!(config.kind, ExperimentKind::SampleCoefficient) {
        bail!(
            "config declares kind '{}', expected 'sample_coefficient'",
            config.kind.id()
        );
    }
    let grid = plotting_grid(config.spec.domain, config.output_grid);
    let mut sampler_for_eigen = None;
    for k in 0..config.coefficient_samples {
        let (sampler, coefficient) = sample_coefficient_at(config, k as u64)?;
        write_csv(
            &out.join(format!("coefficient_{k:03}.csv")),
            &coefficient_csv(&coefficient, &grid)?,
        )?;
        sampler_for_eigen = Some(sampler);
    }
    if let Some(sampler) = &sampler_for_eigen {
        if let Some(csv) = eigenvalues_csv(sampler) {
            write_csv(&out.join("eigenvalues.csv"), &csv)?;
        }
    }
    Ok(vec![(
        "result_realizations".into(),
        config.coefficient_samples.to_string(),
    )])
}
