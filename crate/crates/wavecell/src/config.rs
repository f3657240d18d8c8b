//! Experiment configuration: a single TOML file per experiment, with
//! sections mirroring the library modules. Unknown keys are hard errors, and
//! preset parameters that do not belong to the chosen preset are rejected.

use serde::Deserialize;

use crate::entropy::BumpTestFn;
use crate::experiments::{ErrorNorm, ExperimentSpec, InitialData, MeshStrategy, SweepAxis};
use crate::jumpfield::{CoefficientPreset, KlOptions};
use crate::solver::Integrator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Solve,
    Convergence,
    TimeToError,
    Sweep,
    SampleCoefficient,
}

impl ExperimentKind {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::TimeToError => "time_to_error",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::SampleCoefficient => "sample_coefficient",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    #[serde(default)]
    domain: RawDomain,
    coefficient: RawCoefficient,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    mesh: Option<RawMesh>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: Option<RawSweep>,
    #[serde(default)]
    entropy: Option<RawEntropy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    #[serde(default)]
    name: Option<String>,
    kind: String,
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default = "default_one")]
    samples: usize,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    levels: Vec<usize>,
    #[serde(default)]
    strategies: Vec<String>,
    #[serde(default)]
    norms: Vec<String>,
    #[serde(default = "default_reference_factor")]
    reference_factor: usize,
    #[serde(default)]
    integrators: Vec<String>,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_one() -> usize {
    1
}
fn default_reference_factor() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    #[serde(default)]
    x_left: f64,
    #[serde(default = "default_x_right")]
    x_right: f64,
}

fn default_x_right() -> f64 {
    1.0
}

impl Default for RawDomain {
    fn default() -> Self {
        Self {
            x_left: 0.0,
            x_right: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficient {
    preset: String,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    jumps: Option<usize>,
    #[serde(default)]
    p1: Option<f64>,
    #[serde(default)]
    p2: Option<f64>,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    nu: Option<f64>,
    #[serde(default)]
    sigma2: Option<f64>,
    #[serde(default)]
    corr_len: Option<f64>,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    kl: Option<RawKl>,
}

#[derive(Debug, Deserialize, Default, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawKl {
    #[serde(default)]
    n_quad: Option<usize>,
    #[serde(default)]
    cutoff: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default = "default_initial_kind")]
    kind: String,
    #[serde(default)]
    kappa: Option<f64>,
    #[serde(default)]
    left: Option<f64>,
    #[serde(default)]
    right: Option<f64>,
    #[serde(default)]
    x0: Option<f64>,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
}

fn default_initial_kind() -> String {
    "sine".into()
}

impl Default for RawInitial {
    fn default() -> Self {
        Self {
            kind: "sine".into(),
            kappa: None,
            left: None,
            right: None,
            x0: None,
            value: None,
            alpha: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default = "default_cfl")]
    cfl: f64,
    #[serde(default = "default_newton_tol")]
    newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    newton_max_iter: usize,
    #[serde(default)]
    implicit_dt: Option<f64>,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_newton_tol() -> f64 {
    1e-10
}
fn default_newton_max_iter() -> usize {
    50
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            cfl: default_cfl(),
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            implicit_dt: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    #[serde(default = "default_strategy")]
    strategy: String,
    n_cells: usize,
    #[serde(default)]
    integrator: Option<String>,
}

fn default_strategy() -> String {
    "jump_adapted".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default)]
    times: Vec<f64>,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_one")]
    coefficient_samples: usize,
}

fn default_grid() -> usize {
    1024
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            grid: default_grid(),
            coefficient_samples: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntropy {
    #[serde(default = "default_alpha_count")]
    alpha_count: usize,
    #[serde(default = "default_alpha_min")]
    alpha_min: f64,
    test_functions: Vec<RawBump>,
    #[serde(default = "default_time_records")]
    time_records: usize,
}

fn default_alpha_count() -> usize {
    16
}
fn default_alpha_min() -> f64 {
    1e-3
}
fn default_time_records() -> usize {
    32
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBump {
    x0: f64,
    rx: f64,
    t0: f64,
    rt: f64,
}

/// Entropy-diagnostic options resolved from the config.
#[derive(Debug, Clone)]
pub struct EntropyOptions {
    pub alpha_count: usize,
    pub alpha_min: f64,
    pub test_functions: Vec<BumpTestFn>,
    pub time_records: usize,
}

/// Mesh options for single-solve commands.
#[derive(Debug, Clone)]
pub struct SolveMesh {
    pub strategy: MeshStrategy,
    pub n_cells: usize,
    pub integrator: Integrator,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub solve_mesh: Option<SolveMesh>,
    pub output_times: Vec<f64>,
    pub output_grid: usize,
    pub coefficient_samples: usize,
    pub sweep: Option<SweepAxis>,
    pub entropy: Option<EntropyOptions>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// The normalized TOML the run resolved to (manifest payload).
    pub resolved_toml: String,
}

/// Parse a config file with optional `key.path=value` overrides applied on
/// the raw TOML before typed validation.
pub fn load_config(path: &std::path::Path, overrides: &[(String, String)]) -> Result<ResolvedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config(&text, overrides)
}

/// Parse config text (see `load_config`).
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ResolvedConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
    for (key, value) in overrides {
        apply_override(&mut table, key, value)?;
    }
    let resolved_toml = toml::to_string_pretty(&table)
        .map_err(|e| Error::Config(format!("cannot re-serialize config: {e}")))?;
    let raw: RawConfig = table
        .try_into()
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    resolve(raw, resolved_toml)
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("invalid override key '{key}'")));
    }
    // Parse the value as a TOML literal; fall back to a plain string.
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}' crosses a non-table value")))?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn parse_strategy(s: &str) -> Result<MeshStrategy> {
    match s {
        "equidistant" => Ok(MeshStrategy::Equidistant),
        "jump_adapted" => Ok(MeshStrategy::JumpAdapted),
        "wave_cell" => Ok(MeshStrategy::WaveCell),
        other => Err(Error::Config(format!("unknown mesh strategy '{other}'"))),
    }
}

fn parse_norm(s: &str) -> Result<ErrorNorm> {
    match s {
        "l1" => Ok(ErrorNorm::L1),
        "l2" => Ok(ErrorNorm::L2),
        other => Err(Error::Config(format!("unknown error norm '{other}'"))),
    }
}

fn parse_integrator(s: &str) -> Result<Integrator> {
    match s {
        "forward_euler" => Ok(Integrator::ForwardEuler),
        "backward_euler" => Ok(Integrator::BackwardEuler),
        other => Err(Error::Config(format!("unknown integrator '{other}'"))),
    }
}

fn parse_kind(s: &str) -> Result<ExperimentKind> {
    match s {
        "solve" => Ok(ExperimentKind::Solve),
        "convergence" => Ok(ExperimentKind::Convergence),
        "time_to_error" => Ok(ExperimentKind::TimeToError),
        "sweep" => Ok(ExperimentKind::Sweep),
        "sample_coefficient" => Ok(ExperimentKind::SampleCoefficient),
        other => Err(Error::Config(format!("unknown experiment kind '{other}'"))),
    }
}

/// Build the preset from the coefficient section, rejecting parameters that
/// do not belong to the chosen preset.
fn build_preset(raw: &RawCoefficient) -> Result<CoefficientPreset> {
    let mut used: Vec<&str> = Vec::new();
    let require = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| {
            Error::Config(format!(
                "preset '{}' requires coefficient.{name}",
                raw.preset
            ))
        })
    };
    let preset = match raw.preset.as_str() {
        "alternating_exponential" => {
            used.extend(["sigma2", "corr_len"]);
            CoefficientPreset::AlternatingExponential {
                sigma2: raw.sigma2.unwrap_or(0.1),
                corr_len: raw.corr_len.unwrap_or(0.1),
            }
        }
        "poisson_sqexp" => {
            used.extend(["sigma2", "corr_len"]);
            CoefficientPreset::PoissonSquaredExp {
                sigma2: raw.sigma2.unwrap_or(0.1),
                corr_len: raw.corr_len.unwrap_or(0.1),
            }
        }
        "inclusions" => CoefficientPreset::Inclusions,
        "up_jump" => {
            used.push("delta");
            CoefficientPreset::UpJump {
                delta: require(raw.delta, "delta")?,
            }
        }
        "down_jump" => {
            used.push("delta");
            CoefficientPreset::DownJump {
                delta: require(raw.delta, "delta")?,
            }
        }
        "alternating_fixed" => {
            used.push("jumps");
            CoefficientPreset::AlternatingFixed {
                jumps: raw.jumps.ok_or_else(|| {
                    Error::Config("preset 'alternating_fixed' requires coefficient.jumps".into())
                })?,
            }
        }
        "two_level" => {
            used.extend(["p1", "p2", "width"]);
            CoefficientPreset::TwoLevel {
                p1: require(raw.p1, "p1")?,
                p2: require(raw.p2, "p2")?,
                width: raw.width.unwrap_or(0.1),
            }
        }
        "log_gaussian" => {
            used.extend(["nu", "sigma2", "corr_len"]);
            CoefficientPreset::LogGaussian {
                nu: require(raw.nu, "nu")?,
                sigma2: raw.sigma2.unwrap_or(0.1),
                corr_len: raw.corr_len.unwrap_or(0.1),
            }
        }
        "constant" => {
            used.push("value");
            CoefficientPreset::Constant {
                value: require(raw.value, "value")?,
            }
        }
        other => return Err(Error::Config(format!("unknown coefficient preset '{other}'"))),
    };

    let set_params: [(&str, bool); 9] = [
        ("delta", raw.delta.is_some()),
        ("jumps", raw.jumps.is_some()),
        ("p1", raw.p1.is_some()),
        ("p2", raw.p2.is_some()),
        ("width", raw.width.is_some()),
        ("nu", raw.nu.is_some()),
        ("sigma2", raw.sigma2.is_some()),
        ("corr_len", raw.corr_len.is_some()),
        ("value", raw.value.is_some()),
    ];
    for (name, set) in set_params {
        if set && !used.contains(&name) {
            return Err(Error::Config(format!(
                "coefficient.{name} is not a parameter of preset '{}'",
                raw.preset
            )));
        }
    }
    Ok(preset)
}

fn resolve(raw: RawConfig, resolved_toml: String) -> Result<ResolvedConfig> {
    let kind = parse_kind(&raw.experiment.kind)?;
    let preset = build_preset(&raw.coefficient)?;
    let domain = (raw.domain.x_left, raw.domain.x_right);
    if !(domain.1 > domain.0) {
        return Err(Error::Config("domain must have positive length".into()));
    }

    let initial = match raw.initial.kind.as_str() {
        "sine" => InitialData::SinePi {
            kappa: raw.initial.kappa.unwrap_or(0.3),
        },
        "riemann" => InitialData::Riemann {
            left: raw.initial.left.unwrap_or(1.0),
            right: raw.initial.right.unwrap_or(0.0),
            x0: raw.initial.x0.unwrap_or(0.25),
        },
        "constant" => InitialData::Constant {
            value: raw.initial.value.unwrap_or(0.25),
        },
        "steady_perturbed" => InitialData::SteadyStatePerturbed {
            alpha: raw.initial.alpha.unwrap_or(0.03),
            kappa: raw.initial.kappa.unwrap_or(0.2),
        },
        other => return Err(Error::Config(format!("unknown initial condition '{other}'"))),
    };

    let strategies = if raw.experiment.strategies.is_empty() {
        vec![
            MeshStrategy::Equidistant,
            MeshStrategy::JumpAdapted,
            MeshStrategy::WaveCell,
        ]
    } else {
        raw.experiment
            .strategies
            .iter()
            .map(|s| parse_strategy(s))
            .collect::<Result<_>>()?
    };
    let norms = if raw.experiment.norms.is_empty() {
        vec![ErrorNorm::L1, ErrorNorm::L2]
    } else {
        raw.experiment
            .norms
            .iter()
            .map(|s| parse_norm(s))
            .collect::<Result<_>>()?
    };
    let integrators = if raw.experiment.integrators.is_empty() {
        vec![Integrator::ForwardEuler]
    } else {
        raw.experiment
            .integrators
            .iter()
            .map(|s| parse_integrator(s))
            .collect::<Result<_>>()?
    };

    let kl = raw
        .coefficient
        .kl
        .map(|k| KlOptions {
            n_quad: k.n_quad,
            cutoff: k.cutoff,
        })
        .unwrap_or_default();

    let levels = if raw.experiment.levels.is_empty() {
        match kind {
            ExperimentKind::Solve | ExperimentKind::SampleCoefficient => vec![64],
            _ => {
                return Err(Error::Config(
                    "experiment.levels must be set for convergence studies".into(),
                ))
            }
        }
    } else {
        raw.experiment.levels.clone()
    };

    let spec = ExperimentSpec {
        preset,
        domain,
        initial,
        strategies,
        levels,
        reference_factor: raw.experiment.reference_factor,
        integrators,
        samples: raw.experiment.samples,
        master_seed: raw.experiment.master_seed,
        norms,
        t_end: raw.experiment.t_end,
        cfl: raw.solver.cfl,
        kl,
        implicit_dt: raw.solver.implicit_dt,
    };

    let solve_mesh = match &raw.mesh {
        Some(m) => Some(SolveMesh {
            strategy: parse_strategy(&m.strategy)?,
            n_cells: m.n_cells,
            integrator: m
                .integrator
                .as_deref()
                .map(parse_integrator)
                .transpose()?
                .unwrap_or(Integrator::ForwardEuler),
        }),
        None => None,
    };
    if kind == ExperimentKind::Solve && solve_mesh.is_none() {
        return Err(Error::Config(
            "a [mesh] section is required for solve experiments".into(),
        ));
    }

    let sweep = match (&raw.sweep, kind) {
        (Some(s), _) => Some(match s.axis.as_str() {
            "jump_distance" => SweepAxis::JumpDistance {
                deltas: s.values.clone(),
            },
            "jump_count" => SweepAxis::JumpCount {
                counts: s.values.iter().map(|&v| v as usize).collect(),
            },
            "matern_smoothness" => SweepAxis::MaternSmoothness {
                nus: s.values.clone(),
            },
            "correlation_length" => SweepAxis::CorrelationLength {
                lengths: s.values.clone(),
            },
            other => return Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }),
        (None, ExperimentKind::Sweep) => {
            return Err(Error::Config(
                "a [sweep] section is required for sweep experiments".into(),
            ))
        }
        (None, _) => None,
    };

    let entropy = match &raw.entropy {
        Some(e) => {
            let mut fns = Vec::new();
            for (i, b) in e.test_functions.iter().enumerate() {
                fns.push(BumpTestFn::new(b.x0, b.rx, b.t0, b.rt, format!("bump{i}"))?);
            }
            if fns.is_empty() {
                return Err(Error::Config(
                    "entropy.test_functions must not be empty".into(),
                ));
            }
            Some(EntropyOptions {
                alpha_count: e.alpha_count,
                alpha_min: e.alpha_min,
                test_functions: fns,
                time_records: e.time_records.max(2),
            })
        }
        None => None,
    };

    let name = raw
        .experiment
        .name
        .clone()
        .unwrap_or_else(|| format!("{}_{}", raw.coefficient.preset, kind.id()));

    Ok(ResolvedConfig {
        name,
        kind,
        spec,
        solve_mesh,
        output_times: raw.output.times.clone(),
        output_grid: raw.output.grid,
        coefficient_samples: raw.output.coefficient_samples,
        sweep,
        entropy,
        newton_tol: raw.solver.newton_tol,
        newton_max_iter: raw.solver.newton_max_iter,
        resolved_toml,
    })
}
