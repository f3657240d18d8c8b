//! Monte Carlo experiment driver: pathwise strong-error convergence studies,
//! explicit-vs-implicit time-to-error runs and parameter sweeps.
//!
//! One coefficient realization per sample drives every meshing strategy and
//! refinement level of that sample, so error differences isolate the
//! discretization. The reference solution is computed with the wave-cell
//! method on a grid `reference_factor` times finer than the largest level.
//! Samples run concurrently; results are merged by sample index, so the
//! output is independent of scheduling.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::jumpfield::{CoefficientPreset, KlOptions, PresetSampler};
use crate::mesh::{build_equidistant, build_jump_adapted, refine_wave_cells, Mesh};
use crate::solver::{solve, FluxModel, Integrator, Solution, SolverConfig};
use crate::{Error, Result};

/// Meshing strategies compared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshStrategy {
    Equidistant,
    JumpAdapted,
    WaveCell,
}

impl MeshStrategy {
    pub fn id(&self) -> &'static str {
        match self {
            MeshStrategy::Equidistant => "equidistant",
            MeshStrategy::JumpAdapted => "jump_adapted",
            MeshStrategy::WaveCell => "wave_cell",
        }
    }

    pub fn build(&self, domain: (f64, f64), n_target: usize, jumps: &[f64]) -> Result<Mesh> {
        match self {
            MeshStrategy::Equidistant => build_equidistant(domain, n_target),
            MeshStrategy::JumpAdapted => build_jump_adapted(domain, n_target, jumps),
            MeshStrategy::WaveCell => {
                Ok(refine_wave_cells(&build_jump_adapted(domain, n_target, jumps)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    L1,
    L2,
}

impl ErrorNorm {
    pub fn id(&self) -> &'static str {
        match self {
            ErrorNorm::L1 => "l1",
            ErrorNorm::L2 => "l2",
        }
    }
}

/// Initial data families used by the studies.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// u₀(x) = κ sin(πx).
    SinePi { kappa: f64 },
    /// Piecewise constant: `left` for x < x0, `right` beyond.
    Riemann { left: f64, right: f64, x0: f64 },
    /// Spatially constant data u₀ ≡ value (drives pure standing-wave
    /// solutions).
    Constant { value: f64 },
    /// The flux-level-α standing profile √(2α/a(x)) modulated by a smooth
    /// periodic perturbation 1 + κ sin(2πx); isolates how well a mesh carries
    /// the standing waves of the sampled coefficient.
    SteadyStatePerturbed { alpha: f64, kappa: f64 },
}

impl InitialData {
    /// Materialize the initial condition for one coefficient realization.
    pub fn to_fn(
        &self,
        coefficient: &Arc<crate::jumpfield::SampledCoefficient>,
    ) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
        match *self {
            InitialData::SinePi { kappa } => {
                Box::new(move |x| kappa * (std::f64::consts::PI * x).sin())
            }
            InitialData::Riemann { left, right, x0 } => {
                Box::new(move |x| if x < x0 { left } else { right })
            }
            InitialData::Constant { value } => Box::new(move |_| value),
            InitialData::SteadyStatePerturbed { alpha, kappa } => {
                let coefficient = Arc::clone(coefficient);
                Box::new(move |x| {
                    let a = coefficient.eval(x).unwrap_or(f64::NAN);
                    (2.0 * alpha / a).sqrt()
                        * (1.0 + kappa * (2.0 * std::f64::consts::PI * x).sin())
                })
            }
        }
    }
}

/// Full description of a Monte Carlo convergence experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub preset: CoefficientPreset,
    pub domain: (f64, f64),
    pub initial: InitialData,
    pub strategies: Vec<MeshStrategy>,
    /// Strictly increasing target cell counts.
    pub levels: Vec<usize>,
    /// Reference grid refinement over the finest level; at least 4.
    pub reference_factor: usize,
    pub integrators: Vec<Integrator>,
    pub samples: usize,
    pub master_seed: u64,
    pub norms: Vec<ErrorNorm>,
    pub t_end: f64,
    pub cfl: f64,
    pub kl: KlOptions,
    /// Fixed implicit step; `None` means one cell per step.
    pub implicit_dt: Option<f64>,
}

impl ExperimentSpec {
    pub fn new(preset: CoefficientPreset, initial: InitialData, levels: Vec<usize>) -> Self {
        Self {
            preset,
            domain: (0.0, 1.0),
            initial,
            strategies: vec![
                MeshStrategy::Equidistant,
                MeshStrategy::JumpAdapted,
                MeshStrategy::WaveCell,
            ],
            levels,
            reference_factor: 4,
            integrators: vec![Integrator::ForwardEuler],
            samples: 1,
            master_seed: 0,
            norms: vec![ErrorNorm::L1, ErrorNorm::L2],
            t_end: 1.0,
            cfl: 0.9,
            kl: KlOptions::default(),
            implicit_dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "refinement levels must be nonempty and strictly increasing".into(),
            ));
        }
        if self.reference_factor < 4 {
            return Err(Error::InvalidParameter(format!(
                "reference factor must be at least 4, got {}",
                self.reference_factor
            )));
        }
        if self.samples == 0 || self.strategies.is_empty() || self.integrators.is_empty() {
            return Err(Error::InvalidParameter(
                "samples, strategies and integrators must be nonempty".into(),
            ));
        }
        if self.norms.is_empty() {
            return Err(Error::InvalidParameter("error norms must be nonempty".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter("t_end must be positive".into()));
        }
        Ok(())
    }
}

/// Exact cell-average restriction of a fine-grid state onto a coarse mesh
/// sharing the same domain; meshes need not be nested.
pub fn restrict_reference(fine_mesh: &Mesh, fine_state: &[f64], coarse_mesh: &Mesh) -> Vec<f64> {
    let fi = fine_mesh.interfaces();
    let nf = fine_mesh.n_cells();
    let mut out = Vec::with_capacity(coarse_mesh.n_cells());
    let mut j = 0usize;
    for k in 0..coarse_mesh.n_cells() {
        let l = coarse_mesh.interfaces()[k];
        let r = coarse_mesh.interfaces()[k + 1];
        while j < nf && fi[j + 1] <= l {
            j += 1;
        }
        let mut acc = 0.0;
        let mut jj = j;
        while jj < nf && fi[jj] < r {
            let overlap = fi[jj + 1].min(r) - fi[jj].max(l);
            if overlap > 0.0 {
                acc += overlap * fine_state[jj];
            }
            if fi[jj + 1] >= r {
                break;
            }
            jj += 1;
        }
        out.push(acc / (r - l));
        j = jj;
    }
    out
}

/// Pathwise strong error at time `t`: restrict the reference onto the coarse
/// mesh and take the discrete L1 or L2 norm of the difference.
pub fn strong_error(reference: &Solution, approx: &Solution, norm: ErrorNorm, t: f64) -> Result<f64> {
    let ref_state = reference.state_at(t).ok_or_else(|| {
        Error::InvalidParameter(format!("reference has no recorded state at t = {t}"))
    })?;
    let state = approx.state_at(t).ok_or_else(|| {
        Error::InvalidParameter(format!("approximation has no recorded state at t = {t}"))
    })?;
    let restricted = restrict_reference(&reference.mesh, ref_state, &approx.mesh);
    Ok(state_error(&restricted, state, &approx.mesh, norm))
}

fn state_error(a: &[f64], b: &[f64], mesh: &Mesh, norm: ErrorNorm) -> f64 {
    match norm {
        ErrorNorm::L1 => a
            .iter()
            .zip(b)
            .zip(mesh.cell_sizes())
            .map(|((x, y), dx)| (x - y).abs() * dx)
            .sum(),
        ErrorNorm::L2 => a
            .iter()
            .zip(b)
            .zip(mesh.cell_sizes())
            .map(|((x, y), dx)| (x - y) * (x - y) * dx)
            .sum::<f64>()
            .sqrt(),
    }
}

/// Least-squares slope of log(error) against log(h); `NaN` when fewer than
/// two usable points remain.
pub fn fit_rate(hs: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0 && e.is_finite())
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return f64::NAN;
    }
    (n * sxy - sx * sy) / denom
}

/// One solve's record in a convergence study.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub sample: usize,
    pub integrator: Integrator,
    pub strategy: MeshStrategy,
    pub n_x: usize,
    pub n_cells: usize,
    pub min_h: f64,
    pub l1: f64,
    pub l2: f64,
    pub wallclock_s: f64,
}

/// Per-sample fitted convergence rate.
#[derive(Debug, Clone)]
pub struct RateRecord {
    pub sample: usize,
    pub integrator: Integrator,
    pub strategy: MeshStrategy,
    pub norm: ErrorNorm,
    pub rate: f64,
}

/// Aggregated results of a convergence or time-to-error experiment.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub levels: Vec<usize>,
    pub strategies: Vec<MeshStrategy>,
    pub integrators: Vec<Integrator>,
    pub norms: Vec<ErrorNorm>,
    pub domain_length: f64,
    pub records: Vec<SampleRecord>,
    pub rates: Vec<RateRecord>,
    /// Failed samples with their error message; excluded from the records.
    pub failures: Vec<(usize, String)>,
}

impl ConvergenceReport {
    pub fn errors_for(
        &self,
        integrator: Integrator,
        strategy: MeshStrategy,
        n_x: usize,
        norm: ErrorNorm,
    ) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.integrator == integrator && r.strategy == strategy && r.n_x == n_x)
            .map(|r| match norm {
                ErrorNorm::L1 => r.l1,
                ErrorNorm::L2 => r.l2,
            })
            .collect()
    }

    /// Mean error with its standard error over samples.
    pub fn mean_error(
        &self,
        integrator: Integrator,
        strategy: MeshStrategy,
        n_x: usize,
        norm: ErrorNorm,
    ) -> Option<(f64, f64, usize)> {
        let errors = self.errors_for(integrator, strategy, n_x, norm);
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(((mean), (var / n).sqrt(), errors.len()))
    }

    pub fn rates_for(
        &self,
        integrator: Integrator,
        strategy: MeshStrategy,
        norm: ErrorNorm,
    ) -> Vec<f64> {
        self.rates
            .iter()
            .filter(|r| {
                r.integrator == integrator
                    && r.strategy == strategy
                    && r.norm == norm
                    && r.rate.is_finite()
            })
            .map(|r| r.rate)
            .collect()
    }

    pub fn median_rate(
        &self,
        integrator: Integrator,
        strategy: MeshStrategy,
        norm: ErrorNorm,
    ) -> Option<f64> {
        let mut rates = self.rates_for(integrator, strategy, norm);
        if rates.is_empty() {
            return None;
        }
        rates.sort_by(|a, b| a.total_cmp(b));
        let n = rates.len();
        Some(if n % 2 == 1 {
            rates[n / 2]
        } else {
            0.5 * (rates[n / 2 - 1] + rates[n / 2])
        })
    }

    pub fn mean_rate(
        &self,
        integrator: Integrator,
        strategy: MeshStrategy,
        norm: ErrorNorm,
    ) -> Option<f64> {
        let rates = self.rates_for(integrator, strategy, norm);
        if rates.is_empty() {
            return None;
        }
        Some(rates.iter().sum::<f64>() / rates.len() as f64)
    }

    /// Write the report as CSV files into `dir`.
    ///
    /// `errors.csv`, `rates.csv` and `summary.csv` are byte-reproducible for
    /// a fixed spec and seed; `timings.csv` and `time_to_error.csv` carry
    /// wall-clock columns and are not.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut errors = String::from("sample,integrator,strategy,n_x,n_cells,min_h,l1,l2\n");
        let mut timings = String::from("sample,integrator,strategy,n_x,wallclock_s\n");
        let mut tte = String::from("sample,integrator,strategy,n_x,l1,l2,wallclock_s\n");
        for r in &self.records {
            errors.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.sample,
                r.integrator.id(),
                r.strategy.id(),
                r.n_x,
                r.n_cells,
                r.min_h,
                r.l1,
                r.l2
            ));
            timings.push_str(&format!(
                "{},{},{},{},{}\n",
                r.sample,
                r.integrator.id(),
                r.strategy.id(),
                r.n_x,
                r.wallclock_s
            ));
            tte.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.sample,
                r.integrator.id(),
                r.strategy.id(),
                r.n_x,
                r.l1,
                r.l2,
                r.wallclock_s
            ));
        }
        write_file(&dir.join("errors.csv"), &errors)?;
        write_file(&dir.join("timings.csv"), &timings)?;
        write_file(&dir.join("time_to_error.csv"), &tte)?;

        let mut rates = String::from("sample,integrator,strategy,norm,rate\n");
        for r in &self.rates {
            rates.push_str(&format!(
                "{},{},{},{},{}\n",
                r.sample,
                r.integrator.id(),
                r.strategy.id(),
                r.norm.id(),
                r.rate
            ));
        }
        write_file(&dir.join("rates.csv"), &rates)?;

        let mut summary = String::from("stat,integrator,strategy,norm,n_x,value,std_error,count\n");
        for &integrator in &self.integrators {
            for &strategy in &self.strategies {
                for &norm in &self.norms {
                    for &n_x in &self.levels {
                        if let Some((mean, se, count)) =
                            self.mean_error(integrator, strategy, n_x, norm)
                        {
                            summary.push_str(&format!(
                                "mean_error,{},{},{},{},{},{},{}\n",
                                integrator.id(),
                                strategy.id(),
                                norm.id(),
                                n_x,
                                mean,
                                se,
                                count
                            ));
                        }
                    }
                    if let Some(mean) = self.mean_rate(integrator, strategy, norm) {
                        let count = self.rates_for(integrator, strategy, norm).len();
                        summary.push_str(&format!(
                            "mean_rate,{},{},{},,{},,{}\n",
                            integrator.id(),
                            strategy.id(),
                            norm.id(),
                            mean,
                            count
                        ));
                    }
                    if let Some(median) = self.median_rate(integrator, strategy, norm) {
                        let count = self.rates_for(integrator, strategy, norm).len();
                        summary.push_str(&format!(
                            "median_rate,{},{},{},,{},,{}\n",
                            integrator.id(),
                            strategy.id(),
                            norm.id(),
                            median,
                            count
                        ));
                    }
                }
            }
        }
        write_file(&dir.join("summary.csv"), &summary)?;

        if !self.failures.is_empty() {
            let mut failures = String::from("sample,message\n");
            for (s, msg) in &self.failures {
                failures.push_str(&format!("{},{}\n", s, msg.replace([',', '\n'], ";")));
            }
            write_file(&dir.join("failures.csv"), &failures)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

type SampleOutcome = (Vec<SampleRecord>, Vec<RateRecord>);

/// Run the pathwise convergence study described by `spec`.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let sampler = PresetSampler::with_kl_options(spec.preset.clone(), spec.domain, spec.kl)?;

    let outcomes: Vec<(usize, std::result::Result<SampleOutcome, String>)> = (0..spec.samples)
        .into_par_iter()
        .map(|idx| {
            let outcome = run_sample(spec, &sampler, idx).map_err(|e| e.to_string());
            (idx, outcome)
        })
        .collect();

    let mut records = Vec::new();
    let mut rates = Vec::new();
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes {
        match outcome {
            Ok((mut recs, mut rts)) => {
                records.append(&mut recs);
                rates.append(&mut rts);
            }
            Err(msg) => failures.push((idx, msg)),
        }
    }

    Ok(ConvergenceReport {
        levels: spec.levels.clone(),
        strategies: spec.strategies.clone(),
        integrators: spec.integrators.clone(),
        norms: spec.norms.clone(),
        domain_length: spec.domain.1 - spec.domain.0,
        records,
        rates,
        failures,
    })
}

fn run_sample(spec: &ExperimentSpec, sampler: &PresetSampler, idx: usize) -> Result<SampleOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed.wrapping_add(idx as u64));
    let coefficient = Arc::new(sampler.sample(&mut rng)?);
    let model = FluxModel::burgers(Arc::clone(&coefficient));
    let jumps = coefficient.discontinuities().to_vec();
    let u0 = spec.initial.to_fn(&coefficient);

    let max_level = *spec.levels.last().unwrap();
    let ref_mesh = refine_wave_cells(&build_jump_adapted(
        spec.domain,
        spec.reference_factor * max_level,
        &jumps,
    )?);
    let ref_config = SolverConfig {
        integrator: Integrator::ForwardEuler,
        cfl_number: spec.cfl,
        t_end: spec.t_end,
        record_mass_trace: false,
        ..Default::default()
    };
    let reference = solve(&model, &ref_mesh, &u0, &ref_config)?;

    let mut records = Vec::new();
    let mut rates = Vec::new();
    for &integrator in &spec.integrators {
        for &strategy in &spec.strategies {
            let mut hs = Vec::with_capacity(spec.levels.len());
            let mut l1s = Vec::with_capacity(spec.levels.len());
            let mut l2s = Vec::with_capacity(spec.levels.len());
            for &n_x in &spec.levels {
                let mesh = strategy.build(spec.domain, n_x, &jumps)?;
                let config = SolverConfig {
                    integrator,
                    cfl_number: spec.cfl,
                    t_end: spec.t_end,
                    implicit_dt: spec.implicit_dt,
                    record_mass_trace: false,
                    ..Default::default()
                };
                let started = Instant::now();
                let sol = solve(&model, &mesh, &u0, &config)?;
                let wallclock_s = started.elapsed().as_secs_f64();
                let l1 = strong_error(&reference, &sol, ErrorNorm::L1, spec.t_end)?;
                let l2 = strong_error(&reference, &sol, ErrorNorm::L2, spec.t_end)?;
                hs.push((spec.domain.1 - spec.domain.0) / n_x as f64);
                l1s.push(l1);
                l2s.push(l2);
                records.push(SampleRecord {
                    sample: idx,
                    integrator,
                    strategy,
                    n_x,
                    n_cells: mesh.n_cells(),
                    min_h: mesh.min_h(),
                    l1,
                    l2,
                    wallclock_s,
                });
            }
            for &norm in &spec.norms {
                let errs = match norm {
                    ErrorNorm::L1 => &l1s,
                    ErrorNorm::L2 => &l2s,
                };
                rates.push(RateRecord {
                    sample: idx,
                    integrator,
                    strategy,
                    norm,
                    rate: fit_rate(&hs, errs),
                });
            }
        }
    }
    Ok((records, rates))
}

/// Convergence study with both integrators, producing the time-to-error data
/// of the explicit/implicit comparison (the report's `time_to_error.csv`).
pub fn run_time_to_error(spec: &ExperimentSpec) -> Result<ConvergenceReport> {
    let mut spec = spec.clone();
    if !spec.integrators.contains(&Integrator::ForwardEuler) {
        spec.integrators.push(Integrator::ForwardEuler);
    }
    if !spec.integrators.contains(&Integrator::BackwardEuler) {
        spec.integrators.push(Integrator::BackwardEuler);
    }
    run_convergence(&spec)
}

/// Parameter axes of the sweep studies.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    /// Jump-window sizes δ for the up/down single-window coefficients.
    JumpDistance { deltas: Vec<f64> },
    /// Jump counts τ for the fixed alternating coefficient.
    JumpCount { counts: Vec<usize> },
    /// Matérn smoothness values (log-Gaussian coefficient).
    MaternSmoothness { nus: Vec<f64> },
    /// Correlation lengths (log-Gaussian coefficient).
    CorrelationLength { lengths: Vec<f64> },
}

/// One sweep entry: the axis value, a label for file naming, and the report.
pub struct SweepEntry {
    pub label: String,
    pub value: f64,
    pub report: ConvergenceReport,
}

/// Run the convergence study across one parameter axis, deriving the
/// coefficient preset of each entry from the base spec.
pub fn run_parameter_sweep(axis: &SweepAxis, base: &ExperimentSpec) -> Result<Vec<SweepEntry>> {
    let mut entries = Vec::new();
    match axis {
        SweepAxis::JumpDistance { deltas } => {
            for &delta in deltas {
                let mut spec = base.clone();
                spec.preset = match &base.preset {
                    CoefficientPreset::UpJump { .. } => CoefficientPreset::UpJump { delta },
                    CoefficientPreset::DownJump { .. } => CoefficientPreset::DownJump { delta },
                    // The two-level coefficient's jump distance is its window
                    // width.
                    CoefficientPreset::TwoLevel { p1, p2, .. } => CoefficientPreset::TwoLevel {
                        p1: *p1,
                        p2: *p2,
                        width: delta,
                    },
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "jump-distance sweep needs an up_jump, down_jump or two_level base, got {}",
                            other.id()
                        )))
                    }
                };
                entries.push(SweepEntry {
                    label: format!("delta={delta}"),
                    value: delta,
                    report: run_convergence(&spec)?,
                });
            }
        }
        SweepAxis::JumpCount { counts } => {
            for &count in counts {
                let mut spec = base.clone();
                spec.preset = match &base.preset {
                    CoefficientPreset::AlternatingFixed { .. } => {
                        CoefficientPreset::AlternatingFixed { jumps: count }
                    }
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "jump-count sweep needs an alternating_fixed base, got {}",
                            other.id()
                        )))
                    }
                };
                entries.push(SweepEntry {
                    label: format!("jumps={count}"),
                    value: count as f64,
                    report: run_convergence(&spec)?,
                });
            }
        }
        SweepAxis::MaternSmoothness { nus } => {
            for &nu in nus {
                let mut spec = base.clone();
                spec.preset = match &base.preset {
                    CoefficientPreset::LogGaussian {
                        sigma2, corr_len, ..
                    } => CoefficientPreset::LogGaussian {
                        nu,
                        sigma2: *sigma2,
                        corr_len: *corr_len,
                    },
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "smoothness sweep needs a log_gaussian base, got {}",
                            other.id()
                        )))
                    }
                };
                entries.push(SweepEntry {
                    label: format!("nu={nu}"),
                    value: nu,
                    report: run_convergence(&spec)?,
                });
            }
        }
        SweepAxis::CorrelationLength { lengths } => {
            for &len in lengths {
                let mut spec = base.clone();
                spec.preset = match &base.preset {
                    CoefficientPreset::LogGaussian { nu, sigma2, .. } => {
                        CoefficientPreset::LogGaussian {
                            nu: *nu,
                            sigma2: *sigma2,
                            corr_len: len,
                        }
                    }
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "correlation-length sweep needs a log_gaussian base, got {}",
                            other.id()
                        )))
                    }
                };
                entries.push(SweepEntry {
                    label: format!("rho={len}"),
                    value: len,
                    report: run_convergence(&spec)?,
                });
            }
        }
    }
    Ok(entries)
}
