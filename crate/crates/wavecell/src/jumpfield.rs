//! Piecewise-constant jump fields on random partitions and the composite
//! coefficient `a(ω, x) = ā(x) + φ(W(ω, x)) + P(ω, x)`.
//!
//! At a breakpoint the coefficient takes its right limit; the finite-volume
//! scheme only reads values at cell centers, so the convention never touches
//! a cell average.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, Uniform};

use crate::randfield::{kl_sample, nystrom_eigenpairs, CovarianceSpec, KLBasis, KLRealization};
use crate::{Error, Result};

/// Minimum gap between partition breakpoints; narrower slivers are merged.
const MIN_BREAKPOINT_GAP: f64 = 1e-12;

/// Grid resolution used to cache the coefficient bounds a₋, a₊.
const BOUND_SCAN_POINTS: usize = 10_000;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Strictly increasing interior breakpoints of a random partition of the
/// domain.
#[derive(Debug, Clone)]
pub struct Partition {
    domain: (f64, f64),
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(domain: (f64, f64), mut breakpoints: Vec<f64>) -> Result<Self> {
        if !(domain.1 - domain.0 > 0.0) {
            return Err(Error::InvalidParameter(
                "partition domain must have positive length".into(),
            ));
        }
        breakpoints.sort_by(|a, b| a.total_cmp(b));
        for &b in &breakpoints {
            if !b.is_finite() || b <= domain.0 || b >= domain.1 {
                return Err(Error::InvalidParameter(format!(
                    "breakpoint {b} outside the open domain ({}, {})",
                    domain.0, domain.1
                )));
            }
        }
        // Merge near-duplicates instead of keeping degenerate cells.
        let mut dedup: Vec<f64> = Vec::with_capacity(breakpoints.len());
        for b in breakpoints {
            match dedup.last() {
                Some(&prev) if b - prev < MIN_BREAKPOINT_GAP => {}
                _ => dedup.push(b),
            }
        }
        Ok(Self {
            domain,
            breakpoints: dedup,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of interior breakpoints.
    pub fn count(&self) -> usize {
        self.breakpoints.len()
    }

    /// Index of the partition cell containing `x` (right-continuous: at a
    /// breakpoint, the cell to its right).
    pub fn cell_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }
}

/// Law of the random jump count/locations.
#[derive(Debug, Clone, Copy)]
pub enum JumpLaw {
    /// `Poi(rate) + 1` breakpoints, i.i.d. uniform over the domain.
    PoissonCount { rate: f64 },
}

/// Draw a random partition: `τ ~ Poi(λ) + 1` breakpoints uniform on the
/// domain, sorted.
pub fn sample_partition<R: Rng + ?Sized>(
    law: &JumpLaw,
    domain: (f64, f64),
    rng: &mut R,
) -> Result<Partition> {
    let JumpLaw::PoissonCount { rate } = *law;
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Poisson rate must be positive, got {rate}"
        )));
    }
    let poi = Poisson::new(rate)
        .map_err(|e| Error::InvalidParameter(format!("Poisson({rate}): {e}")))?;
    let count = poi.sample(rng) as usize + 1;
    let uni = Uniform::new(domain.0, domain.1)
        .map_err(|e| Error::InvalidParameter(format!("uniform on domain: {e}")))?;
    let breakpoints: Vec<f64> = (0..count).map(|_| uni.sample(rng)).collect();
    Partition::new(domain, breakpoints)
}

/// Piecewise-constant field over a partition: one positive height per
/// interior cell plus exterior values for `x` outside the domain.
#[derive(Debug, Clone)]
pub struct JumpField {
    partition: Partition,
    /// One height per interior cell; length = breakpoint count + 1.
    heights: Vec<f64>,
    exterior: (f64, f64),
}

impl JumpField {
    pub fn new(partition: Partition, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != partition.count() + 1 {
            return Err(Error::InvalidParameter(format!(
                "need {} heights for {} breakpoints, got {}",
                partition.count() + 1,
                partition.count(),
                heights.len()
            )));
        }
        for &h in &heights {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "jump heights must be positive and finite, got {h}"
                )));
            }
        }
        let exterior = (heights[0], *heights.last().unwrap());
        Ok(Self {
            partition,
            heights,
            exterior,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (xl, xr) = self.partition.domain();
        if x < xl {
            self.exterior.0
        } else if x > xr {
            self.exterior.1
        } else {
            self.heights[self.partition.cell_index(x)]
        }
    }
}

/// One realization of the composite coefficient
/// `a(x) = ā(x) + φ(W(x)) + P(x)`.
///
/// `gauss` and `jumps` are both optional: pure jump fields drop the Gaussian
/// part (§-style inclusion coefficients) and log-Gaussian coefficients have
/// no jump field. The realization caches its discontinuity set and positive
/// lower/upper bounds over a dense scan grid.
pub struct SampledCoefficient {
    domain: (f64, f64),
    mean: ScalarFn,
    transform: ScalarFn,
    gauss: Option<KLRealization>,
    jumps: Option<JumpField>,
    discontinuities: Vec<f64>,
    bound_lower: f64,
    bound_upper: f64,
}

impl std::fmt::Debug for SampledCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledCoefficient")
            .field("domain", &self.domain)
            .field("jumps", &self.discontinuities.len())
            .field("gauss", &self.gauss.is_some())
            .field("bounds", &(self.bound_lower, self.bound_upper))
            .finish()
    }
}

impl SampledCoefficient {
    pub fn new(
        domain: (f64, f64),
        mean: ScalarFn,
        transform: ScalarFn,
        gauss: Option<KLRealization>,
        jumps: Option<JumpField>,
    ) -> Result<Self> {
        let discontinuities = jumps
            .as_ref()
            .map(|j| j.partition().breakpoints().to_vec())
            .unwrap_or_default();
        let mut coeff = Self {
            domain,
            mean,
            transform,
            gauss,
            jumps,
            discontinuities,
            bound_lower: f64::NAN,
            bound_upper: f64::NAN,
        };
        coeff.cache_bounds()?;
        Ok(coeff)
    }

    /// Coefficient with only a jump-field part (ā ≡ 0, no Gaussian field).
    pub fn pure_jump(jumps: JumpField) -> Result<Self> {
        let domain = jumps.partition().domain();
        Self::new(
            domain,
            Arc::new(|_| 0.0),
            Arc::new(f64::exp),
            None,
            Some(jumps),
        )
    }

    /// Spatially constant coefficient (used for deterministic baselines).
    pub fn constant(domain: (f64, f64), value: f64) -> Result<Self> {
        let partition = Partition::new(domain, Vec::new())?;
        Self::pure_jump(JumpField::new(partition, vec![value])?)
    }

    fn cache_bounds(&mut self) -> Result<()> {
        let (xl, xr) = self.domain;
        let h = (xr - xl) / BOUND_SCAN_POINTS as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut probe = |x: f64, coeff: &Self| -> Result<()> {
            let v = coeff.eval(x)?;
            lo = lo.min(v);
            hi = hi.max(v);
            Ok(())
        };
        for j in 0..=BOUND_SCAN_POINTS {
            probe((xl + j as f64 * h).min(xr), self)?;
        }
        for &d in &self.discontinuities {
            probe((d - 1e-12).max(xl), self)?;
            probe((d + 1e-12).min(xr), self)?;
        }
        if !(lo > 0.0) {
            return Err(Error::InvalidRealization(format!(
                "coefficient not positive: min over scan grid = {lo}"
            )));
        }
        self.bound_lower = lo;
        self.bound_upper = hi;
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Sorted discontinuity locations 𝔇(ω) (the jump-field breakpoints).
    pub fn discontinuities(&self) -> &[f64] {
        &self.discontinuities
    }

    /// Cached lower bound a₋(ω) > 0 (min over the scan grid).
    pub fn lower_bound(&self) -> f64 {
        self.bound_lower
    }

    /// Cached upper bound a₊(ω) (max over the scan grid).
    pub fn upper_bound(&self) -> f64 {
        self.bound_upper
    }

    pub fn has_gaussian_part(&self) -> bool {
        self.gauss.is_some()
    }

    pub fn jump_field(&self) -> Option<&JumpField> {
        self.jumps.as_ref()
    }

    /// Evaluate the coefficient; right-continuous at breakpoints.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("coefficient argument {x}")));
        }
        let mut v = (self.mean)(x);
        if let Some(gauss) = &self.gauss {
            v += (self.transform)(gauss.eval(x)?);
        }
        if let Some(jumps) = &self.jumps {
            v += jumps.eval(x);
        }
        if !v.is_finite() {
            return Err(Error::InvalidRealization(format!(
                "coefficient evaluated to {v} at x = {x}"
            )));
        }
        Ok(v)
    }

    /// Evaluate on a grid (plotting/export helper).
    pub fn eval_grid(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Named coefficient families used by the experiment suite.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientPreset {
    /// `Poi(5)+1` uniform jumps, heights alternating `U[1/4,3/4]` (odd cells)
    /// and `U[5/4,7/4]` (even cells), plus `exp` of a ν = 1/2 Matérn field.
    AlternatingExponential { sigma2: f64, corr_len: f64 },
    /// `Poi(5)+1` uniform jumps with `Poi(5)+1` heights plus `exp` of a
    /// squared-exponential (ν = ∞) field.
    PoissonSquaredExp { sigma2: f64, corr_len: f64 },
    /// `Poi(10)+1` inclusions of width `U[1e-5, 1e-3]`; height `Poi(30)` or
    /// `1/Poi(30)` by a fair coin, background 1, no Gaussian part.
    Inclusions,
    /// Deterministic: 1/2 outside the jump window `J_δ` around `1 − π/10`,
    /// `3/(2δ)` inside.
    UpJump { delta: f64 },
    /// Deterministic: 3/2 outside `J_δ`, `δ` inside.
    DownJump { delta: f64 },
    /// Exactly `jumps` uniform random breakpoints, deterministic heights
    /// 3/2 (even cells) / 1/2 (odd cells).
    AlternatingFixed { jumps: usize },
    /// Deterministic two-level coefficient: `p1` outside a window of the
    /// given width centered at `π/5`, `p2` inside.
    TwoLevel { p1: f64, p2: f64, width: f64 },
    /// Pure log-Gaussian coefficient `exp(W)` with the given Matérn
    /// parameters; no jump field.
    LogGaussian { nu: f64, sigma2: f64, corr_len: f64 },
    /// Spatially constant coefficient.
    Constant { value: f64 },
}

impl CoefficientPreset {
    /// Config-facing identifier.
    pub fn id(&self) -> &'static str {
        match self {
            Self::AlternatingExponential { .. } => "alternating_exponential",
            Self::PoissonSquaredExp { .. } => "poisson_sqexp",
            Self::Inclusions => "inclusions",
            Self::UpJump { .. } => "up_jump",
            Self::DownJump { .. } => "down_jump",
            Self::AlternatingFixed { .. } => "alternating_fixed",
            Self::TwoLevel { .. } => "two_level",
            Self::LogGaussian { .. } => "log_gaussian",
            Self::Constant { .. } => "constant",
        }
    }

    fn covariance(&self, domain: (f64, f64)) -> Result<Option<CovarianceSpec>> {
        match *self {
            Self::AlternatingExponential { sigma2, corr_len } => {
                Ok(Some(CovarianceSpec::matern(0.5, sigma2, corr_len, domain)?))
            }
            Self::PoissonSquaredExp { sigma2, corr_len } => Ok(Some(CovarianceSpec::matern(
                f64::INFINITY,
                sigma2,
                corr_len,
                domain,
            )?)),
            Self::LogGaussian {
                nu,
                sigma2,
                corr_len,
            } => Ok(Some(CovarianceSpec::matern(nu, sigma2, corr_len, domain)?)),
            _ => Ok(None),
        }
    }
}

/// KL discretization overrides for presets with a Gaussian part.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KlOptions {
    pub n_quad: Option<usize>,
    pub cutoff: Option<usize>,
}

/// Default quadrature resolution: ~10 nodes per correlation length, at least
/// 200 and at most 1000.
fn default_n_quad(spec: &CovarianceSpec) -> usize {
    let per_corr = (10.0 * spec.domain_length() / spec.correlation_length).ceil() as usize;
    per_corr.clamp(200, 1000)
}

/// Reusable sampler for a coefficient preset. Building it performs the
/// (expensive) Nyström eigendecomposition once; `sample` then draws
/// independent realizations.
pub struct PresetSampler {
    preset: CoefficientPreset,
    domain: (f64, f64),
    kl_basis: Option<Arc<KLBasis>>,
}

impl PresetSampler {
    pub fn new(preset: CoefficientPreset, domain: (f64, f64)) -> Result<Self> {
        Self::with_kl_options(preset, domain, KlOptions::default())
    }

    pub fn with_kl_options(
        preset: CoefficientPreset,
        domain: (f64, f64),
        options: KlOptions,
    ) -> Result<Self> {
        let kl_basis = match preset.covariance(domain)? {
            Some(spec) => {
                let n_quad = options.n_quad.unwrap_or_else(|| default_n_quad(&spec));
                Some(Arc::new(nystrom_eigenpairs(&spec, n_quad, options.cutoff)?))
            }
            None => None,
        };
        Ok(Self {
            preset,
            domain,
            kl_basis,
        })
    }

    pub fn preset(&self) -> &CoefficientPreset {
        &self.preset
    }

    pub fn kl_basis(&self) -> Option<&Arc<KLBasis>> {
        self.kl_basis.as_ref()
    }

    /// Draw one coefficient realization. Deterministic presets ignore the
    /// generator except where the cited experiment randomizes positions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SampledCoefficient> {
        match self.preset {
            CoefficientPreset::AlternatingExponential { .. } => {
                let partition =
                    sample_partition(&JumpLaw::PoissonCount { rate: 5.0 }, self.domain, rng)?;
                let heights = alternating_uniform_heights(partition.count() + 1, rng)?;
                let jumps = JumpField::new(partition, heights)?;
                let gauss = kl_sample(self.kl_basis.as_ref().unwrap(), rng);
                SampledCoefficient::new(
                    self.domain,
                    Arc::new(|_| 0.0),
                    Arc::new(f64::exp),
                    Some(gauss),
                    Some(jumps),
                )
            }
            CoefficientPreset::PoissonSquaredExp { .. } => {
                let partition =
                    sample_partition(&JumpLaw::PoissonCount { rate: 5.0 }, self.domain, rng)?;
                let poi = Poisson::new(5.0).expect("valid rate");
                let heights: Vec<f64> = (0..partition.count() + 1)
                    .map(|_| poi.sample(rng) + 1.0)
                    .collect();
                let jumps = JumpField::new(partition, heights)?;
                let gauss = kl_sample(self.kl_basis.as_ref().unwrap(), rng);
                SampledCoefficient::new(
                    self.domain,
                    Arc::new(|_| 0.0),
                    Arc::new(f64::exp),
                    Some(gauss),
                    Some(jumps),
                )
            }
            CoefficientPreset::Inclusions => {
                let jumps = sample_inclusions(self.domain, rng)?;
                SampledCoefficient::pure_jump(jumps)
            }
            CoefficientPreset::UpJump { delta } => {
                up_down_jump(self.domain, delta, 0.5, 1.5 / delta)
            }
            CoefficientPreset::DownJump { delta } => up_down_jump(self.domain, delta, 1.5, delta),
            CoefficientPreset::AlternatingFixed { jumps } => {
                if jumps == 0 {
                    return Err(Error::InvalidParameter(
                        "alternating_fixed needs at least one jump".into(),
                    ));
                }
                let uni = Uniform::new(self.domain.0, self.domain.1)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let breakpoints: Vec<f64> = (0..jumps).map(|_| uni.sample(rng)).collect();
                let partition = Partition::new(self.domain, breakpoints)?;
                let heights: Vec<f64> = (0..partition.count() + 1)
                    .map(|i| if i % 2 == 0 { 1.5 } else { 0.5 })
                    .collect();
                SampledCoefficient::pure_jump(JumpField::new(partition, heights)?)
            }
            CoefficientPreset::TwoLevel { p1, p2, width } => {
                let center = std::f64::consts::PI / 5.0;
                let partition = Partition::new(
                    self.domain,
                    vec![center - width / 2.0, center + width / 2.0],
                )?;
                SampledCoefficient::pure_jump(JumpField::new(partition, vec![p1, p2, p1])?)
            }
            CoefficientPreset::LogGaussian { .. } => {
                let gauss = kl_sample(self.kl_basis.as_ref().unwrap(), rng);
                SampledCoefficient::new(
                    self.domain,
                    Arc::new(|_| 0.0),
                    Arc::new(f64::exp),
                    Some(gauss),
                    None,
                )
            }
            CoefficientPreset::Constant { value } => {
                SampledCoefficient::constant(self.domain, value)
            }
        }
    }
}

/// Heights for the alternating preset: `U[1/4, 3/4]` on odd cells,
/// `U[5/4, 7/4]` on even cells (cells indexed from 0 at the left).
fn alternating_uniform_heights<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let low = Uniform::new(0.25, 0.75).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let high = Uniform::new(1.25, 1.75).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..count)
        .map(|i| {
            if i % 2 == 1 {
                low.sample(rng)
            } else {
                high.sample(rng)
            }
        })
        .collect())
}

/// Deterministic single-window coefficient around `1 − π/10`.
fn up_down_jump(
    domain: (f64, f64),
    delta: f64,
    outside: f64,
    inside: f64,
) -> Result<SampledCoefficient> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "jump window size must be positive, got {delta}"
        )));
    }
    let center = 1.0 - std::f64::consts::PI / 10.0;
    let partition = Partition::new(domain, vec![center - delta / 2.0, center + delta / 2.0])?;
    SampledCoefficient::pure_jump(JumpField::new(partition, vec![outside, inside, outside])?)
}

/// Draw the inclusion jump field: `Poi(10)+1` inclusions painted onto a unit
/// background; later inclusions overwrite earlier ones on overlaps, and
/// inclusions straddling the boundary are clipped to the domain.
fn sample_inclusions<R: Rng + ?Sized>(domain: (f64, f64), rng: &mut R) -> Result<JumpField> {
    let poi_count = Poisson::new(10.0).expect("valid rate");
    let count = poi_count.sample(rng) as usize + 1;
    let center = Uniform::new(domain.0, domain.1).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let size = Uniform::new(1e-5, 1e-3).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let poi_height = Poisson::new(30.0).expect("valid rate");

    // Background height 1; paint inclusions in draw order.
    let mut segments: Vec<(f64, f64, f64)> = vec![(domain.0, domain.1, 1.0)];
    for _ in 0..count {
        let c = center.sample(rng);
        let delta = size.sample(rng);
        // Poi(30) draws of 0 are resampled so heights stay positive/finite.
        let mut xi = poi_height.sample(rng);
        while xi == 0.0 {
            xi = poi_height.sample(rng);
        }
        let height = if coin.sample(rng) { 1.0 / xi } else { xi };
        let l = (c - delta / 2.0).max(domain.0);
        let r = (c + delta / 2.0).min(domain.1);
        if r - l > 0.0 {
            paint(&mut segments, l, r, height);
        }
    }

    // Drop slivers below the breakpoint gap, merging into the left neighbor.
    let mut cleaned: Vec<(f64, f64, f64)> = Vec::with_capacity(segments.len());
    for seg in segments {
        if seg.1 - seg.0 < MIN_BREAKPOINT_GAP {
            if let Some(last) = cleaned.last_mut() {
                last.1 = seg.1;
            }
            // A leading sliver is folded into the next segment below.
            continue;
        }
        match cleaned.last_mut() {
            Some(last) if last.1 < seg.0 => last.1 = seg.0,
            _ => {}
        }
        cleaned.push(seg);
    }

    let breakpoints: Vec<f64> = cleaned.iter().skip(1).map(|s| s.0).collect();
    let heights: Vec<f64> = cleaned.iter().map(|s| s.2).collect();
    let partition = Partition::new(domain, breakpoints)?;
    JumpField::new(partition, heights)
}

/// Overwrite `[l, r)` with height `h` in a sorted disjoint segment list.
fn paint(segments: &mut Vec<(f64, f64, f64)>, l: f64, r: f64, h: f64) {
    let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(segments.len() + 2);
    let mut inserted = false;
    for &(s, e, v) in segments.iter() {
        if e <= l || s >= r {
            if !inserted && s >= r {
                out.push((l, r, h));
                inserted = true;
            }
            out.push((s, e, v));
            continue;
        }
        if s < l {
            out.push((s, l, v));
        }
        if !inserted {
            out.push((l, r, h));
            inserted = true;
        }
        if e > r {
            out.push((r, e, v));
        }
    }
    if !inserted {
        out.push((l, r, h));
    }
    *segments = out;
}
