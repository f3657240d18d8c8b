//! Steady-state solutions `m±_α` of `𝔣(x, m(x)) = α` and a discrete
//! evaluation of the adapted entropy functional `J^α` as a solution-quality
//! diagnostic.
//!
//! The functional is quadratured at the data locations of the recorded
//! finite-volume solution: cell centers in space, interval midpoints in time,
//! with the state averaged between consecutive recorded levels.

use crate::solver::{FluxModel, Solution};
use crate::{Error, Result};

/// Which side of the flux root the steady state lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// The steady state `m±_α` associated with a flux model: `a(x) f(m(x)) = α`
/// pointwise (multiplicative case `m±_α(x) = ±sqrt(2α/a(x))` for Burgers).
#[derive(Clone)]
pub struct SteadyState {
    pub alpha: f64,
    pub branch: Branch,
    model: FluxModel,
}

impl SteadyState {
    pub fn new(model: FluxModel, alpha: f64, branch: Branch) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "steady-state level must satisfy alpha >= 0, got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            branch,
            model,
        })
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    /// Evaluate the steady state at `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        steady_state_eval(self, x)
    }
}

/// Solve `𝔣(x, ·) = α` on the requested monotone branch. Burgers inverts in
/// closed form; general fluxes are bracketed and bisected to 1e-12.
pub fn steady_state_eval(s: &SteadyState, x: f64) -> Result<f64> {
    match &s.model {
        FluxModel::MultiplicativeConvex { coefficient, flux } => {
            let a = coefficient.eval(x)?;
            match flux {
                crate::solver::ConvexFlux::Burgers => {
                    let m = (2.0 * s.alpha / a).sqrt();
                    Ok(match s.branch {
                        Branch::Plus => m,
                        Branch::Minus => -m,
                    })
                }
            }
        }
        FluxModel::General { flux, .. } => {
            let g = |u: f64| flux(x, u);
            bisect_branch(&g, s.alpha, s.branch)
        }
    }
}

/// Bracket the level set from 0 outward on the requested branch, then bisect.
fn bisect_branch(g: &dyn Fn(f64) -> f64, alpha: f64, branch: Branch) -> Result<f64> {
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let mut hi = 1.0;
    let mut iter = 0;
    while g(sign * hi) < alpha {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(Error::InvalidParameter(format!(
                "level alpha = {alpha} not reached on the {branch:?} branch"
            )));
        }
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(sign * mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// Smooth nonnegative compactly supported test function
/// `φ(x, t) = bump((x − x0)/rx) · bump((t − t0)/rt)` with
/// `bump(s) = exp(−1/(1 − s²))` on |s| < 1.
#[derive(Debug, Clone)]
pub struct BumpTestFn {
    pub x0: f64,
    pub rx: f64,
    pub t0: f64,
    pub rt: f64,
    pub id: String,
}

fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn bump_deriv(s: f64) -> f64 {
    if s.abs() < 1.0 {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s) / (d * d)
    } else {
        0.0
    }
}

impl BumpTestFn {
    pub fn new(x0: f64, rx: f64, t0: f64, rt: f64, id: impl Into<String>) -> Result<Self> {
        if !(rx > 0.0 && rt > 0.0) {
            return Err(Error::InvalidParameter(
                "bump radii must be positive".into(),
            ));
        }
        Ok(Self {
            x0,
            rx,
            t0,
            rt,
            id: id.into(),
        })
    }

    /// Verify the support fits inside `domain × [0, t_end)`.
    pub fn check_support(&self, domain: (f64, f64), t_end: f64) -> Result<()> {
        if self.x0 - self.rx < domain.0 || self.x0 + self.rx > domain.1 {
            return Err(Error::InvalidParameter(format!(
                "test function '{}' support exceeds the spatial domain",
                self.id
            )));
        }
        if self.t0 + self.rt > t_end {
            return Err(Error::InvalidParameter(format!(
                "test function '{}' support reaches t_end",
                self.id
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x0) / self.rx) * bump((t - self.t0) / self.rt)
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        bump_deriv((x - self.x0) / self.rx) / self.rx * bump((t - self.t0) / self.rt)
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        bump((x - self.x0) / self.rx) * bump_deriv((t - self.t0) / self.rt) / self.rt
    }
}

fn kruzkov_sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discrete adapted entropy functional: the three integrals
/// `∫∫ |u − m| ∂φ/∂t`, `∫∫ sign(u − m)(𝔣(x, u) − α) ∂φ/∂x` and the initial
/// term `∫ |u₀ − m| φ(·, 0)`, quadratured over the recorded space–time cells.
/// Nonnegative values certify the adapted entropy inequality for this test
/// function up to discretization error.
pub fn entropy_functional_discrete(
    solution: &Solution,
    steady: &SteadyState,
    phi: &BumpTestFn,
) -> Result<f64> {
    let mesh = &solution.mesh;
    let t_end = *solution.times.last().expect("recorded times");
    phi.check_support(mesh.domain(), t_end)?;
    if solution.times.len() < 2 {
        return Err(Error::InvalidParameter(
            "entropy functional needs at least two recorded time levels".into(),
        ));
    }

    let n = mesh.n_cells();
    let centers: Vec<f64> = mesh.centers();
    let m: Vec<f64> = centers
        .iter()
        .map(|&x| steady.eval(x))
        .collect::<Result<_>>()?;
    let flux_at: Vec<Box<dyn Fn(f64) -> f64>> = match &steady.model {
        FluxModel::MultiplicativeConvex { coefficient, flux } => {
            let f = *flux;
            centers
                .iter()
                .map(|&x| {
                    let a = coefficient.eval(x)?;
                    Ok(Box::new(move |u: f64| a * f.eval(u)) as Box<dyn Fn(f64) -> f64>)
                })
                .collect::<Result<_>>()?
        }
        FluxModel::General { flux, .. } => centers
            .iter()
            .map(|&x| {
                let flux = std::sync::Arc::clone(flux);
                Ok(Box::new(move |u: f64| flux(x, u)) as Box<dyn Fn(f64) -> f64>)
            })
            .collect::<Result<_>>()?,
    };

    let mut total = 0.0;
    for k in 0..solution.times.len() - 1 {
        let (t0, t1) = (solution.times[k], solution.times[k + 1]);
        let dt = t1 - t0;
        if dt <= 0.0 {
            continue;
        }
        let t_mid = 0.5 * (t0 + t1);
        let (s0, s1) = (&solution.states[k], &solution.states[k + 1]);
        for i in 0..n {
            let x = centers[i];
            let dx = mesh.cell_size(i);
            let u_mid = 0.5 * (s0[i] + s1[i]);
            let diff = u_mid - m[i];
            let cell = dx * dt;
            total += diff.abs() * phi.dt(x, t_mid) * cell;
            total += kruzkov_sign(diff) * (flux_at[i](u_mid) - steady.alpha) * phi.dx(x, t_mid) * cell;
        }
    }
    let u0 = &solution.states[0];
    for i in 0..n {
        total += (u0[i] - m[i]).abs() * phi.eval(centers[i], 0.0) * mesh.cell_size(i);
    }
    Ok(total)
}

/// Log-spaced α grid for the diagnostic suite, spanning `[lo, hi]`.
pub fn alpha_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || count < 2 {
        return Err(Error::InvalidParameter(format!(
            "alpha grid needs 0 < lo < hi and count >= 2, got [{lo}, {hi}] x {count}"
        )));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|k| (llo + (lhi - llo) * k as f64 / (count - 1) as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jumpfield::SampledCoefficient;
    use crate::mesh::build_equidistant;
    use crate::solver::{solve, FluxModel, SolverConfig};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    const UNIT: (f64, f64) = (0.0, 1.0);

    fn burgers_with_constant(a: f64) -> FluxModel {
        FluxModel::burgers(Arc::new(SampledCoefficient::constant(UNIT, a).unwrap()))
    }

    #[test]
    fn steady_state_zero_alpha() {
        let s = SteadyState::new(burgers_with_constant(1.0), 0.0, Branch::Plus).unwrap();
        for &x in &[0.1, 0.5, 0.9] {
            assert_eq!(s.eval(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn steady_state_closed_form() {
        // a ≡ 2, α = 1: m⁺ = sqrt(2·1/2) = 1.
        let s = SteadyState::new(burgers_with_constant(2.0), 1.0, Branch::Plus).unwrap();
        assert_relative_eq!(s.eval(0.4).unwrap(), 1.0, max_relative = 1e-14);
        let s = SteadyState::new(burgers_with_constant(2.0), 1.0, Branch::Minus).unwrap();
        assert_relative_eq!(s.eval(0.4).unwrap(), -1.0, max_relative = 1e-14);
    }

    #[test]
    fn steady_state_scaling_law() {
        // Doubling a divides m⁺ by sqrt(2).
        let s1 = SteadyState::new(burgers_with_constant(1.0), 0.3, Branch::Plus).unwrap();
        let s2 = SteadyState::new(burgers_with_constant(2.0), 0.3, Branch::Plus).unwrap();
        assert_relative_eq!(
            s1.eval(0.5).unwrap() / 2.0f64.sqrt(),
            s2.eval(0.5).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn steady_state_flux_identity_random_points() {
        use rand::{Rng, SeedableRng};
        let sampler = crate::jumpfield::PresetSampler::new(
            crate::jumpfield::CoefficientPreset::AlternatingFixed { jumps: 6 },
            UNIT,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let coeff = Arc::new(sampler.sample(&mut rng).unwrap());
        let model = FluxModel::burgers(Arc::clone(&coeff));
        let alpha = 0.12;
        let s = SteadyState::new(model, alpha, Branch::Plus).unwrap();
        for _ in 0..1000 {
            let x: f64 = rng.random_range(0.0..1.0);
            if coeff.discontinuities().iter().any(|&d| (d - x).abs() < 1e-9) {
                continue;
            }
            let m = s.eval(x).unwrap();
            let fluxval = coeff.eval(x).unwrap() * 0.5 * m * m;
            assert!((fluxval - alpha).abs() <= 1e-12, "flux identity off: {fluxval}");
        }
    }

    #[test]
    fn steady_state_branch_ordering() {
        let s_plus = SteadyState::new(burgers_with_constant(1.5), 0.2, Branch::Plus).unwrap();
        let s_minus = SteadyState::new(burgers_with_constant(1.5), 0.2, Branch::Minus).unwrap();
        for &x in &[0.1, 0.6] {
            assert!(s_minus.eval(x).unwrap() <= 0.0);
            assert!(s_plus.eval(x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn steady_state_continuity_in_alpha() {
        // |m(α) − m(β)| ≤ C_ω |α − β| with C_ω from the coefficient lower
        // bound; checked on an α grid for Burgers.
        let a = 0.7;
        let model = burgers_with_constant(a);
        let alphas = alpha_grid(1e-3, 0.5, 16).unwrap();
        // For Burgers: dm/dα = 1/sqrt(2 α a) ≤ 1/sqrt(2 α_min a₋).
        for w in alphas.windows(2) {
            let s0 = SteadyState::new(model.clone(), w[0], Branch::Plus).unwrap();
            let s1 = SteadyState::new(model.clone(), w[1], Branch::Plus).unwrap();
            let c = 1.0 / (2.0 * w[0] * a).sqrt();
            let gap = (s1.eval(0.5).unwrap() - s0.eval(0.5).unwrap()).abs();
            assert!(gap <= c * (w[1] - w[0]) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn general_flux_bisection_matches_closed_form() {
        let a = 1.8;
        let general = FluxModel::General {
            flux: Arc::new(move |_x, u| a * 0.5 * u * u),
            dflux: Arc::new(move |_x, u| a * u),
        };
        let s = SteadyState::new(general, 0.4, Branch::Plus).unwrap();
        let expected = (2.0 * 0.4 / a).sqrt();
        assert_relative_eq!(s.eval(0.3).unwrap(), expected, epsilon = 1e-10);
        let s = SteadyState::new(s.model().clone(), 0.4, Branch::Minus).unwrap();
        assert_relative_eq!(s.eval(0.3).unwrap(), -expected, epsilon = 1e-10);
    }

    #[test]
    fn bump_is_smooth_and_supported() {
        let phi = BumpTestFn::new(0.5, 0.2, 0.3, 0.2, "b").unwrap();
        assert_eq!(phi.eval(0.71, 0.3), 0.0);
        assert_eq!(phi.eval(0.5, 0.51), 0.0);
        assert!(phi.eval(0.5, 0.3) > 0.0);
        // Symmetry of the bump makes ∂x φ odd around x0.
        assert_relative_eq!(
            phi.dx(0.45, 0.3),
            -phi.dx(0.55, 0.3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn functional_on_exact_steady_state() {
        // u ≡ m⁺_α: the first two integrals vanish; the initial term is
        // zero as well since u0 = m.
        let model = burgers_with_constant(1.0);
        let mesh = build_equidistant(UNIT, 64).unwrap();
        let alpha = 0.08;
        let s = SteadyState::new(model.clone(), alpha, Branch::Plus).unwrap();
        let m_val = (2.0 * alpha).sqrt();
        let config = SolverConfig {
            t_end: 0.4,
            output_times: (1..8).map(|k| 0.05 * k as f64).collect(),
            ..Default::default()
        };
        let sol = solve(&model, &mesh, &|_| m_val, &config).unwrap();
        let phi = BumpTestFn::new(0.5, 0.3, 0.2, 0.15, "b").unwrap();
        let j = entropy_functional_discrete(&sol, &s, &phi).unwrap();
        assert!(j.abs() <= 1e-12, "J = {j} on an exact steady state");
    }

    #[test]
    fn functional_zero_for_vanishing_test_function() {
        let model = burgers_with_constant(1.0);
        let mesh = build_equidistant(UNIT, 32).unwrap();
        let config = SolverConfig {
            t_end: 0.3,
            output_times: vec![0.1, 0.2],
            ..Default::default()
        };
        let sol = solve(&model, &mesh, &|x| 0.2 * (std::f64::consts::PI * x).sin(), &config)
            .unwrap();
        let s = SteadyState::new(model, 0.05, Branch::Plus).unwrap();
        // Support squeezed between quadrature points: φ vanishes at every
        // cell-center/time-midpoint sample, so the discrete functional is 0.
        let phi = BumpTestFn::new(0.5, 0.1, 0.1, 1e-6, "pointlike").unwrap();
        assert_eq!(entropy_functional_discrete(&sol, &s, &phi).unwrap(), 0.0);
    }

    #[test]
    fn functional_support_violation_rejected() {
        let model = burgers_with_constant(1.0);
        let mesh = build_equidistant(UNIT, 16).unwrap();
        let config = SolverConfig {
            t_end: 0.2,
            ..Default::default()
        };
        let sol = solve(&model, &mesh, &|_| 0.1, &config).unwrap();
        let s = SteadyState::new(model, 0.05, Branch::Plus).unwrap();
        let phi = BumpTestFn::new(0.05, 0.2, 0.1, 0.05, "wide").unwrap();
        assert!(entropy_functional_discrete(&sol, &s, &phi).is_err());
        let phi = BumpTestFn::new(0.5, 0.2, 0.3, 0.05, "late").unwrap();
        assert!(entropy_functional_discrete(&sol, &s, &phi).is_err());
    }

    #[test]
    fn shock_case_functional_bounded_below() {
        // Riemann 1 → 0 shock, α = 0.125: J^α ≥ −0.05 at N_x = 256.
        let model = burgers_with_constant(1.0);
        let mesh = build_equidistant(UNIT, 256).unwrap();
        let t_end = 0.25;
        let config = SolverConfig {
            t_end,
            output_times: (1..32).map(|k| t_end * k as f64 / 32.0).collect(),
            ..Default::default()
        };
        let sol = solve(&model, &mesh, &|x| if x < 0.25 { 1.0 } else { 0.0 }, &config).unwrap();
        let s = SteadyState::new(model, 0.125, Branch::Plus).unwrap();
        let phi = BumpTestFn::new(0.4, 0.25, 0.12, 0.1, "bump").unwrap();
        let j = entropy_functional_discrete(&sol, &s, &phi).unwrap();
        assert!(j >= -0.05, "J^alpha = {j}");
    }

    #[test]
    fn alpha_grid_spacing() {
        let g = alpha_grid(1e-3, 0.5, 16).unwrap();
        assert_eq!(g.len(), 16);
        assert_relative_eq!(g[0], 1e-3, max_relative = 1e-12);
        assert_relative_eq!(g[15], 0.5, max_relative = 1e-12);
        let r0 = g[1] / g[0];
        let r1 = g[15] / g[14];
        assert_relative_eq!(r0, r1, max_relative = 1e-9);
    }
}
