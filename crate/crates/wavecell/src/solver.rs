//! Conservative finite-volume evolution with the Godunov flux for spatially
//! dependent flux functions, explicit (CFL-limited) forward Euler and
//! implicit backward Euler time integration, periodic boundary conditions.
//!
//! For a multiplicative flux `a(x) f(u)` with convex `f`, the interface flux
//! collapses to `max{a_l f(max(u_l, u_M)), a_r f(min(u_r, u_M))}` with the
//! coefficient read on each side of the interface; the general min/max form
//! is kept for diagnostics and as the second route of the flux oracle.

use std::sync::Arc;

use crate::jumpfield::SampledCoefficient;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// 5-point Gauss–Legendre nodes/weights on [-1, 1].
const GL5_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

/// The u-dependent factor of a multiplicative flux; convex with a known root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexFlux {
    /// f(u) = u²/2 with root u_M = 0.
    Burgers,
}

impl ConvexFlux {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ConvexFlux::Burgers => 0.5 * u * u,
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            ConvexFlux::Burgers => u,
        }
    }

    /// Root u_M with f(u_M) = 0 (the minimum of the convex profile).
    #[inline]
    pub fn root(&self) -> f64 {
        match self {
            ConvexFlux::Burgers => 0.0,
        }
    }
}

pub type SpatialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The flux model 𝔣(x, u).
#[derive(Clone)]
pub enum FluxModel {
    /// 𝔣(x, u) = a(x) f(u) with convex f.
    MultiplicativeConvex {
        coefficient: Arc<SampledCoefficient>,
        flux: ConvexFlux,
    },
    /// Arbitrary flux with its u-derivative.
    General { flux: SpatialFn, dflux: SpatialFn },
}

impl FluxModel {
    pub fn burgers(coefficient: Arc<SampledCoefficient>) -> Self {
        FluxModel::MultiplicativeConvex {
            coefficient,
            flux: ConvexFlux::Burgers,
        }
    }

    /// Evaluate 𝔣(x, u).
    pub fn eval(&self, x: f64, u: f64) -> Result<f64> {
        match self {
            FluxModel::MultiplicativeConvex { coefficient, flux } => {
                Ok(coefficient.eval(x)? * flux.eval(u))
            }
            FluxModel::General { flux, .. } => Ok(flux(x, u)),
        }
    }
}

/// Time integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ForwardEuler,
    BackwardEuler,
}

impl Integrator {
    pub fn id(&self) -> &'static str {
        match self {
            Integrator::ForwardEuler => "forward_euler",
            Integrator::BackwardEuler => "backward_euler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
}

/// Solve parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub cfl_number: f64,
    pub t_end: f64,
    pub bc: BoundaryCondition,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Implicit step size; `None` means one cell per step, `|𝔻|/N_x`.
    pub implicit_dt: Option<f64>,
    /// Additional times at which the state is recorded (t = 0 and t_end are
    /// always recorded); the step size is clamped to land on them exactly.
    pub output_times: Vec<f64>,
    /// Record the per-step total-mass trace.
    pub record_mass_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::ForwardEuler,
            cfl_number: 0.9,
            t_end: 1.0,
            bc: BoundaryCondition::Periodic,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            implicit_dt: None,
            output_times: Vec::new(),
            record_mass_trace: true,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cfl_number > 0.0 && self.cfl_number < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_number must lie in (0, 1), got {}",
                self.cfl_number
            )));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "newton_tol must be positive and newton_max_iter nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// Recorded trajectory of a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub mesh: Mesh,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// (t, Σ u_i Δx_i) after every accepted step (entry 0 is the initial
    /// mass at t = 0).
    pub total_mass_trace: Vec<(f64, f64)>,
    /// Pathwise flux-bound diagnostic: max |F| over all interface-flux
    /// evaluations of the run.
    pub flux_bound: f64,
    pub steps: usize,
}

impl Solution {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("at least the initial state")
    }

    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&rt| (rt - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|i| self.states[i].as_slice())
    }

    pub fn initial_mass(&self) -> f64 {
        self.total_mass_trace[0].1
    }

    /// Largest absolute mass drift over the recorded trace.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.total_mass_trace[0].1;
        self.total_mass_trace
            .iter()
            .map(|&(_, m)| (m - m0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn total_mass(state: &[f64], mesh: &Mesh) -> f64 {
    state
        .iter()
        .zip(mesh.cell_sizes())
        .map(|(u, dx)| u * dx)
        .sum()
}

/// Cell averages of `u0` by 5-point Gauss–Legendre quadrature per cell.
pub fn init_cell_averages(u0: &dyn Fn(f64) -> f64, mesh: &Mesh) -> Vec<f64> {
    (0..mesh.n_cells())
        .map(|i| {
            let (l, r) = (mesh.interfaces()[i], mesh.interfaces()[i + 1]);
            let mid = 0.5 * (l + r);
            let half = 0.5 * (r - l);
            let mut acc = 0.0;
            for (node, weight) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
                acc += weight * u0(mid + half * node);
            }
            0.5 * acc
        })
        .collect()
}

/// Simplified Godunov flux for a multiplicative convex flux, with the
/// coefficient read on each side of the interface. Reduces to the classical
/// Godunov flux when `a_left == a_right`.
#[inline]
pub fn godunov_flux_multiplicative_convex(
    a_left: f64,
    a_right: f64,
    flux: &ConvexFlux,
    u_left: f64,
    u_right: f64,
) -> f64 {
    let root = flux.root();
    let up = flux.eval(u_left.max(root));
    let down = flux.eval(u_right.min(root));
    (a_left * up).max(a_right * down)
}

/// Generalized Godunov flux at a single point: min of 𝔣(x, ·) over
/// [u_left, u_right] when u_left ≤ u_right, else max over [u_right, u_left].
///
/// The multiplicative convex case is exact (three candidate evaluations);
/// the general case refines interior extrema by golden-section search
/// bracketed by endpoint checks.
pub fn godunov_flux_general(
    model: &FluxModel,
    x_interface: f64,
    u_left: f64,
    u_right: f64,
) -> Result<f64> {
    if !u_left.is_finite() || !u_right.is_finite() {
        return Err(Error::NonFinite(format!(
            "interface states ({u_left}, {u_right})"
        )));
    }
    let minimize = u_left <= u_right;
    let (lo, hi) = if minimize {
        (u_left, u_right)
    } else {
        (u_right, u_left)
    };
    let value = match model {
        FluxModel::MultiplicativeConvex { coefficient, flux } => {
            let a = coefficient.eval(x_interface)?;
            let candidates = [lo, hi, flux.root().clamp(lo, hi)];
            let vals = candidates.map(|u| a * flux.eval(u));
            if minimize {
                vals.into_iter().fold(f64::INFINITY, f64::min)
            } else {
                vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
            }
        }
        FluxModel::General { flux, .. } => {
            let g = |u: f64| flux(x_interface, u);
            let interior = golden_section(&g, lo, hi, minimize, 60);
            let (e0, e1) = (g(lo), g(hi));
            if minimize {
                interior.min(e0).min(e1)
            } else {
                interior.max(e0).max(e1)
            }
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "Godunov flux at x = {x_interface}, states ({u_left}, {u_right})"
        )));
    }
    Ok(value)
}

/// Golden-section refinement of an interior extremum of `g` on [lo, hi].
fn golden_section(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, minimize: bool, iters: usize) -> f64 {
    if hi <= lo {
        return g(lo);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..iters {
        let keep_left = if minimize { gc < gd } else { gc > gd };
        if keep_left {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    if minimize {
        gc.min(gd)
    } else {
        gc.max(gd)
    }
}

/// Flux model sampled onto a mesh: coefficient values at cell centers plus
/// the data the stepping kernels need. Immutable and shareable.
pub struct PreparedFlux {
    inner: PreparedInner,
}

enum PreparedInner {
    Multiplicative {
        /// a at cell centers.
        a: Vec<f64>,
        /// Upper coefficient bound used in the CFL constant.
        a_sup: f64,
        flux: ConvexFlux,
    },
    General {
        flux: SpatialFn,
        dflux: SpatialFn,
        /// Interface abscissae (periodic wrap flux uses the left boundary).
        interfaces: Vec<f64>,
    },
}

/// Sample the flux model onto a mesh (coefficient at cell centers).
pub fn prepare_flux(model: &FluxModel, mesh: &Mesh) -> Result<PreparedFlux> {
    let inner = match model {
        FluxModel::MultiplicativeConvex { coefficient, flux } => {
            let a: Vec<f64> = (0..mesh.n_cells())
                .map(|i| coefficient.eval(mesh.cell_center(i)))
                .collect::<Result<_>>()?;
            let a_sup = a
                .iter()
                .cloned()
                .fold(coefficient.upper_bound(), f64::max);
            PreparedInner::Multiplicative {
                a,
                a_sup,
                flux: *flux,
            }
        }
        FluxModel::General { flux, dflux } => PreparedInner::General {
            flux: Arc::clone(flux),
            dflux: Arc::clone(dflux),
            interfaces: mesh.interfaces().to_vec(),
        },
    };
    Ok(PreparedFlux { inner })
}

impl PreparedFlux {
    /// Coefficient values at cell centers (multiplicative models).
    pub fn coefficient_values(&self) -> Option<&[f64]> {
        match &self.inner {
            PreparedInner::Multiplicative { a, .. } => Some(a),
            PreparedInner::General { .. } => None,
        }
    }

    /// Interface fluxes F_{1/2} … F_{N+1/2} with periodic closure
    /// F_{1/2} = F_{N+1/2} computed from (u_N, u_1). Returns the largest
    /// |F| encountered.
    fn interface_fluxes(&self, state: &[f64], out: &mut [f64]) -> Result<f64> {
        let n = state.len();
        debug_assert_eq!(out.len(), n + 1);
        let mut max_abs = 0.0f64;
        match &self.inner {
            PreparedInner::Multiplicative { a, flux, .. } => {
                for i in 1..n {
                    let f = godunov_flux_multiplicative_convex(
                        a[i - 1],
                        a[i],
                        flux,
                        state[i - 1],
                        state[i],
                    );
                    out[i] = f;
                    max_abs = max_abs.max(f.abs());
                }
                let wrap =
                    godunov_flux_multiplicative_convex(a[n - 1], a[0], flux, state[n - 1], state[0]);
                out[0] = wrap;
                out[n] = wrap;
                max_abs = max_abs.max(wrap.abs());
            }
            PreparedInner::General {
                flux,
                dflux: _,
                interfaces,
            } => {
                let model = FluxModel::General {
                    flux: Arc::clone(flux),
                    dflux: Arc::clone(flux), // unused in evaluation
                };
                for i in 1..n {
                    let f =
                        godunov_flux_general(&model, interfaces[i], state[i - 1], state[i])?;
                    out[i] = f;
                    max_abs = max_abs.max(f.abs());
                }
                let wrap = godunov_flux_general(&model, interfaces[0], state[n - 1], state[0])?;
                out[0] = wrap;
                out[n] = wrap;
                max_abs = max_abs.max(wrap.abs());
            }
        }
        Ok(max_abs)
    }

    /// Largest wave speed for the CFL bound at the given state.
    fn wave_speed(&self, state: &[f64]) -> f64 {
        match &self.inner {
            PreparedInner::Multiplicative { a_sup, flux, .. } => {
                let max_df = state
                    .iter()
                    .map(|&u| flux.deriv(u).abs())
                    .fold(0.0, f64::max);
                a_sup * max_df
            }
            PreparedInner::General {
                dflux, interfaces, ..
            } => {
                let n = state.len();
                let mut l = 0.0f64;
                for i in 0..=n {
                    let x = interfaces[i.min(interfaces.len() - 1)];
                    let u_l = state[if i == 0 { n - 1 } else { i - 1 }];
                    let u_r = state[i % n];
                    l = l.max(dflux(x, u_l).abs()).max(dflux(x, u_r).abs());
                }
                l
            }
        }
    }
}

/// CFL-admissible time step `cfl · min Δx / L` from the current state; when
/// the wave speed vanishes the remaining time is returned.
pub fn cfl_dt(
    prepared: &PreparedFlux,
    mesh: &Mesh,
    state: &[f64],
    cfl_number: f64,
    remaining: f64,
) -> f64 {
    let speed = prepared.wave_speed(state);
    if speed <= f64::MIN_POSITIVE {
        return remaining;
    }
    (cfl_number * mesh.min_h() / speed).min(remaining)
}

/// One conservative forward-Euler step
/// `u_i ← u_i − (Δt/Δx_i)(F_{i+1/2} − F_{i−1/2})`.
pub fn forward_euler_step(
    prepared: &PreparedFlux,
    mesh: &Mesh,
    state: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    let mut flux = vec![0.0; state.len() + 1];
    let mut out = vec![0.0; state.len()];
    forward_euler_step_into(prepared, mesh, state, dt, &mut flux, &mut out)?;
    Ok(out)
}

fn forward_euler_step_into(
    prepared: &PreparedFlux,
    mesh: &Mesh,
    state: &[f64],
    dt: f64,
    flux: &mut [f64],
    out: &mut [f64],
) -> Result<f64> {
    let max_flux = prepared.interface_fluxes(state, flux)?;
    for (i, ((u, dx), o)) in state
        .iter()
        .zip(mesh.cell_sizes())
        .zip(out.iter_mut())
        .enumerate()
    {
        *o = u - dt / dx * (flux[i + 1] - flux[i]);
    }
    Ok(max_flux)
}

/// One backward-Euler step solved by damped Newton with a finite-difference
/// Jacobian assembled through a 3-coloring of the periodic 3-point stencil
/// (cyclic tridiagonal plus corners).
pub fn backward_euler_step(
    prepared: &PreparedFlux,
    mesh: &Mesh,
    state: &[f64],
    dt: f64,
    newton_tol: f64,
    newton_max_iter: usize,
) -> Result<Vec<f64>> {
    let n = state.len();
    let mut v = state.to_vec();
    let mut flux = vec![0.0; n + 1];
    let mut residual = vec![0.0; n];
    let mut trial_flux = vec![0.0; n + 1];
    let mut trial_res = vec![0.0; n];

    let eval_residual = |v: &[f64], flux: &mut [f64], out: &mut [f64]| -> Result<()> {
        prepared.interface_fluxes(v, flux)?;
        for i in 0..n {
            out[i] = v[i] - state[i] + dt / mesh.cell_size(i) * (flux[i + 1] - flux[i]);
        }
        Ok(())
    };

    eval_residual(&v, &mut flux, &mut residual)?;
    let inf_norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if inf_norm(&residual) <= newton_tol {
        return Ok(v);
    }

    for iter in 0..newton_max_iter {
        let jac = assemble_jacobian(prepared, mesh, state, dt, &v, &residual)?;
        let delta = jac.solve(&residual).ok_or(Error::NewtonFailure {
            iterations: iter,
            residual: inf_norm(&residual),
        })?;

        // Damped update: halve the step until the residual norm decreases.
        let norm0 = inf_norm(&residual);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-10 {
            let trial: Vec<f64> = v
                .iter()
                .zip(&delta)
                .map(|(vi, di)| vi - lambda * di)
                .collect();
            if eval_residual(&trial, &mut trial_flux, &mut trial_res).is_ok() {
                let norm1 = inf_norm(&trial_res);
                if norm1.is_finite() && norm1 <= (1.0 - 1e-4 * lambda) * norm0 {
                    v = trial;
                    residual.copy_from_slice(&trial_res);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonFailure {
                iterations: iter + 1,
                residual: norm0,
            });
        }
        if inf_norm(&residual) <= newton_tol {
            return Ok(v);
        }
    }
    Err(Error::NewtonFailure {
        iterations: newton_max_iter,
        residual: inf_norm(&residual),
    })
}

/// Cyclic tridiagonal matrix: diag + sub/super diagonals + periodic corners.
struct CyclicTridiag {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    /// J[n−1][0]
    corner_bl: f64,
    /// J[0][n−1]
    corner_tr: f64,
}

impl CyclicTridiag {
    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = rhs.len();
        if n == 1 {
            let d = self.diag[0];
            if d.abs() < 1e-300 {
                return None;
            }
            return Some(vec![rhs[0] / d]);
        }
        if n == 2 {
            // Corners and off-diagonals overlap for n = 2; assemble densely.
            let a = self.diag[0];
            let b = self.sup[0] + self.corner_tr;
            let c = self.sub[1] + self.corner_bl;
            let d = self.diag[1];
            let det = a * d - b * c;
            if det.abs() < 1e-300 {
                return None;
            }
            return Some(vec![
                (rhs[0] * d - b * rhs[1]) / det,
                (a * rhs[1] - c * rhs[0]) / det,
            ]);
        }
        // Sherman–Morrison reduction of the periodic corners.
        let gamma = -self.diag[0];
        let mut diag = self.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= self.corner_tr * self.corner_bl / gamma;
        let x = thomas(&self.sub, &diag, &self.sup, rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = self.corner_bl;
        let z = thomas(&self.sub, &diag, &self.sup, &u)?;
        let v_dot = |w: &[f64]| w[0] + self.corner_tr / gamma * w[n - 1];
        let denom = 1.0 + v_dot(&z);
        if denom.abs() < 1e-300 {
            return None;
        }
        let factor = v_dot(&x) / denom;
        Some(
            x.iter()
                .zip(&z)
                .map(|(xi, zi)| xi - factor * zi)
                .collect(),
        )
    }
}

/// Thomas algorithm; `sub[i]` multiplies x_{i−1} in row i, `sup[i]`
/// multiplies x_{i+1}.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut c_star = vec![0.0; n];
    let mut d_star = vec![0.0; n];
    if diag[0].abs() < 1e-300 {
        return None;
    }
    c_star[0] = sup[0] / diag[0];
    d_star[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c_star[i - 1];
        if m.abs() < 1e-300 {
            return None;
        }
        c_star[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d_star[i] = (rhs[i] - sub[i] * d_star[i - 1]) / m;
    }
    let mut x = d_star;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_star[i] * next;
    }
    Some(x)
}

/// Finite-difference Jacobian of the backward-Euler residual, exploiting the
/// periodic 3-point stencil: columns are grouped into colors at cyclic
/// distance ≥ 3, so each group costs one residual evaluation.
fn assemble_jacobian(
    prepared: &PreparedFlux,
    mesh: &Mesh,
    state: &[f64],
    dt: f64,
    v: &[f64],
    residual: &[f64],
) -> Result<CyclicTridiag> {
    let n = v.len();
    let mut jac = CyclicTridiag {
        sub: vec![0.0; n],
        diag: vec![0.0; n],
        sup: vec![0.0; n],
        corner_bl: 0.0,
        corner_tr: 0.0,
    };
    let mut flux = vec![0.0; n + 1];
    let mut pert_res = vec![0.0; n];
    let mut perturbed = v.to_vec();
    let fd_scale = f64::EPSILON.sqrt();

    // Color classes: 0,1,2 on the leading multiple of three, then singletons.
    let n3 = n - n % 3;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    if n <= 4 {
        groups.extend((0..n).map(|j| vec![j]));
    } else {
        for c in 0..3 {
            groups.push((c..n3).step_by(3).collect());
        }
        groups.extend((n3..n).map(|j| vec![j]));
    }

    for group in &groups {
        let mut steps = vec![0.0; group.len()];
        for (k, &j) in group.iter().enumerate() {
            let h = fd_scale * (1.0 + v[j].abs());
            perturbed[j] = v[j] + h;
            steps[k] = h;
        }
        prepared.interface_fluxes(&perturbed, &mut flux)?;
        for i in 0..n {
            pert_res[i] =
                perturbed[i] - state[i] + dt / mesh.cell_size(i) * (flux[i + 1] - flux[i]);
        }
        for (k, &j) in group.iter().enumerate() {
            let h = steps[k];
            let col = |i: usize| (pert_res[i] - residual[i]) / h;
            jac.diag[j] = col(j);
            // Row j+1, column j (wraps into the bottom-left corner).
            if j + 1 < n {
                jac.sub[j + 1] = col(j + 1);
            } else {
                jac.corner_bl = col(0);
            }
            // Row j−1, column j (wraps into the top-right corner).
            if j > 0 {
                jac.sup[j - 1] = col(j - 1);
            } else {
                jac.corner_tr = col(n - 1);
            }
            perturbed[j] = v[j];
        }
    }
    Ok(jac)
}

/// March the state from 0 to `t_end`, selecting the step from the CFL bound
/// (explicit) or a fixed step (implicit), recording the state at the
/// requested output times exactly.
pub fn solve(
    model: &FluxModel,
    mesh: &Mesh,
    u0: &dyn Fn(f64) -> f64,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    let prepared = prepare_flux(model, mesh)?;
    let n = mesh.n_cells();
    let mut state = init_cell_averages(u0, mesh);

    let mut targets: Vec<f64> = config
        .output_times
        .iter()
        .cloned()
        .filter(|&t| t > 0.0 && t < config.t_end)
        .collect();
    targets.push(config.t_end);
    targets.sort_by(|a, b| a.total_cmp(b));
    targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    let mut mass_trace = vec![(0.0, total_mass(&state, mesh))];
    let mut flux_bound = 0.0f64;
    let mut steps = 0usize;

    let implicit_dt_base = config
        .implicit_dt
        .unwrap_or(mesh.domain_length() / n as f64);
    if config.integrator == Integrator::BackwardEuler && !(implicit_dt_base > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "implicit_dt must be positive, got {implicit_dt_base}"
        )));
    }

    let mut flux_buf = vec![0.0; n + 1];
    let mut next = vec![0.0; n];
    let mut t = 0.0f64;
    const MAX_STEPS: usize = 50_000_000;

    for &target in &targets {
        while t < target {
            if steps >= MAX_STEPS {
                return Err(Error::SolveFailure {
                    step: steps,
                    time: t,
                    reason: "step limit exceeded".into(),
                });
            }
            let remaining = target - t;
            match config.integrator {
                Integrator::ForwardEuler => {
                    let dt = cfl_dt(&prepared, mesh, &state, config.cfl_number, remaining);
                    if !(dt > 0.0) {
                        return Err(Error::SolveFailure {
                            step: steps,
                            time: t,
                            reason: format!("non-positive step size {dt}"),
                        });
                    }
                    let max_flux =
                        forward_euler_step_into(&prepared, mesh, &state, dt, &mut flux_buf, &mut next)?;
                    flux_bound = flux_bound.max(max_flux);
                    std::mem::swap(&mut state, &mut next);
                    t = if dt >= remaining * (1.0 - 1e-12) {
                        target
                    } else {
                        t + dt
                    };
                }
                Integrator::BackwardEuler => {
                    let mut dt = implicit_dt_base.min(remaining);
                    let mut attempt = 0;
                    loop {
                        match backward_euler_step(
                            &prepared,
                            mesh,
                            &state,
                            dt,
                            config.newton_tol,
                            config.newton_max_iter,
                        ) {
                            Ok(v) => {
                                state = v;
                                let max_flux = prepared.interface_fluxes(&state, &mut flux_buf)?;
                                flux_bound = flux_bound.max(max_flux);
                                t = if dt >= remaining * (1.0 - 1e-12) {
                                    target
                                } else {
                                    t + dt
                                };
                                break;
                            }
                            Err(e @ Error::NewtonFailure { .. }) => {
                                attempt += 1;
                                if attempt > 10 {
                                    return Err(Error::SolveFailure {
                                        step: steps,
                                        time: t,
                                        reason: format!(
                                            "implicit step failed after 10 halvings: {e}"
                                        ),
                                    });
                                }
                                dt *= 0.5;
                            }
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
            steps += 1;
            let mass = total_mass(&state, mesh);
            if !mass.is_finite() {
                return Err(Error::SolveFailure {
                    step: steps,
                    time: t,
                    reason: "state became non-finite".into(),
                });
            }
            if config.record_mass_trace {
                mass_trace.push((t, mass));
            }
        }
        times.push(target);
        states.push(state.clone());
    }

    if !config.record_mass_trace {
        mass_trace.push((t, total_mass(&state, mesh)));
    }

    Ok(Solution {
        mesh: mesh.clone(),
        times,
        states,
        total_mass_trace: mass_trace,
        flux_bound,
        steps,
    })
}
