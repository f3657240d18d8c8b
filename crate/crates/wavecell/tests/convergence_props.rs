//! Statistical invariants of the convergence driver: reference adequacy,
//! error monotonicity under refinement for smooth coefficients, and the
//! first-order rate sanity check on a constant coefficient.

use wavecell::experiments::{
    run_convergence, ErrorNorm, ExperimentSpec, InitialData, MeshStrategy,
};
use wavecell::jumpfield::{CoefficientPreset, KlOptions};
use wavecell::solver::Integrator;

#[test]
fn rate_fit_sanity_constant_coefficient() {
    // a ≡ 1, u0 = 0.3 sin(πx), T = 1 < 1/(0.3π): smooth solution, the
    // monotone first-order scheme fits a rate in [0.6, 1.1].
    let mut spec = ExperimentSpec::new(
        CoefficientPreset::Constant { value: 1.0 },
        InitialData::SinePi { kappa: 0.3 },
        vec![32, 64, 128],
    );
    spec.strategies = vec![MeshStrategy::Equidistant];
    spec.t_end = 1.0;
    let report = run_convergence(&spec).unwrap();
    assert!(report.failures.is_empty());
    let rate = report
        .median_rate(Integrator::ForwardEuler, MeshStrategy::Equidistant, ErrorNorm::L1)
        .unwrap();
    assert!(
        (0.6..=1.1).contains(&rate),
        "first-order rate sanity failed: {rate}"
    );
}

#[test]
fn error_monotone_under_refinement_smooth_field() {
    // Log-Gaussian smooth coefficient: mean error decreases at every dyadic
    // refinement.
    let mut spec = ExperimentSpec::new(
        CoefficientPreset::LogGaussian {
            nu: f64::INFINITY,
            sigma2: 0.1,
            corr_len: 0.1,
        },
        InitialData::SinePi { kappa: 0.3 },
        vec![32, 64, 128],
    );
    spec.strategies = vec![MeshStrategy::Equidistant];
    spec.samples = 5;
    spec.master_seed = 11;
    spec.t_end = 0.5;
    spec.kl = KlOptions {
        n_quad: Some(200),
        cutoff: None,
    };
    let report = run_convergence(&spec).unwrap();
    assert!(report.failures.is_empty());
    let means: Vec<f64> = spec
        .levels
        .iter()
        .map(|&n| {
            report
                .mean_error(Integrator::ForwardEuler, MeshStrategy::Equidistant, n, ErrorNorm::L1)
                .unwrap()
                .0
        })
        .collect();
    assert!(
        means[0] > means[1] && means[1] > means[2],
        "mean errors not monotone: {means:?}"
    );
}

#[test]
fn reference_adequacy_factor_four_vs_eight() {
    // Doubling the reference factor changes the reported errors by < 20% on
    // the alternating preset.
    let mut base = ExperimentSpec::new(
        CoefficientPreset::AlternatingExponential {
            sigma2: 0.1,
            corr_len: 0.1,
        },
        InitialData::SinePi { kappa: 0.3 },
        vec![32, 64],
    );
    base.strategies = vec![MeshStrategy::JumpAdapted];
    base.samples = 3;
    base.master_seed = 5;
    base.t_end = 0.5;
    base.kl = KlOptions {
        n_quad: Some(128),
        cutoff: None,
    };
    let report4 = run_convergence(&base).unwrap();
    let mut wide = base.clone();
    wide.reference_factor = 8;
    let report8 = run_convergence(&wide).unwrap();
    assert!(report4.failures.is_empty() && report8.failures.is_empty());
    for &n in &base.levels {
        let (m4, _, _) = report4
            .mean_error(Integrator::ForwardEuler, MeshStrategy::JumpAdapted, n, ErrorNorm::L1)
            .unwrap();
        let (m8, _, _) = report8
            .mean_error(Integrator::ForwardEuler, MeshStrategy::JumpAdapted, n, ErrorNorm::L1)
            .unwrap();
        let rel = (m4 - m8).abs() / m8;
        assert!(
            rel < 0.2,
            "reference factor sensitivity {rel:.3} at n = {n} (m4 = {m4}, m8 = {m8})"
        );
    }
}
