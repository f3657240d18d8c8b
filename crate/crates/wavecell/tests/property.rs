//! Property tests for the structural invariants: kernel symmetry, Godunov
//! consistency, mesh partition/refinement guarantees, restriction exactness
//! and coefficient positivity across the preset families.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wavecell::jumpfield::{CoefficientPreset, KlOptions, PresetSampler, SampledCoefficient};
use wavecell::mesh::{build_equidistant, build_jump_adapted, refine_wave_cells};
use wavecell::randfield::{matern_kernel, CovarianceSpec};
use wavecell::solver::{godunov_flux_general, FluxModel};

const UNIT: (f64, f64) = (0.0, 1.0);

/// Sort and enforce a minimal gap so the jump list satisfies the mesh
/// builder's preconditions.
fn sorted_distinct(mut points: Vec<f64>) -> Vec<f64> {
    points.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|&q| p - q > 1e-6) {
            out.push(p);
        }
    }
    out
}

proptest! {
    #[test]
    fn kernel_symmetry(
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        nu in prop_oneof![Just(0.5f64), Just(1.0), Just(2.5), Just(f64::INFINITY)],
        rho in 0.05f64..1.0,
    ) {
        let spec = CovarianceSpec::matern(nu, 0.7, rho, UNIT).unwrap();
        let a = matern_kernel(&spec, x, y).unwrap();
        let b = matern_kernel(&spec, y, x).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn godunov_consistency_at_equal_states(
        x in 0.0f64..1.0,
        u in -3.0f64..3.0,
        a in 0.1f64..10.0,
    ) {
        let coeff = Arc::new(SampledCoefficient::constant(UNIT, a).unwrap());
        let model = FluxModel::burgers(coeff);
        let f = godunov_flux_general(&model, x, u, u).unwrap();
        prop_assert!((f - a * 0.5 * u * u).abs() <= 1e-14 * (1.0 + a * u * u));
    }

    #[test]
    fn jump_adapted_mesh_partitions_domain(
        n in 1usize..200,
        raw_jumps in proptest::collection::vec(0.01f64..0.99, 0..8),
    ) {
        let jumps = sorted_distinct(raw_jumps);
        let mesh = build_jump_adapted(UNIT, n, &jumps).unwrap();
        let total: f64 = mesh.cell_sizes().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // Every jump is an interface to 1e-14.
        for (&d, &idx) in jumps.iter().zip(mesh.flagged_interfaces()) {
            prop_assert!((mesh.interfaces()[idx] - d).abs() < 1e-14);
        }
    }

    #[test]
    fn wave_cell_refinement_invariants(
        n in 2usize..200,
        raw_jumps in proptest::collection::vec(0.01f64..0.99, 1..8),
    ) {
        let jumps = sorted_distinct(raw_jumps);
        let mesh = build_jump_adapted(UNIT, n, &jumps).unwrap();
        let refined = refine_wave_cells(&mesh);
        prop_assert_eq!(refined.min_h(), mesh.min_h());
        let total: f64 = refined.cell_sizes().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let min_h = refined.min_h();
        for &idx in refined.flagged_interfaces() {
            for cell in [idx - 1, idx] {
                let size = refined.cell_sizes()[cell];
                prop_assert!(size >= min_h * (1.0 - 1e-12) && size < 2.0 * min_h);
            }
        }
    }

    #[test]
    fn restriction_preserves_constants_and_mass(
        c in -5.0f64..5.0,
        n_fine in 10usize..300,
        n_coarse in 1usize..40,
    ) {
        let fine = build_equidistant(UNIT, n_fine).unwrap();
        let coarse = build_equidistant(UNIT, n_coarse).unwrap();
        let state = vec![c; n_fine];
        let restricted = wavecell::experiments::restrict_reference(&fine, &state, &coarse);
        for v in &restricted {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c.abs()));
        }
    }
}

#[test]
fn positivity_one_million_evaluations_per_preset() {
    // 100 realizations of every preset; each construction scans a 1e4-point
    // grid (plus breakpoint neighbourhoods) and rejects nonpositive values,
    // so this drives ~1e6 positivity checks per preset.
    let presets = [
        CoefficientPreset::AlternatingExponential {
            sigma2: 0.1,
            corr_len: 0.1,
        },
        CoefficientPreset::PoissonSquaredExp {
            sigma2: 0.1,
            corr_len: 0.1,
        },
        CoefficientPreset::Inclusions,
        CoefficientPreset::UpJump { delta: 2f64.powi(-6) },
        CoefficientPreset::DownJump { delta: 2f64.powi(-6) },
        CoefficientPreset::AlternatingFixed { jumps: 16 },
        CoefficientPreset::TwoLevel {
            p1: 1.0,
            p2: 50.0,
            width: 0.1,
        },
        CoefficientPreset::LogGaussian {
            nu: 0.5,
            sigma2: 0.1,
            corr_len: 0.1,
        },
    ];
    for preset in presets {
        let sampler = PresetSampler::with_kl_options(
            preset.clone(),
            UNIT,
            KlOptions {
                n_quad: Some(128),
                cutoff: None,
            },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        for k in 0..100 {
            let c = sampler
                .sample(&mut rng)
                .unwrap_or_else(|e| panic!("{} realization {k}: {e}", preset.id()));
            assert!(c.lower_bound() > 0.0);
        }
    }
}
