use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carnot_core::builtin;
use carnot_core::contraction::{
    default_s_grid, density, estimate_curvature_exponent, jacobian, mcp_weight,
    required_exponent, scaled_density_profile, exponent_bound, vanishing_order, DensityConfig,
    DensityProfile, SamplerConfig,
};
use carnot_core::heisenberg;

fn dv(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[test]
fn jacobian_examples() {
    let cfg = DensityConfig::default();
    let ab = builtin::abelian3();
    let j = jacobian(&ab, &dv(&[0.4, -1.0, 2.2]), &cfg).unwrap();
    // Exact map is the identity; the residual is integration-roundoff noise
    // divided by the finite-difference step.
    assert!((j - nalgebra::DMatrix::identity(3, 3)).amax() < 1e-8);

    let h1 = builtin::heisenberg1();
    let d = density(&h1, &dv(&[1.0, 0.0, 0.0]), &cfg).unwrap();
    assert!(d > 0.0);

    // Halving the step barely moves the determinant.
    let fine = DensityConfig { fd_step: 0.5e-5, ..cfg };
    let d2 = density(&h1, &dv(&[1.0, 0.0, 0.0]), &fine).unwrap();
    assert!((d2 - d).abs() / d.abs() <= 1e-6);
}

#[test]
fn density_matches_cylindrical_oracle() {
    // Cartesian density at h = (rho cos t, rho sin t, p_z) equals
    // |h(p_z/2)| * Jac_cyl(rho, p_z); 200 sampled covectors.
    let h1 = builtin::heisenberg1();
    let cfg = DensityConfig { rk4_steps: 1000, ..DensityConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let rho = rng.gen_range(0.1..1.5);
        let pz = rng.gen_range(-2.0 * PI * 0.95..2.0 * PI * 0.95);
        let h = dv(&[rho * theta.cos(), rho * theta.sin(), pz]);
        let ours = density(&h1, &h, &cfg).unwrap();
        let oracle = heisenberg::f1(pz / 2.0).abs() * heisenberg::jac_cyl(rho, pz, 0.0);
        worst = worst.max((ours - oracle).abs());
    }
    assert!(worst <= 1e-6, "worst density deviation {worst:.3e}");
}

#[test]
fn density_vanishes_at_chart_boundary() {
    let h1 = builtin::heisenberg1();
    let cfg = DensityConfig { rk4_steps: 2000, ..DensityConfig::default() };
    let d = density(&h1, &dv(&[1.0, 0.0, 2.0 * PI]), &cfg).unwrap();
    assert!(d.abs() <= 1e-6, "boundary density {d:.3e}");
}

#[test]
fn scaled_profile_examples() {
    let cfg = DensityConfig::default();
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let ab = builtin::abelian3();
    let prof = scaled_density_profile(&ab, &dv(&[1.0, 2.0, -0.3]), &grid, &cfg).unwrap();
    for (i, &d) in prof.d.iter().enumerate() {
        assert!((d - 1.0).abs() < 1e-9);
        assert!((prof.scaled[i] - grid[i].powi(3)).abs() < 1e-9);
    }

    let h1 = builtin::heisenberg1();
    let h = dv(&[1.0, 0.2, 2.0]);
    let prof = scaled_density_profile(&h1, &h, &[1.0], &cfg).unwrap();
    let direct = density(&h1, &h, &cfg).unwrap();
    assert!((prof.d[0] - direct).abs() < 1e-12);

    // D(sh)/s^2 tends to a positive constant as s -> 0.
    let small: Vec<f64> = vec![1e-3, 2e-3, 4e-3, 8e-3];
    let prof = scaled_density_profile(&h1, &h, &small, &cfg).unwrap();
    let limits: Vec<f64> = prof.d.iter().zip(&small).map(|(d, s)| d / (s * s)).collect();
    for w in limits.windows(2) {
        assert!(w[0] > 0.0);
        assert!((w[1] / w[0] - 1.0).abs() < 0.01, "limit not settling: {limits:?}");
    }
}

#[test]
fn vanishing_order_examples() {
    // Synthetic exact power law.
    let s: Vec<f64> = (0..10).map(|i| 1e-3 * 10f64.powf(i as f64 / 9.0)).collect();
    let prof = DensityProfile {
        h: vec![1.0, 0.0, 0.0],
        s: s.clone(),
        d: s.iter().map(|&x| 0.7 * x * x).collect(),
        scaled: vec![0.0; s.len()],
        all_positive: true,
    };
    let (slope, err) = vanishing_order(&prof).unwrap();
    assert!((slope - 2.0).abs() < 1e-12 && err < 1e-12);

    let cfg = DensityConfig::default();
    let h1 = builtin::heisenberg1();
    let grid: Vec<f64> = (0..12).map(|i| 1e-3 * 10f64.powf(i as f64 / 11.0)).collect();
    let prof = scaled_density_profile(&h1, &dv(&[1.0, 0.0, 2.0 * PI * 0.9]), &grid, &cfg).unwrap();
    let (slope, _) = vanishing_order(&prof).unwrap();
    assert!((slope - 2.0).abs() <= 0.05, "slope {slope}");

    let ab = builtin::abelian3();
    let prof = scaled_density_profile(&ab, &dv(&[1.0, 0.0, 0.0]), &grid, &cfg).unwrap();
    let (slope, _) = vanishing_order(&prof).unwrap();
    assert!(slope.abs() <= 0.01);

    // Degenerate profile rejected.
    let dead = DensityProfile {
        h: vec![0.0; 3],
        s: s.clone(),
        d: vec![0.0; s.len()],
        scaled: vec![0.0; s.len()],
        all_positive: false,
    };
    assert!(vanishing_order(&dead).is_err());
}

#[test]
fn required_exponent_examples() {
    let cfg = DensityConfig::default();
    let ab = builtin::abelian3();
    for s in [0.1, 0.5, 0.9] {
        let nr = required_exponent(&ab, &dv(&[0.3, 1.0, -2.0]), s, &cfg).unwrap();
        assert!((nr - 3.0).abs() < 1e-6);
    }

    let h1 = builtin::heisenberg1();
    // Exact value at this covector and scale is 5 - ln(2.0293)/|ln 1e-3|
    // = 4.8976; the supremum over covectors approaches 5 from below.
    let nr = required_exponent(&h1, &dv(&[1.0, 0.0, PI]), 1e-3, &cfg).unwrap();
    assert!((4.89..=5.0).contains(&nr), "N_req = {nr}");

    assert!(required_exponent(&h1, &dv(&[1.0, 0.0, 0.0]), 1.5, &cfg).is_err());
}

#[test]
fn required_exponent_is_dilation_invariant() {
    let h1 = builtin::heisenberg1();
    let cfg = DensityConfig { rk4_steps: 800, ..DensityConfig::default() };
    let h = dv(&[0.8, -0.6, 1.7]);
    for lam in [0.5, 2.0] {
        let hd = h1.covector_dilate(lam, &h).unwrap();
        for s in [0.05, 0.3, 0.7] {
            let a = required_exponent(&h1, &h, s, &cfg).unwrap();
            let b = required_exponent(&h1, &hd, s, &cfg).unwrap();
            assert!((a - b).abs() <= 1e-6, "lambda={lam} s={s}: {a} vs {b}");
        }
    }
}

#[test]
fn exponent_bound_examples() {
    assert_eq!(exponent_bound(&builtin::heisenberg1()), 5);
    assert_eq!(exponent_bound(&builtin::heisenberg2()), 7);
    assert_eq!(exponent_bound(&builtin::engel()), 9);
    assert_eq!(exponent_bound(&builtin::abelian3()), 3);
}

#[test]
fn mcp_weight_examples() {
    assert_eq!(mcp_weight(0.0, 5.0, 1.0, 0.5).unwrap(), 0.5f64.powf(5.0));
    assert_eq!(mcp_weight(1.0, 4.0, 1.0, 1.0).unwrap(), 1.0);
    assert_eq!(mcp_weight(-2.0, 4.0, 1.0, 0.0).unwrap(), 0.0);
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let w = mcp_weight(1.0, 4.0, 2.0, s).unwrap();
        assert!((0.0..=1.0).contains(&w));
    }
    assert!(mcp_weight(1.0, 4.0, 10.0, 0.5).is_err(), "outside the K > 0 domain");
    assert!(mcp_weight(0.0, 1.0, 1.0, 0.5).is_err(), "N must exceed 1");
}

#[test]
fn exponent_estimate_abelian_is_exact() {
    let ab = builtin::abelian3();
    let cfg = SamplerConfig {
        n_samples: 50,
        s_grid: default_s_grid(),
        ..SamplerConfig::default()
    };
    let rep = estimate_curvature_exponent(&ab, &cfg, 1).unwrap();
    assert_eq!(rep.rejected, 0);
    assert!((rep.sup_required_exponent - 3.0).abs() < 1e-8);
    assert!(rep.passes());
}

#[test]
fn exponent_estimate_is_worker_count_independent() {
    let h1 = builtin::heisenberg1();
    let cfg = SamplerConfig {
        n_samples: 20,
        s_grid: vec![0.01, 0.1, 0.5],
        density: DensityConfig { rk4_steps: 100, ..DensityConfig::default() },
        ..SamplerConfig::default()
    };
    let a = estimate_curvature_exponent(&h1, &cfg, 5).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| estimate_curvature_exponent(&h1, &cfg, 5).unwrap());
    assert_eq!(
        a.sup_required_exponent.to_bits(),
        b.sup_required_exponent.to_bits()
    );
}

#[test]
fn exponent_estimate_report_json_shape() {
    let ab = builtin::abelian3();
    let cfg = SamplerConfig { n_samples: 10, ..SamplerConfig::default() };
    let rep = estimate_curvature_exponent(&ab, &cfg, 0).unwrap();
    let json = serde_json::to_value(&rep).unwrap();
    for key in [
        "group",
        "N_tested",
        "samples",
        "rejected",
        "sup_required_exponent",
        "violations",
        "seed",
    ] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
}
