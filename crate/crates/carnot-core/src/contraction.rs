//! Jacobian-density analysis of the endpoint map and curvature-exponent
//! estimation.
//!
//! The measure-contraction inequality is verified at the density level: with
//! `D(h) = det(d exp / d h)`, the set-level inequality on chart-covered
//! regions reduces to `s^n D(sh) >= s^N D(h)`, i.e. to the per-covector
//! required exponent `N_req(h, s) = n + ln(D(sh)/D(h)) / ln s` staying below
//! the tested `N`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geodesic::{exp_map, Covector};
use crate::lie::{CarnotSpec, SpecError};
use crate::riemann::s_k;

/// Numerical knobs shared by the density operations.
#[derive(Debug, Clone, Copy)]
pub struct DensityConfig {
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
    /// RK4 steps per endpoint-map integration.
    pub rk4_steps: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            fd_step: 1e-5,
            rk4_steps: 400,
        }
    }
}

/// Jacobian of the unit-time endpoint map at `h`, by central finite
/// differences with per-coordinate step `fd_step * max(1, |h_i|)`.
pub fn jacobian(
    spec: &CarnotSpec,
    h: &DVector<f64>,
    cfg: &DensityConfig,
) -> Result<DMatrix<f64>, SpecError> {
    if !(cfg.fd_step > 0.0) {
        return Err(SpecError::InvalidParameter("fd_step must be > 0".into()));
    }
    let n = spec.dim();
    if h.len() != n {
        return Err(SpecError::DimensionMismatch {
            expected: n,
            actual: h.len(),
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let delta = cfg.fd_step * h[i].abs().max(1.0);
        let mut hp = h.clone();
        hp[i] += delta;
        let mut hm = h.clone();
        hm[i] -= delta;
        let fp = exp_map(spec, &Covector { coords: hp }, cfg.rk4_steps)?;
        let fm = exp_map(spec, &Covector { coords: hm }, cfg.rk4_steps)?;
        let col = (fp.coords - fm.coords) / (2.0 * delta);
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// Signed Jacobian determinant `D(h)`.
pub fn density(spec: &CarnotSpec, h: &DVector<f64>, cfg: &DensityConfig) -> Result<f64, SpecError> {
    Ok(jacobian(spec, h, cfg)?.determinant())
}

/// Density along the ray `s -> s*h`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityProfile {
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    /// `D(s h)` per grid point.
    pub d: Vec<f64>,
    /// `s^n D(s h)` per grid point (the scaled-map determinant).
    pub scaled: Vec<f64>,
    pub all_positive: bool,
}

pub fn scaled_density_profile(
    spec: &CarnotSpec,
    h: &DVector<f64>,
    s_grid: &[f64],
    cfg: &DensityConfig,
) -> Result<DensityProfile, SpecError> {
    if s_grid.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
        return Err(SpecError::InvalidParameter(
            "s_grid must lie in (0, 1]".into(),
        ));
    }
    let n = spec.dim() as i32;
    let mut d = Vec::with_capacity(s_grid.len());
    let mut scaled = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let ds = density(spec, &(h * s), cfg)?;
        d.push(ds);
        scaled.push(s.powi(n) * ds);
    }
    let all_positive = d.iter().all(|&v| v > 0.0);
    Ok(DensityProfile {
        h: h.iter().copied().collect(),
        s: s_grid.to_vec(),
        d,
        scaled,
        all_positive,
    })
}

/// Least-squares slope of `ln D(sh)` against `ln s` over the smallest decade
/// of the grid; returns (slope, standard error).
pub fn vanishing_order(profile: &DensityProfile) -> Result<(f64, f64), SpecError> {
    let s_min = profile
        .s
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &s) in profile.s.iter().enumerate() {
        if s <= 10.0 * s_min && profile.d[i] > 0.0 {
            xs.push(s.ln());
            ys.push(profile.d[i].ln());
        }
    }
    let k = xs.len();
    if k < 5 {
        return Err(SpecError::InvalidParameter(format!(
            "vanishing_order needs >= 5 positive-density points in the smallest decade, got {k}"
        )));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    let std_err = if k > 2 {
        (ss_res / (kf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, std_err))
}

/// `N_req(h, s) = n + ln(D(sh)/D(h)) / ln s`.
pub fn required_exponent(
    spec: &CarnotSpec,
    h: &DVector<f64>,
    s: f64,
    cfg: &DensityConfig,
) -> Result<f64, SpecError> {
    if !(s > 0.0 && s < 1.0) {
        return Err(SpecError::InvalidParameter(format!(
            "s must be in (0, 1), got {s}"
        )));
    }
    let d1 = density(spec, h, cfg)?;
    let ds = density(spec, &(h * s), cfg)?;
    if d1 <= 0.0 || ds <= 0.0 {
        return Err(SpecError::InvalidParameter(format!(
            "required_exponent needs positive densities (D(h)={d1:.3e}, D(sh)={ds:.3e})"
        )));
    }
    Ok(spec.dim() as f64 + (ds / d1).ln() / s.ln())
}

/// `D + n - m`: the proved lower bound for the curvature exponent.
pub fn exponent_bound(spec: &CarnotSpec) -> usize {
    spec.curvature_exponent_bound()
}

/// Comparison weight `s * (s_K(s d / sqrt(N-1)) / s_K(d / sqrt(N-1)))^{N-1}`;
/// reduces to `s^N` at K = 0.
pub fn mcp_weight(k: f64, n: f64, d: f64, s: f64) -> Result<f64, SpecError> {
    if !(n > 1.0) {
        return Err(SpecError::InvalidParameter(format!("N must be > 1, got {n}")));
    }
    if k > 0.0 && d >= std::f64::consts::PI * ((n - 1.0) / k).sqrt() {
        return Err(SpecError::InvalidParameter(format!(
            "d = {d} outside the K > 0 comparison domain"
        )));
    }
    if k == 0.0 {
        return Ok(s.powf(n));
    }
    let t = d / (n - 1.0).sqrt();
    Ok(s * (s_k(k, s * t) / s_k(k, t)).powf(n - 1.0))
}

/// Sampling configuration for [`estimate_curvature_exponent`].
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Higher-layer coordinates drawn uniformly from `[-beta, beta]`.
    pub beta: f64,
    /// Samples with `D(h)` at or below this are rejected and counted.
    pub threshold: f64,
    /// Exponent to test; `None` means the proved bound `D + n - m`.
    pub n_tested: Option<f64>,
    /// Violations are recorded when `N_req > N + tolerance`.
    pub tolerance: f64,
    pub s_grid: Vec<f64>,
    pub density: DensityConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            beta: 3.0,
            threshold: 1e-10,
            n_tested: None,
            tolerance: 1e-3,
            s_grid: default_s_grid(),
            density: DensityConfig::default(),
        }
    }
}

/// Geometric grid of 25 scales from 1e-3 to 0.9.
pub fn default_s_grid() -> Vec<f64> {
    let (lo, hi, k) = (1e-3f64, 0.9f64, 25usize);
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct McpViolation {
    pub h: Vec<f64>,
    pub s: f64,
    #[serde(rename = "N_req")]
    pub n_req: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McpReport {
    pub group: String,
    #[serde(rename = "N_tested")]
    pub n_tested: f64,
    pub samples: usize,
    pub rejected: usize,
    pub sup_required_exponent: f64,
    pub violations: Vec<McpViolation>,
    pub seed: u64,
}

impl McpReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sample covectors (first layer uniform on the unit sphere, higher layers
/// uniform in a box), evaluate `N_req` over the scale grid, and report the
/// supremum plus any violations of the tested exponent. Per-sample RNG
/// streams keyed on (seed, index) make the result worker-count independent.
pub fn estimate_curvature_exponent(
    spec: &CarnotSpec,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<McpReport, SpecError> {
    let n = spec.dim();
    let m = spec.first_layer_dim();
    let n_tested = cfg
        .n_tested
        .unwrap_or_else(|| exponent_bound(spec) as f64);

    struct SampleOut {
        rejected: bool,
        sup: f64,
        violations: Vec<McpViolation>,
    }

    let outs: Vec<SampleOut> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let mut h = DVector::zeros(n);
            // Gaussian first layer normalized to the sphere (Box-Muller).
            loop {
                for i in 0..m {
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    h[i] = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                }
                let norm = h.rows(0, m).norm();
                if norm > 1e-8 {
                    for i in 0..m {
                        h[i] /= norm;
                    }
                    break;
                }
            }
            for i in m..n {
                h[i] = rng.gen_range(-cfg.beta..cfg.beta);
            }

            let d1 = match density(spec, &h, &cfg.density) {
                Ok(v) => v,
                Err(_) => {
                    return SampleOut {
                        rejected: true,
                        sup: f64::NEG_INFINITY,
                        violations: vec![],
                    }
                }
            };
            if d1 <= cfg.threshold {
                return SampleOut {
                    rejected: true,
                    sup: f64::NEG_INFINITY,
                    violations: vec![],
                };
            }
            let mut sup = f64::NEG_INFINITY;
            let mut violations = Vec::new();
            for &s in &cfg.s_grid {
                if s >= 1.0 {
                    continue;
                }
                let ds = match density(spec, &(&h * s), &cfg.density) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                if ds <= cfg.threshold {
                    continue;
                }
                let n_req = n as f64 + (ds / d1).ln() / s.ln();
                sup = sup.max(n_req);
                if n_req > n_tested + cfg.tolerance {
                    violations.push(McpViolation {
                        h: h.iter().copied().collect(),
                        s,
                        n_req,
                    });
                }
            }
            SampleOut {
                rejected: false,
                sup,
                violations,
            }
        })
        .collect();

    let rejected = outs.iter().filter(|o| o.rejected).count();
    if rejected == cfg.n_samples {
        return Err(SpecError::InvalidParameter(
            "all samples rejected (density below threshold everywhere)".into(),
        ));
    }
    let mut sup = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for o in outs {
        sup = sup.max(o.sup);
        violations.extend(o.violations);
    }
    Ok(McpReport {
        group: spec.name().to_string(),
        n_tested,
        samples: cfg.n_samples,
        rejected,
        sup_required_exponent: sup,
        violations,
        seed,
    })
}
