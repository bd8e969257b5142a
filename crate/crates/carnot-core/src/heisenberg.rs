//! Closed-form first Heisenberg group (H1) oracle.
//!
//! Exact unit-time geodesic flow for the one-parameter metric family g_eps
//! (eps = 0 is the sub-Riemannian case), the cylindrical endpoint map and
//! its Jacobian density, the exact distance from the origin, and a
//! set-level Monte Carlo check of the measure-contraction inequality.
//!
//! Chart: cylindrical covectors (theta, rho, p_z) with |p_z| < 2*pi; inside
//! it the Jacobian density is positive and, for eps = 0, the endpoint map is
//! injective and geodesics are minimizing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lie::SpecError;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Below this |argument| the trig quotients switch to Taylor branches.
const SMALL: f64 = 1e-4;

/// sin(a)/a with removable singularity.
pub fn f1(a: f64) -> f64 {
    if a.abs() < SMALL {
        let a2 = a * a;
        1.0 - a2 / 6.0 + a2 * a2 / 120.0 - a2 * a2 * a2 / 5040.0
    } else {
        a.sin() / a
    }
}

/// (1 - cos(a))/a with removable singularity.
pub fn f2(a: f64) -> f64 {
    if a.abs() < SMALL {
        let a2 = a * a;
        a / 2.0 - a * a2 / 24.0 + a * a2 * a2 / 720.0
    } else {
        (1.0 - a.cos()) / a
    }
}

/// (1 - sin(a)/a)/a with removable singularity.
pub fn f3(a: f64) -> f64 {
    if a.abs() < SMALL {
        let a2 = a * a;
        a / 6.0 - a * a2 / 120.0 + a * a2 * a2 / 5040.0
    } else {
        (1.0 - a.sin() / a) / a
    }
}

/// h(lambda) = sin(lambda)/lambda on (0, pi].
pub fn h_fun(lambda: f64) -> Result<f64, SpecError> {
    if lambda <= 0.0 || lambda > std::f64::consts::PI {
        return Err(SpecError::InvalidParameter(format!(
            "h_fun domain is (0, pi], got {lambda}"
        )));
    }
    Ok(f1(lambda))
}

/// k(lambda) = sin(lambda) - lambda*cos(lambda) on (0, pi].
pub fn k_fun(lambda: f64) -> Result<f64, SpecError> {
    if lambda <= 0.0 || lambda > std::f64::consts::PI {
        return Err(SpecError::InvalidParameter(format!(
            "k_fun domain is (0, pi], got {lambda}"
        )));
    }
    Ok(lambda.sin() - lambda * lambda.cos())
}

/// Time-t geodesic endpoint from the origin for Cartesian covector
/// (p_x, p_y, p_z) and metric parameter eps; continuous at p_z = 0.
pub fn flow(p: (f64, f64, f64), t: f64, eps: f64) -> (f64, f64, f64) {
    let (px, py, pz) = p;
    let a = pz * t;
    let rho2 = px * px + py * py;
    let x = t * (px * f1(a) - py * f2(a));
    let y = t * (py * f1(a) + px * f2(a));
    let z = eps * eps * pz * t + 0.5 * rho2 * t * t * f3(a);
    (x, y, z)
}

/// Cylindrical unit-time endpoint: radius and height as functions of
/// (rho, p_z); the angle passes through by rotational symmetry.
pub fn exp_cyl(rho: f64, pz: f64, eps: f64) -> (f64, f64) {
    let e_rho = rho * f1(pz / 2.0).abs();
    let e_z = eps * eps * pz + 0.5 * rho * rho * f3(pz);
    (e_rho, e_z)
}

/// Small-p_z-safe form of (2/p_z^3) * k(p_z/2).
fn k_density(pz: f64) -> f64 {
    let u = pz / 2.0;
    if u.abs() < SMALL {
        let u2 = u * u;
        1.0 / 12.0 - u2 / 120.0 + u2 * u2 / 3360.0
    } else {
        2.0 * (u.sin() - u * u.cos()) / (pz * pz * pz)
    }
}

/// Jacobian density of the cylindrical endpoint map:
/// eps^2 * sin(p_z/2)/(p_z/2) + (2 rho^2 / p_z^3)(sin(p_z/2) - (p_z/2)cos(p_z/2)).
/// Limit eps^2 + rho^2/12 at p_z = 0; vanishes as |p_z| -> 2*pi when eps = 0.
pub fn jac_cyl(rho: f64, pz: f64, eps: f64) -> f64 {
    eps * eps * f1(pz / 2.0) + rho * rho * k_density(pz)
}

/// Margin (left minus right) of the contraction inequality
/// `s^3 rho h(s p_z/2) Jac(s rho, s p_z) >= s^5 rho h(p_z/2) Jac(rho, p_z)`;
/// nonnegative throughout the chart, which is exactly the pointwise form of
/// MCP(0,5) for this family.
pub fn pointwise_mcp_check(rho: f64, pz: f64, s: f64, eps: f64) -> Result<f64, SpecError> {
    if !(s > 0.0 && s <= 1.0) || rho <= 0.0 || pz.abs() >= TWO_PI || pz == 0.0 {
        return Err(SpecError::InvalidParameter(format!(
            "pointwise_mcp_check domain: rho > 0, 0 < |p_z| < 2*pi, s in (0,1] (got rho={rho}, p_z={pz}, s={s})"
        )));
    }
    let lhs = s.powi(3) * rho * f1(s * pz / 2.0) * jac_cyl(s * rho, s * pz, eps);
    let rhs = s.powi(5) * rho * f1(pz / 2.0) * jac_cyl(rho, pz, eps);
    Ok(lhs - rhs)
}

/// Sub-Riemannian (eps = 0) distance from the origin, by inverting the
/// cylindrical endpoint map: z/r^2 = f3(p_z) / (2 f1(p_z/2)^2) is strictly
/// increasing in p_z on (0, 2*pi), so bisection recovers p_z and the
/// distance is the generating covector's speed rho = r / f1(p_z/2).
pub fn distance_origin(point: (f64, f64, f64)) -> Result<f64, SpecError> {
    let (x, y, z) = point;
    let r = x.hypot(y);
    let za = z.abs();
    if r == 0.0 && za == 0.0 {
        return Err(SpecError::InvalidParameter(
            "distance_origin requires a nonzero point".into(),
        ));
    }
    if za == 0.0 {
        return Ok(r);
    }
    if r == 0.0 {
        return Ok(2.0 * (std::f64::consts::PI * za).sqrt());
    }
    let target = za / (r * r);
    let w = |pz: f64| f3(pz) / (2.0 * f1(pz / 2.0).powi(2));
    let mut lo = 0.0;
    let mut hi = TWO_PI - 1e-13;
    if w(hi) < target {
        // Point lies essentially on the z-axis at this precision.
        return Ok(2.0 * (std::f64::consts::PI * za).sqrt());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    if hi - lo > 1e-10 {
        return Err(SpecError::InvalidParameter(
            "distance_origin bisection did not converge".into(),
        ));
    }
    let pz = 0.5 * (lo + hi);
    Ok(r / f1(pz / 2.0))
}

/// Target set for the Monte Carlo contraction check, as a predicate on the
/// unit-time endpoint.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    /// Metric annulus r_in < d(0, .) < r_out, with d the speed of the
    /// generating covector (eps-Riemannian for eps > 0).
    Annulus { r_in: f64, r_out: f64 },
    /// Cartesian coordinate box.
    Box { min: [f64; 3], max: [f64; 3] },
}

impl SetSpec {
    /// Upper bound on covector radius rho needed to reach the set; for
    /// eps = 0 this follows from d(0,(x,y,z)) <= r + 2*sqrt(pi |z|), and the
    /// eps-Riemannian distance is no larger.
    fn rho_bound(&self) -> f64 {
        match self {
            SetSpec::Annulus { r_out, .. } => *r_out,
            SetSpec::Box { min, max } => {
                let rxy = (min[0].abs().max(max[0].abs())).hypot(min[1].abs().max(max[1].abs()));
                let zmax = min[2].abs().max(max[2].abs());
                rxy + 2.0 * (std::f64::consts::PI * zmax).sqrt()
            }
        }
    }

    fn contains(&self, theta: f64, rho: f64, pz: f64, eps: f64) -> bool {
        match self {
            SetSpec::Annulus { r_in, r_out } => {
                let d = (rho * rho + eps * eps * pz * pz).sqrt();
                *r_in < d && d < *r_out
            }
            SetSpec::Box { min, max } => {
                let p = (rho * theta.cos(), rho * theta.sin(), pz);
                let (x, y, z) = flow(p, 1.0, eps);
                x > min[0]
                    && x < max[0]
                    && y > min[1]
                    && y < max[1]
                    && z > min[2]
                    && z < max[2]
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            SetSpec::Annulus { r_in, r_out } => format!("annulus {r_in} < d < {r_out}"),
            SetSpec::Box { min, max } => format!("box {min:?}..{max:?}"),
        }
    }
}

/// Result of [`mcp_monte_carlo`].
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub set: String,
    pub s: f64,
    pub exponent_n: f64,
    pub n_samples: usize,
    pub in_set: usize,
    pub vol_a: f64,
    pub vol_as: f64,
    /// vol(A_s) / (s^N vol(A)).
    pub ratio: f64,
    /// Relative standard error of the ratio (delta method, correlated
    /// numerator and denominator).
    pub rel_std_err: f64,
    pub seed: u64,
    /// ratio >= 1 - 3 * rel_std_err.
    pub pass: bool,
    /// No sample landed in the set; estimates are meaningless.
    pub empty_set: bool,
}

/// Monte Carlo estimate of vol(A_s) / (s^N vol(A)) for the s-interpolation
/// of A toward the origin.
///
/// Samples (theta, rho, p_z) uniformly on the chart cylinder; each sample in
/// the preimage of A contributes the cylindrical density
/// `rho h(p_z/2) Jac(rho, p_z)` to vol(A) and
/// `s^3 rho h(s p_z/2) Jac(s rho, s p_z)` to vol(A_s) (the same point moved
/// to time s along its geodesic). Per-sample counter-based RNG streams make
/// the estimate independent of the worker count.
pub fn mcp_monte_carlo(
    set: &SetSpec,
    s: f64,
    exponent_n: f64,
    n_samples: usize,
    eps: f64,
    seed: u64,
) -> Result<MonteCarloReport, SpecError> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(SpecError::InvalidParameter(format!(
            "s must be in (0, 1], got {s}"
        )));
    }
    if n_samples < 1000 {
        return Err(SpecError::InvalidParameter(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let rho_max = set.rho_bound();
    if !(rho_max > 0.0) {
        return Err(SpecError::InvalidParameter("degenerate set bounds".into()));
    }
    let domain_vol = TWO_PI * rho_max * 2.0 * TWO_PI;

    // Accumulate sums and second moments of (x, y) = (A_s weight, A weight)
    // over fixed-size chunks, then reduce the chunk partials in index order:
    // with per-sample RNG streams this makes the estimate bit-identical for
    // any worker count.
    const CHUNK: usize = 4096;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64, f64, f64, f64, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0usize);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let theta = rng.gen_range(0.0..TWO_PI);
                let rho = rng.gen_range(0.0..rho_max);
                let pz = rng.gen_range(-TWO_PI..TWO_PI);
                if !set.contains(theta, rho, pz, eps) {
                    continue;
                }
                let y = rho * f1(pz / 2.0) * jac_cyl(rho, pz, eps);
                let x = s.powi(3) * rho * f1(s * pz / 2.0) * jac_cyl(s * rho, s * pz, eps);
                acc = (
                    acc.0 + x,
                    acc.1 + y,
                    acc.2 + x * x,
                    acc.3 + y * y,
                    acc.4 + x * y,
                    acc.5 + 1,
                );
            }
            acc
        })
        .collect();
    let (sx, sy, sxx, syy, sxy, in_set) = partials.into_iter().fold(
        (0.0, 0.0, 0.0, 0.0, 0.0, 0usize),
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3, a.4 + b.4, a.5 + b.5),
    );
    let nf = n_samples as f64;
    let mean_x = sx / nf;
    let mean_y = sy / nf;
    let vol_as = domain_vol * mean_x;
    let vol_a = domain_vol * mean_y;
    let empty_set = in_set == 0;
    let (ratio, rel_std_err) = if empty_set || mean_y == 0.0 {
        (f64::NAN, f64::NAN)
    } else {
        let ratio = mean_x / (s.powf(exponent_n) * mean_y);
        // Delta method for X/Y with correlated estimates.
        let var_x = (sxx / nf - mean_x * mean_x).max(0.0);
        let var_y = (syy / nf - mean_y * mean_y).max(0.0);
        let cov = sxy / nf - mean_x * mean_y;
        let rel_var = (var_x / (mean_x * mean_x) + var_y / (mean_y * mean_y)
            - 2.0 * cov / (mean_x * mean_y))
            / nf;
        (ratio, rel_var.max(0.0).sqrt())
    };
    let pass = !empty_set && ratio >= 1.0 - 3.0 * rel_std_err;
    Ok(MonteCarloReport {
        set: set.describe(),
        s,
        exponent_n,
        n_samples,
        in_set,
        vol_a,
        vol_as,
        ratio,
        rel_std_err,
        seed,
        pass,
        empty_set,
    })
}
