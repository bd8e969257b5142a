//! Riemannian comparison machinery: Jacobi matrix ODE, Riccati residual and
//! the s_K distortion comparison, validated on constant-curvature models.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::lie::SpecError;

/// Comparison function: `sin(sqrt(K) t)/sqrt(K)`, `t`, or
/// `sinh(sqrt(-K) t)/sqrt(-K)`.
pub fn s_k(k: f64, t: f64) -> f64 {
    if k > 0.0 {
        let r = k.sqrt();
        (r * t).sin() / r
    } else if k < 0.0 {
        let r = (-k).sqrt();
        (r * t).sinh() / r
    } else {
        t
    }
}

/// Derivative of [`s_k`] in `t`.
pub fn s_k_prime(k: f64, t: f64) -> f64 {
    if k > 0.0 {
        (k.sqrt() * t).cos()
    } else if k < 0.0 {
        ((-k).sqrt() * t).cosh()
    } else {
        1.0
    }
}

/// [`s_k`] with the positive-curvature domain check `t < pi/sqrt(K)`.
pub fn s_k_checked(k: f64, t: f64) -> Result<f64, SpecError> {
    if k > 0.0 && t >= std::f64::consts::PI / k.sqrt() {
        return Err(SpecError::InvalidParameter(format!(
            "s_K domain: t < pi/sqrt(K) (got t={t}, K={k})"
        )));
    }
    Ok(s_k(k, t))
}

/// Solution of the matrix Jacobi equation `Jhat'' + Rhat Jhat = 0` with
/// `Jhat(0) = 0`, `Jhat'(0) = I`, on a uniform grid.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    /// Ambient dimension n; matrices are (n-1) x (n-1).
    pub n: usize,
    pub times: Vec<f64>,
    pub j: Vec<DMatrix<f64>>,
    pub jp: Vec<DMatrix<f64>>,
    /// Curvature samples on the grid.
    pub r: Vec<DMatrix<f64>>,
    /// D(t) = det Jhat(t).
    pub d: Vec<f64>,
    /// First zero of D after t = 0, by sign change + linear interpolation.
    pub first_zero: Option<f64>,
}

impl JacobiSolution {
    /// `U = Jhat' Jhat^{-1}` at grid node `idx`, where `|D| > 1e-8`.
    pub fn u_matrix(&self, idx: usize) -> Option<DMatrix<f64>> {
        if self.d[idx].abs() <= 1e-8 {
            return None;
        }
        // U^T solves Jhat^T U^T = Jhat'^T.
        let lu = self.j[idx].transpose().lu();
        lu.solve(&self.jp[idx].transpose()).map(|x| x.transpose())
    }
}

/// Integrate the Jacobi equation with RK4. The curvature callback must
/// return symmetric matrices (checked per sample, 1e-10).
pub fn jacobi_integrate<F>(
    curvature: F,
    n: usize,
    t_max: f64,
    steps: usize,
) -> Result<JacobiSolution, SpecError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    if n < 2 {
        return Err(SpecError::InvalidParameter("need n >= 2".into()));
    }
    if steps == 0 || !(t_max > 0.0) {
        return Err(SpecError::InvalidParameter(
            "need steps >= 1 and T > 0".into(),
        ));
    }
    let d = n - 1;
    let sample = |t: f64| -> Result<DMatrix<f64>, SpecError> {
        let r = curvature(t);
        if r.nrows() != d || r.ncols() != d {
            return Err(SpecError::DimensionMismatch {
                expected: d,
                actual: r.nrows(),
            });
        }
        if (&r - r.transpose()).amax() > 1e-10 {
            return Err(SpecError::InvalidParameter(format!(
                "curvature matrix at t={t} is not symmetric"
            )));
        }
        Ok(r)
    };

    let dt = t_max / steps as f64;
    let mut j = DMatrix::<f64>::zeros(d, d);
    let mut jp = DMatrix::<f64>::identity(d, d);
    let mut times = Vec::with_capacity(steps + 1);
    let mut js = Vec::with_capacity(steps + 1);
    let mut jps = Vec::with_capacity(steps + 1);
    let mut rs = Vec::with_capacity(steps + 1);
    let mut ds = Vec::with_capacity(steps + 1);
    times.push(0.0);
    js.push(j.clone());
    jps.push(jp.clone());
    rs.push(sample(0.0)?);
    ds.push(0.0);

    for k in 0..steps {
        let t = k as f64 * dt;
        let r0 = sample(t)?;
        let rh = sample(t + dt / 2.0)?;
        let r1 = sample(t + dt)?;
        // k_i on state (J, J'): J' = P, P' = -R J.
        let k1j = jp.clone();
        let k1p = -&r0 * &j;
        let k2j = &jp + &k1p * (dt / 2.0);
        let k2p = -&rh * (&j + &k1j * (dt / 2.0));
        let k3j = &jp + &k2p * (dt / 2.0);
        let k3p = -&rh * (&j + &k2j * (dt / 2.0));
        let k4j = &jp + &k3p * dt;
        let k4p = -&r1 * (&j + &k3j * dt);
        j += (k1j + k2j * 2.0 + k3j * 2.0 + k4j) * (dt / 6.0);
        jp += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        times.push((k + 1) as f64 * dt);
        js.push(j.clone());
        jps.push(jp.clone());
        rs.push(r1);
        ds.push(j.determinant());
    }

    // First sign change of D after the initial zero.
    let mut first_zero = None;
    for k in 1..ds.len() - 1 {
        if ds[k] > 0.0 && ds[k + 1] <= 0.0 {
            let frac = ds[k] / (ds[k] - ds[k + 1]);
            first_zero = Some(times[k] + frac * dt);
            break;
        }
    }
    Ok(JacobiSolution {
        n,
        times,
        j: js,
        jp: jps,
        r: rs,
        d: ds,
        first_zero,
    })
}

/// Maximum over the admissible subgrid of the Riccati residual
/// `|| U' + U^2 + Rhat ||_F`, with `U'` from a five-point stencil.
///
/// Points are excluded where any stencil neighbor has `|D| <= 1e-8` or
/// `||U||_F > 5`: near t = 0 and near conjugate points `U ~ 1/dist` and the
/// stencil's `O(dt^4 U^(5))` error would dominate the residual.
pub fn riccati_residual(sol: &JacobiSolution) -> Result<f64, SpecError> {
    let kmax = sol.times.len();
    if kmax < 5 {
        return Err(SpecError::InvalidParameter(
            "need at least 5 grid nodes".into(),
        ));
    }
    let dt = sol.times[1] - sol.times[0];
    let us: Vec<Option<DMatrix<f64>>> = (0..kmax)
        .map(|k| {
            sol.u_matrix(k)
                .filter(|u| u.norm() <= 5.0)
        })
        .collect();
    let mut max_res: f64 = 0.0;
    let mut evaluated = 0;
    for k in 2..kmax - 2 {
        let window: Option<Vec<&DMatrix<f64>>> =
            (k - 2..=k + 2).map(|i| us[i].as_ref()).collect();
        let Some(w) = window else { continue };
        let uprime = (-w[4] + w[3] * 8.0 - w[1] * 8.0 + w[0]) / (12.0 * dt);
        let res = (uprime + w[2] * w[2] + &sol.r[k]).norm();
        max_res = max_res.max(res);
        evaluated += 1;
    }
    if evaluated == 0 {
        return Err(SpecError::InvalidParameter(
            "no admissible grid points for the Riccati residual".into(),
        ));
    }
    Ok(max_res)
}

/// Per-grid-node comparison margin.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub k: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    /// `sqrt(n-1) s_K'(t/sqrt(n-1)) / s_K(t/sqrt(n-1)) - tr U(t)` where both
    /// sides are defined; NaN elsewhere.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub first_zero: Option<f64>,
}

/// Check `D'/D <= sqrt(n-1) s_K'/s_K` along an integrated model. The left
/// side is computed exactly as `tr U` (no numerical differentiation of D).
pub fn comparison_check<F>(
    k: f64,
    n: usize,
    model_curvature: F,
    t_max: f64,
    steps: usize,
) -> Result<ComparisonReport, SpecError>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let sol = jacobi_integrate(model_curvature, n, t_max, steps)?;
    let root = ((n - 1) as f64).sqrt();
    let mut margins = Vec::with_capacity(sol.times.len());
    let mut min_margin = f64::INFINITY;
    for idx in 0..sol.times.len() {
        let t = sol.times[idx];
        let arg = t / root;
        let in_domain = t > 0.0 && (k <= 0.0 || arg < std::f64::consts::PI / k.sqrt());
        let margin = match (in_domain, sol.u_matrix(idx)) {
            (true, Some(u)) => {
                let rhs = root * s_k_prime(k, arg) / s_k(k, arg);
                let m = rhs - u.trace();
                min_margin = min_margin.min(m);
                m
            }
            _ => f64::NAN,
        };
        margins.push(margin);
    }
    Ok(ComparisonReport {
        k,
        n,
        times: sol.times.clone(),
        d: sol.d.clone(),
        margins,
        min_margin,
        first_zero: sol.first_zero,
    })
}

/// Constant-curvature equality model `Rhat = (K/(n-1)) I`.
pub fn constant_curvature_model(k: f64, n: usize) -> impl Fn(f64) -> DMatrix<f64> {
    let d = n - 1;
    let kappa = k / d as f64;
    move |_t: f64| DMatrix::identity(d, d) * kappa
}

/// CSV export of (t, D(t)), 17 significant digits.
pub fn d_profile_csv(sol: &JacobiSolution) -> String {
    let mut out = String::from("t,D\n");
    for (t, d) in sol.times.iter().zip(&sol.d) {
        out.push_str(&format!("{t:.16e},{d:.16e}\n"));
    }
    out
}
