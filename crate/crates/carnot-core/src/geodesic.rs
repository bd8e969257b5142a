//! Normal-extremal integration.
//!
//! The covector `h` evolves by the layered momentum system
//! `hdot_b = sum_{i in V_1} sum_k c_{ib}^k h_i h_k` (top layer constant),
//! and the curve is reconstructed from `B(c) cdot = u` with `u = h^1`
//! embedded in the first layer. Both are integrated jointly with classical
//! RK4.

use nalgebra::{DMatrix, DVector};

use crate::lie::{AlgebraVector, CarnotSpec, GroupPoint, SpecError};

/// Momentum covector in the graded basis; same flat layout as an
/// [`AlgebraVector`], with layer blocks read through the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub coords: DVector<f64>,
}

impl Covector {
    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            coords: DVector::from_column_slice(v),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            coords: DVector::zeros(n),
        }
    }

    /// Euclidean norm of the first-layer block; the basis is orthonormal on
    /// V_1, so this is the control speed `|u|`.
    pub fn control_speed(&self, spec: &CarnotSpec) -> f64 {
        let r = spec.layer_range(1);
        self.coords.rows(r.start, r.end - r.start).norm()
    }
}

/// Sampled normal extremal: time grid, curve, covector.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub times: Vec<f64>,
    pub c: Vec<DVector<f64>>,
    pub h: Vec<DVector<f64>>,
    /// First-layer dimension, cached for control access.
    first_layer: usize,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> GroupPoint {
        AlgebraVector {
            coords: self.c.last().expect("nonempty path").clone(),
        }
    }

    /// Control `u(t_k) = h^1(t_k)`.
    pub fn control(&self, k: usize) -> DVector<f64> {
        self.h[k].rows(0, self.first_layer).into_owned()
    }

    pub fn control_speed(&self, k: usize) -> f64 {
        self.h[k].rows(0, self.first_layer).norm()
    }

    /// CSV with header `t,c_1..c_n,h_1..h_n,u_norm`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.c[0].len();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",c_{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",h_{i}"));
        }
        out.push_str(",u_norm\n");
        for k in 0..self.times.len() {
            out.push_str(&format!("{:.16e}", self.times[k]));
            for i in 0..n {
                out.push_str(&format!(",{:.16e}", self.c[k][i]));
            }
            for i in 0..n {
                out.push_str(&format!(",{:.16e}", self.h[k][i]));
            }
            out.push_str(&format!(",{:.16e}\n", self.control_speed(k)));
        }
        out
    }
}

/// Right-hand side of the momentum system:
/// `hdot_b = sum_{i in V_1} sum_k c_{ib}^k h_i h_k`, zero on the top layer.
pub fn euler_arnold_rhs(spec: &CarnotSpec, h: &Covector) -> Covector {
    Covector {
        coords: ea_rhs_raw(spec, &h.coords),
    }
}

fn ea_rhs_raw(spec: &CarnotSpec, h: &DVector<f64>) -> DVector<f64> {
    let n = spec.dim();
    let m = spec.first_layer_dim();
    let mut out = DVector::zeros(n);
    // c_{ib}^k with i < b contributes c to hdot_b and, swapped, -c to hdot_i.
    // Grading guarantees deg k = deg b + 1 whenever the partner is in V_1.
    for i in 0..n {
        for b in (i + 1)..n {
            for k in 0..n {
                let c = spec.structure_constant(i, b, k);
                if c == 0.0 {
                    continue;
                }
                if i < m {
                    out[b] += c * h[i] * h[k];
                }
                if b < m {
                    out[i] -= c * h[b] * h[k];
                }
            }
        }
    }
    out
}

/// Integrate the coupled (h, c) system with classical RK4 from c(0) = 0.
pub fn integrate_normal_extremal(
    spec: &CarnotSpec,
    h0: &Covector,
    t_max: f64,
    steps: usize,
) -> Result<GeodesicPath, SpecError> {
    if steps == 0 {
        return Err(SpecError::InvalidParameter("steps must be >= 1".into()));
    }
    if !(t_max > 0.0) {
        return Err(SpecError::InvalidParameter("T must be > 0".into()));
    }
    let n = spec.dim();
    if h0.coords.len() != n {
        return Err(SpecError::DimensionMismatch {
            expected: n,
            actual: h0.coords.len(),
        });
    }
    let m = spec.first_layer_dim();
    let dt = t_max / steps as f64;
    let mut h = h0.coords.clone();
    let mut c = DVector::zeros(n);

    let mut times = Vec::with_capacity(steps + 1);
    let mut cs = Vec::with_capacity(steps + 1);
    let mut hs = Vec::with_capacity(steps + 1);
    times.push(0.0);
    cs.push(c.clone());
    hs.push(h.clone());

    let rhs = |h: &DVector<f64>, c: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let dh = ea_rhs_raw(spec, h);
        let mut u = DVector::zeros(n);
        u.rows_mut(0, m).copy_from(&h.rows(0, m));
        let dc = spec
            .dexpinv_solve_unchecked(
                &AlgebraVector { coords: c.clone() },
                &AlgebraVector { coords: u },
            )
            .coords;
        (dh, dc)
    };

    for k in 0..steps {
        let (k1h, k1c) = rhs(&h, &c);
        let (k2h, k2c) = rhs(&(&h + &k1h * (dt / 2.0)), &(&c + &k1c * (dt / 2.0)));
        let (k3h, k3c) = rhs(&(&h + &k2h * (dt / 2.0)), &(&c + &k2c * (dt / 2.0)));
        let (k4h, k4c) = rhs(&(&h + &k3h * dt), &(&c + &k3c * dt));
        h += (k1h + k2h * 2.0 + k3h * 2.0 + k4h) * (dt / 6.0);
        c += (k1c + k2c * 2.0 + k3c * 2.0 + k4c) * (dt / 6.0);
        times.push(dt * (k + 1) as f64);
        cs.push(c.clone());
        hs.push(h.clone());
    }
    Ok(GeodesicPath {
        times,
        c: cs,
        h: hs,
        first_layer: m,
    })
}

/// Endpoint map `h -> c_h(1)`.
pub fn exp_map(spec: &CarnotSpec, h0: &Covector, steps: usize) -> Result<GroupPoint, SpecError> {
    Ok(integrate_normal_extremal(spec, h0, 1.0, steps)?.endpoint())
}

/// Length `int_0^T |u(t)| dt` by the trapezoid rule; equals `|h^1(0)| T` up
/// to roundoff because normal extremals conserve speed.
pub fn path_length(path: &GeodesicPath) -> f64 {
    let mut acc = 0.0;
    for k in 1..path.times.len() {
        let dt = path.times[k] - path.times[k - 1];
        acc += 0.5 * dt * (path.control_speed(k - 1) + path.control_speed(k));
    }
    acc
}

/// Per-derivative-order report from a small-time polynomial fit of the curve.
#[derive(Debug, Clone)]
pub struct LayerOrderReport {
    pub max_order: usize,
    /// `residuals[l-1]` = relative norm of the layer components that must
    /// vanish in the order-`l` Taylor coefficient (layers >= max(l, 2)).
    pub residuals: Vec<f64>,
    /// Condition number of the fit's Vandermonde matrix.
    pub condition_number: f64,
    pub ill_conditioned: bool,
}

/// Fit a degree-`max_order` polynomial to c(t) on t in [0, 1e-2] and report,
/// for each derivative order l, the relative norm of its forbidden layer
/// components: layers >= 2 for l = 1, layers >= l for l >= 2.
pub fn taylor_layer_orders(
    spec: &CarnotSpec,
    h0: &Covector,
    max_order: usize,
) -> Result<LayerOrderReport, SpecError> {
    if max_order == 0 || max_order > 6 {
        return Err(SpecError::InvalidParameter(
            "max_order must be in 1..=6".into(),
        ));
    }
    let nodes = 50usize;
    let t_max = 1e-2;
    let oversample = 10usize;
    let path = integrate_normal_extremal(spec, h0, t_max, (nodes - 1) * oversample)?;
    let n = spec.dim();

    // Least squares in the scaled variable tau = t / t_max to keep the
    // Vandermonde well-conditioned.
    let mut vand = DMatrix::zeros(nodes, max_order + 1);
    let mut data = DMatrix::zeros(nodes, n);
    for r in 0..nodes {
        let idx = r * oversample;
        let tau = path.times[idx] / t_max;
        let mut p = 1.0;
        for cdeg in 0..=max_order {
            vand[(r, cdeg)] = p;
            p *= tau;
        }
        for i in 0..n {
            data[(r, i)] = path.c[idx][i];
        }
    }
    let svd = vand.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let coeffs = svd
        .solve(&data, 1e-14)
        .map_err(|e| SpecError::InvalidParameter(format!("fit failed: {e}")))?;

    // coeffs row l = a_l with c(t) ~ sum_l a_l (t/t_max)^l.
    let mut scale: f64 = 0.0;
    for l in 1..=max_order {
        scale = scale.max(coeffs.row(l).norm());
    }
    let scale = scale.max(1e-300);
    let mut residuals = Vec::with_capacity(max_order);
    for l in 1..=max_order {
        let forbidden_from = l.max(2);
        let mut sq = 0.0;
        for i in 0..n {
            if spec.degree(i) >= forbidden_from {
                sq += coeffs[(l, i)] * coeffs[(l, i)];
            }
        }
        residuals.push(sq.sqrt() / scale);
    }
    Ok(LayerOrderReport {
        max_order,
        residuals,
        condition_number,
        ill_conditioned: condition_number > 1e8,
    })
}
