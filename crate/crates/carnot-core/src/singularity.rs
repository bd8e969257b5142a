//! Singular-curve witnesses and fat / not-ideal classification.
//!
//! A covector `hbar` with vanishing first layer generates a constant-control
//! singular horizontal curve iff the linear map `S_hbar : R^m -> R^{n-m_s}`
//! (stacked layer couplings) has nontrivial kernel. The search minimizes the
//! smallest singular value of `S_hbar` over the unit sphere of `{h^1 = 0}`;
//! "none found" is never a proof of idealness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::lie::{CarnotSpec, SpecError};

/// Certified kernel witness: `S_hbar(u) = 0` within 1e-10.
#[derive(Debug, Clone, Serialize)]
pub struct SingularWitness {
    /// Unit covector, first-layer block zero (full n-vector).
    pub hbar: Vec<f64>,
    /// Unit kernel direction in the first layer.
    pub u: Vec<f64>,
    pub min_singular_value: f64,
}

#[derive(Debug, Clone)]
pub enum SingularSearchOutcome {
    Witness(SingularWitness),
    /// Best (smallest) singular value achieved within the budget.
    NoneFound { min_singular_value: f64, budget: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FatVerdict {
    Fat,
    /// First-layer direction whose bracket map does not reach all of V_2.
    NotFat { witness: Vec<f64> },
    Inconclusive { min_singular_value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdealScreen {
    NotIdeal { reason: String },
    Inconclusive,
}

/// JSON form of any audit verdict.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    pub group: String,
    pub verdict: String,
    pub witness_hbar: Option<Vec<f64>>,
    pub witness_u: Option<Vec<f64>>,
    pub min_singular_value: f64,
    pub budget: usize,
    pub seed: u64,
}

impl SingularSearchOutcome {
    pub fn to_report(&self, group: &str, seed: u64) -> VerdictReport {
        match self {
            SingularSearchOutcome::Witness(w) => VerdictReport {
                group: group.to_string(),
                verdict: "singular-witness".into(),
                witness_hbar: Some(w.hbar.clone()),
                witness_u: Some(w.u.clone()),
                min_singular_value: w.min_singular_value,
                budget: 0,
                seed,
            },
            SingularSearchOutcome::NoneFound {
                min_singular_value,
                budget,
            } => VerdictReport {
                group: group.to_string(),
                verdict: "none-found".into(),
                witness_hbar: None,
                witness_u: None,
                min_singular_value: *min_singular_value,
                budget: *budget,
                seed,
            },
        }
    }
}

/// The stacked coupling matrix: block `l` (rows indexed by V_l, l = 1..s-1)
/// is `sum_k hbar_k^{l+1} M_k^l` with `(M_k^l)_{ji} = c_{i,(l,j)}^{(l+1,k)}`.
pub fn s_matrix(spec: &CarnotSpec, hbar: &DVector<f64>) -> Result<DMatrix<f64>, SpecError> {
    let n = spec.dim();
    if hbar.len() != n {
        return Err(SpecError::DimensionMismatch {
            expected: n,
            actual: hbar.len(),
        });
    }
    let m = spec.first_layer_dim();
    if hbar.rows(0, m).amax() > 1e-12 {
        return Err(SpecError::InvalidParameter(
            "s_matrix requires a covector with zero first-layer block".into(),
        ));
    }
    let s = spec.step();
    let rows = n - spec.layer_dims()[s - 1];
    let mut out = DMatrix::zeros(rows, m);
    let mut row0 = 0;
    for l in 1..s {
        let lr = spec.layer_range(l);
        for (jr, j) in lr.clone().enumerate() {
            for i in 0..m {
                let mut acc = 0.0;
                for k in spec.layer_range(l + 1) {
                    acc += hbar[k] * spec.structure_constant(i, j, k);
                }
                out[(row0 + jr, i)] = acc;
            }
        }
        row0 += lr.len();
    }
    Ok(out)
}

fn smallest_sv(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() < mat.ncols() {
        // Wide matrix: the map cannot be injective; treat missing singular
        // values as zero.
        return 0.0;
    }
    mat.clone().svd(false, false).singular_values.min()
}

/// Kernel direction for the smallest singular value.
fn kernel_direction(mat: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let svd = mat.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (idx, &sv) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty singular values");
    let ncols = mat.ncols();
    if vt.nrows() < ncols {
        // Rank-deficient wide case: pick a null direction by completing the
        // row space.
        let qr = mat.transpose().qr();
        let q = qr.q();
        // Any vector orthogonal to the columns of q lies in the kernel.
        for i in 0..ncols {
            let mut e = DVector::zeros(ncols);
            e[i] = 1.0;
            let proj = &q * (q.transpose() * &e);
            let res = &e - proj;
            if res.norm() > 1e-8 {
                return (0.0, res.normalize());
            }
        }
    }
    (sv, vt.row(idx).transpose())
}

/// Multi-start projected descent of the smallest singular value of a
/// sphere-constrained matrix family. Returns (best value, best argument).
fn minimize_min_sv<F>(dim: usize, starts: usize, iters: usize, seed: u64, f: F) -> (f64, DVector<f64>)
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let results: Vec<(f64, DVector<f64>)> = (0..starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(start as u64);
            let mut x = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0f64));
            if x.norm() < 1e-9 {
                x[0] = 1.0;
            }
            x = x.normalize();
            let mut fx = f(&x);
            let fd = 1e-6;
            let mut lr = 0.2;
            for _ in 0..iters {
                if fx <= 1e-13 {
                    break;
                }
                let mut grad = DVector::zeros(dim);
                for i in 0..dim {
                    let mut xp = x.clone();
                    xp[i] += fd;
                    let mut xm = x.clone();
                    xm[i] -= fd;
                    grad[i] = (f(&xp.normalize()) - f(&xm.normalize())) / (2.0 * fd);
                }
                let mut cand = &x - &grad * lr;
                if cand.norm() < 1e-9 {
                    lr *= 0.5;
                    continue;
                }
                cand = cand.normalize();
                let fc = f(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    lr *= 1.05;
                } else {
                    lr *= 0.5;
                    if lr < 1e-12 {
                        break;
                    }
                }
            }
            (fx, x)
        })
        .collect();
    results
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least one start")
}

/// Search for a singular-curve witness; `budget` is the number of descent
/// starts (500 iterations each).
pub fn singular_witness_search(
    spec: &CarnotSpec,
    budget: usize,
    seed: u64,
) -> Result<SingularSearchOutcome, SpecError> {
    if budget == 0 {
        return Err(SpecError::InvalidParameter("budget must be >= 1".into()));
    }
    let n = spec.dim();
    let m = spec.first_layer_dim();
    let free = n - m;
    if free == 0 {
        return Ok(SingularSearchOutcome::NoneFound {
            min_singular_value: f64::INFINITY,
            budget,
        });
    }
    let embed = |x: &DVector<f64>| -> DVector<f64> {
        let mut h = DVector::zeros(n);
        for i in 0..free {
            h[m + i] = x[i];
        }
        h
    };
    let obj = |x: &DVector<f64>| -> f64 {
        let h = embed(x);
        smallest_sv(&s_matrix(spec, &h).expect("valid embedded covector"))
    };
    let (best, xbest) = minimize_min_sv(free, budget, 500, seed, obj);
    if best <= 1e-10 {
        let h = embed(&xbest);
        let mat = s_matrix(spec, &h)?;
        let (_, u) = kernel_direction(&mat);
        let u = u.normalize();
        // Independent certification of the witness.
        let resid = (&mat * &u).norm();
        if resid <= 1e-10 {
            return Ok(SingularSearchOutcome::Witness(SingularWitness {
                hbar: h.iter().copied().collect(),
                u: u.iter().copied().collect(),
                min_singular_value: resid,
            }));
        }
    }
    Ok(SingularSearchOutcome::NoneFound {
        min_singular_value: best,
        budget,
    })
}

/// Step-2 fatness: `[v, V_1] = V_2` for every nonzero first-layer `v`.
/// Exact via a determinant when `dim V_2 = 1`; otherwise randomized descent
/// over the unit sphere of V_1, returning a witness or inconclusive.
pub fn fat_check_step2(spec: &CarnotSpec, seed: u64) -> Result<FatVerdict, SpecError> {
    if spec.step() != 2 {
        return Err(SpecError::InvalidParameter(format!(
            "fat_check_step2 requires step 2, got {}",
            spec.step()
        )));
    }
    let m = spec.first_layer_dim();
    let m2 = spec.layer_dims()[1];
    // Bracket map of v: (B_v)_{kj} = sum_i v_i c_{ij}^{(2,k)}.
    let bracket_map = |v: &DVector<f64>| -> DMatrix<f64> {
        let mut b = DMatrix::zeros(m2, m);
        for (kr, k) in spec.layer_range(2).enumerate() {
            for j in 0..m {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += v[i] * spec.structure_constant(i, j, k);
                }
                b[(kr, j)] = acc;
            }
        }
        b
    };
    if m2 == 1 {
        // B_v = v^T C with C the skew coupling matrix; fat iff C nonsingular.
        let k = spec.layer_range(2).start;
        let c = DMatrix::from_fn(m, m, |i, j| spec.structure_constant(i, j, k));
        let (sv, v) = kernel_direction(&c.transpose());
        if sv <= 1e-10 {
            return Ok(FatVerdict::NotFat {
                witness: v.normalize().iter().copied().collect(),
            });
        }
        return Ok(FatVerdict::Fat);
    }
    let obj = |v: &DVector<f64>| smallest_sv(&bracket_map(v).transpose());
    let (best, vbest) = minimize_min_sv(m, 50, 300, seed, obj);
    if best <= 1e-10 {
        return Ok(FatVerdict::NotFat {
            witness: vbest.iter().copied().collect(),
        });
    }
    Ok(FatVerdict::Inconclusive {
        min_singular_value: best,
    })
}

/// Growth-vector screen: step >= 3 with some intermediate layer thinner than
/// the first rules out idealness; a conclusive step-2 not-fat verdict does
/// too. Anything else is inconclusive.
pub fn growth_vector_ideal_screen(spec: &CarnotSpec, seed: u64) -> IdealScreen {
    let dims = spec.layer_dims();
    let s = spec.step();
    if s >= 3 {
        for r in 1..s - 1 {
            if dims[r] < dims[0] {
                return IdealScreen::NotIdeal {
                    reason: format!(
                        "layer {} has dimension {} < {} = dim V_1",
                        r + 1,
                        dims[r],
                        dims[0]
                    ),
                };
            }
        }
        return IdealScreen::Inconclusive;
    }
    if s == 2 {
        if let Ok(FatVerdict::NotFat { .. }) = fat_check_step2(spec, seed) {
            return IdealScreen::NotIdeal {
                reason: "step-2 group is conclusively not fat".into(),
            };
        }
    }
    IdealScreen::Inconclusive
}
