//! Stratified Lie algebra representation of a Carnot group.
//!
//! A group is specified by its step `s`, the layer dimensions `[m_1,...,m_s]`
//! and the structure constants `[e_i, e_j] = sum_k c_{ij}^k e_k` over the full
//! graded basis. Exponential coordinates identify the group with its algebra,
//! so an [`AlgebraVector`] doubles as a [`GroupPoint`]; the group law is the
//! Dynkin form of the Baker-Campbell-Hausdorff series, which terminates by
//! nilpotency and is therefore exact.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

/// Largest step supported by the precomputed BCH series.
pub const MAX_STEP: usize = 5;

/// Element of the graded Lie algebra in the fixed basis; read as exponential
/// coordinates of a group element where a group operation expects one.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector {
    pub coords: DVector<f64>,
}

/// Group element in exponential coordinates (same representation as an
/// algebra vector).
pub type GroupPoint = AlgebraVector;

impl AlgebraVector {
    pub fn zero(n: usize) -> Self {
        Self {
            coords: DVector::zeros(n),
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            coords: DVector::from_column_slice(v),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("step {0} out of supported range 1..={MAX_STEP}")]
    StepOutOfRange(usize),
    #[error("layer dimensions must be positive")]
    EmptyLayer,
    #[error("bracket index ({i},{j})->{k} out of range (1-based, n={n})")]
    BracketIndexOutOfRange { i: usize, j: usize, k: usize, n: usize },
    #[error("bracket rows must have i < j (got i={i}, j={j})")]
    BracketOrder { i: usize, j: usize },
    #[error("first-layer metric must be a symmetric positive-definite {m}x{m} matrix")]
    MetricNotSpd { m: usize },
    #[error("dilation ratio must be positive (got {0})")]
    NonpositiveDilation(f64),
    #[error("negative power {0}")]
    NegativePower(i64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("json parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One failed algebra axiom, with the offending indices (1-based, matching
/// the on-disk format).
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Antisymmetry { i: usize, j: usize, k: usize, residual: f64 },
    Jacobi { i: usize, j: usize, k: usize, residual: f64 },
    Grading { i: usize, j: usize, k: usize },
    Stratification { layer: usize, rank: usize, expected: usize },
    FirstLayerTooSmall { m: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Antisymmetry { i, j, k, residual } => write!(
                f,
                "antisymmetry violated at c_{{{i},{j}}}^{{{k}}} (residual {residual:.3e})"
            ),
            Violation::Jacobi { i, j, k, residual } => write!(
                f,
                "Jacobi identity violated on basis triple ({i},{j},{k}) (residual {residual:.3e})"
            ),
            Violation::Grading { i, j, k } => {
                write!(f, "grading violated: c_{{{i},{j}}}^{{{k}}} nonzero")
            }
            Violation::Stratification { layer, rank, expected } => write!(
                f,
                "stratification violated: [V_1, V_{layer}] has rank {rank} < {expected} = dim V_{}",
                layer + 1
            ),
            Violation::FirstLayerTooSmall { m } => {
                write!(f, "first layer dimension {m} < 2")
            }
        }
    }
}

/// Outcome of [`CarnotSpec::validate`]; empty iff the spec satisfies every
/// stratified-algebra axiom.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// A Carnot group given by its stratified algebra data, with the first-layer
/// basis orthonormalized at construction time.
#[derive(Debug, Clone)]
pub struct CarnotSpec {
    name: String,
    step: usize,
    layer_dims: Vec<usize>,
    n: usize,
    /// `offsets[l]` = first coordinate index of layer `l+1`; length `step+1`.
    offsets: Vec<usize>,
    /// 1-based layer (degree) of each coordinate.
    degrees: Vec<usize>,
    /// Dense structure-constant table, index `(i*n + j)*n + k`.
    table: Vec<f64>,
    /// Nonzero entries with `i < j`, as `(i, j, k, c)`.
    sparse: Vec<(usize, usize, usize, f64)>,
    /// Aggregated Dynkin/BCH terms `(coefficient, word)` for this step;
    /// letters are 0 = first argument, 1 = second argument.
    bch: Vec<(f64, Vec<u8>)>,
}

impl CarnotSpec {
    /// Build a spec from 0-based sparse bracket entries `((i, j, k), c)` with
    /// `i < j`; the antisymmetric completion is filled in automatically. A
    /// non-identity first-layer metric is absorbed by a Cholesky change of
    /// basis so that downstream code always sees an orthonormal first layer.
    pub fn from_parts(
        name: &str,
        step: usize,
        layer_dims: &[usize],
        brackets: &[((usize, usize, usize), f64)],
        metric: Option<&DMatrix<f64>>,
    ) -> Result<Self, SpecError> {
        if step == 0 || step > MAX_STEP {
            return Err(SpecError::StepOutOfRange(step));
        }
        if layer_dims.len() != step || layer_dims.iter().any(|&m| m == 0) {
            return Err(SpecError::EmptyLayer);
        }
        let n: usize = layer_dims.iter().sum();
        let mut table = vec![0.0; n * n * n];
        for &((i, j, k), c) in brackets {
            if i >= n || j >= n || k >= n {
                return Err(SpecError::BracketIndexOutOfRange {
                    i: i + 1,
                    j: j + 1,
                    k: k + 1,
                    n,
                });
            }
            if i >= j {
                return Err(SpecError::BracketOrder { i: i + 1, j: j + 1 });
            }
            table[(i * n + j) * n + k] += c;
            table[(j * n + i) * n + k] -= c;
        }
        if let Some(g) = metric {
            let m = layer_dims[0];
            if g.nrows() != m || g.ncols() != m {
                return Err(SpecError::MetricNotSpd { m });
            }
            let sym_err = (g - g.transpose()).amax();
            let chol = nalgebra::Cholesky::new(g.clone());
            let chol = match chol {
                Some(c) if sym_err <= 1e-10 => c,
                _ => return Err(SpecError::MetricNotSpd { m }),
            };
            // Orthonormal first-layer basis f_i = sum_a (L^-T)_{ai} e_a.
            let a = chol
                .l()
                .transpose()
                .solve_upper_triangular(&DMatrix::identity(m, m))
                .ok_or(SpecError::MetricNotSpd { m })?;
            let mut p = DMatrix::identity(n, n);
            p.view_mut((0, 0), (m, m)).copy_from(&a);
            table = transform_table(&table, n, &p);
        }
        Ok(Self::from_raw_table(name, step, layer_dims, table))
    }

    /// Build from a full dense table (no antisymmetric completion); intended
    /// for tests that need intentionally broken inputs.
    pub fn from_raw_table(
        name: &str,
        step: usize,
        layer_dims: &[usize],
        table: Vec<f64>,
    ) -> Self {
        let n: usize = layer_dims.iter().sum();
        assert_eq!(table.len(), n * n * n, "table size mismatch");
        let mut offsets = Vec::with_capacity(step + 1);
        let mut acc = 0;
        offsets.push(0);
        for &m in layer_dims {
            acc += m;
            offsets.push(acc);
        }
        let mut degrees = Vec::with_capacity(n);
        for (l, &m) in layer_dims.iter().enumerate() {
            degrees.extend(std::iter::repeat(l + 1).take(m));
        }
        let mut sparse = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let c = table[(i * n + j) * n + k];
                    if c != 0.0 {
                        sparse.push((i, j, k, c));
                    }
                }
            }
        }
        Self {
            name: name.to_string(),
            step,
            layer_dims: layer_dims.to_vec(),
            n,
            offsets,
            degrees,
            table,
            sparse,
            bch: bch_terms(step),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Topological dimension `n = sum m_j`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Dimension of the first layer.
    pub fn first_layer_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Degree (1-based layer index) of coordinate `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    /// Coordinate range of layer `l` (1-based).
    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l - 1]..self.offsets[l]
    }

    /// Structure constant `c_{ij}^k` (0-based indices).
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.table[(i * self.n + j) * self.n + k]
    }

    /// Homogeneous dimension `D = sum_j j*m_j`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.layer_dims
            .iter()
            .enumerate()
            .map(|(l, &m)| (l + 1) * m)
            .sum()
    }

    /// Lower bound `D + n - m` for the curvature exponent.
    pub fn curvature_exponent_bound(&self) -> usize {
        self.homogeneous_dimension() + self.n - self.layer_dims[0]
    }

    /// Check every stratified-algebra axiom and list all failures.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n;
        if self.layer_dims[0] < 2 && self.step > 1 {
            violations.push(Violation::FirstLayerTooSmall {
                m: self.layer_dims[0],
            });
        }
        // Antisymmetry.
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let r = self.structure_constant(i, j, k) + self.structure_constant(j, i, k);
                    if r.abs() > 1e-12 {
                        violations.push(Violation::Antisymmetry {
                            i: i + 1,
                            j: j + 1,
                            k: k + 1,
                            residual: r.abs(),
                        });
                    }
                }
            }
        }
        // Grading: c_{ij}^k = 0 unless deg k = deg i + deg j (nilpotency is
        // the case deg i + deg j > step, where no such k exists).
        for &(i, j, k, c) in &self.sparse {
            if self.degrees[i] + self.degrees[j] != self.degrees[k] && c.abs() > 1e-12 {
                violations.push(Violation::Grading {
                    i: i + 1,
                    j: j + 1,
                    k: k + 1,
                });
            }
        }
        // Jacobi identity on basis triples.
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let mut res: f64 = 0.0;
                    for t in 0..n {
                        let mut acc = 0.0;
                        for u in 0..n {
                            acc += self.structure_constant(j, k, u) * self.structure_constant(i, u, t)
                                + self.structure_constant(k, i, u) * self.structure_constant(j, u, t)
                                + self.structure_constant(i, j, u) * self.structure_constant(k, u, t);
                        }
                        res = res.max(acc.abs());
                    }
                    if res > 1e-12 {
                        violations.push(Violation::Jacobi {
                            i: i + 1,
                            j: j + 1,
                            k: k + 1,
                            residual: res,
                        });
                    }
                }
            }
        }
        // Stratification: the bracket map V_1 x V_l -> V_{l+1} is surjective.
        for l in 1..self.step {
            let rows = self.layer_dims[l];
            let cols = self.layer_dims[0] * self.layer_dims[l - 1];
            let mut mat = DMatrix::zeros(rows, cols);
            for (ci, i) in self.layer_range(1).enumerate() {
                for (cj, j) in self.layer_range(l).enumerate() {
                    for (rk, k) in self.layer_range(l + 1).enumerate() {
                        mat[(rk, ci * self.layer_dims[l - 1] + cj)] =
                            self.structure_constant(i, j, k);
                    }
                }
            }
            let rank = mat.rank(1e-10);
            if rank < rows {
                violations.push(Violation::Stratification {
                    layer: l,
                    rank,
                    expected: rows,
                });
            }
        }
        ValidationReport { violations }
    }

    /// Lie bracket `[x, y]`.
    pub fn bracket(
        &self,
        x: &AlgebraVector,
        y: &AlgebraVector,
    ) -> Result<AlgebraVector, SpecError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
        let mut out = DVector::zeros(self.n);
        for &(i, j, k, c) in &self.sparse {
            out[k] += c * (x.coords[i] * y.coords[j] - x.coords[j] * y.coords[i]);
        }
        AlgebraVector { coords: out }
    }

    /// Iterated adjoint `ad_v^k(w)`.
    pub fn ad_pow(
        &self,
        v: &AlgebraVector,
        k: i64,
        w: &AlgebraVector,
    ) -> Result<AlgebraVector, SpecError> {
        if k < 0 {
            return Err(SpecError::NegativePower(k));
        }
        self.check_dim(v)?;
        self.check_dim(w)?;
        let mut acc = w.clone();
        for _ in 0..k {
            acc = self.bracket_unchecked(v, &acc);
        }
        Ok(acc)
    }

    /// Apply the dexp-inverse operator
    /// `B(c)w = sum_{k=0}^{s-1} (-1)^k/(k+1)! ad_c^k(w)`.
    pub fn dexpinv_apply(
        &self,
        c: &AlgebraVector,
        w: &AlgebraVector,
    ) -> Result<AlgebraVector, SpecError> {
        self.check_dim(c)?;
        self.check_dim(w)?;
        let mut out = w.clone();
        out.coords += self.dexpinv_nilpotent(c, w).coords;
        Ok(out)
    }

    /// The nilpotent part `B(c) - I` applied to `w`.
    fn dexpinv_nilpotent(&self, c: &AlgebraVector, w: &AlgebraVector) -> AlgebraVector {
        let mut acc = w.clone();
        let mut out = DVector::zeros(self.n);
        let mut factorial = 1.0;
        for k in 1..self.step {
            acc = self.bracket_unchecked(c, &acc);
            factorial *= (k + 1) as f64;
            let coef = if k % 2 == 0 { 1.0 } else { -1.0 } / factorial;
            out.axpy(coef, &acc.coords, 1.0);
        }
        AlgebraVector { coords: out }
    }

    /// Solve `B(c) x = rhs`. `B(c)` is identity plus nilpotent, so the fixed
    /// point `x = rhs - (B-I)x` is reached exactly in at most `step`
    /// iterations.
    pub fn dexpinv_solve(
        &self,
        c: &AlgebraVector,
        rhs: &AlgebraVector,
    ) -> Result<AlgebraVector, SpecError> {
        self.check_dim(c)?;
        self.check_dim(rhs)?;
        Ok(self.dexpinv_solve_unchecked(c, rhs))
    }

    pub(crate) fn dexpinv_solve_unchecked(
        &self,
        c: &AlgebraVector,
        rhs: &AlgebraVector,
    ) -> AlgebraVector {
        let mut x = rhs.clone();
        for _ in 0..self.step {
            let nx = self.dexpinv_nilpotent(c, &x);
            x.coords.copy_from(&rhs.coords);
            x.coords -= nx.coords;
        }
        x
    }

    /// Group product in exponential coordinates: the BCH series truncated at
    /// the step, which is exact by nilpotency.
    pub fn group_product(&self, x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint, SpecError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut out = DVector::zeros(self.n);
        for (coef, word) in &self.bch {
            let last = word[word.len() - 1];
            let mut b = if last == 0 { x.clone() } else { y.clone() };
            for &letter in word[..word.len() - 1].iter().rev() {
                let arg = if letter == 0 { x } else { y };
                b = self.bracket_unchecked(arg, &b);
            }
            out.axpy(*coef, &b.coords, 1.0);
        }
        Ok(AlgebraVector { coords: out })
    }

    /// Group inverse: `-x` in exponential coordinates.
    pub fn group_inverse(&self, x: &GroupPoint) -> GroupPoint {
        AlgebraVector { coords: -&x.coords }
    }

    /// Anisotropic dilation scaling coordinate `i` by `lambda^{d_i}`.
    pub fn dilate(&self, lambda: f64, x: &GroupPoint) -> Result<GroupPoint, SpecError> {
        if lambda <= 0.0 {
            return Err(SpecError::NonpositiveDilation(lambda));
        }
        self.check_dim(x)?;
        let mut out = x.coords.clone();
        for (i, d) in self.degrees.iter().enumerate() {
            out[i] *= lambda.powi(*d as i32);
        }
        Ok(AlgebraVector { coords: out })
    }

    /// Dilation on covectors, scaling the layer-`l` block by `lambda^{2-l}`.
    ///
    /// This exponent is calibrated so that the exponential map intertwines
    /// covector dilation with the group dilation,
    /// `exp(covector_dilate(lambda, h)) = dilate(lambda, exp(h))`: the
    /// layered momentum system is invariant under `h^l -> lambda^{2-l} h^l`
    /// (each term `h_k^{l+1} A_k h^1` picks up `lambda^{1-l} * lambda =
    /// lambda^{2-l}`), and the resulting control is `lambda` times the
    /// original, which dilates the curve.
    pub fn covector_dilate(
        &self,
        lambda: f64,
        h: &DVector<f64>,
    ) -> Result<DVector<f64>, SpecError> {
        if lambda <= 0.0 {
            return Err(SpecError::NonpositiveDilation(lambda));
        }
        if h.len() != self.n {
            return Err(SpecError::DimensionMismatch {
                expected: self.n,
                actual: h.len(),
            });
        }
        let mut out = h.clone();
        for (i, d) in self.degrees.iter().enumerate() {
            out[i] *= lambda.powi(2 - *d as i32);
        }
        Ok(out)
    }

    fn check_dim(&self, v: &AlgebraVector) -> Result<(), SpecError> {
        if v.dim() != self.n {
            Err(SpecError::DimensionMismatch {
                expected: self.n,
                actual: v.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// Parse a group-spec JSON document. Indices are 1-based, bracket pairs
    /// listed once with `i < j`, unknown keys rejected.
    pub fn from_json_str(text: &str) -> Result<Self, SpecError> {
        let file: GroupFile = serde_json::from_str(text)?;
        let mut brackets = Vec::new();
        let n: usize = file.layer_dims.iter().sum();
        for row in &file.brackets {
            if row.i == 0 || row.j == 0 {
                return Err(SpecError::BracketIndexOutOfRange {
                    i: row.i,
                    j: row.j,
                    k: 0,
                    n,
                });
            }
            for (ks, &c) in &row.coeffs {
                let k: usize = ks.parse().map_err(|_| SpecError::BracketIndexOutOfRange {
                    i: row.i,
                    j: row.j,
                    k: 0,
                    n,
                })?;
                if k == 0 || k > n {
                    return Err(SpecError::BracketIndexOutOfRange {
                        i: row.i,
                        j: row.j,
                        k,
                        n,
                    });
                }
                brackets.push(((row.i - 1, row.j - 1, k - 1), c));
            }
        }
        let metric = match &file.metric_first_layer {
            MetricSpec::Named(s) if s == "identity" => None,
            MetricSpec::Named(_) => {
                let m = file.layer_dims.first().copied().unwrap_or(0);
                return Err(SpecError::MetricNotSpd { m });
            }
            MetricSpec::Matrix(rows) => {
                let m = file.layer_dims.first().copied().unwrap_or(0);
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(SpecError::MetricNotSpd { m });
                }
                Some(DMatrix::from_fn(m, m, |r, c| rows[r][c]))
            }
        };
        Self::from_parts(
            &file.name,
            file.step,
            &file.layer_dims,
            &brackets,
            metric.as_ref(),
        )
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupFile {
    name: String,
    step: usize,
    layer_dims: Vec<usize>,
    brackets: Vec<BracketRow>,
    #[serde(default)]
    metric_first_layer: MetricSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketRow {
    i: usize,
    j: usize,
    coeffs: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MetricSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Named("identity".to_string())
    }
}

/// Apply a change of basis `f_i = sum_a P_{ai} e_a` to a dense table.
fn transform_table(table: &[f64], n: usize, p: &DMatrix<f64>) -> Vec<f64> {
    // New-basis constants satisfy [f_i, f_j] = sum_k c'_{ij}^k f_k with
    // c' = P^{-1}-conjugated; here P is block-diagonal touching only V_1 and
    // output coordinates live in higher layers, so k transforms trivially
    // only when P fixes them. Handle the general case anyway.
    let pinv = p
        .clone()
        .try_inverse()
        .expect("change-of-basis matrix must be invertible");
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    if p[(a, i)] == 0.0 {
                        continue;
                    }
                    for b in 0..n {
                        if p[(b, j)] == 0.0 {
                            continue;
                        }
                        for t in 0..n {
                            let c = table[(a * n + b) * n + t];
                            if c != 0.0 {
                                acc += p[(a, i)] * p[(b, j)] * c * pinv[(k, t)];
                            }
                        }
                    }
                }
                if acc.abs() > 1e-300 {
                    out[(i * n + j) * n + k] = acc;
                }
            }
        }
    }
    out
}

/// Aggregated Dynkin terms of the BCH series up to total degree `step`.
///
/// `log(e^X e^Y) = sum_{k>=1} (-1)^{k-1}/k sum_{(p_i,q_i)} W / (T prod p_i! q_i!)`
/// where `W` is the right-nested bracket of the word `X^{p_1} Y^{q_1} ...`
/// and `T` its total length. Terms are aggregated per word.
fn bch_terms(step: usize) -> Vec<(f64, Vec<u8>)> {
    let mut acc: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for k in 1..=step {
        let mut pairs = vec![(0usize, 0usize); k];
        enumerate_pairs(&mut pairs, 0, step, k, &mut acc);
    }
    acc.into_iter()
        .filter_map(|(word, coef)| {
            if coef.abs() < 1e-15 {
                return None;
            }
            // Right-nested bracket vanishes when the last two letters agree.
            let len = word.len();
            if len >= 2 && word[len - 1] == word[len - 2] {
                return None;
            }
            Some((coef, word))
        })
        .collect()
}

fn enumerate_pairs(
    pairs: &mut Vec<(usize, usize)>,
    idx: usize,
    budget: usize,
    k: usize,
    acc: &mut BTreeMap<Vec<u8>, f64>,
) {
    if idx == k {
        let total: usize = pairs.iter().map(|&(p, q)| p + q).sum();
        let mut denom = (k as f64) * (total as f64);
        for &(p, q) in pairs.iter() {
            denom *= factorial(p) * factorial(q);
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let coef = sign / denom;
        let mut word = Vec::with_capacity(total);
        for &(p, q) in pairs.iter() {
            word.extend(std::iter::repeat(0u8).take(p));
            word.extend(std::iter::repeat(1u8).take(q));
        }
        *acc.entry(word).or_insert(0.0) += coef;
        return;
    }
    let remaining_slots = k - idx - 1;
    for p in 0..=budget {
        for q in 0..=(budget - p) {
            if p + q == 0 {
                continue;
            }
            // Leave at least one letter per remaining pair.
            if budget - p - q < remaining_slots {
                continue;
            }
            pairs[idx] = (p, q);
            enumerate_pairs(pairs, idx + 1, budget - p - q, k, acc);
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product::<f64>().max(1.0)
}
