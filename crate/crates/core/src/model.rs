//! Plant models, parameter boxes, safe polytopes and linearizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, check_shape, Error, Result};
use crate::interval::{Interval, IntervalBox, IntervalError, IntervalMatrix, SearchRegion};

/// Continuous-time plant `ẋ = f(x, u, θ)` with analytic Jacobians and interval extensions.
///
/// Implementations must keep the origin an equilibrium for every admissible parameter:
/// `f(0, 0, θ) = 0`.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn param_dim(&self) -> usize;

    fn dynamics(&self, x: &[f64], u: &[f64], theta: &[f64]) -> DVector<f64>;

    /// `(∂f/∂x, ∂f/∂u)` at the given point.
    fn jacobians(&self, x: &[f64], u: &[f64], theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>);

    fn dynamics_interval(
        &self,
        x: &[Interval],
        u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<Vec<Interval>, IntervalError>;

    fn jacobians_interval(
        &self,
        x: &[Interval],
        u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<(IntervalMatrix, IntervalMatrix), IntervalError>;
}

fn check_point(model: &dyn PlantModel, x: &[f64], u: &[f64], theta: &[f64]) -> Result<()> {
    check_len("state", x.len(), model.state_dim())?;
    check_len("input", u.len(), model.input_dim())?;
    check_len("parameter", theta.len(), model.param_dim())
}

pub fn eval_dynamics(model: &dyn PlantModel, x: &[f64], u: &[f64], theta: &[f64]) -> Result<DVector<f64>> {
    check_point(model, x, u, theta)?;
    Ok(model.dynamics(x, u, theta))
}

pub fn eval_jacobians(
    model: &dyn PlantModel,
    x: &[f64],
    u: &[f64],
    theta: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_point(model, x, u, theta)?;
    Ok(model.jacobians(x, u, theta))
}

/// `(A_θ, B_θ)`: the Jacobians at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearizedDynamics {
    /// `A + B K`.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_shape("gain", k.shape(), (self.b.ncols(), self.a.nrows()))?;
        Ok(&self.a + &self.b * k)
    }
}

pub fn linearize(model: &dyn PlantModel, theta: &[f64]) -> Result<LinearizedDynamics> {
    let x = vec![0.0; model.state_dim()];
    let u = vec![0.0; model.input_dim()];
    let (a, b) = eval_jacobians(model, &x, &u, theta)?;
    Ok(LinearizedDynamics { a, b })
}

/// `‖f(0, 0, θ)‖_∞`; zero when the origin is an equilibrium at `θ`.
pub fn equilibrium_residual(model: &dyn PlantModel, theta: &[f64]) -> Result<f64> {
    let x = vec![0.0; model.state_dim()];
    let u = vec![0.0; model.input_dim()];
    Ok(eval_dynamics(model, &x, &u, theta)?.amax())
}

/// Axis-aligned parameter set containing zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("parameter upper bounds", upper.len(), lower.len())?;
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidInput(format!("parameter {i}: bounds [{l}, {u}] are invalid")));
            }
            if l > 0.0 || u < 0.0 {
                return Err(Error::InvalidInput(format!("parameter {i}: [{l}, {u}] does not contain 0")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&t, (&l, &u))| l <= t && t <= u)
    }

    /// All `2^d` corners; corner `c` takes the upper bound in dimension `i` when bit `i` is set.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|c| (0..d).map(|i| if c >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }).collect())
            .collect()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| Interval::new(l, u).expect("validated")).collect()
    }
}

/// Bounded polytope `{x | a_iᵀx ≤ b_i}` with the origin strictly inside.
#[derive(Clone, Debug, PartialEq)]
pub struct SafePolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    vertices: Vec<DVector<f64>>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

impl SafePolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (rows, n) = a.shape();
        check_len("polytope offsets", b.len(), rows)?;
        if n == 0 || rows == 0 {
            return Err(Error::InvalidInput("polytope needs at least one face and one dimension".into()));
        }
        for i in 0..rows {
            if !(b[i] > 0.0) || !b[i].is_finite() {
                return Err(Error::InvalidInput(format!("face {i}: offset {} must be positive", b[i])));
            }
            let norm = a.row(i).norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidInput(format!("face {i}: zero or non-finite normal")));
            }
        }
        if a.rank(1e-10 * a.amax()) < n {
            return Err(Error::InvalidInput("polytope is unbounded (face normals do not span)".into()));
        }
        // extreme rays of {d | A d ≤ 0} lie on n-1 active faces
        for subset in combinations(rows, n - 1) {
            let mut sub = DMatrix::zeros(n, n);
            for (r, &i) in subset.iter().enumerate() {
                sub.set_row(r, &a.row(i));
            }
            let svd = sub.svd(false, true);
            let vt = svd.v_t.expect("requested");
            let (imin, smin) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            let second = svd.singular_values.iter().filter(|&&s| s > smin).fold(f64::INFINITY, |m, &s| m.min(s));
            if n > 1 && second <= 1e-12 {
                continue;
            }
            let d = vt.row(imin).transpose();
            for dir in [d.clone(), -d] {
                let ad = &a * &dir;
                if ad.iter().all(|&v| v <= 1e-12) {
                    return Err(Error::InvalidInput("polytope is unbounded".into()));
                }
            }
        }
        let vertices = Self::enumerate_vertices(&a, &b);
        if vertices.len() < n + 1 {
            return Err(Error::InvalidInput("polytope has too few vertices".into()));
        }
        Ok(Self { a, b, vertices })
    }

    fn enumerate_vertices(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<DVector<f64>> {
        let (rows, n) = a.shape();
        let mut out: Vec<DVector<f64>> = Vec::new();
        for subset in combinations(rows, n) {
            let mut sub = DMatrix::zeros(n, n);
            let mut rhs = DVector::zeros(n);
            for (r, &i) in subset.iter().enumerate() {
                sub.set_row(r, &a.row(i));
                rhs[r] = b[i];
            }
            let Some(x) = sub.lu().solve(&rhs) else { continue };
            if !x.iter().all(|v| v.is_finite()) {
                continue;
            }
            let slack = a * &x - b;
            let scale = 1.0 + x.amax();
            if slack.iter().all(|&s| s <= 1e-9 * scale) && !out.iter().any(|v| (v - &x).amax() <= 1e-9 * scale) {
                out.push(x);
            }
        }
        out
    }

    /// Polygon from its vertices listed in order (either orientation).
    pub fn from_vertices_2d(vertices: &[[f64; 2]]) -> Result<Self> {
        let k = vertices.len();
        if k < 3 {
            return Err(Error::InvalidInput("a polygon needs at least 3 vertices".into()));
        }
        let mut a = DMatrix::zeros(k, 2);
        let mut b = DVector::zeros(k);
        for i in 0..k {
            let p = vertices[i];
            let q = vertices[(i + 1) % k];
            let (ex, ey) = (q[0] - p[0], q[1] - p[1]);
            let (nx, ny) = (ey, -ex);
            a[(i, 0)] = nx;
            a[(i, 1)] = ny;
            b[i] = nx * p[0] + ny * p[1];
        }
        if b.iter().all(|&v| v < 0.0) {
            a = -a;
            b = -b;
        }
        for i in 0..k {
            let s = a.row(i).norm();
            if s > 0.0 {
                a.row_mut(i).unscale_mut(s);
                b[i] /= s;
            }
        }
        Self::new(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_faces(&self) -> usize {
        self.a.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// `{x | a_iᵀx ≤ δ b_i}`.
    pub fn scaled(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("scale {delta} must be positive")));
        }
        Ok(Self {
            a: self.a.clone(),
            b: &self.b * delta,
            vertices: self.vertices.iter().map(|v| v * delta).collect(),
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.num_faces()).all(|i| {
                let ax: f64 = self.a.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
                ax <= self.b[i] + tol
            })
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &self.vertices {
            for j in 0..n {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }

    /// `max_{x ∈ X} ‖x‖_∞`, attained at a vertex.
    pub fn max_inf_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

/// Branch-and-bound region: the first `n` box coordinates must lie in the polytope,
/// remaining coordinates are unconstrained.
pub struct PolytopeRegion<'a> {
    pub polytope: &'a SafePolytope,
}

impl SearchRegion for PolytopeRegion<'_> {
    fn excludes(&self, b: &IntervalBox) -> bool {
        let p = self.polytope;
        let n = p.dim();
        (0..p.num_faces()).any(|i| {
            let mut min_ax = 0.0;
            let mut scale = 0.0;
            for j in 0..n {
                let aij = p.a[(i, j)];
                let iv = b.get(j);
                min_ax += (aij * iv.lo()).min(aij * iv.hi());
                scale += aij.abs() * iv.mag();
            }
            min_ax > p.b[i] + 1e-12 * (1.0 + scale + p.b[i])
        })
    }

    fn probe_points(&self, b: &IntervalBox) -> Vec<Vec<f64>> {
        let n = self.polytope.dim();
        let mid = b.midpoint();
        let mut out = Vec::new();
        if self.polytope.contains(&mid[..n], 0.0) {
            out.push(mid.clone());
        }
        if n <= 8 {
            for c in 0..1usize << n {
                let mut p = mid.clone();
                for j in 0..n {
                    let iv = b.get(j);
                    p[j] = if c >> j & 1 == 1 { iv.hi() } else { iv.lo() };
                }
                if self.polytope.contains(&p[..n], 0.0) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Built-in two-state example plant:
/// `ẋ₁ = −(1+θ₁)x₂ + u₁`, `ẋ₂ = x₁ + (1+θ₂)(x₁²−1)x₂ + u₂`.
#[derive(Clone, Copy, Debug, Default)]
pub struct VanDerPol;

impl VanDerPol {
    /// `θ ∈ [−0.05, 0.05] × [−0.1, 0.1]`.
    pub fn param_box() -> ParamBox {
        ParamBox::new(vec![-0.05, -0.1], vec![0.05, 0.1]).expect("valid box")
    }

    /// Pentagon with vertices (0.3, 0.6), (0.1962, 0.8077), (−0.3375, 0.1406),
    /// (−0.3375, −0.8523), (0.3, −0.2727).
    pub fn safe_polytope() -> SafePolytope {
        SafePolytope::from_vertices_2d(&Self::SAFE_VERTICES).expect("valid polygon")
    }

    pub const SAFE_VERTICES: [[f64; 2]; 5] =
        [[0.3, 0.6], [0.1962, 0.8077], [-0.3375, 0.1406], [-0.3375, -0.8523], [0.3, -0.2727]];

    /// `r(x, u) = −(xᵀx + 0.1 uᵀu)`.
    pub fn reward(x: &[f64], u: &[f64]) -> f64 {
        -(x.iter().map(|v| v * v).sum::<f64>() + 0.1 * u.iter().map(|v| v * v).sum::<f64>())
    }
}

impl PlantModel for VanDerPol {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn dynamics(&self, x: &[f64], u: &[f64], theta: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![
            -(1.0 + theta[0]) * x[1] + u[0],
            x[0] + (1.0 + theta[1]) * (x[0] * x[0] - 1.0) * x[1] + u[1],
        ])
    }

    fn jacobians(&self, x: &[f64], _u: &[f64], theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let jx = DMatrix::from_row_slice(
            2,
            2,
            &[
                0.0,
                -(1.0 + theta[0]),
                1.0 + 2.0 * (1.0 + theta[1]) * x[0] * x[1],
                (1.0 + theta[1]) * (x[0] * x[0] - 1.0),
            ],
        );
        (jx, DMatrix::identity(2, 2))
    }

    fn dynamics_interval(
        &self,
        x: &[Interval],
        u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<Vec<Interval>, IntervalError> {
        Ok(vec![
            -((1.0 + theta[0]) * x[1]) + u[0],
            x[0] + (1.0 + theta[1]) * (x[0].sqr() - 1.0) * x[1] + u[1],
        ])
    }

    fn jacobians_interval(
        &self,
        x: &[Interval],
        _u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<(IntervalMatrix, IntervalMatrix), IntervalError> {
        let mut jx = IntervalMatrix::zeros(2, 2);
        jx.set(0, 1, -(1.0 + theta[0]));
        jx.set(1, 0, 1.0 + 2.0 * (1.0 + theta[1]) * (x[0] * x[1]));
        jx.set(1, 1, (1.0 + theta[1]) * (x[0].sqr() - 1.0));
        let mut ju = IntervalMatrix::zeros(2, 2);
        ju.set(0, 0, Interval::ONE);
        ju.set(1, 1, Interval::ONE);
        Ok((jx, ju))
    }
}

/// Parameter-affine linear plant `ẋ = (A₀ + Σ θ_k A_k) x + (B₀ + Σ θ_k B_k) u`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPlant {
    a0: DMatrix<f64>,
    b0: DMatrix<f64>,
    a_k: Vec<DMatrix<f64>>,
    b_k: Vec<DMatrix<f64>>,
}

impl LinearPlant {
    pub fn new(a0: DMatrix<f64>, b0: DMatrix<f64>, a_k: Vec<DMatrix<f64>>, b_k: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = a0.nrows();
        check_shape("A0", a0.shape(), (n, n))?;
        check_len("B0 rows", b0.nrows(), n)?;
        let m = b0.ncols();
        check_len("B_k count", b_k.len(), a_k.len())?;
        for (ak, bk) in a_k.iter().zip(&b_k) {
            check_shape("A_k", ak.shape(), (n, n))?;
            check_shape("B_k", bk.shape(), (n, m))?;
        }
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("empty state or input dimension".into()));
        }
        Ok(Self { a0, b0, a_k, b_k })
    }

    /// Parameter-free plant `ẋ = A x + B u` with a single unused parameter.
    pub fn fixed(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let (n, m) = (a.nrows(), b.ncols());
        Self::new(a, b, vec![DMatrix::zeros(n, n)], vec![DMatrix::zeros(n, m)])
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn b0(&self) -> &DMatrix<f64> {
        &self.b0
    }

    pub fn a_k(&self) -> &[DMatrix<f64>] {
        &self.a_k
    }

    pub fn b_k(&self) -> &[DMatrix<f64>] {
        &self.b_k
    }

    fn matrices_at(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        for (k, &t) in theta.iter().enumerate() {
            a += &self.a_k[k] * t;
            b += &self.b_k[k] * t;
        }
        (a, b)
    }

    fn interval_matrix(base: &DMatrix<f64>, terms: &[DMatrix<f64>], theta: &[Interval]) -> IntervalMatrix {
        let mut out = IntervalMatrix::from_points(base);
        for i in 0..base.nrows() {
            for j in 0..base.ncols() {
                let mut acc = out.get(i, j);
                for (k, t) in theta.iter().enumerate() {
                    acc = acc + *t * terms[k][(i, j)];
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

impl PlantModel for LinearPlant {
    fn state_dim(&self) -> usize {
        self.a0.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b0.ncols()
    }

    fn param_dim(&self) -> usize {
        self.a_k.len()
    }

    fn dynamics(&self, x: &[f64], u: &[f64], theta: &[f64]) -> DVector<f64> {
        let (a, b) = self.matrices_at(theta);
        a * DVector::from_column_slice(x) + b * DVector::from_column_slice(u)
    }

    fn jacobians(&self, _x: &[f64], _u: &[f64], theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        self.matrices_at(theta)
    }

    fn dynamics_interval(
        &self,
        x: &[Interval],
        u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<Vec<Interval>, IntervalError> {
        let a = Self::interval_matrix(&self.a0, &self.a_k, theta);
        let b = Self::interval_matrix(&self.b0, &self.b_k, theta);
        Ok((0..self.state_dim())
            .map(|i| {
                let mut acc = Interval::ZERO;
                for (j, xj) in x.iter().enumerate() {
                    acc = acc + a.get(i, j) * *xj;
                }
                for (j, uj) in u.iter().enumerate() {
                    acc = acc + b.get(i, j) * *uj;
                }
                acc
            })
            .collect())
    }

    fn jacobians_interval(
        &self,
        _x: &[Interval],
        _u: &[Interval],
        theta: &[Interval],
    ) -> std::result::Result<(IntervalMatrix, IntervalMatrix), IntervalError> {
        Ok((
            Self::interval_matrix(&self.a0, &self.a_k, theta),
            Self::interval_matrix(&self.b0, &self.b_k, theta),
        ))
    }
}
