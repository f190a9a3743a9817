//! Jacobian sector bounds of the nonlinearity-plus-parameter-variation (NPV) term and
//! the polytopic hull of the parameter-dependent linearization.
//!
//! For a gain `K` the closed loop is written `ẋ = A₀,K x + ζ_K(x, u_ρ, θ)` with
//! `ζ_K(x, u_ρ, θ) = f(x, K x + u_ρ, θ) − A₀,K x` and `A₀,K = A₀ + B₀ K`. The sector
//! holds elementwise bounds of `[∂ζ_K/∂x, ∂ζ_K/∂u_ρ]` over the state domain, a box of
//! admissible perturbation inputs and the parameter box.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_len, check_shape, Error, Result};
use crate::interval::{
    bound_range, bound_range_in, BoundOptions, Interval, IntervalBox, IntervalError,
};
use crate::model::{linearize, LinearizedDynamics, ParamBox, PlantModel, PolytopeRegion, SafePolytope};

pub const DEFAULT_SECTOR_TOL: f64 = 1e-3;

/// Parameter-dependent entries allowed before vertex enumeration is refused.
pub const MAX_DEPENDENT_ENTRIES: usize = 20;

/// Variation threshold used to classify a linearization entry as parameter-dependent.
const DEPENDENCE_THRESHOLD: f64 = 1e-12;

/// Which Jacobian block of the NPV an entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    /// `∂ζ_K/∂x`, columns `0..n` of the sector.
    State,
    /// `∂ζ_K/∂u_ρ`, columns `n..n+m` of the sector.
    Input,
}

/// Box `‖u_ρ‖_∞ ≤ L · max_{x∈X} ‖x‖_∞` over-approximating the inputs any
/// `L`-Lipschitz perturbation controller with `π(0) = 0` can produce on `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlBox {
    u_max: Vec<f64>,
}

impl ControlBox {
    pub fn new(lipschitz: f64, domain: &SafePolytope, input_dim: usize) -> Result<Self> {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::InvalidInput(format!("Lipschitz budget {lipschitz} must be nonnegative")));
        }
        Ok(Self { u_max: vec![lipschitz * domain.max_inf_norm(); input_dim] })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.u_max
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.u_max.len() && u.iter().zip(&self.u_max).all(|(v, m)| v.abs() <= *m)
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.u_max.iter().map(|&m| Interval::new(-m, m).expect("nonnegative")).collect()
    }
}

/// Elementwise bounds `lower ≤ [∂ζ_K/∂x  ∂ζ_K/∂u_ρ] ≤ upper` (n × (n+m)).
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBound {
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub lipschitz: f64,
    pub tol: f64,
    /// Every entry was bounded to within `tol` (no budget exhaustion).
    pub tight: bool,
    /// `∂f/∂u` equals `B₀` on the whole domain, so the bounds do not depend on the gain.
    pub gain_independent: bool,
}

impl SectorBound {
    pub fn state_dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.lower.ncols() - self.lower.nrows()
    }

    pub fn entry(&self, i: usize, col: usize) -> Interval {
        Interval::new(self.lower[(i, col)], self.upper[(i, col)]).expect("ordered sector")
    }

    /// Sector given directly by its bounds (used for tests and reloaded artifacts).
    pub fn from_bounds(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        check_shape("sector upper bound", upper.shape(), lower.shape())?;
        let (n, cols) = lower.shape();
        if cols < n || n == 0 {
            return Err(Error::Dimension(format!("sector must be n×(n+m), got {n}×{cols}")));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidInput("sector lower bound exceeds upper bound".into()));
        }
        let m = cols - n;
        Ok(Self {
            lower,
            upper,
            gain: DMatrix::zeros(m, n),
            lipschitz: 0.0,
            tol: 0.0,
            tight: true,
            gain_independent: false,
        })
    }

    /// Widens every entry symmetrically about its midpoint by `factor`.
    pub fn inflated(&self, factor: f64) -> Self {
        let mid = (&self.lower + &self.upper) * 0.5;
        let half = (&self.upper - &self.lower) * (0.5 * factor);
        Self { lower: &mid - &half, upper: &mid + &half, ..self.clone() }
    }
}

/// `ζ_K(x, u_ρ, θ) = f(x, K x + u_ρ, θ) − A₀,K x`.
pub fn npv(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    a0k: &DMatrix<f64>,
    x: &[f64],
    u_rho: &[f64],
    theta: &[f64],
) -> Result<DVector<f64>> {
    let xv = DVector::from_column_slice(x);
    let u = gain * &xv + DVector::from_column_slice(u_rho);
    let f = crate::model::eval_dynamics(model, x, u.as_slice(), theta)?;
    Ok(f - a0k * xv)
}

/// `(∂ζ_K/∂x, ∂ζ_K/∂u_ρ) = (J_{f,x} + J_{f,u} K − A₀,K, J_{f,u})` evaluated at
/// `(x, K x + u_ρ, θ)`.
pub fn npv_jacobians(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    a0k: &DMatrix<f64>,
    x: &[f64],
    u_rho: &[f64],
    theta: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_shape("gain", gain.shape(), (model.input_dim(), model.state_dim()))?;
    let u = gain * DVector::from_column_slice(x) + DVector::from_column_slice(u_rho);
    let (jx, ju) = crate::model::eval_jacobians(model, x, u.as_slice(), theta)?;
    Ok((jx + &ju * gain - a0k, ju))
}

pub fn npv_jacobian_entry(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    a0k: &DMatrix<f64>,
    block: Block,
    (i, j): (usize, usize),
    x: &[f64],
    u_rho: &[f64],
    theta: &[f64],
) -> Result<f64> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let cols = match block {
        Block::State => n,
        Block::Input => m,
    };
    if i >= n || j >= cols {
        return Err(Error::InvalidInput(format!("entry ({i}, {j}) out of range for {block:?} block")));
    }
    let (jx, ju) = npv_jacobians(model, gain, a0k, x, u_rho, theta)?;
    Ok(match block {
        Block::State => jx[(i, j)],
        Block::Input => ju[(i, j)],
    })
}

struct EntryEvaluator<'a> {
    model: &'a dyn PlantModel,
    gain: &'a DMatrix<f64>,
    a0k: &'a DMatrix<f64>,
    a0: &'a DMatrix<f64>,
    gain_independent: bool,
}

impl EntryEvaluator<'_> {
    fn split<'b, T>(&self, v: &'b [T]) -> (&'b [T], &'b [T], &'b [T]) {
        let (n, m) = (self.model.state_dim(), self.model.input_dim());
        (&v[..n], &v[n..n + m], &v[n + m..])
    }

    fn interval(&self, b: &IntervalBox, i: usize, col: usize) -> std::result::Result<Interval, IntervalError> {
        let n = self.model.state_dim();
        let (x, u_rho, theta) = self.split(b.intervals());
        let u: Vec<Interval> = (0..u_rho.len())
            .map(|r| {
                let mut acc = u_rho[r];
                for (c, xc) in x.iter().enumerate() {
                    acc = acc + *xc * self.gain[(r, c)];
                }
                acc
            })
            .collect();
        let (jx, ju) = self.model.jacobians_interval(x, &u, theta)?;
        if col >= n {
            return Ok(ju.get(i, col - n));
        }
        if self.gain_independent {
            // J_{f,u} K − B₀ K vanishes identically
            return Ok(jx.get(i, col) - Interval::point(self.a0[(i, col)]));
        }
        let mut acc = jx.get(i, col) - Interval::point(self.a0k[(i, col)]);
        for l in 0..ju.ncols() {
            acc = acc + ju.get(i, l) * self.gain[(l, col)];
        }
        Ok(acc)
    }

    fn point(&self, p: &[f64], i: usize, col: usize) -> f64 {
        let n = self.model.state_dim();
        let (x, u_rho, theta) = self.split(p);
        let u = self.gain * DVector::from_column_slice(x) + DVector::from_column_slice(u_rho);
        let (jx, ju) = self.model.jacobians(x, u.as_slice(), theta);
        if col >= n {
            ju[(i, col - n)]
        } else if self.gain_independent {
            jx[(i, col)] - self.a0[(i, col)]
        } else {
            (jx + &ju * self.gain - self.a0k)[(i, col)]
        }
    }
}

/// Checks whether `J_{f,u} − B₀` is exactly zero over the search box.
fn input_jacobian_constant(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    root: &IntervalBox,
) -> std::result::Result<bool, IntervalError> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let iv = root.intervals();
    let (x, u_rho, theta) = (&iv[..n], &iv[n..n + m], &iv[n + m..]);
    let u: Vec<Interval> = (0..m)
        .map(|r| x.iter().enumerate().fold(u_rho[r], |acc, (c, xc)| acc + *xc * gain[(r, c)]))
        .collect();
    let (_, ju) = model.jacobians_interval(x, &u, theta)?;
    Ok(ju.sub_point(b0).is_exact_zero())
}

/// Bounds every NPV Jacobian entry over `domain × ControlBox(L) × Θ` to within `tol`
/// per side (conservatively). Entries are bounded in parallel.
pub fn compute_sector(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    lipschitz: f64,
    domain: &SafePolytope,
    params: &ParamBox,
    tol: f64,
) -> Result<SectorBound> {
    compute_sector_with(model, gain, lipschitz, domain, params, tol, BoundOptions::default())
}

pub fn compute_sector_with(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    lipschitz: f64,
    domain: &SafePolytope,
    params: &ParamBox,
    tol: f64,
    opts: BoundOptions,
) -> Result<SectorBound> {
    let (n, m) = (model.state_dim(), model.input_dim());
    check_shape("gain", gain.shape(), (m, n))?;
    check_len("safe polytope dimension", domain.dim(), n)?;
    check_len("parameter box dimension", params.dim(), model.param_dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("sector tolerance {tol} must be positive")));
    }
    let lin0 = linearize(model, &vec![0.0; model.param_dim()])?;
    let a0k = lin0.closed_loop(gain)?;
    let control = ControlBox::new(lipschitz, domain, m)?;

    let (xlo, xhi) = domain.bounding_box();
    let mut dims: Vec<Interval> =
        xlo.iter().zip(&xhi).map(|(&l, &h)| Interval::new(l, h)).collect::<std::result::Result<_, _>>()?;
    dims.extend(control.intervals());
    dims.extend(params.intervals());
    let root = IntervalBox::new(dims)?;

    let gain_independent = input_jacobian_constant(model, gain, &lin0.b, &root)?;
    let eval = EntryEvaluator { model, gain, a0k: &a0k, a0: &lin0.a, gain_independent };
    let region = PolytopeRegion { polytope: domain };

    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n + m).map(move |c| (i, c))).collect();
    let results: Vec<std::result::Result<(Interval, bool), IntervalError>> = cells
        .par_iter()
        .map(|&(i, c)| {
            let whole = eval.interval(&root, i, c)?;
            if whole.is_point() {
                return Ok((whole, true));
            }
            let r = bound_range_in(
                |b: &IntervalBox| eval.interval(b, i, c),
                |p: &[f64]| eval.point(p, i, c),
                &region,
                &root,
                tol,
                opts,
            )?;
            Ok((r.range, r.tight))
        })
        .collect();

    let mut lower = DMatrix::zeros(n, n + m);
    let mut upper = DMatrix::zeros(n, n + m);
    let mut tight = true;
    for (&(i, c), r) in cells.iter().zip(results) {
        let (iv, t) = r?;
        lower[(i, c)] = iv.lo();
        upper[(i, c)] = iv.hi();
        tight &= t;
    }
    Ok(SectorBound { lower, upper, gain: gain.clone(), lipschitz, tol, tight, gain_independent })
}

/// Polytopic hull of `{(A_θ, B_θ) | θ ∈ Θ}` obtained by replacing every
/// parameter-dependent entry with its lower or upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyVertices {
    /// Parameter-dependent entries: block and `(row, col)` within it.
    pub dependent: Vec<(Block, usize, usize)>,
    /// Bounds of the dependent entries over `Θ`, in the order of `dependent`.
    pub bounds: Vec<Interval>,
    /// Vertex `v` takes the upper bound of `dependent[b]` when bit `b` of `v` is set.
    pub vertices: Vec<LinearizedDynamics>,
}

impl UncertaintyVertices {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Convex weights `w` with `Σ w_v (A_v, B_v) = (A, B)` when every dependent entry of
    /// `(A, B)` lies within its bounds (product weights); `None` otherwise.
    pub fn hull_weights(&self, lin: &LinearizedDynamics) -> Option<Vec<f64>> {
        let base = self.vertices.first()?;
        let mut t = Vec::with_capacity(self.dependent.len());
        for ((block, i, j), iv) in self.dependent.iter().zip(&self.bounds) {
            let v = match block {
                Block::State => lin.a[(*i, *j)],
                Block::Input => lin.b[(*i, *j)],
            };
            let slack = 1e-12 * (1.0 + v.abs());
            if v < iv.lo() - slack || v > iv.hi() + slack {
                return None;
            }
            t.push(if iv.width() > 0.0 { ((v - iv.lo()) / iv.width()).clamp(0.0, 1.0) } else { 0.0 });
        }
        // entries outside the dependent set must match exactly
        let mut dep_mask_a = DMatrix::from_element(base.a.nrows(), base.a.ncols(), false);
        let mut dep_mask_b = DMatrix::from_element(base.b.nrows(), base.b.ncols(), false);
        for (block, i, j) in &self.dependent {
            match block {
                Block::State => dep_mask_a[(*i, *j)] = true,
                Block::Input => dep_mask_b[(*i, *j)] = true,
            }
        }
        let fixed_ok = base.a.iter().zip(lin.a.iter()).zip(dep_mask_a.iter()).all(|((x, y), d)| *d || (x - y).abs() <= 1e-12)
            && base.b.iter().zip(lin.b.iter()).zip(dep_mask_b.iter()).all(|((x, y), d)| *d || (x - y).abs() <= 1e-12);
        if !fixed_ok {
            return None;
        }
        Some(
            (0..self.vertices.len())
                .map(|v| {
                    t.iter()
                        .enumerate()
                        .map(|(b, &tb)| if v >> b & 1 == 1 { tb } else { 1.0 - tb })
                        .product()
                })
                .collect(),
        )
    }
}

pub fn uncertainty_vertices(model: &dyn PlantModel, params: &ParamBox, tol: f64) -> Result<UncertaintyVertices> {
    check_len("parameter box dimension", params.dim(), model.param_dim())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    let (n, m) = (model.state_dim(), model.input_dim());
    let mut samples = params.corners();
    samples.push(params.center());
    let lins = samples.iter().map(|t| linearize(model, t)).collect::<Result<Vec<_>>>()?;

    let varies = |get: &dyn Fn(&LinearizedDynamics) -> f64| {
        let (lo, hi) = lins.iter().map(get).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        hi - lo > DEPENDENCE_THRESHOLD
    };
    let mut dependent = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if varies(&|l: &LinearizedDynamics| l.a[(i, j)]) {
                dependent.push((Block::State, i, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            if varies(&|l: &LinearizedDynamics| l.b[(i, j)]) {
                dependent.push((Block::Input, i, j));
            }
        }
    }
    if dependent.len() > MAX_DEPENDENT_ENTRIES {
        return Err(Error::VertexExplosion(dependent.len()));
    }

    let zero_x = vec![Interval::ZERO; n];
    let zero_u = vec![Interval::ZERO; m];
    let root = IntervalBox::new(params.intervals());
    let bounds = dependent
        .iter()
        .map(|&(block, i, j)| {
            let ifn = |b: &IntervalBox| {
                let (ja, jb) = model.jacobians_interval(&zero_x, &zero_u, b.intervals())?;
                Ok(match block {
                    Block::State => ja.get(i, j),
                    Block::Input => jb.get(i, j),
                })
            };
            let pfn = |t: &[f64]| {
                let (ja, jb) = model.jacobians(&vec![0.0; n], &vec![0.0; m], t);
                match block {
                    Block::State => ja[(i, j)],
                    Block::Input => jb[(i, j)],
                }
            };
            let root = root.clone()?;
            Ok(bound_range(ifn, pfn, &root, tol, BoundOptions::default())?.range)
        })
        .collect::<Result<Vec<Interval>>>()?;

    // a degenerate Θ has no dependent entries; its single vertex is the nominal model
    let nominal = linearize(model, &params.center())?;
    let vertices = (0..1usize << dependent.len())
        .map(|v| {
            let mut lin = nominal.clone();
            for (b, (&(block, i, j), iv)) in dependent.iter().zip(&bounds).enumerate() {
                let val = if v >> b & 1 == 1 { iv.hi() } else { iv.lo() };
                match block {
                    Block::State => lin.a[(i, j)] = val,
                    Block::Input => lin.b[(i, j)] = val,
                }
            }
            lin
        })
        .collect();
    Ok(UncertaintyVertices { dependent, bounds, vertices })
}
