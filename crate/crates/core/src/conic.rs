//! Small dense semidefinite programs solved with a log-barrier path-following method.
//!
//! A problem has real decision variables `y ∈ R^N`, matrix constraints
//! `F_k(y) = F_k0 + Σ_i y_i F_ki ≽ margin_k·I`, scalar constraints `a_lᵀy + c_l ≥ margin_l`
//! and one of three objectives: none (feasibility), a linear objective to minimize, or
//! `log det G(y)` to maximize. All iterates stay inside the ball `‖y‖₂ ≤ R`
//! ([`SolverOptions::ball_radius`]), which keeps the barrier problems bounded.
//!
//! A phase-I problem (minimize `s` subject to every constraint shifted by `s`) finds a
//! strictly feasible start or proves infeasibility through the barrier duality-gap
//! bound. Phase II follows the central path until the gap bound `θ/t` falls below the
//! tolerance, where `θ` is the total barrier degree. Every returned point is re-checked
//! with a symmetric eigenvalue decomposition, independent of the Cholesky factorizations
//! used inside the solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::min_eig;

/// Tolerance of the independent eigenvalue re-check of returned points.
pub const RECHECK_TOL: f64 = 1e-7;

/// Affine matrix expression `C + Σ y_i M_i` (not necessarily symmetric).
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl Affine {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, terms: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    /// `y_var · m`.
    pub fn var(var: usize, m: DMatrix<f64>) -> Self {
        Self { constant: DMatrix::zeros(m.nrows(), m.ncols()), terms: vec![(var, m)] }
    }

    /// Captures an affine map by evaluating it at the origin and at the unit vectors.
    /// Zero coefficient matrices are dropped.
    pub fn from_fn<F>(num_vars: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>>,
    {
        let mut y = vec![0.0; num_vars];
        let constant = f(&y)?;
        let mut terms = Vec::new();
        for i in 0..num_vars {
            y[i] = 1.0;
            let d = f(&y)? - &constant;
            y[i] = 0.0;
            if d.iter().any(|&v| v != 0.0) {
                terms.push((i, d));
            }
        }
        Ok(Self { constant, terms })
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (i, m) in &self.terms {
            out += m * y[*i];
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            constant: &self.constant * a,
            terms: self.terms.iter().map(|(i, m)| (*i, m * a)).collect(),
        }
    }

    pub fn plus(&self, other: &Affine) -> Self {
        let mut out = self.clone();
        out.constant += &other.constant;
        for (i, m) in &other.terms {
            match out.terms.iter_mut().find(|(j, _)| j == i) {
                Some((_, acc)) => *acc += m,
                None => out.terms.push((*i, m.clone())),
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self.terms.iter().map(|(i, m)| (*i, m.transpose())).collect(),
        }
    }

    /// Largest variable index used, plus one.
    fn var_bound(&self) -> usize {
        self.terms.iter().map(|(i, _)| i + 1).max().unwrap_or(0)
    }
}

/// `[t·I_q, Mᵀ; M, t·I_p] ≽ 0`, i.e. `‖M‖₂ ≤ t`, for a `p×q` expression `M`.
pub fn norm_epigraph(m: &Affine, t: usize) -> Affine {
    let (p, q) = (m.nrows(), m.ncols());
    let embed = |mat: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(p + q, p + q);
        out.view_mut((q, 0), (p, q)).copy_from(mat);
        out.view_mut((0, q), (q, p)).copy_from(&mat.transpose());
        out
    };
    let mut terms: Vec<(usize, DMatrix<f64>)> = m.terms.iter().map(|(i, mat)| (*i, embed(mat))).collect();
    let eye = DMatrix::<f64>::identity(p + q, p + q);
    match terms.iter_mut().find(|(i, _)| *i == t) {
        Some((_, acc)) => *acc += eye,
        None => terms.push((t, eye)),
    }
    Affine { constant: embed(&m.constant), terms }
}

/// Symmetric `n×n` matrix variable stored in upper-triangle order from `first`.
pub fn sym_matrix_var(first: usize, n: usize) -> Affine {
    let mut terms = Vec::with_capacity(n * (n + 1) / 2);
    let mut k = first;
    for i in 0..n {
        for j in i..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            terms.push((k, e));
            k += 1;
        }
    }
    Affine { constant: DMatrix::zeros(n, n), terms }
}

/// General `r×c` matrix variable stored row-major from `first`.
pub fn matrix_var(first: usize, rows: usize, cols: usize) -> Affine {
    let mut terms = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut e = DMatrix::zeros(rows, cols);
            e[(i, j)] = 1.0;
            terms.push((first + i * cols + j, e));
        }
    }
    Affine { constant: DMatrix::zeros(rows, cols), terms }
}

/// `expr(y) ≽ margin·I`; `expr` must be symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConstraint {
    pub name: String,
    pub expr: Affine,
    pub margin: f64,
}

/// `Σ coeffs_i y_i + constant ≥ margin`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
    pub margin: f64,
}

impl LinearConstraint {
    /// `y_var ≥ margin`.
    pub fn nonneg(name: impl Into<String>, var: usize, margin: f64) -> Self {
        Self { name: name.into(), coeffs: vec![(var, 1.0)], constant: 0.0, margin }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(i, a)| a * y[*i]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    Feasibility,
    /// Minimize `Σ c_i y_i`.
    Minimize(Vec<(usize, f64)>),
    /// Maximize `log det G(y)` over `G(y) ≻ 0`.
    MaximizeLogDet(Affine),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub matrix_constraints: Vec<MatrixConstraint>,
    pub linear_constraints: Vec<LinearConstraint>,
    pub objective: Objective,
    /// Optional starting point; need not be feasible.
    pub start: Option<Vec<f64>>,
}

impl SdpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            matrix_constraints: Vec::new(),
            linear_constraints: Vec::new(),
            objective: Objective::Feasibility,
            start: None,
        }
    }

    pub fn add_matrix(&mut self, name: impl Into<String>, expr: Affine, margin: f64) {
        self.matrix_constraints.push(MatrixConstraint { name: name.into(), expr, margin });
    }

    pub fn add_linear(&mut self, c: LinearConstraint) {
        self.linear_constraints.push(c);
    }

    fn validate(&self) -> Result<()> {
        for c in &self.matrix_constraints {
            if c.expr.nrows() != c.expr.ncols() || c.expr.nrows() == 0 {
                return Err(Error::Dimension(format!("constraint {}: matrix must be square", c.name)));
            }
            let sym_err = |m: &DMatrix<f64>| (m - m.transpose()).amax() > 1e-9 * (1.0 + m.amax());
            if sym_err(&c.expr.constant) || c.expr.terms.iter().any(|(_, m)| sym_err(m) || m.shape() != c.expr.constant.shape()) {
                return Err(Error::InvalidInput(format!("constraint {}: matrix is not symmetric", c.name)));
            }
            if c.expr.var_bound() > self.num_vars {
                return Err(Error::Dimension(format!("constraint {}: variable out of range", c.name)));
            }
        }
        for c in &self.linear_constraints {
            if c.coeffs.iter().any(|(i, _)| *i >= self.num_vars) {
                return Err(Error::Dimension(format!("constraint {}: variable out of range", c.name)));
            }
        }
        match &self.objective {
            Objective::Minimize(c) if c.iter().any(|(i, _)| *i >= self.num_vars) => {
                return Err(Error::Dimension("objective variable out of range".into()))
            }
            Objective::MaximizeLogDet(g) if g.nrows() != g.ncols() || g.var_bound() > self.num_vars => {
                return Err(Error::Dimension("log-det argument must be square and in range".into()))
            }
            _ => {}
        }
        if let Some(s) = &self.start {
            if s.len() != self.num_vars {
                return Err(Error::Dimension("start point has the wrong length".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub ball_radius: f64,
    /// Absolute duality-gap target (also applied relative to `1 + |objective|`).
    pub gap_tol: f64,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { ball_radius: 1e5, gap_tol: 1e-8, mu: 20.0, max_outer: 60, max_newton: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    /// Strictly feasible point within the gap tolerance of optimal.
    Optimal,
    /// Strictly feasible point; optimality not established (or no objective).
    Feasible,
    /// Infeasible within the search ball.
    Infeasible,
    /// No conclusion within the iteration budget.
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    /// Objective value in the problem's own sense (log det for maximization).
    pub objective: f64,
    /// `min_k (λ_min(F_k(y)) − margin_k)` over all constraints (eigenvalue re-check).
    pub margin: f64,
    /// Objective after each phase-II centering.
    pub history: Vec<f64>,
    pub newton_steps: usize,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::Feasible)
    }
}

/// Barrier over the (possibly phase-I augmented) problem.
struct Barrier<'a> {
    p: &'a SdpProblem,
    /// Index of the phase-I shift variable, if any.
    shift: Option<usize>,
    n: usize,
    ball_vars: usize,
    r2: f64,
}

enum Eval {
    Outside,
    Inside { value: f64, grad: DVector<f64>, hess: DMatrix<f64> },
}

fn chol_logdet_inv(x: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let c = x.clone().cholesky()?;
    let logdet = 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some((logdet, c.inverse()))
}

impl Barrier<'_> {
    fn shift_of(&self, y: &[f64]) -> f64 {
        self.shift.map_or(0.0, |s| y[s])
    }

    /// Adds `−log det(M(y))` (with `M = expr + shift·I − margin·I` for constraints).
    fn add_logdet_term(
        &self,
        expr: &Affine,
        margin: f64,
        with_shift: bool,
        weight: f64,
        y: &[f64],
        value: &mut f64,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
    ) -> bool {
        let s = expr.nrows();
        let mut x = expr.eval(y);
        let shift = if with_shift { self.shift_of(y) } else { 0.0 };
        for d in 0..s {
            x[(d, d)] += shift - margin;
        }
        let Some((logdet, inv)) = chol_logdet_inv(&x) else { return false };
        *value -= weight * logdet;
        let mut terms: Vec<(usize, DMatrix<f64>)> = expr.terms.iter().map(|(i, m)| (*i, &inv * m)).collect();
        if with_shift {
            if let Some(si) = self.shift {
                terms.push((si, inv.clone()));
            }
        }
        for (a, (i, si)) in terms.iter().enumerate() {
            grad[*i] -= weight * si.trace();
            for (j, sj) in terms.iter().skip(a) {
                // tr(S_i S_j)
                let mut tr = 0.0;
                for r in 0..s {
                    for c in 0..s {
                        tr += si[(r, c)] * sj[(c, r)];
                    }
                }
                hess[(*i, *j)] += weight * tr;
                if *i != *j {
                    hess[(*j, *i)] += weight * tr;
                }
            }
        }
        true
    }

    /// `t·objective + barrier` where `objective` is supplied as linear coefficients and
    /// an optional log-det term (weighted by `t`).
    fn eval(&self, y: &[f64], t: f64, lin_obj: &[(usize, f64)], logdet_obj: Option<&Affine>) -> Eval {
        let n = self.n;
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let with_shift = self.shift.is_some();
        for c in &self.p.matrix_constraints {
            if !self.add_logdet_term(&c.expr, c.margin, with_shift, 1.0, y, &mut value, &mut grad, &mut hess) {
                return Eval::Outside;
            }
        }
        if let Some(g) = logdet_obj {
            let weight = if with_shift { 1.0 } else { t };
            if !self.add_logdet_term(g, 0.0, with_shift, weight, y, &mut value, &mut grad, &mut hess) {
                return Eval::Outside;
            }
        }
        for c in &self.p.linear_constraints {
            let h = c.eval(y) + self.shift_of(y) - c.margin;
            if !(h > 0.0) {
                return Eval::Outside;
            }
            value -= h.ln();
            let mut coeffs = c.coeffs.clone();
            if let Some(si) = self.shift {
                coeffs.push((si, 1.0));
            }
            for (i, a) in &coeffs {
                grad[*i] -= a / h;
                for (j, b) in &coeffs {
                    hess[(*i, *j)] += a * b / (h * h);
                }
            }
        }
        let norm2: f64 = y[..self.ball_vars].iter().map(|v| v * v).sum();
        let h = self.r2 - norm2;
        if !(h > 0.0) {
            return Eval::Outside;
        }
        value -= h.ln();
        for i in 0..self.ball_vars {
            grad[i] += 2.0 * y[i] / h;
            hess[(i, i)] += 2.0 / h;
            for j in 0..self.ball_vars {
                hess[(i, j)] += 4.0 * y[i] * y[j] / (h * h);
            }
        }
        for (i, c) in lin_obj {
            value += t * c * y[*i];
            grad[*i] += t * c;
        }
        Eval::Inside { value, grad, hess }
    }

    fn degree(&self, logdet_obj: bool) -> f64 {
        let mut theta: usize = self.p.matrix_constraints.iter().map(|c| c.expr.nrows()).sum();
        theta += self.p.linear_constraints.len() + 1;
        if logdet_obj && self.shift.is_some() {
            if let Objective::MaximizeLogDet(g) = &self.p.objective {
                theta += g.nrows();
            }
        }
        theta as f64
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    for jitter in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += jitter * scale;
        }
        if let Some(c) = h.cholesky() {
            let d = -c.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
    }
    hess.clone().lu().solve(&(-grad)).filter(|d| d.iter().all(|v| v.is_finite()))
}

enum Centering {
    Converged,
    Stalled,
    Budget,
}

/// Damped Newton minimization of the barrier function at fixed `t`.
fn center(
    bar: &Barrier<'_>,
    y: &mut Vec<f64>,
    t: f64,
    lin_obj: &[(usize, f64)],
    logdet_obj: Option<&Affine>,
    budget: &mut usize,
    steps: &mut usize,
    max_steps: usize,
    mut early_stop: impl FnMut(&[f64]) -> bool,
) -> Centering {
    for _ in 0..max_steps {
        if early_stop(y) {
            return Centering::Converged;
        }
        if *budget == 0 {
            return Centering::Budget;
        }
        *budget -= 1;
        *steps += 1;
        let Eval::Inside { value, grad, hess } = bar.eval(y, t, lin_obj, logdet_obj) else {
            return Centering::Stalled;
        };
        let Some(dir) = newton_direction(&hess, &grad) else { return Centering::Stalled };
        let decrement = -grad.dot(&dir);
        if decrement.is_nan() {
            return Centering::Stalled;
        }
        // below this the decrease is lost in rounding of the barrier value
        let noise = 1e-13 * (1.0 + value.abs());
        if decrement / 2.0 <= 1e-10 || decrement <= noise {
            return Centering::Converged;
        }
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Eval::Inside { value: v, .. } = bar.eval(&trial, t, lin_obj, logdet_obj) {
                if v <= value - 0.01 * step * decrement {
                    *y = trial;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-14 {
                return if decrement <= 1e4 * noise { Centering::Converged } else { Centering::Stalled };
            }
        }
    }
    Centering::Budget
}

fn objective_value(p: &SdpProblem, y: &[f64]) -> f64 {
    match &p.objective {
        Objective::Feasibility => 0.0,
        Objective::Minimize(c) => c.iter().map(|(i, a)| a * y[*i]).sum(),
        Objective::MaximizeLogDet(g) => {
            chol_logdet_inv(&g.eval(y)).map_or(f64::NEG_INFINITY, |(ld, _)| ld)
        }
    }
}

/// Minimum constraint slack from eigenvalues: `min_k λ_min(F_k(y)) − margin_k`.
pub fn constraint_margin(p: &SdpProblem, y: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for c in &p.matrix_constraints {
        let m = c.expr.eval(y);
        worst = worst.min(min_eig(&m) - c.margin);
    }
    for c in &p.linear_constraints {
        worst = worst.min(c.eval(y) - c.margin);
    }
    if let Objective::MaximizeLogDet(g) = &p.objective {
        worst = worst.min(min_eig(&g.eval(y)));
    }
    worst
}

/// Margin accepted by the re-check, relative to the size of the constraint data.
fn recheck_threshold(p: &SdpProblem, y: &[f64]) -> f64 {
    let scale = p
        .matrix_constraints
        .iter()
        .map(|c| c.expr.eval(y).amax())
        .fold(1.0, f64::max);
    -RECHECK_TOL * scale
}

/// Objective weight that best centers `y`: minimizes `‖t∇f₀ + ∇φ‖` in the barrier
/// Hessian norm.
fn initial_weight(bar: &Barrier<'_>, y: &[f64], lin: &[(usize, f64)], logdet: Option<&Affine>) -> f64 {
    let (Eval::Inside { grad: g_bar, hess, .. }, Eval::Inside { grad: g_one, .. }) =
        (bar.eval(y, 0.0, lin, logdet), bar.eval(y, 1.0, lin, logdet))
    else {
        return 1.0;
    };
    let g_obj = &g_one - &g_bar;
    let Some(h_obj) = newton_direction(&hess, &g_obj) else { return 1.0 };
    let denom = g_obj.dot(&h_obj);
    let t = g_bar.dot(&h_obj) / denom;
    if t.is_finite() && denom.abs() > 0.0 {
        t.clamp(1e-6, 1e8)
    } else {
        1.0
    }
}

fn phase_one(p: &SdpProblem, opts: &SolverOptions, steps: &mut usize) -> (SdpStatus, Vec<f64>) {
    let n = p.num_vars;
    let mut y0 = p.start.clone().unwrap_or_else(|| vec![0.0; n]);
    let norm = y0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= 0.5 * opts.ball_radius {
        let s = 0.5 * opts.ball_radius / norm;
        y0.iter_mut().for_each(|v| *v *= s);
    }
    // already strictly feasible with some room
    let start_margin = constraint_margin(p, &y0);
    if p.matrix_constraints.is_empty() && p.linear_constraints.is_empty() && !matches!(p.objective, Objective::MaximizeLogDet(_)) {
        return (SdpStatus::Feasible, y0);
    }
    if start_margin > 0.0 {
        return (SdpStatus::Feasible, y0);
    }
    let mut y = y0;
    y.push(1.0 - start_margin);
    let bar = Barrier { p, shift: Some(n), n: n + 1, ball_vars: n, r2: opts.ball_radius * opts.ball_radius };
    let logdet = match &p.objective {
        Objective::MaximizeLogDet(g) => Some(g),
        _ => None,
    };
    let theta = bar.degree(true);
    let lin = [(n, 1.0)];
    let mut t = initial_weight(&bar, &y, &lin, logdet);
    let mut budget = opts.max_newton * opts.max_outer;
    for _ in 0..opts.max_outer {
        // the first strictly feasible iterate is kept, which stays close to the start
        let outcome = center(&bar, &mut y, t, &lin, logdet, &mut budget, steps, opts.max_newton, |y| y[n] < 0.0);
        if y[n] < 0.0 && constraint_margin(p, &y[..n]) > 0.0 {
            return (SdpStatus::Feasible, y[..n].to_vec());
        }
        match outcome {
            Centering::Converged => {}
            Centering::Stalled | Centering::Budget => {
                return (SdpStatus::MaxIterations, y[..n].to_vec());
            }
        }
        // s* ≥ s(t) − θ/t
        if y[n] - theta / t > 0.0 {
            return (SdpStatus::Infeasible, y[..n].to_vec());
        }
        t *= opts.mu;
    }
    (SdpStatus::MaxIterations, y[..n].to_vec())
}

/// Solves the problem; see the module documentation for the method.
pub fn solve(p: &SdpProblem) -> Result<SdpSolution> {
    solve_with(p, &SolverOptions::default())
}

pub fn solve_with(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    let mut steps = 0;
    let (status, mut y) = phase_one(p, opts, &mut steps);
    let finish = |status: SdpStatus, y: Vec<f64>, history: Vec<f64>, steps: usize| {
        let margin = constraint_margin(p, &y);
        let status = if matches!(status, SdpStatus::Optimal | SdpStatus::Feasible) && margin < recheck_threshold(p, &y) {
            SdpStatus::MaxIterations
        } else {
            status
        };
        SdpSolution { status, objective: objective_value(p, &y), y, margin, history, newton_steps: steps }
    };
    if status != SdpStatus::Feasible {
        return Ok(finish(status, y, Vec::new(), steps));
    }
    let (lin, logdet): (Vec<(usize, f64)>, Option<&Affine>) = match &p.objective {
        Objective::Feasibility => return Ok(finish(SdpStatus::Feasible, y, Vec::new(), steps)),
        Objective::Minimize(c) => (c.clone(), None),
        Objective::MaximizeLogDet(g) => (Vec::new(), Some(g)),
    };
    let bar = Barrier { p, shift: None, n: p.num_vars, ball_vars: p.num_vars, r2: opts.ball_radius * opts.ball_radius };
    let theta = bar.degree(false);
    let mut t = initial_weight(&bar, &y, &lin, logdet);
    let mut budget = opts.max_newton * opts.max_outer;
    let mut history = Vec::new();
    for _ in 0..opts.max_outer {
        let before = y.clone();
        match center(&bar, &mut y, t, &lin, logdet, &mut budget, &mut steps, opts.max_newton, |_| false) {
            Centering::Converged => {}
            Centering::Stalled | Centering::Budget => {
                if constraint_margin(p, &y) <= 0.0 {
                    y = before;
                }
                return Ok(finish(SdpStatus::Feasible, y, history, steps));
            }
        }
        let obj = objective_value(p, &y);
        history.push(obj);
        if theta / t <= opts.gap_tol * (1.0 + obj.abs()) {
            return Ok(finish(SdpStatus::Optimal, y, history, steps));
        }
        t *= opts.mu;
    }
    Ok(finish(SdpStatus::Feasible, y, history, steps))
}

/// Maximizes `log det` of the problem's log-det objective.
pub fn logdet_maximize(p: &SdpProblem) -> Result<SdpSolution> {
    if !matches!(p.objective, Objective::MaximizeLogDet(_)) {
        return Err(Error::InvalidInput("log-det maximization needs a log-det objective".into()));
    }
    solve(p)
}
