//! Iterative synthesis of a nominal gain, a Lipschitz budget and a safe ellipsoid.
//!
//! The nominal problem maximizes `log det Q` subject to closed-loop Lyapunov LMIs at
//! every uncertainty vertex and `‖Q a_i‖₂ ≤ b_i` for every face of the safe polytope;
//! `P⁰ = Q⁻¹`, `K⁰ = Y Q⁻¹`. Each iteration then grows the domain scale `δ` and the
//! Lipschitz budget `L` by fixed steps, recomputes the sector, and alternates a gain
//! update (nearest `K` in spectral norm with `P` held) with a Lyapunov update (nearest
//! `P` with `K` held). The first infeasible iteration ends the loop; the last feasible
//! iterate is returned with the largest level set inside the scaled domain.

use nalgebra::DMatrix;

use crate::certificate::{
    is_negative_definite, max_level, reduce_lmi, sector_qc_blocks, stability_lmi, verify_certificate, QcMultipliers,
    StabilityCertificate, Verdict,
};
use crate::conic::{matrix_var, norm_epigraph, solve_with, sym_matrix_var, Affine, LinearConstraint, Objective, SdpProblem, SolverOptions};
use crate::error::{check_len, Error, Result};
use crate::linalg::{eig_real_parts, inverse, max_eig, min_eig, sym_pack, symmetrize};
use crate::model::{linearize, ParamBox, PlantModel, SafePolytope};
use crate::sector::{compute_sector, uncertainty_vertices, SectorBound, DEFAULT_SECTOR_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisConfig {
    /// Lipschitz budget gained per unit of domain scale.
    pub tradeoff: f64,
    pub n_steps: usize,
    pub sector_tol: f64,
    /// Strictness margin of every LMI handed to the solver.
    pub lmi_margin: f64,
    /// Lower bound on `λ_min(P)` in the Lyapunov update.
    pub p_min_eig: f64,
    /// Decay rate `α` required of the nominal gain at every vertex
    /// (`QAᵀ + AQ + BY + YᵀBᵀ ≼ −2αQ`) when choosing the minimum-norm `Y`.
    pub nominal_decay: f64,
    pub solver: SolverOptions,
    /// Fault injection: treat this iteration (1-based) as infeasible.
    pub fail_at: Option<usize>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            tradeoff: 1.1,
            n_steps: 20,
            sector_tol: DEFAULT_SECTOR_TOL,
            lmi_margin: 1e-4,
            p_min_eig: 1e-6,
            nominal_decay: 1.0,
            solver: SolverOptions::default(),
            fail_at: None,
        }
    }
}

impl SynthesisConfig {
    pub fn step(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if !(self.tradeoff >= 0.0) || !self.tradeoff.is_finite() {
            return Err(Error::InvalidInput(format!("trade-off {} must be nonnegative", self.tradeoff)));
        }
        if !(self.sector_tol > 0.0) {
            return Err(Error::InvalidInput("sector tolerance must be positive".into()));
        }
        if !(self.nominal_decay >= 0.0) {
            return Err(Error::InvalidInput("nominal decay rate must be nonnegative".into()));
        }
        if !(self.lmi_margin > 0.0) || !(self.p_min_eig > 0.0) {
            return Err(Error::InvalidInput("solver margins must be positive".into()));
        }
        Ok(())
    }
}

/// Gain, Lyapunov matrix and multipliers of one feasible iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub gain: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub multipliers: QcMultipliers,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Feasible { iterate: Iterate, sector: SectorBound },
    Infeasible(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub delta: f64,
    pub lipschitz: f64,
    pub feasible: bool,
    /// Real parts of `eig(A₀ + B₀K)` for the iterate's gain (previous gain if infeasible).
    pub eig_real: Vec<f64>,
    /// `max_level(P, δX)` for the iterate (`NaN` if infeasible).
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub gain: DMatrix<f64>,
    pub lipschitz: f64,
    pub p: DMatrix<f64>,
    pub level: f64,
    pub scale: f64,
    pub multipliers: QcMultipliers,
    /// Sector of the final iterate (`None` when no iteration succeeded).
    pub sector: Option<SectorBound>,
    pub successful_steps: usize,
    pub initial_gain: DMatrix<f64>,
    pub initial_p: DMatrix<f64>,
    pub log: Vec<IterationRecord>,
}

impl SynthesisResult {
    /// Certificate for the final iterate; `None` for the linear-only fallback.
    pub fn certificate(&self) -> Option<StabilityCertificate> {
        self.sector.as_ref()?;
        Some(StabilityCertificate {
            gain: self.gain.clone(),
            lipschitz: self.lipschitz,
            p: self.p.clone(),
            multipliers: self.multipliers.clone(),
            level: self.level,
            scale: self.scale,
        })
    }
}

/// Solves the nominal log-det problem over the uncertainty vertices.
pub fn init_nominal(
    model: &dyn PlantModel,
    params: &ParamBox,
    safe: &SafePolytope,
    config: &SynthesisConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (model.state_dim(), model.input_dim());
    check_len("safe polytope dimension", safe.dim(), n)?;
    let verts = uncertainty_vertices(model, params, config.sector_tol)?;
    let nq = n * (n + 1) / 2;
    let q = sym_matrix_var(0, n);
    let y = matrix_var(nq, m, n);
    // closed-loop Lyapunov expression QAᵀ + AQ + BY + YᵀBᵀ at a vertex, with Q either a
    // variable or fixed
    let vertex_expr = |lin: &crate::model::LinearizedDynamics, q: &Affine, y: &Affine| {
        let aq = Affine {
            constant: &lin.a * &q.constant,
            terms: q.terms.iter().map(|(i, e)| (*i, &lin.a * e)).collect(),
        };
        let by = Affine {
            constant: &lin.b * &y.constant,
            terms: y.terms.iter().map(|(i, e)| (*i, &lin.b * e)).collect(),
        };
        let sum = aq.plus(&by);
        sum.plus(&sum.transpose())
    };
    let mut prob = SdpProblem::new(nq + m * n);
    for (v, lin) in verts.vertices.iter().enumerate() {
        prob.add_matrix(format!("vertex {v}"), vertex_expr(lin, &q, &y).scaled(-1.0), config.lmi_margin);
    }
    let a = safe.normals();
    for f in 0..safe.num_faces() {
        let af = DMatrix::from_iterator(n, 1, a.row(f).iter().copied());
        let bf = safe.offsets()[f];
        let embed = |qa: &DMatrix<f64>, c: f64| {
            let mut out = DMatrix::zeros(n + 1, n + 1);
            out.view_mut((0, n), (n, 1)).copy_from(qa);
            out.view_mut((n, 0), (1, n)).copy_from(&qa.transpose());
            for d in 0..=n {
                out[(d, d)] = c;
            }
            out
        };
        let schur = Affine {
            constant: embed(&DMatrix::zeros(n, 1), bf),
            terms: q.terms.iter().map(|(i, e)| (*i, embed(&(e * &af), 0.0))).collect(),
        };
        prob.add_matrix(format!("face {f}"), schur, 0.0);
    }
    prob.objective = Objective::MaximizeLogDet(q.clone());
    let sol = solve_with(&prob, &config.solver)?;
    if !sol.is_feasible() {
        return Err(Error::Infeasible(format!("not robustly stabilizable at the linear level ({:?})", sol.status)));
    }
    let qm = symmetrize(&q.eval(&sol.y));
    let pm = symmetrize(&inverse(&qm)?);

    // Y is not pinned down by the log-det objective; take the minimum-norm Y meeting the
    // vertex constraints with decay rate α at the optimal Q, relaxing α to 0 if needed
    let mut ym = y.eval(&sol.y);
    let fixed_q = Affine::constant(qm.clone());
    for decay in [config.nominal_decay, 0.0] {
        let yv = matrix_var(0, m, n);
        let t_at = m * n;
        let mut sub = SdpProblem::new(m * n + 1);
        for (v, lin) in verts.vertices.iter().enumerate() {
            let expr = vertex_expr(lin, &fixed_q, &yv).plus(&Affine::constant(&qm * (2.0 * decay)));
            sub.add_matrix(format!("vertex {v}"), expr.scaled(-1.0), config.lmi_margin);
        }
        sub.add_matrix("Y norm", norm_epigraph(&yv, t_at), 0.0);
        sub.objective = Objective::Minimize(vec![(t_at, 1.0)]);
        let mut start: Vec<f64> = ym.transpose().iter().copied().collect();
        start.push(ym.norm() + 1.0);
        sub.start = Some(start);
        let s = solve_with(&sub, &config.solver)?;
        if s.is_feasible() {
            ym = yv.eval(&s.y);
            break;
        }
    }
    let gain = ym * &pm;
    for lin in &verts.vertices {
        let acl = &lin.a + &lin.b * &gain;
        if !(max_eig(&(acl.transpose() * &pm + &pm * &acl)) < 0.0) {
            return Err(Error::Infeasible("not robustly stabilizable at the linear level (vertex re-check)".into()));
        }
    }
    Ok((gain, pm))
}

fn nominal_a_b(model: &dyn PlantModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let lin = linearize(model, &vec![0.0; model.param_dim()])?;
    Ok((lin.a, lin.b))
}

/// Multiplier variables of an update problem: `Λ` for sector entries of positive width
/// (pinned entries need none, see [`crate::certificate::signal_basis`]), then `γ`.
struct MultiplierLayout {
    n: usize,
    m: usize,
    free: Vec<usize>,
    lam_at: usize,
    gam_at: usize,
}

impl MultiplierLayout {
    fn new(sector: &SectorBound, first: usize) -> Self {
        let (n, m) = (sector.state_dim(), sector.input_dim());
        let w = n + m;
        let free: Vec<usize> =
            (0..n * w).filter(|&p| sector.lower[(p / w, p % w)] != sector.upper[(p / w, p % w)]).collect();
        let gam_at = first + free.len();
        Self { n, m, free, lam_at: first, gam_at }
    }

    fn end(&self) -> usize {
        self.gam_at + self.m * self.n
    }

    fn unpack(&self, y: &[f64]) -> QcMultipliers {
        let (n, m) = (self.n, self.m);
        let mut lambda = DMatrix::zeros(n, n + m);
        for (k, &p) in self.free.iter().enumerate() {
            lambda[(p / (n + m), p % (n + m))] = y[self.lam_at + k].max(0.0);
        }
        let gamma = DMatrix::from_row_slice(m, n, &y[self.gam_at..self.end()]).map(|v| v.max(0.0));
        QcMultipliers { gamma, lambda }
    }

    fn pack(&self, mult: Option<&QcMultipliers>) -> Vec<f64> {
        let w = self.n + self.m;
        let floor = |v: f64| v.max(1e-2);
        match mult {
            Some(mu) => self
                .free
                .iter()
                .map(|&p| floor(mu.lambda[(p / w, p % w)]))
                .chain(mu.gamma.transpose().iter().map(|&v| floor(v)))
                .collect(),
            None => vec![1.0; self.end() - self.lam_at],
        }
    }

    fn add_nonneg(&self, prob: &mut SdpProblem) {
        for v in self.lam_at..self.end() {
            prob.add_linear(LinearConstraint::nonneg(format!("multiplier {v}"), v, 0.0));
        }
    }
}

type MatrixConstraintSpec = (&'static str, Affine, f64);

/// Minimizes `‖X − X_prev‖₂` over the primary block `X` (variables `0..primary`) and
/// the multipliers subject to the restricted stability LMI.
#[allow(clippy::too_many_arguments)]
fn nearest_feasible(
    sector: &SectorBound,
    primary: &Affine,
    previous: &DMatrix<f64>,
    start: Vec<f64>,
    warm: Option<&QcMultipliers>,
    extra: Option<MatrixConstraintSpec>,
    config: &SynthesisConfig,
    lmi_at: impl Fn(&[f64], &DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>>,
) -> Result<Option<(Vec<f64>, QcMultipliers)>> {
    let layout = MultiplierLayout::new(sector, start.len());
    let t_at = layout.end();
    let nv = t_at + 1;
    let lmi = Affine::from_fn(nv, |y| {
        let mult = layout.unpack(y);
        reduce_lmi(sector, &-lmi_at(y, &mult.lambda, &mult.gamma)?)
    })?;
    let mut prob = SdpProblem::new(nv);
    prob.add_matrix("stability", lmi, config.lmi_margin);
    if let Some((name, expr, margin)) = extra {
        prob.add_matrix(name, expr, margin);
    }
    let dev = primary.plus(&Affine::constant(-previous));
    prob.add_matrix("deviation", norm_epigraph(&dev, t_at), 0.0);
    layout.add_nonneg(&mut prob);
    prob.objective = Objective::Minimize(vec![(t_at, 1.0)]);
    let mut y0 = start;
    y0.extend(layout.pack(warm));
    y0.push(1.0);
    prob.start = Some(y0);
    match solve_with(&prob, &config.solver) {
        Ok(sol) if sol.is_feasible() => {
            let mult = layout.unpack(&sol.y);
            Ok(Some((sol.y, mult)))
        }
        _ => Ok(None),
    }
}

/// Nearest gain (spectral norm) to `prev_gain` satisfying the stability LMI with `P`
/// held fixed and the sector held at its current value. `None` when infeasible.
pub fn gain_update(
    model: &dyn PlantModel,
    p: &DMatrix<f64>,
    prev_gain: &DMatrix<f64>,
    sector: &SectorBound,
    lipschitz: f64,
    warm: Option<&QcMultipliers>,
    config: &SynthesisConfig,
) -> Result<Option<(DMatrix<f64>, QcMultipliers)>> {
    let (n, m) = (model.state_dim(), model.input_dim());
    let (a0, b0) = nominal_a_b(model)?;
    let nk = m * n;
    let start: Vec<f64> = prev_gain.transpose().iter().copied().collect();
    let out = nearest_feasible(sector, &matrix_var(0, m, n), prev_gain, start, warm, None, config, |y, lambda, gamma| {
        let k = DMatrix::from_row_slice(m, n, &y[..nk]);
        let blocks = sector_qc_blocks(sector, lambda)?;
        stability_lmi(&(&a0 + &b0 * k), p, &blocks, lipschitz, gamma)
    })?;
    Ok(out.map(|(y, mult)| (DMatrix::from_row_slice(m, n, &y[..nk]), mult)))
}

/// Nearest `P` (spectral norm) to `prev_p` satisfying the stability LMI for a fixed gain.
pub fn lyapunov_update(
    model: &dyn PlantModel,
    gain: &DMatrix<f64>,
    prev_p: &DMatrix<f64>,
    sector: &SectorBound,
    lipschitz: f64,
    warm: Option<&QcMultipliers>,
    config: &SynthesisConfig,
) -> Result<Option<(DMatrix<f64>, QcMultipliers)>> {
    let n = model.state_dim();
    let (a0, b0) = nominal_a_b(model)?;
    let a0k = &a0 + &b0 * gain;
    let pvar = sym_matrix_var(0, n);
    let positive = ("P positive", pvar.clone(), config.p_min_eig);
    let out = nearest_feasible(sector, &pvar, prev_p, sym_pack(prev_p), warm, Some(positive), config, |y, lambda, gamma| {
        let blocks = sector_qc_blocks(sector, lambda)?;
        stability_lmi(&a0k, &pvar.eval(y), &blocks, lipschitz, gamma)
    })?;
    Ok(out.map(|(y, mult)| (symmetrize(&pvar.eval(&y)), mult)))
}

/// One iteration at domain scale `delta` and budget `lipschitz`: sector for the previous
/// gain, gain update, sector for the new gain, Lyapunov update, eigenvalue re-check.
pub fn iteration_step(
    model: &dyn PlantModel,
    params: &ParamBox,
    safe: &SafePolytope,
    prev: &Iterate,
    delta: f64,
    lipschitz: f64,
    config: &SynthesisConfig,
) -> Result<StepOutcome> {
    let domain = safe.scaled(delta)?;
    let sector = compute_sector(model, &prev.gain, lipschitz, &domain, params, config.sector_tol)?;
    let warm = prev.multipliers.is_nonnegative().then_some(&prev.multipliers);
    let Some((gain, mult)) = gain_update(model, &prev.p, &prev.gain, &sector, lipschitz, warm, config)? else {
        return Ok(StepOutcome::Infeasible("gain update infeasible".into()));
    };
    let sector = compute_sector(model, &gain, lipschitz, &domain, params, config.sector_tol)?;
    let Some((p, multipliers)) = lyapunov_update(model, &gain, &prev.p, &sector, lipschitz, Some(&mult), config)? else {
        return Ok(StepOutcome::Infeasible("Lyapunov update infeasible".into()));
    };
    let iterate = Iterate { gain, p, multipliers };
    let cert = StabilityCertificate {
        gain: iterate.gain.clone(),
        lipschitz,
        p: iterate.p.clone(),
        multipliers: iterate.multipliers.clone(),
        level: max_level(&iterate.p, &domain)?,
        scale: delta,
    };
    let lmi = crate::certificate::certificate_lmi(model, &cert, &sector)?;
    if !is_negative_definite(&lmi) || min_eig(&iterate.p) <= 0.0 {
        return Ok(StepOutcome::Infeasible("re-check of the stability LMI failed".into()));
    }
    Ok(StepOutcome::Feasible { iterate, sector })
}

/// Runs the full schedule `δ^k = kΔ`, `L^k = k·w·Δ`, `k = 1..n_steps`.
pub fn synthesize(
    model: &dyn PlantModel,
    params: &ParamBox,
    safe: &SafePolytope,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    config.validate()?;
    let (k0, p0) = init_nominal(model, params, safe, config)?;
    let (a0, b0) = nominal_a_b(model)?;
    let (n, m) = (model.state_dim(), model.input_dim());
    let step = config.step();
    let mut current = Iterate { gain: k0.clone(), p: p0.clone(), multipliers: QcMultipliers::zeros(n, m) };
    let mut current_sector: Option<SectorBound> = None;
    let mut successful = 0;
    let mut log = Vec::with_capacity(config.n_steps);
    for k in 1..=config.n_steps {
        let delta = k as f64 * step;
        let lipschitz = k as f64 * config.tradeoff * step;
        let outcome = if config.fail_at == Some(k) {
            StepOutcome::Infeasible("forced".into())
        } else {
            iteration_step(model, params, safe, &current, delta, lipschitz, config)?
        };
        match outcome {
            StepOutcome::Feasible { iterate, sector } => {
                log.push(IterationRecord {
                    k,
                    delta,
                    lipschitz,
                    feasible: true,
                    eig_real: eig_real_parts(&(&a0 + &b0 * &iterate.gain)),
                    level: max_level(&iterate.p, &safe.scaled(delta)?)?,
                });
                current = iterate;
                current_sector = Some(sector);
                successful = k;
            }
            StepOutcome::Infeasible(_) => {
                log.push(IterationRecord {
                    k,
                    delta,
                    lipschitz,
                    feasible: false,
                    eig_real: eig_real_parts(&(&a0 + &b0 * &current.gain)),
                    level: f64::NAN,
                });
                break;
            }
        }
    }
    let (scale, lipschitz, level) = if successful == 0 {
        (0.0, 0.0, max_level(&p0, safe)?)
    } else {
        let scale = successful as f64 * step;
        (scale, successful as f64 * config.tradeoff * step, max_level(&current.p, &safe.scaled(scale)?)?)
    };
    let result = SynthesisResult {
        gain: current.gain,
        lipschitz,
        p: current.p,
        level,
        scale,
        multipliers: current.multipliers,
        sector: current_sector,
        successful_steps: successful,
        initial_gain: k0,
        initial_p: p0,
        log,
    };
    if let (Some(cert), Some(sector)) = (result.certificate(), result.sector.as_ref()) {
        if let Verdict::Invalid(reason) = verify_certificate(model, &cert, sector, safe)? {
            return Err(Error::Solver(format!("final certificate failed verification: {reason}")));
        }
    }
    Ok(result)
}
