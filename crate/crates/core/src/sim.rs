//! Closed-loop simulation with zero-order hold, utilities, the LQR baseline and paired
//! Monte-Carlo evaluation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::conic::{matrix_var, solve, sym_matrix_var, Affine, SdpProblem};
use crate::error::{check_len, check_shape, Error, Result};
use crate::linalg::{inv_sqrt_spd, is_hurwitz, min_eig, solve_lyapunov, symmetrize};
use crate::model::{ParamBox, PlantModel};

/// States with a larger Euclidean norm end a rollout as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;
pub const DEFAULT_SUBSTEPS: usize = 10;

/// State feedback `x ↦ u`.
pub trait Policy: Sync {
    fn control(&self, x: &[f64]) -> DVector<f64>;
}

impl<F> Policy for F
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    fn control(&self, x: &[f64]) -> DVector<f64> {
        self(x)
    }
}

/// `u = K x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFeedback(pub DMatrix<f64>);

impl Policy for LinearFeedback {
    fn control(&self, x: &[f64]) -> DVector<f64> {
        &self.0 * DVector::from_column_slice(x)
    }
}

/// Parameter evolution, piecewise constant over sampling periods.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamSampler {
    /// Fresh uniform draw over the box at every sampling instant.
    UniformIid(ParamBox),
    Constant(Vec<f64>),
}

impl ParamSampler {
    pub fn dim(&self) -> usize {
        match self {
            ParamSampler::UniformIid(b) => b.dim(),
            ParamSampler::Constant(t) => t.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ParamSampler::UniformIid(b) => b
                .lower()
                .iter()
                .zip(b.upper())
                .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect(),
            ParamSampler::Constant(t) => t.clone(),
        }
    }
}

/// Sampled closed-loop trajectory. `states` has one more entry than `controls` unless
/// the rollout diverged, in which case it stops at the last finite state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub params: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has an initial state")
    }
}

/// RK4 flow of `ẋ = f(x, u, θ)` over `tau` with `u`, `θ` held, using `substeps` steps.
pub fn integrate_held(
    model: &dyn PlantModel,
    x: &DVector<f64>,
    u: &[f64],
    theta: &[f64],
    tau: f64,
    substeps: usize,
) -> DVector<f64> {
    let h = tau / substeps as f64;
    let f = |x: &DVector<f64>| model.dynamics(x.as_slice(), u, theta);
    let mut x = x.clone();
    for _ in 0..substeps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Rollout settings shared by evaluation and training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutSpec {
    pub steps: usize,
    pub tau: f64,
    pub substeps: usize,
}

impl RolloutSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidInput(format!("sampling interval {} must be positive", self.tau)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidInput("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn diverged(x: &DVector<f64>) -> bool {
    !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_NORM
}

pub fn rk4_rollout<R: Rng + ?Sized>(
    model: &dyn PlantModel,
    policy: &dyn Policy,
    x0: &DVector<f64>,
    sampler: &ParamSampler,
    rng: &mut R,
    spec: RolloutSpec,
    reward: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<Trajectory> {
    spec.validate()?;
    check_len("initial state", x0.len(), model.state_dim())?;
    check_len("parameter sampler dimension", sampler.dim(), model.param_dim())?;
    let mut traj = Trajectory {
        tau: spec.tau,
        states: vec![x0.clone()],
        controls: Vec::with_capacity(spec.steps),
        params: Vec::with_capacity(spec.steps),
        rewards: Vec::with_capacity(spec.steps),
        diverged: diverged(x0),
    };
    if traj.diverged {
        return Ok(traj);
    }
    let mut x = x0.clone();
    for _ in 0..spec.steps {
        let u = policy.control(x.as_slice());
        check_len("policy output", u.len(), model.input_dim())?;
        let theta = sampler.sample(rng);
        let next = integrate_held(model, &x, u.as_slice(), &theta, spec.tau, spec.substeps);
        traj.rewards.push(reward(x.as_slice(), u.as_slice()));
        traj.controls.push(u);
        traj.params.push(theta);
        if diverged(&next) {
            traj.diverged = true;
            break;
        }
        traj.states.push(next.clone());
        x = next;
    }
    Ok(traj)
}

/// `J = Σ_k r(x(k), u(k))·τ`.
pub fn utility(traj: &Trajectory) -> f64 {
    traj.rewards.iter().sum::<f64>() * traj.tau
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` by Newton–Kleinman iteration.
/// Returns `(K, P)` with `u = K x`, `K = −R⁻¹BᵀP`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (a.nrows(), b.ncols());
    check_shape("A", a.shape(), (n, n))?;
    check_shape("B", b.shape(), (n, m))?;
    check_shape("Q", q.shape(), (n, n))?;
    check_shape("R", r.shape(), (m, m))?;
    if min_eig(q) < -1e-12 {
        return Err(Error::InvalidInput("Q must be positive semidefinite".into()));
    }
    if !(min_eig(r) > 0.0) {
        return Err(Error::InvalidInput("R must be positive definite".into()));
    }
    let r_inv = r.clone().try_inverse().ok_or_else(|| Error::InvalidInput("R is singular".into()))?;
    let mut k = stabilizing_gain(a, b)?;
    let mut p_prev: Option<DMatrix<f64>> = None;
    for _ in 0..100 {
        let acl = a + b * &k;
        let p = solve_lyapunov(&acl, &(q + k.transpose() * r * &k))?;
        k = -&r_inv * b.transpose() * &p;
        if let Some(prev) = &p_prev {
            if (&p - prev).amax() <= 1e-14 * p.amax().max(1.0) {
                p_prev = Some(p);
                break;
            }
        }
        p_prev = Some(p);
    }
    let p = symmetrize(&p_prev.expect("at least one iteration"));
    let residual = a.transpose() * &p + &p * a - &p * b * &r_inv * b.transpose() * &p + q;
    if residual.amax() > 1e-8 * p.amax().max(1.0) || !is_hurwitz(&(a + b * &k)) {
        return Err(Error::Solver(format!("Riccati iteration did not converge (residual {})", residual.amax())));
    }
    Ok((k, p))
}

/// `K = 0` when `A` is Hurwitz, otherwise `K = Y Q⁻¹` from `AQ + QAᵀ + BY + YᵀBᵀ ≼ −I`, `Q ≽ I`.
fn stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = (a.nrows(), b.ncols());
    if is_hurwitz(a) {
        return Ok(DMatrix::zeros(m, n));
    }
    let nq = n * (n + 1) / 2;
    let q = sym_matrix_var(0, n);
    let y = matrix_var(nq, m, n);
    let lyap = Affine::from_fn(nq + m * n, |v| {
        let (qm, ym) = (q.eval(v), y.eval(v));
        let s = a * &qm + b * &ym;
        Ok(-(&s + s.transpose()))
    })?;
    let mut prob = SdpProblem::new(nq + m * n);
    prob.add_matrix("Q", q.clone(), 1.0);
    prob.add_matrix("closed loop", lyap, 1.0);
    let sol = solve(&prob)?;
    if !sol.is_feasible() {
        return Err(Error::Infeasible("(A, B) is not stabilizable".into()));
    }
    let qm = q.eval(&sol.y);
    Ok(y.eval(&sol.y) * qm.try_inverse().ok_or_else(|| Error::Solver("singular Q".into()))?)
}

/// Uniform sample in `{x | xᵀPx ≤ σ}`.
pub fn sample_ellipsoid<R: Rng + ?Sized>(p_inv_sqrt: &DMatrix<f64>, sigma: f64, rng: &mut R) -> DVector<f64> {
    let n = p_inv_sqrt.nrows();
    let g: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let norm = g.norm();
    let radius: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    let y = if norm > 0.0 { g * (radius / norm) } else { DVector::zeros(n) };
    p_inv_sqrt * y * sigma.sqrt()
}

/// The ellipsoid `{x | xᵀPx ≤ σ}` with a cached `P^{-1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    pub p: DMatrix<f64>,
    pub level: f64,
    p_inv_sqrt: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn new(p: DMatrix<f64>, level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(Error::InvalidInput(format!("ellipsoid level {level} must be positive")));
        }
        let p_inv_sqrt = inv_sqrt_spd(&p)?;
        Ok(Self { p, level, p_inv_sqrt })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)]
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.value(x) <= self.level * (1.0 + 1e-12)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        // rounding can leave a boundary draw marginally outside
        let x = sample_ellipsoid(&self.p_inv_sqrt, self.level, rng);
        let v = self.value(&x);
        if v > self.level {
            x * (self.level / v).sqrt()
        } else {
            x
        }
    }
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some(BoxStats {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvaluation {
    pub name: String,
    pub utilities: Vec<f64>,
    pub diverged: Vec<bool>,
    pub stats: Option<BoxStats>,
}

/// Random source of run `run` under `seed`; every policy sees the same draws.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Paired comparison: run `i` of every policy starts from the same `x(0)` and sees the
/// same parameter sequence.
pub fn monte_carlo_eval(
    model: &dyn PlantModel,
    policies: &[(&str, &dyn Policy)],
    n_runs: usize,
    init: &Ellipsoid,
    sampler: &ParamSampler,
    spec: RolloutSpec,
    seed: u64,
    reward: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
) -> Result<Vec<PolicyEvaluation>> {
    spec.validate()?;
    check_len("ellipsoid dimension", init.dim(), model.state_dim())?;
    policies
        .iter()
        .map(|(name, policy)| {
            let runs: Vec<Trajectory> = (0..n_runs)
                .into_par_iter()
                .map(|i| {
                    let mut rng = run_rng(seed, i);
                    let x0 = init.sample(&mut rng);
                    rk4_rollout(model, *policy, &x0, sampler, &mut rng, spec, reward)
                })
                .collect::<Result<_>>()?;
            let utilities: Vec<f64> = runs.iter().map(utility).collect();
            Ok(PolicyEvaluation {
                name: name.to_string(),
                stats: box_stats(&utilities),
                diverged: runs.iter().map(|t| t.diverged).collect(),
                utilities,
            })
        })
        .collect()
}

/// Largest increase of `xᵀPx` between consecutive samples (≤ 0 when nonincreasing).
pub fn max_lyapunov_increase(traj: &Trajectory, p: &DMatrix<f64>) -> f64 {
    let v: Vec<f64> = traj.states.iter().map(|x| (x.transpose() * p * x)[(0, 0)]).collect();
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}
