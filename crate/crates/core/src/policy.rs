//! Bias-free tanh MLPs, their ∞-norm Lipschitz bound and the actor-critic trainer that
//! keeps the actor inside a certified Lipschitz budget.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::certificate::{verify_certificate, StabilityCertificate};
use crate::error::{check_len, Error, Result};
use crate::linalg::inf_norm;
use crate::model::{ParamBox, PlantModel, SafePolytope};
use crate::sector::SectorBound;
use crate::sim::{diverged, integrate_held, Ellipsoid, ParamSampler, Policy, DEFAULT_SUBSTEPS};

/// Smallest exploration variance used when inverting the covariance.
pub const MIN_VARIANCE: f64 = 1e-8;

/// `x ↦ W_l·tanh(…tanh(W_1·x)…)`. Biases are fixed at zero so the output vanishes at the
/// origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DMatrix<f64>>,
}

impl Mlp {
    pub fn new(layers: Vec<DMatrix<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[1].ncols() != w[0].nrows() {
                return Err(Error::Dimension(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    w[0].nrows(),
                    i + 1,
                    w[1].ncols()
                )));
            }
        }
        if layers.iter().any(|w| w.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite weight".into()));
        }
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput("need input and output sizes".into()));
        }
        Self::new(sizes.windows(2).map(|s| DMatrix::zeros(s[1], s[0])).collect())
    }

    /// Glorot-uniform initialization.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for w in &mut net.layers {
            let a = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-a..=a);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].nrows()
    }

    /// `[input, hidden…, output]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|w| w.nrows())).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|w| w.len()).sum()
    }

    /// Weights layer by layer, each row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for w in &self.layers {
            for r in 0..w.nrows() {
                out.extend(w.row(r).iter());
            }
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("parameter vector", p.len(), self.num_params())?;
        let mut it = p.iter();
        for w in &mut self.layers {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    w[(r, c)] = *it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len("network input", x.len(), self.input_dim())?;
        Ok(self.eval(x))
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        let mut h = DVector::from_column_slice(x);
        let last = self.layers.len() - 1;
        for (i, w) in self.layers.iter().enumerate() {
            h = w * h;
            if i < last {
                h.apply(|v| *v = v.tanh());
            }
        }
        h
    }

    /// Gradient of `vᵀ·net(x)` with respect to the parameters, in [`Mlp::params`] order.
    pub fn param_gradient(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", x.len(), self.input_dim())?;
        check_len("output cotangent", v.len(), self.output_dim())?;
        let last = self.layers.len() - 1;
        let mut acts = vec![DVector::from_column_slice(x)];
        for (i, w) in self.layers[..last].iter().enumerate() {
            let mut h = w * &acts[i];
            h.apply(|v| *v = v.tanh());
            acts.push(h);
        }
        let mut grads: Vec<DMatrix<f64>> = Vec::with_capacity(self.layers.len());
        let mut g = DVector::from_column_slice(v);
        for i in (0..=last).rev() {
            grads.push(&g * acts[i].transpose());
            if i > 0 {
                g = self.layers[i].transpose() * g;
                g.component_mul_assign(&acts[i].map(|h| 1.0 - h * h));
            }
        }
        grads.reverse();
        let mut out = Vec::with_capacity(self.num_params());
        for gw in &grads {
            for r in 0..gw.nrows() {
                out.extend(gw.row(r).iter());
            }
        }
        Ok(out)
    }

    pub fn scale_weights(&mut self, factor: f64) {
        for w in &mut self.layers {
            *w *= factor;
        }
    }
}

/// `∏ ‖W_i‖_∞`, an upper bound on the ∞-norm Lipschitz constant since tanh is
/// 1-Lipschitz elementwise.
pub fn lipschitz_upper_bound(net: &Mlp) -> f64 {
    net.layers.iter().map(inf_norm).product()
}

/// A subgradient of [`lipschitz_upper_bound`] in [`Mlp::params`] order: each layer's
/// first maximal row contributes `sign(W)` times the product of the other layer norms.
pub fn lipschitz_subgradient(net: &Mlp) -> Vec<f64> {
    let norms: Vec<f64> = net.layers.iter().map(inf_norm).collect();
    let mut out = Vec::with_capacity(net.num_params());
    for (i, w) in net.layers.iter().enumerate() {
        let others: f64 = norms.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).product();
        let row_sums: Vec<f64> = (0..w.nrows()).map(|r| w.row(r).iter().map(|v| v.abs()).sum()).collect();
        let active = row_sums
            .iter()
            .enumerate()
            .fold(0, |best, (r, &s)| if s > row_sums[best] { r } else { best });
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                let d = if r == active { w[(r, c)].signum() * f64::from(w[(r, c)] != 0.0) } else { 0.0 };
                out.push(d * others);
            }
        }
    }
    out
}

/// Scales every layer by `(cap/L)^{1/n_l}` when the bound `L` exceeds `cap`.
pub fn project_to_lipschitz(net: &Mlp, cap: f64) -> Result<Mlp> {
    if !(cap >= 0.0) {
        return Err(Error::InvalidInput(format!("Lipschitz cap {cap} must be nonnegative")));
    }
    let bound = lipschitz_upper_bound(net);
    let mut out = net.clone();
    if bound > cap && bound > 0.0 {
        out.scale_weights((cap / bound).powf(1.0 / net.num_layers() as f64));
        // rounding can leave the product a few ulps above the cap
        while lipschitz_upper_bound(&out) > cap {
            out.layers[0] *= 1.0 - f64::EPSILON;
        }
    }
    Ok(out)
}

/// `Σ_{l<n_a} r(k−l) + v(x(k+1)) − v(x(k−n_a+1))` with `rewards` holding `r(k−n_a+1..=k)`.
pub fn n_step_advantage(rewards: &[f64], value_next: f64, value_first: f64) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::InvalidInput("advantage needs at least one reward".into()));
    }
    Ok(rewards.iter().sum::<f64>() + value_next - value_first)
}

/// Adam first-order optimizer (minimizes).
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// `u = K x + π(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedFeedback {
    pub gain: DMatrix<f64>,
    pub actor: Option<Mlp>,
}

impl Policy for PerturbedFeedback {
    fn control(&self, x: &[f64]) -> DVector<f64> {
        let mut u = &self.gain * DVector::from_column_slice(x);
        if let Some(net) = &self.actor {
            u += net.eval(x);
        }
        u
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Diagonal of the initial exploration covariance.
    pub exploration: Vec<f64>,
    pub decay: f64,
    pub nu_min: f64,
    pub n_traj: usize,
    pub n_steps: usize,
    pub n_adv: usize,
    pub beta: f64,
    pub lipschitz_cap: f64,
    pub hidden: usize,
    pub substeps: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Settings of the two-state example.
    pub fn example(lipschitz_cap: f64) -> Self {
        Self {
            tau: 0.1,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            exploration: vec![0.0225, 0.0225],
            decay: 0.98,
            nu_min: 1e-4,
            n_traj: 600,
            n_steps: 200,
            n_adv: 20,
            beta: 1e-15,
            lipschitz_cap,
            hidden: 5,
            substeps: DEFAULT_SUBSTEPS,
            seed: 0,
        }
    }

    /// Every violated invariant, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            out.push(format!("tau = {} must be positive", self.tau));
        }
        if !(self.actor_lr > 0.0) {
            out.push(format!("actor_lr = {} must be positive", self.actor_lr));
        }
        if !(self.critic_lr > 0.0) {
            out.push(format!("critic_lr = {} must be positive", self.critic_lr));
        }
        if self.exploration.iter().any(|s| !(*s >= 0.0)) {
            out.push("exploration variances must be nonnegative".into());
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            out.push(format!("decay = {} must lie in (0, 1)", self.decay));
        }
        if !(self.nu_min > 0.0 && self.nu_min < 1.0) {
            out.push(format!("nu_min = {} must lie in (0, 1)", self.nu_min));
        }
        if self.n_adv == 0 {
            out.push("n_a must be at least 1".into());
        }
        if self.n_adv >= self.n_steps {
            out.push(format!("n_a < n_s violated (n_a = {}, n_s = {})", self.n_adv, self.n_steps));
        }
        if !(self.beta >= 0.0) {
            out.push(format!("beta = {} must be nonnegative", self.beta));
        }
        if !(self.lipschitz_cap >= 0.0) {
            out.push(format!("Lipschitz cap {} must be nonnegative", self.lipschitz_cap));
        }
        if self.hidden == 0 {
            out.push("hidden width must be at least 1".into());
        }
        if self.substeps == 0 {
            out.push("substeps must be at least 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().as_slice() {
            [] => Ok(()),
            v => Err(Error::InvalidInput(v.join("; "))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    pub trajectory: usize,
    pub ret: f64,
    /// Actor bound after the update and projection.
    pub lipschitz: f64,
    /// Exploration scale used during the trajectory.
    pub nu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log: Vec<TrainRecord>,
}

/// Seeded actor `n → hidden → m` projected into the budget, and critic `n → hidden → 1`.
pub fn init_networks(config: &TrainConfig, n: usize, m: usize) -> Result<(Mlp, Mlp)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let actor = Mlp::random(&[n, config.hidden, m], &mut rng)?;
    let critic = Mlp::random(&[n, config.hidden, 1], &mut rng)?;
    Ok((project_to_lipschitz(&actor, config.lipschitz_cap)?, critic))
}

/// Everything the trainer needs about the certified closed loop.
pub struct TrainSetup<'a> {
    pub model: &'a dyn PlantModel,
    pub certificate: &'a StabilityCertificate,
    pub sector: &'a SectorBound,
    pub safe: &'a SafePolytope,
    pub params: &'a ParamBox,
    pub reward: &'a dyn Fn(&[f64], &[f64]) -> f64,
}

pub fn train(setup: &TrainSetup, config: &TrainConfig) -> Result<TrainOutput> {
    let (actor, critic) = init_networks(config, setup.model.state_dim(), setup.model.input_dim())?;
    train_from(setup, config, actor, critic)
}

/// Actor-critic training from given networks. The actor's Lipschitz bound never exceeds
/// `config.lipschitz_cap` after an update.
pub fn train_from(setup: &TrainSetup, config: &TrainConfig, actor: Mlp, critic: Mlp) -> Result<TrainOutput> {
    config.validate()?;
    let model = setup.model;
    let cert = setup.certificate;
    let (n, m) = (model.state_dim(), model.input_dim());
    check_len("exploration covariance", config.exploration.len(), m)?;
    check_len("actor input", actor.input_dim(), n)?;
    check_len("actor output", actor.output_dim(), m)?;
    check_len("critic input", critic.input_dim(), n)?;
    check_len("critic output", critic.output_dim(), 1)?;
    if config.lipschitz_cap > cert.lipschitz * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "Lipschitz cap {} exceeds the certified budget {}",
            config.lipschitz_cap, cert.lipschitz
        )));
    }
    if let crate::certificate::Verdict::Invalid(why) = verify_certificate(model, cert, setup.sector, setup.safe)? {
        return Err(Error::InvalidInput(format!("refusing to train against an invalid certificate: {why}")));
    }
    let init = Ellipsoid::new(cert.p.clone(), cert.level)?;
    let sampler = ParamSampler::UniformIid(setup.params.clone());
    let mut actor = project_to_lipschitz(&actor, config.lipschitz_cap)?;
    let mut critic = critic;
    let mut actor_opt = Adam::new(config.actor_lr, actor.num_params());
    let mut critic_opt = Adam::new(config.critic_lr, critic.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nu = 1.0;
    let mut log = Vec::with_capacity(config.n_traj);
    let na = config.n_adv;

    for e in 0..config.n_traj {
        let var: Vec<f64> = config.exploration.iter().map(|s| nu * s).collect();
        let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let inv_var: Vec<f64> = var.iter().map(|v| 1.0 / v.max(MIN_VARIANCE)).collect();
        let mut d_actor = vec![0.0; actor.num_params()];
        let mut d_critic = vec![0.0; critic.num_params()];
        let mut x = init.sample(&mut rng);
        let mut states = vec![x.clone()];
        let mut rewards: Vec<f64> = Vec::with_capacity(config.n_steps);

        for k in 0..config.n_steps {
            let mean = actor.eval(x.as_slice());
            let noise = DVector::from_fn(m, |i, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std[i] * z
            });
            let u_nn = &mean + &noise;
            let u = &cert.gain * &x + &u_nn;
            let theta = sampler.sample(&mut rng);
            let next = integrate_held(model, &x, u.as_slice(), &theta, config.tau, config.substeps);
            rewards.push((setup.reward)(x.as_slice(), u.as_slice()));
            if diverged(&next) {
                break;
            }
            states.push(next.clone());
            if k >= na {
                let first = &states[k + 1 - na];
                let adv = n_step_advantage(
                    &rewards[k + 1 - na..=k],
                    critic.eval(next.as_slice())[0],
                    critic.eval(first.as_slice())[0],
                )?;
                let score: Vec<f64> = (0..m).map(|i| noise[i] * inv_var[i]).collect();
                let g_actor = actor.param_gradient(x.as_slice(), &score)?;
                let g_next = critic.param_gradient(next.as_slice(), &[1.0])?;
                let g_first = critic.param_gradient(first.as_slice(), &[1.0])?;
                let count = (k - na + 1) as f64;
                for (d, g) in d_actor.iter_mut().zip(&g_actor) {
                    *d += (g * adv - *d) / count;
                }
                for ((d, gn), gf) in d_critic.iter_mut().zip(&g_next).zip(&g_first) {
                    *d += ((gn - gf) * adv - *d) / count;
                }
            }
            x = next;
        }

        // ascent on the policy objective, descent on the squared advantage
        let reg = lipschitz_subgradient(&actor);
        let descent: Vec<f64> = d_actor.iter().zip(&reg).map(|(d, r)| -(d - config.beta * r)).collect();
        let mut rho = actor.params();
        actor_opt.step(&mut rho, &descent);
        actor.set_params(&rho)?;
        actor = project_to_lipschitz(&actor, config.lipschitz_cap)?;
        let mut phi = critic.params();
        critic_opt.step(&mut phi, &d_critic);
        critic.set_params(&phi)?;

        log.push(TrainRecord {
            trajectory: e,
            ret: rewards.iter().sum::<f64>() * config.tau,
            lipschitz: lipschitz_upper_bound(&actor),
            nu,
        });
        nu = (nu * config.decay).max(config.nu_min);
    }
    Ok(TrainOutput { actor, critic, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn random_net(seed: u64, sizes: &[usize]) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::random(sizes, &mut rng).unwrap()
    }

    #[test]
    fn forward_examples() {
        let net = random_net(0, &[2, 5, 2]);
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap().amax(), 0.0);
        let single = Mlp::new(vec![mat(1, 1, &[2.0])]).unwrap();
        assert_eq!(single.forward(&[1.0]).unwrap()[0], 2.0);
        let two = Mlp::new(vec![mat(1, 1, &[1.0]), mat(1, 1, &[1.0])]).unwrap();
        assert_relative_eq!(two.forward(&[1.0]).unwrap()[0], 0.761594, epsilon = 1e-6);
        assert!(net.forward(&[1.0]).is_err());
        assert!(Mlp::new(vec![mat(3, 2, &[0.0; 6]), mat(1, 2, &[0.0; 2])]).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(lipschitz_upper_bound(&Mlp::new(vec![mat(2, 2, &[1.0, -2.0, 0.0, 3.0])]).unwrap()), 3.0);
        let eye = DMatrix::identity(2, 2);
        let net = Mlp::new(vec![&eye * 2.0, &eye * 0.5]).unwrap();
        assert_eq!(lipschitz_upper_bound(&net), 1.0);
        assert_eq!(lipschitz_upper_bound(&Mlp::zeros(&[2, 5, 2]).unwrap()), 0.0);
    }

    #[test]
    fn trained_example_weights_bound() {
        let w1 = mat(5, 2, &[-0.0503, -0.3338, -0.4911, -0.2768, 0.4001, 0.0496, -0.2690, 0.3172, 0.0077, -0.1867]);
        let w2 = mat(2, 5, &[0.0119, 0.0393, -0.3223, -0.2757, -0.1733, 0.1496, 0.2292, 0.1309, 0.2942, 0.2662]);
        let net = Mlp::new(vec![w1, w2]).unwrap();
        assert_relative_eq!(lipschitz_upper_bound(&net), 0.8218, epsilon = 1e-4);
    }

    #[test]
    fn projection_examples() {
        let eye = DMatrix::identity(2, 2);
        let net = Mlp::new(vec![&eye * 2.0, &eye * 2.0]).unwrap();
        let p = project_to_lipschitz(&net, 1.0).unwrap();
        assert_relative_eq!(p.layers()[0][(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(lipschitz_upper_bound(&p), 1.0, epsilon = 1e-12);
        assert_eq!(project_to_lipschitz(&net, 5.0).unwrap(), net);
        let single = Mlp::new(vec![mat(1, 2, &[1.0, -2.0])]).unwrap();
        let p = project_to_lipschitz(&single, 1.5).unwrap();
        assert_eq!(p.layers()[0], mat(1, 2, &[0.5, -1.0]));
        let zero = Mlp::zeros(&[2, 3, 2]).unwrap();
        assert_eq!(project_to_lipschitz(&zero, 1.0).unwrap(), zero);
        assert!(project_to_lipschitz(&zero, -1.0).is_err());
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(n_step_advantage(&[0.0; 4], 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(n_step_advantage(&[1.0, 1.0], 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(n_step_advantage(&[0.5, -2.0, 0.25], 3.0, 3.0).unwrap(), -1.25);
        assert!(n_step_advantage(&[], 0.0, 0.0).is_err());
    }

    fn fd_check(f: impl Fn(&[f64]) -> f64, at: &[f64], grad: &[f64]) {
        for i in 0..at.len() {
            let h = 1e-6;
            let mut p = at.to_vec();
            p[i] += h;
            let up = f(&p);
            p[i] -= 2.0 * h;
            let fd = (up - f(&p)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * grad[i].abs().max(1e-3), "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn param_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let net = random_net(seed, &[3, 4, 5, 2]);
            let x = [0.3, -0.7, 0.2];
            let v = [0.9, -1.3];
            let g = net.param_gradient(&x, &v).unwrap();
            let f = |p: &[f64]| {
                let mut n = net.clone();
                n.set_params(p).unwrap();
                let y = n.forward(&x).unwrap();
                y[0] * v[0] + y[1] * v[1]
            };
            fd_check(f, &net.params(), &g);
        }
    }

    #[test]
    fn log_density_gradient_matches_finite_differences() {
        let net = random_net(9, &[2, 5, 2]);
        let x = [0.2, -0.1];
        let u = [0.3, -0.4];
        let var = [0.0225, 0.01];
        let mean = net.forward(&x).unwrap();
        let score: Vec<f64> = (0..2).map(|i| (u[i] - mean[i]) / var[i]).collect();
        let g = net.param_gradient(&x, &score).unwrap();
        let logp = |p: &[f64]| {
            let mut n = net.clone();
            n.set_params(p).unwrap();
            let y = n.forward(&x).unwrap();
            -(0..2).map(|i| (u[i] - y[i]).powi(2) / (2.0 * var[i])).sum::<f64>()
        };
        fd_check(logp, &net.params(), &g);
    }

    #[test]
    fn lipschitz_subgradient_matches_finite_differences() {
        let net = random_net(4, &[2, 5, 2]);
        let g = lipschitz_subgradient(&net);
        let f = |p: &[f64]| {
            let mut n = net.clone();
            n.set_params(p).unwrap();
            lipschitz_upper_bound(&n)
        };
        fd_check(f, &net.params(), &g);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut opt = Adam::new(0.05, 2);
        let mut p = vec![3.0, -2.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn config_validation_lists_everything() {
        let mut c = TrainConfig::example(1.1);
        assert!(c.validate().is_ok());
        c.n_adv = 200;
        c.decay = 1.0;
        let v = c.violations();
        assert_eq!(v.len(), 2);
        assert!(v[1].contains("n_a < n_s"), "{v:?}");
    }

    proptest! {
        #[test]
        fn bound_is_sound(seed in 0u64..1000, x1 in prop::array::uniform2(-2.0f64..2.0), x2 in prop::array::uniform2(-2.0f64..2.0)) {
            let net = random_net(seed, &[2, 5, 2]);
            let d = net.forward(&x1).unwrap() - net.forward(&x2).unwrap();
            let dx = (x1[0] - x2[0]).abs().max((x1[1] - x2[1]).abs());
            prop_assert!(d.amax() <= lipschitz_upper_bound(&net) * dx + 1e-12);
        }

        #[test]
        fn projection_caps_bound(seed in 0u64..1000, cap in 0.01f64..3.0) {
            let net = random_net(seed, &[2, 4, 3, 2]);
            let p = project_to_lipschitz(&net, cap).unwrap();
            prop_assert!(lipschitz_upper_bound(&p) <= cap);
        }
    }
}
