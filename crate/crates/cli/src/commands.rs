use std::path::{Path, PathBuf};

use lipstab::certificate::{max_level, verify_certificate, StabilityCertificate, Verdict};
use lipstab::io;
use lipstab::model::{linearize, ParamBox, PlantModel, SafePolytope};
use lipstab::policy::{lipschitz_upper_bound, train as train_actor, Mlp, PerturbedFeedback, TrainSetup};
use lipstab::sector::{compute_sector, SectorBound};
use lipstab::sim::{lqr_gain, monte_carlo_eval, rk4_rollout, run_rng, Ellipsoid, LinearFeedback, ParamSampler, Policy, PolicyEvaluation, RolloutSpec};
use lipstab::synthesis::{lyapunov_update, synthesize as run_synthesis, SynthesisResult};
use nalgebra::DMatrix;

use crate::config::{RunConfig, EXAMPLE_CONFIG};
use crate::error::CliError;
use crate::OUT_DIR_ENV;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    BoundSector,
    Synthesize,
    Certify,
    /// `fresh` ignores artifacts of earlier commands.
    Train { fresh: bool },
    Evaluate { fresh: bool },
    ReproduceExample,
}

/// `key=value` lines reported on standard output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    model: Box<dyn PlantModel>,
    params: ParamBox,
    safe: SafePolytope,
}

impl Context {
    pub fn new(cfg: RunConfig, out_dir: PathBuf) -> Result<Self> {
        let model = cfg.plant.build()?;
        let params = cfg.params()?;
        let safe = cfg.safe.build()?;
        Ok(Self { cfg, out_dir, model, params, safe })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|source| CliError::Io { path: self.out_dir.display().to_string(), source })?;
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
    }

    fn read(&self, name: &str) -> Result<Option<String>> {
        let path = self.path(name);
        match std::fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(CliError::Io { path: path.display().to_string(), source }),
        }
    }

    fn sector_for(&self, cert: &StabilityCertificate) -> Result<SectorBound> {
        Ok(compute_sector(
            self.model.as_ref(),
            &cert.gain,
            cert.lipschitz,
            &self.safe.scaled(cert.scale)?,
            &self.params,
            self.cfg.synthesis.sector_tol,
        )?)
    }
}

pub const SECTOR_FILE: &str = "sector.csv";
pub const CERTIFICATE_FILE: &str = "certificate.txt";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const ACTOR_FILE: &str = "actor.txt";
pub const CRITIC_FILE: &str = "critic.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const UTILITIES_FILE: &str = "utilities.csv";
pub const CONFIG_ECHO_FILE: &str = "config_used.toml";

/// Output directory: `flag`, then the environment override, then the configuration.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(cfg.output_dir.as_deref().unwrap_or("lipstab_out"))
}

pub fn load_config(path: Option<&Path>, command: Command) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::parse(&text)
        }
        None if command == Command::ReproduceExample => RunConfig::parse(EXAMPLE_CONFIG),
        None => Err(CliError::config("--config is required for this command")),
    }
}

pub fn run(command: Command, config: Option<&Path>, out_dir: Option<&Path>) -> Result<Summary> {
    let cfg = load_config(config, command)?;
    let out = resolve_out_dir(out_dir, &cfg);
    let ctx = Context::new(cfg, out)?;
    ctx.write(CONFIG_ECHO_FILE, &ctx.cfg.to_text())?;
    let mut summary = Summary::default();
    summary.push("out_dir", ctx.out_dir.display());
    match command {
        Command::BoundSector => bound_sector(&ctx, &mut summary)?,
        Command::Synthesize => {
            synthesize(&ctx, &mut summary)?;
        }
        Command::Certify => certify(&ctx, &mut summary)?,
        Command::Train { fresh } => {
            train(&ctx, fresh, &mut summary)?;
        }
        Command::Evaluate { fresh } => evaluate(&ctx, fresh, &mut summary)?,
        Command::ReproduceExample => evaluate(&ctx, true, &mut summary)?,
    }
    Ok(summary)
}

fn bound_sector(ctx: &Context, summary: &mut Summary) -> Result<()> {
    let spec = ctx.cfg.sector.as_ref().ok_or_else(|| CliError::config("sector: missing [sector] section"))?;
    let sector = compute_sector(
        ctx.model.as_ref(),
        &spec.gain,
        spec.lipschitz,
        &ctx.safe.scaled(spec.scale)?,
        &ctx.params,
        ctx.cfg.synthesis.sector_tol,
    )?;
    ctx.write(SECTOR_FILE, &io::sector_csv(&sector))?;
    summary.push("sector_entries", sector.state_dim() * (sector.state_dim() + sector.input_dim()));
    Ok(())
}

fn synthesize(ctx: &Context, summary: &mut Summary) -> Result<(SynthesisResult, StabilityCertificate, SectorBound)> {
    let res = run_synthesis(ctx.model.as_ref(), &ctx.params, &ctx.safe, &ctx.cfg.synthesis).map_err(|e| match e {
        lipstab::Error::Infeasible(why) => CliError::Infeasible(why),
        other => other.into(),
    })?;
    ctx.write(ITERATIONS_FILE, &io::iteration_log_csv(&res.log, ctx.model.state_dim()))?;
    summary.push("successful_iterations", res.successful_steps);
    let (Some(cert), Some(sector)) = (res.certificate(), res.sector.clone()) else {
        return Err(CliError::Infeasible("LMI infeasible at the first iteration; only the linear gain is certified".into()));
    };
    ctx.write(CERTIFICATE_FILE, &io::certificate_to_text(&cert))?;
    ctx.write(SECTOR_FILE, &io::sector_csv(&sector))?;
    summary.push("lipschitz", io::fmt_f64(cert.lipschitz));
    summary.push("level", io::fmt_f64(cert.level));
    summary.push("scale", io::fmt_f64(cert.scale));
    summary.push("certificate", "valid");
    Ok((res, cert, sector))
}

fn certify(ctx: &Context, summary: &mut Summary) -> Result<()> {
    let spec = ctx.cfg.certify.as_ref().ok_or_else(|| CliError::config("certify: missing [certify] section"))?;
    let n = ctx.model.state_dim();
    let domain = ctx.safe.scaled(spec.scale)?;
    let sector = compute_sector(ctx.model.as_ref(), &spec.gain, spec.lipschitz, &domain, &ctx.params, ctx.cfg.synthesis.sector_tol)?;
    ctx.write(SECTOR_FILE, &io::sector_csv(&sector))?;
    let start = spec.p.clone().unwrap_or_else(|| DMatrix::identity(n, n));
    let found = lyapunov_update(ctx.model.as_ref(), &spec.gain, &start, &sector, spec.lipschitz, None, &ctx.cfg.synthesis)?;
    let Some((p, multipliers)) = found else {
        return Err(CliError::Infeasible("LMI infeasible".into()));
    };
    let cert = StabilityCertificate {
        gain: spec.gain.clone(),
        lipschitz: spec.lipschitz,
        level: max_level(&p, &domain)?,
        p,
        multipliers,
        scale: spec.scale,
    };
    if let Verdict::Invalid(why) = verify_certificate(ctx.model.as_ref(), &cert, &sector, &ctx.safe)? {
        return Err(CliError::Infeasible(format!("LMI infeasible ({why})")));
    }
    ctx.write(CERTIFICATE_FILE, &io::certificate_to_text(&cert))?;
    summary.push("level", io::fmt_f64(cert.level));
    summary.push("certificate", "valid");
    Ok(())
}

/// Certificate from an earlier run when present (re-verified), otherwise a fresh synthesis.
fn certified(ctx: &Context, fresh: bool, summary: &mut Summary) -> Result<(StabilityCertificate, SectorBound)> {
    if !fresh {
        if let Some(text) = ctx.read(CERTIFICATE_FILE)? {
            let cert = io::parse_certificate(&text)?;
            let sector = ctx.sector_for(&cert)?;
            if let Verdict::Invalid(why) = verify_certificate(ctx.model.as_ref(), &cert, &sector, &ctx.safe)? {
                return Err(CliError::Infeasible(format!("stored certificate is invalid: {why}")));
            }
            summary.push("certificate", "loaded");
            return Ok((cert, sector));
        }
    }
    let (_, cert, sector) = synthesize(ctx, summary)?;
    Ok((cert, sector))
}

fn train(ctx: &Context, fresh: bool, summary: &mut Summary) -> Result<(StabilityCertificate, Mlp)> {
    let (cert, sector) = certified(ctx, fresh, summary)?;
    let mut config = ctx.cfg.train.config.clone();
    config.lipschitz_cap = ctx.cfg.train.lipschitz_cap.unwrap_or(cert.lipschitz);
    let reward = ctx.cfg.reward;
    let reward_fn = move |x: &[f64], u: &[f64]| reward.eval(x, u);
    let setup = TrainSetup {
        model: ctx.model.as_ref(),
        certificate: &cert,
        sector: &sector,
        safe: &ctx.safe,
        params: &ctx.params,
        reward: &reward_fn,
    };
    let out = train_actor(&setup, &config)?;
    ctx.write(ACTOR_FILE, &io::weights_to_text(&out.actor))?;
    ctx.write(CRITIC_FILE, &io::weights_to_text(&out.critic))?;
    ctx.write(TRAIN_LOG_FILE, &io::train_log_csv(&out.log))?;
    let worst = out.log.iter().map(|r| r.lipschitz).fold(lipschitz_upper_bound(&out.actor), f64::max);
    summary.push("lipschitz_cap", io::fmt_f64(config.lipschitz_cap));
    summary.push("actor_bound", io::fmt_f64(lipschitz_upper_bound(&out.actor)));
    summary.push("max_bound_during_training", io::fmt_f64(worst));
    Ok((cert, out.actor))
}

fn evaluate(ctx: &Context, fresh: bool, summary: &mut Summary) -> Result<()> {
    let stored = if fresh { None } else { ctx.read(ACTOR_FILE)? };
    let (cert, actor) = match stored {
        Some(text) => {
            let (cert, _) = certified(ctx, false, summary)?;
            let actor = io::parse_weights(&text)?;
            if lipschitz_upper_bound(&actor) > cert.lipschitz * (1.0 + 1e-12) {
                return Err(CliError::Infeasible("stored actor exceeds the certified Lipschitz budget".into()));
            }
            (cert, actor)
        }
        None => train(ctx, fresh, summary)?,
    };
    let e = &ctx.cfg.evaluate;
    let model = ctx.model.as_ref();
    let (n, m) = (model.state_dim(), model.input_dim());
    let lin = linearize(model, &ctx.params.center())?;
    let (k_lqr, _) = lqr_gain(
        &lin.a,
        &lin.b,
        &(DMatrix::identity(n, n) * e.lqr_state_weight),
        &(DMatrix::identity(m, m) * e.lqr_input_weight),
    )?;
    let trained = PerturbedFeedback { gain: cert.gain.clone(), actor: Some(actor) };
    let nominal = PerturbedFeedback { gain: cert.gain.clone(), actor: None };
    let lqr = LinearFeedback(k_lqr);
    let policies: [(&str, &dyn Policy); 3] = [("trained", &trained), ("nominal", &nominal), ("lqr", &lqr)];
    let init = Ellipsoid::new(cert.p.clone(), cert.level)?;
    let sampler = ParamSampler::UniformIid(ctx.params.clone());
    let spec = RolloutSpec { steps: e.n_steps, tau: e.tau, substeps: e.substeps };
    let reward = ctx.cfg.reward;
    let reward_fn = move |x: &[f64], u: &[f64]| reward.eval(x, u);
    let evals = monte_carlo_eval(model, &policies, e.n_runs, &init, &sampler, spec, e.seed, &reward_fn)?;
    ctx.write(STATS_FILE, &io::stats_csv(&evals))?;
    ctx.write(UTILITIES_FILE, &io::utilities_csv(&evals))?;
    if e.n_runs > 0 {
        for (name, policy) in policies {
            let mut rng = run_rng(e.seed, 0);
            let x0 = init.sample(&mut rng);
            let traj = rk4_rollout(model, policy, &x0, &sampler, &mut rng, spec, &reward_fn)?;
            ctx.write(&format!("trajectory_{name}.csv"), &io::trajectory_csv(&traj))?;
        }
    }
    report_comparison(&evals, summary);
    Ok(())
}

fn report_comparison(evals: &[PolicyEvaluation], summary: &mut Summary) {
    for ev in evals {
        if let Some(s) = ev.stats {
            summary.push(&format!("median_{}", ev.name), io::fmt_f64(s.median));
        }
        summary.push(&format!("diverged_{}", ev.name), ev.diverged.iter().filter(|d| **d).count());
    }
    let median = |name: &str| evals.iter().find(|e| e.name == name).and_then(|e| e.stats).map(|s| s.median);
    if let (Some(t), Some(l)) = (median("trained"), median("lqr")) {
        if l != 0.0 {
            summary.push("improvement_over_lqr_percent", format!("{:.2}", (t - l) / l.abs() * 100.0));
        }
    }
}
